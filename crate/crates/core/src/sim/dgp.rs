use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{transforms, Column, Dataset, GroupRole, RoleMap};
use crate::error::Result;
use crate::model::sigmoid;
use crate::rng::{rng_from_seed, Rng};

/// Allowable covariates for both target factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllowableConvention {
    None,
    #[default]
    BaselineC,
}

/// Structural equations of the simulation population.
pub mod structural {
    use super::sigmoid;

    pub fn p_r(c: f64) -> f64 {
        sigmoid(0.5 - 0.5 * c)
    }

    pub fn p_a(r: f64, c: f64, x: [f64; 3]) -> f64 {
        sigmoid(-0.8 + r + 1.5 * c + x[0] + 0.2 * x[1] - 0.5 * x[2] + r * x[2])
    }

    pub fn mean_z(r: f64, c: f64, x: [f64; 3], a: f64) -> f64 {
        -0.5 + 0.2 * r + 0.5 * c - 0.5 * x[0] + 0.7 * x[1] + 0.5 * x[2] + 1.2 * a
    }

    pub fn p_m(r: f64, c: f64, x: [f64; 3], a: f64, z: f64) -> f64 {
        sigmoid(-1.0 + 2.0 * r + 0.2 * a + c - x[0] - 0.2 * x[1] + 1.5 * x[2] + r * x[1] + 0.5 * z)
    }

    pub fn mean_y(r: f64, c: f64, x: [f64; 3], a: f64, z: f64, m: f64) -> f64 {
        1.0 - 0.5 * r + 0.7 * m - 0.2 * r * m + 0.5 * r * m * a + a + c - x[0] + 0.5 * x[1] - 0.5 * x[2] - 0.5 * z
    }
}

pub(crate) fn bern(rng: &mut Rng, p: f64) -> f64 {
    if rng.random::<f64>() < p {
        1.0
    } else {
        0.0
    }
}

pub(crate) fn normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// One simulated unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unit {
    pub c: f64,
    pub r: f64,
    pub x: [f64; 3],
    pub a: f64,
    pub z: f64,
    pub m: f64,
    pub y: f64,
}

pub(crate) fn draw_unit(rng: &mut Rng) -> Unit {
    use structural::*;
    let c = bern(rng, 0.4);
    let r = bern(rng, p_r(c));
    let x = [normal(rng), normal(rng), normal(rng)];
    let a = bern(rng, p_a(r, c, x));
    let z = mean_z(r, c, x, a) + normal(rng);
    let m = bern(rng, p_m(r, c, x, a, z));
    let y = mean_y(r, c, x, a, z, m) + normal(rng);
    Unit { c, r, x, a, z, m, y }
}

pub fn roles_for(convention: AllowableConvention) -> RoleMap {
    let allow = match convention {
        AllowableConvention::None => vec![],
        AllowableConvention::BaselineC => vec!["C".to_string()],
    };
    RoleMap {
        group: GroupRole {
            column: "R".into(),
            reference: "0".into(),
            comparisons: vec!["1".into()],
        },
        baseline: vec!["C".into()],
        pre_confounders: vec!["X1".into(), "X2".into(), "X3".into()],
        system_factor: "A".into(),
        intermediate_confounders: vec!["Z".into()],
        individual_factor: "M".into(),
        outcome: "Y".into(),
        allowable_a: allow.clone(),
        allowable_m: allow,
        cluster: None,
    }
}

/// Draw `n` units from the structural equations. Columns: R (categorical
/// with reference "0"), C, X1, X2, X3, A, Z, M, Y.
pub fn generate_dgp(n: usize, seed: u64, convention: AllowableConvention) -> Result<(Dataset, RoleMap)> {
    let mut rng = rng_from_seed(seed);
    let units: Vec<Unit> = (0..n).map(|_| draw_unit(&mut rng)).collect();
    let get = |f: fn(&Unit) -> f64| units.iter().map(f).collect::<Vec<f64>>();
    let ds = Dataset::new(vec![
        Column::categorical(
            "R",
            vec!["0".into(), "1".into()],
            units.iter().map(|u| u.r as u32).collect(),
        )?,
        Column::binary("C", get(|u| u.c))?,
        Column::continuous("X1", get(|u| u.x[0]))?,
        Column::continuous("X2", get(|u| u.x[1]))?,
        Column::continuous("X3", get(|u| u.x[2]))?,
        Column::binary("A", get(|u| u.a))?,
        Column::continuous("Z", get(|u| u.z))?,
        Column::binary("M", get(|u| u.m))?,
        Column::continuous("Y", get(|u| u.y))?,
    ])?;
    Ok((ds, roles_for(convention)))
}

/// (X_m1, X_m2, X_m3) = (exp(X1)/2, X2/(1+exp(X1)) + 10, (X1·X3/25 + 0.6)³).
pub fn misspecify_features(x1: &[f64], x2: &[f64], x3: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    (
        x1.iter().map(|&a| transforms::misspec_exp_half(a)).collect(),
        x1.iter().zip(x2).map(|(&a, &b)| transforms::misspec_ratio(a, b)).collect(),
        x1.iter().zip(x3).map(|(&a, &c)| transforms::misspec_cubic(a, c)).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::structural::*;
    use super::*;

    #[test]
    fn structural_anchors() {
        assert!((p_r(0.0) - 0.622_459_331).abs() < 1e-8);
        assert_eq!(mean_z(0.0, 0.0, [0.0; 3], 0.0), -0.5);
        assert_eq!(mean_y(0.0, 0.0, [0.0; 3], 0.0, 0.0, 0.0), 1.0);
    }

    #[test]
    fn misspecification_values() {
        let (a, b, c) = misspecify_features(&[0.0, 2f64.ln()], &[0.0, 3.0], &[0.0, 0.0]);
        assert_eq!((a[0], b[0]), (0.5, 10.0));
        assert!((c[0] - 0.216).abs() < 1e-12);
        assert!((a[1] - 1.0).abs() < 1e-12 && (b[1] - 11.0).abs() < 1e-12 && (c[1] - 0.216).abs() < 1e-12);
    }

    #[test]
    fn generation_is_deterministic() {
        let (d1, _) = generate_dgp(50, 7, AllowableConvention::BaselineC).unwrap();
        let (d2, _) = generate_dgp(50, 7, AllowableConvention::BaselineC).unwrap();
        assert_eq!(d1.numeric("Y").unwrap(), d2.numeric("Y").unwrap());
        let (d3, _) = generate_dgp(50, 8, AllowableConvention::BaselineC).unwrap();
        assert_ne!(d1.numeric("Y").unwrap(), d3.numeric("Y").unwrap());
    }
}
