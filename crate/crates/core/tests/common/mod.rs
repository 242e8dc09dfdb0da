//! Discrete toy population: C, R, X, A, Z, M binary, Y Gaussian around a
//! known mean table. Counterfactual means are computed by exact summation.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use synergy_decomp::data::{Column, Dataset, FeatureFormula, GroupRole, RoleMap};
use synergy_decomp::model::{Family, ModelSpec};
use synergy_decomp::decomposition::NuisanceSpecs;

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn bern(p: f64, v: u8) -> f64 {
    if v == 1 {
        p
    } else {
        1.0 - p
    }
}

pub fn p_c() -> f64 {
    0.45
}
pub fn p_r(c: f64) -> f64 {
    sig(0.2 - 0.8 * c)
}
pub fn p_x(r: f64, c: f64) -> f64 {
    sig(-0.3 + 0.9 * r + 0.5 * c)
}
pub fn p_a(r: f64, x: f64, c: f64) -> f64 {
    sig(-0.6 + 1.0 * r + 1.2 * x + 0.6 * c - 0.8 * r * x)
}
pub fn p_z(r: f64, x: f64, a: f64, c: f64) -> f64 {
    sig(-0.4 + 0.5 * r + 0.9 * x + 1.3 * a + 0.3 * c)
}
pub fn p_m(r: f64, x: f64, a: f64, z: f64, c: f64) -> f64 {
    sig(-0.8 + 1.1 * r + 1.0 * x + 0.4 * a + 1.2 * z + 0.5 * c - 0.7 * r * z)
}
pub fn mean_y(r: f64, x: f64, a: f64, z: f64, m: f64, c: f64) -> f64 {
    1.0 - 0.5 * r + 0.9 * m + 0.7 * a + 0.8 * z + 1.0 * x + 0.6 * c + 0.5 * a * m - 0.4 * r * m + 0.6 * x * z + 0.8 * a * z
}

const B: [u8; 2] = [0, 1];

/// P(C=c, X=x | R=r).
fn p_cx_given_r(r: u8, c: u8, x: u8) -> f64 {
    let joint = |c: u8| bern(p_c(), c) * bern(p_r(f64::from(c)), r);
    let norm = joint(0) + joint(1);
    joint(c) / norm * bern(p_x(f64::from(r), f64::from(c)), x)
}

/// P(X=x | R=r, C=c).
fn p_x_given_rc(r: u8, c: u8, x: u8) -> f64 {
    bern(p_x(f64::from(r), f64::from(c)), x)
}

/// Reference-group law of A given C: Σ_x P(x | R=0, c) P(A=1 | 0, x, c).
pub fn star_a(c: u8) -> f64 {
    B.iter()
        .map(|&x| p_x_given_rc(0, c, x) * p_a(0.0, f64::from(x), f64::from(c)))
        .sum()
}

/// Reference-group law of M given C.
pub fn star_m(c: u8) -> f64 {
    let mut s = 0.0;
    for x in B {
        for a in B {
            for z in B {
                let (xf, af, zf, cf) = (f64::from(x), f64::from(a), f64::from(z), f64::from(c));
                s += p_x_given_rc(0, c, x)
                    * bern(p_a(0.0, xf, cf), a)
                    * bern(p_z(0.0, xf, af, cf), z)
                    * p_m(0.0, xf, af, zf, cf);
            }
        }
    }
    s
}

/// Observed E[Y | R=r].
pub fn observed_mean(r: u8) -> f64 {
    let rf = f64::from(r);
    let mut s = 0.0;
    for c in B {
        for x in B {
            for a in B {
                for z in B {
                    for m in B {
                        let (cf, xf, af, zf, mf) = (f64::from(c), f64::from(x), f64::from(a), f64::from(z), f64::from(m));
                        s += p_cx_given_r(r, c, x)
                            * bern(p_a(rf, xf, cf), a)
                            * bern(p_z(rf, xf, af, cf), z)
                            * bern(p_m(rf, xf, af, zf, cf), m)
                            * mean_y(rf, xf, af, zf, mf, cf);
                    }
                }
            }
        }
    }
    s
}

/// Which target factors are drawn from the reference law.
#[derive(Clone, Copy)]
pub enum Target {
    Joint,
    OnlyA,
    OnlyM,
}

/// E[Y(G_a, G_m) | R=r] by exact summation. A and M follow the reference
/// group's law given C when intervened, their own natural law otherwise.
pub fn counterfactual_mean(r: u8, target: Target) -> f64 {
    let rf = f64::from(r);
    let mut s = 0.0;
    for c in B {
        let cf = f64::from(c);
        for x in B {
            let xf = f64::from(x);
            for a in B {
                let af = f64::from(a);
                let pa = match target {
                    Target::Joint | Target::OnlyA => bern(star_a(c), a),
                    Target::OnlyM => bern(p_a(rf, xf, cf), a),
                };
                for z in B {
                    let zf = f64::from(z);
                    for m in B {
                        let mf = f64::from(m);
                        let pm = match target {
                            Target::Joint | Target::OnlyM => bern(star_m(c), m),
                            Target::OnlyA => bern(p_m(rf, xf, af, zf, cf), m),
                        };
                        s += p_cx_given_r(r, c, x) * pa * bern(p_z(rf, xf, af, cf), z) * pm * mean_y(rf, xf, af, zf, mf, cf);
                    }
                }
            }
        }
    }
    s
}

pub fn roles() -> RoleMap {
    RoleMap {
        group: GroupRole {
            column: "R".into(),
            reference: "0".into(),
            comparisons: vec!["1".into()],
        },
        baseline: vec!["C".into()],
        pre_confounders: vec!["X".into()],
        system_factor: "A".into(),
        intermediate_confounders: vec!["Z".into()],
        individual_factor: "M".into(),
        outcome: "Y".into(),
        allowable_a: vec!["C".into()],
        allowable_m: vec!["C".into()],
        cluster: None,
    }
}

pub fn sample(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: [Vec<f64>; 7] = Default::default();
    let draw = |p: f64, rng: &mut ChaCha8Rng| f64::from(u8::from(rng.random::<f64>() < p));
    for _ in 0..n {
        let c = draw(p_c(), &mut rng);
        let r = draw(p_r(c), &mut rng);
        let x = draw(p_x(r, c), &mut rng);
        let a = draw(p_a(r, x, c), &mut rng);
        let z = draw(p_z(r, x, a, c), &mut rng);
        let m = draw(p_m(r, x, a, z, c), &mut rng);
        let e: f64 = rng.sample(StandardNormal);
        let y = mean_y(r, x, a, z, m, c) + e;
        for (k, v) in [c, r, x, a, z, m, y].into_iter().enumerate() {
            cols[k].push(v);
        }
    }
    let [c, r, x, a, z, m, y] = cols;
    Dataset::new(vec![
        Column::binary("C", c).unwrap(),
        Column::categorical("R", vec!["0".into(), "1".into()], r.iter().map(|&v| v as u32).collect()).unwrap(),
        Column::binary("X", x).unwrap(),
        Column::binary("A", a).unwrap(),
        Column::binary("Z", z).unwrap(),
        Column::binary("M", m).unwrap(),
        Column::continuous("Y", y).unwrap(),
    ])
    .unwrap()
}

fn logistic(f: FeatureFormula) -> ModelSpec {
    ModelSpec::glm(Family::LogisticGlm, f)
}

fn linear(f: FeatureFormula) -> ModelSpec {
    ModelSpec::glm(Family::LinearGlm, f)
}

/// Saturated models for every nuisance.
pub fn saturated_specs() -> NuisanceSpecs {
    NuisanceSpecs {
        pi_a: logistic(FeatureFormula::saturated(&["R", "X", "C"])),
        pi_m: logistic(FeatureFormula::saturated(&["R", "X", "A", "Z", "C"])),
        mu: linear(FeatureFormula::saturated(&["R", "X", "A", "Z", "M", "C"])),
        nu: linear(FeatureFormula::saturated(&["R", "X", "A", "C"])),
    }
}

/// Saturated models with the chosen components replaced by models that omit
/// the confounders X and Z. Order: (π_A, π_M, μ, ν).
pub fn specs_with(correct: [bool; 4]) -> NuisanceSpecs {
    let sat = saturated_specs();
    let f = |s: &str| FeatureFormula::parse(s).unwrap();
    NuisanceSpecs {
        pi_a: if correct[0] { sat.pi_a } else { logistic(f("R + C")) },
        pi_m: if correct[1] { sat.pi_m } else { logistic(f("R + C")) },
        mu: if correct[2] { sat.mu } else { linear(f("R + A + M + C")) },
        nu: if correct[3] { sat.nu } else { linear(f("R + C")) },
    }
}
