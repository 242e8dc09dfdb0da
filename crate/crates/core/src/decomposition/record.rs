use serde::{Deserialize, Serialize};

use crate::data::{Dataset, RoleMap};
use crate::error::{Error, Result};

use super::adjust::{CovariateAdjuster, CovariateEval};
use super::estimators::{EstimatorKind, Positivity};

/// Decomposition of one comparison group's disparity by one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub group: String,
    pub estimator: EstimatorKind,
    /// Adjusted mean outcome of the comparison group.
    pub mean_group: f64,
    /// Adjusted mean outcome of the reference group.
    pub mean_reference: f64,
    pub tau: f64,
    pub psi: f64,
    pub delta: f64,
    pub zeta: f64,
    pub pct_reduction: Option<f64>,
    pub trim: Option<[f64; 2]>,
    pub normalized: bool,
    pub positivity: Option<Positivity>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

/// δ/τ·100, undefined when τ = 0.
pub fn pct_reduction(delta: f64, tau: f64) -> Option<f64> {
    (tau != 0.0).then(|| delta / tau * 100.0)
}

/// Percent display: rounded to two decimals, then printed with `decimals`
/// places (so 29.9509 shows as "29.9" with one decimal).
pub fn format_pct(pct: Option<f64>, decimals: usize) -> String {
    match pct {
        None => "NA".to_string(),
        Some(p) => {
            let r = (p * 100.0).round() / 100.0;
            format!("{r:.decimals$}%")
        }
    }
}

/// δ = m_r − ψ_r and ζ = ψ_r − m_0, so τ = m_r − m_0 = δ + ζ.
pub fn decompose(
    group: impl Into<String>,
    estimator: EstimatorKind,
    mean_group: f64,
    mean_reference: f64,
    psi: f64,
) -> EstimateRecord {
    let tau = mean_group - mean_reference;
    let delta = mean_group - psi;
    let zeta = psi - mean_reference;
    EstimateRecord {
        group: group.into(),
        estimator,
        mean_group,
        mean_reference,
        tau,
        psi,
        delta,
        zeta,
        pct_reduction: pct_reduction(delta, tau),
        trim: None,
        normalized: false,
        positivity: None,
        flags: Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDisparity {
    pub group: String,
    pub tau: f64,
    pub mean_group: f64,
    pub mean_reference: f64,
    pub ridge_jitter: bool,
}

/// τ_r from covariate-adjusted group means of the outcome.
pub fn estimate_initial_disparity(ds: &Dataset, roles: &RoleMap, eval: CovariateEval) -> Result<Vec<InitialDisparity>> {
    let adj = CovariateAdjuster::new(ds, roles, eval)?;
    let y = ds.numeric(&roles.outcome)?;
    let group = ds.column(&roles.group.column)?;
    let levels = group
        .levels()
        .ok_or_else(|| Error::domain(roles.group.column.as_str(), "group column must be categorical"))?;
    if levels.len() < 2 {
        return Err(Error::domain(roles.group.column.as_str(), "group needs at least two levels"));
    }
    let ref_code = levels
        .iter()
        .position(|l| *l == roles.group.reference)
        .ok_or_else(|| Error::domain(roles.group.column.as_str(), "reference level not present"))? as u32;
    let check = |code: u32, label: &str| -> Result<()> {
        if adj.rows(code).is_empty() {
            return Err(Error::domain(roles.group.column.as_str(), format!("group `{label}` has no rows")));
        }
        Ok(())
    };
    check(ref_code, &roles.group.reference)?;
    let (m0, j0) = adj.mean(ref_code, y)?;
    roles
        .comparison_levels(ds)?
        .into_iter()
        .map(|(label, code)| {
            check(code, &label)?;
            let (mr, jr) = adj.mean(code, y)?;
            Ok(InitialDisparity {
                group: label,
                tau: mr - m0,
                mean_group: mr,
                mean_reference: m0,
                ridge_jitter: j0 || jr,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_arithmetic() {
        assert_eq!(format_pct(pct_reduction(-0.049, -0.373), 2), "13.14%");
        assert_eq!(format_pct(pct_reduction(-0.183, -0.611), 1), "29.9%");
        assert_eq!(format_pct(None, 2), "NA");
    }

    #[test]
    fn decompose_identity() {
        // τ = −0.373, δ = −0.016 ⇒ ζ = −0.357
        let r = decompose("1", EstimatorKind::TriplyRobust, -0.373, 0.0, -0.357);
        assert!((r.delta + 0.016).abs() < 1e-12);
        assert!((r.zeta + 0.357).abs() < 1e-12);
        assert!((r.tau - r.delta - r.zeta).abs() < 1e-10);
        let z = decompose("1", EstimatorKind::Imputation, 2.0, 1.0, 2.0);
        assert_eq!(z.delta, 0.0);
        assert_eq!(z.zeta, z.tau);
        assert_eq!(z.pct_reduction, Some(0.0));
        let t0 = decompose("1", EstimatorKind::Imputation, 1.0, 1.0, 0.5);
        assert_eq!(t0.pct_reduction, None);
    }
}
