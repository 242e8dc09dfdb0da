use serde::{Deserialize, Serialize};

use crate::data::{Dataset, RoleMap};
use crate::error::{Error, Result};

use super::adjust::{CovariateAdjuster, CovariateEval};
use super::intervention::Variant;
use super::nuisance::NuisanceSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Imputation,
    Weighting,
    ImpThenWeight,
    TriplyRobust,
    SingleFactorA,
    SingleFactorM,
}

impl EstimatorKind {
    pub const SYNERGISTIC: [EstimatorKind; 4] = [
        EstimatorKind::Imputation,
        EstimatorKind::Weighting,
        EstimatorKind::ImpThenWeight,
        EstimatorKind::TriplyRobust,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Imputation => "imputation",
            EstimatorKind::Weighting => "weighting",
            EstimatorKind::ImpThenWeight => "imp_then_weight",
            EstimatorKind::TriplyRobust => "triply_robust",
            EstimatorKind::SingleFactorA => "single_factor_a",
            EstimatorKind::SingleFactorM => "single_factor_m",
        }
    }
}

/// Target factor of a single-factor intervention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    A,
    M,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorOptions {
    #[serde(default)]
    pub covariate_eval: CovariateEval,
    /// Percentile caps (lower, upper) on weighting-estimator weights.
    #[serde(default)]
    pub trim: Option<[f64; 2]>,
    /// Hájek normalization of the weighting estimator.
    #[serde(default)]
    pub normalize: bool,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            covariate_eval: CovariateEval::GrandMean,
            trim: None,
            normalize: false,
        }
    }
}

impl EstimatorOptions {
    pub fn validate(&self) -> Result<()> {
        if let Some([lo, hi]) = self.trim {
            if !(0.0..=100.0).contains(&lo) || !(0.0..=100.0).contains(&hi) || lo >= hi {
                return Err(Error::InvalidArgument(format!("trim bounds [{lo}, {hi}] must satisfy 0 <= lo < hi <= 100")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Positivity {
    /// Range of π_A,i = P(A = A_i | ·) over the comparison group.
    pub min_pi_a: f64,
    pub max_pi_a: f64,
    pub min_pi_m: f64,
    pub max_pi_m: f64,
    pub n_trimmed: usize,
    /// Set when a fitted propensity falls below 0.01.
    pub warning: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupPsi {
    pub group: String,
    pub code: u32,
    pub psi: f64,
    pub positivity: Positivity,
    pub ridge_jitter: bool,
}

pub const POSITIVITY_WARNING: f64 = 0.01;

/// Observed target factors and outcome in the form the estimators use.
pub struct Observed {
    pub a: Vec<u8>,
    pub m: Vec<u8>,
    pub y: Vec<f64>,
}

impl Observed {
    pub fn from_dataset(ds: &Dataset, roles: &RoleMap) -> Result<Self> {
        let to_u8 = |c: &str| -> Result<Vec<u8>> {
            Ok(ds.numeric(c)?.iter().map(|&v| u8::from(v == 1.0)).collect())
        };
        Ok(Self {
            a: to_u8(&roles.system_factor)?,
            m: to_u8(&roles.individual_factor)?,
            y: ds.numeric(&roles.outcome)?.to_vec(),
        })
    }
}

fn w_a(n: &NuisanceSet, i: usize, a: u8) -> f64 {
    n.star_a(i, a) / n.pi_a(i, a)
}

fn w_m(n: &NuisanceSet, i: usize, m: u8) -> f64 {
    n.star_m(i, m) / n.pi_m(i, m)
}

/// Weight of the weighting estimator, π*_A π*_M / (π_A π_M).
pub fn joint_weight(n: &NuisanceSet, i: usize, a: u8, m: u8) -> f64 {
    w_a(n, i, a) * w_m(n, i, m)
}

/// Per-unit contribution φ_i whose (adjusted) group mean is ψ. Weighting is
/// returned untrimmed and unnormalized.
pub fn unit_contributions(kind: EstimatorKind, n: &NuisanceSet, obs: &Observed) -> Result<Vec<f64>> {
    let len = n.n_rows();
    if obs.y.len() != len {
        return Err(Error::Dimension(format!("{} nuisance rows but {} observations", len, obs.y.len())));
    }
    let draws = &n.draws;
    let nd = draws.len() as f64;
    let phi = |i: usize| -> f64 {
        let (a, m, y) = (obs.a[i], obs.m[i], obs.y[i]);
        let mu_tilde = |d: usize| {
            let at = match n.variant {
                Variant::Consistent => a,
                Variant::Literal => draws[d].a_tilde[i],
            };
            n.mu[at as usize][draws[d].m_tilde[i] as usize][i]
        };
        let nu_at_draw = |d: usize| draws[d].nu[draws[d].a_tilde[i] as usize][i];
        let nu_breve_draw = |d: usize| match n.variant {
            Variant::Consistent => draws[d].nu[a as usize][i],
            Variant::Literal => nu_at_draw(d),
        };
        let avg = |f: &dyn Fn(usize) -> f64| (0..draws.len()).map(f).sum::<f64>() / nd;
        match kind {
            EstimatorKind::Weighting => joint_weight(n, i, a, m) * y,
            EstimatorKind::Imputation if draws.is_empty() => n.nu_bar(i),
            EstimatorKind::Imputation => avg(&nu_at_draw),
            EstimatorKind::ImpThenWeight if draws.is_empty() => w_a(n, i, a) * n.mu_bar(i, a),
            EstimatorKind::ImpThenWeight => w_a(n, i, a) * avg(&mu_tilde),
            EstimatorKind::TriplyRobust => {
                let tail = joint_weight(n, i, a, m) * (y - n.mu_obs(i, a, m));
                if draws.is_empty() {
                    n.nu_bar(i) + w_a(n, i, a) * (n.mu_bar(i, a) - n.nu_breve(i, a)) + tail
                } else {
                    avg(&|d| nu_at_draw(d) + w_a(n, i, a) * (mu_tilde(d) - nu_breve_draw(d))) + tail
                }
            }
            EstimatorKind::SingleFactorM if draws.is_empty() => n.mu_bar_observed_a(i, a),
            EstimatorKind::SingleFactorM => avg(&|d| n.mu[a as usize][draws[d].m_tilde[i] as usize][i]),
            EstimatorKind::SingleFactorA => {
                let nat = n.nu_natural.as_ref().expect("checked below");
                if draws.is_empty() {
                    n.star_a(i, 0) * nat[0][i] + n.star_a(i, 1) * nat[1][i]
                } else {
                    avg(&|d| nat[draws[d].a_tilde[i] as usize][i])
                }
            }
        }
    };
    if kind == EstimatorKind::SingleFactorA && n.nu_natural.is_none() {
        return Err(Error::InvalidArgument(
            "single-factor A estimation needs the natural-course ν; refit nuisances with it enabled".into(),
        ));
    }
    let out: Vec<f64> = (0..len).map(phi).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Estimation(format!("non-finite {} contributions", kind.as_str())));
    }
    Ok(out)
}

/// Order statistic s_⌈len·q⌉ (1-based, clamped to the sample).
pub fn order_statistic(sorted: &[f64], q: f64) -> f64 {
    let k = ((sorted.len() as f64 * q).ceil() as usize).clamp(1, sorted.len());
    sorted[k - 1]
}

fn positivity(n: &NuisanceSet, obs: &Observed, rows: &[usize], n_trimmed: usize) -> Positivity {
    let fold = |f: &dyn Fn(usize) -> f64| {
        rows.iter()
            .map(|&i| f(i))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (min_pi_a, max_pi_a) = fold(&|i| n.pi_a(i, obs.a[i]));
    let (min_pi_m, max_pi_m) = fold(&|i| n.pi_m(i, obs.m[i]));
    Positivity {
        min_pi_a,
        max_pi_a,
        min_pi_m,
        max_pi_m,
        n_trimmed,
        warning: min_pi_a < POSITIVITY_WARNING || min_pi_m < POSITIVITY_WARNING,
    }
}

/// ψ for every comparison group.
pub fn estimate_psi(
    kind: EstimatorKind,
    ds: &Dataset,
    roles: &RoleMap,
    nuis: &NuisanceSet,
    opts: &EstimatorOptions,
) -> Result<Vec<GroupPsi>> {
    opts.validate()?;
    let obs = Observed::from_dataset(ds, roles)?;
    let adj = CovariateAdjuster::new(ds, roles, opts.covariate_eval)?;
    psi_with(kind, &obs, &adj, &roles.comparison_levels(ds)?, nuis, opts)
}

pub(crate) fn psi_with(
    kind: EstimatorKind,
    obs: &Observed,
    adj: &CovariateAdjuster,
    groups: &[(String, u32)],
    nuis: &NuisanceSet,
    opts: &EstimatorOptions,
) -> Result<Vec<GroupPsi>> {
    let base = unit_contributions(kind, nuis, obs)?;
    groups
        .iter()
        .map(|(label, code)| {
            let rows = adj.rows(*code);
            if rows.is_empty() {
                return Err(Error::Estimation(format!("comparison group `{label}` is empty")));
            }
            let mut n_trimmed = 0;
            let (psi, jitter) = if kind == EstimatorKind::Weighting && (opts.trim.is_some() || opts.normalize) {
                let mut w: Vec<f64> = rows.iter().map(|&i| joint_weight(nuis, i, obs.a[i], obs.m[i])).collect();
                if let Some([lo, hi]) = opts.trim {
                    let mut s = w.clone();
                    s.sort_by(f64::total_cmp);
                    let (cl, ch) = (order_statistic(&s, lo / 100.0), order_statistic(&s, hi / 100.0));
                    let cl = if lo == 0.0 { f64::NEG_INFINITY } else { cl };
                    for v in w.iter_mut() {
                        let c = v.clamp(cl, ch);
                        if c != *v {
                            n_trimmed += 1;
                            *v = c;
                        }
                    }
                }
                let scale = if opts.normalize {
                    rows.len() as f64 / w.iter().sum::<f64>()
                } else {
                    1.0
                };
                let mut phi = vec![0.0; base.len()];
                for (k, &i) in rows.iter().enumerate() {
                    phi[i] = w[k] * obs.y[i] * scale;
                }
                adj.mean_rows(&rows, &phi)?
            } else {
                adj.mean_rows(&rows, &base)?
            };
            Ok(GroupPsi {
                group: label.clone(),
                code: *code,
                psi,
                positivity: positivity(nuis, obs, &rows, n_trimmed),
                ridge_jitter: jitter,
            })
        })
        .collect()
}

pub fn estimate_imputation(ds: &Dataset, roles: &RoleMap, nuis: &NuisanceSet, opts: &EstimatorOptions) -> Result<Vec<GroupPsi>> {
    estimate_psi(EstimatorKind::Imputation, ds, roles, nuis, opts)
}

pub fn estimate_weighting(ds: &Dataset, roles: &RoleMap, nuis: &NuisanceSet, opts: &EstimatorOptions) -> Result<Vec<GroupPsi>> {
    estimate_psi(EstimatorKind::Weighting, ds, roles, nuis, opts)
}

pub fn estimate_imp_then_weight(
    ds: &Dataset,
    roles: &RoleMap,
    nuis: &NuisanceSet,
    opts: &EstimatorOptions,
) -> Result<Vec<GroupPsi>> {
    estimate_psi(EstimatorKind::ImpThenWeight, ds, roles, nuis, opts)
}

pub fn estimate_triply_robust(
    ds: &Dataset,
    roles: &RoleMap,
    nuis: &NuisanceSet,
    opts: &EstimatorOptions,
) -> Result<Vec<GroupPsi>> {
    estimate_psi(EstimatorKind::TriplyRobust, ds, roles, nuis, opts)
}

pub fn estimate_single_factor(
    ds: &Dataset,
    roles: &RoleMap,
    factor: Factor,
    nuis: &NuisanceSet,
    opts: &EstimatorOptions,
) -> Result<Vec<GroupPsi>> {
    let kind = match factor {
        Factor::A => EstimatorKind::SingleFactorA,
        Factor::M => EstimatorKind::SingleFactorM,
    };
    estimate_psi(kind, ds, roles, nuis, opts)
}
