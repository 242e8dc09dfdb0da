//! One full estimation pass: intervention distributions, nuisances
//! (optionally cross-fitted), estimators and decomposition records.

use serde::{Deserialize, Serialize};

use crate::crossfit::{crossfit_nuisances, make_folds, CrossFitPlan};
use crate::data::{Dataset, RoleMap};
use crate::decomposition::{
    decompose, fit_nuisances, psi_with, CovariateAdjuster, CovariateEval, EstimateRecord, EstimatorKind,
    EstimatorOptions, InterventionSpec, NuisanceSet, NuisanceSpecs, Observed, Provenance,
};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossFitConfig {
    pub k: usize,
    /// Keep every cluster of `roles.cluster` inside one fold.
    #[serde(default)]
    pub respect_clusters: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationConfig {
    #[serde(default)]
    pub intervention: InterventionSpec,
    pub models: NuisanceSpecs,
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub crossfit: Option<CrossFitConfig>,
    #[serde(default)]
    pub covariate_eval: CovariateEval,
    #[serde(default)]
    pub trim: Option<[f64; 2]>,
    #[serde(default)]
    pub normalize: bool,
}

impl EstimationConfig {
    pub fn options(&self) -> EstimatorOptions {
        EstimatorOptions {
            covariate_eval: self.covariate_eval,
            trim: self.trim,
            normalize: self.normalize,
        }
    }

    pub fn validate(&self, roles: &RoleMap) -> Result<()> {
        if self.estimators.is_empty() {
            return Err(Error::InvalidArgument("estimators: at least one estimator is required".into()));
        }
        self.models.validate(roles)?;
        self.intervention.validate(roles)?;
        self.options().validate()?;
        if let Some(cf) = self.crossfit {
            if cf.k < 2 {
                return Err(Error::InvalidArgument("crossfit.k must be at least 2".into()));
            }
            if cf.respect_clusters && roles.cluster.is_none() {
                return Err(Error::Schema("crossfit.respect_clusters requires roles.cluster".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuisanceSummary {
    pub provenance: Provenance,
    pub degenerate: Vec<String>,
    pub ridge_jitter: Vec<String>,
    pub plan: Option<CrossFitPlan>,
}

#[derive(Debug, Clone)]
pub struct Estimation {
    pub records: Vec<EstimateRecord>,
    pub nuisance: NuisanceSet,
    pub summary: NuisanceSummary,
}

impl Estimation {
    pub fn is_degenerate(&self) -> bool {
        !self.summary.degenerate.is_empty()
    }
}

pub(crate) fn cluster_codes<'a>(ds: &'a Dataset, roles: &RoleMap) -> Result<Option<&'a [u32]>> {
    match &roles.cluster {
        None => Ok(None),
        Some(c) => Ok(Some(ds.column(c)?.codes().ok_or_else(|| {
            Error::Schema(format!("cluster column `{c}` must be categorical"))
        })?)),
    }
}

/// Run every configured estimator once on `ds`.
pub fn estimate(ds: &Dataset, roles: &RoleMap, cfg: &EstimationConfig, seed: u64) -> Result<Estimation> {
    roles.validate_structure()?;
    roles.validate(ds)?;
    cfg.validate(roles)?;
    let need_natural = cfg.estimators.contains(&EstimatorKind::SingleFactorA);
    let model_seed = derive_seed(seed, stream::MODEL, 0);
    let (nuis, plan) = match cfg.crossfit {
        None => (fit_nuisances(ds, roles, &cfg.models, &cfg.intervention, need_natural, model_seed)?, None),
        Some(cf) => {
            let clusters = if cf.respect_clusters { cluster_codes(ds, roles)? } else { None };
            let plan = make_folds(ds.n_rows(), cf.k, derive_seed(seed, stream::FOLDS, 0), clusters)?;
            let nuis = crossfit_nuisances(ds, roles, &cfg.models, &plan, &cfg.intervention, need_natural, model_seed)?;
            (nuis, Some(plan))
        }
    };
    let records = records_from_nuisances(ds, roles, &nuis, &cfg.estimators, &cfg.options())?;
    let summary = NuisanceSummary {
        provenance: nuis.provenance.clone(),
        degenerate: nuis.degenerate.clone(),
        ridge_jitter: nuis.ridge_jitter.clone(),
        plan,
    };
    Ok(Estimation {
        records,
        nuisance: nuis,
        summary,
    })
}

/// Decomposition records for each comparison group and estimator, group-major.
pub fn records_from_nuisances(
    ds: &Dataset,
    roles: &RoleMap,
    nuis: &NuisanceSet,
    estimators: &[EstimatorKind],
    opts: &EstimatorOptions,
) -> Result<Vec<EstimateRecord>> {
    opts.validate()?;
    let obs = Observed::from_dataset(ds, roles)?;
    let adj = CovariateAdjuster::new(ds, roles, opts.covariate_eval)?;
    let groups = roles.comparison_levels(ds)?;
    let ref_code = roles
        .leading_group_levels()
        .first()
        .and_then(|r| ds.column(&roles.group.column).ok()?.levels()?.iter().position(|l| l == r))
        .ok_or_else(|| Error::domain(roles.group.column.as_str(), "reference level not present"))? as u32;
    if adj.rows(ref_code).is_empty() {
        return Err(Error::Estimation("reference group has no rows".into()));
    }
    let (m0, j0) = adj.mean(ref_code, &obs.y)?;
    let mut group_means = Vec::with_capacity(groups.len());
    for (label, code) in &groups {
        if adj.rows(*code).is_empty() {
            return Err(Error::Estimation(format!("comparison group `{label}` has no rows")));
        }
        group_means.push(adj.mean(*code, &obs.y)?);
    }
    let mut per_kind = Vec::with_capacity(estimators.len());
    for &kind in estimators {
        per_kind.push(psi_with(kind, &obs, &adj, &groups, nuis, opts)?);
    }
    let mut out = Vec::new();
    for (g, (label, _)) in groups.iter().enumerate() {
        let (mr, jr) = group_means[g];
        for (k, &kind) in estimators.iter().enumerate() {
            let gp = &per_kind[k][g];
            let mut rec = decompose(label.clone(), kind, mr, m0, gp.psi);
            if kind == EstimatorKind::Weighting {
                rec.trim = opts.trim;
                rec.normalized = opts.normalize;
            }
            if j0 || jr || gp.ridge_jitter {
                rec.flags.push("covariate_adjustment_ridge_jitter".into());
            }
            if gp.positivity.warning {
                rec.flags.push("positivity_warning".into());
            }
            rec.flags.extend(nuis.degenerate.iter().map(|d| format!("degenerate:{d}")));
            rec.positivity = Some(gp.positivity.clone());
            out.push(rec);
        }
    }
    Ok(out)
}
