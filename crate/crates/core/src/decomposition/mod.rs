//! Estimands and estimators: initial disparity, disparity reduction and
//! disparity remaining under single-factor and joint interventions.

mod adjust;
mod estimators;
mod intervention;
mod nuisance;
mod record;

pub use adjust::{CovariateAdjuster, CovariateEval};
pub use estimators::{
    estimate_imp_then_weight, estimate_imputation, estimate_psi, estimate_single_factor, estimate_triply_robust,
    estimate_weighting, joint_weight, order_statistic, unit_contributions, EstimatorKind, EstimatorOptions, Factor,
    GroupPsi, Observed, Positivity, POSITIVITY_WARNING,
};
pub(crate) use estimators::psi_with;
pub use intervention::{
    fit_intervention_distributions, FactorIntervention, Integration, InterventionProbs, InterventionSpec, Variant,
};
pub use nuisance::{fit_nuisances, DrawPredictions, FoldRecord, NuisanceSet, NuisanceSpecs, Provenance, Source};
pub(crate) use nuisance::{assemble, fit_pass, NuisanceInputs};
pub use record::{decompose, estimate_initial_disparity, format_pct, pct_reduction, EstimateRecord, InitialDisparity};
