use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use synergy_decomp::data::{MissingPolicy, RoleMap};
use synergy_decomp::decomposition::{CovariateEval, EstimatorKind, InterventionSpec, NuisanceSpecs};
use synergy_decomp::inference::BootstrapConfig;
use synergy_decomp::pipeline::{CrossFitConfig, EstimationConfig};
use synergy_decomp::sim::AllowableConvention;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    /// CSV path, relative to the config file.
    pub data: PathBuf,
    pub roles: RoleMap,
    #[serde(default)]
    pub missing: MissingPolicy,
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
    #[serde(default)]
    pub bootstrap: Option<BootstrapConfig>,
    pub seed: u64,
}

impl AnalyzeConfig {
    pub fn estimation(&self) -> EstimationConfig {
        EstimationConfig {
            intervention: self.intervention.clone(),
            models: self.models.clone().with_defaults(),
            estimators: self.estimators.clone(),
            crossfit: self.crossfit,
            covariate_eval: self.covariate_eval,
            trim: self.trim,
            normalize: self.normalize,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(alias = "N")]
    pub n: usize,
    pub seed: u64,
    /// Report this convention; by default the one matching the reference value.
    #[serde(default)]
    pub convention: Option<AllowableConvention>,
    #[serde(default)]
    pub covariate_eval: Option<CovariateEval>,
    #[serde(default)]
    pub null_intervention: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub n: usize,
    pub seed: u64,
    /// Output CSV path, relative to `--out`; defaults to `data.csv`.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub convention: AllowableConvention,
}
