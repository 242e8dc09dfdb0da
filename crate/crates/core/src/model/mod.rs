//! Nuisance-function learners behind one interface: linear and logistic
//! GLMs and gradient-boosted trees for regression and binary targets.

mod gbt;
mod glm;

use serde::{Deserialize, Serialize};

use crate::data::{build_design, Dataset, DesignMatrix, FeatureFormula};
use crate::error::{Error, Result};

pub use gbt::{fit_gbt, Tree, TreeNode};
pub use glm::{fit_linear, fit_logistic_irls, logistic_gradient, logistic_log_likelihood};

/// Probabilities are kept inside [PROB_CLIP, 1 − PROB_CLIP].
pub const PROB_CLIP: f64 = 1e-6;

pub fn clip_prob(p: f64) -> f64 {
    p.clamp(PROB_CLIP, 1.0 - PROB_CLIP)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    LinearGlm,
    LogisticGlm,
    GbtRegression,
    GbtBinary,
}

impl Family {
    pub fn is_gbt(self) -> bool {
        matches!(self, Family::GbtRegression | Family::GbtBinary)
    }

    pub fn is_binary(self) -> bool {
        matches!(self, Family::LogisticGlm | Family::GbtBinary)
    }

    /// The same learner type for a continuous target.
    pub fn regression_counterpart(self) -> Family {
        match self {
            Family::LinearGlm | Family::LogisticGlm => Family::LinearGlm,
            Family::GbtRegression | Family::GbtBinary => Family::GbtRegression,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbtParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub l2_lambda: f64,
    pub subsample: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            n_trees: 300,
            learning_rate: 0.05,
            max_depth: 3,
            min_child_weight: 10.0,
            l2_lambda: 1.0,
            subsample: 1.0,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("gbt parameter {m}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.min_child_weight >= 0.0) {
            return bad("min_child_weight must be non-negative");
        }
        if !(self.l2_lambda >= 0.0) {
            return bad("l2_lambda must be non-negative");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must lie in (0, 1]");
        }
        Ok(())
    }
}

/// A learner family plus the features it sees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    pub formula: FeatureFormula,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gbt: Option<GbtParams>,
}

impl ModelSpec {
    pub fn glm(family: Family, formula: FeatureFormula) -> Self {
        Self { family, formula, gbt: None }
    }

    pub fn gbt(family: Family, formula: FeatureFormula, params: GbtParams) -> Self {
        Self {
            family,
            formula,
            gbt: Some(params),
        }
    }

    /// Fill default boosting parameters for a GBT family that omitted them.
    pub fn with_defaults(mut self) -> Self {
        if self.family.is_gbt() && self.gbt.is_none() {
            self.gbt = Some(GbtParams::default());
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        match (self.family.is_gbt(), &self.gbt) {
            (true, Some(p)) => p.validate(),
            (false, None) => Ok(()),
            (true, None) => Err(Error::InvalidArgument("gbt family requires gbt parameters".into())),
            (false, Some(_)) => Err(Error::InvalidArgument("gbt parameters given for a GLM family".into())),
        }
    }

    /// Same learner and features, fitted to a continuous target.
    pub fn as_regression(&self) -> ModelSpec {
        ModelSpec {
            family: self.family.regression_counterpart(),
            ..self.clone()
        }
    }

    pub fn design(&self, ds: &Dataset) -> Result<DesignMatrix> {
        build_design(ds, &self.formula)
    }

    pub fn fit_design(&self, x: &DesignMatrix, y: &[f64], seed: u64) -> Result<FittedModel> {
        self.validate()?;
        match self.family {
            Family::LinearGlm => fit_linear(x, y),
            Family::LogisticGlm => fit_logistic_irls(x, y),
            Family::GbtRegression | Family::GbtBinary => {
                fit_gbt(x, y, self, seed)
            }
        }
    }

    pub fn fit(&self, ds: &Dataset, y: &[f64], seed: u64) -> Result<FittedModel> {
        let x = self.design(ds)?;
        self.fit_design(&x, y, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Glm {
        names: Vec<String>,
        coefficients: Vec<f64>,
    },
    Gbt {
        base_score: f64,
        learning_rate: f64,
        trees: Vec<Tree>,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    /// Deviance for GLMs, mean training loss for boosting.
    pub final_loss: f64,
    pub converged: bool,
    pub ridge_jitter: bool,
    pub degenerate: bool,
    /// Training loss before the first round and after every round (boosting only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loss_trace: Vec<f64>,
}

/// A fitted, immutable model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub family: Family,
    pub n_features: usize,
    pub params: ModelParams,
    pub diagnostics: FitDiagnostics,
}

impl FittedModel {
    /// Predictions on the response scale; classifier outputs are clipped.
    pub fn predict(&self, x: &DesignMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features {
            return Err(Error::Dimension(format!(
                "model expects {} columns, got {}",
                self.n_features,
                x.n_cols()
            )));
        }
        let raw = self.predict_raw(x);
        Ok(if self.family.is_binary() {
            raw.into_iter().map(|v| clip_prob(sigmoid(v))).collect()
        } else {
            raw
        })
    }

    /// Linear predictor (GLM) or additive score (GBT) before any link.
    pub fn predict_raw(&self, x: &DesignMatrix) -> Vec<f64> {
        match &self.params {
            ModelParams::Glm { coefficients, .. } => x.mul_vec(coefficients),
            ModelParams::Gbt {
                base_score,
                learning_rate,
                trees,
            } => {
                let mut out = vec![*base_score; x.n_rows()];
                for t in trees {
                    for (i, o) in out.iter_mut().enumerate() {
                        *o += learning_rate * t.leaf_value(|f| x.get(i, f));
                    }
                }
                out
            }
        }
    }

    pub fn coefficients(&self) -> Option<&[f64]> {
        match &self.params {
            ModelParams::Glm { coefficients, .. } => Some(coefficients),
            ModelParams::Gbt { .. } => None,
        }
    }
}

pub(crate) fn check_inputs(x: &DesignMatrix, y: &[f64]) -> Result<()> {
    if x.n_rows() == 0 {
        return Err(Error::InvalidArgument("cannot fit a model on zero rows".into()));
    }
    if x.n_rows() != y.len() {
        return Err(Error::Dimension(format!("{} design rows but {} targets", x.n_rows(), y.len())));
    }
    if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Estimation("non-finite values in model inputs".into()));
    }
    Ok(())
}
