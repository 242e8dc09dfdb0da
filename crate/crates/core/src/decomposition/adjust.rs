use serde::{Deserialize, Serialize};

use crate::data::{build_design, Dataset, DesignMatrix, FeatureFormula, RoleMap, Term};
use crate::error::{Error, Result};
use crate::linalg::least_squares;

/// Baseline-covariate value at which group means are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateEval {
    /// Plain within-group mean (the group's own covariate mix).
    GroupMarginal,
    /// Within-group regression on baseline covariates evaluated at the
    /// full-sample covariate mean.
    #[default]
    GrandMean,
    /// Same regression evaluated at covariates equal to zero.
    Zero,
}

/// Covariate-adjusted group means of arbitrary per-unit quantities.
#[derive(Debug, Clone)]
pub struct CovariateAdjuster {
    eval: CovariateEval,
    codes: Vec<u32>,
    /// Intercept plus baseline covariates shifted by the evaluation point.
    design: Option<DesignMatrix>,
}

impl CovariateAdjuster {
    pub fn new(ds: &Dataset, roles: &RoleMap, eval: CovariateEval) -> Result<Self> {
        let codes = ds
            .column(&roles.group.column)?
            .codes()
            .ok_or_else(|| Error::domain(roles.group.column.as_str(), "group column must be categorical"))?
            .to_vec();
        let design = if roles.baseline.is_empty() || eval == CovariateEval::GroupMarginal {
            None
        } else {
            let terms = roles
                .baseline
                .iter()
                .map(|c| match eval {
                    CovariateEval::GrandMean => Term::Centered(c.clone()),
                    _ => Term::Column(c.clone()),
                })
                .collect();
            Some(build_design(ds, &FeatureFormula::new(true, terms))?)
        };
        Ok(Self { eval, codes, design })
    }

    pub fn eval(&self) -> CovariateEval {
        self.eval
    }

    pub fn rows(&self, code: u32) -> Vec<usize> {
        (0..self.codes.len()).filter(|&i| self.codes[i] == code).collect()
    }

    /// Adjusted mean of `v` (full length) within group `code`. The flag
    /// reports a rank-deficient covariate regression.
    pub fn mean(&self, code: u32, v: &[f64]) -> Result<(f64, bool)> {
        let rows = self.rows(code);
        self.mean_rows(&rows, v)
    }

    pub fn mean_rows(&self, rows: &[usize], v: &[f64]) -> Result<(f64, bool)> {
        if rows.is_empty() {
            return Err(Error::Estimation("a group has no rows".into()));
        }
        let vals: Vec<f64> = rows.iter().map(|&i| v[i]).collect();
        match &self.design {
            None => Ok((vals.iter().sum::<f64>() / vals.len() as f64, false)),
            Some(x) => {
                let (beta, jitter) = least_squares(&x.select_rows(rows), &vals, None)
                    .ok_or_else(|| Error::Estimation("covariate adjustment failed".into()))?;
                Ok((beta[0], jitter))
            }
        }
    }
}
