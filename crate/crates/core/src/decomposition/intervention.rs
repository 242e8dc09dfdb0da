use serde::{Deserialize, Serialize};

use crate::data::{build_design, Dataset, FeatureFormula, RoleMap};
use crate::error::{Error, Result};
use crate::model::fit_logistic_irls;

/// How one target factor is intervened upon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum FactorIntervention {
    /// Draw the factor from the reference group's law given the allowable
    /// covariates. `allowable: None` uses the role map's declaration.
    Equalize {
        #[serde(default)]
        allowable: Option<Vec<String>>,
    },
    /// Point mass on one level.
    SetValue { level: u8 },
    /// Keep each unit's own fitted conditional law (equalize-to-self).
    Natural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Integration {
    /// Sum over both factor levels analytically.
    #[default]
    Marginalize,
    /// Average over simulated factor values.
    Draw { n_draws: usize, seed: u64 },
}

/// Where μ is evaluated when averaging over the intervened M.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// μ at the observed A; the A-intervention is carried by ν and the A-weights.
    #[default]
    Consistent,
    /// μ at the intervened Ã with observed Z, and ν̆ replaced by ν̄.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterventionSpec {
    pub a: FactorIntervention,
    pub m: FactorIntervention,
    #[serde(default)]
    pub integration: Integration,
    #[serde(default)]
    pub variant: Variant,
}

impl Default for InterventionSpec {
    fn default() -> Self {
        Self {
            a: FactorIntervention::Equalize { allowable: None },
            m: FactorIntervention::Equalize { allowable: None },
            integration: Integration::Marginalize,
            variant: Variant::Consistent,
        }
    }
}

impl InterventionSpec {
    pub fn validate(&self, roles: &RoleMap) -> Result<()> {
        for (f, name) in [(&self.a, "a"), (&self.m, "m")] {
            match f {
                FactorIntervention::SetValue { level } if *level > 1 => {
                    return Err(Error::InvalidArgument(format!(
                        "intervention.{name}: level must be 0 or 1, got {level}"
                    )))
                }
                FactorIntervention::Equalize { allowable: Some(cols) } => {
                    for c in cols {
                        if !roles.baseline.contains(c) {
                            return Err(Error::InvalidArgument(format!(
                                "intervention.{name}: allowable `{c}` is not a baseline covariate"
                            )));
                        }
                    }
                }
                _ => {}
            }
        }
        if let Integration::Draw { n_draws: 0, .. } = self.integration {
            return Err(Error::InvalidArgument("intervention.integration: n_draws must be positive".into()));
        }
        Ok(())
    }
}

/// Per-unit P(factor = 1) under the intervention, or `None` when the factor
/// keeps its natural law (resolved later from the fitted propensity).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InterventionProbs {
    pub a: Option<Vec<f64>>,
    pub m: Option<Vec<f64>>,
    pub degenerate_a: bool,
    pub degenerate_m: bool,
}

fn fit_factor(
    ds: &Dataset,
    roles: &RoleMap,
    factor: &str,
    mode: &FactorIntervention,
    declared: &[String],
) -> Result<(Option<Vec<f64>>, bool)> {
    let n = ds.n_rows();
    match mode {
        FactorIntervention::SetValue { level } => Ok((Some(vec![f64::from(*level); n]), false)),
        FactorIntervention::Natural => Ok((None, false)),
        FactorIntervention::Equalize { allowable } => {
            let cols: Vec<&str> = allowable.as_deref().unwrap_or(declared).iter().map(String::as_str).collect();
            let group = ds.column(&roles.group.column)?;
            let codes = group
                .codes()
                .ok_or_else(|| Error::domain(roles.group.column.as_str(), "group column must be categorical"))?;
            let reference = group
                .levels()
                .and_then(|l| l.iter().position(|x| *x == roles.group.reference))
                .ok_or_else(|| Error::domain(roles.group.column.as_str(), "reference level not present"))?
                as u32;
            let rows: Vec<usize> = (0..n).filter(|&i| codes[i] == reference).collect();
            if rows.is_empty() {
                return Err(Error::domain(roles.group.column.as_str(), "reference group is empty"));
            }
            let formula = FeatureFormula::saturated(&cols);
            let x = build_design(ds, &formula)?;
            let y = ds.numeric(factor)?;
            let yr: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            let model = fit_logistic_irls(&x.select_rows(&rows), &yr)?;
            Ok((Some(model.predict(&x)?), model.diagnostics.degenerate))
        }
    }
}

/// Fit π*_A and π*_M on the full sample. Equalize fits a logistic model of
/// the factor on the allowable covariates among reference-group rows and
/// evaluates it for every unit. The model is saturated in the allowables, so
/// with discrete allowables the values are reference-group stratum proportions.
pub fn fit_intervention_distributions(
    ds: &Dataset,
    roles: &RoleMap,
    spec: &InterventionSpec,
) -> Result<InterventionProbs> {
    spec.validate(roles)?;
    let (a, degenerate_a) = fit_factor(ds, roles, &roles.system_factor, &spec.a, &roles.allowable_a)?;
    let (m, degenerate_m) = fit_factor(ds, roles, &roles.individual_factor, &spec.m, &roles.allowable_m)?;
    Ok(InterventionProbs {
        a,
        m,
        degenerate_a,
        degenerate_m,
    })
}
