use serde::{Deserialize, Serialize};

use crate::data::FeatureFormula;
use crate::decomposition::NuisanceSpecs;
use crate::error::{Error, Result};
use crate::model::{Family, GbtParams, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Glm,
    Gbt,
    GbtCrossfit,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Glm => "glm",
            Method::Gbt => "gbt",
            Method::GbtCrossfit => "gbt_crossfit",
        }
    }
}

const XM: &str = "xm1(X1) + xm2(X1, X2) + xm3(X1, X3)";

/// Correct (data-generating) and misspecified GLM formulas per nuisance.
fn glm_formula(nuisance: &str, correct: bool) -> String {
    match (nuisance, correct) {
        ("pi_a", true) => "R + C + X1 + X2 + X3 + R:X3".into(),
        ("pi_m", true) => "R + A + C + X1 + X2 + X3 + Z + R:X2".into(),
        ("mu", true) => "R + M + A + C + X1 + X2 + X3 + Z + R:M + R:M:A".into(),
        ("nu", true) => "R + A + C + X1 + X2 + X3 + R:A + R:C + R:A:C".into(),
        ("pi_a", false) => format!("R + C + {XM}"),
        ("pi_m", false) => format!("R + A + C + {XM} + Z"),
        ("mu", false) => format!("R + M + A + C + {XM}"),
        ("nu", false) => format!("R + A + C + {XM}"),
        _ => unreachable!("unknown nuisance {nuisance}"),
    }
}

/// Boosting sees raw columns only; misspecification swaps in the
/// transformed confounders.
fn gbt_formula(nuisance: &str, correct: bool) -> String {
    let x = if correct { "X1 + X2 + X3" } else { XM };
    match nuisance {
        "pi_a" => format!("0 + R + C + {x}"),
        "pi_m" => format!("0 + R + A + C + {x} + Z"),
        "mu" if correct => format!("0 + R + M + A + C + {x} + Z"),
        "mu" => format!("0 + R + M + A + C + {x}"),
        "nu" => format!("0 + R + A + C + {x}"),
        _ => unreachable!("unknown nuisance {nuisance}"),
    }
}

/// Which of (π_A, π_M, μ, ν) are correctly specified.
pub fn correct_components(scenario: u8) -> Result<[bool; 4]> {
    match scenario {
        1 => Ok([false, false, true, true]),
        2 => Ok([true, true, false, false]),
        3 => Ok([true, false, true, false]),
        4 => Ok([false, false, false, false]),
        s => Err(Error::InvalidArgument(format!("scenario must be 1-4, got {s}"))),
    }
}

pub fn scenario_specs(scenario: u8, method: Method, gbt: Option<GbtParams>) -> Result<NuisanceSpecs> {
    let ok = correct_components(scenario)?;
    let spec = |name: &str, correct: bool, binary: bool| -> Result<ModelSpec> {
        Ok(match method {
            Method::Glm => ModelSpec::glm(
                if binary { Family::LogisticGlm } else { Family::LinearGlm },
                FeatureFormula::parse(&glm_formula(name, correct))?,
            ),
            Method::Gbt | Method::GbtCrossfit => ModelSpec::gbt(
                if binary { Family::GbtBinary } else { Family::GbtRegression },
                FeatureFormula::parse(&gbt_formula(name, correct))?,
                gbt.unwrap_or_default(),
            ),
        })
    };
    Ok(NuisanceSpecs {
        pi_a: spec("pi_a", ok[0], true)?,
        pi_m: spec("pi_m", ok[1], true)?,
        mu: spec("mu", ok[2], false)?,
        nu: spec("nu", ok[3], false)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_formulas() {
        let s4 = scenario_specs(4, Method::Glm, None).unwrap();
        assert_eq!(s4.mu.formula.to_string(), "R + M + A + C + xm1(X1) + xm2(X1, X2) + xm3(X1, X3)");
        let s1 = scenario_specs(1, Method::Glm, None).unwrap();
        assert!(s1.mu.formula.to_string().contains("R:M:A"));
        assert!(s1.mu.formula.to_string().contains("R:M"));
        let s2 = scenario_specs(2, Method::Glm, None).unwrap();
        assert!(s2.pi_a.formula.to_string().contains("R:X3"));
        assert!(scenario_specs(5, Method::Glm, None).is_err());
        let g = scenario_specs(3, Method::GbtCrossfit, None).unwrap();
        assert_eq!(g.mu.family, Family::GbtRegression);
        assert!(g.pi_m.formula.to_string().contains("xm1"));
    }
}
