use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::decomposition::{CovariateEval, EstimatorKind, InterventionSpec};
use crate::error::{Error, Result};
use crate::model::GbtParams;
use crate::pipeline::{estimate, CrossFitConfig, EstimationConfig};
use crate::rng::{derive_seed, stream};

use super::dgp::{generate_dgp, AllowableConvention};
use super::metrics::{compute_metrics, Metrics};
use super::oracle::true_value_oracle;
use super::scenarios::{scenario_specs, Method};

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

fn one_or_many<'de, D: Deserializer<'de>, T: Deserialize<'de>>(d: D) -> std::result::Result<Vec<T>, D::Error> {
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

fn default_estimators() -> Vec<EstimatorKind> {
    EstimatorKind::SYNERGISTIC.to_vec()
}

fn default_k() -> usize {
    5
}

fn default_eval() -> CovariateEval {
    CovariateEval::Zero
}

fn default_oracle_n() -> usize {
    1_000_000
}

/// A grid of simulation cells: every scenario × method × n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(deserialize_with = "one_or_many")]
    pub scenario: Vec<u8>,
    #[serde(deserialize_with = "one_or_many")]
    pub method: Vec<Method>,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorKind>,
    #[serde(deserialize_with = "one_or_many")]
    pub n: Vec<usize>,
    pub replicates: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    pub seed: u64,
    #[serde(default)]
    pub convention: AllowableConvention,
    #[serde(default = "default_eval")]
    pub covariate_eval: CovariateEval,
    /// Fixed truth; computed by the oracle when absent.
    #[serde(default)]
    pub truth: Option<f64>,
    #[serde(default = "default_oracle_n")]
    pub oracle_n: usize,
    #[serde(default)]
    pub gbt: Option<GbtParams>,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.scenario.is_empty() || self.method.is_empty() || self.n.is_empty() {
            return bad("scenario, method and n must be non-empty".into());
        }
        if let Some(s) = self.scenario.iter().find(|s| !(1..=4).contains(*s)) {
            return bad(format!("scenario must be 1-4, got {s}"));
        }
        if self.n.contains(&0) {
            return bad("n must be positive".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.estimators.is_empty() {
            return bad("estimators must be non-empty".into());
        }
        if self.method.contains(&Method::GbtCrossfit) && self.k < 2 {
            return bad("k must be at least 2".into());
        }
        if let Some(p) = &self.gbt {
            p.validate()?;
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<SimulationCell> {
        let mut out = Vec::new();
        for &scenario in &self.scenario {
            for &method in &self.method {
                for &n in &self.n {
                    out.push(SimulationCell {
                        scenario,
                        method,
                        n,
                        estimators: self.estimators.clone(),
                        replicates: self.replicates,
                        k: self.k,
                        seed: self.seed,
                        convention: self.convention,
                        covariate_eval: self.covariate_eval,
                        gbt: self.gbt,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationCell {
    pub scenario: u8,
    pub method: Method,
    pub n: usize,
    pub estimators: Vec<EstimatorKind>,
    pub replicates: usize,
    pub k: usize,
    pub seed: u64,
    pub convention: AllowableConvention,
    pub covariate_eval: CovariateEval,
    pub gbt: Option<GbtParams>,
}

/// Replicates × estimators matrix of δ̂ for the comparison group.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateMatrix {
    pub estimators: Vec<EstimatorKind>,
    /// `None` marks a failed replicate.
    pub rows: Vec<Option<Vec<f64>>>,
    pub failures: Vec<(usize, String)>,
}

impl ReplicateMatrix {
    pub fn column(&self, kind: EstimatorKind) -> Vec<f64> {
        let j = self.estimators.iter().position(|&k| k == kind).expect("estimator in matrix");
        self.rows.iter().flatten().map(|r| r[j]).collect()
    }
}

/// Seed of the data set for replicate `r` at sample size `n`; shared by all
/// scenarios and methods so cells are compared on the same samples.
pub fn replicate_seed(seed: u64, n: usize, r: usize) -> u64 {
    derive_seed(derive_seed(seed, stream::REPLICATE, n as u64), stream::REPLICATE, r as u64)
}

pub fn estimation_config(cell: &SimulationCell) -> Result<EstimationConfig> {
    Ok(EstimationConfig {
        intervention: InterventionSpec::default(),
        models: scenario_specs(cell.scenario, cell.method, cell.gbt)?,
        estimators: cell.estimators.clone(),
        crossfit: (cell.method == Method::GbtCrossfit).then_some(CrossFitConfig {
            k: cell.k,
            respect_clusters: false,
        }),
        covariate_eval: cell.covariate_eval,
        trim: None,
        normalize: false,
    })
}

pub fn run_replicates(cell: &SimulationCell) -> Result<ReplicateMatrix> {
    let cfg = estimation_config(cell)?;
    let results: Vec<std::result::Result<Vec<f64>, String>> = (0..cell.replicates)
        .into_par_iter()
        .map(|r| {
            let s = replicate_seed(cell.seed, cell.n, r);
            let run = || -> Result<Vec<f64>> {
                let (ds, roles) = generate_dgp(cell.n, s, cell.convention)?;
                let est = estimate(&ds, &roles, &cfg, derive_seed(s, stream::MODEL, 0))?;
                Ok(est.records.iter().map(|rec| rec.delta).collect())
            };
            run().map_err(|e| e.to_string())
        })
        .collect();
    let mut rows = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(v) => rows.push(Some(v)),
            Err(e) => {
                failures.push((r, e));
                rows.push(None);
            }
        }
    }
    Ok(ReplicateMatrix {
        estimators: cell.estimators.clone(),
        rows,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scenario: u8,
    pub method: Method,
    pub estimator: EstimatorKind,
    pub n: usize,
    pub replicates_used: usize,
    pub failures: usize,
    pub median_bias: f64,
    pub median_rmse: f64,
    pub truth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthInfo {
    pub value: f64,
    pub source: String,
    pub oracle_n: Option<usize>,
    pub mc_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationOutput {
    pub config: SimulationConfig,
    pub truth: TruthInfo,
    pub cells: Vec<(SimulationCell, ReplicateMatrix)>,
    pub metrics: Vec<MetricsRow>,
}

pub fn resolve_truth(cfg: &SimulationConfig) -> TruthInfo {
    match cfg.truth {
        Some(v) => TruthInfo {
            value: v,
            source: "config".into(),
            oracle_n: None,
            mc_se: None,
        },
        None => {
            let o = true_value_oracle(cfg.oracle_n, derive_seed(cfg.seed, stream::ORACLE, 99), false);
            let c = o.cell(cfg.convention, cfg.covariate_eval);
            TruthInfo {
                value: c.delta_true,
                source: "oracle".into(),
                oracle_n: Some(cfg.oracle_n),
                mc_se: Some(c.se_delta),
            }
        }
    }
}

pub fn run_simulation(cfg: &SimulationConfig) -> Result<SimulationOutput> {
    cfg.validate()?;
    let truth = resolve_truth(cfg);
    let mut cells = Vec::new();
    let mut metrics = Vec::new();
    for cell in cfg.cells() {
        let mat = run_replicates(&cell)?;
        for &kind in &cell.estimators {
            let col = mat.column(kind);
            let m = if col.is_empty() {
                Metrics {
                    median_bias: f64::NAN,
                    median_rmse: f64::NAN,
                    n_used: 0,
                    truth: truth.value,
                }
            } else {
                compute_metrics(&col, truth.value)?
            };
            metrics.push(MetricsRow {
                scenario: cell.scenario,
                method: cell.method,
                estimator: kind,
                n: cell.n,
                replicates_used: m.n_used,
                failures: mat.failures.len(),
                median_bias: m.median_bias,
                median_rmse: m.median_rmse,
                truth: truth.value,
            });
        }
        cells.push((cell, mat));
    }
    Ok(SimulationOutput {
        config: cfg.clone(),
        truth,
        cells,
        metrics,
    })
}

impl SimulationOutput {
    pub fn estimates_csv(&self) -> String {
        let mut s = String::from("scenario,method,estimator,n,replicate,delta_hat\n");
        for (cell, mat) in &self.cells {
            for (r, row) in mat.rows.iter().enumerate() {
                if let Some(v) = row {
                    for (j, kind) in mat.estimators.iter().enumerate() {
                        let _ = writeln!(
                            s,
                            "{},{},{},{},{},{}",
                            cell.scenario,
                            cell.method.as_str(),
                            kind.as_str(),
                            cell.n,
                            r,
                            v[j]
                        );
                    }
                }
            }
        }
        s
    }

    pub fn metrics_csv(&self) -> String {
        let mut s = String::from("scenario,method,estimator,n,replicates_used,failures,median_bias,median_rmse,truth\n");
        for m in &self.metrics {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                m.scenario,
                m.method.as_str(),
                m.estimator.as_str(),
                m.n,
                m.replicates_used,
                m.failures,
                m.median_bias,
                m.median_rmse,
                m.truth
            );
        }
        s
    }

    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "seed": self.config.seed,
            "convention": self.config.convention,
            "covariate_eval": self.config.covariate_eval,
            "truth": self.truth,
            "config": self.config,
            "failures": self.cells.iter().map(|(c, m)| serde_json::json!({
                "scenario": c.scenario,
                "method": c.method,
                "n": c.n,
                "failed_replicates": m.failures.iter().map(|(r, e)| serde_json::json!({"replicate": r, "error": e})).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }

    /// Write `estimates.csv`, `metrics.csv` and `metadata.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("estimates.csv"), self.estimates_csv())?;
        std::fs::write(dir.join("metrics.csv"), self.metrics_csv())?;
        std::fs::write(dir.join("metadata.json"), serde_json::to_string_pretty(&self.metadata())? + "\n")?;
        Ok(())
    }
}
