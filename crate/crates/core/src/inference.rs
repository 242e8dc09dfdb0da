//! Bootstrap standard errors, t- and p-values and percentile intervals.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::data::{Dataset, RoleMap};
use crate::decomposition::{format_pct, order_statistic, EstimateRecord, EstimatorKind};
use crate::error::{Error, Result};
use crate::pipeline::{cluster_codes, estimate, Estimation, EstimationConfig};
use crate::rng::{derive_seed, rng_from_seed, stream, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    #[serde(default = "default_b")]
    pub b: usize,
    #[serde(default)]
    pub clustered: bool,
    /// Draw fresh cross-fitting folds in every replicate.
    #[serde(default = "default_true")]
    pub rerandomize_folds: bool,
}

fn default_b() -> usize {
    500
}

fn default_true() -> bool {
    true
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            b: default_b(),
            clustered: false,
            rerandomize_folds: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub estimate: f64,
    pub se: f64,
    /// Null when the bootstrap SE is zero.
    pub t_value: Option<f64>,
    pub p_value: Option<f64>,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub zero_se: bool,
}

/// Summary of a bootstrap distribution around a point estimate.
/// SE is the sample standard deviation, p = 2(1 − Φ(|t|)) and the CI ends
/// are the order statistics s_⌈B·α/2⌉ and s_⌈B·(1−α/2)⌉.
pub fn summarize(samples: &[f64], estimate: f64, level: f64) -> Result<Summary> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no bootstrap samples to summarize".into()));
    }
    let b = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / b;
    let var = if samples.len() > 1 {
        samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (b - 1.0)
    } else {
        0.0
    };
    let se = var.sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    let zero_se = se == 0.0;
    let t = (!zero_se).then(|| estimate / se);
    Ok(Summary {
        estimate,
        se,
        t_value: t,
        p_value: t.map(|t| erfc(t.abs() / std::f64::consts::SQRT_2)),
        ci_lower: order_statistic(&sorted, alpha / 2.0),
        ci_upper: order_statistic(&sorted, 1.0 - alpha / 2.0),
        zero_se,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub group: String,
    pub estimator: EstimatorKind,
    pub tau: Summary,
    pub delta: Summary,
    pub zeta: Summary,
    pub pct_reduction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub b: usize,
    pub b_used: usize,
    pub retried: usize,
    pub dropped: usize,
    pub clustered: bool,
    pub seed: u64,
    pub level: f64,
    /// Largest |τ* − δ* − ζ*| over all replicates and records.
    pub max_additivity_error: f64,
    pub rows: Vec<ReportRow>,
}

/// Row indices of one bootstrap sample: n rows with replacement, or the
/// original number of clusters with replacement, each contributing all of
/// its rows.
pub fn resample_rows(n: usize, clusters: Option<&[u32]>, rng: &mut Rng) -> Vec<usize> {
    match clusters {
        None => (0..n).map(|_| rng.random_range(0..n)).collect(),
        Some(ids) => {
            let n_ids = ids.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_ids];
            for (i, &c) in ids.iter().enumerate() {
                members[c as usize].push(i);
            }
            let present: Vec<usize> = (0..n_ids).filter(|&c| !members[c].is_empty()).collect();
            let mut rows = Vec::with_capacity(n);
            for _ in 0..present.len() {
                let c = present[rng.random_range(0..present.len())];
                rows.extend_from_slice(&members[c]);
            }
            rows
        }
    }
}

enum Replicate {
    Ok(Vec<[f64; 3]>, bool),
    Dropped,
}

fn run_replicate(
    ds: &Dataset,
    roles: &RoleMap,
    cfg: &EstimationConfig,
    boot: &BootstrapConfig,
    clusters: Option<&[u32]>,
    seed: u64,
    index: usize,
    point_degenerate: bool,
) -> Replicate {
    let attempt = |s: u64| -> Option<Vec<[f64; 3]>> {
        let mut rng = rng_from_seed(s);
        let rows = resample_rows(ds.n_rows(), clusters, &mut rng);
        let sample = ds.select_rows(&rows);
        let est_seed = if boot.rerandomize_folds { derive_seed(s, stream::REPLICATE, 0) } else { seed };
        match estimate(&sample, roles, cfg, est_seed) {
            Ok(e) if point_degenerate || !e.is_degenerate() => {
                Some(e.records.iter().map(|r| [r.tau, r.delta, r.zeta]).collect())
            }
            _ => None,
        }
    };
    if let Some(v) = attempt(derive_seed(seed, stream::BOOTSTRAP, index as u64)) {
        return Replicate::Ok(v, false);
    }
    match attempt(derive_seed(seed, stream::BOOTSTRAP_RETRY, index as u64)) {
        Some(v) => Replicate::Ok(v, true),
        None => Replicate::Dropped,
    }
}

/// Point estimates plus bootstrap inference. Every replicate re-runs the
/// whole pipeline on a resampled dataset with its own derived seed; results
/// are reduced in replicate order.
pub fn bootstrap(
    ds: &Dataset,
    roles: &RoleMap,
    cfg: &EstimationConfig,
    boot: &BootstrapConfig,
    seed: u64,
) -> Result<(Estimation, InferenceReport)> {
    if boot.b < 2 {
        return Err(Error::InvalidArgument("bootstrap.b must be at least 2".into()));
    }
    if boot.clustered && roles.cluster.is_none() {
        return Err(Error::Schema("bootstrap.clustered requires roles.cluster".into()));
    }
    let point = estimate(ds, roles, cfg, seed)?;
    let clusters = if boot.clustered { cluster_codes(ds, roles)? } else { None };
    let point_degenerate = point.is_degenerate();
    let reps: Vec<Replicate> = (0..boot.b)
        .into_par_iter()
        .map(|b| run_replicate(ds, roles, cfg, boot, clusters, seed, b, point_degenerate))
        .collect();
    let mut kept: Vec<Vec<[f64; 3]>> = Vec::new();
    let (mut retried, mut dropped) = (0, 0);
    for r in reps {
        match r {
            Replicate::Ok(v, was_retried) => {
                retried += usize::from(was_retried);
                kept.push(v);
            }
            Replicate::Dropped => {
                retried += 1;
                dropped += 1;
            }
        }
    }
    if kept.len() < 2 {
        return Err(Error::Estimation(format!("only {} of {} bootstrap replicates succeeded", kept.len(), boot.b)));
    }
    let level = 0.95;
    let mut max_err: f64 = 0.0;
    for v in &kept {
        for q in v {
            max_err = max_err.max((q[0] - q[1] - q[2]).abs());
        }
    }
    let rows = point
        .records
        .iter()
        .enumerate()
        .map(|(j, rec)| {
            let col = |q: usize| kept.iter().map(|v| v[j][q]).collect::<Vec<f64>>();
            Ok(ReportRow {
                group: rec.group.clone(),
                estimator: rec.estimator,
                tau: summarize(&col(0), rec.tau, level)?,
                delta: summarize(&col(1), rec.delta, level)?,
                zeta: summarize(&col(2), rec.zeta, level)?,
                pct_reduction: rec.pct_reduction,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = InferenceReport {
        b: boot.b,
        b_used: kept.len(),
        retried,
        dropped,
        clustered: boot.clustered,
        seed,
        level,
        max_additivity_error: max_err,
        rows,
    };
    Ok((point, report))
}

fn fmt_p(p: Option<f64>) -> String {
    match p {
        None => "NA".into(),
        Some(p) if p < 1e-4 => "<0.0001".into(),
        Some(p) => format!("{p:.4}"),
    }
}

fn fmt_opt(v: Option<f64>, d: usize) -> String {
    v.map_or_else(|| "NA".into(), |v| format!("{v:.d$}"))
}

/// Table-style CSV: one line per group, estimator and quantity with the
/// columns Estimate, SE, t-value, p-value and % Reduction. Without a
/// bootstrap report the inference columns are NA.
pub fn records_csv(records: &[EstimateRecord], report: Option<&InferenceReport>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["group", "estimator", "quantity", "Estimate", "SE", "t-value", "p-value", "% Reduction"])?;
    for (j, rec) in records.iter().enumerate() {
        let row = report.and_then(|r| r.rows.get(j));
        for (q, name, est) in [
            (0, "initial_disparity", rec.tau),
            (1, "disparity_reduction", rec.delta),
            (2, "disparity_remaining", rec.zeta),
        ] {
            let s = row.map(|r| match q {
                0 => &r.tau,
                1 => &r.delta,
                _ => &r.zeta,
            });
            let pct = if q == 1 { format_pct(rec.pct_reduction, 2) } else { String::new() };
            w.write_record([
                rec.group.as_str(),
                rec.estimator.as_str(),
                name,
                &format!("{est:.3}"),
                &s.map_or_else(|| "NA".into(), |s| format!("{:.3}", s.se)),
                &fmt_opt(s.and_then(|s| s.t_value), 2),
                &fmt_p(s.and_then(|s| s.p_value)),
                &pct,
            ])?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_ci() {
        let s: Vec<f64> = (1..=100).map(|k| k as f64 / 100.0).collect();
        let r = summarize(&s, 0.5, 0.95).unwrap();
        assert_eq!((r.ci_lower, r.ci_upper), (0.03, 0.98));
    }

    #[test]
    fn t_and_p() {
        let s = [1.0, -1.0, 1.0, -1.0];
        let r = summarize(&s, 0.0, 0.95).unwrap();
        assert_eq!(r.t_value, Some(0.0));
        assert_eq!(r.p_value, Some(1.0));
        let z = summarize(&[2.0, 2.0], 2.0, 0.95).unwrap();
        assert!(z.zero_se && z.t_value.is_none() && z.p_value.is_none());
    }

    #[test]
    fn normal_p_value() {
        // SD 0.018 around −0.087: t ≈ −4.83, p < 0.0001
        let s = [-0.087 - 0.018, -0.087 + 0.018];
        let sd = (2.0 * 0.018f64.powi(2)).sqrt();
        let r = summarize(&s, -0.087, 0.95).unwrap();
        assert!((r.se - sd).abs() < 1e-12);
        let t = -0.087 / sd;
        assert!((r.t_value.unwrap() - t).abs() < 1e-12);
        let r2 = summarize(&[-0.087 - 0.018 / 2f64.sqrt(), -0.087 + 0.018 / 2f64.sqrt()], -0.087, 0.95).unwrap();
        assert!((r2.t_value.unwrap() + 4.8333).abs() < 1e-3);
        assert!(r2.p_value.unwrap() < 1e-4);
        assert_eq!(fmt_p(r2.p_value), "<0.0001");
        // 2(1 − Φ(1.959964)) = 0.05
        let r3 = summarize(&[-1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt()], 1.959_963_985, 0.95).unwrap();
        assert!((r3.p_value.unwrap() - 0.05).abs() < 1e-8);
    }

    #[test]
    fn cluster_resampling_keeps_clusters_whole() {
        let ids = [0u32, 0, 1, 1, 1, 2];
        let mut rng = rng_from_seed(4);
        for _ in 0..50 {
            let rows = resample_rows(6, Some(&ids), &mut rng);
            let mut k = 0;
            let mut drawn = 0;
            while k < rows.len() {
                let c = ids[rows[k]];
                let members: Vec<usize> = (0..6).filter(|&i| ids[i] == c).collect();
                assert_eq!(&rows[k..k + members.len()], members.as_slice());
                k += members.len();
                drawn += 1;
            }
            assert_eq!(drawn, 3);
        }
    }
}
