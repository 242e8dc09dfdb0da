use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub median_bias: f64,
    pub median_rmse: f64,
    pub n_used: usize,
    pub truth: f64,
}

pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("median of an empty vector".into()));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    Ok(if k % 2 == 1 { s[k / 2] } else { 0.5 * (s[k / 2 - 1] + s[k / 2]) })
}

/// Median bias and the square root of the median squared error.
pub fn compute_metrics(estimates: &[f64], truth: f64) -> Result<Metrics> {
    let sq: Vec<f64> = estimates.iter().map(|e| (e - truth).powi(2)).collect();
    Ok(Metrics {
        median_bias: median(estimates)? - truth,
        median_rmse: median(&sq)?.sqrt(),
        n_used: estimates.len(),
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_points() {
        let m = compute_metrics(&[0.30, 0.40, 0.50], 0.358).unwrap();
        assert!((m.median_bias - 0.042).abs() < 1e-12);
        assert!((m.median_rmse - 0.003_364f64.sqrt()).abs() < 1e-12);
        assert!((m.median_rmse - 0.0580).abs() < 1e-4);
    }

    #[test]
    fn exact_and_empty() {
        let m = compute_metrics(&[0.358; 4], 0.358).unwrap();
        assert_eq!((m.median_bias, m.median_rmse), (0.0, 0.0));
        assert!(compute_metrics(&[], 0.0).is_err());
    }
}
