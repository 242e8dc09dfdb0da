use crate::data::DesignMatrix;
use crate::error::{Error, Result};
use crate::linalg::{cross, gram, least_squares, solve_spd};

use super::{check_inputs, clip_prob, logit, sigmoid, Family, FitDiagnostics, FittedModel, ModelParams};

const IRLS_TOL: f64 = 1e-8;
const IRLS_MAX_ITER: usize = 100;
const MAX_HALVINGS: usize = 30;

fn glm_model(family: Family, x: &DesignMatrix, coefficients: Vec<f64>, diagnostics: FitDiagnostics) -> FittedModel {
    FittedModel {
        family,
        n_features: x.n_cols(),
        params: ModelParams::Glm {
            names: x.names().to_vec(),
            coefficients,
        },
        diagnostics,
    }
}

pub fn fit_linear(x: &DesignMatrix, y: &[f64]) -> Result<FittedModel> {
    check_inputs(x, y)?;
    if x.n_cols() == 0 {
        return Err(Error::InvalidArgument("design has no columns".into()));
    }
    if x.n_rows() < x.n_cols() {
        return Err(Error::Dimension(format!(
            "{} rows cannot identify {} coefficients",
            x.n_rows(),
            x.n_cols()
        )));
    }
    let (beta, jitter) =
        least_squares(x, y, None).ok_or_else(|| Error::Estimation("normal equations could not be solved".into()))?;
    let fitted = x.mul_vec(&beta);
    let rss: f64 = fitted.iter().zip(y).map(|(f, y)| (y - f).powi(2)).sum();
    Ok(glm_model(
        Family::LinearGlm,
        x,
        beta,
        FitDiagnostics {
            iterations: 1,
            final_loss: rss,
            converged: true,
            ridge_jitter: jitter,
            ..Default::default()
        },
    ))
}

/// Bernoulli log-likelihood of coefficients `beta` (unclipped probabilities).
pub fn logistic_log_likelihood(x: &DesignMatrix, y: &[f64], beta: &[f64]) -> f64 {
    x.mul_vec(beta)
        .iter()
        .zip(y)
        .map(|(&eta, &y)| {
            // log σ(η) = −log(1+e^{−η}); log(1−σ(η)) = −log(1+e^{η})
            let l1 = -softplus(-eta);
            let l0 = -softplus(eta);
            y * l1 + (1.0 - y) * l0
        })
        .sum()
}

fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

/// Gradient of the log-likelihood, Xᵀ(y − p).
pub fn logistic_gradient(x: &DesignMatrix, y: &[f64], beta: &[f64]) -> Vec<f64> {
    let resid: Vec<f64> = x.mul_vec(beta).iter().zip(y).map(|(&e, &y)| y - sigmoid(e)).collect();
    cross(x, None, &resid).iter().copied().collect()
}

fn intercept_column(x: &DesignMatrix) -> Option<usize> {
    (0..x.n_cols()).find(|&j| x.column(j).iter().all(|&v| v == 1.0))
}

pub fn fit_logistic_irls(x: &DesignMatrix, y: &[f64]) -> Result<FittedModel> {
    check_inputs(x, y)?;
    if x.n_cols() == 0 {
        return Err(Error::InvalidArgument("design has no columns".into()));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidArgument("logistic target must be 0/1".into()));
    }
    if x.n_rows() < x.n_cols() {
        return Err(Error::Dimension(format!(
            "{} rows cannot identify {} coefficients",
            x.n_rows(),
            x.n_cols()
        )));
    }
    let p = x.n_cols();
    let prevalence = y.iter().sum::<f64>() / y.len() as f64;
    if prevalence == 0.0 || prevalence == 1.0 {
        let mut beta = vec![0.0; p];
        if let Some(j) = intercept_column(x) {
            beta[j] = logit(clip_prob(prevalence));
        }
        let dev = -2.0 * logistic_log_likelihood(x, y, &beta);
        return Ok(glm_model(
            Family::LogisticGlm,
            x,
            beta,
            FitDiagnostics {
                final_loss: dev,
                converged: true,
                degenerate: true,
                ..Default::default()
            },
        ));
    }

    let mut beta = vec![0.0; p];
    if let Some(j) = intercept_column(x) {
        beta[j] = logit(prevalence);
    }
    let mut dev = -2.0 * logistic_log_likelihood(x, y, &beta);
    let mut converged = false;
    let mut jitter_any = false;
    let mut iterations = 0;
    while iterations < IRLS_MAX_ITER {
        iterations += 1;
        let eta = x.mul_vec(&beta);
        let mu: Vec<f64> = eta.iter().map(|&e| sigmoid(e)).collect();
        let w: Vec<f64> = mu.iter().map(|m| (m * (1.0 - m)).max(1e-12)).collect();
        let score: Vec<f64> = y.iter().zip(&mu).map(|(y, m)| y - m).collect();
        let h = gram(x, Some(&w));
        let g = cross(x, None, &score);
        let (step, jitter) =
            solve_spd(&h, &g).ok_or_else(|| Error::Estimation("IRLS Hessian could not be factored".into()))?;
        jitter_any |= jitter;
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + scale * s).collect();
            let cdev = -2.0 * logistic_log_likelihood(x, y, &cand);
            if cdev.is_finite() && cdev <= dev + 1e-12 * dev.abs().max(1.0) {
                accepted = Some((cand, cdev));
                break;
            }
            scale *= 0.5;
        }
        let Some((cand, cdev)) = accepted else {
            converged = true;
            break;
        };
        let change = (dev - cdev).abs();
        beta = cand;
        dev = cdev;
        if change < IRLS_TOL {
            converged = true;
            break;
        }
    }
    if !dev.is_finite() || beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Estimation("logistic fit produced non-finite values".into()));
    }
    Ok(glm_model(
        Family::LogisticGlm,
        x,
        beta,
        FitDiagnostics {
            iterations,
            final_loss: dev,
            converged,
            ridge_jitter: jitter_any,
            ..Default::default()
        },
    ))
}
