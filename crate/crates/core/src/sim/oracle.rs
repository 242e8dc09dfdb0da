use serde::{Deserialize, Serialize};

use crate::decomposition::CovariateEval;
use crate::rng::{derive_seed, rng_from_seed, stream};

use super::dgp::{bern, draw_unit, normal, structural, AllowableConvention, Unit};

/// Published value of the disparity reduction in the simulation population.
pub const REFERENCE_DELTA: f64 = 0.358;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCell {
    pub convention: AllowableConvention,
    pub eval: CovariateEval,
    pub psi_true: f64,
    pub delta_true: f64,
    pub tau_true: f64,
    pub se_psi: f64,
    pub se_delta: f64,
    pub se_tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub n: usize,
    pub seed: u64,
    pub null_intervention: bool,
    pub n_comparison: usize,
    pub mean_y: f64,
    pub se_mean_y: f64,
    /// Every (convention, evaluation) pair.
    pub cells: Vec<OracleCell>,
}

impl OracleResult {
    pub fn cell(&self, convention: AllowableConvention, eval: CovariateEval) -> &OracleCell {
        self.cells
            .iter()
            .find(|c| c.convention == convention && c.eval == eval)
            .expect("all cells are computed")
    }

    /// The cell whose δ is closest to the published reference value.
    pub fn matched(&self) -> &OracleCell {
        self.cells
            .iter()
            .min_by(|a, b| {
                (a.delta_true - REFERENCE_DELTA)
                    .abs()
                    .total_cmp(&(b.delta_true - REFERENCE_DELTA).abs())
            })
            .expect("non-empty")
    }
}

#[derive(Default, Clone, Copy)]
struct Moments {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n
    }

    /// Variance of the mean.
    fn var_mean(&self) -> f64 {
        if self.n < 2.0 {
            return 0.0;
        }
        let m = self.mean();
        ((self.sum_sq - self.n * m * m) / (self.n - 1.0)).max(0.0) / self.n
    }
}

/// Per-stratum (C=0, C=1) moments of Y, Ỹ and Y − Ỹ among comparison units,
/// and of Y among reference units.
#[derive(Default, Clone, Copy)]
struct Strata {
    y1: [Moments; 2],
    cf: [Moments; 2],
    d: [Moments; 2],
    y0: [Moments; 2],
}

fn combine(m: &[Moments; 2], w: [f64; 2], pooled: bool) -> (f64, f64) {
    if pooled {
        let mut all = m[0];
        all.n += m[1].n;
        all.sum += m[1].sum;
        all.sum_sq += m[1].sum_sq;
        return (all.mean(), all.var_mean());
    }
    let mut mean = 0.0;
    let mut var = 0.0;
    for s in 0..2 {
        if w[s] != 0.0 {
            mean += w[s] * m[s].mean();
            var += w[s] * w[s] * m[s].var_mean();
        }
    }
    (mean, var)
}

/// Monte Carlo truth straight from the structural equations. A population
/// of `n` units is drawn; each comparison unit (R=1) receives Ã from the
/// reference group's law of A given the allowables, a regenerated Z under
/// Ã, M̃ from the reference group's law of M given the allowables and a
/// counterfactual outcome with fresh noise. With `null_intervention` the
/// factors instead follow the comparison group's own conditional laws.
pub fn true_value_oracle(n: usize, seed: u64, null_intervention: bool) -> OracleResult {
    let mut rng = rng_from_seed(derive_seed(seed, stream::ORACLE, 0));
    let units: Vec<Unit> = (0..n).map(|_| draw_unit(&mut rng)).collect();

    // Reference-group laws: overall and by C.
    let mut qa = [[0.0f64; 2]; 3];
    let mut qm = [[0.0f64; 2]; 3];
    for u in units.iter().filter(|u| u.r == 0.0) {
        for s in [u.c as usize, 2] {
            qa[s][0] += u.a;
            qa[s][1] += 1.0;
            qm[s][0] += u.m;
            qm[s][1] += 1.0;
        }
    }
    let q = |t: &[[f64; 2]; 3], s: usize| t[s][0] / t[s][1];

    let c_bar = units.iter().map(|u| u.c).sum::<f64>() / n as f64;
    let mut all_y = Moments::default();
    for u in &units {
        all_y.push(u.y);
    }

    let mut cells = Vec::new();
    for convention in [AllowableConvention::None, AllowableConvention::BaselineC] {
        // Common random numbers across conventions.
        let mut cf_rng = rng_from_seed(derive_seed(seed, stream::ORACLE, 1));
        let mut st = Strata::default();
        for u in &units {
            let s = u.c as usize;
            if u.r == 0.0 {
                st.y0[s].push(u.y);
                continue;
            }
            let cell = match convention {
                AllowableConvention::None => 2,
                AllowableConvention::BaselineC => s,
            };
            let (a, z, m) = if null_intervention {
                let a = bern(&mut cf_rng, structural::p_a(1.0, u.c, u.x));
                let z = structural::mean_z(1.0, u.c, u.x, a) + normal(&mut cf_rng);
                let m = bern(&mut cf_rng, structural::p_m(1.0, u.c, u.x, a, z));
                (a, z, m)
            } else {
                let a = bern(&mut cf_rng, q(&qa, cell));
                let z = structural::mean_z(1.0, u.c, u.x, a) + normal(&mut cf_rng);
                let m = bern(&mut cf_rng, q(&qm, cell));
                (a, z, m)
            };
            let y_cf = structural::mean_y(1.0, u.c, u.x, a, z, m) + normal(&mut cf_rng);
            st.y1[s].push(u.y);
            st.cf[s].push(y_cf);
            st.d[s].push(u.y - y_cf);
        }
        for eval in [CovariateEval::GroupMarginal, CovariateEval::GrandMean, CovariateEval::Zero] {
            let (w, pooled) = match eval {
                CovariateEval::GroupMarginal => ([0.0, 0.0], true),
                CovariateEval::GrandMean => ([1.0 - c_bar, c_bar], false),
                CovariateEval::Zero => ([1.0, 0.0], false),
            };
            let (psi, v_psi) = combine(&st.cf, w, pooled);
            let (delta, v_delta) = combine(&st.d, w, pooled);
            let (m1, v1) = combine(&st.y1, w, pooled);
            let (m0, v0) = combine(&st.y0, w, pooled);
            cells.push(OracleCell {
                convention,
                eval,
                psi_true: psi,
                delta_true: delta,
                tau_true: m1 - m0,
                se_psi: v_psi.sqrt(),
                se_delta: v_delta.sqrt(),
                se_tau: (v1 + v0).sqrt(),
            });
        }
    }
    OracleResult {
        n,
        seed,
        null_intervention,
        n_comparison: units.iter().filter(|u| u.r == 1.0).count(),
        mean_y: all_y.mean(),
        se_mean_y: all_y.var_mean().sqrt(),
        cells,
    }
}
