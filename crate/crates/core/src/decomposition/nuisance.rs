use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::{build_design, Dataset, DesignMatrix, RoleMap, Term};
use crate::error::{Error, Result};
use crate::model::{clip_prob, FittedModel, ModelSpec};
use crate::rng::{derive_seed, rng_from_seed, stream};

use super::intervention::{fit_intervention_distributions, InterventionProbs, InterventionSpec, Integration, Variant};

/// Learners for the four nuisance functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NuisanceSpecs {
    /// P(A=1 | R, X, C)
    pub pi_a: ModelSpec,
    /// P(M=1 | R, X, A, Z, C)
    pub pi_m: ModelSpec,
    /// E[Y | R, X, A, Z, M, C]
    pub mu: ModelSpec,
    /// E[μ̄ | R, X, A, C]; always fitted as a regression.
    pub nu: ModelSpec,
}

impl NuisanceSpecs {
    pub fn with_defaults(self) -> Self {
        Self {
            pi_a: self.pi_a.with_defaults(),
            pi_m: self.pi_m.with_defaults(),
            mu: self.mu.with_defaults(),
            nu: self.nu.with_defaults(),
        }
    }

    pub fn validate(&self, roles: &RoleMap) -> Result<()> {
        for (name, spec) in self.named() {
            spec.validate()
                .map_err(|e| Error::InvalidArgument(format!("models.{name}: {e}")))?;
            for t in &spec.formula.terms {
                if let Term::Centered(c) = t {
                    if *c == roles.system_factor || *c == roles.individual_factor || *c == roles.outcome {
                        return Err(Error::InvalidArgument(format!(
                            "models.{name}: target factors and the outcome cannot be centered"
                        )));
                    }
                }
            }
        }
        if !self.pi_a.family.is_binary() || !self.pi_m.family.is_binary() {
            return Err(Error::InvalidArgument("models.pi_a and models.pi_m need a binary family".into()));
        }
        if self.mu.family.is_binary() {
            return Err(Error::InvalidArgument("models.mu needs a regression family".into()));
        }
        Ok(())
    }

    fn named(&self) -> [(&'static str, &ModelSpec); 4] {
        [("pi_a", &self.pi_a), ("pi_m", &self.pi_m), ("mu", &self.mu), ("nu", &self.nu)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    InSample,
    OutOfFold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub pi_star: Source,
    pub pi_a: Source,
    pub pi_m: Source,
    pub mu: Source,
    pub nu: Source,
}

impl Provenance {
    fn uniform(s: Source) -> Self {
        Self {
            pi_star: Source::InSample,
            pi_a: s,
            pi_m: s,
            mu: s,
            nu: s,
        }
    }
}

/// Training and prediction rows of one fitting pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub fold: usize,
    pub train_rows: Vec<usize>,
    pub predicted_rows: Vec<usize>,
}

/// Simulated factor values for one draw, with the draw-specific ν fit.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawPredictions {
    pub a_tilde: Vec<u8>,
    pub m_tilde: Vec<u8>,
    /// ν refitted on this draw's targets, evaluated at A=0 and A=1.
    pub nu: [Vec<f64>; 2],
}

/// Per-unit nuisance predictions used by every estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceSet {
    /// P(A=1) under the intervention.
    pub pi_star_a: Vec<f64>,
    /// P(M=1) under the intervention.
    pub pi_star_m: Vec<f64>,
    /// Fitted P(A=1 | R, X, C).
    pub p_a: Vec<f64>,
    /// Fitted P(M=1 | R, X, A, Z, C).
    pub p_m: Vec<f64>,
    /// μ with A and M set to `[a][m]`.
    pub mu: [[Vec<f64>; 2]; 2],
    /// ν with A set to `[a]`.
    pub nu: [Vec<f64>; 2],
    /// Regression of μ at observed values on (R, X, A, C), for the A-only intervention.
    pub nu_natural: Option<[Vec<f64>; 2]>,
    pub draws: Vec<DrawPredictions>,
    pub variant: Variant,
    pub provenance: Provenance,
    pub folds: Vec<FoldRecord>,
    pub degenerate: Vec<String>,
    pub ridge_jitter: Vec<String>,
}

fn pick(p1: f64, level: u8) -> f64 {
    if level == 1 {
        p1
    } else {
        1.0 - p1
    }
}

impl NuisanceSet {
    pub fn n_rows(&self) -> usize {
        self.p_a.len()
    }

    /// π_A,i = fitted P(A = A_i).
    pub fn pi_a(&self, i: usize, a: u8) -> f64 {
        clip_prob(pick(self.p_a[i], a))
    }

    pub fn pi_m(&self, i: usize, m: u8) -> f64 {
        clip_prob(pick(self.p_m[i], m))
    }

    pub fn star_a(&self, i: usize, a: u8) -> f64 {
        pick(self.pi_star_a[i], a)
    }

    pub fn star_m(&self, i: usize, m: u8) -> f64 {
        pick(self.pi_star_m[i], m)
    }

    /// μ averaged over the intervened M (and, for the literal variant, A).
    pub fn mu_bar(&self, i: usize, a_obs: u8) -> f64 {
        match self.variant {
            Variant::Consistent => mu_bar_at(&self.mu, i, a_obs, self.star_m(i, 0), self.star_m(i, 1)),
            Variant::Literal => {
                (0..2u8)
                    .map(|a| self.star_a(i, a) * mu_bar_at(&self.mu, i, a, self.star_m(i, 0), self.star_m(i, 1)))
                    .sum()
            }
        }
    }

    /// μ averaged over the intervened M at the observed A, regardless of variant.
    pub fn mu_bar_observed_a(&self, i: usize, a_obs: u8) -> f64 {
        mu_bar_at(&self.mu, i, a_obs, self.star_m(i, 0), self.star_m(i, 1))
    }

    pub fn nu_bar(&self, i: usize) -> f64 {
        self.star_a(i, 0) * self.nu[0][i] + self.star_a(i, 1) * self.nu[1][i]
    }

    /// ν at the observed A (consistent) or ν̄ (literal).
    pub fn nu_breve(&self, i: usize, a_obs: u8) -> f64 {
        match self.variant {
            Variant::Consistent => self.nu[a_obs as usize][i],
            Variant::Literal => self.nu_bar(i),
        }
    }

    pub fn mu_obs(&self, i: usize, a_obs: u8, m_obs: u8) -> f64 {
        self.mu[a_obs as usize][m_obs as usize][i]
    }
}

fn mu_bar_at(mu: &[[Vec<f64>; 2]; 2], i: usize, a: u8, q0: f64, q1: f64) -> f64 {
    q0 * mu[a as usize][0][i] + q1 * mu[a as usize][1][i]
}

/// Everything needed to fit nuisances on arbitrary row subsets.
pub(crate) struct NuisanceInputs {
    pub n: usize,
    pub a: Vec<u8>,
    pub m: Vec<u8>,
    pub y: Vec<f64>,
    x_pa: DesignMatrix,
    x_pm: DesignMatrix,
    x_mu: [[DesignMatrix; 2]; 2],
    x_mu_obs: DesignMatrix,
    x_nu: [DesignMatrix; 2],
    x_nu_obs: DesignMatrix,
    specs: NuisanceSpecs,
    star: InterventionProbs,
    variant: Variant,
    /// Uniforms for draw mode: (for A, for M) per draw.
    uniforms: Vec<(Vec<f64>, Vec<f64>)>,
    need_natural: bool,
}

fn binary_codes(ds: &Dataset, col: &str) -> Result<Vec<u8>> {
    ds.numeric(col)?
        .iter()
        .map(|&v| {
            if v == 0.0 {
                Ok(0)
            } else if v == 1.0 {
                Ok(1)
            } else {
                Err(Error::domain(col, format!("value {v} is not 0/1")))
            }
        })
        .collect()
}

impl NuisanceInputs {
    pub fn new(
        ds: &Dataset,
        roles: &RoleMap,
        specs: &NuisanceSpecs,
        spec: &InterventionSpec,
        need_natural: bool,
    ) -> Result<Self> {
        specs.validate(roles)?;
        let star = fit_intervention_distributions(ds, roles, spec)?;
        let a_col = roles.system_factor.as_str();
        let m_col = roles.individual_factor.as_str();
        let with_a = |a: f64| ds.with_numeric(a_col, vec![a; ds.n_rows()]);
        let ds_a = [with_a(0.0)?, with_a(1.0)?];
        let x_mu = [
            [
                build_design(&ds_a[0].with_numeric(m_col, vec![0.0; ds.n_rows()])?, &specs.mu.formula)?,
                build_design(&ds_a[0].with_numeric(m_col, vec![1.0; ds.n_rows()])?, &specs.mu.formula)?,
            ],
            [
                build_design(&ds_a[1].with_numeric(m_col, vec![0.0; ds.n_rows()])?, &specs.mu.formula)?,
                build_design(&ds_a[1].with_numeric(m_col, vec![1.0; ds.n_rows()])?, &specs.mu.formula)?,
            ],
        ];
        let x_nu = [
            build_design(&ds_a[0], &specs.nu.formula)?,
            build_design(&ds_a[1], &specs.nu.formula)?,
        ];
        let uniforms = match spec.integration {
            Integration::Marginalize => Vec::new(),
            Integration::Draw { n_draws, seed } => (0..n_draws)
                .map(|d| {
                    let mut rng = rng_from_seed(derive_seed(seed, stream::DRAWS, d as u64));
                    let ua = (0..ds.n_rows()).map(|_| rng.random::<f64>()).collect();
                    let um = (0..ds.n_rows()).map(|_| rng.random::<f64>()).collect();
                    (ua, um)
                })
                .collect(),
        };
        Ok(Self {
            n: ds.n_rows(),
            a: binary_codes(ds, a_col)?,
            m: binary_codes(ds, m_col)?,
            y: ds.numeric(&roles.outcome)?.to_vec(),
            x_pa: build_design(ds, &specs.pi_a.formula)?,
            x_pm: build_design(ds, &specs.pi_m.formula)?,
            x_mu,
            x_mu_obs: build_design(ds, &specs.mu.formula)?,
            x_nu,
            x_nu_obs: build_design(ds, &specs.nu.formula)?,
            specs: specs.clone(),
            star,
            variant: spec.variant,
            uniforms,
            need_natural,
        })
    }
}

/// Predictions for the rows of one pass, in the order of `pred`.
pub(crate) struct PassOutput {
    pub pred: Vec<usize>,
    pub pi_star_a: Vec<f64>,
    pub pi_star_m: Vec<f64>,
    pub p_a: Vec<f64>,
    pub p_m: Vec<f64>,
    pub mu: [[Vec<f64>; 2]; 2],
    pub nu: [Vec<f64>; 2],
    pub nu_natural: Option<[Vec<f64>; 2]>,
    pub draws: Vec<DrawPredictions>,
    pub degenerate: Vec<String>,
    pub ridge_jitter: Vec<String>,
}

fn gather(v: &[f64], rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&i| v[i]).collect()
}

fn targets(v: &[u8], rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&i| f64::from(v[i])).collect()
}

struct Tracker {
    degenerate: Vec<String>,
    ridge_jitter: Vec<String>,
    label: String,
}

impl Tracker {
    fn note(&mut self, name: &str, m: &FittedModel) {
        if m.diagnostics.degenerate {
            self.degenerate.push(format!("{}{name}", self.label));
        }
        if m.diagnostics.ridge_jitter {
            self.ridge_jitter.push(format!("{}{name}", self.label));
        }
    }
}

/// Fit every nuisance model on `train` and predict on `pred`. ν's training
/// targets are built from the μ fitted on `train`.
pub(crate) fn fit_pass(inp: &NuisanceInputs, train: &[usize], pred: &[usize], fold: usize, seed: u64) -> Result<PassOutput> {
    let model_seed = |c: u64| derive_seed(seed, stream::MODEL, fold as u64 * 16 + c);
    let mut tr = Tracker {
        degenerate: Vec::new(),
        ridge_jitter: Vec::new(),
        label: if fold == 0 { String::new() } else { format!("fold {fold}: ") },
    };
    let fit = |spec: &ModelSpec, x: &DesignMatrix, y: &[f64], c: u64| -> Result<FittedModel> {
        spec.fit_design(&x.select_rows(train), y, model_seed(c))
    };

    let ma = fit(&inp.specs.pi_a, &inp.x_pa, &targets(&inp.a, train), 1)?;
    tr.note("pi_a", &ma);
    let mm = fit(&inp.specs.pi_m, &inp.x_pm, &targets(&inp.m, train), 2)?;
    tr.note("pi_m", &mm);
    let y_train = gather(&inp.y, train);
    let mu_spec = inp.specs.mu.as_regression();
    let mmu = mu_spec.fit_design(&inp.x_mu_obs.select_rows(train), &y_train, model_seed(3))?;
    tr.note("mu", &mmu);

    // Predictions on every row: ν targets need the training rows, the
    // output needs the prediction rows.
    let p_a = ma.predict(&inp.x_pa)?;
    let p_m = mm.predict(&inp.x_pm)?;
    let mu_all = [
        [mmu.predict(&inp.x_mu[0][0])?, mmu.predict(&inp.x_mu[0][1])?],
        [mmu.predict(&inp.x_mu[1][0])?, mmu.predict(&inp.x_mu[1][1])?],
    ];
    let star_a = inp.star.a.clone().unwrap_or_else(|| p_a.clone());
    let star_m = inp.star.m.clone().unwrap_or_else(|| p_m.clone());
    let mu_bar_at = |i: usize, a: usize| star_m[i].mul_add(mu_all[a][1][i] - mu_all[a][0][i], mu_all[a][0][i]);
    let mu_bar = |i: usize| match inp.variant {
        Variant::Consistent => mu_bar_at(i, inp.a[i] as usize),
        Variant::Literal => (1.0 - star_a[i]) * mu_bar_at(i, 0) + star_a[i] * mu_bar_at(i, 1),
    };

    let nu_spec = inp.specs.nu.as_regression();
    let x_nu_train = inp.x_nu_obs.select_rows(train);
    let x_nu_pred = [inp.x_nu[0].select_rows(pred), inp.x_nu[1].select_rows(pred)];
    let nu_targets: Vec<f64> = train.iter().map(|&i| mu_bar(i)).collect();
    let mnu = nu_spec.fit_design(&x_nu_train, &nu_targets, model_seed(4))?;
    tr.note("nu", &mnu);
    let nu = [mnu.predict(&x_nu_pred[0])?, mnu.predict(&x_nu_pred[1])?];

    let nu_natural = if inp.need_natural {
        let t: Vec<f64> = train
            .iter()
            .map(|&i| mu_all[inp.a[i] as usize][inp.m[i] as usize][i])
            .collect();
        let mnat = nu_spec.fit_design(&x_nu_train, &t, model_seed(5))?;
        tr.note("nu_natural", &mnat);
        Some([mnat.predict(&x_nu_pred[0])?, mnat.predict(&x_nu_pred[1])?])
    } else {
        None
    };

    let mut draws = Vec::with_capacity(inp.uniforms.len());
    for (d, (ua, um)) in inp.uniforms.iter().enumerate() {
        let a_t: Vec<u8> = (0..inp.n).map(|i| u8::from(ua[i] < star_a[i])).collect();
        let m_t: Vec<u8> = (0..inp.n).map(|i| u8::from(um[i] < star_m[i])).collect();
        let t: Vec<f64> = train
            .iter()
            .map(|&i| {
                let a_eval = match inp.variant {
                    Variant::Consistent => inp.a[i],
                    Variant::Literal => a_t[i],
                };
                mu_all[a_eval as usize][m_t[i] as usize][i]
            })
            .collect();
        let md = nu_spec.fit_design(&x_nu_train, &t, model_seed(64 + d as u64))?;
        draws.push(DrawPredictions {
            a_tilde: pred.iter().map(|&i| a_t[i]).collect(),
            m_tilde: pred.iter().map(|&i| m_t[i]).collect(),
            nu: [md.predict(&x_nu_pred[0])?, md.predict(&x_nu_pred[1])?],
        });
    }

    Ok(PassOutput {
        pred: pred.to_vec(),
        pi_star_a: gather(&star_a, pred),
        pi_star_m: gather(&star_m, pred),
        p_a: gather(&p_a, pred),
        p_m: gather(&p_m, pred),
        mu: [
            [gather(&mu_all[0][0], pred), gather(&mu_all[0][1], pred)],
            [gather(&mu_all[1][0], pred), gather(&mu_all[1][1], pred)],
        ],
        nu,
        nu_natural,
        draws,
        degenerate: tr.degenerate,
        ridge_jitter: tr.ridge_jitter,
    })
}

/// Scatter per-pass outputs into full-length vectors keyed by row index.
pub(crate) fn assemble(inp: &NuisanceInputs, passes: Vec<PassOutput>, source: Source, folds: Vec<FoldRecord>) -> NuisanceSet {
    let n = inp.n;
    let z = || vec![0.0; n];
    let n_draws = inp.uniforms.len();
    let mut out = NuisanceSet {
        pi_star_a: z(),
        pi_star_m: z(),
        p_a: z(),
        p_m: z(),
        mu: [[z(), z()], [z(), z()]],
        nu: [z(), z()],
        nu_natural: if inp.need_natural { Some([z(), z()]) } else { None },
        draws: (0..n_draws)
            .map(|_| DrawPredictions {
                a_tilde: vec![0; n],
                m_tilde: vec![0; n],
                nu: [z(), z()],
            })
            .collect(),
        variant: inp.variant,
        provenance: Provenance::uniform(source),
        folds,
        degenerate: Vec::new(),
        ridge_jitter: Vec::new(),
    };
    if inp.star.degenerate_a {
        out.degenerate.push("pi_star_a".into());
    }
    if inp.star.degenerate_m {
        out.degenerate.push("pi_star_m".into());
    }
    for p in passes {
        for (k, &i) in p.pred.iter().enumerate() {
            out.pi_star_a[i] = p.pi_star_a[k];
            out.pi_star_m[i] = p.pi_star_m[k];
            out.p_a[i] = p.p_a[k];
            out.p_m[i] = p.p_m[k];
            for a in 0..2 {
                for m in 0..2 {
                    out.mu[a][m][i] = p.mu[a][m][k];
                }
                out.nu[a][i] = p.nu[a][k];
                if let (Some(dst), Some(src)) = (out.nu_natural.as_mut(), p.nu_natural.as_ref()) {
                    dst[a][i] = src[a][k];
                }
            }
            for (dst, src) in out.draws.iter_mut().zip(&p.draws) {
                dst.a_tilde[i] = src.a_tilde[k];
                dst.m_tilde[i] = src.m_tilde[k];
                dst.nu[0][i] = src.nu[0][k];
                dst.nu[1][i] = src.nu[1][k];
            }
        }
        out.degenerate.extend(p.degenerate);
        out.ridge_jitter.extend(p.ridge_jitter);
    }
    out
}

/// Fit all nuisances on the full sample and predict in-sample.
pub fn fit_nuisances(
    ds: &Dataset,
    roles: &RoleMap,
    specs: &NuisanceSpecs,
    spec: &InterventionSpec,
    need_natural: bool,
    seed: u64,
) -> Result<NuisanceSet> {
    let inp = NuisanceInputs::new(ds, roles, specs, spec, need_natural)?;
    let all: Vec<usize> = (0..inp.n).collect();
    let pass = fit_pass(&inp, &all, &all, 0, seed)?;
    let rec = FoldRecord {
        fold: 0,
        train_rows: all.clone(),
        predicted_rows: all,
    };
    Ok(assemble(&inp, vec![pass], Source::InSample, vec![rec]))
}
