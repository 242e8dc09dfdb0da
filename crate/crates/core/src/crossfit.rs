//! Fold plans and out-of-fold nuisance predictions.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, RoleMap};
use crate::decomposition::{assemble, fit_pass, FoldRecord, InterventionSpec, NuisanceInputs, NuisanceSet, NuisanceSpecs, Source};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Assignment of rows to K folds (0-based fold indices).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossFitPlan {
    pub k: usize,
    pub assignment: Vec<usize>,
    pub cluster_respecting: bool,
    pub seed: u64,
}

impl CrossFitPlan {
    pub fn fold_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == fold).collect()
    }

    pub fn train_rows(&self, fold: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in &self.assignment {
            s[f] += 1;
        }
        s
    }
}

/// Random partition of `n` rows into `k` folds. Without clusters the fold
/// sizes differ by at most one. With clusters, whole clusters are placed
/// largest first into the currently smallest fold.
pub fn make_folds(n: usize, k: usize, seed: u64, clusters: Option<&[u32]>) -> Result<CrossFitPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("{k} folds for {n} rows")));
    }
    let mut rng = rng_from_seed(seed);
    let mut assignment = vec![0; n];
    match clusters {
        None => {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            for (pos, &i) in perm.iter().enumerate() {
                assignment[i] = pos % k;
            }
        }
        Some(ids) => {
            if ids.len() != n {
                return Err(Error::Dimension(format!("{} cluster ids for {n} rows", ids.len())));
            }
            let n_clusters = ids.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
            let mut size = vec![0usize; n_clusters];
            for &c in ids {
                size[c as usize] += 1;
            }
            let mut order: Vec<usize> = (0..n_clusters).filter(|&c| size[c] > 0).collect();
            if k > order.len() {
                return Err(Error::InvalidArgument(format!("{k} folds for {} clusters", order.len())));
            }
            order.shuffle(&mut rng);
            order.sort_by(|a, b| size[*b].cmp(&size[*a]));
            let mut fold_of = vec![0usize; n_clusters];
            let mut load = vec![0usize; k];
            for c in order {
                let f = (0..k).min_by_key(|&f| (load[f], f)).expect("k >= 2");
                fold_of[c] = f;
                load[f] += size[c];
            }
            for (i, &c) in ids.iter().enumerate() {
                assignment[i] = fold_of[c as usize];
            }
        }
    }
    Ok(CrossFitPlan {
        k,
        assignment,
        cluster_respecting: clusters.is_some(),
        seed,
    })
}

/// Out-of-fold nuisance predictions: every row's predictions come from
/// models trained on the other folds. π* stays a full-sample fit.
pub fn crossfit_nuisances(
    ds: &Dataset,
    roles: &RoleMap,
    specs: &NuisanceSpecs,
    plan: &CrossFitPlan,
    spec: &InterventionSpec,
    need_natural: bool,
    seed: u64,
) -> Result<NuisanceSet> {
    if plan.assignment.len() != ds.n_rows() {
        return Err(Error::Dimension(format!(
            "fold plan covers {} rows, data has {}",
            plan.assignment.len(),
            ds.n_rows()
        )));
    }
    let inp = NuisanceInputs::new(ds, roles, specs, spec, need_natural)?;
    let records: Vec<FoldRecord> = (0..plan.k)
        .map(|f| FoldRecord {
            fold: f,
            train_rows: plan.train_rows(f),
            predicted_rows: plan.fold_rows(f),
        })
        .collect();
    let passes = records
        .par_iter()
        .map(|r| fit_pass(&inp, &r.train_rows, &r.predicted_rows, r.fold + 1, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(&inp, passes, Source::OutOfFold, records))
}

/// True when no row was predicted by a model whose training set contains
/// a row of the same fold, and every row was predicted exactly once.
pub fn audit_no_leakage(nuis: &NuisanceSet, plan: &CrossFitPlan) -> bool {
    let mut seen = vec![0usize; plan.assignment.len()];
    for rec in &nuis.folds {
        if rec.train_rows.iter().any(|&i| plan.assignment[i] == rec.fold) {
            return false;
        }
        for &i in &rec.predicted_rows {
            if plan.assignment[i] != rec.fold {
                return false;
            }
            seen[i] += 1;
        }
    }
    seen.iter().all(|&c| c == 1)
}
