use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::data::DesignMatrix;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

use super::{check_inputs, clip_prob, logit, sigmoid, Family, FitDiagnostics, FittedModel, ModelParams, ModelSpec};

const MAX_HALVINGS: usize = 30;

/// One node of a regression tree. Internal nodes carry `feature`,
/// `threshold`, `left` and `right`; leaves carry only `leaf_value`.
/// Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub feature: Option<usize>,
    pub threshold: Option<f64>,
    pub left: Option<usize>,
    pub right: Option<usize>,
    pub leaf_value: Option<f64>,
}

impl TreeNode {
    fn leaf(value: f64) -> Self {
        Self {
            feature: None,
            threshold: None,
            left: None,
            right: None,
            leaf_value: Some(value),
        }
    }
}

/// Nodes in creation order; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf_index(&self, value_of: impl Fn(usize) -> f64) -> usize {
        let mut at = 0;
        loop {
            let n = &self.nodes[at];
            match (n.feature, n.threshold, n.left, n.right) {
                (Some(f), Some(t), Some(l), Some(r)) => at = if value_of(f) <= t { l } else { r },
                _ => return at,
            }
        }
    }

    pub fn leaf_value(&self, value_of: impl Fn(usize) -> f64) -> f64 {
        self.nodes[self.leaf_index(value_of)].leaf_value.unwrap_or(0.0)
    }

    /// The split at the root, if any, as (feature, threshold).
    pub fn root_split(&self) -> Option<(usize, f64)> {
        let r = &self.nodes[0];
        r.feature.zip(r.threshold)
    }
}

#[derive(Clone, Copy)]
enum Loss {
    Squared,
    Logistic,
}

impl Loss {
    fn mean_loss(self, y: &[f64], f: &[f64]) -> f64 {
        let n = y.len() as f64;
        match self {
            Loss::Squared => y.iter().zip(f).map(|(y, f)| 0.5 * (y - f).powi(2)).sum::<f64>() / n,
            Loss::Logistic => {
                y.iter()
                    .zip(f)
                    .map(|(&y, &f)| {
                        // −[y log σ(f) + (1−y) log(1−σ(f))], written with softplus
                        let sp = |v: f64| if v > 0.0 { v + (-v).exp().ln_1p() } else { v.exp().ln_1p() };
                        y * sp(-f) + (1.0 - y) * sp(f)
                    })
                    .sum::<f64>()
                    / n
            }
        }
    }

    fn grad_hess(self, y: f64, f: f64) -> (f64, f64) {
        match self {
            Loss::Squared => (f - y, 1.0),
            Loss::Logistic => {
                let p = sigmoid(f);
                (p - y, (p * (1.0 - p)).max(1e-16))
            }
        }
    }
}

#[derive(Clone, Copy)]
struct Split {
    gain: f64,
    feature: usize,
    threshold: f64,
}

struct Grower<'a> {
    x: &'a DesignMatrix,
    sorted: &'a [Vec<u32>],
    sorted_vals: &'a [Vec<f64>],
    min_child_weight: f64,
    lambda: f64,
    max_depth: usize,
}

const NONE: u32 = u32::MAX;

impl Grower<'_> {
    /// Grow one tree level by level on the rows flagged in `in_sample`.
    /// Leaf values are filled in by the caller.
    fn grow(&self, g: &[f64], h: &[f64], in_sample: &[bool]) -> Tree {
        let n = self.x.n_rows();
        let mut node_of: Vec<u32> = in_sample.iter().map(|&s| if s { 0 } else { NONE }).collect();
        let mut nodes = vec![TreeNode::leaf(0.0)];
        let (g0, h0) = (0..n)
            .filter(|&i| in_sample[i])
            .fold((0.0, 0.0), |(a, b), i| (a + g[i], b + h[i]));
        let mut active: Vec<(usize, f64, f64)> = vec![(0, g0, h0)];

        for _depth in 0..self.max_depth {
            if active.is_empty() {
                break;
            }
            let mut slot_of = vec![usize::MAX; nodes.len()];
            for (s, &(id, _, _)) in active.iter().enumerate() {
                slot_of[id] = s;
            }
            let slot_row: Vec<u32> = node_of
                .iter()
                .map(|&nd| if nd == NONE { NONE } else { slot_of[nd as usize] as u32 })
                .map(|s| if s == usize::MAX as u32 { NONE } else { s })
                .collect();
            let mut best: Vec<Option<Split>> = vec![None; active.len()];
            // per active node: (GL, HL, last value, seen any)
            let mut acc = vec![(0.0f64, 0.0f64, 0.0f64, false); active.len()];
            for f in 0..self.x.n_cols() {
                acc.iter_mut().for_each(|a| *a = (0.0, 0.0, 0.0, false));
                for (&i, &v) in self.sorted[f].iter().zip(&self.sorted_vals[f]) {
                    let i = i as usize;
                    let s = slot_row[i];
                    if s == NONE {
                        continue;
                    }
                    let s = s as usize;
                    let (gl, hl, last, seen) = acc[s];
                    if seen && v > last {
                        let (_, gt, ht) = active[s];
                        let (gr, hr) = (gt - gl, ht - hl);
                        if hl >= self.min_child_weight && hr >= self.min_child_weight {
                            let gain = 0.5
                                * (gl * gl / (hl + self.lambda) + gr * gr / (hr + self.lambda)
                                    - gt * gt / (ht + self.lambda));
                            if gain > best[s].map_or(0.0, |b| b.gain) {
                                best[s] = Some(Split {
                                    gain,
                                    feature: f,
                                    threshold: 0.5 * (last + v),
                                });
                            }
                        }
                    }
                    acc[s] = (gl + g[i], hl + h[i], v, true);
                }
            }

            let mut next = Vec::new();
            let mut child_of = vec![(NONE, NONE); active.len()];
            for (s, split) in best.iter().enumerate() {
                let Some(split) = split else { continue };
                let (id, _, _) = active[s];
                let l = nodes.len();
                nodes.push(TreeNode::leaf(0.0));
                nodes.push(TreeNode::leaf(0.0));
                nodes[id] = TreeNode {
                    feature: Some(split.feature),
                    threshold: Some(split.threshold),
                    left: Some(l),
                    right: Some(l + 1),
                    leaf_value: None,
                };
                child_of[s] = (l as u32, l as u32 + 1);
            }
            let mut stats = vec![(0.0f64, 0.0f64); nodes.len()];
            for i in 0..n {
                let nd = node_of[i];
                if nd == NONE {
                    continue;
                }
                let s = slot_of[nd as usize];
                if s == usize::MAX || child_of[s].0 == NONE {
                    continue;
                }
                let node = &nodes[nd as usize];
                let goes_left = self.x.get(i, node.feature.unwrap()) <= node.threshold.unwrap();
                let c = if goes_left { child_of[s].0 } else { child_of[s].1 };
                node_of[i] = c;
                stats[c as usize].0 += g[i];
                stats[c as usize].1 += h[i];
            }
            for &(l, r) in &child_of {
                if l != NONE {
                    for c in [l as usize, r as usize] {
                        next.push((c, stats[c].0, stats[c].1));
                    }
                }
            }
            active = next;
        }
        Tree { nodes }
    }
}

/// Gradient tree boosting with second-order leaf weights and L2 shrinkage.
pub fn fit_gbt(x: &DesignMatrix, y: &[f64], spec: &ModelSpec, seed: u64) -> Result<FittedModel> {
    check_inputs(x, y)?;
    let params = spec
        .gbt
        .ok_or_else(|| Error::InvalidArgument("gbt family requires gbt parameters".into()))?;
    params.validate()?;
    let (loss, base) = match spec.family {
        Family::GbtRegression => (Loss::Squared, y.iter().sum::<f64>() / y.len() as f64),
        Family::GbtBinary => {
            if y.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidArgument("binary boosting target must be 0/1".into()));
            }
            (Loss::Logistic, logit(clip_prob(y.iter().sum::<f64>() / y.len() as f64)))
        }
        other => return Err(Error::InvalidArgument(format!("{other:?} is not a boosting family"))),
    };
    let n = x.n_rows();
    let sorted: Vec<Vec<u32>> = (0..x.n_cols())
        .map(|f| {
            let col = x.column(f);
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            idx
        })
        .collect();
    let sorted_vals: Vec<Vec<f64>> = sorted
        .iter()
        .enumerate()
        .map(|(f, idx)| idx.iter().map(|&i| x.get(i as usize, f)).collect())
        .collect();
    let grower = Grower {
        x,
        sorted: &sorted,
        sorted_vals: &sorted_vals,
        min_child_weight: params.min_child_weight,
        lambda: params.l2_lambda,
        max_depth: params.max_depth,
    };
    let mut rng = rng_from_seed(seed);
    let n_sample = ((params.subsample * n as f64).round() as usize).clamp(1, n);

    let mut f = vec![base; n];
    let mut current = loss.mean_loss(y, &f);
    if !current.is_finite() {
        return Err(Error::Estimation("non-finite initial boosting loss".into()));
    }
    let mut trace = vec![current];
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut leaf_of = vec![0usize; n];
    let mut in_sample = vec![true; n];
    for round in 0..params.n_trees {
        for i in 0..n {
            (g[i], h[i]) = loss.grad_hess(y[i], f[i]);
        }
        if n_sample < n {
            in_sample.iter_mut().for_each(|s| *s = false);
            for i in sample(&mut rng, n, n_sample) {
                in_sample[i] = true;
            }
        }
        let mut tree = grower.grow(&g, &h, &in_sample);

        let mut sums = vec![(0.0f64, 0.0f64); tree.nodes.len()];
        for i in 0..n {
            let l = tree.leaf_index(|c| x.get(i, c));
            leaf_of[i] = l;
            sums[l].0 += g[i];
            sums[l].1 += h[i];
        }
        for (node, (gs, hs)) in tree.nodes.iter_mut().zip(&sums) {
            if node.leaf_value.is_some() {
                let denom = hs + params.l2_lambda;
                node.leaf_value = Some(if denom > 0.0 { -gs / denom } else { 0.0 });
            }
        }

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let cand: Vec<f64> = (0..n)
                .map(|i| f[i] + params.learning_rate * scale * tree.nodes[leaf_of[i]].leaf_value.unwrap_or(0.0))
                .collect();
            let cl = loss.mean_loss(y, &cand);
            if !cl.is_finite() {
                return Err(Error::Estimation(format!(
                    "non-finite boosting loss at round {} (trace so far: {:?})",
                    round + 1,
                    trace.last()
                )));
            }
            if cl <= current {
                accepted = Some((cand, cl));
                break;
            }
            scale *= 0.5;
        }
        match accepted {
            Some((cand, cl)) => {
                if scale != 1.0 {
                    for node in tree.nodes.iter_mut() {
                        if let Some(v) = node.leaf_value.as_mut() {
                            *v *= scale;
                        }
                    }
                }
                f = cand;
                current = cl;
            }
            None => {
                for node in tree.nodes.iter_mut() {
                    if node.leaf_value.is_some() {
                        node.leaf_value = Some(0.0);
                    }
                }
            }
        }
        trace.push(current);
        trees.push(tree);
    }

    Ok(FittedModel {
        family: spec.family,
        n_features: x.n_cols(),
        params: ModelParams::Gbt {
            base_score: base,
            learning_rate: params.learning_rate,
            trees,
        },
        diagnostics: FitDiagnostics {
            iterations: params.n_trees,
            final_loss: current,
            converged: true,
            loss_trace: trace,
            ..Default::default()
        },
    })
}
