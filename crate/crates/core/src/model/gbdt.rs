// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GBDTParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Minimum hessian sum per child.
    pub min_child_weight: f64,
    pub l2_lambda: f64,
    pub subsample: f64,
    pub colsample: f64,
    pub seed: u64,
}

impl Default for GBDTParams {
    fn default() -> Self {
        GBDTParams {
            n_trees: 100,
            max_depth: 4,
            learning_rate: 0.1,
            min_child_weight: 1.0,
            l2_lambda: 1.0,
            subsample: 1.0,
            colsample: 1.0,
            seed: 0,
        }
    }
}

impl GBDTParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if self.n_trees < 1 || self.max_depth < 1 {
            return Err(Error::Config(
                "n_trees and max_depth must be at least 1".into(),
            ));
        }
        if !unit(self.learning_rate) || !unit(self.subsample) || !unit(self.colsample) {
            return Err(Error::Config(
                "learning_rate, subsample and colsample must lie in (0, 1]".into(),
            ));
        }
        if self.l2_lambda < 0.0 || self.min_child_weight < 0.0 {
            return Err(Error::Config(
                "l2_lambda and min_child_weight must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: f64,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { weight } => return weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] < threshold { left } else { right },
            }
        }
    }

    /// Number of split levels on the deepest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(t, left).max(walk(t, right)),
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            walk(self, 0)
        }
    }

    pub fn uses_feature(&self, f: usize) -> bool {
        self.nodes
            .iter()
            .any(|n| matches!(n, TreeNode::Split { feature, .. } if *feature == f))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GBDTModel {
    /// Log-odds of the training prevalence.
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub params: GBDTParams,
    pub feature_names: Vec<String>,
    /// Mean training logistic loss before the first tree and after each round.
    #[serde(default)]
    pub loss_history: Vec<f64>,
}

impl GBDTModel {
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

const PROB_FLOOR: f64 = 1e-15;

pub fn predict_proba(model: &GBDTModel, x: &[f64]) -> Result<f64> {
    if x.len() != model.feature_names.len() {
        return Err(Error::Contract(format!(
            "instance has {} features, model expects {}",
            x.len(),
            model.feature_names.len()
        )));
    }
    Ok(sigmoid(model.raw_score(x)).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR))
}

/// Mean of `log(1 + e^z) − y·z`.
pub fn logistic_loss(raw: &[f64], y: &[f64]) -> f64 {
    let total: f64 = raw
        .iter()
        .zip(y)
        .map(|(&z, &t)| {
            let softplus = if z > 0.0 {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            };
            softplus - t * z
        })
        .sum();
    total / raw.len() as f64
}

/// Nodes with at least this many rows scan features in parallel.
const PAR_MIN_ROWS: usize = 2048;

struct Grower<'a> {
    x: &'a [Vec<f64>],
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GBDTParams,
    go_left: Vec<bool>,
    nodes: Vec<TreeNode>,
}

struct BestSplit {
    gain: f64,
    slot: usize,
    threshold: f64,
}

impl Grower<'_> {
    /// `lists[s]` holds this node's rows sorted by the s-th sampled feature.
    fn grow(&mut self, columns: &[usize], lists: Vec<Vec<u32>>, depth: usize) -> usize {
        let rows = &lists[0];
        let (g, h) = rows.iter().fold((0.0, 0.0), |(g, h), &r| {
            (g + self.grad[r as usize], h + self.hess[r as usize])
        });
        let lambda = self.params.l2_lambda;
        let leaf = TreeNode::Leaf {
            weight: -g / (h + lambda) * self.params.learning_rate,
        };
        if depth >= self.params.max_depth || rows.len() < 2 {
            self.nodes.push(leaf);
            return self.nodes.len() - 1;
        }
        let Some(best) = self.best_split(columns, &lists, g, h) else {
            self.nodes.push(leaf);
            return self.nodes.len() - 1;
        };
        let feature = columns[best.slot];
        for &r in &lists[best.slot] {
            self.go_left[r as usize] = self.x[r as usize][feature] < best.threshold;
        }
        let mut left_lists = Vec::with_capacity(lists.len());
        let mut right_lists = Vec::with_capacity(lists.len());
        for list in lists {
            let (l, r): (Vec<u32>, Vec<u32>) =
                list.into_iter().partition(|&r| self.go_left[r as usize]);
            left_lists.push(l);
            right_lists.push(r);
        }
        let me = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { weight: 0.0 });
        let left = self.grow(columns, left_lists, depth + 1);
        let right = self.grow(columns, right_lists, depth + 1);
        self.nodes[me] = TreeNode::Split {
            feature,
            threshold: best.threshold,
            left,
            right,
        };
        me
    }

    fn best_split(
        &self,
        columns: &[usize],
        lists: &[Vec<u32>],
        g: f64,
        h: f64,
    ) -> Option<BestSplit> {
        let scan = |slot: usize| self.scan_feature(slot, columns[slot], &lists[slot], g, h);
        let per_feature: Vec<Option<BestSplit>> = if lists[0].len() >= PAR_MIN_ROWS {
            (0..columns.len()).into_par_iter().map(scan).collect()
        } else {
            (0..columns.len()).map(scan).collect()
        };
        let mut best: Option<BestSplit> = None;
        for cand in per_feature.into_iter().flatten() {
            if best.as_ref().is_none_or(|b| cand.gain > b.gain) {
                best = Some(cand);
            }
        }
        best
    }

    fn scan_feature(
        &self,
        slot: usize,
        f: usize,
        list: &[u32],
        g: f64,
        h: f64,
    ) -> Option<BestSplit> {
        let lambda = self.params.l2_lambda;
        let mcw = self.params.min_child_weight;
        let parent = g * g / (h + lambda);
        let mut best: Option<BestSplit> = None;
        let (mut gl, mut hl) = (0.0, 0.0);
        for w in list.windows(2) {
            let (r, next) = (w[0] as usize, w[1] as usize);
            gl += self.grad[r];
            hl += self.hess[r];
            let (a, b) = (self.x[r][f], self.x[next][f]);
            if a.partial_cmp(&b) != Some(std::cmp::Ordering::Less) {
                continue;
            }
            let (gr, hr) = (g - gl, h - hl);
            if hl < mcw || hr < mcw {
                continue;
            }
            let gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent);
            if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                let mid = a + (b - a) / 2.0;
                let threshold = if mid > a { mid } else { b };
                best = Some(BestSplit {
                    gain,
                    slot,
                    threshold,
                });
            }
        }
        best
    }
}

pub fn train(ds: &LabeledDataset, params: &GBDTParams) -> Result<GBDTModel> {
    train_rows(&ds.features, &ds.targets, &ds.feature_names, params)
}

/// Exact greedy boosting with second-order gain and L2 leaf regularization.
pub fn train_rows(
    x: &[Vec<f64>],
    targets: &[u8],
    feature_names: &[String],
    params: &GBDTParams,
) -> Result<GBDTModel> {
    params.validate()?;
    let n = x.len();
    if n != targets.len() {
        return Err(Error::Contract(
            "feature rows and targets differ in length".into(),
        ));
    }
    let d = feature_names.len();
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::Contract(format!("every row must have {d} features")));
    }
    let positives = targets.iter().filter(|&&t| t == 1).count();
    if n < 2 || positives == 0 || positives == n {
        return Err(Error::SingleClass);
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Contract("features must be finite".into()));
    }
    let y: Vec<f64> = targets.iter().map(|&t| f64::from(t)).collect();
    let prevalence = positives as f64 / n as f64;
    let base_score = (prevalence / (1.0 - prevalence)).ln();

    let sorted: Vec<Vec<u32>> = (0..d)
        .map(|f| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| {
                x[a as usize][f]
                    .total_cmp(&x[b as usize][f])
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect();

    let mut raw = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut loss_history = vec![logistic_loss(&raw, &y)];
    let mut trees = Vec::with_capacity(params.n_trees);
    let n_rows = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    let n_cols = ((params.colsample * d as f64).round() as usize).clamp(1, d.max(1));
    let mut in_sample = vec![true; n];

    for t in 0..params.n_trees {
        let mut rng = rng::rng_for(params.seed, &[t as u64]);
        for i in 0..n {
            let p = sigmoid(raw[i]);
            grad[i] = p - y[i];
            hess[i] = p * (1.0 - p);
        }
        if n_rows < n {
            let mut rows: Vec<usize> = (0..n).collect();
            rows.shuffle(&mut rng);
            in_sample.iter_mut().for_each(|s| *s = false);
            for &r in &rows[..n_rows] {
                in_sample[r] = true;
            }
        }
        let mut columns: Vec<usize> = (0..d).collect();
        if n_cols < d {
            columns.shuffle(&mut rng);
            columns.truncate(n_cols);
            columns.sort_unstable();
        }
        let lists: Vec<Vec<u32>> = columns
            .iter()
            .map(|&f| {
                sorted[f]
                    .iter()
                    .copied()
                    .filter(|&r| in_sample[r as usize])
                    .collect()
            })
            .collect();
        let mut grower = Grower {
            x,
            grad: &grad,
            hess: &hess,
            params,
            go_left: vec![false; n],
            nodes: Vec::new(),
        };
        grower.grow(&columns, lists, 0);
        let tree = Tree {
            nodes: grower.nodes,
        };
        for (i, z) in raw.iter_mut().enumerate() {
            *z += tree.predict(&x[i]);
        }
        loss_history.push(logistic_loss(&raw, &y));
        trees.push(tree);
    }
    Ok(GBDTModel {
        base_score,
        trees,
        params: params.clone(),
        feature_names: feature_names.to_vec(),
        loss_history,
    })
}
