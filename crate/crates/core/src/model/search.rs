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
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gbdt::{predict_proba, train_rows, GBDTParams};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::eval::roc_auc;
use crate::rng;

/// Sampling ranges for the randomized search. Integer ranges are inclusive;
/// the learning rate is drawn log-uniformly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub n_trees: (usize, usize),
    pub max_depth: (usize, usize),
    pub learning_rate: (f64, f64),
    pub subsample: (f64, f64),
    pub colsample: (f64, f64),
    pub l2_lambda: Vec<f64>,
    pub min_child_weight: f64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            n_trees: (50, 400),
            max_depth: (2, 8),
            learning_rate: (0.01, 0.3),
            subsample: (0.5, 1.0),
            colsample: (0.5, 1.0),
            l2_lambda: vec![0.1, 1.0, 10.0],
            min_child_weight: 1.0,
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n_trees.0 >= 1
            && self.n_trees.0 <= self.n_trees.1
            && self.max_depth.0 >= 1
            && self.max_depth.0 <= self.max_depth.1
            && self.learning_rate.0 > 0.0
            && self.learning_rate.0 <= self.learning_rate.1
            && self.learning_rate.1 <= 1.0
            && self.subsample.0 > 0.0
            && self.subsample.0 <= self.subsample.1
            && self.subsample.1 <= 1.0
            && self.colsample.0 > 0.0
            && self.colsample.0 <= self.colsample.1
            && self.colsample.1 <= 1.0
            && !self.l2_lambda.is_empty();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid search space {self:?}")))
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, seed: u64) -> GBDTParams {
        let uniform = |rng: &mut R, (lo, hi): (f64, f64)| {
            if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            }
        };
        let n_trees = rng.random_range(self.n_trees.0..=self.n_trees.1);
        let max_depth = rng.random_range(self.max_depth.0..=self.max_depth.1);
        let (lo, hi) = self.learning_rate;
        let learning_rate = uniform(rng, (lo.ln(), hi.ln())).exp().min(1.0);
        let subsample = uniform(rng, self.subsample);
        let colsample = uniform(rng, self.colsample);
        let l2_lambda = self.l2_lambda[rng.random_range(0..self.l2_lambda.len())];
        GBDTParams {
            n_trees,
            max_depth,
            learning_rate,
            min_child_weight: self.min_child_weight,
            l2_lambda,
            subsample,
            colsample,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub configs: Vec<GBDTParams>,
    /// Mean validation AUC per config.
    pub scores: Vec<f64>,
    pub best: usize,
}

impl SearchResult {
    pub fn best_params(&self) -> &GBDTParams {
        &self.configs[self.best]
    }
}

/// Fold id per row; each class is shuffled and dealt round-robin.
pub fn stratified_folds(targets: &[u8], n_folds: usize, seed: u64) -> Vec<usize> {
    let mut folds = vec![0; targets.len()];
    for class in [0u8, 1] {
        let mut rows: Vec<usize> = (0..targets.len())
            .filter(|&i| targets[i] == class)
            .collect();
        rows.shuffle(&mut rng::rng_for(seed, &[0xf01d, u64::from(class)]));
        for (j, r) in rows.into_iter().enumerate() {
            folds[r] = j % n_folds;
        }
    }
    folds
}

fn cv_score(ds: &LabeledDataset, folds: &[usize], n_folds: usize, params: &GBDTParams) -> f64 {
    let mut total = 0.0;
    for f in 0..n_folds {
        let (train, valid): (Vec<usize>, Vec<usize>) = (0..ds.len()).partition(|&i| folds[i] != f);
        let fold = || -> Result<f64> {
            let x: Vec<Vec<f64>> = train.iter().map(|&i| ds.features[i].clone()).collect();
            let y: Vec<u8> = train.iter().map(|&i| ds.targets[i]).collect();
            let model = train_rows(&x, &y, &ds.feature_names, params)?;
            let scores = valid
                .iter()
                .map(|&i| predict_proba(&model, &ds.features[i]))
                .collect::<Result<Vec<_>>>()?;
            let labels: Vec<u8> = valid.iter().map(|&i| ds.targets[i]).collect();
            Ok(roc_auc(&scores, &labels)?.auc)
        };
        total += fold().unwrap_or_else(|e| {
            log::warn!("fold {f} failed ({e}); scored as 0.5");
            0.5
        });
    }
    total / n_folds as f64
}

/// Mean stratified CV AUC of each config, in order.
pub fn evaluate_configs(
    ds: &LabeledDataset,
    configs: &[GBDTParams],
    n_folds: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_folds < 2 {
        return Err(Error::Config("n_folds must be at least 2".into()));
    }
    if ds.len() < n_folds {
        return Err(Error::EmptyDataset);
    }
    for c in configs {
        c.validate()?;
    }
    let folds = stratified_folds(&ds.targets, n_folds, seed);
    Ok(configs
        .par_iter()
        .map(|c| cv_score(ds, &folds, n_folds, c))
        .collect())
}

pub fn randomized_search(
    ds: &LabeledDataset,
    space: &SearchSpace,
    n_iter: usize,
    n_folds: usize,
    seed: u64,
) -> Result<SearchResult> {
    space.validate()?;
    if n_iter < 1 {
        return Err(Error::Config("n_iter must be at least 1".into()));
    }
    let mut rng = rng::rng_for(seed, &[0x5ea]);
    let configs: Vec<GBDTParams> = (0..n_iter)
        .map(|i| space.sample(&mut rng, rng::derive_seed(seed, &[0x5ea, i as u64])))
        .collect();
    let scores = evaluate_configs(ds, &configs, n_folds, seed)?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    log::info!("best config {best} with mean CV AUC {:.4}", scores[best]);
    Ok(SearchResult {
        configs,
        scores,
        best,
    })
}
