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

//! Gradient-boosted trees on logistic loss, randomized hyperparameter
//! search, and the random/polar baselines.

mod baselines;
mod gbdt;
mod search;

pub use baselines::{baseline_polar, baseline_random};
pub use gbdt::{
    logistic_loss, predict_proba, sigmoid, train, GBDTModel, GBDTParams, Tree, TreeNode,
};
pub use search::{
    evaluate_configs, randomized_search, stratified_folds, SearchResult, SearchSpace,
};
