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

use rand::Rng;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng;

/// Independent uniform scores in `[0, 1)`.
pub fn baseline_random(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng::rng_for(seed, &[0xba5e]);
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// 0.0 for members of the two main period-1 communities, 1.0 for everyone else.
/// `two_main` holds period-1 community ids; they are located through the
/// dataset's one-hot columns.
pub fn baseline_polar(ds: &LabeledDataset, two_main: [usize; 2]) -> Result<Vec<f64>> {
    let first = ds
        .column_index("community_0")
        .ok_or_else(|| Error::Contract("dataset has no community one-hot columns".into()))?;
    let cols = &ds.provenance.community_columns;
    ds.features
        .iter()
        .zip(&ds.user_ids)
        .map(|(row, user)| {
            let slot = row[first..first + cols.len()]
                .iter()
                .position(|&v| v == 1.0)
                .ok_or_else(|| {
                    Error::Contract(format!("instance {user} has no community bit set"))
                })?;
            Ok(if two_main.contains(&cols[slot]) {
                0.0
            } else {
                1.0
            })
        })
        .collect()
}
