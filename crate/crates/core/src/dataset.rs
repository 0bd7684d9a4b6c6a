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

//! Per-user feature vectors, binary shift targets and train/test splits.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::community::{CommunityMatching, ConsensusLabeling};
use crate::error::{Error, Result};
use crate::graph::MetricsTable;
use crate::ingest::PeriodWindow;
use crate::rng;
use crate::topics::UserTopicProfile;

pub const GRAPH_METRICS: [&str; 4] = ["degree", "pagerank", "betweenness", "clustering"];

pub fn feature_names(top_k: usize, n_topics: usize) -> Vec<String> {
    GRAPH_METRICS
        .iter()
        .map(|s| s.to_string())
        .chain((0..top_k).map(|i| format!("community_{i}")))
        .chain((0..n_topics).map(|t| format!("topic_{t}")))
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset_id: String,
    pub windows: Vec<PeriodWindow>,
    pub seeds: BTreeMap<String, u64>,
    pub n_topics: usize,
    pub top_k: usize,
    /// Period-1 community id behind each `community_i` column.
    pub community_columns: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub user_ids: Vec<String>,
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<u8>,
    pub feature_names: Vec<String>,
    pub provenance: Provenance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    All,
    Graph,
    Text,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 3] = [FeatureSet::All, FeatureSet::Graph, FeatureSet::Text];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSet::All => "all",
            FeatureSet::Graph => "graph",
            FeatureSet::Text => "text",
        }
    }

    fn keeps(self, name: &str) -> bool {
        let text = name.starts_with("topic_");
        match self {
            FeatureSet::All => true,
            FeatureSet::Graph => !text,
            FeatureSet::Text => text,
        }
    }
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.user_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.user_ids.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.features.iter().map(|r| r[j]).collect()
    }

    pub fn positives(&self) -> usize {
        self.targets.iter().filter(|&&t| t == 1).count()
    }

    pub fn subset(&self, rows: &[usize]) -> LabeledDataset {
        LabeledDataset {
            user_ids: rows.iter().map(|&i| self.user_ids[i].clone()).collect(),
            features: rows.iter().map(|&i| self.features[i].clone()).collect(),
            targets: rows.iter().map(|&i| self.targets[i]).collect(),
            feature_names: self.feature_names.clone(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn select(&self, set: FeatureSet) -> LabeledDataset {
        let cols: Vec<usize> = (0..self.n_features())
            .filter(|&j| set.keeps(&self.feature_names[j]))
            .collect();
        LabeledDataset {
            user_ids: self.user_ids.clone(),
            features: self
                .features
                .iter()
                .map(|r| cols.iter().map(|&j| r[j]).collect())
                .collect(),
            targets: self.targets.clone(),
            feature_names: cols
                .iter()
                .map(|&j| self.feature_names[j].clone())
                .collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// 1 if the user's period-2 community is not the match of their period-1 community.
pub fn label_shift(
    user: &str,
    labeling1: &ConsensusLabeling,
    labeling2: &ConsensusLabeling,
    matching: &CommunityMatching,
) -> Result<u8> {
    let c1 = labeling1
        .community_of(user)
        .ok_or_else(|| Error::Contract(format!("user {user} has no stable period-1 community")))?;
    let c2 = labeling2
        .community_of(user)
        .ok_or_else(|| Error::Contract(format!("user {user} has no stable period-2 community")))?;
    let partner = matching
        .partner_of(c1)
        .ok_or_else(|| Error::Contract(format!("community {c1} of user {user} is unmatched")))?;
    if matching.origin_of(c2).is_none() {
        return Err(Error::Contract(format!(
            "period-2 community {c2} of user {user} is unmatched"
        )));
    }
    Ok(u8::from(partner != c2))
}

pub struct AssembleInputs<'a> {
    pub metrics1: &'a MetricsTable,
    pub labeling1: &'a ConsensusLabeling,
    pub labeling2: &'a ConsensusLabeling,
    pub profiles: &'a BTreeMap<String, UserTopicProfile>,
    pub eligible: &'a BTreeSet<String>,
    pub matching: &'a CommunityMatching,
    pub n_topics: usize,
}

/// One instance per eligible user, in user-id order. Features are period-1 only.
pub fn assemble(inputs: &AssembleInputs<'_>, provenance: Provenance) -> Result<LabeledDataset> {
    if inputs.eligible.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let columns: Vec<usize> = inputs.matching.pairs.iter().map(|p| p.c1).collect();
    let top_k = columns.len();
    let k = inputs.n_topics;
    let mut ds = LabeledDataset {
        user_ids: Vec::with_capacity(inputs.eligible.len()),
        features: Vec::with_capacity(inputs.eligible.len()),
        targets: Vec::with_capacity(inputs.eligible.len()),
        feature_names: feature_names(top_k, k),
        provenance: Provenance {
            top_k,
            n_topics: k,
            community_columns: columns.clone(),
            ..provenance
        },
    };
    for user in inputs.eligible {
        let m = inputs.metrics1.get(user).ok_or_else(|| {
            Error::Contract(format!("eligible user {user} has no period-1 metrics"))
        })?;
        let p = inputs
            .profiles
            .get(user)
            .ok_or_else(|| Error::Contract(format!("eligible user {user} has no topic profile")))?;
        if p.fractions.len() != k {
            return Err(Error::Contract(format!(
                "profile of {user} has {} topics, expected {k}",
                p.fractions.len()
            )));
        }
        let c1 = inputs.labeling1.community_of(user).unwrap_or(usize::MAX);
        let slot = columns.iter().position(|&c| c == c1).ok_or_else(|| {
            Error::Contract(format!(
                "eligible user {user} is outside the matched communities"
            ))
        })?;
        let mut row = vec![m.degree as f64, m.pagerank, m.betweenness, m.clustering];
        row.extend((0..top_k).map(|i| if i == slot { 1.0 } else { 0.0 }));
        row.extend_from_slice(&p.fractions);
        ds.targets.push(label_shift(
            user,
            inputs.labeling1,
            inputs.labeling2,
            inputs.matching,
        )?);
        ds.user_ids.push(user.clone());
        ds.features.push(row);
    }
    Ok(ds)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.67,
            seed: 0,
            stratified: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    /// Row indices, ascending.
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub stratified: bool,
}

pub fn split(ds: &LabeledDataset, spec: &SplitSpec) -> Result<Split> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction {} must lie in (0, 1)",
            spec.train_fraction
        )));
    }
    let mut rng = rng::rng_for(spec.seed, &[0x5b1]);
    let pos: Vec<usize> = (0..ds.len()).filter(|&i| ds.targets[i] == 1).collect();
    let neg: Vec<usize> = (0..ds.len()).filter(|&i| ds.targets[i] != 1).collect();
    let stratified = spec.stratified && pos.len() >= 2 && neg.len() >= 2;
    if spec.stratified && !stratified {
        log::warn!(
            "stratified split needs two instances per class ({} positive, {} negative); using a plain random split",
            pos.len(),
            neg.len()
        );
    }
    let groups = if stratified {
        vec![pos, neg]
    } else {
        vec![(0..ds.len()).collect()]
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut g in groups {
        g.shuffle(&mut rng);
        let n = g.len();
        let mut take = (spec.train_fraction * n as f64).round() as usize;
        if n >= 2 {
            take = take.clamp(1, n - 1);
        }
        train.extend_from_slice(&g[..take]);
        test.extend_from_slice(&g[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split {
        train,
        test,
        stratified,
    })
}
