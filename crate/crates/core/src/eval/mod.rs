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

//! ROC/AUC, permutation importance, the PageRank gap, and community topic
//! flows.

mod svg;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::community::{CommunityMatching, ConsensusLabeling};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::model::{predict_proba, GBDTModel};
use crate::rng;
use crate::topics::UserTopicProfile;

pub use svg::{importance_svg, roc_svg};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Threshold sweep over distinct scores, highest first, with tied scores
/// entering together, and trapezoidal area under the resulting curve.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Contract("scores contain NaN".into()));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let (x0, y0) = *points.last().unwrap();
        let (x1, y1) = (fp as f64 / neg as f64, tp as f64 / pos as f64);
        auc += (x1 - x0) * (y0 + y1) / 2.0;
        points.push((x1, y1));
    }
    Ok(RocCurve { points, auc })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub mean_drop: f64,
    /// Population standard deviation of the per-repeat drops.
    pub std: f64,
    /// `std / sqrt(n_repeats)`.
    pub std_error: f64,
    pub n_repeats: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub baseline_auc: f64,
    pub n_repeats: usize,
    /// Sorted by mean drop, largest first.
    pub features: Vec<FeatureImportance>,
}

impl ImportanceReport {
    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.features.iter().position(|f| f.feature == feature)
    }
}

fn score_rows(model: &GBDTModel, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    rows.iter().map(|r| predict_proba(model, r)).collect()
}

/// AUC drop when one column is shuffled across instances, per feature.
pub fn permutation_importance(
    model: &GBDTModel,
    test: &LabeledDataset,
    n_repeats: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    if n_repeats < 1 {
        return Err(Error::Config("n_repeats must be at least 1".into()));
    }
    let baseline_auc = roc_auc(&score_rows(model, &test.features)?, &test.targets)?.auc;
    let d = test.n_features();
    let jobs: Vec<(usize, usize)> = (0..d)
        .flat_map(|j| (0..n_repeats).map(move |r| (j, r)))
        .collect();
    let drops = jobs
        .par_iter()
        .map(|&(j, r)| {
            let mut column = test.column(j);
            column.shuffle(&mut rng::rng_for(seed, &[0x1a7, j as u64, r as u64]));
            let rows: Vec<Vec<f64>> = test
                .features
                .iter()
                .zip(&column)
                .map(|(row, &v)| {
                    let mut row = row.clone();
                    row[j] = v;
                    row
                })
                .collect();
            Ok(baseline_auc - roc_auc(&score_rows(model, &rows)?, &test.targets)?.auc)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut features: Vec<FeatureImportance> = drops
        .chunks(n_repeats)
        .zip(&test.feature_names)
        .map(|(d, name)| {
            let n = d.len() as f64;
            let mean = d.iter().sum::<f64>() / n;
            let std = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            FeatureImportance {
                feature: name.clone(),
                mean_drop: mean,
                std,
                std_error: std / n.sqrt(),
                n_repeats,
            }
        })
        .collect();
    features.sort_by(|a, b| b.mean_drop.total_cmp(&a.mean_drop));
    Ok(ImportanceReport {
        baseline_auc,
        n_repeats,
        features,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageRankGap {
    pub mean_shifting: f64,
    pub mean_non_shifting: f64,
    /// Non-shifting mean over shifting mean.
    pub ratio: f64,
    pub n_shifting: usize,
    pub n_non_shifting: usize,
}

pub fn pagerank_gap(ds: &LabeledDataset) -> Result<PageRankGap> {
    let j = ds
        .column_index("pagerank")
        .ok_or_else(|| Error::Contract("dataset has no pagerank column".into()))?;
    let (mut sum, mut n) = ([0.0; 2], [0usize; 2]);
    for (row, &t) in ds.features.iter().zip(&ds.targets) {
        sum[t as usize] += row[j];
        n[t as usize] += 1;
    }
    if n[0] == 0 || n[1] == 0 {
        return Err(Error::SingleClass);
    }
    let mean_shifting = sum[1] / n[1] as f64;
    let mean_non_shifting = sum[0] / n[0] as f64;
    if mean_shifting <= 0.0 {
        return Err(Error::Data("shifting users have zero mean PageRank".into()));
    }
    Ok(PageRankGap {
        mean_shifting,
        mean_non_shifting,
        ratio: mean_non_shifting / mean_shifting,
        n_shifting: n[1],
        n_non_shifting: n[0],
    })
}

fn mean_profile<'a>(rows: impl Iterator<Item = &'a [f64]>, k: usize) -> (Vec<f64>, usize) {
    let mut acc = vec![0.0; k];
    let mut n = 0;
    for r in rows {
        for (a, v) in acc.iter_mut().zip(r) {
            *a += v;
        }
        n += 1;
    }
    if n > 0 {
        acc.iter_mut().for_each(|a| *a /= n as f64);
    }
    (acc, n)
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
    v
}

/// Mean member profile per stable community, renormalized to sum to 1.
/// `members` restricts the users considered when given.
pub fn community_topic_distribution(
    profiles: &BTreeMap<String, UserTopicProfile>,
    labeling: &ConsensusLabeling,
    members: Option<&BTreeSet<String>>,
    n_topics: usize,
) -> BTreeMap<usize, Vec<f64>> {
    let mut out = BTreeMap::new();
    for c in labeling.sizes().into_keys() {
        let rows = labeling
            .stable
            .iter()
            .filter(|(u, &lc)| lc == c && members.is_none_or(|m| m.contains(*u)))
            .filter_map(|(u, _)| profiles.get(u))
            .map(|p| p.fractions.as_slice());
        let (mean, n) = mean_profile(rows, n_topics);
        if n == 0 || mean.iter().all(|&x| x == 0.0) {
            log::warn!("community {c} has no topic mass; reporting a zero vector");
        }
        out.insert(c, normalized(mean));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PersuasivenessScore {
    pub topic: usize,
    pub score: f64,
    pub mean_shifting: f64,
    pub mean_non_shifting: f64,
}

pub const DEFAULT_SMOOTHING: f64 = 1e-6;

/// `(mean share among targets=1 + s) / (mean share among targets=0 + s)`,
/// topics ranked by score. Each profile is rescaled to sum to 1 first.
pub fn persuasiveness(
    profiles: &[&[f64]],
    targets: &[u8],
    smoothing: f64,
) -> Result<Vec<PersuasivenessScore>> {
    if profiles.len() != targets.len() {
        return Err(Error::Contract(
            "profiles and targets differ in length".into(),
        ));
    }
    let k = profiles.first().map_or(0, |p| p.len());
    let rows: Vec<Vec<f64>> = profiles.iter().map(|p| normalized(p.to_vec())).collect();
    let class = |c: u8| {
        mean_profile(
            rows.iter()
                .zip(targets)
                .filter(|(_, &t)| t == c)
                .map(|(r, _)| r.as_slice()),
            k,
        )
    };
    let (shift, n1) = class(1);
    let (stay, n0) = class(0);
    if n1 == 0 || n0 == 0 {
        return Err(Error::SingleClass);
    }
    let mut scores: Vec<PersuasivenessScore> = (0..k)
        .map(|t| PersuasivenessScore {
            topic: t,
            score: (shift[t] + smoothing) / (stay[t] + smoothing),
            mean_shifting: shift[t],
            mean_non_shifting: stay[t],
        })
        .collect();
    scores.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(scores)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowArrow {
    /// Period-1 community id.
    pub from: usize,
    /// Period-2 community id.
    pub to: usize,
    /// Whether `to` is the matched partner of `from`.
    pub stay: bool,
    pub count: usize,
    pub percent: f64,
    pub drawn: bool,
    /// Top topics by mean profile among the users on this arrow.
    pub top_topics_by_share: Vec<usize>,
    /// Top topics by persuasiveness of the arrow's users against all stayers.
    pub top_topics_by_persuasiveness: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicFlowReport {
    pub threshold: f64,
    /// Eligible users per period-1 community.
    pub origin_sizes: BTreeMap<usize, usize>,
    pub topics_period1: BTreeMap<usize, Vec<f64>>,
    pub topics_period2: BTreeMap<usize, Vec<f64>>,
    pub arrows: Vec<FlowArrow>,
}

impl TopicFlowReport {
    pub fn outgoing_percent(&self, from: usize) -> f64 {
        self.arrows
            .iter()
            .filter(|a| a.from == from)
            .map(|a| a.percent)
            .sum()
    }
}

pub const DEFAULT_FLOW_THRESHOLD: f64 = 0.01;
const FLOW_TOP_TOPICS: usize = 3;

fn top_indices(values: &[f64], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(n);
    idx
}

/// Movement of eligible users between matched communities. Arrows below
/// `threshold` (a fraction of the origin community) are kept but not drawn.
pub fn flow_report(
    labeling1: &ConsensusLabeling,
    labeling2: &ConsensusLabeling,
    matching: &CommunityMatching,
    profiles: &BTreeMap<String, UserTopicProfile>,
    eligible: &BTreeSet<String>,
    n_topics: usize,
    threshold: f64,
) -> TopicFlowReport {
    let mut flows: BTreeMap<(usize, usize), Vec<&str>> = BTreeMap::new();
    let mut origin_sizes = BTreeMap::new();
    let mut stayers = Vec::new();
    for user in eligible {
        let (Some(c1), Some(c2)) = (labeling1.community_of(user), labeling2.community_of(user))
        else {
            continue;
        };
        if matching.partner_of(c1).is_none() {
            continue;
        }
        *origin_sizes.entry(c1).or_insert(0) += 1;
        if matching.partner_of(c1) == Some(c2) {
            if let Some(p) = profiles.get(user) {
                stayers.push(p.fractions.as_slice());
            }
        }
        flows.entry((c1, c2)).or_default().push(user);
    }
    let zero = vec![0.0; n_topics];
    let (stay_mean, _) = mean_profile(stayers.iter().copied(), n_topics);
    let mut arrows = Vec::new();
    for pair in &matching.pairs {
        let n = origin_sizes.get(&pair.c1).copied().unwrap_or(0);
        let mut dests: Vec<usize> = matching.pairs.iter().map(|p| p.c2).collect();
        dests.extend(
            flows
                .keys()
                .filter(|(a, b)| *a == pair.c1 && !dests.contains(b))
                .map(|k| k.1)
                .collect::<Vec<_>>(),
        );
        for to in dests {
            let users = flows.get(&(pair.c1, to)).map_or(&[][..], |v| v.as_slice());
            let percent = if n == 0 {
                0.0
            } else {
                100.0 * users.len() as f64 / n as f64
            };
            let (share, m) = mean_profile(
                users.iter().map(|u| {
                    profiles
                        .get(*u)
                        .map_or(zero.as_slice(), |p| p.fractions.as_slice())
                }),
                n_topics,
            );
            let ratio: Vec<f64> = share
                .iter()
                .zip(&stay_mean)
                .map(|(s, b)| (s + DEFAULT_SMOOTHING) / (b + DEFAULT_SMOOTHING))
                .collect();
            let (by_share, by_ratio) = if m == 0 {
                (vec![], vec![])
            } else {
                (
                    top_indices(&share, FLOW_TOP_TOPICS),
                    top_indices(&ratio, FLOW_TOP_TOPICS),
                )
            };
            arrows.push(FlowArrow {
                from: pair.c1,
                to,
                stay: to == pair.c2,
                count: users.len(),
                percent,
                drawn: !users.is_empty() && percent >= threshold * 100.0,
                top_topics_by_share: by_share,
                top_topics_by_persuasiveness: by_ratio,
            });
        }
    }
    TopicFlowReport {
        threshold,
        topics_period1: community_topic_distribution(profiles, labeling1, Some(eligible), n_topics),
        topics_period2: community_topic_distribution(profiles, labeling2, Some(eligible), n_topics),
        origin_sizes,
        arrows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::community::MatchedPair;
    use crate::dataset::Provenance;
    use crate::model::{train, GBDTParams};
    use proptest::prelude::*;
    use rand::Rng;

    /// Pairwise estimator, ties counting one half.
    fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
        let (mut wins, mut pairs) = (0.0, 0.0);
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] == 1 && labels[j] == 0 {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn roc_examples() {
        assert_eq!(
            roc_auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap().auc,
            1.0
        );
        assert!((roc_auc(&[0.9, 0.8, 0.7], &[1, 0, 1]).unwrap().auc - 0.5).abs() < 1e-12);
        let tied = roc_auc(&[0.3; 6], &[1, 0, 1, 0, 0, 1]).unwrap();
        assert_eq!(tied.auc, 0.5);
        assert_eq!(tied.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert!(matches!(
            roc_auc(&[0.1, 0.2], &[1, 1]),
            Err(Error::UndefinedAuc)
        ));
    }

    #[test]
    fn roc_matches_pairwise_on_random_sets() {
        for s in 0..50u64 {
            let mut rng = rng::rng_for(s, &[]);
            let n = rng.random_range(2..80);
            let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
            labels[0] = 0;
            labels[1] = 1;
            let scores: Vec<f64> = (0..n)
                .map(|_| f64::from(rng.random_range(0..10u8)) / 10.0)
                .collect();
            let c = roc_auc(&scores, &labels).unwrap();
            assert!((c.auc - pairwise_auc(&scores, &labels)).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn roc_curve_shape_and_monotone_invariance(
            data in proptest::collection::vec((-5.0f64..5.0, any::<bool>()), 2..60)
        ) {
            let scores: Vec<f64> = data.iter().map(|d| (d.0 * 4.0).round() / 4.0).collect();
            let labels: Vec<u8> = data.iter().map(|d| u8::from(d.1)).collect();
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let c = roc_auc(&scores, &labels).unwrap();
            prop_assert_eq!(c.points[0], (0.0, 0.0));
            prop_assert_eq!(*c.points.last().unwrap(), (1.0, 1.0));
            for w in c.points.windows(2) {
                prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
            }
            prop_assert!((c.auc - pairwise_auc(&scores, &labels)).abs() < 1e-9);
            let t: Vec<f64> = scores.iter().map(|s| (s * 0.7).exp() + 3.0).collect();
            prop_assert!((roc_auc(&t, &labels).unwrap().auc - c.auc).abs() < 1e-12);
        }

        #[test]
        fn persuasiveness_scale_invariant(
            rows in proptest::collection::vec((proptest::collection::vec(0.0f64..1.0, 3), any::<bool>()), 2..30),
            c in 0.1f64..10.0
        ) {
            let targets: Vec<u8> = rows.iter().map(|r| u8::from(r.1)).collect();
            prop_assume!(targets.contains(&0) && targets.contains(&1));
            let a: Vec<&[f64]> = rows.iter().map(|r| r.0.as_slice()).collect();
            let scaled: Vec<Vec<f64>> = rows.iter().map(|r| r.0.iter().map(|x| x * c).collect()).collect();
            let b: Vec<&[f64]> = scaled.iter().map(|r| r.as_slice()).collect();
            let sa = persuasiveness(&a, &targets, DEFAULT_SMOOTHING).unwrap();
            let sb = persuasiveness(&b, &targets, DEFAULT_SMOOTHING).unwrap();
            for (x, y) in sa.iter().zip(&sb) {
                prop_assert_eq!(x.topic, y.topic);
                prop_assert!((x.score - y.score).abs() <= 1e-9 * x.score.max(1.0));
            }
        }
    }

    fn dataset(x: Vec<Vec<f64>>, y: Vec<u8>) -> LabeledDataset {
        let d = x[0].len();
        LabeledDataset {
            user_ids: (0..x.len()).map(|i| format!("u{i}")).collect(),
            features: x,
            targets: y,
            feature_names: (0..d).map(|i| format!("f{i}")).collect(),
            provenance: Provenance::default(),
        }
    }

    fn fixture(n: usize, seed: u64, duplicate: bool) -> LabeledDataset {
        let mut rng = rng::rng_for(seed, &[]);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let s: f64 = rng.random();
            let noise: f64 = rng.random();
            x.push(if duplicate {
                vec![s, s, noise]
            } else {
                vec![s, noise]
            });
            y.push(u8::from(s > 0.5));
        }
        dataset(x, y)
    }

    #[test]
    fn importance_of_sole_predictor_and_unused_column() {
        let ds = fixture(300, 1, false);
        let p = GBDTParams {
            n_trees: 20,
            max_depth: 1,
            colsample: 1.0,
            ..Default::default()
        };
        let mut model = train(&ds, &p).unwrap();
        assert!(model.trees.iter().all(|t| !t.uses_feature(1)));
        model.feature_names = ds.feature_names.clone();
        let rep = permutation_importance(&model, &ds, 10, 4).unwrap();
        assert_eq!(rep.features[0].feature, "f0");
        assert!(
            (rep.features[0].mean_drop - 0.5).abs() < 0.05,
            "{:?}",
            rep.features[0]
        );
        let unused = &rep.features[rep.rank_of("f1").unwrap()];
        assert!(unused.mean_drop.abs() < 0.02);
        assert_eq!(unused.std, 0.0);
        assert_eq!(rep, permutation_importance(&model, &ds, 10, 4).unwrap());
    }

    #[test]
    fn duplicated_predictors_share_importance() {
        let single = fixture(300, 2, false);
        let dup = fixture(300, 2, true);
        let p = GBDTParams {
            n_trees: 40,
            max_depth: 2,
            colsample: 0.67,
            seed: 3,
            ..Default::default()
        };
        let m1 = train(&single, &p).unwrap();
        let m2 = train(&dup, &p).unwrap();
        let r1 = permutation_importance(&m1, &single, 10, 1).unwrap();
        let r2 = permutation_importance(&m2, &dup, 10, 1).unwrap();
        let sole = r1.features[r1.rank_of("f0").unwrap()].mean_drop;
        for f in ["f0", "f1"] {
            let d = r2.features[r2.rank_of(f).unwrap()].mean_drop;
            assert!(d < sole, "{f}: {d} vs {sole}");
        }
    }

    #[test]
    fn importance_error_shrinks_with_repeats() {
        let ds = fixture(200, 5, false);
        let m = train(
            &ds,
            &GBDTParams {
                n_trees: 10,
                ..Default::default()
            },
        )
        .unwrap();
        let a = permutation_importance(&m, &ds, 10, 8).unwrap();
        let b = permutation_importance(&m, &ds, 100, 8).unwrap();
        let se = |r: &ImportanceReport| r.features[r.rank_of("f0").unwrap()].std_error;
        assert!(se(&b) < se(&a));
    }

    #[test]
    fn pagerank_gap_examples() {
        let mk = |pr: &[f64], y: &[u8]| LabeledDataset {
            feature_names: vec!["degree".into(), "pagerank".into()],
            ..dataset(pr.iter().map(|&p| vec![1.0, p]).collect(), y.to_vec())
        };
        let g = pagerank_gap(&mk(&[0.2, 0.2, 0.2], &[0, 1, 0])).unwrap();
        assert!((g.ratio - 1.0).abs() < 1e-12);
        let g = pagerank_gap(&mk(&[8.97e-6, 1.99e-5], &[1, 0])).unwrap();
        assert!((g.ratio - 1.99e-5 / 8.97e-6).abs() < 1e-12);
        assert!(g.ratio > 1.56);
        assert!(pagerank_gap(&mk(&[0.1, 0.2], &[0, 0])).is_err());
    }

    fn profiles(rows: &[(&str, &[f64])]) -> BTreeMap<String, UserTopicProfile> {
        rows.iter()
            .map(|(u, f)| {
                (
                    u.to_string(),
                    UserTopicProfile {
                        fractions: f.to_vec(),
                        tweets_counted: 1,
                    },
                )
            })
            .collect()
    }

    fn labeling(rows: &[(&str, usize)]) -> ConsensusLabeling {
        ConsensusLabeling {
            runs: 2,
            stable: rows.iter().map(|(u, c)| (u.to_string(), *c)).collect(),
            unstable: BTreeSet::new(),
        }
    }

    #[test]
    fn topic_distribution_examples() {
        let p = profiles(&[
            ("a", &[1.0, 0.0]),
            ("b", &[0.0, 1.0]),
            ("c", &[1.0, 0.0]),
            ("d", &[1.0, 0.0]),
            ("e", &[0.5, 0.5]),
        ]);
        let l = labeling(&[("a", 0), ("b", 0), ("c", 1), ("d", 1), ("e", 2)]);
        let dist = community_topic_distribution(&p, &l, None, 2);
        assert_eq!(dist[&0], vec![0.5, 0.5]);
        assert_eq!(dist[&1], vec![1.0, 0.0]);
        assert_eq!(dist[&2], vec![0.5, 0.5]);
        let only_a: BTreeSet<String> = ["a".to_string()].into();
        let dist = community_topic_distribution(&p, &l, Some(&only_a), 2);
        assert_eq!(dist[&0], vec![1.0, 0.0]);
        assert_eq!(dist[&1], vec![0.0, 0.0]);
    }

    #[test]
    fn persuasiveness_examples() {
        let rows: Vec<&[f64]> = vec![&[1.0, 0.5, 0.0], &[0.0, 0.5, 1.0], &[0.0, 0.5, 1.0]];
        let s = persuasiveness(&rows, &[1, 0, 0], DEFAULT_SMOOTHING).unwrap();
        assert_eq!(s[0].topic, 0);
        assert!(s[0].score > 1e4);
        let mid = s.iter().find(|x| x.topic == 1).unwrap();
        // Rows are rescaled to sum 1, so topic 1 carries one third everywhere.
        assert!((mid.score - 1.0).abs() < 1e-9);
        let same: Vec<&[f64]> = vec![&[0.3, 0.7], &[0.3, 0.7]];
        let s = persuasiveness(&same, &[1, 0], DEFAULT_SMOOTHING).unwrap();
        assert!(s.iter().all(|x| (x.score - 1.0).abs() < 1e-12));
    }

    fn matching(pairs: &[(usize, usize)]) -> CommunityMatching {
        CommunityMatching {
            pairs: pairs
                .iter()
                .map(|&(c1, c2)| MatchedPair {
                    c1,
                    c2,
                    jaccard: 1.0,
                    size1: 0,
                    size2: 0,
                })
                .collect(),
            unmatched1: vec![],
            unmatched2: vec![],
            warnings: vec![],
        }
    }

    #[test]
    fn flow_counts_and_percentages() {
        let users: Vec<String> = (0..150).map(|i| format!("u{i:03}")).collect();
        let mut r1 = Vec::new();
        let mut r2 = Vec::new();
        let mut prof = Vec::new();
        for (i, u) in users.iter().enumerate() {
            let c1 = usize::from(i >= 100);
            let moved = i < 5;
            r1.push((u.as_str(), c1));
            r2.push((
                u.as_str(),
                if moved {
                    8
                } else if c1 == 0 {
                    7
                } else {
                    8
                },
            ));
            prof.push((
                u.as_str(),
                if moved {
                    &[0.0, 0.0, 1.0][..]
                } else {
                    &[0.6, 0.4, 0.0][..]
                },
            ));
        }
        let l1 = labeling(&r1);
        let l2 = labeling(&r2);
        let m = matching(&[(0, 7), (1, 8)]);
        let eligible: BTreeSet<String> = users.iter().cloned().collect();
        let rep = flow_report(
            &l1,
            &l2,
            &m,
            &profiles(&prof),
            &eligible,
            3,
            DEFAULT_FLOW_THRESHOLD,
        );
        let arrow = rep
            .arrows
            .iter()
            .find(|a| a.from == 0 && a.to == 8)
            .unwrap();
        assert_eq!(arrow.count, 5);
        assert!((arrow.percent - 5.0).abs() < 1e-12);
        assert!(arrow.drawn && !arrow.stay);
        assert_eq!(arrow.top_topics_by_share[0], 2);
        assert_eq!(arrow.top_topics_by_persuasiveness[0], 2);
        let back = rep
            .arrows
            .iter()
            .find(|a| a.from == 1 && a.to == 7)
            .unwrap();
        assert!(!back.drawn && back.count == 0);
        for c in [0, 1] {
            assert!((rep.outgoing_percent(c) - 100.0).abs() < 0.1);
        }
    }

    #[test]
    fn no_movers_only_self_loops() {
        let l1 = labeling(&[("a", 0), ("b", 1)]);
        let l2 = labeling(&[("a", 5), ("b", 6)]);
        let m = matching(&[(0, 5), (1, 6)]);
        let eligible: BTreeSet<String> = ["a".to_string(), "b".to_string()].into();
        let p = profiles(&[("a", &[1.0]), ("b", &[1.0])]);
        let rep = flow_report(&l1, &l2, &m, &p, &eligible, 1, DEFAULT_FLOW_THRESHOLD);
        let drawn: Vec<_> = rep.arrows.iter().filter(|a| a.drawn).collect();
        assert_eq!(drawn.len(), 2);
        assert!(drawn.iter().all(|a| a.stay && a.percent == 100.0));
    }
}
