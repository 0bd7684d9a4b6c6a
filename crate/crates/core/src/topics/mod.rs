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

//! Tweet text → tf-idf → NMF topics → per-user topic fractions.

mod matrix;
mod nmf;
mod text;

pub use matrix::{DenseMatrix, SparseMatrix};
pub use nmf::{nmf, sweep_k, NmfParams, SweepRow, TopicModel};
pub use text::{build_vocabulary, tfidf, tokenize, NgramRange, TfIdfMatrix, Vocabulary};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserTopicProfile {
    pub fractions: Vec<f64>,
    pub tweets_counted: usize,
}

/// Assign each tweet to the argmax topic of its `H` row (ties → lowest id)
/// and report per-author fractions. Rows whose maximum does not exceed
/// `min_membership` are skipped.
pub fn user_topic_profiles(
    authors: &[&str],
    h: &DenseMatrix,
    min_membership: f64,
) -> BTreeMap<String, UserTopicProfile> {
    assert_eq!(authors.len(), h.rows(), "H rows must align with tweets");
    let k = h.cols();
    let mut counts: BTreeMap<String, (Vec<usize>, usize)> = BTreeMap::new();
    for (row, author) in authors.iter().enumerate() {
        let entry = counts
            .entry(author.to_string())
            .or_insert_with(|| (vec![0; k], 0));
        if let Some(t) = argmax_topic(h.row(row), min_membership) {
            entry.0[t] += 1;
            entry.1 += 1;
        }
    }
    counts
        .into_iter()
        .map(|(user, (c, n))| {
            let fractions = if n == 0 {
                vec![0.0; k]
            } else {
                c.iter().map(|&x| x as f64 / n as f64).collect()
            };
            (
                user,
                UserTopicProfile {
                    fractions,
                    tweets_counted: n,
                },
            )
        })
        .collect()
}

pub fn argmax_topic(row: &[f64], min_membership: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (t, &v) in row.iter().enumerate() {
        if v > min_membership && best.is_none_or(|(_, b)| v > b) {
            best = Some((t, v));
        }
    }
    best.map(|(t, _)| t)
}

/// The `n` highest-weight terms of a topic row of `W`, descending.
pub fn top_terms(
    w: &DenseMatrix,
    vocab: &Vocabulary,
    topic: usize,
    n: usize,
) -> Vec<(String, f64)> {
    let row = w.row(topic);
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    idx.into_iter()
        .take(n)
        .map(|i| (vocab.term(i).to_string(), row[i]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counting_profiles() {
        let h = DenseMatrix::from_rows(&[
            vec![0.9, 0.1, 0.0],
            vec![0.5, 0.2, 0.1],
            vec![0.1, 0.7, 0.0],
            vec![0.0, 0.1, 0.3],
            vec![0.0, 0.0, 0.0],
            vec![0.2, 0.2, 0.1],
        ]);
        let authors = ["a", "a", "a", "a", "b", "c"];
        let p = user_topic_profiles(&authors, &h, 0.0);
        assert_eq!(p["a"].fractions, vec![0.5, 0.25, 0.25]);
        assert_eq!(p["a"].tweets_counted, 4);
        assert_eq!(p["b"].fractions, vec![0.0; 3]);
        assert_eq!(p["b"].tweets_counted, 0);
        // Tie between topics 0 and 1 goes to 0.
        assert_eq!(p["c"].fractions, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn two_user_fixture() {
        let h = DenseMatrix::from_rows(&[
            vec![0.3, 0.0],
            vec![0.0, 0.4],
            vec![0.2, 0.1],
            vec![0.0, 0.9],
            vec![0.05, 0.06],
        ]);
        let p = user_topic_profiles(&["x", "y", "x", "y", "y"], &h, 0.0);
        assert_eq!(p["x"].fractions, vec![1.0, 0.0]);
        assert_eq!(p["y"].fractions, vec![0.0, 1.0]);
        assert_eq!(p["y"].tweets_counted, 3);
    }

    #[test]
    fn top_terms_ordering() {
        let vocab = Vocabulary::from_terms(vec!["a".into(), "b".into(), "c".into()]);
        let w = DenseMatrix::from_rows(&[vec![0.1, 0.9, 0.5], vec![0.0, 0.0, 1.0]]);
        let t = top_terms(&w, &vocab, 0, 2);
        assert_eq!(t, vec![("b".to_string(), 0.9), ("c".to_string(), 0.5)]);
        assert_eq!(top_terms(&w, &vocab, 1, 10).len(), 3);
    }
}
