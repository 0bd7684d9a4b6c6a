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

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::SparseMatrix;
use crate::error::{Error, Result};

/// Lowercase, drop URLs, @mentions and the `rt` marker, keep hashtag bodies,
/// turn punctuation into whitespace, then drop stopwords.
pub fn tokenize(text: &str, stopwords: &HashSet<String>) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split_whitespace() {
        let lower = raw.to_lowercase();
        if lower.starts_with("http://")
            || lower.starts_with("https://")
            || lower.starts_with("www.")
        {
            continue;
        }
        if lower.starts_with('@') {
            continue;
        }
        let cleaned: String = lower
            .chars()
            .map(|c| if c.is_alphanumeric() { c } else { ' ' })
            .collect();
        for tok in cleaned.split_whitespace() {
            if tok == "rt" || stopwords.contains(tok) {
                continue;
            }
            out.push(tok.to_string());
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramRange {
    pub min: usize,
    pub max: usize,
}

impl NgramRange {
    pub fn new(min: usize, max: usize) -> Result<Self> {
        if min < 1 || max > 3 || min > max {
            return Err(Error::Config(format!(
                "n-gram range ({min},{max}) must lie within (1,1)..(1,3)"
            )));
        }
        Ok(NgramRange { min, max })
    }
}

impl Default for NgramRange {
    fn default() -> Self {
        NgramRange { min: 1, max: 3 }
    }
}

fn ngrams(tokens: &[String], range: NgramRange) -> impl Iterator<Item = String> + '_ {
    (range.min..=range.max)
        .flat_map(move |n| tokens.windows(n).map(|w| w.join(" ")).collect::<Vec<_>>())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    df: Vec<usize>,
    pub ngram_range: NgramRange,
    pub min_df: usize,
}

impl Vocabulary {
    pub fn from_terms(terms: Vec<String>) -> Self {
        let df = vec![0; terms.len()];
        Self::with_df(terms, df, NgramRange::default(), 1)
    }

    pub fn with_df(
        terms: Vec<String>,
        df: Vec<usize>,
        ngram_range: NgramRange,
        min_df: usize,
    ) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            terms,
            index,
            df,
            ngram_range,
            min_df,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term(&self, i: usize) -> &str {
        &self.terms[i]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn df(&self, i: usize) -> usize {
        self.df[i]
    }
}

/// Vocabulary over tokenized documents. Terms are sorted, so column
/// indices are independent of document order.
pub fn build_vocabulary(
    docs: &[Vec<String>],
    ngram_range: NgramRange,
    stopwords: &HashSet<String>,
    min_df: usize,
) -> Result<Vocabulary> {
    NgramRange::new(ngram_range.min, ngram_range.max)?;
    let per_doc: Vec<BTreeSet<String>> = docs
        .par_iter()
        .map(|d| {
            ngrams(d, ngram_range)
                .filter(|g| g.split(' ').all(|w| !stopwords.contains(w)))
                .collect()
        })
        .collect();
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    for set in per_doc {
        for t in set {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let (terms, counts): (Vec<String>, Vec<usize>) =
        df.into_iter().filter(|(_, c)| *c >= min_df.max(1)).unzip();
    if terms.is_empty() {
        return Err(Error::Config(format!(
            "vocabulary is empty after filtering (min_df {min_df})"
        )));
    }
    Ok(Vocabulary::with_df(terms, counts, ngram_range, min_df))
}

#[derive(Clone, Debug)]
pub struct TfIdfMatrix {
    /// Rows are documents, columns vocabulary terms, rows L2-normalized.
    pub matrix: SparseMatrix,
    /// Row norms before normalization.
    pub row_norms: Vec<f64>,
    pub idf: Vec<f64>,
}

/// `tf · (ln((1+N)/(1+df)) + 1)`, rows L2-normalized. `df` is measured on
/// `docs` itself.
pub fn tfidf(docs: &[Vec<String>], vocab: &Vocabulary) -> TfIdfMatrix {
    let n = docs.len() as f64;
    let counts: Vec<BTreeMap<usize, f64>> = docs
        .par_iter()
        .map(|d| {
            let mut tf = BTreeMap::new();
            for g in ngrams(d, vocab.ngram_range) {
                if let Some(i) = vocab.index_of(&g) {
                    *tf.entry(i).or_insert(0.0) += 1.0;
                }
            }
            tf
        })
        .collect();
    let mut df = vec![0usize; vocab.len()];
    for row in &counts {
        for &i in row.keys() {
            df[i] += 1;
        }
    }
    let idf: Vec<f64> = df
        .iter()
        .map(|&d| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
        .collect();
    let mut row_norms = Vec::with_capacity(counts.len());
    let rows: Vec<Vec<(usize, f64)>> = counts
        .into_iter()
        .map(|tf| {
            let mut row: Vec<(usize, f64)> = tf.into_iter().map(|(i, c)| (i, c * idf[i])).collect();
            let norm = row.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
            row_norms.push(norm);
            if norm > 0.0 {
                row.iter_mut().for_each(|(_, v)| *v /= norm);
            }
            row
        })
        .collect();
    TfIdfMatrix {
        matrix: SparseMatrix::from_rows(vocab.len(), rows),
        row_norms,
        idf,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn stop(words: &[&str]) -> HashSet<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize("RT @user El PUEBLO vota! http://t.co/x", &stop(&["el"])),
            ["pueblo", "vota"]
        );
        assert!(tokenize("", &stop(&[])).is_empty());
        assert_eq!(
            tokenize(
                "Santiago Maldonado aparición ya #JusticiaPorSantiago",
                &stop(&[])
            ),
            [
                "santiago",
                "maldonado",
                "aparición",
                "ya",
                "justiciaporsantiago"
            ]
        );
    }

    #[test]
    fn ngram_enumeration() {
        let v = build_vocabulary(
            &[toks("a b c")],
            NgramRange::new(1, 2).unwrap(),
            &stop(&[]),
            1,
        )
        .unwrap();
        assert_eq!(v.terms(), ["a", "a b", "b", "b c", "c"]);
    }

    #[test]
    fn min_df_filters() {
        let v = build_vocabulary(
            &[toks("a b"), toks("a")],
            NgramRange::new(1, 1).unwrap(),
            &stop(&[]),
            2,
        )
        .unwrap();
        assert_eq!(v.terms(), ["a"]);
        assert_eq!(v.df(0), 2);
        let err = build_vocabulary(&[toks("a")], NgramRange::new(1, 1).unwrap(), &stop(&[]), 2);
        assert!(matches!(err, Err(Error::Config(_))));
        assert!(NgramRange::new(1, 4).is_err());
        assert!(NgramRange::new(2, 1).is_err());
    }

    /// Hand enumeration: "a b c" gives a, b, c, "a b", "b c", "a b c";
    /// "c d e" adds d, e, "c d", "d e", "c d e"; "f" adds f.
    #[test]
    fn three_doc_trigram_vocabulary() {
        let docs = [toks("a b c"), toks("c d e"), toks("f")];
        let v = build_vocabulary(&docs, NgramRange::new(1, 3).unwrap(), &stop(&[]), 1).unwrap();
        assert_eq!(v.len(), 12);
        assert_eq!(v.df(v.index_of("c").unwrap()), 2);
        assert!(v.index_of("b c d").is_none());
    }

    #[test]
    fn stopword_ngrams_dropped() {
        let docs = [toks("a el b")];
        let v = build_vocabulary(&docs, NgramRange::new(1, 2).unwrap(), &stop(&["el"]), 1).unwrap();
        assert_eq!(v.terms(), ["a", "b"]);
    }

    #[test]
    fn tfidf_examples() {
        let docs = [toks("a a b")];
        let v = build_vocabulary(&docs, NgramRange::new(1, 1).unwrap(), &stop(&[]), 1).unwrap();
        let m = tfidf(&docs, &v);
        assert!(m.idf.iter().all(|&x| (x - 1.0).abs() < 1e-12));
        let row: Vec<f64> = m.matrix.row(0).map(|(_, v)| v).collect();
        let n = 5f64.sqrt();
        assert!((row[0] - 2.0 / n).abs() < 1e-12 && (row[1] - 1.0 / n).abs() < 1e-12);

        let docs = [toks("a b"), toks("a")];
        let v = build_vocabulary(&docs, NgramRange::new(1, 1).unwrap(), &stop(&[]), 1).unwrap();
        let m = tfidf(&docs, &v);
        assert!((m.idf[0] - 1.0).abs() < 1e-12);
        assert!((m.idf[1] - (1.5f64.ln() + 1.0)).abs() < 1e-12);
        let row: Vec<f64> = m.matrix.row(0).map(|(_, v)| v).collect();
        assert!((row[0] - 0.580).abs() < 1e-3 && (row[1] - 0.815).abs() < 1e-3);
    }

    #[test]
    fn idf_ratio_rare_vs_common() {
        let mut docs: Vec<Vec<String>> = (0..100).map(|_| toks("common")).collect();
        docs[0].push("rare".into());
        let v = build_vocabulary(&docs, NgramRange::new(1, 1).unwrap(), &stop(&[]), 1).unwrap();
        let m = tfidf(&docs, &v);
        let common = m.idf[v.index_of("common").unwrap()];
        let rare = m.idf[v.index_of("rare").unwrap()];
        assert!((rare / common - (101f64 / 2.0).ln() - 1.0).abs() < 1e-12);
        assert!((rare / common - 4.92).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn tokenize_is_idempotent(s in "\\PC{0,60}") {
            let sw = stop(&["el", "la"]);
            let once = tokenize(&s, &sw);
            let twice = tokenize(&once.join(" "), &sw);
            prop_assert_eq!(&once, &twice);
            prop_assert_eq!(once, tokenize(&s, &sw));
        }

        #[test]
        fn tfidf_rows_unit_norm(docs in proptest::collection::vec(proptest::collection::vec("[a-e]", 0..8), 1..12)) {
            let docs: Vec<Vec<String>> = docs;
            let Ok(v) = build_vocabulary(&docs, NgramRange::new(1, 2).unwrap(), &stop(&[]), 1) else { return Ok(()); };
            let m = tfidf(&docs, &v);
            for (r, doc) in docs.iter().enumerate() {
                let vals: Vec<(usize, f64)> = m.matrix.row(r).collect();
                if doc.is_empty() {
                    prop_assert!(vals.is_empty());
                } else {
                    let n: f64 = vals.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
                    prop_assert!((n - 1.0).abs() < 1e-9);
                }
                for (c, val) in vals {
                    prop_assert!(val > 0.0);
                    prop_assert!(doc.contains(&v.term(c).split(' ').next().unwrap().to_string()));
                }
            }
        }
    }
}
