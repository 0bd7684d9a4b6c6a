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

//! Multiplicative-update NMF on a sparse non-negative matrix, `M ≈ H·W`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matrix::{DenseMatrix, SparseMatrix};
use super::text::Vocabulary;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NmfParams {
    pub k: usize,
    pub seed: u64,
    /// Stop once the relative error improvement of an iteration drops below
    /// this; non-positive runs all `max_iter` iterations.
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Clone, Debug)]
pub struct TopicModel {
    /// Topics × terms.
    pub w: DenseMatrix,
    /// Documents × topics.
    pub h: DenseMatrix,
    pub k: usize,
    /// Frobenius error `‖M − HW‖`, starting with the initialization.
    pub errors: Vec<f64>,
    pub params: NmfParams,
}

impl TopicModel {
    pub fn final_error(&self) -> f64 {
        *self.errors.last().expect("error history starts at init")
    }
}

pub fn nmf(m: &SparseMatrix, params: NmfParams) -> Result<TopicModel> {
    let (n, terms) = (m.rows(), m.cols());
    let k = params.k;
    if k < 1 || k > n.min(terms) {
        return Err(Error::Config(format!(
            "k = {k} must lie in [1, {}] for a {n}×{terms} matrix",
            n.min(terms)
        )));
    }
    if m.values().iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::Contract(
            "NMF input must be finite and non-negative".into(),
        ));
    }
    let scale = (m.mean() / k as f64).sqrt();
    let mut rng = rng::rng_for(params.seed, &[0x4e4d46]);
    let mut init = |len: usize| -> Vec<f64> {
        (0..len)
            .map(|_| scale * (1.0 - rng.random::<f64>()))
            .collect()
    };
    let mut h = DenseMatrix::from_vec(n, k, init(n * k));
    // Stored transposed (terms × k) so both updates walk rows.
    let mut wt = DenseMatrix::from_vec(terms, k, init(terms * k));
    let mt = m.transpose();
    let norm_sq = m.sum_squares();

    let mut errors = vec![objective(m, &h, &wt, norm_sq)];
    for _ in 0..params.max_iter {
        // W ← W ∘ (HᵀM) / (HᵀH W)
        let hth = h.gram_cols();
        let num = sparse_times_dense(&mt, &h);
        update(&mut wt, &num, &hth);
        // H ← H ∘ (MWᵀ) / (H WWᵀ)
        let wwt = wt.gram_cols();
        let num = sparse_times_dense(m, &wt);
        update(&mut h, &num, &wwt);

        let err = objective(m, &h, &wt, norm_sq);
        let prev = *errors.last().unwrap();
        errors.push(err);
        if params.tol > 0.0 && (prev <= 0.0 || (prev - err) / prev < params.tol) {
            break;
        }
    }
    Ok(TopicModel {
        w: transpose(&wt),
        h,
        k,
        errors,
        params,
    })
}

/// `A · B` for sparse `A` (r × c) and dense `B` (c × k).
fn sparse_times_dense(a: &SparseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let k = b.cols();
    let mut out = DenseMatrix::zeros(a.rows(), k);
    out.data_mut()
        .par_chunks_mut(k.max(1))
        .enumerate()
        .for_each(|(r, dst)| {
            for (c, v) in a.row(r) {
                for (d, x) in dst.iter_mut().zip(b.row(c)) {
                    *d += v * x;
                }
            }
        });
    out
}

/// `X ← X ∘ num / (X · gram)` row by row.
fn update(x: &mut DenseMatrix, num: &DenseMatrix, gram: &DenseMatrix) {
    let k = x.cols();
    x.data_mut()
        .par_chunks_mut(k.max(1))
        .enumerate()
        .for_each(|(r, row)| {
            let old = row.to_vec();
            for a in 0..k {
                let den: f64 = (0..k).map(|b| old[b] * gram.get(b, a)).sum();
                let nu = num.get(r, a);
                row[a] = if den > 0.0 { old[a] * nu / den } else { 0.0 };
            }
        });
}

/// `‖M − H·W‖_F` without densifying: `‖M‖² − 2⟨M, HW⟩ + tr(HᵀH · WWᵀ)`.
fn objective(m: &SparseMatrix, h: &DenseMatrix, wt: &DenseMatrix, norm_sq: f64) -> f64 {
    let cross: f64 = (0..m.rows())
        .into_par_iter()
        .map(|r| {
            let hr = h.row(r);
            m.row(r)
                .map(|(c, v)| v * hr.iter().zip(wt.row(c)).map(|(a, b)| a * b).sum::<f64>())
                .sum::<f64>()
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    let hth = h.gram_cols();
    let wwt = wt.gram_cols();
    let quad: f64 = hth.data().iter().zip(wwt.data()).map(|(a, b)| a * b).sum();
    (norm_sq - 2.0 * cross + quad).max(0.0).sqrt()
}

fn transpose(x: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(x.cols(), x.rows());
    for r in 0..x.rows() {
        for c in 0..x.cols() {
            out.set(c, r, x.get(r, c));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub error: f64,
    pub relative_error: f64,
    pub top_terms: Vec<Vec<String>>,
}

/// Fit one model per `k` in `k_min..=k_max` for human topic-count selection.
pub fn sweep_k(
    m: &SparseMatrix,
    vocab: &Vocabulary,
    k_min: usize,
    k_max: usize,
    base: NmfParams,
    n_top: usize,
) -> Result<Vec<SweepRow>> {
    if k_min > k_max {
        return Err(Error::Config(format!(
            "sweep k_min {k_min} exceeds k_max {k_max}"
        )));
    }
    if k_max > m.rows().min(m.cols()) {
        return Err(Error::Config(format!(
            "sweep k_max {k_max} exceeds min(rows, cols) = {}",
            m.rows().min(m.cols())
        )));
    }
    let norm = m.sum_squares().sqrt();
    (k_min..=k_max)
        .into_par_iter()
        .map(|k| {
            let model = nmf(m, NmfParams { k, ..base })?;
            let top_terms = (0..k)
                .map(|t| {
                    super::top_terms(&model.w, vocab, t, n_top)
                        .into_iter()
                        .map(|(term, _)| term)
                        .collect()
                })
                .collect();
            let error = model.final_error();
            Ok(SweepRow {
                k,
                error,
                relative_error: if norm > 0.0 { error / norm } else { 0.0 },
                top_terms,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topics::argmax_topic;

    fn planted(
        n: usize,
        terms: usize,
        k: usize,
        seed: u64,
    ) -> (DenseMatrix, DenseMatrix, SparseMatrix) {
        let mut rng = rng::rng_for(seed, &[1]);
        let h0 = DenseMatrix::from_vec(n, k, (0..n * k).map(|_| rng.random::<f64>()).collect());
        let w0 = DenseMatrix::from_vec(
            k,
            terms,
            (0..k * terms).map(|_| rng.random::<f64>()).collect(),
        );
        let m = SparseMatrix::from_dense(&h0.matmul(&w0));
        (h0, w0, m)
    }

    fn dense_error(m: &SparseMatrix, model: &TopicModel) -> f64 {
        let recon = model.h.matmul(&model.w);
        let d = m.to_dense();
        d.data()
            .iter()
            .zip(recon.data())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn params(k: usize, max_iter: usize) -> NmfParams {
        NmfParams {
            k,
            seed: 3,
            tol: 0.0,
            max_iter,
        }
    }

    #[test]
    fn rank_one_is_recovered() {
        let (_, _, m) = planted(12, 9, 1, 5);
        let model = nmf(&m, params(1, 300)).unwrap();
        let rel = model.final_error() / m.sum_squares().sqrt();
        assert!(rel < 1e-3, "relative error {rel}");
        assert!((dense_error(&m, &model) - model.final_error()).abs() < 1e-6);
    }

    #[test]
    fn planted_rank_three() {
        let (_, _, m) = planted(20, 30, 3, 11);
        let model = nmf(&m, params(3, 2000)).unwrap();
        let rel = model.final_error() / m.sum_squares().sqrt();
        assert!(rel < 0.05, "relative error {rel}");
        assert!(model
            .w
            .data()
            .iter()
            .chain(model.h.data())
            .all(|&v| v >= 0.0));
    }

    #[test]
    fn objective_is_monotone() {
        let (_, _, m) = planted(25, 18, 4, 2);
        let model = nmf(&m, params(3, 200)).unwrap();
        assert_eq!(model.errors.len(), 201);
        for w in model.errors.windows(2) {
            assert!(w[1] <= w[0] + 1e-7, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn k_out_of_range() {
        let (_, _, m) = planted(5, 4, 2, 1);
        assert!(nmf(&m, params(0, 10)).is_err());
        assert!(nmf(&m, params(5, 10)).is_err());
    }

    #[test]
    fn tolerance_stops_early() {
        let (_, _, m) = planted(20, 20, 2, 4);
        let model = nmf(
            &m,
            NmfParams {
                tol: 1e-3,
                ..params(2, 5000)
            },
        )
        .unwrap();
        assert!(model.errors.len() < 5001);
    }

    #[test]
    fn scaling_keeps_assignments() {
        let (_, _, m) = planted(30, 20, 3, 8);
        let a = nmf(&m, params(3, 100)).unwrap();
        let b = nmf(&m.scaled(7.5), params(3, 100)).unwrap();
        for r in 0..m.rows() {
            assert_eq!(argmax_topic(a.h.row(r), 0.0), argmax_topic(b.h.row(r), 0.0));
        }
    }

    #[test]
    fn sweep_elbows_at_planted_rank() {
        let (_, _, m) = planted(40, 30, 3, 21);
        let vocab = Vocabulary::from_terms((0..30).map(|i| format!("t{i}")).collect());
        let rows = sweep_k(&m, &vocab, 1, 6, params(1, 1500), 3).unwrap();
        assert_eq!(rows.len(), 6);
        let e: Vec<f64> = rows.iter().map(|r| r.relative_error).collect();
        let drop_into = e[1] - e[2];
        let drop_after = e[2] - e[3];
        assert!(drop_into > 5.0 * drop_after.max(0.0), "errors {e:?}");
        assert!(e[2] < 0.05);
        assert!(sweep_k(&m, &vocab, 4, 3, params(1, 10), 3).is_err());
        assert!(sweep_k(&m, &vocab, 1, 31, params(1, 10), 3).is_err());
    }

    #[test]
    fn dominant_term_ranks_first() {
        // Each topic owns one heavy term.
        let mut w0 = DenseMatrix::zeros(3, 12);
        for t in 0..3 {
            for c in 0..12 {
                w0.set(
                    t,
                    c,
                    if c == t * 4 {
                        5.0
                    } else if c / 4 == t {
                        1.0
                    } else {
                        0.0
                    },
                );
            }
        }
        let mut rng = rng::rng_for(6, &[]);
        let h0 = DenseMatrix::from_vec(30, 3, (0..90).map(|_| rng.random::<f64>()).collect());
        let m = SparseMatrix::from_dense(&h0.matmul(&w0));
        let vocab = Vocabulary::from_terms((0..12).map(|i| format!("w{i}")).collect());
        let model = nmf(&m, params(3, 1000)).unwrap();
        let mut firsts: Vec<String> = (0..3)
            .map(|t| super::super::top_terms(&model.w, &vocab, t, 1)[0].0.clone())
            .collect();
        firsts.sort();
        assert_eq!(firsts, ["w0", "w4", "w8"]);
    }
}
