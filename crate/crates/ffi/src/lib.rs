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

//! C ABI over the shiftnet library.
//!
//! Every function returns an [`SnStatus`]; on failure a message is kept per
//! thread and can be read with [`sn_last_error`]. Graph handles are opaque
//! and must be released with [`sn_graph_free`]. Node labels are unsigned
//! integers; per-node outputs are written in ascending label order, which is
//! the order [`sn_graph_nodes`] reports.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use shiftnet::graph::{self, BetweennessMode, PageRankParams, RetweetGraph};
use shiftnet::pipeline::{self, PipelineConfig};
use shiftnet::{community, eval, Error};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Output buffer shorter than the node count.
    BufferTooSmall = 3,
    Config = 4,
    Data = 5,
    Io = 6,
    Internal = 7,
    Panic = 8,
}

/// Opaque graph handle.
pub struct SnGraph {
    inner: RetweetGraph,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> SnStatus {
    match e {
        Error::Config(_) | Error::MissingArtifact { .. } => SnStatus::Config,
        Error::Io { .. } => SnStatus::Io,
        Error::Format(_)
        | Error::Data(_)
        | Error::EmptyGraph
        | Error::EmptyDataset
        | Error::SingleClass
        | Error::UndefinedAuc => SnStatus::Data,
        Error::Contract(_) => SnStatus::InvalidArgument,
        Error::Internal(_) => SnStatus::Internal,
        Error::Stage { source, .. } => status_of(source),
    }
}

struct Fail(SnStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SnStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside shiftnet");
            SnStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(SnStatus::NullPointer, format!("{what} is null"))
}

unsafe fn graph_ref<'a>(g: *const SnGraph) -> Result<&'a RetweetGraph, Fail> {
    g.as_ref().map(|g| &g.inner).ok_or_else(|| null("graph"))
}

unsafe fn out_slice<'a, T>(ptr: *mut T, len: usize, need: usize) -> Result<&'a mut [T], Fail> {
    if ptr.is_null() {
        return Err(null("output buffer"));
    }
    if len < need {
        return Err(Fail(
            SnStatus::BufferTooSmall,
            format!("buffer holds {len} values, {need} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(ptr, need))
}

unsafe fn in_slice<'a, T>(ptr: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(SnStatus::InvalidArgument, format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

// Zero padding makes lexicographic id order match numeric order.
fn label(x: u64) -> String {
    format!("{x:020}")
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next shiftnet call on the same thread.
#[no_mangle]
pub extern "C" fn sn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sn_version() -> *const c_char {
    static V: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    V.as_ptr().cast()
}

/// Build an undirected graph from `n_edges` pairs `(src[i], dst[i])`.
/// Self-pairs are dropped and duplicates collapse; nodes without edges are
/// not represented.
///
/// # Safety
/// `src` and `dst` must point to `n_edges` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_graph_from_edges(
    src: *const u64,
    dst: *const u64,
    n_edges: usize,
    out: *mut *mut SnGraph,
) -> SnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let src = in_slice(src, n_edges, "src")?;
        let dst = in_slice(dst, n_edges, "dst")?;
        let names: Vec<(String, String)> = src
            .iter()
            .zip(dst)
            .map(|(&a, &b)| (label(a), label(b)))
            .collect();
        let g = RetweetGraph::from_edges(names.iter().map(|(a, b)| (a.as_str(), b.as_str())));
        if g.is_empty() {
            return Err(Fail(SnStatus::Data, "graph has no edges".into()));
        }
        *out = Box::into_raw(Box::new(SnGraph { inner: g }));
        Ok(())
    })
}

/// Release a handle from [`sn_graph_from_edges`]. Null is ignored.
///
/// # Safety
/// `g` must be null or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sn_graph_free(g: *mut SnGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// # Safety
/// `g` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sn_graph_node_count(g: *const SnGraph, out: *mut usize) -> SnStatus {
    guard(|| {
        let g = graph_ref(g)?;
        *out.as_mut().ok_or_else(|| null("out"))? = g.node_count();
        Ok(())
    })
}

/// # Safety
/// `g` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sn_graph_edge_count(g: *const SnGraph, out: *mut usize) -> SnStatus {
    guard(|| {
        let g = graph_ref(g)?;
        *out.as_mut().ok_or_else(|| null("out"))? = g.edge_count();
        Ok(())
    })
}

/// Node labels in output order.
///
/// # Safety
/// `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sn_graph_nodes(g: *const SnGraph, out: *mut u64, len: usize) -> SnStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let out = out_slice(out, len, g.node_count())?;
        for (o, id) in out.iter_mut().zip(g.ids()) {
            *o = id
                .parse()
                .map_err(|_| Fail(SnStatus::Internal, format!("bad node id {id}")))?;
        }
        Ok(())
    })
}

/// PageRank by power iteration. Pass `max_iter = 0` to use the defaults
/// (damping 0.85, tol 1e-8, 100 iterations).
///
/// # Safety
/// `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sn_pagerank(
    g: *const SnGraph,
    damping: f64,
    tol: f64,
    max_iter: usize,
    out: *mut f64,
    len: usize,
) -> SnStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let params = if max_iter == 0 {
            PageRankParams::default()
        } else {
            PageRankParams {
                damping,
                tol,
                max_iter,
            }
        };
        let pr = graph::pagerank(g, params)?;
        out_slice(out, len, g.node_count())?.copy_from_slice(&pr.scores);
        Ok(())
    })
}

/// Exact normalized betweenness.
///
/// # Safety
/// `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sn_betweenness(g: *const SnGraph, out: *mut f64, len: usize) -> SnStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let b = graph::betweenness(g, BetweennessMode::Exact, usize::MAX)?;
        out_slice(out, len, g.node_count())?.copy_from_slice(&b);
        Ok(())
    })
}

/// Local clustering coefficient.
///
/// # Safety
/// `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sn_clustering(g: *const SnGraph, out: *mut f64, len: usize) -> SnStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let c = graph::clustering_coefficient(g);
        out_slice(out, len, g.node_count())?.copy_from_slice(&c);
        Ok(())
    })
}

/// Seeded Louvain. Writes community ids (contiguous from 0) and, if
/// `modularity` is non-null, the partition's modularity.
///
/// # Safety
/// `out` must hold `len` values; `modularity` may be null.
#[no_mangle]
pub unsafe extern "C" fn sn_louvain(
    g: *const SnGraph,
    seed: u64,
    out: *mut u32,
    len: usize,
    modularity: *mut f64,
) -> SnStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let p = community::louvain(g, seed)?;
        let out = out_slice(out, len, g.node_count())?;
        for (o, &c) in out.iter_mut().zip(&p.assignment) {
            *o = c as u32;
        }
        if let Some(q) = modularity.as_mut() {
            *q = p.modularity;
        }
        Ok(())
    })
}

/// Modularity of an assignment given in output order.
///
/// # Safety
/// `assignment` must hold `len` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_modularity(
    g: *const SnGraph,
    assignment: *const u32,
    len: usize,
    out: *mut f64,
) -> SnStatus {
    guard(|| {
        let g = graph_ref(g)?;
        let a: Vec<usize> = in_slice(assignment, len, "assignment")?
            .iter()
            .map(|&c| c as usize)
            .collect();
        let q = community::modularity(g, &a)?;
        *out.as_mut().ok_or_else(|| null("out"))? = q;
        Ok(())
    })
}

/// Area under the ROC curve. Labels must be 0 or 1 and both classes present.
///
/// # Safety
/// `scores` and `labels` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sn_roc_auc(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    out: *mut f64,
) -> SnStatus {
    guard(|| {
        let s = in_slice(scores, n, "scores")?;
        let l = in_slice(labels, n, "labels")?;
        if l.iter().any(|&y| y > 1) {
            return Err(Fail(
                SnStatus::InvalidArgument,
                "labels must be 0 or 1".into(),
            ));
        }
        let roc = eval::roc_auc(s, l)?;
        *out.as_mut().ok_or_else(|| null("out"))? = roc.auc;
        Ok(())
    })
}

/// Run every pipeline stage. `config_path` may be null for the built-in
/// defaults; a non-null `out_dir` overrides the configured output directory.
///
/// # Safety
/// Non-null arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn sn_pipeline_run(
    config_path: *const c_char,
    out_dir: *const c_char,
) -> SnStatus {
    guard(|| {
        let mut cfg = if config_path.is_null() {
            PipelineConfig::default()
        } else {
            PipelineConfig::load(&path_arg(config_path, "config_path")?)?
        };
        if !out_dir.is_null() {
            cfg.out_dir = path_arg(out_dir, "out_dir")?;
        }
        pipeline::run_pipeline(&cfg)?;
        Ok(())
    })
}
