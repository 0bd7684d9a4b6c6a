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

use std::ffi::{CStr, CString};
use std::ptr;

use shiftnet_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(sn_last_error()) }
        .to_string_lossy()
        .into_owned()
}

/// Two triangles {1,2,3} and {7,8,9} joined by 3-7.
fn bridged() -> *mut SnGraph {
    let src = [1u64, 2, 1, 7, 8, 7, 3];
    let dst = [2u64, 3, 3, 8, 9, 9, 7];
    let mut g = ptr::null_mut();
    let s = unsafe { sn_graph_from_edges(src.as_ptr(), dst.as_ptr(), src.len(), &mut g) };
    assert_eq!(s, SnStatus::Ok);
    g
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(sn_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn graph_metrics_roundtrip() {
    let g = bridged();
    let (mut n, mut m) = (0usize, 0usize);
    unsafe {
        assert_eq!(sn_graph_node_count(g, &mut n), SnStatus::Ok);
        assert_eq!(sn_graph_edge_count(g, &mut m), SnStatus::Ok);
    }
    assert_eq!((n, m), (6, 7));

    let mut nodes = vec![0u64; n];
    let mut pr = vec![0.0; n];
    let mut bc = vec![0.0; n];
    let mut cc = vec![0.0; n];
    unsafe {
        assert_eq!(sn_graph_nodes(g, nodes.as_mut_ptr(), n), SnStatus::Ok);
        assert_eq!(
            sn_pagerank(g, 0.0, 0.0, 0, pr.as_mut_ptr(), n),
            SnStatus::Ok
        );
        assert_eq!(sn_betweenness(g, bc.as_mut_ptr(), n), SnStatus::Ok);
        assert_eq!(sn_clustering(g, cc.as_mut_ptr(), n), SnStatus::Ok);
    }
    assert_eq!(nodes, [1, 2, 3, 7, 8, 9]);
    assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    // Node 3 is interior to the 6 paths from {1,2} to {7,8,9}, out of 10 pairs.
    assert!((bc[2] - 0.6).abs() < 1e-12, "{bc:?}");
    assert_eq!(bc[0], 0.0);
    assert_eq!(cc[0], 1.0);
    assert!((cc[2] - 1.0 / 3.0).abs() < 1e-12);
    unsafe { sn_graph_free(g) };
}

#[test]
fn louvain_and_modularity_agree() {
    let g = bridged();
    let mut labels = [0u32; 6];
    let mut q = 0.0;
    let mut q2 = 0.0;
    unsafe {
        assert_eq!(
            sn_louvain(g, 7, labels.as_mut_ptr(), 6, &mut q),
            SnStatus::Ok
        );
        assert_eq!(sn_modularity(g, labels.as_ptr(), 6, &mut q2), SnStatus::Ok);
    }
    assert_eq!(labels[0], labels[1]);
    assert_eq!(labels[0], labels[2]);
    assert_ne!(labels[0], labels[3]);
    assert!((q - 5.0 / 14.0).abs() < 1e-12);
    assert_eq!(q, q2);
    unsafe { sn_graph_free(g) };
}

#[test]
fn error_codes_and_messages() {
    let g = bridged();
    let mut small = [0.0; 2];
    unsafe {
        assert_eq!(
            sn_pagerank(g, 0.85, 1e-8, 10, small.as_mut_ptr(), 2),
            SnStatus::BufferTooSmall
        );
        assert!(last_error().contains("6 needed"), "{}", last_error());
        assert_eq!(
            sn_pagerank(ptr::null(), 0.85, 1e-8, 10, small.as_mut_ptr(), 2),
            SnStatus::NullPointer
        );
        assert_eq!(sn_betweenness(g, ptr::null_mut(), 6), SnStatus::NullPointer);
        let short = [0u32; 3];
        let mut q = 0.0;
        assert_eq!(
            sn_modularity(g, short.as_ptr(), 3, &mut q),
            SnStatus::InvalidArgument
        );
        let mut out = ptr::null_mut();
        assert_eq!(
            sn_graph_from_edges(ptr::null(), ptr::null(), 0, &mut out),
            SnStatus::Data
        );
        assert!(out.is_null());
        let mut n = 0;
        assert_eq!(sn_graph_node_count(g, &mut n), SnStatus::Ok);
        assert_eq!(last_error(), "");
        sn_graph_free(g);
        sn_graph_free(ptr::null_mut());
    }
}

#[test]
fn auc_codes() {
    let scores = [0.1, 0.4, 0.35, 0.8];
    let mut auc = 0.0;
    unsafe {
        assert_eq!(
            sn_roc_auc(scores.as_ptr(), [0u8, 0, 1, 1].as_ptr(), 4, &mut auc),
            SnStatus::Ok
        );
        assert_eq!(auc, 0.75);
        assert_eq!(
            sn_roc_auc(scores.as_ptr(), [1u8; 4].as_ptr(), 4, &mut auc),
            SnStatus::Data
        );
        assert_eq!(
            sn_roc_auc(scores.as_ptr(), [0u8, 2, 1, 1].as_ptr(), 4, &mut auc),
            SnStatus::InvalidArgument
        );
    }
}

#[test]
fn pipeline_reports_missing_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CString::new(dir.path().join("absent.toml").to_str().unwrap()).unwrap();
    let out = CString::new(dir.path().join("out").to_str().unwrap()).unwrap();
    let s = unsafe { sn_pipeline_run(cfg.as_ptr(), out.as_ptr()) };
    assert_eq!(s, SnStatus::Io);
    assert!(last_error().contains("absent.toml"));
}

#[test]
fn pipeline_runs_from_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = shiftnet::pipeline::PipelineConfig::default();
    let synth = cfg.input.synth.as_mut().unwrap();
    synth.community_sizes = vec![150, 150];
    synth.p_in = 0.06;
    synth.p_out = 0.002;
    synth.n_topics = 3;
    synth.persuasive_topics = vec![2];
    synth.shift.community_offsets.clear();
    cfg.communities.top_k = 2;
    cfg.topics.n_topics = 3;
    cfg.model.n_iter = 3;
    cfg.eval.n_repeats = 2;
    let path = dir.path().join("c.toml");
    std::fs::write(&path, cfg.to_toml().unwrap()).unwrap();
    let c = CString::new(path.to_str().unwrap()).unwrap();
    let out = CString::new(dir.path().join("out").to_str().unwrap()).unwrap();
    let s = unsafe { sn_pipeline_run(c.as_ptr(), out.as_ptr()) };
    assert_eq!(s, SnStatus::Ok, "{}", last_error());
    assert!(dir.path().join("out/report/summary.json").is_file());
}
