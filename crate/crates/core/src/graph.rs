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

//! Undirected, unweighted retweet graph and per-node centrality metrics.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Corpus;
use crate::rng;

/// Users are nodes; one edge per unordered pair with at least one retweet
/// between them. Node indices follow lexicographic order of user ids.
#[derive(Clone, Debug)]
pub struct RetweetGraph {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    adj: Vec<Vec<usize>>,
    /// Retweet records authored by the node.
    retweet_count: Vec<u32>,
    /// Retweet records whose original author is the node.
    retweeted_count: Vec<u32>,
    n_edges: usize,
}

impl RetweetGraph {
    /// Build from unordered pairs; self-pairs are ignored and duplicates collapse.
    pub fn from_edges<'a, I>(edges: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let pairs: BTreeSet<(String, String)> = edges
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| {
                if a < b {
                    (a.to_string(), b.to_string())
                } else {
                    (b.to_string(), a.to_string())
                }
            })
            .collect();
        let ids: BTreeSet<&String> = pairs.iter().flat_map(|(a, b)| [a, b]).collect();
        let ids: Vec<String> = ids.into_iter().cloned().collect();
        let index: HashMap<String, usize> = ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let mut adj = vec![Vec::new(); ids.len()];
        for (a, b) in &pairs {
            let (i, j) = (index[a], index[b]);
            adj[i].push(j);
            adj[j].push(i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        let n = ids.len();
        RetweetGraph {
            ids,
            index,
            adj,
            retweet_count: vec![0; n],
            retweeted_count: vec![0; n],
            n_edges: pairs.len(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.n_edges
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn retweet_count(&self, i: usize) -> u32 {
        self.retweet_count[i]
    }

    pub fn retweeted_count(&self, i: usize) -> u32 {
        self.retweeted_count[i]
    }

    pub fn set_retweet_counts(&mut self, i: usize, authored: u32, received: u32) {
        self.retweet_count[i] = authored;
        self.retweeted_count[i] = received;
    }

    /// Edges as `(i, j)` with `i < j`, in index order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// Same graph with node ids renamed through `f`. Used for equivariance checks.
    pub fn relabeled(&self, f: impl Fn(&str) -> String) -> Self {
        let names: Vec<String> = self.ids.iter().map(|s| f(s)).collect();
        let mut g = RetweetGraph::from_edges(
            self.edges()
                .map(|(i, j)| (names[i].as_str(), names[j].as_str()))
                .collect::<Vec<_>>(),
        );
        for (i, name) in names.iter().enumerate() {
            if let Some(k) = g.index_of(name) {
                g.set_retweet_counts(k, self.retweet_count[i], self.retweeted_count[i]);
            }
        }
        g
    }
}

pub fn build_graph(c: &Corpus) -> Result<RetweetGraph> {
    let retweets: Vec<(&str, &str)> = c
        .records()
        .iter()
        .filter_map(|r| {
            r.retweet_of_author_id
                .as_deref()
                .map(|orig| (r.author_id.as_str(), orig))
        })
        .collect();
    if retweets.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut g = RetweetGraph::from_edges(retweets.iter().copied());
    if g.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut authored: BTreeMap<&str, u32> = BTreeMap::new();
    let mut received: BTreeMap<&str, u32> = BTreeMap::new();
    for &(a, o) in &retweets {
        *authored.entry(a).or_default() += 1;
        *received.entry(o).or_default() += 1;
    }
    for i in 0..g.node_count() {
        let id = g.ids[i].clone();
        let a = authored.get(id.as_str()).copied().unwrap_or(0);
        let r = received.get(id.as_str()).copied().unwrap_or(0);
        g.set_retweet_counts(i, a, r);
    }
    Ok(g)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PageRankParams {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PageRankParams {
    fn default() -> Self {
        PageRankParams {
            damping: 0.85,
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PageRank {
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration treating each undirected edge as two arcs. There are no
/// dangling nodes, so mass is conserved without redistribution.
pub fn pagerank(g: &RetweetGraph, params: PageRankParams) -> Result<PageRank> {
    let PageRankParams {
        damping,
        tol,
        max_iter,
    } = params;
    if !(damping > 0.0 && damping < 1.0) {
        return Err(Error::Config(format!(
            "damping {damping} must lie in (0, 1)"
        )));
    }
    let n = g.node_count();
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    let teleport = (1.0 - damping) / n as f64;
    let mut x = vec![1.0 / n as f64; n];
    let mut share = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        for (i, s) in share.iter_mut().enumerate() {
            *s = x[i] / g.degree(i) as f64;
        }
        let next: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|v| teleport + damping * g.adj[v].iter().map(|&u| share[u]).sum::<f64>())
            .collect();
        let delta: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if delta < tol {
            converged = true;
            break;
        }
    }
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= total);
    if !converged {
        log::warn!("pagerank did not reach tol {tol} within {max_iter} iterations");
    }
    Ok(PageRank {
        scores: x,
        iterations,
        converged,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BetweennessMode {
    Exact,
    Sampled { n_pivots: usize, seed: u64 },
}

pub const DEFAULT_EXACT_CAP: usize = 20_000;

const BRANDES_CHUNK: usize = 64;

/// Brandes betweenness, normalized by `2 / ((n-1)(n-2))` for undirected graphs.
pub fn betweenness(g: &RetweetGraph, mode: BetweennessMode, exact_cap: usize) -> Result<Vec<f64>> {
    let n = g.node_count();
    if n < 3 {
        return Ok(vec![0.0; n]);
    }
    let (sources, scale): (Vec<usize>, f64) = match mode {
        BetweennessMode::Exact => {
            if n > exact_cap {
                return Err(Error::Config(format!(
                    "exact betweenness on {n} nodes exceeds cap {exact_cap}; use sampled mode"
                )));
            }
            ((0..n).collect(), 1.0)
        }
        BetweennessMode::Sampled { n_pivots, seed } => {
            if n_pivots == 0 {
                return Err(Error::Config(
                    "sampled betweenness needs n_pivots >= 1".into(),
                ));
            }
            if n_pivots >= n {
                ((0..n).collect(), 1.0)
            } else {
                let mut all: Vec<usize> = (0..n).collect();
                all.shuffle(&mut rng::rng_for(seed, &[0xb7]));
                let mut picked = all[..n_pivots].to_vec();
                picked.sort_unstable();
                (picked, n as f64 / n_pivots as f64)
            }
        }
    };

    let mut total = vec![0.0; n];
    for chunk in sources.chunks(BRANDES_CHUNK) {
        let partials: Vec<Vec<f64>> = chunk.par_iter().map(|&s| brandes_source(g, s)).collect();
        for p in &partials {
            for (t, v) in total.iter_mut().zip(p) {
                *t += v;
            }
        }
    }
    // Each unordered pair is counted from both endpoints.
    let norm = scale / ((n - 1) as f64 * (n - 2) as f64);
    Ok(total.into_iter().map(|v| v * norm).collect())
}

fn brandes_source(g: &RetweetGraph, s: usize) -> Vec<f64> {
    let n = g.node_count();
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    sigma[s] = 1.0;
    dist[s] = 0;
    queue.push_back(s);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &w in &g.adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
            if dist[w] == dist[v] + 1 {
                sigma[w] += sigma[v];
            }
        }
    }
    let mut delta = vec![0.0f64; n];
    for &w in order.iter().rev() {
        for &v in &g.adj[w] {
            if dist[v] != usize::MAX && dist[v] + 1 == dist[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
        }
    }
    delta[s] = 0.0;
    delta
}

/// Local clustering coefficient; nodes with degree below 2 get 0.
pub fn clustering_coefficient(g: &RetweetGraph) -> Vec<f64> {
    (0..g.node_count())
        .into_par_iter()
        .map(|v| {
            let ns = &g.adj[v];
            let d = ns.len();
            if d < 2 {
                return 0.0;
            }
            let links: usize = ns.iter().map(|&u| sorted_intersection(ns, &g.adj[u])).sum();
            // Each neighbor link is seen from both ends: links = 2 * triangles.
            links as f64 / (d * (d - 1)) as f64
        })
        .collect()
}

fn sorted_intersection(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub node: String,
    pub degree: usize,
    pub pagerank: f64,
    pub betweenness: f64,
    pub clustering: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub pagerank: PageRankParams,
    pub betweenness: BetweennessMode,
    pub exact_cap: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            pagerank: PageRankParams::default(),
            betweenness: BetweennessMode::Exact,
            exact_cap: DEFAULT_EXACT_CAP,
        }
    }
}

/// Metrics for every node, in node-index order.
#[derive(Clone, Debug, Default)]
pub struct MetricsTable {
    pub rows: Vec<NodeMetrics>,
    index: HashMap<String, usize>,
}

impl MetricsTable {
    pub fn from_rows(rows: Vec<NodeMetrics>) -> Self {
        let index = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.node.clone(), i))
            .collect();
        MetricsTable { rows, index }
    }

    pub fn get(&self, node: &str) -> Option<&NodeMetrics> {
        self.index.get(node).map(|&i| &self.rows[i])
    }
}

pub fn node_metrics(g: &RetweetGraph, config: &MetricsConfig) -> Result<MetricsTable> {
    if g.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let pr = pagerank(g, config.pagerank)?;
    let btw = betweenness(g, config.betweenness, config.exact_cap)?;
    let cc = clustering_coefficient(g);
    let rows = (0..g.node_count())
        .map(|i| NodeMetrics {
            node: g.ids[i].clone(),
            degree: g.degree(i),
            pagerank: pr.scores[i],
            betweenness: btw[i],
            clustering: cc[i],
        })
        .collect();
    Ok(MetricsTable::from_rows(rows))
}

/// `u v` per line, `u < v`, lexicographic order.
pub fn write_edge_list<W: Write>(g: &RetweetGraph, mut w: W) -> std::io::Result<()> {
    // Node indices already follow lexicographic id order.
    for (i, j) in g.edges() {
        writeln!(w, "{} {}", g.ids[i], g.ids[j])?;
    }
    Ok(())
}

/// Parse an edge list written by [`write_edge_list`]; `#` lines are comments.
pub fn read_edge_list<R: BufRead>(r: R) -> Result<RetweetGraph> {
    let mut pairs = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<edge list>", e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), None) => pairs.push((a.to_string(), b.to_string())),
            _ => return Err(Error::Format(format!("edge list line {}: {line:?}", n + 1))),
        }
    }
    let g = RetweetGraph::from_edges(pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())));
    if g.is_empty() {
        return Err(Error::EmptyGraph);
    }
    Ok(g)
}
