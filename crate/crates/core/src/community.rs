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

//! Louvain modularity maximization, multi-run consensus, eligibility and
//! cross-period community matching.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::RetweetGraph;
use crate::rng;

const GAIN_EPS: f64 = 1e-12;
const MAX_PASSES: usize = 1_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    /// Node index → community id, ids contiguous from 0.
    pub assignment: Vec<usize>,
    pub modularity: f64,
}

impl Partition {
    pub fn n_communities(&self) -> usize {
        self.assignment.iter().max().map_or(0, |m| m + 1)
    }
}

/// `Q = Σ_c [ e_c/m − (d_c/2m)² ]` over an unweighted graph.
pub fn modularity(g: &RetweetGraph, assignment: &[usize]) -> Result<f64> {
    if assignment.len() != g.node_count() {
        return Err(Error::Contract(format!(
            "assignment covers {} of {} nodes",
            assignment.len(),
            g.node_count()
        )));
    }
    let m = g.edge_count() as f64;
    if m == 0.0 {
        return Ok(0.0);
    }
    let mut intra: HashMap<usize, f64> = HashMap::new();
    let mut deg: HashMap<usize, f64> = HashMap::new();
    for (i, j) in g.edges() {
        if assignment[i] == assignment[j] {
            *intra.entry(assignment[i]).or_default() += 1.0;
        }
    }
    for (i, &c) in assignment.iter().enumerate() {
        *deg.entry(c).or_default() += g.degree(i) as f64;
    }
    let mut comms: Vec<usize> = deg.keys().copied().collect();
    comms.sort_unstable();
    Ok(comms
        .iter()
        .map(|c| {
            let e = intra.get(c).copied().unwrap_or(0.0);
            let d = deg[c];
            e / m - (d / (2.0 * m)).powi(2)
        })
        .sum())
}

/// Weighted working graph for one Louvain level.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    self_loops: Vec<f64>,
    strength: Vec<f64>,
    total: f64,
}

impl Level {
    fn from_graph(g: &RetweetGraph) -> Self {
        let adj: Vec<Vec<(usize, f64)>> = (0..g.node_count())
            .map(|i| g.neighbors(i).iter().map(|&j| (j, 1.0)).collect())
            .collect();
        let strength: Vec<f64> = adj.iter().map(|ns| ns.len() as f64).collect();
        let total = strength.iter().sum();
        Level {
            self_loops: vec![0.0; adj.len()],
            adj,
            strength,
            total,
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    /// Greedy local moves until a full pass makes no move. Returns contiguous labels.
    fn local_moves(&self, rng: &mut impl rand::Rng) -> (Vec<usize>, bool) {
        let n = self.len();
        let mut comm: Vec<usize> = (0..n).collect();
        let mut tot = self.strength.clone();
        let mut weight_to = vec![0.0; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut order: Vec<usize> = (0..n).collect();
        let mut any_move = false;
        for _ in 0..MAX_PASSES {
            order.shuffle(rng);
            let mut moved = false;
            for &i in &order {
                let ci = comm[i];
                let ki = self.strength[i];
                for &(j, w) in &self.adj[i] {
                    let c = comm[j];
                    if weight_to[c] == 0.0 {
                        touched.push(c);
                    }
                    weight_to[c] += w;
                }
                tot[ci] -= ki;
                let gain = |c: usize, w: f64| w - tot[c] * ki / self.total;
                let mut best = ci;
                let mut best_gain = gain(ci, weight_to[ci]);
                touched.sort_unstable();
                for &c in &touched {
                    if c == ci {
                        continue;
                    }
                    let g = gain(c, weight_to[c]);
                    if g > best_gain + GAIN_EPS {
                        best = c;
                        best_gain = g;
                    }
                }
                tot[best] += ki;
                comm[i] = best;
                if best != ci {
                    moved = true;
                    any_move = true;
                }
                for &c in &touched {
                    weight_to[c] = 0.0;
                }
                touched.clear();
            }
            if !moved {
                break;
            }
        }
        (relabel(&comm), any_move)
    }

    fn aggregate(&self, comm: &[usize]) -> Level {
        let k = comm.iter().max().map_or(0, |m| m + 1);
        let mut self_loops = vec![0.0; k];
        let mut strength = vec![0.0; k];
        let mut links: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); k];
        for i in 0..self.len() {
            let ci = comm[i];
            self_loops[ci] += self.self_loops[i];
            strength[ci] += self.strength[i];
            for &(j, w) in &self.adj[i] {
                let cj = comm[j];
                if ci == cj {
                    // Each undirected edge is visited from both ends.
                    self_loops[ci] += w / 2.0;
                } else {
                    *links[ci].entry(cj).or_default() += w;
                }
            }
        }
        Level {
            adj: links.into_iter().map(|m| m.into_iter().collect()).collect(),
            self_loops,
            strength,
            total: self.total,
        }
    }
}

/// Renumber labels contiguously in order of first appearance.
fn relabel(labels: &[usize]) -> Vec<usize> {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect()
}

/// Two-phase Louvain. Node visit order is reshuffled every pass from `seed`.
/// Restarts per [`louvain`] call; the highest-modularity restart wins.
pub const LOUVAIN_RESTARTS: usize = 16;

/// Seeded Louvain keeping the best of [`LOUVAIN_RESTARTS`] visit orders.
pub fn louvain(g: &RetweetGraph, seed: u64) -> Result<Partition> {
    louvain_with_restarts(g, seed, LOUVAIN_RESTARTS)
}

pub fn louvain_with_restarts(g: &RetweetGraph, seed: u64, restarts: usize) -> Result<Partition> {
    if g.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut best: Option<Partition> = None;
    for r in 0..restarts.max(1) {
        let p = louvain_once(g, seed, r as u64)?;
        if best
            .as_ref()
            .is_none_or(|b| p.modularity > b.modularity + GAIN_EPS)
        {
            best = Some(p);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn louvain_once(g: &RetweetGraph, seed: u64, restart: u64) -> Result<Partition> {
    let mut rng = rng::rng_for(seed, &[0x10a1, restart]);
    let mut level = Level::from_graph(g);
    let mut assignment: Vec<usize> = (0..g.node_count()).collect();
    loop {
        let (comm, moved) = level.local_moves(&mut rng);
        if !moved {
            break;
        }
        for a in assignment.iter_mut() {
            *a = comm[*a];
        }
        let next = level.aggregate(&comm);
        if next.len() == level.len() {
            break;
        }
        level = next;
    }
    let assignment = relabel(&assignment);
    let q = modularity(g, &assignment)?;
    Ok(Partition {
        assignment,
        modularity: q,
    })
}

/// Nodes labelled identically (after alignment) across every Louvain run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConsensusLabeling {
    pub runs: usize,
    /// Community ids are those of the reference (first) run.
    pub stable: BTreeMap<String, usize>,
    pub unstable: BTreeSet<String>,
}

impl ConsensusLabeling {
    pub fn community_of(&self, user: &str) -> Option<usize> {
        self.stable.get(user).copied()
    }

    pub fn sizes(&self) -> BTreeMap<usize, usize> {
        let mut sizes = BTreeMap::new();
        for &c in self.stable.values() {
            *sizes.entry(c).or_insert(0) += 1;
        }
        sizes
    }

    /// The `k` largest stable communities, largest first (ties → lower id).
    pub fn top_communities(&self, k: usize) -> Result<Vec<usize>> {
        let mut by_size: Vec<(usize, usize)> = self.sizes().into_iter().collect();
        by_size.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        if by_size.len() < k {
            let listed: Vec<String> = by_size.iter().map(|(c, s)| format!("{c}:{s}")).collect();
            return Err(Error::Config(format!(
                "requested top {k} communities but only {} found (sizes {})",
                by_size.len(),
                listed.join(", ")
            )));
        }
        Ok(by_size.into_iter().take(k).map(|(c, _)| c).collect())
    }
}

pub fn consensus(g: &RetweetGraph, n_runs: usize, base_seed: u64) -> Result<ConsensusLabeling> {
    if n_runs < 2 {
        return Err(Error::Config(format!(
            "consensus needs at least 2 runs, got {n_runs}"
        )));
    }
    let seeds: Vec<u64> = (0..n_runs as u64)
        .map(|i| base_seed.wrapping_add(i))
        .collect();
    consensus_with_seeds(g, &seeds)
}

/// Consensus over explicit seeds; the first seed's run is the alignment reference.
pub fn consensus_with_seeds(g: &RetweetGraph, seeds: &[u64]) -> Result<ConsensusLabeling> {
    if seeds.is_empty() {
        return Err(Error::Config("consensus needs at least one seed".into()));
    }
    let runs: Vec<Partition> = seeds
        .par_iter()
        .map(|&s| louvain(g, s))
        .collect::<Result<_>>()?;
    let reference = &runs[0].assignment;
    let mut stable = vec![true; g.node_count()];
    for run in &runs[1..] {
        let aligned = align_to(reference, &run.assignment);
        for (i, s) in stable.iter_mut().enumerate() {
            if aligned[i] != Some(reference[i]) {
                *s = false;
            }
        }
    }
    let mut out = ConsensusLabeling {
        runs: seeds.len(),
        ..Default::default()
    };
    for (i, &ok) in stable.iter().enumerate() {
        let id = g.id(i).to_string();
        if ok {
            out.stable.insert(id, reference[i]);
        } else {
            out.unstable.insert(id);
        }
    }
    Ok(out)
}

/// Map each community of `run` to a reference community by greedy maximum
/// overlap, one-to-one. Unmatched communities map to `None`.
fn align_to(reference: &[usize], run: &[usize]) -> Vec<Option<usize>> {
    let mut overlap: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (&r, &c) in reference.iter().zip(run) {
        *overlap.entry((c, r)).or_default() += 1;
    }
    let mut cells: Vec<((usize, usize), usize)> = overlap.into_iter().collect();
    cells.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut map: HashMap<usize, usize> = HashMap::new();
    let mut used: BTreeSet<usize> = BTreeSet::new();
    for ((c, r), _) in cells {
        if map.contains_key(&c) || used.contains(&r) {
            continue;
        }
        map.insert(c, r);
        used.insert(r);
    }
    run.iter().map(|c| map.get(c).copied()).collect()
}

/// How `min_retweets` counts a user's period-1 retweet records.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetweetCountMode {
    #[default]
    Authored,
    Received,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EligibilityRules {
    pub min_retweets: u32,
    pub top_k: usize,
    #[serde(default)]
    pub count_mode: RetweetCountMode,
}

impl Default for EligibilityRules {
    fn default() -> Self {
        EligibilityRules {
            min_retweets: 5,
            top_k: 4,
            count_mode: RetweetCountMode::Authored,
        }
    }
}

/// Users stable in both periods, active enough in period 1, and inside the
/// `top_k` largest communities of each period.
pub fn eligible_users(
    labeling1: &ConsensusLabeling,
    labeling2: &ConsensusLabeling,
    g1: &RetweetGraph,
    rules: &EligibilityRules,
) -> Result<BTreeSet<String>> {
    if rules.top_k == 0 {
        return Err(Error::Config("top_k must be at least 1".into()));
    }
    let top1: BTreeSet<usize> = labeling1
        .top_communities(rules.top_k)?
        .into_iter()
        .collect();
    let top2: BTreeSet<usize> = labeling2
        .top_communities(rules.top_k)?
        .into_iter()
        .collect();
    let mut out = BTreeSet::new();
    for (user, &c1) in &labeling1.stable {
        let Some(c2) = labeling2.community_of(user) else {
            continue;
        };
        if !top1.contains(&c1) || !top2.contains(&c2) {
            continue;
        }
        let Some(i) = g1.index_of(user) else {
            continue;
        };
        let count = match rules.count_mode {
            RetweetCountMode::Authored => g1.retweet_count(i),
            RetweetCountMode::Received => g1.retweeted_count(i),
            RetweetCountMode::Both => g1.retweet_count(i) + g1.retweeted_count(i),
        };
        if count >= rules.min_retweets {
            out.insert(user.clone());
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub c1: usize,
    pub c2: usize,
    pub jaccard: f64,
    /// Members among users stable in both periods.
    pub size1: usize,
    pub size2: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CommunityMatching {
    pub pairs: Vec<MatchedPair>,
    pub unmatched1: Vec<usize>,
    pub unmatched2: Vec<usize>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl CommunityMatching {
    pub fn partner_of(&self, c1: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.c1 == c1).map(|p| p.c2)
    }

    pub fn origin_of(&self, c2: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.c2 == c2).map(|p| p.c1)
    }
}

const MAX_EXHAUSTIVE_K: usize = 8;
const WEAK_MATCH: f64 = 0.05;

/// One-to-one matching of the `top_k` communities of each period that
/// maximizes total Jaccard overlap of shared stable users.
pub fn match_communities(
    labeling1: &ConsensusLabeling,
    labeling2: &ConsensusLabeling,
    top_k: usize,
) -> Result<CommunityMatching> {
    if top_k == 0 || top_k > MAX_EXHAUSTIVE_K {
        return Err(Error::Config(format!(
            "top_k must be between 1 and {MAX_EXHAUSTIVE_K}, got {top_k}"
        )));
    }
    let top1 = labeling1.top_communities(top_k)?;
    let top2 = labeling2.top_communities(top_k)?;
    let mut size1 = vec![0usize; top_k];
    let mut size2 = vec![0usize; top_k];
    let mut inter = vec![vec![0usize; top_k]; top_k];
    for (user, c1) in &labeling1.stable {
        let Some(c2) = labeling2.community_of(user) else {
            continue;
        };
        let a = top1.iter().position(|c| c == c1);
        let b = top2.iter().position(|&c| c == c2);
        if let Some(a) = a {
            size1[a] += 1;
        }
        if let Some(b) = b {
            size2[b] += 1;
        }
        if let (Some(a), Some(b)) = (a, b) {
            inter[a][b] += 1;
        }
    }
    let jac = |a: usize, b: usize| {
        let union = size1[a] + size2[b] - inter[a][b];
        if union == 0 {
            0.0
        } else {
            inter[a][b] as f64 / union as f64
        }
    };
    let mut best: Option<(f64, Vec<usize>)> = None;
    for_each_permutation(top_k, &mut |perm| {
        let total: f64 = perm.iter().enumerate().map(|(a, &b)| jac(a, b)).sum();
        if best.as_ref().is_none_or(|(t, _)| total > t + 1e-12) {
            best = Some((total, perm.to_vec()));
        }
    });
    let (_, perm) = best.expect("at least one permutation");
    let mut out = CommunityMatching::default();
    for (a, &b) in perm.iter().enumerate() {
        let j = jac(a, b);
        if j < WEAK_MATCH {
            let msg = format!(
                "communities {} -> {} overlap only {j:.3}; matching may be meaningless",
                top1[a], top2[b]
            );
            log::warn!("{msg}");
            out.warnings.push(msg);
        }
        out.pairs.push(MatchedPair {
            c1: top1[a],
            c2: top2[b],
            jaccard: j,
            size1: size1[a],
            size2: size2[b],
        });
    }
    let set1: BTreeSet<usize> = top1.iter().copied().collect();
    let set2: BTreeSet<usize> = top2.iter().copied().collect();
    out.unmatched1 = labeling1
        .sizes()
        .into_keys()
        .filter(|c| !set1.contains(c))
        .collect();
    out.unmatched2 = labeling2
        .sizes()
        .into_keys()
        .filter(|c| !set2.contains(c))
        .collect();
    Ok(out)
}

/// Visit permutations of `0..k` in lexicographic order.
fn for_each_permutation(k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], f: &mut impl FnMut(&[usize])) {
        if prefix.len() == used.len() {
            f(prefix);
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, f);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    rec(&mut Vec::with_capacity(k), &mut vec![false; k], f);
}

#[cfg(test)]
pub(crate) mod oracle {
    use super::*;

    /// Every set partition of `0..n` as restricted-growth strings.
    pub fn all_partitions(n: usize) -> Vec<Vec<usize>> {
        fn rec(cur: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
            if cur.len() == n {
                out.push(cur.clone());
                return;
            }
            let next = cur.iter().max().map_or(0, |m| m + 1);
            for c in 0..=next {
                cur.push(c);
                rec(cur, n, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), n, &mut out);
        out
    }

    pub fn max_modularity(g: &RetweetGraph) -> f64 {
        all_partitions(g.node_count())
            .iter()
            .map(|p| modularity(g, p).unwrap())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}
