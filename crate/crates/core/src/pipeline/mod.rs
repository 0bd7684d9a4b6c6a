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

//! Stage orchestration. Each stage reads its inputs from the output
//! directory and writes its artifacts under `<out>/<stage>/`.

mod artifacts;
mod config;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use artifacts::{read_json, ProvenanceHeader, Table, Workspace, TOOL, VERSION};
pub use config::{
    CommunityConfig, EvalConfig, InputConfig, ModelConfig, PipelineConfig, TopicConfig,
};

use crate::community::{
    consensus, eligible_users, match_communities, CommunityMatching, ConsensusLabeling,
    EligibilityRules,
};
use crate::dataset::{
    self, AssembleInputs, FeatureSet, LabeledDataset, Provenance, Split, SplitSpec,
};
use crate::error::{Error, Result};
use crate::eval::{self, ImportanceReport, PageRankGap, RocCurve, TopicFlowReport};
use crate::graph::{
    build_graph, node_metrics, read_edge_list, write_edge_list, MetricsTable, NodeMetrics,
    RetweetGraph,
};
use crate::ingest::{
    corpus_summary, filter_lang, parse_file, split_periods, write_records, Corpus, PeriodWindow,
};
use crate::model::{
    self, baseline_polar, baseline_random, predict_proba, randomized_search, GBDTModel,
};
use crate::rng;
use crate::synth;
use crate::topics::{
    self, build_vocabulary, nmf, sweep_k, tfidf, tokenize, NmfParams, UserTopicProfile,
};
use artifacts::{parse_num, strings};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Synth,
    Ingest,
    Graph,
    Communities,
    Topics,
    Features,
    Train,
    Evaluate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Synth,
        Stage::Ingest,
        Stage::Graph,
        Stage::Communities,
        Stage::Topics,
        Stage::Features,
        Stage::Train,
        Stage::Evaluate,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => SYNTH,
            Stage::Ingest => INGEST,
            Stage::Graph => GRAPH,
            Stage::Communities => COMMUNITIES,
            Stage::Topics => TOPICS,
            Stage::Features => FEATURES,
            Stage::Train => TRAIN,
            Stage::Evaluate => EVALUATE,
            Stage::Report => REPORT,
        }
    }
}

const SYNTH: &str = "synth";
const INGEST: &str = "ingest";
const GRAPH: &str = "graph";
const COMMUNITIES: &str = "communities";
const TOPICS: &str = "topics";
const FEATURES: &str = "features";
const TRAIN: &str = "train";
const EVALUATE: &str = "evaluate";
const REPORT: &str = "report";

/// Run one stage, tagging any error with the stage name.
pub fn run_stage(stage: Stage, cfg: &PipelineConfig) -> Result<()> {
    let ws = Workspace::new(cfg);
    log::info!("stage {}", stage.name());
    let result = cfg.validate().and_then(|_| match stage {
        Stage::Synth => run_synth(cfg, &ws),
        Stage::Ingest => run_ingest(cfg, &ws),
        Stage::Graph => run_graph(cfg, &ws),
        Stage::Communities => run_communities(cfg, &ws),
        Stage::Topics => run_topics(cfg, &ws),
        Stage::Features => run_features(cfg, &ws),
        Stage::Train => run_train(cfg, &ws),
        Stage::Evaluate => run_evaluate(cfg, &ws),
        Stage::Report => run_report(cfg, &ws),
    });
    result.map_err(|e| match e {
        e @ Error::Stage { .. } => e,
        e => Error::Stage {
            stage: stage.name(),
            source: Box::new(e),
        },
    })
}

/// Every stage in order; `synth` only for synthetic inputs.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<()> {
    for stage in Stage::ALL {
        if stage == Stage::Synth && cfg.input.synth.is_none() {
            continue;
        }
        run_stage(stage, cfg)?;
    }
    Ok(())
}

fn f(v: f64) -> String {
    v.to_string()
}

// ---- synth ----

fn run_synth(cfg: &PipelineConfig, ws: &Workspace) -> Result<()> {
    let s = cfg
        .input
        .synth
        .as_ref()
        .ok_or_else(|| Error::Config("the synth stage needs input.synth".into()))?;
    let out = synth::generate(s)?;
    ws.write_with(SYNTH, "period1.jsonl", |w| write_records(&out.period1, w))?;
    ws.write_with(SYNTH, "period2.jsonl", |w| write_records(&out.period2, w))?;
    let mut truth = Vec::new();
    writeln!(truth, "{}", ws.header_line()).map_err(|e| Error::io("<truth>", e))?;
    out.truth.write_csv(&mut truth)?;
    ws.write_with(SYNTH, "truth.csv", |w| w.write_all(&truth))?;
    let mut stop = s.filler_terms.clone();
    stop.sort();
    stop.dedup();
    ws.write_text(
        SYNTH,
        "stopwords.txt",
        &format!("{}\n{}\n", ws.header_line(), stop.join("\n")),
    )?;
    ws.write_provenance(
        SYNTH,
        &[
            "period1.jsonl",
            "period2.jsonl",
            "truth.csv",
            "stopwords.txt",
        ],
    )?;
    log::info!(
        "synth: {} + {} records, {:.1}% shifters",
        out.period1.len(),
        out.period2.len(),
        100.0 * out.truth.shift_fraction()
    );
    Ok(())
}

// ---- ingest ----

#[derive(Serialize, Deserialize)]
struct IngestSummary {
    lines: usize,
    malformed: usize,
    duplicates_across_files: usize,
    filtered_lang: usize,
    outside_windows: usize,
}

fn run_ingest(cfg: &PipelineConfig, ws: &Workspace) -> Result<()> {
    let (w1, w2) = cfg.windows()?;
    let sources = if cfg.input.synth.is_some() {
        vec![
            ws.input(SYNTH, "period1.jsonl")?,
            ws.input(SYNTH, "period2.jsonl")?,
        ]
    } else {
        cfg.input.records.clone()
    };
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    let mut summary = IngestSummary {
        lines: 0,
        malformed: 0,
        duplicates_across_files: 0,
        filtered_lang: 0,
        outside_windows: 0,
    };
    for p in &sources {
        let o = parse_file(p)?;
        summary.lines += o.lines;
        summary.malformed += o.malformed;
        for r in o.records {
            if seen.insert(r.tweet_id.clone()) {
                records.push(r);
            } else {
                summary.duplicates_across_files += 1;
            }
        }
    }
    if let Some(code) = &cfg.input.lang {
        let before = records.len();
        records = filter_lang(records, code);
        summary.filtered_lang = before - records.len();
    }
    let split = split_periods(records, w1, w2)?;
    summary.outside_windows = split.dropped;
    ws.write_with(INGEST, "period1.jsonl", |w| {
        write_records(split.period1.records(), w)
    })?;
    ws.write_with(INGEST, "period2.jsonl", |w| {
        write_records(split.period2.records(), w)
    })?;
    let rows = [&split.period1, &split.period2].map(|c| {
        let s = corpus_summary(c);
        vec![
            s.period.as_str().to_string(),
            s.start.to_string(),
            s.end.to_string(),
            s.n_tweets.to_string(),
            s.n_users.to_string(),
            s.n_retweets.to_string(),
        ]
    });
    ws.write_csv(
        INGEST,
        "summary.csv",
        &strings([
            "period",
            "start",
            "end",
            "n_tweets",
            "n_users",
            "n_retweets",
        ]),
        rows,
    )?;
    ws.write_json(INGEST, "counts.json", &summary)?;
    ws.write_provenance(INGEST, &["period1.jsonl", "period2.jsonl"])?;
    Ok(())
}

fn load_corpus(cfg: &PipelineConfig, ws: &Workspace, period: usize) -> Result<Corpus> {
    let (w1, w2) = cfg.windows()?;
    let w: PeriodWindow = if period == 1 { w1 } else { w2 };
    let p = ws.input(INGEST, &format!("period{period}.jsonl"))?;
    Corpus::new(w, parse_file(&p)?.records)
}

// ---- graph ----

#[derive(Serialize, Deserialize)]
struct GraphSummary {
    period: usize,
    nodes: usize,
    edges: usize,
}

fn run_graph(cfg: &PipelineConfig, ws: &Workspace) -> Result<()> {
    let mut summaries = Vec::new();
    for period in [1, 2] {
        let corpus = load_corpus(cfg, ws, period)?;
        let g = build_graph(&corpus)?;
        let metrics = node_metrics(&g, &cfg.graph)?;
        let header = ws.header_line();
        ws.write_with(GRAPH, &format!("period{period}.edges"), |w| {
            writeln!(w, "{header}")?;
            write_edge_list(&g, w)
        })?;
        let rows = metrics.rows.iter().map(|m| {
            let i = g.index_of(&m.node).expect("metrics follow the graph");
            vec![
                m.node.clone(),
                m.degree.to_string(),
                f(m.pagerank),
                f(m.betweenness),
                f(m.clustering),
                g.retweet_count(i).to_string(),
                g.retweeted_count(i).to_string(),
            ]
        });
        ws.write_csv(
            GRAPH,
            &format!("metrics{period}.csv"),
            &strings([
                "node",
                "degree",
                "pagerank",
                "betweenness",
                "clustering",
                "retweets_authored",
                "retweets_received",
            ]),
            rows,
        )?;
        summaries.push(GraphSummary {
            period,
            nodes: g.node_count(),
            edges: g.edge_count(),
        });
    }
    ws.write_json(GRAPH, "summary.json", &summaries)?;
    Ok(())
}

fn load_graph(ws: &Workspace, period: usize) -> Result<(RetweetGraph, MetricsTable)> {
    let edges = ws.input(GRAPH, &format!("period{period}.edges"))?;
    let file = std::fs::File::open(&edges).map_err(|e| Error::io(&edges, e))?;
    let mut g = read_edge_list(std::io::BufReader::new(file))?;
    let t = Table::read(&ws.input(GRAPH, &format!("metrics{period}.csv"))?)?;
    let cols = [
        "node",
        "degree",
        "pagerank",
        "betweenness",
        "clustering",
        "retweets_authored",
        "retweets_received",
    ]
    .map(|c| t.column(c));
    let [node, degree, pr, btw, cc, authored, received] = cols;
    let (node, degree, pr, btw, cc, authored, received) =
        (node?, degree?, pr?, btw?, cc?, authored?, received?);
    let mut rows = Vec::with_capacity(t.rows.len());
    for r in &t.rows {
        let i = g
            .index_of(&r[node])
            .ok_or_else(|| Error::Format(format!("metrics row for unknown node {}", r[node])))?;
        g.set_retweet_counts(
            i,
            parse_num(&r[authored], "retweet count")?,
            parse_num(&r[received], "retweet count")?,
        );
        rows.push(NodeMetrics {
            node: r[node].clone(),
            degree: parse_num(&r[degree], "degree")?,
            pagerank: parse_num(&r[pr], "pagerank")?,
            betweenness: parse_num(&r[btw], "betweenness")?,
            clustering: parse_num(&r[cc], "clustering")?,
        });
    }
    Ok((g, MetricsTable::from_rows(rows)))
}

// ---- communities ----

#[derive(Serialize, Deserialize)]
struct PeriodCommunities {
    period: usize,
    runs: usize,
    stable: usize,
    unstable: usize,
    /// `(community, size)`, largest first.
    sizes: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct CommunitySummary {
    periods: Vec<PeriodCommunities>,
    eligible: usize,
    warnings: Vec<String>,
}

fn run_communities(cfg: &PipelineConfig, ws: &Workspace) -> Result<()> {
    let c = &cfg.communities;
    let (g1, _) = load_graph(ws, 1)?;
    let (g2, _) = load_graph(ws, 2)?;
    let l1 = consensus(&g1, c.consensus_runs, cfg.seed("communities1"))?;
    let l2 = consensus(&g2, c.consensus_runs, cfg.seed("communities2"))?;
    let rules = EligibilityRules {
        min_retweets: c.min_retweets,
        top_k: c.top_k,
        count_mode: c.count_mode,
    };
    let matching = match_communities(&l1, &l2, c.top_k)?;
    for w in &matching.warnings {
        log::warn!("{w}");
    }
    let eligible = eligible_users(&l1, &l2, &g1, &rules)?;
    let mut periods = Vec::new();
    for (period, g, l) in [(1, &g1, &l1), (2, &g2, &l2)] {
        let rows = g.ids().iter().map(|u| match l.community_of(u) {
            Some(k) => vec![u.clone(), k.to_string(), "1".into()],
            None => vec![u.clone(), String::new(), "0".into()],
        });
        ws.write_csv(
            COMMUNITIES,
            &format!("labels{period}.csv"),
            &strings(["user", "community", "stable"]),
            rows,
        )?;
        let mut sizes: Vec<(usize, usize)> = l.sizes().into_iter().collect();
        sizes.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        periods.push(PeriodCommunities {
            period,
            runs: l.runs,
            stable: l.stable.len(),
            unstable: l.unstable.len(),
            sizes,
        });
    }
    ws.write_csv(
        COMMUNITIES,
        "matching.csv",
        &strings(["c1", "c2", "jaccard", "size1", "size2"]),
        matching.pairs.iter().map(|p| {
            vec![
                p.c1.to_string(),
                p.c2.to_string(),
                f(p.jaccard),
                p.size1.to_string(),
                p.size2.to_string(),
            ]
        }),
    )?;
    ws.write_json(COMMUNITIES, "matching.json", &matching)?;
    ws.write_csv(
        COMMUNITIES,
        "eligible.csv",
        &strings(["user"]),
        eligible.iter().map(|u| vec![u.clone()]),
    )?;
    ws.write_json(
        COMMUNITIES,
        "summary.json",
        &CommunitySummary {
            periods,
            eligible: eligible.len(),
            warnings: matching.warnings.clone(),
        },
    )?;
    log::info!("communities: {} eligible users", eligible.len());
    Ok(())
}

fn load_labels(cfg: &PipelineConfig, ws: &Workspace, period: usize) -> Result<ConsensusLabeling> {
    let t = Table::read(&ws.input(COMMUNITIES, &format!("labels{period}.csv"))?)?;
    let (user, comm) = (t.column("user")?, t.column("community")?);
    let mut l = ConsensusLabeling {
        runs: cfg.communities.consensus_runs,
        ..Default::default()
    };
    for r in &t.rows {
        if r[comm].is_empty() {
            l.unstable.insert(r[user].clone());
        } else {
            l.stable
                .insert(r[user].clone(), parse_num(&r[comm], "community")?);
        }
    }
    Ok(l)
}

fn load_matching(ws: &Workspace) -> Result<CommunityMatching> {
    read_json(&ws.input(COMMUNITIES, "matching.json")?)
}

fn load_eligible(ws: &Workspace) -> Result<BTreeSet<String>> {
    let t = Table::read(&ws.input(COMMUNITIES, "eligible.csv")?)?;
    Ok(t.rows.into_iter().map(|mut r| r.swap_remove(0)).collect())
}

// ---- topics ----

#[derive(Serialize, Deserialize)]
struct TopicSummary {
    documents: usize,
    terms: usize,
    k: usize,
    iterations: usize,
    final_error: f64,
    profiled_users: usize,
}

fn stopwords(cfg: &PipelineConfig, ws: &Workspace) -> Result<HashSet<String>> {
    let path = match (&cfg.topics.stopwords, &cfg.input.synth) {
        (Some(p), _) => p.clone(),
        (None, Some(_)) => ws.input(SYNTH, "stopwords.txt")?,
        (None, None) => return Ok(HashSet::new()),
    };
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect())
}

fn run_topics(cfg: &PipelineConfig, ws: &Workspace) -> Result<()> {
    let t = &cfg.topics;
    let corpus = load_corpus(cfg, ws, 1)?;
    let sw = stopwords(cfg, ws)?;
    let docs: Vec<Vec<String>> = corpus
        .records()
        .par_iter()
        .map(|r| tokenize(&r.text, &sw))
        .collect();
    let vocab = build_vocabulary(&docs, t.ngram_range, &sw, t.min_df)?;
    let m = tfidf(&docs, &vocab);
    let params = NmfParams {
        k: t.n_topics,
        seed: cfg.seed("topics"),
        tol: t.tol,
        max_iter: t.max_iter,
    };
    let tm = nmf(&m.matrix, params)?;
    let authors: Vec<&str> = corpus
        .records()
        .iter()
        .map(|r| r.author_id.as_str())
        .collect();
    let profiles = topics::user_topic_profiles(&authors, &tm.h, t.min_membership);

    let mut rows = Vec::new();
    for k in 0..tm.k {
        for (rank, (term, w)) in topics::top_terms(&tm.w, &vocab, k, t.n_top_terms)
            .into_iter()
            .enumerate()
        {
            rows.push(vec![k.to_string(), rank.to_string(), term, f(w)]);
        }
    }
    ws.write_csv(
        TOPICS,
        "top_terms.csv",
        &strings(["topic", "rank", "term", "weight"]),
        rows,
    )?;
    let mut header = strings(["user", "tweets_counted"]);
    header.extend((0..tm.k).map(|k| format!("topic_{k}")));
    ws.write_csv(
        TOPICS,
        "profiles.csv",
        &header,
        profiles.iter().map(|(u, p)| {
            let mut r = vec![u.clone(), p.tweets_counted.to_string()];
            r.extend(p.fractions.iter().map(|&x| f(x)));
            r
        }),
    )?;
    ws.write_csv(
        TOPICS,
        "nmf.csv",
        &strings(["iteration", "error"]),
        tm.errors
            .iter()
            .enumerate()
            .map(|(i, &e)| vec![i.to_string(), f(e)]),
    )?;
    if let Some((lo, hi)) = t.sweep {
        let rows = sweep_k(&m.matrix, &vocab, lo, hi, params, t.n_top_terms)?;
        ws.write_csv(
            TOPICS,
            "sweep.csv",
            &strings(["k", "error", "relative_error", "top_terms"]),
            rows.iter().map(|r| {
                let terms: Vec<String> = r.top_terms.iter().map(|ts| ts.join("|")).collect();
                vec![
                    r.k.to_string(),
                    f(r.error),
                    f(r.relative_error),
                    terms.join(";"),
                ]
            }),
        )?;
    }
    ws.write_json(
        TOPICS,
        "summary.json",
        &TopicSummary {
            documents: docs.len(),
            terms: vocab.len(),
            k: tm.k,
            iterations: tm.errors.len() - 1,
            final_error: tm.final_error(),
            profiled_users: profiles.len(),
        },
    )?;
    Ok(())
}

fn load_profiles(ws: &Workspace) -> Result<BTreeMap<String, UserTopicProfile>> {
    let t = Table::read(&ws.input(TOPICS, "profiles.csv")?)?;
    let (user, counted) = (t.column("user")?, t.column("tweets_counted")?);
    let topic_cols: Vec<usize> = (0..t.header.len())
        .filter(|&j| t.header[j].starts_with("topic_"))
        .collect();
    t.rows
        .iter()
        .map(|r| {
            let fractions = topic_cols
                .iter()
                .map(|&j| parse_num(&r[j], "topic fraction"))
                .collect::<Result<Vec<f64>>>()?;
            Ok((
                r[user].clone(),
                UserTopicProfile {
                    fractions,
                    tweets_counted: parse_num(&r[counted], "tweet count")?,
                },
            ))
        })
        .collect()
}

/// Top terms per topic from the topics stage.
pub fn load_top_terms(ws: &Workspace) -> Result<BTreeMap<usize, Vec<String>>> {
    let t = Table::read(&ws.input(TOPICS, "top_terms.csv")?)?;
    let (topic, term) = (t.column("topic")?, t.column("term")?);
    let mut out: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for r in &t.rows {
        out.entry(parse_num(&r[topic], "topic")?)
            .or_default()
            .push(r[term].clone());
    }
    Ok(out)
}

// ---- features ----

fn run_features(cfg: &PipelineConfig, ws: &Workspace) -> Result<()> {
    let (_, metrics1) = load_graph(ws, 1)?;
    let l1 = load_labels(cfg, ws, 1)?;
    let l2 = load_labels(cfg, ws, 2)?;
    let matching = load_matching(ws)?;
    let eligible = load_eligible(ws)?;
    let profiles = load_profiles(ws)?;
    let (w1, w2) = cfg.windows()?;
    let provenance = Provenance {
        dataset_id: format!("{}-{}", TOOL, cfg.hash()),
        windows: vec![w1, w2],
        seeds: cfg.seeds(),
        ..Default::default()
    };
    let ds = dataset::assemble(
        &AssembleInputs {
            metrics1: &metrics1,
            labeling1: &l1,
            labeling2: &l2,
            profiles: &profiles,
            eligible: &eligible,
            matching: &matching,
            n_topics: cfg.topics.n_topics,
        },
        provenance,
    )?;
    let sp = dataset::split(
        &ds,
        &SplitSpec {
            train_fraction: cfg.model.train_fraction,
            seed: cfg.seed("split"),
            stratified: cfg.model.stratified,
        },
    )?;
    let mut header = vec!["user_id".to_string()];
    header.extend(ds.feature_names.iter().cloned());
    header.push("target".into());
    ws.write_csv(
        FEATURES,
        "dataset.csv",
        &header,
        (0..ds.len()).map(|i| {
            let mut r = vec![ds.user_ids[i].clone()];
            r.extend(ds.features[i].iter().map(|&x| f(x)));
            r.push(ds.targets[i].to_string());
            r
        }),
    )?;
    let mut part = vec!["train"; ds.len()];
    for &i in &sp.test {
        part[i] = "test";
    }
    ws.write_csv(
        FEATURES,
        "split.csv",
        &strings(["user_id", "part"]),
        (0..ds.len()).map(|i| vec![ds.user_ids[i].clone(), part[i].to_string()]),
    )?;
    ws.write_json(FEATURES, "dataset.json", &ds.provenance)?;
    log::info!(
        "features: {} instances, {} shifting, {} train / {} test",
        ds.len(),
        ds.positives(),
        sp.train.len(),
        sp.test.len()
    );
    Ok(())
}

/// The labeled dataset and its train/test split as written by `features`.
pub fn load_dataset(ws: &Workspace) -> Result<(LabeledDataset, Split)> {
    let t = Table::read(&ws.input(FEATURES, "dataset.csv")?)?;
    let provenance: Provenance = read_json(&ws.input(FEATURES, "dataset.json")?)?;
    let n = t.header.len();
    if n < 3 || t.header[0] != "user_id" || t.header[n - 1] != "target" {
        return Err(Error::Format(
            "dataset.csv needs user_id, features, target".into(),
        ));
    }
    let mut ds = LabeledDataset {
        user_ids: Vec::with_capacity(t.rows.len()),
        features: Vec::with_capacity(t.rows.len()),
        targets: Vec::with_capacity(t.rows.len()),
        feature_names: t.header[1..n - 1].to_vec(),
        provenance,
    };
    for r in &t.rows {
        ds.user_ids.push(r[0].clone());
        ds.features.push(
            r[1..n - 1]
                .iter()
                .map(|v| parse_num(v, "feature"))
                .collect::<Result<Vec<f64>>>()?,
        );
        ds.targets.push(parse_num(&r[n - 1], "target")?);
    }
    let s = Table::read(&ws.input(FEATURES, "split.csv")?)?;
    let part = s.column("part")?;
    if s.rows.len() != ds.len() {
        return Err(Error::Format("split.csv does not match dataset.csv".into()));
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, r) in s.rows.iter().enumerate() {
        match r[part].as_str() {
            "train" => train.push(i),
            "test" => test.push(i),
            other => return Err(Error::Format(format!("unknown split part {other:?}"))),
        }
    }
    Ok((
        ds,
        Split {
            train,
            test,
            stratified: true,
        },
    ))
}

// ---- train ----

fn run_train(cfg: &PipelineConfig, ws: &Workspace) -> Result<()> {
    let (ds, sp) = load_dataset(ws)?;
    let train = ds.subset(&sp.train);
    for (i, set) in FeatureSet::ALL.into_iter().enumerate() {
        let d = train.select(set);
        let seed = rng::derive_seed(cfg.seed("search"), &[i as u64]);
        let result = randomized_search(
            &d,
            &cfg.model.search,
            cfg.model.n_iter,
            cfg.model.n_folds,
            seed,
        )?;
        let model = model::train(&d, result.best_params())?;
        ws.write_json(TRAIN, &format!("model_{}.json", set.as_str()), &model)?;
        ws.write_csv(
            TRAIN,
            &format!("search_{}.csv", set.as_str()),
            &strings([
                "config",
                "n_trees",
                "max_depth",
                "learning_rate",
                "min_child_weight",
                "l2_lambda",
                "subsample",
                "colsample",
                "seed",
                "cv_auc",
                "best",
            ]),
            result
                .configs
                .iter()
                .zip(&result.scores)
                .enumerate()
                .map(|(j, (c, &s))| {
                    vec![
                        j.to_string(),
                        c.n_trees.to_string(),
                        c.max_depth.to_string(),
                        f(c.learning_rate),
                        f(c.min_child_weight),
                        f(c.l2_lambda),
                        f(c.subsample),
                        f(c.colsample),
                        c.seed.to_string(),
                        f(s),
                        u8::from(j == result.best).to_string(),
                    ]
                }),
        )?;
        log::info!(
            "train: {} best CV AUC {:.4}",
            set.as_str(),
            result.scores[result.best]
        );
    }
    Ok(())
}

pub fn load_model(ws: &Workspace, set: FeatureSet) -> Result<GBDTModel> {
    read_json(&ws.input(TRAIN, &format!("model_{}.json", set.as_str()))?)
}

// ---- evaluate ----

/// Model names in report order.
pub const MODEL_NAMES: [&str; 5] = ["all", "graph", "text", "polar", "random"];

fn run_evaluate(cfg: &PipelineConfig, ws: &Workspace) -> Result<()> {
    let (ds, sp) = load_dataset(ws)?;
    let test = ds.subset(&sp.test);
    let mut scored: Vec<(&str, Vec<f64>)> = Vec::new();
    let mut models = Vec::new();
    for set in FeatureSet::ALL {
        let m = load_model(ws, set)?;
        let t = test.select(set);
        let s = t
            .features
            .iter()
            .map(|x| predict_proba(&m, x))
            .collect::<Result<Vec<f64>>>()?;
        scored.push((set.as_str(), s));
        models.push(m);
    }
    let cols = &test.provenance.community_columns;
    if cols.len() < 2 {
        return Err(Error::Data(
            "the polar baseline needs at least two communities".into(),
        ));
    }
    scored.push(("polar", baseline_polar(&test, [cols[0], cols[1]])?));
    scored.push(("random", baseline_random(test.len(), cfg.seed("baseline"))));

    let mut curves: Vec<(&str, RocCurve)> = Vec::new();
    for (name, s) in &scored {
        ws.write_csv(
            EVALUATE,
            &format!("scores_{name}.csv"),
            &strings(["user_id", "score", "target"]),
            (0..test.len()).map(|i| {
                vec![
                    test.user_ids[i].clone(),
                    f(s[i]),
                    test.targets[i].to_string(),
                ]
            }),
        )?;
        curves.push((name, eval::roc_auc(s, &test.targets)?));
    }
    ws.write_csv(
        EVALUATE,
        "roc.csv",
        &strings(["model", "fpr", "tpr"]),
        curves.iter().flat_map(|(n, c)| {
            c.points
                .iter()
                .map(move |&(x, y)| vec![n.to_string(), f(x), f(y)])
        }),
    )?;
    ws.write_csv(
        EVALUATE,
        "auc.csv",
        &strings(["model", "auc"]),
        curves.iter().map(|(n, c)| vec![n.to_string(), f(c.auc)]),
    )?;
    let refs: Vec<(&str, &RocCurve)> = curves.iter().map(|(n, c)| (*n, c)).collect();
    ws.write_svg(EVALUATE, "roc.svg", &eval::roc_svg(&refs))?;

    let imp = eval::permutation_importance(
        &models[0],
        &test,
        cfg.eval.n_repeats,
        cfg.seed("importance"),
    )?;
    ws.write_csv(
        EVALUATE,
        "importance.csv",
        &strings(["feature", "mean_drop", "std", "std_error", "n_repeats"]),
        imp.features.iter().map(|x| {
            vec![
                x.feature.clone(),
                f(x.mean_drop),
                f(x.std),
                f(x.std_error),
                x.n_repeats.to_string(),
            ]
        }),
    )?;
    ws.write_json(EVALUATE, "importance.json", &imp)?;
    ws.write_svg(EVALUATE, "importance.svg", &eval::importance_svg(&imp))?;
    let gap = eval::pagerank_gap(&ds)?;
    ws.write_json(EVALUATE, "pagerank_gap.json", &gap)?;
    for (n, c) in &curves {
        log::info!("evaluate: AUC {n} = {:.4}", c.auc);
    }
    Ok(())
}

/// `model → AUC` from the evaluate stage.
pub fn load_aucs(ws: &Workspace) -> Result<BTreeMap<String, f64>> {
    let t = Table::read(&ws.input(EVALUATE, "auc.csv")?)?;
    let (m, a) = (t.column("model")?, t.column("auc")?);
    t.rows
        .iter()
        .map(|r| Ok((r[m].clone(), parse_num(&r[a], "auc")?)))
        .collect()
}

pub fn load_importance(ws: &Workspace) -> Result<ImportanceReport> {
    read_json(&ws.input(EVALUATE, "importance.json")?)
}

pub fn load_pagerank_gap(ws: &Workspace) -> Result<PageRankGap> {
    read_json(&ws.input(EVALUATE, "pagerank_gap.json")?)
}

// ---- report ----

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub auc: BTreeMap<String, f64>,
    pub pagerank_ratio: f64,
    pub top_feature: String,
    pub top_feature_drop: f64,
    pub top_persuasive_topic: usize,
    pub top_persuasive_terms: Vec<String>,
    pub eligible: usize,
    pub shifting: usize,
}

fn run_report(cfg: &PipelineConfig, ws: &Workspace) -> Result<()> {
    let l1 = load_labels(cfg, ws, 1)?;
    let l2 = load_labels(cfg, ws, 2)?;
    let matching = load_matching(ws)?;
    let eligible = load_eligible(ws)?;
    let profiles = load_profiles(ws)?;
    let terms = load_top_terms(ws)?;
    let (ds, _) = load_dataset(ws)?;
    let k = cfg.topics.n_topics;
    let label = |t: usize| {
        terms
            .get(&t)
            .map(|v| v.iter().take(3).cloned().collect::<Vec<_>>().join("|"))
            .unwrap_or_default()
    };

    let topic_cols: Vec<usize> = (0..k)
        .map(|t| {
            ds.column_index(&format!("topic_{t}"))
                .ok_or_else(|| Error::Contract(format!("dataset lacks topic_{t}")))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<f64>> = ds
        .features
        .iter()
        .map(|r| topic_cols.iter().map(|&j| r[j]).collect())
        .collect();
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    let pers = eval::persuasiveness(&refs, &ds.targets, cfg.eval.smoothing)?;
    ws.write_csv(
        REPORT,
        "persuasiveness.csv",
        &strings([
            "rank",
            "topic",
            "score",
            "mean_shifting",
            "mean_non_shifting",
            "top_terms",
        ]),
        pers.iter().enumerate().map(|(i, p)| {
            vec![
                i.to_string(),
                p.topic.to_string(),
                f(p.score),
                f(p.mean_shifting),
                f(p.mean_non_shifting),
                label(p.topic),
            ]
        }),
    )?;

    let flows: TopicFlowReport = eval::flow_report(
        &l1,
        &l2,
        &matching,
        &profiles,
        &eligible,
        k,
        cfg.eval.flow_threshold,
    );
    ws.write_json(REPORT, "flows.json", &flows)?;
    let join = |v: &[usize]| {
        v.iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join("|")
    };
    ws.write_csv(
        REPORT,
        "flows.csv",
        &strings([
            "from",
            "to",
            "stay",
            "count",
            "percent",
            "drawn",
            "top_topics_by_share",
            "top_topics_by_persuasiveness",
        ]),
        flows.arrows.iter().map(|a| {
            vec![
                a.from.to_string(),
                a.to.to_string(),
                u8::from(a.stay).to_string(),
                a.count.to_string(),
                f(a.percent),
                u8::from(a.drawn).to_string(),
                join(&a.top_topics_by_share),
                join(&a.top_topics_by_persuasiveness),
            ]
        }),
    )?;
    let mut header = strings(["period", "community"]);
    header.extend((0..k).map(|t| format!("topic_{t}")));
    let dist_rows = [(1, &flows.topics_period1), (2, &flows.topics_period2)]
        .into_iter()
        .flat_map(|(p, d)| {
            d.iter().map(move |(c, v)| {
                let mut r = vec![p.to_string(), c.to_string()];
                r.extend(v.iter().map(|&x| f(x)));
                r
            })
        })
        .collect::<Vec<_>>();
    ws.write_csv(REPORT, "community_topics.csv", &header, dist_rows)?;

    let imp = load_importance(ws)?;
    let gap = load_pagerank_gap(ws)?;
    let top = &imp.features[0];
    let summary = Summary {
        auc: load_aucs(ws)?,
        pagerank_ratio: gap.ratio,
        top_feature: top.feature.clone(),
        top_feature_drop: top.mean_drop,
        top_persuasive_topic: pers[0].topic,
        top_persuasive_terms: terms.get(&pers[0].topic).cloned().unwrap_or_default(),
        eligible: ds.len(),
        shifting: ds.positives(),
    };
    ws.write_json(REPORT, "summary.json", &summary)?;
    Ok(())
}

pub fn load_summary(ws: &Workspace) -> Result<Summary> {
    read_json(&ws.input(REPORT, "summary.json")?)
}

pub fn load_flows(ws: &Workspace) -> Result<TopicFlowReport> {
    read_json(&ws.input(REPORT, "flows.json")?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_names_are_distinct() {
        let names: BTreeSet<&str> = Stage::ALL.iter().map(|s| s.name()).collect();
        assert_eq!(names.len(), Stage::ALL.len());
    }

    #[test]
    fn missing_upstream_names_the_stage() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig {
            out_dir: dir.path().to_path_buf(),
            ..Default::default()
        };
        let err = run_stage(Stage::Train, &cfg).unwrap_err();
        assert!(err.to_string().contains("`features`"), "{err}");
        assert_eq!(err.exit_code(), 1);
        let err = run_stage(Stage::Ingest, &cfg).unwrap_err();
        assert!(err.to_string().contains("`synth`"), "{err}");
    }
}
