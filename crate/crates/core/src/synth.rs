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

//! Seeded two-period corpora from a stochastic block model with planted
//! shifters and planted persuasive topics.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Period, PeriodWindow, TweetRecord};
use crate::model::sigmoid;
use crate::rng;

/// Logistic shift model. The rank is the user's period-1 degree rank within
/// their community, scaled to `[0, 1]` (0 = least connected).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShiftModel {
    pub base_logodds: f64,
    pub rank_coef: f64,
    pub persuasive_coef: f64,
    /// Added to the log-odds of members of each community; empty means none.
    pub community_offsets: Vec<f64>,
}

impl Default for ShiftModel {
    fn default() -> Self {
        ShiftModel {
            base_logodds: -0.9,
            rank_coef: -7.0,
            persuasive_coef: 6.0,
            community_offsets: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub community_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    /// Topic `c` is the home topic of community `c`; topics that are neither
    /// home nor persuasive are shared by everyone.
    pub n_topics: usize,
    pub persuasive_topics: Vec<usize>,
    pub terms_per_topic: usize,
    pub filler_terms: Vec<String>,
    /// Share of a user's mixture on the home topic, before persuasive mass.
    pub home_weight: (f64, f64),
    /// Fraction of users who use the persuasive topics at all.
    pub persuasive_users: f64,
    pub persuasive_usage: (f64, f64),
    /// Original tweets per user and period.
    pub tweets_per_user: (usize, usize),
    /// Retweets per edge and direction.
    pub retweets_per_edge: (usize, usize),
    pub words_per_tweet: (usize, usize),
    pub fillers_per_tweet: (usize, usize),
    pub shift: ShiftModel,
    pub period1: (i64, i64),
    pub period2: (i64, i64),
    pub lang: String,
    pub seed: u64,
}

const DAY: i64 = 86_400;
const EPOCH: i64 = 1_500_000_000;

fn default_fillers() -> Vec<String> {
    [
        "de", "la", "que", "el", "en", "y", "los", "por", "con", "para", "una", "como",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

impl Default for SynthConfig {
    /// Two communities of 500 users with about 10% shifters.
    fn default() -> Self {
        SynthConfig {
            community_sizes: vec![500, 500],
            p_in: 0.02,
            p_out: 0.001,
            n_topics: 4,
            persuasive_topics: vec![3],
            terms_per_topic: 30,
            filler_terms: default_fillers(),
            home_weight: (0.5, 0.8),
            persuasive_users: 0.2,
            persuasive_usage: (0.15, 0.4),
            tweets_per_user: (6, 12),
            retweets_per_edge: (1, 2),
            words_per_tweet: (4, 8),
            fillers_per_tweet: (1, 3),
            shift: ShiftModel::default(),
            period1: (EPOCH, EPOCH + 30 * DAY),
            period2: (EPOCH + 60 * DAY, EPOCH + 90 * DAY),
            lang: "es".into(),
            seed: 2017,
        }
    }
}

impl SynthConfig {
    /// Four communities of 300 users; shifters sit in the sparse tail of
    /// each community, and the persuasive topic is used by 40% of users.
    pub fn arg() -> Self {
        SynthConfig {
            community_sizes: vec![300; 4],
            p_in: 0.027,
            p_out: 0.0005,
            n_topics: 6,
            persuasive_topics: vec![5],
            persuasive_users: 0.4,
            persuasive_usage: (0.2, 0.5),
            retweets_per_edge: (2, 4),
            shift: ShiftModel {
                base_logodds: 2.5,
                rank_coef: -20.0,
                persuasive_coef: 6.0,
                community_offsets: vec![-0.5, -0.25, 0.25, 0.5],
            },
            ..SynthConfig::default()
        }
    }

    pub fn n_users(&self) -> usize {
        self.community_sizes.iter().sum()
    }

    pub fn windows(&self) -> Result<(PeriodWindow, PeriodWindow)> {
        Ok((
            PeriodWindow::new(Period::Period1, self.period1.0, self.period1.1)?,
            PeriodWindow::new(Period::Period2, self.period2.0, self.period2.1)?,
        ))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let k = self.community_sizes.len();
        if k < 2 || self.community_sizes.contains(&0) {
            return bad("synth needs at least two non-empty communities".into());
        }
        if !(0.0 <= self.p_out && self.p_out < self.p_in && self.p_in <= 1.0) {
            return bad(format!(
                "need 0 <= p_out < p_in <= 1, got p_in={} p_out={}",
                self.p_in, self.p_out
            ));
        }
        if self.n_topics < k {
            return bad(format!(
                "n_topics {} is below the community count {k}",
                self.n_topics
            ));
        }
        for &t in &self.persuasive_topics {
            if t >= self.n_topics || t < k {
                return bad(format!(
                    "persuasive topic {t} must be a non-home topic below n_topics"
                ));
            }
        }
        let ranges = [
            ("tweets_per_user", self.tweets_per_user),
            ("retweets_per_edge", self.retweets_per_edge),
            ("words_per_tweet", self.words_per_tweet),
            ("fillers_per_tweet", self.fillers_per_tweet),
        ];
        for (name, (lo, hi)) in ranges {
            if lo > hi {
                return bad(format!("{name} range ({lo}, {hi}) is reversed"));
            }
        }
        if self.retweets_per_edge.0 < 1 || self.words_per_tweet.0 < 1 || self.terms_per_topic < 1 {
            return bad(
                "retweets_per_edge, words_per_tweet and terms_per_topic need a minimum of 1".into(),
            );
        }
        let unit = |(lo, hi): (f64, f64)| 0.0 <= lo && lo <= hi && hi <= 1.0;
        if !unit(self.home_weight)
            || !unit(self.persuasive_usage)
            || !(0.0..=1.0).contains(&self.persuasive_users)
        {
            return bad(
                "home_weight, persuasive_usage and persuasive_users must lie in [0, 1]".into(),
            );
        }
        let offsets = &self.shift.community_offsets;
        if !offsets.is_empty() && offsets.len() != k {
            return bad(format!(
                "{} community offsets for {k} communities",
                offsets.len()
            ));
        }
        if self.fillers_per_tweet.1 > 0 && self.filler_terms.is_empty() {
            return bad("fillers requested but filler_terms is empty".into());
        }
        let n = self.n_users();
        for (c, &s) in self.community_sizes.iter().enumerate() {
            let expected = (s - 1) as f64 * self.p_in + (n - s) as f64 * self.p_out;
            if expected < 1.0 {
                return bad(format!(
                    "community {c}: expected edges per user {expected:.2} < 1; the graph would shatter"
                ));
            }
        }
        self.windows()?;
        if self.period1.1 > self.period2.0 {
            return bad("synth periods overlap".into());
        }
        Ok(())
    }

    pub fn topic_term(&self, topic: usize, j: usize) -> String {
        format!("t{topic}w{j}")
    }

    /// Planted vocabulary of one topic.
    pub fn topic_terms(&self, topic: usize) -> Vec<String> {
        (0..self.terms_per_topic)
            .map(|j| self.topic_term(topic, j))
            .collect()
    }

    /// Topic of a planted term, if it is one.
    pub fn topic_of_term(&self, term: &str) -> Option<usize> {
        let rest = term.strip_prefix('t')?;
        let (t, w) = rest.split_once('w')?;
        let (t, w): (usize, usize) = (t.parse().ok()?, w.parse().ok()?);
        (t < self.n_topics && w < self.terms_per_topic).then_some(t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub user: String,
    pub community1: usize,
    pub community2: usize,
    pub shifted: bool,
    pub mixture: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth {
    pub users: Vec<TruthRow>,
    /// Mean shift probability under the shift model.
    pub expected_shift_fraction: f64,
}

impl GroundTruth {
    pub fn shift_fraction(&self) -> f64 {
        self.users.iter().filter(|u| u.shifted).count() as f64 / self.users.len() as f64
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["user", "community1", "community2", "shifted"])?;
        for u in &self.users {
            out.write_record([
                u.user.as_str(),
                &u.community1.to_string(),
                &u.community2.to_string(),
                if u.shifted { "1" } else { "0" },
            ])?;
        }
        out.flush().map_err(|e| Error::io("<ground truth>", e))?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub period1: Vec<TweetRecord>,
    pub period2: Vec<TweetRecord>,
    pub truth: GroundTruth,
}

fn user_id(u: usize) -> String {
    format!("u{u:05}")
}

fn range_sample<R: Rng>(rng: &mut R, (lo, hi): (usize, usize)) -> usize {
    rng.random_range(lo..=hi)
}

fn range_f64<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// SBM adjacency; each row is drawn from its own stream and sorted.
fn draw_sbm(cfg: &SynthConfig, membership: &[usize], period: u64) -> Vec<Vec<usize>> {
    let n = membership.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        let mut rng = rng::rng_for(cfg.seed, &[0x5b, period, i as u64]);
        for j in i + 1..n {
            let p = if membership[i] == membership[j] {
                cfg.p_in
            } else {
                cfg.p_out
            };
            if rng.random::<f64>() < p {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for a in adj.iter_mut() {
        a.sort_unstable();
    }
    adj
}

/// Within-community degree rank in `[0, 1]`, ties broken by a seeded jitter.
fn degree_ranks(cfg: &SynthConfig, membership: &[usize], adj: &[Vec<usize>]) -> Vec<f64> {
    let mut rank = vec![0.0; membership.len()];
    for c in 0..cfg.community_sizes.len() {
        let mut members: Vec<(usize, usize, u64)> = (0..membership.len())
            .filter(|&u| membership[u] == c)
            .map(|u| {
                (
                    adj[u].len(),
                    u,
                    rng::derive_seed(cfg.seed, &[0x7a, u as u64]),
                )
            })
            .collect();
        members.sort_unstable_by_key(|&(d, _, jitter)| (d, jitter));
        let denom = (members.len().max(2) - 1) as f64;
        for (pos, &(_, u, _)) in members.iter().enumerate() {
            rank[u] = pos as f64 / denom;
        }
    }
    rank
}

fn mixture(cfg: &SynthConfig, home: usize, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    let k = cfg.n_topics;
    let general: Vec<usize> = (cfg.community_sizes.len()..k)
        .filter(|t| !cfg.persuasive_topics.contains(t))
        .collect();
    let mut m = vec![0.0; k];
    let h = if general.is_empty() {
        1.0
    } else {
        range_f64(rng, cfg.home_weight)
    };
    m[home] = h;
    if !general.is_empty() {
        let raw: Vec<f64> = general.iter().map(|_| rng.random::<f64>() + 0.1).collect();
        let s: f64 = raw.iter().sum();
        for (&t, r) in general.iter().zip(&raw) {
            m[t] = (1.0 - h) * r / s;
        }
    }
    let usage = if !cfg.persuasive_topics.is_empty() && rng.random::<f64>() < cfg.persuasive_users {
        range_f64(rng, cfg.persuasive_usage)
    } else {
        0.0
    };
    if usage > 0.0 {
        m.iter_mut().for_each(|x| *x *= 1.0 - usage);
        let each = usage / cfg.persuasive_topics.len() as f64;
        for &t in &cfg.persuasive_topics {
            m[t] += each;
        }
    }
    (m, usage)
}

fn pick(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if x < w {
            return i;
        }
        x -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

fn tweet_text(cfg: &SynthConfig, mix: &[f64], rng: &mut ChaCha8Rng) -> String {
    let topic = pick(mix, rng);
    let n_words = range_sample(rng, cfg.words_per_tweet);
    let n_fill = range_sample(rng, cfg.fillers_per_tweet);
    let mut words: Vec<String> = Vec::with_capacity(n_words + n_fill);
    for _ in 0..n_words {
        // Skewed toward low term indices so topics have head terms.
        let u: f64 = rng.random();
        let j = ((u * u) * cfg.terms_per_topic as f64) as usize;
        words.push(cfg.topic_term(topic, j.min(cfg.terms_per_topic - 1)));
    }
    for _ in 0..n_fill {
        words.push(cfg.filler_terms[rng.random_range(0..cfg.filler_terms.len())].clone());
    }
    words.shuffle(rng);
    words.join(" ")
}

struct Draft {
    author: usize,
    timestamp: i64,
    text: String,
    retweet_of: Option<usize>,
}

fn period_records(
    cfg: &SynthConfig,
    adj: &[Vec<usize>],
    mixtures: &[Vec<f64>],
    period: u64,
    window: (i64, i64),
) -> Vec<TweetRecord> {
    let mut drafts = Vec::new();
    for (u, neighbours) in adj.iter().enumerate() {
        let mut rng = rng::rng_for(cfg.seed, &[0x7e, period, u as u64]);
        let originals = range_sample(&mut rng, cfg.tweets_per_user);
        for _ in 0..originals {
            let timestamp = rng.random_range(window.0..window.1);
            let text = tweet_text(cfg, &mixtures[u], &mut rng);
            drafts.push(Draft {
                author: u,
                timestamp,
                text,
                retweet_of: None,
            });
        }
        for &v in neighbours {
            for _ in 0..range_sample(&mut rng, cfg.retweets_per_edge) {
                let timestamp = rng.random_range(window.0..window.1);
                let text = format!(
                    "RT @{}: {}",
                    user_id(v),
                    tweet_text(cfg, &mixtures[u], &mut rng)
                );
                drafts.push(Draft {
                    author: u,
                    timestamp,
                    text,
                    retweet_of: Some(v),
                });
            }
        }
    }
    // Stable sort keeps per-author generation order among equal timestamps.
    drafts.sort_by_key(|d| (d.timestamp, d.author));
    drafts
        .into_iter()
        .enumerate()
        .map(|(i, d)| TweetRecord {
            tweet_id: format!("{period}{i:08}"),
            author_id: user_id(d.author),
            author_handle: format!("@{}", user_id(d.author)),
            timestamp: d.timestamp,
            text: d.text,
            retweet_of_author_id: d.retweet_of.map(user_id),
            lang: Some(cfg.lang.clone()),
        })
        .collect()
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let n = cfg.n_users();
    let mut membership: Vec<usize> = cfg
        .community_sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
        .collect();
    membership.shuffle(&mut rng::rng_for(cfg.seed, &[0xc0]));

    let adj1 = draw_sbm(cfg, &membership, 1);
    let ranks = degree_ranks(cfg, &membership, &adj1);
    let mut mixtures = Vec::with_capacity(n);
    let mut usage = Vec::with_capacity(n);
    for (u, &c) in membership.iter().enumerate() {
        let (m, a) = mixture(cfg, c, &mut rng::rng_for(cfg.seed, &[0x31, u as u64]));
        mixtures.push(m);
        usage.push(a);
    }

    let offsets = &cfg.shift.community_offsets;
    let sizes: Vec<f64> = cfg.community_sizes.iter().map(|&s| s as f64).collect();
    let mut after = membership.clone();
    let mut expected = 0.0;
    for u in 0..n {
        let c = membership[u];
        let z = cfg.shift.base_logodds
            + offsets.get(c).copied().unwrap_or(0.0)
            + cfg.shift.rank_coef * ranks[u]
            + cfg.shift.persuasive_coef * usage[u];
        let p = if z == f64::NEG_INFINITY {
            0.0
        } else {
            sigmoid(z)
        };
        expected += p;
        let mut rng = rng::rng_for(cfg.seed, &[0x5f, u as u64]);
        if rng.random::<f64>() < p {
            let weights: Vec<f64> = sizes
                .iter()
                .enumerate()
                .map(|(d, &s)| if d == c { 0.0 } else { s })
                .collect();
            after[u] = pick(&weights, &mut rng);
        }
    }
    let adj2 = draw_sbm(cfg, &after, 2);

    let period1 = period_records(cfg, &adj1, &mixtures, 1, cfg.period1);
    let period2 = period_records(cfg, &adj2, &mixtures, 2, cfg.period2);
    let users = (0..n)
        .map(|u| TruthRow {
            user: user_id(u),
            community1: membership[u],
            community2: after[u],
            shifted: membership[u] != after[u],
            mixture: mixtures[u].clone(),
        })
        .collect();
    Ok(SynthOutput {
        period1,
        period2,
        truth: GroundTruth {
            users,
            expected_shift_fraction: expected / n as f64,
        },
    })
}
