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

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::community::RetweetCountMode;
use crate::error::{Error, Result};
use crate::graph::MetricsConfig;
use crate::ingest::{validate_windows, Period, PeriodWindow};
use crate::model::SearchSpace;
use crate::rng;
use crate::synth::SynthConfig;
use crate::topics::NgramRange;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// Generate the corpus instead of reading record files. Only the built-in
    /// default has it; an explicit `[input]` table without `synth` reads records.
    #[serde(default)]
    pub synth: Option<SynthConfig>,
    /// Line-delimited JSON record files, optionally gzipped.
    pub records: Vec<PathBuf>,
    /// `[start, end)` in epoch seconds; taken from `synth` when absent.
    pub period1: Option<(i64, i64)>,
    pub period2: Option<(i64, i64)>,
    pub lang: Option<String>,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig {
            synth: Some(SynthConfig::arg()),
            records: Vec::new(),
            period1: None,
            period2: None,
            lang: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommunityConfig {
    pub consensus_runs: usize,
    pub top_k: usize,
    pub min_retweets: u32,
    pub count_mode: RetweetCountMode,
}

impl Default for CommunityConfig {
    fn default() -> Self {
        CommunityConfig {
            consensus_runs: 10,
            top_k: 4,
            min_retweets: 5,
            count_mode: RetweetCountMode::Authored,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicConfig {
    pub ngram_range: NgramRange,
    pub min_df: usize,
    pub n_topics: usize,
    /// One stopword per line. Synthetic runs fall back to the generator's list.
    pub stopwords: Option<PathBuf>,
    pub max_iter: usize,
    pub tol: f64,
    pub min_membership: f64,
    pub n_top_terms: usize,
    /// Inclusive `k` range for the reconstruction-error sweep.
    pub sweep: Option<(usize, usize)>,
}

impl Default for TopicConfig {
    fn default() -> Self {
        TopicConfig {
            ngram_range: NgramRange::default(),
            min_df: 5,
            n_topics: 6,
            stopwords: None,
            max_iter: 200,
            tol: 1e-6,
            min_membership: 0.0,
            n_top_terms: 10,
            sweep: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub search: SearchSpace,
    pub n_iter: usize,
    pub n_folds: usize,
    pub train_fraction: f64,
    pub stratified: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            search: SearchSpace::default(),
            n_iter: 25,
            n_folds: 3,
            train_fraction: 0.67,
            stratified: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub n_repeats: usize,
    pub flow_threshold: f64,
    pub smoothing: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_repeats: 10,
            flow_threshold: crate::eval::DEFAULT_FLOW_THRESHOLD,
            smoothing: crate::eval::DEFAULT_SMOOTHING,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Master seed; every stage seed is derived from it.
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads; 0 uses every core. Never affects results.
    pub threads: usize,
    pub input: InputConfig,
    pub graph: MetricsConfig,
    pub communities: CommunityConfig,
    pub topics: TopicConfig,
    pub model: ModelConfig,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 2017,
            out_dir: PathBuf::from("out"),
            threads: 0,
            input: InputConfig::default(),
            graph: MetricsConfig::default(),
            communities: CommunityConfig::default(),
            topics: TopicConfig::default(),
            model: ModelConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// Seed names, in the order they are derived.
pub const SEED_NAMES: [&str; 7] = [
    "communities1",
    "communities2",
    "topics",
    "split",
    "search",
    "importance",
    "baseline",
];

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        // Relative input paths are taken from the config's directory.
        let base = path.parent().unwrap_or(Path::new(""));
        for p in cfg.input.records.iter_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = cfg.topics.stopwords.as_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(format!("config serialization: {e}")))
    }

    pub fn seeds(&self) -> BTreeMap<String, u64> {
        let mut out: BTreeMap<String, u64> = SEED_NAMES
            .iter()
            .enumerate()
            .map(|(i, name)| {
                (
                    name.to_string(),
                    rng::derive_seed(self.seed, &[0xc0f1, i as u64]),
                )
            })
            .collect();
        if let Some(s) = &self.input.synth {
            out.insert("synth".into(), s.seed);
        }
        out
    }

    pub fn seed(&self, name: &str) -> u64 {
        self.seeds()[name]
    }

    /// Short hash over every setting that can change an artifact.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = PathBuf::new();
        canonical.threads = 0;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }

    pub fn windows(&self) -> Result<(PeriodWindow, PeriodWindow)> {
        let (p1, p2) = match (&self.input.synth, self.input.period1, self.input.period2) {
            (_, Some(a), Some(b)) => (a, b),
            (Some(s), None, None) => (s.period1, s.period2),
            _ => {
                return Err(Error::Config(
                    "input.period1 and input.period2 are required for record inputs".into(),
                ))
            }
        };
        let w1 = PeriodWindow::new(Period::Period1, p1.0, p1.1)?;
        let w2 = PeriodWindow::new(Period::Period2, p2.0, p2.1)?;
        validate_windows(&w1, &w2)?;
        Ok((w1, w2))
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.input.synth, self.input.records.is_empty()) {
            (Some(s), true) => s.validate()?,
            (None, false) => {
                for p in &self.input.records {
                    if !p.exists() {
                        return Err(Error::Config(format!(
                            "input file {} does not exist",
                            p.display()
                        )));
                    }
                }
            }
            (Some(_), false) => {
                return Err(Error::Config(
                    "set either input.synth or input.records, not both".into(),
                ))
            }
            (None, true) => {
                return Err(Error::Config(
                    "no input: set input.synth or input.records".into(),
                ))
            }
        }
        self.windows()?;
        if let Some(p) = &self.topics.stopwords {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "stopword file {} does not exist",
                    p.display()
                )));
            }
        }
        NgramRange::new(self.topics.ngram_range.min, self.topics.ngram_range.max)?;
        if self.topics.n_topics < 1 {
            return Err(Error::Config("topics.n_topics must be at least 1".into()));
        }
        if let Some((lo, hi)) = self.topics.sweep {
            if lo < 1 || lo > hi {
                return Err(Error::Config(format!(
                    "invalid topics.sweep range ({lo}, {hi})"
                )));
            }
        }
        if self.communities.consensus_runs < 2 {
            return Err(Error::Config(
                "communities.consensus_runs must be at least 2".into(),
            ));
        }
        if self.communities.top_k < 2 {
            return Err(Error::Config("communities.top_k must be at least 2".into()));
        }
        self.model.search.validate()?;
        if self.model.n_iter < 1 || self.model.n_folds < 2 {
            return Err(Error::Config(
                "model.n_iter >= 1 and model.n_folds >= 2 are required".into(),
            ));
        }
        if !(self.model.train_fraction > 0.0 && self.model.train_fraction < 1.0) {
            return Err(Error::Config(
                "model.train_fraction must lie in (0, 1)".into(),
            ));
        }
        if self.eval.n_repeats < 1 {
            return Err(Error::Config("eval.n_repeats must be at least 1".into()));
        }
        Ok(())
    }
}
