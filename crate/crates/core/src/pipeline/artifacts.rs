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
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::PipelineConfig;
use crate::error::{Error, Result};

pub const TOOL: &str = "shiftnet";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceHeader {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub seeds: BTreeMap<String, u64>,
}

#[derive(Serialize, Deserialize)]
pub struct Envelope<T> {
    pub provenance: ProvenanceHeader,
    pub data: T,
}

/// The output directory, one sub-directory per stage.
pub struct Workspace {
    root: PathBuf,
    provenance: ProvenanceHeader,
}

impl Workspace {
    pub fn new(cfg: &PipelineConfig) -> Self {
        Workspace {
            root: cfg.out_dir.clone(),
            provenance: ProvenanceHeader {
                tool: TOOL.into(),
                version: VERSION.into(),
                config_hash: cfg.hash(),
                seed: cfg.seed,
                seeds: cfg.seeds(),
            },
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn provenance(&self) -> &ProvenanceHeader {
        &self.provenance
    }

    /// Comment line opening every CSV and edge-list artifact.
    pub fn header_line(&self) -> String {
        format!(
            "# {} {} config={} seed={}",
            self.provenance.tool,
            self.provenance.version,
            self.provenance.config_hash,
            self.provenance.seed
        )
    }

    pub fn path(&self, stage: &str, file: &str) -> PathBuf {
        self.root.join(stage).join(file)
    }

    /// Path of an upstream artifact, or an error naming the stage that writes it.
    pub fn input(&self, stage: &'static str, file: &str) -> Result<PathBuf> {
        let p = self.path(stage, file);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::MissingArtifact { stage, path: p })
        }
    }

    fn create(&self, stage: &str, file: &str) -> Result<(PathBuf, BufWriter<File>)> {
        let dir = self.root.join(stage);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let p = dir.join(file);
        let f = File::create(&p).map_err(|e| Error::io(&p, e))?;
        Ok((p, BufWriter::new(f)))
    }

    /// Write raw bytes produced by `body`.
    pub fn write_with<F>(&self, stage: &str, file: &str, body: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let (p, mut w) = self.create(stage, file)?;
        body(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }

    pub fn write_text(&self, stage: &str, file: &str, text: &str) -> Result<PathBuf> {
        self.write_with(stage, file, |w| w.write_all(text.as_bytes()))
    }

    /// SVG preceded by the provenance line as an XML comment.
    pub fn write_svg(&self, stage: &str, file: &str, svg: &str) -> Result<PathBuf> {
        let header = self.header_line();
        let text = format!("<!-- {} -->\n{svg}", header.trim_start_matches("# "));
        self.write_text(stage, file, &text)
    }

    /// CSV with a provenance comment line.
    pub fn write_csv<I>(
        &self,
        stage: &str,
        file: &str,
        header: &[String],
        rows: I,
    ) -> Result<PathBuf>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let (p, mut w) = self.create(stage, file)?;
        writeln!(w, "{}", self.header_line()).map_err(|e| Error::io(&p, e))?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(header)?;
        for r in rows {
            out.write_record(&r)?;
        }
        out.flush().map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }

    pub fn write_json<T: Serialize>(&self, stage: &str, file: &str, data: &T) -> Result<PathBuf> {
        let env = Envelope {
            provenance: self.provenance.clone(),
            data,
        };
        let (p, mut w) = self.create(stage, file)?;
        serde_json::to_writer_pretty(&mut w, &env)?;
        w.write_all(b"\n")
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }

    /// Sidecar for artifacts whose format has no room for a header.
    pub fn write_provenance(&self, stage: &str, artifacts: &[&str]) -> Result<PathBuf> {
        self.write_json(stage, "provenance.json", &artifacts)
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let env: Envelope<T> = serde_json::from_reader(BufReader::new(f))?;
    Ok(env.data)
}

/// Header and rows of a CSV artifact; `#` lines are skipped.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(BufReader::new(f));
        let header = r.headers()?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            rows.push(rec?.iter().map(String::from).collect());
        }
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("missing column {name}")))
    }
}

pub fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Format(format!("cannot parse {what} from {s:?}")))
}

pub fn strings<I, T>(items: I) -> Vec<String>
where
    I: IntoIterator<Item = T>,
    T: ToString,
{
    items.into_iter().map(|x| x.to_string()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_roundtrip_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig {
            out_dir: dir.path().to_path_buf(),
            ..Default::default()
        };
        let ws = Workspace::new(&cfg);
        let p = ws
            .write_csv(
                "s",
                "t.csv",
                &strings(["a", "b"]),
                vec![strings(["1", "x,y"]), strings(["2.5", ""])],
            )
            .unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with(&format!("# shiftnet {VERSION} config={}", cfg.hash())));
        let t = Table::read(&p).unwrap();
        assert_eq!(t.header, vec!["a", "b"]);
        assert_eq!(t.rows[0], vec!["1", "x,y"]);
        assert_eq!(t.column("b").unwrap(), 1);
        assert!(matches!(
            ws.input("features", "dataset.csv"),
            Err(Error::MissingArtifact {
                stage: "features",
                ..
            })
        ));
        ws.write_json("s", "v.json", &vec![1.5f64, 2.0]).unwrap();
        let v: Vec<f64> = read_json(&ws.path("s", "v.json")).unwrap();
        assert_eq!(v, vec![1.5, 2.0]);
    }
}
