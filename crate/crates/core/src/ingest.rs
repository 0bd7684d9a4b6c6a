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

//! Line-delimited record parsing and period bucketing.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One authored message. `retweet_of_author_id` is present iff the record is a retweet.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub tweet_id: String,
    pub author_id: String,
    #[serde(default)]
    pub author_handle: String,
    pub timestamp: i64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retweet_of_author_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang: Option<String>,
}

impl TweetRecord {
    pub fn is_retweet(&self) -> bool {
        self.retweet_of_author_id.is_some()
    }

    pub fn validate(&self) -> std::result::Result<(), &'static str> {
        if self.tweet_id.is_empty() {
            return Err("empty tweet_id");
        }
        if self.author_id.is_empty() {
            return Err("empty author_id");
        }
        if self.timestamp <= 0 {
            return Err("non-positive timestamp");
        }
        if matches!(&self.retweet_of_author_id, Some(r) if r.is_empty()) {
            return Err("empty retweet_of_author_id");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Period {
    Period1,
    Period2,
}

impl Period {
    pub fn as_str(self) -> &'static str {
        match self {
            Period::Period1 => "period1",
            Period::Period2 => "period2",
        }
    }
}

/// Half-open time window `[start, end)` in UTC seconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodWindow {
    pub label: Period,
    pub start: i64,
    pub end: i64,
}

impl PeriodWindow {
    pub fn new(label: Period, start: i64, end: i64) -> Result<Self> {
        if start >= end {
            return Err(Error::Config(format!(
                "{} window start {start} must precede end {end}",
                label.as_str()
            )));
        }
        Ok(PeriodWindow { label, start, end })
    }

    pub fn contains(&self, t: i64) -> bool {
        self.start <= t && t < self.end
    }
}

/// Records of one period, with a per-author index into `records`.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub window: PeriodWindow,
    records: Vec<TweetRecord>,
    by_user: BTreeMap<String, Vec<usize>>,
}

impl Corpus {
    pub fn new(window: PeriodWindow, records: Vec<TweetRecord>) -> Result<Self> {
        let mut by_user: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            if !window.contains(r.timestamp) {
                return Err(Error::Contract(format!(
                    "record {} at t={} lies outside {} [{}, {})",
                    r.tweet_id,
                    r.timestamp,
                    window.label.as_str(),
                    window.start,
                    window.end
                )));
            }
            by_user.entry(r.author_id.clone()).or_default().push(i);
        }
        Ok(Corpus {
            window,
            records,
            by_user,
        })
    }

    pub fn records(&self) -> &[TweetRecord] {
        &self.records
    }

    pub fn records_of(&self, user: &str) -> impl Iterator<Item = &TweetRecord> {
        self.by_user
            .get(user)
            .into_iter()
            .flatten()
            .map(move |&i| &self.records[i])
    }

    pub fn authors(&self) -> impl Iterator<Item = &str> {
        self.by_user.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Clone, Debug, Default)]
pub struct ParseOutcome {
    pub records: Vec<TweetRecord>,
    /// Non-blank lines read.
    pub lines: usize,
    pub malformed: usize,
}

/// Parse line-delimited JSON records. Malformed lines (bad JSON, missing
/// fields, invariant violations, duplicate ids) are skipped and counted.
pub fn parse_records<R: BufRead>(reader: R) -> Result<ParseOutcome> {
    let mut out = ParseOutcome::default();
    let mut seen = HashSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("<line {}>", lineno + 1), e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.lines += 1;
        let rec = match serde_json::from_str::<TweetRecord>(line.trim()) {
            Ok(r) => r,
            Err(e) => {
                log::debug!("line {}: {e}", lineno + 1);
                out.malformed += 1;
                continue;
            }
        };
        if let Err(why) = rec.validate() {
            log::debug!("line {}: {why}", lineno + 1);
            out.malformed += 1;
            continue;
        }
        if !seen.insert(rec.tweet_id.clone()) {
            log::debug!("line {}: duplicate tweet_id {}", lineno + 1, rec.tweet_id);
            out.malformed += 1;
            continue;
        }
        out.records.push(rec);
    }
    if out.lines > 0 && out.malformed * 2 > out.lines {
        return Err(Error::Format(format!(
            "{} of {} lines are malformed; is this a record file?",
            out.malformed, out.lines
        )));
    }
    if out.malformed > 0 {
        log::warn!("skipped {} malformed of {} lines", out.malformed, out.lines);
    }
    Ok(out)
}

/// Open a record file, transparently decompressing gzip (sniffed by magic bytes).
pub fn open_records(path: &Path) -> Result<Box<dyn BufRead>> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 2];
    let n = read_prefix(&mut f, &mut magic).map_err(|e| Error::io(path, e))?;
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(GzDecoder::new(f))))
    } else {
        Ok(Box::new(BufReader::new(f)))
    }
}

fn read_prefix(f: &mut File, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match f.read(&mut buf[n..])? {
            0 => break,
            k => n += k,
        }
    }
    Ok(n)
}

pub fn parse_file(path: &Path) -> Result<ParseOutcome> {
    let reader = open_records(path)?;
    parse_records(reader).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Keep only records whose `lang` equals `code`.
pub fn filter_lang(records: Vec<TweetRecord>, code: &str) -> Vec<TweetRecord> {
    records
        .into_iter()
        .filter(|r| r.lang.as_deref() == Some(code))
        .collect()
}

#[derive(Clone, Debug)]
pub struct SplitOutcome {
    pub period1: Corpus,
    pub period2: Corpus,
    pub dropped: usize,
}

pub fn split_periods(
    records: Vec<TweetRecord>,
    w1: PeriodWindow,
    w2: PeriodWindow,
) -> Result<SplitOutcome> {
    validate_windows(&w1, &w2)?;
    let mut p1 = Vec::new();
    let mut p2 = Vec::new();
    let mut dropped = 0;
    for r in records {
        if w1.contains(r.timestamp) {
            p1.push(r);
        } else if w2.contains(r.timestamp) {
            p2.push(r);
        } else {
            dropped += 1;
        }
    }
    Ok(SplitOutcome {
        period1: Corpus::new(w1, p1)?,
        period2: Corpus::new(w2, p2)?,
        dropped,
    })
}

pub fn validate_windows(w1: &PeriodWindow, w2: &PeriodWindow) -> Result<()> {
    if w1.label != Period::Period1 || w2.label != Period::Period2 {
        return Err(Error::Config(
            "windows must be labelled period1, period2".into(),
        ));
    }
    for w in [w1, w2] {
        if w.start >= w.end {
            return Err(Error::Config(format!(
                "{} window start {} must precede end {}",
                w.label.as_str(),
                w.start,
                w.end
            )));
        }
    }
    if w1.end > w2.start {
        return Err(Error::Config(format!(
            "period windows overlap: period1 ends at {} after period2 starts at {}",
            w1.end, w2.start
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub period: Period,
    pub start: i64,
    pub end: i64,
    pub n_tweets: usize,
    pub n_users: usize,
    pub n_retweets: usize,
}

pub fn corpus_summary(c: &Corpus) -> CorpusSummary {
    let users: BTreeSet<&str> = c.records.iter().map(|r| r.author_id.as_str()).collect();
    CorpusSummary {
        period: c.window.label,
        start: c.window.start,
        end: c.window.end,
        n_tweets: c.records.len(),
        n_users: users.len(),
        n_retweets: c.records.iter().filter(|r| r.is_retweet()).count(),
    }
}

/// Serialize records as one JSON object per line.
pub fn write_records<W: std::io::Write>(records: &[TweetRecord], mut w: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn rec(id: &str, author: &str, t: i64, rt: Option<&str>) -> TweetRecord {
        TweetRecord {
            tweet_id: id.into(),
            author_id: author.into(),
            author_handle: String::new(),
            timestamp: t,
            text: "x".into(),
            retweet_of_author_id: rt.map(Into::into),
            lang: None,
        }
    }

    fn w(label: Period, s: i64, e: i64) -> PeriodWindow {
        PeriodWindow::new(label, s, e).unwrap()
    }

    #[test]
    fn minimal_record() {
        let src = r#"{"tweet_id":"1","author_id":"u1","timestamp":100,"text":"hola"}"#;
        let out = parse_records(Cursor::new(src)).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.malformed, 0);
        assert!(!out.records[0].is_retweet());
    }

    #[test]
    fn missing_text_is_skipped() {
        let src = "{\"tweet_id\":\"1\",\"author_id\":\"u1\",\"timestamp\":100,\"text\":\"a\"}\n\
                   {\"tweet_id\":\"2\",\"author_id\":\"u1\",\"timestamp\":100}\n";
        let out = parse_records(Cursor::new(src)).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.malformed, 1);
    }

    #[test]
    fn three_valid_one_malformed() {
        let src = [
            r#"{"tweet_id":"1","author_id":"u1","timestamp":100,"text":"a"}"#,
            r#"{"tweet_id":"2","author_id":"u2","timestamp":101,"text":"b","retweet_of_author_id":"u1"}"#,
            r#"not json at all"#,
            r#"{"tweet_id":"3","author_id":"u1","timestamp":102,"text":"c","lang":"es"}"#,
        ]
        .join("\n");
        let out = parse_records(Cursor::new(src)).unwrap();
        assert_eq!(out.records.len(), 3);
        assert_eq!(out.malformed, 1);
        assert_eq!(out.lines, 4);
        let ids: Vec<_> = out.records.iter().map(|r| r.tweet_id.as_str()).collect();
        assert_eq!(ids, ["1", "2", "3"]);
    }

    #[test]
    fn mostly_garbage_is_a_format_error() {
        let src = "a\nb\n{\"tweet_id\":\"1\",\"author_id\":\"u1\",\"timestamp\":1,\"text\":\"\"}\n";
        assert!(matches!(
            parse_records(Cursor::new(src)),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn invariant_violations_are_malformed() {
        let src = [
            r#"{"tweet_id":"1","author_id":"u1","timestamp":0,"text":"a"}"#,
            r#"{"tweet_id":"2","author_id":"u1","timestamp":5,"text":"a","retweet_of_author_id":""}"#,
            r#"{"tweet_id":"3","author_id":"u1","timestamp":5,"text":"a"}"#,
            r#"{"tweet_id":"3","author_id":"u2","timestamp":6,"text":"dup"}"#,
            r#"{"tweet_id":"4","author_id":"u1","timestamp":5,"text":"a"}"#,
            r#"{"tweet_id":"5","author_id":"u1","timestamp":5,"text":"a","retweet_of_author_id":"u1"}"#,
        ]
        .join("\n");
        let out = parse_records(Cursor::new(src)).unwrap();
        assert_eq!(out.malformed, 3);
        assert_eq!(out.records.len(), 3);
    }

    #[test]
    fn gzip_is_sniffed() {
        use flate2::write::GzEncoder;
        use std::io::Write;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl.gz");
        let mut enc = GzEncoder::new(File::create(&path).unwrap(), flate2::Compression::default());
        enc.write_all(br#"{"tweet_id":"1","author_id":"u1","timestamp":100,"text":"hola"}"#)
            .unwrap();
        enc.finish().unwrap();
        let out = parse_file(&path).unwrap();
        assert_eq!(out.records.len(), 1);
    }

    #[test]
    fn split_examples() {
        let w1 = w(Period::Period1, 100, 200);
        let w2 = w(Period::Period2, 300, 400);
        let out = split_periods(
            vec![rec("a", "u", 150, None), rec("b", "u", 250, None)],
            w1,
            w2,
        )
        .unwrap();
        assert_eq!(out.period1.len(), 1);
        assert_eq!(out.period2.len(), 0);
        assert_eq!(out.dropped, 1);
    }

    #[test]
    fn overlapping_windows_rejected() {
        let w1 = w(Period::Period1, 100, 310);
        let w2 = w(Period::Period2, 300, 400);
        assert!(matches!(
            split_periods(vec![], w1, w2),
            Err(Error::Config(_))
        ));
        assert!(PeriodWindow::new(Period::Period1, 5, 5).is_err());
    }

    #[test]
    fn summary_counts() {
        let w1 = w(Period::Period1, 0, 1000);
        let empty = Corpus::new(w1, vec![]).unwrap();
        let s = corpus_summary(&empty);
        assert_eq!((s.n_tweets, s.n_users, s.n_retweets), (0, 0, 0));

        let recs = vec![
            rec("1", "a", 1, None),
            rec("2", "a", 2, Some("b")),
            rec("3", "b", 3, Some("a")),
            rec("4", "b", 4, None),
            rec("5", "a", 5, Some("c")),
        ];
        let c = Corpus::new(w1, recs).unwrap();
        let s = corpus_summary(&c);
        assert_eq!((s.n_tweets, s.n_users, s.n_retweets), (5, 2, 3));
        assert_eq!(c.records_of("a").count(), 3);
    }

    #[test]
    fn lang_filter() {
        let mut a = rec("1", "a", 1, None);
        a.lang = Some("es".into());
        let b = rec("2", "a", 1, None);
        assert_eq!(filter_lang(vec![a, b], "es").len(), 1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_record() -> impl Strategy<Value = TweetRecord> {
            (
                "[a-z0-9]{1,6}",
                "u[0-9]{1,2}",
                1i64..10_000,
                "\\PC{0,20}",
                proptest::option::of("u[0-9]{1,2}"),
                proptest::option::of("[a-z]{2}"),
            )
                .prop_map(|(id, author, timestamp, text, rt, lang)| TweetRecord {
                    tweet_id: id,
                    author_handle: format!("@{author}"),
                    author_id: author,
                    timestamp,
                    text,
                    retweet_of_author_id: rt,
                    lang,
                })
        }

        proptest! {
            #[test]
            fn serialization_roundtrips(recs in proptest::collection::vec(arb_record(), 0..20)) {
                let mut uniq = Vec::new();
                let mut seen = HashSet::new();
                for r in recs {
                    if seen.insert(r.tweet_id.clone()) { uniq.push(r); }
                }
                let mut buf = Vec::new();
                write_records(&uniq, &mut buf).unwrap();
                let out = parse_records(Cursor::new(buf)).unwrap();
                prop_assert_eq!(out.malformed, 0);
                prop_assert_eq!(out.records, uniq);
            }

            #[test]
            fn lines_are_conserved(lines in proptest::collection::vec(
                prop_oneof![
                    (1i64..100).prop_map(|t| format!(r#"{{"tweet_id":"{t}","author_id":"u","timestamp":{t},"text":"x"}}"#)),
                    "[a-z{}]{0,8}",
                ], 1..30)) {
                let src = lines.join("\n");
                if let Ok(out) = parse_records(Cursor::new(src)) {
                    prop_assert_eq!(out.lines, out.records.len() + out.malformed);
                    prop_assert_eq!(out.lines, lines.iter().filter(|l| !l.trim().is_empty()).count());
                }
            }

            #[test]
            fn split_partitions(ts in proptest::collection::vec(1i64..500, 0..40)) {
                let recs: Vec<_> = ts.iter().enumerate().map(|(i, &t)| rec(&i.to_string(), "u", t, None)).collect();
                let total = recs.len();
                let out = split_periods(recs, w(Period::Period1, 100, 200), w(Period::Period2, 300, 400)).unwrap();
                prop_assert_eq!(out.period1.len() + out.period2.len() + out.dropped, total);
                let ids1: HashSet<_> = out.period1.records().iter().map(|r| &r.tweet_id).collect();
                prop_assert!(out.period2.records().iter().all(|r| !ids1.contains(&r.tweet_id)));
            }
        }
    }
}
