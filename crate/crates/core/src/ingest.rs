//! Run and qrels file parsing, relevance join, serialization, and dataset
//! sanity statistics.
//!
//! Run lines carry six whitespace-separated fields
//! (`topic flag doc rank score tag`); qrels lines carry four
//! (`topic unused doc label`), with `label > 0` meaning relevant.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Document, Run, Topic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFileRecord {
    pub topic_id: String,
    pub flag: String,
    pub doc_id: String,
    pub rank: u64,
    pub score: f64,
    pub run_tag: String,
}

impl RunFileRecord {
    pub fn parse(line: &str, line_no: usize) -> Result<Self> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 6 fields, found {}", fields.len()),
            });
        }
        let rank: u64 = fields[3].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid rank {:?}", fields[3]),
        })?;
        if rank == 0 {
            return Err(Error::Parse {
                line: line_no,
                message: "rank must be at least 1".into(),
            });
        }
        let score: f64 = fields[4].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid score {:?}", fields[4]),
        })?;
        Ok(Self {
            topic_id: fields[0].to_owned(),
            flag: fields[1].to_owned(),
            doc_id: fields[2].to_owned(),
            rank,
            score,
            run_tag: fields[5].to_owned(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QrelRecord {
    pub topic_id: String,
    pub unused: String,
    pub doc_id: String,
    pub label: u32,
}

impl QrelRecord {
    pub fn parse(line: &str, line_no: usize) -> Result<Self> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let label = fields[3].parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid label {:?}", fields[3]),
        })?;
        Ok(Self {
            topic_id: fields[0].to_owned(),
            unused: fields[1].to_owned(),
            doc_id: fields[2].to_owned(),
            label,
        })
    }

    pub fn is_relevant(&self) -> bool {
        self.label > 0
    }
}

/// A parsed run along with non-fatal repairs made while reading it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRun {
    pub run: Run,
    pub warnings: Vec<String>,
}

/// Parses run-file lines into a [`Run`]. Blank lines are skipped.
///
/// Each topic's documents are ordered by ascending rank, then descending
/// score, then doc id; gaps or ties in the ranks are repaired by re-ranking
/// in that order and reported as warnings.
pub fn parse_run<I, S>(lines: I) -> Result<ParsedRun>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut run_tag = None;
    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, Vec<RunFileRecord>> = HashMap::new();
    for (idx, line) in lines.into_iter().enumerate() {
        let line = line.as_ref();
        if line.trim().is_empty() {
            continue;
        }
        let rec = RunFileRecord::parse(line, idx + 1)?;
        run_tag.get_or_insert_with(|| rec.run_tag.clone());
        if !grouped.contains_key(&rec.topic_id) {
            order.push(rec.topic_id.clone());
        }
        grouped.entry(rec.topic_id.clone()).or_default().push(rec);
    }
    let run_tag = run_tag.ok_or(Error::EmptyRun)?;

    let mut warnings = Vec::new();
    let mut topics = Vec::with_capacity(order.len());
    for topic_id in order {
        let mut recs = grouped.remove(&topic_id).unwrap_or_default();
        recs.sort_by(|a, b| {
            a.rank
                .cmp(&b.rank)
                .then_with(|| b.score.total_cmp(&a.score))
                .then_with(|| a.doc_id.cmp(&b.doc_id))
        });
        if recs.iter().enumerate().any(|(i, r)| r.rank != i as u64 + 1) {
            warnings.push(format!(
                "topic {topic_id}: ranks are not contiguous 1..={}; re-ranked in sorted order",
                recs.len()
            ));
        }
        let docs = recs.into_iter().map(|r| Document::new(r.doc_id, false)).collect();
        topics.push(Topic::new(topic_id, docs)?);
    }
    Ok(ParsedRun {
        run: Run::new(run_tag, topics)?,
        warnings,
    })
}

/// Relevance judgments: topic → document → label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qrels {
    topics: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn topic_ids(&self) -> impl Iterator<Item = &str> {
        self.topics.keys().map(String::as_str)
    }

    pub fn contains_topic(&self, topic_id: &str) -> bool {
        self.topics.contains_key(topic_id)
    }

    /// `None` when the pair is unjudged.
    pub fn label(&self, topic_id: &str, doc_id: &str) -> Option<u32> {
        self.topics.get(topic_id)?.get(doc_id).copied()
    }

    pub fn is_relevant(&self, topic_id: &str, doc_id: &str) -> bool {
        self.label(topic_id, doc_id).is_some_and(|l| l > 0)
    }

    /// Relevant document ids for a topic.
    pub fn relevant(&self, topic_id: &str) -> Vec<&str> {
        self.topics
            .get(topic_id)
            .map(|docs| docs.iter().filter(|(_, &l)| l > 0).map(|(d, _)| d.as_str()).collect())
            .unwrap_or_default()
    }

    /// Judged documents of a topic in document-id order, with relevance.
    pub fn judged<'a>(&'a self, topic_id: &str) -> impl Iterator<Item = (&'a str, bool)> + 'a {
        self.topics
            .get(topic_id)
            .into_iter()
            .flat_map(|docs| docs.iter().map(|(d, &l)| (d.as_str(), l > 0)))
    }

    pub fn judged_count(&self, topic_id: &str) -> usize {
        self.topics.get(topic_id).map_or(0, BTreeMap::len)
    }
}

/// Parses qrels lines. Repeated pairs must agree on the label.
pub fn parse_qrels<I, S>(lines: I) -> Result<Qrels>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut qrels = Qrels::default();
    for (idx, line) in lines.into_iter().enumerate() {
        let line = line.as_ref();
        if line.trim().is_empty() {
            continue;
        }
        let rec = QrelRecord::parse(line, idx + 1)?;
        let docs = qrels.topics.entry(rec.topic_id.clone()).or_default();
        match docs.get(&rec.doc_id) {
            Some(&prev) if prev != rec.label => {
                return Err(Error::Validation(format!(
                    "line {}: conflicting labels {prev} and {} for ({}, {})",
                    idx + 1,
                    rec.label,
                    rec.topic_id,
                    rec.doc_id
                )));
            }
            _ => {
                docs.insert(rec.doc_id, rec.label);
            }
        }
    }
    Ok(qrels)
}

/// A run with relevance flags filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Joined {
    pub run: Run,
    /// Ranked documents with no judgment, treated as non-relevant.
    pub unjudged: usize,
}

/// Sets each document's relevance from the qrels without changing order.
///
/// Topics absent from the qrels, or with no relevant documents at all, are
/// data errors.
pub fn join(run: &Run, qrels: &Qrels) -> Result<Joined> {
    let mut unjudged = 0;
    let mut topics = Vec::with_capacity(run.topics().len());
    for topic in run.topics() {
        let id = topic.topic_id();
        if !qrels.contains_topic(id) {
            return Err(Error::MissingTopic(id.to_owned()));
        }
        let docs: Vec<Document> = topic
            .docs()
            .iter()
            .map(|d| {
                let label = qrels.label(id, &d.doc_id);
                unjudged += usize::from(label.is_none());
                Document::new(d.doc_id.clone(), label.is_some_and(|l| l > 0))
            })
            .collect();
        let joined = Topic::new(id, docs)?;
        if joined.total_relevant() == 0 {
            return Err(Error::NoRelevant(id.to_owned()));
        }
        topics.push(joined);
    }
    Ok(Joined {
        run: Run::new(run.run_tag(), topics)?,
        unjudged,
    })
}

/// Writes a run in the six-column format with flag `NF` and a score
/// decreasing with rank.
pub fn write_run(run: &Run) -> String {
    let mut out = String::new();
    for topic in run.topics() {
        let n = topic.len() as f64;
        for (i, doc) in topic.docs().iter().enumerate() {
            let score = (n - i as f64) / n;
            let _ = writeln!(
                out,
                "{} NF {} {} {:.6} {}",
                topic.topic_id(),
                doc.doc_id,
                i + 1,
                score,
                run.run_tag()
            );
        }
    }
    out
}

/// Writes the run's relevance flags as a four-column qrels file.
pub fn write_qrels(run: &Run) -> String {
    let mut out = String::new();
    for topic in run.topics() {
        for doc in topic.docs() {
            let _ = writeln!(out, "{} 0 {} {}", topic.topic_id(), doc.doc_id, u8::from(doc.relevant));
        }
    }
    out
}

/// Published statistics of the 2017 test collection the harness targets.
pub mod reference {
    pub const TOPICS: usize = 30;
    pub const RUNS: usize = 33;
    pub const MIN_SIZE: f64 = 64.0;
    pub const MAX_SIZE: f64 = 12_807.0;
    pub const MEDIAN_SIZE: f64 = 2_070.0;
    pub const TOTAL_DOCS: f64 = 117_562.0;
    pub const MIN_RELEVANT: f64 = 2.0;
    pub const MAX_RELEVANT: f64 = 460.0;
    pub const MEDIAN_RELEVANT: f64 = 38.0;
    /// Percent of documents that are relevant, averaged over topics.
    pub const RELEVANT_PCT: f64 = 1.58;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Warn,
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub expected: f64,
    pub observed: f64,
    pub tolerance: f64,
    pub status: CheckStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicStats {
    pub topic_id: String,
    pub size: usize,
    pub relevant: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub runs: usize,
    pub topics: Vec<TopicStats>,
    pub total_docs: usize,
    pub total_relevant: usize,
    /// Pooled: all relevant over all documents, in percent.
    pub pooled_relevant_pct: f64,
    /// Per-topic relevant percentage, averaged over topics.
    pub mean_relevant_pct: f64,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
}

impl ValidationSummary {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "runs: {}", self.runs);
        let _ = writeln!(out, "topics: {}", self.topics.len());
        let _ = writeln!(out, "total documents: {}", self.total_docs);
        let _ = writeln!(out, "total relevant: {}", self.total_relevant);
        let _ = writeln!(out, "relevant % (pooled): {:.2}", self.pooled_relevant_pct);
        let _ = writeln!(out, "relevant % (mean over topics): {:.2}", self.mean_relevant_pct);
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:<24} {:>12} {:>12} {:>10}  status",
            "check", "expected", "observed", "tol"
        );
        for c in &self.checks {
            let status = match c.status {
                CheckStatus::Pass => "pass",
                CheckStatus::Warn => "WARN",
                CheckStatus::Inapplicable => "n/a",
            };
            let _ = writeln!(
                out,
                "{:<24} {:>12.2} {:>12.2} {:>10.2}  {status}",
                c.name, c.expected, c.observed, c.tolerance
            );
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len().is_multiple_of(2) {
        (values[mid - 1] + values[mid]) / 2.0
    } else {
        values[mid]
    }
}

/// Collection statistics from the qrels, compared against the published
/// figures. Mismatches are warnings; the checks only apply to a collection
/// with the published topic count.
pub fn validate_dataset(runs: &[Run], qrels: &Qrels) -> ValidationSummary {
    let topics: Vec<TopicStats> = qrels
        .topic_ids()
        .map(|id| TopicStats {
            topic_id: id.to_owned(),
            size: qrels.judged_count(id),
            relevant: qrels.relevant(id).len(),
        })
        .collect();
    let total_docs: usize = topics.iter().map(|t| t.size).sum();
    let total_relevant: usize = topics.iter().map(|t| t.relevant).sum();
    let pooled_relevant_pct = if total_docs == 0 {
        0.0
    } else {
        100.0 * total_relevant as f64 / total_docs as f64
    };
    let mean_relevant_pct = if topics.is_empty() {
        0.0
    } else {
        topics
            .iter()
            .map(|t| 100.0 * t.relevant as f64 / t.size.max(1) as f64)
            .sum::<f64>()
            / topics.len() as f64
    };

    let sizes: Vec<f64> = topics.iter().map(|t| t.size as f64).collect();
    let rels: Vec<f64> = topics.iter().map(|t| t.relevant as f64).collect();
    let fold = |v: &[f64], f: fn(f64, f64) -> f64| v.iter().copied().reduce(f).unwrap_or(f64::NAN);

    let applicable = topics.len() == reference::TOPICS;
    let check = |name: &str, expected: f64, observed: f64, tolerance: f64| Check {
        name: name.to_owned(),
        expected,
        observed,
        tolerance,
        status: if !applicable {
            CheckStatus::Inapplicable
        } else if (observed - expected).abs() <= tolerance {
            CheckStatus::Pass
        } else {
            CheckStatus::Warn
        },
    };
    use reference as r;
    let checks = vec![
        check("topics", r::TOPICS as f64, topics.len() as f64, 0.0),
        check("min topic size", r::MIN_SIZE, fold(&sizes, f64::min), 0.0),
        check("max topic size", r::MAX_SIZE, fold(&sizes, f64::max), 0.0),
        check("median topic size", r::MEDIAN_SIZE, median(&mut sizes.clone()), 0.5),
        check("total documents", r::TOTAL_DOCS, total_docs as f64, 0.0),
        check("min relevant", r::MIN_RELEVANT, fold(&rels, f64::min), 0.0),
        check("max relevant", r::MAX_RELEVANT, fold(&rels, f64::max), 0.0),
        check("median relevant", r::MEDIAN_RELEVANT, median(&mut rels.clone()), 0.5),
        check("relevant %", r::RELEVANT_PCT, mean_relevant_pct, 0.005),
    ];

    let mut warnings = Vec::new();
    if applicable && runs.len() != reference::RUNS {
        warnings.push(format!("expected {} runs, found {}", reference::RUNS, runs.len()));
    }
    for run in runs {
        for topic in run.topics() {
            let judged = qrels.judged_count(topic.topic_id());
            if judged != topic.len() {
                warnings.push(format!(
                    "run {} topic {}: {} ranked documents, {} judged",
                    run.run_tag(),
                    topic.topic_id(),
                    topic.len(),
                    judged
                ));
            }
        }
    }

    ValidationSummary {
        runs: runs.len(),
        topics,
        total_docs,
        total_relevant,
        pooled_relevant_pct,
        mean_relevant_pct,
        checks,
        warnings,
    }
}
