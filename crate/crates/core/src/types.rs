//! Domain types shared by the stopping methods and the evaluation harness.
//!
//! Ranks are 1-based; rank 0 denotes the empty prefix.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute slack used when comparing products of fractions against counts,
/// so that e.g. `10 * 0.7` is treated as exactly 7.
pub(crate) const FRACTION_SLACK: f64 = 1e-9;

/// `⌈x⌉` tolerant of representation error just above an integer.
pub(crate) fn ceil_count(x: f64) -> usize {
    let c = (x - FRACTION_SLACK).ceil();
    if c <= 0.0 {
        0
    } else {
        c as usize
    }
}

/// True when `found / total ≥ target`.
///
/// Shared by the oracle and by acceptability so the two agree on the boundary.
pub fn reaches_recall(found: usize, total: usize, target: f64) -> bool {
    found as f64 >= target * total as f64 - FRACTION_SLACK
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub relevant: bool,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, relevant: bool) -> Self {
        Self {
            doc_id: doc_id.into(),
            relevant,
        }
    }
}

/// One ranked document list with binary relevance labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topic {
    topic_id: String,
    docs: Vec<Document>,
    // cumulative[r] = relevant documents in ranks 1..=r
    cumulative: Vec<usize>,
}

impl Topic {
    pub fn new(topic_id: impl Into<String>, docs: Vec<Document>) -> Result<Self> {
        let topic_id = topic_id.into();
        if docs.is_empty() {
            return Err(Error::Validation(format!("topic {topic_id} is empty")));
        }
        let mut seen = HashSet::with_capacity(docs.len());
        for doc in &docs {
            if !seen.insert(doc.doc_id.as_str()) {
                return Err(Error::Validation(format!(
                    "topic {topic_id}: duplicate document {}",
                    doc.doc_id
                )));
            }
        }
        let mut cumulative = Vec::with_capacity(docs.len() + 1);
        cumulative.push(0);
        let mut acc = 0;
        for doc in &docs {
            acc += usize::from(doc.relevant);
            cumulative.push(acc);
        }
        Ok(Self {
            topic_id,
            docs,
            cumulative,
        })
    }

    /// Builds a topic from relevance flags alone, with generated document ids.
    pub fn from_flags(topic_id: impl Into<String>, flags: &[bool]) -> Result<Self> {
        let docs = flags
            .iter()
            .enumerate()
            .map(|(i, &rel)| Document::new(format!("d{:06}", i + 1), rel))
            .collect();
        Self::new(topic_id, docs)
    }

    /// Builds a topic of `n` documents relevant exactly at the given 1-based ranks.
    pub fn from_relevant_ranks(topic_id: impl Into<String>, n: usize, ranks: &[usize]) -> Result<Self> {
        let mut flags = vec![false; n];
        for &r in ranks {
            if r == 0 || r > n {
                return Err(Error::RankOutOfRange { rank: r, len: n });
            }
            flags[r - 1] = true;
        }
        Self::from_flags(topic_id, &flags)
    }

    pub fn topic_id(&self) -> &str {
        &self.topic_id
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    /// Number of ranked documents, `|T|`.
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn total_relevant(&self) -> usize {
        self.cumulative[self.docs.len()]
    }

    /// Relevant documents among ranks `1..=rank`.
    pub fn rel_at(&self, rank: usize) -> Result<usize> {
        self.cumulative.get(rank).copied().ok_or(Error::RankOutOfRange {
            rank,
            len: self.docs.len(),
        })
    }

    /// Unchecked variant for callers that already bounded `rank`.
    pub(crate) fn rel(&self, rank: usize) -> usize {
        self.cumulative[rank]
    }

    pub fn is_relevant(&self, rank: usize) -> bool {
        self.docs[rank - 1].relevant
    }

    /// Ranks (1-based) of the relevant documents in order.
    pub fn relevant_ranks(&self) -> Vec<usize> {
        self.docs
            .iter()
            .enumerate()
            .filter(|(_, d)| d.relevant)
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// A named collection of topics; one shared-task submission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Run {
    run_tag: String,
    topics: Vec<Topic>,
}

impl Run {
    pub fn new(run_tag: impl Into<String>, topics: Vec<Topic>) -> Result<Self> {
        let run_tag = run_tag.into();
        let mut seen = HashSet::new();
        for t in &topics {
            if !seen.insert(t.topic_id()) {
                return Err(Error::Validation(format!(
                    "run {run_tag}: duplicate topic {}",
                    t.topic_id()
                )));
            }
        }
        Ok(Self { run_tag, topics })
    }

    pub fn run_tag(&self) -> &str {
        &self.run_tag
    }

    pub fn topics(&self) -> &[Topic] {
        &self.topics
    }

    pub fn topic(&self, topic_id: &str) -> Option<&Topic> {
        self.topics.iter().find(|t| t.topic_id() == topic_id)
    }

    pub fn into_topics(self) -> Vec<Topic> {
        self.topics
    }
}

/// Per-topic result of a stopping method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopOutcome {
    pub topic_id: String,
    /// Last examined ranked position.
    pub stop_rank: usize,
    /// Documents examined outside the ranked prefix `1..=stop_rank`.
    pub extra_examined: usize,
    /// Relevant documents in the whole examined set.
    pub relevant_found: usize,
    /// False when the method fell back to examining everything.
    pub predicted: bool,
}

impl StopOutcome {
    /// A prefix-only outcome stopping at `stop_rank`.
    pub(crate) fn prefix(topic: &Topic, stop_rank: usize, predicted: bool) -> Self {
        Self {
            topic_id: topic.topic_id().to_owned(),
            stop_rank,
            extra_examined: 0,
            relevant_found: topic.rel(stop_rank),
            predicted,
        }
    }

    pub(crate) fn full_review(topic: &Topic) -> Self {
        Self::prefix(topic, topic.len(), false)
    }

    /// `|E_T|`.
    pub fn effort(&self) -> usize {
        self.stop_rank + self.extra_examined
    }
}

/// Parameters shared by all stopping methods. Defaults follow the published
/// experimental setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodParams {
    /// Minimum recall to reach.
    pub target_recall: f64,
    /// Probability level of the Poisson upper bound.
    pub confidence: f64,
    /// Initial sample size as a fraction of the topic.
    pub alpha_frac: f64,
    /// Batch size as a fraction of the topic.
    pub beta_frac: f64,
    /// Minimum relevant documents in the initial sample.
    pub gamma: usize,
    /// Fit-accuracy gate factor.
    pub delta: f64,
    /// Relevant documents the target method must find.
    pub target_count: usize,
    /// Knee method slope-ratio offset.
    pub epsilon: usize,
}

impl Default for MethodParams {
    fn default() -> Self {
        Self {
            target_recall: 0.7,
            confidence: 0.95,
            alpha_frac: 0.3,
            beta_frac: 0.05,
            gamma: 20,
            delta: 0.7,
            target_count: 10,
            epsilon: 150,
        }
    }
}

impl MethodParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Domain(msg.to_owned()));
        if !(self.target_recall > 0.0 && self.target_recall <= 1.0) {
            return fail("target_recall must lie in (0, 1]");
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return fail("confidence must lie in (0, 1)");
        }
        if !(self.beta_frac > 0.0 && self.beta_frac <= self.alpha_frac && self.alpha_frac <= 1.0) {
            return fail("require 0 < beta_frac <= alpha_frac <= 1");
        }
        if self.gamma < 1 {
            return fail("gamma must be at least 1");
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return fail("delta must lie in (0, 1]");
        }
        if self.target_count < 1 {
            return fail("target_count must be at least 1");
        }
        Ok(())
    }

    /// Initial sample size `⌈alpha_frac·n⌉`, clamped to `1..=n`.
    pub fn alpha_size(&self, n: usize) -> usize {
        ceil_count(self.alpha_frac * n as f64).clamp(1, n.max(1))
    }

    /// Batch size `⌈beta_frac·n⌉`, at least 1.
    pub fn beta_size(&self, n: usize) -> usize {
        ceil_count(self.beta_frac * n as f64).max(1)
    }
}
