//! Evaluation metrics: recall, acceptability, reliability, effort saved,
//! AURC, and AURC-based stratification of runs.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{reaches_recall, Run, StopOutcome, Topic};

/// Fraction of the topic's relevant documents inside the examined set.
pub fn recall_of(outcome: &StopOutcome, topic: &Topic) -> Result<f64> {
    let total = topic.total_relevant();
    if total == 0 {
        return Err(Error::NoRelevant(topic.topic_id().to_owned()));
    }
    if outcome.relevant_found > total || outcome.stop_rank > topic.len() {
        return Err(Error::Validation(format!(
            "outcome for {} is inconsistent with the topic",
            topic.topic_id()
        )));
    }
    Ok(outcome.relevant_found as f64 / total as f64)
}

/// 1 when the stopped review reached `target_recall`, else 0.
pub fn acceptability(outcome: &StopOutcome, topic: &Topic, target_recall: f64) -> Result<u8> {
    recall_of(outcome, topic)?;
    Ok(u8::from(reaches_recall(
        outcome.relevant_found,
        topic.total_relevant(),
        target_recall,
    )))
}

/// Fraction of acceptable outcomes.
pub fn reliability<I>(acceptable: I) -> Result<f64>
where
    I: IntoIterator<Item = bool>,
{
    let (hits, count) = acceptable
        .into_iter()
        .fold((0usize, 0usize), |(h, c), a| (h + usize::from(a), c + 1));
    if count == 0 {
        return Err(Error::Domain("reliability of an empty set".into()));
    }
    Ok(hits as f64 / count as f64)
}

/// `100 · mean_T (|T| − |E_T|) / |T|`, with each saved fraction floored at 0.
pub fn pct_effort_saved<'a, I>(outcomes: I) -> Result<f64>
where
    I: IntoIterator<Item = (&'a StopOutcome, &'a Topic)>,
{
    let (sum, count) = outcomes.into_iter().fold((0.0, 0usize), |(s, c), (o, t)| {
        let size = t.len() as f64;
        let saved = ((size - o.effort() as f64) / size).max(0.0);
        (s + saved, c + 1)
    });
    if count == 0 {
        return Err(Error::Domain("effort saved over an empty set".into()));
    }
    Ok(100.0 * sum / count as f64)
}

/// Area under the cumulative recall curve (unit-step sum) divided by the
/// area of the ranking that puts every relevant document first.
pub fn aurc(topic: &Topic) -> Result<f64> {
    let total = topic.total_relevant();
    if total == 0 {
        return Err(Error::NoRelevant(topic.topic_id().to_owned()));
    }
    // Integer sums keep the ratio exact up to the final division.
    let area: u128 = (1..=topic.len()).map(|i| topic.rel(i) as u128).sum();
    let optimal: u128 = (1..=topic.len()).map(|i| i.min(total) as u128).sum();
    Ok(area as f64 / optimal as f64)
}

/// Mean AURC over a run's topics; topics without relevant documents are skipped.
pub fn run_aurc(run: &Run) -> Result<f64> {
    let scores: Vec<f64> = run.topics().iter().filter_map(|t| aurc(t).ok()).collect();
    if scores.is_empty() {
        return Err(Error::NoRelevant(run.run_tag().to_owned()));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunScore {
    pub run_tag: String,
    pub aurc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strata {
    /// Every run, best AURC first.
    pub ranked: Vec<RunScore>,
    pub top: Vec<RunScore>,
    pub middle: Vec<RunScore>,
    pub bottom: Vec<RunScore>,
}

/// Ranks runs by mean AURC and picks the top, middle and bottom five.
pub fn stratify_runs(runs: &[Run]) -> Result<Strata> {
    stratify_runs_with(runs, 5)
}

/// The middle group is centred on the median position, `(len − 1) / 2`
/// zero-based; ties in AURC are broken by run tag.
pub fn stratify_runs_with(runs: &[Run], group: usize) -> Result<Strata> {
    if group == 0 || runs.len() < 3 * group {
        return Err(Error::Domain(format!(
            "stratification into groups of {group} needs at least {} runs, got {}",
            3 * group,
            runs.len()
        )));
    }
    let mut ranked = runs
        .iter()
        .map(|r| {
            Ok(RunScore {
                run_tag: r.run_tag().to_owned(),
                aurc: run_aurc(r)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| {
        b.aurc
            .partial_cmp(&a.aurc)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.run_tag.cmp(&b.run_tag))
    });
    let len = ranked.len();
    let mid_start = ((len - 1) / 2).saturating_sub(group / 2);
    Ok(Strata {
        top: ranked[..group].to_vec(),
        middle: ranked[mid_start..mid_start + group].to_vec(),
        bottom: ranked[len - group..].to_vec(),
        ranked,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicResult {
    pub topic_id: String,
    pub topic_size: usize,
    pub stop_rank: usize,
    pub extra_examined: usize,
    pub effort: usize,
    pub recall: f64,
    pub acceptable: bool,
    pub predicted: bool,
}

/// Aggregated metrics of one method over one run (or any set of topics).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method_name: String,
    pub per_topic: Vec<TopicResult>,
    pub total_effort: usize,
    pub reliability: f64,
    pub mean_pct_effort_saved: f64,
}

impl MethodReport {
    /// `pairs` are the method's outcomes with their topics.
    pub fn build(method_name: impl Into<String>, pairs: &[(StopOutcome, &Topic)], target_recall: f64) -> Result<Self> {
        let per_topic = pairs
            .iter()
            .map(|(o, t)| {
                Ok(TopicResult {
                    topic_id: t.topic_id().to_owned(),
                    topic_size: t.len(),
                    stop_rank: o.stop_rank,
                    extra_examined: o.extra_examined,
                    effort: o.effort(),
                    recall: recall_of(o, t)?,
                    acceptable: acceptability(o, t, target_recall)? == 1,
                    predicted: o.predicted,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            method_name: method_name.into(),
            total_effort: per_topic.iter().map(|r| r.effort).sum(),
            reliability: reliability(per_topic.iter().map(|r| r.acceptable))?,
            mean_pct_effort_saved: pct_effort_saved(pairs.iter().map(|(o, t)| (o, *t)))?,
            per_topic,
        })
    }

    pub fn acceptable_count(&self) -> usize {
        self.per_topic.iter().filter(|r| r.acceptable).count()
    }
}

/// A method's results over a group of runs, in the shape of a summary table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub method_name: String,
    pub runs: usize,
    pub topics: usize,
    /// Per-run total effort, averaged over runs.
    pub mean_effort: f64,
    /// Per-run mean effort saved, averaged over runs.
    pub mean_pct_effort_saved: f64,
    /// Acceptable topics over all topics in all runs.
    pub reliability: f64,
}

impl GroupSummary {
    pub fn from_reports<'a, I>(method_name: impl Into<String>, reports: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a MethodReport>,
    {
        let reports: Vec<&MethodReport> = reports.into_iter().collect();
        if reports.is_empty() {
            return Err(Error::Domain("summary over zero runs".into()));
        }
        let runs = reports.len() as f64;
        let topics: usize = reports.iter().map(|r| r.per_topic.len()).sum();
        let acceptable: usize = reports.iter().map(|r| r.acceptable_count()).sum();
        Ok(Self {
            method_name: method_name.into(),
            runs: reports.len(),
            topics,
            mean_effort: reports.iter().map(|r| r.total_effort as f64).sum::<f64>() / runs,
            mean_pct_effort_saved: reports.iter().map(|r| r.mean_pct_effort_saved).sum::<f64>() / runs,
            reliability: if topics == 0 {
                0.0
            } else {
                acceptable as f64 / topics as f64
            },
        })
    }
}
