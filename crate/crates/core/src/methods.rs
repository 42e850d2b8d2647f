//! Stopping methods: Poisson process (PP), target (TM), knee (KM) and the
//! hindsight oracle (OR). Each maps a topic and parameters to a
//! [`StopOutcome`].

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poisson::{required_relevant, RateModel};
use crate::ratefit::{bin_prefix, delta_gate, fit_exponential};
use crate::types::{reaches_recall, MethodParams, StopOutcome, Topic};

/// Knee-method offset recommended by the method's authors.
pub const KNEE_EPSILON_DEFAULT: usize = 150;
/// Offset found by cross-validation on the evaluation collection.
pub const KNEE_EPSILON_TUNED: usize = 50;

/// Why the Poisson loop ended where it did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoissonExit {
    /// Too few relevant documents in the initial sample.
    GammaGate,
    /// The required count was reached.
    Reached,
    /// The ranking was exhausted before any accepted fit reached its target.
    Exhausted,
}

/// What happened at one batch boundary of the Poisson loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub examined_end: usize,
    pub relevant: usize,
    pub model: Option<RateModel>,
    pub accepted: bool,
    pub required: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonTrace {
    pub exit: PoissonExit,
    pub batches: Vec<BatchRecord>,
}

impl PoissonTrace {
    /// The most recent model that passed the accuracy gate.
    pub fn accepted_model(&self) -> Option<RateModel> {
        self.batches.iter().rev().find(|b| b.accepted).and_then(|b| b.model)
    }
}

/// Poisson-process stopping rule.
pub fn poisson_stop(topic: &Topic, params: &MethodParams) -> StopOutcome {
    poisson_stop_traced(topic, params).0
}

/// [`poisson_stop`] along with a per-batch record of fits and targets.
pub fn poisson_stop_traced(topic: &Topic, params: &MethodParams) -> (StopOutcome, PoissonTrace) {
    let n = topic.len();
    let alpha = params.alpha_size(n);
    let beta = params.beta_size(n);
    let mut batches = Vec::new();

    if topic.rel(alpha) < params.gamma {
        let trace = PoissonTrace {
            exit: PoissonExit::GammaGate,
            batches,
        };
        return (StopOutcome::full_review(topic), trace);
    }

    let mut end = alpha;
    loop {
        let next_end = (end + beta).min(n);
        let model = bin_prefix(topic, end, beta).and_then(|b| fit_exponential(&b)).ok();
        let accepted = model.is_some_and(|m| delta_gate(&m, topic, end, params.delta));
        let required = if accepted {
            model.and_then(|m| required_relevant(&m, n, params).ok())
        } else {
            None
        };
        batches.push(BatchRecord {
            examined_end: end,
            relevant: topic.rel(end),
            model,
            accepted,
            required,
        });

        if let Some(q) = required {
            // Scan forward to the next batch boundary with the target held fixed.
            if let Some(rank) = (end..=next_end).find(|&r| topic.rel(r) >= q) {
                let trace = PoissonTrace {
                    exit: PoissonExit::Reached,
                    batches,
                };
                return (StopOutcome::prefix(topic, rank, true), trace);
            }
        }

        if end == n {
            let trace = PoissonTrace {
                exit: PoissonExit::Exhausted,
                batches,
            };
            return (StopOutcome::full_review(topic), trace);
        }
        end = next_end;
    }
}

/// Target method: sample documents uniformly without replacement until
/// `target_count` relevant ones are found, then review the ranking down to
/// the deepest of them.
pub fn target_stop(topic: &Topic, params: &MethodParams, seed: u64) -> StopOutcome {
    let n = topic.len();
    if topic.total_relevant() < params.target_count {
        return StopOutcome::full_review(topic);
    }
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut found = 0;
    let mut sampled = 0;
    let mut deepest = 0;
    for &rank in &order {
        sampled += 1;
        if topic.is_relevant(rank) {
            found += 1;
            deepest = deepest.max(rank);
            if found == params.target_count {
                break;
            }
        }
    }
    let extra_examined = order[..sampled].iter().filter(|&&r| r > deepest).count();
    StopOutcome {
        topic_id: topic.topic_id().to_owned(),
        stop_rank: deepest,
        extra_examined,
        // every relevant sample lies at or above the deepest one
        relevant_found: topic.rel(deepest),
        predicted: true,
    }
}

/// Slope-ratio threshold `ε + 6 − min(relret, ε)`.
pub fn knee_threshold(relret: usize, epsilon: usize) -> f64 {
    (epsilon + 6 - relret.min(epsilon)) as f64
}

/// Candidate knee of the gain curve over ranks `0..=end`: the rank
/// maximising `y_norm − x_norm` after scaling to the unit square.
/// `None` when the curve is flat or never rises above the diagonal.
pub fn find_knee(topic: &Topic, end: usize) -> Option<usize> {
    let top = topic.rel(end);
    if end < 2 || top == 0 {
        return None;
    }
    let mut best = (0.0, 0);
    for r in 1..end {
        let diff = topic.rel(r) as f64 / top as f64 - r as f64 / end as f64;
        if diff > best.0 {
            best = (diff, r);
        }
    }
    (best.1 > 0).then_some(best.1)
}

/// `[rel(s)/s] / [(rel(i) − rel(s) + 1)/(i − s)]` for knee `s` and rank `i`.
pub fn slope_ratio(topic: &Topic, knee: usize, end: usize) -> f64 {
    let before = topic.rel(knee) as f64 / knee as f64;
    let after = (topic.rel(end) - topic.rel(knee) + 1) as f64 / (end - knee) as f64;
    before / after
}

/// Knee method over the same `α`/`β` batch schedule as the Poisson method.
pub fn knee_stop(topic: &Topic, params: &MethodParams) -> StopOutcome {
    let n = topic.len();
    let beta = params.beta_size(n);
    let mut end = params.alpha_size(n);
    loop {
        if let Some(knee) = find_knee(topic, end) {
            if slope_ratio(topic, knee, end) >= knee_threshold(topic.rel(end), params.epsilon) {
                return StopOutcome::prefix(topic, end, true);
            }
        }
        if end == n {
            return StopOutcome::full_review(topic);
        }
        end = (end + beta).min(n);
    }
}

/// Hindsight oracle: the shallowest rank reaching the target recall.
pub fn oracle_stop(topic: &Topic, params: &MethodParams) -> Result<StopOutcome> {
    let total = topic.total_relevant();
    if total == 0 {
        return Err(Error::NoRelevant(topic.topic_id().to_owned()));
    }
    let rank = (1..=topic.len())
        .find(|&r| reaches_recall(topic.rel(r), total, params.target_recall))
        .unwrap_or(topic.len());
    Ok(StopOutcome::prefix(topic, rank, true))
}

/// A stopping method with its configuration, as selected on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    Target,
    /// Knee method with an explicit `ε`.
    Knee(usize),
    Poisson,
    Oracle,
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Target => "TM".into(),
            Method::Knee(KNEE_EPSILON_DEFAULT) => "KM-default".into(),
            Method::Knee(KNEE_EPSILON_TUNED) => "KM-tuned".into(),
            Method::Knee(eps) => format!("KM-e{eps}"),
            Method::Poisson => "PP".into(),
            Method::Oracle => "OR".into(),
        }
    }

    /// True for methods whose examined set is a ranked prefix.
    pub fn is_prefix(&self) -> bool {
        !matches!(self, Method::Target)
    }

    /// `seed` only affects the target method.
    pub fn run(&self, topic: &Topic, params: &MethodParams, seed: u64) -> Result<StopOutcome> {
        match *self {
            Method::Target => Ok(target_stop(topic, params, seed)),
            Method::Knee(epsilon) => Ok(knee_stop(topic, &MethodParams { epsilon, ..*params })),
            Method::Poisson => Ok(poisson_stop(topic, params)),
            Method::Oracle => oracle_stop(topic, params),
        }
    }

    /// Parses `pp`, `tm`, `or`, `km` (uses `default_epsilon`), `km-default`,
    /// `km-tuned`, or `km:<eps>`.
    pub fn parse(s: &str, default_epsilon: usize) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Ok(match lower.as_str() {
            "pp" => Method::Poisson,
            "tm" => Method::Target,
            "or" => Method::Oracle,
            "km" => Method::Knee(default_epsilon),
            "km-default" => Method::Knee(KNEE_EPSILON_DEFAULT),
            "km-tuned" => Method::Knee(KNEE_EPSILON_TUNED),
            other => match other.strip_prefix("km:").map(str::parse) {
                Some(Ok(eps)) => Method::Knee(eps),
                _ => return Err(Error::Domain(format!("unknown method {s:?}"))),
            },
        })
    }
}
