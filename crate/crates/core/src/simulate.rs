//! Synthetic rankings drawn from parameterised relevance-rate families, and
//! Monte-Carlo experiments over them.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::methods::Method;
use crate::metrics::{acceptability, pct_effort_saved, reliability};
use crate::poisson::{lambda_between, lambda_integral, upper_credible_count, RateModel};
use crate::ratefit::{bin_prefix, fit_exponential};
use crate::types::{MethodParams, Run, StopOutcome, Topic};

/// Relevance rate as a function of rank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum RateFamily {
    Exponential {
        d: f64,
        k: f64,
    },
    Uniform {
        p: f64,
    },
    /// Rate `p` up to and including rank `cutoff`, zero after.
    Step {
        p: f64,
        cutoff: usize,
    },
    /// Rate `p1` up to and including rank `cutoff`, `p2` after.
    Bimodal {
        p1: f64,
        p2: f64,
        cutoff: usize,
    },
}

impl RateFamily {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(Error::Domain(format!(
                "{self}: {what} must be finite and >= 0, got {v}"
            )))
        };
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        match *self {
            RateFamily::Exponential { d, k } => {
                if !nonneg(d) {
                    return bad("d", d);
                }
                if !k.is_finite() {
                    return Err(Error::Domain(format!("{self}: k must be finite")));
                }
            }
            RateFamily::Uniform { p } | RateFamily::Step { p, .. } => {
                if !nonneg(p) {
                    return bad("p", p);
                }
            }
            RateFamily::Bimodal { p1, p2, .. } => {
                if !nonneg(p1) {
                    return bad("p1", p1);
                }
                if !nonneg(p2) {
                    return bad("p2", p2);
                }
            }
        }
        Ok(())
    }

    /// Probability that rank `i` (covering `(i−1, i]`) is relevant: the rate
    /// integrated over the rank's unit cell, clipped to `[0, 1]`.
    pub fn rank_probability(&self, i: usize) -> f64 {
        let p = match *self {
            RateFamily::Exponential { d, k } => {
                if d == 0.0 {
                    0.0
                } else {
                    RateModel::new(d, k)
                        .and_then(|m| lambda_between(&m, (i - 1) as f64, i as f64))
                        .unwrap_or(1.0)
                }
            }
            RateFamily::Uniform { p } => p,
            RateFamily::Step { p, cutoff } => {
                if i <= cutoff {
                    p
                } else {
                    0.0
                }
            }
            RateFamily::Bimodal { p1, p2, cutoff } => {
                if i <= cutoff {
                    p1
                } else {
                    p2
                }
            }
        };
        p.clamp(0.0, 1.0)
    }

    /// Expected relevant count over ranks `1..=n`.
    pub fn expected_count(&self, n: usize) -> f64 {
        (1..=n).map(|i| self.rank_probability(i)).sum()
    }

    /// Variance of the relevant count over ranks `1..=n`.
    pub fn count_variance(&self, n: usize) -> f64 {
        (1..=n)
            .map(|i| {
                let p = self.rank_probability(i);
                p * (1.0 - p)
            })
            .sum()
    }
}

impl fmt::Display for RateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateFamily::Exponential { d, k } => write!(f, "exponential:{d},{k}"),
            RateFamily::Uniform { p } => write!(f, "uniform:{p}"),
            RateFamily::Step { p, cutoff } => write!(f, "step:{p},{cutoff}"),
            RateFamily::Bimodal { p1, p2, cutoff } => write!(f, "bimodal:{p1},{p2},{cutoff}"),
        }
    }
}

impl FromStr for RateFamily {
    type Err = Error;

    /// `exponential:d,k`, `uniform:p`, `step:p,cutoff`, `bimodal:p1,p2,cutoff`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Domain(format!("cannot parse rate family {s:?}"));
        let (name, args) = s.split_once(':').ok_or_else(bad)?;
        let args: Vec<&str> = args.split(',').map(str::trim).collect();
        let real = |i: usize| args.get(i).and_then(|a| a.parse::<f64>().ok()).ok_or_else(bad);
        let int = |i: usize| args.get(i).and_then(|a| a.parse::<usize>().ok()).ok_or_else(bad);
        let (family, arity) = match name.trim().to_ascii_lowercase().as_str() {
            "exponential" | "exp" => (
                RateFamily::Exponential {
                    d: real(0)?,
                    k: real(1)?,
                },
                2,
            ),
            "uniform" => (RateFamily::Uniform { p: real(0)? }, 1),
            "step" => (
                RateFamily::Step {
                    p: real(0)?,
                    cutoff: int(1)?,
                },
                2,
            ),
            "bimodal" => (
                RateFamily::Bimodal {
                    p1: real(0)?,
                    p2: real(1)?,
                    cutoff: int(2)?,
                },
                3,
            ),
            _ => return Err(bad()),
        };
        if args.len() != arity {
            return Err(bad());
        }
        family.validate()?;
        Ok(family)
    }
}

/// SplitMix64 finaliser over `base` and `stream`; used to give every trial
/// and topic its own reproducible generator.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit hash of a string (FNV-1a), for deriving per-topic seeds.
pub fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Draws a topic of `n` documents, each relevant independently with
/// [`RateFamily::rank_probability`].
pub fn gen_topic(n: usize, family: &RateFamily, seed: u64) -> Result<Topic> {
    gen_topic_with_id(format!("S{seed}"), n, family, seed)
}

pub fn gen_topic_with_id(topic_id: impl Into<String>, n: usize, family: &RateFamily, seed: u64) -> Result<Topic> {
    if n == 0 {
        return Err(Error::Domain("synthetic topic size must be at least 1".into()));
    }
    family.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flags: Vec<bool> = (1..=n)
        .map(|i| rng.random::<f64>() < family.rank_probability(i))
        .collect();
    Topic::from_flags(topic_id, &flags)
}

/// A run of `topics` synthetic topics, ids `T000`, `T001`, ….
pub fn synthetic_run(run_tag: &str, family: &RateFamily, n: usize, topics: usize, seed: u64) -> Result<Run> {
    let topics = (0..topics)
        .map(|i| gen_topic_with_id(format!("T{i:03}"), n, family, derive_seed(seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Run::new(run_tag, topics)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageSummary {
    pub family: RateFamily,
    pub n: usize,
    pub trials: usize,
    pub covered: usize,
    /// Trials whose fit failed outright; counted as not covered.
    pub fit_failures: usize,
    pub coverage: f64,
}

pub const MIN_TRIALS: usize = 100;

/// Fraction of trials in which the true total is at most the credible upper
/// bound from a fit over the whole topic.
pub fn coverage_experiment(
    family: &RateFamily,
    n: usize,
    trials: usize,
    params: &MethodParams,
    seed: u64,
) -> Result<CoverageSummary> {
    if trials < MIN_TRIALS {
        return Err(Error::Domain(format!(
            "coverage needs at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    params.validate()?;
    family.validate()?;
    let results = (0..trials)
        .into_par_iter()
        .map(|t| {
            let topic = gen_topic(n, family, derive_seed(seed, t as u64))?;
            Ok(trial_covered(&topic, params))
        })
        .collect::<Result<Vec<_>>>()?;
    let covered = results.iter().filter(|r| **r == Some(true)).count();
    let fit_failures = results.iter().filter(|r| r.is_none()).count();
    Ok(CoverageSummary {
        family: *family,
        n,
        trials,
        covered,
        fit_failures,
        coverage: covered as f64 / trials as f64,
    })
}

/// `None` when no bound could be computed.
fn trial_covered(topic: &Topic, params: &MethodParams) -> Option<bool> {
    let total = topic.total_relevant();
    if total == 0 {
        return Some(true);
    }
    let n = topic.len();
    let binned = bin_prefix(topic, n, params.beta_size(n)).ok()?;
    let model = fit_exponential(&binned).ok()?;
    let mean = lambda_integral(&model, n as f64).ok()?;
    let upper = upper_credible_count(mean, params.confidence).ok()?;
    Some(total as u64 <= upper)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSimulation {
    pub method_name: String,
    /// Topics with at least one relevant document; the others are skipped.
    pub topics: usize,
    pub skipped: usize,
    pub reliability: f64,
    pub mean_effort: f64,
    pub mean_pct_effort_saved: f64,
}

/// Runs each method over `trials` synthetic topics (seeded per trial, shared
/// across methods) and aggregates reliability and effort.
pub fn method_experiment(
    family: &RateFamily,
    n: usize,
    trials: usize,
    params: &MethodParams,
    seed: u64,
    methods: &[Method],
) -> Result<Vec<MethodSimulation>> {
    if trials == 0 {
        return Err(Error::Domain("at least one trial is required".into()));
    }
    params.validate()?;
    let topics = (0..trials)
        .into_par_iter()
        .map(|t| gen_topic(n, family, derive_seed(seed, t as u64)))
        .collect::<Result<Vec<_>>>()?;
    let usable: Vec<(usize, &Topic)> = topics
        .iter()
        .enumerate()
        .filter(|(_, t)| t.total_relevant() > 0)
        .collect();
    let skipped = topics.len() - usable.len();

    methods
        .iter()
        .map(|method| {
            let outcomes = usable
                .par_iter()
                .map(|&(i, t)| method.run(t, params, derive_seed(seed ^ 0x7461_7267_6574, i as u64)))
                .collect::<Result<Vec<StopOutcome>>>()?;
            let (reliability, mean_effort, saved) = if usable.is_empty() {
                (0.0, 0.0, 0.0)
            } else {
                let acc = outcomes
                    .iter()
                    .zip(&usable)
                    .map(|(o, (_, t))| acceptability(o, t, params.target_recall).map(|a| a == 1))
                    .collect::<Result<Vec<_>>>()?;
                (
                    reliability(acc)?,
                    outcomes.iter().map(|o| o.effort() as f64).sum::<f64>() / outcomes.len() as f64,
                    pct_effort_saved(outcomes.iter().zip(usable.iter().map(|(_, t)| *t)))?,
                )
            };
            Ok(MethodSimulation {
                method_name: method.name(),
                topics: usable.len(),
                skipped,
                reliability,
                mean_effort,
                mean_pct_effort_saved: saved,
            })
        })
        .collect()
}
