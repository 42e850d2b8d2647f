//! Parameter resolution: defaults, then a `key = value` config file, then
//! command-line flags.

use std::path::Path;

use clap::Args;
use pstop::MethodParams;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    /// Minimum recall to achieve.
    #[arg(long)]
    pub recall: Option<f64>,
    /// Probability level of the Poisson upper bound.
    #[arg(long)]
    pub confidence: Option<f64>,
    /// Initial sample, as a fraction of the topic.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Batch size, as a fraction of the topic.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Minimum relevant documents in the initial sample.
    #[arg(long)]
    pub gamma: Option<usize>,
    /// Fit-accuracy gate factor.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Knee method offset used by `km`.
    #[arg(long)]
    pub epsilon: Option<usize>,
    /// Relevant documents the target method must find.
    #[arg(long)]
    pub target_count: Option<usize>,
    /// Config file of `key = value` lines overriding the defaults.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(alias = "target_recall")]
    recall: Option<f64>,
    confidence: Option<f64>,
    #[serde(alias = "alpha_frac")]
    alpha: Option<f64>,
    #[serde(alias = "beta_frac")]
    beta: Option<f64>,
    gamma: Option<usize>,
    delta: Option<f64>,
    epsilon: Option<usize>,
    #[serde(alias = "target-count")]
    target_count: Option<usize>,
}

fn apply<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

pub fn parse_config(text: &str) -> CliResult<ParamOverrides> {
    let cfg: ConfigFile = toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
    Ok(ParamOverrides {
        recall: cfg.recall,
        confidence: cfg.confidence,
        alpha: cfg.alpha,
        beta: cfg.beta,
        gamma: cfg.gamma,
        delta: cfg.delta,
        epsilon: cfg.epsilon,
        target_count: cfg.target_count,
    })
}

/// Optional value for each parameter.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ParamOverrides {
    pub recall: Option<f64>,
    pub confidence: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<usize>,
    pub delta: Option<f64>,
    pub epsilon: Option<usize>,
    pub target_count: Option<usize>,
}

impl ParamOverrides {
    pub fn apply_to(&self, p: &mut MethodParams) {
        apply(&mut p.target_recall, self.recall);
        apply(&mut p.confidence, self.confidence);
        apply(&mut p.alpha_frac, self.alpha);
        apply(&mut p.beta_frac, self.beta);
        apply(&mut p.gamma, self.gamma);
        apply(&mut p.delta, self.delta);
        apply(&mut p.epsilon, self.epsilon);
        apply(&mut p.target_count, self.target_count);
    }
}

impl ParamArgs {
    fn overrides(&self) -> ParamOverrides {
        ParamOverrides {
            recall: self.recall,
            confidence: self.confidence,
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            delta: self.delta,
            epsilon: self.epsilon,
            target_count: self.target_count,
        }
    }

    pub fn resolve(&self) -> CliResult<MethodParams> {
        let mut params = MethodParams::default();
        if let Some(path) = &self.config {
            let text = read_config(path)?;
            parse_config(&text)?.apply_to(&mut params);
        }
        self.overrides().apply_to(&mut params);
        params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(params)
    }
}

fn read_config(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_owned(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.toml");
        std::fs::write(&path, "recall = 0.8\ngamma = 5\nalpha_frac = 0.4\n").unwrap();
        let args = ParamArgs {
            gamma: Some(7),
            config: Some(path),
            ..Default::default()
        };
        let p = args.resolve().unwrap();
        assert_eq!(p.target_recall, 0.8);
        assert_eq!(p.alpha_frac, 0.4);
        assert_eq!(p.gamma, 7);
        assert_eq!(p.confidence, 0.95);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_usage_errors() {
        assert!(matches!(parse_config("colour = 1"), Err(CliError::Usage(_))));
        let args = ParamArgs {
            confidence: Some(1.5),
            ..Default::default()
        };
        assert_eq!(args.resolve().unwrap_err().exit_code(), 1);
    }
}
