//! Loading run/qrels files and evaluating methods over them.

use std::path::{Path, PathBuf};

use pstop::ingest::{join, parse_qrels, parse_run, Qrels};
use pstop::metrics::{run_aurc, GroupSummary, MethodReport};
use pstop::simulate::{derive_seed, stable_hash};
use pstop::{Method, MethodParams, Run, StopOutcome};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};

pub fn read_lines(path: &Path) -> CliResult<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_owned(),
        source,
    })?;
    Ok(text.lines().map(str::to_owned).collect())
}

pub fn load_qrels(path: &Path) -> CliResult<Qrels> {
    parse_qrels(read_lines(path)?).map_err(|source| CliError::Input {
        path: path.to_owned(),
        source,
    })
}

/// Parsed runs, unjoined, in file order.
pub fn load_runs(paths: &[PathBuf]) -> CliResult<(Vec<Run>, Vec<String>)> {
    let parsed = paths
        .par_iter()
        .map(|path| {
            let parsed = parse_run(read_lines(path)?).map_err(|source| CliError::Input {
                path: path.clone(),
                source,
            })?;
            let warnings: Vec<String> = parsed
                .warnings
                .into_iter()
                .map(|w| format!("{}: {w}", path.display()))
                .collect();
            Ok((parsed.run, warnings))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut runs = Vec::with_capacity(parsed.len());
    let mut warnings = Vec::new();
    for (run, w) in parsed {
        runs.push(run);
        warnings.extend(w);
    }
    Ok((runs, warnings))
}

/// Joined runs sorted by run tag, plus every warning raised on the way.
#[derive(Debug)]
pub struct Inputs {
    pub runs: Vec<Run>,
    pub warnings: Vec<String>,
}

pub fn load_inputs(run_paths: &[PathBuf], qrels_path: &Path) -> CliResult<Inputs> {
    if run_paths.is_empty() {
        return Err(CliError::Usage("at least one run file is required".into()));
    }
    let qrels = load_qrels(qrels_path)?;
    let (raw, mut warnings) = load_runs(run_paths)?;
    let mut runs = Vec::with_capacity(raw.len());
    for (run, path) in raw.iter().zip(run_paths) {
        let joined = join(run, &qrels).map_err(|source| CliError::Input {
            path: path.clone(),
            source,
        })?;
        if joined.unjudged > 0 {
            warnings.push(format!(
                "{}: {} ranked documents absent from the qrels, treated as non-relevant",
                path.display(),
                joined.unjudged
            ));
        }
        runs.push(joined.run);
    }
    runs.sort_by(|a, b| a.run_tag().cmp(b.run_tag()));
    if let Some(w) = runs.windows(2).find(|w| w[0].run_tag() == w[1].run_tag()) {
        return Err(CliError::Core(pstop::Error::Validation(format!(
            "run tag {} appears in more than one file",
            w[0].run_tag()
        ))));
    }
    Ok(Inputs { runs, warnings })
}

/// Every method's report for one run.
#[derive(Debug, Clone)]
pub struct RunEvaluation {
    pub run_tag: String,
    pub aurc: f64,
    /// Same order as the evaluated methods.
    pub reports: Vec<MethodReport>,
}

/// Seed for the target method on one topic of one run.
pub fn topic_seed(seed: u64, run_tag: &str, topic_id: &str) -> u64 {
    derive_seed(seed, stable_hash(&format!("{run_tag}\u{1f}{topic_id}")))
}

pub fn evaluate_run(run: &Run, methods: &[Method], params: &MethodParams, seed: u64) -> CliResult<RunEvaluation> {
    let mut topics: Vec<_> = run.topics().iter().collect();
    topics.sort_by(|a, b| a.topic_id().cmp(b.topic_id()));
    let reports = methods
        .iter()
        .map(|method| {
            let outcomes = topics
                .par_iter()
                .map(|t| method.run(t, params, topic_seed(seed, run.run_tag(), t.topic_id())))
                .collect::<pstop::Result<Vec<StopOutcome>>>()?;
            let pairs: Vec<_> = outcomes.into_iter().zip(topics.iter().copied()).collect();
            Ok(MethodReport::build(method.name(), &pairs, params.target_recall)?)
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(RunEvaluation {
        run_tag: run.run_tag().to_owned(),
        aurc: run_aurc(run)?,
        reports,
    })
}

pub fn evaluate_runs(
    runs: &[Run],
    methods: &[Method],
    params: &MethodParams,
    seed: u64,
) -> CliResult<Vec<RunEvaluation>> {
    let mut evals = runs
        .par_iter()
        .map(|run| evaluate_run(run, methods, params, seed))
        .collect::<CliResult<Vec<_>>>()?;
    evals.sort_by(|a, b| a.run_tag.cmp(&b.run_tag));
    Ok(evals)
}

/// One summary row per method over the given runs.
pub fn summarize(evals: &[&RunEvaluation], methods: &[Method]) -> CliResult<Vec<GroupSummary>> {
    methods
        .iter()
        .enumerate()
        .map(|(i, m)| {
            Ok(GroupSummary::from_reports(
                m.name(),
                evals.iter().map(|e| &e.reports[i]),
            )?)
        })
        .collect()
}

pub fn parse_methods(list: &str, params: &MethodParams) -> CliResult<Vec<Method>> {
    let methods = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| Method::parse(s, params.epsilon).map_err(|e| CliError::Usage(e.to_string())))
        .collect::<CliResult<Vec<_>>>()?;
    if methods.is_empty() {
        return Err(CliError::Usage("no methods selected".into()));
    }
    Ok(methods)
}
