//! Report records (one JSON object per line) and the matching text tables.

use std::fmt::Write as _;
use std::path::Path;

use pstop::metrics::GroupSummary;
use pstop::MethodParams;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::harness::RunEvaluation;

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum Record {
    Params {
        #[serde(flatten)]
        params: MethodParams,
        seed: u64,
        methods: Vec<String>,
    },
    Topic {
        run_tag: String,
        method: String,
        topic_id: String,
        topic_size: usize,
        stop_rank: usize,
        extra_examined: usize,
        effort: usize,
        recall: f64,
        acceptable: bool,
        predicted: bool,
    },
    Run {
        run_tag: String,
        method: String,
        aurc: f64,
        topics: usize,
        total_effort: usize,
        mean_pct_effort_saved: f64,
        reliability: f64,
    },
    Summary {
        group: String,
        #[serde(flatten)]
        summary: GroupSummary,
    },
    Stratum {
        group: String,
        position: usize,
        run_tag: String,
        aurc: f64,
    },
    Band {
        group: String,
        low: f64,
        high: f64,
        tolerance: f64,
        min_aurc: f64,
        max_aurc: f64,
        pass: bool,
    },
    Coverage {
        #[serde(flatten)]
        summary: pstop::simulate::CoverageSummary,
        confidence: f64,
    },
    MethodSimulation {
        #[serde(flatten)]
        result: pstop::simulate::MethodSimulation,
    },
}

pub fn params_record(params: &MethodParams, seed: u64, methods: &[pstop::Method]) -> Record {
    Record::Params {
        params: *params,
        seed,
        methods: methods.iter().map(|m| m.name()).collect(),
    }
}

/// Topic and run records for every evaluated run, sorted by run tag then
/// method order then topic id.
pub fn run_records(evals: &[RunEvaluation]) -> Vec<Record> {
    let mut out = Vec::new();
    for e in evals {
        for r in &e.reports {
            for t in &r.per_topic {
                out.push(Record::Topic {
                    run_tag: e.run_tag.clone(),
                    method: r.method_name.clone(),
                    topic_id: t.topic_id.clone(),
                    topic_size: t.topic_size,
                    stop_rank: t.stop_rank,
                    extra_examined: t.extra_examined,
                    effort: t.effort,
                    recall: t.recall,
                    acceptable: t.acceptable,
                    predicted: t.predicted,
                });
            }
            out.push(Record::Run {
                run_tag: e.run_tag.clone(),
                method: r.method_name.clone(),
                aurc: e.aurc,
                topics: r.per_topic.len(),
                total_effort: r.total_effort,
                mean_pct_effort_saved: r.mean_pct_effort_saved,
                reliability: r.reliability,
            });
        }
    }
    out
}

pub fn summary_records(group: &str, rows: &[GroupSummary]) -> Vec<Record> {
    rows.iter()
        .map(|s| Record::Summary {
            group: group.to_owned(),
            summary: s.clone(),
        })
        .collect()
}

pub fn to_jsonl(records: &[Record]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// A table with the columns Mean Eff., Mean % Eff. Saved and Reliability.
pub fn summary_table(title: &str, rows: &[GroupSummary]) -> String {
    let mut out = String::new();
    let (runs, topics) = rows.first().map_or((0, 0), |r| (r.runs, r.topics));
    let _ = writeln!(out, "{title} ({runs} runs, {topics} topics)");
    let _ = writeln!(
        out,
        "{:<12} {:>12} {:>18} {:>12}",
        "Method", "Mean Eff.", "Mean % Eff. Saved", "Reliability"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<12} {:>12} {:>17}% {:>12}",
            r.method_name,
            fmt_effort(r.mean_effort),
            format!("{:.1}", r.mean_pct_effort_saved),
            format!("{:.3}", r.reliability)
        );
    }
    out
}

/// Rounds to whole documents with thousands separators.
pub fn fmt_effort(v: f64) -> String {
    let whole = v.round() as i64;
    let digits = whole.abs().to_string();
    let mut grouped = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            grouped.push(',');
        }
        grouped.push(c);
    }
    if whole < 0 {
        grouped.insert(0, '-');
    }
    grouped
}

pub fn per_run_table(evals: &[RunEvaluation]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Per run");
    let _ = writeln!(
        out,
        "{:<40} {:>7} {:<12} {:>10} {:>9} {:>8}",
        "Run", "AURC", "Method", "Effort", "% Saved", "Rel."
    );
    for e in evals {
        for r in &e.reports {
            let _ = writeln!(
                out,
                "{:<40} {:>7.4} {:<12} {:>10} {:>8.1}% {:>8.3}",
                e.run_tag, e.aurc, r.method_name, r.total_effort, r.mean_pct_effort_saved, r.reliability
            );
        }
    }
    out
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<std::path::PathBuf> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_owned(),
        source,
    })?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| CliError::Write {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}
