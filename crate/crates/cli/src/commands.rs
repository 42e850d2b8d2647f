//! Subcommand implementations. Each returns the paths it wrote along with
//! the data behind them so tests can inspect both.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use pstop::ingest::validate_dataset;
use pstop::methods::poisson_stop_traced;
use pstop::metrics::{aurc, stratify_runs, GroupSummary, RunScore};
use pstop::ratefit::{bin_prefix, fit_exponential};
use pstop::simulate::{coverage_experiment, method_experiment, synthetic_run, RateFamily, MIN_TRIALS};
use pstop::{ingest, Method, RateModel};

use crate::config::ParamArgs;
use crate::error::{CliError, CliResult};
use crate::harness::{evaluate_runs, load_inputs, load_qrels, load_runs, parse_methods, summarize, RunEvaluation};
use crate::report::{self, per_run_table, summary_records, summary_table, to_jsonl, write_file, Record};
use crate::svg;

pub const DEFAULT_METHODS: &str = "tm,km-default,km-tuned,pp,or";

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Run files (six whitespace-separated columns).
    #[arg(long, num_args = 1.., required = true)]
    pub runs: Vec<PathBuf>,
    /// Qrels file (four columns, label > 0 is relevant).
    #[arg(long)]
    pub qrels: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Comma-separated methods: pp, tm, km, km-default, km-tuned, km:<eps>, or.
    #[arg(long, default_value = DEFAULT_METHODS)]
    pub methods: String,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Seed for the target method's random sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug)]
pub struct EvaluateOutput {
    pub evaluations: Vec<RunEvaluation>,
    pub summary: Vec<GroupSummary>,
    pub text: String,
    pub jsonl: String,
    pub files: Vec<PathBuf>,
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<EvaluateOutput> {
    let params = args.params.resolve()?;
    let methods = parse_methods(&args.methods, &params)?;
    let inputs = load_inputs(&args.input.runs, &args.input.qrels)?;
    let evaluations = evaluate_runs(&inputs.runs, &methods, &params, args.seed)?;
    let all: Vec<&RunEvaluation> = evaluations.iter().collect();
    let summary = summarize(&all, &methods)?;

    let mut records = vec![report::params_record(&params, args.seed, &methods)];
    records.extend(report::run_records(&evaluations));
    records.extend(summary_records("all", &summary));
    let jsonl = to_jsonl(&records);

    let mut text = summary_table("All runs", &summary);
    text.push('\n');
    text.push_str(&per_run_table(&evaluations));
    append_warnings(&mut text, &inputs.warnings);

    let files = vec![
        write_file(&args.out_dir, "report.txt", &text)?,
        write_file(&args.out_dir, "report.jsonl", &jsonl)?,
    ];
    Ok(EvaluateOutput {
        evaluations,
        summary,
        text,
        jsonl,
        files,
    })
}

fn append_warnings(text: &mut String, warnings: &[String]) {
    if !warnings.is_empty() {
        text.push('\n');
        for w in warnings {
            let _ = writeln!(text, "warning: {w}");
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct StratifyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value = DEFAULT_METHODS)]
    pub methods: String,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

/// Expected AURC range of a stratum on the reference collection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AurcBand {
    pub low: f64,
    pub high: f64,
    pub tolerance: f64,
}

pub const TOP_BAND: AurcBand = AurcBand {
    low: 0.92,
    high: 0.93,
    tolerance: 0.01,
};
pub const BOTTOM_BAND: AurcBand = AurcBand {
    low: 0.48,
    high: 0.60,
    tolerance: 0.02,
};

impl AurcBand {
    pub fn contains_all(&self, group: &[RunScore]) -> bool {
        group
            .iter()
            .all(|r| r.aurc >= self.low - self.tolerance && r.aurc <= self.high + self.tolerance)
    }
}

#[derive(Debug)]
pub struct StratifyOutput {
    pub strata: pstop::metrics::Strata,
    /// (group, per-method rows) for all, top, middle, bottom.
    pub groups: Vec<(String, Vec<GroupSummary>)>,
    pub top_band_pass: bool,
    pub bottom_band_pass: bool,
    pub text: String,
    pub jsonl: String,
    pub files: Vec<PathBuf>,
}

pub fn cmd_stratify(args: &StratifyArgs) -> CliResult<StratifyOutput> {
    let params = args.params.resolve()?;
    let methods = parse_methods(&args.methods, &params)?;
    let inputs = load_inputs(&args.input.runs, &args.input.qrels)?;
    if inputs.runs.len() < 15 {
        return Err(CliError::Usage(format!(
            "stratification needs at least 15 runs, got {}",
            inputs.runs.len()
        )));
    }
    let strata = stratify_runs(&inputs.runs)?;
    let evaluations = evaluate_runs(&inputs.runs, &methods, &params, args.seed)?;
    let pick = |group: &[RunScore]| -> Vec<&RunEvaluation> {
        group
            .iter()
            .filter_map(|s| evaluations.iter().find(|e| e.run_tag == s.run_tag))
            .collect()
    };
    let all: Vec<&RunEvaluation> = evaluations.iter().collect();
    let groups = vec![
        ("all".to_owned(), summarize(&all, &methods)?),
        ("top".to_owned(), summarize(&pick(&strata.top), &methods)?),
        ("middle".to_owned(), summarize(&pick(&strata.middle), &methods)?),
        ("bottom".to_owned(), summarize(&pick(&strata.bottom), &methods)?),
    ];
    let top_band_pass = TOP_BAND.contains_all(&strata.top);
    let bottom_band_pass = BOTTOM_BAND.contains_all(&strata.bottom);

    let mut records = vec![report::params_record(&params, args.seed, &methods)];
    for (name, group) in [
        ("top", &strata.top),
        ("middle", &strata.middle),
        ("bottom", &strata.bottom),
    ] {
        for s in group.iter() {
            let position = strata.ranked.iter().position(|r| r.run_tag == s.run_tag).unwrap_or(0) + 1;
            records.push(Record::Stratum {
                group: name.into(),
                position,
                run_tag: s.run_tag.clone(),
                aurc: s.aurc,
            });
        }
    }
    for (name, band, group, pass) in [
        ("top", TOP_BAND, &strata.top, top_band_pass),
        ("bottom", BOTTOM_BAND, &strata.bottom, bottom_band_pass),
    ] {
        let (min_aurc, max_aurc) = min_max(group.iter().map(|r| r.aurc));
        records.push(Record::Band {
            group: name.into(),
            low: band.low,
            high: band.high,
            tolerance: band.tolerance,
            min_aurc,
            max_aurc,
            pass,
        });
    }
    for (name, rows) in &groups {
        records.extend(summary_records(name, rows));
    }
    let jsonl = to_jsonl(&records);

    let mut text = String::new();
    let _ = writeln!(text, "Runs ranked by mean AURC");
    for (i, r) in strata.ranked.iter().enumerate() {
        let _ = writeln!(text, "{:>3}. {:<40} {:.4}", i + 1, r.run_tag, r.aurc);
    }
    text.push('\n');
    for (label, band, group, pass) in [
        ("top five", TOP_BAND, &strata.top, top_band_pass),
        ("bottom five", BOTTOM_BAND, &strata.bottom, bottom_band_pass),
    ] {
        let (lo, hi) = min_max(group.iter().map(|r| r.aurc));
        let _ = writeln!(
            text,
            "{label} AURC {lo:.4}..{hi:.4}, expected {:.2}..{:.2} ± {:.2}: {}",
            band.low,
            band.high,
            band.tolerance,
            if pass { "pass" } else { "WARN" }
        );
    }
    for (name, rows) in &groups {
        text.push('\n');
        let title = match name.as_str() {
            "all" => "All runs".to_owned(),
            other => format!("{}{} five runs", other[..1].to_uppercase(), &other[1..]),
        };
        text.push_str(&summary_table(&title, rows));
    }
    append_warnings(&mut text, &inputs.warnings);

    let files = vec![
        write_file(&args.out_dir, "stratify.txt", &text)?,
        write_file(&args.out_dir, "stratify.jsonl", &jsonl)?,
    ];
    Ok(StratifyOutput {
        strata,
        groups,
        top_band_pass,
        bottom_band_pass,
        text,
        jsonl,
        files,
    })
}

fn min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

#[derive(Debug, Clone, Args)]
pub struct PlotArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Topic whose gain curve is plotted.
    #[arg(long)]
    pub topic: String,
    /// Run to take the topic from; defaults to the first run (by tag).
    #[arg(long)]
    pub run_tag: Option<String>,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    /// The model the stopping loop last accepted.
    Accepted,
    /// No model was accepted; fitted over the whole ranking instead.
    WholeTopic,
}

#[derive(Debug)]
pub struct PlotOutput {
    pub model: RateModel,
    pub source: ModelSource,
    /// (rank, actual cumulative relevant, Σ_{i≤rank} λ(i)) from rank 0.
    pub gain: Vec<(usize, usize, f64)>,
    /// (run tag, AURC, oracle effort, PP effort).
    pub effort_vs_aurc: Vec<(String, f64, usize, usize)>,
    pub files: Vec<PathBuf>,
}

fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn cmd_plot_data(args: &PlotArgs) -> CliResult<PlotOutput> {
    let params = args.params.resolve()?;
    let inputs = load_inputs(&args.input.runs, &args.input.qrels)?;
    let run = match &args.run_tag {
        Some(tag) => inputs
            .runs
            .iter()
            .find(|r| r.run_tag() == tag)
            .ok_or_else(|| CliError::Usage(format!("no run tagged {tag}")))?,
        None => &inputs.runs[0],
    };
    let topic = run
        .topic(&args.topic)
        .ok_or_else(|| CliError::Usage(format!("topic {} not in run {}", args.topic, run.run_tag())))?;

    let (outcome, trace) = poisson_stop_traced(topic, &params);
    let (model, source) = match trace.accepted_model() {
        Some(m) => (m, ModelSource::Accepted),
        None => {
            let n = topic.len();
            let binned = bin_prefix(topic, n, params.beta_size(n))?;
            (fit_exponential(&binned)?, ModelSource::WholeTopic)
        }
    };

    let mut gain = Vec::with_capacity(topic.len() + 1);
    let mut estimated = 0.0;
    gain.push((0, 0, 0.0));
    for rank in 1..=topic.len() {
        estimated += model.d() * (model.k() * rank as f64).exp();
        gain.push((rank, topic.rel_at(rank)?, estimated));
    }

    let evals = evaluate_runs(&inputs.runs, &[Method::Oracle, Method::Poisson], &params, 0)?;
    let effort_vs_aurc: Vec<(String, f64, usize, usize)> = evals
        .iter()
        .map(|e| {
            (
                e.run_tag.clone(),
                e.aurc,
                e.reports[0].total_effort,
                e.reports[1].total_effort,
            )
        })
        .collect();

    let stem = format!("{}_{}", file_stem(run.run_tag()), file_stem(topic.topic_id()));
    let mut csv = String::from("rank,actual,estimated\n");
    for (rank, actual, est) in &gain {
        let _ = writeln!(csv, "{rank},{actual},{est}");
    }
    let actual_pts: Vec<(f64, f64)> = gain.iter().map(|&(r, a, _)| (r as f64, a as f64)).collect();
    let est_pts: Vec<(f64, f64)> = gain.iter().map(|&(r, _, e)| (r as f64, e)).collect();
    let gain_svg = svg::chart(
        &format!("{} / {}", run.run_tag(), topic.topic_id()),
        "rank",
        "relevant documents",
        &[
            svg::Series {
                label: "actual",
                points: &actual_pts,
            },
            svg::Series {
                label: "estimated by fitted rate",
                points: &est_pts,
            },
        ],
        svg::Style::Lines,
    );
    let meta = serde_json::json!({
        "run_tag": run.run_tag(),
        "topic_id": topic.topic_id(),
        "model_source": source,
        "d": model.d(),
        "k": model.k(),
        "stop_rank": outcome.stop_rank,
        "predicted": outcome.predicted,
        "total_relevant": topic.total_relevant(),
        "aurc": aurc(topic).ok(),
    });

    let mut fig1 = String::from("run_tag,aurc,oracle_effort,pp_effort\n");
    for (tag, a, or, pp) in &effort_vs_aurc {
        let _ = writeln!(fig1, "{tag},{a},{or},{pp}");
    }
    let or_pts: Vec<(f64, f64)> = effort_vs_aurc.iter().map(|(_, a, o, _)| (*a, *o as f64)).collect();
    let pp_pts: Vec<(f64, f64)> = effort_vs_aurc.iter().map(|(_, a, _, p)| (*a, *p as f64)).collect();
    let fig1_svg = svg::chart(
        "Oracle and Poisson effort versus AURC",
        "AURC",
        "effort (documents)",
        &[
            svg::Series {
                label: "OR",
                points: &or_pts,
            },
            svg::Series {
                label: "PP",
                points: &pp_pts,
            },
        ],
        svg::Style::Markers,
    );

    let files = vec![
        write_file(&args.out_dir, &format!("gain_{stem}.csv"), &csv)?,
        write_file(&args.out_dir, &format!("gain_{stem}.svg"), &gain_svg)?,
        write_file(&args.out_dir, &format!("fit_{stem}.json"), &format!("{meta:#}\n"))?,
        write_file(&args.out_dir, "effort_vs_aurc.csv", &fig1)?,
        write_file(&args.out_dir, "effort_vs_aurc.svg", &fig1_svg)?,
    ];
    Ok(PlotOutput {
        model,
        source,
        gain,
        effort_vs_aurc,
        files,
    })
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Rate family: exponential:d,k | uniform:p | step:p,cutoff | bimodal:p1,p2,cutoff
    #[arg(long, default_value = "exponential:0.5,-0.005")]
    pub family: String,
    /// Documents per synthetic topic.
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Number of seeded trials (at least 100).
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value = DEFAULT_METHODS)]
    pub methods: String,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write a synthetic run and qrels with this many topics.
    #[arg(long)]
    pub emit_topics: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug)]
pub struct SimulateOutput {
    pub coverage: pstop::simulate::CoverageSummary,
    pub methods: Vec<pstop::simulate::MethodSimulation>,
    pub text: String,
    pub jsonl: String,
    pub files: Vec<PathBuf>,
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<SimulateOutput> {
    if args.trials < MIN_TRIALS {
        return Err(CliError::Usage(format!(
            "--trials must be at least {MIN_TRIALS}, got {}",
            args.trials
        )));
    }
    if args.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let params = args.params.resolve()?;
    let methods = parse_methods(&args.methods, &params)?;
    let family: RateFamily = args
        .family
        .parse()
        .map_err(|e: pstop::Error| CliError::Usage(e.to_string()))?;

    let coverage = coverage_experiment(&family, args.n, args.trials, &params, args.seed)?;
    let sims = method_experiment(&family, args.n, args.trials, &params, args.seed, &methods)?;

    let mut records = vec![report::params_record(&params, args.seed, &methods)];
    records.push(Record::Coverage {
        summary: coverage.clone(),
        confidence: params.confidence,
    });
    records.extend(sims.iter().map(|s| Record::MethodSimulation { result: s.clone() }));
    let jsonl = to_jsonl(&records);

    let mut text = String::new();
    let _ = writeln!(
        text,
        "family {family}  n {}  trials {}  seed {}",
        args.n, args.trials, args.seed
    );
    let _ = writeln!(
        text,
        "coverage of the {:.2} upper bound: {:.4} ({}/{}, fit failures {})",
        params.confidence, coverage.coverage, coverage.covered, coverage.trials, coverage.fit_failures
    );
    text.push('\n');
    let _ = writeln!(
        text,
        "{:<12} {:>7} {:>8} {:>12} {:>12} {:>10}",
        "Method", "Topics", "Skipped", "Reliability", "Mean effort", "% Saved"
    );
    for s in &sims {
        let _ = writeln!(
            text,
            "{:<12} {:>7} {:>8} {:>12.4} {:>12.1} {:>9.1}%",
            s.method_name, s.topics, s.skipped, s.reliability, s.mean_effort, s.mean_pct_effort_saved
        );
    }

    let mut files = vec![
        write_file(&args.out_dir, "summary.txt", &text)?,
        write_file(&args.out_dir, "summary.jsonl", &jsonl)?,
    ];
    if let Some(count) = args.emit_topics {
        let run = synthetic_run("synthetic", &family, args.n, count, args.seed)?;
        files.push(write_file(&args.out_dir, "synthetic.run", &ingest::write_run(&run))?);
        files.push(write_file(
            &args.out_dir,
            "synthetic.qrels",
            &ingest::write_qrels(&run),
        )?);
    }
    Ok(SimulateOutput {
        coverage,
        methods: sims,
        text,
        jsonl,
        files,
    })
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Run files to check against the qrels (optional).
    #[arg(long, num_args = 0..)]
    pub runs: Vec<PathBuf>,
    #[arg(long)]
    pub qrels: PathBuf,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

pub fn cmd_validate(args: &ValidateArgs) -> CliResult<(ingest::ValidationSummary, Vec<PathBuf>)> {
    let qrels = load_qrels(&args.qrels)?;
    let (runs, warnings) = load_runs(&args.runs)?;
    let mut summary = validate_dataset(&runs, &qrels);
    summary.warnings.extend(warnings);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    let files = vec![
        write_file(&args.out_dir, "validation.txt", &summary.to_text())?,
        write_file(&args.out_dir, "validation.json", &(json + "\n"))?,
    ];
    Ok((summary, files))
}

pub fn ensure_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|source| CliError::Write {
        path: path.to_owned(),
        source,
    })
}
