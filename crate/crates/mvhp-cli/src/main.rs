//! `mvhp` — command-line workflow around mutually exciting event-stream
//! models: simulate synthetic streams, ingest raw timestamped records into
//! canonical event files, fit models by maximum likelihood, check fit
//! quality by time rescaling, attribute events to their most likely cause,
//! estimate influence matrices, and run the sliding-window pipeline end to
//! end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or model error, 3 pipeline
//! completed but some windows failed.

use clap::{Args, Parser, Subcommand, ValueEnum};
use mvhp::{
    attribute_window, configure_threads, export_streams, fit_mle, granger_edges, ingest,
    pim_estimate, plan_windows, pooled_gof, render_heatmap_svg, run_pipeline, simulate_branching,
    simulate_thinning, write_results, EventStreams, FitConfig, IngestConfig, IngestFormat,
    IngestSummary, KernelSpec, ModelFile, MvhpModel, PipelineConfig, SimConfig, TimeUnit,
    TimelineReport,
};
use std::fs;
use std::path::{Path, PathBuf};

/// Informational print, silenced by `--quiet`.
macro_rules! info {
    ($quiet:expr, $($arg:tt)*) => {
        if !$quiet {
            println!($($arg)*);
        }
    };
}

#[derive(Parser)]
#[command(
    name = "mvhp",
    version,
    about = "Mutually exciting event-stream models: simulate, ingest, fit, diagnose, attribute",
    propagate_version = true
)]
struct Cli {
    /// Suppress informational output; write artifacts and errors only
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    Simulate(SimulateArgs),
    Ingest(IngestArgs),
    Fit(FitArgs),
    Gof(GofArgs),
    Attribute(AttributeArgs),
    Pim(PimArgs),
    Pipeline(PipelineArgs),
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
    Canonical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum UnitArg {
    Seconds,
    Hours,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SamplerArg {
    Thinning,
    Branching,
}

/// How to read a timestamped event file. Shared by every subcommand that
/// loads one.
#[derive(Args)]
struct SourceArgs {
    /// Input format; detected from the file head when omitted
    #[arg(long, value_enum)]
    format: Option<FormatArg>,

    /// Unit of bare numeric timestamps in raw inputs (canonical files are
    /// always hours)
    #[arg(long, value_enum, default_value_t = UnitArg::Seconds)]
    unit: UnitArg,

    /// Observation span "START:END" in hours on the input time axis; events
    /// outside are dropped and times are shifted to start at zero. Defaults
    /// to the hull of the parsed events
    #[arg(long, value_name = "START:END", value_parser = parse_span)]
    span: Option<(f64, f64)>,

    /// Keep only rows carrying this stance tag
    #[arg(long)]
    stance: Option<String>,

    /// Keep duplicate timestamps as-is instead of applying deterministic
    /// micro-offsets
    #[arg(long)]
    no_jitter: bool,

    /// Abort on the first malformed row instead of skipping and counting it
    #[arg(long)]
    fail_fast: bool,
}

impl SourceArgs {
    fn config(&self, min_events: usize) -> IngestConfig {
        IngestConfig {
            min_events,
            stance_filter: self.stance.clone(),
            numeric_unit: match self.unit {
                UnitArg::Seconds => TimeUnit::Seconds,
                UnitArg::Hours => TimeUnit::Hours,
            },
            span_override: self.span.map(|(a, b)| [a, b]),
            jitter: !self.no_jitter,
            fail_fast: self.fail_fast,
            format: self.format.map(|f| match f {
                FormatArg::Csv => IngestFormat::Csv,
                FormatArg::Jsonl => IngestFormat::Jsonl,
                FormatArg::Canonical => IngestFormat::Canonical,
            }),
        }
    }
}

/// Maximum-likelihood settings shared by `fit` and `pipeline`.
#[derive(Args)]
struct FitFlags {
    /// Exponential kernel decay rate per hour; a fixed hyperparameter,
    /// never estimated
    #[arg(long, default_value_t = 1.0)]
    beta: f64,

    /// Ridge penalty weight on excitation entries; base rates are never
    /// penalized
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,

    /// Newton iteration cap per process row
    #[arg(long, default_value_t = 500)]
    max_iterations: usize,

    /// Convergence threshold on the projected-gradient max-norm
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,

    /// Lower bound keeping every fitted parameter positive
    #[arg(long, default_value_t = 1e-10)]
    floor: f64,
}

impl FitFlags {
    fn config(&self) -> FitConfig {
        FitConfig {
            ridge: self.ridge,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            floor: self.floor,
        }
    }
}

/// Simulate a synthetic event stream and write it with its generating model
#[derive(Args)]
struct SimulateArgs {
    /// Generating model as JSON {"P":..,"beta":..,"b":[..],"a":[[..]]}
    #[arg(long, value_name = "FILE", conflicts_with_all = ["base", "excitation"])]
    model: Option<PathBuf>,

    /// Inline base rates, comma-separated events/hour, one per process
    #[arg(long, value_name = "B0,B1,..", requires = "excitation")]
    base: Option<String>,

    /// Inline excitation matrix "a00,a01;a10,a11"; row i holds the effects
    /// onto process i
    #[arg(long, value_name = "ROW;ROW;..", requires = "base")]
    excitation: Option<String>,

    /// Kernel decay rate per hour for inline models
    #[arg(long, default_value_t = 1.0)]
    beta: f64,

    /// Simulation horizon in hours; events fall in [0, HORIZON)
    #[arg(long)]
    horizon: f64,

    /// RNG seed; drawn and printed when omitted so any run can be replayed
    #[arg(long)]
    seed: Option<u64>,

    /// Sampling algorithm; both draw from the same process law
    #[arg(long, value_enum, default_value_t = SamplerArg::Thinning)]
    sampler: SamplerArg,

    /// Abort if a run produces more than this many events
    #[arg(long, default_value_t = 10_000_000)]
    max_events: usize,

    /// Narrative labels, comma-separated, one per process
    #[arg(long, value_name = "L0,L1,..")]
    labels: Option<String>,

    /// Output event file (canonical CSV: timestamp_hours,narrative)
    #[arg(long, default_value = "events.csv")]
    out: PathBuf,

    /// Output file for the generating model JSON
    #[arg(long, default_value = "model.json")]
    model_out: PathBuf,
}

/// Convert raw labeled records into the canonical event-stream CSV
#[derive(Args)]
struct IngestArgs {
    /// Input file: CSV "timestamp,labels,stance" (labels ;-separated), JSON
    /// lines with the same fields, or canonical CSV
    #[arg(long)]
    input: PathBuf,

    #[command(flatten)]
    source: SourceArgs,

    /// Keep only narratives carrying at least this many events
    #[arg(long, default_value_t = 100_000)]
    min_events: usize,

    /// Output canonical CSV
    #[arg(long, default_value = "events.csv")]
    out: PathBuf,

    /// Also write the ingest summary as JSON
    #[arg(long, value_name = "FILE")]
    summary_out: Option<PathBuf>,
}

/// Fit a model to an event stream by per-process maximum likelihood
#[derive(Args)]
struct FitArgs {
    /// Event file (canonical CSV, raw CSV, or JSONL)
    #[arg(long)]
    events: PathBuf,

    #[command(flatten)]
    source: SourceArgs,

    /// Keep only narratives carrying at least this many events
    #[arg(long, default_value_t = 1)]
    min_events: usize,

    #[command(flatten)]
    fit: FitFlags,

    /// Output model JSON
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
}

/// Check a fitted model against an event stream by time rescaling
#[derive(Args)]
struct GofArgs {
    /// Event file (canonical CSV, raw CSV, or JSONL)
    #[arg(long)]
    events: PathBuf,

    #[command(flatten)]
    source: SourceArgs,

    /// Keep only narratives carrying at least this many events
    #[arg(long, default_value_t = 1)]
    min_events: usize,

    /// Model JSON to evaluate
    #[arg(long)]
    model: PathBuf,

    /// Gate threshold: the stream passes when the pooled KS p-value is at
    /// least this
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,

    /// Write pooled probability-probability points as 2-column CSV
    #[arg(long, value_name = "FILE")]
    pp_out: Option<PathBuf>,

    /// Write the full report as JSON
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Attribute every event to its most likely cause under a fitted model
#[derive(Args)]
struct AttributeArgs {
    /// Event file (canonical CSV, raw CSV, or JSONL)
    #[arg(long)]
    events: PathBuf,

    #[command(flatten)]
    source: SourceArgs,

    /// Keep only narratives carrying at least this many events
    #[arg(long, default_value_t = 1)]
    min_events: usize,

    /// Model JSON to attribute under
    #[arg(long)]
    model: PathBuf,

    /// Output CSV, one row per event with cause probabilities
    #[arg(long, default_value = "attributions.csv")]
    out: PathBuf,
}

/// Estimate the influence matrix (most-likely-cause frequencies)
#[derive(Args)]
struct PimArgs {
    /// Event file (canonical CSV, raw CSV, or JSONL)
    #[arg(long)]
    events: PathBuf,

    #[command(flatten)]
    source: SourceArgs,

    /// Keep only narratives carrying at least this many events
    #[arg(long, default_value_t = 1)]
    min_events: usize,

    /// Model JSON to attribute under
    #[arg(long)]
    model: PathBuf,

    /// Output influence matrix CSV
    #[arg(long, default_value = "pim.csv")]
    out: PathBuf,

    /// Also render the matrix as an SVG heat map
    #[arg(long, value_name = "FILE")]
    svg: Option<PathBuf>,

    /// Also write the fitted excitation edges as JSON
    #[arg(long, value_name = "FILE")]
    edges_out: Option<PathBuf>,

    /// Excitation entries above this count as edges
    #[arg(long, default_value_t = 1e-10)]
    epsilon: f64,
}

/// Ingest, fit, gate, and attribute over a sliding window schedule
#[derive(Args)]
struct PipelineArgs {
    /// Input file: raw CSV/JSONL records or a canonical event CSV
    #[arg(long)]
    input: PathBuf,

    #[command(flatten)]
    source: SourceArgs,

    /// Keep only narratives carrying at least this many events
    #[arg(long, default_value_t = 100_000)]
    min_events: usize,

    /// Window length in hours
    #[arg(long, default_value_t = 48.0)]
    window_hours: f64,

    /// Hours between consecutive window starts
    #[arg(long, default_value_t = 24.0)]
    stride_hours: f64,

    #[command(flatten)]
    fit: FitFlags,

    /// Fit-quality gate: a window passes when its pooled KS p-value is at
    /// least this
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,

    /// Timeline keeps cross-narrative influences strictly above this value
    #[arg(long, default_value_t = 0.2)]
    min_pim: f64,

    /// Worker threads for per-window fits; defaults to the core count
    #[arg(long, env = "MVHP_THREADS")]
    threads: Option<usize>,

    /// Results directory
    #[arg(long, env = "MVHP_OUT_DIR", default_value = "results")]
    out: PathBuf,
}

/// Print a human-readable summary of a pipeline results directory
#[derive(Args)]
struct ReportArgs {
    /// Results directory written by `mvhp pipeline`
    #[arg(long, env = "MVHP_OUT_DIR", default_value = "results")]
    results: PathBuf,
}

enum CliError {
    Usage(String),
    Data(String),
}

type CmdResult = Result<i32, CliError>;

impl From<mvhp::Error> for CliError {
    fn from(err: mvhp::Error) -> Self {
        CliError::Data(err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Data(err.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::Data(err.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        CliError::Data(err.to_string())
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // --help and --version also land here; they exit 0, real parse
        // errors exit 1.
        Err(err) => {
            let code = i32::from(err.use_stderr());
            let _ = err.print();
            std::process::exit(code);
        }
    };
    std::process::exit(run(cli));
}

fn run(cli: Cli) -> i32 {
    // Only the pipeline fans out; every other subcommand runs single-threaded.
    match &cli.command {
        Command::Pipeline(args) => configure_threads(args.threads),
        _ => configure_threads(Some(1)),
    }
    let quiet = cli.quiet;
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(args, quiet),
        Command::Ingest(args) => cmd_ingest(args, quiet),
        Command::Fit(args) => cmd_fit(args, quiet),
        Command::Gof(args) => cmd_gof(args, quiet),
        Command::Attribute(args) => cmd_attribute(args, quiet),
        Command::Pim(args) => cmd_pim(args, quiet),
        Command::Pipeline(args) => cmd_pipeline(args, quiet),
        Command::Report(args) => cmd_report(args),
    };
    match outcome {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn parse_span(raw: &str) -> Result<(f64, f64), String> {
    let (a, b) = raw
        .split_once(':')
        .ok_or_else(|| String::from("expected START:END in hours"))?;
    let start: f64 = a
        .trim()
        .parse()
        .map_err(|e| format!("bad span start: {e}"))?;
    let end: f64 = b.trim().parse().map_err(|e| format!("bad span end: {e}"))?;
    if !start.is_finite() || !end.is_finite() || start >= end {
        return Err(String::from("span must satisfy START < END"));
    }
    Ok((start, end))
}

fn parse_rates(raw: &str) -> Result<Vec<f64>, CliError> {
    raw.split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("bad rate list {raw:?}: {e}")))
}

fn parse_matrix(raw: &str) -> Result<Vec<Vec<f64>>, CliError> {
    raw.split(';').map(parse_rates).collect()
}

fn load_model_file(path: &Path) -> Result<MvhpModel, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(file.to_model()?)
}

fn load_streams(
    path: &Path,
    source: &SourceArgs,
    min_events: usize,
) -> Result<(EventStreams, Vec<String>, IngestSummary), CliError> {
    ingest(path, &source.config(min_events))
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn default_labels(p: usize) -> Vec<String> {
    // Zero-padded so the lexicographic narrative order used on ingest
    // matches the process index order.
    let width = p.saturating_sub(1).to_string().len();
    (0..p).map(|i| format!("proc_{i:0width$}")).collect()
}

fn split_labels(raw: &str, p: usize) -> Result<Vec<String>, CliError> {
    let labels: Vec<String> = raw.split(',').map(|s| s.trim().to_string()).collect();
    if labels.len() != p {
        return Err(CliError::Usage(format!(
            "{} labels given for {p} processes",
            labels.len()
        )));
    }
    for (i, label) in labels.iter().enumerate() {
        if label.is_empty() {
            return Err(CliError::Usage(format!("label {i} is empty")));
        }
        if labels[..i].contains(label) {
            return Err(CliError::Usage(format!("duplicate label {label:?}")));
        }
    }
    Ok(labels)
}

fn cmd_simulate(args: SimulateArgs, quiet: bool) -> CmdResult {
    let model = if let Some(path) = &args.model {
        load_model_file(path)?
    } else {
        let base = parse_rates(args.base.as_deref().ok_or_else(|| {
            CliError::Usage(String::from(
                "provide --model FILE or inline --base and --excitation",
            ))
        })?)?;
        let excitation = parse_matrix(args.excitation.as_deref().unwrap())?;
        MvhpModel::new(base, excitation, KernelSpec::new(args.beta)?)?
    };
    let labels = match &args.labels {
        Some(raw) => split_labels(raw, model.num_processes())?,
        None => default_labels(model.num_processes()),
    };

    let seed = args.seed.unwrap_or_else(rand::random::<u64>);
    println!("seed: {seed}");

    let config = SimConfig::new(args.horizon, seed)?.with_max_events(args.max_events);
    let streams = match args.sampler {
        SamplerArg::Thinning => simulate_thinning(&model, config)?,
        SamplerArg::Branching => simulate_branching(&model, config)?,
    };

    export_streams(&streams, &labels, &args.out)?;
    let file = ModelFile::from_model(&model, None);
    fs::write(&args.model_out, serde_json::to_string_pretty(&file)?)?;

    for (i, label) in labels.iter().enumerate() {
        info!(quiet, "{label}: {} events", streams.counts()[i]);
    }
    info!(
        quiet,
        "total: {} events on [0, {}) hours",
        streams.total_events(),
        args.horizon
    );
    info!(
        quiet,
        "wrote {} and {}",
        args.out.display(),
        args.model_out.display()
    );
    info!(
        quiet,
        "note: the event file stores no span; pass --span 0:{} when reading it back", args.horizon
    );
    let mut sorted = labels.clone();
    sorted.sort();
    if sorted != labels {
        info!(
            quiet,
            "note: narratives are indexed lexicographically on ingest; process order there will be {}",
            sorted.join(", ")
        );
    }
    Ok(0)
}

fn format_name(format: IngestFormat) -> &'static str {
    match format {
        IngestFormat::Csv => "csv",
        IngestFormat::Jsonl => "jsonl",
        IngestFormat::Canonical => "canonical",
    }
}

fn cmd_ingest(args: IngestArgs, quiet: bool) -> CmdResult {
    let (streams, labels, summary) = load_streams(&args.input, &args.source, args.min_events)?;
    export_streams(&streams, &labels, &args.out)?;
    if let Some(path) = &args.summary_out {
        fs::write(path, serde_json::to_string_pretty(&summary)?)?;
    }

    info!(
        quiet,
        "{}: {} of {} rows parsed ({} malformed, {} stance-filtered, {} outside span)",
        format_name(summary.format),
        summary.parsed_rows,
        summary.total_rows,
        summary.malformed.len(),
        summary.stance_filtered,
        summary.outside_span
    );
    let kept: Vec<String> = labels
        .iter()
        .zip(&summary.events_per_stream)
        .map(|(label, n)| format!("{label}={n}"))
        .collect();
    info!(
        quiet,
        "kept {} narratives: {}",
        labels.len(),
        kept.join(" ")
    );
    if !summary.dropped_narratives.is_empty() {
        let dropped: Vec<String> = summary
            .dropped_narratives
            .iter()
            .map(|(label, n)| format!("{label}={n}"))
            .collect();
        info!(
            quiet,
            "dropped {} narratives below {} events: {}",
            dropped.len(),
            args.min_events,
            dropped.join(" ")
        );
    }
    info!(
        quiet,
        "span: {:.3} .. {:.3} h; {} duplicate timestamps offset",
        summary.span_hours[0],
        summary.span_hours[1],
        summary.jittered_events
    );
    info!(quiet, "wrote {}", args.out.display());
    Ok(0)
}

fn cmd_fit(args: FitArgs, quiet: bool) -> CmdResult {
    let (streams, labels, _) = load_streams(&args.events, &args.source, args.min_events)?;
    let report = fit_mle(
        &streams,
        KernelSpec::new(args.fit.beta)?,
        &args.fit.config(),
    )?;
    fs::write(&args.out, serde_json::to_string_pretty(&report.model)?)?;

    info!(
        quiet,
        "fitted {} processes over {:.1} h ({} events)",
        labels.len(),
        streams.span(),
        streams.total_events()
    );
    info!(quiet, "log-likelihood: {:.6}", report.loglik);
    info!(
        quiet,
        "converged: {} ({} iterations, {:.3} s)",
        report.converged,
        report.iterations,
        report.wall_time
    );
    let base: Vec<String> = report.model.b.iter().map(|v| format!("{v:.4}")).collect();
    info!(quiet, "base rates: [{}]", base.join(", "));
    for (i, row) in report.model.a.iter().enumerate() {
        let row: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
        info!(quiet, "excitation {}: [{}]", labels[i], row.join(", "));
    }
    info!(quiet, "wrote {}", args.out.display());
    if !report.converged {
        eprintln!("warning: fit did not converge within the iteration cap");
    }
    Ok(0)
}

fn cmd_gof(args: GofArgs, quiet: bool) -> CmdResult {
    let model = load_model_file(&args.model)?;
    let (streams, labels, _) = load_streams(&args.events, &args.source, args.min_events)?;
    let report = pooled_gof(&model, &streams, args.alpha)?;

    if let Some(path) = &args.pp_out {
        fs::write(path, report.pp_csv())?;
        info!(quiet, "wrote {}", path.display());
    }
    if let Some(path) = &args.out {
        fs::write(path, serde_json::to_string_pretty(&report)?)?;
        info!(quiet, "wrote {}", path.display());
    }

    for (i, per) in report.per_process.iter().enumerate() {
        match per {
            Some(ks) => info!(
                quiet,
                "{}: n={} D={:.4} p={:.4}", labels[i], ks.n, ks.statistic, ks.p_value
            ),
            None => info!(
                quiet,
                "{}: fewer than 5 rescaled intervals, skipped", labels[i]
            ),
        }
    }
    info!(
        quiet,
        "pooled: n={} D={:.4} p={:.4} (pp max deviation {:.4})",
        report.pooled.n,
        report.pooled.statistic,
        report.pooled.p_value,
        report.pp_max_abs_deviation
    );
    info!(
        quiet,
        "gate (alpha={}): {}",
        args.alpha,
        if report.passed { "passed" } else { "failed" }
    );
    Ok(0)
}

fn cmd_attribute(args: AttributeArgs, quiet: bool) -> CmdResult {
    let model = load_model_file(&args.model)?;
    let (streams, labels, _) = load_streams(&args.events, &args.source, args.min_events)?;
    let records = attribute_window(&model, &streams)?;

    let mut writer = csv::Writer::from_path(&args.out)?;
    let mut header = vec![
        String::from("target"),
        String::from("index"),
        String::from("time_hours"),
        String::from("source"),
        String::from("p_background"),
    ];
    header.extend(labels.iter().map(|l| format!("p_{l}")));
    writer.write_record(&header)?;

    let mut total = 0usize;
    let mut background = 0usize;
    for stream in &records {
        for record in stream {
            total += 1;
            let source = if record.source == 0 {
                background += 1;
                "background"
            } else {
                labels[record.source - 1].as_str()
            };
            let mut row = vec![
                labels[record.target].clone(),
                record.index.to_string(),
                format!("{:.9}", record.time),
                source.to_string(),
            ];
            row.extend(record.probabilities.iter().map(|p| p.to_string()));
            writer.write_record(&row)?;
        }
    }
    writer.flush().map_err(|e| CliError::Data(e.to_string()))?;

    info!(
        quiet,
        "attributed {total} events; background is the most likely cause for {background}"
    );
    info!(quiet, "wrote {}", args.out.display());
    Ok(0)
}

fn cmd_pim(args: PimArgs, quiet: bool) -> CmdResult {
    let model = load_model_file(&args.model)?;
    let (streams, labels, _) = load_streams(&args.events, &args.source, args.min_events)?;
    let pim = pim_estimate(&model, &streams)?;

    fs::write(&args.out, pim.to_csv(&labels)?)?;
    info!(quiet, "wrote {}", args.out.display());
    if let Some(path) = &args.svg {
        fs::write(path, render_heatmap_svg(&pim, &labels)?)?;
        info!(quiet, "wrote {}", path.display());
    }
    if let Some(path) = &args.edges_out {
        let edges = granger_edges(&model, args.epsilon)?;
        fs::write(path, serde_json::to_string_pretty(&edges)?)?;
        info!(quiet, "wrote {}", path.display());
    }

    for (i, label) in labels.iter().enumerate() {
        match &pim.rows[i] {
            Some(row) => {
                let cells: Vec<String> = labels
                    .iter()
                    .zip(&row[1..])
                    .map(|(l, v)| format!("{l}={v:.3}"))
                    .collect();
                info!(
                    quiet,
                    "{label}: background={:.3} {}",
                    row[0],
                    cells.join(" ")
                );
            }
            None => info!(quiet, "{label}: undefined (no events)"),
        }
    }
    Ok(0)
}

fn cmd_pipeline(args: PipelineArgs, quiet: bool) -> CmdResult {
    let (streams, labels, _) = load_streams(&args.input, &args.source, args.min_events)?;
    let plan = plan_windows(
        [streams.t_start(), streams.t_end()],
        args.window_hours,
        args.stride_hours,
    )?;
    let config = PipelineConfig {
        beta: args.fit.beta,
        fit: args.fit.config(),
        alpha: args.alpha,
        min_pim: args.min_pim,
    };
    let result = run_pipeline(&streams, &plan, &config)?;
    write_results(&args.out, &result, &labels)?;

    let failed = result.windows.iter().filter(|w| w.error.is_some()).count();
    let gated = result.windows.iter().filter(|w| w.gate_passed).count();
    let converged = result
        .windows
        .iter()
        .filter(|w| w.fit.as_ref().is_some_and(|f| f.converged))
        .count();
    info!(
        quiet,
        "{} narratives, {} events over {:.1} h",
        labels.len(),
        streams.total_events(),
        streams.span()
    );
    info!(
        quiet,
        "{} windows of {} h every {} h: {converged} converged, {gated} passed the fit-quality gate, {failed} failed",
        plan.windows.len(),
        plan.length,
        plan.stride
    );
    info!(
        quiet,
        "timeline: {} cross-narrative influences above {}",
        result.timeline.entries.len(),
        args.min_pim
    );
    info!(quiet, "wrote {}", args.out.display());
    if failed > 0 {
        eprintln!(
            "warning: {failed} of {} windows failed; see {}/index.json",
            result.windows.len(),
            args.out.display()
        );
        return Ok(3);
    }
    Ok(0)
}

fn cmd_report(args: ReportArgs) -> CmdResult {
    let read = |name: &str| -> Result<String, CliError> {
        let path = args.results.join(name);
        fs::read_to_string(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    };
    let index: serde_json::Value = serde_json::from_str(&read("index.json")?)?;
    let timeline: TimelineReport = serde_json::from_str(&read("timeline.json")?)?;
    let labels: Vec<String> = serde_json::from_value(index["labels"].clone())?;

    let windows = index["windows"].as_array().cloned().unwrap_or_default();
    let total = windows.len();
    let gated = windows
        .iter()
        .filter(|w| w["gate_passed"].as_bool() == Some(true))
        .count();
    let failed = windows.iter().filter(|w| !w["error"].is_null()).count();
    let plan = &index["plan"];

    println!("results: {}", args.results.display());
    println!("narratives: {}", labels.join(", "));
    println!(
        "span: {} .. {} h; {total} windows of {} h every {} h",
        plan["span"][0], plan["span"][1], plan["length"], plan["stride"]
    );
    println!("gate passed: {gated}/{total}; failed windows: {failed}");
    println!(
        "cross-narrative influence timeline (values above {}):",
        timeline.min_pim
    );
    print!("{}", timeline.to_markdown(&labels)?);
    Ok(0)
}
