//! Command-line front end for the `fleetbed` testbed.
//!
//! Subcommands:
//!
//! * `generate` — run a scenario through the logging server and store a log
//! * `analyze` — class balance and duplicate statistics of a stored log
//! * `compare` — distribution agreement (R²) between a baseline log and candidates
//! * `detect` — train the quantile-interval detector on a log and score it
//! * `gap` — easy-vs-hard detectability experiment per category
//! * `bench` — start-up, memory, and CPU scaling over component counts
//!
//! Exit codes: 0 on success, 1 on runtime failures, 2 on usage or input
//! validation errors. Commands never modify their input files.

mod bench;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::net::{SocketAddr, TcpListener};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use fleetbed::analysis::{
    histogram, position_heatmap, r_squared, r_squared_binned, AnalysisError, BalanceStats,
    QualityReport, QualityScan,
};
use fleetbed::detector::{
    difficulty_gap_experiment, feature, payload_feature, score, IntervalDetector, ScoreReport,
    DEFAULT_ALPHA, GAP_ALPHA, MIN_TRAINING_VALUES,
};
use fleetbed::orchestrator::{
    self, gap_sets, load_scenario, Budget, Mode, OrchestratorError, RunSummary, ScenarioConfig,
    GAP_CATEGORIES,
};
use fleetbed::record::{
    line_without_vtime, parse_record, serialize_record, DataCategory, DifficultyLevel, Label,
    LogRecord, Payload,
};
use fleetbed::server::{
    serve, ClockSource, IngestStats, LiveDetector, Server, ServerConfig, ServerSink, TcpSink,
    Verdict,
};
use fleetbed::sim2d::DEFAULT_ENV_SIZE;

#[derive(Parser)]
#[command(
    name = "fleetbed",
    version,
    about = "Reproducible connected-fleet telemetry testbed: log generation, \
             dataset quality, and detector experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario end to end and store the resulting log
    Generate(GenerateArgs),
    /// Class balance and duplicate statistics of a stored log
    Analyze(AnalyzeArgs),
    /// Distribution agreement (R²) between a baseline log and candidate logs
    Compare(CompareArgs),
    /// Train the interval detector on a log's normal traffic and score it
    Detect(DetectArgs),
    /// Difficulty-gap experiment: easy vs hard detectability per category
    Gap(GapArgs),
    /// Scaling benchmark over component counts
    Bench(bench::BenchArgs),
    /// One benchmark cycle (spawned by `bench`)
    #[command(hide = true)]
    BenchCycle(bench::BenchCycleArgs),
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Generate(args) => generate(args),
        Command::Analyze(args) => analyze(args),
        Command::Compare(args) => compare(args),
        Command::Detect(args) => detect(args),
        Command::Gap(args) => gap(args),
        Command::Bench(args) => bench::run_bench(args),
        Command::BenchCycle(args) => bench::run_cycle(args),
    }
}

/// Input problems the user can fix (bad paths, malformed files, invalid
/// parameters). Reported with exit code 2 instead of 1.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub(crate) fn usage(message: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(message.into()))
}

/// 2 for usage and input-validation failures anywhere in the chain, 1 for
/// everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    let validation = err.chain().any(|cause| {
        cause.downcast_ref::<UsageError>().is_some()
            || matches!(
                cause.downcast_ref::<OrchestratorError>(),
                Some(
                    OrchestratorError::ReadFile { .. }
                        | OrchestratorError::Parse(_)
                        | OrchestratorError::Validation { .. }
                )
            )
    });
    if validation {
        2
    } else {
        1
    }
}

// ---------------------------------------------------------------------------
// generate

#[derive(Args)]
struct GenerateArgs {
    /// Scenario TOML file
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario's seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output log file, or a directory for the default
    /// `<scenario-stem>-<seed>.tsv` name (default directory:
    /// $FLEETBED_OUT_DIR, falling back to `.`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the scenario's scheduling mode
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Stop after this many records (overrides the scenario budget)
    #[arg(long, conflicts_with = "duration_ms")]
    records: Option<u64>,
    /// Stop at this clock time in milliseconds (overrides the scenario budget)
    #[arg(long)]
    duration_ms: Option<u64>,
    /// Also run live detection with a model saved by `detect --save-model`
    #[arg(long)]
    detect_model: Option<PathBuf>,
    /// Ship records to the server over TCP via a listener on this address
    /// instead of the in-process call path
    #[arg(long)]
    listen: Option<SocketAddr>,
    /// Write the run summary as JSON
    #[arg(long)]
    summary_json: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Deterministic discrete-event schedule on a virtual clock
    Virtual,
    /// One thread per component on wall-clock timers
    Real,
}

impl From<ModeArg> for Mode {
    fn from(mode: ModeArg) -> Mode {
        match mode {
            ModeArg::Virtual => Mode::VirtualTime,
            ModeArg::Real => Mode::RealTime,
        }
    }
}

fn generate(args: GenerateArgs) -> anyhow::Result<()> {
    let mut config = load_scenario(&args.scenario)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(mode) = args.mode {
        config.mode = mode.into();
    }
    if let Some(records) = args.records {
        config.budget = Budget::Records(records);
    }
    if let Some(ms) = args.duration_ms {
        config.budget = Budget::DurationMs(ms);
    }
    config.validate()?;

    let out = resolve_out_path(args.out, &args.scenario, config.seed);
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating output directory {}", parent.display()))?;
        }
    }
    let detector = args
        .detect_model
        .as_deref()
        .map(PretrainedDetector::load)
        .transpose()?;
    let server_config = ServerConfig {
        store: true,
        detect: detector.is_some(),
        store_path: Some(out.clone()),
    };
    let detector = detector.map(|d| Box::new(d) as Box<dyn LiveDetector>);

    let (summary, stats, verdicts) = match args.listen {
        Some(addr) => generate_over_tcp(&config, server_config, detector, addr)?,
        None => generate_in_process(&config, server_config, detector)?,
    };

    println!("scenario    {}", args.scenario.display());
    println!("seed        {}", summary.seed);
    println!("mode        {}", summary.mode);
    println!("out         {}", out.display());
    println!(
        "records     {} ({} normal, {} intrusion)",
        summary.records, summary.normal, summary.intrusions
    );
    println!(
        "ingested    {} (rejected {}, abstained {})",
        stats.ingested, stats.rejected, stats.abstained
    );
    if let Some(verdicts) = &verdicts {
        let flagged = verdicts.iter().filter(|v| **v == Verdict::Intrusion).count();
        println!("flagged     {flagged} records as intrusions");
    }
    println!("per category:");
    for (category, count) in &summary.per_category {
        println!("  {:<12} {count:>12}", category.to_string());
    }

    if let Some(path) = &args.summary_json {
        let mut value = serde_json::to_value(&summary)?;
        value["out"] = serde_json::Value::from(out.display().to_string());
        value["ingest"] = serde_json::to_value(stats)?;
        if let Some(verdicts) = &verdicts {
            let flagged = verdicts.iter().filter(|v| **v == Verdict::Intrusion).count();
            value["flagged"] = serde_json::Value::from(flagged as u64);
        }
        write_json(path, &value)?;
    }
    Ok(())
}

/// Output file for a run: an explicit file path wins, an explicit directory
/// hosts the default name, and without `--out` the default directory comes
/// from $FLEETBED_OUT_DIR (falling back to the working directory).
fn resolve_out_path(out: Option<PathBuf>, scenario: &Path, seed: u64) -> PathBuf {
    let stem = scenario
        .file_stem()
        .map_or_else(|| "run".to_owned(), |s| s.to_string_lossy().into_owned());
    let default_name = format!("{stem}-{seed}.tsv");
    match out {
        Some(path) if path.is_dir() => path.join(default_name),
        Some(path) => path,
        None => std::env::var_os("FLEETBED_OUT_DIR")
            .map_or_else(|| PathBuf::from("."), PathBuf::from)
            .join(default_name),
    }
}

fn generate_in_process(
    config: &ScenarioConfig,
    server_config: ServerConfig,
    detector: Option<Box<dyn LiveDetector>>,
) -> anyhow::Result<(RunSummary, IngestStats, Option<Vec<Verdict>>)> {
    let detecting = server_config.detect;
    let mut server = Server::new(server_config, detector, ClockSource::Virtual(0))?;
    let summary = {
        let mut sink = ServerSink {
            server: &mut server,
        };
        orchestrator::run(config, &mut sink)?
    };
    server.finish()?;
    let stats = server.stats();
    let verdicts = detecting.then(|| server.verdicts().to_vec());
    Ok((summary, stats, verdicts))
}

fn generate_over_tcp(
    config: &ScenarioConfig,
    server_config: ServerConfig,
    detector: Option<Box<dyn LiveDetector>>,
    addr: SocketAddr,
) -> anyhow::Result<(RunSummary, IngestStats, Option<Vec<Verdict>>)> {
    let detecting = server_config.detect;
    let listener =
        TcpListener::bind(addr).with_context(|| format!("cannot listen on {addr}"))?;
    let local = listener.local_addr()?;
    let server = Arc::new(Mutex::new(Server::new(
        server_config,
        detector,
        ClockSource::wall_now(),
    )?));
    let shutdown = Arc::new(AtomicBool::new(false));
    let acceptor = {
        let server = Arc::clone(&server);
        let shutdown = Arc::clone(&shutdown);
        std::thread::spawn(move || serve(listener, server, shutdown))
    };

    let run_result = (|| {
        let mut sink = TcpSink::connect(local)?;
        let summary = orchestrator::run(config, &mut sink)?;
        sink.finish()?;
        Ok::<_, anyhow::Error>(summary)
    })();

    // Let in-flight lines drain before stopping the acceptor.
    if let Ok(summary) = &run_result {
        let deadline = Instant::now() + Duration::from_secs(30);
        loop {
            let stats = server.lock().unwrap().stats();
            if stats.ingested + stats.rejected >= summary.records || Instant::now() > deadline {
                break;
            }
            std::thread::sleep(Duration::from_millis(20));
        }
    }
    shutdown.store(true, Ordering::Relaxed);
    acceptor
        .join()
        .map_err(|_| anyhow::anyhow!("listener thread panicked"))?
        .context("listener failed")?;
    let summary = run_result?;

    let mut guard = server.lock().unwrap();
    guard.finish()?;
    let stats = guard.stats();
    if stats.ingested < summary.records {
        anyhow::bail!(
            "server ingested {} of {} records before shutdown",
            stats.ingested,
            summary.records
        );
    }
    let verdicts = detecting.then(|| guard.verdicts().to_vec());
    Ok((summary, stats, verdicts))
}

// ---------------------------------------------------------------------------
// analyze

#[derive(Args)]
struct AnalyzeArgs {
    /// Log file to analyze
    #[arg(long)]
    log: PathBuf,
    /// Write the quality report as JSON
    #[arg(long)]
    report_json: Option<PathBuf>,
}

fn analyze(args: AnalyzeArgs) -> anyhow::Result<()> {
    let file = open_input(&args.log)?;
    let mut scan = QualityScan::new();
    let mut line_no: u64 = 0;
    for line in BufReader::new(file).lines() {
        line_no += 1;
        let line = line.with_context(|| format!("reading {}", args.log.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_record(&line)
            .map_err(|e| usage(format!("{}:{line_no}: {e}", args.log.display())))?;
        scan.push(&record);
    }
    let report = scan.finish();
    print_quality(&report);
    if let Some(path) = &args.report_json {
        write_json(path, &report)?;
    }
    Ok(())
}

fn print_quality(report: &QualityReport) {
    println!("records  {}", report.total_records);
    println!();
    print_balance_header("group");
    for (group, stats) in &report.groups {
        print_balance_row(group.as_str(), stats);
    }
    println!();
    print_balance_header("category");
    for (category, stats) in &report.categories {
        print_balance_row(category.as_str(), stats);
    }
}

fn print_balance_header(name: &str) {
    println!(
        "{name:<14} {:>10} {:>10} {:>10} {:>11} {:>10} {:>11} {:>10}",
        "records", "normal", "intrusion", "dispersion", "class-dev", "duplicates", "dup-rate"
    );
}

fn print_balance_row(name: &str, stats: &BalanceStats) {
    println!(
        "{name:<14} {:>10} {:>10} {:>10} {:>11.4} {:>9.2}% {:>11} {:>9.4}%",
        stats.element_count,
        stats.normal_count,
        stats.intrusion_count,
        stats.dispersion_index,
        stats.relative_class_deviation * 100.0,
        stats.duplicate_count,
        stats.duplicate_rate * 100.0
    );
}

// ---------------------------------------------------------------------------
// compare

#[derive(Args)]
struct CompareArgs {
    /// Baseline log file
    #[arg(long)]
    baseline: PathBuf,
    /// Candidate log files to compare against the baseline
    #[arg(required = true)]
    candidates: Vec<PathBuf>,
    /// Histogram bin width for scalar generator values
    #[arg(long, default_value_t = 0.1)]
    bin_width: f64,
    /// Histogram bin width for route target distances, in pixels
    #[arg(long, default_value_t = 10.0)]
    route_bin_width: f64,
    /// Environment width in pixels (position heatmap grid)
    #[arg(long, default_value_t = DEFAULT_ENV_SIZE)]
    width: u32,
    /// Environment height in pixels (position heatmap grid)
    #[arg(long, default_value_t = DEFAULT_ENV_SIZE)]
    height: u32,
    /// Write the comparison report as JSON
    #[arg(long)]
    report_json: Option<PathBuf>,
}

#[derive(Serialize)]
struct CandidateReport {
    path: PathBuf,
    /// R² per metric name (categories plus the pooled position heatmap).
    r_squared: BTreeMap<String, f64>,
    /// Categories present on only one side, skipped with a warning.
    skipped: Vec<String>,
}

fn compare(args: CompareArgs) -> anyhow::Result<()> {
    if !(args.bin_width > 0.0) || !(args.route_bin_width > 0.0) {
        return Err(usage("histogram bin widths must be positive"));
    }
    let baseline = read_log(&args.baseline)?;
    let mut reports = Vec::new();
    for path in &args.candidates {
        let candidate = read_log(path)?;
        reports.push(compare_logs(&args, &baseline, &candidate, path)?);
    }

    println!("baseline  {}", args.baseline.display());
    for report in &reports {
        println!();
        println!("candidate  {}", report.path.display());
        println!("  {:<18} {:>10}", "metric", "R²");
        for (metric, value) in &report.r_squared {
            println!("  {metric:<18} {value:>10.6}");
        }
        for metric in &report.skipped {
            println!("  {metric:<18} {:>10}", "skipped");
        }
    }

    if let Some(path) = &args.report_json {
        write_json(path, &reports)?;
    }
    Ok(())
}

fn compare_logs(
    args: &CompareArgs,
    baseline: &[LogRecord],
    candidate: &[LogRecord],
    path: &Path,
) -> anyhow::Result<CandidateReport> {
    let base_categories: BTreeSet<DataCategory> = baseline.iter().map(|r| r.category()).collect();
    let cand_categories: BTreeSet<DataCategory> =
        candidate.iter().map(|r| r.category()).collect();
    let mut r2 = BTreeMap::new();
    let mut skipped = Vec::new();
    for &category in base_categories.union(&cand_categories) {
        if !(base_categories.contains(&category) && cand_categories.contains(&category)) {
            let side = if base_categories.contains(&category) {
                "the baseline"
            } else {
                "the candidate"
            };
            eprintln!(
                "warning: {category} records appear only in {side}; comparing shared categories only"
            );
            skipped.push(category.to_string());
            continue;
        }
        match category_r_squared(category, baseline, candidate, args)
            .with_context(|| format!("computing R² for {category}"))?
        {
            Some(value) => {
                r2.insert(category.to_string(), value);
            }
            None => {
                eprintln!(
                    "warning: all baseline {category} records fall into one bin; R² against \
                     a zero-variance baseline is undefined, skipping"
                );
                skipped.push(category.to_string());
            }
        }
    }

    // Pooled spatial distribution over every position-bearing record.
    let base_positions: Vec<(f64, f64)> = positions(baseline);
    let cand_positions: Vec<(f64, f64)> = positions(candidate);
    if !base_positions.is_empty() && !cand_positions.is_empty() {
        let base_map = position_heatmap(baseline.iter(), args.width, args.height);
        let cand_map = position_heatmap(candidate.iter(), args.width, args.height);
        match defined(r_squared(base_map.frequencies(), cand_map.frequencies()))
            .context("computing R² for the position heatmap")?
        {
            Some(value) => {
                r2.insert("position-heatmap".to_owned(), value);
            }
            None => {
                eprintln!(
                    "warning: all baseline positions fall into one heatmap cell; R² against \
                     a zero-variance baseline is undefined, skipping"
                );
                skipped.push("position-heatmap".to_owned());
            }
        }
    }
    Ok(CandidateReport {
        path: path.to_owned(),
        r_squared: r2,
        skipped,
    })
}

fn positions(records: &[LogRecord]) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter_map(|r| r.payload().position())
        .collect()
}

/// R² of one category's empirical distribution: binned histograms for
/// scalar values and route target distances, discrete frequency tables for
/// POI pairs, country codes, and color triples.
/// `Ok(None)` when the baseline distribution is concentrated in one bin, so
/// R² against it is undefined and the category should be skipped.
fn defined(result: Result<f64, AnalysisError>) -> anyhow::Result<Option<f64>> {
    match result {
        Ok(value) => Ok(Some(value)),
        Err(AnalysisError::DegenerateBaseline) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn category_r_squared(
    category: DataCategory,
    baseline: &[LogRecord],
    candidate: &[LogRecord],
    args: &CompareArgs,
) -> anyhow::Result<Option<f64>> {
    fn frequencies<K: Ord + Clone>(keys: impl Iterator<Item = K>) -> BTreeMap<K, f64> {
        let mut counts: BTreeMap<K, u64> = BTreeMap::new();
        let mut total = 0u64;
        for key in keys {
            *counts.entry(key).or_insert(0) += 1;
            total += 1;
        }
        counts
            .into_iter()
            .map(|(k, c)| (k, c as f64 / total as f64))
            .collect()
    }
    fn of<'a>(
        records: &'a [LogRecord],
        category: DataCategory,
    ) -> impl Iterator<Item = &'a LogRecord> {
        records.iter().filter(move |r| r.category() == category)
    }

    let value = if category.is_generator() {
        let series = |records| -> Vec<f64> {
            of(records, category)
                .filter_map(|r| match r.payload() {
                    Payload::Value { value } => Some(*value),
                    _ => None,
                })
                .collect()
        };
        defined(r_squared_binned(
            &histogram(&series(baseline), args.bin_width),
            &histogram(&series(candidate), args.bin_width),
        ))?
    } else {
        match category {
            DataCategory::Poi => {
                let keys = |records| {
                    frequencies(of(records, category).filter_map(|r| match r.payload() {
                        Payload::Poi {
                            poi_type, result, ..
                        } => Some((poi_type.clone(), result.clone())),
                        _ => None,
                    }))
                };
                defined(r_squared_binned(&keys(baseline), &keys(candidate)))?
            }
            DataCategory::CountryCode => {
                let keys = |records| {
                    frequencies(of(records, category).filter_map(|r| match r.payload() {
                        Payload::CountryCode { code, .. } => Some(code.clone()),
                        _ => None,
                    }))
                };
                defined(r_squared_binned(&keys(baseline), &keys(candidate)))?
            }
            DataCategory::Color => {
                let keys = |records| {
                    frequencies(of(records, category).filter_map(|r| match r.payload() {
                        Payload::ColorReading { color, .. } => Some((color.0, color.1, color.2)),
                        _ => None,
                    }))
                };
                defined(r_squared_binned(&keys(baseline), &keys(candidate)))?
            }
            DataCategory::Route => {
                let series = |records| -> Vec<f64> {
                    of(records, category)
                        .filter_map(|r| match *r.payload() {
                            Payload::Route {
                                x,
                                y,
                                target_x,
                                target_y,
                            } => Some((target_x - x).hypot(target_y - y)),
                            _ => None,
                        })
                        .collect()
                };
                defined(r_squared_binned(
                    &histogram(&series(baseline), args.route_bin_width),
                    &histogram(&series(candidate), args.route_bin_width),
                ))?
            }
            other => anyhow::bail!("no comparison rule for category {other}"),
        }
    };
    Ok(value)
}

// ---------------------------------------------------------------------------
// detect

#[derive(Args)]
struct DetectArgs {
    /// Log file to train and evaluate on
    #[arg(long)]
    log: PathBuf,
    /// Two-sided tail mass: the interval spans the [α, 1−α] quantiles
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Environment width in pixels (position-based features)
    #[arg(long, default_value_t = DEFAULT_ENV_SIZE)]
    width: u32,
    /// Environment height in pixels (position-based features)
    #[arg(long, default_value_t = DEFAULT_ENV_SIZE)]
    height: u32,
    /// Save the trained per-category intervals as a JSON model
    #[arg(long)]
    save_model: Option<PathBuf>,
    /// Write the evaluation report as JSON
    #[arg(long)]
    report_json: Option<PathBuf>,
}

/// Persisted form of the per-category interval detectors.
#[derive(Serialize, Deserialize)]
struct DetectorModel {
    alpha: f64,
    width: u32,
    height: u32,
    intervals: BTreeMap<DataCategory, SavedInterval>,
}

#[derive(Serialize, Deserialize)]
struct SavedInterval {
    q_lo: f64,
    q_hi: f64,
    alpha: f64,
}

/// Live detector backed by trained per-category intervals. Categories
/// without a trained interval make it abstain.
struct PretrainedDetector {
    width: u32,
    height: u32,
    detectors: BTreeMap<DataCategory, IntervalDetector>,
}

impl PretrainedDetector {
    fn from_model(model: DetectorModel) -> anyhow::Result<PretrainedDetector> {
        let mut detectors = BTreeMap::new();
        for (category, saved) in model.intervals {
            let detector = IntervalDetector::from_interval(saved.q_lo, saved.q_hi, saved.alpha)
                .map_err(|e| usage(format!("model interval for {category}: {e}")))?;
            detectors.insert(category, detector);
        }
        Ok(PretrainedDetector {
            width: model.width,
            height: model.height,
            detectors,
        })
    }

    fn load(path: &Path) -> anyhow::Result<PretrainedDetector> {
        let file = open_input(path)?;
        let model: DetectorModel = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| usage(format!("invalid model file {}: {e}", path.display())))?;
        PretrainedDetector::from_model(model)
    }
}

impl LiveDetector for PretrainedDetector {
    fn verdict(
        &mut self,
        _vtime: u64,
        _client_id: &str,
        category: DataCategory,
        payload: &Payload,
    ) -> Result<Label, String> {
        let detector = self
            .detectors
            .get(&category)
            .ok_or_else(|| format!("no interval trained for {category}"))?;
        Ok(detector.classify(payload_feature(payload, self.width, self.height)))
    }
}

#[derive(Serialize)]
struct DetectCategoryReport {
    category: DataCategory,
    interval: Option<(f64, f64)>,
    training_values: usize,
    score: ScoreReport,
    abstained: u64,
}

#[derive(Serialize)]
struct DetectReport {
    log: PathBuf,
    alpha: f64,
    per_category: Vec<DetectCategoryReport>,
}

fn detect(args: DetectArgs) -> anyhow::Result<()> {
    if !(args.alpha > 0.0 && args.alpha < 0.5) {
        return Err(usage(format!(
            "--alpha must lie in (0, 0.5), got {}",
            args.alpha
        )));
    }
    let records = read_log(&args.log)?;
    if records.is_empty() {
        return Err(usage(format!("{} contains no records", args.log.display())));
    }

    // One interval per category, trained on its normal-labeled records.
    let mut training: BTreeMap<DataCategory, Vec<f64>> = BTreeMap::new();
    let mut seen: BTreeSet<DataCategory> = BTreeSet::new();
    for record in &records {
        seen.insert(record.category());
        if record.label() == Label::Normal {
            training
                .entry(record.category())
                .or_default()
                .push(feature(record, args.width, args.height));
        }
    }
    let mut intervals: BTreeMap<DataCategory, IntervalDetector> = BTreeMap::new();
    let mut training_counts: BTreeMap<DataCategory, usize> = BTreeMap::new();
    for &category in &seen {
        let values = training.get(&category).map_or(&[][..], Vec::as_slice);
        training_counts.insert(category, values.len());
        if values.len() >= MIN_TRAINING_VALUES {
            intervals.insert(category, IntervalDetector::train(values, args.alpha)?);
        } else {
            eprintln!(
                "warning: {category} has {} normal records (need {MIN_TRAINING_VALUES}); \
                 the detector abstains on this category",
                values.len()
            );
        }
    }
    if intervals.is_empty() {
        return Err(usage(format!(
            "no category in {} has {MIN_TRAINING_VALUES} normal records to train on",
            args.log.display()
        )));
    }

    if let Some(path) = &args.save_model {
        let model = DetectorModel {
            alpha: args.alpha,
            width: args.width,
            height: args.height,
            intervals: intervals
                .iter()
                .map(|(&category, detector)| {
                    let (q_lo, q_hi) = detector.interval();
                    (
                        category,
                        SavedInterval {
                            q_lo,
                            q_hi,
                            alpha: detector.alpha(),
                        },
                    )
                })
                .collect(),
        };
        write_json(path, &model)?;
        println!("model saved to {}", path.display());
    }

    // Replay the log through the server in detect mode; the live detector
    // sees payloads only, never ground-truth labels.
    let live = PretrainedDetector {
        width: args.width,
        height: args.height,
        detectors: intervals.clone(),
    };
    let mut server = Server::new(
        ServerConfig {
            store: false,
            detect: true,
            store_path: None,
        },
        Some(Box::new(live)),
        ClockSource::Virtual(0),
    )?;
    for record in &records {
        server.advance_to(record.vtime());
        let line = serialize_record(record);
        server.ingest_line(line_without_vtime(&line))?;
    }

    #[derive(Default)]
    struct Tally {
        verdicts: Vec<Label>,
        labels: Vec<Label>,
        abstained: u64,
    }
    let mut tallies: BTreeMap<DataCategory, Tally> = BTreeMap::new();
    for (record, verdict) in records.iter().zip(server.verdicts()) {
        let tally = tallies.entry(record.category()).or_default();
        let called = match verdict {
            Verdict::Normal => Label::Normal,
            Verdict::Intrusion => Label::Intrusion,
            Verdict::Abstain => {
                tally.abstained += 1;
                continue;
            }
        };
        tally.verdicts.push(called);
        tally.labels.push(record.label());
    }

    println!(
        "{:<14} {:>24} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10} {:>10} {:>10}",
        "category", "interval", "train-n", "tp", "fp", "tn", "fn", "precision", "recall", "abstained"
    );
    let mut per_category = Vec::new();
    for (&category, tally) in &tallies {
        let report = score(&tally.verdicts, &tally.labels)?;
        let interval = intervals.get(&category).map(IntervalDetector::interval);
        let shown = interval.map_or_else(
            || "—".to_owned(),
            |(lo, hi)| format!("[{lo:.4}, {hi:.4}]"),
        );
        println!(
            "{:<14} {shown:>24} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10} {:>10} {:>10}",
            category.to_string(),
            training_counts.get(&category).copied().unwrap_or(0),
            report.true_positives,
            report.false_positives,
            report.true_negatives,
            report.false_negatives,
            format_ratio(report.precision, report.precision_defined),
            format_ratio(report.recall, report.recall_defined),
            tally.abstained
        );
        per_category.push(DetectCategoryReport {
            category,
            interval,
            training_values: training_counts.get(&category).copied().unwrap_or(0),
            score: report,
            abstained: tally.abstained,
        });
    }

    if let Some(path) = &args.report_json {
        write_json(
            path,
            &DetectReport {
                log: args.log.clone(),
                alpha: args.alpha,
                per_category,
            },
        )?;
    }
    Ok(())
}

fn format_ratio(value: f64, defined: bool) -> String {
    if defined {
        format!("{value:.4}")
    } else {
        "—".to_owned()
    }
}

// ---------------------------------------------------------------------------
// gap

#[derive(Args)]
struct GapArgs {
    /// Categories to test (default: all seven experiment categories)
    #[arg(long = "category", value_parser = parse_gap_category, value_delimiter = ',')]
    categories: Vec<DataCategory>,
    /// Base seed for the sampled record sets
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Independent record sets per difficulty level
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    sets: u32,
    /// Records per set (half from a normal source, half compromised)
    #[arg(long, default_value_t = 100_000)]
    records: u64,
    /// Two-sided tail mass for the per-set detector
    #[arg(long, default_value_t = GAP_ALPHA)]
    alpha: f64,
    /// Write the gap reports as JSON
    #[arg(long)]
    report_json: Option<PathBuf>,
}

fn parse_gap_category(s: &str) -> Result<DataCategory, String> {
    let category = DataCategory::parse(s).ok_or_else(|| format!("unknown category `{s}`"))?;
    if GAP_CATEGORIES.contains(&category) {
        Ok(category)
    } else {
        let choices: Vec<&str> = GAP_CATEGORIES.iter().map(|c| c.as_str()).collect();
        Err(format!(
            "`{s}` is not covered by the difficulty-gap experiment (choose from {})",
            choices.join(", ")
        ))
    }
}

fn gap(args: GapArgs) -> anyhow::Result<()> {
    if !(args.alpha > 0.0 && args.alpha < 0.5) {
        return Err(usage(format!(
            "--alpha must lie in (0, 0.5), got {}",
            args.alpha
        )));
    }
    let min_records = 2 * MIN_TRAINING_VALUES as u64;
    if args.records < min_records {
        return Err(usage(format!(
            "--records must be at least {min_records} so each set has {MIN_TRAINING_VALUES} \
             normal training records"
        )));
    }
    let categories: Vec<DataCategory> = if args.categories.is_empty() {
        GAP_CATEGORIES.to_vec()
    } else {
        let mut seen = BTreeSet::new();
        args.categories
            .iter()
            .copied()
            .filter(|c| seen.insert(*c))
            .collect()
    };

    let mut reports = Vec::new();
    for category in categories {
        eprintln!(
            "category {category}: {} set(s) × {} records per difficulty level",
            args.sets, args.records
        );
        let easy = gap_sets(category, DifficultyLevel::Easy, args.seed, args.sets, args.records)?;
        let hard = gap_sets(category, DifficultyLevel::Hard, args.seed, args.sets, args.records)?;
        reports.push(difficulty_gap_experiment(
            category,
            &easy,
            &hard,
            DEFAULT_ENV_SIZE,
            DEFAULT_ENV_SIZE,
            args.alpha,
        )?);
    }

    println!(
        "{:<12} {:>11} {:>11} {:>12} {:>12} {:>12}",
        "category", "easy-recall", "hard-recall", "recall-gap", "prec-gap", "significant"
    );
    for report in &reports {
        println!(
            "{:<12} {:>11.4} {:>11.4} {:>10.1}pp {:>10.1}pp {:>12}",
            report.category.to_string(),
            report.easy.mean_recall,
            report.hard.mean_recall,
            report.recall_gap_points,
            report.precision_gap_points,
            if report.significant { "yes" } else { "no" }
        );
    }

    if let Some(path) = &args.report_json {
        write_json(path, &reports)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// shared helpers

fn open_input(path: &Path) -> anyhow::Result<File> {
    File::open(path).map_err(|e| usage(format!("cannot open {}: {e}", path.display())))
}

/// Parse a whole log file, reporting the first malformed line by number.
fn read_log(path: &Path) -> anyhow::Result<Vec<LogRecord>> {
    let file = open_input(path)?;
    let mut records = Vec::new();
    let mut line_no: u64 = 0;
    for line in BufReader::new(file).lines() {
        line_no += 1;
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let record =
            parse_record(&line).map_err(|e| usage(format!("{}:{line_no}: {e}", path.display())))?;
        records.push(record);
    }
    Ok(records)
}

pub(crate) fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let file =
        File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, value)
        .with_context(|| format!("serializing {}", path.display()))?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::anyhow;

    #[test]
    fn usage_errors_map_to_exit_code_2_through_context_chains() {
        assert_eq!(exit_code(&usage("bad flag")), 2);
        assert_eq!(exit_code(&usage("bad flag").context("while starting")), 2);
        assert_eq!(exit_code(&anyhow!("disk on fire")), 1);
    }

    #[test]
    fn unreadable_scenarios_map_to_exit_code_2() {
        let err = anyhow::Error::from(load_scenario(Path::new("/no/such/file.toml")).unwrap_err());
        assert_eq!(exit_code(&err), 2);
    }

    #[test]
    fn explicit_out_file_wins_over_defaults() {
        let out = resolve_out_path(Some(PathBuf::from("runs/x.tsv")), Path::new("s/demo.toml"), 5);
        assert_eq!(out, PathBuf::from("runs/x.tsv"));
    }

    #[test]
    fn out_directory_hosts_the_default_name() {
        let dir = tempfile::tempdir().unwrap();
        let out = resolve_out_path(Some(dir.path().to_owned()), Path::new("s/demo.toml"), 5);
        assert_eq!(out, dir.path().join("demo-5.tsv"));
    }
}
