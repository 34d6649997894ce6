//! Scaling benchmark.
//!
//! `bench` spawns one child process per (component count, round) cycle via
//! the hidden `bench-cycle` subcommand, so every measurement starts from a
//! cold process. Start-up time is the wall time from spawn until the child
//! prints `READY` (all components built and their threads running); memory
//! and CPU are then sampled inside the child at 1 Hz over a steady window
//! and reported back as one JSON line on stdout.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use anyhow::Context;
use clap::Args;
use serde::{Deserialize, Serialize};

use fleetbed::analysis::{linear_fit, LinearFit};
use fleetbed::distributions::DistributionSpec;
use fleetbed::orchestrator::{
    self, Budget, ClientSpec, ComponentConfig, Mode, NullSink, ScenarioConfig,
};
use fleetbed::record::DataCategory;
use fleetbed::sim2d::DEFAULT_ENV_SIZE;

#[derive(Args)]
pub struct BenchArgs {
    /// Component counts to benchmark (comma-separated)
    #[arg(
        long,
        value_delimiter = ',',
        default_values_t = [2u32, 50, 100, 200],
        value_parser = clap::value_parser!(u32).range(1..)
    )]
    counts: Vec<u32>,
    /// Measurement rounds per component count
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    rounds: u32,
    /// Steady-state sampling window per cycle, in seconds
    #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u32).range(1..))]
    window_secs: u32,
    /// Write the scaling report as JSON
    #[arg(long)]
    report_json: Option<PathBuf>,
}

/// Mean and sample standard deviation over the successful rounds.
#[derive(Debug, Clone, Copy, Serialize)]
struct Stat {
    mean: f64,
    stddev: f64,
}

impl Stat {
    fn over(values: impl Iterator<Item = f64>) -> Stat {
        let values: Vec<f64> = values.collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stddev = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat { mean, stddev }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
struct RoundSample {
    startup_secs: f64,
    rss_mib: f64,
    cpu_percent: f64,
}

#[derive(Serialize)]
#[serde(untagged)]
enum RoundOutcome {
    Sample(RoundSample),
    Failed { error: String },
}

#[derive(Serialize)]
struct Cycle {
    components: u32,
    startup_secs: Stat,
    rss_mib: Stat,
    cpu_percent: Stat,
    rounds: Vec<RoundOutcome>,
}

#[derive(Serialize)]
struct Fits {
    startup_secs: LinearFit,
    rss_mib: LinearFit,
    cpu_percent: LinearFit,
}

#[derive(Serialize)]
struct BenchReport {
    window_secs: u32,
    rounds: u32,
    cycles: Vec<Cycle>,
    fits: Fits,
}

pub fn run_bench(args: BenchArgs) -> anyhow::Result<()> {
    let distinct: BTreeSet<u32> = args.counts.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(crate::usage(
            "bench needs at least two distinct component counts to fit a line",
        ));
    }

    let mut cycles = Vec::new();
    for &components in &args.counts {
        let mut samples = Vec::new();
        let mut outcomes = Vec::new();
        for round in 0..args.rounds {
            eprintln!(
                "cycle: {components} components, round {}/{}",
                round + 1,
                args.rounds
            );
            match run_round(components, args.window_secs) {
                Ok(sample) => {
                    samples.push(sample);
                    outcomes.push(RoundOutcome::Sample(sample));
                }
                Err(e) => {
                    let error = format!("{e:#}");
                    eprintln!("  measurement failed: {error}");
                    outcomes.push(RoundOutcome::Failed { error });
                }
            }
        }
        if samples.is_empty() {
            anyhow::bail!("all {} round(s) failed for {components} components", args.rounds);
        }
        cycles.push(Cycle {
            components,
            startup_secs: Stat::over(samples.iter().map(|s| s.startup_secs)),
            rss_mib: Stat::over(samples.iter().map(|s| s.rss_mib)),
            cpu_percent: Stat::over(samples.iter().map(|s| s.cpu_percent)),
            rounds: outcomes,
        });
    }

    let xs: Vec<f64> = cycles.iter().map(|c| c.components as f64).collect();
    let ys_startup: Vec<f64> = cycles.iter().map(|c| c.startup_secs.mean).collect();
    let ys_rss: Vec<f64> = cycles.iter().map(|c| c.rss_mib.mean).collect();
    let ys_cpu: Vec<f64> = cycles.iter().map(|c| c.cpu_percent.mean).collect();
    let fits = Fits {
        startup_secs: linear_fit(&xs, &ys_startup)?,
        rss_mib: linear_fit(&xs, &ys_rss)?,
        cpu_percent: linear_fit(&xs, &ys_cpu)?,
    };

    println!(
        "{:>10}  {:>22} {:>22} {:>22}",
        "components", "startup (s)", "memory (MiB)", "cpu (%)"
    );
    for cycle in &cycles {
        println!(
            "{:>10}  {:>13.3} ± {:<6.3} {:>13.2} ± {:<6.2} {:>13.2} ± {:<6.2}",
            cycle.components,
            cycle.startup_secs.mean,
            cycle.startup_secs.stddev,
            cycle.rss_mib.mean,
            cycle.rss_mib.stddev,
            cycle.cpu_percent.mean,
            cycle.cpu_percent.stddev
        );
    }
    println!();
    println!("linear fits over component count:");
    print_fit("startup (s)", &fits.startup_secs);
    print_fit("memory (MiB)", &fits.rss_mib);
    print_fit("cpu (%)", &fits.cpu_percent);

    if let Some(path) = &args.report_json {
        crate::write_json(
            path,
            &BenchReport {
                window_secs: args.window_secs,
                rounds: args.rounds,
                cycles,
                fits,
            },
        )?;
    }
    Ok(())
}

fn print_fit(name: &str, fit: &LinearFit) {
    println!(
        "  {name:<14} slope {:>12.6}  intercept {:>12.4}  mse {:>12.6e}  R² {:>8.5}",
        fit.slope, fit.intercept, fit.mse, fit.r_squared
    );
}

/// What a bench cycle prints after its sampling window.
#[derive(Serialize, Deserialize)]
struct CycleReport {
    rss_mib_mean: f64,
    cpu_percent_mean: f64,
}

fn run_round(components: u32, window_secs: u32) -> anyhow::Result<RoundSample> {
    let exe = std::env::current_exe().context("locating the fleetbed binary")?;
    let spawn_at = Instant::now();
    let mut child = Command::new(exe)
        .arg("bench-cycle")
        .arg("--components")
        .arg(components.to_string())
        .arg("--window-secs")
        .arg(window_secs.to_string())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .spawn()
        .context("spawning bench cycle")?;
    let result = read_round(&mut child, spawn_at);
    if result.is_err() {
        let _ = child.kill();
    }
    let status = child.wait().context("waiting for bench cycle")?;
    let sample = result?;
    if !status.success() {
        anyhow::bail!("bench cycle exited with {status}");
    }
    Ok(sample)
}

fn read_round(child: &mut Child, spawn_at: Instant) -> anyhow::Result<RoundSample> {
    let stdout = child.stdout.take().context("bench cycle has no stdout")?;
    let mut reader = BufReader::new(stdout);
    let mut line = String::new();
    let startup_secs = loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            anyhow::bail!("bench cycle exited before reporting ready");
        }
        if line.trim() == "READY" {
            break spawn_at.elapsed().as_secs_f64();
        }
    };
    let report: CycleReport = loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            anyhow::bail!("bench cycle exited before reporting measurements");
        }
        let text = line.trim();
        if !text.is_empty() {
            break serde_json::from_str(text).context("parsing bench cycle report")?;
        }
    };
    Ok(RoundSample {
        startup_secs,
        rss_mib: report.rss_mib_mean,
        cpu_percent: report.cpu_percent_mean,
    })
}

// ---------------------------------------------------------------------------
// the child side

#[derive(Args)]
pub struct BenchCycleArgs {
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    components: u32,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    window_secs: u32,
}

/// The measured workload: `components` von Mises generators on one client,
/// free-running on wall-clock timers. A von Mises component pays the same
/// non-trivial initialization cost as every other (its interval profile is
/// numerically integrated), so start-up grows cleanly with the count.
fn cycle_scenario(components: u32, window_secs: u32) -> ScenarioConfig {
    ScenarioConfig {
        seed: 0xBE4C,
        mode: Mode::RealTime,
        // Outlives the sampling window; the process exits once the
        // measurements are printed.
        budget: Budget::DurationMs(u64::from(window_secs) * 1_000 + 5_000),
        width: DEFAULT_ENV_SIZE,
        height: DEFAULT_ENV_SIZE,
        clients: vec![ClientSpec {
            id: "bench".to_owned(),
            components: (0..components)
                .map(|_| ComponentConfig::Generator {
                    spec: DistributionSpec::default_for(DataCategory::VonMises),
                    intrusion: None,
                    level: None,
                    period_ms: None,
                })
                .collect(),
        }],
    }
}

pub fn run_cycle(args: BenchCycleArgs) -> anyhow::Result<()> {
    let config = cycle_scenario(args.components, args.window_secs);
    let (ready_tx, ready_rx) = mpsc::channel();
    let worker = std::thread::spawn(move || {
        let mut sink = NullSink;
        orchestrator::run_with_ready(&config, &mut sink, move || {
            // The parent times start-up as spawn → this line.
            println!("READY");
            std::io::stdout().flush().ok();
            ready_tx.send(()).ok();
        })
    });
    if ready_rx.recv().is_err() {
        let error = match worker.join() {
            Ok(Err(e)) => e.to_string(),
            _ => "component start-up failed".to_owned(),
        };
        anyhow::bail!("bench cycle failed before ready: {error}");
    }

    let ticks_per_sec = clock_ticks_per_second();
    let cpu_start = cpu_ticks()?;
    let started = Instant::now();
    let mut rss_samples = Vec::with_capacity(args.window_secs as usize);
    for _ in 0..args.window_secs {
        std::thread::sleep(Duration::from_secs(1));
        rss_samples.push(resident_kib()?);
    }
    let cpu_secs = (cpu_ticks()? - cpu_start) as f64 / ticks_per_sec;
    let elapsed = started.elapsed().as_secs_f64();
    let report = CycleReport {
        rss_mib_mean: rss_samples.iter().sum::<u64>() as f64
            / rss_samples.len() as f64
            / 1024.0,
        cpu_percent_mean: cpu_secs / elapsed * 100.0,
    };
    println!("{}", serde_json::to_string(&report)?);
    std::io::stdout().flush().ok();
    // Component threads are still inside the run budget; the measurements
    // are out, so cut the process over instead of joining them.
    std::process::exit(0);
}

fn resident_kib() -> anyhow::Result<u64> {
    let status =
        std::fs::read_to_string("/proc/self/status").context("reading /proc/self/status")?;
    for line in status.lines() {
        if let Some(rest) = line.strip_prefix("VmRSS:") {
            let kib = rest
                .split_whitespace()
                .next()
                .context("malformed VmRSS line")?;
            return Ok(kib.parse()?);
        }
    }
    anyhow::bail!("no VmRSS entry in /proc/self/status")
}

/// User plus system clock ticks consumed by this process.
fn cpu_ticks() -> anyhow::Result<u64> {
    let stat = std::fs::read_to_string("/proc/self/stat").context("reading /proc/self/stat")?;
    // Skip past the parenthesized command name; utime and stime are the
    // 12th and 13th whitespace-separated fields after it.
    let after = stat
        .rsplit_once(')')
        .context("malformed /proc/self/stat")?
        .1;
    let fields: Vec<&str> = after.split_whitespace().collect();
    let utime: u64 = fields.get(11).context("missing utime")?.parse()?;
    let stime: u64 = fields.get(12).context("missing stime")?.parse()?;
    Ok(utime + stime)
}

fn clock_ticks_per_second() -> f64 {
    Command::new("getconf")
        .arg("CLK_TCK")
        .output()
        .ok()
        .and_then(|out| String::from_utf8(out.stdout).ok())
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(100.0)
}
