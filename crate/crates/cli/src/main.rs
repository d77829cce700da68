use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use mbsim_core::config::ScenarioConfig;
use mbsim_core::csit::decode_stream;
use mbsim_core::harness::{emit_csv, run_scenario, to_csv, CellStats};
use mbsim_core::presets::{self, PRESETS};

#[derive(Parser)]
#[command(name = "mbsim", version, about = "Multibeam satellite precoding simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write per-beam throughput rows as CSV.
    Run {
        /// Scenario file, or the name of a shipped preset.
        #[arg(long)]
        config: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<usize>,
        /// Output file; rows go to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 0 uses one per core.
        #[arg(long, env = "MBSIM_WORKERS", default_value_t = 0)]
        workers: usize,
    },
    /// Shipped scenario presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// CSIT feedback messages.
    Report {
        #[command(subcommand)]
        action: ReportAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// List preset names.
    List,
    /// Print a preset's scenario text.
    Show { name: String },
}

#[derive(Subcommand)]
enum ReportAction {
    /// Decode a file of concatenated report messages.
    Inspect { file: PathBuf },
}

fn load_config(name: &str) -> Result<ScenarioConfig> {
    let path = Path::new(name);
    if path.exists() {
        return ScenarioConfig::load(path).with_context(|| format!("loading {name}"));
    }
    if presets::find(name).is_some() {
        return Ok(presets::load(name)?);
    }
    bail!("{name}: no such file or preset")
}

fn print_stats(out: &mut impl Write, stats: &[CellStats]) -> std::io::Result<()> {
    writeln!(
        out,
        "{:<20} {:<9} {:>3} {:<9} {:>12} {:>12} {:>6}",
        "precoder", "scheduler", "rho", "csit", "mean Mbps", "ci95 Mbps", "failed"
    )?;
    for s in stats {
        writeln!(
            out,
            "{:<20} {:<9} {:>3} {:<9} {:>12.2} {:>12.2} {:>6}",
            s.cell.precoder,
            s.cell.scheduler,
            s.cell.users_per_frame,
            s.cell.csit,
            s.mean / 1e6,
            s.ci95 / 1e6,
            s.failures
        )?;
    }
    Ok(())
}

fn run(config: &str, seed: Option<u64>, runs: Option<usize>, out: Option<&Path>, workers: usize) -> Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(r) = runs {
        cfg.runs = r;
    }
    let result = run_scenario(&cfg, workers)?;
    match out {
        Some(path) => emit_csv(&result, path)?,
        None => std::io::stdout().lock().write_all(to_csv(&result.rows).as_bytes())?,
    }
    let mut err = std::io::stderr().lock();
    print_stats(&mut err, &result.aggregates())?;
    for f in &result.failures {
        writeln!(
            err,
            "run {} {} {} rho={} {}: {}",
            f.run, f.cell.precoder, f.cell.scheduler, f.cell.users_per_frame, f.cell.csit, f.message
        )?;
    }
    Ok(())
}

fn inspect(file: &Path) -> Result<()> {
    let bytes = std::fs::read(file).with_context(|| format!("reading {}", file.display()))?;
    let reports = decode_stream(&bytes).with_context(|| format!("decoding {}", file.display()))?;
    let mut out = std::io::stdout().lock();
    for (i, r) in reports.iter().enumerate() {
        writeln!(
            out,
            "report {i}: user {} at t={:.3} s, {} coefficients",
            r.user_id,
            r.report_time,
            r.coefficients.len()
        )?;
        for (feed, v) in &r.coefficients {
            let db = if v.norm() > 0.0 { 20.0 * v.norm().log10() } else { f64::NEG_INFINITY };
            writeln!(out, "  feed {feed:>4}  {db:>8.2} dB  {:>8.2} deg", v.arg().to_degrees())?;
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed, runs, out, workers } => run(&config, seed, runs, out.as_deref(), workers),
        Command::Presets { action } => {
            let mut out = std::io::stdout().lock();
            match action {
                PresetAction::List => {
                    for p in PRESETS {
                        writeln!(out, "{:<8} {}", p.name, p.summary)?;
                    }
                }
                PresetAction::Show { name } => match presets::find(&name) {
                    Some(p) => out.write_all(p.text.as_bytes())?,
                    None => bail!("unknown preset '{name}'"),
                },
            }
            Ok(())
        }
        Command::Report { action: ReportAction::Inspect { file } } => inspect(&file),
    }
}
