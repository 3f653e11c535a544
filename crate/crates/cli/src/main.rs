use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use apc_core::sweep::{self, SweepRow, SweepSpec};
use apc_core::{ApcError, PlanFile};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

#[derive(Debug, Parser)]
#[command(name = "apc", version, about = "Adaptive purification planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Override the planner frontier width.
    #[arg(long, global = true)]
    frontier_width: Option<usize>,

    /// Override the maximum recurrence depth per link.
    #[arg(long, global = true)]
    rmax: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Plan a single request read from a JSON file.
    Plan { file: PathBuf },
    /// Run a parameter sweep from a JSON spec or a named preset.
    Sweep {
        #[arg(required_unless_present = "preset", conflicts_with = "preset")]
        spec: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        /// Seed for the randomized baseline.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Time planning on homogeneous chains.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 10, 100, 1000])]
        lengths: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_rows(rows: &[SweepRow], format: Format, out: Option<&Path>) -> Result<()> {
    let mut w = open_out(out)?;
    match format {
        Format::Csv => sweep::write_csv_to(rows, &mut w)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, rows)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_plan(cli: &Cli, file: &Path) -> Result<()> {
    let mut pf = PlanFile::load(file)?;
    if let Some(w) = cli.frontier_width {
        pf.planner.frontier_width = w;
    }
    if let Some(r) = cli.rmax {
        pf.planner.r_max = r;
    }
    let resp = pf.run()?;
    info!(
        "planned {} link(s) in {:.3} ms, feasible = {}",
        resp.plan.per_link.len(),
        resp.planning_time * 1e3,
        resp.plan.feasible
    );
    match cli.format {
        Format::Json => {
            let mut w = open_out(cli.out.as_deref())?;
            serde_json::to_writer_pretty(&mut w, &resp)?;
            writeln!(w)?;
            w.flush()?;
        }
        Format::Csv => write_rows(
            &[sweep::summary_row(&resp)],
            Format::Csv,
            cli.out.as_deref(),
        )?,
    }
    Ok(())
}

fn cmd_sweep(
    cli: &Cli,
    spec_path: Option<&Path>,
    preset: Option<&str>,
    seed: Option<u64>,
) -> Result<()> {
    let mut spec = match (spec_path, preset) {
        (Some(p), _) => SweepSpec::load(p)?,
        (None, Some(name)) => sweep::preset(name)
            .ok_or_else(|| anyhow::Error::new(UnknownPreset(name.to_string())))?,
        (None, None) => unreachable!("clap requires a spec or a preset"),
    };
    if let Some(w) = cli.frontier_width {
        spec.fixed.planner.frontier_width = w;
    }
    if let Some(r) = cli.rmax {
        spec.fixed.planner.r_max = r;
    }
    if let Some(s) = seed {
        spec.seed = s;
    }
    let out = cli.out.clone().or_else(|| spec.output_path.clone());
    info!(
        "sweeping {} over {} point(s)",
        spec.experiment.as_str(),
        spec.points().len()
    );
    let rows = sweep::run_sweep(&spec)?;
    write_rows(&rows, cli.format, out.as_deref())?;
    if let Some(path) = out {
        let manifest = sweep::write_manifest(&spec, &path)?;
        info!(
            "wrote {} rows to {} ({})",
            rows.len(),
            path.display(),
            manifest.display()
        );
    }
    Ok(())
}

fn cmd_bench(cli: &Cli, lengths: &[usize], repeats: usize) -> Result<()> {
    let mut scenario = sweep::latency_scenario();
    if let Some(w) = cli.frontier_width {
        scenario.planner.frontier_width = w;
    }
    if let Some(r) = cli.rmax {
        scenario.planner.r_max = r;
    }
    let rows = sweep::bench_latency_with(&scenario, lengths, repeats)?;
    let mut w = open_out(cli.out.as_deref())?;
    match cli.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &rows)?;
            writeln!(w)?;
        }
        Format::Csv => {
            writeln!(w, "length,mean_time,per_link_time")?;
            for r in &rows {
                writeln!(w, "{},{},{}", r.length, r.mean_time, r.per_link_time)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug)]
struct UnknownPreset(String);

impl std::fmt::Display for UnknownPreset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "unknown preset {:?} (expected one of {})",
            self.0,
            sweep::PRESETS.join(", ")
        )
    }
}

impl std::error::Error for UnknownPreset {}

/// Bad input (unparseable or invalid files, unknown presets) exits with 2,
/// everything else with 1.
fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UnknownPreset>().is_some() {
        return 2;
    }
    match err.downcast_ref::<ApcError>() {
        Some(e) if e.is_validation() => 2,
        Some(ApcError::Json(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Plan { file } => cmd_plan(&cli, file),
        Command::Sweep { spec, preset, seed } => {
            cmd_sweep(&cli, spec.as_deref(), preset.as_deref(), *seed)
        }
        Command::Bench { lengths, repeats } => cmd_bench(&cli, lengths, *repeats),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
