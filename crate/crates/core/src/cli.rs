//! Command-line front end: `eeshare <run|check|oracle|repro> ...`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{ConfigError, HarnessError};
use crate::harness::{
    census, csv_string, emit_csv, generate_drops, load_config, oracle_compare, preset_text,
    run_on_drops, ExperimentConfig, PRESET_NAMES,
};
use crate::model::watts_to_dbw;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "eeshare",
    version,
    about = "Energy-efficient spectrum sharing experiments",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Clone, Default, Args)]
struct Overrides {
    /// Drop generator seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of drops per sweep point.
    #[arg(long, global = true)]
    drops: Option<usize>,
    /// Relative stopping tolerance of the overlay loop.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Output path (CSV for `run`, config text for `repro`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the sweep and write one CSV per series.
    Run { config: PathBuf },
    /// Validate the config and report a feasibility census of its drops.
    Check { config: PathBuf },
    /// Compare the allocator with brute-force search and print the largest deviation.
    Oracle { config: PathBuf },
    /// Print the config of a published experiment (fig1a, fig1b, fig2, fig3a, fig3b, table1).
    Repro { preset: String },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(c) => Failure::Config(c.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_CONFIG,
            };
        }
    };
    let result = match &cli.command {
        Command::Run { config } => run(config, &cli.overrides),
        Command::Check { config } => check(config, &cli.overrides),
        Command::Oracle { config } => oracle(config, &cli.overrides),
        Command::Repro { preset } => repro(preset, &cli.overrides),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            EXIT_CONFIG
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            EXIT_RUNTIME
        }
    }
}

fn load(path: &Path, o: &Overrides) -> Result<Vec<ExperimentConfig>, Failure> {
    let mut series = load_config(path)?;
    for cfg in &mut series {
        if let Some(s) = o.seed {
            cfg.drop_cfg.seed = s;
        }
        if let Some(n) = o.drops {
            cfg.n_drops = n;
        }
        if let Some(e) = o.eps {
            cfg.eps = e;
        }
        if let Some(out) = &o.out {
            cfg.output_path = Some(out.clone());
        }
        cfg.validate()?;
    }
    Ok(series)
}

/// CSV destination of one series; several series from one file get their label appended.
pub fn series_output_path(cfg: &ExperimentConfig, n_series: usize) -> PathBuf {
    let base = cfg
        .output_path
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", cfg.name)));
    if n_series <= 1 {
        return base;
    }
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = base
        .extension()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    base.with_file_name(format!("{stem}_{}.{ext}", cfg.series_label()))
}

fn run(path: &Path, o: &Overrides) -> Result<(), Failure> {
    let series = load(path, o)?;
    let drops = generate_drops(&series[0])?;
    for cfg in &series {
        let rows = run_on_drops(cfg, &drops);
        let out = series_output_path(cfg, series.len());
        emit_csv(&rows, &out)?;
        println!("{} [{}] -> {}", cfg.name, cfg.series_label(), out.display());
        print!("{}", csv_string(&rows));
        let failed: usize = rows.iter().map(|r| r.n_failed).sum();
        if failed > 0 {
            eprintln!("warning: {failed} solver failures excluded from the means");
        }
    }
    Ok(())
}

fn check(path: &Path, o: &Overrides) -> Result<(), Failure> {
    let series = load(path, o)?;
    let first = &series[0];
    let mut modes: Vec<String> = series.iter().map(|c| format!("{:?}", c.mode)).collect();
    let mut algs: Vec<String> = series
        .iter()
        .map(|c| format!("{:?}", c.algorithm))
        .collect();
    let mut targets: Vec<String> = series.iter().map(|c| format!("{}%", c.r_percent)).collect();
    for v in [&mut modes, &mut algs, &mut targets] {
        v.dedup();
        let mut seen = Vec::new();
        v.retain(|x| {
            if seen.contains(x) {
                false
            } else {
                seen.push(x.clone());
                true
            }
        });
    }
    println!("config: {}", path.display());
    println!("scenario: {:?}", first.scenario);
    println!("modes: {}", modes.join(", "));
    println!("algorithms: {}", algs.join(", "));
    println!("R: {}", targets.join(", "));
    println!("P1: {} dBW", watts_to_dbw(first.params.p1));
    println!("P2 sweep (dBW): {:?}", first.p2_sweep_dbw);
    println!("drops: {} (seed {})", first.n_drops, first.drop_cfg.seed);
    let drops = generate_drops(first)?;
    let p2 = *first.p2_sweep_dbw.last().expect("nonempty sweep");
    let mut seen = Vec::new();
    for cfg in &series {
        if seen.contains(&cfg.r_percent.to_bits()) {
            continue;
        }
        seen.push(cfg.r_percent.to_bits());
        let c = census(cfg, &drops, p2);
        println!(
            "census R={}% at P2={p2} dBW: feasible {}, infeasible R1* {}, underlay regime {}, no cancellation {}",
            cfg.r_percent, c.feasible, c.infeasible_r1star, c.underlay_regime, c.no_cancellation
        );
    }
    Ok(())
}

fn oracle(path: &Path, o: &Overrides) -> Result<(), Failure> {
    let series = load(path, o)?;
    let drops = generate_drops(&series[0])?;
    let mut worst = 0.0_f64;
    for cfg in &series {
        let r = oracle_compare(cfg, &drops).map_err(|e| match e {
            HarnessError::Unsupported(m) => Failure::Config(m),
            other => other.into(),
        })?;
        println!(
            "{}: compared {}, max relative deviation {:.3e}, max oracle excess {:.3e}, feasibility mismatches {}",
            cfg.series_label(),
            r.compared,
            r.max_rel_deviation,
            r.max_oracle_excess,
            r.feasibility_mismatches
        );
        worst = worst.max(r.max_rel_deviation);
    }
    println!("max deviation: {worst:.6e}");
    Ok(())
}

fn repro(name: &str, o: &Overrides) -> Result<(), Failure> {
    let canonical = match name {
        "fig1" => "fig1a",
        "fig3" => "fig3a",
        other => other,
    };
    let mut text = preset_text(canonical).ok_or_else(|| {
        Failure::Config(format!(
            "unknown preset {name:?}; expected one of {}",
            PRESET_NAMES.join(", ")
        ))
    })?;
    let mut extra = String::new();
    if let Some(s) = o.seed {
        extra.push_str(&format!("seed = {s}\n"));
    }
    if let Some(n) = o.drops {
        extra.push_str(&format!("n_drops = {n}\n"));
    }
    if let Some(e) = o.eps {
        extra.push_str(&format!("eps = {e:e}\n"));
    }
    if !extra.is_empty() {
        let overridden: Vec<&str> = extra.lines().filter_map(|l| l.split(" =").next()).collect();
        text = text
            .lines()
            .filter(|l| !overridden.iter().any(|k| l.starts_with(&format!("{k} ="))))
            .map(|l| format!("{l}\n"))
            .collect::<String>()
            + &extra;
    }
    match &o.out {
        Some(path) => std::fs::write(path, &text)
            .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?,
        None => print!("{text}"),
    }
    Ok(())
}
