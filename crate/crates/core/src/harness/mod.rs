//! Monte-Carlo sweeps over the secondary power budget.
//!
//! Every sweep point reuses the same seeded drops, so series run from the same
//! file are paired drop by drop.

mod config;
mod presets;

pub use config::{load_config, parse_config, Algorithm, ExperimentConfig, Mode};
pub use presets::{preset, preset_text, PRESET_NAMES};

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{generate_drop, Drop, Scenario};
use crate::dinkelbach::SurrogateOptions;
use crate::error::{HarnessError, OverlayError, UnderlayError};
use crate::model::{dbw_to_watts, direct_capacity, Objective, SystemParams};
use crate::oracle::{grid_overlay_rank1, grid_underlay_scalar, OverlayGrid, DEFAULT_UNDERLAY_GRID};
use crate::overlay::{check_feasibility, solve_overlay_full, solve_overlay_rank1, Feasibility};
use crate::underlay::allocate_underlay;

pub const CSV_HEADER: &str =
    "p2_dbw,mean_ee_bit_per_joule,mean_r2_bit_per_s,mean_tx_power_w,mean_iterations,\
n_feasible,n_infeasible_r2star,n_infeasible_r1star";

/// Per-P2 aggregate over the drops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub p2_dbw: f64,
    pub mean_ee: f64,
    pub mean_r2: f64,
    pub mean_tx_power: f64,
    pub mean_iterations: f64,
    pub n_feasible: usize,
    pub n_infeasible_r2star: usize,
    pub n_infeasible_r1star: usize,
    /// Drops where the solver reported a numerical failure. Not written to CSV.
    pub n_failed: usize,
}

/// Result of one allocator run on one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DropOutcome {
    Feasible {
        ee: f64,
        r2: f64,
        tx_power: f64,
        iterations: usize,
    },
    InfeasibleR2Star,
    InfeasibleR1Star,
    Failed(String),
}

/// Draws the drops of an experiment.
pub fn generate_drops(cfg: &ExperimentConfig) -> Result<Vec<Drop>, HarnessError> {
    (0..cfg.n_drops as u64)
        .into_par_iter()
        .map(|i| generate_drop(&cfg.drop_cfg, &cfg.params, i).map_err(HarnessError::from))
        .collect()
}

/// Parameters used for `drop` at budget `p2_dbw`.
pub fn drop_params(cfg: &ExperimentConfig, drop: &Drop, p2_dbw: f64) -> SystemParams {
    let mut p = cfg.params.clone();
    p.p2 = dbw_to_watts(p2_dbw);
    p.r1_star = cfg.r_percent / 100.0 * direct_capacity(&p, &drop.channels);
    p
}

fn objective(mode: Mode) -> Objective {
    match mode {
        Mode::MaximizeEE => Objective::EnergyEfficiency,
        Mode::MaximizeRate => Objective::Rate,
    }
}

pub fn evaluate_drop(cfg: &ExperimentConfig, drop: &Drop, p2_dbw: f64) -> DropOutcome {
    let p = drop_params(cfg, drop, p2_dbw);
    let ch = &drop.channels;
    let obj = objective(cfg.mode);
    match cfg.algorithm {
        Algorithm::Alg1 => match allocate_underlay(&p, ch, obj) {
            Ok(s) => DropOutcome::Feasible {
                ee: s.ee,
                r2: s.r2,
                tx_power: s.tx_power,
                iterations: s.iterations,
            },
            Err(UnderlayError::R1StarExceedsDirectCapacity) => DropOutcome::InfeasibleR1Star,
            Err(UnderlayError::R2StarInfeasible) => DropOutcome::InfeasibleR2Star,
            Err(e) => DropOutcome::Failed(e.to_string()),
        },
        Algorithm::Alg2 | Algorithm::Alg3 => {
            let opts = SurrogateOptions {
                eps: cfg.eps,
                ..SurrogateOptions::default()
            };
            let out = if cfg.algorithm == Algorithm::Alg2 {
                solve_overlay_full(&p, ch, obj, &opts)
            } else {
                solve_overlay_rank1(&p, ch, obj, &opts)
            };
            match out {
                Ok(s) => DropOutcome::Feasible {
                    ee: s.ee,
                    r2: s.r2,
                    tx_power: s.tx_power,
                    iterations: s.iterations,
                },
                Err(
                    OverlayError::InfeasibleR1Star { .. }
                    | OverlayError::Rank1Infeasible
                    | OverlayError::InitInfeasible
                    | OverlayError::UnderlayRegime,
                ) => DropOutcome::InfeasibleR1Star,
                Err(OverlayError::R2StarInfeasible) => DropOutcome::InfeasibleR2Star,
                Err(e) => DropOutcome::Failed(e.to_string()),
            }
        }
    }
}

/// Per-drop outcomes at every sweep point, in sweep then drop order.
pub fn evaluate_sweep(cfg: &ExperimentConfig, drops: &[Drop]) -> Vec<Vec<DropOutcome>> {
    cfg.p2_sweep_dbw
        .iter()
        .map(|&p2| {
            drops
                .par_iter()
                .map(|d| evaluate_drop(cfg, d, p2))
                .collect()
        })
        .collect()
}

pub fn aggregate(p2_dbw: f64, outcomes: &[DropOutcome]) -> ResultRow {
    let mut row = ResultRow {
        p2_dbw,
        mean_ee: 0.0,
        mean_r2: 0.0,
        mean_tx_power: 0.0,
        mean_iterations: 0.0,
        n_feasible: 0,
        n_infeasible_r2star: 0,
        n_infeasible_r1star: 0,
        n_failed: 0,
    };
    for o in outcomes {
        match o {
            DropOutcome::Feasible {
                ee,
                r2,
                tx_power,
                iterations,
            } => {
                row.n_feasible += 1;
                row.mean_ee += ee;
                row.mean_r2 += r2;
                row.mean_tx_power += tx_power;
                row.mean_iterations += *iterations as f64;
            }
            DropOutcome::InfeasibleR2Star => row.n_infeasible_r2star += 1,
            DropOutcome::InfeasibleR1Star => row.n_infeasible_r1star += 1,
            DropOutcome::Failed(_) => row.n_failed += 1,
        }
    }
    let n = row.n_feasible as f64;
    for v in [
        &mut row.mean_ee,
        &mut row.mean_r2,
        &mut row.mean_tx_power,
        &mut row.mean_iterations,
    ] {
        *v = if row.n_feasible > 0 { *v / n } else { f64::NAN };
    }
    row
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, HarnessError> {
    cfg.validate()?;
    let drops = generate_drops(cfg)?;
    Ok(run_on_drops(cfg, &drops))
}

/// [`run_experiment`] on drops generated beforehand.
pub fn run_on_drops(cfg: &ExperimentConfig, drops: &[Drop]) -> Vec<ResultRow> {
    let all = evaluate_sweep(cfg, drops);
    cfg.p2_sweep_dbw
        .iter()
        .zip(&all)
        .map(|(&p2, outcomes)| {
            for (d, o) in drops.iter().zip(outcomes) {
                if let DropOutcome::Failed(msg) = o {
                    log::warn!(
                        "{}: drop {} at P2 = {p2} dBW failed: {msg}",
                        cfg.name,
                        d.index
                    );
                }
            }
            aggregate(p2, outcomes)
        })
        .collect()
}

/// Decimal rendering with 9 significant digits.
pub fn format_sig9(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let (_, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let rounded: f64 = sci.parse().expect("round trip");
    let decimals = (8 - exp).max(0) as usize;
    format!("{rounded:.decimals$}")
}

pub fn csv_string(rows: &[ResultRow]) -> String {
    let mut s = String::new();
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            format_sig9(r.p2_dbw),
            format_sig9(r.mean_ee),
            format_sig9(r.mean_r2),
            format_sig9(r.mean_tx_power),
            format_sig9(r.mean_iterations),
            r.n_feasible,
            r.n_infeasible_r2star,
            r.n_infeasible_r1star
        )
        .expect("write to string");
    }
    s
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<(), HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::EmptyResults);
    }
    std::fs::write(path, csv_string(rows)).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a file written by [`emit_csv`]; `n_failed` is not stored and reads as 0.
pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let bad = |line: usize, what: &str| {
        HarnessError::Unsupported(format!("{}:{line}: {what}", path.display()))
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => return Err(bad(1, "unexpected header")),
    }
    lines
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 8 {
                return Err(bad(i + 1, "expected 8 fields"));
            }
            let num = |k: usize| f[k].parse::<f64>().map_err(|_| bad(i + 1, "bad number"));
            let cnt = |k: usize| f[k].parse::<usize>().map_err(|_| bad(i + 1, "bad count"));
            Ok(ResultRow {
                p2_dbw: num(0)?,
                mean_ee: num(1)?,
                mean_r2: num(2)?,
                mean_tx_power: num(3)?,
                mean_iterations: num(4)?,
                n_feasible: cnt(5)?,
                n_infeasible_r2star: cnt(6)?,
                n_infeasible_r1star: cnt(7)?,
                n_failed: 0,
            })
        })
        .collect()
}

/// Feasibility classes of the drops at one sweep point, without optimizing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Census {
    pub drops: usize,
    /// Underlay: target within the direct capacity. Overlay: target reachable by relaying.
    pub feasible: usize,
    pub infeasible_r1star: usize,
    /// Overlay only: target already met by the direct link.
    pub underlay_regime: usize,
    /// Underlay only: primary not decodable at the secondary receiver even without interference.
    pub no_cancellation: usize,
}

pub fn census(cfg: &ExperimentConfig, drops: &[Drop], p2_dbw: f64) -> Census {
    let mut c = Census {
        drops: drops.len(),
        ..Census::default()
    };
    for d in drops {
        let p = drop_params(cfg, d, p2_dbw);
        match cfg.scenario {
            Scenario::Underlay => {
                if p.r1_star <= direct_capacity(&p, &d.channels) * (1.0 + 1e-12) {
                    c.feasible += 1;
                    if p.r1_star > 0.0 && p.r1_star >= crate::model::r12_at_zero(&p, &d.channels) {
                        c.no_cancellation += 1;
                    }
                } else {
                    c.infeasible_r1star += 1;
                }
            }
            Scenario::Overlay => match check_feasibility(&p, &d.channels) {
                Ok(Feasibility::Feasible { .. }) => c.feasible += 1,
                Ok(Feasibility::UnderlayRegime) => c.underlay_regime += 1,
                Ok(Feasibility::InfeasibleR1Star { .. }) | Err(_) => c.infeasible_r1star += 1,
            },
        }
    }
    c
}

/// Allocator against brute-force search over the same drops.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OracleReport {
    pub compared: usize,
    /// Largest `|ee_alg - ee_oracle| / ee_oracle`.
    pub max_rel_deviation: f64,
    /// Largest `(ee_oracle - ee_alg) / ee_oracle`; positive means the grid found a better point.
    pub max_oracle_excess: f64,
    /// Drops where exactly one of the two found a feasible point.
    pub feasibility_mismatches: usize,
}

/// Runs the matching oracle on every drop and sweep point: the scalar grid
/// for underlay (single-antenna only) or the rank-one grid for overlay
/// (at most two secondary antennas).
pub fn oracle_compare(
    cfg: &ExperimentConfig,
    drops: &[Drop],
) -> Result<OracleReport, HarnessError> {
    let p = &cfg.params;
    match cfg.scenario {
        Scenario::Underlay if (p.n_t1, p.n_t2, p.n_r) != (1, 1, 1) => {
            return Err(HarnessError::Unsupported(
                "underlay oracle needs n_t1 = n_t2 = n_r = 1".into(),
            ))
        }
        Scenario::Overlay if p.n_t2 > 2 => {
            return Err(HarnessError::Unsupported(
                "overlay oracle needs n_t2 <= 2".into(),
            ))
        }
        _ => {}
    }
    if cfg.mode != Mode::MaximizeEE {
        return Err(HarnessError::Unsupported(
            "oracles compare energy-efficiency runs only".into(),
        ));
    }
    let mut report = OracleReport::default();
    for &p2 in &cfg.p2_sweep_dbw {
        let pairs: Vec<(Option<f64>, Option<f64>)> = drops
            .iter()
            .map(|d| {
                let params = drop_params(cfg, d, p2);
                let alg = match evaluate_drop(cfg, d, p2) {
                    DropOutcome::Feasible { ee, .. } => Some(ee),
                    _ => None,
                };
                let grid = match cfg.scenario {
                    Scenario::Underlay => {
                        grid_underlay_scalar(&params, &d.channels, DEFAULT_UNDERLAY_GRID)
                            .map(|g| g.ee)
                    }
                    Scenario::Overlay => {
                        grid_overlay_rank1(&params, &d.channels, &OverlayGrid::default())
                            .map(|g| g.ee)
                    }
                };
                (alg, grid)
            })
            .collect();
        for (alg, grid) in pairs {
            match (alg, grid) {
                (Some(a), Some(g)) => {
                    report.compared += 1;
                    let scale = g.abs().max(f64::MIN_POSITIVE);
                    report.max_rel_deviation = report.max_rel_deviation.max((a - g).abs() / scale);
                    report.max_oracle_excess = report.max_oracle_excess.max((g - a) / scale);
                }
                (None, None) => {}
                _ => report.feasibility_mismatches += 1,
            }
        }
    }
    Ok(report)
}
