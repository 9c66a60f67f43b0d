//! Flat `key = value` experiment files.
//!
//! ```text
//! # underlay sweep
//! name = demo
//! scenario = underlay
//! mode = ee, rate
//! algorithm = alg1
//! r_percent = 50, 75
//! p2_dbw = -30, -26, -22
//! n_drops = 100
//! ```
//!
//! `mode`, `algorithm` and `r_percent` accept comma-separated lists; the file
//! then describes one series per combination. `p2_dbw` also accepts the range
//! form `start:stop:step` (inclusive). Power keys ending in `_dbw` are the only
//! place where dBW appears; everything is converted to W on load.
//!
//! | key | default |
//! |-----|---------|
//! | `name` | `experiment` |
//! | `scenario` | `underlay` (`overlay`) |
//! | `mode` | `ee` (`rate`) |
//! | `algorithm` | `alg1` for underlay, `alg2` for overlay (`alg3`) |
//! | `r_percent` | `75` for underlay, `125` for overlay |
//! | `p2_dbw` | `-30:-2:4` |
//! | `n_drops` | `1000` |
//! | `seed` | `0` |
//! | `eps` | `1e-3` |
//! | `p1_dbw` | `-10` for underlay, `-20` for overlay |
//! | `pc_w` | `1` |
//! | `alpha` | `10` |
//! | `n_t1`, `n_t2`, `n_r` | `2` |
//! | `bandwidth_hz` | `180000` |
//! | `n0_dbm_per_hz` | `-174` |
//! | `noise_figure_db` | `3` |
//! | `i_out_w` | `0` |
//! | `r2_star_bps` | `0` |
//! | `cell_radius_m`, `min_ap_distance_m`, `d2d_min_m`, `d2d_max_m` | `500`, `10`, `10`, `100` |
//! | `pathloss_exponent`, `shadowing_std_db` | `4.5`, `6` |
//! | `overlay_ratio_min`, `overlay_ratio_max` | `0.1`, `0.9` |
//! | `output` | none |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{DropConfig, Scenario};
use crate::error::ConfigError;
use crate::model::{dbw_to_watts, noise_power, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    MaximizeEE,
    MaximizeRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    /// Underlay, globally optimal.
    Alg1,
    /// Overlay, full relay covariance.
    Alg2,
    /// Overlay, rank-one relay.
    Alg3,
}

impl Mode {
    fn key(self) -> &'static str {
        match self {
            Mode::MaximizeEE => "ee",
            Mode::MaximizeRate => "rate",
        }
    }
}

impl Algorithm {
    fn key(self) -> &'static str {
        match self {
            Algorithm::Alg1 => "alg1",
            Algorithm::Alg2 => "alg2",
            Algorithm::Alg3 => "alg3",
        }
    }
}

/// One series: a fixed scenario, mode, algorithm and target over a P2 sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub scenario: Scenario,
    pub mode: Mode,
    pub algorithm: Algorithm,
    pub p2_sweep_dbw: Vec<f64>,
    /// Primary target as a percentage of the drop's direct-link capacity.
    pub r_percent: f64,
    pub n_drops: usize,
    pub drop_cfg: DropConfig,
    /// `p2` and `r1_star` are filled per drop and sweep point.
    pub params: SystemParams,
    /// Relative stopping tolerance of the overlay loop.
    pub eps: f64,
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.p2_sweep_dbw.is_empty() {
            return bad("p2 sweep is empty".into());
        }
        if self.p2_sweep_dbw.iter().any(|v| !v.is_finite()) {
            return bad("p2 sweep has a non-finite value".into());
        }
        if self.n_drops == 0 {
            return bad("n_drops must be at least 1".into());
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if !(self.r_percent >= 0.0 && self.r_percent.is_finite()) {
            return bad(format!(
                "r_percent must be nonnegative, got {}",
                self.r_percent
            ));
        }
        match (self.scenario, self.algorithm) {
            (Scenario::Underlay, Algorithm::Alg1) => {
                if self.r_percent > 100.0 {
                    return bad(format!(
                        "underlay needs r_percent <= 100, got {}",
                        self.r_percent
                    ));
                }
            }
            (Scenario::Overlay, Algorithm::Alg2 | Algorithm::Alg3) => {
                if self.r_percent <= 100.0 {
                    return bad(format!(
                        "overlay needs r_percent > 100, got {}",
                        self.r_percent
                    ));
                }
            }
            (s, a) => {
                return bad(format!(
                    "algorithm {} does not apply to the {s:?} scenario",
                    a.key()
                ))
            }
        }
        if self.drop_cfg.scenario != self.scenario {
            return bad("drop geometry scenario differs from the experiment scenario".into());
        }
        self.drop_cfg
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.params
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.params.alpha <= 0.0 {
            return bad("alpha must be positive".into());
        }
        Ok(())
    }

    /// Short tag naming the series, e.g. `ee_alg1_r75`.
    pub fn series_label(&self) -> String {
        format!(
            "{}_{}_r{}",
            self.mode.key(),
            self.algorithm.key(),
            self.r_percent
        )
    }

    /// The file form of this single series; it parses back to an equal config.
    pub fn to_config_text(&self) -> String {
        let p = &self.params;
        let d = &self.drop_cfg;
        let scen = match self.scenario {
            Scenario::Underlay => "underlay",
            Scenario::Overlay => "overlay",
        };
        let sweep: Vec<String> = self.p2_sweep_dbw.iter().map(|v| format!("{v}")).collect();
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("write to string");
        kv("name", self.name.clone());
        kv("scenario", scen.into());
        kv("mode", self.mode.key().into());
        kv("algorithm", self.algorithm.key().into());
        kv("r_percent", format!("{}", self.r_percent));
        kv("p2_dbw", sweep.join(", "));
        kv("n_drops", self.n_drops.to_string());
        kv("seed", d.seed.to_string());
        kv("eps", format!("{:e}", self.eps));
        kv("p1_w", format!("{:e}", p.p1));
        kv("pc_w", format!("{}", p.p_c));
        kv("alpha", format!("{}", p.alpha));
        kv("n_t1", p.n_t1.to_string());
        kv("n_t2", p.n_t2.to_string());
        kv("n_r", p.n_r.to_string());
        kv("bandwidth_hz", format!("{}", p.bandwidth));
        kv("noise_w", format!("{:e}", p.noise_power));
        kv("r2_star_bps", format!("{}", p.r2_star));
        kv("cell_radius_m", format!("{}", d.cell_radius_m));
        kv("min_ap_distance_m", format!("{}", d.min_ap_distance_m));
        kv("d2d_min_m", format!("{}", d.d2d_min_m));
        kv("d2d_max_m", format!("{}", d.d2d_max_m));
        kv("pathloss_exponent", format!("{}", d.pathloss_exponent));
        kv("shadowing_std_db", format!("{}", d.shadowing_std_db));
        kv(
            "overlay_ratio_min",
            format!("{}", d.overlay_relay_ratio_min),
        );
        kv(
            "overlay_ratio_max",
            format!("{}", d.overlay_relay_ratio_max),
        );
        if let Some(o) = &self.output_path {
            kv("output", o.display().to_string());
        }
        s
    }
}

const KEYS: &[&str] = &[
    "name",
    "scenario",
    "mode",
    "algorithm",
    "r_percent",
    "p2_dbw",
    "n_drops",
    "seed",
    "eps",
    "p1_dbw",
    "p1_w",
    "pc_w",
    "alpha",
    "n_t1",
    "n_t2",
    "n_r",
    "bandwidth_hz",
    "n0_dbm_per_hz",
    "noise_figure_db",
    "i_out_w",
    "noise_w",
    "r2_star_bps",
    "cell_radius_m",
    "min_ap_distance_m",
    "d2d_min_m",
    "d2d_max_m",
    "pathloss_exponent",
    "shadowing_std_db",
    "overlay_ratio_min",
    "overlay_ratio_max",
    "output",
];

/// Parses a config file into its series, in `mode`, `algorithm`, `r_percent` order.
pub fn parse_config(text: &str) -> Result<Vec<ExperimentConfig>, ConfigError> {
    let mut map: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Parse {
            line: line_no,
            message: format!("expected key = value, got {line:?}"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("unknown key {k:?}"),
            });
        }
        if map.insert(k, (line_no, v)).is_some() {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("duplicate key {k:?}"),
            });
        }
    }
    let get = |k: &str| map.get(k).copied();

    let scenario = match get("scenario") {
        None => Scenario::Underlay,
        Some((l, v)) => match v.to_ascii_lowercase().as_str() {
            "underlay" => Scenario::Underlay,
            "overlay" => Scenario::Overlay,
            _ => {
                return Err(ConfigError::Parse {
                    line: l,
                    message: format!("unknown scenario {v:?}"),
                })
            }
        },
    };
    let overlay = scenario == Scenario::Overlay;

    let modes = match get("mode") {
        None => vec![Mode::MaximizeEE],
        Some((l, v)) => list(l, v, |s| match s.to_ascii_lowercase().as_str() {
            "ee" => Some(Mode::MaximizeEE),
            "rate" => Some(Mode::MaximizeRate),
            _ => None,
        })?,
    };
    let algorithms = match get("algorithm") {
        None => vec![if overlay {
            Algorithm::Alg2
        } else {
            Algorithm::Alg1
        }],
        Some((l, v)) => list(l, v, |s| match s.to_ascii_lowercase().as_str() {
            "alg1" => Some(Algorithm::Alg1),
            "alg2" => Some(Algorithm::Alg2),
            "alg3" => Some(Algorithm::Alg3),
            _ => None,
        })?,
    };
    let r_values = match get("r_percent") {
        None => vec![if overlay { 125.0 } else { 75.0 }],
        Some((l, v)) => list(l, v, |s| s.parse::<f64>().ok())?,
    };
    let p2_sweep_dbw = match get("p2_dbw") {
        None => range(-30.0, -2.0, 4.0),
        Some((l, v)) => parse_sweep(l, v)?,
    };

    let num = |k: &str, default: f64| -> Result<f64, ConfigError> {
        match get(k) {
            None => Ok(default),
            Some((l, v)) => v.parse::<f64>().map_err(|_| ConfigError::Parse {
                line: l,
                message: format!("{k}: not a number: {v:?}"),
            }),
        }
    };
    let int = |k: &str, default: u64| -> Result<u64, ConfigError> {
        match get(k) {
            None => Ok(default),
            Some((l, v)) => v.parse::<u64>().map_err(|_| ConfigError::Parse {
                line: l,
                message: format!("{k}: not an integer: {v:?}"),
            }),
        }
    };

    if get("p1_dbw").is_some() && get("p1_w").is_some() {
        return Err(ConfigError::Invalid(
            "give either p1_dbw or p1_w, not both".into(),
        ));
    }
    let p1 = match get("p1_w") {
        Some(_) => num("p1_w", 0.0)?,
        None => dbw_to_watts(num("p1_dbw", if overlay { -20.0 } else { -10.0 })?),
    };
    let bandwidth = num("bandwidth_hz", 180e3)?;
    let thermal_keys = ["n0_dbm_per_hz", "noise_figure_db", "i_out_w"];
    if get("noise_w").is_some() && thermal_keys.iter().any(|k| get(k).is_some()) {
        return Err(ConfigError::Invalid(
            "noise_w overrides n0_dbm_per_hz, noise_figure_db and i_out_w".into(),
        ));
    }
    let noise = match get("noise_w") {
        Some(_) => num("noise_w", 0.0)?,
        None => noise_power(
            num("n0_dbm_per_hz", -174.0)?,
            num("noise_figure_db", 3.0)?,
            bandwidth,
            num("i_out_w", 0.0)?,
        ),
    };
    let params = SystemParams {
        n_t1: int("n_t1", 2)? as usize,
        n_t2: int("n_t2", 2)? as usize,
        n_r: int("n_r", 2)? as usize,
        p1,
        p2: 0.0,
        noise_power: noise,
        bandwidth,
        alpha: num("alpha", 10.0)?,
        p_c: num("pc_w", 1.0)?,
        r1_star: 0.0,
        r2_star: num("r2_star_bps", 0.0)?,
    };
    let defaults = DropConfig::default();
    let drop_cfg = DropConfig {
        cell_radius_m: num("cell_radius_m", defaults.cell_radius_m)?,
        min_ap_distance_m: num("min_ap_distance_m", defaults.min_ap_distance_m)?,
        d2d_min_m: num("d2d_min_m", defaults.d2d_min_m)?,
        d2d_max_m: num("d2d_max_m", defaults.d2d_max_m)?,
        pathloss_exponent: num("pathloss_exponent", defaults.pathloss_exponent)?,
        shadowing_std_db: num("shadowing_std_db", defaults.shadowing_std_db)?,
        overlay_relay_ratio_min: num("overlay_ratio_min", defaults.overlay_relay_ratio_min)?,
        overlay_relay_ratio_max: num("overlay_ratio_max", defaults.overlay_relay_ratio_max)?,
        seed: int("seed", 0)?,
        scenario,
    };
    let base = ExperimentConfig {
        name: get("name").map_or_else(|| "experiment".to_string(), |(_, v)| v.to_string()),
        scenario,
        mode: Mode::MaximizeEE,
        algorithm: algorithms[0],
        p2_sweep_dbw,
        r_percent: r_values[0],
        n_drops: int("n_drops", 1000)? as usize,
        drop_cfg,
        params,
        eps: num("eps", 1e-3)?,
        output_path: get("output").map(|(_, v)| PathBuf::from(v)),
    };

    let mut out = Vec::new();
    for &mode in &modes {
        for &algorithm in &algorithms {
            for &r_percent in &r_values {
                let cfg = ExperimentConfig {
                    mode,
                    algorithm,
                    r_percent,
                    ..base.clone()
                };
                cfg.validate()?;
                out.push(cfg);
            }
        }
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<Vec<ExperimentConfig>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

fn list<T>(line: usize, v: &str, f: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, ConfigError> {
    let items: Vec<&str> = v.split(',').map(str::trim).collect();
    if items.iter().any(|s| s.is_empty()) {
        return Err(ConfigError::Parse {
            line,
            message: format!("empty list item in {v:?}"),
        });
    }
    items
        .into_iter()
        .map(|s| {
            f(s).ok_or_else(|| ConfigError::Parse {
                line,
                message: format!("bad value {s:?}"),
            })
        })
        .collect()
}

fn parse_sweep(line: usize, v: &str) -> Result<Vec<f64>, ConfigError> {
    if v.contains(':') {
        let parts: Vec<&str> = v.split(':').map(str::trim).collect();
        let nums: Option<Vec<f64>> = parts.iter().map(|s| s.parse::<f64>().ok()).collect();
        match nums.as_deref() {
            Some(&[start, stop, step]) if step > 0.0 && start <= stop => {
                Ok(range(start, stop, step))
            }
            _ => Err(ConfigError::Parse {
                line,
                message: format!("expected start:stop:step with step > 0, got {v:?}"),
            }),
        }
    } else {
        list(line, v, |s| s.parse::<f64>().ok())
    }
}

fn range(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}
