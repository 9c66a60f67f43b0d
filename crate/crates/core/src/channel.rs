//! Random network drops: terminal placement in a circular cell, distance
//! path loss with log-normal shadowing, and Rayleigh small-scale fading.
//!
//! Every drop is a pure function of `(config, antenna counts, drop index)`.
//! The generator is ChaCha8 seeded from `DropConfig::seed`, with the drop
//! index selecting an independent stream, so drops can be produced in any
//! order or in parallel and still be bit-identical.

use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::ChannelError;
use crate::linalg::{CMat, CVec};
use crate::model::{ChannelSet, SystemParams};

/// Placement attempts allowed for the overlay geometry rule.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Scenario {
    #[default]
    Underlay,
    Overlay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropConfig {
    pub cell_radius_m: f64,
    /// Minimum primary-receiver distance from the access point.
    pub min_ap_distance_m: f64,
    pub d2d_min_m: f64,
    pub d2d_max_m: f64,
    pub pathloss_exponent: f64,
    pub shadowing_std_db: f64,
    /// Overlay only: bounds on (secondary tx to primary rx) / (primary link length).
    pub overlay_relay_ratio_min: f64,
    pub overlay_relay_ratio_max: f64,
    pub seed: u64,
    pub scenario: Scenario,
}

impl Default for DropConfig {
    fn default() -> Self {
        Self {
            cell_radius_m: 500.0,
            min_ap_distance_m: 10.0,
            d2d_min_m: 10.0,
            d2d_max_m: 100.0,
            pathloss_exponent: 4.5,
            shadowing_std_db: 6.0,
            overlay_relay_ratio_min: 0.1,
            overlay_relay_ratio_max: 0.9,
            seed: 0,
            scenario: Scenario::Underlay,
        }
    }
}

impl DropConfig {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let bad = |m: &str| Err(ChannelError::InvalidConfig(m.to_string()));
        let vals = [
            self.cell_radius_m,
            self.min_ap_distance_m,
            self.d2d_min_m,
            self.d2d_max_m,
            self.pathloss_exponent,
            self.shadowing_std_db,
            self.overlay_relay_ratio_min,
            self.overlay_relay_ratio_max,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return bad("non-finite value");
        }
        if self.cell_radius_m <= 0.0 || self.min_ap_distance_m <= 0.0 || self.d2d_min_m <= 0.0 {
            return bad("radii and distances must be positive");
        }
        if self.min_ap_distance_m >= self.cell_radius_m {
            return bad("min_ap_distance_m must be below cell_radius_m");
        }
        if self.d2d_min_m >= self.d2d_max_m {
            return bad("d2d_min_m must be below d2d_max_m");
        }
        if self.pathloss_exponent <= 0.0 || self.shadowing_std_db < 0.0 {
            return bad("path-loss exponent must be positive and shadowing std nonnegative");
        }
        if !(0.0 <= self.overlay_relay_ratio_min
            && self.overlay_relay_ratio_min < self.overlay_relay_ratio_max)
        {
            return bad("overlay relay ratio bounds must satisfy 0 <= min < max");
        }
        Ok(())
    }
}

/// Large-scale power gains of the five links.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkGains {
    pub h11: f64,
    pub h22: f64,
    pub h12: f64,
    pub h21: f64,
    pub ht: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drop {
    pub index: u64,
    pub primary_tx: [f64; 2],
    pub primary_rx: [f64; 2],
    pub secondary_tx: [f64; 2],
    pub secondary_rx: [f64; 2],
    pub gains: LinkGains,
    pub channels: ChannelSet,
}

impl Drop {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("drop serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ChannelError> {
        serde_json::from_str(s).map_err(|e| ChannelError::Io(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), ChannelError> {
        std::fs::write(path, self.to_json())
            .map_err(|e| ChannelError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, ChannelError> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| ChannelError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }
}

/// `d^-eta * 10^(shadow/10)` with unit gain at 1 m; distances below 1 m are clamped.
pub fn pathloss_gain(d_m: f64, eta: f64, shadow_db: f64) -> f64 {
    d_m.max(1.0).powf(-eta) * 10f64.powf(shadow_db / 10.0)
}

/// One log-normal shadowing realization in dB.
pub fn shadowing_db<R: Rng + ?Sized>(rng: &mut R, std_db: f64) -> f64 {
    if std_db == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, std_db).expect("finite std").sample(rng)
}

/// Matrix of i.i.d. CN(0, 1) entries, filled column by column.
pub fn rayleigh<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re * s, im * s)
    })
}

fn uniform_in_disc<R: Rng + ?Sized>(
    rng: &mut R,
    center: [f64; 2],
    r_min: f64,
    r_max: f64,
) -> [f64; 2] {
    let u: f64 = rng.gen();
    let r = (r_min * r_min + u * (r_max * r_max - r_min * r_min)).sqrt();
    let theta = rng.gen::<f64>() * std::f64::consts::TAU;
    [center[0] + r * theta.cos(), center[1] + r * theta.sin()]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// The random generator used for drop `index`.
pub fn drop_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Generates drop number `index` for the antenna counts in `params`.
pub fn generate_drop(
    cfg: &DropConfig,
    params: &SystemParams,
    index: u64,
) -> Result<Drop, ChannelError> {
    cfg.validate()?;
    if params.n_t1 == 0 || params.n_t2 == 0 || params.n_r == 0 {
        return Err(ChannelError::InvalidConfig(
            "antenna counts must be positive".into(),
        ));
    }
    let mut rng = drop_rng(cfg.seed, index);
    let primary_tx = [0.0, 0.0];
    let (primary_rx, secondary_tx, secondary_rx) = place(cfg, &mut rng, primary_tx)?;

    let eta = cfg.pathloss_exponent;
    let mut gain = |a, b| {
        pathloss_gain(
            dist(a, b),
            eta,
            shadowing_db(&mut rng, cfg.shadowing_std_db),
        )
    };
    let gains = LinkGains {
        h11: gain(primary_tx, primary_rx),
        h22: gain(secondary_tx, secondary_rx),
        h12: gain(primary_tx, secondary_rx),
        h21: gain(secondary_tx, primary_rx),
        ht: gain(primary_tx, secondary_tx),
    };

    let (n1, n2, nr) = (params.n_t1, params.n_t2, params.n_r);
    let col = |m: CMat| -> CVec { m.column(0).into_owned() };
    let channels = ChannelSet {
        h11: col(rayleigh(&mut rng, n1, 1)) * Complex64::from(gains.h11.sqrt()),
        h22: rayleigh(&mut rng, nr, n2) * Complex64::from(gains.h22.sqrt()),
        h12: rayleigh(&mut rng, nr, n1) * Complex64::from(gains.h12.sqrt()),
        h21: col(rayleigh(&mut rng, n2, 1)) * Complex64::from(gains.h21.sqrt()),
        ht: rayleigh(&mut rng, n2, n1) * Complex64::from(gains.ht.sqrt()),
    };
    Ok(Drop {
        index,
        primary_tx,
        primary_rx,
        secondary_tx,
        secondary_rx,
        gains,
        channels,
    })
}

type Placement = ([f64; 2], [f64; 2], [f64; 2]);

fn place<R: Rng + ?Sized>(
    cfg: &DropConfig,
    rng: &mut R,
    ap: [f64; 2],
) -> Result<Placement, ChannelError> {
    let radius = cfg.cell_radius_m;
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let primary_rx = uniform_in_disc(rng, ap, cfg.min_ap_distance_m, radius);
        let secondary_tx = uniform_in_disc(rng, ap, 0.0, radius);
        let secondary_rx = uniform_in_disc(rng, secondary_tx, cfg.d2d_min_m, cfg.d2d_max_m);
        if cfg.scenario == Scenario::Overlay {
            let ratio = dist(secondary_tx, primary_rx) / dist(ap, primary_rx);
            if !(cfg.overlay_relay_ratio_min..=cfg.overlay_relay_ratio_max).contains(&ratio) {
                continue;
            }
        }
        return Ok((primary_rx, secondary_tx, secondary_rx));
    }
    Err(ChannelError::PlacementFailed(MAX_PLACEMENT_ATTEMPTS))
}
