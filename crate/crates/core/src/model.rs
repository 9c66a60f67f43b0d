//! System parameters, channel realizations and the closed-form rate and
//! energy-efficiency functionals shared by every allocator.
//!
//! Rates are returned in bit/s (per-channel-use value times bandwidth) and
//! energy efficiencies in bit/Joule. Overlay rates carry the half-duplex 1/2
//! pre-log.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::linalg::{
    self, hermitize, identity, log2_det_pd, norm_sqr, quad_form, trace_re, CMat, CVec, HermitianPsd,
};

pub fn dbw_to_watts(dbw: f64) -> f64 {
    10f64.powf(dbw / 10.0)
}

pub fn watts_to_dbw(w: f64) -> f64 {
    10.0 * w.log10()
}

/// Thermal noise plus out-of-system interference: `N0 * B * F + I_out`.
pub fn noise_power(
    n0_dbm_per_hz: f64,
    noise_figure_db: f64,
    bandwidth_hz: f64,
    i_out_w: f64,
) -> f64 {
    let n0_w = 10f64.powf((n0_dbm_per_hz - 30.0) / 10.0);
    n0_w * bandwidth_hz * 10f64.powf(noise_figure_db / 10.0) + i_out_w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub n_t1: usize,
    pub n_t2: usize,
    pub n_r: usize,
    /// Primary transmit power, W.
    pub p1: f64,
    /// Secondary maximum consumed transmit power, W.
    pub p2: f64,
    /// Receiver noise power, W.
    pub noise_power: f64,
    /// Hz.
    pub bandwidth: f64,
    /// Power-amplifier inefficiency.
    pub alpha: f64,
    /// Static circuit power, W.
    pub p_c: f64,
    /// Primary rate target, bit/s.
    pub r1_star: f64,
    /// Secondary rate target, bit/s.
    pub r2_star: f64,
}

impl SystemParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |what: &str| Err(ModelError::InvalidParam(what.to_string()));
        if self.n_t1 == 0 || self.n_t2 == 0 || self.n_r == 0 {
            return bad("antenna counts must be positive");
        }
        let finite = [
            self.p1,
            self.p2,
            self.noise_power,
            self.bandwidth,
            self.alpha,
            self.p_c,
            self.r1_star,
            self.r2_star,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite("system parameters"));
        }
        if self.p1 <= 0.0 {
            return bad("p1 must be > 0");
        }
        if self.p2 < 0.0 {
            return bad("p2 must be >= 0");
        }
        if self.noise_power <= 0.0 {
            return bad("noise_power must be > 0");
        }
        if self.bandwidth <= 0.0 {
            return bad("bandwidth must be > 0");
        }
        if self.alpha < 0.0 {
            return bad("alpha must be >= 0");
        }
        if self.p_c <= 0.0 {
            return bad("p_c must be > 0");
        }
        if self.r1_star < 0.0 || self.r2_star < 0.0 {
            return bad("rate targets must be >= 0");
        }
        Ok(())
    }
}

/// What the allocators maximize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Objective {
    /// Secondary bit/Joule energy efficiency.
    #[default]
    EnergyEfficiency,
    /// Secondary rate: the EE objective with alpha = 0 and P_c = 1. Constraints
    /// keep the true alpha.
    Rate,
}

impl Objective {
    /// `(alpha, P_c)` used in the objective denominator.
    pub fn denominator_weights(self, p: &SystemParams) -> (f64, f64) {
        match self {
            Objective::EnergyEfficiency => (p.alpha, p.p_c),
            Objective::Rate => (0.0, 1.0),
        }
    }
}

/// One realization of the five channels between the four terminals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    /// Primary direct channel, length n_t1.
    #[serde(with = "crate::serde_cplx::cvec")]
    pub h11: CVec,
    /// Secondary direct channel, n_r x n_t2.
    #[serde(with = "crate::serde_cplx::cmat")]
    pub h22: CMat,
    /// Primary transmitter to secondary receiver, n_r x n_t1.
    #[serde(with = "crate::serde_cplx::cmat")]
    pub h12: CMat,
    /// Secondary transmitter to primary receiver, length n_t2.
    #[serde(with = "crate::serde_cplx::cvec")]
    pub h21: CVec,
    /// Primary transmitter to secondary transmitter, n_t2 x n_t1.
    #[serde(with = "crate::serde_cplx::cmat")]
    pub ht: CMat,
}

impl ChannelSet {
    pub fn validate(&self, p: &SystemParams) -> Result<(), ModelError> {
        let dims = [
            ("h11", self.h11.nrows(), 1, p.n_t1, 1),
            ("h22", self.h22.nrows(), self.h22.ncols(), p.n_r, p.n_t2),
            ("h12", self.h12.nrows(), self.h12.ncols(), p.n_r, p.n_t1),
            ("h21", self.h21.nrows(), 1, p.n_t2, 1),
            ("ht", self.ht.nrows(), self.ht.ncols(), p.n_t2, p.n_t1),
        ];
        for (name, r, c, er, ec) in dims {
            if r != er || c != ec {
                return Err(ModelError::Dimension(format!(
                    "{name} is {r}x{c}, expected {er}x{ec}"
                )));
            }
        }
        let all = self
            .h11
            .iter()
            .chain(self.h22.iter())
            .chain(self.h12.iter())
            .chain(self.h21.iter())
            .chain(self.ht.iter());
        for z in all {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(ModelError::NonFinite("channel entry"));
            }
        }
        Ok(())
    }

    pub fn h11_norm_sqr(&self) -> f64 {
        norm_sqr(&self.h11)
    }

    /// `||H_t h11||^2`.
    pub fn ht_h11_norm_sqr(&self) -> f64 {
        norm_sqr(&(&self.ht * &self.h11))
    }
}

fn check_cov(name: &str, k: &HermitianPsd, n: usize) -> Result<(), ModelError> {
    if k.dim() != n {
        return Err(ModelError::Dimension(format!(
            "{name} is {}x{}, expected {n}x{n}",
            k.dim(),
            k.dim()
        )));
    }
    Ok(())
}

fn check_inputs(p: &SystemParams, ch: &ChannelSet) -> Result<(), ModelError> {
    p.validate()?;
    ch.validate(p)
}

/// Interference-free primary SNR `P1 ||h11||^2 / sigma^2` under MRT.
pub fn direct_snr(p: &SystemParams, ch: &ChannelSet) -> f64 {
    p.p1 * ch.h11_norm_sqr() / p.noise_power
}

/// Primary point-to-point capacity `B log2(1 + P1||h11||^2/sigma^2)`, bit/s.
pub fn direct_capacity(p: &SystemParams, ch: &ChannelSet) -> f64 {
    p.bandwidth * (1.0 + direct_snr(p, ch)).log2()
}

/// Primary signal covariance at the secondary receiver,
/// `(P1/||h11||^2) H12 h11 h11^H H12^H`.
pub fn q1_matrix(p: &SystemParams, ch: &ChannelSet) -> CMat {
    let n2 = ch.h11_norm_sqr();
    if n2 == 0.0 {
        return CMat::zeros(p.n_r, p.n_r);
    }
    let g = &ch.h12 * &ch.h11;
    hermitize(&linalg::outer(&g, &g).scale(p.p1 / n2))
}

/// Covariance of the signal received by the relay, `(P1/||h11||^2) H_t h11 h11^H H_t^H + sigma^2 I`.
pub fn relay_input_covariance(p: &SystemParams, ch: &ChannelSet) -> CMat {
    let n2 = ch.h11_norm_sqr();
    let mut m = identity(p.n_t2).scale(p.noise_power);
    if n2 > 0.0 {
        let g = &ch.ht * &ch.h11;
        m += linalg::outer(&g, &g).scale(p.p1 / n2);
    }
    hermitize(&m)
}

/// `sigma^2 I + H K H^H (+ extra)`, Hermitian.
fn noise_plus(p: &SystemParams, h: &CMat, k: &CMat, extra: Option<&CMat>) -> CMat {
    let mut z = identity(h.nrows()).scale(p.noise_power) + h * k * h.adjoint();
    if let Some(e) = extra {
        z += e;
    }
    hermitize(&z)
}

fn log2_det(m: &CMat) -> f64 {
    log2_det_pd(m).expect("noise-plus-PSD matrix is positive definite")
}

/// Primary rate under underlay operation, bit/s.
pub fn primary_rate_underlay(
    p: &SystemParams,
    ch: &ChannelSet,
    k21: &HermitianPsd,
    k22: &HermitianPsd,
) -> Result<f64, ModelError> {
    check_inputs(p, ch)?;
    check_cov("k21", k21, p.n_t2)?;
    check_cov("k22", k22, p.n_t2)?;
    let interference = k21.quad(&ch.h21) + k22.quad(&ch.h21);
    let sinr = p.p1 * ch.h11_norm_sqr() / (p.noise_power + interference.max(0.0));
    Ok(p.bandwidth * (1.0 + sinr).log2())
}

/// Per-channel-use rate at which the primary message can be decoded at the
/// secondary receiver while `k22` acts as interference.
pub(crate) fn r12_per_hz(p: &SystemParams, q1: &CMat, h22: &CMat, k22: &CMat) -> f64 {
    let z = noise_plus(p, h22, k22, None);
    let zq = &z + q1;
    (log2_det(&zq) - log2_det(&z)).max(0.0)
}

/// Rate of the primary message at the secondary receiver, bit/s.
pub fn r12_rate(p: &SystemParams, ch: &ChannelSet, k22: &HermitianPsd) -> Result<f64, ModelError> {
    check_inputs(p, ch)?;
    check_cov("k22", k22, p.n_t2)?;
    let q1 = q1_matrix(p, ch);
    Ok(p.bandwidth * r12_per_hz(p, &q1, &ch.h22, k22.matrix()))
}

/// `B log2(1 + P1 ||H12 h11||^2 / (sigma^2 ||h11||^2))`: the rate above at `k22 = 0`.
pub fn r12_at_zero(p: &SystemParams, ch: &ChannelSet) -> f64 {
    let n2 = ch.h11_norm_sqr();
    if n2 == 0.0 {
        return 0.0;
    }
    let g = norm_sqr(&(&ch.h12 * &ch.h11));
    p.bandwidth * (1.0 + p.p1 * g / (p.noise_power * n2)).log2()
}

/// Both algebraic forms of the rate-splitting secondary rate, per channel use.
pub(crate) fn secondary_rate_forms(
    p: &SystemParams,
    q1: &CMat,
    h22: &CMat,
    k21: &CMat,
    k22: &CMat,
) -> (f64, f64) {
    let n_r = h22.nrows();
    let s2 = p.noise_power;
    let sum = k21 + k22;
    let z_sum_q = noise_plus(p, h22, &sum, Some(q1));
    let z22 = noise_plus(p, h22, k22, None);
    let z22_q = &z22 + q1;
    let ln_s2 = n_r as f64 * s2.log2();
    // I + H K22 H^H / s2, then the interference-limited part.
    let first = (log2_det(&z22) - ln_s2) + (log2_det(&z_sum_q) - log2_det(&z22_q));
    let second = (log2_det(&z_sum_q) - ln_s2) - (log2_det(&z22_q) - log2_det(&z22));
    (first, second)
}

/// Secondary rate with rate splitting (k21 decoded under primary interference,
/// k22 after SIC), bit/s.
pub fn secondary_rate_underlay(
    p: &SystemParams,
    ch: &ChannelSet,
    k21: &HermitianPsd,
    k22: &HermitianPsd,
) -> Result<f64, ModelError> {
    check_inputs(p, ch)?;
    check_cov("k21", k21, p.n_t2)?;
    check_cov("k22", k22, p.n_t2)?;
    let q1 = q1_matrix(p, ch);
    let (first, second) = secondary_rate_forms(p, &q1, &ch.h22, k21.matrix(), k22.matrix());
    debug_assert!(
        (first - second).abs() <= 1e-9 * (1.0 + first.abs()),
        "rate forms disagree: {first} vs {second}"
    );
    Ok(p.bandwidth * second.max(0.0))
}

/// Secondary energy efficiency under underlay operation, bit/Joule.
pub fn ee_underlay(
    p: &SystemParams,
    ch: &ChannelSet,
    k21: &HermitianPsd,
    k22: &HermitianPsd,
) -> Result<f64, ModelError> {
    let r2 = secondary_rate_underlay(p, ch, k21, k22)?;
    Ok(r2 / (p.alpha * (k21.trace() + k22.trace()) + p.p_c))
}

/// `X = A M A^H`: covariance radiated by the relay for the primary message.
pub fn relay_covariance(p: &SystemParams, ch: &ChannelSet, relay_a: &CMat) -> CMat {
    let m = relay_input_covariance(p, ch);
    hermitize(&(relay_a * m * relay_a.adjoint()))
}

fn check_relay(p: &SystemParams, relay_a: &CMat, b_cov: &HermitianPsd) -> Result<(), ModelError> {
    if relay_a.nrows() != p.n_t2 || relay_a.ncols() != p.n_t2 {
        return Err(ModelError::Dimension(format!(
            "relay matrix is {}x{}, expected {n}x{n}",
            relay_a.nrows(),
            relay_a.ncols(),
            n = p.n_t2
        )));
    }
    if relay_a
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(ModelError::NonFinite("relay matrix"));
    }
    check_cov("b_cov", b_cov, p.n_t2)
}

/// Primary rate with half-duplex amplify-and-forward relaying and LMMSE
/// combining of both phases, per channel use (1/2 pre-log included).
pub(crate) fn overlay_primary_per_hz(
    p: &SystemParams,
    ch: &ChannelSet,
    relay_a: &CMat,
    b_cov: &CMat,
) -> f64 {
    let s2 = p.noise_power;
    let snr = direct_snr(p, ch);
    let n2 = ch.h11_norm_sqr();
    let mut relay_term = 0.0;
    if n2 > 0.0 {
        let g = (ch.h21.adjoint() * relay_a * &ch.ht * &ch.h11)[(0, 0)].norm_sqr();
        let aah = relay_a * relay_a.adjoint();
        let denom = s2 + quad_form(&(aah.scale(s2) + b_cov), &ch.h21);
        relay_term = p.p1 / n2 * g / denom;
    }
    0.5 * (1.0 + snr + relay_term).log2()
}

/// Secondary overlay rate `(1/2) log2|I + Z^-1 H22 B H22^H|` per channel use.
pub(crate) fn overlay_secondary_per_hz(
    p: &SystemParams,
    h22: &CMat,
    x: &CMat,
    b_cov: &CMat,
) -> f64 {
    let z = noise_plus(p, h22, x, None);
    let zb = noise_plus(p, h22, &(x + b_cov), None);
    (0.5 * (log2_det(&zb) - log2_det(&z))).max(0.0)
}

/// Primary and secondary rates (bit/s) for relay matrix `A` and secondary covariance `B`.
pub fn overlay_rates(
    p: &SystemParams,
    ch: &ChannelSet,
    relay_a: &CMat,
    b_cov: &HermitianPsd,
) -> Result<(f64, f64), ModelError> {
    check_inputs(p, ch)?;
    check_relay(p, relay_a, b_cov)?;
    let x = relay_covariance(p, ch, relay_a);
    let r1 = p.bandwidth * overlay_primary_per_hz(p, ch, relay_a, b_cov.matrix());
    let r2 = p.bandwidth * overlay_secondary_per_hz(p, &ch.h22, &x, b_cov.matrix());
    Ok((r1, r2))
}

/// Secondary energy efficiency under overlay operation, bit/Joule.
pub fn ee_overlay(
    p: &SystemParams,
    ch: &ChannelSet,
    relay_a: &CMat,
    b_cov: &HermitianPsd,
) -> Result<f64, ModelError> {
    let (_, r2) = overlay_rates(p, ch, relay_a, b_cov)?;
    let x = relay_covariance(p, ch, relay_a);
    Ok(r2 / (p.alpha * (trace_re(&x) + b_cov.trace()) + p.p_c))
}

/// Natural-log to base-2 conversion factor, exposed for surrogate gradients.
pub(crate) const INV_LN2: f64 = 1.0 / LN_2;

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub(crate) fn params(n: usize) -> SystemParams {
        SystemParams {
            n_t1: n,
            n_t2: n,
            n_r: n,
            p1: 1.0,
            p2: 1.0,
            noise_power: 1.0,
            bandwidth: 1.0,
            alpha: 1.0,
            p_c: 1.0,
            r1_star: 0.0,
            r2_star: 0.0,
        }
    }

    fn scalar_channels(h11: f64, h22: f64, h12: f64, h21: f64, ht: f64) -> ChannelSet {
        ChannelSet {
            h11: CVec::from_element(1, c(h11, 0.0)),
            h22: CMat::from_element(1, 1, c(h22, 0.0)),
            h12: CMat::from_element(1, 1, c(h12, 0.0)),
            h21: CVec::from_element(1, c(h21, 0.0)),
            ht: CMat::from_element(1, 1, c(ht, 0.0)),
        }
    }

    #[test]
    fn primary_rate_without_interference_is_log2_four() {
        let p = SystemParams {
            p1: 3.0,
            ..params(1)
        };
        let ch = scalar_channels(1.0, 1.0, 1.0, 1.0, 1.0);
        let z = HermitianPsd::zeros(1);
        assert!((primary_rate_underlay(&p, &ch, &z, &z).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn null_cross_channel_removes_interference() {
        let p = SystemParams {
            p1: 3.0,
            ..params(1)
        };
        let ch = scalar_channels(1.0, 1.0, 1.0, 0.0, 1.0);
        let k = HermitianPsd::scaled_identity(1, 5.0);
        let z = HermitianPsd::zeros(1);
        let a = primary_rate_underlay(&p, &ch, &k, &k).unwrap();
        let b = primary_rate_underlay(&p, &ch, &z, &z).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn r12_at_zero_matches_rank_one_identity() {
        let p = SystemParams {
            p1: 2.0,
            noise_power: 0.5,
            ..params(2)
        };
        let ch = ChannelSet {
            h11: CVec::from_vec(vec![c(1.0, 0.5), c(-0.3, 0.2)]),
            h22: CMat::identity(2, 2),
            h12: CMat::from_row_slice(2, 2, &[c(0.4, 0.1), c(0.2, -0.7), c(1.1, 0.0), c(0.0, 0.3)]),
            h21: CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]),
            ht: CMat::identity(2, 2),
        };
        let via_det = r12_rate(&p, &ch, &HermitianPsd::zeros(2)).unwrap();
        assert!((via_det - r12_at_zero(&p, &ch)).abs() < 1e-12);
    }

    #[test]
    fn r12_vanishes_without_cross_link() {
        let p = params(1);
        let ch = scalar_channels(1.0, 1.0, 0.0, 1.0, 1.0);
        assert_eq!(r12_rate(&p, &ch, &HermitianPsd::zeros(1)).unwrap(), 0.0);
    }

    #[test]
    fn secondary_rate_is_zero_without_power() {
        let p = params(1);
        let ch = scalar_channels(1.0, 1.0, 1.0, 1.0, 1.0);
        let z = HermitianPsd::zeros(1);
        assert!(secondary_rate_underlay(&p, &ch, &z, &z).unwrap().abs() < 1e-15);
        assert_eq!(ee_underlay(&p, &ch, &z, &z).unwrap(), 0.0);
    }

    #[test]
    fn interference_free_secondary_rate() {
        let p = SystemParams {
            noise_power: 0.5,
            ..params(1)
        };
        let ch = scalar_channels(1.0, 2.0, 0.0, 1.0, 1.0);
        let z = HermitianPsd::zeros(1);
        let k = HermitianPsd::scaled_identity(1, 0.75);
        let r = secondary_rate_underlay(&p, &ch, &z, &k).unwrap();
        assert!((r - (1.0f64 + 4.0 * 0.75 / 0.5).log2()).abs() < 1e-13);
    }

    #[test]
    fn rate_mode_ee_equals_rate() {
        let p = SystemParams {
            alpha: 0.0,
            p_c: 1.0,
            ..params(1)
        };
        let ch = scalar_channels(1.0, 1.3, 0.4, 1.0, 1.0);
        let k = HermitianPsd::scaled_identity(1, 0.3);
        let z = HermitianPsd::zeros(1);
        let r = secondary_rate_underlay(&p, &ch, &k, &z).unwrap();
        assert_eq!(ee_underlay(&p, &ch, &k, &z).unwrap(), r);
        let p2 = SystemParams { p_c: 2.0, ..p };
        assert!((ee_underlay(&p2, &ch, &k, &z).unwrap() - r / 2.0).abs() < 1e-15);
    }

    #[test]
    fn overlay_rates_without_relaying() {
        let p = SystemParams {
            p1: 3.0,
            bandwidth: 2.0,
            ..params(2)
        };
        let ch = ChannelSet {
            h11: CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]),
            h22: CMat::identity(2, 2),
            h12: CMat::identity(2, 2),
            h21: CVec::from_vec(vec![c(1.0, 0.0), c(0.5, 0.5)]),
            ht: CMat::identity(2, 2),
        };
        let a = CMat::zeros(2, 2);
        let (r1, r2) = overlay_rates(&p, &ch, &a, &HermitianPsd::zeros(2)).unwrap();
        assert!((r1 - 0.5 * 2.0 * 4f64.log2()).abs() < 1e-14);
        assert_eq!(r2, 0.0);
        assert_eq!(
            ee_overlay(&p, &ch, &a, &HermitianPsd::zeros(2)).unwrap(),
            0.0
        );
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = params(2);
        let ch = scalar_channels(1.0, 1.0, 1.0, 1.0, 1.0);
        let z = HermitianPsd::zeros(2);
        assert!(matches!(
            primary_rate_underlay(&p, &ch, &z, &z),
            Err(ModelError::Dimension(_))
        ));
    }

    #[test]
    fn noise_power_from_thermal_floor() {
        // -174 dBm/Hz over 1 Hz with 0 dB noise figure.
        let n = noise_power(-174.0, 0.0, 1.0, 0.0);
        assert!((watts_to_dbw(n) + 204.0).abs() < 1e-10);
        assert!((noise_power(-174.0, 0.0, 1.0, 2.0) - (n + 2.0)).abs() < 1e-15);
    }
}
