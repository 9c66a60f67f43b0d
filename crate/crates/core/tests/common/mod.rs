#![allow(dead_code)]

use eeshare::channel::{drop_rng, rayleigh};
use eeshare::linalg::{hermitize, CMat, CVec, HermitianPsd};
use eeshare::model::{ChannelSet, SystemParams};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64, index: u64) -> ChaCha8Rng {
    drop_rng(seed, index)
}

pub fn unit_params(n: usize) -> SystemParams {
    SystemParams {
        n_t1: n,
        n_t2: n,
        n_r: n,
        p1: 1.0,
        p2: 10.0,
        noise_power: 1.0,
        bandwidth: 1.0,
        alpha: 1.0,
        p_c: 1.0,
        r1_star: 0.0,
        r2_star: 0.0,
    }
}

pub fn column(m: CMat) -> CVec {
    m.column(0).into_owned()
}

/// Unit-variance Rayleigh channels with the dimensions of `p`.
pub fn random_channels(p: &SystemParams, r: &mut ChaCha8Rng) -> ChannelSet {
    ChannelSet {
        h11: column(rayleigh(r, p.n_t1, 1)),
        h22: rayleigh(r, p.n_r, p.n_t2),
        h12: rayleigh(r, p.n_r, p.n_t1),
        h21: column(rayleigh(r, p.n_t2, 1)),
        ht: rayleigh(r, p.n_t2, p.n_t1),
    }
}

/// Random PSD matrix with trace `trace`.
pub fn random_psd(n: usize, trace: f64, r: &mut ChaCha8Rng) -> HermitianPsd {
    let g = rayleigh(r, n, n);
    let m = hermitize(&(&g * g.adjoint()));
    let t: f64 = (0..n).map(|i| m[(i, i)].re).sum();
    HermitianPsd::project(&m.scale(trace / t)).0
}

/// Random Hermitian direction with unit Frobenius norm.
pub fn random_hermitian(n: usize, r: &mut ChaCha8Rng) -> CMat {
    let g = rayleigh(r, n, n);
    let h = hermitize(&(&g + g.adjoint()));
    let norm = h.norm();
    h.unscale(norm)
}
