//! Brute-force reference solutions used to cross-check the allocators.
//!
//! Everything here evaluates rates through [`crate::model`] and searches by
//! enumeration or closed form; none of it touches the barrier solver.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{
    eigh, hermitize, inv_sqrt_pd, log2_det_pd, norm_sqr, outer, CMat, CVec, HermitianPsd,
};
use crate::model::{
    overlay_primary_per_hz, overlay_secondary_per_hz, q1_matrix, r12_per_hz,
    relay_input_covariance, secondary_rate_forms, ChannelSet, SystemParams,
};

pub const DEFAULT_UNDERLAY_GRID: usize = 400;

/// Best point of the scalar underlay grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnderlayGridPoint {
    pub p21: f64,
    pub p22: f64,
    pub ee: f64,
    pub r2: f64,
}

/// Exhaustive search over `(p21, p22)` for single-antenna terminals.
///
/// The `p21` axis spans `[0, min(P2/alpha, P_int/|h21|^2)]` with `grid_n` points
/// and only points inside the power and interference budgets are kept. A point
/// with `p22 > 0` additionally needs the primary message to be decodable at
/// the secondary receiver under interference `p22`, so the `p22` axis stops at
/// the largest such value. Returns `None` when no
/// point meets the secondary rate target, or when the primary target cannot
/// be met at all.
pub fn grid_underlay_scalar(
    p: &SystemParams,
    ch: &ChannelSet,
    grid_n: usize,
) -> Option<UnderlayGridPoint> {
    assert!(
        p.n_t1 == 1 && p.n_t2 == 1 && p.n_r == 1,
        "scalar oracle needs single-antenna terminals"
    );
    assert!(grid_n >= 2, "grid needs at least two points per axis");
    let s2 = p.noise_power;
    let signal = p.p1 * ch.h11_norm_sqr();
    let p_int = if p.r1_star == 0.0 {
        f64::INFINITY
    } else {
        signal / ((p.r1_star / p.bandwidth).exp2() - 1.0) - s2
    };
    if p_int < -1e-9 * s2 {
        return None;
    }
    let p_int = p_int.max(0.0);
    let cross = norm_sqr(&ch.h21);
    let budget = p.p2 / p.alpha;
    let top = if cross > 0.0 {
        budget.min(p_int / cross)
    } else {
        budget
    };
    let q1 = q1_matrix(p, ch);
    let one = |v: f64| CMat::from_element(1, 1, Complex64::from(v));
    let r1_hz = p.r1_star / p.bandwidth;
    let direct22 = ch.h22[(0, 0)].norm_sqr();
    let top22 = if r1_hz > 0.0 && direct22 > 0.0 {
        top.min(((q1[(0, 0)].re / (r1_hz.exp2() - 1.0) - s2) / direct22).max(0.0))
    } else {
        top
    };
    let step = top / (grid_n - 1) as f64;
    let step22 = top22 / (grid_n - 1) as f64;

    let zero = UnderlayGridPoint {
        p21: 0.0,
        p22: 0.0,
        ee: 0.0,
        r2: 0.0,
    };
    let best_row = |i: usize| -> Option<UnderlayGridPoint> {
        let p22 = i as f64 * step22;
        if p22 > 0.0 && r12_per_hz(p, &q1, &ch.h22, &one(p22)) < r1_hz {
            return None;
        }
        let mut best: Option<UnderlayGridPoint> = None;
        for j in 0..grid_n {
            let p21 = j as f64 * step;
            let total = p21 + p22;
            if total > budget || total * cross > p_int {
                break;
            }
            let (_, second) = secondary_rate_forms(p, &q1, &ch.h22, &one(p21), &one(p22));
            let r2 = p.bandwidth * second.max(0.0);
            if r2 < p.r2_star {
                continue;
            }
            let ee = r2 / (p.alpha * total + p.p_c);
            if best.is_none_or(|b| ee > b.ee) {
                best = Some(UnderlayGridPoint { p21, p22, ee, r2 });
            }
        }
        best
    };
    let found = (0..grid_n)
        .into_par_iter()
        .filter_map(best_row)
        .reduce_with(pick_underlay);
    match found {
        Some(b) => Some(b),
        None if p.r2_star <= 0.0 => Some(zero),
        None => None,
    }
}

fn pick_underlay(a: UnderlayGridPoint, b: UnderlayGridPoint) -> UnderlayGridPoint {
    if b.ee > a.ee || (b.ee == a.ee && (b.p22, b.p21) < (a.p22, a.p21)) {
        b
    } else {
        a
    }
}

/// Resolution of the rank-one overlay search.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlayGrid {
    /// Points on the amplification axis.
    pub a_points: usize,
    /// Points on the axis of the share of leftover power given to the secondary signal.
    pub beta_points: usize,
    /// Directions for the secondary signal appended to the built-in codebook.
    pub extra_directions: Vec<CVec>,
}

impl Default for OverlayGrid {
    fn default() -> Self {
        Self {
            a_points: 100,
            beta_points: 100,
            extra_directions: Vec::new(),
        }
    }
}

/// Best point of the rank-one overlay grid: `A = sqrt(a) u v^H`, `B = b_power w w^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlayGridPoint {
    pub a: f64,
    /// Index into [`direction_codebook`] followed by the extra directions.
    pub b_dir_index: usize,
    pub b_power: f64,
    pub ee: f64,
    pub r1: f64,
    pub r2: f64,
}

/// Unit vectors `(cos t, e^{i f} sin t)` over an 8 x 8 grid of `(t, f)`,
/// or the single vector `1` for one antenna.
pub fn direction_codebook(n: usize) -> Vec<CVec> {
    assert!(n == 1 || n == 2, "codebook defined for one or two antennas");
    if n == 1 {
        return vec![CVec::from_element(1, Complex64::from(1.0))];
    }
    let mut out = Vec::with_capacity(64);
    for i in 0..8 {
        let t = std::f64::consts::FRAC_PI_2 * i as f64 / 7.0;
        for j in 0..8 {
            let f = std::f64::consts::TAU * j as f64 / 8.0;
            out.push(CVec::from_vec(vec![
                Complex64::from(t.cos()),
                Complex64::from_polar(t.sin(), f),
            ]));
        }
    }
    out
}

/// Search over rank-one relays along `h21`, and rank-one secondary
/// covariances drawn from a fixed direction codebook. Feasibility of the
/// primary target is evaluated with the exact relayed rate. Returns `None`
/// when no grid point meets the rate targets.
pub fn grid_overlay_rank1(
    p: &SystemParams,
    ch: &ChannelSet,
    grid: &OverlayGrid,
) -> Option<OverlayGridPoint> {
    assert!(
        p.n_t2 <= 2,
        "rank-one oracle supports at most two secondary antennas"
    );
    assert!(grid.a_points >= 2 && grid.beta_points >= 2);
    let n11 = ch.h11_norm_sqr();
    let nh = norm_sqr(&ch.h21);
    let g = &ch.ht * &ch.h11;
    if n11 == 0.0 || nh == 0.0 || norm_sqr(&g) == 0.0 {
        return None;
    }
    let u = ch.h21.unscale(nh.sqrt());
    let v = g.unscale(norm_sqr(&g).sqrt());
    let m = relay_input_covariance(p, ch);
    let mu1 = crate::linalg::quad_form(&m, &v);
    let budget = p.p2 / p.alpha;
    let a_max = budget / mu1;
    let mut dirs = direction_codebook(p.n_t2);
    dirs.extend(
        grid.extra_directions
            .iter()
            .map(|d| d.unscale(norm_sqr(d).sqrt())),
    );
    let uv = outer(&u, &v);
    let uu = outer(&u, &u);

    let cells: Vec<(usize, usize)> = (0..grid.a_points)
        .flat_map(|i| (0..dirs.len()).map(move |k| (i, k)))
        .collect();
    let eval = |&(i, k): &(usize, usize)| -> Option<OverlayGridPoint> {
        let a = a_max * i as f64 / (grid.a_points - 1) as f64;
        let relay = uv.scale(a.sqrt());
        let x = hermitize(&uu.scale(a * mu1));
        let ww = outer(&dirs[k], &dirs[k]);
        let left = (budget - a * mu1).max(0.0);
        let mut best: Option<OverlayGridPoint> = None;
        for j in 0..grid.beta_points {
            let b_power = left * j as f64 / (grid.beta_points - 1) as f64;
            let b = ww.scale(b_power);
            let r1 = p.bandwidth * overlay_primary_per_hz(p, ch, &relay, &b);
            if r1 < p.r1_star {
                continue;
            }
            let r2 = p.bandwidth * overlay_secondary_per_hz(p, &ch.h22, &x, &b);
            if r2 < p.r2_star {
                continue;
            }
            let ee = r2 / (p.alpha * (a * mu1 + b_power) + p.p_c);
            if best.as_ref().is_none_or(|bp| ee > bp.ee) {
                best = Some(OverlayGridPoint {
                    a,
                    b_dir_index: k,
                    b_power,
                    ee,
                    r1,
                    r2,
                });
            }
        }
        best
    };
    cells.par_iter().filter_map(eval).reduce_with(|x, y| {
        let key = |q: &OverlayGridPoint| (q.a, q.b_dir_index, q.b_power);
        if y.ee > x.ee || (y.ee == x.ee && key(&y) < key(&x)) {
            y
        } else {
            x
        }
    })
}

/// Capacity-achieving input covariance for `log2|I + N^-1 H K H^H|` under `tr K <= budget`.
pub fn waterfill(h: &CMat, noise_cov: &CMat, budget: f64) -> HermitianPsd {
    assert!(budget >= 0.0, "budget must be nonnegative");
    let n = h.ncols();
    if budget == 0.0 {
        return HermitianPsd::zeros(n);
    }
    let w = inv_sqrt_pd(noise_cov) * h;
    let (gains, vecs) = eigh(&hermitize(&(w.adjoint() * &w)));
    let floor = gains.iter().cloned().fold(0.0_f64, f64::max) * 1e-14;
    let level_power = |mu: f64| -> f64 {
        gains
            .iter()
            .filter(|&&g| g > floor)
            .map(|&g| (mu - 1.0 / g).max(0.0))
            .sum()
    };
    let strongest = gains.iter().cloned().fold(0.0_f64, f64::max);
    if strongest <= 0.0 {
        return HermitianPsd::zeros(n);
    }
    let (mut lo, mut hi) = (1.0 / strongest, 1.0 / strongest + budget);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if level_power(mid) > budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mu = 0.5 * (lo + hi);
    let mut k = CMat::zeros(n, n);
    for (i, &g) in gains.iter().enumerate() {
        if g > floor {
            let pw = (mu - 1.0 / g).max(0.0);
            let col = vecs.column(i).into_owned();
            k += outer(&col, &col).scale(pw);
        }
    }
    HermitianPsd::project(&k).0
}

/// `log2|I + N^-1 H K H^H|`.
pub fn mimo_capacity(h: &CMat, noise_cov: &CMat, k: &HermitianPsd) -> f64 {
    let w = inv_sqrt_pd(noise_cov) * h;
    let m = hermitize(&(CMat::identity(h.nrows(), h.nrows()) + &w * k.matrix() * w.adjoint()));
    log2_det_pd(&m).expect("identity plus PSD is positive definite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::direct_capacity;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalar_setup(r1_frac: f64) -> (SystemParams, ChannelSet) {
        let one = |z: Complex64| CMat::from_element(1, 1, z);
        let ch = ChannelSet {
            h11: CVec::from_element(1, c(1.0, 0.2)),
            h22: one(c(0.8, -0.3)),
            h12: one(c(0.9, 0.1)),
            h21: CVec::from_element(1, c(0.3, 0.2)),
            ht: one(c(0.5, 0.0)),
        };
        let mut p = SystemParams {
            n_t1: 1,
            n_t2: 1,
            n_r: 1,
            p1: 4.0,
            p2: 5.0,
            noise_power: 1.0,
            bandwidth: 1.0,
            alpha: 1.0,
            p_c: 1.0,
            r1_star: 0.0,
            r2_star: 0.0,
        };
        p.r1_star = r1_frac * direct_capacity(&p, &ch);
        (p, ch)
    }

    #[test]
    fn zero_budget_gives_zero_point() {
        let (mut p, ch) = scalar_setup(0.5);
        p.p2 = 0.0;
        let out = grid_underlay_scalar(&p, &ch, 50).unwrap();
        assert_eq!((out.p21, out.p22, out.ee), (0.0, 0.0, 0.0));
    }

    #[test]
    fn undecodable_primary_forces_no_cancellation() {
        let (mut p, ch) = scalar_setup(0.0);
        p.r1_star = crate::model::r12_at_zero(&p, &ch) * 1.01;
        assert!(p.r1_star < direct_capacity(&p, &ch));
        let out = grid_underlay_scalar(&p, &ch, 100).unwrap();
        assert_eq!(out.p22, 0.0);
        assert!(out.ee > 0.0);
    }

    #[test]
    fn refinement_changes_little() {
        let (p, ch) = scalar_setup(0.6);
        let coarse = grid_underlay_scalar(&p, &ch, 100).unwrap();
        let fine = grid_underlay_scalar(&p, &ch, 400).unwrap();
        assert!((fine.ee - coarse.ee).abs() <= 0.02 * fine.ee);
    }

    #[test]
    fn codebook_is_unit_norm() {
        let book = direction_codebook(2);
        assert_eq!(book.len(), 64);
        assert!(book.iter().all(|d| (norm_sqr(d) - 1.0).abs() < 1e-14));
    }

    #[test]
    fn waterfill_edge_cases() {
        let h = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let n = CMat::identity(2, 2);
        assert!(waterfill(&h, &n, 0.0).is_zero());
        let k = waterfill(&h, &n, 3.0);
        assert!((k.matrix()[(0, 0)].re - 3.0).abs() < 1e-9);
        assert!(k.trace() <= 3.0 + 1e-9);
    }

    #[test]
    fn waterfill_beats_uniform() {
        let h = CMat::from_row_slice(
            2,
            2,
            &[c(1.0, 0.3), c(0.2, -0.1), c(-0.4, 0.5), c(0.1, 0.2)],
        );
        let n = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(0.5, 0.0)]);
        let k = waterfill(&h, &n, 2.0);
        let uniform = HermitianPsd::scaled_identity(2, 1.0);
        assert!(mimo_capacity(&h, &n, &k) >= mimo_capacity(&h, &n, &uniform) - 1e-12);
        assert!((k.trace() - 2.0).abs() < 1e-9);
    }
}
