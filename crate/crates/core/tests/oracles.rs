//! Reference values that must not drift: closed forms and frozen seeded results.

mod common;

use std::f64::consts::{E, LN_2};

use eeshare::channel::generate_drop;
use eeshare::dinkelbach::{dinkelbach_solve, DinkelbachOptions, FnFractional, SurrogateOptions};
use eeshare::harness::{drop_params, preset};
use eeshare::linalg::{identity, CMat, CVec, HermitianPsd};
use eeshare::model::{direct_capacity, ChannelSet, Objective, SystemParams};
use eeshare::oracle::{grid_underlay_scalar, mimo_capacity, waterfill};
use eeshare::overlay::{max_primary_rate, solve_overlay_full, solve_overlay_rank1};
use eeshare::underlay::{allocate_underlay, CaseTag};
use num_complex::Complex64;

use common::unit_params;

fn assert_rel(got: f64, want: f64, tol: f64) {
    assert!(
        (got - want).abs() <= tol * want.abs(),
        "got {got:.12e}, want {want:.12e}"
    );
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[test]
fn dinkelbach_scalar_optimum() {
    let prob = FnFractional::new(
        |p: &f64| (1.0 + p).log2(),
        |p: &f64| p + 1.0,
        |lambda: f64| {
            Ok(if lambda <= 0.0 {
                10.0
            } else {
                (1.0 / (lambda * LN_2) - 1.0).clamp(0.0, 10.0)
            })
        },
    );
    let out = dinkelbach_solve(
        &prob,
        0.0,
        &DinkelbachOptions {
            eps: 1e-9,
            max_iter: 50,
        },
    )
    .unwrap();
    assert!((out.point - (E - 1.0)).abs() < 1e-6);
    assert!((out.lambda - 1.0 / (E * LN_2)).abs() < 1e-9);
    assert!(out.iterations <= 8);
}

#[test]
fn waterfill_two_modes() {
    let h = CMat::from_diagonal(&CVec::from_vec(vec![c(2.0), c(1.0)]));
    let k = waterfill(&h, &identity(2), 1.0);
    assert!((k.matrix()[(0, 0)].re - 0.875).abs() < 1e-12);
    assert!((k.matrix()[(1, 1)].re - 0.125).abs() < 1e-12);
    let cap = mimo_capacity(&h, &identity(2), &k);
    assert!((cap - (4.5f64.log2() + 1.125f64.log2())).abs() < 1e-12);
}

#[test]
fn waterfill_drops_weak_mode() {
    let h = CMat::from_diagonal(&CVec::from_vec(vec![c(3.0), c(0.1)]));
    let k = waterfill(&h, &identity(2), 0.5);
    assert!((k.matrix()[(0, 0)].re - 0.5).abs() < 1e-12);
    assert!(k.matrix()[(1, 1)].re.abs() < 1e-15);
}

fn scalar_channels(h11: f64, h22: f64, h12: f64, h21: f64) -> ChannelSet {
    let m = |v: f64| CMat::from_element(1, 1, c(v));
    ChannelSet {
        h11: CVec::from_element(1, c(h11)),
        h22: m(h22),
        h12: m(h12),
        h21: CVec::from_element(1, c(h21)),
        ht: m(0.0),
    }
}

#[test]
fn direct_capacity_closed_form() {
    let p = SystemParams {
        p1: 3.0,
        bandwidth: 2.0,
        ..unit_params(1)
    };
    let ch = scalar_channels(1.0, 1.0, 1.0, 1.0);
    assert!((direct_capacity(&p, &ch) - 4.0).abs() < 1e-12);
}

#[test]
fn underlay_scalar_matches_grid() {
    let p = SystemParams {
        p1: 10.0,
        p2: 2.0,
        r1_star: 2.0,
        ..unit_params(1)
    };
    let ch = scalar_channels(1.0, 1.2, 0.6, 0.5);
    let alg = allocate_underlay(&p, &ch, Objective::EnergyEfficiency).unwrap();
    let grid = grid_underlay_scalar(&p, &ch, 400).unwrap();
    assert!(alg.ee >= grid.ee * (1.0 - 1e-9));
    assert_rel(alg.ee, grid.ee, 1e-2);
}

#[test]
fn underlay_seeded_drop_regression() {
    let cfg = preset("fig2").unwrap()[0].clone();
    let d = generate_drop(&cfg.drop_cfg, &cfg.params, 0).unwrap();
    let p = drop_params(&cfg, &d, -10.0);
    assert_rel(direct_capacity(&p, &d.channels), 1.759550447642e6, 1e-10);
    let s = allocate_underlay(&p, &d.channels, Objective::EnergyEfficiency).unwrap();
    assert_eq!(s.case_tag, CaseTag::Case3RateSplit);
    assert_rel(s.ee, 3.476021737636e6, 1e-6);
    assert_rel(s.r2, 3.823623911398e6, 1e-6);
    assert_rel(s.tx_power, 0.1, 1e-6);
}

#[test]
fn overlay_seeded_drop_regression() {
    let cfg = preset("table1").unwrap()[0].clone();
    let d = generate_drop(&cfg.drop_cfg, &cfg.params, 11).unwrap();
    let p = drop_params(&cfg, &d, -10.0);
    let opts = SurrogateOptions {
        eps: 1e-3,
        ..SurrogateOptions::default()
    };
    let full = solve_overlay_full(&p, &d.channels, Objective::EnergyEfficiency, &opts).unwrap();
    let rank1 = solve_overlay_rank1(&p, &d.channels, Objective::EnergyEfficiency, &opts).unwrap();
    assert_rel(full.ee, 9.953398103833e5, 1e-6);
    assert_rel(rank1.ee, 9.911968859296e5, 1e-6);
    assert!(full.ee >= rank1.ee);
    assert!(full.r1 >= p.r1_star * (1.0 - 1e-6) && rank1.r1 >= p.r1_star * (1.0 - 1e-6));
}

#[test]
fn max_primary_rate_uses_whole_budget() {
    let cfg = preset("table1").unwrap()[0].clone();
    let d = generate_drop(&cfg.drop_cfg, &cfg.params, 11).unwrap();
    let p = drop_params(&cfg, &d, -10.0);
    let best = max_primary_rate(&p, &d.channels).unwrap();
    assert!(best.r_bar >= p.r1_star);
    let zero = HermitianPsd::zeros(p.n_t2);
    let (r1, _) = eeshare::model::overlay_rates(&p, &d.channels, &best.a_star, &zero).unwrap();
    assert_rel(r1, best.r_bar, 1e-10);
}
