//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria listed in `DOCUMENTED_GAPS` are reported as FAIL when they fail
//! but do not change the exit status; any other failure does.

mod common;

use std::f64::consts::{E, LN_2};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use eeshare::channel::generate_drop;
use eeshare::dinkelbach::{dinkelbach_solve, DinkelbachOptions, FnFractional, SurrogateOptions};
use eeshare::harness::{
    aggregate, csv_string, evaluate_sweep, generate_drops, preset, run_on_drops, DropOutcome,
    ExperimentConfig, Mode,
};
use eeshare::inner::{solve, Expr, Loading, LogDetProgram, SolverOptions};
use eeshare::linalg::{hermitize, identity, log2_det_pd, trace_re, CMat, HermitianPsd};
use eeshare::model::{dbw_to_watts, direct_capacity, overlay_rates, Objective, SystemParams};
use eeshare::oracle::{grid_underlay_scalar, mimo_capacity, waterfill, DEFAULT_UNDERLAY_GRID};
use eeshare::overlay::{
    max_primary_rate, rank1_lower_bound, secondary_rate_x, solve_overlay_full, solve_overlay_rank1,
    taylor_lower_bound, OverlayConstants, OverlaySolution,
};
use eeshare::underlay::{allocate_underlay, select_case, solve_case3, CaseTag};

use common::*;

const DOCUMENTED_GAPS: &[usize] = &[4, 8];

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn c1_dinkelbach() -> Verdict {
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
    let t = Instant::now();
    let out = dinkelbach_solve(
        &prob,
        0.0,
        &DinkelbachOptions {
            eps: 1e-9,
            max_iter: 100,
        },
    )
    .map_err(|e| e.to_string())?;
    let dt = t.elapsed();
    let ep = (out.point - (E - 1.0)).abs();
    let el = (out.lambda - 1.0 / (E * LN_2)).abs();
    check(
        ep <= 1e-6 && el <= 1e-6 && out.iterations <= 8 && dt < Duration::from_millis(1),
        format!(
            "|p-p*|={ep:.1e}, |l-l*|={el:.1e}, {} iterations, {dt:?}",
            out.iterations
        ),
    )
}

fn c2_waterfill() -> Verdict {
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let mut r = rng(2002, i);
        let h = eeshare::channel::rayleigh(&mut r, 2, 2).scale(1.0 + i as f64 / 10.0);
        let noise = random_psd(2, 2.0, &mut r).matrix() + identity(2).scale(0.1);
        let budget = 0.1 + (i % 10) as f64;
        let oracle = mimo_capacity(&h, &noise, &waterfill(&h, &noise, budget));

        let mut prog = LogDetProgram::new();
        let k = prog.add_matrix(2);
        let ln_n = log2_det_pd(&noise).ok_or("noise not PD")?;
        prog.set_objective(
            Expr::new()
                .log2_det(
                    1.0,
                    noise.clone(),
                    vec![(k, Loading::Congruence(h.clone()))],
                )
                .plus_constant(-ln_n),
        );
        prog.add_constraint(Expr::constant(budget).trace(k, -1.0));
        let sol =
            solve(&prog, &SolverOptions::default()).map_err(|e| format!("instance {i}: {e}"))?;
        let got = mimo_capacity(&h, &noise, &sol.matrix(k));
        worst = worst.max(rel(got, oracle));
    }
    check(
        worst <= 1e-6,
        format!("max relative error {worst:.2e} over 100 instances"),
    )
}

fn scalar_drop_params(i: u64) -> (SystemParams, eeshare::model::ChannelSet) {
    let mut cfg = preset("fig1a").expect("preset")[0].clone();
    cfg.params.n_t1 = 1;
    cfg.params.n_t2 = 1;
    cfg.params.n_r = 1;
    let d = generate_drop(&cfg.drop_cfg, &cfg.params, i).expect("drop");
    let mut p = cfg.params.clone();
    p.p2 = dbw_to_watts(-30.0 + 4.0 * (i % 8) as f64);
    p.r1_star = [0.5, 0.75, 0.95][(i % 3) as usize] * direct_capacity(&p, &d.channels);
    (p, d.channels)
}

fn c3_scalar_oracle() -> Verdict {
    let mut worst_dev: f64 = 0.0;
    let mut worst_excess: f64 = f64::NEG_INFINITY;
    let mut slowest = Duration::ZERO;
    for i in 0..100 {
        let (p, ch) = scalar_drop_params(i);
        let t = Instant::now();
        let alg = allocate_underlay(&p, &ch, Objective::EnergyEfficiency)
            .map_err(|e| format!("drop {i}: {e}"))?;
        let grid = grid_underlay_scalar(&p, &ch, DEFAULT_UNDERLAY_GRID)
            .ok_or(format!("drop {i}: empty grid"))?;
        slowest = slowest.max(t.elapsed());
        worst_dev = worst_dev.max(rel(alg.ee, grid.ee));
        worst_excess = worst_excess.max((grid.ee - alg.ee) / grid.ee.max(f64::MIN_POSITIVE));
    }
    check(
        worst_dev <= 1e-2 && worst_excess <= 1e-9 && slowest < Duration::from_secs(10),
        format!("max |dev| {worst_dev:.2e}, max (grid-alg1)/grid {worst_excess:.2e}, slowest {slowest:?}"),
    )
}

fn c4_cases() -> Verdict {
    let cfg = preset("fig2").expect("preset")[0].clone();
    let mut reversed = Vec::new();
    let mut unexplained = Vec::new();
    let mut case3_checked = 0;
    let mut worst_r12: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    for i in 0..50 {
        let d = generate_drop(&cfg.drop_cfg, &cfg.params, i).map_err(|e| e.to_string())?;
        let mut p = cfg.params.clone();
        p.p2 = dbw_to_watts(-10.0);
        let cap = direct_capacity(&p, &d.channels);
        let mut last_rank = 0;
        let mut drop_reversed = false;
        for step in 0..=20 {
            p.r1_star = cap * 0.999 * step as f64 / 20.0;
            let sel = select_case(&p, &d.channels, Objective::EnergyEfficiency)
                .map_err(|e| format!("drop {i}: {e}"))?;
            let th = sel.thresholds;
            let consistent = match sel.case_tag {
                CaseTag::Case1NoSic => p.r1_star > th.r12_at_zero,
                CaseTag::Case2FullSic => th.case2_threshold.is_some_and(|t| p.r1_star <= t),
                CaseTag::Case3RateSplit => {
                    th.case2_threshold.is_some_and(|t| p.r1_star > t) && p.r1_star <= th.r12_at_zero
                }
            };
            if !consistent {
                return Err(format!(
                    "drop {i}: {:?} contradicts its thresholds at R1* = {:.3e}",
                    sel.case_tag, p.r1_star
                ));
            }
            let rank = match sel.case_tag {
                CaseTag::Case2FullSic => 0,
                CaseTag::Case3RateSplit => 1,
                CaseTag::Case1NoSic => 2,
            };
            if rank < last_rank {
                drop_reversed = true;
                if sel.case_tag != CaseTag::Case2FullSic || th.r12_at_zero <= cap {
                    unexplained.push(i);
                }
            }
            last_rank = rank;
            if sel.case_tag == CaseTag::Case3RateSplit && step % 4 == 0 {
                let s = solve_case3(&p, &d.channels, Objective::EnergyEfficiency)
                    .map_err(|e| format!("drop {i}: {e}"))?;
                let (hat1, hat2) = s.relaxed.as_ref().ok_or("case 3 without relaxed point")?;
                let per_hz = (s.r12 - p.r1_star).abs() / p.bandwidth;
                worst_r12 = worst_r12.max(per_hz / (1.0 + p.r1_star / p.bandwidth));
                let diff = (s.k21.matrix() + s.k22.matrix() - hat1.matrix() - hat2.matrix()).norm();
                worst_sum =
                    worst_sum.max(diff / (hat1.trace() + hat2.trace()).max(f64::MIN_POSITIVE));
                case3_checked += 1;
            }
        }
        if drop_reversed {
            reversed.push(i);
        }
    }
    check(
        reversed.is_empty() && worst_r12 <= 1e-6 && worst_sum <= 1e-9 && case3_checked > 0,
        format!(
            "non-monotone drops {reversed:?} (all Case-2 re-entries with R12(0) > direct capacity: {}); \
             {case3_checked} case-3 points: max |r12-R1*| {worst_r12:.1e} (scaled), max split error {worst_sum:.1e}",
            unexplained.is_empty()
        ),
    )
}

fn c5_surrogates() -> Verdict {
    let mut p1: f64 = f64::NEG_INFINITY;
    let mut p2: f64 = 0.0;
    let mut p3: f64 = 0.0;
    let mut q1: f64 = f64::NEG_INFINITY;
    let mut q2: f64 = 0.0;
    let mut q3: f64 = 0.0;
    for i in 0..1000 {
        let mut r = rng(5005, i);
        let p = SystemParams {
            r1_star: 0.0,
            ..unit_params(2)
        };
        let ch = random_channels(&p, &mut r);
        let x0 = random_psd(2, 0.1 + (i % 7) as f64, &mut r);
        let x = random_psd(2, 0.1 + (i % 5) as f64, &mut r);
        let b = random_psd(2, 0.1 + (i % 3) as f64, &mut r);
        let bound = taylor_lower_bound(&x0, &p, &ch);
        p1 = p1.max(
            bound.value(x.matrix(), b.matrix()) - secondary_rate_x(&p, &ch, x.matrix(), b.matrix()),
        );
        p2 = p2.max(
            (bound.value(x0.matrix(), b.matrix())
                - secondary_rate_x(&p, &ch, x0.matrix(), b.matrix()))
            .abs(),
        );
        let d = random_hermitian(2, &mut r);
        let h = 1e-6 * (1.0 + x0.matrix().norm());
        let fd = (secondary_rate_x(&p, &ch, &(x0.matrix() + d.scale(h)), b.matrix())
            - secondary_rate_x(&p, &ch, &(x0.matrix() - d.scale(h)), b.matrix()))
            / (2.0 * h);
        let an = eeshare::linalg::re_trace_product(&bound.gradient_x(x0.matrix(), b.matrix()), &d);
        p3 = p3.max((fd - an).abs() / an.abs().max(1e-3));
        let hx = 1e-6 * (1.0 + x.matrix().norm());
        let fd = (bound.value(&(x.matrix() + d.scale(hx)), b.matrix())
            - bound.value(&(x.matrix() - d.scale(hx)), b.matrix()))
            / (2.0 * hx);
        let an = eeshare::linalg::re_trace_product(&bound.gradient_x(x.matrix(), b.matrix()), &d);
        p3 = p3.max((fd - an).abs() / an.abs().max(1e-3));

        let a0 = 0.05 + (i % 11) as f64 * 0.3;
        let a = 0.05 + (i % 13) as f64 * 0.25;
        let rb = rank1_lower_bound(a0, &p, &ch).map_err(|e| e.to_string())?;
        q1 = q1.max(rb.value(a, b.matrix()) - rb.rate(a, b.matrix()));
        q2 = q2.max((rb.value(a0, b.matrix()) - rb.rate(a0, b.matrix())).abs());
        let ha = 1e-6 * (1.0 + a0);
        let fd = (rb.rate(a0 + ha, b.matrix()) - rb.rate(a0 - ha, b.matrix())) / (2.0 * ha);
        let an = (rb.value(a0 + ha, b.matrix()) - rb.value(a0 - ha, b.matrix())) / (2.0 * ha);
        q3 = q3.max((fd - an).abs() / an.abs().max(1e-3));
    }
    check(
        p1 <= 1e-10 && p2 <= 1e-12 && p3 <= 1e-5 && q1 <= 1e-10 && q2 <= 1e-12 && q3 <= 1e-5,
        format!(
            "Taylor: P1 {p1:.1e}, P2 {p2:.1e}, P3 {p3:.1e}; rank-1: P1 {q1:.1e}, P2 {q2:.1e}, P3 {q3:.1e} (per-Hz, 1000 probes)"
        ),
    )
}

fn overlay_cfg() -> ExperimentConfig {
    preset("table1").expect("preset")[0].clone()
}

fn c6_monotone() -> Verdict {
    let cfg = overlay_cfg();
    let mut runs = 0;
    let mut skipped = 0;
    for i in 0..100 {
        let d = generate_drop(&cfg.drop_cfg, &cfg.params, i).map_err(|e| e.to_string())?;
        let mut p = cfg.params.clone();
        p.p2 = dbw_to_watts(-2.0);
        let cap = direct_capacity(&p, &d.channels);
        let r_bar = max_primary_rate(&p, &d.channels)
            .map_err(|e| e.to_string())?
            .r_bar;
        if r_bar <= cap {
            skipped += 1;
            continue;
        }
        p.r1_star = cap + 0.5 * (r_bar - cap);
        let opts = SurrogateOptions::default();
        let results: [(&str, Result<OverlaySolution, _>); 2] = [
            (
                "alg2",
                solve_overlay_full(&p, &d.channels, Objective::EnergyEfficiency, &opts),
            ),
            (
                "alg3",
                solve_overlay_rank1(&p, &d.channels, Objective::EnergyEfficiency, &opts),
            ),
        ];
        for (name, res) in results {
            match res {
                Ok(s) => {
                    runs += 1;
                    if !s.trace.objectives.windows(2).all(|w| w[1] >= w[0]) {
                        return Err(format!("drop {i} {name}: trace decreases"));
                    }
                    let (r1, _) = overlay_rates(&p, &d.channels, &s.relay_a, &s.b_cov)
                        .map_err(|e| e.to_string())?;
                    if r1 < p.r1_star * (1.0 - 1e-6) {
                        return Err(format!(
                            "drop {i} {name}: r1 {r1:.6e} < R1* {:.6e}",
                            p.r1_star
                        ));
                    }
                }
                Err(eeshare::error::OverlayError::Rank1Infeasible) if name == "alg3" => {
                    skipped += 1
                }
                Err(e) => return Err(format!("drop {i} {name}: {e}")),
            }
        }
    }
    check(runs > 0, format!("{runs} runs monotone and primary-feasible; {skipped} skipped (no relay gain or rank-1 infeasible)"))
}

fn c7_prop3() -> Verdict {
    let cfg = overlay_cfg();
    let mut worst_excess: f64 = f64::NEG_INFINITY;
    let mut worst_power: f64 = 0.0;
    for i in 0..1000u64 {
        let drop_idx = i / 100;
        let d = generate_drop(&cfg.drop_cfg, &cfg.params, drop_idx).map_err(|e| e.to_string())?;
        let mut p = cfg.params.clone();
        p.p2 = dbw_to_watts(-30.0 + 4.0 * (drop_idx % 8) as f64);
        let best = max_primary_rate(&p, &d.channels).map_err(|e| e.to_string())?;
        let k = OverlayConstants::new(&p, &d.channels).map_err(|e| e.to_string())?;
        let m = k.m_mat.matrix();
        let power = |a: &CMat| p.alpha * trace_re(&hermitize(&(a * m * a.adjoint())));
        worst_power = worst_power.max(rel(power(&best.a_star), p.p2));
        let mut r = rng(7007, i);
        let a = eeshare::channel::rayleigh(&mut r, 2, 2);
        let frac = ((i % 10) as f64 + 1.0) / 10.0;
        let a = a.scale((frac * p.p2 / power(&a)).sqrt());
        let zero = HermitianPsd::zeros(2);
        let (r1, _) = overlay_rates(&p, &d.channels, &a, &zero).map_err(|e| e.to_string())?;
        worst_excess = worst_excess.max((r1 - best.r_bar) / best.r_bar);
    }
    check(
        worst_excess <= 1e-12 && worst_power <= 1e-9,
        format!("max (R1(A)-Rbar)/Rbar {worst_excess:.2e}, power equality error {worst_power:.1e}"),
    )
}

struct OverlayRuns {
    label: String,
    p2: Vec<f64>,
    outcomes: Vec<Vec<DropOutcome>>,
}

fn table1_runs(
    keep: impl Fn(&ExperimentConfig) -> bool,
) -> Result<Vec<(ExperimentConfig, OverlayRuns)>, String> {
    let mut first = preset("table1").expect("preset")[0].clone();
    first.n_drops = 100;
    let drops = generate_drops(&first).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for mut cfg in preset("table1")
        .expect("preset")
        .into_iter()
        .filter(|c| keep(c))
    {
        cfg.n_drops = 100;
        cfg.eps = 1e-3;
        let outcomes = evaluate_sweep(&cfg, &drops);
        let runs = OverlayRuns {
            label: cfg.series_label(),
            p2: cfg.p2_sweep_dbw.clone(),
            outcomes,
        };
        out.push((cfg, runs));
    }
    Ok(out)
}

fn c8_table1(store: &mut Vec<OverlayRuns>) -> Verdict {
    let t = Instant::now();
    let mut lines = Vec::new();
    let mut ok = true;
    for (cfg, runs) in table1_runs(|_| true)? {
        let outcomes = &runs.outcomes;
        let means: Vec<String> = cfg
            .p2_sweep_dbw
            .iter()
            .zip(outcomes)
            .map(|(&p2, o)| {
                let row = aggregate(p2, o);
                ok &= (2.0..=10.0).contains(&row.mean_iterations);
                if row.n_feasible == 0 {
                    "-".to_string()
                } else {
                    format!("{:.2}", row.mean_iterations)
                }
            })
            .collect();
        let feasible: Vec<String> = outcomes
            .iter()
            .map(|o| {
                o.iter()
                    .filter(|x| matches!(x, DropOutcome::Feasible { .. }))
                    .count()
                    .to_string()
            })
            .collect();
        lines.push(format!(
            "{}: [{}] (feasible drops [{}])",
            cfg.series_label(),
            means.join(" "),
            feasible.join(" ")
        ));
        store.push(runs);
    }
    let dt = t.elapsed();
    ok &= dt < Duration::from_secs(15 * 60);
    check(ok, format!("{:?}; {}", dt, lines.join("; ")))
}

fn series_means(
    cfg: &ExperimentConfig,
    drops: &[eeshare::channel::Drop],
) -> Vec<eeshare::harness::ResultRow> {
    run_on_drops(cfg, drops)
}

fn c9_trends(overlay: &[OverlayRuns]) -> Verdict {
    let mut ee_cfg = None;
    let mut rate_cfg = None;
    for cfg in preset("fig1a").expect("preset") {
        if cfg.r_percent == 75.0 {
            match cfg.mode {
                Mode::MaximizeEE => ee_cfg = Some(cfg),
                Mode::MaximizeRate => rate_cfg = Some(cfg),
            }
        }
    }
    let (mut ee_cfg, mut rate_cfg) = (
        ee_cfg.ok_or("no EE series")?,
        rate_cfg.ok_or("no rate series")?,
    );
    ee_cfg.n_drops = 100;
    rate_cfg.n_drops = 100;
    let drops = generate_drops(&ee_cfg).map_err(|e| e.to_string())?;
    let ee = series_means(&ee_cfg, &drops);
    let rate = series_means(&rate_cfg, &drops);
    let n = ee.len();
    let nondecreasing = |v: &[f64]| v.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9));
    let ee_ee: Vec<f64> = ee.iter().map(|r| r.mean_ee).collect();
    let a = nondecreasing(&ee_ee) && ee_ee[n - 1] / ee_ee[n - 2] <= 1.02;
    let b = rate[n - 1].mean_ee < ee[n - 1].mean_ee;
    let rate_r2: Vec<f64> = rate.iter().map(|r| r.mean_r2).collect();
    let c = nondecreasing(&rate_r2);
    let ee_tx: Vec<f64> = ee.iter().map(|r| r.mean_tx_power).collect();
    let rate_tx: Vec<f64> = rate.iter().map(|r| r.mean_tx_power).collect();
    let d = ee_tx[n - 1] / ee_tx[n - 2] <= 1.02 && rate_tx.windows(2).all(|w| w[1] > w[0]);

    let computed;
    let overlay = if overlay.is_empty() {
        computed = table1_runs(|c| c.r_percent == 125.0)?
            .into_iter()
            .map(|(_, r)| r)
            .collect::<Vec<_>>();
        &computed[..]
    } else {
        overlay
    };
    let find = |label: &str| overlay.iter().find(|o| o.label == label);
    let (alg2, alg3) = (
        find("ee_alg2_r125").ok_or("missing alg2 runs")?,
        find("ee_alg3_r125").ok_or("missing alg3 runs")?,
    );
    let mut gaps = Vec::new();
    let mut e_ok = true;
    for (k, &p2) in alg2.p2.iter().enumerate() {
        let pairs: Vec<(f64, f64)> = alg2.outcomes[k]
            .iter()
            .zip(&alg3.outcomes[k])
            .filter_map(|(x, y)| match (x, y) {
                (DropOutcome::Feasible { ee: e2, .. }, DropOutcome::Feasible { ee: e3, .. }) => {
                    Some((*e2, *e3))
                }
                _ => None,
            })
            .collect();
        if pairs.is_empty() {
            continue;
        }
        let m2 = pairs.iter().map(|p| p.0).sum::<f64>() / pairs.len() as f64;
        let m3 = pairs.iter().map(|p| p.1).sum::<f64>() / pairs.len() as f64;
        e_ok &= m2 >= m3 * (1.0 - 1e-3);
        gaps.push((p2, (m2 - m3) / m2));
    }
    let shrinking = match (gaps.first(), gaps.last()) {
        (Some(f), Some(l)) => gaps.len() >= 2 && l.1 <= f.1,
        _ => false,
    };
    let e = e_ok && shrinking;
    let gap_txt: Vec<String> = gaps.iter().map(|(p, g)| format!("{p}:{g:.2e}")).collect();
    check(
        a && b && c && d && e,
        format!(
            "(a) {a} last ratio {:.4}; (b) {b}; (c) {c}; (d) {d} EE-max tx ratio {:.4}; (e) {e} relative gaps [{}]",
            ee_ee[n - 1] / ee_ee[n - 2],
            ee_tx[n - 1] / ee_tx[n - 2],
            gap_txt.join(" ")
        ),
    )
}

pub fn golden_config() -> ExperimentConfig {
    let mut cfg = preset("fig2").expect("preset")[0].clone();
    cfg.n_drops = 4;
    cfg.drop_cfg.seed = 20240601;
    cfg
}

fn c10_golden() -> Verdict {
    let cfg = golden_config();
    let drops = generate_drops(&cfg).map_err(|e| e.to_string())?;
    let a = csv_string(&run_on_drops(&cfg, &drops));
    let b = csv_string(&run_on_drops(
        &cfg,
        &generate_drops(&cfg).map_err(|e| e.to_string())?,
    ));
    let golden = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/tests/golden/fig2_ee_4drops.csv"
    ))
    .map_err(|e| format!("golden file: {e}"))?;
    check(
        a == b && a == golden,
        format!(
            "repeat identical: {}, matches golden: {}",
            a == b,
            a == golden
        ),
    )
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Verdict, failures: &mut Vec<usize>) {
    if let Ok(only) = std::env::var("ACCEPTANCE_ONLY") {
        if !only.split(',').any(|x| x.trim().parse() == Ok(id)) {
            return;
        }
    }
    let t = Instant::now();
    let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        Err(e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into()))
    });
    let dt = t.elapsed();
    match verdict {
        Ok(detail) => println!("criterion {id:>2} {name}: PASS ({dt:.1?}) {detail}"),
        Err(detail) => {
            let note = if DOCUMENTED_GAPS.contains(&id) {
                " [documented gap]"
            } else {
                ""
            };
            println!("criterion {id:>2} {name}: FAIL{note} ({dt:.1?}) {detail}");
            failures.push(id);
        }
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let mut failures = Vec::new();
    let mut overlay = Vec::new();
    run(1, "dinkelbach scalar", c1_dinkelbach, &mut failures);
    run(
        2,
        "inner solver vs water-filling",
        c2_waterfill,
        &mut failures,
    );
    run(
        3,
        "underlay scalar grid oracle",
        c3_scalar_oracle,
        &mut failures,
    );
    run(4, "underlay case machinery", c4_cases, &mut failures);
    run(
        5,
        "surrogate bound properties",
        c5_surrogates,
        &mut failures,
    );
    run(
        6,
        "sequential loop monotonicity",
        c6_monotone,
        &mut failures,
    );
    run(7, "maximum primary rate", c7_prop3, &mut failures);
    run(
        8,
        "overlay iteration counts",
        || c8_table1(&mut overlay),
        &mut failures,
    );
    run(9, "figure trends", || c9_trends(&overlay), &mut failures);
    run(10, "golden CSV determinism", c10_golden, &mut failures);
    let unexpected: Vec<usize> = failures
        .iter()
        .copied()
        .filter(|id| !DOCUMENTED_GAPS.contains(id))
        .collect();
    println!(
        "acceptance: {} criteria failed: {:?}; undocumented failures: {:?}",
        failures.len(),
        failures,
        unexpected
    );
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}
