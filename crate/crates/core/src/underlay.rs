//! Globally optimal secondary covariances for underlay spectrum sharing.
//!
//! The primary link is protected by an interference budget `P_int` that
//! follows from its rate target. The secondary receiver may decode and cancel
//! the primary signal, which splits the problem into three regimes:
//!
//! * **Case 1**: the primary signal cannot be decoded even without secondary
//!   interference, so it is treated as noise and `K22 = 0`.
//! * **Case 2**: the interference-free optimum `Sigma*` still lets the
//!   receiver decode the primary, so `K21 = 0, K22 = Sigma*`.
//! * **Case 3**: the secondary message is split; a relaxed program gives the
//!   total covariance and a scalar `gamma` places exactly enough of it after
//!   cancellation to keep the primary decodable.
//!
//! Internally all programs use `K = s Kn` with `s = P2/alpha` and channels
//! whitened by the noise power, so the power budget reads `tr(Kn) <= 1` and
//! rates are per channel use.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dinkelbach::{dinkelbach_solve, DinkelbachOptions, LogDetFraction};
use crate::error::{InnerError, ModelError, UnderlayError};
use crate::inner::{self, Expr, Loading, LogDetProgram, SlotId, SlotValue};
use crate::linalg::{identity, log2_det_pd, norm_sqr, orth_complement, CMat, CVec, HermitianPsd};
use crate::model::{
    primary_rate_underlay, q1_matrix, r12_at_zero, r12_per_hz, secondary_rate_underlay, ChannelSet,
    Objective, SystemParams,
};

/// `P_int` below this multiple of the noise power is treated as zero.
const ZERO_INTERFERENCE: f64 = 1e-12;
const GAMMA_STEPS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseTag {
    /// Primary treated as noise, no cancellation.
    Case1NoSic,
    /// Primary fully cancelled before decoding the secondary.
    Case2FullSic,
    /// Rate splitting around the cancellation step.
    Case3RateSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseThresholds {
    /// Primary rate decodable at the secondary receiver with no secondary signal, bit/s.
    pub r12_at_zero: f64,
    /// Same rate under interference `Sigma*`, bit/s; absent in Case 1.
    pub case2_threshold: Option<f64>,
    /// Tolerable interference at the primary receiver, W (infinite when `R1* = 0`).
    pub p_int: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnderlaySolution {
    pub k21: HermitianPsd,
    pub k22: HermitianPsd,
    pub case_tag: CaseTag,
    /// bit/Joule, with the true `alpha` and `P_c`.
    pub ee: f64,
    pub r1: f64,
    pub r2: f64,
    /// Primary rate decodable at the secondary receiver under `k22`, bit/s.
    pub r12: f64,
    /// `alpha tr(k21 + k22)`, W.
    pub tx_power: f64,
    /// Case 3 only.
    pub gamma: Option<f64>,
    /// Case 3 only: the relaxed optimum `(K21_hat, K22_hat)` before the split.
    pub relaxed: Option<(HermitianPsd, HermitianPsd)>,
    pub thresholds: CaseThresholds,
    /// Dinkelbach iterations summed over the programs solved.
    pub iterations: usize,
}

/// Interference power the primary receiver tolerates while meeting `R1*`.
pub fn compute_p_int(p: &SystemParams, ch: &ChannelSet) -> Result<f64, UnderlayError> {
    p.validate()?;
    ch.validate(p)?;
    if p.r1_star == 0.0 {
        return Ok(f64::INFINITY);
    }
    let signal = p.p1 * ch.h11_norm_sqr();
    let p_int = signal / ((p.r1_star / p.bandwidth).exp2() - 1.0) - p.noise_power;
    if p_int >= 0.0 {
        return Ok(p_int);
    }
    if p_int >= -1e-9 * p.noise_power {
        return Ok(0.0);
    }
    Err(UnderlayError::R1StarExceedsDirectCapacity)
}

/// Outcome of the case test.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseSelection {
    pub case_tag: CaseTag,
    pub thresholds: CaseThresholds,
    /// The interference-free optimum, when it was computed (Cases 2 and 3).
    pub sigma_star: Option<HermitianPsd>,
    iterations: usize,
}

/// Decides which regime applies, solving for `Sigma*` when Case 1 is ruled out.
pub fn select_case(
    p: &SystemParams,
    ch: &ChannelSet,
    objective: Objective,
) -> Result<CaseSelection, UnderlayError> {
    let ctx = Ctx::new(p, ch, objective)?;
    ctx.select()
}

pub fn solve_case1(
    p: &SystemParams,
    ch: &ChannelSet,
    objective: Objective,
) -> Result<UnderlaySolution, UnderlayError> {
    let ctx = Ctx::new(p, ch, objective)?;
    let thresholds = CaseThresholds {
        r12_at_zero: r12_at_zero(p, ch),
        case2_threshold: None,
        p_int: ctx.p_int,
    };
    ctx.case1(thresholds)
}

/// Returns `(0, Sigma*)`. The caller is responsible for the case test; the
/// returned `r12` shows whether the primary is decodable.
pub fn solve_case2(
    p: &SystemParams,
    ch: &ChannelSet,
    objective: Objective,
) -> Result<UnderlaySolution, UnderlayError> {
    let ctx = Ctx::new(p, ch, objective)?;
    let (sigma, iterations) = ctx.sigma_star()?;
    let r12 = ctx.r12(&sigma);
    let thresholds = CaseThresholds {
        r12_at_zero: r12_at_zero(p, ch),
        case2_threshold: Some(r12),
        p_int: ctx.p_int,
    };
    ctx.finish(
        CaseTag::Case2FullSic,
        HermitianPsd::zeros(p.n_t2),
        sigma,
        thresholds,
        iterations,
    )
}

pub fn solve_case3(
    p: &SystemParams,
    ch: &ChannelSet,
    objective: Objective,
) -> Result<UnderlaySolution, UnderlayError> {
    let ctx = Ctx::new(p, ch, objective)?;
    let (sigma, iterations) = ctx.sigma_star()?;
    let thresholds = CaseThresholds {
        r12_at_zero: r12_at_zero(p, ch),
        case2_threshold: Some(ctx.r12(&sigma)),
        p_int: ctx.p_int,
    };
    ctx.case3(thresholds, &sigma, iterations)
}

/// Energy-efficient (or rate-maximizing) secondary covariances.
pub fn allocate_underlay(
    p: &SystemParams,
    ch: &ChannelSet,
    objective: Objective,
) -> Result<UnderlaySolution, UnderlayError> {
    let ctx = Ctx::new(p, ch, objective)?;
    let sel = ctx.select()?;
    log::debug!(
        "underlay case {:?}, thresholds {:?}",
        sel.case_tag,
        sel.thresholds
    );
    match sel.case_tag {
        CaseTag::Case1NoSic => ctx.case1(sel.thresholds),
        CaseTag::Case2FullSic => {
            let sigma = sel.sigma_star.expect("Case 2 computes Sigma*");
            ctx.finish(
                CaseTag::Case2FullSic,
                HermitianPsd::zeros(p.n_t2),
                sigma,
                sel.thresholds,
                sel.iterations,
            )
        }
        CaseTag::Case3RateSplit => {
            let sigma = sel.sigma_star.expect("Case 3 computes Sigma*");
            ctx.case3(sel.thresholds, &sigma, sel.iterations)
        }
    }
}

/// Normalized problem data shared by the three programs.
struct Ctx<'a> {
    p: &'a SystemParams,
    ch: &'a ChannelSet,
    p_int: f64,
    /// `P2 / alpha`.
    scale: f64,
    q1: CMat,
    /// Variables live in `basis * Kn * basis^H`; the basis drops the `h21`
    /// direction when no interference is tolerated.
    basis: CMat,
    /// `H22 basis sqrt(scale) / sigma`.
    g: CMat,
    /// `I + Q1 / sigma^2`.
    iq: CMat,
    /// `q` with `q q^H = Q1 / sigma^2`.
    q1_dir: CVec,
    /// Coefficient `c` of `c * h^H Kn h <= 1`, if the constraint can bind.
    interference: Option<(f64, CVec)>,
    /// Objective denominator is `1 + d tr(Kn)`.
    d: f64,
    r1_hz: f64,
    r2_hz: f64,
}

impl<'a> Ctx<'a> {
    fn new(
        p: &'a SystemParams,
        ch: &'a ChannelSet,
        objective: Objective,
    ) -> Result<Self, UnderlayError> {
        let p_int = compute_p_int(p, ch)?;
        if p.alpha <= 0.0 {
            return Err(ModelError::InvalidParam("alpha must be > 0 for allocation".into()).into());
        }
        let s2 = p.noise_power;
        let scale = p.p2 / p.alpha;
        let q1 = q1_matrix(p, ch);
        let n = p.n_t2;
        let basis = if p_int < ZERO_INTERFERENCE * s2 {
            orth_complement(&ch.h21)
        } else {
            identity(n)
        };
        let reduced = basis.ncols() < n;
        let g = (&ch.h22 * &basis).scale((scale / s2).sqrt());
        let iq = identity(p.n_r) + q1.unscale(s2);
        let n11 = ch.h11_norm_sqr();
        let q1_dir = if n11 > 0.0 {
            (&ch.h12 * &ch.h11).scale((p.p1 / (n11 * s2)).sqrt())
        } else {
            CVec::zeros(p.n_r)
        };
        let h21n = norm_sqr(&ch.h21);
        let interference = if reduced || !p_int.is_finite() || scale * h21n <= p_int {
            None
        } else {
            Some((scale / p_int, ch.h21.clone()))
        };
        let (alpha_obj, pc_obj) = objective.denominator_weights(p);
        Ok(Self {
            p,
            ch,
            p_int,
            scale,
            q1,
            basis,
            g,
            iq,
            q1_dir,
            interference,
            d: alpha_obj * scale / pc_obj,
            r1_hz: p.r1_star / p.bandwidth,
            r2_hz: p.r2_star / p.bandwidth,
        })
    }

    fn dim(&self) -> usize {
        self.basis.ncols()
    }

    fn degenerate(&self) -> bool {
        self.scale == 0.0 || self.dim() == 0
    }

    fn r12(&self, k22: &HermitianPsd) -> f64 {
        self.p.bandwidth * r12_per_hz(self.p, &self.q1, &self.ch.h22, k22.matrix())
    }

    fn lift(&self, kn: &HermitianPsd) -> HermitianPsd {
        let m = &self.basis * kn.matrix() * self.basis.adjoint();
        HermitianPsd::project(&m.scale(self.scale)).0
    }

    /// Program with the power and interference constraints on `slots`.
    fn base_program(&self, n_slots: usize) -> (LogDetProgram, Vec<SlotId>) {
        let mut prog = LogDetProgram::new();
        let slots: Vec<SlotId> = (0..n_slots).map(|_| prog.add_matrix(self.dim())).collect();
        let mut power = Expr::constant(1.0);
        for &k in &slots {
            power = power.trace(k, -1.0);
        }
        prog.add_constraint(power);
        if let Some((c, h)) = &self.interference {
            let mut e = Expr::constant(1.0);
            for &k in &slots {
                e = e.quad(k, h, -c);
            }
            prog.add_constraint(e);
        }
        (prog, slots)
    }

    fn denominator(&self, slots: &[SlotId]) -> Expr {
        let mut e = Expr::constant(1.0);
        for &k in slots {
            e = e.trace(k, self.d);
        }
        e
    }

    /// Runs Dinkelbach on `numerator / denominator` over `prog`. `None` when
    /// only the origin is feasible.
    fn run(
        &self,
        prog: LogDetProgram,
        numerator: Expr,
        slots: &[SlotId],
        hint: Option<DVector<f64>>,
    ) -> Result<Option<(LogDetProgram, DVector<f64>, usize)>, UnderlayError> {
        let start = match inner::find_feasible(&prog, hint.as_ref()) {
            Ok(x) => x,
            Err(InnerError::Infeasible) => {
                return if self.r2_hz > 0.0 {
                    Err(UnderlayError::R2StarInfeasible)
                } else {
                    Ok(None)
                };
            }
            Err(e) => return Err(UnderlayError::Solver(e.into())),
        };
        let frac = LogDetFraction::new(prog.clone(), numerator, self.denominator(slots))
            .map_err(|e| UnderlayError::Solver(e.into()))?
            .with_start(start);
        let out = dinkelbach_solve(
            &frac,
            0.0,
            &DinkelbachOptions {
                eps: 1e-9,
                max_iter: 100,
            },
        )?;
        Ok(Some((prog, out.point, out.iterations)))
    }

    /// Problem with the primary treated as noise (Case 1).
    fn tin(&self) -> Result<(HermitianPsd, usize), UnderlayError> {
        if self.degenerate() {
            return self.zero_or_infeasible();
        }
        let (mut prog, slots) = self.base_program(1);
        let k = slots[0];
        let ln_iq = log2_det_pd(&self.iq).expect("I + Q is positive definite");
        let rate = Expr::new()
            .log2_det(
                1.0,
                self.iq.clone(),
                vec![(k, Loading::Congruence(self.g.clone()))],
            )
            .plus_constant(-ln_iq);
        if self.r2_hz > 0.0 {
            prog.add_constraint(rate.clone().plus_constant(-self.r2_hz));
        }
        match self.run(prog, rate, &slots, None)? {
            Some((prog, x, it)) => Ok((self.lift(&prog.matrix_at(&x, k)), it)),
            None => Ok((HermitianPsd::zeros(self.p.n_t2), 0)),
        }
    }

    /// Interference-free optimum `Sigma*`.
    fn sigma_star(&self) -> Result<(HermitianPsd, usize), UnderlayError> {
        if self.degenerate() {
            return self.zero_or_infeasible();
        }
        let (mut prog, slots) = self.base_program(1);
        let k = slots[0];
        let rate = Expr::new().log2_det(
            1.0,
            identity(self.p.n_r),
            vec![(k, Loading::Congruence(self.g.clone()))],
        );
        if self.r2_hz > 0.0 {
            prog.add_constraint(rate.clone().plus_constant(-self.r2_hz));
        }
        match self.run(prog, rate, &slots, None)? {
            Some((prog, x, it)) => Ok((self.lift(&prog.matrix_at(&x, k)), it)),
            None => Ok((HermitianPsd::zeros(self.p.n_t2), 0)),
        }
    }

    fn zero_or_infeasible(&self) -> Result<(HermitianPsd, usize), UnderlayError> {
        if self.r2_hz > 0.0 {
            Err(UnderlayError::R2StarInfeasible)
        } else {
            Ok((HermitianPsd::zeros(self.p.n_t2), 0))
        }
    }

    fn select(&self) -> Result<CaseSelection, UnderlayError> {
        let r0 = r12_at_zero(self.p, self.ch);
        if self.p.r1_star > 0.0 && self.p.r1_star >= r0 {
            return Ok(CaseSelection {
                case_tag: CaseTag::Case1NoSic,
                thresholds: CaseThresholds {
                    r12_at_zero: r0,
                    case2_threshold: None,
                    p_int: self.p_int,
                },
                sigma_star: None,
                iterations: 0,
            });
        }
        let (sigma, iterations) = self.sigma_star()?;
        let threshold = self.r12(&sigma);
        let case_tag = if self.p.r1_star <= threshold {
            CaseTag::Case2FullSic
        } else {
            CaseTag::Case3RateSplit
        };
        Ok(CaseSelection {
            case_tag,
            thresholds: CaseThresholds {
                r12_at_zero: r0,
                case2_threshold: Some(threshold),
                p_int: self.p_int,
            },
            sigma_star: Some(sigma),
            iterations,
        })
    }

    fn case1(&self, thresholds: CaseThresholds) -> Result<UnderlaySolution, UnderlayError> {
        let (k21, it) = self.tin()?;
        self.finish(
            CaseTag::Case1NoSic,
            k21,
            HermitianPsd::zeros(self.p.n_t2),
            thresholds,
            it,
        )
    }

    fn case3(
        &self,
        thresholds: CaseThresholds,
        sigma: &HermitianPsd,
        mut iterations: usize,
    ) -> Result<UnderlaySolution, UnderlayError> {
        let n = self.p.n_t2;
        if self.degenerate() {
            let (z, _) = self.zero_or_infeasible()?;
            return self.finish(
                CaseTag::Case3RateSplit,
                z.clone(),
                z,
                thresholds,
                iterations,
            );
        }
        let (mut prog, slots) = self.base_program(2);
        let (k1, k2) = (slots[0], slots[1]);
        let g = Loading::Congruence(self.g.clone());
        let total = Expr::new()
            .log2_det(1.0, self.iq.clone(), vec![(k1, g.clone()), (k2, g.clone())])
            .plus_constant(-self.r1_hz);
        // Primary rate decodable under K22 must not exceed the target.
        prog.add_constraint(
            Expr::new()
                .log2_det_ratio(-1.0, identity(self.p.n_r), vec![(k2, g)], &self.q1_dir)
                .plus_constant(self.r1_hz),
        );
        if self.r2_hz > 0.0 {
            prog.add_constraint(total.clone().plus_constant(-self.r2_hz));
        }
        let hint = self.pack_hint(&prog, sigma);
        let Some((prog, x, it)) = self.run(prog, total, &slots, hint)? else {
            let z = HermitianPsd::zeros(n);
            return self.finish(
                CaseTag::Case3RateSplit,
                z.clone(),
                z,
                thresholds,
                iterations,
            );
        };
        iterations += it;
        let k21_hat = self.lift(&prog.matrix_at(&x, k1));
        let k22_hat = self.lift(&prog.matrix_at(&x, k2));
        let gamma = self.find_gamma(&k22_hat)?;
        let k21 = k21_hat.add(&k22_hat.scale(1.0 - gamma));
        let k22 = k22_hat.scale(gamma);
        let mut out = self.finish(CaseTag::Case3RateSplit, k21, k22, thresholds, iterations)?;
        out.gamma = Some(gamma);
        out.relaxed = Some((k21_hat, k22_hat));
        Ok(out)
    }

    /// A point just inside `(0, Sigma*)` in normalized coordinates, as a phase-I starting point.
    fn pack_hint(&self, prog: &LogDetProgram, sigma: &HermitianPsd) -> Option<DVector<f64>> {
        const EPS: f64 = 1e-3;
        let d = self.dim();
        let inv = self.basis.adjoint() * sigma.matrix() * &self.basis;
        let load = identity(d).scale(EPS / (2.0 * d as f64));
        let kn = inv.unscale(self.scale).scale(1.0 - 2.0 * EPS) + &load;
        prog.pack(&[SlotValue::Matrix(load), SlotValue::Matrix(kn)])
            .ok()
    }

    /// Largest `gamma` in `[0, 1]` with `r12(gamma K22_hat) >= R1*`.
    fn find_gamma(&self, k22_hat: &HermitianPsd) -> Result<f64, UnderlayError> {
        let target = self.p.r1_star;
        let f = |g: f64| self.r12(&k22_hat.scale(g)) - target;
        let at_zero = f(0.0);
        let at_one = f(1.0);
        let tol = 1e-9 * self.p.bandwidth * (1.0 + self.r1_hz);
        if at_zero < -tol {
            return Err(UnderlayError::GammaBracketFailure { at_zero, at_one });
        }
        if at_one >= 0.0 {
            return Ok(1.0);
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..GAMMA_STEPS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    fn finish(
        &self,
        case_tag: CaseTag,
        k21: HermitianPsd,
        k22: HermitianPsd,
        thresholds: CaseThresholds,
        iterations: usize,
    ) -> Result<UnderlaySolution, UnderlayError> {
        let p = self.p;
        let r1 = primary_rate_underlay(p, self.ch, &k21, &k22)?;
        let r2 = secondary_rate_underlay(p, self.ch, &k21, &k22)?;
        let total = k21.trace() + k22.trace();
        let tx_power = p.alpha * total;
        let ee = r2 / (tx_power + p.p_c);
        Ok(UnderlaySolution {
            r12: self.r12(&k22),
            k21,
            k22,
            case_tag,
            ee,
            r1,
            r2,
            tx_power,
            gamma: None,
            relaxed: None,
            thresholds,
            iterations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn params() -> SystemParams {
        SystemParams {
            n_t1: 2,
            n_t2: 2,
            n_r: 2,
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

    fn channels() -> ChannelSet {
        ChannelSet {
            h11: CVec::from_vec(vec![c(1.2, 0.3), c(-0.4, 0.8)]),
            h22: CMat::from_row_slice(
                2,
                2,
                &[c(1.0, 0.2), c(0.3, -0.5), c(-0.2, 0.4), c(0.9, 0.1)],
            ),
            h12: CMat::from_row_slice(
                2,
                2,
                &[c(0.8, -0.1), c(0.2, 0.6), c(0.5, 0.3), c(-0.7, 0.2)],
            ),
            h21: CVec::from_vec(vec![c(0.3, 0.1), c(-0.2, 0.25)]),
            ht: CMat::identity(2, 2),
        }
    }

    #[test]
    fn p_int_arithmetic() {
        let p = SystemParams {
            n_t1: 1,
            n_t2: 1,
            n_r: 1,
            p1: 3.0,
            r1_star: 1.0,
            ..params()
        };
        let ch = ChannelSet {
            h11: CVec::from_element(1, c(1.0, 0.0)),
            h22: CMat::from_element(1, 1, c(1.0, 0.0)),
            h12: CMat::from_element(1, 1, c(1.0, 0.0)),
            h21: CVec::from_element(1, c(1.0, 0.0)),
            ht: CMat::from_element(1, 1, c(1.0, 0.0)),
        };
        assert!((compute_p_int(&p, &ch).unwrap() - 2.0).abs() < 1e-14);
        let p = SystemParams { r1_star: 2.0, ..p };
        assert!(compute_p_int(&p, &ch).unwrap().abs() < 1e-14);
        let p = SystemParams { r1_star: 2.5, ..p };
        assert_eq!(
            compute_p_int(&p, &ch),
            Err(UnderlayError::R1StarExceedsDirectCapacity)
        );
    }

    #[test]
    fn zero_target_is_case2() {
        let sel = select_case(&params(), &channels(), Objective::EnergyEfficiency).unwrap();
        assert_eq!(sel.case_tag, CaseTag::Case2FullSic);
    }

    #[test]
    fn no_cross_link_is_case1() {
        let mut ch = channels();
        ch.h12 = CMat::zeros(2, 2);
        let p = SystemParams {
            r1_star: 0.5,
            ..params()
        };
        let sel = select_case(&p, &ch, Objective::EnergyEfficiency).unwrap();
        assert_eq!(sel.case_tag, CaseTag::Case1NoSic);
    }

    #[test]
    fn case3_split_meets_primary_target() {
        let ch = channels();
        let cap = crate::model::direct_capacity(&params(), &ch);
        let mut seen = Vec::new();
        for i in 1..40 {
            let r1 = cap * i as f64 / 40.0;
            let p = SystemParams {
                r1_star: r1,
                ..params()
            };
            let sol = allocate_underlay(&p, &ch, Objective::EnergyEfficiency).unwrap();
            seen.push(sol.case_tag);
            assert!(sol.r1 >= r1 * (1.0 - 1e-7), "primary target violated");
            assert!(sol.tx_power <= p.p2 * (1.0 + 1e-9));
            if sol.case_tag == CaseTag::Case3RateSplit {
                assert!((sol.r12 - r1).abs() <= 1e-6 * (1.0 + r1));
                let (a, b) = sol.relaxed.clone().unwrap();
                let diff = sol.k21.add(&sol.k22).matrix() - a.add(&b).matrix();
                assert!(diff.norm() <= 1e-9 * (1.0 + a.trace() + b.trace()));
            }
        }
        let rank = |t: &CaseTag| match t {
            CaseTag::Case2FullSic => 0,
            CaseTag::Case3RateSplit => 1,
            CaseTag::Case1NoSic => 2,
        };
        assert!(
            seen.windows(2).all(|w| rank(&w[0]) <= rank(&w[1])),
            "{seen:?}"
        );
        assert!(seen.contains(&CaseTag::Case3RateSplit), "{seen:?}");
    }

    #[test]
    fn zero_interference_budget_nulls_the_cross_direction() {
        let ch = channels();
        let cap = crate::model::direct_capacity(&params(), &ch);
        let p = SystemParams {
            r1_star: cap,
            ..params()
        };
        let sol = allocate_underlay(&p, &ch, Objective::EnergyEfficiency).unwrap();
        assert!((sol.k21.quad(&ch.h21) + sol.k22.quad(&ch.h21)).abs() < 1e-12);
        assert!(sol.ee > 0.0);
    }

    #[test]
    fn unreachable_secondary_target_is_reported() {
        let p = SystemParams {
            r2_star: 1e3,
            ..params()
        };
        assert_eq!(
            allocate_underlay(&p, &channels(), Objective::EnergyEfficiency).unwrap_err(),
            UnderlayError::R2StarInfeasible
        );
    }

    #[test]
    fn rate_mode_uses_more_power() {
        let p = SystemParams {
            p_c: 0.1,
            ..params()
        };
        let ee = allocate_underlay(&p, &channels(), Objective::EnergyEfficiency).unwrap();
        let rate = allocate_underlay(&p, &channels(), Objective::Rate).unwrap();
        assert!(rate.r2 >= ee.r2 - 1e-9);
        assert!(ee.ee >= rate.ee - 1e-9);
        assert!((rate.tx_power - p.p2).abs() < 1e-6 * p.p2);
    }
}
