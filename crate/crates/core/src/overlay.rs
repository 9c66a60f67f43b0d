//! Overlay spectrum sharing: the secondary transmitter amplifies and forwards
//! the primary message (half duplex) and superimposes its own signal.
//!
//! The relay matrix `A` enters through `X = A M A^H`. With the relay's
//! receive direction chosen optimally for a given `X`, the primary rate
//! target becomes the affine constraint
//!
//! ```text
//!   (p - c* sigma^2) h21^H X h21 / mu1 >= c* (sigma^2 + h21^H B h21)
//! ```
//!
//! with `p = P1 ||Ht h11||^2 / ||h11||^2`, `mu1 = p + sigma^2` and
//! `c* = 2^(2 R1*/B) - 1 - P1 ||h11||^2 / sigma^2`. The secondary rate is a
//! difference of log-dets in `(X, B)`, so the problem is solved by a
//! sequential loop over concave minorizers obtained by linearizing the
//! subtracted term: over a full `X` ([`solve_overlay_full`]) or over a
//! rank-one relay `X = a mu1 u u^H` ([`solve_overlay_rank1`]).
//!
//! As in the underlay module the programs use `X = s Xn`, `B = s Bn` with
//! `s = P2/alpha`, so the power budget reads `tr(Xn) + tr(Bn) <= 1`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dinkelbach::{
    surrogate_loop, FractionalTrace, LogDetFraction, SurrogateModel, SurrogateOptions,
};
use crate::error::{DinkelbachError, InnerError, ModelError, OverlayError};
use crate::inner::{self, Expr, Loading, LogDetProgram, SlotId, SlotValue};
use crate::linalg::{
    complete_basis, eigh, hermitize, identity, inverse_ln_det, log2_det_pd, norm_sqr, outer,
    quad_form, trace_re, CMat, CVec, HermitianPsd,
};
use crate::model::{
    direct_capacity, direct_snr, overlay_primary_per_hz, relay_input_covariance, ChannelSet,
    Objective, SystemParams, INV_LN2,
};

/// Channel- and target-dependent constants of the overlay problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayConstants {
    /// Covariance of the signal received by the relay.
    pub m_mat: HermitianPsd,
    /// Relayed SNR the primary needs on top of its direct link.
    pub c_star: f64,
    /// `mu1 / sigma^2`.
    pub psi: f64,
    /// `psi ||H22 h21||^2 / ||h21||^2`.
    pub phi: f64,
    /// `P1 ||Ht h11||^2 / ||h11||^2`.
    pub relay_signal: f64,
    /// `relay_signal + sigma^2`.
    pub mu1: f64,
}

impl OverlayConstants {
    pub fn new(p: &SystemParams, ch: &ChannelSet) -> Result<Self, OverlayError> {
        p.validate()?;
        ch.validate(p)?;
        let n11 = ch.h11_norm_sqr();
        if n11 == 0.0 {
            return Err(OverlayError::DegenerateChannel("h11 is zero"));
        }
        let nh = norm_sqr(&ch.h21);
        if nh == 0.0 {
            return Err(OverlayError::DegenerateChannel("h21 is zero"));
        }
        let s2 = p.noise_power;
        let relay_signal = p.p1 * ch.ht_h11_norm_sqr() / n11;
        let mu1 = relay_signal + s2;
        let psi = mu1 / s2;
        let phi = psi * norm_sqr(&(&ch.h22 * &ch.h21)) / nh;
        let c_star = (2.0 * p.r1_star / p.bandwidth).exp2() - 1.0 - direct_snr(p, ch);
        let m_mat = HermitianPsd::project(&relay_input_covariance(p, ch)).0;
        Ok(Self {
            m_mat,
            c_star,
            psi,
            phi,
            relay_signal,
            mu1,
        })
    }
}

/// Largest primary rate any relay matrix within the power budget can give.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxPrimaryRate {
    /// bit/s.
    pub r_bar: f64,
    pub a_star: CMat,
    /// `a` in `A* = sqrt(a) u v^H`.
    pub a_scale: f64,
}

pub fn max_primary_rate(p: &SystemParams, ch: &ChannelSet) -> Result<MaxPrimaryRate, OverlayError> {
    let k = OverlayConstants::new(p, ch)?;
    if k.relay_signal == 0.0 {
        return Err(OverlayError::DegenerateChannel(
            "the relay receives no primary signal",
        ));
    }
    if p.alpha <= 0.0 {
        return Err(ModelError::InvalidParam("alpha must be > 0 for allocation".into()).into());
    }
    let a = p.p2 / (p.alpha * k.mu1);
    let u = unit(&ch.h21);
    let v = unit(&(&ch.ht * &ch.h11));
    let a_star = outer(&u, &v).scale(a.sqrt());
    let nh = norm_sqr(&ch.h21);
    let s2 = p.noise_power;
    let gain = k.relay_signal * a * nh / (s2 * (1.0 + a * nh));
    let r_bar = 0.5 * p.bandwidth * (1.0 + direct_snr(p, ch) + gain).log2();
    debug_assert!({
        let x = hermitize(&(&a_star * k.m_mat.matrix() * a_star.adjoint()));
        (p.alpha * trace_re(&x) - p.p2).abs() <= 1e-9 * p.p2.max(f64::MIN_POSITIVE)
    });
    Ok(MaxPrimaryRate {
        r_bar,
        a_star,
        a_scale: a,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Feasibility {
    Feasible { r_bar: f64 },
    InfeasibleR1Star { r_bar: f64 },
    UnderlayRegime,
}

pub fn check_feasibility(p: &SystemParams, ch: &ChannelSet) -> Result<Feasibility, OverlayError> {
    p.validate()?;
    ch.validate(p)?;
    if p.r1_star <= direct_capacity(p, ch) {
        return Ok(Feasibility::UnderlayRegime);
    }
    let r_bar = max_primary_rate(p, ch)?.r_bar;
    if p.r1_star <= r_bar * (1.0 + 1e-12) {
        Ok(Feasibility::Feasible { r_bar })
    } else {
        Ok(Feasibility::InfeasibleR1Star { r_bar })
    }
}

/// The primary-rate constraint as `x_coef h^H X h - b_coef h^H B h - rhs >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimaryConstraint {
    pub h21: CVec,
    pub x_coef: f64,
    pub b_coef: f64,
    pub rhs: f64,
}

impl PrimaryConstraint {
    pub fn slack(&self, x: &CMat, b: &CMat) -> f64 {
        self.x_coef * quad_form(x, &self.h21) - self.b_coef * quad_form(b, &self.h21) - self.rhs
    }
}

/// Affine form of the primary-rate target in `(X, B)` under the optimal relay receive direction.
pub fn optimal_v_constraint(
    p: &SystemParams,
    ch: &ChannelSet,
    k: &OverlayConstants,
) -> PrimaryConstraint {
    let s2 = p.noise_power;
    PrimaryConstraint {
        h21: ch.h21.clone(),
        x_coef: (k.relay_signal - k.c_star * s2) / k.mu1,
        b_coef: k.c_star,
        rhs: k.c_star * s2,
    }
}

/// Relay matrix with `A M A^H = X` whose receive direction maximizes the primary rate.
pub fn relay_matrix_from_x(p: &SystemParams, ch: &ChannelSet, x: &HermitianPsd) -> CMat {
    let m = relay_input_covariance(p, ch);
    let m_isqrt = crate::linalg::inv_sqrt_pd(&m);
    let (vals, u) = eigh(x.matrix());
    let n = vals.len();
    let lam_sqrt = CMat::from_diagonal(&DVector::from_iterator(
        n,
        vals.iter()
            .map(|v| num_complex::Complex64::from(v.max(0.0).sqrt())),
    ));
    let w = &m_isqrt * &ch.ht * &ch.h11;
    let z = &lam_sqrt * u.adjoint() * &ch.h21;
    let v = if norm_sqr(&w) > 0.0 && norm_sqr(&z) > 0.0 {
        complete_basis(&unit(&w)) * complete_basis(&unit(&z)).adjoint()
    } else {
        identity(n)
    };
    u * lam_sqrt * v.adjoint() * m_isqrt
}

fn unit(v: &CVec) -> CVec {
    let n = norm_sqr(v).sqrt();
    if n == 0.0 {
        v.clone()
    } else {
        v.unscale(n)
    }
}

/// First-order lower bound on the secondary rate around `X0`, obtained by
/// linearizing the subtracted interference term.
#[derive(Debug, Clone)]
pub struct TaylorBound {
    params: SystemParams,
    h22: CMat,
    x0: CMat,
    /// `H22^H (sigma^2 I + H22 X0 H22^H)^-1 H22`.
    m0: CMat,
    ld0: f64,
}

pub fn taylor_lower_bound(x0: &HermitianPsd, p: &SystemParams, ch: &ChannelSet) -> TaylorBound {
    let z0 = noise_plus(p.noise_power, &ch.h22, x0.matrix());
    let (zinv, ln_det) = inverse_ln_det(&z0).expect("noise-plus-PSD is positive definite");
    let m0 = hermitize(&(ch.h22.adjoint() * zinv * &ch.h22));
    TaylorBound {
        params: p.clone(),
        h22: ch.h22.clone(),
        x0: x0.matrix().clone(),
        m0,
        ld0: ln_det * INV_LN2,
    }
}

impl TaylorBound {
    /// Lower bound on the secondary rate at `(X, B)`, bit/s.
    pub fn value(&self, x: &CMat, b: &CMat) -> f64 {
        let s2 = self.params.noise_power;
        let total = log2_det_pd(&noise_plus(s2, &self.h22, &(x + b))).expect("positive definite");
        let lin = crate::linalg::re_trace_product(&self.m0, &(x - &self.x0)) * INV_LN2;
        0.5 * self.params.bandwidth * (total - self.ld0 - lin)
    }

    /// Gradient of the bound with respect to `X`, as a Hermitian matrix `G`
    /// with directional derivative `Re tr(G D)`; bit/s per W.
    pub fn gradient_x(&self, x: &CMat, b: &CMat) -> CMat {
        let s2 = self.params.noise_power;
        let (zinv, _) =
            inverse_ln_det(&noise_plus(s2, &self.h22, &(x + b))).expect("positive definite");
        let g_total = hermitize(&(self.h22.adjoint() * zinv * &self.h22));
        (g_total - &self.m0).scale(0.5 * self.params.bandwidth * INV_LN2)
    }
}

/// Exact secondary rate gradient with respect to `X`, same convention as [`TaylorBound::gradient_x`].
pub fn secondary_rate_gradient_x(p: &SystemParams, ch: &ChannelSet, x: &CMat, b: &CMat) -> CMat {
    let s2 = p.noise_power;
    let (zb, _) = inverse_ln_det(&noise_plus(s2, &ch.h22, &(x + b))).expect("positive definite");
    let (z, _) = inverse_ln_det(&noise_plus(s2, &ch.h22, x)).expect("positive definite");
    let g = hermitize(&(ch.h22.adjoint() * (zb - z) * &ch.h22));
    g.scale(0.5 * p.bandwidth * INV_LN2)
}

/// Secondary rate (bit/s) with `X = A M A^H` given directly.
pub fn secondary_rate_x(p: &SystemParams, ch: &ChannelSet, x: &CMat, b: &CMat) -> f64 {
    p.bandwidth * crate::model::overlay_secondary_per_hz(p, &ch.h22, x, b)
}

fn noise_plus(s2: f64, h: &CMat, k: &CMat) -> CMat {
    hermitize(&(identity(h.nrows()).scale(s2) + h * k * h.adjoint()))
}

/// Lower bound on the rank-one-relay secondary rate around amplification `a0`.
#[derive(Debug, Clone)]
pub struct Rank1Bound {
    params: SystemParams,
    h22: CMat,
    /// Unit relay transmit direction.
    u: CVec,
    mu1: f64,
    /// `mu1 ||H22 u||^2 / sigma^2`.
    phi: f64,
    a0: f64,
}

pub fn rank1_lower_bound(
    a0: f64,
    p: &SystemParams,
    ch: &ChannelSet,
) -> Result<Rank1Bound, OverlayError> {
    let k = OverlayConstants::new(p, ch)?;
    let u = unit(&ch.h21);
    Ok(Rank1Bound {
        params: p.clone(),
        h22: ch.h22.clone(),
        u,
        mu1: k.mu1,
        phi: k.phi,
        a0,
    })
}

impl Rank1Bound {
    /// `X` produced by amplification `a`.
    pub fn relay_x(&self, a: f64) -> CMat {
        outer(&self.u, &self.u).scale(a * self.mu1)
    }

    /// Exact rank-one secondary rate, bit/s.
    pub fn rate(&self, a: f64, b: &CMat) -> f64 {
        let s2 = self.params.noise_power;
        let total = log2_det_pd(&noise_plus(s2, &self.h22, &(self.relay_x(a) + b)))
            .expect("positive definite");
        let n_r = self.h22.nrows() as f64;
        0.5 * self.params.bandwidth * (total - n_r * s2.log2() - (1.0 + a * self.phi).log2())
    }

    /// The bound, bit/s.
    pub fn value(&self, a: f64, b: &CMat) -> f64 {
        let s2 = self.params.noise_power;
        let total = log2_det_pd(&noise_plus(s2, &self.h22, &(self.relay_x(a) + b)))
            .expect("positive definite");
        let n_r = self.h22.nrows() as f64;
        let lin = (1.0 + self.a0 * self.phi).log2()
            + self.phi * (a - self.a0) * INV_LN2 / (1.0 + self.a0 * self.phi);
        0.5 * self.params.bandwidth * (total - n_r * s2.log2() - lin)
    }
}

/// Smallest rank-one amplification meeting the primary target with secondary covariance `b`.
pub fn rank1_min_amplification(
    p: &SystemParams,
    ch: &ChannelSet,
    b: &CMat,
) -> Result<f64, OverlayError> {
    let k = OverlayConstants::new(p, ch)?;
    let s2 = p.noise_power;
    let margin = k.relay_signal - k.c_star * s2;
    if margin <= 0.0 {
        return Err(OverlayError::Rank1Infeasible);
    }
    let nh = norm_sqr(&ch.h21);
    Ok(k.c_star * (s2 + quad_form(b, &ch.h21)) / (nh * margin))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OverlayAlgorithm {
    /// Full relay covariance.
    Full,
    /// Rank-one relay.
    Rank1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlaySolution {
    pub algorithm: OverlayAlgorithm,
    /// `X = A M A^H`.
    pub relay_x: HermitianPsd,
    /// Rank-one path only: `a` in `A = sqrt(a) u v^H`.
    pub relay_scale_a: Option<f64>,
    #[serde(with = "crate::serde_cplx::cmat")]
    pub relay_a: CMat,
    pub b_cov: HermitianPsd,
    /// bit/Joule with the true `alpha` and `P_c`.
    pub ee: f64,
    pub r1: f64,
    pub r2: f64,
    /// `alpha (tr X + tr B)`, W.
    pub tx_power: f64,
    /// Surrogate problems solved.
    pub iterations: usize,
    pub inner_iterations: usize,
    /// Objective values in bit/Joule (bit/s when maximizing rate).
    pub trace: FractionalTrace,
}

pub fn solve_overlay_full(
    p: &SystemParams,
    ch: &ChannelSet,
    objective: Objective,
    opts: &SurrogateOptions,
) -> Result<OverlaySolution, OverlayError> {
    let ctx = Ctx::new(p, ch, objective)?;
    let model = FullModel::new(&ctx);
    let init = model.initial_point()?;
    let out = surrogate_loop(&model, init, opts).map_err(map_loop_error)?;
    let x = ctx.lift(&model.shape.matrix_at(&out.point, model.x));
    let b = ctx.lift(&model.shape.matrix_at(&out.point, model.b));
    ctx.finish(OverlayAlgorithm::Full, x, None, b, out)
}

pub fn solve_overlay_rank1(
    p: &SystemParams,
    ch: &ChannelSet,
    objective: Objective,
    opts: &SurrogateOptions,
) -> Result<OverlaySolution, OverlayError> {
    let ctx = Ctx::new(p, ch, objective)?;
    if ctx.k.relay_signal - ctx.k.c_star * p.noise_power <= 0.0 {
        return Err(OverlayError::Rank1Infeasible);
    }
    let model = Rank1Model::new(&ctx);
    let init = model.initial_point()?;
    let out = surrogate_loop(&model, init, opts).map_err(map_loop_error)?;
    let an = model.shape.scalar_at(&out.point, model.a);
    let b = ctx.lift(&model.shape.matrix_at(&out.point, model.b));
    let a = an * ctx.scale / ctx.k.mu1;
    let x = HermitianPsd::project(&outer(&ctx.u, &ctx.u).scale(an * ctx.scale)).0;
    ctx.finish(OverlayAlgorithm::Rank1, x, Some(a), b, out)
}

fn map_loop_error(e: DinkelbachError) -> OverlayError {
    match e {
        DinkelbachError::SubproblemFailed(InnerError::Infeasible) => OverlayError::R2StarInfeasible,
        other => OverlayError::Solver(other),
    }
}

/// Normalized data shared by both algorithms.
struct Ctx<'a> {
    p: &'a SystemParams,
    ch: &'a ChannelSet,
    objective: Objective,
    k: OverlayConstants,
    /// `P2 / alpha`.
    scale: f64,
    /// `H22 sqrt(scale) / sigma`.
    g: CMat,
    /// Unit vector along `h21`.
    u: CVec,
    /// Primary constraint as `cx h^H Xn h - cb h^H Bn h - 1 >= 0`.
    cx: f64,
    cb: f64,
    /// Objective denominator `1 + d (tr Xn + tr Bn)`.
    d: f64,
    r2_hz: f64,
}

impl<'a> Ctx<'a> {
    fn new(
        p: &'a SystemParams,
        ch: &'a ChannelSet,
        objective: Objective,
    ) -> Result<Self, OverlayError> {
        match check_feasibility(p, ch)? {
            Feasibility::Feasible { .. } => {}
            Feasibility::UnderlayRegime => return Err(OverlayError::UnderlayRegime),
            Feasibility::InfeasibleR1Star { r_bar } => {
                return Err(OverlayError::InfeasibleR1Star {
                    r1_star: p.r1_star,
                    r_bar,
                })
            }
        }
        let k = OverlayConstants::new(p, ch)?;
        let s2 = p.noise_power;
        let scale = p.p2 / p.alpha;
        let pc = optimal_v_constraint(p, ch, &k);
        let (alpha_obj, pc_obj) = objective.denominator_weights(p);
        Ok(Self {
            p,
            ch,
            objective,
            scale,
            g: ch.h22.scale((scale / s2).sqrt()),
            u: unit(&ch.h21),
            cx: pc.x_coef * scale / pc.rhs,
            cb: pc.b_coef * scale / pc.rhs,
            d: alpha_obj * scale / pc_obj,
            r2_hz: p.r2_star / p.bandwidth,
            k,
        })
    }

    fn n(&self) -> usize {
        self.p.n_t2
    }

    fn lift(&self, m: &HermitianPsd) -> HermitianPsd {
        m.scale(self.scale)
    }

    /// `0.5 log2|I + G (Xn + Bn) G^H| - 0.5 log2|I + G Xn G^H|`.
    fn rate_hz(&self, xn: &CMat, bn: &CMat) -> f64 {
        let i = identity(self.p.n_r);
        let gh = self.g.adjoint();
        let t = log2_det_pd(&hermitize(&(&i + &self.g * (xn + bn) * &gh))).unwrap_or(f64::NAN);
        let s = log2_det_pd(&hermitize(&(&i + &self.g * xn * &gh))).unwrap_or(f64::NAN);
        0.5 * (t - s)
    }

    fn ratio(&self, xn: &CMat, bn: &CMat) -> f64 {
        self.rate_hz(xn, bn) / (1.0 + self.d * (trace_re(xn) + trace_re(bn)))
    }

    /// Power and primary constraints over slots `x` (matrix or scalar relay) and `b`.
    fn add_constraints(&self, prog: &mut LogDetProgram, relay: Relay, b: SlotId) {
        let h = &self.ch.h21;
        let nh = norm_sqr(h);
        let (power, primary) = match relay {
            Relay::Matrix(x) => (
                Expr::constant(1.0).trace(x, -1.0),
                Expr::constant(-1.0).quad(x, h, self.cx),
            ),
            Relay::Scalar(a) => (
                Expr::constant(1.0).scalar(a, -1.0),
                Expr::constant(-1.0).scalar(a, self.cx * nh),
            ),
        };
        prog.add_constraint(power.trace(b, -1.0));
        prog.add_constraint(primary.quad(b, h, -self.cb));
    }

    fn denominator(&self, relay: Relay, b: SlotId) -> Expr {
        let e = Expr::constant(1.0).trace(b, self.d);
        match relay {
            Relay::Matrix(x) => e.trace(x, self.d),
            Relay::Scalar(a) => e.scalar(a, self.d),
        }
    }

    /// Starting relay share `rho` with `Xn = rho u u^H`, `Bn = (1 - rho) I / n`.
    fn initial_share(&self) -> Result<f64, OverlayError> {
        let nh = norm_sqr(&self.ch.h21);
        let n = self.n() as f64;
        // The primary slack is affine in rho: cx nh rho - cb nh (1 - rho) / n - 1.
        let slack = |rho: f64| self.cx * nh * rho - self.cb * nh * (1.0 - rho) / n - 1.0;
        if slack(0.9) > 0.0 {
            return Ok(0.9);
        }
        if slack(1.0) <= 0.0 {
            return Err(OverlayError::InitInfeasible);
        }
        let (mut lo, mut hi) = (0.9, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if slack(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (hi + 1.0))
    }

    fn finish(
        &self,
        algorithm: OverlayAlgorithm,
        x: HermitianPsd,
        a_scale: Option<f64>,
        b: HermitianPsd,
        out: crate::dinkelbach::SurrogateOutcome<DVector<f64>>,
    ) -> Result<OverlaySolution, OverlayError> {
        let p = self.p;
        let relay_a = match a_scale {
            Some(a) => outer(&self.u, &unit(&(&self.ch.ht * &self.ch.h11))).scale(a.sqrt()),
            None => relay_matrix_from_x(p, self.ch, &x),
        };
        let r1 = p.bandwidth * overlay_primary_per_hz(p, self.ch, &relay_a, b.matrix());
        let r2 = secondary_rate_x(p, self.ch, x.matrix(), b.matrix());
        let tx_power = p.alpha * (x.trace() + b.trace());
        let ee = r2 / (tx_power + p.p_c);
        let (_, pc_obj) = self.objective.denominator_weights(p);
        let unit_scale = p.bandwidth / pc_obj;
        let mut trace = out.trace;
        for v in trace.objectives.iter_mut().chain(trace.lambdas.iter_mut()) {
            *v *= unit_scale;
        }
        Ok(OverlaySolution {
            algorithm,
            relay_x: x,
            relay_scale_a: a_scale,
            relay_a,
            b_cov: b,
            ee,
            r1,
            r2,
            tx_power,
            iterations: out.iterations,
            inner_iterations: out.inner_iterations,
            trace,
        })
    }
}

#[derive(Clone, Copy)]
enum Relay {
    Matrix(SlotId),
    Scalar(SlotId),
}

/// Finds a strictly feasible point of `prog` near `hint`; a missing interior
/// means the secondary rate target cannot be met.
fn interior(prog: &LogDetProgram, hint: &DVector<f64>) -> Result<DVector<f64>, InnerError> {
    inner::find_feasible(prog, Some(hint))
}

struct FullModel<'c, 'a> {
    ctx: &'c Ctx<'a>,
    /// Program carrying the slot layout shared by every surrogate.
    shape: LogDetProgram,
    x: SlotId,
    b: SlotId,
}

impl<'c, 'a> FullModel<'c, 'a> {
    fn new(ctx: &'c Ctx<'a>) -> Self {
        let mut shape = LogDetProgram::new();
        let x = shape.add_matrix(ctx.n());
        let b = shape.add_matrix(ctx.n());
        ctx.add_constraints(&mut shape, Relay::Matrix(x), b);
        Self { ctx, shape, x, b }
    }

    fn unpack(&self, coords: &DVector<f64>) -> (CMat, CMat) {
        (
            self.shape.matrix_at(coords, self.x).into_matrix(),
            self.shape.matrix_at(coords, self.b).into_matrix(),
        )
    }

    fn initial_point(&self) -> Result<DVector<f64>, OverlayError> {
        let rho = self.ctx.initial_share()?;
        let n = self.ctx.n();
        let xn = outer(&self.ctx.u, &self.ctx.u).scale(rho);
        let bn = identity(n).scale((1.0 - rho) / n as f64);
        let start = self
            .shape
            .pack(&[SlotValue::Matrix(xn.clone()), SlotValue::Matrix(bn.clone())])
            .map_err(|e| OverlayError::Solver(e.into()))?;
        if self.ctx.rate_hz(&xn, &bn) >= self.ctx.r2_hz {
            return Ok(start);
        }
        let bound = self
            .build_surrogate(&start)
            .map_err(|e| OverlayError::Solver(e.into()))?;
        interior(bound.program(), &start).map_err(|e| match e {
            InnerError::Infeasible => OverlayError::R2StarInfeasible,
            e => OverlayError::Solver(e.into()),
        })
    }
}

impl SurrogateModel for FullModel<'_, '_> {
    type Point = DVector<f64>;
    type Bound = LogDetFraction;

    fn objective(&self, coords: &DVector<f64>) -> f64 {
        let (x, b) = self.unpack(coords);
        self.ctx.ratio(&x, &b)
    }

    fn build_surrogate(&self, at: &DVector<f64>) -> Result<LogDetFraction, InnerError> {
        let ctx = self.ctx;
        let (x0, _) = self.unpack(at);
        let i = identity(ctx.p.n_r);
        let (zinv, ln_det) = inverse_ln_det(&hermitize(&(&i + &ctx.g * &x0 * ctx.g.adjoint())))
            .ok_or_else(|| {
                InnerError::NumericalFailure("relay covariance left the domain".into())
            })?;
        let m0 = hermitize(&(ctx.g.adjoint() * zinv * &ctx.g));
        let w = 0.5 * INV_LN2;
        let g = Loading::Congruence(ctx.g.clone());
        let rate = Expr::new()
            .log2_det(0.5, i, vec![(self.x, g.clone()), (self.b, g)])
            .re_trace(self.x, m0.scale(-w))
            .plus_constant(-0.5 * ln_det * INV_LN2 + w * crate::linalg::re_trace_product(&m0, &x0));
        let mut prog = self.shape.clone();
        if ctx.r2_hz > 0.0 {
            prog.add_constraint(rate.clone().plus_constant(-ctx.r2_hz));
        }
        let start = interior(&prog, at)?;
        Ok(
            LogDetFraction::new(prog, rate, ctx.denominator(Relay::Matrix(self.x), self.b))?
                .with_start(start),
        )
    }
}

struct Rank1Model<'c, 'a> {
    ctx: &'c Ctx<'a>,
    shape: LogDetProgram,
    a: SlotId,
    b: SlotId,
    /// `G u u^H G^H`.
    guu: CMat,
    /// `||G u||^2`.
    phi_n: f64,
}

impl<'c, 'a> Rank1Model<'c, 'a> {
    fn new(ctx: &'c Ctx<'a>) -> Self {
        let mut shape = LogDetProgram::new();
        let a = shape.add_scalar();
        let b = shape.add_matrix(ctx.n());
        ctx.add_constraints(&mut shape, Relay::Scalar(a), b);
        let gu = &ctx.g * &ctx.u;
        let guu = hermitize(&outer(&gu, &gu));
        Self {
            ctx,
            shape,
            a,
            b,
            guu,
            phi_n: norm_sqr(&gu),
        }
    }

    fn unpack(&self, coords: &DVector<f64>) -> (f64, CMat) {
        (
            self.shape.scalar_at(coords, self.a),
            self.shape.matrix_at(coords, self.b).into_matrix(),
        )
    }

    fn initial_point(&self) -> Result<DVector<f64>, OverlayError> {
        let rho = self.ctx.initial_share()?;
        let n = self.ctx.n();
        let bn = identity(n).scale((1.0 - rho) / n as f64);
        let start = self
            .shape
            .pack(&[SlotValue::Scalar(rho), SlotValue::Matrix(bn.clone())])
            .map_err(|e| OverlayError::Solver(e.into()))?;
        let xn = outer(&self.ctx.u, &self.ctx.u).scale(rho);
        if self.ctx.rate_hz(&xn, &bn) >= self.ctx.r2_hz {
            return Ok(start);
        }
        let bound = self
            .build_surrogate(&start)
            .map_err(|e| OverlayError::Solver(e.into()))?;
        interior(bound.program(), &start).map_err(|e| match e {
            InnerError::Infeasible => OverlayError::R2StarInfeasible,
            e => OverlayError::Solver(e.into()),
        })
    }
}

impl SurrogateModel for Rank1Model<'_, '_> {
    type Point = DVector<f64>;
    type Bound = LogDetFraction;

    fn objective(&self, coords: &DVector<f64>) -> f64 {
        let (a, b) = self.unpack(coords);
        let x = outer(&self.ctx.u, &self.ctx.u).scale(a);
        self.ctx.ratio(&x, &b)
    }

    fn build_surrogate(&self, at: &DVector<f64>) -> Result<LogDetFraction, InnerError> {
        let ctx = self.ctx;
        let (a0, _) = self.unpack(at);
        let phi = self.phi_n;
        let slope = 0.5 * INV_LN2 * phi / (1.0 + a0 * phi);
        let rate = Expr::new()
            .log2_det(
                0.5,
                identity(ctx.p.n_r),
                vec![
                    (self.a, Loading::Scaled(self.guu.clone())),
                    (self.b, Loading::Congruence(ctx.g.clone())),
                ],
            )
            .scalar(self.a, -slope)
            .plus_constant(-0.5 * (1.0 + a0 * phi).log2() + slope * a0);
        let mut prog = self.shape.clone();
        if ctx.r2_hz > 0.0 {
            prog.add_constraint(rate.clone().plus_constant(-ctx.r2_hz));
        }
        let start = interior(&prog, at)?;
        Ok(
            LogDetFraction::new(prog, rate, ctx.denominator(Relay::Scalar(self.a), self.b))?
                .with_start(start),
        )
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
            h11: CVec::from_vec(vec![c(0.3, 0.1), c(-0.2, 0.2)]),
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
            h21: CVec::from_vec(vec![c(1.1, 0.1), c(-0.6, 0.5)]),
            ht: CMat::from_row_slice(
                2,
                2,
                &[c(2.0, 0.1), c(0.4, -0.3), c(-0.5, 0.2), c(1.5, 0.6)],
            ),
        }
    }

    fn overlay_params(ch: &ChannelSet, frac: f64) -> SystemParams {
        let p = params();
        let cap = direct_capacity(&p, ch);
        let r_bar = max_primary_rate(&p, ch).unwrap().r_bar;
        SystemParams {
            r1_star: cap + frac * (r_bar - cap),
            ..p
        }
    }

    #[test]
    fn prop3_scale_from_power_equality() {
        let p = SystemParams {
            n_t1: 1,
            n_t2: 1,
            n_r: 1,
            alpha: 2.0,
            p2: 2.0,
            ..params()
        };
        let one = CVec::from_element(1, c(1.0, 0.0));
        let m = CMat::from_element(1, 1, c(1.0, 0.0));
        let ch = ChannelSet {
            h11: one.clone(),
            h22: m.clone(),
            h12: m.clone(),
            h21: one,
            ht: m,
        };
        let out = max_primary_rate(&p, &ch).unwrap();
        assert!((out.a_scale - 0.5).abs() < 1e-15);
    }

    #[test]
    fn deaf_relay_is_degenerate() {
        let mut ch = channels();
        ch.ht = CMat::zeros(2, 2);
        assert!(matches!(
            max_primary_rate(&params(), &ch),
            Err(OverlayError::DegenerateChannel(_))
        ));
    }

    #[test]
    fn feasibility_classes() {
        let ch = channels();
        assert_eq!(
            check_feasibility(&params(), &ch).unwrap(),
            Feasibility::UnderlayRegime
        );
        let r_bar = max_primary_rate(&params(), &ch).unwrap().r_bar;
        let at = SystemParams {
            r1_star: r_bar,
            ..params()
        };
        assert!(matches!(
            check_feasibility(&at, &ch).unwrap(),
            Feasibility::Feasible { .. }
        ));
        let over = SystemParams {
            r1_star: 2.0 * r_bar,
            ..params()
        };
        assert!(matches!(
            check_feasibility(&over, &ch).unwrap(),
            Feasibility::InfeasibleR1Star { .. }
        ));
    }

    #[test]
    fn constraint_is_tight_at_prop3_point() {
        let ch = channels();
        let r_bar = max_primary_rate(&params(), &ch).unwrap();
        let p = SystemParams {
            r1_star: r_bar.r_bar,
            ..params()
        };
        let k = OverlayConstants::new(&p, &ch).unwrap();
        let pc = optimal_v_constraint(&p, &ch, &k);
        let x = hermitize(&(&r_bar.a_star * k.m_mat.matrix() * r_bar.a_star.adjoint()));
        let slack = pc.slack(&x, &CMat::zeros(2, 2));
        assert!(slack.abs() <= 1e-9 * pc.rhs, "slack {slack}");
        assert!(pc.slack(&CMat::zeros(2, 2), &CMat::zeros(2, 2)) < 0.0);
    }

    #[test]
    fn recovered_relay_reproduces_x_and_the_constraint() {
        let ch = channels();
        let p = overlay_params(&ch, 0.5);
        let k = OverlayConstants::new(&p, &ch).unwrap();
        let pc = optimal_v_constraint(&p, &ch, &k);
        let x = HermitianPsd::new(CMat::from_row_slice(
            2,
            2,
            &[c(2.0, 0.0), c(0.3, 0.4), c(0.3, -0.4), c(1.0, 0.0)],
        ))
        .unwrap();
        let b = HermitianPsd::scaled_identity(2, 0.2);
        let a = relay_matrix_from_x(&p, &ch, &x);
        let back = hermitize(&(&a * k.m_mat.matrix() * a.adjoint()));
        assert!((back - x.matrix()).norm() < 1e-10);
        let (r1, _) = crate::model::overlay_rates(&p, &ch, &a, &b).unwrap();
        assert_eq!(pc.slack(x.matrix(), b.matrix()) >= 0.0, r1 >= p.r1_star);
    }

    #[test]
    fn both_algorithms_meet_the_primary_target() {
        let ch = channels();
        for frac in [0.2, 0.6, 0.9] {
            let p = overlay_params(&ch, frac);
            let full = solve_overlay_full(
                &p,
                &ch,
                Objective::EnergyEfficiency,
                &SurrogateOptions::default(),
            )
            .unwrap();
            let r1 = solve_overlay_rank1(
                &p,
                &ch,
                Objective::EnergyEfficiency,
                &SurrogateOptions::default(),
            )
            .unwrap();
            for s in [&full, &r1] {
                assert!(
                    s.r1 >= p.r1_star * (1.0 - 1e-7),
                    "{:?}: r1 {} < {}",
                    s.algorithm,
                    s.r1,
                    p.r1_star
                );
                assert!(s.tx_power <= p.p2 * (1.0 + 1e-9));
                assert!(s.trace.objectives.windows(2).all(|w| w[1] >= w[0]));
                assert!(s.iterations >= 1);
            }
            assert!(
                full.ee >= r1.ee * (1.0 - 1e-3),
                "full {} < rank-1 {}",
                full.ee,
                r1.ee
            );
        }
    }

    #[test]
    fn taylor_bound_touches_at_expansion_point() {
        let ch = channels();
        let p = params();
        let x0 = HermitianPsd::new(CMat::from_row_slice(
            2,
            2,
            &[c(1.0, 0.0), c(0.2, 0.1), c(0.2, -0.1), c(0.5, 0.0)],
        ))
        .unwrap();
        let b = CMat::identity(2, 2).scale(0.3);
        let bound = taylor_lower_bound(&x0, &p, &ch);
        let exact = secondary_rate_x(&p, &ch, x0.matrix(), &b);
        assert!((bound.value(x0.matrix(), &b) - exact).abs() < 1e-12);
        let g1 = bound.gradient_x(x0.matrix(), &b);
        let g2 = secondary_rate_gradient_x(&p, &ch, x0.matrix(), &b);
        assert!((g1 - g2).norm() < 1e-12);
    }
}
