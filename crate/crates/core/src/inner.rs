//! Log-det barrier solver for the concave subproblems behind every allocator.
//!
//! A [`LogDetProgram`] has Hermitian PSD matrix slots and nonnegative scalar
//! slots. The objective and every constraint are expressions of the form
//!
//! ```text
//!   sum_k w_k log2|S_k + sum_i L_ki(slot_i)| + linear(slots) + c
//! ```
//!
//! where each loading `L` is either a congruence `G K G^H` of a matrix slot or
//! a scaled constant `a C` of a scalar slot. Constraints read `expr >= 0` and
//! must describe a convex set; the objective must be concave. Nothing checks
//! this, the barrier just stops converging when it does not hold.
//!
//! Matrix slots are parameterized by the real vectorization of Hermitian
//! matrices (`n^2` coordinates), PSD is enforced with a `-log det(K + delta I)`
//! barrier, and each centering step is a damped Newton iteration with analytic
//! gradients and Hessians:
//!
//! ```text
//!   d/dx_a  log|A(x)| = Re tr(W D_a)
//!   d2/dx_a dx_b      = -Re tr(W D_a W D_b),   W = A(x)^-1
//! ```

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::InnerError;
use crate::linalg::{hermitize, identity, inverse_ln_det, CMat, CVec, HermitianPsd, C0};
use crate::model::INV_LN2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SlotId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SlotKind {
    Psd(usize),
    Scalar,
}

/// How a slot enters the argument of a log-det term.
#[derive(Debug, Clone)]
pub enum Loading {
    /// `G K G^H` for a matrix slot `K`.
    Congruence(CMat),
    /// `a C` for a scalar slot `a`; `C` must be Hermitian.
    Scaled(CMat),
}

#[derive(Debug, Clone)]
struct LogDetTerm {
    weight: f64,
    base: CMat,
    parts: Vec<(SlotId, Loading)>,
    /// `Some(q)`: the term is `log2(1 + q^H A^-1 q)` instead of `log2|A|`.
    shift: Option<CVec>,
}

#[derive(Debug, Clone)]
enum LinearCoef {
    /// `Re tr(C K)`, `C` Hermitian.
    Matrix(CMat),
    /// `c tr(K)`.
    Trace(f64),
    Scalar(f64),
}

/// A sum of weighted base-2 log-det terms, linear functionals and a constant.
#[derive(Debug, Clone, Default)]
pub struct Expr {
    logdets: Vec<LogDetTerm>,
    linear: Vec<(SlotId, LinearCoef)>,
    constant: f64,
}

impl Expr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            ..Self::default()
        }
    }

    /// Adds `weight * log2|base + sum parts|`. `base` must be positive definite.
    pub fn log2_det(mut self, weight: f64, base: CMat, parts: Vec<(SlotId, Loading)>) -> Self {
        self.logdets.push(LogDetTerm {
            weight,
            base: hermitize(&base),
            parts,
            shift: None,
        });
        self
    }

    /// Adds `weight * (log2|A + q q^H| - log2|A|)` with `A = base + sum parts`,
    /// evaluated as `weight * log2(1 + q^H A^-1 q)`. This stays accurate when
    /// `A` is badly conditioned, where the difference of two log-dets would not.
    pub fn log2_det_ratio(
        mut self,
        weight: f64,
        base: CMat,
        parts: Vec<(SlotId, Loading)>,
        q: &CVec,
    ) -> Self {
        self.logdets.push(LogDetTerm {
            weight,
            base: hermitize(&base),
            parts,
            shift: Some(q.clone()),
        });
        self
    }

    /// Adds `coef * tr(K)`.
    pub fn trace(mut self, slot: SlotId, coef: f64) -> Self {
        self.linear.push((slot, LinearCoef::Trace(coef)));
        self
    }

    /// Adds `Re tr(C K)` for Hermitian `C`.
    pub fn re_trace(mut self, slot: SlotId, c: CMat) -> Self {
        self.linear.push((slot, LinearCoef::Matrix(hermitize(&c))));
        self
    }

    /// Adds `coef * v^H K v`.
    pub fn quad(self, slot: SlotId, v: &CVec, coef: f64) -> Self {
        let c = (v * v.adjoint()).scale(coef);
        self.re_trace(slot, c)
    }

    /// Adds `coef * a` for a scalar slot.
    pub fn scalar(mut self, slot: SlotId, coef: f64) -> Self {
        self.linear.push((slot, LinearCoef::Scalar(coef)));
        self
    }

    pub fn plus_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    /// `self + other`.
    pub fn plus(mut self, other: &Expr) -> Self {
        self.logdets.extend(other.logdets.iter().cloned());
        self.linear.extend(other.linear.iter().cloned());
        self.constant += other.constant;
        self
    }

    /// `s * self`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut e = self.clone();
        for t in &mut e.logdets {
            t.weight *= s;
        }
        for (_, c) in &mut e.linear {
            match c {
                LinearCoef::Matrix(m) => *m = m.scale(s),
                LinearCoef::Trace(v) | LinearCoef::Scalar(v) => *v *= s,
            }
        }
        e.constant *= s;
        e
    }

    pub fn is_affine(&self) -> bool {
        self.logdets.is_empty()
    }
}

/// Concave maximization over PSD matrix slots and nonnegative scalars.
#[derive(Debug, Clone, Default)]
pub struct LogDetProgram {
    slots: Vec<SlotKind>,
    objective: Expr,
    constraints: Vec<Expr>,
}

/// Value of one slot, used to build start points and evaluate expressions.
#[derive(Debug, Clone)]
pub enum SlotValue {
    Matrix(CMat),
    Scalar(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Stop when the barrier gap bound `m/t` is below `tol * (1 + |value|)`.
    pub tol: f64,
    /// Barrier parameter growth per centering.
    pub mu: f64,
    /// PSD barrier regularizer.
    pub delta: f64,
    pub max_newton_per_centering: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            mu: 10.0,
            delta: 1e-12,
            max_newton_per_centering: 200,
        }
    }
}

/// Output of [`solve`].
#[derive(Debug, Clone)]
pub struct Solution {
    coords: DVector<f64>,
    layout: Vec<(SlotKind, usize)>,
    /// Objective at the returned (projected) point.
    pub value: f64,
    /// Certified bound on suboptimality from the barrier duality gap.
    pub gap: f64,
    pub newton_steps: usize,
    /// Largest negative eigenvalue magnitude removed by the final projection.
    pub clipped: f64,
}

impl Solution {
    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn matrix(&self, slot: SlotId) -> HermitianPsd {
        matrix_in(&self.layout, &self.coords, slot)
    }

    pub fn scalar(&self, slot: SlotId) -> f64 {
        scalar_in(&self.layout, &self.coords, slot)
    }

    /// Upper bound on the optimal value.
    pub fn upper_bound(&self) -> f64 {
        self.value + self.gap
    }
}

fn matrix_in(layout: &[(SlotKind, usize)], coords: &DVector<f64>, slot: SlotId) -> HermitianPsd {
    match layout[slot.0] {
        (SlotKind::Psd(d), off) => HermitianPsd::project(&unpack_hermitian(coords, off, d)).0,
        (SlotKind::Scalar, _) => panic!("slot {} is a scalar", slot.0),
    }
}

fn scalar_in(layout: &[(SlotKind, usize)], coords: &DVector<f64>, slot: SlotId) -> f64 {
    match layout[slot.0] {
        (SlotKind::Scalar, off) => coords[off].max(0.0),
        (SlotKind::Psd(_), _) => panic!("slot {} is a matrix", slot.0),
    }
}

impl LogDetProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Value of a matrix slot at `coords`, projected onto the PSD cone.
    pub fn matrix_at(&self, coords: &DVector<f64>, slot: SlotId) -> HermitianPsd {
        matrix_in(&self.layout(), coords, slot)
    }

    /// Value of a scalar slot at `coords`, clipped at zero.
    pub fn scalar_at(&self, coords: &DVector<f64>, slot: SlotId) -> f64 {
        scalar_in(&self.layout(), coords, slot)
    }

    pub fn add_matrix(&mut self, dim: usize) -> SlotId {
        self.slots.push(SlotKind::Psd(dim));
        SlotId(self.slots.len() - 1)
    }

    pub fn add_scalar(&mut self) -> SlotId {
        self.slots.push(SlotKind::Scalar);
        SlotId(self.slots.len() - 1)
    }

    pub fn set_objective(&mut self, e: Expr) {
        self.objective = e;
    }

    pub fn objective(&self) -> &Expr {
        &self.objective
    }

    /// Adds the constraint `e >= 0`.
    pub fn add_constraint(&mut self, e: Expr) {
        self.constraints.push(e);
    }

    pub fn num_coords(&self) -> usize {
        self.layout()
            .last()
            .map_or(0, |(k, off)| off + slot_len(*k))
    }

    fn layout(&self) -> Vec<(SlotKind, usize)> {
        let mut off = 0;
        self.slots
            .iter()
            .map(|&k| {
                let here = off;
                off += slot_len(k);
                (k, here)
            })
            .collect()
    }

    /// Coordinates of the given slot values, in slot order.
    pub fn pack(&self, values: &[SlotValue]) -> Result<DVector<f64>, InnerError> {
        if values.len() != self.slots.len() {
            return Err(InnerError::Malformed(format!(
                "{} slot values for {} slots",
                values.len(),
                self.slots.len()
            )));
        }
        let mut x = DVector::zeros(self.num_coords());
        for ((kind, off), v) in self.layout().into_iter().zip(values) {
            match (kind, v) {
                (SlotKind::Psd(d), SlotValue::Matrix(m)) if m.nrows() == d && m.ncols() == d => {
                    pack_hermitian(m, &mut x, off);
                }
                (SlotKind::Scalar, SlotValue::Scalar(a)) => x[off] = *a,
                _ => {
                    return Err(InnerError::Malformed(
                        "slot value does not match slot kind".into(),
                    ))
                }
            }
        }
        Ok(x)
    }

    /// Evaluates an expression at `coords`; `None` outside the log-det domain.
    pub fn evaluate(&self, e: &Expr, coords: &DVector<f64>) -> Option<f64> {
        let c = self.compile_expr(e, 0).ok()?;
        c.value(coords)
    }

    pub fn objective_value(&self, coords: &DVector<f64>) -> Option<f64> {
        self.evaluate(&self.objective, coords)
    }

    /// Smallest constraint value at `coords` (including scalar nonnegativity).
    pub fn min_constraint(&self, coords: &DVector<f64>) -> Option<f64> {
        let compiled = self.compile(SolverOptions::default().delta).ok()?;
        compiled
            .constraints
            .iter()
            .map(|c| c.value(coords))
            .try_fold(f64::INFINITY, |m, v| v.map(|v| m.min(v)))
    }

    fn compile_expr(&self, e: &Expr, extra: usize) -> Result<CompiledExpr, InnerError> {
        let layout = self.layout();
        let n = self.num_coords() + extra;
        let mut lin = DVector::zeros(n);
        for (slot, coef) in &e.linear {
            let (kind, off) = *layout
                .get(slot.0)
                .ok_or_else(|| InnerError::Malformed(format!("unknown slot {}", slot.0)))?;
            match (kind, coef) {
                (SlotKind::Psd(d), LinearCoef::Trace(v)) => {
                    for k in 0..d {
                        lin[off + k] += v;
                    }
                }
                (SlotKind::Psd(d), LinearCoef::Matrix(c)) => {
                    if c.nrows() != d || c.ncols() != d {
                        return Err(InnerError::Malformed(
                            "linear coefficient has wrong size".into(),
                        ));
                    }
                    for (a, (i, j, part)) in basis(d).enumerate() {
                        lin[off + a] += match part {
                            Part::Diag => c[(i, i)].re,
                            Part::Re => c[(i, j)].re + c[(j, i)].re,
                            Part::Im => c[(i, j)].im - c[(j, i)].im,
                        };
                    }
                }
                (SlotKind::Scalar, LinearCoef::Scalar(v)) => lin[off] += v,
                (SlotKind::Scalar, LinearCoef::Trace(v)) => lin[off] += v,
                _ => {
                    return Err(InnerError::Malformed(
                        "linear term does not match slot kind".into(),
                    ))
                }
            }
        }
        let mut logdets = Vec::with_capacity(e.logdets.len());
        for t in &e.logdets {
            let m = t.base.nrows();
            let mut dirs: Vec<(usize, CMat)> = Vec::new();
            for (slot, loading) in &t.parts {
                let (kind, off) = *layout
                    .get(slot.0)
                    .ok_or_else(|| InnerError::Malformed(format!("unknown slot {}", slot.0)))?;
                match (kind, loading) {
                    (SlotKind::Psd(d), Loading::Congruence(g)) => {
                        if g.nrows() != m || g.ncols() != d {
                            return Err(InnerError::Malformed(format!(
                                "loading is {}x{}, expected {m}x{d}",
                                g.nrows(),
                                g.ncols()
                            )));
                        }
                        for (a, (i, j, part)) in basis(d).enumerate() {
                            let gi = g.column(i);
                            let gj = g.column(j);
                            let dir = match part {
                                Part::Diag => gi * gi.adjoint(),
                                Part::Re => gi * gj.adjoint() + gj * gi.adjoint(),
                                Part::Im => (gi * gj.adjoint() - gj * gi.adjoint())
                                    .map(|z| z * Complex64::i()),
                            };
                            push_dir(&mut dirs, off + a, dir);
                        }
                    }
                    (SlotKind::Scalar, Loading::Scaled(c)) => {
                        if c.nrows() != m || c.ncols() != m {
                            return Err(InnerError::Malformed(
                                "scaled loading has wrong size".into(),
                            ));
                        }
                        push_dir(&mut dirs, off, hermitize(c));
                    }
                    _ => {
                        return Err(InnerError::Malformed(
                            "loading does not match slot kind".into(),
                        ))
                    }
                }
            }
            if let Some(q) = &t.shift {
                if q.nrows() != m {
                    return Err(InnerError::Malformed(
                        "ratio vector has the wrong length".into(),
                    ));
                }
            }
            logdets.push(CompiledLogDet {
                weight: t.weight * INV_LN2,
                arg: AffineHerm {
                    base: t.base.clone(),
                    dirs,
                },
                shift: t.shift.clone(),
            });
        }
        Ok(CompiledExpr {
            logdets,
            lin,
            constant: e.constant,
        })
    }

    fn compile(&self, delta: f64) -> Result<Compiled, InnerError> {
        let n = self.num_coords();
        let objective = self.compile_expr(&self.objective, 0)?;
        let mut constraints = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            constraints.push(self.compile_expr(c, 0)?);
        }
        let mut cones = Vec::new();
        for (kind, off) in self.layout() {
            match kind {
                SlotKind::Psd(d) => {
                    let mut dirs = Vec::with_capacity(d * d);
                    for (a, (i, j, part)) in basis(d).enumerate() {
                        let mut e = CMat::zeros(d, d);
                        match part {
                            Part::Diag => e[(i, i)] = Complex64::new(1.0, 0.0),
                            Part::Re => {
                                e[(i, j)] = Complex64::new(1.0, 0.0);
                                e[(j, i)] = Complex64::new(1.0, 0.0);
                            }
                            Part::Im => {
                                e[(i, j)] = Complex64::new(0.0, 1.0);
                                e[(j, i)] = Complex64::new(0.0, -1.0);
                            }
                        }
                        dirs.push((off + a, e));
                    }
                    cones.push(AffineHerm {
                        base: identity(d).scale(delta),
                        dirs,
                    });
                }
                SlotKind::Scalar => {
                    let mut lin = DVector::zeros(n);
                    lin[off] = 1.0;
                    constraints.push(CompiledExpr {
                        logdets: Vec::new(),
                        lin,
                        constant: 0.0,
                    });
                }
            }
        }
        Ok(Compiled {
            n,
            objective,
            constraints,
            cones,
        })
    }
}

fn slot_len(k: SlotKind) -> usize {
    match k {
        SlotKind::Psd(d) => d * d,
        SlotKind::Scalar => 1,
    }
}

#[derive(Clone, Copy)]
enum Part {
    Diag,
    Re,
    Im,
}

/// Coordinate order: diagonal first, then `(re, im)` of each upper entry.
fn basis(d: usize) -> impl Iterator<Item = (usize, usize, Part)> {
    let diag = (0..d).map(|i| (i, i, Part::Diag));
    let off = (0..d)
        .flat_map(move |i| ((i + 1)..d).flat_map(move |j| [(i, j, Part::Re), (i, j, Part::Im)]));
    diag.chain(off)
}

fn pack_hermitian(m: &CMat, x: &mut DVector<f64>, off: usize) {
    let d = m.nrows();
    let h = hermitize(m);
    for (a, (i, j, part)) in basis(d).enumerate() {
        x[off + a] = match part {
            Part::Diag => h[(i, i)].re,
            Part::Re => h[(i, j)].re,
            Part::Im => h[(i, j)].im,
        };
    }
}

fn unpack_hermitian(x: &DVector<f64>, off: usize, d: usize) -> CMat {
    let mut m = CMat::zeros(d, d);
    for (a, (i, j, part)) in basis(d).enumerate() {
        let v = x[off + a];
        match part {
            Part::Diag => m[(i, i)] = Complex64::new(v, 0.0),
            Part::Re => {
                m[(i, j)].re = v;
                m[(j, i)].re = v;
            }
            Part::Im => {
                m[(i, j)].im = v;
                m[(j, i)].im = -v;
            }
        }
    }
    m
}

fn push_dir(dirs: &mut Vec<(usize, CMat)>, coord: usize, d: CMat) {
    if d.iter().all(|z| *z == C0) {
        return;
    }
    if let Some(existing) = dirs.iter_mut().find(|(c, _)| *c == coord) {
        existing.1 += d;
    } else {
        dirs.push((coord, d));
    }
}

/// `base + sum_a x_a D_a`.
#[derive(Debug, Clone)]
struct AffineHerm {
    base: CMat,
    dirs: Vec<(usize, CMat)>,
}

impl AffineHerm {
    fn at(&self, x: &DVector<f64>) -> CMat {
        let mut m = self.base.clone();
        for (a, d) in &self.dirs {
            let xa = x[*a];
            if xa != 0.0 {
                m += d.scale(xa);
            }
        }
        m
    }
}

#[derive(Debug, Clone)]
struct CompiledExpr {
    /// Weights already converted to natural-log units.
    logdets: Vec<CompiledLogDet>,
    lin: DVector<f64>,
    constant: f64,
}

struct Derivs {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

impl CompiledExpr {
    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        let mut v = self.constant + self.lin.dot(x);
        for t in &self.logdets {
            let (inv, ld) = inverse_ln_det(&t.arg.at(x))?;
            v += t.weight
                * match &t.shift {
                    None => ld,
                    Some(q) => quad_inv(&inv, q).ln_1p(),
                };
        }
        Some(v)
    }

    fn derivs(&self, x: &DVector<f64>) -> Option<Derivs> {
        let n = x.len();
        let mut value = self.constant + self.lin.dot(x);
        let mut grad = self.lin.clone();
        let mut hess = DMatrix::zeros(n, n);
        for t in &self.logdets {
            let (inv, ld) = inverse_ln_det(&t.arg.at(x))?;
            match &t.shift {
                None => {
                    value += t.weight * ld;
                    accumulate_log_det(&inv, &t.arg.dirs, t.weight, &mut grad, &mut hess);
                }
                Some(q) => {
                    value += t.weight
                        * accumulate_log_ratio(&inv, q, &t.arg.dirs, t.weight, &mut grad, &mut hess)
                }
            }
        }
        Some(Derivs { value, grad, hess })
    }
}

#[derive(Debug, Clone)]
struct CompiledLogDet {
    /// Natural-log units.
    weight: f64,
    arg: AffineHerm,
    shift: Option<CVec>,
}

fn quad_inv(inv: &CMat, q: &CVec) -> f64 {
    (q.adjoint() * inv * q)[(0, 0)].re.max(0.0)
}

/// Adds derivatives of `w ln(1 + phi)`, `phi = q^H A^-1 q`, and returns `ln(1 + phi)`.
///
/// With `u = A^-1 q` and `v_a = D_a u`:
/// `d phi/dx_a = -Re u^H v_a`, `d2 phi/dx_a dx_b = 2 Re v_a^H A^-1 v_b`.
fn accumulate_log_ratio(
    inv: &CMat,
    q: &CVec,
    dirs: &[(usize, CMat)],
    w: f64,
    grad: &mut DVector<f64>,
    hess: &mut DMatrix<f64>,
) -> f64 {
    let u = inv * q;
    let phi = q.dotc(&u).re.max(0.0);
    let one = 1.0 + phi;
    let vs: Vec<CVec> = dirs.iter().map(|(_, d)| d * &u).collect();
    let ws: Vec<CVec> = vs.iter().map(|v| inv * v).collect();
    let d1: Vec<f64> = vs.iter().map(|v| -u.dotc(v).re).collect();
    for (p, (a, _)) in dirs.iter().enumerate() {
        grad[*a] += w * d1[p] / one;
        for (r, (b, _)) in dirs.iter().enumerate().skip(p) {
            let d2 = 2.0 * vs[p].dotc(&ws[r]).re;
            let h = w * (d2 / one - d1[p] * d1[r] / (one * one));
            hess[(*a, *b)] += h;
            if r != p {
                hess[(*b, *a)] += h;
            }
        }
    }
    one.ln()
}

fn accumulate_log_det(
    inv: &CMat,
    dirs: &[(usize, CMat)],
    w: f64,
    grad: &mut DVector<f64>,
    hess: &mut DMatrix<f64>,
) {
    let prods: Vec<CMat> = dirs.iter().map(|(_, d)| inv * d).collect();
    for (p, (a, pa)) in dirs.iter().zip(&prods).enumerate() {
        let a = a.0;
        grad[a] += w * pa.trace().re;
        for (q, (b, pb)) in dirs.iter().zip(&prods).enumerate().skip(p) {
            let h = -w * crate::linalg::re_trace_product(pa, pb);
            hess[(a, b.0)] += h;
            if q != p {
                hess[(b.0, a)] += h;
            }
        }
    }
}

struct Compiled {
    n: usize,
    objective: CompiledExpr,
    /// `c_i(x) >= 0`.
    constraints: Vec<CompiledExpr>,
    /// `A_j(x) >= 0` in the PSD order.
    cones: Vec<AffineHerm>,
}

impl Compiled {
    fn barrier_weight(&self) -> f64 {
        (self.constraints.len() + self.cones.iter().map(|c| c.base.nrows()).sum::<usize>()) as f64
    }

    /// `-t f0(x) - sum log c_i(x) - sum log det A_j(x)`; `None` outside the domain.
    fn phi(&self, x: &DVector<f64>, t: f64) -> Option<f64> {
        let mut v = -t * self.objective.value(x)?;
        for c in &self.constraints {
            let ci = c.value(x)?;
            if ci.is_nan() || ci <= 0.0 {
                return None;
            }
            v -= ci.ln();
        }
        for a in &self.cones {
            let (_, ld) = inverse_ln_det(&a.at(x))?;
            v -= ld;
        }
        v.is_finite().then_some(v)
    }

    fn phi_derivs(&self, x: &DVector<f64>, t: f64) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let f0 = self.objective.derivs(x)?;
        let mut v = -t * f0.value;
        let mut g = -f0.grad * t;
        let mut h = -f0.hess * t;
        for c in &self.constraints {
            let d = c.derivs(x)?;
            if d.value.is_nan() || d.value <= 0.0 {
                return None;
            }
            v -= d.value.ln();
            g -= &d.grad / d.value;
            h -= &d.hess / d.value;
            h += (&d.grad * d.grad.transpose()) / (d.value * d.value);
        }
        for a in &self.cones {
            let (inv, ld) = inverse_ln_det(&a.at(x))?;
            v -= ld;
            let mut cg = DVector::zeros(self.n);
            let mut ch = DMatrix::zeros(self.n, self.n);
            accumulate_log_det(&inv, &a.dirs, 1.0, &mut cg, &mut ch);
            g -= cg;
            h -= ch;
        }
        Some((v, g, h))
    }

    fn strictly_feasible(&self, x: &DVector<f64>) -> bool {
        self.constraints
            .iter()
            .all(|c| c.value(x).is_some_and(|v| v > 0.0))
            && self
                .cones
                .iter()
                .all(|a| inverse_ln_det(&a.at(x)).is_some())
            && self.objective.value(x).is_some()
    }
}

/// Newton direction for `(H + damping D) dx = -g` with `D = diag(H)`, solved
/// in Jacobi-scaled form and regularized further if `H` is not positive definite.
fn newton_step(g: &DVector<f64>, h: &DMatrix<f64>, damping: f64) -> Option<DVector<f64>> {
    let n = g.len();
    let d: Vec<f64> = (0..n)
        .map(|i| {
            let v = h[(i, i)].abs();
            if v > 0.0 && v.is_finite() {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut sym = DMatrix::from_fn(n, n, |i, j| 0.5 * (h[(i, j)] + h[(j, i)]) / (d[i] * d[j]));
    let rhs = DVector::from_fn(n, |i, _| -g[i] / d[i]);
    for i in 0..n {
        sym[(i, i)] += damping;
    }
    let mut reg = 0.0;
    for _ in 0..30 {
        let mut m = sym.clone();
        for i in 0..n {
            m[(i, i)] += reg;
        }
        if let Some(ch) = m.cholesky() {
            let y = ch.solve(&rhs);
            if y.iter().all(|v| v.is_finite()) {
                return Some(DVector::from_fn(n, |i, _| y[i] / d[i]));
            }
        }
        reg = if reg == 0.0 { 1e-14 } else { reg * 10.0 };
    }
    None
}

/// Backtracking along `dx`; returns the accepted point.
fn line_search(
    prog: &Compiled,
    x: &DVector<f64>,
    v: f64,
    slope: f64,
    dx: &DVector<f64>,
    t: f64,
) -> Option<DVector<f64>> {
    let mut s = 1.0;
    while s > 1e-16 {
        let trial = x + dx * s;
        if let Some(vt) = prog.phi(&trial, t) {
            if vt < v && vt <= v + 0.25 * s * slope {
                return Some(trial);
            }
        }
        s *= 0.5;
    }
    // Values at the rounding floor: certify descent by the directional derivative instead.
    let mut s = 1.0;
    while s > 1e-16 {
        let trial = x + dx * s;
        if let Some((_, gt, _)) = prog.phi_derivs(&trial, t) {
            if gt.dot(dx) < 0.0 {
                return Some(trial);
            }
        }
        s *= 0.5;
    }
    None
}

/// Minimizes `phi(., t)` from a strictly feasible `x`. Returns Newton steps used.
fn center(
    prog: &Compiled,
    x: &mut DVector<f64>,
    t: f64,
    opts: &SolverOptions,
) -> Result<usize, InnerError> {
    const NEWTON_TOL: f64 = 1e-10;
    for it in 0..opts.max_newton_per_centering {
        let (v, g, h) = prog.phi_derivs(x, t).ok_or_else(|| {
            InnerError::NumericalFailure("iterate left the barrier domain".into())
        })?;
        let dx = newton_step(&g, &h, 0.0)
            .ok_or_else(|| InnerError::NumericalFailure("singular Newton system".into()))?;
        let slope = g.dot(&dx);
        let decrement = -slope;
        if decrement / 2.0 <= NEWTON_TOL {
            return Ok(it);
        }
        let mut next = if slope < 0.0 {
            line_search(prog, x, v, slope, &dx, t)
        } else {
            None
        };
        let mut damping = 1e-8;
        while next.is_none() && damping <= 1e8 {
            if let Some(dd) = newton_step(&g, &h, damping) {
                let sl = g.dot(&dd);
                if sl < 0.0 {
                    next = line_search(prog, x, v, sl, &dd, t);
                }
            }
            damping *= 100.0;
        }
        match next {
            Some(p) => *x = p,
            None => {
                // Rounding floor of phi: accept a nearly centered point.
                if decrement / 2.0 <= 1e-6 * (1.0 + v.abs()) {
                    return Ok(it);
                }
                return Err(InnerError::NumericalFailure(format!(
                    "line search stalled (Newton decrement {decrement:e})"
                )));
            }
        }
    }
    Ok(opts.max_newton_per_centering)
}

struct BarrierRun {
    x: DVector<f64>,
    gap: f64,
    steps: usize,
}

/// Path-following from a strictly feasible point. `early_stop` is checked after each centering.
fn barrier(
    prog: &Compiled,
    mut x: DVector<f64>,
    opts: &SolverOptions,
    early_stop: impl Fn(&DVector<f64>) -> bool,
) -> Result<BarrierRun, InnerError> {
    let m = prog.barrier_weight().max(1.0);
    let f0 = prog.objective.value(&x).unwrap_or(0.0);
    let mut t = (m / (1.0 + f0.abs())).max(1e-3);
    let mut steps = 0;
    for _ in 0..200 {
        steps += center(prog, &mut x, t, opts)?;
        let gap = m / t;
        if early_stop(&x) {
            return Ok(BarrierRun { x, gap, steps });
        }
        let f = prog.objective.value(&x).unwrap_or(0.0);
        if gap <= opts.tol * (1.0 + f.abs()) {
            return Ok(BarrierRun { x, gap, steps });
        }
        t *= opts.mu;
    }
    Err(InnerError::NumericalFailure(
        "barrier path did not converge".into(),
    ))
}

/// Margin a phase-I point must clear to count as strictly feasible.
const PHASE1_MARGIN: f64 = 1e-9;

fn phase_one(
    prog: &Compiled,
    hint: &DVector<f64>,
    opts: &SolverOptions,
) -> Result<DVector<f64>, InnerError> {
    if prog.strictly_feasible(hint)
        && prog
            .constraints
            .iter()
            .all(|c| c.value(hint).unwrap_or(0.0) > PHASE1_MARGIN)
        && prog
            .cones
            .iter()
            .all(|a| crate::linalg::min_eigenvalue(&a.at(hint)) > a.base[(0, 0)].re + PHASE1_MARGIN)
    {
        return Ok(hint.clone());
    }
    let n = prog.n;
    let s_idx = n;
    let widen = |lin: &DVector<f64>, s_coef: f64| {
        let mut l = DVector::zeros(n + 1);
        l.rows_mut(0, n).copy_from(lin);
        l[s_idx] = s_coef;
        l
    };
    let mut constraints: Vec<CompiledExpr> = prog
        .constraints
        .iter()
        .map(|c| CompiledExpr {
            logdets: c.logdets.clone(),
            lin: widen(&c.lin, -1.0),
            constant: c.constant,
        })
        .collect();
    // Keeps the auxiliary problem bounded.
    let mut cap = DVector::zeros(n + 1);
    cap[s_idx] = -1.0;
    constraints.push(CompiledExpr {
        logdets: Vec::new(),
        lin: cap,
        constant: 1.0,
    });
    // Cones strictly satisfied at the hint are kept exact.
    let relax_cones = !prog
        .cones
        .iter()
        .all(|a| crate::linalg::min_eigenvalue(&a.at(hint)) > 0.0);
    let cones = prog
        .cones
        .iter()
        .map(|a| {
            let d = a.base.nrows();
            let mut dirs = a.dirs.clone();
            if relax_cones {
                dirs.push((s_idx, -identity(d)));
            }
            AffineHerm {
                base: a.base.clone(),
                dirs,
            }
        })
        .collect();
    let mut obj = DVector::zeros(n + 1);
    obj[s_idx] = 1.0;
    let aux = Compiled {
        n: n + 1,
        objective: CompiledExpr {
            logdets: Vec::new(),
            lin: obj,
            constant: 0.0,
        },
        constraints,
        cones,
    };

    let mut start = DVector::zeros(n + 1);
    start.rows_mut(0, n).copy_from(hint);
    let mut lowest: f64 = 0.0;
    for c in &prog.constraints {
        lowest = lowest.min(c.value(hint).ok_or_else(|| {
            InnerError::Malformed("start point outside the log-det domain".into())
        })?);
    }
    if relax_cones {
        for a in &prog.cones {
            lowest = lowest.min(crate::linalg::min_eigenvalue(&a.at(hint)));
        }
    }
    start[s_idx] = lowest - 1.0;

    let run = barrier(&aux, start, &SolverOptions { tol: 1e-9, ..*opts }, |x| {
        x[s_idx] > PHASE1_MARGIN
    })?;
    if run.x[s_idx] > PHASE1_MARGIN {
        Ok(run.x.rows(0, n).into_owned())
    } else {
        Err(InnerError::Infeasible)
    }
}

/// Finds a strictly feasible point, starting the search from `hint` (zeros if `None`).
pub fn find_feasible(
    prog: &LogDetProgram,
    hint: Option<&DVector<f64>>,
) -> Result<DVector<f64>, InnerError> {
    let opts = SolverOptions::default();
    let compiled = prog.compile(opts.delta)?;
    let zero = DVector::zeros(compiled.n);
    let hint = hint.unwrap_or(&zero);
    if hint.len() != compiled.n {
        return Err(InnerError::Malformed("hint has the wrong length".into()));
    }
    phase_one(&compiled, hint, &opts)
}

/// Maximizes the program objective.
pub fn solve(prog: &LogDetProgram, opts: &SolverOptions) -> Result<Solution, InnerError> {
    solve_from(prog, None, opts)
}

/// Maximizes the program objective, starting from `start` when it is strictly feasible.
///
/// When the feasible set has no interior but the origin is feasible (e.g. a
/// zero power budget), the origin is returned.
pub fn solve_from(
    prog: &LogDetProgram,
    start: Option<&DVector<f64>>,
    opts: &SolverOptions,
) -> Result<Solution, InnerError> {
    let compiled = prog.compile(opts.delta)?;
    let layout = prog.layout();
    let n = compiled.n;
    let zero = DVector::zeros(n);
    if n == 0 {
        return finish_degenerate(prog, &compiled, layout, zero);
    }
    let hint = match start {
        Some(s) if s.len() == n && compiled.constraints.iter().all(|c| c.value(s).is_some()) => {
            s.clone()
        }
        _ => zero.clone(),
    };
    let x0 = if compiled.strictly_feasible(&hint) {
        hint
    } else {
        match phase_one(&compiled, &hint, opts) {
            Ok(x) => x,
            Err(InnerError::Infeasible) => return finish_degenerate(prog, &compiled, layout, zero),
            Err(e) => return Err(e),
        }
    };
    let run = barrier(&compiled, x0, opts, |_| false)?;
    finish(prog, layout, run)
}

fn finish_degenerate(
    prog: &LogDetProgram,
    compiled: &Compiled,
    layout: Vec<(SlotKind, usize)>,
    zero: DVector<f64>,
) -> Result<Solution, InnerError> {
    let feasible = compiled
        .constraints
        .iter()
        .all(|c| c.value(&zero).is_some_and(|v| v >= -1e-12));
    if !feasible {
        return Err(InnerError::Infeasible);
    }
    let value = prog.objective_value(&zero).ok_or(InnerError::Infeasible)?;
    Ok(Solution {
        coords: zero,
        layout,
        value,
        gap: 0.0,
        newton_steps: 0,
        clipped: 0.0,
    })
}

fn finish(
    prog: &LogDetProgram,
    layout: Vec<(SlotKind, usize)>,
    run: BarrierRun,
) -> Result<Solution, InnerError> {
    let mut x = run.x;
    let mut clipped: f64 = 0.0;
    for (kind, off) in &layout {
        match *kind {
            SlotKind::Psd(d) => {
                let m = unpack_hermitian(&x, *off, d);
                let (p, c) = HermitianPsd::project(&m);
                clipped = clipped.max(c);
                pack_hermitian(p.matrix(), &mut x, *off);
            }
            SlotKind::Scalar => {
                clipped = clipped.max(-x[*off].min(0.0));
                x[*off] = x[*off].max(0.0);
            }
        }
    }
    let value = prog
        .objective_value(&x)
        .ok_or_else(|| InnerError::NumericalFailure("projected point left the domain".into()))?;
    Ok(Solution {
        coords: x,
        layout,
        value,
        gap: run.gap,
        newton_steps: run.steps,
        clipped,
    })
}
