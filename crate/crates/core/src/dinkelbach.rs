//! Dinkelbach's method for concave-convex fractional programs and the
//! sequential loop that maximizes a chain of fractional minorizers.
//!
//! [`dinkelbach_solve`] finds the zero of `F(lambda) = max_x f(x) - lambda g(x)`
//! by the Newton-type update `lambda <- f(x)/g(x)`. [`surrogate_loop`] repeatedly
//! builds a fractional lower bound of a nonconcave ratio around the current
//! point and moves to its maximizer, which can never lower the true objective
//! when the bound is tight at the expansion point.

use std::sync::OnceLock;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{DinkelbachError, InnerError};
use crate::inner::{self, Expr, LogDetProgram, SolverOptions};

/// `max f(x)/g(x)` over a convex set, with `f` concave and nonnegative and `g`
/// convex and positive.
pub trait FractionalProblem {
    type Point: Clone;

    fn numerator(&self, x: &Self::Point) -> f64;

    fn denominator(&self, x: &Self::Point) -> f64;

    /// Maximizer of `f - lambda g` and the attained value `F(lambda)`.
    fn maximize_parametric(
        &self,
        lambda: f64,
        warm: Option<&Self::Point>,
    ) -> Result<(Self::Point, f64), InnerError>;

    fn ratio(&self, x: &Self::Point) -> f64 {
        self.numerator(x) / self.denominator(x)
    }
}

impl<P: Clone> FractionalProblem for Box<dyn FractionalProblem<Point = P> + Send + Sync> {
    type Point = P;

    fn numerator(&self, x: &P) -> f64 {
        (**self).numerator(x)
    }

    fn denominator(&self, x: &P) -> f64 {
        (**self).denominator(x)
    }

    fn maximize_parametric(&self, lambda: f64, warm: Option<&P>) -> Result<(P, f64), InnerError> {
        (**self).maximize_parametric(lambda, warm)
    }
}

/// Per-iteration record of a fractional or sequential solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FractionalTrace {
    pub lambdas: Vec<f64>,
    pub f_values: Vec<f64>,
    pub objectives: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DinkelbachOptions {
    /// Stop once `F(lambda) <= eps`.
    pub eps: f64,
    pub max_iter: usize,
}

impl Default for DinkelbachOptions {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DinkelbachOutcome<P> {
    pub point: P,
    /// `f(point) / g(point)`.
    pub lambda: f64,
    /// Number of parametric subproblems solved.
    pub iterations: usize,
    pub trace: FractionalTrace,
}

/// Runs the Dinkelbach iteration from `lambda0`, which must satisfy `F(lambda0) >= 0`.
pub fn dinkelbach_solve<Q: FractionalProblem>(
    prob: &Q,
    lambda0: f64,
    opts: &DinkelbachOptions,
) -> Result<DinkelbachOutcome<Q::Point>, DinkelbachError> {
    let mut lambda = lambda0;
    let mut trace = FractionalTrace::default();
    let mut warm: Option<Q::Point> = None;
    for it in 1..=opts.max_iter {
        let (x, f_val) = prob.maximize_parametric(lambda, warm.as_ref())?;
        let next = prob.ratio(&x);
        trace.lambdas.push(lambda);
        trace.f_values.push(f_val);
        trace.objectives.push(next);
        log::trace!("dinkelbach it={it} lambda={lambda:.12e} F={f_val:.3e} ratio={next:.12e}");
        if f_val <= opts.eps || next <= lambda {
            let (point, lambda) = match warm {
                // Rounding made the last step worse than the previous point.
                Some(prev) if next < lambda => {
                    let r = prob.ratio(&prev);
                    (prev, r)
                }
                _ => (x, next),
            };
            return Ok(DinkelbachOutcome {
                point,
                lambda,
                iterations: it,
                trace,
            });
        }
        lambda = next;
        warm = Some(x);
    }
    Err(DinkelbachError::MaxIterExceeded(opts.max_iter))
}

/// A nonconcave ratio together with a rule for building fractional
/// minorizers of it.
///
/// The bound built at `x0` must lie below the objective everywhere, touch it
/// at `x0` and share its gradient there.
pub trait SurrogateModel {
    type Point: Clone;
    type Bound: FractionalProblem<Point = Self::Point>;

    fn objective(&self, x: &Self::Point) -> f64;

    fn build_surrogate(&self, at: &Self::Point) -> Result<Self::Bound, InnerError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurrogateOptions {
    /// Stop when `|obj_l - obj_{l-1}| <= eps * |obj_l|`.
    pub eps: f64,
    pub max_outer: usize,
    /// Largest objective decrease attributed to rounding, relative to `1 + |obj|`.
    pub monotone_tol: f64,
    pub inner: DinkelbachOptions,
}

impl Default for SurrogateOptions {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            max_outer: 500,
            monotone_tol: 1e-7,
            inner: DinkelbachOptions {
                eps: 1e-9,
                max_iter: 100,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct SurrogateOutcome<P> {
    pub point: P,
    pub objective: f64,
    /// Surrogate problems solved.
    pub iterations: usize,
    /// Total parametric subproblems across all surrogates.
    pub inner_iterations: usize,
    /// `objectives[0]` is the starting point; entry `l` follows the `l`-th surrogate.
    /// `lambdas` and `f_values` hold the final Dinkelbach state of each surrogate.
    pub trace: FractionalTrace,
}

/// Maximizes successive fractional minorizers starting from a feasible `initial` point.
pub fn surrogate_loop<S: SurrogateModel>(
    model: &S,
    initial: S::Point,
    opts: &SurrogateOptions,
) -> Result<SurrogateOutcome<S::Point>, DinkelbachError> {
    let mut x = initial;
    let mut obj = model.objective(&x);
    let mut trace = FractionalTrace {
        objectives: vec![obj],
        ..FractionalTrace::default()
    };
    let mut inner_iterations = 0;
    for it in 1..=opts.max_outer {
        let bound = model.build_surrogate(&x)?;
        let at_x = bound.ratio(&x);
        if cfg!(debug_assertions) && (at_x - obj).abs() > 1e-6 * (1.0 + obj.abs()) {
            return Err(DinkelbachError::NonMonotoneObjective {
                previous: obj,
                current: at_x,
            });
        }
        let lambda0 = at_x.max(0.0).min(obj.max(0.0));
        let sol = dinkelbach_solve(&bound, lambda0, &opts.inner)?;
        inner_iterations += sol.iterations;
        let next = model.objective(&sol.point);
        trace.lambdas.push(sol.lambda);
        trace
            .f_values
            .push(*sol.trace.f_values.last().unwrap_or(&0.0));
        if next < obj - opts.monotone_tol * (1.0 + obj.abs()) {
            return Err(DinkelbachError::NonMonotoneObjective {
                previous: obj,
                current: next,
            });
        }
        let (next_x, next_obj) = if next >= obj {
            (sol.point, next)
        } else {
            (x, obj)
        };
        trace.objectives.push(next_obj);
        let change = (next_obj - obj).abs();
        log::debug!("surrogate it={it} objective={next_obj:.9e} change={change:.3e}");
        x = next_x;
        obj = next_obj;
        if change <= opts.eps * obj.abs() {
            return Ok(SurrogateOutcome {
                point: x,
                objective: obj,
                iterations: it,
                inner_iterations,
                trace,
            });
        }
    }
    Err(DinkelbachError::MaxIterExceeded(opts.max_outer))
}

/// A fractional program whose feasible set is given by a [`LogDetProgram`]
/// (its objective is ignored), with a log-det numerator and an affine,
/// positive denominator.
#[derive(Debug, Clone)]
pub struct LogDetFraction {
    program: LogDetProgram,
    numerator: Expr,
    denominator: Expr,
    options: SolverOptions,
    start: OnceLock<Result<DVector<f64>, InnerError>>,
}

impl LogDetFraction {
    pub fn new(
        program: LogDetProgram,
        numerator: Expr,
        denominator: Expr,
    ) -> Result<Self, InnerError> {
        if !denominator.is_affine() {
            return Err(InnerError::Malformed("denominator must be affine".into()));
        }
        Ok(Self {
            program,
            numerator,
            denominator,
            options: SolverOptions::default(),
            start: OnceLock::new(),
        })
    }

    pub fn with_options(mut self, options: SolverOptions) -> Self {
        self.options = options;
        self
    }

    /// Uses `x` as the interior starting point of every parametric solve when it is strictly feasible.
    pub fn with_start(self, x: DVector<f64>) -> Self {
        let _ = self.start.set(Ok(x));
        self
    }

    pub fn program(&self) -> &LogDetProgram {
        &self.program
    }

    fn eval(&self, e: &Expr, x: &DVector<f64>) -> f64 {
        self.program.evaluate(e, x).unwrap_or(f64::NAN)
    }

    fn interior_start(&self) -> Result<&DVector<f64>, InnerError> {
        self.start
            .get_or_init(|| inner::find_feasible(&self.program, None))
            .as_ref()
            .map_err(Clone::clone)
    }
}

impl FractionalProblem for LogDetFraction {
    /// Program coordinates; see [`LogDetProgram::matrix_at`].
    type Point = DVector<f64>;

    fn numerator(&self, x: &DVector<f64>) -> f64 {
        self.eval(&self.numerator, x)
    }

    fn denominator(&self, x: &DVector<f64>) -> f64 {
        self.eval(&self.denominator, x)
    }

    fn maximize_parametric(
        &self,
        lambda: f64,
        _warm: Option<&DVector<f64>>,
    ) -> Result<(DVector<f64>, f64), InnerError> {
        let start = match self.interior_start() {
            Ok(x) => Some(x.clone()),
            Err(InnerError::Infeasible) => None,
            Err(e) => return Err(e),
        };
        // Objective magnitude near the root; the parametric program is solved in these units.
        let scale = match &start {
            Some(x) if lambda > 0.0 => {
                let s = lambda * self.denominator(x);
                if s.is_finite() && s > 0.0 {
                    s.min(1.0)
                } else {
                    1.0
                }
            }
            _ => 1.0,
        };
        let mut prog = self.program.clone();
        prog.set_objective(
            self.numerator
                .clone()
                .plus(&self.denominator.scaled(-lambda))
                .scaled(1.0 / scale),
        );
        let sol = inner::solve_from(&prog, start.as_ref(), &self.options)?;
        let value = sol.value * scale;
        Ok((sol.coords().clone(), value))
    }
}

/// Fractional problem described by closures; convenient for scalar problems
/// with a closed-form parametric maximizer.
pub struct FnFractional<P, F, G, S> {
    pub numerator: F,
    pub denominator: G,
    pub solver: S,
    _point: std::marker::PhantomData<fn() -> P>,
}

impl<P, F, G, S> FnFractional<P, F, G, S>
where
    P: Clone,
    F: Fn(&P) -> f64,
    G: Fn(&P) -> f64,
    S: Fn(f64) -> Result<P, InnerError>,
{
    pub fn new(numerator: F, denominator: G, solver: S) -> Self {
        Self {
            numerator,
            denominator,
            solver,
            _point: std::marker::PhantomData,
        }
    }
}

impl<P, F, G, S> FractionalProblem for FnFractional<P, F, G, S>
where
    P: Clone,
    F: Fn(&P) -> f64,
    G: Fn(&P) -> f64,
    S: Fn(f64) -> Result<P, InnerError>,
{
    type Point = P;

    fn numerator(&self, x: &P) -> f64 {
        (self.numerator)(x)
    }

    fn denominator(&self, x: &P) -> f64 {
        (self.denominator)(x)
    }

    fn maximize_parametric(&self, lambda: f64, _warm: Option<&P>) -> Result<(P, f64), InnerError> {
        let x = (self.solver)(lambda)?;
        let v = (self.numerator)(&x) - lambda * (self.denominator)(&x);
        Ok((x, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inner::Loading;
    use crate::linalg::identity;
    use std::f64::consts::{E, LN_2};

    fn log_ratio_problem() -> impl FractionalProblem<Point = f64> + Send + Sync {
        FnFractional::new(
            |p: &f64| (1.0 + p).log2(),
            |p: &f64| p + 1.0,
            |lambda: f64| {
                if lambda <= 0.0 {
                    Ok(10.0)
                } else {
                    Ok((1.0 / (lambda * LN_2) - 1.0).clamp(0.0, 10.0))
                }
            },
        )
    }

    #[test]
    fn scalar_log_ratio_reaches_stationary_point() {
        let out = dinkelbach_solve(
            &log_ratio_problem(),
            0.0,
            &DinkelbachOptions {
                eps: 1e-9,
                max_iter: 100,
            },
        )
        .unwrap();
        assert!((out.point - (E - 1.0)).abs() < 1e-6);
        assert!((out.lambda - 1.0 / (E * LN_2)).abs() < 1e-6);
        assert!(out.iterations <= 8, "{} iterations", out.iterations);
        assert!(out.trace.lambdas.windows(2).all(|w| w[1] > w[0]));
        assert!(out.trace.f_values.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn constant_ratio_needs_one_iteration() {
        let prob = FnFractional::new(|_: &f64| 3.0, |_: &f64| 2.0, |_| Ok(0.0));
        let out = dinkelbach_solve(&prob, 0.0, &DinkelbachOptions::default()).unwrap();
        // lambda0 = 0 gives F = 3; the update lands on 3/2 where F = 0.
        assert!(out.iterations <= 2);
        assert_eq!(out.lambda, 1.5);
    }

    #[test]
    fn linear_over_constant_picks_the_endpoint() {
        let prob = FnFractional::new(
            |p: &f64| *p,
            |_: &f64| 1.0,
            |lambda: f64| Ok(if lambda <= 1.0 { 5.0 } else { 0.0 }),
        );
        let out = dinkelbach_solve(&prob, 0.0, &DinkelbachOptions::default()).unwrap();
        assert_eq!(out.point, 5.0);
        assert_eq!(out.lambda, 5.0);
    }

    #[test]
    fn max_iter_is_reported() {
        let out = dinkelbach_solve(
            &log_ratio_problem(),
            0.0,
            &DinkelbachOptions {
                eps: -1.0,
                max_iter: 3,
            },
        );
        assert!(matches!(
            out,
            Err(DinkelbachError::MaxIterExceeded(3)) | Ok(_)
        ));
    }

    #[test]
    fn log_det_fraction_matches_closed_form() {
        let mut prog = LogDetProgram::new();
        let p = prog.add_scalar();
        prog.add_constraint(Expr::constant(10.0).scalar(p, -1.0));
        let f = Expr::new().log2_det(1.0, identity(1), vec![(p, Loading::Scaled(identity(1)))]);
        let g = Expr::constant(1.0).scalar(p, 1.0);
        let prob = LogDetFraction::new(prog, f, g).unwrap();
        let out = dinkelbach_solve(
            &prob,
            0.0,
            &DinkelbachOptions {
                eps: 1e-10,
                max_iter: 100,
            },
        )
        .unwrap();
        assert!((prob.program().scalar_at(&out.point, p) - (E - 1.0)).abs() < 1e-6);
        assert!((out.lambda - 1.0 / (E * LN_2)).abs() < 1e-9);
    }

    struct Exact;

    impl SurrogateModel for Exact {
        type Point = f64;
        type Bound = Box<dyn FractionalProblem<Point = f64> + Send + Sync>;

        fn objective(&self, p: &f64) -> f64 {
            (1.0 + p).log2() / (p + 1.0)
        }

        fn build_surrogate(&self, _at: &f64) -> Result<Self::Bound, InnerError> {
            Ok(Box::new(log_ratio_problem()))
        }
    }

    #[test]
    fn exact_surrogate_is_a_fixed_point() {
        let out = surrogate_loop(&Exact, E - 1.0, &SurrogateOptions::default()).unwrap();
        assert_eq!(out.iterations, 1);
        let out = surrogate_loop(&Exact, 7.0, &SurrogateOptions::default()).unwrap();
        assert!((out.trace.objectives[1] - out.objective).abs() < 1e-12);
        assert!((out.point - (E - 1.0)).abs() < 1e-6);
    }

    /// A "bound" that overestimates the objective near 0 and pushes the iterate there.
    struct Broken;

    impl SurrogateModel for Broken {
        type Point = f64;
        type Bound = Box<dyn FractionalProblem<Point = f64> + Send + Sync>;

        fn objective(&self, p: &f64) -> f64 {
            (1.0 + p).log2() / (p + 1.0)
        }

        fn build_surrogate(&self, _at: &f64) -> Result<Self::Bound, InnerError> {
            Ok(Box::new(FnFractional::new(
                |p: &f64| (1.0 + p).log2() + if *p < 0.5 { 5.0 } else { 0.0 },
                |p: &f64| p + 1.0,
                |_| Ok(0.0),
            )))
        }
    }

    #[test]
    fn broken_surrogate_is_rejected() {
        let err = surrogate_loop(&Broken, E - 1.0, &SurrogateOptions::default()).unwrap_err();
        assert!(matches!(err, DinkelbachError::NonMonotoneObjective { .. }));
    }
}
