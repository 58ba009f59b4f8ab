//! Huber-loss sparse overlapping group lasso solver.
//!
//! Overlapping clusters are handled by duplicating covariates into an expanded
//! space where the groups no longer overlap. The expanded problem
//!
//! ```text
//! min_{v, b}  sum_i rho_delta(y_i - x~_i' v - b) + lambda * (gamma ||v||_1 + (1 - gamma) sum_l w_l ||v_l||_2)
//! ```
//!
//! is solved by accelerated proximal gradient with backtracking and a
//! monotone safeguard (a step that would increase the objective restarts the
//! momentum instead). Optimality is certified by the norm of the minimal
//! subgradient, computed block by block.

pub(crate) mod lambda;
mod operator;
mod prox;

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::clusters::ClusterStructure;
use crate::error::{Error, Result};
use crate::huber::{huber_location, Huber};

pub use lambda::{lambda_max, lambda_max_from_gradient};
pub(crate) use operator::{Dense, Duplicated, LinearMap};
pub use prox::{penalty, prox_sparse_group, soft_threshold};
pub(crate) use prox::check_penalty_params;

/// Iterations between exact optimality checks.
const KKT_EVERY: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverOptions {
    /// Bound on the minimal-subgradient norm (and intercept score) at which
    /// the solve is declared converged.
    pub tol: f64,
    pub max_iter: usize,
    /// Backtracking shrink factor.
    pub shrink: f64,
    pub initial_step: f64,
    pub intercept: bool,
    /// Keep the objective value of every iteration in the solution.
    #[serde(skip)]
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 5000,
            shrink: 0.8,
            initial_step: 1.0,
            intercept: false,
            record_trace: false,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig(format!("solver tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("solver max_iter must be at least 1".into()));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "backtracking shrink must lie in (0, 1), got {}",
                self.shrink
            )));
        }
        if !(self.initial_step > 0.0) || !self.initial_step.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "initial step must be positive, got {}",
                self.initial_step
            )));
        }
        Ok(())
    }
}

/// Starting point for a solve, usually the solution at a neighbouring
/// penalty level.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub v: Array1<f64>,
    pub intercept: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSolution {
    pub beta: Array1<f64>,
    pub expanded_v: Array1<f64>,
    pub intercept: Option<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    /// Step size in force when the solve stopped.
    pub step: f64,
    /// Objective after every iteration (only with `record_trace`).
    pub trace: Vec<f64>,
}

impl SolverSolution {
    pub fn warm_start(&self) -> WarmStart {
        WarmStart {
            v: self.expanded_v.clone(),
            intercept: self.intercept.unwrap_or(0.0),
            step: self.step,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.expanded_v.iter().all(|&x| x == 0.0)
    }
}

/// Duplicates the columns of `x` according to the cluster structure.
pub fn duplicate_design(x: ArrayView2<f64>, cs: &ClusterStructure) -> Result<ndarray::Array2<f64>> {
    cs.duplicate(x)
}

pub fn recombine(v: ArrayView1<f64>, cs: &ClusterStructure) -> Result<Array1<f64>> {
    cs.recombine(v)
}

/// Solves the expanded problem on an explicit `n x P` design.
pub fn fit_penalized(
    xtil: ArrayView2<f64>,
    y: ArrayView1<f64>,
    lambda: f64,
    gamma: f64,
    delta: f64,
    cs: &ClusterStructure,
    opts: &SolverOptions,
) -> Result<SolverSolution> {
    fit_penalized_warm(xtil, y, lambda, gamma, delta, cs, opts, None)
}

#[allow(clippy::too_many_arguments)]
pub fn fit_penalized_warm(
    xtil: ArrayView2<f64>,
    y: ArrayView1<f64>,
    lambda: f64,
    gamma: f64,
    delta: f64,
    cs: &ClusterStructure,
    opts: &SolverOptions,
    warm: Option<&WarmStart>,
) -> Result<SolverSolution> {
    if xtil.ncols() != cs.expanded_dim() {
        return Err(Error::DimensionMismatch(format!(
            "expanded design has {} columns but P = {}",
            xtil.ncols(),
            cs.expanded_dim()
        )));
    }
    let x = xtil.as_standard_layout();
    let op = Dense::new(x.view());
    solve(&op, y, lambda, gamma, delta, cs, opts, warm)
}

/// Solves the penalized problem in the original feature space: the design is
/// duplicated implicitly, solved in the expanded space and recombined.
pub fn solve_original(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    lambda: f64,
    gamma: f64,
    delta: f64,
    cs: &ClusterStructure,
    opts: &SolverOptions,
) -> Result<SolverSolution> {
    solve_original_warm(x, y, lambda, gamma, delta, cs, opts, None)
}

#[allow(clippy::too_many_arguments)]
pub fn solve_original_warm(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    lambda: f64,
    gamma: f64,
    delta: f64,
    cs: &ClusterStructure,
    opts: &SolverOptions,
    warm: Option<&WarmStart>,
) -> Result<SolverSolution> {
    cs.check_p(x.ncols())?;
    let x = x.as_standard_layout();
    let op = Duplicated::new(Dense::new(x.view()), cs);
    solve(&op, y, lambda, gamma, delta, cs, opts, warm)
}

/// Smallest penalty level at which the solver returns the zero coefficient
/// vector, confirmed by solving at the analytic threshold and doubling it
/// until the solution is zero.
pub fn certified_lambda_max(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    gamma: f64,
    delta: f64,
    cs: &ClusterStructure,
    opts: &SolverOptions,
) -> Result<f64> {
    cs.check_p(x.ncols())?;
    let xs = x.as_standard_layout();
    let op = Duplicated::new(Dense::new(xs.view()), cs);
    let huber = Huber::new(delta)?;
    let mut lam = lambda::lambda_max_op(&op, y, gamma, &huber, cs, opts.intercept)?;
    if lam == 0.0 {
        return Ok(0.0);
    }
    for _ in 0..64 {
        let sol = solve(&op, y, lam, gamma, delta, cs, opts, None)?;
        if sol.is_zero() {
            return Ok(lam);
        }
        lam *= 2.0;
    }
    Err(Error::NumericalFailure {
        iteration: 64,
        message: "could not certify a zero solution for lambda_max".into(),
    })
}

struct State {
    v: Vec<f64>,
    b: f64,
    fitted: Vec<f64>,
}

fn residuals(y: &[f64], fitted: &[f64], b: f64, out: &mut [f64]) {
    for ((o, &yi), &fi) in out.iter_mut().zip(y).zip(fitted) {
        *o = yi - fi - b;
    }
}

/// Minimal-norm subgradient of the penalized objective, as the largest
/// per-block Euclidean norm (the intercept score counts as its own block).
pub(crate) fn kkt_residual(
    v: &[f64],
    grad: &[f64],
    grad_b: f64,
    lambda: f64,
    gamma: f64,
    cs: &ClusterStructure,
) -> f64 {
    let l1 = lambda * gamma;
    let shrink = lambda * (1.0 - gamma);
    let mut worst = grad_b.abs();
    for (l, range) in cs.blocks().enumerate() {
        let block = &v[range.clone()];
        let g = &grad[range];
        let norm = block.iter().map(|x| x * x).sum::<f64>().sqrt();
        let res2 = if norm == 0.0 {
            let s = g
                .iter()
                .map(|&gj| soft_threshold(gj, l1).powi(2))
                .sum::<f64>()
                .sqrt();
            (s - shrink * cs.weights()[l]).max(0.0).powi(2)
        } else {
            let group = shrink * cs.weights()[l] / norm;
            block
                .iter()
                .zip(g)
                .map(|(&vj, &gj)| {
                    if vj != 0.0 {
                        (gj + l1 * vj.signum() + group * vj).powi(2)
                    } else {
                        (gj.abs() - l1).max(0.0).powi(2)
                    }
                })
                .sum()
        };
        worst = worst.max(res2.sqrt());
    }
    worst
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn solve<M: LinearMap>(
    op: &M,
    y: ArrayView1<f64>,
    lambda: f64,
    gamma: f64,
    delta: f64,
    cs: &ClusterStructure,
    opts: &SolverOptions,
    warm: Option<&WarmStart>,
) -> Result<SolverSolution> {
    opts.validate()?;
    check_penalty_params(lambda, gamma)?;
    let huber = Huber::new(delta)?;
    let n = op.nrows();
    let dim = op.ncols();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "response has length {} but design has {n} rows",
            y.len()
        )));
    }
    if dim != cs.expanded_dim() {
        return Err(Error::DimensionMismatch(format!(
            "operator has {dim} columns but P = {}",
            cs.expanded_dim()
        )));
    }
    let y: Vec<f64> = y.to_vec();
    let objective = |r: &[f64], v: &[f64]| huber.total(r) + penalty(v, lambda, gamma, cs);

    let (v0, mut step) = match warm {
        Some(w) => {
            if w.v.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "warm start has length {} but P = {dim}",
                    w.v.len()
                )));
            }
            let step = if w.step > 0.0 && w.step.is_finite() { w.step } else { opts.initial_step };
            (w.v.to_vec(), step)
        }
        None => (vec![0.0; dim], opts.initial_step),
    };
    let mut fitted0 = vec![0.0; n];
    op.apply(&v0, &mut fitted0);
    let b0 = if opts.intercept {
        let partial: Vec<f64> = y.iter().zip(&fitted0).map(|(yi, fi)| yi - fi).collect();
        huber_location(&partial, &huber)?
    } else {
        0.0
    };

    let mut x = State { v: v0, b: b0, fitted: fitted0 };
    let mut x_prev = State { v: x.v.clone(), b: x.b, fitted: x.fitted.clone() };
    let mut yv = x.v.clone();
    let mut yb = x.b;
    let mut yfit = x.fitted.clone();

    let mut r = vec![0.0; n];
    residuals(&y, &x.fitted, x.b, &mut r);
    let mut f_x = objective(&r, &x.v);
    if !f_x.is_finite() {
        return Err(Error::NumericalFailure {
            iteration: 0,
            message: "objective is not finite at the starting point".into(),
        });
    }

    let mut psi = vec![0.0; n];
    let mut grad = vec![0.0; dim];
    let mut zv = vec![0.0; dim];
    let mut zfit = vec![0.0; n];
    let mut rz = vec![0.0; n];
    let mut momentum = 1.0f64;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut kkt = f64::INFINITY;
    let mut iterations = 0;

    // Exact certificate at the current iterate.
    let certify = |x: &State, r: &mut [f64], psi: &mut [f64], grad: &mut [f64]| -> f64 {
        residuals(&y, &x.fitted, x.b, r);
        for (p, &ri) in psi.iter_mut().zip(r.iter()) {
            *p = huber.grad(ri);
        }
        op.adjoint(psi, grad);
        grad.iter_mut().for_each(|g| *g = -*g);
        let gb = if opts.intercept { -psi.iter().sum::<f64>() } else { 0.0 };
        kkt_residual(&x.v, grad, gb, lambda, gamma, cs)
    };

    let initial = certify(&x, &mut r, &mut psi, &mut grad);
    if initial <= opts.tol {
        kkt = initial;
        converged = true;
    }

    while !converged && iterations < opts.max_iter {
        iterations += 1;

        // Gradient of the smooth part at the extrapolated point.
        residuals(&y, &yfit, yb, &mut r);
        let mut f_y = 0.0;
        for (p, &ri) in psi.iter_mut().zip(r.iter()) {
            f_y += huber.value(ri);
            *p = huber.grad(ri);
        }
        op.adjoint(&psi, &mut grad);
        grad.iter_mut().for_each(|g| *g = -*g);
        let grad_b = if opts.intercept { -psi.iter().sum::<f64>() } else { 0.0 };

        // Backtracking on the quadratic upper model.
        let (f_z, zb) = loop {
            for ((z, &yy), &g) in zv.iter_mut().zip(&yv).zip(&grad) {
                *z = yy - step * g;
            }
            prox::prox_in_place(&mut zv, step, lambda, gamma, cs);
            let zb = if opts.intercept { yb - step * grad_b } else { 0.0 };
            op.apply(&zv, &mut zfit);
            residuals(&y, &zfit, zb, &mut rz);
            let f_z = huber.total(&rz);
            let mut lin = grad_b * (zb - yb);
            let mut quad = (zb - yb).powi(2);
            for ((&z, &yy), &g) in zv.iter().zip(&yv).zip(&grad) {
                let d = z - yy;
                lin += g * d;
                quad += d * d;
            }
            let model = f_y + lin + quad / (2.0 * step);
            if !f_z.is_finite() && step < 1e-300 {
                return Err(Error::NumericalFailure {
                    iteration: iterations,
                    message: "objective became non-finite during line search".into(),
                });
            }
            if f_z.is_finite() && f_z <= model + 1e-12 * f_y.abs().max(1.0) {
                break (f_z, zb);
            }
            step *= opts.shrink;
            if step < 1e-300 {
                return Err(Error::NumericalFailure {
                    iteration: iterations,
                    message: "line search step underflowed".into(),
                });
            }
        };

        let big_f_z = f_z + penalty(&zv, lambda, gamma, cs);
        if !big_f_z.is_finite() {
            return Err(Error::NumericalFailure {
                iteration: iterations,
                message: "objective is not finite".into(),
            });
        }

        let mut mapping = (zb - yb).powi(2);
        for (&z, &yy) in zv.iter().zip(&yv) {
            mapping += (z - yy).powi(2);
        }
        let mapping = mapping.sqrt() / step;

        if big_f_z <= f_x {
            std::mem::swap(&mut x_prev, &mut x);
            x.v.copy_from_slice(&zv);
            x.b = zb;
            x.fitted.copy_from_slice(&zfit);
            f_x = big_f_z;
            let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            let beta = (momentum - 1.0) / next;
            momentum = next;
            for i in 0..dim {
                yv[i] = x.v[i] + beta * (x.v[i] - x_prev.v[i]);
            }
            for i in 0..n {
                yfit[i] = x.fitted[i] + beta * (x.fitted[i] - x_prev.fitted[i]);
            }
            yb = x.b + beta * (x.b - x_prev.b);
        } else {
            // Restart from the best point.
            momentum = 1.0;
            yv.copy_from_slice(&x.v);
            yfit.copy_from_slice(&x.fitted);
            yb = x.b;
        }
        if opts.record_trace {
            trace.push(f_x);
        }

        if mapping <= opts.tol || iterations % KKT_EVERY == 0 || iterations == opts.max_iter {
            kkt = certify(&x, &mut r, &mut psi, &mut grad);
            if kkt <= opts.tol {
                converged = true;
            }
        }
    }
    if kkt.is_infinite() {
        kkt = certify(&x, &mut r, &mut psi, &mut grad);
    }

    let v = Array1::from(x.v);
    let beta = cs.recombine(v.view())?;
    Ok(SolverSolution {
        beta,
        expanded_v: v,
        intercept: opts.intercept.then_some(x.b),
        objective: f_x,
        iterations,
        converged,
        kkt_residual: kkt,
        step,
        trace,
    })
}
