//! Penalty level at which the whole coefficient vector is zero.

use ndarray::{ArrayView1, ArrayView2};

use super::operator::{Dense, LinearMap};
use super::prox::soft_threshold;
use crate::clusters::ClusterStructure;
use crate::error::{Error, Result};
use crate::huber::{huber_location, Huber};

/// Zero threshold of one block: the smallest `lambda` with
/// `||S(g, lambda * gamma)||_2 <= lambda * (1 - gamma) * w`.
fn block_threshold(g: &[f64], gamma: f64, weight: f64) -> f64 {
    let sup = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if sup == 0.0 {
        return 0.0;
    }
    if gamma == 0.0 {
        return g.iter().map(|x| x * x).sum::<f64>().sqrt() / weight;
    }
    if gamma == 1.0 {
        return sup;
    }
    // The excess ||S(g, lambda gamma)|| - lambda (1 - gamma) w is strictly
    // decreasing in lambda and non-positive at sup / gamma.
    let excess = |lam: f64| -> f64 {
        let s: f64 = g.iter().map(|&x| soft_threshold(x, lam * gamma).powi(2)).sum();
        s.sqrt() - lam * (1.0 - gamma) * weight
    };
    let mut lo = 0.0;
    let mut hi = sup / gamma;
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Zero threshold for the negative smooth gradient `g = X~' psi(r0)` at the
/// origin, with a small relative margin so that the prox lands exactly on
/// zero.
pub fn lambda_max_from_gradient(g: &[f64], gamma: f64, cs: &ClusterStructure) -> f64 {
    let lam = cs
        .blocks()
        .enumerate()
        .map(|(l, range)| block_threshold(&g[range], gamma, cs.weights()[l]))
        .fold(0.0, f64::max);
    lam * (1.0 + 1e-9)
}

pub(crate) fn lambda_max_op<M: LinearMap>(
    op: &M,
    y: ArrayView1<f64>,
    gamma: f64,
    huber: &Huber,
    cs: &ClusterStructure,
    intercept: bool,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    if y.len() != op.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "response has length {} but design has {} rows",
            y.len(),
            op.nrows()
        )));
    }
    let y = y.to_vec();
    let loc = if intercept { huber_location(&y, huber)? } else { 0.0 };
    let psi: Vec<f64> = y.iter().map(|&v| huber.grad(v - loc)).collect();
    let mut g = vec![0.0; op.ncols()];
    op.adjoint(&psi, &mut g);
    Ok(lambda_max_from_gradient(&g, gamma, cs))
}

/// Smallest `lambda` for which the zero vector solves the expanded problem.
///
/// Computed exactly per block from the score at the (robustly centered)
/// origin; returns 0 when the score vanishes, e.g. for an all-zero design.
pub fn lambda_max(
    xtil: ArrayView2<f64>,
    y: ArrayView1<f64>,
    gamma: f64,
    delta: f64,
    cs: &ClusterStructure,
    intercept: bool,
) -> Result<f64> {
    if xtil.ncols() != cs.expanded_dim() {
        return Err(Error::DimensionMismatch(format!(
            "expanded design has {} columns but P = {}",
            xtil.ncols(),
            cs.expanded_dim()
        )));
    }
    let huber = Huber::new(delta)?;
    let x = xtil.as_standard_layout();
    lambda_max_op(&Dense::new(x.view()), y, gamma, &huber, cs, intercept)
}
