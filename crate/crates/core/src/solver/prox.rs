//! Proximal operator of the block-separable sparse group penalty
//! `lambda * (gamma * ||v||_1 + (1 - gamma) * sum_l w_l ||v_l||_2)`.

use ndarray::{Array1, ArrayView1};

use crate::clusters::ClusterStructure;
use crate::error::{Error, Result};

#[inline]
pub fn soft_threshold(x: f64, threshold: f64) -> f64 {
    if x > threshold {
        x - threshold
    } else if x < -threshold {
        x + threshold
    } else {
        0.0
    }
}

pub(crate) fn check_penalty_params(lambda: f64, gamma: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    Ok(())
}

/// In-place prox on one block: soft-threshold by `l1`, then shrink the block
/// norm by `group`. A zero-norm block stays zero.
#[inline]
pub(crate) fn prox_block(block: &mut [f64], l1: f64, group: f64) {
    let mut norm2 = 0.0;
    for x in block.iter_mut() {
        *x = soft_threshold(*x, l1);
        norm2 += *x * *x;
    }
    let norm = norm2.sqrt();
    if norm == 0.0 {
        return;
    }
    let factor = 1.0 - group / norm;
    if factor <= 0.0 {
        block.iter_mut().for_each(|x| *x = 0.0);
    } else {
        block.iter_mut().for_each(|x| *x *= factor);
    }
}

/// In-place prox over the whole expanded vector.
pub(crate) fn prox_in_place(v: &mut [f64], step: f64, lambda: f64, gamma: f64, cs: &ClusterStructure) {
    let l1 = step * lambda * gamma;
    let shrink = step * lambda * (1.0 - gamma);
    for (l, range) in cs.blocks().enumerate() {
        prox_block(&mut v[range], l1, shrink * cs.weights()[l]);
    }
}

pub fn prox_sparse_group(
    u: ArrayView1<f64>,
    step: f64,
    lambda: f64,
    gamma: f64,
    cs: &ClusterStructure,
) -> Result<Array1<f64>> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParameter(format!("step must be positive, got {step}")));
    }
    check_penalty_params(lambda, gamma)?;
    if u.len() != cs.expanded_dim() {
        return Err(Error::InvalidInput(format!(
            "vector has length {} but P = {}",
            u.len(),
            cs.expanded_dim()
        )));
    }
    let mut out = u.to_vec();
    prox_in_place(&mut out, step, lambda, gamma, cs);
    Ok(Array1::from(out))
}

/// Penalty value `lambda * (gamma ||v||_1 + (1 - gamma) sum_l w_l ||v_l||_2)`.
pub fn penalty(v: &[f64], lambda: f64, gamma: f64, cs: &ClusterStructure) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let mut l1 = 0.0;
    let mut group = 0.0;
    for (l, range) in cs.blocks().enumerate() {
        let block = &v[range];
        l1 += block.iter().map(|x| x.abs()).sum::<f64>();
        group += cs.weights()[l] * block.iter().map(|x| x * x).sum::<f64>().sqrt();
    }
    lambda * (gamma * l1 + (1.0 - gamma) * group)
}
