//! Huber loss primitives and the MAD-based threshold rule.

use crate::error::{Error, Result};

/// Consistency factor turning the raw median absolute deviation into a
/// Gaussian-consistent scale estimate.
pub const MAD_FACTOR: f64 = 1.4826;

/// Multiplier applied to the robust scale to obtain the Huber threshold.
pub const TUNING_CONSTANT: f64 = 1.345;

/// A Huber loss with a validated threshold.
///
/// `value` is quadratic for `|t| <= delta` and linear beyond it; `grad` is the
/// clipped identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Huber {
    delta: f64,
}

impl Huber {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0) || delta.is_nan() {
            return Err(Error::InvalidParameter(format!(
                "Huber threshold must be positive, got {delta}"
            )));
        }
        Ok(Self { delta })
    }

    #[inline]
    pub fn delta(&self) -> f64 {
        self.delta
    }

    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        let a = t.abs();
        if a <= self.delta {
            0.5 * t * t
        } else {
            self.delta * a - 0.5 * self.delta * self.delta
        }
    }

    #[inline]
    pub fn grad(&self, t: f64) -> f64 {
        t.clamp(-self.delta, self.delta)
    }

    /// Sum of the loss over a slice of residuals.
    pub fn total(&self, residuals: &[f64]) -> f64 {
        residuals.iter().map(|&r| self.value(r)).sum()
    }
}

pub fn huber_value(t: f64, delta: f64) -> Result<f64> {
    Ok(Huber::new(delta)?.value(t))
}

pub fn huber_grad(t: f64, delta: f64) -> Result<f64> {
    Ok(Huber::new(delta)?.grad(t))
}

/// Parameters of the threshold rule `delta = c * 1.4826 * MAD(residuals)`,
/// clamped below by `delta_floor`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HuberSpec {
    pub delta_floor: f64,
    pub mad_factor: f64,
    pub tuning_constant: f64,
}

impl HuberSpec {
    pub fn with_floor(delta_floor: f64) -> Result<Self> {
        if !(delta_floor > 0.0) || !delta_floor.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "delta floor must be positive and finite, got {delta_floor}"
            )));
        }
        Ok(Self {
            delta_floor,
            mad_factor: MAD_FACTOR,
            tuning_constant: TUNING_CONSTANT,
        })
    }

    /// Floor set to `1e-6` times the MAD of the response (or `1e-6` if the
    /// response has zero MAD).
    pub fn for_response(y: &[f64]) -> Result<Self> {
        Self::with_floor(1e-6 * response_scale(y)?)
    }
}

/// Unscaled MAD of `y`, or 1.0 when it is zero. Used to size floors and
/// surrogate thresholds.
pub fn response_scale(y: &[f64]) -> Result<f64> {
    let m = mad(y)?;
    Ok(if m > 0.0 { m } else { 1.0 })
}

pub fn compute_delta(residuals: &[f64], spec: &HuberSpec) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::InvalidInput("residual vector is empty".into()));
    }
    if residuals.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidInput("residuals must be finite".into()));
    }
    let raw = spec.tuning_constant * spec.mad_factor * mad(residuals)?;
    Ok(raw.max(spec.delta_floor))
}

/// Median of a nonempty slice (mean of the two central order statistics for
/// even lengths).
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("median of an empty vector".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    Ok(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

/// Raw (unscaled) median absolute deviation about the median.
pub fn mad(values: &[f64]) -> Result<f64> {
    let center = median(values)?;
    let dev: Vec<f64> = values.iter().map(|v| (v - center).abs()).collect();
    median(&dev)
}

/// Minimizer of `sum_i rho(values[i] - b)` over the scalar `b`.
///
/// The derivative `-sum psi(values[i] - b)` is monotone in `b`, so the root is
/// bracketed by the sample range and found by bisection to `1e-12` relative
/// width.
pub fn huber_location(values: &[f64], huber: &Huber) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidInput("location of an empty vector".into()));
    }
    let mut lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidInput("values must be finite".into()));
    }
    let score = |b: f64| -> f64 { values.iter().map(|&v| huber.grad(v - b)).sum() };
    let scale = hi.abs().max(lo.abs()).max(1.0);
    for _ in 0..200 {
        if hi - lo <= 1e-12 * scale {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if score(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
