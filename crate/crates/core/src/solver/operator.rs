//! Linear maps `v -> X~ v` and their adjoints, either on an explicit expanded
//! design or on the original design composed with the duplication map.

use ndarray::ArrayView2;

use crate::clusters::ClusterStructure;

pub(crate) trait LinearMap: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `out = A v`
    fn apply(&self, v: &[f64], out: &mut [f64]);
    /// `out = A^T r`
    fn adjoint(&self, r: &[f64], out: &mut [f64]);
}

/// Row-major dense matrix.
pub(crate) struct Dense<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
}

impl<'a> Dense<'a> {
    /// `x` must be in standard (row-major, contiguous) layout.
    pub(crate) fn new(x: ArrayView2<'a, f64>) -> Self {
        let (rows, cols) = x.dim();
        let data = x
            .to_slice()
            .expect("design matrix must be in standard layout");
        Self { data, rows, cols }
    }
}

#[inline(always)]
fn dot_generic(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    s + tail
}

#[inline(always)]
fn axpy_generic(alpha: f64, x: &[f64], out: &mut [f64]) {
    for (o, &xi) in out.iter_mut().zip(x) {
        *o += alpha * xi;
    }
}

#[cfg(target_arch = "x86_64")]
mod wide {
    #[target_feature(enable = "avx2,fma")]
    pub(super) unsafe fn dot(a: &[f64], b: &[f64]) -> f64 {
        super::dot_generic(a, b)
    }

    #[target_feature(enable = "avx2,fma")]
    pub(super) unsafe fn axpy(alpha: f64, x: &[f64], out: &mut [f64]) {
        super::axpy_generic(alpha, x, out)
    }

    pub(super) fn available() -> bool {
        use std::sync::OnceLock;
        static HAS: OnceLock<bool> = OnceLock::new();
        *HAS.get_or_init(|| is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma"))
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    #[cfg(target_arch = "x86_64")]
    if wide::available() {
        // SAFETY: the CPU supports the enabled features.
        return unsafe { wide::dot(a, b) };
    }
    dot_generic(a, b)
}

#[inline]
fn axpy(alpha: f64, x: &[f64], out: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    if wide::available() {
        // SAFETY: the CPU supports the enabled features.
        return unsafe { wide::axpy(alpha, x, out) };
    }
    axpy_generic(alpha, x, out)
}

impl LinearMap for Dense<'_> {
    fn nrows(&self) -> usize {
        self.rows
    }

    fn ncols(&self) -> usize {
        self.cols
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        if self.cols == 0 {
            out.iter_mut().for_each(|o| *o = 0.0);
            return;
        }
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = dot(row, v);
        }
    }

    fn adjoint(&self, r: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        if self.cols == 0 {
            return;
        }
        for (&ri, row) in r.iter().zip(self.data.chunks_exact(self.cols)) {
            if ri != 0.0 {
                axpy(ri, row, out);
            }
        }
    }
}

/// `X~ = X D` where `D` duplicates features per cluster membership. Products
/// run in the original `p`-dimensional space.
pub(crate) struct Duplicated<'a> {
    x: Dense<'a>,
    cs: &'a ClusterStructure,
}

impl<'a> Duplicated<'a> {
    pub(crate) fn new(x: Dense<'a>, cs: &'a ClusterStructure) -> Self {
        Self { x, cs }
    }
}

impl LinearMap for Duplicated<'_> {
    fn nrows(&self) -> usize {
        self.x.rows
    }

    fn ncols(&self) -> usize {
        self.cs.expanded_dim()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let mut beta = vec![0.0; self.x.cols];
        for (&(_, j), &vk) in self.cs.dup_map().iter().zip(v) {
            beta[j] += vk;
        }
        self.x.apply(&beta, out);
    }

    fn adjoint(&self, r: &[f64], out: &mut [f64]) {
        let mut g = vec![0.0; self.x.cols];
        self.x.adjoint(r, &mut g);
        for (o, &(_, j)) in out.iter_mut().zip(self.cs.dup_map()) {
            *o = g[j];
        }
    }
}
