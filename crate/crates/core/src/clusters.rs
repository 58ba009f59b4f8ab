//! Possibly-overlapping feature clusters and the duplication map into the
//! expanded (latent) coefficient space.
//!
//! Feature indices are 0-based throughout the library; file formats use
//! 1-based indices and convert at the boundary.

use std::ops::Range;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStructure {
    p: usize,
    clusters: Vec<Vec<usize>>,
    weights: Vec<f64>,
    offsets: Vec<usize>,
    dup_map: Vec<(usize, usize)>,
    declared: usize,
}

impl ClusterStructure {
    /// Builds the structure for `p` features from 0-based index sets.
    ///
    /// Each set is sorted and deduplicated. Features not covered by any set
    /// are appended as singleton clusters in increasing feature order.
    pub fn new(p: usize, clusters: Vec<Vec<usize>>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidStructure("p must be at least 1".into()));
        }
        let mut covered = vec![false; p];
        let mut sets = Vec::with_capacity(clusters.len());
        for (l, mut c) in clusters.into_iter().enumerate() {
            if c.is_empty() {
                return Err(Error::InvalidStructure(format!("cluster {l} is empty")));
            }
            c.sort_unstable();
            c.dedup();
            if let Some(&j) = c.iter().find(|&&j| j >= p) {
                return Err(Error::InvalidStructure(format!(
                    "cluster {l} contains feature index {j} outside 0..{p}"
                )));
            }
            for &j in &c {
                covered[j] = true;
            }
            sets.push(c);
        }
        let declared = sets.len();
        sets.extend((0..p).filter(|&j| !covered[j]).map(|j| vec![j]));
        Ok(Self::assemble(p, sets, declared))
    }

    /// One singleton cluster per feature; the penalty becomes a plain lasso.
    pub fn singletons(p: usize) -> Result<Self> {
        Self::new(p, (0..p).map(|j| vec![j]).collect())
    }

    fn assemble(p: usize, clusters: Vec<Vec<usize>>, declared: usize) -> Self {
        let mut offsets = Vec::with_capacity(clusters.len() + 1);
        let mut dup_map = Vec::new();
        let mut weights = Vec::with_capacity(clusters.len());
        offsets.push(0);
        for (l, c) in clusters.iter().enumerate() {
            dup_map.extend(c.iter().map(|&j| (l, j)));
            offsets.push(dup_map.len());
            weights.push((c.len() as f64).sqrt());
        }
        Self {
            p,
            clusters,
            weights,
            offsets,
            dup_map,
            declared,
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// Number of clusters supplied by the caller, before singleton wrapping.
    pub fn n_declared(&self) -> usize {
        self.declared
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn cluster(&self, l: usize) -> &[usize] {
        &self.clusters[l]
    }

    pub fn size(&self, l: usize) -> usize {
        self.clusters[l].len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(Vec::len).collect()
    }

    /// Group weights `sqrt(p_l)`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn expanded_dim(&self) -> usize {
        self.dup_map.len()
    }

    /// `(cluster, original feature)` for every expanded coordinate.
    pub fn dup_map(&self) -> &[(usize, usize)] {
        &self.dup_map
    }

    /// Range of expanded coordinates belonging to cluster `l`.
    pub fn block(&self, l: usize) -> Range<usize> {
        self.offsets[l]..self.offsets[l + 1]
    }

    pub fn blocks(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        self.offsets.windows(2).map(|w| w[0]..w[1])
    }

    pub fn all_singletons(&self) -> bool {
        self.clusters.iter().all(|c| c.len() == 1)
    }

    /// True when no feature appears in more than one cluster.
    pub fn is_partition(&self) -> bool {
        self.dup_map.len() == self.p
    }

    /// Duplicates the columns of `x` into the expanded `n x P` design.
    pub fn duplicate(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.p {
            return Err(Error::InvalidStructure(format!(
                "design has {} columns but the cluster structure expects {}",
                x.ncols(),
                self.p
            )));
        }
        let mut out = Array2::zeros((x.nrows(), self.expanded_dim()));
        for (k, &(_, j)) in self.dup_map.iter().enumerate() {
            out.column_mut(k).assign(&x.column(j));
        }
        Ok(out)
    }

    /// Sums duplicated coordinates back into the original `p` features.
    pub fn recombine(&self, v: ArrayView1<f64>) -> Result<Array1<f64>> {
        if v.len() != self.expanded_dim() {
            return Err(Error::InvalidInput(format!(
                "expanded vector has length {} but P = {}",
                v.len(),
                self.expanded_dim()
            )));
        }
        let mut beta = Array1::zeros(self.p);
        for (&(_, j), &x) in self.dup_map.iter().zip(v.iter()) {
            beta[j] += x;
        }
        Ok(beta)
    }

    /// Gathers an original-space vector into the expanded space
    /// (`out[k] = g[dup_map[k].1]`); the adjoint of [`recombine`](Self::recombine).
    pub fn gather(&self, g: ArrayView1<f64>) -> Array1<f64> {
        self.dup_map.iter().map(|&(_, j)| g[j]).collect()
    }

    /// Errors unless the structure was built for `p` features.
    pub fn check_p(&self, p: usize) -> Result<()> {
        if self.p != p {
            return Err(Error::InvalidStructure(format!(
                "cluster structure is for p = {} but data has p = {p}",
                self.p
            )));
        }
        Ok(())
    }
}
