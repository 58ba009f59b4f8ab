//! Shared domain types: data, partitions, fitted subgroup models and the
//! result of a full multi-start fit.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::clusters::ClusterStructure;
use crate::engine::EngineConfig;
use crate::error::{Error, Result};

/// Response vector and dense design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Array1<f64>,
    x: Array2<f64>,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(y: Array1<f64>, x: Array2<f64>, feature_names: Option<Vec<String>>) -> Result<Self> {
        if y.is_empty() || x.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "dataset needs n >= 1 and p >= 1, got n = {}, p = {}",
                y.len(),
                x.ncols()
            )));
        }
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "design has {} rows but response has length {}",
                x.nrows(),
                y.len()
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("response entry {i} is not finite")));
        }
        if let Some(((i, j), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("design entry ({i}, {j}) is not finite")));
        }
        if let Some(names) = &feature_names {
            if names.len() != x.ncols() {
                return Err(Error::DimensionMismatch(format!(
                    "{} feature names for {} columns",
                    names.len(),
                    x.ncols()
                )));
            }
        }
        Ok(Self { y, x, feature_names })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> ArrayView1<'_, f64> {
        self.y.view()
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Rows selected by `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            y: self.y.select(Axis(0), indices),
            x: self.x.select(Axis(0), indices),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Subgroup labels, stored 0-based (`0..k`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidInput("a partition needs k >= 1".into()));
        }
        if let Some(i) = labels.iter().position(|&g| g >= k) {
            return Err(Error::InvalidInput(format!(
                "label {} of sample {i} is outside 0..{k}",
                labels[i]
            )));
        }
        Ok(Self { labels, k })
    }

    /// Builds a partition from arbitrary labels, using `max + 1` groups.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().copied().max().map_or(1, |m| m + 1);
        Self::new(labels, k)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &g in &self.labels {
            s[g] += 1;
        }
        s
    }

    pub fn members(&self, group: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &g)| (g == group).then_some(i))
            .collect()
    }

    pub fn all_nonempty(&self) -> bool {
        self.sizes().iter().all(|&s| s > 0)
    }

    pub(crate) fn set(&mut self, i: usize, group: usize) {
        debug_assert!(group < self.k);
        self.labels[i] = group;
    }

    /// Relabels groups so that they appear in order of first occurrence.
    pub fn canonical(&self) -> Partition {
        let mut map = vec![usize::MAX; self.k];
        let mut next = 0;
        let labels = self
            .labels
            .iter()
            .map(|&g| {
                if map[g] == usize::MAX {
                    map[g] = next;
                    next += 1;
                }
                map[g]
            })
            .collect();
        Partition { labels, k: self.k }
    }
}

/// A fitted per-subgroup regression.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgroupModel {
    pub beta: Array1<f64>,
    pub intercept: Option<f64>,
    pub lambda: f64,
    pub gamma: f64,
    pub delta: f64,
    /// Latent decomposition in the expanded space; recombines to `beta`.
    pub expanded_v: Option<Array1<f64>>,
}

impl SubgroupModel {
    pub fn predict(&self, x: ArrayView1<f64>) -> f64 {
        x.dot(&self.beta) + self.intercept.unwrap_or(0.0)
    }

    pub fn predict_all(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let mut out = x.dot(&self.beta);
        if let Some(b) = self.intercept {
            out += b;
        }
        out
    }

    pub fn nonzeros(&self) -> usize {
        self.beta.iter().filter(|&&b| b != 0.0).count()
    }
}

/// Diagnostics of one random start.
#[derive(Debug, Clone, PartialEq)]
pub struct StartRecord {
    pub start: usize,
    /// Seed of the start's random stream (master seed and stream index).
    pub seed: u64,
    pub stream: u64,
    pub initial_partition: Option<Partition>,
    pub iterations: usize,
    pub converged: bool,
    pub objective: Option<f64>,
    pub error: Option<String>,
}

/// Output of a multi-start fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub partition: Partition,
    pub models: Vec<SubgroupModel>,
    pub objective: f64,
    pub starts: Vec<StartRecord>,
    pub config: EngineConfig,
    /// Column scales used when the penalty was applied on standardized
    /// covariates (all ones otherwise). The penalty of `beta_j` is evaluated
    /// on `beta_j * column_scale[j]`.
    pub column_scale: Array1<f64>,
    /// Cluster structure the penalty was evaluated on (all singletons for
    /// the lasso structure).
    pub structure: ClusterStructure,
    pub best_start: usize,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn k(&self) -> usize {
        self.models.len()
    }

    pub fn betas(&self) -> Vec<Array1<f64>> {
        self.models.iter().map(|m| m.beta.clone()).collect()
    }
}
