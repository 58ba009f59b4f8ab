//! JSON artifacts: fitted models, simulated truth and run manifests.

use std::path::Path;

use hetreg::{EngineConfig, FitResult, Partition, SubgroupModel};
use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::io::ClusterFile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupEntry {
    /// 1-based subgroup label.
    pub label: usize,
    pub size: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub delta: f64,
    pub intercept: Option<f64>,
    /// Nonzero coefficients as (1-based feature index, value).
    pub coefficients: Vec<(usize, f64)>,
    /// Nonzero latent coordinates in the duplicated space as (1-based
    /// position, value); they recombine to `coefficients`.
    pub latent: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartEntry {
    pub start: usize,
    pub stream: u64,
    pub iterations: usize,
    pub converged: bool,
    pub objective: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFile {
    pub k: usize,
    pub n: usize,
    pub p: usize,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub best_start: usize,
    pub features: Vec<String>,
    /// Penalty scale of each feature (standard deviation when standardized).
    pub column_scale: Vec<f64>,
    /// Clusters the penalty was evaluated on (1-based feature indices).
    pub clusters: Vec<Vec<usize>>,
    pub subgroups: Vec<SubgroupEntry>,
    pub starts: Vec<StartEntry>,
    pub config: EngineConfig,
}

fn sparse(v: &Array1<f64>) -> Vec<(usize, f64)> {
    v.iter()
        .enumerate()
        .filter(|(_, &b)| b != 0.0)
        .map(|(j, &b)| (j + 1, b))
        .collect()
}

fn dense(entries: &[(usize, f64)], len: usize, what: &str) -> Result<Array1<f64>, CliError> {
    let mut v = Array1::zeros(len);
    for &(j, b) in entries {
        if j == 0 || j > len {
            return Err(CliError::Data(format!("{what} index {j} outside 1..={len}")));
        }
        v[j - 1] = b;
    }
    Ok(v)
}

impl FitFile {
    pub fn new(res: &FitResult, features: &[String]) -> Self {
        let sizes = res.partition.sizes();
        FitFile {
            k: res.k(),
            n: res.partition.n(),
            p: res.column_scale.len(),
            objective: res.objective,
            converged: res.converged,
            iterations: res.iterations,
            best_start: res.best_start,
            features: features.to_vec(),
            column_scale: res.column_scale.to_vec(),
            clusters: ClusterFile::from_structure(&res.structure).clusters,
            subgroups: res
                .models
                .iter()
                .enumerate()
                .map(|(g, m)| SubgroupEntry {
                    label: g + 1,
                    size: sizes[g],
                    lambda: m.lambda,
                    gamma: m.gamma,
                    delta: m.delta,
                    intercept: m.intercept,
                    coefficients: sparse(&m.beta),
                    latent: m.expanded_v.as_ref().map(sparse).unwrap_or_default(),
                })
                .collect(),
            starts: res
                .starts
                .iter()
                .map(|s| StartEntry {
                    start: s.start,
                    stream: s.stream,
                    iterations: s.iterations,
                    converged: s.converged,
                    objective: s.objective,
                    error: s.error.clone(),
                })
                .collect(),
            config: res.config.clone(),
        }
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    pub fn structure(&self) -> Result<hetreg::ClusterStructure, CliError> {
        let names = (1..=self.clusters.len()).map(|l| format!("c{l}")).collect();
        ClusterFile { names, clusters: self.clusters.clone() }.structure(self.p)
    }

    pub fn models(&self) -> Result<Vec<SubgroupModel>, CliError> {
        let dim = self.structure()?.expanded_dim();
        self.subgroups
            .iter()
            .map(|s| {
                Ok(SubgroupModel {
                    beta: dense(&s.coefficients, self.p, "coefficient")?,
                    intercept: s.intercept,
                    lambda: s.lambda,
                    gamma: s.gamma,
                    delta: s.delta,
                    expanded_v: Some(dense(&s.latent, dim, "latent")?),
                })
            })
            .collect()
    }

    pub fn betas(&self) -> Result<ndarray::Array2<f64>, CliError> {
        let models = self.models()?;
        Ok(ndarray::Array2::from_shape_fn((self.k, self.p), |(g, j)| models[g].beta[j]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub scenario: String,
    pub balance: String,
    pub error: String,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    /// 1-based subgroup of each row of data.csv.
    pub labels: Vec<usize>,
    /// `k x p` coefficients.
    pub betas: Vec<Vec<f64>>,
}

impl TruthFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let t: TruthFile = serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if t.labels.len() != t.n || t.betas.len() != t.k || t.betas.iter().any(|b| b.len() != t.p) {
            return Err(CliError::Data(format!("{}: inconsistent dimensions", path.display())));
        }
        if t.labels.iter().any(|&g| g == 0 || g > t.k) {
            return Err(CliError::Data(format!("{}: labels must lie in 1..={}", path.display(), t.k)));
        }
        Ok(t)
    }

    pub fn ground_truth(&self) -> Result<hetreg::sim::GroundTruth, CliError> {
        let betas = ndarray::Array2::from_shape_fn((self.k, self.p), |(g, j)| self.betas[g][j]);
        Ok(hetreg::sim::GroundTruth {
            partition: Partition::new(self.labels.iter().map(|g| g - 1).collect(), self.k)?,
            supports: betas.mapv(|b| b != 0.0),
            betas,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub threads: usize,
    pub wall_time_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<serde_json::Value>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
