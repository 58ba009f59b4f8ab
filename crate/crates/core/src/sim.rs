//! Simulation designs: feature-cluster layouts, subgroup coefficient
//! patterns, AR(1)-correlated Gaussian covariates and heavy-tailed errors.
//!
//! Listings are written with 1-based gene indices, as printed in the design
//! tables, and converted to 0-based indices on output.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::clusters::ClusterStructure;
use crate::error::{Error, Result};
use crate::model::{Dataset, Partition};

/// Number of features of the high-dimensional scenarios.
pub const P_HIGH: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Scenario {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
    /// Low-dimensional layout with `p` in {10, 20, 32, 50}.
    LowDim(usize),
    Custom(CustomDesign),
}

/// User-supplied design: 0-based clusters and one coefficient vector per
/// subgroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomDesign {
    pub p: usize,
    pub clusters: Vec<Vec<usize>>,
    pub betas: Vec<Vec<f64>>,
}

impl Scenario {
    pub fn p(&self) -> usize {
        match self {
            Scenario::LowDim(p) => *p,
            Scenario::Custom(c) => c.p,
            _ => P_HIGH,
        }
    }

    pub fn is_high_dimensional(&self) -> bool {
        !matches!(self, Scenario::LowDim(_) | Scenario::Custom(_))
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::S1 => write!(f, "S1"),
            Scenario::S2 => write!(f, "S2"),
            Scenario::S3 => write!(f, "S3"),
            Scenario::S4 => write!(f, "S4"),
            Scenario::S5 => write!(f, "S5"),
            Scenario::S6 => write!(f, "S6"),
            Scenario::LowDim(p) => write!(f, "lowdim{p}"),
            Scenario::Custom(_) => write!(f, "custom"),
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "s1" => Scenario::S1,
            "s2" => Scenario::S2,
            "s3" => Scenario::S3,
            "s4" => Scenario::S4,
            "s5" => Scenario::S5,
            "s6" => Scenario::S6,
            "lowdim10" => Scenario::LowDim(10),
            "lowdim20" => Scenario::LowDim(20),
            "lowdim32" => Scenario::LowDim(32),
            "lowdim50" => Scenario::LowDim(50),
            other => return Err(Error::InvalidInput(format!("unknown scenario '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Balance {
    /// Two subgroups of equal size.
    Balanced,
    /// Two subgroups in a 7:3 ratio.
    Unbalanced,
    /// Three subgroups of equal size.
    ThreeEqual,
}

impl FromStr for Balance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "balanced" => Balance::Balanced,
            "unbalanced" => Balance::Unbalanced,
            "three" | "three-equal" => Balance::ThreeEqual,
            other => return Err(Error::InvalidInput(format!("unknown balance '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorLaw {
    /// Student t with one degree of freedom (standard Cauchy).
    T1,
    /// `0.7 N(0, 1) + 0.3 t(1)`.
    Mix,
    Gauss,
}

impl FromStr for ErrorLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "t1" => ErrorLaw::T1,
            "mix" => ErrorLaw::Mix,
            "gauss" => ErrorLaw::Gauss,
            other => return Err(Error::InvalidInput(format!("unknown error law '{other}'"))),
        })
    }
}

/// Mixture component an error draw came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorBranch {
    Normal,
    Cauchy,
}

pub fn draw_error<R: Rng + ?Sized>(law: ErrorLaw, rng: &mut R) -> (f64, ErrorBranch) {
    let cauchy = Cauchy::new(0.0, 1.0).expect("unit scale");
    match law {
        ErrorLaw::Gauss => (rng.sample(StandardNormal), ErrorBranch::Normal),
        ErrorLaw::T1 => (cauchy.sample(rng), ErrorBranch::Cauchy),
        ErrorLaw::Mix => {
            if rng.random_bool(0.7) {
                (rng.sample(StandardNormal), ErrorBranch::Normal)
            } else {
                (cauchy.sample(rng), ErrorBranch::Cauchy)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub n: usize,
    pub balance: Balance,
    pub error: ErrorLaw,
    pub noise_scale: f64,
    pub rho: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario, n: usize, balance: Balance, error: ErrorLaw, seed: u64) -> Self {
        Self {
            scenario,
            n,
            balance,
            error,
            noise_scale: 0.5,
            rho: 0.5,
            seed,
        }
    }
}

/// True partition and coefficients of a simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub partition: Partition,
    /// `K x p` coefficient matrix.
    pub betas: Array2<f64>,
    /// `betas != 0`, elementwise.
    pub supports: Array2<bool>,
}

impl GroundTruth {
    pub fn k(&self) -> usize {
        self.betas.nrows()
    }
}

/// `count` clusters of `size` consecutive genes, the first starting at
/// `first` and each subsequent one `step` genes later (1-based, inclusive).
fn run(first: usize, size: usize, step: usize, count: usize) -> Vec<Vec<usize>> {
    (0..count)
        .map(|c| {
            let start = first + c * step;
            (start..start + size).collect()
        })
        .collect()
}

fn singles(first: usize, last: usize) -> Vec<Vec<usize>> {
    (first..=last).map(|j| vec![j]).collect()
}

/// Cluster listings with 1-based indices, before clamping to `p`.
pub fn cluster_listing(scenario: &Scenario) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    match scenario {
        // Ten genes per cluster, two shared with the predecessor.
        Scenario::S1 => out.extend(run(1, 10, 8, 24)),
        // Ten genes per cluster, five shared with the predecessor.
        Scenario::S2 => out.extend(run(1, 10, 5, 39)),
        Scenario::S3 => {
            out.extend(run(1, 10, 8, 13));
            out.extend(run(102, 10, 5, 5));
            out.extend(run(132, 10, 10, 7));
        }
        Scenario::S4 => {
            out.extend(run(1, 5, 3, 2));
            out.extend(run(7, 10, 8, 2));
            out.extend(run(23, 3, 1, 2));
            out.extend(run(25, 15, 13, 2));
            out.extend(run(51, 20, 18, 1));
            out.extend(run(69, 3, 1, 5));
            out.extend(run(74, 5, 3, 5));
            out.extend(run(89, 10, 8, 5));
            out.extend(run(129, 15, 13, 2));
            out.extend(run(155, 20, 18, 2));
            out.extend(singles(193, 200));
        }
        Scenario::S5 => {
            out.extend(run(1, 6, 1, 2));
            out.extend(run(3, 8, 3, 2));
            out.extend(run(9, 10, 5, 2));
            out.extend(run(19, 15, 10, 2));
            out.extend(run(39, 20, 15, 2));
            out.extend(run(69, 6, 1, 3));
            out.extend(run(72, 8, 3, 3));
            out.extend(run(81, 10, 5, 5));
            out.extend(run(106, 15, 10, 5));
            out.extend(run(156, 20, 15, 2));
            out.extend(singles(191, 200));
        }
        Scenario::S6 => {
            out.extend(run(1, 3, 1, 2));
            out.extend(run(3, 5, 3, 2));
            out.extend(run(9, 10, 8, 2));
            out.extend(run(25, 15, 13, 2));
            out.extend(run(51, 20, 18, 2));
            out.extend(run(87, 5, 3, 3));
            out.extend(run(96, 6, 4, 3));
            out.extend(run(108, 8, 6, 3));
            out.extend(run(126, 10, 5, 2));
            out.extend(run(136, 15, 10, 2));
            out.extend(run(156, 20, 15, 2));
            out.extend(singles(191, 200));
        }
        Scenario::LowDim(p) => {
            let (count, size) = match p {
                10 => (2, 6),
                20 => (3, 8),
                32 => (5, 8),
                50 => (6, 10),
                other => {
                    return Err(Error::InvalidInput(format!(
                        "low-dimensional layouts exist for p in {{10, 20, 32, 50}}, got {other}"
                    )))
                }
            };
            out.extend(run(1, size, size - 2, count));
        }
        Scenario::Custom(c) => {
            out.extend(c.clusters.iter().map(|cl| cl.iter().map(|j| j + 1).collect()));
        }
    }
    Ok(out)
}

/// Cluster structure of a scenario. Listed indices beyond `p` are dropped.
pub fn gen_clusters(scenario: &Scenario) -> Result<ClusterStructure> {
    let p = scenario.p();
    let listing = cluster_listing(scenario)?;
    let clusters = listing
        .into_iter()
        .map(|c| c.into_iter().filter(|&j| j <= p).map(|j| j - 1).collect::<Vec<_>>())
        .filter(|c| !c.is_empty())
        .collect();
    ClusterStructure::new(p, clusters)
}

/// One printed coefficient listing: 1-based genes and their values.
#[derive(Debug, Clone, PartialEq)]
pub struct Listing {
    pub genes: &'static [usize],
    pub coefficients: &'static [f64],
}

const SUB1: Listing = Listing {
    genes: &[1, 3, 6, 9, 10, 11, 13, 16, 20, 21, 25, 27, 29, 31, 33],
    coefficients: &[2.0, 1.0, 0.5, -1.0, 1.5, 0.5, -1.0, 2.0, -1.0, 0.5, -1.0, 0.5, 1.5, 0.5, 1.0],
};
const SUB2: Listing = Listing {
    genes: &[2, 3, 5, 9, 10, 12, 14, 17, 18, 19, 22, 23, 26, 31, 33],
    coefficients: &[-2.0, 1.0, -2.0, -1.0, 0.5, 1.5, 1.0, -1.0, -0.5, 2.0, -0.5, 1.0, -2.0, -0.5, -1.0],
};
// Printed with a leading 0; gene 0 is read as gene 1.
const SUB3: Listing = Listing {
    genes: &[0, 3, 4, 6, 7, 10, 11, 12, 15, 17, 24, 25, 31, 32, 34],
    coefficients: &[-1.0, 1.0, -2.0, -0.5, 1.0, 2.0, -1.0, 2.0, 0.5, -1.0, 1.0, 1.5, 0.5, 1.0, -1.5],
};
const LOW10: [Listing; 2] = [
    Listing { genes: &[1, 2, 4], coefficients: &[2.0, 1.0, 0.5] },
    Listing { genes: &[3, 4, 6], coefficients: &[-2.0, 1.0, -0.5] },
];
const LOW20: [Listing; 2] = [
    Listing { genes: &[1, 2, 6, 8, 10, 11], coefficients: &[2.0, 1.0, 0.5, -1.0, 1.5, -2.0] },
    Listing { genes: &[1, 3, 4, 7, 10, 14], coefficients: &[-2.0, 1.0, 0.5, -1.0, 1.5, 2.0] },
];
// The first listing prints five genes against six coefficients; the
// surplus trailing coefficient is dropped.
const LOW32_50: [Listing; 2] = [
    Listing { genes: &[1, 8, 10, 13, 16], coefficients: &[2.0, 1.0, 0.5, -1.0, 1.5, -2.0] },
    Listing { genes: &[1, 4, 7, 10, 14, 19], coefficients: &[-2.0, 1.0, 0.5, -1.0, 1.5, 2.0] },
];

/// Printed coefficient listings for a scenario and subgroup structure.
pub fn coefficient_listings(scenario: &Scenario, balance: Balance) -> Result<Vec<Listing>> {
    match (scenario, balance) {
        (Scenario::LowDim(10), Balance::Balanced) => Ok(LOW10.to_vec()),
        (Scenario::LowDim(20), Balance::Balanced) => Ok(LOW20.to_vec()),
        (Scenario::LowDim(32 | 50), Balance::Balanced) => Ok(LOW32_50.to_vec()),
        (Scenario::LowDim(_), _) => Err(Error::InvalidInput(format!(
            "{scenario} is only defined for the balanced two-subgroup structure"
        ))),
        (Scenario::Custom(_), _) => Err(Error::InvalidInput(
            "custom designs carry their own coefficients".into(),
        )),
        (_, Balance::ThreeEqual) => Ok(vec![SUB1, SUB2, SUB3]),
        (_, _) => Ok(vec![SUB1, SUB2]),
    }
}

/// Coefficient matrix (`K x p`) of a scenario.
pub fn gen_truth(scenario: &Scenario, balance: Balance) -> Result<Array2<f64>> {
    if let Scenario::Custom(c) = scenario {
        let k = c.betas.len();
        let want_k = match balance {
            Balance::ThreeEqual => Some(3),
            Balance::Unbalanced => Some(2),
            Balance::Balanced => None,
        };
        if k == 0 || want_k.is_some_and(|w| w != k) || c.betas.iter().any(|b| b.len() != c.p) {
            return Err(Error::InvalidInput(format!(
                "custom design has {k} coefficient vectors incompatible with {balance:?} or p = {}",
                c.p
            )));
        }
        return Ok(Array2::from_shape_fn((k, c.p), |(g, j)| c.betas[g][j]));
    }
    let p = scenario.p();
    let listings = coefficient_listings(scenario, balance)?;
    let mut betas = Array2::zeros((listings.len(), p));
    for (g, l) in listings.iter().enumerate() {
        for (&gene, &coef) in l.genes.iter().zip(l.coefficients) {
            let j = gene.max(1) - 1;
            betas[[g, j]] = coef;
        }
    }
    Ok(betas)
}

/// Subgroup sizes: equal split with the remainder going to the first
/// subgroups, or `floor(0.7 n)` and the rest.
pub fn subgroup_sizes(n: usize, k: usize, balance: Balance) -> Vec<usize> {
    match balance {
        Balance::Unbalanced if k == 2 => {
            let first = (7 * n) / 10;
            vec![first, n - first]
        }
        _ => {
            let base = n / k;
            let rem = n % k;
            (0..k).map(|g| base + usize::from(g < rem)).collect()
        }
    }
}

/// Rows of `N(0, S)` with `S_jk = rho^|j - k|`, via the AR(1) recursion.
pub fn ar1_design<R: Rng + ?Sized>(n: usize, p: usize, rho: f64, rng: &mut R) -> Array2<f64> {
    let innov = (1.0 - rho * rho).sqrt();
    let mut x = Array2::zeros((n, p));
    for mut row in x.rows_mut() {
        let mut prev: f64 = rng.sample(StandardNormal);
        row[0] = prev;
        for j in 1..p {
            let z: f64 = rng.sample(StandardNormal);
            prev = rho * prev + innov * z;
            row[j] = prev;
        }
    }
    x
}

pub fn gen_dataset(spec: &ScenarioSpec) -> Result<(Dataset, GroundTruth)> {
    if !(spec.rho.abs() < 1.0) {
        return Err(Error::InvalidInput(format!("AR coefficient must lie in (-1, 1), got {}", spec.rho)));
    }
    if !(spec.noise_scale >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "noise scale must be non-negative, got {}",
            spec.noise_scale
        )));
    }
    let betas = gen_truth(&spec.scenario, spec.balance)?;
    let (k, p) = betas.dim();
    if spec.n < k {
        return Err(Error::InvalidInput(format!("n = {} is smaller than K = {k}", spec.n)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let x = ar1_design(spec.n, p, spec.rho, &mut rng);

    let sizes = subgroup_sizes(spec.n, k, spec.balance);
    let mut labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(g, &s)| std::iter::repeat_n(g, s))
        .collect();
    labels.shuffle(&mut rng);

    let mut y = Array1::zeros(spec.n);
    for i in 0..spec.n {
        let (eps, _) = draw_error(spec.error, &mut rng);
        y[i] = x.row(i).dot(&betas.row(labels[i])) + spec.noise_scale * eps;
    }
    let supports = betas.mapv(|b| b != 0.0);
    let partition = Partition::new(labels, k)?;
    Ok((
        Dataset::new(y, x, None)?,
        GroundTruth {
            partition,
            betas,
            supports,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_based(cs: &ClusterStructure, l: usize) -> Vec<usize> {
        cs.cluster(l).iter().map(|j| j + 1).collect()
    }

    #[test]
    fn s1_layout() {
        let cs = gen_clusters(&Scenario::S1).unwrap();
        assert_eq!(cs.n_declared(), 24);
        assert!(cs.sizes()[..24].iter().all(|&s| s == 10));
        assert_eq!(one_based(&cs, 0), (1..=10).collect::<Vec<_>>());
        for l in 1..24 {
            let shared = cs.cluster(l).iter().filter(|j| cs.cluster(l - 1).contains(j)).count();
            assert_eq!(shared, 2);
        }
    }

    #[test]
    fn s2_layout() {
        let cs = gen_clusters(&Scenario::S2).unwrap();
        assert_eq!(cs.n_clusters(), 39);
        assert_eq!(cs.expanded_dim(), 390);
        assert_eq!(one_based(&cs, 38), (191..=200).collect::<Vec<_>>());
    }

    #[test]
    fn s3_clamps_last_cluster() {
        let cs = gen_clusters(&Scenario::S3).unwrap();
        assert_eq!(cs.n_declared(), 25);
        assert_eq!(one_based(&cs, 24), (192..=200).collect::<Vec<_>>());
        assert_eq!(cs.n_clusters(), 25);
    }

    #[test]
    fn unequal_layouts_match_size_counts() {
        let count = |cs: &ClusterStructure, s: usize| cs.sizes().iter().filter(|&&x| x == s).count();
        let s4 = gen_clusters(&Scenario::S4).unwrap();
        assert_eq!(s4.n_clusters(), 36);
        assert_eq!(
            [1, 3, 5, 10, 15, 20].map(|s| count(&s4, s)),
            [8, 7, 7, 7, 4, 3]
        );
        let s5 = gen_clusters(&Scenario::S5).unwrap();
        assert_eq!(s5.n_clusters(), 38);
        assert_eq!([1, 6, 8, 10, 15, 20].map(|s| count(&s5, s)), [10, 5, 5, 7, 7, 4]);
        let s6 = gen_clusters(&Scenario::S6).unwrap();
        assert_eq!(s6.n_clusters(), 35);
        assert_eq!(
            [1, 3, 5, 6, 8, 10, 15, 20].map(|s| count(&s6, s)),
            [10, 2, 5, 3, 3, 4, 4, 4]
        );
        for cs in [&s4, &s5, &s6] {
            assert_eq!(cs.n_declared(), cs.n_clusters(), "every gene is listed");
        }
    }

    #[test]
    fn lowdim_layouts() {
        let cs = gen_clusters(&Scenario::LowDim(10)).unwrap();
        assert_eq!(cs.n_clusters(), 2);
        assert_eq!(one_based(&cs, 1), (5..=10).collect::<Vec<_>>());
        for (p, count, size) in [(20, 3, 8), (32, 5, 8), (50, 6, 10)] {
            let cs = gen_clusters(&Scenario::LowDim(p)).unwrap();
            assert_eq!(cs.n_declared(), count);
            assert_eq!(cs.n_clusters(), count);
            assert!(cs.sizes().iter().all(|&s| s == size));
        }
        assert!(gen_clusters(&Scenario::LowDim(11)).is_err());
    }

    #[test]
    fn two_subgroup_truth() {
        let b = gen_truth(&Scenario::S1, Balance::Balanced).unwrap();
        assert_eq!(b.dim(), (2, 200));
        assert_eq!(b[[0, 0]], 2.0);
        assert_eq!(b[[0, 32]], 1.0);
        for g in 0..2 {
            assert_eq!(b.row(g).iter().filter(|&&v| v != 0.0).count(), 15);
        }
        let shared: Vec<usize> = (0..200).filter(|&j| b[[0, j]] != 0.0 && b[[1, j]] != 0.0).map(|j| j + 1).collect();
        assert_eq!(shared, vec![3, 9, 10, 31, 33]);
        assert_eq!(b[[0, 2]], b[[1, 2]]);
        assert_eq!(b[[0, 8]], b[[1, 8]]);
    }

    #[test]
    fn three_subgroup_truth() {
        let b = gen_truth(&Scenario::S1, Balance::ThreeEqual).unwrap();
        assert_eq!(b.nrows(), 3);
        assert_eq!(b.row(2).iter().filter(|&&v| v != 0.0).count(), 15);
        assert_eq!(b[[2, 0]], -1.0);
        assert!(b[[0, 2]] == b[[1, 2]] && b[[1, 2]] == b[[2, 2]]);
        let shared: Vec<usize> = (0..200)
            .filter(|&j| (0..3).all(|g| b[[g, j]] != 0.0))
            .map(|j| j + 1)
            .collect();
        assert_eq!(shared, vec![3, 10, 31]);
        assert!(gen_truth(&Scenario::LowDim(10), Balance::ThreeEqual).is_err());
    }

    #[test]
    fn sizes_follow_balance() {
        assert_eq!(subgroup_sizes(300, 2, Balance::Balanced), vec![150, 150]);
        assert_eq!(subgroup_sizes(300, 2, Balance::Unbalanced), vec![210, 90]);
        assert_eq!(subgroup_sizes(301, 3, Balance::ThreeEqual), vec![101, 100, 100]);
    }

    #[test]
    fn dataset_shape_and_determinism() {
        let spec = ScenarioSpec::new(Scenario::S1, 300, Balance::Unbalanced, ErrorLaw::Mix, 7);
        let (d1, t1) = gen_dataset(&spec).unwrap();
        let (d2, t2) = gen_dataset(&spec).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(t1, t2);
        assert_eq!((d1.n(), d1.p()), (300, 200));
        assert_eq!(t1.partition.sizes(), vec![210, 90]);
        assert_eq!(t1.supports, t1.betas.mapv(|b| b != 0.0));
        // Labels are shuffled across rows.
        assert!(t1.partition.labels()[..210].iter().any(|&g| g == 1));
    }

    #[test]
    fn zero_noise_is_exactly_linear() {
        let mut spec = ScenarioSpec::new(Scenario::LowDim(20), 40, Balance::Balanced, ErrorLaw::Gauss, 1);
        spec.noise_scale = 0.0;
        let (d, t) = gen_dataset(&spec).unwrap();
        for i in 0..d.n() {
            let g = t.partition.labels()[i];
            assert_eq!(d.y()[i], d.x().row(i).dot(&t.betas.row(g)));
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("S4".parse::<Scenario>().unwrap(), Scenario::S4);
        assert_eq!("lowdim32".parse::<Scenario>().unwrap(), Scenario::LowDim(32));
        assert!("S7".parse::<Scenario>().is_err());
        assert_eq!("three".parse::<Balance>().unwrap(), Balance::ThreeEqual);
        assert_eq!("mix".parse::<ErrorLaw>().unwrap(), ErrorLaw::Mix);
    }
}
