//! Robust heterogeneity analysis for high-dimensional linear regression.
//!
//! Samples are partitioned into `K` latent subgroups, each with its own
//! sparse coefficient vector. Coefficients are estimated under a Huber loss
//! with a sparse overlapping group lasso penalty over (possibly overlapping)
//! feature clusters; subgroup memberships are found by alternating
//! per-subgroup fits with Huber-nearest reassignment over many random starts.

pub mod clusters;
pub mod engine;
pub mod error;
pub mod huber;
pub mod metrics;
pub mod model;
pub mod selection;
pub mod sim;
pub mod solver;

pub use clusters::ClusterStructure;
pub use engine::{EngineConfig, Loss, Structure, Tuning};
pub use error::{Error, Result};
pub use huber::{compute_delta, huber_grad, huber_value, Huber, HuberSpec};
pub use model::{Dataset, FitResult, Partition, StartRecord, SubgroupModel};
pub use selection::TuningGrid;
pub use solver::{SolverOptions, SolverSolution};
