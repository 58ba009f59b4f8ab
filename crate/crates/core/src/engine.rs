//! Alternating estimation of subgroup memberships and subgroup-specific
//! sparse coefficients.
//!
//! Each random start assigns samples to `K` groups at random, then repeats an
//! update step (one penalized Huber fit per subgroup) and an assignment step
//! (each sample moves to the subgroup with the smallest Huber loss, smallest
//! index on ties) until the objective changes by less than `outer_tol`. The
//! start with the lowest final objective wins.

use std::borrow::Cow;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clusters::ClusterStructure;
use crate::error::{Error, Result};
use crate::huber::{compute_delta, median, response_scale, Huber, HuberSpec};
use crate::model::{Dataset, FitResult, Partition, StartRecord, SubgroupModel};
use crate::selection::{assign_folds, cv_select_with_folds, TuningGrid};
use crate::solver::{self, penalty, Dense, Duplicated, SolverOptions, WarmStart};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Huber,
    /// Least squares, realised as a Huber loss whose threshold is never
    /// reached (`1e12` times the response scale).
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    /// Use the supplied (possibly overlapping) clusters.
    Clusters,
    /// Ignore the clusters: every feature is its own group, i.e. a lasso.
    Lasso,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tuning {
    Fixed { lambda: f64, gamma: f64 },
    CvInLoop(TuningGrid),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaRule {
    /// Recompute each subgroup's threshold from its residuals at every
    /// update step.
    Adaptive,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub k: usize,
    pub starts: usize,
    pub outer_tol: f64,
    pub max_outer_iter: usize,
    pub loss: Loss,
    pub structure: Structure,
    pub seed: u64,
    pub standardize: bool,
    pub intercept: bool,
    pub tuning: Tuning,
    pub delta_rule: DeltaRule,
    /// Options for the per-subgroup fits (the intercept flag is taken from
    /// `intercept`).
    pub solver: SolverOptions,
    /// Convergence tolerance of the fits inside cross-validation.
    pub cv_tol: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            k: 2,
            starts: 20,
            outer_tol: 1e-3,
            max_outer_iter: 100,
            loss: Loss::Huber,
            structure: Structure::Clusters,
            seed: 0,
            standardize: true,
            intercept: true,
            tuning: Tuning::CvInLoop(TuningGrid::default()),
            delta_rule: DeltaRule::Adaptive,
            solver: SolverOptions {
                tol: 1e-5,
                ..SolverOptions::default()
            },
            cv_tol: 1e-2,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        if self.starts == 0 {
            return Err(Error::InvalidConfig("at least one start is required".into()));
        }
        if !(self.outer_tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "outer_tol must be positive, got {}",
                self.outer_tol
            )));
        }
        if self.max_outer_iter == 0 {
            return Err(Error::InvalidConfig("max_outer_iter must be at least 1".into()));
        }
        if !(self.cv_tol > 0.0) {
            return Err(Error::InvalidConfig(format!("cv_tol must be positive, got {}", self.cv_tol)));
        }
        self.solver.validate()?;
        match &self.tuning {
            Tuning::Fixed { lambda, gamma } => solver::check_penalty_params(*lambda, *gamma)
                .map_err(|e| Error::InvalidConfig(e.to_string()))?,
            Tuning::CvInLoop(grid) => grid.validate()?,
        }
        if let DeltaRule::Fixed(d) = self.delta_rule {
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::InvalidConfig(format!("fixed delta must be positive, got {d}")));
            }
        }
        Ok(())
    }

    fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            intercept: self.intercept,
            ..self.solver
        }
    }

    fn cv_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.cv_tol,
            record_trace: false,
            ..self.solver_options()
        }
    }
}

/// Random stream of start `start`: the master seed with the start index as
/// ChaCha stream id, so results do not depend on how starts are scheduled.
pub fn start_rng(seed: u64, start: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(start as u64);
    rng
}

/// Uniform random labels, redrawn until every subgroup is nonempty.
pub fn init_partition<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Partition> {
    if k == 0 || n < k {
        return Err(Error::InvalidConfig(format!(
            "cannot split {n} samples into {k} nonempty subgroups"
        )));
    }
    for _ in 0..100 {
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let part = Partition::new(labels, k)?;
        if part.all_nonempty() {
            return Ok(part);
        }
    }
    // Seat one random sample in each subgroup, the rest uniformly.
    let mut order: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), rng);
    let mut labels = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        labels[i] = if pos < k { pos } else { rng.random_range(0..k) };
    }
    Partition::new(labels, k)
}

/// Internal per-subgroup state, on the working (possibly standardized) scale.
#[derive(Debug, Clone)]
struct Fitted {
    v: Array1<f64>,
    beta: Array1<f64>,
    intercept: f64,
    lambda: f64,
    gamma: f64,
    delta: f64,
    step: f64,
}

impl Fitted {
    fn huber(&self) -> Huber {
        Huber::new(self.delta).expect("threshold validated when fitted")
    }
}

/// Data on the working scale plus everything needed to map back.
struct Prepared<'a> {
    x: Array2<f64>,
    y: Array1<f64>,
    cs: Cow<'a, ClusterStructure>,
    center: Array1<f64>,
    scale: Array1<f64>,
    spec: HuberSpec,
    squared_delta: f64,
}

impl<'a> Prepared<'a> {
    fn new(data: &Dataset, cfg: &EngineConfig, cs: &'a ClusterStructure) -> Result<Self> {
        cfg.validate()?;
        cs.check_p(data.p())?;
        if data.n() < cfg.k {
            return Err(Error::InvalidConfig(format!(
                "cannot split {} samples into {} subgroups",
                data.n(),
                cfg.k
            )));
        }
        let cs = match cfg.structure {
            Structure::Clusters => Cow::Borrowed(cs),
            Structure::Lasso => Cow::Owned(ClusterStructure::singletons(data.p())?),
        };
        let p = data.p();
        let mut x = data.x().as_standard_layout().into_owned();
        let mut center = Array1::zeros(p);
        let mut scale = Array1::ones(p);
        if cfg.standardize {
            let mean = x.mean_axis(Axis(0)).expect("n >= 1");
            let sd = x.std_axis(Axis(0), 0.0);
            for j in 0..p {
                if sd[j] > 0.0 {
                    scale[j] = sd[j];
                }
                if cfg.intercept {
                    center[j] = mean[j];
                }
            }
            for mut row in x.rows_mut() {
                for j in 0..p {
                    row[j] = (row[j] - center[j]) / scale[j];
                }
            }
        }
        let y = data.y().to_owned();
        let ys = y.as_slice().expect("contiguous");
        let spec = HuberSpec::for_response(ys)?;
        let squared_delta = 1e12 * response_scale(ys)?;
        Ok(Self {
            x,
            y,
            cs,
            center,
            scale,
            spec,
            squared_delta,
        })
    }

    fn n(&self) -> usize {
        self.y.len()
    }

    fn fitted_values(&self, m: &Fitted) -> Array1<f64> {
        let mut f = self.x.dot(&m.beta);
        f += m.intercept;
        f
    }

    /// Maps a working-scale model to the original covariate scale.
    fn to_original(&self, m: &Fitted, intercept: bool) -> SubgroupModel {
        let beta = &m.beta / &self.scale;
        let v: Array1<f64> = m
            .v
            .iter()
            .zip(self.cs.dup_map())
            .map(|(&vk, &(_, j))| vk / self.scale[j])
            .collect();
        let b = m.intercept - beta.dot(&self.center);
        SubgroupModel {
            beta,
            intercept: intercept.then_some(b),
            lambda: m.lambda,
            gamma: m.gamma,
            delta: m.delta,
            expanded_v: Some(v),
        }
    }
}

/// Objective after one phase of an outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Update,
    Assignment,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub phase: Phase,
    pub objective: f64,
}

/// Result of one random start, on the original covariate scale.
#[derive(Debug, Clone)]
pub struct SingleStart {
    pub objective: f64,
    pub partition: Partition,
    pub models: Vec<SubgroupModel>,
    pub iterations: usize,
    pub converged: bool,
    pub initial_partition: Partition,
    pub trace: Vec<TracePoint>,
}

struct StartRun {
    objective: f64,
    partition: Partition,
    models: Vec<Fitted>,
    iterations: usize,
    converged: bool,
    initial: Partition,
    trace: Vec<TracePoint>,
}

fn working_objective(prep: &Prepared, part: &Partition, models: &[Fitted]) -> f64 {
    let fitted: Vec<Array1<f64>> = models.iter().map(|m| prep.fitted_values(m)).collect();
    let hubers: Vec<Huber> = models.iter().map(Fitted::huber).collect();
    let loss: f64 = part
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &g)| hubers[g].value(prep.y[i] - fitted[g][i]))
        .sum();
    let pen: f64 = models
        .iter()
        .map(|m| penalty(m.v.as_slice().expect("contiguous"), m.lambda, m.gamma, &prep.cs))
        .sum();
    loss + pen
}

fn update_one<R: Rng + ?Sized>(
    prep: &Prepared,
    cfg: &EngineConfig,
    members: &[usize],
    prev: Option<&Fitted>,
    rng: &mut R,
) -> Result<Fitted> {
    let xs = prep.x.select(Axis(0), members);
    let ys = prep.y.select(Axis(0), members);
    let cs: &ClusterStructure = &prep.cs;
    let op = Duplicated::new(Dense::new(xs.view()), cs);
    let opts = cfg.solver_options();

    let delta = match (cfg.loss, cfg.delta_rule) {
        (Loss::Squared, _) => prep.squared_delta,
        (Loss::Huber, DeltaRule::Fixed(d)) => d,
        (Loss::Huber, DeltaRule::Adaptive) => {
            let resid: Vec<f64> = match prev {
                Some(m) => {
                    let fit = xs.dot(&m.beta);
                    ys.iter().zip(fit.iter()).map(|(y, f)| y - f - m.intercept).collect()
                }
                None => {
                    let loc = median(ys.as_slice().expect("contiguous"))?;
                    ys.iter().map(|y| y - loc).collect()
                }
            };
            compute_delta(&resid, &prep.spec)?
        }
    };
    let huber = Huber::new(delta)?;

    let (lambda, gamma) = match &cfg.tuning {
        Tuning::Fixed { lambda, gamma } => (*lambda, *gamma),
        Tuning::CvInLoop(grid) => {
            if members.len() < 2 * grid.folds {
                match prev {
                    Some(m) => (m.lambda, m.gamma),
                    None => {
                        let lmax = solver::lambda::lambda_max_op(&op, ys.view(), 0.5, &huber, cs, cfg.intercept)?;
                        (0.1 * lmax, 0.5)
                    }
                }
            } else {
                let folds = assign_folds(members.len(), grid.folds, rng);
                let sel = cv_select_with_folds(xs.view(), ys.view(), &folds, cs, delta, grid, &cfg.cv_options())?;
                (sel.lambda, sel.gamma)
            }
        }
    };

    let warm = prev.map(|m| WarmStart {
        v: m.v.clone(),
        intercept: m.intercept,
        step: m.step,
    });
    let sol = solver::solve(&op, ys.view(), lambda, gamma, delta, cs, &opts, warm.as_ref())?;
    Ok(Fitted {
        v: sol.expanded_v,
        beta: sol.beta,
        intercept: sol.intercept.unwrap_or(0.0),
        lambda,
        gamma,
        delta,
        step: sol.step,
    })
}

fn update_all<R: Rng + ?Sized>(
    prep: &Prepared,
    cfg: &EngineConfig,
    part: &Partition,
    prev: Option<&[Fitted]>,
    rng: &mut R,
) -> Result<Vec<Fitted>> {
    (0..part.k())
        .map(|k| {
            let members = part.members(k);
            if members.is_empty() {
                return Err(Error::Subgroup {
                    subgroup: k,
                    source: Box::new(Error::InvalidInput("subgroup is empty".into())),
                });
            }
            update_one(prep, cfg, &members, prev.map(|p| &p[k]), rng).map_err(|e| Error::Subgroup {
                subgroup: k,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Huber-nearest assignment with smallest-index tie breaking, followed by
/// empty-subgroup repair: an empty subgroup receives the sample with the
/// largest loss under its current model, taken from a subgroup that keeps at
/// least one member.
fn assign(y: ArrayView1<f64>, fitted: &[Array1<f64>], hubers: &[Huber]) -> Partition {
    let n = y.len();
    let k = fitted.len();
    let mut labels = Vec::with_capacity(n);
    let mut own_loss = Vec::with_capacity(n);
    for i in 0..n {
        let mut best = 0;
        let mut best_loss = hubers[0].value(y[i] - fitted[0][i]);
        for g in 1..k {
            let l = hubers[g].value(y[i] - fitted[g][i]);
            if l < best_loss {
                best = g;
                best_loss = l;
            }
        }
        labels.push(best);
        own_loss.push(best_loss);
    }
    let mut part = Partition::new(labels, k).expect("labels are in range");
    if n >= k {
        loop {
            let sizes = part.sizes();
            let Some(empty) = sizes.iter().position(|&s| s == 0) else { break };
            let mut pick: Option<usize> = None;
            for i in 0..n {
                if sizes[part.labels()[i]] < 2 {
                    continue;
                }
                if pick.is_none_or(|j| own_loss[i] > own_loss[j]) {
                    pick = Some(i);
                }
            }
            let i = pick.expect("n >= k leaves a subgroup with two members");
            part.set(i, empty);
            own_loss[i] = hubers[empty].value(y[i] - fitted[empty][i]);
        }
    }
    part
}

fn assign_working(prep: &Prepared, models: &[Fitted]) -> Partition {
    let fitted: Vec<Array1<f64>> = models.iter().map(|m| prep.fitted_values(m)).collect();
    let hubers: Vec<Huber> = models.iter().map(Fitted::huber).collect();
    assign(prep.y.view(), &fitted, &hubers)
}

fn run_start(prep: &Prepared, cfg: &EngineConfig, start: usize, given: Option<Partition>) -> Result<StartRun> {
    let mut rng = start_rng(cfg.seed, start);
    let initial = match given {
        Some(p) => p,
        None => init_partition(prep.n(), cfg.k, &mut rng)?,
    };
    let mut part = initial.clone();
    let mut models: Option<Vec<Fitted>> = None;
    let mut trace = Vec::new();
    let mut last: Option<f64> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut objective = f64::INFINITY;

    while iterations < cfg.max_outer_iter {
        iterations += 1;
        let updated = update_all(prep, cfg, &part, models.as_deref(), &mut rng)?;
        trace.push(TracePoint {
            iteration: iterations,
            phase: Phase::Update,
            objective: working_objective(prep, &part, &updated),
        });
        let next = assign_working(prep, &updated);
        objective = working_objective(prep, &next, &updated);
        trace.push(TracePoint {
            iteration: iterations,
            phase: Phase::Assignment,
            objective,
        });
        models = Some(updated);
        let unchanged = next == part;
        part = next;
        if unchanged || last.is_some_and(|l| (objective - l).abs() < cfg.outer_tol) {
            converged = true;
            break;
        }
        last = Some(objective);
    }
    Ok(StartRun {
        objective,
        partition: part,
        models: models.expect("at least one iteration ran"),
        iterations,
        converged,
        initial,
        trace,
    })
}

/// Runs start number `start` of `cfg` (its random stream is derived from
/// `cfg.seed` and `start`).
pub fn run_single_start(
    data: &Dataset,
    cfg: &EngineConfig,
    cs: &ClusterStructure,
    start: usize,
) -> Result<SingleStart> {
    let prep = Prepared::new(data, cfg, cs)?;
    let run = run_start(&prep, cfg, start, None)?;
    Ok(single_start(&prep, cfg, run))
}

/// Runs the update/assignment iteration from a given initial partition,
/// using the random stream of start `start` for cross-validation folds.
pub fn run_from_partition(
    data: &Dataset,
    cfg: &EngineConfig,
    cs: &ClusterStructure,
    initial: Partition,
    start: usize,
) -> Result<SingleStart> {
    cfg.validate()?;
    if initial.n() != data.n() || initial.k() != cfg.k || !initial.all_nonempty() {
        return Err(Error::InvalidInput(format!(
            "initial partition must label all {} samples with {} nonempty subgroups",
            data.n(),
            cfg.k
        )));
    }
    let prep = Prepared::new(data, cfg, cs)?;
    let run = run_start(&prep, cfg, start, Some(initial))?;
    Ok(single_start(&prep, cfg, run))
}

fn single_start(prep: &Prepared, cfg: &EngineConfig, run: StartRun) -> SingleStart {
    SingleStart {
        objective: run.objective,
        partition: run.partition,
        models: run.models.iter().map(|m| prep.to_original(m, cfg.intercept)).collect(),
        iterations: run.iterations,
        converged: run.converged,
        initial_partition: run.initial,
        trace: run.trace,
    }
}

/// One update step from scratch (no previous models): per-subgroup tuning,
/// threshold and penalized fit for the given partition.
pub fn update_step<R: Rng + ?Sized>(
    data: &Dataset,
    part: &Partition,
    cfg: &EngineConfig,
    cs: &ClusterStructure,
    rng: &mut R,
) -> Result<Vec<SubgroupModel>> {
    let cfg = EngineConfig { k: part.k(), ..cfg.clone() };
    if part.n() != data.n() {
        return Err(Error::DimensionMismatch(format!(
            "partition has {} labels but data has {} samples",
            part.n(),
            data.n()
        )));
    }
    let prep = Prepared::new(data, &cfg, cs)?;
    let models = update_all(&prep, &cfg, part, None, rng)?;
    Ok(models.iter().map(|m| prep.to_original(m, cfg.intercept)).collect())
}

/// Assigns every sample to its Huber-nearest model.
pub fn assignment_step(data: &Dataset, models: &[SubgroupModel]) -> Result<Partition> {
    if models.is_empty() {
        return Err(Error::InvalidInput("no models to assign to".into()));
    }
    if let Some(m) = models.iter().find(|m| m.beta.len() != data.p()) {
        return Err(Error::DimensionMismatch(format!(
            "model has {} coefficients but data has p = {}",
            m.beta.len(),
            data.p()
        )));
    }
    let fitted: Vec<Array1<f64>> = models.iter().map(|m| m.predict_all(data.x())).collect();
    let hubers = models.iter().map(|m| Huber::new(m.delta)).collect::<Result<Vec<_>>>()?;
    Ok(assign(data.y(), &fitted, &hubers))
}

/// Penalized objective of a partition and its subgroup models.
///
/// The penalty of each model is evaluated on its latent decomposition, with
/// the expanded coordinates multiplied by `column_scale` of their feature.
pub fn objective(
    data: &Dataset,
    part: &Partition,
    models: &[SubgroupModel],
    cs: &ClusterStructure,
    column_scale: ArrayView1<f64>,
) -> Result<f64> {
    if part.n() != data.n() || part.k() != models.len() {
        return Err(Error::DimensionMismatch(format!(
            "partition ({} samples, K = {}) does not match data ({} samples) and {} models",
            part.n(),
            part.k(),
            data.n(),
            models.len()
        )));
    }
    let mut loss = 0.0;
    for (i, &g) in part.labels().iter().enumerate() {
        let m = &models[g];
        loss += Huber::new(m.delta)?.value(data.y()[i] - m.predict(data.x().row(i)));
    }
    let mut pen = 0.0;
    for m in models {
        let v = m
            .expanded_v
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("model lacks its latent decomposition".into()))?;
        if v.len() != cs.expanded_dim() {
            return Err(Error::DimensionMismatch(format!(
                "latent vector has length {} but P = {}",
                v.len(),
                cs.expanded_dim()
            )));
        }
        let scaled: Vec<f64> = v
            .iter()
            .zip(cs.dup_map())
            .map(|(&vk, &(_, j))| vk * column_scale[j])
            .collect();
        pen += penalty(&scaled, m.lambda, m.gamma, cs);
    }
    Ok(loss + pen)
}

/// Multi-start fit: runs every start (in parallel) and keeps the one with
/// the lowest objective, ties going to the lower start index.
pub fn fit(data: &Dataset, cfg: &EngineConfig, cs: &ClusterStructure) -> Result<FitResult> {
    let prep = Prepared::new(data, cfg, cs)?;
    let runs: Vec<Result<StartRun>> = (0..cfg.starts)
        .into_par_iter()
        .map(|r| run_start(&prep, cfg, r, None))
        .collect();

    let mut records = Vec::with_capacity(runs.len());
    let mut best: Option<usize> = None;
    for (r, run) in runs.iter().enumerate() {
        let record = match run {
            Ok(run) => {
                if best.is_none_or(|b| {
                    let bo = runs[b].as_ref().map(|x| x.objective).unwrap_or(f64::INFINITY);
                    run.objective < bo
                }) {
                    best = Some(r);
                }
                StartRecord {
                    start: r,
                    seed: cfg.seed,
                    stream: r as u64,
                    initial_partition: Some(run.initial.clone()),
                    iterations: run.iterations,
                    converged: run.converged,
                    objective: Some(run.objective),
                    error: None,
                }
            }
            Err(e) => StartRecord {
                start: r,
                seed: cfg.seed,
                stream: r as u64,
                initial_partition: None,
                iterations: 0,
                converged: false,
                objective: None,
                error: Some(e.to_string()),
            },
        };
        records.push(record);
    }
    let Some(b) = best else {
        let errs = runs
            .into_iter()
            .enumerate()
            .filter_map(|(r, run)| run.err().map(|e| (r, e)))
            .collect();
        return Err(Error::AllStartsFailed(errs));
    };
    let run = runs[b].as_ref().expect("best start succeeded");
    Ok(FitResult {
        partition: run.partition.clone(),
        models: run.models.iter().map(|m| prep.to_original(m, cfg.intercept)).collect(),
        objective: run.objective,
        starts: records,
        config: cfg.clone(),
        column_scale: if cfg.standardize { prep.scale.clone() } else { Array1::ones(data.p()) },
        structure: prep.cs.clone().into_owned(),
        best_start: b,
        converged: run.converged,
        iterations: run.iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: usize,
    pub yhat: f64,
}

/// Predicts a new sample. With a response, the subgroup is the one with the
/// smallest Huber loss (smallest index on ties). Without one, `fallback_label`
/// must name the subgroup to use.
pub fn predict(
    models: &[SubgroupModel],
    x: ArrayView1<f64>,
    y: Option<f64>,
    fallback_label: Option<usize>,
) -> Result<Prediction> {
    if models.is_empty() {
        return Err(Error::InvalidInput("no models to predict with".into()));
    }
    if let Some(m) = models.iter().find(|m| m.beta.len() != x.len()) {
        return Err(Error::DimensionMismatch(format!(
            "sample has {} features but the model has {}",
            x.len(),
            m.beta.len()
        )));
    }
    let preds: Vec<f64> = models.iter().map(|m| m.predict(x)).collect();
    let label = match (y, fallback_label) {
        (Some(y), _) => {
            let mut best = 0;
            let mut best_loss = f64::INFINITY;
            for (k, m) in models.iter().enumerate() {
                let l = Huber::new(m.delta)?.value(y - preds[k]);
                if l < best_loss {
                    best = k;
                    best_loss = l;
                }
            }
            best
        }
        (None, Some(k)) if k < models.len() => k,
        (None, Some(k)) => {
            return Err(Error::InvalidInput(format!(
                "fallback label {k} is outside 0..{}",
                models.len()
            )))
        }
        (None, None) => {
            return Err(Error::UnsupportedPrediction(
                "subgroup membership is chosen by the Huber loss of the observed response; \
                 supply the response or an explicit subgroup label"
                    .into(),
            ))
        }
    };
    Ok(Prediction {
        label,
        yhat: preds[label],
    })
}
