//! Tuning of `(lambda, gamma)` by K-fold cross-validation inside each update
//! step, and modified-BIC selection of the number of subgroups.

use std::ops::RangeInclusive;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clusters::ClusterStructure;
use crate::engine::{self, EngineConfig};
use crate::error::{Error, Result};
use crate::huber::Huber;
use crate::model::{Dataset, FitResult};
use crate::solver::{self, Dense, Duplicated, SolverOptions, WarmStart};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningGrid {
    pub gammas: Vec<f64>,
    pub n_lambdas: usize,
    pub lambda_min_ratio: f64,
    pub folds: usize,
    /// Stop a lambda path once this many consecutive grid points score
    /// worse than the best point so far; `None` evaluates the whole path.
    /// Skipped points are reported as `inf` in the CV table.
    pub patience: Option<usize>,
}

impl Default for TuningGrid {
    fn default() -> Self {
        Self {
            gammas: vec![0.1, 0.3, 0.5, 0.7],
            n_lambdas: 20,
            lambda_min_ratio: 1e-3,
            folds: 5,
            patience: Some(3),
        }
    }
}

impl TuningGrid {
    pub fn validate(&self) -> Result<()> {
        if self.gammas.is_empty() || self.gammas.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(Error::InvalidConfig(format!(
                "gamma grid must be nonempty and inside [0, 1], got {:?}",
                self.gammas
            )));
        }
        if self.n_lambdas < 2 {
            return Err(Error::InvalidConfig("lambda grid needs at least 2 points".into()));
        }
        if !(self.lambda_min_ratio > 0.0 && self.lambda_min_ratio < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda_min_ratio must lie in (0, 1), got {}",
                self.lambda_min_ratio
            )));
        }
        if self.folds < 2 {
            return Err(Error::InvalidConfig("cross-validation needs at least 2 folds".into()));
        }
        if self.patience == Some(0) {
            return Err(Error::InvalidConfig("patience must be at least 1".into()));
        }
        Ok(())
    }

    /// Log-equidistant path from `lambda_max` down to
    /// `lambda_min_ratio * lambda_max`.
    pub fn lambda_path(&self, lambda_max: f64) -> Vec<f64> {
        let m = self.n_lambdas;
        let ratio = self.lambda_min_ratio.ln();
        (0..m)
            .map(|i| lambda_max * (ratio * i as f64 / (m - 1) as f64).exp())
            .collect()
    }
}

/// Outcome of a cross-validated grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct CvSelection {
    pub lambda: f64,
    pub gamma: f64,
    pub gammas: Vec<f64>,
    /// Lambda path per gamma (rows align with `table`).
    pub lambdas: Vec<Vec<f64>>,
    /// Mean held-out Huber loss, `gammas.len() x n_lambdas`.
    pub table: Array2<f64>,
    /// Set when the score at the origin vanishes for every gamma.
    pub degenerate: bool,
}

/// Random fold labels with sizes differing by at most one.
pub fn assign_folds<R: Rng + ?Sized>(n: usize, folds: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut labels = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        labels[i] = pos % folds;
    }
    labels
}

/// Cross-validated choice of `(lambda, gamma)` on one subgroup's samples.
///
/// For every gamma the lambda path runs from that gamma's `lambda_max` down
/// the grid with warm starts. Training folds use `lambda * n_train / n`, so
/// that grid values refer to the full subsample. Held-out samples are scored
/// with the Huber loss at `delta`. Ties go to the larger lambda, then the
/// larger gamma.
pub fn cv_select<R: Rng + ?Sized>(
    subsample: &Dataset,
    cs: &ClusterStructure,
    delta: f64,
    grid: &TuningGrid,
    solver_opts: &SolverOptions,
    rng: &mut R,
) -> Result<CvSelection> {
    grid.validate()?;
    let folds = assign_folds(subsample.n(), grid.folds, rng);
    cv_select_with_folds(subsample.x(), subsample.y(), &folds, cs, delta, grid, solver_opts)
}

pub fn cv_select_with_folds(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    folds: &[usize],
    cs: &ClusterStructure,
    delta: f64,
    grid: &TuningGrid,
    solver_opts: &SolverOptions,
) -> Result<CvSelection> {
    grid.validate()?;
    cs.check_p(x.ncols())?;
    let n = y.len();
    if folds.len() != n || x.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} fold labels, {} design rows, {n} responses",
            folds.len(),
            x.nrows()
        )));
    }
    if n < grid.folds {
        return Err(Error::InvalidInput(format!(
            "{n} samples cannot be split into {} folds",
            grid.folds
        )));
    }
    let huber = Huber::new(delta)?;
    let x = x.as_standard_layout();
    let full_op = Duplicated::new(Dense::new(x.view()), cs);

    struct Fold {
        x_train: Array2<f64>,
        y_train: ndarray::Array1<f64>,
        x_test: Array2<f64>,
        y_test: ndarray::Array1<f64>,
        scale: f64,
    }
    let fold_data: Vec<Fold> = (0..grid.folds)
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| folds[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| folds[i] == f).collect();
            Fold {
                x_train: x.select(Axis(0), &train),
                y_train: y.select(Axis(0), &train),
                x_test: x.select(Axis(0), &test),
                y_test: y.select(Axis(0), &test),
                scale: train.len() as f64 / n as f64,
            }
        })
        .collect();

    // A single gamma suffices when every cluster is a singleton: the
    // penalty no longer depends on gamma.
    let gammas: Vec<f64> = if cs.all_singletons() {
        vec![1.0]
    } else {
        grid.gammas.clone()
    };

    let mut table = Array2::from_elem((gammas.len(), grid.n_lambdas), f64::INFINITY);
    let mut lambdas = Vec::with_capacity(gammas.len());
    let mut degenerate = true;
    for (gi, &gamma) in gammas.iter().enumerate() {
        let lmax = solver::lambda::lambda_max_op(&full_op, y, gamma, &huber, cs, solver_opts.intercept)?;
        let path = grid.lambda_path(lmax);
        if lmax > 0.0 {
            degenerate = false;
        }
        let ops: Vec<Duplicated> = fold_data
            .iter()
            .map(|fold| Duplicated::new(Dense::new(fold.x_train.view()), cs))
            .collect();
        let mut warm: Vec<Option<WarmStart>> = vec![None; fold_data.len()];
        let mut best = f64::INFINITY;
        let mut worse = 0;
        for (li, &lam) in path.iter().enumerate() {
            let mut total = 0.0;
            for ((fold, op), w) in fold_data.iter().zip(&ops).zip(warm.iter_mut()) {
                let sol = solver::solve(
                    op,
                    fold.y_train.view(),
                    lam * fold.scale,
                    gamma,
                    delta,
                    cs,
                    solver_opts,
                    w.as_ref(),
                )?;
                let pred = fold.x_test.dot(&sol.beta);
                let b = sol.intercept.unwrap_or(0.0);
                total += fold
                    .y_test
                    .iter()
                    .zip(pred.iter())
                    .map(|(&yi, &pi)| huber.value(yi - pi - b))
                    .sum::<f64>();
                *w = Some(sol.warm_start());
            }
            let score = total / n as f64;
            table[[gi, li]] = score;
            if score < best {
                best = score;
                worse = 0;
            } else {
                worse += 1;
                if grid.patience.is_some_and(|p| worse >= p) {
                    break;
                }
            }
        }
        lambdas.push(path);
    }

    if degenerate {
        return Ok(CvSelection {
            lambda: lambdas[0][0],
            gamma: gammas[0],
            gammas,
            lambdas,
            table,
            degenerate,
        });
    }

    // Lambda paths run from large to small, so the first strict minimum
    // along a path is the largest lambda attaining it.
    let mut best: Option<(usize, usize)> = None;
    for gi in 0..gammas.len() {
        for li in 0..grid.n_lambdas {
            let score = table[[gi, li]];
            best = match best {
                None => Some((gi, li)),
                Some((bg, bl)) => {
                    let bs = table[[bg, bl]];
                    let better = score < bs
                        || (score == bs
                            && (lambdas[gi][li] > lambdas[bg][bl]
                                || (lambdas[gi][li] == lambdas[bg][bl] && gammas[gi] > gammas[bg])));
                    if better {
                        Some((gi, li))
                    } else {
                        Some((bg, bl))
                    }
                }
            };
        }
    }
    let (bg, bl) = best.expect("grid is nonempty");
    Ok(CvSelection {
        lambda: lambdas[bg][bl],
        gamma: gammas[bg],
        gammas,
        lambdas,
        table,
        degenerate,
    })
}

/// Modified BIC of a fitted model and its ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BicScore {
    pub value: f64,
    /// Mean Huber loss over all samples under their own subgroup's model.
    pub mean_loss: f64,
    /// Nonzero coefficients summed over subgroups (intercepts excluded).
    pub df: usize,
    /// `log(log(p K))`, clamped at zero for `p K <= e`.
    pub c: f64,
    /// Set when the loss term was zero and replaced by `1e-300`.
    pub loss_clamped: bool,
}

/// `log(mean loss) + C log(n) / n * df` with `C = log(log(p K))`.
pub fn bic(data: &Dataset, fitted: &FitResult) -> Result<BicScore> {
    let part = &fitted.partition;
    if part.n() != data.n() {
        return Err(Error::DimensionMismatch(format!(
            "fit has {} samples but data has {}",
            part.n(),
            data.n()
        )));
    }
    let n = data.n() as f64;
    let k = fitted.models.len();
    let p = data.p();
    let mut loss = 0.0;
    for (i, &g) in part.labels().iter().enumerate() {
        let m = &fitted.models[g];
        let huber = Huber::new(m.delta)?;
        loss += huber.value(data.y()[i] - m.predict(data.x().row(i)));
    }
    let df = fitted.models.iter().map(|m| m.nonzeros()).sum();
    Ok(bic_from_parts(loss / n, df, data.n(), p, k))
}

pub fn bic_from_parts(mean_loss: f64, df: usize, n: usize, p: usize, k: usize) -> BicScore {
    let loss_clamped = !(mean_loss > 0.0);
    let c = ((p * k) as f64).ln().ln();
    let c = if c.is_finite() { c.max(0.0) } else { 0.0 };
    let nf = n as f64;
    BicScore {
        value: mean_loss.max(1e-300).ln() + c * nf.ln() / nf * df as f64,
        mean_loss,
        df,
        c,
        loss_clamped,
    }
}

pub struct KSelection {
    pub k: usize,
    pub curve: Vec<(usize, f64)>,
    pub best: FitResult,
}

/// Fits the engine for every `K` in the range and keeps the minimal BIC
/// (ties to the smaller `K`).
pub fn select_k(
    data: &Dataset,
    cs: &ClusterStructure,
    template: &EngineConfig,
    k_range: RangeInclusive<usize>,
) -> Result<KSelection> {
    let (lo, hi) = (*k_range.start(), *k_range.end());
    if lo == 0 || lo > hi || hi > data.n() {
        return Err(Error::InvalidConfig(format!(
            "K range {lo}..={hi} must satisfy 1 <= min <= max <= n = {}",
            data.n()
        )));
    }
    let mut curve = Vec::new();
    let mut best: Option<(f64, FitResult)> = None;
    for k in k_range {
        let cfg = EngineConfig { k, ..template.clone() };
        let fit = engine::fit(data, &cfg, cs)?;
        let score = bic(data, &fit)?.value;
        curve.push((k, score));
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, fit));
        }
    }
    let (_, best) = best.expect("range is nonempty");
    Ok(KSelection {
        k: best.k(),
        curve,
        best,
    })
}
