//! Evaluation metrics: partition agreement (ARI, NMI, stability), support
//! identification (TPR, FPR, MCC), coefficient RMSE and prediction PMRE.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{FitResult, Partition};
use crate::sim::GroundTruth;

fn check_same_n(a: &Partition, b: &Partition) -> Result<()> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch(format!(
            "partitions have {} and {} samples",
            a.n(),
            b.n()
        )));
    }
    Ok(())
}

/// Contingency table `a.k() x b.k()`.
pub fn contingency(a: &Partition, b: &Partition) -> Result<Array2<usize>> {
    check_same_n(a, b)?;
    let mut t = Array2::zeros((a.k(), b.k()));
    for (&ga, &gb) in a.labels().iter().zip(b.labels()) {
        t[[ga, gb]] += 1;
    }
    Ok(t)
}

fn comb2(m: usize) -> f64 {
    let m = m as f64;
    m * (m - 1.0) / 2.0
}

/// Adjusted Rand index (Hubert and Arabie). When the expected and maximal
/// index coincide (both partitions trivial in the same way) the value is 1.
pub fn ari(a: &Partition, b: &Partition) -> Result<f64> {
    let t = contingency(a, b)?;
    let n = a.n();
    let index: f64 = t.iter().map(|&c| comb2(c)).sum();
    let sum_a: f64 = t.rows().into_iter().map(|r| comb2(r.sum())).sum();
    let sum_b: f64 = t.columns().into_iter().map(|c| comb2(c.sum())).sum();
    let total = comb2(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    let denom = max - expected;
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let q = c as f64 / n;
            -q * q.ln()
        })
        .sum()
}

/// Normalized mutual information, arithmetic-mean normalization.
pub fn nmi(a: &Partition, b: &Partition) -> Result<f64> {
    let t = contingency(a, b)?;
    let n = a.n() as f64;
    if a.n() == 0 {
        return Err(Error::UndefinedMetric("NMI of empty partitions".into()));
    }
    let ra: Vec<usize> = t.rows().into_iter().map(|r| r.sum()).collect();
    let cb: Vec<usize> = t.columns().into_iter().map(|c| c.sum()).collect();
    let ha = entropy(ra.iter().copied(), n);
    let hb = entropy(cb.iter().copied(), n);
    if ha == 0.0 && hb == 0.0 {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for ((i, j), &c) in t.indexed_iter() {
        if c > 0 {
            let c = c as f64;
            mi += c / n * (c * n / (ra[i] as f64 * cb[j] as f64)).ln();
        }
    }
    Ok((mi / (0.5 * (ha + hb))).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentificationReport {
    pub tpr: f64,
    pub fpr: f64,
    pub mcc: f64,
    /// `matched_perm[g]` is the true subgroup matched to estimated subgroup
    /// `g`, if any.
    pub matched_perm: Vec<Option<usize>>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
}

/// Injective matching of estimated to true subgroups maximizing the number
/// of samples whose matched labels agree. Exhaustive; ties keep the
/// lexicographically first assignment.
pub fn match_labels(est: &Partition, truth: &Partition) -> Result<Vec<Option<usize>>> {
    let t = contingency(est, truth)?;
    let (ke, kt) = t.dim();
    if ke.min(kt) > 8 {
        return Err(Error::InvalidInput(format!(
            "exhaustive label matching supports up to 8 subgroups, got {ke} and {kt}"
        )));
    }
    let swap = ke > kt;
    let (small, large) = if swap { (kt, ke) } else { (ke, kt) };
    let score = |s: usize, l: usize| if swap { t[[l, s]] } else { t[[s, l]] };

    let mut best: Option<(usize, Vec<usize>)> = None;
    let mut current = Vec::with_capacity(small);
    let mut used = vec![false; large];
    fn search(
        depth: usize,
        small: usize,
        large: usize,
        acc: usize,
        current: &mut Vec<usize>,
        used: &mut [bool],
        score: &dyn Fn(usize, usize) -> usize,
        best: &mut Option<(usize, Vec<usize>)>,
    ) {
        if depth == small {
            if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                *best = Some((acc, current.clone()));
            }
            return;
        }
        for l in 0..large {
            if !used[l] {
                used[l] = true;
                current.push(l);
                search(depth + 1, small, large, acc + score(depth, l), current, used, score, best);
                current.pop();
                used[l] = false;
            }
        }
    }
    search(0, small, large, 0, &mut current, &mut used, &score, &mut best);
    let assignment = best.map(|(_, a)| a).unwrap_or_default();

    let mut perm = vec![None; ke];
    for (s, &l) in assignment.iter().enumerate() {
        if swap {
            perm[l] = Some(s);
        } else {
            perm[s] = Some(l);
        }
    }
    Ok(perm)
}

fn mcc(tp: f64, fp: f64, tn: f64, fn_: f64) -> f64 {
    let denom = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        ((tp * tn - fp * fn_) / denom).clamp(-1.0, 1.0)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Support identification of estimated coefficients (`K_est x p`, row `g`
/// belonging to estimated subgroup `g`) against the truth.
///
/// Unmatched estimated subgroups are compared with an all-zero truth and
/// unmatched true subgroups with an all-zero estimate.
pub fn identification(
    est_partition: &Partition,
    est_betas: ArrayView2<f64>,
    truth: &GroundTruth,
) -> Result<IdentificationReport> {
    let (ke, p) = est_betas.dim();
    if ke != est_partition.k() || p != truth.betas.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "estimate is {ke} x {p} with {} subgroups, truth is {} x {}",
            est_partition.k(),
            truth.betas.nrows(),
            truth.betas.ncols()
        )));
    }
    let perm = match_labels(est_partition, &truth.partition)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    let mut tally = |est: Option<ArrayView1<f64>>, tru: Option<ArrayView1<f64>>| {
        for j in 0..p {
            let e = est.is_some_and(|b| b[j] != 0.0);
            let t = tru.is_some_and(|b| b[j] != 0.0);
            match (e, t) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, false) => tn += 1,
                (false, true) => fn_ += 1,
            }
        }
    };
    let mut matched_true = vec![false; truth.k()];
    for (g, m) in perm.iter().enumerate() {
        if let Some(t) = *m {
            matched_true[t] = true;
            tally(Some(est_betas.row(g)), Some(truth.betas.row(t)));
        } else {
            tally(Some(est_betas.row(g)), None);
        }
    }
    for (t, matched) in matched_true.iter().enumerate() {
        if !matched {
            tally(None, Some(truth.betas.row(t)));
        }
    }
    Ok(IdentificationReport {
        tpr: ratio(tp, tp + fn_),
        fpr: ratio(fp, fp + tn),
        mcc: mcc(tp as f64, fp as f64, tn as f64, fn_ as f64),
        matched_perm: perm,
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fn_,
    })
}

fn stack_betas(fit: &FitResult) -> Array2<f64> {
    let p = fit.models.first().map_or(0, |m| m.beta.len());
    Array2::from_shape_fn((fit.k(), p), |(g, j)| fit.models[g].beta[j])
}

pub fn identification_report(fit: &FitResult, truth: &GroundTruth) -> Result<IdentificationReport> {
    identification(&fit.partition, stack_betas(fit).view(), truth)
}

/// `sqrt(sum_i |beta_hat[ghat_i] - beta[g_i]|^2 / n)`.
pub fn coefficient_rmse(
    est_partition: &Partition,
    est_betas: ArrayView2<f64>,
    truth: &GroundTruth,
) -> Result<f64> {
    check_same_n(est_partition, &truth.partition)?;
    if est_betas.ncols() != truth.betas.ncols() || est_betas.nrows() != est_partition.k() {
        return Err(Error::DimensionMismatch(format!(
            "estimate is {:?}, truth is {:?}",
            est_betas.dim(),
            truth.betas.dim()
        )));
    }
    let n = est_partition.n();
    if n == 0 {
        return Err(Error::UndefinedMetric("RMSE over zero samples".into()));
    }
    // Squared distances only depend on the (estimated, true) label pair.
    let t = contingency(est_partition, &truth.partition)?;
    let mut total = 0.0;
    for ((ge, gt), &c) in t.indexed_iter() {
        if c > 0 {
            let d: f64 = est_betas
                .row(ge)
                .iter()
                .zip(truth.betas.row(gt))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            total += c as f64 * d;
        }
    }
    Ok((total / n as f64).sqrt())
}

pub fn rmse(fit: &FitResult, truth: &GroundTruth) -> Result<f64> {
    coefficient_rmse(&fit.partition, stack_betas(fit).view(), truth)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pmre {
    pub value: f64,
    /// Number of samples skipped because `y_i == 0`.
    pub excluded: usize,
}

/// Mean absolute relative prediction error over samples with nonzero response.
pub fn pmre(y: ArrayView1<f64>, yhat: ArrayView1<f64>) -> Result<Pmre> {
    if y.len() != yhat.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} responses, {} predictions",
            y.len(),
            yhat.len()
        )));
    }
    let mut sum = 0.0;
    let mut used = 0usize;
    for (&yi, &pi) in y.iter().zip(yhat) {
        if yi != 0.0 {
            sum += ((yi - pi) / yi).abs();
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::UndefinedMetric("PMRE needs at least one nonzero response".into()));
    }
    Ok(Pmre {
        value: sum / used as f64,
        excluded: y.len() - used,
    })
}

/// Mean absolute difference of co-membership matrices, restricted to the
/// samples of `sub`. `index_map[j]` is the index in `full` of sample `j` of
/// `sub`.
pub fn stability(full: &Partition, sub: &Partition, index_map: &[usize]) -> Result<f64> {
    let m = sub.n();
    if index_map.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "index map has {} entries for {m} samples",
            index_map.len()
        )));
    }
    if m == 0 {
        return Err(Error::UndefinedMetric("stability over an empty sample set".into()));
    }
    let mut seen = vec![false; full.n()];
    for &i in index_map {
        if i >= full.n() {
            return Err(Error::InvalidInput(format!(
                "index {i} outside the {} samples of the reference partition",
                full.n()
            )));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidInput(format!("index {i} appears twice")));
        }
    }
    let fl = full.labels();
    let sl = sub.labels();
    let mut diff = 0usize;
    for j in 0..m {
        for k in (j + 1)..m {
            let a = fl[index_map[j]] == fl[index_map[k]];
            let b = sl[j] == sl[k];
            diff += usize::from(a != b);
        }
    }
    Ok(2.0 * diff as f64 / (m * m) as f64)
}
