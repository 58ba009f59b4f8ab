//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use hetreg::{ClusterStructure, Partition};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, p), |_| rng.sample(StandardNormal))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    Array1::from_shape_fn(n, |_| rng.sample(StandardNormal))
}

/// Random cluster structure on `p` features: a few random windows, possibly
/// overlapping.
pub fn random_clusters(rng: &mut ChaCha8Rng, p: usize) -> ClusterStructure {
    let count = rng.random_range(1..=p.max(1));
    let mut clusters = Vec::new();
    for _ in 0..count {
        let len = rng.random_range(1..=p.min(4));
        let start = rng.random_range(0..=p - len);
        clusters.push((start..start + len).collect());
    }
    ClusterStructure::new(p, clusters).unwrap()
}

fn huber(t: f64, d: f64) -> f64 {
    if t.abs() <= d {
        0.5 * t * t
    } else {
        d * t.abs() - 0.5 * d * d
    }
}

fn huber_grad(t: f64, d: f64) -> f64 {
    t.clamp(-d, d)
}

/// `0.5 |v - u|^2 / step + l1 |v|_1 + group |v|_2` for one block.
fn prox_objective(v: &[f64], u: &[f64], step: f64, l1: f64, group: f64) -> f64 {
    let q: f64 = v.iter().zip(u).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (2.0 * step);
    let n1: f64 = v.iter().map(|a| a.abs()).sum();
    let n2: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    q + l1 * n1 + group * n2
}

/// Grid minimization of the block prox objective with successive zooming
/// around the incumbent (the objective is convex).
pub fn brute_prox_block(u: &[f64], step: f64, l1: f64, group: f64) -> Vec<f64> {
    let d = u.len();
    let radius0 = u.iter().map(|a| a.abs()).fold(0.0, f64::max) + 1.0;
    let mut center = vec![0.0; d];
    let mut radius = radius0;
    let points = if d <= 2 { 201 } else { 41 };
    for _ in 0..12 {
        let h = 2.0 * radius / (points - 1) as f64;
        let mut best = center.clone();
        let mut best_val = prox_objective(&center, u, step, l1, group);
        let mut idx = vec![0usize; d];
        loop {
            let cand: Vec<f64> = (0..d).map(|k| center[k] - radius + h * idx[k] as f64).collect();
            let val = prox_objective(&cand, u, step, l1, group);
            if val < best_val {
                best_val = val;
                best = cand;
            }
            let mut k = 0;
            while k < d {
                idx[k] += 1;
                if idx[k] < points {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == d {
                break;
            }
        }
        // Snap coordinates that the grid puts next to zero.
        for k in 0..d {
            let old = best[k];
            best[k] = 0.0;
            let zeroed = prox_objective(&best, u, step, l1, group);
            if zeroed <= best_val {
                best_val = zeroed;
            } else {
                best[k] = old;
            }
        }
        center = best;
        radius = 4.0 * h;
    }
    center
}

/// Ordinary least squares by Gaussian elimination on the normal equations,
/// with an intercept column appended when requested.
pub fn ols(x: ArrayView2<f64>, y: ArrayView1<f64>, intercept: bool) -> (Array1<f64>, f64) {
    let (n, p) = x.dim();
    let m = p + usize::from(intercept);
    let col = |i: usize, j: usize| if j < p { x[[i, j]] } else { 1.0 };
    let mut a = vec![vec![0.0; m + 1]; m];
    for r in 0..m {
        for c in 0..m {
            a[r][c] = (0..n).map(|i| col(i, r) * col(i, c)).sum();
        }
        a[r][m] = (0..n).map(|i| col(i, r) * y[i]).sum();
    }
    for c in 0..m {
        let piv = (c..m).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        for r in 0..m {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=m {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    let sol: Vec<f64> = (0..m).map(|r| a[r][m] / a[r][r]).collect();
    let beta = Array1::from(sol[..p].to_vec());
    (beta, if intercept { sol[p] } else { 0.0 })
}

/// Squared-loss sparse group lasso on an explicit expanded design, by plain
/// proximal gradient with the fixed step `1 / |X~|_2^2`.
pub fn ista_squared(
    xtil: ArrayView2<f64>,
    y: ArrayView1<f64>,
    lambda: f64,
    gamma: f64,
    blocks: &[(usize, usize, f64)],
    iters: usize,
) -> Array1<f64> {
    let pdim = xtil.ncols();
    // Power iteration for the largest eigenvalue of X~' X~.
    let mut w = Array1::from_elem(pdim, 1.0);
    let mut eig = 0.0;
    for _ in 0..500 {
        let z = xtil.t().dot(&xtil.dot(&w));
        eig = z.dot(&z).sqrt();
        w = z / eig;
    }
    let step = 1.0 / (eig * 1.01);
    let mut v = Array1::zeros(pdim);
    for _ in 0..iters {
        let r = &y - &xtil.dot(&v);
        let g = xtil.t().dot(&r);
        let mut u = &v + &(g * step);
        for &(start, end, weight) in blocks {
            let mut norm = 0.0;
            for j in start..end {
                let s = u[j].signum() * (u[j].abs() - step * lambda * gamma).max(0.0);
                u[j] = s;
                norm += s * s;
            }
            let norm = norm.sqrt();
            let f = if norm > 0.0 {
                (1.0 - step * lambda * (1.0 - gamma) * weight / norm).max(0.0)
            } else {
                0.0
            };
            for j in start..end {
                u[j] *= f;
            }
        }
        v = u;
    }
    v
}

pub fn blocks_of(cs: &ClusterStructure) -> Vec<(usize, usize, f64)> {
    cs.blocks()
        .zip(cs.weights())
        .map(|(r, &w)| (r.start, r.end, w))
        .collect()
}

/// Largest violation of the optimality conditions of the expanded Huber
/// problem, recomputed from scratch on the explicit design.
#[allow(clippy::too_many_arguments)]
pub fn kkt_violation(
    xtil: ArrayView2<f64>,
    y: ArrayView1<f64>,
    v: ArrayView1<f64>,
    intercept: Option<f64>,
    lambda: f64,
    gamma: f64,
    delta: f64,
    blocks: &[(usize, usize, f64)],
) -> f64 {
    let b = intercept.unwrap_or(0.0);
    let fit = xtil.dot(&v);
    let psi: Array1<f64> = y
        .iter()
        .zip(fit.iter())
        .map(|(&yi, &fi)| huber_grad(yi - fi - b, delta))
        .collect();
    let grad = -xtil.t().dot(&psi);
    let mut worst: f64 = if intercept.is_some() { psi.sum().abs() } else { 0.0 };
    for &(start, end, weight) in blocks {
        let block = v.slice(ndarray::s![start..end]);
        let norm = block.dot(&block).sqrt();
        if norm == 0.0 {
            // Zero block: the soft-thresholded gradient must fit inside the
            // group ball.
            let s: f64 = (start..end)
                .map(|j| (grad[j].abs() - lambda * gamma).max(0.0).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max((s - lambda * (1.0 - gamma) * weight).max(0.0));
        } else {
            for j in start..end {
                let r = if v[j] != 0.0 {
                    (grad[j] + lambda * gamma * v[j].signum() + lambda * (1.0 - gamma) * weight * v[j] / norm).abs()
                } else {
                    (grad[j].abs() - lambda * gamma).max(0.0)
                };
                worst = worst.max(r);
            }
        }
    }
    worst
}

pub fn huber_objective(
    xtil: ArrayView2<f64>,
    y: ArrayView1<f64>,
    v: ArrayView1<f64>,
    intercept: f64,
    lambda: f64,
    gamma: f64,
    delta: f64,
    blocks: &[(usize, usize, f64)],
) -> f64 {
    let fit = xtil.dot(&v);
    let loss: f64 = y.iter().zip(fit.iter()).map(|(&a, &f)| huber(a - f - intercept, delta)).sum();
    let mut pen = 0.0;
    for &(start, end, weight) in blocks {
        let block = v.slice(ndarray::s![start..end]);
        pen += gamma * block.iter().map(|a| a.abs()).sum::<f64>() + (1.0 - gamma) * weight * block.dot(&block).sqrt();
    }
    loss + lambda * pen
}

/// All labelings of `n` items into at most `k` groups, as restricted growth
/// strings (each partition once).
pub fn partitions(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; n];
    fn rec(i: usize, max: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        let limit = (max + 1).min(k - 1);
        for g in 0..=limit {
            cur[i] = g;
            rec(i + 1, max.max(g), k, cur, out);
        }
    }
    if n == 0 {
        return vec![vec![]];
    }
    cur[0] = 0;
    rec(1, 0, k, &mut cur, &mut out);
    out
}

pub fn partition(labels: &[usize]) -> Partition {
    Partition::from_labels(labels.to_vec()).unwrap()
}

/// Rand-type agreement counted pair by pair.
pub fn ari_pairs(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let (mut both, mut only_a, mut only_b, mut total) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in (i + 1)..n {
            let sa = a[i] == a[j];
            let sb = b[i] == b[j];
            total += 1.0;
            if sa && sb {
                both += 1.0;
            }
            if sa {
                only_a += 1.0;
            }
            if sb {
                only_b += 1.0;
            }
        }
    }
    if total == 0.0 {
        return 1.0;
    }
    let expected = only_a * only_b / total;
    let max = 0.5 * (only_a + only_b);
    if max == expected {
        return 1.0;
    }
    (both - expected) / (max - expected)
}

/// NMI from explicit joint and marginal frequencies.
pub fn nmi_direct(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let pa: Vec<f64> = (0..ka).map(|g| a.iter().filter(|&&x| x == g).count() as f64 / n).collect();
    let pb: Vec<f64> = (0..kb).map(|g| b.iter().filter(|&&x| x == g).count() as f64 / n).collect();
    let h = |p: &[f64]| -> f64 { p.iter().filter(|&&q| q > 0.0).map(|&q| -q * q.ln()).sum() };
    let (ha, hb) = (h(&pa), h(&pb));
    if ha == 0.0 && hb == 0.0 {
        return 1.0;
    }
    let mut mi = 0.0;
    for i in 0..ka {
        for j in 0..kb {
            let pij = a.iter().zip(b).filter(|&(&x, &y)| x == i && y == j).count() as f64 / n;
            if pij > 0.0 {
                mi += pij * (pij / (pa[i] * pb[j])).ln();
            }
        }
    }
    mi / (0.5 * (ha + hb))
}

/// Mean absolute difference of explicitly built co-membership matrices.
pub fn stability_direct(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let ca = f64::from(u8::from(a[i] == a[j]));
            let cb = f64::from(u8::from(b[i] == b[j]));
            s += (ca - cb).abs();
        }
    }
    s / (n * n) as f64
}

/// MCC from a confusion count.
pub fn mcc_direct(est: &[bool], truth: &[bool]) -> f64 {
    let mut c = [[0.0f64; 2]; 2];
    for (&e, &t) in est.iter().zip(truth) {
        c[usize::from(e)][usize::from(t)] += 1.0;
    }
    let (tp, fp, fn_, tn) = (c[1][1], c[1][0], c[0][1], c[0][0]);
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    if den == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fn_) / den
    }
}

/// Coefficient RMSE by an explicit per-sample loop.
pub fn rmse_loop(est_labels: &[usize], est: ArrayView2<f64>, true_labels: &[usize], truth: ArrayView2<f64>) -> f64 {
    let n = est_labels.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..est.ncols() {
            s += (est[[est_labels[i], j]] - truth[[true_labels[i], j]]).powi(2);
        }
    }
    (s / n as f64).sqrt()
}

/// Compares the generator's listings with the checked-in transcription and
/// returns every mismatch found.
pub fn golden_mismatches() -> Vec<String> {
    use hetreg::sim::{coefficient_listings, gen_clusters, gen_truth, Balance, Scenario};
    use serde_json::Value;

    let text = include_str!("../golden/coefficient_listings.json");
    let golden: Value = serde_json::from_str(text).expect("golden file parses");
    let mut bad = Vec::new();
    let as_usize = |v: &Value| -> Vec<usize> {
        v.as_array().unwrap().iter().map(|x| x.as_u64().unwrap() as usize).collect()
    };
    let as_f64 = |v: &Value| -> Vec<f64> { v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect() };

    let compare = |bad: &mut Vec<String>, what: String, listings: Vec<hetreg::sim::Listing>, want: Vec<&Value>| {
        if listings.len() != want.len() {
            bad.push(format!("{what}: {} listings, golden has {}", listings.len(), want.len()));
            return;
        }
        for (g, (l, w)) in listings.iter().zip(want).enumerate() {
            if l.genes != as_usize(&w["genes"]).as_slice() {
                bad.push(format!("{what} subgroup {}: genes {:?}", g + 1, l.genes));
            }
            if l.coefficients != as_f64(&w["coefficients"]).as_slice() {
                bad.push(format!("{what} subgroup {}: coefficients {:?}", g + 1, l.coefficients));
            }
        }
    };

    let two: Vec<&Value> = golden["two_subgroups"].as_array().unwrap().iter().collect();
    let mut three = two.clone();
    three.push(&golden["third_subgroup"]);
    for s in [Scenario::S1, Scenario::S2, Scenario::S3, Scenario::S4, Scenario::S5, Scenario::S6] {
        for balance in [Balance::Balanced, Balance::Unbalanced] {
            compare(&mut bad, format!("{s} {balance:?}"), coefficient_listings(&s, balance).unwrap(), two.clone());
        }
        compare(&mut bad, format!("{s} three"), coefficient_listings(&s, Balance::ThreeEqual).unwrap(), three.clone());
    }
    for p in [10usize, 20, 32, 50] {
        let want: Vec<&Value> = golden["low_dimensional"][p.to_string()].as_array().unwrap().iter().collect();
        compare(&mut bad, format!("lowdim{p}"), coefficient_listings(&Scenario::LowDim(p), Balance::Balanced).unwrap(), want);

        let layout = &golden["low_dimensional_layout"][p.to_string()];
        let cs = gen_clusters(&Scenario::LowDim(p)).unwrap();
        let size = layout["size"].as_u64().unwrap() as usize;
        if cs.n_clusters() != layout["clusters"].as_u64().unwrap() as usize || cs.sizes().iter().any(|&s| s != size) {
            bad.push(format!("lowdim{p}: cluster sizes {:?}", cs.sizes()));
        }
        // Successive clusters share two genes.
        for l in 1..cs.n_clusters() {
            let shared = cs.cluster(l).iter().filter(|j| cs.cluster(l - 1).contains(j)).count();
            if shared != 2 {
                bad.push(format!("lowdim{p}: clusters {l} and {} share {shared} genes", l + 1));
            }
        }
    }

    // Truth matrices place every printed coefficient at its gene.
    let betas = gen_truth(&Scenario::S1, Balance::Balanced).unwrap();
    for (g, w) in two.iter().enumerate() {
        for (gene, coef) in as_usize(&w["genes"]).into_iter().zip(as_f64(&w["coefficients"])) {
            if betas[[g, gene - 1]] != coef {
                bad.push(format!("S1 truth subgroup {} gene {gene}", g + 1));
            }
        }
        if betas.row(g).iter().filter(|b| **b != 0.0).count() != 15 {
            bad.push(format!("S1 truth subgroup {} support size", g + 1));
        }
    }

    for (name, s) in [("s4", Scenario::S4), ("s5", Scenario::S5), ("s6", Scenario::S6)] {
        let cs = gen_clusters(&s).unwrap();
        let mut counts = std::collections::BTreeMap::new();
        for size in cs.sizes() {
            *counts.entry(size.to_string()).or_insert(0u64) += 1;
        }
        let want: std::collections::BTreeMap<String, u64> = golden["cluster_size_counts"][name]
            .as_object()
            .unwrap()
            .iter()
            .map(|(k, v)| (k.clone(), v.as_u64().unwrap()))
            .collect();
        if counts != want {
            bad.push(format!("{name}: cluster size counts {counts:?}"));
        }
    }
    bad
}

/// Mean lag-1 sample correlation between adjacent columns of a simulated
/// design.
pub fn lag1_correlation(n: usize, p: usize, seed: u64) -> f64 {
    let x = hetreg::sim::ar1_design(n, p, 0.5, &mut rng(seed));
    let corr = |a: ArrayView1<f64>, b: ArrayView1<f64>| {
        let (ma, mb) = (a.mean().unwrap(), b.mean().unwrap());
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    };
    let total: f64 = (1..p).map(|j| corr(x.column(j - 1), x.column(j))).sum();
    total / (p - 1) as f64
}

/// Share of draws from the contaminated law that take the normal branch.
pub fn normal_branch_frequency(draws: usize, seed: u64) -> f64 {
    use hetreg::sim::{draw_error, ErrorBranch, ErrorLaw};
    let mut r = rng(seed);
    let hits = (0..draws)
        .filter(|_| draw_error(ErrorLaw::Mix, &mut r).1 == ErrorBranch::Normal)
        .count();
    hits as f64 / draws as f64
}
