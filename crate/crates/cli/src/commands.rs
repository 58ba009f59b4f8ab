use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use hetreg::engine::{self, DeltaRule, Loss, Structure};
use hetreg::metrics::{ari, identification, nmi, pmre, stability};
use hetreg::selection::{bic, select_k};
use hetreg::sim::{gen_clusters, gen_dataset, Balance, ErrorLaw, Scenario, ScenarioSpec};
use hetreg::{ClusterStructure, EngineConfig, FitResult, Partition, Tuning, TuningGrid};
use ndarray::Array1;
use serde::Serialize;
use serde_json::json;

use crate::error::CliError;
use crate::io::{self, ClusterFile};
use crate::report::{write_json, FitFile, InputDigest, Manifest, TruthFile};
use crate::{EvaluateArgs, FitArgs, LossArg, PredictArgs, SimulateArgs, StructureArg};

struct Run {
    command: &'static str,
    started: Instant,
    threads: usize,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
}

impl Run {
    fn new(command: &'static str, threads: usize) -> Self {
        Self {
            command,
            started: Instant::now(),
            threads,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: io::sha256_file(path)?,
        });
        Ok(())
    }

    fn output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    fn finish(
        self,
        out: &Path,
        seed: Option<u64>,
        config: impl Serialize,
        summary: Option<serde_json::Value>,
    ) -> Result<(), CliError> {
        let mut outputs = self.outputs;
        outputs.push("manifest.json".into());
        let manifest = Manifest {
            command: self.command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config: serde_json::to_value(config)?,
            inputs: self.inputs,
            outputs,
            threads: self.threads,
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
            summary,
        };
        write_json(&out.join("manifest.json"), &manifest)
    }
}

fn create_out(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Data(format!("cannot create {}: {e}", out.display())))
}

fn engine_config(a: &FitArgs) -> Result<EngineConfig, CliError> {
    let tuning = match a.lambda {
        Some(lambda) => Tuning::Fixed { lambda, gamma: a.gamma },
        None => Tuning::CvInLoop(TuningGrid {
            folds: a.folds,
            n_lambdas: a.n_lambdas,
            ..TuningGrid::default()
        }),
    };
    let cfg = EngineConfig {
        k: a.k.unwrap_or(1),
        starts: a.starts,
        outer_tol: a.tol,
        max_outer_iter: a.max_iter,
        loss: match a.loss {
            LossArg::Huber => Loss::Huber,
            LossArg::Squared => Loss::Squared,
        },
        structure: match a.structure {
            StructureArg::Clusters => Structure::Clusters,
            StructureArg::Lasso => Structure::Lasso,
        },
        seed: a.seed,
        standardize: a.standardize,
        intercept: a.intercept,
        tuning,
        delta_rule: a.delta.map_or(DeltaRule::Adaptive, DeltaRule::Fixed),
        ..EngineConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn k_range(a: &FitArgs, select: bool) -> Result<Option<(usize, usize)>, CliError> {
    let ranged = a.k_min.is_some() || a.k_max.is_some();
    match (a.k, ranged, select) {
        (Some(_), true, _) => Err(CliError::Usage("give either --k or --k-min/--k-max, not both".into())),
        (Some(_), false, true) => Err(CliError::Usage("select-k takes --k-min/--k-max, not --k".into())),
        (Some(_), false, false) => Ok(None),
        (None, false, false) => Err(CliError::Usage("fit needs --k or --k-min/--k-max".into())),
        (None, _, _) => {
            let lo = a.k_min.unwrap_or(1);
            let hi = a.k_max.unwrap_or(5);
            if lo == 0 || lo > hi {
                return Err(CliError::Usage(format!("invalid K range {lo}..={hi}")));
            }
            Ok(Some((lo, hi)))
        }
    }
}

pub fn fit(a: &FitArgs, select: bool, threads: usize) -> Result<(), CliError> {
    let range = k_range(a, select)?;
    let mut cfg = engine_config(a)?;
    let mut run = Run::new(if select { "select-k" } else { "fit" }, threads);
    let table = io::read_table(&a.data)?;
    run.input(&a.data)?;
    let data = table.dataset(&a.data)?;
    let cs = match &a.clusters {
        Some(path) => {
            run.input(path)?;
            io::read_clusters(path, data.p())?.structure(data.p())?
        }
        None => ClusterStructure::singletons(data.p())?,
    };
    create_out(&a.out)?;

    let res: FitResult = match range {
        None => engine::fit(&data, &cfg, &cs)?,
        Some((lo, hi)) => {
            if hi > data.n() {
                return Err(CliError::Usage(format!("--k-max {hi} exceeds the {} samples", data.n())));
            }
            cfg.k = lo;
            let sel = select_k(&data, &cs, &cfg, lo..=hi)?;
            let mut w = csv::Writer::from_path(a.out.join("bic.csv"))?;
            w.write_record(["K", "BIC"])?;
            for (k, v) in &sel.curve {
                w.write_record([k.to_string(), v.to_string()])?;
            }
            w.flush()?;
            run.output("bic.csv");
            sel.best
        }
    };

    write_json(&a.out.join("fit.json"), &FitFile::new(&res, &table.features))?;
    run.output("fit.json");
    io::write_labels(&a.out.join("labels.csv"), &table.ids, res.partition.labels())?;
    run.output("labels.csv");
    let summary = json!({
        "k": res.k(),
        "objective": res.objective,
        "converged": res.converged,
        "bic": bic(&data, &res)?.value,
    });
    run.finish(&a.out, Some(a.seed), json!({ "args": a, "engine": res.config }), Some(summary))
}

pub fn simulate(a: &SimulateArgs, threads: usize) -> Result<(), CliError> {
    let usage = |e: hetreg::Error| CliError::Usage(e.to_string());
    let scenario: Scenario = a.scenario.parse().map_err(usage)?;
    let balance: Balance = a.balance.parse().map_err(usage)?;
    let error: ErrorLaw = a.error.parse().map_err(usage)?;
    let spec = ScenarioSpec::new(scenario.clone(), a.n, balance, error, a.seed);
    let mut run = Run::new("simulate", threads);
    let (data, truth) = gen_dataset(&spec).map_err(usage)?;
    let cs = gen_clusters(&scenario)?;
    create_out(&a.out)?;

    let features: Vec<String> = (1..=data.p()).map(|j| format!("x{j}")).collect();
    io::write_table(&a.out.join("data.csv"), &data.y().to_owned(), &data.x().to_owned(), &features)?;
    run.output("data.csv");
    fs::write(a.out.join("clusters.txt"), ClusterFile::from_structure(&cs).render())?;
    run.output("clusters.txt");
    let truth_file = TruthFile {
        scenario: scenario.to_string(),
        balance: a.balance.clone(),
        error: a.error.clone(),
        seed: a.seed,
        n: data.n(),
        p: data.p(),
        k: truth.k(),
        labels: truth.partition.labels().iter().map(|g| g + 1).collect(),
        betas: truth.betas.rows().into_iter().map(|r| r.to_vec()).collect(),
    };
    write_json(&a.out.join("truth.json"), &truth_file)?;
    run.output("truth.json");
    run.finish(&a.out, Some(a.seed), json!({ "args": a, "spec": spec }), None)
}

/// Reorders `labels` (keyed by `ids`) into the order of `reference`, which
/// must hold exactly the same ids.
fn align(ids: &[String], labels: &[usize], reference: &[String], what: &str) -> Result<Vec<usize>, CliError> {
    if ids.len() != reference.len() {
        return Err(CliError::Data(format!(
            "{what}: {} labelled samples but {} reference samples",
            ids.len(),
            reference.len()
        )));
    }
    let pos = index_of(ids, what)?;
    reference
        .iter()
        .map(|id| {
            pos.get(id.as_str())
                .map(|&i| labels[i])
                .ok_or_else(|| CliError::Data(format!("{what}: sample {id:?} has no label")))
        })
        .collect()
}

fn index_of<'a>(ids: &'a [String], what: &str) -> Result<HashMap<&'a str, usize>, CliError> {
    let mut pos = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if pos.insert(id.as_str(), i).is_some() {
            return Err(CliError::Data(format!("{what}: duplicate sample id {id:?}")));
        }
    }
    Ok(pos)
}

fn partition(labels: Vec<usize>, k: Option<usize>) -> Result<Partition, CliError> {
    Ok(match k {
        Some(k) => Partition::new(labels, k)?,
        None => Partition::from_labels(labels)?,
    })
}

pub fn evaluate(a: &EvaluateArgs, threads: usize) -> Result<(), CliError> {
    if a.truth.is_none() && a.compare.is_none() {
        return Err(CliError::Usage("evaluate needs --truth or --compare".into()));
    }
    let mut run = Run::new("evaluate", threads);
    let (ids, labels) = io::read_labels(&a.labels)?;
    run.input(&a.labels)?;
    let fit = match &a.fit {
        Some(path) => {
            run.input(path)?;
            let f = FitFile::read(path)?;
            if f.n != ids.len() {
                return Err(CliError::Data(format!(
                    "{} describes {} samples but {} has {}",
                    path.display(),
                    f.n,
                    a.labels.display(),
                    ids.len()
                )));
            }
            Some(f)
        }
        None => None,
    };
    let k = fit.as_ref().map(|f| f.k);
    let mut metrics = serde_json::Map::new();

    if let Some(path) = &a.truth {
        run.input(path)?;
        let truth = TruthFile::read(path)?;
        let reference: Vec<String> = (1..=truth.n).map(|i| i.to_string()).collect();
        let est = partition(align(&ids, &labels, &reference, "labels vs truth")?, k)?;
        let gt = truth.ground_truth()?;
        metrics.insert("ari".into(), json!(ari(&est, &gt.partition)?));
        metrics.insert("nmi".into(), json!(nmi(&est, &gt.partition)?));
        if let Some(f) = &fit {
            if f.p != truth.p {
                return Err(CliError::Data(format!("fit has p = {} but truth has p = {}", f.p, truth.p)));
            }
            let betas = f.betas()?;
            let id = identification(&est, betas.view(), &gt)?;
            metrics.insert("tpr".into(), json!(id.tpr));
            metrics.insert("fpr".into(), json!(id.fpr));
            metrics.insert("mcc".into(), json!(id.mcc));
            metrics.insert("identification".into(), serde_json::to_value(&id)?);
            metrics.insert("rmse".into(), json!(hetreg::metrics::coefficient_rmse(&est, betas.view(), &gt)?));
        }
        metrics.insert("k_estimated".into(), json!(est.k()));
        metrics.insert("k_true".into(), json!(truth.k));
    }

    if let Some(path) = &a.compare {
        run.input(path)?;
        let (sub_ids, sub_labels) = io::read_labels(path)?;
        let pos = index_of(&ids, "labels")?;
        let sub_pos = index_of(&sub_ids, "compare")?;
        let index_map: Vec<usize> = sub_ids
            .iter()
            .map(|id| {
                pos.get(id.as_str())
                    .copied()
                    .ok_or_else(|| CliError::Data(format!("compared sample {id:?} is not in {}", a.labels.display())))
            })
            .collect::<Result<_, _>>()?;
        let full = partition(labels.clone(), k)?;
        let sub = partition(sub_labels.clone(), None)?;
        metrics.insert("stability".into(), json!(stability(&full, &sub, &index_map)?));
        // Agreement on the shared samples.
        let restricted = partition(index_map.iter().map(|&i| labels[i]).collect(), None)?;
        metrics.insert("nmi_between".into(), json!(nmi(&restricted, &sub)?));
        metrics.insert("ari_between".into(), json!(ari(&restricted, &sub)?));
        metrics.insert("compared_samples".into(), json!(sub_pos.len()));
    }

    create_out(&a.out)?;
    write_json(&a.out.join("metrics.json"), &metrics)?;
    run.output("metrics.json");
    run.finish(&a.out, None, a, None)
}

pub fn predict(a: &PredictArgs, threads: usize) -> Result<(), CliError> {
    let mut run = Run::new("predict", threads);
    let fit = FitFile::read(&a.fit)?;
    run.input(&a.fit)?;
    let table = io::read_table(&a.data)?;
    run.input(&a.data)?;
    let y = table.y.as_ref().ok_or_else(|| {
        CliError::Data(format!(
            "{}: no `y` column. Subgroup membership of a new sample is decided by the loss of its \
             observed response under each subgroup model, so prediction needs `y`",
            a.data.display()
        ))
    })?;
    if table.x.ncols() != fit.p {
        return Err(CliError::Data(format!(
            "{} has {} features but the fit has {}",
            a.data.display(),
            table.x.ncols(),
            fit.p
        )));
    }
    let models = fit.models()?;
    create_out(&a.out)?;
    let mut w = csv::Writer::from_path(a.out.join("predictions.csv"))?;
    w.write_record(["sample_id", "subgroup", "yhat", "abs_rel_err"])?;
    let mut yhat = Array1::zeros(table.n());
    for i in 0..table.n() {
        let p = engine::predict(&models, table.x.row(i), Some(y[i]), None)?;
        yhat[i] = p.yhat;
        let err = if y[i] != 0.0 { ((y[i] - p.yhat) / y[i]).abs().to_string() } else { String::new() };
        w.write_record([table.ids[i].clone(), (p.label + 1).to_string(), p.yhat.to_string(), err])?;
    }
    w.flush()?;
    run.output("predictions.csv");
    let summary = match pmre(y.view(), yhat.view()) {
        Ok(p) => {
            println!("PMRE {:.6} over {} samples ({} with y = 0 excluded)", p.value, table.n() - p.excluded, p.excluded);
            json!({ "pmre": p.value, "excluded": p.excluded, "n": table.n() })
        }
        Err(e) => {
            println!("PMRE undefined: {e}");
            json!({ "pmre": null, "excluded": table.n(), "n": table.n() })
        }
    };
    run.finish(&a.out, None, a, Some(summary))
}
