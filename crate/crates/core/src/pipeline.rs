//! End-to-end orchestration: load inputs, run the selected stages in a fixed
//! order, write their reports and finish with a manifest of digests.
//!
//! Loading errors (unreadable file, bad header, conflicting rows) abort the
//! run before any stage executes. A stage that fails on a data contract is
//! recorded as failed; only stages depending on it are skipped. Each stage
//! renders all of its files in memory before writing any of them.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use log::info;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::bnet::{
    discretize_dataset, fit_cpts, hill_climb_with, query, HillClimbOptions, BN_FIELDS,
};
use crate::cluster::{inertia_curve, kmeans_fit_with_restarts};
use crate::config::PipelineConfig;
use crate::consistency::cross_domain_consistency;
use crate::error::{Error, Result};
use crate::ingest::{
    load_table, AnalyticalMatrix, AspirationField, Dataset, Domain, LoadedTable, COL_A, COL_D,
    COL_T,
};
use crate::model::{
    counterfactual_on_fit, dichotomize, fit_lda, fit_ols, moderation_slopes,
    stratified_cv_accuracy, RegressionData, RegressionFit, Standardization,
};
use crate::report::{self, fmt_num, json_bytes, CsvTable, Direction};
use crate::stats::{pearson, StandardizedFeatures, Tertile};
use crate::vae::{embed, orientation_diagnostics, readiness_ict_correlation, vae_train};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Consistency,
    Cluster,
    Vae,
    Regress,
    Lda,
    Counterfactual,
    Bnet,
    Report,
}

impl Stage {
    /// Execution order.
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Consistency,
        Stage::Cluster,
        Stage::Vae,
        Stage::Regress,
        Stage::Lda,
        Stage::Counterfactual,
        Stage::Bnet,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Consistency => "consistency",
            Stage::Cluster => "cluster",
            Stage::Vae => "vae",
            Stage::Regress => "regress",
            Stage::Lda => "lda",
            Stage::Counterfactual => "counterfactual",
            Stage::Bnet => "bnet",
            Stage::Report => "report",
        }
    }

    pub fn dependencies(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Counterfactual => &[Stage::Ingest, Stage::Regress],
            _ => &[Stage::Ingest],
        }
    }

    /// Files a successful run of the stage writes.
    pub fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::Ingest => &["matrix.csv", "ingest.json"],
            Stage::Consistency => &["consistency.json", "autonomy_digital_by_domain.csv"],
            Stage::Cluster => &["clusters.csv", "cluster_summary.json"],
            Stage::Vae => &[
                "latent.csv",
                "vae_training.csv",
                "readiness_ranking.csv",
                "vae.json",
            ],
            Stage::Regress => &["regression.json", "interaction.json"],
            Stage::Lda => &["lda.json", "lda_scores.csv"],
            Stage::Counterfactual => &["counterfactual.csv", "counterfactual.json"],
            Stage::Bnet => &["bnet.json", "bnet_discretized.csv"],
            Stage::Report => &[
                "ict_histogram.csv",
                "ict_top.csv",
                "ict_bottom.csv",
                "sci_eng_vs_ict.csv",
                "volatility_heatmap.csv",
                "career_boxplots.csv",
            ],
        }
    }

    /// The requested stages plus everything they depend on, in run order.
    pub fn closure(requested: &[Stage]) -> Vec<Stage> {
        let mut set: BTreeSet<Stage> = BTreeSet::new();
        let mut stack = requested.to_vec();
        while let Some(s) = stack.pop() {
            if set.insert(s) {
                stack.extend_from_slice(s.dependencies());
            }
        }
        Stage::ALL.into_iter().filter(|s| set.contains(s)).collect()
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Contract(format!("unknown stage `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Failed(String),
    Skipped(String),
}

impl StageStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, StageStatus::Ok)
    }
}

impl fmt::Display for StageStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StageStatus::Ok => f.write_str("ok"),
            StageStatus::Failed(r) => write!(f, "failed: {r}"),
            StageStatus::Skipped(r) => write!(f, "skipped: {r}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    fn of(file: impl Into<String>, bytes: &[u8]) -> Self {
        FileDigest {
            file: file.into(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    pub schema: String,
    pub file: FileDigest,
    pub rows: usize,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    #[serde(flatten)]
    pub status: StageStatus,
    pub outputs: Vec<FileDigest>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub seed: u64,
    pub domain: Domain,
    pub config: PipelineConfig,
    pub inputs: Vec<InputRecord>,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn stage(&self, stage: Stage) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.stage == stage)
    }

    pub fn all_ok(&self) -> bool {
        self.stages.iter().all(|s| s.status.is_ok())
    }

    /// 0 when every stage completed, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.all_ok() {
            0
        } else {
            2
        }
    }

    /// Every output digest, keyed by file name.
    pub fn output_digests(&self) -> Vec<(String, String)> {
        self.stages
            .iter()
            .flat_map(|s| s.outputs.iter().map(|d| (d.file.clone(), d.sha256.clone())))
            .collect()
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Default)]
struct StageOutput {
    files: Vec<(String, Vec<u8>)>,
    warnings: Vec<String>,
}

impl StageOutput {
    fn csv(&mut self, name: &str, table: &CsvTable) {
        self.files.push((name.to_string(), table.to_bytes()));
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.files.push((name.to_string(), json_bytes(value)?));
        Ok(())
    }
}

struct Context<'a> {
    cfg: &'a PipelineConfig,
    seed: u64,
    tables: Vec<LoadedTable>,
    dataset: Dataset,
    matrix: Option<AnalyticalMatrix>,
    features: Option<StandardizedFeatures>,
    fit: Option<RegressionFit>,
}

impl Context<'_> {
    fn matrix(&self) -> Result<&AnalyticalMatrix> {
        self.matrix
            .as_ref()
            .ok_or_else(|| Error::EmptyMatrix("matrix unavailable".into()))
    }

    fn features(&mut self) -> Result<&StandardizedFeatures> {
        if self.features.is_none() {
            self.features = Some(StandardizedFeatures::from_matrix(self.matrix()?)?);
        }
        Ok(self.features.as_ref().unwrap())
    }
}

/// Runs every stage.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunManifest> {
    run_stages(config, &Stage::ALL)
}

/// Runs `requested` and their dependencies, then writes the manifest.
pub fn run_stages(config: &PipelineConfig, requested: &[Stage]) -> Result<RunManifest> {
    config.validate()?;
    let seed = config.seed.expect("validated");
    let out_dir = &config.out_dir;

    let mut tables = Vec::new();
    let mut inputs = Vec::new();
    for (schema, path) in config.inputs.resolved() {
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let table = load_table(&path, schema)?;
        inputs.push(InputRecord {
            schema: schema.to_string(),
            file: FileDigest::of(file_label(&path), &bytes),
            rows: table.fragments.len(),
            warnings: table.warnings.clone(),
        });
        tables.push(table);
    }
    let dataset = Dataset::from_tables(&tables)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let stages = Stage::closure(requested);
    // stale reports from an earlier run must not masquerade as fresh output
    for stage in &stages {
        for name in stage.outputs() {
            let p = out_dir.join(name);
            if p.exists() {
                fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
            }
        }
    }

    let mut ctx = Context {
        cfg: config,
        seed,
        tables,
        dataset,
        matrix: None,
        features: None,
        fit: None,
    };
    let mut records: Vec<StageRecord> = Vec::new();
    for stage in stages {
        let blocked = stage
            .dependencies()
            .iter()
            .find(|d| records.iter().any(|r| r.stage == **d && !r.status.is_ok()));
        let (status, output) = match blocked {
            Some(dep) => (
                StageStatus::Skipped(format!("dependency `{dep}` did not complete")),
                StageOutput::default(),
            ),
            None => match run_stage(stage, &mut ctx) {
                Ok(out) => (StageStatus::Ok, out),
                Err(e) => (StageStatus::Failed(e.to_string()), StageOutput::default()),
            },
        };
        info!("stage {stage}: {status}");
        let mut outputs = Vec::new();
        for (name, bytes) in &output.files {
            report::write_atomic(&out_dir.join(name), bytes)?;
            outputs.push(FileDigest::of(name.clone(), bytes));
        }
        records.push(StageRecord {
            stage,
            status,
            outputs,
            warnings: output.warnings,
        });
    }

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        domain: config.domain,
        config: config.clone(),
        inputs,
        stages: records,
    };
    report::write_atomic(&out_dir.join(MANIFEST_FILE), &json_bytes(&manifest)?)?;
    Ok(manifest)
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn run_stage(stage: Stage, ctx: &mut Context) -> Result<StageOutput> {
    match stage {
        Stage::Ingest => stage_ingest(ctx),
        Stage::Consistency => stage_consistency(ctx),
        Stage::Cluster => stage_cluster(ctx),
        Stage::Vae => stage_vae(ctx),
        Stage::Regress => stage_regress(ctx),
        Stage::Lda => stage_lda(ctx),
        Stage::Counterfactual => stage_counterfactual(ctx),
        Stage::Bnet => stage_bnet(ctx),
        Stage::Report => stage_report(ctx),
    }
}

fn stage_ingest(ctx: &mut Context) -> Result<StageOutput> {
    let matrix = ctx.dataset.matrix(ctx.cfg.domain)?;
    let mut out = StageOutput::default();
    out.csv("matrix.csv", &report::matrix_table(&matrix));
    let tables: Vec<_> = ctx
        .tables
        .iter()
        .map(|t| {
            json!({
                "schema": t.schema.to_string(),
                "file": file_label(&t.path),
                "rows": t.fragments.len(),
                "missing_cells": t.fragments.iter().map(|f| f.missing_count()).sum::<usize>(),
            })
        })
        .collect();
    let complete = matrix.complete_rows(&[0, 1, 2, 3]).len();
    out.json(
        "ingest.json",
        &json!({
            "domain": matrix.domain,
            "countries": matrix.n_rows(),
            "complete_rows_adt_ict": complete,
            "columns": matrix.columns(),
            "tables": tables,
        }),
    )?;
    out.warnings = ctx.tables.iter().flat_map(|t| t.warnings.clone()).collect();
    ctx.matrix = Some(matrix);
    Ok(out)
}

fn stage_consistency(ctx: &mut Context) -> Result<StageOutput> {
    let rep = cross_domain_consistency(&ctx.dataset)?;
    let mut out = StageOutput::default();
    out.json("consistency.json", &rep)?;
    let mut scatter = CsvTable::new(&["country", "domain", "autonomy_effect", "digital_effect"]);
    for d in &rep.domains {
        for r in &ctx.dataset.records {
            let e = r.effects.get(d);
            if let Some((Some(a), Some(dg))) = e.map(|e| (e.autonomy, e.digital)) {
                scatter.push(vec![
                    r.country.clone(),
                    d.to_string(),
                    fmt_num(a),
                    fmt_num(dg),
                ]);
            }
        }
    }
    out.csv("autonomy_digital_by_domain.csv", &scatter);
    out.warnings = rep
        .paired_tests
        .iter()
        .filter_map(|t| {
            t.error
                .as_ref()
                .map(|e| format!("{} vs {}: {e}", t.domain_a, t.domain_b))
        })
        .collect();
    Ok(out)
}

fn stage_cluster(ctx: &mut Context) -> Result<StageOutput> {
    let (k, restarts, k_max, seed) = (
        ctx.cfg.cluster.k,
        ctx.cfg.cluster.restarts,
        ctx.cfg.cluster.k_max,
        ctx.seed,
    );
    let features = ctx.features()?;
    let model = kmeans_fit_with_restarts(features, k, seed, restarts)?;
    let curve = inertia_curve(features, k_max.min(features.len()), seed)?;
    let original: Vec<[f64; 3]> = model
        .centroids
        .iter()
        .map(|c| std::array::from_fn(|j| c[j] * features.column_stds[j] + features.column_means[j]))
        .collect();

    let mut out = StageOutput::default();
    out.csv("clusters.csv", &report::clusters_table(&model, &features.z));
    out.json(
        "cluster_summary.json",
        &json!({
            "k": model.k,
            "seed": model.seed,
            "restarts": restarts,
            "inertia": model.inertia,
            "iterations_run": model.iterations_run,
            "sizes": model.cluster_sizes(),
            "typologies": model.typology_labels(),
            "centroids_standardized": model.centroids,
            "centroids_original_units": original,
            "column_means": features.column_means,
            "column_stds": features.column_stds,
            "inertia_curve": curve.iter().map(|(k, i)| json!({"k": k, "inertia": i})).collect::<Vec<_>>(),
        }),
    )?;
    Ok(out)
}

fn stage_vae(ctx: &mut Context) -> Result<StageOutput> {
    let hyper = ctx.cfg.vae_hyper();
    let n_rank = ctx.cfg.report.readiness_n;
    let deltas = ctx.dataset.deltas();
    let features = ctx.features()?.clone();
    let (params, train) = vae_train(&features, &hyper)?;
    let embeddings = embed(&params, &features, hyper.alpha)?;

    let ict_corr = match readiness_ict_correlation(&embeddings, &deltas) {
        Ok((r, n)) => json!({"r": r, "n": n}),
        Err(e) => json!({"error": e.to_string()}),
    };
    let (ext_r, ext_ext): (Vec<f64>, Vec<f64>) = embeddings
        .iter()
        .filter_map(|e| {
            Some((
                e.readiness,
                ctx.dataset.get(&e.country)?.external_readiness?,
            ))
        })
        .unzip();
    let external = if ext_r.is_empty() {
        serde_json::Value::Null
    } else {
        match pearson(&ext_r, &ext_ext) {
            Ok(r) => json!({"r": r, "n": ext_r.len()}),
            Err(e) => json!({"error": e.to_string(), "n": ext_r.len()}),
        }
    };
    let orient = orientation_diagnostics(&embeddings, &features);
    let last = train.epochs.last().copied().unwrap_or_default();

    let mut out = StageOutput::default();
    out.csv("latent.csv", &report::latent_table(&embeddings, &deltas));
    out.csv("vae_training.csv", &report::training_curve_table(&train));
    out.csv(
        "readiness_ranking.csv",
        &report::ranking_table(&report::readiness_ranking(&embeddings, n_rank), "readiness"),
    );
    out.json(
        "vae.json",
        &json!({
            "hyperparameters": hyper,
            "n": features.len(),
            "final_loss": last,
            "readiness_vs_delta_ict": ict_corr,
            "readiness_vs_external_index": external,
            "orientation": {
                "autonomy": orient[0],
                "digital": orient[1],
                "teacher": orient[2],
            },
        }),
    )?;
    Ok(out)
}

fn coefficients_json(fit: &RegressionFit) -> serde_json::Value {
    json!({
        "standardization": fit.standardization,
        "intercept": fit.beta0,
        "coefficients": {
            "autonomy": fit.beta[0],
            "digital": fit.beta[1],
            "teacher": fit.beta[2],
        },
        "r_squared": fit.r_squared,
    })
}

fn stage_regress(ctx: &mut Context) -> Result<StageOutput> {
    let matrix = ctx.matrix()?;
    let data = RegressionData::from_matrix(matrix);
    let raw = fit_ols(&data, Standardization::Raw)?;
    let mode = match ctx.cfg.model.standardization {
        Standardization::Raw => Standardization::Both,
        m => m,
    };
    let standardized = fit_ols(&data, mode)?;

    let moderation =
        |outcome: &[f64], autonomy: &[f64], support: &[f64], label: &str| match moderation_slopes(
            autonomy, outcome, support,
        ) {
            Ok(m) => json!({"outcome": label, "moderator": "teacher_support", "result": m}),
            Err(e) => {
                json!({"outcome": label, "moderator": "teacher_support", "error": e.to_string()})
            }
        };
    let adt = matrix.complete_rows(&[COL_A, COL_D, COL_T]);
    let col = |j: usize, rows: &[usize]| -> Vec<f64> {
        rows.iter().map(|&i| matrix.values[i][j].unwrap()).collect()
    };
    let digital = moderation(
        &col(COL_D, &adt),
        &col(COL_A, &adt),
        &col(COL_T, &adt),
        "digital_effect",
    );
    let a: Vec<f64> = data.x.iter().map(|r| r[0]).collect();
    let t: Vec<f64> = data.x.iter().map(|r| r[2]).collect();
    let ict = moderation(&data.y, &a, &t, "delta_ict");

    let mut out = StageOutput::default();
    out.json(
        "regression.json",
        &json!({
            "outcome": "delta_ict",
            "domain": matrix.domain,
            "n": raw.n,
            "countries": raw.countries,
            "raw": coefficients_json(&raw),
            "standardized": coefficients_json(&standardized),
        }),
    )?;
    out.json("interaction.json", &json!({"analyses": [digital, ict]}))?;
    ctx.fit = Some(standardized);
    Ok(out)
}

fn stage_lda(ctx: &mut Context) -> Result<StageOutput> {
    let data = RegressionData::from_matrix(ctx.matrix()?);
    let z = StandardizedFeatures::from_rows(data.countries.clone(), &data.x)?;
    let threshold = ctx.cfg.model.threshold.to_threshold()?;
    let mut model = fit_lda(&z.z, &data.y, threshold)?;
    let (labels, cut) = dichotomize(&data.y, threshold)?;

    let mut out = StageOutput::default();
    let cv = match stratified_cv_accuracy(&z.z, &labels, ctx.cfg.model.folds, ctx.seed) {
        Ok(cv) => {
            model.cv_accuracy = Some(cv.accuracy);
            out.warnings.extend(cv.warnings.clone());
            json!({
                "accuracy": cv.accuracy,
                "folds_requested": ctx.cfg.model.folds,
                "folds_used": cv.folds_used,
                "fold_accuracies": cv.fold_accuracies,
                "seed": ctx.seed,
            })
        }
        Err(e) => {
            out.warnings
                .push(format!("cross-validation unavailable: {e}"));
            json!({"error": e.to_string()})
        }
    };
    out.warnings.extend(model.warnings.clone());
    out.json(
        "lda.json",
        &json!({
            "threshold": ctx.cfg.model.threshold,
            "threshold_value": cut,
            "n": data.len(),
            "weights": {
                "autonomy": model.weights[0],
                "digital": model.weights[1],
                "teacher": model.weights[2],
            },
            "intercept": model.intercept,
            "class_counts": {"low": model.class_counts[0], "high": model.class_counts[1]},
            "ridge": model.ridge,
            "training_accuracy": model.training_accuracy,
            "cv_accuracy": model.cv_accuracy,
            "cv": cv,
        }),
    )?;
    out.csv(
        "lda_scores.csv",
        &report::lda_scores_table(&model, &data.countries, &z.z, &data.y, &labels),
    );
    Ok(out)
}

fn stage_counterfactual(ctx: &mut Context) -> Result<StageOutput> {
    let fit = ctx
        .fit
        .as_ref()
        .ok_or_else(|| Error::Contract("regression fit unavailable".into()))?;
    let cf = counterfactual_on_fit(fit)?;
    let n = cf.rows.len() as f64;
    let mean_of =
        |f: fn(&crate::model::CounterfactualRow) -> f64| cf.rows.iter().map(f).sum::<f64>() / n;

    let mut out = StageOutput::default();
    out.csv("counterfactual.csv", &report::counterfactual_table(&cf));
    out.json(
        "counterfactual.json",
        &json!({
            "intervention": "autonomy + 1 standard deviation",
            "standardization": fit.standardization,
            "outcome_standardized": cf.outcome_standardized,
            "n": cf.rows.len(),
            "marginal_effect": fit.beta[0],
            "mean_baseline": mean_of(|r| r.baseline),
            "mean_counterfactual": mean_of(|r| r.counterfactual),
        }),
    )?;
    Ok(out)
}

fn stage_bnet(ctx: &mut Context) -> Result<StageOutput> {
    let data = discretize_dataset(&ctx.dataset.deltas())?;
    let opts = HillClimbOptions {
        restarts: ctx.cfg.bnet.restarts,
        seed: ctx.seed,
    };
    let (dag, bic) = hill_climb_with(&data, &opts);
    let net = fit_cpts(&dag, &data)?;
    let ict = BN_FIELDS
        .iter()
        .position(|f| *f == AspirationField::Ict)
        .unwrap();
    let marginal = net.marginal(ict)?;
    let shares = data.marginal(ict);

    let queries: Vec<_> = ctx
        .cfg
        .bnet
        .queries
        .iter()
        .map(|q| {
            let evidence: Vec<(&str, Tertile)> = q
                .evidence
                .iter()
                .map(|(k, v)| (k.as_str(), v.parse().expect("validated")))
                .collect();
            match query(&net, &q.target, &evidence) {
                Ok(p) => json!({
                    "target": q.target,
                    "evidence": q.evidence,
                    "distribution": {"low": p[0], "medium": p[1], "high": p[2]},
                }),
                Err(e) => {
                    json!({"target": q.target, "evidence": q.evidence, "error": e.to_string()})
                }
            }
        })
        .collect();

    let mut out = StageOutput::default();
    out.json(
        "bnet.json",
        &json!({
            "variables": data.variables,
            "n": data.n_rows(),
            "seed": ctx.seed,
            "restarts": opts.restarts,
            "bic": bic,
            "edges": dag.edge_names().iter().map(|(p, c)| json!({"parent": p, "child": c})).collect::<Vec<_>>(),
            "cpts": report::cpt_reports(&net),
            "delta_ict_marginal": {"low": marginal[0], "medium": marginal[1], "high": marginal[2]},
            "delta_ict_shares": {"low": shares[0], "medium": shares[1], "high": shares[2]},
            "queries": queries,
        }),
    )?;
    let mut header = vec!["country"];
    header.extend(data.variables.iter().map(String::as_str));
    let mut table = CsvTable::new(&header);
    for (i, c) in data.countries.iter().enumerate() {
        let mut row = vec![c.clone()];
        row.extend(data.columns.iter().map(|col| col[i].as_str().to_string()));
        table.push(row);
    }
    out.csv("bnet_discretized.csv", &table);
    out.warnings = net.warnings.clone();
    Ok(out)
}

fn stage_report(ctx: &mut Context) -> Result<StageOutput> {
    let deltas = ctx.dataset.deltas();
    let rc = &ctx.cfg.report;
    let ict: Vec<f64> = deltas.iter().filter_map(|d| d.delta_ict).collect();

    let mut out = StageOutput::default();
    out.csv(
        "ict_histogram.csv",
        &report::histogram_table(&ict, rc.histogram_bins)?,
    );
    for (name, dir) in [
        ("ict_top.csv", Direction::Top),
        ("ict_bottom.csv", Direction::Bottom),
    ] {
        let ranked = report::rank_changes(&deltas, "ict", dir, rc.ranking_n)?;
        out.csv(name, &report::ranking_table(&ranked, "delta_ict"));
    }
    out.csv(
        "sci_eng_vs_ict.csv",
        &report::scatter_table(&deltas, AspirationField::SciEng, AspirationField::Ict),
    );
    out.csv(
        "volatility_heatmap.csv",
        &report::heatmap_table(&deltas, rc.heatmap_n),
    );
    out.csv("career_boxplots.csv", &report::boxplot_table(&deltas));
    Ok(out)
}
