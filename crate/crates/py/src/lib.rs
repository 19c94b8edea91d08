//! Python bindings. Structured results come back as plain dicts and lists;
//! core errors surface as `ValueError` (data or contract problems) or
//! `OSError` (unreadable files).

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use aspire_core::bnet::{self, DiscreteDataset};
use aspire_core::cluster;
use aspire_core::config::PipelineConfig;
use aspire_core::ingest::{self, Domain, LoadedTable, TableSchema};
use aspire_core::model::{self, RegressionData, Standardization, Threshold};
use aspire_core::pipeline::{self, Stage};
use aspire_core::stats::{self, StandardizedFeatures, Tertile};
use aspire_core::vae::{self, VaeHyper};
use aspire_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

fn rows3(rows: &[Vec<f64>]) -> PyResult<Vec<[f64; 3]>> {
    rows.iter()
        .map(|r| {
            <[f64; 3]>::try_from(r.as_slice()).map_err(|_| {
                PyValueError::new_err(format!("expected 3 values per row, got {}", r.len()))
            })
        })
        .collect()
}

fn threshold(value: &Bound<'_, PyAny>) -> PyResult<Threshold> {
    if let Ok(s) = value.extract::<String>() {
        if s == "median" {
            return Ok(Threshold::Median);
        }
        return Err(PyValueError::new_err(format!("unknown threshold `{s}`")));
    }
    Ok(Threshold::Value(value.extract::<f64>()?))
}

#[pyfunction]
fn parse_cell(text: &str) -> Option<f64> {
    ingest::parse_cell(text)
}

#[pyfunction]
fn normalize_country(name: &str) -> String {
    ingest::normalize_country(name)
}

#[pyfunction]
#[pyo3(signature = (v2018, v2022))]
fn compute_delta(v2018: Option<f64>, v2022: Option<f64>) -> Option<f64> {
    ingest::compute_delta(v2018, v2022)
}

#[pyfunction]
fn zscore(values: Vec<f64>) -> PyResult<Vec<f64>> {
    stats::zscore(&values).map_err(py_err)
}

#[pyfunction]
fn pearson(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    stats::pearson(&x, &y).map_err(py_err)
}

#[pyfunction]
fn paired_t_test<'py>(py: Python<'py>, x: Vec<f64>, y: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &stats::paired_t_test(&x, &y).map_err(py_err)?)
}

#[pyfunction]
fn quantile_bins(values: Vec<f64>) -> PyResult<Vec<String>> {
    Ok(stats::quantile_bins(&values)
        .map_err(py_err)?
        .into_iter()
        .map(|t| t.as_str().to_string())
        .collect())
}

/// Merged country tables loaded from `{schema: path}` (schema names such as
/// "career_deltas" or "domain_math").
#[pyclass(frozen)]
struct Dataset {
    inner: ingest::Dataset,
}

#[pymethods]
impl Dataset {
    #[new]
    fn new(paths: BTreeMap<String, PathBuf>) -> PyResult<Self> {
        let tables = paths
            .iter()
            .map(|(schema, path)| {
                ingest::load_table(path, parse::<TableSchema>(schema)?).map_err(py_err)
            })
            .collect::<PyResult<Vec<LoadedTable>>>()?;
        Ok(Dataset {
            inner: ingest::Dataset::from_tables(&tables).map_err(py_err)?,
        })
    }

    fn countries(&self) -> Vec<String> {
        self.inner.countries()
    }

    fn __len__(&self) -> usize {
        self.inner.records.len()
    }

    /// Rows of `A, D, T, delta_ict, delta_health, delta_sci_eng, delta_sci_tech`
    /// with `None` for missing cells.
    #[pyo3(signature = (domain="math"))]
    fn matrix<'py>(&self, py: Python<'py>, domain: &str) -> PyResult<Bound<'py, PyAny>> {
        let m = self
            .inner
            .matrix(parse::<Domain>(domain)?)
            .map_err(py_err)?;
        to_py(
            py,
            &serde_json::json!({
                "domain": m.domain,
                "columns": m.columns(),
                "countries": m.countries,
                "values": m.values,
            }),
        )
    }

    fn deltas<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.deltas())
    }
}

/// k-means on z-scored `(A, D, T)` rows.
#[pyfunction]
#[pyo3(signature = (countries, rows, k=3, seed=0, restarts=10))]
fn kmeans<'py>(
    py: Python<'py>,
    countries: Vec<String>,
    rows: Vec<Vec<f64>>,
    k: usize,
    seed: u64,
    restarts: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let features = StandardizedFeatures::from_rows(countries, &rows3(&rows)?).map_err(py_err)?;
    let m = cluster::kmeans_fit_with_restarts(&features, k, seed, restarts).map_err(py_err)?;
    let labels = m.typology_labels();
    to_py(
        py,
        &serde_json::json!({
            "assignments": m.assignments,
            "centroids": m.centroids,
            "inertia": m.inertia,
            "sizes": m.cluster_sizes(),
            "typologies": labels,
            "z": features.z,
        }),
    )
}

#[pyfunction]
#[pyo3(signature = (x, y, standardization="both"))]
fn fit_ols<'py>(
    py: Python<'py>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    standardization: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let mode = match standardization {
        "raw" => Standardization::Raw,
        "predictors" => Standardization::Predictors,
        "both" => Standardization::Both,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown standardization `{other}`"
            )))
        }
    };
    let names = (0..y.len()).map(|i| i.to_string()).collect();
    let data = RegressionData::new(names, rows3(&x)?, y).map_err(py_err)?;
    let fit = model::fit_ols(&data, mode).map_err(py_err)?;
    let cf = if fit.predictors_standardized() {
        Some(model::counterfactual_on_fit(&fit).map_err(py_err)?)
    } else {
        None
    };
    to_py(
        py,
        &serde_json::json!({
            "intercept": fit.beta0,
            "coefficients": fit.beta,
            "r_squared": fit.r_squared,
            "fitted": fit.fitted,
            "residuals": fit.residuals,
            "counterfactual": cf.map(|c| c.rows),
        }),
    )
}

/// Two-class LDA on rows `x` with the outcome `y` split at `threshold`
/// ("median" or a number); `folds` stratified CV folds.
#[pyfunction]
#[pyo3(signature = (x, y, threshold=None, folds=5, seed=0))]
fn fit_lda<'py>(
    py: Python<'py>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    threshold: Option<&Bound<'py, PyAny>>,
    folds: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let th = match threshold {
        Some(v) => self::threshold(v)?,
        None => Threshold::Median,
    };
    let x = rows3(&x)?;
    let mut m = model::fit_lda(&x, &y, th).map_err(py_err)?;
    let (labels, _) = model::dichotomize(&y, th).map_err(py_err)?;
    let cv = model::stratified_cv_accuracy(&x, &labels, folds, seed).map_err(py_err)?;
    m.cv_accuracy = Some(cv.accuracy);
    let scores: Vec<f64> = x.iter().map(|r| m.score(r)).collect();
    to_py(
        py,
        &serde_json::json!({"model": m, "scores": scores, "cv": cv}),
    )
}

/// Trains the VAE on z-scored rows and returns the embedding and loss curve.
#[pyfunction]
#[pyo3(signature = (countries, rows, seed, epochs=2000, hidden=8, learning_rate=0.01, alpha=0.5))]
#[allow(clippy::too_many_arguments)]
fn train_vae<'py>(
    py: Python<'py>,
    countries: Vec<String>,
    rows: Vec<Vec<f64>>,
    seed: u64,
    epochs: usize,
    hidden: usize,
    learning_rate: f64,
    alpha: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let features = StandardizedFeatures::from_rows(countries, &rows3(&rows)?).map_err(py_err)?;
    let hyper = VaeHyper {
        hidden,
        epochs,
        learning_rate,
        seed,
        alpha,
    };
    let (params, report) = vae::vae_train(&features, &hyper).map_err(py_err)?;
    let emb = vae::embed(&params, &features, alpha).map_err(py_err)?;
    to_py(
        py,
        &serde_json::json!({"embeddings": emb, "losses": report.epochs}),
    )
}

/// Discrete Bayesian network learned by BIC hill climbing.
#[pyclass(frozen)]
struct BayesNet {
    net: bnet::BayesNet,
    bic: f64,
}

#[pymethods]
impl BayesNet {
    /// `columns[j][i]` is the category ("low", "medium", "high") of
    /// variable `j` in row `i`.
    #[staticmethod]
    #[pyo3(signature = (variables, columns, seed=0, restarts=5))]
    fn learn(
        variables: Vec<String>,
        columns: Vec<Vec<String>>,
        seed: u64,
        restarts: usize,
    ) -> PyResult<Self> {
        let n = columns.first().map_or(0, Vec::len);
        let cols = columns
            .iter()
            .map(|c| {
                c.iter()
                    .map(|s| parse::<Tertile>(s))
                    .collect::<PyResult<Vec<_>>>()
            })
            .collect::<PyResult<Vec<_>>>()?;
        let data = DiscreteDataset::new(variables, (0..n).map(|i| i.to_string()).collect(), cols)
            .map_err(py_err)?;
        let (dag, bic) = bnet::hill_climb_with(&data, &bnet::HillClimbOptions { restarts, seed });
        Ok(BayesNet {
            net: bnet::fit_cpts(&dag, &data).map_err(py_err)?,
            bic,
        })
    }

    #[getter]
    fn bic(&self) -> f64 {
        self.bic
    }

    fn edges(&self) -> Vec<(String, String)> {
        self.net.structure.edge_names()
    }

    /// Posterior over ("low", "medium", "high") of `target` given evidence.
    #[pyo3(signature = (target, evidence=None))]
    fn query(
        &self,
        target: &str,
        evidence: Option<BTreeMap<String, String>>,
    ) -> PyResult<BTreeMap<String, f64>> {
        let ev = evidence
            .unwrap_or_default()
            .into_iter()
            .map(|(k, v)| Ok((k, parse::<Tertile>(&v)?)))
            .collect::<PyResult<Vec<_>>>()?;
        let ev_ref: Vec<(&str, Tertile)> = ev.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        let p = bnet::query(&self.net, target, &ev_ref).map_err(py_err)?;
        Ok(["low", "medium", "high"]
            .iter()
            .zip(p)
            .map(|(k, v)| (k.to_string(), v))
            .collect())
    }

    fn __repr__(&self) -> String {
        format!("BayesNet(edges={:?}, bic={})", self.edges(), self.bic)
    }
}

/// Runs the pipeline described by a TOML config and returns the manifest.
#[pyfunction]
#[pyo3(signature = (config, out=None, seed=None, domain=None, stages=None))]
fn run_pipeline<'py>(
    py: Python<'py>,
    config: PathBuf,
    out: Option<PathBuf>,
    seed: Option<u64>,
    domain: Option<&str>,
    stages: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = PipelineConfig::from_file(&config).map_err(py_err)?;
    if let Some(out) = out {
        cfg.out_dir = out;
    }
    if seed.is_some() {
        cfg.seed = seed;
    }
    if let Some(d) = domain {
        cfg.domain = parse(d)?;
    }
    let stages = match stages {
        Some(names) => names
            .iter()
            .map(|s| parse::<Stage>(s))
            .collect::<PyResult<Vec<_>>>()?,
        None => Stage::ALL.to_vec(),
    };
    let manifest = pipeline::run_stages(&cfg, &stages).map_err(py_err)?;
    to_py(py, &manifest)
}

#[pymodule]
fn aspire(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(parse_cell, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_country, m)?)?;
    m.add_function(wrap_pyfunction!(compute_delta, m)?)?;
    m.add_function(wrap_pyfunction!(zscore, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(paired_t_test, m)?)?;
    m.add_function(wrap_pyfunction!(quantile_bins, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(fit_ols, m)?)?;
    m.add_function(wrap_pyfunction!(fit_lda, m)?)?;
    m.add_function(wrap_pyfunction!(train_vae, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_class::<Dataset>()?;
    m.add_class::<BayesNet>()?;
    Ok(())
}
