//! Plot-ready CSV/JSON series and the helpers that write them.
//!
//! Numbers are rendered with Rust's shortest round-trip formatting (never
//! exponent notation), so every emitted value parses back to the same `f64`
//! through [`crate::ingest::parse_cell`]. Missing values are written as `m`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bnet::{BayesNet, CARDINALITY};
use crate::cluster::ClusterModel;
use crate::error::{Error, Result};
use crate::ingest::{AnalyticalMatrix, AspirationDelta, AspirationField, MATRIX_COLUMNS};
use crate::model::{CounterfactualResult, LdaModel};
use crate::stats::{five_number_summary, histogram, FiveNumberSummary, Tertile};
use crate::vae::{LatentEmbedding, TrainReport};

pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "m".to_string()
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "m".to_string(), fmt_num)
}

/// Writes through a sibling temporary file and a rename, so readers never
/// observe a half-written report.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Contract(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Top,
    Bottom,
}

/// Largest (`Top`) or smallest (`Bottom`) changes of one field, ties broken
/// by country name; at most `n` entries.
pub fn rank_changes(
    deltas: &[AspirationDelta],
    field: &str,
    direction: Direction,
    n: usize,
) -> Result<Vec<(String, f64)>> {
    let field: AspirationField = field.parse()?;
    let mut values: Vec<(String, f64)> = deltas
        .iter()
        .filter_map(|d| Some((d.country.clone(), d.get(field)?)))
        .collect();
    if values.is_empty() {
        return Err(Error::insufficient(
            format!("ranking of {}", field.delta_column()),
            1,
            0,
        ));
    }
    values.sort_by(|a, b| {
        let by_value = match direction {
            Direction::Top => b.1.total_cmp(&a.1),
            Direction::Bottom => a.1.total_cmp(&b.1),
        };
        by_value.then_with(|| a.0.cmp(&b.0))
    });
    values.truncate(n);
    Ok(values)
}

/// Sum of absolute changes across the four fields.
pub fn volatility(d: &AspirationDelta) -> Option<f64> {
    AspirationField::ALL
        .iter()
        .map(|f| d.get(*f).map(f64::abs))
        .sum()
}

/// Countries with all four deltas, most volatile first (ties by name).
pub fn volatility_ranking(deltas: &[AspirationDelta], n: usize) -> Vec<(AspirationDelta, f64)> {
    let mut rows: Vec<(AspirationDelta, f64)> = deltas
        .iter()
        .filter_map(|d| Some((d.clone(), volatility(d)?)))
        .collect();
    rows.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| a.0.country.cmp(&b.0.country))
    });
    rows.truncate(n);
    rows
}

pub fn histogram_table(values: &[f64], bins: usize) -> Result<CsvTable> {
    let h = histogram(values, bins)?;
    let mut t = CsvTable::new(&["bin_lower", "bin_upper", "count"]);
    for (i, c) in h.counts.iter().enumerate() {
        t.push(vec![
            fmt_num(h.edges[i]),
            fmt_num(h.edges[i + 1]),
            c.to_string(),
        ]);
    }
    Ok(t)
}

pub fn ranking_table(ranked: &[(String, f64)], value_column: &str) -> CsvTable {
    let mut t = CsvTable::new(&["rank", "country", value_column]);
    for (i, (c, v)) in ranked.iter().enumerate() {
        t.push(vec![(i + 1).to_string(), c.clone(), fmt_num(*v)]);
    }
    t
}

/// Two delta fields side by side for countries where both are present.
pub fn scatter_table(
    deltas: &[AspirationDelta],
    x: AspirationField,
    y: AspirationField,
) -> CsvTable {
    let mut t = CsvTable::new(&["country", x.delta_column(), y.delta_column()]);
    for d in deltas {
        if let (Some(a), Some(b)) = (d.get(x), d.get(y)) {
            t.push(vec![d.country.clone(), fmt_num(a), fmt_num(b)]);
        }
    }
    t
}

pub fn heatmap_table(deltas: &[AspirationDelta], n: usize) -> CsvTable {
    let mut t = CsvTable::new(&[
        "country",
        "delta_health",
        "delta_sci_eng",
        "delta_sci_tech",
        "delta_ict",
        "volatility",
    ]);
    for (d, v) in volatility_ranking(deltas, n) {
        t.push(vec![
            d.country.clone(),
            fmt_opt(d.delta_health),
            fmt_opt(d.delta_sci_eng),
            fmt_opt(d.delta_sci_tech),
            fmt_opt(d.delta_ict),
            fmt_num(v),
        ]);
    }
    t
}

/// Five-number summaries per aspiration field (fields without data are omitted).
pub fn boxplot_summaries(deltas: &[AspirationDelta]) -> Vec<(AspirationField, FiveNumberSummary)> {
    AspirationField::ALL
        .iter()
        .filter_map(|f| {
            let values: Vec<f64> = deltas.iter().filter_map(|d| d.get(*f)).collect();
            five_number_summary(&values).ok().map(|s| (*f, s))
        })
        .collect()
}

pub fn boxplot_table(deltas: &[AspirationDelta]) -> CsvTable {
    let mut t = CsvTable::new(&["field", "n", "min", "q1", "median", "q3", "max"]);
    for (f, s) in boxplot_summaries(deltas) {
        t.push(vec![
            f.delta_column().to_string(),
            s.n.to_string(),
            fmt_num(s.min),
            fmt_num(s.q1),
            fmt_num(s.median),
            fmt_num(s.q3),
            fmt_num(s.max),
        ]);
    }
    t
}

pub fn matrix_table(m: &AnalyticalMatrix) -> CsvTable {
    let mut header = vec!["country"];
    header.extend(MATRIX_COLUMNS);
    let mut t = CsvTable::new(&header);
    for (c, row) in m.countries.iter().zip(&m.values) {
        let mut r = vec![c.clone()];
        r.extend(row.iter().map(|v| fmt_opt(*v)));
        t.push(r);
    }
    t
}

pub fn clusters_table(model: &ClusterModel, z: &[[f64; 3]]) -> CsvTable {
    let mut t = CsvTable::new(&["country", "cluster", "z_A", "z_D", "z_T"]);
    for ((c, a), p) in model.countries.iter().zip(&model.assignments).zip(z) {
        t.push(vec![
            c.clone(),
            a.to_string(),
            fmt_num(p[0]),
            fmt_num(p[1]),
            fmt_num(p[2]),
        ]);
    }
    t
}

pub fn latent_table(embeddings: &[LatentEmbedding], deltas: &[AspirationDelta]) -> CsvTable {
    let mut t = CsvTable::new(&["country", "mu1", "mu2", "readiness", "delta_ict"]);
    for e in embeddings {
        let ict = deltas
            .iter()
            .find(|d| d.country == e.country)
            .and_then(|d| d.delta_ict);
        t.push(vec![
            e.country.clone(),
            fmt_num(e.mu[0]),
            fmt_num(e.mu[1]),
            fmt_num(e.readiness),
            fmt_opt(ict),
        ]);
    }
    t
}

pub fn training_curve_table(report: &TrainReport) -> CsvTable {
    let mut t = CsvTable::new(&["epoch", "reconstruction", "kl", "total"]);
    for (i, l) in report.epochs.iter().enumerate() {
        t.push(vec![
            (i + 1).to_string(),
            fmt_num(l.reconstruction),
            fmt_num(l.kl),
            fmt_num(l.total),
        ]);
    }
    t
}

/// Highest readiness first, ties by country name.
pub fn readiness_ranking(embeddings: &[LatentEmbedding], n: usize) -> Vec<(String, f64)> {
    let mut r: Vec<(String, f64)> = embeddings
        .iter()
        .map(|e| (e.country.clone(), e.readiness))
        .collect();
    r.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    r.truncate(n);
    r
}

pub fn counterfactual_table(cf: &CounterfactualResult) -> CsvTable {
    let mut t = CsvTable::new(&["country", "observed", "baseline", "counterfactual"]);
    for r in &cf.rows {
        t.push(vec![
            r.country.clone(),
            fmt_num(r.observed),
            fmt_num(r.baseline),
            fmt_num(r.counterfactual),
        ]);
    }
    t
}

pub fn lda_scores_table(
    model: &LdaModel,
    countries: &[String],
    x: &[[f64; 3]],
    y: &[f64],
    labels: &[bool],
) -> CsvTable {
    let mut t = CsvTable::new(&["country", "delta_ict", "group", "score", "predicted"]);
    for i in 0..countries.len() {
        let group = |high: bool| if high { "high" } else { "low" }.to_string();
        t.push(vec![
            countries[i].clone(),
            fmt_num(y[i]),
            group(labels[i]),
            fmt_num(model.score(&x[i])),
            group(model.predict(&x[i])),
        ]);
    }
    t
}

/// JSON-friendly view of a fitted network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CptReport {
    pub node: String,
    pub parents: Vec<String>,
    pub rows: Vec<CptRowReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CptRowReport {
    /// Parent categories in `parents` order.
    pub parent_states: Vec<Tertile>,
    pub low: f64,
    pub medium: f64,
    pub high: f64,
}

pub fn cpt_reports(net: &BayesNet) -> Vec<CptReport> {
    let names = net.variables();
    net.cpts
        .iter()
        .map(|cpt| CptReport {
            node: names[cpt.node].clone(),
            parents: cpt.parents.iter().map(|&p| names[p].clone()).collect(),
            rows: cpt
                .table
                .iter()
                .enumerate()
                .map(|(cfg, row)| {
                    let mut states = vec![Tertile::Low; cpt.parents.len()];
                    let mut rest = cfg;
                    for s in states.iter_mut().rev() {
                        *s = Tertile::from_index(rest % CARDINALITY).unwrap();
                        rest /= CARDINALITY;
                    }
                    CptRowReport {
                        parent_states: states,
                        low: row[0],
                        medium: row[1],
                        high: row[2],
                    }
                })
                .collect(),
        })
        .collect()
}
