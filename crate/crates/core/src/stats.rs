//! Statistical primitives shared by the analysis stages.
//!
//! Missing-data policy: correlations and paired tests use pairwise-complete
//! observations, standardization uses listwise deletion over the three
//! learning-environment indicators.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::ingest::{AnalyticalMatrix, COL_A, COL_D, COL_T};

pub const INDICATOR_LABELS: [&str; 3] = ["A", "D", "T"];

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation (divides by n).
pub fn population_std(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Sample standard deviation (divides by n - 1).
pub fn sample_std(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// `(x - mean) / sd` with the population standard deviation.
pub fn zscore(values: &[f64]) -> Result<Vec<f64>> {
    zscore_named(values, "values").map(|(z, _, _)| z)
}

fn zscore_named(values: &[f64], name: &str) -> Result<(Vec<f64>, f64, f64)> {
    if values.len() < 2 {
        return Err(Error::insufficient(
            format!("z-score of `{name}`"),
            2,
            values.len(),
        ));
    }
    let m = mean(values);
    let sd = population_std(values);
    // relative guard: sd below rounding noise of the mean counts as zero
    if !(sd > 1e-12 * m.abs().max(1.0)) {
        return Err(Error::DegenerateColumn(name.to_string()));
    }
    Ok((values.iter().map(|v| (v - m) / sd).collect(), m, sd))
}

/// Listwise-complete z-scored (A, D, T) feature vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardizedFeatures {
    pub countries: Vec<String>,
    pub z: Vec<[f64; 3]>,
    pub column_means: [f64; 3],
    pub column_stds: [f64; 3],
}

impl StandardizedFeatures {
    pub fn from_matrix(matrix: &AnalyticalMatrix) -> Result<Self> {
        let keep = matrix.complete_rows(&[COL_A, COL_D, COL_T]);
        let countries = keep.iter().map(|&i| matrix.countries[i].clone()).collect();
        let rows = keep
            .iter()
            .map(|&i| {
                let r = &matrix.values[i];
                [r[COL_A].unwrap(), r[COL_D].unwrap(), r[COL_T].unwrap()]
            })
            .collect::<Vec<_>>();
        Self::from_rows(countries, &rows)
    }

    pub fn from_rows(countries: Vec<String>, rows: &[[f64; 3]]) -> Result<Self> {
        if countries.len() != rows.len() {
            return Err(Error::Contract(format!(
                "{} country names for {} feature rows",
                countries.len(),
                rows.len()
            )));
        }
        let mut z = vec![[0.0; 3]; rows.len()];
        let mut column_means = [0.0; 3];
        let mut column_stds = [0.0; 3];
        for j in 0..3 {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let (zc, m, sd) = zscore_named(&col, INDICATOR_LABELS[j])?;
            for (row, v) in z.iter_mut().zip(zc) {
                row[j] = v;
            }
            column_means[j] = m;
            column_stds[j] = sd;
        }
        Ok(StandardizedFeatures {
            countries,
            z,
            column_means,
            column_stds,
        })
    }

    /// Wraps vectors that are already standardized (unit transform).
    pub fn from_standardized(countries: Vec<String>, z: Vec<[f64; 3]>) -> Self {
        StandardizedFeatures {
            countries,
            z,
            column_means: [0.0; 3],
            column_stds: [1.0; 3],
        }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn position(&self, country: &str) -> Option<usize> {
        self.countries.iter().position(|c| c == country)
    }

    /// Undoes the standardization of one row.
    pub fn restore(&self, i: usize) -> [f64; 3] {
        std::array::from_fn(|j| self.z[i][j] * self.column_stds[j] + self.column_means[j])
    }
}

fn complete_pairs(x: &[Option<f64>], y: &[Option<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != y.len() {
        return Err(Error::Contract(format!(
            "paired sequences differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    Ok(x.iter()
        .zip(y)
        .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
        .unzip())
}

/// Pearson product-moment correlation of two complete sequences.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Contract(format!(
            "paired sequences differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 3 {
        return Err(Error::insufficient("pearson correlation", 3, x.len()));
    }
    let mx = mean(x);
    let my = mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(Error::insufficient(
            "pearson correlation (zero variance)",
            3,
            0,
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Pearson over pairwise-complete observations; also returns the count used.
pub fn pearson_pairwise(x: &[Option<f64>], y: &[Option<f64>]) -> Result<(f64, usize)> {
    let (a, b) = complete_pairs(x, y)?;
    let n = a.len();
    pearson(&a, &b).map(|r| (r, n))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    /// `None` where a pair had fewer than 3 complete observations or no variance.
    pub rho: Vec<Vec<Option<f64>>>,
    pub n_used: Vec<Vec<usize>>,
}

pub fn correlation_matrix(
    labels: &[String],
    columns: &[Vec<Option<f64>>],
) -> Result<CorrelationMatrix> {
    if labels.len() != columns.len() {
        return Err(Error::Contract("one label per column required".into()));
    }
    let k = columns.len();
    let mut rho = vec![vec![None; k]; k];
    let mut n_used = vec![vec![0; k]; k];
    for i in 0..k {
        rho[i][i] = Some(1.0);
        n_used[i][i] = columns[i].iter().flatten().count();
        for j in (i + 1)..k {
            let (a, b) = complete_pairs(&columns[i], &columns[j])?;
            n_used[i][j] = a.len();
            n_used[j][i] = a.len();
            let r = pearson(&a, &b).ok();
            rho[i][j] = r;
            rho[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        labels: labels.to_vec(),
        rho,
        n_used,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub mean_difference: f64,
    pub n: usize,
}

/// Paired t-test on `x - y` with a two-sided p-value.
///
/// Identical differences give either `t = 0, p = 1` (all zero) or an
/// infinite statistic with `p = 0`.
pub fn paired_t_test(x: &[f64], y: &[f64]) -> Result<PairedTestResult> {
    if x.len() != y.len() {
        return Err(Error::Contract(format!(
            "paired sequences differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::insufficient("paired t-test", 2, n));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let md = mean(&d);
    let sd = sample_std(&d);
    let df = n - 1;
    let (t, p) = if sd == 0.0 {
        if md == 0.0 {
            (0.0, 1.0)
        } else {
            (md.signum() * f64::INFINITY, 0.0)
        }
    } else {
        let t = md / (sd / (n as f64).sqrt());
        (t, two_sided_t_p(t, df as f64))
    };
    Ok(PairedTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: p,
        mean_difference: md,
        n,
    })
}

pub fn paired_t_test_pairwise(x: &[Option<f64>], y: &[Option<f64>]) -> Result<PairedTestResult> {
    let (a, b) = complete_pairs(x, y)?;
    paired_t_test(&a, &b)
}

fn two_sided_t_p(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.cdf(-t.abs())).clamp(0.0, 1.0)
}

/// Linear-interpolation quantile of sorted data (`h = (n - 1) p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::insufficient("quantile", 1, 0));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, p))
}

pub fn median(values: &[f64]) -> Result<f64> {
    quantile(values, 0.5)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tertile {
    Low,
    Medium,
    High,
}

impl Tertile {
    pub const ALL: [Tertile; 3] = [Tertile::Low, Tertile::Medium, Tertile::High];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Tertile> {
        Tertile::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tertile::Low => "low",
            Tertile::Medium => "medium",
            Tertile::High => "high",
        }
    }
}

impl std::str::FromStr for Tertile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" => Ok(Tertile::Low),
            "medium" => Ok(Tertile::Medium),
            "high" => Ok(Tertile::High),
            other => Err(Error::Contract(format!("unknown category `{other}`"))),
        }
    }
}

/// Tertile cut points `(q1, q2)` at the 1/3 and 2/3 quantiles.
pub fn tertile_thresholds(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 3 {
        return Err(Error::insufficient("quantile binning", 3, values.len()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((
        quantile_sorted(&sorted, 1.0 / 3.0),
        quantile_sorted(&sorted, 2.0 / 3.0),
    ))
}

/// Bins values into low / medium / high; boundary ties go to the lower bin.
pub fn quantile_bins(values: &[f64]) -> Result<Vec<Tertile>> {
    let (q1, q2) = tertile_thresholds(values)?;
    Ok(values
        .iter()
        .map(|&v| {
            if v <= q1 {
                Tertile::Low
            } else if v <= q2 {
                Tertile::Medium
            } else {
                Tertile::High
            }
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiveNumberSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub n: usize,
}

pub fn five_number_summary(values: &[f64]) -> Result<FiveNumberSummary> {
    if values.is_empty() {
        return Err(Error::insufficient("five-number summary", 1, 0));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(FiveNumberSummary {
        min: s[0],
        q1: quantile_sorted(&s, 0.25),
        median: quantile_sorted(&s, 0.5),
        q3: quantile_sorted(&s, 0.75),
        max: s[s.len() - 1],
        n: s.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` increasing edges; the last bin is closed on the right.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if values.is_empty() {
        return Err(Error::insufficient("histogram", 1, 0));
    }
    if bins == 0 {
        return Err(Error::Contract("histogram needs at least one bin".into()));
    }
    let mut lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let idx = (((v - lo) / width).floor() as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(Histogram { edges, counts })
}
