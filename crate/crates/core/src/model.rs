//! Predictive layer: least-squares regression of the ICT delta on the
//! learning-environment indicators, two-class LDA with stratified
//! cross-validation, the +1 SD autonomy counterfactual and the
//! teacher-support moderation slopes.

use log::warn;
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AnalyticalMatrix, COL_A, COL_D, COL_ICT, COL_T};
use crate::rng::seeded;
use crate::stats::{mean, median, population_std, zscore, INDICATOR_LABELS};

pub const DEFAULT_FOLDS: usize = 5;

/// Which side of the regression is z-scored before fitting.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Standardization {
    Raw,
    Predictors,
    #[default]
    Both,
}

/// Listwise-complete (A, D, T) rows with their ICT delta.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionData {
    pub countries: Vec<String>,
    pub x: Vec<[f64; 3]>,
    pub y: Vec<f64>,
}

impl RegressionData {
    pub fn new(countries: Vec<String>, x: Vec<[f64; 3]>, y: Vec<f64>) -> Result<Self> {
        if countries.len() != x.len() || x.len() != y.len() {
            return Err(Error::Contract(format!(
                "regression inputs differ in length ({}, {}, {})",
                countries.len(),
                x.len(),
                y.len()
            )));
        }
        Ok(RegressionData { countries, x, y })
    }

    pub fn from_matrix(matrix: &AnalyticalMatrix) -> Self {
        let rows = matrix.complete_rows(&[COL_A, COL_D, COL_T, COL_ICT]);
        RegressionData {
            countries: rows.iter().map(|&i| matrix.countries[i].clone()).collect(),
            x: rows
                .iter()
                .map(|&i| {
                    let r = &matrix.values[i];
                    [r[COL_A].unwrap(), r[COL_D].unwrap(), r[COL_T].unwrap()]
                })
                .collect(),
            y: rows
                .iter()
                .map(|&i| matrix.values[i][COL_ICT].unwrap())
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub beta0: f64,
    /// Coefficients for (A, D, T) in the units of `design`.
    pub beta: [f64; 3],
    pub countries: Vec<String>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
    pub n: usize,
    pub standardization: Standardization,
    /// Predictors as entered into the fit (z-scored unless `Raw`).
    pub design: Vec<[f64; 3]>,
    /// Outcome as entered into the fit.
    pub outcome: Vec<f64>,
    pub predictor_means: [f64; 3],
    pub predictor_stds: [f64; 3],
    pub outcome_mean: f64,
    pub outcome_std: f64,
}

impl RegressionFit {
    pub fn predict(&self, x: &[f64; 3]) -> f64 {
        self.beta0 + self.beta[0] * x[0] + self.beta[1] * x[1] + self.beta[2] * x[2]
    }

    pub fn predictors_standardized(&self) -> bool {
        self.standardization != Standardization::Raw
    }
}

/// Least squares through a QR decomposition of `[1 | A | D | T]`.
pub fn fit_ols(data: &RegressionData, mode: Standardization) -> Result<RegressionFit> {
    let n = data.len();
    if n < 5 {
        return Err(Error::insufficient("OLS regression", 5, n));
    }

    let mut design = data.x.clone();
    let mut predictor_means = [0.0; 3];
    let mut predictor_stds = [1.0; 3];
    if mode != Standardization::Raw {
        for j in 0..3 {
            let col: Vec<f64> = data.x.iter().map(|r| r[j]).collect();
            let z = zscore(&col).map_err(|_| Error::Collinearity {
                column: INDICATOR_LABELS[j].into(),
            })?;
            predictor_means[j] = mean(&col);
            predictor_stds[j] = population_std(&col);
            for (row, v) in design.iter_mut().zip(z) {
                row[j] = v;
            }
        }
    }

    let outcome_mean = mean(&data.y);
    let (outcome, outcome_std) = if mode == Standardization::Both {
        let sd = population_std(&data.y);
        match zscore(&data.y) {
            Ok(z) => (z, sd),
            // constant outcome: nothing to explain, keep it centered at zero
            Err(_) => (vec![0.0; n], 0.0),
        }
    } else {
        (data.y.clone(), 1.0)
    };

    let x = DMatrix::from_fn(n, 4, |i, j| if j == 0 { 1.0 } else { design[i][j - 1] });
    let y = DVector::from_column_slice(&outcome);
    let qr = x.clone().qr();
    let r = qr.r();
    let names = ["intercept", "A", "D", "T"];
    for j in 0..4 {
        let col_norm = x.column(j).norm();
        if col_norm == 0.0 || r[(j, j)].abs() <= 1e-10 * col_norm {
            return Err(Error::Collinearity {
                column: names[j].into(),
            });
        }
    }
    let qty = qr.q().transpose() * &y;
    let coef = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Collinearity {
            column: "design".into(),
        })?;

    let beta0 = coef[0];
    let beta = [coef[1], coef[2], coef[3]];
    let fitted: Vec<f64> = design
        .iter()
        .map(|row| beta0 + beta[0] * row[0] + beta[1] * row[1] + beta[2] * row[2])
        .collect();
    let residuals: Vec<f64> = outcome.iter().zip(&fitted).map(|(o, f)| o - f).collect();
    let ybar = mean(&outcome);
    let sst: f64 = outcome.iter().map(|o| (o - ybar).powi(2)).sum();
    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let r_squared = if sst > 0.0 {
        (1.0 - ssr / sst).clamp(0.0, 1.0)
    } else {
        0.0
    };

    Ok(RegressionFit {
        beta0,
        beta,
        countries: data.countries.clone(),
        fitted,
        residuals,
        r_squared,
        n,
        standardization: mode,
        design,
        outcome,
        predictor_means,
        predictor_stds,
        outcome_mean,
        outcome_std,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualRow {
    pub country: String,
    pub observed: f64,
    pub baseline: f64,
    pub counterfactual: f64,
    pub marginal_effect: f64,
}

/// Predictions before and after raising standardized autonomy by one unit,
/// in the outcome units of the fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualResult {
    pub rows: Vec<CounterfactualRow>,
    pub outcome_standardized: bool,
}

impl CounterfactualResult {
    pub fn marginal_effects(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.marginal_effect).collect()
    }
}

/// Applies `A + 1` to standardized rows `x` (observed outcomes in `observed`).
pub fn counterfactual_autonomy(
    fit: &RegressionFit,
    countries: &[String],
    x: &[[f64; 3]],
    observed: &[f64],
) -> Result<CounterfactualResult> {
    if !fit.predictors_standardized() {
        return Err(Error::Contract(
            "counterfactual requires a fit on standardized predictors".into(),
        ));
    }
    if countries.len() != x.len() || x.len() != observed.len() {
        return Err(Error::Contract(
            "counterfactual inputs differ in length".into(),
        ));
    }
    let rows = countries
        .iter()
        .zip(x)
        .zip(observed)
        .map(|((country, row), obs)| {
            let shifted = [row[0] + 1.0, row[1], row[2]];
            CounterfactualRow {
                country: country.clone(),
                observed: *obs,
                baseline: fit.predict(row),
                counterfactual: fit.predict(&shifted),
                marginal_effect: fit.beta[0],
            }
        })
        .collect();
    Ok(CounterfactualResult {
        rows,
        outcome_standardized: fit.standardization == Standardization::Both,
    })
}

/// Counterfactual over the rows the model was fitted on.
pub fn counterfactual_on_fit(fit: &RegressionFit) -> Result<CounterfactualResult> {
    counterfactual_autonomy(fit, &fit.countries, &fit.design, &fit.outcome)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    Median,
    Value(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub weights: [f64; 3],
    pub intercept: f64,
    /// Row 0 is the low-growth class, row 1 the high-growth class.
    pub class_means: [[f64; 3]; 2],
    pub pooled_covariance: [[f64; 3]; 3],
    pub threshold_value: Option<f64>,
    pub class_counts: [usize; 2],
    pub ridge: Option<f64>,
    pub training_accuracy: f64,
    pub cv_accuracy: Option<f64>,
    pub warnings: Vec<String>,
}

impl LdaModel {
    /// Discriminant score `w . x + intercept`; positive means high growth.
    pub fn score(&self, x: &[f64; 3]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.intercept
    }

    pub fn predict(&self, x: &[f64; 3]) -> bool {
        self.score(x) > 0.0
    }

    /// Same decision rule with weights and intercept multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> LdaModel {
        let mut m = self.clone();
        m.weights = m.weights.map(|w| w * factor);
        m.intercept *= factor;
        m
    }
}

/// `high` iff the value is strictly above the threshold.
pub fn dichotomize(y: &[f64], threshold: Threshold) -> Result<(Vec<bool>, f64)> {
    let t = match threshold {
        Threshold::Median => median(y)?,
        Threshold::Value(v) => v,
    };
    Ok((y.iter().map(|v| *v > t).collect(), t))
}

pub fn fit_lda(x: &[[f64; 3]], y: &[f64], threshold: Threshold) -> Result<LdaModel> {
    if x.len() != y.len() {
        return Err(Error::Contract("LDA inputs differ in length".into()));
    }
    let (labels, t) = dichotomize(y, threshold)?;
    let mut model = fit_lda_labels(x, &labels)?;
    model.threshold_value = Some(t);
    Ok(model)
}

/// Two-class LDA with pooled covariance and equal priors.
pub fn fit_lda_labels(x: &[[f64; 3]], labels: &[bool]) -> Result<LdaModel> {
    if x.len() != labels.len() {
        return Err(Error::Contract("LDA inputs differ in length".into()));
    }
    let n_high = labels.iter().filter(|l| **l).count();
    let n_low = labels.len() - n_high;
    if n_high == 0 || n_low == 0 {
        return Err(Error::DegenerateLabels(format!(
            "{n_low} low-growth and {n_high} high-growth rows"
        )));
    }

    let mut means = [Vector3::zeros(); 2];
    for (row, &l) in x.iter().zip(labels) {
        means[usize::from(l)] += Vector3::from(*row);
    }
    means[0] /= n_low as f64;
    means[1] /= n_high as f64;

    let mut scatter = Matrix3::zeros();
    for (row, &l) in x.iter().zip(labels) {
        let d = Vector3::from(*row) - means[usize::from(l)];
        scatter += d * d.transpose();
    }
    let dof = (x.len().saturating_sub(2)).max(1) as f64;
    let cov = scatter / dof;

    let mut warnings = Vec::new();
    let mut ridge = None;
    let chol = match cov.cholesky() {
        Some(c) if c.l().diagonal().min() > 1e-12 * cov.trace().max(1e-300).sqrt() => c,
        _ => {
            let lambda = if cov.trace() > 0.0 {
                1e-6 * cov.trace() / 3.0
            } else {
                1e-6
            };
            let msg =
                format!("pooled covariance is singular; adding ridge {lambda:e} to the diagonal");
            warn!("{msg}");
            warnings.push(msg);
            ridge = Some(lambda);
            (cov + Matrix3::identity() * lambda)
                .cholesky()
                .ok_or_else(|| {
                    Error::Contract("ridge-regularized covariance is not positive definite".into())
                })?
        }
    };

    let diff = means[1] - means[0];
    let w = chol.solve(&diff);
    let mid = (means[0] + means[1]) * 0.5;
    let intercept = -w.dot(&mid);

    let mut model = LdaModel {
        weights: [w[0], w[1], w[2]],
        intercept,
        class_means: [means[0].into(), means[1].into()],
        pooled_covariance: std::array::from_fn(|i| std::array::from_fn(|j| cov[(i, j)])),
        threshold_value: None,
        class_counts: [n_low, n_high],
        ridge,
        training_accuracy: 0.0,
        cv_accuracy: None,
        warnings,
    };
    model.training_accuracy = accuracy(&model, x, labels);
    Ok(model)
}

fn accuracy(model: &LdaModel, x: &[[f64; 3]], labels: &[bool]) -> f64 {
    let correct = x
        .iter()
        .zip(labels)
        .filter(|(row, l)| model.predict(row) == **l)
        .count();
    correct as f64 / x.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub accuracy: f64,
    pub folds_used: usize,
    pub fold_accuracies: Vec<f64>,
    /// Fold index per row.
    pub fold_of: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Stratified K-fold assignment: each class is shuffled with the seeded
/// generator and dealt round-robin, continuing the rotation across classes.
pub fn stratified_folds(labels: &[bool], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = seeded(seed);
    let mut order = Vec::with_capacity(labels.len());
    for class in [false, true] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        order.extend(idx);
    }
    let mut fold_of = vec![0; labels.len()];
    for (pos, i) in order.into_iter().enumerate() {
        fold_of[i] = pos % folds;
    }
    fold_of
}

pub fn stratified_cv_accuracy(
    x: &[[f64; 3]],
    labels: &[bool],
    folds: usize,
    seed: u64,
) -> Result<CvResult> {
    if x.len() != labels.len() {
        return Err(Error::Contract("CV inputs differ in length".into()));
    }
    if folds < 2 {
        return Err(Error::Contract(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    let n_high = labels.iter().filter(|l| **l).count();
    let minority = n_high.min(labels.len() - n_high);
    if minority < 2 {
        return Err(Error::insufficient(
            "stratified cross-validation (minority class)",
            2,
            minority,
        ));
    }
    let mut warnings = Vec::new();
    let k = if minority < folds {
        let msg = format!(
            "minority class has {minority} rows; reducing folds from {folds} to {minority}"
        );
        warn!("{msg}");
        warnings.push(msg);
        minority
    } else {
        folds
    };

    let fold_of = stratified_folds(labels, k, seed);
    let mut fold_accuracies = Vec::with_capacity(k);
    for f in 0..k {
        let (mut tx, mut tl, mut vx, mut vl) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for i in 0..x.len() {
            if fold_of[i] == f {
                vx.push(x[i]);
                vl.push(labels[i]);
            } else {
                tx.push(x[i]);
                tl.push(labels[i]);
            }
        }
        let model = fit_lda_labels(&tx, &tl)?;
        fold_accuracies.push(accuracy(&model, &vx, &vl));
    }
    Ok(CvResult {
        accuracy: mean(&fold_accuracies),
        folds_used: k,
        fold_accuracies,
        fold_of,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModerationResult {
    pub slope_low_support: f64,
    pub slope_high_support: f64,
    pub moderator_median: f64,
    pub n_low: usize,
    pub n_high: usize,
}

fn simple_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateColumn("autonomy".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

/// Slope of `outcome` on `autonomy` below and above the moderator median
/// (rows at the median go to the low-support half).
pub fn moderation_slopes(
    autonomy: &[f64],
    outcome: &[f64],
    moderator: &[f64],
) -> Result<ModerationResult> {
    if autonomy.len() != outcome.len() || outcome.len() != moderator.len() {
        return Err(Error::Contract("moderation inputs differ in length".into()));
    }
    let med = median(moderator)?;
    let (mut lo_x, mut lo_y, mut hi_x, mut hi_y) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for ((a, o), m) in autonomy.iter().zip(outcome).zip(moderator) {
        if *m <= med {
            lo_x.push(*a);
            lo_y.push(*o);
        } else {
            hi_x.push(*a);
            hi_y.push(*o);
        }
    }
    if lo_x.len() < 4 {
        return Err(Error::insufficient(
            "moderation split (low-support half)",
            4,
            lo_x.len(),
        ));
    }
    if hi_x.len() < 4 {
        return Err(Error::insufficient(
            "moderation split (high-support half)",
            4,
            hi_x.len(),
        ));
    }
    Ok(ModerationResult {
        slope_low_support: simple_slope(&lo_x, &lo_y)?,
        slope_high_support: simple_slope(&hi_x, &hi_y)?,
        moderator_median: med,
        n_low: lo_x.len(),
        n_high: hi_x.len(),
    })
}
