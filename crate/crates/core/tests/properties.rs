//! Property suites over each module's invariants.

use std::collections::BTreeSet;
use std::path::Path;

use proptest::prelude::*;

use aspire_core::bnet::{self, DagStructure, DiscreteDataset};
use aspire_core::cluster;
use aspire_core::ingest::{self, Dataset, Domain, TableSchema};
use aspire_core::model::{self, RegressionData, Standardization};
use aspire_core::report::{fmt_num, CsvTable};
use aspire_core::stats::{self, StandardizedFeatures, Tertile};
use aspire_core::vae::{self, VaeParams};

fn cfg() -> ProptestConfig {
    ProptestConfig {
        failure_persistence: None,
        ..ProptestConfig::with_cases(256)
    }
}

fn rows3(n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<[f64; 3]>> {
    proptest::collection::vec(prop::array::uniform3(-100.0f64..100.0), n)
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("c{i:03}")).collect()
}

fn features(rows: &[[f64; 3]]) -> Option<StandardizedFeatures> {
    StandardizedFeatures::from_rows(names(rows.len()), rows).ok()
}

const POOL: [&str; 10] = [
    "Albania", "Brazil", "Chile", "Denmark", "Estonia", "Finland", "Georgia", "Hungary", "Ireland",
    "Japan",
];

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn parse_cell_round_trips_rendered_numbers(x in -1e6f64..1e6, decimals in 0usize..=6) {
        let text = format!("{x:.decimals$}");
        let want: f64 = text.parse().unwrap();
        prop_assert_eq!(ingest::parse_cell(&text), Some(want));
    }

    #[test]
    fn emitted_numbers_round_trip_through_the_parser(x in any::<f64>()) {
        let text = fmt_num(x);
        match ingest::parse_cell(&text) {
            Some(v) => prop_assert_eq!(v, x),
            None => prop_assert!(!x.is_finite()),
        }
    }

    #[test]
    fn normalize_country_is_idempotent(s in "\\PC{0,24}") {
        let once = ingest::normalize_country(&s);
        prop_assert_eq!(ingest::normalize_country(&once), once.clone());
        prop_assert!(!once.contains('*'));
        prop_assert_eq!(once.trim(), once.as_str());
    }

    #[test]
    fn matrix_has_one_row_per_distinct_country(
        career in proptest::collection::vec(any::<bool>(), POOL.len()),
        math in proptest::collection::vec(any::<bool>(), POOL.len()),
        starred in proptest::collection::vec(any::<bool>(), POOL.len()),
        value in -5.0f64..5.0,
    ) {
        let label = |i: usize| if starred[i] { format!("{}*", POOL[i]) } else { POOL[i].to_string() };
        let mut c = CsvTable::new(TableSchema::CareerDeltas.header());
        let mut m = CsvTable::new(TableSchema::Domain(Domain::Math).header());
        let mut expected = BTreeSet::new();
        for i in 0..POOL.len() {
            if career[i] {
                c.push(vec![label(i), format!("{value}"), "m".into(), "1".into(), "2".into()]);
                expected.insert(POOL[i]);
            }
            if math[i] {
                m.push(vec![POOL[i].to_string(), "1".into(), format!("{value}"), "m".into()]);
                expected.insert(POOL[i]);
            }
        }
        let tables = vec![
            ingest::parse_table(c.to_bytes().as_slice(), TableSchema::CareerDeltas, Path::new("c.csv")).unwrap(),
            ingest::parse_table(m.to_bytes().as_slice(), TableSchema::Domain(Domain::Math), Path::new("m.csv")).unwrap(),
        ];
        let overlap = (0..POOL.len()).any(|i| career[i] && math[i]);
        match Dataset::from_tables(&tables).and_then(|ds| ds.matrix(Domain::Math)) {
            Err(ingest_err) => {
                // an empty dataset or disjoint tables have no analytical rows
                prop_assert!(!overlap, "{}", ingest_err);
            }
            Ok(mat) => {
                prop_assert!(overlap);
                prop_assert_eq!(mat.n_rows(), expected.len());
                prop_assert_eq!(mat.countries.iter().map(String::as_str).collect::<BTreeSet<_>>(), expected);
                let mut sorted = mat.countries.clone();
                sorted.sort();
                prop_assert_eq!(sorted, mat.countries.clone());
            }
        }
    }
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn pearson_is_affine_invariant_and_symmetric(
        xy in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..40),
        a in 0.01f64..100.0,
        b in -100.0f64..100.0,
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        if let Ok(r) = stats::pearson(&x, &y) {
            let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let r2 = stats::pearson(&ax, &y).unwrap();
            prop_assert!((r - r2).abs() <= 1e-9, "{} vs {}", r, r2);
            prop_assert_eq!(r, stats::pearson(&y, &x).unwrap());
            prop_assert!((-1.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn paired_t_is_antisymmetric(
        xy in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 2..40),
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
        if let Ok(r) = stats::paired_t_test(&x, &y) {
            let s = stats::paired_t_test(&y, &x).unwrap();
            prop_assert_eq!(r.t_statistic, -s.t_statistic);
            prop_assert_eq!(r.degrees_of_freedom, r.n - 1);
            prop_assert!((0.0..=1.0).contains(&r.p_value));
            if r.t_statistic != 0.0 && r.mean_difference != 0.0 {
                prop_assert_eq!(r.t_statistic.signum(), r.mean_difference.signum());
            }
        }
    }

    #[test]
    fn zscore_standardizes_and_round_trips(v in proptest::collection::vec(-1e3f64..1e3, 2..50)) {
        if let Ok(z) = stats::zscore(&v) {
            let mu = stats::mean(&v);
            let sd = stats::population_std(&v);
            prop_assert!(stats::mean(&z).abs() <= 1e-9);
            prop_assert!((stats::population_std(&z) - 1.0).abs() <= 1e-9);
            for (zi, vi) in z.iter().zip(&v) {
                prop_assert!((sd * zi + mu - vi).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn correlation_matrix_is_symmetric_with_unit_diagonal(
        cols in proptest::collection::vec(
            proptest::collection::vec(proptest::option::weighted(0.85, -10.0f64..10.0), 12), 2..5),
    ) {
        let labels: Vec<String> = (0..cols.len()).map(|i| format!("v{i}")).collect();
        let m = stats::correlation_matrix(&labels, &cols).unwrap();
        for i in 0..cols.len() {
            if let Some(d) = m.rho[i][i] {
                prop_assert!((d - 1.0).abs() <= 1e-12);
            }
            for j in 0..cols.len() {
                prop_assert_eq!(m.rho[i][j], m.rho[j][i]);
                prop_assert_eq!(m.n_used[i][j], m.n_used[j][i]);
                if let Some(r) = m.rho[i][j] {
                    prop_assert!((-1.0..=1.0).contains(&r));
                }
            }
        }
    }

    #[test]
    fn standardized_features_have_unit_columns(rows in rows3(3..40)) {
        if let Some(f) = features(&rows) {
            for j in 0..3 {
                let col: Vec<f64> = f.z.iter().map(|r| r[j]).collect();
                prop_assert!(stats::mean(&col).abs() <= 1e-9);
                prop_assert!((stats::population_std(&col) - 1.0).abs() <= 1e-9);
            }
        }
    }
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn kmeans_fixed_point_properties(rows in rows3(5..40), k in 1usize..5, seed in any::<u64>()) {
        let Some(f) = features(&rows) else { return Ok(()) };
        let m = cluster::kmeans_fit(&f, k, seed).unwrap();
        let again = cluster::kmeans_fit(&f, k, seed).unwrap();
        prop_assert_eq!(&m, &again);
        prop_assert!((cluster::inertia(&f.z, &m.centroids, &m.assignments) - m.inertia).abs() <= 1e-9);
        for (p, &a) in f.z.iter().zip(&m.assignments) {
            let d: Vec<f64> = m.centroids.iter().map(|c| cluster::squared_distance(p, c)).collect();
            let nearest = (0..d.len()).min_by(|&i, &j| d[i].total_cmp(&d[j]).then(i.cmp(&j))).unwrap();
            prop_assert!(d[a] <= d[nearest] + 1e-12);
        }
        for (c, centroid) in m.centroids.iter().enumerate() {
            let members: Vec<&[f64; 3]> = f.z.iter().zip(&m.assignments).filter(|(_, a)| **a == c).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            for j in 0..3 {
                let mean = members.iter().map(|p| p[j]).sum::<f64>() / members.len() as f64;
                prop_assert!((centroid[j] - mean).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn embedding_is_pure_and_readiness_is_latent_mean(rows in rows3(4..20), seed in any::<u64>(), hidden in 1usize..9) {
        let Some(f) = features(&rows) else { return Ok(()) };
        let params = VaeParams::init(hidden, seed);
        let a = vae::embed(&params, &f, 0.5).unwrap();
        let b = vae::embed(&params, &f, 0.5).unwrap();
        prop_assert_eq!(&a, &b);
        for e in &a {
            prop_assert!((e.readiness - (e.mu[0] + e.mu[1]) / 2.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn vae_loss_parts_are_consistent(
        rows in rows3(1..12),
        noise_seed in any::<u64>(),
        seed in any::<u64>(),
    ) {
        let params = VaeParams::init(4, seed);
        let inputs: Vec<[f64; 3]> = rows.iter().map(|r| r.map(|v| v / 50.0)).collect();
        let noise: Vec<[f64; 2]> = (0..inputs.len())
            .map(|i| {
                let h = noise_seed.wrapping_add(i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                [((h >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0, ((h >> 3) % 1000) as f64 / 250.0 - 2.0]
            })
            .collect();
        let (loss, grad) = vae::loss_and_gradients(&params, &inputs, &noise);
        prop_assert!(loss.kl >= 0.0);
        prop_assert!((loss.total - loss.reconstruction - loss.kl).abs() <= 1e-9);
        prop_assert!(grad.is_finite());
    }
}

fn regression(x: Vec<[f64; 3]>, y: Vec<f64>) -> RegressionData {
    RegressionData::new(names(x.len()), x, y).unwrap()
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn ols_residual_properties(rows in rows3(6..40), y in proptest::collection::vec(-50.0f64..50.0, 40)) {
        let y = y[..rows.len()].to_vec();
        for mode in [Standardization::Raw, Standardization::Predictors, Standardization::Both] {
            let Ok(fit) = model::fit_ols(&regression(rows.clone(), y.clone()), mode) else { continue };
            prop_assert!((0.0..=1.0).contains(&fit.r_squared));
            let scale = fit.outcome.iter().map(|v| v.abs()).fold(1.0, f64::max);
            for i in 0..fit.n {
                prop_assert!((fit.fitted[i] + fit.residuals[i] - fit.outcome[i]).abs() <= 1e-9 * scale);
            }
            let dot_const: f64 = fit.residuals.iter().sum();
            prop_assert!(dot_const.abs() <= 1e-8 * scale * fit.n as f64);
            for j in 0..3 {
                let col_scale = fit.design.iter().map(|r| r[j].abs()).fold(1.0, f64::max);
                let dot: f64 = fit.residuals.iter().zip(&fit.design).map(|(e, r)| e * r[j]).sum();
                prop_assert!(dot.abs() <= 1e-8 * scale * col_scale * fit.n as f64, "column {} dot {}", j, dot);
            }
        }
    }

    #[test]
    fn ols_rescaling_invariance(
        rows in rows3(6..40),
        y in proptest::collection::vec(-50.0f64..50.0, 40),
        scale in prop::array::uniform3(0.01f64..100.0),
        shift in prop::array::uniform3(-100.0f64..100.0),
    ) {
        let y = y[..rows.len()].to_vec();
        let moved: Vec<[f64; 3]> = rows.iter().map(|r| std::array::from_fn(|j| scale[j] * r[j] + shift[j])).collect();
        let (Ok(a), Ok(b)) = (
            model::fit_ols(&regression(rows.clone(), y.clone()), Standardization::Raw),
            model::fit_ols(&regression(moved.clone(), y.clone()), Standardization::Raw),
        ) else { return Ok(()) };
        for i in 0..a.n {
            prop_assert!((a.fitted[i] - b.fitted[i]).abs() <= 1e-6 * (1.0 + a.fitted[i].abs()));
        }
        let sa = model::fit_ols(&regression(rows, y.clone()), Standardization::Predictors).unwrap();
        let sb = model::fit_ols(&regression(moved, y), Standardization::Predictors).unwrap();
        for j in 0..3 {
            prop_assert!((sa.beta[j] - sb.beta[j]).abs() <= 1e-7 * (1.0 + sa.beta[j].abs()));
        }
    }

    #[test]
    fn pooled_covariance_is_symmetric_psd(rows in rows3(6..40), labels in proptest::collection::vec(any::<bool>(), 40)) {
        let mut labels = labels[..rows.len()].to_vec();
        labels[0] = true;
        labels[1] = false;
        let m = model::fit_lda_labels(&rows, &labels).unwrap();
        let s = m.pooled_covariance;
        let tol = 1e-9 * (1.0 + s[0][0].abs() + s[1][1].abs() + s[2][2].abs()).powi(3);
        for i in 0..3 {
            for j in 0..3 {
                prop_assert_eq!(s[i][j], s[j][i]);
            }
            prop_assert!(s[i][i] >= -tol);
        }
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            prop_assert!(s[i][i] * s[j][j] - s[i][j] * s[j][i] >= -tol);
        }
        let det = s[0][0] * (s[1][1] * s[2][2] - s[1][2] * s[2][1])
            - s[0][1] * (s[1][0] * s[2][2] - s[1][2] * s[2][0])
            + s[0][2] * (s[1][0] * s[2][1] - s[1][1] * s[2][0]);
        prop_assert!(det >= -tol);
    }

    #[test]
    fn stratified_folds_are_deterministic_and_balanced(
        labels in proptest::collection::vec(any::<bool>(), 10..80),
        folds in 2usize..6,
        seed in any::<u64>(),
    ) {
        let a = model::stratified_folds(&labels, folds, seed);
        prop_assert_eq!(&a, &model::stratified_folds(&labels, folds, seed));
        let n = labels.len() as f64;
        let ratio = labels.iter().filter(|l| **l).count() as f64 / n;
        for f in 0..folds {
            let members: Vec<bool> = labels.iter().zip(&a).filter(|(_, g)| **g == f).map(|(l, _)| *l).collect();
            let pos = members.iter().filter(|l| **l).count() as f64;
            prop_assert!((pos - ratio * members.len() as f64).abs() <= 1.0 + 1e-9,
                "fold {} has {} positives of {}", f, pos, members.len());
        }
    }
}

fn discrete(columns: Vec<Vec<Tertile>>) -> DiscreteDataset {
    let vars = (0..columns.len()).map(|i| format!("v{i}")).collect();
    let rows = names(columns[0].len());
    DiscreteDataset::new(vars, rows, columns).unwrap()
}

fn tertile_columns() -> impl Strategy<Value = Vec<Vec<Tertile>>> {
    (3usize..50).prop_flat_map(|n| {
        proptest::collection::vec(
            proptest::collection::vec((0usize..3).prop_map(|i| Tertile::from_index(i).unwrap()), n),
            4,
        )
    })
}

fn random_dag(vars: &[String], edges: &[(usize, usize)]) -> DagStructure {
    let mut dag = DagStructure::empty(vars.to_vec());
    for &(p, c) in edges {
        let _ = dag.add_edge(p, c);
    }
    dag
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn bic_decomposes_into_family_scores(
        columns in tertile_columns(),
        edges in proptest::collection::vec((0usize..4, 0usize..4), 0..8),
    ) {
        let data = discrete(columns);
        let dag = random_dag(&data.variables, &edges);
        let total = bnet::bic_score(&dag, &data).unwrap();
        // monolithic recomputation: full log-likelihood minus the global penalty
        let ll: f64 = (0..4).map(|v| bnet::family_log_likelihood(&data, v, dag.parents(v))).sum();
        let monolithic = ll - dag.free_parameters() as f64 / 2.0 * (data.n_rows() as f64).ln();
        let families: f64 = (0..4).map(|v| bnet::family_score(&data, v, dag.parents(v))).sum();
        prop_assert!((total - monolithic).abs() <= 1e-9 * (1.0 + total.abs()));
        prop_assert!((total - families).abs() <= 1e-9 * (1.0 + total.abs()));
    }

    #[test]
    fn hill_climb_never_worse_than_empty(columns in tertile_columns(), seed in any::<u64>()) {
        let data = discrete(columns);
        let dag = bnet::hill_climb(&data, seed);
        prop_assert!(dag.is_acyclic());
        let empty = bnet::bic_score(&DagStructure::empty(data.variables.clone()), &data).unwrap();
        prop_assert!(bnet::bic_score(&dag, &data).unwrap() >= empty);
        prop_assert!((0..4).all(|v| dag.parents(v).len() <= bnet::MAX_PARENTS));
    }

    #[test]
    fn fitted_cpts_are_normalized(
        columns in tertile_columns(),
        edges in proptest::collection::vec((0usize..4, 0usize..4), 0..8),
    ) {
        let data = discrete(columns);
        let net = bnet::fit_cpts(&random_dag(&data.variables, &edges), &data).unwrap();
        for cpt in &net.cpts {
            prop_assert_eq!(cpt.table.len(), 3usize.pow(cpt.parents.len() as u32));
            for row in &cpt.table {
                prop_assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
        for v in 0..4 {
            let m = net.marginal(v).unwrap();
            prop_assert!((m.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}
