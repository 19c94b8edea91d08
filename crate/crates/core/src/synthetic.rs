//! Seeded synthetic country tables in the canonical CSV layout, with a
//! planted linear dependence of ΔICT on the three indicators, annotated
//! names and a sprinkling of missing cells.

use std::path::{Path, PathBuf};

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingest::{Domain, TableSchema};
use crate::report::{write_atomic, CsvTable};
use crate::rng::{derive_seed, seeded};

const PREFIXES: [&str; 20] = [
    "Al", "Bel", "Cor", "Dan", "Er", "Fal", "Gor", "Hal", "Ist", "Jor", "Kel", "Lum", "Mor", "Nor",
    "Ost", "Pel", "Quar", "Ros", "Sal", "Tor",
];
const SUFFIXES: [&str; 3] = ["avia", "mark", "onia"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub countries: usize,
    pub seed: u64,
    /// Probability that a numeric cell is written as `m`.
    pub missing_rate: f64,
    /// Probability that a name carries a footnote asterisk.
    pub annotate_rate: f64,
    /// Planted ΔICT coefficients on (autonomy, digital, teacher) effects.
    pub ict_coefficients: [f64; 3],
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            countries: 60,
            seed: 2022,
            missing_rate: 0.02,
            annotate_rate: 0.1,
            ict_coefficients: [-0.05, 0.12, -0.1],
        }
    }
}

const QUALIFIERS: [&str; 4] = ["Nova", "Vetus", "Minor", "Major"];

/// Largest table [`country_names`] can produce.
pub const MAX_COUNTRIES: usize = PREFIXES.len() * SUFFIXES.len() * (1 + QUALIFIERS.len());

/// Fictional, unique country names (at most [`MAX_COUNTRIES`]).
pub fn country_names(n: usize) -> Vec<String> {
    assert!(
        n <= MAX_COUNTRIES,
        "at most {MAX_COUNTRIES} synthetic countries"
    );
    let per_round = PREFIXES.len() * SUFFIXES.len();
    (0..n)
        .map(|i| {
            let j = i % per_round;
            let base = format!(
                "{}{}",
                PREFIXES[j % PREFIXES.len()],
                SUFFIXES[j / PREFIXES.len()]
            );
            match i / per_round {
                0 => base,
                r => format!("{base} {}", QUALIFIERS[r - 1]),
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct SyntheticTables {
    pub tables: Vec<(TableSchema, CsvTable)>,
}

pub fn generate(spec: &SyntheticSpec) -> SyntheticTables {
    let mut rng = seeded(derive_seed(spec.seed, 0));
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let names = country_names(spec.countries);

    let cell = |v: f64, decimals: usize, rng: &mut crate::rng::Rng| -> String {
        if rng.random::<f64>() < spec.missing_rate {
            "m".to_string()
        } else {
            format!("{v:.decimals$}")
        }
    };
    let labels: Vec<String> = names
        .iter()
        .map(|n| {
            if rng.random::<f64>() < spec.annotate_rate {
                format!("{n}*")
            } else {
                n.clone()
            }
        })
        .collect();

    // country-level indicator effects in score points, shared across domains
    let base: Vec<[f64; 3]> = (0..spec.countries)
        .map(|_| {
            [
                -2.0 + 4.0 * std_normal.sample(&mut rng),
                6.0 + 3.0 * std_normal.sample(&mut rng),
                3.0 + 3.0 * std_normal.sample(&mut rng),
            ]
        })
        .collect();

    let mut tables = Vec::new();
    let mut careers = CsvTable::new(TableSchema::CareerDeltas.header());
    for (i, b) in base.iter().enumerate() {
        let c = spec.ict_coefficients;
        let ict = 0.9 + c[0] * b[0] + c[1] * b[1] + c[2] * b[2] + 0.5 * std_normal.sample(&mut rng);
        let health = 0.4 + 1.5 * std_normal.sample(&mut rng);
        let sci_eng = -0.3 + 1.2 * std_normal.sample(&mut rng);
        let sci_tech = 0.1 + 0.5 * std_normal.sample(&mut rng);
        careers.push(vec![
            labels[i].clone(),
            cell(ict, 2, &mut rng),
            cell(health, 2, &mut rng),
            cell(sci_eng, 2, &mut rng),
            cell(sci_tech, 2, &mut rng),
        ]);
    }
    tables.push((TableSchema::CareerDeltas, careers));

    for (k, domain) in Domain::ALL.into_iter().enumerate() {
        let mut t = CsvTable::new(TableSchema::Domain(domain).header());
        for (i, b) in base.iter().enumerate() {
            // science omits every fifteenth country
            if domain == Domain::Science && i % 15 == 14 {
                continue;
            }
            let jitter = if k == 0 { 0.0 } else { 1.0 };
            let mut row = vec![labels[i].clone()];
            for v in b {
                let value = v + jitter * std_normal.sample(&mut rng);
                row.push(cell(value, 1, &mut rng));
            }
            t.push(row);
        }
        tables.push((TableSchema::Domain(domain), t));
    }

    let mut ext = CsvTable::new(TableSchema::ExternalReadiness.header());
    for (i, b) in base.iter().enumerate() {
        let v = 50.0 + 2.0 * b[1] + 1.0 * b[2] + 5.0 * std_normal.sample(&mut rng);
        ext.push(vec![names[i].clone(), cell(v, 1, &mut rng)]);
    }
    tables.push((TableSchema::ExternalReadiness, ext));

    SyntheticTables { tables }
}

/// Writes every table under its canonical file name.
pub fn write_fixture(dir: &Path, spec: &SyntheticSpec) -> Result<Vec<PathBuf>> {
    generate(spec)
        .tables
        .iter()
        .map(|(schema, table)| {
            let p = dir.join(schema.file_name());
            write_atomic(&p, &table.to_bytes())?;
            Ok(p)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{normalize_country, parse_table, Dataset};
    use std::collections::BTreeSet;

    #[test]
    fn names_are_unique_and_clean() {
        let names = country_names(MAX_COUNTRIES);
        let set: BTreeSet<_> = names.iter().collect();
        assert_eq!(set.len(), MAX_COUNTRIES);
        assert!(names.iter().all(|n| normalize_country(n) == *n));
    }

    #[test]
    fn generation_is_seeded() {
        let a = generate(&SyntheticSpec::default());
        let b = generate(&SyntheticSpec::default());
        let c = generate(&SyntheticSpec {
            seed: 7,
            ..SyntheticSpec::default()
        });
        let bytes = |t: &SyntheticTables| {
            t.tables
                .iter()
                .map(|(_, t)| t.to_bytes())
                .collect::<Vec<_>>()
        };
        assert_eq!(bytes(&a), bytes(&b));
        assert_ne!(bytes(&a), bytes(&c));
    }

    #[test]
    fn tables_parse_and_merge() {
        let spec = SyntheticSpec::default();
        let loaded: Vec<_> = generate(&spec)
            .tables
            .iter()
            .map(|(s, t)| {
                parse_table(t.to_bytes().as_slice(), *s, Path::new("synthetic.csv")).unwrap()
            })
            .collect();
        let ds = Dataset::from_tables(&loaded).unwrap();
        assert_eq!(ds.records.len(), spec.countries);
        let m = ds.matrix(Domain::Math).unwrap();
        assert!(m.complete_rows(&[0, 1, 2, 3]).len() >= 50);
    }
}
