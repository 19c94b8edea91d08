//! Table ingestion: cell parsing, country-name normalization, intertemporal
//! deltas and the merged country × variable analytical matrix.
//!
//! Input tables use a canonical CSV layout (UTF-8, comma separated, header
//! row). See [`TableSchema::header`] for the exact column sets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::LazyLock;

use log::warn;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cell contents that always mean "no value".
pub const MISSING_MARKERS: [&str; 4] = ["m", "", "..", "\u{2014}"];

static NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[+-]?(?:\d+(?:\.\d+)?|\.\d+)").unwrap());
static PAREN_FOOTNOTE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\s*\(\s*\d+(?:\s*,\s*\d+)*\s*\)\s*$").unwrap());
static GLUED_FOOTNOTE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(\p{L})\d+(?:,\d+)*$").unwrap());

const ANNOTATION_CHARS: [char; 5] = ['*', '\u{2020}', '\u{2021}', '\u{a7}', '\u{b6}'];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Math,
    Reading,
    Science,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::Math, Domain::Reading, Domain::Science];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Math => "math",
            Domain::Reading => "reading",
            Domain::Science => "science",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "math" | "mathematics" => Ok(Domain::Math),
            "reading" => Ok(Domain::Reading),
            "science" => Ok(Domain::Science),
            other => Err(Error::Contract(format!(
                "unknown domain `{other}` (expected math, reading or science)"
            ))),
        }
    }
}

/// The three learning-environment indicators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Indicator {
    Autonomy,
    Digital,
    Teacher,
}

impl Indicator {
    pub const ALL: [Indicator; 3] = [Indicator::Autonomy, Indicator::Digital, Indicator::Teacher];

    pub fn as_str(self) -> &'static str {
        match self {
            Indicator::Autonomy => "autonomy",
            Indicator::Digital => "digital",
            Indicator::Teacher => "teacher",
        }
    }
}

/// Occupational field of a career-aspiration share.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AspirationField {
    Ict,
    Health,
    SciEng,
    SciTech,
}

impl AspirationField {
    pub const ALL: [AspirationField; 4] = [
        AspirationField::Ict,
        AspirationField::Health,
        AspirationField::SciEng,
        AspirationField::SciTech,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AspirationField::Ict => "ict",
            AspirationField::Health => "health",
            AspirationField::SciEng => "sci_eng",
            AspirationField::SciTech => "sci_tech",
        }
    }

    pub fn delta_column(self) -> &'static str {
        match self {
            AspirationField::Ict => "delta_ict",
            AspirationField::Health => "delta_health",
            AspirationField::SciEng => "delta_sci_eng",
            AspirationField::SciTech => "delta_sci_tech",
        }
    }
}

impl FromStr for AspirationField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        let key = key.strip_prefix("delta_").unwrap_or(&key);
        AspirationField::ALL
            .into_iter()
            .find(|f| f.as_str() == key)
            .ok_or_else(|| Error::Contract(format!("unknown aspiration field `{s}`")))
    }
}

/// Score-point effects of the three indicators within one domain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Effects {
    pub autonomy: Option<f64>,
    pub digital: Option<f64>,
    pub teacher: Option<f64>,
}

impl Effects {
    pub fn get(&self, indicator: Indicator) -> Option<f64> {
        match indicator {
            Indicator::Autonomy => self.autonomy,
            Indicator::Digital => self.digital,
            Indicator::Teacher => self.teacher,
        }
    }

    fn get_mut(&mut self, indicator: Indicator) -> &mut Option<f64> {
        match indicator {
            Indicator::Autonomy => &mut self.autonomy,
            Indicator::Digital => &mut self.digital,
            Indicator::Teacher => &mut self.teacher,
        }
    }
}

/// One value per aspiration field, in percentage points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AspirationValues {
    pub ict: Option<f64>,
    pub health: Option<f64>,
    pub sci_eng: Option<f64>,
    pub sci_tech: Option<f64>,
}

impl AspirationValues {
    pub fn get(&self, field: AspirationField) -> Option<f64> {
        match field {
            AspirationField::Ict => self.ict,
            AspirationField::Health => self.health,
            AspirationField::SciEng => self.sci_eng,
            AspirationField::SciTech => self.sci_tech,
        }
    }

    pub fn get_mut(&mut self, field: AspirationField) -> &mut Option<f64> {
        match field {
            AspirationField::Ict => &mut self.ict,
            AspirationField::Health => &mut self.health,
            AspirationField::SciEng => &mut self.sci_eng,
            AspirationField::SciTech => &mut self.sci_tech,
        }
    }
}

/// Change in aspiration shares between the two survey waves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AspirationDelta {
    pub country: String,
    pub delta_ict: Option<f64>,
    pub delta_health: Option<f64>,
    pub delta_sci_eng: Option<f64>,
    pub delta_sci_tech: Option<f64>,
}

impl AspirationDelta {
    pub fn get(&self, field: AspirationField) -> Option<f64> {
        match field {
            AspirationField::Ict => self.delta_ict,
            AspirationField::Health => self.delta_health,
            AspirationField::SciEng => self.delta_sci_eng,
            AspirationField::SciTech => self.delta_sci_tech,
        }
    }
}

/// Everything known about one country after merging all loaded tables.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CountryRecord {
    pub country: String,
    pub effects: BTreeMap<Domain, Effects>,
    pub aspirations_2018: AspirationValues,
    pub aspirations_2022: AspirationValues,
    /// Deltas supplied directly by a `career_deltas` table.
    pub reported_deltas: AspirationValues,
    pub external_readiness: Option<f64>,
    pub sources: BTreeSet<TableSchema>,
}

impl CountryRecord {
    fn new(country: String) -> Self {
        CountryRecord {
            country,
            ..Default::default()
        }
    }

    /// A reported delta wins over one computed from the two waves.
    pub fn delta(&self, field: AspirationField) -> Option<f64> {
        self.reported_deltas.get(field).or_else(|| {
            compute_delta(
                self.aspirations_2018.get(field),
                self.aspirations_2022.get(field),
            )
        })
    }

    pub fn aspiration_delta(&self) -> AspirationDelta {
        AspirationDelta {
            country: self.country.clone(),
            delta_ict: self.delta(AspirationField::Ict),
            delta_health: self.delta(AspirationField::Health),
            delta_sci_eng: self.delta(AspirationField::SciEng),
            delta_sci_tech: self.delta(AspirationField::SciTech),
        }
    }

    pub fn effect(&self, domain: Domain, indicator: Indicator) -> Option<f64> {
        self.effects.get(&domain).and_then(|e| e.get(indicator))
    }
}

/// Extracts the first signed integer or decimal from a raw cell.
///
/// Missing markers, cells without digits and numbers written with a
/// thousands separator (`1,234`) all map to `None`.
pub fn parse_cell(text: &str) -> Option<f64> {
    let trimmed = text.trim();
    if MISSING_MARKERS.contains(&trimmed) {
        return None;
    }
    let normalized = trimmed.replace('\u{2212}', "-");
    let found = NUMBER.find(&normalized)?;
    let rest = &normalized[found.end()..];
    if let Some(after_comma) = rest.strip_prefix(',') {
        if after_comma.starts_with(|c: char| c.is_ascii_digit()) {
            return None;
        }
    }
    found.as_str().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Strips annotation symbols and footnote markers from a country name.
pub fn normalize_country(name: &str) -> String {
    let mut current = collapse_whitespace(name);
    loop {
        let next = strip_annotations(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

fn strip_annotations(name: &str) -> String {
    let cleaned: String = name
        .chars()
        .filter(|c| !ANNOTATION_CHARS.contains(c) && !is_superscript_digit(*c))
        .collect();
    let cleaned = PAREN_FOOTNOTE.replace(&cleaned, "");
    let cleaned = GLUED_FOOTNOTE.replace(&cleaned, "$1");
    collapse_whitespace(&cleaned)
}

fn is_superscript_digit(c: char) -> bool {
    matches!(c, '\u{b9}' | '\u{b2}' | '\u{b3}' | '\u{2070}'..='\u{2079}')
}

fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// `v2022 - v2018` when both waves are present.
pub fn compute_delta(v2018: Option<f64>, v2022: Option<f64>) -> Option<f64> {
    Some(v2022? - v2018?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableSchema {
    CareerDeltas,
    CareerLevels,
    Domain(Domain),
    ExternalReadiness,
}

impl TableSchema {
    pub fn header(self) -> &'static [&'static str] {
        match self {
            TableSchema::CareerDeltas => &[
                "country",
                "delta_ict",
                "delta_health",
                "delta_sci_eng",
                "delta_sci_tech",
            ],
            TableSchema::CareerLevels => &["country", "field", "value_2018", "value_2022"],
            TableSchema::Domain(_) => &[
                "country",
                "autonomy_effect",
                "digital_effect",
                "teacher_support_effect",
            ],
            TableSchema::ExternalReadiness => &["country", "ai_readiness"],
        }
    }

    pub fn file_name(self) -> String {
        match self {
            TableSchema::CareerDeltas => "career_deltas.csv".into(),
            TableSchema::CareerLevels => "career_levels.csv".into(),
            TableSchema::Domain(d) => format!("domain_{d}.csv"),
            TableSchema::ExternalReadiness => "external_readiness.csv".into(),
        }
    }

    pub fn is_career(self) -> bool {
        matches!(self, TableSchema::CareerDeltas | TableSchema::CareerLevels)
    }
}

impl fmt::Display for TableSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableSchema::CareerDeltas => f.write_str("career_deltas"),
            TableSchema::CareerLevels => f.write_str("career_levels"),
            TableSchema::Domain(d) => write!(f, "domain_{d}"),
            TableSchema::ExternalReadiness => f.write_str("external_readiness"),
        }
    }
}

impl FromStr for TableSchema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().trim_end_matches(".csv");
        match key {
            "career_deltas" => Ok(TableSchema::CareerDeltas),
            "career_levels" => Ok(TableSchema::CareerLevels),
            "external_readiness" => Ok(TableSchema::ExternalReadiness),
            _ => match key.strip_prefix("domain_") {
                Some(d) => Ok(TableSchema::Domain(d.parse()?)),
                None => Err(Error::Contract(format!("unknown table schema `{s}`"))),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FragmentData {
    Deltas(AspirationValues),
    Levels {
        field: AspirationField,
        v2018: Option<f64>,
        v2022: Option<f64>,
    },
    Effects {
        domain: Domain,
        effects: Effects,
    },
    Readiness(Option<f64>),
}

/// One parsed data row of a source table.
#[derive(Clone, Debug, PartialEq)]
pub struct Fragment {
    pub country: String,
    /// 1-based line number in the source file.
    pub line: u64,
    pub data: FragmentData,
}

impl Fragment {
    pub fn missing_count(&self) -> usize {
        match &self.data {
            FragmentData::Deltas(v) => AspirationField::ALL
                .iter()
                .filter(|f| v.get(**f).is_none())
                .count(),
            FragmentData::Levels { v2018, v2022, .. } => {
                usize::from(v2018.is_none()) + usize::from(v2022.is_none())
            }
            FragmentData::Effects { effects, .. } => Indicator::ALL
                .iter()
                .filter(|i| effects.get(**i).is_none())
                .count(),
            FragmentData::Readiness(v) => usize::from(v.is_none()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LoadedTable {
    pub schema: TableSchema,
    pub path: PathBuf,
    pub fragments: Vec<Fragment>,
    pub warnings: Vec<String>,
}

pub fn load_table(path: impl AsRef<Path>, schema: TableSchema) -> Result<LoadedTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_table(file, schema, path)
}

/// Parses a table from any reader; `source` is used only in messages.
pub fn parse_table<R: Read>(reader: R, schema: TableSchema, source: &Path) -> Result<LoadedTable> {
    let csv_err = |e: csv::Error| Error::Csv {
        path: source.to_path_buf(),
        source: e,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let header = rdr.headers().map_err(csv_err)?.clone();
    check_header(&header, schema, source)?;

    let mut fragments = Vec::new();
    let mut warnings = Vec::new();
    let mut seen: BTreeMap<(String, Option<AspirationField>), u64> = BTreeMap::new();

    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        let raw_name = record.get(0).unwrap_or_default();
        let country = normalize_country(raw_name);
        if country.is_empty() {
            let msg = format!(
                "{}: line {line}: skipping row with empty country name `{raw_name}`",
                source.display()
            );
            warn!("{msg}");
            warnings.push(msg);
            continue;
        }
        let cell = |i: usize| parse_cell(record.get(i).unwrap_or_default());

        let (data, key_field) = match schema {
            TableSchema::CareerDeltas => (
                FragmentData::Deltas(AspirationValues {
                    ict: cell(1),
                    health: cell(2),
                    sci_eng: cell(3),
                    sci_tech: cell(4),
                }),
                None,
            ),
            TableSchema::CareerLevels => {
                let raw_field = record.get(1).unwrap_or_default();
                let field = raw_field
                    .parse::<AspirationField>()
                    .map_err(|_| Error::Schema {
                        path: source.to_path_buf(),
                        column: "field".into(),
                        message: format!("line {line}: unknown field `{raw_field}`"),
                    })?;
                (
                    FragmentData::Levels {
                        field,
                        v2018: cell(2),
                        v2022: cell(3),
                    },
                    Some(field),
                )
            }
            TableSchema::Domain(domain) => (
                FragmentData::Effects {
                    domain,
                    effects: Effects {
                        autonomy: cell(1),
                        digital: cell(2),
                        teacher: cell(3),
                    },
                },
                None,
            ),
            TableSchema::ExternalReadiness => (FragmentData::Readiness(cell(1)), None),
        };

        if let Some(first_line) = seen.insert((country.clone(), key_field), line) {
            return Err(Error::Conflict {
                path: source.to_path_buf(),
                country,
                first_row: first_line as usize,
                second_row: line as usize,
            });
        }
        fragments.push(Fragment {
            country,
            line,
            data,
        });
    }

    Ok(LoadedTable {
        schema,
        path: source.to_path_buf(),
        fragments,
        warnings,
    })
}

fn check_header(header: &csv::StringRecord, schema: TableSchema, source: &Path) -> Result<()> {
    let expected = schema.header();
    let schema_err = |column: &str, message: String| Error::Schema {
        path: source.to_path_buf(),
        column: column.to_string(),
        message,
    };
    for (i, want) in expected.iter().enumerate() {
        match header.get(i) {
            None => {
                return Err(schema_err(
                    want,
                    format!("missing column {} (expected `{want}`)", i + 1),
                ))
            }
            Some(got) => {
                let got_norm = got
                    .trim()
                    .trim_start_matches('\u{feff}')
                    .to_ascii_lowercase();
                if got_norm != *want {
                    return Err(schema_err(
                        got.trim(),
                        format!("column {} should be `{want}` for {schema}", i + 1),
                    ));
                }
            }
        }
    }
    if header.len() > expected.len() {
        let extra = header.get(expected.len()).unwrap_or_default();
        return Err(schema_err(
            extra.trim(),
            format!("unexpected extra column for {schema}"),
        ));
    }
    Ok(())
}

/// All loaded tables merged per normalized country name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// Sorted by country name.
    pub records: Vec<CountryRecord>,
    pub tables: BTreeSet<TableSchema>,
}

fn merge_value(slot: &mut Option<f64>, new: Option<f64>, country: &str, field: &str) -> Result<()> {
    match (*slot, new) {
        (_, None) => Ok(()),
        (None, Some(v)) => {
            *slot = Some(v);
            Ok(())
        }
        (Some(a), Some(b)) if a == b => Ok(()),
        (Some(a), Some(b)) => Err(Error::MergeConflict {
            country: country.to_string(),
            field: field.to_string(),
            first: a,
            second: b,
        }),
    }
}

impl Dataset {
    /// Outer-merges fragments keyed by country. Identical repeats are
    /// accepted; two different present values for the same field are not.
    pub fn from_tables(tables: &[LoadedTable]) -> Result<Dataset> {
        let mut by_country: BTreeMap<String, CountryRecord> = BTreeMap::new();
        let mut present = BTreeSet::new();
        for table in tables {
            present.insert(table.schema);
            for frag in &table.fragments {
                let rec = by_country
                    .entry(frag.country.clone())
                    .or_insert_with(|| CountryRecord::new(frag.country.clone()));
                rec.sources.insert(table.schema);
                let name = frag.country.as_str();
                match &frag.data {
                    FragmentData::Deltas(values) => {
                        for f in AspirationField::ALL {
                            merge_value(
                                rec.reported_deltas.get_mut(f),
                                values.get(f),
                                name,
                                f.delta_column(),
                            )?;
                        }
                    }
                    FragmentData::Levels {
                        field,
                        v2018,
                        v2022,
                    } => {
                        let label = field.as_str();
                        merge_value(
                            rec.aspirations_2018.get_mut(*field),
                            *v2018,
                            name,
                            &format!("{label}_2018"),
                        )?;
                        merge_value(
                            rec.aspirations_2022.get_mut(*field),
                            *v2022,
                            name,
                            &format!("{label}_2022"),
                        )?;
                    }
                    FragmentData::Effects { domain, effects } => {
                        let slot = rec.effects.entry(*domain).or_default();
                        for ind in Indicator::ALL {
                            merge_value(
                                slot.get_mut(ind),
                                effects.get(ind),
                                name,
                                &format!("{domain}_{}", ind.as_str()),
                            )?;
                        }
                    }
                    FragmentData::Readiness(v) => {
                        merge_value(&mut rec.external_readiness, *v, name, "ai_readiness")?;
                    }
                }
            }
        }
        Ok(Dataset {
            records: by_country.into_values().collect(),
            tables: present,
        })
    }

    pub fn get(&self, country: &str) -> Option<&CountryRecord> {
        self.records
            .binary_search_by(|r| r.country.as_str().cmp(country))
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn countries(&self) -> Vec<String> {
        self.records.iter().map(|r| r.country.clone()).collect()
    }

    pub fn deltas(&self) -> Vec<AspirationDelta> {
        self.records
            .iter()
            .map(CountryRecord::aspiration_delta)
            .collect()
    }

    /// Column of one indicator in one domain, aligned with `records`.
    pub fn effect_column(&self, domain: Domain, indicator: Indicator) -> Vec<Option<f64>> {
        self.records
            .iter()
            .map(|r| r.effect(domain, indicator))
            .collect()
    }

    pub fn matrix(&self, domain: Domain) -> Result<AnalyticalMatrix> {
        if !self.tables.iter().any(|t| t.is_career()) {
            return Err(Error::EmptyMatrix(
                "no career-expectation table was loaded".into(),
            ));
        }
        if !self.tables.contains(&TableSchema::Domain(domain)) {
            return Err(Error::EmptyMatrix(format!(
                "no {domain} domain table was loaded"
            )));
        }
        let shared = self
            .records
            .iter()
            .filter(|r| {
                r.sources.contains(&TableSchema::Domain(domain))
                    && r.sources.iter().any(|s| s.is_career())
            })
            .count();
        if shared == 0 {
            return Err(Error::EmptyMatrix(format!(
                "no country appears in both the career table and the {domain} table"
            )));
        }

        let rows = self
            .records
            .iter()
            .map(|r| {
                let e = r.effects.get(&domain).copied().unwrap_or_default();
                [
                    e.autonomy,
                    e.digital,
                    e.teacher,
                    r.delta(AspirationField::Ict),
                    r.delta(AspirationField::Health),
                    r.delta(AspirationField::SciEng),
                    r.delta(AspirationField::SciTech),
                ]
            })
            .collect();
        Ok(AnalyticalMatrix {
            domain,
            countries: self.countries(),
            values: rows,
        })
    }
}

/// Merges the loaded tables and assembles the matrix for one domain.
pub fn build_matrix(tables: &[LoadedTable], domain: Domain) -> Result<AnalyticalMatrix> {
    Dataset::from_tables(tables)?.matrix(domain)
}

pub const MATRIX_COLUMNS: [&str; 7] = [
    "A",
    "D",
    "T",
    "delta_ict",
    "delta_health",
    "delta_sci_eng",
    "delta_sci_tech",
];

pub const COL_A: usize = 0;
pub const COL_D: usize = 1;
pub const COL_T: usize = 2;
pub const COL_ICT: usize = 3;

/// Country × variable grid; `None` marks a masked (missing) entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticalMatrix {
    pub domain: Domain,
    pub countries: Vec<String>,
    pub values: Vec<[Option<f64>; 7]>,
}

impl AnalyticalMatrix {
    pub fn columns(&self) -> [&'static str; 7] {
        MATRIX_COLUMNS
    }

    pub fn n_rows(&self) -> usize {
        self.countries.len()
    }

    pub fn mask(&self) -> Vec<[bool; 7]> {
        self.values
            .iter()
            .map(|row| row.map(|v| v.is_some()))
            .collect()
    }

    pub fn column(&self, j: usize) -> Vec<Option<f64>> {
        self.values.iter().map(|row| row[j]).collect()
    }

    /// Row indices with every listed column present.
    pub fn complete_rows(&self, cols: &[usize]) -> Vec<usize> {
        (0..self.n_rows())
            .filter(|&i| cols.iter().all(|&j| self.values[i][j].is_some()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, schema: TableSchema) -> Result<LoadedTable> {
        parse_table(text.as_bytes(), schema, Path::new("fixture.csv"))
    }

    #[test]
    fn parse_cell_examples() {
        assert_eq!(parse_cell("m"), None);
        assert_eq!(parse_cell("-12"), Some(-12.0));
        assert_eq!(parse_cell("8*"), Some(8.0));
        assert_eq!(parse_cell(""), None);
    }

    #[test]
    fn parse_cell_markers_and_annotations() {
        for marker in ["..", "\u{2014}", "  m  ", "n/a"] {
            assert_eq!(parse_cell(marker), None, "{marker:?}");
        }
        assert_eq!(parse_cell("12.5 (3.1)"), Some(12.5));
        assert_eq!(parse_cell("\u{2212}4.2"), Some(-4.2));
        assert_eq!(parse_cell("+3"), Some(3.0));
        assert_eq!(parse_cell("1,234"), None);
        assert_eq!(parse_cell("-0.75\u{2020}"), Some(-0.75));
    }

    #[test]
    fn normalize_country_examples() {
        assert_eq!(normalize_country("Poland*"), "Poland");
        assert_eq!(normalize_country("  Korea "), "Korea");
        assert_eq!(normalize_country("Netherlands"), "Netherlands");
        assert_eq!(normalize_country("Cyprus1,2"), "Cyprus");
        assert_eq!(normalize_country("Israel (3)"), "Israel");
        assert_eq!(
            normalize_country("Hong Kong  (China)*"),
            "Hong Kong (China)"
        );
        assert_eq!(normalize_country("Viet Nam\u{2020}\u{b9}"), "Viet Nam");
        assert_eq!(normalize_country("***"), "");
    }

    #[test]
    fn compute_delta_examples() {
        assert_eq!(compute_delta(Some(8.5), Some(10.0)), Some(1.5));
        assert_eq!(compute_delta(None, Some(10.0)), None);
        assert_eq!(compute_delta(Some(4.0), Some(4.0)), Some(0.0));
    }

    #[test]
    fn load_three_rows_with_one_missing() {
        let text = "country,autonomy_effect,digital_effect,teacher_support_effect\n\
                    Chile,3,4,5\nPeru*,m,1.5,-2\nSpain,1,2,3\n";
        let t = parse(text, TableSchema::Domain(Domain::Math)).unwrap();
        assert_eq!(t.fragments.len(), 3);
        let missing: usize = t.fragments.iter().map(Fragment::missing_count).sum();
        assert_eq!(missing, 1);
        assert_eq!(t.fragments[1].country, "Peru");
    }

    #[test]
    fn wrong_header_names_column() {
        let text = "country,autonomy,digital_effect,teacher_support_effect\nChile,1,2,3\n";
        match parse(text, TableSchema::Domain(Domain::Math)) {
            Err(Error::Schema { column, .. }) => assert_eq!(column, "autonomy"),
            other => panic!("expected schema error, got {other:?}"),
        }
        let short = "country,delta_ict\nChile,1\n";
        assert!(matches!(
            parse(short, TableSchema::CareerDeltas),
            Err(Error::Schema { column, .. }) if column == "delta_health"
        ));
    }

    #[test]
    fn duplicate_normalized_country_conflicts() {
        let text = "country,delta_ict,delta_health,delta_sci_eng,delta_sci_tech\n\
                    Finland,1,2,3,4\nFinland*,1,2,3,4\n";
        match parse(text, TableSchema::CareerDeltas) {
            Err(Error::Conflict {
                country,
                first_row,
                second_row,
                ..
            }) => {
                assert_eq!(country, "Finland");
                assert_eq!((first_row, second_row), (2, 3));
            }
            other => panic!("expected conflict, got {other:?}"),
        }
    }

    #[test]
    fn empty_country_rows_are_skipped() {
        let text = "country,ai_readiness\n*,3\nChile,2\n";
        let t = parse(text, TableSchema::ExternalReadiness).unwrap();
        assert_eq!(t.fragments.len(), 1);
        assert_eq!(t.warnings.len(), 1);
    }

    #[test]
    fn long_form_levels_produce_deltas() {
        let text = "country,field,value_2018,value_2022\n\
                    Chile,ict,8.5,10\nChile,health,m,3\nChile,sci_eng,4,4\n";
        let t = parse(text, TableSchema::CareerLevels).unwrap();
        let ds = Dataset::from_tables(&[t]).unwrap();
        let d = ds.records[0].aspiration_delta();
        assert_eq!(d.delta_ict, Some(1.5));
        assert_eq!(d.delta_health, None);
        assert_eq!(d.delta_sci_eng, Some(0.0));
        assert_eq!(d.delta_sci_tech, None);

        let dup = "country,field,value_2018,value_2022\nChile,ict,1,2\nChile,ict,1,2\n";
        assert!(matches!(
            parse(dup, TableSchema::CareerLevels),
            Err(Error::Conflict { .. })
        ));
    }

    fn career(rows: &str) -> LoadedTable {
        let text = format!("country,delta_ict,delta_health,delta_sci_eng,delta_sci_tech\n{rows}");
        parse(&text, TableSchema::CareerDeltas).unwrap()
    }

    fn math(rows: &str) -> LoadedTable {
        let text = format!("country,autonomy_effect,digital_effect,teacher_support_effect\n{rows}");
        parse(&text, TableSchema::Domain(Domain::Math)).unwrap()
    }

    #[test]
    fn outer_merge_masks_gaps() {
        let c = career("Chile,1,2,3,4\nPeru,1,2,3,4\nSpain,0,0,0,0\n");
        let m = math("Chile,5,6,7\nPeru,5,6,7\n");
        let x = build_matrix(&[c, m], Domain::Math).unwrap();
        assert_eq!(x.countries, vec!["Chile", "Peru", "Spain"]);
        assert_eq!(x.mask()[2], [false, false, false, true, true, true, true]);
        assert!(x.mask()[0].iter().all(|&b| b));
    }

    #[test]
    fn single_country_fully_present() {
        let x = build_matrix(
            &[career("Chile,1,2,3,4\n"), math("Chile,5,6,7\n")],
            Domain::Math,
        )
        .unwrap();
        assert_eq!(x.n_rows(), 1);
        assert_eq!(x.values[0], [5.0, 6.0, 7.0, 1.0, 2.0, 3.0, 4.0].map(Some));
        assert_eq!(x.columns(), MATRIX_COLUMNS);
    }

    #[test]
    fn merge_is_idempotent() {
        let c = career("Chile,1,2,3,4\nPeru,m,2,3,4\n");
        let m = math("Chile,5,6,7\n");
        let once = build_matrix(&[c.clone(), m.clone()], Domain::Math).unwrap();
        let twice = build_matrix(&[c.clone(), m.clone(), c, m], Domain::Math).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn disjoint_tables_give_empty_matrix() {
        let err = build_matrix(
            &[career("Chile,1,2,3,4\n"), math("Peru,5,6,7\n")],
            Domain::Math,
        );
        assert!(matches!(err, Err(Error::EmptyMatrix(_))));
        let err = build_matrix(&[career("Chile,1,2,3,4\n")], Domain::Math);
        assert!(matches!(err, Err(Error::EmptyMatrix(_))));
    }

    #[test]
    fn conflicting_values_across_tables() {
        let err = Dataset::from_tables(&[career("Chile,1,2,3,4\n"), career("Chile,9,2,3,4\n")]);
        assert!(matches!(err, Err(Error::MergeConflict { .. })));
    }

    #[test]
    fn schema_names_round_trip() {
        for s in [
            TableSchema::CareerDeltas,
            TableSchema::CareerLevels,
            TableSchema::Domain(Domain::Reading),
            TableSchema::ExternalReadiness,
        ] {
            assert_eq!(s.file_name().parse::<TableSchema>().unwrap(), s);
        }
    }
}
