//! TOML pipeline configuration. Relative paths resolve against the
//! directory of the config file; every seed must be given explicitly.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bnet::BN_FIELDS;
use crate::error::{Error, Result};
use crate::ingest::{Domain, TableSchema};
use crate::model::{Standardization, Threshold};
use crate::stats::Tertile;
use crate::vae::VaeHyper;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Global seed; stages derive their random streams from it.
    pub seed: Option<u64>,
    #[serde(default = "default_domain")]
    pub domain: Domain,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub inputs: InputPaths,
    #[serde(default)]
    pub cluster: ClusterConfig,
    #[serde(default)]
    pub vae: VaeConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub bnet: BnetConfig,
    #[serde(default)]
    pub report: ReportConfig,
}

fn default_domain() -> Domain {
    Domain::Math
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Explicit table paths; `dir` supplies any canonical file name found there
/// that is not listed explicitly.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
    pub dir: Option<PathBuf>,
    pub career_deltas: Option<PathBuf>,
    pub career_levels: Option<PathBuf>,
    pub domain_math: Option<PathBuf>,
    pub domain_reading: Option<PathBuf>,
    pub domain_science: Option<PathBuf>,
    pub external_readiness: Option<PathBuf>,
}

const ALL_SCHEMAS: [TableSchema; 6] = [
    TableSchema::CareerDeltas,
    TableSchema::CareerLevels,
    TableSchema::Domain(Domain::Math),
    TableSchema::Domain(Domain::Reading),
    TableSchema::Domain(Domain::Science),
    TableSchema::ExternalReadiness,
];

impl InputPaths {
    fn explicit(&self, schema: TableSchema) -> Option<&PathBuf> {
        match schema {
            TableSchema::CareerDeltas => self.career_deltas.as_ref(),
            TableSchema::CareerLevels => self.career_levels.as_ref(),
            TableSchema::Domain(Domain::Math) => self.domain_math.as_ref(),
            TableSchema::Domain(Domain::Reading) => self.domain_reading.as_ref(),
            TableSchema::Domain(Domain::Science) => self.domain_science.as_ref(),
            TableSchema::ExternalReadiness => self.external_readiness.as_ref(),
        }
    }

    /// Tables to load, in a fixed schema order.
    pub fn resolved(&self) -> Vec<(TableSchema, PathBuf)> {
        ALL_SCHEMAS
            .iter()
            .filter_map(|&s| {
                if let Some(p) = self.explicit(s) {
                    return Some((s, p.clone()));
                }
                let p = self.dir.as_ref()?.join(s.file_name());
                p.is_file().then_some((s, p))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterConfig {
    pub k: usize,
    pub restarts: usize,
    /// Largest k on the inertia (elbow) curve.
    pub k_max: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            k: crate::cluster::DEFAULT_K,
            restarts: crate::cluster::DEFAULT_RESTARTS,
            k_max: 6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VaeConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub alpha: f64,
    /// Falls back to the global seed.
    pub seed: Option<u64>,
}

impl Default for VaeConfig {
    fn default() -> Self {
        let h = VaeHyper::with_seed(0);
        VaeConfig {
            hidden: h.hidden,
            epochs: h.epochs,
            learning_rate: h.learning_rate,
            alpha: h.alpha,
            seed: None,
        }
    }
}

/// `"median"` or a fixed ΔICT cut-off.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThresholdSetting {
    Named(String),
    Value(f64),
}

impl ThresholdSetting {
    pub fn to_threshold(&self) -> Result<Threshold> {
        match self {
            ThresholdSetting::Value(v) if v.is_finite() => Ok(Threshold::Value(*v)),
            ThresholdSetting::Named(s) if s == "median" => Ok(Threshold::Median),
            other => Err(Error::Config(vec![format!(
                "model.threshold must be \"median\" or a finite number, got {other:?}"
            )])),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub folds: usize,
    pub threshold: ThresholdSetting,
    pub standardization: Standardization,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            folds: crate::model::DEFAULT_FOLDS,
            threshold: ThresholdSetting::Named("median".into()),
            standardization: Standardization::Both,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySpec {
    pub target: String,
    #[serde(default)]
    pub evidence: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BnetConfig {
    pub restarts: usize,
    pub queries: Vec<QuerySpec>,
}

impl Default for BnetConfig {
    fn default() -> Self {
        BnetConfig {
            restarts: crate::bnet::DEFAULT_RESTARTS,
            queries: vec![QuerySpec {
                target: "delta_ict".into(),
                evidence: BTreeMap::from([("delta_sci_eng".to_string(), "low".to_string())]),
            }],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    pub histogram_bins: usize,
    pub ranking_n: usize,
    pub heatmap_n: usize,
    pub readiness_n: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            histogram_bins: 10,
            ranking_n: 10,
            heatmap_n: 20,
            readiness_n: 15,
        }
    }
}

impl PipelineConfig {
    /// A config with defaults everywhere except the seed.
    pub fn with_seed(seed: u64) -> Self {
        PipelineConfig {
            seed: Some(seed),
            domain: default_domain(),
            out_dir: default_out_dir(),
            inputs: InputPaths::default(),
            cluster: ClusterConfig::default(),
            vae: VaeConfig::default(),
            model: ModelConfig::default(),
            bnet: BnetConfig::default(),
            report: ReportConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(vec![e.message().to_string()]))
    }

    /// Parses the file and rebases relative paths onto its directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.rebase(base);
        Ok(cfg)
    }

    pub fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        let i = &mut self.inputs;
        for p in [
            &mut i.dir,
            &mut i.career_deltas,
            &mut i.career_levels,
            &mut i.domain_math,
            &mut i.domain_reading,
            &mut i.domain_science,
            &mut i.external_readiness,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn vae_hyper(&self) -> VaeHyper {
        VaeHyper {
            hidden: self.vae.hidden,
            epochs: self.vae.epochs,
            learning_rate: self.vae.learning_rate,
            seed: self.vae.seed.or(self.seed).unwrap_or_default(),
            alpha: self.vae.alpha,
        }
    }

    /// Every problem with the config, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.seed.is_none() {
            v.push("seed is required".to_string());
        }
        if self.cluster.k == 0 {
            v.push("cluster.k must be at least 1".to_string());
        }
        if self.cluster.restarts == 0 {
            v.push("cluster.restarts must be at least 1".to_string());
        }
        if self.cluster.k_max == 0 {
            v.push("cluster.k_max must be at least 1".to_string());
        }
        v.extend(self.vae_hyper().violations());
        if self.model.folds < 2 {
            v.push(format!(
                "model.folds must be at least 2, got {}",
                self.model.folds
            ));
        }
        if let Err(Error::Config(msgs)) = self.model.threshold.to_threshold() {
            v.extend(msgs);
        }
        if self.report.histogram_bins == 0 {
            v.push("report.histogram_bins must be at least 1".to_string());
        }
        for (name, n) in [
            ("ranking_n", self.report.ranking_n),
            ("heatmap_n", self.report.heatmap_n),
            ("readiness_n", self.report.readiness_n),
        ] {
            if n == 0 {
                v.push(format!("report.{name} must be at least 1"));
            }
        }
        let names: Vec<&str> = BN_FIELDS.iter().map(|f| f.delta_column()).collect();
        for (i, q) in self.bnet.queries.iter().enumerate() {
            if !names.contains(&q.target.as_str()) {
                v.push(format!("bnet.queries[{i}]: unknown target `{}`", q.target));
            }
            for (var, state) in &q.evidence {
                if !names.contains(&var.as_str()) {
                    v.push(format!(
                        "bnet.queries[{i}]: unknown evidence variable `{var}`"
                    ));
                }
                if var == &q.target {
                    v.push(format!(
                        "bnet.queries[{i}]: target `{var}` also appears as evidence"
                    ));
                }
                if state.parse::<Tertile>().is_err() {
                    v.push(format!(
                        "bnet.queries[{i}]: `{state}` is not low, medium or high"
                    ));
                }
            }
        }
        let tables = self.inputs.resolved();
        if !tables.iter().any(|(s, _)| s.is_career()) {
            v.push("inputs: no career_deltas or career_levels table configured".to_string());
        }
        if !tables
            .iter()
            .any(|(s, _)| matches!(s, TableSchema::Domain(_)))
        {
            v.push("inputs: no domain table configured".to_string());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_needs_seed_and_inputs() {
        let cfg = PipelineConfig::from_toml_str("").unwrap();
        let v = cfg.violations();
        assert!(v.iter().any(|m| m.contains("seed")));
        assert!(v.iter().any(|m| m.contains("career")));
        assert!(v.iter().any(|m| m.contains("domain table")));
    }

    #[test]
    fn all_violations_are_listed() {
        let cfg = PipelineConfig::from_toml_str(
            r#"
            seed = 1
            [inputs]
            career_deltas = "a.csv"
            domain_math = "b.csv"
            [cluster]
            k = 0
            [vae]
            alpha = 1.5
            epochs = 0
            [model]
            threshold = "mean"
            "#,
        )
        .unwrap();
        let v = cfg.violations();
        assert_eq!(v.len(), 4, "{v:?}");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            PipelineConfig::from_toml_str("sed = 1"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn numeric_threshold_and_paths_rebase() {
        let mut cfg = PipelineConfig::from_toml_str(
            "seed = 3\ndomain = \"reading\"\n[inputs]\ncareer_deltas = \"d.csv\"\n[model]\nthreshold = 0.5\n",
        )
        .unwrap();
        assert_eq!(
            cfg.model.threshold.to_threshold().unwrap(),
            Threshold::Value(0.5)
        );
        assert_eq!(cfg.domain, Domain::Reading);
        cfg.rebase(Path::new("/base"));
        assert_eq!(cfg.inputs.career_deltas, Some(PathBuf::from("/base/d.csv")));
        assert_eq!(cfg.out_dir, PathBuf::from("/base/out"));
    }

    #[test]
    fn default_query_is_ict_given_low_sci_eng() {
        let q = &BnetConfig::default().queries[0];
        assert_eq!(q.target, "delta_ict");
        assert_eq!(q.evidence["delta_sci_eng"], "low");
    }
}
