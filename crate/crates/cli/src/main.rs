//! `aspire`: runs the analytics pipeline, or a single stage of it, from a
//! TOML config.
//!
//! Exit codes: 0 when every stage completed, 2 when some stage failed or was
//! skipped, 1 on configuration or I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use aspire_core::config::PipelineConfig;
use aspire_core::ingest::Domain;
use aspire_core::pipeline::{run_stages, Stage, MANIFEST_FILE};
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "aspire",
    version,
    about = "Learning-environment and ICT aspiration analytics"
)]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Global seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Domain feeding the indicator-based stages; overrides `domain`.
    #[arg(long, global = true)]
    domain: Option<Domain>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load, merge and write the analytical matrix.
    Ingest,
    /// Cross-domain correlations and paired t-tests.
    Consistency,
    /// k-means typologies over standardized indicators.
    Cluster,
    /// Train the VAE and write the latent readiness embedding.
    Vae,
    /// OLS of the ICT change on the indicators, plus moderation slopes.
    Regress,
    /// Two-class LDA with stratified cross-validation.
    Lda,
    /// Autonomy +1 SD counterfactual from the regression.
    Counterfactual,
    /// Bayesian network over the discretized aspiration changes.
    Bnet,
    /// Descriptive series: histogram, rankings, scatter, heatmap, boxplots.
    Report,
    /// Every stage.
    Run,
}

impl Command {
    fn stages(&self) -> Vec<Stage> {
        match self {
            Command::Ingest => vec![Stage::Ingest],
            Command::Consistency => vec![Stage::Consistency],
            Command::Cluster => vec![Stage::Cluster],
            Command::Vae => vec![Stage::Vae],
            Command::Regress => vec![Stage::Regress],
            Command::Lda => vec![Stage::Lda],
            Command::Counterfactual => vec![Stage::Counterfactual],
            Command::Bnet => vec![Stage::Bnet],
            Command::Report => vec![Stage::Report],
            Command::Run => Stage::ALL.to_vec(),
        }
    }
}

fn run(cli: Cli) -> aspire_core::Result<i32> {
    let path = cli.config.ok_or_else(|| {
        aspire_core::Error::Config(vec!["--config <path> is required".to_string()])
    })?;
    let mut cfg = PipelineConfig::from_file(&path)?;
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(domain) = cli.domain {
        cfg.domain = domain;
    }
    let manifest = run_stages(&cfg, &cli.command.stages())?;
    for s in &manifest.stages {
        println!("{:<15} {}", s.stage.as_str(), s.status);
    }
    println!("manifest: {}", cfg.out_dir.join(MANIFEST_FILE).display());
    Ok(manifest.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
