use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use monoscale::{run_with_cache, ExperimentConfig, ExperimentKind};

/// Numerical homogenization of periodic monotone operators.
#[derive(Parser, Debug)]
#[command(name = "monoscale", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Structural and property audit of the operator and its homogenized map.
    Audit(KindArgs),
    /// Effective flux at the configured gradients.
    Effective(KindArgs),
    /// Gradient errors of the fine solution for decreasing epsilon.
    Convergence(KindArgs),
    /// Corrector study with per-cell energy and averaging checks.
    Corrector(KindArgs),
}

#[derive(Args, Debug)]
struct KindArgs {
    /// Config file; the built-in defaults are used without one.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "MONOSCALE_THREADS")]
    threads: Option<usize>,
    /// Cache CSV, read when present and rewritten after the run.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Replaces the epsilon list (repeatable).
    #[arg(long = "epsilon")]
    epsilons: Vec<f64>,
    /// Replaces the sampling seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(kind: Option<ExperimentKind>, path: Option<&PathBuf>) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::builtin(kind.unwrap_or(ExperimentKind::Audit)),
    };
    if let Some(k) = kind {
        cfg.kind = k;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    let (cfg, common) = match cli.command {
        Command::Run { config, common } => (load(None, Some(&config))?, common),
        Command::Audit(a) => (
            load(Some(ExperimentKind::Audit), a.config.as_ref())?,
            a.common,
        ),
        Command::Effective(a) => (
            load(Some(ExperimentKind::Effective), a.config.as_ref())?,
            a.common,
        ),
        Command::Convergence(a) => (
            load(Some(ExperimentKind::Convergence), a.config.as_ref())?,
            a.common,
        ),
        Command::Corrector(a) => (
            load(Some(ExperimentKind::Corrector), a.config.as_ref())?,
            a.common,
        ),
    };
    let mut cfg = cfg;
    if !common.epsilons.is_empty() {
        cfg.epsilons = common.epsilons.clone();
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    if let Some(n) = common.threads {
        anyhow::ensure!(n > 0, "--threads must be positive");
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("thread pool")?;
    }
    let out_dir = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("monoscale_output"));
    let out = run_with_cache(&cfg, common.cache.as_deref())?;
    out.write(&out_dir)
        .with_context(|| format!("writing {}", out_dir.display()))?;
    print!("{}", out.report.table.to_csv());
    for v in &out.report.verdicts {
        println!(
            "{}: {} ({})",
            v.name,
            if v.passed { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!(
        "{} {} -> {}",
        cfg.kind.name(),
        if out.report.passed { "PASS" } else { "FAIL" },
        out_dir.display()
    );
    Ok(out.report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
