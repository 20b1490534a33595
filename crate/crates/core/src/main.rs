use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toric_gauge::cli::write_run;
use toric_gauge::config::{Experiment, RunConfig};
use toric_gauge::{Error, Result};

#[derive(Parser)]
#[command(name = "toric-gauge", version, about = "Noisy toric-code memory experiments and their gauge-model mapping")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Cross-check the statevector, exact and Monte Carlo engines on small lattices
    Validate(Common),
    /// Draw noisy trajectories and summarise each
    Sample(Common),
    /// Wilson loops of the gauge model, exact or Monte Carlo
    Wilson(Common),
    /// Logical failure rate of a decoder
    Decode(Common),
    /// Failure rate over the preparation and bulk temperature grid
    PhaseScan(Common),
    /// One-round fidelity against distance, weak and stochastic readout
    FidelityScan(Common),
    /// Coefficients of the realistic ancilla readout
    Realmeas(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per point, overriding the config
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let (kind, c) = match cli.cmd {
        Cmd::Validate(c) => (Experiment::Validate, c),
        Cmd::Sample(c) => (Experiment::Sample, c),
        Cmd::Wilson(c) => (Experiment::Wilson, c),
        Cmd::Decode(c) => (Experiment::Decode, c),
        Cmd::PhaseScan(c) => (Experiment::PhaseScan, c),
        Cmd::FidelityScan(c) => (Experiment::FidelityScan, c),
        Cmd::Realmeas(c) => (Experiment::Realmeas, c),
    };
    let mut cfg = match &c.config {
        Some(p) => RunConfig::parse(&std::fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    if let Some(k) = cfg.kind {
        if k != kind {
            return Err(Error::Config { key: "kind".into(), msg: format!("config is for `{}`, not `{}`", k.name(), kind.name()) });
        }
    }
    cfg.kind = Some(kind);
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(n) = c.trials {
        cfg.trials = n;
    }
    let threads = c.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().map_err(|e| Error::Param(e.to_string()))?;
    let out = c.out.or_else(|| cfg.out.clone().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out").join(kind.name()));
    let (res, manifest) = write_run(kind, &cfg, &out, threads)?;
    for t in &res.tables {
        eprintln!("wrote {} ({} rows)", out.join(&t.name).display(), t.rows.len());
    }
    eprintln!("wrote {}", manifest.display());
    if kind == Experiment::Validate {
        print!("{}", res.tables[0].to_csv());
    }
    Ok(res.ok)
}
