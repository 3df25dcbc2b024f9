use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use nrsim_core::rul::corpus::CorpusParams;

mod campaign;
mod config;
mod rul;

use config::{ConfigError, FileConfig, Overrides};

#[derive(Parser, Debug)]
#[command(
    name = "nrsim",
    version,
    about = "5G NR RAN latency campaigns and RUL feasibility analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a simulation campaign (sweeps, architecture presets, figure data).
    Run(RunArgs),
    /// Generate a synthetic fault corpus CSV.
    Corpus(CorpusArgs),
    /// Calibrate thresholds and report cost/advance on a corpus.
    Evaluate(EvalArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Campaign file (TOML, namespaced keys).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Architecture presets 1-4 (comma-separated).
    #[arg(long, value_delimiter = ',')]
    arch: Option<Vec<u8>>,
    #[arg(long, value_delimiter = ',')]
    n_ues: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    bandwidth_mhz: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    scs_khz: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',')]
    mod_order: Option<Vec<u32>>,
    #[arg(long)]
    t_cn_ms: Option<f64>,
    /// Base seed; replication i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<u32>,
    #[arg(long)]
    sim_time_s: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// fig2, fig3 or fig5.
    #[arg(long)]
    figure: Option<String>,
    /// fifo or rr.
    #[arg(long)]
    policy: Option<String>,
    /// Required margin between advance and RTT for FEASIBLE (ms).
    #[arg(long)]
    slack_ms: Option<f64>,
    /// Also write per-transaction CSVs.
    #[arg(long)]
    transactions: bool,
    /// Also write the grant log of the first replication.
    #[arg(long)]
    grant_log: bool,
}

#[derive(Args, Debug)]
struct CorpusArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 40)]
    series: usize,
    #[arg(long, default_value_t = 200)]
    length: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    dt_ms: Option<f64>,
    #[arg(long)]
    transient_len: Option<usize>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    post_fault: Option<usize>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// External per-sample scores (series_id, t_ms, score); the built-in
    /// feature pipeline and baseline run when absent.
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "5")]
    margin: Vec<usize>,
    /// Count the fault sample inside the margin (m labeled samples, not m + 1).
    #[arg(long)]
    inclusive: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "metrics.json")]
    out: PathBuf,
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("NRSIM_THREADS") {
        let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            ConfigError(format!("NRSIM_THREADS = {v:?} is not a positive integer"))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("building worker pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    match cli.command {
        Command::Run(a) => {
            let overrides = Overrides {
                archs: a.arch,
                n_ues: a.n_ues,
                bandwidth_mhz: a.bandwidth_mhz,
                scs_khz: a.scs_khz,
                mod_order: a.mod_order,
                t_cn_ms: a.t_cn_ms,
                seed: a.seed,
                replications: a.replications,
                out_dir: a.out_dir,
                figure: a.figure,
                policy: a.policy,
                sim_time_s: a.sim_time_s,
                slack_ms: a.slack_ms,
                transactions: a.transactions,
                grant_log: a.grant_log,
            };
            let plan = match &a.config {
                Some(path) => {
                    let (file, text) = FileConfig::load(path)?;
                    config::resolve(file, Some((&text, path)), overrides)?
                }
                None => config::resolve(FileConfig::default(), None, overrides)?,
            };
            campaign::run(&plan)
        }
        Command::Corpus(a) => {
            let d = CorpusParams::default();
            let params = CorpusParams {
                dt_ms: a.dt_ms.unwrap_or(d.dt_ms),
                transient_len: a.transient_len.unwrap_or(d.transient_len),
                amplitude: a.amplitude.unwrap_or(d.amplitude),
                noise: a.noise.unwrap_or(d.noise),
                seasonal_amplitude: d.seasonal_amplitude,
                post_fault: a.post_fault.unwrap_or(d.post_fault),
            };
            rul::corpus(&a.out, a.series, a.length, &params, a.seed)
        }
        Command::Evaluate(a) => rul::evaluate(&rul::EvaluateArgs {
            corpus: a.corpus,
            scores: a.scores,
            margins: a.margin,
            inclusive: a.inclusive,
            split_seed: a.seed,
            out: a.out,
        }),
    }
}

/// 2 for simulation invariant violations, 1 for everything else.
fn exit_code(e: &anyhow::Error) -> u8 {
    let invariant = e.chain().any(|c| {
        matches!(
            c.downcast_ref::<nrsim_core::Error>(),
            Some(nrsim_core::Error::Invariant(_))
        )
    });
    if invariant {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let inv = anyhow::Error::from(nrsim_core::Error::Invariant(
            "components do not add up".into(),
        ));
        assert_eq!(exit_code(&inv.context("replication 3")), 2);
        let cfg = anyhow::Error::from(nrsim_core::Error::InvalidConfig("bad".into()));
        assert_eq!(exit_code(&cfg), 1);
        assert_eq!(exit_code(&anyhow::anyhow!(ConfigError("x".into()))), 1);
    }
}
