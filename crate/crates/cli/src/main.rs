//! `qkernel` — run kernel, mitigation-sweep, classification, budget and
//! QFIM experiments from a TOML config.
//!
//! Precedence: built-in defaults < `--config` file < command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use qkernel::config::RunConfig;
use qkernel::estimation::Strategy;
use qkernel::experiments::{cmd_budget, cmd_classify, cmd_kernel, cmd_qfim_check, cmd_sweep};

#[derive(Parser, Debug)]
#[command(name = "qkernel", version, about = "Quantum kernel experiments on a statevector simulator")]
struct Cli {
    /// TOML run configuration; defaults apply to every missing key.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed (overrides `experiment.seed`).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Output directory (overrides `io.out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Kernel versus QFIM-weighted distance for random feature pairs.
    Kernel,
    /// Mitigated ΔK over shots and noise, and the minimal shot count per noise level.
    Sweep {
        /// Only search s_min; skip the full (s, p) grid.
        #[arg(long)]
        no_grid: bool,
    },
    /// Digit classification accuracy versus training-set size.
    Classify,
    /// Circuit executions and device time of an overlap strategy.
    Budget {
        #[arg(long, default_value = "randomized")]
        strategy: Strategy,
        /// Number of data points L.
        #[arg(long = "l", default_value_t = 1790)]
        l: u64,
        /// Shots per circuit.
        #[arg(long, default_value_t = 8192)]
        s: u64,
        /// Random bases (randomized strategy only).
        #[arg(long, default_value_t = 8)]
        r: u64,
        /// Circuit executions per second.
        #[arg(long, default_value_t = 5000.0)]
        rate: f64,
    },
    /// QFIM at the reference parameters: deviation from identity, spectrum, rank.
    QfimCheck,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.io.out = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the thread pool")?;
    }

    if let Command::Budget {
        strategy,
        l,
        s,
        r,
        rate,
    } = &cli.command
    {
        let summary = cmd_budget(*strategy, *l, *s, *r, *rate)?;
        println!(
            "{:?}: {} circuit executions, {} at {} executions/s",
            strategy, summary.report.n_circuit_executions, summary.display, rate
        );
        let json = serde_json_pretty(&summary)?;
        println!("{json}");
        if let Some(out) = &cli.out {
            std::fs::create_dir_all(out)?;
            std::fs::write(out.join("budget.json"), json)?;
        }
        return Ok(());
    }

    let cfg = load_config(&cli)?;
    let out = cfg.out_dir();
    let out = out.as_path();
    match cli.command {
        Command::Kernel => {
            let rows = cmd_kernel(&cfg, Some(out))?;
            let (near, far): (Vec<_>, Vec<_>) = rows.iter().partition(|r| r.d_f <= 4.0);
            println!("{} pairs, {} with d_F <= 4, {} beyond", rows.len(), near.len(), far.len());
            report_written(out, "kernel.csv");
        }
        Command::Sweep { no_grid } => {
            let rep = cmd_sweep(&cfg, !no_grid, Some(out))?;
            for row in &rep.s_min {
                match row.s_min {
                    Some(s) => println!("p = {:<5} s_min = {s}", row.p),
                    None => println!("p = {:<5} s_min saturated", row.p),
                }
            }
            match rep.fit {
                Some((slope, _)) => println!("power-law slope of s_min vs (1 - p): {slope:.3}"),
                None => println!("too few unsaturated points for a power-law fit"),
            }
            report_written(out, "s_min.csv");
        }
        Command::Classify => {
            let rep = cmd_classify(&cfg, Some(out))?;
            for row in &rep.rows {
                let (m, s) = row.test_mean_std();
                let (tm, _) = row.train_mean_std();
                println!(
                    "{:<12} L_train = {:<5} test {:.2}% ± {:.2}  train {:.2}%",
                    row.kernel.name(),
                    row.l_train,
                    100.0 * m,
                    100.0 * s,
                    100.0 * tm
                );
            }
            report_written(out, "accuracy.csv");
        }
        Command::QfimCheck => {
            let q = cmd_qfim_check(&cfg, Some(out))?;
            println!("max |F - I| = {:.3e}", q.max_abs_deviation_from_identity);
            println!(
                "eigenvalues: min {:.6} max {:.6} mean {:.6}",
                q.eigenvalue_min, q.eigenvalue_max, q.eigenvalue_mean
            );
            println!(
                "rank {} of {} parameters (bound 2^(N+1) - 2 = {})",
                q.rank, q.n_params, q.rank_bound
            );
            report_written(out, "qfim.json");
        }
        Command::Budget { .. } => unreachable!("handled above"),
    }
    Ok(())
}

fn serde_json_pretty<T: serde::Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

fn report_written(out: &Path, main: &str) {
    println!("wrote {} and metadata.json", out.join(main).display());
}
