use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use congest_mcf::congest::TlapModel;
use congest_mcf::experiment::{
    run_batch, run_experiment, run_oracle, ExperimentConfig, GeneratorSpec, InstanceSource,
};
use congest_mcf::tuning::DESK_RELAX;

#[derive(Parser, Debug)]
#[command(name = "congest-mcf", version, about = "Round-accounted distributed min-cost flow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one instance file (DIMACS `p min` or edge list) and print a report.
    Solve {
        file: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Generate and solve a batch of random instances, one report per line.
    Bench {
        #[arg(long, default_value_t = 6)]
        nodes: usize,
        #[arg(long, default_value_t = 9)]
        arcs: usize,
        #[arg(long, default_value_t = 4)]
        max_cap: u64,
        #[arg(long, default_value_t = 4)]
        max_cost: u64,
        /// Number of instances; instance `i` uses seed `seed + i`.
        #[arg(long, default_value_t = 10)]
        count: u64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print the reference solver's answer for one instance file.
    Oracle {
        file: PathBuf,
        #[arg(long)]
        no_timing: bool,
    },
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Additive LP accuracy; defaults to the exactness threshold of the instance.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Bits per transmitted scalar; sized per LP when absent.
    #[arg(long)]
    precision_bits: Option<u32>,
    /// `sqrt-n-plus-D` or `D-only`.
    #[arg(long, default_value = "sqrt-n-plus-D")]
    tlap_model: TlapModel,
    #[arg(long, default_value_t = 1.0)]
    c_lap: f64,
    /// Bandwidth factor: messages carry `⌈beta·log₂ n⌉` bits.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Divisor applied to the solver's large constants; 1 keeps them verbatim.
    #[arg(long, default_value_t = DESK_RELAX)]
    relax_constants: f64,
    #[arg(long, default_value_t = 10)]
    retries: usize,
    /// Leave wall time out of the report so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

impl RunArgs {
    fn config(&self, source: InstanceSource) -> Result<ExperimentConfig> {
        let cfg = ExperimentConfig {
            seed: self.seed,
            epsilon: self.epsilon,
            precision_bits: self.precision_bits,
            tlap_model: self.tlap_model,
            c_lap: self.c_lap,
            beta: self.beta,
            relax_constants: self.relax_constants,
            retries: self.retries,
            source,
            timing: !self.no_timing,
        };
        cfg.validate().context("invalid configuration")?;
        Ok(cfg)
    }
}

fn emit(line: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}")?;
    out.flush()?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Solve { file, run } => {
            let cfg = run.config(InstanceSource::File { path: file })?;
            emit(&serde_json::to_string(&run_experiment(&cfg))?)
        }
        Command::Oracle { file, no_timing } => {
            let mut cfg = ExperimentConfig::new(InstanceSource::File { path: file });
            cfg.timing = !no_timing;
            emit(&serde_json::to_string(&run_oracle(&cfg))?)
        }
        Command::Bench { nodes, arcs, max_cap, max_cost, count, threads, run } => {
            if threads == 0 {
                bail!("--threads must be positive");
            }
            let configs = (0..count)
                .map(|i| {
                    let seed = run.seed.wrapping_add(i);
                    let spec = GeneratorSpec { nodes, arcs, max_cap, max_cost, seed };
                    RunArgs { seed, ..run.clone() }.config(InstanceSource::Generated(spec))
                })
                .collect::<Result<Vec<_>>>()?;
            for report in run_batch(&configs, threads) {
                emit(&serde_json::to_string(&report)?)?;
            }
            Ok(())
        }
    }
}
