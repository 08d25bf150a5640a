//! Command-line front end: single solves, oracle comparisons and sweeps.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use noma_power::bench::{emit_csv, emit_plot_data, emit_timing, run_experiment, ExperimentFile, ExperimentSpec};
use noma_power::channel::{generate_channels, ChannelOptions, ChannelSet, DropGeometry};
use noma_power::config::{ConfigFile, SystemConfig};
use noma_power::oracle::{oma_baseline, oracle_optimum};
use noma_power::solver::{jpcuc, SolveReport, SolverOptions};
use noma_power::{Error, Result};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    /// 4 users, 4 subcarriers.
    Desk,
    /// 10 users, 10 subcarriers.
    Paper,
}

#[derive(Debug, Parser)]
#[command(name = "noma-bench", version, about = "Joint power and user clustering for NOMA downlinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// TOML configuration; overrides the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for geometry and fading; for `bench`, the seed of drop 0.
    /// Defaults to 1, or to the experiment file's `base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory. Defaults to `out`, or to the experiment file's
    /// `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    preset: Preset,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the reweighting solver on one random drop.
    Solve(Common),
    /// Run a Monte-Carlo sweep and write CSV plus plot data.
    Bench(Common),
    /// Compare the reweighting solver with the exhaustive optimum and OMA on one drop.
    Oracle(Common),
}

fn load_single(common: &Common) -> Result<(SystemConfig, ChannelOptions, SolverOptions)> {
    match &common.config {
        Some(path) => match ConfigFile::load(path) {
            Ok(file) => Ok((file.system.to_config()?, file.channel, file.solver)),
            // an experiment file also carries the tables a single run needs
            Err(first) => match ExperimentFile::load(path) {
                Ok(file) => Ok((file.system.to_config()?, file.channel, file.solver)),
                Err(_) => Err(first),
            },
        },
        None => {
            let cfg = match common.preset {
                Preset::Desk => SystemConfig::desk(),
                Preset::Paper => SystemConfig::full_scale(),
            };
            Ok((cfg, ChannelOptions::default(), SolverOptions::default()))
        }
    }
}

impl Common {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    fn out(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn draw(cfg: &SystemConfig, chan: &ChannelOptions, seed: u64) -> Result<ChannelSet> {
    let geometry = DropGeometry::uniform(cfg.num_users, chan.area_side_m, seed);
    generate_channels(cfg, &geometry, chan, seed)
}

fn write_json(dir: &Path, name: &str, value: &impl serde::Serialize) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(e.to_string()))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn summary(label: &str, r: &SolveReport) {
    println!(
        "{label:<7} total {:.6e} W  (tx {:.6e}, dec {:.6e})  iters {}  converged {}  cap ok {}",
        r.objective.total,
        r.objective.transmission_power,
        r.objective.decoding_power,
        r.outer_iters,
        r.converged,
        r.cap_satisfied
    );
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(common) => {
            let (cfg, chan, opts) = load_single(&common)?;
            let ch = draw(&cfg, &chan, common.seed())?;
            let report = jpcuc(&cfg, &ch, &opts)?;
            summary("jpcuc", &report);
            for (n, users) in report.support_per_subcarrier.iter().enumerate() {
                println!("  subcarrier {n}: users {users:?}");
            }
            write_json(&common.out(), "solve.json", &report)
        }
        Command::Oracle(common) => {
            let (cfg, chan, opts) = load_single(&common)?;
            let ch = draw(&cfg, &chan, common.seed())?;
            let mm = jpcuc(&cfg, &ch, &opts)?;
            let exact = oracle_optimum(&cfg, &ch, &opts)?;
            let oma = oma_baseline(&cfg, &ch, &opts)?;
            summary("jpcuc", &mm);
            summary("oracle", &exact);
            summary("oma", &oma);
            println!(
                "gap to optimum: {:.3e} (relative)",
                (mm.objective.total - exact.objective.total) / exact.objective.total
            );
            write_json(&common.out(), "oracle.json", &[("jpcuc", &mm), ("oracle", &exact), ("oma", &oma)])
        }
        Command::Bench(common) => {
            let (mut spec, out) = match &common.config {
                Some(path) => {
                    let file = ExperimentFile::load(path)?;
                    let out = common.out.clone().or(file.experiment.output.clone());
                    (file.to_spec()?, out.unwrap_or_else(|| common.out()))
                }
                None => {
                    let spec = match common.preset {
                        Preset::Desk => ExperimentSpec::desk(),
                        Preset::Paper => ExperimentSpec::full_scale(),
                    };
                    (spec, common.out())
                }
            };
            if let Some(seed) = common.seed {
                spec.base_seed = seed;
            }
            let table = run_experiment(&spec)?;
            fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            emit_csv(&table, &out.join("results.csv"))?;
            emit_timing(&table, &out.join("timing.csv"))?;
            let files = emit_plot_data(&table, spec.sweep_axis, &out)?;
            println!("{} rows -> {}", table.len(), out.join("results.csv").display());
            for f in files {
                println!("plot data -> {}", f.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
