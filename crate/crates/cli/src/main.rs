use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use isac_fusion::pipeline::Method;
use isac_fusion_cli::{
    check_ordering, cmd_compare, cmd_evaluate, cmd_simulate, cmd_train, output_dir, OUT_ROOT_ENV,
};

#[derive(Parser)]
#[command(
    name = "isac-fusion",
    version,
    about = "Radar/IMU positioning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one run and write its measurement CSVs.
    Simulate {
        /// Scenario TOML; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Trajectory TOML; the benchmark route when omitted.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Overrides the scenario's rng_seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, help = out_help())]
        out: Option<PathBuf>,
    },
    /// Train the fusion networks on measurement directories.
    Train {
        /// Measurement directory; repeat to train on several runs.
        #[arg(long = "data", required = true)]
        data: Vec<PathBuf>,
        /// Training settings TOML.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the training rng_seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, help = out_help())]
        out: Option<PathBuf>,
    },
    /// Estimate positions with one method and score them against truth.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        method: Method,
        /// Trained model JSON, needed by the network methods.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, help = out_help())]
        out: Option<PathBuf>,
    },
    /// Run a multi-seed comparison from an experiment manifest.
    Compare {
        /// Experiment manifest TOML.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the manifest's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit nonzero unless dnn-fusion beats dnn-isac on average.
        #[arg(long)]
        assert_ordering: bool,
    },
}

fn out_help() -> String {
    format!("Output directory [default: ${OUT_ROOT_ENV}/<command> or runs/<command>]")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            trajectory,
            seed,
            out,
        } => {
            let out = output_dir(out.as_deref(), "simulate");
            let report = cmd_simulate(config.as_deref(), trajectory.as_deref(), seed, &out)?;
            println!(
                "{}: {} radar measurements, {} IMU samples",
                out.display(),
                report.frames_with_measurement,
                report.imu_samples
            );
        }
        Command::Train {
            data,
            config,
            seed,
            out,
        } => {
            let out = output_dir(out.as_deref(), "train");
            let t = cmd_train(&data, config.as_deref(), seed, &out)?;
            let last = |h: &[isac_fusion::nn::EpochRecord]| {
                h.last().map(|r| r.validation_loss).unwrap_or(f64::NAN)
            };
            println!(
                "{}: validation loss stage1 {:.3e}, stage2 {:.3e}, isac-only {:.3e}",
                out.display(),
                last(&t.stage1_history),
                last(&t.stage2_history),
                last(&t.isac_only_history)
            );
        }
        Command::Evaluate {
            data,
            method,
            model,
            out,
        } => {
            let out = output_dir(out.as_deref(), "evaluate");
            let row = cmd_evaluate(&data, method, model.as_deref(), &out)?;
            println!(
                "{}: mean {:.2} cm, p90 {:.2} cm over {} samples",
                row.method,
                100.0 * row.average_error,
                100.0 * row.p90,
                row.sample_count
            );
        }
        Command::Compare {
            config,
            out,
            assert_ordering,
        } => {
            let outcome = cmd_compare(&config, out.as_deref())?;
            print!("{}", outcome.aggregate.report());
            if assert_ordering {
                check_ordering(&outcome.aggregate)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
