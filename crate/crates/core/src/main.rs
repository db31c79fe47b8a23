use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use passloc::estimators::{EstimatorKind, EstimatorOptions};
use passloc::harness::run::{
    compute_spectra, mse_chart, mse_csv, mse_rows, spectrum_artifacts, sweep_rows, synth_artifacts, write_artifacts,
    Artifact,
};
use passloc::harness::{load_scenario, LoadedScenario, DEFAULT_TRIALS, PAPER_SCALE_TRIALS, WORKERS_ENV};

/// Passive multi-target localization simulator.
#[derive(Debug, Parser)]
#[command(name = "passloc", version)]
struct Cli {
    /// Worker threads for Monte-Carlo trials and grid loops.
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize one batch of snapshots and its sample covariance.
    Synth(Common),
    /// Compute power spectra for one synthesized batch.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        est: EstimatorArgs,
        /// Skip the SVG figures.
        #[arg(long)]
        no_plot: bool,
    },
    /// Monte-Carlo MSE of the scenario as written.
    Mse {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        est: EstimatorArgs,
        #[command(flatten)]
        trials: TrialArgs,
    },
    /// Monte-Carlo MSE over the scenario's [sweep] table.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        est: EstimatorArgs,
        #[command(flatten)]
        trials: TrialArgs,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Trial index whose random stream is used (synth and spectrum).
    #[arg(long, default_value_t = 0)]
    trial: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EstimatorChoice {
    Mvdr,
    Bs,
    Isr,
    All,
}

#[derive(Debug, Args)]
struct EstimatorArgs {
    #[arg(long, value_enum, default_value_t = EstimatorChoice::All)]
    estimator: EstimatorChoice,
    /// ISR iteration cap.
    #[arg(long)]
    isr_max_iter: Option<usize>,
    /// ISR relative spectrum-change tolerance.
    #[arg(long)]
    isr_tol: Option<f64>,
}

#[derive(Debug, Args)]
struct TrialArgs {
    /// Monte-Carlo trials (default: scenario file, then 200).
    #[arg(long, conflicts_with = "paper_scale")]
    trials: Option<usize>,
    /// Use 10 000 trials.
    #[arg(long)]
    paper_scale: bool,
}

impl EstimatorArgs {
    fn kinds(&self) -> Option<Vec<EstimatorKind>> {
        match self.estimator {
            EstimatorChoice::Mvdr => Some(vec![EstimatorKind::Mvdr]),
            EstimatorChoice::Bs => Some(vec![EstimatorKind::Bs]),
            EstimatorChoice::Isr => Some(vec![EstimatorKind::Isr]),
            EstimatorChoice::All => None,
        }
    }

    fn options(&self) -> Result<EstimatorOptions<f64>> {
        let mut options = EstimatorOptions::default();
        if let Some(n) = self.isr_max_iter {
            if n == 0 {
                bail!("--isr-max-iter must be at least 1");
            }
            options.isr.termination.max_iterations = n;
        }
        if let Some(t) = self.isr_tol {
            if !(t >= 0.0) {
                bail!("--isr-tol must be nonnegative");
            }
            options.isr.termination.tolerance = t;
        }
        Ok(options)
    }
}

impl TrialArgs {
    fn resolve(&self, file_default: Option<usize>) -> Result<usize> {
        let n = if self.paper_scale {
            PAPER_SCALE_TRIALS
        } else {
            self.trials.or(file_default).unwrap_or(DEFAULT_TRIALS)
        };
        if n == 0 {
            bail!("--trials must be at least 1");
        }
        Ok(n)
    }
}

fn load(common: &Common) -> Result<LoadedScenario> {
    let mut loaded = load_scenario(&common.scenario)?;
    if let Some(seed) = common.seed {
        loaded.scenario.seed = seed;
        loaded.file.seed = seed;
    }
    Ok(loaded)
}

fn finish(out: &std::path::Path, artifacts: &[Artifact]) -> Result<()> {
    for path in write_artifacts(out, artifacts)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            bail!("worker count must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.command {
        Command::Synth(common) => {
            let loaded = load(&common)?;
            let artifacts = synth_artifacts(&loaded.scenario, common.trial)?;
            finish(&common.out, &artifacts)
        }
        Command::Spectrum { common, est, no_plot } => {
            let loaded = load(&common)?;
            let kinds = est.kinds().unwrap_or_else(|| EstimatorKind::ALL.to_vec());
            let spectra = compute_spectra(&loaded.scenario, &kinds, &est.options()?, common.trial)?;
            for p in &spectra {
                if p.estimator == EstimatorKind::Isr {
                    log::info!("ISR ran {} iterations", p.iterations_run);
                }
            }
            let artifacts = spectrum_artifacts(&loaded.scenario, &spectra, !no_plot)?;
            finish(&common.out, &artifacts)
        }
        Command::Mse { common, est, trials } => {
            let loaded = load(&common)?;
            let kinds = est.kinds().unwrap_or_else(|| EstimatorKind::ALL.to_vec());
            let n = trials.resolve(loaded.file.trials)?;
            let rows = mse_rows(&loaded.scenario, &kinds, n, &est.options()?)?;
            finish(
                &common.out,
                &[Artifact {
                    name: "mse.csv".into(),
                    bytes: mse_csv(&rows)?,
                }],
            )
        }
        Command::Sweep { common, est, trials } => {
            let loaded = load(&common)?;
            let Some(sweep) = loaded.file.sweep.clone() else {
                bail!("{}: no [sweep] table", common.scenario.display());
            };
            let kinds = est
                .kinds()
                .or_else(|| sweep.estimator_kinds())
                .unwrap_or_else(|| EstimatorKind::ALL.to_vec());
            let n = trials.resolve(sweep.trials.or(loaded.file.trials))?;
            let rows = sweep_rows(&loaded.scenario, &sweep, &kinds, n, &est.options()?)?;
            finish(
                &common.out,
                &[
                    Artifact {
                        name: "sweep.csv".into(),
                        bytes: mse_csv(&rows)?,
                    },
                    Artifact {
                        name: "sweep.svg".into(),
                        bytes: mse_chart(&rows).render().into_bytes(),
                    },
                ],
            )
        }
    }
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
