mod args;
mod commands;
mod config;
mod error;
mod report;

use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use grassrisk::models::DistributionModel;

use args::{Cli, Command};
use config::{check_deltas, check_positive, RunConfig};
use error::{CliError, Result};
use report::{emit, Output};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn init_pool(jobs: Option<usize>) -> Result<()> {
    if let Some(j) = jobs {
        check_positive("jobs", j)?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn finish<T: Output>(cli: &Cli, config: &RunConfig, mut result: T, start: Instant) -> Result<bool> {
    emit(
        config,
        &mut result,
        start.elapsed().as_secs_f64(),
        !cli.global.no_timestamp,
        cli.global.out.as_deref(),
    )?;
    Ok(result.passed())
}

fn simulation(
    model: &DistributionModel,
    k: usize,
    sim: &args::OptionalSimulation,
    deltas: &[f64],
    seed: u64,
) -> Result<Option<commands::Simulation>> {
    match (sim.n, sim.trials) {
        (Some(n), Some(trials)) => {
            check_positive("n", n)?;
            check_positive("trials", trials)?;
            Ok(Some(commands::simulate(model, k, n, trials, deltas, seed)?))
        }
        _ => Ok(None),
    }
}

fn run(cli: Cli) -> Result<bool> {
    init_pool(cli.global.jobs)?;
    let start = Instant::now();
    let seed = cli.global.seed;
    match &cli.command {
        Command::Analyze { model, run, n } => {
            let mut config = RunConfig::new("analyze", &cli.global)?;
            check_deltas(&run.deltas)?;
            let resolved = config::resolve_model(model)?;
            let (dist, k) = resolved.build(run.k)?;
            config.model = Some(resolved.spec);
            config.k = Some(k);
            config.n = *n;
            config.deltas = run.deltas.clone();
            config.restarts = Some(run.restarts);
            config.replicates = Some(run.replicates);
            config.s_samples = Some(run.s_samples);
            let result = commands::analyze(&dist, k, run, *n, seed)?;
            finish(&cli, &config, result, start)
        }
        Command::Simulate {
            model,
            k,
            n,
            trials,
            deltas,
        } => {
            let mut config = RunConfig::new("simulate", &cli.global)?;
            check_positive("n", *n)?;
            check_positive("trials", *trials)?;
            check_deltas(deltas)?;
            let resolved = config::resolve_model(model)?;
            let (dist, k) = resolved.build(*k)?;
            config.model = Some(resolved.spec);
            config.k = Some(k);
            config.n = Some(*n);
            config.trials = Some(*trials);
            config.deltas = deltas.clone();
            let result = commands::simulate(&dist, k, *n, *trials, deltas, seed)?;
            finish(&cli, &config, result, start)
        }
        Command::Verify { trials, suites } => {
            let mut config = RunConfig::new("verify", &cli.global)?;
            check_positive("trials", *trials)?;
            let suites = commands::selected_suites(suites);
            config.trials = Some(*trials);
            config.suites = suites.iter().map(|s| s.name()).collect();
            let result = commands::verify(&suites, *trials, seed, &config.tolerance_overrides);
            finish(&cli, &config, result, start)
        }
        Command::Spiked {
            eta,
            sigma,
            d,
            latent,
            run,
            sim,
        } => {
            let spec = config::spiked_spec(eta, *sigma, *d, *latent);
            model_command("spiked", &cli, spec, run, sim, start)
        }
        Command::Graph { weights, run, sim } => {
            let spec = config::graph_spec(weights)?;
            model_command("graph", &cli, spec, run, sim, start)
        }
    }
}

fn model_command(
    name: &'static str,
    cli: &Cli,
    spec: grassrisk::models::ModelSpec,
    run: &args::AnalysisArgs,
    sim: &args::OptionalSimulation,
    start: Instant,
) -> Result<bool> {
    let mut config = RunConfig::new(name, &cli.global)?;
    check_deltas(&run.deltas)?;
    let resolved = config::ResolvedModel {
        spec,
        default_k: None,
    };
    let (dist, k) = resolved.build(run.k)?;
    config.model = Some(resolved.spec);
    config.k = Some(k);
    config.n = sim.n;
    config.trials = sim.trials;
    config.deltas = run.deltas.clone();
    config.restarts = Some(run.restarts);
    config.replicates = Some(run.replicates);
    config.s_samples = Some(run.s_samples);
    let analysis = commands::analyze(&dist, k, run, sim.n, cli.global.seed)?;
    let simulation = simulation(&dist, k, sim, &run.deltas, cli.global.seed)?;
    finish(
        cli,
        &config,
        commands::ModelReport {
            analysis,
            simulation,
        },
        start,
    )
}
