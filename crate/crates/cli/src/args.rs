use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use grassrisk::moments::{DEFAULT_REPLICATES, DEFAULT_RESTARTS};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "grassrisk",
    version,
    about = "Excess-risk laws, sample-size thresholds and property checks for PCA"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, env = "GRASSRISK_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Output file (standard output when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads (default: available parallelism). Results do not
    /// depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Leave wall-clock data out of the report.
    #[arg(long, global = true)]
    pub no_timestamp: bool,
    /// Override a check tolerance, e.g. `--tolerance exp_log_roundtrip=1e-8`.
    #[arg(long = "tolerance", global = true, value_name = "NAME=VALUE", value_parser = parse_override)]
    pub tolerances: Vec<(String, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Limit laws, quantile bands, variance parameters and n* for a model.
    Analyze {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: AnalysisArgs,
        /// Also evaluate the finite-sample bound at this sample size.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Monte Carlo fits compared with the limit laws.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// Subspace dimension (default: the model's own, else 1).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(
            long = "delta",
            value_delimiter = ',',
            default_value = "0.05,0.02,0.01"
        )]
        deltas: Vec<f64>,
    },
    /// Randomized property suites; exits 1 when a gated check fails.
    Verify {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Suites to run (default: all).
        #[arg(long = "suite", value_enum, value_delimiter = ',')]
        suites: Vec<SuiteName>,
    },
    /// Spiked covariance model: exact law, optionally with simulation.
    Spiked {
        /// Spike strengths, largest first.
        #[arg(long, value_delimiter = ',', required = true)]
        eta: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long)]
        d: usize,
        #[arg(long, value_enum, default_value_t = LatentArg::Gaussian)]
        latent: LatentArg,
        #[command(flatten)]
        run: AnalysisArgs,
        #[command(flatten)]
        sim: OptionalSimulation,
    },
    /// Random-edge model on a weighted graph.
    Graph {
        /// Square symmetric weight matrix, CSV (or JSON array of rows).
        #[arg(long)]
        weights: PathBuf,
        #[command(flatten)]
        run: AnalysisArgs,
        #[command(flatten)]
        sim: OptionalSimulation,
    },
}

#[derive(Debug, Args)]
#[command(group(
    ArgGroup::new("model")
        .required(true)
        .args(["eigenvalues", "sigma_csv", "data", "spectral_model", "model_config"])
))]
pub struct ModelArgs {
    /// Gaussian model with this diagonal covariance.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub eigenvalues: Option<Vec<f64>>,
    /// Gaussian model with the covariance matrix in this CSV file.
    #[arg(long)]
    pub sigma_csv: Option<PathBuf>,
    /// Resample rows of this data set (CSV or JSON by extension).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Gaussian model with a serialized spectral model's covariance.
    #[arg(long)]
    pub spectral_model: Option<PathBuf>,
    /// JSON model description (`{"type": "gaussian" | "spiked" | ...}`).
    #[arg(long)]
    pub model_config: Option<PathBuf>,
    /// CSV inputs start with a header line.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args)]
pub struct AnalysisArgs {
    /// Subspace dimension (default: the model's own, else 1).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long = "delta", value_delimiter = ',', default_value = "0.05")]
    pub deltas: Vec<f64>,
    /// Random restarts of the ν ascent.
    #[arg(long, default_value_t = DEFAULT_RESTARTS)]
    pub restarts: usize,
    /// Replicates behind the r(n) estimate.
    #[arg(long, default_value_t = DEFAULT_REPLICATES)]
    pub replicates: usize,
    /// Draws for the Monte Carlo 𝒮 estimate of non-Gaussian models.
    #[arg(long, default_value_t = 200_000)]
    pub s_samples: usize,
}

#[derive(Debug, Args)]
pub struct OptionalSimulation {
    /// Simulate `trials` fits of `n` samples as well.
    #[arg(long, requires = "trials")]
    pub n: Option<usize>,
    #[arg(long, requires = "n")]
    pub trials: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SuiteName {
    Geometry,
    Derivatives,
    Hessian,
    Perturbation,
    Concordance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LatentArg {
    Gaussian,
    Rademacher,
}

fn parse_override(s: &str) -> Result<(String, f64), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|e| format!("bad tolerance value `{value}`: {e}"))?;
    Ok((name.trim().to_string(), value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn overrides_parse() {
        assert_eq!(
            parse_override("davis_kahan=1e-6").unwrap(),
            ("davis_kahan".to_string(), 1e-6)
        );
        assert!(parse_override("davis_kahan").is_err());
        assert!(parse_override("x=abc").is_err());
    }

    #[test]
    fn model_source_is_required() {
        let r = Cli::try_parse_from(["grassrisk", "analyze", "--k", "2"]);
        assert!(r.is_err());
        let r = Cli::try_parse_from(["grassrisk", "analyze", "--eigenvalues", "2,1"]);
        assert!(r.is_ok());
    }
}
