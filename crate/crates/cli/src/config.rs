//! Turning parsed arguments into a validated, serializable run
//! configuration.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use grassrisk::linalg;
use grassrisk::models::{load_dataset, DataFormat, DistributionModel, ModelSpec};
use grassrisk::moments::Latent;
use grassrisk::montecarlo::{validate_overrides, Overrides};
use grassrisk::risk::{SpectralModel, SpectralModelJson};
use serde::Serialize;

use crate::args::{Format, GlobalArgs, LatentArg, ModelArgs};
use crate::error::{CliError, Result};

/// Everything a report needs to be reproduced. Worker count is left out:
/// results do not depend on it.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub deltas: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_samples: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub suites: Vec<&'static str>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    pub format: Format,
    pub tolerance_overrides: Overrides,
}

impl RunConfig {
    pub fn new(command: &'static str, global: &GlobalArgs) -> Result<Self> {
        let mut overrides = BTreeMap::new();
        for (name, value) in &global.tolerances {
            overrides.insert(name.clone(), *value);
        }
        validate_overrides(&overrides)?;
        Ok(Self {
            command,
            model: None,
            k: None,
            n: None,
            trials: None,
            deltas: Vec::new(),
            restarts: None,
            replicates: None,
            s_samples: None,
            suites: Vec::new(),
            seed: global.seed,
            out: global.out.as_ref().map(|p| p.display().to_string()),
            format: global.format,
            tolerance_overrides: overrides,
        })
    }
}

pub fn check_deltas(deltas: &[f64]) -> Result<()> {
    if deltas.is_empty() {
        return Err(CliError::Config("at least one --delta is required".into()));
    }
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
        return Err(grassrisk::Error::DeltaOutOfRange(*d).into());
    }
    Ok(())
}

pub fn check_positive(name: &str, value: usize) -> Result<()> {
    if value == 0 {
        return Err(CliError::Config(format!("--{name} must be at least 1")));
    }
    Ok(())
}

/// A model spec together with the subspace dimension a serialized
/// spectral model carries, if any.
pub struct ResolvedModel {
    pub spec: ModelSpec,
    pub default_k: Option<usize>,
}

impl ResolvedModel {
    pub fn build(&self, k: Option<usize>) -> Result<(DistributionModel, usize)> {
        let model = self.spec.build()?;
        let own_k = match &self.spec {
            ModelSpec::Spiked { eta, .. } => Some(eta.len()),
            _ => self.default_k,
        };
        Ok((model, k.or(own_k).unwrap_or(1)))
    }
}

fn read_matrix(path: &Path, header: bool) -> Result<Vec<Vec<f64>>> {
    let m = load_dataset(path, DataFormat::from_path(path), header)?;
    Ok(linalg::to_rows(&m))
}

pub fn resolve_model(args: &ModelArgs) -> Result<ResolvedModel> {
    let plain = |spec| ResolvedModel {
        spec,
        default_k: None,
    };
    if let Some(e) = &args.eigenvalues {
        return Ok(plain(ModelSpec::Gaussian {
            eigenvalues: Some(e.clone()),
            covariance: None,
        }));
    }
    if let Some(p) = &args.sigma_csv {
        return Ok(plain(ModelSpec::Gaussian {
            eigenvalues: None,
            covariance: Some(read_matrix(p, args.header)?),
        }));
    }
    if let Some(p) = &args.data {
        return Ok(plain(ModelSpec::Dataset {
            path: p.display().to_string(),
            format: DataFormat::from_path(p),
            header: args.header,
        }));
    }
    if let Some(p) = &args.spectral_model {
        let file = File::open(p).map_err(grassrisk::Error::from)?;
        let json: SpectralModelJson =
            serde_json::from_reader(BufReader::new(file)).map_err(grassrisk::Error::from)?;
        let model = SpectralModel::from_json(&json)?;
        return Ok(ResolvedModel {
            spec: ModelSpec::Gaussian {
                eigenvalues: None,
                covariance: Some(linalg::to_rows(&model.covariance())),
            },
            default_k: Some(json.k),
        });
    }
    if let Some(p) = &args.model_config {
        return Ok(plain(ModelSpec::from_json_file(p)?));
    }
    Err(CliError::Config("no model given".into()))
}

pub fn spiked_spec(eta: &[f64], sigma: f64, d: usize, latent: LatentArg) -> ModelSpec {
    ModelSpec::Spiked {
        eta: eta.to_vec(),
        sigma,
        d,
        latent: match latent {
            LatentArg::Gaussian => Latent::Gaussian,
            LatentArg::Rademacher => Latent::Rademacher,
        },
    }
}

pub fn graph_spec(weights: &Path) -> Result<ModelSpec> {
    Ok(ModelSpec::EdgeGraph {
        weights: read_matrix(weights, false)?,
    })
}
