//! Data-generating processes and dataset ingestion.
//!
//! All randomness flows through `ChaCha8Rng` streams. A trial `t` of a run
//! with seed `s` uses the stream seeded with `splitmix64(s ^ t)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::moments::{
    empirical_fourth_moments, gaussian_fourth_moments, generalized_fourth_moments_weighted,
    spiked_fourth_moments, FourthMomentTensors, Latent, SpikeSpec,
};
use crate::risk::{self, SpectralModel};
use crate::{rng, tolerances};

/// A source of i.i.d. random vectors.
pub trait VectorSampler: Sync {
    fn dim(&self) -> usize;
    fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut DVector<f64>);

    /// `n` draws as the rows of a matrix, in stream order.
    fn sample_rows(&self, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let d = self.dim();
        let mut out = DMatrix::zeros(n, d);
        let mut x = DVector::zeros(d);
        for r in 0..n {
            self.sample_into(rng, &mut x);
            out.row_mut(r).copy_from(&x.transpose());
        }
        out
    }
}

/// `X = E diag(√λ) Z` with standard normal `Z`; the spectral square root
/// also covers rank-deficient covariances.
#[derive(Clone, Debug)]
pub struct GaussianSampler {
    factor: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn from_covariance(sigma: &DMatrix<f64>) -> Result<Self> {
        let sigma = linalg::checked_symmetric(sigma)?;
        let (vals, vecs) = linalg::sym_eig_desc(&sigma);
        let min = vals[vals.len() - 1];
        if min < -tolerances::PSD * vals[0].abs().max(1.0) {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
            });
        }
        Ok(Self::from_parts(vals.as_slice(), &vecs))
    }

    pub fn from_model(model: &SpectralModel) -> Result<Self> {
        let vals = model.eigenvalues();
        let min = vals[vals.len() - 1];
        if min < -tolerances::PSD * vals[0].abs().max(1.0) {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
            });
        }
        Ok(Self::from_parts(vals.as_slice(), model.eigenvectors()))
    }

    fn from_parts(vals: &[f64], vecs: &DMatrix<f64>) -> Self {
        let roots = DVector::from_iterator(vals.len(), vals.iter().map(|l| l.max(0.0).sqrt()));
        Self {
            factor: vecs * DMatrix::from_diagonal(&roots),
        }
    }
}

impl VectorSampler for GaussianSampler {
    fn dim(&self) -> usize {
        self.factor.nrows()
    }

    fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut DVector<f64>) {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        out.gemv(1.0, &self.factor, &z, 0.0);
    }
}

/// Spiked model sampler in the coordinate basis.
#[derive(Clone, Debug)]
pub struct SpikedSampler {
    spec: SpikeSpec,
    roots: Vec<f64>,
}

impl SpikedSampler {
    pub fn new(spec: &SpikeSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            roots: spec.eta.iter().map(|e| e.sqrt()).collect(),
            spec: spec.clone(),
        })
    }
}

impl VectorSampler for SpikedSampler {
    fn dim(&self) -> usize {
        self.spec.d
    }

    fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut DVector<f64>) {
        for (j, root) in self.roots.iter().enumerate() {
            let xi = match self.spec.latent {
                Latent::Gaussian => rng.sample::<f64, _>(StandardNormal),
                Latent::Rademacher => {
                    if rng.random::<bool>() {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            out[j] = root * xi;
        }
        for j in self.roots.len()..self.spec.d {
            out[j] = 0.0;
        }
        for j in 0..self.spec.d {
            let eps: f64 = rng.sample(StandardNormal);
            out[j] += self.spec.sigma * eps;
        }
    }
}

/// Uniform resampling of the rows of a fixed data set.
#[derive(Clone, Debug)]
pub struct BootstrapSampler {
    data: DMatrix<f64>,
}

impl BootstrapSampler {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::EmptyData);
        }
        Ok(Self { data })
    }
}

impl VectorSampler for BootstrapSampler {
    fn dim(&self) -> usize {
        self.data.ncols()
    }

    fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut DVector<f64>) {
        let r = rng.random_range(0..self.data.nrows());
        out.copy_from(&self.data.row(r).transpose());
    }
}

/// `n` rows from `N(0, Σ)`.
pub fn sample_gaussian(sigma: &DMatrix<f64>, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let sampler = GaussianSampler::from_covariance(sigma)?;
    Ok(sampler.sample_rows(n, &mut rng::stream(seed)))
}

/// `n` rows from a spiked model.
pub fn sample_spiked(spec: &SpikeSpec, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let sampler = SpikedSampler::new(spec)?;
    Ok(sampler.sample_rows(n, &mut rng::stream(seed)))
}

/// Weighted undirected graph. Edges `{j, k}` with `j < k` are drawn with
/// probability `w_jk / Σ_{j<k} w_jk`, and each draw yields
/// `A = e_j e_k^T + e_k e_j^T`, so `E[A] = W / Σ_{j<k} w_jk`.
#[derive(Clone, Debug)]
pub struct EdgeGraph {
    weights: DMatrix<f64>,
    edges: Vec<(usize, usize)>,
    edge_weights: Vec<f64>,
    total: f64,
    index: WeightedIndex<f64>,
}

impl EdgeGraph {
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        if !weights.is_square() {
            return Err(Error::InvalidGraph("weight matrix must be square".into()));
        }
        let d = weights.nrows();
        let mut edges = Vec::new();
        let mut edge_weights = Vec::new();
        for a in 0..d {
            if weights[(a, a)] != 0.0 {
                return Err(Error::InvalidGraph(format!("self-loop weight at node {a}")));
            }
            for b in 0..d {
                let w = weights[(a, b)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidGraph(format!(
                        "weight ({a}, {b}) = {w} is not a non-negative number"
                    )));
                }
                if w != weights[(b, a)] {
                    return Err(Error::InvalidGraph(format!(
                        "weights ({a}, {b}) and ({b}, {a}) differ"
                    )));
                }
                if a < b && w > 0.0 {
                    edges.push((a, b));
                    edge_weights.push(w);
                }
            }
        }
        let total: f64 = edge_weights.iter().sum();
        if edges.is_empty() || total <= 0.0 {
            return Err(Error::InvalidGraph(
                "graph has no positive-weight edge".into(),
            ));
        }
        let index =
            WeightedIndex::new(&edge_weights).map_err(|e| Error::InvalidGraph(e.to_string()))?;
        Ok(Self {
            weights,
            edges,
            edge_weights,
            total,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Edge probabilities in the order of [`EdgeGraph::edges`].
    pub fn probabilities(&self) -> Vec<f64> {
        self.edge_weights.iter().map(|w| w / self.total).collect()
    }

    /// `E[A] = W / Σ_{j<k} w_jk`.
    pub fn mean_matrix(&self) -> DMatrix<f64> {
        &self.weights / self.total
    }

    pub fn edge_matrix(&self, edge: (usize, usize)) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.dim(), self.dim());
        a[(edge.0, edge.1)] = 1.0;
        a[(edge.1, edge.0)] = 1.0;
        a
    }

    pub fn sample_edge(&self, rng: &mut ChaCha8Rng) -> (usize, usize) {
        self.edges[self.index.sample(rng)]
    }

    /// `M_n = n^{-1} Σ A_i` without materializing the samples.
    pub fn sample_mean(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
        if n == 0 {
            return Err(Error::EmptyData);
        }
        let mut counts = vec![0usize; self.edges.len()];
        for _ in 0..n {
            counts[self.index.sample(rng)] += 1;
        }
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (&(a, b), &c) in self.edges.iter().zip(&counts) {
            let v = c as f64 / n as f64;
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
        Ok(m)
    }

    /// Exact Λ by enumerating the edge distribution.
    pub fn exact_tensors(&self, model: &SpectralModel) -> Result<FourthMomentTensors> {
        let samples: Vec<DMatrix<f64>> = self.edges.iter().map(|&e| self.edge_matrix(e)).collect();
        generalized_fourth_moments_weighted(
            &samples,
            Some(&self.edge_weights),
            model,
            tolerances::EIGENBASIS,
        )
    }
}

/// `n` i.i.d. edge matrices.
pub fn sample_edge_matrices(
    weights: &DMatrix<f64>,
    n: usize,
    seed: u64,
) -> Result<Vec<DMatrix<f64>>> {
    let graph = EdgeGraph::new(weights.clone())?;
    let mut g = rng::stream(seed);
    Ok((0..n)
        .map(|_| graph.edge_matrix(graph.sample_edge(&mut g)))
        .collect())
}

/// A data-generating process together with its population spectrum.
#[derive(Clone, Debug)]
pub enum DistributionModel {
    Gaussian {
        covariance: DMatrix<f64>,
        sampler: GaussianSampler,
    },
    Spiked {
        spec: SpikeSpec,
        sampler: SpikedSampler,
    },
    Dataset {
        sampler: BootstrapSampler,
    },
    EdgeGraph {
        graph: EdgeGraph,
    },
}

impl DistributionModel {
    pub fn gaussian(covariance: DMatrix<f64>) -> Result<Self> {
        let sampler = GaussianSampler::from_covariance(&covariance)?;
        Ok(Self::Gaussian {
            covariance,
            sampler,
        })
    }

    pub fn gaussian_diagonal(eigenvalues: &[f64]) -> Result<Self> {
        Self::gaussian(DMatrix::from_diagonal(&DVector::from_column_slice(
            eigenvalues,
        )))
    }

    pub fn spiked(spec: SpikeSpec) -> Result<Self> {
        let sampler = SpikedSampler::new(&spec)?;
        Ok(Self::Spiked { spec, sampler })
    }

    pub fn dataset(data: DMatrix<f64>) -> Result<Self> {
        Ok(Self::Dataset {
            sampler: BootstrapSampler::new(data)?,
        })
    }

    pub fn edge_graph(weights: DMatrix<f64>) -> Result<Self> {
        Ok(Self::EdgeGraph {
            graph: EdgeGraph::new(weights)?,
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Gaussian { .. } => "gaussian",
            Self::Spiked { .. } => "spiked",
            Self::Dataset { .. } => "dataset",
            Self::EdgeGraph { .. } => "edge_graph",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian { covariance, .. } => covariance.nrows(),
            Self::Spiked { spec, .. } => spec.d,
            Self::Dataset { sampler } => sampler.dim(),
            Self::EdgeGraph { graph } => graph.dim(),
        }
    }

    /// The population matrix: `E[XX^T]` for vector models, `E[A]` for the
    /// edge model.
    pub fn population_matrix(&self) -> Result<DMatrix<f64>> {
        Ok(match self {
            Self::Gaussian { covariance, .. } => covariance.clone(),
            Self::Spiked { spec, .. } => spec.model()?.covariance(),
            Self::Dataset { sampler } => risk::empirical_second_moment(&sampler.data)?,
            Self::EdgeGraph { graph } => graph.mean_matrix(),
        })
    }

    /// Population spectral model with target dimension `k`.
    pub fn spectral_model(&self, k: usize) -> Result<SpectralModel> {
        match self {
            Self::Spiked { spec, .. } => {
                if k != spec.k() {
                    return Err(Error::InvalidSpike(format!(
                        "the model has {} spikes but k = {k} was requested",
                        spec.k()
                    )));
                }
                spec.model()
            }
            Self::EdgeGraph { graph } => SpectralModel::from_symmetric(&graph.mean_matrix(), k),
            _ => SpectralModel::from_covariance(&self.population_matrix()?, k),
        }
    }

    /// Exact fourth-moment tensors of the population: Wick formulas,
    /// spiked formulas, the full data set, or edge enumeration.
    pub fn exact_tensors(&self, model: &SpectralModel) -> Result<FourthMomentTensors> {
        match self {
            Self::Gaussian { .. } => gaussian_fourth_moments(model),
            Self::Spiked { spec, .. } => Ok(spiked_fourth_moments(spec)?.0),
            Self::Dataset { sampler } => empirical_fourth_moments(&sampler.data, model),
            Self::EdgeGraph { graph } => graph.exact_tensors(model),
        }
    }

    /// Vector sampler, absent for the edge model.
    pub fn vector_sampler(&self) -> Option<&dyn VectorSampler> {
        match self {
            Self::Gaussian { sampler, .. } => Some(sampler),
            Self::Spiked { sampler, .. } => Some(sampler),
            Self::Dataset { sampler } => Some(sampler),
            Self::EdgeGraph { .. } => None,
        }
    }

    /// Empirical matrix from `n` draws: `n^{-1} Σ x_i x_i^T` or `M_n`.
    pub fn empirical_matrix(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
        if n == 0 {
            return Err(Error::EmptyData);
        }
        match self {
            Self::EdgeGraph { graph } => graph.sample_mean(n, rng),
            _ => {
                let sampler = self.vector_sampler().expect("vector model");
                risk::empirical_second_moment(&sampler.sample_rows(n, rng))
            }
        }
    }
}

/// Serializable description of a [`DistributionModel`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelSpec {
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eigenvalues: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        covariance: Option<Vec<Vec<f64>>>,
    },
    Spiked {
        eta: Vec<f64>,
        sigma: f64,
        d: usize,
        #[serde(default = "default_latent")]
        latent: Latent,
    },
    Dataset {
        path: String,
        #[serde(default)]
        format: DataFormat,
        #[serde(default)]
        header: bool,
    },
    EdgeGraph {
        weights: Vec<Vec<f64>>,
    },
}

fn default_latent() -> Latent {
    Latent::Gaussian
}

impl ModelSpec {
    pub fn build(&self) -> Result<DistributionModel> {
        match self {
            Self::Gaussian {
                eigenvalues,
                covariance,
            } => match (eigenvalues, covariance) {
                (Some(e), None) => DistributionModel::gaussian_diagonal(e),
                (None, Some(c)) => DistributionModel::gaussian(linalg::from_rows(c)?),
                _ => Err(Error::InvalidConfig(
                    "a gaussian model needs exactly one of `eigenvalues` or `covariance`".into(),
                )),
            },
            Self::Spiked {
                eta,
                sigma,
                d,
                latent,
            } => DistributionModel::spiked(SpikeSpec::new(eta.clone(), *sigma, *d, *latent)?),
            Self::Dataset {
                path,
                format,
                header,
            } => DistributionModel::dataset(load_dataset(Path::new(path), *format, *header)?),
            Self::EdgeGraph { weights } => {
                DistributionModel::edge_graph(linalg::from_rows(weights)?)
            }
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    #[default]
    Csv,
    Json,
}

impl DataFormat {
    /// Guess from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Self::Json,
            _ => Self::Csv,
        }
    }
}

fn validate_rows(rows: Vec<Vec<f64>>) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(Error::EmptyData);
    }
    let width = rows[0].len();
    if width == 0 {
        return Err(Error::Parse("rows are empty".into()));
    }
    if let Some(r) = rows.iter().position(|r| r.len() != width) {
        return Err(Error::Parse(format!(
            "row {r} has {} fields, expected {width}",
            rows[r].len()
        )));
    }
    let m = linalg::from_rows(&rows)?;
    if let Some((row, col)) = linalg::first_non_finite(&m) {
        return Err(Error::NonFiniteValue { row, col });
    }
    Ok(m)
}

/// Parse comma-separated samples, one per row. With `header` the first
/// line is skipped.
pub fn parse_csv<R: Read>(reader: R, header: bool) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("row {r}, column {c}: `{field}` is not a number"))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    validate_rows(rows)
}

/// Parse a JSON array of arrays.
pub fn parse_json<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = serde_json::from_reader(reader)?;
    validate_rows(rows)
}

pub fn load_dataset(path: &Path, format: DataFormat, header: bool) -> Result<DMatrix<f64>> {
    let file = BufReader::new(File::open(path)?);
    match format {
        DataFormat::Csv => parse_csv(file, header),
        DataFormat::Json => parse_json(file),
    }
}

/// Write rows in the given format. Values are written with full
/// round-trip precision.
pub fn write_dataset(path: &Path, data: &DMatrix<f64>, format: DataFormat) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        DataFormat::Csv => {
            for r in 0..data.nrows() {
                let line: Vec<String> = data.row(r).iter().map(|x| format!("{x:?}")).collect();
                writeln!(out, "{}", line.join(","))?;
            }
        }
        DataFormat::Json => {
            serde_json::to_writer(&mut out, &linalg::to_rows(data))?;
        }
    }
    out.flush()?;
    Ok(())
}
