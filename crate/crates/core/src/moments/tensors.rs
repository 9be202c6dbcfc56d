//! Fourth-moment tensors of the data in the population eigenbasis.
//!
//! With `y = E^T x` (E the model eigenvectors, zero-based indices):
//!
//! * `gamma[j][s][r][p]  = E[y_j y_s y_r y_p]`, all indices `< k`;
//! * `lambda[i][j][s][t] = E[y_{k+i} y_j y_{k+s} y_t]`;
//! * `omega[i][t][q][l]  = E[y_{k+i} y_{k+t} y_{k+q} y_{k+l}]`.
//!
//! Each tensor is the Gram matrix of one family of pair products, stored
//! row-major, so `tensor[(a,b),(c,e)]` sits at `(a·B + b)·m + c·E + e`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::SpectralModel;
use crate::tolerances;

/// Largest ambient dimension accepted by the dense tensor routines.
pub const MAX_DIM: usize = 64;

const CHUNK_ROWS: usize = 1024;

/// Dense order-4 tensor, row-major in `(i, j, s, t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor4 {
    dims: [usize; 4],
    entries: Vec<f64>,
    #[serde(default = "row_major")]
    index_order: String,
}

fn row_major() -> String {
    "(i,j,s,t) row-major".to_string()
}

impl Tensor4 {
    pub fn zeros(dims: [usize; 4]) -> Self {
        Self {
            dims,
            entries: vec![0.0; dims.iter().product()],
            index_order: row_major(),
        }
    }

    pub fn from_fn(dims: [usize; 4], mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dims);
        for a in 0..dims[0] {
            for b in 0..dims[1] {
                for c in 0..dims[2] {
                    for e in 0..dims[3] {
                        let at = t.offset(a, b, c, e);
                        t.entries[at] = f(a, b, c, e);
                    }
                }
            }
        }
        t
    }

    /// Reshape a Gram matrix over pairs `(a,b)` and `(c,e)`.
    fn from_pair_gram(dims: [usize; 4], gram: DMatrix<f64>) -> Self {
        debug_assert_eq!(gram.nrows(), dims[0] * dims[1]);
        debug_assert_eq!(gram.ncols(), dims[2] * dims[3]);
        let mut entries = Vec::with_capacity(gram.len());
        for r in 0..gram.nrows() {
            entries.extend(gram.row(r).iter());
        }
        Self {
            dims,
            entries,
            index_order: row_major(),
        }
    }

    /// Validate a deserialized tensor.
    pub fn checked(self) -> Result<Self> {
        let expected: usize = self.dims.iter().product();
        if self.entries.len() != expected {
            return Err(Error::Parse(format!(
                "tensor with dims {:?} needs {expected} entries, got {}",
                self.dims,
                self.entries.len()
            )));
        }
        if self.entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parse("tensor has non-finite entries".into()));
        }
        Ok(self)
    }

    #[inline]
    fn offset(&self, a: usize, b: usize, c: usize, e: usize) -> usize {
        ((a * self.dims[1] + b) * self.dims[2] + c) * self.dims[3] + e
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize, e: usize) -> f64 {
        self.entries[self.offset(a, b, c, e)]
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// The tensor as a `(d0·d1) × (d2·d3)` matrix.
    pub fn flattened(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(
            self.dims[0] * self.dims[1],
            self.dims[2] * self.dims[3],
            &self.entries,
        )
    }

    /// Largest `|a − b|` over entries, scaled by `max(1, |b|_max)`.
    pub fn relative_distance(&self, other: &Tensor4) -> Result<f64> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!(
                "tensor dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        let scale = other.entries.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        let worst = self
            .entries
            .iter()
            .zip(&other.entries)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        Ok(worst / scale)
    }

    /// Largest `|T_abce − T_ceab|`.
    pub fn pair_swap_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for a in 0..self.dims[0] {
            for b in 0..self.dims[1] {
                for c in 0..self.dims[2] {
                    for e in 0..self.dims[3] {
                        if c < self.dims[0]
                            && e < self.dims[1]
                            && a < self.dims[2]
                            && b < self.dims[3]
                        {
                            worst = worst.max((self.get(a, b, c, e) - self.get(c, e, a, b)).abs());
                        }
                    }
                }
            }
        }
        worst
    }
}

/// How a set of tensors was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentSource {
    AnalyticGaussian,
    AnalyticSpiked,
    Empirical,
    Generalized,
}

/// The Γ, Λ, Ω slices. Generalized sources only carry Λ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourthMomentTensors {
    pub d: usize,
    pub k: usize,
    pub gamma: Option<Tensor4>,
    pub lambda: Tensor4,
    pub omega: Option<Tensor4>,
    pub source: MomentSource,
}

impl FourthMomentTensors {
    pub fn gamma(&self) -> Result<&Tensor4> {
        self.gamma
            .as_ref()
            .ok_or_else(|| Error::MissingTensor("gamma (top-block moments)".into()))
    }

    pub fn omega(&self) -> Result<&Tensor4> {
        self.omega
            .as_ref()
            .ok_or_else(|| Error::MissingTensor("omega (bottom-block moments)".into()))
    }

    /// `Λ_ijij`, the second moment of `y_{k+i} y_j`.
    pub fn lambda_diag(&self, i: usize, j: usize) -> f64 {
        self.lambda.get(i, j, i, j)
    }

    /// Check shapes against a model and the invariants every source shares.
    pub fn check_against(&self, model: &SpectralModel) -> Result<()> {
        let (d, k) = (model.dim(), model.k());
        if self.d != d || self.k != k {
            return Err(Error::DimensionMismatch(format!(
                "tensors for (d, k) = ({}, {}) used with a model on ({d}, {k})",
                self.d, self.k
            )));
        }
        let m = d - k;
        let want = [
            (self.gamma.as_ref(), [k, k, k, k], "gamma"),
            (Some(&self.lambda), [m, k, m, k], "lambda"),
            (self.omega.as_ref(), [m, m, m, m], "omega"),
        ];
        for (t, dims, name) in want {
            if let Some(t) = t {
                if t.dims != dims {
                    return Err(Error::DimensionMismatch(format!(
                        "{name} has dims {:?}, expected {dims:?}",
                        t.dims
                    )));
                }
                if t.entries.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Parse(format!("{name} has non-finite entries")));
                }
            }
        }
        Ok(())
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d > MAX_DIM {
        return Err(Error::InvalidConfig(format!(
            "dense fourth-moment tensors are limited to d <= {MAX_DIM}, got {d}"
        )));
    }
    Ok(())
}

/// `E[y_a y_b y_c y_e]` for independent, mean-zero, symmetric coordinates
/// with variances `var` and fourth moments `fourth`.
fn independent_moment(var: &[f64], fourth: &[f64], a: usize, b: usize, c: usize, e: usize) -> f64 {
    if a == b && b == c && c == e {
        return fourth[a];
    }
    if a == b && c == e {
        var[a] * var[c]
    } else if (a == c && b == e) || (a == e && b == c) {
        var[a] * var[b]
    } else {
        0.0
    }
}

fn independent_tensors(
    var: &[f64],
    fourth: &[f64],
    k: usize,
    source: MomentSource,
) -> FourthMomentTensors {
    let d = var.len();
    let m = d - k;
    let mom = |a, b, c, e| independent_moment(var, fourth, a, b, c, e);
    FourthMomentTensors {
        d,
        k,
        gamma: Some(Tensor4::from_fn([k, k, k, k], &mom)),
        lambda: Tensor4::from_fn([m, k, m, k], |i, j, s, t| mom(k + i, j, k + s, t)),
        omega: Some(Tensor4::from_fn([m, m, m, m], |i, t, q, l| {
            mom(k + i, k + t, k + q, k + l)
        })),
        source,
    }
}

/// Wick-formula tensors for `X ~ N(0, Σ)`.
pub fn gaussian_fourth_moments(model: &SpectralModel) -> Result<FourthMomentTensors> {
    check_dim(model.dim())?;
    let var: Vec<f64> = model.eigenvalues().iter().copied().collect();
    if let Some(neg) = var.iter().copied().find(|&l| l < 0.0) {
        return Err(Error::NotPsd {
            min_eigenvalue: neg,
        });
    }
    let fourth: Vec<f64> = var.iter().map(|l| 3.0 * l * l).collect();
    Ok(independent_tensors(
        &var,
        &fourth,
        model.k(),
        MomentSource::AnalyticGaussian,
    ))
}

/// Distribution of the latent spike coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Latent {
    /// `ξ_j ~ N(0, η_j)`.
    Gaussian,
    /// `ξ_j = √η_j · r_j` with Rademacher `r_j`.
    Rademacher,
}

/// `X = Σ_j ξ_j e_j + ε` with independent `ξ_j` of variance `η_j` and
/// `ε ~ N(0, σ² I_d)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeSpec {
    pub eta: Vec<f64>,
    pub sigma: f64,
    pub d: usize,
    pub latent: Latent,
}

impl SpikeSpec {
    pub fn new(eta: Vec<f64>, sigma: f64, d: usize, latent: Latent) -> Result<Self> {
        let spec = Self {
            eta,
            sigma,
            d,
            latent,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn k(&self) -> usize {
        self.eta.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.eta.is_empty() {
            return Err(Error::InvalidSpike("at least one spike is required".into()));
        }
        if self.eta.len() >= self.d {
            return Err(Error::InvalidSpike(format!(
                "{} spikes leave no noise directions in dimension {}",
                self.eta.len(),
                self.d
            )));
        }
        if self.eta.iter().any(|&e| !(e.is_finite() && e > 0.0)) {
            return Err(Error::InvalidSpike(
                "spike strengths must be positive".into(),
            ));
        }
        if self.eta.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidSpike(
                "spike strengths must be non-increasing".into(),
            ));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidSpike(format!(
                "noise level {} is invalid",
                self.sigma
            )));
        }
        Ok(())
    }

    /// Population spectrum `(η_1 + σ², …, η_k + σ², σ², …, σ²)` in the
    /// coordinate basis.
    pub fn model(&self) -> Result<SpectralModel> {
        self.validate()?;
        let s2 = self.sigma * self.sigma;
        let mut eig: Vec<f64> = self.eta.iter().map(|e| e + s2).collect();
        eig.resize(self.d, s2);
        SpectralModel::diagonal(&eig, self.k())
    }

    /// Per-coordinate variances and fourth moments; coordinates are
    /// independent under both latent laws.
    fn coordinate_moments(&self) -> (Vec<f64>, Vec<f64>) {
        let s2 = self.sigma * self.sigma;
        let mut var = Vec::with_capacity(self.d);
        let mut fourth = Vec::with_capacity(self.d);
        for &eta in &self.eta {
            var.push(eta + s2);
            fourth.push(match self.latent {
                Latent::Gaussian => 3.0 * (eta + s2) * (eta + s2),
                Latent::Rademacher => eta * eta + 6.0 * eta * s2 + 3.0 * s2 * s2,
            });
        }
        var.resize(self.d, s2);
        fourth.resize(self.d, 3.0 * s2 * s2);
        (var, fourth)
    }
}

/// Exact tensors and the population model of a spiked covariance model.
pub fn spiked_fourth_moments(spec: &SpikeSpec) -> Result<(FourthMomentTensors, SpectralModel)> {
    spec.validate()?;
    if spec.sigma <= 0.0 {
        return Err(Error::InvalidSpike("noise level must be positive".into()));
    }
    check_dim(spec.d)?;
    let model = spec.model()?;
    let (var, fourth) = spec.coordinate_moments();
    let tensors = independent_tensors(&var, &fourth, spec.k(), MomentSource::AnalyticSpiked);
    Ok((tensors, model))
}

/// Weighted Gram matrix `Σ_r w_r f(r) f(r)^T / Σ w` of per-row features,
/// accumulated in fixed chunks so the result does not depend on the
/// thread count, and mirrored so it is exactly symmetric.
fn feature_gram<F>(rows: usize, width: usize, weights: Option<&[f64]>, features: F) -> DMatrix<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let chunks: Vec<(usize, usize)> = (0..rows)
        .step_by(CHUNK_ROWS)
        .map(|s| (s, (s + CHUNK_ROWS).min(rows)))
        .collect();
    let partials: Vec<DMatrix<f64>> = chunks
        .par_iter()
        .map(|&(start, end)| {
            let mut w = DMatrix::<f64>::zeros(end - start, width);
            let mut buf = vec![0.0; width];
            for r in start..end {
                features(r, &mut buf);
                let scale = weights.map_or(1.0, |w| w[r].sqrt());
                for (c, v) in buf.iter().enumerate() {
                    w[(r - start, c)] = v * scale;
                }
            }
            w.tr_mul(&w)
        })
        .collect();
    let mut total = DMatrix::<f64>::zeros(width, width);
    for p in &partials {
        total += p;
    }
    let norm = weights.map_or(rows as f64, |w| w.iter().sum());
    total /= norm;
    for a in 0..width {
        for b in (a + 1)..width {
            total[(b, a)] = total[(a, b)];
        }
    }
    total
}

/// Sample-average tensors `n^{-1} Σ` of fourth-order products of the
/// rotated rows `y = E^T x`.
pub fn empirical_fourth_moments(
    data: &DMatrix<f64>,
    model: &SpectralModel,
) -> Result<FourthMomentTensors> {
    let n = data.nrows();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    if n < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            available: n,
        });
    }
    let (d, k) = (model.dim(), model.k());
    if data.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "data has {} columns, model dimension is {d}",
            data.ncols()
        )));
    }
    check_dim(d)?;
    if let Some((row, col)) = crate::linalg::first_non_finite(data) {
        return Err(Error::NonFiniteValue { row, col });
    }
    let y = data * model.eigenvectors();
    let m = d - k;
    let gamma = feature_gram(n, k * k, None, |r, out| {
        for j in 0..k {
            for s in 0..k {
                out[j * k + s] = y[(r, j)] * y[(r, s)];
            }
        }
    });
    let lambda = feature_gram(n, m * k, None, |r, out| {
        for i in 0..m {
            for j in 0..k {
                out[i * k + j] = y[(r, k + i)] * y[(r, j)];
            }
        }
    });
    let omega = feature_gram(n, m * m, None, |r, out| {
        for i in 0..m {
            for t in 0..m {
                out[i * m + t] = y[(r, k + i)] * y[(r, k + t)];
            }
        }
    });
    Ok(FourthMomentTensors {
        d,
        k,
        gamma: Some(Tensor4::from_pair_gram([k, k, k, k], gamma)),
        lambda: Tensor4::from_pair_gram([m, k, m, k], lambda),
        omega: Some(Tensor4::from_pair_gram([m, m, m, m], omega)),
        source: MomentSource::Empirical,
    })
}

/// Generalized Λ from equally weighted symmetric samples `A_r`:
/// `Λ_ijst = mean (u_{k+i}^T A u_j)(u_{k+s}^T A u_t)`.
pub fn generalized_fourth_moments(
    samples: &[DMatrix<f64>],
    model: &SpectralModel,
) -> Result<FourthMomentTensors> {
    generalized_fourth_moments_weighted(samples, None, model, tolerances::EIGENBASIS)
}

/// Weighted variant, used for exact enumeration over a finite support.
/// The weighted mean of the samples must be diagonal in the model
/// eigenbasis up to `tolerance` (relative to `max(1, |mean|_max)`).
pub fn generalized_fourth_moments_weighted(
    samples: &[DMatrix<f64>],
    weights: Option<&[f64]>,
    model: &SpectralModel,
    tolerance: f64,
) -> Result<FourthMomentTensors> {
    if samples.is_empty() {
        return Err(Error::EmptyData);
    }
    let (d, k) = (model.dim(), model.k());
    check_dim(d)?;
    if let Some(w) = weights {
        if w.len() != samples.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} samples",
                w.len(),
                samples.len()
            )));
        }
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidConfig(
                "weights must be non-negative with positive sum".into(),
            ));
        }
    }
    let e = model.eigenvectors();
    let mut rotated = Vec::with_capacity(samples.len());
    for a in samples {
        if a.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!(
                "sample is {:?}, model dimension is {d}",
                a.shape()
            )));
        }
        let a = crate::linalg::checked_symmetric(a)?;
        rotated.push(e.transpose() * a * e);
    }
    let total: f64 = weights.map_or(samples.len() as f64, |w| w.iter().sum());
    let mut mean = DMatrix::<f64>::zeros(d, d);
    for (r, b) in rotated.iter().enumerate() {
        mean += b * weights.map_or(1.0, |w| w[r]);
    }
    mean /= total;
    let scale = crate::linalg::max_abs(&mean).max(1.0);
    let mut residual = 0.0_f64;
    for a in 0..d {
        for b in 0..d {
            if a != b {
                residual = residual.max(mean[(a, b)].abs());
            }
        }
    }
    if residual > tolerance * scale {
        return Err(Error::EigenbasisMismatch {
            residual: residual / scale,
        });
    }
    let m = d - k;
    let lambda = feature_gram(rotated.len(), m * k, weights, |r, out| {
        let b = &rotated[r];
        for i in 0..m {
            for j in 0..k {
                out[i * k + j] = b[(k + i, j)];
            }
        }
    });
    Ok(FourthMomentTensors {
        d,
        k,
        gamma: None,
        lambda: Tensor4::from_pair_gram([m, k, m, k], lambda),
        omega: None,
        source: MomentSource::Generalized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_matrix;
    use crate::rng;

    #[test]
    fn wick_entries() {
        let model = SpectralModel::diagonal(&[2.0, 1.0], 1).unwrap();
        let t = gaussian_fourth_moments(&model).unwrap();
        assert_eq!(t.lambda.get(0, 0, 0, 0), 2.0);
        assert_eq!(t.gamma().unwrap().get(0, 0, 0, 0), 12.0);
        assert_eq!(t.omega().unwrap().get(0, 0, 0, 0), 3.0);
    }

    #[test]
    fn wick_lambda_is_diagonal_in_pairs() {
        let model = SpectralModel::diagonal(&[3.0, 2.0, 1.0, 0.5, 0.25], 2).unwrap();
        let t = gaussian_fourth_moments(&model).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                for s in 0..3 {
                    for u in 0..2 {
                        let want = if i == s && j == u {
                            model.eigenvalues()[2 + i] * model.eigenvalues()[j]
                        } else {
                            0.0
                        };
                        assert_eq!(t.lambda.get(i, j, s, u), want);
                    }
                }
            }
        }
        let g = t.gamma().unwrap();
        assert_eq!(g.get(0, 0, 1, 1), 6.0);
        assert_eq!(g.get(0, 1, 0, 1), 6.0);
        assert_eq!(g.get(0, 1, 1, 0), 6.0);
        assert_eq!(g.get(0, 0, 0, 1), 0.0);
    }

    #[test]
    fn repeated_unit_row() {
        let model = SpectralModel::diagonal(&[2.0, 1.0, 0.5], 1).unwrap();
        let data = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let t = empirical_fourth_moments(&data, &model).unwrap();
        assert_eq!(t.gamma().unwrap().get(0, 0, 0, 0), 1.0);
        assert!(t.lambda.entries().iter().all(|&x| x == 0.0));
        assert!(t.omega().unwrap().entries().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn empirical_symmetry_is_exact() {
        let model = SpectralModel::diagonal(&[3.0, 2.0, 1.0, 0.5], 2).unwrap();
        let mut r = rng::stream(4);
        let data = gaussian_matrix(&mut r, 3000, 4);
        let t = empirical_fourth_moments(&data, &model).unwrap();
        assert_eq!(t.lambda.pair_swap_asymmetry(), 0.0);
        assert_eq!(t.gamma().unwrap().pair_swap_asymmetry(), 0.0);
        assert_eq!(t.omega().unwrap().pair_swap_asymmetry(), 0.0);
    }

    #[test]
    fn empirical_needs_two_rows() {
        let model = SpectralModel::diagonal(&[2.0, 1.0], 1).unwrap();
        assert!(matches!(
            empirical_fourth_moments(&DMatrix::zeros(0, 2), &model),
            Err(Error::EmptyData)
        ));
        assert!(matches!(
            empirical_fourth_moments(&DMatrix::zeros(1, 2), &model),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn generalized_reduces_to_vector_case() {
        let model = SpectralModel::diagonal(&[3.0, 2.0, 1.0, 0.5], 2).unwrap();
        let mut r = rng::stream(5);
        let data = gaussian_matrix(&mut r, 200, 4);
        let samples: Vec<DMatrix<f64>> = data.row_iter().map(|x| x.transpose() * x).collect();
        let direct = empirical_fourth_moments(&data, &model).unwrap();
        let general =
            generalized_fourth_moments_weighted(&samples, None, &model, f64::INFINITY).unwrap();
        assert!(general.lambda.relative_distance(&direct.lambda).unwrap() < 1e-13);
    }

    #[test]
    fn deterministic_samples_give_zero_lambda() {
        let model = SpectralModel::diagonal(&[3.0, 2.0, 1.0], 1).unwrap();
        let m = model.covariance();
        let t = generalized_fourth_moments(&[m.clone(), m.clone(), m], &model).unwrap();
        assert!(t.lambda.entries().iter().all(|&x| x == 0.0));
        assert!(t.gamma.is_none() && t.omega.is_none());
    }

    #[test]
    fn generalized_rejects_foreign_basis() {
        let model = SpectralModel::diagonal(&[3.0, 2.0, 1.0], 1).unwrap();
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            generalized_fourth_moments(&[a], &model),
            Err(Error::EigenbasisMismatch { .. })
        ));
    }

    #[test]
    fn rademacher_spike_fourth_moment() {
        let spec = SpikeSpec::new(vec![4.0, 2.0], 1.0, 4, Latent::Rademacher).unwrap();
        let (t, model) = spiked_fourth_moments(&spec).unwrap();
        assert_eq!(model.eigenvalues().as_slice(), &[5.0, 3.0, 1.0, 1.0]);
        // E[(√η r + ε)^4] = η² + 6ησ² + 3σ⁴
        assert_eq!(t.gamma().unwrap().get(0, 0, 0, 0), 16.0 + 24.0 + 3.0);
        assert_eq!(t.lambda.get(0, 0, 0, 0), 5.0);
    }

    #[test]
    fn spike_validation() {
        assert!(SpikeSpec::new(vec![], 1.0, 3, Latent::Gaussian).is_err());
        assert!(SpikeSpec::new(vec![1.0, 2.0], 1.0, 3, Latent::Gaussian).is_err());
        assert!(SpikeSpec::new(vec![1.0, -2.0], 1.0, 3, Latent::Gaussian).is_err());
        assert!(SpikeSpec::new(vec![1.0, 2.0, 3.0], 1.0, 3, Latent::Gaussian).is_err());
        let zero_noise = SpikeSpec::new(vec![1.0], 0.0, 3, Latent::Gaussian).unwrap();
        assert!(matches!(
            spiked_fourth_moments(&zero_noise),
            Err(Error::InvalidSpike(_))
        ));
    }

    #[test]
    fn json_layout() {
        let t = Tensor4::from_fn([1, 1, 2, 1], |_, _, c, _| c as f64);
        let v = serde_json::to_value(&t).unwrap();
        assert_eq!(v["dims"], serde_json::json!([1, 1, 2, 1]));
        assert_eq!(v["entries"], serde_json::json!([0.0, 1.0]));
        assert_eq!(v["index_order"], "(i,j,s,t) row-major");
        let back: Tensor4 = serde_json::from_value(v).unwrap();
        assert_eq!(back.checked().unwrap(), t);
    }
}
