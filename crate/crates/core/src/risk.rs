//! PCA as empirical risk minimization on the Grassmannian.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grassmann::{self, GrassmannPoint, TangentLift};
use crate::linalg;
use crate::tolerances;

/// Population spectrum `λ_1 ≥ … ≥ λ_d`, eigenvectors and target dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralModel {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    k: usize,
}

fn check_k(d: usize, k: usize) -> Result<()> {
    if k == 0 || k >= d {
        return Err(Error::DimensionMismatch(format!(
            "need 0 < k < d, got d = {d}, k = {k}"
        )));
    }
    Ok(())
}

impl SpectralModel {
    /// Eigendecompose a covariance matrix, which must be PSD.
    pub fn from_covariance(sigma: &DMatrix<f64>, k: usize) -> Result<Self> {
        let model = Self::from_symmetric(sigma, k)?;
        let min = model.eigenvalues[model.dim() - 1];
        if min < -tolerances::PSD * model.eigenvalues[0].abs().max(1.0) {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
            });
        }
        Ok(model)
    }

    /// Eigendecompose any symmetric matrix (the mean matrix of generalized
    /// PCA may be indefinite).
    pub fn from_symmetric(m: &DMatrix<f64>, k: usize) -> Result<Self> {
        let m = linalg::checked_symmetric(m)?;
        check_k(m.nrows(), k)?;
        let (eigenvalues, eigenvectors) = linalg::sym_eig_desc(&m);
        Ok(Self {
            eigenvalues,
            eigenvectors,
            k,
        })
    }

    /// Diagonal covariance with the coordinate eigenbasis.
    pub fn diagonal(eigenvalues: &[f64], k: usize) -> Result<Self> {
        let d = eigenvalues.len();
        Self::from_parts(eigenvalues.to_vec(), DMatrix::identity(d, d), k)
    }

    /// Assemble from an explicit spectrum; eigenvalues must be non-increasing
    /// and the eigenvector matrix orthogonal to `1e-10`.
    pub fn from_parts(eigenvalues: Vec<f64>, eigenvectors: DMatrix<f64>, k: usize) -> Result<Self> {
        let d = eigenvalues.len();
        check_k(d, k)?;
        if eigenvectors.shape() != (d, d) {
            return Err(Error::DimensionMismatch(format!(
                "{d} eigenvalues but eigenvector matrix is {:?}",
                eigenvectors.shape()
            )));
        }
        if eigenvalues.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("non-finite eigenvalue".into()));
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(
                "eigenvalues must be non-increasing".into(),
            ));
        }
        let residual = linalg::orthonormality_residual(&eigenvectors);
        if residual > 1e-10 {
            return Err(Error::NotOrthogonalComplement { residual });
        }
        Ok(Self {
            eigenvalues: DVector::from_vec(eigenvalues),
            eigenvectors,
            k,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Same spectrum with a different target dimension.
    pub fn with_k(&self, k: usize) -> Result<Self> {
        check_k(self.dim(), k)?;
        Ok(Self { k, ..self.clone() })
    }

    /// `λ_k − λ_{k+1}`.
    pub fn gap(&self) -> f64 {
        self.eigenvalues[self.k - 1] - self.eigenvalues[self.k]
    }

    pub fn has_gap(&self) -> bool {
        self.gap() > 1e-12 * self.eigenvalues[0].abs().max(1.0)
    }

    /// The gap, or `NoEigengap` when it vanishes.
    pub fn require_gap(&self) -> Result<f64> {
        if self.has_gap() {
            Ok(self.gap())
        } else {
            Err(Error::NoEigengap { gap: self.gap() })
        }
    }

    /// `δ_ij = λ_j − λ_{k+i}` with zero-based `i < d − k`, `j < k`.
    pub fn delta(&self, i: usize, j: usize) -> f64 {
        self.eigenvalues[j] - self.eigenvalues[self.k + i]
    }

    /// `U*`, the top-k eigenvectors.
    pub fn u_star(&self) -> GrassmannPoint {
        GrassmannPoint::from_basis_unchecked(self.eigenvectors.columns(0, self.k).into_owned())
    }

    /// `U*⊥`, the remaining eigenvectors in order.
    pub fn u_perp(&self) -> DMatrix<f64> {
        self.eigenvectors
            .columns(self.k, self.dim() - self.k)
            .into_owned()
    }

    /// `Σ = E diag(λ) E^T`.
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.eigenvectors
            * DMatrix::from_diagonal(&self.eigenvalues)
            * self.eigenvectors.transpose()
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.sum()
    }

    /// `Tr(U^T Σ U)` evaluated in the eigenbasis.
    fn captured(&self, u: &GrassmannPoint) -> Result<f64> {
        if u.ambient_dim() != self.dim() || u.subspace_dim() != self.k {
            return Err(Error::DimensionMismatch(format!(
                "point in Gr({},{}) for a model on Gr({},{})",
                u.ambient_dim(),
                u.subspace_dim(),
                self.dim(),
                self.k
            )));
        }
        let w = self.eigenvectors.transpose() * u.basis();
        Ok((0..self.dim())
            .map(|r| self.eigenvalues[r] * w.row(r).norm_squared())
            .sum())
    }

    pub fn to_json(&self) -> SpectralModelJson {
        SpectralModelJson {
            eigenvalues: self.eigenvalues.iter().copied().collect(),
            eigenvectors: linalg::to_rows(&self.eigenvectors).concat(),
            k: self.k,
        }
    }

    pub fn from_json(j: &SpectralModelJson) -> Result<Self> {
        let d = j.eigenvalues.len();
        if j.eigenvectors.len() != d * d {
            return Err(Error::Parse(format!(
                "expected {} eigenvector entries, got {}",
                d * d,
                j.eigenvectors.len()
            )));
        }
        let vecs = DMatrix::from_row_slice(d, d, &j.eigenvectors);
        Self::from_parts(j.eigenvalues.clone(), vecs, j.k)
    }
}

/// Serialized spectral model; eigenvectors are the columns of a row-major
/// d×d matrix.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SpectralModelJson {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<f64>,
    pub k: usize,
}

/// Result of fitting PCA to a second-moment matrix.
#[derive(Clone, Debug)]
pub struct PcaFit {
    pub subspace: GrassmannPoint,
    pub empirical_eigenvalues: DVector<f64>,
    pub n: usize,
}

/// Uncentered second moment `n^{-1} Σ x_i x_i^T` of the rows of `data`.
pub fn empirical_second_moment(data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = data.nrows();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let s = data.tr_mul(data) / n as f64;
    Ok((&s + s.transpose()) * 0.5)
}

/// Top-k eigenspace of a symmetric matrix (ties broken as in
/// [`linalg::sym_eig_desc`]).
pub fn pca_fit(s: &DMatrix<f64>, k: usize, n: usize) -> Result<PcaFit> {
    let s = linalg::checked_symmetric(s)?;
    check_k(s.nrows(), k)?;
    let (vals, vecs) = linalg::sym_eig_desc(&s);
    Ok(PcaFit {
        subspace: GrassmannPoint::from_basis_unchecked(vecs.columns(0, k).into_owned()),
        empirical_eigenvalues: vals,
        n,
    })
}

/// Reconstruction risk `E|X|²/2 − Tr(U^T Σ U)/2`.
pub fn population_risk(
    model: &SpectralModel,
    u: &GrassmannPoint,
    second_moment_trace: f64,
) -> Result<f64> {
    Ok(0.5 * second_moment_trace - 0.5 * model.captured(u)?)
}

/// Excess risk `(Tr(U*^T Σ U*) − Tr(U^T Σ U))/2`.
pub fn excess_risk(model: &SpectralModel, u: &GrassmannPoint) -> Result<f64> {
    model.require_gap()?;
    if u.ambient_dim() != model.dim() || u.subspace_dim() != model.k {
        return Err(Error::DimensionMismatch(
            "subspace does not match model".into(),
        ));
    }
    let w = model.eigenvectors.transpose() * u.basis();
    let k = model.k;
    let mut total = 0.0;
    for r in 0..model.dim() {
        let mass = w.row(r).norm_squared();
        if r < k {
            total += model.eigenvalues[r] * (1.0 - mass);
        } else {
            total -= model.eigenvalues[r] * mass;
        }
    }
    Ok((0.5 * total).max(0.0))
}

/// One eigenpair of the Hessian of the population risk at `U*`.
#[derive(Clone, Debug)]
pub struct HessianEigenpair {
    pub i: usize,
    pub j: usize,
    pub value: f64,
    pub lift: TangentLift,
}

/// The `k(d−k)` eigenpairs `(δ_ij, U*⊥ E_ij)` ordered by `(i, j)`.
pub fn hessian_spectrum_at_opt(model: &SpectralModel) -> Result<Vec<HessianEigenpair>> {
    model.require_gap()?;
    let (d, k) = (model.dim(), model.k);
    let u = model.u_star();
    let perp = model.u_perp();
    let mut out = Vec::with_capacity(k * (d - k));
    for i in 0..d - k {
        for j in 0..k {
            let mut e = DMatrix::zeros(d - k, k);
            e[(i, j)] = 1.0;
            out.push(HessianEigenpair {
                i,
                j,
                value: model.delta(i, j),
                lift: grassmann::lift_from_coords(&u, &perp, &e)?,
            });
        }
    }
    Ok(out)
}

/// Powers of the Hessian at the optimum acting on coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HPower {
    Inverse,
    InverseSqrt,
}

/// Divide `C_ij` by `δ_ij` or `√δ_ij`.
pub fn apply_h_power(
    model: &SpectralModel,
    coords: &DMatrix<f64>,
    power: HPower,
) -> Result<DMatrix<f64>> {
    model.require_gap()?;
    let (d, k) = (model.dim(), model.k);
    if coords.shape() != (d - k, k) {
        return Err(Error::DimensionMismatch(format!(
            "coordinates must be {}x{k}",
            d - k
        )));
    }
    Ok(DMatrix::from_fn(d - k, k, |i, j| {
        let delta = model.delta(i, j);
        match power {
            HPower::Inverse => coords[(i, j)] / delta,
            HPower::InverseSqrt => coords[(i, j)] / delta.sqrt(),
        }
    }))
}

fn check_p(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidP(p));
    }
    Ok(())
}

fn schatten(values: impl Iterator<Item = f64>, p: f64) -> f64 {
    if p.is_infinite() {
        values.fold(0.0, f64::max)
    } else {
        values.map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `|U U^T − V V^T|_{S_p} = 2^{1/p} (Σ sin^p θ_j)^{1/p}` from principal angles.
pub fn projector_schatten_distance(u: &GrassmannPoint, v: &GrassmannPoint, p: f64) -> Result<f64> {
    check_p(p)?;
    let angles = grassmann::principal_angles(u, v)?;
    let sines = angles.as_slice().iter().map(|t| t.sin());
    if p.is_infinite() {
        Ok(schatten(sines, p))
    } else {
        Ok(2f64.powf(1.0 / p) * schatten(sines, p))
    }
}

/// The same norm from the eigenvalues of `U U^T − V V^T`.
pub fn projector_schatten_direct(u: &GrassmannPoint, v: &GrassmannPoint, p: f64) -> Result<f64> {
    check_p(p)?;
    if u.basis().shape() != v.basis().shape() {
        return Err(Error::DimensionMismatch("subspaces differ in shape".into()));
    }
    let diff = u.projector() - v.projector();
    let eig = nalgebra::SymmetricEigen::new(diff);
    Ok(schatten(eig.eigenvalues.iter().map(|x| x.abs()), p))
}

/// Largest deviation between the singular values of `U U^T − V V^T` and
/// the doubled list of principal-angle sines padded with zeros.
pub fn angle_singular_residual(u: &GrassmannPoint, v: &GrassmannPoint) -> Result<f64> {
    let angles = grassmann::principal_angles(u, v)?;
    let d = u.ambient_dim();
    let mut expected: Vec<f64> = angles
        .as_slice()
        .iter()
        .flat_map(|t| [t.sin(), t.sin()])
        .collect();
    // When 2k > d at least 2k − d angles vanish, so truncating after the
    // sort only drops zeros.
    expected.sort_by(|a, b| b.total_cmp(a));
    expected.resize(d, 0.0);
    let got = linalg::singular_values(&(u.projector() - v.projector()));
    Ok(got
        .iter()
        .zip(&expected)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DavisKahanStatus {
    Applicable,
    /// `|S − Σ|_op > gap/2`, outside the lemma's hypothesis.
    NotApplicable,
}

#[derive(Clone, Debug, Serialize)]
pub struct DavisKahanCheck {
    pub status: DavisKahanStatus,
    /// `sin θ_k(fit(S), U*)`.
    pub lhs: f64,
    /// `2 |S − Σ|_op / gap`.
    pub rhs: f64,
    pub perturbation: f64,
    pub gap: f64,
    pub holds: bool,
}

impl DavisKahanCheck {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

pub fn davis_kahan_check(model: &SpectralModel, s_emp: &DMatrix<f64>) -> Result<DavisKahanCheck> {
    let gap = model.require_gap()?;
    let s = linalg::checked_symmetric(s_emp)?;
    if s.shape() != (model.dim(), model.dim()) {
        return Err(Error::DimensionMismatch("empirical matrix shape".into()));
    }
    let perturbation = linalg::sym_op_norm(&(&s - model.covariance()));
    let fit = pca_fit(&s, model.k, 0)?;
    let lhs = grassmann::principal_angles(&fit.subspace, &model.u_star())?
        .max()
        .sin();
    let rhs = 2.0 * perturbation / gap;
    let status = if perturbation <= 0.5 * gap {
        DavisKahanStatus::Applicable
    } else {
        DavisKahanStatus::NotApplicable
    };
    Ok(DavisKahanCheck {
        status,
        lhs,
        rhs,
        perturbation,
        gap,
        holds: status == DavisKahanStatus::Applicable && lhs <= rhs + tolerances::DAVIS_KAHAN_SLACK,
    })
}
