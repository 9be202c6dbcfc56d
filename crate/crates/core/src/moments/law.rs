//! Limiting Gaussian laws of the scaled error coordinates and of the
//! scaled excess risk, and the quantile bands derived from them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::tensors::FourthMomentTensors;
use crate::error::{Error, Result};
use crate::linalg::{self, CompensatedSum};
use crate::risk::SpectralModel;
use crate::tolerances;

/// Covariance operators of `G` and `H`, flattened over `a = i·k + j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticLaw {
    pub d: usize,
    pub k: usize,
    /// `E[G_ij G_st] = Λ_ijst / (δ_ij δ_st)`.
    #[serde(with = "crate::serde_matrix")]
    pub g_cov: DMatrix<f64>,
    /// `E[H_ij H_st] = Λ_ijst / √(δ_ij δ_st)`.
    #[serde(with = "crate::serde_matrix")]
    pub h_cov: DMatrix<f64>,
    /// `E|H|_F²`, the trace of `h_cov`.
    pub mean_h_sq: f64,
    /// Largest eigenvalue of `h_cov`.
    pub tau_sq: f64,
    /// `E|G|_F²`.
    pub g_trace: f64,
    /// Largest eigenvalue of `g_cov`.
    pub tau_g_sq: f64,
    pub min_eigenvalue_g: f64,
    pub min_eigenvalue_h: f64,
}

impl AsymptoticLaw {
    /// Limit of `E[n · excess]`, i.e. `E|H|²/2`.
    pub fn mean_scaled_excess(&self) -> f64 {
        0.5 * self.mean_h_sq
    }

    /// Limit of `E[n · |P_n − P*|_F²]`, i.e. `2 E|G|²`.
    pub fn mean_scaled_projector(&self) -> f64 {
        2.0 * self.g_trace
    }

    /// Flattened index of coordinate `(i, j)`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.k + j
    }
}

fn check_psd(c: &DMatrix<f64>) -> Result<f64> {
    let min = linalg::min_eigenvalue(c);
    let scale = linalg::max_abs(c).max(1.0);
    if min < -tolerances::PSD * scale {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    Ok(min)
}

fn trace(c: &DMatrix<f64>) -> f64 {
    let mut s = CompensatedSum::default();
    for a in 0..c.nrows() {
        s.add(c[(a, a)]);
    }
    s.value()
}

pub fn asymptotic_law(
    model: &SpectralModel,
    tensors: &FourthMomentTensors,
) -> Result<AsymptoticLaw> {
    model.require_gap()?;
    tensors.check_against(model)?;
    let (d, k) = (model.dim(), model.k());
    let m = d - k;
    let lam = tensors.lambda.flattened();
    let delta = |a: usize| model.delta(a / k, a % k);
    let g_cov = DMatrix::from_fn(m * k, m * k, |a, b| lam[(a, b)] / (delta(a) * delta(b)));
    let h_cov = DMatrix::from_fn(m * k, m * k, |a, b| {
        lam[(a, b)] / (delta(a) * delta(b)).sqrt()
    });
    let min_eigenvalue_g = check_psd(&g_cov)?;
    let min_eigenvalue_h = check_psd(&h_cov)?;
    Ok(AsymptoticLaw {
        d,
        k,
        mean_h_sq: trace(&h_cov),
        tau_sq: linalg::top_eigenpair(&h_cov).0,
        g_trace: trace(&g_cov),
        tau_g_sq: linalg::top_eigenpair(&g_cov).0,
        min_eigenvalue_g,
        min_eigenvalue_h,
        g_cov,
        h_cov,
    })
}

/// Band `[b/64, b]` for the limit of `n · Q(1 − δ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileBand {
    pub delta: f64,
    /// The band scale `b`.
    pub scale: f64,
    pub lower: f64,
    pub upper: f64,
}

impl QuantileBand {
    const UPPER_CONSTANT: f64 = 1.0;
    const LOWER_CONSTANT: f64 = 1.0 / 64.0;

    fn from_scale(delta: f64, scale: f64) -> Self {
        Self {
            delta,
            scale,
            lower: Self::LOWER_CONSTANT * scale,
            upper: Self::UPPER_CONSTANT * scale,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

fn check_band_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 0.1) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    Ok(())
}

/// Excess-risk band: `b = E|H|² + 2τ² log(1/δ)`.
pub fn quantile_band(law: &AsymptoticLaw, delta: f64) -> Result<QuantileBand> {
    check_band_delta(delta)?;
    let b = law.mean_h_sq + 2.0 * law.tau_sq * (1.0 / delta).ln();
    Ok(QuantileBand::from_scale(delta, b))
}

/// Squared-Frobenius projector band: `b = 4 E|G|² + 8 τ_G² log(1/δ)`.
pub fn projector_quantile_band(law: &AsymptoticLaw, delta: f64) -> Result<QuantileBand> {
    check_band_delta(delta)?;
    let b = 4.0 * law.g_trace + 8.0 * law.tau_g_sq * (1.0 / delta).ln();
    Ok(QuantileBand::from_scale(delta, b))
}

/// Finite-sample bound `75 E|H|² / (n δ)` on the `(1 − δ)`-quantile of the
/// excess risk, valid once `n` clears the sample-size threshold.
pub fn nonasymptotic_bound(law: &AsymptoticLaw, n: usize, delta: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidConfig(
            "sample size must be at least 1".into(),
        ));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    Ok(75.0 / (n as f64 * delta) * law.mean_h_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::tensors::{
        gaussian_fourth_moments, spiked_fourth_moments, Latent, SpikeSpec,
    };

    fn canonical() -> (SpectralModel, AsymptoticLaw) {
        let model = SpectralModel::diagonal(&[3.0, 2.0, 1.0, 0.5, 0.25], 2).unwrap();
        let t = gaussian_fourth_moments(&model).unwrap();
        let law = asymptotic_law(&model, &t).unwrap();
        (model, law)
    }

    #[test]
    fn gaussian_mean_h_sq() {
        let (model, law) = canonical();
        let mut want = 0.0;
        for i in 0..3 {
            for j in 0..2 {
                let l = model.eigenvalues();
                want += l[j] * l[2 + i] / (l[j] - l[2 + i]);
            }
        }
        assert!((law.mean_h_sq - want).abs() < 1e-14);
        assert!((law.mean_h_sq - 5.325_108_225_108_225).abs() < 1e-12);
        assert!((law.mean_scaled_excess() - 2.662_554_112_554_112).abs() < 1e-12);
        assert!((law.tau_sq - 2.0).abs() < 1e-12);
    }

    #[test]
    fn mean_h_sq_is_trace_of_h_cov() {
        let (_, law) = canonical();
        let diag: f64 = (0..law.h_cov.nrows()).map(|a| law.h_cov[(a, a)]).sum();
        assert!((law.mean_h_sq - diag).abs() < 1e-14);
        assert!(law.min_eigenvalue_h >= -1e-10);
    }

    #[test]
    fn band_ratio_and_value() {
        let (_, law) = canonical();
        let band = quantile_band(&law, 0.05).unwrap();
        assert_eq!(band.upper / band.lower, 64.0);
        let want = 5.325_108_225_108_225 + 4.0 * 20f64.ln();
        assert!((band.upper - want).abs() < 1e-12);
        let edge = quantile_band(&law, 0.1 - 1e-12).unwrap();
        assert_eq!(edge.upper / edge.lower, 64.0);
        assert!(matches!(
            quantile_band(&law, 0.1),
            Err(Error::DeltaOutOfRange(_))
        ));
        assert!(matches!(
            quantile_band(&law, 0.0),
            Err(Error::DeltaOutOfRange(_))
        ));
    }

    #[test]
    fn projector_band_scale_is_four_traces() {
        let (_, law) = canonical();
        let band = projector_quantile_band(&law, 0.05).unwrap();
        let want = 4.0 * law.g_trace + 8.0 * law.tau_g_sq * 20f64.ln();
        assert_eq!(band.scale, want);
    }

    #[test]
    fn nonasymptotic_scaling() {
        let (_, law) = canonical();
        let b = nonasymptotic_bound(&law, 10_000, 0.1).unwrap();
        assert!((b - 0.399_383_116_883_116_9).abs() < 1e-12);
        let half = nonasymptotic_bound(&law, 20_000, 0.1).unwrap();
        assert!((2.0 * half - b).abs() < 1e-15);
    }

    #[test]
    fn spiked_law_is_diagonal() {
        let spec = SpikeSpec::new(vec![4.0, 2.0], 1.0, 6, Latent::Gaussian).unwrap();
        let (t, model) = spiked_fourth_moments(&spec).unwrap();
        let law = asymptotic_law(&model, &t).unwrap();
        for a in 0..law.g_cov.nrows() {
            for b in 0..law.g_cov.ncols() {
                if a != b {
                    assert_eq!(law.g_cov[(a, b)], 0.0);
                    assert_eq!(law.h_cov[(a, b)], 0.0);
                }
            }
        }
        // Exact law: Var G_ij = σ²(η_j + σ²)/η_j², Var H_ij = σ²(1 + σ²/η_j).
        assert!((law.g_cov[(0, 0)] - 5.0 / 16.0).abs() < 1e-15);
        assert!((law.h_cov[(0, 0)] - 1.25).abs() < 1e-15);
        assert!((law.h_cov[(1, 1)] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn no_gap() {
        let model = SpectralModel::diagonal(&[2.0, 1.0, 1.0], 2).unwrap();
        let t = gaussian_fourth_moments(&model).unwrap();
        assert!(matches!(
            asymptotic_law(&model, &t),
            Err(Error::NoEigengap { .. })
        ));
    }
}
