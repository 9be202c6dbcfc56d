//! Comparisons between simulated summaries and the predicted laws.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::SimulationSummary;
use crate::error::{Error, Result};
use crate::moments::{
    nonasymptotic_bound, projector_quantile_band, quantile_band, AsymptoticLaw, QuantileBand,
};

/// Fewest defined coordinate samples a CLT comparison accepts.
pub const MIN_CLT_SAMPLES: usize = 100;

/// Plotting positions outside this central range are ignored by the QQ
/// statistic; the extreme order statistics are too noisy to be useful.
const QQ_RANGE: (f64, f64) = (0.01, 0.99);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoordinateDiagnostic {
    pub i: usize,
    pub j: usize,
    pub empirical_variance: f64,
    pub predicted_variance: f64,
    /// Sample mean divided by its standard error.
    pub mean_z: f64,
    /// Largest gap between standardized order statistics and normal
    /// quantiles over the central plotting positions.
    pub qq_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub samples: usize,
    /// `|C_emp − g_cov|_F / |g_cov|_F`.
    pub relative_frobenius_error: f64,
    pub max_abs_mean_z: f64,
    pub max_qq_deviation: f64,
    pub coordinates: Vec<CoordinateDiagnostic>,
}

fn check_shape(summary: &SimulationSummary, law: &AsymptoticLaw) -> Result<()> {
    if summary.d != law.d || summary.k != law.k {
        return Err(Error::DimensionMismatch(format!(
            "summary is Gr({},{}), law is Gr({},{})",
            summary.d, summary.k, law.d, law.k
        )));
    }
    Ok(())
}

/// Compare the scaled error coordinates with the Gaussian limit `G`.
pub fn clt_report(summary: &SimulationSummary, law: &AsymptoticLaw) -> Result<CltReport> {
    check_shape(summary, law)?;
    let m = summary.defined_log_count;
    let cov = match &summary.coord_covariance {
        Some(c) if m >= MIN_CLT_SAMPLES => c,
        _ => {
            return Err(Error::InsufficientData {
                needed: MIN_CLT_SAMPLES,
                available: m,
            })
        }
    };
    let relative_frobenius_error = (cov - &law.g_cov).norm() / law.g_cov.norm();

    let root_n = (summary.n as f64).sqrt();
    let columns: Vec<Vec<f64>> = (0..law.g_cov.nrows())
        .map(|a| {
            summary
                .results
                .iter()
                .filter_map(|r| r.log_coords.as_ref())
                .map(|c| c[a] * root_n)
                .collect()
        })
        .collect();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut coordinates = Vec::with_capacity(columns.len());
    for (a, xs) in columns.iter().enumerate() {
        let predicted = law.g_cov[(a, a)];
        let empirical = cov[(a, a)];
        let mean_z = summary.coord_mean[a] / (empirical / m as f64).sqrt();
        coordinates.push(CoordinateDiagnostic {
            i: a / law.k,
            j: a % law.k,
            empirical_variance: empirical,
            predicted_variance: predicted,
            mean_z,
            qq_deviation: qq_deviation(xs, predicted.sqrt(), &normal),
        });
    }
    Ok(CltReport {
        samples: m,
        relative_frobenius_error,
        max_abs_mean_z: coordinates
            .iter()
            .map(|c| c.mean_z.abs())
            .fold(0.0, f64::max),
        max_qq_deviation: coordinates
            .iter()
            .map(|c| c.qq_deviation)
            .fold(0.0, f64::max),
        coordinates,
    })
}

fn qq_deviation(xs: &[f64], sd: f64, normal: &Normal) -> f64 {
    let mut z: Vec<f64> = xs.iter().map(|x| x / sd).collect();
    z.sort_by(f64::total_cmp);
    let m = z.len() as f64;
    z.iter()
        .enumerate()
        .filter_map(|(r, &x)| {
            let p = (r as f64 + 0.5) / m;
            (QQ_RANGE.0..=QQ_RANGE.1)
                .contains(&p)
                .then(|| (x - normal.inverse_cdf(p)).abs())
        })
        .fold(0.0, f64::max)
}

/// Empirical quantiles against the two quantile bands at one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileCheck {
    pub delta: f64,
    pub scaled_excess_quantile: f64,
    pub band: QuantileBand,
    pub contained: bool,
    pub band_ratio: f64,
    pub scaled_projector_quantile: f64,
    pub projector_band: QuantileBand,
    pub projector_contained: bool,
}

pub fn risk_quantile_report(
    summary: &SimulationSummary,
    law: &AsymptoticLaw,
    deltas: &[f64],
) -> Result<Vec<QuantileCheck>> {
    check_shape(summary, law)?;
    deltas
        .iter()
        .map(|&delta| {
            let band = quantile_band(law, delta)?;
            let projector_band = projector_quantile_band(law, delta)?;
            let q = summary.scaled_excess_quantile(delta)?;
            let qp = summary.scaled_projector_quantile(delta)?;
            Ok(QuantileCheck {
                delta,
                scaled_excess_quantile: q,
                contained: band.contains(q),
                band_ratio: band.upper / band.lower,
                band,
                scaled_projector_quantile: qp,
                projector_contained: projector_band.contains(qp),
                projector_band,
            })
        })
        .collect()
}

/// Empirical excess-risk quantile against the finite-sample bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonasymptoticReport {
    pub delta: f64,
    pub n: usize,
    pub excess_quantile: f64,
    pub bound: f64,
    pub holds: bool,
}

pub fn nonasymptotic_report(
    summary: &SimulationSummary,
    law: &AsymptoticLaw,
    delta: f64,
) -> Result<NonasymptoticReport> {
    check_shape(summary, law)?;
    let excess_quantile = summary.excess_quantile(delta)?;
    let bound = nonasymptotic_bound(law, summary.n, delta)?;
    Ok(NonasymptoticReport {
        delta,
        n: summary.n,
        excess_quantile,
        bound,
        holds: excess_quantile <= bound,
    })
}
