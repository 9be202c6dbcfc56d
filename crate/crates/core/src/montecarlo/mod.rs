//! Trial harness: sample, fit PCA, measure the error against the
//! population optimum, and aggregate the scaled quantities that the
//! limiting laws describe.

pub mod reports;
pub mod suites;

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grassmann::{self, GrassmannPoint};
use crate::linalg::CompensatedSum;
use crate::models::DistributionModel;
use crate::risk::{self, SpectralModel};
use crate::rng;
use crate::tolerances;

pub use reports::{
    clt_report, nonasymptotic_report, risk_quantile_report, CltReport, CoordinateDiagnostic,
    NonasymptoticReport, QuantileCheck,
};
pub use suites::{
    concordance_suite, derivative_suite, geometry_suite, geometry_suite_with, hessian_suite,
    perturbation_suite, validate_overrides, CheckStats, Overrides, Sense, Suite, SuiteReport,
    TransportFn,
};

/// Levels `δ` at which summaries record `(1 − δ)`-quantiles.
pub const DEFAULT_DELTAS: [f64; 4] = [0.1, 0.05, 0.02, 0.01];

/// Outcome of one simulated fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_index: usize,
    pub seed: u64,
    pub n: usize,
    /// Riemannian distance between the fitted and optimal subspaces.
    pub dist: f64,
    pub excess: f64,
    pub max_angle: f64,
    /// `U*⊥^T Log_{U*}(U_n)` flattened over `a = i·k + j`; `None` near the
    /// cut locus.
    pub log_coords: Option<Vec<f64>>,
    /// `|U_n U_n^T − U* U*^T|_F²`.
    pub projector_p2_sq: f64,
    /// Wall time of the trial in seconds; zero once timing is stripped.
    pub runtime: f64,
}

/// `(1 − δ)`-quantiles of the scaled excess risk and projector error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileEstimate {
    pub delta: f64,
    pub scaled_excess: f64,
    pub scaled_projector: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
    pub trial_seconds_sum: f64,
}

/// Aggregate of a batch of trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub trials: usize,
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub seed: u64,
    pub model_kind: String,
    pub mean_scaled_excess: f64,
    pub mean_scaled_projector: f64,
    pub quantiles: Vec<QuantileEstimate>,
    pub defined_log_count: usize,
    pub undefined_log_count: usize,
    /// Mean of `√n · log_coords` over defined trials.
    pub coord_mean: Vec<f64>,
    /// Sample covariance of `√n · log_coords`, `(d−k)k` square.
    #[serde(with = "crate::serde_matrix::option")]
    pub coord_covariance: Option<DMatrix<f64>>,
    pub results: Vec<TrialResult>,
    pub timing: Option<Timing>,
}

/// Index `⌈(1 − δ) m⌉` (1-based) of the left-continuous inverse.
fn order_statistic_rank(m: usize, delta: f64) -> usize {
    // Guard against (1 − δ)·m landing a rounding error above an integer.
    let raw = ((1.0 - delta) * m as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(m)
}

/// Empirical `(1 − δ)`-quantile `inf{t : F_m(t) ≥ 1 − δ}`.
pub fn empirical_quantile(values: &[f64], delta: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyData);
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[order_statistic_rank(sorted.len(), delta) - 1])
}

/// `(dist, excess, max_angle, log_coords, projector_p2_sq)` of one fit.
type Measurement = (f64, f64, f64, Option<Vec<f64>>, f64);

fn measure(
    model: &SpectralModel,
    u_star: &GrassmannPoint,
    u_perp: &DMatrix<f64>,
    fitted: &GrassmannPoint,
) -> Result<Measurement> {
    let angles = grassmann::principal_angles(u_star, fitted)?;
    let max_angle = angles.max();
    let excess = risk::excess_risk(model, fitted)?;
    let overlap = (u_star.basis().transpose() * fitted.basis()).norm_squared();
    let projector = (2.0 * model.k() as f64 - 2.0 * overlap).max(0.0);
    let coords = if max_angle >= std::f64::consts::FRAC_PI_2 - tolerances::CUT_LOCUS_MARGIN {
        None
    } else {
        let lift = grassmann::log_map(u_star, fitted)?;
        let c = grassmann::coords_of(&lift, u_perp)?;
        Some(c.transpose().as_slice().to_vec())
    };
    Ok((angles.norm(), excess, max_angle, coords, projector))
}

/// Run `trials` independent fits of `n` samples each.
///
/// Trial `t` draws from the stream seeded by `derived_seed(seed, t)`, so
/// the output does not depend on the number of worker threads.
pub fn run_trials(
    model: &DistributionModel,
    n: usize,
    trials: usize,
    seed: u64,
    k: usize,
) -> Result<SimulationSummary> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let spectral = model.spectral_model(k)?;
    spectral.require_gap()?;
    let u_star = spectral.u_star();
    let u_perp = spectral.u_perp();
    let start = Instant::now();
    let results = (0..trials)
        .into_par_iter()
        .map(|t| {
            let clock = Instant::now();
            let trial_seed = rng::derived_seed(seed, t as u64);
            let mut stream = rng::stream(trial_seed);
            let s = model.empirical_matrix(n, &mut stream)?;
            let fit = risk::pca_fit(&s, k, n)?;
            let (dist, excess, max_angle, log_coords, projector_p2_sq) =
                measure(&spectral, &u_star, &u_perp, &fit.subspace)?;
            Ok(TrialResult {
                trial_index: t,
                seed: trial_seed,
                n,
                dist,
                excess,
                max_angle,
                log_coords,
                projector_p2_sq,
                runtime: clock.elapsed().as_secs_f64(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let wall = start.elapsed().as_secs_f64();
    let mut summary = summarize(results, &spectral, seed, model.kind())?;
    summary.timing = Some(Timing {
        wall_seconds: wall,
        trial_seconds_sum: summary.results.iter().map(|r| r.runtime).sum(),
    });
    Ok(summary)
}

/// Aggregate trial results in trial order.
pub fn summarize(
    results: Vec<TrialResult>,
    model: &SpectralModel,
    seed: u64,
    model_kind: &str,
) -> Result<SimulationSummary> {
    let first = results.first().ok_or(Error::EmptyData)?;
    let n = first.n;
    if results.iter().any(|r| r.n != n) {
        return Err(Error::InvalidConfig(
            "trials use different sample sizes".into(),
        ));
    }
    let (d, k) = (model.dim(), model.k());
    let p = (d - k) * k;
    let nf = n as f64;
    let scaled_excess: Vec<f64> = results.iter().map(|r| nf * r.excess).collect();
    let scaled_projector: Vec<f64> = results.iter().map(|r| nf * r.projector_p2_sq).collect();
    let m = results.len() as f64;

    let quantiles = DEFAULT_DELTAS
        .iter()
        .map(|&delta| {
            Ok(QuantileEstimate {
                delta,
                scaled_excess: empirical_quantile(&scaled_excess, delta)?,
                scaled_projector: empirical_quantile(&scaled_projector, delta)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let defined: Vec<Vec<f64>> = results
        .iter()
        .filter_map(|r| r.log_coords.as_ref())
        .map(|c| c.iter().map(|x| x * nf.sqrt()).collect())
        .collect();
    if defined.iter().any(|c| c.len() != p) {
        return Err(Error::DimensionMismatch("log coordinates length".into()));
    }
    let (coord_mean, coord_covariance) = coordinate_moments(&defined, p);

    Ok(SimulationSummary {
        trials: results.len(),
        n,
        d,
        k,
        seed,
        model_kind: model_kind.to_string(),
        mean_scaled_excess: mean_of(&scaled_excess, m),
        mean_scaled_projector: mean_of(&scaled_projector, m),
        quantiles,
        defined_log_count: defined.len(),
        undefined_log_count: results.len() - defined.len(),
        coord_mean,
        coord_covariance,
        results,
        timing: None,
    })
}

fn mean_of(xs: &[f64], m: f64) -> f64 {
    crate::linalg::compensated_sum(xs.iter().copied()) / m
}

/// Mean and unbiased covariance with compensated sums; covariance needs
/// at least two rows.
fn coordinate_moments(rows: &[Vec<f64>], p: usize) -> (Vec<f64>, Option<DMatrix<f64>>) {
    let m = rows.len();
    if m == 0 {
        return (vec![f64::NAN; p], None);
    }
    let mean: Vec<f64> = (0..p)
        .map(|a| crate::linalg::compensated_sum(rows.iter().map(|r| r[a])) / m as f64)
        .collect();
    if m < 2 {
        return (mean, None);
    }
    let mut cov = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in a..p {
            let mut acc = CompensatedSum::default();
            for r in rows {
                acc.add((r[a] - mean[a]) * (r[b] - mean[b]));
            }
            let v = acc.value() / (m - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    (mean, Some(cov))
}

impl SimulationSummary {
    /// `(1 − δ)`-quantile of `n · excess` at any level.
    pub fn scaled_excess_quantile(&self, delta: f64) -> Result<f64> {
        let nf = self.n as f64;
        let xs: Vec<f64> = self.results.iter().map(|r| nf * r.excess).collect();
        empirical_quantile(&xs, delta)
    }

    /// `(1 − δ)`-quantile of `n · 𝒫_n` at any level.
    pub fn scaled_projector_quantile(&self, delta: f64) -> Result<f64> {
        let nf = self.n as f64;
        let xs: Vec<f64> = self
            .results
            .iter()
            .map(|r| nf * r.projector_p2_sq)
            .collect();
        empirical_quantile(&xs, delta)
    }

    /// `(1 − δ)`-quantile of the unscaled excess risk.
    pub fn excess_quantile(&self, delta: f64) -> Result<f64> {
        let xs: Vec<f64> = self.results.iter().map(|r| r.excess).collect();
        empirical_quantile(&xs, delta)
    }

    /// Drop wall-clock data so that reruns compare equal.
    pub fn strip_timing(&mut self) {
        self.timing = None;
        for r in &mut self.results {
            r.runtime = 0.0;
        }
    }

    /// Per-trial CSV rows: trial, dist, excess, max_angle, projector_p2_sq.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trial", "dist", "excess", "max_angle", "projector_p2_sq"])?;
        for r in &self.results {
            w.write_record([
                r.trial_index.to_string(),
                format!("{:?}", r.dist),
                format!("{:?}", r.excess),
                format!("{:?}", r.max_angle),
                format!("{:?}", r.projector_p2_sq),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
