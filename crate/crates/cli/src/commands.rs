//! The subcommands. Each returns a serializable result; the caller wraps
//! it in the report envelope.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use grassrisk::models::DistributionModel;
use grassrisk::moments::{
    asymptotic_law, gaussian_closed_forms, nonasymptotic_bound, projector_quantile_band,
    quantile_band, s_param_gaussian, s_param_monte_carlo, sample_size_threshold, variance_params,
    AsymptoticLaw, GaussianClosedForms, MaxDeviationEstimator, QuantileBand, Threshold,
    VarianceParams,
};
use grassrisk::montecarlo::{
    clt_report, nonasymptotic_report, risk_quantile_report, run_trials, CltReport,
    NonasymptoticReport, Overrides, QuantileCheck, SimulationSummary, Suite, SuiteReport,
};
use grassrisk::rng::derived_seed;
use grassrisk::Error;
use serde::Serialize;

use crate::args::{AnalysisArgs, SuiteName};
use crate::error::Result;
use crate::report::Output;

/// Stream indices below the master seed, one per consumer.
const NU_STREAM: u64 = 0;
const S_STREAM: u64 = 1;
const R_STREAM: u64 = 2;

#[derive(Debug, Serialize)]
pub struct SParam {
    pub value: f64,
    pub method: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct BoundAt {
    pub n: usize,
    pub bound: f64,
}

#[derive(Debug, Serialize)]
pub struct Level {
    pub delta: f64,
    pub excess_band: QuantileBand,
    pub projector_band: QuantileBand,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<Threshold>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_at_n_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_at_n: Option<BoundAt>,
}

#[derive(Debug, Serialize)]
pub struct Analysis {
    pub model_kind: &'static str,
    pub d: usize,
    pub k: usize,
    pub eigenvalues: Vec<f64>,
    pub gap: f64,
    pub mean_h_sq: f64,
    pub tau_sq: f64,
    pub mean_scaled_excess: f64,
    pub mean_scaled_projector: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance: Option<VarianceParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance_note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gaussian_closed_forms: Option<GaussianClosedForms>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_param: Option<SParam>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_note: Option<String>,
    pub levels: Vec<Level>,
    pub law: AsymptoticLaw,
}

fn exact_law(model: &DistributionModel, k: usize) -> Result<AsymptoticLaw> {
    let spectral = model.spectral_model(k)?;
    let tensors = model.exact_tensors(&spectral)?;
    Ok(asymptotic_law(&spectral, &tensors)?)
}

pub fn analyze(
    model: &DistributionModel,
    k: usize,
    run: &AnalysisArgs,
    n: Option<usize>,
    seed: u64,
) -> Result<Analysis> {
    let spectral = model.spectral_model(k)?;
    let gap = spectral.require_gap()?;
    let tensors = model.exact_tensors(&spectral)?;
    let law = asymptotic_law(&spectral, &tensors)?;
    let (variance, variance_note) = match variance_params(
        &spectral,
        &tensors,
        run.restarts,
        derived_seed(seed, NU_STREAM),
    ) {
        Ok(v) => (Some(v), None),
        Err(e @ Error::MissingTensor(_)) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let gaussian = matches!(model, DistributionModel::Gaussian { .. });
    let closed = if gaussian {
        Some(gaussian_closed_forms(&spectral)?)
    } else {
        None
    };

    let sampler = model.vector_sampler();
    let sigma = spectral.covariance();
    let s_param = match sampler {
        None => None,
        Some(_) if gaussian => Some(SParam {
            value: s_param_gaussian(&spectral)?,
            method: "gaussian_closed_form",
            samples: None,
        }),
        Some(s) => Some(SParam {
            value: s_param_monte_carlo(s, &sigma, run.s_samples, derived_seed(seed, S_STREAM))?,
            method: "monte_carlo",
            samples: Some(run.s_samples),
        }),
    };
    let estimator = match sampler {
        Some(s) => Some(MaxDeviationEstimator::new(
            s,
            sigma.clone(),
            run.replicates,
            derived_seed(seed, R_STREAM),
        )?),
        None => None,
    };
    let threshold_note = sampler.is_none().then(|| {
        "the sample-size threshold needs i.i.d. vector data; not computed for this model"
            .to_string()
    });

    let mut levels = Vec::with_capacity(run.deltas.len());
    for &delta in &run.deltas {
        let threshold = match (&estimator, &s_param, &variance) {
            (Some(est), Some(s), Some(variance)) => Some(sample_size_threshold(
                &spectral,
                variance.v_big.value,
                variance.nu.value,
                s.value,
                &|m| Ok(est.r_of_n(m)),
                delta,
            )?),
            _ => None,
        };
        let bound_at_n_star = match &threshold {
            Some(t) => Some(nonasymptotic_bound(&law, t.n_star, delta)?),
            None => None,
        };
        let bound_at_n = match n {
            Some(n) => Some(BoundAt {
                n,
                bound: nonasymptotic_bound(&law, n, delta)?,
            }),
            None => None,
        };
        levels.push(Level {
            delta,
            excess_band: quantile_band(&law, delta)?,
            projector_band: projector_quantile_band(&law, delta)?,
            threshold,
            bound_at_n_star,
            bound_at_n,
        });
    }

    Ok(Analysis {
        model_kind: model.kind(),
        d: spectral.dim(),
        k,
        eigenvalues: spectral.eigenvalues().iter().copied().collect(),
        gap,
        mean_h_sq: law.mean_h_sq,
        tau_sq: law.tau_sq,
        mean_scaled_excess: law.mean_scaled_excess(),
        mean_scaled_projector: law.mean_scaled_projector(),
        variance,
        variance_note,
        gaussian_closed_forms: closed,
        s_param,
        threshold_note,
        levels,
        law,
    })
}

impl Output for Analysis {
    fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "delta",
            "excess_lower",
            "excess_upper",
            "projector_lower",
            "projector_upper",
            "n_star",
            "bound_at_n_star",
        ])?;
        let opt = |x: Option<String>| x.unwrap_or_default();
        for l in &self.levels {
            w.write_record([
                format!("{:?}", l.delta),
                format!("{:?}", l.excess_band.lower),
                format!("{:?}", l.excess_band.upper),
                format!("{:?}", l.projector_band.lower),
                format!("{:?}", l.projector_band.upper),
                opt(l.threshold.as_ref().map(|t| t.n_star.to_string())),
                opt(l.bound_at_n_star.map(|b| format!("{b:?}"))),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    fn strip_timing(&mut self) {}
}

#[derive(Debug, Serialize)]
pub struct Simulation {
    pub law_mean_scaled_excess: f64,
    pub law_mean_scaled_projector: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clt: Option<CltReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clt_note: Option<String>,
    pub quantile_checks: Vec<QuantileCheck>,
    pub nonasymptotic: Vec<NonasymptoticReport>,
    pub summary: SimulationSummary,
}

pub fn simulate(
    model: &DistributionModel,
    k: usize,
    n: usize,
    trials: usize,
    deltas: &[f64],
    seed: u64,
) -> Result<Simulation> {
    let law = exact_law(model, k)?;
    let summary = run_trials(model, n, trials, seed, k)?;
    let (clt, clt_note) = match clt_report(&summary, &law) {
        Ok(c) => (Some(c), None),
        Err(e @ Error::InsufficientData { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let nonasymptotic = deltas
        .iter()
        .map(|&d| nonasymptotic_report(&summary, &law, d))
        .collect::<grassrisk::Result<Vec<_>>>()?;
    Ok(Simulation {
        law_mean_scaled_excess: law.mean_scaled_excess(),
        law_mean_scaled_projector: law.mean_scaled_projector(),
        clt,
        clt_note,
        quantile_checks: risk_quantile_report(&summary, &law, deltas)?,
        nonasymptotic,
        summary,
    })
}

impl Output for Simulation {
    fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        Ok(self.summary.write_csv(out)?)
    }

    fn strip_timing(&mut self) {
        self.summary.strip_timing();
    }
}

/// Analysis of a named model family, with an optional simulation.
#[derive(Debug, Serialize)]
pub struct ModelReport {
    pub analysis: Analysis,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<Simulation>,
}

impl Output for ModelReport {
    fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        match &self.simulation {
            Some(s) => s.write_csv(out),
            None => self.analysis.write_csv(out),
        }
    }

    fn strip_timing(&mut self) {
        if let Some(s) = &mut self.simulation {
            s.strip_timing();
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Verification {
    pub trials: usize,
    pub passed: bool,
    /// `suite/check` for every gated check that failed.
    pub gated_failures: Vec<String>,
    /// `suite/check` for ungated checks that failed.
    pub known_violations: Vec<String>,
    pub suites: Vec<SuiteReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite_seconds: Option<BTreeMap<String, f64>>,
}

fn to_suite(s: SuiteName) -> Suite {
    match s {
        SuiteName::Geometry => Suite::Geometry,
        SuiteName::Derivatives => Suite::Derivatives,
        SuiteName::Hessian => Suite::Hessian,
        SuiteName::Perturbation => Suite::Perturbation,
        SuiteName::Concordance => Suite::Concordance,
    }
}

pub fn selected_suites(names: &[SuiteName]) -> Vec<Suite> {
    if names.is_empty() {
        Suite::ALL.to_vec()
    } else {
        names.iter().map(|&s| to_suite(s)).collect()
    }
}

/// Run the suites; suite `i` of the full list uses `derived_seed(seed, i)`
/// whether or not the others are selected.
pub fn verify(suites: &[Suite], trials: usize, seed: u64, overrides: &Overrides) -> Verification {
    let mut reports = Vec::with_capacity(suites.len());
    let mut seconds = BTreeMap::new();
    for &suite in suites {
        let index = Suite::ALL.iter().position(|s| *s == suite).unwrap_or(0);
        let start = Instant::now();
        reports.push(suite.run(derived_seed(seed, index as u64), trials, overrides));
        seconds.insert(suite.name().to_string(), start.elapsed().as_secs_f64());
    }
    let mut gated_failures = Vec::new();
    let mut known_violations = Vec::new();
    for r in &reports {
        for c in r.checks.iter().filter(|c| !c.passed()) {
            let label = format!("{}/{}", r.suite, c.name);
            if c.gated {
                gated_failures.push(label);
            } else {
                known_violations.push(label);
            }
        }
        if r.error_count > 0 {
            gated_failures.push(format!("{}/errors", r.suite));
        }
    }
    Verification {
        trials,
        passed: reports.iter().all(|r| r.passed),
        gated_failures,
        known_violations,
        suites: reports,
        suite_seconds: Some(seconds),
    }
}

impl Output for Verification {
    fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "suite",
            "check",
            "gated",
            "tolerance",
            "count",
            "failures",
            "worst",
            "passed",
        ])?;
        for r in &self.suites {
            for c in &r.checks {
                w.write_record([
                    r.suite.clone(),
                    c.name.clone(),
                    c.gated.to_string(),
                    format!("{:?}", c.tolerance),
                    c.count.to_string(),
                    c.failures.to_string(),
                    format!("{:?}", c.worst),
                    c.passed().to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    fn strip_timing(&mut self) {
        self.suite_seconds = None;
    }

    fn passed(&self) -> bool {
        self.passed
    }
}
