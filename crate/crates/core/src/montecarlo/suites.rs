//! Randomized property suites over the geometry, the derivative formulas
//! and the inequalities near the minimizer. Each suite reports counts and
//! worst residuals per check instead of stopping at the first failure.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fd;
use crate::grassmann::{
    self, exp_map, log_map, orthonormalize, parallel_transport, parallel_transport_back,
    principal_angles, project_horizontal, GrassmannPoint, TangentLift,
};
use crate::linalg::{self, gaussian_matrix, random_orthogonal};
use crate::rayleigh::{self, BlockRayleigh, Orientation};
use crate::risk::{self, SpectralModel};
use crate::rng;
use crate::tolerances;

/// Signature of [`parallel_transport`], injectable for mutation tests.
pub type TransportFn = fn(&GrassmannPoint, &TangentLift, f64, &TangentLift) -> Result<TangentLift>;

/// Tolerance overrides keyed by check name.
pub type Overrides = BTreeMap<String, f64>;

/// How a check value is compared with its tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    /// Passes when `value ≤ tolerance`; worst is the largest value.
    Residual,
    /// Passes when `value ≥ −tolerance`; worst is the smallest value.
    Slack,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckStats {
    pub name: String,
    pub sense: Sense,
    pub tolerance: f64,
    /// Whether a failure fails the suite.
    pub gated: bool,
    pub count: usize,
    pub failures: usize,
    pub worst: f64,
}

impl CheckStats {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub trials: usize,
    pub checks: Vec<CheckStats>,
    /// Instances whose evaluation raised an error (first few messages).
    pub errors: Vec<String>,
    pub error_count: usize,
    /// All gated checks passed and no instance errored.
    pub passed: bool,
    /// Ungated checks that failed; these are expected to fail.
    pub known_violations: Vec<String>,
}

impl SuiteReport {
    pub fn check(&self, name: &str) -> Option<&CheckStats> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// True when every check passed, gated or not.
    pub fn all_checks_passed(&self) -> bool {
        self.error_count == 0 && self.checks.iter().all(CheckStats::passed)
    }
}

struct CheckDef {
    name: &'static str,
    sense: Sense,
    tolerance: f64,
    gated: bool,
}

const fn residual(name: &'static str, tolerance: f64) -> CheckDef {
    CheckDef {
        name,
        sense: Sense::Residual,
        tolerance,
        gated: true,
    }
}

const fn slack(name: &'static str, tolerance: f64) -> CheckDef {
    CheckDef {
        name,
        sense: Sense::Slack,
        tolerance,
        gated: true,
    }
}

const fn ungated(def: CheckDef) -> CheckDef {
    CheckDef {
        gated: false,
        ..def
    }
}

const MAX_ERROR_MESSAGES: usize = 10;

/// Evaluate `instance` on `trials` independent streams and fold the
/// observations in instance order.
fn run_suite<F>(
    suite: &str,
    seed: u64,
    trials: usize,
    defs: &[CheckDef],
    overrides: &Overrides,
    instance: F,
) -> SuiteReport
where
    F: Fn(&mut ChaCha8Rng) -> Result<Vec<(usize, f64)>> + Sync,
{
    let outcomes: Vec<Result<Vec<(usize, f64)>>> = (0..trials)
        .into_par_iter()
        .map(|t| instance(&mut rng::derived_stream(seed, t as u64)))
        .collect();
    let mut checks: Vec<CheckStats> = defs
        .iter()
        .map(|d| CheckStats {
            name: d.name.to_string(),
            sense: d.sense,
            tolerance: overrides.get(d.name).copied().unwrap_or(d.tolerance),
            gated: d.gated,
            count: 0,
            failures: 0,
            worst: match d.sense {
                Sense::Residual => 0.0,
                Sense::Slack => f64::INFINITY,
            },
        })
        .collect();
    let mut errors = Vec::new();
    let mut error_count = 0;
    for (t, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(obs) => {
                for (idx, value) in obs {
                    let c = &mut checks[idx];
                    c.count += 1;
                    let ok = match c.sense {
                        Sense::Residual => value <= c.tolerance,
                        Sense::Slack => value >= -c.tolerance,
                    };
                    if !ok {
                        c.failures += 1;
                    }
                    c.worst = match c.sense {
                        Sense::Residual => c.worst.max(value),
                        Sense::Slack => c.worst.min(value),
                    };
                    if value.is_nan() {
                        c.worst = f64::NAN;
                    }
                }
            }
            Err(e) => {
                error_count += 1;
                if errors.len() < MAX_ERROR_MESSAGES {
                    errors.push(format!("instance {t}: {e}"));
                }
            }
        }
    }
    let passed = error_count == 0 && checks.iter().filter(|c| c.gated).all(CheckStats::passed);
    let known_violations = checks
        .iter()
        .filter(|c| !c.gated && !c.passed())
        .map(|c| c.name.clone())
        .collect();
    SuiteReport {
        suite: suite.to_string(),
        seed,
        trials,
        checks,
        errors,
        error_count,
        passed,
        known_violations,
    }
}

fn random_dims(rng: &mut ChaCha8Rng) -> (usize, usize) {
    let d = rng.random_range(2..=8);
    let k = rng.random_range(1..=(d - 1).min(3));
    (d, k)
}

fn random_point(rng: &mut ChaCha8Rng, d: usize, k: usize) -> Result<GrassmannPoint> {
    orthonormalize(&gaussian_matrix(rng, d, k))
}

/// Horizontal lift at `u` whose largest singular value is `theta`.
fn lift_with_angle(rng: &mut ChaCha8Rng, u: &GrassmannPoint, theta: f64) -> Result<TangentLift> {
    let (d, k) = u.basis().shape();
    let raw = project_horizontal(u, &gaussian_matrix(rng, d, k))?;
    let top = linalg::singular_values(raw.delta())[0];
    Ok(raw.scaled(theta / top))
}

fn random_symmetric(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, d, d);
    (&g + g.transpose()) * 0.5
}

/// Random spectrum in `[0.1, 5]` with `λ_k − λ_{k+1} ≥ min_gap`, rotated
/// by a Haar orthogonal matrix.
fn random_model(rng: &mut ChaCha8Rng, d: usize, k: usize, min_gap: f64) -> Result<SpectralModel> {
    loop {
        let mut vals: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..5.0)).collect();
        vals.sort_by(|a, b| b.total_cmp(a));
        if vals[k - 1] - vals[k] >= min_gap {
            return SpectralModel::from_parts(vals, random_orthogonal(rng, d), k);
        }
    }
}

fn subspace_gap(u: &GrassmannPoint, v: &GrassmannPoint) -> Result<f64> {
    Ok(principal_angles(u, v)?.max())
}

const GEOMETRY_CHECKS: [CheckDef; 8] = [
    residual("exp_log_roundtrip", tolerances::ROUNDTRIP),
    residual("log_exp_roundtrip", tolerances::ROUNDTRIP),
    residual("distance_is_log_norm", tolerances::IDENTITY),
    residual("transport_isometry", tolerances::IDENTITY),
    residual("transport_horizontal", tolerances::TRANSPORT_HORIZONTAL),
    residual("transport_matches_velocity", tolerances::ROUNDTRIP),
    residual("geodesic_constant_speed", tolerances::IDENTITY),
    residual("representative_invariance", tolerances::IDENTITY),
];

/// Exp/log inversion, metric consistency, transport and representative
/// invariance on random instances with `d ≤ 8`, `k ≤ 3`.
pub fn geometry_suite(seed: u64, trials: usize) -> SuiteReport {
    Suite::Geometry.run(seed, trials, &Overrides::new())
}

/// [`geometry_suite`] with a caller-supplied transport.
pub fn geometry_suite_with(seed: u64, trials: usize, transport: TransportFn) -> SuiteReport {
    run_suite(
        "geometry",
        seed,
        trials,
        &GEOMETRY_CHECKS,
        &Overrides::new(),
        |rng| geometry_instance(rng, transport),
    )
}

fn geometry_instance(rng: &mut ChaCha8Rng, transport: TransportFn) -> Result<Vec<(usize, f64)>> {
    let (d, k) = random_dims(rng);
    let u = random_point(rng, d, k)?;
    let theta = rng.random_range(0.05..1.4);
    let delta = lift_with_angle(rng, &u, theta)?;
    let v = exp_map(&u, &delta, 1.0)?;
    let mut out = Vec::with_capacity(GEOMETRY_CHECKS.len());

    let log = log_map(&u, &v)?;
    out.push((0, subspace_gap(&exp_map(&u, &log, 1.0)?, &v)?));
    out.push((
        1,
        (log.delta() - delta.delta()).norm() / delta.norm().max(1.0),
    ));
    out.push((2, (grassmann::distance(&u, &v)? - log.norm()).abs()));

    let t = rng.random_range(0.1..1.0);
    let z1 = project_horizontal(&u, &gaussian_matrix(rng, d, k))?;
    let z2 = project_horizontal(&u, &gaussian_matrix(rng, d, k))?;
    let (z1, z2) = (z1.scaled(1.0 / z1.norm()), z2.scaled(1.0 / z2.norm()));
    let p1 = transport(&u, &delta, t, &z1)?;
    let p2 = transport(&u, &delta, t, &z2)?;
    let isometry = (p1.inner(&p2)? - z1.inner(&z2)?)
        .abs()
        .max((p1.norm() - 1.0).abs())
        .max((p2.norm() - 1.0).abs());
    out.push((3, isometry));
    let end = exp_map(&u, &delta, t)?;
    out.push((4, linalg::max_abs(&(end.basis().transpose() * p1.delta()))));

    // The transported velocity at γ(t) points away from γ(0):
    // Log_{γ(t)}(γ(0)) = −t·P_t(Δ).
    let vel = transport(&u, &delta, t, &delta)?;
    let back = log_map(&end, &u)?;
    out.push((5, (back.delta() + vel.delta() * t).norm() / delta.norm()));

    let (t1, t2) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
    let speed = grassmann::distance(&exp_map(&u, &delta, t1)?, &exp_map(&u, &delta, t2)?)?;
    out.push((6, (speed - (t2 - t1).abs() * delta.norm()).abs()));

    let q = random_orthogonal(rng, k);
    let q2 = random_orthogonal(rng, k);
    let (uq, vq) = (u.rotated(&q), v.rotated(&q2));
    let a = principal_angles(&u, &v)?;
    let b = principal_angles(&uq, &vq)?;
    let angle_gap = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let log_gap = (log.rotated(&q).delta() - log_map(&uq, &vq)?.delta()).norm();
    let exp_gap = subspace_gap(&exp_map(&uq, &delta.rotated(&q), 1.0)?, &v)?;
    out.push((7, angle_gap.max(log_gap).max(exp_gap)));
    Ok(out)
}

const DERIVATIVE_CHECKS: [CheckDef; 7] = [
    residual("gradient_vs_fd", tolerances::FD_FIRST),
    residual("hessian_vs_fd", tolerances::FD_SECOND),
    residual("third_derivative_vs_fd", tolerances::FD_THIRD),
    residual("hessian_self_adjoint", tolerances::IDENTITY),
    slack("third_derivative_bound", 0.0),
    residual("profile_routes_agree", tolerances::PROFILE_ROUTES),
    slack("hessian_lipschitz", 0.0),
];

/// Number of probe directions for the Hessian Lipschitz estimate.
const LIPSCHITZ_PROBES: usize = 20;

/// Gradient, Hessian and third derivative against finite differences of
/// `t ↦ F(exp(V, ξ, t))`, plus the structural properties of each.
///
/// Relative errors are taken against `max(|exact|, 1e-2 |A|_F)` so that
/// derivatives which happen to vanish are compared on the scale of `A`.
pub fn derivative_suite(seed: u64, trials: usize) -> SuiteReport {
    Suite::Derivatives.run(seed, trials, &Overrides::new())
}

fn derivative_instance(rng: &mut ChaCha8Rng) -> Result<Vec<(usize, f64)>> {
    let d = rng.random_range(3..=8);
    let k = rng.random_range(1..=(d - 1).min(3));
    let a = random_symmetric(rng, d);
    let rq = BlockRayleigh::new(&a, k)?;
    let v = random_point(rng, d, k)?;
    let xi = project_horizontal(&v, &gaussian_matrix(rng, d, k))?;
    let xi = xi.scaled(1.0 / xi.norm());
    let scale = a.norm();
    let rel = |fd: f64, exact: f64| (fd - exact).abs() / exact.abs().max(1e-2 * scale);

    let g = |t: f64| {
        exp_map(&v, &xi, t)
            .and_then(|p| rq.value(&p))
            .unwrap_or(f64::NAN)
    };
    let g1 = rq.gradient(&v)?.inner(&xi)?;
    let hx = rq.hessian_apply(&v, &xi)?;
    let g2 = hx.inner(&xi)?;
    let g3 = rq.third_derivative(&v, &xi, &xi, &xi)?;
    let mut out = vec![
        (0, rel(fd::first(g, 1.0), g1)),
        (1, rel(fd::second(g, 1.0), g2)),
        (2, rel(fd::third(g, 1.0), g3)),
    ];

    let x1 = project_horizontal(&v, &gaussian_matrix(rng, d, k))?;
    let x2 = project_horizontal(&v, &gaussian_matrix(rng, d, k))?;
    let sym =
        (rq.hessian_apply(&v, &x1)?.inner(&x2)? - x1.inner(&rq.hessian_apply(&v, &x2)?)?).abs();
    out.push((3, sym / (scale * x1.norm() * x2.norm())));

    let x3 = project_horizontal(&v, &gaussian_matrix(rng, d, k))?;
    let t3 = rq.third_derivative(&v, &x1, &x2, &x3)?;
    out.push((
        4,
        4.0 * scale * x1.norm() * x2.norm() * x3.norm() - t3.abs(),
    ));

    let w = random_point(rng, d, k)?;
    if subspace_gap(&v, &w)? < FRAC_PI_2 - 1e-3 {
        let profile = rayleigh::geodesic_profile(&rq, &v, &w, &rayleigh::t_grid(11))?;
        out.push((5, profile.route_disagreement));
    }

    // ‖P⁻¹ Hess(exp(V, ξ)) P − Hess(V)‖_op ≤ 4|A|_F |ξ| on random probes.
    let step = xi.scaled(rng.random_range(0.05..1.0));
    let end = exp_map(&v, &step, 1.0)?;
    let mut estimate: f64 = 0.0;
    for _ in 0..LIPSCHITZ_PROBES {
        let eta = project_horizontal(&v, &gaussian_matrix(rng, d, k))?;
        let eta = eta.scaled(1.0 / eta.norm());
        let moved = parallel_transport(&v, &step, 1.0, &eta)?;
        let h_end = rq.hessian_apply(&end, &moved)?;
        let pulled = parallel_transport_back(&v, &step, 1.0, &h_end)?;
        let diff = pulled.delta() - rq.hessian_apply(&v, &eta)?.delta();
        estimate = estimate.max(diff.norm());
    }
    out.push((6, 4.0 * scale * step.norm() - estimate));
    Ok(out)
}

const HESSIAN_CHECKS: [CheckDef; 1] = [residual(
    "hessian_eigenpairs_at_optimum",
    tolerances::IDENTITY,
)];

/// `Hess F(U*)[ξ_ij] = δ_ij ξ_ij` on all `k(d−k)` basis tangents.
pub fn hessian_suite(seed: u64, trials: usize) -> SuiteReport {
    Suite::Hessian.run(seed, trials, &Overrides::new())
}

fn hessian_instance(rng: &mut ChaCha8Rng) -> Result<Vec<(usize, f64)>> {
    let (d, k) = random_dims(rng);
    let model = random_model(rng, d, k, 1e-3)?;
    let rq = BlockRayleigh::new(&model.covariance(), k)?;
    let u = model.u_star();
    let mut worst: f64 = 0.0;
    for pair in risk::hessian_spectrum_at_opt(&model)? {
        let h = rq.hessian_apply(&u, &pair.lift)?;
        worst = worst.max((h.delta() - pair.lift.delta() * pair.value).norm());
    }
    Ok(vec![(0, worst)])
}

const PERTURBATION_CHECKS: [CheckDef; 3] = [
    slack("davis_kahan", tolerances::DAVIS_KAHAN_SLACK),
    residual("angle_singular_identity", tolerances::IDENTITY),
    residual("schatten_routes_agree", tolerances::IDENTITY),
];

/// Davis–Kahan on perturbations inside its hypothesis, and the identity
/// between principal angles and the singular values of `P_U − P_V`.
pub fn perturbation_suite(seed: u64, trials: usize) -> SuiteReport {
    Suite::Perturbation.run(seed, trials, &Overrides::new())
}

fn perturbation_instance(rng: &mut ChaCha8Rng) -> Result<Vec<(usize, f64)>> {
    let (d, k) = random_dims(rng);
    let model = random_model(rng, d, k, 0.05)?;
    let e = random_symmetric(rng, d);
    let size = rng.random_range(0.0..0.5) * model.gap();
    let s = model.covariance() + &e * (size / linalg::sym_op_norm(&e));
    let dk = risk::davis_kahan_check(&model, &s)?;
    let u = random_point(rng, d, k)?;
    let v = random_point(rng, d, k)?;
    let mut schatten: f64 = 0.0;
    for p in [1.0, 2.0, 3.5, f64::INFINITY] {
        let a = risk::projector_schatten_distance(&u, &v, p)?;
        let b = risk::projector_schatten_direct(&u, &v, p)?;
        schatten = schatten.max((a - b).abs());
    }
    Ok(vec![
        (0, dk.slack()),
        (1, risk::angle_singular_residual(&u, &v)?),
        (2, schatten),
    ])
}

/// Grid size for the self-concordance margins.
const CONCORDANCE_GRID: usize = 50;

const CONCORDANCE_CHECKS: [CheckDef; 9] = [
    slack("margin_from_minimizer", tolerances::MARGIN_SLACK),
    slack("g2_positive_from_minimizer", 0.0),
    slack(
        "integrated_bounds_from_minimizer",
        tolerances::SANDWICH_SLACK,
    ),
    slack("sandwich_from_minimizer", tolerances::SANDWICH_SLACK),
    ungated(slack("margin_to_minimizer", tolerances::MARGIN_SLACK)),
    slack("g2_positive_to_minimizer", 0.0),
    ungated(slack(
        "integrated_bounds_to_minimizer",
        tolerances::SANDWICH_SLACK,
    )),
    ungated(slack("sandwich_to_minimizer", tolerances::SANDWICH_SLACK)),
    residual("small_angle_ratio", 1e-3),
];

/// Self-concordance margins, positivity of `g″`, the integrated bounds and
/// the `(4/5, 3/2)` sandwich along geodesics between a random minimizer
/// and a point at angle `θ_k ∈ (0, π/4)`, in both orientations.
pub fn concordance_suite(seed: u64, trials: usize) -> SuiteReport {
    Suite::Concordance.run(seed, trials, &Overrides::new())
}

fn concordance_instance(rng: &mut ChaCha8Rng) -> Result<Vec<(usize, f64)>> {
    let (d, k) = random_dims(rng);
    let model = random_model(rng, d, k, 0.05)?;
    let a = model.covariance();
    let rq = BlockRayleigh::new(&a, k)?;
    let v_star = model.u_star();
    let theta = rng.random_range(1e-3..FRAC_PI_4 - 1e-3);
    let xi = lift_with_angle(rng, &v_star, theta)?;
    let v = exp_map(&v_star, &xi, 1.0)?;
    let grid = rayleigh::t_grid(CONCORDANCE_GRID);
    let mut out = Vec::with_capacity(CONCORDANCE_CHECKS.len());
    for (offset, orientation) in [
        (0, Orientation::FromMinimizer),
        (4, Orientation::ToMinimizer),
    ] {
        let profile = rayleigh::concordance_profile(&rq, &v_star, &v, orientation, &grid)?;
        let min = |xs: &[f64]| xs.iter().copied().fold(f64::INFINITY, f64::min);
        out.push((offset, min(&profile.margin)));
        out.push((offset + 1, min(&profile.g2)));
        let sandwich = rayleigh::taylor_sandwich(&rq, &v_star, &v, orientation)?;
        out.push((offset + 2, sandwich.sharp_slack()));
        out.push((offset + 3, sandwich.slack()));
    }
    let near = exp_map(&v_star, &xi.scaled(1e-4 / theta), 1.0)?;
    let s = rayleigh::taylor_sandwich(&rq, &v_star, &near, Orientation::FromMinimizer)?;
    out.push((8, (s.actual / s.quad_term - 1.0).abs()));
    Ok(out)
}

/// The property suites, addressable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Geometry,
    Derivatives,
    Hessian,
    Perturbation,
    Concordance,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Geometry,
        Suite::Derivatives,
        Suite::Hessian,
        Suite::Perturbation,
        Suite::Concordance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Geometry => "geometry",
            Suite::Derivatives => "derivatives",
            Suite::Hessian => "hessian",
            Suite::Perturbation => "perturbation",
            Suite::Concordance => "concordance",
        }
    }

    fn checks(self) -> &'static [CheckDef] {
        match self {
            Suite::Geometry => &GEOMETRY_CHECKS,
            Suite::Derivatives => &DERIVATIVE_CHECKS,
            Suite::Hessian => &HESSIAN_CHECKS,
            Suite::Perturbation => &PERTURBATION_CHECKS,
            Suite::Concordance => &CONCORDANCE_CHECKS,
        }
    }

    pub fn check_names(self) -> Vec<&'static str> {
        self.checks().iter().map(|c| c.name).collect()
    }

    pub fn run(self, seed: u64, trials: usize, overrides: &Overrides) -> SuiteReport {
        let (name, defs) = (self.name(), self.checks());
        match self {
            Suite::Geometry => run_suite(name, seed, trials, defs, overrides, |rng| {
                geometry_instance(rng, parallel_transport)
            }),
            Suite::Derivatives => {
                run_suite(name, seed, trials, defs, overrides, derivative_instance)
            }
            Suite::Hessian => run_suite(name, seed, trials, defs, overrides, hessian_instance),
            Suite::Perturbation => {
                run_suite(name, seed, trials, defs, overrides, perturbation_instance)
            }
            Suite::Concordance => {
                run_suite(name, seed, trials, defs, overrides, concordance_instance)
            }
        }
    }
}

/// Reject override names that match no check of any suite.
pub fn validate_overrides(overrides: &Overrides) -> Result<()> {
    for (name, value) in overrides {
        if !Suite::ALL
            .iter()
            .any(|s| s.check_names().contains(&name.as_str()))
        {
            return Err(Error::InvalidConfig(format!("unknown tolerance `{name}`")));
        }
        if !(value.is_finite() && *value >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tolerance `{name}` must be a non-negative number"
            )));
        }
    }
    Ok(())
}
