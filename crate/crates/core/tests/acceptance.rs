//! Acceptance runs, one line per criterion. Runs without the libtest
//! harness so the lines are always printed; exits non-zero if any
//! criterion fails.

use std::f64::consts::FRAC_PI_4;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use grassrisk::models::DistributionModel;
use grassrisk::moments::*;
use grassrisk::montecarlo::*;
use grassrisk::rayleigh::psi;
use grassrisk::risk::SpectralModel;
use grassrisk::rng;
use rand::Rng;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs()
}

fn suite_detail(r: &SuiteReport) -> String {
    let mut parts: Vec<String> = r
        .checks
        .iter()
        .map(|c| {
            format!(
                "{} {}/{} worst {:.2e}",
                c.name, c.failures, c.count, c.worst
            )
        })
        .collect();
    if r.error_count > 0 {
        parts.push(format!("{} errors, first: {}", r.error_count, r.errors[0]));
    }
    parts.join("; ")
}

fn budget(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed < Duration::from_secs(limit_secs)
}

fn timed_suite(
    f: fn(u64, usize) -> SuiteReport,
    seed: u64,
    trials: usize,
    limit_secs: u64,
) -> Verdict {
    let start = Instant::now();
    let r = f(seed, trials);
    let elapsed = start.elapsed();
    verdict(
        r.all_checks_passed() && budget(elapsed, limit_secs),
        format!("{:.2}s; {}", elapsed.as_secs_f64(), suite_detail(&r)),
    )
}

fn geometry() -> Verdict {
    timed_suite(geometry_suite, 101, 500, 30)
}

fn derivatives() -> Verdict {
    timed_suite(derivative_suite, 102, 200, 30)
}

fn hessian_eigenstructure() -> Verdict {
    let r = hessian_suite(103, 50);
    verdict(r.all_checks_passed(), suite_detail(&r))
}

fn self_concordance() -> Verdict {
    timed_suite(concordance_suite, 104, 1000, 120)
}

fn psi_endpoints() -> Verdict {
    let small = psi(1e-6).unwrap();
    let edge = psi(FRAC_PI_4 - 1e-9).unwrap();
    verdict(
        (small - 1.0).abs() <= 1e-5 && (edge - 1.485).abs() <= 1e-3,
        format!("psi(1e-6) = {small:.9}, psi(pi/4 - 1e-9) = {edge:.6}"),
    )
}

struct Run {
    summary: SimulationSummary,
    law: AsymptoticLaw,
    elapsed: Duration,
}

fn gaussian_run(eigenvalues: &[f64], k: usize, n: usize, trials: usize, seed: u64) -> Run {
    let model = DistributionModel::gaussian_diagonal(eigenvalues).unwrap();
    let spectral = model.spectral_model(k).unwrap();
    let law = asymptotic_law(&spectral, &gaussian_fourth_moments(&spectral).unwrap()).unwrap();
    let start = Instant::now();
    let summary = run_trials(&model, n, trials, seed, k).unwrap();
    Run {
        summary,
        law,
        elapsed: start.elapsed(),
    }
}

fn canonical_run() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| gaussian_run(&[2.0, 1.0], 1, 5000, 5000, 20_240_601))
}

fn large_run() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| gaussian_run(&[3.0, 2.0, 1.0, 0.5, 0.25], 2, 10_000, 2000, 20_240_602))
}

fn clt_covariance() -> Verdict {
    let run = canonical_run();
    let c = clt_report(&run.summary, &run.law).unwrap();
    verdict(
        c.relative_frobenius_error <= 0.1 && c.max_abs_mean_z <= 4.0 && budget(run.elapsed, 120),
        format!(
            "{:.2}s; relative Frobenius error {:.4}, max |mean z| {:.2}, max QQ deviation {:.3}, undefined {}",
            run.elapsed.as_secs_f64(),
            c.relative_frobenius_error,
            c.max_abs_mean_z,
            c.max_qq_deviation,
            run.summary.undefined_log_count
        ),
    )
}

fn excess_mean() -> Verdict {
    let (a, b) = (canonical_run(), large_run());
    let (ma, mb) = (a.summary.mean_scaled_excess, b.summary.mean_scaled_excess);
    // Independent values: λ1λ2/(2(λ1−λ2)) = 1 and Σ λ_j λ_i /(2(λ_j − λ_i)).
    let pass = within(ma, 1.0, 0.1)
        && within(mb, 2.6626, 0.1)
        && within(a.law.mean_scaled_excess(), 1.0, 1e-12)
        && budget(a.elapsed + b.elapsed, 300);
    verdict(
        pass,
        format!(
            "{:.2}s; diag(2,1): {ma:.4} vs 1.0; diag(3,2,1,.5,.25): {mb:.4} vs 2.6626 (law {:.4})",
            (a.elapsed + b.elapsed).as_secs_f64(),
            b.law.mean_scaled_excess()
        ),
    )
}

fn quantile_containment() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, run) in [
        ("diag(2,1)", canonical_run()),
        ("diag(3,2,1,.5,.25)", large_run()),
    ] {
        for q in risk_quantile_report(&run.summary, &run.law, &[0.05, 0.02]).unwrap() {
            pass &= q.contained && q.projector_contained && q.band_ratio == 64.0;
            parts.push(format!(
                "{name} δ={}: {:.3} in [{:.3}, {:.3}] {}, projector {:.3} in [{:.3}, {:.3}] {}",
                q.delta,
                q.scaled_excess_quantile,
                q.band.lower,
                q.band.upper,
                q.contained,
                q.scaled_projector_quantile,
                q.projector_band.lower,
                q.projector_band.upper,
                q.projector_contained
            ));
        }
    }
    verdict(pass, parts.join("; "))
}

fn spiked_law() -> Verdict {
    let (eta, sigma) = ([4.0, 2.0], 1.0_f64);
    let spec = SpikeSpec::new(eta.to_vec(), sigma, 6, Latent::Gaussian).unwrap();
    let (tensors, spectral) = spiked_fourth_moments(&spec).unwrap();
    let law = asymptotic_law(&spectral, &tensors).unwrap();
    let model = DistributionModel::spiked(spec).unwrap();
    let summary = run_trials(&model, 10_000, 2000, 20_240_603, 2).unwrap();
    let cov = summary.coord_covariance.as_ref().unwrap();
    let s2 = sigma * sigma;

    let mut diag_ok = true;
    let mut worst_off: f64 = 0.0;
    for a in 0..cov.nrows() {
        let j = a % 2;
        let target = s2 * (1.0 + s2 / (eta[j] * eta[j]));
        diag_ok &= within(cov[(a, a)], target, 0.1);
        for b in 0..cov.ncols() {
            if a != b {
                worst_off = worst_off.max(cov[(a, b)].abs());
            }
        }
    }
    let target_mean: f64 = 0.5 * 4.0 * eta.iter().map(|e| s2 * (e + s2 / e)).sum::<f64>();
    let mean = summary.mean_scaled_excess;
    let pass = diag_ok && worst_off <= 0.05 && within(mean, target_mean, 0.1);
    let diag: Vec<String> = cov.diagonal().iter().map(|v| format!("{v:.3}")).collect();
    let exact: Vec<String> = law
        .g_cov
        .diagonal()
        .iter()
        .map(|v| format!("{v:.3}"))
        .collect();
    verdict(
        pass,
        format!(
            "covariance diagonal [{}] vs stated [{:.4}, {:.4}] per row (exact law [{}]); max off-diagonal {worst_off:.4}; \
             mean n·excess {mean:.3} vs stated {target_mean:.3} (exact law {:.3})",
            diag.join(", "),
            s2 * (1.0 + s2 / 16.0),
            s2 * (1.0 + s2 / 4.0),
            exact.join(", "),
            law.mean_scaled_excess()
        ),
    )
}

fn random_gaussian_model(r: &mut impl Rng) -> SpectralModel {
    loop {
        let d = r.random_range(2..=8);
        let k = r.random_range(1..d.min(4));
        let mut l: Vec<f64> = (0..d).map(|_| r.random_range(0.1..5.0)).collect();
        l.sort_by(|a, b| b.total_cmp(a));
        let m = SpectralModel::diagonal(&l, k).unwrap();
        if m.gap() > 0.05 {
            return m;
        }
    }
}

fn variance_dual_path() -> Verdict {
    let mut r = rng::stream(110);
    let (mut worst_v, mut worst_nu): (f64, f64) = (0.0, 0.0);
    let mut ordered = true;
    for _ in 0..50 {
        let model = random_gaussian_model(&mut r);
        let t = gaussian_fourth_moments(&model).unwrap();
        let cf = gaussian_closed_forms(&model).unwrap();
        let p = variance_params(&model, &t, DEFAULT_RESTARTS, 7).unwrap();
        worst_v = worst_v.max((p.v_big.value - cf.v_big).abs() / cf.v_big);
        worst_nu = worst_nu.max((p.nu.value - cf.nu).abs() / cf.nu);
        ordered &= p.ordering_holds && cf.v_big >= cf.nu;
    }
    let three_one = SpectralModel::diagonal(&[3.0, 1.0], 1).unwrap();
    let t = gaussian_fourth_moments(&three_one).unwrap();
    let closed = gaussian_closed_forms(&three_one).unwrap().nu;
    let ascent = variance_param_nu(&three_one, &t, DEFAULT_RESTARTS, 0)
        .unwrap()
        .value;
    verdict(
        worst_v <= 1e-6
            && worst_nu <= 1e-4
            && ordered
            && closed == 2.5
            && (ascent - 2.5).abs() <= 1e-12,
        format!(
            "worst relative V {worst_v:.2e}, worst relative nu {worst_nu:.2e}, V >= nu {ordered}; \
             diag(3,1): closed {closed}, ascent {ascent:.15}"
        ),
    )
}

fn nonasymptotic_consistency() -> Verdict {
    let delta = 0.1;
    let model = DistributionModel::gaussian_diagonal(&[2.0, 1.0]).unwrap();
    let spectral = model.spectral_model(1).unwrap();
    let tensors = gaussian_fourth_moments(&spectral).unwrap();
    let law = asymptotic_law(&spectral, &tensors).unwrap();
    let params = variance_params(&spectral, &tensors, DEFAULT_RESTARTS, 11).unwrap();
    let sampler = model.vector_sampler().unwrap();
    let sigma = spectral.covariance();
    let s_param = s_param_monte_carlo(sampler, &sigma, 200_000, 111).unwrap();
    let estimator = MaxDeviationEstimator::new(sampler, sigma, DEFAULT_REPLICATES, 112).unwrap();
    let threshold = sample_size_threshold(
        &spectral,
        params.v_big.value,
        params.nu.value,
        s_param,
        &|n| Ok(estimator.r_of_n(n)),
        delta,
    )
    .unwrap();
    let summary = run_trials(&model, threshold.n_star, 2000, 20_240_611, 1).unwrap();
    let report = nonasymptotic_report(&summary, &law, delta).unwrap();
    verdict(
        report.holds,
        format!(
            "n* = {} (S ≈ {s_param:.3}, r(n*) ≈ {:.4}); excess quantile {:.3e} <= bound {:.3e}",
            threshold.n_star, threshold.r_at_n_star, report.excess_quantile, report.bound
        ),
    )
}

fn davis_kahan_identities() -> Verdict {
    let r = perturbation_suite(112, 1000);
    verdict(r.all_checks_passed(), suite_detail(&r))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("geometry identities", geometry),
        ("derivative oracles", derivatives),
        ("Hessian eigenstructure", hessian_eigenstructure),
        ("self-concordance", self_concordance),
        ("psi endpoints", psi_endpoints),
        ("CLT covariance match", clt_covariance),
        ("excess-risk mean", excess_mean),
        ("quantile containment", quantile_containment),
        ("spiked-model law", spiked_law),
        ("variance parameters dual path", variance_dual_path),
        ("finite-sample bound consistency", nonasymptotic_consistency),
        ("Davis-Kahan and angle identities", davis_kahan_identities),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail
        );
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
