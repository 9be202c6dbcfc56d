use grassrisk::linalg::{gaussian_matrix, random_orthogonal};
use grassrisk::models::{sample_gaussian, sample_spiked, EdgeGraph};
use grassrisk::moments::*;
use grassrisk::risk::SpectralModel;
use grassrisk::rng;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

fn random_spectrum(r: &mut impl Rng, d: usize) -> Vec<f64> {
    let mut l: Vec<f64> = (0..d).map(|_| r.random_range(0.1..5.0)).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    l
}

fn random_model(r: &mut impl Rng) -> SpectralModel {
    loop {
        let d = r.random_range(2..=8);
        let k = r.random_range(1..d.min(4));
        let m = SpectralModel::diagonal(&random_spectrum(r, d), k).unwrap();
        // keep the gap away from zero so closed forms stay well conditioned
        if m.gap() > 0.05 {
            return m;
        }
    }
}

#[test]
fn wick_tensors_match_large_gaussian_sample() {
    let mut r = rng::stream(11);
    let q = random_orthogonal(&mut r, 4);
    let lam = [3.0, 2.0, 1.0, 0.5];
    let model = SpectralModel::from_parts(lam.to_vec(), q.clone(), 2).unwrap();
    let data = sample_gaussian(&model.covariance(), 1_000_000, 12).unwrap();
    let emp = empirical_fourth_moments(&data, &model).unwrap();
    let wick = gaussian_fourth_moments(&model).unwrap();
    let pairs = [
        (emp.gamma().unwrap(), wick.gamma().unwrap()),
        (&emp.lambda, &wick.lambda),
        (emp.omega().unwrap(), wick.omega().unwrap()),
    ];
    for (e, w) in pairs {
        let scale = w.entries().iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        for (a, b) in e.entries().iter().zip(w.entries()) {
            assert!(
                (a - b).abs() <= 0.02 * b.abs().max(0.1 * scale),
                "{a} vs {b}"
            );
        }
    }
}

#[test]
fn spiked_sample_lambda_matches_formulas() {
    for latent in [Latent::Gaussian, Latent::Rademacher] {
        let spec = SpikeSpec::new(vec![4.0, 2.0], 1.0, 5, latent).unwrap();
        let (exact, model) = spiked_fourth_moments(&spec).unwrap();
        let data = sample_spiked(&spec, 100_000, 21).unwrap();
        let emp = empirical_fourth_moments(&data, &model).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let (a, b) = (emp.lambda_diag(i, j), exact.lambda_diag(i, j));
                assert!((a - b).abs() < 0.05 * b, "{latent:?} ({i},{j}): {a} vs {b}");
            }
        }
        let (a, b) = (
            emp.gamma().unwrap().get(0, 0, 0, 0),
            exact.gamma().unwrap().get(0, 0, 0, 0),
        );
        assert!((a - b).abs() < 0.05 * b, "{latent:?}: {a} vs {b}");
    }
}

#[test]
fn closed_forms_agree_with_tensor_routes() {
    let mut r = rng::stream(31);
    for _ in 0..50 {
        let model = random_model(&mut r);
        let t = gaussian_fourth_moments(&model).unwrap();
        let cf = gaussian_closed_forms(&model).unwrap();
        let v = variance_param_v(&model, &t).unwrap();
        let nu = variance_param_nu(&model, &t, 16, 5).unwrap();
        let spectrum = model.eigenvalues().as_slice().to_vec();
        assert!(
            (v.value - cf.v_big).abs() <= 1e-6 * cf.v_big,
            "V {spectrum:?} k={}: {} vs {}",
            model.k(),
            v.value,
            cf.v_big
        );
        assert!(
            (nu.value - cf.nu).abs() <= 1e-4 * cf.nu,
            "nu {spectrum:?} k={}: {} vs {}",
            model.k(),
            nu.value,
            cf.nu
        );
    }
}

#[test]
fn v_dominates_nu_on_random_spectra() {
    let mut r = rng::stream(32);
    for _ in 0..200 {
        let model = random_model(&mut r);
        let t = gaussian_fourth_moments(&model).unwrap();
        let p = variance_params(&model, &t, 4, 1).unwrap();
        assert!(p.ordering_holds, "{} < {}", p.v_big.value, p.nu.value);
    }
}

#[test]
fn v_bounds_random_unit_sampling() {
    let mut r = rng::stream(33);
    for eig in [vec![2.0, 1.0, 0.5], vec![3.0, 1.5, 1.0, 0.2]] {
        let model = SpectralModel::diagonal(&eig, 1).unwrap();
        let t = gaussian_fourth_moments(&model).unwrap();
        let v = variance_param_v(&model, &t).unwrap();
        let q = v_operator(&model, &t).unwrap();
        let mut best = f64::NEG_INFINITY;
        for _ in 0..100_000 {
            let x = gaussian_matrix(&mut r, q.nrows(), 1);
            let x = &x / x.norm();
            best = best.max((x.transpose() * &q * &x)[(0, 0)]);
        }
        assert!(best <= v.raw + 1e-12);
        assert!(best >= 0.95 * v.raw, "{best} vs {}", v.raw);
    }
}

#[test]
fn three_one_nu_is_exact() {
    let model = SpectralModel::diagonal(&[3.0, 1.0], 1).unwrap();
    let t = gaussian_fourth_moments(&model).unwrap();
    assert_eq!(gaussian_closed_forms(&model).unwrap().nu, 2.5);
    let nu = variance_param_nu(&model, &t, 64, 0).unwrap();
    assert!((nu.value - 2.5).abs() < 1e-12);
    assert!(nu.value <= variance_param_v(&model, &t).unwrap().value + 1e-8);
}

#[test]
fn nu_ascent_is_seed_reproducible() {
    let model = SpectralModel::diagonal(&[3.0, 2.0, 1.0, 0.5, 0.25], 2).unwrap();
    let t = gaussian_fourth_moments(&model).unwrap();
    let a = variance_param_nu(&model, &t, 8, 77).unwrap();
    let b = variance_param_nu(&model, &t, 8, 77).unwrap();
    assert_eq!(a, b);
}

/// Λ by direct enumeration of edge outcomes.
fn brute_force_lambda(w: &DMatrix<f64>, model: &SpectralModel) -> Vec<f64> {
    let d = w.nrows();
    let k = model.k();
    let e = model.eigenvectors();
    let total: f64 = (0..d)
        .flat_map(|a| (a + 1..d).map(move |b| (a, b)))
        .map(|(a, b)| w[(a, b)])
        .sum();
    let m = d - k;
    let mut out = vec![0.0; m * k * m * k];
    for a in 0..d {
        for b in (a + 1)..d {
            if w[(a, b)] == 0.0 {
                continue;
            }
            let p = w[(a, b)] / total;
            // u^T (e_a e_b^T + e_b e_a^T) v = u_a v_b + u_b v_a
            let form = |x: usize, y: usize| e[(a, x)] * e[(b, y)] + e[(b, x)] * e[(a, y)];
            let mut idx = 0;
            for i in 0..m {
                for j in 0..k {
                    for s in 0..m {
                        for t in 0..k {
                            out[idx] += p * form(k + i, j) * form(k + s, t);
                            idx += 1;
                        }
                    }
                }
            }
        }
    }
    out
}

#[test]
fn edge_tensors_match_enumeration() {
    let w = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 3.0, 1.0, 0.5, 3.0, 0.0, 2.0, 0.0, 1.0, 2.0, 0.0, 1.5, 0.5, 0.0, 1.5, 0.0,
        ],
    );
    let graph = EdgeGraph::new(w.clone()).unwrap();
    let model = SpectralModel::from_symmetric(&graph.mean_matrix(), 2).unwrap();
    let t = graph.exact_tensors(&model).unwrap();
    let brute = brute_force_lambda(&w, &model);
    for (a, b) in t.lambda.entries().iter().zip(&brute) {
        assert!((a - b).abs() < 1e-13, "{a} vs {b}");
    }
    assert_eq!(t.source, MomentSource::Generalized);
}

#[test]
fn spiked_band_matches_spiked_projector_formula() {
    let spec = SpikeSpec::new(vec![4.0, 2.0], 1.0, 6, Latent::Gaussian).unwrap();
    let (t, model) = spiked_fourth_moments(&spec).unwrap();
    let law = asymptotic_law(&model, &t).unwrap();
    let band = projector_quantile_band(&law, 0.05).unwrap();
    // Exact G variances are σ²(η_j + σ²)/η_j²; rows are constant.
    let var = |eta: f64| (eta + 1.0) / (eta * eta);
    let want = 4.0 * 4.0 * (var(4.0) + var(2.0)) + 8.0 * var(2.0) * 20f64.ln();
    assert!((band.scale - want).abs() < 1e-12);
    assert!((law.tau_sq - 1.5).abs() < 1e-14);
}

#[test]
fn tensors_serialize_round_trip() {
    let model = SpectralModel::diagonal(&[2.0, 1.0, 0.5], 1).unwrap();
    let t = gaussian_fourth_moments(&model).unwrap();
    let s = serde_json::to_string(&t).unwrap();
    let back: FourthMomentTensors = serde_json::from_str(&s).unwrap();
    assert_eq!(back, t);
    let dv = DVector::from_vec(vec![1.0]);
    assert_eq!(dv.len(), 1);
}
