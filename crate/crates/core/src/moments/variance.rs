//! The variance parameters 𝒱 and ν of the whitened empirical Hessian.
//!
//! Both are suprema over unit-Frobenius `M ∈ R^{(d−k)×k}`. The 𝒱 objective
//! is a quadratic form in `M`, so 𝒱 comes from a symmetric eigenproblem;
//! the ν objective is quartic and is maximized by multi-start projected
//! gradient ascent on the sphere, which yields a certified lower bound.
//!
//! The raw suprema are second moments. The reported parameters subtract
//! the squared mean (which is 1 at the optimum scaling), and ν is also
//! halved, which puts both on the scale of the Gaussian closed forms.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tensors::FourthMomentTensors;
use crate::error::{Error, Result};
use crate::linalg::{self, gaussian_matrix};
use crate::risk::SpectralModel;
use crate::{rng, tolerances};

/// Default number of random restarts for the ν ascent.
pub const DEFAULT_RESTARTS: usize = 64;

const MAX_ASCENT_STEPS: usize = 20_000;
const ARMIJO: f64 = 1e-4;
/// Stop when `window` steps gain less than `STALL` relative to `|f|`.
const STALL_WINDOW: usize = 50;
const STALL: f64 = 1e-14;

/// The 𝒱 eigenproblem solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VBig {
    /// `λ_max − 1`.
    pub value: f64,
    /// `λ_max` of the quadratic form.
    pub raw: f64,
    /// Unit maximizer, `(d−k) × k`.
    #[serde(with = "crate::serde_matrix")]
    pub certificate: DMatrix<f64>,
}

/// Best point found by the ν ascent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuEstimate {
    /// `(raw − 1)/2`.
    pub value: f64,
    /// `raw − 1`.
    pub variance: f64,
    /// Largest quartic objective value found.
    pub raw: f64,
    #[serde(with = "crate::serde_matrix")]
    pub certificate: DMatrix<f64>,
    /// Always true: ascent gives a lower bound on the supremum.
    pub is_heuristic: bool,
    pub restarts: usize,
    pub starts_tried: usize,
    pub best_start: String,
    /// Accepted steps on the winning start, and over all starts.
    pub ascent_steps: usize,
    pub total_steps: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceParams {
    pub v_big: VBig,
    pub nu: NuEstimate,
    /// `𝒱 ≥ ν − 1e-8`.
    pub ordering_holds: bool,
}

fn delta_matrix(model: &SpectralModel) -> DMatrix<f64> {
    let m = model.dim() - model.k();
    DMatrix::from_fn(m, model.k(), |i, j| model.delta(i, j))
}

/// Coefficient matrix of the 𝒱 quadratic form over `vec(M)` with
/// `a = i·k + j`, symmetrized.
pub fn v_operator(model: &SpectralModel, tensors: &FourthMomentTensors) -> Result<DMatrix<f64>> {
    model.require_gap()?;
    tensors.check_against(model)?;
    let gamma = tensors.gamma()?;
    let omega = tensors.omega()?;
    let lambda = &tensors.lambda;
    let (d, k) = (model.dim(), model.k());
    let m = d - k;
    let dl = delta_matrix(model);
    let at = |i: usize, j: usize| i * k + j;
    let mut q = DMatrix::<f64>::zeros(m * k, m * k);

    // Σ_{j,r,p} a_jrp Γ_jjrp with a_jrp = Σ_i m_ir m_ip / (δ_ij √(δ_ir δ_ip))
    for i in 0..m {
        for r in 0..k {
            for p in 0..k {
                let mut c = 0.0;
                for j in 0..k {
                    c += gamma.get(j, j, r, p) / dl[(i, j)];
                }
                q[(at(i, r), at(i, p))] += c / (dl[(i, r)] * dl[(i, p)]).sqrt();
            }
        }
    }
    // −2 Σ b_ijts Λ_ijts with b_ijts = m_is m_tj / (δ_ij √(δ_is δ_tj))
    for i in 0..m {
        for j in 0..k {
            for t in 0..m {
                for s in 0..k {
                    let c = -2.0 * lambda.get(i, j, t, s)
                        / (dl[(i, j)] * (dl[(i, s)] * dl[(t, j)]).sqrt());
                    q[(at(i, s), at(t, j))] += c;
                }
            }
        }
    }
    // Σ c_iql Ω_iiql with c_iql = Σ_j m_qj m_lj / (δ_ij √(δ_qj δ_lj))
    for qq in 0..m {
        for l in 0..m {
            for j in 0..k {
                let mut c = 0.0;
                for i in 0..m {
                    c += omega.get(i, i, qq, l) / dl[(i, j)];
                }
                q[(at(qq, j), at(l, j))] += c / (dl[(qq, j)] * dl[(l, j)]).sqrt();
            }
        }
    }
    Ok((&q + q.transpose()) * 0.5)
}

fn vec_of(mm: &DMatrix<f64>) -> nalgebra::DVector<f64> {
    let (m, k) = mm.shape();
    nalgebra::DVector::from_fn(m * k, |a, _| mm[(a / k, a % k)])
}

fn mat_of(v: &nalgebra::DVector<f64>, m: usize, k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, k, |i, j| v[i * k + j])
}

/// Raw 𝒱 objective at `M` (not normalized).
pub fn v_objective(
    model: &SpectralModel,
    tensors: &FourthMomentTensors,
    mm: &DMatrix<f64>,
) -> Result<f64> {
    let q = v_operator(model, tensors)?;
    check_shape(model, mm)?;
    let v = vec_of(mm);
    Ok(v.dot(&(&q * &v)))
}

fn check_shape(model: &SpectralModel, mm: &DMatrix<f64>) -> Result<()> {
    let want = (model.dim() - model.k(), model.k());
    if mm.shape() != want {
        return Err(Error::DimensionMismatch(format!(
            "M is {:?}, expected {want:?}",
            mm.shape()
        )));
    }
    Ok(())
}

pub fn variance_param_v(model: &SpectralModel, tensors: &FourthMomentTensors) -> Result<VBig> {
    let q = v_operator(model, tensors)?;
    let (raw, vec) = linalg::top_eigenpair(&q);
    let m = model.dim() - model.k();
    Ok(VBig {
        value: raw - 1.0,
        raw,
        certificate: mat_of(&vec, m, model.k()),
    })
}

/// The quartic ν objective with its gradient.
struct Quartic {
    m: usize,
    k: usize,
    weight: DMatrix<f64>,
    gamma: DMatrix<f64>,
    lambda: DMatrix<f64>,
    omega: DMatrix<f64>,
}

impl Quartic {
    fn new(model: &SpectralModel, tensors: &FourthMomentTensors) -> Result<Self> {
        model.require_gap()?;
        tensors.check_against(model)?;
        let (d, k) = (model.dim(), model.k());
        Ok(Self {
            m: d - k,
            k,
            weight: delta_matrix(model).map(|x| 1.0 / x.sqrt()),
            gamma: tensors.gamma()?.flattened(),
            lambda: tensors.lambda.flattened(),
            omega: tensors.omega()?.flattened(),
        })
    }

    fn flat(a: &DMatrix<f64>) -> nalgebra::DVector<f64> {
        vec_of(a)
    }

    /// `(f, ∂f/∂M)` at `M`.
    fn eval(&self, mm: &DMatrix<f64>, with_grad: bool) -> (f64, DMatrix<f64>) {
        let (m, k) = (self.m, self.k);
        let c = mm.component_mul(&self.weight);
        let k1 = c.tr_mul(&c);
        let k2 = &c * c.transpose();
        let v1 = Self::flat(&k1);
        let v2 = Self::flat(&k2);
        let gv1 = &self.gamma * &v1;
        let ov2 = &self.omega * &v2;
        let kron = k2.kronecker(&k1);
        let f = v1.dot(&gv1) - 2.0 * self.lambda.component_mul(&kron).sum() + v2.dot(&ov2);
        if !with_grad {
            return (f, DMatrix::zeros(0, 0));
        }
        let gtv1 = self.gamma.tr_mul(&v1);
        let otv2 = self.omega.tr_mul(&v2);
        let mut g1 = mat_of(&(gv1 + gtv1), k, k);
        let mut g2 = mat_of(&(ov2 + otv2), m, m);
        for a in 0..k {
            for b in 0..k {
                let mut s = 0.0;
                for t in 0..m {
                    for q in 0..m {
                        s += k2[(t, q)] * self.lambda[(t * k + a, q * k + b)];
                    }
                }
                g1[(a, b)] -= 2.0 * s;
            }
        }
        for a in 0..m {
            for b in 0..m {
                let mut s = 0.0;
                for x in 0..k {
                    for r in 0..k {
                        s += k1[(x, r)] * self.lambda[(a * k + x, b * k + r)];
                    }
                }
                g2[(a, b)] -= 2.0 * s;
            }
        }
        let dc = &c * (&g1 + g1.transpose()) + (&g2 + g2.transpose()) * &c;
        (f, dc.component_mul(&self.weight))
    }

    /// Projected gradient ascent on the unit sphere. Steps follow the
    /// Barzilai-Borwein rule, safeguarded by Armijo backtracking so the
    /// objective never decreases. Besides the gradient criterion the run
    /// stops when the objective stalls, which happens at maxima that are
    /// flat to second order and where the gradient decays only slowly.
    /// Returns `(value, point, steps)`.
    fn ascend(&self, start: &DMatrix<f64>) -> (f64, DMatrix<f64>, usize) {
        let mut x = start / start.norm();
        let (mut f, g) = self.eval(&x, true);
        let mut rg = &g - &x * linalg::inner(&g, &x);
        let mut step = 1.0 / f.abs().max(1.0);
        let mut prev: Option<(DMatrix<f64>, DMatrix<f64>)> = None;
        let mut steps = 0;
        let mut window_start = f;
        while steps < MAX_ASCENT_STEPS {
            if steps > 0 && steps % STALL_WINDOW == 0 {
                if f - window_start <= STALL * f.abs().max(1.0) {
                    break;
                }
                window_start = f;
            }
            let gn2 = rg.norm_squared();
            if gn2.sqrt() <= tolerances::ASCENT_GRADIENT * f.abs().max(1.0) {
                break;
            }
            if let Some((px, prg)) = &prev {
                let s = &x - px;
                let y = &rg - prg;
                let sy = -linalg::inner(&s, &y);
                if sy > 0.0 {
                    step = s.norm_squared() / sy;
                }
            }
            let mut trial = step;
            let mut accepted = None;
            while trial > 1e-18 {
                let cand = &x + &rg * trial;
                let cand = &cand / cand.norm();
                let (fc, _) = self.eval(&cand, false);
                if fc >= f + ARMIJO * trial * gn2 {
                    accepted = Some((cand, fc));
                    break;
                }
                trial *= 0.5;
            }
            let Some((cand, fc)) = accepted else { break };
            steps += 1;
            let (_, g) = self.eval(&cand, true);
            let new_rg = &g - &cand * linalg::inner(&g, &cand);
            prev = Some((
                std::mem::replace(&mut x, cand),
                std::mem::replace(&mut rg, new_rg),
            ));
            f = fc;
            step = trial;
        }
        (f, x, steps)
    }
}

/// Raw ν objective at `M` (not normalized).
pub fn nu_objective(
    model: &SpectralModel,
    tensors: &FourthMomentTensors,
    mm: &DMatrix<f64>,
) -> Result<f64> {
    check_shape(model, mm)?;
    Ok(Quartic::new(model, tensors)?.eval(mm, false).0)
}

/// ν by multi-start ascent. Starts: the 𝒱 certificate, every coordinate
/// matrix `E_ij`, and `restarts` Gaussian directions drawn from streams
/// derived from `seed`. Starts run in parallel; the best value wins, with
/// ties going to the earliest start.
pub fn variance_param_nu(
    model: &SpectralModel,
    tensors: &FourthMomentTensors,
    restarts: usize,
    seed: u64,
) -> Result<NuEstimate> {
    let quartic = Quartic::new(model, tensors)?;
    let (m, k) = (quartic.m, quartic.k);
    let mut starts: Vec<(String, DMatrix<f64>)> = Vec::new();
    starts.push((
        "v_certificate".into(),
        variance_param_v(model, tensors)?.certificate,
    ));
    for i in 0..m {
        for j in 0..k {
            let mut e = DMatrix::zeros(m, k);
            e[(i, j)] = 1.0;
            starts.push((format!("coordinate({i},{j})"), e));
        }
    }
    for r in 0..restarts {
        let mut g = rng::derived_stream(seed, r as u64);
        let mut x = gaussian_matrix(&mut g, m, k);
        if x.norm() == 0.0 {
            x[(0, 0)] = 1.0;
        }
        starts.push((format!("random({r})"), x));
    }
    let results: Vec<(f64, DMatrix<f64>, usize)> =
        starts.par_iter().map(|(_, s)| quartic.ascend(s)).collect();
    let mut best = 0;
    for (idx, (f, _, _)) in results.iter().enumerate() {
        if *f > results[best].0 {
            best = idx;
        }
    }
    let (raw, certificate, ascent_steps) = results[best].clone();
    let total_steps = results.iter().map(|r| r.2).sum();
    Ok(NuEstimate {
        value: 0.5 * (raw - 1.0),
        variance: raw - 1.0,
        raw,
        certificate,
        is_heuristic: true,
        restarts,
        starts_tried: starts.len(),
        best_start: starts[best].0.clone(),
        ascent_steps,
        total_steps,
        seed,
    })
}

pub fn variance_params(
    model: &SpectralModel,
    tensors: &FourthMomentTensors,
    restarts: usize,
    seed: u64,
) -> Result<VarianceParams> {
    let v_big = variance_param_v(model, tensors)?;
    let nu = variance_param_nu(model, tensors, restarts, seed)?;
    let ordering_holds = v_big.value >= nu.value - 1e-8;
    Ok(VarianceParams {
        v_big,
        nu,
        ordering_holds,
    })
}

/// Closed forms of 𝒱 and ν for centered Gaussian data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianClosedForms {
    pub v_big: f64,
    pub nu: f64,
    /// Zero-based `(i, j)` attaining the ν maximum.
    pub nu_argmax: (usize, usize),
}

pub fn gaussian_closed_forms(model: &SpectralModel) -> Result<GaussianClosedForms> {
    let gap = model.require_gap()?;
    let (d, k) = (model.dim(), model.k());
    let l = model.eigenvalues();
    let (lk, lk1) = (l[k - 1], l[k]);
    let mut v_big = 0.0;
    for s in 0..k {
        let denom = gap * (l[s] - lk1);
        if denom <= 0.0 {
            return Err(Error::DegenerateSpectrum(format!(
                "lambda_{} equals lambda_{}",
                s + 1,
                k + 1
            )));
        }
        let w = if s == k - 1 { 2.0 } else { 1.0 };
        v_big += w * lk * l[s] / denom;
    }
    for t in 0..(d - k) {
        let denom = gap * (lk - l[k + t]);
        if denom <= 0.0 {
            return Err(Error::DegenerateSpectrum(format!(
                "lambda_{} equals lambda_{}",
                k,
                k + t + 1
            )));
        }
        let w = if t == 0 { 2.0 } else { 1.0 };
        v_big += w * lk1 * l[k + t] / denom;
    }
    let mut nu = f64::NEG_INFINITY;
    let mut nu_argmax = (0, 0);
    for i in 0..(d - k) {
        for j in 0..k {
            let (a, b) = (l[j], l[k + i]);
            let val = (a * a + b * b) / ((a - b) * (a - b));
            if val > nu {
                nu = val;
                nu_argmax = (i, j);
            }
        }
    }
    Ok(GaussianClosedForms {
        v_big,
        nu,
        nu_argmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::tensors::gaussian_fourth_moments;

    fn setup(eig: &[f64], k: usize) -> (SpectralModel, FourthMomentTensors) {
        let model = SpectralModel::diagonal(eig, k).unwrap();
        let t = gaussian_fourth_moments(&model).unwrap();
        (model, t)
    }

    #[test]
    fn two_by_one_values() {
        let (model, t) = setup(&[2.0, 1.0], 1);
        let v = variance_param_v(&model, &t).unwrap();
        assert!((v.raw - 11.0).abs() < 1e-12);
        assert!((v.value - 10.0).abs() < 1e-12);
        let cf = gaussian_closed_forms(&model).unwrap();
        assert!((cf.v_big - 10.0).abs() < 1e-12);
        assert!((cf.nu - 5.0).abs() < 1e-12);
    }

    #[test]
    fn nu_three_one() {
        let (model, t) = setup(&[3.0, 1.0], 1);
        let cf = gaussian_closed_forms(&model).unwrap();
        assert_eq!(cf.nu, 2.5);
        let nu = variance_param_nu(&model, &t, 8, 1).unwrap();
        assert!((nu.value - 2.5).abs() < 1e-10);
        assert!(nu.is_heuristic);
    }

    #[test]
    fn coordinate_certificate_attains_closed_form() {
        let (model, t) = setup(&[3.0, 2.0, 1.0, 0.5, 0.25], 2);
        let cf = gaussian_closed_forms(&model).unwrap();
        let mut e = DMatrix::zeros(3, 2);
        e[cf.nu_argmax] = 1.0;
        let raw = nu_objective(&model, &t, &e).unwrap();
        assert!((0.5 * (raw - 1.0) - cf.nu).abs() < 1e-12);
    }

    #[test]
    fn quartic_gradient_matches_differences() {
        let (model, t) = setup(&[3.0, 2.0, 1.0, 0.5], 2);
        let q = Quartic::new(&model, &t).unwrap();
        let mut r = rng::stream(9);
        let x = gaussian_matrix(&mut r, 2, 2);
        let dir = gaussian_matrix(&mut r, 2, 2);
        let (_, g) = q.eval(&x, true);
        let h = 1e-5;
        let fd =
            (q.eval(&(&x + &dir * h), false).0 - q.eval(&(&x - &dir * h), false).0) / (2.0 * h);
        let an = linalg::inner(&g, &dir);
        assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "{fd} vs {an}");
    }

    #[test]
    fn v_dominates_nu() {
        let (model, t) = setup(&[5.0, 3.0, 2.0, 1.0, 0.3], 2);
        let p = variance_params(&model, &t, 16, 3).unwrap();
        assert!(p.ordering_holds);
    }

    #[test]
    fn v_eigen_route_matches_quadratic_form() {
        let (model, t) = setup(&[3.0, 2.0, 1.0, 0.5, 0.25], 2);
        let v = variance_param_v(&model, &t).unwrap();
        let at_cert = v_objective(&model, &t, &v.certificate).unwrap();
        assert!((at_cert - v.raw).abs() < 1e-10 * v.raw);
    }

    #[test]
    fn generalized_tensors_cannot_give_v() {
        let model = SpectralModel::diagonal(&[2.0, 1.0], 1).unwrap();
        let mut t = gaussian_fourth_moments(&model).unwrap();
        t.gamma = None;
        assert!(matches!(
            variance_param_v(&model, &t),
            Err(Error::MissingTensor(_))
        ));
    }
}
