//! The negative block Rayleigh quotient `F([V]) = −Tr(V^T A V)/2` on the
//! Grassmannian, its covariant derivatives, and the geodesic inequalities
//! that control it near its minimizer.

use std::f64::consts::FRAC_PI_4;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grassmann::{
    self, exp_map, geodesic_factors, log_map, parallel_transport, principal_angles, GrassmannPoint,
    TangentLift,
};
use crate::linalg;
use crate::quadrature;
use crate::tolerances;

/// A symmetric matrix together with its spectrum and a target dimension.
#[derive(Clone, Debug)]
pub struct BlockRayleigh {
    a: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
    k: usize,
}

impl BlockRayleigh {
    pub fn new(a: &DMatrix<f64>, k: usize) -> Result<Self> {
        let a = linalg::checked_symmetric(a)?;
        let d = a.nrows();
        if k == 0 || k >= d {
            return Err(Error::DimensionMismatch(format!(
                "need 0 < k < d, got d = {d}, k = {k}"
            )));
        }
        let (eigenvalues, eigenvectors) = linalg::sym_eig_desc(&a);
        Ok(Self {
            a,
            eigenvalues,
            eigenvectors,
            k,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// `μ_k − μ_{k+1}`.
    pub fn gap(&self) -> f64 {
        self.eigenvalues[self.k - 1] - self.eigenvalues[self.k]
    }

    fn has_gap(&self) -> bool {
        self.gap() > 1e-12 * self.eigenvalues[0].abs().max(1.0)
    }

    /// The top-k eigenspace, the global minimizer of F when the gap is positive.
    pub fn minimizer(&self) -> Result<GrassmannPoint> {
        if !self.has_gap() {
            return Err(Error::NoEigengap { gap: self.gap() });
        }
        GrassmannPoint::from_orthonormal(self.eigenvectors.columns(0, self.k).into_owned())
    }

    fn check_point(&self, v: &GrassmannPoint) -> Result<()> {
        if v.ambient_dim() != self.dim() || v.subspace_dim() != self.k {
            return Err(Error::DimensionMismatch(format!(
                "point in Gr({},{}) for a quotient on Gr({},{})",
                v.ambient_dim(),
                v.subspace_dim(),
                self.dim(),
                self.k
            )));
        }
        Ok(())
    }

    /// `F([V]) = −Tr(V^T A V)/2`.
    pub fn value(&self, v: &GrassmannPoint) -> Result<f64> {
        self.check_point(v)?;
        let b = v.basis();
        Ok(-0.5 * (b.transpose() * &self.a * b).trace())
    }

    /// Riemannian gradient, lift `−(I − V V^T) A V`.
    pub fn gradient(&self, v: &GrassmannPoint) -> Result<TangentLift> {
        self.check_point(v)?;
        let av = &self.a * v.basis();
        let lift = grassmann::project_horizontal(v, &av)?;
        Ok(lift.scaled(-1.0))
    }

    /// Riemannian Hessian applied to a lift: `D V^T A V − (I − V V^T) A D`.
    pub fn hessian_apply(&self, v: &GrassmannPoint, xi: &TangentLift) -> Result<TangentLift> {
        self.check_point(v)?;
        xi.check_anchored_at(v)?;
        let b = v.basis();
        let d = xi.delta();
        let first = d * (b.transpose() * &self.a * b);
        let ad = &self.a * d;
        let second = &ad - b * (b.transpose() * &ad);
        Ok(TangentLift::from_parts_unchecked(v.clone(), first - second))
    }

    /// Third covariant derivative
    /// `⟨A, V(D1^T D2 D3^T + D2^T D1 D3^T + D3^T D1 D2^T + D3^T D2 D1^T)⟩`.
    pub fn third_derivative(
        &self,
        v: &GrassmannPoint,
        x1: &TangentLift,
        x2: &TangentLift,
        x3: &TangentLift,
    ) -> Result<f64> {
        self.check_point(v)?;
        for x in [x1, x2, x3] {
            x.check_anchored_at(v)?;
        }
        let (d1, d2, d3) = (x1.delta(), x2.delta(), x3.delta());
        let d1t = d1.transpose();
        let d2t = d2.transpose();
        let d3t = d3.transpose();
        let inner = &d1t * d2 * &d3t + &d2t * d1 * &d3t + &d3t * d1 * &d2t + &d3t * d2 * &d1t;
        Ok(linalg::inner(&self.a, &(v.basis() * inner)))
    }
}

/// Values and derivatives of `g(t) = F(γ(t))` on a grid.
#[derive(Clone, Debug, Serialize)]
pub struct GeodesicProfile {
    pub t_grid: Vec<f64>,
    pub g: Vec<f64>,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    pub g3: Vec<f64>,
    pub theta_max: f64,
    /// Derivatives recomputed from gradient, Hessian and third derivative
    /// at `γ(t)` with the transported velocity.
    pub transport_g1: Vec<f64>,
    pub transport_g2: Vec<f64>,
    pub transport_g3: Vec<f64>,
    /// Largest scaled disagreement between the two routes.
    pub route_disagreement: f64,
}

/// Diagonal coefficients of the quotient in the geodesic frame.
struct ProfileCoefficients {
    sigma: DVector<f64>,
    a: DVector<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
}

fn profile_coefficients(
    rq: &BlockRayleigh,
    start: &GrassmannPoint,
    lift: &TangentLift,
) -> ProfileCoefficients {
    let f = geodesic_factors(lift.delta());
    let w = start.basis() * &f.q;
    let aw = &rq.a * &w;
    let ap = &rq.a * &f.p;
    let k = f.s.len();
    ProfileCoefficients {
        sigma: f.s.clone(),
        a: DVector::from_fn(k, |j, _| w.column(j).dot(&aw.column(j))),
        b: DVector::from_fn(k, |j, _| w.column(j).dot(&ap.column(j))),
        c: DVector::from_fn(k, |j, _| f.p.column(j).dot(&ap.column(j))),
    }
}

impl ProfileCoefficients {
    fn eval(&self, t: f64) -> [f64; 4] {
        let mut out = [0.0; 4];
        for j in 0..self.sigma.len() {
            let s = self.sigma[j];
            let (sn, cs) = (2.0 * t * s).sin_cos();
            let amc = self.a[j] - self.c[j];
            let b = self.b[j];
            out[0] += -0.5 * (0.5 * (self.a[j] + self.c[j]) + 0.5 * cs * amc + sn * b);
            out[1] += -0.5 * (-s * sn * amc + 2.0 * s * cs * b);
            out[2] += s * s * (cs * amc + 2.0 * sn * b);
            out[3] += s * s * s * (-2.0 * sn * amc + 4.0 * cs * b);
        }
        out
    }
}

/// `g, g′, g″, g‴` along the geodesic from `start` to `end`, by two routes:
/// closed forms in the SVD frame of the logarithm, and covariant
/// derivatives at `γ(t)` applied to the transported velocity.
pub fn geodesic_profile(
    rq: &BlockRayleigh,
    start: &GrassmannPoint,
    end: &GrassmannPoint,
    t_grid: &[f64],
) -> Result<GeodesicProfile> {
    rq.check_point(start)?;
    rq.check_point(end)?;
    let lift = log_map(start, end)?;
    let theta_max = principal_angles(start, end)?.max();
    let coeffs = profile_coefficients(rq, start, &lift);
    let speed = lift.norm();
    let a_norm = rq.a.norm();

    let n = t_grid.len();
    let mut p = GeodesicProfile {
        t_grid: t_grid.to_vec(),
        g: Vec::with_capacity(n),
        g1: Vec::with_capacity(n),
        g2: Vec::with_capacity(n),
        g3: Vec::with_capacity(n),
        theta_max,
        transport_g1: Vec::with_capacity(n),
        transport_g2: Vec::with_capacity(n),
        transport_g3: Vec::with_capacity(n),
        route_disagreement: 0.0,
    };
    for &t in t_grid {
        let [g, g1, g2, g3] = coeffs.eval(t);
        p.g.push(g);
        p.g1.push(g1);
        p.g2.push(g2);
        p.g3.push(g3);

        let at = exp_map(start, &lift, t)?;
        let vel = parallel_transport(start, &lift, t, &lift)?;
        let t1 = rq.gradient(&at)?.inner(&vel)?;
        let t2 = rq.hessian_apply(&at, &vel)?.inner(&vel)?;
        let t3 = rq.third_derivative(&at, &vel, &vel, &vel)?;
        p.transport_g1.push(t1);
        p.transport_g2.push(t2);
        p.transport_g3.push(t3);

        let value = rq.value(&at)?;
        for (m, (x, y)) in [(value, g), (t1, g1), (t2, g2), (t3, g3)]
            .into_iter()
            .enumerate()
        {
            let scale = y
                .abs()
                .max(a_norm * speed.powi(m as i32))
                .max(f64::MIN_POSITIVE);
            p.route_disagreement = p.route_disagreement.max((x - y).abs() / scale);
        }
    }
    Ok(p)
}

/// `ψ(θ) = θ^{-1} ∫_0^1 log tan(θt + π/4) dt` for `0 < θ < π/4`.
///
/// Uses `log tan(x + π/4) = 2 artanh(tan x)`, which is accurate near 0,
/// and adaptive quadrature for the logarithmic singularity at `θ → π/4`.
pub fn psi(theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < FRAC_PI_4) {
        return Err(Error::DomainError(format!(
            "psi needs 0 < theta < pi/4, got {theta}"
        )));
    }
    let f = |t: f64| 2.0 * (theta * t).tan().atanh() / theta;
    Ok(quadrature::integrate(f, 0.0, 1.0, 1e-12))
}

/// Which endpoint of the geodesic is the minimizer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `γ(0) = V*`, `γ(1) = V`.
    FromMinimizer,
    /// `γ(0) = V`, `γ(1) = V*`.
    ToMinimizer,
}

impl Orientation {
    pub const BOTH: [Orientation; 2] = [Orientation::FromMinimizer, Orientation::ToMinimizer];

    fn endpoints<'a>(
        self,
        v_star: &'a GrassmannPoint,
        v: &'a GrassmannPoint,
    ) -> (&'a GrassmannPoint, &'a GrassmannPoint) {
        match self {
            Orientation::FromMinimizer => (v_star, v),
            Orientation::ToMinimizer => (v, v_star),
        }
    }

    /// Geodesic parameter measured from the minimizer.
    fn param_from_minimizer(self, t: f64) -> f64 {
        match self {
            Orientation::FromMinimizer => t,
            Orientation::ToMinimizer => 1.0 - t,
        }
    }
}

/// Self-concordance margins along one geodesic between `V*` and `V`.
#[derive(Clone, Debug, Serialize)]
pub struct ConcordanceProfile {
    pub orientation: Orientation,
    pub theta: f64,
    pub t_grid: Vec<f64>,
    pub g2: Vec<f64>,
    pub g3: Vec<f64>,
    /// `2θ tan(2tθ) g″(t) − |g‴(t)|`.
    pub margin: Vec<f64>,
    /// Same with `t` replaced by the parameter measured from `V*`,
    /// `2θ tan(2sθ) g″ − |g‴|`, `s = t` or `1 − t`.
    pub margin_from_minimizer: Vec<f64>,
}

/// Evenly spaced grid on `[0, 1 − buffer]`.
pub fn t_grid(points: usize) -> Vec<f64> {
    let top = 1.0 - tolerances::T_GRID_END_BUFFER;
    if points <= 1 {
        return vec![0.0];
    }
    (0..points)
        .map(|i| top * i as f64 / (points - 1) as f64)
        .collect()
}

fn check_minimizer(rq: &BlockRayleigh, v_star: &GrassmannPoint, v: &GrassmannPoint) -> Result<f64> {
    rq.check_point(v_star)?;
    rq.check_point(v)?;
    let truth = rq.minimizer()?;
    let gradient_norm = rq.gradient(v_star)?.norm();
    if gradient_norm > tolerances::MINIMIZER_GRADIENT || !grassmann::same_subspace(&truth, v_star)?
    {
        return Err(Error::NotMinimizer { gradient_norm });
    }
    let theta = principal_angles(v_star, v)?.max();
    if theta >= FRAC_PI_4 {
        return Err(Error::AngleTooLarge { theta });
    }
    Ok(theta)
}

/// Self-concordance profile along the geodesic joining `V*` and `V` in the
/// requested orientation.
pub fn concordance_profile(
    rq: &BlockRayleigh,
    v_star: &GrassmannPoint,
    v: &GrassmannPoint,
    orientation: Orientation,
    t_grid: &[f64],
) -> Result<ConcordanceProfile> {
    let theta = check_minimizer(rq, v_star, v)?;
    let n = t_grid.len();
    let mut out = ConcordanceProfile {
        orientation,
        theta,
        t_grid: t_grid.to_vec(),
        g2: vec![0.0; n],
        g3: vec![0.0; n],
        margin: vec![0.0; n],
        margin_from_minimizer: vec![0.0; n],
    };
    if theta < tolerances::ZERO_SINGULAR {
        return Ok(out);
    }
    let (start, end) = orientation.endpoints(v_star, v);
    let lift = log_map(start, end)?;
    let coeffs = profile_coefficients(rq, start, &lift);
    for (i, &t) in t_grid.iter().enumerate() {
        let [_, _, g2, g3] = coeffs.eval(t);
        let s = orientation.param_from_minimizer(t);
        out.g2[i] = g2;
        out.g3[i] = g3;
        out.margin[i] = 2.0 * theta * (2.0 * t * theta).tan() * g2 - g3.abs();
        out.margin_from_minimizer[i] = 2.0 * theta * (2.0 * s * theta).tan() * g2 - g3.abs();
    }
    Ok(out)
}

/// `2θ tan(2tθ) g″(t) − |g‴(t)|` on the grid.
pub fn self_concordance_margin(
    rq: &BlockRayleigh,
    v_star: &GrassmannPoint,
    v: &GrassmannPoint,
    orientation: Orientation,
    t_grid: &[f64],
) -> Result<Vec<f64>> {
    Ok(concordance_profile(rq, v_star, v, orientation, t_grid)?.margin)
}

/// Second-order Taylor remainder of F between `V*` and `V` with the
/// bounds that hold for it.
#[derive(Clone, Debug, Serialize)]
pub struct TaylorSandwich {
    pub orientation: Orientation,
    pub theta: f64,
    /// `F(end) − F(start) − ⟨grad F(start), ξ⟩`.
    pub actual: f64,
    /// `½⟨Hess F(start)[ξ], ξ⟩`.
    pub quad_term: f64,
    /// `(4/5)·quad_term`.
    pub lower: f64,
    /// `(3/2)·quad_term`.
    pub upper: f64,
    /// `(sin²θ/θ²)·quad_term`.
    pub sharp_lower: f64,
    /// `ψ(θ)·quad_term`.
    pub sharp_upper: f64,
    pub gradient_term: f64,
    pub holds: bool,
    pub sharp_holds: bool,
}

impl TaylorSandwich {
    /// Smallest of `actual − lower` and `upper − actual`.
    pub fn slack(&self) -> f64 {
        (self.actual - self.lower).min(self.upper - self.actual)
    }

    pub fn lower_slack(&self) -> f64 {
        self.actual - self.lower
    }

    pub fn upper_slack(&self) -> f64 {
        self.upper - self.actual
    }

    pub fn sharp_slack(&self) -> f64 {
        (self.actual - self.sharp_lower).min(self.sharp_upper - self.actual)
    }
}

pub fn taylor_sandwich(
    rq: &BlockRayleigh,
    v_star: &GrassmannPoint,
    v: &GrassmannPoint,
    orientation: Orientation,
) -> Result<TaylorSandwich> {
    let theta = check_minimizer(rq, v_star, v)?;
    let (start, end) = orientation.endpoints(v_star, v);
    let xi = log_map(start, end)?;
    let gradient_term = rq.gradient(start)?.inner(&xi)?;
    let actual = rq.value(end)? - rq.value(start)? - gradient_term;
    let quad_term = 0.5 * rq.hessian_apply(start, &xi)?.inner(&xi)?;
    let (sharp_low, sharp_up) = if theta < tolerances::ZERO_SINGULAR {
        (1.0, 1.0)
    } else {
        let s = theta.sin() / theta;
        (s * s, psi(theta)?)
    };
    let mut out = TaylorSandwich {
        orientation,
        theta,
        actual,
        quad_term,
        lower: 0.8 * quad_term,
        upper: 1.5 * quad_term,
        sharp_lower: sharp_low * quad_term,
        sharp_upper: sharp_up * quad_term,
        gradient_term,
        holds: false,
        sharp_holds: false,
    };
    out.holds = out.slack() >= -tolerances::SANDWICH_SLACK;
    out.sharp_holds = out.sharp_slack() >= -tolerances::SANDWICH_SLACK;
    Ok(out)
}
