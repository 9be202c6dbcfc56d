//! Riemannian primitives on the Grassmannian Gr(d, k).
//!
//! A point is stored as a d×k matrix with orthonormal columns; tangent
//! vectors are horizontal lifts `D` with `U^T D = 0`. All maps use thin
//! SVDs and return exact representatives (no re-orthonormalization), so a
//! transported vector is anchored at precisely the basis `exp_map` returns.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, thin_svd};
use crate::tolerances;

/// A subspace represented by an orthonormal basis.
#[derive(Clone, Debug, PartialEq)]
pub struct GrassmannPoint {
    basis: DMatrix<f64>,
}

impl GrassmannPoint {
    /// Wrap a basis that is already orthonormal.
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Result<Self> {
        let (d, k) = basis.shape();
        if k == 0 || k >= d {
            return Err(Error::DimensionMismatch(format!(
                "need 0 < k < d, got d = {d}, k = {k}"
            )));
        }
        let res = linalg::orthonormality_residual(&basis);
        if res > tolerances::ORTHONORMAL {
            return orthonormalize(&basis);
        }
        Ok(Self { basis })
    }

    /// Used internally for bases produced by exact formulas.
    pub(crate) fn from_basis_unchecked(basis: DMatrix<f64>) -> Self {
        Self { basis }
    }

    /// Span of the first `k` coordinate vectors.
    pub fn coordinate(d: usize, k: usize) -> Result<Self> {
        Self::from_orthonormal(DMatrix::identity(d, k))
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn subspace_dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthogonal projector `U U^T`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// The same subspace with basis `U Q` for a k×k orthogonal `Q`.
    pub fn rotated(&self, q: &DMatrix<f64>) -> Self {
        Self {
            basis: &self.basis * q,
        }
    }

    /// An orthonormal basis of the orthogonal complement, d×(d−k).
    pub fn complement(&self) -> DMatrix<f64> {
        let (d, k) = self.basis.shape();
        let proj = DMatrix::identity(d, d) - self.projector();
        let (vals, vecs) = linalg::sym_eig_desc(&proj);
        debug_assert!(vals[d - k - 1] > 0.5);
        vecs.columns(0, d - k).into_owned()
    }

    fn check_same_shape(&self, other: &GrassmannPoint) -> Result<()> {
        if self.basis.shape() != other.basis.shape() {
            return Err(Error::DimensionMismatch(format!(
                "Gr({},{}) vs Gr({},{})",
                self.ambient_dim(),
                self.subspace_dim(),
                other.ambient_dim(),
                other.subspace_dim()
            )));
        }
        Ok(())
    }

    fn same_representative(&self, other: &GrassmannPoint) -> bool {
        self.basis.shape() == other.basis.shape()
            && linalg::max_abs(&(&self.basis - &other.basis)) <= 1e-12
    }
}

/// A horizontal tangent vector at a fixed representative.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentLift {
    anchor: GrassmannPoint,
    delta: DMatrix<f64>,
}

impl TangentLift {
    /// Wrap an already horizontal matrix; fails if `|U^T D|_max` exceeds
    /// the horizontality tolerance (relative to `max(1, |D|_F)`).
    pub fn new(anchor: GrassmannPoint, delta: DMatrix<f64>) -> Result<Self> {
        if anchor.basis.shape() != delta.shape() {
            return Err(Error::DimensionMismatch(format!(
                "anchor is {:?}, lift is {:?}",
                anchor.basis.shape(),
                delta.shape()
            )));
        }
        let leak = linalg::max_abs(&(anchor.basis.transpose() * &delta));
        if leak > tolerances::HORIZONTAL * delta.norm().max(1.0) {
            return Err(Error::DomainError(format!(
                "lift is not horizontal (|U^T D|_max = {leak:.3e})"
            )));
        }
        Ok(Self { anchor, delta })
    }

    pub fn zero(anchor: &GrassmannPoint) -> Self {
        let (d, k) = anchor.basis.shape();
        Self {
            anchor: anchor.clone(),
            delta: DMatrix::zeros(d, k),
        }
    }

    pub fn anchor(&self) -> &GrassmannPoint {
        &self.anchor
    }

    pub fn delta(&self) -> &DMatrix<f64> {
        &self.delta
    }

    /// Riemannian norm, the Frobenius norm of the lift.
    pub fn norm(&self) -> f64 {
        self.delta.norm()
    }

    /// Riemannian inner product; both lifts must share a representative.
    pub fn inner(&self, other: &TangentLift) -> Result<f64> {
        self.check_anchor(other)?;
        Ok(linalg::inner(&self.delta, &other.delta))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            anchor: self.anchor.clone(),
            delta: &self.delta * c,
        }
    }

    pub fn plus(&self, other: &TangentLift) -> Result<Self> {
        self.check_anchor(other)?;
        Ok(Self {
            anchor: self.anchor.clone(),
            delta: &self.delta + &other.delta,
        })
    }

    /// The lift of the same tangent vector at the representative `U Q`.
    pub fn rotated(&self, q: &DMatrix<f64>) -> Self {
        Self {
            anchor: self.anchor.rotated(q),
            delta: &self.delta * q,
        }
    }

    pub(crate) fn check_anchor(&self, other: &TangentLift) -> Result<()> {
        if self.anchor.same_representative(&other.anchor) {
            Ok(())
        } else {
            Err(Error::AnchorMismatch)
        }
    }

    pub(crate) fn check_anchored_at(&self, point: &GrassmannPoint) -> Result<()> {
        if self.anchor.same_representative(point) {
            Ok(())
        } else {
            Err(Error::AnchorMismatch)
        }
    }

    pub(crate) fn from_parts_unchecked(anchor: GrassmannPoint, delta: DMatrix<f64>) -> Self {
        Self { anchor, delta }
    }
}

/// Principal angles sorted non-decreasingly.
#[derive(Clone, Debug, PartialEq)]
pub struct PrincipalAngles {
    angles: Vec<f64>,
}

impl PrincipalAngles {
    pub fn as_slice(&self) -> &[f64] {
        &self.angles
    }

    /// The largest angle θ_k.
    pub fn max(&self) -> f64 {
        self.angles.last().copied().unwrap_or(0.0)
    }

    /// Euclidean norm of the angle vector, the geodesic distance.
    pub fn norm(&self) -> f64 {
        self.angles.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

/// Orthonormal basis of `col(M)` via QR with `diag(R) > 0`.
pub fn orthonormalize(m: &DMatrix<f64>) -> Result<GrassmannPoint> {
    let (d, k) = m.shape();
    if k == 0 || k >= d {
        return Err(Error::DimensionMismatch(format!(
            "need 0 < k < d, got d = {d}, k = {k}"
        )));
    }
    if let Some((row, col)) = linalg::first_non_finite(m) {
        return Err(Error::NonFiniteValue { row, col });
    }
    let s = linalg::singular_values(m);
    let ratio = if s[0] > 0.0 { s[k - 1] / s[0] } else { 0.0 };
    if ratio <= tolerances::RANK {
        return Err(Error::RankDeficient { ratio });
    }
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            let col = -q.column(j).into_owned();
            q.set_column(j, &col);
        }
    }
    Ok(GrassmannPoint { basis: q })
}

/// Horizontal projection `(I − U U^T) M`.
pub fn project_horizontal(u: &GrassmannPoint, m: &DMatrix<f64>) -> Result<TangentLift> {
    if u.basis.shape() != m.shape() {
        return Err(Error::DimensionMismatch(format!(
            "anchor is {:?}, matrix is {:?}",
            u.basis.shape(),
            m.shape()
        )));
    }
    let delta = m - &u.basis * (u.basis.transpose() * m);
    Ok(TangentLift {
        anchor: u.clone(),
        delta,
    })
}

/// Thin-SVD factors `D = P S Q^T` of a lift with the columns of `P` that
/// belong to vanishing singular values set to zero.
pub(crate) struct GeodesicFactors {
    pub p: DMatrix<f64>,
    pub s: DVector<f64>,
    pub q: DMatrix<f64>,
}

pub(crate) fn geodesic_factors(delta: &DMatrix<f64>) -> GeodesicFactors {
    let svd = thin_svd(delta);
    let mut p = svd.u;
    let mut s = svd.s;
    for j in 0..s.len() {
        if s[j] < tolerances::ZERO_SINGULAR {
            s[j] = 0.0;
            p.column_mut(j).fill(0.0);
        }
    }
    GeodesicFactors { p, s, q: svd.v }
}

fn geodesic_point(u: &DMatrix<f64>, f: &GeodesicFactors, t: f64) -> DMatrix<f64> {
    let cos = DMatrix::from_diagonal(&f.s.map(|x| (t * x).cos()));
    let sin = DMatrix::from_diagonal(&f.s.map(|x| (t * x).sin()));
    let qt = f.q.transpose();
    u * &f.q * cos * &qt + &f.p * sin * qt
}

/// Geodesic `γ(t) = U Q cos(tS) Q^T + P sin(tS) Q^T` for `D = P S Q^T`.
pub fn exp_map(u: &GrassmannPoint, delta: &TangentLift, t: f64) -> Result<GrassmannPoint> {
    delta.check_anchored_at(u)?;
    if delta.norm() < tolerances::ZERO_SINGULAR {
        return Ok(u.clone());
    }
    let f = geodesic_factors(&delta.delta);
    Ok(GrassmannPoint::from_basis_unchecked(geodesic_point(
        &u.basis, &f, t,
    )))
}

/// Principal angles from the singular values of `U^T V` (cosines) and of
/// `(I − U U^T) V` (sines). The arcsine branch is used for small angles
/// and the arccosine branch otherwise, which keeps full relative accuracy
/// at both ends of [0, π/2].
pub fn principal_angles(u: &GrassmannPoint, v: &GrassmannPoint) -> Result<PrincipalAngles> {
    u.check_same_shape(v)?;
    let cross = u.basis.transpose() * &v.basis;
    let resid = &v.basis - &u.basis * &cross;
    let cos = linalg::singular_values(&cross);
    let mut sin = linalg::singular_values(&resid);
    sin.reverse();
    let angles = cos
        .iter()
        .zip(sin.iter())
        .map(|(&c, &s)| {
            let c = c.clamp(0.0, 1.0);
            let s = s.clamp(0.0, 1.0);
            if c * c >= 0.5 {
                s.asin()
            } else {
                c.acos()
            }
        })
        .collect();
    Ok(PrincipalAngles { angles })
}

/// Geodesic distance `sqrt(Σ θ_j²)`.
pub fn distance(u: &GrassmannPoint, v: &GrassmannPoint) -> Result<f64> {
    Ok(principal_angles(u, v)?.norm())
}

/// `θ_k(U, V) < 1e-8`.
pub fn same_subspace(u: &GrassmannPoint, v: &GrassmannPoint) -> Result<bool> {
    Ok(principal_angles(u, v)?.max() < tolerances::SAME_SUBSPACE)
}

/// Logarithm `P arctan(S) Q^T` from the SVD of `(I − U U^T) V (U^T V)^{-1}`.
pub fn log_map(u: &GrassmannPoint, v: &GrassmannPoint) -> Result<TangentLift> {
    let theta = principal_angles(u, v)?.max();
    if theta >= FRAC_PI_2 - tolerances::CUT_LOCUS_MARGIN {
        return Err(Error::CutLocus { theta });
    }
    if theta < tolerances::ZERO_SINGULAR {
        return Ok(TangentLift::zero(u));
    }
    let cross = u.basis.transpose() * &v.basis;
    let inv = cross.try_inverse().ok_or(Error::CutLocus { theta })?;
    let resid = &v.basis - &u.basis * (u.basis.transpose() * &v.basis);
    let svd = thin_svd(&(resid * inv));
    let atan = DMatrix::from_diagonal(&svd.s.map(f64::atan));
    let raw = svd.u * atan * svd.v.transpose();
    // Remove the roundoff-level component along U.
    let delta = &raw - &u.basis * (u.basis.transpose() * &raw);
    Ok(TangentLift {
        anchor: u.clone(),
        delta,
    })
}

/// Parallel transport of `zeta` along `t ↦ exp_map(U, D, t)`:
/// `(−U Q sin(tS) P^T + P cos(tS) P^T + I − P P^T) ζ`.
pub fn parallel_transport(
    u: &GrassmannPoint,
    direction: &TangentLift,
    t: f64,
    zeta: &TangentLift,
) -> Result<TangentLift> {
    direction.check_anchored_at(u)?;
    zeta.check_anchored_at(u)?;
    if direction.norm() < tolerances::ZERO_SINGULAR {
        return Ok(zeta.clone());
    }
    let f = geodesic_factors(&direction.delta);
    let end = geodesic_point(&u.basis, &f, t);
    let cos = DMatrix::from_diagonal(&f.s.map(|x| (t * x).cos()));
    let sin = DMatrix::from_diagonal(&f.s.map(|x| (t * x).sin()));
    let pz = f.p.transpose() * &zeta.delta;
    let moved = -(&u.basis * &f.q * sin * &pz) + &f.p * (cos * &pz) + &zeta.delta - &f.p * pz;
    Ok(TangentLift {
        anchor: GrassmannPoint::from_basis_unchecked(end),
        delta: moved,
    })
}

/// Inverse transport: maps a lift at `exp_map(U, D, t)` back to `U`.
///
/// On the horizontal space at `U` the transport matrix is an isometry onto
/// the horizontal space at the endpoint, so its inverse is the adjoint
/// followed by horizontal projection.
pub fn parallel_transport_back(
    u: &GrassmannPoint,
    direction: &TangentLift,
    t: f64,
    eta: &TangentLift,
) -> Result<TangentLift> {
    direction.check_anchored_at(u)?;
    if direction.norm() < tolerances::ZERO_SINGULAR {
        eta.check_anchored_at(u)?;
        return Ok(eta.clone());
    }
    let f = geodesic_factors(&direction.delta);
    let end = GrassmannPoint::from_basis_unchecked(geodesic_point(&u.basis, &f, t));
    eta.check_anchored_at(&end)?;
    let cos = DMatrix::from_diagonal(&f.s.map(|x| (t * x).cos()));
    let sin = DMatrix::from_diagonal(&f.s.map(|x| (t * x).sin()));
    let z = &eta.delta;
    // T^T z = z + P (cos − I) P^T z − P sin Q^T U^T z
    let pz = f.p.transpose() * z;
    let uz = u.basis.transpose() * z;
    let tz = z + &f.p * ((cos - DMatrix::identity(f.s.len(), f.s.len())) * &pz)
        - &f.p * (sin * (f.q.transpose() * uz));
    project_horizontal(u, &tz)
}

/// Lift `U⊥ C` of coordinates `C` ((d−k)×k) in a complement basis.
pub fn lift_from_coords(
    u: &GrassmannPoint,
    u_perp: &DMatrix<f64>,
    coords: &DMatrix<f64>,
) -> Result<TangentLift> {
    let (d, k) = u.basis.shape();
    if u_perp.shape() != (d, d - k) || coords.shape() != (d - k, k) {
        return Err(Error::DimensionMismatch(format!(
            "complement {:?} and coordinates {:?} do not fit Gr({d},{k})",
            u_perp.shape(),
            coords.shape()
        )));
    }
    let full = DMatrix::from_fn(d, d, |r, c| {
        if c < k {
            u.basis[(r, c)]
        } else {
            u_perp[(r, c - k)]
        }
    });
    let residual = linalg::orthonormality_residual(&full);
    if residual > 1e-10 {
        return Err(Error::NotOrthogonalComplement { residual });
    }
    Ok(TangentLift {
        anchor: u.clone(),
        delta: u_perp * coords,
    })
}

/// Coordinates `U⊥^T D` of a lift in a complement basis.
pub fn coords_of(lift: &TangentLift, u_perp: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if u_perp.nrows() != lift.delta.nrows() {
        return Err(Error::DimensionMismatch("complement basis rows".into()));
    }
    Ok(u_perp.transpose() * &lift.delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{gaussian_matrix, random_orthogonal};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_4;

    fn point(v: &[f64]) -> GrassmannPoint {
        GrassmannPoint::from_orthonormal(DMatrix::from_column_slice(v.len(), 1, v)).unwrap()
    }

    fn random_point(rng: &mut ChaCha8Rng, d: usize, k: usize) -> GrassmannPoint {
        orthonormalize(&gaussian_matrix(rng, d, k)).unwrap()
    }

    fn random_lift(rng: &mut ChaCha8Rng, u: &GrassmannPoint) -> TangentLift {
        let (d, k) = u.basis().shape();
        project_horizontal(u, &gaussian_matrix(rng, d, k)).unwrap()
    }

    #[test]
    fn orthonormalize_identity_and_scaling() {
        let id = DMatrix::<f64>::identity(3, 2);
        let p = orthonormalize(&id).unwrap();
        assert!((p.basis() - &id).abs().max() < 1e-15);
        let q = orthonormalize(&(id * 2.0)).unwrap();
        assert!(same_subspace(&p, &q).unwrap());
    }

    #[test]
    fn orthonormalize_rejects_rank_deficient() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        assert!(matches!(
            orthonormalize(&m),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn orthonormalize_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_point(&mut rng, 5, 2);
        assert!(linalg::orthonormality_residual(p.basis()) <= 1e-12);
    }

    #[test]
    fn horizontal_projection() {
        let u = GrassmannPoint::coordinate(3, 2).unwrap();
        let lift = project_horizontal(&u, u.basis()).unwrap();
        assert_eq!(lift.norm(), 0.0);

        let e1 = point(&[1.0, 0.0]);
        let lift = project_horizontal(&e1, &DMatrix::from_column_slice(2, 1, &[0.0, 1.0])).unwrap();
        assert_eq!(lift.delta()[(1, 0)], 1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_point(&mut rng, 6, 3);
        let once = random_lift(&mut rng, &u);
        let twice = project_horizontal(&u, once.delta()).unwrap();
        assert!((once.delta() - twice.delta()).abs().max() < 1e-12);
    }

    #[test]
    fn planar_exp_and_log() {
        let e1 = point(&[1.0, 0.0]);
        let theta = 0.4;
        let d =
            TangentLift::new(e1.clone(), DMatrix::from_column_slice(2, 1, &[0.0, theta])).unwrap();
        let v = exp_map(&e1, &d, 1.0).unwrap();
        assert!((v.basis()[(0, 0)] - theta.cos()).abs() < 1e-15);
        assert!((v.basis()[(1, 0)] - theta.sin()).abs() < 1e-15);
        let back = log_map(&e1, &v).unwrap();
        assert!((back.delta()[(1, 0)] - theta).abs() < 1e-14);
        assert!(back.delta()[(0, 0)].abs() < 1e-15);
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let u = GrassmannPoint::coordinate(4, 2).unwrap();
        let z = TangentLift::zero(&u);
        assert_eq!(exp_map(&u, &z, 3.0).unwrap(), u);
        assert_eq!(log_map(&u, &u).unwrap().norm(), 0.0);
    }

    #[test]
    fn exp_distance_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = random_point(&mut rng, 6, 2);
        let d = random_lift(&mut rng, &u);
        let d = d.scaled(0.3 / d.norm());
        let v = exp_map(&u, &d, 1.0).unwrap();
        assert!((distance(&u, &v).unwrap() - 0.3).abs() < 1e-10);
    }

    #[test]
    fn log_roundtrip_large_angle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u = random_point(&mut rng, 7, 3);
        let d = random_lift(&mut rng, &u);
        let f = geodesic_factors(d.delta());
        let d = d.scaled(1.2 / f.s[0]);
        let v = exp_map(&u, &d, 1.0).unwrap();
        assert!((principal_angles(&u, &v).unwrap().max() - 1.2).abs() < 1e-12);
        let back = exp_map(&u, &log_map(&u, &v).unwrap(), 1.0).unwrap();
        assert!(distance(&back, &v).unwrap() <= 1e-9);
    }

    #[test]
    fn log_refuses_cut_locus() {
        let u = GrassmannPoint::coordinate(4, 2).unwrap();
        let v = GrassmannPoint::from_orthonormal(DMatrix::from_column_slice(
            4,
            2,
            &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        ))
        .unwrap();
        assert!(matches!(log_map(&u, &v), Err(Error::CutLocus { .. })));
    }

    #[test]
    fn principal_angle_examples() {
        let e1 = point(&[1.0, 0.0, 0.0]);
        let v = point(&[1.0 / 2f64.sqrt(), 1.0 / 2f64.sqrt(), 0.0]);
        assert!((principal_angles(&e1, &v).unwrap().max() - FRAC_PI_4).abs() < 1e-15);
        assert!((distance(&e1, &v).unwrap() - FRAC_PI_4).abs() < 1e-15);

        let u = GrassmannPoint::coordinate(4, 2).unwrap();
        let w = GrassmannPoint::from_orthonormal(DMatrix::from_column_slice(
            4,
            2,
            &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        ))
        .unwrap();
        let a = principal_angles(&u, &w).unwrap();
        assert!(a.as_slice()[0].abs() < 1e-15);
        assert!((a.as_slice()[1] - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(principal_angles(&u, &u).unwrap().max(), 0.0);
    }

    #[test]
    fn transport_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = random_point(&mut rng, 6, 2);
        let d = random_lift(&mut rng, &u);
        let z1 = random_lift(&mut rng, &u);
        let z2 = random_lift(&mut rng, &u);

        let same = parallel_transport(&u, &d, 0.0, &z1).unwrap();
        assert!((same.delta() - z1.delta()).abs().max() < 1e-14);

        let own = parallel_transport(&u, &d, 2.5, &d).unwrap();
        assert!((own.norm() - d.norm()).abs() < 1e-12);

        let p1 = parallel_transport(&u, &d, 0.7, &z1).unwrap();
        let p2 = parallel_transport(&u, &d, 0.7, &z2).unwrap();
        let lhs = p1.inner(&p2).unwrap();
        assert!((lhs - z1.inner(&z2).unwrap()).abs() < 1e-10);
        let end = exp_map(&u, &d, 0.7).unwrap();
        assert_eq!(p1.anchor(), &end);
        assert!(linalg::max_abs(&(end.basis().transpose() * p1.delta())) < 1e-9);

        let back = parallel_transport_back(&u, &d, 0.7, &p1).unwrap();
        assert!((back.delta() - z1.delta()).abs().max() < 1e-12);
    }

    #[test]
    fn transport_rejects_foreign_anchor() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let u = random_point(&mut rng, 5, 2);
        let v = random_point(&mut rng, 5, 2);
        let d = random_lift(&mut rng, &u);
        let z = random_lift(&mut rng, &v);
        assert!(matches!(
            parallel_transport(&u, &d, 1.0, &z),
            Err(Error::AnchorMismatch)
        ));
    }

    #[test]
    fn coordinates_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let u = random_point(&mut rng, 6, 2);
        let perp = u.complement();
        let zero = lift_from_coords(&u, &perp, &DMatrix::zeros(4, 2)).unwrap();
        assert_eq!(zero.norm(), 0.0);

        let mut e11 = DMatrix::zeros(4, 2);
        e11[(0, 0)] = 1.0;
        let unit = lift_from_coords(&u, &perp, &e11).unwrap();
        assert!((unit.delta().column(0) - perp.column(0)).abs().max() < 1e-15);
        assert!(unit.delta().column(1).abs().max() < 1e-15);

        let c = gaussian_matrix(&mut rng, 4, 2);
        let lift = lift_from_coords(&u, &perp, &c).unwrap();
        assert!((lift.norm() - c.norm()).abs() < 1e-12);
        assert!((coords_of(&lift, &perp).unwrap() - c).abs().max() < 1e-12);

        let bad = DMatrix::from_fn(6, 4, |_, _| rng.random::<f64>());
        assert!(matches!(
            lift_from_coords(&u, &bad, &DMatrix::zeros(4, 2)),
            Err(Error::NotOrthogonalComplement { .. })
        ));
    }

    #[test]
    fn representative_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let u = random_point(&mut rng, 7, 3);
        let v = random_point(&mut rng, 7, 3);
        let q = random_orthogonal(&mut rng, 3);
        let a = principal_angles(&u, &v).unwrap();
        let b = principal_angles(&u.rotated(&q), &v).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
        let l1 = log_map(&u, &v).unwrap();
        let l2 = log_map(&u.rotated(&q), &v).unwrap();
        assert!((l1.rotated(&q).delta() - l2.delta()).abs().max() < 1e-10);
    }
}
