//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Frobenius inner product.
pub fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Largest absolute entry.
pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Largest entry of `|A - A^T|`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    max_abs(&(a - a.transpose()))
}

/// Check symmetry relative to the matrix scale and return the exactly
/// symmetrized copy.
pub fn checked_symmetric(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if let Some((r, c)) = first_non_finite(a) {
        return Err(Error::NonFiniteValue { row: r, col: c });
    }
    let asym = asymmetry(a);
    if asym > 1e-12 * max_abs(a).max(1.0) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    Ok((a + a.transpose()) * 0.5)
}

pub fn first_non_finite(a: &DMatrix<f64>) -> Option<(usize, usize)> {
    for c in 0..a.ncols() {
        for r in 0..a.nrows() {
            if !a[(r, c)].is_finite() {
                return Some((r, c));
            }
        }
    }
    None
}

/// `|Q^T Q - I|_max`.
pub fn orthonormality_residual(q: &DMatrix<f64>) -> f64 {
    let g = q.transpose() * q;
    let mut worst = 0.0_f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// Symmetric eigendecomposition with eigenvalues in non-increasing order.
///
/// Ties (within `1e-12` of the spectral scale) are ordered by the index of
/// the largest-magnitude coordinate of the eigenvector, and every
/// eigenvector is signed so that its largest-magnitude entry is positive.
/// For `S = I` this returns the coordinate basis in order.
pub fn sym_eig_desc(s: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = s.nrows();
    let eig = SymmetricEigen::new(s.clone());
    let scale = eig.eigenvalues.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    let tie = 1e-12 * scale;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let pivot = |col: usize| -> usize {
        let v = eig.eigenvectors.column(col);
        let mut best = 0;
        for r in 1..n {
            if v[r].abs() > v[best].abs() + 1e-12 {
                best = r;
            }
        }
        best
    };

    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && eig.eigenvalues[order[end - 1]] - eig.eigenvalues[order[end]] <= tie {
            end += 1;
        }
        order[start..end].sort_by_key(|&c| pivot(c));
        start = end;
    }

    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let mut v = eig.eigenvectors.column(src).into_owned();
        let p = pivot(src);
        if v[p] < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(dst, &v);
    }
    (values, vectors)
}

/// Largest eigenvalue and its unit eigenvector.
pub fn top_eigenpair(s: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let (vals, vecs) = sym_eig_desc(s);
    (vals[0], vecs.column(0).into_owned())
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(s: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(s.clone())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, &x| m.min(x))
}

/// Operator norm of a symmetric matrix.
pub fn sym_op_norm(s: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(s.clone())
        .eigenvalues
        .iter()
        .fold(0.0_f64, |m, &x| m.max(x.abs()))
}

#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

/// Thin SVD `M = U diag(s) V^T` with singular values in non-increasing order.
///
/// One-sided Jacobi rotations on the columns. nalgebra's bidiagonal SVD can
/// lose several digits on rank-deficient input, which the geodesic formulas
/// cannot tolerate. Left vectors for zero singular values are completed to
/// an orthonormal set.
pub fn thin_svd(m: &DMatrix<f64>) -> ThinSvd {
    if m.nrows() < m.ncols() {
        let t = thin_svd(&m.transpose());
        return ThinSvd {
            u: t.v,
            s: t.s,
            v: t.u,
        };
    }
    let (rows, cols) = m.shape();
    let mut w = m.clone();
    let mut v = DMatrix::<f64>::identity(cols, cols);
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut w, &mut v] {
                    for r in 0..mat.nrows() {
                        let a = mat[(r, p)];
                        let b = mat[(r, q)];
                        mat[(r, p)] = c * a - s * b;
                        mat[(r, q)] = s * a + c * b;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..cols).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));
    let scale = norms.iter().fold(0.0_f64, |a, &b| a.max(b));
    let mut su = DMatrix::zeros(rows, cols);
    let mut sv = DMatrix::zeros(cols, cols);
    let mut ss = DVector::zeros(cols);
    let mut missing = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        sv.set_column(dst, &v.column(src));
        ss[dst] = norms[src];
        if norms[src] > 1e-13 * scale && norms[src] > 0.0 {
            su.set_column(dst, &(w.column(src) / norms[src]));
        } else {
            missing.push(dst);
        }
    }
    complete_columns(&mut su, &missing);
    ThinSvd {
        u: su,
        s: ss,
        v: sv,
    }
}

// Fill the listed columns with unit vectors orthogonal to every other column.
fn complete_columns(u: &mut DMatrix<f64>, missing: &[usize]) {
    let rows = u.nrows();
    let mut candidate = 0;
    for &col in missing {
        while candidate < rows {
            let mut x = DVector::<f64>::zeros(rows);
            x[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for j in 0..u.ncols() {
                    if j == col || (missing.contains(&j) && u.column(j).norm() == 0.0) {
                        continue;
                    }
                    let proj = u.column(j).dot(&x);
                    x -= u.column(j) * proj;
                }
            }
            let n = x.norm();
            if n > 0.5 {
                u.set_column(col, &(x / n));
                break;
            }
        }
    }
}

/// Singular values in non-increasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    thin_svd(m).s.iter().copied().collect()
}

/// Matrix of i.i.d. standard normal entries.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// sign of `diag(R)` fixed).
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let g = gaussian_matrix(rng, n, n);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            let col = -q.column(j).into_owned();
            q.set_column(j, &col);
        }
    }
    q
}

/// Compensated (Neumaier) summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = CompensatedSum::default();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Row-major nested vectors, the layout used in JSON reports.
pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse("ragged rows".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
}
