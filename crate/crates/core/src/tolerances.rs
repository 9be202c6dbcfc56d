//! Numerical tolerances used by the library, the verification suites and
//! the acceptance tests.
//!
//! Machine-precision checks compare quantities that are equal in exact
//! arithmetic. Finite-difference and Monte Carlo checks carry their own,
//! looser budgets.

/// Orthonormality of a stored basis.
pub const ORTHONORMAL: f64 = 1e-12;

/// Horizontality of a tangent lift, `|U^T D|_max`.
pub const HORIZONTAL: f64 = 1e-10;

/// Relative rank threshold for orthonormalization.
pub const RANK: f64 = 1e-10;

/// Singular values below this are treated as exact zeros of a tangent.
pub const ZERO_SINGULAR: f64 = 1e-14;

/// Distance of the largest principal angle from pi/2 below which the
/// logarithm is refused.
pub const CUT_LOCUS_MARGIN: f64 = 1e-6;

/// Largest principal angle under which two bases span the same subspace.
pub const SAME_SUBSPACE: f64 = 1e-8;

/// Exp/log roundtrip residual (distance).
pub const ROUNDTRIP: f64 = 1e-9;

/// Identities between exact formulas (distance vs log norm, isometry, ...).
pub const IDENTITY: f64 = 1e-10;

/// Horizontality of transported vectors.
pub const TRANSPORT_HORIZONTAL: f64 = 1e-9;

/// Gradient norm accepted at a claimed minimizer.
pub const MINIMIZER_GRADIENT: f64 = 1e-8;

/// End buffer excluded from t-grids near the pole of tan(2 t theta).
pub const T_GRID_END_BUFFER: f64 = 1e-6;

/// Self-concordance margin slack.
pub const MARGIN_SLACK: f64 = 1e-9;

/// Slack for Taylor sandwich and integrated bounds.
pub const SANDWICH_SLACK: f64 = 1e-10;

/// Agreement between the transport and closed-form derivative routes.
pub const PROFILE_ROUTES: f64 = 1e-8;

/// Finite-difference budgets for first, second and third derivatives.
pub const FD_FIRST: f64 = 1e-6;
pub const FD_SECOND: f64 = 1e-5;
pub const FD_THIRD: f64 = 1e-4;

/// Slack for the Davis-Kahan inequality.
pub const DAVIS_KAHAN_SLACK: f64 = 1e-12;

/// Smallest eigenvalue accepted for a covariance flattening.
pub const PSD: f64 = 1e-10;

/// Gradient-projection norm at which the quartic ascent stops.
pub const ASCENT_GRADIENT: f64 = 1e-10;

/// Off-diagonal residual of `E^T M E`, relative to `max(1, |M|_max)`, at
/// which a mean matrix is said to share the model eigenbasis.
pub const EIGENBASIS: f64 = 1e-8;
