//! Central finite differences of scalar functions of one variable.
//!
//! Stencils are fourth-order accurate. Each derivative order gets its own
//! step so that truncation and roundoff errors balance; `scale` is the
//! speed of the curve, so the step is uniform in arc length.

/// First derivative at 0.
pub fn first<F: Fn(f64) -> f64>(f: F, scale: f64) -> f64 {
    let h = 1e-3 / scale.max(f64::MIN_POSITIVE);
    (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h)
}

/// Second derivative at 0.
pub fn second<F: Fn(f64) -> f64>(f: F, scale: f64) -> f64 {
    let h = 5e-3 / scale.max(f64::MIN_POSITIVE);
    (-f(-2.0 * h) + 16.0 * f(-h) - 30.0 * f(0.0) + 16.0 * f(h) - f(2.0 * h)) / (12.0 * h * h)
}

/// Third derivative at 0.
pub fn third<F: Fn(f64) -> f64>(f: F, scale: f64) -> f64 {
    let h = 1e-2 / scale.max(f64::MIN_POSITIVE);
    (f(-3.0 * h) - 8.0 * f(-2.0 * h) + 13.0 * f(-h) - 13.0 * f(h) + 8.0 * f(2.0 * h) - f(3.0 * h))
        / (8.0 * h * h * h)
}

/// Derivatives of `f` at `t0` rather than 0.
pub fn at<F: Fn(f64) -> f64>(t0: f64, f: F) -> impl Fn(f64) -> f64 {
    move |s| f(t0 + s)
}
