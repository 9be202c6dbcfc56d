//! The implicit sample-size threshold `n*` and the quantities it needs.

use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::models::VectorSampler;
use crate::risk::SpectralModel;
use crate::rng;

/// Replicates used for `E[max_i |X_i X_i^T − Σ|²_op]` unless overridden.
pub const DEFAULT_REPLICATES: usize = 200;

const MAX_ROUNDS: usize = 1000;

/// `c(d) = 4(1 + 2⌈ln d⌉)`.
pub fn c_of_d(d: usize) -> f64 {
    4.0 * (1.0 + 2.0 * (d as f64).ln().ceil())
}

/// `𝒮 = c(d) |E[(XX^T − Σ)²]|_op` for `X ~ N(0, Σ)`, where
/// `E[(XX^T − Σ)²] = Tr(Σ) Σ + Σ²`.
pub fn s_param_gaussian(model: &SpectralModel) -> Result<f64> {
    let l = model.eigenvalues();
    if l[model.dim() - 1] < 0.0 {
        return Err(Error::NotPsd {
            min_eigenvalue: l[model.dim() - 1],
        });
    }
    let top = l[0];
    Ok(c_of_d(model.dim()) * (model.trace() * top + top * top))
}

/// Monte Carlo estimate of `𝒮` from `samples` draws.
pub fn s_param_monte_carlo(
    sampler: &dyn VectorSampler,
    sigma: &DMatrix<f64>,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples == 0 {
        return Err(Error::InsufficientData {
            needed: 1,
            available: 0,
        });
    }
    let d = sigma.nrows();
    const BLOCK: usize = 4096;
    let blocks = samples.div_ceil(BLOCK);
    let partials: Vec<DMatrix<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut g = rng::derived_stream(seed, b as u64);
            let mut x = DVector::zeros(d);
            let mut acc = DMatrix::zeros(d, d);
            let count = BLOCK.min(samples - b * BLOCK);
            for _ in 0..count {
                sampler.sample_into(&mut g, &mut x);
                let dev = &x * x.transpose() - sigma;
                acc += &dev * &dev;
            }
            acc
        })
        .collect();
    let mut total = DMatrix::zeros(d, d);
    for p in &partials {
        total += p;
    }
    total /= samples as f64;
    let total = (&total + total.transpose()) * 0.5;
    Ok(c_of_d(d) * linalg::sym_op_norm(&total))
}

struct Replicate {
    rng: ChaCha8Rng,
    drawn: usize,
    best: f64,
    /// `(count, max over the first count draws)` at every new maximum.
    records: Vec<(usize, f64)>,
}

impl Replicate {
    fn max_over(&self, n: usize) -> f64 {
        self.records
            .iter()
            .take_while(|(c, _)| *c <= n)
            .last()
            .map_or(0.0, |(_, v)| *v)
    }
}

/// `r(n) = c(d)² n^{-1} E[max_{i ≤ n} |X_i X_i^T − Σ|²_op]` by Monte Carlo.
///
/// Replicate `r` always reads the same stream, so the estimates for
/// different `n` share their draws (the maximum over a prefix) and the
/// estimated maximum is non-decreasing in `n`. Draws are only extended,
/// never repeated, and exact operator norms are only computed when the
/// Weyl bounds `|x|² − λ_1 ≤ |xx^T − Σ|_op ≤ max(|x|², λ_1)` cannot rule
/// a draw out.
pub struct MaxDeviationEstimator<'a> {
    sampler: &'a dyn VectorSampler,
    sigma: DMatrix<f64>,
    sigma_op: f64,
    c_d: f64,
    replicates: usize,
    seed: u64,
    state: Mutex<Vec<Replicate>>,
}

impl<'a> MaxDeviationEstimator<'a> {
    pub fn new(
        sampler: &'a dyn VectorSampler,
        sigma: DMatrix<f64>,
        replicates: usize,
        seed: u64,
    ) -> Result<Self> {
        if replicates == 0 {
            return Err(Error::InvalidConfig(
                "at least one replicate is required".into(),
            ));
        }
        if sigma.nrows() != sampler.dim() {
            return Err(Error::DimensionMismatch(
                "sampler and covariance dimensions differ".into(),
            ));
        }
        let state = (0..replicates)
            .map(|r| Replicate {
                rng: rng::derived_stream(seed, r as u64),
                drawn: 0,
                best: 0.0,
                records: Vec::new(),
            })
            .collect();
        Ok(Self {
            sampler,
            sigma_op: linalg::sym_op_norm(&sigma),
            c_d: c_of_d(sigma.nrows()),
            sigma,
            replicates,
            seed,
            state: Mutex::new(state),
        })
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn extend(&self, rep: &mut Replicate, n: usize) {
        let d = self.sigma.nrows();
        let mut x = DVector::zeros(d);
        while rep.drawn < n {
            self.sampler.sample_into(&mut rep.rng, &mut x);
            rep.drawn += 1;
            let nx = x.norm_squared();
            if nx.max(self.sigma_op) <= rep.best {
                continue;
            }
            let dev = &x * x.transpose() - &self.sigma;
            let op = linalg::sym_op_norm(&((&dev + dev.transpose()) * 0.5));
            if op > rep.best {
                rep.best = op;
                rep.records.push((rep.drawn, op));
            }
        }
    }

    /// Mean over replicates of `max_{i ≤ n} |X_i X_i^T − Σ|²_op`.
    pub fn expected_max_sq(&self, n: usize) -> f64 {
        let mut state = self.state.lock().expect("estimator state poisoned");
        state.par_iter_mut().for_each(|rep| self.extend(rep, n));
        let vals: Vec<f64> = state.iter().map(|rep| rep.max_over(n).powi(2)).collect();
        linalg::compensated_sum(vals) / self.replicates as f64
    }

    pub fn r_of_n(&self, n: usize) -> f64 {
        if n == 0 {
            return f64::INFINITY;
        }
        self.c_d * self.c_d * self.expected_max_sq(n) / n as f64
    }
}

/// Solution of `n ≥ rhs(n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub n_star: usize,
    /// `(32𝒱 + 4) log(3k(d−k))`.
    pub dimension_term: f64,
    /// `(16ν + 8) log(4/δ)`.
    pub confidence_term: f64,
    /// `16 𝒮 / (δ gap²)`.
    pub s_term: f64,
    pub r_at_n_star: f64,
    pub rhs_at_n_star: f64,
    pub fixed_point_rounds: usize,
    pub bisection_steps: usize,
    pub delta: f64,
}

/// Smallest `n` with `n ≥ (32𝒱+4) log(3k(d−k)) + (16ν+8) log(4/δ)
/// + 16(𝒮 + r(n))/(δ gap²)`.
///
/// Starting from the value with `r ≡ 0`, the iteration `n ← ⌈rhs(n)⌉`
/// climbs until the inequality holds. Because `rhs` decreases in `n`, a
/// plain iteration can overshoot, so the last failing and the first
/// passing iterate are then bisected down to the smallest passing `n`.
pub fn sample_size_threshold(
    model: &SpectralModel,
    v_big: f64,
    nu: f64,
    s_param: f64,
    r_of_n: &dyn Fn(usize) -> Result<f64>,
    delta: f64,
) -> Result<Threshold> {
    let gap = model.require_gap()?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::DeltaOutOfRange(delta));
    }
    let (d, k) = (model.dim() as f64, model.k() as f64);
    let dimension_term = (32.0 * v_big + 4.0) * (3.0 * k * (d - k)).ln();
    let confidence_term = (16.0 * nu + 8.0) * (4.0 / delta).ln();
    let s_term = 16.0 * s_param / (delta * gap * gap);
    let r_scale = 16.0 / (delta * gap * gap);
    let fixed = dimension_term + confidence_term + s_term;
    let rhs = |n: usize| -> Result<f64> { Ok(fixed + r_scale * r_of_n(n)?) };
    let passes = |n: usize| -> Result<bool> { Ok(n as f64 >= rhs(n)?) };

    let mut current = (fixed.ceil().max(1.0)) as usize;
    let mut failing: Option<usize> = None;
    let mut rounds = 0;
    loop {
        if passes(current)? {
            break;
        }
        rounds += 1;
        if rounds >= MAX_ROUNDS {
            return Err(Error::NoConvergence { iterations: rounds });
        }
        failing = Some(current);
        let next = rhs(current)?.ceil();
        if !next.is_finite() || next > 1e15 {
            return Err(Error::NoConvergence { iterations: rounds });
        }
        current = (next as usize).max(current + 1);
    }
    let mut steps = 0;
    if let Some(mut lo) = failing {
        let mut hi = current;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if passes(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
            steps += 1;
        }
        current = hi;
    }
    let r_at = r_of_n(current)?;
    Ok(Threshold {
        n_star: current,
        dimension_term,
        confidence_term,
        s_term,
        r_at_n_star: r_at,
        rhs_at_n_star: fixed + r_scale * r_at,
        fixed_point_rounds: rounds,
        bisection_steps: steps,
        delta,
    })
}
