//! Malthusian parameter, Perron eigen-elements and the spine kernel.
//!
//! With `mhat(theta)[s][r] = sum over channels s->r of E[N] E[exp(-theta T)]`,
//! the Malthusian parameter is the root of `rho(mhat(theta)) = 1`. The left
//! and right Perron vectors of `mhat(alpha)` are normed so that `sum pi = 1`
//! and `sum pi h = 1`, which makes `nu = pi h` a probability vector.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ValidatedModel;
use crate::rng::{replicate_rng, weighted_index};

pub type Matrix = Vec<Vec<f64>>;

const POWER_ITER_CAP: usize = 200_000;
const BISECTION_CAP: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("model is not supercritical: spectral radius at theta = 0 is {radius}")]
    NotSupercritical { radius: f64 },
    #[error("could not bracket the Malthusian parameter (radius still {radius} at theta = {theta})")]
    UnboundedBracket { theta: f64, radius: f64 },
    #[error("power iteration did not converge after {iterations} iterations (reducible or periodic kernel?)")]
    NonConvergence { iterations: usize },
    #[error("Perron vector has a zero entry; the kernel is reducible")]
    Reducible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralData {
    pub alpha: f64,
    pub pi: Vec<f64>,
    pub h: Vec<f64>,
    pub beta: f64,
    pub nu: Vec<f64>,
    pub mhat: Matrix,
    pub sup_h: f64,
    pub spine_kernel: Matrix,
}

impl SpectralData {
    pub fn compute(model: &ValidatedModel) -> Result<Self, SpectralError> {
        let alpha = malthusian(model)?;
        let mhat = kernel_matrix(model, alpha);
        let (pi, h) = eigen_elements(&mhat)?;
        let beta = beta(model, alpha, &pi, &h);
        let nu = pi.iter().zip(&h).map(|(p, q)| p * q).collect();
        let sup_h = h.iter().copied().fold(f64::MIN, f64::max);
        let spine_kernel = spine_transition_matrix(&mhat, &h);
        Ok(Self { alpha, pi, h, beta, nu, mhat, sup_h, spine_kernel })
    }

    pub fn n_types(&self) -> usize {
        self.h.len()
    }
}

/// Discounted mean reproduction matrix `mhat(theta)`.
pub fn kernel_matrix(model: &ValidatedModel, theta: f64) -> Matrix {
    let n = model.n_types();
    let mut m = vec![vec![0.0; n]; n];
    for c in &model.channels {
        m[c.parent][c.child] += c.mean * c.age.laplace(theta);
    }
    m
}

fn mat_vec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn vec_mat(v: &[f64], m: &Matrix) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|j| (0..n).map(|i| v[i] * m[i][j]).sum()).collect()
}

/// Perron root of a nonnegative matrix by power iteration on `M + I`, stopped
/// once the Collatz–Wielandt bounds agree to machine precision.
pub fn spectral_radius(m: &Matrix) -> f64 {
    let n = m.len();
    let mut v = vec![1.0; n];
    let mut estimate = 0.0;
    for _ in 0..POWER_ITER_CAP {
        let w: Vec<f64> = mat_vec(m, &v).iter().zip(&v).map(|(a, b)| a + b).collect();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (a, b) in w.iter().zip(&v) {
            if *b > 0.0 {
                lo = lo.min(a / b);
                hi = hi.max(a / b);
            }
        }
        estimate = 0.5 * (lo + hi) - 1.0;
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let norm = w.iter().copied().fold(0.0, f64::max);
        if norm == 0.0 {
            return 0.0;
        }
        v = w.iter().map(|x| x / norm).collect();
    }
    estimate
}

/// Unique `theta > 0` with `rho(mhat(theta)) = 1`, by bracketing and bisection.
pub fn malthusian(model: &ValidatedModel) -> Result<f64, SpectralError> {
    let radius = |theta: f64| spectral_radius(&kernel_matrix(model, theta));
    let r0 = radius(0.0);
    if !(r0 > 1.0) {
        return Err(SpectralError::NotSupercritical { radius: r0 });
    }
    let mut hi = 1.0;
    loop {
        let r = radius(hi);
        if r < 1.0 {
            break;
        }
        if hi > 1e12 {
            return Err(SpectralError::UnboundedBracket { theta: hi, radius: r });
        }
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..BISECTION_CAP {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if radius(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn power_vector(m: &Matrix, left: bool) -> Result<Vec<f64>, SpectralError> {
    let n = m.len();
    // a non-uniform start so that periodic kernels oscillate instead of sitting on a fixed point
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * i as f64 / n as f64).collect();
    for _ in 0..POWER_ITER_CAP {
        let w = if left { vec_mat(&v, m) } else { mat_vec(m, &v) };
        let norm: f64 = w.iter().sum();
        if norm == 0.0 {
            return Err(SpectralError::Reducible);
        }
        let w: Vec<f64> = w.iter().map(|x| x / norm).collect();
        let change = w
            .iter()
            .zip(&v)
            .map(|(a, b)| ((a - b) / a.abs().max(f64::MIN_POSITIVE)).abs())
            .fold(0.0, f64::max);
        v = w;
        if change < 1e-14 {
            if v.iter().any(|&x| x <= 0.0) {
                return Err(SpectralError::Reducible);
            }
            return Ok(v);
        }
    }
    Err(SpectralError::NonConvergence { iterations: POWER_ITER_CAP })
}

fn irreducible(m: &Matrix) -> bool {
    let n = m.len();
    let mut reach: Vec<Vec<bool>> = m.iter().map(|row| row.iter().map(|&x| x > 0.0).collect()).collect();
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    reach[i][j] |= reach[k][j];
                }
            }
        }
    }
    reach.iter().all(|row| row.iter().all(|&r| r))
}

/// Left (`pi`) and right (`h`) Perron vectors of `mhat`, normed `sum pi = 1`, `sum pi h = 1`.
pub fn eigen_elements(mhat: &Matrix) -> Result<(Vec<f64>, Vec<f64>), SpectralError> {
    if !irreducible(mhat) {
        return Err(SpectralError::Reducible);
    }
    let pi = power_vector(mhat, true)?;
    let h = power_vector(mhat, false)?;
    let total: f64 = pi.iter().sum();
    let pi: Vec<f64> = pi.iter().map(|x| x / total).collect();
    let pih: f64 = pi.iter().zip(&h).map(|(a, b)| a * b).sum();
    let h = h.iter().map(|x| x / pih).collect();
    Ok((pi, h))
}

/// Mean age at child-bearing, `sum_{s,r} pi(s) h(r) sum_c E[N_c] E[T_c exp(-alpha T_c)]`.
pub fn beta(model: &ValidatedModel, alpha: f64, pi: &[f64], h: &[f64]) -> f64 {
    model
        .channels
        .iter()
        .map(|c| pi[c.parent] * h[c.child] * c.mean * c.age.laplace_neg_derivative(alpha))
        .sum()
}

/// Transition matrix `h(r) mhat(s, r) / h(s)` of the spine's type chain.
pub fn spine_transition_matrix(mhat: &Matrix, h: &[f64]) -> Matrix {
    mhat.iter()
        .enumerate()
        .map(|(s, row)| row.iter().enumerate().map(|(r, m)| h[r] * m / h[s]).collect())
        .collect()
}

pub fn stationary_nu(spectral: &SpectralData) -> Vec<f64> {
    spectral.nu.clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XlogxVerdict {
    Finite,
    DivergentLikely,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XlogxReport {
    pub verdict: XlogxVerdict,
    /// `(M, E_pi[min(xi_bar log+ xi_bar, M)])`.
    pub truncated_means: Vec<(f64, f64)>,
    pub samples: usize,
}

pub const XLOGX_TRUNCATIONS: [f64; 4] = [1e1, 1e2, 1e3, 1e4];

pub fn x_log_plus_x(x: f64) -> f64 {
    if x > 1.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// The analytic part of [`xlogx_classify`].
pub fn xlogx_verdict(model: &ValidatedModel, spectral: &SpectralData) -> XlogxVerdict {
    if model.channels.iter().all(|c| c.count.n_log_n_finite()) {
        XlogxVerdict::Finite
    } else if model.channels.iter().any(|c| {
        !c.count.n_log_n_finite() && c.age.is_deterministic() && spectral.pi[c.parent] > 0.0
    }) {
        XlogxVerdict::DivergentLikely
    } else {
        XlogxVerdict::Unknown
    }
}

/// Analytic x log x verdict plus a Monte Carlo report of truncated moments.
///
/// The analytic branch is sufficient only: `Finite` when every count law has
/// `E[N log N] < ∞` (since `xi_bar <= sup h * total count`), `DivergentLikely`
/// when some channel with `E[N log N] = ∞` has a deterministic age (then
/// `xi_bar` dominates a multiple of that count), `Unknown` otherwise.
pub fn xlogx_classify(
    model: &ValidatedModel,
    spectral: &SpectralData,
    samples: usize,
    seed: u64,
) -> XlogxReport {
    let verdict = xlogx_verdict(model, spectral);
    let mut rng = replicate_rng(seed, 0);
    let mut sums = [0.0; XLOGX_TRUNCATIONS.len()];
    for _ in 0..samples {
        let s = weighted_index(&spectral.pi, &mut rng);
        let x = x_log_plus_x(sample_xi_bar(model, spectral, s, &mut rng));
        for (acc, m) in sums.iter_mut().zip(XLOGX_TRUNCATIONS) {
            *acc += x.min(m);
        }
    }
    let truncated_means =
        XLOGX_TRUNCATIONS.iter().zip(sums).map(|(&m, s)| (m, s / samples.max(1) as f64)).collect();
    XlogxReport { verdict, truncated_means, samples }
}

pub(crate) fn sample_xi_bar<R: Rng + ?Sized>(
    model: &ValidatedModel,
    spectral: &SpectralData,
    s: usize,
    rng: &mut R,
) -> f64 {
    model.sample_life(s, rng).xi_bar(spectral.alpha, &spectral.h)
}
