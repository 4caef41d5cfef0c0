//! Birth-age laws with closed-form Laplace transforms and exponential tilts.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Open01};
use serde::{Deserialize, Serialize};

use super::ModelError;

/// Law of the mother's age at a birth (or of a lifespan).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgeDistribution {
    Deterministic { value: f64 },
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    Uniform { low: f64, high: f64 },
}

impl AgeDistribution {
    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = match *self {
            Self::Deterministic { value } => value.is_finite() && value > 0.0,
            Self::Exponential { rate } => rate.is_finite() && rate > 0.0,
            Self::Gamma { shape, rate } => {
                shape.is_finite() && shape > 0.0 && rate.is_finite() && rate > 0.0
            }
            Self::Uniform { low, high } => low.is_finite() && high.is_finite() && 0.0 <= low && low < high,
        };
        if ok {
            Ok(())
        } else {
            Err(ModelError::InvalidParameter(format!("age law {self:?}")))
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Self::Deterministic { .. })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Deterministic { value } => value,
            Self::Exponential { rate } => 1.0 / rate,
            Self::Gamma { shape, rate } => shape / rate,
            Self::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    /// `E[exp(-theta T)]`.
    pub fn laplace(&self, theta: f64) -> f64 {
        match *self {
            Self::Deterministic { value } => (-theta * value).exp(),
            Self::Exponential { rate } => rate / (rate + theta),
            Self::Gamma { shape, rate } => (rate / (rate + theta)).powf(shape),
            Self::Uniform { low, high } => {
                let width = high - low;
                (-theta * low).exp() * exp_integral0(theta, width) / width
            }
        }
    }

    /// `E[T exp(-theta T)]`, i.e. minus the derivative of [`Self::laplace`].
    pub fn laplace_neg_derivative(&self, theta: f64) -> f64 {
        match *self {
            Self::Deterministic { value } => value * (-theta * value).exp(),
            Self::Exponential { rate } => rate / ((rate + theta) * (rate + theta)),
            Self::Gamma { shape, rate } => shape / (rate + theta) * (rate / (rate + theta)).powf(shape),
            Self::Uniform { low, high } => {
                let width = high - low;
                (-theta * low).exp() * (low * exp_integral0(theta, width) + exp_integral1(theta, width))
                    / width
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Deterministic { value } => value,
            Self::Exponential { rate } => positive(rng, |r| Exp::new(rate).unwrap().sample(r)),
            Self::Gamma { shape, rate } => {
                positive(rng, |r| Gamma::new(shape, 1.0 / rate).unwrap().sample(r))
            }
            Self::Uniform { low, high } => {
                positive(rng, |r| {
                    let u: f64 = Open01.sample(r);
                    low + (high - low) * u
                })
            }
        }
    }

    /// Samples from the exponentially tilted law `e^{-alpha t} dF(t) / L(alpha)`.
    pub fn sample_tilted<R: Rng + ?Sized>(&self, alpha: f64, rng: &mut R) -> f64 {
        match *self {
            Self::Deterministic { value } => value,
            Self::Exponential { rate } => Self::Exponential { rate: rate + alpha }.sample(rng),
            Self::Gamma { shape, rate } => Self::Gamma { shape, rate: rate + alpha }.sample(rng),
            Self::Uniform { low, high } => {
                if alpha == 0.0 {
                    return self.sample(rng);
                }
                let width = high - low;
                let mass = -(-alpha * width).exp_m1();
                positive(rng, |r| {
                    let u: f64 = Open01.sample(r);
                    low - (-u * mass).ln_1p() / alpha
                })
            }
        }
    }

    /// The tilted law as another `AgeDistribution`, where the family is closed under tilting.
    pub fn tilted(&self, alpha: f64) -> Option<AgeDistribution> {
        match *self {
            Self::Deterministic { .. } => Some(*self),
            Self::Exponential { rate } => Some(Self::Exponential { rate: rate + alpha }),
            Self::Gamma { shape, rate } => Some(Self::Gamma { shape, rate: rate + alpha }),
            Self::Uniform { .. } => None,
        }
    }
}

fn positive<R: Rng + ?Sized>(rng: &mut R, mut draw: impl FnMut(&mut R) -> f64) -> f64 {
    loop {
        let t = draw(rng);
        if t > 0.0 && t.is_finite() {
            return t;
        }
    }
}

/// `int_0^w exp(-theta s) ds`.
fn exp_integral0(theta: f64, w: f64) -> f64 {
    let x = theta * w;
    if x.abs() < 1e-8 {
        w * (1.0 - 0.5 * x)
    } else {
        -(-x).exp_m1() / theta
    }
}

/// `int_0^w s exp(-theta s) ds`.
fn exp_integral1(theta: f64, w: f64) -> f64 {
    let x = theta * w;
    if x.abs() < 1e-3 {
        // w^2 * sum_k (-x)^k / (k! (k + 2))
        let mut term = 1.0;
        let mut acc = 0.0;
        for k in 0..12 {
            acc += term / (k as f64 + 2.0);
            term *= -x / (k as f64 + 1.0);
        }
        w * w * acc
    } else {
        (1.0 - (-x).exp() * (1.0 + x)) / (theta * theta)
    }
}
