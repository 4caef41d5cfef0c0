//! Offspring-count laws and their size-biased versions `k p_k / m`.

use rand::Rng;
use rand_distr::{Distribution, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use super::heavy::{self, PowerLogTail};
use super::ModelError;

/// Declarative count law, as it appears in model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CountDistribution {
    Deterministic {
        n: u64,
    },
    Poisson {
        mean: f64,
    },
    /// Number of failures before the first success, support `0, 1, ...`.
    Geometric {
        p: f64,
    },
    /// Dense pmf over `0..pmf.len()`.
    Table {
        pmf: Vec<f64>,
    },
    /// `P(N = k) = tail_mass * k^{-exponent} (ln k)^{-log_exponent} / Z` for `k >= 2`,
    /// plus `P(N = atom) += atom_mass`, remaining mass at zero.
    HeavyTail {
        exponent: f64,
        log_exponent: f64,
        tail_mass: f64,
        atom: u64,
        atom_mass: f64,
    },
}

/// Mixture for the heavy-tail kind, plus its size-biased counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct HeavyTailLaw {
    pub tail: PowerLogTail,
    pub biased_tail: PowerLogTail,
    pub tail_mass: f64,
    pub atom: u64,
    pub atom_mass: f64,
    pub n_log_n_finite: bool,
}

/// Validated count law with precomputed tables.
#[derive(Debug, Clone, PartialEq)]
pub enum CountLaw {
    Deterministic(u64),
    Poisson(f64),
    Geometric(f64),
    Table { pmf: Vec<f64>, cdf: Vec<f64>, biased_cdf: Vec<f64> },
    HeavyTail(Box<HeavyTailLaw>),
}

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::InvalidParameter(msg.into())
}

fn cumulative(xs: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    xs.map(|x| {
        acc += x;
        acc
    })
    .collect()
}

fn sample_cdf<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> u64 {
    let u = rng.random::<f64>() * cdf.last().copied().unwrap_or(1.0);
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u64
}

impl CountDistribution {
    pub fn validate(&self) -> Result<CountLaw, ModelError> {
        match *self {
            Self::Deterministic { n } => Ok(CountLaw::Deterministic(n)),
            Self::Poisson { mean } => {
                if !(mean.is_finite() && mean >= 0.0) {
                    return Err(bad(format!("poisson mean {mean}")));
                }
                Ok(CountLaw::Poisson(mean))
            }
            Self::Geometric { p } => {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(bad(format!("geometric success probability {p}")));
                }
                Ok(CountLaw::Geometric(p))
            }
            Self::Table { ref pmf } => {
                if pmf.is_empty() || pmf.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
                    return Err(bad("table pmf entries must be finite and nonnegative"));
                }
                let sum: f64 = pmf.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(ModelError::PmfNotNormalized { sum });
                }
                let pmf: Vec<f64> = pmf.iter().map(|p| p / sum).collect();
                let cdf = cumulative(pmf.iter().copied());
                let biased_cdf = cumulative(pmf.iter().enumerate().map(|(k, p)| k as f64 * p));
                Ok(CountLaw::Table { pmf, cdf, biased_cdf })
            }
            Self::HeavyTail { exponent: a, log_exponent: b, tail_mass, atom, atom_mass } => {
                if !(a.is_finite() && b.is_finite() && b >= 0.0) {
                    return Err(bad("heavy-tail exponents must be finite, log exponent >= 0"));
                }
                if !(a > 2.0 || (a == 2.0 && b > 1.0)) {
                    return Err(bad(format!(
                        "heavy-tail exponents ({a}, {b}) give an infinite mean"
                    )));
                }
                if !(0.0 < tail_mass && 0.0 <= atom_mass && tail_mass + atom_mass <= 1.0 + 1e-12) {
                    return Err(bad("heavy-tail masses must lie in [0, 1] and sum to at most 1"));
                }
                let k_max = heavy::truncation_point(a, b);
                Ok(CountLaw::HeavyTail(Box::new(HeavyTailLaw {
                    tail: PowerLogTail::new(a, b, k_max),
                    biased_tail: PowerLogTail::new(a - 1.0, b, k_max),
                    tail_mass,
                    atom,
                    atom_mass,
                    n_log_n_finite: a > 2.0 || b > 2.0,
                })))
            }
        }
    }
}

impl HeavyTailLaw {
    fn tail_mean(&self) -> f64 {
        self.biased_tail.normalizer() / self.tail.normalizer()
    }

    fn zero_mass(&self) -> f64 {
        (1.0 - self.tail_mass - self.atom_mass).max(0.0)
    }
}

impl CountLaw {
    pub fn mean(&self) -> f64 {
        match self {
            Self::Deterministic(n) => *n as f64,
            Self::Poisson(m) => *m,
            Self::Geometric(p) => (1.0 - p) / p,
            Self::Table { biased_cdf, .. } => *biased_cdf.last().unwrap(),
            Self::HeavyTail(h) => h.atom as f64 * h.atom_mass + h.tail_mass * h.tail_mean(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Self::Deterministic(_) => 0.0,
            Self::Poisson(m) => *m,
            Self::Geometric(p) => (1.0 - p) / (p * p),
            Self::Table { pmf, .. } => {
                let m = self.mean();
                pmf.iter().enumerate().map(|(k, p)| p * (k as f64 - m).powi(2)).sum()
            }
            Self::HeavyTail(h) => {
                let second = (h.atom as f64).powi(2) * h.atom_mass + h.tail_mass * h.tail.moment(2.0);
                second - self.mean().powi(2)
            }
        }
    }

    /// Analytic flag: `E[N log N] < ∞` for the (untruncated) family.
    pub fn n_log_n_finite(&self) -> bool {
        match self {
            Self::HeavyTail(h) => h.n_log_n_finite,
            _ => true,
        }
    }

    /// Largest possible count, if the support is bounded.
    pub fn max_count(&self) -> Option<u64> {
        match self {
            Self::Deterministic(n) => Some(*n),
            Self::Table { pmf, .. } => pmf.iter().rposition(|&p| p > 0.0).map(|k| k as u64),
            Self::HeavyTail(h) => Some(h.tail.k_max.max(h.atom)),
            Self::Poisson(_) | Self::Geometric(_) => None,
        }
    }

    pub fn pmf(&self, k: u64) -> f64 {
        match self {
            Self::Deterministic(n) => (k == *n) as u8 as f64,
            Self::Poisson(m) => {
                let mut p = (-m).exp();
                for j in 1..=k {
                    p *= m / j as f64;
                }
                p
            }
            Self::Geometric(p) => p * (1.0 - p).powf(k as f64),
            Self::Table { pmf, .. } => pmf.get(k as usize).copied().unwrap_or(0.0),
            Self::HeavyTail(h) => {
                let mut p = h.tail_mass * h.tail.pmf(k);
                if k == h.atom {
                    p += h.atom_mass;
                }
                if k == 0 {
                    p += h.zero_mass();
                }
                p
            }
        }
    }

    /// `k p_k / m`.
    pub fn size_biased_pmf(&self, k: u64) -> Result<f64, ModelError> {
        let m = self.mean();
        if m <= 0.0 {
            return Err(ModelError::ZeroMean);
        }
        Ok(k as f64 * self.pmf(k) / m)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self {
            Self::Deterministic(n) => *n,
            Self::Poisson(m) => poisson(*m, rng),
            Self::Geometric(p) => geometric(*p, rng),
            Self::Table { cdf, .. } => sample_cdf(cdf, rng),
            Self::HeavyTail(h) => {
                let u = rng.random::<f64>();
                if u < h.tail_mass {
                    h.tail.sample(rng)
                } else if u < h.tail_mass + h.atom_mass {
                    h.atom
                } else {
                    0
                }
            }
        }
    }

    /// Draws from the size-biased law `k p_k / m`; never returns zero.
    pub fn sample_size_biased<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u64, ModelError> {
        let m = self.mean();
        if m <= 0.0 {
            return Err(ModelError::ZeroMean);
        }
        Ok(match self {
            Self::Deterministic(n) => *n,
            Self::Poisson(m) => 1 + poisson(*m, rng),
            // k p^2 (1-p)^{k-1}: one plus a negative binomial with two successes
            Self::Geometric(p) => 1 + geometric(*p, rng) + geometric(*p, rng),
            Self::Table { biased_cdf, .. } => sample_cdf(biased_cdf, rng),
            Self::HeavyTail(h) => {
                let atom_weight = h.atom as f64 * h.atom_mass;
                if rng.random::<f64>() * m < atom_weight {
                    h.atom
                } else {
                    h.biased_tail.sample(rng)
                }
            }
        })
    }
}

fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean == 0.0 {
        0
    } else {
        Poisson::new(mean).unwrap().sample(rng) as u64
    }
}

fn geometric<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u64 {
    Geometric::new(p).unwrap().sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn heavy() -> CountLaw {
        CountDistribution::HeavyTail {
            exponent: 2.0,
            log_exponent: 2.0,
            tail_mass: 0.1,
            atom: 1,
            atom_mass: 0.75,
        }
        .validate()
        .unwrap()
    }

    #[test]
    fn table_normalization() {
        let bad = CountDistribution::Table { pmf: vec![0.5, 0.0, 0.6] };
        match bad.validate() {
            Err(ModelError::PmfNotNormalized { sum }) => assert!((sum - 1.1).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert!(CountDistribution::Table { pmf: vec![0.5, -0.1, 0.6] }.validate().is_err());
    }

    #[test]
    fn size_biased_poisson_by_brute_force() {
        let law = CountDistribution::Poisson { mean: 1.0 }.validate().unwrap();
        // brute force k p_k / m over k <= 50
        let mut p = (-1.0f64).exp();
        let mut brute = vec![0.0];
        for k in 1..=50u64 {
            p /= k as f64;
            brute.push(k as f64 * p);
        }
        assert!((brute[1] - 0.367_879_441_171_442_3).abs() < 1e-15);
        let total: f64 = brute.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for (k, &b) in brute.iter().enumerate() {
            assert!((law.size_biased_pmf(k as u64).unwrap() - b).abs() < 1e-15);
        }
    }

    #[test]
    fn size_biased_table_is_degenerate() {
        let law = CountDistribution::Table { pmf: vec![0.5, 0.0, 0.5] }.validate().unwrap();
        assert_eq!(law.size_biased_pmf(2).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert_eq!(law.sample_size_biased(&mut rng).unwrap(), 2);
        }
        let det = CountDistribution::Deterministic { n: 2 }.validate().unwrap();
        assert_eq!(det.sample_size_biased(&mut rng).unwrap(), 2);
    }

    #[test]
    fn zero_mean_has_no_size_bias() {
        let law = CountDistribution::Deterministic { n: 0 }.validate().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(law.sample_size_biased(&mut rng), Err(ModelError::ZeroMean)));
    }

    #[test]
    fn size_biased_sums_to_one() {
        let laws = [
            CountDistribution::Poisson { mean: 2.3 }.validate().unwrap(),
            CountDistribution::Geometric { p: 0.3 }.validate().unwrap(),
            CountDistribution::Table { pmf: vec![0.1, 0.2, 0.3, 0.4] }.validate().unwrap(),
        ];
        for law in &laws {
            let s: f64 = (0..400).map(|k| law.size_biased_pmf(k).unwrap()).sum();
            assert!((s - 1.0).abs() < 1e-9, "{law:?}");
        }
        let h = heavy();
        let CountLaw::HeavyTail(ref inner) = h else { unreachable!() };
        // atom part plus the biased tail family, which is normalized by construction
        let atom = h.size_biased_pmf(1).unwrap();
        let tail_mass = inner.tail_mass * inner.tail_mean() / h.mean();
        assert!((atom + tail_mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heavy_moments() {
        let h = heavy();
        // sums of 1/(k ln^2 k) and 1/(k^2 ln^2 k) over 2..=2^62-1: float64 summation to 10^7
        // plus integral tails
        let oracle = 0.75 + 0.1 * 2.086_473_526_383_848_3 / 0.692_605_814_674_249_5;
        assert!((h.mean() - oracle).abs() < 1e-9, "{}", h.mean());
        assert!(!h.n_log_n_finite());
        assert!(h.variance() > 1e3);
    }

    fn empirical_check(law: &CountLaw, biased: bool, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 100_000;
        let draws: Vec<u64> = (0..n)
            .map(|_| if biased { law.sample_size_biased(&mut rng).unwrap() } else { law.sample(&mut rng) })
            .collect();
        for k in 0..6u64 {
            let p = if biased { law.size_biased_pmf(k).unwrap() } else { law.pmf(k) };
            let freq = draws.iter().filter(|&&d| d == k).count() as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt().max(1e-12);
            assert!((freq - p).abs() <= 4.0 * se, "{law:?} biased={biased} k={k}: {freq} vs {p}");
        }
    }

    #[test]
    fn samplers_match_pmfs() {
        let laws = [
            CountDistribution::Poisson { mean: 1.7 }.validate().unwrap(),
            CountDistribution::Geometric { p: 0.4 }.validate().unwrap(),
            CountDistribution::Table { pmf: vec![0.4, 0.3, 0.2, 0.0, 0.1] }.validate().unwrap(),
            heavy(),
        ];
        for (i, law) in laws.iter().enumerate() {
            empirical_check(law, false, 10 + i as u64);
            empirical_check(law, true, 20 + i as u64);
        }
    }

    #[test]
    fn poisson_mean_over_many_draws() {
        let law = CountDistribution::Poisson { mean: 1.3 }.validate().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 100_000;
        let s: u64 = (0..n).map(|_| law.sample(&mut rng)).sum();
        let se = (1.3 / n as f64).sqrt();
        assert!((s as f64 / n as f64 - 1.3).abs() < 4.0 * se);
    }
}
