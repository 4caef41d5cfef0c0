//! The size-biased life law and the spine.
//!
//! Under the size-biased measure the ancestor's life is reweighted by `xi_bar / h(s)`
//! and one child is distinguished with probability `exp(-alpha age) h(type) / xi_bar`.
//! Following distinguished children gives the spine, whose types form a Markov
//! chain with kernel `h(r) mhat(s, r) / h(s)` and whose birth-time increments
//! form a Markov renewal process.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::forward::{self, Caps, Characteristic, ForwardError, Measure, RootChoice, SimConfig, Trajectory};
use crate::model::{Life, LifePoint, ModelError, TypeIndex, ValidatedModel};
use crate::rng::{weighted_index, SimRng};
use crate::spectral::SpectralData;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpineError {
    #[error("type {0} has no offspring, so its size-biased life is undefined")]
    AbsorbingType(TypeIndex),
    #[error("xi_bar = {xi_bar} exceeds the rejection bound {bound}")]
    BoundViolation { xi_bar: f64, bound: f64 },
    #[error("spine needs at least one step")]
    NoSteps,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A life drawn from the size-biased law; `points[distinguished]` has multiplicity 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeBiasedLife {
    pub life: Life,
    pub distinguished: usize,
}

impl SizeBiasedLife {
    pub fn distinguished_point(&self) -> LifePoint {
        self.life.points[self.distinguished]
    }

    /// Points other than the distinguished child.
    pub fn siblings(&self) -> Vec<LifePoint> {
        let mut out = self.life.points.clone();
        out.remove(self.distinguished);
        out
    }
}

/// Splits `n` children at a common age so the distinguished one sits at a uniform
/// position among them.
fn push_split<R: Rng + ?Sized>(
    out: &mut Vec<(LifePoint, bool)>,
    age: f64,
    child: TypeIndex,
    n: u64,
    rng: &mut R,
) {
    let before = rng.random_range(0..n);
    let after = n - 1 - before;
    if before > 0 {
        out.push((LifePoint { age, child, multiplicity: before }, false));
    }
    out.push((LifePoint { age, child, multiplicity: 1 }, true));
    if after > 0 {
        out.push((LifePoint { age, child, multiplicity: after }, false));
    }
}

fn finish(mut tagged: Vec<(LifePoint, bool)>, death_age: Option<f64>) -> SizeBiasedLife {
    tagged.sort_by(|a, b| a.0.age.total_cmp(&b.0.age));
    let distinguished = tagged.iter().position(|(_, d)| *d).expect("a distinguished point");
    SizeBiasedLife { life: Life { points: tagged.into_iter().map(|(p, _)| p).collect(), death_age }, distinguished }
}

/// Exact sampler by channel decomposition: pick a channel with probability
/// `E[N] L(alpha) h(child) / h(s)`, size-bias its count, tilt the distinguished
/// point's age by `exp(-alpha a)`, and draw every other point ordinarily.
pub fn sample_size_biased_life<R: Rng + ?Sized>(
    model: &ValidatedModel,
    spectral: &SpectralData,
    s: TypeIndex,
    rng: &mut R,
) -> Result<SizeBiasedLife, SpineError> {
    let outgoing = model.outgoing(s);
    let alpha = spectral.alpha;
    let weights: Vec<f64> = outgoing
        .iter()
        .map(|&c| {
            let ch = &model.channels[c];
            ch.mean * ch.age.laplace(alpha) * spectral.h[ch.child]
        })
        .collect();
    if outgoing.is_empty() || !(spectral.h[s] > 0.0) || weights.iter().all(|&w| w <= 0.0) {
        return Err(SpineError::AbsorbingType(s));
    }
    let chosen = outgoing[weighted_index(&weights, rng)];
    let mut tagged = Vec::new();
    let mut plain = Vec::new();
    for &c in outgoing {
        let ch = &model.channels[c];
        if c != chosen {
            let n = ch.count.sample(rng);
            model.push_channel_points(c, n, &mut plain, usize::MAX, rng)?;
            continue;
        }
        let n = ch.count.sample_size_biased(rng)?;
        let age = ch.age.sample_tilted(alpha, rng);
        if ch.grouped() {
            push_split(&mut tagged, age, ch.child, n, rng);
        } else {
            tagged.push((LifePoint { age, child: ch.child, multiplicity: 1 }, true));
            model.push_channel_points(c, n - 1, &mut plain, usize::MAX, rng)?;
        }
    }
    tagged.extend(plain.into_iter().map(|p| (p, false)));
    Ok(finish(tagged, model.sample_death(s, rng)))
}

/// Rejection oracle: accept `life ~ P_s` with probability `xi_bar / bound`, then
/// distinguish a child with probability proportional to its weight.
pub fn sample_size_biased_life_rejection<R: Rng + ?Sized>(
    model: &ValidatedModel,
    spectral: &SpectralData,
    s: TypeIndex,
    bound: f64,
    rng: &mut R,
) -> Result<SizeBiasedLife, SpineError> {
    if model.outgoing(s).is_empty() || !(spectral.h[s] > 0.0) {
        return Err(SpineError::AbsorbingType(s));
    }
    let alpha = spectral.alpha;
    loop {
        let life = model.sample_life(s, rng);
        let x = life.xi_bar(alpha, &spectral.h);
        if x > bound * (1.0 + 1e-12) {
            return Err(SpineError::BoundViolation { xi_bar: x, bound });
        }
        if rng.random::<f64>() * bound >= x {
            continue;
        }
        let weights: Vec<f64> = life
            .points
            .iter()
            .map(|p| p.multiplicity as f64 * (-alpha * p.age).exp() * spectral.h[p.child])
            .collect();
        let pick = weighted_index(&weights, rng);
        let mut tagged = Vec::with_capacity(life.points.len() + 2);
        for (i, p) in life.points.iter().enumerate() {
            if i == pick {
                push_split(&mut tagged, p.age, p.child, p.multiplicity, rng);
            } else {
                tagged.push((*p, false));
            }
        }
        return Ok(finish(tagged, life.death_age));
    }
}

/// One step `v_k` of the spine.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpineRecord {
    pub k: usize,
    pub sigma: TypeIndex,
    /// Birth of `v_k` minus birth of `v_{k-1}`; `None` for the root.
    pub t: Option<f64>,
    pub xi_bar: f64,
    pub tau: f64,
    pub siblings: Vec<LifePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpineRoot {
    Fixed(TypeIndex),
    Nu,
}

/// Records `v_0, ..., v_{n_steps - 1}` of the spine.
pub fn simulate_spine(
    model: &ValidatedModel,
    spectral: &SpectralData,
    root: SpineRoot,
    n_steps: usize,
    rng: &mut SimRng,
) -> Result<Vec<SpineRecord>, SpineError> {
    if n_steps == 0 {
        return Err(SpineError::NoSteps);
    }
    let mut sigma = match root {
        SpineRoot::Fixed(s) => s,
        SpineRoot::Nu => weighted_index(&spectral.nu, rng),
    };
    let (mut tau, mut t) = (0.0, None);
    let mut out = Vec::with_capacity(n_steps);
    for k in 0..n_steps {
        let sb = sample_size_biased_life(model, spectral, sigma, rng)?;
        let next = sb.distinguished_point();
        out.push(SpineRecord {
            k,
            sigma,
            t,
            xi_bar: sb.life.xi_bar(spectral.alpha, &spectral.h),
            tau,
            siblings: sb.siblings(),
        });
        sigma = next.child;
        t = Some(next.age);
        tau += next.age;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EtaPartial {
    /// `sum_{j <= n} exp(-alpha tau_j) sum_{siblings of v_j} exp(-alpha age) h(type)`.
    pub eta: f64,
    /// Partial sums for `j = 0..=n`.
    pub partial_sums: Vec<f64>,
    /// `exp(-alpha tau_j) xi_bar_j` for `j = 0..=n`.
    pub upper_bounds: Vec<f64>,
}

/// Partial sums of the discounted sibling mass along the spine, up to record `n`.
pub fn eta_bar_partial(records: &[SpineRecord], spectral: &SpectralData, n: usize) -> EtaPartial {
    let alpha = spectral.alpha;
    let mut acc = crate::stats::Neumaier::default();
    let mut partial_sums = Vec::with_capacity(n + 1);
    let mut upper_bounds = Vec::with_capacity(n + 1);
    for r in records.iter().take(n + 1) {
        let discount = (-alpha * r.tau).exp();
        acc.add(discount * crate::model::xi_bar(&r.siblings, alpha, &spectral.h));
        partial_sums.push(acc.value());
        upper_bounds.push(discount * r.xi_bar);
    }
    EtaPartial { eta: acc.value(), partial_sums, upper_bounds }
}

/// `exp(-alpha tau_n) max(0, xi_bar_n - sup h) / h(sigma_0)`, a lower bound for `W` at the
/// birth of `v_n`'s children.
/// Excesses within roundoff of `sup h` count as zero.
pub fn sibling_lower_bound(record: &SpineRecord, spectral: &SpectralData, sigma0: TypeIndex) -> f64 {
    let excess = record.xi_bar - spectral.sup_h;
    if excess <= 1e-12 * spectral.sup_h {
        return 0.0;
    }
    (-spectral.alpha * record.tau).exp() * excess / spectral.h[sigma0]
}

/// Forward simulation under the size-biased measure: the spine's lives are size-biased
/// and its distinguished child continues the spine; everyone else reproduces ordinarily.
pub fn simulate_size_biased_population(
    model: &ValidatedModel,
    spectral: &SpectralData,
    root: RootChoice,
    horizon: f64,
    caps: Caps,
    sample_times: &[f64],
    chis: &[Characteristic],
    rng: &mut SimRng,
) -> Result<Trajectory, ForwardError> {
    let config = SimConfig {
        root,
        horizon,
        caps,
        sample_times: sample_times.to_vec(),
        chis: chis.to_vec(),
        measure: Measure::SizeBiased,
        audit: false,
    };
    forward::simulate(model, spectral, &config, rng)
}
