//! Mean identities: `E_s[xi_bar] = h(s)`, the change of measure, the moment
//! identity, sampler agreement and the single-type reduction.

use crate::forward::{simulate_replicates, Characteristic, Measure, RootChoice, SimConfig, Trajectory};
use crate::model::{CountLaw, TypeIndex, ValidatedModel};
use crate::parallel::Execution;
use crate::rng::{derive_seed, replicate_rng, weighted_index};
use crate::spectral::{x_log_plus_x, xlogx_verdict, SpectralData, XlogxVerdict};
use crate::spine::{sample_size_biased_life, sample_size_biased_life_rejection, SizeBiasedLife};
use crate::stats::{ks_distance, ks_threshold, mean_se};

use super::{Check, TestReport};

/// Bounded functionals `g` of the population up to time `t`.
pub const FUNCTIONALS: [&str; 5] = ["min_born_50", "extinct", "type_share_first", "min_w_3", "early_first_birth"];

/// Rejection samplers with acceptance rate below this are not run.
const MIN_ACCEPTANCE: f64 = 1e-3;

fn live_types(model: &ValidatedModel, spectral: &SpectralData) -> Vec<TypeIndex> {
    (0..model.n_types()).filter(|&s| !model.outgoing(s).is_empty() && spectral.h[s] > 0.0).collect()
}

/// `E_s[xi_bar] = h(s)` for every type, `n` ordinary lives per type.
pub fn test_mean_xi_bar(model: &ValidatedModel, spectral: &SpectralData, n: u64, seed: u64) -> TestReport {
    let mut report = TestReport::new("mean_xi_bar", model, n, seed);
    for s in 0..model.n_types() {
        let mut rng = replicate_rng(seed, s as u64);
        let xs: Vec<f64> = (0..n).map(|_| model.sample_life(s, &mut rng).xi_bar(spectral.alpha, &spectral.h)).collect();
        report.checks.push(Check::band(format!("type_{}", model.types.label(s)), &mean_se(&xs), spectral.h[s]));
    }
    report.finish()
}

fn functional_values(tr: &Trajectory, t: f64) -> [f64; 5] {
    let born = tr.z_chi[0][0];
    [
        (tr.born_count[0] as f64).min(50.0),
        tr.extinct as u8 as f64,
        tr.z_chi[1][0] / born,
        tr.w[0].min(3.0),
        tr.first_birth.is_some_and(|b| b < t / 6.0) as u8 as f64,
    ]
}

/// `E_s[W_t g] = E~_s[g]` for the [`FUNCTIONALS`], each root type, `n` replicates per measure.
pub fn test_change_of_measure(
    model: &ValidatedModel,
    spectral: &SpectralData,
    t: f64,
    n: u64,
    seed: u64,
    exec: Execution,
) -> TestReport {
    let mut report = TestReport::new("change_of_measure", model, 2 * n, seed);
    let (mut discarded, mut total) = (0usize, 0usize);
    for s in live_types(model, spectral) {
        let mut sides = Vec::new();
        for (i, measure) in [Measure::Ordinary, Measure::SizeBiased].into_iter().enumerate() {
            let mut config = SimConfig::new(RootChoice::Fixed(s), t, vec![t]);
            config.chis = vec![Characteristic::Born, Characteristic::TypeCount(0)];
            config.measure = measure;
            let runs = match simulate_replicates(model, spectral, &config, n, derive_seed(seed, (2 * s + i) as u64), exec) {
                Ok(runs) => runs,
                Err(e) => return report.void(format!("simulation failed: {e}")),
            };
            total += runs.len();
            let kept: Vec<&Trajectory> = runs.iter().filter(|tr| !tr.w.is_empty()).collect();
            discarded += runs.len() - kept.len();
            let per_g: Vec<Vec<f64>> = (0..FUNCTIONALS.len())
                .map(|g| {
                    kept.iter()
                        .map(|tr| {
                            let v = functional_values(tr, t)[g];
                            if measure == Measure::Ordinary {
                                v * tr.w[0]
                            } else {
                                v
                            }
                        })
                        .collect()
                })
                .collect();
            sides.push(per_g);
        }
        for (g, name) in FUNCTIONALS.iter().enumerate() {
            let (a, b) = (mean_se(&sides[0][g]), mean_se(&sides[1][g]));
            report.checks.push(Check::two_sample(format!("{name}@{}", model.types.label(s)), &a, &b));
        }
    }
    report.discard_rate = if total > 0 { discarded as f64 / total as f64 } else { 0.0 };
    if report.checks.is_empty() {
        return report.void("no type with offspring");
    }
    if report.discard_rate > 0.01 {
        let rate = report.discard_rate;
        return report.void(format!("truncation discard rate {rate:.4} exceeds 0.01"));
    }
    report.finish()
}

/// `E_pi[xi_bar log+ xi_bar] = E~_nu[log+ xi_bar]`; ordinary lives with root `~ pi`
/// against size-biased lives with root `~ nu`, `n` per side.
pub fn test_moment_identity(model: &ValidatedModel, spectral: &SpectralData, n: u64, seed: u64) -> TestReport {
    let mut report = TestReport::new("moment_identity", model, 2 * n, seed);
    if xlogx_verdict(model, spectral) != XlogxVerdict::Finite {
        return report.void("x log x moment not known to be finite");
    }
    let alpha = spectral.alpha;
    let mut rng = replicate_rng(seed, 0);
    let lhs: Vec<f64> = (0..n)
        .map(|_| {
            let s = weighted_index(&spectral.pi, &mut rng);
            x_log_plus_x(model.sample_life(s, &mut rng).xi_bar(alpha, &spectral.h))
        })
        .collect();
    let mut rng = replicate_rng(seed, 1);
    let mut rhs = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let s = weighted_index(&spectral.nu, &mut rng);
        match sample_size_biased_life(model, spectral, s, &mut rng) {
            Ok(sb) => rhs.push(sb.life.xi_bar(alpha, &spectral.h).ln().max(0.0)),
            Err(e) => return report.void(format!("size-biased sampler failed: {e}")),
        }
    }
    report.checks.push(Check::two_sample("lhs_vs_rhs", &mean_se(&lhs), &mean_se(&rhs)));
    report.finish()
}

/// Upper bound on `xi_bar` for a type-`s` life: `sup h` times the largest possible count.
fn xi_bar_bound(model: &ValidatedModel, spectral: &SpectralData, s: TypeIndex) -> Option<f64> {
    let mut total = 0.0;
    for &c in model.outgoing(s) {
        total += model.channels[c].count.max_count()? as f64;
    }
    Some(total * spectral.sup_h)
}

struct Draws {
    xi_bar: Vec<f64>,
    age: Vec<f64>,
    child: Vec<TypeIndex>,
}

impl Draws {
    fn push(&mut self, sb: &SizeBiasedLife, spectral: &SpectralData) {
        let d = sb.distinguished_point();
        self.xi_bar.push(sb.life.xi_bar(spectral.alpha, &spectral.h));
        self.age.push(d.age);
        self.child.push(d.child);
    }
}

/// Exact and rejection size-biased samplers agree in law, `n` draws each per type.
pub fn test_sampler_equivalence(model: &ValidatedModel, spectral: &SpectralData, n: u64, seed: u64) -> TestReport {
    let mut report = TestReport::new("sampler_equivalence", model, 2 * n, seed);
    let types = live_types(model, spectral);
    let mut bounds = Vec::new();
    for &s in &types {
        let Some(b) = xi_bar_bound(model, spectral, s) else {
            return report.void("unbounded offspring counts; no rejection bound");
        };
        if spectral.h[s] / b < MIN_ACCEPTANCE {
            return report.void(format!("rejection acceptance rate {:.2e} too low", spectral.h[s] / b));
        }
        bounds.push(b);
    }
    for (&s, &bound) in types.iter().zip(&bounds) {
        let label = model.types.label(s);
        let mut exact = Draws { xi_bar: vec![], age: vec![], child: vec![] };
        let mut rejection = Draws { xi_bar: vec![], age: vec![], child: vec![] };
        let mut rng = replicate_rng(seed, 2 * s as u64);
        let mut rng_rej = replicate_rng(seed, 2 * s as u64 + 1);
        for _ in 0..n {
            let a = sample_size_biased_life(model, spectral, s, &mut rng);
            let b = sample_size_biased_life_rejection(model, spectral, s, bound, &mut rng_rej);
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    exact.push(&a, spectral);
                    rejection.push(&b, spectral);
                }
                (Err(e), _) | (_, Err(e)) => return report.void(format!("sampler failed: {e}")),
            }
        }
        let threshold = ks_threshold(n as usize, n as usize);
        report.checks.push(Check::at_most(format!("ks_xi_bar@{label}"), ks_distance(&exact.xi_bar, &rejection.xi_bar), threshold));
        report.checks.push(Check::at_most(format!("ks_age@{label}"), ks_distance(&exact.age, &rejection.age), threshold));
        for r in 0..model.n_types() {
            let freq = |d: &Draws| mean_se(&d.child.iter().map(|&c| (c == r) as u8 as f64).collect::<Vec<_>>());
            report.checks.push(Check::two_sample(
                format!("child_{}@{label}", model.types.label(r)),
                &freq(&exact),
                &freq(&rejection),
            ));
        }
    }
    if report.checks.is_empty() {
        return report.void("no type with offspring");
    }
    report.finish()
}

/// Independent form of `k p_k / m`; the shifted pmf for Poisson counts.
fn size_biased_oracle(law: &CountLaw, k: u64) -> f64 {
    match law {
        CountLaw::Poisson(m) if k > 0 => {
            let mut p = (-m).exp();
            for j in 1..k {
                p *= m / j as f64;
            }
            p
        }
        CountLaw::Poisson(_) => 0.0,
        _ => k as f64 * law.pmf(k) / law.mean(),
    }
}

/// Reduction to Galton-Watson for one type with every birth at the same fixed age:
/// `xi_bar = X / m` on `n` lives, the size-biased pmf for `k <= 50`, and
/// `E[W_g] = 1` for generations 5 and 10 over `n` replicates.
pub fn test_kesten_stigum_single_type(model: &ValidatedModel, spectral: &SpectralData, n: u64, seed: u64) -> TestReport {
    let mut report = TestReport::new("single_type_reduction", model, n, seed);
    if model.n_types() != 1 {
        return report.void("needs a single type");
    }
    let ages: Vec<f64> = model.channels.iter().filter(|c| c.age.is_deterministic()).map(|c| c.age.mean()).collect();
    if ages.len() != model.channels.len() || ages.is_empty() || ages.iter().any(|&a| a != ages[0]) {
        return report.void("needs every birth at one fixed age");
    }
    let d = ages[0];
    let m: f64 = model.channels.iter().map(|c| c.mean).sum();

    let mut rng = replicate_rng(seed, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let life = model.sample_life(0, &mut rng);
        let x = life.total_children() as f64 / m;
        worst = worst.max((life.xi_bar(spectral.alpha, &spectral.h) - x).abs() / x.max(1.0));
    }
    report.checks.push(Check::at_most("xi_bar_is_x_over_m", worst, 1e-12));

    let mut worst: f64 = 0.0;
    for c in &model.channels {
        for k in 0..=50 {
            match c.count.size_biased_pmf(k) {
                Ok(p) => worst = worst.max((p - size_biased_oracle(&c.count, k)).abs()),
                Err(e) => return report.void(format!("size-biased pmf failed: {e}")),
            }
        }
    }
    report.checks.push(Check::at_most("size_biased_pmf", worst, 1e-12));

    let gens = [5.0, 10.0];
    let times: Vec<f64> = gens.iter().map(|g| (g - 0.5) * d).collect();
    let config = SimConfig::new(RootChoice::Fixed(0), times[1], times.clone());
    let runs = match simulate_replicates(model, spectral, &config, n, derive_seed(seed, 1), Execution::Parallel) {
        Ok(runs) => runs,
        Err(e) => return report.void(format!("simulation failed: {e}")),
    };
    let mut discarded = 0;
    for (i, g) in gens.iter().enumerate() {
        let ws: Vec<f64> = runs.iter().filter_map(|tr| tr.w.get(i).copied()).collect();
        discarded = discarded.max(runs.len() - ws.len());
        report.checks.push(Check::band(format!("mean_w_gen_{g}"), &mean_se(&ws), 1.0));
    }
    report.discard_rate = discarded as f64 / n.max(1) as f64;
    if report.discard_rate > 0.01 {
        let rate = report.discard_rate;
        report.notes.push(format!("truncation discard rate {rate:.4} exceeds 0.01"));
        report.verdict = super::Verdict::Void;
    }
    report.finish()
}
