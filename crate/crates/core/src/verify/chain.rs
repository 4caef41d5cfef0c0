//! Markov chain and renewal structure of the spine.

use crate::model::ValidatedModel;
use crate::rng::replicate_rng;
use crate::spectral::SpectralData;
use crate::spine::{simulate_spine, SpineRecord, SpineRoot};
use crate::stats::{batch_mean_se, total_variation};

use super::{Check, TestReport};

/// Total-variation tolerance for transition rows and occupation frequencies.
pub const TV_TOLERANCE: f64 = 0.02;
const BATCHES: usize = 100;
/// Relative tolerance for `tau_n / n` against `beta`.
const SLLN_TOLERANCE: f64 = 0.05;
const SLLN_STEP: usize = 10_000;

fn run(model: &ValidatedModel, spectral: &SpectralData, n_steps: usize, seed: u64) -> Result<Vec<SpineRecord>, String> {
    simulate_spine(model, spectral, SpineRoot::Nu, n_steps, &mut replicate_rng(seed, 0)).map_err(|e| e.to_string())
}

/// Empirical transition rows and occupation of a spine started from `nu`
/// against the spine kernel and `nu`.
pub fn test_spine_chain(model: &ValidatedModel, spectral: &SpectralData, n_steps: usize, seed: u64) -> TestReport {
    let mut report = TestReport::new("spine_chain", model, n_steps as u64, seed);
    let records = match run(model, spectral, n_steps, seed) {
        Ok(r) => r,
        Err(e) => return report.void(format!("spine failed: {e}")),
    };
    let d = model.n_types();
    let mut counts = vec![vec![0u64; d]; d];
    for w in records.windows(2) {
        counts[w[0].sigma][w[1].sigma] += 1;
    }
    for (s, row) in counts.iter().enumerate() {
        let visits: u64 = row.iter().sum();
        if spectral.nu[s] <= 0.0 {
            continue;
        }
        if visits == 0 {
            report.notes.push(format!("type {} never left", model.types.label(s)));
            report.checks.push(Check::at_most(format!("row_{}", model.types.label(s)), 1.0, TV_TOLERANCE));
            continue;
        }
        let empirical: Vec<f64> = row.iter().map(|&c| c as f64 / visits as f64).collect();
        let tv = total_variation(&empirical, &spectral.spine_kernel[s]);
        report.checks.push(Check::at_most(format!("row_{}", model.types.label(s)), tv, TV_TOLERANCE));
    }
    let mut occupation = vec![0.0; d];
    for r in &records {
        occupation[r.sigma] += 1.0 / records.len() as f64;
    }
    report.checks.push(Check::at_most("occupation", total_variation(&occupation, &spectral.nu), TV_TOLERANCE));
    report.finish()
}

/// Mean inter-birth time along a stationary spine against `beta`, with a
/// batch-means standard error, and `tau_n / n` at `n = 10^4` when the run is long enough.
pub fn test_renewal_mean(model: &ValidatedModel, spectral: &SpectralData, n_steps: usize, seed: u64) -> TestReport {
    let mut report = TestReport::new("renewal_mean", model, n_steps as u64, seed);
    let records = match run(model, spectral, n_steps + 1, seed) {
        Ok(r) => r,
        Err(e) => return report.void(format!("spine failed: {e}")),
    };
    let ts: Vec<f64> = records.iter().filter_map(|r| r.t).collect();
    report.checks.push(Check::band("mean_t", &batch_mean_se(&ts, BATCHES), spectral.beta));
    if let Some(r) = records.get(SLLN_STEP) {
        let rel = (r.tau / SLLN_STEP as f64 / spectral.beta - 1.0).abs();
        report.checks.push(Check::at_most("tau_n_over_n", rel, SLLN_TOLERANCE));
    }
    report.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn setup(name: &str) -> (ValidatedModel, SpectralData) {
        let m = fixtures::model(name).unwrap();
        let s = SpectralData::compute(&m).unwrap();
        (m, s)
    }

    #[test]
    fn det2_chain_is_degenerate() {
        let (m, s) = setup("det2");
        let r = test_spine_chain(&m, &s, 1000, 1);
        assert!(r.pass);
        assert!(r.statistic < 1e-12);
        let r = test_renewal_mean(&m, &s, 1000, 1);
        assert!(r.pass);
        assert!(r.check("mean_t").unwrap().statistic < 1e-12);
    }

    #[test]
    fn asym2_chain_matches_frozen_kernel() {
        let (m, s) = setup("asym2");
        let frozen = fixtures::oracle_values().asym2.spine_kernel;
        for (a, b) in s.spine_kernel.iter().flatten().zip(frozen.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(test_spine_chain(&m, &s, 50_000, 11).pass);
    }

    #[test]
    fn renewal_means() {
        let (m, s) = setup("sym2");
        let r = test_renewal_mean(&m, &s, 20_000, 3);
        assert!(r.pass, "{r:?}");
        assert!(r.check("tau_n_over_n").is_some());
        let (m, s) = setup("yule1");
        let r = test_renewal_mean(&m, &s, 5000, 3);
        assert!(r.pass && r.check("tau_n_over_n").is_none());
    }

    #[test]
    fn zero_steps_voids() {
        let (m, s) = setup("sym2");
        assert_eq!(test_spine_chain(&m, &s, 0, 1).verdict, crate::verify::Verdict::Void);
    }
}
