//! Convergent versus divergent behavior of `W` under the size-biased measure.
//!
//! `S(t)` is the median over replicates of `log(1 + W(t))` with root `~ nu`, on the
//! grid `t_max * i / 8`. A bounded curve is read as `W` finite; steady growth as
//! `W = infinity`. Simulation cannot prove either, so both verdicts are thresholded
//! heuristics with frozen constants.

use serde::{Deserialize, Serialize};

use crate::forward::{Caps, ForwardError, RootChoice};
use crate::model::ValidatedModel;
use crate::parallel::{map_replicates, Execution};
use crate::rng::replicate_rng;
use crate::spectral::SpectralData;
use crate::spine::simulate_size_biased_population;
use crate::stats::{median, ROUNDOFF};

use super::{Check, TestReport};

pub const GRID_POINTS: usize = 8;
/// Larger truncation discard at any grid point voids the verdict.
pub const MAX_DISCARD: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DichotomySettings {
    pub t_max: f64,
    pub replicates: u64,
    pub max_births: u64,
    #[serde(default = "default_max_pending")]
    pub max_pending: usize,
    pub k_conv: f64,
    pub delta_div: f64,
}

fn default_max_pending() -> usize {
    10_000_000
}

impl Default for DichotomySettings {
    fn default() -> Self {
        Self {
            t_max: 8.0,
            replicates: 400,
            max_births: 2_000_000,
            max_pending: default_max_pending(),
            k_conv: 1.5,
            delta_div: 0.5,
        }
    }
}

impl DichotomySettings {
    /// Frozen settings for a bundled fixture, defaults otherwise.
    pub fn for_fixture(name: &str) -> Self {
        crate::fixtures::oracle_values().dichotomy.get(name).cloned().unwrap_or_default()
    }

    pub fn grid(&self) -> Vec<f64> {
        (1..=GRID_POINTS).map(|i| self.t_max * i as f64 / GRID_POINTS as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DichotomyCurve {
    pub grid: Vec<f64>,
    pub s: Vec<f64>,
    /// Fraction of replicates truncated at or before each grid point.
    pub discard: Vec<f64>,
    pub replicates: u64,
}

impl DichotomyCurve {
    pub fn max_s(&self) -> f64 {
        self.s.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `S(t_max) - S(t_max / 4)`.
    pub fn increase(&self) -> f64 {
        self.s[GRID_POINTS - 1] - self.s[GRID_POINTS / 4 - 1]
    }

    /// Largest drop between consecutive points over the last half of the grid.
    pub fn last_half_drop(&self) -> f64 {
        self.s[GRID_POINTS / 2 - 1..].windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }

    pub fn max_discard(&self) -> f64 {
        self.discard.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DichotomyVerdict {
    Convergent,
    Divergent,
    Inconclusive,
    Void,
}

pub fn dichotomy_curve(
    model: &ValidatedModel,
    spectral: &SpectralData,
    settings: &DichotomySettings,
    seed: u64,
    exec: Execution,
) -> Result<DichotomyCurve, ForwardError> {
    let grid = settings.grid();
    let caps = Caps { max_births: settings.max_births, max_pending: settings.max_pending };
    let runs: Result<Vec<Vec<f64>>, ForwardError> = map_replicates(settings.replicates, exec, |r| {
        let tr = simulate_size_biased_population(
            model,
            spectral,
            RootChoice::Nu,
            settings.t_max,
            caps,
            &grid,
            &[],
            &mut replicate_rng(seed, r),
        )?;
        Ok(tr.w)
    })
    .into_iter()
    .collect();
    let runs = runs?;
    let mut s = Vec::with_capacity(grid.len());
    let mut discard = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let vals: Vec<f64> = runs.iter().filter_map(|w| w.get(i)).map(|w| w.ln_1p()).collect();
        discard.push(1.0 - vals.len() as f64 / runs.len().max(1) as f64);
        s.push(if vals.is_empty() { f64::NAN } else { median(&vals) });
    }
    Ok(DichotomyCurve { grid, s, discard, replicates: settings.replicates })
}

fn checks_for(curve: &DichotomyCurve, settings: &DichotomySettings, expected: DichotomyVerdict) -> Vec<Check> {
    match expected {
        DichotomyVerdict::Convergent => vec![
            Check::at_most("max_s", curve.max_s(), settings.k_conv),
            Check::at_most("increase", curve.increase(), settings.delta_div),
        ],
        _ => vec![
            Check::at_least("increase", curve.increase(), settings.delta_div),
            Check::at_most("last_half_drop", curve.last_half_drop(), ROUNDOFF),
            Check::at_least("max_s", curve.max_s(), settings.k_conv),
        ],
    }
}

/// Verdict from a curve: convergent when `max S <= K_conv`, divergent when
/// `S(t_max) - S(t_max / 4) >= delta_div` and `S` does not drop over the last half.
pub fn classify_curve(curve: &DichotomyCurve, settings: &DichotomySettings) -> DichotomyVerdict {
    if curve.s.iter().any(|s| !s.is_finite()) || curve.max_discard() > MAX_DISCARD {
        return DichotomyVerdict::Void;
    }
    let convergent = curve.max_s() <= settings.k_conv;
    let divergent = curve.increase() >= settings.delta_div && curve.last_half_drop() <= ROUNDOFF;
    match (convergent, divergent) {
        (true, false) => DichotomyVerdict::Convergent,
        (false, true) => DichotomyVerdict::Divergent,
        _ => DichotomyVerdict::Inconclusive,
    }
}

/// One fixture's curve checked against an expected verdict; void without one.
pub fn dichotomy_single(
    model: &ValidatedModel,
    spectral: &SpectralData,
    settings: &DichotomySettings,
    expected: Option<DichotomyVerdict>,
    seed: u64,
    exec: Execution,
) -> TestReport {
    let mut report = TestReport::new("dichotomy", model, settings.replicates, seed);
    let curve = match dichotomy_curve(model, spectral, settings, seed, exec) {
        Ok(c) => c,
        Err(e) => return report.void(format!("simulation failed: {e}")),
    };
    let verdict = classify_curve(&curve, settings);
    report.discard_rate = curve.max_discard();
    report.notes.push(format!("verdict {}", serde_json::to_string(&verdict).unwrap_or_default()));
    report.details = serde_json::to_value((&curve, settings)).ok();
    let Some(expected) = expected.filter(|e| matches!(e, DichotomyVerdict::Convergent | DichotomyVerdict::Divergent))
    else {
        return report.void("no expected verdict");
    };
    report.notes.push(format!("expected {}", serde_json::to_string(&expected).unwrap_or_default()));
    report.checks = checks_for(&curve, settings, expected);
    if verdict == DichotomyVerdict::Void {
        let rate = report.discard_rate;
        return report.void(format!("truncation discard {rate:.3} or empty grid point"));
    }
    report.finish()
}

/// Paired run: `finite` should come out convergent and `divergent` divergent.
pub fn dichotomy_experiment(
    finite: (&ValidatedModel, &SpectralData, &DichotomySettings),
    divergent: (&ValidatedModel, &SpectralData, &DichotomySettings),
    seed: u64,
    exec: Execution,
) -> [TestReport; 2] {
    [
        dichotomy_single(finite.0, finite.1, finite.2, Some(DichotomyVerdict::Convergent), seed, exec),
        dichotomy_single(divergent.0, divergent.1, divergent.2, Some(DichotomyVerdict::Divergent), seed, exec),
    ]
}
