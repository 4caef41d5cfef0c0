//! Diagnostics around the necessity side of the x log x condition. Nothing here
//! can fail; the report always passes and carries its findings in `details`.

use serde::Serialize;

use crate::model::{TypeIndex, ValidatedModel};
use crate::rng::{derive_seed, replicate_rng};
use crate::spectral::{x_log_plus_x, SpectralData, XLOGX_TRUNCATIONS};
use crate::spine::{simulate_spine, SpineRoot};
use crate::stats::correlation;

use super::TestReport;

pub const SPINE_INDICES: [usize; 5] = [1, 2, 4, 8, 16];
pub const LAGS: [usize; 4] = [1, 2, 4, 8];
/// Lives per type for truncated moments, per unit of `n`.
const LIVES_PER_N: u64 = 10;
/// A type is flagged when the last truncation increment exceeds this fraction of the previous one.
const GROWTH_RATIO: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeMoments {
    pub typ: String,
    /// `(M, E_s[min(xi_bar log+ xi_bar, M)])`.
    pub truncated_means: Vec<(f64, f64)>,
    pub diverging: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnTimes {
    pub typ: String,
    pub visits: u64,
    pub mean_return: Option<f64>,
    /// `1 / nu(s)`.
    pub expected_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventCorrelation {
    pub m: usize,
    pub n: usize,
    /// `None` when either indicator is constant across replicates.
    pub correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NecessityData {
    pub c: f64,
    pub moments: Vec<TypeMoments>,
    pub return_times: Vec<ReturnTimes>,
    pub correlations: Vec<EventCorrelation>,
    pub max_positive_correlation: Option<f64>,
}

fn type_moments(model: &ValidatedModel, spectral: &SpectralData, s: TypeIndex, lives: u64, seed: u64) -> TypeMoments {
    let mut rng = replicate_rng(seed, s as u64);
    let mut sums = [0.0; XLOGX_TRUNCATIONS.len()];
    for _ in 0..lives {
        let x = x_log_plus_x(model.sample_life(s, &mut rng).xi_bar(spectral.alpha, &spectral.h));
        for (acc, m) in sums.iter_mut().zip(XLOGX_TRUNCATIONS) {
            *acc += x.min(m);
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / lives.max(1) as f64).collect();
    let k = means.len();
    let (last, prev) = (means[k - 1] - means[k - 2], means[k - 2] - means[k - 3]);
    TypeMoments {
        typ: model.types.label(s).into(),
        truncated_means: XLOGX_TRUNCATIONS.iter().copied().zip(means).collect(),
        diverging: last > 0.0 && last > GROWTH_RATIO * prev,
    }
}

/// (a) per-type truncated `xi_bar log+ xi_bar` moments from `10 n` lives, (b) return
/// times of one spine of `n` steps, (c) correlations of `A_m = {log+ xi_bar_m > c m}`
/// and `A_{m + lag}` across `n` independent spines.
pub fn necessity_data(
    model: &ValidatedModel,
    spectral: &SpectralData,
    n: u64,
    c: f64,
    seed: u64,
) -> Result<NecessityData, String> {
    let d = model.n_types();
    let live: Vec<TypeIndex> = (0..d).filter(|&s| !model.outgoing(s).is_empty()).collect();
    let moments = live
        .iter()
        .map(|&s| type_moments(model, spectral, s, LIVES_PER_N * n, derive_seed(seed, 0)))
        .collect();

    let spine = simulate_spine(model, spectral, SpineRoot::Nu, n.max(1) as usize, &mut replicate_rng(derive_seed(seed, 1), 0))
        .map_err(|e| e.to_string())?;
    let mut last_visit = vec![None; d];
    let mut gaps = vec![(0u64, 0u64); d];
    let mut visits = vec![0u64; d];
    for r in &spine {
        visits[r.sigma] += 1;
        if let Some(prev) = last_visit[r.sigma] {
            gaps[r.sigma].0 += 1;
            gaps[r.sigma].1 += (r.k - prev) as u64;
        }
        last_visit[r.sigma] = Some(r.k);
    }
    let return_times = (0..d)
        .filter(|&s| spectral.nu[s] > 0.0)
        .map(|s| ReturnTimes {
            typ: model.types.label(s).into(),
            visits: visits[s],
            mean_return: (gaps[s].0 > 0).then(|| gaps[s].1 as f64 / gaps[s].0 as f64),
            expected_return: 1.0 / spectral.nu[s],
        })
        .collect();

    let len = SPINE_INDICES[SPINE_INDICES.len() - 1] + LAGS[LAGS.len() - 1] + 1;
    let seed_c = derive_seed(seed, 2);
    let mut events = vec![Vec::with_capacity(n as usize); len];
    for rep in 0..n {
        let recs = simulate_spine(model, spectral, SpineRoot::Nu, len, &mut replicate_rng(seed_c, rep))
            .map_err(|e| e.to_string())?;
        for (k, r) in recs.iter().enumerate() {
            events[k].push((r.xi_bar.ln().max(0.0) > c * k as f64) as u8 as f64);
        }
    }
    let mut correlations = Vec::new();
    for &m in &SPINE_INDICES {
        for &lag in &LAGS {
            let corr = correlation(&events[m], &events[m + lag]);
            correlations.push(EventCorrelation { m, n: m + lag, correlation: corr });
        }
    }
    let max_positive_correlation =
        correlations.iter().filter_map(|e| e.correlation).reduce(f64::max);
    Ok(NecessityData { c, moments, return_times, correlations, max_positive_correlation })
}

pub fn necessity_diagnostics(model: &ValidatedModel, spectral: &SpectralData, n: u64, c: f64, seed: u64) -> TestReport {
    let mut report = TestReport::new("necessity_diagnostics", model, n, seed);
    let data = match necessity_data(model, spectral, n, c, seed) {
        Ok(d) => d,
        Err(e) => {
            report.notes.push(format!("spine diagnostics unavailable: {e}"));
            report = report.finish();
            return report;
        }
    };
    for m in data.moments.iter().filter(|m| m.diverging) {
        report.notes.push(format!("truncated x log x moment of type {} keeps growing", m.typ));
    }
    match data.max_positive_correlation {
        Some(v) => report.notes.push(format!("max correlation {v:.4}")),
        None => report.notes.push("all correlations n/a".into()),
    }
    report.details = serde_json::to_value(&data).ok();
    let mut report = report.finish();
    report.statistic = data.max_positive_correlation.unwrap_or(0.0);
    report.threshold = 1.0;
    report
}
