//! Seeded statistical checks of the process identities.
//!
//! Every test returns a [`TestReport`]; a report holds one or more [`Check`]s and
//! its headline statistic is the worst of them. Stochastic bands are four
//! standard errors wide. Errors raised while running a test void the report
//! rather than failing it.

mod chain;
mod dichotomy;
mod identities;
mod necessity;

pub use chain::{test_renewal_mean, test_spine_chain};
pub use dichotomy::{
    classify_curve, dichotomy_curve, dichotomy_experiment, dichotomy_single, DichotomyCurve, DichotomySettings,
    DichotomyVerdict,
};
pub use identities::{
    test_change_of_measure, test_moment_identity, test_kesten_stigum_single_type, test_mean_xi_bar,
    test_sampler_equivalence, FUNCTIONALS,
};
pub use necessity::{necessity_data, necessity_diagnostics, NecessityData, TypeMoments};

use serde::Serialize;

use crate::model::ValidatedModel;
use crate::parallel::Execution;
use crate::rng::derive_seed;
use crate::spectral::{xlogx_verdict, SpectralData, XlogxVerdict};
use crate::stats::{MeanSe, ROUNDOFF};

/// Band width in standard errors.
pub const SE_BAND: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Void,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost,
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub statistic: f64,
    pub threshold: f64,
    pub bound: Bound,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self { name: name.into(), statistic, threshold, bound: Bound::AtMost, pass: statistic <= threshold }
    }

    pub fn at_least(name: impl Into<String>, statistic: f64, threshold: f64) -> Self {
        Self { name: name.into(), statistic, threshold, bound: Bound::AtLeast, pass: statistic >= threshold }
    }

    /// `|mean - target| <= SE_BAND * se`, plus a roundoff allowance.
    pub fn band(name: impl Into<String>, estimate: &MeanSe, target: f64) -> Self {
        Self::at_most(name, (estimate.mean - target).abs(), SE_BAND * estimate.se + ROUNDOFF)
    }

    /// Two independent estimates of the same quantity, combined standard error.
    pub fn two_sample(name: impl Into<String>, a: &MeanSe, b: &MeanSe) -> Self {
        let (gap, se) = crate::stats::two_sample_z(a, b);
        Self::at_most(name, gap, SE_BAND * se + ROUNDOFF)
    }

    /// How far past its threshold the check is, comparable across checks.
    fn badness(&self) -> f64 {
        let (num, den) = match self.bound {
            Bound::AtMost => (self.statistic, self.threshold),
            Bound::AtLeast => (self.threshold, self.statistic),
        };
        if den > 0.0 {
            num / den
        } else if num > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub test: String,
    pub fixture: String,
    pub statistic: f64,
    pub threshold: f64,
    /// Direction of the headline comparison.
    pub bound: Bound,
    pub pass: bool,
    pub verdict: Verdict,
    pub n_samples: u64,
    pub seed: u64,
    pub discard_rate: f64,
    pub notes: Vec<String>,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<serde_json::Value>,
}

impl TestReport {
    pub(crate) fn new(test: &str, model: &ValidatedModel, n_samples: u64, seed: u64) -> Self {
        Self {
            test: test.into(),
            fixture: model.name().into(),
            statistic: 0.0,
            threshold: 0.0,
            bound: Bound::AtMost,
            pass: false,
            verdict: Verdict::Fail,
            n_samples,
            seed,
            discard_rate: 0.0,
            notes: Vec::new(),
            checks: Vec::new(),
            details: None,
        }
    }

    pub(crate) fn void(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self.verdict = Verdict::Void;
        self.finish()
    }

    /// Headline statistic from the worst check; verdict from all of them.
    pub(crate) fn finish(mut self) -> Self {
        if let Some(worst) = self.checks.iter().max_by(|a, b| {
            (!a.pass, a.badness()).partial_cmp(&(!b.pass, b.badness())).unwrap_or(std::cmp::Ordering::Equal)
        }) {
            self.statistic = worst.statistic;
            self.threshold = worst.threshold;
            self.bound = worst.bound;
        }
        if self.verdict != Verdict::Void {
            self.verdict = if self.checks.iter().all(|c| c.pass) { Verdict::Pass } else { Verdict::Fail };
        }
        self.pass = self.verdict == Verdict::Pass;
        self
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteTest {
    MeanXiBar,
    ChangeOfMeasure,
    SpineChain,
    RenewalMean,
    MomentIdentity,
    SamplerEquivalence,
    KestenStigum,
    Dichotomy,
    Necessity,
}

impl SuiteTest {
    pub const ALL: [SuiteTest; 9] = [
        Self::MeanXiBar,
        Self::ChangeOfMeasure,
        Self::SpineChain,
        Self::RenewalMean,
        Self::MomentIdentity,
        Self::SamplerEquivalence,
        Self::KestenStigum,
        Self::Dichotomy,
        Self::Necessity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::MeanXiBar => "mean_xi_bar",
            Self::ChangeOfMeasure => "change_of_measure",
            Self::SpineChain => "spine_chain",
            Self::RenewalMean => "renewal_mean",
            Self::MomentIdentity => "moment_identity",
            Self::SamplerEquivalence => "sampler_equivalence",
            Self::KestenStigum => "single_type_reduction",
            Self::Dichotomy => "dichotomy",
            Self::Necessity => "necessity_diagnostics",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == text)
    }

    /// `"all"` or a comma-separated list of names.
    pub fn parse_list(text: &str) -> Result<Vec<Self>, String> {
        if text == "all" {
            return Ok(Self::ALL.to_vec());
        }
        text.split(',').map(|s| Self::parse(s.trim()).ok_or_else(|| format!("unknown test {s:?}"))).collect()
    }
}

/// Sample sizes used by [`run_suite`].
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSizes {
    pub draws: u64,
    pub replicates: u64,
    pub steps: usize,
    pub horizon: f64,
    pub c: f64,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        Self { draws: 100_000, replicates: 10_000, steps: 100_000, horizon: 3.0, c: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SuiteSummary {
    pub passed: usize,
    pub failed: usize,
    pub voided: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub fixture: String,
    pub seed: u64,
    pub reports: Vec<TestReport>,
    pub summary: SuiteSummary,
}

/// Runs `tests` in order; each test's seed depends only on `seed` and the test kind.
pub fn run_suite(
    model: &ValidatedModel,
    spectral: &SpectralData,
    tests: &[SuiteTest],
    sizes: &SuiteSizes,
    seed: u64,
    exec: Execution,
) -> SuiteReport {
    let mut reports = Vec::with_capacity(tests.len());
    for &test in tests {
        let s = derive_seed(seed, test as u64);
        let report = match test {
            SuiteTest::MeanXiBar => test_mean_xi_bar(model, spectral, sizes.draws, s),
            SuiteTest::ChangeOfMeasure => {
                test_change_of_measure(model, spectral, sizes.horizon, sizes.replicates, s, exec)
            }
            SuiteTest::SpineChain => test_spine_chain(model, spectral, sizes.steps, s),
            SuiteTest::RenewalMean => test_renewal_mean(model, spectral, sizes.steps, s),
            SuiteTest::MomentIdentity => test_moment_identity(model, spectral, sizes.draws, s),
            SuiteTest::SamplerEquivalence => test_sampler_equivalence(model, spectral, sizes.draws, s),
            SuiteTest::KestenStigum => test_kesten_stigum_single_type(model, spectral, sizes.replicates, s),
            SuiteTest::Dichotomy => {
                let settings = DichotomySettings::for_fixture(model.name());
                let expected = match xlogx_verdict(model, spectral) {
                    XlogxVerdict::Finite => Some(DichotomyVerdict::Convergent),
                    XlogxVerdict::DivergentLikely => Some(DichotomyVerdict::Divergent),
                    XlogxVerdict::Unknown => None,
                };
                dichotomy_single(model, spectral, &settings, expected, s, exec)
            }
            SuiteTest::Necessity => necessity_diagnostics(model, spectral, sizes.draws, sizes.c, s),
        };
        reports.push(report);
    }
    let mut summary = SuiteSummary::default();
    for r in &reports {
        match r.verdict {
            Verdict::Pass => summary.passed += 1,
            Verdict::Fail => summary.failed += 1,
            Verdict::Void => summary.voided += 1,
        }
    }
    SuiteReport { fixture: model.name().into(), seed, reports, summary }
}
