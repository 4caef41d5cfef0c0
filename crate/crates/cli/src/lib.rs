//! The `cmj` command line: argument parsing and command dispatch.

pub mod format;
pub mod io;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use cmj_core::fixtures;
use cmj_core::forward::{simulate_replicates, Caps, Characteristic, Measure, RootChoice, SimConfig};
use cmj_core::model::ValidatedModel;
use cmj_core::parallel::{map_replicates, Execution};
use cmj_core::rng::replicate_rng;
use cmj_core::spectral::{xlogx_classify, SpectralData, XlogxReport};
use cmj_core::spine::{eta_bar_partial, sibling_lower_bound, simulate_spine, SpineRoot};
use cmj_core::verify::{
    dichotomy_experiment, run_suite, DichotomySettings, SuiteSizes, SuiteSummary, SuiteTest, TestReport, Verdict,
};
use serde::Serialize;

use crate::format::{fmt_num, to_json};

#[derive(Debug, Parser)]
#[command(name = "cmj", version, about = "Multi-type Crump-Mode-Jagers processes: spectra, simulation, spines, checks")]
pub struct Cli {
    /// Worker threads; 1 runs sequentially. Defaults to RAYON_NUM_THREADS or the core count.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ModelArgs {
    /// Model file (JSON).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Bundled fixture name.
    #[arg(long)]
    pub fixture: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Malthusian parameter, eigenvectors, spine kernel and x log x verdict as JSON.
    Analyze {
        #[command(flatten)]
        model: ModelArgs,
        /// Lives drawn for the truncated x log x moments.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Forward replicates sampled on a time grid, as CSV.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// Root type label, `pi` or `nu`.
        #[arg(long, default_value = "pi")]
        root: String,
        #[arg(long)]
        horizon: f64,
        #[arg(long)]
        replicates: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long, value_delimiter = ',', required = true)]
        times: Vec<f64>,
        /// Characteristics: born, alive, type_count:<label>.
        #[arg(long, value_delimiter = ',', default_value = "born")]
        chi: Vec<String>,
        #[arg(long, default_value_t = 1_000_000)]
        max_births: u64,
        #[arg(long, default_value_t = 1_000_000)]
        max_pending: usize,
        /// Simulate under the size-biased measure.
        #[arg(long)]
        size_biased: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spine records, as CSV.
    Spine {
        #[command(flatten)]
        model: ModelArgs,
        /// Root type label or `nu`.
        #[arg(long, default_value = "nu")]
        root: String,
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        replicates: u64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded test suite; exits 2 when any test fails.
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        /// `all` or a comma-separated list of test names.
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long)]
        seed: u64,
        /// Constant `c` in the events `log+ xi_bar_n > c n`.
        #[arg(long, default_value_t = 0.1)]
        c: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Paired convergent/divergent experiment; exits 2 when either verdict is missed.
    Dichotomy {
        /// Fixture name or model file expected to converge.
        #[arg(long)]
        finite: String,
        /// Fixture name or model file expected to diverge.
        #[arg(long)]
        divergent: String,
        #[arg(long)]
        seed: u64,
        /// Override the frozen replicate count.
        #[arg(long)]
        replicates: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Serialized payload and whether a verification failed.
pub struct Outcome {
    pub payload: String,
    pub failed: bool,
    pub out: Option<PathBuf>,
}

fn resolve(args: &ModelArgs) -> anyhow::Result<ValidatedModel> {
    match (&args.model, &args.fixture) {
        (Some(path), _) => io::load_model(path).with_context(|| format!("loading {}", path.display())),
        (_, Some(name)) => Ok(fixtures::model(name)?),
        _ => bail!("one of --model or --fixture is required"),
    }
}

fn resolve_name(text: &str) -> anyhow::Result<ValidatedModel> {
    if fixtures::source(text).is_some() {
        return Ok(fixtures::model(text)?);
    }
    io::load_model(Path::new(text)).with_context(|| format!("{text:?} is neither a fixture nor a readable model"))
}

fn spectral(model: &ValidatedModel) -> anyhow::Result<SpectralData> {
    SpectralData::compute(model).with_context(|| format!("spectral analysis of {}", model.name()))
}

#[derive(Serialize)]
struct Analysis<'a> {
    model: &'a str,
    alpha: f64,
    pi: &'a [f64],
    h: &'a [f64],
    beta: f64,
    nu: &'a [f64],
    sup_h: f64,
    spine_kernel: &'a [Vec<f64>],
    lattice: bool,
    xlogx: XlogxReport,
}

fn analyze(model: &ValidatedModel, samples: usize, seed: u64) -> anyhow::Result<String> {
    let s = spectral(model)?;
    let xlogx = xlogx_classify(model, &s, samples, seed);
    to_json(&Analysis {
        model: model.name(),
        alpha: s.alpha,
        pi: &s.pi,
        h: &s.h,
        beta: s.beta,
        nu: &s.nu,
        sup_h: s.sup_h,
        spine_kernel: &s.spine_kernel,
        lattice: model.lattice,
        xlogx,
    })
}

fn root_choice(model: &ValidatedModel, text: &str) -> anyhow::Result<RootChoice> {
    Ok(match text {
        "pi" => RootChoice::Pi,
        "nu" => RootChoice::Nu,
        label => RootChoice::Fixed(model.types.index_of(label)?),
    })
}

struct SimulateArgs<'a> {
    root: &'a str,
    horizon: f64,
    replicates: u64,
    seed: u64,
    times: &'a [f64],
    chi: &'a [String],
    caps: Caps,
    size_biased: bool,
}

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn simulate(model: &ValidatedModel, a: &SimulateArgs<'_>, exec: Execution) -> anyhow::Result<String> {
    let s = spectral(model)?;
    let chis = a
        .chi
        .iter()
        .map(|c| Characteristic::parse(c, model).ok_or_else(|| anyhow!("unknown characteristic {c:?}")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let mut config = SimConfig::new(root_choice(model, a.root)?, a.horizon, a.times.to_vec());
    config.caps = a.caps;
    config.chis = chis.clone();
    config.measure = if a.size_biased { Measure::SizeBiased } else { Measure::Ordinary };
    let runs = simulate_replicates(model, &s, &config, a.replicates, a.seed, exec)?;
    let mut out = String::from("replicate,time,W");
    for c in &chis {
        write!(out, ",Z_{}", c.name(model))?;
    }
    out.push_str(",born,pending,extinct,truncated\n");
    for tr in &runs {
        for (i, &t) in a.times.iter().enumerate() {
            write!(out, "{},{}", tr.replicate, fmt_num(t))?;
            if i < tr.w.len() {
                write!(out, ",{}", fmt_num(tr.w[i]))?;
                for z in &tr.z_chi {
                    write!(out, ",{}", fmt_num(z[i]))?;
                }
                write!(out, ",{},{}", tr.born_count[i], tr.pending_count[i])?;
            } else {
                out.push_str(&",".repeat(chis.len() + 3));
            }
            writeln!(out, ",{},{}", bit(tr.extinct), bit(tr.truncated))?;
        }
    }
    Ok(out)
}

fn spine(model: &ValidatedModel, root: &str, steps: usize, replicates: u64, seed: u64, exec: Execution) -> anyhow::Result<String> {
    let s = spectral(model)?;
    let root = match root {
        "nu" => SpineRoot::Nu,
        label => SpineRoot::Fixed(model.types.index_of(label)?),
    };
    let runs = map_replicates(replicates, exec, |r| simulate_spine(model, &s, root, steps, &mut replicate_rng(seed, r)));
    let mut out = String::from("replicate,k,sigma,T,tau,xi_bar,eta_partial,lower_bound\n");
    for (r, recs) in runs.into_iter().enumerate() {
        let recs = recs?;
        let eta = eta_bar_partial(&recs, &s, recs.len() - 1);
        let sigma0 = recs[0].sigma;
        for (rec, partial) in recs.iter().zip(&eta.partial_sums) {
            writeln!(
                out,
                "{r},{},{},{},{},{},{},{}",
                rec.k,
                model.types.label(rec.sigma),
                rec.t.map(fmt_num).unwrap_or_default(),
                fmt_num(rec.tau),
                fmt_num(rec.xi_bar),
                fmt_num(*partial),
                fmt_num(sibling_lower_bound(rec, &s, sigma0)),
            )?;
        }
    }
    Ok(out)
}

fn verify(model: &ValidatedModel, suite: &str, seed: u64, c: f64, exec: Execution) -> anyhow::Result<(String, bool)> {
    let tests = SuiteTest::parse_list(suite).map_err(|e| anyhow!(e))?;
    let s = spectral(model)?;
    let sizes = SuiteSizes { c, ..SuiteSizes::default() };
    let report = run_suite(model, &s, &tests, &sizes, seed, exec);
    Ok((to_json(&report)?, report.summary.failed > 0))
}

#[derive(Serialize)]
struct PairedReport {
    seed: u64,
    reports: Vec<TestReport>,
    summary: SuiteSummary,
}

fn dichotomy(finite: &str, divergent: &str, seed: u64, replicates: Option<u64>, exec: Execution) -> anyhow::Result<(String, bool)> {
    let (mf, md) = (resolve_name(finite)?, resolve_name(divergent)?);
    let (sf, sd) = (spectral(&mf)?, spectral(&md)?);
    let settings = |m: &ValidatedModel| {
        let mut set = DichotomySettings::for_fixture(m.name());
        if let Some(r) = replicates {
            set.replicates = r;
        }
        set
    };
    let (setf, setd) = (settings(&mf), settings(&md));
    let reports = dichotomy_experiment((&mf, &sf, &setf), (&md, &sd, &setd), seed, exec).to_vec();
    let mut summary = SuiteSummary::default();
    for r in &reports {
        match r.verdict {
            Verdict::Pass => summary.passed += 1,
            Verdict::Fail => summary.failed += 1,
            Verdict::Void => summary.voided += 1,
        }
    }
    let failed = summary.failed > 0;
    Ok((to_json(&PairedReport { seed, reports, summary })?, failed))
}

/// Runs one parsed command; errors are validation failures.
pub fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let exec = match cli.threads {
        Some(0) => bail!("--threads must be positive"),
        Some(1) => Execution::Sequential,
        Some(n) => {
            cmj_core::parallel::configure_threads(n).map_err(|e| anyhow!(e))?;
            Execution::Parallel
        }
        None => Execution::Parallel,
    };
    let (payload, failed, out) = match &cli.command {
        Command::Analyze { model, samples, seed, out } => (analyze(&resolve(model)?, *samples, *seed)?, false, out),
        Command::Simulate {
            model,
            root,
            horizon,
            replicates,
            seed,
            times,
            chi,
            max_births,
            max_pending,
            size_biased,
            out,
        } => {
            let args = SimulateArgs {
                root,
                horizon: *horizon,
                replicates: *replicates,
                seed: *seed,
                times,
                chi,
                caps: Caps { max_births: *max_births, max_pending: *max_pending },
                size_biased: *size_biased,
            };
            (simulate(&resolve(model)?, &args, exec)?, false, out)
        }
        Command::Spine { model, root, steps, replicates, seed, out } => {
            (spine(&resolve(model)?, root, *steps, *replicates, *seed, exec)?, false, out)
        }
        Command::Verify { model, suite, seed, c, out } => {
            let (p, f) = verify(&resolve(model)?, suite, *seed, *c, exec)?;
            (p, f, out)
        }
        Command::Dichotomy { finite, divergent, seed, replicates, out } => {
            let (p, f) = dichotomy(finite, divergent, *seed, *replicates, exec)?;
            (p, f, out)
        }
    };
    Ok(Outcome { payload, failed, out: out.clone() })
}
