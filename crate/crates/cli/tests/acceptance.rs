//! Acceptance gate: thirteen criteria, one PASS/FAIL line each.

use std::f64::consts::LN_2;
use std::process::Command;
use std::time::Instant;

use cmj_core::fixtures;
use cmj_core::forward::{nerman_constant, simulate_replicates, Characteristic, RootChoice, SimConfig};
use cmj_core::model::{CountLaw, ValidatedModel};
use cmj_core::parallel::Execution;
use cmj_core::spectral::SpectralData;
use cmj_core::stats::{mean_se, ROUNDOFF};
use cmj_core::verify::{
    dichotomy_curve, dichotomy_experiment, test_change_of_measure, test_kesten_stigum_single_type,
    test_mean_xi_bar, test_moment_identity, test_renewal_mean, test_sampler_equivalence, test_spine_chain,
    Bound, DichotomySettings, TestReport, SE_BAND,
};

const SPECTRAL_TIGHT: f64 = 1e-10;
const SPECTRAL_LOOSE: f64 = 1e-8;
/// Exact identities hold up to floating roundoff in `alpha`.
const EXACT: f64 = 1e-12;
const MAX_DISCARD: f64 = 0.01;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn setup(name: &str) -> (ValidatedModel, SpectralData) {
    let m = fixtures::model(name).expect("fixture");
    let s = SpectralData::compute(&m).expect("spectral");
    (m, s)
}

fn seed() -> u64 {
    fixtures::oracle_values().release.seed
}

fn close(what: &str, got: f64, want: f64, tol: f64) -> Outcome {
    if (got - want).abs() <= tol {
        Ok(format!("{what}={got:.12}"))
    } else {
        Err(format!("{what}={got:.15} want {want:.15} tol {tol:e}"))
    }
}

fn all(parts: Vec<Outcome>) -> Outcome {
    let (ok, bad): (Vec<_>, Vec<_>) = parts.into_iter().partition(Result::is_ok);
    let bad: Vec<String> = bad.into_iter().map(|e| e.unwrap_err()).collect();
    if bad.is_empty() {
        Ok(ok.into_iter().map(Result::unwrap).collect::<Vec<_>>().join(" "))
    } else {
        Err(bad.join("; "))
    }
}

fn passed(r: &TestReport) -> Outcome {
    let op = match r.bound {
        Bound::AtMost => "<=",
        Bound::AtLeast => ">=",
    };
    let line = format!("{}[{}] {:.4e}{op}{:.4e}", r.test, r.fixture, r.statistic, r.threshold);
    if r.pass {
        Ok(line)
    } else {
        Err(format!("{line} verdict {:?} notes {:?}", r.verdict, r.notes))
    }
}

fn spectral_exactness() -> Outcome {
    let (_, det2) = setup("det2");
    let (_, yule) = setup("yule1");
    let (_, sym2) = setup("sym2");
    let (_, asym2) = setup("asym2");
    let o = fixtures::oracle_values().asym2;
    let mut parts = vec![
        close("det2.alpha", det2.alpha, LN_2, SPECTRAL_TIGHT),
        close("yule1.alpha", yule.alpha, 1.0, SPECTRAL_TIGHT),
        close("yule1.beta", yule.beta, 0.5, SPECTRAL_TIGHT),
        close("sym2.alpha", sym2.alpha, 1.0, SPECTRAL_LOOSE),
        close("sym2.beta", sym2.beta, 0.5, SPECTRAL_LOOSE),
        close("asym2.alpha", asym2.alpha, o.alpha, SPECTRAL_LOOSE),
        close("asym2.beta", asym2.beta, o.beta, SPECTRAL_LOOSE),
    ];
    for i in 0..2 {
        parts.push(close("sym2.pi", sym2.pi[i], 0.5, SPECTRAL_LOOSE));
        parts.push(close("sym2.h", sym2.h[i], 1.0, SPECTRAL_LOOSE));
        parts.push(close("asym2.pi", asym2.pi[i], o.pi[i], SPECTRAL_LOOSE));
        parts.push(close("asym2.h", asym2.h[i], o.h[i], SPECTRAL_LOOSE));
        parts.push(close("asym2.nu", asym2.nu[i], o.nu[i], SPECTRAL_LOOSE));
    }
    all(parts)
}

fn degenerate_martingale() -> Outcome {
    let (m, s) = setup("det2");
    let times: Vec<f64> = (1..=16).map(|i| 0.5 * i as f64).collect();
    let config = SimConfig::new(RootChoice::Fixed(0), 8.0, times.clone());
    let runs = simulate_replicates(&m, &s, &config, 1000, seed(), Execution::Parallel).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for tr in &runs {
        if tr.w.len() != times.len() {
            return Err(format!("replicate {} missing samples", tr.replicate));
        }
        worst = tr.w.iter().fold(worst, |acc, w| acc.max((w - 1.0).abs()));
    }
    if worst <= EXACT {
        Ok(format!("max|W-1|={worst:e} over 1000 replicates x {} times", times.len()))
    } else {
        Err(format!("max|W-1|={worst:e}"))
    }
}

fn martingale_mean() -> Outcome {
    let mut parts = Vec::new();
    for name in ["sym2", "yule1"] {
        let (m, s) = setup(name);
        let config = SimConfig::new(RootChoice::Pi, 4.0, vec![2.0, 4.0]);
        let runs = simulate_replicates(&m, &s, &config, 10_000, seed(), Execution::Parallel).map_err(|e| e.to_string())?;
        for (i, t) in [2.0, 4.0].into_iter().enumerate() {
            let ws: Vec<f64> = runs.iter().filter_map(|tr| tr.w.get(i).copied()).collect();
            let discard = 1.0 - ws.len() as f64 / runs.len() as f64;
            let e = mean_se(&ws);
            let gap = (e.mean - 1.0).abs();
            let line = format!("{name}@{t}: mean={:.4} se={:.4} discard={discard}", e.mean, e.se);
            parts.push(if gap <= SE_BAND * e.se + ROUNDOFF && discard < MAX_DISCARD { Ok(line) } else { Err(line) });
        }
    }
    all(parts)
}

fn change_of_measure() -> Outcome {
    let (m, s) = setup("sym2");
    passed(&test_change_of_measure(&m, &s, 3.0, 10_000, seed(), Execution::Parallel))
}

fn mean_xi_bar() -> Outcome {
    all(fixtures::NAMES
        .iter()
        .map(|name| {
            let (m, s) = setup(name);
            passed(&test_mean_xi_bar(&m, &s, 100_000, seed()))
        })
        .collect())
}

fn spine_chain() -> Outcome {
    all(["sym2", "asym2"]
        .iter()
        .map(|name| {
            let (m, s) = setup(name);
            passed(&test_spine_chain(&m, &s, 100_000, seed()))
        })
        .collect())
}

fn renewal_mean() -> Outcome {
    let (m, s) = setup("sym2");
    let r = test_renewal_mean(&m, &s, 100_000, seed());
    if r.check("tau_n_over_n").is_none() {
        return Err("tau_n / n check missing".into());
    }
    passed(&r)
}

fn moment_identity() -> Outcome {
    all(["sym2", "asym2"]
        .iter()
        .map(|name| {
            let (m, s) = setup(name);
            passed(&test_moment_identity(&m, &s, 100_000, seed()))
        })
        .collect())
}

fn sampler_equivalence() -> Outcome {
    let (m, s) = setup("bounded-sym2");
    let r = test_sampler_equivalence(&m, &s, 100_000, seed());
    let has = |prefix: &str| r.checks.iter().any(|c| c.name.starts_with(prefix));
    if !(has("ks_xi_bar") && has("child_")) {
        return Err("missing checks".into());
    }
    passed(&r)
}

fn dichotomy() -> Outcome {
    let (ms, ss) = setup("sym2");
    let (mh, sh) = setup("heavy");
    let (set_s, set_h) = (DichotomySettings::for_fixture("sym2"), DichotomySettings::for_fixture("heavy"));
    let [conv, div] = dichotomy_experiment((&ms, &ss, &set_s), (&mh, &sh, &set_h), seed(), Execution::Parallel);
    let (md, sd) = setup("det2");
    let curve = dichotomy_curve(&md, &sd, &DichotomySettings::for_fixture("det2"), seed(), Execution::Parallel)
        .map_err(|e| e.to_string())?;
    let worst = curve.s.iter().fold(0.0f64, |a, v| a.max((v - LN_2).abs()));
    let det = if worst <= EXACT { Ok(format!("det2 max|S-ln2|={worst:e}")) } else { Err(format!("det2 max|S-ln2|={worst:e}")) };
    all(vec![passed(&conv), passed(&div), det])
}

fn nerman() -> Outcome {
    let (m, s) = setup("yule1");
    let t = 8.0;
    let mut config = SimConfig::new(RootChoice::Fixed(0), t, vec![t]);
    config.chis = vec![Characteristic::Alive, Characteristic::Born];
    let runs = simulate_replicates(&m, &s, &config, 10_000, seed(), Execution::Parallel).map_err(|e| e.to_string())?;
    let scaled = |c: usize| -> Vec<f64> { runs.iter().filter(|tr| !tr.w.is_empty()).map(|tr| (-t).exp() * tr.z_chi[c][0]).collect() };
    let mut parts = Vec::new();
    for (c, target, label) in [(0, 1.0, "alive"), (1, 2.0 - (-t).exp(), "born")] {
        let xs = scaled(c);
        let e = mean_se(&xs);
        let line = format!("{label}: mean={:.4} se={:.4} target={target:.6}", e.mean, e.se);
        parts.push(if xs.len() == runs.len() && (e.mean - target).abs() <= SE_BAND * e.se { Ok(line) } else { Err(line) });
    }
    for (chi, want) in [(Characteristic::Alive, 1.0), (Characteristic::Born, 2.0)] {
        let got = nerman_constant(chi, &m, &s, 0).map_err(|e| e.to_string())?.value;
        parts.push(close(&format!("nerman_{}", chi.name(&m)), got, want, EXACT));
    }
    all(parts)
}

fn single_type() -> Outcome {
    let (m, s) = setup("gw15");
    let r = test_kesten_stigum_single_type(&m, &s, 10_000, seed());
    let check = |name: &str| match r.check(name) {
        Some(c) if c.pass => Ok(format!("{name} {:e}", c.statistic)),
        Some(c) => Err(format!("{name} {:e} > {:e}", c.statistic, c.threshold)),
        None => Err(format!("{name} missing")),
    };
    let law = CountLaw::Poisson(1.5);
    let mut worst: f64 = 0.0;
    for k in 0..=50u64 {
        let shifted = if k == 0 { 0.0 } else { law.pmf(k - 1) };
        worst = worst.max((law.size_biased_pmf(k).map_err(|e| e.to_string())? - shifted).abs());
    }
    let pmf = if worst <= EXACT { Ok(format!("poisson pmf {worst:e}")) } else { Err(format!("poisson pmf {worst:e}")) };
    all(vec![check("xi_bar_is_x_over_m"), check("size_biased_pmf"), pmf])
}

/// Payload and exit code; 2 (a failed verification) still carries a payload.
fn cmj(args: &[&str]) -> Result<(Vec<u8>, i32), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_cmj")).args(args).output().map_err(|e| e.to_string())?;
    match out.status.code() {
        Some(code @ (0 | 2)) => Ok((out.stdout, code)),
        code => Err(format!("{args:?} exited {code:?}: {}", String::from_utf8_lossy(&out.stderr))),
    }
}

fn determinism() -> Outcome {
    let commands: [&[&str]; 5] = [
        &["analyze", "--fixture", "asym2", "--samples", "20000", "--seed", "3"],
        &["simulate", "--fixture", "sym2", "--horizon", "4", "--replicates", "200", "--times", "1,2,4", "--seed", "7", "--chi", "born,type_count:a"],
        &["spine", "--fixture", "asym2", "--steps", "200", "--replicates", "5", "--seed", "7"],
        &["verify", "--fixture", "sym2", "--suite", "all", "--seed", "42"],
        &["dichotomy", "--finite", "sym2", "--divergent", "heavy", "--seed", "42", "--replicates", "20"],
    ];
    let mut parts = Vec::new();
    for args in commands {
        let a = cmj(args)?;
        let b = cmj(args)?;
        parts.push(if a == b && !a.0.is_empty() {
            Ok(format!("{}:{}B/exit{}", args[0], a.0.len(), a.1))
        } else {
            Err(format!("{} differs", args[0]))
        });
    }
    all(parts)
}

fn main() {
    let criteria: [Criterion; 13] = [
        ("spectral exactness", spectral_exactness),
        ("degenerate martingale", degenerate_martingale),
        ("martingale mean", martingale_mean),
        ("change of measure", change_of_measure),
        ("size-biased mean identity", mean_xi_bar),
        ("spine chain", spine_chain),
        ("renewal mean", renewal_mean),
        ("moment identity", moment_identity),
        ("sampler equivalence", sampler_equivalence),
        ("dichotomy", dichotomy),
        ("limit constant", nerman),
        ("single-type reductions", single_type),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = f();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} PASS {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} FAIL {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    if failures > 0 {
        eprintln!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
