use cmj_core::forward::{simulate, RootChoice, SimConfig};
use cmj_core::model::{validate_model, AgeDistribution, ChannelSpec, CountDistribution, ModelSpec, ValidatedModel};
use cmj_core::rng::replicate_rng;
use cmj_core::spectral::{kernel_matrix, spectral_radius, SpectralData};
use cmj_core::spine::{sample_size_biased_life, simulate_spine, SpineRoot};
use cmj_core::stats::{ks_distance, total_variation};
use proptest::prelude::*;

fn age() -> impl Strategy<Value = AgeDistribution> {
    prop_oneof![
        (0.5f64..3.0).prop_map(|rate| AgeDistribution::Exponential { rate }),
        (0.5f64..3.0, 0.5f64..3.0).prop_map(|(shape, rate)| AgeDistribution::Gamma { shape, rate }),
        (0.2f64..2.0).prop_map(|value| AgeDistribution::Deterministic { value }),
        (0.0f64..1.0, 0.1f64..1.0).prop_map(|(low, w)| AgeDistribution::Uniform { low, high: low + w }),
    ]
}

fn count(scale: f64) -> impl Strategy<Value = CountDistribution> {
    prop_oneof![
        (0.7f64..2.0).prop_map(move |m| CountDistribution::Poisson { mean: m * scale }),
        (0.3f64..0.6).prop_map(|p| CountDistribution::Geometric { p }),
        (1u64..4).prop_map(|n| CountDistribution::Deterministic { n }),
    ]
}

/// Irreducible supercritical models: every ordered pair of types has a channel.
fn model() -> impl Strategy<Value = ValidatedModel> {
    (1usize..=3).prop_flat_map(|d| {
        let scale = 1.5 / d as f64;
        proptest::collection::vec((count(scale), age(), any::<bool>()), d * d).prop_map(move |chs| {
            let types: Vec<String> = (0..d).map(|i| format!("t{i}")).collect();
            let channels = chs
                .into_iter()
                .enumerate()
                .map(|(i, (count, age, shared_age))| ChannelSpec {
                    parent: types[i / d].clone(),
                    child: types[i % d].clone(),
                    shared_age,
                    count,
                    age,
                })
                .collect();
            let spec = ModelSpec { name: "random".into(), types, absorbing: vec![], channels, lifespan: Default::default() };
            validate_model(&spec).expect("valid")
        })
    })
}

fn supercritical(m: &ValidatedModel) -> bool {
    spectral_radius(&kernel_matrix(m, 0.0)) > 1.05
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn perron_elements(m in model()) {
        prop_assume!(supercritical(&m));
        let s = SpectralData::compute(&m).unwrap();
        let d = s.n_types();
        prop_assert!((spectral_radius(&s.mhat) - 1.0).abs() < 1e-9);
        prop_assert!((s.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!((s.pi.iter().zip(&s.h).map(|(p, h)| p * h).sum::<f64>() - 1.0).abs() < 1e-12);
        for j in 0..d {
            let left: f64 = (0..d).map(|i| s.pi[i] * s.mhat[i][j]).sum();
            let right: f64 = (0..d).map(|k| s.mhat[j][k] * s.h[k]).sum();
            prop_assert!((left - s.pi[j]).abs() < 1e-9);
            prop_assert!((right - s.h[j]).abs() < 1e-9);
            prop_assert!((s.spine_kernel[j].iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let nu_k: f64 = (0..d).map(|i| s.nu[i] * s.spine_kernel[i][j]).sum();
            prop_assert!((nu_k - s.nu[j]).abs() < 1e-9);
        }
        prop_assert!(s.beta > 0.0 && s.alpha > 0.0);
    }

    #[test]
    fn size_biased_lives_are_never_childless(m in model(), seed in any::<u64>()) {
        prop_assume!(supercritical(&m));
        let s = SpectralData::compute(&m).unwrap();
        let mut rng = replicate_rng(seed, 0);
        for t in 0..m.n_types() {
            for _ in 0..20 {
                let sb = sample_size_biased_life(&m, &s, t, &mut rng).unwrap();
                prop_assert!(!sb.life.is_empty());
                prop_assert!(sb.life.xi_bar(s.alpha, &s.h) > 0.0);
                prop_assert_eq!(sb.distinguished_point().multiplicity, 1);
                prop_assert!(sb.life.points.windows(2).all(|w| w[0].age <= w[1].age));
            }
        }
    }

    #[test]
    fn spine_times_accumulate(m in model(), seed in any::<u64>()) {
        prop_assume!(supercritical(&m));
        let s = SpectralData::compute(&m).unwrap();
        let recs = simulate_spine(&m, &s, SpineRoot::Nu, 30, &mut replicate_rng(seed, 0)).unwrap();
        prop_assert_eq!(recs[0].t, None);
        for w in recs.windows(2) {
            prop_assert!((w[1].tau - w[0].tau - w[1].t.unwrap()).abs() < 1e-9);
            prop_assert!(w[1].t.unwrap() > 0.0);
        }
    }

    #[test]
    fn trajectories_are_monotone_and_reproducible(m in model(), seed in any::<u64>()) {
        prop_assume!(supercritical(&m));
        let s = SpectralData::compute(&m).unwrap();
        let mut config = SimConfig::new(RootChoice::Pi, 3.0, vec![0.5, 1.0, 2.0, 3.0]);
        config.caps.max_births = 20_000;
        let a = simulate(&m, &s, &config, &mut replicate_rng(seed, 1)).unwrap();
        let b = simulate(&m, &s, &config, &mut replicate_rng(seed, 1)).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.born_count.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(a.w.iter().all(|w| *w >= 0.0 && w.is_finite()));
        if a.extinct {
            prop_assert!(a.w.iter().zip(&a.sample_times).all(|(w, t)| *t < a.extinction_time.unwrap() || *w == 0.0));
        }
        if !a.truncated {
            prop_assert_eq!(a.w.len(), 4);
        }
    }

    #[test]
    fn distances_are_bounded(xs in proptest::collection::vec(-5.0f64..5.0, 1..50), ys in proptest::collection::vec(-5.0f64..5.0, 1..50)) {
        let d = ks_distance(&xs, &ys);
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, ks_distance(&ys, &xs));
        prop_assert_eq!(ks_distance(&xs, &xs), 0.0);
    }

    #[test]
    fn total_variation_of_distributions(raw in proptest::collection::vec((0.01f64..1.0, 0.01f64..1.0), 1..6)) {
        let (a, b): (Vec<f64>, Vec<f64>) = raw.into_iter().unzip();
        let norm = |v: Vec<f64>| { let t: f64 = v.iter().sum(); v.into_iter().map(|x| x / t).collect::<Vec<_>>() };
        let (p, q) = (norm(a), norm(b));
        let tv = total_variation(&p, &q);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&tv));
        prop_assert!(total_variation(&p, &p).abs() < 1e-15);
    }
}
