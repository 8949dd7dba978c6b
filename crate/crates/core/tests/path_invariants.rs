use approx::assert_relative_eq;
use levyup::conditioning::decompose_at_minimum;
use levyup::path::{argmin_last, extract_excursions, first_passage, simulate_path, GridPath, Side};
use levyup::{JumpLaw, LevyModelSpec, SeedStream};
use proptest::prelude::*;

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 1..200)
}

fn model() -> impl Strategy<Value = LevyModelSpec> {
    prop_oneof![
        (-1.0f64..1.0, 0.1f64..2.0).prop_map(|(d, s)| LevyModelSpec::brownian("bm", d, s)),
        (0.5f64..1.9).prop_map(|a| LevyModelSpec::stable("stable", a, 0.0, 1.0)),
        (-1.0f64..-0.1, 0.2f64..2.0)
            .prop_map(|(d, r)| LevyModelSpec::spectrally_positive("sp", d, r, JumpLaw::Exponential { rate: 1.0 })),
    ]
}

proptest! {
    #[test]
    fn running_extrema_bracket_path(v in values()) {
        let p = GridPath::new(0.1, v.clone(), "p").unwrap();
        let (sup, inf) = p.running_extrema();
        for k in 0..v.len() {
            prop_assert!(inf[k] <= v[k] && v[k] <= sup[k]);
            if k > 0 {
                prop_assert!(sup[k] >= sup[k - 1] && inf[k] <= inf[k - 1]);
            }
        }
    }

    #[test]
    fn reflection_is_nonnegative_and_zero_at_minima(v in values()) {
        let p = GridPath::new(0.1, v.clone(), "p").unwrap();
        let r = p.reflect_at_infimum();
        prop_assert_eq!(r.values[0], 0.0);
        prop_assert!(r.values.iter().all(|&x| x >= 0.0));
        let k = p.argmin_time();
        prop_assert_eq!(r.values[k], 0.0);
    }

    #[test]
    fn argmin_is_the_last_minimiser(v in values()) {
        let k = argmin_last(&v);
        prop_assert!(v.iter().all(|&x| x >= v[k]));
        prop_assert!(v[k + 1..].iter().all(|&x| x > v[k]));
    }

    #[test]
    fn excursions_partition_the_time_axis(v in values()) {
        let ex = extract_excursions(&v, 0.5);
        let mut prev_end = 0;
        for (i, e) in ex.iter().enumerate() {
            prop_assert!(e.start_index >= prev_end);
            prop_assert!(e.end_index > e.start_index + 1);
            prop_assert_eq!(e.censored, i + 1 == ex.len() && e.end_index == v.len());
            prop_assert!((e.length - (e.end_index - e.start_index) as f64 * 0.5).abs() < 1e-12);
            let lo = v[e.start_index];
            let inner = &v[e.start_index + 1..e.end_index];
            prop_assert!(inner.iter().all(|&x| x > lo));
            let h = inner.iter().fold(0.0f64, |m, &x| m.max(x - lo));
            prop_assert!((e.height - h).abs() < 1e-12);
            prev_end = e.end_index;
        }
        let steps: usize = ex.iter().map(|e| e.end_index - e.start_index).sum();
        prop_assert!(steps <= v.len());
    }

    #[test]
    fn first_passage_is_first_entry(v in values(), b in -10.0f64..10.0) {
        match first_passage(&v, b, Side::AboveStrict) {
            Some(k) => {
                prop_assert!(k >= 1 && v[k] > b);
                prop_assert!(v[1..k].iter().all(|&x| x <= b));
            }
            None => prop_assert!(v.iter().skip(1).all(|&x| x <= b)),
        }
    }

    #[test]
    fn decomposition_reassembles_path(v in values()) {
        let p = GridPath::new(0.25, v.clone(), "p").unwrap();
        let d = decompose_at_minimum(&p);
        prop_assert_eq!(d.pre_min.values.len() + d.post_min.values.len(), v.len());
        prop_assert_eq!(d.post_min.values[0], 0.0);
        prop_assert!(d.post_min.values[1..].iter().all(|&x| x > 0.0));
        prop_assert!(d.pre_min.values.iter().all(|&x| x >= d.u));
        prop_assert!((d.m - d.m_index as f64 * 0.25).abs() < 1e-12);
    }

    #[test]
    fn simulation_is_reproducible(spec in model(), rep in 0u64..1000) {
        let s = SeedStream::new(7, "prop");
        let a = simulate_path(&spec, 1.0, 0.01, 1.0, &mut s.rng(rep)).unwrap();
        let b = simulate_path(&spec, 1.0, 0.01, 1.0, &mut s.rng(rep)).unwrap();
        prop_assert_eq!(a.len(), 101);
        prop_assert_eq!(a.values[0], 1.0);
        prop_assert_eq!(a, b);
    }
}

#[test]
fn spectrally_positive_paths_creep_down_linearly() {
    let spec = LevyModelSpec::spectrally_positive("sp", -0.5, 1.0, JumpLaw::Exponential { rate: 1.0 });
    let s = SeedStream::new(3, "sp");
    for rep in 0..20 {
        let p = simulate_path(&spec, 0.0, 0.01, 5.0, &mut s.rng(rep)).unwrap();
        for w in p.values.windows(2) {
            assert!(w[1] - w[0] >= -0.005 - 1e-12);
        }
    }
}

#[test]
fn bm_increment_moments_match_gaussian() {
    let spec = LevyModelSpec::brownian("bm", 0.3, 1.5);
    let s = SeedStream::new(11, "moments");
    let n = 20_000;
    let ends: Vec<f64> = (0..n)
        .map(|i| *simulate_path(&spec, 0.0, 0.1, 1.0, &mut s.rng(i)).unwrap().values.last().unwrap())
        .collect();
    let mean = ends.iter().sum::<f64>() / n as f64;
    let var = ends.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert_relative_eq!(mean, 0.3, epsilon = 4.0 * 1.5 / (n as f64).sqrt());
    assert_relative_eq!(var, 2.25, max_relative = 0.05);
}
