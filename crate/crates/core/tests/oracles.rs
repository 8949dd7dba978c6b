use approx::assert_relative_eq;
use levyup::conditioning::{entrance_law_cdf, minimum_law_cdf, size_biased_cdf};
use levyup::harmonic::{closed_form_estimate, estimate_h_ladder, geometric_levels, h_closed_form, LadderConfig};
use levyup::harness::{run_suite, ExperimentConfig};
use levyup::stats::{spearman_decreasing, wilson_interval};
use levyup::{JumpLaw, LevyModelSpec, SeedStream};

/// Gambler's-ruin oracle for BM with drift `mu`: `P_x(hit b before 0)`.
fn ruin(mu: f64, sigma: f64, x: f64, b: f64) -> f64 {
    if mu == 0.0 {
        return x / b;
    }
    let k = 2.0 * mu / (sigma * sigma);
    (1.0 - (-k * x).exp()) / (1.0 - (-k * b).exp())
}

#[test]
fn bm_drift_up_harmonic_matches_ruin_limit() {
    let spec = LevyModelSpec::brownian("bm", 0.5, 1.0);
    for x in [0.1, 0.5, 1.0, 3.0] {
        let h = h_closed_form(&spec, x).unwrap();
        let phi = 1.0;
        // P_x(never below 0) = lim_b ruin = 1 - e^{-2 mu x}; h = that / phi
        assert_relative_eq!(h, ruin(0.5, 1.0, x, 1e6) / phi, max_relative = 1e-9);
    }
}

#[test]
fn spectrally_positive_drift_up_uses_exit_rate() {
    // Laplace exponent psi(l) = -0.5 l + l/(1+l); positive root Phi = 1.
    let spec = LevyModelSpec::spectrally_positive("sp", -0.5, 1.0, JumpLaw::Exponential { rate: 1.0 });
    assert_relative_eq!(spec.downward_exit_rate().unwrap(), 1.0, max_relative = 1e-8);
    assert_relative_eq!(h_closed_form(&spec, 2.0).unwrap(), 1.0 - (-2.0f64).exp(), max_relative = 1e-8);
}

#[test]
fn minimum_law_is_uniform_for_driftless_bm() {
    let spec = LevyModelSpec::brownian("bm", 0.0, 1.0);
    let h = closed_form_estimate(&spec, &geometric_levels(-6, 2)).unwrap();
    for y in [0.0, 0.25, 0.5, 0.75, 1.0] {
        assert_relative_eq!(minimum_law_cdf(&h, 1.0, y).unwrap(), 1.0 - y, epsilon = 1e-12);
    }
}

#[test]
fn size_biased_exponential_is_gamma_two() {
    let law = JumpLaw::Exponential { rate: 1.0 };
    for x in [0.1, 1.0, 2.5, 6.0] {
        let gamma2 = 1.0 - (1.0 + x) * (-x as f64).exp();
        assert_relative_eq!(size_biased_cdf(law, x), gamma2, epsilon = 1e-12);
    }
    let law = JumpLaw::Uniform { upper: 2.0 };
    assert_relative_eq!(size_biased_cdf(law, 1.0), 0.25, epsilon = 1e-12);
}

#[test]
fn entrance_cdf_is_monotone_probability() {
    let spec = LevyModelSpec::spectrally_positive("sp", -0.5, 1.0, JumpLaw::Exponential { rate: 1.0 });
    let mut prev = 0.0;
    for i in 0..100 {
        let c = entrance_law_cdf(&spec, i as f64 * 0.1).unwrap();
        assert!((prev - 1e-12..=1.0 + 1e-12).contains(&c));
        prev = c;
    }
    assert!(prev > 0.999);
}

#[test]
fn ladder_estimate_is_linear_for_bm() {
    let spec = LevyModelSpec::brownian("bm", 0.0, 1.0);
    let levels = geometric_levels(-2, 1);
    let est = estimate_h_ladder(&spec, &levels, &LadderConfig::new(0.01, 4000, 5.0), &SeedStream::new(5, "ladder")).unwrap();
    let (r, se) = est.ratio(1.0, 2.0).unwrap();
    assert!((r - 0.5).abs() < 0.05 + 3.0 * se, "ratio {r} se {se}");
    assert!(est.monotonicity_violation() <= 3.0);
}

#[test]
fn wilson_interval_covers_simple_cases() {
    let (lo, hi) = wilson_interval(50, 100, 1.96);
    assert!(lo < 0.5 && hi > 0.5);
    assert_relative_eq!(lo + hi, 1.0, epsilon = 1e-12);
    let (lo, _) = wilson_interval(0, 100, 1.96);
    assert_eq!(lo, 0.0);
}

#[test]
fn spearman_needs_four_points_to_reject() {
    assert!(!spearman_decreasing(&[3.0, 2.0, 1.0], 0.05).passed);
    assert!(spearman_decreasing(&[4.0, 3.0, 2.0, 1.0], 0.05).passed);
    assert!(!spearman_decreasing(&[1.0, 2.0, 3.0, 4.0], 0.05).passed);
}

#[test]
fn suite_output_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::default_bm_suite(99, 1);
    let ia = run_suite(&cfg.with_output_dir(a.path())).unwrap();
    let ib = run_suite(&cfg.with_output_dir(b.path())).unwrap();
    assert_eq!(ia.entries.len(), ib.entries.len());
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(!names.is_empty());
    for n in names {
        let x = std::fs::read(a.path().join(&n)).unwrap();
        let y = std::fs::read(b.path().join(&n)).unwrap();
        assert_eq!(x, y, "{n:?} differs");
    }
}
