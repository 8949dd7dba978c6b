//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test --offline -p levyup-core --test acceptance`; pass
//! criterion names as extra arguments to run a subset.

use std::time::Instant;

use levyup::conditioning::ConditionedSampleConfig;
use levyup::harmonic::{
    check_excessive_invariant, closed_form_estimate, estimate_h_ladder, geometric_levels,
    HarmonicEstimate, LadderConfig,
};
use levyup::harness::{null_calibration, run_suite, ExperimentConfig};
use levyup::models::JumpLaw;
use levyup::verify::{
    fit_excursion_constant, limit_marginal_sample, verify_creeping_height,
    verify_entrance_asymptotics, verify_entrance_law, verify_excursion_identity,
    verify_h_consistency, verify_independence_pre_post, verify_last_passage_identity,
    verify_min_law, verify_weak_convergence, CreepingConfig, EntranceAsymptoticsConfig,
    EntranceConfig, EntranceReference, ExcursionIdentityConfig, HConsistencyConfig,
    InProofConfig, IndependenceConfig, LastPassageConfig, LimitReference, MinLawConfig,
    ShapeCheck, TestReport, WeakConvergenceConfig,
};
use levyup::{LevyModelSpec, Result, SeedStream};

const ROOT_SEED: u64 = 20_240_601;

fn bm() -> LevyModelSpec {
    LevyModelSpec::brownian("bm", 0.0, 1.0)
}

fn cauchy() -> LevyModelSpec {
    LevyModelSpec::stable("cauchy", 1.0, 0.0, 1.0)
}

fn sp_exp() -> LevyModelSpec {
    LevyModelSpec::spectrally_positive("sp_exp", -0.5, 1.0, JumpLaw::Exponential { rate: 1.0 })
}

fn sp_uniform() -> LevyModelSpec {
    LevyModelSpec::spectrally_positive("sp_uniform", -0.5, 1.0, JumpLaw::Uniform { upper: 1.0 })
}

fn seeds(tag: &str) -> SeedStream {
    SeedStream::new(ROOT_SEED, tag)
}

fn sampler(x0: f64, epsilon: f64, dt: f64) -> ConditionedSampleConfig {
    ConditionedSampleConfig {
        x0,
        epsilon,
        dt,
        horizon: 0.0,
        max_rejections: 50_000_000,
        seed: 0,
    }
}

fn bm_ladder(dt: f64, n_paths: usize, horizon: f64, levels: &[f64], tag: &str) -> Result<HarmonicEstimate> {
    estimate_h_ladder(&bm(), levels, &LadderConfig::new(dt, n_paths, horizon), &seeds(tag))
}

fn minimum_law() -> Result<Vec<TestReport>> {
    let levels = geometric_levels(-8, 1);
    let h = closed_form_estimate(&bm(), &levels).expect("closed form for BM");
    let walk_h = bm_ladder(1e-3, 4_000, 5.0, &levels, "min-law-walk-h")?;
    let cfg = MinLawConfig {
        sampler: sampler(1.0, 0.01, 1e-3),
        n_samples: 10_000,
    };
    Ok(vec![verify_min_law(&bm(), &h, &cfg, Some(&walk_h), &seeds("min-law"))?])
}

fn h_consistency() -> Result<Vec<TestReport>> {
    let pairs = vec![(1.0, 2.0), (0.5, 2.0)];
    let bm_cfg = HConsistencyConfig {
        pairs: pairs.clone(),
        levels: geometric_levels(-6, 3),
        ladder: LadderConfig::new(0.01, 100_000, 20.0),
        barrier: 20.0,
        exit_dt: 0.01,
        exit_paths: 100_000,
        max_steps: 2_000_000,
        shape: Some(ShapeCheck::Ratio { x: 1.0, y: 2.0, target: 0.5, rel_tol: 0.05 }),
    };
    let (bm_rep, _) = verify_h_consistency(&bm(), &bm_cfg, &seeds("h-bm"))?;
    let cauchy_cfg = HConsistencyConfig {
        pairs,
        levels: geometric_levels(-6, 3),
        ladder: LadderConfig::new(0.01, 100_000, 10.0),
        barrier: 20.0,
        exit_dt: 0.01,
        exit_paths: 100_000,
        max_steps: 2_000_000,
        shape: Some(ShapeCheck::Exponent { exponent: 0.5, rel_tol: 0.10 }),
    };
    let (c_rep, _) = verify_h_consistency(&cauchy(), &cauchy_cfg, &seeds("h-cauchy"))?;
    Ok(vec![bm_rep, c_rep])
}

fn excessive_invariant() -> Result<Vec<TestReport>> {
    let levels = geometric_levels(-6, 3);
    let h = bm_ladder(0.01, 100_000, 20.0, &levels, "last_creep-h")?;
    let drift_down = LevyModelSpec::brownian("bm_drift_down", -1.0, 1.0);
    let h_down = estimate_h_ladder(
        &drift_down,
        &levels,
        &LadderConfig::new(0.01, 100_000, 20.0),
        &seeds("last_creep-h-down"),
    )?;
    let mut out = Vec::new();
    for (i, &(x, t)) in [(1.0, 1.0), (0.5, 0.5)].iter().enumerate() {
        out.push(check_excessive_invariant(&bm(), &h, x, t, 0.01, 100_000, &seeds(&format!("inv-{i}")))?);
        out.push(check_excessive_invariant(
            &drift_down,
            &h_down,
            x,
            t,
            0.01,
            100_000,
            &seeds(&format!("exc-{i}")),
        )?);
    }
    Ok(out)
}

fn entrance_law() -> Result<Vec<TestReport>> {
    let exp = EntranceConfig {
        t_large: 100.0,
        dt: 0.01,
        n_samples: 5_000,
        reference: EntranceReference::SizeBiased,
    };
    let uni = EntranceConfig {
        t_large: 2_000.0,
        ..exp.clone()
    };
    Ok(vec![
        verify_entrance_law(&sp_exp(), &exp, &seeds("entrance-exp"))?,
        verify_entrance_law(&sp_uniform(), &uni, &seeds("entrance-uniform"))?,
    ])
}

fn weak_convergence() -> Result<Vec<TestReport>> {
    // bridge-corrected killing makes h(x) = x exact on the grid
    let h = closed_form_estimate(&bm(), &geometric_levels(-10, 4)).expect("closed form for BM");
    let cfg = WeakConvergenceConfig {
        x_grid: vec![0.8, 0.4, 0.2, 0.1],
        t: 1.0,
        dt: 1e-3,
        n_eff_target: 200_000.0,
        batch: 100_000,
        max_paths: 20_000_000,
        reference: LimitReference::Bes3,
        trend_alpha: 0.05,
        bridge_correction: true,
        in_proof: Some(InProofConfig {
            x: 0.1,
            m_threshold: 0.1,
            eta: 0.1,
            sampler: sampler(0.1, 0.01, 1e-3),
            n_samples: 2_000,
            max_probability: 0.05,
        }),
    };
    Ok(vec![verify_weak_convergence(&bm(), &h, &cfg, &seeds("weak"))?])
}

fn excursion_identity() -> Result<Vec<TestReport>> {
    let dt = 0.01;
    let h = bm_ladder(dt, 50_000, 20.0, &geometric_levels(-6, 4), "exc-h")?;
    let cfg = ExcursionIdentityConfig {
        t_values: vec![0.5, 1.0],
        levels_a: (1..=10).map(|i| i as f64 / 10.0).collect(),
        dt,
        path_horizon: 20.0,
        n_paths: 5_000,
        t_large: 200.0,
        n_limit: 20_000,
        max_residual: 0.10,
        k_stability: 0.10,
    };
    let (rep, fits) = verify_excursion_identity(&bm(), &h, &cfg, &seeds("exc"))?;
    let fit_t1 = fits
        .iter()
        .find(|f| f.t == 1.0)
        .cloned()
        .map_or_else(|| fit_excursion_constant(&bm(), &h, 1.0, &cfg, &seeds("exc-t1")), Ok)?;
    let limit = limit_marginal_sample(&bm(), 1.0, cfg.t_large, dt, cfg.n_limit, &seeds("cor-limit"))?;
    let acfg = EntranceAsymptoticsConfig {
        t: 1.0,
        x_grid: vec![0.4, 0.2, 0.1, 0.05],
        dt,
        n_paths: 400_000,
        tolerance: 0.15,
    };
    let asym = verify_entrance_asymptotics(
        &bm(),
        &h,
        &fit_t1,
        &limit,
        None,
        |y| (-y).exp(),
        &acfg,
        &seeds("cor"),
    )?;
    Ok(vec![rep, asym])
}

fn creeping() -> Result<Vec<TestReport>> {
    let dt = 1e-5;
    let x_grid: Vec<f64> = (0..=5).map(|k| 2f64.powi(-k)).collect();
    let h = bm_ladder(dt, 4_000, 1.5, &geometric_levels(-8, 1), "creep-h")?;
    let cfg = CreepingConfig {
        x_grid: x_grid.clone(),
        dt,
        n_paths: 10_000,
        max_steps: 50_000_000,
        tolerance_c: 3.0,
        product_tolerance: 0.10,
        min_creep_probability: 0.95,
        refine_factor: 4.0,
        passage_paths: 2_000,
        passage_max_steps: 2_000_000,
        passage_t_large: 1.0,
        last_passage_samples: 2_000,
    };
    let bm_rep = verify_creeping_height(&bm(), Some(&h), &cfg, &seeds("creep-bm"))?;
    let counter_cfg = CreepingConfig {
        dt: 0.01,
        passage_paths: 5_000,
        passage_max_steps: 1_000_000,
        ..cfg
    };
    let sp_rep = verify_creeping_height(&sp_exp(), None, &counter_cfg, &seeds("creep-sp"))?;
    Ok(vec![bm_rep, sp_rep])
}

fn last_passage() -> Result<Vec<TestReport>> {
    let cfg = LastPassageConfig {
        x: 1.0,
        dt: 0.01,
        t_large: 100.0,
        n_samples: 5_000,
        max_steps: 1_000_000,
        max_censored_fraction: 0.01,
    };
    Ok(vec![verify_last_passage_identity(&sp_exp(), &cfg, &seeds("last-passage"))?])
}

fn independence() -> Result<Vec<TestReport>> {
    let cfg = IndependenceConfig {
        sampler: ConditionedSampleConfig {
            horizon: 0.5,
            ..sampler(1.0, 0.01, 0.01)
        },
        n_samples: 5_000,
        lag: 0.5,
        permutations: 99,
    };
    Ok(vec![verify_independence_pre_post(&bm(), &cfg, &seeds("independence"))?])
}

fn infrastructure() -> Result<Vec<TestReport>> {
    let dir = tempfile::tempdir()?;
    let config = ExperimentConfig::default_bm_suite(42, 1);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let _ = run_suite(&config.with_output_dir(&a))?;
    let _ = run_suite(&config.with_output_dir(&b))?;
    let mut det = TestReport::new("determinism", "bm");
    let mut names: Vec<_> = std::fs::read_dir(&a)?
        .map(|e| e.map(|e| e.file_name()))
        .collect::<std::io::Result<_>>()?;
    names.sort();
    let mut identical = !names.is_empty();
    for name in &names {
        identical &= std::fs::read(a.join(name))? == std::fs::read(b.join(name))?;
    }
    det.n_samples = names.len() as u64;
    det.push_check(levyup::verify::Check::boolean(
        format!("{} output files byte-identical", names.len()),
        identical,
    ));
    det.finish();
    let cal = null_calibration(100, 0.95, &seeds("calibration"))?;
    Ok(vec![det, cal])
}

type Criterion = (&'static str, fn() -> Result<Vec<TestReport>>);

const CRITERIA: &[Criterion] = &[
    ("minimum_law", minimum_law),
    ("h_consistency", h_consistency),
    ("excessive_invariant", excessive_invariant),
    ("entrance_law", entrance_law),
    ("weak_convergence", weak_convergence),
    ("excursion_identity", excursion_identity),
    ("creeping", creeping),
    ("last_passage", last_passage),
    ("independence", independence),
    ("infrastructure", infrastructure),
];

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (name, run) in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let line = match run() {
            Ok(reports) => {
                let ok = reports.iter().all(|r| r.passed);
                for r in &reports {
                    println!("    {}", r.summary_line());
                    for n in &r.notes {
                        println!("        {n}");
                    }
                }
                format!("{} {name}", if ok { "PASS" } else { "FAIL" })
            }
            Err(e) => format!("FAIL {name}: error: {e}"),
        };
        if line.starts_with("FAIL") {
            failures += 1;
        }
        println!("{line} ({:.0}s)", start.elapsed().as_secs_f64());
    }
    println!("acceptance: {failures} criteria failed");
    if failures > 0 {
        std::process::exit(1);
    }
}
