use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use levyup::conditioning::{
    decompose_at_minimum, sample_conditioned_many, sample_entrance_law,
    sample_post_min_limit_construction, ConditionedSampleConfig,
};
use levyup::harmonic::{closed_form_estimate, estimate_h_ladder, geometric_levels, LadderConfig};
use levyup::harness::{emit_plot_data, install, run_suite, ExperimentConfig, Overrides};
use levyup::path::simulate_path;
use levyup::{Error, SeedStream};

#[derive(Parser)]
#[command(name = "levyup", version, about = "Simulate and test Lévy processes conditioned to stay positive")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Experiment TOML file (models, seed, tests).
    #[arg(short, long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    n_paths: Option<usize>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Comma-separated epsilon schedule.
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self, tests: Option<Vec<String>>) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        cfg.apply(&Overrides {
            seed: self.seed,
            output_dir: self.output_dir.clone(),
            dt: self.dt,
            n_paths: self.n_paths,
            horizon: self.horizon,
            epsilon: self.epsilon.clone(),
            threads: self.threads,
            tests,
        })?;
        Ok(cfg)
    }
}

fn dt(cfg: &ExperimentConfig) -> f64 {
    cfg.defaults.dt.unwrap_or(0.01)
}

fn n_paths(cfg: &ExperimentConfig, fallback: usize) -> usize {
    cfg.defaults.n_paths.unwrap_or(fallback)
}

fn horizon(cfg: &ExperimentConfig, fallback: f64) -> f64 {
    cfg.defaults.horizon.unwrap_or(fallback)
}

#[derive(Copy, Clone, ValueEnum)]
enum HMethod {
    Ladder,
    ClosedForm,
}

#[derive(Copy, Clone, ValueEnum)]
enum EntranceSource {
    /// Draw directly from the entrance law.
    Law,
    /// First value after the last zero of the reflected path.
    Construction,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one path on a grid and write it as CSV (time,value).
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 0.0)]
        x0: f64,
        #[arg(long, default_value_t = 0)]
        replicate: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Estimate the harmonic function on 0, 2^min .. 2^max and write level,value,stderr,method.
    EstimateH {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: String,
        #[arg(long, value_enum, default_value_t = HMethod::Ladder)]
        method: HMethod,
        #[arg(long, default_value_t = -6, allow_hyphen_values = true)]
        min_exp: i32,
        #[arg(long, default_value_t = 3)]
        max_exp: i32,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Rejection-sample paths conditioned to stay positive and write one summary row per path.
    ConditionSample {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: String,
        #[arg(long)]
        x0: f64,
        #[arg(short = 'n', long, default_value_t = 1000)]
        samples: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Sample the initial law of the process conditioned from 0.
    EntranceSample {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: String,
        #[arg(long, value_enum, default_value_t = EntranceSource::Law)]
        source: EntranceSource,
        #[arg(long, default_value_t = 100.0)]
        t_large: f64,
        #[arg(short = 'n', long, default_value_t = 1000)]
        samples: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run one named test from the config, or `all`.
    Verify {
        /// Test name or `all`.
        name: String,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Turn report JSON files (or every report in a results directory) into plotting CSVs.
    EmitPlots {
        /// Report files or result directories.
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn report_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Error> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|e| e == "json"))
                .filter(|f| f.file_name().is_some_and(|n| n != "index.json"))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Simulate { cfg, model: label, x0, replicate, out } => {
            let c = cfg.load(Some(Vec::new()))?;
            let spec = c.model(&label)?;
            let mut rng = SeedStream::new(c.seed, "simulate").child(&label).rng(replicate);
            let path = simulate_path(&spec, x0, dt(&c), horizon(&c, 10.0), &mut rng)?;
            path.write_csv(&out)?;
            log::info!("wrote {} points to {}", path.len(), out.display());
        }
        Command::EstimateH { cfg, model: label, method, min_exp, max_exp, out } => {
            let c = cfg.load(Some(Vec::new()))?;
            let spec = c.model(&label)?;
            let levels = geometric_levels(min_exp, max_exp);
            let est = match method {
                HMethod::ClosedForm => closed_form_estimate(&spec, &levels).ok_or_else(|| {
                    Error::Config(format!("model `{label}` has no closed-form harmonic function"))
                })?,
                HMethod::Ladder => {
                    let lc = LadderConfig::new(dt(&c), n_paths(&c, 10_000), horizon(&c, 20.0));
                    let seeds = SeedStream::new(c.seed, "estimate-h").child(&label);
                    install(c.threads, || estimate_h_ladder(&spec, &levels, &lc, &seeds))??
                }
            };
            est.write_csv(&out)?;
            log::info!("{}", est.normalization_note);
        }
        Command::ConditionSample { cfg, model: label, x0, samples, out } => {
            let c = cfg.load(Some(Vec::new()))?;
            let spec = c.model(&label)?;
            let eps = c.defaults.epsilon.as_ref().and_then(|e| e.last().copied()).unwrap_or(0.01);
            let sc = ConditionedSampleConfig {
                x0,
                epsilon: eps,
                dt: dt(&c),
                horizon: horizon(&c, 0.0),
                max_rejections: 100_000_000,
                seed: SeedStream::new(c.seed, "condition-sample").child(&label).seed(),
            };
            let (rows, stats) = install(c.threads, || sample_conditioned_many(&spec, &sc, samples, |cp| {
                let d = decompose_at_minimum(&cp.conditioned());
                let last = *cp.path.values.last().unwrap_or(&f64::NAN);
                vec![
                    cp.attempts.to_string(),
                    cp.path.time(cp.clock_index).to_string(),
                    d.u.to_string(),
                    d.m.to_string(),
                    last.to_string(),
                ]
            }))??;
            let rows = rows.into_iter().enumerate().map(|(i, mut r)| {
                r.insert(0, i.to_string());
                r
            });
            write_rows(&out, &["replicate", "attempts", "clock_time", "minimum", "argmin_time", "final_value"], rows)?;
            log::info!("acceptance rate {:.5}", stats.acceptance_rate());
        }
        Command::EntranceSample { cfg, model: label, source, t_large, samples, out } => {
            let c = cfg.load(Some(Vec::new()))?;
            let spec = c.model(&label)?;
            let seeds = SeedStream::new(c.seed, "entrance-sample").child(&label);
            let dt = dt(&c);
            let mut values = Vec::with_capacity(samples);
            for i in 0..samples as u64 {
                let mut rng = seeds.rng(i);
                let v = match source {
                    EntranceSource::Law => sample_entrance_law(&spec, &mut rng)?,
                    EntranceSource::Construction => loop {
                        if let Some(seg) = sample_post_min_limit_construction(&spec, t_large, dt, &mut rng)? {
                            break seg.values[1];
                        }
                    },
                };
                values.push(vec![i.to_string(), v.to_string()]);
            }
            write_rows(&out, &["replicate", "value"], values)?;
        }
        Command::Verify { name, cfg } => {
            let selection = if name == "all" { None } else { Some(vec![name]) };
            let c = cfg.load(selection)?;
            let index = run_suite(&c)?;
            for e in &index.entries {
                for line in &e.summary {
                    println!("{line}");
                }
                if let Some(err) = &e.error {
                    println!("ERROR {}: {err}", e.name);
                }
            }
            println!(
                "{} passed, {} failed, {} errors; reports in {}",
                index.passed,
                index.failed,
                index.errored,
                c.output_dir.display()
            );
            return Ok(index.all_passed());
        }
        Command::EmitPlots { inputs, out } => {
            let files = report_files(&inputs)?;
            let bundle = emit_plot_data(&files, &out)?;
            for w in &bundle.warnings {
                log::warn!("{w}");
                eprintln!("warning: {w}");
            }
            for f in &bundle.files {
                println!("{}", f.display());
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
