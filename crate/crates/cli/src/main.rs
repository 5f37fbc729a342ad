use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use akt_core::dyadic::fit_recursion;
use akt_core::experiments::{
    powers_of_two, render_price_map, run_distribution_fit, run_dyadic, run_full_model_test, run_matching_bench,
    run_mean_growth, write_vectors_csv, DyadicData, ExperimentConfig, Provenance,
};
use akt_core::hazard::{calibrate_cutpoints, Cutpoints};
use akt_core::{Metric, Result, SampleKind};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "akt", version, about = "Random matching experiments: exact and median-bit matchings, hazard fits, dyadic models")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replications.
    #[arg(long, global = true)]
    reps: Option<usize>,
    #[arg(long, global = true, value_enum)]
    metric: Option<MetricArg>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON experiment configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Plane,
    Torus,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Plane => Metric::EuclideanSquared,
            MetricArg::Torus => Metric::ToroidalSquared,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Uniform,
    Normal,
}

#[derive(Subcommand)]
enum Command {
    /// Exact, median-bit and improved matching costs on shared samples.
    Bench {
        /// Point counts; must be powers of four for the median-bit matchers.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Any of exact, ajtai, ajtai+improve.
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',', value_enum)]
        kinds: Option<Vec<KindArg>>,
    },
    /// Mean exact cost for n = 2^0..2^max_exp and the log-law fit (torus by default).
    MeanGrowth {
        #[arg(long, default_value_t = 11)]
        max_exp: u32,
    },
    /// Hazard-family fit and PIT statistics per dyadic level (torus by default).
    DistFit {
        #[arg(long)]
        k_max: Option<usize>,
        /// Cut-points JSON written by `calibrate`.
        #[arg(long)]
        cutpoints: Option<PathBuf>,
    },
    /// Dual-price map of one exact toroidal matching.
    PriceMap {
        #[arg(long, default_value_t = 1024)]
        n: usize,
        #[arg(long)]
        resolution: Option<usize>,
        #[arg(long)]
        buckets: Option<usize>,
    },
    /// Dyadic records, chain vectors, the recursion fit and per-level AR models (torus by default).
    Dyadic {
        #[arg(long)]
        k_max: Option<usize>,
        /// Levels pooled in the recursion fit (default: the last three).
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
    },
    /// Data-vs-model and model-vs-model costs of the chained AR model (torus by default).
    ModelTest {
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        shrink: Option<f64>,
        #[arg(long)]
        model_repeats: Option<usize>,
    },
    /// Cut-points of the PIT Kolmogorov statistic with fitted parameters.
    Calibrate {
        #[arg(long, default_value_t = 817)]
        n_obs: usize,
        #[arg(long)]
        trials: Option<usize>,
    },
}

fn base_config(g: &Global) -> Result<(ExperimentConfig, bool)> {
    let (mut cfg, from_file) = match &g.config {
        Some(path) => (serde_json::from_str(&fs::read_to_string(path)?)?, true),
        None => (ExperimentConfig::default(), false),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(r) = g.reps {
        cfg.reps = r;
    }
    if let Some(m) = g.metric {
        cfg.metric = m.into();
    }
    if let Some(o) = &g.out {
        cfg.out_dir = o.clone();
    }
    Ok((cfg, from_file))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) -> Result<()> {
    fs::write(dir.join(name), serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn with_provenance(prov: &Provenance, body: serde_json::Value) -> serde_json::Value {
    serde_json::json!({ "provenance": prov, "result": body })
}

fn run(cli: Cli) -> Result<()> {
    let (mut cfg, from_file) = base_config(&cli.global)?;
    // torus is the natural default for everything but the bench
    let torus_default = |cfg: &mut ExperimentConfig| {
        if cli.global.metric.is_none() && !from_file {
            cfg.metric = Metric::ToroidalSquared;
        }
    };
    match &cli.command {
        Command::Bench { sizes, algorithms, kinds } => {
            if let Some(s) = sizes {
                cfg.sizes = s.clone();
            }
            if let Some(a) = algorithms {
                cfg.algorithms = a.iter().map(|s| s.parse()).collect::<Result<_>>()?;
            }
            if let Some(k) = kinds {
                cfg.sample_kinds = k
                    .iter()
                    .map(|k| match k {
                        KindArg::Uniform => SampleKind::UniformSquare,
                        KindArg::Normal => SampleKind::StandardNormalPlane,
                    })
                    .collect();
            }
        }
        Command::MeanGrowth { max_exp } => {
            torus_default(&mut cfg);
            cfg.sizes = powers_of_two(*max_exp);
        }
        Command::DistFit { k_max, .. } | Command::Dyadic { k_max, .. } => {
            torus_default(&mut cfg);
            if let Some(k) = k_max {
                cfg.k_max = *k;
            }
        }
        Command::ModelTest { k_max, shrink, model_repeats } => {
            torus_default(&mut cfg);
            if let Some(k) = k_max {
                cfg.k_max = *k;
            }
            if let Some(s) = shrink {
                cfg.shrink = *s;
            }
            if let Some(r) = model_repeats {
                cfg.model_repeats = *r;
            }
        }
        Command::PriceMap { n, resolution, buckets } => {
            cfg.metric = Metric::ToroidalSquared;
            cfg.sizes = vec![*n];
            if let Some(r) = resolution {
                cfg.resolution = *r;
            }
            if let Some(b) = buckets {
                cfg.buckets = *b;
            }
        }
        Command::Calibrate { n_obs, trials } => {
            cfg.sizes = vec![*n_obs];
            if let Some(t) = trials {
                cfg.calibration_trials = *t;
            }
        }
    }
    cfg.validate()?;
    let dir = cfg.out_dir.clone();
    fs::create_dir_all(&dir)?;
    let prov = cfg.provenance();
    write_json(&dir, "config.json", &serde_json::json!({ "provenance": prov, "config": cfg }))?;

    match cli.command {
        Command::Bench { .. } => {
            let rep = run_matching_bench(&cfg)?;
            rep.write_samples_csv(create(&dir, "bench_samples.csv")?, &prov)?;
            rep.write_summary_csv(create(&dir, "bench_summary.csv")?, &prov)?;
            rep.write_correlation_csv(create(&dir, "bench_correlation.csv")?, &prov)?;
            for s in &rep.summary {
                println!(
                    "n={:<5} {:<8} {:<14} mean {:.4} sd {:.4} skew {:+.3}",
                    s.n,
                    s.kind.name(),
                    s.algorithm.name(),
                    s.mean,
                    s.sd,
                    s.skewness
                );
            }
        }
        Command::MeanGrowth { .. } => {
            let rep = run_mean_growth(&cfg)?;
            rep.write_csv(create(&dir, "growth.csv")?, &prov)?;
            write_json(&dir, "growth_fit.json", &with_provenance(&prov, serde_json::to_value(rep.fit)?))?;
            let f = rep.fit;
            println!("alpha {:.4} beta {:.4} gamma {:.4} converged {}", f.alpha, f.beta, f.gamma, f.converged);
        }
        Command::Dyadic { levels, .. } => {
            let data = run_dyadic(&cfg)?;
            write_dyadic(&dir, &data, &prov)?;
            let levels = levels.unwrap_or_else(|| (cfg.k_max.saturating_sub(2)..=cfg.k_max).collect());
            match fit_recursion(&data.levels(&levels)) {
                Ok(fit) => {
                    println!(
                        "levels {levels:?}: a {:.4} b {:.4} |4a-2b-1| {:.4} noise sd {:.4}",
                        fit.a, fit.b, fit.stationarity_defect, fit.noise_sd
                    );
                    let mut v = serde_json::to_value(&fit)?;
                    v.as_object_mut().expect("struct").remove("residuals");
                    v["levels"] = serde_json::json!(levels);
                    write_json(&dir, "recursion.json", &with_provenance(&prov, v))?;
                }
                Err(e) => eprintln!("recursion fit skipped: {e}"),
            }
            match data.fit_models() {
                Ok(models) => write_json(&dir, "ar_models.json", &with_provenance(&prov, serde_json::to_value(models)?))?,
                Err(e) => eprintln!("AR models skipped: {e}"),
            }
        }
        Command::DistFit { cutpoints, .. } => {
            let cut: Option<Cutpoints> = match cutpoints {
                Some(path) => {
                    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
                    Some(serde_json::from_value(v.get("result").cloned().unwrap_or(v))?)
                }
                None => None,
            };
            let data = run_dyadic(&cfg)?;
            let rep = run_distribution_fit(&data, cfg.seed, cut)?;
            rep.write_csv(create(&dir, "dist_fit.csv")?, &prov)?;
            for r in &rep.rows {
                println!("k={:<2} n={:<5} ks {}", r.k, r.n_obs, r.ks.map_or("-".into(), |v| format!("{v:.4}")));
            }
        }
        Command::ModelTest { .. } => {
            let data = run_dyadic(&cfg)?;
            let rep = run_full_model_test(&data, &cfg)?;
            rep.write_csv(create(&dir, "model_test.csv")?, &prov)?;
            write_json(&dir, "model_test.json", &with_provenance(&prov, serde_json::to_value(&rep)?))?;
            for s in [&rep.unshrunk, &rep.shrunk] {
                println!(
                    "sigma x {:.3}: data-vs-model {:.2}, model-vs-model {:.2} ± {:.2}",
                    s.factor, s.data_vs_model, s.model_vs_model_mean, s.model_vs_model_sd
                );
            }
        }
        Command::PriceMap { n, .. } => {
            let map = render_price_map(n, cfg.seed, cfg.resolution, cfg.buckets)?;
            map.write_ppm(create(&dir, "price_map.ppm")?, &prov)?;
            write_json(&dir, "price_map.json", &map.sidecar_json(&prov))?;
            println!("n {n}: cost {:.4}, max price {:.5}", map.total_cost, map.max_value);
        }
        Command::Calibrate { n_obs, .. } => {
            let c = calibrate_cutpoints(n_obs, cfg.calibration_trials, cfg.seed)?;
            write_json(&dir, "cutpoints.json", &with_provenance(&prov, serde_json::to_value(c)?))?;
            println!("c05 {:.4} c01 {:.4} ({} of {} trials discarded)", c.c05, c.c01, c.discarded, c.n_trials);
        }
    }
    Ok(())
}

fn write_dyadic(dir: &Path, data: &DyadicData, prov: &Provenance) -> Result<()> {
    data.write_csv(create(dir, "dyadic_records.csv")?, prov)?;
    write_vectors_csv(create(dir, "dyadic_vectors.csv")?, &data.vectors(), prov)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

