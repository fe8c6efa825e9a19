use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use cgkdm::experiments::{run_experiment, write_csv, write_json, ExperimentConfig, ExperimentId};
use cgkdm::independence::{run_test_cached, MethodChoice, TestMethod, DEFAULT_NULL_REPS};
use cgkdm::io::{read_sample, read_sample_path, write_sample};
use cgkdm::{
    dcor, estimate, kendall, mv_spearman_rho2, pearson, rank_transform, sample_scenario, spearman, Bandwidth,
    MomentCache, Sample, Scenario, TiePolicy,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

const EXIT_DATA: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

#[derive(Parser)]
#[command(name = "cgkdm", version, about = "Copula-based Gaussian kernel dependence measure and independence test")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dependence estimates of a CSV sample, with classical baselines.
    Measure {
        #[command(flatten)]
        input: Input,
        /// Kernel bandwidth; repeat for several.
        #[arg(long = "sigma", default_values_t = [1.0])]
        sigmas: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Test of mutual independence of the columns of a CSV sample.
    Test {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, value_enum, default_value_t = Method::Auto)]
        method: Method,
        #[arg(long, default_value_t = 0.05)]
        level: f64,
        /// Null replicates for the simulated methods.
        #[arg(long, default_value_t = DEFAULT_NULL_REPS)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Directory of the null-moment cache (default: $CGKDM_CACHE_DIR or a temp dir).
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Reproduces one of the tables or figures.
    Experiment(ExperimentArgs),
    /// Writes a sample from a built-in scenario as CSV.
    Generate {
        /// Scenario, e.g. `bvn:0.5`, `mvt:5:0.2:3`, `cosine`, `orientation:uud`.
        scenario: String,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Input {
    /// CSV file, or `-` for stdin. A non-numeric first row is a header.
    path: PathBuf,
    /// Break ties with a seeded jitter instead of failing.
    #[arg(long)]
    jitter: Option<u64>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// table1, table2, table4, fig1, fig2, size-sweep, power-sweep or variability.
    id: String,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    null_reps: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long = "sigma")]
    sigmas: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    level: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Replicate counts of the original study instead of desk-scale ones.
    #[arg(long)]
    full: bool,
    #[arg(long, value_enum, default_value_t = Method::GammaExact)]
    method: Method,
    /// Scenario for the power sweep; repeat for several.
    #[arg(long = "scenario")]
    scenarios: Vec<String>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Sim,
    GammaExact,
    GammaAsym,
    Auto,
}

impl From<Method> for MethodChoice {
    fn from(m: Method) -> Self {
        match m {
            Method::Sim => MethodChoice::Fixed(TestMethod::SimulatedNull),
            Method::GammaExact => MethodChoice::Fixed(TestMethod::GammaExact),
            Method::GammaAsym => MethodChoice::Fixed(TestMethod::GammaAsymptotic),
            Method::Auto => MethodChoice::Auto,
        }
    }
}

fn exit_code(e: &cgkdm::Error) -> u8 {
    use cgkdm::Error::*;
    match e {
        QuadratureFailure(_)
        | NonPositiveNormalizer(_)
        | TruncationInsufficient { .. }
        | NonPositiveMoment { .. }
        | SamplerRangeViolation(_)
        | NotPsd => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

fn load(input: &Input) -> cgkdm::Result<Sample> {
    let s = if input.path.as_os_str() == "-" { read_sample(io::stdin().lock())? } else { read_sample_path(&input.path)? };
    Ok(match input.jitter {
        Some(seed) => s.with_tie_policy(TiePolicy::Jitter(seed)),
        None => s,
    })
}

fn sink(path: &Option<PathBuf>) -> cgkdm::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| cgkdm::Error::Io(format!("{}: {e}", p.display())))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cache(dir: &Option<PathBuf>) -> MomentCache {
    dir.as_ref().map_or_else(MomentCache::from_env, MomentCache::new)
}

fn measure(input: &Input, sigmas: &[f64], format: Format, output: &Option<PathBuf>) -> cgkdm::Result<()> {
    let s = load(input)?;
    let p = rank_transform(&s)?;
    let mut rows: Vec<(String, f64)> = Vec::new();
    for &sigma in sigmas {
        rows.push((format!("I_{sigma}"), estimate(&p, Bandwidth::new(sigma)?)?));
    }
    rows.push(("rho2".into(), mv_spearman_rho2(&p)));
    if s.d() == 2 {
        rows.push(("pearson".into(), pearson(&s)?));
        rows.push(("spearman".into(), spearman(&s)?));
        rows.push(("kendall".into(), kendall(&s)?));
        rows.push(("dcor".into(), dcor(&s)?));
    }
    let mut out = sink(output)?;
    match format {
        Format::Json => {
            let measures: serde_json::Map<String, serde_json::Value> =
                rows.into_iter().map(|(k, v)| (k, serde_json::json!(v))).collect();
            let doc = serde_json::json!({ "n": s.n(), "d": s.d(), "measures": measures });
            serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| cgkdm::Error::Io(e.to_string()))?;
            writeln!(out)?;
        }
        Format::Csv => {
            writeln!(out, "measure,value")?;
            for (k, v) in rows {
                writeln!(out, "{k},{v}")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn experiment(a: &ExperimentArgs) -> cgkdm::Result<()> {
    let mut cfg = ExperimentConfig::new(a.id.parse::<ExperimentId>()?);
    cfg.reps = a.reps;
    cfg.null_reps = a.null_reps;
    cfg.n = a.n;
    cfg.d = a.d;
    cfg.sigmas = a.sigmas.clone();
    cfg.level = a.level;
    cfg.seed = a.seed;
    cfg.full = a.full;
    cfg.method = a.method.into();
    cfg.scenarios = a.scenarios.iter().map(|s| s.parse()).collect::<cgkdm::Result<Vec<Scenario>>>()?;
    cfg.validate()?;
    let cache = cache(&a.cache_dir);
    let rows = run_experiment(&cfg, Some(&cache))?;
    let mut out = sink(&a.output)?;
    match a.format {
        Format::Csv => write_csv(&rows, &mut out)?,
        Format::Json => write_json(&cfg, &rows, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> cgkdm::Result<()> {
    match cli.command {
        Command::Measure { input, sigmas, format, output } => measure(&input, &sigmas, format, &output),
        Command::Test { input, sigma, method, level, reps, seed, cache_dir, output } => {
            let p = rank_transform(&load(&input)?)?;
            let cache = cache(&cache_dir);
            let report = run_test_cached(&p, Bandwidth::new(sigma)?, MethodChoice::from(method), level, reps, seed, Some(&cache))?;
            let mut out = sink(&output)?;
            serde_json::to_writer_pretty(&mut out, &report).map_err(|e| cgkdm::Error::Io(e.to_string()))?;
            writeln!(out)?;
            out.flush()?;
            Ok(())
        }
        Command::Experiment(a) => experiment(&a),
        Command::Generate { scenario, n, seed, output } => {
            let s = sample_scenario(&scenario.parse()?, n, seed)?;
            let mut out = sink(&output)?;
            write_sample(&s, &mut out)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
