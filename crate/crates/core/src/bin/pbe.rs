use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pbe_discovery::grid::{save_density_with_sidecar, DerivativeScheme, FiniteDifference, NoiseMode};
use pbe_discovery::library::Combination;
use pbe_discovery::pipeline::benchmark::{run_benchmark, BenchmarkOptions, BenchmarkTable};
use pbe_discovery::pipeline::plot::{benchmark_csv, snapshot_csv, study_csv, write_text};
use pbe_discovery::pipeline::study::{run_noise_study, StudyConfig, StudyResult};
use pbe_discovery::pipeline::{
    load_input, run_discovery_timed, DiscoveryReport, InputSource, LambdaSpec, NoiseConfig, RunConfig, SmoothingConfig,
    SubsampleConfig, INPUT_ERROR_EXIT,
};
use pbe_discovery::selector::{ResidualConvention, SelectWeights};
use pbe_discovery::solver::{case_spec, generate_case_with, GenerationMode};
use pbe_discovery::Error;

#[derive(Parser)]
#[command(name = "pbe", version, about = "Discover population balance equations from number-density data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a benchmark case's density field as CSV with a JSON sidecar.
    Generate(GenerateArgs),
    /// Identify a PBE from a case or a density CSV.
    Discover(Box<DiscoverArgs>),
    /// Run the benchmark cases and write the results table.
    Benchmark(BenchmarkArgs),
    /// Success rate over noise levels and data fractions.
    Study(StudyArgs),
    /// Long-format CSV from a report, study or benchmark file.
    Plotdata(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Auto,
    Solver,
}

impl From<Mode> for GenerationMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Auto => GenerationMode::Auto,
            Mode::Solver => GenerationMode::Solver,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Derivative {
    Fd2,
    Fd4,
    Polyfit,
}

#[derive(Clone, Copy, ValueEnum)]
enum Convention {
    Raw,
    Normalized,
}

#[derive(Args)]
struct GenerateArgs {
    /// Case id, `a` to `p`.
    case: String,
    #[arg(long, value_enum, default_value = "auto")]
    mode: Mode,
    /// Output CSV; defaults to `<case>.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WeightArgs {
    /// `λ₁,λ₂,λ₃`.
    #[arg(long, value_parser = parse_weights)]
    weights: Option<[f64; 3]>,
    #[arg(long, value_enum)]
    convention: Option<Convention>,
}

fn parse_weights(s: &str) -> std::result::Result<[f64; 3], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    <[f64; 3]>::try_from(v).map_err(|v| format!("expected three weights, got {}", v.len()))
}

impl WeightArgs {
    fn apply(&self, base: Option<SelectWeights>) -> Option<SelectWeights> {
        let mut w = match &self.weights {
            Some(v) => Some(SelectWeights::new(v[0], v[1], v[2])),
            None => base,
        };
        if let Some(c) = self.convention {
            let mut x = w.unwrap_or_default();
            x.convention = match c {
                Convention::Raw => ResidualConvention::Raw,
                Convention::Normalized => ResidualConvention::Normalized,
            };
            w = Some(x);
        }
        w
    }
}

#[derive(Args)]
struct SweepArgs {
    /// Combination tags such as `G`, `agg`, `G+bkg+agg`.
    #[arg(long, value_delimiter = ',')]
    combinations: Option<Vec<Combination>>,
    /// Explicit sparsity indices.
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long, requires_all = ["lambda_max", "lambda_count"])]
    lambda_min: Option<f64>,
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long)]
    lambda_count: Option<usize>,
}

impl SweepArgs {
    fn apply(&self, sweep: &mut pbe_discovery::pipeline::SweepConfig) {
        if let Some(c) = &self.combinations {
            sweep.combinations = c.clone();
        }
        if let Some(l) = &self.lambdas {
            sweep.lambda = LambdaSpec::List(l.clone());
        }
        if let (Some(min), Some(max), Some(count)) = (self.lambda_min, self.lambda_max, self.lambda_count) {
            sweep.lambda = LambdaSpec::Range { min, max, count };
        }
    }
}

#[derive(Args)]
struct DiscoverArgs {
    /// TOML run configuration; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, conflicts_with = "csv")]
    case: Option<String>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Relative noise level, e.g. `0.01` for 1 %.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    noise_seed: Option<u64>,
    /// Scale noise by each value rather than by the global standard deviation.
    #[arg(long)]
    multiplicative_noise: bool,
    /// Savitzky–Golay smoothing along x.
    #[arg(long)]
    smooth: bool,
    #[arg(long)]
    no_smooth: bool,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    polyorder: Option<usize>,
    #[arg(long, value_enum)]
    derivative: Option<Derivative>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    halfwidth: Option<usize>,
    /// Fraction of rows used in the regression.
    #[arg(long)]
    subsample: Option<f64>,
    #[arg(long)]
    subsample_seed: Option<u64>,
    /// Basis catalog, JSON or TOML.
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[command(flatten)]
    weights: WeightArgs,
    #[command(flatten)]
    sweep: SweepArgs,
    /// Directory for report.json, model.txt and timing.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the report JSON instead of the summary.
    #[arg(long)]
    json: bool,
}

impl DiscoverArgs {
    fn config(&self) -> Result<RunConfig, Error> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::new(InputSource::default()),
        };
        if let Some(id) = &self.case {
            c.input = InputSource {
                generation: c.input.generation,
                ..InputSource::case(id)
            };
        }
        if let Some(p) = &self.csv {
            c.input = InputSource::csv(p);
        }
        if let Some(m) = self.mode {
            c.input.generation = m.into();
        }
        let pre = &mut c.preprocess;
        if let Some(level) = self.noise {
            let old = pre.noise;
            pre.noise = Some(NoiseConfig {
                level,
                seed: self.noise_seed.or(old.map(|n| n.seed)).unwrap_or(0),
                mode: old.map(|n| n.mode).unwrap_or_default(),
            });
            if level > 0.0 && pre.smoothing.is_none() && !self.no_smooth {
                let recipe = pbe_discovery::pipeline::Preprocessing::noisy(level, 0);
                pre.smoothing = recipe.smoothing;
                if self.derivative.is_none() {
                    pre.derivative = recipe.derivative;
                }
            }
        } else if let (Some(seed), Some(n)) = (self.noise_seed, pre.noise.as_mut()) {
            n.seed = seed;
        }
        if self.multiplicative_noise {
            if let Some(n) = pre.noise.as_mut() {
                n.mode = NoiseMode::Multiplicative;
            }
        }
        if self.smooth || self.window.is_some() || self.polyorder.is_some() {
            let s = pre.smoothing.unwrap_or_default();
            pre.smoothing = Some(SmoothingConfig {
                window: self.window.unwrap_or(s.window),
                polyorder: self.polyorder.unwrap_or(s.polyorder),
            });
        }
        if self.no_smooth {
            pre.smoothing = None;
        }
        if let Some(d) = self.derivative {
            pre.derivative = match d {
                Derivative::Fd2 => DerivativeScheme::FiniteDifference {
                    order: FiniteDifference::Second,
                },
                Derivative::Fd4 => DerivativeScheme::FiniteDifference {
                    order: FiniteDifference::Fourth,
                },
                Derivative::Polyfit => DerivativeScheme::Polyfit { degree: 3, halfwidth: 5 },
            };
        }
        if let DerivativeScheme::Polyfit { degree, halfwidth } = &mut pre.derivative {
            *degree = self.degree.unwrap_or(*degree);
            *halfwidth = self.halfwidth.unwrap_or(*halfwidth);
        }
        if let Some(fraction) = self.subsample {
            pre.subsample = (fraction < 1.0).then_some(SubsampleConfig {
                fraction,
                seed: self.subsample_seed.or(pre.subsample.map(|s| s.seed)).unwrap_or(0),
            });
        } else if let (Some(seed), Some(s)) = (self.subsample_seed, pre.subsample.as_mut()) {
            s.seed = seed;
        }
        if let Some(p) = &self.catalog {
            c.catalog = Some(p.clone());
        }
        c.weights = self.weights.apply(c.weights);
        self.sweep.apply(&mut c.sweep);
        if let Some(o) = &self.out {
            c.output = Some(o.clone());
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Case ids; all sixteen when omitted.
    #[arg(long, value_delimiter = ',')]
    cases: Vec<String>,
    #[arg(long, value_enum, default_value = "auto")]
    mode: Mode,
    /// Relative noise level for noisy repetitions.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 1)]
    repetitions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also rescore over ±50 % of the case weights.
    #[arg(long)]
    band: bool,
    /// Also rescore with the realizability weight at zero.
    #[arg(long)]
    ablation: bool,
    #[command(flatten)]
    sweep: SweepArgs,
    /// Directory for benchmark.json, benchmark.csv and benchmark.md.
    #[arg(long, default_value = "benchmark")]
    out: PathBuf,
}

#[derive(Args)]
struct StudyArgs {
    case: String,
    /// Relative noise levels.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    fractions: Option<Vec<f64>>,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "auto")]
    mode: Mode,
    #[command(flatten)]
    weights: WeightArgs,
    #[command(flatten)]
    sweep: SweepArgs,
    /// Directory for study.json and study.csv.
    #[arg(long, default_value = "study")]
    out: PathBuf,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct PlotSource {
    /// A report.json written by `discover`.
    #[arg(long)]
    report: Option<PathBuf>,
    /// A study.json written by `study`.
    #[arg(long)]
    study: Option<PathBuf>,
    /// A benchmark.json written by `benchmark`.
    #[arg(long)]
    benchmark: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    source: PlotSource,
    /// Number of time snapshots for report plots.
    #[arg(long, default_value_t = 5)]
    snapshots: usize,
    #[arg(long, default_value = "plots")]
    out: PathBuf,
}

fn is_input_error(e: &Error) -> bool {
    match e {
        Error::Stage { stage, source } => matches!(*stage, "config" | "load") || is_input_error(source),
        Error::Io { .. }
        | Error::MalformedHeader(_)
        | Error::NonUniformGrid { .. }
        | Error::NonNumeric { .. }
        | Error::DimensionMismatch { .. }
        | Error::InvalidGrid(_)
        | Error::InvalidField(_)
        | Error::UnknownCase(_)
        | Error::Config(_)
        | Error::Json(_) => true,
        _ => false,
    }
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn generate(args: &GenerateArgs) -> Result<i32, Error> {
    let (field, spec) = generate_case_with(&args.case, args.mode.into())?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}.csv", spec.id)));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
    }
    let metadata = serde_json::json!({ "case": spec.id, "spec": spec });
    save_density_with_sidecar(&field, &out, metadata)?;
    println!("{} ({} x {}) -> {}", spec.name, field.nx(), field.nt(), out.display());
    Ok(0)
}

fn discover(args: &DiscoverArgs) -> Result<i32, Error> {
    let config = args.config()?;
    let (report, timing) = run_discovery_timed(&config)?;
    if let Some(dir) = &config.output {
        report.write(dir, Some(&timing))?;
    }
    if args.json {
        println!("{}", report.to_json()?);
    } else {
        print!("{}", report.summary());
    }
    Ok(report.exit_code)
}

fn benchmark(args: &BenchmarkArgs) -> Result<i32, Error> {
    let mut options = BenchmarkOptions {
        cases: args.cases.clone(),
        generation: args.mode.into(),
        noise: args.noise,
        repetitions: args.repetitions,
        seed: args.seed,
        band: args.band,
        ablation: args.ablation,
        ..Default::default()
    };
    for id in &options.cases {
        case_spec(id)?;
    }
    args.sweep.apply(&mut options.sweep);
    options.sweep.plan().validate()?;
    let table = run_benchmark(&options);
    write_text(&args.out, "benchmark.json", &table.to_json()?)?;
    write_text(&args.out, "benchmark.csv", &benchmark_csv(&table)?)?;
    let md = table.to_markdown();
    write_text(&args.out, "benchmark.md", &md)?;
    print!("{md}");
    Ok(0)
}

fn study(args: &StudyArgs) -> Result<i32, Error> {
    let mut config = StudyConfig::new(&args.case);
    if let Some(l) = &args.levels {
        config.levels = l.clone();
    }
    if let Some(f) = &args.fractions {
        config.fractions = f.clone();
    }
    config.samples = args.samples;
    config.master_seed = args.seed;
    config.generation = args.mode.into();
    config.weights = args.weights.apply(None);
    args.sweep.apply(&mut config.sweep);
    let result = run_noise_study(&config)?;
    write_text(&args.out, "study.json", &result.to_json()?)?;
    let csv = study_csv(&result)?;
    write_text(&args.out, "study.csv", &csv)?;
    print!("{csv}");
    Ok(0)
}

fn plotdata(args: &PlotArgs) -> Result<i32, Error> {
    let s = &args.source;
    if let Some(p) = &s.report {
        let report = DiscoveryReport::from_json(&read(p)?)?;
        let (field, _) = load_input(&report.config)?;
        write_text(&args.out, "snapshots.csv", &snapshot_csv(&report, &field, args.snapshots)?)?;
    } else if let Some(p) = &s.study {
        let study = StudyResult::from_json(&read(p)?)?;
        write_text(&args.out, "study.csv", &study_csv(&study)?)?;
    } else if let Some(p) = &s.benchmark {
        let table = BenchmarkTable::from_json(&read(p)?)?;
        write_text(&args.out, "benchmark.csv", &benchmark_csv(&table)?)?;
    }
    println!("plot data -> {}", args.out.display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Discover(a) => discover(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Study(a) => study(a),
        Command::Plotdata(a) => plotdata(a),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_input_error(&e) { INPUT_ERROR_EXIT as u8 } else { 1 })
        }
    }
}
