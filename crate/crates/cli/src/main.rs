use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bandsel::bench::{
    corpus_tasks, curves_to_csv, default_beta_grid, run_benchmark, BenchmarkConfig, BenchmarkReport, CorpusSpec,
    GridSpec, Method,
};
use bandsel::dataset::{load_csv, write_csv, write_labeled_csv, AnomalyLaw, Dataset, Label, MixtureScenario};
use bandsel::kernel::Bandwidth;
use bandsel::select::{
    auto_bounds, select_gamma, sweep_risk_curve, validation_curve, CurveKind, GammaGrid, PlateauSpec, RiskCurve,
    RiskSettings, SelectionRule, DEFAULT_REL_TOL,
};
use bandsel::svdd::{fit, ModelFile, SvddConfig};
use bandsel::RiskKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "bandsel", version, about = "SVDD anomaly detection with automatic kernel bandwidth selection")]
struct Cli {
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the synthetic mixture study as CSV files.
    Generate(GenerateArgs),
    /// Evaluate a risk (or the validation error) over a bandwidth grid.
    Sweep(SweepArgs),
    /// Pick a bandwidth from a curve written by `sweep`.
    Select(SelectArgs),
    /// Fit an SVDD model and write it as JSON.
    Fit(FitArgs),
    /// Compare selection methods over a corpus of multiclass CSV files.
    Benchmark(BenchmarkArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
enum Scenario {
    /// Uniform anomalies on [-5, 5]^5.
    #[value(name = "mixture-uniform", alias = "paper-4.2")]
    #[serde(rename = "mixture-uniform")]
    Uniform,
    /// Gaussian anomalies (see --anomaly-std).
    #[value(name = "mixture-gaussian")]
    #[serde(rename = "mixture-gaussian")]
    Gaussian,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "mixture-uniform")]
    scenario: Scenario,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    n_train: usize,
    #[arg(long, default_value_t = 100)]
    n_anomalies: usize,
    /// Normals and anomalies each in the validation set.
    #[arg(long, default_value_t = 5000)]
    n_validation: usize,
    /// Standard deviation of the Gaussian anomalies (mixture-gaussian only).
    #[arg(long, default_value_t = 3.0)]
    anomaly_std: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SvddArgs {
    #[arg(long, default_value_t = 0.1)]
    nu: f64,
    /// KKT violation at which the solver stops.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    sv_threshold: f64,
    /// Solver budget in passes of l pair updates [default: 10 l^2].
    #[arg(long)]
    max_passes: Option<usize>,
}

impl SvddArgs {
    fn config(&self) -> CliResult<SvddConfig> {
        let c = SvddConfig {
            nu: self.nu,
            solver_tolerance: self.tol,
            max_passes: self.max_passes,
            sv_threshold: self.sv_threshold,
        };
        c.validate().map_err(|e| e.to_string())?;
        Ok(c)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
struct RiskArgs {
    /// Monte-Carlo sample size [default: max(10000, 100 l)].
    #[arg(long)]
    mc_count: Option<usize>,
    #[arg(long, default_value_t = 5)]
    smote_k: usize,
    #[arg(long, default_value_t = 1.0)]
    smote_multiplier: f64,
    /// Anomaly box is the training bounding box scaled by this factor.
    #[arg(long, default_value_t = 2.0)]
    box_factor: f64,
}

impl RiskArgs {
    fn settings(&self) -> CliResult<RiskSettings> {
        let s = RiskSettings {
            mc_count: self.mc_count,
            box_factor: self.box_factor,
            smote_k: self.smote_k,
            smote_multiplier: self.smote_multiplier,
        };
        s.validate().map_err(|e| e.to_string())?;
        Ok(s)
    }
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    train: PathBuf,
    /// ±1 label column of the training file; only +1 rows are kept.
    #[arg(long)]
    label_column: Option<String>,
    /// sv, empirical, smote, kernel, polarization or validation.
    #[arg(long)]
    risk: String,
    /// Labelled held-out set, required for `--risk validation`.
    #[arg(long)]
    validation: Option<PathBuf>,
    #[arg(long, default_value = "label")]
    validation_label_column: String,
    /// `auto` or `MIN:MAX:STEPS` (log-spaced).
    #[arg(long, default_value = "auto")]
    grid: String,
    /// Number of points of the auto grid.
    #[arg(long, default_value_t = 50)]
    grid_steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    svdd: SvddArgs,
    #[command(flatten)]
    risk_args: RiskArgs,
    /// Curve CSV; the resolved configuration goes to `<out>.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SelectArgs {
    #[arg(long)]
    curve: PathBuf,
    /// argmin or plateau-max [default: depends on the curve kind].
    #[arg(long)]
    rule: Option<String>,
    #[arg(long, default_value_t = DEFAULT_REL_TOL)]
    rel_tol: f64,
    /// Also write the JSON to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    svdd: SvddArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    /// Directory of multiclass CSV files.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "class")]
    label_column: String,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.15")]
    fractions: Vec<f64>,
    #[arg(long, default_value_t = 0.3)]
    val_fraction: f64,
    /// Comma-separated `KIND` or `KIND:RULE` [default: all five kinds].
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_REL_TOL)]
    rel_tol: f64,
    #[arg(long, default_value_t = 50)]
    grid_steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    svdd: SvddArgs,
    #[command(flatten)]
    risk_args: RiskArgs,
    /// Include per-record wall times (makes the report non-reproducible).
    #[arg(long)]
    timings: bool,
    #[arg(long)]
    out: PathBuf,
    /// Dolan-More curves as CSV (method,beta,p).
    #[arg(long)]
    profiles_out: PathBuf,
}

type CliResult<T> = std::result::Result<T, String>;

fn err<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> String + '_ {
    move |e| format!("{context}: {e}")
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(err(&format!("cannot create {}", parent.display())))?;
    }
    std::fs::write(path, contents).map_err(err(&format!("cannot write {}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(err("JSON encoding failed"))
}

fn load_train(path: &Path, label_column: Option<&str>) -> CliResult<Dataset> {
    let data = load_csv(path, label_column).map_err(err("cannot load training data"))?;
    if label_column.is_none() {
        return Ok(data.into_data());
    }
    let keep: Vec<usize> = data
        .labels()
        .iter()
        .enumerate()
        .filter_map(|(i, &l)| (l == Label::Normal).then_some(i))
        .collect();
    if keep.is_empty() {
        return Err(format!("{}: no rows labelled +1", path.display()));
    }
    data.data()
        .subset(data.data().name().to_owned(), &keep)
        .map_err(err("cannot load training data"))
}

#[derive(Serialize)]
struct GridEcho {
    spec: String,
    min: f64,
    max: f64,
    steps: usize,
}

fn resolve_grid(spec: &str, auto_steps: usize, train: &Dataset) -> CliResult<(GammaGrid, GridEcho)> {
    let grid = if spec == "auto" {
        let (lo, hi) = auto_bounds(train).map_err(err("auto grid"))?;
        GammaGrid::log_spaced(lo, hi, auto_steps)
    } else {
        let parts: Vec<&str> = spec.split(':').collect();
        let [min, max, steps] = parts.as_slice() else {
            return Err(format!("invalid --grid '{spec}': expected auto or MIN:MAX:STEPS"));
        };
        let parse = |s: &str| s.parse::<f64>().map_err(|_| format!("invalid --grid '{spec}': '{s}' is not a number"));
        let steps = steps
            .parse::<usize>()
            .map_err(|_| format!("invalid --grid '{spec}': '{steps}' is not a step count"))?;
        GammaGrid::log_spaced(parse(min)?, parse(max)?, steps)
    }
    .map_err(err("invalid grid"))?;
    let echo = GridEcho {
        spec: spec.to_owned(),
        min: grid.values()[0],
        max: *grid.values().last().expect("grid has >= 2 values"),
        steps: grid.len(),
    };
    Ok((grid, echo))
}

fn generate(args: &GenerateArgs) -> CliResult<()> {
    let law = match args.scenario {
        Scenario::Uniform => AnomalyLaw::Uniform,
        Scenario::Gaussian => AnomalyLaw::Gaussian { std: args.anomaly_std },
    };
    let scenario = MixtureScenario::generate(args.seed, args.n_train, args.n_anomalies, args.n_validation, law)
        .map_err(err("generation failed"))?;
    std::fs::create_dir_all(&args.out_dir).map_err(err(&format!("cannot create {}", args.out_dir.display())))?;
    let out = |name: &str| args.out_dir.join(name);
    write_csv(out("train.csv"), &scenario.train).map_err(err("write failed"))?;
    let anomalies = bandsel::LabeledDataset::new(
        scenario.anomalies.clone(),
        vec![Label::Anomaly; scenario.anomalies.len()],
    )
    .map_err(err("write failed"))?;
    write_labeled_csv(out("anomalies.csv"), &anomalies).map_err(err("write failed"))?;
    write_labeled_csv(out("validation.csv"), &scenario.validation).map_err(err("write failed"))?;

    #[derive(Serialize)]
    struct Manifest<'a> {
        command: &'static str,
        scenario: Scenario,
        seed: u64,
        n_train: usize,
        n_anomalies: usize,
        n_validation: usize,
        anomaly_law: AnomalyLaw,
        dim: usize,
        files: [&'a str; 3],
    }
    let manifest = Manifest {
        command: "generate",
        scenario: args.scenario,
        seed: args.seed,
        n_train: args.n_train,
        n_anomalies: args.n_anomalies,
        n_validation: args.n_validation,
        anomaly_law: law,
        dim: scenario.train.dim(),
        files: ["train.csv", "anomalies.csv", "validation.csv"],
    };
    write_file(&out("manifest.json"), &to_json(&manifest)?)
}

fn sweep(args: &SweepArgs) -> CliResult<()> {
    let kind: CurveKind = args.risk.parse().map_err(err("invalid --risk"))?;
    let config = args.svdd.config().map_err(err("invalid SVDD parameters"))?;
    let settings = args.risk_args.settings().map_err(err("invalid risk parameters"))?;
    let train = load_train(&args.train, args.label_column.as_deref())?;
    let (grid, grid_echo) = resolve_grid(&args.grid, args.grid_steps, &train)?;
    let curve = match kind {
        CurveKind::Risk(risk) => sweep_risk_curve(&train, &grid, &config, risk, &settings, args.seed),
        CurveKind::Validation => {
            let path = args
                .validation
                .as_ref()
                .ok_or("--risk validation requires --validation")?;
            let validation =
                load_csv(path, Some(&args.validation_label_column)).map_err(err("cannot load validation data"))?;
            validation_curve(&train, &validation, &grid, &config, args.seed)
        }
    }
    .map_err(err("sweep failed"))?;
    write_file(&args.out, &curve.to_csv())?;

    #[derive(Serialize)]
    struct SweepEcho<'a> {
        command: &'static str,
        train: &'a Path,
        label_column: Option<&'a str>,
        validation: Option<&'a Path>,
        kind: CurveKind,
        grid: GridEcho,
        seed: u64,
        svdd: SvddConfig,
        risk: RiskSettings,
        resolved_mc_count: usize,
        solver_fits: usize,
    }
    let echo = SweepEcho {
        command: "sweep",
        train: &args.train,
        label_column: args.label_column.as_deref(),
        validation: args.validation.as_deref(),
        kind,
        grid: grid_echo,
        seed: args.seed,
        svdd: config,
        risk: settings,
        resolved_mc_count: settings.mc_count_for(train.len()),
        solver_fits: curve.solver_fits,
    };
    let mut meta = args.out.clone().into_os_string();
    meta.push(".json");
    write_file(Path::new(&meta), &to_json(&echo)?)
}

fn select(args: &SelectArgs) -> CliResult<()> {
    let curve = RiskCurve::load_csv(&args.curve).map_err(err("cannot load curve"))?;
    let rule = match &args.rule {
        Some(r) => r.parse::<SelectionRule>().map_err(err("invalid --rule"))?,
        None => match curve.kind {
            CurveKind::Risk(k) => PlateauSpec::default_for(k).rule,
            CurveKind::Validation => SelectionRule::Argmin,
        },
    };
    let spec = PlateauSpec::new(args.rel_tol, rule).map_err(err("invalid --rel-tol"))?;
    let sel = select_gamma(&curve, &spec).map_err(err("selection failed"))?;

    #[derive(Serialize)]
    struct Plateau {
        start: usize,
        end: usize,
        gamma_lo: f64,
        gamma_hi: f64,
    }
    #[derive(Serialize)]
    struct SelectOut<'a> {
        command: &'static str,
        curve: &'a Path,
        kind: CurveKind,
        nu: f64,
        rule: SelectionRule,
        rel_tol: f64,
        gamma: f64,
        index: usize,
        plateau: Plateau,
    }
    let out = SelectOut {
        command: "select",
        curve: &args.curve,
        kind: curve.kind,
        nu: curve.nu,
        rule,
        rel_tol: spec.rel_tol,
        gamma: sel.gamma,
        index: sel.index,
        plateau: Plateau {
            start: sel.plateau_start,
            end: sel.plateau_end,
            gamma_lo: curve.points[sel.plateau_start].gamma,
            gamma_hi: curve.points[sel.plateau_end].gamma,
        },
    };
    let json = to_json(&out)?;
    print!("{json}");
    if let Some(path) = &args.out {
        write_file(path, &json)?;
    }
    Ok(())
}

fn fit_cmd(args: &FitArgs) -> CliResult<()> {
    let config = args.svdd.config().map_err(err("invalid SVDD parameters"))?;
    let gamma = Bandwidth::new(args.gamma).map_err(err("invalid --gamma"))?;
    let train = load_train(&args.train, args.label_column.as_deref())?;
    let model = fit(&train, gamma, &config, args.seed).map_err(err("fit failed"))?;

    #[derive(Serialize)]
    struct FitEcho<'a> {
        command: &'static str,
        train: &'a Path,
        label_column: Option<&'a str>,
        seed: u64,
        svdd: SvddConfig,
        iterations: usize,
        kkt_violation: f64,
    }
    #[derive(Serialize)]
    struct FitOut<'a> {
        #[serde(flatten)]
        model: ModelFile,
        run: FitEcho<'a>,
    }
    let out = FitOut {
        model: ModelFile::from(&model),
        run: FitEcho {
            command: "fit",
            train: &args.train,
            label_column: args.label_column.as_deref(),
            seed: args.seed,
            svdd: config,
            iterations: model.iterations(),
            kkt_violation: model.kkt_violation(),
        },
    };
    write_file(&args.out, &to_json(&out)?)
}

fn parse_method(text: &str, rel_tol: f64) -> CliResult<Method> {
    let (kind, rule) = match text.split_once(':') {
        Some((k, r)) => (k, Some(r)),
        None => (text, None),
    };
    let kind: RiskKind = kind.trim().parse().map_err(err("invalid --methods"))?;
    let rule = match rule {
        Some(r) => r.trim().parse().map_err(err("invalid --methods"))?,
        None => PlateauSpec::default_for(kind).rule,
    };
    Ok(Method {
        kind,
        plateau: PlateauSpec::new(rel_tol, rule).map_err(err("invalid --rel-tol"))?,
    })
}

fn benchmark(args: &BenchmarkArgs) -> CliResult<()> {
    let svdd = args.svdd.config().map_err(err("invalid SVDD parameters"))?;
    let risk = args.risk_args.settings().map_err(err("invalid risk parameters"))?;
    let methods = if args.methods.is_empty() {
        RiskKind::ALL
            .iter()
            .map(|&k| parse_method(k.as_str(), args.rel_tol))
            .collect::<CliResult<Vec<_>>>()?
    } else {
        args.methods
            .iter()
            .map(|m| parse_method(m, args.rel_tol))
            .collect::<CliResult<Vec<_>>>()?
    };
    if args.grid_steps < 2 {
        return Err("--grid-steps must be >= 2".into());
    }
    let corpus = CorpusSpec {
        label_column: args.label_column.clone(),
        anomaly_fractions: args.fractions.clone(),
        box_factor: args.risk_args.box_factor,
        val_fraction: args.val_fraction,
        seed: args.seed,
    };
    let tasks = corpus_tasks(&args.corpus, &corpus).map_err(err("cannot build corpus tasks"))?;
    let config = BenchmarkConfig {
        grid: GridSpec::Auto { steps: args.grid_steps },
        svdd,
        risk,
        seed: args.seed,
        beta_grid: default_beta_grid(),
        record_timings: args.timings,
    };
    let report = run_benchmark(&tasks, &methods, &config).map_err(err("benchmark failed"))?;

    #[derive(Serialize)]
    struct ReportOut<'a> {
        command: &'static str,
        corpus_dir: &'a Path,
        corpus: &'a CorpusSpec,
        tasks: usize,
        #[serde(flatten)]
        report: &'a BenchmarkReport,
    }
    let out = ReportOut {
        command: "benchmark",
        corpus_dir: &args.corpus,
        corpus: &corpus,
        tasks: tasks.len(),
        report: &report,
    };
    write_file(&args.out, &to_json(&out)?)?;
    write_file(&args.profiles_out, &curves_to_csv(&report.curves))?;
    for (method, q) in report.mean_quality() {
        eprintln!("{method:<28} mean quality {q:.4}");
    }
    if !report.failures.is_empty() {
        eprintln!("{} (task, method) pairs failed; see the report", report.failures.len());
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    if cli.jobs == 0 {
        return Err("--jobs must be >= 1".into());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(err("cannot start worker pool"))?;
    pool.install(|| match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Sweep(a) => sweep(a),
        Command::Select(a) => select(a),
        Command::Fit(a) => fit_cmd(a),
        Command::Benchmark(a) => benchmark(a),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
