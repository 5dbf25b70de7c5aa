//! The `regperc` command line: subcommands, config files and CSV/SVG outputs.
//!
//! Every random choice is derived from a master `--seed`. Task `i` of a
//! subcommand (graph realization, ball sample batch) gets the seed
//! `splitmix64(master ^ splitmix64(i))`, so results do not depend on how
//! tasks are scheduled across workers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::format::g17;
use crate::gaussian_wave::{sample_ball, WaveError, WaveModel};
use crate::graph::{generate_regular_with, GenerateOptions, Generator, Graph, GraphError};
use crate::level_sets::{
    critical_curve_experiment, steepest_point, sweep_ratio_curve, CriticalCurve, ExperimentParams, LevelSetError,
    RatioCurve, DEFAULT_WINDOW,
};
use crate::percolation::{model_curve, CriticalOptions, ModelPoint, OperatorOptions, PercolationError};
use crate::plot::{render_csv, render_svg, PlotError, PlotSpec, Series};
use crate::spectral::{eigendecompose, nearest_eigenpair, EigenPair, SpectralError, SpectrumSupport};

pub const WORKERS_ENV: &str = "REGPERC_WORKERS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown command '{0}'")]
    UnknownCommand(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 2,
            _ => 1,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::RejectionLimit { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::TooLarge { .. } | SpectralError::DegreeTooSmall { .. } => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<WaveError> for CliError {
    fn from(e: WaveError) -> Self {
        match e {
            WaveError::NotPsd(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<PercolationError> for CliError {
    fn from(e: PercolationError) -> Self {
        match e {
            PercolationError::InvalidParameter(_) => CliError::Validation(e.to_string()),
            PercolationError::Wave(w) => w.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<LevelSetError> for CliError {
    fn from(e: LevelSetError) -> Self {
        match e {
            LevelSetError::Graph(g) => g.into(),
            LevelSetError::Spectral(s) => s.into(),
            LevelSetError::NoTransition { .. } | LevelSetError::TooFewPoints { .. } => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<PlotError> for CliError {
    fn from(e: PlotError) -> Self {
        CliError::Validation(e.to_string())
    }
}

/// Flag values read from a `key=value` file. Keys are long flag names
/// without the leading dashes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExperimentConfig {
    pub entries: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Validation(format!("config line {}: expected key=value", lineno + 1)))?;
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
                return Err(CliError::Validation(format!("config line {}: bad key '{key}'", lineno + 1)));
            }
            entries.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn to_file_string(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn to_args(&self) -> Vec<String> {
        self.entries.iter().map(|(k, v)| format!("--{k}={v}")).collect()
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "regperc",
    version,
    about = "Level-set percolation of eigenvectors on random regular graphs",
    after_help = "Seeding: task i of a run uses splitmix64(seed ^ splitmix64(i)); outputs are identical for any worker count.\n\
                  Worker count: --workers, then REGPERC_WORKERS, then a workers= config entry, then all cores.\n\
                  Config: --config FILE with key=value lines naming long flags; flags on the command line win."
)]
struct Cli {
    /// Plain-text key=value file supplying flags for the subcommand
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a random d-regular graph and write it as JSON
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Generate {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Adjacency spectrum, optionally with selected eigenvectors
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Spectrum {
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated eigenvector indices (ascending-λ order) to export
        #[arg(long, value_delimiter = ',')]
        vectors: Vec<usize>,
        /// Directory for vector_<index>.csv files
        #[arg(long)]
        vector_dir: Option<PathBuf>,
    },
    /// Ratio curve of one eigenvector and its steepest point
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Sweep {
        #[command(flatten)]
        graph: GraphArgs,
        /// Eigenvector index in ascending-λ order
        #[arg(long, conflicts_with = "lambda")]
        index: Option<usize>,
        /// Use the eigenvector whose eigenvalue is nearest this value
        #[arg(long)]
        lambda: Option<f64>,
        /// Sweep -f instead of f
        #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
        negate: bool,
        #[arg(long, default_value_t = DEFAULT_WINDOW)]
        smoothing_window: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Empirical critical curve: steepest points binned by eigenvalue
    #[command(name = "critical-curve", args_override_self = true, allow_negative_numbers = true)]
    CriticalCurve {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Covariance phi(k) of the Gaussian wave process
    #[command(name = "model-phi", args_override_self = true, allow_negative_numbers = true)]
    ModelPhi {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 10)]
        kmax: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Critical level of the tree model over a λ grid
    #[command(name = "model-critical", args_override_self = true, allow_negative_numbers = true)]
    ModelCritical {
        #[arg(long)]
        d: usize,
        /// Comma-separated λ values; default is the multiples of --lambda-step inside the spectrum
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lambdas: Vec<f64>,
        #[arg(long, default_value_t = 0.2)]
        lambda_step: f64,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact samples of the wave process on a tree ball
    #[command(name = "sample-wave", args_override_self = true, allow_negative_numbers = true)]
    SampleWave {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 4)]
        radius: usize,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Empirical and model critical curves with an overlay plot
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Fig5 {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Render CSV columns as an SVG line plot
    #[command(args_override_self = true, allow_negative_numbers = true)]
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        group: Option<String>,
        #[arg(long)]
        x_label: Option<String>,
        #[arg(long)]
        y_label: Option<String>,
        #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
        staircase: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct GraphArgs {
    /// Read the graph from a JSON file instead of sampling one
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// pairing or steger-wormald
    #[arg(long, default_value = "pairing")]
    generator: String,
    #[arg(long)]
    max_restarts: Option<u64>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    realizations: usize,
    #[arg(long, default_value_t = 16)]
    lambda_bins: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    smoothing_window: usize,
    #[arg(long, default_value = "pairing")]
    generator: String,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 128)]
    quad_nodes: usize,
    #[arg(long, default_value_t = 8.0)]
    truncation: f64,
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    match run_inner(&argv) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(Exit::Clap(e)) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            code
        }
        Err(Exit::Cli(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

enum Exit {
    Clap(clap::Error),
    Cli(CliError),
}

impl From<CliError> for Exit {
    fn from(e: CliError) -> Self {
        Exit::Cli(e)
    }
}

const SUBCOMMANDS: [&str; 9] =
    ["generate", "spectrum", "sweep", "critical-curve", "model-phi", "model-critical", "sample-wave", "fig5", "plot"];

fn run_inner(argv: &[String]) -> Result<String, Exit> {
    let (argv, config_workers) = expand_config(argv)?;
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) if e.kind() == clap::error::ErrorKind::InvalidSubcommand => {
            let name = subcommand_position(&argv).map_or_else(String::new, |i| argv[i].clone());
            return Err(CliError::UnknownCommand(name).into());
        }
        Err(e) => return Err(Exit::Clap(e)),
    };
    let env = std::env::var(WORKERS_ENV).ok();
    let workers = resolve_workers(cli.workers, env.as_deref().or(config_workers.as_deref()))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| CliError::Validation(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| dispatch(cli.command))?)
}

/// Index of the subcommand token, skipping global flags and their values.
fn subcommand_position(argv: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let a = argv[i].as_str();
        if a == "--config" || a == "--workers" {
            i += 2;
        } else if a.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

/// Splices the flags of a `--config` file in right after the subcommand, so
/// that explicit flags, which come later, override them. A `workers` entry is
/// returned separately because the environment variable outranks it.
fn expand_config(argv: &[String]) -> Result<(Vec<String>, Option<String>), CliError> {
    let mut path = None;
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            path = argv.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let Some(path) = path else {
        return Ok((argv.to_vec(), None));
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(Path::new(&path), e))?;
    let mut config = ExperimentConfig::parse(&text)?;
    let workers = config.entries.remove("workers");
    let mut out = argv.to_vec();
    if let Some(pos) = subcommand_position(argv) {
        if SUBCOMMANDS.contains(&argv[pos].as_str()) {
            out.splice(pos + 1..pos + 1, config.to_args());
        }
    }
    Ok((out, workers))
}

/// `--workers` wins over `fallback` (the environment, then the config file);
/// neither means one worker per core.
pub fn resolve_workers(flag: Option<usize>, fallback: Option<&str>) -> Result<Option<usize>, CliError> {
    if let Some(w) = flag {
        if w == 0 {
            return Err(CliError::Validation("--workers must be positive".into()));
        }
        return Ok(Some(w));
    }
    match fallback.map(str::trim).filter(|s| !s.is_empty()) {
        None => Ok(None),
        Some(s) => match s.parse::<usize>() {
            Ok(w) if w > 0 => Ok(Some(w)),
            _ => Err(CliError::Validation(format!("{WORKERS_ENV} must be a positive integer, got '{s}'"))),
        },
    }
}

fn dispatch(command: Command) -> Result<String, CliError> {
    match command {
        Command::Generate { graph, out } => {
            let g = load_graph(&graph)?;
            let json = g.to_json();
            let summary = format!(
                "generated n={} d={} seed={} with {} restarts",
                g.n(),
                g.d(),
                g.provenance().seed,
                g.provenance().rejections
            );
            match out {
                Some(path) => write_atomic(&path, &(json + "\n"))?,
                None => println!("{json}"),
            }
            Ok(summary)
        }
        Command::Spectrum { graph, out, vectors, vector_dir } => {
            let g = load_graph(&graph)?;
            let pairs = eigendecompose(&g)?;
            write_atomic(&out, &eigen_csv(&pairs))?;
            if !vectors.is_empty() {
                let dir = vector_dir.ok_or_else(|| CliError::Validation("--vectors needs --vector-dir".into()))?;
                std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
                for &i in &vectors {
                    let p = pairs.get(i).ok_or_else(|| {
                        CliError::Validation(format!("--vectors: index {i} out of range for n={}", g.n()))
                    })?;
                    write_atomic(&dir.join(format!("vector_{i}.csv")), &vector_csv(&p.vector))?;
                }
            }
            let max_res = pairs.iter().map(|p| p.residual).fold(0.0, f64::max);
            Ok(format!("wrote {} eigenvalues to {} (max residual {:e})", pairs.len(), out.display(), max_res))
        }
        Command::Sweep { graph, index, lambda, negate, smoothing_window, out } => {
            let g = load_graph(&graph)?;
            let pairs = eigendecompose(&g)?;
            let pair = match (index, lambda) {
                (Some(i), _) => pairs
                    .get(i)
                    .ok_or_else(|| CliError::Validation(format!("--index {i} out of range for n={}", g.n())))?,
                (None, Some(l)) => nearest_eigenpair(&pairs, l)?,
                (None, None) => return Err(CliError::Validation("sweep needs --index or --lambda".into())),
            };
            let f: Vec<f64> = if negate { pair.vector.iter().map(|x| -x).collect() } else { pair.vector.clone() };
            let curve = sweep_ratio_curve(&g, &f)?;
            write_atomic(&out, &curve_csv(&curve))?;
            let est = steepest_point(&curve, smoothing_window)?;
            Ok(format!(
                "lambda={} alpha_c={} window=[{}, {}] ({} thresholds to {})",
                g17(pair.lambda),
                g17(est.alpha_c),
                g17(est.window.0),
                g17(est.window.1),
                curve.len(),
                out.display()
            ))
        }
        Command::CriticalCurve { exp, out } => {
            let params = experiment_params(&exp)?;
            let curve = critical_curve_experiment(&params)?;
            write_atomic(&out, &critical_curve_csv(&curve))?;
            Ok(format!(
                "wrote {} bins to {} (d={}, n={}, {} realizations, {} skipped)",
                curve.bins.len(),
                out.display(),
                params.d,
                params.n,
                params.realizations,
                curve.skipped
            ))
        }
        Command::ModelPhi { d, lambda, kmax, out } => {
            let model = WaveModel::new(lambda, d)?;
            let csv = phi_csv(&model.phi_sequence(kmax));
            match &out {
                Some(path) => write_atomic(path, &csv)?,
                None => print!("{csv}"),
            }
            Ok(format!("phi for lambda={} d={d}, k=0..{kmax}", g17(lambda)))
        }
        Command::ModelCritical { d, lambdas, lambda_step, model, out } => {
            let opts = critical_options(&model)?;
            let grid = if lambdas.is_empty() { lambda_grid(d, lambda_step)? } else { lambdas };
            let points = model_curve(d, &grid, &opts)?;
            write_atomic(&out, &model_critical_csv(&points))?;
            let worst = points.iter().map(|p| p.result.r_residual).fold(0.0, f64::max);
            Ok(format!("wrote {} critical levels to {} (max r residual {:e})", points.len(), out.display(), worst))
        }
        Command::SampleWave { d, lambda, radius, count, seed, out } => {
            let model = WaveModel::new(lambda, d)?;
            let batch = sample_ball(&model, radius, count, seed)?;
            let mut csv = format!("# d={d} lambda={} radius={radius} seed={seed}\n", g17(lambda));
            let header: Vec<String> = (0..batch.ball.len()).map(|v| format!("v{v}")).collect();
            csv.push_str(&header.join(","));
            csv.push('\n');
            for row in &batch.values {
                csv.push_str(&row.iter().map(|x| g17(*x)).collect::<Vec<_>>().join(","));
                csv.push('\n');
            }
            write_atomic(&out, &csv)?;
            Ok(format!(
                "wrote {count} samples on {} vertices to {} (interior residual {:e})",
                batch.ball.len(),
                out.display(),
                batch.interior_residual()
            ))
        }
        Command::Fig5 { exp, model, out_dir } => {
            let params = experiment_params(&exp)?;
            let opts = critical_options(&model)?;
            let curve = critical_curve_experiment(&params)?;
            let centers: Vec<f64> = curve.bins.iter().map(|b| b.lambda_center).collect();
            let points = model_curve(params.d, &centers, &opts)?;
            std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
            let d = params.d;
            let graph_path = out_dir.join(format!("fig5_graph_d{d}.csv"));
            let model_path = out_dir.join(format!("fig5_model_d{d}.csv"));
            let svg_path = out_dir.join(format!("fig5_d{d}.svg"));
            write_atomic(&graph_path, &critical_curve_csv(&curve))?;
            write_atomic(&model_path, &model_critical_csv(&points))?;
            let series = vec![
                Series {
                    label: format!("model d={d}"),
                    points: points.iter().map(|p| (p.lambda, p.result.alpha_c)).collect(),
                },
                Series {
                    label: format!("graphs n={}", params.n),
                    points: curve.bins.iter().map(|b| (b.lambda_center, b.alpha_c_mean)).collect(),
                },
            ];
            write_atomic(&svg_path, &render_svg(&series, "lambda", "alpha_c")?)?;
            Ok(format!("wrote {}, {} and {}", graph_path.display(), model_path.display(), svg_path.display()))
        }
        Command::Plot { input, x, y, group, x_label, y_label, staircase, out } => {
            let spec = PlotSpec {
                x_label: x_label.unwrap_or_else(|| x.clone()),
                y_label: y_label.unwrap_or_else(|| y.clone()),
                input,
                x,
                y,
                group,
                output: out,
                staircase,
            };
            plot_svg(&spec)?;
            Ok(format!("wrote {}", spec.output.display()))
        }
    }
}

pub fn plot_svg(spec: &PlotSpec) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&spec.input).map_err(|e| CliError::io(&spec.input, e))?;
    write_atomic(&spec.output, &render_csv(&text, spec)?)
}

fn parse_generator(name: &str) -> Result<Generator, CliError> {
    Generator::parse(name).ok_or_else(|| CliError::Validation(format!("--generator: unknown generator '{name}'")))
}

fn load_graph(args: &GraphArgs) -> Result<Graph, CliError> {
    if let Some(path) = &args.graph {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        return Ok(Graph::from_json(&text)?);
    }
    let opts = GenerateOptions { generator: parse_generator(&args.generator)?, max_restarts: args.max_restarts };
    Ok(generate_regular_with(args.n, args.d, args.seed, &opts)?)
}

fn experiment_params(args: &ExperimentArgs) -> Result<ExperimentParams, CliError> {
    for (flag, v) in [("--n", args.n), ("--realizations", args.realizations), ("--lambda-bins", args.lambda_bins)] {
        if v == 0 {
            return Err(CliError::Validation(format!("{flag} must be positive")));
        }
    }
    if args.smoothing_window.is_multiple_of(2) {
        return Err(CliError::Validation(format!("--smoothing-window must be odd, got {}", args.smoothing_window)));
    }
    let mut params = ExperimentParams::new(args.d, args.n, args.realizations, args.lambda_bins, args.seed);
    params.smoothing_window = args.smoothing_window;
    params.generate.generator = parse_generator(&args.generator)?;
    Ok(params)
}

fn critical_options(args: &ModelArgs) -> Result<CriticalOptions, CliError> {
    if !(args.tol > 0.0 && args.tol.is_finite()) {
        return Err(CliError::Validation(format!("--tol must be positive, got {}", args.tol)));
    }
    let operator = OperatorOptions { quad_nodes: args.quad_nodes, truncation: args.truncation };
    operator.validate().map_err(|e| CliError::Validation(format!("--quad-nodes/--truncation: {e}")))?;
    Ok(CriticalOptions { tol: args.tol, operator })
}

/// Multiples of `step` strictly inside the tree spectrum.
fn lambda_grid(d: usize, step: f64) -> Result<Vec<f64>, CliError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(CliError::Validation(format!("--lambda-step must be positive, got {step}")));
    }
    if d < 3 {
        return Err(CliError::Validation(format!("--d: degree d={d} must be at least 3")));
    }
    let edge = SpectrumSupport::new(d).hi;
    let k = (edge / step + 1e-9).floor() as i64;
    Ok((-k..=k).map(|i| i as f64 * step).filter(|l| l.abs() < edge).collect())
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn eigen_csv(pairs: &[EigenPair]) -> String {
    let mut s = String::from("index,lambda,residual\n");
    for (i, p) in pairs.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{}", g17(p.lambda), g17(p.residual));
    }
    s
}

pub fn vector_csv(f: &[f64]) -> String {
    let mut s = String::from("vertex,value\n");
    for (v, x) in f.iter().enumerate() {
        let _ = writeln!(s, "{v},{}", g17(*x));
    }
    s
}

/// One row per distinct value of `f`, descending; counts hold just below it.
pub fn curve_csv(curve: &RatioCurve) -> String {
    let mut s = String::from("alpha,induced,max_component,ratio\n");
    for i in 0..curve.len() {
        let (ind, mx) = (curve.induced_sizes[i], curve.max_component_sizes[i]);
        let _ = writeln!(s, "{},{ind},{mx},{}", g17(curve.thresholds[i]), g17(mx as f64 / ind as f64));
    }
    s
}

pub fn critical_curve_csv(curve: &CriticalCurve) -> String {
    let mut s = String::from("d,lambda_bin,alpha_c_mean,alpha_c_stderr,count\n");
    for b in &curve.bins {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            curve.d,
            g17(b.lambda_center),
            g17(b.alpha_c_mean),
            g17(b.alpha_c_stderr),
            b.count
        );
    }
    s
}

pub fn phi_csv(phi: &[f64]) -> String {
    let mut s = String::from("k,phi\n");
    for (k, p) in phi.iter().enumerate() {
        let _ = writeln!(s, "{k},{}", g17(*p));
    }
    s
}

pub fn model_critical_csv(points: &[ModelPoint]) -> String {
    let mut s = String::from("d,lambda,alpha_c,r_residual,quad_nodes,truncation\n");
    for p in points {
        let r = &p.result;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.d,
            g17(p.lambda),
            g17(r.alpha_c),
            g17(r.r_residual),
            r.quad_nodes,
            g17(r.truncation)
        );
    }
    s
}
