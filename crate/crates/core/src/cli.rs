//! Command-line front end. Every subcommand writes one CSV table (to `--out`
//! or stdout); file outputs get a JSON manifest sidecar holding the resolved
//! flags, from which `--from-manifest` regenerates the same bytes.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::estimators::{roc_report, run_episode, EpisodeConfig, Mode};
use crate::experiments::fixtures::{self, FixtureSet, MATRIX_NAMES, PRIOR_NAMES};
use crate::experiments::stability::{ColumnRole, MatrixScheme, PriorScheme};
use crate::experiments::table::Cell;
use crate::experiments::{
    comparison_table, exact_tree_stats, matrix_perturbation_sweep, prior_perturbation_sweep, roc_comparison,
    short_run_stats, Manifest, MatrixSweepConfig, PriorSweepConfig, ShortRunConfig, Table,
};
use crate::gridworld::{self, Action, GridWorldConfig};
use crate::matrix::{MarginalSpec, PositiveMatrix};
use crate::measure::{StopRule, SuccessRateConfig, TreeOptions};
use crate::row;
use crate::simplex::ProbabilityVector;
use crate::sinkhorn::{sinkhorn_scale, SinkhornConfig};

#[derive(Debug, Parser)]
#[command(name = "scbi", version, about = "Sinkhorn-scaled cooperative inference and Bayesian inference experiments")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Plain-text key=value file of subcommand flags; explicit flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Rerun the subcommand recorded in a manifest.
    #[arg(long, global = true)]
    pub from_manifest: Option<PathBuf>,

    /// CSV output path; a `.manifest.json` sidecar is written next to it.
    /// Without it the table goes to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scale one matrix to the given row and column sums.
    Sinkhorn(SinkhornArgs),
    /// Run one teaching episode and print its trace.
    Episode(EpisodeArgs),
    /// Per-hypothesis rates of convergence of one matrix.
    Roc(RocArgs),
    /// Compare the two rates over random matrices.
    RocCompare(RocCompareArgs),
    /// Exact and sampled posterior moments over short runs.
    ShortRun(ShortRunArgs),
    /// Round-by-round statistics of the exact posterior distribution.
    ExactTree(ExactTreeArgs),
    /// Successful rate under perturbed learner priors.
    StabilityPrior(StabilityPriorArgs),
    /// Successful rate under a perturbed learner matrix column.
    StabilityMatrix(StabilityMatrixArgs),
    /// The two-goal grid world.
    Gridworld(GridworldArgs),
    /// List the built-in fixtures, or print one.
    Fixtures(FixturesArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sinkhorn(_) => "sinkhorn",
            Command::Episode(_) => "episode",
            Command::Roc(_) => "roc",
            Command::RocCompare(_) => "roc-compare",
            Command::ShortRun(_) => "short-run",
            Command::ExactTree(_) => "exact-tree",
            Command::StabilityPrior(_) => "stability-prior",
            Command::StabilityMatrix(_) => "stability-matrix",
            Command::Gridworld(_) => "gridworld",
            Command::Fixtures(_) => "fixtures",
        }
    }

    fn parameters(&self) -> Result<BTreeMap<String, String>> {
        match self {
            Command::Sinkhorn(a) => record(a),
            Command::Episode(a) => record(a),
            Command::Roc(a) => record(a),
            Command::RocCompare(a) => record(a),
            Command::ShortRun(a) => record(a),
            Command::ExactTree(a) => record(a),
            Command::StabilityPrior(a) => record(a),
            Command::StabilityMatrix(a) => record(a),
            Command::Gridworld(a) => record(a),
            Command::Fixtures(a) => record(a),
        }
    }
}

/// Where a matrix comes from.
#[derive(Debug, Clone, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct MatrixSource {
    /// Matrix file: comma-separated rows, one per line, no header.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Built-in fixture (see `fixtures`).
    #[arg(long)]
    pub fixture: Option<String>,
}

impl MatrixSource {
    fn load(&self) -> Result<PositiveMatrix> {
        match (&self.matrix, &self.fixture) {
            (Some(path), _) => PositiveMatrix::read_csv(path),
            (None, Some(name)) => fixtures::matrix(name),
            (None, None) => Err(Error::InvalidConfig("no matrix given".into())),
        }
    }

    fn label(&self) -> String {
        match (&self.matrix, &self.fixture) {
            (Some(path), _) => path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()),
            (None, Some(name)) => name.clone(),
            (None, None) => String::new(),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SinkhornArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: MatrixSource,
    /// Row sums (default: all ones).
    #[arg(long, value_delimiter = ',', action = clap::ArgAction::Set, num_args = 1)]
    pub rows: Option<Vec<f64>>,
    /// Column sums (default: rows/cols each).
    #[arg(long, value_delimiter = ',', action = clap::ArgAction::Set, num_args = 1)]
    pub cols: Option<Vec<f64>>,
    #[arg(long, default_value = "1e-12")]
    pub tolerance: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iterations: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct EpisodeArgs {
    #[arg(long, value_enum, default_value_t = Mode::Scbi)]
    pub mode: Mode,
    #[command(flatten)]
    #[serde(flatten)]
    pub source: MatrixSource,
    /// Learner matrix file, if it differs from the teacher's.
    #[arg(long, conflicts_with = "learner_fixture")]
    pub learner_matrix: Option<PathBuf>,
    #[arg(long)]
    pub learner_fixture: Option<String>,
    /// Prior: comma-separated weights or a fixture name (default: uniform).
    #[arg(long)]
    pub prior: Option<String>,
    /// Learner prior, if it differs from the teacher's.
    #[arg(long)]
    pub learner_prior: Option<String>,
    /// True hypothesis, counted from 1.
    #[arg(long, default_value_t = 1)]
    pub h: usize,
    #[arg(long, default_value_t = 100)]
    pub rounds: usize,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct RocArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: MatrixSource,
}

/// A matrix shape written `ROWSxCOLS`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
}

impl FromStr for Shape {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (r, c) = s.split_once(['x', 'X']).ok_or_else(|| format!("shape {s:?} is not ROWSxCOLS"))?;
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("shape {s:?}: {e}"));
        Ok(Shape { rows: parse(r)?, cols: parse(c)? })
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

impl Serialize for Shape {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct RocCompareArgs {
    /// One or more shapes, e.g. `10x2,10x10`.
    #[arg(long, value_delimiter = ',', action = clap::ArgAction::Set, num_args = 1, required = true)]
    pub shape: Vec<Shape>,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ShortRunArgs {
    #[arg(long, default_value_t = 10)]
    pub rows: usize,
    #[arg(long, default_value_t = 10)]
    pub cols: usize,
    #[arg(long, default_value_t = 30)]
    pub matrices: usize,
    #[arg(long, default_value_t = 4)]
    pub exact_rounds: usize,
    #[arg(long, default_value_t = 30)]
    pub mc_rounds: usize,
    /// Episodes per matrix for the sampled columns; 0 skips them.
    #[arg(long, default_value_t = 0)]
    pub mc_episodes: usize,
    /// Target hypothesis, counted from 1.
    #[arg(long, default_value_t = 1)]
    pub h: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000_000)]
    pub atom_cap: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ExactTreeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: MatrixSource,
    /// Comma-separated weights or a fixture name (default: uniform).
    #[arg(long)]
    pub prior: Option<String>,
    /// Target hypothesis, counted from 1.
    #[arg(long, default_value_t = 1)]
    pub h: usize,
    #[arg(long, default_value_t = 3)]
    pub rounds: usize,
    #[arg(long, default_value_t = 10_000_000)]
    pub atom_cap: u64,
    /// Merge atoms closer than this after every round.
    #[arg(long)]
    pub merge_tolerance: Option<f64>,
}

/// Options shared by the two stability sweeps.
#[derive(Debug, Clone, Args, Serialize)]
pub struct RateArgs {
    /// Episodes per sweep point.
    #[arg(long, default_value_t = 1000)]
    pub episodes: usize,
    /// Teacher stops when its log-odds on the target reach this.
    #[arg(long, default_value_t = 40.0)]
    pub stop_log_odds: f64,
    #[arg(long, default_value_t = 3000)]
    pub k_max: usize,
    #[arg(long)]
    pub seed: u64,
}

impl RateArgs {
    fn config(&self) -> SuccessRateConfig {
        SuccessRateConfig { episodes: self.episodes, stop: StopRule::LogOdds(self.stop_log_odds), k_max: self.k_max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PriorSchemeKind {
    Rays,
    Circles,
    Uniform,
}

#[derive(Debug, Args, Serialize)]
pub struct StabilityPriorArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: MatrixSource,
    /// Teacher prior: weights or a fixture name (default: uniform).
    #[arg(long)]
    pub prior: Option<String>,
    /// Target hypothesis, counted from 1.
    #[arg(long, default_value_t = 1)]
    pub h: usize,
    #[arg(long, value_enum, default_value_t = PriorSchemeKind::Rays)]
    pub scheme: PriorSchemeKind,
    /// Rays: number of directions (default 6 for three hypotheses, else 15).
    #[arg(long)]
    pub directions: Option<usize>,
    /// Rays: radii (default 0.005 steps to 0.07, or to 0.1 above three hypotheses).
    #[arg(long, value_delimiter = ',', action = clap::ArgAction::Set, num_args = 1)]
    pub radii: Option<Vec<f64>>,
    /// Circles: number of layers.
    #[arg(long, default_value_t = 14)]
    pub layers: usize,
    /// Circles: radius step.
    #[arg(long, default_value_t = 0.005)]
    pub spacing: f64,
    /// Uniform: number of priors.
    #[arg(long, default_value_t = 300)]
    pub points: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub rate: RateArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixSchemeKind {
    Disc,
    EquiKl,
    Interpolation,
}

#[derive(Debug, Args, Serialize)]
pub struct StabilityMatrixArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub source: MatrixSource,
    /// Shared prior: weights or a fixture name (default: uniform).
    #[arg(long)]
    pub prior: Option<String>,
    /// Target hypothesis, counted from 1.
    #[arg(long, default_value_t = 1)]
    pub h: usize,
    #[arg(long, value_enum, default_value_t = ColumnRole::Relevant)]
    pub role: ColumnRole,
    #[arg(long, value_enum, default_value_t = MatrixSchemeKind::Disc)]
    pub scheme: MatrixSchemeKind,
    /// Disc: number of layers.
    #[arg(long, default_value_t = 10)]
    pub layers: usize,
    /// Disc: radius step.
    #[arg(long, default_value_t = 0.005)]
    pub spacing: f64,
    /// Equal-KL: number of rays.
    #[arg(long, default_value_t = 90)]
    pub rays: usize,
    /// Interpolation: number of points.
    #[arg(long, default_value_t = 50)]
    pub points: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub rate: RateArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GridExperiment {
    /// Posteriors along a fixed trajectory.
    Comparison,
    /// Learner with a mismatched discount.
    Mismatch,
}

#[derive(Debug, Args, Serialize)]
pub struct GridworldArgs {
    #[arg(long, value_enum, default_value_t = GridExperiment::Comparison)]
    pub experiment: GridExperiment,
    #[arg(long, default_value_t = 0.9)]
    pub gamma: f64,
    /// Mismatch: the learner's discount is off by ± this much.
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub offset: f64,
    /// Comparison: actions from the start cell.
    #[arg(long, value_enum, value_delimiter = ',', action = clap::ArgAction::Set, num_args = 1,
          default_value = "left,up")]
    pub trajectory: Vec<Action>,
    /// Mismatch: trajectory length.
    #[arg(long, default_value_t = 2)]
    pub rounds: usize,
    /// Mismatch: number of episodes.
    #[arg(long, default_value_t = 10_000)]
    pub episodes: usize,
    /// Required for the mismatch experiment.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct FixturesArgs {
    /// Print this fixture instead of listing them all.
    #[arg(long)]
    pub name: Option<String>,
}

/// Flatten a subcommand's resolved arguments to `arg id → value`. Absent
/// options and unset switches are omitted; lists are comma-joined.
fn record<T: Serialize>(args: &T) -> Result<BTreeMap<String, String>> {
    let value = serde_json::to_value(args).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let object = value
        .as_object()
        .ok_or_else(|| Error::InvalidConfig("arguments did not serialize to an object".into()))?;
    let mut out = BTreeMap::new();
    for (key, v) in object {
        let text = match v {
            serde_json::Value::Null | serde_json::Value::Bool(false) => continue,
            serde_json::Value::String(s) => s.clone(),
            serde_json::Value::Array(items) => items
                .iter()
                .map(|i| i.as_str().map_or_else(|| i.to_string(), str::to_string))
                .collect::<Vec<_>>()
                .join(","),
            other => other.to_string(),
        };
        out.insert(key.clone(), text);
    }
    Ok(out)
}

fn command_with_overrides() -> clap::Command {
    Cli::command().mut_subcommands(|s| s.args_override_self(true))
}

/// Turn `arg id → value` pairs into `--flag=value` tokens for `sub`.
fn flag_tokens(sub: &str, params: &BTreeMap<String, String>) -> Result<Vec<String>> {
    let cmd = Cli::command();
    let sc = cmd
        .find_subcommand(sub)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown subcommand {sub:?}")))?;
    let mut tokens = Vec::new();
    for (key, value) in params {
        let id = key.trim().replace('-', "_");
        let arg = sc
            .get_arguments()
            .find(|a| a.get_id().as_str() == id)
            .ok_or_else(|| Error::InvalidConfig(format!("{sub} has no option {key:?}")))?;
        let long = arg
            .get_long()
            .ok_or_else(|| Error::InvalidConfig(format!("option {key:?} has no long form")))?;
        if arg.get_action().takes_values() {
            tokens.push(format!("--{long}={}", value.trim()));
        } else if value.trim().parse::<bool>().map_err(|_| Error::Parse(format!("{key}: expected true or false")))? {
            tokens.push(format!("--{long}"));
        }
    }
    Ok(tokens)
}

/// `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("config line {}: expected key=value", n + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Value of a global option in raw argv, before clap sees it.
fn scan_option(argv: &[String], name: &str) -> Option<String> {
    let flag = format!("--{name}");
    let prefix = format!("--{name}=");
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == &flag {
            return it.next().cloned();
        }
        if let Some(v) = a.strip_prefix(&prefix) {
            return Some(v.to_string());
        }
    }
    None
}

enum Failure {
    Usage(clap::Error),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

/// Resolve argv, expanding `--config` and `--from-manifest`.
fn resolve(argv: Vec<String>) -> std::result::Result<Cli, Failure> {
    let mut argv = argv;
    if let Some(path) = scan_option(&argv, "from-manifest") {
        let manifest = Manifest::read(Path::new(&path))?;
        let mut rebuilt = vec![argv.first().cloned().unwrap_or_else(|| "scbi".into())];
        rebuilt.push(manifest.driver.clone());
        rebuilt.extend(flag_tokens(&manifest.driver, &manifest.parameters)?);
        // keep global options from the command line, dropping the manifest flag
        let mut rest = argv.iter().skip(1);
        while let Some(a) = rest.next() {
            match a.as_str() {
                "--from-manifest" => {
                    rest.next();
                }
                "--threads" | "--out" => {
                    rebuilt.push(a.clone());
                    rebuilt.extend(rest.next().cloned());
                }
                s if s.starts_with("--threads=") || s.starts_with("--out=") => rebuilt.push(a.clone()),
                s if s.starts_with("--from-manifest=") => {}
                _ => {
                    return Err(Failure::Domain(Error::InvalidConfig(format!(
                        "{a:?} cannot be combined with --from-manifest"
                    ))))
                }
            }
        }
        let mut cli = parse(rebuilt)?;
        if cli.out.is_none() {
            cli.out = manifest.outputs.first().cloned();
        }
        return Ok(cli);
    }
    if let Some(path) = scan_option(&argv, "config") {
        let params = parse_config_file(&read_text(Path::new(&path))?)?;
        let cmd = Cli::command();
        let position = argv
            .iter()
            .position(|a| cmd.find_subcommand(a).is_some())
            .ok_or_else(|| Error::InvalidConfig("--config needs a subcommand".into()))?;
        let tokens = flag_tokens(&argv[position], &params)?;
        argv.splice(position + 1..position + 1, tokens);
    }
    parse(argv)
}

fn parse(argv: Vec<String>) -> std::result::Result<Cli, Failure> {
    let matches = command_with_overrides().try_get_matches_from(argv).map_err(Failure::Usage)?;
    Cli::from_arg_matches(&matches).map_err(Failure::Usage)
}

/// Run the CLI on `argv` (including the program name); returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<String> = argv.into_iter().map(|a| a.into().to_string_lossy().into_owned()).collect();
    let cli = match resolve(argv) {
        Ok(cli) => cli,
        Err(Failure::Usage(e)) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {}: {e}", e.name());
            return 1;
        }
    };
    let Some(command) = cli.command.as_ref() else {
        let _ = Cli::command().print_help();
        return 2;
    };
    let outcome = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))
            .and_then(|pool| pool.install(|| execute(command, cli.out.as_deref()))),
        None => execute(command, cli.out.as_deref()),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            1
        }
    }
}

fn execute(command: &Command, out: Option<&Path>) -> Result<()> {
    log::info!("running {}", command.name());
    let tables = match command {
        Command::Sinkhorn(a) => vec![sinkhorn(a)?],
        Command::Episode(a) => vec![episode(a)?],
        Command::Roc(a) => vec![roc(a)?],
        Command::RocCompare(a) => vec![roc_compare(a)?],
        Command::ShortRun(a) => vec![short_run(a)?],
        Command::ExactTree(a) => vec![exact_tree(a)?],
        Command::StabilityPrior(a) => stability_prior(a)?,
        Command::StabilityMatrix(a) => vec![stability_matrix(a)?],
        Command::Gridworld(a) => vec![grid(a)?],
        Command::Fixtures(a) => vec![fixture_table(a)?],
    };
    emit(command, &tables, out)
}

/// Write the tables: the first to `out`, later ones to `out` with a
/// `.extraN` suffix before the extension; or everything to stdout.
fn emit(command: &Command, tables: &[Table], out: Option<&Path>) -> Result<()> {
    let Some(out) = out else {
        for t in tables {
            print!("{}", t.to_csv()?);
        }
        return Ok(());
    };
    let parameters = command.parameters()?;
    let seed = parameters.get("seed").and_then(|s| s.parse().ok());
    let mut manifest = Manifest::new(command.name(), parameters, seed);
    for (i, t) in tables.iter().enumerate() {
        let path = if i == 0 { out.to_path_buf() } else { extra_path(out, i) };
        t.write_csv(&path)?;
        manifest.outputs.push(path);
    }
    manifest.write(&Manifest::sidecar_path(out))
}

fn extra_path(out: &Path, i: usize) -> PathBuf {
    let stem = out.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.extra{i}.csv"))
}

fn hypothesis(h: usize, m: usize) -> Result<usize> {
    if h == 0 || h > m {
        return Err(Error::IndexOutOfRange { index: h, len: m });
    }
    Ok(h - 1)
}

/// A prior given as comma-separated weights or a fixture name.
fn parse_prior(spec: Option<&str>, dim: usize) -> Result<ProbabilityVector> {
    let p = match spec {
        None => return Ok(ProbabilityVector::uniform(dim)),
        Some(s) if s.contains(',') => {
            let w = s
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("prior {s:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            ProbabilityVector::from_weights(&w)?
        }
        Some(s) => fixtures::prior(s)?,
    };
    if p.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: p.dim() });
    }
    Ok(p)
}

fn matrix_table(m: &PositiveMatrix) -> Table {
    let mut header = vec!["row".to_string()];
    header.extend((1..=m.cols()).map(|j| format!("h{j}")));
    let mut t = Table::new(&header);
    for i in 0..m.rows() {
        let mut r = row![i + 1];
        r.extend(m.row(i).iter().map(|&x| Cell::from(x)));
        t.push(r);
    }
    t
}

fn sinkhorn(a: &SinkhornArgs) -> Result<Table> {
    let m = a.source.load()?;
    let (n, k) = m.shape();
    let rows = a.rows.clone().unwrap_or_else(|| vec![1.0; n]);
    let cols = a.cols.clone().unwrap_or_else(|| vec![rows.iter().sum::<f64>() / k as f64; k]);
    let cfg = SinkhornConfig { tolerance: a.tolerance, max_iterations: a.max_iterations };
    let result = sinkhorn_scale(&m, &MarginalSpec::new(rows, cols)?, &cfg)?;
    log::info!("converged after {} iterations", result.iterations);
    Ok(matrix_table(&result.scaled))
}

fn episode(a: &EpisodeArgs) -> Result<Table> {
    let teacher = a.source.load()?;
    let learner = match (&a.learner_matrix, &a.learner_fixture) {
        (Some(p), _) => PositiveMatrix::read_csv(p)?,
        (None, Some(f)) => fixtures::matrix(f)?,
        (None, None) => teacher.clone(),
    };
    let m = teacher.cols();
    let teacher_prior = parse_prior(a.prior.as_deref(), m)?;
    let learner_prior = match &a.learner_prior {
        Some(s) => parse_prior(Some(s), m)?,
        None => teacher_prior.clone(),
    };
    let cfg = EpisodeConfig {
        teacher_matrix: teacher,
        learner_matrix: learner,
        teacher_prior,
        learner_prior,
        true_hypothesis: hypothesis(a.h, m)?,
        rounds: a.rounds,
        mode: a.mode,
        seed: a.seed,
    };
    let trace = run_episode(&cfg)?;
    let mut header = vec!["round".to_string(), "datum".to_string()];
    header.extend((1..=m).map(|j| format!("teacher_theta_{j}")));
    header.extend((1..=m).map(|j| format!("learner_theta_{j}")));
    header.extend(["teacher_log_odds".to_string(), "learner_log_odds".to_string()]);
    let mut t = Table::new(&header);
    for k in 0..=a.rounds {
        let mut r = row![k];
        r.push(if k == 0 { Cell::Text(String::new()) } else { Cell::from(trace.data[k - 1] + 1) });
        r.extend(trace.teacher_posteriors[k].as_slice().iter().map(|&x| Cell::from(x)));
        r.extend(trace.learner_posteriors[k].as_slice().iter().map(|&x| Cell::from(x)));
        r.extend(row![trace.teacher_log_odds[k], trace.learner_log_odds[k]]);
        t.push(r);
    }
    Ok(t)
}

fn roc(a: &RocArgs) -> Result<Table> {
    let report = roc_report(&a.source.load()?)?;
    let mut t = Table::new(&["hypothesis", "roc_bi", "bi_argmin", "roc_scbi", "relevant_column"]);
    for h in 0..report.per_hypothesis_bi.len() {
        t.push(row![
            h + 1,
            report.per_hypothesis_bi[h],
            report.bi_argmin[h] + 1,
            report.per_hypothesis_scbi[h],
            report.relevant_column[h] + 1,
        ]);
    }
    t.push(row!["mean", report.mean_bi(), "", report.mean_scbi(), ""]);
    Ok(t)
}

fn roc_compare(a: &RocCompareArgs) -> Result<Table> {
    let results = a
        .shape
        .iter()
        .map(|s| {
            log::info!("comparing {s} over {} samples", a.samples);
            roc_comparison(s.rows, s.cols, a.samples, a.seed)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(comparison_table(&results))
}

fn short_run(a: &ShortRunArgs) -> Result<Table> {
    let cfg = ShortRunConfig {
        rows: a.rows,
        cols: a.cols,
        matrices: a.matrices,
        exact_rounds: a.exact_rounds,
        mc_rounds: a.mc_rounds,
        mc_episodes: a.mc_episodes,
        hypothesis: hypothesis(a.h, a.cols)?,
        seed: a.seed,
        atom_cap: a.atom_cap.into(),
    };
    let result = short_run_stats(&cfg)?;
    log::info!("exact SCBI mean above BI on {:.3} of matrices", result.scbi_above_bi);
    Ok(result.to_table())
}

fn exact_tree(a: &ExactTreeArgs) -> Result<Table> {
    let m = a.source.load()?;
    let prior = parse_prior(a.prior.as_deref(), m.cols())?;
    let opts = TreeOptions { atom_cap: a.atom_cap.into(), merge_tolerance: a.merge_tolerance };
    exact_tree_stats(&m, hypothesis(a.h, m.cols())?, &prior, a.rounds, &opts)
}

fn stability_prior(a: &StabilityPriorArgs) -> Result<Vec<Table>> {
    let m = a.source.load()?;
    let dim = m.cols();
    let scheme = match a.scheme {
        PriorSchemeKind::Rays => {
            let PriorScheme::Rays { directions, radii } = PriorScheme::default_rays(dim) else {
                unreachable!("default_rays returns rays")
            };
            PriorScheme::Rays {
                directions: a.directions.unwrap_or(directions),
                radii: a.radii.clone().unwrap_or(radii),
            }
        }
        PriorSchemeKind::Circles => PriorScheme::Circles { layers: a.layers, spacing: a.spacing },
        PriorSchemeKind::Uniform => PriorScheme::Uniform { points: a.points },
    };
    let cfg = PriorSweepConfig {
        label: a.source.label(),
        teacher_prior: parse_prior(a.prior.as_deref(), dim)?,
        hypothesis: hypothesis(a.h, dim)?,
        matrix: m,
        scheme,
        rate: a.rate.config(),
        seed: a.rate.seed,
    };
    let result = prior_perturbation_sweep(&cfg)?;
    log::info!("{} bound violations over {} points", result.bound_violations(), result.points.len());
    Ok(vec![result.to_table(), result.fits_table()])
}

fn stability_matrix(a: &StabilityMatrixArgs) -> Result<Table> {
    let m = a.source.load()?;
    let dim = m.cols();
    let scheme = match a.scheme {
        MatrixSchemeKind::Disc => MatrixScheme::Disc { layers: a.layers, spacing: a.spacing },
        MatrixSchemeKind::EquiKl => MatrixScheme::EquiKl { rays: a.rays },
        MatrixSchemeKind::Interpolation => MatrixScheme::Interpolation { points: a.points },
    };
    let cfg = MatrixSweepConfig {
        label: a.source.label(),
        prior: parse_prior(a.prior.as_deref(), dim)?,
        hypothesis: hypothesis(a.h, dim)?,
        teacher: m,
        role: a.role,
        scheme,
        rate: a.rate.config(),
        seed: a.rate.seed,
    };
    let result = matrix_perturbation_sweep(&cfg)?;
    if let Some((lo, hi)) = result.gradient_range() {
        log::info!("directional gradients range over [{lo}, {hi}]");
    }
    Ok(result.to_table())
}

fn grid(a: &GridworldArgs) -> Result<Table> {
    let cfg = GridWorldConfig { gamma: a.gamma, learner_gamma_offset: a.offset, ..Default::default() };
    match a.experiment {
        GridExperiment::Comparison => {
            let rounds = gridworld::run_gridworld_comparison(&GridWorldConfig { learner_gamma_offset: 0.0, ..cfg }, &a.trajectory)?;
            Ok(gridworld::comparison_table(&rounds))
        }
        GridExperiment::Mismatch => {
            let seed = a
                .seed
                .ok_or_else(|| Error::InvalidConfig("the mismatch experiment needs --seed".into()))?;
            let rows = gridworld::gridworld_mismatch_experiment(&cfg, a.rounds, a.episodes, seed)?;
            Ok(gridworld::mismatch_table(&cfg, &rows))
        }
    }
}

fn fixture_table(a: &FixturesArgs) -> Result<Table> {
    match &a.name {
        None => {
            let mut t = Table::new(&["name", "kind", "rows", "cols"]);
            for name in MATRIX_NAMES {
                let m = fixtures::matrix(name)?;
                t.push(row![name, "matrix", m.rows(), m.cols()]);
            }
            for name in PRIOR_NAMES {
                t.push(row![name, "prior", 1usize, fixtures::prior(name)?.dim()]);
            }
            // the whole set loads without panicking
            let _ = FixtureSet::load();
            Ok(t)
        }
        Some(name) => match fixtures::matrix(name) {
            Ok(m) => Ok(matrix_table(&m)),
            Err(_) => {
                let p = fixtures::prior(name)?;
                let m = PositiveMatrix::from_rows(&[p.as_slice().to_vec()])?;
                Ok(matrix_table(&m))
            }
        },
    }
}
