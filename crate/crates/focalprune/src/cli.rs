//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for invalid flags or parameters, 2 when the
//! input data is missing, malformed or unsuitable.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use focalprune_core::diversity::score_teams;
use focalprune_core::evaluation::{brute_force_oracle, cost_reduction, prune_quality, Voter};
use focalprune_core::focal::{compute_focal_table, NegativeSampling};
use focalprune_core::pruning::{consensus_of, mean_threshold_prune, HierarchicalPruner};
use focalprune_core::simulation::{
    generate_synthetic, predicted_error_ratio, simulate_correlated_errors, spread_accuracies,
    CorrelatedErrorSpec, SyntheticSpec,
};
use focalprune_core::team::{enumerate_teams, SizeRange};
use focalprune_core::{
    Error, FocalContext, HqConfig, Metric, OracleTable, PredictionDataset, QualityScope,
    ScalingScope, Team, Voting,
};

use crate::io::{
    load_predictions, sha256_hex, to_canonical_csv, write_dataset, LoadError, LoadedDataset,
};
use crate::report::*;

#[derive(Debug, Parser)]
#[command(
    name = "focalprune",
    version,
    about = "Focal-diversity ensemble pruning over prediction logs"
)]
pub struct Cli {
    /// Worker threads for scoring (defaults to all cores).
    #[arg(long, global = true, env = "FOCALPRUNE_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a prediction file and report per-model accuracy.
    Ingest(IngestArgs),
    /// Score teams with baseline or focal metrics as `metric,team,fq,degenerate_flags`.
    Score(ScoreArgs),
    /// Hierarchical pruning with focal metrics plus quorum consensus.
    Prune(PruneArgs),
    /// Mean-threshold pruning with baseline metrics.
    PruneBaseline(BaselineArgs),
    /// Accuracy and pruning quality of a selection report.
    Evaluate(EvaluateArgs),
    /// Monte-Carlo check of the correlated-error averaging formula.
    Simulate(SimulateArgs),
    /// Write a synthetic prediction file.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Wide prediction CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Directory of per-model confidence CSVs.
    #[arg(long)]
    pub confidences: Option<PathBuf>,
    /// Class count, overriding inference and the file's directive.
    #[arg(long)]
    pub classes: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct FocalArgs {
    /// Population over which each focal group is min-max scaled.
    #[arg(long, value_enum, default_value_t = Scaling::Survivors)]
    pub scaling: Scaling,
    /// Draw at most this many negative samples per focal model.
    #[arg(long)]
    pub neg_sample_size: Option<usize>,
    /// Seed for negative-sample draws.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scaling {
    Survivors,
    Full,
}

impl Scaling {
    fn scope(self) -> ScalingScope {
        match self {
            Scaling::Survivors => ScalingScope::Survivors,
            Scaling::Full => ScalingScope::FullSet,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Scaling::Survivors => "survivors",
            Scaling::Full => "full",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Also write the canonical form of the prediction file here.
    #[arg(long)]
    pub canonical: Option<PathBuf>,
    /// Report path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub focal: FocalArgs,
    /// Metrics to score: any of ck, bd, kw, gd, f-ck, f-bd, f-kw, f-gd.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "ck,bd,kw,gd,f-ck,f-bd,f-kw,f-gd"
    )]
    pub metrics: Vec<String>,
    /// Smallest team size scored.
    #[arg(long, default_value_t = 2)]
    pub min_size: usize,
    /// Largest team size scored (defaults to M - 1).
    #[arg(long)]
    pub max_size: Option<usize>,
    /// Lift the guard on large ensembles.
    #[arg(long)]
    pub allow_large: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PruneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub focal: FocalArgs,
    /// Focal metrics, one hierarchical pass each.
    #[arg(long, value_delimiter = ',', default_value = "f-ck,f-bd,f-kw,f-gd")]
    pub metrics: Vec<String>,
    /// Fraction of candidates pruned at each size.
    #[arg(long, default_value_t = focalprune_core::pruning::DEFAULT_BETA)]
    pub beta: f64,
    /// Team size to stop at (defaults to half the ensemble).
    #[arg(long)]
    pub target_size: Option<usize>,
    /// Quorum for the consensus set (defaults to 3 when at least three metrics run).
    #[arg(long)]
    pub consensus: Option<usize>,
    /// Voting rule for reported team accuracies.
    #[arg(long, default_value = "plurality")]
    pub voting: String,
    #[arg(long)]
    pub allow_large: bool,
    /// Write per-level wall-clock timings to this file.
    #[arg(long)]
    pub timing: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Baseline metrics, one mean-threshold pass each.
    #[arg(long, value_delimiter = ',', default_value = "ck,bd,kw,gd")]
    pub metrics: Vec<String>,
    #[arg(long, default_value_t = 2)]
    pub min_size: usize,
    #[arg(long)]
    pub max_size: Option<usize>,
    #[arg(long)]
    pub consensus: Option<usize>,
    #[arg(long, default_value = "plurality")]
    pub voting: String,
    #[arg(long)]
    pub allow_large: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Report written by `prune` or `prune-baseline`.
    #[arg(long)]
    pub selection: PathBuf,
    /// Build the brute-force oracle and report precision and recall.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value = "plurality")]
    pub voting: String,
    /// Write `metric,team,size,fq,accuracy` for every team to this file.
    #[arg(long)]
    pub dump_scatter: Option<PathBuf>,
    #[arg(long)]
    pub allow_large: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Team sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub team_size: Vec<usize>,
    /// Average error correlations, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub delta: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Variance of each member's error.
    #[arg(long, default_value_t = 1.0)]
    pub base_variance: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub models: usize,
    #[arg(long)]
    pub samples: usize,
    #[arg(long, default_value_t = 10)]
    pub classes: u32,
    /// Per-model accuracies; overrides --accuracy-range.
    #[arg(long, value_delimiter = ',')]
    pub accuracies: Option<Vec<f64>>,
    /// Lowest and highest accuracy, spread evenly over the models.
    #[arg(long, value_delimiter = ',', default_values_t = [0.6, 0.9])]
    pub accuracy_range: Vec<f64>,
    /// Probability a model follows its clique's shared draw.
    #[arg(long, default_value_t = 0.5)]
    pub overlap: f64,
    /// Clique id per model, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub cliques: Option<Vec<usize>>,
    /// Also write per-model confidence files into this directory.
    #[arg(long)]
    pub confidence_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Prediction CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Report path (stdout when omitted).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// A failure carrying its exit code and a remediation hint.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
    pub hint: String,
}

pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_DATA: i32 = 2;

impl CliError {
    fn validation(message: impl Into<String>, hint: impl Into<String>) -> Self {
        CliError {
            code: EXIT_VALIDATION,
            message: message.into(),
            hint: hint.into(),
        }
    }

    fn data(message: impl Into<String>, hint: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: message.into(),
            hint: hint.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::CombinatorialGuard { .. } => {
                CliError::validation(message, "reduce the ensemble or pass --allow-large")
            }
            Error::InvalidParameter(_) | Error::InvalidTeam(_) | Error::Infeasible(_) => {
                CliError::validation(message, "check the flag values; see --help")
            }
            Error::MissingConfidences => CliError::validation(
                message,
                "pass --confidences <dir> or use --voting plurality",
            ),
            Error::NotInOracle(_) => {
                CliError::data(message, "the selection does not match this dataset")
            }
            Error::InvalidDataset(_)
            | Error::LabelOutOfRange { .. }
            | Error::EmptySampleSet
            | Error::PerfectFocalModel(_) => CliError::data(message, "fix the prediction file"),
        }
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        let hint = match &e {
            LoadError::Io { .. } => "check that the path exists and is readable",
            LoadError::Line { .. } => {
                "fix the offending line; labels must be integers below the class count"
            }
            LoadError::File { .. } => "check the file against the documented CSV layout",
        };
        CliError::data(e.to_string(), hint)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::data(
        format!("{}: {e}", path.display()),
        "check that the location exists and is writable",
    )
}

type CliResult<T> = Result<T, CliError>;

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the exit code. Reports go to their `--out` file or `stdout`.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let informational =
                matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            if informational {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let _ = write!(stderr, "{e}");
            let _ = writeln!(stderr, "hint: run with --help for usage");
            return EXIT_VALIDATION;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            let _ = writeln!(stderr, "hint: {}", e.hint);
            e.code
        }
    }
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> CliResult<()> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(CliError::validation(
                "--threads must be at least 1",
                "omit it to use every core",
            ));
        }
        // a pool already exists when run() is called twice in one process
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global();
    }
    match cli.command {
        Command::Ingest(a) => ingest(a, stdout),
        Command::Score(a) => score(a, stdout),
        Command::Prune(a) => prune(a, stdout),
        Command::PruneBaseline(a) => prune_baseline(a, stdout),
        Command::Evaluate(a) => evaluate(a, stdout),
        Command::Simulate(a) => simulate(a, stdout),
        Command::Generate(a) => generate(a, stdout),
    }
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| io_error(p, e)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::data(format!("stdout: {e}"), "check the output stream")),
    }
}

fn path_string(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn load(args: &DataArgs) -> CliResult<LoadedDataset> {
    if args.classes.is_some_and(|c| c < 2) {
        return Err(CliError::validation(
            "--classes must be at least 2",
            "omit it to infer the class count",
        ));
    }
    Ok(load_predictions(
        &args.data,
        args.confidences.as_deref(),
        args.classes,
    )?)
}

fn base_config(sub: &str, format: Format, data: &DataArgs, out: Option<&Path>) -> RunConfig {
    let mut c = RunConfig::new(sub, format.name());
    c.data = Some(path_string(&data.data));
    c.out = out.map(path_string);
    if let Some(dir) = &data.confidences {
        c.option("confidences", path_string(dir));
    }
    if let Some(k) = data.classes {
        c.option("classes", k);
    }
    c
}

fn dataset_info(args: &DataArgs, loaded: &LoadedDataset) -> DatasetInfo {
    DatasetInfo::new(
        &path_string(&args.data),
        &loaded.content_hash,
        &loaded.dataset,
    )
}

/// Metric name as given on the command line, split into baseline and focal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct MetricSpec {
    metric: Metric,
    focal: bool,
}

impl MetricSpec {
    fn parse(s: &str) -> CliResult<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (focal, base) = match s.strip_prefix("f-") {
            Some(rest) => (true, rest),
            None => (false, s.as_str()),
        };
        let metric = base.parse::<Metric>().map_err(|_| {
            CliError::validation(
                format!("unknown metric {s:?}"),
                "use ck, bd, kw or gd, or their focal forms f-ck, f-bd, f-kw, f-gd",
            )
        })?;
        Ok(MetricSpec { metric, focal })
    }

    fn name(self) -> &'static str {
        if self.focal {
            self.metric.focal_name()
        } else {
            self.metric.name()
        }
    }
}

fn parse_metrics(names: &[String], require: Option<bool>) -> CliResult<Vec<MetricSpec>> {
    if names.is_empty() {
        return Err(CliError::validation("no metrics given", "pass --metrics"));
    }
    let mut out: Vec<MetricSpec> = Vec::new();
    for n in names {
        let spec = MetricSpec::parse(n)?;
        if let Some(focal) = require {
            if spec.focal != focal {
                let hint = if focal {
                    "prune takes focal metrics (f-ck, f-bd, f-kw, f-gd); use prune-baseline for ck, bd, kw, gd"
                } else {
                    "prune-baseline takes ck, bd, kw, gd; use prune for focal metrics"
                };
                return Err(CliError::validation(
                    format!("metric {} not accepted here", spec.name()),
                    hint,
                ));
            }
        }
        if out.contains(&spec) {
            return Err(CliError::validation(
                format!("metric {} listed twice", spec.name()),
                "list each metric once",
            ));
        }
        out.push(spec);
    }
    Ok(out)
}

fn parse_voting(s: &str) -> CliResult<Voting> {
    s.parse::<Voting>().map_err(|e| {
        CliError::validation(
            e.to_string(),
            "use --voting plurality or --voting soft_average",
        )
    })
}

fn negative_sampling(f: &FocalArgs) -> CliResult<NegativeSampling> {
    match f.neg_sample_size {
        None => Ok(NegativeSampling::Full),
        Some(0) => Err(CliError::validation(
            "--neg-sample-size must be positive",
            "omit it to use every negative sample",
        )),
        Some(size) => Ok(NegativeSampling::Subsample { size, seed: f.seed }),
    }
}

fn focal_config(c: &mut RunConfig, f: &FocalArgs) {
    c.option("scaling", f.scaling.name());
    c.option("neg_sample_size", f.neg_sample_size);
    c.seed = Some(f.seed);
}

fn size_range(m: usize, lo: usize, hi: Option<usize>) -> CliResult<SizeRange> {
    let hi = hi.unwrap_or(m.saturating_sub(1));
    let range = SizeRange::new(lo, hi);
    let hint = format!(
        "sizes must satisfy 2 <= min <= max <= {}",
        m.saturating_sub(1)
    );
    range
        .check(m)
        .map_err(|e| CliError::validation(e.to_string(), hint.clone()))?;
    if hi >= m {
        return Err(CliError::validation(
            format!("--max-size {hi} is the whole ensemble"),
            hint,
        ));
    }
    Ok(range)
}

fn resolve_quorum(requested: Option<usize>, selections: usize) -> CliResult<Option<usize>> {
    let default = focalprune_core::pruning::DEFAULT_QUORUM;
    match requested {
        Some(0) => Err(CliError::validation(
            "--consensus must be at least 1",
            "omit it for the default quorum",
        )),
        Some(q) if q > selections => Err(CliError::validation(
            format!("quorum {q} exceeds the {selections} metrics requested"),
            "lower --consensus or add metrics",
        )),
        Some(q) => Ok(Some(q)),
        None if selections >= default => Ok(Some(default)),
        None => Ok(None),
    }
}

fn consensus(
    sets: &[Vec<Team>],
    quorum: usize,
    voter: &Voter<'_>,
    n: usize,
) -> CliResult<Consensus> {
    let refs: Vec<&[Team]> = sets.iter().map(Vec::as_slice).collect();
    let teams = consensus_of(&refs, quorum)?;
    let teams = teams
        .into_iter()
        .map(|t| {
            let r = TeamRef::from(t);
            ConsensusTeam {
                team: r.team,
                members: r.members,
                votes: sets.iter().filter(|s| s.binary_search(&t).is_ok()).count(),
                accuracy: Some(voter.correct_count(t) as f64 / n as f64),
            }
        })
        .collect();
    Ok(Consensus { quorum, teams })
}

fn ingest(a: IngestArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let loaded = load(&a.data)?;
    let ds = &loaded.dataset;
    let mut config = base_config("ingest", Format::Json, &a.data, a.out.as_deref());
    if let Some(p) = &a.canonical {
        config.option("canonical", path_string(p));
    }
    let canonical = to_canonical_csv(ds);
    if let Some(p) = &a.canonical {
        std::fs::write(p, &canonical).map_err(|e| io_error(p, e))?;
    }
    let report = IngestReport {
        config,
        dataset: dataset_info(&a.data, &loaded),
        accuracies: model_accuracies(ds),
        canonical_sha256: sha256_hex(canonical.as_bytes()),
    };
    emit(a.out.as_deref(), &to_json(&report), stdout)
}

fn model_accuracies(ds: &PredictionDataset) -> Vec<ModelAccuracy> {
    ds.model_names()
        .iter()
        .zip(ds.member_accuracies())
        .map(|(n, acc)| ModelAccuracy {
            model: n.clone(),
            accuracy: acc,
        })
        .collect()
}

fn score(a: ScoreArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let metrics = parse_metrics(&a.metrics, None)?;
    let sampling = negative_sampling(&a.focal)?;
    let loaded = load(&a.data)?;
    let ds = &loaded.dataset;
    let m = ds.num_models();
    let range = size_range(m, a.min_size, a.max_size)?;
    let teams: Vec<Team> = enumerate_teams(m, range, a.allow_large)?.collect();

    let mut config = base_config("score", a.format, &a.data, a.out.as_deref());
    config.metrics = metrics.iter().map(|s| s.name().to_string()).collect();
    focal_config(&mut config, &a.focal);
    config.option("sizes", (range.lo, range.hi));
    config.option("allow_large", a.allow_large);

    let ctx = metrics
        .iter()
        .any(|s| s.focal)
        .then(|| FocalContext::new(ds, sampling));
    let cm = ds.correctness();
    let mut rows = Vec::new();
    for spec in &metrics {
        if spec.focal {
            let table = compute_focal_table(
                spec.metric,
                ctx.as_ref().unwrap(),
                &teams,
                a.focal.scaling.scope(),
            )?;
            rows.extend(
                table
                    .entries
                    .iter()
                    .map(|e| score_row(spec.name(), e.team, e.fq, e.flags.render())),
            );
        } else {
            rows.extend(
                score_teams(spec.metric, &cm, &teams)?
                    .into_iter()
                    .map(|(t, s)| score_row(spec.name(), t, s.value, s.flags.render())),
            );
        }
    }
    let text = match a.format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
            w.write_record(["metric", "team", "fq", "degenerate_flags"])
                .unwrap();
            for r in &rows {
                w.write_record([
                    r.metric.as_str(),
                    r.team.as_str(),
                    &r.fq.to_string(),
                    r.degenerate_flags.as_str(),
                ])
                .unwrap();
            }
            let body = String::from_utf8(w.into_inner().unwrap()).unwrap();
            csv_preamble(&config, Some(&loaded.content_hash)) + &body
        }
        Format::Json => to_json(&ScoreReport {
            config,
            dataset: dataset_info(&a.data, &loaded),
            rows,
        }),
    };
    emit(a.out.as_deref(), &text, stdout)
}

fn score_row(metric: &str, t: Team, fq: f64, flags: String) -> ScoreRow {
    ScoreRow {
        metric: metric.into(),
        team: t.render(),
        members: t.to_vec(),
        fq,
        degenerate_flags: flags,
    }
}

fn prune(a: PruneArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let metrics = parse_metrics(&a.metrics, Some(true))?;
    let sampling = negative_sampling(&a.focal)?;
    let voting = parse_voting(&a.voting)?;
    let quorum = resolve_quorum(a.consensus, metrics.len())?;
    if !(a.beta > 0.0 && a.beta < 1.0) {
        return Err(CliError::validation(
            format!("--beta must lie in (0, 1), got {}", a.beta),
            "the default is 0.10",
        ));
    }
    let loaded = load(&a.data)?;
    let ds = &loaded.dataset;
    let m = ds.num_models();
    let mut hq = HqConfig::for_models(m);
    hq.beta = a.beta;
    hq.scaling = a.focal.scaling.scope();
    hq.allow_large = a.allow_large;
    if let Some(s) = a.target_size {
        hq.target_size = s;
    }
    hq.validate(m)?;
    let voter = Voter::new(ds, voting)?;
    let n = ds.num_samples();

    let mut config = base_config("prune", a.format, &a.data, a.out.as_deref());
    config.metrics = metrics.iter().map(|s| s.name().to_string()).collect();
    config.beta = Some(hq.beta);
    config.target_size = Some(hq.target_size);
    config.quorum = quorum;
    config.voting = Some(voting.name().into());
    focal_config(&mut config, &a.focal);
    config.option("allow_large", a.allow_large);
    if let Some(p) = &a.timing {
        config.option("timing", path_string(p));
    }

    let ctx = FocalContext::new(ds, sampling);
    let mut selections = Vec::new();
    let mut sets = Vec::new();
    let mut timings = Vec::new();
    for spec in &metrics {
        let mut pruner = HierarchicalPruner::new(spec.metric, &ctx, hq)?;
        let start = Instant::now();
        let mut levels = Vec::new();
        loop {
            let t0 = Instant::now();
            let Some(level) = pruner.step()? else { break };
            levels.push(LevelTiming {
                size: level.size,
                scored: level.scored.len(),
                seconds: t0.elapsed().as_secs_f64(),
            });
        }
        let result = pruner.finish()?;
        timings.push(MetricTiming {
            metric: spec.name().into(),
            levels,
            total_seconds: start.elapsed().as_secs_f64(),
        });
        sets.push(result.selected_teams());
        selections.push(HqSelection {
            metric: spec.name().into(),
            target_size: result.target_size,
            beta: result.beta,
            scaling: a.focal.scaling.name().into(),
            selected: result
                .selected
                .iter()
                .map(|&(t, fq)| {
                    ScoredTeam::new(t, fq, Some(voter.correct_count(t) as f64 / n as f64))
                })
                .collect(),
            prune_set: result
                .prune_set
                .entries()
                .iter()
                .map(|&t| TeamRef::from(t))
                .collect(),
            levels: result.levels.iter().map(LevelSummary::from).collect(),
        });
    }
    let consensus = quorum.map(|q| consensus(&sets, q, &voter, n)).transpose()?;
    let report = PruneReport {
        kind: KIND_HQ.into(),
        config,
        dataset: dataset_info(&a.data, &loaded),
        selections,
        consensus,
    };
    let text = match a.format {
        Format::Json => to_json(&report),
        Format::Csv => selection_csv(
            &report.config,
            &loaded.content_hash,
            report
                .selections
                .iter()
                .map(|s| (s.metric.as_str(), s.selected.as_slice())),
            report.consensus.as_ref(),
        ),
    };
    emit(a.out.as_deref(), &text, stdout)?;
    if let Some(p) = &a.timing {
        let timing = TimingReport { metrics: timings };
        std::fs::write(p, to_json(&timing)).map_err(|e| io_error(p, e))?;
    }
    Ok(())
}

fn selection_csv<'a>(
    config: &RunConfig,
    hash: &str,
    selections: impl Iterator<Item = (&'a str, &'a [ScoredTeam])>,
    consensus: Option<&Consensus>,
) -> String {
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(["selection", "team", "score", "accuracy"])
        .unwrap();
    let acc = |a: Option<f64>| a.map(|v| v.to_string()).unwrap_or_default();
    for (metric, teams) in selections {
        for t in teams {
            w.write_record([
                metric,
                t.team.as_str(),
                &t.score.to_string(),
                &acc(t.accuracy),
            ])
            .unwrap();
        }
    }
    if let Some(c) = consensus {
        for t in &c.teams {
            w.write_record([
                "consensus",
                t.team.as_str(),
                &t.votes.to_string(),
                &acc(t.accuracy),
            ])
            .unwrap();
        }
    }
    csv_preamble(config, Some(hash)) + &String::from_utf8(w.into_inner().unwrap()).unwrap()
}

fn prune_baseline(a: BaselineArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let metrics = parse_metrics(&a.metrics, Some(false))?;
    let voting = parse_voting(&a.voting)?;
    let quorum = resolve_quorum(a.consensus, metrics.len())?;
    let loaded = load(&a.data)?;
    let ds = &loaded.dataset;
    let m = ds.num_models();
    let range = size_range(m, a.min_size, a.max_size)?;
    let teams: Vec<Team> = enumerate_teams(m, range, a.allow_large)?.collect();
    let voter = Voter::new(ds, voting)?;
    let n = ds.num_samples();
    let cm = ds.correctness();

    let mut config = base_config("prune-baseline", a.format, &a.data, a.out.as_deref());
    config.metrics = metrics.iter().map(|s| s.name().to_string()).collect();
    config.quorum = quorum;
    config.voting = Some(voting.name().into());
    config.option("sizes", (range.lo, range.hi));
    config.option("allow_large", a.allow_large);

    let mut selections = Vec::new();
    let mut sets = Vec::new();
    for spec in &metrics {
        let scores: Vec<(Team, f64)> = score_teams(spec.metric, &cm, &teams)?
            .into_iter()
            .map(|(t, s)| (t, s.value))
            .collect();
        let sel = mean_threshold_prune(&scores)?;
        let lookup = |t: Team| {
            scores[teams
                .binary_search_by(|x| (x.len(), *x).cmp(&(t.len(), t)))
                .unwrap()]
            .1
        };
        selections.push(ThresholdSelection {
            metric: spec.name().into(),
            threshold: sel.threshold,
            candidates: teams.len(),
            selected: sel
                .selected
                .iter()
                .map(|&t| {
                    ScoredTeam::new(t, lookup(t), Some(voter.correct_count(t) as f64 / n as f64))
                })
                .collect(),
        });
        sets.push(sel.selected);
    }
    let consensus = quorum.map(|q| consensus(&sets, q, &voter, n)).transpose()?;
    let report = BaselineReport {
        kind: KIND_BASELINE.into(),
        config,
        dataset: dataset_info(&a.data, &loaded),
        sizes: (range.lo, range.hi),
        selections,
        consensus,
    };
    let text = match a.format {
        Format::Json => to_json(&report),
        Format::Csv => selection_csv(
            &report.config,
            &loaded.content_hash,
            report
                .selections
                .iter()
                .map(|s| (s.metric.as_str(), s.selected.as_slice())),
            report.consensus.as_ref(),
        ),
    };
    emit(a.out.as_deref(), &text, stdout)
}

fn evaluate(a: EvaluateArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let voting = parse_voting(&a.voting)?;
    let loaded = load(&a.data)?;
    let ds = &loaded.dataset;
    let m = ds.num_models();
    let n = ds.num_samples();
    let raw = std::fs::read_to_string(&a.selection).map_err(|e| io_error(&a.selection, e))?;
    let input: SelectionInput = serde_json::from_str(&raw).map_err(|e| {
        CliError::data(
            format!("{}: {e}", a.selection.display()),
            "pass a JSON report written by prune or prune-baseline",
        )
    })?;
    if input.dataset.sha256 != loaded.content_hash {
        return Err(CliError::data(
            format!(
                "selection was computed on dataset {} but {} hashes to {}",
                input.dataset.sha256,
                a.data.data.display(),
                loaded.content_hash
            ),
            "evaluate against the same prediction file the selection came from",
        ));
    }
    let hierarchical = match input.kind.as_str() {
        KIND_HQ => true,
        KIND_BASELINE => false,
        other => {
            return Err(CliError::data(
                format!("unknown selection kind {other:?}"),
                "pass a JSON report written by prune or prune-baseline",
            ))
        }
    };

    let mut config = base_config("evaluate", a.format, &a.data, a.out.as_deref());
    config.voting = Some(voting.name().into());
    config.metrics = input.selections.iter().map(|s| s.metric.clone()).collect();
    config.option("selection", path_string(&a.selection));
    config.option("oracle", a.oracle);
    config.option("allow_large", a.allow_large);
    if let Some(p) = &a.dump_scatter {
        config.option("dump_scatter", path_string(p));
    }

    let to_teams = |refs: &[TeamRef]| -> CliResult<Vec<Team>> {
        refs.iter()
            .map(|r| {
                let t = r.to_team()?;
                t.validate(m, 2)?;
                Ok(t)
            })
            .collect()
    };
    let mut groups: Vec<(String, Option<usize>, Vec<Team>)> = Vec::new();
    for s in &input.selections {
        groups.push((s.metric.clone(), s.target_size, to_teams(&s.selected)?));
    }
    if let Some(c) = &input.consensus {
        let target = input.selections.first().and_then(|s| s.target_size);
        groups.push((
            format!("consensus@{}", c.quorum),
            target,
            to_teams(&c.teams)?,
        ));
    }

    let voter = Voter::new(ds, voting)?;
    let oracle_range = if hierarchical {
        let target = groups.iter().find_map(|g| g.1).unwrap_or(2);
        SizeRange::new(target, target)
    } else {
        SizeRange::proper(m)
    };
    let oracle = if a.oracle {
        Some(brute_force_oracle(ds, voting, oracle_range, a.allow_large)?)
    } else {
        None
    };

    let mut sets = Vec::new();
    for (label, target, teams) in &groups {
        let scope = match (hierarchical, target) {
            (true, Some(s)) => QualityScope::Size(*s),
            _ => QualityScope::AllSizes,
        };
        let evaluated = teams
            .iter()
            .map(|&t| {
                let r = TeamRef::from(t);
                EvaluatedTeam {
                    team: r.team,
                    members: r.members,
                    accuracy: voter.correct_count(t) as f64 / n as f64,
                    cost_reduction: cost_reduction(m, t.len()),
                    good: oracle.as_ref().and_then(|o| o.is_good(t)),
                }
            })
            .collect();
        let quality = match &oracle {
            Some(o) => Some(QualityReport::from(&prune_quality(teams, o, scope)?)),
            None => None,
        };
        sets.push(EvaluatedSet {
            label: label.clone(),
            scope: match scope {
                QualityScope::Size(s) => format!("size={s}"),
                QualityScope::AllSizes => "all_sizes".into(),
            },
            teams: evaluated,
            quality,
        });
    }

    if let Some(p) = &a.dump_scatter {
        let text = scatter_csv(ds, &input, voting, a.allow_large)?;
        std::fs::write(p, text).map_err(|e| io_error(p, e))?;
    }

    let report = EvaluateReport {
        config,
        dataset: dataset_info(&a.data, &loaded),
        selection_kind: input.kind.clone(),
        voting: voting.name().into(),
        full_ensemble_accuracy: voter.correct_count(Team::full(m)) as f64 / n as f64,
        oracle: oracle.as_ref().map(oracle_summary),
        sets,
    };
    let text = match a.format {
        Format::Json => to_json(&report),
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
            w.write_record([
                "label",
                "team",
                "size",
                "accuracy",
                "cost_reduction",
                "good",
            ])
            .unwrap();
            for s in &report.sets {
                for t in &s.teams {
                    w.write_record([
                        s.label.as_str(),
                        t.team.as_str(),
                        &t.members.len().to_string(),
                        &t.accuracy.to_string(),
                        &t.cost_reduction.to_string(),
                        &t.good.map(|g| g.to_string()).unwrap_or_default(),
                    ])
                    .unwrap();
                }
            }
            csv_preamble(&report.config, Some(&loaded.content_hash))
                + &String::from_utf8(w.into_inner().unwrap()).unwrap()
        }
    };
    emit(a.out.as_deref(), &text, stdout)
}

fn oracle_summary(o: &OracleTable) -> OracleSummary {
    let mut good_by_size = std::collections::BTreeMap::new();
    for t in o.good() {
        *good_by_size.entry(t.len()).or_insert(0) += 1;
    }
    OracleSummary {
        reference_accuracy: o.reference_accuracy(),
        teams_evaluated: o.len(),
        good_by_size,
    }
}

/// `metric,team,size,fq,accuracy` for every proper team under each metric of
/// the selection, using the negative-sampling settings the selection recorded.
fn scatter_csv(
    ds: &PredictionDataset,
    input: &SelectionInput,
    voting: Voting,
    allow_large: bool,
) -> CliResult<String> {
    let m = ds.num_models();
    let oracle = brute_force_oracle(ds, voting, SizeRange::proper(m), allow_large)?;
    let teams: Vec<Team> = oracle.entries().map(|(t, _)| t).collect();
    let opts = &input.config.options;
    let sampling = match opts.get("neg_sample_size").and_then(|v| v.as_u64()) {
        Some(size) => NegativeSampling::Subsample {
            size: size as usize,
            seed: input.config.seed.unwrap_or(0),
        },
        None => NegativeSampling::Full,
    };
    let scope = match opts.get("scaling").and_then(|v| v.as_str()) {
        Some("full") => ScalingScope::FullSet,
        _ => ScalingScope::Survivors,
    };
    let ctx = FocalContext::new(ds, sampling);
    let cm = ds.correctness();
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(["metric", "team", "size", "fq", "accuracy"])
        .unwrap();
    for s in &input.selections {
        let spec = MetricSpec::parse(&s.metric)?;
        let scores: Vec<(Team, f64)> = if spec.focal {
            compute_focal_table(spec.metric, &ctx, &teams, scope)?.scores()
        } else {
            score_teams(spec.metric, &cm, &teams)?
                .into_iter()
                .map(|(t, sc)| (t, sc.value))
                .collect()
        };
        for (t, fq) in scores {
            let acc = oracle.accuracy(t).expect("oracle covers every proper team");
            w.write_record([
                spec.name(),
                &t.render(),
                &t.len().to_string(),
                &fq.to_string(),
                &acc.to_string(),
            ])
            .unwrap();
        }
    }
    Ok(String::from_utf8(w.into_inner().unwrap()).unwrap())
}

fn simulate(a: SimulateArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let mut config = RunConfig::new("simulate", a.format.name());
    config.seed = Some(a.seed);
    config.out = a.out.as_deref().map(path_string);
    config.option("team_size", &a.team_size);
    config.option("delta", &a.delta);
    config.option("trials", a.trials);
    config.option("base_variance", a.base_variance);

    let mut rows = Vec::new();
    for &s in &a.team_size {
        for &delta in &a.delta {
            let spec = CorrelatedErrorSpec {
                team_size: s,
                delta,
                base_variance: a.base_variance,
                trials: a.trials,
                seed: a.seed,
            };
            let out = simulate_correlated_errors(&spec)?;
            rows.push(SimulationRow {
                team_size: s,
                delta,
                predicted: predicted_error_ratio(s, delta)?,
                empirical: out.empirical,
                std_error: out.std_error,
                trials: out.trials,
            });
        }
    }
    let text = match a.format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
            w.write_record(["S", "delta", "predicted", "empirical", "stderr"])
                .unwrap();
            for r in &rows {
                w.write_record([
                    r.team_size.to_string(),
                    r.delta.to_string(),
                    r.predicted.to_string(),
                    r.empirical.to_string(),
                    r.std_error.to_string(),
                ])
                .unwrap();
            }
            format!("{}# error_family=gaussian\n", csv_preamble(&config, None))
                + &String::from_utf8(w.into_inner().unwrap()).unwrap()
        }
        Format::Json => to_json(&SimulateReport {
            config,
            error_family: "gaussian".into(),
            rows,
        }),
    };
    emit(a.out.as_deref(), &text, stdout)
}

fn generate(a: GenerateArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let accuracies = match (&a.accuracies, a.accuracy_range.as_slice()) {
        (Some(v), _) => v.clone(),
        (None, &[lo, hi]) if lo <= hi => spread_accuracies(a.models, lo, hi),
        (None, _) => {
            return Err(CliError::validation(
                "--accuracy-range takes two values lo,hi with lo <= hi",
                "for example --accuracy-range 0.6,0.9",
            ))
        }
    };
    let spec = SyntheticSpec {
        num_models: a.models,
        num_samples: a.samples,
        num_classes: a.classes,
        accuracies: accuracies.clone(),
        overlap: a.overlap,
        cliques: a.cliques.clone(),
        confidences: a.confidence_dir.is_some(),
        seed: a.seed,
    };
    let ds = generate_synthetic(&spec)?;
    write_dataset(&ds, &a.out, a.confidence_dir.as_deref()).map_err(|e| io_error(&a.out, e))?;
    let loaded = load_predictions(&a.out, a.confidence_dir.as_deref(), None)?;

    let mut config = RunConfig::new("generate", Format::Json.name());
    config.seed = Some(a.seed);
    config.out = Some(path_string(&a.out));
    config.option("models", a.models);
    config.option("samples", a.samples);
    config.option("classes", a.classes);
    config.option("accuracies", &accuracies);
    config.option("overlap", a.overlap);
    config.option("cliques", &a.cliques);
    config.option(
        "confidence_dir",
        a.confidence_dir.as_deref().map(path_string),
    );
    let report = GenerateReport {
        config,
        dataset: DatasetInfo::new(&path_string(&a.out), &loaded.content_hash, &loaded.dataset),
        target_accuracies: accuracies,
        realized: model_accuracies(&loaded.dataset),
    };
    emit(a.report.as_deref(), &to_json(&report), stdout)
}
