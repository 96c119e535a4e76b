//! Serializable report shapes shared by the subcommands.

use std::collections::BTreeMap;

use focalprune_core::evaluation::PruneQuality;
use focalprune_core::pruning::LevelReport;
use focalprune_core::{PredictionDataset, Team};
use serde::{Deserialize, Serialize};

/// Fully resolved invocation, embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub data: Option<String>,
    pub metrics: Vec<String>,
    pub beta: Option<f64>,
    pub target_size: Option<usize>,
    pub quorum: Option<usize>,
    pub voting: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub format: String,
    /// Subcommand-specific settings, sorted by key.
    pub options: BTreeMap<String, serde_json::Value>,
}

impl RunConfig {
    pub fn new(subcommand: &str, format: &str) -> Self {
        RunConfig {
            subcommand: subcommand.into(),
            data: None,
            metrics: Vec::new(),
            beta: None,
            target_size: None,
            quorum: None,
            voting: None,
            seed: None,
            out: None,
            format: format.into(),
            options: BTreeMap::new(),
        }
    }

    pub fn option(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("plain values serialize");
        self.options.insert(key.into(), v);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub path: String,
    pub sha256: String,
    pub models: usize,
    pub samples: usize,
    pub classes: u32,
    pub model_names: Vec<String>,
    pub has_confidences: bool,
}

impl DatasetInfo {
    pub fn new(path: &str, sha256: &str, ds: &PredictionDataset) -> Self {
        DatasetInfo {
            path: path.into(),
            sha256: sha256.into(),
            models: ds.num_models(),
            samples: ds.num_samples(),
            classes: ds.num_classes(),
            model_names: ds.model_names().to_vec(),
            has_confidences: ds.has_confidences(),
        }
    }
}

/// A team in both rendered and array form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamRef {
    pub team: String,
    pub members: Vec<usize>,
}

impl From<Team> for TeamRef {
    fn from(t: Team) -> Self {
        TeamRef {
            team: t.render(),
            members: t.to_vec(),
        }
    }
}

impl TeamRef {
    pub fn to_team(&self) -> focalprune_core::Result<Team> {
        Team::new(&self.members)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTeam {
    pub team: String,
    pub members: Vec<usize>,
    pub score: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub accuracy: Option<f64>,
}

impl ScoredTeam {
    pub fn new(t: Team, score: f64, accuracy: Option<f64>) -> Self {
        ScoredTeam {
            team: t.render(),
            members: t.to_vec(),
            score,
            accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub size: usize,
    pub total: u64,
    pub scored: usize,
    pub pruned: usize,
    pub skipped: u64,
}

impl From<&LevelReport> for LevelSummary {
    fn from(l: &LevelReport) -> Self {
        LevelSummary {
            size: l.size,
            total: l.total,
            scored: l.scored.len(),
            pruned: l.pruned.len(),
            skipped: l.skipped,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HqSelection {
    pub metric: String,
    pub target_size: usize,
    pub beta: f64,
    pub scaling: String,
    pub selected: Vec<ScoredTeam>,
    pub prune_set: Vec<TeamRef>,
    pub levels: Vec<LevelSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSelection {
    pub metric: String,
    pub threshold: f64,
    pub candidates: usize,
    pub selected: Vec<ScoredTeam>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusTeam {
    pub team: String,
    pub members: Vec<usize>,
    /// Number of metric selections containing the team.
    pub votes: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consensus {
    pub quorum: usize,
    pub teams: Vec<ConsensusTeam>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub kind: String,
    pub config: RunConfig,
    pub dataset: DatasetInfo,
    pub selections: Vec<HqSelection>,
    pub consensus: Option<Consensus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub kind: String,
    pub config: RunConfig,
    pub dataset: DatasetInfo,
    pub sizes: (usize, usize),
    pub selections: Vec<ThresholdSelection>,
    pub consensus: Option<Consensus>,
}

pub const KIND_HQ: &str = "hierarchical";
pub const KIND_BASELINE: &str = "mean_threshold";

/// The parts of either selection report that `evaluate` needs.
#[derive(Debug, Clone, Deserialize)]
pub struct SelectionInput {
    pub kind: String,
    pub config: RunConfig,
    pub dataset: DatasetInfo,
    pub selections: Vec<SelectionEntryInput>,
    pub consensus: Option<ConsensusInput>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SelectionEntryInput {
    pub metric: String,
    #[serde(default)]
    pub target_size: Option<usize>,
    pub selected: Vec<TeamRef>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ConsensusInput {
    pub quorum: usize,
    pub teams: Vec<TeamRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub selected: usize,
    pub hits: usize,
    pub good_in_scope: usize,
    pub precision: f64,
    pub recall: f64,
    pub accuracy_range: Option<(f64, f64)>,
    pub cost_reduction_range: Option<(f64, f64)>,
    pub empty_selection: bool,
    pub empty_good: bool,
}

impl From<&PruneQuality> for QualityReport {
    fn from(q: &PruneQuality) -> Self {
        QualityReport {
            selected: q.selected,
            hits: q.hits,
            good_in_scope: q.good_in_scope,
            precision: q.precision,
            recall: q.recall,
            accuracy_range: q.accuracy_range,
            cost_reduction_range: q.cost_reduction_range,
            empty_selection: q.empty_selection,
            empty_good: q.empty_good,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedTeam {
    pub team: String,
    pub members: Vec<usize>,
    pub accuracy: f64,
    pub cost_reduction: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub good: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedSet {
    pub label: String,
    pub scope: String,
    pub teams: Vec<EvaluatedTeam>,
    pub quality: Option<QualityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub reference_accuracy: f64,
    pub teams_evaluated: usize,
    /// Good-team count per team size.
    pub good_by_size: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateReport {
    pub config: RunConfig,
    pub dataset: DatasetInfo,
    pub selection_kind: String,
    pub voting: String,
    pub full_ensemble_accuracy: f64,
    pub oracle: Option<OracleSummary>,
    pub sets: Vec<EvaluatedSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAccuracy {
    pub model: String,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub config: RunConfig,
    pub dataset: DatasetInfo,
    pub accuracies: Vec<ModelAccuracy>,
    pub canonical_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateReport {
    pub config: RunConfig,
    pub dataset: DatasetInfo,
    pub target_accuracies: Vec<f64>,
    pub realized: Vec<ModelAccuracy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    pub team_size: usize,
    pub delta: f64,
    pub predicted: f64,
    pub empirical: f64,
    pub std_error: f64,
    pub trials: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub config: RunConfig,
    pub error_family: String,
    pub rows: Vec<SimulationRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub metric: String,
    pub team: String,
    pub members: Vec<usize>,
    pub fq: f64,
    pub degenerate_flags: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub config: RunConfig,
    pub dataset: DatasetInfo,
    pub rows: Vec<ScoreRow>,
}

/// Per-level wall-clock seconds, kept out of the main report so that stays
/// reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub metrics: Vec<MetricTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTiming {
    pub metric: String,
    pub levels: Vec<LevelTiming>,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTiming {
    pub size: usize,
    pub scored: usize,
    pub seconds: f64,
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Comment lines placed ahead of CSV output so it carries the same audit
/// trail as the JSON reports.
pub fn csv_preamble(config: &RunConfig, dataset_sha256: Option<&str>) -> String {
    let mut out = format!(
        "# config={}\n",
        serde_json::to_string(config).expect("config serializes")
    );
    if let Some(h) = dataset_sha256 {
        out.push_str(&format!("# dataset_sha256={h}\n"));
    }
    out
}
