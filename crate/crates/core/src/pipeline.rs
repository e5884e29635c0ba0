//! End-to-end orchestration: raw logs in, an evaluated policy out.
//!
//! The pipeline is nine sequential stages — ingest, segment, pressure,
//! states, xg, behavioral, transitions, policy, evaluate — each of which
//! reads what earlier stages left in memory and writes its artifacts into
//! one output directory. [`run_pipeline`] drives all nine and finishes
//! with a manifest of SHA-256 content hashes, so two runs with the same
//! seeds can be compared file by file. [`run_stage`] reruns a single
//! stage, restoring what it needs from the artifacts already on disk.
//!
//! Every knob lives in [`PipelineConfig`], which deserializes from TOML
//! with defaults for anything omitted. A master seed, when set, fans out
//! to per-stage seeds so one number pins the whole run.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{BehavioralModel, OutcomeDistribution};
use crate::error::{Error, Result};
use crate::match_data::{
    self, compute_velocities, synthetic, Event, Frame, Team,
};
use crate::nn::{self, TrainConfig, N_CLASSES};
use crate::ope::{self, KdeSummary, OpeConfig, OpeResult};
use crate::policy::{
    self, build_transition_table, train_policy, PGConfig, PolicyNetwork, TransitionTable,
};
use crate::possession::{
    self, build_episodes, segment_possessions, EndingAction, Episode, Possession,
};
use crate::pressure::{self, PressureRow};
use crate::reward::{self, ReturnConfig};
use crate::state::{self, extract_features, ActionFeatures, FeatureExtras, StackedStates, StateType};
use crate::xg::{self, LogisticModel, ShotRecord};

// ── Artifact names ──────────────────────────────────────────────────────

pub const EVENTS_FILE: &str = "events.csv";
pub const FRAMES_FILE: &str = "frames.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const POSSESSIONS_FILE: &str = "possessions.csv";
pub const EPISODES_FILE: &str = "episodes.csv";
pub const PRESSURE_FILE: &str = "pressure.csv";
pub const STATES_FILE: &str = "states.bin";
pub const LABELS_FILE: &str = "labels.csv";
pub const XG_MODEL_FILE: &str = "xg_model.txt";
pub const XG_EVAL_FILE: &str = "xg_eval.csv";
pub const BEHAVIORAL_FILE: &str = "behavioral.ckpt";
pub const BEHAVIORAL_LOSS_FILE: &str = "behavioral_loss.csv";
pub const TRANSITIONS_FILE: &str = "transitions.csv";
pub const POLICY_FILE: &str = "policy.ckpt";
pub const POLICY_TRACE_FILE: &str = "policy_trace.csv";
pub const OPE_REPORT_FILE: &str = "ope_report.csv";
pub const DENSITY_FILE: &str = "density.csv";
pub const SCENARIOS_FILE: &str = "scenarios.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Stage names in execution order; stage numbers in errors are 1-based
/// indices into this list.
pub const STAGE_NAMES: [&str; 9] = [
    "ingest",
    "segment",
    "pressure",
    "states",
    "xg",
    "behavioral",
    "transitions",
    "policy",
    "evaluate",
];

// ── Configuration ───────────────────────────────────────────────────────

/// Seed salts keeping per-stage RNG streams apart when one master seed
/// drives the run.
const CLASSIFIER_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;
const POLICY_SEED_SALT: u64 = 0x517c_c1b7_2722_0a95;

/// Everything a run needs, deserializable from TOML. Any field left out
/// of the file keeps its default, so an empty string is a valid config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Directory every artifact is written into.
    pub out_dir: PathBuf,
    /// Directory holding `events.csv` and `frames.csv` to ingest; when
    /// absent the run generates a synthetic corpus instead.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_dir: Option<PathBuf>,
    pub state_type: StateType,
    /// Master seed. When set it overrides the per-stage seeds below.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Scenario rows kept in the report, ranked by |delta|.
    pub scenario_top_k: usize,
    /// Cross-validation folds for the shot-quality evaluation.
    pub xg_folds: usize,
    pub synthetic: synthetic::SyntheticConfig,
    pub classifier: TrainConfig,
    pub policy: PGConfig,
    pub ope: OpeConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            out_dir: PathBuf::from("artifacts"),
            input_dir: None,
            state_type: StateType::III,
            seed: None,
            scenario_top_k: 20,
            xg_folds: 5,
            synthetic: synthetic::SyntheticConfig::default(),
            classifier: TrainConfig::default(),
            policy: PGConfig::default(),
            ope: OpeConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.xg_folds < 2 {
            return Err(Error::Config(format!(
                "cross-validation needs at least 2 folds, got {}",
                self.xg_folds
            )));
        }
        self.synthetic.validate()?;
        self.policy.validate()?;
        self.ope.validate()?;
        Ok(())
    }

    /// Fan the master seed out to the seeded stages. Distinct salts keep
    /// the corpus, classifier, and policy RNG streams independent.
    pub fn apply_seed(&mut self) {
        if let Some(seed) = self.seed {
            self.synthetic.seed = seed;
            self.classifier.seed = seed ^ CLASSIFIER_SEED_SALT;
            self.policy.seed = seed ^ POLICY_SEED_SALT;
        }
    }

    /// The config a run actually uses: seeded, then validated.
    pub fn effective(&self) -> Result<PipelineConfig> {
        let mut cfg = self.clone();
        cfg.apply_seed();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.out_dir.join(file)
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<PipelineConfig> {
        toml::from_str(text)
            .map_err(|e| Error::Config(format!("parsing {origin}: {e}")))
    }

    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        PipelineConfig::from_toml_str(&text, &path.display().to_string())
    }
}

// ── Manifest ────────────────────────────────────────────────────────────

/// Content hashes of every artifact a run produced, keyed by stage. The
/// ordered maps make the JSON rendering deterministic, so identical runs
/// produce identical manifest bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: Option<u64>,
    pub state_type: String,
    pub stages: BTreeMap<String, BTreeMap<String, String>>,
}

impl Manifest {
    fn new(cfg: &PipelineConfig) -> Manifest {
        Manifest {
            seed: cfg.seed,
            state_type: cfg.state_type.as_str().to_string(),
            stages: BTreeMap::new(),
        }
    }

    fn record(&mut self, stage: &str, files: &[PathBuf]) -> Result<()> {
        let entry = self.stages.entry(stage.to_string()).or_default();
        for file in files {
            let name = file
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .ok_or_else(|| {
                    Error::Validation(format!("artifact path {} has no file name", file.display()))
                })?;
            entry.insert(name, sha256_hex(file)?);
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Manifest> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("parsing manifest: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn read(path: &Path) -> Result<Manifest> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Manifest::from_json(&text)
    }
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let digest = Sha256::digest(&bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        write!(out, "{b:02x}").expect("write to string");
    }
    Ok(out)
}

// ── In-memory run state ─────────────────────────────────────────────────

/// What stages pass to each other. Single-stage reruns rebuild this from
/// artifacts on disk; cheap transforms are recomputed, trained models are
/// loaded from their checkpoints.
#[derive(Default)]
struct PipelineState {
    events: Vec<Event>,
    frames: Vec<Frame>,
    possessions: Vec<Possession>,
    episodes: Vec<Episode>,
    /// Aligned one-to-one with `frames`; empty for state types I and II.
    pressure: Vec<PressureRow>,
    states: Option<StackedStates>,
    xg: Option<LogisticModel>,
    behavioral: Option<BehavioralModel>,
    dists: Vec<OutcomeDistribution>,
    values: Vec<f64>,
    table: Option<TransitionTable>,
    policy: Option<PolicyNetwork>,
}

// ── Shared computations ─────────────────────────────────────────────────

/// Interleave both teams' episode chains into one corpus-wide list,
/// ordered by first possession and renumbered.
pub fn merge_episodes(home: Vec<Episode>, away: Vec<Episode>) -> Vec<Episode> {
    let mut all: Vec<Episode> = home.into_iter().chain(away).collect();
    all.sort_by_key(|e| e.possessions.first().copied().unwrap_or(usize::MAX));
    for (i, e) in all.iter_mut().enumerate() {
        e.episode_id = i;
    }
    all
}

fn compute_segments(st: &mut PipelineState) {
    let (possessions, stats) = segment_possessions(&st.events);
    if stats.dropped_tail_events > 0 {
        log::debug!("segmentation dropped {} tail events", stats.dropped_tail_events);
    }
    st.episodes = merge_episodes(
        build_episodes(&possessions, Team::Home),
        build_episodes(&possessions, Team::Away),
    );
    st.possessions = possessions;
}

/// Per-match frame lookup: absolute times plus indices into the corpus
/// frame slice, for matching events to their nearest tracking frame.
struct FrameIndex {
    by_match: HashMap<String, (Vec<f64>, Vec<usize>)>,
}

impl FrameIndex {
    fn build(frames: &[Frame]) -> Result<FrameIndex> {
        let mut by_match: HashMap<String, (Vec<f64>, Vec<usize>)> = HashMap::new();
        for (i, f) in frames.iter().enumerate() {
            let slot = by_match.entry(f.match_id.clone()).or_default();
            if slot.0.last().is_some_and(|&last| f.time_s <= last) {
                return Err(Error::Validation(format!(
                    "frames of match {} are not in increasing time order",
                    f.match_id
                )));
            }
            slot.0.push(f.time_s);
            slot.1.push(i);
        }
        Ok(FrameIndex { by_match })
    }

    /// Corpus-wide index of the frame nearest to absolute time `t`.
    fn nearest(&self, match_id: &str, t: f64) -> Result<usize> {
        let (times, indices) = self.by_match.get(match_id).ok_or_else(|| {
            Error::Validation(format!("match {match_id} has events but no tracking frames"))
        })?;
        let local = state::nearest_time_index(times, t)
            .expect("per-match index entries are never empty");
        Ok(indices[local])
    }
}

fn check_pressure_alignment(st: &PipelineState) -> Result<()> {
    if st.pressure.len() != st.frames.len() {
        return Err(Error::Validation(format!(
            "{} pressure rows for {} frames; rerun the pressure stage",
            st.pressure.len(),
            st.frames.len()
        )));
    }
    Ok(())
}

fn action_extras(
    st: &PipelineState,
    state_type: StateType,
    index: Option<&FrameIndex>,
    event: &Event,
) -> Result<FeatureExtras> {
    match state_type {
        StateType::I => Ok(FeatureExtras::None),
        StateType::II => {
            let index = index.expect("frame index built for state type II");
            let g = index.nearest(&event.match_id, event.absolute_time())?;
            Ok(FeatureExtras::Locations(state::frame_locations(&st.frames[g])?))
        }
        StateType::III => {
            let index = index.expect("frame index built for state type III");
            let g = index.nearest(&event.match_id, event.absolute_time())?;
            Ok(FeatureExtras::Pressure(st.pressure[g].z))
        }
    }
}

fn compute_states(cfg: &PipelineConfig, st: &PipelineState) -> Result<StackedStates> {
    let index = match cfg.state_type {
        StateType::I => None,
        StateType::II | StateType::III => Some(FrameIndex::build(&st.frames)?),
    };
    if cfg.state_type == StateType::III {
        check_pressure_alignment(st)?;
    }
    let mut rows = Vec::with_capacity(st.possessions.len());
    for p in &st.possessions {
        let features = p
            .actions()
            .map(|e| Ok(extract_features(e, action_extras(st, cfg.state_type, index.as_ref(), e)?)))
            .collect::<Result<Vec<_>>>()?;
        rows.push(state::build_state(p, cfg.state_type, &features)?);
    }
    state::stack_states(&rows, cfg.state_type)
}

/// Features of the possession-ending action. Pressure counts ride along
/// for type III; raw locations stay out of the shot model, so types I
/// and II share the plain encoding.
fn ending_features(
    st: &PipelineState,
    state_type: StateType,
    index: Option<&FrameIndex>,
    p: &Possession,
) -> Result<ActionFeatures> {
    let extras = if state_type == StateType::III {
        let index = index.expect("frame index built for state type III");
        let g = index.nearest(&p.ending_event.match_id, p.ending_event.absolute_time())?;
        FeatureExtras::Pressure(st.pressure[g].z)
    } else {
        FeatureExtras::None
    };
    Ok(extract_features(&p.ending_event, extras))
}

fn ending_frame_index(cfg: &PipelineConfig, st: &PipelineState) -> Result<Option<FrameIndex>> {
    if cfg.state_type == StateType::III {
        check_pressure_alignment(st)?;
        Ok(Some(FrameIndex::build(&st.frames)?))
    } else {
        Ok(None)
    }
}

fn compute_values_table(cfg: &PipelineConfig, st: &mut PipelineState) -> Result<()> {
    let index = ending_frame_index(cfg, st)?;
    let xg_model = st.xg.as_ref().expect("set by the xg stage");
    let goal_probs = st
        .possessions
        .iter()
        .map(|p| {
            Ok(xg_model.predict_features(&ending_features(st, cfg.state_type, index.as_ref(), p)?))
        })
        .collect::<Result<Vec<f64>>>()?;
    let values = reward::possession_values(&st.dists, &goal_probs)?;
    let table = build_transition_table(&st.episodes, &st.possessions, &values, st.dists.clone())?;
    st.values = values;
    st.table = Some(table);
    Ok(())
}

// ── Stages ──────────────────────────────────────────────────────────────

type StageFn = fn(&PipelineConfig, &mut PipelineState) -> Result<Vec<PathBuf>>;

const STAGES: [StageFn; 9] = [
    stage_ingest,
    stage_segment,
    stage_pressure,
    stage_states,
    stage_xg,
    stage_behavioral,
    stage_transitions,
    stage_policy,
    stage_evaluate,
];

fn at_stage(i: usize, e: Error) -> Error {
    Error::Stage { stage: i + 1, name: STAGE_NAMES[i], source: Box::new(e) }
}

fn stage_ingest(cfg: &PipelineConfig, st: &mut PipelineState) -> Result<Vec<PathBuf>> {
    let mut files = vec![cfg.path(EVENTS_FILE), cfg.path(FRAMES_FILE)];
    match &cfg.input_dir {
        Some(dir) => {
            st.events = match_data::parse_event_log(&dir.join(EVENTS_FILE))?;
            st.frames = match_data::parse_frame_log(&dir.join(FRAMES_FILE))?;
        }
        None => {
            let corpus = synthetic::generate_synthetic_corpus(&cfg.synthetic)?;
            st.events = corpus.events;
            st.frames = corpus.frames;
            let truth_path = cfg.path(GROUND_TRUTH_FILE);
            fs::write(&truth_path, corpus.ground_truth.to_json())
                .map_err(|e| Error::io(truth_path.display().to_string(), e))?;
            files.push(truth_path);
        }
    }
    if st.events.is_empty() {
        return Err(Error::InsufficientData("the corpus has no events".into()));
    }
    match_data::write_event_log(&cfg.path(EVENTS_FILE), &st.events)?;
    match_data::write_frame_log(&cfg.path(FRAMES_FILE), &st.frames)?;
    Ok(files)
}

fn stage_segment(cfg: &PipelineConfig, st: &mut PipelineState) -> Result<Vec<PathBuf>> {
    compute_segments(st);
    if st.possessions.is_empty() {
        return Err(Error::InsufficientData("no possessions segmented".into()));
    }
    possession::write_possessions(&cfg.path(POSSESSIONS_FILE), &st.possessions)?;
    possession::write_episodes(&cfg.path(EPISODES_FILE), &st.episodes)?;
    Ok(vec![cfg.path(POSSESSIONS_FILE), cfg.path(EPISODES_FILE)])
}

fn stage_pressure(cfg: &PipelineConfig, st: &mut PipelineState) -> Result<Vec<PathBuf>> {
    st.pressure = if cfg.state_type == StateType::III {
        let velocities = compute_velocities(&st.frames)?;
        pressure::compute_pressure_table(&st.frames, &velocities)?
    } else {
        // The file still appears, header-only, so artifact sets have the
        // same shape across state types.
        Vec::new()
    };
    pressure::write_pressure_table(&cfg.path(PRESSURE_FILE), &st.pressure)?;
    Ok(vec![cfg.path(PRESSURE_FILE)])
}

fn stage_states(cfg: &PipelineConfig, st: &mut PipelineState) -> Result<Vec<PathBuf>> {
    let stacked = compute_states(cfg, st)?;
    state::write_tensor(&cfg.path(STATES_FILE), &stacked)?;
    state::write_labels(&cfg.path(LABELS_FILE), &stacked.labels)?;
    st.states = Some(stacked);
    Ok(vec![cfg.path(STATES_FILE), cfg.path(LABELS_FILE)])
}

fn stage_xg(cfg: &PipelineConfig, st: &mut PipelineState) -> Result<Vec<PathBuf>> {
    let index = ending_frame_index(cfg, st)?;
    let shots = st
        .possessions
        .iter()
        .filter(|p| p.ending == EndingAction::Shot)
        .map(|p| {
            Ok(ShotRecord {
                features: ending_features(st, cfg.state_type, index.as_ref(), p)?,
                goal: p.is_goal(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let model = xg::fit_xg(&shots)?;
    let (brier, auc) = xg::evaluate_xg(&shots, cfg.xg_folds)?;
    log::info!("shot model on {} shots: brier {brier:.4}, auc {auc:.4}", shots.len());
    xg::write_model(&cfg.path(XG_MODEL_FILE), &model)?;
    let eval_path = cfg.path(XG_EVAL_FILE);
    fs::write(&eval_path, format!("brier,auc\n{brier},{auc}\n"))
        .map_err(|e| Error::io(eval_path.display().to_string(), e))?;
    st.xg = Some(model);
    Ok(vec![cfg.path(XG_MODEL_FILE), eval_path])
}

fn stage_behavioral(cfg: &PipelineConfig, st: &mut PipelineState) -> Result<Vec<PathBuf>> {
    let states = st.states.as_ref().expect("set by the states stage");
    let (model, curve) = BehavioralModel::train(states, &cfg.classifier)?;
    model.save(&cfg.path(BEHAVIORAL_FILE))?;
    nn::write_loss_curve(&cfg.path(BEHAVIORAL_LOSS_FILE), &curve)?;
    st.dists = model.predict_all(states)?;
    st.behavioral = Some(model);
    Ok(vec![cfg.path(BEHAVIORAL_FILE), cfg.path(BEHAVIORAL_LOSS_FILE)])
}

fn stage_transitions(cfg: &PipelineConfig, st: &mut PipelineState) -> Result<Vec<PathBuf>> {
    compute_values_table(cfg, st)?;
    let table = st.table.as_ref().expect("just built");
    reward::write_transitions(&cfg.path(TRANSITIONS_FILE), &table.episodes, &table.dists)?;
    Ok(vec![cfg.path(TRANSITIONS_FILE)])
}

fn stage_policy(cfg: &PipelineConfig, st: &mut PipelineState) -> Result<Vec<PathBuf>> {
    let behavioral = st.behavioral.as_ref().expect("set by the behavioral stage");
    let states = st.states.as_ref().expect("set by the states stage");
    let table = st.table.as_ref().expect("set by the transitions stage");
    let result = train_policy(behavioral, states, table, &cfg.policy)?;
    if let Some(epoch) = result.diverged_at {
        log::warn!("policy training diverged at epoch {epoch}; keeping the last stable weights");
    }
    result.policy.save(&cfg.path(POLICY_FILE))?;
    policy::write_trace(&cfg.path(POLICY_TRACE_FILE), &result.trace)?;
    st.policy = Some(result.policy);
    Ok(vec![cfg.path(POLICY_FILE), cfg.path(POLICY_TRACE_FILE)])
}

fn stage_evaluate(cfg: &PipelineConfig, st: &mut PipelineState) -> Result<Vec<PathBuf>> {
    let ev = evaluate_policy(cfg, st)?;
    ope::write_ope_report(&cfg.path(OPE_REPORT_FILE), &ev.is, &ev.dr)?;
    ope::write_density(&cfg.path(DENSITY_FILE), &ev.kde)?;
    write_scenarios(&cfg.path(SCENARIOS_FILE), &ev.scenarios)?;
    Ok(vec![cfg.path(OPE_REPORT_FILE), cfg.path(DENSITY_FILE), cfg.path(SCENARIOS_FILE)])
}

// ── Evaluation ──────────────────────────────────────────────────────────

/// Off-policy scores of the optimized policy against the logged corpus,
/// plus the ranked counterfactual scenarios.
struct Evaluation {
    is: OpeResult,
    dr: OpeResult,
    kde: KdeSummary,
    scenarios: Vec<ScenarioReport>,
}

fn evaluate_policy(cfg: &PipelineConfig, st: &PipelineState) -> Result<Evaluation> {
    let table = st.table.as_ref().expect("set by the transitions stage");
    let states = st.states.as_ref().expect("set by the states stage");
    let policy_net = st.policy.as_ref().expect("set by the policy stage");
    let raw_returns = reward::episode_returns(
        &table.episodes,
        &ReturnConfig { gamma: cfg.ope.gamma, standardize: false },
    )?;
    let mut episodes = policy::logged_ope_episodes(table, states, &raw_returns);
    let qhat = ope::fit_qhat(&episodes, N_CLASSES, cfg.ope.gamma)?;
    let probs = policy_net.distributions(states)?;
    policy::refresh_targets(&mut episodes, table, &probs);
    let is = ope::is_value(&episodes, &cfg.ope)?;
    let dr = ope::dr_value(&episodes, &qhat, &cfg.ope)?;
    log::info!(
        "policy value: behavioral {:.4}, is {:.4}, dr {:.4}",
        raw_returns.iter().sum::<f64>() / raw_returns.len().max(1) as f64,
        is.mean,
        dr.mean
    );
    let kde = ope::kde_summary(&raw_returns, &is.values)?;
    let scenarios = scenario_reports(table, &st.values, &probs, cfg.scenario_top_k);
    Ok(Evaluation { is, dr, kde, scenarios })
}

// ── Scenario reports ────────────────────────────────────────────────────

/// One counterfactual: what the optimized policy prefers at a logged
/// possession-ending decision point, and what the swap is worth under
/// the same reward rules the logged action was scored with.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub episode_id: usize,
    pub step: usize,
    pub performed: EndingAction,
    pub performed_reward: f64,
    pub recommended: EndingAction,
    pub recommended_reward: f64,
    /// `recommended_reward - performed_reward`; zero when the policy
    /// agrees with the log.
    pub delta: f64,
    /// The policy's full distribution at the state.
    pub target_dist: [f64; N_CLASSES],
}

/// Score a candidate ending at step `t` with the logged continuation:
/// shots bank the state's value, keep actions earn the next possession's
/// value drift when the team retained the ball, and turnovers — or keeps
/// with no logged continuation to price them — cost the loss penalty.
fn counterfactual_reward(
    episode: &reward::RewardedEpisode,
    t: usize,
    action: EndingAction,
    values: &[f64],
) -> f64 {
    let tr = &episode.transitions[t];
    match action {
        EndingAction::Shot => values[tr.state_index],
        EndingAction::Out | EndingAction::Foul => {
            if tr.next_same_team {
                values[episode.transitions[t + 1].state_index] - values[tr.state_index]
            } else {
                reward::LOSS_REWARD
            }
        }
        EndingAction::Error => reward::LOSS_REWARD,
    }
}

/// Every logged decision point scored against the policy's preferred
/// ending, ranked by absolute reward delta. Ties fall back to episode
/// and step so the ordering — and the serialized report — is stable.
pub fn scenario_reports(
    table: &TransitionTable,
    values: &[f64],
    probs: &Array2<f64>,
    top_k: usize,
) -> Vec<ScenarioReport> {
    let mut reports = Vec::with_capacity(table.transition_count());
    for episode in &table.episodes {
        for (t, tr) in episode.transitions.iter().enumerate() {
            let row = probs.row(tr.state_index);
            let mut dist = [0.0; N_CLASSES];
            for (slot, &v) in dist.iter_mut().zip(row.iter()) {
                *slot = v;
            }
            let recommended = OutcomeDistribution(dist).argmax();
            let recommended_reward = counterfactual_reward(episode, t, recommended, values);
            reports.push(ScenarioReport {
                episode_id: tr.episode_id,
                step: tr.step,
                performed: tr.action,
                performed_reward: tr.reward,
                recommended,
                recommended_reward,
                delta: recommended_reward - tr.reward,
                target_dist: dist,
            });
        }
    }
    reports.sort_by(|a, b| {
        b.delta
            .abs()
            .total_cmp(&a.delta.abs())
            .then_with(|| a.episode_id.cmp(&b.episode_id))
            .then_with(|| a.step.cmp(&b.step))
    });
    reports.truncate(top_k);
    reports
}

pub const SCENARIO_HEADER: &str = "episode,step,performed,performed_reward,recommended,\
                                   recommended_reward,delta,p_shot,p_out,p_foul,p_error";

pub fn serialize_scenarios(reports: &[ScenarioReport]) -> String {
    let mut out = String::from(SCENARIO_HEADER);
    out.push('\n');
    for r in reports {
        let [p_shot, p_out, p_foul, p_error] = r.target_dist;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.episode_id,
            r.step,
            r.performed.as_str(),
            r.performed_reward,
            r.recommended.as_str(),
            r.recommended_reward,
            r.delta,
            p_shot,
            p_out,
            p_foul,
            p_error
        )
        .expect("write to string");
    }
    out
}

pub fn write_scenarios(path: &Path, reports: &[ScenarioReport]) -> Result<()> {
    fs::write(path, serialize_scenarios(reports))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

// ── Full runs ───────────────────────────────────────────────────────────

/// Run all nine stages and write the content-hash manifest. The run is a
/// pure function of the config: identical seeds produce byte-identical
/// artifacts, manifest included.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Manifest> {
    let cfg = cfg.effective()?;
    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| Error::io(cfg.out_dir.display().to_string(), e))?;
    let mut st = PipelineState::default();
    let mut manifest = Manifest::new(&cfg);
    for (i, stage) in STAGES.iter().enumerate() {
        log::info!("stage {}/{}: {}", i + 1, STAGES.len(), STAGE_NAMES[i]);
        let files = stage(&cfg, &mut st).map_err(|e| at_stage(i, e))?;
        manifest.record(STAGE_NAMES[i], &files).map_err(|e| at_stage(i, e))?;
    }
    manifest.write(&cfg.path(MANIFEST_FILE))?;
    Ok(manifest)
}

// ── Single-stage reruns ─────────────────────────────────────────────────

/// The operations the command line exposes. Most verbs map straight onto
/// one pipeline stage; `Generate`/`Ingest` are the two faces of the
/// ingest stage, and `Evaluate`/`Report` split the evaluate stage's
/// outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageVerb {
    Generate,
    Ingest,
    Segment,
    Pressure,
    States,
    TrainXg,
    TrainOutcome,
    TrainPolicy,
    Evaluate,
    Report,
}

impl StageVerb {
    fn stage(self) -> usize {
        match self {
            StageVerb::Generate | StageVerb::Ingest => 0,
            StageVerb::Segment => 1,
            StageVerb::Pressure => 2,
            StageVerb::States => 3,
            StageVerb::TrainXg => 4,
            StageVerb::TrainOutcome => 5,
            StageVerb::TrainPolicy => 7,
            StageVerb::Evaluate | StageVerb::Report => 8,
        }
    }
}

/// Earlier stages whose products a stage consumes, in restore order.
/// Cheap transforms are recomputed from the corpus artifacts; model
/// stages load their checkpoints.
fn prerequisites(stage: usize) -> &'static [usize] {
    match stage {
        0 => &[],
        1 | 2 => &[0],
        3 | 4 => &[0, 1, 2],
        5 => &[0, 1, 2, 3],
        6 => &[0, 1, 2, 3, 4, 5],
        7 => &[0, 1, 2, 3, 4, 5, 6],
        _ => &[0, 1, 2, 3, 4, 5, 6, 7],
    }
}

fn restore_stage(cfg: &PipelineConfig, st: &mut PipelineState, i: usize) -> Result<()> {
    match i {
        0 => {
            st.events = match_data::parse_event_log(&cfg.path(EVENTS_FILE))?;
            st.frames = match_data::parse_frame_log(&cfg.path(FRAMES_FILE))?;
        }
        1 => compute_segments(st),
        2 => {
            if cfg.state_type == StateType::III {
                st.pressure = pressure::parse_pressure_log(&cfg.path(PRESSURE_FILE))?;
                check_pressure_alignment(st)?;
            }
        }
        3 => st.states = Some(compute_states(cfg, st)?),
        4 => st.xg = Some(xg::read_model(&cfg.path(XG_MODEL_FILE))?),
        5 => {
            let model = BehavioralModel::load(&cfg.path(BEHAVIORAL_FILE))?;
            require_state_type("behavioral checkpoint", model.state_type, cfg.state_type)?;
            st.dists = model.predict_all(st.states.as_ref().expect("restored in order"))?;
            st.behavioral = Some(model);
        }
        6 => compute_values_table(cfg, st)?,
        7 => {
            let net = PolicyNetwork::load(&cfg.path(POLICY_FILE))?;
            require_state_type("policy checkpoint", net.state_type, cfg.state_type)?;
            st.policy = Some(net);
        }
        _ => unreachable!("stage {i} is never a prerequisite"),
    }
    Ok(())
}

fn require_state_type(what: &str, got: StateType, want: StateType) -> Result<()> {
    if got != want {
        return Err(Error::Config(format!(
            "{what} encodes state type {got} but the run is configured for {want}"
        )));
    }
    Ok(())
}

/// Rerun one stage against the artifacts already in the output directory,
/// returning the files it wrote. Prerequisite artifacts must exist;
/// errors carry the stage they belong to.
pub fn run_stage(cfg: &PipelineConfig, verb: StageVerb) -> Result<Vec<PathBuf>> {
    let mut cfg = cfg.effective()?;
    match verb {
        StageVerb::Generate => cfg.input_dir = None,
        StageVerb::Ingest if cfg.input_dir.is_none() => {
            return Err(Error::Config(
                "ingest needs an input directory; use generate for a synthetic corpus".into(),
            ));
        }
        _ => {}
    }
    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| Error::io(cfg.out_dir.display().to_string(), e))?;
    let target = verb.stage();
    let mut st = PipelineState::default();
    for &j in prerequisites(target) {
        restore_stage(&cfg, &mut st, j).map_err(|e| at_stage(j, e))?;
    }
    match verb {
        StageVerb::Evaluate => {
            let ev = evaluate_policy(&cfg, &st).map_err(|e| at_stage(target, e))?;
            ope::write_ope_report(&cfg.path(OPE_REPORT_FILE), &ev.is, &ev.dr)
                .map_err(|e| at_stage(target, e))?;
            ope::write_density(&cfg.path(DENSITY_FILE), &ev.kde)
                .map_err(|e| at_stage(target, e))?;
            Ok(vec![cfg.path(OPE_REPORT_FILE), cfg.path(DENSITY_FILE)])
        }
        StageVerb::Report => {
            let ev = evaluate_policy(&cfg, &st).map_err(|e| at_stage(target, e))?;
            write_scenarios(&cfg.path(SCENARIOS_FILE), &ev.scenarios)
                .map_err(|e| at_stage(target, e))?;
            Ok(vec![cfg.path(SCENARIOS_FILE)])
        }
        _ => STAGES[target](&cfg, &mut st).map_err(|e| at_stage(target, e)),
    }
}

// ── Tests ───────────────────────────────────────────────────────────────
