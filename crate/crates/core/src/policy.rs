//! Off-policy policy-gradient training of the target policy p(x;θ).
//!
//! The policy shares the behavioral classifier's architecture and starts
//! from its weights, so early importance weights sit near 1. Each update
//! ascends the importance-weighted objective
//! mean[ clip(p(a|s;θ)/q(a|s)) · R(τ) · ∇θ log p(a|s;θ) ]
//! over batches of logged episodes; R(τ) is the episode's normalized
//! return applied to every one of its transitions. Per-epoch quality is
//! tracked with the importance-sampling and doubly-robust estimators.
//!
//! A tabular softmax policy with the identical update rule lives
//! alongside the network: small enough to verify against enumeration
//! and finite differences, since the estimator math has no architecture
//! in it.

use std::path::Path;

use serde::{Deserialize, Serialize};
use ndarray::{Array2, Array3, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classifier::{BehavioralModel, OutcomeDistribution};
use crate::error::{Error, Result};
use crate::nn::{self, SequenceClassifier, N_CLASSES};
use crate::ope::{self, OpeConfig, OpeEpisode, OpeStep, QHatModel};
use crate::possession::{Episode, Possession};
use crate::reward::{self, ReturnConfig, RewardedEpisode};
use crate::state::{StackedStates, StateType};

/// Default step size for policy ascent.
pub const PG_LEARNING_RATE: f64 = 1e-4;
/// Default importance-weight clip bounds.
pub const PG_CLIP: (f64, f64) = (0.1, 10.0);

// ── Configuration ───────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct PGConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Episodes per gradient batch.
    pub batch_size: usize,
    pub w_min: f64,
    pub w_max: f64,
    /// Clipping is on by default; switch off to recover the raw
    /// estimator.
    pub clip: bool,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for PGConfig {
    fn default() -> Self {
        PGConfig {
            learning_rate: PG_LEARNING_RATE,
            epochs: 50,
            batch_size: 16,
            w_min: PG_CLIP.0,
            w_max: PG_CLIP.1,
            clip: true,
            gamma: 0.99,
            seed: 11,
        }
    }
}

impl PGConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if self.clip && !(0.0 < self.w_min && self.w_min <= 1.0 && 1.0 <= self.w_max) {
            return Err(Error::Config(format!(
                "clip bounds must satisfy 0 < w_min <= 1 <= w_max, got [{}, {}]",
                self.w_min, self.w_max
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        Ok(())
    }

    fn ope_config(&self) -> OpeConfig {
        OpeConfig {
            gamma: self.gamma,
            clip: self.clip.then_some((self.w_min, self.w_max)),
        }
    }

    /// Importance weight for one logged action, clipped as configured.
    fn weight(&self, p: f64, q: f64, episode: usize, step: usize) -> Result<f64> {
        if !(q > 0.0) {
            return Err(Error::ZeroPropensity { episode, step });
        }
        let w = p / q;
        Ok(if self.clip { w.clamp(self.w_min, self.w_max) } else { w })
    }
}

// ── Transition table ────────────────────────────────────────────────────

/// The policy trainer's view of the corpus: rewarded episodes in
/// (episode, step) order plus the behavioral distribution of every
/// possession. Episodes whose rewards cannot be computed are dropped
/// and their rows counted.
#[derive(Debug, Clone)]
pub struct TransitionTable {
    pub episodes: Vec<RewardedEpisode>,
    /// Behavioral distributions, indexed by possession (`state_index`).
    pub dists: Vec<OutcomeDistribution>,
    pub dropped_rows: usize,
}

impl TransitionTable {
    pub fn transition_count(&self) -> usize {
        self.episodes.iter().map(|e| e.transitions.len()).sum()
    }
}

/// Assemble the transition table from segmented episodes, possession
/// values, and the behavioral model's distributions.
pub fn build_transition_table(
    episodes: &[Episode],
    possessions: &[Possession],
    values: &[f64],
    dists: Vec<OutcomeDistribution>,
) -> Result<TransitionTable> {
    if dists.len() != possessions.len() {
        return Err(Error::Validation(format!(
            "{} behavioral distributions vs {} possessions",
            dists.len(),
            possessions.len()
        )));
    }
    for (i, d) in dists.iter().enumerate() {
        let sum: f64 = d.0.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Validation(format!(
                "behavioral distribution {i} sums to {sum}"
            )));
        }
    }
    let mut rewarded = Vec::with_capacity(episodes.len());
    let mut dropped_rows = 0usize;
    for episode in episodes {
        match reward::build_rewarded_episodes(std::slice::from_ref(episode), possessions, values)
        {
            Ok(mut one) => rewarded.append(&mut one),
            Err(err) => {
                dropped_rows += episode.possessions.len();
                log::warn!(
                    "dropping episode {} ({} rows): {err}",
                    episode.episode_id,
                    episode.possessions.len()
                );
            }
        }
    }
    if dropped_rows > 0 {
        log::warn!("transition table dropped {dropped_rows} rows in total");
    }
    Ok(TransitionTable { episodes: rewarded, dists, dropped_rows })
}

// ── Policy network ──────────────────────────────────────────────────────

/// The target policy: the classifier architecture with its own θ.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNetwork {
    pub state_type: StateType,
    pub net: SequenceClassifier,
}

impl PolicyNetwork {
    /// Start from the behavioral weights so importance weights open at 1.
    pub fn from_behavioral(behavioral: &BehavioralModel) -> PolicyNetwork {
        PolicyNetwork { state_type: behavioral.state_type, net: behavioral.net.clone() }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        nn::write_checkpoint(path, &self.net)
    }

    pub fn load(path: &Path) -> Result<PolicyNetwork> {
        let net = nn::read_checkpoint(path)?;
        let state_type = StateType::from_width(net.width).ok_or_else(|| {
            Error::Checkpoint(format!("width {} maps to no state encoding", net.width))
        })?;
        Ok(PolicyNetwork { state_type, net })
    }

    /// p(·|x) for every possession in the corpus.
    pub fn distributions(&self, states: &StackedStates) -> Result<Array2<f64>> {
        self.net.forward_chunked(&states.data, &states.true_lengths, 512)
    }
}

/// Outcome of one gradient batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgBatchStats {
    /// Estimate of the surrogate objective: mean of clipped-weight ×
    /// return over the batch transitions.
    pub objective: f64,
    pub mean_weight: f64,
    pub transitions: usize,
}

/// One ascent step on a batch of episodes. `returns[i]` is the
/// return of `table.episodes[i]`, used as the scalar multiplier for
/// every transition of that episode.
pub fn pg_update(
    policy: &mut PolicyNetwork,
    states: &StackedStates,
    table: &TransitionTable,
    episode_indices: &[usize],
    returns: &[f64],
    cfg: &PGConfig,
) -> Result<PgBatchStats> {
    cfg.validate()?;
    if returns.len() != table.episodes.len() {
        return Err(Error::Validation(format!(
            "{} returns vs {} episodes",
            returns.len(),
            table.episodes.len()
        )));
    }

    // Flatten the chosen episodes into one transition batch.
    let mut rows = Vec::new();
    for &e in episode_indices {
        let episode = table.episodes.get(e).ok_or_else(|| {
            Error::Validation(format!("episode index {e} out of range"))
        })?;
        for t in &episode.transitions {
            rows.push((t, returns[e]));
        }
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData("empty policy-gradient batch".into()));
    }

    let (_, tensor_rows, width) = states.data.dim();
    let mut x = Array3::zeros((rows.len(), tensor_rows, width));
    let mut lens = Vec::with_capacity(rows.len());
    for (slot, (t, _)) in rows.iter().enumerate() {
        if t.state_index >= states.len() {
            return Err(Error::Validation(format!(
                "transition references state {} of {}",
                t.state_index,
                states.len()
            )));
        }
        x.index_axis_mut(Axis(0), slot)
            .assign(&states.data.index_axis(Axis(0), t.state_index));
        lens.push(states.true_lengths[t.state_index]);
    }

    let cache = policy.net.forward_cached(&x, &lens)?;
    let probs = cache.probabilities();
    let batch = rows.len() as f64;
    let mut dlogits = Array2::<f64>::zeros((rows.len(), N_CLASSES));
    let mut objective = 0.0;
    let mut weight_sum = 0.0;
    for (r, (t, ret)) in rows.iter().enumerate() {
        let a = t.action.label();
        let q = table.dists[t.state_index].0[a];
        let p = probs[(r, a)];
        let w = cfg.weight(p, q, t.episode_id, t.step)?;
        weight_sum += w;
        let coef = w * ret / batch;
        objective += coef;
        // Ascent on coef·log p(a): descend its negation.
        for c in 0..N_CLASSES {
            let indicator = if c == a { 1.0 } else { 0.0 };
            dlogits[(r, c)] = -coef * (indicator - probs[(r, c)]);
        }
    }

    let grads = policy.net.backward(&cache, &dlogits);
    policy.net.sgd_step(&grads, cfg.learning_rate);
    Ok(PgBatchStats {
        objective,
        mean_weight: weight_sum / batch,
        transitions: rows.len(),
    })
}

// ── Training loop ───────────────────────────────────────────────────────

/// One line of the policy training trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyEpochStats {
    pub epoch: usize,
    pub objective: f64,
    pub mean_reward_is: f64,
    pub mean_reward_dr: f64,
}

pub const TRACE_HEADER: &str = "epoch,mean_reward_is,mean_reward_dr";

pub fn serialize_trace(trace: &[PolicyEpochStats]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for e in trace {
        out.push_str(&format!("{},{},{}\n", e.epoch, e.mean_reward_is, e.mean_reward_dr));
    }
    out
}

pub fn write_trace(path: &Path, trace: &[PolicyEpochStats]) -> Result<()> {
    std::fs::write(path, serialize_trace(trace))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Trained policy, its trace, and whether training had to abort.
#[derive(Debug, Clone)]
pub struct PolicyTrainResult {
    pub policy: PolicyNetwork,
    pub trace: Vec<PolicyEpochStats>,
    /// Epoch at which a non-finite objective forced a rollback to the
    /// last good parameters, if any.
    pub diverged_at: Option<usize>,
}

/// Logged-data views the estimators need, built once per training run.
struct OpeBase {
    episodes: Vec<OpeEpisode>,
    qhat: QHatModel,
}

fn flatten_state(states: &StackedStates, index: usize) -> Vec<f64> {
    states
        .data
        .index_axis(Axis(0), index)
        .iter()
        .copied()
        .collect()
}

/// The logged corpus as estimator episodes: features, logged actions,
/// rewards, and behavioral propensities, with the target side zeroed
/// until a candidate policy fills it via [`refresh_targets`].
pub fn logged_ope_episodes(
    table: &TransitionTable,
    states: &StackedStates,
    raw_returns: &[f64],
) -> Vec<OpeEpisode> {
    table
        .episodes
        .iter()
        .zip(raw_returns)
        .map(|(episode, &ret)| OpeEpisode {
            episode_id: episode.episode_id,
            scalar_return: ret,
            steps: episode
                .transitions
                .iter()
                .map(|t| OpeStep {
                    features: flatten_state(states, t.state_index),
                    action: t.action.label(),
                    reward: t.reward,
                    behavior_propensity: table.dists[t.state_index].0[t.action.label()],
                    target_propensity: 0.0,
                    target_dist: vec![0.0; N_CLASSES],
                })
                .collect(),
        })
        .collect()
}

fn build_ope_base(
    table: &TransitionTable,
    states: &StackedStates,
    raw_returns: &[f64],
    gamma: f64,
) -> Result<OpeBase> {
    let episodes = logged_ope_episodes(table, states, raw_returns);
    let qhat = ope::fit_qhat(&episodes, N_CLASSES, gamma)?;
    Ok(OpeBase { episodes, qhat })
}

/// Write a candidate policy's propensities into the logged episodes.
/// `probs` holds one distribution row per possession.
pub fn refresh_targets(
    base: &mut [OpeEpisode],
    table: &TransitionTable,
    probs: &Array2<f64>,
) {
    for (episode, rewarded) in base.iter_mut().zip(&table.episodes) {
        for (step, t) in episode.steps.iter_mut().zip(&rewarded.transitions) {
            let row = probs.row(t.state_index);
            step.target_propensity = row[t.action.label()];
            step.target_dist = row.to_vec();
        }
    }
}

/// Batch policy-gradient training over the transition table.
///
/// Initializes from the behavioral model, ascends the importance-
/// weighted objective over seeded episode batches, and traces IS/DR
/// value estimates each epoch. A non-finite objective or estimate rolls
/// the parameters back to the epoch's start and stops.
pub fn train_policy(
    behavioral: &BehavioralModel,
    states: &StackedStates,
    table: &TransitionTable,
    cfg: &PGConfig,
) -> Result<PolicyTrainResult> {
    cfg.validate()?;
    if table.episodes.is_empty() {
        return Err(Error::InsufficientData("transition table has no episodes".into()));
    }
    if table.dists.len() != states.len() {
        return Err(Error::Validation(format!(
            "{} behavioral distributions vs {} state tensors",
            table.dists.len(),
            states.len()
        )));
    }

    // Returns twice over: standardized for gradient scaling, raw for OPE.
    let pg_returns =
        reward::episode_returns(&table.episodes, &ReturnConfig { gamma: cfg.gamma, standardize: true })?;
    let raw_returns = reward::episode_returns(
        &table.episodes,
        &ReturnConfig { gamma: cfg.gamma, standardize: false },
    )?;

    let mut base = build_ope_base(table, states, &raw_returns, cfg.gamma)?;
    let ope_cfg = cfg.ope_config();

    let mut policy = PolicyNetwork::from_behavioral(behavioral);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9);
    let mut order: Vec<usize> = (0..table.episodes.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut diverged_at = None;

    'epochs: for epoch in 0..cfg.epochs {
        let snapshot = policy.net.clone();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }

        let mut objective = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let stats = pg_update(&mut policy, states, table, chunk, &pg_returns, cfg)?;
            if !stats.objective.is_finite() {
                log::warn!("policy training diverged at epoch {epoch}; rolling back");
                policy.net = snapshot;
                diverged_at = Some(epoch);
                break 'epochs;
            }
            objective += stats.objective * stats.transitions as f64;
            seen += stats.transitions;
        }
        let objective = objective / seen as f64;

        let probs = policy.distributions(states)?;
        refresh_targets(&mut base.episodes, table, &probs);
        let is = ope::is_value(&base.episodes, &ope_cfg)?;
        let dr = ope::dr_value(&base.episodes, &base.qhat, &ope_cfg)?;
        if !is.mean.is_finite() || !dr.mean.is_finite() {
            log::warn!("policy evaluation went non-finite at epoch {epoch}; rolling back");
            policy.net = snapshot;
            diverged_at = Some(epoch);
            break;
        }
        trace.push(PolicyEpochStats {
            epoch,
            objective,
            mean_reward_is: is.mean,
            mean_reward_dr: dr.mean,
        });
    }

    Ok(PolicyTrainResult { policy, trace, diverged_at })
}

// ── Tabular counterpart ─────────────────────────────────────────────────

/// A softmax policy over explicitly enumerated states — the same update
/// rule as the network, small enough for finite-difference and
/// enumeration oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    /// states × actions.
    pub logits: Vec<Vec<f64>>,
}

/// One logged tabular decision with its episode return.
#[derive(Debug, Clone, Copy)]
pub struct TabularSample {
    pub state: usize,
    pub action: usize,
    pub behavior_propensity: f64,
    pub episode_return: f64,
}

impl TabularPolicy {
    pub fn uniform(states: usize, actions: usize) -> TabularPolicy {
        TabularPolicy { logits: vec![vec![0.0; actions]; states] }
    }

    pub fn probs(&self, state: usize) -> Vec<f64> {
        let row = &self.logits[state];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|l| (l - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / sum).collect()
    }

    /// Objective estimate and its analytic ascent gradient — exactly
    /// the network estimator with the architecture stripped away.
    pub fn pg_gradient(
        &self,
        batch: &[TabularSample],
        cfg: &PGConfig,
    ) -> Result<(f64, Vec<Vec<f64>>)> {
        if batch.is_empty() {
            return Err(Error::InsufficientData("empty policy-gradient batch".into()));
        }
        let mut grad: Vec<Vec<f64>> =
            self.logits.iter().map(|row| vec![0.0; row.len()]).collect();
        let mut objective = 0.0;
        let scale = 1.0 / batch.len() as f64;
        for (i, sample) in batch.iter().enumerate() {
            let probs = self.probs(sample.state);
            let p = probs[sample.action];
            let w = cfg.weight(p, sample.behavior_propensity, i, 0)?;
            let coef = w * sample.episode_return * scale;
            objective += coef;
            for (c, g) in grad[sample.state].iter_mut().enumerate() {
                let indicator = if c == sample.action { 1.0 } else { 0.0 };
                *g += coef * (indicator - probs[c]);
            }
        }
        Ok((objective, grad))
    }

    pub fn ascend(&mut self, grad: &[Vec<f64>], learning_rate: f64) {
        for (row, g) in self.logits.iter_mut().zip(grad) {
            for (l, gi) in row.iter_mut().zip(g) {
                *l += learning_rate * gi;
            }
        }
    }
}

// ── Tests ───────────────────────────────────────────────────────────────
