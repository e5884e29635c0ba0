//! Possession values, per-transition rewards, and discounted episode
//! returns.
//!
//! The value of holding the ball is PV = P(shot | x) · P(goal | shot, x):
//! the behavioral classifier supplies the first factor, the shot-quality
//! model the second. Rewards then follow the ending action: a shot banks
//! the current PV, keeping possession earns the change in PV, and losing
//! the ball costs a flat 0.1. Episode returns are discount-weighted
//! means of (optionally corpus-standardized) rewards.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::OutcomeDistribution;
use crate::error::{Error, Result};
use crate::match_data::Team;
use crate::possession::{EndingAction, Episode, Possession};

/// Penalty for any transition that surrenders the ball.
pub const LOSS_REWARD: f64 = -0.1;
/// Discount used throughout.
pub const DEFAULT_GAMMA: f64 = 0.99;

fn check_probability(value: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&value) || !value.is_finite() {
        return Err(Error::ProbabilityRange { value });
    }
    Ok(value)
}

// ── Possession value ────────────────────────────────────────────────────

/// PV = P(shot | x) · P(goal | shot, x) = P(goal, shot | x).
pub fn possession_value(p_shot: f64, p_goal_given_shot: f64) -> Result<f64> {
    Ok(check_probability(p_shot)? * check_probability(p_goal_given_shot)?)
}

/// Vectorized PV over a corpus: classifier shot mass × shot quality,
/// aligned by possession index.
pub fn possession_values(
    dists: &[OutcomeDistribution],
    goal_probs: &[f64],
) -> Result<Vec<f64>> {
    if dists.len() != goal_probs.len() {
        return Err(Error::Validation(format!(
            "{} outcome distributions vs {} goal probabilities",
            dists.len(),
            goal_probs.len()
        )));
    }
    dists
        .iter()
        .zip(goal_probs)
        .map(|(d, &g)| possession_value(d.p_shot(), g))
        .collect()
}

// ── Per-transition rewards ──────────────────────────────────────────────

/// Reward for ending a possession: shots bank the current value, kept
/// possessions earn the value change, losses cost [`LOSS_REWARD`].
/// `episode` and `step` only contextualize the missing-next-value error.
pub fn action_reward(
    pv_current: f64,
    pv_next: Option<f64>,
    action: EndingAction,
    next_same_team: bool,
    episode: usize,
    step: usize,
) -> Result<f64> {
    check_probability(pv_current)?;
    if let Some(next) = pv_next {
        check_probability(next)?;
    }
    if action == EndingAction::Shot {
        return Ok(pv_current);
    }
    if next_same_team {
        let next = pv_next.ok_or(Error::MissingNextValue { episode, step })?;
        return Ok(next - pv_current);
    }
    Ok(LOSS_REWARD)
}

/// One row of the transition table: a possession inside an episode, the
/// action that ended it, and its reward. The state itself is referenced
/// by index into the stacked tensor corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardedTransition {
    pub episode_id: usize,
    /// Step within the episode.
    pub step: usize,
    /// Row in the possession slice / stacked tensors.
    pub state_index: usize,
    pub action: EndingAction,
    pub reward: f64,
    pub next_same_team: bool,
}

/// An episode with rewards attached to every step. `episode_reward` is
/// the plain sum of step rewards — the per-episode quantity scenario
/// reports aggregate.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardedEpisode {
    pub episode_id: usize,
    pub team: Team,
    pub transitions: Vec<RewardedTransition>,
    pub episode_reward: f64,
}

/// Attach rewards to every episode step. `values[i]` must be the PV of
/// possession `i`; within an episode every possession but the last
/// keeps the ball, so the last step is a shot or a loss and earlier
/// steps earn PV differences.
pub fn build_rewarded_episodes(
    episodes: &[Episode],
    possessions: &[Possession],
    values: &[f64],
) -> Result<Vec<RewardedEpisode>> {
    if values.len() != possessions.len() {
        return Err(Error::Validation(format!(
            "{} possession values vs {} possessions",
            values.len(),
            possessions.len()
        )));
    }
    episodes
        .iter()
        .map(|episode| {
            let steps = episode.possessions.len();
            let mut transitions = Vec::with_capacity(steps);
            let mut episode_reward = 0.0;
            for (t, &idx) in episode.possessions.iter().enumerate() {
                let possession = possessions.get(idx).ok_or_else(|| {
                    Error::Validation(format!(
                        "episode {} references possession {idx} out of range",
                        episode.episode_id
                    ))
                })?;
                let next_same_team = t + 1 < steps;
                let pv_next = if next_same_team {
                    Some(values[episode.possessions[t + 1]])
                } else {
                    None
                };
                let reward = action_reward(
                    values[idx],
                    pv_next,
                    possession.ending,
                    next_same_team,
                    episode.episode_id,
                    t,
                )?;
                episode_reward += reward;
                transitions.push(RewardedTransition {
                    episode_id: episode.episode_id,
                    step: t,
                    state_index: idx,
                    action: possession.ending,
                    reward,
                    next_same_team,
                });
            }
            Ok(RewardedEpisode {
                episode_id: episode.episode_id,
                team: episode.team,
                transitions,
                episode_reward,
            })
        })
        .collect()
}

// ── Returns ─────────────────────────────────────────────────────────────

/// Discounting and standardization knobs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct ReturnConfig {
    pub gamma: f64,
    /// Standardize rewards to zero mean / unit variance across the whole
    /// corpus before computing returns.
    pub standardize: bool,
}

impl Default for ReturnConfig {
    fn default() -> Self {
        ReturnConfig { gamma: DEFAULT_GAMMA, standardize: true }
    }
}

impl ReturnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Discount-weighted mean over the episode horizon:
/// R = Σ γ^t r_t / Σ γ^t, both sums over t = 0..T−1. The weights appear
/// in the denominator too, so constant rewards return themselves and
/// trailing zero rewards pull the return toward zero rather than
/// leaving it unchanged.
pub fn episode_return(rewards: &[f64], cfg: &ReturnConfig) -> Result<f64> {
    cfg.validate()?;
    if rewards.is_empty() {
        return Err(Error::InsufficientData("episode with no rewards".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut weight = 1.0;
    for &r in rewards {
        num += weight * r;
        den += weight;
        weight *= cfg.gamma;
    }
    Ok(num / den)
}

/// Returns for a whole corpus. Standardization (when enabled) is
/// corpus-global — one mean and one population variance over every
/// transition reward — so reruns and subsets cannot disagree about the
/// scale. Output is aligned with `episodes`.
pub fn episode_returns(episodes: &[RewardedEpisode], cfg: &ReturnConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let (shift, scale) = if cfg.standardize {
        let n: usize = episodes.iter().map(|e| e.transitions.len()).sum();
        if n == 0 {
            return Err(Error::InsufficientData("no transitions to standardize".into()));
        }
        let mean = episodes
            .iter()
            .flat_map(|e| e.transitions.iter().map(|t| t.reward))
            .sum::<f64>()
            / n as f64;
        let var = episodes
            .iter()
            .flat_map(|e| e.transitions.iter().map(|t| t.reward))
            .map(|r| (r - mean) * (r - mean))
            .sum::<f64>()
            / n as f64;
        let std = var.sqrt();
        (mean, if std < 1e-12 { 1.0 } else { std })
    } else {
        (0.0, 1.0)
    };

    episodes
        .iter()
        .map(|e| {
            let rewards: Vec<f64> =
                e.transitions.iter().map(|t| (t.reward - shift) / scale).collect();
            episode_return(&rewards, cfg)
        })
        .collect()
}

// ── Transition table ────────────────────────────────────────────────────

pub const TRANSITION_HEADER: &str =
    "action,q_shot,q_out,q_foul,q_error,episode,reward,possession_number,team,state_ref";

/// The transition table as delimited text: one row per episode step with
/// the behavioral distribution of the possession it ends.
pub fn serialize_transitions(
    episodes: &[RewardedEpisode],
    dists: &[OutcomeDistribution],
) -> Result<String> {
    let mut out = String::from(TRANSITION_HEADER);
    out.push('\n');
    for episode in episodes {
        for t in &episode.transitions {
            let dist = dists.get(t.state_index).ok_or_else(|| {
                Error::Validation(format!(
                    "transition references distribution {} of {}",
                    t.state_index,
                    dists.len()
                ))
            })?;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                t.action.as_str(),
                dist.0[0],
                dist.0[1],
                dist.0[2],
                dist.0[3],
                t.episode_id,
                t.reward,
                t.step,
                episode.team.as_str(),
                t.state_index,
            ));
        }
    }
    Ok(out)
}

pub fn write_transitions(
    path: &Path,
    episodes: &[RewardedEpisode],
    dists: &[OutcomeDistribution],
) -> Result<()> {
    std::fs::write(path, serialize_transitions(episodes, dists)?)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

// ── Tests ───────────────────────────────────────────────────────────────
