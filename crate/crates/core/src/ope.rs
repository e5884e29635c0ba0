//! Off-policy evaluation of a target policy from logged episodes.
//!
//! Two estimators over the same logged data: ordinary importance
//! sampling (trajectory ratio times episode return) and the doubly
//! robust backward recursion that corrects a per-action regression
//! model Q̂ with importance-weighted residuals. A Gaussian-KDE summary
//! compares behavioral and optimized value distributions.
//!
//! Everything here is numeric: callers supply per-step behavioral and
//! target propensities, so the estimators work identically for the
//! CNN-LSTM policy and for tiny tabular policies used as oracles.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Ridge strength for the Q̂ regressions (intercept unpenalized).
pub const QHAT_RIDGE: f64 = 1.0;
/// Default per-step importance-ratio clip, shared with policy training.
pub const DEFAULT_CLIP: (f64, f64) = (0.1, 10.0);
/// Points in a KDE density curve.
pub const KDE_GRID_POINTS: usize = 512;

// ── Logged data ─────────────────────────────────────────────────────────

/// One logged decision: the state's features (for Q̂), the action taken,
/// its reward, and both policies' probabilities for it.
#[derive(Debug, Clone, PartialEq)]
pub struct OpeStep {
    pub features: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    /// q(a | s): the behavioral policy's probability of the logged action.
    pub behavior_propensity: f64,
    /// p(a | s): the target policy's probability of the logged action.
    pub target_propensity: f64,
    /// The target policy's full distribution at this state, for V̂.
    pub target_dist: Vec<f64>,
}

/// A logged episode plus the scalar return the IS estimator reweights.
#[derive(Debug, Clone, PartialEq)]
pub struct OpeEpisode {
    pub episode_id: usize,
    pub scalar_return: f64,
    pub steps: Vec<OpeStep>,
}

/// Discount and ratio-clip settings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct OpeConfig {
    pub gamma: f64,
    /// Per-step ratio clip bounds; `None` disables clipping.
    pub clip: Option<(f64, f64)>,
}

impl Default for OpeConfig {
    fn default() -> Self {
        OpeConfig { gamma: 0.99, clip: Some(DEFAULT_CLIP) }
    }
}

impl OpeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if let Some((lo, hi)) = self.clip {
            if !(0.0 < lo && lo <= 1.0 && 1.0 <= hi) {
                return Err(Error::Config(format!(
                    "clip bounds must satisfy 0 < lo <= 1 <= hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    fn clip_ratio(&self, rho: f64) -> f64 {
        match self.clip {
            Some((lo, hi)) => rho.clamp(lo, hi),
            None => rho,
        }
    }
}

// ── Results ─────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorTag {
    ImportanceSampling,
    DoublyRobust,
}

impl EstimatorTag {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorTag::ImportanceSampling => "is",
            EstimatorTag::DoublyRobust => "dr",
        }
    }
}

/// Per-episode values and their summary. Episodes whose logged action
/// ever has zero behavioral propensity are excluded and counted; if
/// nothing survives the result is degenerate and the moments are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct OpeResult {
    pub estimator: EstimatorTag,
    pub episode_ids: Vec<usize>,
    pub values: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of the per-episode values.
    pub std: f64,
    pub excluded: usize,
    pub degenerate: bool,
}

fn summarize(
    estimator: EstimatorTag,
    episode_ids: Vec<usize>,
    values: Vec<f64>,
    excluded: usize,
) -> OpeResult {
    if values.is_empty() {
        return OpeResult {
            estimator,
            episode_ids,
            values,
            mean: f64::NAN,
            std: f64::NAN,
            excluded,
            degenerate: true,
        };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    OpeResult {
        estimator,
        episode_ids,
        values,
        mean,
        std: var.sqrt(),
        excluded,
        degenerate: false,
    }
}

fn episode_ratios(episode: &OpeEpisode, cfg: &OpeConfig) -> Option<Vec<f64>> {
    let mut ratios = Vec::with_capacity(episode.steps.len());
    for step in &episode.steps {
        if !(step.behavior_propensity > 0.0) {
            return None;
        }
        ratios.push(cfg.clip_ratio(step.target_propensity / step.behavior_propensity));
    }
    Some(ratios)
}

// ── Importance sampling ─────────────────────────────────────────────────

/// Ordinary per-episode importance sampling: value = (Π_t ρ_t) · R(τ).
pub fn is_value(episodes: &[OpeEpisode], cfg: &OpeConfig) -> Result<OpeResult> {
    cfg.validate()?;
    if episodes.is_empty() {
        return Err(Error::InsufficientData("no episodes to evaluate".into()));
    }
    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut excluded = 0usize;
    for episode in episodes {
        match episode_ratios(episode, cfg) {
            Some(ratios) => {
                let weight: f64 = ratios.iter().product();
                ids.push(episode.episode_id);
                values.push(weight * episode.scalar_return);
            }
            None => excluded += 1,
        }
    }
    if excluded > 0 {
        log::warn!("importance sampling excluded {excluded} episodes with zero propensity");
    }
    Ok(summarize(EstimatorTag::ImportanceSampling, ids, values, excluded))
}

// ── Q̂ regression ────────────────────────────────────────────────────────

/// Per-action ridge regression from state features to observed
/// discounted reward-to-go. Weight layout: one row per action, features
/// first, unpenalized intercept last.
#[derive(Debug, Clone, PartialEq)]
pub struct QHatModel {
    pub dim: usize,
    pub weights: Vec<Vec<f64>>,
    /// Actions that had no logged samples and were left at zero.
    pub zero_actions: Vec<usize>,
}

impl QHatModel {
    /// All-zero model: collapses doubly robust into step-wise IS.
    pub fn zero(dim: usize, actions: usize) -> QHatModel {
        QHatModel { dim, weights: vec![vec![0.0; dim + 1]; actions], zero_actions: (0..actions).collect() }
    }

    /// Explicit coefficients (exact oracles in tests).
    pub fn from_weights(weights: Vec<Vec<f64>>) -> Result<QHatModel> {
        let dim = weights
            .first()
            .map(|w| w.len().saturating_sub(1))
            .ok_or_else(|| Error::Validation("Q-hat needs at least one action row".into()))?;
        if weights.iter().any(|w| w.len() != dim + 1) {
            return Err(Error::Validation("Q-hat rows must share one width".into()));
        }
        Ok(QHatModel { dim, weights, zero_actions: Vec::new() })
    }

    pub fn actions(&self) -> usize {
        self.weights.len()
    }

    /// Q̂(s, a).
    pub fn q(&self, features: &[f64], action: usize) -> f64 {
        let w = &self.weights[action];
        let mut out = w[self.dim];
        for (x, wi) in features.iter().zip(w) {
            out += x * wi;
        }
        out
    }

    /// V̂(s) = Σ_a p(a|s) · Q̂(s, a) under the target distribution.
    pub fn v(&self, features: &[f64], target_dist: &[f64]) -> f64 {
        target_dist
            .iter()
            .enumerate()
            .map(|(a, p)| p * self.q(features, a))
            .sum()
    }
}

/// Fit Q̂ on logged episodes: targets are forward discounted reward
/// sums truncated at episode end; one ridge regression per action,
/// intercept unpenalized. Actions never logged stay at zero and are
/// flagged.
pub fn fit_qhat(episodes: &[OpeEpisode], n_actions: usize, gamma: f64) -> Result<QHatModel> {
    if episodes.is_empty() || episodes.iter().all(|e| e.steps.is_empty()) {
        return Err(Error::InsufficientData("no transitions to fit Q-hat on".into()));
    }
    let dim = episodes
        .iter()
        .flat_map(|e| e.steps.first())
        .map(|s| s.features.len())
        .next()
        .expect("nonempty");

    // (features, reward-to-go) pairs per action.
    let mut xs: Vec<Vec<&[f64]>> = vec![Vec::new(); n_actions];
    let mut ys: Vec<Vec<f64>> = vec![Vec::new(); n_actions];
    for episode in episodes {
        let mut to_go = 0.0;
        let mut targets = vec![0.0; episode.steps.len()];
        for (t, step) in episode.steps.iter().enumerate().rev() {
            to_go = step.reward + gamma * to_go;
            targets[t] = to_go;
        }
        for (step, &y) in episode.steps.iter().zip(&targets) {
            if step.features.len() != dim {
                return Err(Error::WidthMismatch { expected: dim, got: step.features.len() });
            }
            if step.action >= n_actions {
                return Err(Error::Validation(format!(
                    "logged action {} outside the {n_actions} actions",
                    step.action
                )));
            }
            xs[step.action].push(&step.features);
            ys[step.action].push(y);
        }
    }

    let mut weights = Vec::with_capacity(n_actions);
    let mut zero_actions = Vec::new();
    for a in 0..n_actions {
        if xs[a].is_empty() {
            weights.push(vec![0.0; dim + 1]);
            zero_actions.push(a);
            continue;
        }
        weights.push(ridge_fit(&xs[a], &ys[a], dim)?);
    }
    if !zero_actions.is_empty() {
        log::warn!("Q-hat left {} never-logged actions at zero", zero_actions.len());
    }
    Ok(QHatModel { dim, weights, zero_actions })
}

/// Normal-equation ridge solve with trailing unpenalized intercept.
fn ridge_fit(xs: &[&[f64]], ys: &[f64], dim: usize) -> Result<Vec<f64>> {
    let d = dim + 1;
    let mut xtx = DMatrix::<f64>::zeros(d, d);
    let mut xty = DVector::<f64>::zeros(d);
    let mut row = vec![0.0; d];
    for (x, &y) in xs.iter().zip(ys) {
        row[..dim].copy_from_slice(x);
        row[dim] = 1.0;
        for i in 0..d {
            for j in i..d {
                xtx[(i, j)] += row[i] * row[j];
            }
            xty[i] += row[i] * y;
        }
    }
    for i in 0..d {
        for j in 0..i {
            xtx[(i, j)] = xtx[(j, i)];
        }
    }
    for i in 0..dim {
        xtx[(i, i)] += QHAT_RIDGE;
    }
    let solved = Cholesky::new(xtx.clone())
        .or_else(|| {
            let mut bumped = xtx;
            for i in 0..d {
                bumped[(i, i)] += 1e-8;
            }
            Cholesky::new(bumped)
        })
        .ok_or_else(|| Error::Validation("Q-hat normal equations are singular".into()))?;
    let w = solved.solve(&xty);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("Q-hat produced non-finite coefficients".into()));
    }
    Ok(w.iter().copied().collect())
}

// ── Doubly robust ───────────────────────────────────────────────────────

/// Doubly robust value per episode via the backward recursion
/// v ← V̂(s_t) + ρ_t · (r_t + γ·v − Q̂(s_t, a_t)), seeded with v = 0
/// past the horizon. With Q̂ ≡ 0 this collapses to step-wise IS.
pub fn dr_value(episodes: &[OpeEpisode], qhat: &QHatModel, cfg: &OpeConfig) -> Result<OpeResult> {
    cfg.validate()?;
    if episodes.is_empty() {
        return Err(Error::InsufficientData("no episodes to evaluate".into()));
    }
    let mut ids = Vec::new();
    let mut values = Vec::new();
    let mut excluded = 0usize;
    for episode in episodes {
        let Some(ratios) = episode_ratios(episode, cfg) else {
            excluded += 1;
            continue;
        };
        let mut v = 0.0;
        for (step, &rho) in episode.steps.iter().zip(&ratios).rev() {
            let v_hat = qhat.v(&step.features, &step.target_dist);
            let q_hat = qhat.q(&step.features, step.action);
            v = v_hat + rho * (step.reward + cfg.gamma * v - q_hat);
        }
        ids.push(episode.episode_id);
        values.push(v);
    }
    if excluded > 0 {
        log::warn!("doubly robust excluded {excluded} episodes with zero propensity");
    }
    Ok(summarize(EstimatorTag::DoublyRobust, ids, values, excluded))
}

// ── KDE summary ─────────────────────────────────────────────────────────

/// Gaussian kernel densities of behavioral and optimized per-episode
/// values on one shared grid, with the moments scenario reports quote.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeSummary {
    pub grid: Vec<f64>,
    pub density_behavioral: Vec<f64>,
    pub density_optimal: Vec<f64>,
    pub mean_behavioral: f64,
    pub mean_optimal: f64,
    pub var_behavioral: f64,
    pub var_optimal: f64,
    pub mass_above_zero_behavioral: f64,
    pub mass_above_zero_optimal: f64,
    pub bandwidth_behavioral: f64,
    pub bandwidth_optimal: f64,
}

fn moments(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Scott's rule σ·n^(−1/5); zero spread degrades to a near-delta kernel.
fn scott_bandwidth(values: &[f64]) -> f64 {
    let (mean, var) = moments(values);
    let sigma = var.sqrt();
    if sigma < 1e-12 {
        log::warn!("zero-variance sample: KDE falls back to a near-delta kernel");
        return 1e-9 * (1.0 + mean.abs());
    }
    sigma * (values.len() as f64).powf(-0.2)
}

fn density_on(grid: &[f64], values: &[f64], h: f64) -> Vec<f64> {
    let norm = 1.0 / (values.len() as f64 * h * (2.0 * PI).sqrt());
    grid.iter()
        .map(|&x| {
            norm * values
                .iter()
                .map(|&v| {
                    let z = (x - v) / h;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
        })
        .collect()
}

fn trapezoid_above_zero(grid: &[f64], density: &[f64]) -> f64 {
    let mut mass = 0.0;
    for i in 1..grid.len() {
        let (x0, x1) = (grid[i - 1], grid[i]);
        if x1 <= 0.0 {
            continue;
        }
        let (y0, y1) = (density[i - 1], density[i]);
        if x0 >= 0.0 {
            mass += 0.5 * (y0 + y1) * (x1 - x0);
        } else {
            // Straddling segment: keep the part right of zero.
            let t = -x0 / (x1 - x0);
            let y_at_zero = y0 + t * (y1 - y0);
            mass += 0.5 * (y_at_zero + y1) * x1;
        }
    }
    mass
}

/// Density curves of the two value samples on a shared 512-point grid
/// spanning both ranges plus five bandwidths of margin.
pub fn kde_summary(behavioral: &[f64], optimal: &[f64]) -> Result<KdeSummary> {
    if behavioral.len() < 10 || optimal.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "KDE needs at least 10 values per side, got {} and {}",
            behavioral.len(),
            optimal.len()
        )));
    }
    let h_b = scott_bandwidth(behavioral);
    let h_o = scott_bandwidth(optimal);
    let margin = 5.0 * h_b.max(h_o);
    let lo = behavioral
        .iter()
        .chain(optimal)
        .copied()
        .fold(f64::INFINITY, f64::min)
        - margin;
    let hi = behavioral
        .iter()
        .chain(optimal)
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
        + margin;
    let step = (hi - lo) / (KDE_GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..KDE_GRID_POINTS).map(|i| lo + step * i as f64).collect();

    let density_behavioral = density_on(&grid, behavioral, h_b);
    let density_optimal = density_on(&grid, optimal, h_o);
    let (mean_b, var_b) = moments(behavioral);
    let (mean_o, var_o) = moments(optimal);
    Ok(KdeSummary {
        mass_above_zero_behavioral: trapezoid_above_zero(&grid, &density_behavioral),
        mass_above_zero_optimal: trapezoid_above_zero(&grid, &density_optimal),
        grid,
        density_behavioral,
        density_optimal,
        mean_behavioral: mean_b,
        mean_optimal: mean_o,
        var_behavioral: var_b,
        var_optimal: var_o,
        bandwidth_behavioral: h_b,
        bandwidth_optimal: h_o,
    })
}

// ── Reports ─────────────────────────────────────────────────────────────

pub const OPE_REPORT_HEADER: &str = "episode_id,value_is,value_dr";
pub const DENSITY_HEADER: &str = "x,density_behavioral,density_optimal";

/// Per-episode table of both estimators. The two results must cover the
/// same episodes in the same order (they exclude by the same rule).
pub fn serialize_ope_report(is: &OpeResult, dr: &OpeResult) -> Result<String> {
    if is.episode_ids != dr.episode_ids {
        return Err(Error::Validation(
            "IS and DR results cover different episode sets".into(),
        ));
    }
    let mut out = String::from(OPE_REPORT_HEADER);
    out.push('\n');
    for ((id, v_is), v_dr) in is.episode_ids.iter().zip(&is.values).zip(&dr.values) {
        out.push_str(&format!("{id},{v_is},{v_dr}\n"));
    }
    Ok(out)
}

pub fn serialize_density(summary: &KdeSummary) -> String {
    let mut out = String::from(DENSITY_HEADER);
    out.push('\n');
    for ((x, b), o) in summary
        .grid
        .iter()
        .zip(&summary.density_behavioral)
        .zip(&summary.density_optimal)
    {
        out.push_str(&format!("{x},{b},{o}\n"));
    }
    out
}

pub fn write_ope_report(path: &Path, is: &OpeResult, dr: &OpeResult) -> Result<()> {
    std::fs::write(path, serialize_ope_report(is, dr)?)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn write_density(path: &Path, summary: &KdeSummary) -> Result<()> {
    std::fs::write(path, serialize_density(summary))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

// ── Tests ───────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Two-state, two-action MDP with a short fixed horizon: small
    /// enough to evaluate the target policy exactly by backward
    /// induction, rich enough to separate the estimators.
    struct Mdp {
        behavior: [[f64; 2]; 2],
        target: [[f64; 2]; 2],
        /// trans[s][a][s'].
        trans: [[[f64; 2]; 2]; 2],
        reward: [[f64; 2]; 2],
        horizon: usize,
        start: usize,
    }

    impl Mdp {
        fn example() -> Mdp {
            Mdp {
                behavior: [[0.6, 0.4], [0.5, 0.5]],
                target: [[0.8, 0.2], [0.3, 0.7]],
                trans: [[[0.7, 0.3], [0.2, 0.8]], [[0.5, 0.5], [0.1, 0.9]]],
                reward: [[0.9, -0.2], [0.1, 0.6]],
                horizon: 3,
                start: 0,
            }
        }

        /// Feature layout: one-hot over (step, state).
        fn feature_dim(&self) -> usize {
            2 * self.horizon
        }

        fn features(&self, t: usize, s: usize) -> Vec<f64> {
            let mut x = vec![0.0; self.feature_dim()];
            x[t * 2 + s] = 1.0;
            x
        }

        /// Exact state-action values of the target policy per step,
        /// by backward induction: q[t][s][a].
        fn exact_q(&self, gamma: f64) -> Vec<[[f64; 2]; 2]> {
            let mut v_next = [0.0f64; 2];
            let mut per_step = vec![[[0.0; 2]; 2]; self.horizon];
            for t in (0..self.horizon).rev() {
                let mut v_here = [0.0; 2];
                for s in 0..2 {
                    for a in 0..2 {
                        let future: f64 =
                            (0..2).map(|s2| self.trans[s][a][s2] * v_next[s2]).sum();
                        per_step[t][s][a] = self.reward[s][a] + gamma * future;
                    }
                    v_here[s] =
                        (0..2).map(|a| self.target[s][a] * per_step[t][s][a]).sum();
                }
                v_next = v_here;
            }
            per_step
        }

        /// True target-policy value of the discounted reward sum.
        fn true_value(&self, gamma: f64) -> f64 {
            let q = self.exact_q(gamma);
            (0..2)
                .map(|a| self.target[self.start][a] * q[0][self.start][a])
                .sum()
        }

        /// Q̂ loaded with the exact per-(step, state) values.
        fn exact_qhat(&self, gamma: f64) -> QHatModel {
            let q = self.exact_q(gamma);
            let mut weights = vec![vec![0.0; self.feature_dim() + 1]; 2];
            for t in 0..self.horizon {
                for s in 0..2 {
                    for (a, row) in weights.iter_mut().enumerate() {
                        row[t * 2 + s] = q[t][s][a];
                    }
                }
            }
            QHatModel::from_weights(weights).unwrap()
        }

        fn sample_episode(&self, id: usize, gamma: f64, rng: &mut ChaCha8Rng) -> OpeEpisode {
            let mut s = self.start;
            let mut steps = Vec::with_capacity(self.horizon);
            let mut scalar_return = 0.0;
            let mut discount = 1.0;
            for t in 0..self.horizon {
                let a = if rng.gen_range(0.0..1.0) < self.behavior[s][0] { 0 } else { 1 };
                let r = self.reward[s][a];
                scalar_return += discount * r;
                discount *= gamma;
                steps.push(OpeStep {
                    features: self.features(t, s),
                    action: a,
                    reward: r,
                    behavior_propensity: self.behavior[s][a],
                    target_propensity: self.target[s][a],
                    target_dist: self.target[s].to_vec(),
                });
                s = if rng.gen_range(0.0..1.0) < self.trans[s][a][0] { 0 } else { 1 };
            }
            OpeEpisode { episode_id: id, scalar_return, steps }
        }

        fn sample_corpus(&self, n: usize, gamma: f64, seed: u64) -> Vec<OpeEpisode> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|i| self.sample_episode(i, gamma, &mut rng)).collect()
        }
    }

    fn cfg_unclipped(gamma: f64) -> OpeConfig {
        OpeConfig { gamma, clip: None }
    }

    #[test]
    fn behavioral_target_reduces_is_to_the_empirical_mean() {
        let mdp = Mdp::example();
        let mut episodes = mdp.sample_corpus(200, 0.99, 3);
        for e in &mut episodes {
            for s in &mut e.steps {
                s.target_propensity = s.behavior_propensity;
            }
        }
        let result = is_value(&episodes, &OpeConfig::default()).unwrap();
        let empirical =
            episodes.iter().map(|e| e.scalar_return).sum::<f64>() / episodes.len() as f64;
        assert_eq!(result.mean, empirical);
        assert_eq!(result.excluded, 0);
        assert!(!result.degenerate);
    }

    #[test]
    fn is_estimates_the_enumerated_target_value() {
        let gamma = 0.99;
        let mdp = Mdp::example();
        let truth = mdp.true_value(gamma);
        let episodes = mdp.sample_corpus(10_000, gamma, 7);
        let result = is_value(&episodes, &OpeConfig { gamma, clip: Some(DEFAULT_CLIP) }).unwrap();
        assert!(
            (result.mean - truth).abs() < 0.05,
            "IS mean {} vs true value {truth}",
            result.mean
        );
    }

    #[test]
    fn is_mean_over_replications_brackets_the_truth() {
        let gamma = 0.99;
        let mdp = Mdp::example();
        let truth = mdp.true_value(gamma);
        let cfg = OpeConfig { gamma, clip: Some(DEFAULT_CLIP) };
        let means: Vec<f64> = (0..100)
            .map(|rep| {
                let episodes = mdp.sample_corpus(2_000, gamma, 1000 + rep);
                is_value(&episodes, &cfg).unwrap().mean
            })
            .collect();
        let grand = means.iter().sum::<f64>() / means.len() as f64;
        let var = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>()
            / means.len() as f64;
        let se = (var / means.len() as f64).sqrt();
        assert!(
            (grand - truth).abs() < 2.0 * se,
            "grand mean {grand} vs truth {truth} (se {se})"
        );
    }

    #[test]
    fn unsupported_target_degenerates() {
        let mdp = Mdp::example();
        let mut episodes = mdp.sample_corpus(50, 0.99, 11);
        for e in &mut episodes {
            for s in &mut e.steps {
                s.behavior_propensity = 0.0;
            }
        }
        let result = is_value(&episodes, &OpeConfig::default()).unwrap();
        assert!(result.degenerate);
        assert_eq!(result.excluded, 50);
        assert!(result.mean.is_nan());
    }

    #[test]
    fn dr_with_exact_qhat_is_accurate_and_tighter_than_is() {
        let gamma = 0.99;
        let mdp = Mdp::example();
        let truth = mdp.true_value(gamma);
        let qhat = mdp.exact_qhat(gamma);
        let cfg = OpeConfig { gamma, clip: Some(DEFAULT_CLIP) };

        let episodes = mdp.sample_corpus(1_000, gamma, 17);
        let dr = dr_value(&episodes, &qhat, &cfg).unwrap();
        assert!((dr.mean - truth).abs() < 0.02, "DR mean {} vs {truth}", dr.mean);

        // Paired replications: the spread of DR means must sit strictly
        // below the spread of IS means.
        let mut is_means = Vec::with_capacity(100);
        let mut dr_means = Vec::with_capacity(100);
        for rep in 0..100 {
            let sample = mdp.sample_corpus(400, gamma, 5000 + rep);
            is_means.push(is_value(&sample, &cfg).unwrap().mean);
            dr_means.push(dr_value(&sample, &qhat, &cfg).unwrap().mean);
        }
        let (_, var_is) = moments(&is_means);
        let (_, var_dr) = moments(&dr_means);
        assert!(
            var_dr < var_is,
            "DR variance {var_dr} not below IS variance {var_is}"
        );
    }

    #[test]
    fn zero_qhat_collapses_dr_to_stepwise_is() {
        let mdp = Mdp::example();
        for gamma in [1.0, 0.99] {
            let episodes = mdp.sample_corpus(100, gamma, 23);
            let qhat = QHatModel::zero(mdp.feature_dim(), 2);
            let cfg = cfg_unclipped(gamma);
            let dr = dr_value(&episodes, &qhat, &cfg).unwrap();
            for (episode, value) in episodes.iter().zip(&dr.values) {
                // Step-wise IS: Σ_t γ^t (Π_{k≤t} ρ_k) r_t.
                let mut cumulative = 1.0;
                let mut expected = 0.0;
                for (t, step) in episode.steps.iter().enumerate() {
                    cumulative *= step.target_propensity / step.behavior_propensity;
                    expected += gamma.powi(t as i32) * cumulative * step.reward;
                }
                assert!(
                    (value - expected).abs() < 1e-12,
                    "gamma {gamma}: DR {value} vs step-wise IS {expected}"
                );
            }
        }
    }

    #[test]
    fn single_step_recursion_base_case() {
        let features = vec![1.0, 0.0];
        let qhat = QHatModel::from_weights(vec![vec![0.45, 0.0, 0.0], vec![0.2, 0.0, 0.0]])
            .unwrap();
        // Q̂(s, a₀) = 0.45 = r, target distribution (0.9, 0.1):
        // V̂ = 0.9·0.45 + 0.1·0.2 = 0.425, and with ρ = 1 the residual
        // cancels, leaving exactly V̂.
        let episode = OpeEpisode {
            episode_id: 0,
            scalar_return: 0.45,
            steps: vec![OpeStep {
                features,
                action: 0,
                reward: 0.45,
                behavior_propensity: 0.9,
                target_propensity: 0.9,
                target_dist: vec![0.9, 0.1],
            }],
        };
        let dr = dr_value(&[episode], &qhat, &cfg_unclipped(0.99)).unwrap();
        assert!((dr.values[0] - 0.425).abs() < 1e-12);
    }

    #[test]
    fn qhat_fits_the_constant_single_step_corpus_exactly() {
        // Every episode is one step of reward c: all reward-to-go
        // targets equal c, so the unpenalized intercept absorbs it and
        // predictions are exact on every training state.
        let c = 0.37;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let episodes: Vec<OpeEpisode> = (0..200)
            .map(|i| OpeEpisode {
                episode_id: i,
                scalar_return: c,
                steps: vec![OpeStep {
                    features: vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
                    action: i % 2,
                    reward: c,
                    behavior_propensity: 0.5,
                    target_propensity: 0.5,
                    target_dist: vec![0.5, 0.5],
                }],
            })
            .collect();
        let qhat = fit_qhat(&episodes, 2, 0.99).unwrap();
        for e in &episodes {
            let s = &e.steps[0];
            assert!(
                (qhat.q(&s.features, s.action) - c).abs() < 1e-6,
                "prediction {} vs {c}",
                qhat.q(&s.features, s.action)
            );
        }
    }

    #[test]
    fn qhat_recovers_mdp_values_within_sampling_tolerance() {
        let gamma = 0.99;
        let mdp = Mdp::example();
        let episodes = mdp.sample_corpus(5_000, gamma, 37);
        let qhat = fit_qhat(&episodes, 2, gamma).unwrap();
        assert!(qhat.zero_actions.is_empty());
        // Fitted Q̂ regresses *behavioral* reward-to-go; compare against
        // the behavioral-policy state-action values.
        let mut v_next = [0.0f64; 2];
        let mut q_b = vec![[[0.0; 2]; 2]; mdp.horizon];
        for t in (0..mdp.horizon).rev() {
            let mut v_here = [0.0; 2];
            for s in 0..2 {
                for a in 0..2 {
                    let future: f64 =
                        (0..2).map(|s2| mdp.trans[s][a][s2] * v_next[s2]).sum();
                    q_b[t][s][a] = mdp.reward[s][a] + gamma * future;
                }
                v_here[s] = (0..2).map(|a| mdp.behavior[s][a] * q_b[t][s][a]).sum();
            }
            v_next = v_here;
        }
        for t in 0..mdp.horizon {
            for s in 0..2 {
                if t == 0 && s != mdp.start {
                    // Never visited; its Q̂ is unidentified (intercept only).
                    continue;
                }
                for a in 0..2 {
                    let got = qhat.q(&mdp.features(t, s), a);
                    assert!(
                        (got - q_b[t][s][a]).abs() < 0.05,
                        "Q̂[{t}][{s}][{a}] = {got} vs {}",
                        q_b[t][s][a]
                    );
                }
            }
        }
    }

    #[test]
    fn never_logged_actions_are_flagged_zero() {
        let episodes = vec![OpeEpisode {
            episode_id: 0,
            scalar_return: 1.0,
            steps: vec![OpeStep {
                features: vec![1.0],
                action: 2,
                reward: 1.0,
                behavior_propensity: 1.0,
                target_propensity: 1.0,
                target_dist: vec![0.0, 0.0, 1.0, 0.0],
            }],
        }];
        let qhat = fit_qhat(&episodes, 4, 0.99).unwrap();
        assert_eq!(qhat.zero_actions, vec![0, 1, 3]);
        assert_eq!(qhat.q(&[1.0], 0), 0.0);
        assert!(qhat.q(&[1.0], 2).abs() > 0.0);
    }

    #[test]
    fn v_hat_is_a_convex_combination_of_q_hat() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let weights: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let qhat = QHatModel::from_weights(weights).unwrap();
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut dist: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
            let sum: f64 = dist.iter().sum();
            dist.iter_mut().for_each(|p| *p /= sum);
            let qs: Vec<f64> = (0..4).map(|a| qhat.q(&x, a)).collect();
            let v = qhat.v(&x, &dist);
            let lo = qs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn kde_is_symmetric_normalized_and_shape_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let values: Vec<f64> = (0..200).map(|_| rng.gen_range(-0.5..1.5)).collect();
        let summary = kde_summary(&values, &values).unwrap();
        assert_eq!(summary.density_behavioral, summary.density_optimal);
        assert_eq!(summary.grid.len(), KDE_GRID_POINTS);

        let step = summary.grid[1] - summary.grid[0];
        let integral: f64 = summary
            .density_behavioral
            .windows(2)
            .map(|w| 0.5 * (w[0] + w[1]) * step)
            .sum();
        assert!((integral - 1.0).abs() < 1e-3, "density integrates to {integral}");
        assert!(summary.mass_above_zero_behavioral > 0.0);
        assert!(summary.mass_above_zero_behavioral < 1.0);
    }

    #[test]
    fn kde_handles_zero_variance_without_blowing_up() {
        let constant = vec![0.3; 20];
        let spread: Vec<f64> = (0..20).map(|i| i as f64 * 0.01).collect();
        let summary = kde_summary(&constant, &spread).unwrap();
        assert!(summary.density_behavioral.iter().all(|d| d.is_finite()));
        assert!(summary.bandwidth_behavioral < 1e-6);
    }

    #[test]
    fn kde_requires_ten_values_per_side() {
        let few = vec![0.1; 9];
        let enough = vec![0.1; 10];
        assert!(kde_summary(&few, &enough).is_err());
    }

    #[test]
    fn report_serialization_aligns_episodes() {
        let mdp = Mdp::example();
        let episodes = mdp.sample_corpus(5, 0.99, 53);
        let cfg = OpeConfig::default();
        let is = is_value(&episodes, &cfg).unwrap();
        let dr = dr_value(&episodes, &QHatModel::zero(mdp.feature_dim(), 2), &cfg).unwrap();
        let text = serialize_ope_report(&is, &dr).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], OPE_REPORT_HEADER);
        assert_eq!(lines.len(), 6);
        assert!(lines[1].starts_with("0,"));
    }

    #[test]
    fn clip_bounds_are_validated() {
        let bad = OpeConfig { gamma: 0.99, clip: Some((0.0, 10.0)) };
        assert!(bad.validate().is_err());
        let bad = OpeConfig { gamma: 0.99, clip: Some((0.5, 0.9)) };
        assert!(bad.validate().is_err());
    }
}
