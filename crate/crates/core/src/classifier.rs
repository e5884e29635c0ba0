//! Behavioral model q(x;θ): the trained ending-action classifier as the
//! rest of the pipeline consumes it.
//!
//! [`crate::nn`] owns the network machinery; this module binds it to
//! possession semantics — [`EndingAction`] labels in and calibrated
//! ending distributions out. Downstream, the reward engine reads
//! `P(shot | x)` from these distributions and the off-policy evaluator
//! reads the logged action's propensity.

use std::path::Path;

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::nn::{
    self, EpochStats, SequenceClassifier, TrainConfig, N_CLASSES,
};
use crate::possession::EndingAction;
use crate::state::{StackedStates, StateType};

// ── Distributions ───────────────────────────────────────────────────────

/// A probability distribution over the four ending actions, ordered
/// (Shot, Out, Foul, Error).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeDistribution(pub [f64; N_CLASSES]);

impl OutcomeDistribution {
    pub fn probability(&self, action: EndingAction) -> f64 {
        self.0[action.label()]
    }

    /// P(shot | x) — the factor the possession value multiplies into xG.
    pub fn p_shot(&self) -> f64 {
        self.0[EndingAction::Shot.label()]
    }

    /// Most probable ending, ties to the lower class index.
    pub fn argmax(&self) -> EndingAction {
        let mut best = 0;
        for (j, v) in self.0.iter().enumerate() {
            if *v > self.0[best] {
                best = j;
            }
        }
        EndingAction::from_label(best).expect("label in range")
    }
}

// ── Behavioral model ────────────────────────────────────────────────────

/// A trained classifier together with the state encoding it was fitted
/// on. Inference is immutable and deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct BehavioralModel {
    pub state_type: StateType,
    pub net: SequenceClassifier,
}

/// Aggregate fit quality on a labeled corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierReport {
    pub possessions: usize,
    pub accuracy: f64,
    pub cross_entropy: f64,
}

impl BehavioralModel {
    /// Train on stacked possession tensors. Delegates to the network
    /// trainer; the label vector is the possessions' ending actions.
    pub fn train(
        states: &StackedStates,
        cfg: &TrainConfig,
    ) -> Result<(BehavioralModel, Vec<EpochStats>)> {
        let labels: Vec<usize> = states.labels.iter().map(|a| a.label()).collect();
        let set = nn::TrainingSet {
            data: &states.data,
            true_lengths: &states.true_lengths,
            labels: &labels,
        };
        let (net, curve) = nn::train_classifier(&set, cfg)?;
        Ok((BehavioralModel { state_type: states.state_type, net }, curve))
    }

    /// Ending distribution for a single possession tensor.
    pub fn predict(
        &self,
        tensor: ArrayView2<'_, f64>,
        true_length: usize,
    ) -> Result<OutcomeDistribution> {
        Ok(OutcomeDistribution(self.net.predict(tensor, true_length)?))
    }

    /// Ending distributions for a whole corpus, in possession order.
    /// Batched through the network in fixed-size chunks.
    pub fn predict_all(&self, states: &StackedStates) -> Result<Vec<OutcomeDistribution>> {
        if states.state_type != self.state_type {
            return Err(Error::WidthMismatch {
                expected: self.state_type.width(),
                got: states.state_type.width(),
            });
        }
        const CHUNK: usize = 512;
        let n = states.len();
        let mut out = Vec::with_capacity(n);
        let mut start = 0;
        while start < n {
            let end = (start + CHUNK).min(n);
            let x = states.data.slice(s_axis(start, end)).to_owned();
            let probs = self.net.forward(&x, &states.true_lengths[start..end])?;
            for row in probs.rows() {
                let mut dist = [0.0; N_CLASSES];
                for (slot, v) in dist.iter_mut().zip(row) {
                    *slot = *v;
                }
                out.push(OutcomeDistribution(dist));
            }
            start = end;
        }
        Ok(out)
    }

    /// Accuracy and mean cross-entropy against the stored labels.
    pub fn evaluate(&self, states: &StackedStates) -> Result<ClassifierReport> {
        let dists = self.predict_all(states)?;
        let n = dists.len();
        if n == 0 {
            return Err(Error::InsufficientData("no possessions to evaluate".into()));
        }
        let mut hits = 0usize;
        let mut ce = 0.0;
        for (dist, &label) in dists.iter().zip(&states.labels) {
            if dist.argmax() == label {
                hits += 1;
            }
            ce -= dist.probability(label).max(1e-300).ln();
        }
        Ok(ClassifierReport {
            possessions: n,
            accuracy: hits as f64 / n as f64,
            cross_entropy: ce / n as f64,
        })
    }

    /// Persist as a network checkpoint; the encoding is recovered from
    /// the stored width on load.
    pub fn save(&self, path: &Path) -> Result<()> {
        nn::write_checkpoint(path, &self.net)
    }

    pub fn load(path: &Path) -> Result<BehavioralModel> {
        let net = nn::read_checkpoint(path)?;
        let state_type = StateType::from_width(net.width).ok_or_else(|| {
            Error::Checkpoint(format!("width {} maps to no state encoding", net.width))
        })?;
        Ok(BehavioralModel { state_type, net })
    }
}

fn s_axis(start: usize, end: usize) -> ndarray::SliceInfo<[ndarray::SliceInfoElem; 3], ndarray::Ix3, ndarray::Ix3> {
    ndarray::s![start..end, .., ..]
}

/// Behavioral propensities q(a_logged | x) for a corpus: each
/// possession's distribution evaluated at its own logged ending.
pub fn logged_propensities(
    dists: &[OutcomeDistribution],
    labels: &[EndingAction],
) -> Result<Vec<f64>> {
    if dists.len() != labels.len() {
        return Err(Error::Validation(format!(
            "{} distributions vs {} labels",
            dists.len(),
            labels.len()
        )));
    }
    Ok(dists.iter().zip(labels).map(|(d, &a)| d.probability(a)).collect())
}

// ── Tests ───────────────────────────────────────────────────────────────
