//! Expected goals: a logistic model of goal probability given shot
//! features, fit by regularized Newton iterations, evaluated with Brier
//! score and AUC under stratified cross-validation.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::state::{ActionFeatures, FeatureExtras};

// ── Features ────────────────────────────────────────────────────────────

/// Ridge strength on the non-bias weights.
pub const XG_RIDGE: f64 = 1.0;
/// Convergence threshold on the gradient norm.
pub const XG_GRAD_TOL: f64 = 1e-8;
const MAX_NEWTON_ITERS: usize = 200;
/// Predicted probabilities are kept strictly inside (0, 1).
const PROB_FLOOR: f64 = 1e-12;

/// One labeled shot.
#[derive(Debug, Clone)]
pub struct ShotRecord {
    pub features: ActionFeatures,
    pub goal: bool,
}

/// Map shot features onto the regression vector. Scalars are scaled to
/// unit-order ranges; pressure counts join when present. The action's
/// own result flag is deliberately absent: for a shot it records the
/// outcome being predicted.
pub fn shot_feature_vector(f: &ActionFeatures) -> Vec<f64> {
    let mut v = vec![
        f.angle_to_goal,
        f.distance_to_goal / crate::pitch::PITCH_LENGTH,
        f.time_remaining / crate::pitch::HALF_LENGTH_S,
        f.home_away,
        f.body_id / 2.0,
    ];
    if let FeatureExtras::Pressure(z) = &f.extras {
        let n = crate::pressure::N_OPPONENTS as f64;
        v.extend([z.z1 as f64 / n, z.z2 as f64 / n, z.z3 as f64 / n]);
    }
    v
}

// ── Model ───────────────────────────────────────────────────────────────

/// Fitted logistic regression.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn log1p_exp(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl LogisticModel {
    pub fn score(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    /// Goal probability for one feature vector, strictly inside (0, 1).
    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.score(x)).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
    }

    pub fn predict_features(&self, f: &ActionFeatures) -> f64 {
        self.predict(&shot_feature_vector(f))
    }
}

/// Goal probability for one shot under a fitted model.
pub fn predict_goal_prob(model: &LogisticModel, f: &ActionFeatures) -> f64 {
    model.predict_features(f)
}

// ── Fitting ─────────────────────────────────────────────────────────────

/// Penalized negative log-likelihood; the bias is unpenalized.
fn objective(x: &DMatrix<f64>, y: &[f64], w: &DVector<f64>) -> f64 {
    let d = x.ncols();
    let z = x * w;
    let mut nll = 0.0;
    for (zi, &yi) in z.iter().zip(y) {
        nll += log1p_exp(*zi) - yi * zi;
    }
    // Last coefficient is the bias column.
    let ridge: f64 = w.iter().take(d - 1).map(|v| v * v).sum();
    nll + 0.5 * XG_RIDGE * ridge
}

/// Fit by Newton's method with step halving, to gradient norm < 1e-8.
/// Deterministic: no randomness, fixed start at zero.
pub fn fit_xg(shots: &[ShotRecord]) -> Result<LogisticModel> {
    let vectors: Vec<Vec<f64>> = shots.iter().map(|s| shot_feature_vector(&s.features)).collect();
    let labels: Vec<f64> = shots.iter().map(|s| if s.goal { 1.0 } else { 0.0 }).collect();
    fit_logistic(&vectors, &labels)
}

/// Shared fitting core: rows of `features` against 0/1 labels.
pub fn fit_logistic(features: &[Vec<f64>], labels: &[f64]) -> Result<LogisticModel> {
    if features.len() != labels.len() {
        return Err(Error::Validation(format!(
            "{} feature rows vs {} labels",
            features.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&y| y == 1.0).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::SingleClass);
    }
    let d = features[0].len();
    if let Some(bad) = features.iter().find(|row| row.len() != d) {
        return Err(Error::WidthMismatch { expected: d, got: bad.len() });
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite feature value".into()));
    }

    let n = features.len();
    // Design matrix with a trailing bias column of ones.
    let x = DMatrix::from_fn(n, d + 1, |i, j| if j < d { features[i][j] } else { 1.0 });
    let mut w = DVector::<f64>::zeros(d + 1);
    let mut loss = objective(&x, labels, &w);

    for iter in 0..MAX_NEWTON_ITERS {
        let z = &x * &w;
        let mu: Vec<f64> = z.iter().map(|&zi| sigmoid(zi)).collect();

        let mut grad = DVector::<f64>::zeros(d + 1);
        for i in 0..n {
            let r = mu[i] - labels[i];
            for j in 0..=d {
                grad[j] += r * x[(i, j)];
            }
        }
        for j in 0..d {
            grad[j] += XG_RIDGE * w[j];
        }
        if grad.norm() < XG_GRAD_TOL {
            break;
        }

        // H = Xᵀ S X + λ on the weight block; S from the current mean.
        let mut h = DMatrix::<f64>::zeros(d + 1, d + 1);
        for i in 0..n {
            let s = (mu[i] * (1.0 - mu[i])).max(1e-12);
            for j in 0..=d {
                let xs = x[(i, j)] * s;
                for k in j..=d {
                    h[(j, k)] += xs * x[(i, k)];
                }
            }
        }
        for j in 0..=d {
            for k in 0..j {
                h[(j, k)] = h[(k, j)];
            }
        }
        for j in 0..d {
            h[(j, j)] += XG_RIDGE;
        }

        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => {
                // Degenerate curvature (e.g. perfectly separated data far
                // from the ridge optimum); nudge the diagonal and retry.
                let mut hh = h;
                for j in 0..=d {
                    hh[(j, j)] += 1e-8;
                }
                hh.cholesky()
                    .ok_or(Error::TrainingDiverged { epoch: iter, loss })?
                    .solve(&grad)
            }
        };

        if grad.norm() < 1e-3 {
            // Close to the optimum the objective moves by less than f64
            // resolution, so a decrease test would reject every step.
            // Pure Newton contracts the gradient quadratically here.
            w -= &step;
            loss = objective(&x, labels, &w);
            continue;
        }

        // Far from the optimum: halve until the objective improves.
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate = &w - scale * &step;
            let candidate_loss = objective(&x, labels, &candidate);
            if candidate_loss.is_finite() && candidate_loss <= loss {
                w = candidate;
                loss = candidate_loss;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            return Err(Error::TrainingDiverged { epoch: iter, loss });
        }
    }

    let final_grad = {
        let z = &x * &w;
        let mut g = DVector::<f64>::zeros(d + 1);
        for i in 0..n {
            let r = sigmoid(z[i]) - labels[i];
            for j in 0..=d {
                g[j] += r * x[(i, j)];
            }
        }
        for j in 0..d {
            g[j] += XG_RIDGE * w[j];
        }
        g.norm()
    };
    if final_grad >= XG_GRAD_TOL {
        log::warn!("logistic fit stopped at gradient norm {final_grad:.3e}");
        return Err(Error::TrainingDiverged { epoch: MAX_NEWTON_ITERS, loss });
    }

    Ok(LogisticModel { weights: w.iter().take(d).copied().collect(), bias: w[d] })
}

// ── Evaluation ──────────────────────────────────────────────────────────

/// Mean squared error of predicted probability against the outcome.
pub fn brier_score(predictions: &[f64], labels: &[f64]) -> f64 {
    if predictions.is_empty() {
        return 0.0;
    }
    predictions.iter().zip(labels).map(|(p, y)| (p - y).powi(2)).sum::<f64>()
        / predictions.len() as f64
}

/// AUC by the rank statistic with midranks for ties: the probability a
/// random positive outranks a random negative (ties count half).
pub fn rank_auc(predictions: &[f64], labels: &[f64]) -> f64 {
    let n = predictions.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| predictions[a].total_cmp(&predictions[b]));

    let mut ranks = vec![0.0f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && predictions[order[j + 1]] == predictions[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = midrank;
        }
        i = j + 1;
    }

    let n_pos = labels.iter().filter(|&&y| y == 1.0).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return 0.5;
    }
    let pos_rank_sum: f64 =
        labels.iter().zip(&ranks).filter(|(&y, _)| y == 1.0).map(|(_, r)| r).sum();
    (pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos as f64 * n_neg as f64)
}

/// Cross-validated (Brier, AUC) from out-of-fold predictions.
///
/// Folds are stratified by class; a fold left with a single class after
/// assignment merges into its neighbor with a warning.
pub fn evaluate_xg(shots: &[ShotRecord], folds: usize) -> Result<(f64, f64)> {
    if folds < 2 {
        return Err(Error::Validation(format!("need at least 2 folds, got {folds}")));
    }
    let vectors: Vec<Vec<f64>> = shots.iter().map(|s| shot_feature_vector(&s.features)).collect();
    let labels: Vec<f64> = shots.iter().map(|s| if s.goal { 1.0 } else { 0.0 }).collect();

    // Stratified assignment: each class deals its members round-robin.
    let mut fold_of = vec![0usize; shots.len()];
    for class in [0.0, 1.0] {
        for (slot, idx) in
            (0..shots.len()).filter(|&i| labels[i] == class).enumerate()
        {
            fold_of[idx] = slot % folds;
        }
    }

    // Merge single-class folds into their lower neighbor (fold 0 merges
    // upward). Repeat until every remaining fold carries both classes.
    let mut fold_ids: Vec<usize> = (0..folds).collect();
    loop {
        let mut merged = false;
        for &f in fold_ids.clone().iter() {
            let members: Vec<usize> = (0..shots.len()).filter(|&i| fold_of[i] == f).collect();
            if members.is_empty() {
                fold_ids.retain(|&x| x != f);
                continue;
            }
            let pos = members.iter().filter(|&&i| labels[i] == 1.0).count();
            if pos == 0 || pos == members.len() {
                let target = fold_ids
                    .iter()
                    .copied()
                    .filter(|&x| x != f)
                    .min_by_key(|&x| x.abs_diff(f))
                    .ok_or(Error::SingleClass)?;
                log::warn!("fold {f} holds a single class; merging into fold {target}");
                for i in members {
                    fold_of[i] = target;
                }
                fold_ids.retain(|&x| x != f);
                merged = true;
            }
        }
        if !merged {
            break;
        }
    }
    if fold_ids.len() < 2 {
        return Err(Error::InsufficientData(
            "cross-validation collapsed to a single usable fold".into(),
        ));
    }

    let mut predictions = vec![0.0f64; shots.len()];
    for &f in &fold_ids {
        let train_x: Vec<Vec<f64>> = (0..shots.len())
            .filter(|&i| fold_of[i] != f)
            .map(|i| vectors[i].clone())
            .collect();
        let train_y: Vec<f64> =
            (0..shots.len()).filter(|&i| fold_of[i] != f).map(|i| labels[i]).collect();
        let model = fit_logistic(&train_x, &train_y)?;
        for i in (0..shots.len()).filter(|&i| fold_of[i] == f) {
            predictions[i] = model.predict(&vectors[i]);
        }
    }

    Ok((brier_score(&predictions, &labels), rank_auc(&predictions, &labels)))
}

// ── Model file ──────────────────────────────────────────────────────────

const MODEL_HEADER: &str = "xg-logistic v1";

/// Text dump: header with the feature count, then the bias and one
/// weight per line. `{:?}` prints the shortest exact f64 representation,
/// so round-trips are bit-identical.
pub fn serialize_model(model: &LogisticModel) -> String {
    let mut out = format!("{MODEL_HEADER} features={}\n", model.weights.len());
    out.push_str(&format!("{:?}\n", model.bias));
    for w in &model.weights {
        out.push_str(&format!("{w:?}\n"));
    }
    out
}

pub fn write_model(path: &Path, model: &LogisticModel) -> Result<()> {
    std::fs::write(path, serialize_model(model))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn parse_model(text: &str, origin: &str) -> Result<LogisticModel> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(origin, 1, "empty model file"))?;
    let features: usize = header
        .strip_prefix(MODEL_HEADER)
        .and_then(|rest| rest.trim().strip_prefix("features="))
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| Error::parse(origin, 1, format!("bad model header {header:?}")))?;
    let mut numbers = Vec::with_capacity(features + 1);
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let v: f64 = line
            .trim()
            .parse()
            .map_err(|_| Error::parse(origin, idx + 1, format!("bad number {line:?}")))?;
        numbers.push(v);
    }
    if numbers.len() != features + 1 {
        return Err(Error::parse(
            origin,
            1,
            format!("expected {} numbers, found {}", features + 1, numbers.len()),
        ));
    }
    Ok(LogisticModel { bias: numbers[0], weights: numbers[1..].to_vec() })
}

pub fn read_model(path: &Path) -> Result<LogisticModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_model(&text, &path.display().to_string())
}

// ── Tests ───────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pressure::PressureVector;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn features(angle: f64, dist: f64, time: f64, home: f64, body: f64) -> ActionFeatures {
        ActionFeatures {
            angle_to_goal: angle,
            distance_to_goal: dist,
            time_remaining: time,
            home_away: home,
            action_result: 0.0,
            body_id: body,
            extras: FeatureExtras::None,
        }
    }

    fn random_features(rng: &mut ChaCha8Rng) -> ActionFeatures {
        features(
            rng.gen_range(0.05..2.8),
            rng.gen_range(1.0..60.0),
            rng.gen_range(0.0..2700.0),
            if rng.gen_bool(0.5) { 1.0 } else { 0.0 },
            *[0.0f64, 1.0, 2.0].get(rng.gen_range(0..3)).unwrap(),
        )
    }

    fn planted_shots(n: usize, w: &[f64; 5], bias: f64, seed: u64) -> Vec<ShotRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let f = random_features(&mut rng);
                let x = shot_feature_vector(&f);
                let z: f64 = bias + w.iter().zip(&x).map(|(wi, xi)| wi * xi).sum::<f64>();
                let goal = rng.gen_bool(sigmoid(z).clamp(1e-9, 1.0 - 1e-9));
                ShotRecord { features: f, goal }
            })
            .collect()
    }

    #[test]
    fn separable_set_fits_with_finite_weights() {
        // Goals exactly when the shot is close: linearly separable.
        let shots: Vec<ShotRecord> = (0..40)
            .map(|i| {
                let dist = if i % 2 == 0 { 5.0 } else { 40.0 };
                ShotRecord {
                    features: features(1.0, dist, 1000.0, 1.0, 2.0),
                    goal: i % 2 == 0,
                }
            })
            .collect();
        let model = fit_xg(&shots).unwrap();
        assert!(model.weights.iter().all(|w| w.is_finite()));
        let correct = shots
            .iter()
            .filter(|s| (predict_goal_prob(&model, &s.features) > 0.5) == s.goal)
            .count();
        assert_eq!(correct, shots.len());
    }

    #[test]
    fn planted_coefficients_recovered_within_ten_percent() {
        let w = [1.1, -5.5, 0.6, 0.4, 0.9];
        let bias = -1.8;
        let shots = planted_shots(100_000, &w, bias, 17);
        let model = fit_xg(&shots).unwrap();
        for (fitted, truth) in model.weights.iter().zip(&w) {
            let rel = (fitted - truth).abs() / truth.abs();
            assert!(rel < 0.10, "weight {fitted} vs {truth} (rel {rel:.3})");
        }
        let rel_bias = (model.bias - bias).abs() / bias.abs();
        assert!(rel_bias < 0.10, "bias {} vs {bias}", model.bias);
    }

    #[test]
    fn flipping_labels_negates_the_model() {
        let shots = planted_shots(4000, &[0.8, -2.0, 0.3, 0.2, 0.5], -0.7, 23);
        let flipped: Vec<ShotRecord> = shots
            .iter()
            .map(|s| ShotRecord { features: s.features.clone(), goal: !s.goal })
            .collect();
        let a = fit_xg(&shots).unwrap();
        let b = fit_xg(&flipped).unwrap();
        for (wa, wb) in a.weights.iter().zip(&b.weights) {
            assert!((wa + wb).abs() < 1e-6, "{wa} vs {wb}");
        }
        assert!((a.bias + b.bias).abs() < 1e-6);
    }

    #[test]
    fn single_class_is_an_error() {
        let shots: Vec<ShotRecord> = (0..10)
            .map(|_| ShotRecord { features: features(1.0, 10.0, 100.0, 1.0, 2.0), goal: false })
            .collect();
        match fit_xg(&shots) {
            Err(Error::SingleClass) => {}
            other => panic!("expected SingleClass, got {other:?}"),
        }
    }

    #[test]
    fn zero_model_predicts_even_odds() {
        let model = LogisticModel { weights: vec![0.0; 5], bias: 0.0 };
        let p = predict_goal_prob(&model, &features(1.0, 20.0, 500.0, 1.0, 2.0));
        assert!((p - 0.5).abs() < 1e-12);
    }

    #[test]
    fn planted_model_is_even_at_its_own_boundary() {
        let model = LogisticModel { weights: vec![2.0, -3.0, 0.0, 0.0, 0.0], bias: -1.0 };
        // Choose features putting the score exactly at zero:
        // 2·angle − 3·(dist/105) − 1 = 0 with angle = 0.8 → dist/105 = 0.2.
        let f = features(0.8, 0.2 * 105.0, 0.0, 0.0, 0.0);
        let p = predict_goal_prob(&model, &f);
        assert!((p - 0.5).abs() < 1e-9);
    }

    #[test]
    fn probability_rises_as_distance_falls_under_negative_weight() {
        let model =
            LogisticModel { weights: vec![1.1, -5.5, 0.6, 0.4, 0.9], bias: -1.8 };
        let mut last = 0.0;
        for step in 0..30 {
            let dist = 60.0 - step as f64 * 2.0;
            let p = predict_goal_prob(&model, &features(1.0, dist, 900.0, 1.0, 2.0));
            assert!(p > last, "distance {dist}: {p} ≤ {last}");
            last = p;
        }
    }

    #[test]
    fn pressure_extras_extend_the_feature_vector() {
        let mut f = features(1.0, 20.0, 900.0, 1.0, 2.0);
        assert_eq!(shot_feature_vector(&f).len(), 5);
        f.extras = FeatureExtras::Pressure(PressureVector { z1: 5, z2: 4, z3: 2 });
        let v = shot_feature_vector(&f);
        assert_eq!(v.len(), 8);
        assert!((v[5] - 5.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictor_scores_zero_brier_unit_auc() {
        let labels = [1.0, 0.0, 1.0, 0.0, 1.0];
        let predictions = [0.999, 0.001, 0.998, 0.002, 0.997];
        assert!(brier_score(&predictions, &labels) < 1e-5);
        assert_eq!(rank_auc(&predictions, &labels), 1.0);
    }

    #[test]
    fn constant_predictor_on_balanced_labels_is_chance() {
        let labels = [1.0, 0.0, 1.0, 0.0];
        let predictions = [0.5; 4];
        assert!((brier_score(&predictions, &labels) - 0.25).abs() < 1e-12);
        assert!((rank_auc(&predictions, &labels) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rank_auc_matches_brute_force_with_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.gen_range(20..200);
            let predictions: Vec<f64> =
                (0..n).map(|_| (rng.gen_range(0..20) as f64) / 20.0).collect();
            let labels: Vec<f64> =
                (0..n).map(|_| if rng.gen_bool(0.4) { 1.0 } else { 0.0 }).collect();
            if !labels.contains(&1.0) || !labels.contains(&0.0) {
                continue;
            }
            let mut wins = 0.0;
            let mut pairs = 0.0;
            for i in 0..n {
                if labels[i] != 1.0 {
                    continue;
                }
                for j in 0..n {
                    if labels[j] != 0.0 {
                        continue;
                    }
                    pairs += 1.0;
                    if predictions[i] > predictions[j] {
                        wins += 1.0;
                    } else if predictions[i] == predictions[j] {
                        wins += 0.5;
                    }
                }
            }
            let brute = wins / pairs;
            let fast = rank_auc(&predictions, &labels);
            assert!((brute - fast).abs() < 1e-12, "{brute} vs {fast}");
        }
    }

    #[test]
    fn duplicated_feature_barely_moves_predictions() {
        // Duplicating a column halves the ridge felt by that coordinate,
        // so predictions shift by O(λ·|w|/n); with the ridge fixed at 1
        // this stays under the tolerance once n is large relative to the
        // duplicated coefficient.
        let shots = planted_shots(600_000, &[0.5, -0.05, 0.2, 0.1, 0.3], -0.5, 31);
        let base: Vec<Vec<f64>> =
            shots.iter().map(|s| shot_feature_vector(&s.features)).collect();
        let labels: Vec<f64> =
            shots.iter().map(|s| if s.goal { 1.0 } else { 0.0 }).collect();
        let doubled: Vec<Vec<f64>> = base
            .iter()
            .map(|row| {
                let mut r = row.clone();
                r.push(row[1]);
                r
            })
            .collect();
        let a = fit_logistic(&base, &labels).unwrap();
        let b = fit_logistic(&doubled, &labels).unwrap();
        let mut worst: f64 = 0.0;
        for (ra, rb) in base.iter().zip(&doubled).step_by(97) {
            worst = worst.max((a.predict(ra) - b.predict(rb)).abs());
        }
        assert!(worst < 1e-6, "max prediction shift {worst}");
    }

    #[test]
    fn cross_validation_near_planted_noise_floor() {
        let w = [1.1, -5.5, 0.6, 0.4, 0.9];
        let shots = planted_shots(6000, &w, -1.8, 41);
        let (brier, auc) = evaluate_xg(&shots, 5).unwrap();
        // The planted model's own out-of-sample scores on this draw sit
        // near these values; the refit must come close.
        assert!(brier < 0.25, "brier {brier}");
        assert!(auc > 0.70, "auc {auc}");
    }

    #[test]
    fn tiny_minority_class_merges_folds_instead_of_failing() {
        let mut shots = planted_shots(60, &[0.5, -1.0, 0.2, 0.1, 0.2], -0.5, 47);
        for s in shots.iter_mut() {
            s.goal = false;
        }
        // Three positives cannot stratify across five folds.
        shots[3].goal = true;
        shots[25].goal = true;
        shots[44].goal = true;
        let (brier, auc) = evaluate_xg(&shots, 5).unwrap();
        assert!(brier.is_finite() && (0.0..=1.0).contains(&auc));
    }

    #[test]
    fn model_file_round_trips_exact_coefficients() {
        let model = LogisticModel {
            weights: vec![1.1, -5.5, 0.6000000000000001, 0.4, 0.9],
            bias: -1.8000000000000003,
        };
        let text = serialize_model(&model);
        let back = parse_model(&text, "mem").unwrap();
        assert_eq!(model, back);
    }
}
