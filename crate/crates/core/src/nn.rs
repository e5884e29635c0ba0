//! Convolutional-recurrent sequence model over possession tensors.
//!
//! Architecture: a causal 1-D convolution over the time axis (kernel 3,
//! 32 filters, rectified), an LSTM with 100 memory units reading the
//! convolved sequence with padded steps carried through unchanged, and a
//! dense map from the final hidden state to 4 logits + softmax.
//!
//! Everything is f64 and deterministic: seeded initialization, plain
//! mini-batch SGD, no threading inside a model. The same machinery backs
//! both the behavioral classifier and the policy network — training
//! loops differ only in the logit gradient they feed to [`SequenceClassifier::backward`].

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::possession::EndingAction;
use crate::state::TENSOR_ROWS;

/// Convolution kernel width along the time axis.
pub const CONV_KERNEL: usize = 3;
/// Convolution output channels.
pub const CONV_FILTERS: usize = 32;
/// LSTM memory units.
pub const LSTM_UNITS: usize = 100;
/// Output classes, ordered as [`EndingAction::ALL`].
pub const N_CLASSES: usize = EndingAction::COUNT;

// ── Parameters ──────────────────────────────────────────────────────────

/// The CNN-LSTM with all parameters owned. Gate blocks inside the LSTM
/// matrices are ordered input, forget, cell, output.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceClassifier {
    /// Per-action input width the model was built for.
    pub width: usize,
    /// Convolution kernel, flattened to (kernel · width) × filters; row
    /// blocks are time offsets −2, −1, 0.
    pub conv_w: Array2<f64>,
    pub conv_b: Array1<f64>,
    /// Input-to-gates map, filters × 4·units.
    pub w: Array2<f64>,
    /// Hidden-to-gates map, units × 4·units.
    pub u: Array2<f64>,
    pub b: Array1<f64>,
    /// Readout, units × classes. Zero-initialized so an untrained model
    /// is exactly uniform.
    pub dense_w: Array2<f64>,
    pub dense_b: Array1<f64>,
}

/// Gradients, shaped like the parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub conv_w: Array2<f64>,
    pub conv_b: Array1<f64>,
    pub w: Array2<f64>,
    pub u: Array2<f64>,
    pub b: Array1<f64>,
    pub dense_w: Array2<f64>,
    pub dense_b: Array1<f64>,
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let s = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-s..s))
}

impl SequenceClassifier {
    /// Fresh model: seeded uniform init for conv and LSTM, zero readout,
    /// forget-gate bias of one.
    pub fn new(width: usize, seed: u64) -> SequenceClassifier {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = Array1::zeros(4 * LSTM_UNITS);
        b.slice_mut(s![LSTM_UNITS..2 * LSTM_UNITS]).fill(1.0);
        SequenceClassifier {
            width,
            conv_w: glorot(&mut rng, CONV_KERNEL * width, CONV_FILTERS),
            conv_b: Array1::zeros(CONV_FILTERS),
            w: glorot(&mut rng, CONV_FILTERS, 4 * LSTM_UNITS),
            u: glorot(&mut rng, LSTM_UNITS, 4 * LSTM_UNITS),
            b,
            dense_w: Array2::zeros((LSTM_UNITS, N_CLASSES)),
            dense_b: Array1::zeros(N_CLASSES),
        }
    }

    /// Total scalar parameters (55 556 at width 20).
    pub fn param_count(&self) -> usize {
        self.conv_w.len()
            + self.conv_b.len()
            + self.w.len()
            + self.u.len()
            + self.b.len()
            + self.dense_w.len()
            + self.dense_b.len()
    }

    /// Named parameter tensors in checkpoint order.
    fn tensors(&self) -> [(&'static str, Vec<usize>, Vec<f64>); 7] {
        [
            ("conv_w", self.conv_w.shape().to_vec(), self.conv_w.iter().copied().collect()),
            ("conv_b", self.conv_b.shape().to_vec(), self.conv_b.to_vec()),
            ("w", self.w.shape().to_vec(), self.w.iter().copied().collect()),
            ("u", self.u.shape().to_vec(), self.u.iter().copied().collect()),
            ("b", self.b.shape().to_vec(), self.b.to_vec()),
            ("dense_w", self.dense_w.shape().to_vec(), self.dense_w.iter().copied().collect()),
            ("dense_b", self.dense_b.shape().to_vec(), self.dense_b.to_vec()),
        ]
    }

    /// All parameters as one flat vector, in checkpoint order.
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().into_iter().flat_map(|(_, _, data)| data).collect()
    }

    /// Inverse of [`flatten`]; the length must match exactly.
    pub fn unflatten(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::WidthMismatch {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut offset = 0;
        for target in [
            self.conv_w.as_slice_mut().expect("contiguous"),
            self.conv_b.as_slice_mut().expect("contiguous"),
            self.w.as_slice_mut().expect("contiguous"),
            self.u.as_slice_mut().expect("contiguous"),
            self.b.as_slice_mut().expect("contiguous"),
            self.dense_w.as_slice_mut().expect("contiguous"),
            self.dense_b.as_slice_mut().expect("contiguous"),
        ] {
            target.copy_from_slice(&flat[offset..offset + target.len()]);
            offset += target.len();
        }
        Ok(())
    }
}

// ── Forward ─────────────────────────────────────────────────────────────

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Row-wise stable softmax.
fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Concatenated causal window input for conv step `t`: rows of
/// x[t−2], x[t−1], x[t] with zeros before the sequence start.
fn conv_window(x: &Array3<f64>, t: usize) -> Array2<f64> {
    let (batch, _, width) = x.dim();
    let mut win = Array2::zeros((batch, CONV_KERNEL * width));
    for k in 0..CONV_KERNEL {
        let src = t as isize - (CONV_KERNEL as isize - 1) + k as isize;
        if src >= 0 {
            win.slice_mut(s![.., k * width..(k + 1) * width])
                .assign(&x.slice(s![.., src as usize, ..]));
        }
    }
    win
}

struct StepCache {
    xwin: Array2<f64>,
    pre: Array2<f64>,
    a: Array2<f64>,
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    c_prev: Array2<f64>,
    tanh_c_cand: Array2<f64>,
    h_prev: Array2<f64>,
    /// Column mask: 1 for a real action row, 0 for padding.
    m: Array2<f64>,
}

/// Forward activations kept for one backward pass.
pub struct ForwardCache {
    steps: Vec<StepCache>,
    h_final: Array2<f64>,
    probs: Array2<f64>,
}

impl ForwardCache {
    pub fn probabilities(&self) -> &Array2<f64> {
        &self.probs
    }
}

impl SequenceClassifier {
    fn check_input(&self, x: &Array3<f64>, lens: &[usize]) -> Result<()> {
        let (batch, rows, width) = x.dim();
        if width != self.width {
            return Err(Error::WidthMismatch { expected: self.width, got: width });
        }
        if rows != TENSOR_ROWS {
            return Err(Error::Validation(format!(
                "expected {TENSOR_ROWS} rows per possession, got {rows}"
            )));
        }
        if lens.len() != batch {
            return Err(Error::Validation(format!(
                "{batch} tensors but {} length entries",
                lens.len()
            )));
        }
        Ok(())
    }

    fn lstm_step(
        &self,
        a: &Array2<f64>,
        h: &Array2<f64>,
        c: &Array2<f64>,
        m: &Array2<f64>,
    ) -> (Array2<f64>, Array2<f64>, [Array2<f64>; 5]) {
        let gates = a.dot(&self.w) + h.dot(&self.u) + &self.b;
        let i = gates.slice(s![.., ..LSTM_UNITS]).mapv(sigmoid);
        let f = gates.slice(s![.., LSTM_UNITS..2 * LSTM_UNITS]).mapv(sigmoid);
        let g = gates.slice(s![.., 2 * LSTM_UNITS..3 * LSTM_UNITS]).mapv(f64::tanh);
        let o = gates.slice(s![.., 3 * LSTM_UNITS..]).mapv(sigmoid);
        let c_cand = &f * c + &i * &g;
        let tanh_c = c_cand.mapv(f64::tanh);
        let h_cand = &o * &tanh_c;
        // Padded rows carry state through unchanged.
        let keep = m.mapv(|v| 1.0 - v);
        let c_next = &c_cand * m + c * &keep;
        let h_next = &h_cand * m + h * &keep;
        (h_next, c_next, [i, f, g, o, tanh_c])
    }

    /// Inference forward: class probabilities per row of the batch.
    pub fn forward(&self, x: &Array3<f64>, lens: &[usize]) -> Result<Array2<f64>> {
        self.check_input(x, lens)?;
        let batch = x.dim().0;
        let mut h = Array2::zeros((batch, LSTM_UNITS));
        let mut c = Array2::zeros((batch, LSTM_UNITS));
        for t in 0..TENSOR_ROWS {
            let win = conv_window(x, t);
            let a = (win.dot(&self.conv_w) + &self.conv_b).mapv(|v| v.max(0.0));
            let m = Array2::from_shape_fn((batch, 1), |(r, _)| {
                if t < lens[r] {
                    1.0
                } else {
                    0.0
                }
            });
            let (h2, c2, _) = self.lstm_step(&a, &h, &c, &m);
            h = h2;
            c = c2;
        }
        let logits = h.dot(&self.dense_w) + &self.dense_b;
        Ok(softmax_rows(&logits))
    }

    /// Training forward: probabilities plus everything backward needs.
    pub fn forward_cached(&self, x: &Array3<f64>, lens: &[usize]) -> Result<ForwardCache> {
        self.check_input(x, lens)?;
        let batch = x.dim().0;
        let mut h = Array2::<f64>::zeros((batch, LSTM_UNITS));
        let mut c = Array2::<f64>::zeros((batch, LSTM_UNITS));
        let mut steps = Vec::with_capacity(TENSOR_ROWS);
        for t in 0..TENSOR_ROWS {
            let xwin = conv_window(x, t);
            let pre = xwin.dot(&self.conv_w) + &self.conv_b;
            let a = pre.mapv(|v| v.max(0.0));
            let m = Array2::from_shape_fn((batch, 1), |(r, _)| {
                if t < lens[r] {
                    1.0
                } else {
                    0.0
                }
            });
            let (h_next, c_next, [i, f, g, o, tanh_c]) = self.lstm_step(&a, &h, &c, &m);
            steps.push(StepCache {
                xwin,
                pre,
                a,
                i,
                f,
                g,
                o,
                c_prev: c,
                tanh_c_cand: tanh_c,
                h_prev: h,
                m,
            });
            h = h_next;
            c = c_next;
        }
        let logits = h.dot(&self.dense_w) + &self.dense_b;
        let probs = softmax_rows(&logits);
        Ok(ForwardCache { steps, h_final: h, probs })
    }

    /// Backpropagate an arbitrary logit gradient through the whole model.
    /// Cross-entropy training passes (p − onehot)/batch; the policy
    /// gradient passes its own weighting.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &Array2<f64>) -> Gradients {
        let batch = dlogits.dim().0;
        let mut grads = Gradients {
            conv_w: Array2::zeros(self.conv_w.raw_dim()),
            conv_b: Array1::zeros(self.conv_b.raw_dim()),
            w: Array2::zeros(self.w.raw_dim()),
            u: Array2::zeros(self.u.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
            dense_w: Array2::zeros(self.dense_w.raw_dim()),
            dense_b: Array1::zeros(self.dense_b.raw_dim()),
        };

        grads.dense_w = cache.h_final.t().dot(dlogits);
        grads.dense_b = dlogits.sum_axis(Axis(0));
        let mut dh = dlogits.dot(&self.dense_w.t());
        let mut dc = Array2::<f64>::zeros((batch, LSTM_UNITS));

        for step in cache.steps.iter().rev() {
            let keep = step.m.mapv(|v| 1.0 - v);
            let dh_cand = &dh * &step.m;
            let dc_cand_carry = &dc * &step.m;
            let mut dh_prev = &dh * &keep;
            let mut dc_prev = &dc * &keep;

            let d_o = &dh_cand * &step.tanh_c_cand;
            let dc_cand = dc_cand_carry
                + &dh_cand * &step.o * &step.tanh_c_cand.mapv(|v| 1.0 - v * v);
            let d_f = &dc_cand * &step.c_prev;
            let d_i = &dc_cand * &step.g;
            let d_g = &dc_cand * &step.i;
            dc_prev = dc_prev + &dc_cand * &step.f;

            let mut dgates = Array2::<f64>::zeros((batch, 4 * LSTM_UNITS));
            dgates
                .slice_mut(s![.., ..LSTM_UNITS])
                .assign(&(&d_i * &step.i.mapv(|v| v * (1.0 - v))));
            dgates
                .slice_mut(s![.., LSTM_UNITS..2 * LSTM_UNITS])
                .assign(&(&d_f * &step.f.mapv(|v| v * (1.0 - v))));
            dgates
                .slice_mut(s![.., 2 * LSTM_UNITS..3 * LSTM_UNITS])
                .assign(&(&d_g * &step.g.mapv(|v| 1.0 - v * v)));
            dgates
                .slice_mut(s![.., 3 * LSTM_UNITS..])
                .assign(&(&d_o * &step.o.mapv(|v| v * (1.0 - v))));

            grads.w = grads.w + step.a.t().dot(&dgates);
            grads.u = grads.u + step.h_prev.t().dot(&dgates);
            grads.b = grads.b + dgates.sum_axis(Axis(0));

            let da = dgates.dot(&self.w.t());
            dh_prev = dh_prev + dgates.dot(&self.u.t());

            let dpre = &da * &step.pre.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
            grads.conv_w = grads.conv_w + step.xwin.t().dot(&dpre);
            grads.conv_b = grads.conv_b + dpre.sum_axis(Axis(0));

            dh = dh_prev;
            dc = dc_prev;
        }
        grads
    }

    /// One SGD update.
    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64) {
        self.conv_w.scaled_add(-learning_rate, &grads.conv_w);
        self.conv_b.scaled_add(-learning_rate, &grads.conv_b);
        self.w.scaled_add(-learning_rate, &grads.w);
        self.u.scaled_add(-learning_rate, &grads.u);
        self.b.scaled_add(-learning_rate, &grads.b);
        self.dense_w.scaled_add(-learning_rate, &grads.dense_w);
        self.dense_b.scaled_add(-learning_rate, &grads.dense_b);
    }

    /// Distribution over ending classes for a single possession tensor.
    pub fn predict(&self, tensor: ArrayView2<'_, f64>, true_length: usize) -> Result<[f64; N_CLASSES]> {
        let (rows, width) = tensor.dim();
        let mut x = Array3::zeros((1, rows, width));
        x.index_axis_mut(Axis(0), 0).assign(&tensor);
        let probs = self.forward(&x, &[true_length])?;
        let mut out = [0.0; N_CLASSES];
        for (slot, v) in out.iter_mut().zip(probs.row(0)) {
            *slot = *v;
        }
        Ok(out)
    }

    /// Inference over a whole corpus in fixed-size chunks, keeping the
    /// per-call working set small.
    pub fn forward_chunked(
        &self,
        data: &Array3<f64>,
        lens: &[usize],
        chunk: usize,
    ) -> Result<Array2<f64>> {
        let n = data.dim().0;
        let mut out = Array2::zeros((n, N_CLASSES));
        let mut start = 0;
        while start < n {
            let end = (start + chunk).min(n);
            let x = data.slice(s![start..end, .., ..]).to_owned();
            let probs = self.forward(&x, &lens[start..end])?;
            out.slice_mut(s![start..end, ..]).assign(&probs);
            start = end;
        }
        Ok(out)
    }
}

// ── Cross-entropy ───────────────────────────────────────────────────────

/// Mean cross-entropy and the matching logit gradient for a batch.
pub fn cross_entropy(probs: &Array2<f64>, labels: &[usize]) -> (f64, Array2<f64>) {
    let batch = probs.dim().0;
    let scale = 1.0 / batch as f64;
    let mut dlogits = probs.clone();
    let mut loss = 0.0;
    for (row, &y) in labels.iter().enumerate() {
        loss -= probs[(row, y)].max(1e-300).ln();
        dlogits[(row, y)] -= 1.0;
    }
    dlogits.mapv_inplace(|v| v * scale);
    (loss * scale, dlogits)
}

/// Fraction of rows whose argmax matches the label (ties to the lower
/// class index).
pub fn accuracy(probs: &Array2<f64>, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = probs
        .rows()
        .into_iter()
        .zip(labels)
        .filter(|(row, &y)| {
            let mut best = 0;
            for (j, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = j;
                }
            }
            best == y
        })
        .count();
    hits as f64 / labels.len() as f64
}

// ── Training ────────────────────────────────────────────────────────────

/// Knobs for behavioral training.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Final consecutive block held out for validation.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            learning_rate: 0.01,
            validation_fraction: 0.30,
            seed: 7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config("validation_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// One line of the training curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

pub const LOSS_CURVE_HEADER: &str = "epoch,train_loss,val_loss,val_acc";

pub fn serialize_loss_curve(curve: &[EpochStats]) -> String {
    let mut out = String::from(LOSS_CURVE_HEADER);
    out.push('\n');
    for e in curve {
        out.push_str(&format!("{},{},{},{}\n", e.epoch, e.train_loss, e.val_loss, e.val_acc));
    }
    out
}

pub fn write_loss_curve(path: &Path, curve: &[EpochStats]) -> Result<()> {
    std::fs::write(path, serialize_loss_curve(curve))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

fn gather_batch(
    data: &Array3<f64>,
    lens: &[usize],
    labels: &[usize],
    idx: &[usize],
) -> (Array3<f64>, Vec<usize>, Vec<usize>) {
    let (_, rows, width) = data.dim();
    let mut x = Array3::zeros((idx.len(), rows, width));
    for (slot, &i) in idx.iter().enumerate() {
        x.index_axis_mut(Axis(0), slot).assign(&data.index_axis(Axis(0), i));
    }
    let l: Vec<usize> = idx.iter().map(|&i| lens[i]).collect();
    let y: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
    (x, l, y)
}

/// Inputs to [`train_classifier`], decoupled from where tensors come
/// from (builder output or a reloaded dump).
pub struct TrainingSet<'a> {
    pub data: &'a Array3<f64>,
    pub true_lengths: &'a [usize],
    /// Class indices per possession.
    pub labels: &'a [usize],
}

/// Mini-batch SGD on cross-entropy. The final consecutive block of the
/// corpus is the validation split; batches reshuffle each epoch from the
/// seeded stream. Divergence (non-finite loss) aborts.
pub fn train_classifier(
    set: &TrainingSet<'_>,
    cfg: &TrainConfig,
) -> Result<(SequenceClassifier, Vec<EpochStats>)> {
    cfg.validate()?;
    let n = set.data.dim().0;
    if n < 100 {
        return Err(Error::InsufficientData(format!(
            "behavioral training needs at least 100 possessions, got {n}"
        )));
    }
    if set.true_lengths.len() != n || set.labels.len() != n {
        return Err(Error::Validation(format!(
            "{n} tensors vs {} lengths / {} labels",
            set.true_lengths.len(),
            set.labels.len()
        )));
    }
    {
        let first = set.labels[0];
        if set.labels.iter().all(|&y| y == first) {
            return Err(Error::SingleClass);
        }
    }
    if let Some(&bad) = set.labels.iter().find(|&&y| y >= N_CLASSES) {
        return Err(Error::Validation(format!("label {bad} outside the {N_CLASSES} classes")));
    }

    let width = set.data.dim().2;
    let n_val = ((n as f64) * cfg.validation_fraction).round() as usize;
    let n_val = n_val.clamp(1, n - 1);
    let n_train = n - n_val;

    let mut model = SequenceClassifier::new(width, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_cafe);
    let mut order: Vec<usize> = (0..n_train).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);

    let (val_x, val_lens, val_labels) = gather_batch(
        set.data,
        set.true_lengths,
        set.labels,
        &(n_train..n).collect::<Vec<_>>(),
    );

    for epoch in 0..cfg.epochs {
        // Fisher–Yates from the seeded stream keeps runs reproducible.
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }

        let mut train_loss = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let (x, lens, labels) = gather_batch(set.data, set.true_lengths, set.labels, chunk);
            let cache = model.forward_cached(&x, &lens)?;
            let (loss, dlogits) = cross_entropy(cache.probabilities(), &labels);
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch, loss });
            }
            let grads = model.backward(&cache, &dlogits);
            model.sgd_step(&grads, cfg.learning_rate);
            train_loss += loss * chunk.len() as f64;
            seen += chunk.len();
        }
        train_loss /= seen as f64;

        let val_probs = model.forward(&val_x, &val_lens)?;
        let (val_loss, _) = cross_entropy(&val_probs, &val_labels);
        if !val_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch, loss: val_loss });
        }
        curve.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            val_acc: accuracy(&val_probs, &val_labels),
        });
    }

    Ok((model, curve))
}

// ── Checkpoint ──────────────────────────────────────────────────────────

const CHECKPOINT_MAGIC: &[u8; 8] = b"GFRNET01";

/// Versioned binary checkpoint: magic, width, then each named tensor as
/// (name, shape, little-endian f64 data).
pub fn write_checkpoint(path: &Path, model: &SequenceClassifier) -> Result<()> {
    let ioerr = |e: std::io::Error| Error::io(path.display().to_string(), e);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(ioerr)?);
    out.write_all(CHECKPOINT_MAGIC).map_err(ioerr)?;
    out.write_all(&(model.width as u32).to_le_bytes()).map_err(ioerr)?;
    let tensors = model.tensors();
    out.write_all(&(tensors.len() as u32).to_le_bytes()).map_err(ioerr)?;
    for (name, shape, data) in tensors {
        out.write_all(&(name.len() as u32).to_le_bytes()).map_err(ioerr)?;
        out.write_all(name.as_bytes()).map_err(ioerr)?;
        out.write_all(&(shape.len() as u32).to_le_bytes()).map_err(ioerr)?;
        for d in &shape {
            out.write_all(&(*d as u32).to_le_bytes()).map_err(ioerr)?;
        }
        for v in data {
            out.write_all(&v.to_le_bytes()).map_err(ioerr)?;
        }
    }
    out.flush().map_err(ioerr)
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint("unexpected end of checkpoint".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n * 8)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}

pub fn read_checkpoint(path: &Path) -> Result<SequenceClassifier> {
    let bytes =
        std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut r = ByteReader { bytes: &bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic or unsupported version".into()));
    }
    let width = r.u32()? as usize;
    let count = r.u32()? as usize;
    let mut model = SequenceClassifier::new(width, 0);
    let mut flat = Vec::with_capacity(model.param_count());
    let expected: Vec<(String, Vec<usize>)> =
        model.tensors().iter().map(|(n, s, _)| (n.to_string(), s.clone())).collect();
    if count != expected.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, found {count}",
            expected.len()
        )));
    }
    for (want_name, want_shape) in &expected {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
        if name != want_name {
            return Err(Error::Checkpoint(format!("tensor {name:?}, expected {want_name:?}")));
        }
        let ndim = r.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u32()? as usize);
        }
        if &shape != want_shape {
            return Err(Error::Checkpoint(format!(
                "tensor {name} has shape {shape:?}, expected {want_shape:?}"
            )));
        }
        flat.extend(r.f64s(shape.iter().product())?);
    }
    model.unflatten(&flat)?;
    Ok(model)
}

// ── Tests ───────────────────────────────────────────────────────────────
