//! Linear and softmax students, the closed-form binary SLaM gradient,
//! the adaptive-step linear iteration, a multiclass analytic gradient,
//! a mini-batch SGD trainer, and a finite-difference gradient checker.

use crate::error::{invalid_argument, Error, Result};
use crate::mixing::{mix, slam_example_loss, MixVariant};
use crate::probvec::{cross_entropy, softmax_temp, ProbVector, TopKMask, LOG_FLOOR};
use crate::vecops::dot;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::Write;
use std::path::Path;

/// Clamp bound keeping sigmoid outputs away from 0 and 1.
const F0_CLAMP: f64 = 1e-12;

/// Numerically stable logistic function.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        let e = (-t).exp();
        1.0 / (1.0 + e)
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Binary student output `(sigma(w.x), 1 - sigma(w.x))`.
pub fn sigmoid_pair(x: &[f64], w: &[f64]) -> Result<ProbVector> {
    if x.len() != w.len() {
        return Err(invalid_argument(format!(
            "dimension mismatch: x has {}, w has {}",
            x.len(),
            w.len()
        )));
    }
    let t = dot(w, x);
    if !t.is_finite() {
        return Err(invalid_argument("non-finite inner product"));
    }
    let (p0, p1) = if t >= 0.0 {
        let e = (-t).exp();
        (1.0 / (1.0 + e), e / (1.0 + e))
    } else {
        let e = t.exp();
        (e / (1.0 + e), 1.0 / (1.0 + e))
    };
    ProbVector::new(vec![p0, p1])
}

/// Scalar binary mixing `alpha * f0 + (1 - alpha) * (1 - f0)`.
pub fn binary_mix(f0: f64, alpha: f64) -> f64 {
    alpha * f0 + (1.0 - alpha) * (1.0 - f0)
}

/// The gradient-scale factor
/// `r = f0 (1 - f0) / (m (1 - m)) * |2 alpha - 1|` with `m = binary_mix(f0, alpha)`.
///
/// `f0` is clamped into `[1e-12, 1 - 1e-12]` first; `r = 0` iff
/// `alpha = 1/2`, and `r = 1` for every `f0` when `alpha = 1`.
pub fn r_factor(f0: f64, alpha: f64) -> f64 {
    let f0 = f0.clamp(F0_CLAMP, 1.0 - F0_CLAMP);
    let m = binary_mix(f0, alpha);
    f0 * (1.0 - f0) / (m * (1.0 - m)) * (2.0 * alpha - 1.0).abs()
}

/// Closed-form stochastic gradient of the binary SLaM loss
/// `ce(y, mix(sigmoid_pair(x, w); alpha))` with respect to `w`:
/// `r(f0; alpha) * sgn(2 alpha - 1) * (mix(f0; alpha) - y0) * x`.
pub fn slam_binary_gradient(x: &[f64], y0: f64, w: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if y0 != 0.0 && y0 != 1.0 {
        return Err(invalid_argument(format!("y0 must be 0 or 1, got {y0}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid_argument(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let f0 = sigmoid_pair(x, w)?[0].clamp(F0_CLAMP, 1.0 - F0_CLAMP);
    let scale = r_factor(f0, alpha) * (2.0 * alpha - 1.0).signum() * (binary_mix(f0, alpha) - y0);
    Ok(x.iter().map(|&xi| scale * xi).collect())
}

/// Result of one adaptive-step update.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Applied(Vec<f64>),
    /// `alpha = 1/2` makes the step size undefined; the example is
    /// skipped rather than erroring mid-run.
    SkippedHalfAlpha,
}

/// One iteration of the linear SLaM trainer with its adaptive step size
/// `lambda = 1/r`. The r factor cancels, so the applied update is
/// `w + sgn(2 alpha - 1) * (y0 - mix(f0; alpha)) * x` with no explicit
/// division; this form never blows up when the sigmoid saturates.
pub fn slam_linear_step(w: &[f64], x: &[f64], y0: f64, alpha: f64) -> Result<StepOutcome> {
    if y0 != 0.0 && y0 != 1.0 {
        return Err(invalid_argument(format!("y0 must be 0 or 1, got {y0}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid_argument(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    if alpha == 0.5 {
        return Ok(StepOutcome::SkippedHalfAlpha);
    }
    let f0 = sigmoid_pair(x, w)?[0].clamp(F0_CLAMP, 1.0 - F0_CLAMP);
    let scale = (2.0 * alpha - 1.0).signum() * (y0 - binary_mix(f0, alpha));
    Ok(StepOutcome::Applied(
        w.iter().zip(x).map(|(&wi, &xi)| wi + scale * xi).collect(),
    ))
}

/// Iterate trajectory of the linear trainer.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `(step, weights)` snapshots; the first entry is `(0, zeros)` and
    /// the last is the final iterate.
    pub snapshots: Vec<(usize, Vec<f64>)>,
    /// Number of examples skipped because `alpha = 1/2`.
    pub skipped: usize,
}

impl Trajectory {
    pub fn final_weights(&self) -> &[f64] {
        &self.snapshots.last().expect("at least the initial snapshot").1
    }
}

/// Runs the adaptive-step linear trainer from `w = 0` for `steps` items
/// of a `(x, y0, alpha)` stream, recording a snapshot every
/// `record_cadence` steps (plus the initial and final iterates).
pub fn run_slam_linear<I>(
    stream: I,
    steps: usize,
    record_cadence: usize,
    dim: usize,
) -> Result<Trajectory>
where
    I: IntoIterator<Item = (Vec<f64>, f64, f64)>,
{
    if record_cadence == 0 {
        return Err(invalid_argument("record cadence must be >= 1"));
    }
    if dim == 0 {
        return Err(invalid_argument("dimension must be >= 1"));
    }
    let mut w = vec![0.0; dim];
    let mut snapshots = vec![(0, w.clone())];
    let mut skipped = 0usize;
    let mut it = stream.into_iter();
    for t in 1..=steps {
        let (x, y0, alpha) = it.next().ok_or(Error::StreamExhausted {
            supplied: t - 1,
            required: steps,
        })?;
        if x.len() != dim {
            return Err(invalid_argument(format!(
                "stream item {t} has dimension {}, expected {dim}",
                x.len()
            )));
        }
        match slam_linear_step(&w, &x, y0, alpha)? {
            StepOutcome::Applied(next) => w = next,
            StepOutcome::SkippedHalfAlpha => skipped += 1,
        }
        if t % record_cadence == 0 {
            snapshots.push((t, w.clone()));
        }
    }
    if snapshots.last().map(|(t, _)| *t) != Some(steps) {
        snapshots.push((steps, w));
    }
    Ok(Trajectory { snapshots, skipped })
}

/// Multiclass linear student: `L x d` weights plus optional bias, with a
/// softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxStudent {
    num_classes: usize,
    dim: usize,
    /// Row-major `L x d`.
    weights: Vec<f64>,
    bias: Option<Vec<f64>>,
}

impl SoftmaxStudent {
    pub fn zeros(num_classes: usize, dim: usize, with_bias: bool) -> Result<Self> {
        if num_classes < 2 {
            return Err(invalid_argument("need at least 2 classes"));
        }
        if dim == 0 {
            return Err(invalid_argument("dimension must be >= 1"));
        }
        Ok(Self {
            num_classes,
            dim,
            weights: vec![0.0; num_classes * dim],
            bias: with_bias.then(|| vec![0.0; num_classes]),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> Option<&[f64]> {
        self.bias.as_deref()
    }

    pub fn row(&self, class: usize) -> &[f64] {
        &self.weights[class * self.dim..(class + 1) * self.dim]
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(invalid_argument(format!(
                "input has dimension {}, student expects {}",
                x.len(),
                self.dim
            )));
        }
        Ok((0..self.num_classes)
            .map(|c| dot(self.row(c), x) + self.bias.as_ref().map_or(0.0, |b| b[c]))
            .collect())
    }

    pub fn forward(&self, x: &[f64]) -> Result<ProbVector> {
        softmax_temp(&self.logits(x)?, 1.0)
    }

    /// Predicted class (argmax of the logits, lowest index on ties).
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(crate::probvec::argmax(&self.logits(x)?))
    }

    /// Weight snapshot as CSV, one row per output class
    /// (columns `w_1..w_d`, plus `bias` when present).
    pub fn export_weights_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let context = || format!("writing weights to {}", path.display());
        let file =
            std::fs::File::create(path).map_err(|e| crate::error::io_error(context(), e))?;
        let mut out = std::io::BufWriter::new(file);
        let mut header: Vec<String> = (1..=self.dim).map(|i| format!("w_{i}")).collect();
        if self.bias.is_some() {
            header.push("bias".to_string());
        }
        writeln!(out, "{}", header.join(","))
            .map_err(|e| crate::error::io_error(context(), e))?;
        for c in 0..self.num_classes {
            let mut row: Vec<String> = self.row(c).iter().map(|v| format!("{v}")).collect();
            if let Some(b) = &self.bias {
                row.push(format!("{}", b[c]));
            }
            writeln!(out, "{}", row.join(","))
                .map_err(|e| crate::error::io_error(context(), e))?;
        }
        Ok(())
    }
}

/// Gradient of a per-example loss with respect to a [`SoftmaxStudent`].
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxGradient {
    /// Row-major `L x d`.
    pub weights: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

impl SoftmaxGradient {
    fn zeros(student: &SoftmaxStudent) -> Self {
        Self {
            weights: vec![0.0; student.weights.len()],
            bias: student.bias.as_ref().map(|b| vec![0.0; b.len()]),
        }
    }

    fn accumulate(&mut self, other: &SoftmaxGradient, scale: f64) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += scale * b;
        }
        if let (Some(a), Some(b)) = (&mut self.bias, &other.bias) {
            for (ai, bi) in a.iter_mut().zip(b) {
                *ai += scale * bi;
            }
        }
    }
}

fn gradient_from_logit_grad(
    student: &SoftmaxStudent,
    x: &[f64],
    g_z: &[f64],
) -> SoftmaxGradient {
    let mut weights = Vec::with_capacity(student.weights.len());
    for &gz in g_z {
        weights.extend(x.iter().map(|&xi| gz * xi));
    }
    SoftmaxGradient {
        weights,
        bias: student.bias.as_ref().map(|_| g_z.to_vec()),
    }
}

/// Standard softmax cross-entropy gradient `(f - y) x^T` (rows), plus
/// `(f - y)` for the bias.
pub fn softmax_ce_gradient(
    x: &[f64],
    y: &ProbVector,
    student: &SoftmaxStudent,
) -> Result<SoftmaxGradient> {
    if y.len() != student.num_classes {
        return Err(invalid_argument("label length does not match the student"));
    }
    if !y.is_normalized() {
        return Err(invalid_argument("label must be normalized"));
    }
    let f = student.forward(x)?;
    let g_z: Vec<f64> = f
        .entries()
        .iter()
        .zip(y.entries())
        .map(|(&fi, &yi)| fi - yi)
        .collect();
    Ok(gradient_from_logit_grad(student, x, &g_z))
}

/// Exact gradient of the per-example SLaM loss
/// `ce(y, mix(softmax(Wx + b); alpha, k))` with respect to the student
/// parameters. At `alpha = 1` this takes the plain softmax-CE path, so
/// the two gradients are bit-identical there.
pub fn softmax_slam_gradient(
    x: &[f64],
    y: &ProbVector,
    student: &SoftmaxStudent,
    alpha: f64,
    k: usize,
    mask: &TopKMask,
    variant: MixVariant,
) -> Result<SoftmaxGradient> {
    if y.len() != student.num_classes {
        return Err(invalid_argument("label length does not match the student"));
    }
    if !y.is_normalized() {
        return Err(invalid_argument("label must be normalized"));
    }
    if alpha == 1.0 {
        return softmax_ce_gradient(x, y, student);
    }
    let f = student.forward(x)?;
    let mixed = mix(&f, alpha, k, mask, variant)?;

    let denom = match variant {
        MixVariant::Normalized => (k - 1) as f64,
        MixVariant::Unnormalized => 1.0,
    };
    // d mix_i / d f_i; the operator is coordinatewise affine in f.
    let slope = |i: usize| alpha - (1.0 - alpha) * f64::from(u8::from(mask.contains(i))) / denom;

    // d loss / d f_i, respecting the log floor.
    let g_f: Vec<f64> = (0..f.len())
        .map(|i| {
            if mixed[i] > LOG_FLOOR {
                -y[i] / mixed[i] * slope(i)
            } else {
                0.0
            }
        })
        .collect();

    // Back through the softmax: g_z_j = f_j (g_f_j - sum_i g_f_i f_i).
    let inner: f64 = g_f.iter().zip(f.entries()).map(|(g, fi)| g * fi).sum();
    let g_z: Vec<f64> = f
        .entries()
        .iter()
        .zip(&g_f)
        .map(|(&fi, &gi)| fi * (gi - inner))
        .collect();
    Ok(gradient_from_logit_grad(student, x, &g_z))
}

/// Per-example training target.
#[derive(Debug, Clone)]
pub enum TrainTarget {
    /// Plain cross-entropy against this label.
    Plain { label: ProbVector },
    /// Weighted SLaM loss against this label.
    Mixed {
        label: ProbVector,
        alpha: f64,
        k: usize,
        mask: TopKMask,
        weight: f64,
    },
}

#[derive(Debug, Clone)]
pub struct TrainExample {
    pub x: Vec<f64>,
    pub target: TrainTarget,
}

/// Mini-batch SGD settings. Fixed step size, uniform reshuffle per
/// epoch, deterministic under the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl SgdConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(invalid_argument("batch size must be >= 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(invalid_argument(format!(
                "learning rate must be a positive finite real, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

fn example_loss_grad(
    student: &SoftmaxStudent,
    example: &TrainExample,
    variant: MixVariant,
) -> Result<(f64, SoftmaxGradient, f64)> {
    match &example.target {
        TrainTarget::Plain { label } => {
            let f = student.forward(&example.x)?;
            let loss = cross_entropy(label, f.entries())?;
            Ok((loss, softmax_ce_gradient(&example.x, label, student)?, 1.0))
        }
        TrainTarget::Mixed {
            label,
            alpha,
            k,
            mask,
            weight,
        } => {
            if *weight < 0.0 || !weight.is_finite() {
                return Err(invalid_argument(format!(
                    "example weight must be finite and nonnegative, got {weight}"
                )));
            }
            let f = student.forward(&example.x)?;
            let loss = slam_example_loss(label, &f, *alpha, *k, mask, variant)?;
            let grad = softmax_slam_gradient(&example.x, label, student, *alpha, *k, mask, variant)?;
            Ok((loss, grad, *weight))
        }
    }
}

/// Mini-batch SGD over a mixed clean/pseudo-labeled dataset, invoking
/// `on_epoch` with the student after every epoch. Returns the trained
/// student and the per-epoch average (weighted) loss.
pub fn sgd_train_with<F>(
    init: &SoftmaxStudent,
    data: &[TrainExample],
    variant: MixVariant,
    cfg: &SgdConfig,
    mut on_epoch: F,
) -> Result<(SoftmaxStudent, Vec<f64>)>
where
    F: FnMut(usize, &SoftmaxStudent),
{
    cfg.validate()?;
    let mut student = init.clone();
    if cfg.epochs == 0 || data.is_empty() {
        return Ok((student, Vec::new()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        // Fisher-Yates reshuffle.
        for i in (1..order.len()).rev() {
            let j = rand::Rng::random_range(&mut rng, 0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = SoftmaxGradient::zeros(&student);
            let mut batch_loss = 0.0;
            for &idx in batch {
                let (loss, g, weight) = example_loss_grad(&student, &data[idx], variant)?;
                if !loss.is_finite() {
                    return Err(Error::Diverged(format!(
                        "non-finite loss {loss} at epoch {epoch}, example {idx}"
                    )));
                }
                batch_loss += weight * loss;
                grad.accumulate(&g, weight);
            }
            epoch_loss += batch_loss;
            let scale = cfg.learning_rate / batch.len() as f64;
            for (w, g) in student.weights.iter_mut().zip(&grad.weights) {
                *w -= scale * g;
            }
            if let (Some(b), Some(gb)) = (&mut student.bias, &grad.bias) {
                for (bi, gi) in b.iter_mut().zip(gb) {
                    *bi -= scale * gi;
                }
            }
        }
        curve.push(epoch_loss / data.len() as f64);
        on_epoch(epoch, &student);
    }
    Ok((student, curve))
}

/// [`sgd_train_with`] without an epoch callback.
pub fn sgd_train(
    init: &SoftmaxStudent,
    data: &[TrainExample],
    variant: MixVariant,
    cfg: &SgdConfig,
) -> Result<(SoftmaxStudent, Vec<f64>)> {
    sgd_train_with(init, data, variant, cfg, |_, _| {})
}

/// Outcome of a central-difference gradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDiffReport {
    pub max_rel_err: f64,
    pub worst_coordinate: usize,
    pub pass: bool,
}

/// Compares `grad` against central differences of `loss` at `point`,
/// coordinate by coordinate. The relative error divides by
/// `max(|numeric|, |analytic|, 1e-4)` so near-zero coordinates compare
/// absolutely; the check passes iff the max relative error is <= `tol`.
pub fn finite_diff_check<L, G>(
    loss: L,
    grad: G,
    point: &[f64],
    h: f64,
    tol: f64,
) -> Result<FiniteDiffReport>
where
    L: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    if !(h > 0.0) {
        return Err(invalid_argument("step h must be positive"));
    }
    if !(tol > 0.0) {
        return Err(invalid_argument("tolerance must be positive"));
    }
    let analytic = grad(point);
    if analytic.len() != point.len() {
        return Err(invalid_argument(format!(
            "gradient has {} coordinates, point has {}",
            analytic.len(),
            point.len()
        )));
    }
    let mut max_rel_err = 0.0;
    let mut worst_coordinate = 0;
    let mut p = point.to_vec();
    for i in 0..point.len() {
        let original = p[i];
        p[i] = original + h;
        let up = loss(&p);
        p[i] = original - h;
        let down = loss(&p);
        p[i] = original;
        let numeric = (up - down) / (2.0 * h);
        let denom = numeric.abs().max(analytic[i].abs()).max(1e-4);
        let rel = (numeric - analytic[i]).abs() / denom;
        if rel > max_rel_err {
            max_rel_err = rel;
            worst_coordinate = i;
        }
    }
    Ok(FiniteDiffReport {
        max_rel_err,
        worst_coordinate,
        pass: max_rel_err <= tol,
    })
}
