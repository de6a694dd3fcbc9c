//! Synthetic data generation and the structured noisy-teacher simulator.
//!
//! Datasets are Gaussian mixtures (a desk-scale stand-in for image
//! benchmarks) and gamma-margin halfspaces. The teacher simulator
//! realizes the structured noise model: per example there are an
//! accuracy alpha(x), a confusion width k(x), and a soft label y_s(x)
//! whose top-k set always contains the ground truth; sampled hard labels
//! equal the truth with probability alpha(x) and otherwise a uniformly
//! random incorrect class from the top-k set.
//!
//! All generators are pure functions of (seed, params); the generator is
//! a small seedable stream cipher (ChaCha8), so streams are stable
//! within a build without promising bit-exact cross-language output.

use crate::error::{invalid_argument, io_error, parse_error, Error, Result};
use crate::probvec::{top_mask, ProbVector, TopKMask};
use crate::vecops::{distance, dot, norm};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::io::Write;
use std::path::Path;

/// Deterministic generator for a given seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream of a seed; distinct `stream` values never
/// overlap.
pub fn substream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A feature vector with its one-hot ground-truth label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample {
    pub x: Vec<f64>,
    pub g: ProbVector,
}

impl LabeledExample {
    pub fn new(x: Vec<f64>, g: ProbVector) -> Result<Self> {
        if !g.is_one_hot() {
            return Err(invalid_argument("ground-truth label must be one-hot"));
        }
        Ok(Self { x, g })
    }

    /// Index of the true class.
    pub fn class(&self) -> usize {
        self.g.argmax()
    }
}

/// Ground-truth halfspace: unit normal and margin.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfspaceTruth {
    pub w_star: Vec<f64>,
    pub gamma: f64,
}

impl HalfspaceTruth {
    /// One-hot label of x: class 0 iff `w_star . x > 0`.
    pub fn label(&self, x: &[f64]) -> ProbVector {
        let class = usize::from(dot(&self.w_star, x) <= 0.0);
        ProbVector::one_hot(class, 2).expect("binary one-hot")
    }
}

fn standard_normal_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn unit_sphere(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v = standard_normal_vec(rng, dim);
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn unit_ball(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let sphere = unit_sphere(rng, dim);
    let radius = rng.random::<f64>().powf(1.0 / dim as f64);
    sphere.into_iter().map(|x| x * radius).collect()
}

/// Class centers at pairwise distance >= `separation`.
///
/// With enough dimensions the centers sit on mutually orthogonal axes
/// (distance exactly `separation`); otherwise centers are rejection
/// placed on a sphere whose radius grows until placement succeeds.
fn place_centers(
    num_classes: usize,
    dim: usize,
    separation: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    if num_classes <= dim {
        // Gram-Schmidt an L x d Gaussian draw.
        let radius = separation / std::f64::consts::SQRT_2;
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(num_classes);
        while basis.len() < num_classes {
            let mut v = standard_normal_vec(rng, dim);
            for b in &basis {
                let proj = dot(&v, b);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= proj * bi;
                }
            }
            let n = norm(&v);
            if n > 1e-9 {
                basis.push(v.into_iter().map(|x| x / n).collect());
            }
        }
        return Ok(basis
            .into_iter()
            .map(|b| b.into_iter().map(|x| x * radius).collect())
            .collect());
    }

    let mut radius = separation;
    for _ in 0..8 {
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(num_classes);
        let mut attempts = 0;
        while centers.len() < num_classes && attempts < 200 * num_classes {
            attempts += 1;
            let candidate: Vec<f64> = unit_sphere(rng, dim)
                .into_iter()
                .map(|x| x * radius)
                .collect();
            if centers
                .iter()
                .all(|c| distance(c, &candidate) >= separation)
            {
                centers.push(candidate);
            }
        }
        if centers.len() == num_classes {
            return Ok(centers);
        }
        radius *= 1.5;
    }
    Err(invalid_argument(format!(
        "cannot place {num_classes} centers at separation {separation} in {dim} dimensions"
    )))
}

/// Gaussian-mixture classification sample: class drawn uniformly,
/// features `N(mu_class, I)`, then the whole sample rescaled into the
/// unit ball. Deterministic given the seed.
pub fn gen_gaussian_mixture(
    num_classes: usize,
    dim: usize,
    n: usize,
    separation: f64,
    seed: u64,
) -> Result<Vec<LabeledExample>> {
    if num_classes < 2 {
        return Err(invalid_argument("need at least 2 classes"));
    }
    if dim == 0 {
        return Err(invalid_argument("dimension must be >= 1"));
    }
    if !(separation > 0.0) {
        return Err(invalid_argument("separation must be positive"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut rng = seeded_rng(seed);
    let centers = place_centers(num_classes, dim, separation, &mut rng)?;

    let mut raw: Vec<(Vec<f64>, usize)> = Vec::with_capacity(n);
    let mut max_norm: f64 = 1.0;
    for _ in 0..n {
        let class = rng.random_range(0..num_classes);
        let noise = standard_normal_vec(&mut rng, dim);
        let x: Vec<f64> = centers[class]
            .iter()
            .zip(&noise)
            .map(|(c, e)| c + e)
            .collect();
        max_norm = max_norm.max(norm(&x));
        raw.push((x, class));
    }
    raw.into_iter()
        .map(|(x, class)| {
            LabeledExample::new(
                x.into_iter().map(|v| v / max_norm).collect(),
                ProbVector::one_hot(class, num_classes)?,
            )
        })
        .collect()
}

/// Like [`gen_margin_halfspace`] but also reports how many candidate
/// draws the rejection sampler consumed.
pub fn gen_margin_halfspace_with_stats(
    dim: usize,
    gamma: f64,
    n: usize,
    seed: u64,
) -> Result<(HalfspaceTruth, Vec<LabeledExample>, u64)> {
    if dim == 0 {
        return Err(invalid_argument("dimension must be >= 1"));
    }
    if !(gamma > 0.0) || gamma >= 1.0 {
        return Err(invalid_argument(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )));
    }
    let mut rng = seeded_rng(seed);
    let w_star = unit_sphere(&mut rng, dim);
    let truth = HalfspaceTruth {
        w_star,
        gamma,
    };
    let mut examples = Vec::with_capacity(n);
    let mut attempts: u64 = 0;
    while examples.len() < n {
        attempts += 1;
        let x = unit_ball(&mut rng, dim);
        if dot(&truth.w_star, &x).abs() >= gamma {
            let g = truth.label(&x);
            examples.push(LabeledExample { x, g });
        }
    }
    Ok((truth, examples, attempts))
}

/// One rejection-sampled unit-ball point with `|w_star . x| >= gamma`.
pub fn sample_margin_point(truth: &HalfspaceTruth, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let x = unit_ball(rng, truth.w_star.len());
        if dot(&truth.w_star, &x).abs() >= truth.gamma {
            return x;
        }
    }
}

/// Gamma-margin halfspace sample: `w_star` uniform on the unit sphere,
/// features uniform in the unit ball rejected until `|w_star . x| >=
/// gamma`, labels `(1{w.x > 0}, 1{w.x <= 0})`.
pub fn gen_margin_halfspace(
    dim: usize,
    gamma: f64,
    n: usize,
    seed: u64,
) -> Result<(HalfspaceTruth, Vec<LabeledExample>)> {
    let (truth, examples, _) = gen_margin_halfspace_with_stats(dim, gamma, n, seed)?;
    Ok((truth, examples))
}

/// Teacher noise regimes supported by the simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TeacherMode {
    /// Same accuracy and confusion width everywhere.
    Constant { alpha: f64, k: usize },
    /// Accuracy increases with a synthetic per-example confidence score,
    /// and the soft-label margin increases with the same score, so the
    /// margin is monotonically informative of alpha(x).
    MarginCorrelated {
        alpha_min: f64,
        alpha_max: f64,
        k: usize,
    },
    /// Random classification noise: binary labels flipped with constant
    /// probability `1 - alpha`.
    Rcn { alpha: f64 },
}

/// Per-example teacher statistics and soft labels for a fixed dataset.
///
/// The ground-truth class is inside `top_mask(y_s(x), k(x))` for every
/// example; this is enforced at construction so sampling realizes the
/// stated conditional distribution exactly.
#[derive(Debug, Clone)]
pub struct NoisyTeacherSpec {
    alphas: Vec<f64>,
    ks: Vec<usize>,
    soft_labels: Vec<ProbVector>,
    masks: Vec<TopKMask>,
    classes: Vec<usize>,
}

impl NoisyTeacherSpec {
    /// Validates the noise-model invariants; fails fast instead of
    /// silently re-ranking.
    pub fn new(
        alphas: Vec<f64>,
        ks: Vec<usize>,
        soft_labels: Vec<ProbVector>,
        classes: Vec<usize>,
    ) -> Result<Self> {
        let n = alphas.len();
        if ks.len() != n || soft_labels.len() != n || classes.len() != n {
            return Err(invalid_argument("spec fields must have equal lengths"));
        }
        let mut masks = Vec::with_capacity(n);
        for i in 0..n {
            let l = soft_labels[i].len();
            if !(0.0..=1.0).contains(&alphas[i]) {
                return Err(Error::InvalidSpec(format!(
                    "alpha({i}) = {} outside [0, 1]",
                    alphas[i]
                )));
            }
            if ks[i] < 2 || ks[i] > l {
                return Err(Error::InvalidSpec(format!(
                    "k({i}) = {} outside 2..={l}",
                    ks[i]
                )));
            }
            let mask = top_mask(soft_labels[i].entries(), ks[i])?;
            if !mask.contains(classes[i]) {
                return Err(Error::InvalidSpec(format!(
                    "ground-truth class {} of example {i} is outside the top-{} of its soft label",
                    classes[i], ks[i]
                )));
            }
            masks.push(mask);
        }
        Ok(Self {
            alphas,
            ks,
            soft_labels,
            masks,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn alpha(&self, i: usize) -> f64 {
        self.alphas[i]
    }

    pub fn k(&self, i: usize) -> usize {
        self.ks[i]
    }

    pub fn soft_label(&self, i: usize) -> &ProbVector {
        &self.soft_labels[i]
    }

    pub fn mask(&self, i: usize) -> &TopKMask {
        &self.masks[i]
    }

    pub fn class(&self, i: usize) -> usize {
        self.classes[i]
    }
}

/// Soft label with `predicted` on top, the rest of the top-k set next,
/// and (when L > k) a sliver of mass on the remaining classes. The top-1
/// margin grows monotonically with `confidence`, and the predicted class
/// dominates even at low confidence, mirroring the overconfidence of
/// trained teachers.
fn build_soft_label(
    num_classes: usize,
    k: usize,
    predicted: usize,
    others: &[usize],
    confidence: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ProbVector> {
    debug_assert_eq!(others.len(), k - 1);
    let top = 0.55 + 0.43 * confidence;
    let mut mass = vec![0.0; num_classes];
    mass[predicted] = top;
    let mut min_inside = top;
    for &c in others {
        let jitter: f64 = rng.random_range(0.95..1.05);
        mass[c] = (1.0 - top) / (k - 1) as f64 * jitter;
        min_inside = min_inside.min(mass[c]);
    }
    // Outside classes stay strictly below every in-mask mass.
    let outside_cap = 0.4 * min_inside;
    for (c, m) in mass.iter_mut().enumerate() {
        if *m == 0.0 && c != predicted {
            *m = outside_cap * rng.random_range(0.7..1.3) / 1.3;
        }
    }
    let total: f64 = mass.iter().sum();
    ProbVector::normalized(mass.into_iter().map(|m| m / total).collect())
}

/// Builds the per-example teacher statistics for `examples` under the
/// requested noise regime. Deterministic given the seed.
pub fn make_teacher_spec(
    examples: &[LabeledExample],
    mode: TeacherMode,
    seed: u64,
) -> Result<NoisyTeacherSpec> {
    let num_classes = match examples.first() {
        Some(e) => e.g.len(),
        None => {
            return NoisyTeacherSpec::new(Vec::new(), Vec::new(), Vec::new(), Vec::new());
        }
    };
    let (alpha_range, k) = match mode {
        TeacherMode::Constant { alpha, k } => ((alpha, alpha), k),
        TeacherMode::MarginCorrelated {
            alpha_min,
            alpha_max,
            k,
        } => {
            if alpha_min > alpha_max {
                return Err(invalid_argument("alpha_min must be <= alpha_max"));
            }
            ((alpha_min, alpha_max), k)
        }
        TeacherMode::Rcn { alpha } => {
            if num_classes != 2 {
                return Err(invalid_argument(format!(
                    "rcn mode requires binary labels, got {num_classes} classes"
                )));
            }
            ((alpha, alpha), 2)
        }
    };
    if !(0.0..=1.0).contains(&alpha_range.0) || !(0.0..=1.0).contains(&alpha_range.1) {
        return Err(invalid_argument("alpha must lie in [0, 1]"));
    }
    if k < 2 || k > num_classes {
        return Err(invalid_argument(format!(
            "k = {k} outside 2..={num_classes}"
        )));
    }

    let mut rng = seeded_rng(seed);
    let mut alphas = Vec::with_capacity(examples.len());
    let mut ks = Vec::with_capacity(examples.len());
    let mut soft_labels = Vec::with_capacity(examples.len());
    let mut classes = Vec::with_capacity(examples.len());
    for example in examples {
        if example.g.len() != num_classes {
            return Err(invalid_argument("examples must share a label length"));
        }
        let true_class = example.class();
        let confidence: f64 = rng.random();
        let alpha = alpha_range.0 + (alpha_range.1 - alpha_range.0) * confidence;
        let correct = rng.random::<f64>() < alpha;

        // Distractors are the cyclically adjacent classes: the teacher
        // confuses the same class pairs on every example, the persistent
        // confusion structure real teachers exhibit.
        let distractors: Vec<usize> = (1..k).map(|d| (true_class + d) % num_classes).collect();
        let distractors = &distractors[..];

        let (predicted, others): (usize, Vec<usize>) = if correct {
            (true_class, distractors.to_vec())
        } else {
            let wrong = distractors[rng.random_range(0..k - 1)];
            let mut rest: Vec<usize> = distractors.iter().copied().filter(|&c| c != wrong).collect();
            rest.push(true_class);
            (wrong, rest)
        };

        let y_s = build_soft_label(num_classes, k, predicted, &others, confidence, &mut rng)?;
        alphas.push(alpha);
        ks.push(k);
        soft_labels.push(y_s);
        classes.push(true_class);
    }
    NoisyTeacherSpec::new(alphas, ks, soft_labels, classes)
}

/// Draws one hard teacher label for example `index`: the truth with
/// probability alpha(x), otherwise a uniformly random incorrect class
/// from the top-k of the soft label.
pub fn sample_noisy_label(
    spec: &NoisyTeacherSpec,
    index: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ProbVector> {
    if index >= spec.len() {
        return Err(invalid_argument(format!(
            "example index {index} out of range for spec of length {}",
            spec.len()
        )));
    }
    let true_class = spec.class(index);
    let mask = spec.mask(index);
    if !mask.contains(true_class) {
        return Err(Error::InvalidSpec(format!(
            "ground-truth class {true_class} escaped the top-k mask of example {index}"
        )));
    }
    let num_classes = spec.soft_label(index).len();
    if rng.random::<f64>() < spec.alpha(index) {
        return ProbVector::one_hot(true_class, num_classes);
    }
    let candidates: Vec<usize> = mask.indices().filter(|&c| c != true_class).collect();
    debug_assert_eq!(candidates.len(), spec.k(index) - 1);
    let pick = candidates[rng.random_range(0..candidates.len())];
    ProbVector::one_hot(pick, num_classes)
}

// ---------------------------------------------------------------------
// CSV export / import.
//
// One row per example: columns x_1..x_d, then either a single integer
// `label` column (hard labels) or `y_1..y_L` probability columns (soft
// labels). Header row mandatory, UTF-8, '.' decimal separator.
// ---------------------------------------------------------------------

/// Writes examples with hard (integer class) labels.
pub fn write_examples_csv(path: impl AsRef<Path>, examples: &[LabeledExample]) -> Result<()> {
    let path = path.as_ref();
    let context = || format!("writing dataset to {}", path.display());
    let file = std::fs::File::create(path).map_err(|e| io_error(context(), e))?;
    let mut out = std::io::BufWriter::new(file);
    let dim = examples.first().map_or(0, |e| e.x.len());
    let header: Vec<String> = (1..=dim)
        .map(|i| format!("x_{i}"))
        .chain(["label".to_string()])
        .collect();
    writeln!(out, "{}", header.join(",")).map_err(|e| io_error(context(), e))?;
    for example in examples {
        let mut row: Vec<String> = example.x.iter().map(|v| format!("{v}")).collect();
        row.push(format!("{}", example.class()));
        writeln!(out, "{}", row.join(",")).map_err(|e| io_error(context(), e))?;
    }
    Ok(())
}

/// Writes examples with soft (per-class probability) labels.
pub fn write_soft_labels_csv(
    path: impl AsRef<Path>,
    xs: &[Vec<f64>],
    labels: &[ProbVector],
) -> Result<()> {
    if xs.len() != labels.len() {
        return Err(invalid_argument("xs and labels must have equal lengths"));
    }
    let path = path.as_ref();
    let context = || format!("writing soft labels to {}", path.display());
    let file = std::fs::File::create(path).map_err(|e| io_error(context(), e))?;
    let mut out = std::io::BufWriter::new(file);
    let dim = xs.first().map_or(0, |x| x.len());
    let l = labels.first().map_or(0, |y| y.len());
    let header: Vec<String> = (1..=dim)
        .map(|i| format!("x_{i}"))
        .chain((1..=l).map(|i| format!("y_{i}")))
        .collect();
    writeln!(out, "{}", header.join(",")).map_err(|e| io_error(context(), e))?;
    for (x, y) in xs.iter().zip(labels) {
        let row: Vec<String> = x
            .iter()
            .chain(y.entries())
            .map(|v| format!("{v}"))
            .collect();
        writeln!(out, "{}", row.join(",")).map_err(|e| io_error(context(), e))?;
    }
    Ok(())
}

fn split_header(header: &csv::StringRecord) -> Result<(usize, bool, usize)> {
    let names: Vec<&str> = header.iter().collect();
    let dim = names.iter().take_while(|n| n.starts_with("x_")).count();
    let rest = &names[dim..];
    if rest == ["label"] {
        return Ok((dim, true, 1));
    }
    let soft = rest.len() >= 2 && rest.iter().all(|n| n.starts_with("y_"));
    if soft {
        return Ok((dim, false, rest.len()));
    }
    Err(parse_error(
        "csv header",
        format!("expected x_1..x_d then `label` or y_1..y_L, got {names:?}"),
    ))
}

/// Reads a hard-labeled dataset. The number of classes is inferred as
/// `max label + 1` unless supplied.
pub fn read_examples_csv(
    path: impl AsRef<Path>,
    num_classes: Option<usize>,
) -> Result<Vec<LabeledExample>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| parse_error(format!("dataset {display}"), e.to_string()))?;
    let (dim, hard, _) = split_header(reader.headers().map_err(|e| {
        parse_error(format!("dataset {display}"), e.to_string())
    })?)?;
    if !hard {
        return Err(parse_error(
            format!("dataset {display}"),
            "expected hard labels (a `label` column)",
        ));
    }
    let mut rows: Vec<(Vec<f64>, usize)> = Vec::new();
    let mut max_label = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| parse_error(format!("dataset {display}"), e.to_string()))?;
        if record.len() != dim + 1 {
            return Err(parse_error(
                format!("dataset {display} row {}", line + 2),
                format!("expected {} fields, got {}", dim + 1, record.len()),
            ));
        }
        let mut x = Vec::with_capacity(dim);
        for field in record.iter().take(dim) {
            x.push(field.parse::<f64>().map_err(|e| {
                parse_error(format!("dataset {display} row {}", line + 2), e.to_string())
            })?);
        }
        let label = record[dim].parse::<usize>().map_err(|e| {
            parse_error(format!("dataset {display} row {}", line + 2), e.to_string())
        })?;
        max_label = max_label.max(label);
        rows.push((x, label));
    }
    let l = num_classes.unwrap_or(max_label + 1).max(2);
    if max_label >= l {
        return Err(parse_error(
            format!("dataset {display}"),
            format!("label {max_label} out of range for {l} classes"),
        ));
    }
    rows.into_iter()
        .map(|(x, label)| LabeledExample::new(x, ProbVector::one_hot(label, l)?))
        .collect()
}

/// Reads a soft-labeled dataset (y_1..y_L columns).
pub fn read_soft_labels_csv(path: impl AsRef<Path>) -> Result<Vec<(Vec<f64>, ProbVector)>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| parse_error(format!("dataset {display}"), e.to_string()))?;
    let (dim, hard, l) = split_header(reader.headers().map_err(|e| {
        parse_error(format!("dataset {display}"), e.to_string())
    })?)?;
    if hard {
        return Err(parse_error(
            format!("dataset {display}"),
            "expected soft labels (y_1..y_L columns)",
        ));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| parse_error(format!("dataset {display}"), e.to_string()))?;
        if record.len() != dim + l {
            return Err(parse_error(
                format!("dataset {display} row {}", line + 2),
                format!("expected {} fields, got {}", dim + l, record.len()),
            ));
        }
        let values: Vec<f64> = record
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| {
                parse_error(format!("dataset {display} row {}", line + 2), e.to_string())
            })?;
        let (x, y) = values.split_at(dim);
        rows.push((x.to_vec(), ProbVector::new(y.to_vec())?));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixing::{mix, MixVariant};
    use crate::probvec::err_indicator;

    #[test]
    fn mixture_generator_is_deterministic_and_separable() {
        assert!(gen_gaussian_mixture(3, 4, 0, 1.0, 7).unwrap().is_empty());

        let a = gen_gaussian_mixture(3, 4, 200, 10.0, 42).unwrap();
        let b = gen_gaussian_mixture(3, 4, 200, 10.0, 42).unwrap();
        assert_eq!(a, b);

        // Nearest-centroid oracle scores 100% at separation 10.
        let mut sums = vec![vec![0.0; 4]; 3];
        let mut counts = vec![0usize; 3];
        for e in &a {
            counts[e.class()] += 1;
            for (s, x) in sums[e.class()].iter_mut().zip(&e.x) {
                *s += x;
            }
        }
        let centroids: Vec<Vec<f64>> = sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| s.iter().map(|v| v / c.max(1) as f64).collect())
            .collect();
        for e in &a {
            let nearest = (0..3)
                .min_by(|&i, &j| {
                    distance(&centroids[i], &e.x)
                        .partial_cmp(&distance(&centroids[j], &e.x))
                        .unwrap()
                })
                .unwrap();
            assert_eq!(nearest, e.class());
        }
    }

    #[test]
    fn mixture_handles_more_classes_than_dims() {
        let sample = gen_gaussian_mixture(5, 2, 50, 0.5, 3).unwrap();
        assert_eq!(sample.len(), 50);
        // Packing 100 classes at huge separation into 1 dim must fail.
        assert!(gen_gaussian_mixture(100, 1, 10, 1e6, 3).is_err());
    }

    #[test]
    fn halfspace_sample_meets_margin_and_norm_invariants() {
        let (truth, examples) = gen_margin_halfspace(6, 0.15, 500, 11).unwrap();
        assert!((norm(&truth.w_star) - 1.0).abs() < 1e-9);
        for e in &examples {
            let proj = dot(&truth.w_star, &e.x);
            assert!(proj.abs() >= 0.15);
            assert!(norm(&e.x) <= 1.0 + 1e-12);
            let expected = usize::from(proj <= 0.0);
            assert_eq!(e.class(), expected);
        }
        assert!(gen_margin_halfspace(6, 1.0, 10, 1).is_err());
        assert!(gen_margin_halfspace(6, 0.0, 10, 1).is_err());
    }

    #[test]
    fn halfspace_rejection_rate_matches_monte_carlo_slab_mass() {
        let dim = 10;
        let gamma = 0.1;
        let n = 10_000;
        let (truth, _, attempts) = gen_margin_halfspace_with_stats(dim, gamma, n, 5).unwrap();
        let accept_rate = n as f64 / attempts as f64;

        // Independent Monte-Carlo estimate of the accepted-region mass.
        let mut rng = seeded_rng(987_654);
        let trials = 200_000;
        let mut accepted = 0usize;
        for _ in 0..trials {
            let x = unit_ball(&mut rng, dim);
            if dot(&truth.w_star, &x).abs() >= gamma {
                accepted += 1;
            }
        }
        let mc_rate = accepted as f64 / trials as f64;
        assert!(
            (accept_rate - mc_rate).abs() < 0.02,
            "generator {accept_rate} vs oracle {mc_rate}"
        );
    }

    #[test]
    fn perfect_teacher_always_returns_truth() {
        let examples = gen_gaussian_mixture(4, 4, 50, 2.0, 1).unwrap();
        let spec =
            make_teacher_spec(&examples, TeacherMode::Constant { alpha: 1.0, k: 2 }, 9).unwrap();
        let mut rng = seeded_rng(10);
        for i in 0..examples.len() {
            for _ in 0..20 {
                let y = sample_noisy_label(&spec, i, &mut rng).unwrap();
                assert_eq!(y, examples[i].g);
            }
        }
    }

    #[test]
    fn zero_accuracy_binary_teacher_always_flips() {
        let (_, examples) = gen_margin_halfspace(3, 0.2, 30, 2).unwrap();
        let spec = make_teacher_spec(&examples, TeacherMode::Rcn { alpha: 0.0 }, 3).unwrap();
        let mut rng = seeded_rng(4);
        for i in 0..examples.len() {
            let y = sample_noisy_label(&spec, i, &mut rng).unwrap();
            assert_eq!(err_indicator(y.entries(), examples[i].g.entries()).unwrap(), 1);
        }
    }

    #[test]
    fn rcn_flip_rate_matches_alpha() {
        let (_, examples) = gen_margin_halfspace(3, 0.2, 1, 6).unwrap();
        let spec = make_teacher_spec(&examples, TeacherMode::Rcn { alpha: 0.8 }, 7).unwrap();
        let mut rng = seeded_rng(8);
        let draws = 100_000;
        let mut flips = 0usize;
        for _ in 0..draws {
            let y = sample_noisy_label(&spec, 0, &mut rng).unwrap();
            flips += err_indicator(y.entries(), examples[0].g.entries()).unwrap() as usize;
        }
        let rate = flips as f64 / draws as f64;
        assert!((rate - 0.2).abs() < 0.004, "flip rate {rate}");
    }

    #[test]
    fn rcn_requires_binary_labels() {
        let examples = gen_gaussian_mixture(3, 3, 5, 2.0, 1).unwrap();
        assert!(matches!(
            make_teacher_spec(&examples, TeacherMode::Rcn { alpha: 0.5 }, 1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn specs_always_satisfy_containment() {
        let examples = gen_gaussian_mixture(6, 3, 100, 1.0, 13).unwrap();
        for (mode, seed) in [
            (TeacherMode::Constant { alpha: 0.7, k: 3 }, 21u64),
            (
                TeacherMode::MarginCorrelated {
                    alpha_min: 0.2,
                    alpha_max: 1.0,
                    k: 4,
                },
                22,
            ),
        ] {
            let spec = make_teacher_spec(&examples, mode, seed).unwrap();
            for i in 0..spec.len() {
                let mask = top_mask(spec.soft_label(i).entries(), spec.k(i)).unwrap();
                assert!(mask.contains(spec.class(i)));
                assert_eq!(&mask, spec.mask(i));
            }
        }
    }

    #[test]
    fn invalid_spec_is_rejected_not_reranked() {
        // Soft label whose top-2 excludes the true class 2.
        let y_s = ProbVector::new(vec![0.5, 0.4, 0.1]).unwrap();
        let result = NoisyTeacherSpec::new(vec![0.5], vec![2], vec![y_s], vec![2]);
        assert!(matches!(result, Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn sampled_labels_stay_inside_mask_union_truth() {
        let examples = gen_gaussian_mixture(5, 3, 40, 1.0, 31).unwrap();
        let spec =
            make_teacher_spec(&examples, TeacherMode::Constant { alpha: 0.3, k: 3 }, 32).unwrap();
        let mut rng = seeded_rng(33);
        for i in 0..spec.len() {
            for _ in 0..50 {
                let y = sample_noisy_label(&spec, i, &mut rng).unwrap();
                let class = y.class().unwrap();
                assert!(spec.mask(i).contains(class) || class == spec.class(i));
            }
        }
    }

    #[test]
    fn empirical_label_mean_matches_mixed_truth() {
        // Single-example version of the noise-model identity; the full
        // 20-configuration sweep lives in the acceptance suite.
        let examples = gen_gaussian_mixture(5, 3, 1, 1.0, 41).unwrap();
        let spec =
            make_teacher_spec(&examples, TeacherMode::Constant { alpha: 0.4, k: 3 }, 42).unwrap();
        let expected = mix(
            &examples[0].g,
            spec.alpha(0),
            spec.k(0),
            spec.mask(0),
            MixVariant::Normalized,
        )
        .unwrap();
        let draws = 100_000;
        let mut sums = vec![0.0; 5];
        let mut rng = seeded_rng(43);
        for _ in 0..draws {
            let y = sample_noisy_label(&spec, 0, &mut rng).unwrap();
            for (s, v) in sums.iter_mut().zip(y.entries()) {
                *s += v;
            }
        }
        for (coord, (&mean_sum, &want)) in sums.iter().zip(&expected).enumerate() {
            let mean = mean_sum / draws as f64;
            assert!(
                (mean - want).abs() < 0.005,
                "coordinate {coord}: {mean} vs {want}"
            );
        }
    }

    #[test]
    fn margin_correlated_mode_orders_alpha_by_margin() {
        let examples = gen_gaussian_mixture(5, 4, 400, 1.0, 51).unwrap();
        let spec = make_teacher_spec(
            &examples,
            TeacherMode::MarginCorrelated {
                alpha_min: 0.2,
                alpha_max: 1.0,
                k: 3,
            },
            52,
        )
        .unwrap();
        let mut pairs: Vec<(f64, f64)> = (0..spec.len())
            .map(|i| {
                let margin = crate::probvec::margin_k(spec.soft_label(i), 1).unwrap();
                (margin, spec.alpha(i))
            })
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        // The mass jitter makes the margin a noisy monotone proxy, so
        // check monotonicity of decile means rather than point by point.
        let bucket = pairs.len() / 10;
        let decile_means: Vec<f64> = pairs
            .chunks(bucket)
            .map(|c| c.iter().map(|p| p.1).sum::<f64>() / c.len() as f64)
            .collect();
        for w in decile_means.windows(2) {
            assert!(w[0] <= w[1] + 0.02, "decile means not monotone: {decile_means:?}");
        }
        assert!(decile_means.last().unwrap() - decile_means.first().unwrap() > 0.4);
        let mean_alpha: f64 =
            (0..spec.len()).map(|i| spec.alpha(i)).sum::<f64>() / spec.len() as f64;
        assert!((mean_alpha - 0.6).abs() < 0.05, "mean alpha {mean_alpha}");
    }

    #[test]
    fn csv_round_trips_hard_and_soft_labels() {
        let dir = tempfile::tempdir().unwrap();
        let examples = gen_gaussian_mixture(3, 4, 25, 1.5, 61).unwrap();

        let hard = dir.path().join("hard.csv");
        write_examples_csv(&hard, &examples).unwrap();
        let loaded = read_examples_csv(&hard, Some(3)).unwrap();
        assert_eq!(examples, loaded);

        let spec =
            make_teacher_spec(&examples, TeacherMode::Constant { alpha: 0.6, k: 2 }, 62).unwrap();
        let xs: Vec<Vec<f64>> = examples.iter().map(|e| e.x.clone()).collect();
        let labels: Vec<ProbVector> = (0..spec.len()).map(|i| spec.soft_label(i).clone()).collect();
        let soft = dir.path().join("soft.csv");
        write_soft_labels_csv(&soft, &xs, &labels).unwrap();
        let loaded = read_soft_labels_csv(&soft).unwrap();
        assert_eq!(loaded.len(), examples.len());
        for ((x, y), (wx, wy)) in loaded.iter().zip(xs.iter().zip(&labels)) {
            assert_eq!(x, wx);
            assert_eq!(y, wy);
        }

        // Mismatched reader rejects the other layout.
        assert!(read_examples_csv(&soft, None).is_err());
        assert!(read_soft_labels_csv(&hard).is_err());
    }
}
