//! Bounded isotonic regression (pool-adjacent-violators) and estimation
//! of the teacher's accuracy statistics from a validation set.
//!
//! The regression task is least-squares over nondecreasing fitted values
//! boxed into [lb, 1]. It is solved by unconstrained PAVA followed by
//! clipping, which is the exact box-constrained minimizer (checked
//! against a brute-force oracle in the tests rather than assumed).

use crate::error::{invalid_argument, io_error, parse_error, Result};
use crate::probvec::{margin_k, top_mask, ProbVector};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Piecewise-constant nondecreasing map fitted by [`pava_bounded`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsotonicModel {
    /// Strictly increasing covariate values.
    breakpoints: Vec<f64>,
    /// Nondecreasing fitted values, one per breakpoint, inside [lb, 1].
    values: Vec<f64>,
    lb: f64,
}

impl IsotonicModel {
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lb(&self) -> f64 {
        self.lb
    }

    /// Fitted value at the smallest breakpoint >= `c`; above every
    /// breakpoint the last (largest) value is returned, which is the
    /// only extension that keeps the lookup nondecreasing.
    pub fn predict(&self, c: f64) -> f64 {
        let idx = self.breakpoints.partition_point(|&b| b < c);
        if idx == self.breakpoints.len() {
            *self.values.last().expect("model has at least one value")
        } else {
            self.values[idx]
        }
    }
}

/// Least-squares nondecreasing fit of (covariate, response) pairs with
/// fitted values boxed into [lb, 1].
///
/// Duplicate covariates are merged by weighted averaging before the
/// pooling pass; total cost is O(n log n) from the sort.
pub fn pava_bounded(pairs: &[(f64, f64)], lb: f64) -> Result<IsotonicModel> {
    if pairs.is_empty() {
        return Err(invalid_argument("isotonic regression needs at least one pair"));
    }
    if !(0.0..=1.0).contains(&lb) {
        return Err(invalid_argument(format!(
            "lower bound must lie in [0, 1], got {lb}"
        )));
    }
    for &(c, r) in pairs {
        if !c.is_finite() {
            return Err(invalid_argument(format!("non-finite covariate {c}")));
        }
        if !(0.0..=1.0).contains(&r) {
            return Err(invalid_argument(format!(
                "responses must lie in [0, 1], got {r}"
            )));
        }
    }

    let mut sorted = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite covariates"));

    // Merge ties in the covariate by weighted mean.
    let mut covs: Vec<f64> = Vec::with_capacity(sorted.len());
    let mut resp: Vec<f64> = Vec::with_capacity(sorted.len());
    let mut weight: Vec<f64> = Vec::with_capacity(sorted.len());
    for (c, r) in sorted {
        match covs.last() {
            Some(&last) if last == c => {
                let i = covs.len() - 1;
                let w = weight[i];
                resp[i] = (resp[i] * w + r) / (w + 1.0);
                weight[i] = w + 1.0;
            }
            _ => {
                covs.push(c);
                resp.push(r);
                weight.push(1.0);
            }
        }
    }

    // Pool adjacent violators: maintain a stack of blocks with
    // nondecreasing means.
    struct Block {
        mean: f64,
        weight: f64,
        count: usize,
    }
    let mut blocks: Vec<Block> = Vec::with_capacity(covs.len());
    for (&r, &w) in resp.iter().zip(&weight) {
        let mut block = Block {
            mean: r,
            weight: w,
            count: 1,
        };
        while let Some(prev) = blocks.last() {
            if prev.mean <= block.mean {
                break;
            }
            let prev = blocks.pop().expect("nonempty");
            let total = prev.weight + block.weight;
            block.mean = (prev.mean * prev.weight + block.mean * block.weight) / total;
            block.weight = total;
            block.count += prev.count;
        }
        blocks.push(block);
    }

    let mut values = Vec::with_capacity(covs.len());
    for block in &blocks {
        let clipped = block.mean.clamp(lb, 1.0);
        for _ in 0..block.count {
            values.push(clipped);
        }
    }

    Ok(IsotonicModel {
        breakpoints: covs,
        values,
        lb,
    })
}

/// How the estimator picks k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KMode {
    /// Same k for every example.
    Fixed(usize),
    /// Smallest top-k level whose estimated accuracy clears the threshold.
    Adaptive,
}

/// Fitted top-j accuracy models (j = 1..L-1) plus the k-selection rule.
///
/// The top-L accuracy is identically 1 and is not stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyEstimator {
    models: Vec<IsotonicModel>,
    threshold: f64,
    k_mode: KMode,
    num_classes: usize,
    lb: f64,
}

/// Fits one isotonic model per j = 1..L-1 on pairs
/// (top-j margin of the teacher soft label, top-j correctness), where
/// top-j correctness is 1 iff the true class is among the top-j entries
/// of the soft label.
///
/// `validation` holds (teacher soft label, one-hot truth) pairs. The
/// returned estimator uses adaptive k selection; switch with
/// [`AccuracyEstimator::with_k_mode`].
pub fn fit_accuracy_statistics(
    validation: &[(ProbVector, ProbVector)],
    lb: f64,
    t: f64,
) -> Result<AccuracyEstimator> {
    if validation.len() < 2 {
        return Err(invalid_argument(format!(
            "validation set must have at least 2 examples, got {}",
            validation.len()
        )));
    }
    if !(0.0..=1.0).contains(&t) {
        return Err(invalid_argument(format!(
            "threshold must lie in [0, 1], got {t}"
        )));
    }
    let num_classes = validation[0].0.len();
    for (y_s, g) in validation {
        if y_s.len() != num_classes || g.len() != num_classes {
            return Err(invalid_argument(
                "validation labels must all have the same length",
            ));
        }
        if !y_s.is_normalized() {
            return Err(invalid_argument("teacher soft labels must be normalized"));
        }
        if !g.is_one_hot() {
            return Err(invalid_argument("ground-truth labels must be one-hot"));
        }
    }

    let mut models = Vec::with_capacity(num_classes - 1);
    for j in 1..num_classes {
        let mut pairs = Vec::with_capacity(validation.len());
        for (y_s, g) in validation {
            let covariate = margin_k(y_s, j)?;
            let mask = top_mask(y_s.entries(), j)?;
            let correct = mask.contains(g.class()?);
            pairs.push((covariate, f64::from(u8::from(correct))));
        }
        models.push(pava_bounded(&pairs, lb)?);
    }

    Ok(AccuracyEstimator {
        models,
        threshold: t,
        k_mode: KMode::Adaptive,
        num_classes,
        lb,
    })
}

impl AccuracyEstimator {
    pub fn with_k_mode(mut self, mode: KMode) -> Result<Self> {
        if let KMode::Fixed(k) = mode {
            if k < 2 || k > self.num_classes {
                return Err(invalid_argument(format!(
                    "fixed k = {k} out of range 2..={}",
                    self.num_classes
                )));
            }
        }
        self.k_mode = mode;
        Ok(self)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn lb(&self) -> f64 {
        self.lb
    }

    pub fn k_mode(&self) -> KMode {
        self.k_mode
    }

    /// The fitted top-j accuracy model (1-based j, j <= L-1).
    pub fn model(&self, j: usize) -> Option<&IsotonicModel> {
        if j == 0 {
            return None;
        }
        self.models.get(j - 1)
    }

    /// Estimated top-1 accuracy at this soft label's margin; lies in
    /// [lb, 1].
    pub fn estimate_alpha(&self, y_s: &ProbVector) -> Result<f64> {
        if y_s.len() != self.num_classes {
            return Err(invalid_argument(format!(
                "soft label has {} classes, estimator was fitted on {}",
                y_s.len(),
                self.num_classes
            )));
        }
        Ok(self.models[0].predict(margin_k(y_s, 1)?))
    }

    /// Smallest r whose estimated top-r accuracy clears the threshold
    /// (the top-L accuracy is identically 1, so some r always qualifies),
    /// clamped below at 2. Fixed mode returns the configured k.
    pub fn estimate_k(&self, y_s: &ProbVector) -> Result<usize> {
        if y_s.len() != self.num_classes {
            return Err(invalid_argument(format!(
                "soft label has {} classes, estimator was fitted on {}",
                y_s.len(),
                self.num_classes
            )));
        }
        match self.k_mode {
            KMode::Fixed(k) => Ok(k),
            KMode::Adaptive => {
                for r in 1..self.num_classes {
                    let alpha_r = self.models[r - 1].predict(margin_k(y_s, r)?);
                    if alpha_r >= self.threshold {
                        return Ok(r.max(2));
                    }
                }
                Ok(self.num_classes)
            }
        }
    }

    /// Serializes the estimator (breakpoints/values per j, lb, t, k rule)
    /// as JSON; numbers round-trip exactly.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| parse_error("accuracy estimator", e.to_string()))?;
        std::fs::write(path, json)
            .map_err(|e| io_error(format!("writing estimator to {}", path.display()), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| io_error(format!("reading estimator from {}", path.display()), e))?;
        serde_json::from_str(&text)
            .map_err(|e| parse_error(format!("estimator file {}", path.display()), e.to_string()))
    }
}
