//! The student-label mixing operator and the SLaM training objectives.
//!
//! Mixing pushes the teacher's noise model onto the *student's* output:
//! the student prediction `f` is blended with a distractor distribution
//! supported on the teacher's top-k classes, and the loss compares the
//! (noisy) teacher label against that mixed prediction. Training the
//! mixed student to match the noisy labels drives the un-mixed student
//! toward the ground truth.

use crate::error::{invalid_argument, Result};
use crate::probvec::{cross_entropy, ProbVector, TopKMask};
use serde::{Deserialize, Serialize};

/// Whether the distractor term is divided by k-1.
///
/// `Normalized` matches the noise model exactly (the mixed one-hot truth
/// is the conditional mean of the noisy label) and is what all
/// theory-facing checks use. `Unnormalized` omits the division and is
/// the experiment-harness default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixVariant {
    Normalized,
    Unnormalized,
}

/// Mixed student prediction:
/// `alpha * f + (1 - alpha) * mask * (1 - f) / (k - 1)` (normalized), or
/// the same without the `/(k-1)` (unnormalized).
///
/// The output is intentionally *not* renormalized; for soft `f` in the
/// normalized multiclass variant the entries can sum above 1, and
/// cross-entropy is evaluated on them directly.
pub fn mix(
    f: &ProbVector,
    alpha: f64,
    k: usize,
    mask: &TopKMask,
    variant: MixVariant,
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid_argument(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    if !f.is_normalized() {
        return Err(invalid_argument("mix requires a normalized student output"));
    }
    if mask.len() != f.len() {
        return Err(invalid_argument(format!(
            "mask length {} does not match vector length {}",
            mask.len(),
            f.len()
        )));
    }
    if mask.k() != k {
        return Err(invalid_argument(format!(
            "mask has {} set bits but k = {k}",
            mask.k()
        )));
    }
    let denom = match variant {
        MixVariant::Normalized => {
            if k < 2 {
                return Err(invalid_argument(
                    "normalized mixing requires k >= 2 (division by k - 1)",
                ));
            }
            (k - 1) as f64
        }
        MixVariant::Unnormalized => 1.0,
    };
    let out = f
        .entries()
        .iter()
        .enumerate()
        .map(|(i, &fi)| {
            let distractor = if mask.contains(i) {
                (1.0 - fi) / denom
            } else {
                0.0
            };
            alpha * fi + (1.0 - alpha) * distractor
        })
        .collect();
    Ok(out)
}

/// Per-example SLaM loss: cross-entropy of the label against the mixed
/// student output. `y` is one-hot for hard distillation and the teacher
/// soft label otherwise.
pub fn slam_example_loss(
    y: &ProbVector,
    f: &ProbVector,
    alpha: f64,
    k: usize,
    mask: &TopKMask,
    variant: MixVariant,
) -> Result<f64> {
    let mixed = mix(f, alpha, k, mask, variant)?;
    cross_entropy(y, &mixed)
}

/// One pseudo-labeled term of the SLaM objective.
#[derive(Debug, Clone)]
pub struct PseudoTerm {
    /// Teacher label (soft or hard) for this example.
    pub label: ProbVector,
    /// Student output for this example.
    pub output: ProbVector,
    pub alpha: f64,
    pub k: usize,
    pub mask: TopKMask,
}

/// Batch SLaM objective
/// `(1/|A u B|) * [ sum_A ce(z, f) + sum_B w(x) * slam_example_loss ]`.
///
/// `labeled` holds (target, student output) pairs from the clean set;
/// `weights`, when given, apply to the pseudo-labeled terms only and
/// default to 1.
pub fn slam_objective(
    labeled: &[(ProbVector, ProbVector)],
    pseudo: &[PseudoTerm],
    variant: MixVariant,
    weights: Option<&[f64]>,
) -> Result<f64> {
    let total = labeled.len() + pseudo.len();
    if total == 0 {
        return Err(invalid_argument("objective over an empty batch"));
    }
    if let Some(w) = weights {
        if w.len() != pseudo.len() {
            return Err(invalid_argument(format!(
                "got {} weights for {} pseudo-labeled examples",
                w.len(),
                pseudo.len()
            )));
        }
        if let Some(bad) = w.iter().find(|&&wi| wi < 0.0 || !wi.is_finite()) {
            return Err(invalid_argument(format!(
                "weights must be finite and nonnegative, got {bad}"
            )));
        }
    }
    let mut sum = 0.0;
    for (target, output) in labeled {
        sum += cross_entropy(target, output.entries())?;
    }
    for (i, term) in pseudo.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        sum += w
            * slam_example_loss(
                &term.label,
                &term.output,
                term.alpha,
                term.k,
                &term.mask,
                variant,
            )?;
    }
    Ok(sum / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probvec::top_mask;
    use proptest::prelude::*;

    fn pv(entries: &[f64]) -> ProbVector {
        ProbVector::new(entries.to_vec()).unwrap()
    }

    fn full_mask(l: usize) -> TopKMask {
        TopKMask::from_bits(vec![true; l]).unwrap()
    }

    #[test]
    fn mix_is_identity_at_alpha_one() {
        let f = pv(&[0.3, 0.5, 0.2]);
        let mask = full_mask(3);
        for variant in [MixVariant::Normalized, MixVariant::Unnormalized] {
            let m = mix(&f, 1.0, 3, &mask, variant).unwrap();
            assert_eq!(m, f.entries());
        }
    }

    #[test]
    fn mix_full_flip_in_binary() {
        let f = pv(&[1.0, 0.0]);
        let mask = full_mask(2);
        let m = mix(&f, 0.0, 2, &mask, MixVariant::Normalized).unwrap();
        assert_eq!(m, vec![0.0, 1.0]);
    }

    #[test]
    fn mix_matches_worked_multiclass_example() {
        // Hand evaluation of the operator; the output sums to 1.04.
        let f = pv(&[0.5, 0.2, 0.2, 0.1]);
        let mask = TopKMask::from_bits(vec![true, true, false, true]).unwrap();
        let m = mix(&f, 0.6, 3, &mask, MixVariant::Normalized).unwrap();
        let expected = [0.40, 0.28, 0.12, 0.24];
        for (got, want) in m.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{m:?}");
        }
        assert!((m.iter().sum::<f64>() - 1.04).abs() < 1e-12);
    }

    #[test]
    fn mix_argument_checks() {
        let f = pv(&[0.5, 0.5]);
        let mask = full_mask(2);
        assert!(mix(&f, 1.5, 2, &mask, MixVariant::Normalized).is_err());
        assert!(mix(&f, -0.1, 2, &mask, MixVariant::Normalized).is_err());
        assert!(mix(&f, 0.5, 1, &mask, MixVariant::Normalized).is_err());
        let one = TopKMask::from_bits(vec![true, false]).unwrap();
        assert!(mix(&f, 0.5, 1, &one, MixVariant::Normalized).is_err());
        // k = 1 without the division is well-defined.
        assert!(mix(&f, 0.5, 1, &one, MixVariant::Unnormalized).is_ok());
        let unnorm = pv(&[0.9, 0.9]);
        assert!(mix(&unnorm, 0.5, 2, &mask, MixVariant::Normalized).is_err());
    }

    #[test]
    fn loss_matches_worked_examples() {
        let one_hot = ProbVector::one_hot(0, 2).unwrap();
        let mask = full_mask(2);
        let loss =
            slam_example_loss(&one_hot, &one_hot, 1.0, 2, &mask, MixVariant::Normalized).unwrap();
        assert_eq!(loss, 0.0);

        // alpha = 1 reduces to the vanilla distillation loss.
        let y = pv(&[0.6, 0.4]);
        let f = pv(&[0.3, 0.7]);
        let slam = slam_example_loss(&y, &f, 1.0, 2, &mask, MixVariant::Unnormalized).unwrap();
        let vanilla = cross_entropy(&y, f.entries()).unwrap();
        assert_eq!(slam, vanilla);

        // -log(0.8*0.7 + 0.2*0.3) = -log(0.62)
        let f = pv(&[0.7, 0.3]);
        let loss =
            slam_example_loss(&one_hot, &f, 0.8, 2, &mask, MixVariant::Normalized).unwrap();
        assert!((loss - -(0.62f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn objective_matches_hand_computation() {
        let y = ProbVector::one_hot(0, 2).unwrap();
        let f_a = pv(&[0.9, 0.1]);
        let f_b = pv(&[0.7, 0.3]);
        let mask = full_mask(2);
        let pseudo = vec![PseudoTerm {
            label: y.clone(),
            output: f_b.clone(),
            alpha: 0.8,
            k: 2,
            mask,
        }];
        let obj = slam_objective(
            &[(y.clone(), f_a.clone())],
            &pseudo,
            MixVariant::Normalized,
            Some(&[2.0]),
        )
        .unwrap();
        let expected = (-(0.9f64.ln()) + 2.0 * -(0.62f64.ln())) / 2.0;
        assert!((obj - expected).abs() < 1e-12);
    }

    #[test]
    fn objective_edge_cases() {
        let y = ProbVector::one_hot(1, 2).unwrap();
        let f = pv(&[0.4, 0.6]);
        // Empty pseudo batch: plain supervised average.
        let obj = slam_objective(
            &[(y.clone(), f.clone())],
            &[],
            MixVariant::Normalized,
            None,
        )
        .unwrap();
        assert!((obj - cross_entropy(&y, f.entries()).unwrap()).abs() < 1e-15);

        // All alpha = 1: equals the vanilla objective over A u B.
        let mask = full_mask(2);
        let pseudo = vec![PseudoTerm {
            label: y.clone(),
            output: f.clone(),
            alpha: 1.0,
            k: 2,
            mask,
        }];
        let obj = slam_objective(&[(y.clone(), f.clone())], &pseudo, MixVariant::Normalized, None)
            .unwrap();
        let vanilla = cross_entropy(&y, f.entries()).unwrap();
        assert!((obj - vanilla).abs() < 1e-15);

        // Negative weight rejected.
        let pseudo = vec![PseudoTerm {
            label: y.clone(),
            output: f,
            alpha: 0.5,
            k: 2,
            mask: full_mask(2),
        }];
        assert!(slam_objective(&[], &pseudo, MixVariant::Normalized, Some(&[-1.0])).is_err());
    }

    fn simplex(l: usize) -> impl Strategy<Value = ProbVector> {
        proptest::collection::vec(1e-3..1.0f64, l).prop_map(|raw| {
            let sum: f64 = raw.iter().sum();
            ProbVector::new(raw.into_iter().map(|v| v / sum).collect()).unwrap()
        })
    }

    proptest! {
        // Normalized mix sums to 1 when k = L, and always in the binary case.
        #[test]
        fn mix_sums_to_one_when_mask_is_full(f in simplex(4), alpha in 0.0..1.0f64) {
            let m = mix(&f, alpha, 4, &full_mask(4), MixVariant::Normalized).unwrap();
            prop_assert!((m.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn binary_mix_sums_to_one(f in simplex(2), alpha in 0.0..1.0f64) {
            let m = mix(&f, alpha, 2, &full_mask(2), MixVariant::Normalized).unwrap();
            prop_assert!((m.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }

        // mix(g; alpha, k) of an in-mask one-hot is a valid probability
        // vector: this is the conditional mean of the noisy label.
        #[test]
        fn mixed_one_hot_is_a_distribution(
            class in 0usize..4,
            alpha in 0.0..1.0f64,
            k in 2usize..5,
            seed_scores in proptest::collection::vec(0.0..1.0f64, 4),
        ) {
            let mut scores = seed_scores;
            scores[class] = 2.0; // force the true class into every mask
            let mask = top_mask(&scores, k).unwrap();
            let g = ProbVector::one_hot(class, 4).unwrap();
            let m = mix(&g, alpha, k, &mask, MixVariant::Normalized).unwrap();
            prop_assert!((m.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(m.iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
        }

        // Mass confined to the mask also renormalizes exactly.
        #[test]
        fn mix_sums_to_one_on_masked_support(
            raw in proptest::collection::vec(1e-3..1.0f64, 3),
            alpha in 0.0..1.0f64,
        ) {
            let sum: f64 = raw.iter().sum();
            let mut entries = vec![0.0; 5];
            for (slot, v) in [0usize, 2, 4].iter().zip(&raw) {
                entries[*slot] = v / sum;
            }
            let f = ProbVector::new(entries.clone()).unwrap();
            let mask = TopKMask::from_bits(vec![true, false, true, false, true]).unwrap();
            let m = mix(&f, alpha, 3, &mask, MixVariant::Normalized).unwrap();
            prop_assert!((m.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    // At f = g the expected SLaM loss equals the entropy of mix(g), and
    // its gradient through the softmax parameterization vanishes.
    #[test]
    fn expected_loss_is_stationary_at_ground_truth() {
        let l = 3;
        let class = 1;
        let g = ProbVector::one_hot(class, l).unwrap();
        let mask = TopKMask::from_bits(vec![true, true, false]).unwrap();
        let (alpha, k) = (0.7, 2);
        let target = mix(&g, alpha, k, &mask, MixVariant::Normalized).unwrap();
        let target = ProbVector::new(target).unwrap();

        let loss_of = |logits: &[f64]| {
            let f = crate::probvec::softmax_temp(logits, 1.0).unwrap();
            slam_example_loss(&target, &f, alpha, k, &mask, MixVariant::Normalized).unwrap()
        };

        // Logits pushing f arbitrarily close to g.
        let mut logits = vec![0.0; l];
        logits[class] = 30.0;
        let f = crate::probvec::softmax_temp(&logits, 1.0).unwrap();
        let entropy = cross_entropy(&target, &mix(&g, alpha, k, &mask, MixVariant::Normalized).unwrap()).unwrap();
        assert!((loss_of(&logits) - entropy).abs() < 1e-9);
        assert!((f[class] - 1.0).abs() < 1e-12);

        let h = 1e-5;
        for i in 0..l {
            let mut up = logits.clone();
            let mut down = logits.clone();
            up[i] += h;
            down[i] -= h;
            let deriv = (loss_of(&up) - loss_of(&down)) / (2.0 * h);
            assert!(deriv.abs() < 1e-7, "coordinate {i} derivative {deriv}");
        }
    }
}
