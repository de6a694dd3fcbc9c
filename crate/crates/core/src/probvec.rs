//! Probability-vector and label primitives.
//!
//! Everything downstream (mixing, isotonic estimation, students) is built
//! from these operations: top-k masks, top-k margins, temperature-scaled
//! softmax, floored cross-entropy, and the top-1 disagreement indicator.
//! Ties are always broken toward the lowest index so that every operation
//! is deterministic across runs and platforms.

use crate::error::{invalid_argument, Result};
use serde::{Deserialize, Serialize};

/// Absolute tolerance for the "sums to 1" check on normalized vectors.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Floor applied inside logarithms so cross-entropy stays finite on
/// degenerate inputs.
pub const LOG_FLOOR: f64 = 1e-12;

/// A length-L vector of nonnegative class scores.
///
/// Carries soft labels, student outputs, and (possibly unnormalized)
/// mixed outputs. Construct with [`ProbVector::new`] for raw scores or
/// [`ProbVector::normalized`] when the entries must lie on the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Nonnegative finite entries, L >= 2. Does not require the entries
    /// to sum to 1.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.len() < 2 {
            return Err(invalid_argument(format!(
                "ProbVector needs at least 2 entries, got {}",
                entries.len()
            )));
        }
        for (i, &v) in entries.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(invalid_argument(format!(
                    "ProbVector entry {i} is {v}; entries must be finite and >= 0"
                )));
            }
        }
        Ok(Self(entries))
    }

    /// Like [`ProbVector::new`] but additionally checks the entries sum
    /// to 1 within [`SIMPLEX_TOL`].
    pub fn normalized(entries: Vec<f64>) -> Result<Self> {
        let v = Self::new(entries)?;
        if !v.is_normalized() {
            return Err(invalid_argument(format!(
                "entries sum to {} which is not 1 within {SIMPLEX_TOL}",
                v.sum()
            )));
        }
        Ok(v)
    }

    pub fn one_hot(class: usize, len: usize) -> Result<Self> {
        if len < 2 {
            return Err(invalid_argument(format!(
                "one-hot length must be >= 2, got {len}"
            )));
        }
        if class >= len {
            return Err(invalid_argument(format!(
                "one-hot class {class} out of range for length {len}"
            )));
        }
        let mut entries = vec![0.0; len];
        entries[class] = 1.0;
        Ok(Self(entries))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false // L >= 2 by construction
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.sum() - 1.0).abs() <= SIMPLEX_TOL
    }

    pub fn is_one_hot(&self) -> bool {
        let mut ones = 0usize;
        for &v in &self.0 {
            if v == 1.0 {
                ones += 1;
            } else if v != 0.0 {
                return false;
            }
        }
        ones == 1
    }

    /// Index of the largest entry, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    /// For a one-hot vector, the index of its set class.
    pub fn class(&self) -> Result<usize> {
        if !self.is_one_hot() {
            return Err(invalid_argument("vector is not one-hot"));
        }
        Ok(self.argmax())
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Indicator vector of the k largest entries of a score vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopKMask {
    bits: Vec<bool>,
    k: usize,
}

impl TopKMask {
    /// Build from explicit bits; the number of set bits becomes k.
    pub fn from_bits(bits: Vec<bool>) -> Result<Self> {
        let k = bits.iter().filter(|&&b| b).count();
        if k == 0 || bits.len() < 2 {
            return Err(invalid_argument(
                "mask needs at least one set bit and length >= 2",
            ));
        }
        Ok(Self { bits, k })
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.bits.get(index).copied().unwrap_or(false)
    }

    /// Indices of the set bits, ascending.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate().skip(1) {
        if v > scores[best] {
            best = i;
        }
    }
    best
}

/// Mask selecting the k largest entries of `scores`; ties broken by
/// lower index first.
pub fn top_mask(scores: &[f64], k: usize) -> Result<TopKMask> {
    let l = scores.len();
    if k == 0 || k > l {
        return Err(invalid_argument(format!(
            "k = {k} out of range 1..={l}"
        )));
    }
    let mut order: Vec<usize> = (0..l).collect();
    // Stable sort by descending value keeps the lower index first on ties.
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal));
    let mut bits = vec![false; l];
    for &i in order.iter().take(k) {
        bits[i] = true;
    }
    Ok(TopKMask { bits, k })
}

/// Top-k margin: sum of the k largest entries minus the (k+1)-th largest.
pub fn margin_k(p: &ProbVector, k: usize) -> Result<f64> {
    let l = p.len();
    if k == 0 || k >= l {
        return Err(invalid_argument(format!(
            "margin_k needs 1 <= k <= L-1, got k = {k}, L = {l}"
        )));
    }
    if !p.is_normalized() {
        return Err(invalid_argument("margin_k requires a normalized vector"));
    }
    let mut sorted = p.entries().to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let top_sum: f64 = sorted[..k].iter().sum();
    Ok(top_sum - sorted[k])
}

/// Temperature-scaled softmax with max-subtraction for overflow safety.
/// `temperature = 1` gives the plain softmax.
pub fn softmax_temp(logits: &[f64], temperature: f64) -> Result<ProbVector> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(invalid_argument(format!(
            "temperature must be a positive finite real, got {temperature}"
        )));
    }
    if logits.len() < 2 {
        return Err(invalid_argument("softmax needs at least 2 logits"));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(invalid_argument("softmax requires finite logits"));
    }
    let scaled: Vec<f64> = logits.iter().map(|z| z / temperature).collect();
    let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    ProbVector::new(exps.into_iter().map(|e| e / sum).collect())
}

/// Cross-entropy -sum p_i log(max(q_i, LOG_FLOOR)).
///
/// `q` may be unnormalized (mixed outputs are); the floor keeps the value
/// finite when some q_i is zero.
pub fn cross_entropy(p: &ProbVector, q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(invalid_argument(format!(
            "length mismatch: p has {}, q has {}",
            p.len(),
            q.len()
        )));
    }
    if !p.is_normalized() {
        return Err(invalid_argument(
            "cross_entropy requires a normalized first argument",
        ));
    }
    if q.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(invalid_argument(
            "cross_entropy requires finite nonnegative q entries",
        ));
    }
    let mut total = 0.0;
    for (&pi, &qi) in p.entries().iter().zip(q) {
        if pi != 0.0 {
            total -= pi * qi.max(LOG_FLOOR).ln();
        }
    }
    Ok(total)
}

/// 1 iff the argmax positions of `v` and `u` differ (ties to the lowest
/// index, matching [`top_mask`]).
pub fn err_indicator(v: &[f64], u: &[f64]) -> Result<u8> {
    if v.len() != u.len() {
        return Err(invalid_argument(format!(
            "length mismatch: {} vs {}",
            v.len(),
            u.len()
        )));
    }
    if v.is_empty() {
        return Err(invalid_argument("err is undefined on empty vectors"));
    }
    Ok(u8::from(argmax(v) != argmax(u)))
}

/// One-hot vector at the argmax of a normalized soft label.
pub fn hard_label(y_s: &ProbVector) -> Result<ProbVector> {
    if !y_s.is_normalized() {
        return Err(invalid_argument("hard_label requires a normalized vector"));
    }
    ProbVector::one_hot(y_s.argmax(), y_s.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(entries: &[f64]) -> ProbVector {
        ProbVector::new(entries.to_vec()).unwrap()
    }

    #[test]
    fn top_mask_matches_worked_examples() {
        let m = top_mask(&[1.0, 2.0, 3.0], 1).unwrap();
        assert_eq!(m.bits(), &[false, false, true]);
        let m = top_mask(&[-1.0, 1.0, 0.0, 2.0], 3).unwrap();
        assert_eq!(m.bits(), &[false, true, true, true]);
        // Tie broken at the lowest index.
        let m = top_mask(&[0.5, 0.5], 1).unwrap();
        assert_eq!(m.bits(), &[true, false]);
    }

    #[test]
    fn top_mask_rejects_out_of_range_k() {
        assert!(top_mask(&[1.0, 2.0], 0).is_err());
        assert!(top_mask(&[1.0, 2.0], 3).is_err());
    }

    #[test]
    fn margin_matches_worked_examples() {
        let p = pv(&[0.7, 0.2, 0.1]);
        assert!((margin_k(&p, 1).unwrap() - 0.5).abs() < 1e-15);
        assert!((margin_k(&p, 2).unwrap() - 0.8).abs() < 1e-15);
        let u = pv(&[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        assert!(margin_k(&u, 1).unwrap().abs() < 1e-9);
        assert!(margin_k(&p, 3).is_err());
    }

    #[test]
    fn softmax_matches_worked_examples() {
        let p = softmax_temp(&[0.0, 0.0], 1.0).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);

        let p = softmax_temp(&[3.0, 3.0, 3.0], 0.7).unwrap();
        for i in 0..3 {
            assert!((p[i] - 1.0 / 3.0).abs() < 1e-12);
        }

        // softmax((2,0); T=2) = softmax((1,0)) = (e/(e+1), 1/(e+1)).
        let p = softmax_temp(&[2.0, 0.0], 2.0).unwrap();
        let e = std::f64::consts::E;
        assert!((p[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((p[1] - 1.0 / (e + 1.0)).abs() < 1e-15);

        assert!(softmax_temp(&[1.0, 2.0], 0.0).is_err());
        assert!(softmax_temp(&[1.0, 2.0], -1.0).is_err());
        assert!(softmax_temp(&[f64::NAN, 2.0], 1.0).is_err());
    }

    #[test]
    fn cross_entropy_matches_worked_examples() {
        let one_hot = ProbVector::one_hot(0, 2).unwrap();
        assert_eq!(cross_entropy(&one_hot, one_hot.entries()).unwrap(), 0.0);

        // q zero at the hot index hits the log floor.
        let q = [0.0, 1.0];
        let expected = -(LOG_FLOOR.ln());
        assert!((cross_entropy(&one_hot, &q).unwrap() - expected).abs() < 1e-9);

        let half = pv(&[0.5, 0.5]);
        let expected = std::f64::consts::LN_2;
        assert!((cross_entropy(&half, half.entries()).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn err_matches_worked_examples() {
        assert_eq!(err_indicator(&[0.9, 0.1], &[0.6, 0.4]).unwrap(), 0);
        assert_eq!(err_indicator(&[0.9, 0.1], &[0.4, 0.6]).unwrap(), 1);
        assert_eq!(err_indicator(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0);
        assert!(err_indicator(&[0.3, 0.7], &[1.0]).is_err());
    }

    #[test]
    fn hard_label_matches_worked_examples() {
        let h = hard_label(&pv(&[0.2, 0.5, 0.3])).unwrap();
        assert_eq!(h.entries(), &[0.0, 1.0, 0.0]);

        let one_hot = ProbVector::one_hot(2, 4).unwrap();
        assert_eq!(hard_label(&one_hot).unwrap(), one_hot);

        let h = hard_label(&pv(&[0.5, 0.5])).unwrap();
        assert_eq!(h.entries(), &[1.0, 0.0]);
    }

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::new(vec![0.5]).is_err());
        assert!(ProbVector::new(vec![0.5, -0.1]).is_err());
        assert!(ProbVector::new(vec![0.5, f64::NAN]).is_err());
        assert!(ProbVector::normalized(vec![0.7, 0.2]).is_err());
        assert!(ProbVector::normalized(vec![0.7, 0.3]).is_ok());
        assert!(ProbVector::one_hot(3, 3).is_err());
    }

    fn simplex_strategy(l: usize) -> impl Strategy<Value = ProbVector> {
        proptest::collection::vec(1e-3..1.0f64, l).prop_map(|raw| {
            let sum: f64 = raw.iter().sum();
            ProbVector::new(raw.into_iter().map(|v| v / sum).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn top_masks_are_nested(scores in proptest::collection::vec(-10.0..10.0f64, 2..8), k in 1usize..7) {
            prop_assume!(k < scores.len());
            let small = top_mask(&scores, k).unwrap();
            let big = top_mask(&scores, k + 1).unwrap();
            for i in 0..scores.len() {
                prop_assert!(!small.contains(i) || big.contains(i));
            }
        }

        #[test]
        fn margins_are_nonnegative(p in simplex_strategy(5), k in 1usize..5) {
            prop_assert!(margin_k(&p, k).unwrap() >= 0.0);
        }

        // Scaled logit gaps below ~708 keep every exp above the f64
        // underflow threshold, so positivity is exact in this range.
        #[test]
        fn softmax_is_positive_and_normalized(
            logits in proptest::collection::vec(-30.0..30.0f64, 2..6),
            temp in 0.1..10.0f64,
        ) {
            let p = softmax_temp(&logits, temp).unwrap();
            prop_assert!(p.entries().iter().all(|&v| v > 0.0));
            prop_assert!((p.sum() - 1.0).abs() <= SIMPLEX_TOL);
        }

        #[test]
        fn gibbs_inequality(p in simplex_strategy(4), q in simplex_strategy(4)) {
            let ce_pq = cross_entropy(&p, q.entries()).unwrap();
            let ce_pp = cross_entropy(&p, p.entries()).unwrap();
            prop_assert!(ce_pq >= ce_pp - 1e-12);
        }

        #[test]
        fn err_is_symmetric(
            v in proptest::collection::vec(-5.0..5.0f64, 3),
            u in proptest::collection::vec(-5.0..5.0f64, 3),
        ) {
            prop_assert_eq!(err_indicator(&v, &u).unwrap(), err_indicator(&u, &v).unwrap());
        }

        #[test]
        fn hard_label_ignores_temperature(
            logits in proptest::collection::vec(-5.0..5.0f64, 2..6),
            t1 in 0.1..10.0f64,
            t2 in 0.1..10.0f64,
        ) {
            let a = hard_label(&softmax_temp(&logits, t1).unwrap()).unwrap();
            let b = hard_label(&softmax_temp(&logits, t2).unwrap()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
