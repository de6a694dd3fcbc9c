//! End-to-end experiments: the distillation pipeline, the halfspace-RCN
//! convergence study, the gamma scaling study, result persistence, and
//! the dataset split protocol backing them.

mod config;
mod halfspace;
mod pipeline;
mod results;
mod scaling;

pub use config::{
    ExperimentConfig, ExperimentKind, KModeConfig, Method, SlamLabel, TeacherKind,
};
pub use halfspace::run_halfspace_rcn;
pub use pipeline::{run_distillation_pipeline, run_isotonic_fit};
pub use results::{
    emit_results, load_results, results_equal_ignoring_timing, CurvePoint, HalfspaceReport,
    HalfspaceTrial, MethodSummary, RunResult, ScalingGamma, ScalingReport, SCHEMA_VERSION,
};
pub use scaling::scaling_study;

use crate::error::{invalid_argument, Result};
use crate::oracle::seeded_rng;
use rand::Rng;

/// Disjoint uniform split of `0..n` into (A, V, U) index sets with
/// |A| and |V| as requested and U the remainder. Deterministic per seed.
pub fn split_indices(
    n: usize,
    sizes: (usize, usize),
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let (labeled, validation) = sizes;
    if labeled + validation > n {
        return Err(invalid_argument(format!(
            "split sizes |A| = {labeled}, |V| = {validation} exceed pool of {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seeded_rng(seed);
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let rest = order.split_off(labeled + validation);
    let validation_part = order.split_off(labeled);
    Ok((order, validation_part, rest))
}

/// [`split_indices`] materialized over a slice.
pub fn split_dataset<T: Clone>(
    pool: &[T],
    sizes: (usize, usize),
    seed: u64,
) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let (a, v, u) = split_indices(pool.len(), sizes, seed)?;
    let pick = |idx: Vec<usize>| idx.into_iter().map(|i| pool[i].clone()).collect();
    Ok((pick(a), pick(v), pick(u)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn split_uses_whole_pool_when_sizes_cover_it() {
        let pool: Vec<u32> = (0..10).collect();
        let (a, v, u) = split_dataset(&pool, (6, 4), 3).unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(v.len(), 4);
        assert!(u.is_empty());

        let again = split_dataset(&pool, (6, 4), 3).unwrap();
        assert_eq!((a, v, u), again);

        assert!(split_dataset(&pool, (8, 4), 3).is_err());
    }

    proptest! {
        #[test]
        fn split_partitions_the_pool(
            n in 1usize..200,
            a_frac in 0.0..1.0f64,
            v_frac in 0.0..1.0f64,
            seed in 0u64..1000,
        ) {
            let a_size = (n as f64 * a_frac * 0.5) as usize;
            let v_size = (n as f64 * v_frac * 0.5) as usize;
            let (a, v, u) = split_indices(n, (a_size, v_size), seed).unwrap();
            let mut all: Vec<usize> = a.iter().chain(&v).chain(&u).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(a.len(), a_size);
            prop_assert_eq!(v.len(), v_size);
        }
    }
}
