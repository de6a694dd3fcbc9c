//! Halfspace convergence study under random classification noise: run
//! the adaptive-step linear trainer on a noisy-teacher stream and track
//! held-out error, weight norm, and correlation with the true normal.

use super::config::ExperimentConfig;
use super::results::{CurvePoint, HalfspaceReport, HalfspaceTrial, RunResult};
use crate::error::{invalid_argument, Result};
use crate::linear::run_slam_linear;
use crate::oracle::{
    gen_margin_halfspace_with_stats, sample_margin_point, substream_rng, HalfspaceTruth,
    LabeledExample,
};
use crate::vecops::{dot, norm};
use rand::Rng;
use std::time::Instant;

/// Iterations prescribed by the convergence bound:
/// `ceil(C / (beta^2 gamma^2 epsilon^2))` with `beta = |2 alpha - 1|`.
pub fn theorem_steps(constant: f64, alpha: f64, gamma: f64, epsilon: f64) -> usize {
    let beta = (2.0 * alpha - 1.0).abs();
    (constant / (beta * beta * gamma * gamma * epsilon * epsilon)).ceil() as usize
}

/// Predicted class of the sigmoid-pair student: ties at the decision
/// boundary go to class 0, matching the argmax convention.
fn predicted_class(w: &[f64], x: &[f64]) -> usize {
    usize::from(dot(w, x) < 0.0)
}

pub(crate) fn holdout_error(w: &[f64], holdout: &[LabeledExample]) -> f64 {
    let wrong = holdout
        .iter()
        .filter(|e| predicted_class(w, &e.x) != e.class())
        .count();
    wrong as f64 / holdout.len() as f64
}

/// Least-squares slope of (t, w(t).w*) over the snapshots up to and
/// including the first one at or below `epsilon` (all of them when the
/// run never converges).
fn correlation_slope(points: &[(f64, f64, f64)], epsilon: f64) -> f64 {
    let mut cut = points.len();
    for (i, &(_, err, _)) in points.iter().enumerate() {
        if err <= epsilon && i > 0 {
            cut = i + 1;
            break;
        }
    }
    let pre = &points[..cut];
    let n = pre.len() as f64;
    let mean_t = pre.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_c = pre.iter().map(|p| p.2).sum::<f64>() / n;
    let cov: f64 = pre.iter().map(|p| (p.0 - mean_t) * (p.2 - mean_c)).sum();
    let var: f64 = pre.iter().map(|p| (p.0 - mean_t) * (p.0 - mean_t)).sum();
    if var == 0.0 {
        0.0
    } else {
        cov / var
    }
}

pub(crate) struct TrialOutcome {
    pub snapshots: Vec<(usize, f64, f64, f64)>, // (step, error, norm, correlation)
    pub min_error: f64,
    pub argmin_step: usize,
    pub first_success_step: Option<usize>,
    pub final_norm: f64,
    pub final_correlation: f64,
    pub correlation_slope: f64,
    pub skipped: usize,
}

/// One seeded trial: fresh halfspace, fresh noisy stream, `steps`
/// iterations, holdout evaluation at every snapshot.
pub(crate) fn run_trial(
    dim: usize,
    gamma: f64,
    alpha: f64,
    epsilon: f64,
    steps: usize,
    cadence: usize,
    holdout_size: usize,
    trial_seed: u64,
) -> Result<TrialOutcome> {
    let (truth, holdout, _) =
        gen_margin_halfspace_with_stats(dim, gamma, holdout_size, trial_seed)?;
    let stream = noisy_stream(&truth, alpha, trial_seed);
    let trajectory = run_slam_linear(stream, steps, cadence, dim)?;

    let mut snapshots = Vec::with_capacity(trajectory.snapshots.len());
    let mut min_error = f64::INFINITY;
    let mut argmin_step = 0;
    let mut first_success_step = None;
    for (t, w) in &trajectory.snapshots {
        let err = holdout_error(w, &holdout);
        if err < min_error {
            min_error = err;
            argmin_step = *t;
        }
        if err <= epsilon && first_success_step.is_none() {
            first_success_step = Some(*t);
        }
        snapshots.push((*t, err, norm(w), dot(w, &truth.w_star)));
    }
    let slope_points: Vec<(f64, f64, f64)> = snapshots
        .iter()
        .map(|&(t, err, _, corr)| (t as f64, err, corr))
        .collect();
    let final_w = trajectory.final_weights();
    Ok(TrialOutcome {
        min_error,
        argmin_step,
        first_success_step,
        final_norm: norm(final_w),
        final_correlation: dot(final_w, &truth.w_star),
        correlation_slope: correlation_slope(&slope_points, epsilon),
        skipped: trajectory.skipped,
        snapshots,
    })
}

/// Infinite RCN-labeled stream over the margin distribution of `truth`.
fn noisy_stream(
    truth: &HalfspaceTruth,
    alpha: f64,
    trial_seed: u64,
) -> impl Iterator<Item = (Vec<f64>, f64, f64)> {
    let truth = truth.clone();
    let mut x_rng = substream_rng(trial_seed, 101);
    let mut label_rng = substream_rng(trial_seed, 102);
    std::iter::from_fn(move || {
        let x = sample_margin_point(&truth, &mut x_rng);
        let g0 = f64::from(u8::from(dot(&truth.w_star, &x) > 0.0));
        let y0 = if label_rng.random::<f64>() < alpha {
            g0
        } else {
            1.0 - g0
        };
        Some((x, y0, alpha))
    })
}

/// Runs the convergence study: `trials` independent runs of
/// `theorem_steps` iterations each, reporting per-trial minima and the
/// aggregate success rate.
pub fn run_halfspace_rcn(cfg: &ExperimentConfig) -> Result<RunResult> {
    let start = Instant::now();
    let alpha = cfg.teacher_alpha;
    if alpha == 0.5 {
        return Err(invalid_argument(
            "alpha = 1/2 leaves the adaptive step undefined",
        ));
    }
    let beta = (2.0 * alpha - 1.0).abs();
    let steps = theorem_steps(cfg.theorem_constant, alpha, cfg.gamma, cfg.epsilon);
    let cadence = (steps / cfg.snapshot_count).max(1);

    let mut result = RunResult::new(cfg.echo());
    let mut trials = Vec::with_capacity(cfg.trials);
    let mut success_count = 0usize;
    let mut total_skipped = 0u64;
    for trial in 0..cfg.trials {
        let trial_seed = cfg.seed.wrapping_add(1).wrapping_add(trial as u64);
        let outcome = run_trial(
            cfg.hs_dim,
            cfg.gamma,
            alpha,
            cfg.epsilon,
            steps,
            cadence,
            cfg.holdout_size,
            trial_seed,
        )?;
        for &(t, err, norm_w, corr) in &outcome.snapshots {
            for (metric, value) in [
                ("holdout_error", err),
                ("weight_norm", norm_w),
                ("correlation", corr),
            ] {
                result.curves.push(CurvePoint {
                    trial,
                    method: "slam-linear".to_string(),
                    step: t,
                    metric: metric.to_string(),
                    value,
                });
            }
        }
        let success = outcome.min_error <= cfg.epsilon;
        success_count += usize::from(success);
        total_skipped += outcome.skipped as u64;
        trials.push(HalfspaceTrial {
            trial,
            min_error: outcome.min_error,
            argmin_step: outcome.argmin_step,
            first_success_step: outcome.first_success_step,
            success,
            final_norm: outcome.final_norm,
            final_correlation: outcome.final_correlation,
            correlation_slope: outcome.correlation_slope,
            norm_bound_ok: outcome.final_norm <= 3.0 * (steps as f64).sqrt(),
            skipped: outcome.skipped as u64,
        });
    }

    result
        .metrics
        .insert("success_rate".to_string(), success_count as f64 / cfg.trials as f64);
    result.skip_counts.insert("half_alpha_skips".to_string(), total_skipped);
    result.halfspace = Some(HalfspaceReport {
        steps,
        epsilon: cfg.epsilon,
        beta,
        trials,
        success_count,
    });
    result.timing_seconds = start.elapsed().as_secs_f64();
    Ok(result)
}
