//! Sample-complexity scaling study: the first hitting time of a target
//! held-out error as a function of the margin gamma, with a log-log
//! slope fit.

use super::config::ExperimentConfig;
use super::halfspace::{holdout_error, theorem_steps};
use super::results::{CurvePoint, RunResult, ScalingGamma, ScalingReport};
use crate::error::{invalid_argument, Error, Result};
use crate::linear::{slam_linear_step, StepOutcome};
use crate::oracle::{gen_margin_halfspace_with_stats, sample_margin_point, substream_rng};
use crate::vecops::dot;
use rand::Rng;
use std::time::Instant;

/// Log-spaced probe schedule: geometric steps (ratio 1.2) from 1 up to
/// the budget, the budget always included. Resolution in log t is what
/// the slope fit needs.
fn probe_schedule(budget: usize) -> Vec<usize> {
    let mut probes = Vec::new();
    let mut t = 1.0f64;
    while (t as usize) < budget {
        let step = t as usize;
        if probes.last() != Some(&step) {
            probes.push(step);
        }
        t *= 1.2;
    }
    if probes.last() != Some(&budget) {
        probes.push(budget);
    }
    probes
}

/// First probe step whose held-out error is <= epsilon, or `None` if the
/// budget is exhausted (censored).
fn hitting_time(
    dim: usize,
    gamma: f64,
    alpha: f64,
    epsilon: f64,
    budget: usize,
    holdout_size: usize,
    trial_seed: u64,
) -> Result<Option<usize>> {
    let (truth, holdout, _) =
        gen_margin_halfspace_with_stats(dim, gamma, holdout_size, trial_seed)?;
    let probes = probe_schedule(budget);
    let mut x_rng = substream_rng(trial_seed, 101);
    let mut label_rng = substream_rng(trial_seed, 102);
    let mut w = vec![0.0; dim];
    let mut next_probe = 0usize;
    for t in 1..=budget {
        let x = sample_margin_point(&truth, &mut x_rng);
        let g0 = f64::from(u8::from(dot(&truth.w_star, &x) > 0.0));
        let y0 = if label_rng.random::<f64>() < alpha {
            g0
        } else {
            1.0 - g0
        };
        match slam_linear_step(&w, &x, y0, alpha)? {
            StepOutcome::Applied(next) => w = next,
            StepOutcome::SkippedHalfAlpha => {}
        }
        if next_probe < probes.len() && t == probes[next_probe] {
            next_probe += 1;
            if holdout_error(&w, &holdout) <= epsilon {
                return Ok(Some(t));
            }
        }
    }
    Ok(None)
}

fn median(sorted: &[usize]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    }
}

/// Runs the scaling study over `cfg.gamma_list`. Each gamma gets
/// `cfg.trials` independent runs with budget
/// `ceil(budget_constant / (beta^2 gamma^2 epsilon^2))`; a gamma whose
/// median hitting time is censored is excluded from the slope fit with a
/// warning in the report.
pub fn scaling_study(cfg: &ExperimentConfig) -> Result<RunResult> {
    let start = Instant::now();
    let alpha = cfg.teacher_alpha;
    let epsilon = cfg.epsilon;
    let mut gammas = cfg.gamma_list.clone();
    gammas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if gammas.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid_argument("gamma values must be distinct"));
    }

    let mut result = RunResult::new(cfg.echo());
    let mut reports = Vec::with_capacity(gammas.len());
    for (gamma_index, &gamma) in gammas.iter().enumerate() {
        let budget = theorem_steps(cfg.budget_constant, alpha, gamma, epsilon);
        let mut hitting_times = Vec::with_capacity(cfg.trials);
        for trial in 0..cfg.trials {
            let trial_seed = cfg
                .seed
                .wrapping_add(1)
                .wrapping_add((gamma_index * cfg.trials + trial) as u64);
            let hit = hitting_time(
                cfg.hs_dim,
                gamma,
                alpha,
                epsilon,
                budget,
                cfg.holdout_size,
                trial_seed,
            )?;
            match hit {
                Some(t) => result.curves.push(CurvePoint {
                    trial,
                    method: format!("gamma={gamma}"),
                    step: t,
                    metric: "hitting_time".to_string(),
                    value: t as f64,
                }),
                None => result.curves.push(CurvePoint {
                    trial,
                    method: format!("gamma={gamma}"),
                    step: budget,
                    metric: "censored".to_string(),
                    value: 1.0,
                }),
            }
            hitting_times.push(hit);
        }
        // Median over trials with censored runs counted as +infinity;
        // the gamma is censored when that median is infinite.
        let mut reached: Vec<usize> = hitting_times.iter().flatten().copied().collect();
        reached.sort_unstable();
        let n_trials = hitting_times.len();
        let median_hitting_time: Option<f64> = if n_trials % 2 == 1 {
            reached.get(n_trials / 2).map(|&t| t as f64)
        } else if reached.len() > n_trials / 2 {
            Some(median(&reached[n_trials / 2 - 1..=n_trials / 2]))
        } else {
            None
        };
        let censored = median_hitting_time.is_none();
        let censored_trials = n_trials - reached.len();
        if censored {
            eprintln!(
                "warning: gamma = {gamma} censored ({censored_trials}/{} trials never reached \
                 epsilon within {budget} steps); excluded from the slope fit",
                hitting_times.len()
            );
        }
        reports.push(ScalingGamma {
            gamma,
            budget,
            hitting_times,
            median_hitting_time,
            censored,
        });
    }

    let fit_points: Vec<(f64, f64)> = reports
        .iter()
        .filter_map(|r| r.median_hitting_time.map(|t| (r.gamma.ln(), t.ln())))
        .collect();
    if fit_points.len() < 2 {
        return Err(Error::Runtime(format!(
            "only {} uncensored gamma values; need at least 2 to fit a slope",
            fit_points.len()
        )));
    }
    let n = fit_points.len() as f64;
    let mean_x = fit_points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = fit_points.iter().map(|p| p.1).sum::<f64>() / n;
    let var: f64 = fit_points.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    let cov: f64 = fit_points
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
        .sum();
    let slope = cov / var;
    let intercept = mean_y - slope * mean_x;
    let residuals: Vec<f64> = fit_points
        .iter()
        .map(|p| p.1 - (intercept + slope * p.0))
        .collect();

    result.metrics.insert("slope".to_string(), slope);
    result.scaling = Some(ScalingReport {
        gammas: reports,
        slope,
        intercept,
        residuals,
    });
    result.timing_seconds = start.elapsed().as_secs_f64();
    Ok(result)
}
