//! The distillation pipeline: teacher on A, pseudo-labels on U, accuracy
//! statistics on V, one student per method trained on A u V u B, and
//! held-out evaluation.

use super::config::{ExperimentConfig, Method, SlamLabel, TeacherKind};
use super::results::{mean_std, CurvePoint, MethodSummary, RunResult};
use super::split_indices;
use crate::error::{invalid_argument, io_error, parse_error, Result};
use crate::isotonic::{fit_accuracy_statistics, AccuracyEstimator};
use crate::linear::{sgd_train, sgd_train_with, SgdConfig, SoftmaxStudent, TrainExample, TrainTarget};
use crate::oracle::{
    gen_gaussian_mixture, make_teacher_spec, substream_rng, LabeledExample, NoisyTeacherSpec,
};
use crate::probvec::{hard_label, softmax_temp, top_mask, ProbVector, LOG_FLOOR};
use std::collections::BTreeMap;
use std::time::Instant;

// Substream tags keeping the per-trial random streams independent.
const STREAM_SPLIT: u64 = 1;
const STREAM_TEACHER: u64 = 2;
const STREAM_PRETRAIN: u64 = 3;
const STREAM_TRAIN: u64 = 4;

fn stream_seed(trial_seed: u64, tag: u64) -> u64 {
    let mut rng = substream_rng(trial_seed, tag);
    rand::Rng::random(&mut rng)
}

/// Teacher soft label with the distillation temperature applied to the
/// teacher side only. `temperature = 1` is the identity (bit-exact).
fn apply_temperature(y_s: &ProbVector, temperature: f64) -> Result<ProbVector> {
    if temperature == 1.0 {
        return Ok(y_s.clone());
    }
    let logits: Vec<f64> = y_s.entries().iter().map(|&p| p.max(LOG_FLOOR).ln()).collect();
    softmax_temp(&logits, temperature)
}

enum Teacher {
    Simulated(NoisyTeacherSpec),
    Fitted(SoftmaxStudent),
}

impl Teacher {
    fn soft_label(&self, pool: &[LabeledExample], index: usize, temperature: f64) -> Result<ProbVector> {
        match self {
            Teacher::Simulated(spec) => apply_temperature(spec.soft_label(index), temperature),
            Teacher::Fitted(model) => {
                softmax_temp(&model.logits(&pool[index].x)?, temperature)
            }
        }
    }
}

fn load_weight_file(path: &std::path::Path, expected: usize) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| io_error(format!("reading weight file {}", path.display()), e))?;
    let mut weights = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let w: f64 = line.parse().map_err(|e| {
            parse_error(
                format!("weight file {} line {}", path.display(), lineno + 1),
                format!("{e}"),
            )
        })?;
        if w < 0.0 || !w.is_finite() {
            return Err(invalid_argument(format!(
                "weight file {} line {}: weights must be finite and nonnegative, got {w}",
                path.display(),
                lineno + 1
            )));
        }
        weights.push(w);
    }
    if weights.len() != expected {
        return Err(invalid_argument(format!(
            "weight file {} has {} weights, expected one per pool example ({expected})",
            path.display(),
            weights.len()
        )));
    }
    Ok(weights)
}

fn test_accuracy(student: &SoftmaxStudent, test: &[LabeledExample]) -> Result<f64> {
    let mut correct = 0usize;
    for e in test {
        if student.predict(&e.x)? == e.class() {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Builds the per-method pseudo-labeled training targets for dataset B.
#[allow(clippy::too_many_arguments)]
fn pseudo_targets(
    method: Method,
    cfg: &ExperimentConfig,
    pool: &[LabeledExample],
    u_idx: &[usize],
    teacher: &Teacher,
    estimator: Option<&AccuracyEstimator>,
    weights: Option<&[f64]>,
) -> Result<Vec<TrainExample>> {
    let mut out = Vec::with_capacity(u_idx.len());
    for &i in u_idx {
        let y_s = teacher.soft_label(pool, i, cfg.temperature)?;
        let x = pool[i].x.clone();
        let weight = weights.map_or(1.0, |w| w[i]);
        let target = match method {
            Method::VanillaSoft => TrainTarget::Plain { label: y_s },
            Method::VanillaHard => TrainTarget::Plain {
                label: hard_label(&y_s)?,
            },
            Method::SlamEstimated => {
                let est = estimator.expect("estimator fitted for slam-estimated");
                let alpha = est.estimate_alpha(&y_s)?;
                let k = est.estimate_k(&y_s)?;
                let mask = top_mask(y_s.entries(), k)?;
                let label = match cfg.slam_label {
                    SlamLabel::Soft => y_s,
                    SlamLabel::Hard => hard_label(&y_s)?,
                };
                TrainTarget::Mixed {
                    label,
                    alpha,
                    k,
                    mask,
                    weight,
                }
            }
            Method::SlamOracle => {
                let Teacher::Simulated(spec) = teacher else {
                    return Err(invalid_argument(
                        "slam-oracle requires the simulated noisy teacher",
                    ));
                };
                let alpha = spec.alpha(i);
                let k = spec.k(i);
                let mask = top_mask(y_s.entries(), k)?;
                let label = match cfg.slam_label {
                    SlamLabel::Soft => y_s,
                    SlamLabel::Hard => hard_label(&y_s)?,
                };
                TrainTarget::Mixed {
                    label,
                    alpha,
                    k,
                    mask,
                    weight,
                }
            }
        };
        // Vanilla methods honor the external weights too.
        let target = match (method, target) {
            (Method::VanillaSoft | Method::VanillaHard, TrainTarget::Plain { label })
                if weight != 1.0 =>
            {
                TrainTarget::Mixed {
                    label,
                    alpha: 1.0,
                    k: 2.min(cfg.classes),
                    mask: top_mask(&vec![1.0; cfg.classes], 2.min(cfg.classes))?,
                    weight,
                }
            }
            (_, t) => t,
        };
        out.push(TrainExample { x, target });
    }
    Ok(out)
}

/// Runs the full distillation experiment described by `cfg` and returns
/// the aggregated result record.
pub fn run_distillation_pipeline(cfg: &ExperimentConfig) -> Result<RunResult> {
    let start = Instant::now();
    if cfg.methods.is_empty() {
        return Err(invalid_argument("at least one method is required"));
    }

    // Pool and test set share one mixture draw so they share centers.
    let total = cfg.pool_size + cfg.test_size;
    let everything = gen_gaussian_mixture(cfg.classes, cfg.dim, total, cfg.separation, cfg.seed)?;
    let (pool, test) = everything.split_at(cfg.pool_size);

    let weights = cfg
        .weight_file
        .as_deref()
        .map(|p| load_weight_file(p, cfg.pool_size))
        .transpose()?;

    let mut result = RunResult::new(cfg.echo());
    let mut per_method_final: BTreeMap<Method, Vec<f64>> = BTreeMap::new();
    let mut per_method_best: BTreeMap<Method, Vec<f64>> = BTreeMap::new();

    for trial in 0..cfg.trials {
        let trial_seed = cfg.seed.wrapping_add(1).wrapping_add(trial as u64);
        let (a_idx, v_idx, u_idx) = split_indices(
            cfg.pool_size,
            (cfg.labeled_size, cfg.validation_size),
            stream_seed(trial_seed, STREAM_SPLIT),
        )?;

        // (1) Teacher.
        let teacher = match cfg.teacher {
            TeacherKind::Simulated => Teacher::Simulated(make_teacher_spec(
                pool,
                cfg.teacher_noise(),
                stream_seed(trial_seed, STREAM_TEACHER),
            )?),
            TeacherKind::Fitted => {
                let data: Vec<TrainExample> = a_idx
                    .iter()
                    .map(|&i| TrainExample {
                        x: pool[i].x.clone(),
                        target: TrainTarget::Plain {
                            label: pool[i].g.clone(),
                        },
                    })
                    .collect();
                let init = SoftmaxStudent::zeros(cfg.classes, cfg.dim, true)?;
                let sgd = SgdConfig {
                    epochs: cfg.teacher_epochs,
                    batch_size: cfg.batch_size,
                    learning_rate: cfg.learning_rate,
                    seed: stream_seed(trial_seed, STREAM_TEACHER),
                };
                let (model, _) = sgd_train(&init, &data, cfg.mix_variant, &sgd)?;
                Teacher::Fitted(model)
            }
        };

        // (2) Accuracy statistics on V when some method estimates them.
        let estimator = if cfg.methods.contains(&Method::SlamEstimated) {
            let pairs: Vec<(ProbVector, ProbVector)> = v_idx
                .iter()
                .map(|&i| {
                    Ok((
                        teacher.soft_label(pool, i, cfg.temperature)?,
                        pool[i].g.clone(),
                    ))
                })
                .collect::<Result<_>>()?;
            Some(
                fit_accuracy_statistics(&pairs, cfg.lb, cfg.threshold_t)?
                    .with_k_mode(cfg.k_mode.to_k_mode())?,
            )
        } else {
            None
        };

        // (3) Pre-train the student on A; every method starts from it.
        let clean_a: Vec<TrainExample> = a_idx
            .iter()
            .map(|&i| TrainExample {
                x: pool[i].x.clone(),
                target: TrainTarget::Plain {
                    label: pool[i].g.clone(),
                },
            })
            .collect();
        let init = SoftmaxStudent::zeros(cfg.classes, cfg.dim, true)?;
        let pretrain_cfg = SgdConfig {
            epochs: cfg.pretrain_epochs,
            batch_size: cfg.batch_size,
            learning_rate: cfg.learning_rate,
            seed: stream_seed(trial_seed, STREAM_PRETRAIN),
        };
        let (pretrained, _) = sgd_train(&init, &clean_a, cfg.mix_variant, &pretrain_cfg)?;

        // (4) Train one student per method on A (u V) u B.
        for &method in &cfg.methods {
            let mut data = clean_a.clone();
            if cfg.include_validation {
                data.extend(v_idx.iter().map(|&i| TrainExample {
                    x: pool[i].x.clone(),
                    target: TrainTarget::Plain {
                        label: pool[i].g.clone(),
                    },
                }));
            }
            data.extend(pseudo_targets(
                method,
                cfg,
                pool,
                &u_idx,
                &teacher,
                estimator.as_ref(),
                weights.as_deref(),
            )?);

            let sgd = SgdConfig {
                epochs: cfg.epochs,
                batch_size: cfg.batch_size,
                learning_rate: cfg.learning_rate,
                // Same stream for every method: with a perfect teacher
                // the update streams coincide exactly.
                seed: stream_seed(trial_seed, STREAM_TRAIN),
            };
            let mut best = 0.0f64;
            let mut eval_points: Vec<(usize, f64)> = Vec::new();
            let (student, loss_curve) =
                sgd_train_with(&pretrained, &data, cfg.mix_variant, &sgd, |epoch, s| {
                    let last = epoch + 1 == cfg.epochs;
                    if (epoch + 1) % cfg.eval_every_epochs == 0 || last {
                        if let Ok(acc) = test_accuracy(s, test) {
                            best = best.max(acc);
                            eval_points.push((epoch + 1, acc));
                        }
                    }
                })?;
            let final_acc = test_accuracy(&student, test)?;
            best = best.max(final_acc);

            for (epoch, loss) in loss_curve.iter().enumerate() {
                result.curves.push(CurvePoint {
                    trial,
                    method: method.name().to_string(),
                    step: epoch + 1,
                    metric: "train_loss".to_string(),
                    value: *loss,
                });
            }
            for (epoch, acc) in eval_points {
                result.curves.push(CurvePoint {
                    trial,
                    method: method.name().to_string(),
                    step: epoch,
                    metric: "test_accuracy".to_string(),
                    value: acc,
                });
            }
            per_method_final.entry(method).or_default().push(final_acc);
            per_method_best.entry(method).or_default().push(best);
        }
    }

    for &method in &cfg.methods {
        let finals = &per_method_final[&method];
        let bests = &per_method_best[&method];
        let (final_mean, final_std) = mean_std(finals);
        let (best_mean, best_std) = mean_std(bests);
        result.methods.push(MethodSummary {
            method: method.name().to_string(),
            final_accuracy_mean: final_mean,
            final_accuracy_std: final_std,
            best_accuracy_mean: best_mean,
            best_accuracy_std: best_std,
            per_trial_final: finals.clone(),
            per_trial_best: bests.clone(),
        });
    }
    result.timing_seconds = start.elapsed().as_secs_f64();
    Ok(result)
}

/// Generates a pool, labels V with the configured teacher, fits the
/// accuracy estimator, and (for a simulated teacher) reports how well
/// the estimated alpha tracks the true one on U.
pub fn run_isotonic_fit(cfg: &ExperimentConfig) -> Result<(AccuracyEstimator, RunResult)> {
    let start = Instant::now();
    let pool = gen_gaussian_mixture(cfg.classes, cfg.dim, cfg.pool_size, cfg.separation, cfg.seed)?;
    let trial_seed = cfg.seed.wrapping_add(1);
    let (a_idx, v_idx, u_idx) = split_indices(
        cfg.pool_size,
        (cfg.labeled_size, cfg.validation_size),
        stream_seed(trial_seed, STREAM_SPLIT),
    )?;

    let teacher = match cfg.teacher {
        TeacherKind::Simulated => Teacher::Simulated(make_teacher_spec(
            &pool,
            cfg.teacher_noise(),
            stream_seed(trial_seed, STREAM_TEACHER),
        )?),
        TeacherKind::Fitted => {
            let data: Vec<TrainExample> = a_idx
                .iter()
                .map(|&i| TrainExample {
                    x: pool[i].x.clone(),
                    target: TrainTarget::Plain {
                        label: pool[i].g.clone(),
                    },
                })
                .collect();
            let init = SoftmaxStudent::zeros(cfg.classes, cfg.dim, true)?;
            let sgd = SgdConfig {
                epochs: cfg.teacher_epochs,
                batch_size: cfg.batch_size,
                learning_rate: cfg.learning_rate,
                seed: stream_seed(trial_seed, STREAM_TEACHER),
            };
            Teacher::Fitted(sgd_train(&init, &data, cfg.mix_variant, &sgd)?.0)
        }
    };

    let pairs: Vec<(ProbVector, ProbVector)> = v_idx
        .iter()
        .map(|&i| {
            Ok((
                teacher.soft_label(&pool, i, cfg.temperature)?,
                pool[i].g.clone(),
            ))
        })
        .collect::<Result<_>>()?;
    let estimator =
        fit_accuracy_statistics(&pairs, cfg.lb, cfg.threshold_t)?.with_k_mode(cfg.k_mode.to_k_mode())?;

    let mut result = RunResult::new(cfg.echo());
    if let Teacher::Simulated(spec) = &teacher {
        let mut abs_err_sum = 0.0;
        for &i in &u_idx {
            let y_s = teacher.soft_label(&pool, i, cfg.temperature)?;
            let est_alpha = estimator.estimate_alpha(&y_s)?;
            abs_err_sum += (est_alpha - spec.alpha(i)).abs();
            result.curves.push(CurvePoint {
                trial: 0,
                method: "isotonic".to_string(),
                step: i,
                metric: "alpha_estimate".to_string(),
                value: est_alpha,
            });
        }
        if !u_idx.is_empty() {
            result
                .metrics
                .insert("alpha_mae".to_string(), abs_err_sum / u_idx.len() as f64);
        }
    }
    result.timing_seconds = start.elapsed().as_secs_f64();
    Ok((estimator, result))
}
