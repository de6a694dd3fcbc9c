//! Experiment harness CLI: dataset generation, distillation benchmarks,
//! halfspace-RCN convergence runs, scaling studies, and isotonic fits.

use clap::{Args, Parser, Subcommand};
use slam_core::error::Error;
use slam_core::harness::{
    emit_results, run_distillation_pipeline, run_halfspace_rcn, run_isotonic_fit, scaling_study,
    ExperimentConfig, ExperimentKind, RunResult,
};
use slam_core::harness::TeacherKind;
use slam_core::oracle::{
    gen_gaussian_mixture, gen_margin_halfspace, make_teacher_spec, write_examples_csv,
    write_soft_labels_csv,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "slam",
    about = "Student-label mixing distillation experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Key-value config file (`key = value` lines, `#` comments).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Output path (results JSON, dataset CSV, or estimator JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write it as CSV.
    Gen(CommonArgs),
    /// Run the distillation benchmark over the configured methods.
    Distill(CommonArgs),
    /// Run the halfspace convergence study under RCN.
    HalfspaceRcn(CommonArgs),
    /// Run the gamma scaling study and fit the log-log slope.
    Scaling(CommonArgs),
    /// Fit teacher-accuracy statistics on the validation split.
    IsotonicFit(CommonArgs),
}

fn load_config(kind: ExperimentKind, args: &CommonArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file(kind, path)?,
        None => ExperimentConfig::default_for(kind),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        if trials == 0 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        cfg.trials = trials;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn write_result(cfg: &ExperimentConfig, result: &RunResult) -> Result<(), Error> {
    if let Some(path) = &cfg.out {
        emit_results(result, path)?;
        println!("results written to {}", path.display());
    }
    Ok(())
}

fn print_method_table(result: &RunResult) {
    println!("method              final acc (mean +- std)   best acc (mean +- std)");
    for m in &result.methods {
        println!(
            "{:<18}  {:.4} +- {:.4}           {:.4} +- {:.4}",
            m.method,
            m.final_accuracy_mean,
            m.final_accuracy_std,
            m.best_accuracy_mean,
            m.best_accuracy_std
        );
    }
}

fn run_gen(args: &CommonArgs) -> Result<(), Error> {
    // `gen` serves every experiment kind; the config's `experiment` key
    // picks the dataset family (mixture unless halfspace-rcn/scaling).
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_file_any_kind(path)?,
        None => ExperimentConfig::default_for(ExperimentKind::Distill),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| Error::InvalidConfig("gen requires --out (or an `out` key)".into()))?;

    match cfg.kind {
        ExperimentKind::HalfspaceRcn | ExperimentKind::Scaling => {
            let (_, examples) = gen_margin_halfspace(cfg.hs_dim, cfg.gamma, cfg.pool_size, cfg.seed)?;
            write_examples_csv(&out, &examples)?;
            println!(
                "wrote {} margin-halfspace examples (d = {}, gamma = {}) to {}",
                examples.len(),
                cfg.hs_dim,
                cfg.gamma,
                out.display()
            );
        }
        ExperimentKind::Distill | ExperimentKind::IsotonicFit => {
            let examples =
                gen_gaussian_mixture(cfg.classes, cfg.dim, cfg.pool_size, cfg.separation, cfg.seed)?;
            write_examples_csv(&out, &examples)?;
            println!(
                "wrote {} mixture examples (L = {}, d = {}) to {}",
                examples.len(),
                cfg.classes,
                cfg.dim,
                out.display()
            );
            if cfg.teacher == TeacherKind::Simulated {
                let spec =
                    make_teacher_spec(&examples, cfg.teacher_noise(), cfg.seed.wrapping_add(1))?;
                let soft_path = out.with_extension("soft.csv");
                let xs: Vec<Vec<f64>> = examples.iter().map(|e| e.x.clone()).collect();
                let labels: Vec<_> = (0..spec.len()).map(|i| spec.soft_label(i).clone()).collect();
                write_soft_labels_csv(&soft_path, &xs, &labels)?;
                println!("wrote teacher soft labels to {}", soft_path.display());
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Gen(args) => run_gen(args),
        Command::Distill(args) => {
            let cfg = load_config(ExperimentKind::Distill, args)?;
            let result = run_distillation_pipeline(&cfg)?;
            print_method_table(&result);
            write_result(&cfg, &result)
        }
        Command::HalfspaceRcn(args) => {
            let cfg = load_config(ExperimentKind::HalfspaceRcn, args)?;
            let result = run_halfspace_rcn(&cfg)?;
            let report = result.halfspace.as_ref().expect("halfspace report");
            println!(
                "T = {} steps, epsilon = {}, success in {}/{} trials",
                report.steps,
                report.epsilon,
                report.success_count,
                report.trials.len()
            );
            for t in &report.trials {
                println!(
                    "trial {:>3}: min err {:.4} at t = {:>8}  ||w|| = {:.2}  w.w* = {:.3}  {}",
                    t.trial,
                    t.min_error,
                    t.argmin_step,
                    t.final_norm,
                    t.final_correlation,
                    if t.success { "ok" } else { "MISS" }
                );
            }
            write_result(&cfg, &result)
        }
        Command::Scaling(args) => {
            let cfg = load_config(ExperimentKind::Scaling, args)?;
            let result = scaling_study(&cfg)?;
            let report = result.scaling.as_ref().expect("scaling report");
            for g in &report.gammas {
                match g.median_hitting_time {
                    Some(t) => println!("gamma = {:<6} median T* = {t}", g.gamma),
                    None => println!("gamma = {:<6} censored", g.gamma),
                }
            }
            println!(
                "log T* vs log gamma slope = {:.3} (intercept {:.3})",
                report.slope, report.intercept
            );
            write_result(&cfg, &result)
        }
        Command::IsotonicFit(args) => {
            let cfg = load_config(ExperimentKind::IsotonicFit, args)?;
            let (estimator, result) = run_isotonic_fit(&cfg)?;
            if let Some(mae) = result.metrics.get("alpha_mae") {
                println!("alpha estimation MAE on U: {mae:.4}");
            }
            match &cfg.out {
                Some(path) => {
                    estimator.save(path)?;
                    println!("estimator written to {}", path.display());
                }
                None => println!("no --out given; estimator not persisted"),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::InvalidConfig(_) | Error::InvalidArgument(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
