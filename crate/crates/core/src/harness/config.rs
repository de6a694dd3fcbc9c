//! Flat `key = value` experiment configuration.
//!
//! `#` starts a comment, lists are comma-separated, unknown keys are a
//! hard error, and every key is either set or defaulted. The CLI flags
//! `--seed`, `--trials`, `--out` override the file.

use crate::error::{io_error, Error, Result};
use crate::isotonic::KMode;
use crate::mixing::MixVariant;
use crate::oracle::TeacherMode;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Distill,
    HalfspaceRcn,
    Scaling,
    IsotonicFit,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Distill => "distill",
            ExperimentKind::HalfspaceRcn => "halfspace-rcn",
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::IsotonicFit => "isotonic-fit",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "distill" => Ok(ExperimentKind::Distill),
            "halfspace-rcn" => Ok(ExperimentKind::HalfspaceRcn),
            "scaling" => Ok(ExperimentKind::Scaling),
            "isotonic-fit" => Ok(ExperimentKind::IsotonicFit),
            other => Err(Error::InvalidConfig(format!(
                "unknown experiment kind `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    VanillaSoft,
    VanillaHard,
    SlamEstimated,
    SlamOracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::VanillaSoft => "vanilla-soft",
            Method::VanillaHard => "vanilla-hard",
            Method::SlamEstimated => "slam-estimated",
            Method::SlamOracle => "slam-oracle",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "vanilla-soft" => Ok(Method::VanillaSoft),
            "vanilla-hard" => Ok(Method::VanillaHard),
            "slam-estimated" => Ok(Method::SlamEstimated),
            "slam-oracle" => Ok(Method::SlamOracle),
            other => Err(Error::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TeacherKind {
    Simulated,
    Fitted,
}

/// Which label sits in the first cross-entropy slot of the mixed loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlamLabel {
    Soft,
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KModeConfig {
    Adaptive,
    Fixed(usize),
}

impl KModeConfig {
    pub fn to_k_mode(self) -> KMode {
        match self {
            KModeConfig::Adaptive => KMode::Adaptive,
            KModeConfig::Fixed(k) => KMode::Fixed(k),
        }
    }
}

/// Fully resolved experiment description. Field-by-field mirror of the
/// config keys (documented in the README).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub trials: usize,
    pub out: Option<PathBuf>,

    // Mixture dataset.
    pub classes: usize,
    pub dim: usize,
    pub pool_size: usize,
    pub test_size: usize,
    pub separation: f64,

    // Split protocol.
    pub labeled_size: usize,
    pub validation_size: usize,
    pub include_validation: bool,

    // Teacher.
    pub teacher: TeacherKind,
    pub teacher_mode: String,
    pub teacher_alpha: f64,
    pub teacher_alpha_min: f64,
    pub teacher_alpha_max: f64,
    pub teacher_k: usize,
    pub teacher_epochs: usize,

    // Methods.
    pub methods: Vec<Method>,
    pub mix_variant: MixVariant,
    pub temperature: f64,
    pub slam_label: SlamLabel,
    pub weight_file: Option<PathBuf>,

    // Isotonic estimation.
    pub lb: f64,
    pub threshold_t: f64,
    pub k_mode: KModeConfig,

    // Student SGD.
    pub epochs: usize,
    pub pretrain_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub eval_every_epochs: usize,

    // Halfspace / scaling studies.
    pub hs_dim: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub theorem_constant: f64,
    pub holdout_size: usize,
    pub snapshot_count: usize,
    pub gamma_list: Vec<f64>,
    pub budget_constant: f64,
}

struct Reader {
    map: BTreeMap<String, String>,
}

impl Reader {
    fn take_raw(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn take<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        match self.map.remove(key) {
            None => Ok(default),
            Some(raw) => raw.parse::<T>().map_err(|e| {
                Error::InvalidConfig(format!("key `{key}`: cannot parse `{raw}`: {e}"))
            }),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(key) = self.map.keys().next() {
            return Err(Error::InvalidConfig(format!("unknown key `{key}`")));
        }
        Ok(())
    }
}

/// Parses a config file into a raw key -> value map.
pub(crate) fn parse_kv_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| io_error(format!("reading config {}", path.display()), e))?;
    parse_kv_text(&text)
}

pub(crate) fn parse_kv_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::InvalidConfig(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(Error::InvalidConfig(format!("line {}: empty key", lineno + 1)));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(Error::InvalidConfig(format!(
                "line {}: duplicate key `{key}`",
                lineno + 1
            )));
        }
    }
    Ok(map)
}

impl ExperimentConfig {
    /// Resolves a raw key map against the defaults. `kind` comes from
    /// the CLI subcommand; a config `experiment` key, when present, must
    /// agree with it.
    pub fn from_map(kind: ExperimentKind, map: BTreeMap<String, String>) -> Result<Self> {
        let mut r = Reader { map };

        if let Some(raw) = r.take_raw("experiment") {
            let file_kind = ExperimentKind::parse(&raw)?;
            if file_kind != kind {
                return Err(Error::InvalidConfig(format!(
                    "config says experiment = {}, but the {} subcommand was invoked",
                    file_kind.name(),
                    kind.name()
                )));
            }
        }

        let methods = match r.take_raw("methods") {
            None => vec![Method::VanillaSoft, Method::SlamEstimated],
            Some(raw) => raw
                .split(',')
                .map(|s| Method::parse(s.trim()))
                .collect::<Result<Vec<_>>>()?,
        };

        let teacher = match r.take_raw("teacher").as_deref() {
            None | Some("simulated") => TeacherKind::Simulated,
            Some("fitted") => TeacherKind::Fitted,
            Some(other) => {
                return Err(Error::InvalidConfig(format!(
                    "key `teacher`: expected simulated|fitted, got `{other}`"
                )))
            }
        };

        let teacher_mode = r
            .take_raw("teacher_mode")
            .unwrap_or_else(|| "margin-correlated".to_string());
        if !["constant", "margin-correlated", "rcn"].contains(&teacher_mode.as_str()) {
            return Err(Error::InvalidConfig(format!(
                "key `teacher_mode`: expected constant|margin-correlated|rcn, got `{teacher_mode}`"
            )));
        }

        let mix_variant = match r.take_raw("mix_variant").as_deref() {
            None | Some("unnormalized") => MixVariant::Unnormalized,
            Some("normalized") => MixVariant::Normalized,
            Some(other) => {
                return Err(Error::InvalidConfig(format!(
                    "key `mix_variant`: expected normalized|unnormalized, got `{other}`"
                )))
            }
        };

        let slam_label = match r.take_raw("slam_label").as_deref() {
            None | Some("soft") => SlamLabel::Soft,
            Some("hard") => SlamLabel::Hard,
            Some(other) => {
                return Err(Error::InvalidConfig(format!(
                    "key `slam_label`: expected soft|hard, got `{other}`"
                )))
            }
        };

        let k_mode = match r.take_raw("k_mode").as_deref() {
            None | Some("adaptive") => KModeConfig::Adaptive,
            Some("fixed") => KModeConfig::Fixed(0), // patched with fixed_k below
            Some(other) => {
                return Err(Error::InvalidConfig(format!(
                    "key `k_mode`: expected adaptive|fixed, got `{other}`"
                )))
            }
        };
        let fixed_k: usize = r.take("fixed_k", 2)?;
        let k_mode = match k_mode {
            KModeConfig::Adaptive => KModeConfig::Adaptive,
            KModeConfig::Fixed(_) => KModeConfig::Fixed(fixed_k),
        };

        let gamma_list = match r.take_raw("gamma_list") {
            None => vec![0.05, 0.1, 0.2],
            Some(raw) => raw
                .split(',')
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|e| {
                        Error::InvalidConfig(format!("key `gamma_list`: bad entry `{s}`: {e}"))
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        };

        let include_validation = match r.take_raw("include_validation").as_deref() {
            None | Some("true") => true,
            Some("false") => false,
            Some(other) => {
                return Err(Error::InvalidConfig(format!(
                    "key `include_validation`: expected true|false, got `{other}`"
                )))
            }
        };

        let epochs: usize = r.take("epochs", 30)?;
        let cfg = ExperimentConfig {
            kind,
            seed: r.take("seed", 0)?,
            trials: r.take("trials", 1)?,
            out: r.take_raw("out").map(PathBuf::from),
            classes: r.take("classes", 10)?,
            dim: r.take("dim", 20)?,
            pool_size: r.take("pool_size", 10_800)?,
            test_size: r.take("test_size", 10_000)?,
            separation: r.take("separation", 3.0)?,
            labeled_size: r.take("labeled_size", 300)?,
            validation_size: r.take("validation_size", 500)?,
            include_validation,
            teacher,
            teacher_mode,
            teacher_alpha: r.take("teacher_alpha", 0.6)?,
            teacher_alpha_min: r.take("teacher_alpha_min", 0.2)?,
            teacher_alpha_max: r.take("teacher_alpha_max", 1.0)?,
            teacher_k: r.take("teacher_k", 3)?,
            teacher_epochs: r.take("teacher_epochs", epochs)?,
            methods,
            mix_variant,
            temperature: r.take("temperature", 1.0)?,
            slam_label,
            weight_file: r.take_raw("weight_file").map(PathBuf::from),
            lb: r.take("lb", 0.5)?,
            threshold_t: r.take("threshold_t", 0.9)?,
            k_mode,
            epochs,
            pretrain_epochs: r.take("pretrain_epochs", epochs)?,
            batch_size: r.take("batch_size", 32)?,
            learning_rate: r.take("learning_rate", 0.5)?,
            eval_every_epochs: r.take("eval_every_epochs", 5)?,
            hs_dim: r.take("hs_dim", 10)?,
            gamma: r.take("gamma", 0.1)?,
            epsilon: r.take("epsilon", 0.05)?,
            theorem_constant: r.take("theorem_constant", 1.0)?,
            holdout_size: r.take("holdout_size", 10_000)?,
            snapshot_count: r.take("snapshot_count", 100)?,
            gamma_list,
            budget_constant: r.take("budget_constant", 4.0)?,
        };
        r.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads and resolves a config file for the given subcommand.
    pub fn from_file(kind: ExperimentKind, path: &Path) -> Result<Self> {
        Self::from_map(kind, parse_kv_file(path)?)
    }

    /// Loads a config file taking the experiment kind from its
    /// `experiment` key (default distill). Used by dataset generation,
    /// which serves every kind.
    pub fn from_file_any_kind(path: &Path) -> Result<Self> {
        let map = parse_kv_file(path)?;
        let kind = match map.get("experiment") {
            Some(raw) => ExperimentKind::parse(raw)?,
            None => ExperimentKind::Distill,
        };
        Self::from_map(kind, map)
    }

    /// Defaults-only config for the given kind.
    pub fn default_for(kind: ExperimentKind) -> Self {
        Self::from_map(kind, BTreeMap::new()).expect("defaults are valid")
    }

    fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.trials == 0 {
            return fail("trials must be >= 1".into());
        }
        match self.kind {
            ExperimentKind::Distill | ExperimentKind::IsotonicFit => {
                if self.methods.is_empty() {
                    return fail("at least one method is required".into());
                }
                if self.classes < 2 {
                    return fail("classes must be >= 2".into());
                }
                if self.dim == 0 {
                    return fail("dim must be >= 1".into());
                }
                if self.labeled_size + self.validation_size > self.pool_size {
                    return fail(format!(
                        "labeled_size + validation_size = {} exceeds pool_size = {}",
                        self.labeled_size + self.validation_size,
                        self.pool_size
                    ));
                }
                let needs_estimation = self.kind == ExperimentKind::IsotonicFit
                    || self.methods.contains(&Method::SlamEstimated);
                if needs_estimation && self.validation_size < 2 {
                    return fail("validation_size must be >= 2 to estimate accuracy statistics".into());
                }
                if !(0.0..=1.0).contains(&self.lb) {
                    return fail(format!("lb = {} outside [0, 1]", self.lb));
                }
                if !(0.0..=1.0).contains(&self.threshold_t) {
                    return fail(format!("threshold_t = {} outside [0, 1]", self.threshold_t));
                }
                if let KModeConfig::Fixed(k) = self.k_mode {
                    if k < 2 || k > self.classes {
                        return fail(format!("fixed_k = {k} outside 2..={}", self.classes));
                    }
                }
                if !(self.temperature > 0.0) {
                    return fail(format!("temperature = {} must be positive", self.temperature));
                }
                if self.teacher == TeacherKind::Simulated {
                    match self.teacher_mode.as_str() {
                        "rcn" if self.classes != 2 => {
                            return fail("teacher_mode = rcn requires classes = 2".into());
                        }
                        _ => {}
                    }
                    if self.teacher_k < 2 || self.teacher_k > self.classes {
                        return fail(format!(
                            "teacher_k = {} outside 2..={}",
                            self.teacher_k, self.classes
                        ));
                    }
                }
                if self.methods.contains(&Method::SlamOracle)
                    && self.teacher != TeacherKind::Simulated
                {
                    return fail(
                        "slam-oracle requires a simulated teacher (true alpha/k are unavailable \
                         for a fitted teacher)"
                            .into(),
                    );
                }
                if self.batch_size == 0 || !(self.learning_rate > 0.0) {
                    return fail("batch_size must be >= 1 and learning_rate positive".into());
                }
                if self.eval_every_epochs == 0 {
                    return fail("eval_every_epochs must be >= 1".into());
                }
            }
            ExperimentKind::HalfspaceRcn => {
                if self.hs_dim == 0 {
                    return fail("hs_dim must be >= 1".into());
                }
                if !(self.gamma > 0.0) || self.gamma >= 1.0 {
                    return fail(format!("gamma = {} outside (0, 1)", self.gamma));
                }
                if self.teacher_alpha == 0.5 {
                    return fail("teacher_alpha = 1/2 makes the adaptive step undefined".into());
                }
                if !(0.0..=1.0).contains(&self.teacher_alpha) {
                    return fail(format!("teacher_alpha = {} outside [0, 1]", self.teacher_alpha));
                }
                if !(self.epsilon > 0.0) || self.epsilon > 1.0 {
                    return fail(format!("epsilon = {} outside (0, 1]", self.epsilon));
                }
                if !(self.theorem_constant > 0.0) {
                    return fail("theorem_constant must be positive".into());
                }
                // 10^4 probe points keep the Binomial standard error of
                // every snapshot at or below 0.005.
                if self.holdout_size < 10_000 {
                    return fail(format!(
                        "holdout_size = {} too small; >= 10000 keeps the snapshot standard error <= 0.005",
                        self.holdout_size
                    ));
                }
                if self.snapshot_count == 0 {
                    return fail("snapshot_count must be >= 1".into());
                }
            }
            ExperimentKind::Scaling => {
                if self.gamma_list.len() < 3 {
                    return fail("gamma_list needs at least 3 values".into());
                }
                let mut sorted = self.gamma_list.clone();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    return fail("gamma_list entries must be distinct".into());
                }
                if sorted.iter().any(|&g| !(g > 0.0) || g >= 1.0) {
                    return fail("every gamma must lie in (0, 1)".into());
                }
                if self.teacher_alpha == 0.5 || !(0.0..=1.0).contains(&self.teacher_alpha) {
                    return fail(format!(
                        "teacher_alpha = {} invalid for the scaling study",
                        self.teacher_alpha
                    ));
                }
                if !(self.epsilon > 0.0) || self.epsilon > 1.0 {
                    return fail(format!("epsilon = {} outside (0, 1]", self.epsilon));
                }
                if !(self.budget_constant > 0.0) {
                    return fail("budget_constant must be positive".into());
                }
                if self.hs_dim == 0 {
                    return fail("hs_dim must be >= 1".into());
                }
                if self.holdout_size < 10_000 {
                    return fail(format!(
                        "holdout_size = {} too small; >= 10000 keeps probe standard errors <= 0.005",
                        self.holdout_size
                    ));
                }
            }
        }
        Ok(())
    }

    /// Teacher noise regime for the simulator.
    pub fn teacher_noise(&self) -> TeacherMode {
        match self.teacher_mode.as_str() {
            "constant" => TeacherMode::Constant {
                alpha: self.teacher_alpha,
                k: self.teacher_k,
            },
            "rcn" => TeacherMode::Rcn {
                alpha: self.teacher_alpha,
            },
            _ => TeacherMode::MarginCorrelated {
                alpha_min: self.teacher_alpha_min,
                alpha_max: self.teacher_alpha_max,
                k: self.teacher_k,
            },
        }
    }

    /// Resolved key/value echo for the results record.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        put("experiment", self.kind.name().to_string());
        put("seed", self.seed.to_string());
        put("trials", self.trials.to_string());
        if let Some(out) = &self.out {
            put("out", out.display().to_string());
        }
        put("classes", self.classes.to_string());
        put("dim", self.dim.to_string());
        put("pool_size", self.pool_size.to_string());
        put("test_size", self.test_size.to_string());
        put("separation", self.separation.to_string());
        put("labeled_size", self.labeled_size.to_string());
        put("validation_size", self.validation_size.to_string());
        put("include_validation", self.include_validation.to_string());
        put(
            "teacher",
            match self.teacher {
                TeacherKind::Simulated => "simulated".to_string(),
                TeacherKind::Fitted => "fitted".to_string(),
            },
        );
        put("teacher_mode", self.teacher_mode.clone());
        put("teacher_alpha", self.teacher_alpha.to_string());
        put("teacher_alpha_min", self.teacher_alpha_min.to_string());
        put("teacher_alpha_max", self.teacher_alpha_max.to_string());
        put("teacher_k", self.teacher_k.to_string());
        put("teacher_epochs", self.teacher_epochs.to_string());
        put(
            "methods",
            self.methods
                .iter()
                .map(|m| m.name())
                .collect::<Vec<_>>()
                .join(","),
        );
        put(
            "mix_variant",
            match self.mix_variant {
                MixVariant::Normalized => "normalized".to_string(),
                MixVariant::Unnormalized => "unnormalized".to_string(),
            },
        );
        put("temperature", self.temperature.to_string());
        put(
            "slam_label",
            match self.slam_label {
                SlamLabel::Soft => "soft".to_string(),
                SlamLabel::Hard => "hard".to_string(),
            },
        );
        if let Some(w) = &self.weight_file {
            put("weight_file", w.display().to_string());
        }
        put("lb", self.lb.to_string());
        put("threshold_t", self.threshold_t.to_string());
        put(
            "k_mode",
            match self.k_mode {
                KModeConfig::Adaptive => "adaptive".to_string(),
                KModeConfig::Fixed(k) => format!("fixed({k})"),
            },
        );
        put("epochs", self.epochs.to_string());
        put("pretrain_epochs", self.pretrain_epochs.to_string());
        put("batch_size", self.batch_size.to_string());
        put("learning_rate", self.learning_rate.to_string());
        put("eval_every_epochs", self.eval_every_epochs.to_string());
        put("hs_dim", self.hs_dim.to_string());
        put("gamma", self.gamma.to_string());
        put("epsilon", self.epsilon.to_string());
        put("theorem_constant", self.theorem_constant.to_string());
        put("holdout_size", self.holdout_size.to_string());
        put("snapshot_count", self.snapshot_count.to_string());
        put(
            "gamma_list",
            self.gamma_list
                .iter()
                .map(|g| g.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        put("budget_constant", self.budget_constant.to_string());
        map
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_lists_and_defaults() {
        let text = "
# an experiment
seed = 7
methods = vanilla-soft, slam-oracle   # trailing comment
gamma_list = 0.05, 0.1, 0.2
";
        let map = parse_kv_text(text).unwrap();
        let cfg = ExperimentConfig::from_map(ExperimentKind::Distill, map).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.methods, vec![Method::VanillaSoft, Method::SlamOracle]);
        assert_eq!(cfg.trials, 1);
        assert_eq!(cfg.lb, 0.5);
        assert_eq!(cfg.validation_size, 500);
    }

    #[test]
    fn unknown_keys_are_a_hard_error() {
        let map = parse_kv_text("seeed = 3").unwrap();
        let err = ExperimentConfig::from_map(ExperimentKind::Distill, map).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(m) if m.contains("seeed")));
    }

    #[test]
    fn malformed_lines_and_duplicates_are_rejected() {
        assert!(parse_kv_text("just some words").is_err());
        assert!(parse_kv_text("a = 1\na = 2").is_err());
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let map = parse_kv_text("experiment = scaling").unwrap();
        assert!(ExperimentConfig::from_map(ExperimentKind::Distill, map).is_err());
    }

    #[test]
    fn split_sizes_must_fit_the_pool() {
        let map = parse_kv_text("pool_size = 100\nlabeled_size = 80\nvalidation_size = 30").unwrap();
        assert!(ExperimentConfig::from_map(ExperimentKind::Distill, map).is_err());
    }

    #[test]
    fn oracle_method_requires_simulated_teacher() {
        let map = parse_kv_text("teacher = fitted\nmethods = slam-oracle").unwrap();
        assert!(ExperimentConfig::from_map(ExperimentKind::Distill, map).is_err());
    }

    #[test]
    fn halfspace_validation_rejects_half_alpha_and_small_holdout() {
        let map = parse_kv_text("teacher_alpha = 0.5").unwrap();
        assert!(ExperimentConfig::from_map(ExperimentKind::HalfspaceRcn, map).is_err());
        let map = parse_kv_text("teacher_alpha = 0.85\nholdout_size = 100").unwrap();
        assert!(ExperimentConfig::from_map(ExperimentKind::HalfspaceRcn, map).is_err());
    }

    #[test]
    fn scaling_rejects_duplicate_gammas() {
        let map = parse_kv_text("gamma_list = 0.1, 0.1, 0.2\nteacher_alpha = 0.85").unwrap();
        assert!(ExperimentConfig::from_map(ExperimentKind::Scaling, map).is_err());
    }
}
