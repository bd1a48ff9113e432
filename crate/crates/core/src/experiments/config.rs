//! TOML experiment files.
//!
//! ```toml
//! scenario = "lawlor"
//! output_dir = "out/disc"
//! output_times = [0.0, 1.0, 5.0]
//! emit_svg = true
//!
//! [lawlor]
//! alpha = 0.8
//! initial = { kind = "bump", amplitude = 0.3, width = 0.3 }
//!
//! [stepper]
//! cfl_safety = 0.2
//! ```
//!
//! Every section is optional except the one named by `scenario`; missing
//! keys take their defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clifford::{CliffordConfig, CliffordInitial, CliffordMode};
use crate::lawlor::{LawlorConfig, LawlorInitial};
use crate::pde::{Scheme, StepperConfig};
use crate::verification::LadderProblem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: {message}")]
    TypeMismatch { line: usize, message: String },
    #[error("{}: {message}", location(*line))]
    InvariantViolation { line: Option<usize>, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
}

fn location(line: Option<usize>) -> String {
    line.map_or_else(|| "config".to_string(), |l| format!("line {l}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Lawlor,
    Clifford,
    FrameCheck,
    Convergence,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct FileConfig {
    scenario: ScenarioKind,
    output_dir: PathBuf,
    output_times: Vec<f64>,
    emit_svg: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    lawlor: Option<LawlorSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    clifford: Option<CliffordSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    frame_check: Option<FrameCheckSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    convergence: Option<ConvergenceSection>,
    stepper: StepperSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
enum InitialSection {
    Constant {
        value: f64,
    },
    Bump {
        amplitude: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        width: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base: Option<f64>,
    },
    Custom {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LawlorSection {
    #[serde(default)]
    alpha: f64,
    #[serde(default = "default_epsilon")]
    epsilon: f64,
    #[serde(default = "default_grid_n")]
    grid_n: usize,
    #[serde(default = "default_t_final")]
    t_final: f64,
    #[serde(default)]
    stop_at_steady: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial: Option<InitialSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ModeName {
    Rescaled,
    Unrescaled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CliffordSection {
    #[serde(default)]
    alpha: f64,
    #[serde(default = "default_epsilon")]
    epsilon: f64,
    #[serde(default = "default_grid_n")]
    grid_n: usize,
    #[serde(default = "default_t_final")]
    t_final: f64,
    #[serde(default = "default_mode")]
    mode: ModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial: Option<InitialSection>,
}

fn default_mode() -> ModeName {
    ModeName::Rescaled
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_grid_n() -> usize {
    400
}

fn default_t_final() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameCheckSection {
    #[serde(default = "default_frame_n")]
    n: usize,
    #[serde(default)]
    alpha: f64,
    #[serde(default = "default_trials")]
    trials: usize,
    #[serde(default)]
    seed: u64,
}

fn default_frame_n() -> usize {
    2
}

fn default_trials() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConvergenceSection {
    problem: String,
    #[serde(default = "default_ladder")]
    ladder: Vec<usize>,
}

fn default_ladder() -> Vec<usize> {
    vec![40, 80, 160]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum SchemeName {
    ExplicitRk4,
    SemiImplicitEuler,
    Rosenbrock2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct StepperSection {
    scheme: SchemeName,
    cfl_safety: f64,
    dt_max: f64,
    dt_min: f64,
    steady_tol: f64,
    max_steps: usize,
}

impl Default for StepperSection {
    fn default() -> Self {
        Self::from(&StepperConfig::default())
    }
}

impl From<&StepperConfig> for StepperSection {
    fn from(c: &StepperConfig) -> Self {
        Self {
            scheme: match c.scheme {
                Scheme::ExplicitRK4 => SchemeName::ExplicitRk4,
                Scheme::SemiImplicitEuler => SchemeName::SemiImplicitEuler,
                Scheme::Rosenbrock2 => SchemeName::Rosenbrock2,
            },
            cfl_safety: c.cfl_safety,
            dt_max: c.dt_max,
            dt_min: c.dt_min,
            steady_tol: c.steady_tol,
            max_steps: c.max_steps,
        }
    }
}

impl From<&StepperSection> for StepperConfig {
    fn from(s: &StepperSection) -> Self {
        Self {
            scheme: match s.scheme {
                SchemeName::ExplicitRk4 => Scheme::ExplicitRK4,
                SchemeName::SemiImplicitEuler => Scheme::SemiImplicitEuler,
                SchemeName::Rosenbrock2 => Scheme::Rosenbrock2,
            },
            cfl_safety: s.cfl_safety,
            dt_max: s.dt_max,
            dt_min: s.dt_min,
            steady_tol: s.steady_tol,
            max_steps: s.max_steps,
        }
    }
}

// Missing stepper keys fall back to the defaults one by one.
impl<'de> Deserialize<'de> for StepperSectionPartial {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            scheme: Option<SchemeName>,
            cfl_safety: Option<f64>,
            dt_max: Option<f64>,
            dt_min: Option<f64>,
            steady_tol: Option<f64>,
            max_steps: Option<usize>,
        }
        let r = Raw::deserialize(d)?;
        let base = StepperSection::default();
        Ok(Self(StepperSection {
            scheme: r.scheme.unwrap_or(base.scheme),
            cfl_safety: r.cfl_safety.unwrap_or(base.cfl_safety),
            dt_max: r.dt_max.unwrap_or(base.dt_max),
            dt_min: r.dt_min.unwrap_or(base.dt_min),
            steady_tol: r.steady_tol.unwrap_or(base.steady_tol),
            max_steps: r.max_steps.unwrap_or(base.max_steps),
        }))
    }
}

struct StepperSectionPartial(StepperSection);

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Lawlor(LawlorConfig),
    Clifford(CliffordConfig),
    FrameCheck {
        n: usize,
        alpha: f64,
        trials: usize,
        seed: u64,
    },
    Convergence {
        problem: LadderProblem,
        ladder: Vec<usize>,
        stepper: StepperConfig,
    },
}

impl Scenario {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            Self::Lawlor(_) => ScenarioKind::Lawlor,
            Self::Clifford(_) => ScenarioKind::Clifford,
            Self::FrameCheck { .. } => ScenarioKind::FrameCheck,
            Self::Convergence { .. } => ScenarioKind::Convergence,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub output_dir: PathBuf,
    pub output_times: Vec<f64>,
    pub emit_svg: bool,
}

/// 1-based line of byte `offset` in `text`.
fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = …` inside `[section]` (or at top level for `None`).
fn find_key_line(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = Some(name.trim().to_string());
            continue;
        }
        let in_section = match (section, &current) {
            (None, None) => true,
            (Some(s), Some(c)) => s == c,
            _ => false,
        };
        if !in_section {
            continue;
        }
        if let Some((k, _)) = line.split_once('=') {
            if k.trim() == key {
                return Some(i + 1);
            }
        }
    }
    None
}

fn classify(text: &str, err: toml::de::Error) -> ConfigError {
    let line = err.span().map_or(1, |s| line_of(text, s.start));
    let message = err.message().to_string();
    if let Some(rest) = message.strip_prefix("unknown field `") {
        let key = rest.split('`').next().unwrap_or_default().to_string();
        return ConfigError::UnknownKey { line, key };
    }
    if message.starts_with("invalid type") || message.starts_with("unknown variant") || message.contains("expected") {
        return ConfigError::TypeMismatch { line, message };
    }
    ConfigError::Syntax { line, message }
}

/// Parses and validates an experiment file.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Partial {
        scenario: ScenarioKind,
        #[serde(default = "default_output_dir")]
        output_dir: PathBuf,
        #[serde(default)]
        output_times: Vec<f64>,
        #[serde(default)]
        emit_svg: bool,
        lawlor: Option<LawlorSection>,
        clifford: Option<CliffordSection>,
        frame_check: Option<FrameCheckSection>,
        convergence: Option<ConvergenceSection>,
        stepper: Option<StepperSectionPartial>,
    }
    let p: Partial = toml::from_str(text).map_err(|e| classify(text, e))?;
    let file = FileConfig {
        scenario: p.scenario,
        output_dir: p.output_dir,
        output_times: p.output_times,
        emit_svg: p.emit_svg,
        lawlor: p.lawlor,
        clifford: p.clifford,
        frame_check: p.frame_check,
        convergence: p.convergence,
        stepper: p.stepper.map(|s| s.0).unwrap_or_default(),
    };
    build(text, file)
}

/// Reads and parses an experiment file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config(&text)
}

fn violation(text: &str, section: Option<&str>, key: &str, message: String) -> ConfigError {
    ConfigError::InvariantViolation {
        line: find_key_line(text, section, key),
        message,
    }
}

fn build(text: &str, file: FileConfig) -> Result<ExperimentConfig, ConfigError> {
    if file.output_times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(violation(
            text,
            None,
            "output_times",
            "output_times must be strictly increasing".into(),
        ));
    }
    if file.output_times.iter().any(|t| !t.is_finite()) {
        return Err(violation(
            text,
            None,
            "output_times",
            "output_times must be finite".into(),
        ));
    }
    let stepper = StepperConfig::from(&file.stepper);
    stepper
        .validate()
        .map_err(|e| violation(text, Some("stepper"), "cfl_safety", e.to_string()))?;
    let missing = |name: &str| ConfigError::InvariantViolation {
        line: find_key_line(text, None, "scenario"),
        message: format!("scenario `{name}` needs a [{}] section", name.replace('-', "_")),
    };
    let scenario = match file.scenario {
        ScenarioKind::Lawlor => {
            let s = file.lawlor.clone().unwrap_or_else(|| LawlorSection {
                alpha: 0.0,
                epsilon: default_epsilon(),
                grid_n: default_grid_n(),
                t_final: default_t_final(),
                stop_at_steady: false,
                initial: None,
            });
            let initial = match s.initial.clone() {
                None => LawlorConfig::default().initial,
                Some(InitialSection::Constant { value }) => LawlorInitial::Constant(value),
                Some(InitialSection::Bump { amplitude, width, base }) => {
                    if base.is_some() {
                        return Err(violation(
                            text,
                            Some("lawlor"),
                            "initial",
                            "lawlor bump has no `base`".into(),
                        ));
                    }
                    LawlorInitial::Bump {
                        amplitude,
                        width: width.unwrap_or(0.3),
                    }
                }
                Some(InitialSection::Custom { values }) => LawlorInitial::Custom(values),
            };
            let cfg = LawlorConfig {
                alpha: s.alpha,
                epsilon: s.epsilon,
                grid_n: s.grid_n,
                t_final: s.t_final,
                stop_at_steady: s.stop_at_steady,
                initial,
                stepper: stepper.clone(),
            };
            cfg.validate().map_err(|e| {
                let key = invalid_key(&e.to_string());
                violation(text, Some("lawlor"), key, e.to_string())
            })?;
            Scenario::Lawlor(cfg)
        }
        ScenarioKind::Clifford => {
            let s = file.clifford.clone().unwrap_or_else(|| CliffordSection {
                alpha: 0.0,
                epsilon: default_epsilon(),
                grid_n: default_grid_n(),
                t_final: default_t_final(),
                mode: ModeName::Rescaled,
                t0: None,
                initial: None,
            });
            let mode = match (s.mode, s.t0) {
                (ModeName::Rescaled, None) => CliffordMode::Rescaled,
                (ModeName::Rescaled, Some(_)) => {
                    return Err(violation(
                        text,
                        Some("clifford"),
                        "t0",
                        "t0 only applies to mode = \"unrescaled\"".into(),
                    ))
                }
                (ModeName::Unrescaled, t0) => CliffordMode::Unrescaled { t0: t0.unwrap_or(-1.0) },
            };
            let initial = match s.initial.clone() {
                None => CliffordConfig::default().initial,
                Some(InitialSection::Constant { value }) => CliffordInitial::Constant(value),
                Some(InitialSection::Bump { amplitude, width, base }) => {
                    if width.is_some() {
                        return Err(violation(
                            text,
                            Some("clifford"),
                            "initial",
                            "clifford bump has no `width`".into(),
                        ));
                    }
                    CliffordInitial::Bump {
                        base: base.unwrap_or(0.0),
                        amplitude,
                    }
                }
                Some(InitialSection::Custom { values }) => CliffordInitial::Custom(values),
            };
            let cfg = CliffordConfig {
                alpha: s.alpha,
                epsilon: s.epsilon,
                grid_n: s.grid_n,
                t_final: s.t_final,
                initial,
                stepper: stepper.clone(),
                mode,
            };
            cfg.validate().map_err(|e| {
                let key = invalid_key(&e.to_string());
                violation(text, Some("clifford"), key, e.to_string())
            })?;
            Scenario::Clifford(cfg)
        }
        ScenarioKind::FrameCheck => {
            let s = file.frame_check.clone().ok_or_else(|| missing("frame-check"))?;
            if s.n < 2 {
                return Err(violation(text, Some("frame_check"), "n", format!("n = {} < 2", s.n)));
            }
            if !s.alpha.is_finite() {
                return Err(violation(
                    text,
                    Some("frame_check"),
                    "alpha",
                    "alpha must be finite".into(),
                ));
            }
            Scenario::FrameCheck {
                n: s.n,
                alpha: s.alpha,
                trials: s.trials,
                seed: s.seed,
            }
        }
        ScenarioKind::Convergence => {
            let s = file.convergence.clone().ok_or_else(|| missing("convergence"))?;
            let problem: LadderProblem = s
                .problem
                .parse()
                .map_err(|m| violation(text, Some("convergence"), "problem", m))?;
            if s.ladder.len() < 2 || s.ladder.windows(2).any(|w| w[1] != 2 * w[0]) || s.ladder[0] < 8 {
                return Err(violation(
                    text,
                    Some("convergence"),
                    "ladder",
                    format!(
                        "ladder {:?} must double at every step, starting from at least 8",
                        s.ladder
                    ),
                ));
            }
            Scenario::Convergence {
                problem,
                ladder: s.ladder,
                stepper,
            }
        }
    };
    Ok(ExperimentConfig {
        scenario,
        output_dir: file.output_dir,
        output_times: file.output_times,
        emit_svg: file.emit_svg,
    })
}

/// Key named at the start of a flow validation message.
fn invalid_key(message: &str) -> &'static str {
    let msg = message.trim_start_matches("invalid configuration: ");
    for key in ["alpha", "epsilon", "grid_n", "t_final", "t0", "cfl_safety"] {
        if msg.starts_with(key) {
            return key;
        }
    }
    if msg.contains("initial") {
        "initial"
    } else {
        "alpha"
    }
}

fn initial_section_lawlor(i: &LawlorInitial) -> InitialSection {
    match i {
        LawlorInitial::Constant(v) => InitialSection::Constant { value: *v },
        LawlorInitial::Bump { amplitude, width } => InitialSection::Bump {
            amplitude: *amplitude,
            width: Some(*width),
            base: None,
        },
        LawlorInitial::Custom(v) => InitialSection::Custom { values: v.clone() },
    }
}

fn initial_section_clifford(i: &CliffordInitial) -> InitialSection {
    match i {
        CliffordInitial::Constant(v) => InitialSection::Constant { value: *v },
        CliffordInitial::Bump { base, amplitude } => InitialSection::Bump {
            amplitude: *amplitude,
            width: None,
            base: Some(*base),
        },
        CliffordInitial::Custom(v) => InitialSection::Custom { values: v.clone() },
    }
}

/// Fully explicit TOML for `config`; parsing it gives `config` back.
pub fn to_toml(config: &ExperimentConfig) -> String {
    let mut file = FileConfig {
        scenario: config.scenario.kind(),
        output_dir: config.output_dir.clone(),
        output_times: config.output_times.clone(),
        emit_svg: config.emit_svg,
        lawlor: None,
        clifford: None,
        frame_check: None,
        convergence: None,
        stepper: StepperSection::default(),
    };
    match &config.scenario {
        Scenario::Lawlor(c) => {
            file.stepper = StepperSection::from(&c.stepper);
            file.lawlor = Some(LawlorSection {
                alpha: c.alpha,
                epsilon: c.epsilon,
                grid_n: c.grid_n,
                t_final: c.t_final,
                stop_at_steady: c.stop_at_steady,
                initial: Some(initial_section_lawlor(&c.initial)),
            });
        }
        Scenario::Clifford(c) => {
            file.stepper = StepperSection::from(&c.stepper);
            let (mode, t0) = match c.mode {
                CliffordMode::Rescaled => (ModeName::Rescaled, None),
                CliffordMode::Unrescaled { t0 } => (ModeName::Unrescaled, Some(t0)),
            };
            file.clifford = Some(CliffordSection {
                alpha: c.alpha,
                epsilon: c.epsilon,
                grid_n: c.grid_n,
                t_final: c.t_final,
                mode,
                t0,
                initial: Some(initial_section_clifford(&c.initial)),
            });
        }
        Scenario::FrameCheck { n, alpha, trials, seed } => {
            file.frame_check = Some(FrameCheckSection {
                n: *n,
                alpha: *alpha,
                trials: *trials,
                seed: *seed,
            });
        }
        Scenario::Convergence {
            problem,
            ladder,
            stepper,
        } => {
            file.stepper = StepperSection::from(stepper);
            file.convergence = Some(ConvergenceSection {
                problem: problem.name().to_string(),
                ladder: ladder.clone(),
            });
        }
    }
    toml::to_string(&file).expect("experiment config serialises")
}

/// Sets `path` (`section.key` or a bare key of the scenario's section) in
/// the TOML form of `config` and re-parses.
pub fn with_parameter(config: &ExperimentConfig, path: &str, value: f64) -> Result<ExperimentConfig, ConfigError> {
    let text = to_toml(config);
    let mut doc: toml::Table = toml::from_str(&text).expect("own output parses");
    let section = match config.scenario.kind() {
        ScenarioKind::Lawlor => "lawlor",
        ScenarioKind::Clifford => "clifford",
        ScenarioKind::FrameCheck => "frame_check",
        ScenarioKind::Convergence => "convergence",
    };
    let parts: Vec<&str> = if path.contains('.') {
        path.split('.').collect()
    } else if doc.contains_key(path) {
        vec![path]
    } else {
        vec![section, path]
    };
    let unknown = || ConfigError::UnknownKey {
        line: 0,
        key: path.to_string(),
    };
    let (last, head) = parts.split_last().ok_or_else(unknown)?;
    let mut table = &mut doc;
    for p in head {
        table = table.get_mut(*p).and_then(|v| v.as_table_mut()).ok_or_else(unknown)?;
    }
    let slot = table.get_mut(*last).ok_or_else(unknown)?;
    *slot = match slot {
        toml::Value::Integer(_) => {
            if value.fract() != 0.0 || !value.is_finite() {
                return Err(ConfigError::TypeMismatch {
                    line: 0,
                    message: format!("`{path}` takes an integer, got {value}"),
                });
            }
            toml::Value::Integer(value as i64)
        }
        toml::Value::Float(_) => toml::Value::Float(value),
        _ => {
            return Err(ConfigError::TypeMismatch {
                line: 0,
                message: format!("`{path}` is not numeric"),
            })
        }
    };
    parse_config(&toml::to_string(&doc).expect("table serialises"))
}
