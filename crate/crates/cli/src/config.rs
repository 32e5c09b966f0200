//! JSON configuration files.
//!
//! Only `topology` and `data` are required. Unknown keys and duplicate keys
//! are rejected; range errors name the offending key by its dotted path.

use std::path::Path;

use parnet_core::estimator::Constants;
use parnet_core::experiments::{CurveConfig, DataSpec};
use parnet_core::suites::CheckSettings;
use parnet_core::Topology;
use serde::Deserialize;

/// Master seed used when neither the command line, the config file nor the
/// environment supplies one.
pub const FALLBACK_SEED: u64 = 2024;
/// Environment variable holding the default master seed.
pub const SEED_ENV: &str = "PARNET_SEED";

#[derive(Debug)]
pub enum ConfigError {
    Io(String),
    /// Syntax or shape error, with the position reported by the parser.
    Parse(String),
    /// A value outside its valid range, keyed by dotted path.
    Range { key: String, reason: String },
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(m) => write!(f, "cannot read config: {m}"),
            ConfigError::Parse(m) => write!(f, "config parse error: {m}"),
            ConfigError::Range { key, reason } => write!(f, "invalid value for `{key}`: {reason}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn range(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Range {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum StepMode {
    Desk,
    Theory,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstants {
    tau: Option<f64>,
    c1: Option<f64>,
    c2: Option<f64>,
    c3: Option<f64>,
    c4: Option<f64>,
    mode: Option<StepMode>,
    inverse_step: Option<f64>,
    kappa: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    sample_sizes: Option<Vec<usize>>,
    replicates: Option<usize>,
    mc_points: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    topology: serde_json::Value,
    constants: Option<RawConstants>,
    data: DataSpec,
    experiment: Option<RawExperiment>,
    checks: Option<CheckSettings>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub sample_sizes: Vec<usize>,
    pub replicates: usize,
    pub mc_points: usize,
    /// `None` when the file does not fix the seed.
    pub seed: Option<u64>,
}

impl Default for Experiment {
    fn default() -> Self {
        Experiment {
            sample_sizes: vec![50, 100, 200, 400],
            replicates: 10,
            mc_points: 100_000,
            seed: None,
        }
    }
}

/// A fully validated configuration with defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub topology: Topology,
    pub constants: Constants,
    pub data: DataSpec,
    pub experiment: Experiment,
    pub checks: CheckSettings,
}

impl Config {
    /// Resolves the master seed: explicit value, then the file, then
    /// [`SEED_ENV`], then [`FALLBACK_SEED`].
    pub fn seed(&self, explicit: Option<u64>) -> Result<u64, ConfigError> {
        if let Some(s) = explicit.or(self.experiment.seed) {
            return Ok(s);
        }
        env_seed().map(|s| s.unwrap_or(FALLBACK_SEED))
    }

    pub fn curve_config(&self, seed: u64) -> CurveConfig {
        CurveConfig {
            topology: self.topology,
            constants: self.constants,
            data: self.data,
            sample_sizes: self.experiment.sample_sizes.clone(),
            replicates: self.experiment.replicates,
            mc_points: self.experiment.mc_points,
            seed,
        }
    }
}

/// The seed in [`SEED_ENV`], if set.
pub fn env_seed() -> Result<Option<u64>, ConfigError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| range(SEED_ENV, format!("must be an unsigned integer, got `{v}`"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(range(SEED_ENV, e.to_string())),
    }
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(range(key, format!("must be positive and finite, got {v}")))
    }
}

fn check_settings(c: &CheckSettings) -> Result<(), ConfigError> {
    positive("checks.tolerance", c.tolerance)?;
    positive("checks.fd_step", c.fd_step)?;
    positive("checks.fd_rel_tol", c.fd_rel_tol)?;
    positive("checks.fd_abs_tol", c.fd_abs_tol)?;
    positive("checks.c_check", c.c_check)?;
    positive("checks.c5", c.c5)?;
    positive("checks.c7", c.c7)?;
    positive("checks.c11", c.c11)?;
    for (key, v) in [("checks.c12", c.c12), ("checks.c13", c.c13)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(range(key, format!("must be finite and >= 0, got {v}")));
        }
    }
    Ok(())
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let topology = parse_topology(raw.topology)?;
    let d = topology.dim();

    let desk = Constants::desk(d);
    let rc = raw.constants.unwrap_or(RawConstants {
        tau: None,
        c1: None,
        c2: None,
        c3: None,
        c4: None,
        mode: None,
        inverse_step: None,
        kappa: None,
    });
    let tau = rc.tau.unwrap_or(desk.tau);
    let tau_max = 1.0 / (d as f64 + 1.0);
    if !(tau > 0.0 && tau < tau_max) {
        return Err(range(
            "constants.tau",
            format!("must lie in (0, 1/(d+1)) = (0, {tau_max}) for d = {d}, got {tau}"),
        ));
    }
    let inverse_step = match rc.mode.unwrap_or(StepMode::Desk) {
        StepMode::Desk => Some(positive(
            "constants.inverse_step",
            rc.inverse_step.unwrap_or(desk.inverse_step.unwrap_or(1000.0)),
        )?),
        StepMode::Theory => {
            if rc.inverse_step.is_some() {
                return Err(range("constants.inverse_step", "must be omitted when mode is `theory`"));
            }
            None
        }
    };
    if let Some(k) = rc.kappa {
        positive("constants.kappa", k)?;
    }
    let constants = Constants {
        tau,
        c1: positive("constants.c1", rc.c1.unwrap_or(desk.c1))?,
        c2: positive("constants.c2", rc.c2.unwrap_or(desk.c2))?,
        c3: positive("constants.c3", rc.c3.unwrap_or(desk.c3))?,
        c4: positive("constants.c4", rc.c4.unwrap_or(desk.c4))?,
        inverse_step,
        kappa: rc.kappa,
    };

    let data = raw.data;
    if data.dim != d {
        return Err(range("data.dim", format!("must equal topology.dim = {d}, got {}", data.dim)));
    }
    data.validate().map_err(|e| range("data", e.to_string()))?;

    let defaults = Experiment::default();
    let experiment = match raw.experiment {
        None => defaults,
        Some(e) => Experiment {
            sample_sizes: e.sample_sizes.unwrap_or(defaults.sample_sizes),
            replicates: e.replicates.unwrap_or(defaults.replicates),
            mc_points: e.mc_points.unwrap_or(defaults.mc_points),
            seed: e.seed,
        },
    };
    if experiment.sample_sizes.is_empty() {
        return Err(range("experiment.sample_sizes", "must not be empty"));
    }
    if let Some(n) = experiment.sample_sizes.iter().find(|&&n| n < 2) {
        return Err(range("experiment.sample_sizes", format!("every n must be >= 2, got {n}")));
    }
    if experiment.replicates == 0 {
        return Err(range("experiment.replicates", "must be >= 1"));
    }
    if experiment.mc_points == 0 {
        return Err(range("experiment.mc_points", "must be >= 1"));
    }

    let checks = raw.checks.unwrap_or_default();
    check_settings(&checks)?;
    Ok(Config {
        topology,
        constants,
        data,
        experiment,
        checks,
    })
}

/// Topology errors carry the failing field, so the block is validated by
/// hand instead of through its serde conversion.
fn parse_topology(v: serde_json::Value) -> Result<Topology, ConfigError> {
    let obj = v
        .as_object()
        .ok_or_else(|| ConfigError::Parse("`topology` must be an object".into()))?;
    for key in obj.keys() {
        if !matches!(key.as_str(), "dim" | "depth" | "width" | "subnets") {
            return Err(ConfigError::Parse(format!("unknown field `topology.{key}`")));
        }
    }
    let field = |name: &str| -> Result<usize, ConfigError> {
        let key = format!("topology.{name}");
        let v = obj
            .get(name)
            .ok_or_else(|| ConfigError::Parse(format!("missing field `{key}`")))?;
        v.as_u64()
            .and_then(|u| usize::try_from(u).ok())
            .ok_or_else(|| range(&key, format!("must be a non-negative integer, got {v}")))
    };
    let (dim, depth, width, subnets) = (field("dim")?, field("depth")?, field("width")?, field("subnets")?);
    if dim == 0 {
        return Err(range("topology.dim", "must be >= 1"));
    }
    if depth < 2 {
        return Err(range("topology.depth", format!("must be >= 2, got {depth}")));
    }
    if width < 2 * dim {
        return Err(range("topology.width", format!("must be >= 2 * dim = {}, got {width}", 2 * dim)));
    }
    if subnets == 0 {
        return Err(range("topology.subnets", "must be >= 1"));
    }
    Topology::new(dim, depth, width, subnets).map_err(|e| range("topology", e.to_string()))
}

pub fn load_config(path: &Path) -> Result<Config, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "topology": {"dim": 1, "depth": 2, "width": 2, "subnets": 8},
        "data": {"dim": 1, "target": "clamped_sine", "design": {"kind": "uniform", "half_width": 3.0}, "noise_sd": 0.2}
    }"#;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.constants, Constants::desk(1));
        assert_eq!(c.experiment, Experiment::default());
        assert_eq!(c.checks, CheckSettings::default());
        assert_eq!(c.topology.subnets(), 8);
    }

    fn with(block: &str) -> String {
        MINIMAL.replacen("\"data\"", &format!("{block}, \"data\""), 1)
    }

    #[test]
    fn tau_above_limit_names_the_key() {
        let err = parse_config(&with(r#""constants": {"tau": 0.9}"#)).unwrap_err();
        assert!(matches!(&err, ConfigError::Range { key, .. } if key == "constants.tau"), "{err}");
    }

    #[test]
    fn duplicate_and_unknown_keys_are_rejected() {
        let dup = with(r#""constants": {"c1": 1.0, "c1": 2.0}"#);
        assert!(matches!(parse_config(&dup), Err(ConfigError::Parse(_))));
        let unknown = with(r#""constants": {"c9": 1.0}"#);
        assert!(matches!(parse_config(&unknown), Err(ConfigError::Parse(_))));
        let top = MINIMAL.replace("\"subnets\": 8", "\"subnets\": 8, \"extra\": 1");
        assert!(matches!(parse_config(&top), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn parse_errors_report_lines() {
        let broken = MINIMAL.replace("\"depth\": 2,", "\"depth\": 2");
        let err = parse_config(&broken).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn theory_mode_and_range_errors() {
        let c = parse_config(&with(r#""constants": {"mode": "theory"}"#)).unwrap();
        assert_eq!(c.constants.inverse_step, None);
        let err = parse_config(&with(r#""constants": {"mode": "theory", "inverse_step": 5.0}"#)).unwrap_err();
        assert!(err.to_string().contains("constants.inverse_step"));
        let err = parse_config(&MINIMAL.replace("\"width\": 2", "\"width\": 1")).unwrap_err();
        assert!(err.to_string().contains("topology.width"));
        let err = parse_config(&MINIMAL.replace("\"dim\": 1, \"target\"", "\"dim\": 2, \"target\"")).unwrap_err();
        assert!(err.to_string().contains("data.dim"));
        let err = parse_config(&with(r#""experiment": {"sample_sizes": [1]}"#)).unwrap_err();
        assert!(err.to_string().contains("experiment.sample_sizes"));
        let err = parse_config(&with(r#""checks": {"c_check": -1}"#)).unwrap_err();
        assert!(err.to_string().contains("checks.c_check"));
    }

    #[test]
    fn explicit_seed_wins() {
        let c = parse_config(&with(r#""experiment": {"seed": 11}"#)).unwrap();
        assert_eq!(c.seed(Some(5)).unwrap(), 5);
        assert_eq!(c.seed(None).unwrap(), 11);
    }
}
