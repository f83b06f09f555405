//! Flat `key = value` experiment configuration.
//!
//! Values come from built-in defaults, then an optional config file, then
//! command-line flags; a later source always wins for the same key.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::CliError;
use crate::fusion::{Filling, FusionParams, LevelTargets, Method};
use crate::propagate::{RampOptions, RampSearchOptions};

/// Every recognised key with its default value and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("L", "8", "chain length(s), comma separated"),
    ("filling", "half", "up-spin fraction: half, quarter or n/d"),
    (
        "n_up",
        "",
        "explicit up-spin count (gap and scan only; overrides filling)",
    ),
    ("method", "hybrid", "adiabatic, rodeo or hybrid"),
    ("depth", "8", "cycles per superiteration D"),
    (
        "m_min",
        "0",
        "first superiteration count reported by converge",
    ),
    ("m_max", "12", "largest superiteration count"),
    (
        "targets",
        "1e-2,1e-3,1e-4",
        "target infidelities for compare",
    ),
    ("target", "1e-3", "final target infidelity for fuse"),
    (
        "precondition",
        "1e-2",
        "hybrid ramp infidelity before purification",
    ),
    ("ta_start", "1", "first T_A probe, units of 1/J"),
    ("ta_max", "65536", "largest T_A probe, units of 1/J"),
    (
        "bisections",
        "3",
        "bisection refinements after the doubling bracket",
    ),
    ("steps_per_time", "2", "initial ramp steps per unit time"),
    (
        "step_change",
        "1e-4",
        "absolute infidelity change accepted under step halving",
    ),
    (
        "step_rel_change",
        "1e-2",
        "relative infidelity change accepted under step halving",
    ),
    ("tol", "1e-12", "Krylov propagation tolerance"),
    ("coupling", "1", "XX coupling J"),
    ("l_base", "2", "exactly prepared block length for fuse"),
    (
        "level_targets",
        "uniform",
        "fuse target policy: uniform or tightened",
    ),
    ("scan_min", "-2", "lowest scanned E_t"),
    ("scan_max", "2", "highest scanned E_t"),
    ("scan_points", "81", "number of scanned E_t values"),
    (
        "scan_input",
        "first",
        "scan input: first, ground, excited, product or a 0/1 string",
    ),
    (
        "scan_superiterations",
        "1",
        "superiterations per scan point",
    ),
    ("output", "-", "output CSV path, - for standard output"),
];

fn is_key(key: &str) -> bool {
    KEYS.iter().any(|(k, _, _)| *k == key)
}

/// Raw key/value layer before typing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig(BTreeMap<String, String>);

impl RawConfig {
    pub fn defaults() -> Self {
        RawConfig(
            KEYS.iter()
                .map(|(k, v, _)| (k.to_string(), v.to_string()))
                .collect(),
        )
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            if !is_key(key) {
                return Err(CliError::Config(format!(
                    "line {}: unknown key '{key}'",
                    lineno + 1
                )));
            }
            if map
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(CliError::Config(format!(
                    "line {}: duplicate key '{key}'",
                    lineno + 1
                )));
            }
        }
        Ok(RawConfig(map))
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !is_key(key) {
            return Err(CliError::Config(format!("unknown key '{key}'")));
        }
        self.0.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    /// Keys of `other` replace those of `self`.
    pub fn overlay(mut self, other: &RawConfig) -> Self {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
}

/// What `scan` feeds into the rodeo cycles.
#[derive(Debug, Clone, PartialEq)]
pub enum ScanInput {
    /// Lowest-ordinal basis configuration.
    First,
    Ground,
    Excited,
    Product,
    /// Site-0-first 0/1 string.
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sizes: Vec<usize>,
    pub filling: Filling,
    pub n_up: Option<usize>,
    pub method: Method,
    pub m_min: usize,
    pub targets: Vec<f64>,
    pub target: f64,
    pub base_sites: usize,
    pub level_targets: LevelTargets,
    pub scan_min: f64,
    pub scan_max: f64,
    pub scan_points: usize,
    pub scan_input: ScanInput,
    pub scan_superiterations: usize,
    pub output: Option<String>,
    pub params: FusionParams,
    raw: RawConfig,
}

fn field<T: std::str::FromStr>(raw: &RawConfig, key: &str) -> Result<T, CliError> {
    let text = raw.get(key).unwrap_or("");
    text.parse()
        .map_err(|_| CliError::Config(format!("invalid value '{text}' for key '{key}'")))
}

fn list<T: std::str::FromStr>(raw: &RawConfig, key: &str) -> Result<Vec<T>, CliError> {
    let text = raw.get(key).unwrap_or("");
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| CliError::Config(format!("invalid entry '{s}' for key '{key}'")))
        })
        .collect()
}

fn positive(key: &str, value: f64) -> Result<f64, CliError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(CliError::Config(format!(
            "{key} must be positive, got {value}"
        )))
    }
}

impl ExperimentConfig {
    /// Types and validates a layered raw configuration.
    pub fn resolve(raw: RawConfig) -> Result<Self, CliError> {
        let raw = RawConfig::defaults().overlay(&raw);
        let sizes: Vec<usize> = list(&raw, "L")?;
        if sizes.is_empty() {
            return Err(CliError::Config(
                "L must list at least one chain length".into(),
            ));
        }
        let filling = raw
            .get("filling")
            .unwrap_or("")
            .parse::<Filling>()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let n_up = match raw.get("n_up").unwrap_or("") {
            "" => None,
            _ => Some(field(&raw, "n_up")?),
        };
        let method = raw
            .get("method")
            .unwrap_or("")
            .parse::<Method>()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let level_targets = raw
            .get("level_targets")
            .unwrap_or("")
            .parse::<LevelTargets>()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let targets: Vec<f64> = list(&raw, "targets")?;
        for &t in &targets {
            if !(t > 0.0 && t < 1.0) {
                return Err(CliError::Config(format!(
                    "target infidelity {t} outside (0, 1)"
                )));
            }
        }
        let target: f64 = field(&raw, "target")?;
        if !(target > 0.0 && target < 1.0) {
            return Err(CliError::Config(format!("target {target} outside (0, 1)")));
        }
        let depth: usize = field(&raw, "depth")?;
        if depth == 0 {
            return Err(CliError::Config("depth must be >= 1".into()));
        }
        let m_min: usize = field(&raw, "m_min")?;
        let m_max: usize = field(&raw, "m_max")?;
        if m_min > m_max {
            return Err(CliError::Config(format!(
                "m_min {m_min} exceeds m_max {m_max}"
            )));
        }
        let coupling: f64 = field(&raw, "coupling")?;
        if coupling == 0.0 || !coupling.is_finite() {
            return Err(CliError::Config(
                "coupling must be finite and nonzero".into(),
            ));
        }
        let precondition = positive("precondition", field(&raw, "precondition")?)?;
        if precondition >= 1.0 {
            return Err(CliError::Config("precondition must be below 1".into()));
        }
        let scan_points: usize = field(&raw, "scan_points")?;
        if scan_points == 0 {
            return Err(CliError::Config("scan_points must be >= 1".into()));
        }
        let scan_min: f64 = field(&raw, "scan_min")?;
        let scan_max: f64 = field(&raw, "scan_max")?;
        if scan_points > 1 && !(scan_max > scan_min) {
            return Err(CliError::Config("scan_max must exceed scan_min".into()));
        }
        let scan_input = match raw.get("scan_input").unwrap_or("") {
            "first" => ScanInput::First,
            "ground" => ScanInput::Ground,
            "excited" => ScanInput::Excited,
            "product" => ScanInput::Product,
            s if !s.is_empty() && s.chars().all(|c| c == '0' || c == '1') => {
                ScanInput::Config(s.to_string())
            }
            s => return Err(CliError::Config(format!("invalid scan_input '{s}'"))),
        };
        let output = match raw.get("output").unwrap_or("-") {
            "-" | "" => None,
            path => Some(path.to_string()),
        };

        let params = FusionParams {
            coupling,
            depth,
            max_superiterations: m_max,
            precondition,
            ramp: RampOptions {
                steps_per_time: positive("steps_per_time", field(&raw, "steps_per_time")?)?,
                abs_change: positive("step_change", field(&raw, "step_change")?)?,
                rel_change: positive("step_rel_change", field(&raw, "step_rel_change")?)?,
                tol: positive("tol", field(&raw, "tol")?)?,
                ..RampOptions::default()
            },
            search: RampSearchOptions {
                start: positive("ta_start", field(&raw, "ta_start")?)?,
                cap: positive("ta_max", field(&raw, "ta_max")?)?,
                bisections: field(&raw, "bisections")?,
            },
        };

        Ok(ExperimentConfig {
            sizes,
            filling,
            n_up,
            method,
            m_min,
            targets,
            target,
            base_sites: field(&raw, "l_base")?,
            level_targets,
            scan_min,
            scan_max,
            scan_points,
            scan_input,
            scan_superiterations: field(&raw, "scan_superiterations")?,
            output,
            params,
            raw,
        })
    }

    pub fn m_max(&self) -> usize {
        self.params.max_superiterations
    }

    pub fn raw(&self) -> &RawConfig {
        &self.raw
    }

    /// `key=value` pairs of the fully resolved configuration, key order.
    pub fn provenance(&self) -> String {
        let mut out = String::new();
        for (i, (k, v)) in self.raw.0.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{k}={v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagate::DEFAULT_EXPMV_TOL;

    #[test]
    fn defaults_resolve() {
        let cfg = ExperimentConfig::resolve(RawConfig::default()).unwrap();
        assert_eq!(cfg.sizes, vec![8]);
        assert_eq!(cfg.filling, Filling::HALF);
        assert_eq!(cfg.method, Method::Hybrid);
        assert_eq!(cfg.params.depth, 8);
        assert_eq!(cfg.targets, vec![1e-2, 1e-3, 1e-4]);
        assert_eq!(cfg.params.ramp.tol, DEFAULT_EXPMV_TOL);
        assert_eq!(cfg.output, None);
    }

    #[test]
    fn file_syntax() {
        let raw =
            RawConfig::parse("# comment\nL = 4, 8\n\nfilling = quarter # trailing\n").unwrap();
        let cfg = ExperimentConfig::resolve(raw).unwrap();
        assert_eq!(cfg.sizes, vec![4, 8]);
        assert_eq!(cfg.filling, Filling::QUARTER);
        assert!(matches!(
            RawConfig::parse("bogus = 1"),
            Err(CliError::Config(_))
        ));
        assert!(matches!(RawConfig::parse("L 8"), Err(CliError::Config(_))));
        assert!(matches!(
            RawConfig::parse("L = 4\nL = 8"),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn empty_target_list_allowed() {
        let raw = RawConfig::parse("targets =").unwrap();
        assert!(ExperimentConfig::resolve(raw).unwrap().targets.is_empty());
    }

    #[test]
    fn invalid_values_rejected() {
        for (k, v) in [
            ("L", "x"),
            ("filling", "2/1"),
            ("method", "annealing"),
            ("depth", "0"),
            ("targets", "1e-3,2"),
            ("coupling", "0"),
            ("scan_input", "01x"),
            ("m_min", "20"),
        ] {
            let mut raw = RawConfig::default();
            raw.set(k, v).unwrap();
            assert!(ExperimentConfig::resolve(raw).is_err(), "{k} = {v}");
        }
    }
}
