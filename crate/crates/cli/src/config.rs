//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! rejected so that a misspelt physics parameter cannot silently fall back
//! to its default.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// Every accepted key with a one-line description.
pub const SCHEMA: &[(&str, &str)] = &[
    ("rabi", "Rabi frequency Omega in units of gamma"),
    ("detuning", "laser detuning delta in units of gamma"),
    ("rabi_min", "sweep: smallest Rabi frequency"),
    ("rabi_max", "sweep: largest Rabi frequency"),
    ("rabi_points", "sweep: number of log-spaced Rabi frequencies"),
    ("detunings", "sweep: comma-separated detunings"),
    ("nu_min", "spectrum: lower end of the frequency grid"),
    ("nu_max", "spectrum: upper end of the frequency grid"),
    ("points", "spectrum: number of grid points"),
    ("normalize", "spectrum: divide by the inelastic ladder intensity"),
    ("sum_rule_tolerance", "spectrum: relative tolerance of the sum rules"),
    ("saturations", "compare-oracles: comma-separated saturation parameters"),
    ("units", "intensity units: unit, configuration or averaged"),
    ("k0_r12", "configuration units: dimensionless separation"),
    ("orientation_polar", "configuration units: polar angle of the separation"),
    ("mean_separation", "averaging: k0 l"),
    ("width", "averaging: width of the distance window in units of 1/k0"),
    ("samples", "averaging: Monte Carlo sample count"),
    ("monte_carlo", "averaging: also run the Monte Carlo estimate"),
    ("theta_max", "cone: largest scattering angle"),
    ("theta_points", "cone: number of angles"),
    ("seed", "random seed"),
    ("format", "csv or json"),
    ("output", "output path; standard output when absent"),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Raw key-value pairs, ordered by key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut out = Self::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(format!("line {}: expected key = value, got '{line}'", no + 1));
            };
            out.set(k.trim(), v.trim())
                .map_err(|e| ConfigError(format!("line {}: {e}", no + 1)))?;
        }
        Ok(out)
    }

    /// Reads the `# key = value` header of a previous output, skipping the
    /// derived `result.` and `meta.` entries.
    pub fn from_header(text: &str) -> Result<Self, ConfigError> {
        let mut out = Self::default();
        for line in text.lines() {
            let Some(rest) = line.strip_prefix("# ") else {
                if line.trim_start().starts_with('{') {
                    return Self::from_json_header(text);
                }
                break;
            };
            let Some((k, v)) = rest.split_once(" = ") else {
                continue;
            };
            if k.starts_with("result.") || k.starts_with("meta.") {
                continue;
            }
            out.set(k, v)?;
        }
        Ok(out)
    }

    fn from_json_header(text: &str) -> Result<Self, ConfigError> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ConfigError(format!("invalid JSON output: {e}")))?;
        let mut out = Self::default();
        if let Some(inputs) = v.get("inputs").and_then(|i| i.as_object()) {
            for (k, val) in inputs {
                let s = match val {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                out.set(k, &s)?;
            }
        }
        Ok(out)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !SCHEMA.iter().any(|(k, _)| *k == key) {
            return err(format!("unknown key '{key}'"));
        }
        if value.is_empty() {
            return err(format!("empty value for '{key}'"));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Overlays `other` on top of `self`.
    pub fn merge(&mut self, other: &RawConfig) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| ConfigError(format!("invalid value '{v}' for '{key}': {e}"))),
        }
    }

    pub fn number(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let v: Option<f64> = self.parsed(key)?;
        if let Some(x) = v {
            if !x.is_finite() {
                return err(format!("'{key}' must be finite"));
            }
        }
        Ok(v)
    }

    pub fn flag(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some("true" | "yes" | "1") => Ok(Some(true)),
            Some("false" | "no" | "0") => Ok(Some(false)),
            Some(v) => err(format!("invalid boolean '{v}' for '{key}'")),
        }
    }

    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|x| {
                    let x = x.trim();
                    x.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| ConfigError(format!("invalid number '{x}' in '{key}'")))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }

    #[cfg(test)]
    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err("expected csv or json".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Units {
    /// Per unit `|g|^2 |Delta_{+1,+1}|^2`.
    Unit,
    /// One configuration at separation `k0_r12` and polar angle.
    Configuration { k0_r12: f64, polar: f64 },
    /// Disorder-averaged, `(2/15) |g_bar|^2`.
    Averaged,
}

/// Disorder parameters with defaults filled in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disorder {
    pub mean_separation: f64,
    pub width: f64,
    pub samples: usize,
    pub monte_carlo: bool,
}

impl Disorder {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let d = Self {
            mean_separation: raw.number("mean_separation")?.unwrap_or(100.0),
            width: raw.number("width")?.unwrap_or(2.0 * std::f64::consts::PI),
            samples: raw.parsed("samples")?.unwrap_or(100_000),
            monte_carlo: raw.flag("monte_carlo")?.unwrap_or(false),
        };
        if d.monte_carlo && d.samples == 0 {
            return err("'samples' must be positive");
        }
        Ok(d)
    }
}

pub fn units(raw: &RawConfig) -> Result<Units, ConfigError> {
    match raw.get("units").unwrap_or("unit") {
        "unit" => Ok(Units::Unit),
        "averaged" => Ok(Units::Averaged),
        "configuration" => {
            let Some(k0_r12) = raw.number("k0_r12")? else {
                return err("units = configuration needs 'k0_r12'");
            };
            if k0_r12 <= 0.0 {
                return err("'k0_r12' must be positive");
            }
            let polar = raw.number("orientation_polar")?.unwrap_or(std::f64::consts::FRAC_PI_2);
            Ok(Units::Configuration { k0_r12, polar })
        }
        other => err(format!("unknown units '{other}'")),
    }
}
