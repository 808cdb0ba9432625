//! `key = value` experiment configuration files.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    At { line: usize, message: String },
    #[error("{0}")]
    Missing(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    RodTwist,
    Knot,
    Moebius,
    Bilayer,
    HarmonicMap,
    Fvk,
}

impl Experiment {
    pub const ALL: [Experiment; 6] =
        [Experiment::RodTwist, Experiment::Knot, Experiment::Moebius, Experiment::Bilayer, Experiment::HarmonicMap, Experiment::Fvk];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::RodTwist => "rod_twist",
            Experiment::Knot => "knot",
            Experiment::Moebius => "moebius",
            Experiment::Bilayer => "bilayer",
            Experiment::HarmonicMap => "harmonic_map",
            Experiment::Fvk => "fvk",
        }
    }
}

#[derive(Debug)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed configuration. Every key must be read by the experiment it
/// configures; [`Config::finish`] rejects the rest.
#[derive(Debug)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
    used: RefCell<BTreeSet<String>>,
    pub experiment: Experiment,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::At { line, message: format!("expected 'key = value', found '{content}'") })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::At { line, message: "empty key or value".into() });
            }
            if let Some(prev) = entries.insert(key.to_string(), Entry { value: value.to_string(), line }) {
                return Err(ConfigError::At { line, message: format!("duplicate key '{key}' (first set on line {})", prev.line) });
            }
        }
        let exp = entries.get("experiment").ok_or_else(|| ConfigError::Missing("missing required key 'experiment'".into()))?;
        let experiment = Experiment::ALL.into_iter().find(|e| e.name() == exp.value).ok_or_else(|| ConfigError::At {
            line: exp.line,
            message: format!(
                "unknown experiment '{}' (expected one of {})",
                exp.value,
                Experiment::ALL.map(|e| e.name()).join(", ")
            ),
        })?;
        let cfg = Self { entries, used: RefCell::new(BTreeSet::new()), experiment };
        cfg.used.borrow_mut().insert("experiment".into());
        Ok(cfg)
    }

    /// Parsed value of `key`, if present.
    pub fn get<T>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.used.borrow_mut().insert(key.to_string());
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|err| ConfigError::At { line: e.line, message: format!("invalid value '{}' for '{key}': {err}", e.value) }),
        }
    }

    pub fn or<T>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Positive finite number.
    pub fn positive(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v: f64 = self.or(key, default)?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(self.invalid(key, format!("'{key}' must be positive, got {v}")));
        }
        Ok(v)
    }

    /// Error attributed to the line of `key` (or unlocated if defaulted).
    pub fn invalid(&self, key: &str, message: String) -> ConfigError {
        match self.entries.get(key) {
            Some(e) => ConfigError::At { line: e.line, message },
            None => ConfigError::Missing(message),
        }
    }

    /// Rejects keys no experiment parameter consumed.
    pub fn finish(&self) -> Result<(), ConfigError> {
        let used = self.used.borrow();
        let mut unknown: Vec<(&String, &Entry)> = self.entries.iter().filter(|(k, _)| !used.contains(*k)).collect();
        unknown.sort_by_key(|(_, e)| e.line);
        match unknown.first() {
            None => Ok(()),
            Some((k, e)) => Err(ConfigError::At {
                line: e.line,
                message: format!("unknown key '{k}' for experiment {}", self.experiment.name()),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_with_comments() {
        let c = Config::parse("# header\nexperiment = moebius  # strip\ntau = 0.5\n").unwrap();
        assert_eq!(c.experiment, Experiment::Moebius);
        assert_eq!(c.or("tau", 1.0).unwrap(), 0.5);
        assert_eq!(c.or("eps_stop", 2.0).unwrap(), 2.0);
        c.finish().unwrap();
    }

    #[test]
    fn unknown_key_reports_line() {
        let c = Config::parse("experiment = knot\n\ncolour = red\n").unwrap();
        let err = c.finish().unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("colour"), "{err}");
    }

    #[test]
    fn missing_experiment() {
        let err = Config::parse("tau = 1\n").unwrap_err().to_string();
        assert!(err.contains("experiment"));
    }

    #[test]
    fn bad_value_and_duplicates() {
        let c = Config::parse("experiment = fvk\ntau = fast\n").unwrap();
        assert!(c.or("tau", 1.0).unwrap_err().to_string().contains("line 2"));
        assert!(Config::parse("experiment = fvk\ntau = 1\ntau = 2\n").unwrap_err().to_string().contains("line 3"));
        assert!(Config::parse("experiment = plates\n").is_err());
    }
}
