//! Run configuration in a flat `key = value` text form.

use crate::fem::MassScheme;
use serde::Serialize;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`")]
    BadValue { key: String, value: String },
    #[error("`{0}` must be positive")]
    NotPositive(&'static str),
    #[error("lambda band [{0}, {1}] is empty")]
    EmptyBand(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub eigen_count: usize,
    pub solver_tol: f64,
    pub eigen_tol: f64,
    pub weld_tol: f64,
    /// 0 selects the resolution-dependent default.
    pub max_iterations: usize,
    pub slide_boundary: bool,
    pub mass: MassScheme,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            m: 2,
            k: 2,
            n: 16,
            eigen_count: 12,
            solver_tol: 1e-6,
            eigen_tol: 1e-8,
            weld_tol: 1e-7,
            max_iterations: 0,
            slide_boundary: false,
            mass: MassScheme::Lumped,
            lambda_min: 1.8,
            lambda_max: 2.2,
            seed: 20_240_601,
            out: PathBuf::from("out"),
        }
    }
}

const KEYS: [&str; 14] = [
    "m",
    "k",
    "n",
    "eigen_count",
    "solver_tol",
    "eigen_tol",
    "weld_tol",
    "max_iterations",
    "slide_boundary",
    "mass",
    "lambda_min",
    "lambda_max",
    "seed",
    "out",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

impl RunConfig {
    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "m" => self.m = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "n" => self.n = parse(key, value)?,
            "eigen_count" => self.eigen_count = parse(key, value)?,
            "solver_tol" => self.solver_tol = parse(key, value)?,
            "eigen_tol" => self.eigen_tol = parse(key, value)?,
            "weld_tol" => self.weld_tol = parse(key, value)?,
            "max_iterations" => self.max_iterations = parse(key, value)?,
            "slide_boundary" => self.slide_boundary = parse(key, value)?,
            "mass" => {
                self.mass = match value {
                    "lumped" => MassScheme::Lumped,
                    "consistent" => MassScheme::Consistent,
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.into(),
                            value: value.into(),
                        })
                    }
                }
            }
            "lambda_min" => self.lambda_min = parse(key, value)?,
            "lambda_max" => self.lambda_max = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "m" => self.m.to_string(),
            "k" => self.k.to_string(),
            "n" => self.n.to_string(),
            "eigen_count" => self.eigen_count.to_string(),
            "solver_tol" => self.solver_tol.to_string(),
            "eigen_tol" => self.eigen_tol.to_string(),
            "weld_tol" => self.weld_tol.to_string(),
            "max_iterations" => self.max_iterations.to_string(),
            "slide_boundary" => self.slide_boundary.to_string(),
            "mass" => self.mass.name().to_string(),
            "lambda_min" => self.lambda_min.to_string(),
            "lambda_max" => self.lambda_max.to_string(),
            "seed" => self.seed.to_string(),
            "out" => self.out.display().to_string(),
            _ => return None,
        })
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and `#`
    /// comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("m", self.m as f64),
            ("k", self.k as f64),
            ("n", self.n as f64),
            ("eigen_count", self.eigen_count as f64),
            ("solver_tol", self.solver_tol),
            ("eigen_tol", self.eigen_tol),
            ("weld_tol", self.weld_tol),
        ];
        for (name, v) in positive {
            if v.is_nan() || v <= 0.0 {
                return Err(ConfigError::NotPositive(name));
            }
        }
        if self.lambda_min.is_nan() || self.lambda_max.is_nan() || self.lambda_min > self.lambda_max
        {
            return Err(ConfigError::EmptyBand(self.lambda_min, self.lambda_max));
        }
        Ok(())
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for key in KEYS {
            writeln!(f, "{key} = {}", self.get(key).unwrap_or_default())?;
        }
        Ok(())
    }
}

impl FromStr for RunConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.to_string().parse::<RunConfig>().unwrap(), cfg);
    }

    #[test]
    fn comments_and_overrides() {
        let cfg: RunConfig = "# run\nm = 1\n\nk=1\nmass = consistent\n".parse().unwrap();
        assert_eq!((cfg.m, cfg.k, cfg.n), (1, 1, 16));
        assert_eq!(cfg.mass, MassScheme::Consistent);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            "m 2".parse::<RunConfig>(),
            Err(ConfigError::Syntax { line: 1 })
        );
        assert_eq!(
            "q = 2".parse::<RunConfig>(),
            Err(ConfigError::UnknownKey("q".into()))
        );
        assert!(matches!(
            "n = -3".parse::<RunConfig>(),
            Err(ConfigError::BadValue { .. })
        ));
        let cfg: RunConfig = "eigen_tol = 0".parse().unwrap();
        assert_eq!(cfg.validate(), Err(ConfigError::NotPositive("eigen_tol")));
        let cfg: RunConfig = "lambda_min = 3".parse().unwrap();
        assert!(matches!(cfg.validate(), Err(ConfigError::EmptyBand(..))));
    }

    proptest! {
        #[test]
        fn round_trip_is_lossless(
            m in 1usize..9, k in 1usize..9, n in 1usize..200,
            tol in 1e-14f64..1.0, weld in 1e-12f64..1e-3, lo in 0.0f64..3.0,
            seed in any::<u64>(), slide in any::<bool>(),
        ) {
            let cfg = RunConfig {
                m, k, n, solver_tol: tol, weld_tol: weld, lambda_min: lo, lambda_max: lo + 0.4,
                seed, slide_boundary: slide, out: PathBuf::from(format!("runs/{m}_{k}")),
                ..RunConfig::default()
            };
            prop_assert_eq!(cfg.to_string().parse::<RunConfig>().unwrap(), cfg);
        }
    }
}
