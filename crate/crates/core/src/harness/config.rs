//! Run settings with the reference defaults, overridable from a plain
//! `key = value` file or from command-line flags using the same keys.

use std::path::Path;

use super::{ExperimentSpec, HarnessError, MethodChoice};
use crate::iterate::{Estimator, IterationConfig};
use crate::model::ModelConfiguration;

/// Iteration cap used by `estimate` when none is given.
pub const DEFAULT_MAX_ITER: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub t0: f64,
    pub k: u32,
    pub n: usize,
    pub delta: f64,
    pub x0: f64,
    pub alpha: f64,
    pub truth_x0: f64,
    pub truth_alpha: f64,
    pub method: String,
    pub lambda: f64,
    pub iterate: bool,
    pub threshold: f64,
    /// `None` keeps each table's own cap (10 or 100).
    pub max_iter: Option<usize>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            t0: 0.0,
            k: 1,
            n: 2,
            delta: 0.5,
            x0: 0.6,
            alpha: 0.9,
            truth_x0: 0.5,
            truth_alpha: 1.0,
            method: "first".into(),
            lambda: 1e-8,
            iterate: false,
            threshold: 1e-6,
            max_iter: None,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value
        .trim()
        .parse()
        .map_err(|_| HarnessError::config(key, format!("cannot parse `{}`", value.trim())))
}

fn flag(key: &str, value: &str) -> Result<bool, HarnessError> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(HarnessError::config(
            key,
            format!("expected a boolean, got `{other}`"),
        )),
    }
}

impl Settings {
    /// Sets one field by its flag name (`truth-x0` and `truth_x0` both work).
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let norm = key.trim().trim_start_matches("--").replace('_', "-");
        match norm.as_str() {
            "t0" => self.t0 = num(&norm, value)?,
            "k" => self.k = num(&norm, value)?,
            "n" => self.n = num(&norm, value)?,
            "delta" => self.delta = num(&norm, value)?,
            "x0" => self.x0 = num(&norm, value)?,
            "alpha" => self.alpha = num(&norm, value)?,
            "truth-x0" => self.truth_x0 = num(&norm, value)?,
            "truth-alpha" => self.truth_alpha = num(&norm, value)?,
            "method" => self.method = value.trim().to_string(),
            "lambda" => self.lambda = num(&norm, value)?,
            "iterate" => self.iterate = flag(&norm, value)?,
            "threshold" => self.threshold = num(&norm, value)?,
            "max-iter" => self.max_iter = Some(num(&norm, value)?),
            _ => return Err(HarnessError::config(norm, "unknown setting")),
        }
        Ok(())
    }

    /// Applies every `key = value` line. Blank lines and `#` comments are
    /// ignored.
    pub fn apply_str(&mut self, text: &str) -> Result<(), HarnessError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::config(
                    format!("line {}", lineno + 1),
                    format!("expected `key = value`, got `{line}`"),
                )
            })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.apply_str(&text)
    }

    pub fn truth(&self) -> Result<ModelConfiguration, HarnessError> {
        ModelConfiguration::new(self.truth_x0, self.truth_alpha).map_err(|e| {
            let field = if self.truth_x0 > 0.0 && self.truth_x0.is_finite() {
                "truth-alpha"
            } else {
                "truth-x0"
            };
            HarnessError::config(field, e)
        })
    }

    pub fn model(&self) -> Result<ModelConfiguration, HarnessError> {
        ModelConfiguration::new(self.x0, self.alpha).map_err(|e| {
            let field = if self.x0 > 0.0 && self.x0.is_finite() {
                "alpha"
            } else {
                "x0"
            };
            HarnessError::config(field, e)
        })
    }

    pub fn method_choice(&self) -> Result<MethodChoice, HarnessError> {
        MethodChoice::parse(&self.method, self.lambda)
    }

    /// Iteration settings for an iterated run with the given default cap.
    pub fn iteration(&self, estimator: Estimator, default_cap: usize) -> IterationConfig {
        IterationConfig {
            threshold: self.threshold,
            max_iterations: self.max_iter.unwrap_or(default_cap),
            estimator,
        }
    }

    /// The single-cell experiment behind the `estimate` command.
    pub fn estimate_spec(&self) -> Result<ExperimentSpec, HarnessError> {
        let method = self.method_choice()?;
        let iteration = if self.iterate {
            let est = match method {
                MethodChoice::FirstOrder => Estimator::FirstOrder,
                MethodChoice::SecondOrder => Estimator::SecondOrder,
                other => {
                    return Err(HarnessError::config(
                        "method",
                        format!("{other} cannot be iterated (use first or second)"),
                    ))
                }
            };
            Some(self.iteration(est, DEFAULT_MAX_ITER))
        } else {
            None
        };
        Ok(ExperimentSpec {
            id: "estimate".into(),
            truth: self.truth()?,
            models: vec![self.model()?],
            t0s: vec![self.t0],
            ks: vec![self.k],
            ns: vec![self.n],
            delta: self.delta,
            method,
            iteration,
        })
    }
}
