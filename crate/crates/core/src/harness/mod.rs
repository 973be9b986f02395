//! Experiment runner: schedule grids, the reference tables, figure series,
//! and flat-file output.
//!
//! Every run is deterministic. Grid cells are evaluated in sorted-key order
//! `(N, t₀, k, x₀, α)`, so identical specs produce byte-identical CSV.

mod config;
mod csv_io;
mod tables;

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::estimation::{
    self, EstimateReport, EstimationError, ObservationOperator, ObservationSchedule,
};
use crate::iterate::{self, Estimator, IterationConfig, IterationError, IterationStatus};
use crate::model::ModelConfiguration;

pub use config::Settings;
pub use csv_io::{parse_csv, read_csv, to_csv_string, write_csv};
pub use tables::{
    emit_figure_data, observation_table, paper_experiment, paper_table, schedule_table, Figure,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(String),
}

impl HarnessError {
    pub fn config(field: impl Into<String>, message: impl fmt::Display) -> Self {
        HarnessError::Config {
            field: field.into(),
            message: message.to_string(),
        }
    }

    /// Process exit code: 1 for configuration errors, 2 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } => 1,
            HarnessError::Io { .. } | HarnessError::Csv(_) => 2,
        }
    }
}

/// One table cell.
#[derive(Debug, Clone)]
pub enum Value {
    Num(f64),
    Text(String),
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Num(v) => Some(*v),
            Value::Text(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            Value::Num(_) => None,
        }
    }
}

impl PartialEq for Value {
    // NaN cells compare equal so artifacts can be compared after a round trip.
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Num(a), Value::Num(b)) => {
                a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
            }
            (Value::Text(a), Value::Text(b)) => a == b,
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(v) => write!(f, "{v}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Num(v as f64)
    }
}

impl From<u32> for Value {
    fn from(v: u32) -> Self {
        Value::Num(v as f64)
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

/// A named table: header plus rows of equal width.
#[derive(Debug, Clone, PartialEq)]
pub struct TableArtifact {
    pub id: String,
    headers: Vec<String>,
    rows: Vec<Vec<Value>>,
}

impl TableArtifact {
    pub fn new(id: impl Into<String>, headers: Vec<String>) -> Self {
        Self {
            id: id.into(),
            headers,
            rows: Vec::new(),
        }
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn push(&mut self, row: Vec<Value>) -> Result<(), HarnessError> {
        if row.len() != self.headers.len() {
            return Err(HarnessError::Csv(format!(
                "row has {} cells, table {} has {} columns",
                row.len(),
                self.id,
                self.headers.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Cell at `row`, column `name`.
    pub fn cell(&self, row: usize, name: &str) -> Option<&Value> {
        self.column_index(name)
            .and_then(|c| self.rows.get(row)?.get(c))
    }

    pub fn num(&self, row: usize, name: &str) -> Option<f64> {
        self.cell(row, name)?.as_f64()
    }
}

/// β to four decimals, as printed in the reference tables.
pub fn display_beta(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.4}")
    }
}

/// Two significant figures in `2.8e+2` style.
pub fn display_kappa(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else {
            "inf".into()
        };
    }
    let s = format!("{v:.1e}");
    match s.split_once('e') {
        Some((mantissa, exp)) => {
            let exp: i32 = exp.parse().unwrap_or(0);
            format!("{mantissa}e{exp:+}")
        }
        None => s,
    }
}

/// Estimator selection for an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodChoice {
    FirstOrder,
    SecondOrder,
    Tikhonov { lambda: f64 },
    PseudoInverse,
}

impl MethodChoice {
    pub fn parse(name: &str, lambda: f64) -> Result<Self, HarnessError> {
        match name.trim().to_ascii_lowercase().as_str() {
            "first" | "first-order" | "first_order" => Ok(MethodChoice::FirstOrder),
            "second" | "second-order" | "second_order" => Ok(MethodChoice::SecondOrder),
            "tikhonov" => {
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return Err(HarnessError::config(
                        "lambda",
                        format!("must be positive, got {lambda}"),
                    ));
                }
                Ok(MethodChoice::Tikhonov { lambda })
            }
            "pinv" | "pseudo-inverse" | "pseudo_inverse" => Ok(MethodChoice::PseudoInverse),
            other => Err(HarnessError::config(
                "method",
                format!("unknown method `{other}` (expected first, second, tikhonov, pinv)"),
            )),
        }
    }

    fn estimator(&self) -> Option<Estimator> {
        match self {
            MethodChoice::FirstOrder => Some(Estimator::FirstOrder),
            MethodChoice::SecondOrder => Some(Estimator::SecondOrder),
            _ => None,
        }
    }
}

impl fmt::Display for MethodChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodChoice::FirstOrder => f.write_str("first-order"),
            MethodChoice::SecondOrder => f.write_str("second-order"),
            MethodChoice::Tikhonov { lambda } => write!(f, "tikhonov({lambda:e})"),
            MethodChoice::PseudoInverse => f.write_str("pseudo-inverse"),
        }
    }
}

/// A grid of twin experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub id: String,
    pub truth: ModelConfiguration,
    pub models: Vec<ModelConfiguration>,
    pub t0s: Vec<f64>,
    pub ks: Vec<u32>,
    pub ns: Vec<usize>,
    pub delta: f64,
    pub method: MethodChoice,
    pub iteration: Option<IterationConfig>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let nonempty = |name: &str, len: usize| {
            if len == 0 {
                Err(HarnessError::config(name, "grid must not be empty"))
            } else {
                Ok(())
            }
        };
        nonempty("models", self.models.len())?;
        nonempty("t0", self.t0s.len())?;
        nonempty("k", self.ks.len())?;
        nonempty("n", self.ns.len())?;
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(HarnessError::config(
                "delta",
                format!("must be positive, got {}", self.delta),
            ));
        }
        for &t0 in &self.t0s {
            if !(t0 >= 0.0 && t0.is_finite()) {
                return Err(HarnessError::config(
                    "t0",
                    format!("must be nonnegative, got {t0}"),
                ));
            }
        }
        if self.ks.contains(&0) {
            return Err(HarnessError::config("k", "must be at least 1"));
        }
        if let Some(&n) = self.ns.iter().find(|&&n| n < 2) {
            return Err(HarnessError::config(
                "n",
                format!("must be at least 2, got {n}"),
            ));
        }
        if let MethodChoice::Tikhonov { lambda } = self.method {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(HarnessError::config(
                    "lambda",
                    format!("must be positive, got {lambda}"),
                ));
            }
        }
        if let Some(it) = &self.iteration {
            it.validate().map_err(|e| {
                let field = match e {
                    iterate::IterationConfigError::Threshold(_) => "threshold",
                    iterate::IterationConfigError::MaxIterations => "max-iter",
                };
                HarnessError::config(field, e)
            })?;
            if self.method.estimator().is_none() {
                return Err(HarnessError::config(
                    "method",
                    format!("{} cannot be iterated (use first or second)", self.method),
                ));
            }
        }
        Ok(())
    }

    fn sorted_cells(&self) -> Vec<(usize, f64, u32, ModelConfiguration)> {
        let mut ns = self.ns.clone();
        ns.sort_unstable();
        ns.dedup();
        let mut t0s = self.t0s.clone();
        t0s.sort_by(f64::total_cmp);
        t0s.dedup();
        let mut ks = self.ks.clone();
        ks.sort_unstable();
        ks.dedup();
        let mut models = self.models.clone();
        models.sort_by(|a, b| {
            a.x0()
                .total_cmp(&b.x0())
                .then(a.alpha().total_cmp(&b.alpha()))
        });
        models.dedup();

        let mut cells = Vec::new();
        for &n in &ns {
            for &t0 in &t0s {
                for &k in &ks {
                    for m in &models {
                        cells.push((n, t0, k, *m));
                    }
                }
            }
        }
        cells
    }
}

const KEY_COLUMNS: [&str; 5] = ["n", "t0", "k", "x0", "alpha"];

fn headers(extra: &[&str]) -> Vec<String> {
    KEY_COLUMNS
        .iter()
        .chain(extra)
        .map(|s| s.to_string())
        .collect()
}

/// Column layout of single-shot experiment tables.
pub const ESTIMATE_COLUMNS: [&str; 8] = [
    "d_x0",
    "d_alpha",
    "kappa",
    "method",
    "status",
    "d_x0_display",
    "d_alpha_display",
    "kappa_display",
];

/// Column layout of iterated experiment tables.
///
/// `d_x0`/`d_alpha` hold the cumulative correction of a converged run and
/// NaN otherwise; `iterations` is the step count of a converged run and the
/// cap otherwise; `steps` is always the number of estimates actually taken.
pub const ITERATION_COLUMNS: [&str; 11] = [
    "d_x0",
    "d_alpha",
    "kappa",
    "iterations",
    "steps",
    "method",
    "status",
    "d_x0_display",
    "d_alpha_display",
    "kappa_display",
    "max_iterations",
];

fn single_shot(
    method: MethodChoice,
    model: &ModelConfiguration,
    obs: &estimation::ObservationSet,
    h: &ObservationOperator,
) -> Result<EstimateReport, EstimationError> {
    match method {
        MethodChoice::FirstOrder => estimation::first_order_estimate(model, obs, h),
        MethodChoice::SecondOrder => estimation::second_order_estimate(model, obs, h),
        MethodChoice::Tikhonov { lambda } => estimation::tikhonov_estimate(model, obs, h, lambda),
        MethodChoice::PseudoInverse => estimation::pseudo_inverse_estimate(model, obs, h),
    }
}

fn estimation_error(e: EstimationError) -> HarnessError {
    match e {
        EstimationError::InvalidSchedule(m) => HarnessError::config("schedule", m),
        EstimationError::NonIdentityOperator => HarnessError::config("method", e),
        other => HarnessError::config("experiment", other),
    }
}

/// Runs every cell of the grid and collects one row per cell.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<TableArtifact, HarnessError> {
    spec.validate()?;
    let h = ObservationOperator::identity();
    let mut table = TableArtifact::new(
        spec.id.clone(),
        headers(if spec.iteration.is_some() {
            &ITERATION_COLUMNS
        } else {
            &ESTIMATE_COLUMNS
        }),
    );

    for (n, t0, k, model) in spec.sorted_cells() {
        let schedule = ObservationSchedule::new(t0, k, spec.delta, n).map_err(estimation_error)?;
        let obs = estimation::generate_observations(&spec.truth, &schedule.times())
            .map_err(estimation_error)?;
        let mut row: Vec<Value> = vec![
            n.into(),
            t0.into(),
            k.into(),
            model.x0().into(),
            model.alpha().into(),
        ];

        match &spec.iteration {
            None => {
                let r = single_shot(spec.method, &model, &obs, &h).map_err(estimation_error)?;
                row.extend([
                    r.beta.d_x0.into(),
                    r.beta.d_alpha.into(),
                    r.kappa.into(),
                    spec.method.to_string().into(),
                    r.status.to_string().into(),
                    display_beta(r.beta.d_x0).into(),
                    display_beta(r.beta.d_alpha).into(),
                    display_kappa(r.kappa).into(),
                ]);
            }
            Some(cfg) => {
                let mut cfg = *cfg;
                cfg.estimator = spec.method.estimator().expect("validated");
                let trace =
                    iterate::run_iteration(&model, &obs, &h, &cfg).map_err(|e| match e {
                        IterationError::Config(c) => HarnessError::config("iteration", c),
                        IterationError::Estimation(e) => estimation_error(e),
                    })?;
                let converged = trace.status == IterationStatus::Converged;
                let (dx, da) = if converged {
                    (trace.cumulative.d_x0, trace.cumulative.d_alpha)
                } else {
                    (f64::NAN, f64::NAN)
                };
                let kappa = if converged {
                    trace.final_kappa
                } else {
                    trace.steps.last().map(|s| s.kappa).unwrap_or(f64::NAN)
                };
                let reported = if converged {
                    trace.iterations
                } else {
                    cfg.max_iterations
                };
                row.extend([
                    dx.into(),
                    da.into(),
                    kappa.into(),
                    reported.into(),
                    trace.iterations.into(),
                    spec.method.to_string().into(),
                    trace.status.to_string().into(),
                    display_beta(dx).into(),
                    display_beta(da).into(),
                    display_kappa(kappa).into(),
                    cfg.max_iterations.into(),
                ]);
            }
        }
        table.push(row)?;
    }
    Ok(table)
}
