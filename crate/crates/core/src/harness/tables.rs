//! Builders for the eight reference tables and the two figure series.

use super::{ExperimentSpec, HarnessError, MethodChoice, Settings, TableArtifact, Value};
use crate::estimation::{generate_observations, ObservationSchedule};
use crate::iterate::Estimator;
use crate::model::{self, ModelConfiguration};

pub const T0S: [f64; 3] = [0.0, 4.0, 8.0];
pub const KS: [u32; 4] = [1, 4, 8, 12];
pub const NS: [usize; 3] = [2, 4, 6];
/// Rows per `t₀` block of Tables 1 and 2.
pub const BLOCK_ROWS: usize = 6;

const LARGE_X0: [f64; 4] = [0.3, 0.4, 0.6, 0.7];
const LARGE_ALPHA: [f64; 4] = [0.8, 0.9, 1.1, 1.2];
const SMALL_CAP: usize = 10;
const LARGE_CAP: usize = 100;

fn k_headers(suffix: &str) -> impl Iterator<Item = String> + '_ {
    KS.iter().map(move |k| format!("k_{k}{suffix}"))
}

fn block_schedules(t0: f64, delta: f64) -> Result<Vec<Vec<f64>>, HarnessError> {
    KS.iter()
        .map(|&k| {
            ObservationSchedule::new(t0, k, delta, BLOCK_ROWS)
                .map(|s| s.times())
                .map_err(|e| HarnessError::config("delta", e))
        })
        .collect()
}

/// Observation times: one row per `(t₀, i)`, one column per spacing multiple.
pub fn schedule_table(delta: f64) -> Result<TableArtifact, HarnessError> {
    let headers = ["t0", "i"]
        .map(String::from)
        .into_iter()
        .chain(k_headers(""))
        .collect();
    let mut table = TableArtifact::new("table-1", headers);
    for t0 in T0S {
        let cols = block_schedules(t0, delta)?;
        for i in 0..BLOCK_ROWS {
            let mut row: Vec<Value> = vec![t0.into(), i.into()];
            row.extend(cols.iter().map(|c| Value::Num(c[i])));
            table.push(row)?;
        }
    }
    Ok(table)
}

/// Truth trajectory sampled on the Table-1 schedules, with 14-decimal
/// display columns.
pub fn observation_table(
    truth: &ModelConfiguration,
    delta: f64,
) -> Result<TableArtifact, HarnessError> {
    let headers = ["t0", "i"]
        .map(String::from)
        .into_iter()
        .chain(k_headers(""))
        .chain(k_headers("_display"))
        .collect();
    let mut table = TableArtifact::new("table-2", headers);
    for t0 in T0S {
        let cols = block_schedules(t0, delta)?
            .into_iter()
            .map(|times| {
                generate_observations(truth, &times)
                    .map(|o| o.values().to_vec())
                    .map_err(|e| HarnessError::config("truth", e))
            })
            .collect::<Result<Vec<_>, _>>()?;
        for i in 0..BLOCK_ROWS {
            let mut row: Vec<Value> = vec![t0.into(), i.into()];
            row.extend(cols.iter().map(|c| Value::Num(c[i])));
            row.extend(cols.iter().map(|c| Value::Text(format!("{:.14}", c[i]))));
            table.push(row)?;
        }
    }
    Ok(table)
}

/// The experiment grid behind tables 3 to 8.
///
/// Truth, model, `Δ` and threshold come from `settings`; the iteration cap
/// is 10 for tables 5 and 6 and 100 for tables 7 and 8 unless overridden.
pub fn paper_experiment(table: u8, settings: &Settings) -> Result<ExperimentSpec, HarnessError> {
    let truth = settings.truth()?;
    let small = |method: MethodChoice, estimator: Option<Estimator>| -> Result<_, HarnessError> {
        Ok(ExperimentSpec {
            id: format!("table-{table}"),
            truth,
            models: vec![settings.model()?],
            t0s: T0S.to_vec(),
            ks: KS.to_vec(),
            ns: NS.to_vec(),
            delta: settings.delta,
            method,
            iteration: estimator.map(|e| settings.iteration(e, SMALL_CAP)),
        })
    };
    let large = |method: MethodChoice, estimator: Estimator| -> Result<_, HarnessError> {
        let models = LARGE_X0
            .iter()
            .flat_map(|&x0| LARGE_ALPHA.iter().map(move |&a| (x0, a)))
            .map(|(x0, a)| ModelConfiguration::new(x0, a).expect("grid values are positive"))
            .collect();
        Ok(ExperimentSpec {
            id: format!("table-{table}"),
            truth,
            models,
            t0s: T0S.to_vec(),
            ks: vec![1],
            ns: vec![4],
            delta: settings.delta,
            method,
            iteration: Some(settings.iteration(estimator, LARGE_CAP)),
        })
    };
    match table {
        3 => small(MethodChoice::FirstOrder, None),
        4 => small(MethodChoice::SecondOrder, None),
        5 => small(MethodChoice::FirstOrder, Some(Estimator::FirstOrder)),
        6 => small(MethodChoice::SecondOrder, Some(Estimator::SecondOrder)),
        7 => large(MethodChoice::FirstOrder, Estimator::FirstOrder),
        8 => large(MethodChoice::SecondOrder, Estimator::SecondOrder),
        other => Err(HarnessError::config(
            "table",
            format!("experiment tables are 3 to 8, got {other}"),
        )),
    }
}

/// Any of the eight tables.
pub fn paper_table(table: u8, settings: &Settings) -> Result<TableArtifact, HarnessError> {
    match table {
        1 => schedule_table(settings.delta),
        2 => observation_table(&settings.truth()?, settings.delta),
        3..=8 => super::run_experiment(&paper_experiment(table, settings)?),
        other => Err(HarnessError::config(
            "table",
            format!("tables are numbered 1 to 8, got {other}"),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// `x(t)` for `x₀ = 0.5, α = 1`.
    Solution,
    /// `∂x/∂x₀` and `∂x/∂α` on the same grid.
    Sensitivities,
}

impl Figure {
    pub fn from_number(n: u8) -> Result<Self, HarnessError> {
        match n {
            1 => Ok(Figure::Solution),
            2 => Ok(Figure::Sensitivities),
            other => Err(HarnessError::config(
                "figure",
                format!("figures are 1 and 2, got {other}"),
            )),
        }
    }
}

/// Series on `t = 0, 0.1, …, 10`.
pub fn emit_figure_data(which: Figure) -> TableArtifact {
    let cfg = ModelConfiguration::new(0.5, 1.0).expect("valid");
    let (id, headers) = match which {
        Figure::Solution => ("fig-1", vec!["t", "x"]),
        Figure::Sensitivities => ("fig-2", vec!["t", "d_x0", "d_alpha"]),
    };
    let mut table = TableArtifact::new(id, headers.into_iter().map(String::from).collect());
    for i in 0..=100 {
        // i/10 rather than accumulated 0.1 steps keeps t = 2.0 exact.
        let t = f64::from(i) / 10.0;
        let row = match which {
            Figure::Solution => vec![t.into(), model::solve(&cfg, t).into()],
            Figure::Sensitivities => {
                let (a, b) = model::first_order_sensitivities(&cfg, t);
                vec![t.into(), a.into(), b.into()]
            }
        };
        table.push(row).expect("fixed width");
    }
    table
}
