//! Parameter sweeps: one row per grid point, one column per evaluator.
//!
//! Points that fail validation (an unstable load, a negative parameter)
//! emit empty cells rather than fabricated zeros. Rows always appear in
//! grid order; points are evaluated in parallel.

use std::process::ExitCode;

use rayon::prelude::*;
use waitsee::*;

use crate::{check, resolve_sim_config, CommonArgs, Failure, SimArgs};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Variable {
    Credit(usize),
    Lambda(usize),
    SwitchMean(usize),
    Rho(usize),
}

fn parse_variable(text: &str, stations: usize) -> Result<Variable, Failure> {
    let (make, rest): (fn(usize) -> Variable, &str) =
        if let Some(rest) = text.strip_prefix("lambda") {
            (Variable::Lambda, rest)
        } else if let Some(rest) = text.strip_prefix("rho") {
            (Variable::Rho, rest)
        } else if let Some(rest) = text.strip_prefix('T') {
            (Variable::Credit, rest)
        } else if let Some(rest) = text.strip_prefix('r') {
            (Variable::SwitchMean, rest)
        } else {
            return Err(Failure::Usage(format!(
                "unknown sweep variable {text:?}; expected T<i>, lambda<i>, r<i>, or rho<i>"
            )));
        };
    let index: usize = rest
        .parse()
        .map_err(|_| Failure::Usage(format!("bad station index in sweep variable {text:?}")))?;
    if index == 0 || index > stations {
        return Err(Failure::Usage(format!(
            "sweep variable {text:?} is out of range for {stations} stations"
        )));
    }
    Ok(make(index - 1))
}

fn parse_range(text: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<&str> = text.split(':').collect();
    let usage =
        || Failure::Usage(format!("bad range {text:?}; expected start:stop:steps with steps >= 2"));
    if parts.len() != 3 {
        return Err(usage());
    }
    let start: f64 = parts[0].parse().map_err(|_| usage())?;
    let stop: f64 = parts[1].parse().map_err(|_| usage())?;
    let steps: usize = parts[2].parse().map_err(|_| usage())?;
    if steps < 2 || !start.is_finite() || !stop.is_finite() {
        return Err(usage());
    }
    Ok((0..steps)
        .map(|i| start + (stop - start) * i as f64 / (steps - 1) as f64)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Column {
    AnalyticWs,
    Exhaustive,
    LowerBound,
    Sim(Strategy),
}

impl Column {
    fn name(&self) -> String {
        match self {
            Column::AnalyticWs => "analytic_ws".into(),
            Column::Exhaustive => "exhaustive".into(),
            Column::LowerBound => "lower_bound".into(),
            Column::Sim(strategy) => format!("sim_{strategy}"),
        }
    }
}

fn parse_outputs(text: &str) -> Result<Vec<Column>, Failure> {
    let mut requested = Vec::new();
    for name in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let column = match name {
            "analytic_ws" => Column::AnalyticWs,
            "exhaustive" => Column::Exhaustive,
            "lower_bound" => Column::LowerBound,
            _ => match name.strip_prefix("sim_") {
                Some(strategy) => Column::Sim(strategy.parse().map_err(Failure::Usage)?),
                None => {
                    return Err(Failure::Usage(format!("unknown sweep output {name:?}")));
                }
            },
        };
        if !requested.contains(&column) {
            requested.push(column);
        }
    }
    // Canonical column order, independent of how the request was written.
    let canonical = [
        Column::AnalyticWs,
        Column::Exhaustive,
        Column::LowerBound,
        Column::Sim(Strategy::WaitAndSee),
        Column::Sim(Strategy::TotalTimer),
        Column::Sim(Strategy::BoxmaTimer),
        Column::Sim(Strategy::Exhaustive),
    ];
    let columns: Vec<Column> =
        canonical.into_iter().filter(|c| requested.contains(c)).collect();
    if columns.is_empty() {
        return Err(Failure::Usage("no sweep outputs requested".into()));
    }
    Ok(columns)
}

fn apply(config: &PollingConfig, variable: Variable, value: f64) -> PollingConfig {
    let mut cfg = config.clone();
    match variable {
        Variable::Credit(i) => cfg.stations[i].credit = value,
        Variable::Lambda(i) => cfg.stations[i].lambda = value,
        Variable::Rho(i) => cfg.stations[i].lambda = value / cfg.stations[i].b,
        Variable::SwitchMean(i) => {
            let old = cfg.switchovers[i];
            // Keep the law's shape: scale the second moment with the square
            // of the mean.
            let scv_plus_one = if old.r > 0.0 { old.r2 / (old.r * old.r) } else { 1.0 };
            cfg.switchovers[i] = SwitchoverMoments::new(value, value * value * scv_plus_one);
        }
    }
    cfg
}

fn evaluate_point(
    raw: PollingConfig,
    columns: &[Column],
    sim_base: &SimConfig,
    point_index: usize,
) -> Vec<Option<f64>> {
    let config = match validate(raw) {
        Ok(config) => config,
        Err(_) => return vec![None; columns.len()],
    };
    columns
        .iter()
        .map(|column| match column {
            Column::AnalyticWs => Some(wait_and_see_delay(&config).weighted_mean),
            Column::Exhaustive => Some(exhaustive_delay(&config).weighted_mean),
            Column::LowerBound => {
                Some(delay_lower_bound(&config, &OptimizeOptions::default()).point.objective)
            }
            Column::Sim(strategy) => {
                let mut sim = sim_base.clone();
                sim.strategy = *strategy;
                sim.stream = point_index as u64;
                simulate(&config, &sim).ok().map(|est| est.weighted_delay.mean)
            }
        })
        .collect()
}

/// Full-precision decimal so downstream plotting never masks formula-level
/// differences.
fn cell(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.16e}"),
        None => String::new(),
    }
}

pub fn run(
    scenario: &Scenario,
    common: &CommonArgs,
    variable: &str,
    range: &str,
    outputs: &str,
    sim_args: &SimArgs,
    out: Option<&str>,
) -> Result<ExitCode, Failure> {
    let base = check(scenario)?;
    let variable = parse_variable(variable, base.len())?;
    let points = parse_range(range)?;
    let columns = parse_outputs(outputs)?;
    let sim_base = resolve_sim_config(scenario, sim_args, Strategy::WaitAndSee)?;

    let raw = scenario.config.clone();
    let rows: Vec<(f64, Vec<Option<f64>>)> = points
        .par_iter()
        .enumerate()
        .map(|(index, &value)| {
            (value, evaluate_point(apply(&raw, variable, value), &columns, &sim_base, index))
        })
        .collect();

    let text = if common.json {
        let rows: Vec<serde_json::Value> = rows
            .iter()
            .map(|(point, cells)| {
                let mut row = serde_json::Map::new();
                row.insert("point".into(), serde_json::json!(point));
                for (column, value) in columns.iter().zip(cells) {
                    row.insert(column.name(), serde_json::json!(value));
                }
                serde_json::Value::Object(row)
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({ "rows": rows }))
            .expect("serializable")
            + "\n"
    } else {
        let mut text = String::from("point");
        for column in &columns {
            text.push(',');
            text.push_str(&column.name());
        }
        text.push('\n');
        for (point, cells) in &rows {
            text.push_str(&cell(Some(*point)));
            for value in cells {
                text.push(',');
                text.push_str(&cell(*value));
            }
            text.push('\n');
        }
        text
    };

    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|err| Failure::Io(format!("cannot write {path}: {err}")))?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}
