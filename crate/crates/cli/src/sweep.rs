//! One-parameter sweeps over a base run configuration.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::table::{self, Table, DEFAULT_PRECISION, REPORT_COLUMNS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Xi,
    Tbar,
    Gamma0,
    Tau,
}

impl SweepAxis {
    /// Run-config key the axis writes.
    pub fn key(&self) -> &'static str {
        match self {
            SweepAxis::Xi => "xi",
            SweepAxis::Tbar => "temperature",
            SweepAxis::Gamma0 => "gamma0",
            SweepAxis::Tau => "tau_s",
        }
    }

    pub fn column(&self) -> &'static str {
        match self {
            SweepAxis::Xi => "xi",
            SweepAxis::Tbar => "tbar",
            SweepAxis::Gamma0 => "gamma0",
            SweepAxis::Tau => "tau",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepValues {
    List(Vec<f64>),
    Linear(Range),
    Geometric(Range),
}

impl SweepValues {
    pub fn expand(&self) -> CliResult<Vec<f64>> {
        let bad = |msg: String| CliError::field("values", msg);
        let values = match self {
            SweepValues::List(v) => v.clone(),
            SweepValues::Linear(r) | SweepValues::Geometric(r) => {
                if r.count < 2 {
                    return Err(bad(format!("range needs count >= 2, got {}", r.count)));
                }
                let geometric = matches!(self, SweepValues::Geometric(_));
                if geometric && !(r.start > 0.0 && r.stop > 0.0) {
                    return Err(bad("geometric range needs positive endpoints".into()));
                }
                let last = (r.count - 1) as f64;
                (0..r.count)
                    .map(|i| {
                        let f = i as f64 / last;
                        if geometric {
                            r.start * (r.stop / r.start).powf(f)
                        } else {
                            r.start + (r.stop - r.start) * f
                        }
                    })
                    .collect()
            }
        };
        if values.is_empty() {
            return Err(bad("must not be empty".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(bad("must be finite".into()));
        }
        let increasing = values.windows(2).all(|w| w[1] > w[0]);
        let decreasing = values.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(bad("must be strictly monotone".into()));
        }
        Ok(values)
    }
}

fn default_precision() -> usize {
    DEFAULT_PRECISION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: SweepValues,
    /// Run configuration without the swept key.
    pub base: Map<String, Value>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_precision")]
    pub precision: usize,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub cells: Vec<String>,
    pub ok: bool,
}

impl SweepConfig {
    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.into(), source })
    }

    /// Validated per-point configurations, in axis order.
    pub fn point_configs(&self) -> CliResult<Vec<(f64, RunConfig)>> {
        let key = self.axis.key();
        let mut errs = Vec::new();
        if self.base.contains_key(key) {
            errs.push(format!("base.{key}: set by the sweep axis; remove it from base"));
        }
        if self.axis == SweepAxis::Xi && self.base.contains_key("omega_eg_hz") {
            errs.push("base.omega_eg_hz: conflicts with the xi axis".into());
        }
        if self.axis == SweepAxis::Tbar {
            if let Some(mode) = self.base.get("temperature_mode") {
                if mode != &Value::String("reduced".into()) {
                    errs.push("base.temperature_mode: tbar axis needs reduced temperatures".into());
                }
            }
        }
        if !(1..=17).contains(&self.precision) {
            errs.push(format!("precision: must lie in 1..=17, got {}", self.precision));
        }
        if !errs.is_empty() {
            return Err(CliError::Validation(errs));
        }
        let mut values = self.values.expand()?;
        values.sort_by(f64::total_cmp);
        values
            .into_iter()
            .map(|v| {
                let mut map = self.base.clone();
                map.insert(key.into(), Value::from(v));
                let cfg: RunConfig = serde_json::from_value(Value::Object(map))
                    .map_err(|e| CliError::field("base", e))?;
                cfg.validate().map_err(|e| match e {
                    CliError::Validation(msgs) => {
                        CliError::Validation(msgs.into_iter().map(|m| format!("at {key} = {v:e}: {m}")).collect())
                    }
                    other => other,
                })?;
                Ok((v, cfg))
            })
            .collect()
    }

    /// Runs every point (in parallel) and returns rows sorted by axis value.
    pub fn run(&self) -> CliResult<Vec<SweepRow>> {
        let points = self.point_configs()?;
        let precision = self.precision;
        let mut rows: Vec<SweepRow> = points
            .par_iter()
            .map(|(v, cfg)| match cfg.execute() {
                Ok(report) => {
                    let cells = table::report_cells(&report, precision);
                    let ok = cells.last().is_some_and(|s| s == "ok");
                    SweepRow { value: *v, cells, ok }
                }
                Err(e) => SweepRow { value: *v, cells: table::failed_cells(&e.to_string()), ok: false },
            })
            .collect();
        rows.sort_by(|a, b| a.value.total_cmp(&b.value));
        Ok(rows)
    }

    pub fn table(&self, rows: &[SweepRow]) -> Table {
        let mut header = vec![self.axis.column()];
        header.extend(REPORT_COLUMNS);
        let mut t = Table::new(&header);
        for row in rows {
            let mut cells = vec![table::num(row.value, self.precision)];
            cells.extend(row.cells.iter().cloned());
            t.rows.push(cells);
        }
        t
    }
}
