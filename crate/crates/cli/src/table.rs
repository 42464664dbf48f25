//! CSV emission: fixed-precision scientific notation, header row, LF.

use std::io::Write;

use raman_battery::dynamics::ChannelLabel;
use raman_battery::observables::ChargingReport;

use crate::error::CliResult;

/// Significant digits of every numeric cell.
pub const DEFAULT_PRECISION: usize = 12;

pub fn num(x: f64, precision: usize) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{:.*e}", precision.max(1) - 1, x)
    }
}

pub fn opt(x: Option<f64>, precision: usize) -> String {
    x.map_or_else(String::new, |v| num(v, precision))
}

/// Row status: `ok`, or the violated invariants / error text.
pub fn status(problems: &[String]) -> String {
    if problems.is_empty() {
        "ok".into()
    } else {
        problems.join("; ")
    }
}

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn write_to<W: Write>(&self, w: W) -> CliResult<()> {
        let mut wtr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        wtr.write_record(&self.header)?;
        for row in &self.rows {
            wtr.write_record(row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_path(&self, path: &std::path::Path) -> CliResult<()> {
        self.write_to(std::fs::File::create(path)?)
    }
}

/// Columns shared by `run` and `sweep` output.
pub const REPORT_COLUMNS: [&str; 18] = [
    "engine",
    "tau_s",
    "delta_u_battery_j",
    "delta_u_fc_j",
    "ergotropy_j",
    "work_in_j",
    "delta_u_classical_j",
    "k_q",
    "eta",
    "eta_corrected",
    "q_gm_j",
    "q_mg_j",
    "q_em_j",
    "q_me_j",
    "q_minus_j",
    "q_plus_j",
    "trace_drift",
    "status",
];

pub fn report_cells(r: &ChargingReport, precision: usize) -> Vec<String> {
    let mut cells = vec![
        r.engine.to_string(),
        num(r.tau_used, precision),
        num(r.delta_u_battery, precision),
        num(r.delta_u_fc, precision),
        num(r.ergotropy, precision),
        num(r.work_in, precision),
        num(r.delta_u_classical, precision),
        num(r.k_q, precision),
        num(r.eta, precision),
        opt(r.eta_corrected, precision),
    ];
    for label in ChannelLabel::ALL {
        cells.push(opt(r.heat.get(&label).copied(), precision));
    }
    cells.push(num(r.diagnostics.trace_drift, precision));
    cells.push(status(&r.check_invariants()));
    cells
}

/// Cells for a row whose run failed.
pub fn failed_cells(msg: &str) -> Vec<String> {
    let mut cells = vec![String::new(); REPORT_COLUMNS.len() - 1];
    cells.push(format!("error: {msg}"));
    cells
}
