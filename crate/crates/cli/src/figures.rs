//! Tables behind the gain/efficiency figures.

use rayon::prelude::*;

use raman_battery::dynamics::ReservoirSpec;
use raman_battery::model::ModelParams;
use raman_battery::observables::ChargingReport;
use raman_battery::protocols::{
    open_system_run, optimize_tau, single_shot_quantum, Engine, ProtocolKind, ProtocolRun, DEFAULT_TAU_GRID,
};
use raman_battery::quantum::thermal::ThermalSpec;

use crate::error::CliResult;
use crate::table::{self, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct Fig2Options {
    pub xi_min: f64,
    pub xi_max: f64,
    /// Geometric grid size.
    pub points: usize,
    pub tbars: Vec<f64>,
    pub tau_grid: usize,
    pub precision: usize,
}

impl Default for Fig2Options {
    fn default() -> Self {
        Self {
            xi_min: 0.5,
            xi_max: 200.0,
            points: 121,
            tbars: vec![0.1, 0.4],
            tau_grid: DEFAULT_TAU_GRID,
            precision: table::DEFAULT_PRECISION,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig2Row {
    pub xi: f64,
    pub tbar: f64,
    pub k_q: f64,
    pub eta: f64,
    pub tau_star: f64,
    pub s_star: f64,
    pub status: String,
}

fn geometric(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let last = (n.max(2) - 1) as f64;
    (0..n.max(2)).map(|i| lo * (hi / lo).powf(i as f64 / last)).collect()
}

fn fig2_point(xi: f64, tbar: f64, grid: usize) -> CliResult<Fig2Row> {
    let p = ModelParams::figure(xi)?;
    let run = ProtocolRun::new(ProtocolKind::QuantumSingleShot, p, ThermalSpec::reduced(tbar, p.omega_m)?);
    let (tau_star, s_star) = optimize_tau(&run, None, grid)?;
    let report = single_shot_quantum(&run.with_tau(tau_star))?;
    let mut problems = report.check_invariants();
    let bound = 2.0 / (1.0 + xi);
    if !(report.eta > 0.0 && report.eta <= bound * (1.0 + 1e-12)) {
        problems.push(format!("eta {} outside (0, 2/(1+xi)]", report.eta));
    }
    Ok(Fig2Row { xi, tbar, k_q: report.k_q, eta: report.eta, tau_star, s_star, status: table::status(&problems) })
}

/// Gain and efficiency of the optimised single-shot flip over a `ξ` grid.
pub fn fig2_rows(opts: &Fig2Options) -> Vec<Fig2Row> {
    let xis = geometric(opts.xi_min, opts.xi_max, opts.points);
    let tasks: Vec<(f64, f64)> = opts.tbars.iter().flat_map(|&t| xis.iter().map(move |&x| (x, t))).collect();
    tasks
        .par_iter()
        .map(|&(xi, tbar)| {
            fig2_point(xi, tbar, opts.tau_grid).unwrap_or_else(|e| Fig2Row {
                xi,
                tbar,
                k_q: f64::NAN,
                eta: f64::NAN,
                tau_star: f64::NAN,
                s_star: f64::NAN,
                status: format!("error: {e}"),
            })
        })
        .collect()
}

pub fn fig2_table(rows: &[Fig2Row], precision: usize) -> Table {
    let mut t = Table::new(&["xi", "tbar", "k_q", "eta", "tau_star", "s_star", "status"]);
    let n = |x| table::num(x, precision);
    for r in rows {
        t.rows.push(vec![n(r.xi), n(r.tbar), n(r.k_q), n(r.eta), n(r.tau_star), n(r.s_star), r.status.clone()]);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpenFigOptions {
    pub xi: f64,
    pub tbars: Vec<f64>,
    /// Spontaneous rates, 1/s. The unitary reference is always added.
    pub gamma0: Vec<f64>,
    pub n_max: usize,
    pub precision: usize,
}

/// Default `γ₀` ladder as multiples of the effective coupling `g_qΩ_L/Δ`.
pub const GAMMA0_LADDER: [f64; 4] = [1e-3, 1e-2, 1e-1, 1.0];

impl Default for OpenFigOptions {
    fn default() -> Self {
        let xi = 99.0;
        let g0 = ModelParams::figure(xi).map(|p| p.effective_coupling()).unwrap_or(f64::NAN);
        Self {
            xi,
            tbars: (1..=20).map(|k| 0.05 * k as f64).collect(),
            gamma0: GAMMA0_LADDER.iter().map(|f| f * g0).collect(),
            n_max: 10,
            precision: table::DEFAULT_PRECISION,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpenRow {
    pub tbar: f64,
    /// 0 for the unitary reference.
    pub gamma0: f64,
    pub engine: Engine,
    pub k_q: f64,
    pub eta: f64,
    pub eta_corrected: Option<f64>,
    pub tau_star: f64,
    pub closure_residual: Option<f64>,
    pub status: String,
}

impl OpenRow {
    fn from_report(tbar: f64, gamma0: f64, r: &ChargingReport) -> Self {
        Self {
            tbar,
            gamma0,
            engine: r.engine,
            k_q: r.k_q,
            eta: r.eta,
            eta_corrected: r.eta_corrected,
            tau_star: r.tau_used,
            closure_residual: r.diagnostics.closure_residual,
            status: table::status(&r.check_invariants()),
        }
    }

    fn failed(tbar: f64, gamma0: f64, engine: Engine, msg: String) -> Self {
        Self {
            tbar,
            gamma0,
            engine,
            k_q: f64::NAN,
            eta: f64::NAN,
            eta_corrected: None,
            tau_star: f64::NAN,
            closure_residual: None,
            status: format!("error: {msg}"),
        }
    }
}

fn open_point(opts: &OpenFigOptions, tbar: f64, gamma0: Option<f64>) -> CliResult<ChargingReport> {
    let p = ModelParams::figure(opts.xi)?;
    let thermal = ThermalSpec::reduced(tbar, p.omega_m)?;
    Ok(match gamma0 {
        None => {
            let run = ProtocolRun::new(ProtocolKind::QuantumSingleShot, p, thermal).with_engine(Engine::EffNumeric);
            single_shot_quantum(&run)?
        }
        Some(g) => {
            let run = ProtocolRun::new(ProtocolKind::OpenSystem, p, thermal).with_n_max(opts.n_max).with_trunc_eps(1.0);
            open_system_run(&run, &ReservoirSpec::thermal(g, &p, &thermal)?)?
        }
    })
}

/// Unitary `H_eff` reference plus master-equation rows for each `γ₀`,
/// sorted by `(T̄, γ₀)`. Failed points carry their error in `status`.
pub fn open_rows(opts: &OpenFigOptions) -> Vec<OpenRow> {
    let mut tasks: Vec<(f64, Option<f64>)> = Vec::new();
    for &t in &opts.tbars {
        tasks.push((t, None));
        tasks.extend(opts.gamma0.iter().map(|&g| (t, Some(g))));
    }
    let mut rows: Vec<OpenRow> = tasks
        .par_iter()
        .map(|&(tbar, g)| {
            let engine = if g.is_some() { Engine::Lindblad } else { Engine::EffNumeric };
            let gamma0 = g.unwrap_or(0.0);
            match open_point(opts, tbar, g) {
                Ok(r) => OpenRow::from_report(tbar, gamma0, &r),
                Err(e) => OpenRow::failed(tbar, gamma0, engine, e.to_string()),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.tbar.total_cmp(&b.tbar).then(a.gamma0.total_cmp(&b.gamma0)));
    rows
}

pub fn fig3_table(rows: &[OpenRow], precision: usize) -> Table {
    let mut t = Table::new(&["tbar", "gamma0", "k_q", "tau_star", "engine", "status"]);
    let n = |x| table::num(x, precision);
    for r in rows {
        t.rows.push(vec![n(r.tbar), n(r.gamma0), n(r.k_q), n(r.tau_star), r.engine.to_string(), r.status.clone()]);
    }
    t
}

pub fn fig4_table(rows: &[OpenRow], precision: usize) -> Table {
    let mut t = Table::new(&["tbar", "gamma0", "eta", "eta_corrected", "tau_star", "engine", "status"]);
    let n = |x| table::num(x, precision);
    for r in rows {
        t.rows.push(vec![
            n(r.tbar),
            n(r.gamma0),
            n(r.eta),
            table::opt(r.eta_corrected, precision),
            n(r.tau_star),
            r.engine.to_string(),
            r.status.clone(),
        ]);
    }
    t
}
