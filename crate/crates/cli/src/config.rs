//! Flat JSON run configuration. Frequencies are given in Hz and converted to
//! rad/s; `gamma0` is a rate in 1/s.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use raman_battery::dynamics::{LindbladOptions, ReservoirSpec, TrajectoryDump};
use raman_battery::model::{ModelParams, ProtocolParams, DEFAULT_DISPERSIVE_FACTOR};
use raman_battery::observables::{eta_closed_form, ChargingReport};
use raman_battery::protocols::{open_system_run_with, run_protocol, Engine, ProtocolKind, ProtocolRun};
use raman_battery::quantum::thermal::{ThermalSpec, DEFAULT_TRUNC_EPS};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// `ξ` used when neither `xi` nor `omega_eg_hz` is given.
pub const DEFAULT_XI: f64 = 99.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemperatureUnit {
    /// `T̄ = k_B T/(ħω_m)`.
    Reduced,
    Kelvin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub protocol: ProtocolKind,
    /// Defaults to `analytic` (closed protocols) or `lindblad` (open system).
    pub engine: Option<Engine>,
    pub omega_m_hz: f64,
    pub detuning_hz: f64,
    /// Frequency ratio `ω_q/ω_eg`; excludes `omega_eg_hz`.
    pub xi: Option<f64>,
    pub omega_eg_hz: Option<f64>,
    /// `Ω_L/2π`, defaults to `detuning_hz / 20`.
    pub drive_coupling_hz: Option<f64>,
    /// `g_q/2π`, defaults to `detuning_hz / 600`.
    pub fc_coupling_hz: Option<f64>,
    /// `Ω_q/2π` of the classical benchmark, defaults to `fc_coupling_hz`.
    pub classical_fc_coupling_hz: Option<f64>,
    pub dispersive_factor: f64,
    pub target_n: usize,
    pub stark_compensation: bool,
    pub temperature_mode: TemperatureUnit,
    pub temperature: f64,
    pub tau_s: Option<f64>,
    pub steps: Option<usize>,
    /// Open system only; 0 when absent.
    pub gamma0: Option<f64>,
    pub n_max: Option<usize>,
    pub trunc_eps: f64,
    /// Open system only: CSV trajectory output.
    pub dump_path: Option<PathBuf>,
    pub dump_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            protocol: ProtocolKind::QuantumSingleShot,
            engine: None,
            omega_m_hz: 1e12,
            detuning_hz: 1e6,
            xi: None,
            omega_eg_hz: None,
            drive_coupling_hz: None,
            fc_coupling_hz: None,
            classical_fc_coupling_hz: None,
            dispersive_factor: DEFAULT_DISPERSIVE_FACTOR,
            target_n: 1,
            stark_compensation: true,
            temperature_mode: TemperatureUnit::Reduced,
            temperature: 0.1,
            tau_s: None,
            steps: None,
            gamma0: None,
            n_max: None,
            trunc_eps: DEFAULT_TRUNC_EPS,
            dump_path: None,
            dump_samples: 200,
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.into(), source })
    }

    /// Defaults with every derived field spelled out, as `print-config` shows them.
    pub fn resolved_defaults() -> Self {
        let d = Self::default();
        Self {
            xi: Some(DEFAULT_XI),
            drive_coupling_hz: Some(d.detuning_hz / 20.0),
            fc_coupling_hz: Some(d.detuning_hz / 600.0),
            ..d
        }
    }

    fn engine(&self) -> Engine {
        self.engine.unwrap_or(if self.protocol == ProtocolKind::OpenSystem {
            Engine::Lindblad
        } else {
            Engine::Analytic
        })
    }

    /// Every violated constraint, each prefixed by its field name.
    pub fn validate(&self) -> CliResult<()> {
        let mut errs = Vec::new();
        let mut check = |ok: bool, field: &str, msg: String| {
            if !ok {
                errs.push(format!("{field}: {msg}"));
            }
        };
        let positive = |x: f64| x.is_finite() && x > 0.0;
        let non_negative = |x: f64| x.is_finite() && x >= 0.0;

        check(positive(self.omega_m_hz), "omega_m_hz", format!("must be positive, got {}", self.omega_m_hz));
        check(positive(self.detuning_hz), "detuning_hz", format!("must be positive, got {}", self.detuning_hz));
        check(
            !(self.xi.is_some() && self.omega_eg_hz.is_some()),
            "xi",
            "conflicts with omega_eg_hz; give one of them".into(),
        );
        if let Some(xi) = self.xi {
            check(positive(xi), "xi", format!("must be positive, got {xi}"));
        }
        if let Some(w) = self.omega_eg_hz {
            check(positive(w), "omega_eg_hz", format!("must be positive, got {w}"));
        }
        for (name, v) in [
            ("drive_coupling_hz", self.drive_coupling_hz),
            ("fc_coupling_hz", self.fc_coupling_hz),
            ("classical_fc_coupling_hz", self.classical_fc_coupling_hz),
        ] {
            if let Some(v) = v {
                check(non_negative(v), name, format!("must be >= 0, got {v}"));
            }
        }
        check(
            positive(self.dispersive_factor),
            "dispersive_factor",
            format!("must be positive, got {}", self.dispersive_factor),
        );
        check(self.target_n >= 1, "target_n", "must be at least 1".into());
        check(non_negative(self.temperature), "temperature", format!("must be >= 0, got {}", self.temperature));
        if let Some(t) = self.tau_s {
            check(positive(t), "tau_s", format!("must be positive, got {t}"));
        }
        if let Some(s) = self.steps {
            check(s >= 1, "steps", "must be at least 1".into());
            check(
                self.protocol == ProtocolKind::QuantumSequential,
                "steps",
                "only applies to quantum_sequential".into(),
            );
        }
        if let Some(g) = self.gamma0 {
            check(non_negative(g), "gamma0", format!("must be >= 0, got {g}"));
            check(self.protocol == ProtocolKind::OpenSystem, "gamma0", "only applies to open_system".into());
        }
        if let Some(n) = self.n_max {
            check(n >= 1, "n_max", "must be at least 1".into());
        }
        check(
            self.trunc_eps > 0.0 && self.trunc_eps <= 1.0,
            "trunc_eps",
            format!("must lie in (0, 1], got {}", self.trunc_eps),
        );
        if self.dump_path.is_some() {
            check(self.protocol == ProtocolKind::OpenSystem, "dump_path", "only applies to open_system".into());
        }
        check(self.dump_samples >= 1, "dump_samples", "must be at least 1".into());
        let engine = self.engine();
        let engine_ok = match engine {
            Engine::Lindblad => self.protocol == ProtocolKind::OpenSystem,
            _ => self.protocol != ProtocolKind::OpenSystem,
        };
        check(engine_ok, "engine", format!("{engine} is not available for {:?}", self.protocol));
        if errs.is_empty() {
            if let Err(e) = self.model_params() {
                errs.push(format!("omega_eg_hz: {e}"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(errs))
        }
    }

    pub fn model_params(&self) -> CliResult<ModelParams> {
        let omega_m = TAU * self.omega_m_hz;
        let detuning = TAU * self.detuning_hz;
        let drive = TAU * self.drive_coupling_hz.unwrap_or(self.detuning_hz / 20.0);
        let fc = TAU * self.fc_coupling_hz.unwrap_or(self.detuning_hz / 600.0);
        let mut p = match self.omega_eg_hz {
            Some(w) => ModelParams::new(TAU * w, omega_m, detuning, drive, fc)?,
            None => ModelParams::from_xi(omega_m, detuning, self.xi.unwrap_or(DEFAULT_XI), drive, fc)?,
        };
        p.dispersive_factor = self.dispersive_factor;
        if let Some(c) = self.classical_fc_coupling_hz {
            p = p.with_classical_fc_coupling(TAU * c)?;
        }
        Ok(p)
    }

    pub fn thermal(&self, p: &ModelParams) -> CliResult<ThermalSpec> {
        Ok(match self.temperature_mode {
            TemperatureUnit::Reduced => ThermalSpec::reduced(self.temperature, p.omega_m)?,
            TemperatureUnit::Kelvin => ThermalSpec::kelvin(self.temperature)?,
        })
    }

    pub fn protocol_run(&self) -> CliResult<ProtocolRun> {
        self.validate()?;
        let p = self.model_params()?;
        let mut run = ProtocolRun::new(self.protocol, p, self.thermal(&p)?)
            .with_engine(self.engine())
            .with_proto(ProtocolParams::new(self.target_n, self.stark_compensation)?)
            .with_trunc_eps(self.trunc_eps);
        run.tau = self.tau_s;
        run.steps = self.steps;
        run.n_max = self.n_max;
        run.validate()?;
        Ok(run)
    }

    pub fn reservoir(&self, run: &ProtocolRun) -> CliResult<Option<ReservoirSpec>> {
        if self.protocol != ProtocolKind::OpenSystem {
            return Ok(None);
        }
        Ok(Some(ReservoirSpec::thermal(self.gamma0.unwrap_or(0.0), &run.params, &run.thermal)?))
    }

    /// Runs the configured protocol.
    pub fn execute(&self) -> CliResult<ChargingReport> {
        let run = self.protocol_run()?;
        let res = self.reservoir(&run)?;
        let report = match (&res, &self.dump_path) {
            (Some(res), Some(path)) => {
                let opts = LindbladOptions {
                    dump: Some(TrajectoryDump { path: path.clone(), samples: self.dump_samples }),
                    ..LindbladOptions::exponential()
                };
                open_system_run_with(&run, res, &opts)?
            }
            _ => run_protocol(&run, res.as_ref())?,
        };
        Ok(report)
    }
}

/// Human-readable summary of a report.
pub fn format_report(cfg: &RunConfig, run: &ProtocolRun, r: &ChargingReport) -> String {
    let unit = raman_battery::HBAR * run.params.omega_eg;
    let mut out = String::new();
    let mut line = |k: &str, v: String| out.push_str(&format!("{k:<22} {v}\n"));
    line("protocol", format!("{:?}", cfg.protocol));
    line("engine", r.engine.to_string());
    line("xi", format!("{:.6}", run.params.xi()));
    line("tau_used_s", format!("{:.6e}", r.tau_used));
    line("delta_u_battery_J", format!("{:.6e}  ({:.9} hbar*omega_eg)", r.delta_u_battery, r.delta_u_battery / unit));
    line("delta_u_fc_J", format!("{:.6e}", r.delta_u_fc));
    line("ergotropy_J", format!("{:.6e}", r.ergotropy));
    line("work_in_J", format!("{:.6e}", r.work_in));
    line("delta_u_classical_J", format!("{:.6e}", r.delta_u_classical));
    line("k_q", format!("{:.9e}", r.k_q));
    line("eta", format!("{:.9e}", r.eta));
    if let Some(c) = r.eta_corrected {
        line("eta_corrected", format!("{c:.9e}"));
    }
    if r.ledger.is_none() && r.k_q.is_finite() && r.eta.is_finite() {
        let gap = (r.eta - eta_closed_form(run.params.xi(), r.k_q)).abs();
        line("eta_identity", format!("{} (|eta - closed form| = {gap:.2e})", if gap <= 1e-9 { "ok" } else { "off" }));
    }
    for (label, q) in &r.heat {
        line(&format!("heat_{label}_J"), format!("{q:.6e}"));
    }
    if !r.step_delta_u.is_empty() {
        line("sequential_steps", r.step_delta_u.len().to_string());
    }
    let d = &r.diagnostics;
    line("n_max", d.n_max.to_string());
    line("truncation_tail", format!("{:.3e}", d.truncation_tail));
    line("trace_drift", format!("{:.3e}", d.trace_drift));
    if let Some(c) = d.closure_residual {
        line("closure_residual_J", format!("{c:.3e}"));
    }
    for note in &d.notes {
        line("note", note.clone());
    }
    let problems = r.check_invariants();
    line("invariants", if problems.is_empty() { "ok".into() } else { problems.join("; ") });
    out
}
