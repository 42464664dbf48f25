//! Master-equation propagation with heat and work bookkeeping.
//!
//! `ρ̇ = −i[H, ρ] + Σ_s Γ_s (2 L_s ρ L_s† − {L_s†L_s, ρ})`, integrated on the
//! invariant support of the initial state (see [`Liouvillian`]).
//!
//! Alongside ρ the integrator carries, per active channel, the heat
//! `Q_s = ∫ Tr{D_s(ρ) H₀} dt` and the drive work `W = ∫ Tr{−i[H, ρ] H₀} dt`,
//! where `H₀ = H_B0 + H_fc0` holds the bare energies. Because the rotating
//! frame is generated by an operator diagonal in the bare basis, both
//! integrands are frame independent. The first law
//! `ΔU = W + Σ_s Q_s` is then an independent check on the integration.

use std::collections::BTreeMap;
use std::path::PathBuf;

use nalgebra::DVector;
use num_complex::Complex64;

use super::channels::{ChannelLabel, LindbladChannel};
use super::liouvillian::Liouvillian;
use crate::error::{usage, Error, Result};
use crate::model::ModelParams;
use crate::quantum::density::DensityMatrix;
use crate::quantum::layout::{HilbertLayout, Subsystem, E, M};
use crate::quantum::matrix::{commutator, identity, kron, number, transition, ComplexMatrix, I, ZERO};
use crate::HBAR;

/// Bare (lab-frame) energies in rad/s; `ω_g = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BareEnergies {
    pub omega_eg: f64,
    pub omega_m: f64,
    pub omega_q: f64,
}

impl BareEnergies {
    pub fn from_params(p: &ModelParams) -> Self {
        Self { omega_eg: p.omega_eg, omega_m: p.omega_m, omega_q: p.omega_q() }
    }

    fn on_atom(&self, layout: &HilbertLayout, atom_op: ComplexMatrix) -> ComplexMatrix {
        match layout.factor_dim(Subsystem::Fock) {
            Some(fd) if layout.is_joint() => kron(&atom_op, &identity(fd)),
            _ => atom_op,
        }
    }

    /// `ω_eg σ_ee`.
    pub fn battery_operator(&self, layout: &HilbertLayout) -> ComplexMatrix {
        match layout.atom_dim() {
            Some(d) => self.on_atom(layout, transition(d, E, E) * Complex64::new(self.omega_eg, 0.0)),
            None => ComplexMatrix::zeros(layout.dim(), layout.dim()),
        }
    }

    /// `ω_m σ_mm` (zero without an ancilla level).
    pub fn ancilla_operator(&self, layout: &HilbertLayout) -> ComplexMatrix {
        match layout.atom_dim() {
            Some(3) => self.on_atom(layout, transition(3, M, M) * Complex64::new(self.omega_m, 0.0)),
            _ => ComplexMatrix::zeros(layout.dim(), layout.dim()),
        }
    }

    /// `ω_q b†b`.
    pub fn fc_operator(&self, layout: &HilbertLayout) -> ComplexMatrix {
        let Some(n_max) = layout.n_max() else {
            return ComplexMatrix::zeros(layout.dim(), layout.dim());
        };
        let n = number(n_max) * Complex64::new(self.omega_q, 0.0);
        match layout.atom_dim() {
            Some(d) => kron(&identity(d), &n),
            None => n,
        }
    }

    pub fn total_operator(&self, layout: &HilbertLayout) -> ComplexMatrix {
        self.battery_operator(layout) + self.ancilla_operator(layout) + self.fc_operator(layout)
    }

    fn scale(&self) -> f64 {
        self.omega_eg.max(self.omega_m).max(self.omega_q).max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// Classical fourth-order Runge–Kutta with step-doubling error control.
    /// The step is halved whenever the local error, the per-step trace drift
    /// or the Hermiticity defect exceeds its bound.
    Rk4 {
        /// Defaults to `(50 · max(‖H‖, max Γ))⁻¹`.
        initial_step: Option<f64>,
        /// Bound on the step-doubling error estimate (absolute, per entry).
        local_tol: f64,
        /// Step size below which integration fails.
        min_step: f64,
    },
    /// Exact propagation by the matrix exponential of the restricted
    /// generator (scaling and squaring), heat integrals included.
    Exponential {
        /// Longest single exponential step; `None` takes one step per output.
        max_step: Option<f64>,
    },
}

impl Default for Method {
    fn default() -> Self {
        Method::Rk4 { initial_step: None, local_tol: 1e-12, min_step: 1e-300 }
    }
}

/// CSV trajectory output: `t`, atomic populations, `⟨b†b⟩` and the
/// cumulative heat per channel (J).
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDump {
    pub path: PathBuf,
    /// Number of equally spaced rows after `t = 0`.
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LindbladOptions {
    pub method: Method,
    /// Allowed `|Tr ρ(t) − Tr ρ(0)|`.
    pub trace_tol: f64,
    /// Bound on the Hermitian symmetrisation applied after each step.
    pub hermiticity_tol: f64,
    pub dump: Option<TrajectoryDump>,
}

impl Default for LindbladOptions {
    fn default() -> Self {
        Self { method: Method::default(), trace_tol: 1e-8, hermiticity_tol: 1e-10, dump: None }
    }
}

impl LindbladOptions {
    pub fn exponential() -> Self {
        Self { method: Method::Exponential { max_step: None }, ..Self::default() }
    }
}

/// Energy bookkeeping of one run, in joules.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnergyLedger {
    /// Heat flowing from each reservoir into the system (positive = in).
    pub heat_by_channel: BTreeMap<ChannelLabel, f64>,
    /// Final bare energies.
    pub u_battery: f64,
    pub u_ancilla: f64,
    pub u_fc: f64,
    pub delta_u_battery: f64,
    pub delta_u_ancilla: f64,
    pub delta_u_fc: f64,
    /// Work done by the drives, from the power integral.
    pub w_drive: f64,
}

impl EnergyLedger {
    pub fn total_heat(&self) -> f64 {
        self.heat_by_channel.values().sum()
    }

    pub fn delta_u_total(&self) -> f64 {
        self.delta_u_battery + self.delta_u_ancilla + self.delta_u_fc
    }

    /// `ΔU − W − ΣQ`; zero for exact dynamics.
    pub fn closure_residual(&self) -> f64 {
        self.delta_u_total() - self.w_drive - self.total_heat()
    }

    pub fn heat(&self, label: ChannelLabel) -> f64 {
        self.heat_by_channel.get(&label).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct LindbladResult {
    pub rho: DensityMatrix,
    pub ledger: EnergyLedger,
    /// `|Tr ρ(t_final) − Tr ρ(0)|`.
    pub trace_drift: f64,
    /// Set when the drift exceeded `trace_tol`.
    pub trace_flagged: bool,
    /// Largest Hermitian symmetrisation applied.
    pub max_symmetrization: f64,
    pub steps: usize,
    pub rejected_steps: usize,
}

/// Integration counters.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub steps: usize,
    pub rejected: usize,
    pub max_symmetrization: f64,
    pub max_trace_drift: f64,
}

/// Reusable master-equation integrator for one `(H, channels, ρ₀)` triple.
///
/// The state vector is `[vec(ρ) restricted to the support; Q_s/s₀...; W/s₀]`
/// with `s₀` the largest bare frequency (keeps the augmented generator
/// balanced).
pub struct LindbladSolver {
    layout: HilbertLayout,
    liouvillian: Liouvillian,
    labels: Vec<ChannelLabel>,
    /// Indices into `labels` of the channels with a non-zero rate.
    active: Vec<usize>,
    /// Scaled rows for the heat of each active channel, then the work.
    flux_rows: Vec<Vec<Complex64>>,
    battery_row: Vec<Complex64>,
    excited_row: Vec<Complex64>,
    ancilla_row: Vec<Complex64>,
    fc_row: Vec<Complex64>,
    scale: f64,
    spectral_scale: f64,
    rho0: DensityMatrix,
    trace0: f64,
}

impl LindbladSolver {
    pub fn new(
        h: &ComplexMatrix,
        channels: &[LindbladChannel],
        rho0: &DensityMatrix,
        bare: &BareEnergies,
    ) -> Result<Self> {
        let dim = rho0.dim();
        if h.nrows() != dim || h.ncols() != dim {
            return usage(format!("Hamiltonian is {}x{} but state dimension is {dim}", h.nrows(), h.ncols()));
        }
        let liouvillian = Liouvillian::new(h, channels, rho0.matrix())?;
        let layout = rho0.layout().clone();
        let h0 = bare.total_operator(&layout);
        let scale = bare.scale();
        let inv = Complex64::new(1.0 / scale, 0.0);

        let mut flux_rows = Vec::new();
        let mut active = Vec::new();
        for (k, ch) in channels.iter().enumerate() {
            if ch.rate > 0.0 {
                let l = &ch.jump;
                let ld = l.adjoint();
                let ldl = &ld * l;
                // adjoint dissipator applied to H₀
                let adj = (&ld * &h0 * l * Complex64::new(2.0, 0.0) - &ldl * &h0 - &h0 * &ldl)
                    * Complex64::new(ch.rate, 0.0);
                flux_rows.push(liouvillian.functional(&(adj * inv)));
                active.push(k);
            }
        }
        let power = commutator(&h0, h) * -I;
        flux_rows.push(liouvillian.functional(&(power * inv)));

        let row_sum = |m: &ComplexMatrix| -> f64 {
            (0..m.nrows()).map(|i| m.row(i).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
        };
        let max_rate = channels.iter().map(|c| c.rate).fold(0.0, f64::max);
        let spectral_scale = row_sum(h).max(max_rate);

        Ok(Self {
            battery_row: liouvillian.functional(&bare.battery_operator(&layout)),
            excited_row: liouvillian.functional(
                &BareEnergies { omega_eg: 1.0, ..*bare }.battery_operator(&layout),
            ),
            ancilla_row: liouvillian.functional(&bare.ancilla_operator(&layout)),
            fc_row: liouvillian.functional(&bare.fc_operator(&layout)),
            layout,
            liouvillian,
            labels: channels.iter().map(|c| c.label).collect(),
            active,
            flux_rows,
            scale,
            spectral_scale,
            trace0: rho0.trace(),
            rho0: rho0.clone(),
        })
    }

    pub fn liouvillian(&self) -> &Liouvillian {
        &self.liouvillian
    }

    pub fn layout(&self) -> &HilbertLayout {
        &self.layout
    }

    fn n_state(&self) -> usize {
        self.liouvillian.len()
    }

    pub fn augmented_len(&self) -> usize {
        self.n_state() + self.flux_rows.len()
    }

    /// Augmented state at `t = 0` (all integrals zero).
    pub fn initial_state(&self) -> DVector<Complex64> {
        let mut y = DVector::zeros(self.augmented_len());
        let v = self.liouvillian.vectorize(self.rho0.matrix());
        y.rows_mut(0, self.n_state()).copy_from(&v);
        y
    }

    /// Dense augmented generator `[[L, 0], [C, 0]]`.
    pub fn augmented_generator(&self) -> ComplexMatrix {
        let n = self.n_state();
        let mut a = ComplexMatrix::zeros(self.augmented_len(), self.augmented_len());
        a.view_mut((0, 0), (n, n)).copy_from(&self.liouvillian.dense());
        for (f, row) in self.flux_rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                a[(n + f, c)] = v;
            }
        }
        a
    }

    /// `exp(A dt)` for the augmented generator.
    pub fn propagator(&self, dt: f64) -> ComplexMatrix {
        (self.augmented_generator() * Complex64::new(dt, 0.0)).exp()
    }

    /// Default RK4 step `(50 · max(‖H‖, max Γ))⁻¹`.
    pub fn default_step(&self) -> f64 {
        1.0 / (50.0 * self.spectral_scale.max(f64::MIN_POSITIVE))
    }

    fn rhs(&self, y: &[Complex64], out: &mut [Complex64]) {
        let n = self.n_state();
        let (state_out, flux_out) = out.split_at_mut(n);
        self.liouvillian.apply(&y[..n], state_out);
        for (o, row) in flux_out.iter_mut().zip(&self.flux_rows) {
            *o = row.iter().zip(&y[..n]).fold(ZERO, |acc, (a, b)| acc + a * b);
        }
    }

    fn rk4_step(&self, y: &[Complex64], h: f64, scratch: &mut Rk4Scratch) -> Vec<Complex64> {
        let len = y.len();
        let hc = Complex64::new(h, 0.0);
        let half = Complex64::new(0.5 * h, 0.0);
        self.rhs(y, &mut scratch.k1);
        for i in 0..len {
            scratch.tmp[i] = y[i] + half * scratch.k1[i];
        }
        self.rhs(&scratch.tmp, &mut scratch.k2);
        for i in 0..len {
            scratch.tmp[i] = y[i] + half * scratch.k2[i];
        }
        self.rhs(&scratch.tmp, &mut scratch.k3);
        for i in 0..len {
            scratch.tmp[i] = y[i] + hc * scratch.k3[i];
        }
        self.rhs(&scratch.tmp, &mut scratch.k4);
        let sixth = hc / 6.0;
        (0..len)
            .map(|i| y[i] + sixth * (scratch.k1[i] + 2.0 * scratch.k2[i] + 2.0 * scratch.k3[i] + scratch.k4[i]))
            .collect()
    }

    /// Advances `y` from `t0` by `span` with adaptive RK4. `step` carries the
    /// current step size between calls.
    pub fn rk4_advance(
        &self,
        y: &mut DVector<Complex64>,
        t0: f64,
        span: f64,
        step: &mut f64,
        local_tol: f64,
        min_step: f64,
        opts: &LindbladOptions,
        stats: &mut StepStats,
    ) -> Result<()> {
        let n = self.n_state();
        let h_cap = step.max(min_step);
        let mut scratch = Rk4Scratch::new(y.len());
        let mut t = 0.0;
        while t < span {
            let h = step.min(span - t);
            let full = self.rk4_step(y.as_slice(), h, &mut scratch);
            let mid = self.rk4_step(y.as_slice(), 0.5 * h, &mut scratch);
            let mut fine = self.rk4_step(&mid, 0.5 * h, &mut scratch);
            let err = full.iter().zip(&fine).take(n).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            let tr_before = self.liouvillian.trace(&y.as_slice()[..n]).re;
            let correction = self.liouvillian.symmetrize(&mut fine[..n]);
            let tr_after = self.liouvillian.trace(&fine[..n]).re;
            let step_drift = (tr_after - tr_before).abs();
            if err > local_tol || step_drift > opts.trace_tol || correction > opts.hermiticity_tol {
                stats.rejected += 1;
                *step = 0.5 * h;
                if *step < min_step {
                    return Err(Error::Integration {
                        t: t0 + t,
                        reason: format!(
                            "step {:.3e} s below minimum (local error {err:.3e}, trace drift {step_drift:.3e}, \
                             symmetrisation {correction:.3e})",
                            *step
                        ),
                    });
                }
                continue;
            }
            y.as_mut_slice().copy_from_slice(&fine);
            t += h;
            stats.steps += 1;
            stats.max_symmetrization = stats.max_symmetrization.max(correction);
            stats.max_trace_drift = stats.max_trace_drift.max((tr_after - self.trace0).abs());
            if err < local_tol / 64.0 && h == *step {
                *step = (2.0 * h).min(h_cap);
            }
        }
        Ok(())
    }

    pub fn matrix(&self, y: &DVector<Complex64>) -> ComplexMatrix {
        self.liouvillian.to_matrix(&y.as_slice()[..self.n_state()])
    }

    fn dot(row: &[Complex64], y: &DVector<Complex64>) -> f64 {
        row.iter().zip(y.iter()).fold(ZERO, |acc, (a, b)| acc + a * b).re
    }

    /// Excited-state population of the battery, `Σ_n ρ_{(e,n),(e,n)}`.
    pub fn excited_population(&self, y: &DVector<Complex64>) -> f64 {
        Self::dot(&self.excited_row, y)
    }

    pub fn trace(&self, y: &DVector<Complex64>) -> f64 {
        self.liouvillian.trace(&y.as_slice()[..self.n_state()]).re
    }

    /// Atomic populations (g, e, m) and `⟨b†b⟩`; absent factors read NaN.
    pub fn observables(&self, y: &DVector<Complex64>) -> ([f64; 3], f64) {
        let mut pops = [f64::NAN; 3];
        let mut mean_n = f64::NAN;
        let v = &y.as_slice()[..self.n_state()];
        let l = &self.liouvillian;
        match (self.layout.atom_dim(), self.layout.n_max()) {
            (Some(d), Some(n_max)) => {
                mean_n = 0.0;
                for (a, pop) in pops.iter_mut().enumerate().take(d) {
                    *pop = 0.0;
                    for n in 0..=n_max {
                        let k = self.layout.index(a, n);
                        let p = l.entry(v, k, k).re;
                        *pop += p;
                        mean_n += n as f64 * p;
                    }
                }
            }
            (Some(d), None) => {
                for (a, pop) in pops.iter_mut().enumerate().take(d) {
                    *pop = l.entry(v, a, a).re;
                }
            }
            (None, Some(n_max)) => {
                mean_n = (0..=n_max).map(|n| n as f64 * l.entry(v, n, n).re).sum();
            }
            (None, None) => {}
        }
        (pops, mean_n)
    }

    /// Ledger for the augmented state `y`.
    pub fn ledger(&self, y: &DVector<Complex64>) -> EnergyLedger {
        let y0 = self.initial_state();
        let n = self.n_state();
        let mut heat_by_channel: BTreeMap<ChannelLabel, f64> =
            self.labels.iter().map(|&l| (l, 0.0)).collect();
        for (f, &k) in self.active.iter().enumerate() {
            *heat_by_channel.entry(self.labels[k]).or_insert(0.0) += HBAR * self.scale * y[n + f].re;
        }
        let w_drive = HBAR * self.scale * y[n + self.active.len()].re;
        let u = |row: &[Complex64], y: &DVector<Complex64>| HBAR * Self::dot(row, y);
        let (ub, ua, uf) = (u(&self.battery_row, y), u(&self.ancilla_row, y), u(&self.fc_row, y));
        EnergyLedger {
            heat_by_channel,
            u_battery: ub,
            u_ancilla: ua,
            u_fc: uf,
            delta_u_battery: ub - u(&self.battery_row, &y0),
            delta_u_ancilla: ua - u(&self.ancilla_row, &y0),
            delta_u_fc: uf - u(&self.fc_row, &y0),
            w_drive,
        }
    }

    /// Packages an augmented state as a validated result.
    pub fn finish(&self, y: &DVector<Complex64>, stats: StepStats, opts: &LindbladOptions) -> Result<LindbladResult> {
        let mut v: Vec<Complex64> = y.as_slice()[..self.n_state()].to_vec();
        let correction = self.liouvillian.symmetrize(&mut v);
        let rho = self.liouvillian.to_matrix(&v);
        let drift = (self.liouvillian.trace(&v).re - self.trace0).abs();
        let rho = DensityMatrix::with_trace_tol(self.layout.clone(), rho, drift.max(opts.trace_tol) + 1e-12)
            .map_err(|e| Error::Integration { t: f64::NAN, reason: format!("state left the physical set: {e}") })?;
        Ok(LindbladResult {
            rho,
            ledger: self.ledger(y),
            trace_drift: drift,
            trace_flagged: drift.max(stats.max_trace_drift) > opts.trace_tol,
            max_symmetrization: stats.max_symmetrization.max(correction),
            steps: stats.steps,
            rejected_steps: stats.rejected,
        })
    }

    /// Integrates to `t_final`, writing the optional trajectory dump.
    pub fn run(&self, t_final: f64, opts: &LindbladOptions) -> Result<LindbladResult> {
        if !(t_final.is_finite() && t_final >= 0.0) {
            return usage(format!("t_final must be finite and >= 0, got {t_final}"));
        }
        let mut y = self.initial_state();
        let mut stats = StepStats::default();
        let segments = opts.dump.as_ref().map_or(1, |d| d.samples.max(1));
        let dt = t_final / segments as f64;
        let mut writer = match &opts.dump {
            Some(d) => Some(self.dump_writer(d)?),
            None => None,
        };
        if let Some(w) = writer.as_mut() {
            self.dump_row(w, 0.0, &y)?;
        }
        if t_final > 0.0 {
            match opts.method {
                Method::Exponential { max_step } => {
                    let sub = max_step.map_or(1, |m| (dt / m).ceil().max(1.0) as usize);
                    let p = self.propagator(dt / sub as f64);
                    for s in 0..segments {
                        for _ in 0..sub {
                            y = &p * &y;
                            stats.steps += 1;
                        }
                        let mut v: Vec<Complex64> = y.as_slice()[..self.n_state()].to_vec();
                        stats.max_symmetrization = stats.max_symmetrization.max(self.liouvillian.symmetrize(&mut v));
                        y.rows_mut(0, self.n_state()).copy_from_slice(&v);
                        stats.max_trace_drift = stats.max_trace_drift.max((self.trace(&y) - self.trace0).abs());
                        if let Some(w) = writer.as_mut() {
                            self.dump_row(w, (s + 1) as f64 * dt, &y)?;
                        }
                    }
                }
                Method::Rk4 { initial_step, local_tol, min_step } => {
                    let mut step = initial_step.unwrap_or_else(|| self.default_step());
                    for s in 0..segments {
                        self.rk4_advance(&mut y, s as f64 * dt, dt, &mut step, local_tol, min_step, opts, &mut stats)?;
                        if let Some(w) = writer.as_mut() {
                            self.dump_row(w, (s + 1) as f64 * dt, &y)?;
                        }
                    }
                }
            }
        }
        if let Some(mut w) = writer {
            w.flush()?;
        }
        self.finish(&y, stats, opts)
    }

    fn dump_writer(&self, d: &TrajectoryDump) -> Result<csv::Writer<std::fs::File>> {
        let mut w = csv::Writer::from_path(&d.path)?;
        let mut header: Vec<String> = ["t_s", "p_g", "p_e", "p_m", "mean_n"].iter().map(|s| s.to_string()).collect();
        header.extend(self.labels.iter().map(|l| format!("q_{l}_J")));
        w.write_record(&header)?;
        Ok(w)
    }

    fn dump_row(&self, w: &mut csv::Writer<std::fs::File>, t: f64, y: &DVector<Complex64>) -> Result<()> {
        let (pops, mean_n) = self.observables(y);
        let ledger = self.ledger(y);
        let fmt = |x: f64| if x.is_nan() { String::new() } else { format!("{x:.11e}") };
        let mut row = vec![fmt(t)];
        row.extend(pops.iter().map(|&p| fmt(p)));
        row.push(fmt(mean_n));
        row.extend(self.labels.iter().map(|l| fmt(ledger.heat(*l))));
        w.write_record(&row)?;
        Ok(())
    }
}

struct Rk4Scratch {
    k1: Vec<Complex64>,
    k2: Vec<Complex64>,
    k3: Vec<Complex64>,
    k4: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl Rk4Scratch {
    fn new(len: usize) -> Self {
        Self {
            k1: vec![ZERO; len],
            k2: vec![ZERO; len],
            k3: vec![ZERO; len],
            k4: vec![ZERO; len],
            tmp: vec![ZERO; len],
        }
    }
}

/// Integrates the master equation from `rho0` for `t_final` seconds.
pub fn evolve_lindblad(
    h: &ComplexMatrix,
    channels: &[LindbladChannel],
    rho0: &DensityMatrix,
    t_final: f64,
    bare: &BareEnergies,
    opts: &LindbladOptions,
) -> Result<LindbladResult> {
    LindbladSolver::new(h, channels, rho0, bare)?.run(t_final, opts)
}
