//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every check prints its own verdict line, pass or fail.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use raman_battery::dynamics::{
    build_channels, evolve_lindblad, propagate_unitary, BareEnergies, ChannelLabel, LindbladChannel,
    LindbladOptions, ReservoirSpec, UnitaryPropagator,
};
use raman_battery::model::{build_h_eff, build_h_full_rotating, doublet_spectrum, ModelParams, ProtocolParams};
use raman_battery::observables::{battery_ergotropy, ergotropy_of, eta_closed_form, ChargingReport};
use raman_battery::protocols::{
    open_system_run, optimize_tau, run_protocol, sequential_charge, single_shot_quantum, Engine, ProtocolKind,
    ProtocolRun,
};
use raman_battery::quantum::density::DensityMatrix;
use raman_battery::quantum::layout::{HilbertLayout, Subsystem, E, G};
use raman_battery::quantum::matrix::{annihilation, diag, kron, max_abs, ComplexMatrix};
use raman_battery::quantum::thermal::{fock_weight, thermal_state_atom, thermal_state_fock, ThermalSpec};
use raman_battery::HBAR;
use raman_battery_cli::figures::{self, Fig2Options, OpenFigOptions, OpenRow};

type Verdict = (bool, String);

fn fig2(xi: f64) -> ModelParams {
    ModelParams::figure(xi).unwrap()
}

/// Drive weakened to `Ω_L = g_q/20`.
fn selective(xi: f64) -> ModelParams {
    let p = fig2(xi);
    ModelParams { drive_coupling: p.fc_coupling / 20.0, ..p }
}

fn thermal(p: &ModelParams, tbar: f64) -> ThermalSpec {
    if tbar == 0.0 {
        ThermalSpec::zero()
    } else {
        ThermalSpec::reduced(tbar, p.omega_m).unwrap()
    }
}

fn run(kind: ProtocolKind, p: ModelParams, tbar: f64) -> ProtocolRun {
    ProtocolRun::new(kind, p, thermal(&p, tbar))
}

fn tau_q(p: &ModelParams) -> f64 {
    PI / (2.0 * p.effective_coupling())
}

fn unit(p: &ModelParams) -> f64 {
    HBAR * p.omega_eg
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn proto(n: usize) -> ProtocolParams {
    ProtocolParams::new(n, true).unwrap()
}

fn joint_thermal(p: &ModelParams, atom_dim: usize, n_max: usize, tbar: f64) -> DensityMatrix {
    let spec = thermal(p, tbar);
    let levels = &p.atom_levels()[..atom_dim];
    let mut atom = thermal_state_atom(levels, &spec).unwrap();
    if atom_dim == 2 {
        // Same conditional {g,e} state the engines propagate.
        let pops = boltzmann3(p, tbar);
        let w = pops[G] + pops[E];
        atom = DensityMatrix::diagonal(HilbertLayout::atom(2).unwrap(), &[pops[G] / w, pops[E] / w]).unwrap();
    }
    let fock = thermal_state_fock(p.omega_q(), &spec, n_max, 1.0).unwrap();
    DensityMatrix::product(&atom, &fock).unwrap()
}

fn boltzmann3(p: &ModelParams, tbar: f64) -> [f64; 3] {
    run(ProtocolKind::QuantumSingleShot, *p, tbar).atom_populations()
}

fn selective_flip_exactness() -> Verdict {
    let p = selective(99.0);
    let r = run(ProtocolKind::QuantumSingleShot, p, 0.1);
    let pops = r.atom_populations();
    let n_max = r.resolved_n_max();
    let layout = HilbertLayout::joint(2, n_max).unwrap();
    let rho0 = joint_thermal(&p, 2, n_max, 0.1);
    let fock = rho0.partial_trace(Subsystem::Fock).unwrap();
    let w = pops[G] + pops[E];
    let (pg, pe) = (pops[G] / w, pops[E] / w);
    let h = build_h_eff(&p, &r.proto, &layout).unwrap();
    let rho = propagate_unitary(&h, &rho0, tau_q(&p)).unwrap();
    let mut want = rho0.matrix().clone();
    want[(layout.index(G, 0), layout.index(G, 0))] = (pe * fock.population(1)).into();
    want[(layout.index(E, 1), layout.index(E, 1))] = (pg * fock.population(0)).into();
    let entry_dev = max_abs(&(rho.matrix() - want));

    let report = single_shot_quantum(&r.clone().with_engine(Engine::EffNumeric).with_tau(tau_q(&p))).unwrap();
    let p_n = |n| fock_weight(n, p.omega_q(), &r.thermal);
    let formula = (p_n(0) * pops[G] - pops[E] * p_n(1)) * unit(&p);
    let du_dev = rel(report.delta_u_battery, formula);
    (
        entry_dev < 1e-6 && du_dev < 1e-8,
        format!("entrywise {entry_dev:.2e} (tol 1e-6), delta_u relative {du_dev:.2e} (tol 1e-8)"),
    )
}

fn closed_form_oscillation() -> Verdict {
    let mut worst: f64 = 0.0;
    for p in [fig2(99.0), selective(99.0)] {
        let n_max = 7;
        let layout = HilbertLayout::joint(2, n_max).unwrap();
        for target in [1, 2] {
            let pr = proto(target);
            let prop = UnitaryPropagator::new(&build_h_eff(&p, &pr, &layout).unwrap()).unwrap();
            for n in 0..=5 {
                let d = doublet_spectrum(&p, &pr, n);
                let state = prop.prepare(&DensityMatrix::basis(layout.clone(), layout.index(G, n)).unwrap()).unwrap();
                for k in 1..=20 {
                    let t = k as f64 * 0.1 * tau_q(&p);
                    let got = state.at(t).unwrap().population(layout.index(E, n + 1));
                    worst = worst.max((got - d.amplitude * (d.rabi * t).sin().powi(2)).abs());
                }
            }
        }
    }
    (worst < 1e-9, format!("max |P - A sin^2| = {worst:.2e} (tol 1e-9)"))
}

fn effective_model_validity() -> Verdict {
    let p = fig2(99.0);
    let base = run(ProtocolKind::QuantumSingleShot, p, 0.1);
    let (tau, _) = optimize_tau(&base, None, 400).unwrap();
    let at = |e: Engine| single_shot_quantum(&base.clone().with_engine(e).with_tau(tau)).unwrap();
    let (eff, full) = (at(Engine::EffNumeric), at(Engine::FullNumeric));
    let gap = rel(full.delta_u_battery, eff.delta_u_battery);
    let n_max = full.diagnostics.n_max;
    (gap < 0.02 && n_max <= 12, format!("relative gap {gap:.3e} (tol 2e-2), n_max {n_max}"))
}

fn advantage_threshold() -> Verdict {
    let mut ok = true;
    let mut cells = Vec::new();
    for xi in [0.5, 0.9, 1.1, 2.0, 10.0, 99.0] {
        let p = selective(xi);
        let r = single_shot_quantum(&run(ProtocolKind::QuantumSingleShot, p, 0.1).with_tau(tau_q(&p))).unwrap();
        ok &= if xi < 1.0 { r.k_q <= 0.0 } else { r.k_q > 0.0 };
        let ns = single_shot_quantum(&run(ProtocolKind::QuantumSingleShot, fig2(xi), 0.1)).unwrap();
        cells.push(format!("{xi}: {:.3e} [{:.3e}]", r.k_q, ns.k_q));
    }
    (ok, format!("selective K_q [non-selective, informational] {}", cells.join(", ")))
}

fn sequential_full_charge() -> Verdict {
    let p = fig2(99.0);
    let r = run(ProtocolKind::QuantumSequential, p, 0.4);
    let report = sequential_charge(&r).unwrap();
    let pops = r.atom_populations();
    let p0 = fock_weight(0, p.omega_q(), &r.thermal);
    let dev = ((report.delta_u_battery - report.delta_u_classical) / unit(&p) - pops[E] * p0).abs();

    let excited = DensityMatrix::basis(HilbertLayout::atom(3).unwrap(), E).unwrap();
    let mut cold = 0.0f64;
    for engine in [Engine::Analytic, Engine::EffNumeric] {
        let r0 = sequential_charge(&run(ProtocolKind::QuantumSequential, p, 0.0).with_engine(engine)).unwrap();
        cold = cold.max(r0.battery.trace_distance(&excited).unwrap());
    }
    (
        dev < 1e-6 && cold < 1e-9,
        format!("M = {}, excess deviation {dev:.2e} (tol 1e-6), T=0 distance to excited {cold:.2e} (tol 1e-9)", report.step_delta_u.len()),
    )
}

fn fig2_csv_rows() -> Vec<(f64, f64)> {
    let opts = Fig2Options::default();
    let rows = figures::fig2_rows(&opts);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig2.csv");
    figures::fig2_table(&rows, opts.precision).write_path(&path).unwrap();
    let mut rdr = csv::Reader::from_path(&path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (xi, eta) = (col("xi"), col("eta"));
    rdr.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[xi].parse().unwrap(), rec[eta].parse().unwrap())
        })
        .collect()
}

fn efficiency_identity() -> Verdict {
    let mut worst: f64 = 0.0;
    for xi in [0.5, 1.5, 5.0, 20.0, 99.0] {
        for tbar in [0.05, 0.1, 0.2, 0.4, 0.8] {
            for engine in [Engine::Analytic, Engine::EffNumeric] {
                let r = single_shot_quantum(&run(ProtocolKind::QuantumSingleShot, fig2(xi), tbar).with_engine(engine))
                    .unwrap();
                worst = worst.max((r.ergotropy / r.work_in - eta_closed_form(xi, r.k_q)).abs());
            }
        }
    }
    let rows = fig2_csv_rows();
    let outside = rows.iter().filter(|(xi, eta)| !(*eta > 0.0 && *eta <= 2.0 / (1.0 + xi) * (1.0 + 1e-12))).count();
    (
        worst < 1e-9 && outside == 0 && !rows.is_empty(),
        format!("identity max deviation {worst:.2e} (tol 1e-9), {outside} of {} CSV rows outside the bound", rows.len()),
    )
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

fn ergotropy_properties() -> Verdict {
    // Thermal states: atom alone, and atom with the mode.
    let mut thermal_worst: f64 = 0.0;
    for xi in [0.5, 99.0] {
        let p = fig2(xi);
        let levels: Vec<f64> = p.atom_levels().iter().map(|e| e / p.omega_m).collect();
        for tbar in [0.05, 0.4, 3.0] {
            let spec = ThermalSpec::reduced(tbar, 1.0).unwrap();
            let atom = thermal_state_atom(&levels, &spec).unwrap();
            thermal_worst = thermal_worst.max(ergotropy_of(atom.matrix(), &diag(&levels)).unwrap());
            let wq = p.omega_q() / p.omega_m;
            let n_max = 8;
            let fock = thermal_state_fock(wq, &spec, n_max, 1.0).unwrap();
            let joint = DensityMatrix::product(&atom, &fock).unwrap();
            let h = kron(&diag(&levels), &ComplexMatrix::identity(n_max + 1, n_max + 1))
                + kron(&ComplexMatrix::identity(3, 3), &diag(&(0..=n_max).map(|n| n as f64 * wq).collect::<Vec<_>>()));
            thermal_worst = thermal_worst.max(ergotropy_of(joint.matrix(), &h).unwrap());
            let b = battery_ergotropy(&thermal_state_atom(&p.atom_levels(), &ThermalSpec::reduced(tbar, p.omega_m).unwrap()).unwrap(), p.omega_eg)
                .unwrap();
            thermal_worst = thermal_worst.max(b / unit(&p));
        }
    }

    // 2ΔU − ℰ^c on protocol outputs.
    let mut ident_worst: f64 = 0.0;
    let mut outputs = 0;
    for xi in [2.0, 99.0] {
        let p = fig2(xi);
        for tbar in [0.1, 0.4] {
            let mut reports: Vec<ChargingReport> = Vec::new();
            for engine in [Engine::Analytic, Engine::EffNumeric] {
                reports.push(run_protocol(&run(ProtocolKind::Classical, p, tbar).with_engine(engine), None).unwrap());
                reports.push(single_shot_quantum(&run(ProtocolKind::QuantumSingleShot, p, tbar).with_engine(engine)).unwrap());
            }
            reports.push(sequential_charge(&run(ProtocolKind::QuantumSequential, p, tbar)).unwrap());
            for r in &reports {
                ident_worst = ident_worst.max((r.ergotropy - (2.0 * r.delta_u_battery - r.delta_u_classical)).abs() / unit(&p));
                outputs += 1;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let perms = permutations(4);
    let mut perm_worst: f64 = 0.0;
    for _ in 0..100 {
        let raw: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let pops: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let levels: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let e0: f64 = pops.iter().zip(&levels).map(|(p, e)| p * e).sum();
        let e_min = perms
            .iter()
            .map(|perm| perm.iter().enumerate().map(|(k, &j)| pops[j] * levels[k]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        perm_worst = perm_worst.max((ergotropy_of(&diag(&pops), &diag(&levels)).unwrap() - (e0 - e_min)).abs());
    }
    (
        thermal_worst < 1e-12 && ident_worst < 1e-9 && perm_worst < 1e-9,
        format!(
            "thermal {thermal_worst:.2e} (tol 1e-12), identity {ident_worst:.2e} over {outputs} outputs (tol 1e-9), brute force {perm_worst:.2e} (tol 1e-9)"
        ),
    )
}

fn lindblad_correctness() -> Verdict {
    let p = fig2(99.0);
    let bare = BareEnergies::from_params(&p);
    let t = tau_q(&p);

    // Empty channel set against unitary propagation.
    let rho0 = joint_thermal(&p, 2, 6, 0.4);
    let h = build_h_eff(&p, &proto(1), rho0.layout()).unwrap();
    let me = evolve_lindblad(&h, &[], &rho0, t, &bare, &LindbladOptions::default()).unwrap();
    let mut empty = max_abs(&(me.rho.matrix() - propagate_unitary(&h, &rho0, t).unwrap().matrix()));
    let rho0 = joint_thermal(&p, 3, 5, 0.4);
    let h = build_h_full_rotating(&p, &proto(1), rho0.layout()).unwrap();
    let me = evolve_lindblad(&h, &[], &rho0, t, &bare, &LindbladOptions::exponential()).unwrap();
    empty = empty.max(max_abs(&(me.rho.matrix() - propagate_unitary(&h, &rho0, t).unwrap().matrix())));

    // One decaying mode.
    let gamma = 40.0;
    let n_max = 3;
    let ch = LindbladChannel::new(ChannelLabel::Minus, annihilation(n_max), gamma).unwrap();
    let rho0 = DensityMatrix::basis(HilbertLayout::fock(n_max).unwrap(), 1).unwrap();
    let zero = ComplexMatrix::zeros(n_max + 1, n_max + 1);
    let mut decay: f64 = 0.0;
    for t in [0.002, 0.01, 0.03, 0.06] {
        let r = evolve_lindblad(&zero, std::slice::from_ref(&ch), &rho0, t, &bare, &LindbladOptions::default()).unwrap();
        decay = decay.max((r.rho.population(1) - (-2.0 * gamma * t).exp()).abs());
    }

    // Thermalisation with every channel and no drive.
    let tbar = 1.5;
    let n_max = 30;
    let spec = thermal(&p, tbar);
    let layout = HilbertLayout::joint(3, n_max).unwrap();
    let g0 = p.effective_coupling();
    let chans = build_channels(&p, &ReservoirSpec::thermal(g0, &p, &spec).unwrap(), &layout).unwrap();
    let start = DensityMatrix::basis(layout.clone(), layout.index(G, 0)).unwrap();
    let h = ComplexMatrix::zeros(layout.dim(), layout.dim());
    let relaxed = evolve_lindblad(&h, &chans, &start, 10.0 / g0, &bare, &LindbladOptions::default()).unwrap();
    let target = joint_thermal(&p, 3, n_max, tbar);
    let distance = relaxed.rho.trace_distance(&target).unwrap();

    (
        empty < 1e-8 && decay < 1e-6 && distance < 1e-3,
        format!(
            "empty channels {empty:.2e} (tol 1e-8), decay {decay:.2e} (tol 1e-6), thermalisation distance {distance:.2e} (tol 1e-3, {} channels)",
            chans.len()
        ),
    )
}

struct OpenRuns {
    rows: Vec<OpenRow>,
    /// `(T̄, K_q, closure residual)` of master-equation runs at zero rate.
    zero_rate: Vec<(f64, f64, Option<f64>)>,
    g0: f64,
    omega_m: f64,
}

fn open_runs() -> OpenRuns {
    let opts = OpenFigOptions::default();
    let rows = figures::open_rows(&opts);
    let p = fig2(opts.xi);
    let zero_rate = [0.05, 0.1]
        .iter()
        .map(|&tbar| {
            let r = run(ProtocolKind::OpenSystem, p, tbar).with_n_max(opts.n_max).with_trunc_eps(1.0);
            let report = open_system_run(&r, &ReservoirSpec::thermal(0.0, &p, &r.thermal).unwrap()).unwrap();
            (tbar, report.k_q, report.diagnostics.closure_residual)
        })
        .collect();
    OpenRuns { rows, zero_rate, g0: p.effective_coupling(), omega_m: p.omega_m }
}

fn open_system_orderings(runs: &OpenRuns) -> Verdict {
    let reference = |tbar: f64| {
        runs.rows.iter().find(|r| r.engine == Engine::EffNumeric && (r.tbar - tbar).abs() < 1e-12).map(|r| r.k_q)
    };
    let mut limit_worst: f64 = 0.0;
    let mut limit_cells = Vec::new();
    for &(tbar, k, _) in &runs.zero_rate {
        let k_ref = reference(tbar).unwrap_or(f64::NAN);
        let d = rel(k, k_ref);
        limit_worst = if d.is_nan() { f64::INFINITY } else { limit_worst.max(d) };
        limit_cells.push(format!("T̄={tbar}: {k:.6} vs {k_ref:.6}"));
    }

    let mut tbars: Vec<f64> = runs.rows.iter().map(|r| r.tbar).collect();
    tbars.dedup();
    let mut violations = Vec::new();
    for &tbar in tbars.iter().filter(|&&t| (0.1 - 1e-9..=1.0 + 1e-9).contains(&t)) {
        let ks: Vec<(f64, f64)> = runs
            .rows
            .iter()
            .filter(|r| r.engine == Engine::Lindblad && r.tbar == tbar)
            .map(|r| (r.gamma0, r.k_q))
            .collect();
        for w in ks.windows(2) {
            if !(w[1].1 < w[0].1) {
                violations.push(format!("T̄={tbar:.2}: {:.5} -> {:.5} at γ0/G0 {:.0e}->{:.0e}", w[0].1, w[1].1, w[0].0 / runs.g0, w[1].0 / runs.g0));
            }
        }
    }

    let best = runs
        .rows
        .iter()
        .filter(|r| r.engine == Engine::Lindblad && r.gamma0 <= 0.1 * runs.g0 * (1.0 + 1e-9))
        .map(|r| r.k_q)
        .fold(f64::NEG_INFINITY, f64::max);

    let errors = runs.rows.iter().filter(|r| r.status.starts_with("error")).count();
    (
        limit_worst < 1e-4 && violations.is_empty() && best > 30.0 && errors == 0,
        format!(
            "zero-rate limit relative {limit_worst:.2e} (tol 1e-4; {}), {} ordering violations [{}], max K_q at γ0 <= 0.1 G0 = {best:.2}, {errors} failed runs",
            limit_cells.join(", "),
            violations.len(),
            violations.join("; "),
        ),
    )
}

fn ledger_closure(runs: &OpenRuns) -> Verdict {
    let scale = HBAR * runs.omega_m;
    let residuals: Vec<Option<f64>> = runs
        .rows
        .iter()
        .filter(|r| r.engine == Engine::Lindblad)
        .map(|r| r.closure_residual)
        .chain(runs.zero_rate.iter().map(|z| z.2))
        .collect();
    let missing = residuals.iter().filter(|r| r.is_none()).count();
    let worst = residuals.iter().flatten().map(|r| r.abs() / scale).fold(0.0, f64::max);
    (
        missing == 0 && worst <= 1e-6,
        format!("{} runs, max |residual| = {worst:.2e} hbar*omega_m (tol 1e-6), {missing} without a ledger", residuals.len()),
    )
}

fn check(name: &str, budget: Duration, f: impl FnOnce() -> Verdict) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f));
    let elapsed = start.elapsed();
    let (ok, detail) = match outcome {
        Ok(v) => v,
        Err(e) => {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        }
    };
    let in_time = elapsed <= budget;
    let ok = ok && in_time;
    let timing = format!("{:.2} s of {} s", elapsed.as_secs_f64(), budget.as_secs());
    println!("[{}] {name}: {detail}; {timing}{}", if ok { "PASS" } else { "FAIL" }, if in_time { "" } else { " (over budget)" });
    ok
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let mut results = vec![
        check("selective flip exactness", secs(1), selective_flip_exactness),
        check("closed-form oscillation", secs(1), closed_form_oscillation),
        check("effective model validity", secs(10), effective_model_validity),
        check("single-shot advantage threshold", secs(30), advantage_threshold),
        check("sequential full-charge limit", secs(5), sequential_full_charge),
        check("efficiency identity", secs(60), efficiency_identity),
        check("ergotropy properties", secs(5), ergotropy_properties),
        check("master equation correctness", secs(60), lindblad_correctness),
    ];
    let start = Instant::now();
    let runs = catch_unwind(open_runs);
    let runs_time = start.elapsed();
    match runs {
        Ok(runs) => {
            let budget = secs(600).saturating_sub(runs_time);
            results.push(check("open-system orderings", budget, || open_system_orderings(&runs)));
            results.push(check("first-law closure", secs(1), || ledger_closure(&runs)));
        }
        Err(_) => {
            println!("[FAIL] open-system orderings: open-system runs panicked");
            println!("[FAIL] first-law closure: open-system runs panicked");
            results.extend([false, false]);
        }
    }
    println!("open-system runs took {:.1} s", runs_time.as_secs_f64());
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
