use std::sync::OnceLock;

use raman_battery::model::ModelParams;
use raman_battery::protocols::{single_shot_quantum, Engine, ProtocolKind, ProtocolRun};
use raman_battery::quantum::thermal::ThermalSpec;
use raman_battery_cli::figures::{self, Fig2Options, Fig2Row, OpenFigOptions, OpenRow};

fn fig2() -> &'static [Fig2Row] {
    static ROWS: OnceLock<Vec<Fig2Row>> = OnceLock::new();
    ROWS.get_or_init(|| figures::fig2_rows(&Fig2Options::default()))
}

fn series(tbar: f64) -> Vec<&'static Fig2Row> {
    fig2().iter().filter(|r| r.tbar == tbar).collect()
}

#[test]
fn fig2_rows_cover_the_grid_and_pass_checks() {
    let rows = fig2();
    assert_eq!(rows.len(), 2 * 121);
    let bad: Vec<_> = rows.iter().filter(|r| r.status != "ok").collect();
    assert!(bad.is_empty(), "{bad:?}");
    let xs: Vec<f64> = series(0.1).iter().map(|r| r.xi).collect();
    assert!((xs[0] - 0.5).abs() < 1e-12 && (xs[120] - 200.0).abs() < 1e-9);
    assert!(xs.iter().filter(|&&x| x >= 1.0).count() >= 100);
}

#[test]
fn fig2_efficiency_within_bound() {
    for r in fig2() {
        assert!(r.eta > 0.0 && r.eta <= 2.0 / (1.0 + r.xi) * (1.0 + 1e-12), "ξ={} T̄={}: η={}", r.xi, r.tbar, r.eta);
    }
}

#[test]
fn fig2_gain_grows_with_temperature() {
    let cold = series(0.1);
    let hot = series(0.4);
    let losing: Vec<String> = cold
        .iter()
        .zip(&hot)
        .filter(|(c, h)| !(h.k_q > c.k_q))
        .map(|(c, h)| format!("ξ={:.3}: {:.3e} vs {:.3e}", c.xi, c.k_q, h.k_q))
        .collect();
    assert!(losing.is_empty(), "K_q(0.4) <= K_q(0.1) at {} rows, e.g. {:?}", losing.len(), losing.first());
}

#[test]
fn fig2_gain_not_positive_just_below_unit_xi() {
    let below = series(0.1).into_iter().filter(|r| r.xi < 1.0).last().unwrap();
    assert!(below.k_q <= 0.0, "ξ={:.4}: K_q = {:.3e}", below.xi, below.k_q);
}

#[test]
fn fig2_gain_is_large_at_high_xi() {
    let top = series(0.1).into_iter().last().unwrap();
    assert!(top.k_q > 10.0, "{top:?}");
    let xi99 = series(0.4).into_iter().min_by(|a, b| (a.xi - 99.0).abs().total_cmp(&(b.xi - 99.0).abs())).unwrap();
    assert!(xi99.k_q > 1.0);
}

fn small_open() -> (OpenFigOptions, &'static [OpenRow]) {
    static ROWS: OnceLock<Vec<OpenRow>> = OnceLock::new();
    let g0 = ModelParams::figure(99.0).unwrap().effective_coupling();
    let opts = OpenFigOptions { tbars: vec![0.1, 0.5], gamma0: vec![1e-3 * g0, 1e-1 * g0, g0], n_max: 8, ..OpenFigOptions::default() };
    let rows = ROWS.get_or_init(|| figures::open_rows(&opts));
    (opts, rows)
}

#[test]
fn open_rows_are_sorted_with_unitary_reference() {
    let (opts, rows) = small_open();
    assert_eq!(rows.len(), opts.tbars.len() * (1 + opts.gamma0.len()));
    assert!(rows.windows(2).all(|w| (w[0].tbar, w[0].gamma0) < (w[1].tbar, w[1].gamma0)));
    for r in rows.iter().filter(|r| r.gamma0 == 0.0) {
        assert_eq!(r.engine, Engine::EffNumeric);
        let p = ModelParams::figure(opts.xi).unwrap();
        let run = ProtocolRun::new(ProtocolKind::QuantumSingleShot, p, ThermalSpec::reduced(r.tbar, p.omega_m).unwrap())
            .with_engine(Engine::EffNumeric);
        let direct = single_shot_quantum(&run).unwrap();
        assert!((r.k_q - direct.k_q).abs() < 1e-6 * direct.k_q.abs());
    }
    assert!(rows.iter().all(|r| r.status == "ok"), "{rows:?}");
}

#[test]
fn weak_decay_tracks_the_unitary_reference() {
    let (opts, rows) = small_open();
    let reference = rows.iter().find(|r| r.tbar == 0.1 && r.gamma0 == 0.0).unwrap();
    let weak = rows.iter().find(|r| r.tbar == 0.1 && r.gamma0 == opts.gamma0[0]).unwrap();
    // Within the three-level dressing correction of the reference.
    assert!((weak.k_q - reference.k_q).abs() < 1e-2 * reference.k_q, "{} vs {}", weak.k_q, reference.k_q);
}

#[test]
fn stronger_decay_lowers_the_gain() {
    let (opts, rows) = small_open();
    for &tbar in &opts.tbars {
        let ks: Vec<f64> = rows.iter().filter(|r| r.tbar == tbar && r.gamma0 > 0.0).map(|r| r.k_q).collect();
        assert!(ks.windows(2).all(|w| w[1] < w[0]), "T̄={tbar}: {ks:?}");
    }
}

#[test]
fn open_tables_have_expected_columns() {
    let (opts, rows) = small_open();
    let t3 = figures::fig3_table(rows, opts.precision);
    assert_eq!(t3.header, ["tbar", "gamma0", "k_q", "tau_star", "engine", "status"]);
    let t4 = figures::fig4_table(rows, opts.precision);
    assert_eq!(t4.header, ["tbar", "gamma0", "eta", "eta_corrected", "tau_star", "engine", "status"]);
    assert_eq!(t4.rows.len(), rows.len());
    // The unitary rows exchange no heat, so no corrected efficiency.
    for (r, cells) in rows.iter().zip(&t4.rows) {
        if r.gamma0 == 0.0 {
            assert_eq!(cells[3], "");
        }
    }
}

#[test]
fn fig_binaries_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig3.csv");
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_raman-battery"))
        .args(["fig3", "--tbar", "0.3", "--gamma0", "5", "--n-max", "6", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",ok")), "{text}");
}
