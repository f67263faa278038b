use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::path::{Path, PathBuf};
use std::process::Command;

use fcqkd_cli::commands::{table2_against, SCHEMA_VERSION};
use fcqkd_cli::fixture::{published_table, PrintedVerdict};
use fcqkd_core::protocol::BiasConstraint;
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn fcqkd(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_fcqkd"))
        .args(args)
        .output()
        .unwrap();
    Run {
        code: out.status.code().unwrap(),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn pair(alice: &str, bob: &str) -> String {
    format!("[alice]\n{alice}\n\n[bob]\n{bob}\n")
}

fn shipped(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
        .display()
        .to_string()
}

fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_owned)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn sweep(dir: &TempDir, body: &str) -> Vec<Vec<f64>> {
    let p = write_config(dir, "sweep.toml", body);
    let r = fcqkd(&["sweep", "--config", p.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (header, rows) = parse_csv(&r.stdout);
    assert_eq!(
        header,
        [
            "delta_phi_rad",
            "p_upper",
            "p_lower",
            "p_upper_closed",
            "p_lower_closed"
        ]
    );
    rows
}

fn cos2(x: f64) -> f64 {
    (x / 2.0).cos().powi(2)
}

#[test]
fn um_pm_sweep_follows_b92_law() {
    let dir = TempDir::new().unwrap();
    let rows = sweep(
        &dir,
        &pair(
            "kind = \"UM\"\nm = 0.1\npsi = 0.0",
            "kind = \"PM\"\nm = 0.05\npsi = 0.0",
        ),
    );
    assert_eq!(rows.len(), 64);
    for r in &rows {
        for v in &r[1..] {
            assert!((v - cos2(r[0])).abs() <= 1e-12, "{r:?}");
        }
    }
}

#[test]
fn um_am_sweep_follows_bb84_law() {
    let dir = TempDir::new().unwrap();
    let bob = format!("kind = \"AM\"\nm = 0.05\npsi = {FRAC_PI_4}");
    let body = pair("kind = \"UM\"\nm = 0.1\npsi = 0.0", &bob) + "[link]\nlink_phase_rad = 1.1\n";
    for r in sweep(&dir, &body) {
        let s2 = (r[0] / 2.0).sin().powi(2);
        assert!(
            (r[1] - cos2(r[0])).abs() <= 1e-12 && (r[3] - cos2(r[0])).abs() <= 1e-12,
            "{r:?}"
        );
        assert!(
            (r[2] - s2).abs() <= 1e-12 && (r[4] - s2).abs() <= 1e-12,
            "{r:?}"
        );
    }
}

#[test]
fn am_am_sweep_has_both_sidebands_in_phase() {
    let dir = TempDir::new().unwrap();
    let side = format!("kind = \"AM\"\nm = 0.08\npsi = {FRAC_PI_4}");
    for r in sweep(&dir, &pair(&side, &side)) {
        assert!(
            (r[1] - cos2(r[0])).abs() <= 1e-12 && (r[2] - cos2(r[0])).abs() <= 1e-12,
            "{r:?}"
        );
    }
}

#[test]
fn phi_b_sweep_reports_effective_phase() {
    let dir = TempDir::new().unwrap();
    let body = pair(
        "kind = \"UM\"\nm = 0.1\npsi = 0.0",
        "kind = \"PM\"\nm = 0.05\npsi = 0.0",
    ) + "[link]\nlink_phase_rad = 0.5\n[sweep]\nvariable = \"phi_b\"\nsteps = 4\n";
    let rows = sweep(&dir, &body);
    // UM-PM at ψ_A = 0 has Θ = 0, so ΔΦ = Φ_B + 0.5.
    for (i, r) in rows.iter().enumerate() {
        assert!((r[0] - (i as f64 * FRAC_PI_2 + 0.5)).abs() < 1e-12);
        assert!((r[1] - cos2(r[0])).abs() <= 1e-12);
    }
}

#[test]
fn csv_values_carry_seventeen_significant_digits() {
    let r = fcqkd(&["sweep", "--config", &shipped("um_pm_b92.toml")]);
    assert_eq!(r.code, 0);
    for line in r.stdout.lines().skip(1) {
        for field in line.split(',') {
            let mantissa = field.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(
                mantissa.chars().filter(char::is_ascii_digit).count(),
                17,
                "{field}"
            );
        }
    }
}

#[test]
fn json_sweep_and_out_file() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s.json");
    let r = fcqkd(&[
        "sweep",
        "--config",
        &shipped("um_pm_b92.toml"),
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.is_empty());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 64);
    assert!(v[0]["p_upper_closed"].is_number());
}

#[test]
fn unwritable_output_is_a_config_error() {
    let r = fcqkd(&[
        "sweep",
        "--config",
        &shipped("um_pm_b92.toml"),
        "--out",
        "/nonexistent/dir/x.csv",
    ]);
    assert_eq!(r.code, 2);
}

#[test]
fn degenerate_sweep_fails_validation() {
    let dir = TempDir::new().unwrap();
    let p = write_config(
        &dir,
        "d.toml",
        &pair(
            "kind = \"PM\"\nm = 0.0\npsi = 0.0",
            "kind = \"PM\"\nm = 0.0\npsi = 0.0",
        ),
    );
    let r = fcqkd(&["sweep", "--config", p.to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("degenerate"), "{}", r.stderr);
}

#[test]
fn config_rejections() {
    let dir = TempDir::new().unwrap();
    let base = pair(
        "kind = \"UM\"\nm = 0.1\npsi = 0.0",
        "kind = \"PM\"\nm = 0.05\npsi = 0.0",
    );
    let cases = [
        (
            "unknown key",
            base.clone() + "[link]\nrf_ghz = 15\nbogus = 1\n",
            "bogus",
        ),
        (
            "unknown section",
            base.clone() + "[extra]\nx = 1\n",
            "extra",
        ),
        (
            "index twice",
            pair(
                "kind = \"UM\"\nm = 0.1\nv_rf_volts = 0.2\npsi = 0.0",
                "kind = \"PM\"\nm = 0.05\npsi = 0.0",
            ),
            "only one",
        ),
        (
            "bias twice",
            pair(
                "kind = \"UM\"\nm = 0.1\npsi = 0.0\nv_dc_volts = 1.0",
                "kind = \"PM\"\nm = 0.05\npsi = 0.0",
            ),
            "only one",
        ),
        (
            "no index",
            pair(
                "kind = \"UM\"\npsi = 0.0",
                "kind = \"PM\"\nm = 0.05\npsi = 0.0",
            ),
            "required",
        ),
        (
            "bad kind",
            pair(
                "kind = \"XM\"\nm = 0.1\npsi = 0.0",
                "kind = \"PM\"\nm = 0.05\npsi = 0.0",
            ),
            "XM",
        ),
        (
            "negative index",
            pair(
                "kind = \"UM\"\nm = -0.1\npsi = 0.0",
                "kind = \"PM\"\nm = 0.05\npsi = 0.0",
            ),
            "m",
        ),
        ("zero steps", base.clone() + "[sweep]\nsteps = 0\n", "steps"),
        ("bad loss", base.clone() + "[link]\nloss = 2.0\n", "loss"),
    ];
    for (what, text, needle) in cases {
        let p = write_config(&dir, "bad.toml", &text);
        let r = fcqkd(&["sweep", "--config", p.to_str().unwrap()]);
        assert_eq!(r.code, 2, "{what}: {}", r.stderr);
        assert!(r.stderr.contains(needle), "{what}: {}", r.stderr);
    }
    let r = fcqkd(&[
        "sweep",
        "--config",
        dir.path().join("missing.toml").to_str().unwrap(),
    ]);
    assert_eq!(r.code, 2);
    assert_eq!(fcqkd(&["sweep"]).code, 2);
    assert_eq!(fcqkd(&["frobnicate"]).code, 2);
}

#[test]
fn voltages_resolve_with_default_half_wave_voltages() {
    let cfg = fcqkd_cli::RunConfig::parse(&pair(
        "kind = \"UM\"\nv_rf_volts = 0.175\nv_dc_volts = 2.75",
        "kind = \"AM\"\nv_pi_volts = 3.0\nv_rf_volts = 0.3\npsi = 0.2",
    ))
    .unwrap();
    let a = cfg.alice_spec().unwrap();
    let b = cfg.bob_spec().unwrap();
    assert!((a.index() - PI * 0.175 / 5.5).abs() < 1e-15);
    assert!((a.psi() - FRAC_PI_4).abs() < 1e-15);
    assert!((b.index() - PI * 0.1).abs() < 1e-15);
    assert_eq!(cfg.link.rf_ghz, 15.0);
    assert_eq!(cfg.source.wavelength_nm, 1550.0);
}

fn spectrum(config: &str, dphi: f64) -> Vec<(f64, f64)> {
    let r = fcqkd(&[
        "spectrum",
        "--config",
        config,
        "--delta-phi",
        &dphi.to_string(),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (header, rows) = parse_csv(&r.stdout);
    assert_eq!(header, ["offset_ghz", "power_db_rel_carrier"]);
    rows.into_iter().map(|r| (r[0], r[1])).collect()
}

fn line(s: &[(f64, f64)], ghz: f64) -> f64 {
    s.iter().find(|(f, _)| (f - ghz).abs() < 1e-6).unwrap().1
}

#[test]
fn spectrum_b92_sidebands_vanish_at_pi() {
    let cfg = shipped("um_pm_b92.toml");
    let s0 = spectrum(&cfg, 0.0);
    assert_eq!(line(&s0, 0.0), 0.0);
    assert!(line(&s0, 15.0) > -50.0 && line(&s0, -15.0) > -50.0);
    let s = spectrum(&cfg, PI);
    assert!(line(&s, 15.0) < -50.0 && line(&s, -15.0) < -50.0);
    assert!(s.iter().all(|(_, db)| *db >= -300.0));
}

#[test]
fn spectrum_order_flag_sets_span() {
    let r = fcqkd(&[
        "spectrum",
        "--config",
        &shipped("um_pm_b92.toml"),
        "--order",
        "12",
    ]);
    assert_eq!(r.code, 0);
    assert_eq!(r.stdout.lines().count(), 1 + 25);
    let r = fcqkd(&[
        "spectrum",
        "--config",
        &shipped("um_pm_b92.toml"),
        "--order",
        "2",
    ]);
    assert_eq!(r.code, 1, "{}", r.stderr);
}

#[test]
fn table2_reports_the_ratio_misprint_and_nothing_else() {
    let r = fcqkd(&["table2"]);
    assert_eq!(r.code, 1);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["schema_version"], SCHEMA_VERSION);
    assert_eq!(v["rows"].as_array().unwrap().len(), 9);
    let mismatches = v["mismatches"].as_array().unwrap();
    assert_eq!(mismatches.len(), 1, "{mismatches:?}");
    assert_eq!(mismatches[0]["row"], "AM-UM");
    assert_eq!(mismatches[0]["cell"], "ratio");
    assert!(r.stderr.contains("AM-UM ratio"));
    let um_um = &v["rows"][0];
    assert_eq!(um_um["alice_kind"], "UM");
    assert_eq!(um_um["b92"]["feasible"], true);
    assert_eq!(um_um["bb84"]["feasible"], true);
}

#[test]
fn table2_passes_with_mirrored_am_um_ratio() {
    let mut fixture = published_table();
    let row = fixture
        .iter_mut()
        .find(|f| f.ratio_text.contains("tan ψ_A|") && f.theta_text.contains("ψ_B"))
        .unwrap();
    row.ratio = |a, b| 1.0 / (2.0 * b.cos() * a.tan());
    let report = table2_against(32, &fixture).unwrap();
    assert!(report.pass, "{:?}", report.mismatches);
}

#[test]
fn perturbed_fixture_names_the_cell() {
    let mut fixture = published_table();
    fixture[1].bb84 = PrintedVerdict::Ok {
        constraint: BiasConstraint::Unconstrained,
    };
    fixture[5].theta = |a, _| a;
    let report = table2_against(16, &fixture).unwrap();
    assert!(!report.pass);
    let cells: Vec<_> = report
        .mismatches
        .iter()
        .map(|m| (m.row.as_str(), m.cell))
        .collect();
    assert!(cells.contains(&("AM-AM", "bb84")), "{cells:?}");
    assert!(cells.contains(&("UM-PM", "theta")), "{cells:?}");
    fixture.remove(2);
    let report = table2_against(16, &fixture).unwrap();
    assert!(report
        .mismatches
        .iter()
        .any(|m| m.row == "PM-PM" && m.cell == "row"));
}

#[test]
fn table2_json_only() {
    assert_eq!(fcqkd(&["table2", "--format", "csv"]).code, 2);
    assert_eq!(fcqkd(&["table2", "--grid", "1"]).code, 2);
}

#[test]
fn verify_regime_guard_and_report() {
    let r = fcqkd(&["verify", "--max-m", "0.01"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(v["pairs"].as_array().unwrap().len(), 9);
    for p in v["pairs"].as_array().unwrap() {
        let ratio = p["scaling_ratio"].as_f64().unwrap();
        assert!((50.0..=200.0).contains(&ratio));
    }
    let r = fcqkd(&["verify", "--max-m", "0.3"]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("outside the supported regime"));
}

#[test]
fn qkd_infeasible_configs_name_the_condition() {
    let dir = TempDir::new().unwrap();
    let mc = "[montecarlo]\nprotocol = \"BB84\"\nmu = 0.1\nn_pulses = 1000\n";
    let side = format!("kind = \"AM\"\nm = 0.08\npsi = {FRAC_PI_4}");
    let p = write_config(&dir, "am.toml", &(pair(&side, &side) + mc));
    let r = fcqkd(&["qkd", "--config", p.to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("theta-mismatch"), "{}", r.stderr);

    let alice = format!("kind = \"UM\"\nm = 0.1\npsi = {FRAC_PI_2}");
    let body = pair(
        &alice,
        &format!("kind = \"AM\"\nm = 0.05\npsi = {FRAC_PI_4}"),
    ) + &mc.replace("BB84", "B92");
    let p = write_config(&dir, "um.toml", &body);
    let r = fcqkd(&["qkd", "--config", p.to_str().unwrap()]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("zero-visibility"), "{}", r.stderr);

    let p = write_config(&dir, "nomc.toml", &pair(&side, &side));
    assert_eq!(fcqkd(&["qkd", "--config", p.to_str().unwrap()]).code, 2);
}

#[test]
fn qkd_is_deterministic_per_seed() {
    let cfg = shipped("um_am_bb84.toml");
    let a = fcqkd(&["qkd", "--config", &cfg]);
    let b = fcqkd(&["qkd", "--config", &cfg]);
    assert_eq!(a.code, 0, "{}", a.stderr);
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_str(&a.stdout).unwrap();
    assert_eq!(v["seed"], 7);
    assert!(v["stats"]["qber"].as_f64().unwrap() <= 0.005);
    let c = fcqkd(&["qkd", "--config", &cfg, "--seed", "8"]);
    assert_ne!(a.stdout, c.stdout);
    let keys = [
        "schema_version",
        "seed",
        "source",
        "stats",
        "protocol",
        "sent",
        "conclusive",
        "sifted_bits",
        "errors",
        "qber",
        "basis_mismatch",
        "clicks",
    ];
    let pos: Vec<usize> = keys
        .iter()
        .map(|k| a.stdout.find(&format!("\"{k}\"")).unwrap())
        .collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]), "{pos:?}");
}

#[test]
fn shipped_configs_load() {
    for name in ["um_pm_b92.toml", "um_am_bb84.toml", "um_um_bb84.toml"] {
        let r = fcqkd(&["qkd", "--config", &shipped(name)]);
        assert_eq!(r.code, 0, "{name}: {}", r.stderr);
    }
}
