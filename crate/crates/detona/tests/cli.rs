use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("detona-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn detona(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_detona"));
    c.args(args);
    for (k, v) in env {
        c.env(k, v);
    }
    c.output().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn stderr_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(text.lines().last().unwrap_or("")).unwrap_or_else(|_| panic!("stderr: {text}"))
}

fn small() -> String {
    configs().join("small-amplitude.toml").display().to_string()
}

#[test]
fn unknown_key_exits_2_and_names_it() {
    let dir = scratch("unknown");
    let cfg = dir.join("bad.toml");
    let text = std::fs::read_to_string(small()).unwrap().replace("nu = 1.0", "nu = 1.0\nviscosity = 2.0");
    std::fs::write(&cfg, text).unwrap();
    let o = detona(&["endstates", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_json(&o);
    assert_eq!(e["error"], "config");
    assert_eq!(e["key"], "params.viscosity");
}

#[test]
fn missing_key_and_bad_override_exit_2() {
    let dir = scratch("missing");
    let cfg = dir.join("bad.toml");
    let text = std::fs::read_to_string(small()).unwrap().replace("kappa = 1.0\n", "");
    std::fs::write(&cfg, text).unwrap();
    let o = detona(&["endstates", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["key"], "params.kappa");

    let o = detona(&["endstates", "--config", &small(), "--out", dir.to_str().unwrap()], &[("DETONA_PARAMS__NU", "-1")]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["key"], "params.nu");

    let o = detona(&["endstates", "--config", "/nonexistent.toml"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_error_exits_1_with_kind() {
    let dir = scratch("runtime");
    // below the ignition threshold the burned state violates (T)
    let o = detona(&["endstates", "--config", &small(), "--out", dir.to_str().unwrap()], &[("DETONA_PARAMS__T_IGN", "5.0")]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr_json(&o);
    assert_eq!(e["error"], "constraint_violated");
    let m = read_json(&dir.join("manifest.json"));
    assert_eq!(m["status"], "error");
}

#[test]
fn synthetic_sweep_finds_crossing() {
    let dir = scratch("sweep");
    let cfg = configs().join("synthetic.toml");
    let o = detona(&["sweep", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--threads", "2"], &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c = read_json(&dir.join("crossing.json"));
    assert_eq!(c["found"], true);
    assert!((c["crossing"]["eps_star"].as_f64().unwrap() - 0.1).abs() < 1e-6);
    assert!((c["crossing"]["tau_star"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    let csv = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("eps,gamma,tau,residual,winding,verdict"));
    assert_eq!(csv.lines().count(), 22);
    let m = read_json(&dir.join("manifest.json"));
    assert_eq!(m["threads"], 2);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn endstates_profile_and_certificate_artifacts() {
    let dir = scratch("profile");
    for cmd in ["endstates", "profile", "certify"] {
        let o = detona(&[cmd, "--config", &small(), "--out", dir.to_str().unwrap()], &[]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let rh = std::fs::read_to_string(dir.join("rh.csv")).unwrap();
    assert_eq!(rh.lines().next().unwrap(), "tau,p_rayleigh,p_hugoniot,p_temperature,p_lax");
    let prof = std::fs::read_to_string(dir.join("profile.csv")).unwrap();
    assert_eq!(prof.lines().next().unwrap(), "x,tau,u,E,z,y,T,p");
    let c = read_json(&dir.join("certificate.json"));
    assert_eq!(c["all_pass"], true);
    let p = read_json(&dir.join("profile.json"));
    assert!(p["residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn json_config_matches_toml() {
    let dir = scratch("json");
    let table: toml::Table = toml::from_str(&std::fs::read_to_string(small()).unwrap()).unwrap();
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, serde_json::to_string(&table).unwrap()).unwrap();
    let a = dir.join("a");
    let b = dir.join("b");
    assert!(detona(&["endstates", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()], &[]).status.success());
    assert!(detona(&["endstates", "--config", &small(), "--out", b.to_str().unwrap()], &[]).status.success());
    assert_eq!(read_json(&a.join("manifest.json"))["config_hash"], read_json(&b.join("manifest.json"))["config_hash"]);
    assert_eq!(read_json(&a.join("endstates.json")), read_json(&b.join("endstates.json")));
}

#[test]
fn evans_on_small_amplitude_is_stable() {
    let dir = scratch("evans");
    // a reduced outer radius keeps this test short; the acceptance run uses the default
    let env = [("DETONA_STABILITY__RADIUS", "50.0"), ("DETONA_EVANS__DUALITY_SAMPLES", "1")];
    let o = detona(&["evans", "--config", &small(), "--out", dir.to_str().unwrap()], &env);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&dir.join("verdict.json"));
    assert_eq!(v["winding"], 0);
    assert_eq!(v["verdict"]["verdict"], "stable");
    assert_eq!(v["sign_consistent"], true);
    let contour = std::fs::read_to_string(dir.join("evans_contour.csv")).unwrap();
    assert_eq!(contour.lines().next().unwrap(), "lambda_re,lambda_im,d_re,d_im,conditioning");
}
