//! Batch front end: configuration, subcommands and run artifacts.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use num_complex::Complex64 as C64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bifurcation::{
    detect_hopf, evans_verdict, sweep_points, track_pair, winding_verdict, write_sweep_csv, EvansFamily, HopfOptions, RootTrajectory, SyntheticHopf, TrackOptions,
};
use crate::endstates::{construct_regime, endstate_eigenvalues, rh_diagram, solve_right_state, EndstatePair};
use crate::error::{DetonaError, Result};
use crate::evans::duality::duality_check;
use crate::evans::stability::{lopatinski_delta, stability_check, StabilityOptions};
use crate::model::{ModelParams, State};
use crate::profile::{solve_profile, transversality_gamma, Profile, ProfileOptions};
use crate::spectral::{build_system, consistent_splitting, essential_spectrum, kawashima_grid, kawashima_margin, xi_grid, Side};
use crate::structural_checks::{certify, CertifyOptions};
use crate::timesim::{detect_oscillation, run_perturbation, write_series_csv, write_snapshot_csv, PerturbationSpec, SimOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Endstates,
    Profile,
    Spectrum,
    Evans,
    Sweep,
    Simulate,
    Certify,
}

#[derive(Debug, Parser)]
#[command(name = "detona", version, about = "Stability and Hopf-bifurcation analysis of viscous strong detonations")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Left state from the large-s regime construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSpec {
    pub tau_minus: f64,
    pub u_tilde: f64,
    #[serde(default)]
    pub p_tilde: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RhSpec {
    /// Upper end of the tau axis; None uses 3 tau_+.
    pub tau_max: Option<f64>,
    pub n: usize,
}

impl Default for RhSpec {
    fn default() -> Self {
        RhSpec { tau_max: None, n: 400 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSpec {
    pub xi_max: Option<f64>,
    pub n_geo: usize,
    pub n_lin: usize,
    /// Points at which the seven spatial roots are split by sign.
    pub lambdas: Vec<[f64; 2]>,
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        SpectrumSpec { xi_max: None, n_geo: 200, n_lin: 2000, lambdas: vec![[10.0, 0.0], [1e-3, 0.0], [0.5, 2.0]] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvansSpec {
    /// Random lambda in the right half plane at which the duality invariant is checked.
    pub duality_samples: usize,
    pub duality_grid: usize,
}

impl Default for EvansSpec {
    fn default() -> Self {
        EvansSpec { duality_samples: 2, duality_grid: 40 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Rns,
    Synthetic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub family: Family,
    pub eps_start: f64,
    pub eps_stop: f64,
    pub eps_n: usize,
    /// [Re lo, Im lo, Re hi, Im hi] of the box searched at the first eps.
    pub seed_box: [f64; 4],
    pub synthetic_center: f64,
    pub synthetic_tau: f64,
    pub verdicts: bool,
    /// Contour used for synthetic verdicts.
    pub verdict_r0: f64,
    pub verdict_radius: f64,
    pub track: TrackOptions,
    pub hopf: HopfOptions,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            family: Family::Synthetic,
            eps_start: 0.0,
            eps_stop: 0.2,
            eps_n: 21,
            seed_box: [-0.5, 0.5, 0.5, 1.5],
            synthetic_center: 0.1,
            synthetic_tau: 1.0,
            verdicts: true,
            verdict_r0: 1e-3,
            verdict_radius: 10.0,
            track: TrackOptions::default(),
            hopf: HopfOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSpec {
    pub t_final: f64,
    pub perturbation: PerturbationSpec,
    pub sim: SimOptions,
    /// Fraction of the run treated as transient before fitting growth.
    pub transient: f64,
}

impl Default for SimulateSpec {
    fn default() -> Self {
        SimulateSpec { t_final: 200.0, perturbation: PerturbationSpec::default(), sim: SimOptions::default(), transient: 0.25 }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub params: Option<ModelParams>,
    #[serde(default)]
    pub left: Option<State>,
    #[serde(default)]
    pub regime: Option<RegimeSpec>,
    #[serde(default = "one")]
    pub z_plus: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub profile: ProfileOptions,
    #[serde(default)]
    pub stability: StabilityOptions,
    #[serde(default)]
    pub evans: EvansSpec,
    #[serde(default)]
    pub rh: RhSpec,
    #[serde(default)]
    pub spectrum: SpectrumSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub simulate: SimulateSpec,
}

/// Environment variables DETONA_A__B=v set key a.b (case-insensitive match on existing keys).
pub const ENV_PREFIX: &str = "DETONA_";

fn parse_scalar(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn apply_override(root: &mut toml::Table, path: &[String], value: toml::Value) -> Result<()> {
    let mut table = root;
    for (i, seg) in path.iter().enumerate() {
        let key = table.keys().find(|k| k.eq_ignore_ascii_case(seg)).cloned().unwrap_or_else(|| seg.to_ascii_lowercase());
        if i + 1 == path.len() {
            table.insert(key, value);
            return Ok(());
        }
        let entry = table.entry(key.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(DetonaError::Config { key: path[..=i].join("."), msg: "not a table".into() }),
        };
    }
    Ok(())
}

/// Parse TOML (or JSON for a .json path), apply overrides and validate.
pub fn load_config(path: &Path, env: &[(String, String)]) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| DetonaError::Config { key: "<file>".into(), msg: format!("{}: {e}", path.display()) })?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let mut table: toml::Table = if is_json {
        let v: Value = serde_json::from_str(&text).map_err(|e| DetonaError::Config { key: "<file>".into(), msg: e.to_string() })?;
        toml::Table::try_from(v).map_err(|e| DetonaError::Config { key: "<file>".into(), msg: e.to_string() })?
    } else {
        toml::from_str(&text).map_err(|e| DetonaError::Config { key: "<file>".into(), msg: e.to_string() })?
    };
    for (k, v) in env {
        if let Some(rest) = k.strip_prefix(ENV_PREFIX) {
            let path: Vec<String> = rest.split("__").map(|s| s.to_string()).collect();
            apply_override(&mut table, &path, parse_scalar(v))?;
        }
    }
    config_from_table(table)
}

fn config_from_table(table: toml::Table) -> Result<RunConfig> {
    let value = toml::Value::Table(table);
    let cfg: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
        let mut key = e.path().to_string();
        let msg = e.inner().to_string();
        let marker = "missing field `";
        if let Some(rest) = msg.find(marker).map(|i| &msg[i + marker.len()..]) {
            if let Some(j) = rest.find('`') {
                let name = &rest[..j];
                key = if key == "." || key.is_empty() { name.to_string() } else { format!("{key}.{name}") };
            }
        }
        DetonaError::Config { key, msg }
    })?;
    if let Some(p) = &cfg.params {
        p.validate().map_err(|e| match e {
            DetonaError::Config { key, msg } => DetonaError::Config { key: format!("params.{key}"), msg },
            e => e,
        })?;
    }
    if cfg.left.is_some() && cfg.regime.is_some() {
        return Err(DetonaError::Config { key: "regime".into(), msg: "give either `left` or `regime`, not both".into() });
    }
    Ok(cfg)
}

fn need_params(cfg: &RunConfig) -> Result<&ModelParams> {
    cfg.params.as_ref().ok_or(DetonaError::Config { key: "params".into(), msg: "required for this command".into() })
}

fn left_state(cfg: &RunConfig, params: &ModelParams) -> Result<State> {
    match (&cfg.left, &cfg.regime) {
        (Some(l), _) => Ok(*l),
        (None, Some(r)) => construct_regime(r.tau_minus, r.u_tilde, params.qheat, cfg.z_plus, r.p_tilde, params),
        (None, None) => Err(DetonaError::Config { key: "left".into(), msg: "either `left` or `regime` is required".into() }),
    }
}

fn endstates_for(cfg: &RunConfig, params: &ModelParams) -> Result<EndstatePair> {
    let left = left_state(cfg, params)?;
    solve_right_state(&left, params.qheat, cfg.z_plus, params)
}

/// Canonical hash of the parsed configuration.
pub fn config_hash(cfg: &RunConfig) -> String {
    let bytes = serde_json::to_vec(cfg).unwrap_or_default();
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Run {
    out: PathBuf,
    files: Vec<String>,
    timings: Vec<(String, f64)>,
}

impl Run {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.out.join(name)
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<()> {
        let p = self.path(name);
        fs::write(p, serde_json::to_string_pretty(v)? + "\n")?;
        Ok(())
    }

    fn csv<F: FnOnce(&mut csv::Writer<fs::File>) -> Result<()>>(&mut self, name: &str, f: F) -> Result<()> {
        let p = self.path(name);
        let mut w = csv::Writer::from_path(p)?;
        f(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let r = f();
        self.timings.push((stage.to_string(), t.elapsed().as_secs_f64()));
        r
    }
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

fn profile_for(cfg: &RunConfig, run: &mut Run) -> Result<(EndstatePair, Profile)> {
    let params = need_params(cfg)?.clone();
    let pair = run.timed("endstates", || endstates_for(cfg, &params))?;
    let prof = run.timed("profile", || solve_profile(&pair, &params, &cfg.profile, None))?;
    Ok((pair, prof))
}

fn certificate_json(prof: &Profile) -> Value {
    serde_json::to_value(certify(prof, prof.params(), &CertifyOptions::default())).unwrap_or(Value::Null)
}

fn write_profile_csv(run: &mut Run, prof: &Profile) -> Result<()> {
    run.csv("profile.csv", |w| {
        w.write_record(["x", "tau", "u", "E", "z", "y", "T", "p"])?;
        for s in prof.samples() {
            w.write_record([s.x, s.tau, s.u, s.e_tot, s.z, s.y, s.temp, s.p].map(fmt))?;
        }
        Ok(())
    })
}

fn cmd_endstates(cfg: &RunConfig, run: &mut Run) -> Result<Value> {
    let params = need_params(cfg)?;
    let pair = run.timed("endstates", || endstates_for(cfg, params))?;
    let ev = endstate_eigenvalues(&pair, params)?;
    let tau_max = cfg.rh.tau_max.unwrap_or(3.0 * pair.right.tau);
    let rows = rh_diagram(&pair, params, tau_max, cfg.rh.n);
    run.csv("rh.csv", |w| {
        w.write_record(["tau", "p_rayleigh", "p_hugoniot", "p_temperature", "p_lax"])?;
        for r in &rows {
            w.write_record([r.tau, r.p_rayleigh, r.p_hugoniot, r.p_temperature, r.p_lax].map(fmt))?;
        }
        Ok(())
    })?;
    let v = json!({ "pair": pair, "eigenvalues": ev });
    run.json("endstates.json", &v)?;
    Ok(v)
}

fn cmd_profile(cfg: &RunConfig, run: &mut Run) -> Result<Value> {
    let (pair, prof) = profile_for(cfg, run)?;
    write_profile_csv(run, &prof)?;
    let v = json!({
        "pair": pair,
        "half_length": prof.half_length,
        "nodes": prof.x.len(),
        "residual": prof.residual,
        "eta0": prof.eta0,
        "eta0_predicted": prof.eta0_predicted,
        "newton_iterations": prof.newton_iterations,
        "certificate": certificate_json(&prof),
    });
    run.json("profile.json", &v)?;
    Ok(v)
}

fn cmd_spectrum(cfg: &RunConfig, run: &mut Run) -> Result<Value> {
    let params = need_params(cfg)?;
    let pair = run.timed("endstates", || endstates_for(cfg, params))?;
    let kgrid = kawashima_grid(params, &pair)?;
    let xi_max = cfg.spectrum.xi_max.unwrap_or(*kgrid.last().unwrap_or(&10.0));
    let xi = xi_grid(xi_max, cfg.spectrum.n_geo, cfg.spectrum.n_lin);
    for (side, name) in [(Side::Minus, "spectrum_minus.csv"), (Side::Plus, "spectrum_plus.csv")] {
        let pts = run.timed(name, || essential_spectrum(side, params, &pair, &xi))?;
        run.csv(name, |w| {
            w.write_record(["xi", "branch", "re", "im"])?;
            for p in &pts {
                for k in 0..4 {
                    w.write_record([fmt(p.xi), p.branch[k].to_string(), fmt(p.lambda[k].re), fmt(p.lambda[k].im)])?;
                }
            }
            Ok(())
        })?;
    }
    let theta_m = kawashima_margin(Side::Minus, params, &pair, &kgrid)?;
    let theta_p = kawashima_margin(Side::Plus, params, &pair, &kgrid)?;
    let mut splits = Vec::new();
    for l in &cfg.spectrum.lambdas {
        let lam = C64::new(l[0], l[1]);
        let m = consistent_splitting(Side::Minus, lam, params, &pair).map_err(|e| e.to_string());
        let p = consistent_splitting(Side::Plus, lam, params, &pair).map_err(|e| e.to_string());
        splits.push(json!({ "lambda": [l[0], l[1]], "minus": m.ok(), "plus": p.ok() }));
    }
    let v = json!({ "kawashima": { "minus": theta_m, "plus": theta_p }, "splitting": splits });
    run.json("spectrum.json", &v)?;
    Ok(v)
}

fn cmd_evans(cfg: &RunConfig, run: &mut Run) -> Result<Value> {
    let (pair, prof) = profile_for(cfg, run)?;
    let params = prof.params().clone();
    let sys = build_system(&prof)?;
    let rep = run.timed("stability", || Ok(stability_check(&sys, &params, &pair, &cfg.stability)))?;
    run.csv("evans_contour.csv", |w| {
        w.write_record(["lambda_re", "lambda_im", "d_re", "d_im", "conditioning"])?;
        let up = &rep.samples;
        // upper half followed by the mirrored lower half
        let lower = up.iter().rev().map(|s| (s.lambda.conj(), s.d.conj(), s.conditioning));
        for (l, d, c) in up.iter().map(|s| (s.lambda, s.d, s.conditioning)).chain(lower) {
            w.write_record([l.re, l.im, d.re, d.im, c].map(fmt))?;
        }
        Ok(())
    })?;
    let gamma = transversality_gamma(&prof).map(|t| t.gamma).ok();
    let delta = lopatinski_delta(&pair, &params).ok();
    let origin = rep.origin.as_ref().map(|o| {
        json!({
            "r0": o.r0,
            "d0": [o.d0.re, o.d0.im],
            "dprime": [o.dprime.re, o.dprime.im],
            "dprime_fd": [o.dprime_fd.re, o.dprime_fd.im],
            "scale": o.scale,
            "d0_relative": o.d0.norm() / o.scale,
        })
    });
    let sign_consistent = match (&rep.origin, gamma, delta) {
        (Some(o), Some(g), Some(d)) => Some(o.dprime.re.signum() == (g * d).signum()),
        _ => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut duality = Vec::new();
    for _ in 0..cfg.evans.duality_samples {
        let lam = C64::new(rng.random_range(0.05..1.0), rng.random_range(-2.0..2.0));
        let d = run.timed("duality", || duality_check(&sys, lam, cfg.evans.duality_grid, &cfg.stability.evans))?;
        duality.push(d);
    }
    let v = json!({
        "verdict": rep.verdict,
        "winding": rep.winding,
        "radius": rep.radius,
        "radius_history": rep.radius_history,
        "r0": rep.r0,
        "min_conditioning": rep.min_conditioning,
        "origin": origin,
        "gamma": gamma,
        "delta": delta,
        "gamma_delta": gamma.zip(delta).map(|(g, d)| g * d),
        "sign_consistent": sign_consistent,
        "duality": duality,
        "certificate": certificate_json(&prof),
    });
    run.json("verdict.json", &v)?;
    Ok(v)
}

fn cmd_sweep(cfg: &RunConfig, run: &mut Run) -> Result<Value> {
    let sp = &cfg.sweep;
    let n = sp.eps_n.max(2);
    let eps: Vec<f64> = (0..n).map(|i| sp.eps_start + (sp.eps_stop - sp.eps_start) * i as f64 / (n - 1) as f64).collect();
    let seed = (C64::new(sp.seed_box[0], sp.seed_box[1]), C64::new(sp.seed_box[2], sp.seed_box[3]));
    let (mut traj, verdicts): (RootTrajectory, Vec<(Option<i64>, String)>) = match sp.family {
        Family::Synthetic => {
            let mk = |e: f64| SyntheticHopf { eps: e, center: sp.synthetic_center, tau: sp.synthetic_tau };
            let traj = run.timed("track", || track_pair(|e| Ok(mk(e)), &eps, seed, &sp.track))?;
            let v = if sp.verdicts { traj.eps_values.iter().map(|&e| winding_verdict(&mk(e), sp.verdict_r0, sp.verdict_radius)).collect() } else { Vec::new() };
            (traj, v)
        }
        Family::Rns => {
            let base = need_params(cfg)?.clone();
            let mut prev: Option<Profile> = None;
            let mut families: Vec<Profile> = Vec::new();
            let traj = run.timed("track", || {
                track_pair(
                    |e| {
                        let pr = base.at_eps(e)?;
                        let pair = endstates_for(cfg, &pr)?;
                        let prof = solve_profile(&pair, &pr, &cfg.profile, prev.as_ref())?;
                        prev = Some(prof.clone());
                        families.push(prof.clone());
                        Ok(EvansFamily { profile: prof, opts: cfg.stability.evans.clone() })
                    },
                    &eps,
                    seed,
                    &sp.track,
                )
            })?;
            let v = if sp.verdicts {
                families.into_iter().map(|p| evans_verdict(&EvansFamily { profile: p, opts: cfg.stability.evans.clone() }, &cfg.stability)).collect()
            } else {
                Vec::new()
            };
            (traj, v)
        }
    };
    let crossing = detect_hopf(&traj, &sp.hopf);
    let crossing_json = match &crossing {
        Ok(Some(c)) => json!({ "found": true, "crossing": c }),
        Ok(None) => json!({ "found": false }),
        Err(e) => json!({ "found": false, "error": e.kind(), "message": e.to_string() }),
    };
    traj.crossing = crossing.ok().flatten();
    let pts = sweep_points(&traj, &verdicts);
    let p = run.path("sweep.csv");
    write_sweep_csv(fs::File::create(p)?, &pts)?;
    run.json("crossing.json", &crossing_json)?;
    Ok(json!({ "family": sp.family, "points": pts.len(), "crossing": crossing_json }))
}

fn cmd_simulate(cfg: &RunConfig, run: &mut Run) -> Result<Value> {
    let (_, prof) = profile_for(cfg, run)?;
    let sp = &cfg.simulate;
    let series = run.timed("simulate", || run_perturbation(&prof, &sp.perturbation, sp.t_final, &sp.sim))?;
    let p = run.path("timeseries.csv");
    write_series_csv(fs::File::create(p)?, &series)?;
    for (k, snap) in series.snapshots.iter().enumerate() {
        if k == 0 {
            fs::create_dir_all(run.out.join("snapshots"))?;
        }
        let p = run.path(&format!("snapshots/snap_{k:04}.csv"));
        write_snapshot_csv(fs::File::create(p)?, snap)?;
    }
    let skip = (series.rows.len() as f64 * sp.transient) as usize;
    let t: Vec<f64> = series.rows[skip..].iter().map(|r| r.t).collect();
    let y: Vec<f64> = series.rows[skip..].iter().map(|r| r.linf).collect();
    let osc = detect_oscillation(&t, &y);
    let last = series.rows.last();
    let v = json!({
        "steps": series.steps,
        "dt": series.dt,
        "h": series.h,
        "blowup": series.blowup,
        "max_mass_defect": series.rows.iter().map(|r| r.mass_defect).fold(0.0, f64::max),
        "linf_final": last.map(|r| r.linf),
        "delta_final": last.map(|r| r.delta),
        "oscillation": osc.as_ref().ok(),
        "oscillation_error": osc.as_ref().err().map(|e| e.to_string()),
        "certificate": certificate_json(&prof),
    });
    run.json("simulate.json", &v)?;
    Ok(v)
}

fn cmd_certify(cfg: &RunConfig, run: &mut Run) -> Result<Value> {
    let (_, prof) = profile_for(cfg, run)?;
    let v = certificate_json(&prof);
    run.json("certificate.json", &v)?;
    Ok(v)
}

/// Execute one command with a parsed configuration and write its artifacts into `out`.
pub fn execute(command: Command, cfg: &RunConfig, out: &Path, threads: Option<usize>) -> Result<Value> {
    fs::create_dir_all(out)?;
    let mut run = Run { out: out.to_path_buf(), files: Vec::new(), timings: Vec::new() };
    let start = Instant::now();
    let result = match command {
        Command::Endstates => cmd_endstates(cfg, &mut run),
        Command::Profile => cmd_profile(cfg, &mut run),
        Command::Spectrum => cmd_spectrum(cfg, &mut run),
        Command::Evans => cmd_evans(cfg, &mut run),
        Command::Sweep => cmd_sweep(cfg, &mut run),
        Command::Simulate => cmd_simulate(cfg, &mut run),
        Command::Certify => cmd_certify(cfg, &mut run),
    };
    let timings: serde_json::Map<String, Value> = run.timings.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    let manifest = json!({
        "command": command,
        "config_hash": config_hash(cfg),
        "code_version": env!("CARGO_PKG_VERSION"),
        "threads": threads.unwrap_or_else(rayon::current_num_threads),
        "seed": cfg.seed,
        "outputs": run.files,
        "timings": timings,
        "total_seconds": start.elapsed().as_secs_f64(),
        "status": if result.is_ok() { "ok" } else { "error" },
        "error": result.as_ref().err().map(|e| json!({ "kind": e.kind(), "message": e.to_string() })),
    });
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    result
}

fn error_json(e: &DetonaError) -> Value {
    match e {
        DetonaError::Config { key, msg } => json!({ "error": "config", "key": key, "message": msg }),
        e => json!({ "error": e.kind(), "message": e.to_string() }),
    }
}

/// Entry point behind the binary: 0 on success, 2 on configuration errors, 1 otherwise.
pub fn run<I: IntoIterator<Item = OsString>>(args: I, env: &[(String, String)]) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let cfg = match load_config(&cli.config, env) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            return 2;
        }
    };
    if let Some(c) = cfg.command {
        if c != cli.command {
            let e = DetonaError::Config { key: "command".into(), msg: format!("config is for {c:?}, invoked as {:?}", cli.command) };
            eprintln!("{}", error_json(&e));
            return 2;
        }
    }
    let threads = cli.threads.or(cfg.threads);
    if let Some(n) = threads {
        // the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = cli.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
    match execute(cli.command, &cfg, &out, threads) {
        Ok(v) => {
            println!("{}", serde_json::to_string(&v).unwrap_or_default());
            0
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            if matches!(e, DetonaError::Config { .. }) {
                2
            } else {
                1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(s: &str) -> toml::Table {
        toml::from_str(s).unwrap()
    }

    const SMALL: &str = r#"
[params]
nu = 1.0
kappa = 1.0
dcoef = 1.0
krate = 1.0
qheat = 0.05
Gamma = 1.2
cheat = 1.0
T_ign = 0.8672
ign_C = 1.0
ign_E = 0.1328
s = 1.4842506526863986

[left]
tau = 1.0
u = 0.0
E = 1.0
z = 0.0
"#;

    #[test]
    fn unknown_and_missing_keys_are_named() {
        let mut t = table(SMALL);
        t["params"].as_table_mut().unwrap().insert("nuu".into(), toml::Value::Float(1.0));
        match config_from_table(t) {
            Err(DetonaError::Config { key, .. }) => assert_eq!(key, "params.nuu"),
            other => panic!("{other:?}"),
        }
        let mut t = table(SMALL);
        t["params"].as_table_mut().unwrap().remove("kappa");
        match config_from_table(t) {
            Err(DetonaError::Config { key, .. }) => assert_eq!(key, "params.kappa"),
            other => panic!("{other:?}"),
        }
        let mut t = table(SMALL);
        t["params"].as_table_mut().unwrap().insert("nu".into(), toml::Value::Float(-1.0));
        match config_from_table(t) {
            Err(DetonaError::Config { key, .. }) => assert_eq!(key, "params.nu"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn env_overrides_match_keys_case_insensitively() {
        let mut t = table(SMALL);
        apply_override(&mut t, &["PARAMS".into(), "T_IGN".into()], parse_scalar("0.9")).unwrap();
        apply_override(&mut t, &["SWEEP".into(), "FAMILY".into()], parse_scalar("rns")).unwrap();
        let cfg = config_from_table(t).unwrap();
        assert_eq!(cfg.params.unwrap().T_ign, 0.9);
        assert_eq!(cfg.sweep.family, Family::Rns);
    }

    #[test]
    fn hash_is_stable() {
        let a = config_from_table(table(SMALL)).unwrap();
        let b = config_from_table(table(SMALL)).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
