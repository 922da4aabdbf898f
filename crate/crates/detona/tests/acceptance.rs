//! Acceptance report: one PASS/FAIL line per headline criterion.
//!
//! Runs as a plain binary. A criterion listed in KNOWN_FAILURES is reported as
//! FAIL but does not change the exit status; every other failure does.

use std::f64::consts::PI;
use std::time::Instant;

use detona::benchmarks::small_amplitude;
use detona::bifurcation::{detect_hopf, locate_roots, track_pair, HopfOptions, LocateOptions, SyntheticHopf, TrackOptions};
use detona::endstates::{construct_regime, solve_right_state, tau_tilde_plus, tau_tilde_plus_printed, EndstatePair};
use detona::evans::contour::{argument_sum, winding_adaptive, Contour};
use detona::evans::duality::duality_check;
use detona::evans::evans;
use detona::evans::stability::{lopatinski_delta, stability_check, StabilityOptions, StabilityReport, Verdict};
use detona::model::{thermo, EpsMap, IgnitionLaw};
use detona::profile::{shoot_fluid_profile, solve_profile, transversality_gamma, Profile, ProfileOptions};
use detona::spectral::{build_system, consistent_splitting, dispersion_roots, kawashima_grid, kawashima_margin, Side};
use detona::timesim::{detect_oscillation, run_perturbation, Manufactured, PerturbationSpec, SimOptions};
use detona::ModelParams;
use num_complex::Complex64 as C64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The alternative closed form for the tau_+ correction disagrees with the exact
/// Rankine-Hugoniot intersection for q > 0; see README, "Known discrepancies".
const KNOWN_FAILURES: &[&str] = &["rh_closed_form_printed"];

struct Report {
    lines: Vec<(String, bool)>,
}

impl Report {
    fn line(&mut self, name: &str, pass: bool, secs: f64, budget: f64, detail: String) {
        let ok = pass && secs <= budget;
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("{tag} {name:<26} {secs:>7.2}s/{budget:<5} {detail}");
        self.lines.push((name.to_string(), ok));
    }
}

fn regime_params(s: f64, q: f64) -> ModelParams {
    ModelParams {
        nu: 1.0,
        kappa: 1.0,
        dcoef: 1.0,
        krate: 1.0,
        qheat: q,
        Gamma: 1.2,
        cheat: 1.0,
        T_ign: 60.0,
        ign_C: 1.0,
        ign_E: 50.0,
        s,
        ignition: IgnitionLaw::Arrhenius,
        eps_map: EpsMap::default(),
    }
}

/// Twenty regime-constructed cases: q in {0, 5, 50}, z_+ = 1, s from 1e2 to 1e4.
/// The default p_tilde vanishes at q = 0, where the regime needs p_tilde < 0.
fn rh_cases() -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for (q, n) in [(0.0, 6), (5.0, 7), (50.0, 7)] {
        for k in 0..n {
            out.push((q, 100.0 * 100f64.powf(k as f64 / (n - 1) as f64)));
        }
    }
    out
}

fn p_tilde(q: f64) -> Option<f64> {
    (q == 0.0).then_some(-1.0)
}

fn regime_pair(q: f64, s: f64) -> detona::Result<(EndstatePair, ModelParams)> {
    let pr = regime_params(s, q);
    let left = construct_regime(0.6, 0.5, q, 1.0, p_tilde(q), &pr)?;
    Ok((solve_right_state(&left, q, 1.0, &pr)?, pr))
}

fn accepted_pairs() -> Vec<(EndstatePair, ModelParams)> {
    let mut out = Vec::new();
    for (q, s) in rh_cases() {
        if let Ok(case) = regime_pair(q, s) {
            out.push(case);
        }
    }
    for q in [0.05, 0.1] {
        out.push(small_amplitude(q).unwrap());
    }
    out
}

fn rh_suite(rep: &mut Report) {
    let t = Instant::now();
    let g = 1.2;
    let (mut worst_res, mut all_ok, mut solved) = (0.0f64, true, 0);
    let mut worst_printed = 0.0f64;
    let mut worst_derived = 0.0f64;
    for (q, s) in rh_cases() {
        let (pair, pr) = match regime_pair(q, s) {
            Ok(p) => p,
            Err(e) => {
                println!("     case q = {q}, s = {s:.1}: {e}");
                all_ok = false;
                continue;
            }
        };
        solved += 1;
        worst_res = worst_res.max(pair.rh_residual);
        let tl = thermo(&pair.left, &pr).unwrap();
        let tr = thermo(&pair.right, &pr).unwrap();
        let lax = tl.sigma > s && s > tr.sigma;
        let temp = tl.T > pr.T_ign && tr.T < pr.T_ign;
        let lneg = tl.p / pair.left.tau > s * s / (g + 1.0);
        all_ok &= lax && temp && lneg && pair.lax_ok && pair.temp_ok && pair.rh_residual <= 1e-10;
        if 1.0 / s <= 1e-2 {
            let measured = s * s * (pair.right.tau - (1.0 + 2.0 / g) * 0.6);
            let pt = p_tilde(q).unwrap_or(-2.0 * g * q / 0.6);
            let rel = |want: f64| (measured - want).abs() / want.abs().max(1.0);
            worst_printed = worst_printed.max(rel(tau_tilde_plus_printed(0.6, pt, q, 1.0, g)));
            worst_derived = worst_derived.max(rel(tau_tilde_plus(0.6, pt, q, 1.0, g)));
        }
    }
    let secs = t.elapsed().as_secs_f64();
    rep.line(
        "rh_endstates",
        all_ok && solved == 20 && worst_derived <= 0.05,
        secs,
        1.0,
        format!("{solved}/20 solved, max residual {worst_res:.1e}, Lax/T/L hold: {all_ok}, expansion rel err {worst_derived:.2e}"),
    );
    rep.line("rh_closed_form_printed", worst_printed <= 0.05, secs, 1.0, format!("alternative closed form rel err {worst_printed:.2e} (tol 5e-2)"));
}

fn sup_diff(a: &Profile, b: &Profile, l: f64) -> f64 {
    let n = 4001;
    (0..n)
        .map(|i| {
            let x = -l + 2.0 * l * i as f64 / (n - 1) as f64;
            (a.state_at(x).0.to_vec() - b.state_at(x).0.to_vec()).amax()
        })
        .fold(0.0, f64::max)
}

fn profile_suite(rep: &mut Report) {
    let mut slowest = 0.0f64;
    let mut ok = true;
    let mut notes = Vec::new();
    for q in [0.05, 0.1] {
        let t = Instant::now();
        let (pair, pr) = small_amplitude(q).unwrap();
        let opts = ProfileOptions::default();
        let p = solve_profile(&pair, &pr, &opts, None).unwrap();
        let l = p.half_length;
        let p2 = solve_profile(&pair, &pr, &ProfileOptions { half_length: Some(2.0 * l), ..opts.clone() }, Some(&p)).unwrap();
        let dl = sup_diff(&p, &p2, l);
        let eta_err = (p.eta0 - p.eta0_predicted).abs() / p.eta0_predicted;
        let pass = p.residual <= 1e-8 && dl <= 1e-8 && eta_err <= 0.2;
        ok &= pass;
        notes.push(format!("q={q}: res {:.1e}, 2L change {dl:.1e}, eta0 err {:.0}%", p.residual, eta_err * 100.0));
        slowest = slowest.max(t.elapsed().as_secs_f64());
    }
    // q = 0 against an independent shooting computation
    let t = Instant::now();
    let (pair, pr) = small_amplitude(0.0).unwrap();
    let p = solve_profile(&pair, &pr, &ProfileOptions::default(), None).unwrap();
    let xs: Vec<f64> = (0..201).map(|i| -10.0 + 0.1 * i as f64).collect();
    let shot = shoot_fluid_profile(&pair, &pr, &xs).unwrap();
    let mut dev = 0.0f64;
    for (x, (u, e)) in xs.iter().zip(&shot) {
        let st = p.state_at(*x).0;
        dev = dev.max((st.u - u).abs()).max((st.E - e).abs());
    }
    ok &= dev <= 1e-6;
    notes.push(format!("q=0 vs shooting {dev:.1e}"));
    slowest = slowest.max(t.elapsed().as_secs_f64());
    rep.line("profile", ok, slowest, 60.0, notes.join("; "));
}

fn dispersion_suite(rep: &mut Report) {
    let t = Instant::now();
    let mut ok = true;
    let mut worst_lin = 0.0f64;
    let mut worst_quad = 0.0f64;
    for q in [0.05, 0.1] {
        let (pair, pr) = small_amplitude(q).unwrap();
        let s = pr.s;
        for side in [Side::Minus, Side::Plus] {
            let st = if side == Side::Minus { pair.left } else { pair.right };
            let sig = thermo(&st, &pr).unwrap().sigma;
            let lam = C64::new(1e-5, 0.0);
            let ms = dispersion_roots(side, lam, &pr, &pair).unwrap();
            let want = [1.0 / (s + sig), 1.0 / s, 1.0 / (s - sig)];
            for k in 0..3 {
                worst_lin = worst_lin.max(((ms.mu[k] / lam).re - want[k]).abs() / want[k].abs());
            }
            // sign table at small real lambda
            let expect: [f64; 7] = match side {
                Side::Minus => [1.0, 1.0, -1.0, 1.0, -1.0, -1.0, 1.0],
                Side::Plus => [1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0],
            };
            let lam = C64::new(1e-3, 0.0);
            let ms = dispersion_roots(side, lam, &pr, &pair).unwrap();
            for k in 0..7 {
                ok &= ms.mu[k].re.signum() == expect[k];
            }
            let neg = ms.mu.iter().filter(|m| m.re < 0.0).count();
            ok &= neg == 3;
            ok &= consistent_splitting(side, C64::new(10.0, 0.0), &pr, &pair).unwrap() == (3, 4);
        }
        // quadratic coefficient of mu_4^+ by a fit on |lambda| <= 1e-3
        let d_eff = pr.dcoef / pair.right.tau.powi(2);
        let lams = [2.5e-4, 5e-4, 7.5e-4, 1e-3];
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for &l in &lams {
            let m4 = dispersion_roots(Side::Plus, C64::new(l, 0.0), &pr, &pair).unwrap().mu[3].re;
            let y = (m4 - l / s) / l;
            sxx += l * l;
            sxy += l * y;
        }
        let quad = sxy / sxx;
        let want = -d_eff / s.powi(3);
        worst_quad = worst_quad.max((quad - want).abs() / want.abs());
    }
    ok &= worst_lin <= 5e-3 && worst_quad <= 1e-2;
    rep.line(
        "dispersion",
        ok,
        t.elapsed().as_secs_f64(),
        10.0,
        format!("linear coeff rel err {worst_lin:.1e}, mu4+ quadratic rel err {worst_quad:.1e}, sign table and (3,4) splitting"),
    );
}

fn kawashima_suite(rep: &mut Report) {
    let t = Instant::now();
    let pairs = accepted_pairs();
    let mut min_theta = f64::INFINITY;
    for (pair, pr) in &pairs {
        let grid = kawashima_grid(pr, pair).unwrap();
        for side in [Side::Minus, Side::Plus] {
            min_theta = min_theta.min(kawashima_margin(side, pr, pair, &grid).unwrap());
        }
    }
    rep.line("kawashima", min_theta > 0.0, t.elapsed().as_secs_f64(), 5.0, format!("{} cases, min theta {min_theta:.3e}", pairs.len()));
}

fn duality_suite(rep: &mut Report, prof: &Profile) {
    let t = Instant::now();
    let sys = build_system(prof).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let (mut worst_cross, mut worst_same) = (0.0f64, 0.0f64);
    for _ in 0..5 {
        let lam = C64::new(rng.random_range(0.05..1.0), rng.random_range(-2.0..2.0));
        let d = duality_check(&sys, lam, 40, &Default::default()).unwrap();
        worst_cross = worst_cross.max(d.max_cross_variation);
        worst_same = worst_same.max(d.max_same_side);
    }
    rep.line(
        "duality",
        worst_cross <= 1e-8 && worst_same <= 1e-8,
        t.elapsed().as_secs_f64(),
        30.0,
        format!("5 lambda, cross variation {worst_cross:.1e}, same-side {worst_same:.1e}"),
    );
}

fn sign_record(rep: &StabilityReport, prof: &Profile) -> Option<(f64, f64)> {
    let o = rep.origin.as_ref()?;
    let g = transversality_gamma(prof).ok()?.gamma;
    let d = lopatinski_delta(prof.pair(), prof.params()).ok()?;
    Some((o.dprime.re, g * d))
}

fn evans_suite(rep: &mut Report, prof: &Profile) {
    let t = Instant::now();
    let pair = *prof.pair();
    let pr = prof.params().clone();
    let base = StabilityOptions::default();
    let prof2 = solve_profile(&pair, &pr, &ProfileOptions { half_length: Some(2.0 * prof.half_length), ..Default::default() }, Some(prof)).unwrap();
    let (main, half_r0, long) = std::thread::scope(|sc| {
        let a = sc.spawn(|| stability_check(&build_system(prof).unwrap(), &pr, &pair, &base));
        let b = sc.spawn(|| {
            let r0 = 0.5e-3 * pr.s.min(1.0);
            stability_check(&build_system(prof).unwrap(), &pr, &pair, &StabilityOptions { r0: Some(r0), ..base.clone() })
        });
        let c = sc.spawn(|| stability_check(&build_system(&prof2).unwrap(), &pr, &pair, &base));
        (a.join().unwrap(), b.join().unwrap(), c.join().unwrap())
    });

    let o = main.origin.as_ref();
    let d0_ok = o.is_some_and(|o| o.d0.norm() <= 1e-8 * o.scale && o.dprime.norm() > 0.0);
    let d0_detail = o.map(|o| format!("|D(0)|/scale {:.1e}, D'(0) {:.4}", o.d0.norm() / o.scale, o.dprime.re)).unwrap_or_default();

    let sys = build_system(prof).unwrap();
    let mut conj = 0.0f64;
    for lam in [C64::new(0.3, 0.7), C64::new(2.0, 5.0), C64::new(0.05, 40.0)] {
        let a = evans(&sys, lam, &base.evans).unwrap().d;
        let b = evans(&sys, lam.conj(), &base.evans).unwrap().d;
        conj = conj.max((a - b.conj()).norm() / a.norm());
    }

    let radii_agree = main.radius_history.len() >= 2 && main.radius_history.iter().all(|(_, w)| *w == 0);
    let windings = [main.winding, half_r0.winding, long.winding];
    let winding_ok = windings.iter().all(|w| *w == Some(0)) && radii_agree && [&main, &half_r0, &long].iter().all(|r| r.verdict == Verdict::Stable);

    let mut signs = Vec::new();
    for (r, p) in [(&main, prof), (&half_r0, prof), (&long, &prof2)] {
        if let Some(s) = sign_record(r, p) {
            signs.push(s);
        }
    }
    let sign_ok = signs.len() == 3 && signs.iter().all(|(dp, gd)| dp.signum() == gd.signum());

    let secs = t.elapsed().as_secs_f64();
    rep.line(
        "evans",
        d0_ok && conj <= 1e-10 && winding_ok && sign_ok,
        secs,
        600.0,
        format!(
            "{d0_detail}; conj sym {conj:.1e}; winding {windings:?} (R {:?}, r0/2, 2L); sign(D'(0)) = sign(gamma delta) in {}/3, gamma delta {:.3e}",
            main.radius_history.iter().map(|(r, _)| r.round()).collect::<Vec<_>>(),
            signs.iter().filter(|(a, b)| a.signum() == b.signum()).count(),
            signs.first().map_or(f64::NAN, |s| s.1),
        ),
    );
}

fn winding_suite(rep: &mut Report) {
    let t = Instant::now();
    const fn z(a: f64, b: f64) -> C64 {
        C64::new(a, b)
    }
    type F = Box<dyn Fn(C64) -> C64 + Sync>;
    let funcs: Vec<(&str, F, Vec<C64>)> = vec![
        ("cubic", Box::new(|l: C64| (l - z(1.0, 2.0)) * (l - z(1.0, -2.0)) * (l - z(3.0, 0.5))), vec![z(1.0, 2.0), z(1.0, -2.0), z(3.0, 0.5)]),
        ("exp-weighted pair", Box::new(|l: C64| ((l - z(0.4, 0.0)).powi(2) + 1.0) * (-l).exp()), vec![z(0.4, 1.0), z(0.4, -1.0)]),
        (
            "exp shift",
            Box::new(|l: C64| l.exp() + 3.0),
            vec![z(3f64.ln(), PI), z(3f64.ln(), -PI), z(3f64.ln(), 3.0 * PI), z(3f64.ln(), -3.0 * PI)],
        ),
        ("left-half roots only", Box::new(|l: C64| (l + 1.0) * (l + z(2.0, 3.0)) * l.exp()), vec![]),
        ("clustered", Box::new(|l: C64| (l - z(2.0, 1.0)) * (l - z(2.001, 1.0)) * (l - z(5.0, -4.0)) * (0.3 * l).exp()), vec![z(2.0, 1.0), z(2.001, 1.0), z(5.0, -4.0)]),
    ];
    let contour = Contour::d_contour(1e-3, 10.0);
    let (mut ok, mut worst_root) = (true, 0.0f64);
    let mut detail = Vec::new();
    for (name, f, roots) in &funcs {
        let (w, samples) = match winding_adaptive(f, &contour, 64, 12) {
            Ok(r) => r,
            Err(e) => {
                ok = false;
                detail.push(format!("{name}: {e}"));
                continue;
            }
        };
        let oracle = argument_sum(f, &contour, 10 * samples.len());
        let exact = roots.len() as i64;
        if w != exact || (oracle - w as f64).abs() >= 1e-6 {
            ok = false;
            detail.push(format!("{name}: winding {w}, oracle {oracle:.6}, expected {exact}"));
        }
        let g = |l: C64| f(l);
        let found = locate_roots(&g, C64::new(0.05, -9.9), C64::new(9.0, 9.9), &LocateOptions::default()).unwrap_or_default();
        if found.len() != roots.len() {
            ok = false;
            detail.push(format!("{name}: located {} of {}", found.len(), roots.len()));
        }
        for r in roots {
            let best = found.iter().map(|x| (x - r).norm()).fold(f64::INFINITY, f64::min);
            worst_root = worst_root.max(best);
        }
    }
    ok &= worst_root <= 1e-8;
    detail.push(format!("5 functions, max root error {worst_root:.1e}"));
    rep.line("winding_root_finder", ok, t.elapsed().as_secs_f64(), 10.0, detail.join("; "));
}

fn hopf_suite(rep: &mut Report) {
    let t = Instant::now();
    let eps: Vec<f64> = (0..21).map(|i| 0.01 * i as f64).collect();
    let traj = track_pair(|e| Ok(SyntheticHopf::new(e)), &eps, (C64::new(-0.5, 0.5), C64::new(0.5, 1.5)), &TrackOptions::default());
    let (ok, detail) = match traj.and_then(|t| detect_hopf(&t, &HopfOptions::default())) {
        Ok(Some(c)) => (
            (c.eps_star - 0.1).abs() <= 1e-6 && (c.tau_star - 1.0).abs() <= 1e-6 && (c.period - 2.0 * PI).abs() <= 1e-6 && (c.dgamma_deps - 1.0).abs() <= 1e-6,
            format!("eps* {:.9}, tau* {:.9}, T {:.9}, dgamma/deps {:.9}", c.eps_star, c.tau_star, c.period, c.dgamma_deps),
        ),
        Ok(None) => (false, "no crossing".into()),
        Err(e) => (false, e.to_string()),
    };
    rep.line("hopf_tracker", ok, t.elapsed().as_secs_f64(), 60.0, detail);
}

fn timesim_suite(rep: &mut Report, prof: &Profile) {
    let t = Instant::now();
    let (_, orders) = Manufactured::standard().orders(&[32, 64, 128], 0.2, &SimOptions::default()).unwrap();
    let min_order = orders.iter().cloned().fold(f64::INFINITY, f64::min);

    let t_final = 200.0;
    let (stable, harness) = std::thread::scope(|sc| {
        let a = sc.spawn(|| run_perturbation(prof, &PerturbationSpec::default(), t_final, &SimOptions::default()).unwrap());
        let b = sc.spawn(|| {
            let opts = SimOptions { injected_growth: 0.05, ..Default::default() };
            run_perturbation(prof, &PerturbationSpec::default(), t_final, &opts).unwrap()
        });
        (a.join().unwrap(), b.join().unwrap())
    });
    let mass = stable.rows.iter().chain(&harness.rows).map(|r| r.mass_defect).fold(0.0, f64::max);
    let transient = stable.rows.iter().find(|r| r.t >= 0.25 * t_final).unwrap();
    let last = stable.rows.last().unwrap();
    let decays = stable.blowup.is_none() && last.linf < transient.linf;

    let skip = harness.rows.len() / 4;
    let ts: Vec<f64> = harness.rows[skip..].iter().map(|r| r.t).collect();
    let ys: Vec<f64> = harness.rows[skip..].iter().map(|r| r.linf).collect();
    let growth = detect_oscillation(&ts, &ys).map(|o| o.growth_rate).unwrap_or(f64::NAN);

    rep.line(
        "timesim",
        min_order >= 1.8 && mass <= 1e-8 && decays && growth > 0.0,
        t.elapsed().as_secs_f64(),
        600.0,
        format!(
            "MMS orders {:?}, mass defect {mass:.1e}, Linf {:.2e} at t={:.0} -> {:.2e} at t={t_final}, harness growth {growth:+.4}",
            orders.iter().map(|o| (o * 100.0).round() / 100.0).collect::<Vec<_>>(),
            transient.linf,
            transient.t,
            last.linf
        ),
    );
}

fn main() {
    if std::env::var("DETONA_ACCEPTANCE_ONLY").is_ok_and(|v| v == "fast") {
        let mut rep = Report { lines: Vec::new() };
        winding_suite(&mut rep);
        return;
    }
    // `cargo test -- <filter>` style arguments are ignored; `--list` prints nothing.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut rep = Report { lines: Vec::new() };
    rh_suite(&mut rep);
    profile_suite(&mut rep);
    dispersion_suite(&mut rep);
    kawashima_suite(&mut rep);
    winding_suite(&mut rep);
    hopf_suite(&mut rep);

    let (pair, pr) = small_amplitude(0.05).unwrap();
    let prof = solve_profile(&pair, &pr, &ProfileOptions::default(), None).unwrap();
    duality_suite(&mut rep, &prof);
    evans_suite(&mut rep, &prof);
    timesim_suite(&mut rep, &prof);

    let unexpected: Vec<&str> = rep.lines.iter().filter(|(n, ok)| !ok && !KNOWN_FAILURES.contains(&n.as_str())).map(|(n, _)| n.as_str()).collect();
    let known: Vec<&str> = rep.lines.iter().filter(|(n, ok)| !ok && KNOWN_FAILURES.contains(&n.as_str())).map(|(n, _)| n.as_str()).collect();
    let passed = rep.lines.iter().filter(|(_, ok)| *ok).count();
    println!("acceptance: {passed}/{} pass; known failures {known:?}; unexpected failures {unexpected:?}", rep.lines.len());
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}
