use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use nyqscale_core::lti::{combine, Combination};
use nyqscale_core::network::{normalize, PowerNetwork};
use nyqscale_core::nyquist::{
    decentralized_check, eigenloci_sweep, fov_check, fov_min_radius, make_contour, theorem1_check, winding_number,
    ContourKind, Hyperplane, Outcome, Policy, SweepOptions,
};
use nyqscale_core::powerplant::{
    all_pass, assemble_agent, make_fcr_controller, make_fdes, make_ffr_controller, make_hydro_turbine,
    make_wind_turbine, n5, Agent, DEFAULT_TAU, FreqActuator, HydroParams, WindParams,
};
use nyqscale_core::simkit::{realize_state_space, simulate, Disturbance, Pulse, SimOptions, StateSpaceModel};
use nyqscale_validation::{random_network, random_stable_tf, random_tf, rng};
use rand::Rng;

struct Report {
    pass: bool,
    detail: String,
}

fn report(pass: bool, detail: impl Into<String>) -> Report {
    Report { pass, detail: detail.into() }
}

fn timed(budget: Option<Duration>, f: impl FnOnce() -> Report) -> Report {
    let t = Instant::now();
    let mut r = f();
    let el = t.elapsed();
    r.detail = format!("{} [{:.2} s]", r.detail, el.as_secs_f64());
    if let Some(b) = budget {
        if el > b {
            r.pass = false;
            r.detail = format!("{} exceeds the {} s budget", r.detail, b.as_secs());
        }
    }
    r
}

/// Largest real part among eigenvalues outside a small disc around the origin.
fn max_re_excluding_zero(model: &StateSpaceModel) -> f64 {
    model
        .eigenvalues()
        .iter()
        .filter(|l| l.norm() > 1e-8)
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

fn criterion_1() -> Report {
    let mut r = rng(1);
    let opts = SweepOptions::default();
    let (mut stable, mut unstable, mut marginal) = (0, 0, 0);
    let mut mismatches = Vec::new();
    for case in 0..100 {
        let n = r.gen_range(2..=6);
        let net = random_network(&mut r, n);
        let agents: Vec<Agent> = (0..n).map(|_| Agent::rational(random_stable_tf(&mut r)).unwrap()).collect();
        let oracle = match realize_state_space(&net, &agents, 5) {
            Ok(m) => m.max_real_part(),
            Err(e) => {
                mismatches.push(format!("case {case}: realization failed: {e}"));
                continue;
            }
        };
        if oracle.abs() < 1e-6 {
            marginal += 1;
            continue;
        }
        let expected = if oracle < 0.0 { Outcome::Stable } else { Outcome::Unstable };
        if oracle < 0.0 {
            stable += 1;
        } else {
            unstable += 1;
        }
        let got = normalize(&net).and_then(|netn| theorem1_check(&netn, &agents, &opts));
        match got {
            Ok(v) if v.result == expected => {}
            Ok(v) => mismatches.push(format!("case {case}: {:?} vs max Re {oracle:.3e}", v.result)),
            Err(e) => mismatches.push(format!("case {case}: {e}")),
        }
    }
    let detail = format!(
        "{stable} stable, {unstable} unstable, {marginal} marginal skipped, {} mismatches{}",
        mismatches.len(),
        mismatches.first().map(|m| format!(" (first: {m})")).unwrap_or_default()
    );
    report(mismatches.is_empty() && stable > 0 && unstable > 0, detail)
}

fn criterion_2() -> Report {
    let mut r = rng(2);
    let m1 = Complex64::new(-1.0, 0.0);
    let opts = SweepOptions::default();
    let (mut done, mut skipped, mut nonzero) = (0, 0, 0);
    let mut mismatches = Vec::new();
    while done < 50 {
        let w = r.gen_range(0.2..3.0);
        let net = PowerNetwork::from_laplacian(nalgebra::DMatrix::from_row_slice(2, 2, &[w, -w, -w, w])).unwrap();
        let g = random_tf(&mut r);
        let agents = vec![Agent::rational(g.clone()).unwrap(), Agent::rational(g.clone()).unwrap()];
        let netn = normalize(&net).unwrap();
        let big_r = nyqscale_core::nyquist::default_outer_radius(&agents, 0.0, opts.pade_order).unwrap();

        // scalar Nyquist plot of μ2·γ·g on an independent dense contour
        let k = netn.mu[1] * netn.gamma[0];
        let dense = make_contour(ContourKind::FullD, 0.0, big_r, 2000, &[]).unwrap();
        let image: Vec<Complex64> = dense.closed_points().iter().map(|s| g.evaluate(*s).unwrap() * k).collect();
        let scalar = match winding_number(&image, m1) {
            Ok(x) => x,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let contour = make_contour(ContourKind::FullD, 0.0, big_r, opts.density, &[]).unwrap();
        let loci = eigenloci_sweep(&netn, &agents, &contour).and_then(|s| s.total_winding(m1));
        match loci {
            Ok(x) if x == scalar => {}
            Ok(x) => mismatches.push(format!("loci {x} vs scalar {scalar} for {g}")),
            Err(e) => mismatches.push(format!("{e} for {g}")),
        }
        if scalar != 0 {
            nonzero += 1;
        }
        done += 1;
    }
    report(
        mismatches.is_empty(),
        format!(
            "50 cases ({nonzero} with nonzero winding, {skipped} marginal redrawn), {} mismatches{}",
            mismatches.len(),
            mismatches.first().map(|m| format!(" (first: {m})")).unwrap_or_default()
        ),
    )
}

fn criterion_3() -> Report {
    let agents = n5::agents(n5::Case::HydroOnly, DEFAULT_TAU).unwrap();
    let netn = normalize(&n5::network().unwrap()).unwrap();
    let mut ok_poles = true;
    let mut parts = Vec::new();
    for (i, a) in agents.iter().take(3).enumerate() {
        let poles = a.rhp_poles_in_region(0.0, 5).unwrap();
        let moduli: Vec<String> = poles.iter().map(|p| format!("{:.4}", p.norm())).collect();
        let hit = poles.iter().any(|p| (0.35..=0.65).contains(&p.norm()));
        ok_poles &= hit;
        parts.push(format!("bus {}: [{}]", i + 1, moduli.join(", ")));
    }
    let v = fov_check(&netn, &agents, ContourKind::FullD, 0.0, &SweepOptions::default()).unwrap();
    let fov_fails = v.result == Outcome::Unstable;
    report(
        ok_poles && fov_fails,
        format!(
            "RHP pole moduli {}; fov full-D {:?}{}",
            parts.join("; "),
            v.result,
            if ok_poles { "" } else { "; bus without an RHP pole in [0.35, 0.65] rad/s" }
        ),
    )
}

fn criterion_4() -> Report {
    let agents = n5::agents(n5::Case::HydroLoads, DEFAULT_TAU).unwrap();
    let net = n5::network().unwrap();
    let netn = normalize(&net).unwrap();
    let gate = agents.iter().all(|a| a.rhp_poles_in_region(0.75, 5).unwrap().is_empty());
    let grid: Vec<f64> = (20..=60).map(|k| k as f64 * 0.01 * 2.0 * PI).collect();
    let r_min = fov_min_radius(&netn, &agents, &grid, &SweepOptions::default()).unwrap();
    let in_band = r_min.is_some_and(|r| (0.30 * 2.0 * PI - 1e-9..=0.45 * 2.0 * PI + 1e-9).contains(&r));
    let model = realize_state_space(&net, &agents, 5).unwrap();
    let oracle = max_re_excluding_zero(&model);
    report(
        gate && in_band && oracle < 0.0,
        format!(
            "gate at r = 0.75 {}; minimal fov radius {}; state-space max Re {oracle:.4e}",
            if gate { "passes" } else { "fails" },
            r_min.map_or("none".into(), |r| format!("{:.2}·2π rad/s", r / (2.0 * PI)))
        ),
    )
}

/// First sign change of `Im g(jω)` above `lo`, refined by bisection.
fn real_axis_crossing(a: &Agent, lo: f64, hi: f64) -> Option<f64> {
    let im = |w: f64| a.eval(Complex64::new(0.0, w)).unwrap().im;
    let steps = 4000;
    let mut prev = (lo, im(lo));
    for k in 1..=steps {
        let w = lo * (hi / lo).powf(k as f64 / steps as f64);
        let y = im(w);
        if y.signum() != prev.1.signum() {
            let (mut a0, mut b0) = (prev.0, w);
            for _ in 0..200 {
                let m = 0.5 * (a0 + b0);
                if im(m).signum() == im(a0).signum() {
                    a0 = m;
                } else {
                    b0 = m;
                }
            }
            return Some(0.5 * (a0 + b0));
        }
        prev = (w, y);
    }
    None
}

fn criterion_5() -> Report {
    let tau = DEFAULT_TAU;
    let target = PI / (2.0 * tau);
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for i in 0..3 {
        let (p_nom, share, v, p_mpp) = n5::WIND[i];
        let h = make_wind_turbine(&WindParams::new(v, p_nom, p_mpp)).unwrap();
        let f = make_ffr_controller(share, n5::K_FFR, tau, &h).unwrap();
        let m = nyqscale_core::powerplant::inertia_from_kinetic_energy(n5::W_KIN_GWS[i]);
        let a = assemble_agent(m, vec![FreqActuator::Linear(f)], 0.0, None).unwrap();
        match real_axis_crossing(&a, 5.0, 40.0) {
            Some(w) => {
                let rel = (w - target).abs() / target;
                worst = worst.max(rel);
                parts.push(format!("bus {}: {w:.4}", i + 1));
            }
            None => {
                worst = f64::INFINITY;
                parts.push(format!("bus {}: no crossing", i + 1));
            }
        }
    }
    report(
        worst < 1e-3,
        format!(
            "crossings {} rad/s vs π/(2τ) = {target:.4}; worst relative error {worst:.2e}",
            parts.join(", ")
        ),
    )
}

fn criterion_6() -> Report {
    let agents = n5::agents(n5::Case::HydroWind, DEFAULT_TAU).unwrap();
    let net = n5::network().unwrap();
    let netn = normalize(&net).unwrap();
    let policy = Policy {
        r: 0.75,
        hyperplane: Hyperplane::vertical(-0.9),
        tau_max: DEFAULT_TAU,
    };
    let opts = SweepOptions::default();
    let mut failed = Vec::new();
    for (i, a) in agents.iter().enumerate() {
        let v = decentralized_check(a, netn.gamma[i], &policy, &opts).unwrap();
        if !v.is_stable() {
            failed.push(format!("bus {}: {}", i + 1, v.violations[0].condition));
        }
    }
    let model = realize_state_space(&net, &agents, 5).unwrap();
    let outside: Vec<_> = model
        .eigenvalues()
        .iter()
        .filter(|l| l.norm() >= policy.r && l.re > 0.0)
        .collect();
    let max_re = max_re_excluding_zero(&model);
    report(
        failed.is_empty() && outside.is_empty(),
        format!(
            "{} of 5 agents pass; {} closed-loop eigenvalues with Re > 0 and |s| >= r (max Re {max_re:.3e}){}",
            5 - failed.len(),
            outside.len(),
            failed.first().map(|f| format!("; {f}")).unwrap_or_default()
        ),
    )
}

fn criterion_7() -> Report {
    let agents = n5::agents(n5::Case::HydroLoads, DEFAULT_TAU).unwrap();
    let model = realize_state_space(&n5::network().unwrap(), &agents, 5).unwrap();
    let opts = SimOptions { t_end: 300.0, dt: 1e-3, stride: 100, ..Default::default() };
    let res = simulate(&model, &Disturbance::step(n5::DC_LINK_BUS, -n5::DC_LINK_LOSS_MW), &opts).unwrap();
    let expected = -n5::DC_LINK_LOSS_MW / (n5::K_FCR + n5::D_MW_PER_HZ.iter().sum::<f64>());
    let last = *res.omega_avg_hz.last().unwrap();
    let rel = (last - expected).abs() / expected.abs();
    report(
        rel < 0.01,
        format!("ω_avg(300 s) = {last:.5} Hz, final-value {expected:.5} Hz, relative error {rel:.2e}"),
    )
}

fn criterion_8() -> Report {
    let f_des = make_fdes(n5::K_FCR).unwrap();
    let mut worst: f64 = 0.0;
    for (i, &(t_y, t_w, g0)) in n5::HYDRO.iter().enumerate() {
        let h = make_hydro_turbine(&HydroParams::new(t_y, t_w, g0).unwrap()).unwrap();
        let c = n5::FCR_SHARE[i];
        let fcr = make_fcr_controller(c, &f_des, &h).unwrap();
        // uncancelled K·H against c·F_des·(z - s)/(z + s), cross-multiplied
        let kh = combine(Combination::Series, &fcr.controller, &h).unwrap();
        let target = combine(Combination::Series, &f_des.scale(c), &all_pass(fcr.z)).unwrap();
        let lhs = kh.num() * target.den();
        let rhs = target.num() * kh.den();
        let diff = &lhs - &rhs;
        let rel = diff.max_abs_coeff() / lhs.max_abs_coeff().max(rhs.max_abs_coeff());
        worst = worst.max(rel);
    }
    report(worst < 1e-9, format!("worst coefficient residual {worst:.2e} over 3 hydro units"))
}

fn criterion_9() -> Report {
    let net = n5::network().unwrap();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for case in [n5::Case::HydroLoads, n5::Case::HydroWind] {
        let agents = n5::agents(case, DEFAULT_TAU).unwrap();
        let model = realize_state_space(&net, &agents, 5).unwrap();
        let pulse = Disturbance {
            pulses: vec![Pulse { bus: n5::DC_LINK_BUS, start: 1.0, end: 6.0, mw: -n5::DC_LINK_LOSS_MW }],
        };
        for (label, d) in [("pulse", pulse), ("step", Disturbance::step(n5::DC_LINK_BUS, -n5::DC_LINK_LOSS_MW))] {
            let opts = SimOptions { t_end: 60.0, dt: 1e-3, stride: 50, ..Default::default() };
            let res = simulate(&model, &d, &opts).unwrap();
            let s = res.summary();
            let ratio = s.final_avg_coi_gap_hz.unwrap() / s.peak_deviation_hz;
            worst = worst.max(ratio);
            parts.push(format!("{case:?}/{label} {ratio:.1e}"));
        }
    }
    report(worst < 0.01, format!("|ω_avg - ω_COI|(60 s) / peak: {}", parts.join(", ")))
}

fn main() {
    let criteria: [(&str, Option<u64>, fn() -> Report); 9] = [
        ("oracle equivalence", Some(60), criterion_1),
        ("SISO reduction exactness", None, criterion_2),
        ("N5 hydro-FCR without load damping", Some(10), criterion_3),
        ("N5 hydro-FCR with load damping", Some(30), criterion_4),
        ("wind delay crossing", None, criterion_5),
        ("N5 hydro+wind decentralized check", Some(30), criterion_6),
        ("steady-state frequency", None, criterion_7),
        ("model-matching identity", None, criterion_8),
        ("average and COI frequency convergence", None, criterion_9),
    ];
    let mut failures = 0;
    for (k, (name, budget, f)) in criteria.iter().enumerate() {
        let r = timed(budget.map(Duration::from_secs), f);
        if !r.pass {
            failures += 1;
        }
        println!("{} {}: {name}: {}", if r.pass { "PASS" } else { "FAIL" }, k + 1, r.detail);
    }
    println!("{} of 9 criteria pass", 9 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
