mod common;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use nyqscale_core::lti::{Polynomial, TransferFunction};
use nyqscale_core::network::{normalize, PowerNetwork};
use nyqscale_core::nyquist::{
    convex_hull, decentralized_check, fov_check, leftmost_real_crossing, lossy_exponential_check, make_contour,
    theorem1_check, unstable_pole_count, vertex_sweep, ContourKind, Hyperplane, LociEvaluator, LoopMatrix, Outcome,
    Policy, SweepOptions,
};
use nyqscale_core::powerplant::Agent;
use nyqscale_core::Error;
use rand::Rng;

fn two_bus(w: f64) -> PowerNetwork {
    PowerNetwork::from_laplacian(DMatrix::from_row_slice(2, 2, &[w, -w, -w, w])).unwrap()
}

fn agent(num: &[f64], den: &[f64]) -> Agent {
    Agent::rational(TransferFunction::from_coeffs(num, den).unwrap()).unwrap()
}

#[test]
fn unstable_agents_need_encirclements() {
    // k/(s - 1) on two buses: the synchronizing mode is 1 - 2k
    let opts = SweepOptions::default();
    let netn = normalize(&two_bus(1.0)).unwrap();
    for (k, stable) in [(1.0, true), (0.25, false)] {
        let agents = vec![agent(&[k], &[-1.0, 1.0]), agent(&[k], &[-1.0, 1.0])];
        let v = theorem1_check(&netn, &agents, &opts).unwrap();
        assert_eq!(v.n_required, Some(1));
        assert_eq!(v.is_stable(), stable, "k = {k}: {v:?}");
    }
}

#[test]
fn shared_pole_counts_once() {
    // 1/(s(s - 1)) on both buses: the compressed loop has one unstable pole
    let netn = normalize(&two_bus(1.0)).unwrap();
    let agents = vec![agent(&[1.0], &[0.0, -1.0, 1.0]), agent(&[1.0], &[0.0, -1.0, 1.0])];
    assert_eq!(unstable_pole_count(&netn, &agents, LoopMatrix::Compressed, 5).unwrap(), 1);
}

#[test]
fn lossy_needs_positive_epsilon() {
    let netn = normalize(&two_bus(1.0)).unwrap();
    let agents = vec![agent(&[1.0], &[1.0, 1.0]), agent(&[1.0], &[1.0, 1.0])];
    let opts = SweepOptions::default();
    assert!(matches!(
        lossy_exponential_check(&netn, &agents, 0.0, &opts),
        Err(Error::InvalidInput(_))
    ));
    assert!(lossy_exponential_check(&netn, &agents, 0.1, &opts).unwrap().is_stable());
}

#[test]
fn loci_are_conjugate_symmetric() {
    let mut r = common::rng(11);
    for _ in 0..20 {
        let n = r.gen_range(2..=5);
        let net = common::random_network(&mut r, n);
        let netn = normalize(&net).unwrap();
        let agents: Vec<Agent> = (0..n).map(|_| Agent::rational(common::random_stable_tf(&mut r)).unwrap()).collect();
        let ev = LociEvaluator::new(&netn, &agents, LoopMatrix::Compressed).unwrap();
        let s = Complex64::new(r.gen_range(-0.5..0.5), r.gen_range(0.1..10.0));
        let (mut up, _) = ev.eval(s).unwrap();
        let (down, _) = ev.eval(s.conj()).unwrap();
        let mut mirrored: Vec<Complex64> = down.iter().map(|z| z.conj()).collect();
        let key = |a: &Complex64, b: &Complex64| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im));
        up.sort_by(key);
        mirrored.sort_by(key);
        for (a, b) in up.iter().zip(&mirrored) {
            assert!((a - b).norm() <= 1e-9 * a.norm().max(1.0));
        }
    }
}

#[test]
fn fov_is_conservative() {
    let mut r = common::rng(12);
    let opts = SweepOptions::default();
    let mut fov_stable = 0;
    for case in 0..60 {
        let n = r.gen_range(2..=6);
        let net = common::random_network(&mut r, n);
        let netn = normalize(&net).unwrap();
        let agents: Vec<Agent> = (0..n).map(|_| Agent::rational(common::random_stable_tf(&mut r)).unwrap()).collect();
        let fov = fov_check(&netn, &agents, ContourKind::FullD, 0.0, &opts).unwrap();
        if fov.is_stable() {
            fov_stable += 1;
            let t1 = theorem1_check(&netn, &agents, &opts).unwrap();
            assert!(t1.is_stable(), "case {case}: fov stable, theorem1 {:?}", t1.result);
        }
    }
    assert!(fov_stable > 5, "only {fov_stable} fov-stable cases");
}

#[test]
fn decentralized_implies_ray_avoidance() {
    let mut r = common::rng(13);
    let opts = SweepOptions::default();
    let policy = Policy { r: 0.5, hyperplane: Hyperplane::vertical(-0.9), tau_max: 0.2 };
    let omega_c = PI / (2.0 * policy.tau_max);
    let mut passing = 0;
    for _ in 0..40 {
        let n = r.gen_range(2..=5);
        let net = common::random_network(&mut r, n);
        let netn = normalize(&net).unwrap();
        let agents: Vec<Agent> = (0..n)
            .map(|_| {
                let g = common::random_stable_tf(&mut r);
                let tau = r.gen_range(0.0..policy.tau_max);
                Agent::rational(TransferFunction::with_delay(g.num().scale(0.05), g.den().clone(), tau).unwrap()).unwrap()
            })
            .collect();
        let bounds: Vec<f64> = netn.gamma.iter().map(|g| g * 1.2).collect();
        let all_pass = agents
            .iter()
            .zip(&bounds)
            .all(|(a, b)| decentralized_check(a, *b, &policy, &opts).unwrap().is_stable());
        if !all_pass {
            continue;
        }
        passing += 1;
        let big_r = nyqscale_core::nyquist::default_outer_radius(&agents, policy.r, 5).unwrap();
        let contour = make_contour(ContourKind::Dr, policy.r, big_r, 200, &[]).unwrap();
        let gamma: Vec<f64> = netn.gamma.iter().copied().collect();
        let sweep = vertex_sweep(&gamma, &agents, &contour).unwrap();
        for (k, x) in sweep.samples.iter().enumerate() {
            if x.s.im <= omega_c || sweep.pieces[x.piece].is_closure() {
                continue;
            }
            if let Some(c) = leftmost_real_crossing(&convex_hull(&sweep.vertices[k])) {
                assert!(c > -1.0, "hull meets the ray at {c} for omega = {}", x.s.im);
            }
        }
    }
    assert!(passing > 5, "only {passing} passing networks");
}

#[test]
fn decentralized_rejects_slow_unstable_pole_outside_r() {
    // pole at +1 with r = 0.5 is inside the D_r contour
    let a = Agent::rational(TransferFunction::new(Polynomial::one(), Polynomial::new(vec![-1.0, 0.0, 1.0])).unwrap()).unwrap();
    let policy = Policy { r: 0.5, hyperplane: Hyperplane::vertical(-0.9), tau_max: 0.1 };
    let v = decentralized_check(&a, 1.0, &policy, &SweepOptions::default()).unwrap();
    assert_eq!(v.result, Outcome::Unstable);
    assert!(v.violations[0].condition.starts_with('1'));
}
