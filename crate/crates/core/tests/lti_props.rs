mod common;

use num_complex::Complex64;
use nyqscale_core::lti::{combine, mp_mirror, pade_delay, rhp_poles_in_region, Combination, Polynomial, TransferFunction};
use nyqscale_core::Error;
use proptest::prelude::*;

fn real_roots(xs: &[f64]) -> Polynomial {
    Polynomial::from_roots(&xs.iter().map(|x| Complex64::new(*x, 0.0)).collect::<Vec<_>>())
}

fn off_axis() -> impl Strategy<Value = f64> {
    prop_oneof![0.1f64..5.0, -5.0f64..-0.1]
}

proptest! {
    #[test]
    fn mirror_keeps_magnitude(zs in prop::collection::vec(off_axis(), 1..4),
                              ps in prop::collection::vec(0.1f64..5.0, 4..6),
                              k in 0.1f64..10.0,
                              w in 0.01f64..100.0) {
        let g = TransferFunction::new(real_roots(&zs).scale(k), real_roots(&ps.iter().map(|p| -p).collect::<Vec<_>>())).unwrap();
        let m = mp_mirror(&g).unwrap();
        let s = Complex64::new(0.0, w);
        let (a, b) = (g.evaluate(s).unwrap().norm(), m.evaluate(s).unwrap().norm());
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1e-12));
        prop_assert!(m.zeros().unwrap().iter().all(|z| z.re < 0.0));
        prop_assert_eq!(m.dc_gain().unwrap().signum(), g.dc_gain().unwrap().signum());
    }

    #[test]
    fn feedback_matches_expansion(a0 in 0.1f64..5.0, a1 in -3.0f64..3.0, b0 in 0.1f64..5.0,
                                  p in 0.1f64..4.0, q in 0.1f64..4.0,
                                  re in -1.0f64..1.0, im in 0.1f64..20.0) {
        let a = TransferFunction::from_coeffs(&[a0, a1], &[p, 1.0, 1.0]).unwrap();
        let b = TransferFunction::from_coeffs(&[b0], &[q, 1.0]).unwrap();
        let fb = combine(Combination::Feedback, &a, &b).unwrap();
        let s = Complex64::new(re, im);
        let (ea, eb) = (a.evaluate(s).unwrap(), b.evaluate(s).unwrap());
        let expect = ea / (Complex64::new(1.0, 0.0) + ea * eb);
        prop_assert!((fb.evaluate(s).unwrap() - expect).norm() <= 1e-9 * expect.norm().max(1.0));
    }

    #[test]
    fn delay_is_exact_on_axis(tau in 0.0f64..1.0, w in 0.01f64..200.0) {
        let g = TransferFunction::from_coeffs(&[2.0], &[1.0, 0.5]).unwrap();
        let gd = TransferFunction::with_delay(g.num().clone(), g.den().clone(), tau).unwrap();
        let s = Complex64::new(0.0, w);
        let (a, b) = (g.evaluate(s).unwrap(), gd.evaluate(s).unwrap());
        prop_assert!((a.norm() - b.norm()).abs() <= 1e-12 * a.norm());
        let dphase = (b / a).arg();
        let expect = Complex64::from_polar(1.0, -w * tau).arg();
        prop_assert!((dphase - expect).abs() < 1e-9);
    }

    #[test]
    fn pade_is_all_pass(tau in 0.01f64..1.0, order in 1usize..=5, w in 0.0f64..100.0) {
        let p = pade_delay(tau, order).unwrap();
        let v = p.evaluate(Complex64::new(0.0, w)).unwrap();
        prop_assert!((v.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn roots_round_trip(rs in prop::collection::vec(-10.0f64..10.0, 1..6)) {
        let p = real_roots(&rs);
        let found = p.roots().unwrap();
        prop_assert_eq!(found.len(), rs.len());
        for r in found {
            prop_assert!(p.backward_error(r) <= 1e-8);
        }
    }
}

#[test]
fn pade_phase_tracks_delay_at_low_frequency() {
    let tau = 0.1;
    let p = pade_delay(tau, 5).unwrap();
    for w in [0.1, 1.0, 10.0] {
        let v = p.evaluate(Complex64::new(0.0, w)).unwrap();
        let err = (v - Complex64::from_polar(1.0, -w * tau)).norm();
        assert!(err < 1e-9, "w = {w}: {err}");
    }
}

#[test]
fn region_gate() {
    // poles at 1 ± 2j (|p| = √5) and -3
    let den = &Polynomial::new(vec![5.0, -2.0, 1.0]) * &Polynomial::linear(3.0, 1.0);
    let g = TransferFunction::new(Polynomial::one(), den).unwrap();
    assert_eq!(rhp_poles_in_region(&g, 0.0).unwrap().len(), 2);
    assert_eq!(rhp_poles_in_region(&g, 2.0).unwrap().len(), 2);
    assert!(rhp_poles_in_region(&g, 2.3).unwrap().is_empty());
    assert!(matches!(
        rhp_poles_in_region(&g, 5f64.sqrt()),
        Err(Error::BoundaryAmbiguity { .. })
    ));
}

#[test]
fn feedback_rejects_delay() {
    let a = TransferFunction::with_delay(Polynomial::one(), Polynomial::linear(1.0, 1.0), 0.1).unwrap();
    let b = TransferFunction::gain(1.0);
    assert!(matches!(combine(Combination::Feedback, &a, &b), Err(Error::UnsupportedStructure(_))));
    let c = common::c(1.0, 0.0);
    assert!((b.evaluate(c).unwrap() - c).norm() < 1e-15);
}
