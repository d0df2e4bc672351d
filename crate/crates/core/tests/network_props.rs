mod common;

use nalgebra::{DMatrix, SymmetricEigen};
use nyqscale_core::network::{build_laplacian, kron_reduce, normalize, Line, OperatingPoint, PowerNetwork};
use nyqscale_core::Error;
use proptest::prelude::*;

fn row_sums_zero(l: &DMatrix<f64>, tol: f64) -> bool {
    (0..l.nrows()).all(|i| l.row(i).sum().abs() <= tol)
}

proptest! {
    #[test]
    fn kron_reduction_is_a_laplacian(seed in 0u64..10_000, n in 3usize..8) {
        let mut r = common::rng(seed);
        let net = common::random_network(&mut r, n);
        let elim: Vec<usize> = (0..n).filter(|i| i % 3 == 1).collect();
        let red = kron_reduce(&net, &elim).unwrap();
        let l = red.laplacian();
        prop_assert_eq!(l.nrows(), n - elim.len());
        prop_assert!((l - l.transpose()).amax() <= 1e-12 * l.amax());
        prop_assert!(row_sums_zero(l, 1e-9 * l.amax()));
        let eig = SymmetricEigen::new(l.clone());
        prop_assert!(eig.eigenvalues.iter().all(|x| *x >= -1e-9 * l.amax()));
    }

    #[test]
    fn normalized_spectrum(seed in 0u64..10_000, n in 2usize..8) {
        let mut r = common::rng(seed);
        let net = common::random_network(&mut r, n);
        let netn = normalize(&net).unwrap();
        prop_assert!(netn.mu[0].abs() < 1e-12);
        prop_assert!(netn.mu.iter().all(|m| *m >= -1e-12 && *m <= 1.0 + 1e-12));
        prop_assert!(netn.algebraic_connectivity() > 0.0);
        let back = netn.denormalize();
        prop_assert!((&back - net.laplacian()).amax() <= 1e-10 * net.laplacian().amax());
        let utu = netn.u.transpose() * &netn.u;
        prop_assert!((utu - DMatrix::identity(n, n)).amax() < 1e-10);
    }
}

#[test]
fn kron_of_a_path_is_series_connection() {
    // 0 -(2)- 1 -(3)- 2: eliminating the middle bus leaves 2·3/5
    let lines = [Line { from: 0, to: 1, b: 2.0 }, Line { from: 1, to: 2, b: 3.0 }];
    let net = build_laplacian(&lines, &[1.0; 3], &OperatingPoint::flat(3), 3).unwrap();
    let red = kron_reduce(&net, &[1]).unwrap();
    assert!((red.laplacian()[(0, 1)] + 1.2).abs() < 1e-12);
    assert_eq!(red.bus_ids(), &[0, 2]);
}

#[test]
fn disconnected_is_rejected() {
    let lines = [Line { from: 0, to: 1, b: 1.0 }, Line { from: 2, to: 3, b: 1.0 }];
    let res = build_laplacian(&lines, &[1.0; 4], &OperatingPoint::flat(4), 4);
    assert!(matches!(res, Err(Error::Disconnected(_))));
}

#[test]
fn scaling_leaves_normalized_matrix() {
    let mut r = common::rng(7);
    let net = common::random_network(&mut r, 5);
    let a = normalize(&net).unwrap();
    let b = normalize(&net.scaled(10.0)).unwrap();
    assert!((&a.l_prime - &b.l_prime).amax() < 1e-12);
    assert!((b.gamma[0] / a.gamma[0] - 10.0).abs() < 1e-12);
    let _ = PowerNetwork::from_laplacian(net.laplacian().clone()).unwrap();
}
