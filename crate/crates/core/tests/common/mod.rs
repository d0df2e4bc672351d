#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use nyqscale_core::lti::{Polynomial, TransferFunction};
use nyqscale_core::network::PowerNetwork;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random connected weighted graph: a random spanning tree plus extra edges.
pub fn random_laplacian(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(n, n);
    let add = |l: &mut DMatrix<f64>, i: usize, k: usize, w: f64| {
        l[(i, k)] -= w;
        l[(k, i)] -= w;
        l[(i, i)] += w;
        l[(k, k)] += w;
    };
    for i in 1..n {
        let k = rng.gen_range(0..i);
        let w = rng.gen_range(0.2..3.0);
        add(&mut l, i, k, w);
    }
    for i in 0..n {
        for k in i + 1..n {
            if l[(i, k)] == 0.0 && rng.gen_bool(0.3) {
                let w = rng.gen_range(0.2..3.0);
                add(&mut l, i, k, w);
            }
        }
    }
    l
}

pub fn random_network(rng: &mut impl Rng, n: usize) -> PowerNetwork {
    PowerNetwork::from_laplacian(random_laplacian(rng, n)).unwrap()
}

/// Monic polynomial with random roots in the open left half plane.
pub fn random_stable_poly(rng: &mut impl Rng, degree: usize) -> Polynomial {
    let mut roots = Vec::new();
    while roots.len() < degree {
        if degree - roots.len() >= 2 && rng.gen_bool(0.5) {
            let re = -rng.gen_range(0.1..2.0);
            let im = rng.gen_range(0.3..4.0);
            roots.push(Complex64::new(re, im));
            roots.push(Complex64::new(re, -im));
        } else {
            roots.push(Complex64::new(-rng.gen_range(0.2..3.0), 0.0));
        }
    }
    Polynomial::from_roots(&roots)
}

/// Polynomial with random real roots of either sign, away from the axis.
pub fn random_poly(rng: &mut impl Rng, degree: usize) -> Polynomial {
    let roots: Vec<Complex64> = (0..degree)
        .map(|_| {
            let x = rng.gen_range(0.2..3.0);
            Complex64::new(if rng.gen_bool(0.5) { x } else { -x }, 0.0)
        })
        .collect();
    Polynomial::from_roots(&roots)
}

/// Random stable, strictly proper transfer function with a log-uniform gain.
pub fn random_stable_tf(rng: &mut impl Rng) -> TransferFunction {
    let den_deg = rng.gen_range(1..=3);
    let num_deg = rng.gen_range(0..den_deg);
    let k = 10f64.powf(rng.gen_range(-1.0..1.7));
    let num = random_poly(rng, num_deg).scale(k);
    TransferFunction::new(num, random_stable_poly(rng, den_deg)).unwrap()
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}
