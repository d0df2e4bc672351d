//! Coupling Laplacian: construction, Kron reduction, Γ-normalization and modal tools.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::{combine, Combination, Polynomial, TransferFunction};
use crate::powerplant::Agent;

/// Second Laplacian eigenvalue below this (relative to the largest diagonal) means disconnected.
pub const CONNECTIVITY_TOL: f64 = 1e-9;

const ROW_SUM_TOL: f64 = 1e-10;
const ORTHO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    /// Susceptance, nonnegative.
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Bus angles in radians.
    pub angles: Vec<f64>,
}

impl OperatingPoint {
    pub fn flat(n: usize) -> Self {
        Self { angles: vec![0.0; n] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerNetwork {
    n: usize,
    lines: Vec<Line>,
    laplacian: DMatrix<f64>,
    /// Original bus index of each retained row.
    bus_ids: Vec<usize>,
    warnings: Vec<String>,
}

/// Builds `L` with `L_il = -V_i V_l b_il cos(δ_i - δ_l)` and zero row sums.
pub fn build_laplacian(lines: &[Line], voltages: &[f64], op: &OperatingPoint, n: usize) -> Result<PowerNetwork> {
    if n == 0 {
        return Err(Error::InvalidInput("network has no buses".into()));
    }
    if voltages.len() != n || op.angles.len() != n {
        return Err(Error::InvalidInput(format!(
            "expected {n} voltages and angles, got {} and {}",
            voltages.len(),
            op.angles.len()
        )));
    }
    if let Some(v) = voltages.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput(format!("bus voltage must be positive, got {v}")));
    }
    if op.angles.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvalidInput("operating-point angles must be finite".into()));
    }
    let mut l = DMatrix::zeros(n, n);
    let mut warnings = Vec::new();
    for line in lines {
        let (i, k) = (line.from, line.to);
        if i >= n || k >= n {
            return Err(Error::InvalidInput(format!("line {i}-{k} references a bus outside 0..{n}")));
        }
        if i == k {
            return Err(Error::InvalidInput(format!("line {i}-{k} is a self loop")));
        }
        if !(line.b >= 0.0 && line.b.is_finite()) {
            return Err(Error::InvalidInput(format!("line {i}-{k} has susceptance {}", line.b)));
        }
        let cos = (op.angles[i] - op.angles[k]).cos();
        if cos <= 0.0 && line.b > 0.0 {
            warnings.push(format!(
                "line {i}-{k}: angle difference {:.3} rad gives a nonpositive edge weight; Laplacian properties not guaranteed",
                op.angles[i] - op.angles[k]
            ));
        }
        let w = voltages[i] * voltages[k] * line.b * cos;
        l[(i, k)] -= w;
        l[(k, i)] -= w;
        l[(i, i)] += w;
        l[(k, k)] += w;
    }
    let net = PowerNetwork {
        n,
        lines: lines.to_vec(),
        laplacian: l,
        bus_ids: (0..n).collect(),
        warnings,
    };
    net.check_connected()?;
    Ok(net)
}

impl PowerNetwork {
    /// Wraps a given Laplacian after checking symmetry and zero row sums.
    pub fn from_laplacian(l: DMatrix<f64>) -> Result<Self> {
        let n = l.nrows();
        if n == 0 || l.ncols() != n {
            return Err(Error::InvalidInput("Laplacian must be square and nonempty".into()));
        }
        let scale = l.amax().max(1.0);
        for i in 0..n {
            for k in 0..i {
                if (l[(i, k)] - l[(k, i)]).abs() > ROW_SUM_TOL * scale {
                    return Err(Error::InvalidInput(format!("Laplacian not symmetric at ({i}, {k})")));
                }
            }
            if l.row(i).sum().abs() > ROW_SUM_TOL * scale {
                return Err(Error::InvalidInput(format!("Laplacian row {i} does not sum to zero")));
            }
        }
        let mut lines = Vec::new();
        let mut warnings = Vec::new();
        for i in 0..n {
            for k in (i + 1)..n {
                if l[(i, k)] != 0.0 {
                    lines.push(Line { from: i, to: k, b: -l[(i, k)] });
                    if l[(i, k)] > 0.0 {
                        warnings.push(format!("edge {i}-{k} has negative weight"));
                    }
                }
            }
        }
        let net = Self {
            n,
            lines,
            laplacian: l,
            bus_ids: (0..n).collect(),
            warnings,
        };
        net.check_connected()?;
        Ok(net)
    }

    fn check_connected(&self) -> Result<()> {
        if self.n == 1 {
            return Ok(());
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(self.laplacian.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let scale = self.laplacian.diagonal().amax().max(f64::MIN_POSITIVE);
        if ev[1] <= CONNECTIVITY_TOL * scale {
            return Err(Error::Disconnected(ev[1]));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    pub fn bus_ids(&self) -> &[usize] {
        &self.bus_ids
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Lines with nonzero weight as `(i, k, w)` with `w = -L_ik`.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for k in (i + 1)..self.n {
                let w = -self.laplacian[(i, k)];
                if w != 0.0 {
                    out.push((i, k, w));
                }
            }
        }
        out
    }

    /// Multiplies every entry of `L` by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.laplacian *= k;
        for line in &mut out.lines {
            line.b *= k;
        }
        out
    }
}

/// Schur complement of `L` with respect to `algebraic` buses.
pub fn kron_reduce(net: &PowerNetwork, algebraic: &[usize]) -> Result<PowerNetwork> {
    if algebraic.is_empty() {
        return Ok(net.clone());
    }
    let n = net.n;
    let mut is_alg = vec![false; n];
    for &a in algebraic {
        if a >= n {
            return Err(Error::InvalidInput(format!("algebraic bus {a} out of range")));
        }
        is_alg[a] = true;
    }
    let keep: Vec<usize> = (0..n).filter(|i| !is_alg[*i]).collect();
    let alg: Vec<usize> = (0..n).filter(|i| is_alg[*i]).collect();
    if keep.is_empty() {
        return Err(Error::Reduction("every bus is algebraic".into()));
    }
    let l = &net.laplacian;
    let pick = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |i, k| l[(rows[i], cols[k])]);
    let l_rr = pick(&keep, &keep);
    let l_ra = pick(&keep, &alg);
    let l_aa = pick(&alg, &alg);
    let chol = l_aa
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Reduction("interior block is singular or indefinite".into()))?;
    let diag_min = chol.l().diagonal().min();
    if diag_min <= 1e-12 * l_aa.amax().sqrt() {
        return Err(Error::Reduction("interior block is numerically singular".into()));
    }
    let x = chol.solve(&l_ra.transpose());
    let mut red = l_rr - &l_ra * x;
    // restore exact symmetry and zero row sums lost to rounding
    red = (&red + red.transpose()) * 0.5;
    for i in 0..red.nrows() {
        let off: f64 = (0..red.ncols()).filter(|k| *k != i).map(|k| red[(i, k)]).sum();
        red[(i, i)] = -off;
    }
    let mut out = PowerNetwork::from_laplacian(red)?;
    out.bus_ids = keep.iter().map(|&i| net.bus_ids[i]).collect();
    out.warnings = net.warnings.clone();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedNetwork {
    /// `γ_i = 2·L_ii`
    pub gamma: DVector<f64>,
    /// `Γ^{-1/2} L Γ^{-1/2}`
    pub l_prime: DMatrix<f64>,
    /// Eigenvalues of `L′`, ascending.
    pub mu: Vec<f64>,
    /// Orthonormal eigenvectors of `L′` as columns, in the order of `mu`.
    pub u: DMatrix<f64>,
}

pub fn normalize(net: &PowerNetwork) -> Result<NormalizedNetwork> {
    let n = net.n;
    let l = &net.laplacian;
    let mut gamma = DVector::zeros(n);
    for i in 0..n {
        if !(l[(i, i)] > 0.0) {
            return Err(Error::Normalization(net.bus_ids[i]));
        }
        gamma[i] = 2.0 * l[(i, i)];
    }
    let inv_sqrt = gamma.map(|g| 1.0 / g.sqrt());
    let l_prime = DMatrix::from_fn(n, n, |i, k| inv_sqrt[i] * l[(i, k)] * inv_sqrt[k]);
    let eig = SymmetricEigen::new(l_prime.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let mu: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut u = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);

    // the null vector is known exactly
    let null = gamma.map(f64::sqrt).normalize();
    let sign = if u.column(0).dot(&null) < 0.0 { -1.0 } else { 1.0 };
    u.set_column(0, &(null * sign));
    let gram = u.transpose() * &u;
    if (gram - DMatrix::identity(n, n)).amax() > ORTHO_TOL {
        u = gram_schmidt(u);
    }
    if n > 1 && mu[1] <= CONNECTIVITY_TOL {
        return Err(Error::Disconnected(mu[1]));
    }
    let mut mu = mu;
    mu[0] = 0.0;
    Ok(NormalizedNetwork { gamma, l_prime, mu, u })
}

fn gram_schmidt(mut u: DMatrix<f64>) -> DMatrix<f64> {
    let n = u.ncols();
    for c in 0..n {
        for _ in 0..2 {
            for p in 0..c {
                let proj = u.column(p).dot(&u.column(c));
                let prev = u.column(p).into_owned();
                let mut col = u.column_mut(c);
                col.axpy(-proj, &prev, 1.0);
            }
        }
        let norm = u.column(c).norm();
        u.column_mut(c).scale_mut(1.0 / norm);
    }
    u
}

impl NormalizedNetwork {
    pub fn n(&self) -> usize {
        self.gamma.len()
    }

    pub fn algebraic_connectivity(&self) -> f64 {
        self.mu.get(1).copied().unwrap_or(0.0)
    }

    /// Eigenvectors of the nonzero eigenvalues, `n × (n-1)`.
    pub fn u_hat(&self) -> DMatrix<f64> {
        self.u.columns(1, self.n() - 1).into_owned()
    }

    /// Nonzero eigenvalues `μ_2 … μ_n`.
    pub fn x_hat(&self) -> &[f64] {
        &self.mu[1..]
    }

    /// `Γ^{1/2} L′ Γ^{1/2}`
    pub fn denormalize(&self) -> DMatrix<f64> {
        let s = self.gamma.map(f64::sqrt);
        DMatrix::from_fn(self.n(), self.n(), |i, k| s[i] * self.l_prime[(i, k)] * s[k])
    }
}

/// Modal decomposition of a network with swing-type agents.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalSystem {
    /// Eigenvalues of `L`, ascending.
    pub lambda: Vec<f64>,
    /// Orthonormal eigenvectors of `L` as columns.
    pub v: DMatrix<f64>,
    /// Modal inertia `v_iᵀ diag(M) v_i`.
    pub inertia: Vec<f64>,
    /// Modal frequency actuator (including load damping).
    pub freq: Vec<TransferFunction>,
    /// Modal angle actuator.
    pub angle: Vec<TransferFunction>,
}

impl ModalSystem {
    /// Projects the agent parameters onto the eigenvectors of `L`. Exact for
    /// homogeneous or proportional agents; for heterogeneous agents it only
    /// approximates the interarea dynamics. Delays are rationalized with the
    /// given Padé order.
    pub fn new(net: &PowerNetwork, agents: &[Agent], pade_order: usize) -> Result<Self> {
        let n = net.n;
        if agents.len() != n {
            return Err(Error::InvalidInput(format!("{} agents for {n} buses", agents.len())));
        }
        let eig = SymmetricEigen::new(net.laplacian.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
        let lambda: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut v = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        let ones = DVector::from_element(n, 1.0 / (n as f64).sqrt());
        v.set_column(0, &ones);
        let v = gram_schmidt(v);

        let mut ms = Vec::with_capacity(n);
        let mut fs = Vec::with_capacity(n);
        let mut rs = Vec::with_capacity(n);
        for a in agents {
            match a {
                Agent::Swing(sw) => {
                    ms.push(sw.inertia);
                    fs.push(sw.freq_rational(pade_order)?);
                    rs.push(sw.angle_actuator.rationalized(pade_order)?);
                }
                Agent::Rational(_) => {
                    return Err(Error::UnsupportedStructure(
                        "modal decomposition needs swing-type agents".into(),
                    ))
                }
            }
        }
        let mut inertia = Vec::with_capacity(n);
        let mut freq = Vec::with_capacity(n);
        let mut angle = Vec::with_capacity(n);
        for i in 0..n {
            let w: Vec<f64> = (0..n).map(|k| v[(k, i)] * v[(k, i)]).collect();
            inertia.push((0..n).map(|k| w[k] * ms[k]).sum());
            freq.push(weighted_sum(&fs, &w)?);
            angle.push(weighted_sum(&rs, &w)?);
        }
        Ok(Self { lambda, v, inertia, freq, angle })
    }
}

fn weighted_sum(parts: &[TransferFunction], w: &[f64]) -> Result<TransferFunction> {
    let mut acc = TransferFunction::zero();
    for (p, wk) in parts.iter().zip(w) {
        if *wk != 0.0 && !p.is_zero() {
            acc = combine(Combination::Parallel, &acc, &p.scale(*wk))?;
        }
    }
    Ok(acc)
}

/// Closed modal loop `1/(s²M_λ + s·F_λ + R_λ + λ_i)`.
pub fn modal_siso_tf(modal: &ModalSystem, i: usize) -> Result<TransferFunction> {
    if i >= modal.lambda.len() {
        return Err(Error::InvalidInput(format!("mode {i} out of range")));
    }
    let f = &modal.freq[i];
    let r = &modal.angle[i];
    let s = Polynomial::s();
    // s²M + sF + R + λ over the common denominator d_F·d_R
    let dfr = f.den() * r.den();
    let m_part = (&(&s * &s) * &dfr).scale(modal.inertia[i]);
    let f_part = &(&s * f.num()) * r.den();
    let r_part = r.num() * f.den();
    let lam_part = dfr.scale(modal.lambda[i]);
    let den = &(&(&m_part + &f_part) + &r_part) + &lam_part;
    if den.is_zero() {
        return Err(Error::DegenerateModel(format!("mode {i} has a vanishing characteristic polynomial")));
    }
    TransferFunction::new(dfr, den)
}

/// Average-frequency model `1/(sM + F(s))`, `M = ΣM_i`, `F = Σ(F_i + D_i + R_i/s)`.
pub fn average_model(agents: &[Agent], pade_order: usize) -> Result<TransferFunction> {
    let mut m = 0.0;
    let mut f = TransferFunction::zero();
    let mut r = TransferFunction::zero();
    for a in agents {
        let Agent::Swing(sw) = a else {
            return Err(Error::UnsupportedStructure("average model needs swing-type agents".into()));
        };
        m += sw.inertia;
        let fi = sw.freq_rational(pade_order)?;
        if !fi.is_zero() {
            f = combine(Combination::Parallel, &f, &fi)?;
        }
        let ri = sw.angle_actuator.rationalized(pade_order)?;
        if !ri.is_zero() {
            r = combine(Combination::Parallel, &r, &ri)?;
        }
    }
    if m == 0.0 && f.is_zero() && r.is_zero() {
        return Err(Error::DegenerateModel("no inertia or frequency response in the aggregate".into()));
    }
    // 1/(sM + F + R/s) = s·d_F·d_R / (s²M d_F d_R + s n_F d_R + n_R d_F)
    let s = Polynomial::s();
    let dfr = f.den() * r.den();
    let den = &(&(&(&s * &s) * &dfr).scale(m) + &(&(&s * f.num()) * r.den())) + &(r.num() * f.den());
    let num = &s * &dfr;
    let tf = TransferFunction::new(num, den)?;
    if r.is_zero() {
        // the factor s cancels exactly
        let (n2, _) = tf.num().div_rem(&s)?;
        let (d2, _) = tf.den().div_rem(&s)?;
        return TransferFunction::new(n2, d2);
    }
    Ok(tf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::powerplant::{assemble_agent, FreqActuator};

    fn line(from: usize, to: usize, b: f64) -> Line {
        Line { from, to, b }
    }

    #[test]
    fn two_bus_and_chain() {
        let net = build_laplacian(&[line(0, 1, 1.0)], &[1.0, 1.0], &OperatingPoint::flat(2), 2).unwrap();
        assert_eq!(net.laplacian(), &DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));

        let net = build_laplacian(&[line(0, 1, 1.0), line(1, 2, 1.0)], &[1.0; 3], &OperatingPoint::flat(3), 3).unwrap();
        let d: Vec<f64> = net.laplacian().diagonal().iter().copied().collect();
        assert_eq!(d, vec![1.0, 2.0, 1.0]);
        let mut ev: Vec<f64> = SymmetricEigen::new(net.laplacian().clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        for (a, b) in ev.iter().zip([0.0, 1.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn angle_difference_weight() {
        let op = OperatingPoint { angles: vec![0.0, std::f64::consts::PI / 3.0] };
        let net = build_laplacian(&[line(0, 1, 1.0)], &[1.0, 1.0], &op, 2).unwrap();
        assert!((net.laplacian()[(0, 1)] + 0.5).abs() < 1e-15);
        assert!(net.warnings().is_empty());
    }

    #[test]
    fn disconnected_is_rejected() {
        let r = build_laplacian(&[line(0, 1, 1.0)], &[1.0; 3], &OperatingPoint::flat(3), 3);
        assert!(matches!(r, Err(Error::Disconnected(_))));
    }

    #[test]
    fn kron_examples() {
        let star = build_laplacian(&[line(0, 1, 1.0), line(1, 2, 1.0)], &[1.0; 3], &OperatingPoint::flat(3), 3).unwrap();
        let red = kron_reduce(&star, &[1]).unwrap();
        assert!((red.laplacian()[(0, 1)] + 0.5).abs() < 1e-15);
        assert_eq!(red.bus_ids(), &[0, 2]);

        let path = build_laplacian(
            &[line(0, 1, 1.0), line(1, 2, 1.0), line(2, 3, 1.0)],
            &[1.0; 4],
            &OperatingPoint::flat(4),
            4,
        )
        .unwrap();
        let red = kron_reduce(&path, &[1, 2]).unwrap();
        assert!((red.laplacian()[(0, 1)] + 1.0 / 3.0).abs() < 1e-14);
        assert_eq!(kron_reduce(&path, &[]).unwrap(), path);
    }

    #[test]
    fn normalize_two_bus() {
        let net = build_laplacian(&[line(0, 1, 1.0)], &[1.0, 1.0], &OperatingPoint::flat(2), 2).unwrap();
        let nn = normalize(&net).unwrap();
        assert_eq!(nn.gamma.as_slice(), &[2.0, 2.0]);
        assert!((nn.l_prime[(0, 1)] + 0.5).abs() < 1e-15);
        assert!(nn.mu[0].abs() < 1e-12 && (nn.mu[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn modal_examples() {
        let net = build_laplacian(&[line(0, 1, 1.0)], &[1.0, 1.0], &OperatingPoint::flat(2), 2).unwrap();
        // g = 1/(s(s+1)): M = 1, F = 1
        let agents: Vec<Agent> = (0..2)
            .map(|_| assemble_agent(1.0, vec![FreqActuator::Linear(TransferFunction::gain(1.0))], 0.0, None).unwrap())
            .collect();
        let modal = ModalSystem::new(&net, &agents, 3).unwrap();
        let h2 = modal_siso_tf(&modal, 1).unwrap();
        let want = TransferFunction::from_coeffs(&[1.0], &[2.0, 1.0, 1.0]).unwrap();
        assert!(h2.mismatch(&want) < 1e-12, "{h2}");
        let h1 = modal_siso_tf(&modal, 0).unwrap();
        let want = TransferFunction::from_coeffs(&[1.0], &[0.0, 1.0, 1.0]).unwrap();
        assert!(h1.mismatch(&want) < 1e-12, "{h1}");
    }

    #[test]
    fn average_model_examples() {
        let a = assemble_agent(1.0, vec![], 0.0, None).unwrap();
        let g = average_model(&[a], 3).unwrap();
        assert!(g.mismatch(&TransferFunction::from_coeffs(&[1.0], &[0.0, 1.0]).unwrap()) < 1e-15);
    }
}
