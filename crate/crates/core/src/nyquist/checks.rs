use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::contour::{make_contour, Contour, ContourKind, DEFAULT_DENSITY};
use super::hull::{convex_hull, leftmost_real_crossing, segment_real_crossing};
use super::sweep::{sweep_matrix, vertex_sweep, LociSweep, LoopMatrix};
use crate::error::{Error, Result};
use crate::lti::{self, AXIS_TOL};
use crate::network::NormalizedNetwork;
use crate::powerplant::Agent;

/// Padé order used whenever delays must be rationalized for pole counting.
pub const GATE_PADE_ORDER: usize = 5;

/// Band around −1 in which a hull crossing counts as touching.
pub const RAY_BAND: f64 = 1e-6;

/// Loci magnitude accepted on the closure arc.
pub const CLOSURE_TOL: f64 = 1e-3;

const CLUSTER_TOL: f64 = 1e-6;
const RANK_TOL: f64 = 1e-9;
const ALPHA_SAMPLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Stable,
    Unstable,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: String,
    pub frequency_rad_s: f64,
    /// Offending value, `[re, im]`.
    pub value: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosestApproach {
    pub distance: f64,
    pub frequency_rad_s: f64,
    pub point: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub result: Outcome,
    pub winding: Option<i64>,
    #[serde(rename = "N")]
    pub n_required: Option<usize>,
    pub violations: Vec<Violation>,
    pub closest_approach: Option<ClosestApproach>,
    #[serde(default)]
    pub diagnostics: Vec<String>,
}

impl Verdict {
    fn new(result: Outcome) -> Self {
        Self {
            result,
            winding: None,
            n_required: None,
            violations: Vec::new(),
            closest_approach: None,
            diagnostics: Vec::new(),
        }
    }

    pub fn is_stable(&self) -> bool {
        self.result == Outcome::Stable
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Outer radius; defaults to 100× the largest agent pole/zero modulus.
    pub outer_radius: Option<f64>,
    pub density: usize,
    pub pade_order: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            outer_radius: None,
            density: DEFAULT_DENSITY,
            pade_order: GATE_PADE_ORDER,
        }
    }
}

/// Separating line through `point` with unit `normal`; the admissible side is
/// `Re(conj(normal)·(z - point)) > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperplane {
    pub point: Complex64,
    pub normal: Complex64,
}

impl Hyperplane {
    pub fn new(point: Complex64, normal: Complex64) -> Result<Self> {
        let n = normal.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidInput("hyperplane normal must be nonzero".into()));
        }
        Ok(Self { point, normal: normal / n })
    }

    /// Vertical line `Re z = re`, admissible side to the right.
    pub fn vertical(re: f64) -> Self {
        Self {
            point: Complex64::new(re, 0.0),
            normal: Complex64::new(1.0, 0.0),
        }
    }

    pub fn side(&self, z: Complex64) -> f64 {
        (self.normal.conj() * (z - self.point)).re
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    /// Inner contour radius, rad/s.
    pub r: f64,
    pub hyperplane: Hyperplane,
    /// Largest admissible actuator delay, s.
    pub tau_max: f64,
}

/// Right-half-plane poles of an agent, delays rationalized.
fn agent_rational(agent: &Agent, pade_order: usize) -> Result<lti::TransferFunction> {
    agent.rational_g(pade_order)
}

/// Default outer radius: 100× the largest pole/zero modulus over all agents.
pub fn default_outer_radius(agents: &[Agent], r: f64, pade_order: usize) -> Result<f64> {
    let mut m: f64 = 0.0;
    for a in agents {
        m = m.max(agent_rational(a, pade_order)?.characteristic_modulus()?);
    }
    Ok((100.0 * m).max(100.0 * r).max(100.0))
}

/// Imaginary parts of poles on the imaginary axis, upper half.
fn axis_poles(agents: &[Agent], pade_order: usize) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for a in agents {
        for p in agent_rational(a, pade_order)?.poles()? {
            if p.re.abs() <= AXIS_TOL * p.norm().max(1.0) && p.im > 0.0 {
                out.push(p.im);
            }
        }
    }
    Ok(out)
}

/// Contour used by the checks: outer radius from `opts` or the default, and
/// indentations around jω-axis agent poles.
pub fn build_contour(agents: &[Agent], kind: ContourKind, r: f64, opts: &SweepOptions) -> Result<Contour> {
    let big_r = match opts.outer_radius {
        Some(x) => x,
        None => default_outer_radius(agents, r, opts.pade_order)?,
    };
    make_contour(kind, r, big_r, opts.density, &axis_poles(agents, opts.pade_order)?)
}

/// Taylor coefficients of a real polynomial about `p`.
fn taylor(coeffs: &[f64], p: Complex64) -> Vec<Complex64> {
    let mut work: Vec<Complex64> = coeffs.iter().map(|c| Complex64::new(*c, 0.0)).collect();
    let mut out = Vec::with_capacity(work.len());
    while !work.is_empty() {
        // synthetic division by (s - p); the remainder is the next coefficient
        let n = work.len();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut quotient = vec![Complex64::new(0.0, 0.0); n - 1];
        for k in (0..n).rev() {
            acc = acc * p + work[k];
            if k > 0 {
                quotient[k - 1] = acc;
            }
        }
        out.push(acc);
        work = quotient;
    }
    out
}

/// Laurent coefficients `ρ_1 … ρ_m` of `num/den` at a pole of multiplicity `m`.
fn laurent(g: &lti::TransferFunction, p: Complex64, m: usize) -> Vec<Complex64> {
    let nt = taylor(g.num().coeffs(), p);
    let dt = taylor(g.den().coeffs(), p);
    let q: Vec<Complex64> = dt.iter().skip(m).copied().collect();
    let zero = Complex64::new(0.0, 0.0);
    let mut h = vec![zero; m];
    for j in 0..m {
        let mut acc = nt.get(j).copied().unwrap_or(zero);
        for l in 1..=j {
            acc -= q.get(l).copied().unwrap_or(zero) * h[j - l];
        }
        h[j] = acc / q[0];
    }
    (1..=m).map(|k| h[m - k]).collect()
}

/// McMillan degree of the right-half-plane poles of the loop matrix.
///
/// Poles shared between agents are merged into clusters; each cluster
/// contributes the rank of its block Hankel matrix of Laurent coefficients.
pub fn unstable_pole_count(netn: &NormalizedNetwork, agents: &[Agent], kind: LoopMatrix, pade_order: usize) -> Result<usize> {
    let (basis, weights) = match kind {
        LoopMatrix::Compressed => (netn.u_hat(), netn.x_hat().to_vec()),
        LoopMatrix::Lossy(eps) => (netn.u.clone(), netn.mu.iter().map(|m| m + eps).collect()),
    };
    let q = basis.ncols();
    if q == 0 {
        return Ok(0);
    }
    // (agent, pole) pairs in the open upper-right quadrant and on the positive real axis
    let mut tfs = Vec::with_capacity(agents.len());
    let mut entries: Vec<(usize, Complex64)> = Vec::new();
    for (i, a) in agents.iter().enumerate() {
        let g = agent_rational(a, pade_order)?;
        for p in g.poles()? {
            let tol = AXIS_TOL * p.norm().max(1.0);
            if p.re > tol && p.im >= -tol {
                entries.push((i, p));
            }
        }
        tfs.push(g);
    }
    let mut clusters: Vec<Vec<(usize, Complex64)>> = Vec::new();
    for e in entries {
        let near = clusters
            .iter_mut()
            .find(|c| (c[0].1 - e.1).norm() <= CLUSTER_TOL * e.1.norm().max(1.0));
        match near {
            Some(c) => c.push(e),
            None => clusters.push(vec![e]),
        }
    }

    let sw: Vec<f64> = weights.iter().map(|w| w.max(0.0).sqrt()).collect();
    let mut total = 0;
    for c in clusters {
        let mut per_agent: Vec<(usize, Vec<Complex64>)> = Vec::new();
        for (i, p) in &c {
            match per_agent.iter_mut().find(|(j, _)| j == i) {
                Some((_, ps)) => ps.push(*p),
                None => per_agent.push((*i, vec![*p])),
            }
        }
        let m = per_agent.iter().map(|(_, ps)| ps.len()).max().unwrap_or(0);
        // R_k = S Ûᵀ diag(γ_i ρ_{i,k}) Û S
        let mut rk = vec![DMatrix::<Complex64>::zeros(q, q); m];
        for (i, ps) in &per_agent {
            let center = ps.iter().sum::<Complex64>() / ps.len() as f64;
            let rho = laurent(&tfs[*i], center, ps.len());
            for (k, r) in rho.iter().enumerate() {
                let w = r * netn.gamma[*i];
                for a in 0..q {
                    for b in 0..q {
                        rk[k][(a, b)] += w * (basis[(*i, a)] * basis[(*i, b)] * sw[a] * sw[b]);
                    }
                }
            }
        }
        let mut hankel = DMatrix::<Complex64>::zeros(m * q, m * q);
        for a in 0..m {
            for b in 0..m {
                if a + b < m {
                    hankel.view_mut((a * q, b * q), (q, q)).copy_from(&rk[a + b]);
                }
            }
        }
        let sv = hankel.singular_values();
        let smax = sv.max();
        let rank = sv.iter().filter(|s| **s > RANK_TOL * smax && **s > 0.0).count();
        let is_real = c[0].1.im.abs() <= AXIS_TOL * c[0].1.norm().max(1.0);
        total += if is_real { rank } else { 2 * rank };
    }
    Ok(total)
}

fn closest_diag(sweep: &LociSweep, point: Complex64) -> Option<ClosestApproach> {
    sweep.closest_approach(point).map(|a| ClosestApproach {
        distance: a.distance,
        frequency_rad_s: sweep.frequency(a.sample),
        point: sweep.loci[a.sample][a.curve],
    })
}

fn loci_verdict(netn: &NormalizedNetwork, agents: &[Agent], kind: LoopMatrix, opts: &SweepOptions) -> Result<Verdict> {
    let m1 = Complex64::new(-1.0, 0.0);
    let n_req = unstable_pole_count(netn, agents, kind, opts.pade_order)?;
    let contour = build_contour(agents, ContourKind::FullD, 0.0, opts)?;
    let sweep = sweep_matrix(netn, agents, &contour, kind)?;

    let mut v = Verdict::new(Outcome::Inconclusive);
    v.n_required = Some(n_req);
    v.closest_approach = closest_diag(&sweep, m1);

    if sweep.vertices.iter().flatten().all(|z| *z == Complex64::new(0.0, 0.0)) {
        v.diagnostics.push("degenerate loop: every agent response vanishes on the contour".into());
        return Ok(v);
    }
    let closure_max = sweep
        .samples
        .iter()
        .zip(&sweep.loci)
        .filter(|(x, _)| sweep.pieces[x.piece].is_closure())
        .flat_map(|(_, l)| l.iter().map(|z| z.norm()))
        .fold(0.0, f64::max);
    if closure_max >= CLOSURE_TOL {
        v.diagnostics.push(format!(
            "loci reach {closure_max:.3e} on the closure arc; loop is not strictly proper at R = {}",
            contour.outer_radius
        ));
    }
    if !sweep.flagged.is_empty() {
        v.diagnostics.push(format!("{} samples flagged during branch matching", sweep.flagged.len()));
    }
    match sweep.total_winding(m1) {
        Ok(w) => {
            v.winding = Some(w);
            v.result = if w == n_req as i64 { Outcome::Stable } else { Outcome::Unstable };
            if v.result == Outcome::Unstable {
                v.violations.push(Violation {
                    condition: format!("winding {w} about -1 differs from N = {n_req}"),
                    frequency_rad_s: v.closest_approach.as_ref().map_or(f64::NAN, |c| c.frequency_rad_s),
                    value: v.closest_approach.as_ref().map_or(m1, |c| c.point),
                });
            }
        }
        Err(Error::MarginalStability { distance, .. }) => {
            v.diagnostics.push(format!("loci pass within {distance:.3e} of -1"));
        }
        Err(Error::Undersampled { index, step }) => {
            v.diagnostics.push(format!(
                "argument step {step:.3} rad after maximal refinement near omega = {}",
                sweep.frequency(index)
            ));
        }
        Err(e) => return Err(e),
    }
    Ok(v)
}

/// Asymptotic synchronization test: the nonzero eigenloci of `L′G′(s)` must
/// encircle −1 exactly `N` times anticlockwise on the full D-contour.
pub fn theorem1_check(netn: &NormalizedNetwork, agents: &[Agent], opts: &SweepOptions) -> Result<Verdict> {
    loci_verdict(netn, agents, LoopMatrix::Compressed, opts)
}

/// Exponential stability of the interconnection with `L′` replaced by `L′ + εI`.
pub fn lossy_exponential_check(netn: &NormalizedNetwork, agents: &[Agent], epsilon: f64, opts: &SweepOptions) -> Result<Verdict> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "epsilon must be positive, got {epsilon}; use the synchronization check for epsilon = 0"
        )));
    }
    loci_verdict(netn, agents, LoopMatrix::Lossy(epsilon), opts)
}

/// Sufficient field-of-values test: the convex hull of the vertices
/// `γ_i g_i(s)` must avoid the ray `(-∞, -1]` on the whole contour. On the full
/// D-contour no agent may have right-half-plane poles; on a D_r-contour none
/// may have such poles of modulus at least `r`.
pub fn fov_check(netn: &NormalizedNetwork, agents: &[Agent], kind: ContourKind, r: f64, opts: &SweepOptions) -> Result<Verdict> {
    if agents.len() != netn.n() {
        return Err(Error::InvalidInput(format!("{} agents for {} buses", agents.len(), netn.n())));
    }
    let gate_r = if kind == ContourKind::FullD { 0.0 } else { r };
    let mut v = Verdict::new(Outcome::Stable);
    for (i, a) in agents.iter().enumerate() {
        for p in a.rhp_poles_in_region(gate_r, opts.pade_order)? {
            v.violations.push(Violation {
                condition: format!("pole-gate: agent {} has an unstable pole inside the contour", i + 1),
                frequency_rad_s: p.norm(),
                value: p,
            });
        }
    }
    let contour = build_contour(agents, kind, r, opts)?;
    let gamma: Vec<f64> = netn.gamma.iter().copied().collect();
    let sweep = vertex_sweep(&gamma, agents, &contour)?;
    let mut marginal = false;
    let mut leftmost: Option<(f64, f64)> = None;
    for (k, verts) in sweep.vertices.iter().enumerate() {
        let hull = convex_hull(verts);
        let mut crossings: Vec<f64> = leftmost_real_crossing(&hull).into_iter().collect();
        if k + 1 < sweep.vertices.len() {
            for (a, b) in verts.iter().zip(&sweep.vertices[k + 1]) {
                crossings.extend(segment_real_crossing(*a, *b));
            }
        }
        for x in crossings {
            if leftmost.is_none_or(|(y, _)| x < y) {
                leftmost = Some((x, sweep.frequency(k)));
            }
            if x < -1.0 - RAY_BAND {
                if v.violations.iter().all(|viol| !viol.condition.starts_with("ray")) {
                    v.violations.push(Violation {
                        condition: "ray: field of values meets (-inf, -1]".into(),
                        frequency_rad_s: sweep.frequency(k),
                        value: Complex64::new(x, 0.0),
                    });
                }
            } else if (x + 1.0).abs() <= RAY_BAND {
                marginal = true;
            }
        }
    }
    if let Some((x, w)) = leftmost {
        v.closest_approach = Some(ClosestApproach {
            distance: (x + 1.0).abs(),
            frequency_rad_s: w,
            point: Complex64::new(x, 0.0),
        });
    }
    if !v.violations.is_empty() {
        v.result = Outcome::Unstable;
        v.diagnostics.push("sufficient field-of-values condition not met".into());
    } else if marginal {
        v.result = Outcome::Inconclusive;
        v.diagnostics.push("field of values touches -1".into());
    }
    if let Some(d) = alpha_scan(&sweep, netn.algebraic_connectivity()) {
        v.diagnostics.push(d);
    }
    Ok(v)
}

/// Heuristic companion to the ray test: windings of `α·γ_i g_i` about −1 for
/// sampled `α ∈ [μ_2, 1]`.
fn alpha_scan(sweep: &LociSweep, mu2: f64) -> Option<String> {
    let m1 = Complex64::new(-1.0, 0.0);
    let n = sweep.vertices.first()?.len();
    let lo = mu2.clamp(1e-9, 1.0);
    for j in 0..ALPHA_SAMPLES {
        let alpha = lo + (1.0 - lo) * j as f64 / (ALPHA_SAMPLES - 1) as f64;
        for i in 0..n {
            if let Ok(w) = sweep.vertex_winding(i, alpha, m1) {
                if w != 0 {
                    return Some(format!(
                        "heuristic alpha scan: vertex {} winds {w} times about -1 at alpha = {alpha:.3}",
                        i + 1
                    ));
                }
            }
        }
    }
    Some("heuristic alpha scan: no vertex winds about -1".into())
}

/// Smallest radius on `grid` (ascending) at which [`fov_check`] on the D_r
/// contour passes. Radii where a pole sits on the contour are skipped.
pub fn fov_min_radius(netn: &NormalizedNetwork, agents: &[Agent], grid: &[f64], opts: &SweepOptions) -> Result<Option<f64>> {
    for &r in grid {
        match fov_check(netn, agents, ContourKind::Dr, r, opts) {
            Ok(v) if v.is_stable() => return Ok(Some(r)),
            Ok(_) => {}
            Err(Error::BoundaryAmbiguity { .. }) | Err(Error::Contour(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

/// Network-independent per-agent test on a D_r-contour:
/// 1. no unstable agent poles of modulus at least `r`;
/// 2. the vertex never enters `{Re < -1, Im > 0}` on the upper half of the
///    contour, closure arc excluded;
/// 3. for `ω > π/(2τ_max)` the vertex stays strictly on the admissible side of
///    the policy hyperplane.
pub fn decentralized_check(agent: &Agent, gamma_bound: f64, policy: &Policy, opts: &SweepOptions) -> Result<Verdict> {
    if !(gamma_bound > 0.0 && gamma_bound.is_finite()) {
        return Err(Error::InvalidInput(format!("gamma bound must be positive, got {gamma_bound}")));
    }
    if !(policy.tau_max >= 0.0) {
        return Err(Error::InvalidInput("tau_max must be >= 0".into()));
    }
    let mut v = Verdict::new(Outcome::Stable);
    if let Some(p) = agent.rhp_poles_in_region(policy.r, opts.pade_order)?.first() {
        v.violations.push(Violation {
            condition: "1: unstable pole inside the D_r contour".into(),
            frequency_rad_s: p.norm(),
            value: *p,
        });
    }
    let agents = std::slice::from_ref(agent);
    let contour = build_contour(agents, ContourKind::Dr, policy.r, opts)?;
    let sweep = vertex_sweep(&[gamma_bound], agents, &contour)?;
    let omega_c = if policy.tau_max > 0.0 {
        std::f64::consts::PI / (2.0 * policy.tau_max)
    } else {
        f64::INFINITY
    };
    let mut cond2: Option<Violation> = None;
    let mut cond3: Option<Violation> = None;
    let mut min_side = f64::INFINITY;
    for (k, x) in sweep.samples.iter().enumerate() {
        if sweep.pieces[x.piece].is_closure() {
            continue;
        }
        let z = sweep.vertices[k][0];
        if cond2.is_none() && z.re < -1.0 && z.im > 0.0 {
            cond2 = Some(Violation {
                condition: "2: vertex enters {Re < -1, Im > 0}".into(),
                frequency_rad_s: x.s.im,
                value: z,
            });
        }
        if x.s.im > omega_c {
            let side = policy.hyperplane.side(z);
            min_side = min_side.min(side);
            if cond3.is_none() && side <= 0.0 {
                cond3 = Some(Violation {
                    condition: "3: vertex on the wrong side of the hyperplane".into(),
                    frequency_rad_s: x.s.im,
                    value: z,
                });
            }
        }
    }
    v.violations.extend(cond2);
    v.violations.extend(cond3);
    if min_side.is_finite() {
        v.diagnostics.push(format!("minimum hyperplane margin above {omega_c:.4} rad/s: {min_side:.4}"));
    }
    let m1 = Complex64::new(-1.0, 0.0);
    if let Some(a) = sweep.vertices.iter().enumerate().min_by(|a, b| (a.1[0] - m1).norm().total_cmp(&(b.1[0] - m1).norm())) {
        v.closest_approach = Some(ClosestApproach {
            distance: (a.1[0] - m1).norm(),
            frequency_rad_s: sweep.frequency(a.0),
            point: a.1[0],
        });
    }
    if !v.violations.is_empty() {
        v.result = Outcome::Unstable;
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::TransferFunction;

    #[test]
    fn laurent_simple_and_double() {
        // 1/((s-1)(s+2)): residue at 1 is 1/3
        let g = TransferFunction::from_coeffs(&[1.0], &[-2.0, 1.0, 1.0]).unwrap();
        let r = laurent(&g, Complex64::new(1.0, 0.0), 1);
        assert!((r[0] - Complex64::new(1.0 / 3.0, 0.0)).norm() < 1e-14);
        // (s+1)/(s-1)^2 = 2/(s-1)^2 + 1/(s-1)
        let g = TransferFunction::from_coeffs(&[1.0, 1.0], &[1.0, -2.0, 1.0]).unwrap();
        let r = laurent(&g, Complex64::new(1.0, 0.0), 2);
        assert!((r[0] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!((r[1] - Complex64::new(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn hyperplane_side() {
        let h = Hyperplane::vertical(-0.9);
        assert!(h.side(Complex64::new(0.0, 5.0)) > 0.0);
        assert!(h.side(Complex64::new(-1.0, 0.0)) < 0.0);
    }
}
