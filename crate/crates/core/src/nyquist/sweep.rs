use std::f64::consts::PI;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use rayon::prelude::*;

use super::contour::{Contour, ContourSample, Piece};
use super::winding::{arg_increment, segment_distance, ON_CURVE_TOL};
use crate::error::{Error, Result};
use crate::network::NormalizedNetwork;
use crate::powerplant::Agent;

/// Maximum number of bisection passes over the contour.
pub const MAX_REFINE_LEVELS: usize = 12;

/// Argument step about −1 above which a contour interval is bisected.
const REFINE_STEP: f64 = PI / 4.0;

/// Argument step that must never survive refinement.
const HARD_STEP: f64 = PI / 2.0;

const AMBIGUITY_TOL: f64 = 1e-12;

/// Return-ratio matrix whose eigenvalues form the loci.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoopMatrix {
    /// `(n-1)×(n-1)` matrix `X̂^{1/2} Ûᵀ G′ Û X̂^{1/2}`; its spectrum is the
    /// nonzero spectrum of `L′G′`.
    Compressed,
    /// All `n` eigenvalues of `(L′ + εI)G′`.
    Lossy(f64),
}

/// Eigenloci and vertices along the upper half of a contour.
#[derive(Debug, Clone)]
pub struct LociSweep {
    pub samples: Vec<ContourSample>,
    pub pieces: Vec<Piece>,
    /// `loci[k][b]`: branch `b` at sample `k`, matched for continuity.
    pub loci: Vec<Vec<Complex64>>,
    /// `vertices[k][i] = γ_i g_i(s_k)`
    pub vertices: Vec<Vec<Complex64>>,
    /// Samples where branch matching was ambiguous or a step stayed large.
    pub flagged: Vec<usize>,
}

struct Point {
    sample: ContourSample,
    loci: Vec<Complex64>,
    vertices: Vec<Complex64>,
}

fn eigenvalues(m: DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    match m.nrows() {
        0 => Ok(Vec::new()),
        1 => Ok(vec![m[(0, 0)]]),
        _ => {
            let schur = Schur::try_new(m, f64::EPSILON, 100_000)
                .ok_or_else(|| Error::Contour("eigenvalue iteration did not converge".into()))?;
            let ev = schur
                .eigenvalues()
                .ok_or_else(|| Error::Contour("eigenvalue extraction failed".into()))?;
            Ok(ev.iter().copied().collect())
        }
    }
}

/// Evaluates vertices `γ_i g_i(s)` for all agents.
pub fn vertices_at(gamma: &[f64], agents: &[Agent], s: Complex64) -> Result<Vec<Complex64>> {
    agents
        .iter()
        .zip(gamma)
        .enumerate()
        .map(|(i, (a, g))| match a.eval(s) {
            Ok(v) => Ok(v * *g),
            Err(Error::PoleHit(s)) => Err(Error::PoleOnContour { agent: i, s }),
            Err(e) => Err(e),
        })
        .collect()
}

/// Evaluator of loci for a normalized network.
pub struct LociEvaluator<'a> {
    agents: &'a [Agent],
    gamma: Vec<f64>,
    basis: DMatrix<f64>,
    weights: Vec<f64>,
}

impl<'a> LociEvaluator<'a> {
    pub fn new(netn: &NormalizedNetwork, agents: &'a [Agent], kind: LoopMatrix) -> Result<Self> {
        if agents.len() != netn.n() {
            return Err(Error::InvalidInput(format!(
                "{} agents for a network of {} buses",
                agents.len(),
                netn.n()
            )));
        }
        let (basis, weights) = match kind {
            LoopMatrix::Compressed => (netn.u_hat(), netn.x_hat().to_vec()),
            LoopMatrix::Lossy(eps) => (netn.u.clone(), netn.mu.iter().map(|m| m + eps).collect()),
        };
        Ok(Self {
            agents,
            gamma: netn.gamma.iter().copied().collect(),
            basis,
            weights,
        })
    }

    pub fn eval(&self, s: Complex64) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let v = vertices_at(&self.gamma, self.agents, s)?;
        let m = self.basis.ncols();
        let sw: Vec<f64> = self.weights.iter().map(|w| w.max(0.0).sqrt()).collect();
        let mat = DMatrix::from_fn(m, m, |a, b| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, vi) in v.iter().enumerate() {
                acc += vi * (self.basis[(i, a)] * self.basis[(i, b)]);
            }
            acc * (sw[a] * sw[b])
        });
        Ok((eigenvalues(mat)?, v))
    }
}

/// Sweeps the loci of the network return ratio along `contour`.
pub fn eigenloci_sweep(netn: &NormalizedNetwork, agents: &[Agent], contour: &Contour) -> Result<LociSweep> {
    sweep_matrix(netn, agents, contour, LoopMatrix::Compressed)
}

pub fn sweep_matrix(netn: &NormalizedNetwork, agents: &[Agent], contour: &Contour, kind: LoopMatrix) -> Result<LociSweep> {
    let ev = LociEvaluator::new(netn, agents, kind)?;
    adaptive_sweep(contour, |s| ev.eval(s))
}

/// Sweeps vertices only, for network-independent checks.
pub fn vertex_sweep(gamma: &[f64], agents: &[Agent], contour: &Contour) -> Result<LociSweep> {
    adaptive_sweep(contour, |s| Ok((Vec::new(), vertices_at(gamma, agents, s)?)))
}

/// Evaluates `f` on the contour samples and bisects intervals where any
/// locus or vertex turns by more than π/4 about −1.
pub fn adaptive_sweep<F>(contour: &Contour, f: F) -> Result<LociSweep>
where
    F: Fn(Complex64) -> Result<(Vec<Complex64>, Vec<Complex64>)> + Sync,
{
    let eval = |x: &ContourSample| -> Result<Point> {
        let (loci, vertices) = f(x.s)?;
        Ok(Point { sample: *x, loci, vertices })
    };
    let mut points: Vec<Point> = contour.samples().par_iter().map(eval).collect::<Result<_>>()?;
    let mut flagged = match_all(&mut points);

    for _ in 0..MAX_REFINE_LEVELS {
        let coarse: Vec<usize> = (0..points.len() - 1)
            .filter(|&k| max_step(&points[k], &points[k + 1]) >= REFINE_STEP)
            .collect();
        if coarse.is_empty() {
            break;
        }
        let mids: Vec<ContourSample> = coarse
            .iter()
            .map(|&k| contour.midpoint(&points[k].sample, &points[k + 1].sample))
            .collect();
        let new: Vec<Point> = mids.par_iter().map(eval).collect::<Result<_>>()?;
        let mut merged = Vec::with_capacity(points.len() + new.len());
        let mut new_iter = new.into_iter();
        let mut next_coarse = coarse.iter().peekable();
        for (k, p) in points.into_iter().enumerate() {
            merged.push(p);
            if next_coarse.peek() == Some(&&k) {
                next_coarse.next();
                merged.push(new_iter.next().expect("one midpoint per interval"));
            }
        }
        points = merged;
        flagged = match_all(&mut points);
    }
    for k in 0..points.len() - 1 {
        if max_step(&points[k], &points[k + 1]) >= HARD_STEP {
            flagged.push(k);
        }
    }
    flagged.sort_unstable();
    flagged.dedup();

    let mut samples = Vec::with_capacity(points.len());
    let mut loci = Vec::with_capacity(points.len());
    let mut vertices = Vec::with_capacity(points.len());
    for p in points {
        samples.push(p.sample);
        loci.push(p.loci);
        vertices.push(p.vertices);
    }
    Ok(LociSweep {
        samples,
        pieces: contour.pieces.clone(),
        loci,
        vertices,
        flagged,
    })
}

fn max_step(a: &Point, b: &Point) -> f64 {
    let m1 = Complex64::new(-1.0, 0.0);
    a.loci
        .iter()
        .zip(&b.loci)
        .chain(a.vertices.iter().zip(&b.vertices))
        .map(|(x, y)| if *x == m1 || *y == m1 { PI } else { arg_increment(*x, *y, m1).abs() })
        .fold(0.0, f64::max)
}

/// Reorders loci of each point to continue the branches of its predecessor.
/// Returns indices of points where the assignment was ambiguous.
fn match_all(points: &mut [Point]) -> Vec<usize> {
    let mut flagged = Vec::new();
    for k in 1..points.len() {
        let (head, tail) = points.split_at_mut(k);
        let prev = &head[k - 1].loci;
        let next = &mut tail[0].loci;
        if match_branches(prev, next) {
            flagged.push(k);
        }
    }
    flagged
}

/// Permutes `next` so that `next[b]` continues `prev[b]`. Greedy nearest
/// assignment, falling back to an optimal assignment when the greedy cost
/// exceeds twice the row-minimum lower bound. Returns true when two
/// candidates were indistinguishable.
pub fn match_branches(prev: &[Complex64], next: &mut [Complex64]) -> bool {
    let n = prev.len();
    if n <= 1 || next.len() != n {
        return false;
    }
    let cost = |i: usize, j: usize| (prev[i] - next[j]).norm();
    let scale = prev.iter().chain(next.iter()).map(|z| z.norm()).fold(1.0, f64::max);

    let mut ambiguous = false;
    for i in 0..n {
        for j in (i + 1)..n {
            if (next[i] - next[j]).norm() <= AMBIGUITY_TOL * scale && (prev[i] - prev[j]).norm() > AMBIGUITY_TOL * scale {
                ambiguous = true;
            }
        }
    }

    let lower: f64 = (0..n).map(|i| (0..n).map(|j| cost(i, j)).fold(f64::INFINITY, f64::min)).sum();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            pairs.push((cost(i, j), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut assign = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let mut greedy = 0.0;
    for (c, i, j) in pairs {
        if assign[i] == usize::MAX && !used[j] {
            assign[i] = j;
            used[j] = true;
            greedy += c;
        }
    }
    if greedy > 2.0 * lower {
        let costs: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| cost(i, j)).collect()).collect();
        assign = hungarian(&costs);
    }
    let permuted: Vec<Complex64> = assign.iter().map(|&j| next[j]).collect();
    next.copy_from_slice(&permuted);
    ambiguous
}

/// Minimum-cost perfect assignment; returns the column chosen for each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut ans = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            ans[p[j] - 1] = j - 1;
        }
    }
    ans
}

/// Nearest approach of a set of curves to a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Approach {
    pub distance: f64,
    pub sample: usize,
    pub curve: usize,
}

impl LociSweep {
    pub fn branch_count(&self) -> usize {
        self.loci.first().map_or(0, |l| l.len())
    }

    pub fn frequency(&self, k: usize) -> f64 {
        self.samples[k].s.im
    }

    pub fn branch(&self, b: usize) -> Vec<Complex64> {
        self.loci.iter().map(|l| l[b]).collect()
    }

    pub fn vertex_track(&self, i: usize) -> Vec<Complex64> {
        self.vertices.iter().map(|v| v[i]).collect()
    }

    /// Closest approach of the loci (all branches, mirrored half included) to `point`.
    pub fn closest_approach(&self, point: Complex64) -> Option<Approach> {
        closest(&self.loci, point)
    }

    /// Anticlockwise winding of all loci taken together about `point` over the
    /// whole closed contour.
    pub fn total_winding(&self, point: Complex64) -> Result<i64> {
        winding_of_tracks(&self.loci, point, point.norm().max(1.0))
    }

    /// Anticlockwise winding of `α·γ_i g_i(s)` about `point` over the closed contour.
    pub fn vertex_winding(&self, i: usize, alpha: f64, point: Complex64) -> Result<i64> {
        let tracks: Vec<Vec<Complex64>> = self.vertices.iter().map(|v| vec![v[i] * alpha]).collect();
        winding_of_tracks(&tracks, point, point.norm().max(1.0))
    }
}

fn closest(tracks: &[Vec<Complex64>], point: Complex64) -> Option<Approach> {
    let mut best: Option<Approach> = None;
    for k in 0..tracks.len().saturating_sub(1) {
        for b in 0..tracks[k].len() {
            let d = segment_distance(tracks[k][b], tracks[k + 1][b], point);
            if best.is_none_or(|x| d < x.distance) {
                best = Some(Approach { distance: d, sample: k, curve: b });
            }
        }
    }
    best
}

/// Winding over the closed contour from upper-half tracks. The mirrored half
/// contributes the same argument change, so the total is `Σ Δarg / π`.
fn winding_of_tracks(tracks: &[Vec<Complex64>], point: Complex64, scale: f64) -> Result<i64> {
    let mut total = 0.0;
    for k in 0..tracks.len().saturating_sub(1) {
        for b in 0..tracks[k].len() {
            let (a, c) = (tracks[k][b], tracks[k + 1][b]);
            let dist = segment_distance(a, c, point);
            if dist <= ON_CURVE_TOL * scale {
                return Err(Error::MarginalStability { point, distance: dist });
            }
            let step = arg_increment(a, c, point);
            if step.abs() >= PI * (1.0 - 1e-12) {
                return Err(Error::Undersampled { index: k, step });
            }
            total += step;
        }
    }
    let turns = total / PI;
    let rounded = turns.round();
    if (turns - rounded).abs() > 1e-6 {
        return Err(Error::Contour(format!("accumulated winding {turns} is not an integer")));
    }
    Ok(rounded as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hungarian_small() {
        let c = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&c);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| c[i][j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn matching_follows_branches() {
        let prev = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let mut next = [Complex64::new(1.1, 0.0), Complex64::new(0.1, 0.0)];
        match_branches(&prev, &mut next);
        assert_eq!(next[0], Complex64::new(0.1, 0.0));
    }
}
