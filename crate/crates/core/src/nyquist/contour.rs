use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Indentation radius for jω-axis poles and the full-D origin, relative to `R`.
pub const INDENT_REL: f64 = 1e-4;

pub const MIN_DENSITY: usize = 100;
pub const DEFAULT_DENSITY: usize = 200;

const ARC_SAMPLES: usize = 48;
const INDENT_SAMPLES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContourKind {
    #[serde(rename = "full-D")]
    FullD,
    #[serde(rename = "D_r")]
    Dr,
}

/// One smooth piece of the upper half of the contour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    /// Arc `c + ρ·e^{jθ}`, `θ` running linearly from `from` to `to`.
    Arc { center: f64, radius: f64, from: f64, to: f64, role: ArcRole },
    /// Imaginary axis from `j·lo` to `j·hi`, logarithmically spaced.
    Axis { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcRole {
    Inner,
    Indentation,
    Closure,
}

impl Piece {
    pub fn point(&self, t: f64) -> Complex64 {
        match *self {
            Piece::Arc { center, radius, from, to, .. } => {
                let th = from + (to - from) * t;
                Complex64::new(0.0, center) + Complex64::from_polar(radius, th)
            }
            Piece::Axis { lo, hi } => Complex64::new(0.0, lo * (hi / lo).powf(t)),
        }
    }

    pub fn is_closure(&self) -> bool {
        matches!(self, Piece::Arc { role: ArcRole::Closure, .. })
    }

    pub fn is_axis(&self) -> bool {
        matches!(self, Piece::Axis { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourSample {
    pub s: Complex64,
    pub piece: usize,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Indentation {
    /// Pole location on the positive imaginary axis, rad/s.
    pub omega: f64,
    pub radius: f64,
}

/// Nyquist contour, traversed clockwise. Only the upper half is stored; the
/// lower half is its complex conjugate traversed in reverse.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub kind: ContourKind,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub pieces: Vec<Piece>,
    pub indentations: Vec<Indentation>,
    samples: Vec<ContourSample>,
}

/// Builds the upper half `r → jr → jR → R`.
///
/// `jw_poles` lists imaginary parts of poles on the imaginary axis; the origin
/// and negative entries are ignored (the origin is always indented, negative
/// ones are mirrored). `density` is the number of axis samples per decade.
pub fn make_contour(kind: ContourKind, r: f64, big_r: f64, density: usize, jw_poles: &[f64]) -> Result<Contour> {
    if !(big_r.is_finite() && big_r > 0.0) {
        return Err(Error::Contour(format!("outer radius must be positive, got {big_r}")));
    }
    if density < MIN_DENSITY {
        return Err(Error::Contour(format!("density {density} below {MIN_DENSITY} samples per decade")));
    }
    let rho = INDENT_REL * big_r;
    let r = match kind {
        ContourKind::FullD => rho,
        ContourKind::Dr => r,
    };
    if !(r > 0.0 && r < big_r) {
        return Err(Error::Contour(format!("need 0 < r < R, got r = {r}, R = {big_r}")));
    }

    let mut poles: Vec<f64> = jw_poles.iter().copied().filter(|w| *w > 0.0).collect();
    poles.sort_by(f64::total_cmp);
    poles.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
    let poles: Vec<f64> = poles.into_iter().filter(|w| *w > r - rho).collect();
    for w in &poles {
        if *w - rho <= r || *w + rho >= big_r {
            return Err(Error::Contour(format!(
                "pole at j{w} is within the indentation radius {rho} of the contour ends"
            )));
        }
    }
    for pair in poles.windows(2) {
        if pair[1] - pair[0] <= 2.0 * rho {
            return Err(Error::Contour(format!(
                "indentations around j{} and j{} overlap",
                pair[0], pair[1]
            )));
        }
    }

    let mut pieces = vec![Piece::Arc {
        center: 0.0,
        radius: r,
        from: 0.0,
        to: FRAC_PI_2,
        role: ArcRole::Inner,
    }];
    let mut lo = r;
    let mut indentations = Vec::new();
    for &w in &poles {
        pieces.push(Piece::Axis { lo, hi: w - rho });
        pieces.push(Piece::Arc {
            center: w,
            radius: rho,
            from: -FRAC_PI_2,
            to: FRAC_PI_2,
            role: ArcRole::Indentation,
        });
        indentations.push(Indentation { omega: w, radius: rho });
        lo = w + rho;
    }
    pieces.push(Piece::Axis { lo, hi: big_r });
    pieces.push(Piece::Arc {
        center: 0.0,
        radius: big_r,
        from: FRAC_PI_2,
        to: 0.0,
        role: ArcRole::Closure,
    });

    let mut samples = Vec::new();
    let last = pieces.len() - 1;
    for (k, p) in pieces.iter().enumerate() {
        let count = match p {
            Piece::Arc { role: ArcRole::Indentation, .. } => INDENT_SAMPLES,
            Piece::Arc { .. } => ARC_SAMPLES,
            Piece::Axis { lo, hi } => ((hi / lo).log10() * density as f64).ceil().max(2.0) as usize,
        };
        let end = if k == last { count + 1 } else { count };
        for j in 0..end {
            let t = j as f64 / count as f64;
            samples.push(ContourSample { s: p.point(t), piece: k, t });
        }
    }
    // values on the real axis must be exactly real
    samples[0].s = Complex64::new(r, 0.0);
    let n = samples.len();
    samples[n - 1].s = Complex64::new(big_r, 0.0);

    Ok(Contour {
        kind,
        inner_radius: r,
        outer_radius: big_r,
        pieces,
        indentations,
        samples,
    })
}

impl Contour {
    /// Upper-half samples in traversal order.
    pub fn samples(&self) -> &[ContourSample] {
        &self.samples
    }

    /// Sample halfway between two consecutive samples.
    pub fn midpoint(&self, a: &ContourSample, b: &ContourSample) -> ContourSample {
        let t = if a.piece == b.piece { 0.5 * (a.t + b.t) } else { 0.5 * (a.t + 1.0) };
        ContourSample {
            s: self.pieces[a.piece].point(t),
            piece: a.piece,
            t,
        }
    }

    /// Whole closed contour, clockwise, as points. The last point equals the first.
    pub fn closed_points(&self) -> Vec<Complex64> {
        close_conjugate(&self.samples.iter().map(|x| x.s).collect::<Vec<_>>())
    }
}

/// Closes an upper-half trajectory with its mirrored conjugate.
pub fn close_conjugate(upper: &[Complex64]) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = upper.to_vec();
    out.extend(upper.iter().rev().skip(1).map(|z| z.conj()));
    out
}
