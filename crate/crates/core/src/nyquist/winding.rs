use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative distance below which a point counts as lying on a curve.
pub const ON_CURVE_TOL: f64 = 1e-9;

/// Distance from `p` to the segment `a`–`b`.
pub fn segment_distance(a: Complex64, b: Complex64, p: Complex64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (a + d * t - p).norm()
}

/// Signed argument increment of `p` along the segment `a`–`b`.
///
/// Exact for a straight segment that avoids `p`.
pub fn arg_increment(a: Complex64, b: Complex64, p: Complex64) -> f64 {
    ((b - p) / (a - p)).arg()
}

/// Anticlockwise winding number of a closed polyline about `point`.
///
/// Fails with a marginal-stability error when the point lies on the curve and
/// with an undersampling error when one step turns by π or more.
pub fn winding_number(curve: &[Complex64], point: Complex64) -> Result<i64> {
    if curve.len() < 2 {
        return Err(Error::InvalidInput("curve needs at least two points".into()));
    }
    let scale = curve.iter().map(|z| z.norm()).fold(point.norm(), f64::max).max(1.0);
    let (first, last) = (curve[0], curve[curve.len() - 1]);
    if (first - last).norm() > ON_CURVE_TOL * scale {
        return Err(Error::InvalidInput("curve is not closed".into()));
    }
    let total = accumulated_argument(curve, point, scale)?;
    let turns = total / (2.0 * PI);
    Ok(turns.round() as i64)
}

/// Sum of argument increments of an open polyline about `point`.
pub(crate) fn accumulated_argument(curve: &[Complex64], point: Complex64, scale: f64) -> Result<f64> {
    let mut total = 0.0;
    for (i, w) in curve.windows(2).enumerate() {
        let dist = segment_distance(w[0], w[1], point);
        if dist <= ON_CURVE_TOL * scale {
            return Err(Error::MarginalStability { point, distance: dist });
        }
        let step = arg_increment(w[0], w[1], point);
        if step.abs() >= PI * (1.0 - 1e-12) {
            return Err(Error::Undersampled { index: i, step });
        }
        total += step;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(radius: f64, n: usize, ccw: bool) -> Vec<Complex64> {
        (0..=n)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / n as f64;
                Complex64::from_polar(radius, if ccw { th } else { -th })
            })
            .collect()
    }

    #[test]
    fn circles() {
        let m1 = Complex64::new(-1.0, 0.0);
        assert_eq!(winding_number(&circle(2.0, 64, true), m1).unwrap(), 1);
        assert_eq!(winding_number(&circle(2.0, 64, false), m1).unwrap(), -1);
        assert_eq!(winding_number(&circle(0.5, 64, true), m1).unwrap(), 0);
    }

    #[test]
    fn point_on_curve() {
        let c = vec![
            Complex64::new(-2.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-2.0, 0.0),
        ];
        assert!(matches!(
            winding_number(&c, Complex64::new(-1.0, 0.0)),
            Err(Error::MarginalStability { .. })
        ));
    }
}
