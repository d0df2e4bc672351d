use num_complex::Complex64;

fn cross(o: Complex64, a: Complex64, b: Complex64) -> f64 {
    (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
}

/// Convex hull by monotone chain, anticlockwise, without repeated endpoint.
/// Non-finite points are ignored.
pub fn convex_hull(points: &[Complex64]) -> Vec<Complex64> {
    let mut p: Vec<Complex64> = points.iter().copied().filter(|z| z.re.is_finite() && z.im.is_finite()).collect();
    p.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    p.dedup();
    if p.len() <= 2 {
        return p;
    }
    let mut lower: Vec<Complex64> = Vec::new();
    for z in &p {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], *z) <= 0.0 {
            lower.pop();
        }
        lower.push(*z);
    }
    let mut upper: Vec<Complex64> = Vec::new();
    for z in p.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], *z) <= 0.0 {
            upper.pop();
        }
        upper.push(*z);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Real-axis crossing of the closed segment `a`–`b`, if any. A segment lying
/// on the axis yields its left end.
pub fn segment_real_crossing(a: Complex64, b: Complex64) -> Option<f64> {
    if a.im == 0.0 && b.im == 0.0 {
        return Some(a.re.min(b.re));
    }
    if a.im == 0.0 {
        return Some(a.re);
    }
    if b.im == 0.0 {
        return Some(b.re);
    }
    if (a.im > 0.0) == (b.im > 0.0) {
        return None;
    }
    let t = a.im / (a.im - b.im);
    Some(a.re + (b.re - a.re) * t)
}

/// Leftmost point of the intersection of a convex polygon with the real axis.
pub fn leftmost_real_crossing(hull: &[Complex64]) -> Option<f64> {
    match hull.len() {
        0 => None,
        1 => (hull[0].im == 0.0).then_some(hull[0].re),
        n => (0..n)
            .filter_map(|k| segment_real_crossing(hull[k], hull[(k + 1) % n]))
            .min_by(f64::total_cmp),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn square_hull() {
        let pts = [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 1.0), c(0.0, 1.0), c(0.5, 0.5)];
        assert_eq!(convex_hull(&pts).len(), 4);
    }

    #[test]
    fn crossing() {
        let hull = convex_hull(&[c(-3.0, 1.0), c(-1.0, -1.0), c(2.0, 1.0)]);
        let x = leftmost_real_crossing(&hull).unwrap();
        assert!((x + 2.0).abs() < 1e-12);
        assert_eq!(leftmost_real_crossing(&convex_hull(&[c(-3.0, 1.0), c(2.0, 1.0)])), None);
    }
}
