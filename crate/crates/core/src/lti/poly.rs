use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{linalg::balancing, DMatrix, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Backward-error bound accepted for a computed root.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-8;

/// Coefficients that cancel to below this fraction of their operands are set to zero.
const CANCEL_EPS: f64 = 1e-15;

/// Real polynomial, coefficients in ascending degree.
///
/// Trailing (highest-degree) zeros are trimmed, so the leading coefficient is
/// nonzero except for the zero polynomial, which is stored as `[0.0]`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `s`.
    pub fn s() -> Self {
        Self::new(vec![0.0, 1.0])
    }

    /// `a + b·s`
    pub fn linear(a: f64, b: f64) -> Self {
        Self::new(vec![a, b])
    }

    /// Monic real polynomial with the given roots. Complex roots must come in
    /// conjugate pairs; the imaginary residue of the expansion is discarded.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut acc = vec![Complex64::new(1.0, 0.0)];
        for r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
            for (k, c) in acc.iter().enumerate() {
                next[k + 1] += c;
                next[k] -= c * r;
            }
            acc = next;
        }
        Self::new(acc.into_iter().map(|c| c.re).collect())
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    /// Lowest-order nonzero coefficient, or zero for the zero polynomial.
    pub fn lowest_nonzero(&self) -> f64 {
        self.coeffs.iter().copied().find(|c| *c != 0.0).unwrap_or(0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn eval_complex(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * s + c)
    }

    /// Σ|c_k||x|^k, the scale used for backward-error residuals.
    pub fn abs_eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c.abs())
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::zero();
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * k as f64)
                .collect(),
        )
    }

    /// Polynomial long division, returning `(quotient, remainder)`.
    pub fn div_rem(&self, divisor: &Polynomial) -> Result<(Polynomial, Polynomial)> {
        if divisor.is_zero() {
            return Err(Error::InvalidInput("division by the zero polynomial".into()));
        }
        if self.degree() < divisor.degree() || self.is_zero() {
            return Ok((Self::zero(), self.clone()));
        }
        let dd = divisor.degree();
        let lead = divisor.leading();
        let mut rem = self.coeffs.clone();
        let mut quot = vec![0.0; self.degree() - dd + 1];
        for k in (0..quot.len()).rev() {
            let q = rem[k + dd] / lead;
            quot[k] = q;
            for (j, d) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= q * d;
            }
            rem[k + dd] = 0.0;
        }
        rem.truncate(dd.max(1));
        Ok((Self::new(quot), Self::new(rem)))
    }

    /// Roots with multiplicity, via eigenvalues of the balanced companion matrix
    /// followed by Newton polishing. Every returned root satisfies
    /// `|p(x)| <= ROOT_RESIDUAL_TOL · Σ|c_k||x|^k`.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        if self.is_zero() {
            return Err(Error::InvalidInput("roots of the zero polynomial".into()));
        }
        let zeros_at_origin = self.coeffs.iter().take_while(|c| **c == 0.0).count();
        let reduced = &self.coeffs[zeros_at_origin..];
        let n = reduced.len() - 1;
        let mut roots = vec![Complex64::new(0.0, 0.0); zeros_at_origin];
        if n == 0 {
            return Ok(roots);
        }
        let lead = reduced[n];
        if n == 1 {
            roots.push(Complex64::new(-reduced[0] / lead, 0.0));
            return Ok(roots);
        }
        let mut companion = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            companion[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            companion[(i, n - 1)] = -reduced[i] / lead;
        }
        balancing::balance_parlett_reinsch(&mut companion);
        let schur = Schur::try_new(companion, f64::EPSILON, 100_000).ok_or_else(|| {
            Error::RootAccuracy {
                residual: f64::INFINITY,
            }
        })?;
        let reduced_poly = Polynomial::new(reduced.to_vec());
        let deriv = reduced_poly.derivative();
        for mut z in schur.complex_eigenvalues().iter().copied() {
            for _ in 0..3 {
                let p = reduced_poly.eval_complex(z);
                let dp = deriv.eval_complex(z);
                if dp.norm() == 0.0 {
                    break;
                }
                let step = p / dp;
                let candidate = z - step;
                if reduced_poly.eval_complex(candidate).norm() < p.norm() {
                    z = candidate;
                } else {
                    break;
                }
            }
            let residual = reduced_poly.backward_error(z);
            if residual > ROOT_RESIDUAL_TOL {
                return Err(Error::RootAccuracy { residual });
            }
            roots.push(z);
        }
        // Real polynomial: snap numerically-real roots onto the axis.
        for r in roots.iter_mut() {
            if r.im.abs() <= 1e-14 * r.norm().max(1.0) {
                r.im = 0.0;
            }
        }
        Ok(roots)
    }

    /// `|p(x)| / Σ|c_k||x|^k`
    pub fn backward_error(&self, x: Complex64) -> f64 {
        let scale = self.abs_eval(x.norm());
        if scale == 0.0 {
            return 0.0;
        }
        self.eval_complex(x).norm() / scale
    }

    fn combine(&self, other: &Polynomial, sign: f64) -> Polynomial {
        let len = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(len);
        for k in 0..len {
            let a = self.coeffs.get(k).copied().unwrap_or(0.0);
            let b = sign * other.coeffs.get(k).copied().unwrap_or(0.0);
            let v = a + b;
            if v.abs() <= CANCEL_EPS * (a.abs() + b.abs()) {
                out.push(0.0);
            } else {
                out.push(v);
            }
        }
        Polynomial::new(out)
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial{:?}", self.coeffs)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if *c == 0.0 && self.coeffs.len() > 1 {
                continue;
            }
            if !first {
                write!(f, " {} ", if *c < 0.0 { '-' } else { '+' })?;
            } else if *c < 0.0 {
                write!(f, "-")?;
            }
            let a = c.abs();
            match k {
                0 => write!(f, "{a}")?,
                1 => write!(f, "{a}s")?,
                _ => write!(f, "{a}s^{k}")?,
            }
            first = false;
        }
        Ok(())
    }
}

impl From<Vec<f64>> for Polynomial {
    fn from(v: Vec<f64>) -> Self {
        Self::new(v)
    }
}

impl From<Polynomial> for Vec<f64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.combine(rhs, -1.0)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: Polynomial) -> Polynomial {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_re(mut r: Vec<Complex64>) -> Vec<Complex64> {
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        r
    }

    #[test]
    fn trims_trailing_zeros() {
        let p = Polynomial::new(vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.degree(), 1);
        assert!(Polynomial::new(vec![0.0, 0.0]).is_zero());
        assert!(Polynomial::new(vec![]).is_zero());
    }

    #[test]
    fn roots_of_fdes_denominator() {
        // (2s+1)(17s+1)
        let p = &Polynomial::linear(1.0, 2.0) * &Polynomial::linear(1.0, 17.0);
        let r = sorted_re(p.roots().unwrap());
        assert!((r[0].re + 0.5).abs() < 1e-12 && r[0].im == 0.0);
        assert!((r[1].re + 1.0 / 17.0).abs() < 1e-12);
    }

    #[test]
    fn roots_of_unit_oscillator() {
        let r = Polynomial::new(vec![1.0, 0.0, 1.0]).roots().unwrap();
        assert_eq!(r.len(), 2);
        for z in &r {
            assert!(z.re.abs() < 1e-12);
            assert!((z.im.abs() - 1.0).abs() < 1e-12);
        }
        assert!((r[0].im + r[1].im).abs() < 1e-12);
    }

    #[test]
    fn roots_of_cubic_verified_by_substitution() {
        let p = Polynomial::new(vec![-6.0, 11.0, -6.0, 1.0]);
        // Substitution oracle first: 1, 2, 3 are exact zeros.
        for x in [1.0, 2.0, 3.0] {
            assert_eq!(p.eval(x), 0.0);
        }
        let r = sorted_re(p.roots().unwrap());
        for (z, want) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((z.re - want).abs() < 1e-10, "{z}");
            assert!(z.im.abs() < 1e-10);
        }
    }

    #[test]
    fn zero_polynomial_has_no_roots() {
        assert!(matches!(Polynomial::zero().roots(), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn origin_roots_are_exact() {
        let p = Polynomial::new(vec![0.0, 0.0, 2.0, 1.0]);
        let r = p.roots().unwrap();
        assert_eq!(r.iter().filter(|z| z.norm() == 0.0).count(), 2);
    }

    #[test]
    fn division_recovers_factor() {
        let a = Polynomial::new(vec![1.0, 3.0, 2.0]);
        let b = Polynomial::linear(1.0, 1.0);
        let (q, r) = a.div_rem(&b).unwrap();
        assert_eq!(q.coeffs(), &[1.0, 2.0]);
        assert!(r.is_zero());
    }

    #[test]
    fn display_descending() {
        let p = Polynomial::new(vec![-6.0, 11.0, -6.0, 1.0]);
        assert_eq!(p.to_string(), "1s^3 - 6s^2 + 11s - 6");
    }
}
