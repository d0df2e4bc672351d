use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly::Polynomial;
use crate::error::{Error, Result};

/// Relative threshold under which two coefficient vectors count as identical.
const EXACT_COEFF_TOL: f64 = 1e-12;

/// Poles closer than this (relative to `max(1, |p|)`) to the imaginary axis are axis poles.
pub const AXIS_TOL: f64 = 1e-9;

/// Half-width of the band around `r` in which a pole is considered to sit on the contour.
pub const BOUNDARY_BAND: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combination {
    Series,
    Parallel,
    Feedback,
}

/// Proper or improper rational transfer function with an optional output delay,
/// `num(s)/den(s)·exp(-s·delay_s)`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TfRepr", into = "TfRepr")]
pub struct TransferFunction {
    num: Polynomial,
    den: Polynomial,
    delay_s: f64,
}

#[derive(Serialize, Deserialize)]
struct TfRepr {
    num: Vec<f64>,
    den: Vec<f64>,
    #[serde(default)]
    delay_s: f64,
}

impl TryFrom<TfRepr> for TransferFunction {
    type Error = Error;
    fn try_from(r: TfRepr) -> Result<Self> {
        TransferFunction::with_delay(Polynomial::new(r.num), Polynomial::new(r.den), r.delay_s)
    }
}

impl From<TransferFunction> for TfRepr {
    fn from(t: TransferFunction) -> Self {
        TfRepr {
            num: t.num.into(),
            den: t.den.into(),
            delay_s: t.delay_s,
        }
    }
}

impl TransferFunction {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        Self::with_delay(num, den, 0.0)
    }

    pub fn with_delay(num: Polynomial, den: Polynomial, delay_s: f64) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::InvalidInput("denominator is the zero polynomial".into()));
        }
        if !(delay_s >= 0.0 && delay_s.is_finite()) {
            return Err(Error::InvalidInput(format!("delay must be finite and >= 0, got {delay_s}")));
        }
        if num.coeffs().iter().chain(den.coeffs()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        Ok(Self { num, den, delay_s })
    }

    /// Convenience constructor from ascending coefficient slices.
    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self> {
        Self::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec()))
    }

    pub fn gain(k: f64) -> Self {
        Self {
            num: Polynomial::constant(k),
            den: Polynomial::one(),
            delay_s: 0.0,
        }
    }

    pub fn zero() -> Self {
        Self::gain(0.0)
    }

    /// Pure delay `exp(-s·tau)`.
    pub fn delay(tau: f64) -> Result<Self> {
        Self::with_delay(Polynomial::one(), Polynomial::one(), tau)
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn delay_s(&self) -> f64 {
        self.delay_s
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() <= self.den.degree()
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.num.is_zero() || self.num.degree() < self.den.degree()
    }

    /// `deg(den) - deg(num)`; negative for improper functions.
    pub fn relative_degree(&self) -> i64 {
        self.den.degree() as i64 - self.num.degree() as i64
    }

    /// Rational part only, without the delay factor.
    pub fn rational_part(&self) -> Self {
        Self {
            num: self.num.clone(),
            den: self.den.clone(),
            delay_s: 0.0,
        }
    }

    pub fn evaluate(&self, s: Complex64) -> Result<Complex64> {
        let d = self.den.eval_complex(s);
        let scale = self.den.abs_eval(s.norm());
        if d.norm() <= 1e-14 * scale {
            return Err(Error::PoleHit(s));
        }
        let rational = self.num.eval_complex(s) / d;
        if self.delay_s == 0.0 {
            Ok(rational)
        } else {
            Ok(rational * (-s * self.delay_s).exp())
        }
    }

    pub fn dc_gain(&self) -> Result<f64> {
        self.evaluate(Complex64::new(0.0, 0.0)).map(|c| c.re)
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        self.den.roots()
    }

    pub fn zeros(&self) -> Result<Vec<Complex64>> {
        if self.num.is_zero() {
            return Ok(Vec::new());
        }
        self.num.roots()
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            num: self.num.scale(k),
            den: self.den.clone(),
            delay_s: self.delay_s,
        }
    }

    pub fn inverse(&self) -> Result<Self> {
        if self.delay_s != 0.0 {
            return Err(Error::UnsupportedStructure("inverse of a delayed transfer function".into()));
        }
        Self::new(self.den.clone(), self.num.clone())
    }

    /// Rational approximation with each delay replaced by its diagonal Padé approximant.
    pub fn rationalized(&self, pade_order: usize) -> Result<Self> {
        if self.delay_s == 0.0 {
            return Ok(self.clone());
        }
        let p = pade_delay(self.delay_s, pade_order)?;
        combine(Combination::Series, &self.rational_part(), &p)
    }

    /// Largest modulus among finite poles and zeros of the rational part.
    pub fn characteristic_modulus(&self) -> Result<f64> {
        let mut m: f64 = 0.0;
        for r in self.poles()?.into_iter().chain(self.zeros()?) {
            m = m.max(r.norm());
        }
        Ok(m)
    }

    /// Residual of `self - other` after cross multiplication, relative to the
    /// largest coefficient involved. Delays must agree.
    pub fn mismatch(&self, other: &TransferFunction) -> f64 {
        if (self.delay_s - other.delay_s).abs() > 0.0 {
            return f64::INFINITY;
        }
        let lhs = &self.num * &other.den;
        let rhs = &other.num * &self.den;
        let scale = lhs.max_abs_coeff().max(rhs.max_abs_coeff()).max(f64::MIN_POSITIVE);
        let len = lhs.coeffs().len().max(rhs.coeffs().len());
        (0..len)
            .map(|k| {
                let a = lhs.coeffs().get(k).copied().unwrap_or(0.0);
                let b = rhs.coeffs().get(k).copied().unwrap_or(0.0);
                (a - b).abs()
            })
            .fold(0.0, f64::max)
            / scale
    }

    /// Cancels numerator/denominator root pairs closer than `tol·max(1,|r|)`.
    /// Near-cancellations in the closed right half-plane are rejected.
    pub fn minreal(&self, tol: f64) -> Result<Self> {
        if self.num.is_zero() {
            return Ok(Self {
                num: Polynomial::zero(),
                den: Polynomial::one(),
                delay_s: self.delay_s,
            });
        }
        let zeros = self.num.roots()?;
        let mut poles = self.den.roots()?;
        let mut num = self.num.clone();
        let mut den = self.den.clone();
        for z in zeros {
            if z.im < 0.0 {
                continue; // handled with its conjugate
            }
            let hit = poles
                .iter()
                .position(|p| (p - z).norm() <= tol * z.norm().max(1.0));
            let Some(idx) = hit else { continue };
            if z.re >= -AXIS_TOL * z.norm().max(1.0) {
                return Err(Error::RhpCancellation(z));
            }
            let factor = if z.im == 0.0 {
                Polynomial::linear(-z.re, 1.0)
            } else {
                Polynomial::new(vec![z.norm_sqr(), -2.0 * z.re, 1.0])
            };
            let (qn, _) = num.div_rem(&factor)?;
            let (qd, _) = den.div_rem(&factor)?;
            num = qn;
            den = qd;
            poles.remove(idx);
            if z.im != 0.0 {
                if let Some(j) = poles.iter().position(|p| (p - z.conj()).norm() <= tol * z.norm().max(1.0)) {
                    poles.remove(j);
                }
            }
        }
        Self::with_delay(num, den, self.delay_s)
    }
}

impl fmt::Debug for TransferFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)?;
        if self.delay_s > 0.0 {
            write!(f, " · exp(-{}s)", self.delay_s)?;
        }
        Ok(())
    }
}

impl fmt::Display for TransferFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

fn same_coeffs(a: &Polynomial, b: &Polynomial) -> bool {
    if a.degree() != b.degree() {
        return false;
    }
    let scale = a.max_abs_coeff().max(b.max_abs_coeff());
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .all(|(x, y)| (x - y).abs() <= EXACT_COEFF_TOL * scale)
}

/// Series, parallel or negative-feedback composition.
///
/// `Feedback` computes `a / (1 + a·b)` and does not accept delays; rationalize
/// them with [`pade_delay`] first. `Parallel` requires equal delays.
pub fn combine(kind: Combination, a: &TransferFunction, b: &TransferFunction) -> Result<TransferFunction> {
    match kind {
        Combination::Series => TransferFunction::with_delay(
            &a.num * &b.num,
            &a.den * &b.den,
            a.delay_s + b.delay_s,
        ),
        Combination::Parallel => {
            if a.delay_s != b.delay_s {
                return Err(Error::UnsupportedStructure(format!(
                    "parallel composition with unequal delays {} and {}",
                    a.delay_s, b.delay_s
                )));
            }
            if same_coeffs(&a.den, &b.den) {
                return TransferFunction::with_delay(&a.num + &b.num, a.den.clone(), a.delay_s);
            }
            TransferFunction::with_delay(
                &(&a.num * &b.den) + &(&b.num * &a.den),
                &a.den * &b.den,
                a.delay_s,
            )
        }
        Combination::Feedback => {
            if a.delay_s != 0.0 || b.delay_s != 0.0 {
                return Err(Error::UnsupportedStructure(
                    "feedback around a delay; rationalize with a Padé approximant first".into(),
                ));
            }
            let den = &(&a.den * &b.den) + &(&a.num * &b.num);
            if den.is_zero() {
                return Err(Error::AlgebraicLoop);
            }
            TransferFunction::new(&a.num * &b.den, den)
        }
    }
}

/// Reflects right-half-plane zeros into the left half-plane.
///
/// The result has the same poles and the same magnitude on the imaginary axis.
/// The sign of the lowest-order numerator coefficient is preserved, so the
/// static gain keeps its sign.
pub fn mp_mirror(g: &TransferFunction) -> Result<TransferFunction> {
    if g.delay_s != 0.0 {
        return Err(Error::UnsupportedStructure("minimum-phase mirror of a delayed transfer function".into()));
    }
    if g.num.is_zero() {
        return Ok(g.clone());
    }
    let zeros = g.zeros()?;
    if let Some(z) = zeros.iter().find(|z| z.re.abs() <= AXIS_TOL * z.norm().max(1.0) && z.norm() > 0.0) {
        return Err(Error::AmbiguousMirror(*z));
    }
    if zeros.iter().any(|z| z.norm() == 0.0) {
        return Err(Error::AmbiguousMirror(Complex64::new(0.0, 0.0)));
    }
    if zeros.iter().all(|z| z.re < 0.0) {
        return Ok(g.clone());
    }
    let mirrored: Vec<Complex64> = zeros
        .iter()
        .map(|z| if z.re > 0.0 { -z.conj() } else { *z })
        .collect();
    let mut num = Polynomial::from_roots(&mirrored).scale(g.num.leading());
    if num.lowest_nonzero().signum() != g.num.lowest_nonzero().signum() {
        num = num.scale(-1.0);
    }
    TransferFunction::new(num, g.den.clone())
}

/// Diagonal Padé approximant of `exp(-s·tau)`.
pub fn pade_delay(tau: f64, order: usize) -> Result<TransferFunction> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::InvalidInput(format!("delay must be finite and >= 0, got {tau}")));
    }
    if !(1..=5).contains(&order) {
        return Err(Error::InvalidInput(format!("Padé order must be in 1..=5, got {order}")));
    }
    if tau == 0.0 {
        return Ok(TransferFunction::gain(1.0));
    }
    let fact = |k: usize| (1..=k).map(|x| x as f64).product::<f64>();
    let n = order;
    let mut num = Vec::with_capacity(n + 1);
    let mut den = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let c = fact(2 * n - k) * fact(n) / (fact(2 * n) * fact(k) * fact(n - k));
        let tk = tau.powi(k as i32);
        den.push(c * tk);
        num.push(if k % 2 == 0 { c * tk } else { -c * tk });
    }
    TransferFunction::new(Polynomial::new(num), Polynomial::new(den))
}

/// Poles `p` with `Re p > 0` and `|p| >= r`, i.e. those enclosed by a Nyquist
/// contour indented with radius `r` at the origin. Poles on the imaginary axis
/// are excluded since the contour indents around them.
pub fn rhp_poles_in_region(g: &TransferFunction, r: f64) -> Result<Vec<Complex64>> {
    poles_in_region(&g.poles()?, r)
}

pub(crate) fn poles_in_region(poles: &[Complex64], r: f64) -> Result<Vec<Complex64>> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::InvalidInput(format!("radius must be finite and >= 0, got {r}")));
    }
    let mut out = Vec::new();
    for p in poles {
        let m = p.norm();
        let on_axis = p.re.abs() <= AXIS_TOL * m.max(1.0);
        if r > 0.0 && (p.re > 0.0 || on_axis) && (m - r).abs() <= BOUNDARY_BAND * r {
            return Err(Error::BoundaryAmbiguity { modulus: m, radius: r });
        }
        if !on_axis && p.re > 0.0 && m >= r {
            out.push(*p);
        }
    }
    Ok(out)
}
