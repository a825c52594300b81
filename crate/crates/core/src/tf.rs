//! Rational transfer functions of the complex frequency `s`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Polynomial;

const POLE_FLOOR: f64 = 1e-300;

/// `num(s) / den(s)` with a monic denominator.
///
/// Common factors are only removed when they are exact powers of `s`; near
/// pole-zero cancellations are kept so that closed-loop characteristic
/// polynomials stay complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferFunction {
    num: Polynomial,
    den: Polynomial,
}

impl TransferFunction {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::invalid("transfer function denominator is zero"));
        }
        if num.is_zero() {
            return Ok(Self::zero());
        }
        let shift = num.lowest_order().min(den.lowest_order());
        let (num, den) = (num.shift_down(shift), den.shift_down(shift));
        let lead = den.leading();
        Ok(Self {
            num: num.scale(1.0 / lead),
            den: den.scale(1.0 / lead),
        })
    }

    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self> {
        Self::new(Polynomial::new(num.to_vec())?, Polynomial::new(den.to_vec())?)
    }

    pub fn constant(k: f64) -> Self {
        Self {
            num: Polynomial::constant(k),
            den: Polynomial::one(),
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// `1 / (1 + s/(2 pi f_c))`
    pub fn first_order_lowpass(corner_hz: f64) -> Result<Self> {
        if !(corner_hz > 0.0) {
            return Err(Error::invalid("corner frequency must be positive"));
        }
        Self::from_coeffs(&[1.0], &[1.0, 1.0 / (2.0 * PI * corner_hz)])
    }

    /// `1 / (1 + s/(q w0) + s^2/w0^2)`
    pub fn second_order_lowpass(corner_hz: f64, q: f64) -> Result<Self> {
        if !(corner_hz > 0.0 && q > 0.0) {
            return Err(Error::invalid("corner frequency and Q must be positive"));
        }
        let w0 = 2.0 * PI * corner_hz;
        Self::from_coeffs(&[1.0], &[1.0, 1.0 / (q * w0), 1.0 / (w0 * w0)])
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_proper(&self) -> bool {
        self.num.degree() <= self.den.degree()
    }

    /// Value at `s = j 2 pi f`.
    pub fn evaluate(&self, f_hz: f64) -> Result<Complex64> {
        if !(f_hz > 0.0) || !f_hz.is_finite() {
            return Err(Error::invalid(format!("frequency must be positive, got {f_hz}")));
        }
        self.eval_s(Complex64::new(0.0, 2.0 * PI * f_hz))
            .map_err(|e| match e {
                Error::PoleOnAxis { .. } => Error::PoleOnAxis { f_hz },
                other => other,
            })
    }

    /// Value at an arbitrary complex `s`. Large `|s|` is evaluated through the
    /// reversed polynomials in `1/s` to keep intermediate powers bounded.
    pub fn eval_s(&self, s: Complex64) -> Result<Complex64> {
        let f_hz = s.im / (2.0 * PI);
        if s.norm() <= 1.0 {
            let d = self.den.eval(s);
            if d.norm() < POLE_FLOOR {
                return Err(Error::PoleOnAxis { f_hz });
            }
            return Ok(self.num.eval(s) / d);
        }
        let w = 1.0 / s;
        let dr = self.den.eval_reversed(w);
        let dd = self.den.degree() as i32;
        let log_den = dr.norm().ln() + dd as f64 * s.norm().ln();
        if dr.norm() == 0.0 || log_den < POLE_FLOOR.ln() {
            return Err(Error::PoleOnAxis { f_hz });
        }
        let excess = self.num.degree() as i32 - dd;
        Ok(self.num.eval_reversed(w) / dr * s.powi(excess))
    }

    /// DC value, if the function is finite at `s = 0`.
    pub fn dc_value(&self) -> Option<f64> {
        let d = self.den.coeffs()[0];
        (d != 0.0).then(|| self.num.coeffs()[0] / d)
    }

    pub fn scale(&self, k: f64) -> Self {
        if k == 0.0 {
            return Self::zero();
        }
        Self {
            num: self.num.scale(k),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        Self::new(self.num.mul(&other.num)?, self.den.mul(&other.den)?)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        if self.den == other.den {
            return Self::new(self.num.add(&other.num)?, self.den.clone());
        }
        let num = self.num.mul(&other.den)?.add(&other.num.mul(&self.den)?)?;
        Self::new(num, self.den.mul(&other.den)?)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// `1 / self`
    pub fn reciprocal(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::invalid("reciprocal of the zero transfer function"));
        }
        Self::new(self.den.clone(), self.num.clone())
    }

    /// `g / (1 + g h)` built as `(ng dh) / (dg dh + ng nh)` without cancellation,
    /// so the denominator is the full closed-loop characteristic polynomial.
    pub fn feedback_close(g: &Self, h: &Self) -> Result<Self> {
        let num = g.num.mul(&h.den)?;
        let den = g.den.mul(&h.den)?.add(&g.num.mul(&h.num)?)?;
        if den.is_zero() {
            return Err(Error::DegenerateLoop);
        }
        Self::new(num, den)
    }

    /// `dg dh + ng nh`, the closed-loop characteristic polynomial of `g` with feedback `h`.
    pub fn characteristic(g: &Self, h: &Self) -> Result<Polynomial> {
        let p = g.den.mul(&h.den)?.add(&g.num.mul(&h.num)?)?;
        if p.is_zero() {
            return Err(Error::DegenerateLoop);
        }
        Ok(p)
    }

    pub fn poles(&self) -> Result<Vec<Complex64>> {
        if self.den.degree() == 0 {
            return Ok(Vec::new());
        }
        self.den.roots()
    }

    pub fn zeros(&self) -> Result<Vec<Complex64>> {
        if self.num.is_zero() || self.num.degree() == 0 {
            return Ok(Vec::new());
        }
        self.num.roots()
    }
}

/// Complex samples of a response on a strictly ascending positive frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    freqs_hz: Vec<f64>,
    values: Vec<Complex64>,
}

impl FrequencyResponse {
    pub fn new(freqs_hz: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if freqs_hz.len() != values.len() {
            return Err(Error::invalid("frequency and value counts differ"));
        }
        if freqs_hz.len() < 2 {
            return Err(Error::invalid("a frequency response needs at least two points"));
        }
        if freqs_hz.iter().any(|f| !(*f > 0.0) || !f.is_finite()) {
            return Err(Error::invalid("frequencies must be positive and finite"));
        }
        if freqs_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("frequencies must be strictly ascending"));
        }
        Ok(Self { freqs_hz, values })
    }

    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs_hz.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tf(num: &[f64], den: &[f64]) -> TransferFunction {
        TransferFunction::from_coeffs(num, den).unwrap()
    }

    #[test]
    fn first_order_corner() {
        let t = TransferFunction::first_order_lowpass(1000.0).unwrap();
        let v = t.evaluate(1000.0).unwrap();
        assert_relative_eq!(v.re, 0.5, epsilon = 1e-12);
        assert_relative_eq!(v.im, -0.5, epsilon = 1e-12);
        assert_relative_eq!(20.0 * v.norm().log10(), -3.0103, epsilon = 1e-4);
    }

    #[test]
    fn constant_is_exact() {
        let v = TransferFunction::constant(5.0).evaluate(123.0).unwrap();
        assert_eq!(v, Complex64::new(5.0, 0.0));
    }

    #[test]
    fn cubic_lag_at_sqrt3() {
        // 8 / (s+1)^3 at w = sqrt(3): |.| = 8 / 4^(3/2) = 1, phase = -3 atan(sqrt 3) = -180 deg.
        let t = tf(&[8.0], &[1.0, 3.0, 3.0, 1.0]);
        let v = t.eval_s(Complex64::new(0.0, 3f64.sqrt())).unwrap();
        assert_relative_eq!(v.norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(v.arg().abs().to_degrees(), 180.0, epsilon = 1e-9);
    }

    #[test]
    fn pole_on_axis_is_reported() {
        let t = tf(&[1.0], &[1.0, 0.0, 1.0]);
        let f = 1.0 / (2.0 * PI);
        assert!(matches!(t.evaluate(f), Err(Error::PoleOnAxis { .. })));
    }

    #[test]
    fn canonical_denominator_is_monic() {
        let t = tf(&[2.0], &[4.0, 2.0]);
        assert_eq!(t.den().coeffs(), &[2.0, 1.0]);
        assert_eq!(t.num().coeffs(), &[1.0]);
    }

    #[test]
    fn mul_keeps_pole_zero_pairs() {
        let a = tf(&[1.0], &[1.0, 1.0]);
        let b = tf(&[1.0, 1.0], &[1.0]);
        let p = a.mul(&b).unwrap();
        assert_eq!(p.num().coeffs(), &[1.0, 1.0]);
        assert_eq!(p.den().coeffs(), &[1.0, 1.0]);
        for f in [0.01, 1.0, 1e5] {
            assert_relative_eq!(p.evaluate(f).unwrap().re, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn mul_convolves() {
        let p = tf(&[2.0], &[1.0, 1.0]).mul(&tf(&[3.0], &[2.0, 1.0])).unwrap();
        assert_eq!(p.num().coeffs(), &[6.0]);
        assert_eq!(p.den().coeffs(), &[2.0, 3.0, 1.0]);
    }

    #[test]
    fn mul_trims_exact_monomials() {
        let p = tf(&[0.0, 1.0], &[1.0]).mul(&tf(&[1.0], &[0.0, 0.0, 1.0])).unwrap();
        assert_eq!(p.num().coeffs(), &[1.0]);
        assert_eq!(p.den().coeffs(), &[0.0, 1.0]);
    }

    #[test]
    fn add_cases() {
        let a = tf(&[1.0], &[1.0, 1.0]);
        assert_eq!(a.add(&TransferFunction::zero()).unwrap(), a);
        let twice = a.add(&a).unwrap();
        assert_eq!(twice.num().coeffs(), &[2.0]);
        assert_eq!(twice.den().coeffs(), &[1.0, 1.0]);
        let s = tf(&[0.0, 1.0], &[1.0, 0.0, 1.0]).add(&tf(&[1.0], &[1.0, 0.0, 1.0])).unwrap();
        assert_eq!(s.num().coeffs(), &[1.0, 1.0]);
        assert_eq!(s.den().coeffs(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn feedback_cases() {
        let one = TransferFunction::constant(1.0);
        let half = TransferFunction::feedback_close(&one, &one).unwrap();
        assert_eq!(half.dc_value(), Some(0.5));

        let k = 7.0;
        let servo = TransferFunction::feedback_close(&tf(&[k], &[0.0, 1.0]), &one).unwrap();
        assert_eq!(servo.num().coeffs(), &[k]);
        assert_eq!(servo.den().coeffs(), &[k, 1.0]);
        assert_eq!(servo.poles().unwrap(), vec![Complex64::new(-k, 0.0)]);

        let cl = TransferFunction::feedback_close(&tf(&[10.0], &[1.0, 1.0]), &one).unwrap();
        assert_eq!(cl.den().coeffs(), &[11.0, 1.0]);
        assert_relative_eq!(cl.dc_value().unwrap(), 10.0 / 11.0);
        // brute-force comparison against point-wise g / (1 + g h)
        let g = tf(&[10.0], &[1.0, 1.0]);
        for f in [0.01, 0.3, 2.0, 50.0] {
            let gv = g.evaluate(f).unwrap();
            let want = gv / (1.0 + gv);
            assert!((cl.evaluate(f).unwrap() - want).norm() < 1e-12 * want.norm());
        }

        let g = tf(&[3.0], &[1.0, 2.0]);
        assert_eq!(TransferFunction::feedback_close(&g, &TransferFunction::zero()).unwrap(), g);
    }

    #[test]
    fn degenerate_loop() {
        let one = TransferFunction::constant(1.0);
        let minus = TransferFunction::constant(-1.0);
        assert!(matches!(
            TransferFunction::feedback_close(&one, &minus),
            Err(Error::DegenerateLoop)
        ));
    }

    #[test]
    fn frequency_response_validation() {
        let v = vec![Complex64::new(1.0, 0.0); 2];
        assert!(FrequencyResponse::new(vec![1.0, 2.0], v.clone()).is_ok());
        assert!(FrequencyResponse::new(vec![2.0, 1.0], v.clone()).is_err());
        assert!(FrequencyResponse::new(vec![0.0, 1.0], v.clone()).is_err());
        assert!(FrequencyResponse::new(vec![1.0], v[..1].to_vec()).is_err());
    }
}
