//! Real-coefficient polynomials in the complex frequency variable `s`.
//!
//! Coefficients are stored in ascending order: `coeffs[k]` multiplies `s^k`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard limit on polynomial degree. Monomial-basis conditioning is poor well before this.
pub const DEGREE_CAP: usize = 32;

/// Coefficients whose magnitude after an addition is below this fraction of the
/// operands' magnitudes are treated as cancellation residue and flushed to zero.
const CANCELLATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    /// Builds a canonical polynomial: trailing zero coefficients are trimmed and
    /// the degree cap is enforced.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("polynomial coefficients must be finite"));
        }
        let mut coeffs = coeffs;
        while coeffs.len() > 1 && coeffs[coeffs.len() - 1] == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        let degree = coeffs.len() - 1;
        if degree > DEGREE_CAP {
            return Err(Error::DegreeCapExceeded {
                degree,
                cap: DEGREE_CAP,
            });
        }
        Ok(Self { coeffs })
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// `s`
    pub fn s() -> Self {
        Self {
            coeffs: vec![0.0, 1.0],
        }
    }

    /// Monic polynomial with the given roots. Complex roots must come in conjugate
    /// pairs; the (rounding-level) imaginary parts of the product are discarded.
    pub fn from_roots(roots: &[Complex64]) -> Result<Self> {
        let mut acc = vec![Complex64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
            for (k, &c) in acc.iter().enumerate() {
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

    /// Highest-order coefficient.
    pub fn leading(&self) -> f64 {
        self.coeffs[self.coeffs.len() - 1]
    }

    /// Index of the lowest-order nonzero coefficient (number of roots at the origin).
    pub fn lowest_order(&self) -> usize {
        self.coeffs.iter().position(|&c| c != 0.0).unwrap_or(0)
    }

    /// Horner evaluation.
    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    /// Evaluates the reversed polynomial `s^n p(1/s)` at `w`. Used for large `|s|`.
    pub(crate) fn eval_reversed(&self, w: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * w + c)
    }

    /// `sum |c_k| |s|^k`, the scale against which evaluation residuals are judged.
    pub fn abs_eval(&self, s_abs: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * s_abs + c.abs())
    }

    pub fn scale(&self, k: f64) -> Self {
        if k == 0.0 {
            return Self::zero();
        }
        Self {
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|k| {
                let a = self.coeffs.get(k).copied().unwrap_or(0.0);
                let b = other.coeffs.get(k).copied().unwrap_or(0.0);
                let sum = a + b;
                if sum.abs() <= CANCELLATION_TOL * (a.abs() + b.abs()) {
                    0.0
                } else {
                    sum
                }
            })
            .collect();
        Self::new(coeffs)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero());
        }
        let degree = self.degree() + other.degree();
        if degree > DEGREE_CAP {
            return Err(Error::DegreeCapExceeded {
                degree,
                cap: DEGREE_CAP,
            });
        }
        let mut coeffs = vec![0.0; degree + 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Self::new(coeffs)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::zero();
        }
        Self {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        }
    }

    /// Divides by `s^k`. The caller guarantees the lowest `k` coefficients are zero.
    pub(crate) fn shift_down(&self, k: usize) -> Self {
        if k == 0 || self.is_zero() {
            return self.clone();
        }
        Self {
            coeffs: self.coeffs[k..].to_vec(),
        }
    }

    /// All complex roots, ordered by (real, imag).
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        crate::roots::find_roots(self)
    }
}

impl TryFrom<Vec<f64>> for Polynomial {
    type Error = Error;

    fn try_from(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("polynomial needs at least one coefficient"));
        }
        Self::new(coeffs)
    }
}

impl From<Polynomial> for Vec<f64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}
