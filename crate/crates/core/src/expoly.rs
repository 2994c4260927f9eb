//! Exponential polynomials `Σ c_k x^{p_k} e^{r_k x}`.
//!
//! Every free-particle solution in the catalog (hyperbolic gap states,
//! the linear threshold states, flat-band states built from exponential
//! profiles) is of this form. Keeping seed matrices in this representation
//! lets determinants and adjugates be formed term by term, so that exact
//! cancellations such as `cosh² − sinh² = 1` happen on coefficients instead
//! of on huge floating-point values. Evaluation factors out the dominant
//! exponential and returns a [`Scaled`] number, which keeps ratios like
//! `N(x)/det(x)` accurate far beyond the range where `sinh` and `cosh`
//! become indistinguishable in double precision.

use std::ops::{Add, Mul, Neg, Sub};

use crate::C64;

/// Two rates closer than this (relative) are merged.
const RATE_TOL: f64 = 1e-12;
/// A merged coefficient smaller than this fraction of the magnitudes that
/// produced it is an exact cancellation and is dropped.
const CANCEL_TOL: f64 = 1e-11;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpTerm {
    pub coeff: C64,
    pub power: u32,
    pub rate: C64,
    /// Sum of magnitudes of all contributions merged into `coeff`.
    budget: f64,
}

impl ExpTerm {
    pub fn new(coeff: C64, power: u32, rate: C64) -> Self {
        ExpTerm {
            coeff,
            power,
            rate,
            budget: coeff.norm(),
        }
    }

    /// `Re(r)·x`, the exponent controlling the size of the term.
    fn growth(&self, x: f64) -> f64 {
        self.rate.re * x
    }

    /// Term value divided by `e^{shift}`.
    fn eval_shifted(&self, x: f64, shift: f64) -> C64 {
        let z = self.rate * x - shift;
        let poly = if self.power == 0 { 1.0 } else { x.powi(self.power as i32) };
        self.coeff * poly * z.exp()
    }
}

/// A number stored as `mantissa · e^{log_scale}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scaled {
    pub mantissa: C64,
    pub log_scale: f64,
}

impl Scaled {
    pub const ZERO: Scaled = Scaled {
        mantissa: C64::new(0.0, 0.0),
        log_scale: 0.0,
    };

    pub fn value(&self) -> C64 {
        if self.mantissa == C64::new(0.0, 0.0) {
            return self.mantissa;
        }
        self.mantissa * self.log_scale.exp()
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == C64::new(0.0, 0.0)
    }

    /// `ln|value|`, or −∞ for zero.
    pub fn ln_abs(&self) -> f64 {
        self.mantissa.norm().ln() + self.log_scale
    }

    pub fn div(&self, other: &Scaled) -> C64 {
        if self.is_zero() {
            return C64::new(0.0, 0.0);
        }
        (self.mantissa / other.mantissa) * (self.log_scale - other.log_scale).exp()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExpPoly {
    terms: Vec<ExpTerm>,
}

impl ExpPoly {
    pub fn zero() -> Self {
        ExpPoly { terms: Vec::new() }
    }

    pub fn constant(c: C64) -> Self {
        Self::term(c, 0, C64::new(0.0, 0.0))
    }

    pub fn real(c: f64) -> Self {
        Self::constant(C64::from(c))
    }

    pub fn term(coeff: C64, power: u32, rate: C64) -> Self {
        let mut p = ExpPoly {
            terms: vec![ExpTerm::new(coeff, power, rate)],
        };
        p.simplify();
        p
    }

    /// `coeff · e^{rate x}`.
    pub fn exp(coeff: C64, rate: C64) -> Self {
        Self::term(coeff, 0, rate)
    }

    /// `cosh(k x)` for real `k`.
    pub fn cosh(k: f64) -> Self {
        Self::exp(C64::from(0.5), C64::from(k)) + Self::exp(C64::from(0.5), C64::from(-k))
    }

    /// `sinh(k x)` for real `k`.
    pub fn sinh(k: f64) -> Self {
        Self::exp(C64::from(0.5), C64::from(k)) - Self::exp(C64::from(0.5), C64::from(-k))
    }

    /// `x` itself.
    pub fn x() -> Self {
        Self::term(C64::from(1.0), 1, C64::new(0.0, 0.0))
    }

    pub fn from_terms(terms: Vec<ExpTerm>) -> Self {
        let mut p = ExpPoly { terms };
        p.simplify();
        p
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, s: C64) -> Self {
        if s == C64::new(0.0, 0.0) {
            return Self::zero();
        }
        let terms = self
            .terms
            .iter()
            .map(|t| ExpTerm {
                coeff: t.coeff * s,
                budget: t.budget * s.norm(),
                ..*t
            })
            .collect();
        ExpPoly { terms }
    }

    pub fn derivative(&self) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * 2);
        for t in &self.terms {
            if t.rate != C64::new(0.0, 0.0) {
                terms.push(ExpTerm {
                    coeff: t.coeff * t.rate,
                    budget: t.budget * t.rate.norm(),
                    ..*t
                });
            }
            if t.power > 0 {
                let p = t.power as f64;
                terms.push(ExpTerm {
                    coeff: t.coeff * p,
                    power: t.power - 1,
                    rate: t.rate,
                    budget: t.budget * p,
                });
            }
        }
        Self::from_terms(terms)
    }

    /// Plain evaluation; may overflow for large `|x|`.
    pub fn eval(&self, x: f64) -> C64 {
        self.terms.iter().map(|t| t.eval_shifted(x, 0.0)).sum()
    }

    fn max_growth(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.growth(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Evaluation with the dominant exponential factored out.
    pub fn eval_scaled(&self, x: f64) -> Scaled {
        if self.terms.is_empty() {
            return Scaled::ZERO;
        }
        let shift = self.max_growth(x);
        let mantissa = self.terms.iter().map(|t| t.eval_shifted(x, shift)).sum();
        Scaled {
            mantissa,
            log_scale: shift,
        }
    }

    /// `Σ |term_k(x)|`, the magnitude the value is assembled from.
    pub fn abs_sum_scaled(&self, x: f64) -> Scaled {
        if self.terms.is_empty() {
            return Scaled::ZERO;
        }
        let shift = self.max_growth(x);
        let s: f64 = self.terms.iter().map(|t| t.eval_shifted(x, shift).norm()).sum();
        Scaled {
            mantissa: C64::from(s),
            log_scale: shift,
        }
    }

    fn simplify(&mut self) {
        self.terms.retain(|t| t.coeff != C64::new(0.0, 0.0));
        self.terms.sort_by(|a, b| {
            a.power
                .cmp(&b.power)
                .then(a.rate.re.total_cmp(&b.rate.re))
                .then(a.rate.im.total_cmp(&b.rate.im))
        });
        let mut merged: Vec<ExpTerm> = Vec::with_capacity(self.terms.len());
        for t in self.terms.drain(..) {
            // Sorting is lexicographic, so equal rates can be separated by a
            // term whose imaginary part sorts in between; scan all candidates.
            match merged
                .iter_mut()
                .find(|m| m.power == t.power && same_rate(m.rate, t.rate))
            {
                Some(m) => {
                    m.coeff += t.coeff;
                    m.budget += t.budget;
                }
                None => merged.push(t),
            }
        }
        merged.retain(|t| t.coeff.norm() > CANCEL_TOL * t.budget);
        self.terms = merged;
    }
}

fn same_rate(a: C64, b: C64) -> bool {
    (a - b).norm() <= RATE_TOL * (1.0 + a.norm().max(b.norm()))
}

impl Add for ExpPoly {
    type Output = ExpPoly;
    fn add(self, rhs: ExpPoly) -> ExpPoly {
        let mut terms = self.terms;
        terms.extend(rhs.terms);
        ExpPoly::from_terms(terms)
    }
}

impl<'a> Add<&'a ExpPoly> for &'a ExpPoly {
    type Output = ExpPoly;
    fn add(self, rhs: &ExpPoly) -> ExpPoly {
        self.clone() + rhs.clone()
    }
}

impl Neg for ExpPoly {
    type Output = ExpPoly;
    fn neg(self) -> ExpPoly {
        self.scale(C64::from(-1.0))
    }
}

impl Sub for ExpPoly {
    type Output = ExpPoly;
    fn sub(self, rhs: ExpPoly) -> ExpPoly {
        self + (-rhs)
    }
}

impl<'a> Sub<&'a ExpPoly> for &'a ExpPoly {
    type Output = ExpPoly;
    fn sub(self, rhs: &ExpPoly) -> ExpPoly {
        self.clone() - rhs.clone()
    }
}

impl<'a> Mul<&'a ExpPoly> for &'a ExpPoly {
    type Output = ExpPoly;
    fn mul(self, rhs: &ExpPoly) -> ExpPoly {
        let mut terms = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for a in &self.terms {
            for b in &rhs.terms {
                terms.push(ExpTerm {
                    coeff: a.coeff * b.coeff,
                    power: a.power + b.power,
                    rate: a.rate + b.rate,
                    budget: a.budget * b.budget,
                });
            }
        }
        ExpPoly::from_terms(terms)
    }
}

impl Mul for ExpPoly {
    type Output = ExpPoly;
    fn mul(self, rhs: ExpPoly) -> ExpPoly {
        &self * &rhs
    }
}

/// Three exponential-polynomial components.
pub type ExpSpinor = [ExpPoly; 3];

pub fn spinor_derivative(s: &ExpSpinor) -> ExpSpinor {
    [s[0].derivative(), s[1].derivative(), s[2].derivative()]
}

/// 3×3 matrix of exponential polynomials, row-major.
#[derive(Clone, Debug)]
pub struct ExpMatrix3(pub [[ExpPoly; 3]; 3]);

impl ExpMatrix3 {
    pub fn from_columns(cols: &[ExpSpinor; 3]) -> Self {
        ExpMatrix3(std::array::from_fn(|i| {
            std::array::from_fn(|j| cols[j][i].clone())
        }))
    }

    pub fn derivative(&self) -> Self {
        ExpMatrix3(std::array::from_fn(|i| {
            std::array::from_fn(|j| self.0[i][j].derivative())
        }))
    }

    pub fn det(&self) -> ExpPoly {
        let a = &self.0;
        let m0 = &(&a[1][1] * &a[2][2]) - &(&a[1][2] * &a[2][1]);
        let m1 = &(&a[1][0] * &a[2][2]) - &(&a[1][2] * &a[2][0]);
        let m2 = &(&a[1][0] * &a[2][1]) - &(&a[1][1] * &a[2][0]);
        &(&(&a[0][0] * &m0) - &(&a[0][1] * &m1)) + &(&a[0][2] * &m2)
    }

    pub fn adjugate(&self) -> Self {
        let a = &self.0;
        let others = |k: usize| match k {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        ExpMatrix3(std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let (r0, r1) = others(j);
                let (c0, c1) = others(i);
                let minor = &(&a[r0][c0] * &a[r1][c1]) - &(&a[r0][c1] * &a[r1][c0]);
                if (i + j) % 2 == 0 {
                    minor
                } else {
                    -minor
                }
            })
        }))
    }

    pub fn mul(&self, rhs: &ExpMatrix3) -> ExpMatrix3 {
        ExpMatrix3(std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                (0..3).fold(ExpPoly::zero(), |acc, k| {
                    acc + &self.0[i][k] * &rhs.0[k][j]
                })
            })
        }))
    }

    pub fn eval_scaled(&self, x: f64) -> [[Scaled; 3]; 3] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.0[i][j].eval_scaled(x)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyperbolic_identity_cancels_exactly() {
        let k = 1.3;
        let c = ExpPoly::cosh(k);
        let s = ExpPoly::sinh(k);
        let one = &(&c * &c) - &(&s * &s);
        assert_eq!(one.terms().len(), 1);
        assert!((one.eval(40.0) - C64::from(1.0)).norm() < 1e-14);
    }

    #[test]
    fn derivative_of_polynomial_exponential() {
        // d/dx [x² e^{2x}] = (2x + 2x²) e^{2x}
        let p = ExpPoly::term(C64::from(1.0), 2, C64::from(2.0));
        let d = p.derivative();
        for x in [-1.0f64, 0.0, 0.7, 2.0] {
            let expected = (2.0 * x + 2.0 * x * x) * (2.0 * x).exp();
            assert!((d.eval(x).re - expected).abs() < 1e-12 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn scaled_evaluation_survives_overflow_range() {
        let c = ExpPoly::cosh(1.0);
        let s = ExpPoly::sinh(1.0);
        // tanh(800) = 1 while cosh(800) overflows.
        let ratio = s.eval_scaled(800.0).div(&c.eval_scaled(800.0));
        assert!((ratio.re - 1.0).abs() < 1e-15);
        assert!(!c.eval(800.0).re.is_finite());
    }

    #[test]
    fn complex_rates_merge() {
        let a = ExpPoly::exp(C64::from(1.0), C64::new(0.0, 2.0));
        let b = ExpPoly::exp(C64::from(-1.0), C64::new(0.0, 2.0));
        assert!((a + b).is_zero());
    }

    #[test]
    fn determinant_of_nearly_parallel_columns() {
        // columns (sinh, cosh) and (cosh, sinh): det = sinh² − cosh² = −1
        let m = ExpMatrix3([
            [ExpPoly::sinh(1.0), ExpPoly::cosh(1.0), ExpPoly::zero()],
            [ExpPoly::cosh(1.0), ExpPoly::sinh(1.0), ExpPoly::zero()],
            [ExpPoly::zero(), ExpPoly::zero(), ExpPoly::real(1.0)],
        ]);
        let det = m.det();
        assert!((det.eval_scaled(60.0).value() + C64::from(1.0)).norm() < 1e-14);
        let adj = m.adjugate();
        let prod = m.mul(&adj);
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { -1.0 } else { 0.0 };
                assert!((prod.0[i][j].eval(3.0) - C64::from(expected)).norm() < 1e-12);
            }
        }
    }
}
