//! Polynomials in `X` over a coefficient ring, lowest degree first.

use std::fmt;

use num_bigint::BigInt;
use num_integer::binomial;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rings::{Coeff, PadicScalar, RingHom};

#[derive(Clone, Debug, PartialEq)]
pub struct Poly<C> {
    coeffs: Vec<C>,
    zero: C,
}

/// `C(n, k)` as a p-adic constant.
pub fn binomial_scalar(p: u64, n: u64, k: u64, rel: u32) -> PadicScalar {
    if k > n {
        return PadicScalar::zero(p);
    }
    PadicScalar::from_bigint(p, &binomial(BigInt::from(n), BigInt::from(k)), rel)
}

impl<C: Coeff> Poly<C> {
    pub fn new(coeffs: Vec<C>, like: &C) -> Self {
        Poly { coeffs, zero: like.zero_like() }
    }

    pub fn zero(like: &C) -> Self {
        Poly { coeffs: Vec::new(), zero: like.zero_like() }
    }

    pub fn one(like: &C) -> Self {
        Poly { coeffs: vec![like.one_like()], zero: like.zero_like() }
    }

    /// `1 - a X`.
    pub fn one_minus(a: &C) -> Self {
        Poly { coeffs: vec![a.one_like(), a.negated()], zero: a.zero_like() }
    }

    pub fn zero_elem(&self) -> &C {
        &self.zero
    }

    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    pub fn coeff(&self, n: usize) -> C {
        self.coeffs.get(n).cloned().unwrap_or_else(|| self.zero.clone())
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Index of the last coefficient not zero at precision.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| !c.is_zero())
    }

    pub fn is_zero(&self) -> bool {
        self.degree().is_none()
    }

    /// Drops trailing coefficients that are zero at precision.
    pub fn trimmed(&self) -> Self {
        let n = self.degree().map_or(0, |d| d + 1);
        Poly { coeffs: self.coeffs[..n].to_vec(), zero: self.zero.clone() }
    }

    /// Keeps the coefficients of degree below `n`.
    pub fn truncated(&self, n: usize) -> Self {
        Poly { coeffs: self.coeffs.iter().take(n).cloned().collect(), zero: self.zero.clone() }
    }

    pub fn map(&self, f: impl Fn(&C) -> C) -> Self {
        Poly { coeffs: self.coeffs.iter().map(f).collect(), zero: self.zero.clone() }
    }

    pub fn plus(&self, other: &Self) -> Self {
        let n = self.len().max(other.len());
        Poly { coeffs: (0..n).map(|i| self.coeff(i).plus(&other.coeff(i))).collect(), zero: self.zero.clone() }
    }

    pub fn minus(&self, other: &Self) -> Self {
        let n = self.len().max(other.len());
        Poly { coeffs: (0..n).map(|i| self.coeff(i).minus(&other.coeff(i))).collect(), zero: self.zero.clone() }
    }

    pub fn times(&self, other: &Self) -> Self {
        self.mul_trunc(other, usize::MAX)
    }

    /// Product modulo `X^cap`.
    pub fn mul_trunc(&self, other: &Self, cap: usize) -> Self {
        if self.is_empty() || other.is_empty() {
            return Poly::zero(&self.zero);
        }
        let n = (self.len() + other.len() - 1).min(cap);
        let mut out = vec![self.zero.clone(); n];
        for (i, a) in self.coeffs.iter().enumerate().take(n) {
            if a.is_exact_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate().take(n - i) {
                if b.is_exact_zero() {
                    continue;
                }
                out[i + j] = out[i + j].plus(&a.times(b));
            }
        }
        Poly { coeffs: out, zero: self.zero.clone() }
    }

    pub fn scale(&self, c: &C) -> Self {
        self.map(|x| c.times(x))
    }

    pub fn negated(&self) -> Self {
        self.map(|x| x.negated())
    }

    pub fn pow(&self, e: u32) -> Self {
        (0..e).fold(Poly::one(&self.zero), |acc, _| acc.times(self))
    }

    pub fn eval(&self, x: &C) -> C {
        self.coeffs.iter().rev().fold(self.zero.clone(), |acc, c| acc.times(x).plus(c))
    }

    pub fn eval_matrix(&self, m: &Matrix<C>) -> Matrix<C> {
        m.eval_poly(&self.coeffs)
    }

    /// `X^n P(1/X)` for the given formal degree `n`.
    pub fn reversed(&self, n: usize) -> Self {
        Poly { coeffs: (0..=n).map(|i| self.coeff(n - i)).collect(), zero: self.zero.clone() }
    }

    /// `Delta^s P = sum_n C(n+s, s) a_{n+s} X^n`.
    pub fn delta(&self, s: usize) -> Self {
        let p = self.zero.prime();
        let rel = self.zero.working_rel();
        let coeffs = (s..self.len())
            .map(|m| self.coeffs[m].scale(&binomial_scalar(p, m as u64, s as u64, rel)))
            .collect();
        Poly { coeffs, zero: self.zero.clone() }
    }

    pub fn apply_hom(&self, h: &RingHom) -> Result<Self> {
        Ok(Poly {
            coeffs: self.coeffs.iter().map(|c| c.apply_hom(h)).collect::<Result<_>>()?,
            zero: self.zero.apply_hom(h)?,
        })
    }

    /// Coefficientwise agreement at precision.
    pub fn agrees_with(&self, other: &Self) -> bool {
        self.minus(other).is_zero()
    }

    /// Division by a polynomial whose leading coefficient (at `divisor`'s
    /// degree) is invertible. Returns quotient and remainder.
    pub fn div_rem(&self, divisor: &Self) -> Result<(Self, Self)> {
        let dd = divisor.degree().ok_or(Error::ZeroAtPrecision)?;
        let lead_inv = divisor.coeffs[dd].try_inverse()?;
        let mut rem = self.coeffs.clone();
        let qlen = rem.len().saturating_sub(dd);
        let mut quo = vec![self.zero.clone(); qlen];
        for k in (0..qlen).rev() {
            let c = rem[k + dd].times(&lead_inv);
            for (i, d) in divisor.coeffs.iter().enumerate().take(dd + 1) {
                rem[k + i] = rem[k + i].minus(&c.times(d));
            }
            quo[k] = c;
        }
        rem.truncate(dd);
        Ok((Poly { coeffs: quo, zero: self.zero.clone() }, Poly { coeffs: rem, zero: self.zero.clone() }))
    }
}

impl<C: Coeff> Poly<C> {
    /// Divides by the leading coefficient.
    pub fn monic(&self) -> Result<Self> {
        let t = self.trimmed();
        let lead = t.coeffs.last().ok_or(Error::ZeroAtPrecision)?.inverse_to_precision()?;
        Ok(t.scale(&lead))
    }

    pub fn derivative(&self) -> Self {
        let p = self.zero.prime();
        let rel = self.zero.working_rel();
        let coeffs = (1..self.len()).map(|i| self.coeffs[i].scale(&PadicScalar::from_int(p, i as i64, rel))).collect();
        Poly { coeffs, zero: self.zero.clone() }
    }

    /// `P(c X + d)`.
    pub fn compose_linear(&self, c: &C, d: &C) -> Self {
        let lin = Poly { coeffs: vec![d.clone(), c.clone()], zero: self.zero.clone() };
        self.coeffs.iter().rev().fold(Poly::zero(&self.zero), |acc, a| acc.times(&lin).plus(&Poly::new(vec![a.clone()], &self.zero)))
    }

    /// Monic greatest common divisor by Euclid, remainders that vanish at
    /// precision counting as zero.
    pub fn gcd(&self, other: &Self) -> Result<Self> {
        let mut a = self.trimmed();
        let mut b = other.trimmed();
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b)?;
            a = b;
            b = r.trimmed();
        }
        a.monic()
    }
}

impl<C: Coeff> fmt::Display for Poly<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_exact_zero())
            .map(|(i, c)| match i {
                0 => format!("({c})"),
                1 => format!("({c})*X"),
                _ => format!("({c})*X^{i}"),
            })
            .collect();
        if terms.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&terms.join(" + "))
        }
    }
}

/// Scalar polynomial from integer coefficients.
pub fn int_poly(p: u64, rel: u32, coeffs: &[i64]) -> Poly<PadicScalar> {
    Poly::new(coeffs.iter().map(|&c| PadicScalar::from_int(p, c, rel)).collect(), &PadicScalar::zero(p))
}
