//! Precision-tracked elements of `Q_p`.
//!
//! A nonzero element is stored as `p^val * unit` where the unit is known
//! modulo `p^rel`. Zeros are either exact or "zero modulo `p^abs`", which is
//! how cancellation below working precision shows up.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// The largest modulus `p^rel` we allow; products are formed in `u128`.
const MODULUS_LIMIT: u128 = 1 << 62;

/// Extended valuation: either an integer or "indistinguishable from zero".
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Valuation {
    Finite(i64),
    Infinity,
}

impl Valuation {
    pub fn finite(self) -> Option<i64> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinity => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Valuation::Infinity)
    }

    /// `self + other` with `Infinity` absorbing.
    pub fn plus(self, other: Valuation) -> Valuation {
        match (self, other) {
            (Valuation::Finite(a), Valuation::Finite(b)) => Valuation::Finite(a + b),
            _ => Valuation::Infinity,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::Infinity => write!(f, "INFTY"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Repr {
    /// Zero. `abs = None` means exactly zero, otherwise zero modulo `p^abs`.
    Zero { abs: Option<i64> },
    Unit { val: i64, unit: u64, rel: u32 },
}

/// An element of `Q_p` in capped-relative representation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PadicScalar {
    p: u64,
    repr: Repr,
}

pub(crate) fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// `p^e` if it stays below the modulus limit.
pub(crate) fn checked_pow(p: u64, e: u32) -> Option<u128> {
    let mut acc: u128 = 1;
    for _ in 0..e {
        acc = acc.checked_mul(p as u128)?;
        if acc > MODULUS_LIMIT {
            return None;
        }
    }
    Some(acc)
}

fn pow_mod(p: u64, e: u32) -> u128 {
    checked_pow(p, e).expect("p^rel exceeds the supported modulus")
}

fn mod_inverse(a: u128, m: u128) -> u128 {
    let (mut old_r, mut r) = (a as i128, m as i128);
    let (mut old_s, mut s) = (1i128, 0i128);
    while r != 0 {
        let q = old_r / r;
        (old_r, r) = (r, old_r - q * r);
        (old_s, s) = (s, old_s - q * s);
    }
    debug_assert_eq!(old_r, 1, "unit not invertible");
    old_s.rem_euclid(m as i128) as u128
}

/// Largest relative precision supported for the prime `p`.
pub fn max_relative_precision(p: u64) -> u32 {
    let (mut e, mut acc) = (0, 1u128);
    while acc * p as u128 <= MODULUS_LIMIT {
        acc *= p as u128;
        e += 1;
    }
    e
}

impl PadicScalar {
    fn check_prime(p: u64, rel: u32) -> Result<()> {
        if !is_prime(p) {
            return Err(Error::InvalidInput(format!("{p} is not prime")));
        }
        if rel == 0 || checked_pow(p, rel).is_none() {
            return Err(Error::InvalidInput(format!(
                "relative precision {rel} unsupported for p = {p} (max {})",
                max_relative_precision(p)
            )));
        }
        Ok(())
    }

    /// Exact zero.
    pub fn zero(p: u64) -> Self {
        PadicScalar { p, repr: Repr::Zero { abs: None } }
    }

    /// Zero known modulo `p^abs`.
    pub fn zero_mod(p: u64, abs: i64) -> Self {
        PadicScalar { p, repr: Repr::Zero { abs: Some(abs) } }
    }

    pub fn one(p: u64, rel: u32) -> Self {
        Self::from_parts(p, 0, 1, rel)
    }

    /// `p^val * unit` with `unit` reduced modulo `p^rel`. Panics if `unit` is
    /// divisible by `p`.
    pub fn from_parts(p: u64, val: i64, unit: u64, rel: u32) -> Self {
        assert!(unit % p != 0, "unit part must be coprime to p");
        let m = pow_mod(p, rel);
        PadicScalar { p, repr: Repr::Unit { val, unit: (unit as u128 % m) as u64, rel } }
    }

    /// The integer `n` with `rel` significant digits (zero is exact).
    pub fn from_int(p: u64, n: i64, rel: u32) -> Self {
        Self::from_bigint(p, &BigInt::from(n), rel)
    }

    pub fn from_bigint(p: u64, n: &BigInt, rel: u32) -> Self {
        if n.is_zero() {
            return Self::zero(p);
        }
        let pb = BigInt::from(p);
        let mut m = n.clone();
        let mut val = 0i64;
        while m.is_multiple_of(&pb) {
            m /= &pb;
            val += 1;
        }
        let modulus = BigInt::from(pow_mod(p, rel));
        let unit = m.mod_floor(&modulus).to_u64().expect("reduced unit fits in u64");
        PadicScalar { p, repr: Repr::Unit { val, unit, rel } }
    }

    /// `num / den` with `rel` significant digits.
    pub fn from_ratio(p: u64, num: i64, den: i64, rel: u32) -> Result<Self> {
        let n = Self::from_int(p, num, rel);
        let d = Self::from_int(p, den, rel);
        n.div(&d)
    }

    /// Checked constructor for user input.
    pub fn try_from_int(p: u64, n: i64, rel: u32) -> Result<Self> {
        Self::check_prime(p, rel)?;
        Ok(Self::from_int(p, n, rel))
    }

    /// Parses a literal: a decimal integer, a fraction `a/b`, or
    /// `p^v*u` with explicit valuation (`u` an integer, possibly divisible
    /// by `p`).
    pub fn parse(p: u64, s: &str, rel: u32) -> Result<Self> {
        Self::check_prime(p, rel)?;
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::Parse(format!("bad p-adic literal {s:?}"));
        if let Some(rest) = s.strip_prefix("p^") {
            let (v, u) = rest.split_once('*').ok_or_else(bad)?;
            let v: i64 = v.trim_start_matches('(').trim_end_matches(')').parse().map_err(|_| bad())?;
            let u = BigInt::from_str(u).map_err(|_| bad())?;
            let unit = Self::from_bigint(p, &u, rel);
            return Ok(unit.shift(v));
        }
        if let Some((a, b)) = s.split_once('/') {
            let a = BigInt::from_str(a).map_err(|_| bad())?;
            let b = BigInt::from_str(b).map_err(|_| bad())?;
            if b.is_zero() {
                return Err(bad());
            }
            return Self::from_bigint(p, &a, rel).div(&Self::from_bigint(p, &b, rel));
        }
        let n = BigInt::from_str(&s).map_err(|_| bad())?;
        Ok(Self::from_bigint(p, &n, rel))
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn valuation(&self) -> Valuation {
        match self.repr {
            Repr::Zero { .. } => Valuation::Infinity,
            Repr::Unit { val, .. } => Valuation::Finite(val),
        }
    }

    /// Absolute precision: the element is known modulo `p^abs`. `None` for
    /// exact zero.
    pub fn abs_precision(&self) -> Option<i64> {
        match self.repr {
            Repr::Zero { abs } => abs,
            Repr::Unit { val, rel, .. } => Some(val + rel as i64),
        }
    }

    /// Number of significant digits (0 for zeros).
    pub fn rel_precision(&self) -> u32 {
        match self.repr {
            Repr::Zero { .. } => 0,
            Repr::Unit { rel, .. } => rel,
        }
    }

    /// Unit part, if nonzero.
    pub fn unit(&self) -> Option<u64> {
        match self.repr {
            Repr::Zero { .. } => None,
            Repr::Unit { unit, .. } => Some(unit),
        }
    }

    /// Indistinguishable from zero at working precision.
    pub fn is_zero(&self) -> bool {
        matches!(self.repr, Repr::Zero { .. })
    }

    pub fn is_exact_zero(&self) -> bool {
        matches!(self.repr, Repr::Zero { abs: None })
    }

    /// Invertible in `Q_p`: certified nonzero.
    pub fn is_unit(&self) -> bool {
        !self.is_zero()
    }

    /// Unit of `Z_p`.
    pub fn is_integral_unit(&self) -> bool {
        self.valuation() == Valuation::Finite(0)
    }

    /// Multiplies by `p^k`.
    pub fn shift(&self, k: i64) -> Self {
        let repr = match self.repr {
            Repr::Zero { abs } => Repr::Zero { abs: abs.map(|a| a + k) },
            Repr::Unit { val, unit, rel } => Repr::Unit { val: val + k, unit, rel },
        };
        PadicScalar { p: self.p, repr }
    }

    /// Lowers the absolute precision to at most `cap`.
    pub fn cap_abs(&self, cap: i64) -> Self {
        match self.repr {
            Repr::Zero { abs } => {
                let abs = Some(abs.map_or(cap, |a| a.min(cap)));
                PadicScalar { p: self.p, repr: Repr::Zero { abs } }
            }
            Repr::Unit { val, unit, rel } => {
                if cap <= val {
                    Self::zero_mod(self.p, cap)
                } else if cap - val < rel as i64 {
                    let rel = (cap - val) as u32;
                    Self::from_parts(self.p, val, unit, rel)
                } else {
                    *self
                }
            }
        }
    }

    /// Lowers the relative precision to at most `rel`.
    pub fn cap_rel(&self, rel: u32) -> Self {
        match self.repr {
            Repr::Unit { val, unit, rel: r } if rel < r => {
                if rel == 0 {
                    Self::zero_mod(self.p, val)
                } else {
                    Self::from_parts(self.p, val, unit, rel)
                }
            }
            _ => *self,
        }
    }

    fn assert_same_prime(&self, other: &Self) {
        assert_eq!(self.p, other.p, "mixing p-adic numbers for different primes");
    }

    pub fn add(&self, other: &Self) -> Self {
        self.assert_same_prime(other);
        let p = self.p;
        match (self.repr, other.repr) {
            (Repr::Zero { abs: None }, _) => *other,
            (_, Repr::Zero { abs: None }) => *self,
            (Repr::Zero { abs: Some(a) }, Repr::Zero { abs: Some(b) }) => Self::zero_mod(p, a.min(b)),
            (Repr::Zero { abs: Some(a) }, _) => other.cap_abs(a),
            (_, Repr::Zero { abs: Some(b) }) => self.cap_abs(b),
            (Repr::Unit { val: va, unit: ua, rel: ra }, Repr::Unit { val: vb, unit: ub, rel: rb }) => {
                let v = va.min(vb);
                let abs = (va + ra as i64).min(vb + rb as i64);
                let digits = (abs - v) as u32;
                let m = pow_mod(p, digits);
                let term = |val: i64, unit: u64| -> u128 {
                    let shift = (val - v) as u32;
                    if shift >= digits {
                        0
                    } else {
                        (unit as u128 % m) * pow_mod(p, shift) % m
                    }
                };
                let s = (term(va, ua) + term(vb, ub)) % m;
                Self::normalize(p, v, s, digits)
            }
        }
    }

    /// Builds `p^v * s` where `s` is known modulo `p^digits`.
    fn normalize(p: u64, v: i64, mut s: u128, digits: u32) -> Self {
        if s == 0 {
            return Self::zero_mod(p, v + digits as i64);
        }
        let mut k = 0u32;
        while s % p as u128 == 0 {
            s /= p as u128;
            k += 1;
        }
        let rel = digits - k;
        let m = pow_mod(p, rel);
        PadicScalar { p, repr: Repr::Unit { val: v + k as i64, unit: (s % m) as u64, rel } }
    }

    pub fn neg(&self) -> Self {
        match self.repr {
            Repr::Zero { .. } => *self,
            Repr::Unit { val, unit, rel } => {
                let m = pow_mod(self.p, rel);
                let u = (m - unit as u128) % m;
                PadicScalar { p: self.p, repr: Repr::Unit { val, unit: u as u64, rel } }
            }
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.assert_same_prime(other);
        let p = self.p;
        match (self.repr, other.repr) {
            (Repr::Zero { abs: None }, _) | (_, Repr::Zero { abs: None }) => Self::zero(p),
            (Repr::Zero { abs: Some(a) }, Repr::Zero { abs: Some(b) }) => Self::zero_mod(p, a + b),
            (Repr::Zero { abs: Some(a) }, Repr::Unit { val, .. })
            | (Repr::Unit { val, .. }, Repr::Zero { abs: Some(a) }) => Self::zero_mod(p, a + val),
            (Repr::Unit { val: va, unit: ua, rel: ra }, Repr::Unit { val: vb, unit: ub, rel: rb }) => {
                let rel = ra.min(rb);
                let m = pow_mod(p, rel);
                let u = (ua as u128 % m) * (ub as u128 % m) % m;
                PadicScalar { p, repr: Repr::Unit { val: va + vb, unit: u as u64, rel } }
            }
        }
    }

    /// Multiplicative inverse; `ZeroAtPrecision` when indistinguishable from 0.
    pub fn invert(&self) -> Result<Self> {
        match self.repr {
            Repr::Zero { .. } => Err(Error::ZeroAtPrecision),
            Repr::Unit { val, unit, rel } => {
                let m = pow_mod(self.p, rel);
                let inv = mod_inverse(unit as u128, m);
                Ok(PadicScalar { p: self.p, repr: Repr::Unit { val: -val, unit: inv as u64, rel } })
            }
        }
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self.mul(&other.invert()?))
    }

    pub fn pow(&self, e: u32) -> Self {
        if e == 0 {
            return Self::one(self.p, max_relative_precision(self.p));
        }
        (1..e).fold(*self, |acc, _| acc.mul(self))
    }

    /// True when `self - other` is zero at the tracked precision.
    pub fn agrees_with(&self, other: &Self) -> bool {
        self.sub(other).is_zero()
    }

    /// Residue of an integral element modulo `p^k`, as an integer in
    /// `[0, p^k)`; `None` if the element is not integral or not known to
    /// that precision.
    pub fn residue(&self, k: u32) -> Option<u128> {
        let m = checked_pow(self.p, k)?;
        match self.repr {
            Repr::Zero { abs } => match abs {
                None => Some(0),
                Some(a) if a >= k as i64 => Some(0),
                _ => None,
            },
            Repr::Unit { val, unit, rel } => {
                if val < 0 || val + (rel as i64) < k as i64 {
                    return None;
                }
                if val >= k as i64 {
                    return Some(0);
                }
                Some(unit as u128 * pow_mod(self.p, val as u32) % m)
            }
        }
    }

    /// The integer in `(-p^k/2, p^k/2]` congruent to `self` mod `p^k`.
    pub fn balanced_residue(&self, k: u32) -> Option<i128> {
        let m = checked_pow(self.p, k)? as i128;
        let r = self.residue(k)? as i128;
        Some(if r > m / 2 { r - m } else { r })
    }

    /// Canonical rendering `p^v * u (mod p^r)`.
    pub fn canonical(&self) -> String {
        match self.repr {
            Repr::Zero { abs: None } => "0".to_string(),
            Repr::Zero { abs: Some(a) } => format!("0 (mod p^{a})"),
            Repr::Unit { val, unit, rel } => format!("p^{val} * {unit} (mod p^{rel})"),
        }
    }

    /// Parses the canonical rendering produced by [`PadicScalar::canonical`].
    pub fn parse_canonical(p: u64, s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad canonical p-adic string {s:?}"));
        let s = s.trim();
        if s == "0" {
            return Ok(Self::zero(p));
        }
        if let Some(rest) = s.strip_prefix("0 (mod p^") {
            let a: i64 = rest.strip_suffix(')').ok_or_else(bad)?.parse().map_err(|_| bad())?;
            return Ok(Self::zero_mod(p, a));
        }
        let rest = s.strip_prefix("p^").ok_or_else(bad)?;
        let (v, rest) = rest.split_once(" * ").ok_or_else(bad)?;
        let (u, rest) = rest.split_once(" (mod p^").ok_or_else(bad)?;
        let r = rest.strip_suffix(')').ok_or_else(bad)?;
        let val: i64 = v.parse().map_err(|_| bad())?;
        let unit: u64 = u.parse().map_err(|_| bad())?;
        let rel: u32 = r.parse().map_err(|_| bad())?;
        Self::check_prime(p, rel)?;
        if unit % p == 0 {
            return Err(bad());
        }
        Ok(Self::from_parts(p, val, unit, rel))
    }

    /// Exact rational value of the stored representative, as (num, den).
    pub fn to_bigint_ratio(&self) -> (BigInt, BigInt) {
        match self.repr {
            Repr::Zero { .. } => (BigInt::zero(), BigInt::one()),
            Repr::Unit { val, unit, rel } => {
                let m = pow_mod(self.p, rel);
                let u = if unit as u128 > m / 2 { BigInt::from(unit) - BigInt::from(m) } else { BigInt::from(unit) };
                let pp = BigInt::from(self.p).pow(val.unsigned_abs() as u32);
                if val >= 0 {
                    (u * pp, BigInt::one())
                } else {
                    (u, pp)
                }
            }
        }
    }

    /// Compares valuations, treating zero as the largest.
    pub fn cmp_valuation(&self, other: &Self) -> Ordering {
        self.valuation().cmp(&other.valuation())
    }

    pub fn is_negative_representative(&self) -> bool {
        self.to_bigint_ratio().0.is_negative()
    }
}

impl fmt::Display for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl std::ops::Add for PadicScalar {
    type Output = PadicScalar;
    fn add(self, rhs: Self) -> Self {
        PadicScalar::add(&self, &rhs)
    }
}

impl std::ops::Sub for PadicScalar {
    type Output = PadicScalar;
    fn sub(self, rhs: Self) -> Self {
        PadicScalar::sub(&self, &rhs)
    }
}

impl std::ops::Mul for PadicScalar {
    type Output = PadicScalar;
    fn mul(self, rhs: Self) -> Self {
        PadicScalar::mul(&self, &rhs)
    }
}

impl std::ops::Neg for PadicScalar {
    type Output = PadicScalar;
    fn neg(self) -> Self {
        PadicScalar::neg(&self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn valuation_examples() {
        assert_eq!(PadicScalar::from_int(2, 12, 8).valuation(), Valuation::Finite(2));
        assert_eq!(PadicScalar::from_int(2, 0, 8).valuation(), Valuation::Infinity);
        assert_eq!(PadicScalar::from_int(5, 12, 8).valuation(), Valuation::Finite(0));
    }

    #[test]
    fn invert_examples() {
        let a = PadicScalar::from_int(2, 3, 4).invert().unwrap();
        assert_eq!(a.unit(), Some(11));
        assert_eq!(a.valuation(), Valuation::Finite(0));

        let b = PadicScalar::from_int(2, 2, 8).invert().unwrap();
        assert_eq!(b.valuation(), Valuation::Finite(-1));
        assert_eq!(b.unit(), Some(1));

        // 1/(1-2) = sum of 2^n = -1
        let c = PadicScalar::from_int(2, 1 - 2, 6).invert().unwrap();
        let geometric: i64 = (0..6).map(|n| 1i64 << n).sum();
        assert_eq!(geometric, 63);
        assert_eq!(c.residue(6), Some(63));
        assert_eq!(c.balanced_residue(6), Some(-1));

        assert!(matches!(PadicScalar::zero(3).invert(), Err(Error::ZeroAtPrecision)));
        assert!(matches!(PadicScalar::zero_mod(3, 7).invert(), Err(Error::ZeroAtPrecision)));
    }

    #[test]
    fn cancellation_loses_digits() {
        let p = 5;
        let a = PadicScalar::from_int(p, 1 + 125, 6);
        let b = PadicScalar::from_int(p, 1, 6);
        let d = a.sub(&b);
        assert_eq!(d.valuation(), Valuation::Finite(3));
        assert_eq!(d.abs_precision(), Some(6));
        assert_eq!(d.rel_precision(), 3);
        let z = b.sub(&b);
        assert!(z.is_zero() && !z.is_exact_zero());
        assert_eq!(z.abs_precision(), Some(6));
    }

    #[test]
    fn exact_zero_absorbs() {
        let z = PadicScalar::zero(3);
        let a = PadicScalar::from_int(3, 7, 10);
        assert!(z.mul(&a).is_exact_zero());
        assert_eq!(z.add(&a), a);
    }

    #[test]
    fn parse_literals() {
        let a = PadicScalar::parse(5, "p^3*2", 10).unwrap();
        assert_eq!(a.valuation(), Valuation::Finite(3));
        assert_eq!(a.unit(), Some(2));
        let b = PadicScalar::parse(5, "-250", 10).unwrap();
        assert_eq!(b.valuation(), Valuation::Finite(3));
        assert!(b.agrees_with(&a.mul(&PadicScalar::from_int(5, -1, 10))));
        let c = PadicScalar::parse(5, "1/5", 10).unwrap();
        assert_eq!(c.valuation(), Valuation::Finite(-1));
        assert!(PadicScalar::parse(4, "1", 10).is_err());
        assert!(PadicScalar::parse(5, "x", 10).is_err());
        let e = PadicScalar::parse(5, "p^-2*10", 4).unwrap();
        assert_eq!(e.valuation(), Valuation::Finite(-1));
    }

    #[test]
    fn canonical_round_trip() {
        for s in [PadicScalar::from_int(3, -17, 9), PadicScalar::zero(3), PadicScalar::zero_mod(3, 4)] {
            assert_eq!(PadicScalar::parse_canonical(3, &s.canonical()).unwrap(), s);
        }
    }

    fn scalar(p: u64) -> impl Strategy<Value = PadicScalar> {
        (-10_000i64..10_000, 0i64..4, 4u32..12).prop_map(move |(n, shift, rel)| {
            PadicScalar::from_int(p, n, rel).shift(shift)
        })
    }

    proptest! {
        #[test]
        fn valuation_is_additive(a in scalar(3), b in scalar(3)) {
            let ab = a.mul(&b);
            if !a.is_zero() && !b.is_zero() {
                prop_assert_eq!(ab.valuation(), a.valuation().plus(b.valuation()));
            }
        }

        #[test]
        fn ultrametric(a in scalar(5), b in scalar(5)) {
            let s = a.add(&b);
            prop_assert!(s.valuation() >= a.valuation().min(b.valuation()));
            if a.valuation() != b.valuation() {
                prop_assert_eq!(s.valuation(), a.valuation().min(b.valuation()));
            }
        }

        #[test]
        fn invert_is_involution(a in scalar(2)) {
            prop_assume!(!a.is_zero());
            let back = a.invert().unwrap().invert().unwrap();
            prop_assert!(back.agrees_with(&a));
            let one = a.mul(&a.invert().unwrap());
            prop_assert!(one.agrees_with(&PadicScalar::one(2, a.rel_precision())));
        }
    }
}
