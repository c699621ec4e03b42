//! Coefficient rings: `Q_p` and polynomial charts of the Tate algebra
//! `Q_p<w_1, ..., w_k>`, their norms, and specialization maps.

mod affinoid;
mod padic;

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub use affinoid::{AffinoidElement, Chart, Monomial, Overflow};
pub use padic::{max_relative_precision, PadicScalar, Valuation};

use crate::error::{Error, Result};

/// A norm value `p^(-v)`, or zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Norm {
    pub p: u64,
    pub valuation: Valuation,
}

impl Norm {
    pub fn new(p: u64, valuation: Valuation) -> Self {
        Norm { p, valuation }
    }

    pub fn as_rational(&self) -> BigRational {
        match self.valuation {
            Valuation::Infinity => BigRational::zero(),
            Valuation::Finite(v) => {
                let pp = BigInt::from(self.p).pow(v.unsigned_abs() as u32);
                if v >= 0 {
                    BigRational::new(BigInt::one(), pp)
                } else {
                    BigRational::from_integer(pp)
                }
            }
        }
    }
}

impl PartialOrd for Norm {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        // larger valuation = smaller norm
        Some(other.valuation.cmp(&self.valuation))
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.valuation {
            Valuation::Infinity => f.write_str("0"),
            Valuation::Finite(v) => write!(f, "p^({})", -v),
        }
    }
}

/// A ring homomorphism out of a chart. The pseudo-uniformizer `p` is always
/// fixed.
#[derive(Clone, Debug, PartialEq)]
pub enum RingHom {
    Identity,
    /// `w_i -> w0_i` for the listed variables (others untouched).
    Specialize(Vec<(String, PadicScalar)>),
    /// `w -> c * w`, a coefficientwise map `c_k -> c_k * c^k`.
    Rescale { var: String, factor: PadicScalar },
}

impl RingHom {
    pub fn specialize(var: &str, value: PadicScalar) -> Self {
        RingHom::Specialize(vec![(var.to_string(), value)])
    }

    /// Specialize every variable of `chart` at the given point.
    pub fn at_point(chart: &Chart, point: &[PadicScalar]) -> Result<Self> {
        if point.len() != chart.nvars() {
            return Err(Error::SizeMismatch(format!(
                "point has {} coordinates, chart has {} variables",
                point.len(),
                chart.nvars()
            )));
        }
        Ok(RingHom::Specialize(chart.vars.iter().cloned().zip(point.iter().copied()).collect()))
    }

    /// Checks that the map is defined on the closed unit polydisc.
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, x: &PadicScalar| {
            if x.valuation() < Valuation::Finite(0) {
                Err(Error::DomainViolation(format!("{name} -> {x} has negative valuation")))
            } else {
                Ok(())
            }
        };
        match self {
            RingHom::Identity => Ok(()),
            RingHom::Specialize(pairs) => pairs.iter().try_for_each(|(n, x)| check(n, x)),
            RingHom::Rescale { var, factor } => check(var, factor),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, RingHom::Identity)
    }
}

impl fmt::Display for RingHom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RingHom::Identity => f.write_str("id"),
            RingHom::Specialize(pairs) => {
                let parts: Vec<String> = pairs.iter().map(|(n, x)| format!("{n} -> {x}")).collect();
                write!(f, "{}", parts.join(", "))
            }
            RingHom::Rescale { var, factor } => write!(f, "{var} -> ({factor})*{var}"),
        }
    }
}

/// Image of an affinoid element under `h`. Gauss norms never increase.
pub fn apply_hom(h: &RingHom, f: &AffinoidElement) -> Result<AffinoidElement> {
    h.validate()?;
    match h {
        RingHom::Identity => Ok(f.clone()),
        RingHom::Specialize(pairs) => {
            let mut out = f.clone();
            for (name, x) in pairs {
                let i = f
                    .chart()
                    .var_index(name)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown variable {name:?}")))?;
                out = out.substitute(i, x);
            }
            Ok(out)
        }
        RingHom::Rescale { var, factor } => {
            let i = f
                .chart()
                .var_index(var)
                .ok_or_else(|| Error::InvalidInput(format!("unknown variable {var:?}")))?;
            Ok(f.rescale(i, factor))
        }
    }
}

/// Arithmetic shared by the two coefficient rings.
///
/// Constants are created from an existing element (`zero_like` and friends)
/// so that affinoid elements inherit their chart.
pub trait Coeff: Clone + fmt::Debug + fmt::Display + PartialEq + Send + Sync + 'static {
    fn prime(&self) -> u64;
    fn zero_like(&self) -> Self;
    fn scalar_like(&self, s: PadicScalar) -> Self;
    fn plus(&self, other: &Self) -> Self;
    fn minus(&self, other: &Self) -> Self;
    fn times(&self, other: &Self) -> Self;
    fn negated(&self) -> Self;
    fn scale(&self, s: &PadicScalar) -> Self;
    /// Valuation (Gauss valuation on charts).
    fn valuation(&self) -> Valuation;
    fn is_zero(&self) -> bool;
    fn is_exact_zero(&self) -> bool;
    fn is_unit(&self) -> bool;
    fn try_inverse(&self) -> Result<Self>;
    /// Inverse of a unit, possibly losing precision; equals `try_inverse`
    /// whenever that succeeds.
    fn inverse_to_precision(&self) -> Result<Self> {
        self.try_inverse()
    }
    /// Brings the element back within the ring's size limits.
    fn fit(&self) -> Self {
        self.clone()
    }
    fn apply_hom(&self, h: &RingHom) -> Result<Self>;
    fn min_abs_precision(&self) -> Option<i64>;
    fn cap_abs(&self, cap: i64) -> Self;
    /// Relative precision used for freshly created constants.
    fn working_rel(&self) -> u32;
    /// The element as a constant of `Q_p`, if it is one.
    fn as_scalar(&self) -> Option<PadicScalar>;
    /// Fewest significant digits among the nonzero coefficients.
    fn digits(&self) -> Option<u32>;

    fn one_like(&self) -> Self {
        self.scalar_like(PadicScalar::one(self.prime(), self.working_rel()))
    }

    fn int_like(&self, n: i64) -> Self {
        self.scalar_like(PadicScalar::from_int(self.prime(), n, self.working_rel()))
    }

    fn norm(&self) -> Norm {
        Norm::new(self.prime(), self.valuation())
    }

    fn agrees_with(&self, other: &Self) -> bool {
        self.minus(other).is_zero()
    }
}

impl Coeff for PadicScalar {
    fn prime(&self) -> u64 {
        PadicScalar::prime(self)
    }
    fn zero_like(&self) -> Self {
        PadicScalar::zero(PadicScalar::prime(self))
    }
    fn scalar_like(&self, s: PadicScalar) -> Self {
        s
    }
    fn plus(&self, other: &Self) -> Self {
        self.add(other)
    }
    fn minus(&self, other: &Self) -> Self {
        PadicScalar::sub(self, other)
    }
    fn times(&self, other: &Self) -> Self {
        PadicScalar::mul(self, other)
    }
    fn negated(&self) -> Self {
        PadicScalar::neg(self)
    }
    fn scale(&self, s: &PadicScalar) -> Self {
        PadicScalar::mul(self, s)
    }
    fn valuation(&self) -> Valuation {
        PadicScalar::valuation(self)
    }
    fn is_zero(&self) -> bool {
        PadicScalar::is_zero(self)
    }
    fn is_exact_zero(&self) -> bool {
        PadicScalar::is_exact_zero(self)
    }
    fn is_unit(&self) -> bool {
        PadicScalar::is_unit(self)
    }
    fn try_inverse(&self) -> Result<Self> {
        self.invert()
    }
    fn apply_hom(&self, h: &RingHom) -> Result<Self> {
        h.validate()?;
        Ok(*self)
    }
    fn min_abs_precision(&self) -> Option<i64> {
        self.abs_precision()
    }
    fn cap_abs(&self, cap: i64) -> Self {
        PadicScalar::cap_abs(self, cap)
    }
    /// Constants are exact, so they get the largest supported precision.
    fn working_rel(&self) -> u32 {
        max_relative_precision(PadicScalar::prime(self))
    }
    fn as_scalar(&self) -> Option<PadicScalar> {
        Some(*self)
    }
    fn digits(&self) -> Option<u32> {
        (!PadicScalar::is_zero(self)).then(|| self.rel_precision())
    }
}

impl Coeff for AffinoidElement {
    fn prime(&self) -> u64 {
        self.chart().p
    }
    fn zero_like(&self) -> Self {
        AffinoidElement::zero(self.chart())
    }
    fn scalar_like(&self, s: PadicScalar) -> Self {
        AffinoidElement::constant(self.chart(), s)
    }
    fn plus(&self, other: &Self) -> Self {
        AffinoidElement::plus(self, other)
    }
    fn minus(&self, other: &Self) -> Self {
        AffinoidElement::minus(self, other)
    }
    fn times(&self, other: &Self) -> Self {
        AffinoidElement::times(self, other)
    }
    fn negated(&self) -> Self {
        AffinoidElement::negated(self)
    }
    fn scale(&self, s: &PadicScalar) -> Self {
        AffinoidElement::scale(self, s)
    }
    fn valuation(&self) -> Valuation {
        self.gauss_valuation()
    }
    fn is_zero(&self) -> bool {
        AffinoidElement::is_zero(self)
    }
    fn is_exact_zero(&self) -> bool {
        AffinoidElement::is_exact_zero(self)
    }
    fn is_unit(&self) -> bool {
        AffinoidElement::is_unit(self)
    }
    fn try_inverse(&self) -> Result<Self> {
        AffinoidElement::try_inverse(self)
    }
    fn inverse_to_precision(&self) -> Result<Self> {
        AffinoidElement::inverse_to_precision(self)
    }
    fn fit(&self) -> Self {
        self.fit_to_chart()
    }
    fn apply_hom(&self, h: &RingHom) -> Result<Self> {
        apply_hom(h, self)
    }
    fn min_abs_precision(&self) -> Option<i64> {
        AffinoidElement::min_abs_precision(self)
    }
    fn cap_abs(&self, cap: i64) -> Self {
        AffinoidElement::cap_abs(self, cap)
    }
    fn working_rel(&self) -> u32 {
        self.chart().rel
    }
    fn as_scalar(&self) -> Option<PadicScalar> {
        AffinoidElement::as_scalar(self)
    }
    fn digits(&self) -> Option<u32> {
        self.terms().filter(|(_, c)| !c.is_zero()).map(|(_, c)| c.rel_precision()).min()
    }
}
