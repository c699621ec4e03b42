//! Compact operators on orthonormalizable modules, represented by a finite
//! window of their matrix plus a certified decay profile for the columns.
//!
//! Column `j` of the window holds the coordinates of `phi(e_j)`.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rings::{Coeff, RingHom, Valuation};

pub type Rational = Ratio<i64>;

/// A lower bound for a valuation, possibly rational, possibly infinite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ValBound {
    Finite(Rational),
    Infinite,
}

impl ValBound {
    pub fn int(v: i64) -> Self {
        ValBound::Finite(Rational::from_integer(v))
    }

    pub fn plus(self, other: ValBound) -> ValBound {
        match (self, other) {
            (ValBound::Finite(a), ValBound::Finite(b)) => ValBound::Finite(a + b),
            _ => ValBound::Infinite,
        }
    }

    /// Smallest integer valuation compatible with the bound.
    pub fn ceil(self) -> Option<i64> {
        match self {
            ValBound::Finite(r) => Some(r.ceil().to_integer()),
            ValBound::Infinite => None,
        }
    }

    pub fn finite(self) -> Option<Rational> {
        match self {
            ValBound::Finite(r) => Some(r),
            ValBound::Infinite => None,
        }
    }
}

impl From<Valuation> for ValBound {
    fn from(v: Valuation) -> Self {
        match v {
            Valuation::Finite(v) => ValBound::int(v),
            Valuation::Infinity => ValBound::Infinite,
        }
    }
}

impl fmt::Display for ValBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValBound::Finite(r) => write!(f, "{r}"),
            ValBound::Infinite => f.write_str("inf"),
        }
    }
}

/// Renders a rational as `"n/d"`.
pub fn fraction_string(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Guaranteed lower bound for the valuation of an element, accounting for
/// digits that are only known to vanish modulo a power of `p`.
pub fn lower_valuation<C: Coeff>(x: &C) -> ValBound {
    let v = ValBound::from(x.valuation());
    match x.min_abs_precision() {
        Some(a) => v.min(ValBound::int(a)),
        None => v,
    }
}

/// Claimed valuation lower bounds `b_j` for the full columns of an operator.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum DecayProfile {
    /// `b_j = offset + rate * j`.
    Geometric { offset: Rational, rate: Rational },
    /// `b_j = offset + rate * floor(j / step)`.
    Stepped { offset: Rational, step: u32, rate: Rational },
    /// Listed bounds, continued linearly with `rate` after the last one.
    Explicit { head: Vec<ValBound>, rate: Rational },
    /// The window is the whole operator: the module is finite free.
    Finite,
}

impl DecayProfile {
    pub fn geometric(offset: i64, rate: i64) -> Self {
        DecayProfile::Geometric { offset: Rational::from_integer(offset), rate: Rational::from_integer(rate) }
    }

    /// Claimed bound at column `j`; `None` for finite operators, whose
    /// window columns carry no claim.
    pub fn bound(&self, j: usize) -> Option<ValBound> {
        let jr = Rational::from_integer(j as i64);
        match self {
            DecayProfile::Geometric { offset, rate } => Some(ValBound::Finite(offset + rate * jr)),
            DecayProfile::Stepped { offset, step, rate } => {
                let k = Rational::from_integer(Integer::div_floor(&(j as i64), &(*step as i64)));
                Some(ValBound::Finite(offset + rate * k))
            }
            DecayProfile::Explicit { head, rate } => {
                if j < head.len() {
                    Some(head[j])
                } else {
                    let last = *head.last().unwrap_or(&ValBound::int(0));
                    let extra = Rational::from_integer((j + 1 - head.len()) as i64) * rate;
                    Some(last.plus(ValBound::Finite(extra)))
                }
            }
            DecayProfile::Finite => None,
        }
    }

    /// Bound on the norm of every column with index at least `m`.
    pub fn tail(&self, m: usize) -> ValBound {
        self.bound(m).unwrap_or(ValBound::Infinite)
    }

    /// Checks that the bounds are nondecreasing and tend to infinity.
    pub fn validate(&self) -> Result<()> {
        let positive = |r: &Rational| r.is_positive();
        match self {
            DecayProfile::Geometric { rate, .. } if !positive(rate) => {
                Err(Error::InvalidInput("geometric decay needs a positive rate".into()))
            }
            DecayProfile::Stepped { step, rate, .. } if *step == 0 || !positive(rate) => {
                Err(Error::InvalidInput("stepped decay needs step >= 1 and a positive rate".into()))
            }
            DecayProfile::Explicit { head, rate } => {
                if head.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::InvalidInput("explicit decay bounds must be nondecreasing".into()));
                }
                if head.last() != Some(&ValBound::Infinite) && !positive(rate) {
                    return Err(Error::InvalidInput("explicit decay needs a positive continuation rate".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// The profile of `phi o psi` given the profile of `psi` and the norm
    /// valuation of `phi`.
    fn shifted(&self, by: ValBound) -> DecayProfile {
        let Some(s) = by.finite() else {
            return DecayProfile::Explicit { head: vec![ValBound::Infinite], rate: Rational::zero() };
        };
        match self {
            DecayProfile::Geometric { offset, rate } => DecayProfile::Geometric { offset: offset + s, rate: *rate },
            DecayProfile::Stepped { offset, step, rate } => {
                DecayProfile::Stepped { offset: offset + s, step: *step, rate: *rate }
            }
            DecayProfile::Explicit { head, rate } => DecayProfile::Explicit {
                head: head.iter().map(|b| b.plus(ValBound::Finite(s))).collect(),
                rate: *rate,
            },
            DecayProfile::Finite => DecayProfile::Finite,
        }
    }
}

/// Column-norm data of an operator: observed window columns followed by the
/// profile bounds past the window. Supports the product bounds used for
/// characteristic series.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ColumnBounds {
    observed: Vec<ValBound>,
    profile: DecayProfile,
}

impl ColumnBounds {
    pub fn new(observed: Vec<ValBound>, profile: DecayProfile) -> Self {
        ColumnBounds { observed, profile }
    }

    pub fn window(&self) -> usize {
        self.observed.len()
    }

    pub fn tail(&self) -> ValBound {
        self.profile.tail(self.observed.len())
    }

    /// The `n` smallest column valuation bounds over all columns.
    pub fn smallest(&self, n: usize) -> Vec<ValBound> {
        let m = self.observed.len();
        let mut all = self.observed.clone();
        all.extend((m..m + n).map(|j| self.profile.tail(j)));
        all.sort();
        all.truncate(n);
        all
    }

    /// `v(c_n) >= ` this, from `|c_n| <= r_1 ... r_n`.
    pub fn coefficient_bound(&self, n: usize) -> ValBound {
        self.smallest(n).into_iter().fold(ValBound::int(0), ValBound::plus)
    }

    /// Valuation bound for the difference between `c_n` of the operator and
    /// of its window: one factor comes from a column past the window.
    pub fn truncation_error(&self, n: usize) -> ValBound {
        if n == 0 {
            return ValBound::Infinite;
        }
        let tail = self.tail();
        self.smallest(n - 1).into_iter().fold(tail, ValBound::plus)
    }
}

/// Outcome of checking the window against its decay profile.
#[derive(Clone, Debug, PartialEq)]
pub enum Compactness {
    Certified { tail: ValBound },
    Violation { column: usize, observed: ValBound, claimed: ValBound },
    InvalidProfile(String),
}

impl Compactness {
    pub fn is_certified(&self) -> bool {
        matches!(self, Compactness::Certified { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompactOperator<C> {
    matrix: Matrix<C>,
    decay: DecayProfile,
    label: String,
}

impl<C: Coeff> CompactOperator<C> {
    pub fn new(matrix: Matrix<C>, decay: DecayProfile) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::SizeMismatch(format!("operator window is {}x{}", matrix.rows(), matrix.cols())));
        }
        Ok(CompactOperator { matrix, decay, label: "e".to_string() })
    }

    /// An operator on a finite free module.
    pub fn finite(matrix: Matrix<C>) -> Result<Self> {
        Self::new(matrix, DecayProfile::Finite)
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = label.to_string();
        self
    }

    pub fn matrix(&self) -> &Matrix<C> {
        &self.matrix
    }

    pub fn decay(&self) -> &DecayProfile {
        &self.decay
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn size(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_finite(&self) -> bool {
        self.decay == DecayProfile::Finite
    }

    /// Valuation lower bounds of the window columns.
    pub fn observed_columns(&self) -> Vec<ValBound> {
        let m = &self.matrix;
        (0..m.cols())
            .map(|j| (0..m.rows()).map(|i| lower_valuation(&m[(i, j)])).min().unwrap_or(ValBound::Infinite))
            .collect()
    }

    pub fn column_bounds(&self) -> ColumnBounds {
        ColumnBounds::new(self.observed_columns(), self.decay.clone())
    }

    /// Bound on the columns outside the window.
    pub fn tail(&self) -> ValBound {
        self.decay.tail(self.size())
    }

    /// Valuation of the operator norm: the smallest entry valuation, combined
    /// with the tail bound.
    pub fn norm_valuation(&self) -> ValBound {
        self.observed_columns().into_iter().min().unwrap_or(ValBound::Infinite).min(self.tail())
    }

    pub fn verify_compactness(&self) -> Compactness {
        if let Err(e) = self.decay.validate() {
            return Compactness::InvalidProfile(e.to_string());
        }
        for (j, obs) in self.observed_columns().into_iter().enumerate() {
            if let Some(claimed) = self.decay.bound(j) {
                if obs < claimed {
                    return Compactness::Violation { column: j, observed: obs, claimed };
                }
            }
        }
        Compactness::Certified { tail: self.tail() }
    }

    /// `self o other`.
    ///
    /// For infinite modules the window product misses the terms through rows
    /// past the window; they are bounded by `tail(self) + ||other||` and the
    /// entries are capped accordingly.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.size() != other.size() {
            return Err(Error::SizeMismatch(format!("sizes {} and {}", self.size(), other.size())));
        }
        if self.is_finite() != other.is_finite() {
            return Err(Error::SizeMismatch("composing operators on finite and infinite modules".into()));
        }
        let mut matrix = self.matrix.mul(&other.matrix);
        if let Some(cap) = self.tail().plus(other.norm_valuation()).ceil() {
            matrix = matrix.map(|x| x.cap_abs(cap));
        }
        let decay = other.decay.shifted(self.norm_valuation());
        Ok(CompactOperator { matrix, decay, label: self.label.clone() })
    }

    /// Zeroes the columns `j >= m` and returns the bound on the discarded
    /// part.
    pub fn truncate_finite_rank(&self, m: usize) -> Result<(Self, ValBound)> {
        let n = self.size();
        if m > n {
            return Err(Error::InvalidInput(format!("truncation index {m} exceeds window size {n}")));
        }
        let obs = self.observed_columns();
        let bound = obs[m..].iter().copied().min().unwrap_or(ValBound::Infinite).min(self.tail());
        let zero = self.matrix.zero_elem().clone();
        let matrix = Matrix::from_fn(n, n, &zero, |i, j| if j < m { self.matrix[(i, j)].clone() } else { zero.clone() });
        let decay = if self.is_finite() {
            DecayProfile::Finite
        } else {
            let mut head: Vec<ValBound> = (0..m).map(|j| self.decay.tail(j)).collect();
            head.push(ValBound::Infinite);
            DecayProfile::Explicit { head, rate: Rational::zero() }
        };
        Ok((CompactOperator { matrix, decay, label: self.label.clone() }, bound))
    }

    /// Entrywise image under a contractive ring map.
    pub fn base_change(&self, h: &RingHom) -> Result<Self> {
        Ok(CompactOperator { matrix: self.matrix.apply_hom(h)?, decay: self.decay.clone(), label: self.label.clone() })
    }

    /// Replaces the window (same profile and label).
    pub fn with_matrix(&self, matrix: Matrix<C>) -> Result<Self> {
        let mut out = Self::new(matrix, self.decay.clone())?;
        out.label = self.label.clone();
        Ok(out)
    }

    /// A fingerprint of the operator used to tie series to their source.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.size().hash(&mut h);
        for x in self.matrix.entries() {
            x.to_string().hash(&mut h);
        }
        self.decay.hash(&mut h);
        h.finish()
    }
}

/// Renders a valuation bound as a norm `p^(-v)`.
pub fn norm_string(p: u64, v: ValBound) -> String {
    match v {
        ValBound::Infinite => "0".into(),
        ValBound::Finite(r) => format!("{p}^({})", fraction_string(&-r)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::int_matrix;
    use crate::rings::PadicScalar;

    fn diag_powers(p: u64, n: usize, e: u32) -> CompactOperator<PadicScalar> {
        let like = PadicScalar::zero(p);
        let entries: Vec<PadicScalar> = (0..n).map(|j| PadicScalar::from_int(p, (p as i64).pow(e * j as u32), 20)).collect();
        CompactOperator::new(Matrix::diagonal(&entries, &like), DecayProfile::geometric(0, e as i64)).unwrap()
    }

    #[test]
    fn norms() {
        assert_eq!(diag_powers(3, 5, 1).norm_valuation(), ValBound::int(0));
        let pid = CompactOperator::finite(int_matrix(3, 10, &[&[3, 0], &[0, 3]])).unwrap();
        assert_eq!(pid.norm_valuation(), ValBound::int(1));
        let zero = CompactOperator::finite(int_matrix(3, 10, &[&[0, 0], &[0, 0]])).unwrap();
        assert_eq!(zero.norm_valuation(), ValBound::Infinite);
    }

    #[test]
    fn compactness_checks() {
        assert!(diag_powers(2, 6, 1).verify_compactness().is_certified());
        let id = CompactOperator::new(int_matrix(2, 10, &[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]]), DecayProfile::geometric(0, 1)).unwrap();
        assert!(matches!(id.verify_compactness(), Compactness::Violation { column: 1, .. }));
        // column j has valuation floor(j/2) against a claim of j
        let p = 2;
        let like = PadicScalar::zero(p);
        let entries: Vec<PadicScalar> = (0..6).map(|j| PadicScalar::from_int(p, 1 << (j / 2), 10)).collect();
        let half = CompactOperator::new(Matrix::diagonal(&entries, &like), DecayProfile::geometric(0, 1)).unwrap();
        assert!(matches!(half.verify_compactness(), Compactness::Violation { column: 1, .. }));
        let stepped = DecayProfile::Stepped { offset: Rational::zero(), step: 2, rate: Rational::from_integer(1) };
        let ok = CompactOperator::new(half.matrix().clone(), stepped).unwrap();
        assert!(ok.verify_compactness().is_certified());
    }

    #[test]
    fn composition() {
        let d = diag_powers(5, 4, 1);
        let dd = d.compose(&d).unwrap();
        assert!(dd.matrix().agrees_with(diag_powers(5, 4, 2).matrix()));
        let n = CompactOperator::finite(int_matrix(5, 10, &[&[0, 1], &[0, 0]])).unwrap();
        assert!(n.compose(&n).unwrap().matrix().is_zero());
        let id = CompactOperator::finite(int_matrix(5, 10, &[&[1, 0], &[0, 1]])).unwrap();
        assert!(n.compose(&id).unwrap().matrix().agrees_with(n.matrix()));
        assert!(d.compose(&n).is_err());
    }

    #[test]
    fn truncation_bounds() {
        let d = diag_powers(3, 6, 1);
        assert_eq!(d.truncate_finite_rank(3).unwrap().1, ValBound::int(3));
        assert_eq!(d.truncate_finite_rank(6).unwrap().1, d.tail());
        assert_eq!(d.truncate_finite_rank(0).unwrap().1, d.norm_valuation());
    }

    #[test]
    fn column_bound_products() {
        let cb = ColumnBounds::new(vec![ValBound::int(2), ValBound::int(0)], DecayProfile::geometric(0, 1));
        assert_eq!(cb.smallest(3), vec![ValBound::int(0), ValBound::int(2), ValBound::int(2)]);
        assert_eq!(cb.coefficient_bound(2), ValBound::int(2));
        assert_eq!(cb.truncation_error(1), ValBound::int(2));
        assert_eq!(cb.truncation_error(2), ValBound::int(2));
    }
}
