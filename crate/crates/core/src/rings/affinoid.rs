//! Elements of the Tate algebra `Q_p<w_1, ..., w_k>` restricted to
//! polynomial data of bounded total degree, with the Gauss norm.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::padic::{PadicScalar, Valuation};
use crate::error::{Error, Result};

/// The affinoid chart an element lives on: the prime, the variable names and
/// the total-degree cap `D`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Chart {
    pub p: u64,
    pub vars: Vec<String>,
    pub degree_bound: u32,
    /// Relative precision used for constants created on this chart.
    pub rel: u32,
}

impl Chart {
    pub fn new(p: u64, vars: &[&str], degree_bound: u32, rel: u32) -> Arc<Chart> {
        Arc::new(Chart { p, vars: vars.iter().map(|s| s.to_string()).collect(), degree_bound, rel })
    }

    /// Single-variable chart with the default variable name `w`.
    pub fn univariate(p: u64, degree_bound: u32, rel: u32) -> Arc<Chart> {
        Self::new(p, &["w"], degree_bound, rel)
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v == name)
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    /// All exponent vectors of total degree at most `deg`, graded then
    /// lexicographic.
    pub fn monomials_up_to(&self, deg: u32) -> Vec<Monomial> {
        let mut out = Vec::new();
        for d in 0..=deg {
            let mut cur = vec![0u32; self.nvars()];
            push_monomials(&mut out, &mut cur, 0, d);
        }
        out
    }
}

fn push_monomials(out: &mut Vec<Monomial>, cur: &mut Vec<u32>, idx: usize, remaining: u32) {
    if cur.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    if idx == cur.len() - 1 {
        cur[idx] = remaining;
        out.push(cur.clone());
        cur[idx] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        cur[idx] = e;
        push_monomials(out, cur, idx + 1, remaining - e);
    }
    cur[idx] = 0;
}

pub type Monomial = Vec<u32>;

fn monomial_degree(m: &Monomial) -> u32 {
    m.iter().sum()
}

/// What to do when a product exceeds the chart's degree bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Overflow {
    Error,
    Truncate,
}

/// A polynomial in the chart variables with p-adic coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinoidElement {
    chart: Arc<Chart>,
    terms: BTreeMap<Monomial, PadicScalar>,
}

impl AffinoidElement {
    pub fn zero(chart: &Arc<Chart>) -> Self {
        AffinoidElement { chart: chart.clone(), terms: BTreeMap::new() }
    }

    pub fn constant(chart: &Arc<Chart>, c: PadicScalar) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_exact_zero() {
            terms.insert(vec![0; chart.nvars()], c);
        }
        AffinoidElement { chart: chart.clone(), terms }
    }

    pub fn from_int(chart: &Arc<Chart>, n: i64) -> Self {
        Self::constant(chart, PadicScalar::from_int(chart.p, n, chart.rel))
    }

    pub fn variable(chart: &Arc<Chart>, name: &str) -> Result<Self> {
        let i = chart
            .var_index(name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown variable {name:?}")))?;
        let mut m = vec![0; chart.nvars()];
        m[i] = 1;
        Ok(Self::from_terms(chart, [(m, PadicScalar::one(chart.p, chart.rel))]))
    }

    pub fn from_terms(chart: &Arc<Chart>, terms: impl IntoIterator<Item = (Monomial, PadicScalar)>) -> Self {
        let mut out = Self::zero(chart);
        for (m, c) in terms {
            assert_eq!(m.len(), chart.nvars(), "monomial arity");
            out.add_term(m, c);
        }
        out
    }

    /// Univariate element from coefficients listed lowest degree first.
    pub fn from_coeffs(chart: &Arc<Chart>, coeffs: &[PadicScalar]) -> Result<Self> {
        if chart.nvars() != 1 {
            return Err(Error::InvalidInput("coefficient arrays need a one-variable chart".into()));
        }
        let deg = coeffs.len().saturating_sub(1) as u32;
        if deg > chart.degree_bound {
            return Err(Error::DegreeOverflow { degree: deg, bound: chart.degree_bound });
        }
        Ok(Self::from_terms(chart, coeffs.iter().enumerate().map(|(k, c)| (vec![k as u32], *c))))
    }

    fn add_term(&mut self, m: Monomial, c: PadicScalar) {
        if c.is_exact_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(existing) => {
                let s = existing.add(&c);
                if s.is_exact_zero() {
                    self.terms.remove(&m);
                } else {
                    *existing = s;
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &PadicScalar)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> PadicScalar {
        self.terms.get(m).copied().unwrap_or_else(|| PadicScalar::zero(self.chart.p))
    }

    pub fn constant_term(&self) -> PadicScalar {
        self.coeff(&vec![0; self.chart.nvars()])
    }

    /// Total degree of the terms that are not exactly zero.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(monomial_degree).max().unwrap_or(0)
    }

    /// Gauss valuation `min_k v(c_k)`.
    pub fn gauss_valuation(&self) -> Valuation {
        self.terms.values().map(|c| c.valuation()).min().unwrap_or(Valuation::Infinity)
    }

    /// Gauss norm as the pair (p, exponent): the norm is `p^(-v)`; `None`
    /// for zero.
    pub fn gauss_norm(&self) -> super::Norm {
        super::Norm::new(self.chart.p, self.gauss_valuation())
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|c| c.is_zero())
    }

    pub fn is_exact_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The constant, if every non-constant term is exactly zero.
    pub fn as_scalar(&self) -> Option<PadicScalar> {
        if self.terms.keys().all(|m| monomial_degree(m) == 0) {
            Some(self.constant_term())
        } else {
            None
        }
    }

    /// Units of the Tate algebra: the constant term strictly dominates.
    pub fn is_unit(&self) -> bool {
        let c0 = self.constant_term();
        let v0 = match c0.valuation() {
            Valuation::Finite(v) => v,
            Valuation::Infinity => return false,
        };
        self.terms.iter().filter(|(m, _)| monomial_degree(m) > 0).all(|(_, c)| match c.valuation() {
            Valuation::Finite(v) => v > v0,
            Valuation::Infinity => c.abs_precision().map_or(true, |a| a > v0),
        })
    }

    pub fn plus(&self, other: &Self) -> Self {
        self.assert_same_chart(other);
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), *c);
        }
        out
    }

    pub fn negated(&self) -> Self {
        AffinoidElement {
            chart: self.chart.clone(),
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c.neg())).collect(),
        }
    }

    pub fn minus(&self, other: &Self) -> Self {
        self.plus(&other.negated())
    }

    /// Product without a degree check.
    pub fn times(&self, other: &Self) -> Self {
        self.assert_same_chart(other);
        let mut out = Self::zero(&self.chart);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m: Monomial = ma.iter().zip(mb).map(|(a, b)| a + b).collect();
                out.add_term(m, ca.mul(cb));
            }
        }
        out
    }

    /// Product respecting the chart degree bound.
    pub fn checked_mul(&self, other: &Self, overflow: Overflow) -> Result<Self> {
        let prod = self.times(other);
        let deg = prod.degree();
        if deg <= self.chart.degree_bound {
            return Ok(prod);
        }
        match overflow {
            Overflow::Error => Err(Error::DegreeOverflow { degree: deg, bound: self.chart.degree_bound }),
            Overflow::Truncate => Ok(prod.truncate(self.chart.degree_bound)),
        }
    }

    /// Drops all terms of total degree above `deg`.
    pub fn truncate(&self, deg: u32) -> Self {
        AffinoidElement {
            chart: self.chart.clone(),
            terms: self.terms.iter().filter(|(m, _)| monomial_degree(m) <= deg).map(|(m, c)| (m.clone(), *c)).collect(),
        }
    }

    /// Errors if the element does not fit the chart's degree bound.
    pub fn check_degree(&self) -> Result<()> {
        let deg = self.degree();
        if deg > self.chart.degree_bound {
            Err(Error::DegreeOverflow { degree: deg, bound: self.chart.degree_bound })
        } else {
            Ok(())
        }
    }

    pub fn scale(&self, s: &PadicScalar) -> Self {
        let mut out = Self::zero(&self.chart);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c.mul(s));
        }
        out
    }

    pub fn try_inverse(&self) -> Result<Self> {
        if let Some(c) = self.as_scalar() {
            return Ok(Self::constant(&self.chart, c.invert()?));
        }
        if self.is_unit() {
            Err(Error::NotExactlyInvertible)
        } else if self.is_zero() {
            Err(Error::ZeroAtPrecision)
        } else {
            Err(Error::DomainViolation(format!("{self} is not a unit of the Tate algebra")))
        }
    }

    /// Substitutes `value` for the variable with index `var`.
    pub fn substitute(&self, var: usize, value: &PadicScalar) -> Self {
        let mut out = Self::zero(&self.chart);
        for (m, c) in &self.terms {
            let mut m2 = m.clone();
            let e = std::mem::replace(&mut m2[var], 0);
            out.add_term(m2, c.mul(&value.pow(e)));
        }
        out
    }

    /// `w_var -> factor * w_var`.
    pub fn rescale(&self, var: usize, factor: &PadicScalar) -> Self {
        let mut out = Self::zero(&self.chart);
        for (m, c) in &self.terms {
            out.add_term(m.clone(), c.mul(&factor.pow(m[var])));
        }
        out
    }

    /// Full evaluation at a point of the closed unit polydisc.
    pub fn evaluate(&self, point: &[PadicScalar]) -> Result<PadicScalar> {
        if point.len() != self.chart.nvars() {
            return Err(Error::SizeMismatch(format!("point has {} coordinates, chart has {}", point.len(), self.chart.nvars())));
        }
        let mut acc = PadicScalar::zero(self.chart.p);
        for (m, c) in &self.terms {
            let mut t = *c;
            for (x, e) in point.iter().zip(m) {
                t = t.mul(&x.pow(*e));
            }
            acc = acc.add(&t);
        }
        Ok(acc)
    }

    /// Smallest absolute precision among the coefficients.
    pub fn min_abs_precision(&self) -> Option<i64> {
        self.terms.values().filter_map(|c| c.abs_precision()).min()
    }

    /// Forgets everything below `p^cap` in the Gauss norm: every monomial
    /// of the chart becomes known only modulo `p^cap`.
    pub fn cap_abs(&self, cap: i64) -> Self {
        let mut terms: BTreeMap<Monomial, PadicScalar> =
            self.terms.iter().map(|(m, c)| (m.clone(), c.cap_abs(cap))).collect();
        for m in self.chart.monomials_up_to(self.chart.degree_bound) {
            terms.entry(m).or_insert_with(|| PadicScalar::zero_mod(self.chart.p, cap));
        }
        AffinoidElement { chart: self.chart.clone(), terms }
    }

    /// Drops the terms above the chart's degree bound and charges their
    /// Gauss valuation to the precision of what is left.
    pub fn fit_to_chart(&self) -> Self {
        let bound = self.chart.degree_bound;
        let lost = self
            .terms
            .iter()
            .filter(|(m, _)| monomial_degree(m) > bound)
            .filter_map(|(_, c)| match c.valuation() {
                Valuation::Finite(v) => Some(v),
                Valuation::Infinity => c.abs_precision(),
            })
            .min();
        let kept = self.truncate(bound);
        match lost {
            Some(cap) => kept.cap_abs(cap),
            None => kept,
        }
    }

    /// Inverse of a unit of the Tate algebra, as a geometric series cut to
    /// the chart; the omitted part is charged to the precision.
    pub fn inverse_to_precision(&self) -> Result<Self> {
        if self.as_scalar().is_some() || !self.is_unit() {
            return self.try_inverse();
        }
        let c0 = self.constant_term().invert()?;
        let one = Self::constant(&self.chart, PadicScalar::one(self.chart.p, self.chart.rel));
        let t = one.minus(&self.scale(&c0)).fit_to_chart();
        let vt = t
            .terms
            .values()
            .filter_map(|c| match c.valuation() {
                Valuation::Finite(v) => Some(v),
                Valuation::Infinity => c.abs_precision(),
            })
            .min()
            .unwrap_or(i64::MAX)
            .max(1);
        let v0 = match c0.valuation() {
            Valuation::Finite(v) => v,
            Valuation::Infinity => 0,
        };
        let target = self.chart.rel as i64;
        let mut sum = one.clone();
        let mut power = one;
        let mut k = 0i64;
        while (k + 1) * vt < target {
            power = power.times(&t).fit_to_chart();
            sum = sum.plus(&power);
            k += 1;
        }
        Ok(sum.scale(&c0).cap_abs(v0 + (k + 1) * vt))
    }

    /// Coefficient vector on the given monomial list; errors if a term falls
    /// outside it.
    pub fn flatten(&self, monomials: &[Monomial]) -> Result<Vec<PadicScalar>> {
        let mut out = vec![PadicScalar::zero(self.chart.p); monomials.len()];
        for (m, c) in &self.terms {
            match monomials.iter().position(|x| x == m) {
                Some(i) => out[i] = *c,
                None => {
                    return Err(Error::DegreeOverflow { degree: monomial_degree(m), bound: monomials.iter().map(monomial_degree).max().unwrap_or(0) })
                }
            }
        }
        Ok(out)
    }

    fn assert_same_chart(&self, other: &Self) {
        assert!(
            Arc::ptr_eq(&self.chart, &other.chart) || self.chart == other.chart,
            "mixing elements of different affinoid charts"
        );
    }
}

impl fmt::Display for AffinoidElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            for (name, e) in self.chart.vars.iter().zip(m) {
                match e {
                    0 => {}
                    1 => write!(f, "*{name}")?,
                    _ => write!(f, "*{name}^{e}")?,
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sc(p: u64, n: i64) -> PadicScalar {
        PadicScalar::from_int(p, n, 20)
    }

    #[test]
    fn gauss_valuation_examples() {
        let chart = Chart::univariate(5, 4, 20);
        let f = AffinoidElement::from_coeffs(&chart, &[sc(5, 5), sc(5, 25), sc(5, 1)]).unwrap();
        assert_eq!(f.gauss_valuation(), Valuation::Finite(0));

        let g = AffinoidElement::from_coeffs(&chart, &[sc(5, 5), sc(5, 5)]).unwrap();
        assert_eq!(g.gauss_valuation(), Valuation::Finite(1));
    }

    #[test]
    fn gauss_norm_is_multiplicative_on_example() {
        let p = 3;
        let chart = Chart::univariate(p, 4, 20);
        let f = AffinoidElement::from_coeffs(&chart, &[sc(p, 1), sc(p, 3)]).unwrap();
        let g = AffinoidElement::from_coeffs(&chart, &[sc(p, 1), sc(p, -3)]).unwrap();
        let fg = f.checked_mul(&g, Overflow::Error).unwrap();
        assert_eq!(fg.gauss_valuation(), Valuation::Finite(0));
        assert!(fg.coeff(&vec![1]).is_zero());
        assert!(fg.coeff(&vec![2]).agrees_with(&sc(p, -9)));
    }

    #[test]
    fn degree_overflow_is_an_error_unless_truncating() {
        let chart = Chart::univariate(2, 2, 10);
        let w = AffinoidElement::variable(&chart, "w").unwrap();
        let w2 = w.checked_mul(&w, Overflow::Error).unwrap();
        assert!(matches!(w2.checked_mul(&w, Overflow::Error), Err(Error::DegreeOverflow { degree: 3, bound: 2 })));
        let t = w2.checked_mul(&w, Overflow::Truncate).unwrap();
        assert!(t.is_exact_zero());
    }

    #[test]
    fn units_of_the_tate_algebra() {
        let p = 5;
        let chart = Chart::univariate(p, 3, 10);
        let u = AffinoidElement::from_coeffs(&chart, &[sc(p, 1), sc(p, 5)]).unwrap();
        assert!(u.is_unit());
        assert_eq!(u.try_inverse(), Err(Error::NotExactlyInvertible));
        let not_unit = AffinoidElement::from_coeffs(&chart, &[sc(p, 1), sc(p, 1)]).unwrap();
        assert!(!not_unit.is_unit());
        let c = AffinoidElement::constant(&chart, sc(p, 3));
        assert!(c.try_inverse().unwrap().times(&c).constant_term().agrees_with(&sc(p, 1)));
    }

    #[test]
    fn monomial_enumeration() {
        let chart = Chart::new(3, &["a", "b"], 2, 5);
        let ms = chart.monomials_up_to(2);
        assert_eq!(ms.len(), 6);
        assert_eq!(ms[0], vec![0, 0]);
        assert_eq!(ms[1], vec![1, 0]);
        assert_eq!(ms[2], vec![0, 1]);
        let empty = Chart::new(3, &[], 2, 5);
        assert_eq!(empty.monomials_up_to(3), vec![Vec::<u32>::new()]);
    }
}
