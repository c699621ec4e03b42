//! Characteristic power series `det(1 - X phi)` of compact operators.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::operators::{lower_valuation, ColumnBounds, Compactness, CompactOperator, ValBound};
use crate::poly::Poly;
use crate::rings::{Coeff, RingHom};

/// What is known about the coefficients past the degree cap.
#[derive(Clone, Debug, PartialEq)]
pub enum SeriesTail {
    /// The series is a polynomial: all further coefficients vanish.
    Exact,
    /// `v(c_n)` is bounded below by the sum of the `n` smallest column
    /// valuation bounds.
    Columns(ColumnBounds),
    Absent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Operator(u64),
    User,
}

/// A Fredholm series `1 + c_1 X + ... + c_d X^d + (tail)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FredholmSeries<C> {
    coeffs: Poly<C>,
    tail: SeriesTail,
    provenance: Provenance,
}

impl<C: Coeff> FredholmSeries<C> {
    /// A series given by its coefficients `c_0 .. c_d`; `c_0` must be 1.
    pub fn new(coeffs: Vec<C>, tail: SeriesTail) -> Result<Self> {
        let first = coeffs.first().ok_or_else(|| Error::InvalidInput("empty series".into()))?;
        if !first.agrees_with(&first.one_like()) {
            return Err(Error::InvalidInput(format!("constant term {first} is not 1")));
        }
        let like = first.clone();
        let mut coeffs = coeffs;
        coeffs[0] = like.one_like();
        Ok(FredholmSeries { coeffs: Poly::new(coeffs, &like), tail, provenance: Provenance::User })
    }

    /// The polynomial itself, with an exact tail.
    pub fn from_poly(p: &Poly<C>) -> Result<Self> {
        Self::new(p.coeffs().to_vec(), SeriesTail::Exact)
    }

    pub fn poly(&self) -> &Poly<C> {
        &self.coeffs
    }

    pub fn coeffs(&self) -> &[C] {
        self.coeffs.coeffs()
    }

    /// Largest tracked degree.
    pub fn degree_cap(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn tail(&self) -> &SeriesTail {
        &self.tail
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Coefficient `c_n`; past the cap it is zero for exact tails, otherwise
    /// a zero known only to the tail bound.
    pub fn coeff(&self, n: usize) -> Result<C> {
        if n <= self.degree_cap() {
            return Ok(self.coeffs.coeff(n));
        }
        let zero = self.coeffs.zero_elem();
        match &self.tail {
            SeriesTail::Exact => Ok(zero.clone()),
            SeriesTail::Columns(cb) => match cb.coefficient_bound(n).ceil() {
                Some(cap) => Ok(zero.cap_abs(cap)),
                None => Ok(zero.clone()),
            },
            SeriesTail::Absent => Err(Error::PrecisionExhausted(format!("coefficient {n} lies past the cap and no tail bound is known"))),
        }
    }

    /// A guaranteed lower bound for `v(c_n)`, if one is known.
    pub fn valuation_bound(&self, n: usize) -> Option<ValBound> {
        if n <= self.degree_cap() {
            return Some(lower_valuation(&self.coeffs.coeff(n)));
        }
        match &self.tail {
            SeriesTail::Exact => Some(ValBound::Infinite),
            SeriesTail::Columns(cb) => Some(cb.coefficient_bound(n)),
            SeriesTail::Absent => None,
        }
    }

    /// Same series with the degree cap lowered to `d` (the dropped
    /// coefficients are only remembered through the tail).
    pub fn truncated(&self, d: usize) -> Self {
        if d >= self.degree_cap() {
            return self.clone();
        }
        let tail = match &self.tail {
            SeriesTail::Exact if self.coeffs.coeffs()[d + 1..].iter().all(|c| c.is_exact_zero()) => SeriesTail::Exact,
            SeriesTail::Exact => SeriesTail::Absent,
            t => t.clone(),
        };
        FredholmSeries { coeffs: self.coeffs.truncated(d + 1), tail, provenance: self.provenance }
    }

    /// Coefficientwise image under `h`.
    pub fn base_change(&self, h: &RingHom) -> Result<Self> {
        Ok(FredholmSeries { coeffs: self.coeffs.apply_hom(h)?, tail: self.tail.clone(), provenance: self.provenance })
    }

    pub fn agrees_with(&self, other: &Self) -> bool {
        self.coeffs.agrees_with(&other.coeffs)
    }
}

/// Coefficients `a_0 = 1, a_1, .., a_n` of `det(t - m) = sum a_k t^(n-k)`,
/// which are also the coefficients of `det(1 - X m)`. Division free.
pub fn berkowitz<C: Coeff>(m: &Matrix<C>) -> Vec<C> {
    assert!(m.is_square());
    let n = m.rows();
    let zero = m.zero_elem().clone();
    if n == 0 {
        return vec![zero.one_like()];
    }
    let a = m[(0, 0)].clone();
    if n == 1 {
        return vec![zero.one_like(), a.negated()];
    }
    let idx: Vec<usize> = (1..n).collect();
    let sub = m.submatrix(&idx, &idx);
    let row: Vec<C> = idx.iter().map(|&j| m[(0, j)].clone()).collect();
    let mut col: Vec<C> = idx.iter().map(|&i| m[(i, 0)].clone()).collect();
    let mut diags = vec![zero.one_like(), a.negated()];
    for _ in 0..n - 1 {
        let rc = row.iter().zip(&col).fold(zero.clone(), |acc, (r, c)| acc.plus(&r.times(c)));
        diags.push(rc.negated());
        col = sub.mul_vec(&col);
    }
    let inner = berkowitz(&sub);
    (0..=n)
        .map(|i| {
            (0..n).filter(|&j| j <= i).fold(zero.clone(), |acc, j| acc.plus(&diags[i - j].times(&inner[j])))
        })
        .collect()
}

/// `det(1 - X phi)` through degree `d`. The window is exact for
/// `phi o pi_{<M}`; the difference to `phi` is charged to each coefficient as
/// a lowered absolute precision.
pub fn char_series<C: Coeff>(phi: &CompactOperator<C>, d: usize) -> Result<FredholmSeries<C>> {
    match phi.verify_compactness() {
        Compactness::Certified { .. } => {}
        other => return Err(Error::CompactnessUnverified(format!("{other:?}"))),
    }
    if d == 0 {
        return Err(Error::InvalidInput("degree cap must be at least 1".into()));
    }
    let window = berkowitz(phi.matrix());
    let zero = phi.matrix().zero_elem().clone();
    let bounds = phi.column_bounds();
    let mut coeffs = Vec::with_capacity(d + 1);
    coeffs.push(zero.one_like());
    for n in 1..=d {
        let mut c = window.get(n).cloned().unwrap_or_else(|| zero.clone());
        let err = bounds.truncation_error(n);
        if let Some(cap) = err.ceil() {
            if n <= phi.size() && err <= bounds.coefficient_bound(n) {
                return Err(Error::PrecisionExhausted(format!(
                    "window error for c_{n} is no smaller than its a priori bound {}",
                    bounds.coefficient_bound(n)
                )));
            }
            c = c.cap_abs(cap);
        }
        // a zero known only to low precision still obeys |c_n| <= r_1 ... r_n
        if let Some(b) = bounds.coefficient_bound(n).ceil() {
            if c.is_zero() && lower_valuation(&c) < ValBound::int(b) {
                c = zero.cap_abs(b);
            }
        }
        coeffs.push(c);
    }
    let tail = if phi.is_finite() && d >= phi.size() { SeriesTail::Exact } else { SeriesTail::Columns(bounds) };
    Ok(FredholmSeries { coeffs: Poly::new(coeffs, &zero), tail, provenance: Provenance::Operator(phi.fingerprint()) })
}

fn for_each_subset(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

/// Leibniz expansion of the minor on rows and columns `s`.
fn leibniz<C: Coeff>(m: &Matrix<C>, s: &[usize]) -> C {
    fn rec<C: Coeff>(m: &Matrix<C>, s: &[usize], row: usize, used: &mut Vec<bool>, sign: bool, acc: C, out: &mut C) {
        if row == s.len() {
            *out = if sign { out.minus(&acc) } else { out.plus(&acc) };
            return;
        }
        for k in 0..s.len() {
            if used[k] {
                continue;
            }
            // inversions contributed by choosing column k at this row
            let inv = used[k + 1..].iter().filter(|&&u| u).count();
            used[k] = true;
            let term = acc.times(&m[(s[row], s[k])]);
            if !term.is_exact_zero() {
                rec(m, s, row + 1, used, sign ^ (inv % 2 == 1), term, out);
            }
            used[k] = false;
        }
    }
    let zero = m.zero_elem().clone();
    let mut out = zero.clone();
    rec(m, s, 0, &mut vec![false; s.len()], false, zero.one_like(), &mut out);
    out
}

/// Definitional expansion `c_n = (-1)^n sum_{|S| = n} det(phi_S)`; a test
/// oracle limited to small sizes.
pub fn char_series_subset_oracle<C: Coeff>(phi: &CompactOperator<C>, n_max: usize) -> Result<FredholmSeries<C>> {
    if n_max > 8 || phi.size() > 12 {
        return Err(Error::SizeLimit(format!("n_max = {n_max}, size = {} (limits 8 and 12)", phi.size())));
    }
    let m = phi.matrix();
    let zero = m.zero_elem().clone();
    let mut coeffs = vec![zero.one_like()];
    for n in 1..=n_max {
        let mut sum = zero.clone();
        for_each_subset(phi.size(), n, &mut |s| sum = sum.plus(&leibniz(m, s)));
        coeffs.push(if n % 2 == 1 { sum.negated() } else { sum });
    }
    let tail = if phi.is_finite() && n_max >= phi.size() { SeriesTail::Exact } else { SeriesTail::Columns(phi.column_bounds()) };
    Ok(FredholmSeries { coeffs: Poly::new(coeffs, &zero), tail, provenance: Provenance::Operator(phi.fingerprint()) })
}

/// Coefficients `v_0 .. v_{m_max}` of the resolvant `F(X) / (1 - X phi)`:
/// `v_0 = 1`, `v_m = phi v_{m-1} + c_m`.
pub fn resolvant_coefficients<C: Coeff>(phi: &CompactOperator<C>, f: &FredholmSeries<C>, m_max: usize) -> Result<Vec<Matrix<C>>> {
    if f.provenance() != Provenance::Operator(phi.fingerprint()) {
        return Err(Error::SeriesMismatch);
    }
    resolvant_unchecked(phi.matrix(), f, m_max)
}

pub(crate) fn resolvant_unchecked<C: Coeff>(phi: &Matrix<C>, f: &FredholmSeries<C>, m_max: usize) -> Result<Vec<Matrix<C>>> {
    let n = phi.rows();
    let zero = phi.zero_elem().clone();
    let mut out = vec![Matrix::identity(n, &zero)];
    for m in 1..=m_max {
        let c = f.coeff(m)?;
        let mut v = phi.mul(&out[m - 1]);
        for i in 0..n {
            v[(i, i)] = v[(i, i)].plus(&c);
        }
        out.push(v);
    }
    Ok(out)
}

/// Coefficientwise image of a series under a ring map.
pub fn base_change_series<C: Coeff>(f: &FredholmSeries<C>, h: &RingHom) -> Result<FredholmSeries<C>> {
    f.base_change(h)
}

/// Checks `v(c_n) >= ` the column product bound for every tracked `n`;
/// returns the first violating index.
pub fn tail_bound_violation<C: Coeff>(f: &FredholmSeries<C>, bounds: &ColumnBounds) -> Option<usize> {
    (1..=f.degree_cap()).find(|&n| lower_valuation(&f.coeffs()[n]) < bounds.coefficient_bound(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::int_matrix;
    use crate::operators::DecayProfile;
    use crate::poly::int_poly;
    use crate::rings::{AffinoidElement, Chart, PadicScalar};

    fn fin(p: u64, rows: &[&[i64]]) -> CompactOperator<PadicScalar> {
        CompactOperator::finite(int_matrix(p, 20, rows)).unwrap()
    }

    #[test]
    fn unipotent_example_over_a_chart() {
        let chart = Chart::new(5, &["T1", "T2"], 2, 20);
        let one = AffinoidElement::from_int(&chart, 1);
        let zero = AffinoidElement::zero(&chart);
        let t1 = AffinoidElement::variable(&chart, "T1").unwrap();
        let phi = CompactOperator::finite(Matrix::from_rows(vec![vec![one.clone(), t1], vec![zero.clone(), one.clone()]], &zero)).unwrap();
        let f = char_series(&phi, 4).unwrap();
        let expected = [1, -2, 1, 0, 0];
        for (c, e) in f.coeffs().iter().zip(expected) {
            assert!(c.agrees_with(&AffinoidElement::from_int(&chart, e)));
        }
    }

    #[test]
    fn small_examples() {
        let f = char_series(&fin(3, &[&[0, 0], &[0, 0]]), 3).unwrap();
        assert!(f.poly().agrees_with(&int_poly(3, 20, &[1])));
        let (a, b) = (4, 9);
        let o = char_series_subset_oracle(&fin(3, &[&[a, 0], &[0, b]]), 2).unwrap();
        assert!(o.poly().agrees_with(&int_poly(3, 20, &[1, -(a + b), a * b])));
        let n = char_series_subset_oracle(&fin(3, &[&[0, 1], &[0, 0]]), 2).unwrap();
        assert!(n.poly().agrees_with(&int_poly(3, 20, &[1])));
        assert!(char_series_subset_oracle(&fin(3, &[&[1]]), 9).is_err());
    }

    #[test]
    fn diagonal_window_with_tail() {
        let p = 2;
        let like = PadicScalar::zero(p);
        let entries: Vec<PadicScalar> = (0..8).map(|j| PadicScalar::from_int(p, 1 << j, 20)).collect();
        let phi = CompactOperator::new(Matrix::diagonal(&entries, &like), DecayProfile::geometric(0, 1)).unwrap();
        let f = char_series(&phi, 8).unwrap();
        // c_1 = -(2^8 - 1) is only known modulo 2^8, where it is 1
        assert!(f.coeffs()[1].agrees_with(&PadicScalar::from_int(p, 1, 20)));
        assert_eq!(f.coeffs()[1].abs_precision(), Some(8));
        assert_eq!(tail_bound_violation(&f, &phi.column_bounds()), None);
    }

    #[test]
    fn resolvant_examples() {
        let p = 7;
        let phi = fin(p, &[&[3]]);
        let f = char_series(&phi, 1).unwrap();
        let v = resolvant_coefficients(&phi, &f, 3).unwrap();
        assert!(v[1].is_zero() && v[2].is_zero());

        let phi = fin(p, &[&[1, 0], &[0, 7]]);
        let f = char_series(&phi, 2).unwrap();
        let v = resolvant_coefficients(&phi, &f, 3).unwrap();
        assert!(v[1].agrees_with(&int_matrix(p, 20, &[&[-7, 0], &[0, -1]])));
        assert!(v[2].is_zero());

        let other = fin(p, &[&[2, 0], &[0, 7]]);
        assert_eq!(resolvant_coefficients(&other, &f, 2), Err(Error::SeriesMismatch));
    }

    #[test]
    fn base_change_of_series() {
        let chart = Chart::new(3, &["T1"], 2, 10);
        let t1 = AffinoidElement::variable(&chart, "T1").unwrap();
        let f = FredholmSeries::new(vec![AffinoidElement::from_int(&chart, 1), t1], SeriesTail::Exact).unwrap();
        let g = f.base_change(&RingHom::specialize("T1", PadicScalar::from_int(3, 3, 10))).unwrap();
        assert!(g.coeffs()[1].agrees_with(&AffinoidElement::from_int(&chart, 3)));
        assert!(f.base_change(&RingHom::Identity).unwrap().agrees_with(&f));
    }
}
