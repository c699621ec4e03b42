//! Riesz decompositions `M = N (+) M'` cut out by zeros and factorizations of
//! the Fredholm series.

use crate::error::{Error, Result};
use crate::fredholm::{berkowitz, resolvant_coefficients, resolvant_unchecked, FredholmSeries, SeriesTail};
use crate::linalg::{basis_of_span, Linear};
use crate::matrix::Matrix;
use crate::newton::{coprimality_certificate, polygon_of_poly, slope_factorization, zero_order, Factorable, SlopeFactorization};
use crate::operators::{lower_valuation, CompactOperator, Rational, ValBound};
use crate::poly::{binomial_scalar, Poly};
use crate::rings::{Coeff, PadicScalar};

/// How the projector was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// `Delta^s` values of the Fredholm resolvant at a zero.
    Resolvant,
    /// The kernel of `Q*(phi)` by elimination.
    LinearAlgebra,
}

#[derive(Clone, Debug)]
pub struct RieszDecomposition<C> {
    /// Idempotent onto `N` along the complement.
    pub projector: Matrix<C>,
    /// Columns spanning `N`.
    pub kernel_basis: Vec<Vec<C>>,
    pub q: Poly<C>,
    pub s: FredholmSeries<C>,
    /// `det(1 - X phi | N)`.
    pub char_on_n: Poly<C>,
    /// `det(1 - X phi | complement)`, from the window.
    pub char_on_complement: Poly<C>,
    pub route: Route,
    /// Digits lost between the operator and the projector.
    pub slack: i64,
}

impl<C: Coeff> RieszDecomposition<C> {
    pub fn rank(&self) -> usize {
        self.kernel_basis.len()
    }

    pub fn basis_matrix(&self) -> Matrix<C> {
        Matrix::from_columns(&self.kernel_basis, self.projector.rows(), self.projector.zero_elem())
    }

    /// Idempotent onto the complement.
    pub fn complement_projector(&self) -> Matrix<C> {
        Matrix::identity(self.projector.rows(), self.projector.zero_elem()).sub(&self.projector)
    }
}

/// `X^deg Q * Q(1/X)`.
pub fn q_star<C: Coeff>(q: &Poly<C>) -> Poly<C> {
    let q = q.trimmed();
    if q.is_empty() {
        return q;
    }
    q.reversed(q.len() - 1)
}

fn digits_of<C: Coeff>(m: &Matrix<C>) -> Option<u32> {
    m.entries().filter_map(|x| x.digits()).min()
}

fn slack_between<C: Coeff>(before: &Matrix<C>, after: &Matrix<C>) -> i64 {
    match (digits_of(before), digits_of(after)) {
        (Some(a), Some(b)) => (a as i64 - b as i64).max(0),
        _ => 0,
    }
}

/// Matrix of `op` on the span of `basis`, or `None` when the span is not
/// stable.
pub fn restrict<C: Linear>(op: &Matrix<C>, basis: &[Vec<C>]) -> Result<Option<Matrix<C>>> {
    let like = op.zero_elem();
    if basis.is_empty() {
        return Ok(Some(Matrix::zeros(0, 0, like)));
    }
    let b = Matrix::from_columns(basis, op.rows(), like);
    let mut cols = Vec::with_capacity(basis.len());
    for v in basis {
        match C::solve(&b, &op.mul_vec(v))? {
            Some(x) => cols.push(x),
            None => return Ok(None),
        }
    }
    Ok(Some(Matrix::from_columns(&cols, basis.len(), like)))
}

fn char_poly<C: Coeff>(m: &Matrix<C>, like: &C) -> Poly<C> {
    if m.rows() == 0 {
        return Poly::one(like);
    }
    Poly::new(berkowitz(m), like)
}

/// Columns spanning the kernel of `psi`; `RankMismatch` when its rank is not
/// `expected_rank`.
pub fn kernel_basis<C: Linear>(psi: &Matrix<C>, expected_rank: usize) -> Result<Vec<Vec<C>>> {
    let ker = C::kernel(psi)?;
    if ker.len() != expected_rank {
        return Err(Error::RankMismatch { expected: expected_rank, found: ker.len() });
    }
    Ok(ker)
}

/// `sum_m C(m, s) v_m a^(m-s)`, the value of `Delta^s` of the resolvant.
fn resolvant_delta<C: Coeff>(vs: &[Matrix<C>], s: usize, a: &C) -> Matrix<C> {
    let like = vs[0].zero_elem().clone();
    let n = vs[0].rows();
    let p = like.prime();
    let rel = like.working_rel();
    let mut acc = Matrix::zeros(n, n, &like);
    let mut pw = like.one_like();
    for (m, v) in vs.iter().enumerate().skip(s) {
        let coef = pw.scale(&binomial_scalar(p, m as u64, s as u64, rel));
        acc = acc.add(&v.scale(&coef));
        pw = pw.times(a);
    }
    acc
}

/// `F / Q` as a power series through the degree cap of `F`.
fn series_quotient<C: Coeff>(f: &FredholmSeries<C>, q: &Poly<C>) -> Result<FredholmSeries<C>> {
    let d = f.degree_cap();
    let mut s: Vec<C> = Vec::with_capacity(d + 1);
    for n in 0..=d {
        let mut c = f.poly().coeff(n);
        for i in 1..=n.min(q.len().saturating_sub(1)) {
            c = c.minus(&q.coeff(i).times(&s[n - i]));
        }
        s.push(c);
    }
    let tail = if matches!(f.tail(), SeriesTail::Exact) && s.iter().skip(q.len()).all(|c| c.is_zero()) {
        SeriesTail::Exact
    } else {
        SeriesTail::Absent
    };
    FredholmSeries::new(s, tail)
}

/// Idempotence and commutation with `phi`, compared within the chart since
/// products leave it.
pub fn projector_laws<C: Coeff>(p: &Matrix<C>, phi: &Matrix<C>) -> (bool, bool) {
    let fit = |m: Matrix<C>| m.map(|x| x.fit());
    (fit(p.mul(p)).agrees_with(p), fit(p.mul(phi)).agrees_with(&fit(phi.mul(p))))
}

fn check_projector<C: Coeff>(p: &Matrix<C>, phi: &Matrix<C>) -> Result<()> {
    let (idempotent, commutes) = projector_laws(p, phi);
    if !idempotent {
        return Err(Error::PrecisionExhausted("projector is not idempotent at precision".into()));
    }
    if !commutes {
        return Err(Error::PrecisionExhausted("projector does not commute with phi at precision".into()));
    }
    Ok(())
}

/// Core of the zero route on a bare matrix whose series is `f`.
fn projector_from_zero<C: Linear>(phi: &Matrix<C>, vs: &[Matrix<C>], f: &FredholmSeries<C>, a: &C, k: usize) -> Result<(Matrix<C>, Vec<Vec<C>>)> {
    let like = phi.zero_elem().clone();
    let n = phi.rows();
    let c = delta_at(f, k, a)?;
    let fk = resolvant_delta(vs, k, a);
    let id = Matrix::identity(n, &like);
    let e_big = id.sub(&phi.scale(a)).mul(&fk);
    let ek = e_big.pow(k as u32);
    let ck = (0..k).fold(like.one_like(), |acc, _| acc.times(&c));
    // N is the image of c^k - E^k; dividing by c^k makes it idempotent
    let span = id.scale(&ck).sub(&ek);
    let inv = ck.inverse_to_precision()?;
    let projector = span.scale(&inv).map(|x| x.fit());
    let cols: Vec<Vec<C>> = (0..n).map(|j| span.column(j)).filter(|v| v.iter().any(|x| !x.is_zero())).collect();
    let basis = if cols.is_empty() { Vec::new() } else { basis_of_span(&cols, n, &like)? };
    Ok((projector, basis))
}

fn delta_at<C: Coeff>(f: &FredholmSeries<C>, k: usize, a: &C) -> Result<C> {
    let c = f.poly().delta(k).eval(a);
    if !c.is_unit() {
        return Err(Error::PrecisionExhausted(format!("Delta^{k} F(a) = {c} is not a unit at precision")));
    }
    Ok(c)
}

/// Decomposition attached to a zero `a` of order `k` of `F`: `N` is where
/// `(1 - a phi)^k` vanishes.
pub fn riesz_from_zero<C: Factorable>(phi: &CompactOperator<C>, f: &FredholmSeries<C>, a: &PadicScalar, k: usize) -> Result<RieszDecomposition<C>> {
    let like = phi.matrix().zero_elem().clone();
    let a_c = like.scalar_like(*a);
    let order = zero_order(f, &a_c)?;
    if order != k {
        return Err(Error::OrderMismatch { expected: k, found: order });
    }
    let vs = resolvant_coefficients(phi, f, f.degree_cap())?;
    let (projector, basis) = projector_from_zero(phi.matrix(), &vs, f, &a_c, k)?;
    if basis.len() != k {
        return Err(Error::RankMismatch { expected: k, found: basis.len() });
    }
    check_projector(&projector, phi.matrix())?;
    let a_inv = like.scalar_like(a.invert()?);
    let q = Poly::one_minus(&a_inv).pow(k as u32);
    finish(phi.matrix(), f, q, projector, basis, Route::Resolvant)
}

fn finish<C: Linear>(
    phi: &Matrix<C>,
    f: &FredholmSeries<C>,
    q: Poly<C>,
    projector: Matrix<C>,
    basis: Vec<Vec<C>>,
    route: Route,
) -> Result<RieszDecomposition<C>> {
    let like = phi.zero_elem().clone();
    let restricted = restrict(phi, &basis)?.ok_or_else(|| Error::PrecisionExhausted("N is not phi-stable at precision".into()))?;
    let char_on_n = char_poly(&restricted, &like);
    let n = phi.rows();
    let id = Matrix::identity(n, &like);
    let comp = id.sub(&projector);
    let comp_cols: Vec<Vec<C>> = (0..n).map(|j| comp.column(j)).filter(|v| v.iter().any(|x| !x.is_zero())).collect();
    let comp_basis = if comp_cols.is_empty() { Vec::new() } else { basis_of_span(&comp_cols, n, &like)? };
    let char_on_complement = match restrict(phi, &comp_basis)? {
        Some(m) => char_poly(&m, &like),
        None => return Err(Error::PrecisionExhausted("complement is not phi-stable at precision".into())),
    };
    let s = series_quotient(f, &q)?;
    let slack = slack_between(phi, &projector);
    Ok(RieszDecomposition { projector, kernel_basis: basis, q, s, char_on_n, char_on_complement, route, slack })
}

/// Mutual containment of two column spans.
pub fn same_span<C: Linear>(a: &[Vec<C>], b: &[Vec<C>], like: &C) -> Result<bool> {
    for v in a {
        if !C::in_span(b, v, like)? {
            return Ok(false);
        }
    }
    for v in b {
        if !C::in_span(a, v, like)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Decomposition attached to a slope factorization `F = Q S`, computed by
/// both routes and cross-checked.
pub fn riesz_from_factorization<C: Factorable>(
    phi: &CompactOperator<C>,
    f: &FredholmSeries<C>,
    fact: &SlopeFactorization<C>,
) -> Result<RieszDecomposition<C>> {
    if !fact.round_trip(f) {
        return Err(Error::InvalidInput("factorization does not reproduce the series".into()));
    }
    let m = phi.matrix();
    let like = m.zero_elem().clone();
    let n = m.rows();
    let deg = fact.degree();
    let q = fact.q.clone();
    let qs = q_star(&q);
    let qs_phi = qs.eval_matrix(m).map(|x| x.fit());

    // linear algebra route
    let ker = kernel_basis(&qs_phi, deg)?;

    // resolvant route on v = 1 - Q*(phi)/Q*(0), at the zero a = 1
    let lead_inv = qs.coeff(0).inverse_to_precision()?;
    let id = Matrix::identity(n, &like);
    let v = id.sub(&qs_phi.scale(&lead_inv)).map(|x| x.fit());
    let fv = FredholmSeries::new(berkowitz(&v), SeriesTail::Exact)?;
    let one = like.one_like();
    let (projector, res_basis) = if deg == 0 {
        (Matrix::zeros(n, n, &like), Vec::new())
    } else {
        let k = zero_order(&fv, &one)?;
        if k != deg {
            return Err(Error::RankMismatch { expected: deg, found: k });
        }
        let vs = resolvant_unchecked(&v, &fv, fv.degree_cap())?;
        projector_from_zero(&v, &vs, &fv, &one, k)?
    };
    if res_basis.len() != deg {
        return Err(Error::RankMismatch { expected: deg, found: res_basis.len() });
    }
    if !same_span(&ker, &res_basis, &like)? {
        let gap = res_basis
            .iter()
            .map(|col| qs_phi.mul_vec(col).iter().map(lower_valuation).min().unwrap_or(ValBound::Infinite))
            .min()
            .unwrap_or(ValBound::Infinite);
        return Err(Error::RouteDisagreement { valuation: format!("{gap}") });
    }
    check_projector(&projector, m)?;
    let mut out = finish(m, f, q, projector, ker, Route::LinearAlgebra)?;
    out.s = fact.s.clone();
    if !out.char_on_n.agrees_with(&out.q) {
        return Err(Error::PrecisionExhausted(format!("char of phi on N is {} rather than {}", out.char_on_n, out.q)));
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct SlopeDecomposition<C> {
    pub h: Rational,
    pub factorization: SlopeFactorization<C>,
    pub riesz: RieszDecomposition<C>,
    /// Slopes of `Q` with multiplicity.
    pub slopes: Vec<Rational>,
}

impl<C: Coeff> SlopeDecomposition<C> {
    /// Idempotent onto `M_{>h}`.
    pub fn complement_projector(&self) -> Matrix<C> {
        self.riesz.complement_projector()
    }
}

/// The slope `<= h` part of `phi` and its complement.
pub fn slope_decomposition<C: Factorable>(phi: &CompactOperator<C>, f: &FredholmSeries<C>, h: Rational) -> Result<SlopeDecomposition<C>> {
    let factorization = slope_factorization(f, h)?;
    let riesz = riesz_from_factorization(phi, f, &factorization)?;
    let slopes = polygon_of_poly(&factorization.q)?.slope_multiset();
    if let Some(s) = slopes.iter().find(|s| **s > h) {
        return Err(Error::PrecisionExhausted(format!("Q has slope {s} above h")));
    }
    Ok(SlopeDecomposition { h, factorization, riesz, slopes })
}

/// The idempotent `f P` of `A[X]/(Q2)` for the factor `Q1`, acting on
/// `Ker Q2*(phi)`.
#[derive(Clone, Debug)]
pub struct Refinement<C> {
    /// Basis of `Ker Q2*(phi)`.
    pub outer: Vec<Vec<C>>,
    /// Basis of `Ker Q1*(phi)`.
    pub inner: Vec<Vec<C>>,
    /// `f(phi^-1) P(phi^-1)` in the coordinates of `outer`.
    pub idempotent: Matrix<C>,
    /// The quotient `Q2 / Q1`.
    pub cofactor: Poly<C>,
    /// Columns of `outer` pushed through the idempotent.
    pub image: Vec<Vec<C>>,
}

fn inverse_generic<C: Linear>(m: &Matrix<C>) -> Result<Matrix<C>> {
    let n = m.rows();
    let like = m.zero_elem();
    let id = Matrix::identity(n, like);
    let mut cols = Vec::with_capacity(n);
    for j in 0..n {
        cols.push(C::solve(m, &id.column(j))?.ok_or(Error::NotExactlyInvertible)?);
    }
    Ok(Matrix::from_columns(&cols, n, like))
}

/// Recovers `Ker Q1*(phi)` inside `Ker Q2*(phi)` when `Q1 | Q2`.
pub fn refine_factorization<C: Factorable>(phi: &Matrix<C>, q1: &Poly<C>, q2: &Poly<C>) -> Result<Refinement<C>> {
    let like = phi.zero_elem().clone();
    let n = phi.rows();
    let q1 = q1.trimmed();
    let q2 = q2.trimmed();
    let d1 = q1.len() - 1;
    let d2 = q2.len() - 1;
    if d1 > d2 {
        return Err(Error::NotDivisible(format!("{q1} has larger degree than {q2}")));
    }
    let (cofactor, rem) = q2.div_rem(&q1)?;
    if !rem.is_zero() {
        return Err(Error::NotDivisible(format!("{q1} does not divide {q2}")));
    }
    let outer = kernel_basis(&q_star(&q2).eval_matrix(phi), d2)?;
    let inner = kernel_basis(&q_star(&q1).eval_matrix(phi), d1)?;
    let r = outer.len();
    let idempotent = if d1 == 0 {
        Matrix::zeros(r, r, &like)
    } else if d1 == d2 {
        Matrix::identity(r, &like)
    } else {
        let cert = coprimality_certificate(&cofactor, &q1, d1 + d2)?;
        let e = cert.u.times(&cofactor);
        let restricted = restrict(phi, &outer)?.ok_or_else(|| Error::PrecisionExhausted("Ker Q2*(phi) is not stable".into()))?;
        let x = inverse_generic(&restricted)?;
        e.eval_matrix(&x).map(|c| c.fit())
    };
    let image: Vec<Vec<C>> = if r == 0 {
        Vec::new()
    } else {
        let b = Matrix::from_columns(&outer, n, &like);
        let pushed = b.mul(&idempotent);
        (0..r).map(|j| pushed.column(j)).collect()
    };
    let nonzero: Vec<Vec<C>> = image.iter().filter(|v| v.iter().any(|x| !x.is_zero())).cloned().collect();
    if !same_span(&nonzero, &inner, &like)? {
        return Err(Error::RouteDisagreement { valuation: "idempotent image differs from Ker Q1*(phi)".into() });
    }
    Ok(Refinement { outer, inner, idempotent, cofactor, image })
}
