//! Newton polygons, the `Delta` calculus, zero orders, slope factorizations
//! and Bezout certificates.

use std::fmt;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::fredholm::{berkowitz, FredholmSeries, SeriesTail};
use crate::linalg::{solve_scalar, Linear};
use crate::matrix::Matrix;
use crate::operators::{fraction_string, lower_valuation, ColumnBounds, Rational, ValBound};
use crate::poly::Poly;
use crate::rings::{AffinoidElement, Coeff, Monomial, PadicScalar, RingHom};

/// How far a scan over tail bounds may run before giving up.
const TAIL_SCAN_LIMIT: usize = 100_000;

/// What is known past the last certified vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Terminal {
    /// The series is a polynomial ending at the last vertex.
    Finite,
    /// More slopes may follow; each is at least the given bound (`None`:
    /// nothing is known).
    Open { next_slope_at_least: Option<Rational> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NewtonPolygon {
    pub vertices: Vec<(usize, Rational)>,
    pub terminal: Terminal,
}

impl NewtonPolygon {
    /// `(slope, horizontal length)` of each certified segment.
    pub fn slopes(&self) -> Vec<(Rational, usize)> {
        self.vertices
            .windows(2)
            .map(|w| ((w[1].1 - w[0].1) / Rational::from_integer((w[1].0 - w[0].0) as i64), w[1].0 - w[0].0))
            .collect()
    }

    /// Slopes with multiplicity.
    pub fn slope_multiset(&self) -> Vec<Rational> {
        self.slopes().into_iter().flat_map(|(s, l)| std::iter::repeat(s).take(l)).collect()
    }

    /// Abscissa of the vertex separating slopes `<= h` from slopes `> h`.
    pub fn break_at(&self, h: Rational) -> Result<usize> {
        let slopes = self.slopes();
        let i = slopes.iter().take_while(|(s, _)| *s <= h).count();
        let n0 = self.vertices[i].0;
        if i < slopes.len() {
            return Ok(n0);
        }
        match &self.terminal {
            Terminal::Finite => Ok(n0),
            Terminal::Open { next_slope_at_least: Some(b) } if *b > h => Ok(n0),
            Terminal::Open { next_slope_at_least } => Err(Error::TailUncertain(format!(
                "polygon certified through x = {n0}; next slope only known to be >= {}",
                next_slope_at_least.map_or("-inf".to_string(), |b| fraction_string(&b))
            ))),
        }
    }

    pub fn last_vertex(&self) -> (usize, Rational) {
        *self.vertices.last().expect("polygon has the origin")
    }
}

impl fmt::Display for NewtonPolygon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vs: Vec<String> = self.vertices.iter().map(|(x, y)| format!("({x}, {})", fraction_string(y))).collect();
        write!(f, "{}", vs.join(" "))?;
        match &self.terminal {
            Terminal::Finite => Ok(()),
            Terminal::Open { next_slope_at_least: Some(b) } => write!(f, " then slopes >= {}", fraction_string(b)),
            Terminal::Open { next_slope_at_least: None } => f.write_str(" then unknown"),
        }
    }
}

fn slope_between(a: (usize, Rational), b: (usize, Rational)) -> Rational {
    (b.1 - a.1) / Rational::from_integer(b.0 as i64 - a.0 as i64)
}

fn lower_hull(points: &[(usize, Rational)]) -> Vec<(usize, Rational)> {
    let mut hull: Vec<(usize, Rational)> = Vec::new();
    for &pt in points {
        while hull.len() >= 2 && slope_between(hull[hull.len() - 2], hull[hull.len() - 1]) >= slope_between(hull[hull.len() - 1], pt) {
            hull.pop();
        }
        hull.push(pt);
    }
    hull
}

enum TailInfo<'a> {
    None,
    Bounds(&'a ColumnBounds),
    Unknown,
}

struct Cloud<'a> {
    known: Vec<(usize, Rational)>,
    uncertain: Vec<(usize, Rational)>,
    cap: usize,
    tail: TailInfo<'a>,
}

impl Cloud<'_> {
    fn tail_at(&self, n: usize) -> ValBound {
        match self.tail {
            TailInfo::Bounds(cb) => cb.coefficient_bound(n),
            _ => ValBound::Infinite,
        }
    }

    /// True when every tail point lies strictly above the line through
    /// `(x0, y0)` with slope `s`.
    fn tail_above(&self, x0: usize, y0: Rational, s: Rational) -> bool {
        match self.tail {
            TailInfo::None => true,
            TailInfo::Unknown => false,
            TailInfo::Bounds(_) => {
                for n in self.cap + 1..self.cap + TAIL_SCAN_LIMIT {
                    let ValBound::Finite(t) = self.tail_at(n) else { return true };
                    if t <= y0 + s * Rational::from_integer((n - x0) as i64) {
                        return false;
                    }
                    match self.tail_at(n + 1) {
                        ValBound::Infinite => return true,
                        ValBound::Finite(t1) if t1 - t >= s => return true,
                        _ => {}
                    }
                }
                false
            }
        }
    }

    /// Smallest slope from `(x0, y0)` to any point to its right.
    fn min_slope_after(&self, x0: usize, y0: Rational) -> Option<Rational> {
        let mut best: Option<Rational> = None;
        fn consider(best: &mut Option<Rational>, s: Rational) {
            *best = Some(best.map_or(s, |b| b.min(s)));
        }
        for &(n, y) in self.known.iter().chain(&self.uncertain) {
            if n > x0 {
                consider(&mut best, slope_between((x0, y0), (n, y)));
            }
        }
        match self.tail {
            TailInfo::None => {}
            TailInfo::Unknown => return None,
            TailInfo::Bounds(_) => {
                for n in self.cap + 1..self.cap + TAIL_SCAN_LIMIT {
                    let ValBound::Finite(t) = self.tail_at(n) else { break };
                    let s = slope_between((x0, y0), (n, t));
                    consider(&mut best, s);
                    let b = best.expect("just set");
                    match self.tail_at(n + 1) {
                        ValBound::Infinite => break,
                        ValBound::Finite(t1) if t1 - t >= b => break,
                        _ => {}
                    }
                }
            }
        }
        best
    }
}

/// Value at `x` of the piecewise linear function through `vs`.
fn hull_value(vs: &[(usize, Rational)], x: usize) -> Rational {
    for w in vs.windows(2) {
        if x >= w[0].0 && x <= w[1].0 {
            return w[0].1 + slope_between(w[0], w[1]) * Rational::from_integer((x - w[0].0) as i64);
        }
    }
    vs.last().map_or(Rational::zero(), |v| v.1)
}

/// The lower convex hull of `(n, v(c_n))`, reported only as far as the
/// coefficient precision and the tail bound certify it.
pub fn newton_polygon<C: Coeff>(f: &FredholmSeries<C>) -> NewtonPolygon {
    let mut known = Vec::new();
    let mut uncertain = Vec::new();
    for (n, c) in f.coeffs().iter().enumerate() {
        if !c.is_zero() {
            if let Some(v) = c.valuation().finite() {
                known.push((n, Rational::from_integer(v)));
            }
        } else if let ValBound::Finite(b) = lower_valuation(c) {
            uncertain.push((n, b));
        }
    }
    let tail = match f.tail() {
        SeriesTail::Exact => TailInfo::None,
        SeriesTail::Columns(cb) => TailInfo::Bounds(cb),
        SeriesTail::Absent => TailInfo::Unknown,
    };
    let cloud = Cloud { known, uncertain, cap: f.degree_cap(), tail };
    let hull = lower_hull(&cloud.known);

    let certified = |i: usize| -> bool {
        if i == 0 {
            return true;
        }
        let (xi, yi) = hull[i];
        let s = slope_between(hull[i - 1], hull[i]);
        let prefix = &hull[..=i];
        cloud.uncertain.iter().all(|&(n, l)| {
            if n < xi {
                l >= hull_value(prefix, n)
            } else {
                l > yi + s * Rational::from_integer((n - xi) as i64)
            }
        }) && cloud.tail_above(xi, yi, s)
    };
    let last = (0..hull.len()).rev().find(|&i| certified(i)).unwrap_or(0);
    let vertices = hull[..=last].to_vec();
    let (x, y) = vertices[last];
    let nothing_after = last + 1 == hull.len() && cloud.uncertain.iter().all(|&(n, _)| n < x) && matches!(cloud.tail, TailInfo::None);
    let terminal = if nothing_after {
        Terminal::Finite
    } else {
        Terminal::Open { next_slope_at_least: cloud.min_slope_after(x, y) }
    };
    NewtonPolygon { vertices, terminal }
}

/// Polygon of a polynomial with constant term 1.
pub fn polygon_of_poly<C: Coeff>(q: &Poly<C>) -> Result<NewtonPolygon> {
    Ok(newton_polygon(&FredholmSeries::from_poly(&q.trimmed())?))
}

/// `Delta^s F = sum_n C(n+s, s) c_{n+s} X^n` on the tracked coefficients.
pub fn delta_operator<C: Coeff>(f: &Poly<C>, s: usize) -> Poly<C> {
    f.delta(s)
}

/// Evaluates `Delta^s F` at `a`, charging the tail to the absolute
/// precision. Also returns the smallest valuation among the summands.
fn delta_value<C: Coeff>(f: &FredholmSeries<C>, s: usize, a: &C) -> Result<(C, ValBound)> {
    let d = f.degree_cap();
    let ds = f.poly().delta(s);
    let mut acc = a.zero_like();
    let mut smallest = ValBound::Infinite;
    let mut pw = a.one_like();
    for c in ds.coeffs() {
        let t = c.times(&pw);
        smallest = smallest.min(lower_valuation(&t));
        acc = acc.plus(&t);
        pw = pw.times(a);
    }
    let va = ValBound::from(a.valuation());
    let err = match f.tail() {
        SeriesTail::Exact => ValBound::Infinite,
        SeriesTail::Absent => return Err(Error::Indeterminate("series has no tail bound".into())),
        SeriesTail::Columns(cb) => {
            let mut err = ValBound::Infinite;
            for m in d + 1..d + TAIL_SCAN_LIMIT {
                let tb = cb.coefficient_bound(m);
                let ValBound::Finite(t) = tb else { break };
                let term = match va {
                    ValBound::Finite(v) => ValBound::Finite(t + v * Rational::from_integer((m - s) as i64)),
                    ValBound::Infinite => ValBound::Infinite,
                };
                err = err.min(term);
                let next = cb.coefficient_bound(m + 1);
                let grows = match (next, va) {
                    (ValBound::Infinite, _) => true,
                    (ValBound::Finite(t1), ValBound::Finite(v)) => t1 - t + v >= Rational::zero(),
                    (_, ValBound::Infinite) => true,
                };
                if grows {
                    break;
                }
            }
            err
        }
    };
    if let Some(cap) = err.ceil() {
        acc = acc.cap_abs(cap);
    }
    Ok((acc, smallest))
}

/// Working number of digits carried by a series.
fn series_digits<C: Coeff>(f: &FredholmSeries<C>) -> u32 {
    f.coeffs().iter().skip(1).filter_map(|c| c.digits()).min().or_else(|| f.coeffs()[0].digits()).unwrap_or(1)
}

/// Order of `a` as a zero of `F`: the first `k` with `(Delta^k F)(a)` a
/// unit, all earlier values being zero at precision.
///
/// A value counts as zero when at least half of the working digits of its
/// largest summand cancelled.
pub fn zero_order<C: Coeff>(f: &FredholmSeries<C>, a: &C) -> Result<usize> {
    let digits = series_digits(f) as i64;
    for s in 0..=f.degree_cap() {
        let (val, smallest) = delta_value(f, s, a)?;
        if !val.is_zero() {
            if val.is_unit() {
                return Ok(s);
            }
            return Err(Error::Indeterminate(format!("Delta^{s} F(a) = {val} is neither zero nor a unit")));
        }
        let certified = match (val.min_abs_precision(), smallest) {
            (None, _) => true,
            (Some(_), ValBound::Infinite) => true,
            (Some(abs), ValBound::Finite(m)) => Rational::from_integer(abs) >= m + Rational::new(digits, 2),
        };
        if !certified {
            return Err(Error::Indeterminate(format!("Delta^{s} F(a) vanishes only modulo p^{}", val.min_abs_precision().unwrap_or(0))));
        }
    }
    Err(Error::Indeterminate("order exceeds the degree cap".into()))
}

/// Witness that `Q` and `S` generate the unit ideal.
#[derive(Clone, Debug, PartialEq)]
pub struct Bezout<C> {
    pub u: Poly<C>,
    pub v: Poly<C>,
    /// Sylvester determinant of `Q` and `S mod X^cap`.
    pub resultant: C,
}

/// `U Q + V S = 1 mod X^cap` with `deg U < deg S`, `deg V < deg Q`.
pub fn coprimality_certificate<C: Linear>(q: &Poly<C>, s: &Poly<C>, cap: usize) -> Result<Bezout<C>> {
    let zero = q.zero_elem().clone();
    let q = q.trimmed();
    let s = s.truncated(cap).trimmed();
    let dq = q.degree().ok_or(Error::ZeroAtPrecision)?;
    let ds = s.degree().ok_or(Error::ZeroAtPrecision)?;
    let n = dq + ds;
    let (u, v, res) = if dq == 0 {
        let inv = q.coeff(0).try_inverse()?;
        (Poly::new(vec![inv], &zero), Poly::zero(&zero), q.coeff(0))
    } else if ds == 0 {
        let inv = s.coeff(0).try_inverse()?;
        (Poly::zero(&zero), Poly::new(vec![inv], &zero), s.coeff(0))
    } else {
        // columns: X^j Q for j < ds, then X^j S for j < dq
        let syl = Matrix::from_fn(n, n, &zero, |i, j| {
            if j < ds {
                if i >= j { q.coeff(i - j) } else { zero.clone() }
            } else {
                let k = j - ds;
                if i >= k { s.coeff(i - k) } else { zero.clone() }
            }
        });
        let res = determinant(&syl);
        let mut rhs = vec![zero.clone(); n];
        rhs[0] = zero.one_like();
        let solved = match C::solve(&syl, &rhs)? {
            Some(x) => Some(x),
            None if res.is_unit() => Some(adjugate_solve(&syl, &res)?),
            None => None,
        };
        match solved {
            Some(x) => (Poly::new(x[..ds].to_vec(), &zero), Poly::new(x[ds..].to_vec(), &zero), res),
            None => {
                let sq = polygon_of_poly(&q).map(|p| p.slope_multiset()).unwrap_or_default();
                let ss = polygon_of_poly(&s).map(|p| p.slope_multiset()).unwrap_or_default();
                if let Some(common) = sq.iter().find(|x| ss.contains(x)) {
                    return Err(Error::NotCoprime(format!("both polygons have slope {}", fraction_string(common))));
                }
                return Err(Error::Indeterminate(format!("Sylvester system singular at precision (resultant {res})")));
            }
        }
    };
    let check = u.mul_trunc(&q, cap).plus(&v.mul_trunc(&s, cap)).minus(&Poly::one(&zero)).truncated(cap).map(|c| c.fit());
    if !check.is_zero() {
        return Err(Error::Indeterminate("Bezout identity fails at precision".into()));
    }
    Ok(Bezout { u, v, resultant: res })
}

fn determinant<C: Coeff>(m: &Matrix<C>) -> C {
    let c = berkowitz(m).pop().expect("nonempty");
    if m.rows() % 2 == 1 { c.negated() } else { c }
}

/// `M^{-1} e_0` through the first column of the adjugate.
fn adjugate_solve<C: Coeff>(m: &Matrix<C>, det: &C) -> Result<Vec<C>> {
    let n = m.rows();
    let inv = det.inverse_to_precision()?;
    let rows: Vec<usize> = (1..n).collect();
    Ok((0..n)
        .map(|j| {
            let cols: Vec<usize> = (0..n).filter(|&c| c != j).collect();
            let minor = if n == 1 { det.one_like() } else { determinant(&m.submatrix(&rows, &cols)) };
            let cof = if j % 2 == 1 { minor.negated() } else { minor };
            cof.times(&inv).fit()
        })
        .collect())
}

/// `F = Q S` with `Q` of slopes `<= h` and `S` of slopes `> h`.
#[derive(Clone, Debug, PartialEq)]
pub struct SlopeFactorization<C> {
    pub h: Rational,
    pub q: Poly<C>,
    pub s: FredholmSeries<C>,
    pub bezout: Bezout<C>,
}

impl<C: Coeff> SlopeFactorization<C> {
    pub fn degree(&self) -> usize {
        self.q.len() - 1
    }

    /// `Q S` reproduces `F` through the degree cap of `F`.
    pub fn round_trip(&self, f: &FredholmSeries<C>) -> bool {
        let cap = f.degree_cap() + 1;
        self.q.mul_trunc(self.s.poly(), cap).agrees_with(&f.poly().truncated(cap))
    }
}

/// Coefficient rings over which slope factorizations can be computed.
pub trait Factorable: Linear {
    /// Abscissa of the break for `h`.
    fn break_for(f: &FredholmSeries<Self>, h: Rational) -> Result<usize>;
    /// Factors `F = Q S mod X^(d+1)` with `deg Q = n0`.
    fn split(f: &FredholmSeries<Self>, n0: usize, h: Rational) -> Result<(Poly<Self>, Poly<Self>)>;
}

/// Scalar system for `Q dS + S dQ = R mod X^(d+1)` with `dQ` in degrees
/// `1..=n0` and `dS` in degrees `1..=d-n0`.
fn correction_matrix(q: &Poly<PadicScalar>, s: &Poly<PadicScalar>, n0: usize, d: usize) -> Matrix<PadicScalar> {
    let p = q.zero_elem().prime();
    Matrix::from_fn(d, d, &PadicScalar::zero(p), |row, col| {
        let k = row + 1;
        if col < n0 {
            let i = col + 1;
            if k >= i { s.coeff(k - i) } else { PadicScalar::zero(p) }
        } else {
            let i = col - n0 + 1;
            if k >= i { q.coeff(k - i) } else { PadicScalar::zero(p) }
        }
    })
}

fn apply_correction(q: &mut Poly<PadicScalar>, s: &mut Poly<PadicScalar>, x: &[PadicScalar], n0: usize, d: usize) {
    let zero = q.zero_elem().clone();
    let mut qc: Vec<PadicScalar> = (0..=n0).map(|i| q.coeff(i)).collect();
    let mut sc: Vec<PadicScalar> = (0..=d - n0).map(|i| s.coeff(i)).collect();
    for i in 1..=n0 {
        qc[i] = qc[i].add(&x[i - 1]);
    }
    for i in 1..=d - n0 {
        sc[i] = sc[i].add(&x[n0 + i - 1]);
    }
    *q = Poly::new(qc, &zero);
    *s = Poly::new(sc, &zero);
}

/// Floors of the polygon's heights at `0..=d`, held constant past its last
/// vertex.
fn polygon_heights(np: &NewtonPolygon, d: usize) -> Vec<i64> {
    let (last_x, last_y) = np.last_vertex();
    (0..=d)
        .map(|x| {
            if x >= last_x {
                return last_y.floor().to_integer();
            }
            let w = np.vertices.windows(2).find(|w| w[0].0 <= x && x <= w[1].0).expect("x lies under the polygon");
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            let t = Rational::new((x - x0) as i64, (x1 - x0) as i64);
            (y0 + (y1 - y0) * t).floor().to_integer()
        })
        .collect()
}

/// Newton iteration on `(Q, S) -> Q S`, starting from `Q = F mod X^(n0+1)`
/// and `S = 1`.
fn split_scalar(f: &Poly<PadicScalar>, n0: usize, d: usize) -> Result<(Poly<PadicScalar>, Poly<PadicScalar>)> {
    let zero = f.zero_elem().clone();
    let mut q = f.truncated(n0 + 1);
    let mut s = Poly::one(&zero);
    if n0 == 0 {
        return Ok((Poly::one(&zero), f.truncated(d + 1)));
    }
    if n0 == d {
        return Ok((f.truncated(d + 1), s));
    }
    let target = f.truncated(d + 1);
    let heights = polygon_heights(&newton_polygon(&FredholmSeries::from_poly(&target)?), d);
    let row_weight: Vec<i64> = heights[1..].to_vec();
    let col_weight: Vec<i64> = (1..=n0).map(|i| heights[i]).chain((1..=d - n0).map(|j| heights[n0 + j] - heights[n0])).collect();
    for _ in 0..64 {
        let r = target.minus(&q.mul_trunc(&s, d + 1));
        if r.is_zero() {
            return Ok((q, s));
        }
        let m = correction_matrix(&q, &s, n0, d);
        // rows and unknowns measured against the polygon, so that every
        // coefficient keeps its own relative precision
        let m = Matrix::from_fn(d, d, &zero, |row, col| m[(row, col)].shift(col_weight[col] - row_weight[row]));
        let rhs: Vec<PadicScalar> = (1..=d).map(|k| r.coeff(k).shift(-row_weight[k - 1])).collect();
        let y = solve_scalar(&m, &rhs).ok_or_else(|| Error::PrecisionExhausted("Hensel step is singular at precision".into()))?;
        let x: Vec<PadicScalar> = y.iter().zip(&col_weight).map(|(y, w)| y.shift(*w)).collect();
        let before = (q.clone(), s.clone());
        apply_correction(&mut q, &mut s, &x, n0, d);
        if q.agrees_with(&before.0) && s.agrees_with(&before.1) {
            // no further progress is possible at this precision
            let r = target.minus(&q.mul_trunc(&s, d + 1));
            if r.is_zero() {
                return Ok((q, s));
            }
            break;
        }
    }
    Err(Error::PrecisionExhausted("Hensel iteration did not reach the working precision".into()))
}

impl Factorable for PadicScalar {
    fn break_for(f: &FredholmSeries<Self>, h: Rational) -> Result<usize> {
        newton_polygon(f).break_at(h)
    }

    fn split(f: &FredholmSeries<Self>, n0: usize, _h: Rational) -> Result<(Poly<Self>, Poly<Self>)> {
        split_scalar(f.poly(), n0, f.degree_cap())
    }
}

fn origin_hom(chart: &crate::rings::Chart) -> RingHom {
    RingHom::Specialize(chart.vars.iter().map(|v| (v.clone(), PadicScalar::zero(chart.p))).collect())
}

/// The fiber of a chart series at the origin, as a scalar series.
pub fn fiber_at_origin(f: &FredholmSeries<AffinoidElement>) -> Result<FredholmSeries<PadicScalar>> {
    let chart = f.coeffs()[0].chart().clone();
    let g = f.base_change(&origin_hom(&chart))?;
    let coeffs = g.coeffs().iter().map(|c| c.as_scalar().expect("constant after specialization")).collect();
    FredholmSeries::new(coeffs, g.tail().clone())
}

fn homogeneous_part(x: &AffinoidElement, k: u32) -> Vec<(Monomial, PadicScalar)> {
    x.terms().filter(|(m, _)| m.iter().sum::<u32>() == k).map(|(m, c)| (m.clone(), *c)).collect()
}

impl Factorable for AffinoidElement {
    fn break_for(f: &FredholmSeries<Self>, h: Rational) -> Result<usize> {
        newton_polygon(&fiber_at_origin(f)?).break_at(h)
    }

    /// Factors the fiber at the origin, then lifts one homogeneous degree
    /// in the chart variables at a time.
    fn split(f: &FredholmSeries<Self>, n0: usize, h: Rational) -> Result<(Poly<Self>, Poly<Self>)> {
        let chart = f.coeffs()[0].chart().clone();
        let d = f.degree_cap();
        let fiber = fiber_at_origin(f)?;
        let (q0, s0) = split_scalar(fiber.poly(), n0, d)?;
        let like = AffinoidElement::zero(&chart);
        let lift = |p: &Poly<PadicScalar>, len: usize| -> Vec<AffinoidElement> {
            (0..len).map(|i| AffinoidElement::constant(&chart, p.coeff(i))).collect()
        };
        let mut q = lift(&q0, n0 + 1);
        let mut s = lift(&s0, d - n0 + 1);
        let sys = correction_matrix(&q0, &s0, n0, d);
        let max_deg = f.coeffs().iter().map(|c| c.degree()).max().unwrap_or(0).max(chart.degree_bound);
        for k in 1..=max_deg {
            let prod = Poly::new(q.clone(), &like).mul_trunc(&Poly::new(s.clone(), &like), d + 1);
            let mut monos: Vec<Monomial> = Vec::new();
            let mut rk: Vec<Vec<(Monomial, PadicScalar)>> = Vec::new();
            for n in 0..=d {
                let r = f.poly().coeff(n).minus(&prod.coeff(n));
                let part = homogeneous_part(&r, k);
                for (m, _) in &part {
                    if !monos.contains(m) {
                        monos.push(m.clone());
                    }
                }
                rk.push(part);
            }
            for m in monos {
                let rhs: Vec<PadicScalar> = (1..=d)
                    .map(|n| rk[n].iter().find(|(mm, _)| *mm == m).map_or(PadicScalar::zero(chart.p), |(_, c)| *c))
                    .collect();
                if rhs.iter().all(|c| c.is_zero()) {
                    continue;
                }
                let x = solve_scalar(&sys, &rhs).ok_or_else(|| Error::PrecisionExhausted("lifting step is singular".into()))?;
                for i in 1..=n0 {
                    q[i] = q[i].plus(&AffinoidElement::from_terms(&chart, [(m.clone(), x[i - 1])]));
                }
                for i in 1..=d - n0 {
                    s[i] = s[i].plus(&AffinoidElement::from_terms(&chart, [(m.clone(), x[n0 + i - 1])]));
                }
            }
        }
        let q = Poly::new(q, &like);
        let s = Poly::new(s, &like);
        if !f.poly().truncated(d + 1).minus(&q.mul_trunc(&s, d + 1)).is_zero() {
            return Err(Error::PrecisionExhausted("the factors do not fit the chart degree bound".into()));
        }
        if !q.coeff(n0).is_unit() {
            return Err(Error::NoBreak("leading coefficient of Q is not a unit on the chart".into()));
        }
        for n in 1..s.len() {
            let lv = lower_valuation(&s.coeff(n));
            if lv <= ValBound::Finite(h * Rational::from_integer(n as i64)) {
                return Err(Error::NoBreak(format!("coefficient {n} of S does not stay above slope {} on the chart", fraction_string(&h))));
            }
        }
        Ok((q, s))
    }
}

/// Splits `F` at the vertex separating slopes `<= h` from slopes `> h`.
pub fn slope_factorization<C: Factorable>(f: &FredholmSeries<C>, h: Rational) -> Result<SlopeFactorization<C>> {
    let n0 = C::break_for(f, h)?;
    let d = f.degree_cap();
    if n0 > d {
        return Err(Error::TailUncertain(format!("break at {n0} lies past the degree cap {d}")));
    }
    let (q, s) = C::split(f, n0, h)?;
    let q = q.truncated(n0 + 1);
    let exact = matches!(f.tail(), SeriesTail::Exact);
    let s_tail = if exact { SeriesTail::Exact } else { SeriesTail::Absent };
    let s_series = FredholmSeries::new(s.coeffs().to_vec(), s_tail)?;
    check_separation(&q, &s_series, h)?;
    let bezout = coprimality_certificate(&q, s_series.poly(), d + 1)?;
    Ok(SlopeFactorization { h, q, s: s_series, bezout })
}

fn check_separation<C: Coeff>(q: &Poly<C>, s: &FredholmSeries<C>, h: Rational) -> Result<()> {
    let pq = polygon_of_poly(q)?;
    if pq.slopes().iter().any(|(sl, _)| *sl > h) {
        return Err(Error::PrecisionExhausted(format!("Q = {q} has a slope above {}", fraction_string(&h))));
    }
    let n0 = q.len() - 1;
    if n0 > 0 && pq.last_vertex().0 != n0 {
        return Err(Error::PrecisionExhausted("leading coefficient of Q vanishes at precision".into()));
    }
    for (n, c) in s.coeffs().iter().enumerate().skip(1) {
        if lower_valuation(c) <= ValBound::Finite(h * Rational::from_integer(n as i64)) {
            return Err(Error::PrecisionExhausted(format!("S has a slope <= {} at precision", fraction_string(&h))));
        }
    }
    Ok(())
}

/// The slope `n / d`.
pub fn slope(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::int_poly;
    use crate::rings::Chart;

    fn series(p: u64, c: &[i64]) -> FredholmSeries<PadicScalar> {
        FredholmSeries::from_poly(&int_poly(p, 20, c)).unwrap()
    }

    fn product(p: u64, roots: &[i64]) -> Poly<PadicScalar> {
        roots.iter().fold(int_poly(p, 20, &[1]), |acc, &a| acc.times(&int_poly(p, 20, &[1, -a])))
    }

    #[test]
    fn polygon_examples() {
        let np = newton_polygon(&series(5, &[1, 1, 5, 125]));
        let r = |n| Rational::from_integer(n);
        assert_eq!(np.vertices, vec![(0, r(0)), (1, r(0)), (2, r(1)), (3, r(3))]);
        assert_eq!(np.terminal, Terminal::Finite);

        let f = FredholmSeries::from_poly(&product(3, &[1, 3, 9, 27])).unwrap();
        let np = newton_polygon(&f);
        assert_eq!(np.slopes(), vec![(r(0), 1), (r(1), 1), (r(2), 1), (r(3), 1)]);

        let np = newton_polygon(&series(3, &[1]));
        assert_eq!(np.vertices, vec![(0, r(0))]);
    }

    #[test]
    fn zero_orders() {
        let p = 7;
        assert_eq!(zero_order(&series(p, &[1, -2, 1]), &PadicScalar::from_int(p, 1, 20)).unwrap(), 2);
        let a = PadicScalar::from_ratio(p, 1, 7, 20).unwrap();
        assert_eq!(zero_order(&series(p, &[1, -7]), &a).unwrap(), 1);
        assert_eq!(zero_order(&series(p, &[1, 1]), &PadicScalar::zero(p)).unwrap(), 0);
    }

    #[test]
    fn split_keeps_relative_precision() {
        let p = 2;
        let roots: Vec<i64> = (0..16).map(|j| 1 << j).collect();
        let f = roots.iter().fold(int_poly(p, 24, &[1]), |acc, &a| acc.times(&int_poly(p, 24, &[1, -a])));
        let fact = slope_factorization(&FredholmSeries::from_poly(&f).unwrap(), slope(5, 2)).unwrap();
        assert!(fact.q.agrees_with(&int_poly(p, 24, &[1, -7, 14, -8])));
        assert!(fact.q.coeffs().iter().skip(1).all(|c| c.rel_precision() == 24));
    }

    #[test]
    fn factorizations() {
        let p = 5;
        let f = series(p, &[1, -(1 + 5), 5]);
        let fac = slope_factorization(&f, slope(1, 2)).unwrap();
        assert!(fac.q.agrees_with(&int_poly(p, 20, &[1, -1])));
        assert!(fac.s.poly().agrees_with(&int_poly(p, 20, &[1, -5])));
        assert!(fac.round_trip(&f));

        let f = FredholmSeries::from_poly(&product(p, &[1, 5, 25, 125])).unwrap();
        let fac = slope_factorization(&f, slope(3, 2)).unwrap();
        assert_eq!(fac.degree(), 2);
        assert_eq!(polygon_of_poly(&fac.q).unwrap().slope_multiset(), vec![slope(0, 1), slope(1, 1)]);
        assert!(fac.round_trip(&f));
    }

    #[test]
    fn total_factorization_over_a_chart() {
        let chart = Chart::new(5, &["T1"], 2, 20);
        let c = |n| AffinoidElement::from_int(&chart, n);
        let f = FredholmSeries::new(vec![c(1), c(-2), c(1)], SeriesTail::Exact).unwrap();
        let fac = slope_factorization(&f, slope(0, 1)).unwrap();
        assert_eq!(fac.degree(), 2);
        assert!(fac.s.poly().trimmed().agrees_with(&Poly::one(&c(0))));
    }

    #[test]
    fn lifting_in_the_chart_variable() {
        let p = 3;
        let chart = Chart::univariate(p, 2, 20);
        let w = AffinoidElement::variable(&chart, "w").unwrap();
        let one = AffinoidElement::from_int(&chart, 1);
        let pw = w.scale(&PadicScalar::from_int(p, 3, 20));
        let like = one.zero_like();
        let f = Poly::one_minus(&one).times(&Poly::one_minus(&pw));
        let f = FredholmSeries::from_poly(&f).unwrap();
        let fac = slope_factorization(&f, slope(1, 2)).unwrap();
        assert!(fac.q.agrees_with(&Poly::one_minus(&one)));
        assert!(fac.s.poly().agrees_with(&Poly::one_minus(&pw)));
        let _ = like;
    }

    #[test]
    fn bezout_examples() {
        let p = 5;
        let b = coprimality_certificate(&int_poly(p, 20, &[1, -1]), &int_poly(p, 20, &[1, -5]), 4).unwrap();
        assert!(b.resultant.is_integral_unit());
        assert!(matches!(
            coprimality_certificate(&int_poly(p, 20, &[1, -1]), &int_poly(p, 20, &[1, -1]), 4),
            Err(Error::NotCoprime(_))
        ));
        let b = coprimality_certificate(&int_poly(p, 20, &[1, 1]), &int_poly(p, 20, &[1]), 4).unwrap();
        assert!(b.u.is_zero() && b.v.agrees_with(&int_poly(p, 20, &[1])));
    }

    proptest::proptest! {
        #[test]
        fn slopes_are_root_valuations(exps in proptest::collection::vec(0u32..4, 1..5), units in proptest::collection::vec(1i64..5, 4)) {
            let p = 3u64;
            let roots: Vec<i64> = exps.iter().zip(&units).map(|(&e, &u)| 3i64.pow(e) * (3 * u + 1)).collect();
            let f = FredholmSeries::from_poly(&product(p, &roots)).unwrap();
            let mut want: Vec<Rational> = exps.iter().map(|&e| Rational::from_integer(e as i64)).collect();
            want.sort();
            proptest::prop_assert_eq!(newton_polygon(&f).slope_multiset(), want);
        }

        #[test]
        fn factorization_round_trip(exps in proptest::collection::vec(0u32..4, 1..5), h2 in -1i64..8) {
            let p = 5u64;
            let roots: Vec<i64> = exps.iter().enumerate().map(|(i, &e)| 5i64.pow(e) * (i as i64 + 1)).collect();
            let f = FredholmSeries::from_poly(&product(p, &roots)).unwrap();
            let h = slope(h2, 2);
            let fac = slope_factorization(&f, h).unwrap();
            proptest::prop_assert!(fac.round_trip(&f));
            proptest::prop_assert_eq!(fac.degree(), exps.iter().filter(|&&e| slope(e as i64, 1) <= h).count());
            let check = fac.bezout.u.times(&fac.q).plus(&fac.bezout.v.times(fac.s.poly())).truncated(f.degree_cap() + 1);
            proptest::prop_assert!(check.agrees_with(&int_poly(p, 20, &[1])));
        }

        #[test]
        fn zero_order_divides_out(k in 0usize..4, exps in proptest::collection::vec(1u32..3, 0..3)) {
            let p = 7u64;
            let g = product(p, &exps.iter().map(|&e| 7i64.pow(e)).collect::<Vec<_>>());
            let f = int_poly(p, 20, &[1, -1]).pow(k as u32).times(&g);
            let one = PadicScalar::from_int(p, 1, 20);
            let k_found = zero_order(&FredholmSeries::from_poly(&f).unwrap(), &one).unwrap();
            proptest::prop_assert_eq!(k_found, k);
            let mut rest = f;
            for _ in 0..k_found {
                let (quo, rem) = rest.div_rem(&int_poly(p, 20, &[1, -1])).unwrap();
                proptest::prop_assert!(rem.is_zero());
                rest = quo;
            }
            proptest::prop_assert!(rest.eval(&one).is_integral_unit());
        }
    }
}
