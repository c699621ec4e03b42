//! Precision-aware linear algebra.
//!
//! Over `Q_p` this is Gauss-Jordan elimination with full pivoting on the
//! entry of minimal valuation (ties: lowest row, then lowest column). Over an
//! affinoid chart, systems are flattened into `Q_p`-linear systems on the
//! coefficients of polynomial unknowns of bounded degree.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rings::{max_relative_precision, AffinoidElement, Coeff, Monomial, PadicScalar, Valuation};

/// Result of eliminating a scalar matrix.
#[derive(Clone, Debug)]
pub struct Reduced {
    pub rank: usize,
    /// Column of the pivot used at each step.
    pub pivot_cols: Vec<usize>,
    /// Valuations of the pivots, before normalization.
    pub pivot_valuations: Vec<i64>,
    /// Gauss-Jordan form: row `k` has a 1 at `pivot_cols[k]` and zeros at
    /// the other pivot columns.
    pub form: Matrix<PadicScalar>,
    /// Row operations applied to the right-hand sides, if any were given.
    pub rhs: Vec<Vec<PadicScalar>>,
    /// Smallest absolute precision among the residual entries (rows past the
    /// rank); `None` when the residual is exactly zero.
    pub residual_precision: Option<i64>,
}

impl Reduced {
    /// True when every residual zero is known to strictly higher precision
    /// than the largest pivot valuation.
    pub fn rank_certified(&self) -> bool {
        match (self.residual_precision, self.pivot_valuations.iter().max()) {
            (None, _) => true,
            (Some(_), None) => true,
            (Some(a), Some(&v)) => a > v,
        }
    }
}

/// Eliminates `m`, carrying the right-hand sides `rhs` (each of length
/// `m.rows()`) along.
pub fn reduce(m: &Matrix<PadicScalar>, rhs: &[Vec<PadicScalar>]) -> Reduced {
    let (rows, cols) = (m.rows(), m.cols());
    let mut a = m.clone();
    let mut b: Vec<Vec<PadicScalar>> = rhs.to_vec();
    let mut used = vec![false; cols];
    let mut pivot_cols = Vec::new();
    let mut pivot_valuations = Vec::new();
    let mut k = 0;
    while k < rows {
        let mut best: Option<(i64, usize, usize)> = None;
        for i in k..rows {
            for j in (0..cols).filter(|&j| !used[j]) {
                if let Valuation::Finite(v) = a[(i, j)].valuation() {
                    if best.map_or(true, |(bv, _, _)| v < bv) {
                        best = Some((v, i, j));
                    }
                }
            }
        }
        let Some((v, pi, pj)) = best else { break };
        if pi != k {
            for j in 0..cols {
                let t = a[(k, j)];
                a[(k, j)] = a[(pi, j)];
                a[(pi, j)] = t;
            }
            for rhs in &mut b {
                rhs.swap(k, pi);
            }
        }
        let inv = a[(k, pj)].invert().expect("pivot is nonzero");
        for j in 0..cols {
            a[(k, j)] = a[(k, j)].mul(&inv);
        }
        a[(k, pj)] = PadicScalar::one(m.zero_elem().prime(), inv.rel_precision());
        for rhs in &mut b {
            rhs[k] = rhs[k].mul(&inv);
        }
        for i in (0..rows).filter(|&i| i != k) {
            let f = a[(i, pj)];
            if f.is_exact_zero() {
                continue;
            }
            for j in 0..cols {
                let t = f.mul(&a[(k, j)]);
                a[(i, j)] = a[(i, j)].sub(&t);
            }
            // the pivot column is cleared exactly, keeping its precision
            // only as a residual bound
            let rem = a[(i, pj)];
            a[(i, pj)] = match rem.abs_precision() {
                Some(p) if rem.is_zero() => PadicScalar::zero_mod(rem.prime(), p),
                _ => PadicScalar::zero(rem.prime()),
            };
            for rhs in &mut b {
                let t = f.mul(&rhs[k]);
                rhs[i] = rhs[i].sub(&t);
            }
        }
        used[pj] = true;
        pivot_cols.push(pj);
        pivot_valuations.push(v);
        k += 1;
    }
    let residual_precision = (k..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .filter_map(|(i, j)| a[(i, j)].abs_precision())
        .min();
    Reduced { rank: k, pivot_cols, pivot_valuations, form: a, rhs: b, residual_precision }
}

pub fn rank(m: &Matrix<PadicScalar>) -> usize {
    reduce(m, &[]).rank
}

/// Kernel basis of a scalar matrix, one vector per free column.
pub fn kernel_scalar(m: &Matrix<PadicScalar>) -> Result<Vec<Vec<PadicScalar>>> {
    let red = reduce(m, &[]);
    if !red.rank_certified() {
        return Err(Error::RankUncertain(format!(
            "residual known only mod p^{} against pivot valuation {}",
            red.residual_precision.unwrap_or(0),
            red.pivot_valuations.iter().max().unwrap_or(&0)
        )));
    }
    Ok(kernel_from_reduced(m, &red))
}

fn kernel_from_reduced(m: &Matrix<PadicScalar>, red: &Reduced) -> Vec<Vec<PadicScalar>> {
    let p = m.zero_elem().prime();
    let free: Vec<usize> = (0..m.cols()).filter(|j| !red.pivot_cols.contains(j)).collect();
    free.iter()
        .map(|&f| {
            let mut x = vec![PadicScalar::zero(p); m.cols()];
            x[f] = PadicScalar::one(p, max_relative_precision(p));
            for (k, &pc) in red.pivot_cols.iter().enumerate() {
                x[pc] = red.form[(k, f)].neg();
            }
            x
        })
        .collect()
}

/// One solution of `m x = b`, or `None` if the system is inconsistent at
/// precision. Free variables are set to zero.
pub fn solve_scalar(m: &Matrix<PadicScalar>, b: &[PadicScalar]) -> Option<Vec<PadicScalar>> {
    assert_eq!(m.rows(), b.len());
    let red = reduce(m, &[b.to_vec()]);
    let rhs = &red.rhs[0];
    if rhs[red.rank..].iter().any(|x| !x.is_zero()) {
        return None;
    }
    let p = m.zero_elem().prime();
    let mut x = vec![PadicScalar::zero(p); m.cols()];
    for (k, &pc) in red.pivot_cols.iter().enumerate() {
        x[pc] = rhs[k];
    }
    Some(x)
}

/// Inverse of a square scalar matrix.
pub fn inverse_scalar(m: &Matrix<PadicScalar>) -> Result<Matrix<PadicScalar>> {
    let n = m.rows();
    if !m.is_square() {
        return Err(Error::SizeMismatch("inverse of a non-square matrix".into()));
    }
    let p = m.zero_elem().prime();
    let rel = m.entries().map(|x| x.rel_precision()).max().unwrap_or(1).max(1);
    let ids: Vec<Vec<PadicScalar>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { PadicScalar::one(p, rel) } else { PadicScalar::zero(p) }).collect())
        .collect();
    let red = reduce(m, &ids);
    if red.rank < n {
        return Err(Error::ZeroAtPrecision);
    }
    let mut out = Matrix::zeros(n, n, m.zero_elem());
    for (j, rhs) in red.rhs.iter().enumerate() {
        for (k, &pc) in red.pivot_cols.iter().enumerate() {
            out[(pc, j)] = rhs[k];
        }
    }
    Ok(out)
}

/// Linear algebra over a coefficient ring.
pub trait Linear: Coeff {
    /// A solution `x` of `m x = b`, or `None` when none exists (within the
    /// search space for affinoid charts).
    fn solve(m: &Matrix<Self>, b: &[Self]) -> Result<Option<Vec<Self>>>;

    /// A basis of the kernel of `m`, which must be free.
    fn kernel(m: &Matrix<Self>) -> Result<Vec<Vec<Self>>>;

    /// Rank over the fraction field.
    fn frac_rank(m: &Matrix<Self>) -> usize {
        fraction_free_rank(m)
    }

    fn in_span(cols: &[Vec<Self>], v: &[Self], like: &Self) -> Result<bool> {
        if cols.is_empty() {
            return Ok(v.iter().all(|x| x.is_zero()));
        }
        let m = Matrix::from_columns(cols, v.len(), like);
        Ok(Self::solve(&m, v)?.is_some())
    }
}

impl Linear for PadicScalar {
    fn solve(m: &Matrix<Self>, b: &[Self]) -> Result<Option<Vec<Self>>> {
        Ok(solve_scalar(m, b))
    }

    fn kernel(m: &Matrix<Self>) -> Result<Vec<Vec<Self>>> {
        kernel_scalar(m)
    }

    fn frac_rank(m: &Matrix<Self>) -> usize {
        rank(m)
    }
}

/// Rank over the fraction field by cross-multiplying elimination (no
/// divisions).
pub fn fraction_free_rank<C: Coeff>(m: &Matrix<C>) -> usize {
    let mut a = m.clone();
    let (rows, cols) = (a.rows(), a.cols());
    let mut used_rows = vec![false; rows];
    let mut r = 0;
    for j in 0..cols {
        let piv = (0..rows)
            .filter(|&i| !used_rows[i] && !a[(i, j)].is_zero())
            .min_by_key(|&i| (a[(i, j)].valuation(), i));
        let Some(pi) = piv else { continue };
        used_rows[pi] = true;
        r += 1;
        let pv = a[(pi, j)].clone();
        for i in (0..rows).filter(|&i| !used_rows[i]) {
            let f = a[(i, j)].clone();
            if f.is_exact_zero() {
                continue;
            }
            for k in 0..cols {
                let t = pv.times(&a[(i, k)]).minus(&f.times(&a[(pi, k)]));
                a[(i, k)] = t;
            }
        }
    }
    r
}

/// Greedy choice of a maximal independent subfamily (over the fraction
/// field), keeping the earliest vectors.
pub fn independent_subset<C: Coeff>(vectors: &[Vec<C>], len: usize, like: &C) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    for (i, _) in vectors.iter().enumerate() {
        let mut trial: Vec<Vec<C>> = chosen.iter().map(|&c| vectors[c].clone()).collect();
        trial.push(vectors[i].clone());
        let m = Matrix::from_columns(&trial, len, like);
        if fraction_free_rank(&m) == trial.len() {
            chosen.push(i);
        }
    }
    chosen
}

/// Flattening of affinoid systems onto monomial coordinates.
struct Flat {
    unknown_monos: Vec<Monomial>,
    eq_monos: Vec<Monomial>,
}

impl Flat {
    fn new(chart: &crate::rings::Chart, x_degree: u32, eq_degree: u32) -> Self {
        Flat { unknown_monos: chart.monomials_up_to(x_degree), eq_monos: chart.monomials_up_to(eq_degree) }
    }

    fn eq_index(&self, m: &Monomial) -> usize {
        self.eq_monos.iter().position(|x| x == m).expect("monomial within equation range")
    }

    /// The scalar matrix of `x -> m x` on coefficient vectors.
    fn operator(&self, m: &Matrix<AffinoidElement>) -> Matrix<PadicScalar> {
        let p = m.zero_elem().prime();
        let nu = self.unknown_monos.len();
        let ne = self.eq_monos.len();
        let mut out = Matrix::zeros(m.rows() * ne, m.cols() * nu, &PadicScalar::zero(p));
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                for (mono, c) in m[(i, j)].terms() {
                    for (u, um) in self.unknown_monos.iter().enumerate() {
                        let prod: Monomial = mono.iter().zip(um).map(|(a, b)| a + b).collect();
                        let e = self.eq_index(&prod);
                        let cell = &mut out[(i * ne + e, j * nu + u)];
                        *cell = cell.add(c);
                    }
                }
            }
        }
        out
    }

    fn rhs(&self, b: &[AffinoidElement]) -> Result<Vec<PadicScalar>> {
        let ne = self.eq_monos.len();
        let p = b.first().map_or(2, |x| x.prime());
        let mut out = vec![PadicScalar::zero(p); b.len() * ne];
        for (i, x) in b.iter().enumerate() {
            let flat = x.flatten(&self.eq_monos)?;
            out[i * ne..(i + 1) * ne].copy_from_slice(&flat);
        }
        Ok(out)
    }

    fn unflatten(&self, like: &AffinoidElement, x: &[PadicScalar], n: usize) -> Vec<AffinoidElement> {
        let nu = self.unknown_monos.len();
        (0..n)
            .map(|j| {
                AffinoidElement::from_terms(
                    like.chart(),
                    self.unknown_monos.iter().cloned().zip(x[j * nu..(j + 1) * nu].iter().copied()),
                )
            })
            .collect()
    }
}

fn matrix_degree(m: &Matrix<AffinoidElement>) -> u32 {
    m.entries().map(|x| x.degree()).max().unwrap_or(0)
}

/// Solves `m x = b` over the chart with unknown entries of total degree at
/// most `x_degree`.
pub fn solve_affinoid(m: &Matrix<AffinoidElement>, b: &[AffinoidElement], x_degree: u32) -> Result<Option<Vec<AffinoidElement>>> {
    let chart = m.zero_elem().chart().clone();
    let bdeg = b.iter().map(|x| x.degree()).max().unwrap_or(0);
    let flat = Flat::new(&chart, x_degree, (matrix_degree(m) + x_degree).max(bdeg));
    let op = flat.operator(m);
    let rhs = flat.rhs(b)?;
    Ok(solve_scalar(&op, &rhs).map(|x| flat.unflatten(m.zero_elem(), &x, m.cols())))
}

/// A `Q_p`-basis of the kernel vectors of total degree at most `x_degree`.
pub fn kernel_affinoid_flat(m: &Matrix<AffinoidElement>, x_degree: u32) -> Result<Vec<Vec<AffinoidElement>>> {
    let chart = m.zero_elem().chart().clone();
    let flat = Flat::new(&chart, x_degree, matrix_degree(m) + x_degree);
    let op = flat.operator(m);
    let ker = kernel_scalar(&op)?;
    Ok(ker.iter().map(|x| flat.unflatten(m.zero_elem(), x, m.cols())).collect())
}

/// Picks an independent generating subfamily of `vectors` and checks that
/// every vector lies in its span.
pub fn basis_of_span<C: Linear>(vectors: &[Vec<C>], len: usize, like: &C) -> Result<Vec<Vec<C>>> {
    let idx = independent_subset(vectors, len, like);
    let basis: Vec<Vec<C>> = idx.iter().map(|&i| vectors[i].clone()).collect();
    for (i, v) in vectors.iter().enumerate() {
        if idx.contains(&i) {
            continue;
        }
        if !C::in_span(&basis, v, like)? {
            return Err(Error::RankUncertain("span is not free on a subfamily of its generators".into()));
        }
    }
    Ok(basis)
}

/// Gauss-Jordan elimination in which every pivot is a unit of the Tate
/// algebra, so coordinates may be power series cut to the chart. `None` when
/// some column has no unit entry on the rows still free.
fn solve_on_unit_pivots(m: &Matrix<AffinoidElement>, b: &[AffinoidElement]) -> Result<Option<Option<Vec<AffinoidElement>>>> {
    let (rows, cols) = (m.rows(), m.cols());
    let mut a: Vec<Vec<AffinoidElement>> = (0..rows).map(|i| m.row(i)).collect();
    let mut b = b.to_vec();
    let mut pivots = Vec::with_capacity(cols);
    for k in 0..cols {
        let Some(r) = (0..rows).find(|&r| !pivots.contains(&r) && a[r][k].is_unit()) else {
            return Ok(None);
        };
        let inv = a[r][k].inverse_to_precision()?;
        a[r] = a[r].iter().map(|x| x.times(&inv).fit()).collect();
        b[r] = b[r].times(&inv).fit();
        for i in (0..rows).filter(|&i| i != r) {
            let lambda = a[i][k].clone();
            if lambda.is_exact_zero() {
                continue;
            }
            let pivot_row = a[r].clone();
            for (x, y) in a[i].iter_mut().zip(&pivot_row) {
                *x = x.minus(&lambda.times(y)).fit();
            }
            b[i] = b[i].minus(&lambda.times(&b[r])).fit();
        }
        pivots.push(r);
    }
    let consistent = (0..rows).filter(|r| !pivots.contains(r)).all(|r| b[r].is_zero());
    Ok(Some(consistent.then(|| pivots.iter().map(|&r| b[r].clone()).collect())))
}

impl Linear for AffinoidElement {
    fn solve(m: &Matrix<Self>, b: &[Self]) -> Result<Option<Vec<Self>>> {
        if let Some(found) = solve_on_unit_pivots(m, b)? {
            return Ok(found);
        }
        let d = m.zero_elem().chart().degree_bound;
        solve_affinoid(m, b, d)
    }

    fn kernel(m: &Matrix<Self>) -> Result<Vec<Vec<Self>>> {
        let like = m.zero_elem().clone();
        if m.is_zero() {
            return Ok((0..m.cols())
                .map(|j| (0..m.cols()).map(|i| if i == j { like.one_like() } else { like.zero_like() }).collect())
                .collect());
        }
        let d = like.chart().degree_bound;
        let cands = kernel_affinoid_flat(m, d)?;
        // lowest total degree first so that the basis is as simple as possible
        let mut cands = cands;
        cands.sort_by_key(|v| v.iter().map(|x| x.degree()).max().unwrap_or(0));
        basis_of_span(&cands, m.cols(), &like)
    }
}
