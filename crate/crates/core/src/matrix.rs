//! Dense matrices over a coefficient ring.
//!
//! Column `j` holds the coordinates of the image of the `j`-th basis vector.

use std::fmt;

use crate::error::{Error, Result};
use crate::rings::{Coeff, PadicScalar, RingHom, Valuation};

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<C> {
    rows: usize,
    cols: usize,
    data: Vec<C>,
    zero: C,
}

impl<C: Coeff> Matrix<C> {
    pub fn zeros(rows: usize, cols: usize, like: &C) -> Self {
        let zero = like.zero_like();
        Matrix { rows, cols, data: vec![zero.clone(); rows * cols], zero }
    }

    pub fn identity(n: usize, like: &C) -> Self {
        let mut m = Self::zeros(n, n, like);
        for i in 0..n {
            m[(i, i)] = like.one_like();
        }
        m
    }

    pub fn diagonal(entries: &[C], like: &C) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len(), like);
        for (i, e) in entries.iter().enumerate() {
            m[(i, i)] = e.clone();
        }
        m
    }

    /// Row-major construction. Panics on ragged input.
    pub fn from_rows(rows: Vec<Vec<C>>, like: &C) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Matrix { rows: r, cols: c, data: rows.into_iter().flatten().collect(), zero: like.zero_like() }
    }

    pub fn from_columns(cols: &[Vec<C>], rows: usize, like: &C) -> Self {
        let mut m = Self::zeros(rows, cols.len(), like);
        for (j, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), rows, "column length");
            for (i, x) in col.iter().enumerate() {
                m[(i, j)] = x.clone();
            }
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, like: &C, mut f: impl FnMut(usize, usize) -> C) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data, zero: like.zero_like() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// A zero of the coefficient ring (carries the chart for affinoid entries).
    pub fn zero_elem(&self) -> &C {
        &self.zero
    }

    pub fn entries(&self) -> impl Iterator<Item = &C> {
        self.data.iter()
    }

    pub fn column(&self, j: usize) -> Vec<C> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn row(&self, i: usize) -> Vec<C> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, &self.zero, |i, j| self[(j, i)].clone())
    }

    pub fn map(&self, f: impl Fn(&C) -> C) -> Self {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(f).collect(), zero: self.zero.clone() }
    }

    pub fn try_map<D: Coeff>(&self, like: &D, f: impl Fn(&C) -> Result<D>) -> Result<Matrix<D>> {
        let data = self.data.iter().map(f).collect::<Result<Vec<_>>>()?;
        Ok(Matrix { rows: self.rows, cols: self.cols, data, zero: like.zero_like() })
    }

    fn check_same_shape(&self, other: &Self) {
        assert!(self.rows == other.rows && self.cols == other.cols, "matrix shape mismatch");
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check_same_shape(other);
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a.plus(b)).collect(),
            zero: self.zero.clone(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.check_same_shape(other);
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a.minus(b)).collect(),
            zero: self.zero.clone(),
        }
    }

    pub fn neg(&self) -> Self {
        self.map(|x| x.negated())
    }

    pub fn scale(&self, c: &C) -> Self {
        self.map(|x| c.times(x))
    }

    pub fn scale_scalar(&self, s: &PadicScalar) -> Self {
        self.map(|x| x.scale(s))
    }

    /// Matrix product. Panics on inner-dimension mismatch; use
    /// [`Matrix::try_mul`] for checked composition.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols, &self.zero);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_exact_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if b.is_exact_zero() {
                        continue;
                    }
                    let t = a.times(b);
                    let cell = &mut out[(i, j)];
                    *cell = cell.plus(&t);
                }
            }
        }
        out
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::SizeMismatch(format!("{}x{} times {}x{}", self.rows, self.cols, other.rows, other.cols)));
        }
        Ok(self.mul(other))
    }

    pub fn mul_vec(&self, v: &[C]) -> Vec<C> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| (0..self.cols).fold(self.zero.clone(), |acc, k| acc.plus(&self[(i, k)].times(&v[k]))))
            .collect()
    }

    pub fn pow(&self, e: u32) -> Self {
        assert!(self.is_square());
        (0..e).fold(Self::identity(self.rows, &self.zero), |acc, _| acc.mul(self))
    }

    pub fn trace(&self) -> C {
        (0..self.rows.min(self.cols)).fold(self.zero.clone(), |acc, i| acc.plus(&self[(i, i)]))
    }

    /// `sum_k coeffs[k] * self^k` by Horner's rule.
    pub fn eval_poly(&self, coeffs: &[C]) -> Self {
        let n = self.rows;
        let mut acc = Self::zeros(n, n, &self.zero);
        for c in coeffs.iter().rev() {
            acc = acc.mul(self);
            for i in 0..n {
                acc[(i, i)] = acc[(i, i)].plus(c);
            }
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    /// Entrywise agreement at tracked precision.
    pub fn agrees_with(&self, other: &Self) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.sub(other).is_zero()
    }

    /// `min_{i,j} v(a_ij)`; `Infinity` for the zero matrix.
    pub fn min_valuation(&self) -> Valuation {
        self.data.iter().map(|x| x.valuation()).min().unwrap_or(Valuation::Infinity)
    }

    /// Column norms as valuations: `min_i v(a_ij)`.
    pub fn column_valuations(&self) -> Vec<Valuation> {
        (0..self.cols).map(|j| (0..self.rows).map(|i| self[(i, j)].valuation()).min().unwrap_or(Valuation::Infinity)).collect()
    }

    pub fn min_abs_precision(&self) -> Option<i64> {
        self.data.iter().filter_map(|x| x.min_abs_precision()).min()
    }

    pub fn apply_hom(&self, h: &RingHom) -> Result<Self> {
        let data = self.data.iter().map(|x| x.apply_hom(h)).collect::<Result<Vec<_>>>()?;
        Ok(Matrix { rows: self.rows, cols: self.cols, data, zero: self.zero.apply_hom(h)? })
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self::from_fn(self.rows, cols.len(), &self.zero, |i, j| self[(i, cols[j])].clone())
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), &self.zero, |i, j| self[(rows[i], cols[j])].clone())
    }

    /// Horizontal concatenation.
    pub fn hstack(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows);
        Self::from_fn(self.rows, self.cols + other.cols, &self.zero, |i, j| {
            if j < self.cols {
                self[(i, j)].clone()
            } else {
                other[(i, j - self.cols)].clone()
            }
        })
    }

    /// Block diagonal sum.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let (r, c) = (self.rows + other.rows, self.cols + other.cols);
        Self::from_fn(r, c, &self.zero, |i, j| {
            if i < self.rows && j < self.cols {
                self[(i, j)].clone()
            } else if i >= self.rows && j >= self.cols {
                other[(i - self.rows, j - self.cols)].clone()
            } else {
                self.zero.clone()
            }
        })
    }

    /// Commutator `self * other - other * self`.
    pub fn commutator(&self, other: &Self) -> Self {
        self.mul(other).sub(&other.mul(self))
    }

    pub fn as_scalar_matrix(&self) -> Option<Matrix<PadicScalar>> {
        let p = self.zero.prime();
        let data = self.data.iter().map(|x| x.as_scalar()).collect::<Option<Vec<_>>>()?;
        Some(Matrix { rows: self.rows, cols: self.cols, data, zero: PadicScalar::zero(p) })
    }
}

impl<C> std::ops::Index<(usize, usize)> for Matrix<C> {
    type Output = C;
    fn index(&self, (i, j): (usize, usize)) -> &C {
        assert!(i < self.rows && j < self.cols, "index out of range");
        &self.data[i * self.cols + j]
    }
}

impl<C> std::ops::IndexMut<(usize, usize)> for Matrix<C> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C {
        assert!(i < self.rows && j < self.cols, "index out of range");
        &mut self.data[i * self.cols + j]
    }
}

impl<C: Coeff> fmt::Display for Matrix<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self[(i, j)].to_string()).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Integer matrix helper, mostly for tests and examples.
pub fn int_matrix(p: u64, rel: u32, rows: &[&[i64]]) -> Matrix<PadicScalar> {
    let like = PadicScalar::zero(p);
    Matrix::from_rows(
        rows.iter().map(|r| r.iter().map(|&x| PadicScalar::from_int(p, x, rel)).collect()).collect(),
        &like,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_identity() {
        let a = int_matrix(5, 10, &[&[1, 2], &[3, 4]]);
        let id = Matrix::identity(2, &PadicScalar::zero(5));
        assert!(a.mul(&id).agrees_with(&a));
        let sq = a.mul(&a);
        assert!(sq.agrees_with(&int_matrix(5, 10, &[&[7, 10], &[15, 22]])));
        assert!(a.try_mul(&int_matrix(5, 10, &[&[1, 2, 3]])).is_err());
    }

    #[test]
    fn poly_evaluation_matches_powers() {
        let a = int_matrix(3, 10, &[&[0, 1], &[2, 5]]);
        let like = PadicScalar::zero(3);
        let c = |n| PadicScalar::from_int(3, n, 10);
        let lhs = a.eval_poly(&[c(2), c(-1), c(4)]);
        let rhs = Matrix::identity(2, &like).scale(&c(2)).sub(&a).add(&a.mul(&a).scale(&c(4)));
        assert!(lhs.agrees_with(&rhs));
    }

    #[test]
    fn column_valuations() {
        let a = int_matrix(2, 10, &[&[4, 0], &[8, 0]]);
        assert_eq!(a.column_valuations(), vec![Valuation::Finite(2), Valuation::Infinity]);
    }
}
