//! Compressed-row complex sparse matrices and conjugate-linear maps.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use crate::scalar::{cabs, czero, Real, C};

/// Dense complex vector on a Fock or doubled space.
pub type Vector<T> = DVector<C<T>>;

/// Inner product linear in the first argument: `Σ u_i conj(v_i)`.
pub fn inner<T: Real>(u: &Vector<T>, v: &Vector<T>) -> C<T> {
    v.dotc(u)
}

/// Unit vector `e_i` in dimension `dim`.
pub fn basis_vector<T: Real>(dim: usize, i: usize) -> Vector<T> {
    let mut v = Vector::<T>::zeros(dim);
    v[i] = C::new(T::one(), T::zero());
    v
}

/// Complex sparse matrix in compressed-row form.
///
/// Column indices are sorted within each row, there are no duplicates and
/// every stored value has modulus above [`Real::drop_tolerance`].
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator<T: Real> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C<T>>,
}

impl<T: Real> SparseOperator<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![C::new(T::one(), T::zero()); n])
    }

    pub fn diagonal(diag: &[C<T>]) -> Self {
        Self::from_triplets(diag.len(), diag.len(), diag.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets<I>(rows: usize, cols: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, C<T>)>,
    {
        let mut per_row: Vec<BTreeMap<usize, C<T>>> = vec![BTreeMap::new(); rows];
        for (r, c, v) in triplets {
            assert!(r < rows && c < cols, "triplet ({r},{c}) outside {rows}x{cols}");
            *per_row[r].entry(c).or_insert_with(czero) += v;
        }
        let tol = T::drop_tolerance();
        let mut out = Self::zeros(rows, cols);
        for (r, row) in per_row.into_iter().enumerate() {
            for (c, v) in row {
                if cabs(v) > tol {
                    out.indices.push(c);
                    out.values.push(v);
                }
            }
            out.indptr[r + 1] = out.indices.len();
        }
        out
    }

    pub fn from_dense(m: &DMatrix<C<T>>) -> Self {
        let (rows, cols) = m.shape();
        Self::from_triplets(
            rows,
            cols,
            (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c, m[(r, c)]))),
        )
    }

    pub fn to_dense(&self) -> DMatrix<C<T>> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored entries of row `r` as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C<T>)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C<T>)> + '_ {
        (0..self.rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> C<T> {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => czero(),
        }
    }

    /// Entry-wise map followed by re-validation against the drop tolerance.
    fn map_values(&self, f: impl Fn(C<T>) -> C<T>) -> Self {
        Self::from_triplets(self.rows, self.cols, self.triplets().map(|(r, c, v)| (r, c, f(v))))
    }

    pub fn scale(&self, s: C<T>) -> Self {
        self.map_values(|v| v * s)
    }

    pub fn scale_real(&self, s: T) -> Self {
        self.scale(C::new(s, T::zero()))
    }

    /// Entry-wise complex conjugate (not the adjoint).
    pub fn conj(&self) -> Self {
        self.map_values(|v| v.conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.cols, self.rows, self.triplets().map(|(r, c, v)| (c, r, v)))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.cols, self.rows, self.triplets().map(|(r, c, v)| (c, r, v.conj())))
    }

    /// Kronecker product; index of `(i, j)` is `i * other.dim + j`.
    pub fn kron(&self, other: &Self) -> Self {
        let (orows, ocols) = (other.rows, other.cols);
        let trips: Vec<_> = self
            .triplets()
            .flat_map(|(r1, c1, v1)| {
                other.triplets().map(move |(r2, c2, v2)| (r1 * orows + r2, c1 * ocols + c2, v1 * v2))
            })
            .collect();
        Self::from_triplets(self.rows * orows, self.cols * ocols, trips)
    }

    pub fn apply(&self, v: &Vector<T>) -> Vector<T> {
        assert_eq!(v.len(), self.cols, "vector length does not match operator columns");
        Vector::from_fn(self.rows, |r, _| self.row(r).fold(czero(), |acc, (c, a)| acc + a * v[c]))
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let tol = T::drop_tolerance();
        let mut acc = vec![czero::<T>(); rhs.cols];
        let mut touched = vec![false; rhs.cols];
        let mut cols_used = Vec::new();
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for (k, a) in self.row(r) {
                for (c, b) in rhs.row(k) {
                    if !touched[c] {
                        touched[c] = true;
                        cols_used.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            cols_used.sort_unstable();
            for &c in &cols_used {
                if cabs(acc[c]) > tol {
                    out.indices.push(c);
                    out.values.push(acc[c]);
                }
                acc[c] = czero();
                touched[c] = false;
            }
            cols_used.clear();
            out.indptr[r + 1] = out.indices.len();
        }
        out
    }

    fn combine(&self, rhs: &Self, sgn: T) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch");
        let s = C::new(sgn, T::zero());
        Self::from_triplets(
            self.rows,
            self.cols,
            self.triplets().chain(rhs.triplets().map(|(r, c, v)| (r, c, v * s))),
        )
    }

    /// Frobenius norm; an upper bound for the operator norm.
    pub fn frobenius_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, v| acc + v.norm_sqr()).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc.max(cabs(v)))
    }

    /// Hilbert–Schmidt inner product `tr(other* self)`.
    pub fn hs_inner(&self, other: &Self) -> C<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        self.triplets().fold(czero(), |acc, (r, c, v)| acc + v * other.get(r, c).conj())
    }

    pub fn is_diagonal(&self) -> bool {
        self.triplets().all(|(r, c, _)| r == c)
    }

    pub fn diagonal_entries(&self) -> Vec<C<T>> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }
}

/// `ab + ba`.
pub fn anticommutator<T: Real>(a: &SparseOperator<T>, b: &SparseOperator<T>) -> SparseOperator<T> {
    &(a * b) + &(b * a)
}

/// `ab - ba`.
pub fn commutator<T: Real>(a: &SparseOperator<T>, b: &SparseOperator<T>) -> SparseOperator<T> {
    &(a * b) - &(b * a)
}

impl<'a, T: Real> Add<&'a SparseOperator<T>> for &'a SparseOperator<T> {
    type Output = SparseOperator<T>;
    fn add(self, rhs: &'a SparseOperator<T>) -> SparseOperator<T> {
        self.combine(rhs, T::one())
    }
}

impl<'a, T: Real> Sub<&'a SparseOperator<T>> for &'a SparseOperator<T> {
    type Output = SparseOperator<T>;
    fn sub(self, rhs: &'a SparseOperator<T>) -> SparseOperator<T> {
        self.combine(rhs, -T::one())
    }
}

impl<'a, T: Real> Mul<&'a SparseOperator<T>> for &'a SparseOperator<T> {
    type Output = SparseOperator<T>;
    fn mul(self, rhs: &'a SparseOperator<T>) -> SparseOperator<T> {
        self.matmul(rhs)
    }
}

impl<'a, T: Real> Mul<&'a Vector<T>> for &'a SparseOperator<T> {
    type Output = Vector<T>;
    fn mul(self, rhs: &'a Vector<T>) -> Vector<T> {
        self.apply(rhs)
    }
}

impl<T: Real> Neg for &SparseOperator<T> {
    type Output = SparseOperator<T>;
    fn neg(self) -> SparseOperator<T> {
        self.scale_real(-T::one())
    }
}

/// Conjugate-linear operator `v ↦ M · conj(v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AntiLinearMap<T: Real> {
    pub matrix: SparseOperator<T>,
}

impl<T: Real> AntiLinearMap<T> {
    pub fn new(matrix: SparseOperator<T>) -> Self {
        Self { matrix }
    }

    /// Always true; kept so callers can branch on a uniform interface.
    pub fn antilinear(&self) -> bool {
        true
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn apply(&self, v: &Vector<T>) -> Vector<T> {
        self.matrix.apply(&v.map(|z| z.conj()))
    }

    /// `self ∘ rhs`, which is linear.
    pub fn compose(&self, rhs: &AntiLinearMap<T>) -> SparseOperator<T> {
        &self.matrix * &rhs.matrix.conj()
    }

    /// `self ∘ rhs` for linear `rhs`; still conjugate-linear.
    pub fn compose_linear(&self, rhs: &SparseOperator<T>) -> AntiLinearMap<T> {
        Self::new(&self.matrix * &rhs.conj())
    }

    /// `lhs ∘ self` for linear `lhs`.
    pub fn after_linear(&self, lhs: &SparseOperator<T>) -> AntiLinearMap<T> {
        Self::new(lhs * &self.matrix)
    }

    /// `self ∘ x ∘ self`, a linear operator.
    pub fn conjugate(&self, x: &SparseOperator<T>) -> SparseOperator<T> {
        &(&self.matrix * &x.conj()) * &self.matrix.conj()
    }

    /// Adjoint in the sense `⟨Au, v⟩ = conj⟨u, A*v⟩`.
    pub fn adjoint(&self) -> AntiLinearMap<T> {
        Self::new(self.matrix.transpose())
    }

    /// Largest entry-wise difference of the representing matrices.
    pub fn distance(&self, other: &AntiLinearMap<T>) -> T {
        (&self.matrix - &other.matrix).max_abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cr;

    fn c(re: f64, im: f64) -> C<f64> {
        C::new(re, im)
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_cancellations() {
        let m = SparseOperator::<f64>::from_triplets(
            2,
            2,
            vec![(0, 1, c(1.0, 0.0)), (0, 1, c(2.0, 0.0)), (1, 0, c(1.0, 0.0)), (1, 0, c(-1.0, 0.0))],
        );
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), c(3.0, 0.0));
    }

    #[test]
    fn matmul_matches_dense() {
        let a = SparseOperator::<f64>::from_triplets(
            2,
            3,
            vec![(0, 0, c(1.0, 1.0)), (0, 2, c(2.0, 0.0)), (1, 1, c(0.0, -1.0))],
        );
        let b = SparseOperator::<f64>::from_triplets(
            3,
            2,
            vec![(0, 1, c(1.0, 0.0)), (1, 0, c(3.0, 0.0)), (2, 0, c(0.5, 0.5))],
        );
        let dense = a.to_dense() * b.to_dense();
        assert!(((&a * &b).to_dense() - dense).norm() < 1e-15);
    }

    #[test]
    fn kron_index_convention() {
        let a = SparseOperator::<f64>::from_triplets(2, 2, vec![(1, 0, cr(1.0))]);
        let b = SparseOperator::<f64>::from_triplets(2, 2, vec![(0, 1, cr(2.0))]);
        let k = a.kron(&b);
        assert_eq!(k.get(2, 1), cr(2.0));
        assert_eq!(k.nnz(), 1);
    }

    #[test]
    fn antilinear_composition_is_linear() {
        let m = SparseOperator::<f64>::from_triplets(2, 2, vec![(0, 1, c(0.0, 1.0)), (1, 0, c(0.0, 1.0))]);
        let a = AntiLinearMap::new(m);
        let sq = a.compose(&a);
        let v = Vector::from_vec(vec![c(1.0, 2.0), c(-0.5, 0.25)]);
        let direct = a.apply(&a.apply(&v));
        assert!((sq.apply(&v) - direct).norm() < 1e-15);
    }

    #[test]
    fn antilinear_adjoint_relation() {
        let m = SparseOperator::<f64>::from_triplets(
            2,
            2,
            vec![(0, 0, c(1.0, 2.0)), (0, 1, c(0.0, 1.0)), (1, 1, c(-3.0, 0.5))],
        );
        let a = AntiLinearMap::new(m);
        let u = Vector::from_vec(vec![c(0.3, -1.0), c(2.0, 0.1)]);
        let v = Vector::from_vec(vec![c(-1.0, 0.7), c(0.4, 0.4)]);
        let lhs = inner(&a.apply(&u), &v);
        let rhs = inner(&u, &a.adjoint().apply(&v)).conj();
        assert!((lhs - rhs).norm() < 1e-14);
    }
}
