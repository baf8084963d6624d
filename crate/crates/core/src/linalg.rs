//! Dense kernels on top of nalgebra: null spaces, ranks, polar decomposition.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::scalar::{cabs, czero, Real, C};

pub type Matrix<T> = DMatrix<C<T>>;

/// Singular values of `m` (unsorted is fine for callers).
pub fn singular_values<T: Real>(m: &Matrix<T>) -> Vec<T> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

pub fn largest_singular_value<T: Real>(m: &Matrix<T>) -> T {
    singular_values(m).into_iter().fold(T::zero(), |a, b| a.max(b))
}

/// Result of a null-space computation on one dense block.
pub struct NullSpace<T: Real> {
    /// Orthonormal columns spanning the numerical kernel.
    pub basis: Matrix<T>,
    /// Largest singular value classified as zero (0 when none).
    pub largest_null: T,
    /// Smallest singular value classified as nonzero (`None` when none).
    pub smallest_kept: Option<T>,
}

/// Right null space of `m`: singular values `<= threshold` count as zero.
pub fn null_space<T: Real>(m: &Matrix<T>, threshold: T) -> NullSpace<T> {
    null_space_by(m, |_| threshold)
}

/// Right null space with the threshold `rel_tol * σ_max`.
pub fn relative_null_space<T: Real>(m: &Matrix<T>, rel_tol: T) -> NullSpace<T> {
    null_space_by(m, |smax| rel_tol * smax)
}

fn null_space_by<T: Real>(m: &Matrix<T>, threshold: impl Fn(T) -> T) -> NullSpace<T> {
    let n = m.ncols();
    if n == 0 {
        return NullSpace { basis: Matrix::zeros(0, 0), largest_null: T::zero(), smallest_kept: None };
    }
    // Square the problem up: zero rows so that the SVD returns a complete right
    // basis, or the R factor of a tall matrix (same singular values and right
    // singular vectors, much cheaper to decompose).
    let square = match m.nrows().cmp(&n) {
        std::cmp::Ordering::Less => {
            let mut p = Matrix::<T>::zeros(n, n);
            p.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
            p
        }
        std::cmp::Ordering::Equal => m.clone(),
        std::cmp::Ordering::Greater => m.clone().qr().r(),
    };
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let smax = svd.singular_values.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let threshold = threshold(smax);
    let mut cols = Vec::new();
    let mut largest_null = T::zero();
    let mut smallest_kept: Option<T> = None;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= threshold {
            largest_null = largest_null.max(s);
            cols.push(v_t.row(k).adjoint());
        } else {
            smallest_kept = Some(smallest_kept.map_or(s, |x: T| x.min(s)));
        }
    }
    let basis = if cols.is_empty() { Matrix::zeros(n, 0) } else { Matrix::from_columns(&cols) };
    NullSpace { basis, largest_null, smallest_kept }
}

/// Numerical rank with singular values above `rel_tol * σ_max`.
pub fn rank<T: Real>(m: &Matrix<T>, rel_tol: T) -> usize {
    let sv = singular_values(m);
    let smax = sv.iter().copied().fold(T::zero(), |a, b| a.max(b));
    if smax == T::zero() {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Orthonormal basis of the column span of `m`.
pub fn column_span<T: Real>(m: &Matrix<T>, rel_tol: T) -> Matrix<T> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return Matrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let cols: Vec<_> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| smax > T::zero() && s > rel_tol * smax)
        .map(|(k, _)| u.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        Matrix::zeros(m.nrows(), 0)
    } else {
        Matrix::from_columns(&cols)
    }
}

/// Polar decomposition `m = U P` with `U` unitary and `P = (m* m)^{1/2}`.
///
/// Invertible matrices use the scaled Newton iteration `X ← (ζX + X^{-*}/ζ)/2`,
/// which keeps `U` unitary to working precision even when `m` has many equal
/// singular values (where the SVD route loses orthogonality). Singular or
/// non-square input falls back to the SVD.
pub fn polar<T: Real>(m: &Matrix<T>) -> (Matrix<T>, Matrix<T>) {
    newton_polar(m).unwrap_or_else(|| svd_polar(m))
}

fn newton_polar<T: Real>(m: &Matrix<T>) -> Option<(Matrix<T>, Matrix<T>)> {
    if !m.is_square() || m.nrows() == 0 {
        return None;
    }
    let half: T = nalgebra::convert(0.5);
    let eps = T::default_epsilon() * nalgebra::convert::<f64, T>(m.nrows() as f64).sqrt();
    let mut x = m.clone();
    for k in 0..100 {
        let inv = x.clone().try_inverse()?;
        // Frobenius scaling speeds up the early iterations; drop it near convergence.
        let zeta = if k < 20 { (inv.norm() / x.norm()).sqrt() } else { T::one() };
        let next = (&x * C::new(zeta * half, T::zero())) + inv.adjoint() * C::new(half / zeta, T::zero());
        let delta = (&next - &x).norm();
        x = next;
        if delta <= eps * x.norm() {
            let p = x.adjoint() * m;
            let p = (&p + p.adjoint()) * C::new(half, T::zero());
            return Some((x, p));
        }
    }
    None
}

fn svd_polar<T: Real>(m: &Matrix<T>) -> (Matrix<T>, Matrix<T>) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u");
    let v_t = svd.v_t.expect("v_t");
    let s = Matrix::<T>::from_diagonal(&svd.singular_values.map(|x| C::new(x, T::zero())));
    let unitary = &u * &v_t;
    let positive = v_t.adjoint() * s * &v_t;
    (unitary, positive)
}

pub fn determinant<T: Real>(m: &Matrix<T>) -> C<T> {
    if m.nrows() == 0 {
        return C::new(T::one(), T::zero());
    }
    m.clone().lu().determinant()
}

/// `exp(g)` for anti-Hermitian `g`, via the spectral decomposition of `i g`.
pub fn expm_antihermitian<T: Real>(g: &Matrix<T>) -> Matrix<T> {
    let i = C::new(T::zero(), T::one());
    let h = g * i;
    let h = (&h + h.adjoint()) * C::new(nalgebra::convert(0.5), T::zero());
    let eig = SymmetricEigen::new(h);
    let phases = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&mu| C::new(mu.cos(), -mu.sin())),
    );
    &eig.eigenvectors * Matrix::<T>::from_diagonal(&phases) * eig.eigenvectors.adjoint()
}

/// Least-squares solution of `a x = b` and the residual norm.
pub fn least_squares<T: Real>(a: &Matrix<T>, b: &DVector<C<T>>) -> (DVector<C<T>>, T) {
    if a.ncols() == 0 {
        return (DVector::zeros(0), b.norm());
    }
    let svd = a.clone().svd(true, true);
    let eps = svd.singular_values.iter().copied().fold(T::zero(), |x, y| x.max(y)) * nalgebra::convert(1e-12);
    let x = svd.solve(b, eps).expect("both factors computed");
    let r = (a * &x - b).norm();
    (x, r)
}

/// Smallest Hermitian eigenvalue.
pub fn min_hermitian_eigenvalue<T: Real>(m: &Matrix<T>) -> T {
    let h = (m + m.adjoint()) * C::new(nalgebra::convert(0.5), T::zero());
    SymmetricEigen::new(h).eigenvalues.iter().copied().fold(T::max_value().unwrap(), |a, b| a.min(b))
}

/// Largest entry modulus.
pub fn max_abs<T: Real>(m: &Matrix<T>) -> T {
    m.iter().fold(T::zero(), |a, &z| a.max(cabs(z)))
}

/// Zero matrix helper used by builders.
pub fn zeros<T: Real>(r: usize, c: usize) -> Matrix<T> {
    Matrix::from_element(r, c, czero())
}
