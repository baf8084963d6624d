//! Antisymmetric Fock space over `C^n` in the occupation-bitmask basis.
//!
//! Mode `i` is bit `i`. The creator `a*(h_i)` acts by
//! `a*(h_i) h_I = (-1)^{|{j in I : j < i}|} h_{I ∪ {i}}`, so a basis vector
//! lists its factors in increasing mode order.

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::{sign, Real, C};
use crate::sparse::{AntiLinearMap, SparseOperator, Vector};

/// One-particle space `C^n` with its fixed real basis `h_0 .. h_{n-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModeSpace {
    n_modes: usize,
}

impl ModeSpace {
    pub fn new(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::EmptyModeSpace);
        }
        assert!(n_modes < usize::BITS as usize / 2, "mode count too large for bitmask indexing");
        Ok(Self { n_modes })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Fock dimension `2^n`.
    pub fn dim(&self) -> usize {
        1 << self.n_modes
    }

    fn check_vector<T: Real>(&self, f: &Vector<T>) -> Result<()> {
        if f.len() != self.n_modes {
            return Err(Error::DimensionMismatch { expected: self.n_modes, found: f.len() });
        }
        Ok(())
    }

    /// One-particle basis vector `h_i`.
    pub fn h<T: Real>(&self, i: usize) -> Vector<T> {
        crate::sparse::basis_vector(self.n_modes, i)
    }
}

/// Wedge basis label: bit `i` set iff mode `i` is occupied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockIndex(pub usize);

impl FockIndex {
    pub const VACUUM: FockIndex = FockIndex(0);

    pub fn from_modes(modes: &[usize]) -> Result<Self> {
        let mut mask = 0usize;
        for &m in modes {
            if mask & (1 << m) != 0 {
                return Err(Error::RepeatedMode(m));
            }
            mask |= 1 << m;
        }
        Ok(FockIndex(mask))
    }

    /// Occupied modes in increasing order.
    pub fn modes(self) -> Vec<usize> {
        bits(self.0)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, mode: usize) -> bool {
        self.0 & (1 << mode) != 0
    }

    pub fn is_odd(self) -> bool {
        self.0.count_ones() % 2 == 1
    }
}

/// Set bits of `mask` in increasing order.
pub fn bits(mask: usize) -> Vec<usize> {
    (0..usize::BITS as usize).filter(|&i| mask & (1 << i) != 0).collect()
}

/// Number of occupied modes strictly below `mode`.
#[inline]
pub fn occupied_below(mask: usize, mode: usize) -> u32 {
    (mask & ((1usize << mode) - 1)).count_ones()
}

/// Sorts a wedge product `h_{s_0} ∧ ... ∧ h_{s_k}` into canonical order.
///
/// Returns the bitmask and whether the reordering permutation is odd, or
/// `None` if a mode repeats (the wedge vanishes).
pub fn wedge_sign(seq: &[usize]) -> Option<(usize, bool)> {
    let mut mask = 0usize;
    let mut odd = false;
    for &m in seq {
        if mask & (1 << m) != 0 {
            return None;
        }
        // Moving h_m left past every later-sorted factor already placed.
        odd ^= (mask >> m).count_ones() % 2 == 1;
        mask |= 1 << m;
    }
    Some((mask, odd))
}

/// `a*(h_i)` on the Fock space.
pub fn create_basis_op<T: Real>(space: ModeSpace, i: usize) -> SparseOperator<T> {
    assert!(i < space.n_modes, "mode out of range");
    SparseOperator::from_triplets(
        space.dim(),
        space.dim(),
        (0..space.dim())
            .filter(|&occ| occ & (1 << i) == 0)
            .map(|occ| (occ | (1 << i), occ, C::new(sign::<T>(occupied_below(occ, i) % 2 == 1), T::zero()))),
    )
}

/// `a*(f) = Σ f_i a*(h_i)`, linear in `f`.
pub fn create_op<T: Real>(space: ModeSpace, f: &Vector<T>) -> Result<SparseOperator<T>> {
    space.check_vector(f)?;
    let dim = space.dim();
    let mut trips = Vec::new();
    for (i, &fi) in f.iter().enumerate() {
        if fi.norm_sqr() == T::zero() {
            continue;
        }
        for occ in (0..dim).filter(|&occ| occ & (1 << i) == 0) {
            let s = sign::<T>(occupied_below(occ, i) % 2 == 1);
            trips.push((occ | (1 << i), occ, fi * s));
        }
    }
    Ok(SparseOperator::from_triplets(dim, dim, trips))
}

/// `a(f) = Σ f_i a(h_i)`, linear in `f`; equals `create_op(conj f)*`.
pub fn annihilate_op<T: Real>(space: ModeSpace, f: &Vector<T>) -> Result<SparseOperator<T>> {
    space.check_vector(f)?;
    Ok(create_op(space, &f.map(|z| z.conj()))?.adjoint())
}

/// Parity `Γ h_I = (-1)^{|I|} h_I`.
pub fn parity_op<T: Real>(space: ModeSpace) -> SparseOperator<T> {
    let diag: Vec<C<T>> = (0..space.dim())
        .map(|occ| C::new(sign::<T>(occ.count_ones() % 2 == 1), T::zero()))
        .collect();
    SparseOperator::diagonal(&diag)
}

/// Second quantization `Λ(c) h_I = c h_{i_1} ∧ ... ∧ c h_{i_k}` of a contraction
/// `c : C^{n_in} → C^{n_out}` (rows indexed by output modes).
///
/// The coefficient of `h_J` in `Λ(c) h_I` is the minor `det c[J, I]`.
pub fn second_quantize<T: Real>(
    space_in: ModeSpace,
    space_out: ModeSpace,
    c: &Matrix<T>,
) -> Result<SparseOperator<T>> {
    if c.nrows() != space_out.n_modes {
        return Err(Error::DimensionMismatch { expected: space_out.n_modes, found: c.nrows() });
    }
    if c.ncols() != space_in.n_modes {
        return Err(Error::DimensionMismatch { expected: space_in.n_modes, found: c.ncols() });
    }
    let norm = linalg::largest_singular_value(c);
    if norm > T::one() + crate::scalar::tol(1e-12) {
        return Err(Error::NotAContraction { norm: crate::scalar::to_f64(norm) });
    }
    let mut trips = Vec::new();
    for occ_in in 0..space_in.dim() {
        let cols = bits(occ_in);
        for occ_out in (0..space_out.dim()).filter(|o| o.count_ones() as usize == cols.len()) {
            let rows = bits(occ_out);
            let minor = Matrix::<T>::from_fn(rows.len(), cols.len(), |a, b| c[(rows[a], cols[b])]);
            trips.push((occ_out, occ_in, linalg::determinant(&minor)));
        }
    }
    Ok(SparseOperator::from_triplets(space_out.dim(), space_in.dim(), trips))
}

/// Coordinate conjugation `q` lifted to the Fock space (fixes every `h_I`).
pub fn conjugation_q<T: Real>(space: ModeSpace) -> AntiLinearMap<T> {
    AntiLinearMap::new(SparseOperator::identity(space.dim()))
}
