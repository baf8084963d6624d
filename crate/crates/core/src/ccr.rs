//! Truncated bosonic Fock space, Weyl operators and the quasi-free CCR state
//! with symbol `T` in its doubled representation.
//!
//! Conventions: `(f, g) = Σ conj(f_i) g_i`, `a(f) = Σ conj(f_i) a_i`,
//! `[a(f), a*(g)] = (f, g)`, `W(f) = exp(a*(f) - a(f))`, so that
//! `W(f) W(g) = e^{-i Im (f,g)} W(f+g)`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::scalar::{cabs, from_usize, real, tol, Real, C};
use crate::sparse::{SparseOperator, Vector};

/// Occupation-number basis with at most `cutoff` quanta in total.
#[derive(Clone, Debug)]
pub struct BosonSpace {
    n_modes: usize,
    cutoff: usize,
    basis: Vec<Vec<usize>>,
    index: HashMap<Vec<usize>, usize>,
}

fn compositions(n: usize, total: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if prefix.len() + 1 == n {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for k in (0..=total).rev() {
        prefix.push(k);
        compositions(n, total - k, prefix, out);
        prefix.pop();
    }
}

impl BosonSpace {
    pub fn new(n_modes: usize, cutoff: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::EmptyModeSpace);
        }
        let mut basis = Vec::new();
        for total in 0..=cutoff {
            compositions(n_modes, total, &mut Vec::new(), &mut basis);
        }
        let index = basis.iter().enumerate().map(|(i, occ)| (occ.clone(), i)).collect();
        Ok(Self { n_modes, cutoff, basis, index })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn occupation(&self, idx: usize) -> &[usize] {
        &self.basis[idx]
    }

    pub fn index_of(&self, occ: &[usize]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    pub fn total(&self, idx: usize) -> usize {
        self.basis[idx].iter().sum()
    }

    pub fn vacuum<T: Real>(&self) -> Vector<T> {
        let mut v = Vector::zeros(self.dim());
        v[0] = C::new(T::one(), T::zero());
        v
    }

    /// `a*_i`, dropping states that would exceed the cutoff.
    pub fn creation<T: Real>(&self, i: usize) -> SparseOperator<T> {
        let trips = (0..self.dim()).filter_map(|k| {
            let mut occ = self.basis[k].clone();
            occ[i] += 1;
            let n = occ[i];
            self.index_of(&occ).map(|r| (r, k, C::new(from_usize::<T>(n).sqrt(), T::zero())))
        });
        SparseOperator::from_triplets(self.dim(), self.dim(), trips)
    }

    pub fn number_op<T: Real>(&self) -> SparseOperator<T> {
        let diag: Vec<C<T>> = (0..self.dim()).map(|k| C::new(from_usize(self.total(k)), T::zero())).collect();
        SparseOperator::diagonal(&diag)
    }

    fn check_len(&self, f: &Vector<impl Real>) -> Result<()> {
        if f.len() != self.n_modes {
            return Err(Error::DimensionMismatch { expected: self.n_modes, found: f.len() });
        }
        Ok(())
    }

    /// `a*(f) = Σ f_i a*_i`.
    pub fn create_op<T: Real>(&self, f: &Vector<T>) -> Result<SparseOperator<T>> {
        self.check_len(f)?;
        let mut op = SparseOperator::zeros(self.dim(), self.dim());
        for (i, &c) in f.iter().enumerate() {
            if c != C::new(T::zero(), T::zero()) {
                op = &op + &self.creation::<T>(i).scale(c);
            }
        }
        Ok(op)
    }

    /// `a(f) = a*(f)*`.
    pub fn annihilate_op<T: Real>(&self, f: &Vector<T>) -> Result<SparseOperator<T>> {
        Ok(self.create_op(f)?.adjoint())
    }
}

/// `(f, g) = Σ conj(f_i) g_i`.
pub fn pairing<T: Real>(f: &Vector<T>, g: &Vector<T>) -> C<T> {
    f.dotc(g)
}

/// `e^{x} - Σ_{k≤N} x^k/k!` for `x ≥ 0`.
pub fn exp_tail<T: Real>(x: T, cutoff: usize) -> T {
    let mut term = T::one();
    let mut partial = T::one();
    for k in 1..=cutoff {
        term = term * x / from_usize(k);
        partial += term;
    }
    (x.exp() - partial).max(T::zero())
}

/// Truncated `exp(f) = Σ f^{⊗k}/√k!` and its norm-squared defect
/// `e^{‖f‖²} - Σ_{k≤N} ‖f‖^{2k}/k!`.
pub fn exp_vector<T: Real>(space: &BosonSpace, f: &Vector<T>) -> Result<(Vector<T>, T)> {
    space.check_len(f)?;
    let mut v = Vector::zeros(space.dim());
    for (k, occ) in space.basis.iter().enumerate() {
        let mut c = C::new(T::one(), T::zero());
        for (i, &n) in occ.iter().enumerate() {
            let mut fact = T::one();
            for j in 1..=n {
                c *= f[i];
                fact *= from_usize::<T>(j);
            }
            c = c.unscale(fact.sqrt());
        }
        v[k] = c;
    }
    Ok((v, exp_tail(f.norm_squared(), space.cutoff)))
}

/// `exp(a*(f) - a(f))` on the truncated space.
pub fn weyl_matrix<T: Real>(space: &BosonSpace, f: &Vector<T>) -> Result<Matrix<T>> {
    let gen = &space.create_op(f)? - &space.annihilate_op(f)?;
    Ok(linalg::expm_antihermitian(&gen.to_dense()))
}

pub fn weyl_op<T: Real>(space: &BosonSpace, f: &Vector<T>) -> Result<SparseOperator<T>> {
    Ok(SparseOperator::from_dense(&weyl_matrix(space, f)?))
}

/// `‖W*W - 1‖_max`.
pub fn unitarity_defect<T: Real>(w: &Matrix<T>) -> T {
    linalg::max_abs(&(w.adjoint() * w - Matrix::<T>::identity(w.nrows(), w.ncols())))
}

/// Diagonal symbol `T ≥ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct BosonCovariance<T: Real> {
    t: Vec<T>,
}

impl<T: Real> BosonCovariance<T> {
    pub fn new(t: Vec<T>) -> Result<Self> {
        if t.is_empty() {
            return Err(Error::EmptyModeSpace);
        }
        if let Some(bad) = t.iter().find(|x| !(**x >= T::zero()) || !x.is_finite()) {
            return Err(Error::InvalidCovariance(format!("symbol entries must be finite and nonnegative, got {bad:?}")));
        }
        Ok(Self { t })
    }

    /// `T = λ/(1-λ)` for `λ ∈ (0, 1)`.
    pub fn from_lambda(lambdas: &[T]) -> Result<Self> {
        if let Some(bad) = lambdas.iter().find(|l| !(**l > T::zero() && **l < T::one())) {
            return Err(Error::InvalidCovariance(format!("λ must lie in (0, 1), got {bad:?}")));
        }
        Self::new(lambdas.iter().map(|&l| l / (T::one() - l)).collect())
    }

    pub fn symbol(&self) -> &[T] {
        &self.t
    }

    pub fn n_modes(&self) -> usize {
        self.t.len()
    }

    pub fn injective(&self) -> bool {
        self.t.iter().all(|&x| x > T::zero())
    }

    /// `(1+T)^{1/2} f`.
    pub fn left(&self, f: &Vector<T>) -> Vector<T> {
        Vector::from_iterator(f.len(), f.iter().zip(&self.t).map(|(c, &t)| c.scale((T::one() + t).sqrt())))
    }

    /// `T^{1/2} f`.
    pub fn right(&self, f: &Vector<T>) -> Vector<T> {
        Vector::from_iterator(f.len(), f.iter().zip(&self.t).map(|(c, &t)| c.scale(t.sqrt())))
    }

    /// `⟨f, (1+2T) f⟩`.
    pub fn quadratic(&self, f: &Vector<T>) -> T {
        f.iter().zip(&self.t).map(|(c, &t)| c.norm_sqr() * (T::one() + t + t)).fold(T::zero(), |a, b| a + b)
    }
}

/// `A ⊗ B` on `F₊ ⊗ F₊`, kept factored.
#[derive(Clone, Debug)]
pub struct DoubledOperator<T: Real> {
    pub left: Matrix<T>,
    pub right: Matrix<T>,
}

impl<T: Real> DoubledOperator<T> {
    pub fn dim(&self) -> usize {
        self.left.nrows() * self.right.nrows()
    }

    /// `(A⊗B) v` with `v[i·d + j] = X[i, j]` ↦ `A X Bᵀ`.
    pub fn apply(&self, v: &Vector<T>) -> Vector<T> {
        let (dl, dr) = (self.left.nrows(), self.right.nrows());
        let x = Matrix::<T>::from_fn(dl, dr, |i, j| v[i * dr + j]);
        let y = &self.left * x * self.right.transpose();
        Vector::from_fn(dl * dr, |k, _| y[(k / dr, k % dr)])
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self { left: &self.left * &other.left, right: &self.right * &other.right }
    }

    pub fn to_sparse(&self) -> SparseOperator<T> {
        SparseOperator::from_dense(&self.left).kron(&SparseOperator::from_dense(&self.right))
    }

    /// `⟨Ω⊗Ω, (A⊗B) Ω⊗Ω⟩ = A₀₀ B₀₀`.
    pub fn vacuum_expectation(&self) -> C<T> {
        self.left[(0, 0)] * self.right[(0, 0)]
    }

    pub fn vacuum_vector(&self) -> Vector<T> {
        let mut v = Vector::zeros(self.dim());
        v[0] = C::new(T::one(), T::zero());
        self.apply(&v)
    }
}

/// `π_T(W(f)) = W((1+T)^{1/2} f) ⊗ W(q T^{1/2} f)`.
pub fn doubled_weyl_rep<T: Real>(space: &BosonSpace, cov: &BosonCovariance<T>, f: &Vector<T>) -> Result<DoubledOperator<T>> {
    if cov.n_modes() != space.n_modes() {
        return Err(Error::DimensionMismatch { expected: space.n_modes(), found: cov.n_modes() });
    }
    Ok(DoubledOperator {
        left: weyl_matrix(space, &cov.left(f))?,
        right: weyl_matrix(space, &cov.right(f).map(|c| c.conj()))?,
    })
}

/// `W(T^{1/2} g) ⊗ W(q (1+T)^{1/2} g)`, which commutes with every `π_T(W(f))`.
pub fn commutant_weyl<T: Real>(space: &BosonSpace, cov: &BosonCovariance<T>, g: &Vector<T>) -> Result<DoubledOperator<T>> {
    Ok(DoubledOperator {
        left: weyl_matrix(space, &cov.right(g))?,
        right: weyl_matrix(space, &cov.left(g).map(|c| c.conj()))?,
    })
}

/// `e^{-i Im (f, g)}`.
pub fn weyl_phase<T: Real>(f: &Vector<T>, g: &Vector<T>) -> C<T> {
    let im = pairing(f, g).im;
    C::new(im.cos(), -im.sin())
}

/// Normalized weight of a coherent state with `‖f‖² = x` beyond the cutoff.
pub fn coherent_tail<T: Real>(x: T, cutoff: usize) -> T {
    exp_tail(x, cutoff) * (-x).exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateReading {
    /// `exp(-½‖(1+2T)^{1/2} f‖²)`.
    Squared,
    /// `exp(-½‖(1+2T)^{1/2} f‖)`.
    Literal,
    Neither,
}

#[derive(Clone, Debug)]
pub struct StateSample<T> {
    pub norm: T,
    pub computed: C<T>,
    pub squared: T,
    pub literal: T,
    /// Tolerance implied by the truncation (both legs).
    pub tolerance: T,
}

#[derive(Clone, Debug)]
pub struct CcrStateReport<T> {
    pub samples: Vec<StateSample<T>>,
    pub squared_error: T,
    pub literal_error: T,
    pub reading: StateReading,
}

/// Truncation tolerance for `⟨Ω⊗Ω, π_T(W(f)) Ω⊗Ω⟩`.
pub fn state_tolerance<T: Real>(space: &BosonSpace, cov: &BosonCovariance<T>, f: &Vector<T>) -> T {
    let tail = coherent_tail(cov.left(f).norm_squared(), space.cutoff()) + coherent_tail(cov.right(f).norm_squared(), space.cutoff());
    (tail.sqrt() * real(4.0)).max(tol(1e-12))
}

pub fn ccr_state_check<T: Real>(space: &BosonSpace, cov: &BosonCovariance<T>, fs: &[Vector<T>]) -> Result<CcrStateReport<T>> {
    let half: T = real(0.5);
    let mut samples = Vec::new();
    let (mut sq_err, mut lit_err) = (T::zero(), T::zero());
    let (mut sq_ok, mut lit_ok) = (true, true);
    for f in fs {
        let computed = doubled_weyl_rep(space, cov, f)?.vacuum_expectation();
        let q = cov.quadratic(f);
        let squared = (-half * q).exp();
        let literal = (-half * q.sqrt()).exp();
        let tolerance = state_tolerance(space, cov, f);
        let (es, el) = (cabs(computed - C::new(squared, T::zero())), cabs(computed - C::new(literal, T::zero())));
        sq_err = sq_err.max(es);
        lit_err = lit_err.max(el);
        sq_ok &= es <= tolerance;
        lit_ok &= el <= tolerance;
        samples.push(StateSample { norm: f.norm(), computed, squared, literal, tolerance });
    }
    let reading = match (sq_ok, lit_ok) {
        (true, false) => StateReading::Squared,
        (false, true) => StateReading::Literal,
        (true, true) if sq_err <= lit_err => StateReading::Squared,
        (true, true) => StateReading::Literal,
        _ => StateReading::Neither,
    };
    Ok(CcrStateReport { samples, squared_error: sq_err, literal_error: lit_err, reading })
}

/// `max |([a(f), a*(g)] - (f,g)) ψ|` over basis states with at most `N-1` quanta.
pub fn truncated_ccr_error<T: Real>(space: &BosonSpace, f: &Vector<T>, g: &Vector<T>) -> Result<T> {
    let a = space.annihilate_op(f)?;
    let ad = space.create_op(g)?;
    let comm = &(&a * &ad) - &(&ad * &a);
    let expected = SparseOperator::identity(space.dim()).scale(pairing(f, g));
    let diff = &comm - &expected;
    Ok(diff
        .triplets()
        .filter(|&(_, c, _)| space.total(c) < space.cutoff())
        .fold(T::zero(), |m, (_, _, v)| m.max(cabs(v))))
}

/// Weyl relation defect on the vacuum column:
/// `‖π(W(f))π(W(g))Ω - e^{-i Im(f,g)} π(W(f+g))Ω‖`.
pub fn weyl_relation_error<T: Real>(space: &BosonSpace, cov: &BosonCovariance<T>, f: &Vector<T>, g: &Vector<T>) -> Result<T> {
    let wf = doubled_weyl_rep(space, cov, f)?;
    let wg = doubled_weyl_rep(space, cov, g)?;
    let wfg = doubled_weyl_rep(space, cov, &(f + g))?;
    let lhs = wf.compose(&wg).vacuum_vector();
    let rhs = wfg.vacuum_vector() * weyl_phase(f, g);
    Ok((lhs - rhs).norm())
}

/// `|⟨Ω, π(W(f))π(W(g))Ω⟩ / ⟨Ω, π(W(f+g))Ω⟩ - e^{-i Im(f,g)}|`: the phase
/// read off the vacuum matrix elements against the predicted one.
pub fn weyl_phase_error<T: Real>(space: &BosonSpace, cov: &BosonCovariance<T>, f: &Vector<T>, g: &Vector<T>) -> Result<T> {
    let lhs = doubled_weyl_rep(space, cov, f)?.compose(&doubled_weyl_rep(space, cov, g)?).vacuum_expectation();
    let rhs = doubled_weyl_rep(space, cov, &(f + g))?.vacuum_expectation();
    Ok(cabs(lhs / rhs - weyl_phase(f, g)))
}

/// `‖[π(W(f)), W'(g)] Ω⊗Ω‖` for the commutant candidate `W'(g)`.
pub fn commutant_error<T: Real>(space: &BosonSpace, cov: &BosonCovariance<T>, f: &Vector<T>, g: &Vector<T>) -> Result<T> {
    let x = doubled_weyl_rep(space, cov, f)?;
    let y = commutant_weyl(space, cov, g)?;
    Ok((x.compose(&y).vacuum_vector() - y.compose(&x).vacuum_vector()).norm())
}

/// Smallest eigenvalue of the Gram matrix of `{π_T(W(f_i)) Ω⊗Ω}`.
pub fn gram_min_eigenvalue<T: Real>(space: &BosonSpace, cov: &BosonCovariance<T>, fs: &[Vector<T>]) -> Result<T> {
    let vs: Vec<Vector<T>> = fs.iter().map(|f| Ok(doubled_weyl_rep(space, cov, f)?.vacuum_vector())).collect::<Result<_>>()?;
    let g = Matrix::<T>::from_fn(vs.len(), vs.len(), |i, j| vs[j].dotc(&vs[i]));
    Ok(linalg::min_hermitian_eigenvalue(&g))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h1() -> Vector<f64> {
        Vector::from_vec(vec![C::new(1.0, 0.0)])
    }

    #[test]
    fn dimension_is_binomial() {
        assert_eq!(BosonSpace::new(1, 20).unwrap().dim(), 21);
        assert_eq!(BosonSpace::new(2, 12).unwrap().dim(), 91);
        assert_eq!(BosonSpace::new(3, 4).unwrap().dim(), 35);
        assert!(matches!(BosonSpace::new(0, 3), Err(Error::EmptyModeSpace)));
    }

    #[test]
    fn number_operator_commutes_with_truncation() {
        let s = BosonSpace::new(2, 5).unwrap();
        let n = s.number_op::<f64>();
        assert!(n.is_diagonal());
        assert_eq!(s.total(s.dim() - 1), 5);
    }

    #[test]
    fn exp_vector_examples() {
        let s = BosonSpace::new(1, 2).unwrap();
        let (v, defect) = exp_vector(&s, &Vector::<f64>::zeros(1)).unwrap();
        assert_eq!(v, s.vacuum());
        assert_eq!(defect, 0.0);
        let (v, _) = exp_vector(&s, &h1()).unwrap();
        assert!((v[0].re - 1.0).abs() < 1e-15 && (v[1].re - 1.0).abs() < 1e-15);
        assert!((v[2].re - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn exp_vector_overlap() {
        let s = BosonSpace::new(2, 25).unwrap();
        let f = Vector::from_vec(vec![C::new(0.4, 0.1), C::new(-0.2, 0.3)]);
        let g = Vector::from_vec(vec![C::new(0.1, -0.5), C::new(0.3, 0.0)]);
        let (ef, tf) = exp_vector(&s, &f).unwrap();
        let (eg, tg) = exp_vector(&s, &g).unwrap();
        let exact = pairing(&g, &f).exp();
        assert!((ef.dotc(&eg).conj() - exact).norm() < f64::sqrt(tf * tg) + 1e-14);
    }

    #[test]
    fn weyl_basics() {
        let s = BosonSpace::new(1, 20).unwrap();
        let w0 = weyl_matrix(&s, &Vector::<f64>::zeros(1)).unwrap();
        assert!(linalg::max_abs(&(w0 - Matrix::identity(21, 21))) < 1e-13);
        let f = h1().scale(0.5);
        let w = weyl_matrix(&s, &f).unwrap();
        assert!((w[(0, 0)].re - (-0.125f64).exp()).abs() < 1e-10);
        assert!(unitarity_defect(&w) < 1e-12);
        let wm = weyl_matrix(&s, &(-&f)).unwrap();
        let prod = &w * &wm;
        assert!((prod[(0, 0)] - C::new(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn doubled_vacuum_expectation() {
        let s = BosonSpace::new(1, 20).unwrap();
        let cov = BosonCovariance::new(vec![1.0]).unwrap();
        let x = doubled_weyl_rep(&s, &cov, &h1()).unwrap().vacuum_expectation();
        assert!((x.re - (-1.5f64).exp()).abs() < 1e-6 && x.im.abs() < 1e-12);
        let id = doubled_weyl_rep(&s, &cov, &Vector::zeros(1)).unwrap();
        assert!((id.vacuum_expectation() - C::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn state_reading_is_squared() {
        let s = BosonSpace::new(1, 20).unwrap();
        let cov = BosonCovariance::new(vec![1.0]).unwrap();
        let r = ccr_state_check(&s, &cov, &[h1(), h1().scale(0.6)]).unwrap();
        assert_eq!(r.reading, StateReading::Squared);
        assert!(r.literal_error > 0.1);
        let zero = ccr_state_check(&s, &cov, &[Vector::zeros(1)]).unwrap();
        assert!((zero.samples[0].squared - 1.0).abs() < 1e-15 && (zero.samples[0].literal - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weyl_relation_phase() {
        let s = BosonSpace::new(1, 20).unwrap();
        let cov = BosonCovariance::new(vec![1.0]).unwrap();
        let f = h1().scale(0.4);
        let g = Vector::from_vec(vec![C::new(0.0, 0.3)]);
        assert!(weyl_phase(&f, &g).im.abs() > 0.1);
        assert!(weyl_relation_error(&s, &cov, &f, &g).unwrap() < 1e-6);
        assert!(weyl_phase_error(&s, &cov, &h1(), &Vector::from_vec(vec![C::new(0.0, 1.0)])).unwrap() < 1e-6);
    }

    #[test]
    fn truncated_ccr_exact_below_cutoff() {
        let s = BosonSpace::new(2, 6).unwrap();
        let f = Vector::from_vec(vec![C::new(0.3, 0.2), C::new(-0.5, 0.1)]);
        let g = Vector::from_vec(vec![C::new(0.7, 0.0), C::new(0.1, -0.4)]);
        assert!(truncated_ccr_error(&s, &f, &g).unwrap() < 1e-14);
    }

    #[test]
    fn commutant_candidate_and_positivity() {
        let s = BosonSpace::new(1, 24).unwrap();
        let cov = BosonCovariance::from_lambda(&[0.3]).unwrap();
        let f = h1().scale(0.5);
        let g = Vector::from_vec(vec![C::new(0.2, 0.3)]);
        assert!(commutant_error(&s, &cov, &f, &g).unwrap() < 1e-8);
        let fs = [h1().scale(0.2), g.clone(), f.clone(), Vector::zeros(1)];
        assert!(gram_min_eigenvalue(&s, &cov, &fs).unwrap() > -1e-10);
    }

    #[test]
    fn covariance_validation() {
        assert!(BosonCovariance::new(vec![-0.1]).is_err());
        assert!(BosonCovariance::<f64>::from_lambda(&[1.0]).is_err());
        let c = BosonCovariance::from_lambda(&[0.5]).unwrap();
        assert!((c.symbol()[0] - 1.0f64).abs() < 1e-15 && c.injective());
    }
}
