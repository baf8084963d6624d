//! Quasi-free states of the CAR algebra and their doubled (GNS) representation.
//!
//! The doubled space is `F(H) ⊗ F(H)` with basis index `left * 2^n + right`.
//! For a diagonal symbol `R = diag(λ)`:
//!
//! ```text
//! a_R(f) = a((1-R)^{1/2} f) ⊗ Γ + 1 ⊗ a*(q R^{1/2} f)
//! b_R(h) = a(R^{1/2} h) ⊗ Γ - 1 ⊗ a*(q (1-R)^{1/2} h)
//! ```
//!
//! Both are linear in their argument; `a*_R(f)` means `a_R(f)*`.

use crate::error::{Error, Result};
use crate::fock::{self, bits, ModeSpace};
use crate::linalg::{self, Matrix};
use crate::scalar::{real, to_f64, tol, Real, C};
use crate::sparse::{anticommutator, basis_vector, commutator, inner, SparseOperator, Vector};

/// Diagonal symbol `R` with eigenvalues `λ_i ∈ [ε, 1-ε]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Covariance<T: Real> {
    lambdas: Vec<T>,
    epsilon: T,
    allow_half: bool,
}

impl<T: Real> Covariance<T> {
    pub const DEFAULT_EPSILON: f64 = 1e-6;

    /// Symbol with `λ_i ≠ 1/2`.
    pub fn new(lambdas: Vec<T>) -> Result<Self> {
        Self::build(lambdas, real(Self::DEFAULT_EPSILON), false)
    }

    /// Symbol that may contain the excluded value `λ = 1/2`.
    pub fn allowing_half(lambdas: Vec<T>) -> Result<Self> {
        Self::build(lambdas, real(Self::DEFAULT_EPSILON), true)
    }

    pub fn with_epsilon(lambdas: Vec<T>, epsilon: T, allow_half: bool) -> Result<Self> {
        Self::build(lambdas, epsilon, allow_half)
    }

    fn build(lambdas: Vec<T>, epsilon: T, allow_half: bool) -> Result<Self> {
        if lambdas.is_empty() {
            return Err(Error::InvalidCovariance("no modes".into()));
        }
        let half: T = real(0.5);
        if !(epsilon > T::zero() && epsilon < half) {
            return Err(Error::InvalidCovariance(format!("margin {} must lie in (0, 1/2)", to_f64(epsilon))));
        }
        for (i, &l) in lambdas.iter().enumerate() {
            if !(l >= epsilon && l <= T::one() - epsilon) {
                return Err(Error::InvalidCovariance(format!(
                    "λ_{i} = {} outside [ε, 1-ε] with ε = {}",
                    to_f64(l),
                    to_f64(epsilon)
                )));
            }
            if l == half && !allow_half {
                return Err(Error::InvalidCovariance(format!("λ_{i} = 1/2 is excluded unless explicitly allowed")));
            }
        }
        Ok(Self { lambdas, epsilon, allow_half })
    }

    pub fn lambdas(&self) -> &[T] {
        &self.lambdas
    }

    pub fn lambda(&self, i: usize) -> T {
        self.lambdas[i]
    }

    pub fn n_modes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn allow_half(&self) -> bool {
        self.allow_half
    }

    pub fn has_half(&self) -> bool {
        let half: T = real(0.5);
        self.lambdas.iter().any(|&l| l == half)
    }

    /// `R f`.
    pub fn apply(&self, f: &Vector<T>) -> Vector<T> {
        Vector::from_fn(f.len(), |i, _| f[i] * self.lambdas[i])
    }

    /// `A f = (1-R)^{1/2} f`.
    pub fn apply_a(&self, f: &Vector<T>) -> Vector<T> {
        Vector::from_fn(f.len(), |i, _| f[i] * (T::one() - self.lambdas[i]).sqrt())
    }

    /// `R^{1/2} f` (the operator `B = q R^{1/2}` without the conjugation).
    pub fn apply_sqrt(&self, f: &Vector<T>) -> Vector<T> {
        Vector::from_fn(f.len(), |i, _| f[i] * self.lambdas[i].sqrt())
    }
}

/// `δ_{mn} det(⟨R g_i, f_j⟩)`, the quasi-free moment of
/// `a*(f_m) ... a*(f_1) a(g_1) ... a(g_n)`.
pub fn quasifree_moment<T: Real>(cov: &Covariance<T>, fs: &[Vector<T>], gs: &[Vector<T>]) -> Result<C<T>> {
    let n = cov.n_modes();
    for v in fs.iter().chain(gs) {
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: v.len() });
        }
    }
    if fs.len() != gs.len() {
        return Ok(C::new(T::zero(), T::zero()));
    }
    let m = fs.len();
    let rg: Vec<_> = gs.iter().map(|g| cov.apply(g)).collect();
    let gram = Matrix::<T>::from_fn(m, m, |i, j| inner(&rg[i], &fs[j]));
    Ok(linalg::determinant(&gram))
}

/// Normal-ordered monomial `a*_R(h_I) a_R(h_J)` labelled by bitmasks.
///
/// `a_R(h_J) = a_R(h_{j_1}) ... a_R(h_{j_k})` with `j_1 < ... < j_k` and
/// `a*_R(h_I) = a_R(h_I)*`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Monomial {
    pub create: usize,
    pub annihilate: usize,
}

impl Monomial {
    pub fn adjoint(self) -> Monomial {
        Monomial { create: self.annihilate, annihilate: self.create }
    }

    /// Degree parity: monomials of odd degree anticommute with `Γ⊗Γ`.
    pub fn is_odd(self) -> bool {
        (self.create.count_ones() + self.annihilate.count_ones()) % 2 == 1
    }
}

/// All submasks of `mask`, in increasing numeric order.
pub fn submasks(mask: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(1 << mask.count_ones());
    let mut s = 0usize;
    loop {
        out.push(s);
        if s == mask {
            break;
        }
        s = (s.wrapping_sub(mask)) & mask;
    }
    out
}

/// Doubled representation `π_R` with cached generators.
#[derive(Clone, Debug)]
pub struct QuasiFreeRep<T: Real> {
    space: ModeSpace,
    cov: Covariance<T>,
    a: Vec<SparseOperator<T>>,
    a_star: Vec<SparseOperator<T>>,
    b: Vec<SparseOperator<T>>,
    b_star: Vec<SparseOperator<T>>,
    gamma_gamma: SparseOperator<T>,
    vacuum: Vector<T>,
}

impl<T: Real> QuasiFreeRep<T> {
    pub fn new(cov: Covariance<T>) -> Result<Self> {
        let space = ModeSpace::new(cov.n_modes())?;
        let gamma = fock::parity_op::<T>(space);
        let one = SparseOperator::identity(space.dim());
        let mut rep = Self {
            space,
            gamma_gamma: gamma.kron(&gamma),
            vacuum: basis_vector(space.dim() * space.dim(), 0),
            a: Vec::new(),
            a_star: Vec::new(),
            b: Vec::new(),
            b_star: Vec::new(),
            cov,
        };
        for i in 0..space.n_modes() {
            let h = space.h::<T>(i);
            let a = build_annihilator(&rep.cov, space, &gamma, &one, &h)?;
            let b = build_commutant(&rep.cov, space, &gamma, &one, &h)?;
            rep.a_star.push(a.adjoint());
            rep.b_star.push(b.adjoint());
            rep.a.push(a);
            rep.b.push(b);
        }
        Ok(rep)
    }

    pub fn space(&self) -> ModeSpace {
        self.space
    }

    pub fn cov(&self) -> &Covariance<T> {
        &self.cov
    }

    pub fn n_modes(&self) -> usize {
        self.space.n_modes()
    }

    /// Dimension `2^n` of one tensor factor.
    pub fn fock_dim(&self) -> usize {
        self.space.dim()
    }

    /// Dimension `4^n` of the doubled space.
    pub fn dim(&self) -> usize {
        self.space.dim() * self.space.dim()
    }

    /// Doubled basis index of `h_left ⊗ h_right`.
    pub fn index(&self, left: usize, right: usize) -> usize {
        left * self.fock_dim() + right
    }

    /// Inverse of [`Self::index`].
    pub fn split(&self, idx: usize) -> (usize, usize) {
        (idx / self.fock_dim(), idx % self.fock_dim())
    }

    pub fn basis(&self, left: usize, right: usize) -> Vector<T> {
        basis_vector(self.dim(), self.index(left, right))
    }

    /// `a_R(h_i)`.
    pub fn a(&self, i: usize) -> &SparseOperator<T> {
        &self.a[i]
    }

    /// `a*_R(h_i)`.
    pub fn a_star(&self, i: usize) -> &SparseOperator<T> {
        &self.a_star[i]
    }

    /// `b_R(h_i)`.
    pub fn b(&self, i: usize) -> &SparseOperator<T> {
        &self.b[i]
    }

    /// `b*_R(h_i)`.
    pub fn b_star(&self, i: usize) -> &SparseOperator<T> {
        &self.b_star[i]
    }

    /// `Γ ⊗ Γ`.
    pub fn gamma_gamma(&self) -> &SparseOperator<T> {
        &self.gamma_gamma
    }

    /// `Ω ⊗ Ω`.
    pub fn vacuum(&self) -> &Vector<T> {
        &self.vacuum
    }

    /// `a_R(f)` for an arbitrary one-particle vector.
    pub fn rep_annihilator(&self, f: &Vector<T>) -> Result<SparseOperator<T>> {
        let gamma = fock::parity_op::<T>(self.space);
        let one = SparseOperator::identity(self.space.dim());
        build_annihilator(&self.cov, self.space, &gamma, &one, f)
    }

    /// `b_R(h)` for an arbitrary one-particle vector.
    pub fn commutant_generator(&self, h: &Vector<T>) -> Result<SparseOperator<T>> {
        let gamma = fock::parity_op::<T>(self.space);
        let one = SparseOperator::identity(self.space.dim());
        build_commutant(&self.cov, self.space, &gamma, &one, h)
    }

    /// Generators `a_R(h_i)`, `a*_R(h_i)` of `M_R` for the modes in `mask`.
    pub fn m_generators(&self, mask: usize) -> Vec<SparseOperator<T>> {
        bits(mask).into_iter().flat_map(|i| [self.a[i].clone(), self.a_star[i].clone()]).collect()
    }

    /// `Γ⊗Γ b_R(h_i)` (graded-commutant partner of `a_R(h_i)`).
    pub fn gb(&self, i: usize) -> SparseOperator<T> {
        &self.gamma_gamma * &self.b[i]
    }

    /// `b*_R(h_i) Γ⊗Γ`.
    pub fn b_star_g(&self, i: usize) -> SparseOperator<T> {
        &self.b_star[i] * &self.gamma_gamma
    }

    /// Generators `Γ⊗Γ b_R(h_i)`, `b*_R(h_i) Γ⊗Γ` of `M_R'` for the modes in `mask`.
    pub fn m_prime_generators(&self, mask: usize) -> Vec<SparseOperator<T>> {
        bits(mask).into_iter().flat_map(|i| [self.gb(i), self.b_star_g(i)]).collect()
    }

    /// Mask of all modes.
    pub fn all_modes(&self) -> usize {
        (1 << self.n_modes()) - 1
    }

    /// `a_R(h_J)` as an ordered product.
    pub fn annihilator_product(&self, mask: usize) -> SparseOperator<T> {
        bits(mask)
            .into_iter()
            .fold(SparseOperator::identity(self.dim()), |acc, i| &acc * &self.a[i])
    }

    pub fn monomial(&self, m: Monomial) -> SparseOperator<T> {
        &self.annihilator_product(m.create).adjoint() * &self.annihilator_product(m.annihilate)
    }

    /// Monomials over the modes in `mask`; `4^{|mask|}` of them.
    pub fn monomials(&self, mask: usize) -> Vec<Monomial> {
        let subs = submasks(mask);
        subs.iter()
            .flat_map(|&c| subs.iter().map(move |&a| Monomial { create: c, annihilate: a }))
            .collect()
    }

    /// `m Ω⊗Ω`, computed by successive application.
    pub fn monomial_vacuum(&self, m: Monomial) -> Vector<T> {
        let mut v = self.vacuum.clone();
        for i in bits(m.annihilate).into_iter().rev() {
            v = self.a[i].apply(&v);
        }
        for i in bits(m.create) {
            v = self.a_star[i].apply(&v);
        }
        v
    }

    /// State value `⟨Ω⊗Ω| x |Ω⊗Ω⟩` (linear in `x`).
    pub fn vacuum_expectation(&self, x: &SparseOperator<T>) -> C<T> {
        inner(&x.apply(&self.vacuum), &self.vacuum)
    }

    /// Columns `m_k Ω⊗Ω` for the given monomials.
    pub fn gns_matrix(&self, monomials: &[Monomial]) -> Matrix<T> {
        let cols: Vec<_> = monomials.iter().map(|&m| self.monomial_vacuum(m)).collect();
        Matrix::from_columns(&cols)
    }

    /// Rank of `{m Ω⊗Ω}` over all `M_R` monomials and of the analogous set
    /// generated by `Γ⊗Γ b_R`.
    pub fn cyclicity_ranks(&self) -> (usize, usize) {
        let monos = self.monomials(self.all_modes());
        let rel: T = tol(1e-10);
        let m_rank = linalg::rank(&self.gns_matrix(&monos), rel);
        let gb: Vec<_> = (0..self.n_modes()).map(|i| self.gb(i)).collect();
        let cols: Vec<_> = monos
            .iter()
            .map(|m| {
                let mut v = self.vacuum.clone();
                for i in bits(m.annihilate).into_iter().rev() {
                    v = gb[i].apply(&v);
                }
                for i in bits(m.create) {
                    v = gb[i].adjoint().apply(&v);
                }
                v
            })
            .collect();
        let b_rank = linalg::rank(&Matrix::from_columns(&cols), rel);
        (m_rank, b_rank)
    }
}

fn build_annihilator<T: Real>(
    cov: &Covariance<T>,
    space: ModeSpace,
    gamma: &SparseOperator<T>,
    one: &SparseOperator<T>,
    f: &Vector<T>,
) -> Result<SparseOperator<T>> {
    if f.len() != space.n_modes() {
        return Err(Error::DimensionMismatch { expected: space.n_modes(), found: f.len() });
    }
    let left = fock::annihilate_op(space, &cov.apply_a(f))?.kron(gamma);
    let right = one.kron(&fock::create_op(space, &cov.apply_sqrt(f))?);
    Ok(&left + &right)
}

fn build_commutant<T: Real>(
    cov: &Covariance<T>,
    space: ModeSpace,
    gamma: &SparseOperator<T>,
    one: &SparseOperator<T>,
    h: &Vector<T>,
) -> Result<SparseOperator<T>> {
    if h.len() != space.n_modes() {
        return Err(Error::DimensionMismatch { expected: space.n_modes(), found: h.len() });
    }
    let left = fock::annihilate_op(space, &cov.apply_sqrt(h))?.kron(gamma);
    let right = one.kron(&fock::create_op(space, &cov.apply_a(h))?);
    Ok(&left - &right)
}

/// Largest violations of the CAR and of the `M_R` / `M_R'` commutation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarReport<T> {
    /// `max ‖{a_R(h_i), a_R(h_j)}‖`.
    pub anti_aa: T,
    /// `max ‖{a_R(h_i), a*_R(h_j)} - δ_ij‖`.
    pub anti_a_astar: T,
    /// `max ‖[x, y]‖` over `x ∈ {a_R, a*_R}`, `y ∈ {Γ⊗Γ b_R, b*_R Γ⊗Γ}`.
    pub commutant: T,
    /// Same CAR checks for `b_R`.
    pub anti_b: T,
}

impl<T: Real> CarReport<T> {
    pub fn max(&self) -> T {
        self.anti_aa.max(self.anti_a_astar).max(self.commutant).max(self.anti_b)
    }
}

/// Frobenius-norm errors; they bound the operator-norm errors from above.
pub fn car_check<T: Real>(rep: &QuasiFreeRep<T>) -> CarReport<T> {
    let n = rep.n_modes();
    let id = SparseOperator::identity(rep.dim());
    let mut r = CarReport { anti_aa: T::zero(), anti_a_astar: T::zero(), commutant: T::zero(), anti_b: T::zero() };
    let primes = rep.m_prime_generators(rep.all_modes());
    for i in 0..n {
        for j in 0..n {
            r.anti_aa = r.anti_aa.max(anticommutator(rep.a(i), rep.a(j)).frobenius_norm());
            let mut ac = anticommutator(rep.a(i), rep.a_star(j));
            let mut bc = anticommutator(rep.b(i), rep.b_star(j));
            if i == j {
                ac = &ac - &id;
                bc = &bc - &id;
            }
            r.anti_a_astar = r.anti_a_astar.max(ac.frobenius_norm());
            r.anti_b = r
                .anti_b
                .max(bc.frobenius_norm())
                .max(anticommutator(rep.b(i), rep.b(j)).frobenius_norm());
        }
        for y in &primes {
            r.commutant = r
                .commutant
                .max(commutator(rep.a(i), y).frobenius_norm())
                .max(commutator(rep.a_star(i), y).frobenius_norm());
        }
    }
    r
}

/// Largest deviation of `⟨a*_R(h_I) a_R(h_J)⟩` from [`quasifree_moment`] over
/// every normal-ordered monomial on all modes.
pub fn moment_check<T: Real>(rep: &QuasiFreeRep<T>) -> Result<T> {
    let space = rep.space();
    let h = |i: usize| space.h::<T>(i);
    let mut worst = T::zero();
    for m in rep.monomials(rep.all_modes()) {
        let fs: Vec<_> = bits(m.create).into_iter().map(h).collect();
        let gs: Vec<_> = bits(m.annihilate).into_iter().map(h).collect();
        let expected = quasifree_moment(rep.cov(), &fs, &gs)?;
        let got = rep.vacuum_expectation(&rep.monomial(m));
        worst = worst.max(crate::scalar::cabs(got - expected));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cr;

    fn rep(l: &[f64]) -> QuasiFreeRep<f64> {
        QuasiFreeRep::new(Covariance::new(l.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn all_moments_match() {
        assert!(moment_check(&rep(&[0.3, 0.7, 0.2])).unwrap() < 1e-12);
    }

    #[test]
    fn covariance_validation() {
        assert!(Covariance::<f64>::new(vec![0.5]).is_err());
        assert!(Covariance::<f64>::allowing_half(vec![0.5]).is_ok());
        assert!(Covariance::<f64>::new(vec![1.5]).is_err());
        assert!(Covariance::<f64>::new(vec![0.0]).is_err());
        assert!(Covariance::<f64>::new(vec![]).is_err());
        assert!(Covariance::<f64>::new(vec![0.5 + 1e-9]).is_ok());
    }

    #[test]
    fn moment_examples() {
        let s = ModeSpace::new(2).unwrap();
        let c1 = Covariance::new(vec![0.3]).unwrap();
        let h1 = ModeSpace::new(1).unwrap().h::<f64>(0);
        assert!((quasifree_moment(&c1, &[h1.clone()], &[h1.clone()]).unwrap() - cr(0.3)).norm() < 1e-15);
        assert_eq!(quasifree_moment(&c1, &[h1.clone()], &[]).unwrap(), cr(0.0));
        assert_eq!(quasifree_moment::<f64>(&c1, &[], &[]).unwrap(), cr(1.0));
        // With f_1 = h_2, f_2 = h_1 the Gram matrix is anti-diagonal.
        let c2 = Covariance::new(vec![0.3, 0.7]).unwrap();
        let m = quasifree_moment(&c2, &[s.h(1), s.h(0)], &[s.h(0), s.h(1)]).unwrap();
        assert!((m - cr(-0.21)).norm() < 1e-15);
        assert!(quasifree_moment(&c2, &[h1], &[s.h(0)]).is_err());
    }

    #[test]
    fn ordered_moment_agrees_with_representation() {
        let r = rep(&[0.3, 0.7]);
        // a*_R(h_1) a*_R(h_2) a_R(h_1) a_R(h_2) = a*(f_2) a*(f_1) a(g_1) a(g_2) with f = (h_2, h_1).
        let x = &(&(r.a_star(0) * r.a_star(1)) * r.a(0)) * r.a(1);
        assert!((r.vacuum_expectation(&x) - cr(-0.21)).norm() < 1e-14);
    }

    #[test]
    fn rep_annihilator_examples() {
        let r = rep(&[0.3]);
        let v = r.a(0).apply(r.vacuum());
        assert!((v - r.basis(0, 1).scale(0.3f64.sqrt())).norm() < 1e-15);
        let ac = anticommutator(r.a(0), r.a_star(0));
        assert!((&ac - &SparseOperator::identity(4)).max_abs() < 1e-15);
        assert!((r.vacuum_expectation(&(r.a_star(0) * r.a(0))) - cr(0.3)).norm() < 1e-15);
    }

    #[test]
    fn commutant_generator_examples() {
        let r = rep(&[0.3]);
        let v = r.b(0).apply(r.vacuum());
        assert!((v + r.basis(0, 1).scale(0.7f64.sqrt())).norm() < 1e-15);
        let ac = anticommutator(r.b(0), r.b_star(0));
        assert!((&ac - &SparseOperator::identity(4)).max_abs() < 1e-15);
        let r2 = rep(&[0.3, 0.7]);
        assert!(commutator(&r2.gb(0), r2.a(1)).max_abs() < 1e-15);
    }

    #[test]
    fn car_check_examples() {
        assert!(car_check(&rep(&[0.3])).max() < 1e-12);
        assert!(car_check(&rep(&[0.3, 0.5 + 1e-9, 0.7])).max() < 1e-12);
        assert!(car_check(&rep(&[0.3, 0.7])).commutant < 1e-12);
    }

    #[test]
    fn vacuum_is_cyclic_and_separating() {
        for l in [&[0.3][..], &[0.3, 0.7], &[0.2, 0.6, 0.9]] {
            let r = rep(l);
            assert_eq!(r.cyclicity_ranks(), (r.dim(), r.dim()));
        }
    }

    #[test]
    fn monomial_vacuum_matches_operator_product() {
        let r = rep(&[0.3, 0.7]);
        for m in r.monomials(r.all_modes()) {
            let direct = r.monomial(m).apply(r.vacuum());
            assert!((direct - r.monomial_vacuum(m)).norm() < 1e-14);
        }
    }

    #[test]
    fn submask_enumeration() {
        assert_eq!(submasks(0b101), vec![0, 1, 4, 5]);
        assert_eq!(submasks(0), vec![0]);
    }
}
