//! Discrete shift model of the CAR flow on a lattice of `L` positions × `d`
//! channels.
//!
//! Mode `(p, k)` (0-based position and channel) has index `p * d + k`. The
//! truncated shift sends position `p` to `p + t` and kills the top `t`
//! positions. Past modes are positions `0..t`, future modes `t..L`, and the
//! small algebra lives on positions `0..L-t`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fock::{self, bits, ModeSpace};
use crate::linalg::{self, Matrix};
use crate::quasifree::{Covariance, Monomial, QuasiFreeRep};
use crate::scalar::{cabs, to_f64, tol, Real, C};
use crate::sparse::{inner, SparseOperator, Vector};

#[derive(Clone, Debug, PartialEq)]
pub struct ShiftModel<T: Real> {
    l: usize,
    d: usize,
    t: usize,
    lambdas: Vec<T>,
    allow_half: bool,
}

impl<T: Real> ShiftModel<T> {
    pub fn new(l: usize, d: usize, t: usize, lambdas: Vec<T>) -> Result<Self> {
        Self::build(l, d, t, lambdas, false)
    }

    pub fn allowing_half(l: usize, d: usize, t: usize, lambdas: Vec<T>) -> Result<Self> {
        Self::build(l, d, t, lambdas, true)
    }

    fn build(l: usize, d: usize, t: usize, lambdas: Vec<T>, allow_half: bool) -> Result<Self> {
        if l == 0 || d == 0 {
            return Err(Error::InvalidLattice("L and d must be positive".into()));
        }
        if t > l {
            return Err(Error::InvalidLattice(format!("shift t = {t} exceeds L = {l}")));
        }
        if lambdas.len() != d {
            return Err(Error::InvalidLattice(format!("{} channel values given for d = {d}", lambdas.len())));
        }
        let m = Self { l, d, t, lambdas, allow_half };
        m.covariance()?;
        Ok(m)
    }

    /// Same lattice and symbol, different shift.
    pub fn with_t(&self, t: usize) -> Result<Self> {
        Self::build(self.l, self.d, t, self.lambdas.clone(), self.allow_half)
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn channel_lambdas(&self) -> &[T] {
        &self.lambdas
    }

    pub fn n_modes(&self) -> usize {
        self.l * self.d
    }

    /// Number of past modes `p = t·d`.
    pub fn p(&self) -> usize {
        self.t * self.d
    }

    pub fn mode(&self, position: usize, channel: usize) -> usize {
        position * self.d + channel
    }

    fn positions_mask(&self, range: std::ops::Range<usize>) -> usize {
        range.map(|p| ((1usize << self.d) - 1) << (p * self.d)).fold(0, |a, b| a | b)
    }

    pub fn past_mask(&self) -> usize {
        self.positions_mask(0..self.t)
    }

    pub fn future_mask(&self) -> usize {
        self.positions_mask(self.t..self.l)
    }

    /// Modes of positions `0..L-t`, the domain of the shift.
    pub fn small_mask(&self) -> usize {
        self.positions_mask(0..self.l - self.t)
    }

    /// Image of a mode under the shift, if it survives.
    pub fn shifted(&self, mode: usize) -> Option<usize> {
        let target = mode + self.t * self.d;
        (target < self.n_modes()).then_some(target)
    }

    /// Image of a set of modes; `None` if any factor is killed.
    pub fn shift_mask(&self, mask: usize) -> Option<usize> {
        bits(mask).into_iter().try_fold(0usize, |acc, m| self.shifted(m).map(|s| acc | (1 << s)))
    }

    /// `R` with `λ_{(p,k)} = λ_k`.
    pub fn covariance(&self) -> Result<Covariance<T>> {
        let lam: Vec<T> = (0..self.n_modes()).map(|m| self.lambdas[m % self.d]).collect();
        if self.allow_half {
            Covariance::allowing_half(lam)
        } else {
            Covariance::new(lam)
        }
    }

    pub fn rep(&self) -> Result<QuasiFreeRep<T>> {
        QuasiFreeRep::new(self.covariance()?)
    }
}

/// One-particle truncated shift `ŝ_t` as an `n × n` matrix.
pub fn shift_isometry<T: Real>(model: &ShiftModel<T>) -> Matrix<T> {
    let n = model.n_modes();
    let mut m = Matrix::<T>::zeros(n, n);
    for mode in 0..n {
        if let Some(s) = model.shifted(mode) {
            m[(s, mode)] = C::new(T::one(), T::zero());
        }
    }
    m
}

/// The fundamental unit `S_t = Λ(ŝ_t) ⊗ Λ(ŝ_t)`.
#[derive(Clone, Debug)]
pub struct FlowIsometry<T: Real> {
    pub s: SparseOperator<T>,
}

impl<T: Real> FlowIsometry<T> {
    /// `S_t* S_t`, the projection onto `F(small) ⊗ F(small)`.
    pub fn initial_projection(&self) -> SparseOperator<T> {
        &self.s.adjoint() * &self.s
    }
}

pub fn flow_isometry<T: Real>(rep: &QuasiFreeRep<T>, model: &ShiftModel<T>) -> Result<FlowIsometry<T>> {
    if rep.n_modes() != model.n_modes() {
        return Err(Error::DimensionMismatch { expected: model.n_modes(), found: rep.n_modes() });
    }
    let space = ModeSpace::new(model.n_modes())?;
    let lam = fock::second_quantize(space, space, &shift_isometry(model))?;
    Ok(FlowIsometry { s: lam.kron(&lam) })
}

/// Projection onto basis vectors whose factors only use modes in `mask`.
pub fn support_projection<T: Real>(rep: &QuasiFreeRep<T>, mask: usize) -> SparseOperator<T> {
    let diag: Vec<C<T>> = (0..rep.dim())
        .map(|k| {
            let (l, r) = rep.split(k);
            let inside = (l | r) & !mask == 0;
            C::new(if inside { T::one() } else { T::zero() }, T::zero())
        })
        .collect();
    SparseOperator::diagonal(&diag)
}

/// The small algebra (monomials over positions `0..L-t`) with the shift
/// endomorphism `α_t` defined on it.
pub struct SmallAlgebra<'a, T: Real> {
    rep: &'a QuasiFreeRep<T>,
    model: ShiftModel<T>,
    monomials: Vec<Monomial>,
    gns: Matrix<T>,
}

impl<'a, T: Real> SmallAlgebra<'a, T> {
    pub fn new(rep: &'a QuasiFreeRep<T>, model: &ShiftModel<T>) -> Self {
        let monomials = rep.monomials(model.small_mask());
        let gns = rep.gns_matrix(&monomials);
        Self { rep, model: model.clone(), monomials, gns }
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    /// Image of a small monomial: `a*_R(ŝ h_I) a_R(ŝ h_J)`.
    pub fn alpha_monomial(&self, m: Monomial) -> Monomial {
        Monomial {
            create: self.model.shift_mask(m.create).expect("small monomial"),
            annihilate: self.model.shift_mask(m.annihilate).expect("small monomial"),
        }
    }

    /// Coefficients of `x` in the small monomial basis, verified at operator level.
    pub fn decompose(&self, x: &SparseOperator<T>) -> Result<Vec<C<T>>> {
        let v = x.apply(self.rep.vacuum());
        let (c, _) = linalg::least_squares(&self.gns, &v);
        let rebuilt = self
            .monomials
            .iter()
            .zip(c.iter())
            .filter(|(_, &ck)| cabs(ck) > T::drop_tolerance())
            .fold(SparseOperator::zeros(x.rows(), x.cols()), |acc, (&m, &ck)| &acc + &self.rep.monomial(m).scale(ck));
        let residual = (&rebuilt - x).frobenius_norm();
        let scale = T::one().max(x.frobenius_norm());
        if residual > tol::<T>(1e-9) * scale {
            return Err(Error::OutsideSmallAlgebra { residual: to_f64(residual) });
        }
        Ok(c.iter().copied().collect())
    }

    /// `α_t(x)` for `x` in the small algebra.
    pub fn alpha(&self, x: &SparseOperator<T>) -> Result<SparseOperator<T>> {
        let c = self.decompose(x)?;
        Ok(self
            .monomials
            .iter()
            .zip(c)
            .filter(|(_, ck)| cabs(*ck) > T::drop_tolerance())
            .fold(SparseOperator::zeros(x.rows(), x.cols()), |acc, (&m, ck)| {
                &acc + &self.rep.monomial(self.alpha_monomial(m)).scale(ck)
            }))
    }
}

/// `α_t(x)`; errors if `x` is not in the small algebra.
pub fn alpha_endomorphism<T: Real>(
    rep: &QuasiFreeRep<T>,
    model: &ShiftModel<T>,
    x: &SparseOperator<T>,
) -> Result<SparseOperator<T>> {
    SmallAlgebra::new(rep, model).alpha(x)
}

/// Coefficients `c(L_1)` of `a_R(h_L) a*_R(h_{L̃}) Ω⊗Ω` against `A h_{L_1} ⊗ B h_{L_1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedExpansion<T> {
    /// Keyed by the bitmask of `L_1 ⊆ L` (factors in increasing order).
    pub coefficients: BTreeMap<usize, C<T>>,
    pub residual: T,
}

/// The vector `a_R(h_L) a*_R(h_{L̃}) Ω⊗Ω` for an ordered list of modes.
pub fn paired_monomial_vector<T: Real>(rep: &QuasiFreeRep<T>, l_set: &[usize]) -> Result<Vector<T>> {
    fock::FockIndex::from_modes(l_set)?;
    if let Some(&m) = l_set.iter().find(|&&m| m >= rep.n_modes()) {
        return Err(Error::InvalidMode { mode: m, n_modes: rep.n_modes() });
    }
    let mut v = rep.vacuum().clone();
    for &m in l_set {
        v = rep.a_star(m).apply(&v);
    }
    for &m in l_set.iter().rev() {
        v = rep.a(m).apply(&v);
    }
    Ok(v)
}

pub fn paired_monomial_expand<T: Real>(rep: &QuasiFreeRep<T>, l_set: &[usize]) -> Result<PairedExpansion<T>> {
    if l_set.is_empty() {
        return Err(Error::InvalidLattice("paired expansion needs a nonempty mode set".into()));
    }
    let v = paired_monomial_vector(rep, l_set)?;
    let mask = fock::FockIndex::from_modes(l_set)?.0;
    let lam = rep.cov().lambdas();
    let mut rest = v.clone();
    let mut coefficients = BTreeMap::new();
    let mut smallest = T::max_value().expect("bounded type");
    for sub in crate::quasifree::submasks(mask) {
        let weight = bits(sub).into_iter().fold(T::one(), |acc, i| acc * (lam[i] * (T::one() - lam[i])).sqrt());
        let w = rep.basis(sub, sub) * C::new(weight, T::zero());
        let c = inner(&v, &w) / C::new(weight * weight, T::zero());
        rest -= &w * c;
        smallest = smallest.min(cabs(c));
        coefficients.insert(sub, c);
    }
    let residual = rest.norm();
    if residual > tol::<T>(1e-10) || smallest <= tol::<T>(1e-12) {
        return Err(Error::PairedSpanViolation { residual: to_f64(residual), smallest: to_f64(smallest) });
    }
    Ok(PairedExpansion { coefficients, residual })
}

/// Flow-suite residuals for a model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowReport<T> {
    /// `max ‖S_s S_t - S_{s+t}‖` over `s + t ≤ L`.
    pub semigroup: T,
    /// `max ‖S_t x Ω⊗Ω - α_t(x) Ω⊗Ω‖` over the small monomial basis.
    pub implements_alpha: T,
    /// `‖S_t J - J S_t‖`.
    pub j_commutes: T,
}

pub fn flow_check<T: Real>(rep: &QuasiFreeRep<T>, model: &ShiftModel<T>) -> Result<FlowReport<T>> {
    let unit = |t: usize| -> Result<SparseOperator<T>> { Ok(flow_isometry(rep, &model.with_t(t)?)?.s) };
    let mut semigroup = T::zero();
    for s in 0..=model.l() {
        for t in 0..=model.l() - s {
            let err = (&(&unit(s)? * &unit(t)?) - &unit(s + t)?).frobenius_norm();
            semigroup = semigroup.max(err);
        }
    }
    let s = flow_isometry(rep, model)?.s;
    let small = SmallAlgebra::new(rep, model);
    let mut implements_alpha = T::zero();
    for &mono in small.monomials() {
        let lhs = s.apply(&rep.monomial_vacuum(mono));
        let rhs = rep.monomial_vacuum(small.alpha_monomial(mono));
        implements_alpha = implements_alpha.max((lhs - rhs).norm());
    }
    let j = crate::modular::closed_form_j(rep);
    let j_commutes = j.after_linear(&s).distance(&j.compose_linear(&s));
    Ok(FlowReport { semigroup, implements_alpha, j_commutes })
}
