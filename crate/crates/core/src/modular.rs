//! Tomita operator of the quasi-free vacuum, its polar decomposition and the
//! closed forms for `J`, `S`, `F` and `Δ` in the doubled wedge basis.
//!
//! A doubled basis vector `h_left ⊗ h_right` is decoded as `(I, L, J)` with
//! `L = left ∧ right`, `I = left \ right`, `J = right \ left`.

use crate::error::{Error, Result};
use crate::fock::{bits, wedge_sign};
use crate::linalg::{self, Matrix};
use crate::quasifree::QuasiFreeRep;
use crate::scalar::{sign, to_f64, tol, Real, C};
use crate::sparse::{AntiLinearMap, SparseOperator};

/// `S`, `F = S*`, `J` and `Δ` of the vacuum state.
#[derive(Clone, Debug)]
pub struct ModularData<T: Real> {
    pub s: AntiLinearMap<T>,
    pub f: AntiLinearMap<T>,
    pub j: AntiLinearMap<T>,
    pub delta: SparseOperator<T>,
    pub delta_sqrt: SparseOperator<T>,
}

/// Builds `S : xΩ ↦ x*Ω` over the full monomial basis and polar-decomposes it.
pub fn tomita_from_gns<T: Real>(rep: &QuasiFreeRep<T>) -> Result<ModularData<T>> {
    let monos = rep.monomials(rep.all_modes());
    let x = rep.gns_matrix(&monos);
    let adj: Vec<_> = monos.iter().map(|m| m.adjoint()).collect();
    let y = rep.gns_matrix(&adj);

    let sv = linalg::singular_values(&x);
    let smax = sv.iter().copied().fold(T::zero(), |a, b| a.max(b));
    let smin = sv.iter().copied().fold(smax, |a, b| a.min(b));
    if smax == T::zero() || smin <= smax * tol::<T>(1e-12) || sv.len() < rep.dim() {
        return Err(Error::NotCyclic { smallest: to_f64(smin), largest: to_f64(smax) });
    }
    let x_inv = x.clone().try_inverse().ok_or(Error::NotCyclic { smallest: 0.0, largest: to_f64(smax) })?;
    // S v = Y conj(X^{-1} v) = (Y conj(X^{-1})) conj(v).
    let m_s: Matrix<T> = &y * x_inv.map(|z| z.conj());
    let (u, p) = linalg::polar(&m_s);
    let delta_sqrt = p.map(|z| z.conj());
    let delta = m_s.transpose() * m_s.map(|z| z.conj());
    Ok(ModularData {
        s: AntiLinearMap::new(SparseOperator::from_dense(&m_s)),
        f: AntiLinearMap::new(SparseOperator::from_dense(&m_s.transpose())),
        j: AntiLinearMap::new(SparseOperator::from_dense(&u)),
        delta: SparseOperator::from_dense(&delta),
        delta_sqrt: SparseOperator::from_dense(&delta_sqrt),
    })
}

/// `(I, L, J)` decoding of a doubled basis label.
pub fn decode(left: usize, right: usize) -> (usize, usize, usize) {
    (left & !right, left & right, right & !left)
}

/// Sign of reversing a product of `k` factors.
fn reversal_odd(k: usize) -> bool {
    (k * k.saturating_sub(1) / 2) % 2 == 1
}

fn concat(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().chain(b).copied().collect()
}

/// `J(h_I∧h_L ⊗ q h_L∧q h_J) = h_{J̃}∧h_L ⊗ q h_L∧q h_{Ĩ}`, with every
/// wedge re-sorted to canonical order.
pub fn closed_form_j<T: Real>(rep: &QuasiFreeRep<T>) -> AntiLinearMap<T> {
    let n = rep.fock_dim();
    let mut trips = Vec::with_capacity(rep.dim());
    for left in 0..n {
        for right in 0..n {
            let (i, l, j) = decode(left, right);
            let (iv, lv, jv) = (bits(i), bits(l), bits(j));
            // Canonical input = ε_in · (h_I∧h_L ⊗ h_L∧h_J).
            let (_, in1) = wedge_sign(&concat(&iv, &lv)).expect("disjoint");
            let (_, in2) = wedge_sign(&concat(&lv, &jv)).expect("disjoint");
            let jr: Vec<_> = jv.iter().rev().copied().collect();
            let ir: Vec<_> = iv.iter().rev().copied().collect();
            let (out_left, o1) = wedge_sign(&concat(&jr, &lv)).expect("disjoint");
            let (out_right, o2) = wedge_sign(&concat(&lv, &ir)).expect("disjoint");
            let s = sign::<T>(in1 ^ in2 ^ o1 ^ o2);
            trips.push((rep.index(out_left, out_right), rep.index(left, right), C::new(s, T::zero())));
        }
    }
    AntiLinearMap::new(SparseOperator::from_triplets(rep.dim(), rep.dim(), trips))
}

/// Shared shape of the closed forms for `S` and `F`:
/// `h_I ⊗ q h_J ↦ (Π_{j∈J} w(j)) (Π_{i∈I} 1/w(i)) h_{J̃} ⊗ q h_{Ĩ}`.
fn swap_form<T: Real>(rep: &QuasiFreeRep<T>, weight: impl Fn(T) -> T) -> AntiLinearMap<T> {
    let n = rep.fock_dim();
    let lam = rep.cov().lambdas();
    let mut trips = Vec::with_capacity(rep.dim());
    for left in 0..n {
        for right in 0..n {
            let mut c = T::one();
            for j in bits(right) {
                c *= weight(lam[j]);
            }
            for i in bits(left) {
                c /= weight(lam[i]);
            }
            let odd = reversal_odd(left.count_ones() as usize) ^ reversal_odd(right.count_ones() as usize);
            trips.push((rep.index(right, left), rep.index(left, right), C::new(c * sign::<T>(odd), T::zero())));
        }
    }
    AntiLinearMap::new(SparseOperator::from_triplets(rep.dim(), rep.dim(), trips))
}

/// `S(h_I ⊗ q h_J) = ((1-R)R^{-1})^{1/2} h_{J̃} ⊗ q (R(1-R)^{-1})^{1/2} h_{Ĩ}`.
pub fn closed_form_s<T: Real>(rep: &QuasiFreeRep<T>) -> AntiLinearMap<T> {
    swap_form(rep, |l| ((T::one() - l) / l).sqrt())
}

/// `F(h_I ⊗ q h_J) = (R(1-R)^{-1})^{1/2} h_{J̃} ⊗ q ((1-R)R^{-1})^{1/2} h_{Ĩ}`.
pub fn closed_form_f<T: Real>(rep: &QuasiFreeRep<T>) -> AntiLinearMap<T> {
    swap_form(rep, |l| (l / (T::one() - l)).sqrt())
}

/// Predicted eigenvalue of `Δ` on every doubled basis vector:
/// `Π_{i∈I} λ_i/(1-λ_i) · Π_{j∈J} (1-λ_j)/λ_j`.
pub fn predicted_delta<T: Real>(rep: &QuasiFreeRep<T>) -> Vec<T> {
    let n = rep.fock_dim();
    let lam = rep.cov().lambdas();
    let mut out = vec![T::one(); rep.dim()];
    for left in 0..n {
        for right in 0..n {
            let (i, _, j) = decode(left, right);
            let mut v = T::one();
            for k in bits(i) {
                v *= lam[k] / (T::one() - lam[k]);
            }
            for k in bits(j) {
                v *= (T::one() - lam[k]) / lam[k];
            }
            out[rep.index(left, right)] = v;
        }
    }
    out
}

/// Errors of `J a_R(h_l) J` against the two orderings of `Γ⊗Γ` and `b*_R(h_l)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConjugationReport<T> {
    /// `max_l ‖J a_R(h_l) J - (Γ⊗Γ) b*_R(h_l)‖`.
    pub gamma_left: T,
    /// `max_l ‖J a_R(h_l) J - b*_R(h_l) (Γ⊗Γ)‖`.
    pub gamma_right: T,
    /// `max ‖[J x J, y]‖` over `M_R` generators `x`, `y`.
    pub commutes_with_m: T,
}

pub fn verify_commutant_conjugation<T: Real>(rep: &QuasiFreeRep<T>, j: &AntiLinearMap<T>) -> ConjugationReport<T> {
    let mut r = ConjugationReport { gamma_left: T::zero(), gamma_right: T::zero(), commutes_with_m: T::zero() };
    let gens = rep.m_generators(rep.all_modes());
    for l in 0..rep.n_modes() {
        let jaj = j.conjugate(rep.a(l));
        r.gamma_left = r.gamma_left.max((&jaj - &(rep.gamma_gamma() * rep.b_star(l))).frobenius_norm());
        r.gamma_right = r.gamma_right.max((&jaj - &rep.b_star_g(l)).frobenius_norm());
    }
    for x in &gens {
        let jxj = j.conjugate(x);
        for y in &gens {
            r.commutes_with_m = r.commutes_with_m.max(crate::sparse::commutator(&jxj, y).frobenius_norm());
        }
    }
    r
}

/// Internal consistency of a [`ModularData`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModularConsistency<T> {
    /// `‖S - J Δ^{1/2}‖`.
    pub polar: T,
    /// `‖J² - 1‖`.
    pub j_involution: T,
    /// `‖J*J - 1‖` (antiunitarity).
    pub j_unitary: T,
    /// `‖JΔJ Δ - 1‖`.
    pub j_delta: T,
    /// `‖S² - 1‖`.
    pub s_involution: T,
    /// `‖F - S*‖` where `S*` is the antilinear adjoint.
    pub f_adjoint: T,
    /// `‖FS - Δ‖`.
    pub fs_delta: T,
    /// Smallest eigenvalue of `Δ`.
    pub delta_min: T,
}

impl<T: Real> ModularData<T> {
    pub fn consistency(&self) -> ModularConsistency<T> {
        let dim = self.delta.rows();
        let id = SparseOperator::identity(dim);
        let j_delta_half = self.j.compose_linear(&self.delta_sqrt);
        let jdj = self.j.conjugate(&self.delta);
        let j_star_j = self.j.adjoint().compose(&self.j);
        ModularConsistency {
            polar: (&self.s.matrix - &j_delta_half.matrix).frobenius_norm(),
            j_involution: (&self.j.compose(&self.j) - &id).frobenius_norm(),
            j_unitary: (&j_star_j - &id).frobenius_norm(),
            j_delta: (&(&jdj * &self.delta) - &id).frobenius_norm(),
            s_involution: (&self.s.compose(&self.s) - &id).frobenius_norm(),
            f_adjoint: (&self.f.matrix - &self.s.adjoint().matrix).frobenius_norm(),
            fs_delta: (&self.f.compose(&self.s) - &self.delta).frobenius_norm(),
            delta_min: linalg::min_hermitian_eigenvalue(&self.delta.to_dense()),
        }
    }

    /// Largest relative deviation of `Δ` from [`predicted_delta`], and the
    /// largest off-diagonal entry.
    pub fn delta_deviation(&self, rep: &QuasiFreeRep<T>) -> (T, T) {
        let pred = predicted_delta(rep);
        let mut rel = T::zero();
        let mut off = T::zero();
        for (r, c, v) in self.delta.triplets() {
            if r != c {
                off = off.max(crate::scalar::cabs(v));
            }
        }
        for (k, p) in pred.iter().enumerate() {
            rel = rel.max(crate::scalar::cabs(self.delta.get(k, k) - C::new(*p, T::zero())) / *p);
        }
        (rel, off)
    }
}
