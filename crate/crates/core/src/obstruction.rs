//! The relative commutant `α_t(M_R)' ∩ M_R`, its vacuum span, the five-bucket
//! decomposition of doubled vectors with respect to a future mode, the A/B
//! operator pairs, parity confinement and the extendability verdict.

use std::collections::BTreeMap;

use crate::commutant::ConstraintSystem;
use crate::error::{Error, Result};
use crate::flow::ShiftModel;
use crate::fock::bits;
use crate::linalg::{self, Matrix};
use crate::quasifree::{Monomial, QuasiFreeRep};
use crate::scalar::{cabs, czero, sign, tol, Real, C};
use crate::sparse::{inner, SparseOperator, Vector};

/// Entries below this (relative to the vector norm) count as absent.
pub const COEFFICIENT_CUTOFF: f64 = 1e-12;

/// `m v` computed by applying the generators one at a time.
pub fn apply_monomial<T: Real>(rep: &QuasiFreeRep<T>, m: Monomial, v: &Vector<T>) -> Vector<T> {
    let mut w = v.clone();
    for i in bits(m.annihilate).into_iter().rev() {
        w = rep.a(i).apply(&w);
    }
    for i in bits(m.create) {
        w = rep.a_star(i).apply(&w);
    }
    w
}

fn check_future<T: Real>(model: &ShiftModel<T>, l: usize) -> Result<()> {
    if l >= model.n_modes() || model.future_mask() & (1 << l) == 0 {
        return Err(Error::NotFutureMode { mode: l });
    }
    Ok(())
}

/// Normalized annihilator and creator pairs for a future mode `l`.
#[derive(Clone, Debug)]
pub struct ABOperators<T: Real> {
    pub l: usize,
    /// `λ^{-1/2} a_R(f_l)`.
    pub a_ann: SparseOperator<T>,
    /// `(1-λ)^{-1/2} (Γ⊗Γ) b_R(f_l)`.
    pub a_comm: SparseOperator<T>,
    /// `(1-λ)^{-1/2} a*_R(f_l)`.
    pub b_cre: SparseOperator<T>,
    /// `λ^{-1/2} b*_R(f_l) (Γ⊗Γ)`.
    pub b_comm: SparseOperator<T>,
    /// The literal constants `A₁ = (1-λ)^{-1/2} a_R(f_l)`, `A₂ = -λ^{-1/2} (Γ⊗Γ) b_R(f_l)`.
    pub literal_a1: SparseOperator<T>,
    pub literal_a2: SparseOperator<T>,
}

impl<T: Real> ABOperators<T> {
    /// `(‖(A₁-A₂)v‖, ‖(B₁-B₂)v‖)`.
    pub fn pair_errors(&self, v: &Vector<T>) -> (T, T) {
        let a = (self.a_ann.apply(v) - self.a_comm.apply(v)).norm();
        let b = (self.b_cre.apply(v) - self.b_comm.apply(v)).norm();
        (a, b)
    }

    pub fn literal_error(&self, v: &Vector<T>) -> T {
        (self.literal_a1.apply(v) - self.literal_a2.apply(v)).norm()
    }
}

pub fn ab_operators<T: Real>(rep: &QuasiFreeRep<T>, model: &ShiftModel<T>, l: usize) -> Result<ABOperators<T>> {
    check_future(model, l)?;
    let lam = rep.cov().lambda(l);
    let one = T::one();
    let inv_sqrt = |x: T| one / x.sqrt();
    let gg = rep.gamma_gamma();
    Ok(ABOperators {
        l,
        a_ann: rep.a(l).scale_real(inv_sqrt(lam)),
        a_comm: (gg * rep.b(l)).scale_real(inv_sqrt(one - lam)),
        b_cre: rep.a_star(l).scale_real(inv_sqrt(one - lam)),
        b_comm: (rep.b_star(l) * gg).scale_real(inv_sqrt(lam)),
        literal_a1: rep.a(l).scale_real(inv_sqrt(one - lam)),
        literal_a2: (gg * rep.b(l)).scale_real(-inv_sqrt(lam)),
    })
}

/// Which of the two factors carry `f_l`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Slot {
    S00,
    S10,
    S01,
    S11,
}

/// Bucket labels in reporting order.
pub const BUCKETS: [&str; 5] = ["p", "u00", "u10", "u01", "u11"];

/// Coefficients of a doubled vector in the basis `v_{I₁J₁}⊗qv_{I₂J₂}`,
/// `f_l∧v_{I₁J₁}⊗qv_{I₂J₂}`, ... sorted into five buckets. Keys are the
/// masks `(I₁∪J₁, I₂∪J₂)` with `l` removed.
#[derive(Clone, Debug)]
pub struct VacuumDecomposition<T: Real> {
    pub l: usize,
    /// `(p₀₀, p₁₁)`.
    pub p: BTreeMap<(usize, usize), (C<T>, C<T>)>,
    pub u00: BTreeMap<(usize, usize), C<T>>,
    pub u10: BTreeMap<(usize, usize), C<T>>,
    pub u01: BTreeMap<(usize, usize), C<T>>,
    pub u11: BTreeMap<(usize, usize), C<T>>,
}

/// `f_l ∧ h_mask = (-1)^{#modes of mask below l} h_{mask ∪ l}`.
fn front_sign<T: Real>(mask: usize, l: usize) -> T {
    sign((mask & ((1 << l) - 1)).count_ones() % 2 == 1)
}

impl<T: Real> VacuumDecomposition<T> {
    fn basis_entry(&self, rep: &QuasiFreeRep<T>, key: (usize, usize), slot: Slot) -> (usize, T) {
        let bit = 1 << self.l;
        let (left, right) = key;
        let (l_in, r_in) = match slot {
            Slot::S00 => (false, false),
            Slot::S10 => (true, false),
            Slot::S01 => (false, true),
            Slot::S11 => (true, true),
        };
        let mut s = T::one();
        if l_in {
            s *= front_sign::<T>(left, self.l);
        }
        if r_in {
            s *= front_sign::<T>(right, self.l);
        }
        let idx = rep.index(if l_in { left | bit } else { left }, if r_in { right | bit } else { right });
        (idx, s)
    }

    fn bucket_entries(&self, bucket: usize) -> Vec<((usize, usize), Slot, C<T>)> {
        let single = |m: &BTreeMap<(usize, usize), C<T>>, s: Slot| m.iter().map(|(&k, &v)| (k, s, v)).collect::<Vec<_>>();
        match bucket {
            0 => self.p.iter().flat_map(|(&k, &(a, b))| [(k, Slot::S00, a), (k, Slot::S11, b)]).collect(),
            1 => single(&self.u00, Slot::S00),
            2 => single(&self.u10, Slot::S10),
            3 => single(&self.u01, Slot::S01),
            _ => single(&self.u11, Slot::S11),
        }
    }

    /// The component of the input vector carried by one bucket (order of [`BUCKETS`]).
    pub fn bucket_vector(&self, rep: &QuasiFreeRep<T>, bucket: usize) -> Vector<T> {
        let mut v = Vector::zeros(rep.dim());
        for (key, slot, c) in self.bucket_entries(bucket) {
            let (idx, s) = self.basis_entry(rep, key, slot);
            v[idx] += c * s;
        }
        v
    }

    pub fn reassemble(&self, rep: &QuasiFreeRep<T>) -> Vector<T> {
        (0..5).fold(Vector::zeros(rep.dim()), |acc, b| acc + self.bucket_vector(rep, b))
    }

    /// Largest coefficient in a bucket.
    pub fn bucket_max(&self, bucket: usize) -> T {
        self.bucket_entries(bucket).into_iter().fold(T::zero(), |m, e| m.max(cabs(e.2)))
    }

    /// `p₀₀` and `p₁₁` share one key set (by construction) and the plain and
    /// doubly paired singletons never reuse a paired key.
    pub fn support_invariants_hold(&self) -> bool {
        let apart = |m: &BTreeMap<(usize, usize), C<T>>| m.keys().all(|k| !self.p.contains_key(k));
        apart(&self.u00) && apart(&self.u11) && self.u00.keys().all(|k| !self.u11.contains_key(k))
    }
}

pub fn decompose_vacuum_vector<T: Real>(
    v: &Vector<T>,
    rep: &QuasiFreeRep<T>,
    model: &ShiftModel<T>,
    l: usize,
) -> Result<VacuumDecomposition<T>> {
    check_future(model, l)?;
    if v.len() != rep.dim() {
        return Err(Error::DimensionMismatch { expected: rep.dim(), found: v.len() });
    }
    let cutoff = tol::<T>(COEFFICIENT_CUTOFF) * v.norm().max(T::one());
    let bit = 1 << l;
    let mut slots: BTreeMap<(usize, usize), [C<T>; 4]> = BTreeMap::new();
    for (idx, &c) in v.iter().enumerate() {
        if cabs(c) <= cutoff {
            continue;
        }
        let (left, right) = rep.split(idx);
        let key = (left & !bit, right & !bit);
        let (l_in, r_in) = (left & bit != 0, right & bit != 0);
        let mut s = T::one();
        if l_in {
            s *= front_sign::<T>(key.0, l);
        }
        if r_in {
            s *= front_sign::<T>(key.1, l);
        }
        let slot = match (l_in, r_in) {
            (false, false) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (true, true) => 3,
        };
        slots.entry(key).or_insert([czero(); 4])[slot] = c * s;
    }
    let mut d = VacuumDecomposition {
        l,
        p: BTreeMap::new(),
        u00: BTreeMap::new(),
        u10: BTreeMap::new(),
        u01: BTreeMap::new(),
        u11: BTreeMap::new(),
    };
    let present = |c: C<T>| cabs(c) > cutoff;
    for (key, [c00, c10, c01, c11]) in slots {
        match (present(c00), present(c11)) {
            (true, true) => {
                d.p.insert(key, (c00, c11));
            }
            (true, false) => {
                d.u00.insert(key, c00);
            }
            (false, true) => {
                d.u11.insert(key, c11);
            }
            _ => {}
        }
        if present(c10) {
            d.u10.insert(key, c10);
        }
        if present(c01) {
            d.u01.insert(key, c01);
        }
    }
    Ok(d)
}

/// `σ(I, J) = (-1)^{|I|+|J|}` of a key side, i.e. the parity of the mask.
pub fn sigma(mask: usize) -> bool {
    mask.count_ones() % 2 == 1
}

/// Bucket-level verification of the coefficient lemma for one vector and mode.
#[derive(Clone, Debug)]
pub struct CoefficientReport<T> {
    pub l: usize,
    pub lambda: T,
    /// Pair equalities on the whole vector (precondition).
    pub a_pair: T,
    pub b_pair: T,
    /// `‖(A₁-A₂)ξ_b‖`, `‖(B₁-B₂)ξ_b‖` per bucket, order of [`BUCKETS`].
    pub bucket_a: [T; 5],
    pub bucket_b: [T; 5],
    pub u10: T,
    pub u01: T,
    pub u11: T,
    /// Largest paired coefficient with `σ(I₁,J₁) = σ(I₂,J₂)`.
    pub equal_sigma_paired: T,
    /// `λ/(1-λ)`; equations (iii)–(v) carry this factor on one side only.
    pub factor_ratio: T,
}

impl<T: Real> CoefficientReport<T> {
    pub fn bucket_max(&self) -> T {
        self.bucket_a.iter().chain(&self.bucket_b).fold(T::zero(), |a, &b| a.max(b))
    }

    pub fn u_max(&self) -> T {
        self.u10.max(self.u01).max(self.u11)
    }

    /// At `λ = 1/2` the factor is one and the equations relate equal quantities.
    pub fn vacuous(&self) -> bool {
        (self.factor_ratio - T::one()).abs() < tol(1e-12)
    }
}

pub fn coefficient_equations_check<T: Real>(
    v: &Vector<T>,
    rep: &QuasiFreeRep<T>,
    model: &ShiftModel<T>,
    l: usize,
) -> Result<CoefficientReport<T>> {
    let ab = ab_operators(rep, model, l)?;
    let (a_pair, b_pair) = ab.pair_errors(v);
    let tol = tol::<T>(1e-10) * v.norm().max(T::one());
    if a_pair > tol {
        return Err(Error::Precondition { what: "A-pair equality", error: a_pair.to_f64().unwrap_or(f64::NAN) });
    }
    if b_pair > tol {
        return Err(Error::Precondition { what: "B-pair equality", error: b_pair.to_f64().unwrap_or(f64::NAN) });
    }
    let d = decompose_vacuum_vector(v, rep, model, l)?;
    let mut bucket_a = [T::zero(); 5];
    let mut bucket_b = [T::zero(); 5];
    for b in 0..5 {
        let xi = d.bucket_vector(rep, b);
        let (ea, eb) = ab.pair_errors(&xi);
        bucket_a[b] = ea;
        bucket_b[b] = eb;
    }
    let equal_sigma_paired = d
        .p
        .iter()
        .filter(|((k1, k2), _)| sigma(*k1) == sigma(*k2))
        .fold(T::zero(), |m, (_, &(a, b))| m.max(cabs(a)).max(cabs(b)));
    let lam = rep.cov().lambda(l);
    Ok(CoefficientReport {
        l,
        lambda: lam,
        a_pair,
        b_pair,
        bucket_a,
        bucket_b,
        u10: d.bucket_max(2),
        u01: d.bucket_max(3),
        u11: d.bucket_max(4),
        equal_sigma_paired,
        factor_ratio: lam / (T::one() - lam),
    })
}

/// Basis of `α_t(M_R)' ∩ M_R`, split by `Ad(Γ⊗Γ)` parity.
#[derive(Clone, Debug)]
pub struct RelativeCommutant<T: Real> {
    pub even: Vec<SparseOperator<T>>,
    pub odd: Vec<SparseOperator<T>>,
    /// `max ‖[T, α_t(g)]‖` over the basis and small generators.
    pub max_commutator: T,
}

impl<T: Real> RelativeCommutant<T> {
    pub fn dimension(&self) -> usize {
        self.even.len() + self.odd.len()
    }

    pub fn all(&self) -> impl Iterator<Item = &SparseOperator<T>> {
        self.even.iter().chain(&self.odd)
    }
}

/// Images `α_t(g)` of the small generators.
fn image_generators<T: Real>(rep: &QuasiFreeRep<T>, model: &ShiftModel<T>) -> Vec<SparseOperator<T>> {
    bits(model.small_mask())
        .into_iter()
        .flat_map(|m| {
            let s = model.shifted(m).expect("small mode survives the shift");
            [rep.a(s).clone(), rep.a_star(s).clone()]
        })
        .collect()
}

/// Expands `T = Σ c_k m_k` over the monomials of `M_R` and imposes
/// `[T, α_t(g)] Ω⊗Ω = 0`; `Ω⊗Ω` separates `M_R`, so this is `[T, α_t(g)] = 0`.
pub fn relative_commutant<T: Real>(rep: &QuasiFreeRep<T>, model: &ShiftModel<T>) -> RelativeCommutant<T> {
    let gens = image_generators(rep, model);
    let gen_vac: Vec<Vector<T>> = gens.iter().map(|g| g.apply(rep.vacuum())).collect();
    let monomials = rep.monomials(rep.all_modes());
    let mut out = RelativeCommutant { even: Vec::new(), odd: Vec::new(), max_commutator: T::zero() };
    for odd in [false, true] {
        let ms: Vec<Monomial> = monomials.iter().copied().filter(|m| m.is_odd() == odd).collect();
        let dim = rep.dim();
        let columns: Vec<Vec<C<T>>> = ms
            .iter()
            .map(|&m| {
                let mv = rep.monomial_vacuum(m);
                gens.iter()
                    .zip(&gen_vac)
                    .flat_map(|(g, gv)| (apply_monomial(rep, m, gv) - g.apply(&mv)).iter().copied().collect::<Vec<_>>())
                    .collect()
            })
            .collect();
        // Most constraint rows vanish identically; keep the others only.
        let rows: Vec<usize> = (0..gens.len() * dim)
            .filter(|&r| columns.iter().any(|col| cabs(col[r]) > T::zero()))
            .collect();
        let c = Matrix::<T>::from_fn(rows.len(), ms.len(), |i, k| columns[k][rows[i]]);
        let ns = linalg::relative_null_space(&c, tol::<T>(crate::commutant::NULL_THRESHOLD));
        let ops: Vec<SparseOperator<T>> = ms.iter().map(|&m| rep.monomial(m)).collect();
        for j in 0..ns.basis.ncols() {
            let mut t = SparseOperator::zeros(dim, dim);
            for (k, op) in ops.iter().enumerate() {
                let coef = ns.basis[(k, j)];
                if cabs(coef) > T::drop_tolerance() {
                    t = &t + &op.scale(coef);
                }
            }
            for g in &gens {
                let err = (&(&t * g) - &(g * &t)).frobenius_norm();
                out.max_commutator = out.max_commutator.max(err);
            }
            if odd {
                out.odd.push(t);
            } else {
                out.even.push(t);
            }
        }
    }
    out
}

/// The same space from `{T : [T, α_t(g)] = 0, [T, g'] = 0 for g' ∈ M_R'}`
/// (double commutant). Dense in `dim²` unknowns; used to cross-check.
pub fn relative_commutant_by_commutation<T: Real>(
    rep: &QuasiFreeRep<T>,
    model: &ShiftModel<T>,
) -> crate::commutant::SolutionSpace<T> {
    let mut sys = ConstraintSystem::new(rep.dim());
    for g in image_generators(rep, model) {
        sys.push_commuting(g);
    }
    for g in rep.m_prime_generators(rep.all_modes()) {
        sys.push_commuting(g);
    }
    sys.solve()
}

/// Orthonormal basis (columns) of the span of the given vectors.
pub fn orthonormal_span<T: Real>(dim: usize, vs: &[Vector<T>]) -> Matrix<T> {
    if vs.is_empty() {
        return Matrix::zeros(dim, 0);
    }
    linalg::column_span(&Matrix::from_columns(vs), tol(1e-10))
}

/// `span{T Ω⊗Ω}` for the relative commutant, with its even part.
#[derive(Clone, Debug)]
pub struct VacuumSpan<T: Real> {
    pub basis: Matrix<T>,
    pub even_basis: Matrix<T>,
}

impl<T: Real> VacuumSpan<T> {
    pub fn vectors(&self) -> Vec<Vector<T>> {
        self.basis.column_iter().map(|c| c.into_owned()).collect()
    }

    pub fn even_vectors(&self) -> Vec<Vector<T>> {
        self.even_basis.column_iter().map(|c| c.into_owned()).collect()
    }
}

pub fn relative_commutant_vacuum_span<T: Real>(rep: &QuasiFreeRep<T>, model: &ShiftModel<T>) -> VacuumSpan<T> {
    vacuum_span_of(rep, &relative_commutant(rep, model))
}

pub fn vacuum_span_of<T: Real>(rep: &QuasiFreeRep<T>, rc: &RelativeCommutant<T>) -> VacuumSpan<T> {
    let all: Vec<_> = rc.all().map(|t| t.apply(rep.vacuum())).collect();
    let even: Vec<_> = rc.even.iter().map(|t| t.apply(rep.vacuum())).collect();
    VacuumSpan { basis: orthonormal_span(rep.dim(), &all), even_basis: orthonormal_span(rep.dim(), &even) }
}

/// `e_g ⊗ Ω` for a past mode `g`.
pub fn past_probe<T: Real>(rep: &QuasiFreeRep<T>, g: usize) -> Vector<T> {
    rep.basis(1 << g, 0)
}

/// Norm of the orthogonal projection of `x` onto the column span of `q`.
pub fn overlap<T: Real>(q: &Matrix<T>, x: &Vector<T>) -> T {
    if q.ncols() == 0 {
        return T::zero();
    }
    (q.adjoint() * x).norm()
}

/// Where the span vectors sit relative to the parity-constrained past span
/// `V = span{v_{I₁}⊗qv_{I₂} : I ⊆ 𝒫, |I₁| ≡ |I₂| mod 2}`.
#[derive(Clone, Debug)]
pub struct ParityReport<T> {
    pub vectors: usize,
    /// `max ‖v - Π_V v‖`.
    pub residual: T,
    /// `max` norm of the past-only, unequal-parity part.
    pub unequal_past: T,
    /// `max` norm of the part with future support.
    pub future_weight: T,
    /// Largest coefficient with future support and unequal total parity.
    pub unequal_parity_future: T,
    /// `rank Π_V(span)`.
    pub confined_dimension: usize,
    /// `max_g ‖Π_span (e_g⊗Ω)‖`.
    pub past_probe_overlap: T,
}

pub fn parity_confinement_check<T: Real>(span: &[Vector<T>], rep: &QuasiFreeRep<T>, model: &ShiftModel<T>) -> ParityReport<T> {
    let past = model.past_mask();
    let mut r = ParityReport {
        vectors: span.len(),
        residual: T::zero(),
        unequal_past: T::zero(),
        future_weight: T::zero(),
        unequal_parity_future: T::zero(),
        confined_dimension: 0,
        past_probe_overlap: T::zero(),
    };
    let mut confined = Vec::new();
    for v in span {
        let mut proj = Vector::zeros(rep.dim());
        let (mut out, mut uneq, mut fut) = (T::zero(), T::zero(), T::zero());
        for (idx, &c) in v.iter().enumerate() {
            let (left, right) = rep.split(idx);
            let w = c.norm_sqr();
            let past_only = (left | right) & !past == 0;
            let equal = sigma(left) == sigma(right);
            if past_only && equal {
                proj[idx] = c;
                continue;
            }
            out += w;
            if past_only {
                uneq += w;
            } else {
                fut += w;
                if !equal {
                    r.unequal_parity_future = r.unequal_parity_future.max(cabs(c));
                }
            }
        }
        r.residual = r.residual.max(out.sqrt());
        r.unequal_past = r.unequal_past.max(uneq.sqrt());
        r.future_weight = r.future_weight.max(fut.sqrt());
        confined.push(proj);
    }
    if !confined.is_empty() {
        r.confined_dimension = linalg::rank(&Matrix::from_columns(&confined), tol(1e-10));
    }
    let q = orthonormal_span(rep.dim(), span);
    for g in bits(past) {
        r.past_probe_overlap = r.past_probe_overlap.max(overlap(&q, &past_probe(rep, g)));
    }
    r
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// `span{y α_t(x) Ω⊗Ω}` has a nonzero orthogonal complement.
    ObstructionPresent,
    /// The span is the whole space.
    NoObstruction,
    /// Some `λ = 1/2`; reported without a verdict.
    Exploratory,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ObstructionPresent => "obstruction present",
            Verdict::NoObstruction => "no obstruction",
            Verdict::Exploratory => "exploratory",
        }
    }
}

/// Orthogonality of `e_g⊗Ω` to the span, per past mode.
#[derive(Clone, Debug)]
pub struct ProbeOverlap<T> {
    pub g: usize,
    /// Against `span{y α_t(x) Ω⊗Ω}` with `y` over the whole relative commutant.
    pub full: T,
    /// With `y` restricted to the even part.
    pub even: T,
}

#[derive(Clone, Debug)]
pub struct ExtendabilityReport<T> {
    pub dim: usize,
    pub relative_commutant: usize,
    pub relative_commutant_even: usize,
    pub span_dim: usize,
    pub even_span_dim: usize,
    /// `dim` of the orthogonal complement of the full span.
    pub complement_dim: usize,
    pub probes: Vec<ProbeOverlap<T>>,
    pub verdict: Verdict,
}

impl<T: Real> ExtendabilityReport<T> {
    pub fn max_full_overlap(&self) -> T {
        self.probes.iter().fold(T::zero(), |m, p| m.max(p.full))
    }

    pub fn max_even_overlap(&self) -> T {
        self.probes.iter().fold(T::zero(), |m, p| m.max(p.even))
    }
}

pub fn extendability_criterion<T: Real>(rep: &QuasiFreeRep<T>, model: &ShiftModel<T>) -> ExtendabilityReport<T> {
    extendability_from(rep, model, &relative_commutant(rep, model))
}

pub fn extendability_from<T: Real>(
    rep: &QuasiFreeRep<T>,
    model: &ShiftModel<T>,
    rc: &RelativeCommutant<T>,
) -> ExtendabilityReport<T> {
    let images: Vec<Vector<T>> = rep
        .monomials(model.small_mask())
        .into_iter()
        .map(|m| {
            let shifted = Monomial {
                create: model.shift_mask(m.create).expect("small"),
                annihilate: model.shift_mask(m.annihilate).expect("small"),
            };
            rep.monomial_vacuum(shifted)
        })
        .collect();
    let products = |ys: &mut dyn Iterator<Item = &SparseOperator<T>>| -> Vec<Vector<T>> {
        ys.flat_map(|y| images.iter().map(move |w| y.apply(w))).collect()
    };
    let full = orthonormal_span(rep.dim(), &products(&mut rc.all()));
    let even = orthonormal_span(rep.dim(), &products(&mut rc.even.iter()));
    let probes = bits(model.past_mask())
        .into_iter()
        .map(|g| {
            let e = past_probe(rep, g);
            ProbeOverlap { g, full: overlap(&full, &e), even: overlap(&even, &e) }
        })
        .collect();
    let complement_dim = rep.dim() - full.ncols();
    let verdict = if rep.cov().has_half() {
        Verdict::Exploratory
    } else if complement_dim > 0 {
        Verdict::ObstructionPresent
    } else {
        Verdict::NoObstruction
    };
    ExtendabilityReport {
        dim: rep.dim(),
        relative_commutant: rc.dimension(),
        relative_commutant_even: rc.even.len(),
        span_dim: full.ncols(),
        even_span_dim: even.ncols(),
        complement_dim,
        probes,
        verdict,
    }
}

/// `⟨v, e_g⊗Ω⟩` for reporting individual overlaps.
pub fn probe_coefficient<T: Real>(rep: &QuasiFreeRep<T>, v: &Vector<T>, g: usize) -> C<T> {
    inner(v, &past_probe(rep, g))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(l: usize, t: usize, lam: f64) -> (ShiftModel<f64>, QuasiFreeRep<f64>) {
        let m = ShiftModel::new(l, 1, t, vec![lam]).unwrap();
        let r = m.rep().unwrap();
        (m, r)
    }

    #[test]
    fn ab_pairs_agree_on_vacuum() {
        let (m, rep) = setup(2, 1, 0.3);
        let ab = ab_operators(&rep, &m, 1).unwrap();
        let v = rep.vacuum();
        assert!((ab.a_ann.apply(v) - rep.basis(0, 2)).norm() < 1e-12);
        assert!((ab.a_comm.apply(v) - rep.basis(0, 2)).norm() < 1e-12);
        assert!((ab.b_cre.apply(v) - rep.basis(2, 0)).norm() < 1e-12);
        assert!((ab.b_comm.apply(v) - rep.basis(2, 0)).norm() < 1e-12);
        let lit = ab.literal_a1.apply(v);
        assert!((lit - rep.basis(0, 2).scale((0.3f64 / 0.7).sqrt())).norm() < 1e-12);
        assert!(ab.literal_error(v) > 0.5);
        assert!(matches!(ab_operators(&rep, &m, 0), Err(Error::NotFutureMode { mode: 0 })));
    }

    #[test]
    fn decomposition_examples() {
        let (m, rep) = setup(2, 1, 0.3);
        let d = decompose_vacuum_vector(rep.vacuum(), &rep, &m, 1).unwrap();
        assert_eq!(d.u00.get(&(0, 0)), Some(&C::new(1.0, 0.0)));
        assert!(d.p.is_empty() && d.u10.is_empty());

        let v = rep.vacuum() + rep.basis(2, 2);
        let d = decompose_vacuum_vector(&v, &rep, &m, 1).unwrap();
        assert_eq!(d.p.get(&(0, 0)), Some(&(C::new(1.0, 0.0), C::new(1.0, 0.0))));
        assert!(d.u00.is_empty());

        let d = decompose_vacuum_vector(&rep.basis(2, 0), &rep, &m, 1).unwrap();
        assert_eq!(d.u10.get(&(0, 0)), Some(&C::new(1.0, 0.0)));
    }

    #[test]
    fn front_signs_fold_in() {
        // f_1 ∧ e_0 = -e_0 ∧ f_1, so the basis vector h_{01} has coefficient -1 on f_1∧e_0.
        let (m, rep) = setup(2, 1, 0.3);
        let d = decompose_vacuum_vector(&rep.basis(3, 0), &rep, &m, 1).unwrap();
        assert_eq!(d.u10.get(&(1, 0)), Some(&C::new(-1.0, 0.0)));
        assert!((d.reassemble(&rep) - rep.basis(3, 0)).norm() < 1e-14);
    }

    #[test]
    fn reassembly_of_random_vector() {
        let (m, rep) = setup(3, 1, 0.3);
        let v = Vector::<f64>::from_fn(rep.dim(), |i, _| C::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()));
        for l in [1, 2] {
            let d = decompose_vacuum_vector(&v, &rep, &m, l).unwrap();
            assert!((d.reassemble(&rep) - &v).norm() < 1e-12);
            assert!(d.support_invariants_hold());
        }
    }

    #[test]
    fn relative_commutant_trivial_at_t_zero() {
        let (m, rep) = setup(2, 0, 0.3);
        let rc = relative_commutant(&rep, &m);
        assert_eq!(rc.dimension(), 1);
        let span = relative_commutant_vacuum_span(&rep, &m);
        assert_eq!(span.basis.ncols(), 1);
        assert!((overlap(&span.basis, rep.vacuum()) - 1.0).abs() < 1e-12);
        let ext = extendability_criterion(&rep, &m);
        assert_eq!(ext.complement_dim, 0);
        assert_eq!(ext.verdict, Verdict::NoObstruction);
    }

    #[test]
    fn relative_commutant_routes_agree() {
        let (m, rep) = setup(2, 1, 0.3);
        let rc = relative_commutant(&rep, &m);
        assert!(rc.max_commutator < 1e-10);
        let other = relative_commutant_by_commutation(&rep, &m);
        assert_eq!(rc.dimension(), other.dimension());
        for t in rc.all() {
            assert!(other.residual(t) < 1e-9);
        }
    }

    #[test]
    fn span_contains_vacuum_and_past_pairs() {
        let (m, rep) = setup(2, 1, 0.3);
        let span = relative_commutant_vacuum_span(&rep, &m);
        assert!((overlap(&span.basis, rep.vacuum()) - 1.0).abs() < 1e-10);
        assert!((overlap(&span.even_basis, &rep.basis(1, 1)) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn coefficient_lemma_on_span() {
        let m = ShiftModel::new(3, 1, 1, vec![0.3]).unwrap();
        let rep = m.rep().unwrap();
        let span = relative_commutant_vacuum_span(&rep, &m);
        for v in span.vectors() {
            for l in bits(m.future_mask()) {
                let r = coefficient_equations_check(&v, &rep, &m, l).unwrap();
                assert!(r.bucket_max() < 1e-10, "{r:?}");
                assert!(r.u_max() < 1e-10, "{r:?}");
            }
        }
    }

    #[test]
    fn precondition_rejects_arbitrary_vector() {
        let (m, rep) = setup(2, 1, 0.3);
        let v = rep.basis(2, 0);
        assert!(matches!(coefficient_equations_check(&v, &rep, &m, 1), Err(Error::Precondition { .. })));
    }

    #[test]
    fn parity_of_vacuum() {
        let (m, rep) = setup(2, 1, 0.3);
        let r = parity_confinement_check(&[rep.vacuum().clone()], &rep, &m);
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.confined_dimension, 1);
    }

    #[test]
    fn even_sector_is_confined() {
        let (m, rep) = setup(3, 1, 0.3);
        let span = relative_commutant_vacuum_span(&rep, &m);
        let r = parity_confinement_check(&span.even_vectors(), &rep, &m);
        assert!(r.unequal_parity_future < 1e-10 && r.unequal_past < 1e-10);
        assert!(r.past_probe_overlap < 1e-10);
    }
}
