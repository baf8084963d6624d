//! Intertwiner spaces `{T : left·T = T·right}` for lists of operator pairs,
//! the flow-side and commutant-side spaces of the shift, their intersection
//! `H_t`, and the canonical intertwiners `T_{I₁I₂}`.
//!
//! The unknown `T` has `dim²` entries. Each constraint row couples only a few
//! entries, so the system splits into connected components (found with a
//! union–find pass) which are solved independently by a dense SVD. The
//! stacked system is block diagonal after a permutation, so its largest
//! singular value is the largest over blocks and the relative threshold is
//! applied globally.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::flow::{flow_isometry, support_projection, ShiftModel, SmallAlgebra};
use crate::fock::{bits, wedge_sign, FockIndex};
use crate::linalg::{self, Matrix};
use crate::modular::closed_form_j;
use crate::quasifree::{submasks, QuasiFreeRep};
use crate::scalar::{cabs, czero, sign, tol, Real, C};
use crate::sparse::{AntiLinearMap, SparseOperator};

/// Relative singular-value threshold for null spaces.
pub const NULL_THRESHOLD: f64 = 1e-9;

/// Equations `left_k · T = T · right_k`.
#[derive(Clone, Debug)]
pub struct ConstraintSystem<T: Real> {
    dim: usize,
    pairs: Vec<(SparseOperator<T>, SparseOperator<T>)>,
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n as u32).collect() }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = p;
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb) as usize] = ra.min(rb);
        }
    }
}

/// Flat storage of sparse constraint rows over unknown indices.
struct Rows<T: Real> {
    ptr: Vec<usize>,
    entries: Vec<(u32, C<T>)>,
}

impl<T: Real> ConstraintSystem<T> {
    pub fn new(dim: usize) -> Self {
        Self { dim, pairs: Vec::new() }
    }

    pub fn push(&mut self, left: SparseOperator<T>, right: SparseOperator<T>) {
        assert_eq!((left.rows(), left.cols()), (self.dim, self.dim), "left operator shape");
        assert_eq!((right.rows(), right.cols()), (self.dim, self.dim), "right operator shape");
        self.pairs.push((left, right));
    }

    /// Adds `g·T = T·g`, i.e. commutation with `g`.
    pub fn push_commuting(&mut self, g: SparseOperator<T>) {
        self.push(g.clone(), g);
    }

    pub fn extend(&mut self, other: ConstraintSystem<T>) {
        assert_eq!(self.dim, other.dim);
        self.pairs.extend(other.pairs);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pairs(&self) -> &[(SparseOperator<T>, SparseOperator<T>)] {
        &self.pairs
    }

    /// Number of scalar unknowns, `dim²`.
    pub fn unknowns(&self) -> usize {
        self.dim * self.dim
    }

    fn assemble(&self) -> Rows<T> {
        let n = self.dim;
        let mut rows = Rows { ptr: vec![0], entries: Vec::new() };
        let mut scratch: Vec<(u32, C<T>)> = Vec::new();
        for (left, right) in &self.pairs {
            let rt = right.transpose();
            for r in 0..n {
                let lrow: Vec<_> = left.row(r).collect();
                for c in 0..n {
                    scratch.clear();
                    // (left·T)[r,c] = Σ_m left[r,m] T[m,c]
                    scratch.extend(lrow.iter().map(|&(m, a)| ((m * n + c) as u32, a)));
                    // (T·right)[r,c] = Σ_m T[r,m] right[m,c]
                    scratch.extend(rt.row(c).map(|(m, b)| ((r * n + m) as u32, -b)));
                    if scratch.is_empty() {
                        continue;
                    }
                    scratch.sort_unstable_by_key(|e| e.0);
                    let mut merged: Vec<(u32, C<T>)> = Vec::with_capacity(scratch.len());
                    for &(u, v) in &scratch {
                        match merged.last_mut() {
                            Some(last) if last.0 == u => last.1 += v,
                            _ => merged.push((u, v)),
                        }
                    }
                    let tol = T::drop_tolerance();
                    merged.retain(|e| cabs(e.1) > tol);
                    if merged.is_empty() {
                        continue;
                    }
                    rows.entries.extend(merged);
                    rows.ptr.push(rows.entries.len());
                }
            }
        }
        rows
    }

    /// Orthonormal (Hilbert–Schmidt) basis of the solution space.
    pub fn solve(&self) -> SolutionSpace<T> {
        self.solve_with(tol(NULL_THRESHOLD))
    }

    pub fn solve_with(&self, rel_threshold: T) -> SolutionSpace<T> {
        let total = self.unknowns();
        let rows = self.assemble();
        let n_rows = rows.ptr.len() - 1;
        let mut uf = UnionFind::new(total);
        for k in 0..n_rows {
            let span = &rows.entries[rows.ptr[k]..rows.ptr[k + 1]];
            for w in span.windows(2) {
                uf.union(w[0].0, w[1].0);
            }
        }
        // Component id per unknown and local positions.
        let mut comp_of_root: HashMap<u32, usize> = HashMap::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut local = vec![0u32; total];
        for u in 0..total {
            let root = uf.find(u as u32);
            let id = *comp_of_root.entry(root).or_insert_with(|| {
                members.push(Vec::new());
                members.len() - 1
            });
            local[u] = members[id].len() as u32;
            members[id].push(u);
        }
        let mut comp_rows: Vec<Vec<usize>> = vec![Vec::new(); members.len()];
        for k in 0..n_rows {
            let first = rows.entries[rows.ptr[k]].0;
            comp_rows[comp_of_root[&uf.find(first)]].push(k);
        }

        struct Factored<T: Real> {
            sv: Vec<T>,
            v_t: Matrix<T>,
        }
        let mut factored = Vec::with_capacity(members.len());
        let mut sigma_max = T::zero();
        for (id, mem) in members.iter().enumerate() {
            let size = mem.len();
            let m_rows = comp_rows[id].len().max(size);
            let mut dense = Matrix::<T>::zeros(m_rows, size);
            for (i, &k) in comp_rows[id].iter().enumerate() {
                for &(u, v) in &rows.entries[rows.ptr[k]..rows.ptr[k + 1]] {
                    dense[(i, local[u as usize] as usize)] = v;
                }
            }
            let svd = dense.svd(false, true);
            let sv: Vec<T> = svd.singular_values.iter().copied().collect();
            sigma_max = sv.iter().copied().fold(sigma_max, |a, b| a.max(b));
            factored.push(Factored { sv, v_t: svd.v_t.expect("requested") });
        }

        let threshold = rel_threshold * sigma_max;
        let mut blocks = Vec::new();
        let mut largest_null = T::zero();
        let mut smallest_kept: Option<T> = None;
        for (mem, f) in members.into_iter().zip(factored) {
            let mut cols = Vec::new();
            for (k, &s) in f.sv.iter().enumerate() {
                if s <= threshold {
                    largest_null = largest_null.max(s);
                    cols.push(f.v_t.row(k).adjoint());
                } else {
                    smallest_kept = Some(smallest_kept.map_or(s, |x: T| x.min(s)));
                }
            }
            if !cols.is_empty() {
                blocks.push(SolutionBlock { unknowns: mem, basis: Matrix::from_columns(&cols) });
            }
        }
        SolutionSpace::from_blocks(self.dim, blocks, sigma_max, largest_null, smallest_kept)
    }
}

/// Null vectors supported on one connected component of unknowns.
#[derive(Clone, Debug)]
pub struct SolutionBlock<T: Real> {
    /// Global unknown indices `r * dim + c`, increasing.
    pub unknowns: Vec<usize>,
    /// Orthonormal columns over `unknowns`.
    pub basis: Matrix<T>,
}

/// Block-sparse orthonormal basis of a space of `dim × dim` operators.
#[derive(Clone, Debug)]
pub struct SolutionSpace<T: Real> {
    dim: usize,
    blocks: Vec<SolutionBlock<T>>,
    locate: HashMap<usize, (usize, usize)>,
    pub sigma_max: T,
    pub largest_null: T,
    pub smallest_kept: Option<T>,
}

impl<T: Real> SolutionSpace<T> {
    fn from_blocks(
        dim: usize,
        blocks: Vec<SolutionBlock<T>>,
        sigma_max: T,
        largest_null: T,
        smallest_kept: Option<T>,
    ) -> Self {
        let mut locate = HashMap::new();
        for (b, blk) in blocks.iter().enumerate() {
            for (i, &u) in blk.unknowns.iter().enumerate() {
                locate.insert(u, (b, i));
            }
        }
        Self { dim, blocks, locate, sigma_max, largest_null, smallest_kept }
    }

    /// Orthonormalizes arbitrary operators into a block-sparse space.
    pub fn span_of(dim: usize, ops: &[SparseOperator<T>], rel_tol: T) -> Self {
        let groups = group_by_support(dim, ops);
        let mut blocks = Vec::new();
        for (unknowns, members) in groups {
            let pos: HashMap<usize, usize> = unknowns.iter().enumerate().map(|(i, &u)| (u, i)).collect();
            let mut m = Matrix::<T>::zeros(unknowns.len(), members.len());
            for (j, &k) in members.iter().enumerate() {
                for (r, c, v) in ops[k].triplets() {
                    m[(pos[&(r * dim + c)], j)] = v;
                }
            }
            let basis = linalg::column_span(&m, rel_tol);
            if basis.ncols() > 0 {
                blocks.push(SolutionBlock { unknowns, basis });
            }
        }
        Self::from_blocks(dim, blocks, T::zero(), T::zero(), None)
    }

    /// Operator dimension (`T` is `dim × dim`).
    pub fn operator_dim(&self) -> usize {
        self.dim
    }

    pub fn dimension(&self) -> usize {
        self.blocks.iter().map(|b| b.basis.ncols()).sum()
    }

    pub fn blocks(&self) -> &[SolutionBlock<T>] {
        &self.blocks
    }

    /// Basis elements as sparse operators.
    pub fn operators(&self) -> Vec<SparseOperator<T>> {
        let n = self.dim;
        self.blocks
            .iter()
            .flat_map(|b| {
                (0..b.basis.ncols()).map(move |k| {
                    SparseOperator::from_triplets(
                        n,
                        n,
                        b.unknowns.iter().enumerate().map(|(i, &u)| (u / n, u % n, b.basis[(i, k)])),
                    )
                })
            })
            .collect()
    }

    /// Hilbert–Schmidt distance from `x` to the space.
    pub fn residual(&self, x: &SparseOperator<T>) -> T {
        let n = self.dim;
        let mut outside = T::zero();
        let mut per_block: HashMap<usize, Vec<(usize, C<T>)>> = HashMap::new();
        for (r, c, v) in x.triplets() {
            match self.locate.get(&(r * n + c)) {
                Some(&(b, i)) => per_block.entry(b).or_default().push((i, v)),
                None => outside += v.norm_sqr(),
            }
        }
        for (b, entries) in per_block {
            let blk = &self.blocks[b];
            let mut xb = nalgebra::DVector::<C<T>>::zeros(blk.unknowns.len());
            for (i, v) in entries {
                xb[i] = v;
            }
            let proj = &blk.basis * (blk.basis.adjoint() * &xb);
            outside += (xb - proj).norm_squared();
        }
        outside.sqrt()
    }

    /// Space spanned by the projections `p(r,c)·T` of the basis, where the
    /// mask `keep(r, c)` selects entries.
    pub fn masked(&self, keep: impl Fn(usize, usize) -> bool, rel_tol: T) -> Self {
        let n = self.dim;
        let mut blocks = Vec::new();
        for b in &self.blocks {
            let rows: Vec<usize> = (0..b.unknowns.len()).filter(|&i| keep(b.unknowns[i] / n, b.unknowns[i] % n)).collect();
            if rows.is_empty() {
                continue;
            }
            let sub = Matrix::<T>::from_fn(rows.len(), b.basis.ncols(), |i, k| b.basis[(rows[i], k)]);
            // Block bases are orthonormal: a restriction that is pure round-off
            // must not be rescaled into a spurious direction.
            if linalg::largest_singular_value(&sub) <= rel_tol {
                continue;
            }
            let basis = linalg::column_span(&sub, rel_tol);
            if basis.ncols() > 0 {
                blocks.push(SolutionBlock { unknowns: rows.iter().map(|&i| b.unknowns[i]).collect(), basis });
            }
        }
        Self::from_blocks(n, blocks, self.sigma_max, self.largest_null, self.smallest_kept)
    }

    /// Vectors `T ξ` for every basis element `T`.
    pub fn apply_all(&self, xi: &crate::sparse::Vector<T>) -> Vec<crate::sparse::Vector<T>> {
        self.operators().iter().map(|t| t.apply(xi)).collect()
    }
}

/// Groups operators whose supports overlap, returning (sorted unknowns, member indices).
fn group_by_support<T: Real>(dim: usize, ops: &[SparseOperator<T>]) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut index: HashMap<usize, u32> = HashMap::new();
    let mut unknowns = Vec::new();
    let mut supports = Vec::with_capacity(ops.len());
    for op in ops {
        let s: Vec<u32> = op
            .triplets()
            .map(|(r, c, _)| {
                let u = r * dim + c;
                *index.entry(u).or_insert_with(|| {
                    unknowns.push(u);
                    (unknowns.len() - 1) as u32
                })
            })
            .collect();
        supports.push(s);
    }
    let mut uf = UnionFind::new(unknowns.len());
    for s in &supports {
        for w in s.windows(2) {
            uf.union(w[0], w[1]);
        }
    }
    let mut groups: HashMap<u32, (Vec<usize>, Vec<usize>)> = HashMap::new();
    for (k, u) in unknowns.iter().enumerate() {
        groups.entry(uf.find(k as u32)).or_default().0.push(*u);
    }
    for (k, s) in supports.iter().enumerate() {
        if let Some(&first) = s.first() {
            groups.get_mut(&uf.find(first)).expect("grouped").1.push(k);
        }
    }
    let mut out: Vec<_> = groups.into_values().collect();
    for g in &mut out {
        g.0.sort_unstable();
    }
    out.sort_by_key(|g| g.0[0]);
    out
}

/// Rank of a set of operators (as vectors under the Hilbert–Schmidt product).
pub fn span_rank<T: Real>(dim: usize, ops: &[SparseOperator<T>], rel_tol: T) -> usize {
    SolutionSpace::span_of(dim, ops, rel_tol).dimension()
}

/// `Γ⊗Γ` sign of a doubled basis index.
pub fn grading_odd<T: Real>(rep: &QuasiFreeRep<T>, idx: usize) -> bool {
    let (l, r) = rep.split(idx);
    (l.count_ones() + r.count_ones()) % 2 == 1
}

/// Entries `(r, c)` on which `Ad(Γ⊗Γ)` acts by `+1`.
pub fn even_entry<T: Real>(rep: &QuasiFreeRep<T>) -> impl Fn(usize, usize) -> bool + '_ {
    move |r, c| grading_odd(rep, r) == grading_odd(rep, c)
}

/// Which intertwiner equation to solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `α_t(g) T = T g` for small generators `g ∈ {a_R(h_m), a*_R(h_m)}`.
    Flow,
    /// `α'_t(g') T = T g'` for `g' ∈ {Γ⊗Γ b_R(h_m), b*_R(h_m) Γ⊗Γ}`,
    /// `α'_t = J α_t(J · J) J`.
    CommutantFlow,
}

pub fn flow_constraints<T: Real>(rep: &QuasiFreeRep<T>, model: &ShiftModel<T>) -> ConstraintSystem<T> {
    let mut sys = ConstraintSystem::new(rep.dim());
    for m in bits(model.small_mask()) {
        let s = model.shifted(m).expect("small mode survives the shift");
        sys.push(rep.a(s).clone(), rep.a(m).clone());
        sys.push(rep.a_star(s).clone(), rep.a_star(m).clone());
    }
    sys
}

pub fn commutant_flow_constraints<T: Real>(
    rep: &QuasiFreeRep<T>,
    model: &ShiftModel<T>,
    j: &AntiLinearMap<T>,
) -> Result<ConstraintSystem<T>> {
    let small = SmallAlgebra::new(rep, model);
    let mut sys = ConstraintSystem::new(rep.dim());
    for g in rep.m_prime_generators(model.small_mask()) {
        let image = j.conjugate(&small.alpha(&j.conjugate(&g))?);
        sys.push(image, g);
    }
    Ok(sys)
}

/// `α'_t(g')` for an element `g'` of the small commutant algebra.
pub fn alpha_prime<T: Real>(
    rep: &QuasiFreeRep<T>,
    model: &ShiftModel<T>,
    j: &AntiLinearMap<T>,
    g: &SparseOperator<T>,
) -> Result<SparseOperator<T>> {
    Ok(j.conjugate(&SmallAlgebra::new(rep, model).alpha(&j.conjugate(g))?))
}

pub fn solve_intertwiners<T: Real>(rep: &QuasiFreeRep<T>, model: &ShiftModel<T>, side: Side) -> Result<SolutionSpace<T>> {
    Ok(match side {
        Side::Flow => flow_constraints(rep, model).solve(),
        Side::CommutantFlow => commutant_flow_constraints(rep, model, &closed_form_j(rep))?.solve(),
    })
}

/// `H_t = E^{α_t} ∩ E^{α'_t}` from the stacked constraints.
pub fn super_product_space<T: Real>(rep: &QuasiFreeRep<T>, model: &ShiftModel<T>) -> Result<SolutionSpace<T>> {
    let mut sys = flow_constraints(rep, model);
    sys.extend(commutant_flow_constraints(rep, model, &closed_form_j(rep))?);
    Ok(sys.solve())
}

/// `T_{I₁I₂}(h_{J₁} ⊗ q h_{J₂}) = (-1)^{|I₁||J₁|} s h_{J₁}∧e_{I₁} ⊗ q s h_{J₂}∧q e_{I₂}`
/// for `J₁, J₂` in the small lattice; zero elsewhere.
#[derive(Clone, Debug)]
pub struct CanonicalIntertwiner<T: Real> {
    pub i1: Vec<usize>,
    pub i2: Vec<usize>,
    pub matrix: SparseOperator<T>,
}

pub fn canonical_intertwiner<T: Real>(
    rep: &QuasiFreeRep<T>,
    model: &ShiftModel<T>,
    i1: &[usize],
    i2: &[usize],
) -> Result<CanonicalIntertwiner<T>> {
    let past = model.past_mask();
    for &m in i1.iter().chain(i2) {
        if m >= model.n_modes() || past & (1 << m) == 0 {
            return Err(Error::NotPastMode { mode: m });
        }
    }
    FockIndex::from_modes(i1)?;
    FockIndex::from_modes(i2)?;
    if i1.len() % 2 != i2.len() % 2 {
        return Err(Error::UnequalParity);
    }
    let insert = |j: usize, ins: &[usize]| -> (usize, bool) {
        let mut seq: Vec<usize> = bits(j).into_iter().map(|m| model.shifted(m).expect("small")).collect();
        seq.extend_from_slice(ins);
        wedge_sign(&seq).expect("past and shifted modes are disjoint")
    };
    let mut trips = Vec::new();
    for j1 in submasks(model.small_mask()) {
        let (out1, s1) = insert(j1, i1);
        let pre = (i1.len() * j1.count_ones() as usize) % 2 == 1;
        for j2 in submasks(model.small_mask()) {
            let (out2, s2) = insert(j2, i2);
            let v = sign::<T>(pre ^ s1 ^ s2);
            trips.push((rep.index(out1, out2), rep.index(j1, j2), C::new(v, T::zero())));
        }
    }
    Ok(CanonicalIntertwiner {
        i1: i1.to_vec(),
        i2: i2.to_vec(),
        matrix: SparseOperator::from_triplets(rep.dim(), rep.dim(), trips),
    })
}

/// All `T_{I₁I₂}` with `I₁, I₂ ⊆ past` of equal parity (factors increasing).
pub fn canonical_intertwiners<T: Real>(rep: &QuasiFreeRep<T>, model: &ShiftModel<T>) -> Vec<CanonicalIntertwiner<T>> {
    let subs = submasks(model.past_mask());
    let mut out = Vec::new();
    for &a in &subs {
        for &b in &subs {
            if a.count_ones() % 2 == b.count_ones() % 2 {
                out.push(canonical_intertwiner(rep, model, &bits(a), &bits(b)).expect("valid by construction"));
            }
        }
    }
    out
}

/// `2^{2p-1}` equal-parity pairs of subsets of `p` past modes.
pub fn predicted_dimension(p: usize) -> usize {
    if p == 0 {
        1
    } else {
        1 << (2 * p - 1)
    }
}

/// `(P B* A P)` is `c·P`: returns `c` if the defect is below `tol`.
pub fn scalar_pairing<T: Real>(
    a: &SparseOperator<T>,
    b: &SparseOperator<T>,
    projection: &SparseOperator<T>,
    tol: T,
) -> (C<T>, bool) {
    let m = &(&(projection * &b.adjoint()) * a) * projection;
    let tr_p = projection.diagonal_entries().into_iter().fold(czero::<T>(), |x, y| x + y);
    let tr_m = m.diagonal_entries().into_iter().fold(czero::<T>(), |x, y| x + y);
    let c = if cabs(tr_p) > T::zero() { tr_m / tr_p } else { czero() };
    let defect = (&m - &projection.scale(c)).frobenius_norm();
    (c, defect <= tol)
}

/// Checks of the canonical intertwiners against computed spaces.
#[derive(Clone, Debug)]
pub struct CanonicalReport<T> {
    pub count: usize,
    pub rank: usize,
    /// `max ‖T - Π_{E^{α_t}} T‖`.
    pub flow_residual: T,
    /// `max ‖T - Π_{E^{α'_t}} T‖`.
    pub commutant_residual: T,
    /// `max ‖α_t(g) T - T g‖` over small generators, computed directly.
    pub intertwining: T,
    /// `max ‖α'_t(g') T - T g'‖`.
    pub commutant_intertwining: T,
    /// `max ‖J T_{I₁I₂} J - T_{I₂I₁}‖` with the orderings kept.
    pub j_conjugation: T,
    /// `max ‖J T_{I₁I₂} J - T_{rev I₂, rev I₁}‖`; `J` reverses products.
    pub j_conjugation_reversed: T,
    /// `max |P T*_{I} T_{K} P - δ P|`.
    pub orthogonality: T,
}

pub fn canonical_report<T: Real>(
    rep: &QuasiFreeRep<T>,
    model: &ShiftModel<T>,
    e_flow: Option<&SolutionSpace<T>>,
    e_comm: Option<&SolutionSpace<T>>,
) -> Result<CanonicalReport<T>> {
    let ts = canonical_intertwiners(rep, model);
    let j = closed_form_j(rep);
    let flow = flow_constraints(rep, model);
    let comm = commutant_flow_constraints(rep, model, &j)?;
    let p = flow_isometry(rep, model)?.initial_projection();
    let mut r = CanonicalReport {
        count: ts.len(),
        rank: span_rank(rep.dim(), &ts.iter().map(|t| t.matrix.clone()).collect::<Vec<_>>(), tol(1e-10)),
        flow_residual: T::zero(),
        commutant_residual: T::zero(),
        intertwining: T::zero(),
        commutant_intertwining: T::zero(),
        j_conjugation: T::zero(),
        j_conjugation_reversed: T::zero(),
        orthogonality: T::zero(),
    };
    let by_sets: HashMap<(Vec<usize>, Vec<usize>), &SparseOperator<T>> =
        ts.iter().map(|t| ((t.i1.clone(), t.i2.clone()), &t.matrix)).collect();
    for t in &ts {
        if let Some(e) = e_flow {
            r.flow_residual = r.flow_residual.max(e.residual(&t.matrix));
        }
        if let Some(e) = e_comm {
            r.commutant_residual = r.commutant_residual.max(e.residual(&t.matrix));
        }
        for (sys, slot) in [(&flow, &mut r.intertwining), (&comm, &mut r.commutant_intertwining)] {
            for (left, right) in sys.pairs() {
                let err = (&(left * &t.matrix) - &(&t.matrix * right)).frobenius_norm();
                *slot = slot.max(err);
            }
        }
        let jtj = j.conjugate(&t.matrix);
        let swapped = by_sets[&(t.i2.clone(), t.i1.clone())];
        r.j_conjugation = r.j_conjugation.max((&jtj - swapped).frobenius_norm());
        let rev = |v: &[usize]| v.iter().rev().copied().collect::<Vec<_>>();
        let reversed = canonical_intertwiner(rep, model, &rev(&t.i2), &rev(&t.i1))?;
        r.j_conjugation_reversed = r.j_conjugation_reversed.max((&jtj - &reversed.matrix).frobenius_norm());
        for u in &ts {
            let m = &(&(&p * &u.matrix.adjoint()) * &t.matrix) * &p;
            let expected = if u.i1 == t.i1 && u.i2 == t.i2 { p.clone() } else { SparseOperator::zeros(rep.dim(), rep.dim()) };
            r.orthogonality = r.orthogonality.max((&m - &expected).max_abs());
        }
    }
    Ok(r)
}

/// Dimensions of the intertwiner spaces and of `H_t`, split by the
/// `Ad(Γ⊗Γ)` grading and compressed by the initial projection.
#[derive(Clone, Debug)]
pub struct SuperProductReport<T> {
    pub p: usize,
    pub predicted: usize,
    pub e_flow: usize,
    pub e_commutant: usize,
    pub h: usize,
    pub h_even: usize,
    pub h_odd: usize,
    pub h_compressed: usize,
    pub h_compressed_even: usize,
    pub h_compressed_odd: usize,
    /// `dim span{T Ω⊗Ω : T ∈ H_t}` and its even part.
    pub h_vacuum: usize,
    pub h_vacuum_even: usize,
    /// Distance of the compressed even sector from `span{T_{I₁I₂}}`.
    pub even_vs_canonical: T,
    pub canonical: CanonicalReport<T>,
}

pub fn super_product_report<T: Real>(rep: &QuasiFreeRep<T>, model: &ShiftModel<T>) -> Result<SuperProductReport<T>> {
    let rel: T = tol(1e-10);
    let e_flow = solve_intertwiners(rep, model, Side::Flow)?;
    let e_comm = solve_intertwiners(rep, model, Side::CommutantFlow)?;
    let h = super_product_space(rep, model)?;
    let even = even_entry(rep);
    let odd = |r, c| !even(r, c);
    let small = model.small_mask();
    let initial = |c: usize| {
        let (l, r) = rep.split(c);
        (l | r) & !small == 0
    };
    let h_even = h.masked(&even, rel);
    let h_odd = h.masked(odd, rel);
    let comp = h.masked(|_, c| initial(c), rel);
    let comp_even = h.masked(|r, c| initial(c) && even(r, c), rel);
    let comp_odd = h.masked(|r, c| initial(c) && !even(r, c), rel);

    let vac_rank = |space: &SolutionSpace<T>| {
        let vs = space.apply_all(rep.vacuum());
        if vs.is_empty() {
            0
        } else {
            linalg::rank(&Matrix::from_columns(&vs), rel)
        }
    };
    let canonical = canonical_report(rep, model, Some(&e_flow), Some(&e_comm))?;
    let ts: Vec<_> = canonical_intertwiners(rep, model).into_iter().map(|t| t.matrix).collect();
    let canon_span = SolutionSpace::span_of(rep.dim(), &ts, rel);
    let even_vs_canonical = comp_even
        .operators()
        .iter()
        .map(|x| canon_span.residual(x))
        .fold(T::zero(), |a, b| a.max(b));
    Ok(SuperProductReport {
        p: model.p(),
        predicted: predicted_dimension(model.p()),
        e_flow: e_flow.dimension(),
        e_commutant: e_comm.dimension(),
        h: h.dimension(),
        h_even: h_even.dimension(),
        h_odd: h_odd.dimension(),
        h_compressed: comp.dimension(),
        h_compressed_even: comp_even.dimension(),
        h_compressed_odd: comp_odd.dimension(),
        h_vacuum: vac_rank(&h),
        h_vacuum_even: vac_rank(&h_even),
        even_vs_canonical,
        canonical,
    })
}

/// Dimensions and containments for `E^{α_t} = [M' u_t] = α_t(M)' u_t`.
#[derive(Clone, Debug)]
pub struct BimoduleReport<T> {
    pub dim_e: usize,
    /// `dim span{m' S_t : m' ∈ M'}`.
    pub dim_m_prime_u: usize,
    /// `dim span{y S_t : y ∈ α_t(M_small)'}`.
    pub dim_alpha_prime_u: usize,
    /// `max_m' dist(m' S_t, E^{α_t})`; must vanish.
    pub m_prime_u_in_e: T,
    /// `max_y dist(y S_t, E^{α_t})`; must vanish.
    pub alpha_prime_u_in_e: T,
    /// Same with `m'` ranging over the commutant of the small algebra only.
    /// Such `m'` need not commute with `α_t(x)`, so this is informational.
    pub dim_small_prime_u: usize,
    pub small_prime_u_in_e: T,
    /// `dim E^{α_t} S_t*S_t`, to compare with `dim_alpha_prime_u`.
    pub dim_e_compressed: usize,
    /// `max_m dist(m S_t, E^{α'_t})` over small monomials `m`.
    pub m_u_in_e_prime: T,
}

impl<T: Real> BimoduleReport<T> {
    /// `E^{α_t} S_t*S_t` and `α_t(M_small)' u_t` have equal dimension.
    pub fn compressed_equality(&self) -> bool {
        self.dim_e_compressed == self.dim_alpha_prime_u
    }
}

pub fn verify_bimodule_theorem<T: Real>(rep: &QuasiFreeRep<T>, model: &ShiftModel<T>) -> Result<BimoduleReport<T>> {
    let rel: T = tol(1e-10);
    let dim = rep.dim();
    let e = solve_intertwiners(rep, model, Side::Flow)?;
    let e_prime = solve_intertwiners(rep, model, Side::CommutantFlow)?;
    let s = flow_isometry(rep, model)?.s;

    let mut full_comm = ConstraintSystem::new(dim);
    for g in rep.m_generators(rep.all_modes()) {
        full_comm.push_commuting(g);
    }
    let mut small_comm = ConstraintSystem::new(dim);
    let mut image_comm = ConstraintSystem::new(dim);
    for m in bits(model.small_mask()) {
        let sm = model.shifted(m).expect("small");
        small_comm.push_commuting(rep.a(m).clone());
        small_comm.push_commuting(rep.a_star(m).clone());
        image_comm.push_commuting(rep.a(sm).clone());
        image_comm.push_commuting(rep.a_star(sm).clone());
    }
    let times_s = |sys: ConstraintSystem<T>| -> Vec<SparseOperator<T>> { sys.solve().operators().iter().map(|x| x * &s).collect() };
    let m_prime_u = times_s(full_comm);
    let small_prime_u = times_s(small_comm);
    let alpha_prime_u = times_s(image_comm);
    let worst = |ops: &[SparseOperator<T>], space: &SolutionSpace<T>| {
        ops.iter().map(|x| space.residual(x)).fold(T::zero(), |a, b| a.max(b))
    };
    let small = model.small_mask();
    let dim_e_compressed = e
        .masked(
            |_, c| {
                let (l, r) = rep.split(c);
                (l | r) & !small == 0
            },
            rel,
        )
        .dimension();
    let m_u: Vec<_> = rep.monomials(small).into_iter().map(|m| &rep.monomial(m) * &s).collect();
    Ok(BimoduleReport {
        dim_e: e.dimension(),
        dim_m_prime_u: span_rank(dim, &m_prime_u, rel),
        dim_alpha_prime_u: span_rank(dim, &alpha_prime_u, rel),
        m_prime_u_in_e: worst(&m_prime_u, &e),
        alpha_prime_u_in_e: worst(&alpha_prime_u, &e),
        dim_small_prime_u: span_rank(dim, &small_prime_u, rel),
        small_prime_u_in_e: worst(&small_prime_u, &e),
        dim_e_compressed,
        m_u_in_e_prime: worst(&m_u, &e_prime),
    })
}

/// Multiplication `H_s × H_t → H_{s+t}`, `(S, T) ↦ ST`.
#[derive(Clone, Debug)]
pub struct ProductReport<T> {
    pub pairs: usize,
    /// `max dist(ST, H_{s+t})`.
    pub max_residual: T,
    /// `max |⟨S T, S' T'⟩ - ⟨S, S'⟩⟨T, T'⟩|` over pairs with scalar pairings.
    pub isometry_defect: T,
    /// Pairings `T*S` that were not scalar on the initial projection.
    pub non_scalar: usize,
}

/// `basis_s ⊂ H_s`, `basis_t ⊂ H_t`; `model` fixes the lattice and symbol.
pub fn product_structure_check<T: Real>(
    rep: &QuasiFreeRep<T>,
    model: &ShiftModel<T>,
    s: usize,
    t: usize,
    basis_s: &[SparseOperator<T>],
    basis_t: &[SparseOperator<T>],
) -> Result<ProductReport<T>> {
    if s + t > model.l() {
        return Err(Error::InvalidLattice(format!("s + t = {} exceeds L = {}", s + t, model.l())));
    }
    let tol: T = tol(1e-9);
    let m_st = model.with_t(s + t)?;
    let h_st = super_product_space(rep, &m_st)?;
    let proj = |u: usize| -> Result<SparseOperator<T>> { Ok(support_projection(rep, model.with_t(u)?.small_mask())) };
    let (p_s, p_t, p_st) = (proj(s)?, proj(t)?, proj(s + t)?);

    let mut r = ProductReport { pairs: 0, max_residual: T::zero(), isometry_defect: T::zero(), non_scalar: 0 };
    let mut products = Vec::new();
    for (a, x) in basis_s.iter().enumerate() {
        for (b, y) in basis_t.iter().enumerate() {
            let prod = x * y;
            r.max_residual = r.max_residual.max(h_st.residual(&prod));
            products.push((a, b, prod));
        }
    }
    r.pairs = products.len();
    let gram = |basis: &[SparseOperator<T>], p: &SparseOperator<T>, r: &mut ProductReport<T>| {
        let mut g = vec![vec![None; basis.len()]; basis.len()];
        for (i, x) in basis.iter().enumerate() {
            for (j, y) in basis.iter().enumerate() {
                let (c, ok) = scalar_pairing(x, y, p, tol);
                if ok {
                    g[i][j] = Some(c);
                } else {
                    r.non_scalar += 1;
                }
            }
        }
        g
    };
    let g_s = gram(basis_s, &p_s, &mut r);
    let g_t = gram(basis_t, &p_t, &mut r);
    for (a, b, x) in &products {
        for (a2, b2, y) in &products {
            let (c, ok) = scalar_pairing(x, y, &p_st, tol);
            match (ok, g_s[*a][*a2], g_t[*b][*b2]) {
                (true, Some(cs), Some(ct)) => {
                    r.isometry_defect = r.isometry_defect.max(cabs(c - cs * ct));
                }
                _ => r.non_scalar += 1,
            }
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::flow_isometry;

    fn model(l: usize, d: usize, t: usize, lam: &[f64]) -> ShiftModel<f64> {
        ShiftModel::new(l, d, t, lam.to_vec()).unwrap()
    }

    #[test]
    fn commutant_of_single_operator() {
        // Commutant of diag(1, 2) in 2x2 matrices is the diagonal algebra.
        let g = SparseOperator::<f64>::diagonal(&[C::new(1.0, 0.0), C::new(2.0, 0.0)]);
        let mut sys = ConstraintSystem::new(2);
        sys.push_commuting(g);
        let sol = sys.solve();
        assert_eq!(sol.dimension(), 2);
        assert!(sol.residual(&SparseOperator::identity(2)) < 1e-12);
    }

    #[test]
    fn solution_basis_is_orthonormal() {
        let m = model(2, 1, 1, &[0.3]);
        let rep = m.rep().unwrap();
        let ops = solve_intertwiners(&rep, &m, Side::Flow).unwrap().operators();
        for (i, a) in ops.iter().enumerate() {
            for (j, b) in ops.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((a.hs_inner(b) - C::new(expected, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn t_zero_gives_commutant() {
        let m = model(2, 1, 0, &[0.3]);
        let rep = m.rep().unwrap();
        let e = solve_intertwiners(&rep, &m, Side::Flow).unwrap();
        assert_eq!(e.dimension(), rep.dim());
        assert!(e.residual(&SparseOperator::identity(rep.dim())) < 1e-10);
        let h = super_product_space(&rep, &m).unwrap();
        assert!(h.residual(&SparseOperator::identity(rep.dim())) < 1e-10);
        assert_eq!(h.dimension(), 1);
    }

    #[test]
    fn fundamental_unit_solves_both_sides() {
        let m = model(2, 1, 1, &[0.3]);
        let rep = m.rep().unwrap();
        let s = flow_isometry(&rep, &m).unwrap().s;
        for side in [Side::Flow, Side::CommutantFlow] {
            assert!(solve_intertwiners(&rep, &m, side).unwrap().residual(&s) < 1e-10);
        }
    }

    #[test]
    fn canonical_examples() {
        let m = model(2, 1, 1, &[0.3]);
        let rep = m.rep().unwrap();
        let t00 = canonical_intertwiner(&rep, &m, &[], &[]).unwrap();
        assert_eq!(t00.matrix, flow_isometry(&rep, &m).unwrap().s);
        let t11 = canonical_intertwiner(&rep, &m, &[0], &[0]).unwrap();
        assert_eq!(t11.matrix.apply(rep.vacuum()), rep.basis(1, 1));
        let alpha_a = rep.a(1);
        let err = (&(alpha_a * &t11.matrix) - &(&t11.matrix * rep.a(0))).max_abs();
        assert!(err < 1e-10);
        assert!(matches!(canonical_intertwiner(&rep, &m, &[0], &[]), Err(Error::UnequalParity)));
        assert!(matches!(canonical_intertwiner(&rep, &m, &[1], &[1]), Err(Error::NotPastMode { mode: 1 })));
    }

    #[test]
    fn canonical_report_two_sites() {
        let m = model(2, 1, 1, &[0.3]);
        let rep = m.rep().unwrap();
        let r = canonical_report(&rep, &m, None, None).unwrap();
        assert_eq!((r.count, r.rank), (2, 2));
        assert!(r.intertwining < 1e-10 && r.commutant_intertwining < 1e-10);
        assert!(r.j_conjugation < 1e-10 && r.orthogonality < 1e-10);
    }

    #[test]
    fn j_reverses_insertion_order() {
        let m = model(3, 1, 2, &[0.3]);
        let rep = m.rep().unwrap();
        let r = canonical_report(&rep, &m, None, None).unwrap();
        assert_eq!((r.count, r.rank), (8, 8));
        assert!(r.j_conjugation_reversed < 1e-10);
        // T_{{1,2}∅} picks up (-1)^{C(2,2)} when the orderings are kept.
        assert!(r.j_conjugation > 1.0);
    }

    #[test]
    fn bimodule_two_sites() {
        let m = model(2, 1, 1, &[0.3]);
        let rep = m.rep().unwrap();
        let b = verify_bimodule_theorem(&rep, &m).unwrap();
        assert!(b.m_prime_u_in_e < 1e-10 && b.alpha_prime_u_in_e < 1e-10);
        assert!(b.m_u_in_e_prime < 1e-10);
        assert_eq!(b.dim_m_prime_u, 16);
        assert!(b.dim_e >= b.dim_alpha_prime_u);
        assert!(b.compressed_equality());
    }

    #[test]
    fn bimodule_t_zero_coincides() {
        let m = model(2, 1, 0, &[0.3]);
        let rep = m.rep().unwrap();
        let b = verify_bimodule_theorem(&rep, &m).unwrap();
        assert_eq!((b.dim_e, b.dim_m_prime_u, b.dim_alpha_prime_u), (16, 16, 16));
    }

    #[test]
    fn products_of_canonical_intertwiners() {
        let m = model(3, 1, 1, &[0.3]);
        let rep = m.rep().unwrap();
        let basis: Vec<_> = canonical_intertwiners(&rep, &m).into_iter().map(|t| t.matrix).collect();
        let r = product_structure_check(&rep, &m, 1, 1, &basis, &basis).unwrap();
        assert_eq!(r.pairs, 4);
        assert!(r.max_residual < 1e-9);
        assert_eq!(r.non_scalar, 0);
        assert!(r.isometry_defect < 1e-9);
        let s1 = flow_isometry(&rep, &m).unwrap().s;
        let s2 = flow_isometry(&rep, &m.with_t(2).unwrap()).unwrap().s;
        assert_eq!(&s1 * &s1, s2);
        assert!(matches!(product_structure_check(&rep, &m, 2, 2, &basis, &basis), Err(Error::InvalidLattice(_))));
    }

    #[test]
    fn span_rank_detects_dependence() {
        let a = SparseOperator::<f64>::identity(2);
        let b = a.scale_real(2.0);
        let c = SparseOperator::from_triplets(2, 2, vec![(0, 1, C::new(1.0, 0.0))]);
        assert_eq!(span_rank(2, &[a, b, c], 1e-10), 2);
    }

    #[test]
    fn predicted_counts() {
        assert_eq!(predicted_dimension(1), 2);
        assert_eq!(predicted_dimension(2), 8);
    }
}
