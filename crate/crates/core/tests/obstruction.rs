use carflow::fock::bits;
use carflow::flow::ShiftModel;
use carflow::obstruction::{
    coefficient_equations_check, extendability_criterion, parity_confinement_check, relative_commutant,
    relative_commutant_by_commutation, relative_commutant_vacuum_span, Verdict,
};
use carflow::sparse::Vector;
use carflow::Complex64;

#[test]
fn routes_agree_on_three_sites() {
    let m = ShiftModel::new(3, 1, 1, vec![0.3]).unwrap();
    let rep = m.rep().unwrap();
    let rc = relative_commutant(&rep, &m);
    let other = relative_commutant_by_commutation(&rep, &m);
    assert_eq!(rc.dimension(), other.dimension());
    assert!(rc.all().all(|t| other.residual(t) < 1e-9));
}

#[test]
fn random_span_vector_two_channels() {
    let m = ShiftModel::new(2, 2, 1, vec![0.3, 0.7]).unwrap();
    let rep = m.rep().unwrap();
    let span = relative_commutant_vacuum_span(&rep, &m);
    let coeffs = [0.3, -1.1, 0.7, 0.2, 0.9, -0.4, 0.5, 1.3];
    let mut v = Vector::<f64>::zeros(rep.dim());
    for (k, col) in span.basis.column_iter().enumerate() {
        v += col * Complex64::new(coeffs[k % coeffs.len()], 0.1 * k as f64);
    }
    for l in bits(m.future_mask()) {
        let r = coefficient_equations_check(&v, &rep, &m, l).unwrap();
        assert!(r.u_max() < 1e-10, "{r:?}");
        assert!(r.bucket_max() < 1e-10);
        assert!(r.equal_sigma_paired < 1e-10);
    }
}

#[test]
fn half_is_exploratory() {
    let m = ShiftModel::allowing_half(2, 1, 1, vec![0.5]).unwrap();
    let rep = m.rep().unwrap();
    let ext = extendability_criterion(&rep, &m);
    assert_eq!(ext.verdict, Verdict::Exploratory);
    let span = relative_commutant_vacuum_span(&rep, &m);
    for v in span.vectors() {
        let r = coefficient_equations_check(&v, &rep, &m, 1).unwrap();
        assert!(r.vacuous());
        assert!(r.bucket_max() < 1e-10);
    }
}

#[test]
fn even_sector_witnesses_the_obstruction() {
    for l in [2, 3] {
        let m = ShiftModel::new(l, 1, 1, vec![0.3]).unwrap();
        let rep = m.rep().unwrap();
        let ext = extendability_criterion(&rep, &m);
        assert!(ext.max_even_overlap() < 1e-10);
        assert!(ext.even_span_dim < ext.dim);
        let span = relative_commutant_vacuum_span(&rep, &m);
        let even = parity_confinement_check(&span.even_vectors(), &rep, &m);
        assert!(even.residual < 1e-10);
    }
}

#[test]
fn odd_leakage_decays_with_lattice_length() {
    // |⟨span, e_g⊗Ω⟩| = |1-2λ|^{#future modes} at finite size.
    let mut prev = f64::INFINITY;
    for l in [2, 3, 4] {
        let m = ShiftModel::new(l, 1, 1, vec![0.3]).unwrap();
        let rep = m.rep().unwrap();
        let span = relative_commutant_vacuum_span(&rep, &m);
        let r = parity_confinement_check(&span.vectors(), &rep, &m);
        let expected = 0.4f64.powi((l - 1) as i32);
        assert!((r.past_probe_overlap - expected).abs() < 1e-10, "L={l}: {}", r.past_probe_overlap);
        assert!(r.past_probe_overlap < prev);
        prev = r.past_probe_overlap;
    }
}
