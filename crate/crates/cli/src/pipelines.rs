//! One function per subcommand; each appends checks and dimensions to a report.

use carflow::ccr::{
    ccr_state_check, commutant_error, gram_min_eigenvalue, state_tolerance, truncated_ccr_error, weyl_phase_error,
    weyl_relation_error, BosonCovariance, BosonSpace,
};
use carflow::commutant::{super_product_report, verify_bimodule_theorem};
use carflow::flow::{flow_check, ShiftModel};
use carflow::fock::bits;
use carflow::modular::{closed_form_j, tomita_from_gns, verify_commutant_conjugation};
use carflow::obstruction::{
    coefficient_equations_check, extendability_criterion, parity_confinement_check, relative_commutant_vacuum_span,
};
use carflow::quasifree::{car_check, moment_check, QuasiFreeRep};
use carflow::sparse::{anticommutator, inner, SparseOperator, Vector};
use carflow::{Complex64, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::report::Report;

/// Largest fermion-mode count whose intertwiner solve stays within
/// `(4^n)^2 <= 4096` unknowns.
pub const GUARDRAIL_MODES: usize = 3;

/// Cutoffs tabulated by `ccr-compare` to show truncation convergence.
const CCR_CUTOFFS: [usize; 4] = [8, 12, 16, 20];

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vector<f64> {
    Vector::from_iterator(n, (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
}

fn setup(report: &mut Report, cfg: &RunConfig) -> Option<(ShiftModel<f64>, QuasiFreeRep<f64>)> {
    match cfg.model().and_then(|m| m.rep().map(|r| (m, r))) {
        Ok(x) => Some(x),
        Err(e) => {
            report.error("model construction", e);
            None
        }
    }
}

pub fn verify_car(report: &mut Report, cfg: &RunConfig) {
    let Some((_, rep)) = setup(report, cfg) else { return };
    let tol = cfg.tolerance;
    let car = car_check(&rep);
    report.check("CAR {a_R(h_i), a_R(h_j)} = 0", car.anti_aa, tol);
    report.check("CAR {a_R(h_i), a*_R(h_j)} = δ_ij", car.anti_a_astar, tol);
    report.check("CAR for b_R", car.anti_b, tol);
    report.check("b_R-algebra commutes with a_R", car.commutant, tol);
    match moment_check(&rep) {
        Ok(e) => {
            report.check("normal-ordered moments = det(<R g_i, f_j>)", e, tol);
        }
        Err(e) => report.error("normal-ordered moments = det(<R g_i, f_j>)", e),
    }
    let (m_rank, b_rank) = rep.cyclicity_ranks();
    let full = rep.dim();
    report.check_count("vacuum cyclic for M_R", m_rank, full);
    report.check_count("vacuum separating (cyclic for M_R')", b_rank, full);
    report.dim("fock", rep.fock_dim());
    report.dim("doubled", rep.dim());
    if let Some(seed) = cfg.seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rep.n_modes();
        let mut worst = 0.0f64;
        for _ in 0..8 {
            let (f, g) = (random_vector(&mut rng, n), random_vector(&mut rng, n));
            let (af, ag) = match (rep.rep_annihilator(&f), rep.rep_annihilator(&g)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => return report.error("seeded CAR for random vectors", e),
            };
            let expected = SparseOperator::identity(rep.dim()).scale(inner(&f, &g));
            worst = worst
                .max((&anticommutator(&af, &ag.adjoint()) - &expected).frobenius_norm())
                .max(anticommutator(&af, &ag).frobenius_norm());
        }
        report.check("seeded CAR for random vectors", worst, tol).with_detail(format!("seed {seed}, 8 pairs"));
    }
}

pub fn modular_report(report: &mut Report, cfg: &RunConfig) {
    let Some((model, rep)) = setup(report, cfg) else { return };
    let tol = cfg.tolerance;
    let closed = closed_form_j(&rep);
    match tomita_from_gns(&rep) {
        Ok(md) => {
            report.check("polar J = closed-form J", md.j.distance(&closed), tol);
            let (rel, off) = md.delta_deviation(&rep);
            report.check("Δ diagonal with predicted eigenvalues", rel.max(off), tol);
            let c = md.consistency();
            report.check("S = J Δ^{1/2}", c.polar, tol);
            report.check("J² = 1", c.j_involution, tol);
            report.check("J antiunitary", c.j_unitary, tol);
            report.check("J Δ J = Δ^{-1}", c.j_delta, tol);
            report.check("S² = 1", c.s_involution, tol);
            report.check("F = S*", c.f_adjoint, tol);
            report.check("F S = Δ", c.fs_delta, tol);
            report.check_bool("Δ positive", c.delta_min > 0.0, format!("smallest eigenvalue {:.3e}", c.delta_min));
        }
        Err(e) => report.error("polar decomposition of S", e),
    }
    let conj = verify_commutant_conjugation(&rep, &closed);
    report.check("J a_R(h_l) J = (Γ⊗Γ) b*_R(h_l)", conj.gamma_left, tol);
    report.check("J a_R(h_l) J = b*_R(h_l) (Γ⊗Γ)", conj.gamma_right, tol);
    report.check("J M_R J commutes with M_R", conj.commutes_with_m, tol);
    match flow_check(&rep, &model) {
        Ok(f) => {
            report.check("S_s S_t = S_(s+t)", f.semigroup, 0.0);
            report.check("S_t x Ω = α_t(x) Ω", f.implements_alpha, tol);
            report.check("S_t J = J S_t", f.j_commutes, tol);
        }
        Err(e) => report.error("flow isometry", e),
    }
    report.dim("doubled", rep.dim());
}

/// Intertwiner solves need `n <= GUARDRAIL_MODES` unless forced.
pub fn guardrail(cfg: &RunConfig, force: bool) -> Result<(), String> {
    if cfg.n_modes() > GUARDRAIL_MODES && !force {
        let unknowns = 1u128 << (4 * cfg.n_modes());
        Err(format!(
            "L*d = {} modes needs (4^n)^2 = {unknowns} intertwiner unknowns, above the 4096 guardrail; pass --force to run anyway",
            cfg.n_modes()
        ))
    } else {
        Ok(())
    }
}

pub fn spd_dims(report: &mut Report, cfg: &RunConfig) {
    let Some((model, rep)) = setup(report, cfg) else { return };
    let tol = cfg.tolerance;
    match super_product_report(&rep, &model) {
        Ok(r) => {
            report.check_count("dim H_t on initial projection = 2^(2p-1)", r.h_compressed, r.predicted);
            report.check_count("even part of H_t on initial projection = 2^(2p-1)", r.h_compressed_even, r.predicted);
            report.check("even part spanned by T_I1I2", r.even_vs_canonical, tol);
            let k = &r.canonical;
            report.check_count("T_I1I2 linearly independent", k.rank, k.count);
            report.check("T_I1I2 in E^{α_t}", k.flow_residual, tol);
            report.check("T_I1I2 in E^{α'_t}", k.commutant_residual, tol);
            report.check("T_I1I2 intertwine α_t", k.intertwining, tol);
            report.check("T_I1I2 intertwine α'_t", k.commutant_intertwining, tol);
            report.check("J T_I1I2 J = T_I2I1", k.j_conjugation, tol);
            report.check("J T_I1I2 J = T_rev(I2),rev(I1)", k.j_conjugation_reversed, tol);
            report.check("T_I1I2 orthonormal on initial projection", k.orthogonality, tol);
            report.dim("E_alpha_t", r.e_flow);
            report.dim("E_alpha_prime_t", r.e_commutant);
            report.dim("H_t", r.h);
            report.dim("H_t_even", r.h_even);
            report.dim("H_t_initial", r.h_compressed);
            report.dim("H_t_initial_even", r.h_compressed_even);
            report.dim("H_t_vacuum_span", r.h_vacuum);
            report.dim("predicted", r.predicted);
            report.dim("p", r.p);
        }
        Err(e) => report.error("super product system", e),
    }
    match verify_bimodule_theorem(&rep, &model) {
        Ok(b) => {
            report.check("M' S_t in E^{α_t}", b.m_prime_u_in_e, tol);
            report.check("α_t(M_small)' S_t in E^{α_t}", b.alpha_prime_u_in_e, tol);
            report.check("M_small S_t in E^{α'_t}", b.m_u_in_e_prime, tol);
            report.check_count("dim E^{α_t} S_t*S_t = dim α_t(M_small)' S_t", b.dim_e_compressed, b.dim_alpha_prime_u);
            report.record("M_small' S_t in E^{α_t}", b.small_prime_u_in_e);
        }
        Err(e) => report.error("bimodule structure", e),
    }
}

pub fn obstruction(report: &mut Report, cfg: &RunConfig) {
    let Some((model, rep)) = setup(report, cfg) else { return };
    let tol = cfg.tolerance;
    let exploratory = cfg.has_half();
    let span = relative_commutant_vacuum_span(&rep, &model);
    let vectors = span.vectors();
    let future = bits(model.future_mask());

    let coefficient_checks = |report: &mut Report, label: &str, vs: &[Vector<f64>]| {
        let (mut pair, mut u, mut buckets, mut vacuous) = (0.0f64, 0.0f64, 0.0f64, true);
        for v in vs {
            for &l in &future {
                match coefficient_equations_check(v, &rep, &model, l) {
                    Ok(r) => {
                        pair = pair.max(r.a_pair).max(r.b_pair);
                        u = u.max(r.u_max());
                        buckets = buckets.max(r.bucket_max());
                        vacuous &= r.vacuous();
                    }
                    Err(e) => return report.error(format!("{label}coefficient equations"), e),
                }
            }
        }
        report.check(format!("{label}A/B pair equalities"), pair, tol);
        if exploratory {
            report.check_bool(format!("{label}coefficient equations vacuous at λ=1/2"), vacuous, format!("bucket equality {buckets:.3e}"));
        } else {
            report.check(format!("{label}u10 = u01 = u11 = 0"), u, tol);
        }
    };
    coefficient_checks(report, "", &vectors);
    if let Some(seed) = cfg.seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut combo = Vector::<f64>::zeros(rep.dim());
        for v in &vectors {
            combo += v * Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
        coefficient_checks(report, "seeded combination: ", &[combo]);
    }

    let ext = extendability_criterion(&rep, &model);
    let (full, even) = (ext.max_full_overlap(), ext.max_even_overlap());
    if exploratory {
        report.record("<span, e_g⊗Ω> = 0", full);
        report.record("even sector: <span, e_g⊗Ω> = 0", even);
    } else {
        report.check("<span, e_g⊗Ω> = 0", full, tol);
        report.check("even sector: <span, e_g⊗Ω> = 0", even, tol);
    }
    let parity = parity_confinement_check(&vectors, &rep, &model);
    let even_parity = parity_confinement_check(&span.even_vectors(), &rep, &model);
    report.record("parity-confinement residual", parity.residual);
    report.record("parity-confinement residual, even sector", even_parity.residual);
    report.record("past-probe overlap", parity.past_probe_overlap);

    report.dim("relative_commutant", ext.relative_commutant);
    report.dim("relative_commutant_even", ext.relative_commutant_even);
    report.dim("relative_commutant_vacuum_span", span.basis.ncols());
    report.dim("span_y_alpha_x", ext.span_dim);
    report.dim("span_y_alpha_x_even", ext.even_span_dim);
    report.dim("complement", ext.complement_dim);
    report.dim("confinement_residual", parity.residual);
    report.verdict = Some(ext.verdict.as_str().to_string());
    report.even_sector_verdict = Some(
        if exploratory {
            Verdict::Exploratory
        } else if ext.even_span_dim < ext.dim && even <= tol {
            Verdict::ObstructionPresent
        } else {
            Verdict::NoObstruction
        }
        .as_str()
        .to_string(),
    );
}

/// Truncation tolerance for identities involving `W(f)` and `W(g)` together:
/// the product displaces the vacuum by up to `f + g`.
fn pair_tolerance(space: &BosonSpace, cov: &BosonCovariance<f64>, f: &Vector<f64>, g: &Vector<f64>) -> f64 {
    state_tolerance(space, cov, f) + state_tolerance(space, cov, g) + state_tolerance(space, cov, &(f + g))
}

pub fn ccr_compare(report: &mut Report, cfg: &RunConfig) {
    let tol = cfg.tolerance;
    let n = cfg.d;
    let run = |report: &mut Report| -> carflow::Result<()> {
        let cov = BosonCovariance::from_lambda(&cfg.lambdas)?;
        let space = BosonSpace::new(n, cfg.boson_cutoff)?;
        let mut h1 = Vector::<f64>::zeros(n);
        h1[0] = Complex64::new(1.0, 0.0);
        let ih1 = &h1 * Complex64::new(0.0, 1.0);
        let mixed = Vector::from_iterator(n, (0..n).map(|k| Complex64::new(0.4 / (k + 1) as f64, -0.2)));
        let fs = [h1.clone(), ih1.clone(), mixed.clone()];

        let state = ccr_state_check(&space, &cov, &fs)?;
        let state_tol = state.samples.iter().map(|s| s.tolerance).fold(0.0, f64::max);
        report.check("<π_T(W(f))> = exp(-½‖(1+2T)^{1/2} f‖²)", state.squared_error, state_tol);
        report.record("<π_T(W(f))> against exp(-½‖(1+2T)^{1/2} f‖)", state.literal_error);
        let phase_tol = tol.max(pair_tolerance(&space, &cov, &h1, &ih1));
        report.check("Weyl relation phase", weyl_phase_error(&space, &cov, &h1, &ih1)?, phase_tol);
        report.record("Weyl relation on the vacuum column", weyl_relation_error(&space, &cov, &h1, &ih1)?);
        report.check("[a(f), a*(g)] = (f,g) below the cutoff", truncated_ccr_error(&space, &h1, &mixed)?, tol);
        report.check("commutant Weyl operators commute on Ω⊗Ω", commutant_error(&space, &cov, &h1, &mixed)?, pair_tolerance(&space, &cov, &h1, &mixed));
        let gram = gram_min_eigenvalue(&space, &cov, &fs)?;
        report.check("state positivity (Gram matrix)", (-gram).max(0.0), tol);

        let mut prev = f64::INFINITY;
        let mut monotone = true;
        let mut table = Vec::new();
        for cutoff in CCR_CUTOFFS {
            let s = BosonSpace::new(n, cutoff)?;
            let t = state_tolerance(&s, &cov, &h1);
            let err = ccr_state_check(&s, &cov, std::slice::from_ref(&h1))?.squared_error;
            monotone &= t < prev && err <= t;
            prev = t;
            table.push(format!("N={cutoff}: {err:.1e}/{t:.1e}"));
        }
        report.check_bool("truncation tolerance decreases with N", monotone, table.join(" "));
        report.dim("boson_space", space.dim());
        report.dim("boson_modes", n);
        Ok(())
    };
    if let Err(e) = run(report) {
        report.error("CCR comparison", e);
    }
}
