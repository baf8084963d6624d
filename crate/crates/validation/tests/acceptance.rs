//! Acceptance run: one summary line per criterion, preceded by the
//! individual measurements. Exits non-zero if any criterion fails.
//!
//! Some criteria are stated in a form that does not hold for the finite
//! model (sign and ordering conventions, finite-lattice parity leakage).
//! Those are measured as stated and reported FAIL; the corrected or
//! parity-even variants are printed as separate lines so both are visible.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use carflow::ccr::{doubled_weyl_rep, state_tolerance, weyl_phase_error, BosonCovariance, BosonSpace};
use carflow::commutant::super_product_report;
use carflow::flow::{flow_check, ShiftModel};
use carflow::fock::bits;
use carflow::modular::{closed_form_j, tomita_from_gns, verify_commutant_conjugation};
use carflow::obstruction::{
    coefficient_equations_check, extendability_criterion, parity_confinement_check, relative_commutant_vacuum_span,
};
use carflow::quasifree::{car_check, moment_check, Covariance, QuasiFreeRep};
use carflow::sparse::Vector;
use carflow::{Complex64, Verdict};

const CAR_TOL: f64 = 1e-12;
const CAR_BUDGET: Duration = Duration::from_secs(5);
const MOMENT_TOL: f64 = 1e-10;
const MODULAR_TOL: f64 = 1e-9;
const CONJUGATION_TOL: f64 = 1e-10;
const FLOW_TOL: f64 = 1e-10;
const INTERTWINER_TOL: f64 = 1e-9;
const CONFIG_BUDGET: Duration = Duration::from_secs(120);
const OBSTRUCTION_TOL: f64 = 1e-10;
const CCR_TOL: f64 = 1e-6;
/// Largest `n` for which the `(4^n)^2` intertwiner unknowns stay within 4096.
const GUARDRAIL_MODES: usize = 3;

#[derive(Default)]
struct Criterion {
    failed: bool,
    notes: Vec<String>,
}

impl Criterion {
    fn check(&mut self, label: &str, pass: bool, detail: String) {
        println!("    [{}] {label}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.failed |= !pass;
    }

    fn skip(&mut self, label: &str, detail: String) {
        println!("    [SKIP] {label}: {detail}");
    }

    fn info(&mut self, label: &str, detail: String) {
        println!("    [INFO] {label}: {detail}");
    }

    fn note(&mut self, s: &str) {
        self.notes.push(s.to_string());
    }
}

fn lambdas(n: usize) -> Vec<f64> {
    (0..n).map(|i| [0.3, 0.7, 0.2, 0.65, 0.45][i % 5]).collect()
}

fn rep(lam: Vec<f64>) -> QuasiFreeRep<f64> {
    QuasiFreeRep::new(Covariance::new(lam).unwrap()).unwrap()
}

fn car_suite(c: &mut Criterion) {
    let start = Instant::now();
    for n in 1..=5 {
        let r = car_check(&rep(lambdas(n))).max();
        c.check(&format!("CAR relations n={n}"), r < CAR_TOL, format!("{r:.2e} < {CAR_TOL:.0e}"));
    }
    let elapsed = start.elapsed();
    c.check("runtime", elapsed < CAR_BUDGET, format!("{elapsed:.2?} < {CAR_BUDGET:?}"));
}

fn moment_suite(c: &mut Criterion) {
    for n in 1..=4 {
        match moment_check(&rep(lambdas(n))) {
            Ok(e) => c.check(&format!("normal-ordered moments n={n}"), e < MOMENT_TOL, format!("{e:.2e} < {MOMENT_TOL:.0e}")),
            Err(e) => c.check(&format!("normal-ordered moments n={n}"), false, e.to_string()),
        }
    }
}

fn modular_suite(c: &mut Criterion) {
    for n in 1..=3 {
        let r = rep(lambdas(n));
        let md = tomita_from_gns(&r).unwrap();
        let dj = md.j.distance(&closed_form_j(&r));
        c.check(&format!("J polar vs closed form n={n}"), dj < MODULAR_TOL, format!("{dj:.2e} < {MODULAR_TOL:.0e}"));
        let (rel, off) = md.delta_deviation(&r);
        let e = rel.max(off);
        c.check(&format!("Delta eigenvalues n={n}"), e < MODULAR_TOL, format!("{e:.2e} < {MODULAR_TOL:.0e}"));
        let conj = verify_commutant_conjugation(&r, &closed_form_j(&r));
        c.check(
            &format!("J a_R(h_l) J = (G⊗G) b*_R(h_l) n={n}"),
            conj.gamma_left < CONJUGATION_TOL,
            format!("{:.2e} < {CONJUGATION_TOL:.0e}", conj.gamma_left),
        );
        c.check(
            &format!("corrected: J a_R(h_l) J = b*_R(h_l) (G⊗G) n={n}"),
            conj.gamma_right < CONJUGATION_TOL,
            format!("{:.2e} < {CONJUGATION_TOL:.0e}", conj.gamma_right),
        );
    }
    c.note("grading factor sits on the right of b*_R");
}

fn flow_suite(c: &mut Criterion) {
    for (l, d, t, lam) in [(2, 1, 1, vec![0.3]), (3, 1, 1, vec![0.3]), (3, 1, 2, vec![0.7]), (2, 2, 1, vec![0.3, 0.8])] {
        let m = ShiftModel::new(l, d, t, lam).unwrap();
        let r = flow_check(&m.rep().unwrap(), &m).unwrap();
        let tag = format!("(L,d,t)=({l},{d},{t})");
        c.check(&format!("S_s S_t = S_(s+t) {tag}"), r.semigroup == 0.0, format!("{:.2e} == 0", r.semigroup));
        c.check(
            &format!("S_t xΩ = α_t(x)Ω {tag}"),
            r.implements_alpha < FLOW_TOL,
            format!("{:.2e} < {FLOW_TOL:.0e}", r.implements_alpha),
        );
        c.check(&format!("S_t J = J S_t {tag}"), r.j_commutes < FLOW_TOL, format!("{:.2e} < {FLOW_TOL:.0e}", r.j_commutes));
    }
}

fn super_product_suite(c: &mut Criterion) {
    for (l, d, t) in [(2, 1, 1), (3, 1, 2), (3, 2, 1)] {
        let tag = format!("(L,d,t)=({l},{d},{t})");
        let m = ShiftModel::new(l, d, t, vec![0.3f64; d]).unwrap();
        if m.n_modes() > GUARDRAIL_MODES {
            c.skip(&tag, format!("n={} modes exceeds the guardrail n <= {GUARDRAIL_MODES}", m.n_modes()));
            continue;
        }
        let start = Instant::now();
        let rep = m.rep().unwrap();
        let r = super_product_report(&rep, &m).unwrap();
        let elapsed = start.elapsed();
        c.check(
            &format!("compressed dim H_t {tag}"),
            r.h_compressed == r.predicted,
            format!("{} == 2^(2p-1) = {}", r.h_compressed, r.predicted),
        );
        c.check(
            &format!("even compressed dim H_t {tag}"),
            r.h_compressed_even == r.predicted,
            format!("{} == {} (distance to span T_I1I2 {:.2e})", r.h_compressed_even, r.predicted, r.even_vs_canonical),
        );
        let k = &r.canonical;
        let inter = k.intertwining.max(k.commutant_intertwining);
        c.check(
            &format!("T_I1I2 intertwine {tag}"),
            inter < INTERTWINER_TOL && k.rank == k.count,
            format!("{inter:.2e} < {INTERTWINER_TOL:.0e}, {} independent", k.rank),
        );
        c.check(
            &format!("J T_I1I2 J = T_I2I1 {tag}"),
            k.j_conjugation < INTERTWINER_TOL,
            format!("{:.2e} < {INTERTWINER_TOL:.0e}", k.j_conjugation),
        );
        c.check(
            &format!("reversed order: J T_I1I2 J = T_rev(I2),rev(I1) {tag}"),
            k.j_conjugation_reversed < INTERTWINER_TOL,
            format!("{:.2e} < {INTERTWINER_TOL:.0e}", k.j_conjugation_reversed),
        );
        c.check(&format!("runtime {tag}"), elapsed < CONFIG_BUDGET, format!("{elapsed:.2?} < {CONFIG_BUDGET:?}"));
    }
}

fn obstruction_suite(c: &mut Criterion) {
    for l in [2, 3] {
        let tag = format!("L={l}");
        let m = ShiftModel::new(l, 1, 1, vec![0.3]).unwrap();
        let rep = m.rep().unwrap();
        let span = relative_commutant_vacuum_span(&rep, &m);
        let (mut pair, mut u, mut failures) = (0.0f64, 0.0f64, Vec::new());
        for v in span.vectors() {
            for f in bits(m.future_mask()) {
                match coefficient_equations_check(&v, &rep, &m, f) {
                    Ok(r) => {
                        pair = pair.max(r.a_pair).max(r.b_pair);
                        u = u.max(r.u_max());
                    }
                    Err(e) => failures.push(e.to_string()),
                }
            }
        }
        let detail = if failures.is_empty() { String::new() } else { format!(" ({})", failures.join("; ")) };
        c.check(
            &format!("A/B pair equalities {tag}"),
            failures.is_empty() && pair < OBSTRUCTION_TOL,
            format!("{pair:.2e} < {OBSTRUCTION_TOL:.0e}{detail}"),
        );
        c.check(&format!("u10 = u01 = u11 = 0 {tag}"), failures.is_empty() && u < OBSTRUCTION_TOL, format!("{u:.2e} < {OBSTRUCTION_TOL:.0e}"));
        let ext = extendability_criterion(&rep, &m);
        c.check(
            &format!("<span, e_g⊗Ω> = 0 {tag}"),
            ext.max_full_overlap() < OBSTRUCTION_TOL,
            format!("{:.2e} < {OBSTRUCTION_TOL:.0e} (span {} of {})", ext.max_full_overlap(), ext.span_dim, ext.dim),
        );
        c.check(
            &format!("even sector: <span, e_g⊗Ω> = 0 {tag}"),
            ext.max_even_overlap() < OBSTRUCTION_TOL,
            format!("{:.2e} < {OBSTRUCTION_TOL:.0e} (span {} of {})", ext.max_even_overlap(), ext.even_span_dim, ext.dim),
        );
        c.check(
            &format!("verdict {tag}"),
            ext.verdict == Verdict::ObstructionPresent,
            format!("{} (expected {})", ext.verdict.as_str(), Verdict::ObstructionPresent.as_str()),
        );
        let even_verdict = ext.even_span_dim < ext.dim && ext.max_even_overlap() < OBSTRUCTION_TOL;
        c.check(
            &format!("even-sector verdict {tag}"),
            even_verdict,
            if even_verdict { Verdict::ObstructionPresent.as_str().to_string() } else { "no obstruction".into() },
        );
    }
    let m = ShiftModel::allowing_half(2, 1, 1, vec![0.5]).unwrap();
    let rep = m.rep().unwrap();
    let span = relative_commutant_vacuum_span(&rep, &m);
    let mut vacuous = true;
    let mut equal = 0.0f64;
    for v in span.vectors() {
        for f in bits(m.future_mask()) {
            match coefficient_equations_check(&v, &rep, &m, f) {
                Ok(r) => {
                    vacuous &= r.vacuous();
                    equal = equal.max(r.bucket_max());
                }
                Err(_) => vacuous = false,
            }
        }
    }
    c.check(
        "λ=1/2: coefficient equations vacuous",
        vacuous && equal < OBSTRUCTION_TOL,
        format!("both sides equal to {equal:.2e}"),
    );
}

fn ccr_suite(c: &mut Criterion) {
    let cov = BosonCovariance::new(vec![1.0]).unwrap();
    let f = Vector::from_vec(vec![Complex64::new(1.0, 0.0)]);
    let g = Vector::from_vec(vec![Complex64::new(0.0, 1.0)]);
    let exact = (-1.5f64).exp();
    let mut prev = f64::INFINITY;
    let mut monotone = true;
    let mut within = true;
    let mut table = Vec::new();
    for n in [8, 12, 16, 20] {
        let s = BosonSpace::new(1, n).unwrap();
        let x = doubled_weyl_rep(&s, &cov, &f).unwrap().vacuum_expectation();
        let err = (x - Complex64::new(exact, 0.0)).norm();
        let tol = state_tolerance(&s, &cov, &f);
        monotone &= tol < prev;
        within &= err <= tol;
        prev = tol;
        table.push(format!("N={n}: err {err:.1e} tol {tol:.1e}"));
        if n == 20 {
            c.check("<π_T(W(h1))> = e^(-3/2) at N=20", err < CCR_TOL, format!("{x:.6} vs {exact:.6}, {err:.2e} < {CCR_TOL:.0e}"));
            let phase = weyl_phase_error(&s, &cov, &f, &g).unwrap();
            c.check("Weyl relation phase N=20", phase < CCR_TOL, format!("{phase:.2e} < {CCR_TOL:.0e}"));
        }
    }
    c.check("tolerance decreases with N, error within it", monotone && within, table.join(", "));
}

fn convergence_table(c: &mut Criterion) {
    for l in [2, 3, 4] {
        let m = ShiftModel::new(l, 1, 1, vec![0.3]).unwrap();
        let rep = m.rep().unwrap();
        let span = relative_commutant_vacuum_span(&rep, &m);
        let full = parity_confinement_check(&span.vectors(), &rep, &m);
        let even = parity_confinement_check(&span.even_vectors(), &rep, &m);
        c.info(
            &format!("L={l}"),
            format!(
                "residual {:.3e}, past-probe overlap {:.3e}, even residual {:.3e}, span {}",
                full.residual, full.past_probe_overlap, even.residual, full.vectors
            ),
        );
    }
}

fn main() -> ExitCode {
    let suites: [(&str, &str, fn(&mut Criterion), bool); 8] = [
        ("C1", "CAR suite", car_suite, false),
        ("C2", "quasi-free fidelity", moment_suite, false),
        ("C3", "modular closed forms", modular_suite, false),
        ("C4", "flow suite", flow_suite, false),
        ("C5", "super product system", super_product_suite, false),
        ("C6", "obstruction suite", obstruction_suite, false),
        ("C7", "CCR suite", ccr_suite, false),
        ("C8", "convergence experiment", convergence_table, true),
    ];
    let mut failed = Vec::new();
    for (id, name, run, report_only) in suites {
        println!("{id} {name}");
        let mut c = Criterion::default();
        let start = Instant::now();
        run(&mut c);
        let status = if report_only {
            "REPORT"
        } else if c.failed {
            failed.push(id);
            "FAIL"
        } else {
            "PASS"
        };
        let notes = if c.notes.is_empty() { String::new() } else { format!(" ({})", c.notes.join("; ")) };
        println!("{id} {status} {name} [{:.2?}]{notes}", start.elapsed());
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
