use qpir_core::bounds::*;
use qpir_core::protocols::*;
use qpir_core::quantum::density::DensityOperator;
use qpir_core::quantum::linalg::{CMatrix, C64};
use qpir_core::runtime::execute::{execute, Retention};
use qpir_core::runtime::spec::Side;
use qpir_core::quantum::state::Ensemble;
use qpir_core::QpirError;

fn pure(v: &[f64]) -> DensityOperator {
    let amps: Vec<C64> = v.iter().map(|&x| C64::new(x, 0.0)).collect();
    DensityOperator::from_pure(&amps).unwrap()
}

fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

#[test]
fn nayak_closed_forms() {
    assert_eq!(nayak_bound(0.0, 0.0, 16.0).value, 16.0);
    assert!(nayak_bound(0.5, 0.0, 16.0).value.abs() < 1e-12);
    let v = nayak_bound(0.01, 0.0, 100.0);
    let oracle = 100.0 * (1.0 - h2(0.99));
    assert!((v.value - oracle).abs() < 1e-12);
    assert!((v.value - 91.92).abs() < 5e-3, "{}", v.value);
    let out = nayak_bound(0.9, 0.5, 10.0);
    assert!(!out.in_domain);
    assert_eq!(out.value, 0.0);
}

#[test]
fn reconstruction_bound_cases() {
    assert_eq!(reconstruction_bound(5, 0.0, 0.0), 1.0);
    assert_eq!(reconstruction_bound(5, 1.0, 0.0), 0.0);
    let n = 10usize;
    let nf = n as f64;
    let v = reconstruction_bound(n, nf.powi(-4) / 100.0, nf.powi(-8) / 100.0);
    assert!(v > 0.5, "{v}");
}

#[test]
fn eps_prime_matches_uhlmann_form() {
    for k in 0..=1000 {
        let e = k as f64 / 2000.0;
        assert!((eps_prime(e) - uhlmann_bound(2.0 * e)).abs() <= 1e-12);
    }
}

#[test]
fn gentle_trivial_cases() {
    let rho = pure(&[0.6, 0.8]);
    let out = gentle_measure(&rho, &CMatrix::identity(2, 2)).unwrap();
    assert!((out.success - 1.0).abs() < 1e-12);
    assert!(out.distance < 1e-12);

    let zero = pure(&[1.0, 0.0]);
    let mut p0 = CMatrix::zeros(2, 2);
    p0[(0, 0)] = C64::new(1.0, 0.0);
    let out = gentle_measure(&zero, &p0).unwrap();
    assert!((out.success - 1.0).abs() < 1e-12 && out.distance < 1e-12);

    let one = pure(&[0.0, 1.0]);
    assert!(matches!(gentle_measure(&one, &p0), Err(QpirError::ZeroProbability)));
    let too_big = CMatrix::identity(2, 2) * C64::new(1.5, 0.0);
    assert!(gentle_measure(&one, &too_big).is_err());
}

#[test]
fn helstrom_examples() {
    let zero = pure(&[1.0, 0.0]);
    let one = pure(&[0.0, 1.0]);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let plus = pure(&[s, s]);
    assert!((helstrom(0.5, &zero, 0.5, &one).unwrap().bracket.p_lower - 1.0).abs() < 1e-12);
    assert!((helstrom(0.3, &plus, 0.7, &plus).unwrap().bracket.p_lower - 0.7).abs() < 1e-12);

    // pure-state distance √(1 − |⟨0|+⟩|²)
    let oracle = 0.5 + 0.5 * (1.0f64 - 0.5).sqrt();
    let h = helstrom(0.5, &zero, 0.5, &plus).unwrap();
    assert!((h.bracket.p_lower - oracle).abs() < 1e-12);
    assert!((h.bracket.p_lower - 0.853553).abs() < 1e-6);
    assert_eq!(h.bracket.p_lower, h.bracket.p_upper);
    // the returned measurement attains the value
    let achieved = 0.5 * zero.expectation(&h.measurement[0]) + 0.5 * plus.expectation(&h.measurement[1]);
    assert!((achieved - oracle).abs() < 1e-12);

    let three = DensityOperator::maximally_mixed(4);
    assert!(helstrom(0.5, &zero, 0.5, &three).is_err());
}

#[test]
fn pgm_examples() {
    let basis: Vec<DensityOperator> = (0..4)
        .map(|k| {
            let mut v = [0.0; 4];
            v[k] = 1.0;
            pure(&v)
        })
        .collect();
    let ens: Vec<_> = basis.iter().map(|r| (0.25, r.clone())).collect();
    let b = pgm(&ens).unwrap();
    assert!((b.p_lower - 1.0).abs() < 1e-12);

    let same: Vec<_> = (0..3).map(|_| (1.0 / 3.0, basis[1].clone())).collect();
    let b = pgm(&same).unwrap();
    assert!((b.p_lower - 1.0 / 3.0).abs() < 1e-12);
    assert!(b.is_consistent(1e-12));

    assert!(pgm(&[(0.4, basis[0].clone()), (0.4, basis[1].clone())]).is_err());
}

fn client_views(inst: &QpirInstance) -> Vec<DensityOperator> {
    (0..1usize << inst.n)
        .map(|a| {
            let input = inst.input(&db_from_label(a, inst.n), 1).unwrap();
            let tr = execute(&inst.spec, &Ensemble::pure(input), Retention::FinalOnly).unwrap();
            let keep = tr.registers_on(tr.steps(), &[Side::B, Side::ToB]).unwrap();
            let keep: Vec<&str> = keep.iter().map(String::as_str).collect();
            tr.final_state().partial_trace(&keep).unwrap()
        })
        .collect()
}

#[test]
fn send_db_reconstructs_everything() {
    let inst = build_baseline(BaselineKind::SendDb, 2).unwrap();
    for mode in [Coherence::ClassicalPerA, Coherence::CoherentReference] {
        let t = extraction_attack(&inst, mode).unwrap();
        assert!((t.overall_success - 1.0).abs() < 1e-9);
        assert!(t.bits.iter().all(|b| (b.success - 1.0).abs() < 1e-9));
        assert!(t.premise_holds);
        assert_eq!(t.lower_bound_holds, Some(true));
        let c = chain_rule_check(&inst, &t).unwrap();
        assert_eq!((c.m_a, c.m_b, c.leakage), (2, 0, 2));
        assert_eq!(c.ceiling, 1.0);
        assert!(c.consistent);
    }
}

#[test]
fn send_index_reads_one_bit() {
    let inst = build_baseline(BaselineKind::SendIndex, 2).unwrap();
    let t = extraction_attack(&inst, Coherence::CoherentReference).unwrap();
    assert!((t.overall_success - 0.5).abs() < 1e-9);
    assert!((t.bits[0].success - 1.0).abs() < 1e-9);
    assert!(!t.premise_holds);
    assert_eq!(t.lower_bound_holds, None);
    let c = chain_rule_check(&inst, &t).unwrap();
    assert_eq!((c.m_a, c.m_b), (1, 1));
    assert_eq!(c.ceiling, 1.0);
    assert!(c.consistent);
}

#[test]
fn kerenidis_unqueried_bit_is_hidden() {
    let inst = build_kerenidis(2, false).unwrap();
    // the client's final state depends only on a_1
    let views = client_views(&inst);
    for a in [0usize, 2] {
        let d = qpir_core::quantum::density::trace_distance(&views[a], &views[a + 1]).unwrap();
        assert!(d < 1e-12, "{d}");
    }
    let t = extraction_attack(&inst, Coherence::CoherentReference).unwrap();
    assert!(t.client_executable);
    assert!(!t.premise_holds, "{}", t.premise_note);
    assert!((t.bit_guessing[1].p_lower - 0.5).abs() < 1e-9);
    assert!((t.bit_guessing[1].p_upper - 0.5).abs() < 1e-9);
    assert!((t.bits[1].success - 0.5).abs() < 1e-9);
    assert!((t.bit_guessing[0].p_lower - 1.0).abs() < 1e-9);
    assert!((t.database_guessing.p_lower - 0.5).abs() < 1e-9);
    assert!(t.drift_consistent());
    assert!(chain_rule_check(&inst, &t).unwrap().consistent);
}

#[test]
fn per_database_unitaries_succeed_but_are_not_executable() {
    let inst = build_kerenidis(2, false).unwrap();
    let t = extraction_attack(&inst, Coherence::ClassicalPerA).unwrap();
    assert!(!t.client_executable);
    assert!(t.premise_holds);
    assert!((t.overall_success - 1.0).abs() < 1e-9);
    assert_eq!(t.lower_bound_holds, Some(true));
    assert!(t.drift_consistent());
    let c = chain_rule_check(&inst, &t).unwrap();
    assert_eq!(c.attack_success, 0.0);
    assert!(c.consistent);
}

#[test]
fn kerenidis_four_chain_rule_reads_the_spec() {
    let inst = build_kerenidis(4, false).unwrap();
    let comm = inst.spec.fold_setup_into_messages().communication().unwrap();
    let t = extraction_attack(&inst, Coherence::CoherentReference).unwrap();
    let c = chain_rule_check(&inst, &t).unwrap();
    assert_eq!((c.m_a, c.m_b), (comm.m_a, comm.m_b));
    assert_eq!(c.leakage, (comm.m_a + comm.m_b).min(2 * comm.m_a));
    assert!(c.consistent);
    assert!(c.attack_success <= c.ceiling + c.tolerance);
    assert!(t.bit_guessing[1..].iter().all(|b| (b.p_lower - 0.5).abs() < 1e-9));
}

#[test]
fn extraction_rejects_large_or_measuring_instances() {
    assert!(extraction_attack(&build_baseline(BaselineKind::SendIndex, 8).unwrap(), Coherence::ClassicalPerA).is_err());
    assert!(extraction_attack(&build_counterexample(2).unwrap(), Coherence::ClassicalPerA).is_err());
}
