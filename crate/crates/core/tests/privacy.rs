use qpir_core::adversary::*;
use qpir_core::privacy::*;
use qpir_core::protocols::*;
use qpir_core::quantum::linalg::{nuclear_norm, CMatrix, C64};
use qpir_core::runtime::spec::Party;

/// Half the distance between the views of a server holding a purified
/// two-bit database, queried on bit 1 and on bit 2.
fn purified_database_oracle() -> f64 {
    let m = |b: usize| {
        CMatrix::from_fn(4, 4, |x, y| {
            let bit = |v: usize| (v >> (1 - b)) & 1;
            C64::new(if bit(x) == bit(y) { 0.25 } else { 0.0 }, 0.0)
        })
    };
    0.25 * nuclear_norm(&(m(0) - m(1)))
}

#[test]
fn mode_parsing() {
    assert_eq!("anchored".parse::<PrivacyMode>().unwrap(), PrivacyMode::Anchored);
    assert_eq!("full".parse::<PrivacyMode>().unwrap(), PrivacyMode::Full);
    assert!("standard".parse::<PrivacyMode>().is_err());
}

#[test]
fn honest_kerenidis_is_anchored_private() {
    let inst = build_kerenidis(2, false).unwrap();
    let inputs = standard_inputs(&inst, &InputSet::anchored()).unwrap();
    let r = privacy_lower_bound(&Adversary::honest(&inst.spec), PrivacyMode::Anchored, &inputs, 0.0).unwrap();
    assert!(r.pass);
    assert!(r.eps_lower <= TOLERANCE);
    assert!(r.eps_lower_all_steps <= TOLERANCE);
    assert!(r.rows.iter().any(|row| row.checkpoint));
    assert!(r.rows.iter().all(|row| row.checkpoint == (row.step % 2 == 0)));
    let sim = honest_simulator_error(&inst, &inputs).unwrap();
    assert!(sim.eps_upper <= TOLERANCE, "{}", sim.eps_upper);
}

#[test]
fn honest_kerenidis_leaks_on_superposed_databases() {
    let inst = build_kerenidis(2, false).unwrap();
    let inputs = standard_inputs(&inst, &InputSet::full()).unwrap();
    let r = privacy_lower_bound(&Adversary::honest(&inst.spec), PrivacyMode::Full, &inputs, 0.0).unwrap();
    assert!(r.eps_lower > 0.1, "{}", r.eps_lower);
    assert!(!r.pass);
    let anchored = privacy_lower_bound(&Adversary::honest(&inst.spec), PrivacyMode::Anchored, &inputs, 0.0).unwrap();
    assert!(anchored.inputs.len() < r.inputs.len());
    assert!(anchored.pass);
}

#[test]
fn baselines() {
    let db = build_baseline(BaselineKind::SendDb, 2).unwrap();
    let inputs = standard_inputs(&db, &InputSet::anchored()).unwrap();
    assert!(privacy_lower_bound(&Adversary::honest(&db.spec), PrivacyMode::Anchored, &inputs, 0.0).unwrap().pass);

    // the server reads the index outright: classical i = 1 and i = 2 are orthogonal
    let idx = build_baseline(BaselineKind::SendIndex, 2).unwrap();
    let inputs = standard_inputs(&idx, &InputSet::anchored()).unwrap();
    let r = privacy_lower_bound(&Adversary::honest(&idx.spec), PrivacyMode::Anchored, &inputs, 0.0).unwrap();
    assert!((r.eps_lower - 0.5).abs() < 1e-9);
}

#[test]
fn counterexample_separates_honest_from_specious() {
    let inst = build_counterexample(2).unwrap();
    let inputs = standard_inputs(&inst, &InputSet::anchored()).unwrap();
    let honest = privacy_lower_bound(&Adversary::honest(&inst.spec), PrivacyMode::Anchored, &inputs, 0.0).unwrap();
    assert!(honest.pass, "{}", honest.eps_lower);
    let adv = purified_honest(&inst.spec, Party::A).unwrap();
    let gamma = measure_speciousness(&inst.spec, &adv, &inputs).unwrap().gamma_hat;
    assert!(gamma < 1e-9);
    let r = privacy_lower_bound(&adv, PrivacyMode::Anchored, &inputs, 0.0).unwrap();
    assert!((r.eps_lower - purified_database_oracle()).abs() < 1e-9, "{}", r.eps_lower);
    assert!(!r.pass);
}

#[test]
fn theorem_bound_on_lossy_grid() {
    for n in [1usize, 2] {
        let inst = build_kerenidis(n, false).unwrap();
        let inputs = standard_inputs(&inst, &InputSet::anchored()).unwrap();
        let advs: Vec<Adversary> = [0.0, 0.1, 0.4, 1.2]
            .iter()
            .map(|&t| gamma_family(&inst, t, true).unwrap())
            .chain([gamma_family(&inst, 0.4, false).unwrap(), purified_honest(&inst.spec, Party::A).unwrap()])
            .collect();
        let rep = verify_theorem_bound(&inst, &advs, &inputs).unwrap();
        assert!(rep.pass, "{:#?}", rep.rows);
        for row in &rep.rows {
            assert!(row.eps_hat <= row.bound + row.tolerance);
            assert!(row.eps_lower <= row.eps_hat + row.tolerance);
            assert!(row.anchor_spread < 1e-9, "{}", row.anchor_spread);
        }
        // zero angle: the simulator reproduces the honest views
        assert!(rep.rows[0].eps_hat < 1e-9);
    }
}

#[test]
fn honest_simulator_input_fixes_the_index() {
    let inst = build_kerenidis(2, false).unwrap();
    let sim = HonestSimulator::new(&inst);
    let input = inst.input(&[true, false], 2).unwrap();
    let s = sim.simulator_input(&qpir_core::quantum::state::Ensemble::pure(input)).unwrap();
    let idx = inst.index_register().unwrap();
    let dist = s.distribution(&[idx]).unwrap();
    assert!((dist[0] - 1.0).abs() < 1e-12);
}

#[test]
fn theorem_simulator_rejects_other_databases() {
    let inst = build_kerenidis(2, false).unwrap();
    let adv = gamma_family(&inst, 0.4, true).unwrap();
    let sim = theorem_simulator(&inst, &adv, 1).unwrap();
    let other = qpir_core::quantum::state::Ensemble::pure(inst.input(&[true, true], 1).unwrap());
    assert!(sim.simulate(2, &other).is_err());
}
