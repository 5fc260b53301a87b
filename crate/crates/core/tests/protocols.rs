use std::f64::consts::FRAC_1_SQRT_2;

use qpir_core::protocols::kerenidis::{self, KerenidisOptions};
use qpir_core::protocols::{
    build, build_baseline, build_counterexample, build_kerenidis, db_from_label, BaselineKind,
    DatabaseMode, IndexMode, ProtocolKind,
};
use qpir_core::quantum::channel::apply_channel_ensemble;
use qpir_core::quantum::layout::RegisterLayout;
use qpir_core::quantum::random::random_state;
use qpir_core::quantum::{Ensemble, PureState, C64};
use qpir_core::runtime::{execute, execute_pure, ProtocolSpec, Retention};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[test]
fn coherent_protocol_is_correct_exhaustively() {
    for n in [1usize, 2, 4] {
        let inst = build_kerenidis(n, false).unwrap();
        for label in 0..1usize << n {
            let db = db_from_label(label, n);
            for i in 1..=n {
                let t = execute_pure(&inst.spec, &inst.input(&db, i).unwrap(), Retention::FinalOnly).unwrap();
                let d = inst.decode(&t).unwrap();
                assert_eq!(d.bit, db[i - 1], "n={n} db={db:?} i={i}");
                assert!(d.probability >= 1.0 - 1e-9);
            }
        }
    }
}

#[test]
fn fast_path_agrees_with_coherent_path() {
    let n = 4;
    let coherent = build_kerenidis(n, false).unwrap();
    for label in [0b0110usize, 0b1011, 0b1111] {
        let db = db_from_label(label, n);
        for i in 1..=n {
            let fast = kerenidis::build(&KerenidisOptions {
                database: DatabaseMode::Classical(db.clone()),
                index: IndexMode::Classical(i),
                ..KerenidisOptions::coherent(n, false)
            })
            .unwrap();
            let tf = execute_pure(&fast.spec, &fast.input(&db, i).unwrap(), Retention::FinalOnly).unwrap();
            let tc = execute_pure(&coherent.spec, &coherent.input(&db, i).unwrap(), Retention::FinalOnly).unwrap();
            let keep = tf.final_state().layout().names();
            let rf = tf.final_state().reduce(&keep).unwrap();
            let rc = tc.final_state().reduce(&keep).unwrap();
            assert!(rf.trace_distance(&rc).unwrap() < 1e-10);
        }
    }
}

#[test]
fn n1_sends_database_bit() {
    let inst = build_kerenidis(1, false).unwrap();
    let comm = inst.spec.communication().unwrap();
    assert_eq!((comm.m_a, comm.m_b, comm.rounds), (1, 0, 1));
    let t = execute_pure(&inst.spec, &inst.input(&[true], 1).unwrap(), Retention::All).unwrap();
    let after = t.state(1).unwrap();
    assert!((after.distribution(&["F"]).unwrap()[1] - 1.0).abs() < 1e-12);
}

#[test]
fn communication_closed_forms() {
    for n in [2usize, 4, 8] {
        let ell = n.trailing_zeros() as usize;
        // the coherent n = 8 build exceeds the qubit cap; the message
        // schedule does not depend on the database path
        let opts = |cleanup| KerenidisOptions {
            database: DatabaseMode::Classical(vec![false; n]),
            index: IndexMode::Classical(1),
            ..KerenidisOptions::coherent(n, cleanup)
        };
        if n < 8 {
            let coherent = build_kerenidis(n, false).unwrap().spec.communication().unwrap();
            assert_eq!(coherent, kerenidis::build(&opts(false)).unwrap().spec.communication().unwrap());
        } else {
            assert!(build_kerenidis(n, false).is_err());
        }
        let plain = kerenidis::build(&opts(false)).unwrap().spec.communication().unwrap();
        assert_eq!(plain.total, 4 * ell + 1);
        assert_eq!(plain.rounds, 2 * ell + 1);
        assert_eq!((plain.m_a, plain.m_b), (2 * ell + 1, 2 * ell));
        let clean = kerenidis::build(&opts(true)).unwrap().spec.communication().unwrap();
        assert_eq!(clean.total, 2 * (4 * ell + 1));
        assert_eq!(clean.rounds, 2 * (2 * ell + 1));
    }
    let db = build_baseline(BaselineKind::SendDb, 4).unwrap().spec.communication().unwrap();
    assert_eq!((db.m_a, db.m_b), (4, 0));
    let ix = build_baseline(BaselineKind::SendIndex, 4).unwrap().spec.communication().unwrap();
    assert_eq!((ix.m_a, ix.m_b), (1, 2));
}

#[test]
fn step_five_state_for_n2() {
    // DB = (0, 1), i = 2: b* = 1, so (R, R') becomes Σ_y |y⟩|y ⊕ 1⟩ / √2
    let inst = build_kerenidis(2, false).unwrap();
    let t = execute_pure(&inst.spec, &inst.input(&[false, true], 2).unwrap(), Retention::All).unwrap();
    let after_client = t.state(2).unwrap();
    let server_first = &inst.spec.moves[2].ops[0];
    let s = apply_channel_ensemble(after_client, server_first).unwrap();
    let rho = s.reduce(&["R1", "R1'"]).unwrap().dense();
    let want = [c(0.0), c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2), c(0.0)];
    let expect = qpir_core::quantum::linalg::projector(&want);
    assert!(qpir_core::quantum::linalg::max_abs_diff(&rho, &expect) < 1e-12);
}

#[test]
fn cleanup_restores_shared_entanglement() {
    for n in [1usize, 2, 4] {
        let inst = build_kerenidis(n, true).unwrap();
        let initial = {
            let t = execute_pure(&inst.spec, &inst.input(&vec![false; n], 1).unwrap(), Retention::All).unwrap();
            t.state(0).unwrap().clone()
        };
        for label in 0..1usize << n {
            let db = db_from_label(label, n);
            for i in 1..=n {
                let t = execute_pure(&inst.spec, &inst.input(&db, i).unwrap(), Retention::FinalOnly).unwrap();
                let d = inst.decode(&t).unwrap();
                assert_eq!(d.bit, db[i - 1]);
                assert!(d.probability >= 1.0 - 1e-9);
                let setup = inst.spec.setup_registers();
                if setup.is_empty() {
                    continue;
                }
                let now = t.final_state().reduce(&setup).unwrap();
                let then = initial.reduce(&setup).unwrap();
                assert!(now.trace_distance(&then).unwrap() < 1e-9);
            }
        }
    }
}

#[test]
fn baselines_decode_correctly() {
    for kind in [BaselineKind::SendDb, BaselineKind::SendIndex] {
        let inst = build_baseline(kind, 4).unwrap();
        let db = [false, true, true, false];
        for i in 1..=4 {
            let t = execute_pure(&inst.spec, &inst.input(&db, i).unwrap(), Retention::FinalOnly).unwrap();
            let d = inst.decode(&t).unwrap();
            assert_eq!(d.bit, db[i - 1]);
            assert!((d.probability - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn counterexample_is_correct_and_measures() {
    for n in [1usize, 2] {
        let inst = build_counterexample(n).unwrap();
        assert!(!inst.spec.is_measurement_free());
        for label in 0..1usize << n {
            let db = db_from_label(label, n);
            for i in 1..=n {
                let t = execute_pure(&inst.spec, &inst.input(&db, i).unwrap(), Retention::FinalOnly).unwrap();
                let d = inst.decode(&t).unwrap();
                assert_eq!(d.bit, db[i - 1]);
                assert!(d.probability >= 1.0 - 1e-9);
            }
        }
    }
}

#[test]
fn superposed_index_marginalizes_per_branch() {
    let inst = build_kerenidis(2, false).unwrap();
    let db = [true, false];
    let input = inst
        .db_state(&db)
        .unwrap()
        .tensor(&inst.index_state(&[c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)]).unwrap())
        .unwrap();
    let t = execute_pure(&inst.spec, &input, Retention::FinalOnly).unwrap();
    let joint = t.final_state().distribution(&["idx", "F"]).unwrap();
    // classical mixture of the two fixed-index runs
    let mut mix = [0.0; 4];
    for i in 1..=2 {
        let ti = execute_pure(&inst.spec, &inst.input(&db, i).unwrap(), Retention::FinalOnly).unwrap();
        let p = ti.final_state().distribution(&["idx", "F"]).unwrap();
        for k in 0..4 {
            mix[k] += 0.5 * p[k];
        }
    }
    for k in 0..4 {
        assert!((joint[k] - mix[k]).abs() < 1e-12);
    }
    assert!((joint[0b01] - 0.5).abs() < 1e-12);
    assert!((joint[0b10] - 0.5).abs() < 1e-12);
}

#[test]
fn reference_marginal_is_untouched() {
    let inst = build_kerenidis(2, false).unwrap();
    // (|0⟩_idx|0⟩_ref + |1⟩_idx|1⟩_ref)/√2
    let layout = RegisterLayout::from_pairs(&[("idx", 1), ("ref", 1)]).unwrap();
    let ent = PureState::new(layout, vec![c(FRAC_1_SQRT_2), c(0.0), c(0.0), c(FRAC_1_SQRT_2)]).unwrap();
    let input = inst.db_state(&[false, true]).unwrap().tensor(&ent).unwrap();
    let t = execute_pure(&inst.spec, &input, Retention::All).unwrap();
    let r0 = t.reduce(0, &["ref"]).unwrap();
    for step in 1..=t.steps() {
        assert!(t.reduce(step, &["ref"]).unwrap().trace_distance(&r0).unwrap() < 1e-10);
        let full: Vec<&str> = t.state(step).unwrap().layout().names();
        let purity = t.state(step).unwrap().reduce(&full).unwrap();
        let d = purity.dense();
        let p = (&d * &d).trace().re;
        assert!((p - 1.0).abs() < 1e-9);
    }
}

#[test]
fn folding_setup_preserves_final_state() {
    let inst = build_kerenidis(4, false).unwrap();
    let folded = inst.spec.fold_setup_into_messages();
    folded.validate().unwrap();
    let a = inst.spec.communication().unwrap();
    let b = folded.communication().unwrap();
    assert_eq!(b.m_a, a.m_a);
    assert_eq!(b.m_b, a.m_b + 3);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let input = random_state(&mut rng, &inst.input_layout().unwrap()).unwrap();
        let x = execute_pure(&inst.spec, &input, Retention::FinalOnly).unwrap();
        let y = execute_pure(&folded, &input, Retention::FinalOnly).unwrap();
        let sx = &x.final_state().branches()[0].1;
        let order = sx.layout().names();
        let sy = y.final_state().branches()[0].1.reorder(&order).unwrap();
        assert!(sx.distance(&sy).unwrap() < 1e-10);
    }
    let trivial = build_baseline(BaselineKind::SendDb, 2).unwrap().spec;
    assert_eq!(trivial.fold_setup_into_messages(), trivial);
}

#[test]
fn spec_json_round_trip_and_determinism() {
    for kind in [ProtocolKind::Kerenidis, ProtocolKind::SendDb, ProtocolKind::SendIndex, ProtocolKind::Counterexample] {
        let inst = build(kind, 2, false).unwrap();
        let text = inst.spec.to_json();
        let back = ProtocolSpec::from_json(&text).unwrap();
        assert_eq!(back, inst.spec);
        let input = inst.input(&[true, false], 2).unwrap();
        let t1 = execute_pure(&back, &input, Retention::FinalOnly).unwrap();
        let t2 = execute_pure(&inst.spec, &input, Retention::FinalOnly).unwrap();
        assert_eq!(t1.final_state(), t2.final_state());
    }
}

#[test]
fn malformed_specs_are_rejected() {
    let inst = build_kerenidis(2, false).unwrap();
    let mut empty = inst.spec.clone();
    empty.moves[0].send.clear();
    assert!(empty.validate().is_err());
    let mut trespass = inst.spec.clone();
    trespass.moves[0] = trespass.moves[1].clone();
    assert!(trespass.validate().is_err());
    let mut none = inst.spec.clone();
    none.moves.clear();
    assert!(none.validate().is_err());
    // wrong input width reports step 0
    let bad = PureState::zero(RegisterLayout::from_pairs(&[("db", 3), ("idx", 1)]).unwrap());
    assert!(execute(&inst.spec, &Ensemble::pure(bad), Retention::All).is_err());
}

#[test]
fn n8_fast_path_random_databases() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..4 {
        let db: Vec<bool> = (0..8).map(|_| rng.random()).collect();
        for i in [1usize, 4, 5, 8] {
            let inst = kerenidis::build(&KerenidisOptions {
                database: DatabaseMode::Classical(db.clone()),
                index: IndexMode::Classical(i),
                ..KerenidisOptions::coherent(8, false)
            })
            .unwrap();
            let t = execute_pure(&inst.spec, &inst.input(&db, i).unwrap(), Retention::FinalOnly).unwrap();
            let d = inst.decode(&t).unwrap();
            assert_eq!(d.bit, db[i - 1]);
            assert!(d.probability >= 1.0 - 1e-9);
        }
    }
}
