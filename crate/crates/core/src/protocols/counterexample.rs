//! A protocol that is private against honest servers only: the server first
//! runs the recursive protocol on a freshly measured uniformly random
//! database `D`, then on the real one. The client's first output `p1.F` is
//! ignored.
//!
//! The two runs are pipelined: the first run's last server move shares a
//! move with the second run's first server move, and likewise for the
//! client, so the message count stays that of a single run plus one.

use crate::error::{QpirError, Result};
use crate::protocols::kerenidis::{self, KerenidisOptions, DB, F};
use crate::protocols::{DatabaseMode, IndexMode, ProtocolKind, QpirInstance};
use crate::quantum::channel::ChannelOp;
use crate::quantum::gates::{hadamards, Slice};
use crate::quantum::layout::{max_qubits, Register};
use crate::runtime::spec::{Move, ProtocolSpec};

pub const RANDOM_DB: &str = "D";
pub const FIRST: &str = "p1.";
pub const SECOND: &str = "p2.";

fn merge(a: &Move, b: &Move) -> Move {
    let mut ops = a.ops.clone();
    ops.extend(b.ops.iter().cloned());
    let mut send = a.send.clone();
    send.extend(b.send.iter().cloned());
    Move {
        party: a.party,
        ops,
        send,
    }
}

pub fn build_counterexample(n: usize) -> Result<QpirInstance> {
    if n > 2 {
        return Err(QpirError::InvalidArgument(format!(
            "counterexample supports n <= 2 (doubles the register bill), got {n}"
        )));
    }
    let opts = |prefix: &str, db: &str| KerenidisOptions {
        n,
        cleanup: false,
        database: DatabaseMode::Quantum,
        index: IndexMode::Quantum,
        prefix: prefix.to_string(),
        db_name: db.to_string(),
    };
    let first = kerenidis::build(&opts(FIRST, RANDOM_DB))?;
    let second = kerenidis::build(&opts(SECOND, DB))?;
    let ell = first.ell;

    let mut l1 = first.spec.moves.clone();
    let l2 = &second.spec.moves;
    let mut prep = vec![
        ChannelOp::allocate(vec![Register::new(RANDOM_DB, n)]),
        ChannelOp::circuit(hadamards(&Slice::new(RANDOM_DB, 0, n))),
        ChannelOp::basis_measurement(&[RANDOM_DB], n),
    ];
    prep.append(&mut l1[0].ops);
    l1[0].ops = prep;

    let k = 2 * ell;
    let mut moves: Vec<Move> = l1[..k].to_vec();
    moves.push(merge(&l1[k], &l2[0]));
    moves.push(merge(&l1[k + 1], &l2[1]));
    moves.extend(l2[2..].iter().cloned());

    let spec = ProtocolSpec {
        name: format!("counterexample-n{n}"),
        first: first.spec.first,
        inputs_a: second.spec.inputs_a.clone(),
        inputs_b: second.spec.inputs_b.clone(),
        setup_a: [first.spec.setup_a.clone(), second.spec.setup_a.clone()].concat(),
        setup_b: [first.spec.setup_b.clone(), second.spec.setup_b.clone()].concat(),
        setup: [first.spec.setup.clone(), second.spec.setup.clone()].concat(),
        moves,
    };
    spec.validate()?;
    let instance = QpirInstance {
        kind: ProtocolKind::Counterexample,
        n,
        ell,
        cleanup: false,
        spec,
        database: DatabaseMode::Quantum,
        index: IndexMode::Quantum,
        output: format!("{SECOND}{F}"),
        setup_pairs: [first.setup_pairs, second.setup_pairs].concat(),
    };
    instance.check_bill(max_qubits())?;
    Ok(instance)
}
