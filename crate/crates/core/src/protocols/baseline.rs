//! Trivial baselines: the server sends the whole database, or the client
//! sends its index.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::protocols::kerenidis::{index_width, log2_exact, DB, F, IDX};
use crate::protocols::{DatabaseMode, IndexMode, ProtocolKind, QpirInstance};
use crate::quantum::channel::ChannelOp;
use crate::quantum::gates::{Control, Gate, Qubit, SingleQubitOp};
use crate::quantum::layout::{max_qubits, Register};
use crate::runtime::spec::{Move, Party, ProtocolSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    SendDb,
    SendIndex,
}

/// `F ⊕= db[i − 1]`, as one index-controlled CNOT per database bit.
fn lookup(n: usize, w: usize) -> Vec<Gate> {
    (0..n)
        .map(|j| {
            let mut controls = vec![Control::on(Qubit::new(DB, j))];
            for b in 0..w {
                controls.push(Control::when(Qubit::new(IDX, b), (j >> (w - 1 - b)) & 1 == 1));
            }
            Gate::controlled(SingleQubitOp::X, controls, Qubit::new(F, 0))
        })
        .collect()
}

pub fn build_baseline(kind: BaselineKind, n: usize) -> Result<QpirInstance> {
    let ell = log2_exact(n)?;
    let w = index_width(ell);
    let f = vec![Register::new(F, 1)];
    let (first, moves, name, pkind) = match kind {
        BaselineKind::SendDb => (
            Party::A,
            vec![
                Move::new(Party::A, vec![], &[DB]),
                Move::new(
                    Party::B,
                    vec![ChannelOp::allocate(f), ChannelOp::circuit(lookup(n, w))],
                    &[],
                ),
            ],
            format!("send-db-n{n}"),
            ProtocolKind::SendDb,
        ),
        BaselineKind::SendIndex => (
            Party::B,
            vec![
                Move::new(Party::B, vec![], &[IDX]),
                Move::new(
                    Party::A,
                    vec![ChannelOp::allocate(f), ChannelOp::circuit(lookup(n, w))],
                    &[F],
                ),
                Move::new(Party::B, vec![], &[]),
            ],
            format!("send-index-n{n}"),
            ProtocolKind::SendIndex,
        ),
    };
    let spec = ProtocolSpec {
        name,
        first,
        inputs_a: vec![Register::new(DB, n)],
        inputs_b: vec![Register::new(IDX, w)],
        setup_a: vec![],
        setup_b: vec![],
        setup: vec![],
        moves,
    };
    spec.validate()?;
    let instance = QpirInstance {
        kind: pkind,
        n,
        ell,
        cleanup: false,
        spec,
        database: DatabaseMode::Quantum,
        index: IndexMode::Quantum,
        output: F.to_string(),
        setup_pairs: vec![],
    };
    instance.check_bill(max_qubits())?;
    Ok(instance)
}
