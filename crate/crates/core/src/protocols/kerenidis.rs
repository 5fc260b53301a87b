//! The recursive log-communication protocol, unrolled into flat moves.
//!
//! Level `k = 1..ℓ` owns the pair `R{k}` (server) and `R{k}'` (client) of
//! width `n / 2^k`. Level `k`'s database is `db` for `k = 1` and the content
//! of `R{k-1}` otherwise. Its half selector is `b*_k`, qubit `k-1` of the
//! index register, which holds `i - 1` big-endian. The base case copies
//! `R{ℓ}[0]` (or `db[0]` when `n = 1`) into `F`.

use crate::error::{QpirError, Result};
use crate::protocols::{DatabaseMode, IndexMode, QpirInstance, ProtocolKind};
use crate::quantum::channel::ChannelOp;
use crate::quantum::gates::{hadamards, Control, Gate, Mask, Qubit, SingleQubitOp, Slice};
use crate::quantum::layout::{max_qubits, Register};
use crate::runtime::spec::{Move, Party, ProtocolSpec};

pub const DB: &str = "db";
pub const IDX: &str = "idx";
pub const F: &str = "F";
pub const OUT: &str = "Out";
pub const Q: [&str; 2] = ["Q0", "Q1"];

pub fn server_reg(k: usize) -> String {
    format!("R{k}")
}

pub fn client_reg(k: usize) -> String {
    format!("R{k}'")
}

/// Options for [`build`].
#[derive(Clone, Debug, PartialEq)]
pub struct KerenidisOptions {
    pub n: usize,
    pub cleanup: bool,
    pub database: DatabaseMode,
    pub index: IndexMode,
    /// Prefix for every protocol-internal register name.
    pub prefix: String,
    /// Name of the quantum database register.
    pub db_name: String,
}

impl KerenidisOptions {
    pub fn coherent(n: usize, cleanup: bool) -> Self {
        KerenidisOptions {
            n,
            cleanup,
            database: DatabaseMode::Quantum,
            index: IndexMode::Quantum,
            prefix: String::new(),
            db_name: DB.to_string(),
        }
    }
}

pub fn log2_exact(n: usize) -> Result<usize> {
    if n == 0 || !n.is_power_of_two() {
        return Err(QpirError::InvalidArgument(format!("n = {n} is not a power of two")));
    }
    Ok(n.trailing_zeros() as usize)
}

pub fn index_width(ell: usize) -> usize {
    ell.max(1)
}

struct Names {
    prefix: String,
}

impl Names {
    fn get(&self, base: &str) -> String {
        format!("{}{}", self.prefix, base)
    }
    fn q(&self, b: usize, bit: usize) -> Qubit {
        Qubit::new(self.get(Q[b]), bit)
    }
}

enum IndexBit {
    Control(Qubit),
    Fixed(bool),
}

/// Index bit `bit` (0 = most significant) as a control or a constant.
fn index_bit(opts: &KerenidisOptions, ell: usize, bit: usize) -> IndexBit {
    match opts.index {
        IndexMode::Quantum => IndexBit::Control(Qubit::new(IDX, bit)),
        IndexMode::Classical(i) => IndexBit::Fixed(((i - 1) >> (ell - 1 - bit)) & 1 == 1),
    }
}

/// Server gates writing `r · DB_b` into `Q_b` for both halves at level `k`.
fn inner_products(opts: &KerenidisOptions, nm: &Names, k: usize, w: usize) -> Vec<Gate> {
    let source = Slice::new(nm.get(&server_reg(k)), 0, w);
    (0..2)
        .map(|b| {
            let mask = if k == 1 {
                match &opts.database {
                    DatabaseMode::Quantum => Mask::Register(Slice::new(opts.db_name.clone(), b * w, w)),
                    DatabaseMode::Classical(db) => Mask::fixed(&db[b * w..(b + 1) * w]),
                }
            } else {
                Mask::Register(Slice::new(nm.get(&server_reg(k - 1)), b * w, w))
            };
            Gate::InnerProductCnot {
                source: source.clone(),
                mask,
                target: nm.q(b, 0),
            }
        })
        .collect()
}

/// Client phase on `Q_{b*}`.
fn client_phase(opts: &KerenidisOptions, nm: &Names, ell: usize, k: usize) -> Vec<Gate> {
    match index_bit(opts, ell, k - 1) {
        IndexBit::Control(ctl) => vec![
            Gate::controlled(SingleQubitOp::Z, vec![Control::when(ctl.clone(), false)], nm.q(0, 0)),
            Gate::controlled(SingleQubitOp::Z, vec![Control::when(ctl, true)], nm.q(1, 0)),
        ],
        IndexBit::Fixed(b) => vec![Gate::z(nm.q(b as usize, 0))],
    }
}

/// Base case: copy the level-ℓ database bit into `F`.
fn base_copy(opts: &KerenidisOptions, nm: &Names, ell: usize) -> Vec<Gate> {
    let f = Qubit::new(nm.get(F), 0);
    if ell == 0 {
        match &opts.database {
            DatabaseMode::Quantum => vec![Gate::cnot(Qubit::new(opts.db_name.clone(), 0), f)],
            DatabaseMode::Classical(db) if db[0] => vec![Gate::x(f)],
            DatabaseMode::Classical(_) => vec![],
        }
    } else {
        vec![Gate::cnot(Qubit::new(nm.get(&server_reg(ell)), 0), f)]
    }
}

/// Client corrections `F ⊕= R{k}'[i*_k]` for every level.
fn corrections(opts: &KerenidisOptions, nm: &Names, ell: usize) -> Vec<Gate> {
    let f = Qubit::new(nm.get(F), 0);
    let mut gates = Vec::new();
    for k in 1..=ell {
        let w = 1usize << (ell - k);
        let low = ell - k;
        let rc = nm.get(&client_reg(k));
        match opts.index {
            IndexMode::Quantum => {
                for j in 0..w {
                    let mut controls = vec![Control::on(Qubit::new(rc.clone(), j))];
                    for b in 0..low {
                        let bit = (j >> (low - 1 - b)) & 1 == 1;
                        controls.push(Control::when(Qubit::new(IDX, k + b), bit));
                    }
                    gates.push(Gate::controlled(SingleQubitOp::X, controls, f.clone()));
                }
            }
            IndexMode::Classical(i) => {
                let j = (i - 1) & (w - 1);
                gates.push(Gate::cnot(Qubit::new(rc, j), f.clone()));
            }
        }
    }
    gates
}

/// Builds the flat move list, optionally with the rewinding cleanup.
pub fn build(opts: &KerenidisOptions) -> Result<QpirInstance> {
    let n = opts.n;
    let ell = log2_exact(n)?;
    if let DatabaseMode::Classical(db) = &opts.database {
        if db.len() != n {
            return Err(QpirError::InvalidArgument(format!(
                "database has {} bits, expected {n}",
                db.len()
            )));
        }
    }
    if let IndexMode::Classical(i) = opts.index {
        if i == 0 || i > n {
            return Err(QpirError::InvalidArgument(format!("index {i} outside 1..={n}")));
        }
    }
    let nm = Names {
        prefix: opts.prefix.clone(),
    };

    let mut inputs_a = Vec::new();
    if opts.database == DatabaseMode::Quantum {
        inputs_a.push(Register::new(opts.db_name.clone(), n));
    }
    let mut inputs_b = Vec::new();
    if opts.index == IndexMode::Quantum {
        inputs_b.push(Register::new(IDX, index_width(ell)));
    }
    let mut setup_a = Vec::new();
    let mut setup_b = Vec::new();
    let mut setup = Vec::new();
    let mut pairs = Vec::new();
    for k in 1..=ell {
        let w = n >> k;
        let (r, rc) = (nm.get(&server_reg(k)), nm.get(&client_reg(k)));
        setup_a.push(Register::new(r.clone(), w));
        setup_b.push(Register::new(rc.clone(), w));
        for j in 0..w {
            setup.push(Gate::h(Qubit::new(r.clone(), j)));
            setup.push(Gate::cnot(Qubit::new(r.clone(), j), Qubit::new(rc.clone(), j)));
        }
        pairs.push((r, rc, w));
    }

    let q_regs = vec![Register::new(nm.get(Q[0]), 1), Register::new(nm.get(Q[1]), 1)];
    let q_names = [nm.get(Q[0]), nm.get(Q[1])];
    let q_send: Vec<&str> = q_names.iter().map(String::as_str).collect();
    let f_name = nm.get(F);

    // forward moves; allocations kept as separate ops so rewinding can skip them
    let mut moves: Vec<Move> = Vec::new();
    for k in 1..=ell + 1 {
        let mut ops = Vec::new();
        if k == 1 && ell > 0 {
            ops.push(ChannelOp::allocate(q_regs.clone()));
        }
        let mut gates = Vec::new();
        if k > 1 {
            let w = n >> (k - 1);
            gates.extend(inner_products(opts, &nm, k - 1, w));
            gates.extend(hadamards(&Slice::new(nm.get(&server_reg(k - 1)), 0, w)));
        }
        if k <= ell {
            gates.extend(inner_products(opts, &nm, k, n >> k));
            ops.push(ChannelOp::circuit(gates));
            moves.push(Move::new(Party::A, ops, &q_send));
            let mut client = client_phase(opts, &nm, ell, k);
            client.extend(hadamards(&Slice::new(nm.get(&client_reg(k)), 0, n >> k)));
            moves.push(Move::new(Party::B, vec![ChannelOp::circuit(client)], &q_send));
        } else {
            if !gates.is_empty() {
                ops.push(ChannelOp::circuit(gates));
            }
            ops.push(ChannelOp::allocate(vec![Register::new(f_name.clone(), 1)]));
            ops.push(ChannelOp::circuit(base_copy(opts, &nm, ell)));
            moves.push(Move::new(Party::A, ops, &[f_name.as_str()]));
            moves.push(Move::new(
                Party::B,
                vec![ChannelOp::circuit(corrections(opts, &nm, ell))],
                &[],
            ));
        }
    }

    let mut output = f_name.clone();
    if opts.cleanup {
        let out = nm.get(OUT);
        let last = moves.last_mut().expect("at least two moves");
        let undo = ChannelOp::circuit(corrections(opts, &nm, ell)).inverse()?;
        last.ops.push(ChannelOp::allocate(vec![Register::new(out.clone(), 1)]));
        last.ops.push(ChannelOp::circuit(vec![Gate::cnot(
            Qubit::new(f_name.clone(), 0),
            Qubit::new(out.clone(), 0),
        )]));
        last.ops.push(undo);
        last.send = vec![f_name.clone()];
        // rewind every earlier move; each reversed move returns what its
        // forward counterpart received
        let forward: Vec<Move> = moves[..moves.len() - 1].to_vec();
        for (pos, mv) in forward.iter().enumerate().rev() {
            let ops = mv
                .ops
                .iter()
                .rev()
                .filter(|op| matches!(op, ChannelOp::Circuit { .. }))
                .map(ChannelOp::inverse)
                .collect::<Result<Vec<_>>>()?;
            let send = if pos == 0 { vec![] } else { forward[pos - 1].send.clone() };
            moves.push(Move {
                party: mv.party,
                ops,
                send,
            });
        }
        output = out;
    }

    let spec = ProtocolSpec {
        name: format!("kerenidis-n{n}{}", if opts.cleanup { "-cleanup" } else { "" }),
        first: Party::A,
        inputs_a,
        inputs_b,
        setup_a,
        setup_b,
        setup,
        moves,
    };
    spec.validate()?;
    let instance = QpirInstance {
        kind: ProtocolKind::Kerenidis,
        n,
        ell,
        cleanup: opts.cleanup,
        spec,
        database: opts.database.clone(),
        index: opts.index,
        output,
        setup_pairs: pairs,
    };
    instance.check_bill(max_qubits())?;
    Ok(instance)
}
