//! Server-side adversaries with explicit recovery maps, and the meter that
//! measures how far they stray from an honest run.
//!
//! A recovery at step `t` is purified: a list of isometric operations on
//! server-side registers followed by tracing out `junk`. The remaining
//! registers must be exactly those of the honest run at `t`.

pub mod inputs;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{QpirError, Result};
use crate::protocols::kerenidis::server_reg;
use crate::protocols::{ProtocolKind, QpirInstance};
use crate::quantum::channel::{apply_channel_ensemble, ChannelOp};
use crate::quantum::gates::{hadamards, Control, Gate, MatrixData, Qubit, SingleQubitOp, Slice};
use crate::quantum::layout::Register;
use crate::quantum::linalg::CMatrix;
use crate::quantum::state::Ensemble;
use crate::runtime::execute::{execute, ExecutionTranscript, Retention};
use crate::runtime::spec::{Ownership, Party, ProtocolSpec, Side};

pub use inputs::{standard_inputs, InputSet, TestInput};

/// Purified recovery for one step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub ops: Vec<ChannelOp>,
    pub junk: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Adversary {
    pub name: String,
    pub party: Party,
    /// The protocol as run with this adversary in the server's seat.
    pub spec: ProtocolSpec,
    /// `recovery[t]` for `t = 0..=T`.
    pub recovery: Option<Vec<Recovery>>,
    pub recovery_note: Option<String>,
}

/// CLI names of the constructed adversaries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AdversaryName {
    Honest,
    HonestPurified,
    PurifyDb,
    Gamma(f64),
    GammaLossy(f64),
}

impl fmt::Display for AdversaryName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversaryName::Honest => f.write_str("honest"),
            AdversaryName::HonestPurified => f.write_str("honest-purified"),
            AdversaryName::PurifyDb => f.write_str("purify-db"),
            AdversaryName::Gamma(t) => write!(f, "gamma:{t}"),
            AdversaryName::GammaLossy(t) => write!(f, "gamma-lossy:{t}"),
        }
    }
}

impl FromStr for AdversaryName {
    type Err = QpirError;
    fn from_str(s: &str) -> Result<Self> {
        let angle = |v: &str| {
            v.parse::<f64>()
                .ok()
                .filter(|t| t.is_finite())
                .ok_or_else(|| QpirError::Parse(format!("bad angle in adversary `{s}`")))
        };
        match s {
            "honest" => Ok(AdversaryName::Honest),
            "honest-purified" => Ok(AdversaryName::HonestPurified),
            "purify-db" => Ok(AdversaryName::PurifyDb),
            _ => {
                if let Some(v) = s.strip_prefix("gamma-lossy:") {
                    Ok(AdversaryName::GammaLossy(angle(v)?))
                } else if let Some(v) = s.strip_prefix("gamma:") {
                    Ok(AdversaryName::Gamma(angle(v)?))
                } else {
                    Err(QpirError::InvalidArgument(format!("unknown adversary `{s}`")))
                }
            }
        }
    }
}

impl AdversaryName {
    pub fn build(&self, inst: &QpirInstance) -> Result<Adversary> {
        match *self {
            AdversaryName::Honest => Ok(Adversary::honest(&inst.spec)),
            AdversaryName::HonestPurified => purified_honest(&inst.spec, Party::A),
            AdversaryName::PurifyDb => purification_attack(inst),
            AdversaryName::Gamma(t) => gamma_family(inst, t, false),
            AdversaryName::GammaLossy(t) => gamma_family(inst, t, true),
        }
    }
}

impl Adversary {
    /// The honest server with identity recovery.
    pub fn honest(spec: &ProtocolSpec) -> Adversary {
        Adversary {
            name: "honest".into(),
            party: Party::A,
            spec: spec.clone(),
            recovery: Some(vec![Recovery::default(); spec.steps() + 1]),
            recovery_note: None,
        }
    }

    pub fn is_measurement_free(&self) -> bool {
        self.spec.is_measurement_free()
    }

    pub fn recovery_at(&self, t: usize) -> Result<&Recovery> {
        let rec = self
            .recovery
            .as_ref()
            .ok_or_else(|| QpirError::MissingRecovery(self.name.clone()))?;
        rec.get(t)
            .ok_or_else(|| QpirError::InvalidArgument(format!("no recovery for step {t}")))
    }

    /// Applies the recovery ops at `t` (without tracing out the junk).
    pub fn recover(&self, t: usize, state: &Ensemble) -> Result<Ensemble> {
        let mut s = state.clone();
        for op in &self.recovery_at(t)?.ops {
            s = apply_channel_ensemble(&s, op)?;
        }
        Ok(s)
    }

    /// Applies the inverse of the recovery ops at `t`.
    pub fn unrecover(&self, t: usize, state: &Ensemble) -> Result<Ensemble> {
        let mut s = state.clone();
        for op in self.recovery_at(t)?.ops.iter().rev() {
            s = apply_channel_ensemble(&s, &op.inverse()?)?;
        }
        Ok(s)
    }

    /// Checks that every recovery touches only registers the server holds
    /// (owned or in transit) at its step.
    pub fn check_recovery_locality(&self, transcript: &ExecutionTranscript) -> Result<()> {
        let Some(rec) = &self.recovery else {
            return Ok(());
        };
        for (t, r) in rec.iter().enumerate().take(transcript.steps() + 1) {
            let own = &transcript.ownership[t];
            let server = |name: &str| matches!(own.side(name), Some(Side::A | Side::ToA | Side::ToB));
            for op in &r.ops {
                if let Some(bad) = op.inputs().into_iter().find(|n| !server(n)) {
                    return Err(QpirError::step(t, format!("recovery acts on client register {bad}")));
                }
            }
            if let Some(bad) = r.junk.iter().find(|n| !server(n)) {
                return Err(QpirError::step(t, format!("recovery discards non-server register {bad}")));
            }
        }
        Ok(())
    }
}

/// Register widths as they stand before each move.
fn widths_before(spec: &ProtocolSpec) -> Result<Vec<BTreeMap<String, usize>>> {
    let s = spec.structure(&[])?;
    Ok(s.ownership
        .iter()
        .take(spec.steps())
        .map(|o: &Ownership| o.registers.iter().map(|(k, (_, w))| (k.clone(), *w)).collect())
        .collect())
}

fn ancilla_width(count: usize) -> usize {
    (count.max(2) as f64).log2().ceil() as usize
}

/// Stinespring dilation `V = Σ_k K_k ⊗ |k⟩` of a non-isometric operation,
/// with the environment kept in a fresh register `ancilla`.
fn stinespring(op: &ChannelOp, widths: &BTreeMap<String, usize>, ancilla: &str) -> Result<ChannelOp> {
    let width = |n: &str| {
        widths
            .get(n)
            .copied()
            .ok_or_else(|| QpirError::UnknownRegister(n.to_string()))
    };
    let (inputs, outputs, operators): (Vec<String>, Vec<Register>, &Vec<MatrixData>) = match op {
        ChannelOp::KrausSet {
            inputs,
            outputs,
            operators,
        } => (inputs.clone(), outputs.clone(), operators),
        ChannelOp::Measurement { registers, operators } => {
            let outs = registers
                .iter()
                .map(|r| Ok(Register::new(r.clone(), width(r)?)))
                .collect::<Result<Vec<_>>>()?;
            (registers.clone(), outs, operators)
        }
        _ => return Ok(op.clone()),
    };
    let ks = operators.iter().map(MatrixData::to_matrix).collect::<Result<Vec<_>>>()?;
    let a = ancilla_width(ks.len());
    let env = 1usize << a;
    let (rows, cols) = (ks[0].nrows(), ks[0].ncols());
    let mut v = CMatrix::zeros(rows * env, cols);
    for (k, m) in ks.iter().enumerate() {
        for r in 0..rows {
            for c in 0..cols {
                v[(r * env + k, c)] = m[(r, c)];
            }
        }
    }
    let mut outs = outputs;
    outs.push(Register::new(ancilla, a));
    let ins: Vec<&str> = inputs.iter().map(String::as_str).collect();
    ChannelOp::isometry(&ins, outs, &v)
}

/// Replaces every non-isometric operation of `party` by its Stinespring
/// dilation. Recovery traces out the dilation registers.
pub fn purified_honest(spec: &ProtocolSpec, party: Party) -> Result<Adversary> {
    if party != Party::A {
        return Err(QpirError::Unsupported("only server-side adversaries are modelled".into()));
    }
    let widths = widths_before(spec)?;
    let mut out = spec.clone();
    let mut junk: Vec<String> = Vec::new();
    let mut recovery = vec![Recovery::default()];
    for (k, mv) in out.moves.iter_mut().enumerate() {
        if mv.party == party {
            let mut w = widths[k].clone();
            let mut ops = Vec::with_capacity(mv.ops.len());
            for (j, op) in mv.ops.iter().enumerate() {
                let new = if op.is_isometric() {
                    op.clone()
                } else {
                    let name = format!("env{}.{}", k + 1, j);
                    junk.push(name.clone());
                    stinespring(op, &w, &name)?
                };
                let (created, removed) = new.layout_changes();
                for r in created {
                    w.insert(r.name.clone(), r.width);
                }
                for r in removed {
                    w.remove(r);
                }
                ops.push(new);
            }
            mv.ops = ops;
        }
        recovery.push(Recovery {
            ops: vec![],
            junk: junk.clone(),
        });
    }
    out.name = format!("{}+purified", spec.name);
    out.validate()?;
    Ok(Adversary {
        name: "honest-purified".into(),
        party,
        spec: out,
        recovery: Some(recovery),
        recovery_note: None,
    })
}

pub const PURIFIER: &str = "A'";
pub const INPUT_STASH: &str = "db.in";

fn swap(a: Qubit, b: Qubit) -> Vec<Gate> {
    vec![
        Gate::cnot(a.clone(), b.clone()),
        Gate::cnot(b.clone(), a.clone()),
        Gate::cnot(a, b),
    ]
}

/// The server stashes its database input, replaces it by
/// `2^{-n/2} Σ_x |x⟩_db |x⟩_{A'}` and runs honestly. Recovery swaps the
/// stash back while the database is still on the server side and discards
/// `A'` and the stash; it is meaningful for anchored inputs only.
pub fn purification_attack(inst: &QpirInstance) -> Result<Adversary> {
    let db = inst
        .db_register()
        .ok_or_else(|| QpirError::Unsupported("instance lacks a quantum database register".into()))?
        .to_string();
    let n = inst.n;
    let spec = &inst.spec;
    let first_a = spec
        .moves
        .iter()
        .position(|m| m.party == Party::A)
        .ok_or_else(|| QpirError::Unsupported("server never moves".into()))?;

    let mut gates = Vec::new();
    for j in 0..n {
        gates.extend(swap(Qubit::new(db.clone(), j), Qubit::new(INPUT_STASH, j)));
    }
    gates.extend(hadamards(&Slice::new(PURIFIER, 0, n)));
    for j in 0..n {
        gates.push(Gate::cnot(Qubit::new(PURIFIER, j), Qubit::new(db.clone(), j)));
    }
    let mut out = spec.clone();
    let mv = &mut out.moves[first_a];
    let mut ops = vec![
        ChannelOp::allocate(vec![Register::new(PURIFIER, n), Register::new(INPUT_STASH, n)]),
        ChannelOp::circuit(gates),
    ];
    ops.append(&mut mv.ops);
    mv.ops = ops;
    out.name = format!("{}+purify-db", spec.name);
    let structure = out.structure(&[])?;

    let unstash: Vec<Gate> = (0..n)
        .flat_map(|j| swap(Qubit::new(db.clone(), j), Qubit::new(INPUT_STASH, j)))
        .collect();
    let mut recovery = Vec::with_capacity(out.steps() + 1);
    for t in 0..=out.steps() {
        if t <= first_a {
            recovery.push(Recovery::default());
            continue;
        }
        let side = structure.ownership[t].side(&db);
        let ops = if matches!(side, Some(Side::A | Side::ToA | Side::ToB)) {
            vec![ChannelOp::circuit(unstash.clone())]
        } else {
            vec![]
        };
        recovery.push(Recovery {
            ops,
            junk: vec![PURIFIER.into(), INPUT_STASH.into()],
        });
    }
    Ok(Adversary {
        name: "purify-db".into(),
        party: Party::A,
        spec: out,
        recovery: Some(recovery),
        recovery_note: Some("anchored inputs only; no recovery exists for a superposed database".into()),
    })
}

pub fn gamma_ancilla(k: usize) -> String {
    format!("S{k}")
}

/// Honest recursive protocol plus, in each server move that opens level
/// `k` (after its Hadamards), a fresh qubit `S{k}` rotated by `Ry(θ)`
/// controlled on `R{k}[0]`. For `n = 1` the control is `db[0]`.
///
/// Proper recovery applies the controlled `Ry(−θ)` and discards `S{k}`;
/// the lossy variant only discards.
pub fn gamma_family(inst: &QpirInstance, theta: f64, lossy: bool) -> Result<Adversary> {
    if inst.kind != ProtocolKind::Kerenidis || inst.cleanup || !inst.has_quantum_database() {
        return Err(QpirError::Unsupported(
            "the gamma family is defined on the coherent recursive protocol without cleanup".into(),
        ));
    }
    if !inst.spec.is_measurement_free() {
        return Err(QpirError::Unsupported("gamma family needs a measurement-free protocol".into()));
    }
    let ell = inst.ell;
    let mut out = inst.spec.clone();
    // server move index carrying the deviation for each level
    let mut sites: Vec<(usize, usize, Qubit)> = Vec::new();
    let server_moves: Vec<usize> = (0..out.moves.len())
        .filter(|&k| out.moves[k].party == Party::A)
        .collect();
    if ell == 0 {
        let db = inst.db_register().expect("quantum database");
        sites.push((server_moves[0], 1, Qubit::new(db, 0)));
    } else {
        for k in 1..=ell {
            sites.push((server_moves[k], k, Qubit::new(server_reg(k), 0)));
        }
    }
    for (mv, k, ctl) in &sites {
        let s = gamma_ancilla(*k);
        let rotate = vec![
            ChannelOp::allocate(vec![Register::new(s.clone(), 1)]),
            ChannelOp::circuit(vec![Gate::controlled(
                SingleQubitOp::Ry(theta),
                vec![Control::on(ctl.clone())],
                Qubit::new(s, 0),
            )]),
        ];
        let ops = &mut out.moves[*mv].ops;
        // insert right after the circuit carrying the level's Hadamards
        let at = if ell == 0 { 0 } else { 1 };
        let at = at.min(ops.len());
        ops.splice(at..at, rotate);
    }
    out.name = format!(
        "{}+gamma{}:{theta}",
        inst.spec.name,
        if lossy { "-lossy" } else { "" }
    );
    out.validate()?;

    let mut recovery = Vec::with_capacity(out.steps() + 1);
    for t in 0..=out.steps() {
        let live: Vec<&(usize, usize, Qubit)> = sites.iter().filter(|(mv, _, _)| *mv < t).collect();
        let ops = if lossy || live.is_empty() {
            vec![]
        } else {
            vec![ChannelOp::circuit(
                live.iter()
                    .rev()
                    .map(|(_, k, ctl)| {
                        Gate::controlled(
                            SingleQubitOp::Ry(-theta),
                            vec![Control::on(ctl.clone())],
                            Qubit::new(gamma_ancilla(*k), 0),
                        )
                    })
                    .collect(),
            )]
        };
        recovery.push(Recovery {
            ops,
            junk: live.iter().map(|(_, k, _)| gamma_ancilla(*k)).collect(),
        });
    }
    let name = if lossy {
        format!("gamma-lossy:{theta}")
    } else {
        format!("gamma:{theta}")
    };
    Ok(Adversary {
        name,
        party: Party::A,
        spec: out,
        recovery: Some(recovery),
        recovery_note: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeciousnessRow {
    pub input: String,
    pub step: usize,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeciousnessReport {
    pub protocol: String,
    pub adversary: String,
    pub rows: Vec<SpeciousnessRow>,
    pub gamma_hat: f64,
    pub inputs: Vec<String>,
}

/// Distance between the recovered adversarial state and the honest state
/// at every step, for one input.
pub fn speciousness_trace(honest: &ProtocolSpec, adversary: &Adversary, input: &Ensemble) -> Result<Vec<f64>> {
    adversary.recovery_at(0)?;
    let h = execute(honest, input, Retention::All)?;
    let a = execute(&adversary.spec, input, Retention::All)?;
    if h.steps() != a.steps() {
        return Err(QpirError::InvalidArgument(format!(
            "adversary runs {} steps, protocol {}",
            a.steps(),
            h.steps()
        )));
    }
    adversary.check_recovery_locality(&a)?;
    (1..=h.steps())
        .map(|t| {
            let honest_state = h.state(t)?;
            let names = honest_state.layout().names();
            let rec = adversary.recover(t, a.state(t)?)?;
            let junk = &adversary.recovery_at(t)?.junk;
            let mut left: Vec<&str> = rec
                .layout()
                .names()
                .into_iter()
                .filter(|n| !junk.iter().any(|j| j == n))
                .collect();
            left.sort_unstable();
            let mut want = names.clone();
            want.sort_unstable();
            if left != want {
                return Err(QpirError::step(
                    t,
                    format!("recovered registers {left:?} differ from honest {want:?}"),
                ));
            }
            rec.reduce(&names)?.trace_distance(&honest_state.reduce(&names)?)
        })
        .collect()
}

/// `γ̂`: the largest recovered-versus-honest distance over all steps and
/// inputs.
pub fn measure_speciousness(
    honest: &ProtocolSpec,
    adversary: &Adversary,
    inputs: &[TestInput],
) -> Result<SpeciousnessReport> {
    let mut rows = Vec::new();
    for input in inputs {
        for (k, d) in speciousness_trace(honest, adversary, &input.state)?.into_iter().enumerate() {
            rows.push(SpeciousnessRow {
                input: input.label.clone(),
                step: k + 1,
                distance: d,
            });
        }
    }
    let gamma_hat = rows.iter().map(|r| r.distance).fold(0.0, f64::max);
    Ok(SpeciousnessReport {
        protocol: honest.name.clone(),
        adversary: adversary.name.clone(),
        rows,
        gamma_hat,
        inputs: inputs.iter().map(|i| i.label.clone()).collect(),
    })
}
