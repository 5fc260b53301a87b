//! Two-party protocol specifications and their structural checks.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{QpirError, Result};
use crate::quantum::channel::ChannelOp;
use crate::quantum::gates::Gate;
use crate::quantum::layout::Register;

/// `A` is the server (database holder), `B` the client.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Party {
    A,
    B,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::A => Party::B,
            Party::B => Party::A,
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::A => "A",
            Party::B => "B",
        })
    }
}

/// One party's local operation followed by the registers it sends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Move {
    pub party: Party,
    pub ops: Vec<ChannelOp>,
    #[serde(default)]
    pub send: Vec<String>,
}

impl Move {
    pub fn new(party: Party, ops: Vec<ChannelOp>, send: &[&str]) -> Self {
        Move {
            party,
            ops,
            send: send.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn is_isometric(&self) -> bool {
        self.ops.iter().all(ChannelOp::is_isometric)
    }
}

/// Where a register sits after a step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    A,
    B,
    /// Sent by `B`, not yet acted on by `A`.
    ToA,
    /// Sent by `A`, not yet acted on by `B`.
    ToB,
    Reference,
}

/// Register ownership after one step, with widths.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Ownership {
    pub registers: BTreeMap<String, (Side, usize)>,
}

impl Ownership {
    pub fn side(&self, name: &str) -> Option<Side> {
        self.registers.get(name).map(|(s, _)| *s)
    }

    pub fn names_on(&self, sides: &[Side]) -> Vec<&str> {
        self.registers
            .iter()
            .filter(|(_, (s, _))| sides.contains(s))
            .map(|(n, _)| n.as_str())
            .collect()
    }

    /// Server-owned registers plus every register in transit.
    pub fn adversary_side(&self) -> Vec<&str> {
        self.names_on(&[Side::A, Side::ToA, Side::ToB])
    }

    pub fn client_side(&self) -> Vec<&str> {
        self.names_on(&[Side::B])
    }

    pub fn reference(&self) -> Vec<&str> {
        self.names_on(&[Side::Reference])
    }

    pub fn owned_by(&self, party: Party) -> Vec<&str> {
        match party {
            Party::A => self.names_on(&[Side::A]),
            Party::B => self.names_on(&[Side::B]),
        }
    }
}

/// A two-party protocol: input and setup registers, a setup circuit acting
/// on `|0…0⟩` of the setup registers, and alternating moves.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub name: String,
    pub first: Party,
    pub inputs_a: Vec<Register>,
    pub inputs_b: Vec<Register>,
    #[serde(default)]
    pub setup_a: Vec<Register>,
    #[serde(default)]
    pub setup_b: Vec<Register>,
    #[serde(default)]
    pub setup: Vec<Gate>,
    pub moves: Vec<Move>,
}

/// Message counts in qubits. `rounds` counts messages.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Communication {
    pub m_a: usize,
    pub m_b: usize,
    pub total: usize,
    pub rounds: usize,
}

/// Result of the structural pass: ownership before the first move
/// (index 0) and after each move.
#[derive(Clone, Debug, PartialEq)]
pub struct Structure {
    pub ownership: Vec<Ownership>,
    pub communication: Communication,
}

impl ProtocolSpec {
    pub fn steps(&self) -> usize {
        self.moves.len()
    }

    pub fn party_at(&self, step: usize) -> Option<Party> {
        step.checked_sub(1)
            .and_then(|k| self.moves.get(k))
            .map(|m| m.party)
    }

    /// Steps following a client move, where the server has just received
    /// a message (or the run has ended).
    pub fn checkpoint_steps(&self) -> Vec<usize> {
        (1..=self.steps())
            .filter(|&t| self.party_at(t) == Some(Party::B))
            .collect()
    }

    pub fn is_measurement_free(&self) -> bool {
        self.moves.iter().all(Move::is_isometric)
    }

    pub fn setup_registers(&self) -> Vec<&str> {
        self.setup_a
            .iter()
            .chain(&self.setup_b)
            .map(|r| r.name.as_str())
            .collect()
    }

    pub fn input_registers(&self) -> Vec<&str> {
        self.inputs_a
            .iter()
            .chain(&self.inputs_b)
            .map(|r| r.name.as_str())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.structure(&[]).map(|_| ())
    }

    pub fn communication(&self) -> Result<Communication> {
        Ok(self.structure(&[])?.communication)
    }

    /// Walks the moves, tracking ownership. `reference` lists extra
    /// registers of the input that no party may touch.
    pub fn structure(&self, reference: &[Register]) -> Result<Structure> {
        if self.moves.is_empty() {
            return Err(QpirError::step(0, "protocol has no moves"));
        }
        let mut own = Ownership::default();
        let declare = |own: &mut Ownership, regs: &[Register], side: Side| -> Result<()> {
            for r in regs {
                if r.width == 0 {
                    return Err(QpirError::ZeroWidth(r.name.clone()));
                }
                if own.registers.insert(r.name.clone(), (side, r.width)).is_some() {
                    return Err(QpirError::DuplicateRegister(r.name.clone()));
                }
            }
            Ok(())
        };
        declare(&mut own, &self.inputs_a, Side::A)?;
        declare(&mut own, &self.inputs_b, Side::B)?;
        declare(&mut own, &self.setup_a, Side::A)?;
        declare(&mut own, &self.setup_b, Side::B)?;
        declare(&mut own, reference, Side::Reference)?;
        for g in &self.setup {
            for r in g.registers() {
                if !self.setup_registers().contains(&r) {
                    return Err(QpirError::step(0, format!("setup touches non-setup register {r}")));
                }
            }
        }
        let mut ownership = vec![own.clone()];
        let (mut m_a, mut m_b) = (0, 0);
        for (k, mv) in self.moves.iter().enumerate() {
            let t = k + 1;
            let expected = if k % 2 == 0 { self.first } else { self.first.other() };
            if mv.party != expected {
                return Err(QpirError::step(t, format!("expected a move by {expected}")));
            }
            let (mine, incoming) = match mv.party {
                Party::A => (Side::A, Side::ToA),
                Party::B => (Side::B, Side::ToB),
            };
            for (side, _) in own.registers.values_mut() {
                if *side == incoming {
                    *side = mine;
                }
            }
            for op in &mv.ops {
                op.validate().map_err(|e| QpirError::step(t, e.to_string()))?;
                for r in op.inputs() {
                    match own.side(r) {
                        Some(s) if s == mine => {}
                        Some(s) => {
                            return Err(QpirError::step(
                                t,
                                format!("{} touches register {r} held by {s:?}", mv.party),
                            ))
                        }
                        None => return Err(QpirError::step(t, format!("unknown register {r}"))),
                    }
                }
                let (created, removed) = op.layout_changes();
                for r in removed {
                    own.registers.remove(r);
                }
                for r in created {
                    if own.registers.insert(r.name.clone(), (mine, r.width)).is_some() {
                        return Err(QpirError::step(t, format!("register {} already exists", r.name)));
                    }
                }
            }
            let last = t == self.moves.len();
            if last && !mv.send.is_empty() {
                return Err(QpirError::step(t, "the final move cannot send a message"));
            }
            if !last && mv.send.is_empty() {
                return Err(QpirError::step(t, "empty message"));
            }
            let outgoing = match mv.party {
                Party::A => Side::ToB,
                Party::B => Side::ToA,
            };
            for r in &mv.send {
                match own.registers.get_mut(r) {
                    Some((side, w)) if *side == mine => {
                        *side = outgoing;
                        match mv.party {
                            Party::A => m_a += *w,
                            Party::B => m_b += *w,
                        }
                    }
                    _ => return Err(QpirError::step(t, format!("cannot send register {r}"))),
                }
            }
            ownership.push(own.clone());
        }
        let rounds = self.moves.len() - 1;
        Ok(Structure {
            ownership,
            communication: Communication {
                m_a,
                m_b,
                total: m_a + m_b,
                rounds,
            },
        })
    }

    /// Equivalent protocol without shared setup: the client prepares the
    /// setup state itself and sends the server's share in an initial message.
    pub fn fold_setup_into_messages(&self) -> ProtocolSpec {
        if self.setup_a.is_empty() && self.setup_b.is_empty() {
            return self.clone();
        }
        let all: Vec<Register> = self.setup_a.iter().chain(&self.setup_b).cloned().collect();
        let prep = vec![ChannelOp::allocate(all), ChannelOp::circuit(self.setup.clone())];
        let send_a: Vec<String> = self.setup_a.iter().map(|r| r.name.clone()).collect();
        let mut moves = self.moves.clone();
        let first = match self.first {
            Party::A => {
                moves.insert(
                    0,
                    Move {
                        party: Party::B,
                        ops: prep,
                        send: send_a,
                    },
                );
                Party::B
            }
            Party::B => {
                let m = &mut moves[0];
                let mut ops = prep;
                ops.append(&mut m.ops);
                m.ops = ops;
                m.send.extend(send_a);
                Party::B
            }
        };
        ProtocolSpec {
            name: format!("{}+folded", self.name),
            first,
            inputs_a: self.inputs_a.clone(),
            inputs_b: self.inputs_b.clone(),
            setup_a: vec![],
            setup_b: vec![],
            setup: vec![],
            moves,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn from_json(text: &str) -> Result<ProtocolSpec> {
        let spec: ProtocolSpec =
            serde_json::from_str(text).map_err(|e| QpirError::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}
