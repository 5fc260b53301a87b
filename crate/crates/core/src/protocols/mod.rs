//! Concrete protocol builders and output decoding.

pub mod baseline;
pub mod counterexample;
pub mod kerenidis;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{QpirError, Result};
use crate::quantum::layout::RegisterLayout;
use crate::quantum::state::{Ensemble, PureState};
use crate::runtime::execute::ExecutionTranscript;
use crate::runtime::spec::ProtocolSpec;

pub use baseline::{build_baseline, BaselineKind};
pub use counterexample::build_counterexample;
pub use kerenidis::{build as build_kerenidis_with, KerenidisOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    Kerenidis,
    SendDb,
    SendIndex,
    Counterexample,
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtocolKind::Kerenidis => "kerenidis",
            ProtocolKind::SendDb => "send-db",
            ProtocolKind::SendIndex => "send-index",
            ProtocolKind::Counterexample => "counterexample",
        })
    }
}

impl FromStr for ProtocolKind {
    type Err = QpirError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kerenidis" => Ok(ProtocolKind::Kerenidis),
            "send-db" => Ok(ProtocolKind::SendDb),
            "send-index" => Ok(ProtocolKind::SendIndex),
            "counterexample" => Ok(ProtocolKind::Counterexample),
            other => Err(QpirError::InvalidArgument(format!("unknown protocol `{other}`"))),
        }
    }
}

/// Whether the database is an input register or baked into the gates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DatabaseMode {
    Quantum,
    Classical(Vec<bool>),
}

/// Whether the index is an input register or baked into the gates (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexMode {
    Quantum,
    Classical(usize),
}

/// A built protocol with the metadata analyses need.
#[derive(Clone, Debug)]
pub struct QpirInstance {
    pub kind: ProtocolKind,
    pub n: usize,
    pub ell: usize,
    pub cleanup: bool,
    pub spec: ProtocolSpec,
    pub database: DatabaseMode,
    pub index: IndexMode,
    /// Client register holding the retrieved bit at the end.
    pub output: String,
    /// Shared entangled pairs `(server, client, width)`.
    pub setup_pairs: Vec<(String, String, usize)>,
}

/// Big-endian label of a database: qubit `j` holds `DB[j+1]`.
pub fn db_label(db: &[bool]) -> usize {
    db.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

pub fn db_from_label(label: usize, n: usize) -> Vec<bool> {
    (0..n).map(|j| (label >> (n - 1 - j)) & 1 == 1).collect()
}

/// Readout of the output register.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decoded {
    pub bit: bool,
    pub probability: f64,
    pub p_one: f64,
}

/// Standard-basis readout of a single-qubit output register in the final
/// state.
pub fn decode_output(transcript: &ExecutionTranscript, register: &str) -> Result<Decoded> {
    decode_state(transcript.final_state(), register)
}

pub fn decode_state(state: &Ensemble, register: &str) -> Result<Decoded> {
    if !state.layout().contains(register) {
        return Err(QpirError::UnknownRegister(register.to_string()));
    }
    let p = state.distribution(&[register])?;
    let p_one: f64 = p[1..].iter().sum();
    let bit = p_one > 0.5;
    Ok(Decoded {
        bit,
        probability: if bit { p_one } else { 1.0 - p_one },
        p_one,
    })
}

impl QpirInstance {
    pub fn db_register(&self) -> Option<&str> {
        self.spec.inputs_a.first().map(|r| r.name.as_str())
    }

    pub fn index_register(&self) -> Option<&str> {
        self.spec.inputs_b.first().map(|r| r.name.as_str())
    }

    pub fn index_width(&self) -> usize {
        self.spec.inputs_b.first().map_or(0, |r| r.width)
    }

    pub fn has_quantum_database(&self) -> bool {
        self.database == DatabaseMode::Quantum
    }

    /// Input layout `𝒜_0 ⊗ ℬ_0` (possibly empty for fully classical builds).
    pub fn input_layout(&self) -> Result<RegisterLayout> {
        RegisterLayout::new(
            self.spec
                .inputs_a
                .iter()
                .chain(&self.spec.inputs_b)
                .cloned()
                .collect(),
        )
    }

    /// Basis input `|DB⟩|i − 1⟩`. Registers elided by a classical build are
    /// skipped; their baked values must agree with the arguments.
    pub fn input(&self, db: &[bool], i: usize) -> Result<PureState> {
        if db.len() != self.n || i == 0 || i > self.n {
            return Err(QpirError::InvalidArgument(format!(
                "input (|DB| = {}, i = {i}) invalid for n = {}",
                db.len(),
                self.n
            )));
        }
        if let DatabaseMode::Classical(fixed) = &self.database {
            if fixed.as_slice() != db {
                return Err(QpirError::InvalidArgument("database differs from the baked one".into()));
            }
        }
        if let IndexMode::Classical(fixed) = self.index {
            if fixed != i {
                return Err(QpirError::InvalidArgument("index differs from the baked one".into()));
            }
        }
        let mut labels = Vec::new();
        if let Some(d) = self.db_register() {
            labels.push((d, db_label(db)));
        }
        if let Some(x) = self.index_register() {
            labels.push((x, i - 1));
        }
        PureState::basis(self.input_layout()?, &labels)
    }

    /// Index register state `Σ_i c_i |i − 1⟩` from amplitudes over `i = 1..n`.
    pub fn index_state(&self, amplitudes: &[crate::quantum::linalg::C64]) -> Result<PureState> {
        let name = self
            .index_register()
            .ok_or_else(|| QpirError::Unsupported("index is baked into this build".into()))?;
        let mut amps = vec![crate::quantum::linalg::ZERO; 1 << self.index_width()];
        amps[..amplitudes.len()].copy_from_slice(amplitudes);
        PureState::normalized(
            RegisterLayout::from_pairs(&[(name, self.index_width())])?,
            amps,
        )
    }

    /// Database register basis state.
    pub fn db_state(&self, db: &[bool]) -> Result<PureState> {
        let name = self
            .db_register()
            .ok_or_else(|| QpirError::Unsupported("database is baked into this build".into()))?;
        PureState::basis(RegisterLayout::from_pairs(&[(name, self.n)])?, &[(name, db_label(db))])
    }

    pub fn decode(&self, transcript: &ExecutionTranscript) -> Result<Decoded> {
        decode_output(transcript, &self.output)
    }

    /// Largest number of qubits alive at any step.
    pub fn register_bill(&self) -> Result<usize> {
        let s = self.spec.structure(&[])?;
        Ok(s.ownership
            .iter()
            .map(|o| o.registers.values().map(|(_, w)| w).sum::<usize>())
            .max()
            .unwrap_or(0))
    }

    pub fn check_bill(&self, cap: usize) -> Result<()> {
        let bill = self.register_bill()?;
        if bill > cap {
            return Err(QpirError::CapExceeded {
                what: format!("{} (n = {}) register bill", self.spec.name, self.n),
                requested: bill,
                cap,
            });
        }
        Ok(())
    }
}

/// Builds the named protocol with quantum database and index registers.
pub fn build(kind: ProtocolKind, n: usize, cleanup: bool) -> Result<QpirInstance> {
    match kind {
        ProtocolKind::Kerenidis => build_kerenidis(n, cleanup),
        ProtocolKind::SendDb => build_baseline(BaselineKind::SendDb, n),
        ProtocolKind::SendIndex => build_baseline(BaselineKind::SendIndex, n),
        ProtocolKind::Counterexample => build_counterexample(n),
    }
}

pub fn build_kerenidis(n: usize, cleanup: bool) -> Result<QpirInstance> {
    kerenidis::build(&KerenidisOptions::coherent(n, cleanup))
}
