//! Threads the global state through a protocol's moves.

use serde::{Deserialize, Serialize};

use crate::error::{QpirError, Result};
use crate::quantum::channel::apply_channel_ensemble;
use crate::quantum::density::ReducedState;
use crate::quantum::layout::{Register, RegisterLayout};
use crate::quantum::state::{Ensemble, PureState};
use crate::runtime::spec::{Communication, Ownership, ProtocolSpec, Side};

/// Which intermediate states a transcript keeps. The final state is
/// always kept.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Retention {
    #[default]
    All,
    FinalOnly,
    Steps(Vec<usize>),
}

impl Retention {
    fn keeps(&self, t: usize, last: usize) -> bool {
        t == last
            || match self {
                Retention::All => true,
                Retention::FinalOnly => false,
                Retention::Steps(s) => s.contains(&t),
            }
    }
}

/// States `ρ_0 … ρ_T` (those retained) with ownership after every step.
#[derive(Clone, Debug)]
pub struct ExecutionTranscript {
    pub protocol: String,
    states: Vec<Option<Ensemble>>,
    pub ownership: Vec<Ownership>,
    pub communication: Communication,
}

impl ExecutionTranscript {
    /// Number of moves `T`.
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn state(&self, t: usize) -> Result<&Ensemble> {
        self.states
            .get(t)
            .and_then(Option::as_ref)
            .ok_or_else(|| QpirError::InvalidArgument(format!("state at step {t} not retained")))
    }

    pub fn final_state(&self) -> &Ensemble {
        self.states
            .last()
            .and_then(Option::as_ref)
            .expect("final state is always retained")
    }

    pub fn retained_steps(&self) -> Vec<usize> {
        (0..self.states.len()).filter(|&t| self.states[t].is_some()).collect()
    }

    /// Registers at step `t` on the given sides, in layout order.
    pub fn registers_on(&self, t: usize, sides: &[Side]) -> Result<Vec<String>> {
        let own = &self.ownership[t];
        let layout = self.state(t)?.layout();
        Ok(layout
            .names()
            .into_iter()
            .filter(|n| own.side(n).is_some_and(|s| sides.contains(&s)))
            .map(str::to_string)
            .collect())
    }

    /// Server-side view at step `t` (owned, in transit, and reference).
    pub fn adversary_view(&self, t: usize) -> Result<ReducedState> {
        let keep = self.registers_on(t, &[Side::A, Side::ToA, Side::ToB, Side::Reference])?;
        let keep: Vec<&str> = keep.iter().map(String::as_str).collect();
        self.state(t)?.reduce(&keep)
    }

    pub fn reduce(&self, t: usize, keep: &[&str]) -> Result<ReducedState> {
        self.state(t)?.reduce(keep)
    }
}

/// Builds the initial branches `input ⊗ setup`.
fn initial_state(spec: &ProtocolSpec, input: &Ensemble) -> Result<(Ensemble, Vec<Register>)> {
    let layout = input.layout();
    for r in spec.inputs_a.iter().chain(&spec.inputs_b) {
        let w = layout.width(&r.name).map_err(|_| {
            QpirError::step(0, format!("input lacks declared register {}", r.name))
        })?;
        if w != r.width {
            return Err(QpirError::step(
                0,
                format!("input register {} has width {w}, declared {}", r.name, r.width),
            ));
        }
    }
    let declared = spec.input_registers();
    let reference: Vec<Register> = layout
        .registers()
        .iter()
        .filter(|r| !declared.contains(&r.name.as_str()))
        .cloned()
        .collect();
    let setup_regs: Vec<Register> = spec.setup_a.iter().chain(&spec.setup_b).cloned().collect();
    if setup_regs.is_empty() {
        return Ok((input.clone(), reference));
    }
    let mut setup = PureState::zero(RegisterLayout::new(setup_regs)?);
    setup
        .apply_gates(&spec.setup)
        .map_err(|e| QpirError::step(0, e.to_string()))?;
    let branches = input
        .branches()
        .iter()
        .map(|(p, s)| Ok((*p, s.tensor(&setup)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok((Ensemble::new(branches)?, reference))
}

/// Executes `spec` on `input`. Registers of `input` beyond the declared
/// inputs form the reference and are never acted on.
pub fn execute(spec: &ProtocolSpec, input: &Ensemble, retention: Retention) -> Result<ExecutionTranscript> {
    let (mut state, reference) = initial_state(spec, input)?;
    let structure = spec.structure(&reference)?;
    let last = spec.steps();
    let mut states = Vec::with_capacity(last + 1);
    states.push(retention.keeps(0, last).then(|| state.clone()));
    for (k, mv) in spec.moves.iter().enumerate() {
        let t = k + 1;
        for op in &mv.ops {
            state = apply_channel_ensemble(&state, op).map_err(|e| QpirError::step(t, e.to_string()))?;
        }
        states.push(retention.keeps(t, last).then(|| state.clone()));
    }
    Ok(ExecutionTranscript {
        protocol: spec.name.clone(),
        states,
        ownership: structure.ownership,
        communication: structure.communication,
    })
}

pub fn execute_pure(spec: &ProtocolSpec, input: &PureState, retention: Retention) -> Result<ExecutionTranscript> {
    execute(spec, &Ensemble::pure(input.clone()), retention)
}
