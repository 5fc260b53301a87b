//! The fixed test-input set over which speciousness and privacy are
//! quantified.
//!
//! Per basis database `x`:
//! - every classical index `i`,
//! - the uniform superposition over `i`,
//! - the index maximally entangled with a reference `ref`,
//! - `i = 1` next to a maximally mixed `ref` (same server marginal as the
//!   entangled input).
//!
//! With `full` set, the database itself is superposed (alone, or entangled
//! with `ref.db`) for every classical index.

use serde::{Deserialize, Serialize};

use crate::error::{QpirError, Result};
use crate::protocols::{db_from_label, QpirInstance};
use crate::quantum::layout::RegisterLayout;
use crate::quantum::linalg::{C64, ONE, ZERO};
use crate::quantum::state::{Ensemble, PureState};

pub const INDEX_REFERENCE: &str = "ref";
pub const DB_REFERENCE: &str = "ref.db";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSet {
    pub classical: bool,
    pub superposed_index: bool,
    pub entangled_index: bool,
    pub full: bool,
}

impl InputSet {
    pub fn anchored() -> Self {
        InputSet {
            classical: true,
            superposed_index: true,
            entangled_index: true,
            full: false,
        }
    }

    pub fn full() -> Self {
        InputSet {
            full: true,
            ..Self::anchored()
        }
    }

    pub fn classical_only() -> Self {
        InputSet {
            classical: true,
            superposed_index: false,
            entangled_index: false,
            full: false,
        }
    }
}

/// One input state together with its bookkeeping.
#[derive(Clone, Debug)]
pub struct TestInput {
    pub label: String,
    /// Inputs sharing a group have the same server-side input marginal.
    pub group: String,
    pub state: Ensemble,
    /// Basis database, when the input is anchored.
    pub db: Option<usize>,
    /// Classical index (1-based), when there is one.
    pub index: Option<usize>,
}

impl TestInput {
    pub fn is_anchored(&self) -> bool {
        self.db.is_some()
    }

    pub fn is_pure(&self) -> bool {
        self.state.is_pure_branch()
    }

    pub fn reference_registers(&self) -> Vec<String> {
        [INDEX_REFERENCE, DB_REFERENCE]
            .into_iter()
            .filter(|r| self.state.layout().contains(r))
            .map(str::to_string)
            .collect()
    }
}

fn bits(label: usize, n: usize) -> String {
    db_from_label(label, n)
        .into_iter()
        .map(|b| if b { '1' } else { '0' })
        .collect()
}

/// Builds the input set for an instance with quantum database and index.
pub fn standard_inputs(inst: &QpirInstance, set: &InputSet) -> Result<Vec<TestInput>> {
    let db = inst
        .db_register()
        .ok_or_else(|| QpirError::Unsupported("database is baked into this build".into()))?;
    let idx = inst
        .index_register()
        .ok_or_else(|| QpirError::Unsupported("index is baked into this build".into()))?;
    let n = inst.n;
    let w = inst.index_width();
    let db_layout = RegisterLayout::from_pairs(&[(db, n)])?;
    let idx_layout = RegisterLayout::from_pairs(&[(idx, w)])?;
    let amp = ONE / (n as f64).sqrt();

    let mut out = Vec::new();
    for x in 0..1usize << n {
        let xs = bits(x, n);
        let dbs = PureState::basis(db_layout.clone(), &[(db, x)])?;
        let group = format!("x={xs}");
        if set.classical {
            for i in 1..=n {
                let s = dbs.tensor(&PureState::basis(idx_layout.clone(), &[(idx, i - 1)])?)?;
                out.push(TestInput {
                    label: format!("x={xs},i={i}"),
                    group: group.clone(),
                    state: Ensemble::pure(s),
                    db: Some(x),
                    index: Some(i),
                });
            }
        }
        if set.superposed_index && n > 1 {
            let mut amps = vec![ZERO; 1 << w];
            amps[..n].fill(amp);
            let s = dbs.tensor(&PureState::new(idx_layout.clone(), amps)?)?;
            out.push(TestInput {
                label: format!("x={xs},i=+"),
                group: group.clone(),
                state: Ensemble::pure(s),
                db: Some(x),
                index: None,
            });
        }
        if set.entangled_index && n > 1 {
            let joint = RegisterLayout::from_pairs(&[(idx, w), (INDEX_REFERENCE, w)])?;
            let mut amps = vec![ZERO; 1 << (2 * w)];
            for i in 0..n {
                amps[(i << w) | i] = amp;
            }
            let s = dbs.tensor(&PureState::new(joint.clone(), amps)?)?;
            let rgroup = format!("x={xs}|ref");
            out.push(TestInput {
                label: format!("x={xs},i~ref"),
                group: rgroup.clone(),
                state: Ensemble::pure(s),
                db: Some(x),
                index: None,
            });
            let branches = (0..n)
                .map(|r| {
                    let b = PureState::basis(joint.clone(), &[(idx, 0), (INDEX_REFERENCE, r)])?;
                    Ok((1.0 / n as f64, dbs.tensor(&b)?))
                })
                .collect::<Result<Vec<_>>>()?;
            out.push(TestInput {
                label: format!("x={xs},i=1,ref=mixed"),
                group: rgroup,
                state: Ensemble::new(branches)?,
                db: Some(x),
                index: Some(1),
            });
        }
    }
    if set.full {
        let dim = 1usize << n;
        let a = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
        let superposed = PureState::new(db_layout.clone(), vec![a; dim])?;
        let joint = RegisterLayout::from_pairs(&[(db, n), (DB_REFERENCE, n)])?;
        let mut amps = vec![ZERO; dim * dim];
        for x in 0..dim {
            amps[x * dim + x] = a;
        }
        let entangled = PureState::new(joint, amps)?;
        for i in 1..=n {
            let is = PureState::basis(idx_layout.clone(), &[(idx, i - 1)])?;
            out.push(TestInput {
                label: format!("x=+,i={i}"),
                group: "x=+".into(),
                state: Ensemble::pure(superposed.tensor(&is)?),
                db: None,
                index: Some(i),
            });
            out.push(TestInput {
                label: format!("x~ref,i={i}"),
                group: "x~ref".into(),
                state: Ensemble::pure(entangled.tensor(&is)?),
                db: None,
                index: Some(i),
            });
        }
    }
    Ok(out)
}
