//! Channel operations on named registers and their action on pure branches.

use serde::{Deserialize, Serialize};

use crate::error::{QpirError, Result};
use crate::quantum::density::check_kraus_completeness;
use crate::quantum::gates::{Gate, MatrixData};
use crate::quantum::layout::{IndexSplit, Register, RegisterLayout};
use crate::quantum::linalg::{isometry_defect, CMatrix, C64, STATE_TOL, ZERO};
use crate::quantum::state::{Ensemble, PureState};

/// One operation of a party program.
///
/// `inputs` are consumed and `outputs` created; registers with the same name
/// on both sides are updated in place. Operators map the big-endian
/// concatenation of the inputs to that of the outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChannelOp {
    Circuit {
        gates: Vec<Gate>,
    },
    Isometry {
        inputs: Vec<String>,
        outputs: Vec<Register>,
        matrix: MatrixData,
    },
    KrausSet {
        inputs: Vec<String>,
        outputs: Vec<Register>,
        operators: Vec<MatrixData>,
    },
    Measurement {
        registers: Vec<String>,
        operators: Vec<MatrixData>,
    },
}

impl ChannelOp {
    pub fn circuit(gates: Vec<Gate>) -> Self {
        ChannelOp::Circuit { gates }
    }

    pub fn isometry(inputs: &[&str], outputs: Vec<Register>, matrix: &CMatrix) -> Result<Self> {
        let op = ChannelOp::Isometry {
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            outputs,
            matrix: MatrixData::from_matrix(matrix),
        };
        op.validate()?;
        Ok(op)
    }

    /// Fresh registers in `|0…0⟩`.
    pub fn allocate(registers: Vec<Register>) -> Self {
        let dim = 1usize << registers.iter().map(|r| r.width).sum::<usize>();
        let mut m = CMatrix::zeros(dim, 1);
        m[(0, 0)] = C64::new(1.0, 0.0);
        ChannelOp::Isometry {
            inputs: vec![],
            outputs: registers,
            matrix: MatrixData::from_matrix(&m),
        }
    }

    /// Traces out the listed registers (a Kraus set of basis bras).
    pub fn discard(registers: &[&str], widths: &[usize]) -> Self {
        let dim = 1usize << widths.iter().sum::<usize>();
        let operators = (0..dim)
            .map(|k| {
                let mut m = CMatrix::zeros(1, dim);
                m[(0, k)] = C64::new(1.0, 0.0);
                MatrixData::from_matrix(&m)
            })
            .collect();
        ChannelOp::KrausSet {
            inputs: registers.iter().map(|s| s.to_string()).collect(),
            outputs: vec![],
            operators,
        }
    }

    pub fn kraus(inputs: &[&str], outputs: Vec<Register>, operators: &[CMatrix]) -> Result<Self> {
        let op = ChannelOp::KrausSet {
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            outputs,
            operators: operators.iter().map(MatrixData::from_matrix).collect(),
        };
        op.validate()?;
        Ok(op)
    }

    pub fn measurement(registers: &[&str], operators: &[CMatrix]) -> Result<Self> {
        let op = ChannelOp::Measurement {
            registers: registers.iter().map(|s| s.to_string()).collect(),
            operators: operators.iter().map(MatrixData::from_matrix).collect(),
        };
        op.validate()?;
        Ok(op)
    }

    /// Standard-basis projective measurement of the listed registers.
    pub fn basis_measurement(registers: &[&str], total_width: usize) -> Self {
        let dim = 1usize << total_width;
        let operators = (0..dim)
            .map(|k| {
                let mut m = CMatrix::zeros(dim, dim);
                m[(k, k)] = C64::new(1.0, 0.0);
                MatrixData::from_matrix(&m)
            })
            .collect();
        ChannelOp::Measurement {
            registers: registers.iter().map(|s| s.to_string()).collect(),
            operators,
        }
    }

    /// Registers read by the operation.
    pub fn inputs(&self) -> Vec<&str> {
        match self {
            ChannelOp::Circuit { gates } => {
                let mut regs: Vec<&str> = Vec::new();
                for g in gates {
                    for r in g.registers() {
                        if !regs.contains(&r) {
                            regs.push(r);
                        }
                    }
                }
                regs
            }
            ChannelOp::Isometry { inputs, .. } | ChannelOp::KrausSet { inputs, .. } => {
                inputs.iter().map(String::as_str).collect()
            }
            ChannelOp::Measurement { registers, .. } => registers.iter().map(String::as_str).collect(),
        }
    }

    /// Registers present after the operation that it wrote.
    pub fn outputs(&self) -> Vec<&str> {
        match self {
            ChannelOp::Isometry { outputs, .. } | ChannelOp::KrausSet { outputs, .. } => {
                outputs.iter().map(|r| r.name.as_str()).collect()
            }
            _ => self.inputs(),
        }
    }

    /// Registers the operation creates or removes, as (created, removed).
    pub fn layout_changes(&self) -> (Vec<&Register>, Vec<&str>) {
        match self {
            ChannelOp::Isometry { inputs, outputs, .. } | ChannelOp::KrausSet { inputs, outputs, .. } => {
                let created = outputs.iter().filter(|r| !inputs.contains(&r.name)).collect();
                let removed = inputs
                    .iter()
                    .filter(|i| !outputs.iter().any(|r| &r.name == *i))
                    .map(String::as_str)
                    .collect();
                (created, removed)
            }
            _ => (vec![], vec![]),
        }
    }

    /// True when the operation maps pure states to pure states.
    pub fn is_isometric(&self) -> bool {
        match self {
            ChannelOp::Circuit { .. } | ChannelOp::Isometry { .. } => true,
            ChannelOp::KrausSet { operators, .. } | ChannelOp::Measurement { operators, .. } => {
                operators.len() == 1
            }
        }
    }

    /// Checks the completeness relation of the operator set.
    pub fn validate(&self) -> Result<()> {
        let shape = |m: &CMatrix, rows: usize, cols: usize| {
            if m.nrows() != rows || m.ncols() != cols {
                Err(QpirError::InvalidOperator(format!(
                    "operator is {}x{}, expected {rows}x{cols}",
                    m.nrows(),
                    m.ncols()
                )))
            } else {
                Ok(())
            }
        };
        match self {
            ChannelOp::Circuit { .. } => Ok(()),
            ChannelOp::Isometry { outputs, matrix, .. } => {
                let m = matrix.to_matrix()?;
                shape(&m, 1 << width_sum(outputs), m.ncols())?;
                if !m.ncols().is_power_of_two() {
                    return Err(QpirError::InvalidOperator("input dimension is not 2^k".into()));
                }
                let d = isometry_defect(&m);
                if d > STATE_TOL {
                    return Err(QpirError::InvalidOperator(format!(
                        "V†V deviates from identity by {d:e}"
                    )));
                }
                Ok(())
            }
            ChannelOp::KrausSet { outputs, operators, .. } => {
                let ops = to_matrices(operators)?;
                let in_dim = ops.first().map_or(1, |m| m.ncols());
                for m in &ops {
                    shape(m, 1 << width_sum(outputs), in_dim)?;
                }
                check_kraus_completeness(&ops, in_dim)
            }
            ChannelOp::Measurement { operators, .. } => {
                let ops = to_matrices(operators)?;
                let dim = ops.first().map_or(1, |m| m.ncols());
                for m in &ops {
                    shape(m, dim, dim)?;
                }
                check_kraus_completeness(&ops, dim)
            }
        }
    }

    /// Inverse of an isometric operation that neither creates nor removes
    /// registers.
    pub fn inverse(&self) -> Result<ChannelOp> {
        match self {
            ChannelOp::Circuit { gates } => Ok(ChannelOp::Circuit {
                gates: gates.iter().rev().map(Gate::inverse).collect(),
            }),
            ChannelOp::Isometry { inputs, outputs, matrix }
                if outputs.iter().map(|r| &r.name).eq(inputs.iter()) =>
            {
                Ok(ChannelOp::Isometry {
                    inputs: inputs.clone(),
                    outputs: outputs.clone(),
                    matrix: MatrixData::from_matrix(&matrix.to_matrix()?.adjoint()),
                })
            }
            _ => Err(QpirError::Unsupported(
                "only circuits and square in-place isometries can be inverted".into(),
            )),
        }
    }
}

fn width_sum(regs: &[Register]) -> usize {
    regs.iter().map(|r| r.width).sum()
}

fn to_matrices(ops: &[MatrixData]) -> Result<Vec<CMatrix>> {
    ops.iter().map(MatrixData::to_matrix).collect()
}

/// Applies `k` (out × in) to the `inputs` of `state`; the result is left
/// unnormalized. In-place when the output registers equal the inputs,
/// otherwise the outputs are appended after the untouched registers.
pub(crate) fn apply_map(
    state: &PureState,
    inputs: &[&str],
    outputs: &[Register],
    k: &CMatrix,
) -> Result<PureState> {
    let layout = state.layout();
    let in_width = layout.width_of(inputs)?;
    if k.ncols() != 1 << in_width || k.nrows() != 1 << width_sum(outputs) {
        return Err(QpirError::DimensionMismatch {
            expected: 1 << in_width,
            found: k.ncols(),
        });
    }
    let same = outputs.len() == inputs.len()
        && outputs
            .iter()
            .zip(inputs)
            .all(|(o, i)| o.name == *i && layout.width(i).ok() == Some(o.width));
    if same {
        let mut out = state.clone();
        out.apply_operator(inputs, k)?;
        return Ok(out);
    }
    let rest = layout.complement(inputs);
    let mut regs: Vec<Register> = rest
        .iter()
        .map(|n| layout.register(n).cloned())
        .collect::<Result<_>>()?;
    regs.extend(outputs.iter().cloned());
    let new_layout = RegisterLayout::new(regs)?;
    let out_dim = k.nrows();
    let split = IndexSplit::new(layout, inputs, &rest)?;
    let mut amps = vec![ZERO; new_layout.dim()];
    for (idx, a) in state.amplitudes().iter().enumerate() {
        if *a == ZERO {
            continue;
        }
        let (i, r) = split.split(idx);
        let base = r * out_dim;
        for o in 0..out_dim {
            let v = k[(o, i)];
            if v != ZERO {
                amps[base + o] += v * a;
            }
        }
    }
    Ok(PureState::from_trusted(new_layout, amps))
}

/// Result of applying an operation to a single pure branch.
fn apply_to_branch(state: &PureState, op: &ChannelOp) -> Result<Vec<(f64, PureState)>> {
    match op {
        ChannelOp::Circuit { gates } => {
            let mut s = state.clone();
            s.apply_gates(gates)?;
            Ok(vec![(1.0, s)])
        }
        ChannelOp::Isometry { inputs, outputs, matrix } => {
            let inputs: Vec<&str> = inputs.iter().map(String::as_str).collect();
            let s = apply_map(state, &inputs, outputs, &matrix.to_matrix()?)?;
            let norm = s.norm_sqr();
            if (norm - 1.0).abs() > STATE_TOL {
                return Err(QpirError::NotNormalized(norm));
            }
            Ok(vec![(1.0, s)])
        }
        ChannelOp::KrausSet { inputs, outputs, operators } => {
            let inputs: Vec<&str> = inputs.iter().map(String::as_str).collect();
            kraus_branches(state, &inputs, outputs, operators)
        }
        ChannelOp::Measurement { registers, operators } => {
            let regs: Vec<&str> = registers.iter().map(String::as_str).collect();
            let outputs = regs
                .iter()
                .map(|n| state.layout().register(n).cloned())
                .collect::<Result<Vec<_>>>()?;
            kraus_branches(state, &regs, &outputs, operators)
        }
    }
}

fn kraus_branches(
    state: &PureState,
    inputs: &[&str],
    outputs: &[Register],
    operators: &[MatrixData],
) -> Result<Vec<(f64, PureState)>> {
    let mut out = Vec::with_capacity(operators.len());
    let mut total = 0.0;
    for k in operators {
        let s = apply_map(state, inputs, outputs, &k.to_matrix()?)?;
        let p = s.norm_sqr();
        total += p;
        if p > 1e-14 {
            let amps: Vec<C64> = s
                .amplitudes()
                .iter()
                .map(|a| a / p.sqrt())
                .collect();
            out.push((p, PureState::from_trusted(s.layout().clone(), amps)));
        }
    }
    if (total - 1.0).abs() > STATE_TOL {
        return Err(QpirError::NotNormalized(total));
    }
    Ok(out)
}

/// Applies `op` to a pure state. Isometric operations return a single
/// branch; Kraus sets and measurements return one branch per nonzero outcome.
pub fn apply_channel(state: &PureState, op: &ChannelOp) -> Result<Ensemble> {
    Ensemble::new(apply_to_branch(state, op)?)
}

/// Applies `op` branch-wise to an ensemble.
pub fn apply_channel_ensemble(state: &Ensemble, op: &ChannelOp) -> Result<Ensemble> {
    let mut out = Vec::new();
    for (p, s) in state.branches() {
        for (q, t) in apply_to_branch(s, op)? {
            out.push((p * q, t));
        }
    }
    Ensemble::new(out).map(Ensemble::merged)
}
