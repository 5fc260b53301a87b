//! Named-register gates and their statevector kernels.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{QpirError, Result};
use crate::quantum::layout::RegisterLayout;
use crate::quantum::linalg::{isometry_defect, CMatrix, C64, STATE_TOL, ZERO};

/// A single qubit of a named register, written `reg[bit]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Qubit {
    pub reg: String,
    pub bit: usize,
}

impl Qubit {
    pub fn new(reg: impl Into<String>, bit: usize) -> Self {
        Qubit {
            reg: reg.into(),
            bit,
        }
    }
}

impl fmt::Display for Qubit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.reg, self.bit)
    }
}

fn split_brackets(s: &str) -> Result<(&str, &str)> {
    let open = s
        .rfind('[')
        .ok_or_else(|| QpirError::Parse(format!("expected `reg[..]`, got `{s}`")))?;
    let inner = s[open + 1..]
        .strip_suffix(']')
        .ok_or_else(|| QpirError::Parse(format!("missing `]` in `{s}`")))?;
    Ok((&s[..open], inner))
}

impl FromStr for Qubit {
    type Err = QpirError;
    fn from_str(s: &str) -> Result<Self> {
        let (reg, inner) = split_brackets(s)?;
        let bit = inner
            .parse()
            .map_err(|_| QpirError::Parse(format!("bad qubit index in `{s}`")))?;
        Ok(Qubit::new(reg, bit))
    }
}

/// A contiguous run of qubits of one register, written `reg[start..end]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Slice {
    pub reg: String,
    pub start: usize,
    pub len: usize,
}

impl Slice {
    pub fn new(reg: impl Into<String>, start: usize, len: usize) -> Self {
        Slice {
            reg: reg.into(),
            start,
            len,
        }
    }

    pub fn qubit(&self, k: usize) -> Qubit {
        Qubit::new(self.reg.clone(), self.start + k)
    }

    pub fn qubits(&self) -> impl Iterator<Item = Qubit> + '_ {
        (0..self.len).map(|k| self.qubit(k))
    }
}

impl fmt::Display for Slice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}..{}]", self.reg, self.start, self.start + self.len)
    }
}

impl FromStr for Slice {
    type Err = QpirError;
    fn from_str(s: &str) -> Result<Self> {
        let (reg, inner) = split_brackets(s)?;
        let (a, b) = inner
            .split_once("..")
            .ok_or_else(|| QpirError::Parse(format!("expected `start..end` in `{s}`")))?;
        let start: usize = a
            .parse()
            .map_err(|_| QpirError::Parse(format!("bad slice start in `{s}`")))?;
        let end: usize = b
            .parse()
            .map_err(|_| QpirError::Parse(format!("bad slice end in `{s}`")))?;
        if end < start {
            return Err(QpirError::Parse(format!("empty slice `{s}`")));
        }
        Ok(Slice::new(reg, start, end - start))
    }
}

macro_rules! string_serde {
    ($t:ty) => {
        impl Serialize for $t {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }
        impl<'de> Deserialize<'de> for $t {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(Qubit);
string_serde!(Slice);

/// Control condition: fire when `qubit` reads `value`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Control {
    pub qubit: Qubit,
    pub value: bool,
}

impl Control {
    pub fn on(qubit: Qubit) -> Self {
        Control { qubit, value: true }
    }

    pub fn when(qubit: Qubit, value: bool) -> Self {
        Control { qubit, value }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SingleQubitOp {
    H,
    X,
    Z,
    Ry(f64),
}

impl SingleQubitOp {
    fn matrix(self) -> [[C64; 2]; 2] {
        let r = |x: f64| C64::new(x, 0.0);
        match self {
            SingleQubitOp::H => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                [[r(s), r(s)], [r(s), r(-s)]]
            }
            SingleQubitOp::X => [[r(0.0), r(1.0)], [r(1.0), r(0.0)]],
            SingleQubitOp::Z => [[r(1.0), r(0.0)], [r(0.0), r(-1.0)]],
            SingleQubitOp::Ry(t) => {
                let (s, c) = (t / 2.0).sin_cos();
                [[r(c), r(-s)], [r(s), r(c)]]
            }
        }
    }

    fn inverse(self) -> Self {
        match self {
            SingleQubitOp::Ry(t) => SingleQubitOp::Ry(-t),
            other => other,
        }
    }
}

/// Source of the mask in an inner-product CNOT.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mask {
    /// Classical bit string, e.g. `"0110"`.
    Fixed(String),
    /// Read coherently from qubits of a register.
    Register(Slice),
}

impl Mask {
    pub fn fixed(bits: &[bool]) -> Self {
        Mask::Fixed(bits.iter().map(|&b| if b { '1' } else { '0' }).collect())
    }

    fn len(&self) -> usize {
        match self {
            Mask::Fixed(s) => s.len(),
            Mask::Register(sl) => sl.len,
        }
    }
}

/// Dense complex matrix in a serializable row-major `[re, im]` form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixData(pub Vec<Vec<[f64; 2]>>);

impl MatrixData {
    pub fn from_matrix(m: &CMatrix) -> Self {
        MatrixData(
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
                .collect(),
        )
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let rows = self.0.len();
        let cols = self.0.first().map_or(0, |r| r.len());
        if self.0.iter().any(|r| r.len() != cols) {
            return Err(QpirError::Parse("ragged matrix".into()));
        }
        Ok(CMatrix::from_fn(rows, cols, |i, j| {
            C64::new(self.0[i][j][0], self.0[i][j][1])
        }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "kebab-case")]
pub enum Gate {
    /// Single-qubit gate with optional (possibly negated) controls.
    Single {
        op: SingleQubitOp,
        target: Qubit,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        controls: Vec<Control>,
    },
    /// `|r⟩|q⟩ ↦ |r⟩|q ⊕ (r·mask mod 2)⟩`.
    InnerProductCnot {
        source: Slice,
        mask: Mask,
        target: Qubit,
    },
    Swap {
        a: Qubit,
        b: Qubit,
    },
    /// Dense unitary on the listed qubits (first listed = most significant).
    Unitary {
        qubits: Vec<Qubit>,
        matrix: MatrixData,
    },
}

impl Gate {
    pub fn h(q: Qubit) -> Self {
        Gate::Single {
            op: SingleQubitOp::H,
            target: q,
            controls: vec![],
        }
    }

    pub fn x(q: Qubit) -> Self {
        Gate::Single {
            op: SingleQubitOp::X,
            target: q,
            controls: vec![],
        }
    }

    pub fn z(q: Qubit) -> Self {
        Gate::Single {
            op: SingleQubitOp::Z,
            target: q,
            controls: vec![],
        }
    }

    pub fn cnot(control: Qubit, target: Qubit) -> Self {
        Gate::Single {
            op: SingleQubitOp::X,
            target,
            controls: vec![Control::on(control)],
        }
    }

    pub fn controlled(op: SingleQubitOp, controls: Vec<Control>, target: Qubit) -> Self {
        Gate::Single {
            op,
            target,
            controls,
        }
    }

    pub fn unitary(qubits: Vec<Qubit>, matrix: &CMatrix) -> Self {
        Gate::Unitary {
            qubits,
            matrix: MatrixData::from_matrix(matrix),
        }
    }

    pub fn inverse(&self) -> Gate {
        match self {
            Gate::Single {
                op,
                target,
                controls,
            } => Gate::Single {
                op: op.inverse(),
                target: target.clone(),
                controls: controls.clone(),
            },
            Gate::Unitary { qubits, matrix } => {
                let m = matrix.to_matrix().expect("matrix validated at construction");
                Gate::unitary(qubits.clone(), &m.adjoint())
            }
            other => other.clone(),
        }
    }

    /// Registers the gate touches, in first-mention order.
    pub fn registers<'a>(&'a self) -> Vec<&'a str> {
        let mut out: Vec<&str> = Vec::new();
        let mut push = |r: &'a str| {
            if !out.contains(&r) {
                out.push(r)
            }
        };
        match self {
            Gate::Single {
                target, controls, ..
            } => {
                for c in controls {
                    push(&c.qubit.reg);
                }
                push(&target.reg);
            }
            Gate::InnerProductCnot {
                source,
                mask,
                target,
            } => {
                push(&source.reg);
                if let Mask::Register(m) = mask {
                    push(&m.reg);
                }
                push(&target.reg);
            }
            Gate::Swap { a, b } => {
                push(&a.reg);
                push(&b.reg);
            }
            Gate::Unitary { qubits, .. } => {
                for q in qubits {
                    push(&q.reg);
                }
            }
        }
        out
    }

    /// Resolves register names against a layout.
    pub fn compile(&self, layout: &RegisterLayout) -> Result<CompiledGate> {
        let mask = |q: &Qubit| layout.qubit_mask(&q.reg, q.bit);
        match self {
            Gate::Single {
                op,
                target,
                controls,
            } => {
                let t = mask(target)?;
                let mut cmask = 0;
                let mut cval = 0;
                for c in controls {
                    let m = mask(&c.qubit)?;
                    if m == t || cmask & m != 0 {
                        return Err(QpirError::InvalidOperator(format!(
                            "control {} overlaps another qubit of the gate",
                            c.qubit
                        )));
                    }
                    cmask |= m;
                    if c.value {
                        cval |= m;
                    }
                }
                Ok(CompiledGate::Single {
                    matrix: op.matrix(),
                    target: t,
                    ctrl_mask: cmask,
                    ctrl_val: cval,
                    kind: *op,
                })
            }
            Gate::InnerProductCnot {
                source,
                mask: m,
                target,
            } => {
                if m.len() != source.len {
                    return Err(QpirError::WidthMismatch(format!(
                        "mask length {} differs from source width {}",
                        m.len(),
                        source.len
                    )));
                }
                let t = mask(target)?;
                let src: Vec<usize> = source.qubits().map(|q| mask(&q)).collect::<Result<_>>()?;
                if src.contains(&t) {
                    return Err(QpirError::InvalidOperator("target inside source".into()));
                }
                match m {
                    Mask::Fixed(bits) => {
                        let mut global = 0;
                        for (k, ch) in bits.chars().enumerate() {
                            match ch {
                                '1' => global |= src[k],
                                '0' => {}
                                _ => return Err(QpirError::Parse(format!("bad mask `{bits}`"))),
                            }
                        }
                        Ok(CompiledGate::ParityFlip {
                            pairs: vec![],
                            fixed: global,
                            target: t,
                        })
                    }
                    Mask::Register(sl) => {
                        let pairs = sl
                            .qubits()
                            .zip(&src)
                            .map(|(q, &s)| Ok((s, mask(&q)?)))
                            .collect::<Result<Vec<_>>>()?;
                        if pairs.iter().any(|&(_, d)| d == t) {
                            return Err(QpirError::InvalidOperator("target inside mask".into()));
                        }
                        Ok(CompiledGate::ParityFlip {
                            pairs,
                            fixed: 0,
                            target: t,
                        })
                    }
                }
            }
            Gate::Swap { a, b } => {
                let (ma, mb) = (mask(a)?, mask(b)?);
                if ma == mb {
                    return Err(QpirError::InvalidOperator("swap of a qubit with itself".into()));
                }
                Ok(CompiledGate::Swap { a: ma, b: mb })
            }
            Gate::Unitary { qubits, matrix } => {
                let m = matrix.to_matrix()?;
                let dim = 1usize << qubits.len();
                if m.nrows() != dim || m.ncols() != dim {
                    return Err(QpirError::DimensionMismatch {
                        expected: dim,
                        found: m.nrows(),
                    });
                }
                let defect = isometry_defect(&m);
                if defect > STATE_TOL {
                    return Err(QpirError::InvalidOperator(format!(
                        "matrix is not unitary (deviation {defect:.3e})"
                    )));
                }
                let masks: Vec<usize> = qubits.iter().map(mask).collect::<Result<_>>()?;
                let all = masks.iter().fold(0usize, |acc, &m| acc | m);
                if all.count_ones() as usize != masks.len() {
                    return Err(QpirError::InvalidOperator("repeated qubit in unitary".into()));
                }
                Ok(CompiledGate::Dense {
                    masks,
                    matrix: m,
                })
            }
        }
    }
}

/// A gate resolved to bit masks of a specific layout.
#[derive(Clone, Debug)]
pub enum CompiledGate {
    Single {
        matrix: [[C64; 2]; 2],
        target: usize,
        ctrl_mask: usize,
        ctrl_val: usize,
        kind: SingleQubitOp,
    },
    ParityFlip {
        pairs: Vec<(usize, usize)>,
        fixed: usize,
        target: usize,
    },
    Swap {
        a: usize,
        b: usize,
    },
    Dense {
        masks: Vec<usize>,
        matrix: CMatrix,
    },
}

impl CompiledGate {
    pub fn apply(&self, amps: &mut [C64]) {
        match self {
            CompiledGate::Single {
                matrix,
                target,
                ctrl_mask,
                ctrl_val,
                kind,
            } => {
                let t = *target;
                match kind {
                    SingleQubitOp::X => {
                        for i in 0..amps.len() {
                            if i & t == 0 && i & ctrl_mask == *ctrl_val {
                                amps.swap(i, i | t);
                            }
                        }
                    }
                    SingleQubitOp::Z => {
                        for (i, a) in amps.iter_mut().enumerate() {
                            if i & t != 0 && i & ctrl_mask == *ctrl_val {
                                *a = -*a;
                            }
                        }
                    }
                    _ => {
                        for i in 0..amps.len() {
                            if i & t == 0 && i & ctrl_mask == *ctrl_val {
                                let (a0, a1) = (amps[i], amps[i | t]);
                                amps[i] = matrix[0][0] * a0 + matrix[0][1] * a1;
                                amps[i | t] = matrix[1][0] * a0 + matrix[1][1] * a1;
                            }
                        }
                    }
                }
            }
            CompiledGate::ParityFlip {
                pairs,
                fixed,
                target,
            } => {
                let t = *target;
                for i in 0..amps.len() {
                    if i & t != 0 {
                        continue;
                    }
                    let mut parity = (i & fixed).count_ones() & 1;
                    for &(s, d) in pairs {
                        if i & s != 0 && i & d != 0 {
                            parity ^= 1;
                        }
                    }
                    if parity == 1 {
                        amps.swap(i, i | t);
                    }
                }
            }
            CompiledGate::Swap { a, b } => {
                for i in 0..amps.len() {
                    if i & a != 0 && i & b == 0 {
                        amps.swap(i, (i & !a) | b);
                    }
                }
            }
            CompiledGate::Dense { masks, matrix } => {
                let k = masks.len();
                let all = masks.iter().fold(0usize, |acc, &m| acc | m);
                let sub = 1usize << k;
                // offsets[j]: global bits for local basis state j (first qubit most significant)
                let offsets: Vec<usize> = (0..sub)
                    .map(|j| {
                        (0..k)
                            .filter(|&b| j >> (k - 1 - b) & 1 == 1)
                            .fold(0, |acc, b| acc | masks[b])
                    })
                    .collect();
                let mut buf = vec![ZERO; sub];
                for base in 0..amps.len() {
                    if base & all != 0 {
                        continue;
                    }
                    for (j, off) in offsets.iter().enumerate() {
                        buf[j] = amps[base | off];
                    }
                    for (r, off) in offsets.iter().enumerate() {
                        let mut acc = ZERO;
                        for (c, v) in buf.iter().enumerate() {
                            acc += matrix[(r, c)] * v;
                        }
                        amps[base | off] = acc;
                    }
                }
            }
        }
    }
}

/// All-qubit Hadamard on a register slice.
pub fn hadamards(slice: &Slice) -> Vec<Gate> {
    slice.qubits().map(Gate::h).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qubit_and_slice_strings_roundtrip() {
        let q: Qubit = "R1'[3]".parse().unwrap();
        assert_eq!(q, Qubit::new("R1'", 3));
        assert_eq!(q.to_string(), "R1'[3]");
        let s: Slice = "db[2..4]".parse().unwrap();
        assert_eq!(s, Slice::new("db", 2, 2));
        assert!("db[4..2]".parse::<Slice>().is_err());
        assert!("db".parse::<Qubit>().is_err());
    }

    #[test]
    fn gate_json_form() {
        let g = Gate::InnerProductCnot {
            source: Slice::new("R1", 0, 2),
            mask: Mask::Register(Slice::new("db", 0, 2)),
            target: Qubit::new("Q", 0),
        };
        let text = serde_json::to_string(&g).unwrap();
        assert_eq!(
            text,
            r#"{"gate":"inner-product-cnot","source":"R1[0..2]","mask":{"register":"db[0..2]"},"target":"Q[0]"}"#
        );
        let back: Gate = serde_json::from_str(&text).unwrap();
        assert_eq!(back, g);
    }
}
