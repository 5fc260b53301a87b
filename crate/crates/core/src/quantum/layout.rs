//! Named multi-register qubit layouts.
//!
//! Basis convention: the amplitude index of a basis state is the big-endian
//! concatenation of the per-register labels in declaration order, and within
//! a register qubit `j` is bit `j` of the label counted from the most
//! significant end. Register 0 therefore occupies the highest index bits.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{QpirError, Result};

/// Default hard cap on the qubit count of a global state.
pub const DEFAULT_MAX_QUBITS: usize = 24;
/// Default hard cap on the qubit count of a dense reduced operator.
pub const DEFAULT_MAX_REDUCED_QUBITS: usize = 12;

/// Environment override for [`DEFAULT_MAX_QUBITS`].
pub const MAX_QUBITS_ENV: &str = "QPIR_MAX_QUBITS";
/// Environment override for [`DEFAULT_MAX_REDUCED_QUBITS`].
pub const MAX_REDUCED_QUBITS_ENV: &str = "QPIR_MAX_REDUCED_QUBITS";

fn env_cap(var: &str, default: usize) -> usize {
    std::env::var(var)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(default)
}

/// Qubit cap applied to every global layout (read once from the environment).
pub fn max_qubits() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| env_cap(MAX_QUBITS_ENV, DEFAULT_MAX_QUBITS))
}

/// Qubit cap applied to dense reduced density operators.
pub fn max_reduced_qubits() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| env_cap(MAX_REDUCED_QUBITS_ENV, DEFAULT_MAX_REDUCED_QUBITS))
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Register {
    pub name: String,
    pub width: usize,
}

impl Register {
    pub fn new(name: impl Into<String>, width: usize) -> Self {
        Register {
            name: name.into(),
            width,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RegisterLayout {
    registers: Vec<Register>,
    offsets: Vec<usize>,
    total: usize,
}

impl RegisterLayout {
    pub fn new(registers: Vec<Register>) -> Result<Self> {
        Self::with_cap(registers, max_qubits())
    }

    pub fn with_cap(registers: Vec<Register>, cap: usize) -> Result<Self> {
        let mut offsets = Vec::with_capacity(registers.len());
        let mut total = 0;
        for (k, reg) in registers.iter().enumerate() {
            if reg.width == 0 {
                return Err(QpirError::ZeroWidth(reg.name.clone()));
            }
            if registers[..k].iter().any(|r| r.name == reg.name) {
                return Err(QpirError::DuplicateRegister(reg.name.clone()));
            }
            offsets.push(total);
            total += reg.width;
        }
        if total > cap {
            return Err(QpirError::CapExceeded {
                what: format!("layout {}", describe(&registers)),
                requested: total,
                cap,
            });
        }
        Ok(RegisterLayout {
            registers,
            offsets,
            total,
        })
    }

    /// Convenience constructor from `(name, width)` pairs.
    pub fn from_pairs(pairs: &[(&str, usize)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(n, w)| Register::new(n, w)).collect())
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn total_qubits(&self) -> usize {
        self.total
    }

    pub fn dim(&self) -> usize {
        1usize << self.total
    }

    pub fn contains(&self, name: &str) -> bool {
        self.position(name).is_some()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.registers.iter().position(|r| r.name == name)
    }

    pub fn register(&self, name: &str) -> Result<&Register> {
        self.position(name)
            .map(|k| &self.registers[k])
            .ok_or_else(|| QpirError::UnknownRegister(name.to_string()))
    }

    pub fn width(&self, name: &str) -> Result<usize> {
        Ok(self.register(name)?.width)
    }

    /// Global qubit position (0 = most significant) of qubit `bit` of `name`.
    pub fn qubit_position(&self, name: &str, bit: usize) -> Result<usize> {
        let k = self
            .position(name)
            .ok_or_else(|| QpirError::UnknownRegister(name.to_string()))?;
        if bit >= self.registers[k].width {
            return Err(QpirError::WidthMismatch(format!(
                "qubit {bit} out of range for register `{name}` of width {}",
                self.registers[k].width
            )));
        }
        Ok(self.offsets[k] + bit)
    }

    /// Bit mask of qubit `bit` of register `name` inside an amplitude index.
    pub fn qubit_mask(&self, name: &str, bit: usize) -> Result<usize> {
        let pos = self.qubit_position(name, bit)?;
        Ok(1usize << (self.total - 1 - pos))
    }

    /// Label of register `name` within the global basis index `index`.
    pub fn extract(&self, index: usize, name: &str) -> Result<usize> {
        let k = self
            .position(name)
            .ok_or_else(|| QpirError::UnknownRegister(name.to_string()))?;
        let w = self.registers[k].width;
        let shift = self.total - self.offsets[k] - w;
        Ok((index >> shift) & ((1usize << w) - 1))
    }

    /// Global index for per-register labels (missing registers are 0).
    pub fn index_of(&self, labels: &[(&str, usize)]) -> Result<usize> {
        let mut index = 0usize;
        for &(name, value) in labels {
            let k = self
                .position(name)
                .ok_or_else(|| QpirError::UnknownRegister(name.to_string()))?;
            let w = self.registers[k].width;
            if value >> w != 0 {
                return Err(QpirError::WidthMismatch(format!(
                    "label {value} does not fit register `{name}` of width {w}"
                )));
            }
            let shift = self.total - self.offsets[k] - w;
            index |= value << shift;
        }
        Ok(index)
    }

    /// Concatenation of two layouts (self first).
    pub fn concat(&self, other: &RegisterLayout) -> Result<RegisterLayout> {
        let mut regs = self.registers.clone();
        regs.extend(other.registers.iter().cloned());
        RegisterLayout::new(regs)
    }

    /// Sub-layout with the named registers, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<RegisterLayout> {
        let regs = names
            .iter()
            .map(|n| self.register(n).cloned())
            .collect::<Result<Vec<_>>>()?;
        RegisterLayout::with_cap(regs, usize::MAX)
    }

    /// Register names in declaration order.
    pub fn names(&self) -> Vec<&str> {
        self.registers.iter().map(|r| r.name.as_str()).collect()
    }

    /// Names not in `names`, in declaration order.
    pub fn complement(&self, names: &[&str]) -> Vec<&str> {
        self.registers
            .iter()
            .map(|r| r.name.as_str())
            .filter(|n| !names.contains(n))
            .collect()
    }

    /// Sum of widths of the named registers.
    pub fn width_of(&self, names: &[&str]) -> Result<usize> {
        names.iter().map(|n| self.width(n)).sum()
    }
}

fn describe(regs: &[Register]) -> String {
    let parts: Vec<String> = regs.iter().map(|r| format!("{}:{}", r.name, r.width)).collect();
    format!("[{}]", parts.join(", "))
}

impl fmt::Display for RegisterLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&describe(&self.registers))
    }
}

/// Splits every global index into (row, column) indices for a bipartition
/// of the layout. Row registers and column registers are taken in the
/// caller's order.
pub(crate) struct IndexSplit {
    // For every byte-sized chunk of the global index, contribution tables.
    chunks: Vec<(usize, Vec<usize>, Vec<usize>)>,
    pub rows: usize,
    pub cols: usize,
}

impl IndexSplit {
    pub fn new(layout: &RegisterLayout, rows: &[&str], cols: &[&str]) -> Result<Self> {
        let total = layout.total_qubits();
        let mut seen = vec![false; layout.registers().len()];
        // destination (is_row, bit weight) for every global qubit position
        let mut dest = vec![(false, 0usize); total];
        let mut place = |names: &[&str], is_row: bool| -> Result<usize> {
            let width = names
                .iter()
                .map(|n| layout.width(n))
                .sum::<Result<usize>>()?;
            let mut cursor = 0;
            for name in names {
                let k = layout
                    .position(name)
                    .ok_or_else(|| QpirError::UnknownRegister(name.to_string()))?;
                if seen[k] {
                    return Err(QpirError::DuplicateRegister(name.to_string()));
                }
                seen[k] = true;
                let w = layout.registers()[k].width;
                for b in 0..w {
                    let pos = layout.qubit_position(name, b)?;
                    dest[pos] = (is_row, 1usize << (width - 1 - (cursor + b)));
                }
                cursor += w;
            }
            Ok(width)
        };
        let row_w = place(rows, true)?;
        let col_w = place(cols, false)?;
        if row_w + col_w != total {
            return Err(QpirError::InvalidArgument(
                "bipartition must cover every register of the layout".into(),
            ));
        }
        let mut chunks = Vec::new();
        let mut pos_lo = 0;
        while pos_lo < total {
            // chunk covers global index bits [shift, shift + len)
            let len = (total - pos_lo).min(8);
            let shift = pos_lo;
            let mut row_tab = vec![0usize; 1 << len];
            let mut col_tab = vec![0usize; 1 << len];
            for v in 0..(1usize << len) {
                for b in 0..len {
                    if v >> b & 1 == 1 {
                        let index_bit = shift + b;
                        let pos = total - 1 - index_bit;
                        let (is_row, weight) = dest[pos];
                        if is_row {
                            row_tab[v] |= weight;
                        } else {
                            col_tab[v] |= weight;
                        }
                    }
                }
            }
            chunks.push((shift, row_tab, col_tab));
            pos_lo += len;
        }
        Ok(IndexSplit {
            chunks,
            rows: 1 << row_w,
            cols: 1 << col_w,
        })
    }

    #[inline]
    pub fn split(&self, index: usize) -> (usize, usize) {
        let mut r = 0;
        let mut c = 0;
        for (shift, row_tab, col_tab) in &self.chunks {
            let v = (index >> shift) & (row_tab.len() - 1);
            r |= row_tab[v];
            c |= col_tab[v];
        }
        (r, c)
    }
}
