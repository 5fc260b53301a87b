//! Pure states over register layouts, finite ensembles of them, and the
//! reductions used everywhere else (partial trace, bipartite reshaping).

use crate::error::{QpirError, Result};
use crate::quantum::density::{DensityOperator, ReducedState};
use crate::quantum::gates::Gate;
use crate::quantum::layout::{max_reduced_qubits, IndexSplit, Register, RegisterLayout};
use crate::quantum::linalg::{CMatrix, C64, STATE_TOL, ZERO};

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    layout: RegisterLayout,
    amplitudes: Vec<C64>,
}

impl PureState {
    /// Validates length and unit norm (tolerance 1e-10).
    pub fn new(layout: RegisterLayout, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != layout.dim() {
            return Err(QpirError::DimensionMismatch {
                expected: layout.dim(),
                found: amplitudes.len(),
            });
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(QpirError::NotNormalized(norm));
        }
        Ok(PureState { layout, amplitudes })
    }

    /// Rescales an unnormalized vector.
    pub fn normalized(layout: RegisterLayout, mut amplitudes: Vec<C64>) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm <= 1e-300 {
            return Err(QpirError::NotNormalized(norm));
        }
        let s = 1.0 / norm.sqrt();
        amplitudes.iter_mut().for_each(|a| *a *= s);
        PureState::new(layout, amplitudes)
    }

    pub(crate) fn from_trusted(layout: RegisterLayout, amplitudes: Vec<C64>) -> Self {
        debug_assert_eq!(amplitudes.len(), layout.dim());
        PureState { layout, amplitudes }
    }

    /// Computational basis state with the given register labels (others 0).
    pub fn basis(layout: RegisterLayout, labels: &[(&str, usize)]) -> Result<Self> {
        let idx = layout.index_of(labels)?;
        let mut amps = vec![ZERO; layout.dim()];
        amps[idx] = C64::new(1.0, 0.0);
        Ok(PureState {
            layout,
            amplitudes: amps,
        })
    }

    pub fn zero(layout: RegisterLayout) -> Self {
        PureState::basis(layout, &[]).expect("empty label set is valid")
    }

    /// Single-register state from amplitudes.
    pub fn single(name: &str, amplitudes: Vec<C64>) -> Result<Self> {
        let width = amplitudes.len().trailing_zeros() as usize;
        if !amplitudes.len().is_power_of_two() || width == 0 {
            return Err(QpirError::InvalidArgument(format!(
                "{} amplitudes do not form a qubit register",
                amplitudes.len()
            )));
        }
        PureState::new(
            RegisterLayout::new(vec![Register::new(name, width)])?,
            amplitudes,
        )
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`; layouts must be identical.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.layout != other.layout {
            return Err(QpirError::WidthMismatch(format!(
                "layouts differ: {} vs {}",
                self.layout, other.layout
            )));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Pure-state trace distance `√(1 − |⟨self|other⟩|²)`.
    pub fn distance(&self, other: &PureState) -> Result<f64> {
        self.inner(other)?;
        Ok(crate::quantum::density::pure_distance_unchecked(
            &self.amplitudes,
            &other.amplitudes,
        ))
    }

    /// `self ⊗ other`, with `self`'s registers first.
    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        let layout = self.layout.concat(&other.layout)?;
        let mut amps = Vec::with_capacity(layout.dim());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amps.push(a * b);
            }
        }
        Ok(PureState {
            layout,
            amplitudes: amps,
        })
    }

    /// Same state with registers permuted into `order` (all names required).
    pub fn reorder(&self, order: &[&str]) -> Result<PureState> {
        let layout = self.layout.select(order)?;
        if layout.total_qubits() != self.layout.total_qubits() {
            return Err(QpirError::InvalidArgument(
                "reorder must list every register".into(),
            ));
        }
        let split = IndexSplit::new(&self.layout, order, &[])?;
        let mut amps = vec![ZERO; self.amplitudes.len()];
        for (idx, a) in self.amplitudes.iter().enumerate() {
            amps[split.split(idx).0] = *a;
        }
        Ok(PureState {
            layout: RegisterLayout::with_cap(layout.registers().to_vec(), usize::MAX)?,
            amplitudes: amps,
        })
    }

    /// Same amplitudes with registers renamed (widths unchanged).
    pub fn rename(&self, renames: &[(&str, &str)]) -> Result<PureState> {
        let regs = self
            .layout
            .registers()
            .iter()
            .map(|r| {
                let name = renames
                    .iter()
                    .find(|(from, _)| *from == r.name)
                    .map_or(r.name.clone(), |(_, to)| to.to_string());
                Register::new(name, r.width)
            })
            .collect();
        Ok(PureState {
            layout: RegisterLayout::new(regs)?,
            amplitudes: self.amplitudes.clone(),
        })
    }

    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        let compiled = gate.compile(&self.layout)?;
        compiled.apply(&mut self.amplitudes);
        Ok(())
    }

    pub fn apply_gates(&mut self, gates: &[Gate]) -> Result<()> {
        for g in gates {
            self.apply_gate(g)?;
        }
        Ok(())
    }

    /// Dense operator on the listed registers (first listed most significant).
    pub fn apply_operator(&mut self, registers: &[&str], op: &CMatrix) -> Result<()> {
        let w = self.layout.width_of(registers)?;
        let dim = 1usize << w;
        if op.nrows() != dim || op.ncols() != dim {
            return Err(QpirError::DimensionMismatch {
                expected: dim,
                found: op.ncols(),
            });
        }
        let rest = self.layout.complement(registers);
        let split = IndexSplit::new(&self.layout, registers, &rest)?;
        // index table: global index for (local, rest)
        let mut table = vec![0usize; self.amplitudes.len()];
        for idx in 0..self.amplitudes.len() {
            let (l, r) = split.split(idx);
            table[r * dim + l] = idx;
        }
        let mut buf = vec![ZERO; dim];
        for r in 0..split.cols {
            let row = &table[r * dim..(r + 1) * dim];
            for (l, &g) in row.iter().enumerate() {
                buf[l] = self.amplitudes[g];
            }
            for (out, &g) in row.iter().enumerate() {
                let mut acc = ZERO;
                for (l, v) in buf.iter().enumerate() {
                    acc += op[(out, l)] * v;
                }
                self.amplitudes[g] = acc;
            }
        }
        Ok(())
    }

    /// Amplitude matrix `M[row][col]` for a bipartition of the registers.
    pub fn bipartite(&self, rows: &[&str], cols: &[&str]) -> Result<CMatrix> {
        let split = IndexSplit::new(&self.layout, rows, cols)?;
        let mut m = CMatrix::zeros(split.rows, split.cols);
        for (idx, a) in self.amplitudes.iter().enumerate() {
            if *a != ZERO {
                let (r, c) = split.split(idx);
                m[(r, c)] = *a;
            }
        }
        Ok(m)
    }

    /// Reduced state on `keep` (in that order) as a factor `ρ = F F†`.
    pub fn reduce(&self, keep: &[&str]) -> Result<ReducedState> {
        let rest = self.layout.complement(keep);
        let m = self.bipartite(keep, &rest)?;
        if m.ncols() >= m.nrows() && m.nrows() <= 1 << max_reduced_qubits() {
            return Ok(ReducedState::Dense(&m * m.adjoint()));
        }
        Ok(ReducedState::Factor(m).compact())
    }

    /// Gram-matrix partial trace onto `keep`, never materializing the
    /// global density operator.
    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityOperator> {
        let w = self.layout.width_of(keep)?;
        let cap = max_reduced_qubits();
        if w > cap {
            return Err(QpirError::CapExceeded {
                what: format!("reduced operator on {keep:?}"),
                requested: w,
                cap,
            });
        }
        let rest = self.layout.complement(keep);
        let m = self.bipartite(keep, &rest)?;
        Ok(DensityOperator::from_trusted(&m * m.adjoint()))
    }

    /// Probability distribution of a register's standard-basis readout.
    pub fn register_distribution(&self, name: &str) -> Result<Vec<f64>> {
        let w = self.layout.width(name)?;
        let mut p = vec![0.0; 1 << w];
        for (idx, a) in self.amplitudes.iter().enumerate() {
            p[self.layout.extract(idx, name)?] += a.norm_sqr();
        }
        Ok(p)
    }

    /// Serializes to the fixture binary form: the layout description as
    /// `u32 count, then (u32 name_len, name bytes, u32 width)` per register,
    /// followed by little-endian f64 `(re, im)` pairs.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let regs = self.layout.registers();
        out.extend_from_slice(&(regs.len() as u32).to_le_bytes());
        for r in regs {
            out.extend_from_slice(&(r.name.len() as u32).to_le_bytes());
            out.extend_from_slice(r.name.as_bytes());
            out.extend_from_slice(&(r.width as u32).to_le_bytes());
        }
        for a in &self.amplitudes {
            out.extend_from_slice(&a.re.to_le_bytes());
            out.extend_from_slice(&a.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = bytes;
        let mut take = |n: usize| -> Result<&[u8]> {
            if cur.len() < n {
                return Err(QpirError::Parse("truncated state fixture".into()));
            }
            let (head, tail) = cur.split_at(n);
            cur = tail;
            Ok(head)
        };
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize;
        let count = u32_at(take(4)?);
        let mut regs = Vec::with_capacity(count);
        for _ in 0..count {
            let len = u32_at(take(4)?);
            let name = String::from_utf8(take(len)?.to_vec())
                .map_err(|_| QpirError::Parse("register name is not UTF-8".into()))?;
            let width = u32_at(take(4)?);
            regs.push(Register::new(name, width));
        }
        let layout = RegisterLayout::new(regs)?;
        let mut amps = Vec::with_capacity(layout.dim());
        for _ in 0..layout.dim() {
            let re = f64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
            amps.push(C64::new(re, im));
        }
        if !fixture_len_matches(bytes, &layout) {
            return Err(QpirError::Parse("trailing bytes in state fixture".into()));
        }
        PureState::new(layout, amps)
    }
}

fn fixture_len_matches(bytes: &[u8], layout: &RegisterLayout) -> bool {
    let header: usize = 4 + layout
        .registers()
        .iter()
        .map(|r| 8 + r.name.len())
        .sum::<usize>();
    bytes.len() == header + 16 * layout.dim()
}

/// A finite ensemble `Σ p_k |ψ_k⟩⟨ψ_k|` of pure branches on one layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    layout: RegisterLayout,
    branches: Vec<(f64, PureState)>,
}

impl Ensemble {
    pub fn new(branches: Vec<(f64, PureState)>) -> Result<Self> {
        let layout = branches
            .first()
            .map(|(_, s)| s.layout.clone())
            .ok_or_else(|| QpirError::InvalidArgument("empty ensemble".into()))?;
        let total: f64 = branches.iter().map(|(p, _)| p).sum();
        if (total - 1.0).abs() > STATE_TOL || branches.iter().any(|(p, _)| *p < 0.0) {
            return Err(QpirError::InvalidArgument(format!(
                "ensemble weights sum to {total}"
            )));
        }
        if branches.iter().any(|(_, s)| s.layout != layout) {
            return Err(QpirError::WidthMismatch("ensemble branches differ in layout".into()));
        }
        Ok(Ensemble { layout, branches })
    }

    pub fn pure(state: PureState) -> Self {
        Ensemble {
            layout: state.layout.clone(),
            branches: vec![(1.0, state)],
        }
    }

    /// Eigen-ensemble of a density operator on `layout`.
    pub fn from_density(layout: RegisterLayout, rho: &DensityOperator) -> Result<Self> {
        if rho.dim() != layout.dim() {
            return Err(QpirError::DimensionMismatch {
                expected: layout.dim(),
                found: rho.dim(),
            });
        }
        let (vals, vecs) = rho.eigen();
        let total: f64 = vals.iter().filter(|&&v| v > 1e-14).sum();
        let branches = (0..vals.len())
            .rev()
            .filter(|&k| vals[k] > 1e-14)
            .map(|k| {
                let amps = vecs.column(k).iter().copied().collect();
                Ok((vals[k] / total, PureState::normalized(layout.clone(), amps)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ensemble::new(branches)
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn branches(&self) -> &[(f64, PureState)] {
        &self.branches
    }

    pub fn into_branches(self) -> Vec<(f64, PureState)> {
        self.branches
    }

    /// `ρ ⊗ |φ⟩⟨φ|`, branch by branch.
    pub fn tensor_pure(&self, other: &PureState) -> Result<Ensemble> {
        let branches = self
            .branches
            .iter()
            .map(|(p, s)| Ok((*p, s.tensor(other)?)))
            .collect::<Result<Vec<_>>>()?;
        Ensemble::new(branches)
    }

    pub fn is_pure_branch(&self) -> bool {
        self.branches.len() == 1
    }

    pub fn reduce(&self, keep: &[&str]) -> Result<ReducedState> {
        if let [(_, s)] = self.branches.as_slice() {
            return s.reduce(keep);
        }
        let rest = self.layout.complement(keep);
        let mats = self
            .branches
            .iter()
            .map(|(p, s)| Ok(s.bipartite(keep, &rest)? * C64::new(p.sqrt(), 0.0)))
            .collect::<Result<Vec<_>>>()?;
        let rows = mats[0].nrows();
        let cols: usize = mats.iter().map(|m| m.ncols()).sum();
        if cols >= rows && rows <= 1 << max_reduced_qubits() {
            let mut acc = CMatrix::zeros(rows, rows);
            for m in &mats {
                acc += m * m.adjoint();
            }
            return Ok(ReducedState::Dense(acc));
        }
        let mut f = CMatrix::zeros(rows, cols);
        let mut at = 0;
        for m in &mats {
            f.columns_mut(at, m.ncols()).copy_from(m);
            at += m.ncols();
        }
        Ok(ReducedState::Factor(f).compact())
    }

    pub fn partial_trace(&self, keep: &[&str]) -> Result<DensityOperator> {
        let w = self.layout.width_of(keep)?;
        let cap = max_reduced_qubits();
        if w > cap {
            return Err(QpirError::CapExceeded {
                what: format!("reduced operator on {keep:?}"),
                requested: w,
                cap,
            });
        }
        let mut acc: Option<CMatrix> = None;
        for (p, s) in &self.branches {
            let r = s.partial_trace(keep)?.into_matrix() * C64::new(*p, 0.0);
            acc = Some(match acc {
                Some(a) => a + r,
                None => r,
            });
        }
        Ok(DensityOperator::from_trusted(acc.expect("non-empty ensemble")))
    }

    /// Joint standard-basis readout distribution of `registers`, labels
    /// concatenated big-endian in the given order.
    pub fn distribution(&self, registers: &[&str]) -> Result<Vec<f64>> {
        let width = self.layout.width_of(registers)?;
        let rest = self.layout.complement(registers);
        let split = IndexSplit::new(&self.layout, registers, &rest)?;
        let mut p = vec![0.0; 1 << width];
        for (w, s) in &self.branches {
            for (idx, a) in s.amplitudes.iter().enumerate() {
                p[split.split(idx).0] += w * a.norm_sqr();
            }
        }
        Ok(p)
    }

    /// Full density operator (cap-checked).
    pub fn density(&self) -> Result<DensityOperator> {
        let names = self.layout.names();
        self.partial_trace(&names)
    }

    /// Merges branches that are equal up to global phase.
    pub fn merged(self) -> Ensemble {
        let mut out: Vec<(f64, PureState)> = Vec::new();
        for (p, s) in self.branches {
            if p <= 1e-15 {
                continue;
            }
            match out
                .iter_mut()
                .find(|(_, t)| t.inner(&s).is_ok_and(|o| o.norm_sqr() > 1.0 - 1e-12))
            {
                Some(entry) => entry.0 += p,
                None => out.push((p, s)),
            }
        }
        Ensemble {
            layout: self.layout,
            branches: out,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn bell() -> PureState {
        let l = RegisterLayout::from_pairs(&[("A", 1), ("B", 1)]).unwrap();
        PureState::new(l, vec![c(FRAC_1_SQRT_2), c(0.0), c(0.0), c(FRAC_1_SQRT_2)]).unwrap()
    }

    #[test]
    fn rejects_unnormalized() {
        let l = RegisterLayout::from_pairs(&[("A", 1)]).unwrap();
        assert!(matches!(
            PureState::new(l, vec![c(1.0), c(1.0)]),
            Err(QpirError::NotNormalized(_))
        ));
    }

    #[test]
    fn product_state_reduces_to_pure() {
        let zero = PureState::single("A", vec![c(1.0), c(0.0)]).unwrap();
        let plus = PureState::single("B", vec![c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)]).unwrap();
        let rho = zero.tensor(&plus).unwrap().partial_trace(&["A"]).unwrap();
        let want = DensityOperator::from_pure(&[c(1.0), c(0.0)]).unwrap();
        assert!(crate::quantum::density::trace_distance(&rho, &want).unwrap() < 1e-12);
    }

    #[test]
    fn bell_marginals_are_maximally_mixed() {
        let mm = DensityOperator::maximally_mixed(2);
        for keep in ["A", "B"] {
            let rho = bell().partial_trace(&[keep]).unwrap();
            assert!(crate::quantum::density::trace_distance(&rho, &mm).unwrap() < 1e-12);
        }
    }

    #[test]
    fn reduced_cap_is_enforced() {
        let l = RegisterLayout::from_pairs(&[("A", 13), ("B", 1)]).unwrap();
        let s = PureState::zero(l);
        assert!(matches!(
            s.partial_trace(&["A"]),
            Err(QpirError::CapExceeded { requested: 13, .. })
        ));
    }

    #[test]
    fn reorder_then_bipartite_is_consistent() {
        let l = RegisterLayout::from_pairs(&[("a", 1), ("b", 2)]).unwrap();
        let amps: Vec<C64> = (0..8).map(|k| C64::new(k as f64, 1.0)).collect();
        let s = PureState::normalized(l, amps).unwrap();
        let r = s.reorder(&["b", "a"]).unwrap();
        let m1 = s.bipartite(&["b"], &["a"]).unwrap();
        let m2 = r.bipartite(&["b"], &["a"]).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn binary_fixture_roundtrip() {
        let s = bell();
        let bytes = s.to_bytes();
        assert_eq!(PureState::from_bytes(&bytes).unwrap(), s);
        assert!(PureState::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn apply_operator_matches_gate() {
        let mut a = bell();
        let mut b = bell();
        a.apply_gate(&Gate::h(crate::quantum::gates::Qubit::new("B", 0)))
            .unwrap();
        let h = CMatrix::from_row_slice(
            2,
            2,
            &[c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2), c(-FRAC_1_SQRT_2)],
        );
        b.apply_operator(&["B"], &h).unwrap();
        assert!(a.distance(&b).unwrap() < 1e-12);
    }
}
