//! Named operations: inner-product CNOT, Hadamard transform, purification,
//! Uhlmann unitaries and trace-in extraction.

use nalgebra::SVD;

use crate::error::{QpirError, Result};
use crate::quantum::density::DensityOperator;
use crate::quantum::gates::{hadamards, Gate, Mask, Qubit, Slice};
use crate::quantum::layout::{Register, RegisterLayout};
use crate::quantum::linalg::{factored_difference_trace_norm, CMatrix, C64, ZERO};
use crate::quantum::state::PureState;

/// `|r⟩|q⟩ ↦ |r⟩|q ⊕ r·mask⟩`.
pub fn inner_product_cnot(state: &PureState, source: &str, mask: &[bool], target: &str) -> Result<PureState> {
    let layout = state.layout();
    let w = layout.width(source)?;
    if w != mask.len() {
        return Err(QpirError::WidthMismatch(format!(
            "source {source} has width {w} but mask has length {}",
            mask.len()
        )));
    }
    if layout.width(target)? != 1 {
        return Err(QpirError::WidthMismatch(format!("target {target} is not a single qubit")));
    }
    let mut out = state.clone();
    out.apply_gate(&Gate::InnerProductCnot {
        source: Slice::new(source, 0, w),
        mask: Mask::fixed(mask),
        target: Qubit::new(target, 0),
    })?;
    Ok(out)
}

/// `H^{⊗w}` on one register.
pub fn hadamard_transform(state: &PureState, register: &str) -> Result<PureState> {
    let w = state.layout().width(register)?;
    let mut out = state.clone();
    out.apply_gates(&hadamards(&Slice::new(register, 0, w)))?;
    Ok(out)
}

/// Purification `Σ_k √λ_k |e_k⟩_A |k⟩_B` of `ρ` on registers `A` and `B`.
/// `B` has `max(1, ⌈log₂ rank⌉)` qubits.
pub fn purify(rho: &DensityOperator) -> Result<PureState> {
    let dim = rho.dim();
    if !dim.is_power_of_two() || dim < 2 {
        return Err(QpirError::InvalidDensity(format!(
            "dimension {dim} is not a power of two"
        )));
    }
    let (vals, vecs) = rho.eigen();
    let support: Vec<usize> = (0..vals.len()).rev().filter(|&k| vals[k] > 1e-14).collect();
    let rank = support.len().max(1);
    let wb = (rank.next_power_of_two().trailing_zeros() as usize).max(1);
    let db = 1usize << wb;
    let layout = RegisterLayout::new(vec![
        Register::new("A", dim.trailing_zeros() as usize),
        Register::new("B", wb),
    ])?;
    let mut amps = vec![ZERO; dim * db];
    for (b, &k) in support.iter().enumerate() {
        let s = vals[k].sqrt();
        for a in 0..dim {
            amps[a * db + b] = vecs[(a, k)] * s;
        }
    }
    PureState::normalized(layout, amps)
}

/// Unitary `U` on the `b` registers maximizing `|⟨φ|(I ⊗ U)|ψ⟩|`.
///
/// The cross-overlap `K = Φ†Ψ` of the bipartite amplitude matrices has SVD
/// `W S V†`; `U = conj(W V†)` attains `tr S`. Rank-deficient cases are
/// completed by the full SVD basis.
pub fn uhlmann_unitary(phi: &PureState, psi: &PureState, b: &[&str]) -> Result<CMatrix> {
    if phi.layout() != psi.layout() {
        return Err(QpirError::WidthMismatch("Uhlmann inputs differ in layout".into()));
    }
    let a = phi.layout().complement(b);
    let fphi = phi.bipartite(&a, b)?;
    let fpsi = psi.bipartite(&a, b)?;
    let k = fphi.adjoint() * fpsi;
    let svd = SVD::new(k, true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    Ok((u * v_t).map(|z| z.conj()))
}

/// Output of [`trace_in_extraction`].
#[derive(Clone, Debug)]
pub struct TraceIn {
    pub beta: PureState,
    /// `ε = Δ(tr_Y α, |φ⟩⟨φ|)`.
    pub epsilon: f64,
    /// Certified `√ε`.
    pub bound: f64,
    /// `Δ(|α⟩, |φ⟩⊗|β⟩) = √(1 − P₀)`.
    pub achieved: f64,
    pub p0: f64,
}

/// Projects the `phi` registers of `alpha` onto `|φ⟩` and renormalizes.
/// `β` lives on the remaining registers of `alpha`, in their original order.
pub fn trace_in_extraction(alpha: &PureState, phi: &PureState) -> Result<TraceIn> {
    let x: Vec<&str> = phi.layout().names();
    for r in phi.layout().registers() {
        if alpha.layout().width(&r.name)? != r.width {
            return Err(QpirError::WidthMismatch(format!("register {} differs in width", r.name)));
        }
    }
    let y = alpha.layout().complement(&x);
    if y.is_empty() {
        return Err(QpirError::InvalidArgument(
            "trace-in needs at least one register outside phi".into(),
        ));
    }
    let m = alpha.bipartite(&x, &y)?;
    let fphi = CMatrix::from_column_slice(phi.amplitudes().len(), 1, phi.amplitudes());
    let beta_col = fphi.adjoint() * &m;
    let p0: f64 = beta_col.iter().map(|z| z.norm_sqr()).sum();
    if p0 <= 1e-14 {
        return Err(QpirError::ZeroProjection);
    }
    let epsilon = (0.5 * factored_difference_trace_norm(&m, &fphi)).clamp(0.0, 1.0);
    let y_layout = alpha.layout().select(&y)?;
    let amps: Vec<C64> = beta_col.iter().map(|z| z / p0.sqrt()).collect();
    let beta = PureState::normalized(y_layout, amps)?;
    Ok(TraceIn {
        beta,
        epsilon,
        bound: epsilon.sqrt(),
        achieved: (1.0 - p0).max(0.0).sqrt(),
        p0,
    })
}
