//! Density operators and the halved trace distance.
//!
//! Trace distance here is always `Δ(ρ, σ) = ½‖ρ − σ‖₁`. Most numerical
//! libraries return the unhalved trace norm; every bound in this crate
//! (`√(ε(2−ε))`, `ε + 3√(2γ)`, ...) is stated in the halved convention.

use crate::error::{QpirError, Result};
use crate::quantum::linalg::{
    eigh, eigvalsh, factored_difference_trace_norm, hermitian_part, max_abs_diff, nuclear_norm,
    projector, psd_sqrt, real_trace, CMatrix, C64, STATE_TOL,
};

/// Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    matrix: CMatrix,
}

impl DensityOperator {
    /// Validates Hermiticity, positivity and unit trace (tolerance 1e-10).
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, STATE_TOL)
    }

    pub fn with_tolerance(matrix: CMatrix, tol: f64) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(QpirError::InvalidDensity(format!(
                "matrix is {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let herm_dev = max_abs_diff(&matrix, &matrix.adjoint());
        if herm_dev > tol {
            return Err(QpirError::InvalidDensity(format!(
                "not Hermitian (deviation {herm_dev:.3e})"
            )));
        }
        let tr = real_trace(&matrix);
        if (tr - 1.0).abs() > tol {
            return Err(QpirError::InvalidDensity(format!("trace {tr}")));
        }
        let min_eig = eigvalsh(&matrix).into_iter().fold(f64::INFINITY, f64::min);
        if min_eig < -tol {
            return Err(QpirError::InvalidDensity(format!(
                "negative eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(DensityOperator {
            matrix: hermitian_part(&matrix),
        })
    }

    /// Trusted construction for matrices produced by exact operations.
    pub(crate) fn from_trusted(matrix: CMatrix) -> Self {
        DensityOperator {
            matrix: hermitian_part(&matrix),
        }
    }

    /// `|ψ><ψ|` for a normalized vector.
    pub fn from_pure(amplitudes: &[C64]) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(QpirError::NotNormalized(norm));
        }
        Ok(DensityOperator {
            matrix: projector(amplitudes),
        })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityOperator {
            matrix: CMatrix::identity(dim, dim) * C64::new(1.0 / dim as f64, 0.0),
        }
    }

    /// Convex mixture `Σ p_k ρ_k` (weights must sum to 1).
    pub fn mixture(parts: &[(f64, &DensityOperator)]) -> Result<Self> {
        let dim = parts
            .first()
            .map(|(_, r)| r.dim())
            .ok_or_else(|| QpirError::InvalidArgument("empty mixture".into()))?;
        let mut m = CMatrix::zeros(dim, dim);
        for (p, r) in parts {
            if r.dim() != dim {
                return Err(QpirError::DimensionMismatch {
                    expected: dim,
                    found: r.dim(),
                });
            }
            m += &r.matrix * C64::new(*p, 0.0);
        }
        DensityOperator::new(m)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// Eigenvalues ascending with matching eigenvectors as columns.
    pub fn eigen(&self) -> (Vec<f64>, CMatrix) {
        eigh(&self.matrix)
    }

    /// Numerical rank (eigenvalues above `tol`).
    pub fn rank(&self, tol: f64) -> usize {
        eigvalsh(&self.matrix).iter().filter(|&&v| v > tol).count()
    }

    /// `Σ_k K_k ρ K_k†`; the set must satisfy `Σ K†K = I`.
    pub fn apply_kraus(&self, operators: &[CMatrix]) -> Result<DensityOperator> {
        check_kraus_completeness(operators, self.dim())?;
        let out_dim = operators[0].nrows();
        let mut out = CMatrix::zeros(out_dim, out_dim);
        for k in operators {
            out += k * &self.matrix * k.adjoint();
        }
        Ok(DensityOperator::from_trusted(out))
    }

    /// `U ρ U†`.
    pub fn conjugate(&self, unitary: &CMatrix) -> Result<DensityOperator> {
        if unitary.ncols() != self.dim() {
            return Err(QpirError::DimensionMismatch {
                expected: self.dim(),
                found: unitary.ncols(),
            });
        }
        Ok(DensityOperator::from_trusted(
            unitary * &self.matrix * unitary.adjoint(),
        ))
    }

    pub fn tensor(&self, other: &DensityOperator) -> DensityOperator {
        DensityOperator {
            matrix: self.matrix.kronecker(&other.matrix),
        }
    }

    /// `tr(Λρ)` for an operator of matching dimension.
    pub fn expectation(&self, op: &CMatrix) -> f64 {
        (op * &self.matrix).trace().re
    }

    /// Uhlmann fidelity `tr √(√ρ σ √ρ)`.
    pub fn fidelity(&self, other: &DensityOperator) -> Result<f64> {
        self.check_dim(other)?;
        let s = psd_sqrt(&self.matrix);
        let inner = &s * &other.matrix * &s;
        Ok(eigvalsh(&inner).iter().map(|v| v.max(0.0).sqrt()).sum())
    }

    fn check_dim(&self, other: &DensityOperator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(QpirError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }
}

/// `Δ(ρ, σ) = ½ Σ singular values of (ρ − σ)`.
pub fn trace_distance(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    rho.check_dim(sigma)?;
    Ok((0.5 * nuclear_norm(&(&rho.matrix - &sigma.matrix))).clamp(0.0, 1.0))
}

/// Trace distance between pure states, `√(1 − |⟨α|β⟩|²)`.
pub fn pure_trace_distance(alpha: &[C64], beta: &[C64]) -> Result<f64> {
    if alpha.len() != beta.len() {
        return Err(QpirError::DimensionMismatch {
            expected: alpha.len(),
            found: beta.len(),
        });
    }
    Ok(pure_distance_unchecked(alpha, beta))
}

/// `√(1 − |o|²)` with `1 − |o| = ½‖α − e^{−iφ}β‖²`, `φ = arg o`, which avoids
/// cancellation for nearly equal unit vectors.
pub(crate) fn pure_distance_unchecked(alpha: &[C64], beta: &[C64]) -> f64 {
    let overlap: C64 = alpha.iter().zip(beta).map(|(a, b)| a.conj() * b).sum();
    let m = overlap.norm();
    let phase = if m > 0.0 { overlap.conj() / m } else { C64::new(1.0, 0.0) };
    let gap: f64 = 0.5
        * alpha
            .iter()
            .zip(beta)
            .map(|(a, b)| (a - phase * b).norm_sqr())
            .sum::<f64>();
    let gap = gap.clamp(0.0, 1.0);
    (gap * (2.0 - gap)).sqrt().min(1.0)
}

pub(crate) fn check_kraus_completeness(operators: &[CMatrix], in_dim: usize) -> Result<()> {
    let first = operators
        .first()
        .ok_or_else(|| QpirError::InvalidOperator("empty Kraus set".into()))?;
    let out_dim = first.nrows();
    let mut sum = CMatrix::zeros(in_dim, in_dim);
    for k in operators {
        if k.ncols() != in_dim || k.nrows() != out_dim {
            return Err(QpirError::DimensionMismatch {
                expected: in_dim,
                found: k.ncols(),
            });
        }
        sum += k.adjoint() * k;
    }
    let dev = max_abs_diff(&sum, &CMatrix::identity(in_dim, in_dim));
    if dev > STATE_TOL {
        return Err(QpirError::InvalidOperator(format!(
            "Kraus operators not trace preserving (deviation {dev:.3e})"
        )));
    }
    Ok(())
}

/// A reduced state kept either as a dense matrix or as a column factor
/// `F` with `ρ = F F†`. The factor form keeps reductions of large
/// subsystems cheap when the traced-out part is small.
#[derive(Clone, Debug)]
pub enum ReducedState {
    Dense(CMatrix),
    Factor(CMatrix),
}

impl ReducedState {
    pub fn dim(&self) -> usize {
        match self {
            ReducedState::Dense(m) | ReducedState::Factor(m) => m.nrows(),
        }
    }

    fn rank_bound(&self) -> usize {
        match self {
            ReducedState::Dense(m) => m.nrows(),
            ReducedState::Factor(f) => f.ncols(),
        }
    }

    pub fn dense(&self) -> CMatrix {
        match self {
            ReducedState::Dense(m) => m.clone(),
            ReducedState::Factor(f) => f * f.adjoint(),
        }
    }

    pub fn to_density(&self) -> Result<DensityOperator> {
        let bits = self.dim().trailing_zeros() as usize;
        let cap = crate::quantum::layout::max_reduced_qubits();
        if bits > cap {
            return Err(QpirError::CapExceeded {
                what: "dense reduced operator".into(),
                requested: bits,
                cap,
            });
        }
        Ok(DensityOperator::from_trusted(self.dense()))
    }

    pub fn trace(&self) -> f64 {
        match self {
            ReducedState::Dense(m) => real_trace(m),
            ReducedState::Factor(f) => f.iter().map(|z| z.norm_sqr()).sum(),
        }
    }

    /// Drops numerically zero factor columns.
    pub fn compact(self) -> ReducedState {
        match self {
            ReducedState::Factor(f) => {
                let keep: Vec<usize> = (0..f.ncols())
                    .filter(|&c| f.column(c).norm_squared() > 1e-28)
                    .collect();
                if keep.len() == f.ncols() {
                    return ReducedState::Factor(f);
                }
                let mut out = CMatrix::zeros(f.nrows(), keep.len());
                for (dst, &src) in keep.iter().enumerate() {
                    out.set_column(dst, &f.column(src));
                }
                ReducedState::Factor(out)
            }
            dense => dense,
        }
    }

    /// `ρ ⊗ σ` in that register order.
    pub fn tensor(&self, other: &ReducedState) -> ReducedState {
        match (self, other) {
            (ReducedState::Factor(a), ReducedState::Factor(b)) => {
                ReducedState::Factor(a.kronecker(b))
            }
            _ => ReducedState::Dense(self.dense().kronecker(&other.dense())),
        }
    }

    /// Halved trace distance, evaluated in the cheapest representation.
    pub fn trace_distance(&self, other: &ReducedState) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(QpirError::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        let norm = match (self, other) {
            (ReducedState::Factor(a), ReducedState::Factor(b))
                if a.ncols() + b.ncols() < self.dim() =>
            {
                factored_difference_trace_norm(a, b)
            }
            _ if self.rank_bound() + other.rank_bound() < self.dim() => {
                factored_difference_trace_norm(&self.factor(), &other.factor())
            }
            _ => nuclear_norm(&(self.dense() - other.dense())),
        };
        Ok((0.5 * norm).clamp(0.0, 1.0))
    }

    /// A column factor; dense inputs are factored through their spectrum.
    pub fn factor(&self) -> CMatrix {
        match self {
            ReducedState::Factor(f) => f.clone(),
            ReducedState::Dense(m) => {
                let (vals, vecs) = eigh(m);
                let keep: Vec<usize> = (0..vals.len()).filter(|&k| vals[k] > 1e-15).collect();
                let mut f = CMatrix::zeros(m.nrows(), keep.len());
                for (dst, &k) in keep.iter().enumerate() {
                    f.set_column(dst, &(vecs.column(k) * C64::new(vals[k].sqrt(), 0.0)));
                }
                f
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn ket(v: &[(f64, f64)]) -> Vec<C64> {
        v.iter().map(|&(r, i)| C64::new(r, i)).collect()
    }

    #[test]
    fn orthogonal_and_identical_states() {
        let zero = DensityOperator::from_pure(&ket(&[(1.0, 0.0), (0.0, 0.0)])).unwrap();
        let one = DensityOperator::from_pure(&ket(&[(0.0, 0.0), (1.0, 0.0)])).unwrap();
        assert!(trace_distance(&zero, &zero).unwrap() < 1e-12);
        assert!((trace_distance(&zero, &one).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_versus_plus() {
        let zero = DensityOperator::from_pure(&ket(&[(1.0, 0.0), (0.0, 0.0)])).unwrap();
        let plus =
            DensityOperator::from_pure(&ket(&[(FRAC_1_SQRT_2, 0.0), (FRAC_1_SQRT_2, 0.0)])).unwrap();
        let d = trace_distance(&zero, &plus).unwrap();
        assert!((d - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn identity_kraus_is_noop() {
        let rho = DensityOperator::new(CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.7, 0.0), C64::new(0.1, 0.2), C64::new(0.1, -0.2), C64::new(0.3, 0.0)],
        ))
        .unwrap();
        let out = rho.apply_kraus(&[CMatrix::identity(2, 2)]).unwrap();
        assert!(trace_distance(&rho, &out).unwrap() < 1e-14);
    }

    #[test]
    fn rejects_invalid_matrices() {
        let not_herm = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.5, 0.0), C64::new(0.1, 0.0), C64::new(0.0, 0.0), C64::new(0.5, 0.0)],
        );
        assert!(DensityOperator::new(not_herm).is_err());
        let negative = CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(1.5, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-0.5, 0.0)],
        );
        assert!(DensityOperator::new(negative).is_err());
        let bad_kraus = [CMatrix::identity(2, 2) * C64::new(0.5, 0.0)];
        assert!(DensityOperator::maximally_mixed(2).apply_kraus(&bad_kraus).is_err());
    }

    #[test]
    fn mismatched_dimensions() {
        let a = DensityOperator::maximally_mixed(2);
        let b = DensityOperator::maximally_mixed(4);
        assert_eq!(
            trace_distance(&a, &b),
            Err(QpirError::DimensionMismatch { expected: 2, found: 4 })
        );
    }

    #[test]
    fn factored_and_dense_agree() {
        let f1 = CMatrix::from_fn(8, 2, |i, j| C64::new(((i * 7 + j * 3) % 5) as f64, j as f64));
        let f2 = CMatrix::from_fn(8, 1, |i, _| C64::new((i % 3) as f64, 1.0));
        let n1 = (&f1 * f1.adjoint()).trace().re;
        let n2 = (&f2 * f2.adjoint()).trace().re;
        let a = ReducedState::Factor(f1 / C64::new(n1.sqrt(), 0.0));
        let b = ReducedState::Factor(f2 / C64::new(n2.sqrt(), 0.0));
        let dense = trace_distance(
            &DensityOperator::from_trusted(a.dense()),
            &DensityOperator::from_trusted(b.dense()),
        )
        .unwrap();
        assert!((a.trace_distance(&b).unwrap() - dense).abs() < 1e-12);
        let mixed = ReducedState::Dense(b.dense());
        assert!((a.trace_distance(&mixed).unwrap() - dense).abs() < 1e-12);
    }
}
