//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Tolerance for validity of states and operators.
pub const STATE_TOL: f64 = 1e-10;
/// Tolerance for numeric comparisons in assertions.
pub const CMP_TOL: f64 = 1e-9;

/// Symmetrized Hermitian part `(M + M†)/2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let n = m.nrows();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Eigenvalues of a Hermitian matrix (unordered).
pub fn eigvalsh(m: &CMatrix) -> Vec<f64> {
    SymmetricEigen::new(hermitian_part(m))
        .eigenvalues
        .iter()
        .copied()
        .collect()
}

/// Sum of singular values, computed on the matrix itself.
pub fn nuclear_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SVD::new(m.clone(), false, false).singular_values.iter().sum()
}

/// Principal square root of a positive semidefinite matrix.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (vals, vecs) = eigh(m);
    let d = CMatrix::from_diagonal(&CVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| C64::new(v.max(0.0).sqrt(), 0.0)),
    ));
    &vecs * d * vecs.adjoint()
}

/// Moore–Penrose inverse square root on the support of a PSD matrix.
pub fn psd_pinv_sqrt(m: &CMatrix, tol: f64) -> CMatrix {
    let (vals, vecs) = eigh(m);
    let d = CMatrix::from_diagonal(&CVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| {
            if v > tol {
                C64::new(1.0 / v.sqrt(), 0.0)
            } else {
                ZERO
            }
        }),
    ));
    &vecs * d * vecs.adjoint()
}

/// Maximum absolute entry of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Deviation of `m†m` from the identity (max entry).
pub fn isometry_defect(m: &CMatrix) -> f64 {
    let g = m.adjoint() * m;
    max_abs_diff(&g, &CMatrix::identity(g.nrows(), g.ncols()))
}

/// Trace norm of `F1 F1† - F2 F2†` for column factors of equal height,
/// computed inside the span of the factors (never forms a dim x dim matrix).
pub fn factored_difference_trace_norm(f1: &CMatrix, f2: &CMatrix) -> f64 {
    let r1 = f1.ncols();
    let r2 = f2.ncols();
    let m = r1 + r2;
    if m == 0 {
        return 0.0;
    }
    // rows where both factors vanish do not contribute
    let support: Vec<usize> = (0..f1.nrows())
        .filter(|&i| f1.row(i).iter().chain(f2.row(i).iter()).any(|z| *z != ZERO))
        .collect();
    let mut w = CMatrix::zeros(support.len().max(1), m);
    for (dst, &src) in support.iter().enumerate() {
        for c in 0..r1 {
            w[(dst, c)] = f1[(src, c)];
        }
        for c in 0..r2 {
            w[(dst, r1 + c)] = f2[(src, c)];
        }
    }
    // W = Q R  =>  W G W† has the nonzero spectrum of R G R†.
    let r = w.qr().r();
    let mut rg = r.clone();
    for c in r1..m {
        rg.column_mut(c).neg_mut();
    }
    let h = &rg * r.adjoint();
    eigvalsh(&h).iter().map(|v| v.abs()).sum()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Outer product `|v><v|`.
pub fn projector(v: &[C64]) -> CMatrix {
    let col = CVector::from_column_slice(v);
    &col * col.adjoint()
}

pub fn real_trace(m: &CMatrix) -> f64 {
    m.trace().re
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factored_norm_matches_dense() {
        let f1 = CMatrix::from_fn(4, 2, |i, j| C64::new((i + j) as f64 * 0.1, (i as f64 - j as f64) * 0.05));
        let f2 = CMatrix::from_fn(4, 1, |i, _| C64::new(0.2 + i as f64 * 0.1, 0.03));
        let dense = &f1 * f1.adjoint() - &f2 * f2.adjoint();
        let want = nuclear_norm(&dense);
        let got = factored_difference_trace_norm(&f1, &f2);
        assert!((want - got).abs() < 1e-12, "{want} vs {got}");
    }

    #[test]
    fn sqrt_squares_back() {
        let a = CMatrix::from_fn(3, 3, |i, j| C64::new((i * 3 + j) as f64, i as f64 - j as f64));
        let psd = &a * a.adjoint();
        let s = psd_sqrt(&psd);
        assert!(max_abs_diff(&(&s * &s), &psd) < 1e-9);
    }
}
