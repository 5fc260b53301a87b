//! Seeded random states, operators and channels for property suites.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::quantum::density::DensityOperator;
use crate::quantum::layout::RegisterLayout;
use crate::quantum::linalg::{CMatrix, CVector, C64};
use crate::quantum::state::PureState;

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar-random pure state on a layout.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, layout: &RegisterLayout) -> Result<PureState> {
    let amps = (0..layout.dim()).map(|_| gaussian(rng)).collect();
    PureState::normalized(layout.clone(), amps)
}

/// Random density operator `G G† / tr` of the given rank.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> DensityOperator {
    let g = ginibre(rng, dim, rank.max(1));
    let m = &g * g.adjoint();
    let t = m.trace();
    DensityOperator::from_trusted(m / t)
}

/// Haar-random isometry `dim_out × dim_in` from a QR decomposition with
/// phase-fixed diagonal.
pub fn random_isometry<R: Rng + ?Sized>(rng: &mut R, dim_out: usize, dim_in: usize) -> CMatrix {
    assert!(dim_out >= dim_in, "isometry cannot shrink dimension");
    let qr = ginibre(rng, dim_out, dim_in).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q.columns(0, dim_in).into_owned();
    for k in 0..dim_in {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        let col: CVector = q.column(k) * phase;
        q.set_column(k, &col);
    }
    q
}

pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    random_isometry(rng, dim, dim)
}

/// Random channel with `count` Kraus operators (`dim_out × dim_in` each),
/// cut from one random isometry.
pub fn random_kraus<R: Rng + ?Sized>(rng: &mut R, dim_in: usize, dim_out: usize, count: usize) -> Vec<CMatrix> {
    let v = random_isometry(rng, dim_out * count, dim_in);
    (0..count)
        .map(|k| v.rows(k * dim_out, dim_out).into_owned())
        .collect()
}

/// Random effect `0 ≤ Λ ≤ I` with eigenvalues drawn from `[lo, 1]`.
pub fn random_effect<R: Rng + ?Sized>(rng: &mut R, dim: usize, lo: f64) -> CMatrix {
    let u = random_unitary(rng, dim);
    let d = CMatrix::from_diagonal(&CVector::from_fn(dim, |_, _| {
        C64::new(rng.random_range(lo..=1.0), 0.0)
    }));
    &u * d * u.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::linalg::isometry_defect;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_objects_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert!(isometry_defect(&random_unitary(&mut rng, 8)) < 1e-12);
        assert!(isometry_defect(&random_isometry(&mut rng, 8, 2)) < 1e-12);
        let ks = random_kraus(&mut rng, 4, 2, 3);
        let sum = ks.iter().fold(CMatrix::zeros(4, 4), |acc, k| acc + k.adjoint() * k);
        assert!(crate::quantum::linalg::max_abs_diff(&sum, &CMatrix::identity(4, 4)) < 1e-12);
        let rho = random_density(&mut rng, 4, 2);
        assert!(DensityOperator::new(rho.into_matrix()).is_ok());
    }
}
