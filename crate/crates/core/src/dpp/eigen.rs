//! Eigendecomposition of DPP kernels with round-off clamping.
//!
//! Kernels built as `BᵀB` are positive semidefinite in exact arithmetic, but
//! floating point leaves tiny negative eigenvalues (on the order of
//! `-1e-16 λ_max`) exactly where the process must place zero probability:
//! duplicated features. Carrying those through the sampler would let it
//! "select" directions that only exist as noise, so eigenvalues below
//! `clamp_tol · λ_max` are clamped to exactly zero. Anything more negative
//! than `-1e-8 λ_max` is not round-off and is rejected instead.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{DppError, Kernel, Result};

/// Default relative threshold below which eigenvalues are treated as zero.
pub const DEFAULT_CLAMP_TOL: f64 = 1e-10;

/// Relative magnitude past which a negative eigenvalue is a hard error.
pub const PSD_TOL: f64 = 1e-8;

/// Eigenvalues (ascending, clamped to `≥ 0`) with matching eigenvectors.
#[derive(Debug, Clone)]
pub struct Eigendecomposition {
    eigenvalues: Vec<f64>,
    /// Column `i` is the unit eigenvector paired with `eigenvalues[i]`.
    eigenvectors: DMatrix<f64>,
}

impl Eigendecomposition {
    pub fn order(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Numerical rank: the number of eigenvalues that survived clamping.
    pub fn rank(&self) -> usize {
        self.eigenvalues.iter().filter(|&&v| v > 0.0).count()
    }
}

/// Decomposes a kernel, sorting eigenvalues ascending and clamping
/// round-off noise to zero.
///
/// `clamp_tol` is relative to the largest eigenvalue; [`DEFAULT_CLAMP_TOL`]
/// suits kernels built from unit-norm features. An eigenvalue below
/// `-PSD_TOL · λ_max` means the input was not a similarity kernel and is
/// reported as an error rather than silently clamped.
pub fn eigendecompose(kernel: &Kernel, clamp_tol: f64) -> Result<Eigendecomposition> {
    if !(clamp_tol.is_finite() && clamp_tol >= 0.0) {
        return Err(DppError::InvalidInput(format!(
            "clamp tolerance must be finite and >= 0, got {clamp_tol}"
        )));
    }
    let n = kernel.order();
    let eig = SymmetricEigen::try_new(kernel.entries().clone(), f64::EPSILON, 10_000)
        .ok_or(DppError::NonConvergence { order: n })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);

    let max = values.last().copied().unwrap_or(0.0).max(0.0);
    let floor = -PSD_TOL * max;
    let cutoff = clamp_tol * max;
    for v in &mut values {
        if *v < floor {
            return Err(DppError::NotPositiveSemidefinite {
                min_eigenvalue: *v,
                max_eigenvalue: max,
            });
        }
        if *v < cutoff || *v <= 0.0 {
            *v = 0.0;
        }
    }
    Ok(Eigendecomposition {
        eigenvalues: values,
        eigenvectors: vectors,
    })
}
