//! Elementary symmetric polynomials of kernel eigenvalues.
//!
//! The size-k normalizer of a k-DPP is `e_k(λ₁, …, λ_N) = Σ_{|J|=k} Π_{j∈J}
//! λ_j`, the sum over all ways to pick k eigenvalues. The table built here
//! holds `E[ℓ][n] = e_ℓ(λ₁, …, λ_n)` for every prefix `n` and every size
//! `ℓ ≤ k`, via the recurrence
//!
//! ```text
//! E[0][n] = 1
//! E[ℓ][0] = 0                      for ℓ ≥ 1
//! E[ℓ][n] = E[ℓ][n-1] + λ_n · E[ℓ-1][n-1]
//! ```
//!
//! (either λ_n is excluded, or included on top of a size ℓ-1 choice from the
//! prefix). The sampler consumes the whole table, not just the last column:
//! the ratio `λ_n E[ℓ-1][n-1] / E[ℓ][n]` is the probability that eigenvalue
//! `n` joins the selection. All λ are nonnegative, so the recurrence only
//! adds nonnegative terms and is numerically benign.

use super::{DppError, Result};

/// Prefix table of elementary symmetric polynomials.
#[derive(Debug, Clone)]
pub struct EspTable {
    /// `rows[ℓ][n] = e_ℓ(λ₁, …, λ_n)`; `ℓ ∈ 0..=k`, `n ∈ 0..=N`.
    rows: Vec<Vec<f64>>,
}

impl EspTable {
    /// `e_ℓ` over the first `n` eigenvalues.
    pub fn value(&self, l: usize, n: usize) -> f64 {
        self.rows[l][n]
    }

    /// Largest subset size tabulated (the `k` passed to [`esp_table`]).
    pub fn max_size(&self) -> usize {
        self.rows.len() - 1
    }

    /// Number of eigenvalues the table was built over.
    pub fn item_count(&self) -> usize {
        self.rows[0].len() - 1
    }
}

/// Tabulates `e_ℓ(λ₁, …, λ_n)` for `ℓ ≤ k` over every prefix of
/// `eigenvalues`.
///
/// Eigenvalues must be nonnegative (clamped decompositions guarantee this)
/// and `k` must not exceed their count.
pub fn esp_table(eigenvalues: &[f64], k: usize) -> Result<EspTable> {
    let n = eigenvalues.len();
    if k > n {
        return Err(DppError::InvalidInput(format!(
            "subset size {k} exceeds eigenvalue count {n}"
        )));
    }
    if let Some(bad) = eigenvalues.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(DppError::InvalidInput(format!(
            "eigenvalues must be finite and >= 0, got {bad}"
        )));
    }
    let mut rows = vec![vec![0.0; n + 1]; k + 1];
    rows[0] = vec![1.0; n + 1];
    for l in 1..=k {
        for i in 1..=n {
            rows[l][i] = rows[l][i - 1] + eigenvalues[i - 1] * rows[l - 1][i - 1];
        }
    }
    Ok(EspTable { rows })
}
