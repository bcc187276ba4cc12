//! Exact k-DPP machinery over quality-scaled unit-norm features.
//!
//! A determinantal point process over `N` items is defined here through a
//! kernel `L = BᵀB`, where column `i` of `B` is a unit-norm feature vector
//! `φᵢ` scaled by a positive quality `qᵢ`. The probability of selecting a
//! subset `A` is proportional to `det(L_A)`, the principal minor on the rows
//! and columns in `A`. Geometrically `det(L_A)` is the squared volume spanned
//! by the selected columns of `B`: large qualities inflate it, near-parallel
//! features collapse it, so the process trades quality against diversity.
//!
//! Conditioning on `|A| = k` gives a k-DPP. Sampling one exactly takes three
//! steps, each its own submodule:
//!
//! 1. [`eigen`]: eigendecompose `L` (clamping round-off noise to zero),
//! 2. [`esp`]: tabulate elementary symmetric polynomials of the eigenvalues,
//!    which normalize the size-k minors,
//! 3. [`sampler`]: select k eigenvectors with the ESP weights, then convert
//!    that elementary DPP into k concrete items by projection.
//!
//! [`oracle`] enumerates the exact size-k distribution for small `N` by
//! computing every minor directly. It shares no code with the sampling path,
//! which is what makes it usable as an independent check.

use nalgebra::DMatrix;
use thiserror::Error;

pub mod eigen;
pub mod esp;
pub mod oracle;
pub mod sampler;

pub use eigen::{eigendecompose, Eigendecomposition, DEFAULT_CLAMP_TOL};
pub use esp::{esp_table, EspTable};
pub use oracle::{exact_k_dpp_pmf, total_variation, ORACLE_MAX_ORDER};
pub use sampler::sample_k_dpp;

/// Accepted deviation of a feature vector's Euclidean norm from 1.
pub const UNIT_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DppError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("eigendecomposition failed to converge for order {order}")]
    NonConvergence { order: usize },
    #[error("kernel is not positive semidefinite: eigenvalue {min_eigenvalue:e} below tolerance for max {max_eigenvalue:e}")]
    NotPositiveSemidefinite {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },
    #[error("requested sample size {k} exceeds kernel rank {rank}")]
    RankDeficient { k: usize, rank: usize },
    #[error("exact enumeration refused: order {order} exceeds limit {max}")]
    OracleTooLarge { order: usize, max: usize },
}

pub type Result<T> = std::result::Result<T, DppError>;

/// Unit-norm feature vectors with per-item positive qualities.
///
/// The bank validates its invariants once at construction so the kernel and
/// sampling code can assume them.
#[derive(Debug, Clone)]
pub struct FeatureBank {
    /// Column `i` is feature `φᵢ`, shape `dim × count`.
    features: DMatrix<f64>,
    qualities: Vec<f64>,
}

impl FeatureBank {
    /// Builds a bank from per-item feature vectors and qualities.
    ///
    /// Every feature must have the same dimension and unit Euclidean norm
    /// within [`UNIT_NORM_TOL`]; every quality must be finite and strictly
    /// positive.
    pub fn new(features: Vec<Vec<f64>>, qualities: Vec<f64>) -> Result<Self> {
        if features.is_empty() {
            return Err(DppError::InvalidInput("feature bank is empty".into()));
        }
        if features.len() != qualities.len() {
            return Err(DppError::InvalidInput(format!(
                "{} features but {} qualities",
                features.len(),
                qualities.len()
            )));
        }
        let dim = features[0].len();
        if dim == 0 {
            return Err(DppError::InvalidInput("feature dimension is zero".into()));
        }
        for (i, f) in features.iter().enumerate() {
            if f.len() != dim {
                return Err(DppError::DimensionMismatch {
                    expected: dim,
                    got: f.len(),
                });
            }
            let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(DppError::InvalidInput(format!(
                    "feature {i} has norm {norm}, expected 1 within {UNIT_NORM_TOL:e}"
                )));
            }
        }
        for (i, &q) in qualities.iter().enumerate() {
            if !q.is_finite() || q <= 0.0 {
                return Err(DppError::InvalidInput(format!(
                    "quality {i} is {q}, expected finite and > 0"
                )));
            }
        }
        let count = features.len();
        let features = DMatrix::from_fn(dim, count, |r, c| features[c][r]);
        Ok(Self {
            features,
            qualities,
        })
    }

    pub fn count(&self) -> usize {
        self.qualities.len()
    }

    pub fn dim(&self) -> usize {
        self.features.nrows()
    }

    pub fn qualities(&self) -> &[f64] {
        &self.qualities
    }
}

/// Symmetric positive semidefinite similarity kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    entries: DMatrix<f64>,
}

impl Kernel {
    /// Wraps a square matrix, enforcing symmetry within `1e-8` relative to
    /// the largest entry magnitude. Residual asymmetry is averaged away so
    /// downstream eigendecomposition sees an exactly symmetric matrix.
    pub fn from_entries(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(DppError::InvalidInput(format!(
                "kernel must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.is_empty() {
            return Err(DppError::InvalidInput("kernel is empty".into()));
        }
        let scale = entries.iter().fold(0.0f64, |m, &x| m.max(x.abs())).max(1.0);
        for i in 0..entries.nrows() {
            for j in (i + 1)..entries.ncols() {
                let gap = (entries[(i, j)] - entries[(j, i)]).abs();
                if !gap.is_finite() || gap > 1e-8 * scale {
                    return Err(DppError::InvalidInput(format!(
                        "kernel asymmetric at ({i}, {j}): {} vs {}",
                        entries[(i, j)],
                        entries[(j, i)]
                    )));
                }
            }
        }
        let sym = 0.5 * (&entries + entries.transpose());
        Ok(Self { entries: sym })
    }

    /// Builds from a flat row-major entry list, the on-disk kernel layout.
    pub fn from_row_major(order: usize, entries: &[f64]) -> Result<Self> {
        if order == 0 || entries.len() != order * order {
            return Err(DppError::InvalidInput(format!(
                "expected {}x{order} = {} entries, got {}",
                order,
                order * order,
                entries.len()
            )));
        }
        Self::from_entries(DMatrix::from_row_slice(order, order, entries))
    }

    pub fn order(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Entries flattened row-major, the layout used by kernel files.
    pub fn to_row_major(&self) -> Vec<f64> {
        let n = self.order();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.entries[(i, j)]);
            }
        }
        out
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Principal submatrix on `subset` (indices in the given order).
    pub(crate) fn submatrix(&self, subset: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(subset.len(), subset.len(), |r, c| {
            self.entries[(subset[r], subset[c])]
        })
    }
}

/// Builds the kernel `L_ij = qᵢ qⱼ ⟨φᵢ, φⱼ⟩` from a validated bank.
///
/// Computed as `BᵀB` with `B`'s columns `qᵢ φᵢ`, then symmetrized by
/// averaging with its transpose so floating-point round-off cannot leave
/// `L_ij ≠ L_ji`.
pub fn build_kernel(bank: &FeatureBank) -> Kernel {
    let mut b = bank.features.clone();
    for (c, &q) in bank.qualities.iter().enumerate() {
        b.column_mut(c).scale_mut(q);
    }
    let l = b.transpose() * &b;
    let sym = 0.5 * (&l + l.transpose());
    Kernel { entries: sym }
}

/// Log-determinant of the principal minor `L_A`, the unnormalized
/// log-probability weight of subset `A`.
///
/// The empty subset has weight `det(L_∅) = 1`, so its log is `0`. A singular
/// (or numerically non-positive) minor returns `-inf`. Out-of-range or
/// repeated indices are an error: a principal minor is defined on a set.
pub fn subset_log_det(kernel: &Kernel, subset: &[usize]) -> Result<f64> {
    let n = kernel.order();
    let mut seen = vec![false; n];
    for &i in subset {
        if i >= n {
            return Err(DppError::InvalidInput(format!(
                "subset index {i} out of range for order {n}"
            )));
        }
        if seen[i] {
            return Err(DppError::InvalidInput(format!(
                "subset index {i} repeated"
            )));
        }
        seen[i] = true;
    }
    if subset.is_empty() {
        return Ok(0.0);
    }
    let det = kernel.submatrix(subset).determinant();
    if det > 0.0 {
        Ok(det.ln())
    } else {
        Ok(f64::NEG_INFINITY)
    }
}
