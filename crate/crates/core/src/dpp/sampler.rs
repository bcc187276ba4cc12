//! Exact two-phase k-DPP sampling.
//!
//! Phase one picks which k eigenvectors span the sample. Scanning
//! eigenvalues from index N down to 1 with ℓ slots left, index n joins with
//! probability
//!
//! ```text
//! λ_n · E[ℓ-1][n-1] / E[ℓ][n]
//! ```
//!
//! the fraction of size-ℓ choices from the first n eigenvalues that include
//! λ_n. When n == ℓ every remaining index must join. Zero eigenvalues get
//! zero numerator, so clamped directions are never selected, which is why
//! the caller must keep k within the kernel rank.
//!
//! Phase two turns the chosen eigenvectors V into k items. Item i is drawn
//! with probability `Σ_{v∈V} v_i² / |V|` (the squared projection of basis
//! direction e_i onto span V), then V is replaced by an orthonormal basis of
//! its projection orthogonal to e_i: the vector with the largest i-th
//! coordinate is used to eliminate coordinate i from the rest and dropped,
//! and the survivors are re-orthonormalized by modified Gram-Schmidt. Each
//! round removes one dimension, so exactly k distinct items come out.

use rand::Rng;

use super::eigen::Eigendecomposition;
use super::esp::esp_table;
use super::{DppError, Result};

/// Draws one size-`k` subset (ascending item indices) from the k-DPP defined
/// by `decomp`.
///
/// `k` must be at least 1 and at most [`Eigendecomposition::rank`]; a larger
/// `k` would require selecting a zero eigenvalue, which has probability
/// zero.
pub fn sample_k_dpp<R: Rng + ?Sized>(
    decomp: &Eigendecomposition,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(DppError::InvalidInput("sample size k must be >= 1".into()));
    }
    let rank = decomp.rank();
    if k > rank {
        return Err(DppError::RankDeficient { k, rank });
    }
    let chosen = select_eigenvectors(decomp, k, rng)?;
    Ok(select_items(decomp, &chosen, rng))
}

/// Phase one: indices (into the decomposition) of the k eigenvectors.
fn select_eigenvectors<R: Rng + ?Sized>(
    decomp: &Eigendecomposition,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let values = decomp.eigenvalues();
    let table = esp_table(values, k)?;
    let mut chosen = Vec::with_capacity(k);
    let mut remaining = k;
    for n in (1..=values.len()).rev() {
        if remaining == 0 {
            break;
        }
        let include = if n == remaining {
            // Only as many indices left as slots: all of them join.
            true
        } else {
            let denom = table.value(remaining, n);
            if denom <= 0.0 {
                // Unreachable for k <= rank; kept as a guard against
                // underflow so the walk cannot stall with slots unfilled.
                true
            } else {
                let p = values[n - 1] * table.value(remaining - 1, n - 1) / denom;
                rng.random::<f64>() < p
            }
        };
        if include {
            chosen.push(n - 1);
            remaining -= 1;
        }
    }
    debug_assert_eq!(chosen.len(), k);
    Ok(chosen)
}

/// Phase two: k distinct item indices from the elementary DPP on `chosen`.
fn select_items<R: Rng + ?Sized>(
    decomp: &Eigendecomposition,
    chosen: &[usize],
    rng: &mut R,
) -> Vec<usize> {
    let n = decomp.order();
    let mut basis: Vec<Vec<f64>> = chosen
        .iter()
        .map(|&c| decomp.eigenvectors().column(c).iter().copied().collect())
        .collect();
    let mut items = Vec::with_capacity(chosen.len());

    while !basis.is_empty() {
        // P(i) ∝ Σ_v v_i²; renormalize by the realized total to absorb
        // round-off drift from repeated projections.
        let mut weights = vec![0.0f64; n];
        for v in &basis {
            for (w, x) in weights.iter_mut().zip(v) {
                *w += x * x;
            }
        }
        let total: f64 = weights.iter().sum();
        let mut draw = rng.random::<f64>() * total;
        let mut item = n - 1;
        for (i, &w) in weights.iter().enumerate() {
            if draw < w {
                item = i;
                break;
            }
            draw -= w;
        }
        items.push(item);

        // Eliminate coordinate `item` using the vector that carries it most.
        let pivot_at = basis
            .iter()
            .enumerate()
            .max_by(|a, b| a.1[item].abs().total_cmp(&b.1[item].abs()))
            .map(|(i, _)| i)
            .unwrap();
        let pivot = basis.swap_remove(pivot_at);
        for v in &mut basis {
            let ratio = v[item] / pivot[item];
            for (x, p) in v.iter_mut().zip(&pivot) {
                *x -= ratio * p;
            }
            v[item] = 0.0;
        }

        // Modified Gram-Schmidt restores orthonormality after elimination.
        for j in 0..basis.len() {
            for i in 0..j {
                let dot: f64 = basis[j].iter().zip(&basis[i]).map(|(a, b)| a * b).sum();
                let (head, tail) = basis.split_at_mut(j);
                for (x, y) in tail[0].iter_mut().zip(&head[i]) {
                    *x -= dot * y;
                }
            }
            let norm = basis[j].iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                for x in &mut basis[j] {
                    *x /= norm;
                }
            }
        }
    }

    items.sort_unstable();
    items
}
