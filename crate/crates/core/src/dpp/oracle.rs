//! Brute-force k-DPP distribution for small kernels.
//!
//! Enumerates every size-k subset and computes its minor determinant
//! directly (LU factorization on the submatrix), normalizing by the sum.
//! This route never touches the eigendecomposition, the ESP table, or the
//! sampler, so agreement between sampled frequencies and this distribution
//! checks the entire sampling path at once. The cost is `C(N,k)` small
//! determinants, hence the hard order cap.

use std::collections::BTreeMap;

use itertools::Itertools;

use super::{DppError, Kernel, Result};

/// Largest kernel order the oracle will enumerate.
pub const ORACLE_MAX_ORDER: usize = 12;

/// Exact probability of every size-`k` subset under the k-DPP on `kernel`.
///
/// Subsets are returned as sorted index vectors. Negative minors (round-off
/// on singular submatrices) are treated as zero mass. Fails if every minor
/// vanishes, since the size-k process is then undefined.
pub fn exact_k_dpp_pmf(kernel: &Kernel, k: usize) -> Result<BTreeMap<Vec<usize>, f64>> {
    let n = kernel.order();
    if n > ORACLE_MAX_ORDER {
        return Err(DppError::OracleTooLarge {
            order: n,
            max: ORACLE_MAX_ORDER,
        });
    }
    if k == 0 || k > n {
        return Err(DppError::InvalidInput(format!(
            "subset size {k} out of range for order {n}"
        )));
    }
    let mut pmf = BTreeMap::new();
    let mut total = 0.0;
    for subset in (0..n).combinations(k) {
        let det = kernel.submatrix(&subset).determinant().max(0.0);
        total += det;
        pmf.insert(subset, det);
    }
    if total <= 0.0 {
        return Err(DppError::InvalidInput(format!(
            "all size-{k} minors vanish; k exceeds the kernel's numerical rank"
        )));
    }
    for v in pmf.values_mut() {
        *v /= total;
    }
    Ok(pmf)
}

/// Total variation distance `½ Σ_A |p(A) - q(A)|` between two subset
/// distributions, where missing keys count as zero mass.
pub fn total_variation(
    p: &BTreeMap<Vec<usize>, f64>,
    q: &BTreeMap<Vec<usize>, f64>,
) -> f64 {
    let mut sum = 0.0;
    for (key, &pv) in p {
        sum += (pv - q.get(key).copied().unwrap_or(0.0)).abs();
    }
    for (key, &qv) in q {
        if !p.contains_key(key) {
            sum += qv;
        }
    }
    0.5 * sum
}
