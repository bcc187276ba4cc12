//! Distributional and algebraic checks for the determinantal sampler,
//! cross-validated against the brute-force oracle.

use std::collections::BTreeMap;

use dppsearch::dpp::{
    build_kernel, eigendecompose, esp_table, exact_k_dpp_pmf, sample_k_dpp, subset_log_det,
    total_variation, FeatureBank, Kernel, DEFAULT_CLAMP_TOL,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_bank(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> FeatureBank {
    let features: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    let qualities: Vec<f64> = (0..n).map(|_| 0.2 + rng.random::<f64>()).collect();
    FeatureBank::new(features, qualities).unwrap()
}

fn random_kernel(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> Kernel {
    build_kernel(&random_bank(rng, dim, n))
}

/// Sum of size-k principal minors, computed by enumeration through
/// subset_log_det rather than through the ESP table.
fn minor_sum(kernel: &Kernel, k: usize) -> f64 {
    use itertools::Itertools;
    (0..kernel.order())
        .combinations(k)
        .map(|subset| subset_log_det(kernel, &subset).unwrap().exp())
        .sum()
}

#[test]
fn esp_matches_minor_sums_on_random_kernels() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..30 {
        let n = 2 + (trial % 7);
        // dim >= n keeps the kernel full rank, so every e_k is positive.
        let kernel = random_kernel(&mut rng, n + trial % 3, n);
        let decomp = eigendecompose(&kernel, DEFAULT_CLAMP_TOL).unwrap();
        let table = esp_table(decomp.eigenvalues(), n).unwrap();
        for k in 1..=n {
            let via_esp = table.value(k, n);
            let via_minors = minor_sum(&kernel, k);
            assert!(
                (via_esp - via_minors).abs() / via_esp <= 1e-8,
                "trial {trial} k={k}: esp {via_esp} vs minors {via_minors}"
            );
        }
    }
}

#[test]
fn esp_vanishes_beyond_the_rank() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    // 6 items in a 3-dimensional feature space: rank is at most 3.
    let kernel = random_kernel(&mut rng, 3, 6);
    let decomp = eigendecompose(&kernel, DEFAULT_CLAMP_TOL).unwrap();
    assert!(decomp.rank() <= 3);
    let table = esp_table(decomp.eigenvalues(), 6).unwrap();
    for k in (decomp.rank() + 1)..=6 {
        assert_eq!(table.value(k, 6), 0.0);
        // Minor sums only vanish up to round-off in the determinants.
        assert!(minor_sum(&kernel, k).abs() <= 1e-9);
    }
}

#[test]
fn pmf_is_invariant_under_quality_rescaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let features: Vec<Vec<f64>> = (0..6)
        .map(|_| {
            let v: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    let qualities: Vec<f64> = (0..6).map(|_| 0.3 + rng.random::<f64>()).collect();
    let base = exact_k_dpp_pmf(
        &build_kernel(&FeatureBank::new(features.clone(), qualities.clone()).unwrap()),
        3,
    )
    .unwrap();
    for c in [0.1, 10.0] {
        let scaled: Vec<f64> = qualities.iter().map(|q| q * c).collect();
        let pmf = exact_k_dpp_pmf(
            &build_kernel(&FeatureBank::new(features.clone(), scaled).unwrap()),
            3,
        )
        .unwrap();
        for (subset, p) in &base {
            assert!(
                (p - pmf[subset]).abs() <= 1e-10,
                "c={c} subset {subset:?}: {p} vs {}",
                pmf[subset]
            );
        }
    }
}

#[test]
fn pmf_is_permutation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let kernel = random_kernel(&mut rng, 3, 5);
    let perm = [3usize, 0, 4, 1, 2];
    let mut permuted = DMatrix::zeros(5, 5);
    for i in 0..5 {
        for j in 0..5 {
            permuted[(i, j)] = kernel.get(perm[i], perm[j]);
        }
    }
    let base = exact_k_dpp_pmf(&kernel, 2).unwrap();
    let moved = exact_k_dpp_pmf(&Kernel::from_entries(permuted).unwrap(), 2).unwrap();
    for (subset, p) in &moved {
        // Subset {i,j} of the permuted kernel is {perm[i],perm[j]} of the base.
        let mut original: Vec<usize> = subset.iter().map(|&i| perm[i]).collect();
        original.sort_unstable();
        assert!((p - base[&original]).abs() <= 1e-12);
    }
}

#[test]
fn sampler_matches_oracle_in_total_variation() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let kernel = random_kernel(&mut rng, 4, 5);
    let oracle = exact_k_dpp_pmf(&kernel, 2).unwrap();
    let decomp = eigendecompose(&kernel, DEFAULT_CLAMP_TOL).unwrap();
    let n_samples = 100_000usize;
    let mut counts: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for _ in 0..n_samples {
        let subset = sample_k_dpp(&decomp, 2, &mut rng).unwrap();
        *counts.entry(subset).or_insert(0.0) += 1.0;
    }
    for v in counts.values_mut() {
        *v /= n_samples as f64;
    }
    let tv = total_variation(&oracle, &counts);
    assert!(tv < 0.01, "TV distance {tv}");
}

#[test]
fn parallel_columns_are_never_co_selected() {
    // Items 0 and 2 share a feature direction, so any subset containing
    // both has a singular submatrix and probability zero.
    let features = vec![
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![1.0, 0.0, 0.0],
        vec![0.0, 0.0, 1.0],
    ];
    let bank = FeatureBank::new(features, vec![1.0, 0.8, 1.3, 0.9]).unwrap();
    let decomp = eigendecompose(&build_kernel(&bank), DEFAULT_CLAMP_TOL).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..5_000 {
        let subset = sample_k_dpp(&decomp, 2, &mut rng).unwrap();
        assert!(!(subset.contains(&0) && subset.contains(&2)), "{subset:?}");
    }
}

#[test]
fn oracle_normalizer_agrees_with_esp() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..10 {
        let kernel = random_kernel(&mut rng, 3, 6);
        let pmf = exact_k_dpp_pmf(&kernel, 2).unwrap();
        let total: f64 = pmf.values().sum();
        assert!((total - 1.0).abs() <= 1e-10);
        // Un-normalizing any entry recovers det/e_k.
        let decomp = eigendecompose(&kernel, DEFAULT_CLAMP_TOL).unwrap();
        let e2 = esp_table(decomp.eigenvalues(), 2).unwrap().value(2, 6);
        let (subset, p) = pmf.iter().next().unwrap();
        let det = subset_log_det(&kernel, subset).unwrap().exp();
        assert!((p - det / e2).abs() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn samples_have_exactly_k_distinct_indices(seed in 0u64..1000, n in 2usize..7, kx in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kernel = random_kernel(&mut rng, n, n);
        let decomp = eigendecompose(&kernel, DEFAULT_CLAMP_TOL).unwrap();
        let k = 1 + kx % n;
        prop_assume!(k <= decomp.rank());
        let subset = sample_k_dpp(&decomp, k, &mut rng).unwrap();
        prop_assert_eq!(subset.len(), k);
        let mut dedup = subset.clone();
        dedup.dedup();
        prop_assert_eq!(&dedup, &subset);
        prop_assert!(subset.iter().all(|&i| i < n));
        prop_assert!(subset.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn eigendecomposition_reconstructs_the_kernel(seed in 0u64..1000, n in 2usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kernel = random_kernel(&mut rng, 4, n);
        let decomp = eigendecompose(&kernel, DEFAULT_CLAMP_TOL).unwrap();
        let v = decomp.eigenvectors();
        let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(decomp.eigenvalues()));
        let rebuilt = v * lambda * v.transpose();
        let scale = kernel.entries().amax().max(1.0);
        prop_assert!((rebuilt - kernel.entries()).amax() <= 1e-6 * scale);
        // Columns stay orthonormal.
        let gram = v.transpose() * v;
        let identity = DMatrix::identity(n, n);
        prop_assert!((gram - identity).amax() <= 1e-8);
    }

    #[test]
    fn esp_recursion_holds(seed in 0u64..1000, n in 1usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eigenvalues: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 3.0).collect();
        let table = esp_table(&eigenvalues, n).unwrap();
        for l in 1..=n {
            prop_assert_eq!(table.value(0, l), 1.0);
            for m in 1..=n {
                let expect = table.value(l, m - 1) + eigenvalues[m - 1] * table.value(l - 1, m - 1);
                prop_assert!((table.value(l, m) - expect).abs() <= 1e-12 * expect.abs().max(1.0));
            }
        }
    }
}
