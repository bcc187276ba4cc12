//! Behavioral checks for the tactic filter: repulsion, weight monotonicity,
//! and the strategy contracts, run over seeded sampling fixtures.

use dppsearch::embed::hash_stub_embed;
use dppsearch::filter::{filter_tactics, FilterConfig, FilterStrategy, ScoredTactic};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn axis(dim: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[i] = 1.0;
    v
}

fn cand(text: &str, logit: f64, embedding: Vec<f64>, ps: f64, pt: f64) -> ScoredTactic {
    ScoredTactic {
        text: text.to_string(),
        logit,
        embedding,
        pred_success: ps,
        pred_time: pt,
    }
}

/// A reproducible pool with hash-stub embeddings and spread-out predictions.
fn stub_pool(n: usize, dim: usize, salt: u64, equal_logits: bool) -> Vec<ScoredTactic> {
    (0..n)
        .map(|i| {
            let rec = hash_stub_embed("pool-goal", &format!("tactic {i}"), dim, salt);
            let logit = if equal_logits { 0.0 } else { -(i as f64) * 0.3 };
            cand(
                &format!("tactic {i}"),
                logit,
                rec.embedding,
                rec.pred_success,
                rec.pred_time,
            )
        })
        .collect()
}

#[test]
fn identical_embeddings_are_never_co_selected() {
    let dim = 3;
    let candidates = vec![
        cand("twin-a", 0.0, axis(dim, 0), 0.5, 0.1),
        cand("twin-b", 0.0, axis(dim, 0), 0.5, 0.1),
        cand("other-1", 0.0, axis(dim, 1), 0.5, 0.1),
        cand("other-2", 0.0, axis(dim, 2), 0.5, 0.1),
    ];
    let cfg = FilterConfig {
        k: 2,
        ..FilterConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut co_selected = 0;
    for _ in 0..10_000 {
        let out = filter_tactics("g", &candidates, &cfg, &mut rng).unwrap();
        assert_eq!(out.len(), 2);
        let texts: Vec<&str> = out.iter().map(|t| t.text.as_str()).collect();
        if texts.contains(&"twin-a") && texts.contains(&"twin-b") {
            co_selected += 1;
        }
    }
    assert_eq!(co_selected, 0);
}

fn mean_selected(
    candidates: &[ScoredTactic],
    cfg: &FilterConfig,
    seed: u64,
    rounds: usize,
    pick: impl Fn(&ScoredTactic) -> f64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    let mut n = 0usize;
    for _ in 0..rounds {
        let out = filter_tactics("g", candidates, cfg, &mut rng).unwrap();
        for t in &out {
            total += pick(t);
            n += 1;
        }
    }
    total / n as f64
}

#[test]
fn success_weight_pulls_in_likelier_tactics() {
    let candidates = stub_pool(16, 8, 7, true);
    let means: Vec<f64> = [0.0, 0.1, 0.5]
        .iter()
        .map(|&lambda_s| {
            let cfg = FilterConfig {
                k: 8,
                lambda_s,
                ..FilterConfig::default()
            };
            mean_selected(&candidates, &cfg, 200, 1_000, |t| t.pred_success)
        })
        .collect();
    assert!(
        means.windows(2).all(|w| w[0] <= w[1]),
        "means not non-decreasing: {means:?}"
    );
}

#[test]
fn time_weight_pulls_in_faster_tactics() {
    let candidates = stub_pool(16, 8, 8, true);
    let means: Vec<f64> = [0.0, 0.1, 1.0]
        .iter()
        .map(|&lambda_tau| {
            let cfg = FilterConfig {
                k: 8,
                lambda_tau,
                ..FilterConfig::default()
            };
            mean_selected(&candidates, &cfg, 300, 1_000, |t| t.pred_time)
        })
        .collect();
    assert!(
        means.windows(2).all(|w| w[0] >= w[1]),
        "means not non-increasing: {means:?}"
    );
}

#[test]
fn beam_sized_input_returns_k_distinct() {
    let candidates = stub_pool(64, 16, 9, false);
    let cfg = FilterConfig {
        k: 8,
        ..FilterConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(400);
    let out = filter_tactics("g", &candidates, &cfg, &mut rng).unwrap();
    assert_eq!(out.len(), 8);
    let mut texts: Vec<&str> = out.iter().map(|t| t.text.as_str()).collect();
    texts.dedup();
    assert_eq!(texts.len(), 8);
}

#[test]
fn same_seed_selects_the_same_subset() {
    let candidates = stub_pool(24, 8, 10, false);
    for strategy in [
        FilterStrategy::Dpp,
        FilterStrategy::TopK,
        FilterStrategy::Random,
    ] {
        let cfg = FilterConfig {
            k: 6,
            strategy,
            ..FilterConfig::default()
        };
        let a = filter_tactics("g", &candidates, &cfg, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = filter_tactics("g", &candidates, &cfg, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let ta: Vec<&str> = a.iter().map(|t| t.text.as_str()).collect();
        let tb: Vec<&str> = b.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(ta, tb);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn output_is_a_subsequence_of_the_input(
        seed in 0u64..500,
        n in 1usize..20,
        k in 1usize..12,
        strat in 0usize..3,
    ) {
        let strategy = [FilterStrategy::Dpp, FilterStrategy::TopK, FilterStrategy::Random][strat];
        let candidates = stub_pool(n, 6, seed, false);
        let cfg = FilterConfig { k, strategy, ..FilterConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        let out = filter_tactics("g", &candidates, &cfg, &mut rng).unwrap();
        prop_assert_eq!(out.len(), k.min(n));
        // Selected tactics appear in input order, each one drawn from the pool.
        let mut cursor = 0usize;
        for t in &out {
            let pos = candidates[cursor..].iter().position(|c| c.text == t.text);
            prop_assert!(pos.is_some(), "{} out of order or foreign", t.text);
            cursor += pos.unwrap() + 1;
        }
    }

    #[test]
    fn top_k_is_argmax_consistent(seed in 0u64..500, n in 1usize..30, k in 1usize..10) {
        let candidates = stub_pool(n, 4, seed, false);
        let cfg = FilterConfig { k, strategy: FilterStrategy::TopK, ..FilterConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = filter_tactics("g", &candidates, &cfg, &mut rng).unwrap();
        // Logits here strictly decrease with index, so top-k is a prefix.
        let expect: Vec<String> = candidates.iter().take(k.min(n)).map(|c| c.text.clone()).collect();
        let got: Vec<String> = out.iter().map(|t| t.text.clone()).collect();
        prop_assert_eq!(got, expect);
    }
}
