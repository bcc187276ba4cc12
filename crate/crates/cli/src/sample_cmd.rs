//! `dppsearch sample-dpp`: draw fixed-size subsets from a kernel file and,
//! for small kernels, compare against the exact law.

use std::collections::BTreeMap;
use std::path::PathBuf;

use dppsearch::dpp::{
    eigendecompose, exact_k_dpp_pmf, sample_k_dpp, total_variation, Kernel, DEFAULT_CLAMP_TOL,
    ORACLE_MAX_ORDER,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

#[derive(clap::Args, Debug)]
pub struct SampleArgs {
    /// Kernel file: JSON with order and row-major entries.
    #[arg(long)]
    kernel: PathBuf,
    /// Subset size.
    #[arg(long)]
    k: usize,
    /// Number of subsets to draw.
    #[arg(long)]
    n_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file for the samples (JSON).
    #[arg(long)]
    output: PathBuf,
    /// Also compute the exact subset law and the empirical TV distance
    /// (kernels up to order 12).
    #[arg(long)]
    exact: bool,
}

#[derive(Debug, Deserialize, Serialize)]
struct KernelFile {
    order: usize,
    entries: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct PmfEntry {
    subset: Vec<usize>,
    probability: f64,
}

#[derive(Debug, Serialize)]
struct SampleFile {
    order: usize,
    k: usize,
    n_samples: usize,
    seed: u64,
    samples: Vec<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle_pmf: Option<Vec<PmfEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tv_distance: Option<f64>,
}

pub fn run(args: SampleArgs) -> CliResult {
    let text = std::fs::read_to_string(&args.kernel)
        .map_err(|e| CliError::usage(format!("kernel {}: {e}", args.kernel.display())))?;
    let file: KernelFile = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("kernel {}: {e}", args.kernel.display())))?;
    let kernel = Kernel::from_row_major(file.order, &file.entries)
        .map_err(|e| CliError::usage(format!("kernel {}: {e}", args.kernel.display())))?;

    if args.k == 0 || args.k > kernel.order() {
        return Err(CliError::usage(format!(
            "k must be in 1..={}, got {}",
            kernel.order(),
            args.k
        )));
    }
    if args.exact && kernel.order() > ORACLE_MAX_ORDER {
        return Err(CliError::usage(format!(
            "--exact enumerates all subsets and allows order <= {ORACLE_MAX_ORDER}, got {}",
            kernel.order()
        )));
    }

    let decomp = eigendecompose(&kernel, DEFAULT_CLAMP_TOL)
        .map_err(|e| CliError::usage(format!("kernel {}: {e}", args.kernel.display())))?;
    if args.k > decomp.rank() {
        return Err(CliError::runtime(format!(
            "k={} exceeds the kernel rank {}",
            args.k,
            decomp.rank()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut samples = Vec::with_capacity(args.n_samples);
    for _ in 0..args.n_samples {
        let subset = sample_k_dpp(&decomp, args.k, &mut rng)
            .map_err(|e| CliError::runtime(format!("sampling: {e}")))?;
        samples.push(subset);
    }

    let (oracle_pmf, tv_distance) = if args.exact {
        let oracle = exact_k_dpp_pmf(&kernel, args.k)
            .map_err(|e| CliError::usage(format!("kernel {}: {e}", args.kernel.display())))?;
        let mut empirical: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for s in &samples {
            *empirical.entry(s.clone()).or_insert(0.0) += 1.0;
        }
        for v in empirical.values_mut() {
            *v /= samples.len().max(1) as f64;
        }
        let tv = total_variation(&oracle, &empirical);
        let pmf = oracle
            .into_iter()
            .map(|(subset, probability)| PmfEntry {
                subset,
                probability,
            })
            .collect();
        (Some(pmf), Some(tv))
    } else {
        (None, None)
    };

    let out = SampleFile {
        order: kernel.order(),
        k: args.k,
        n_samples: args.n_samples,
        seed: args.seed,
        samples,
        oracle_pmf,
        tv_distance,
    };
    let json = serde_json::to_string_pretty(&out)
        .map_err(|e| CliError::runtime(format!("serializing samples: {e}")))?;
    std::fs::write(&args.output, json + "\n")
        .map_err(|e| CliError::runtime(format!("writing {}: {e}", args.output.display())))?;
    match out.tv_distance {
        Some(tv) => println!(
            "wrote {} samples to {}; TV distance to exact law = {tv:.4}",
            out.n_samples,
            args.output.display()
        ),
        None => println!(
            "wrote {} samples to {}",
            out.n_samples,
            args.output.display()
        ),
    }
    Ok(())
}
