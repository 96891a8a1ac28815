//! Deterministic aggregation helpers shared by the Monte Carlo drivers.
//!
//! Work items are evaluated in parallel but always collected in index order
//! and reduced by pairwise summation over that order, so every statistic is
//! bit-identical for any worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Pairwise (cascade) summation in index order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2..=8 => xs.iter().fold(0.0, |a, &x| a + x),
        n => {
            let (l, r) = xs.split_at(n / 2);
            pairwise_sum(l) + pairwise_sum(r)
        }
    }
}

/// Mean, sample standard deviation and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub std_error: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { n, mean: f64::NAN, std_dev: f64::NAN, std_error: f64::NAN };
        }
        let mean = pairwise_sum(xs) / n as f64;
        let std_dev = if n > 1 {
            let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
            (pairwise_sum(&sq) / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { n, mean, std_dev, std_error: std_dev / (n as f64).sqrt() }
    }
}

/// Evaluates `f(0..n)` on a pool of `workers` threads and returns the
/// results in index order. `workers = 0` means one thread per core.
pub fn par_indexed<T, F>(workers: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(&f).collect()))
}
