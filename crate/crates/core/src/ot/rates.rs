//! Expected `W_1` between an empirical measure and its population, by size.

use serde::{Deserialize, Serialize};

use super::{w1_distance, w1_sorted_uniform};
use crate::error::{Error, Result};
use crate::harness::{RateRow, RateSeries};
use crate::measures::{sample_gaussian, sample_latent, EmpiricalMeasure, LatentSpec};
use crate::par;
use crate::rng::Seed;

/// Population law for [`empirical_rate_table`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateLaw {
    UniformCube,
    StandardGaussian,
}

impl RateLaw {
    fn sample(self, dim: usize, n: usize, seed: Seed) -> Vec<f64> {
        match self {
            RateLaw::UniformCube => sample_latent(LatentSpec { dim }, n, seed),
            RateLaw::StandardGaussian => sample_gaussian(n, dim, seed),
        }
    }
}

/// Proxy size multiplier on the line.
pub const PROXY_FACTOR: usize = 64;

/// Mean `W_1(ℙ_n, P)` over replicates for each `n`.
///
/// On the line the population is replaced by a fresh sample of size
/// `64 · max(n_grid)` per cell, and the distance is the exact sorted-CDF
/// integral. For `D ≥ 2` that proxy is out of reach for exact transport, so
/// each cell uses an independent second sample of the same size `n`; the
/// two-sample distance has the same order in `n`.
pub fn empirical_rate_table(dim: usize, n_grid: &[usize], reps: usize, law: RateLaw, seed: Seed) -> Result<RateSeries> {
    if dim == 0 {
        return Err(Error::InvalidSpec("dimension must be >= 1".into()));
    }
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] == 0 {
        return Err(Error::InvalidSpec(
            "n_grid must be nonempty, positive and strictly increasing".into(),
        ));
    }
    let big = PROXY_FACTOR * n_grid[n_grid.len() - 1];
    let cells: Vec<(usize, usize)> = n_grid.iter().flat_map(|&n| (0..reps).map(move |r| (n, r))).collect();
    let values = par::try_map_range(cells.len(), |k| {
        let (n, r) = cells[k];
        rate_cell(dim, n, big, law, seed.child(n as u64).child(r as u64))
    })?;
    let rows = cells
        .iter()
        .zip(values)
        .map(|(&(n, rep), value)| RateRow { n, rep, value })
        .collect();
    Ok(RateSeries::new(rows))
}

/// One `(n, replicate)` cell of the table.
pub fn rate_cell(dim: usize, n: usize, proxy: usize, law: RateLaw, seed: Seed) -> Result<f64> {
    let x = law.sample(dim, n, seed.named("sample"));
    if dim == 1 {
        let mut x = x;
        let mut y = law.sample(1, proxy, seed.named("proxy"));
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        return Ok(w1_sorted_uniform(&x, &y));
    }
    let y = law.sample(dim, n, seed.named("proxy"));
    w1_distance(&EmpiricalMeasure::new(dim, x)?, &EmpiricalMeasure::new(dim, y)?)
}
