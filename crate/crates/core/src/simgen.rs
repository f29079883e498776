//! Random interbank networks and asset shocks.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::FinancialNetwork;

/// Generator identity recorded in experiment metadata.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9), seeds mixed with SplitMix64";

/// SplitMix64 finaliser.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent substream seed from a base seed and a path of
/// labels (trial index, purpose, ...).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratorConfig {
    pub n: usize,
    /// Expected out-degree `d`; each ordered pair is an arc with probability `d/(n−1)`.
    pub avg_degree: f64,
    /// Liabilities are drawn uniformly from `(0, p_max)`.
    pub p_max: f64,
    /// Share of outside assets in total assets.
    pub beta: f64,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn new(n: usize, avg_degree: f64, seed: u64) -> Self {
        Self {
            n,
            avg_degree,
            p_max: 100.0,
            beta: 0.05,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        let max_degree = (self.n - 1) as f64;
        if !(0.0..=max_degree).contains(&self.avg_degree) {
            return Err(Error::Config(format!(
                "average degree {} outside [0, {max_degree}]",
                self.avg_degree
            )));
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return Err(Error::Config(format!("p_max must be positive, got {}", self.p_max)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        Ok(())
    }
}

/// Samples a network.
///
/// Each bank first gets the smallest outside assets that keep its balance
/// sheet nonnegative at nominal payments, `max(0, p̄_i − Σ_k p̄_ki)`. The
/// target outside total is `E = β/(1−β)·I` with `I` the interbank total;
/// whatever of `E` the minimal allocations leave over is split evenly. When
/// the minimal allocations already exceed `E` nothing is added.
pub fn generate(cfg: &GeneratorConfig) -> Result<FinancialNetwork> {
    cfg.validate()?;
    let n = cfg.n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let prob = if n > 1 { cfg.avg_degree / (n - 1) as f64 } else { 0.0 };
    let mut liab = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j || rng.random::<f64>() >= prob {
                continue;
            }
            liab[(i, j)] = loop {
                let w = rng.random::<f64>() * cfg.p_max;
                if w > 0.0 {
                    break w;
                }
            };
        }
    }
    let interbank: f64 = liab.sum();
    let external = cfg.beta / (1.0 - cfg.beta) * interbank;
    let mut assets = DVector::from_fn(n, |i, _| {
        (liab.row(i).sum() - liab.column(i).sum()).max(0.0)
    });
    let remainder = (external - assets.sum()).max(0.0) / n as f64;
    assets.add_scalar_mut(remainder);
    FinancialNetwork::unshocked(liab, assets)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ShockConfig {
    pub n_s: usize,
    pub seed: u64,
}

/// The first `n_s` entries of a seeded random permutation, so shocks with
/// the same seed are nested as `n_s` grows.
pub fn shocked_nodes(n: usize, shock: &ShockConfig) -> Result<Vec<usize>> {
    if shock.n_s > n {
        return Err(Error::Config(format!(
            "cannot shock {} of {n} banks",
            shock.n_s
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(shock.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order.truncate(shock.n_s);
    order.sort_unstable();
    Ok(order)
}

/// Wipes out the outside assets of `n_s` randomly chosen banks.
pub fn apply_shock(net: &FinancialNetwork, shock: &ShockConfig) -> Result<FinancialNetwork> {
    let mut assets = net.nominal_assets().clone();
    for i in shocked_nodes(net.n(), shock)? {
        assets[i] = 0.0;
    }
    net.with_assets(assets)
}
