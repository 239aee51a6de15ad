//! How likely a random axis-parallel isolation tree is to look at every
//! feature of a hidden outlier subspace.
//!
//! A tree path of depth `h` picks `h` split features uniformly at random with
//! replacement from `d`. An outlier hidden in `r` specific features can only
//! be isolated if all of them are picked. The hit probability `p(r, h)`
//! satisfies
//!
//! ```text
//! p(1, h) = 1 - (1 - 1/d)^h
//! p(r, h) = (r/d) sum_{i=1}^{h} (1 - r/d)^{i-1} p(r-1, h-i),   p(r, 0) = 0
//! ```
//!
//! and decays like `d^-r` for large `d`.

use rand::Rng as _;

use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubspaceQuery {
    pub d: usize,
    pub r: usize,
    pub max_depth: usize,
}

impl SubspaceQuery {
    pub fn new(d: usize, r: usize, max_depth: usize) -> Result<Self> {
        let q = Self { d, r, max_depth };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.r > self.d {
            return Err(Error::InvalidConfig(format!(
                "subspace size must lie in 1..={}, got {}",
                self.d, self.r
            )));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidConfig("depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// Closed form of `p(1, h)`.
pub fn single_feature_probability(d: usize, h: usize) -> f64 {
    -((h as f64) * (-1.0 / d as f64).ln_1p()).exp_m1()
}

/// `table[r][h]` for `r = 0..=r_max`, `h = 0..=h_max`, filled bottom-up with
/// `p(0, h) = 1`.
fn probability_table(d: usize, r_max: usize, h_max: usize) -> Vec<Vec<f64>> {
    let mut table = vec![vec![1.0; h_max + 1]];
    for r in 1..=r_max {
        let hit = r as f64 / d as f64;
        let miss = 1.0 - hit;
        // miss^(i-1) for i = 1..=h_max
        let mut miss_pow = Vec::with_capacity(h_max);
        let mut acc = 1.0;
        for _ in 0..h_max {
            miss_pow.push(acc);
            acc *= miss;
        }
        let prev = &table[r - 1];
        let row: Vec<f64> = (0..=h_max)
            .map(|h| {
                let s: f64 = (1..=h).map(|i| miss_pow[i - 1] * prev[h - i]).sum();
                (hit * s).clamp(0.0, 1.0)
            })
            .collect();
        table.push(row);
    }
    table
}

/// `p(r, h_M)`: probability that `h_M` uniform feature draws cover all `r`
/// features of a fixed subspace.
pub fn hidden_subspace_probability(q: &SubspaceQuery) -> Result<f64> {
    q.validate()?;
    Ok(probability_table(q.d, q.r, q.max_depth)[q.r][q.max_depth])
}

/// Fraction of `trials` in which `max_depth` uniform draws from `d` features
/// include every one of features `0..r`.
pub fn simulate_subspace_hit(q: &SubspaceQuery, trials: u64, seed: u64) -> Result<f64> {
    q.validate()?;
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let mut rng = rng::seeded(seed);
    let mut seen = vec![false; q.r];
    let mut hits = 0u64;
    for _ in 0..trials {
        seen.iter_mut().for_each(|s| *s = false);
        let mut missing = q.r;
        for _ in 0..q.max_depth {
            let f = rng.random_range(0..q.d);
            if f < q.r && !seen[f] {
                seen[f] = true;
                missing -= 1;
                if missing == 0 {
                    break;
                }
            }
        }
        hits += u64::from(missing == 0);
    }
    Ok(hits as f64 / trials as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRow {
    pub d: usize,
    pub probability: f64,
    /// `p * d^r`.
    pub scaled: f64,
    /// `scaled` divided by the previous row's `scaled` (`NaN` on the first row
    /// or after a zero).
    pub ratio: f64,
}

/// `p(r, h_M) d^r` over increasing `d`. The scaled values converge, so the
/// successive ratios approach 1.
pub fn decay_rate_check(r: usize, max_depth: usize, d_list: &[usize]) -> Result<Vec<DecayRow>> {
    if d_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("d values must be increasing".into()));
    }
    let mut rows: Vec<DecayRow> = Vec::with_capacity(d_list.len());
    for &d in d_list {
        let p = hidden_subspace_probability(&SubspaceQuery::new(d, r, max_depth)?)?;
        let scaled = p * (d as f64).powi(r as i32);
        let ratio = match rows.last() {
            Some(prev) if prev.scaled > 0.0 => scaled / prev.scaled,
            _ => f64::NAN,
        };
        rows.push(DecayRow {
            d,
            probability: p,
            scaled,
            ratio,
        });
    }
    Ok(rows)
}
