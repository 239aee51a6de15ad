//! Closed-form statistics of the random split process over a sorted distance
//! vector, plus a Monte Carlo simulator of the same process.
//!
//! Given sorted values `z_1 < ... < z_n`, a split position is drawn between
//! neighbours with probability proportional to `g_i = (z_{i+1} - z_i)^alpha`,
//! and the process recurses into the piece holding `z_1`. The split count `h`
//! until `z_1` stands alone has
//!
//! ```text
//! E[h] = 1 + sum_{i=2}^{n-1} q_i,   V[h] = sum_{i=2}^{n-1} q_i (1 - q_i)
//! ```
//!
//! with `q_i = g_i / (g_1 + ... + g_i)`. Every step is an independent
//! Bernoulli(`q_i`) trial, so the moment generating function factorises as
//! `prod_i (1 + (e^u - 1) q_i)`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::metric::DistanceProfile;
use crate::rng;
use crate::{Error, Result};

/// Statistic of the split count used as the outlier score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreFn {
    Expectation,
    Variance,
}

impl ScoreFn {
    /// Amount added per exact duplicate of the query.
    pub fn duplicate_penalty(self) -> f64 {
        match self {
            ScoreFn::Expectation => 1.0,
            ScoreFn::Variance => 0.25,
        }
    }
}

/// How the gap exponent is chosen for each ensemble member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMode {
    Fixed(f64),
    Uniform { min: f64, max: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub score_fn: ScoreFn,
    pub alpha_mode: AlphaMode,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            score_fn: ScoreFn::Variance,
            alpha_mode: AlphaMode::Fixed(1.0),
        }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |a: f64| a > 0.0 && a.is_finite();
        match self.alpha_mode {
            AlphaMode::Fixed(a) if !ok(a) => Err(Error::InvalidConfig(format!(
                "alpha must be positive, got {a}"
            ))),
            AlphaMode::Uniform { min, max } if !(ok(min) && ok(max) && min <= max) => {
                Err(Error::InvalidConfig(format!(
                    "alpha range must satisfy 0 < min <= max, got [{min}, {max}]"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Draws an exponent: the fixed value, or a uniform draw from the range.
    pub fn draw_alpha<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.alpha_mode {
            AlphaMode::Fixed(a) => a,
            AlphaMode::Uniform { min, max } if min == max => min,
            AlphaMode::Uniform { min, max } => rng.random_range(min..max),
        }
    }
}

/// Mean and variance of the split count, from simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitStats {
    pub mean: f64,
    /// Sample variance (ddof = 1); 0 for a single trial.
    pub variance: f64,
    pub trials: u64,
    /// Fourth central moment, for the standard error of `variance`.
    pub fourth_moment: f64,
}

impl SplitStats {
    pub fn std_error_mean(&self) -> f64 {
        (self.variance / self.trials as f64).sqrt()
    }

    /// Large-sample standard error of the sample variance.
    pub fn std_error_variance(&self) -> f64 {
        let n = self.trials as f64;
        let s2 = self.variance;
        let v = (self.fourth_moment - s2 * s2 * (n - 3.0) / (n - 1.0)) / n;
        v.max(0.0).sqrt()
    }
}

/// Score of one profile and whether it fell back to the all-duplicate case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsolationScore {
    pub score: f64,
    pub degenerate: bool,
}

fn validate(z: &[f64], alpha: f64) -> Result<()> {
    if z.len() < 2 {
        return Err(Error::TooShort { min: 2, len: z.len() });
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    if let Some(v) = z.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig(format!("non-finite value {v}")));
    }
    match z.windows(2).position(|w| w[1] <= w[0]) {
        Some(i) => Err(Error::NonMonotone { index: i + 1 }),
        None => Ok(()),
    }
}

const TINY_GAP: f64 = 1e-300;

/// Gap weights `g_i`. For `alpha != 1` the gaps are divided by the largest
/// one first, which keeps `^alpha` away from under/overflow and leaves every
/// ratio `q_i` unchanged.
fn gap_weights(z: &[f64], alpha: f64, out: &mut Vec<f64>) {
    out.clear();
    out.extend(z.windows(2).map(|w| {
        let g = w[1] - w[0];
        if g < TINY_GAP {
            0.0
        } else {
            g
        }
    }));
    if alpha != 1.0 {
        let max = out.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            for g in out.iter_mut() {
                *g = (*g / max).powf(alpha);
            }
        }
    }
}

/// Calls `f(q_i)` for `i = 2..n-1` (1-based), `q_i = g_i / G_{i+1}`.
#[inline]
fn for_each_ratio(z: &[f64], alpha: f64, mut f: impl FnMut(f64)) {
    if alpha == 1.0 {
        // fast path without the weight buffer
        let mut total = z[1] - z[0];
        for w in z[1..].windows(2) {
            let g = w[1] - w[0];
            let g = if g < TINY_GAP { 0.0 } else { g };
            total += g;
            f(if total > 0.0 { g / total } else { 0.0 });
        }
    } else {
        let mut g = Vec::with_capacity(z.len());
        gap_weights(z, alpha, &mut g);
        let mut total = g[0];
        for &gi in &g[1..] {
            total += gi;
            f(if total > 0.0 { gi / total } else { 0.0 });
        }
    }
}

fn expectation_unchecked(z: &[f64], alpha: f64) -> f64 {
    let mut e = 1.0;
    for_each_ratio(z, alpha, |q| e += q);
    e
}

fn variance_unchecked(z: &[f64], alpha: f64) -> f64 {
    let mut v = 0.0;
    for_each_ratio(z, alpha, |q| v += q * (1.0 - q));
    v
}

/// Natural log of the moment generating function `E[e^{u h}]`.
pub fn log_split_mgf(z: &[f64], u: f64, alpha: f64) -> Result<f64> {
    validate(z, alpha)?;
    let c = u.exp_m1();
    // first split is forced: factor e^u
    let mut acc = u;
    for_each_ratio(z, alpha, |q| acc += (c * q).ln_1p());
    Ok(acc)
}

/// Moment generating function `prod_{i=1}^{n-1} (e^u g_i + G_i) / G_{i+1}`.
pub fn split_mgf(z: &[f64], u: f64, alpha: f64) -> Result<f64> {
    Ok(log_split_mgf(z, u, alpha)?.exp())
}

/// `E[h] = 1 + sum_{i=2}^{n-1} g_i / G_{i+1}`.
pub fn expected_splits(z: &[f64], alpha: f64) -> Result<f64> {
    validate(z, alpha)?;
    Ok(expectation_unchecked(z, alpha))
}

/// `V[h] = sum_{i=2}^{n-1} q_i (1 - q_i)`.
pub fn variance_splits(z: &[f64], alpha: f64) -> Result<f64> {
    validate(z, alpha)?;
    Ok(variance_unchecked(z, alpha))
}

/// Score of a sorted profile with `duplicates` extra zeros after the leading
/// one. Interior ties stay in place and contribute zero-weight gaps.
pub(crate) fn score_sorted(
    distances: &[f64],
    duplicates: usize,
    score_fn: ScoreFn,
    alpha: f64,
) -> IsolationScore {
    let core = &distances[duplicates.min(distances.len())..];
    let penalty = duplicates as f64 * score_fn.duplicate_penalty();
    if core.len() < 2 {
        return IsolationScore {
            score: -penalty,
            degenerate: true,
        };
    }
    let stat = match score_fn {
        ScoreFn::Expectation => expectation_unchecked(core, alpha),
        ScoreFn::Variance => variance_unchecked(core, alpha),
    };
    IsolationScore {
        score: -(stat + penalty),
        degenerate: false,
    }
}

/// Negated split statistic of a profile, larger meaning more anomalous.
///
/// Each exact duplicate of the query adds 1 (expectation) or 0.25 (variance)
/// before negation. A profile made of zeros only has statistic 0 and is
/// flagged degenerate.
pub fn isolation_score(
    profile: &DistanceProfile,
    score_fn: ScoreFn,
    alpha: f64,
) -> Result<IsolationScore> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    Ok(score_sorted(
        profile.distances(),
        profile.duplicate_count(),
        score_fn,
        alpha,
    ))
}

/// Runs the split process `trials` times.
pub fn simulate_splits(z: &[f64], alpha: f64, trials: u64, seed: u64) -> Result<SplitStats> {
    validate(z, alpha)?;
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let mut g = Vec::new();
    gap_weights(z, alpha, &mut g);
    // prefix[k] = g_1 + ... + g_{k+1}
    let prefix: Vec<f64> = g
        .iter()
        .scan(0.0, |s, &x| {
            *s += x;
            Some(*s)
        })
        .collect();
    let mut rng = rng::seeded(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    let mut counts = Vec::with_capacity(trials as usize);
    for _ in 0..trials {
        // the piece holding z_1 is always a prefix z_1..z_len
        let mut len = z.len();
        let mut h = 0u32;
        while len > 1 {
            let total = prefix[len - 2];
            let u = rng.random::<f64>() * total;
            let cut = prefix[..len - 1].partition_point(|&p| p <= u);
            // cut = number of points left of the split
            len = (cut + 1).min(len - 1);
            h += 1;
        }
        let h = f64::from(h);
        sum += h;
        sum_sq += h * h;
        counts.push(h);
    }
    let n = trials as f64;
    let mean = sum / n;
    let variance = if trials > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    let fourth_moment = counts.iter().map(|h| (h - mean).powi(4)).sum::<f64>() / n;
    Ok(SplitStats {
        mean,
        variance,
        trials,
        fourth_moment,
    })
}
