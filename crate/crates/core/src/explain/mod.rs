//! Feature explanations for a single suspected outlier.
//!
//! The explainer starts from the full feature set and repeatedly proposes to
//! drop a random feature. A drop that makes the point easier to isolate is
//! always taken; a drop that makes it harder is taken with a tempered
//! probability (or never, in greedy mode). The iteration at which a feature
//! leaves is its path length: relevant features survive longer.

mod dpp;
mod refine;

use rand::Rng as _;
use rayon::prelude::*;

use crate::dataset::Row;
use crate::detector::Model;
use crate::isolation::{score_sorted, ScoreFn};
use crate::metric::{sort_profile, ContributionCache, MetricConfig};
use crate::{rng, Error, Result};

pub use dpp::{dpp, DppRow, DppSummary};
pub use refine::{
    budget_matched_repetitions, refine, refinement_stage_sizes, Explanation, OffsetMode,
    RefineParams, Stage,
};

/// Stand-in for `|f_with|` when the current score is exactly zero.
pub const ZERO_SCORE_EPSILON: f64 = 1e-12;

/// Probability of accepting a drop whose score moves from `f_with` to
/// `f_without`: 1 if the score does not decrease, otherwise
/// `exp((f_without - f_with) / (|f_with| T))`.
///
/// Scores are negated split statistics and therefore usually negative; the
/// absolute value keeps a relative worsening `D` at `exp(-D / T)` whatever the
/// sign. A zero `f_with` is replaced by [`ZERO_SCORE_EPSILON`].
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must be rejected too
pub fn acceptance_probability(f_with: f64, f_without: f64, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    Ok(accept_prob(f_with, f_without, temperature))
}

#[inline]
fn accept_prob(f_with: f64, f_without: f64, temperature: f64) -> f64 {
    if f_without >= f_with {
        return 1.0;
    }
    let scale = if f_with == 0.0 {
        ZERO_SCORE_EPSILON
    } else {
        f_with.abs()
    };
    ((f_without - f_with) / (scale * temperature)).exp()
}

/// Temperature at which a relative worsening `delta` is accepted with
/// probability 0.9: `delta / ln(10/9)`.
pub fn temperature_from_delta(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "delta must be positive, got {delta}"
        )));
    }
    Ok(delta / (10.0f64 / 9.0).ln())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Temperature {
    Fixed(f64),
    /// `delta ~ U(min, max)` per run, converted with [`temperature_from_delta`].
    DeltaUniform { min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TixParams {
    /// Repetitions per ensemble member.
    pub repetitions: usize,
    /// Iteration cap; `None` means 50 times the number of explained features.
    pub max_iterations: Option<usize>,
    pub temperature: Temperature,
    /// Reject every drop that lowers the score.
    pub greedy: bool,
    pub score_fn: ScoreFn,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for TixParams {
    fn default() -> Self {
        Self {
            repetitions: 10,
            max_iterations: None,
            temperature: Temperature::DeltaUniform {
                min: 0.01,
                max: 0.015,
            },
            greedy: false,
            score_fn: ScoreFn::Variance,
            alpha: 1.0,
            seed: 0,
        }
    }
}

impl TixParams {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidConfig("M must be at least 1".into()));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::InvalidConfig("L must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        match self.temperature {
            Temperature::Fixed(t) if !(t > 0.0 && t.is_finite()) => Err(Error::InvalidConfig(
                format!("temperature must be positive, got {t}"),
            )),
            Temperature::DeltaUniform { min, max } if !(min > 0.0 && min <= max) => {
                Err(Error::InvalidConfig(format!(
                    "delta range must satisfy 0 < min <= max, got [{min}, {max}]"
                )))
            }
            _ => Ok(()),
        }
    }

    fn iteration_cap(&self, n_features: usize) -> usize {
        self.max_iterations.unwrap_or(50 * n_features)
    }
}

/// Path lengths of every explained feature in every (member, repetition) run.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLengthTable {
    /// Explained feature ids, in the order used by the other fields.
    pub features: Vec<usize>,
    pub n_members: usize,
    pub repetitions: usize,
    /// `lengths[run * features.len() + pos]`, `run = member * repetitions + rep`.
    lengths: Vec<u32>,
    /// Final iteration counter of each run; survivors carry this value.
    pub terminal: Vec<u32>,
    /// Mean path length per feature position.
    pub aggregate: Vec<f64>,
    /// Proposals evaluated while the current score was exactly zero.
    pub zero_score_events: usize,
}

impl PathLengthTable {
    /// Path length of the feature at `pos` in run (`member`, `rep`).
    pub fn entry(&self, pos: usize, member: usize, rep: usize) -> u32 {
        let run = member * self.repetitions + rep;
        self.lengths[run * self.features.len() + pos]
    }

    /// All entries of the feature at `pos`.
    pub fn entries(&self, pos: usize) -> Vec<u32> {
        let k = self.features.len();
        self.lengths.iter().skip(pos).step_by(k).copied().collect()
    }

    pub fn runs(&self) -> usize {
        self.n_members * self.repetitions
    }

    /// Feature ids, most relevant first; ties keep the lower id first.
    pub fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.features.len()).collect();
        order.sort_by(|&a, &b| {
            self.aggregate[b]
                .total_cmp(&self.aggregate[a])
                .then(self.features[a].cmp(&self.features[b]))
        });
        order.into_iter().map(|p| self.features[p]).collect()
    }

    /// Aggregate path length by feature id over `d` features (`NaN` for
    /// features that were not explained).
    pub fn scores_by_feature(&self, d: usize) -> Vec<f64> {
        let mut s = vec![f64::NAN; d];
        for (p, &f) in self.features.iter().enumerate() {
            s[f] = self.aggregate[p];
        }
        s
    }
}

/// Number of top-ranked features one must inspect to have seen every relevant
/// feature. Ties are resolved pessimistically: a relevant feature tied with
/// others counts as ranked after all of them.
pub fn minimal_subspace_size(scores: &[f64], relevant: &[usize]) -> Result<usize> {
    if relevant.is_empty() {
        return Err(Error::InvalidConfig("no relevant features given".into()));
    }
    let mut worst = 0;
    for &r in relevant {
        let s = *scores.get(r).ok_or_else(|| {
            Error::InvalidConfig(format!("relevant feature {r} outside {} scores", scores.len()))
        })?;
        if s.is_nan() {
            return Err(Error::InvalidConfig(format!("feature {r} has no score")));
        }
        worst = worst.max(scores.iter().filter(|&&v| v >= s).count());
    }
    Ok(worst)
}

/// Explains `x` over all features of the model.
///
/// `x` must already be on the model's schema (see [`Model::prepare`]). The
/// model must have been fitted without feature bagging so that every member
/// sees the same feature space.
pub fn tix(model: &Model, x: Row<'_>, params: &TixParams) -> Result<PathLengthTable> {
    let all: Vec<usize> = (0..model.d()).collect();
    tix_on(model, x, &all, params)
}

/// Explains `x` restricted to the given features.
pub fn tix_on(
    model: &Model,
    x: Row<'_>,
    features: &[usize],
    params: &TixParams,
) -> Result<PathLengthTable> {
    params.validate()?;
    if model.bagging {
        return Err(Error::InvalidConfig(
            "explanations need a model fitted without feature bagging".into(),
        ));
    }
    if x.numeric.len() != model.d_num || x.nominal.len() != model.d_nom {
        return Err(Error::DimensionMismatch {
            expected: model.d(),
            found: x.numeric.len() + x.nominal.len(),
        });
    }
    let mut features = features.to_vec();
    features.sort_unstable();
    features.dedup();
    // unit weights on the explained features
    let metric = MetricConfig::new(
        model.params.p,
        vec![1.0; model.d_num],
        vec![1.0; model.d_nom],
        features.clone(),
    )?;
    let cap = params.iteration_cap(features.len());
    let reps = params.repetitions;
    let n_members = model.n_members();

    let per_member: Vec<Vec<RunResult>> = model
        .subsamples
        .par_iter()
        .enumerate()
        .map(|(i, sub)| {
            let base = ContributionCache::new(x, &sub.data, &model.frequencies, &metric)?;
            Ok((0..reps)
                .map(|k| {
                    let seed = rng::derive(params.seed, &[i as u64, k as u64]);
                    run_once(base.clone(), &features, cap, params, seed)
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let k = features.len();
    let mut lengths = Vec::with_capacity(n_members * reps * k);
    let mut terminal = Vec::with_capacity(n_members * reps);
    let mut sums = vec![0u64; k];
    let mut zero_score_events = 0;
    for run in per_member.into_iter().flatten() {
        for (p, &v) in run.lengths.iter().enumerate() {
            sums[p] += u64::from(v);
        }
        lengths.extend_from_slice(&run.lengths);
        terminal.push(run.terminal);
        zero_score_events += run.zero_score_events;
    }
    let runs = (n_members * reps) as f64;
    let aggregate = sums.iter().map(|&s| s as f64 / runs).collect();
    if zero_score_events > 0 {
        log::warn!("{zero_score_events} proposals met an exactly zero score");
    }
    Ok(PathLengthTable {
        features,
        n_members,
        repetitions: reps,
        lengths,
        terminal,
        aggregate,
        zero_score_events,
    })
}

struct RunResult {
    lengths: Vec<u32>,
    terminal: u32,
    zero_score_events: usize,
}

fn profile_score(distances: &mut Vec<f64>, score_fn: ScoreFn, alpha: f64) -> f64 {
    distances.push(0.0);
    let dups = sort_profile(distances);
    score_sorted(distances, dups, score_fn, alpha).score
}

/// One elimination run against one member. `features` are the explained
/// feature ids (all active in `cache`).
fn run_once(
    mut cache: ContributionCache,
    features: &[usize],
    cap: usize,
    params: &TixParams,
    seed: u64,
) -> RunResult {
    let mut rng = rng::seeded(seed);
    let temperature = match params.temperature {
        Temperature::Fixed(t) => t,
        Temperature::DeltaUniform { min, max } => {
            let delta = if min == max {
                min
            } else {
                rng.random_range(min..max)
            };
            delta / (10.0f64 / 9.0).ln()
        }
    };
    let k = features.len();
    // positions still in play
    let mut alive: Vec<usize> = (0..k).collect();
    let mut lengths = vec![u32::MAX; k];
    let mut buf = Vec::with_capacity(cache.len() + 1);
    cache.fill_distances(&mut buf);
    let mut f_with = profile_score(&mut buf, params.score_fn, params.alpha);
    // scores of J minus each candidate, valid for the current J
    let mut candidate: Vec<Option<f64>> = vec![None; k];
    let mut known = 0usize;
    let mut zero_score_events = 0;
    let mut l = 0usize;

    while l < cap && alive.len() > 1 {
        if params.greedy && known == alive.len() {
            // every candidate was evaluated and rejected; nothing can change
            l = cap;
            break;
        }
        let slot = rng.random_range(0..alive.len());
        let pos = alive[slot];
        let f_without = match candidate[pos] {
            Some(v) => v,
            None => {
                cache
                    .fill_distances_without(features[pos], &mut buf)
                    .expect("candidate feature is active");
                let v = profile_score(&mut buf, params.score_fn, params.alpha);
                candidate[pos] = Some(v);
                known += 1;
                v
            }
        };
        let accept = if f_without >= f_with {
            true
        } else if params.greedy {
            false
        } else {
            if f_with == 0.0 {
                zero_score_events += 1;
            }
            let p = accept_prob(f_with, f_without, temperature);
            p > rng.random::<f64>()
        };
        if accept {
            cache
                .remove_feature(features[pos])
                .expect("candidate feature is active");
            alive.remove(slot);
            lengths[pos] = l as u32;
            f_with = f_without;
            candidate.iter_mut().for_each(|c| *c = None);
            known = 0;
        }
        l += 1;
    }
    let terminal = l as u32;
    for &pos in &alive {
        lengths[pos] = terminal;
    }
    RunResult {
        lengths,
        terminal,
        zero_score_events,
    }
}

/// Change of the expectation score (`alpha = 1`) when a feature that adds the
/// same amount `shift` to every distance is dropped, evaluated in closed form:
/// `-shift * sum_{i=2}^{n-1} (z_{i+1} - z_i) / (z_{i+1} (z_{i+1} - shift))`.
///
/// `z` is the sorted profile with the feature included (leading 0, no
/// duplicates) and `shift` must be smaller than `z_2`.
pub fn constant_shift_score_change(z: &[f64], shift: f64) -> Result<f64> {
    if z.len() < 2 {
        return Err(Error::TooShort { min: 2, len: z.len() });
    }
    if !(shift >= 0.0 && shift < z[1]) {
        return Err(Error::InvalidConfig(format!(
            "shift must lie in [0, {}), got {shift}",
            z[1]
        )));
    }
    let sum: f64 = z[1..]
        .windows(2)
        .map(|w| (w[1] - w[0]) / (w[1] * (w[1] - shift)))
        .sum();
    Ok(-shift * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate, Dataset, GeneratorSpec};
    use crate::detector::{fit, Bagging, ModelParams};
    use crate::isolation::expected_splits;

    fn cross_model(d: usize, n_subsamples: usize, seed: u64) -> (Model, Dataset, usize) {
        let g = generate(&GeneratorSpec::cross(400, d, seed)).unwrap();
        let params = ModelParams {
            n_subsamples,
            bagging: Bagging::Off,
            seed,
            ..Default::default()
        };
        let model = fit(&g.data, &params).unwrap();
        let row = g.truth[0].row;
        (model, g.data, row)
    }

    #[test]
    fn acceptance_examples() {
        assert_eq!(acceptance_probability(-2.0, -2.0, 0.1).unwrap(), 1.0);
        assert_eq!(acceptance_probability(-2.0, -1.0, 0.1).unwrap(), 1.0);
        let t = temperature_from_delta(0.01).unwrap();
        let p = acceptance_probability(-1.0, -1.01, t).unwrap();
        assert!((p - 0.9).abs() < 1e-12);
        let p = acceptance_probability(1.0, 0.99, t).unwrap();
        assert!((p - 0.9).abs() < 1e-12);
        assert!(acceptance_probability(-1.0, -1.5, 1e-6).unwrap() < 1e-100);
        assert!(acceptance_probability(-1.0, -1.5, 0.0).is_err());
        // zero current score falls back to the epsilon scale
        let p = acceptance_probability(0.0, -1e-14, 1.0).unwrap();
        assert!((p - (-0.01f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn temperature_examples() {
        let t = temperature_from_delta(0.01).unwrap();
        assert!((t - 0.094912).abs() < 1e-6);
        let unit = temperature_from_delta((10.0f64 / 9.0).ln()).unwrap();
        assert!((unit - 1.0).abs() < 1e-15);
        assert!((temperature_from_delta(0.02).unwrap() - 2.0 * t).abs() < 1e-15);
        assert!(temperature_from_delta(0.0).is_err());
        assert!(temperature_from_delta(-1.0).is_err());
    }

    #[test]
    fn minimal_subspace_examples() {
        // relevant features ranked fifth and sixth
        let s = [5.0, 4.0, 3.0, 9.0, 8.0, 1.0, 2.0, 0.5];
        assert_eq!(minimal_subspace_size(&s, &[2, 6]).unwrap(), 6);
        assert_eq!(minimal_subspace_size(&s, &[3, 4]).unwrap(), 2);
        // a tie with an irrelevant feature counts against us
        assert_eq!(minimal_subspace_size(&[1.0, 1.0, 0.0], &[0]).unwrap(), 2);
        assert!(minimal_subspace_size(&s, &[]).is_err());
    }

    #[test]
    fn single_feature_terminates_immediately() {
        let data = Dataset::from_rows(&(0..30).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let model = fit(&data, &ModelParams { n_subsamples: 3, psi_min: 10, psi_max: 20, ..Default::default() })
            .unwrap();
        let t = tix(&model, data.row(29), &TixParams { repetitions: 2, ..Default::default() }).unwrap();
        assert_eq!(t.features, vec![0]);
        assert_eq!(t.entries(0), vec![0; 6]);
        assert_eq!(t.aggregate, vec![0.0]);
    }

    #[test]
    fn path_lengths_are_complete() {
        let (model, data, row) = cross_model(6, 8, 1);
        let params = TixParams {
            repetitions: 3,
            seed: 5,
            ..Default::default()
        };
        let t = tix(&model, data.row(row), &params).unwrap();
        assert_eq!(t.runs(), 24);
        for pos in 0..6 {
            assert_eq!(t.entries(pos).len(), 24);
        }
        for i in 0..8 {
            for k in 0..3 {
                let run = i * 3 + k;
                let term = t.terminal[run];
                let mut survivors = 0;
                for pos in 0..6 {
                    let v = t.entry(pos, i, k);
                    assert!(v <= term);
                    if v == term {
                        survivors += 1;
                    }
                }
                assert!(survivors >= 1);
                assert!(term as usize <= 50 * 6);
            }
        }
        let again = tix(&model, data.row(row), &params).unwrap();
        assert_eq!(t, again);
    }

    #[test]
    fn bagged_models_are_rejected() {
        let g = generate(&GeneratorSpec::cross(100, 8, 2)).unwrap();
        let model = fit(&g.data, &ModelParams { n_subsamples: 2, ..Default::default() }).unwrap();
        assert!(model.bagging);
        assert!(tix(&model, g.data.row(0), &TixParams::default()).is_err());
    }

    #[test]
    fn cross_outlier_relevant_features_rank_first() {
        let (model, data, row) = cross_model(5, 30, 3);
        let t = tix(&model, data.row(row), &TixParams { repetitions: 3, ..Default::default() }).unwrap();
        let size = minimal_subspace_size(&t.scores_by_feature(5), &[3, 4]).unwrap();
        assert_eq!(size, 2, "aggregate {:?}", t.aggregate);
    }

    #[test]
    fn greedy_shortcut_matches_full_loop() {
        // with the cap reached by rejections only, both paths give terminal = cap
        let (model, data, row) = cross_model(5, 4, 4);
        let params = TixParams {
            repetitions: 2,
            greedy: true,
            max_iterations: Some(40),
            ..Default::default()
        };
        let t = tix(&model, data.row(row), &params).unwrap();
        for (run, &term) in t.terminal.iter().enumerate() {
            let survivors = (0..5).filter(|&p| t.entries(p)[run] == term).count();
            assert!(term == 40 || survivors == 1);
        }
    }

    #[test]
    fn constant_shift_matches_recomputed_scores() {
        let mut z = vec![0.0, 0.5, 0.9, 1.4, 2.2, 3.0, 3.1];
        for shift in [1e-6, 1e-3, 0.1, 0.4] {
            let without: Vec<f64> = std::iter::once(0.0)
                .chain(z[1..].iter().map(|v| v - shift))
                .collect();
            let f_with = -expected_splits(&z, 1.0).unwrap();
            let f_without = -expected_splits(&without, 1.0).unwrap();
            let closed = constant_shift_score_change(&z, shift).unwrap();
            assert!(closed < 0.0);
            assert!(((f_without - f_with) - closed).abs() < 1e-12);
        }
        assert_eq!(constant_shift_score_change(&z, 0.0).unwrap(), 0.0);
        z[1] = 1e-3;
        assert!(constant_shift_score_change(&z, 1e-3).is_err());
    }
}
