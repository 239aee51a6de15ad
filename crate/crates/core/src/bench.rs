//! Experiment protocols shared by the command-line tool and the test suites:
//! explanation quality on the Cross dataset, refinement under a matched
//! budget, detection on hidden subspaces, the two-cluster ranking check and
//! the scoring-time sweep.

use std::time::Instant;

use crate::dataset::{generate, GeneratorSpec};
use crate::detector::{auc, fit, Bagging, ModelParams};
use crate::explain::{
    budget_matched_repetitions, minimal_subspace_size, refine, refinement_stage_sizes, tix,
    RefineParams, TixParams,
};
use crate::isolation::ScoreConfig;
use crate::{rng, Error, Result};

/// Explanation mode compared on the Cross dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExplainMode {
    Annealing,
    Greedy,
}

impl ExplainMode {
    pub fn name(self) -> &'static str {
        match self {
            ExplainMode::Annealing => "sa",
            ExplainMode::Greedy => "greedy",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossConfig {
    pub n: usize,
    pub executions: usize,
    pub model: ModelParams,
    pub tix: TixParams,
    pub seed: u64,
}

impl Default for CrossConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            executions: 10,
            model: ModelParams {
                bagging: Bagging::Off,
                ..Default::default()
            },
            tix: TixParams::default(),
            seed: 0,
        }
    }
}

/// Minimal subspace sizes of one (d, mode) cell over all executions.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCell {
    pub d: usize,
    pub mode: ExplainMode,
    pub sizes: Vec<usize>,
}

impl CrossCell {
    pub fn mean(&self) -> f64 {
        self.sizes.iter().sum::<usize>() as f64 / self.sizes.len() as f64
    }

    /// Sample standard deviation (0 for a single execution).
    pub fn std(&self) -> f64 {
        let n = self.sizes.len() as f64;
        if self.sizes.len() < 2 {
            return 0.0;
        }
        let m = self.mean();
        let ss: f64 = self.sizes.iter().map(|&s| (s as f64 - m).powi(2)).sum();
        (ss / (n - 1.0)).sqrt()
    }

    pub fn count_equal(&self, size: usize) -> usize {
        self.sizes.iter().filter(|&&s| s == size).count()
    }
}

/// Data, model and explanation seeds of execution `e` at dimension `d`.
/// Both modes share them so that their results are paired.
fn execution_seeds(base: u64, d: usize, e: usize) -> (u64, u64, u64) {
    let s = rng::derive(base, &[d as u64, e as u64]);
    (s, rng::derive(s, &[1]), rng::derive(s, &[2]))
}

/// Runs the Cross protocol for one dimension and mode: per execution a fresh
/// dataset with one planted outlier, a model on the full feature space and
/// an explanation of the outlier; records the minimal subspace holding both
/// relevant features.
pub fn cross_experiment(cfg: &CrossConfig, d: usize, mode: ExplainMode) -> Result<CrossCell> {
    let mut sizes = Vec::with_capacity(cfg.executions);
    for e in 0..cfg.executions {
        let (data_seed, model_seed, tix_seed) = execution_seeds(cfg.seed, d, e);
        let g = generate(&GeneratorSpec::cross(cfg.n, d, data_seed))?;
        let truth = &g.truth[0];
        let model = fit(
            &g.data,
            &ModelParams {
                bagging: Bagging::Off,
                seed: model_seed,
                ..cfg.model.clone()
            },
        )?;
        let params = TixParams {
            greedy: mode == ExplainMode::Greedy,
            seed: tix_seed,
            ..cfg.tix.clone()
        };
        let table = tix(&model, g.data.row(truth.row), &params)?;
        sizes.push(minimal_subspace_size(
            &table.scores_by_feature(d),
            &truth.features,
        )?);
    }
    Ok(CrossCell { d, mode, sizes })
}

/// Paired minimal subspace sizes with and without refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinementComparison {
    pub d: usize,
    pub plain_repetitions: usize,
    pub refined_repetitions: usize,
    pub stage_sizes: Vec<usize>,
    pub plain: Vec<usize>,
    pub refined: Vec<usize>,
}

impl RefinementComparison {
    /// Executions where refinement did at least as well as a single pass.
    pub fn refined_not_worse(&self) -> usize {
        self.plain
            .iter()
            .zip(&self.refined)
            .filter(|(p, r)| r <= p)
            .count()
    }
}

/// Compares one annealing pass with `cfg.tix.repetitions` repetitions against
/// refinement whose repetitions are scaled down so both spend about the same
/// number of elimination runs.
pub fn refinement_experiment(
    cfg: &CrossConfig,
    d: usize,
    refine_params: &RefineParams,
) -> Result<RefinementComparison> {
    let stage_sizes = refinement_stage_sizes(d, refine_params.beta, refine_params.k_min);
    let refined_repetitions = budget_matched_repetitions(cfg.tix.repetitions, &stage_sizes);
    let mut plain = Vec::with_capacity(cfg.executions);
    let mut refined = Vec::with_capacity(cfg.executions);
    for e in 0..cfg.executions {
        let (data_seed, model_seed, tix_seed) = execution_seeds(cfg.seed, d, e);
        let g = generate(&GeneratorSpec::cross(cfg.n, d, data_seed))?;
        let truth = &g.truth[0];
        let model = fit(
            &g.data,
            &ModelParams {
                bagging: Bagging::Off,
                seed: model_seed,
                ..cfg.model.clone()
            },
        )?;
        let x = g.data.row(truth.row);
        let single = TixParams {
            greedy: false,
            seed: tix_seed,
            ..cfg.tix.clone()
        };
        let table = tix(&model, x, &single)?;
        plain.push(minimal_subspace_size(
            &table.scores_by_feature(d),
            &truth.features,
        )?);
        let staged = TixParams {
            repetitions: refined_repetitions,
            ..single
        };
        let explanation = refine(&model, x, &staged, refine_params)?;
        refined.push(minimal_subspace_size(&explanation.scores, &truth.features)?);
    }
    Ok(RefinementComparison {
        d,
        plain_repetitions: cfg.tix.repetitions,
        refined_repetitions,
        stage_sizes,
        plain,
        refined,
    })
}

/// AUC of the detector on freshly generated hidden-subspace data, one value
/// per run.
pub fn hidden_subspace_auc(
    n: usize,
    d: usize,
    runs: usize,
    params: &ModelParams,
    seed: u64,
) -> Result<Vec<f64>> {
    (0..runs)
        .map(|run| {
            let s = rng::derive(seed, &[run as u64]);
            let g = generate(&GeneratorSpec::hidden_subspace(n, d, s))?;
            let labels = g
                .data
                .labels()
                .ok_or_else(|| Error::Schema("generator produced no labels".into()))?
                .to_vec();
            let model = fit(
                &g.data,
                &ModelParams {
                    seed: rng::derive(s, &[1]),
                    ..params.clone()
                },
            )?;
            auc(&model.score_all(&g.data)?.scores, &labels)
        })
        .collect()
}

/// Worst rank (1 = highest score) among the planted outliers of the
/// two-cluster data, scored by a single member holding the whole dataset.
pub fn two_cluster_worst_rank(n: usize, score: ScoreConfig, seed: u64) -> Result<usize> {
    let g = generate(&GeneratorSpec::two_clusters(n, seed))?;
    let params = ModelParams {
        n_subsamples: 1,
        psi_min: n,
        psi_max: n,
        score,
        seed,
        ..Default::default()
    };
    let sv = fit(&g.data, &params)?.score_all(&g.data)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sv.scores[b].total_cmp(&sv.scores[a]).then(a.cmp(&b)));
    let mut rank = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        rank[i] = pos + 1;
    }
    Ok(g.truth.iter().map(|t| rank[t.row]).max().unwrap_or(0))
}

/// Scoring time of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingPoint {
    pub n: usize,
    pub d: usize,
    pub seconds: f64,
}

/// Wall time of scoring `n` rows in `d` dimensions on the calling thread
/// (fit excluded), the minimum over `repeats` runs.
pub fn time_scoring(
    n: usize,
    d: usize,
    params: &ModelParams,
    repeats: usize,
    seed: u64,
) -> Result<TimingPoint> {
    let g = generate(&GeneratorSpec::cross(n, d, seed))?;
    let model = fit(&g.data, params)?;
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let sv = model.score_all_serial(&g.data)?;
        let t = start.elapsed().as_secs_f64();
        std::hint::black_box(&sv);
        best = best.min(t);
    }
    Ok(TimingPoint { n, d, seconds: best })
}

/// Runtime sweep: `n` over `n_values` at `fixed_d`, then `d` over `d_values`
/// at `fixed_n`.
pub fn runtime_sweep(
    n_values: &[usize],
    fixed_d: usize,
    d_values: &[usize],
    fixed_n: usize,
    params: &ModelParams,
    repeats: usize,
    seed: u64,
) -> Result<(Vec<TimingPoint>, Vec<TimingPoint>)> {
    let by_n = n_values
        .iter()
        .map(|&n| time_scoring(n, fixed_d, params, repeats, seed))
        .collect::<Result<_>>()?;
    let by_d = d_values
        .iter()
        .map(|&d| time_scoring(fixed_n, d, params, repeats, seed))
        .collect::<Result<_>>()?;
    Ok((by_n, by_d))
}

/// Ratios of successive timings.
pub fn growth_factors(points: &[TimingPoint]) -> Vec<f64> {
    points
        .windows(2)
        .map(|w| w[1].seconds / w[0].seconds)
        .collect()
}
