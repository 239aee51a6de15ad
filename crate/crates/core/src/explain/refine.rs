//! Repeated explanation on shrinking feature sets.
//!
//! After a pass over `k` features only the best `max(floor(k / beta), k_min)`
//! are explained again. Features dropped between passes keep the score of
//! the pass that dropped them, shifted so that scores of different passes are
//! comparable.

use super::{tix_on, PathLengthTable, TixParams};
use crate::dataset::Row;
use crate::detector::Model;
use crate::{rng, Error, Result};

/// How scores of different passes are made comparable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OffsetMode {
    /// Path length plus `d - k`, the minimum path needed to get from `d` to
    /// `k` features.
    Additive,
    /// Pure ranks: later survivors above earlier drops, path length within a
    /// pass. Scores are `d - position`.
    Rank,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineParams {
    pub beta: f64,
    pub k_min: usize,
    pub offset: OffsetMode,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self {
            beta: 1.5,
            k_min: 10,
            offset: OffsetMode::Additive,
        }
    }
}

impl RefineParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 1.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "refinement rate must exceed 1, got {}",
                self.beta
            )));
        }
        if self.k_min == 0 {
            return Err(Error::InvalidConfig("k_min must be at least 1".into()));
        }
        Ok(())
    }
}

/// Feature-set sizes of the successive passes, starting at `d`.
pub fn refinement_stage_sizes(d: usize, beta: f64, k_min: usize) -> Vec<usize> {
    let mut sizes = vec![d];
    let mut k = d;
    while k > k_min {
        k = ((k as f64 / beta).floor() as usize).max(k_min);
        sizes.push(k);
    }
    sizes
}

/// Repetitions per pass such that all passes together cost about as much as
/// one pass over `stage_sizes[0]` features with `base` repetitions.
pub fn budget_matched_repetitions(base: usize, stage_sizes: &[usize]) -> usize {
    let total: usize = stage_sizes.iter().sum();
    if total == 0 {
        return base.max(1);
    }
    let m = (base * stage_sizes[0]) as f64 / total as f64;
    (m.round() as usize).max(1)
}

/// One explanation pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub size: usize,
    /// `d - size`.
    pub offset: usize,
    pub table: PathLengthTable,
    /// Features whose final score comes from this pass.
    pub finalized: Vec<usize>,
}

/// Final per-feature scores of a (possibly single-pass) explanation.
#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    /// Score by feature id; higher is more relevant.
    pub scores: Vec<f64>,
    /// Offset applied to each feature (`d - k` of its final pass).
    pub offsets: Vec<usize>,
    /// Index of the pass that fixed each feature's score.
    pub stage_of: Vec<usize>,
    /// Feature ids, most relevant first.
    pub ranking: Vec<usize>,
    pub stages: Vec<Stage>,
}

impl Explanation {
    /// Wraps a single pass over all `d` features.
    pub fn from_table(table: PathLengthTable) -> Self {
        let d = table.features.len();
        let stage = Stage {
            size: d,
            offset: 0,
            finalized: table.features.clone(),
            table,
        };
        assemble(d, vec![stage], OffsetMode::Additive)
    }
}

fn assemble(d: usize, stages: Vec<Stage>, mode: OffsetMode) -> Explanation {
    let mut scores = vec![f64::NAN; d];
    let mut offsets = vec![0; d];
    let mut stage_of = vec![0; d];
    let mut path = vec![0.0; d];
    for (s, stage) in stages.iter().enumerate() {
        for &f in &stage.finalized {
            let pos = stage.table.features.iter().position(|&g| g == f).unwrap();
            path[f] = stage.table.aggregate[pos];
            offsets[f] = stage.offset;
            stage_of[f] = s;
        }
    }
    let mut ranking: Vec<usize> = (0..d).collect();
    match mode {
        OffsetMode::Additive => {
            for f in 0..d {
                scores[f] = path[f] + offsets[f] as f64;
            }
            ranking.sort_by(|&a, &b| {
                scores[b]
                    .total_cmp(&scores[a])
                    .then(stage_of[b].cmp(&stage_of[a]))
                    .then(a.cmp(&b))
            });
        }
        OffsetMode::Rank => {
            ranking.sort_by(|&a, &b| {
                stage_of[b]
                    .cmp(&stage_of[a])
                    .then(path[b].total_cmp(&path[a]))
                    .then(a.cmp(&b))
            });
            for (position, &f) in ranking.iter().enumerate() {
                scores[f] = (d - position) as f64;
            }
        }
    }
    Explanation {
        scores,
        offsets,
        stage_of,
        ranking,
        stages,
    }
}

/// Explains `x`, re-running on the best features until at most `k_min` remain.
/// With `d <= k_min` this is a single pass identical to [`super::tix`].
///
/// The first pass uses `tix_params.seed`; later passes derive their seeds
/// from it.
pub fn refine(
    model: &Model,
    x: Row<'_>,
    tix_params: &TixParams,
    params: &RefineParams,
) -> Result<Explanation> {
    params.validate()?;
    let d = model.d();
    let mut current: Vec<usize> = (0..d).collect();
    let mut stages = Vec::new();
    loop {
        let k = current.len();
        let stage_params = TixParams {
            seed: if stages.is_empty() {
                tix_params.seed
            } else {
                rng::derive(tix_params.seed, &[0x5eed, stages.len() as u64])
            },
            ..tix_params.clone()
        };
        let table = tix_on(model, x, &current, &stage_params)?;
        if k <= params.k_min {
            stages.push(Stage {
                size: k,
                offset: d - k,
                finalized: current.clone(),
                table,
            });
            break;
        }
        let next = ((k as f64 / params.beta).floor() as usize).max(params.k_min);
        let ranked = table.ranking();
        let (keep, dropped) = ranked.split_at(next);
        stages.push(Stage {
            size: k,
            offset: d - k,
            finalized: dropped.to_vec(),
            table,
        });
        current = keep.to_vec();
        current.sort_unstable();
    }
    Ok(assemble(d, stages, params.offset))
}
