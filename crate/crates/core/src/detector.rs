//! The subsampling ensemble: fitting, batch scoring, aggregation and AUC.
//!
//! Each ensemble member stores a random subsample of the training rows, an
//! optional random feature subspace and its own gap exponent. A query is
//! scored against every member by the negated split statistic of its distance
//! profile; the member columns are Z-scored over the scored batch and then
//! aggregated per row.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{nominal_frequencies, zscore_normalize, Dataset, FrequencyTable, Row, ZScore};
use crate::isolation::{score_sorted, ScoreConfig};
use crate::metric::{sort_profile, total_unchecked, MetricConfig};
use crate::{rng, Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// How member scores are combined into one score per row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Average,
    Max,
    /// Average of bucket maxima, `q` members per bucket.
    Aom(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bagging {
    /// On iff the data has more than five features.
    Auto,
    On,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n_subsamples: usize,
    pub psi_min: usize,
    pub psi_max: usize,
    pub bagging: Bagging,
    /// Exponent of the Lp distance.
    pub p: f64,
    /// Per-feature weights, numeric features first. `None` means all ones.
    pub weights: Option<Vec<f64>>,
    pub score: ScoreConfig,
    pub aggregation: Aggregation,
    /// Z-score the numeric features with training statistics before fitting
    /// and scoring.
    pub standardize: bool,
    pub seed: u64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            n_subsamples: 100,
            psi_min: 50,
            psi_max: 512,
            bagging: Bagging::Auto,
            p: 1.0,
            weights: None,
            score: ScoreConfig::default(),
            aggregation: Aggregation::Aom(5),
            standardize: false,
            seed: 0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_subsamples == 0 {
            return Err(Error::InvalidConfig("N must be at least 1".into()));
        }
        if self.psi_min < 2 || self.psi_min > self.psi_max {
            return Err(Error::InvalidConfig(format!(
                "subsample sizes must satisfy 2 <= psi_min <= psi_max, got [{}, {}]",
                self.psi_min, self.psi_max
            )));
        }
        if let Aggregation::Aom(0) = self.aggregation {
            return Err(Error::InvalidConfig("AOM bucket size q must be at least 1".into()));
        }
        self.score.validate()
    }

    fn bagging_on(&self, d: usize) -> bool {
        match self.bagging {
            Bagging::Auto => d > 5,
            Bagging::On => true,
            Bagging::Off => false,
        }
    }
}

/// One ensemble member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subsample {
    /// Training row indices, increasing.
    pub indices: Vec<usize>,
    pub data: Dataset,
    /// Active features, increasing; all features when bagging is off.
    pub features: Vec<usize>,
    pub alpha: f64,
}

/// Per-member mean and standard deviation of raw scores on a reference batch,
/// used to score rows one at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub format_version: u32,
    pub params: ModelParams,
    /// Subsample size bounds after clamping to the training size.
    pub psi_range: (usize, usize),
    pub bagging: bool,
    pub d_num: usize,
    pub d_nom: usize,
    pub feature_names: Vec<String>,
    pub levels: Vec<Vec<String>>,
    pub standardization: Option<ZScore>,
    pub frequencies: FrequencyTable,
    pub subsamples: Vec<Subsample>,
    /// Member indices per AOM bucket.
    pub buckets: Vec<Vec<usize>>,
    pub calibration: Option<Calibration>,
}

/// Raw, normalized and aggregated scores of a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub n_rows: usize,
    pub n_members: usize,
    /// Row-major `n_rows x n_members`.
    pub raw: Vec<f64>,
    /// Column-wise Z-scores of `raw`, same layout.
    pub normalized: Vec<f64>,
    pub scores: Vec<f64>,
    /// Members whose raw column was constant and normalized to zeros.
    pub constant_members: Vec<usize>,
    /// Row-member pairs whose profile was all duplicates.
    pub degenerate: usize,
}

impl ScoreVector {
    pub fn raw_row(&self, i: usize) -> &[f64] {
        &self.raw[i * self.n_members..(i + 1) * self.n_members]
    }

    pub fn normalized_row(&self, i: usize) -> &[f64] {
        &self.normalized[i * self.n_members..(i + 1) * self.n_members]
    }
}

/// Splits `n_members` columns into buckets of `q` after a seeded shuffle.
/// `q > n_members` yields a single bucket.
pub fn aom_buckets(n_members: usize, q: usize, seed: u64) -> Vec<Vec<usize>> {
    let q = q.max(1);
    if q > n_members {
        log::warn!("AOM bucket size {q} exceeds the {n_members} members; using one bucket");
        return vec![(0..n_members).collect()];
    }
    let mut order: Vec<usize> = (0..n_members).collect();
    order.shuffle(&mut rng::seeded(seed));
    order.chunks(q).map(<[usize]>::to_vec).collect()
}

/// Combines a row-major `n x n_members` matrix row by row. `buckets` is only
/// read for AOM.
pub fn aggregate(
    matrix: &[f64],
    n_members: usize,
    method: Aggregation,
    buckets: &[Vec<usize>],
) -> Result<Vec<f64>> {
    if n_members == 0 || !matrix.len().is_multiple_of(n_members) {
        return Err(Error::DimensionMismatch {
            expected: n_members,
            found: matrix.len(),
        });
    }
    if let Aggregation::Aom(_) = method {
        if buckets.is_empty() || buckets.iter().any(Vec::is_empty) {
            return Err(Error::InvalidConfig("AOM needs non-empty buckets".into()));
        }
        if let Some(&c) = buckets.iter().flatten().find(|&&c| c >= n_members) {
            return Err(Error::InvalidConfig(format!(
                "bucket refers to member {c} of {n_members}"
            )));
        }
    }
    Ok(matrix
        .chunks(n_members)
        .map(|row| match method {
            Aggregation::Average => row.iter().sum::<f64>() / n_members as f64,
            Aggregation::Max => row.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Aggregation::Aom(_) => {
                buckets
                    .iter()
                    .map(|b| b.iter().map(|&c| row[c]).fold(f64::NEG_INFINITY, f64::max))
                    .sum::<f64>()
                    / buckets.len() as f64
            }
        })
        .collect())
}

/// Area under the ROC curve via the Mann-Whitney statistic; tied scores
/// share their average rank. Label 1 marks an outlier.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: labels.len(),
        });
    }
    let n_out = labels.iter().filter(|&&l| l == 1).count();
    let n_in = labels.len() - n_out;
    if n_out == 0 || n_in == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start..end (0-based) share (start + 1 + end) / 2
        let avg = (start + 1 + end) as f64 / 2.0;
        rank_sum += avg * order[start..end].iter().filter(|&&i| labels[i] == 1).count() as f64;
        start = end;
    }
    let u = rank_sum - (n_out * (n_out + 1)) as f64 / 2.0;
    Ok(u / (n_out as f64 * n_in as f64))
}

/// Draws the ensemble from the training data.
pub fn fit(train: &Dataset, params: &ModelParams) -> Result<Model> {
    params.validate()?;
    let n = train.n();
    let d = train.d();
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "training data needs at least 2 rows, got {n}"
        )));
    }
    if let Some(w) = &params.weights {
        if w.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: w.len(),
            });
        }
    }
    let mut psi_max = params.psi_max;
    if psi_max > n {
        log::warn!("psi_max {psi_max} exceeds the {n} training rows; clamped");
        psi_max = n;
    }
    let mut psi_min = params.psi_min;
    if psi_min > psi_max {
        log::warn!("psi_min {psi_min} exceeds the {n} training rows; clamped");
        psi_min = psi_max;
    }
    let bagging = params.bagging_on(d);
    if bagging && d < 2 {
        return Err(Error::InvalidConfig(
            "feature bagging needs at least 2 features".into(),
        ));
    }

    let (train, standardization) = if params.standardize && train.d_num() > 0 {
        let (z, s) = zscore_normalize(train)?;
        (z, Some(s))
    } else {
        (train.clone(), None)
    };

    let mut rng = rng::seeded(params.seed);
    let mut subsamples = Vec::with_capacity(params.n_subsamples);
    for _ in 0..params.n_subsamples {
        let psi = rng.random_range(psi_min..=psi_max);
        let mut indices = index::sample(&mut rng, n, psi).into_vec();
        indices.sort_unstable();
        let features = if bagging {
            let size = rng.random_range(d / 2..=d - 1).max(1);
            let mut f = index::sample(&mut rng, d, size).into_vec();
            f.sort_unstable();
            f
        } else {
            (0..d).collect()
        };
        let alpha = params.score.draw_alpha(&mut rng);
        subsamples.push(Subsample {
            data: train.select(&indices),
            indices,
            features,
            alpha,
        });
    }
    let buckets = match params.aggregation {
        Aggregation::Aom(q) => aom_buckets(params.n_subsamples, q, rng.random()),
        _ => vec![(0..params.n_subsamples).collect()],
    };
    Ok(Model {
        format_version: MODEL_FORMAT_VERSION,
        params: params.clone(),
        psi_range: (psi_min, psi_max),
        bagging,
        d_num: train.d_num(),
        d_nom: train.d_nom(),
        feature_names: train.feature_names().to_vec(),
        levels: train.levels().to_vec(),
        standardization,
        frequencies: nominal_frequencies(&train),
        subsamples,
        buckets,
        calibration: None,
    })
}

impl Model {
    pub fn d(&self) -> usize {
        self.d_num + self.d_nom
    }

    pub fn n_members(&self) -> usize {
        self.subsamples.len()
    }

    /// Distance configuration of member `j`.
    pub fn metric(&self, j: usize) -> Result<MetricConfig> {
        self.metric_on(self.subsamples[j].features.clone())
    }

    /// Distance configuration with the model's exponent and weights on an
    /// arbitrary active set.
    pub fn metric_on(&self, active: Vec<usize>) -> Result<MetricConfig> {
        let (wn, wc) = match &self.params.weights {
            Some(w) => (w[..self.d_num].to_vec(), w[self.d_num..].to_vec()),
            None => (vec![1.0; self.d_num], vec![1.0; self.d_nom]),
        };
        MetricConfig::new(self.params.p, wn, wc, active)
    }

    /// Brings a batch onto the training schema: checks the feature counts,
    /// maps nominal levels onto the training vocabulary and applies the stored
    /// standardization.
    pub fn prepare(&self, data: &Dataset) -> Result<Dataset> {
        if data.d_num() != self.d_num || data.d_nom() != self.d_nom {
            return Err(Error::Schema(format!(
                "expected {} numeric and {} nominal features, found {} and {}",
                self.d_num,
                self.d_nom,
                data.d_num(),
                data.d_nom()
            )));
        }
        let data = if data.levels() == self.levels.as_slice() {
            data.clone()
        } else {
            data.recode_nominal(&self.levels)?
        };
        match &self.standardization {
            Some(z) => z.apply(&data),
            None => Ok(data),
        }
    }

    /// Raw member scores, row-major `n x N`, plus the number of degenerate
    /// profiles. `data` must already be prepared.
    fn raw_scores(&self, data: &Dataset, parallel: bool) -> Result<(Vec<f64>, usize)> {
        let n_members = self.n_members();
        let metrics: Vec<MetricConfig> = (0..n_members)
            .map(|j| self.metric(j))
            .collect::<Result<_>>()?;
        let score_fn = self.params.score.score_fn;
        let max_psi = self.subsamples.iter().map(|s| s.data.n()).max().unwrap_or(0);
        let score_row = |row: Row<'_>, out: &mut [f64], buf: &mut Vec<f64>| -> usize {
            let mut degenerate = 0;
            for (j, (sub, cfg)) in self.subsamples.iter().zip(&metrics).enumerate() {
                buf.clear();
                buf.push(0.0);
                buf.extend(
                    sub.data
                        .rows()
                        .map(|y| total_unchecked(row, y, &self.frequencies, cfg)),
                );
                let dups = sort_profile(buf);
                let s = score_sorted(buf, dups, score_fn, sub.alpha);
                degenerate += usize::from(s.degenerate);
                out[j] = s.score;
            }
            degenerate
        };
        let mut raw = vec![0.0; data.n() * n_members];
        let degenerate = if parallel {
            raw.par_chunks_mut(n_members)
                .enumerate()
                .map_init(
                    || Vec::with_capacity(max_psi + 1),
                    |buf, (i, out)| score_row(data.row(i), out, buf),
                )
                .sum()
        } else {
            let mut buf = Vec::with_capacity(max_psi + 1);
            raw.chunks_mut(n_members)
                .enumerate()
                .map(|(i, out)| score_row(data.row(i), out, &mut buf))
                .sum()
        };
        Ok((raw, degenerate))
    }

    /// Scores a batch: member scores, column Z-scores over the batch, and the
    /// aggregated score per row. Rows are scored in parallel; the result does
    /// not depend on the thread count.
    pub fn score_all(&self, test: &Dataset) -> Result<ScoreVector> {
        self.score_batch(test, true)
    }

    /// As [`Model::score_all`] on the calling thread only.
    pub fn score_all_serial(&self, test: &Dataset) -> Result<ScoreVector> {
        self.score_batch(test, false)
    }

    fn score_batch(&self, test: &Dataset, parallel: bool) -> Result<ScoreVector> {
        let data = self.prepare(test)?;
        let n_members = self.n_members();
        let (raw, degenerate) = self.raw_scores(&data, parallel)?;
        let (mean, std) = column_stats(&raw, n_members);
        let mut constant_members = Vec::new();
        for (j, s) in std.iter().enumerate() {
            if *s == 0.0 {
                constant_members.push(j);
            }
        }
        if !constant_members.is_empty() {
            log::warn!(
                "{} member score columns are constant over the batch; normalized to zero",
                constant_members.len()
            );
        }
        let normalized = normalize(&raw, &mean, &std);
        let scores = aggregate(&normalized, n_members, self.params.aggregation, &self.buckets)?;
        Ok(ScoreVector {
            n_rows: data.n(),
            n_members,
            raw,
            normalized,
            scores,
            constant_members,
            degenerate,
        })
    }

    /// Stores per-member score statistics of a reference batch (usually the
    /// training data) so later rows can be scored without a batch.
    pub fn calibrate(&mut self, reference: &Dataset) -> Result<()> {
        let data = self.prepare(reference)?;
        let (raw, _) = self.raw_scores(&data, true)?;
        let (mean, std) = column_stats(&raw, self.n_members());
        self.calibration = Some(Calibration { mean, std });
        Ok(())
    }

    /// Scores rows against the stored calibration instead of batch statistics.
    pub fn score_calibrated(&self, test: &Dataset) -> Result<ScoreVector> {
        let cal = self.calibration.as_ref().ok_or_else(|| {
            Error::InvalidConfig("model has no calibration; call calibrate first".into())
        })?;
        let data = self.prepare(test)?;
        let n_members = self.n_members();
        let (raw, degenerate) = self.raw_scores(&data, true)?;
        let normalized = normalize(&raw, &cal.mean, &cal.std);
        let scores = aggregate(&normalized, n_members, self.params.aggregation, &self.buckets)?;
        let constant_members = (0..n_members).filter(|&j| cal.std[j] == 0.0).collect();
        Ok(ScoreVector {
            n_rows: data.n(),
            n_members,
            raw,
            normalized,
            scores,
            constant_members,
            degenerate,
        })
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, self).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let model: Model =
            serde_json::from_reader(reader).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported model format version {}",
                model.format_version
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.to_writer(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(std::io::BufReader::new(file))
    }
}

/// Column means and sample standard deviations (ddof = 1). Columns with a
/// single row or no spread get std 0.
fn column_stats(matrix: &[f64], n_cols: usize) -> (Vec<f64>, Vec<f64>) {
    let n = matrix.len() / n_cols;
    let mut mean = vec![0.0; n_cols];
    for row in matrix.chunks(n_cols) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut ss = vec![0.0; n_cols];
    for row in matrix.chunks(n_cols) {
        for j in 0..n_cols {
            let dv = row[j] - mean[j];
            ss[j] += dv * dv;
        }
    }
    let std = ss
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let constant = n < 2 || matrix.chunks(n_cols).all(|r| r[j] == matrix[j]);
            if constant {
                0.0
            } else {
                (s / (n as f64 - 1.0)).sqrt()
            }
        })
        .collect();
    (mean, std)
}

fn normalize(matrix: &[f64], mean: &[f64], std: &[f64]) -> Vec<f64> {
    let n_cols = mean.len();
    matrix
        .chunks(n_cols)
        .flat_map(|row| {
            (0..n_cols).map(move |j| {
                if std[j] == 0.0 {
                    0.0
                } else {
                    (row[j] - mean[j]) / std[j]
                }
            })
        })
        .collect()
}
