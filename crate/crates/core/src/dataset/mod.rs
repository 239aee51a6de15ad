//! Column-typed datasets: numeric and nominal features plus optional labels.
//!
//! Features are indexed numeric-first: indices `0..d_num` address numeric
//! columns and `d_num..d_num + d_nom` address nominal columns. Every feature
//! subset used elsewhere in the crate (active sets, bagging subspaces,
//! explanation rankings) follows this indexing.

mod csv_io;
mod generate;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use csv_io::{load_csv, read_csv};
pub use generate::{generate, GeneratorKind, GeneratorSpec, Generated, GroundTruth, PlantedSubspace};

/// Borrowed view of a single observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row<'a> {
    pub numeric: &'a [f64],
    pub nominal: &'a [u32],
}

/// A table of `n` rows with `d_num` numeric and `d_nom` nominal features.
///
/// Immutable after construction; all numeric entries are finite and every
/// nominal id is smaller than the number of known levels of its column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n: usize,
    d_num: usize,
    d_nom: usize,
    numeric: Vec<f64>,
    nominal: Vec<u32>,
    labels: Option<Vec<u8>>,
    feature_names: Vec<String>,
    levels: Vec<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset from row-major buffers, validating every invariant.
    ///
    /// `levels[k]` names the categories of nominal feature `k`; its length is
    /// the number of classes of that feature.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        d_num: usize,
        numeric: Vec<f64>,
        d_nom: usize,
        nominal: Vec<u32>,
        labels: Option<Vec<u8>>,
        feature_names: Vec<String>,
        levels: Vec<Vec<String>>,
    ) -> Result<Self> {
        if numeric.len() != n * d_num {
            return Err(Error::DimensionMismatch {
                expected: n * d_num,
                found: numeric.len(),
            });
        }
        if nominal.len() != n * d_nom {
            return Err(Error::DimensionMismatch {
                expected: n * d_nom,
                found: nominal.len(),
            });
        }
        if feature_names.len() != d_num + d_nom {
            return Err(Error::DimensionMismatch {
                expected: d_num + d_nom,
                found: feature_names.len(),
            });
        }
        if levels.len() != d_nom {
            return Err(Error::DimensionMismatch {
                expected: d_nom,
                found: levels.len(),
            });
        }
        if let Some(pos) = numeric.iter().position(|v| !v.is_finite()) {
            return Err(Error::Schema(format!(
                "non-finite value at row {}, numeric feature {}",
                pos / d_num.max(1),
                pos % d_num.max(1)
            )));
        }
        for (pos, &id) in nominal.iter().enumerate() {
            let k = pos % d_nom;
            if id as usize >= levels[k].len() {
                return Err(Error::Schema(format!(
                    "category id {id} out of range for nominal feature {k} ({} levels)",
                    levels[k].len()
                )));
            }
        }
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: l.len(),
                });
            }
            if l.iter().any(|&v| v > 1) {
                return Err(Error::Schema("labels must be 0 or 1".into()));
            }
        }
        Ok(Self {
            n,
            d_num,
            d_nom,
            numeric,
            nominal,
            labels,
            feature_names,
            levels,
        })
    }

    /// Purely numeric dataset from a list of equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::mixed(rows, &[])
    }

    /// Mixed dataset from numeric rows and nominal id rows. Either side may be
    /// empty (no features of that type). Level names default to the ids.
    pub fn mixed(numeric_rows: &[Vec<f64>], nominal_rows: &[Vec<u32>]) -> Result<Self> {
        let n = numeric_rows.len().max(nominal_rows.len());
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        let d_num = numeric_rows.first().map_or(0, Vec::len);
        let d_nom = nominal_rows.first().map_or(0, Vec::len);
        if !numeric_rows.is_empty() && numeric_rows.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: numeric_rows.len(),
            });
        }
        if !nominal_rows.is_empty() && nominal_rows.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: nominal_rows.len(),
            });
        }
        let mut numeric = Vec::with_capacity(n * d_num);
        for r in numeric_rows {
            if r.len() != d_num {
                return Err(Error::DimensionMismatch {
                    expected: d_num,
                    found: r.len(),
                });
            }
            numeric.extend_from_slice(r);
        }
        let mut nominal = Vec::with_capacity(n * d_nom);
        let mut max_id = vec![0u32; d_nom];
        for r in nominal_rows {
            if r.len() != d_nom {
                return Err(Error::DimensionMismatch {
                    expected: d_nom,
                    found: r.len(),
                });
            }
            for (k, &id) in r.iter().enumerate() {
                max_id[k] = max_id[k].max(id);
            }
            nominal.extend_from_slice(r);
        }
        let levels = max_id
            .iter()
            .map(|&m| (0..=m).map(|id| id.to_string()).collect())
            .collect();
        let names = (0..d_num)
            .map(|l| format!("x{l}"))
            .chain((0..d_nom).map(|k| format!("c{k}")))
            .collect();
        Self::new(n, d_num, numeric, d_nom, nominal, None, names, levels)
    }

    /// Attaches binary labels (0 = inlier, 1 = outlier).
    pub fn with_labels(self, labels: Vec<u8>) -> Result<Self> {
        Self::new(
            self.n,
            self.d_num,
            self.numeric,
            self.d_nom,
            self.nominal,
            Some(labels),
            self.feature_names,
            self.levels,
        )
    }

    /// Replaces the feature names (numeric names first, then nominal).
    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                found: names.len(),
            });
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d_num + self.d_nom
    }

    pub fn d_num(&self) -> usize {
        self.d_num
    }

    pub fn d_nom(&self) -> usize {
        self.d_nom
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Category names per nominal feature, indexed by id.
    pub fn levels(&self) -> &[Vec<String>] {
        &self.levels
    }

    pub fn row(&self, i: usize) -> Row<'_> {
        Row {
            numeric: &self.numeric[i * self.d_num..(i + 1) * self.d_num],
            nominal: &self.nominal[i * self.d_nom..(i + 1) * self.d_nom],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = Row<'_>> + '_ {
        (0..self.n).map(move |i| self.row(i))
    }

    /// Values of numeric feature `l` across all rows.
    pub fn numeric_column(&self, l: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.numeric[i * self.d_num + l]).collect()
    }

    /// Ids of nominal feature `k` across all rows.
    pub fn nominal_column(&self, k: usize) -> Vec<u32> {
        (0..self.n).map(|i| self.nominal[i * self.d_nom + k]).collect()
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut numeric = Vec::with_capacity(indices.len() * self.d_num);
        let mut nominal = Vec::with_capacity(indices.len() * self.d_nom);
        for &i in indices {
            let r = self.row(i);
            numeric.extend_from_slice(r.numeric);
            nominal.extend_from_slice(r.nominal);
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect());
        Dataset {
            n: indices.len(),
            d_num: self.d_num,
            d_nom: self.d_nom,
            numeric,
            nominal,
            labels,
            feature_names: self.feature_names.clone(),
            levels: self.levels.clone(),
        }
    }

    /// Re-expresses the nominal ids of this dataset against another level
    /// vocabulary (typically the training set's). Classes unknown to
    /// `reference` are appended after the known ones.
    pub fn recode_nominal(&self, reference: &[Vec<String>]) -> Result<Dataset> {
        if reference.len() != self.d_nom {
            return Err(Error::Schema(format!(
                "expected {} nominal features, found {}",
                reference.len(),
                self.d_nom
            )));
        }
        let mut levels: Vec<Vec<String>> = reference.to_vec();
        let mut maps: Vec<Vec<u32>> = Vec::with_capacity(self.d_nom);
        for (k, own) in self.levels.iter().enumerate() {
            let mut map = Vec::with_capacity(own.len());
            for name in own {
                let id = match levels[k].iter().position(|l| l == name) {
                    Some(p) => p,
                    None => {
                        levels[k].push(name.clone());
                        levels[k].len() - 1
                    }
                };
                map.push(id as u32);
            }
            maps.push(map);
        }
        let nominal = self
            .nominal
            .iter()
            .enumerate()
            .map(|(pos, &id)| maps[pos % self.d_nom][id as usize])
            .collect();
        Dataset::new(
            self.n,
            self.d_num,
            self.numeric.clone(),
            self.d_nom,
            nominal,
            self.labels.clone(),
            self.feature_names.clone(),
            levels,
        )
    }

    /// Writes the dataset as CSV: numeric columns, nominal columns (by level
    /// name), then a `label` column when labels are present.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        csv_io::write_csv(self, writer)
    }

    pub fn save_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Per-feature Z-score parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScore {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Numeric features with zero spread; their std is stored as 1.
    pub constant_features: Vec<usize>,
}

impl ZScore {
    /// Applies the stored transform to the numeric block of `data`.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        if data.d_num != self.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: self.mean.len(),
                found: data.d_num,
            });
        }
        let mut out = data.clone();
        for (pos, v) in out.numeric.iter_mut().enumerate() {
            let l = pos % data.d_num;
            *v = (*v - self.mean[l]) / self.std[l];
        }
        Ok(out)
    }
}

/// Z-score normalisation of every numeric feature with the sample standard
/// deviation (ddof = 1). Constant features become all-zero and are reported in
/// [`ZScore::constant_features`].
pub fn zscore_normalize(data: &Dataset) -> Result<(Dataset, ZScore)> {
    if data.d_num == 0 {
        return Err(Error::InvalidConfig(
            "Z-score normalisation needs at least one numeric feature".into(),
        ));
    }
    let n = data.n as f64;
    let mut mean = vec![0.0; data.d_num];
    let mut std = vec![1.0; data.d_num];
    let mut constant_features = Vec::new();
    for l in 0..data.d_num {
        let col = data.numeric_column(l);
        let m = col.iter().sum::<f64>() / n;
        let ss: f64 = col.iter().map(|v| (v - m) * (v - m)).sum();
        let s = if data.n > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
        mean[l] = m;
        if s > 0.0 && s.is_finite() {
            std[l] = s;
        } else {
            log::warn!("numeric feature {l} is constant; left as zeros");
            constant_features.push(l);
        }
    }
    let params = ZScore {
        mean,
        std,
        constant_features,
    };
    let normalized = params.apply(data)?;
    Ok((normalized, params))
}

/// Class counts per nominal feature over a fitting dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    counts: Vec<Vec<u64>>,
    n_train: u64,
}

impl FrequencyTable {
    /// Occurrences of `class` in nominal feature `k`; zero for classes the
    /// fitting data never showed.
    pub fn count(&self, k: usize, class: u32) -> u64 {
        self.counts
            .get(k)
            .and_then(|c| c.get(class as usize))
            .copied()
            .unwrap_or(0)
    }

    pub fn n_train(&self) -> u64 {
        self.n_train
    }

    pub fn n_features(&self) -> usize {
        self.counts.len()
    }

    /// Counts of feature `k`, indexed by class id.
    pub fn feature_counts(&self, k: usize) -> &[u64] {
        &self.counts[k]
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

pub fn nominal_frequencies(data: &Dataset) -> FrequencyTable {
    let mut counts: Vec<Vec<u64>> = data.levels.iter().map(|l| vec![0; l.len()]).collect();
    for row in data.rows() {
        for (k, &c) in row.nominal.iter().enumerate() {
            counts[k][c as usize] += 1;
        }
    }
    FrequencyTable {
        counts,
        n_train: data.n as u64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zscore_uses_sample_std() {
        let d = Dataset::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let (z, p) = zscore_normalize(&d).unwrap();
        assert_eq!(z.numeric_column(0), vec![-1.0, 0.0, 1.0]);
        assert_eq!(p.mean, vec![2.0]);
        assert_eq!(p.std, vec![1.0]);
        assert!(p.constant_features.is_empty());
    }

    #[test]
    fn zscore_constant_feature_is_zeroed_and_flagged() {
        let d = Dataset::from_rows(&[vec![5.0, 1.0], vec![5.0, 2.0], vec![5.0, 4.0]]).unwrap();
        let (z, p) = zscore_normalize(&d).unwrap();
        assert_eq!(z.numeric_column(0), vec![0.0, 0.0, 0.0]);
        assert_eq!(p.constant_features, vec![0]);
    }

    #[test]
    fn zscore_is_idempotent() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i as f64 * 0.37).sin() * 10.0 + 3.0, (i * i) as f64])
            .collect();
        let d = Dataset::from_rows(&rows).unwrap();
        let (once, _) = zscore_normalize(&d).unwrap();
        let (twice, _) = zscore_normalize(&once).unwrap();
        for l in 0..2 {
            for (a, b) in once.numeric_column(l).iter().zip(twice.numeric_column(l)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zscore_needs_numeric_features() {
        let d = Dataset::mixed(&[], &[vec![0], vec![1]]).unwrap();
        assert!(zscore_normalize(&d).is_err());
    }

    #[test]
    fn frequencies_count_each_class() {
        let d = Dataset::mixed(&[], &[vec![0, 0], vec![0, 0], vec![1, 0]]).unwrap();
        let ft = nominal_frequencies(&d);
        assert_eq!(ft.n_train(), 3);
        assert_eq!(ft.count(0, 0), 2);
        assert_eq!(ft.count(0, 1), 1);
        assert_eq!(ft.count(1, 0), 3);
        assert_eq!(ft.count(1, 7), 0);
        for k in 0..2 {
            assert_eq!(ft.feature_counts(k).iter().sum::<u64>(), 3);
        }
    }

    #[test]
    fn frequencies_of_numeric_only_data_are_empty() {
        let d = Dataset::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(nominal_frequencies(&d).is_empty());
    }

    #[test]
    fn rejects_bad_labels_and_ids() {
        let d = Dataset::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(d.clone().with_labels(vec![0, 2]).is_err());
        assert!(d.with_labels(vec![0]).is_err());
        let bad = Dataset::new(
            1,
            0,
            vec![],
            1,
            vec![3],
            None,
            vec!["c".into()],
            vec![vec!["a".into()]],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn recode_maps_names_and_appends_unseen() {
        let train_levels = vec![vec!["a".to_string(), "b".to_string()]];
        let test = Dataset::new(
            3,
            0,
            vec![],
            1,
            vec![0, 1, 2],
            None,
            vec!["c".into()],
            vec![vec!["b".into(), "z".into(), "a".into()]],
        )
        .unwrap();
        let r = test.recode_nominal(&train_levels).unwrap();
        assert_eq!(r.nominal_column(0), vec![1, 2, 0]);
        assert_eq!(r.levels()[0], vec!["a", "b", "z"]);
    }

    #[test]
    fn select_keeps_labels_aligned() {
        let d = Dataset::from_rows(&[vec![1.0], vec![2.0], vec![3.0]])
            .unwrap()
            .with_labels(vec![0, 1, 0])
            .unwrap();
        let s = d.select(&[2, 1]);
        assert_eq!(s.numeric_column(0), vec![3.0, 2.0]);
        assert_eq!(s.labels().unwrap(), &[0, 1]);
    }
}
