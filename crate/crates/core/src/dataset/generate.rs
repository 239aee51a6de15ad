//! Synthetic labelled datasets with known outliers.
//!
//! Every generator is a pure function of its [`GeneratorSpec`], seed included.
//! Geometry constants are fixed here and documented next to each generator.

use rand::seq::{index, SliceRandom};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::rng::{seeded, Rng};
use crate::{Error, Result};

/// Centre of each bar of the Cross layout.
pub const CROSS_BAR_CENTER: f64 = 0.5;
/// Half width of each bar of the Cross layout.
pub const CROSS_BAR_HALF_WIDTH: f64 = 0.05;
/// The Cross outlier sits at the centre of the lower-left empty quadrant.
pub const CROSS_OUTLIER: [f64; 2] = [0.225, 0.225];

/// Standard deviation of inliers around the diagonal of a planted subspace.
pub const HIDDEN_BAND_SIGMA: f64 = 0.03;
/// Minimum Euclidean distance between a hidden-subspace outlier and the
/// diagonal of its subspace.
pub const HIDDEN_MIN_OFFSET: f64 = 0.3;

/// Large cluster: centre, spread and share of the inliers.
pub const TWO_CLUSTER_LARGE: ([f64; 2], f64, f64) = ([0.0, 0.0], 1.0, 0.7);
/// Small cluster: centre and spread.
pub const TWO_CLUSTER_SMALL: ([f64; 2], f64) = ([4.5, 4.5], 0.5);
/// Planted outliers are drawn uniformly in this square ...
pub const TWO_CLUSTER_BOX: (f64, f64) = (-5.0, 9.0);
/// ... at least this far from the large and the small cluster centres ...
pub const TWO_CLUSTER_CLEARANCE: (f64, f64) = (4.5, 3.0);
/// ... and at least this far from each other.
pub const TWO_CLUSTER_SPACING: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Two Gaussian clusters of unequal size plus a few sparse outliers.
    TwoClusters2d,
    /// Uniform noise features plus a cross-shaped relevant plane with one
    /// outlier that is only visible jointly in the last two features.
    Cross,
    /// Outliers hidden in planted multi-feature subspaces.
    HiddenSubspace,
}

/// A planted subspace: its feature indices and how many outliers live in it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedSubspace {
    pub features: Vec<usize>,
    pub outliers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub d: usize,
    /// Only used by [`GeneratorKind::HiddenSubspace`].
    pub subspaces: Vec<PlantedSubspace>,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn cross(n: usize, d: usize, seed: u64) -> Self {
        Self {
            kind: GeneratorKind::Cross,
            n,
            d,
            subspaces: Vec::new(),
            seed,
        }
    }

    pub fn two_clusters(n: usize, seed: u64) -> Self {
        Self {
            kind: GeneratorKind::TwoClusters2d,
            n,
            d: 2,
            subspaces: Vec::new(),
            seed,
        }
    }

    /// Hidden-subspace layout that tiles the features with consecutive
    /// subspaces of sizes 2, 3, 4, 2, 3, 4, ... (leftover features stay
    /// uniform noise) and spreads about 2% outliers evenly across them.
    pub fn hidden_subspace(n: usize, d: usize, seed: u64) -> Self {
        let mut sizes = Vec::new();
        let mut used = 0;
        for s in [2usize, 3, 4].iter().cycle() {
            if used + s > d {
                break;
            }
            sizes.push(*s);
            used += s;
        }
        let total = ((n as f64) * 0.02).round().max(sizes.len() as f64) as usize;
        let mut start = 0;
        let subspaces = sizes
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let features = (start..start + s).collect();
                start += s;
                let share = total / sizes.len() + usize::from(i < total % sizes.len());
                PlantedSubspace {
                    features,
                    outliers: share,
                }
            })
            .collect();
        Self {
            kind: GeneratorKind::HiddenSubspace,
            n,
            d,
            subspaces,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidConfig("generator needs n >= 2".into()));
        }
        match self.kind {
            GeneratorKind::TwoClusters2d => {
                if self.d != 2 {
                    return Err(Error::InvalidConfig(
                        "two_clusters_2d generates exactly 2 features".into(),
                    ));
                }
                if self.n < 20 {
                    return Err(Error::InvalidConfig("two_clusters_2d needs n >= 20".into()));
                }
            }
            GeneratorKind::Cross => {
                if self.d < 2 {
                    return Err(Error::InvalidConfig("cross needs d >= 2".into()));
                }
            }
            GeneratorKind::HiddenSubspace => {
                if self.subspaces.is_empty() {
                    return Err(Error::InvalidConfig(
                        "hidden_subspace needs at least one planted subspace".into(),
                    ));
                }
                let mut seen = vec![false; self.d];
                let mut outliers = 0;
                for s in &self.subspaces {
                    if !(2..=5).contains(&s.features.len()) {
                        return Err(Error::InvalidConfig(format!(
                            "subspace {:?} must have between 2 and 5 features",
                            s.features
                        )));
                    }
                    for &f in &s.features {
                        if f >= self.d {
                            return Err(Error::InvalidConfig(format!(
                                "subspace feature {f} outside d = {}",
                                self.d
                            )));
                        }
                        if seen[f] {
                            return Err(Error::InvalidConfig(format!(
                                "feature {f} appears in more than one subspace"
                            )));
                        }
                        seen[f] = true;
                    }
                    outliers += s.outliers;
                }
                if outliers >= self.n {
                    return Err(Error::InvalidConfig(
                        "more planted outliers than rows".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Ground truth for one planted outlier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub row: usize,
    /// Features in which the row is anomalous; empty when the generator has no
    /// notion of relevant features (two-cluster layout).
    pub features: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub data: Dataset,
    /// One entry per labelled outlier, sorted by row.
    pub truth: Vec<GroundTruth>,
}

pub fn generate(spec: &GeneratorSpec) -> Result<Generated> {
    spec.validate()?;
    let mut rng = seeded(spec.seed);
    let (rows, mut truth) = match spec.kind {
        GeneratorKind::TwoClusters2d => two_clusters(spec.n, &mut rng),
        GeneratorKind::Cross => cross(spec.n, spec.d, &mut rng),
        GeneratorKind::HiddenSubspace => hidden_subspace(spec, &mut rng),
    };
    truth.sort_by_key(|t| t.row);
    let mut labels = vec![0u8; spec.n];
    for t in &truth {
        labels[t.row] = 1;
    }
    let data = Dataset::from_rows(&rows)?.with_labels(labels)?;
    Ok(Generated { data, truth })
}

fn two_clusters(n: usize, rng: &mut Rng) -> (Vec<Vec<f64>>, Vec<GroundTruth>) {
    let n_out = (n / 50).clamp(1, 10);
    let n_in = n - n_out;
    let (large_c, large_s, share) = TWO_CLUSTER_LARGE;
    let (small_c, small_s) = TWO_CLUSTER_SMALL;
    let n_large = ((n_in as f64) * share).round() as usize;
    let large = Normal::new(0.0, large_s).expect("finite spread");
    let small = Normal::new(0.0, small_s).expect("finite spread");

    let mut rows = Vec::with_capacity(n);
    for i in 0..n_in {
        let (c, dist) = if i < n_large {
            (large_c, &large)
        } else {
            (small_c, &small)
        };
        rows.push(vec![c[0] + dist.sample(rng), c[1] + dist.sample(rng)]);
    }
    let dist = |a: &[f64], b: &[f64]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let mut planted: Vec<Vec<f64>> = Vec::with_capacity(n_out);
    while planted.len() < n_out {
        let p = vec![
            rng.random_range(TWO_CLUSTER_BOX.0..TWO_CLUSTER_BOX.1),
            rng.random_range(TWO_CLUSTER_BOX.0..TWO_CLUSTER_BOX.1),
        ];
        if dist(&p, &large_c) < TWO_CLUSTER_CLEARANCE.0
            || dist(&p, &small_c) < TWO_CLUSTER_CLEARANCE.1
            || planted.iter().any(|q| dist(&p, q) < TWO_CLUSTER_SPACING)
        {
            continue;
        }
        planted.push(p);
    }
    let truth = (n_in..n)
        .map(|row| GroundTruth {
            row,
            features: Vec::new(),
        })
        .collect();
    rows.extend(planted);
    (rows, truth)
}

fn cross(n: usize, d: usize, rng: &mut Rng) -> (Vec<Vec<f64>>, Vec<GroundTruth>) {
    let (a, b) = (d - 2, d - 1);
    let lo = CROSS_BAR_CENTER - CROSS_BAR_HALF_WIDTH;
    let hi = CROSS_BAR_CENTER + CROSS_BAR_HALF_WIDTH;
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n - 1 {
        let mut r: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let along = rng.random::<f64>();
        let across = rng.random_range(lo..hi);
        if rng.random::<bool>() {
            r[a] = along;
            r[b] = across;
        } else {
            r[a] = across;
            r[b] = along;
        }
        rows.push(r);
    }
    let mut outlier: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    outlier[a] = CROSS_OUTLIER[0];
    outlier[b] = CROSS_OUTLIER[1];
    let row = rng.random_range(0..n);
    rows.insert(row, outlier);
    (
        rows,
        vec![GroundTruth {
            row,
            features: vec![a, b],
        }],
    )
}

fn hidden_subspace(spec: &GeneratorSpec, rng: &mut Rng) -> (Vec<Vec<f64>>, Vec<GroundTruth>) {
    let band = Normal::new(0.0, HIDDEN_BAND_SIGMA).expect("finite spread");
    let mut in_subspace = vec![None; spec.d];
    for (s, p) in spec.subspaces.iter().enumerate() {
        for &f in &p.features {
            in_subspace[f] = Some(s);
        }
    }

    let mut rows = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let mut r = vec![0.0; spec.d];
        for (f, v) in r.iter_mut().enumerate() {
            if in_subspace[f].is_none() {
                *v = rng.random::<f64>();
            }
        }
        for p in &spec.subspaces {
            let t: f64 = rng.random();
            for &f in &p.features {
                r[f] = t + band.sample(rng);
            }
        }
        rows.push(r);
    }

    let total: usize = spec.subspaces.iter().map(|s| s.outliers).sum();
    let mut picked = index::sample(rng, spec.n, total).into_vec();
    picked.shuffle(rng);
    let mut truth = Vec::with_capacity(total);
    let mut next = picked.into_iter();
    for p in &spec.subspaces {
        for _ in 0..p.outliers {
            let row = next.next().expect("validated outlier count");
            let coords = off_diagonal_point(p.features.len(), rng);
            for (&f, v) in p.features.iter().zip(coords) {
                rows[row][f] = v;
            }
            truth.push(GroundTruth {
                row,
                features: p.features.clone(),
            });
        }
    }
    (rows, truth)
}

/// Uniform point of the unit cube at least [`HIDDEN_MIN_OFFSET`] away from
/// the main diagonal, so every marginal looks ordinary while the joint
/// position falls outside the inlier band.
fn off_diagonal_point(r: usize, rng: &mut Rng) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..r).map(|_| rng.random::<f64>()).collect();
        let m = x.iter().sum::<f64>() / r as f64;
        let off = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>().sqrt();
        if off >= HIDDEN_MIN_OFFSET {
            return x;
        }
    }
}
