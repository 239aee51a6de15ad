//! Distances for mixed numeric/nominal data and distance profiles.
//!
//! The numeric part is a weighted Lp distance; each nominal feature turns a
//! frequency-based similarity `S` into the additive term `-w * ln S`. The total
//! distance is the sum of both parts.

use crate::dataset::{Dataset, FrequencyTable, Row};
use crate::{Error, Result};

/// Exponent, weights and active feature set of the distance.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricConfig {
    p: f64,
    weights_num: Vec<f64>,
    weights_nom: Vec<f64>,
    active: Vec<usize>,
    // (feature offset within its block, weight) of the active features
    active_num: Vec<(usize, f64)>,
    active_nom: Vec<(usize, f64)>,
}

impl MetricConfig {
    /// `active` holds feature indices over all `d_num + d_nom` features
    /// (numeric first). Weights must be finite and non-negative; a zero weight
    /// switches a feature off just like leaving it out of `active`.
    pub fn new(
        p: f64,
        weights_num: Vec<f64>,
        weights_nom: Vec<f64>,
        active: Vec<usize>,
    ) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::InvalidConfig(format!("p must be positive, got {p}")));
        }
        if let Some(w) = weights_num
            .iter()
            .chain(&weights_nom)
            .find(|w| !(w.is_finite() && **w >= 0.0))
        {
            return Err(Error::InvalidConfig(format!(
                "weights must be finite and non-negative, got {w}"
            )));
        }
        let d_num = weights_num.len();
        let d = d_num + weights_nom.len();
        let mut active = active;
        active.sort_unstable();
        active.dedup();
        if active.is_empty() {
            return Err(Error::InvalidConfig("active feature set is empty".into()));
        }
        if let Some(&f) = active.iter().find(|&&f| f >= d) {
            return Err(Error::InvalidConfig(format!(
                "active feature {f} outside {d} features"
            )));
        }
        let active_num = active
            .iter()
            .filter(|&&f| f < d_num)
            .map(|&f| (f, weights_num[f]))
            .collect();
        let active_nom = active
            .iter()
            .filter(|&&f| f >= d_num)
            .map(|&f| (f - d_num, weights_nom[f - d_num]))
            .collect();
        Ok(Self {
            p,
            weights_num,
            weights_nom,
            active,
            active_num,
            active_nom,
        })
    }

    /// Unit weights, every feature active.
    pub fn unit(d_num: usize, d_nom: usize, p: f64) -> Result<Self> {
        Self::new(
            p,
            vec![1.0; d_num],
            vec![1.0; d_nom],
            (0..d_num + d_nom).collect(),
        )
    }

    /// Same exponent and weights with a different active set.
    pub fn with_active(&self, active: Vec<usize>) -> Result<Self> {
        Self::new(
            self.p,
            self.weights_num.clone(),
            self.weights_nom.clone(),
            active,
        )
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn weights_num(&self) -> &[f64] {
        &self.weights_num
    }

    pub fn weights_nom(&self) -> &[f64] {
        &self.weights_nom
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn d_num(&self) -> usize {
        self.weights_num.len()
    }

    pub fn d_nom(&self) -> usize {
        self.weights_nom.len()
    }

    #[inline]
    fn power(&self, a: f64) -> f64 {
        if self.p == 1.0 {
            a
        } else if self.p == 2.0 {
            a * a
        } else {
            a.powf(self.p)
        }
    }

    #[inline]
    fn root(&self, s: f64) -> f64 {
        if self.p == 1.0 {
            s
        } else if self.p == 2.0 {
            s.sqrt()
        } else {
            s.powf(1.0 / self.p)
        }
    }

    fn check_row(&self, r: Row<'_>) -> Result<()> {
        if r.numeric.len() != self.d_num() {
            return Err(Error::DimensionMismatch {
                expected: self.d_num(),
                found: r.numeric.len(),
            });
        }
        if r.nominal.len() != self.d_nom() {
            return Err(Error::DimensionMismatch {
                expected: self.d_nom(),
                found: r.nominal.len(),
            });
        }
        Ok(())
    }

    #[inline]
    fn lp_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let s: f64 = self
            .active_num
            .iter()
            .map(|&(l, w)| w * self.power((x[l] - y[l]).abs()))
            .sum();
        self.root(s)
    }

    #[inline]
    fn nominal_unchecked(&self, x: &[u32], y: &[u32], ft: &FrequencyTable) -> f64 {
        self.active_nom
            .iter()
            .map(|&(k, w)| nominal_term(k, x[k], y[k], w, ft))
            .sum()
    }
}

/// Weighted Lp distance `(sum_l w_l |x_l - y_l|^p)^(1/p)` over the active
/// numeric features.
pub fn lp_distance(x: &[f64], y: &[f64], cfg: &MetricConfig) -> Result<f64> {
    for len in [x.len(), y.len()] {
        if len != cfg.d_num() {
            return Err(Error::DimensionMismatch {
                expected: cfg.d_num(),
                found: len,
            });
        }
    }
    Ok(cfg.lp_unchecked(x, y))
}

/// Frequency-based similarity of classes `x` (query) and `y` (stored) in
/// nominal feature `k`: 1 on a match, otherwise `1 - f(y)(f(y)-1) / ((n+1) n)`
/// with `f` the class count and `n` the size of the fitting data.
///
/// The `(n + 1)` denominator keeps the similarity strictly positive. A class
/// the table has never seen has count 0 and therefore similarity 1.
pub fn nominal_similarity(k: usize, x: u32, y: u32, ft: &FrequencyTable) -> f64 {
    if x == y {
        return 1.0;
    }
    let n = ft.n_train().max(1) as f64;
    let f = ft.count(k, y) as f64;
    1.0 - f * (f - 1.0).max(0.0) / ((n + 1.0) * n)
}

#[inline]
fn nominal_term(k: usize, x: u32, y: u32, w: f64, ft: &FrequencyTable) -> f64 {
    if x == y || w == 0.0 {
        return 0.0;
    }
    // The directed similarity depends on the stored class only; taking the
    // smaller of both directions makes the distance symmetric.
    let s = nominal_similarity(k, x, y, ft).min(nominal_similarity(k, y, x, ft));
    -w * s.ln()
}

/// `-sum_l w_l ln S_l` over the active nominal features, where `S_l` is the
/// smaller of the two directed similarities of the pair.
pub fn nominal_distance(
    x: &[u32],
    y: &[u32],
    ft: &FrequencyTable,
    cfg: &MetricConfig,
) -> Result<f64> {
    for len in [x.len(), y.len()] {
        if len != cfg.d_nom() {
            return Err(Error::DimensionMismatch {
                expected: cfg.d_nom(),
                found: len,
            });
        }
    }
    Ok(cfg.nominal_unchecked(x, y, ft))
}

/// Numeric Lp distance plus nominal distance.
pub fn total_distance(
    xi: Row<'_>,
    xj: Row<'_>,
    ft: &FrequencyTable,
    cfg: &MetricConfig,
) -> Result<f64> {
    cfg.check_row(xi)?;
    cfg.check_row(xj)?;
    Ok(total_unchecked(xi, xj, ft, cfg))
}

#[inline]
pub(crate) fn total_unchecked(
    xi: Row<'_>,
    xj: Row<'_>,
    ft: &FrequencyTable,
    cfg: &MetricConfig,
) -> f64 {
    let mut d = 0.0;
    if !cfg.active_num.is_empty() {
        d += cfg.lp_unchecked(xi.numeric, xj.numeric);
    }
    if !cfg.active_nom.is_empty() {
        d += cfg.nominal_unchecked(xi.nominal, xj.nominal, ft);
    }
    d
}

/// Sorted distances from a query to a subsample, led by the query's own zero
/// distance (the left-fringe point).
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceProfile {
    distances: Vec<f64>,
    duplicate_count: usize,
}

impl DistanceProfile {
    /// Builds a profile from raw query-to-subsample distances: prepends the
    /// self-distance 0, sorts, and counts the exact zeros beyond the first.
    pub fn from_distances(mut distances: Vec<f64>) -> Result<Self> {
        if let Some(v) = distances.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "distances must be finite and non-negative, got {v}"
            )));
        }
        distances.push(0.0);
        let duplicate_count = sort_profile(&mut distances);
        Ok(Self {
            distances,
            duplicate_count,
        })
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    /// Number of entries equal to the leading zero, excluding the leading one.
    pub fn duplicate_count(&self) -> usize {
        self.duplicate_count
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }

    /// Smallest nonzero distance, if any.
    pub fn isolation_gap(&self) -> Option<f64> {
        self.distances.get(self.duplicate_count + 1).copied()
    }
}

/// Sorts in place and returns how many zeros follow the first entry.
/// Expects the query's own zero to be somewhere in `buf`.
pub(crate) fn sort_profile(buf: &mut [f64]) -> usize {
    buf.sort_unstable_by(f64::total_cmp);
    buf.iter().skip(1).take_while(|&&v| v == 0.0).count()
}

/// Distance profile of `query` against every row of `subsample`.
pub fn distance_profile(
    query: Row<'_>,
    subsample: &Dataset,
    ft: &FrequencyTable,
    cfg: &MetricConfig,
) -> Result<DistanceProfile> {
    if subsample.n() == 0 {
        return Err(Error::EmptySubsample);
    }
    cfg.check_row(query)?;
    cfg.check_row(subsample.row(0))?;
    let distances = subsample
        .rows()
        .map(|y| total_unchecked(query, y, ft, cfg))
        .collect();
    DistanceProfile::from_distances(distances)
}

/// Per-feature additive distance contributions of one query against a
/// subsample, so single features can be dropped or restored in O(psi).
///
/// For numeric features the cached term is `w |dx|^p` and the Lp root is
/// re-applied on read; nominal terms are the `-w ln S` summands.
#[derive(Debug, Clone)]
pub struct ContributionCache {
    p: f64,
    psi: usize,
    d_num: usize,
    // feature-major: terms[f * psi + i]
    terms: Vec<f64>,
    active: Vec<bool>,
    num_sum: Vec<f64>,
    nom_sum: Vec<f64>,
    // active features with a nonzero term, per point; zero means an exact
    // duplicate of the query on the active set
    nonzero: Vec<u32>,
}

impl ContributionCache {
    pub fn new(
        query: Row<'_>,
        subsample: &Dataset,
        ft: &FrequencyTable,
        cfg: &MetricConfig,
    ) -> Result<Self> {
        if subsample.n() == 0 {
            return Err(Error::EmptySubsample);
        }
        cfg.check_row(query)?;
        cfg.check_row(subsample.row(0))?;
        let psi = subsample.n();
        let d_num = cfg.d_num();
        let d = d_num + cfg.d_nom();
        let mut terms = vec![0.0; d * psi];
        for (i, y) in subsample.rows().enumerate() {
            for l in 0..d_num {
                terms[l * psi + i] =
                    cfg.weights_num[l] * cfg.power((query.numeric[l] - y.numeric[l]).abs());
            }
            for k in 0..cfg.d_nom() {
                terms[(d_num + k) * psi + i] =
                    nominal_term(k, query.nominal[k], y.nominal[k], cfg.weights_nom[k], ft);
            }
        }
        let mut cache = Self {
            p: cfg.p,
            psi,
            d_num,
            terms,
            active: vec![false; d],
            num_sum: vec![0.0; psi],
            nom_sum: vec![0.0; psi],
            nonzero: vec![0; psi],
        };
        for &f in cfg.active() {
            cache.add_feature(f)?;
        }
        Ok(cache)
    }

    pub fn len(&self) -> usize {
        self.psi
    }

    pub fn is_empty(&self) -> bool {
        self.psi == 0
    }

    pub fn active_features(&self) -> Vec<usize> {
        (0..self.active.len()).filter(|&f| self.active[f]).collect()
    }

    pub fn is_active(&self, feature: usize) -> bool {
        self.active.get(feature).copied().unwrap_or(false)
    }

    #[inline]
    fn root(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        if self.p == 1.0 {
            s
        } else if self.p == 2.0 {
            s.sqrt()
        } else {
            s.powf(1.0 / self.p)
        }
    }

    #[inline]
    fn assemble(&self, num: f64, nom: f64, nonzero: u32) -> f64 {
        if nonzero == 0 {
            0.0
        } else {
            self.root(num) + nom.max(0.0)
        }
    }

    /// Current distance of every subsample point to the query.
    pub fn distances(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.psi);
        self.fill_distances(&mut out);
        out
    }

    pub fn fill_distances(&self, out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            (0..self.psi).map(|i| self.assemble(self.num_sum[i], self.nom_sum[i], self.nonzero[i])),
        );
    }

    /// Distances as they would be with `feature` removed, without mutating.
    pub fn fill_distances_without(&self, feature: usize, out: &mut Vec<f64>) -> Result<()> {
        if !self.is_active(feature) {
            return Err(Error::FeatureNotActive(feature));
        }
        let col = &self.terms[feature * self.psi..(feature + 1) * self.psi];
        out.clear();
        if feature < self.d_num {
            out.extend((0..self.psi).map(|i| {
                let nz = self.nonzero[i] - u32::from(col[i] != 0.0);
                self.assemble(self.num_sum[i] - col[i], self.nom_sum[i], nz)
            }));
        } else {
            out.extend((0..self.psi).map(|i| {
                let nz = self.nonzero[i] - u32::from(col[i] != 0.0);
                self.assemble(self.num_sum[i], self.nom_sum[i] - col[i], nz)
            }));
        }
        Ok(())
    }

    /// Drops `feature` from every cached distance.
    pub fn remove_feature(&mut self, feature: usize) -> Result<()> {
        if !self.is_active(feature) {
            return Err(Error::FeatureNotActive(feature));
        }
        self.active[feature] = false;
        self.apply(feature, -1.0);
        Ok(())
    }

    /// Restores a previously removed (or initially inactive) feature.
    pub fn add_feature(&mut self, feature: usize) -> Result<()> {
        if feature >= self.active.len() {
            return Err(Error::InvalidConfig(format!(
                "feature {feature} outside {} features",
                self.active.len()
            )));
        }
        if self.active[feature] {
            return Err(Error::InvalidConfig(format!(
                "feature {feature} is already active"
            )));
        }
        self.active[feature] = true;
        self.apply(feature, 1.0);
        Ok(())
    }

    fn apply(&mut self, feature: usize, sign: f64) {
        let col = &self.terms[feature * self.psi..(feature + 1) * self.psi];
        let sums = if feature < self.d_num {
            &mut self.num_sum
        } else {
            &mut self.nom_sum
        };
        for i in 0..self.psi {
            if col[i] != 0.0 {
                sums[i] += sign * col[i];
                if sign > 0.0 {
                    self.nonzero[i] += 1;
                } else {
                    self.nonzero[i] -= 1;
                }
            }
        }
        let any_active = if feature < self.d_num {
            self.active[..self.d_num].iter().any(|&a| a)
        } else {
            self.active[self.d_num..].iter().any(|&a| a)
        };
        if !any_active {
            sums.iter_mut().for_each(|s| *s = 0.0);
        }
    }
}
