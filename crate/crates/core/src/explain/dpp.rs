//! Distance profile plots: boxplot summaries of a query's distances over
//! growing feature prefixes.

use std::fmt::Write as _;
use std::io::Write;

use crate::dataset::{Dataset, FrequencyTable, Row};
use crate::metric::{ContributionCache, MetricConfig};
use crate::{Error, Result};

/// Boxplot summary of the distances over the first `m` features.
#[derive(Debug, Clone, PartialEq)]
pub struct DppRow {
    pub m: usize,
    /// Feature added at this prefix size.
    pub feature: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    /// Smallest nonzero distance, if any.
    pub isolation_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DppSummary {
    pub rows: Vec<DppRow>,
}

/// Linear-interpolation quantile of sorted data at index `(n - 1) p`.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize(m: usize, feature: usize, sorted: &[f64]) -> DppRow {
    let q1 = quantile(sorted, 0.25);
    let q3 = quantile(sorted, 0.75);
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    DppRow {
        m,
        feature,
        min: sorted[0],
        q1,
        median: quantile(sorted, 0.5),
        q3,
        max: sorted[sorted.len() - 1],
        lower_whisker: sorted.iter().copied().find(|&v| v >= lo_fence).unwrap_or(q1),
        upper_whisker: sorted.iter().rev().copied().find(|&v| v <= hi_fence).unwrap_or(q3),
        isolation_gap: sorted.iter().copied().find(|&v| v > 0.0),
    }
}

/// Summaries of the distances from `x` to every row of `reference`, using the
/// first `m` features of `feature_order` for `m = 1..=m_max`.
///
/// The self-distance that leads every profile is left out; `metric` supplies
/// the exponent and weights, its active set is ignored.
pub fn dpp(
    reference: &Dataset,
    x: Row<'_>,
    frequencies: &FrequencyTable,
    metric: &MetricConfig,
    feature_order: &[usize],
    m_max: usize,
) -> Result<DppSummary> {
    if reference.n() == 0 {
        return Err(Error::EmptySubsample);
    }
    if m_max == 0 || m_max > feature_order.len() {
        return Err(Error::InvalidConfig(format!(
            "m_max must lie in 1..={}, got {m_max}",
            feature_order.len()
        )));
    }
    let mut seen = feature_order.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != feature_order.len() {
        return Err(Error::InvalidConfig("feature order repeats a feature".into()));
    }
    let first = metric.with_active(vec![feature_order[0]])?;
    let mut cache = ContributionCache::new(x, reference, frequencies, &first)?;
    let mut buf = Vec::with_capacity(reference.n());
    let mut rows = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        if m > 1 {
            cache.add_feature(feature_order[m - 1])?;
        }
        cache.fill_distances(&mut buf);
        buf.sort_unstable_by(f64::total_cmp);
        rows.push(summarize(m, feature_order[m - 1], &buf));
    }
    Ok(DppSummary { rows })
}

impl DppSummary {
    /// One CSV row per prefix size; a missing isolation gap is left empty.
    pub fn write_csv<W: Write>(&self, writer: W, names: Option<&[String]>) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "m",
            "feature",
            "min",
            "q1",
            "median",
            "q3",
            "max",
            "lower_whisker",
            "upper_whisker",
            "isolation_gap",
        ])?;
        for r in &self.rows {
            let feature = match names {
                Some(n) => n[r.feature].clone(),
                None => r.feature.to_string(),
            };
            w.write_record([
                r.m.to_string(),
                feature,
                r.min.to_string(),
                r.q1.to_string(),
                r.median.to_string(),
                r.q3.to_string(),
                r.max.to_string(),
                r.lower_whisker.to_string(),
                r.upper_whisker.to_string(),
                r.isolation_gap.map(|g| g.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    /// Horizontal boxplots stacked top to bottom, one per prefix size, on a
    /// shared distance axis. Points beyond the whiskers are not drawn; the
    /// isolation gap is marked with a red tick.
    pub fn to_svg(&self, names: Option<&[String]>) -> String {
        const WIDTH: f64 = 640.0;
        const LEFT: f64 = 120.0;
        const RIGHT: f64 = 20.0;
        const ROW_H: f64 = 28.0;
        const TOP: f64 = 20.0;
        let height = TOP * 2.0 + ROW_H * self.rows.len() as f64 + 20.0;
        let max = self
            .rows
            .iter()
            .map(|r| r.max)
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let sx = |v: f64| LEFT + (WIDTH - LEFT - RIGHT) * v / max;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        for (i, r) in self.rows.iter().enumerate() {
            let cy = TOP + ROW_H * (i as f64 + 0.5);
            let (y0, y1) = (cy - ROW_H * 0.3, cy + ROW_H * 0.3);
            let label = match names {
                Some(n) => format!("m={} (+{})", r.m, xml_escape(&n[r.feature])),
                None => format!("m={} (+{})", r.m, r.feature),
            };
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end" dominant-baseline="middle">{label}</text>"#,
                LEFT - 6.0,
                cy
            );
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{cy:.1}" x2="{:.2}" y2="{cy:.1}" stroke="black"/>"#,
                sx(r.lower_whisker),
                sx(r.q1)
            );
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{cy:.1}" x2="{:.2}" y2="{cy:.1}" stroke="black"/>"#,
                sx(r.q3),
                sx(r.upper_whisker)
            );
            for w in [r.lower_whisker, r.upper_whisker] {
                let _ = writeln!(
                    s,
                    r#"<line x1="{x:.2}" y1="{y0:.1}" x2="{x:.2}" y2="{y1:.1}" stroke="black"/>"#,
                    x = sx(w)
                );
            }
            let _ = writeln!(
                s,
                r##"<rect x="{:.2}" y="{y0:.1}" width="{:.2}" height="{:.1}" fill="#cfe0f3" stroke="black"/>"##,
                sx(r.q1),
                (sx(r.q3) - sx(r.q1)).max(0.5),
                y1 - y0
            );
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{y0:.1}" x2="{x:.2}" y2="{y1:.1}" stroke="black" stroke-width="2"/>"#,
                x = sx(r.median)
            );
            if let Some(g) = r.isolation_gap {
                let _ = writeln!(
                    s,
                    r#"<line x1="{x:.2}" y1="{:.1}" x2="{x:.2}" y2="{:.1}" stroke="red" stroke-width="2"/>"#,
                    y0 - 3.0,
                    y1 + 3.0,
                    x = sx(g)
                );
            }
        }
        let axis_y = TOP + ROW_H * self.rows.len() as f64 + 4.0;
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT}" y1="{axis_y:.1}" x2="{:.1}" y2="{axis_y:.1}" stroke="gray"/>"#,
            WIDTH - RIGHT
        );
        for t in 0..=4 {
            let v = max * t as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                sx(v),
                axis_y + 14.0,
                format_tick(v)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 100.0 || v.abs() < 0.01 {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::nominal_frequencies;

    #[test]
    fn quartiles_of_four_values() {
        let r = summarize(1, 0, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!((r.q1, r.median, r.q3), (1.75, 2.5, 3.25));
        assert_eq!((r.lower_whisker, r.upper_whisker), (1.0, 4.0));
        assert_eq!(r.isolation_gap, Some(1.0));
    }

    #[test]
    fn whiskers_stop_at_the_fences() {
        let r = summarize(1, 0, &[1.0, 2.0, 3.0, 4.0, 100.0]);
        // q1 = 2, q3 = 4, upper fence 7
        assert_eq!(r.upper_whisker, 4.0);
        assert_eq!(r.max, 100.0);
    }

    #[test]
    fn single_point_reference() {
        let refd = Dataset::from_rows(&[vec![3.0, 1.0]]).unwrap();
        let ft = nominal_frequencies(&refd);
        let cfg = MetricConfig::unit(2, 0, 1.0).unwrap();
        let x = Row { numeric: &[0.0, 0.0], nominal: &[] };
        let s = dpp(&refd, x, &ft, &cfg, &[0, 1], 2).unwrap();
        let r = &s.rows[1];
        for v in [r.min, r.q1, r.median, r.q3, r.max] {
            assert_eq!(v, 4.0);
        }
        assert_eq!(s.rows[0].median, 3.0);
    }

    #[test]
    fn prefixes_match_direct_distances() {
        let rows: Vec<Vec<f64>> = (0..25)
            .map(|i| vec![(i as f64).sin(), (i as f64 * 0.3).cos(), i as f64 * 0.01])
            .collect();
        let refd = Dataset::from_rows(&rows).unwrap();
        let ft = nominal_frequencies(&refd);
        let cfg = MetricConfig::unit(3, 0, 2.0).unwrap();
        let x = Row { numeric: &[0.2, 0.1, 0.3], nominal: &[] };
        let s = dpp(&refd, x, &ft, &cfg, &[2, 0, 1], 3).unwrap();
        let direct = cfg.with_active(vec![2, 0]).unwrap();
        let mut d: Vec<f64> = refd
            .rows()
            .map(|y| crate::metric::lp_distance(x.numeric, y.numeric, &direct).unwrap())
            .collect();
        d.sort_by(f64::total_cmp);
        assert!((s.rows[1].median - quantile(&d, 0.5)).abs() < 1e-12);
        assert_eq!(s.rows[1].feature, 0);
        assert_eq!(s, dpp(&refd, x, &ft, &cfg, &[2, 0, 1], 3).unwrap());
        for r in &s.rows {
            assert!(r.min <= r.q1 && r.q1 <= r.median && r.median <= r.q3 && r.q3 <= r.max);
        }
    }

    #[test]
    fn rejects_bad_orders() {
        let refd = Dataset::from_rows(&[vec![3.0, 1.0]]).unwrap();
        let ft = nominal_frequencies(&refd);
        let cfg = MetricConfig::unit(2, 0, 1.0).unwrap();
        let x = Row { numeric: &[0.0, 0.0], nominal: &[] };
        assert!(dpp(&refd, x, &ft, &cfg, &[0, 0], 2).is_err());
        assert!(dpp(&refd, x, &ft, &cfg, &[0], 2).is_err());
        assert!(matches!(
            dpp(&refd.select(&[]), x, &ft, &cfg, &[0], 1),
            Err(Error::EmptySubsample)
        ));
    }

    #[test]
    fn csv_and_svg_are_emitted() {
        let refd = Dataset::from_rows(&[vec![3.0, 1.0], vec![1.0, 1.0], vec![0.5, 2.0]]).unwrap();
        let ft = nominal_frequencies(&refd);
        let cfg = MetricConfig::unit(2, 0, 1.0).unwrap();
        let x = Row { numeric: &[0.0, 0.0], nominal: &[] };
        let s = dpp(&refd, x, &ft, &cfg, &[1, 0], 2).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf, Some(refd.feature_names())).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("m,feature,min,q1,median,q3,max"));
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("1,x1,"));
        let svg = s.to_svg(Some(refd.feature_names()));
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<rect").count(), 3);
    }
}
