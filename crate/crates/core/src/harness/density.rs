//! Density of `u(X)` for `X` uniform on the domain.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Density-normalized histogram: `Σ heights[i] (edges[i+1] - edges[i]) = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub heights: Vec<f64>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.heights.len()
    }

    pub fn mass(&self) -> f64 {
        self.heights
            .iter()
            .zip(self.edges.windows(2))
            .map(|(h, e)| h * (e[1] - e[0]))
            .sum()
    }
}

fn range_of(values: ArrayView1<'_, f64>) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("density of an empty sample".into()));
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidArgument("density of non-finite values".into()));
    }
    Ok((lo, hi))
}

/// Equal-width edges over `[lo, hi]`; a degenerate range is widened to unit
/// width around its value.
fn edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let w = (hi - lo) / bins as f64;
    (0..=bins)
        .map(|i| if i == bins { hi } else { lo + i as f64 * w })
        .collect()
}

fn histogram_on(values: ArrayView1<'_, f64>, edges: Vec<f64>) -> Histogram {
    let bins = edges.len() - 1;
    let (lo, hi) = (edges[0], edges[bins]);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = values.len() as f64;
    let heights = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, e)| c as f64 / (n * (e[1] - e[0])))
        .collect();
    Histogram { edges, heights }
}

fn check_bins(bins: usize) -> Result<()> {
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 bins, got {bins}")));
    }
    Ok(())
}

/// Histogram over the sample's own range.
pub fn density_histogram(values: ArrayView1<'_, f64>, bins: usize) -> Result<Histogram> {
    check_bins(bins)?;
    let (lo, hi) = range_of(values)?;
    Ok(histogram_on(values, edges(lo, hi, bins)))
}

/// Both histograms on shared edges spanning the union of the two ranges.
pub fn paired_histograms(
    predicted: ArrayView1<'_, f64>,
    exact: ArrayView1<'_, f64>,
    bins: usize,
) -> Result<(Histogram, Histogram)> {
    check_bins(bins)?;
    let (a, b) = range_of(predicted)?;
    let (c, d) = range_of(exact)?;
    let e = edges(a.min(c), b.max(d), bins);
    Ok((histogram_on(predicted, e.clone()), histogram_on(exact, e)))
}

/// Largest per-bin height difference on shared edges.
pub fn compare_densities(predicted: ArrayView1<'_, f64>, exact: ArrayView1<'_, f64>, bins: usize) -> Result<f64> {
    let (p, e) = paired_histograms(predicted, exact, bins)?;
    Ok(p.heights
        .iter()
        .zip(&e.heights)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
}
