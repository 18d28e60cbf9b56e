//! Collocation point sets and the discrete (root-mean-square) norm.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{num_row, write_csv};

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_d, hi_d]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidBox(format!(
                "bounds of length {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::InvalidBox(format!("dimension {i}: lo {l} must be below hi {h}")));
            }
        }
        Ok(DomainBox { lo, hi })
    }

    /// `[lo, hi]^d`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        DomainBox::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn unit(dim: usize) -> Result<Self> {
        DomainBox::cube(dim, 0.0, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).product()
    }

    pub fn contains(&self, point: ArrayView1<'_, f64>) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(x, (l, h))| *l <= *x && *x <= *h)
    }
}

/// Fixed set of collocation points, one row per point.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    points: Array2<f64>,
    domain: DomainBox,
}

impl SampleSet {
    pub fn new(points: Array2<f64>, domain: DomainBox) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::InvalidArgument("empty sample set".into()));
        }
        if points.ncols() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                actual: points.ncols(),
                context: "sample dimension vs domain",
            });
        }
        if let Some(i) = points.rows().into_iter().position(|p| !domain.contains(p)) {
            return Err(Error::InvalidArgument(format!("point {i} lies outside the domain")));
        }
        Ok(SampleSet { points, domain })
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let header: Vec<String> = (1..=self.dim()).map(|i| format!("x{i}")).collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        write_csv(
            path,
            &header,
            self.points
                .rows()
                .into_iter()
                .map(|r| num_row(r.as_slice().unwrap_or(&r.to_vec()))),
        )
    }
}

/// Latin hypercube design: in every dimension each of the `n` equal-width
/// strata holds exactly one point, placed uniformly inside its stratum.
pub fn lhs_sample(n: usize, domain: &DomainBox, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("lhs needs n >= 1".into()));
    }
    let d = domain.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(0.0, 1.0);
    let mut points = Array2::zeros((n, d));
    for j in 0..d {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        let (lo, hi) = (domain.lo[j], domain.hi[j]);
        for (i, &k) in strata.iter().enumerate() {
            let u: f64 = unit.sample(&mut rng);
            let x = lo + (k as f64 + u) / n as f64 * (hi - lo);
            points[[i, j]] = x.min(hi);
        }
    }
    SampleSet::new(points, domain.clone())
}

/// Uniform i.i.d. points in the box.
pub fn uniform_random(n: usize, domain: &DomainBox, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("uniform sampling needs n >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Uniform::new(0.0, 1.0);
    let d = domain.dim();
    let mut points = Array2::zeros((n, d));
    for i in 0..n {
        for j in 0..d {
            let u: f64 = unit.sample(&mut rng);
            points[[i, j]] = domain.lo[j] + u * domain.width(j);
        }
    }
    SampleSet::new(points, domain.clone())
}

/// Grid spacing shared with the finite-difference assembly.
pub fn grid_spacing(n_h: usize, lo: f64, hi: f64) -> f64 {
    (hi - lo) / (n_h + 1) as f64
}

/// Interior tensor grid with `n_h` nodes per axis, spacing
/// `(hi - lo)/(n_h + 1)`. The first coordinate varies fastest, matching the
/// unknown ordering of the finite-difference matrices.
pub fn uniform_grid(n_h: usize, domain: &DomainBox) -> Result<SampleSet> {
    if n_h < 2 {
        return Err(Error::InvalidArgument("uniform grid needs n_h >= 2".into()));
    }
    let d = domain.dim();
    let total = n_h
        .checked_pow(d as u32)
        .ok_or_else(|| Error::InvalidArgument(format!("grid {n_h}^{d} overflows")))?;
    let mut points = Array2::zeros((total, d));
    for p in 0..total {
        let mut rem = p;
        for j in 0..d {
            let idx = rem % n_h;
            rem /= n_h;
            let h = grid_spacing(n_h, domain.lo[j], domain.hi[j]);
            points[[p, j]] = domain.lo[j] + (idx + 1) as f64 * h;
        }
    }
    SampleSet::new(points, domain.clone())
}

/// `sqrt((1/N) Σ v_i²)`.
pub fn discrete_norm(values: ArrayView1<'_, f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

/// Scales `values` to unit discrete norm.
pub fn normalize(values: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let norm = discrete_norm(values);
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::Degenerate(format!("cannot normalize vector of norm {norm}")));
    }
    Ok(values.mapv(|v| v / norm))
}

#[cfg(test)]
mod tests {
    use ndarray::array;
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn four_point_lhs_fills_each_quarter() {
        let set = lhs_sample(4, &DomainBox::unit(1).unwrap(), 3).unwrap();
        let mut xs: Vec<f64> = set.points().column(0).to_vec();
        xs.sort_by(f64::total_cmp);
        for (k, x) in xs.iter().enumerate() {
            assert!(*x >= k as f64 * 0.25 && *x <= (k + 1) as f64 * 0.25, "{xs:?}");
        }
    }

    #[test]
    fn lhs_deterministic_in_seed() {
        let b = DomainBox::unit(3).unwrap();
        assert_eq!(lhs_sample(50, &b, 9).unwrap(), lhs_sample(50, &b, 9).unwrap());
        assert_ne!(lhs_sample(50, &b, 9).unwrap(), lhs_sample(50, &b, 10).unwrap());
    }

    #[test]
    fn lhs_histogram_counts() {
        // counting oracle: 10⁴ points, 100 bins, 100 strata per bin
        let set = lhs_sample(10_000, &DomainBox::unit(2).unwrap(), 1).unwrap();
        for j in 0..2 {
            let mut bins = [0usize; 100];
            for &x in set.points().column(j) {
                bins[((x * 100.0) as usize).min(99)] += 1;
            }
            assert!(bins.iter().all(|&c| c == 100), "{bins:?}");
        }
    }

    #[test]
    fn invalid_box() {
        assert!(DomainBox::new(vec![1.0], vec![1.0]).is_err());
        assert!(DomainBox::new(vec![0.0, 0.0], vec![1.0]).is_err());
    }

    #[test]
    fn grid_points() {
        let g = uniform_grid(3, &DomainBox::unit(1).unwrap()).unwrap();
        assert_eq!(g.points().column(0).to_vec(), vec![0.25, 0.5, 0.75]);
        let g2 = uniform_grid(3, &DomainBox::unit(2).unwrap()).unwrap();
        assert_eq!(g2.len(), 9);
        assert_eq!(g2.points().row(1).to_vec(), vec![0.5, 0.25]);
        assert_eq!(g2.points().row(3).to_vec(), vec![0.25, 0.5]);
        assert!(uniform_grid(1, &DomainBox::unit(1).unwrap()).is_err());
    }

    #[test]
    fn norm_examples() {
        assert_eq!(discrete_norm(array![1.0, 1.0, 1.0].view()), 1.0);
        assert!((discrete_norm(array![3.0, 4.0].view()) - (12.5f64).sqrt()).abs() < 1e-15);
        let g = uniform_grid(2000, &DomainBox::unit(1).unwrap()).unwrap();
        let s = g.points().column(0).mapv(|x| (std::f64::consts::PI * x).sin());
        assert!((discrete_norm(s.view()) - 0.5f64.sqrt()).abs() < 1e-3);
        assert!(normalize(array![0.0, 0.0].view()).is_err());
    }

    proptest! {
        #[test]
        fn norm_is_absolutely_homogeneous(v in prop::collection::vec(-1e3..1e3f64, 1..40), c in -50.0..50.0f64) {
            let a = Array1::from(v);
            let lhs = discrete_norm(a.mapv(|x| c * x).view());
            let rhs = c.abs() * discrete_norm(a.view());
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
        }

        #[test]
        fn normalized_vectors_have_unit_norm(v in prop::collection::vec(-1e3..1e3f64, 1..40)) {
            let a = Array1::from(v);
            prop_assume!(discrete_norm(a.view()) > 1e-6);
            let n = normalize(a.view()).unwrap();
            prop_assert!((discrete_norm(n.view()) - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn lhs_points_stay_in_box(n in 1usize..200, seed in any::<u64>()) {
            let b = DomainBox::new(vec![-1.0, 2.0], vec![0.5, 7.0]).unwrap();
            let set = lhs_sample(n, &b, seed).unwrap();
            for j in 0..2 {
                let mut strata: Vec<usize> = set.points().column(j).iter()
                    .map(|x| (((x - b.lo()[j]) / b.width(j) * n as f64) as usize).min(n - 1))
                    .collect();
                strata.sort_unstable();
                prop_assert_eq!(strata, (0..n).collect::<Vec<_>>());
            }
        }
    }
}
