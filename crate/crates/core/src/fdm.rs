//! Finite-difference discretization of `-Δ` on the unit interval and square,
//! with power and inverse-power iteration on the resulting matrices.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{grid_spacing, uniform_grid, DomainBox};

/// Square matrix in compressed sparse row layout.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(i, j, _)) = triplets.iter().find(|(i, j, _)| *i >= n || *j >= n) {
            return Err(Error::InvalidArgument(format!(
                "entry ({i}, {j}) outside a {n}x{n} matrix"
            )));
        }
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; n + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *values.last_mut().expect("previous entry") += v;
                continue;
            }
            col_idx.push(j);
            values.push(v);
            row_ptr[i + 1] += 1;
            last = Some((i, j));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Stores every nonzero of a dense square matrix.
    pub fn from_dense(a: ArrayView2<'_, f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                actual: a.ncols(),
                context: "square matrix columns",
            });
        }
        let triplets = a
            .indexed_iter()
            .filter(|(_, v)| **v != 0.0)
            .map(|((i, j), v)| (i, j, *v))
            .collect();
        SparseMatrix::from_triplets(a.nrows(), triplets)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(column, value)` pairs of row `i`, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        Ok((0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect())
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                a[[i, j]] = v;
            }
        }
        a
    }

    /// Exact symmetry check.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    /// `(lower, upper)` bandwidths.
    pub fn bandwidth(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for i in 0..self.n {
            for (j, _) in self.row(i) {
                kl = kl.max(i.saturating_sub(j));
                ku = ku.max(j.saturating_sub(i));
            }
        }
        (kl, ku)
    }

    /// `A - σI`.
    pub fn shifted(&self, sigma: f64) -> SparseMatrix {
        let mut triplets: Vec<(usize, usize, f64)> = (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .collect();
        triplets.extend((0..self.n).map(|i| (i, i, -sigma)));
        SparseMatrix::from_triplets(self.n, triplets).expect("indices already in range")
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: len,
                context: "vector length vs matrix size",
            });
        }
        Ok(())
    }
}

/// Interior unknown index of grid node `(i_1, ..., i_d)`, first index fastest.
fn grid_index(idx: &[usize], n_h: usize) -> usize {
    idx.iter().rev().fold(0, |acc, &i| acc * n_h + i)
}

/// 3-point (d = 1) or 5-point (d = 2) stencil for `-Δ` with homogeneous
/// Dirichlet conditions on the unit box, scaled by `1/h²`.
pub fn assemble_neg_laplacian(d: usize, n_h: usize) -> Result<SparseMatrix> {
    if !(1..=2).contains(&d) {
        return Err(Error::InvalidArgument(format!(
            "finite differences support d = 1 or 2, got {d}"
        )));
    }
    if n_h < 2 {
        return Err(Error::InvalidArgument("n_h must be at least 2".into()));
    }
    let h = grid_spacing(n_h, 0.0, 1.0);
    let inv_h2 = 1.0 / (h * h);
    let n = n_h.pow(d as u32);
    let mut triplets = Vec::with_capacity(n * (2 * d + 1));
    let mut idx = vec![0usize; d];
    for p in 0..n {
        let mut rem = p;
        for slot in idx.iter_mut() {
            *slot = rem % n_h;
            rem /= n_h;
        }
        triplets.push((p, p, 2.0 * d as f64 * inv_h2));
        for axis in 0..d {
            let i = idx[axis];
            let mut nb = idx.clone();
            if i > 0 {
                nb[axis] = i - 1;
                triplets.push((p, grid_index(&nb, n_h), -inv_h2));
            }
            if i + 1 < n_h {
                nb[axis] = i + 1;
                triplets.push((p, grid_index(&nb, n_h), -inv_h2));
            }
        }
    }
    SparseMatrix::from_triplets(n, triplets)
}

/// Smallest eigenvalue of the assembled matrix: `d (2/h²)(1 - cos πh)`.
pub fn discrete_ground_eigenvalue(d: usize, n_h: usize) -> f64 {
    discrete_mode_eigenvalue(n_h, 1) * d as f64
}

/// `(2/h²)(1 - cos mπh)`, the `m`-th eigenvalue of the 1D matrix.
pub fn discrete_mode_eigenvalue(n_h: usize, m: usize) -> f64 {
    let h = grid_spacing(n_h, 0.0, 1.0);
    2.0 / (h * h) * (1.0 - (m as f64 * PI * h).cos())
}

#[derive(Clone, Debug, PartialEq)]
enum LuStorage {
    /// Packed `L\U` with unit lower diagonal, `piv[k]` the row swapped
    /// into position `k` at step `k`.
    Dense { lu: Array2<f64> },
    /// `U` rows stored from the diagonal over `ku + kl + 1` columns;
    /// `l[k]` holds the `kl` multipliers of step `k`.
    Banded {
        kl: usize,
        width: usize,
        u: Vec<f64>,
        l: Vec<f64>,
    },
}

/// LU factors with partial pivoting.
#[derive(Clone, Debug, PartialEq)]
pub struct LuFactors {
    n: usize,
    piv: Vec<usize>,
    storage: LuStorage,
}

fn pivot_floor(max_abs: f64, n: usize) -> f64 {
    max_abs * n as f64 * f64::EPSILON
}

impl LuFactors {
    /// Banded factorization when the band is narrow, dense otherwise.
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        let (kl, ku) = a.bandwidth();
        if 2 * kl + ku + 1 < a.n() {
            LuFactors::factor_banded(a)
        } else {
            LuFactors::factor_dense(a.to_dense().view())
        }
    }

    pub fn factor_dense(a: ArrayView2<'_, f64>) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() || n == 0 {
            return Err(Error::InvalidArgument(
                "dense LU needs a non-empty square matrix".into(),
            ));
        }
        let floor = pivot_floor(a.iter().fold(0.0f64, |m, v| m.max(v.abs())), n);
        let mut lu = a.to_owned();
        let mut piv = vec![0; n];
        for k in 0..n {
            let (p, pmax) =
                (k..n)
                    .map(|i| (i, lu[[i, k]].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pmax > floor) {
                return Err(Error::Singular(k));
            }
            piv[k] = p;
            if p != k {
                for j in 0..n {
                    lu.swap([k, j], [p, j]);
                }
            }
            let d = lu[[k, k]];
            for i in k + 1..n {
                let m = lu[[i, k]] / d;
                lu[[i, k]] = m;
                if m != 0.0 {
                    for j in k + 1..n {
                        lu[[i, j]] -= m * lu[[k, j]];
                    }
                }
            }
        }
        Ok(LuFactors {
            n,
            piv,
            storage: LuStorage::Dense { lu },
        })
    }

    pub fn factor_banded(a: &SparseMatrix) -> Result<Self> {
        let n = a.n();
        if n == 0 {
            return Err(Error::InvalidArgument("banded LU needs a non-empty matrix".into()));
        }
        let (kl, ku) = a.bandwidth();
        let width = kl + ku + 1;
        let floor = pivot_floor(a.values().iter().fold(0.0f64, |m, v| m.max(v.abs())), n);
        // working rows: row i stores columns i - kl .. i + ku + kl, offset by kl
        let span = 2 * kl + ku + 1;
        let mut w = vec![0.0; n * span];
        for i in 0..n {
            for (j, v) in a.row(i) {
                w[i * span + (j + kl - i)] = v;
            }
        }
        let at = |i: usize, j: usize| i * span + (j + kl - i);
        let mut piv = vec![0; n];
        let mut l = vec![0.0; n * kl];
        let mut u = vec![0.0; n * width];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let (p, pmax) =
                (k..=last)
                    .map(|i| (i, w[at(i, k)].abs()))
                    .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pmax > floor) {
                return Err(Error::Singular(k));
            }
            piv[k] = p;
            let jmax = (k + width - 1).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    w.swap(at(k, j), at(p, j));
                }
            }
            let d = w[at(k, k)];
            for i in k + 1..=last {
                let m = w[at(i, k)] / d;
                l[k * kl + (i - k - 1)] = m;
                if m != 0.0 {
                    for j in k + 1..=jmax {
                        w[at(i, j)] -= m * w[at(k, j)];
                    }
                }
            }
            for j in k..=jmax {
                u[k * width + (j - k)] = w[at(k, j)];
            }
        }
        Ok(LuFactors {
            n,
            piv,
            storage: LuStorage::Banded { kl, width, u, l },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_banded(&self) -> bool {
        matches!(self.storage, LuStorage::Banded { .. })
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: b.len(),
                context: "right-hand side length",
            });
        }
        let n = self.n;
        let mut x = b.to_vec();
        match &self.storage {
            LuStorage::Dense { lu } => {
                for k in 0..n {
                    x.swap(k, self.piv[k]);
                }
                for i in 0..n {
                    let s: f64 = (0..i).map(|j| lu[[i, j]] * x[j]).sum();
                    x[i] -= s;
                }
                for i in (0..n).rev() {
                    let s: f64 = (i + 1..n).map(|j| lu[[i, j]] * x[j]).sum();
                    x[i] = (x[i] - s) / lu[[i, i]];
                }
            }
            LuStorage::Banded { kl, width, u, l } => {
                for k in 0..n {
                    x.swap(k, self.piv[k]);
                    let xk = x[k];
                    for (r, i) in (k + 1..=(k + kl).min(n - 1)).enumerate() {
                        x[i] -= l[k * kl + r] * xk;
                    }
                }
                for i in (0..n).rev() {
                    let jmax = (i + width - 1).min(n - 1);
                    let s: f64 = (i + 1..=jmax).map(|j| u[i * width + (j - i)] * x[j]).sum();
                    x[i] = (x[i] - s) / u[i * width];
                }
            }
        }
        Ok(x)
    }

    /// Rebuilds `A` from the factors.
    pub fn reconstruct(&self) -> Array2<f64> {
        let n = self.n;
        let mut a = Array2::zeros((n, n));
        match &self.storage {
            LuStorage::Dense { lu } => {
                for i in 0..n {
                    for j in 0..n {
                        let kmax = i.min(j);
                        let mut s = if i <= j {
                            lu[[i, j]]
                        } else {
                            lu[[i, kmax]] * lu[[kmax, j]]
                        };
                        for k in 0..kmax {
                            s += lu[[i, k]] * lu[[k, j]];
                        }
                        a[[i, j]] = s;
                    }
                }
                for k in (0..n).rev() {
                    let p = self.piv[k];
                    if p != k {
                        for j in 0..n {
                            a.swap([k, j], [p, j]);
                        }
                    }
                }
            }
            LuStorage::Banded { kl, width, u, l } => {
                for i in 0..n {
                    for j in i..(i + width).min(n) {
                        a[[i, j]] = u[i * width + (j - i)];
                    }
                }
                for k in (0..n).rev() {
                    for (r, i) in (k + 1..=(k + kl).min(n - 1)).enumerate() {
                        let m = l[k * kl + r];
                        if m != 0.0 {
                            for j in 0..n {
                                let v = a[[k, j]];
                                a[[i, j]] += m * v;
                            }
                        }
                    }
                    let p = self.piv[k];
                    if p != k {
                        for j in 0..n {
                            a.swap([k, j], [p, j]);
                        }
                    }
                }
            }
        }
        a
    }
}

/// Result of a matrix power-type iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationResult {
    pub lambda: f64,
    /// Unit Euclidean norm.
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn unit(v: &[f64]) -> Result<Vec<f64>> {
    let n = l2(v);
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Degenerate(format!("iterate has norm {n}")));
    }
    Ok(v.iter().map(|x| x / n).collect())
}

fn rayleigh(a: &SparseMatrix, u: &[f64]) -> Result<f64> {
    let au = a.matvec(u)?;
    Ok(au.iter().zip(u).map(|(x, y)| x * y).sum::<f64>() / u.iter().map(|x| x * x).sum::<f64>())
}

/// Distance between successive unit iterates, blind to a sign flip.
fn step_distance(new: &[f64], old: &[f64]) -> f64 {
    let minus = new.iter().zip(old).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let plus = new.iter().zip(old).map(|(a, b)| (a + b).powi(2)).sum::<f64>();
    minus.min(plus).sqrt()
}

fn iterate(
    a: &SparseMatrix,
    u0: &[f64],
    k_max: usize,
    tol: f64,
    mut apply: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<IterationResult> {
    a.check_len(u0.len())?;
    let mut u = unit(u0)?;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < k_max {
        let next = unit(&apply(&u)?)?;
        iterations += 1;
        let dist = step_distance(&next, &u);
        u = next;
        if dist < tol {
            converged = true;
            break;
        }
    }
    Ok(IterationResult {
        lambda: rayleigh(a, &u)?,
        vector: u,
        iterations,
        converged,
    })
}

/// Power iteration for the eigenvalue of largest modulus.
pub fn power_method(a: &SparseMatrix, u0: &[f64], k_max: usize, tol: f64) -> Result<IterationResult> {
    iterate(a, u0, k_max, tol, |u| a.matvec(u))
}

/// Inverse iteration on `A - shift·I`; the eigenvalue reported is the
/// Rayleigh quotient of `A` itself.
pub fn inverse_power_method(
    a: &SparseMatrix,
    u0: &[f64],
    k_max: usize,
    tol: f64,
    shift: f64,
) -> Result<IterationResult> {
    let lu = LuFactors::factor(&a.shifted(shift))?;
    iterate(a, u0, k_max, tol, |u| lu.solve(u))
}

/// Errors of the finite-difference ground state against `Π sin(πx_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FdmError {
    pub n_h: usize,
    pub lambda: f64,
    pub lambda_err: f64,
    pub u_err: f64,
    pub iterations: usize,
}

/// Solves the grid problem by inverse iteration and compares with the
/// continuous ground eigenpair. Both eigenvectors are RMS-normalized and
/// sign-aligned before the max-norm comparison.
pub fn fdm_reference_error(d: usize, n_h: usize) -> Result<FdmError> {
    let a = assemble_neg_laplacian(d, n_h)?;
    let ones = vec![1.0; a.n()];
    let res = inverse_power_method(&a, &ones, 10_000, 1e-13, 0.0)?;
    let grid = uniform_grid(n_h, &DomainBox::unit(d)?)?;
    let exact: Array1<f64> = grid
        .points()
        .rows()
        .into_iter()
        .map(|p| p.iter().map(|x| (PI * x).sin()).product())
        .collect();
    let u_err = crate::training::eigenfunction_error(Array1::from(res.vector.clone()).view(), exact.view())?;
    Ok(FdmError {
        n_h,
        lambda: res.lambda,
        lambda_err: (res.lambda - d as f64 * PI * PI).abs(),
        u_err,
        iterations: res.iterations,
    })
}
