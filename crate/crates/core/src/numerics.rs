//! Dense linear algebra and seeded sampling used by the rest of the crate.
//!
//! Matrices are row-major `f64` buffers. Least squares goes through a
//! Householder QR factorization with column pivoting; the ratio of the
//! extreme diagonal entries of `R` serves as the condition estimate.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default cap on the condition estimate of `GᵀG` above which a system is
/// treated as singular.
pub const DEFAULT_CONDITION_CAP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix buffer length",
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("matrix entries must be finite"));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    what: "row length",
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Matrix::from_vec(rows.len(), cols, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Matrix with i.i.d. standard-normal entries.
    pub fn gaussian(rows: usize, cols: usize, rng: &mut RngStream) -> Self {
        Matrix::from_fn(rows, cols, |_, _| rng.standard_normal())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// New matrix made of the given rows, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Matrix> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(invalid(format!(
                    "row index {i} out of range for {} rows",
                    self.rows
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        })
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                what: "matmul inner dimension",
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Numerical rank via pivoted QR with a relative tolerance on `R`'s diagonal.
    pub fn rank(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            return 0;
        }
        let qr = PivotedQr::factor(self);
        let diag = qr.diagonal();
        let largest = diag.first().copied().unwrap_or(0.0).abs();
        if largest == 0.0 {
            return 0;
        }
        let tol = largest * 1e-10 * self.rows.max(self.cols) as f64;
        diag.iter().filter(|d| d.abs() > tol).count()
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(invalid("vector entries must be finite"));
        }
        Ok(Vector(data))
    }

    pub fn zeros(len: usize) -> Self {
        Vector(vec![0.0; len])
    }

    pub fn gaussian(len: usize, rng: &mut RngStream) -> Self {
        Vector((0..len).map(|_| rng.standard_normal()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `‖self − other‖ / max(‖other‖, tiny)`.
    pub fn relative_error(&self, reference: &Vector) -> f64 {
        let diff: f64 = self
            .0
            .iter()
            .zip(&reference.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        diff / reference.norm().max(f64::MIN_POSITIVE)
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub fn mat_vec(a: &Matrix, x: &Vector) -> Result<Vector> {
    if a.cols != x.len() {
        return Err(Error::DimensionMismatch {
            what: "mat_vec columns vs vector length",
            expected: a.cols,
            got: x.len(),
        });
    }
    Ok(Vector(
        (0..a.rows)
            .map(|i| a.row(i).iter().zip(x.as_slice()).map(|(u, v)| u * v).sum())
            .collect(),
    ))
}

/// Householder QR with column pivoting, `A P = Q R`.
///
/// `Q` is kept implicitly as the list of unit Householder vectors; the upper
/// triangle of `work` holds `R`.
struct PivotedQr {
    work: Matrix,
    perm: Vec<usize>,
    vs: Vec<Vec<f64>>,
}

impl PivotedQr {
    fn factor(a: &Matrix) -> Self {
        let (m, n) = (a.rows, a.cols);
        let mut w = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let steps = m.min(n);
        let mut vs = Vec::with_capacity(steps);

        for k in 0..steps {
            // pivot: largest remaining column norm
            let mut best = k;
            let mut best_norm = -1.0;
            for j in k..n {
                let s: f64 = (k..m).map(|i| w[(i, j)] * w[(i, j)]).sum();
                if s > best_norm {
                    best_norm = s;
                    best = j;
                }
            }
            if best != k {
                for i in 0..m {
                    w.data.swap(i * n + k, i * n + best);
                }
                perm.swap(k, best);
            }

            let norm = best_norm.max(0.0).sqrt();
            let mut v: Vec<f64> = (k..m).map(|i| w[(i, k)]).collect();
            if norm == 0.0 {
                vs.push(vec![0.0; v.len()]);
                continue;
            }
            let alpha = if v[0] >= 0.0 { -norm } else { norm };
            v[0] -= alpha;
            let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if vnorm > 0.0 {
                v.iter_mut().for_each(|x| *x /= vnorm);
            }
            for j in k..n {
                let dot: f64 = (k..m).map(|i| v[i - k] * w[(i, j)]).sum();
                for i in k..m {
                    w[(i, j)] -= 2.0 * v[i - k] * dot;
                }
            }
            vs.push(v);
        }
        PivotedQr { work: w, perm, vs }
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.vs.len()).map(|k| self.work[(k, k)]).collect()
    }

    fn apply_qt(&self, y: &mut [f64]) {
        for (k, v) in self.vs.iter().enumerate() {
            let dot: f64 = v.iter().zip(&y[k..]).map(|(a, b)| a * b).sum();
            for (yi, vi) in y[k..].iter_mut().zip(v) {
                *yi -= 2.0 * vi * dot;
            }
        }
    }
}

/// Minimizes `‖G z − y‖₂` for a tall or square `G` with full column rank.
///
/// Rejects systems whose estimated `cond(GᵀG)` exceeds `condition_cap`.
pub fn least_squares_solve_with_cap(g: &Matrix, y: &Vector, condition_cap: f64) -> Result<Vector> {
    let (q, p) = (g.rows, g.cols);
    if y.len() != q {
        return Err(Error::DimensionMismatch {
            what: "least squares right-hand side",
            expected: q,
            got: y.len(),
        });
    }
    if p == 0 {
        return Err(invalid("least squares needs at least one unknown"));
    }
    if q < p {
        return Err(Error::InsufficientResults { have: q, need: p });
    }

    let qr = PivotedQr::factor(g);
    let diag = qr.diagonal();
    let largest = diag[0].abs();
    let smallest = diag[p - 1].abs();
    let condition = if smallest == 0.0 {
        f64::INFINITY
    } else {
        (largest / smallest).powi(2)
    };
    if !(condition <= condition_cap) {
        return Err(Error::Singular { condition });
    }

    let mut rhs = y.as_slice().to_vec();
    qr.apply_qt(&mut rhs);

    let mut z_perm = vec![0.0; p];
    for k in (0..p).rev() {
        let s: f64 = ((k + 1)..p).map(|j| qr.work[(k, j)] * z_perm[j]).sum();
        z_perm[k] = (rhs[k] - s) / qr.work[(k, k)];
    }
    let mut z = vec![0.0; p];
    for (k, &col) in qr.perm.iter().enumerate() {
        z[col] = z_perm[k];
    }
    Vector::new(z).map_err(|_| Error::Singular { condition })
}

pub fn least_squares_solve(g: &Matrix, y: &Vector) -> Result<Vector> {
    least_squares_solve_with_cap(g, y, DEFAULT_CONDITION_CAP)
}

/// Reproducible random stream identified by `(seed, stream id)`.
///
/// Backed by ChaCha8, whose output is specified bit-for-bit, so the same
/// identifiers give the same draws on every platform.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Independent child stream keyed by `path`. Depends only on the
    /// identifiers of `self`, never on how many draws were taken from it.
    pub fn substream(&self, path: &[u64]) -> RngStream {
        let mut h = splitmix64(self.seed ^ splitmix64(self.stream));
        for &tag in path {
            h = splitmix64(h ^ splitmix64(tag.wrapping_add(0xA076_1D64_78BD_642F)));
        }
        RngStream::new(h, self.stream)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        // widening multiply keeps the bias below 2^-64 * n
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Box-Muller transform of two uniform draws.
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

pub fn sample_uniform(lo: f64, hi: f64, rng: &mut RngStream) -> Result<f64> {
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(invalid(format!("uniform range [{lo}, {hi}] is empty")));
    }
    if lo == hi {
        return Ok(lo);
    }
    Ok((lo + (hi - lo) * rng.next_f64()).min(hi))
}

pub fn sample_gaussian(mean: f64, std: f64, rng: &mut RngStream) -> Result<f64> {
    if !(std >= 0.0) {
        return Err(invalid(format!("standard deviation {std} is negative")));
    }
    if std == 0.0 {
        return Ok(mean);
    }
    Ok(mean + std * rng.standard_normal())
}
