//! Dense linear algebra used throughout the crate.
//!
//! Everything here works on small-to-moderate dense matrices stored row-major
//! in a `Vec<f64>`. The routines favour accuracy and determinism over speed:
//! a cyclic Jacobi eigensolver for symmetric matrices, spectral norms through
//! the Gram matrix, Padé scaling-and-squaring for the matrix exponential and a
//! Moore–Penrose right inverse for full-row-rank matrices.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use thiserror::Error;

/// Numeric tolerances shared by the linear-algebra routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericSettings {
    /// Relative symmetry tolerance, scaled by `max |a_ij|`.
    pub symmetry_rel_tol: f64,
    /// Maximum number of cyclic Jacobi sweeps before giving up.
    pub jacobi_max_sweeps: usize,
    /// A matrix is treated as rank deficient when `sigma_min <= rank_rel_tol * sigma_max`.
    pub rank_rel_tol: f64,
}

impl NumericSettings {
    pub const DEFAULT: NumericSettings = NumericSettings {
        symmetry_rel_tol: 1e-12,
        jacobi_max_sweeps: 60,
        rank_rel_tol: 1e-10,
    };
}

impl Default for NumericSettings {
    fn default() -> Self {
        Self::DEFAULT
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e} exceeds {tolerance:e})")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },
    #[error("Jacobi iteration did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("matrix is empty")]
    Empty,
    #[error("matrix is rank deficient (sigma_min {sigma_min:e}, sigma_max {sigma_max:e})")]
    RankDeficient { sigma_min: f64, sigma_max: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("expected {expected} entries, got {actual}")]
    BadLength { expected: usize, actual: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Dense row-major real matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(LinalgError::BadLength {
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from a closure. Panics if the closure yields a non-finite value.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let v = f(i, j);
                assert!(v.is_finite(), "non-finite entry at ({i}, {j})");
                data.push(v);
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(LinalgError::ShapeMismatch("ragged rows".into()));
        }
        Self::new(r, c, rows.concat())
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(LinalgError::ShapeMismatch(format!(
                "{:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(LinalgError::ShapeMismatch(format!(
                "cannot multiply {:?} by {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(LinalgError::ShapeMismatch(format!(
                "matrix has {} columns, vector has {} entries",
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// `(A + A^T) / 2`.
    pub fn symmetric_part(&self) -> Result<Self> {
        self.require_square()?;
        Ok(Self::from_fn(self.rows, self.cols, |i, j| {
            0.5 * (self[(i, j)] + self[(j, i)])
        }))
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self, settings: &NumericSettings) -> bool {
        self.is_square() && self.max_asymmetry() <= settings.symmetry_rel_tol * self.max_abs()
    }

    pub fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(LinalgError::NonSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(LinalgError::ShapeMismatch(format!(
                "cannot stack {} columns on {} columns",
                self.cols, other.cols
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }

    /// Block-diagonal matrix with `copies` repetitions of `self`.
    pub fn block_diag_repeat(&self, copies: usize) -> Self {
        let mut out = Self::zeros(self.rows * copies, self.cols * copies);
        for c in 0..copies {
            for i in 0..self.rows {
                for j in 0..self.cols {
                    out[(c * self.rows + i, c * self.cols + j)] = self[(i, j)];
                }
            }
        }
        out
    }

    /// Parses the whitespace matrix text format: a `rows cols` header line
    /// followed by one line per row. Blank lines and `#` comments are skipped.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(LinalgError::Parse {
            line: 0,
            message: "missing `rows cols` header".into(),
        })?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(usize::from_str)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| LinalgError::Parse {
                line: hline,
                message: format!("bad header: {e}"),
            })?;
        if dims.len() != 2 {
            return Err(LinalgError::Parse {
                line: hline,
                message: "header must be `rows cols`".into(),
            });
        }
        let (rows, cols) = (dims[0], dims[1]);
        let mut data = Vec::with_capacity(rows * cols);
        let mut seen = 0;
        for (lno, line) in lines {
            if seen == rows {
                return Err(LinalgError::Parse {
                    line: lno,
                    message: format!("more than {rows} data rows"),
                });
            }
            let before = data.len();
            for tok in line.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| LinalgError::Parse {
                    line: lno,
                    message: format!("not a real number: `{tok}`"),
                })?;
                if !v.is_finite() {
                    return Err(LinalgError::Parse {
                        line: lno,
                        message: format!("non-finite entry `{tok}`"),
                    });
                }
                data.push(v);
            }
            if data.len() - before != cols {
                return Err(LinalgError::Parse {
                    line: lno,
                    message: format!("expected {cols} entries, found {}", data.len() - before),
                });
            }
            seen += 1;
        }
        if seen != rows {
            return Err(LinalgError::Parse {
                line: text.lines().count(),
                message: format!("expected {rows} data rows, found {seen}"),
            });
        }
        Self::new(rows, cols, data)
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.rows, self.cols)?;
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| format!("{v:e}")).collect();
            writeln!(f, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `j` is the eigenvector for `eigenvalues[j]`.
    pub eigenvectors: DenseMatrix,
}

impl SymmetricEigen {
    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty spectrum")
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }
}

pub fn eig_symmetric(a: &DenseMatrix) -> Result<SymmetricEigen> {
    eig_symmetric_with(a, &NumericSettings::DEFAULT)
}

/// Cyclic Jacobi eigensolver.
///
/// Rotations below a threshold are skipped during the first sweeps; after
/// that, off-diagonal entries that no longer affect either diagonal entry in
/// floating point are set to zero, so the off-diagonal mass reaches exactly 0
/// on convergence.
pub fn eig_symmetric_with(a: &DenseMatrix, settings: &NumericSettings) -> Result<SymmetricEigen> {
    a.require_square()?;
    let n = a.rows();
    if n == 0 {
        return Err(LinalgError::Empty);
    }
    let tolerance = settings.symmetry_rel_tol * a.max_abs();
    let asymmetry = a.max_asymmetry();
    if asymmetry > tolerance {
        return Err(LinalgError::NotSymmetric { asymmetry, tolerance });
    }

    // Work on the symmetrized copy so tiny asymmetries do not bias the result.
    let mut m = a.symmetric_part()?;
    let mut v = DenseMatrix::identity(n);
    let mut d: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    let mut b = d.clone();
    let mut z = vec![0.0; n];

    let mut converged = n == 1;
    for sweep in 0..settings.jacobi_max_sweeps {
        if converged {
            break;
        }
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)].abs();
            }
        }
        if off == 0.0 {
            converged = true;
            break;
        }
        let thresh = if sweep < 3 { 0.2 * off / (n * n) as f64 } else { 0.0 };
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let g = 100.0 * apq.abs();
                if sweep > 3 && d[p].abs() + g == d[p].abs() && d[q].abs() + g == d[q].abs() {
                    m[(p, q)] = 0.0;
                    continue;
                }
                if apq.abs() <= thresh {
                    continue;
                }
                let h = d[q] - d[p];
                let t = if h.abs() + g == h.abs() {
                    apq / h
                } else {
                    let theta = 0.5 * h / apq;
                    let t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let h = t * apq;
                z[p] -= h;
                z[q] += h;
                d[p] -= h;
                d[q] += h;
                m[(p, q)] = 0.0;
                let rotate = |m: &mut DenseMatrix, i: usize, j: usize, k: usize, l: usize| {
                    let g = m[(i, j)];
                    let h = m[(k, l)];
                    m[(i, j)] = g - s * (h + g * tau);
                    m[(k, l)] = h + s * (g - h * tau);
                };
                for j in 0..p {
                    rotate(&mut m, j, p, j, q);
                }
                for j in (p + 1)..q {
                    rotate(&mut m, p, j, j, q);
                }
                for j in (q + 1)..n {
                    rotate(&mut m, p, j, q, j);
                }
                for j in 0..n {
                    rotate(&mut v, j, p, j, q);
                }
            }
        }
        for p in 0..n {
            b[p] += z[p];
            d[p] = b[p];
            z[p] = 0.0;
        }
    }
    if !converged {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)].abs();
            }
        }
        if off != 0.0 {
            return Err(LinalgError::NoConvergence {
                sweeps: settings.jacobi_max_sweeps,
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let eigenvalues = order.iter().map(|&i| d[i]).collect();
    let eigenvectors = DenseMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(SymmetricEigen {
        eigenvalues,
        eigenvectors,
    })
}

/// Largest singular value, from the spectrum of the smaller Gram matrix.
pub fn spectral_norm(a: &DenseMatrix) -> Result<f64> {
    if a.is_empty() {
        return Err(LinalgError::Empty);
    }
    let at = a.transpose();
    let gram = if a.rows() >= a.cols() {
        at.matmul(a)?
    } else {
        a.matmul(&at)?
    };
    let gram = gram.symmetric_part()?;
    let eig = eig_symmetric(&gram)?;
    Ok(eig.max_eigenvalue().max(0.0).sqrt())
}

/// Power iteration on `A^T A` with a fixed starting vector and iteration count.
/// Only used to cross-check [`spectral_norm`].
pub fn spectral_norm_power(a: &DenseMatrix, iterations: usize) -> Result<f64> {
    if a.is_empty() {
        return Err(LinalgError::Empty);
    }
    let at = a.transpose();
    let n = a.cols();
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 + 1.0).sqrt().fract()).collect();
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let nx = norm2(&x);
        if nx == 0.0 {
            return Ok(0.0);
        }
        x.iter_mut().for_each(|v| *v /= nx);
        let y = at.matvec(&a.matvec(&x)?)?;
        estimate = dot(&x, &y);
        x = y;
    }
    Ok(estimate.max(0.0).sqrt())
}

/// LU factorization with partial pivoting, used to solve `A X = B`.
pub fn solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    a.require_square()?;
    let n = a.rows();
    if b.rows() != n {
        return Err(LinalgError::ShapeMismatch(format!(
            "rhs has {} rows, system has {n}",
            b.rows()
        )));
    }
    let mut lu = a.clone();
    let mut x = b.clone();
    let m = b.cols();
    let scale = a.max_abs();
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| lu[(i, k)].abs().total_cmp(&lu[(j, k)].abs()))
            .expect("nonempty range");
        if lu[(piv, k)].abs() <= f64::EPSILON * scale * n as f64 || lu[(piv, k)] == 0.0 {
            return Err(LinalgError::Singular);
        }
        if piv != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(piv, j)];
                lu[(piv, j)] = tmp;
            }
            for j in 0..m {
                let tmp = x[(k, j)];
                x[(k, j)] = x[(piv, j)];
                x[(piv, j)] = tmp;
            }
        }
        let pivot = lu[(k, k)];
        for i in (k + 1)..n {
            let f = lu[(i, k)] / pivot;
            if f == 0.0 {
                continue;
            }
            lu[(i, k)] = f;
            for j in (k + 1)..n {
                lu[(i, j)] -= f * lu[(k, j)];
            }
            for j in 0..m {
                x[(i, j)] -= f * x[(k, j)];
            }
        }
    }
    for k in (0..n).rev() {
        for j in 0..m {
            let mut s = x[(k, j)];
            for l in (k + 1)..n {
                s -= lu[(k, l)] * x[(l, j)];
            }
            x[(k, j)] = s / lu[(k, k)];
        }
    }
    Ok(x)
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by scaling and squaring with the degree-13 Padé approximant.
pub fn expm(a: &DenseMatrix) -> Result<DenseMatrix> {
    a.require_square()?;
    let n = a.rows();
    if n == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }
    let norm = a.norm_one();
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = a.scale(0.5f64.powi(squarings));
    let ident = DenseMatrix::identity(n);
    let a2 = a.matmul(&a)?;
    let a4 = a2.matmul(&a2)?;
    let a6 = a4.matmul(&a2)?;
    let b = &PADE13;
    let lin = |mats: [(&DenseMatrix, f64); 4]| -> Result<DenseMatrix> {
        let mut acc = DenseMatrix::zeros(n, n);
        for (m, c) in mats {
            acc = acc.add(&m.scale(c))?;
        }
        Ok(acc)
    };
    let u_inner = a6.matmul(&lin([(&a6, b[13]), (&a4, b[11]), (&a2, b[9]), (&ident, 0.0)])?)?;
    let u_tail = lin([(&a6, b[7]), (&a4, b[5]), (&a2, b[3]), (&ident, b[1])])?;
    let u = a.matmul(&u_inner.add(&u_tail)?)?;
    let v_inner = a6.matmul(&lin([(&a6, b[12]), (&a4, b[10]), (&a2, b[8]), (&ident, 0.0)])?)?;
    let v = v_inner.add(&lin([(&a6, b[6]), (&a4, b[4]), (&a2, b[2]), (&ident, b[0])])?)?;
    let mut r = solve(&v.sub(&u)?, &v.add(&u)?)?;
    for _ in 0..squarings {
        r = r.matmul(&r)?;
    }
    Ok(r)
}

/// `e^{At} v` by Padé scaling and squaring.
pub fn expm_action_pade(a: &DenseMatrix, t: f64, v: &[f64]) -> Result<Vec<f64>> {
    check_expm_args(a, t, v)?;
    expm(&a.scale(t))?.matvec(v)
}

/// `e^{At} v = V e^{Λt} V^T v` for symmetric `A`.
pub fn expm_action_eig(a: &DenseMatrix, t: f64, v: &[f64]) -> Result<Vec<f64>> {
    check_expm_args(a, t, v)?;
    let eig = eig_symmetric(a)?;
    Ok(symmetric_semigroup_action(&eig, t, v))
}

/// Applies `V e^{Λt} V^T` from a precomputed decomposition.
pub fn symmetric_semigroup_action(eig: &SymmetricEigen, t: f64, v: &[f64]) -> Vec<f64> {
    let vecs = &eig.eigenvectors;
    let n = vecs.rows();
    let mut coeffs = vec![0.0; n];
    for (j, c) in coeffs.iter_mut().enumerate() {
        let proj: f64 = (0..n).map(|i| vecs[(i, j)] * v[i]).sum();
        *c = proj * (eig.eigenvalues[j] * t).exp();
    }
    (0..n).map(|i| (0..n).map(|j| vecs[(i, j)] * coeffs[j]).sum()).collect()
}

/// `e^{At} v`; symmetric input goes through the eigen-decomposition, anything
/// else through Padé scaling and squaring.
pub fn expm_action(a: &DenseMatrix, t: f64, v: &[f64]) -> Result<Vec<f64>> {
    check_expm_args(a, t, v)?;
    if a.rows() > 0 && a.is_symmetric(&NumericSettings::DEFAULT) {
        expm_action_eig(a, t, v)
    } else {
        expm_action_pade(a, t, v)
    }
}

fn check_expm_args(a: &DenseMatrix, t: f64, v: &[f64]) -> Result<()> {
    a.require_square()?;
    if !(t >= 0.0) {
        return Err(LinalgError::NegativeTime(t));
    }
    if v.len() != a.cols() {
        return Err(LinalgError::ShapeMismatch(format!(
            "vector length {} does not match order {}",
            v.len(),
            a.cols()
        )));
    }
    Ok(())
}

/// Cholesky factor `L` with `G = L L^T`, or `Singular` if `G` is not positive definite.
fn cholesky(g: &DenseMatrix) -> Result<DenseMatrix> {
    let n = g.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut s = g[(j, j)];
        for k in 0..j {
            s -= l[(j, k)] * l[(j, k)];
        }
        if s <= 0.0 {
            return Err(LinalgError::Singular);
        }
        let ljj = s.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = g[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Moore–Penrose right inverse `D^T (D D^T)^{-1}` of a full-row-rank matrix.
pub fn pinv_right(d: &DenseMatrix) -> Result<DenseMatrix> {
    pinv_right_with(d, &NumericSettings::DEFAULT)
}

pub fn pinv_right_with(d: &DenseMatrix, settings: &NumericSettings) -> Result<DenseMatrix> {
    let (m, n) = d.shape();
    if m == 0 {
        return Ok(DenseMatrix::zeros(n, 0));
    }
    if m > n {
        return Err(LinalgError::RankDeficient {
            sigma_min: 0.0,
            sigma_max: spectral_norm(d)?,
        });
    }
    let gram = d.matmul(&d.transpose())?.symmetric_part()?;
    let eig = eig_symmetric_with(&gram, settings)?;
    let sigma_max = eig.max_eigenvalue().max(0.0).sqrt();
    let sigma_min = eig.min_eigenvalue().max(0.0).sqrt();
    if sigma_max == 0.0 || sigma_min <= settings.rank_rel_tol * sigma_max {
        return Err(LinalgError::RankDeficient { sigma_min, sigma_max });
    }
    let l = cholesky(&gram).map_err(|_| LinalgError::RankDeficient { sigma_min, sigma_max })?;
    // Solve G Y = D column by column with the Cholesky factor; the right inverse is Y^T.
    let mut y = d.clone();
    for col in 0..n {
        for i in 0..m {
            let mut s = y[(i, col)];
            for k in 0..i {
                s -= l[(i, k)] * y[(k, col)];
            }
            y[(i, col)] = s / l[(i, i)];
        }
        for i in (0..m).rev() {
            let mut s = y[(i, col)];
            for k in (i + 1)..m {
                s -= l[(k, i)] * y[(k, col)];
            }
            y[(i, col)] = s / l[(i, i)];
        }
    }
    Ok(y.transpose())
}
