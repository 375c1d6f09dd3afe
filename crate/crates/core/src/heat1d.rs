//! Finite-difference model of the 1D heat equation on `[0, 1]` with Dirichlet
//! boundary input.
//!
//! The discrete state space `Z_n = R^n` carries the weighted norm
//! `||z||^2 = Δ Σ z_k^2` with `Δ = 1/(n+1)`, nodes `x_k = kΔ`. The projection
//! takes cell averages over `[x_k - Δ/2, x_k + Δ/2]`, the embedding is the
//! matching piecewise-constant function, so `P_n E_n = I` and `E_n` is an
//! isometry.

use std::f64::consts::PI;
use std::sync::Arc;

use thiserror::Error;

use crate::linalg::DenseMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeatError {
    #[error("grid must have at least one interior node")]
    BadSize,
    #[error("invalid heat problem: {0}")]
    InvalidProblem(String),
    #[error("adaptive quadrature failed to reach tolerance on [{a}, {b}]")]
    QuadratureFailure { a: f64, b: f64 },
    #[error("reference mode mismatch: {0}")]
    ModeMismatch(String),
}

pub type Result<T> = std::result::Result<T, HeatError>;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type BoundaryFn = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

/// `∂_t x = α ∂_x² x` on `[0, t_end] × [0, 1]` with `x(t, 0), x(t, 1)` prescribed.
#[derive(Clone)]
pub struct HeatProblem {
    pub alpha: f64,
    pub t_end: f64,
    pub initial: ScalarFn,
    pub boundary: BoundaryFn,
    /// Time derivative of `boundary`.
    pub boundary_rate: BoundaryFn,
    /// When set, `initial(x) = Σ_k c_k sin(kπx)` with these coefficients.
    pub sine_coefficients: Option<Vec<f64>>,
}

impl std::fmt::Debug for HeatProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HeatProblem")
            .field("alpha", &self.alpha)
            .field("t_end", &self.t_end)
            .field("sine_coefficients", &self.sine_coefficients)
            .finish_non_exhaustive()
    }
}

impl HeatProblem {
    /// Homogeneous Dirichlet problem with `x0(x) = Σ c_k sin(kπx)`.
    pub fn sine_series(alpha: f64, t_end: f64, coefficients: Vec<f64>) -> Result<Self> {
        let coeffs = coefficients.clone();
        let problem = Self {
            alpha,
            t_end,
            initial: Arc::new(move |x| sine_series_value(&coeffs, x)),
            boundary: Arc::new(|_| (0.0, 0.0)),
            boundary_rate: Arc::new(|_| (0.0, 0.0)),
            sine_coefficients: Some(coefficients),
        };
        problem.validate()?;
        Ok(problem)
    }

    /// α = 0.2, T = [0, 0.5], x0 = sin(πx), homogeneous boundary.
    pub fn default_problem() -> Self {
        Self::sine_series(0.2, 0.5, vec![1.0]).expect("valid default problem")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(HeatError::InvalidProblem(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(HeatError::InvalidProblem(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        Ok(())
    }

    /// Exact growth rate `-απ²` of the continuous semigroup.
    pub fn omega_star(&self) -> f64 {
        -self.alpha * PI * PI
    }
}

fn sine_series_value(coeffs: &[f64], x: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| c * ((k + 1) as f64 * PI * x).sin())
        .sum()
}

pub fn grid_spacing(n: usize) -> f64 {
    1.0 / (n as f64 + 1.0)
}

pub fn node(n: usize, k: usize) -> f64 {
    k as f64 * grid_spacing(n)
}

/// Element of `Z_n`: values at the interior nodes `x_k = k/(n+1)`, `k = 1..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction1D {
    values: Vec<f64>,
}

impl GridFunction1D {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(HeatError::BadSize);
        }
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn spacing(&self) -> f64 {
        grid_spacing(self.n())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        z_norm(&self.values)
    }
}

/// Weighted norm on `Z_n`.
pub fn z_norm(values: &[f64]) -> f64 {
    let h = grid_spacing(values.len());
    (h * values.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

#[derive(Debug, Clone)]
pub struct HeatDiscretization {
    pub n: usize,
    pub alpha: f64,
    /// `n × n` generator with homogeneous boundary.
    pub a: DenseMatrix,
    /// `n × 2` boundary input matrix.
    pub d: DenseMatrix,
}

/// Centred second differences on the uniform interior grid.
pub fn assemble(n: usize, alpha: f64) -> Result<HeatDiscretization> {
    if n == 0 {
        return Err(HeatError::BadSize);
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(HeatError::InvalidProblem(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let h = grid_spacing(n);
    let c = alpha / (h * h);
    let a = DenseMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => -2.0 * c,
        1 => c,
        _ => 0.0,
    });
    let mut d = DenseMatrix::zeros(n, 2);
    d[(0, 0)] += c;
    d[(n - 1, 1)] += c;
    Ok(HeatDiscretization { n, alpha, a, d })
}

/// Closed-form spectrum of the discrete generator, ascending.
pub fn eigenvalues(n: usize, alpha: f64) -> Vec<f64> {
    let h = grid_spacing(n);
    let mut vals: Vec<f64> = (1..=n)
        .map(|j| -4.0 * alpha / (h * h) * (PI * j as f64 * h / 2.0).sin().powi(2))
        .collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Largest eigenvalue `-α (2(n+1) sin(π / (2(n+1))))²` of the discrete generator.
pub fn omega_n(n: usize, alpha: f64) -> f64 {
    let h = grid_spacing(n);
    let theta = PI * h;
    // sin²(θ/2) without cancellation in either regime; cos θ = sin(π(½ - h)) is exact at h = ½.
    let s2 = if theta > 0.5 {
        0.5 * (1.0 - (PI * (0.5 - h)).sin())
    } else {
        (0.5 * theta).sin().powi(2)
    };
    -4.0 * alpha / (h * h) * s2
}

const SIMPSON_MAX_DEPTH: usize = 48;

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Option<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if !delta.is_finite() {
            return None;
        }
        if delta.abs() <= 15.0 * tol {
            return Some(left + right + delta / 15.0);
        }
        if depth == 0 {
            return None;
        }
        Some(
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?,
        )
    }
    // Outer endpoints are sampled just inside the interval so that a jump sitting
    // exactly on an edge (cell boundaries of an embedded grid function) is ignored.
    let inset = 64.0 * f64::EPSILON * a.abs().max(b.abs()).max(b - a);
    let fa = f(a + inset);
    let fb = f(b - inset);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, SIMPSON_MAX_DEPTH).ok_or(HeatError::QuadratureFailure { a, b })
}

/// Cell averages of `x` (the projection `P_n`).
pub fn project(x: &dyn Fn(f64) -> f64, n: usize) -> Result<GridFunction1D> {
    if n == 0 {
        return Err(HeatError::BadSize);
    }
    let h = grid_spacing(n);
    let values = (1..=n)
        .map(|k| {
            let c = node(n, k);
            // Scaling the tolerance by the cell width keeps the average accurate to 1e-12.
            adaptive_simpson(x, c - 0.5 * h, c + 0.5 * h, 1e-12 * h).map(|v| v / h)
        })
        .collect::<Result<Vec<_>>>()?;
    GridFunction1D::new(values)
}

/// Piecewise-constant embedding `E_n`: value `z_k` on `[x_k - Δ/2, x_k + Δ/2)`, zero elsewhere.
pub fn embed(z: &GridFunction1D) -> impl Fn(f64) -> f64 + Send + Sync + 'static {
    let values = z.values.clone();
    let n = values.len();
    let h = grid_spacing(n);
    move |x: f64| {
        let s = x / h - 0.5;
        if !(s >= 0.0) {
            return 0.0;
        }
        let k = s.floor() as usize;
        values.get(k).copied().unwrap_or(0.0)
    }
}

/// Norm used on the boundary input space `U = R^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UNorm {
    #[default]
    Euclidean,
    One,
    Max,
}

impl UNorm {
    pub fn norm(self, b: (f64, f64)) -> f64 {
        match self {
            UNorm::Euclidean => b.0.hypot(b.1),
            UNorm::One => b.0.abs() + b.1.abs(),
            UNorm::Max => b.0.abs().max(b.1.abs()),
        }
    }
}

impl std::str::FromStr for UNorm {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "euclidean" | "2" => Ok(UNorm::Euclidean),
            "one" | "1" => Ok(UNorm::One),
            "max" | "inf" => Ok(UNorm::Max),
            other => Err(format!("unknown U-norm `{other}` (euclidean, one, max)")),
        }
    }
}

/// The lifting constant quoted for this problem without a stated U-norm.
pub const QUOTED_D0_NORM: f64 = 2.0 / 3.0;

/// Affine lift `(b0, b1) ↦ (x ↦ (1 - x) b0 + x b1)`.
pub fn lift_d0(b: (f64, f64)) -> impl Fn(f64) -> f64 + Send + Sync + Copy {
    move |x| (1.0 - x) * b.0 + x * b.1
}

/// `(||D0||_{U→L²}, ||A D0||_{U→L²})` for the given U-norm.
///
/// The Gram matrix of `{1 - x, x}` in `L²(0,1)` is `[[1/3, 1/6], [1/6, 1/3]]`,
/// so the Euclidean operator norm is `sqrt(1/2)`. For the 1-norm and max-norm the
/// supremum is attained at an extreme point of the unit ball: `1/sqrt(3)` at
/// `±e_i`, respectively `1` at `(1, 1)`. `A D0 = 0` because the lift is affine.
pub fn lift_norms(u_norm: UNorm) -> (f64, f64) {
    let d0 = match u_norm {
        UNorm::Euclidean => 0.5f64.sqrt(),
        UNorm::One => 1.0 / 3.0f64.sqrt(),
        UNorm::Max => 1.0,
    };
    (d0, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceMode {
    AnalyticSine,
    CrankNicolson { n_ref: usize, dt: f64 },
}

/// A reference solution `(t, x) ↦ x(t, x)`.
#[derive(Clone)]
pub enum ReferenceSolution {
    AnalyticSine { alpha: f64, coefficients: Vec<f64> },
    CrankNicolson(Arc<CrankNicolsonSolution>),
}

impl ReferenceSolution {
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            ReferenceSolution::AnalyticSine { alpha, coefficients } => coefficients
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let kp = (k + 1) as f64 * PI;
                    c * (-alpha * kp * kp * t).exp() * (kp * x).sin()
                })
                .sum(),
            ReferenceSolution::CrankNicolson(cn) => cn.eval(t, x),
        }
    }
}

/// Time-stepped finite-difference solution on a fine grid.
pub struct CrankNicolsonSolution {
    n: usize,
    dt: f64,
    /// Interior values per time step.
    snapshots: Vec<Vec<f64>>,
    boundary: BoundaryFn,
}

impl CrankNicolsonSolution {
    /// Linear interpolation in time between steps and in space between nodes
    /// (boundary values at `x = 0, 1`).
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        let last = self.snapshots.len() - 1;
        let s = (t / self.dt).clamp(0.0, last as f64);
        let i0 = (s.floor() as usize).min(last);
        let i1 = (i0 + 1).min(last);
        let w = s - i0 as f64;
        let v0 = self.space_eval(i0, x);
        if w == 0.0 || i0 == i1 {
            return v0;
        }
        (1.0 - w) * v0 + w * self.space_eval(i1, x)
    }

    fn space_eval(&self, step: usize, x: f64) -> f64 {
        let h = grid_spacing(self.n);
        let (b0, b1) = (self.boundary)(step as f64 * self.dt);
        let z = &self.snapshots[step];
        let value_at = |k: usize| -> f64 {
            if k == 0 {
                b0
            } else if k == self.n + 1 {
                b1
            } else {
                z[k - 1]
            }
        };
        let s = (x / h).clamp(0.0, (self.n + 1) as f64);
        let k = (s.floor() as usize).min(self.n);
        let w = s - k as f64;
        (1.0 - w) * value_at(k) + w * value_at(k + 1)
    }
}

/// Solves the tridiagonal system with constant bands `(lower, diag, upper)`.
fn solve_tridiagonal_constant(lower: f64, diag: f64, upper: f64, rhs: &mut [f64]) {
    let n = rhs.len();
    let mut c = vec![0.0; n];
    let mut beta = diag;
    c[0] = upper / beta;
    rhs[0] /= beta;
    for i in 1..n {
        beta = diag - lower * c[i - 1];
        c[i] = upper / beta;
        rhs[i] = (rhs[i] - lower * rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

pub fn reference_solution(problem: &HeatProblem, mode: ReferenceMode) -> Result<ReferenceSolution> {
    problem.validate()?;
    match mode {
        ReferenceMode::AnalyticSine => {
            let coefficients = problem
                .sine_coefficients
                .clone()
                .ok_or_else(|| HeatError::ModeMismatch("analytic mode needs sine-series initial data".into()))?;
            for t in [0.0, 0.5 * problem.t_end, problem.t_end] {
                let (b0, b1) = (problem.boundary)(t);
                if b0 != 0.0 || b1 != 0.0 {
                    return Err(HeatError::ModeMismatch(
                        "analytic mode needs homogeneous boundary data".into(),
                    ));
                }
            }
            Ok(ReferenceSolution::AnalyticSine {
                alpha: problem.alpha,
                coefficients,
            })
        }
        ReferenceMode::CrankNicolson { n_ref, dt } => {
            if n_ref < 3 || !(dt > 0.0) {
                return Err(HeatError::InvalidProblem(format!(
                    "Crank-Nicolson needs n_ref >= 3 and dt > 0 (got {n_ref}, {dt})"
                )));
            }
            let steps = (problem.t_end / dt).ceil() as usize;
            let dt = problem.t_end / steps as f64;
            let h = grid_spacing(n_ref);
            let c = problem.alpha / (h * h);
            let r = 0.5 * dt * c;
            let mut z: Vec<f64> = (1..=n_ref).map(|k| (problem.initial)(node(n_ref, k))).collect();
            let mut snapshots = Vec::with_capacity(steps + 1);
            snapshots.push(z.clone());
            for step in 0..steps {
                let t0 = step as f64 * dt;
                let t1 = t0 + dt;
                let b0 = (problem.boundary)(t0);
                let b1 = (problem.boundary)(t1);
                let mut rhs: Vec<f64> = (0..n_ref)
                    .map(|i| {
                        let left = if i > 0 { z[i - 1] } else { 0.0 };
                        let right = if i + 1 < n_ref { z[i + 1] } else { 0.0 };
                        z[i] + r * (left - 2.0 * z[i] + right)
                    })
                    .collect();
                rhs[0] += r * (b0.0 + b1.0);
                rhs[n_ref - 1] += r * (b0.1 + b1.1);
                solve_tridiagonal_constant(-r, 1.0 + 2.0 * r, -r, &mut rhs);
                z = rhs;
                snapshots.push(z.clone());
            }
            Ok(ReferenceSolution::CrankNicolson(Arc::new(CrankNicolsonSolution {
                n: n_ref,
                dt,
                snapshots,
                boundary: problem.boundary.clone(),
            })))
        }
    }
}

/// `L²(0,1)` norm of `f` by adaptive quadrature.
pub fn l2_norm(f: &dyn Fn(f64) -> f64, tol: f64) -> Result<f64> {
    adaptive_simpson(&|x| f(x).powi(2), 0.0, 1.0, tol).map(|v| v.max(0.0).sqrt())
}

/// `L²` distance between the piecewise-constant `E_n z` and `f`, integrating cell by cell.
pub fn embedded_l2_distance(z: &GridFunction1D, f: &dyn Fn(f64) -> f64, tol: f64) -> Result<f64> {
    let n = z.n();
    let h = grid_spacing(n);
    let mut total = adaptive_simpson(&|x| f(x).powi(2), 0.0, 0.5 * h, tol)?
        + adaptive_simpson(&|x| f(x).powi(2), 1.0 - 0.5 * h, 1.0, tol)?;
    for (k, zk) in z.values().iter().enumerate() {
        let c = node(n, k + 1);
        total += adaptive_simpson(&|x| (zk - f(x)).powi(2), c - 0.5 * h, c + 0.5 * h, tol / n as f64)?;
    }
    Ok(total.max(0.0).sqrt())
}
