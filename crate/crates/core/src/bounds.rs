//! Growth bounds `||e^{At}|| <= M e^{ωt}` for discretized generators, and limit
//! extraction for sequences of bounds and operator norms under refinement.

use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::{self, DenseMatrix, LinalgError, NumericSettings};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("symmetric strategy requires a symmetric matrix (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("Schur iteration failed to converge after {0} iterations")]
    SchurFailure(usize),
    #[error("epsilon must be positive and finite for the defective strategy, got {0}")]
    BadEpsilon(f64),
    #[error("growth bound constant overflowed")]
    Overflow,
    #[error("bound violated at t = {t}: ||e^(At)|| / (M e^(wt)) = {ratio}")]
    ViolationFound { t: f64, ratio: f64 },
    #[error("sequence of length {len} is too short for a tail of {tail}")]
    TooShort { len: usize, tail: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid bound sequence: {0}")]
    InvalidSequence(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, BoundsError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GrowthStrategy {
    /// `M = 1`, `ω = λ_max(A)`; requires symmetric `A`.
    Symmetric,
    /// `M = 1`, `ω = λ_max((A + A^T)/2)`.
    #[default]
    LogNorm,
    /// Complex Schur form `A = Q (D + N) Q*` with the polynomial factor absorbed into `ε`.
    SchurDefective,
}

impl std::str::FromStr for GrowthStrategy {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "symmetric" => Ok(Self::Symmetric),
            "log_norm" | "log-norm" => Ok(Self::LogNorm),
            "schur_defective" | "schur-defective" | "schur" => Ok(Self::SchurDefective),
            other => Err(format!("unknown growth strategy `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthBound {
    pub m: f64,
    pub omega: f64,
    pub method: GrowthStrategy,
    /// Shift added to `Re λ_max` in the defective case; zero otherwise.
    pub epsilon_shift: f64,
}

impl GrowthBound {
    pub fn new(m: f64, omega: f64) -> Self {
        Self {
            m,
            omega,
            method: GrowthStrategy::LogNorm,
            epsilon_shift: 0.0,
        }
    }

    pub fn envelope(&self, t: f64) -> f64 {
        self.m * (self.omega * t).exp()
    }
}

/// Complex Schur decomposition `A = Q T Q*` with `T` upper triangular.
#[derive(Debug, Clone)]
pub struct ComplexSchur {
    pub n: usize,
    /// Row-major `n × n`.
    pub t: Vec<Complex64>,
    pub q: Vec<Complex64>,
}

impl ComplexSchur {
    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.n).map(|i| self.t[i * self.n + i]).collect()
    }

    /// Strictly upper triangular part of `T`.
    pub fn nilpotent_part(&self) -> Vec<Complex64> {
        let n = self.n;
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                out[i * n + j] = self.t[i * n + j];
            }
        }
        out
    }
}

const SCHUR_MAX_ITER_PER_EIGENVALUE: usize = 60;

/// Householder reduction to Hessenberg form followed by shifted complex QR.
pub fn complex_schur(a: &DenseMatrix) -> Result<ComplexSchur> {
    a.require_square()?;
    let n = a.rows();
    let zero = Complex64::new(0.0, 0.0);
    let mut h: Vec<Complex64> = a.as_slice().iter().map(|v| Complex64::new(*v, 0.0)).collect();
    let mut q = vec![zero; n * n];
    for i in 0..n {
        q[i * n + i] = Complex64::new(1.0, 0.0);
    }
    if n == 0 {
        return Ok(ComplexSchur { n, t: h, q });
    }

    // Hessenberg reduction with real Householder reflectors.
    for k in 0..n.saturating_sub(2) {
        let x: Vec<f64> = ((k + 1)..n).map(|i| h[i * n + k].re).collect();
        let tail_norm: f64 = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if tail_norm == 0.0 {
            continue;
        }
        let alpha = -x[0].signum() * linalg::norm2(&x);
        let mut v = x.clone();
        v[0] -= alpha;
        let vnorm = linalg::norm2(&v);
        v.iter_mut().for_each(|e| *e /= vnorm);
        // H <- P H P with P = I - 2 v v^T acting on rows/cols k+1..n.
        for j in 0..n {
            let s: f64 = v.iter().enumerate().map(|(r, vr)| vr * h[(k + 1 + r) * n + j].re).sum();
            for (r, vr) in v.iter().enumerate() {
                h[(k + 1 + r) * n + j].re -= 2.0 * vr * s;
            }
        }
        for i in 0..n {
            let s: f64 = v.iter().enumerate().map(|(r, vr)| vr * h[i * n + k + 1 + r].re).sum();
            for (r, vr) in v.iter().enumerate() {
                h[i * n + k + 1 + r].re -= 2.0 * vr * s;
            }
            let s: f64 = v.iter().enumerate().map(|(r, vr)| vr * q[i * n + k + 1 + r].re).sum();
            for (r, vr) in v.iter().enumerate() {
                q[i * n + k + 1 + r].re -= 2.0 * vr * s;
            }
        }
        for i in (k + 2)..n {
            h[i * n + k] = zero;
        }
    }

    let mut hi = n - 1;
    let mut iter = 0usize;
    let mut total_iter = 0usize;
    let max_total = SCHUR_MAX_ITER_PER_EIGENVALUE * n;
    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let sub = h[l * n + l - 1].norm();
            let scale = h[(l - 1) * n + l - 1].norm() + h[l * n + l].norm();
            if sub <= f64::EPSILON * scale || sub < f64::MIN_POSITIVE {
                h[l * n + l - 1] = zero;
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        iter += 1;
        total_iter += 1;
        if total_iter > max_total {
            return Err(BoundsError::SchurFailure(total_iter));
        }
        let a11 = h[(hi - 1) * n + hi - 1];
        let a12 = h[(hi - 1) * n + hi];
        let a21 = h[hi * n + hi - 1];
        let a22 = h[hi * n + hi];
        let mu = if iter % 11 == 10 {
            // Exceptional shift to break cycles.
            a22 + Complex64::new(h[hi * n + hi - 1].norm(), 0.0)
        } else {
            let half = (a11 - a22) * 0.5;
            let disc = (half * half + a12 * a21).sqrt();
            let m1 = (a11 + a22) * 0.5 + disc;
            let m2 = (a11 + a22) * 0.5 - disc;
            if (m1 - a22).norm() <= (m2 - a22).norm() {
                m1
            } else {
                m2
            }
        };
        for k in l..=hi {
            h[k * n + k] -= mu;
        }
        let mut rotations = Vec::with_capacity(hi - l);
        for k in l..hi {
            let x = h[k * n + k];
            let y = h[(k + 1) * n + k];
            let nu = (x.norm_sqr() + y.norm_sqr()).sqrt();
            let (c, s) = if nu == 0.0 {
                (1.0, zero)
            } else if x.norm() == 0.0 {
                (0.0, y.conj() / y.norm())
            } else {
                (x.norm() / nu, (x / x.norm()) * y.conj() / nu)
            };
            for j in k..n {
                let p = h[k * n + j];
                let r = h[(k + 1) * n + j];
                h[k * n + j] = p * c + s * r;
                h[(k + 1) * n + j] = -s.conj() * p + r * c;
            }
            rotations.push((c, s));
        }
        for (idx, (c, s)) in rotations.into_iter().enumerate() {
            let k = l + idx;
            let row_end = (k + 2).min(hi);
            for i in 0..=row_end {
                let p = h[i * n + k];
                let r = h[i * n + k + 1];
                h[i * n + k] = p * c + s.conj() * r;
                h[i * n + k + 1] = -s * p + r * c;
            }
            for i in 0..n {
                let p = q[i * n + k];
                let r = q[i * n + k + 1];
                q[i * n + k] = p * c + s.conj() * r;
                q[i * n + k + 1] = -s * p + r * c;
            }
        }
        for k in l..=hi {
            h[k * n + k] += mu;
        }
    }
    for i in 0..n {
        for j in 0..i {
            h[i * n + j] = zero;
        }
    }
    Ok(ComplexSchur { n, t: h, q })
}

/// Spectral norm of a complex matrix via its real `2n × 2n` embedding.
fn complex_spectral_norm(m: &[Complex64], n: usize) -> Result<f64> {
    if m.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Ok(0.0);
    }
    let real = DenseMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = m[(i % n) * n + (j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    Ok(linalg::spectral_norm(&real)?)
}

/// Length of the longest chain `i_0 < i_1 < ... < i_ρ` with every `N[i_k, i_{k+1}] != 0`.
///
/// Any product of `ρ + 1` matrices with the sparsity of `N`, interleaved with
/// diagonal factors, vanishes, so the exponential series of `D + N` truncates at `ρ`.
pub fn structural_nilpotency(nil: &[Complex64], n: usize) -> usize {
    let mut longest = vec![0usize; n];
    for i in (0..n).rev() {
        for j in (i + 1)..n {
            if nil[i * n + j] != Complex64::new(0.0, 0.0) {
                longest[i] = longest[i].max(longest[j] + 1);
            }
        }
    }
    longest.into_iter().max().unwrap_or(0)
}

fn poly_weight(t: f64, rho: usize, epsilon: f64) -> f64 {
    let mut p = 0.0;
    let mut tk = 1.0;
    for _ in 0..=rho {
        p += tk;
        tk *= t;
    }
    p * (-epsilon * t).exp()
}

const C_EPS_SAMPLES: usize = 4096;
const C_EPS_SAFETY: f64 = 1.0 + 1e-9;

/// `C_ε = sup_{t >= 0} (Σ_{k<=ρ} t^k) e^{-εt}`, by dense sampling of `[0, ρ/ε + 1]`
/// followed by golden-section refinement around the best sample, times a safety factor.
pub fn polynomial_decay_constant(rho: usize, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(BoundsError::BadEpsilon(epsilon));
    }
    if rho == 0 {
        return Ok(C_EPS_SAFETY);
    }
    let upper = rho as f64 / epsilon + 1.0;
    let step = upper / C_EPS_SAMPLES as f64;
    let f = |t: f64| poly_weight(t, rho, epsilon);
    let (mut best_i, mut best) = (0usize, f(0.0));
    for i in 1..=C_EPS_SAMPLES {
        let v = f(i as f64 * step);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut lo = best_i.saturating_sub(1) as f64 * step;
    let mut hi = ((best_i + 1) as f64 * step).min(upper);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    let c = best.max(f1).max(f2) * C_EPS_SAFETY;
    if !c.is_finite() {
        return Err(BoundsError::Overflow);
    }
    Ok(c)
}

pub fn growth_bound(a: &DenseMatrix, strategy: GrowthStrategy, epsilon: f64) -> Result<GrowthBound> {
    a.require_square()?;
    if a.rows() == 0 {
        return Err(LinalgError::Empty.into());
    }
    match strategy {
        GrowthStrategy::Symmetric => {
            let settings = NumericSettings::DEFAULT;
            if !a.is_symmetric(&settings) {
                return Err(BoundsError::NotSymmetric(a.max_asymmetry()));
            }
            let eig = linalg::eig_symmetric(a)?;
            Ok(GrowthBound {
                m: 1.0,
                omega: eig.max_eigenvalue(),
                method: strategy,
                epsilon_shift: 0.0,
            })
        }
        GrowthStrategy::LogNorm => {
            let eig = linalg::eig_symmetric(&a.symmetric_part()?)?;
            Ok(GrowthBound {
                m: 1.0,
                omega: eig.max_eigenvalue(),
                method: strategy,
                epsilon_shift: 0.0,
            })
        }
        GrowthStrategy::SchurDefective => {
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return Err(BoundsError::BadEpsilon(epsilon));
            }
            let schur = complex_schur(a)?;
            let n = schur.n;
            let re_max = schur.diagonal().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            let nil = schur.nilpotent_part();
            let rho = structural_nilpotency(&nil, n);
            let norm_n = complex_spectral_norm(&nil, n)?;
            let mut series = 0.0;
            let mut term = 1.0;
            for k in 0..=rho {
                series += term;
                term *= norm_n / (k + 1) as f64;
            }
            let m = series * polynomial_decay_constant(rho, epsilon)?;
            if !m.is_finite() {
                return Err(BoundsError::Overflow);
            }
            Ok(GrowthBound {
                m: m.max(1.0),
                omega: re_max + epsilon,
                method: strategy,
                epsilon_shift: epsilon,
            })
        }
    }
}

/// Symmetric strategy for symmetric input, log-norm otherwise.
pub fn growth_bound_auto(a: &DenseMatrix) -> Result<GrowthBound> {
    if a.is_symmetric(&NumericSettings::DEFAULT) {
        growth_bound(a, GrowthStrategy::Symmetric, 0.0)
    } else {
        growth_bound(a, GrowthStrategy::LogNorm, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub worst_ratio: f64,
    pub worst_t: f64,
    /// `||e^{At}|| / (M e^{ωt})` per grid time.
    pub ratios: Vec<f64>,
}

pub const VERIFY_SLACK: f64 = 1e-8;

/// Checks `||e^{At}||_2 <= M e^{ωt} (1 + 1e-8)` on a time grid, with the
/// exponential from Padé scaling and squaring.
pub fn verify_growth_bound(a: &DenseMatrix, gb: &GrowthBound, t_grid: &[f64]) -> Result<VerificationReport> {
    a.require_square()?;
    let mut report = VerificationReport {
        worst_ratio: 0.0,
        worst_t: 0.0,
        ratios: Vec::with_capacity(t_grid.len()),
    };
    for &t in t_grid {
        if !(t >= 0.0) {
            return Err(LinalgError::NegativeTime(t).into());
        }
        let e = linalg::expm(&a.scale(t))?;
        let norm = linalg::spectral_norm(&e)?;
        let ratio = norm / gb.envelope(t);
        if ratio > report.worst_ratio || report.ratios.is_empty() {
            report.worst_ratio = ratio;
            report.worst_t = t;
        }
        report.ratios.push(ratio);
        if !(ratio <= 1.0 + VERIFY_SLACK) {
            return Err(BoundsError::ViolationFound { t, ratio });
        }
    }
    Ok(report)
}

/// `count` log-spaced points in `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundSequence {
    pub indices: Vec<usize>,
    pub m_values: Vec<f64>,
    pub omega_values: Vec<f64>,
    pub mu_p: f64,
    pub mu_e: f64,
}

impl BoundSequence {
    pub fn new(indices: Vec<usize>, m_values: Vec<f64>, omega_values: Vec<f64>, mu_p: f64, mu_e: f64) -> Result<Self> {
        if indices.len() != m_values.len() || indices.len() != omega_values.len() {
            return Err(BoundsError::InvalidSequence("lengths disagree".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(BoundsError::InvalidSequence(
                "indices must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            indices,
            m_values,
            omega_values,
            mu_p,
            mu_e,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitEstimate {
    pub value: f64,
    /// Largest successive increment over the tail.
    pub cauchy_defect: f64,
    pub converged: bool,
    pub tolerance: f64,
}

impl LimitEstimate {
    fn from_tail(values: &[f64], tail: usize, tol: f64) -> Result<Self> {
        if tail < 2 || values.len() < tail {
            return Err(BoundsError::TooShort {
                len: values.len(),
                tail,
            });
        }
        let tail_values = &values[values.len() - tail..];
        let cauchy_defect = tail_values.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        Ok(Self {
            value: *values.last().expect("nonempty"),
            cauchy_defect,
            converged: cauchy_defect <= tol,
            tolerance: tol,
        })
    }

    /// `value + cauchy_defect`; used when the bound has to err on the safe side.
    pub fn strict_value(&self) -> f64 {
        self.value + self.cauchy_defect
    }
}

/// `(M*, ω*)` from the tail of a bound sequence, with `M* = μ_p μ_e lim M_n`.
pub fn sequence_limit(s: &BoundSequence, tail: usize, tol: f64) -> Result<(LimitEstimate, LimitEstimate)> {
    if !(s.mu_p > 0.0 && s.mu_e > 0.0) {
        return Err(BoundsError::InvalidSequence("mu_p and mu_e must be positive".into()));
    }
    let scale = s.mu_p * s.mu_e;
    let scaled: Vec<f64> = s.m_values.iter().map(|m| scale * m).collect();
    let m_star = LimitEstimate::from_tail(&scaled, tail, tol)?;
    let omega_star = LimitEstimate::from_tail(&s.omega_values, tail, tol)?;
    Ok((m_star, omega_star))
}

/// `μ_e ||B_n||_2` per refinement and the limit estimate over the tail.
pub fn operator_norm_sweep(matrices: &[DenseMatrix], mu_e: f64) -> Result<Vec<f64>> {
    if let Some(first) = matrices.first() {
        if let Some(bad) = matrices.iter().find(|m| m.cols() != first.cols()) {
            return Err(BoundsError::ShapeMismatch(format!(
                "column counts differ: {} vs {}",
                first.cols(),
                bad.cols()
            )));
        }
    }
    matrices
        .iter()
        .map(|m| {
            if m.is_empty() {
                Ok(0.0)
            } else {
                Ok(mu_e * linalg::spectral_norm(m)?)
            }
        })
        .collect()
}

pub fn operator_norm_limit(matrices: &[DenseMatrix], mu_e: f64, tail: usize, tol: f64) -> Result<LimitEstimate> {
    if tail < 2 || matrices.len() < tail {
        return Err(BoundsError::TooShort {
            len: matrices.len(),
            tail,
        });
    }
    let norms = operator_norm_sweep(matrices, mu_e)?;
    LimitEstimate::from_tail(&norms, tail, tol)
}

/// Limit estimate for an already computed sequence of values.
pub fn value_limit(values: &[f64], tail: usize, tol: f64) -> Result<LimitEstimate> {
    LimitEstimate::from_tail(values, tail, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat1d;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn symmetric_scalar() {
        let a = DenseMatrix::from_rows(&[vec![-8.0]]).unwrap();
        let gb = growth_bound(&a, GrowthStrategy::Symmetric, 0.0).unwrap();
        assert_eq!((gb.m, gb.omega, gb.epsilon_shift), (1.0, -8.0, 0.0));
    }

    #[test]
    fn log_norm_of_nilpotent() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let gb = growth_bound(&a, GrowthStrategy::LogNorm, 0.0).unwrap();
        assert!((gb.omega - 0.5).abs() < 1e-15);
        assert_eq!(gb.m, 1.0);
    }

    #[test]
    fn symmetric_matches_heat_closed_form() {
        let disc = heat1d::assemble(50, 1.0).unwrap();
        let gb = growth_bound(&disc.a, GrowthStrategy::Symmetric, 0.0).unwrap();
        let closed = heat1d::omega_n(50, 1.0);
        assert!((gb.omega - closed).abs() <= 1e-10 * closed.abs());
        let eig = linalg::eig_symmetric(&disc.a).unwrap();
        assert_eq!(gb.omega, eig.max_eigenvalue());
    }

    #[test]
    fn strategy_errors() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(
            growth_bound(&a, GrowthStrategy::Symmetric, 0.0),
            Err(BoundsError::NotSymmetric(_))
        ));
        assert!(matches!(
            growth_bound(&a, GrowthStrategy::SchurDefective, 0.0),
            Err(BoundsError::BadEpsilon(_))
        ));
        assert!(matches!(
            growth_bound(&a, GrowthStrategy::SchurDefective, -1.0),
            Err(BoundsError::BadEpsilon(_))
        ));
    }

    #[test]
    fn schur_reconstructs() {
        for seed in 0..5 {
            let a = random_matrix(7, seed);
            let s = complex_schur(&a).unwrap();
            let n = s.n;
            // Q T Q* == A
            let mut worst: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..n {
                        for l in k..n {
                            acc += s.q[i * n + k] * s.t[k * n + l] * s.q[j * n + l].conj();
                        }
                    }
                    worst = worst.max((acc - Complex64::new(a[(i, j)], 0.0)).norm());
                }
            }
            assert!(worst < 1e-12, "reconstruction error {worst}");
            // Trace is preserved by the diagonal.
            let tr: f64 = (0..n).map(|i| a[(i, i)]).sum();
            let sum: Complex64 = s.diagonal().iter().sum();
            assert!((sum.re - tr).abs() < 1e-12 && sum.im.abs() < 1e-12);
        }
    }

    #[test]
    fn schur_on_rotation_has_complex_pair() {
        let a = DenseMatrix::from_rows(&[vec![0.0, -2.0], vec![2.0, 0.0]]).unwrap();
        let s = complex_schur(&a).unwrap();
        let mut ims: Vec<f64> = s.diagonal().iter().map(|z| z.im).collect();
        ims.sort_by(f64::total_cmp);
        assert!((ims[0] + 2.0).abs() < 1e-13 && (ims[1] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn schur_defective_on_diagonal_has_unit_m() {
        let a = DenseMatrix::diag(&[-1.0, -3.0, 0.5]);
        for eps in [1e-3, 1e-6, 1e-9] {
            let gb = growth_bound(&a, GrowthStrategy::SchurDefective, eps).unwrap();
            assert!((gb.m - 1.0).abs() <= 1e-6);
            assert!((gb.omega - (0.5 + eps)).abs() < 1e-15);
        }
    }

    #[test]
    fn polynomial_constant_against_brute_force() {
        for (rho, eps) in [(1usize, 0.1), (3, 0.5), (2, 2.0), (5, 1.5), (9, 0.1)] {
            let c = polynomial_decay_constant(rho, eps).unwrap();
            let upper = rho as f64 / eps + 1.0;
            let mut brute: f64 = 0.0;
            for i in 0..=200_000 {
                brute = brute.max(poly_weight(upper * i as f64 / 200_000.0, rho, eps));
            }
            assert!(c >= brute, "rho {rho} eps {eps}: {c} < {brute}");
            assert!(c <= brute * (1.0 + 1e-6));
        }
    }

    #[test]
    fn structural_nilpotency_counts_chains() {
        let z = Complex64::new(0.0, 0.0);
        let o = Complex64::new(1.0, 0.0);
        // Chain 0 -> 1 -> 3 and an isolated edge 2 -> 3.
        let n = 4;
        let mut m = vec![z; n * n];
        m[1] = o;
        m[n + 3] = o;
        m[2 * n + 3] = o;
        assert_eq!(structural_nilpotency(&m, n), 2);
        assert_eq!(structural_nilpotency(&[z; 9], 3), 0);
    }

    #[test]
    fn verify_examples() {
        let disc = heat1d::assemble(20, 1.0).unwrap();
        let gb = growth_bound(&disc.a, GrowthStrategy::Symmetric, 0.0).unwrap();
        let grid: Vec<f64> = (0..=100).map(|i| i as f64 * 0.01).collect();
        let rep = verify_growth_bound(&disc.a, &gb, &grid).unwrap();
        assert!(rep.worst_ratio <= 1.0 + VERIFY_SLACK);

        let zero = DenseMatrix::zeros(3, 3);
        let rep = verify_growth_bound(&zero, &GrowthBound::new(1.0, 0.0), &grid).unwrap();
        assert!(rep.ratios.iter().all(|r| *r == 1.0));

        let a = random_matrix(6, 42);
        let gb = growth_bound(&a, GrowthStrategy::LogNorm, 0.0).unwrap();
        verify_growth_bound(&a, &gb, &log_spaced(1e-3, 10.0, 100)).unwrap();
    }

    #[test]
    fn verify_detects_wrong_bound() {
        let a = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        // ||e^{At}|| grows like t, so (1, 0) is not a bound.
        let err = verify_growth_bound(&a, &GrowthBound::new(1.0, 0.0), &[0.0, 1.0]).unwrap_err();
        assert!(matches!(err, BoundsError::ViolationFound { t, .. } if t == 1.0));
    }

    #[test]
    fn schur_bound_on_jordan_block() {
        let a = DenseMatrix::from_rows(&[vec![-1.0, 1.0, 0.0], vec![0.0, -1.0, 1.0], vec![0.0, 0.0, -1.0]]).unwrap();
        let gb = growth_bound(&a, GrowthStrategy::SchurDefective, 0.1).unwrap();
        assert!((gb.omega + 0.9).abs() < 1e-12);
        assert!(gb.m > 1.0);
        verify_growth_bound(&a, &gb, &log_spaced(1e-3, 10.0, 100)).unwrap();
    }

    #[test]
    fn sequence_limit_examples() {
        let s = BoundSequence::new(vec![1, 2, 3], vec![1.0; 3], vec![-1.0, -1.0, -1.0], 1.0, 1.0).unwrap();
        let (m, w) = sequence_limit(&s, 3, 1e-12).unwrap();
        assert_eq!((m.value, m.cauchy_defect, m.converged), (1.0, 0.0, true));
        assert!(w.converged);

        let osc = BoundSequence::new(vec![1, 2, 3, 4], vec![1.0; 4], vec![1.0, -1.0, 1.0, -1.0], 1.0, 1.0).unwrap();
        let (_, w) = sequence_limit(&osc, 4, 1e-3).unwrap();
        assert_eq!(w.cauchy_defect, 2.0);
        assert!(!w.converged);

        assert!(matches!(
            sequence_limit(&s, 4, 1e-3),
            Err(BoundsError::TooShort { len: 3, tail: 4 })
        ));
        assert!(BoundSequence::new(vec![2, 1], vec![1.0; 2], vec![0.0; 2], 1.0, 1.0).is_err());
    }

    #[test]
    fn heat_sequence_limit() {
        let ns: Vec<usize> = (0..6).map(|k| 50 << k).collect();
        let omegas: Vec<f64> = ns.iter().map(|&n| heat1d::omega_n(n, 1.0)).collect();
        let s = BoundSequence::new(ns.clone(), vec![1.0; ns.len()], omegas, 1.0, 1.0).unwrap();
        let (_, w) = sequence_limit(&s, 4, 1e-3).unwrap();
        assert!(w.converged);
        assert!((w.value + 9.8696).abs() < 1e-3);
        assert!(w.strict_value() >= w.value);
    }

    #[test]
    fn operator_norm_limit_examples() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.5, -1.0]]).unwrap();
        let lim = operator_norm_limit(&vec![m.clone(); 4], 1.0, 3, 1e-12).unwrap();
        assert_eq!(lim.cauchy_defect, 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let fixed = DenseMatrix::from_fn(10, 2, |_, _| rng.gen_range(-1.0..1.0));
        let pert = DenseMatrix::from_fn(10, 2, |_, _| rng.gen_range(-1.0..1.0));
        let sweep: Vec<DenseMatrix> = (1..=8)
            .map(|k| fixed.add(&pert.scale(1.0 / (1u64 << (2 * k)) as f64)).unwrap())
            .collect();
        let tol = 1e-3;
        let lim = operator_norm_limit(&sweep, 1.0, 3, tol).unwrap();
        assert!(lim.converged);
        assert!((lim.value - linalg::spectral_norm(&fixed).unwrap()).abs() <= tol);

        let other = DenseMatrix::zeros(10, 3);
        assert!(matches!(
            operator_norm_limit(&[fixed.clone(), other], 1.0, 2, 1e-3),
            Err(BoundsError::ShapeMismatch(_))
        ));
        assert!(matches!(
            operator_norm_limit(&[fixed], 1.0, 2, 1e-3),
            Err(BoundsError::TooShort { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn sequence_limit_scales_with_m(c in 0.01f64..100.0, seed in 0u64..1000) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let ms: Vec<f64> = (0..6).map(|_| rng.gen_range(1.0..3.0)).collect();
                let ws: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let base = BoundSequence::new((1..=6).collect(), ms.clone(), ws.clone(), 1.3, 0.7).unwrap();
                let scaled = BoundSequence::new((1..=6).collect(), ms.iter().map(|m| c * m).collect(), ws, 1.3, 0.7).unwrap();
                let (m0, _) = sequence_limit(&base, 3, 1e-3).unwrap();
                let (m1, _) = sequence_limit(&scaled, 3, 1e-3).unwrap();
                prop_assert!((m1.value - c * m0.value).abs() <= 1e-12 * m1.value.abs());
                prop_assert!((m1.cauchy_defect - c * m0.cauchy_defect).abs() <= 1e-12 * m1.value.abs());
            }

            #[test]
            fn log_norm_bound_holds(n in 1usize..6, seed in 0u64..1000) {
                let a = random_matrix(n, seed);
                let gb = growth_bound(&a, GrowthStrategy::LogNorm, 0.0).unwrap();
                prop_assert!(verify_growth_bound(&a, &gb, &log_spaced(1e-3, 10.0, 25)).is_ok());
            }
        }
    }
}
