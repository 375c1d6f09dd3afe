//! A small physics-informed network for the 1D heat equation.
//!
//! The model is a tanh MLP in `(t, x)`. Input derivatives are propagated forward
//! as a four-channel jet `(u, u_t, u_x, u_xx)` and parameter gradients of the
//! loss are accumulated in reverse through that jet.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::ops::{Add, Mul, Neg, Sub};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::certifier::{format_real, ResidualTrace};
use crate::heat1d::{self, HeatError, HeatProblem, ReferenceSolution, UNorm};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PinnError {
    #[error("empty batch: {0}")]
    EmptyBatch(String),
    #[error("loss diverged at epoch {epoch} (value {value})")]
    DivergedLoss { epoch: usize, value: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint line {line}: {message}")]
    Checkpoint { line: usize, message: String },
    #[error(transparent)]
    Heat(#[from] HeatError),
}

pub type Result<T> = std::result::Result<T, PinnError>;

/// Second-order hyper-dual number `v + d1 ε1 + d2 ε2 + d12 ε1ε2` with `ε1² = ε2² = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HyperDual {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d12: f64,
}

impl HyperDual {
    pub fn constant(value: f64) -> Self {
        Self {
            value,
            ..Self::default()
        }
    }

    pub fn new(value: f64, d1: f64, d2: f64, d12: f64) -> Self {
        Self { value, d1, d2, d12 }
    }

    /// Applies a scalar function given its value and first two derivatives at `self.value`.
    pub fn chain(self, f: f64, df: f64, ddf: f64) -> Self {
        Self {
            value: f,
            d1: df * self.d1,
            d2: df * self.d2,
            d12: df * self.d12 + ddf * self.d1 * self.d2,
        }
    }

    pub fn tanh(self) -> Self {
        let s = self.value.tanh();
        let ds = 1.0 - s * s;
        self.chain(s, ds, -2.0 * s * ds)
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }
}

impl Add for HyperDual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.value + o.value, self.d1 + o.d1, self.d2 + o.d2, self.d12 + o.d12)
    }
}

impl Sub for HyperDual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Neg for HyperDual {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.value, -self.d1, -self.d2, -self.d12)
    }
}

impl Mul for HyperDual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            value: self.value * o.value,
            d1: self.d1 * o.value + self.value * o.d1,
            d2: self.d2 * o.value + self.value * o.d2,
            d12: self.d12 * o.value + self.d1 * o.d2 + self.d2 * o.d1 + self.value * o.d12,
        }
    }
}

impl Mul<f64> for HyperDual {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.value * s, self.d1 * s, self.d2 * s, self.d12 * s)
    }
}

impl Add<f64> for HyperDual {
    type Output = Self;
    fn add(self, s: f64) -> Self {
        Self {
            value: self.value + s,
            ..self
        }
    }
}

/// Value and input derivatives of a candidate solution at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub u: f64,
    pub u_t: f64,
    pub u_x: f64,
    pub u_xx: f64,
}

/// Anything that can be certified: a function of `(t, x)` with its derivatives.
pub trait Candidate: Sync {
    fn jet(&self, t: f64, x: f64) -> Jet;

    fn value(&self, t: f64, x: f64) -> f64 {
        self.jet(t, x).u
    }
}

/// The exact solution `Σ c_k e^{-α(kπ)²t} sin(kπx)` of a homogeneous sine-series problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SineSeriesCandidate {
    pub alpha: f64,
    pub coefficients: Vec<f64>,
}

impl SineSeriesCandidate {
    pub fn for_problem(problem: &HeatProblem) -> Result<Self> {
        let coefficients = problem
            .sine_coefficients
            .clone()
            .ok_or_else(|| PinnError::InvalidConfig("problem has no sine-series initial condition".into()))?;
        Ok(Self {
            alpha: problem.alpha,
            coefficients,
        })
    }
}

impl Candidate for SineSeriesCandidate {
    fn jet(&self, t: f64, x: f64) -> Jet {
        let mut j = Jet::default();
        for (k, c) in self.coefficients.iter().enumerate() {
            let kp = (k + 1) as f64 * PI;
            let decay = c * (-self.alpha * kp * kp * t).exp();
            let (s, co) = (kp * x).sin_cos();
            j.u += decay * s;
            j.u_t += -self.alpha * kp * kp * decay * s;
            j.u_x += decay * kp * co;
            j.u_xx += -decay * kp * kp * s;
        }
        j
    }
}

/// A candidate given directly by a closure returning its jet.
pub struct FnCandidate<F>(pub F);

impl<F: Fn(f64, f64) -> Jet + Sync> Candidate for FnCandidate<F> {
    fn jet(&self, t: f64, x: f64) -> Jet {
        (self.0)(t, x)
    }
}

type Channels = [f64; 4];

fn tanh_derivs(z: f64) -> (f64, f64, f64, f64) {
    let s = z.tanh();
    let d1 = 1.0 - s * s;
    let d2 = -2.0 * s * d1;
    let d3 = -2.0 * d1 * d1 - 2.0 * s * d2;
    (s, d1, d2, d3)
}

/// Fully connected tanh network `ℝ² → ℝ`, parameters stored layer by layer as
/// the row-major weight matrix `out × in` followed by the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_sizes: Vec<usize>,
    params: Vec<f64>,
    pub seed: u64,
}

/// Scratch buffers holding the forward jets of one sample.
#[derive(Debug, Clone)]
struct Workspace {
    /// Activations per layer, `acts[0]` is the input.
    acts: Vec<Vec<Channels>>,
    /// Pre-activations per layer.
    pre: Vec<Vec<Channels>>,
    abar: Vec<Channels>,
    zbar: Vec<Channels>,
}

impl MlpModel {
    pub const DEFAULT_LAYERS: [usize; 6] = [2, 10, 10, 10, 10, 1];

    /// Glorot-uniform weights, zero biases.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        let mut model = Self::zeros(layer_sizes)?;
        model.seed = seed;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        let mut offset = 0;
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut model.params[offset..offset + fan_in * fan_out] {
                *p = rng.gen_range(-limit..limit);
            }
            offset += fan_in * fan_out + fan_out;
        }
        Ok(model)
    }

    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2
            || layer_sizes[0] != 2
            || *layer_sizes.last().expect("nonempty") != 1
            || layer_sizes.contains(&0)
        {
            return Err(PinnError::InvalidConfig(format!(
                "layer sizes must start at 2, end at 1 and be positive, got {layer_sizes:?}"
            )));
        }
        let count = layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            params: vec![0.0; count],
            seed: 0,
        })
    }

    pub fn from_params(layer_sizes: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut m = Self::zeros(layer_sizes)?;
        if params.len() != m.params.len() {
            return Err(PinnError::InvalidConfig(format!(
                "expected {} parameters, got {}",
                m.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(PinnError::InvalidConfig("non-finite parameter".into()));
        }
        m.params = params;
        Ok(m)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Offsets of the weight matrix and bias of every layer.
    pub fn layer_offsets(&self) -> Vec<(usize, usize)> {
        let mut offset = 0;
        self.layer_sizes
            .windows(2)
            .map(|w| {
                let here = (offset, offset + w[0] * w[1]);
                offset += w[0] * w[1] + w[1];
                here
            })
            .collect()
    }

    fn workspace(&self) -> Workspace {
        Workspace {
            acts: self.layer_sizes.iter().map(|&n| vec![[0.0; 4]; n]).collect(),
            pre: self.layer_sizes[1..].iter().map(|&n| vec![[0.0; 4]; n]).collect(),
            abar: Vec::with_capacity(*self.layer_sizes.iter().max().expect("nonempty")),
            zbar: Vec::with_capacity(*self.layer_sizes.iter().max().expect("nonempty")),
        }
    }

    /// Plain forward pass.
    pub fn forward(&self, t: f64, x: f64) -> f64 {
        let mut cur = vec![t, x];
        let mut offset = 0;
        let last = self.num_layers() - 1;
        for (l, w) in self.layer_sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let next: Vec<f64> = (0..n_out)
                .map(|i| {
                    let z = bias[i]
                        + weights[i * n_in..(i + 1) * n_in]
                            .iter()
                            .zip(&cur)
                            .map(|(a, b)| a * b)
                            .sum::<f64>();
                    if l == last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            cur = next;
            offset += n_in * n_out + n_out;
        }
        cur[0]
    }

    fn forward_jet(&self, t: f64, x: f64, ws: &mut Workspace) -> Jet {
        ws.acts[0][0] = [t, 1.0, 0.0, 0.0];
        ws.acts[0][1] = [x, 0.0, 1.0, 0.0];
        let mut offset = 0;
        let last = self.num_layers() - 1;
        for l in 0..=last {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            let (before, after) = ws.acts.split_at_mut(l + 1);
            let input = &before[l];
            let output = &mut after[0];
            let pre = &mut ws.pre[l];
            for i in 0..n_out {
                let row = &weights[i * n_in..(i + 1) * n_in];
                let mut z = [bias[i], 0.0, 0.0, 0.0];
                for (wij, a) in row.iter().zip(input.iter()) {
                    z[0] += wij * a[0];
                    z[1] += wij * a[1];
                    z[2] += wij * a[2];
                    z[3] += wij * a[3];
                }
                pre[i] = z;
                output[i] = if l == last {
                    z
                } else {
                    let (s, d1, d2, _) = tanh_derivs(z[0]);
                    [s, d1 * z[1], d1 * z[2], d2 * z[2] * z[2] + d1 * z[3]]
                };
            }
            offset += n_in * n_out + n_out;
        }
        let out = ws.acts[last + 1][0];
        Jet {
            u: out[0],
            u_t: out[1],
            u_x: out[2],
            u_xx: out[3],
        }
    }

    /// Reverse sweep after `forward_jet`, accumulating `∂L/∂θ` for an output adjoint
    /// on `(u, u_t, u_x, u_xx)`.
    fn backward_jet(&self, seed: Channels, ws: &mut Workspace, grad: &mut [f64]) {
        let offsets = self.layer_offsets();
        let last = self.num_layers() - 1;
        ws.abar.clear();
        ws.abar.push(seed);
        for l in (0..=last).rev() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            ws.zbar.clear();
            for i in 0..n_out {
                let ab = ws.abar[i];
                if l == last {
                    ws.zbar.push(ab);
                } else {
                    let z = ws.pre[l][i];
                    let (_, d1, d2, d3) = tanh_derivs(z[0]);
                    let zv =
                        ab[0] * d1 + ab[1] * d2 * z[1] + ab[2] * d2 * z[2] + ab[3] * (d3 * z[2] * z[2] + d2 * z[3]);
                    let zt = ab[1] * d1;
                    let zx = ab[2] * d1 + ab[3] * 2.0 * d2 * z[2];
                    let zxx = ab[3] * d1;
                    ws.zbar.push([zv, zt, zx, zxx]);
                }
            }
            let (w_off, b_off) = offsets[l];
            let input = &ws.acts[l];
            for i in 0..n_out {
                let zb = ws.zbar[i];
                grad[b_off + i] += zb[0];
                let g_row = &mut grad[w_off + i * n_in..w_off + (i + 1) * n_in];
                for (g, a) in g_row.iter_mut().zip(input.iter()) {
                    *g += zb[0] * a[0] + zb[1] * a[1] + zb[2] * a[2] + zb[3] * a[3];
                }
            }
            if l > 0 {
                let weights = &self.params[w_off..w_off + n_in * n_out];
                ws.abar.clear();
                ws.abar.resize(n_in, [0.0; 4]);
                for i in 0..n_out {
                    let zb = ws.zbar[i];
                    for (j, wij) in weights[i * n_in..(i + 1) * n_in].iter().enumerate() {
                        let ab = &mut ws.abar[j];
                        ab[0] += wij * zb[0];
                        ab[1] += wij * zb[1];
                        ab[2] += wij * zb[2];
                        ab[3] += wij * zb[3];
                    }
                }
            }
        }
    }

    /// Forward pass over hyper-dual inputs.
    pub fn forward_hyperdual(&self, t: HyperDual, x: HyperDual) -> HyperDual {
        let mut cur = vec![t, x];
        let mut offset = 0;
        let last = self.num_layers() - 1;
        for (l, w) in self.layer_sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            cur = (0..n_out)
                .map(|i| {
                    let z = weights[i * n_in..(i + 1) * n_in]
                        .iter()
                        .zip(&cur)
                        .fold(HyperDual::constant(bias[i]), |acc, (w, a)| acc + *a * *w);
                    if l == last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            offset += n_in * n_out + n_out;
        }
        cur[0]
    }
}

/// `(u, u_t, u_x, u_xx)` from two hyper-dual passes: directions `(t, x)` for the
/// first derivatives and `(x, x)` for the second.
pub fn eval_with_derivatives(m: &MlpModel, t: f64, x: f64) -> Jet {
    let first = m.forward_hyperdual(HyperDual::new(t, 1.0, 0.0, 0.0), HyperDual::new(x, 0.0, 1.0, 0.0));
    let second = m.forward_hyperdual(HyperDual::constant(t), HyperDual::new(x, 1.0, 1.0, 0.0));
    Jet {
        u: first.value,
        u_t: first.d1,
        u_x: first.d2,
        u_xx: second.d12,
    }
}

impl Candidate for MlpModel {
    fn jet(&self, t: f64, x: f64) -> Jet {
        let mut ws = self.workspace();
        self.forward_jet(t, x, &mut ws)
    }

    fn value(&self, t: f64, x: f64) -> f64 {
        self.forward(t, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub a_evo: f64,
    pub a_init: f64,
    pub a_bc1: f64,
    pub a_bc2: f64,
    pub n_evo: usize,
    pub n_init: usize,
    pub n_bc: usize,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            a_evo: 0.5,
            a_init: 0.5,
            a_bc1: 20.0,
            a_bc2: 200.0,
            n_evo: 5000,
            n_init: 200,
            n_bc: 100,
        }
    }
}

impl LossWeights {
    /// `a_bc2 / a_bc1`, undefined when `a_bc1 = 0`.
    pub fn lambda_bc(&self) -> Option<f64> {
        (self.a_bc1 > 0.0).then(|| self.a_bc2 / self.a_bc1)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("a_evo", self.a_evo),
            ("a_init", self.a_init),
            ("a_bc1", self.a_bc1),
            ("a_bc2", self.a_bc2),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(PinnError::InvalidConfig(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Latin hypercube sample of `n` points in the box `ranges`.
pub fn sample_lhs(n: usize, ranges: &[(f64, f64)], seed: u64) -> Result<Vec<Vec<f64>>> {
    lhs_with(n, ranges, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn lhs_with(n: usize, ranges: &[(f64, f64)], rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(PinnError::EmptyBatch("latin hypercube needs n >= 1".into()));
    }
    let mut points = vec![vec![0.0; ranges.len()]; n];
    for (d, &(lo, hi)) in ranges.iter().enumerate() {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (p, s) in points.iter_mut().zip(strata) {
            let u: f64 = rng.gen();
            p[d] = lo + (hi - lo) * (s as f64 + u) / n as f64;
        }
    }
    Ok(points)
}

/// Collocation points with their targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub evo: Vec<(f64, f64)>,
    /// `(x, x0(x))`
    pub init: Vec<(f64, f64)>,
    /// `(t, x_bc, g(t), ġ(t))`
    pub bc: Vec<(f64, f64, f64, f64)>,
}

impl Batch {
    /// LHS in `𝕋 × Ω` for the evolution term, in `Ω` for the initial term, and in `𝕋`
    /// for the boundary term with `x_bc` alternating between 0 and 1.
    pub fn sample(problem: &HeatProblem, w: &LossWeights, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let evo = lhs_with(w.n_evo, &[(0.0, problem.t_end), (0.0, 1.0)], &mut rng)?
            .into_iter()
            .map(|p| (p[0], p[1]))
            .collect();
        rng.set_stream(2);
        let init = lhs_with(w.n_init, &[(0.0, 1.0)], &mut rng)?
            .into_iter()
            .map(|p| (p[0], (problem.initial)(p[0])))
            .collect();
        rng.set_stream(3);
        let bc = lhs_with(w.n_bc, &[(0.0, problem.t_end)], &mut rng)?
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                let t = p[0];
                let (g, gd) = ((problem.boundary)(t), (problem.boundary_rate)(t));
                if i % 2 == 0 {
                    (t, 0.0, g.0, gd.0)
                } else {
                    (t, 1.0, g.1, gd.1)
                }
            })
            .collect();
        Ok(Self { evo, init, bc })
    }
}

/// Weighted loss terms; `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub total: f64,
    pub evo: f64,
    pub init: f64,
    pub bc1: f64,
    pub bc2: f64,
}

impl Add for LossBreakdown {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            total: self.total + o.total,
            evo: self.evo + o.evo,
            init: self.init + o.init,
            bc1: self.bc1 + o.bc1,
            bc2: self.bc2 + o.bc2,
        }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

const CHUNK: usize = 256;

enum Sample {
    Evo(f64, f64),
    Init(f64, f64),
    Bc(f64, f64, f64, f64),
}

/// Sample-mean L¹ loss and its parameter gradient.
pub fn loss(m: &MlpModel, batch: &Batch, w: &LossWeights, alpha: f64) -> Result<(LossBreakdown, Vec<f64>)> {
    if batch.evo.is_empty() || batch.init.is_empty() || batch.bc.is_empty() {
        return Err(PinnError::EmptyBatch(format!(
            "evo {}, init {}, bc {}",
            batch.evo.len(),
            batch.init.len(),
            batch.bc.len()
        )));
    }
    let c_evo = w.a_evo / batch.evo.len() as f64;
    let c_init = w.a_init / batch.init.len() as f64;
    let c_bc1 = w.a_bc1 / batch.bc.len() as f64;
    let c_bc2 = w.a_bc2 / batch.bc.len() as f64;

    let samples: Vec<Sample> = batch
        .evo
        .iter()
        .map(|&(t, x)| Sample::Evo(t, x))
        .chain(batch.init.iter().map(|&(x, v)| Sample::Init(x, v)))
        .chain(batch.bc.iter().map(|&(t, x, g, gd)| Sample::Bc(t, x, g, gd)))
        .collect();

    let partials: Vec<(LossBreakdown, Vec<f64>)> = samples
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut ws = m.workspace();
            let mut grad = vec![0.0; m.num_params()];
            let mut parts = LossBreakdown::default();
            for s in chunk {
                match *s {
                    Sample::Evo(t, x) => {
                        let j = m.forward_jet(t, x, &mut ws);
                        let r = j.u_t - alpha * j.u_xx;
                        parts.evo += c_evo * r.abs();
                        let g = c_evo * sign(r);
                        if g != 0.0 {
                            m.backward_jet([0.0, g, 0.0, -alpha * g], &mut ws, &mut grad);
                        }
                    }
                    Sample::Init(x, target) => {
                        let j = m.forward_jet(0.0, x, &mut ws);
                        let r = j.u - target;
                        parts.init += c_init * r.abs();
                        let g = c_init * sign(r);
                        if g != 0.0 {
                            m.backward_jet([g, 0.0, 0.0, 0.0], &mut ws, &mut grad);
                        }
                    }
                    Sample::Bc(t, x, target, rate) => {
                        let j = m.forward_jet(t, x, &mut ws);
                        let (r1, r2) = (j.u - target, j.u_t - rate);
                        parts.bc1 += c_bc1 * r1.abs();
                        parts.bc2 += c_bc2 * r2.abs();
                        let (g1, g2) = (c_bc1 * sign(r1), c_bc2 * sign(r2));
                        if g1 != 0.0 || g2 != 0.0 {
                            m.backward_jet([g1, g2, 0.0, 0.0], &mut ws, &mut grad);
                        }
                    }
                }
            }
            parts.total = parts.evo + parts.init + parts.bc1 + parts.bc2;
            (parts, grad)
        })
        .collect();

    let mut total = LossBreakdown::default();
    let mut grad = vec![0.0; m.num_params()];
    for (p, g) in partials {
        total = total + p;
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    Ok((total, grad))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    pub fn new(config: AdamConfig, num_params: usize) -> Self {
        Self {
            config,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            step: 0,
        }
    }

    /// One bias-corrected Adam update.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        let c = self.config;
        self.step += 1;
        let bc1 = 1.0 - c.beta1.powi(self.step);
        let bc2 = 1.0 - c.beta2.powi(self.step);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = c.beta1 * *m + (1.0 - c.beta1) * g;
            *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub layer_sizes: Vec<usize>,
    pub epochs: usize,
    pub seed: u64,
    pub weights: LossWeights,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            layer_sizes: MlpModel::DEFAULT_LAYERS.to_vec(),
            epochs: 10_000,
            seed: 42,
            weights: LossWeights::default(),
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: MlpModel,
    /// Loss before each update, then the final loss: `epochs + 1` entries.
    pub history: Vec<LossBreakdown>,
}

/// Full-batch Adam on a fixed LHS batch.
pub fn train(model: MlpModel, problem: &HeatProblem, cfg: &TrainConfig) -> Result<TrainOutcome> {
    problem.validate()?;
    cfg.weights.validate()?;
    let batch = Batch::sample(problem, &cfg.weights, cfg.seed)?;
    train_on_batch(model, &batch, problem.alpha, cfg)
}

pub fn train_on_batch(mut model: MlpModel, batch: &Batch, alpha: f64, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let mut adam = Adam::new(cfg.adam, model.num_params());
    let mut history = Vec::with_capacity(cfg.epochs + 1);
    for epoch in 0..=cfg.epochs {
        let (parts, grad) = loss(&model, batch, &cfg.weights, alpha)?;
        if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(PinnError::DivergedLoss {
                epoch,
                value: parts.total,
            });
        }
        history.push(parts);
        if epoch < cfg.epochs {
            adam.step(model.params_mut(), &grad);
        }
    }
    Ok(TrainOutcome { model, history })
}

pub const LOSS_CSV_HEADER: &str = "epoch,loss,loss_evo,loss_init,loss_bc1,loss_bc2";

pub fn loss_history_csv(history: &[LossBreakdown]) -> String {
    let mut out = String::from(LOSS_CSV_HEADER);
    out.push('\n');
    for (e, l) in history.iter().enumerate() {
        let cols = [l.total, l.evo, l.init, l.bc1, l.bc2].map(format_real).join(",");
        writeln!(out, "{e},{cols}").expect("writing to a String cannot fail");
    }
    out
}

const CHECKPOINT_HEADER: &str = "pinncert-mlp v1";

impl MlpModel {
    /// Header line, layer sizes, seed, then per layer one line per weight row and one bias line.
    pub fn to_checkpoint(&self) -> String {
        let mut out = format!("{CHECKPOINT_HEADER}\n");
        let sizes: Vec<String> = self.layer_sizes.iter().map(|s| s.to_string()).collect();
        writeln!(out, "{}", sizes.join(" ")).expect("string write");
        writeln!(out, "seed {}", self.seed).expect("string write");
        for ((w_off, b_off), w) in self.layer_offsets().into_iter().zip(self.layer_sizes.windows(2)) {
            let (n_in, n_out) = (w[0], w[1]);
            for i in 0..n_out {
                let row: Vec<String> = self.params[w_off + i * n_in..w_off + (i + 1) * n_in]
                    .iter()
                    .map(|p| format!("{p:e}"))
                    .collect();
                writeln!(out, "{}", row.join(" ")).expect("string write");
            }
            let bias: Vec<String> = self.params[b_off..b_off + n_out]
                .iter()
                .map(|p| format!("{p:e}"))
                .collect();
            writeln!(out, "{}", bias.join(" ")).expect("string write");
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let err = |line: usize, message: String| PinnError::Checkpoint { line, message };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, CHECKPOINT_HEADER)) => {}
            Some((n, other)) => return Err(err(n, format!("unknown header `{other}`"))),
            None => return Err(err(1, "empty checkpoint".into())),
        }
        let (n, sizes_line) = lines.next().ok_or_else(|| err(2, "missing layer sizes".into()))?;
        let sizes = sizes_line
            .split_whitespace()
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|e| err(n, format!("bad layer size `{s}`: {e}")))
            })
            .collect::<Result<Vec<usize>>>()?;
        let (n, seed_line) = lines.next().ok_or_else(|| err(3, "missing seed".into()))?;
        let seed = seed_line
            .strip_prefix("seed ")
            .and_then(|s| s.trim().parse::<u64>().ok())
            .ok_or_else(|| err(n, format!("bad seed line `{seed_line}`")))?;
        let mut model = Self::zeros(&sizes).map_err(|e| err(2, e.to_string()))?;
        model.seed = seed;
        let mut params = Vec::with_capacity(model.num_params());
        let mut last_line = 3;
        for w in sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            for expected in std::iter::repeat_n(n_in, n_out).chain(std::iter::once(n_out)) {
                let (n, line) = lines
                    .next()
                    .ok_or_else(|| err(last_line + 1, "unexpected end of checkpoint".into()))?;
                last_line = n;
                let row = line
                    .split_whitespace()
                    .map(|s| {
                        s.parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or_else(|| err(n, format!("bad parameter `{s}`")))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                if row.len() != expected {
                    return Err(err(n, format!("expected {expected} values, found {}", row.len())));
                }
                params.extend(row);
            }
        }
        if let Some((n, extra)) = lines.find(|(_, l)| !l.is_empty()) {
            return Err(err(n, format!("trailing content `{extra}`")));
        }
        model.params = params;
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceGrid {
    pub n_t: usize,
    /// Interior spatial points `x_k = k / (n_x + 1)`.
    pub n_x: usize,
    pub u_norm: UNorm,
}

impl Default for TraceGrid {
    fn default() -> Self {
        Self {
            n_t: 201,
            n_x: 201,
            u_norm: UNorm::default(),
        }
    }
}

impl TraceGrid {
    pub fn times(&self, t_end: f64) -> Vec<f64> {
        if self.n_t == 1 {
            return vec![0.0];
        }
        (0..self.n_t)
            .map(|i| t_end * i as f64 / (self.n_t - 1) as f64)
            .collect()
    }
}

/// Residual norms of `c` for `problem` on `grid`, with the Δ-weighted grid norm in space.
pub fn extract_trace(c: &dyn Candidate, problem: &HeatProblem, grid: &TraceGrid) -> Result<ResidualTrace> {
    problem.validate()?;
    if grid.n_t < 1 || grid.n_x < 1 {
        return Err(PinnError::InvalidConfig(
            "trace grid needs n_t >= 1 and n_x >= 1".into(),
        ));
    }
    let times = grid.times(problem.t_end);
    let xs: Vec<f64> = (1..=grid.n_x).map(|k| heat1d::node(grid.n_x, k)).collect();
    let alpha = problem.alpha;

    let rows: Vec<(f64, f64, f64)> = times
        .par_iter()
        .map(|&t| {
            let residual: Vec<f64> = xs
                .iter()
                .map(|&x| {
                    let j = c.jet(t, x);
                    j.u_t - alpha * j.u_xx
                })
                .collect();
            let (g, gd) = ((problem.boundary)(t), (problem.boundary_rate)(t));
            let (left, right) = (c.jet(t, 0.0), c.jet(t, 1.0));
            let db = grid.u_norm.norm((left.u - g.0, right.u - g.1));
            let dbd = grid.u_norm.norm((left.u_t - gd.0, right.u_t - gd.1));
            (heat1d::z_norm(&residual), db, dbd)
        })
        .collect();

    let (left, right) = (c.value(0.0, 0.0), c.value(0.0, 1.0));
    let g0 = (problem.boundary)(0.0);
    let lift = heat1d::lift_d0((left - g0.0, right - g0.1));
    let delta0: Vec<f64> = xs.iter().map(|&x| c.value(0.0, x) - (problem.initial)(x)).collect();
    let shifted: Vec<f64> = xs.iter().zip(&delta0).map(|(&x, d)| d - lift(x)).collect();

    Ok(ResidualTrace {
        times,
        delta_z: rows.iter().map(|r| r.0).collect(),
        delta_b_u: rows.iter().map(|r| r.1).collect(),
        delta_bdot_u: rows.iter().map(|r| r.2).collect(),
        delta0_z: heat1d::z_norm(&delta0),
        delta0_shifted_z: heat1d::z_norm(&shifted),
    })
}

/// `‖ũ(t_i) − x(t_i)‖_{L²}` by adaptive quadrature against a reference solution.
pub fn reference_errors(c: &dyn Candidate, reference: &ReferenceSolution, times: &[f64], tol: f64) -> Result<Vec<f64>> {
    times
        .par_iter()
        .map(|&t| Ok(heat1d::l2_norm(&|x| c.value(t, x) - reference.eval(t, x), tol)?))
        .collect()
}
