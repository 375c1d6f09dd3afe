//! Boundary operators on triangular meshes: vertex classification, the index
//! maps onto Dirichlet and Neumann boundary vertices, the boundary-operator
//! matrices, and their stacked right inverse.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::bounds::{self, LimitEstimate};
use crate::linalg::{self, DenseMatrix, LinalgError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("no triangle incident to Neumann vertex {vertex} contains the offset point along its normal")]
    NoNormalTriangle { vertex: usize },
    #[error("vertex {vertex} has an unusable Neumann normal")]
    AmbiguousTag { vertex: usize },
    #[error("triangle {triangle} is degenerate (area {area:e})")]
    DegenerateTriangle { triangle: usize, area: f64 },
    #[error("stacked boundary operator is rank deficient")]
    RankDeficient,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Linalg(LinalgError),
    #[error(transparent)]
    Bounds(#[from] bounds::BoundsError),
}

impl From<LinalgError> for MeshError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::RankDeficient { .. } => MeshError::RankDeficient,
            other => MeshError::Linalg(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, MeshError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VertexTag {
    Interior,
    Dirichlet,
    /// Direction along which the normal derivative is taken; it must point into the mesh.
    Neumann {
        normal: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub tags: Vec<VertexTag>,
}

/// `2 ×` signed area of `(a, b, c)`.
fn det2(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl TriMesh {
    pub fn new(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>, tags: Vec<VertexTag>) -> Result<Self> {
        let mesh = Self {
            vertices,
            triangles,
            tags,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        0.5 * det2(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    /// Edges that belong to exactly one triangle.
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut edges: Vec<(usize, usize)> = count.into_iter().filter(|(_, c)| *c == 1).map(|(e, _)| e).collect();
        edges.sort_unstable();
        edges
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if self.tags.len() != n {
            return Err(MeshError::InvalidMesh(format!(
                "{} tags for {n} vertices",
                self.tags.len()
            )));
        }
        if self.triangles.is_empty() {
            return Err(MeshError::InvalidMesh("no triangles".into()));
        }
        if let Some(v) = self
            .vertices
            .iter()
            .position(|p| !(p[0].is_finite() && p[1].is_finite()))
        {
            return Err(MeshError::InvalidMesh(format!("vertex {v} has non-finite coordinates")));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v >= n) {
                return Err(MeshError::InvalidMesh(format!(
                    "triangle {t} references vertex {bad} of {n}"
                )));
            }
            if !(self.signed_area(t) > 0.0) {
                return Err(MeshError::InvalidMesh(format!(
                    "triangle {t} has non-positive signed area {}",
                    self.signed_area(t)
                )));
            }
        }
        let mut on_boundary = vec![false; n];
        for (a, b) in self.boundary_edges() {
            on_boundary[a] = true;
            on_boundary[b] = true;
        }
        for (v, tag) in self.tags.iter().enumerate() {
            if let VertexTag::Neumann { normal } = tag {
                if !(normal[0].is_finite() && normal[1].is_finite()) || normal[0].hypot(normal[1]) == 0.0 {
                    return Err(MeshError::AmbiguousTag { vertex: v });
                }
            }
            if *tag != VertexTag::Interior && !on_boundary[v] {
                return Err(MeshError::InvalidMesh(format!(
                    "boundary-tagged vertex {v} is not on a boundary edge"
                )));
            }
        }
        Ok(())
    }

    /// Text form: `V T`, then `x y tag [nx ny]` per vertex, then one index triple per triangle.
    pub fn parse(text: &str) -> Result<Self> {
        let perr = |line: usize, message: String| MeshError::Parse { line, message };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hl, header) = lines.next().ok_or_else(|| perr(1, "empty mesh file".into()))?;
        let counts: Vec<usize> = header
            .split_whitespace()
            .map(|s| {
                s.parse()
                    .map_err(|_| perr(hl, format!("expected `V T`, found `{header}`")))
            })
            .collect::<Result<_>>()?;
        let [nv, nt] = counts[..] else {
            return Err(perr(hl, format!("expected `V T`, found `{header}`")));
        };
        let number = |line: usize, s: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| perr(line, format!("bad number `{s}`")))
        };
        let mut vertices = Vec::with_capacity(nv);
        let mut tags = Vec::with_capacity(nv);
        let mut last = hl;
        for _ in 0..nv {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| perr(last + 1, format!("expected {nv} vertex lines")))?;
            last = ln;
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() < 3 {
                return Err(perr(ln, format!("expected `x y tag [nx ny]`, found `{l}`")));
            }
            vertices.push([number(ln, f[0])?, number(ln, f[1])?]);
            let tag = match (f[2], f.len()) {
                ("i", 3) => VertexTag::Interior,
                ("d", 3) => VertexTag::Dirichlet,
                ("n", 5) => VertexTag::Neumann {
                    normal: [number(ln, f[3])?, number(ln, f[4])?],
                },
                ("n", _) => return Err(perr(ln, "Neumann vertex needs a normal `nx ny`".into())),
                ("i" | "d", _) => return Err(perr(ln, "only Neumann vertices carry a normal".into())),
                (other, _) => return Err(perr(ln, format!("unknown tag `{other}` (expected i, d or n)"))),
            };
            tags.push(tag);
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| perr(last + 1, format!("expected {nt} triangle lines")))?;
            last = ln;
            let idx: Vec<usize> = l
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| perr(ln, format!("bad vertex index `{s}`"))))
                .collect::<Result<_>>()?;
            let [a, b, c] = idx[..] else {
                return Err(perr(ln, format!("expected three vertex indices, found `{l}`")));
            };
            triangles.push([a, b, c]);
        }
        if let Some((ln, l)) = lines.next() {
            return Err(perr(ln, format!("trailing content `{l}`")));
        }
        Self::new(vertices, triangles, tags)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.vertices.len(), self.triangles.len());
        for (p, tag) in self.vertices.iter().zip(&self.tags) {
            let line = match tag {
                VertexTag::Interior => format!("{:e} {:e} i", p[0], p[1]),
                VertexTag::Dirichlet => format!("{:e} {:e} d", p[0], p[1]),
                VertexTag::Neumann { normal } => {
                    format!("{:e} {:e} n {:e} {:e}", p[0], p[1], normal[0], normal[1])
                }
            };
            writeln!(out, "{line}").expect("string write");
        }
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2]).expect("string write");
        }
        out
    }

    /// Uniform mesh of the unit square with `k × k` cells, each split along its
    /// `(0,0)–(1,1)` diagonal into two triangles; `tag` is called with each vertex position.
    pub fn unit_square(k: usize, tag: impl Fn(f64, f64) -> VertexTag) -> Result<Self> {
        if k == 0 {
            return Err(MeshError::InvalidMesh("need at least one cell".into()));
        }
        let h = 1.0 / k as f64;
        let idx = |i: usize, j: usize| j * (k + 1) + i;
        let mut vertices = Vec::with_capacity((k + 1) * (k + 1));
        let mut tags = Vec::with_capacity((k + 1) * (k + 1));
        for j in 0..=k {
            for i in 0..=k {
                let (x, y) = (i as f64 * h, j as f64 * h);
                vertices.push([x, y]);
                tags.push(tag(x, y));
            }
        }
        let mut triangles = Vec::with_capacity(2 * k * k);
        for j in 0..k {
            for i in 0..k {
                triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
        Self::new(vertices, triangles, tags)
    }
}

/// The triangle used for the normal derivative at a Neumann vertex `alpha`;
/// `(alpha, beta, zeta)` is counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeumannTriangle {
    pub alpha: usize,
    pub beta: usize,
    pub zeta: usize,
    pub triangle: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMaps {
    pub iota_d: Vec<usize>,
    pub iota_n: Vec<usize>,
    pub gamma_n: Vec<NeumannTriangle>,
}

const NORMAL_OFFSET: f64 = 1e-6;
const BARY_TOL: f64 = 1e-12;

fn barycentric(p: [f64; 2], a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> [f64; 3] {
    let d = det2(a, b, c);
    [det2(p, b, c) / d, det2(a, p, c) / d, det2(a, b, p) / d]
}

pub fn classify_and_map(mesh: &TriMesh) -> Result<BoundaryMaps> {
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); mesh.num_vertices()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for &v in tri {
            incident[v].push(t);
        }
    }
    let mut maps = BoundaryMaps {
        iota_d: Vec::new(),
        iota_n: Vec::new(),
        gamma_n: Vec::new(),
    };
    for (v, tag) in mesh.tags.iter().enumerate() {
        match tag {
            VertexTag::Interior => {}
            VertexTag::Dirichlet => maps.iota_d.push(v),
            VertexTag::Neumann { normal } => {
                let len = normal[0].hypot(normal[1]);
                if !(len > 0.0 && len.is_finite()) {
                    return Err(MeshError::AmbiguousTag { vertex: v });
                }
                let alpha = mesh.vertices[v];
                let h = incident[v]
                    .iter()
                    .flat_map(|&t| mesh.triangles[t].iter())
                    .filter(|&&w| w != v)
                    .map(|&w| dist(alpha, mesh.vertices[w]))
                    .fold(f64::INFINITY, f64::min);
                let eps = NORMAL_OFFSET * h;
                let p = [alpha[0] + eps * normal[0] / len, alpha[1] + eps * normal[1] / len];
                let mut best: Option<(f64, usize)> = None;
                for &t in &incident[v] {
                    let [a, b, c] = mesh.triangles[t];
                    let lam = barycentric(p, mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
                    let inner = lam.iter().cloned().fold(f64::INFINITY, f64::min);
                    if inner >= -BARY_TOL && best.is_none_or(|(m, _)| inner > m) {
                        best = Some((inner, t));
                    }
                }
                let (_, t) = best.ok_or(MeshError::NoNormalTriangle { vertex: v })?;
                let tri = mesh.triangles[t];
                let k = tri.iter().position(|&w| w == v).expect("incident");
                maps.iota_n.push(v);
                maps.gamma_n.push(NeumannTriangle {
                    alpha: v,
                    beta: tri[(k + 1) % 3],
                    zeta: tri[(k + 2) % 3],
                    triangle: t,
                });
            }
        }
    }
    Ok(maps)
}

/// Unit rows `e_{ι_D(i)}ᵀ`.
pub fn assemble_dirichlet(mesh: &TriMesh, maps: &BoundaryMaps) -> DenseMatrix {
    let mut d = DenseMatrix::zeros(maps.iota_d.len(), mesh.num_vertices());
    let n = mesh.num_vertices();
    let data: Vec<f64> = maps
        .iota_d
        .iter()
        .flat_map(|&j| (0..n).map(move |c| if c == j { 1.0 } else { 0.0 }))
        .collect();
    if !data.is_empty() {
        d = DenseMatrix::new(maps.iota_d.len(), n, data).expect("sized");
    }
    d
}

fn neumann_rows(
    mesh: &TriMesh,
    maps: &BoundaryMaps,
    coefficients: impl Fn([f64; 2], [f64; 2], [f64; 2], [f64; 2], f64) -> [f64; 3],
) -> Result<DenseMatrix> {
    let n = mesh.num_vertices();
    let mut data = vec![0.0; maps.gamma_n.len() * n];
    for (i, g) in maps.gamma_n.iter().enumerate() {
        let (a, b, z) = (mesh.vertices[g.alpha], mesh.vertices[g.beta], mesh.vertices[g.zeta]);
        let det = det2(a, b, z);
        if 0.5 * det < 1e-14 {
            return Err(MeshError::DegenerateTriangle {
                triangle: g.triangle,
                area: 0.5 * det,
            });
        }
        let normal = match mesh.tags[g.alpha] {
            VertexTag::Neumann { normal } => normal,
            _ => return Err(MeshError::AmbiguousTag { vertex: g.alpha }),
        };
        let c = coefficients(a, b, z, normal, det);
        data[i * n + g.alpha] += c[0];
        data[i * n + g.beta] += c[1];
        data[i * n + g.zeta] += c[2];
    }
    if maps.gamma_n.is_empty() {
        return Ok(DenseMatrix::zeros(0, n));
    }
    Ok(DenseMatrix::new(maps.gamma_n.len(), n, data)?)
}

/// Row `i` is `n·∇` of the linear interpolant on `γ_N(i)`.
pub fn assemble_neumann(mesh: &TriMesh, maps: &BoundaryMaps) -> Result<DenseMatrix> {
    neumann_rows(mesh, maps, |a, b, z, n, det| {
        let gx = [(b[1] - z[1]) / det, (z[1] - a[1]) / det, (a[1] - b[1]) / det];
        let gy = [(z[0] - b[0]) / det, (a[0] - z[0]) / det, (b[0] - a[0]) / det];
        [
            n[0] * gx[0] + n[1] * gy[0],
            n[0] * gx[1] + n[1] * gy[1],
            n[0] * gx[2] + n[1] * gy[2],
        ]
    })
}

/// The x-derivative coefficients in the printed closed form (middle numerator
/// `−y_α + 2y_β − y_ζ`), scaled by `n_x`. Kept for comparison only: it is not
/// exact on linear fields.
pub fn assemble_neumann_printed(mesh: &TriMesh, maps: &BoundaryMaps) -> Result<DenseMatrix> {
    neumann_rows(mesh, maps, |a, b, z, n, det| {
        [
            n[0] * (b[1] - z[1]) / det,
            n[0] * (-a[1] + 2.0 * b[1] - z[1]) / det,
            n[0] * (a[1] - b[1]) / det,
        ]
    })
}

/// `D_n = [D_D; D_N]` and its Moore–Penrose right inverse.
pub fn stack_and_invert(d_d: &DenseMatrix, d_n: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    if d_d.cols() != d_n.cols() {
        return Err(MeshError::ShapeMismatch(format!(
            "Dirichlet block has {} columns, Neumann block {}",
            d_d.cols(),
            d_n.cols()
        )));
    }
    let stacked = d_d.vstack(d_n)?;
    let inverse = linalg::pinv_right(&stacked)?;
    Ok((stacked, inverse))
}

/// Full pipeline for one mesh: `(D_n, D_{n,0})`, repeated block-diagonally for
/// `components` field components.
pub fn boundary_operator(mesh: &TriMesh, components: usize) -> Result<(DenseMatrix, DenseMatrix)> {
    let maps = classify_and_map(mesh)?;
    let d_d = assemble_dirichlet(mesh, &maps);
    let d_n = assemble_neumann(mesh, &maps)?;
    let (d, d0) = stack_and_invert(&d_d, &d_n)?;
    if components <= 1 {
        Ok((d, d0))
    } else {
        Ok((d.block_diag_repeat(components), d0.block_diag_repeat(components)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormRow {
    /// Number of unknowns (columns of `D_n`).
    pub n: usize,
    pub norm_d0: f64,
    pub norm_ad0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormSweep {
    pub rows: Vec<NormRow>,
    pub d0_limit: Option<LimitEstimate>,
    pub ad0_limit: Option<LimitEstimate>,
}

/// One refinement level: the right inverse `D_{n,0}` and an optional generator `A_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepLevel {
    pub d0: DenseMatrix,
    pub a: Option<DenseMatrix>,
}

pub const SWEEP_TAIL: usize = 3;
pub const SWEEP_TOL: f64 = 1e-3;

/// `μ_e ‖D_{n,0}‖` and `μ_e ‖A_n D_{n,0}‖` per level, with limit estimates over the
/// last (up to) three levels when at least two are given.
pub fn norm_sweep(levels: &[SweepLevel], mu_e: f64) -> Result<NormSweep> {
    let mut rows = Vec::with_capacity(levels.len());
    let mut ad0_mats = Vec::new();
    for (k, level) in levels.iter().enumerate() {
        let norm_ad0 = match &level.a {
            Some(a) => {
                if a.rows() != a.cols() || a.cols() != level.d0.rows() {
                    return Err(MeshError::ShapeMismatch(format!(
                        "level {k}: A is {}x{} but D0 has {} rows",
                        a.rows(),
                        a.cols(),
                        level.d0.rows()
                    )));
                }
                let ad0 = a.matmul(&level.d0)?;
                let v = mu_e * spectral_or_zero(&ad0)?;
                ad0_mats.push(ad0);
                Some(v)
            }
            None => None,
        };
        rows.push(NormRow {
            n: level.d0.rows(),
            norm_d0: mu_e * spectral_or_zero(&level.d0)?,
            norm_ad0,
        });
    }
    let tail = SWEEP_TAIL.min(rows.len());
    let limit_of = |values: Vec<f64>, mats: &[DenseMatrix]| -> Result<Option<LimitEstimate>> {
        if tail < 2 || values.len() != rows.len() {
            return Ok(None);
        }
        let same_cols = mats.windows(2).all(|w| w[0].cols() == w[1].cols());
        Ok(Some(if same_cols && mats.len() == values.len() {
            bounds::operator_norm_limit(mats, mu_e, tail, SWEEP_TOL)?
        } else {
            bounds::value_limit(&values, tail, SWEEP_TOL)?
        }))
    };
    let d0_mats: Vec<DenseMatrix> = levels.iter().map(|l| l.d0.clone()).collect();
    let d0_limit = limit_of(rows.iter().map(|r| r.norm_d0).collect(), &d0_mats)?;
    let ad0_limit = limit_of(rows.iter().filter_map(|r| r.norm_ad0).collect(), &ad0_mats)?;
    Ok(NormSweep {
        rows,
        d0_limit,
        ad0_limit,
    })
}

fn spectral_or_zero(m: &DenseMatrix) -> Result<f64> {
    if m.is_empty() {
        Ok(0.0)
    } else {
        Ok(linalg::spectral_norm(m)?)
    }
}

/// Unscaled five-point Laplacian stencil on the vertex grid of [`TriMesh::unit_square`]:
/// `−4` on the diagonal (minus missing neighbours) and `1` per grid neighbour.
pub fn grid_laplacian(k: usize) -> DenseMatrix {
    let n = (k + 1) * (k + 1);
    let mut a = vec![0.0; n * n];
    for j in 0..=k {
        for i in 0..=k {
            let p = j * (k + 1) + i;
            let mut neighbours = Vec::with_capacity(4);
            if i > 0 {
                neighbours.push(p - 1);
            }
            if i < k {
                neighbours.push(p + 1);
            }
            if j > 0 {
                neighbours.push(p - (k + 1));
            }
            if j < k {
                neighbours.push(p + k + 1);
            }
            a[p * n + p] = -(neighbours.len() as f64);
            for q in neighbours {
                a[p * n + q] = 1.0;
            }
        }
    }
    DenseMatrix::new(n, n, a).expect("sized")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn on_boundary(x: f64, y: f64) -> bool {
        x == 0.0 || y == 0.0 || x == 1.0 || y == 1.0
    }

    fn dirichlet_square(k: usize) -> TriMesh {
        TriMesh::unit_square(k, |x, y| {
            if on_boundary(x, y) {
                VertexTag::Dirichlet
            } else {
                VertexTag::Interior
            }
        })
        .unwrap()
    }

    /// Right edge Neumann (derivative in −x), corners and other edges Dirichlet.
    fn outlet_square(k: usize) -> TriMesh {
        TriMesh::unit_square(k, |x, y| {
            if x == 1.0 && y > 0.0 && y < 1.0 {
                VertexTag::Neumann { normal: [-1.0, 0.0] }
            } else if on_boundary(x, y) {
                VertexTag::Dirichlet
            } else {
                VertexTag::Interior
            }
        })
        .unwrap()
    }

    fn contains(mesh: &TriMesh, t: usize, p: [f64; 2]) -> bool {
        let [a, b, c] = mesh.triangles[t];
        let lam = barycentric(p, mesh.vertices[a], mesh.vertices[b], mesh.vertices[c]);
        lam.iter().all(|l| *l >= -1e-12)
    }

    #[test]
    fn two_triangle_right_edge() {
        let mesh = TriMesh::unit_square(1, |x, _| {
            if x == 1.0 {
                VertexTag::Neumann { normal: [-1.0, 0.0] }
            } else {
                VertexTag::Dirichlet
            }
        })
        .unwrap();
        let maps = classify_and_map(&mesh).unwrap();
        assert_eq!(maps.iota_d, vec![0, 2]);
        assert_eq!(maps.iota_n, vec![1, 3]);
        // (1,0) touches only triangle 0, which holds the right edge; (1 − ε, 1) lies
        // above the diagonal, on the top edge of triangle 1.
        assert_eq!(maps.gamma_n[0].triangle, 0);
        assert_eq!(maps.gamma_n[1].triangle, 1);
        for g in &maps.gamma_n {
            assert!(mesh.triangles[g.triangle].contains(&g.alpha));
            let tri = mesh.triangles[g.triangle];
            let k = tri.iter().position(|&v| v == g.alpha).unwrap();
            assert_eq!((tri[(k + 1) % 3], tri[(k + 2) % 3]), (g.beta, g.zeta));
        }
    }

    #[test]
    fn all_dirichlet_has_no_neumann() {
        let maps = classify_and_map(&dirichlet_square(3)).unwrap();
        assert!(maps.iota_n.is_empty() && maps.gamma_n.is_empty());
        assert_eq!(maps.iota_d.len(), 12);
    }

    #[test]
    fn bottom_boundary_picks_upward_triangle() {
        // Bottom edge Neumann with normal pointing up; the offset point above an
        // interior bottom vertex must lie in the triangle found.
        let mesh = TriMesh::unit_square(4, |x, y| {
            if y == 0.0 && x > 0.0 && x < 1.0 {
                VertexTag::Neumann { normal: [0.0, 1.0] }
            } else if on_boundary(x, y) {
                VertexTag::Dirichlet
            } else {
                VertexTag::Interior
            }
        })
        .unwrap();
        let maps = classify_and_map(&mesh).unwrap();
        assert_eq!(maps.iota_n, vec![1, 2, 3]);
        for g in &maps.gamma_n {
            let a = mesh.vertices[g.alpha];
            assert!(contains(&mesh, g.triangle, [a[0], a[1] + 1e-7]));
            // The chosen triangle is the one with an edge going straight up from α.
            let up = g.alpha + 5;
            assert!(mesh.triangles[g.triangle].contains(&up));
        }
    }

    #[test]
    fn outward_normal_is_rejected() {
        let mesh = TriMesh::unit_square(2, |x, y| {
            if x == 1.0 && y > 0.0 && y < 1.0 {
                VertexTag::Neumann { normal: [1.0, 0.0] }
            } else if on_boundary(x, y) {
                VertexTag::Dirichlet
            } else {
                VertexTag::Interior
            }
        })
        .unwrap();
        assert!(matches!(
            classify_and_map(&mesh),
            Err(MeshError::NoNormalTriangle { vertex: 5 })
        ));
    }

    #[test]
    fn zero_normal_is_ambiguous() {
        let res = TriMesh::unit_square(1, |x, _| {
            if x == 1.0 {
                VertexTag::Neumann { normal: [0.0, 0.0] }
            } else {
                VertexTag::Dirichlet
            }
        });
        assert!(matches!(res, Err(MeshError::AmbiguousTag { .. })));
    }

    #[test]
    fn right_triangle_coefficients() {
        let h = 0.25;
        let mesh = TriMesh::new(
            vec![[0.0, 0.0], [h, 0.0], [0.0, h]],
            vec![[0, 1, 2]],
            vec![
                VertexTag::Neumann { normal: [1.0, 0.0] },
                VertexTag::Dirichlet,
                VertexTag::Dirichlet,
            ],
        )
        .unwrap();
        let maps = classify_and_map(&mesh).unwrap();
        let dn = assemble_neumann(&mesh, &maps).unwrap();
        assert_eq!(dn.row(0), &[-1.0 / h, 1.0 / h, 0.0]);
        let dd = assemble_dirichlet(&mesh, &maps);
        assert_eq!(dd.row(0), &[0.0, 1.0, 0.0]);
        assert_eq!(dd.row(1), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn dirichlet_rows_are_orthonormal() {
        let mesh = dirichlet_square(2);
        let maps = classify_and_map(&mesh).unwrap();
        let dd = assemble_dirichlet(&mesh, &maps);
        assert_eq!(dd.matmul(&dd.transpose()).unwrap(), DenseMatrix::identity(8));
        let (_, d0) = stack_and_invert(&dd, &DenseMatrix::zeros(0, 9)).unwrap();
        assert!(d0.sub(&dd.transpose()).unwrap().max_abs() < 1e-14);
        let empty = assemble_dirichlet(
            &TriMesh::unit_square(1, |_, _| VertexTag::Interior).unwrap(),
            &BoundaryMaps {
                iota_d: vec![],
                iota_n: vec![],
                gamma_n: vec![],
            },
        );
        assert_eq!(empty.shape(), (0, 4));
    }

    #[test]
    fn exact_on_linear_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in [1usize, 4, 16] {
            for _ in 0..10 {
                let center = [0.5 + rng.gen_range(-0.2..0.2), 0.5 + rng.gen_range(-0.2..0.2)];
                let scale = rng.gen_range(0.5..3.0);
                let mesh = TriMesh::unit_square(k, |x, y| {
                    if on_boundary(x, y) {
                        VertexTag::Neumann {
                            normal: [scale * (center[0] - x), scale * (center[1] - y)],
                        }
                    } else {
                        VertexTag::Interior
                    }
                })
                .unwrap();
                let maps = classify_and_map(&mesh).unwrap();
                let dn = assemble_neumann(&mesh, &maps).unwrap();
                let (a, b, c): (f64, f64, f64) = (rng.gen(), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
                let u: Vec<f64> = mesh.vertices.iter().map(|p| a + b * p[0] + c * p[1]).collect();
                let du = dn.matvec(&u).unwrap();
                for (i, v) in maps.iota_n.iter().enumerate() {
                    let VertexTag::Neumann { normal } = mesh.tags[*v] else {
                        unreachable!()
                    };
                    assert!((du[i] - (b * normal[0] + c * normal[1])).abs() <= 1e-12 * (1.0 + du[i].abs()) * k as f64);
                }
                let constant = dn.matvec(&vec![a; mesh.num_vertices()]).unwrap();
                assert!(constant.iter().all(|v| v.abs() < 1e-12 * k as f64));
            }
        }
    }

    #[test]
    fn printed_form_differs_on_linears() {
        let mesh = outlet_square(4);
        let maps = classify_and_map(&mesh).unwrap();
        let exact = assemble_neumann(&mesh, &maps).unwrap();
        let printed = assemble_neumann_printed(&mesh, &maps).unwrap();
        let u: Vec<f64> = mesh.vertices.iter().map(|p| p[1]).collect();
        // ∂_y-only field: the exact −∂_x row gives 0, the printed one does not.
        assert!(exact.matvec(&u).unwrap().iter().all(|v| v.abs() < 1e-12));
        assert!(printed.matvec(&u).unwrap().iter().any(|v| v.abs() > 1e-3));
    }

    #[test]
    fn mixed_stack_inverts() {
        let mesh = outlet_square(4);
        let (d, d0) = boundary_operator(&mesh, 1).unwrap();
        let eye = d.matmul(&d0).unwrap();
        assert!(eye.sub(&DenseMatrix::identity(d.rows())).unwrap().max_abs() < 1e-9);
        let (dv, d0v) = boundary_operator(&mesh, 2).unwrap();
        assert_eq!(dv.shape(), (2 * d.rows(), 2 * d.cols()));
        assert!(
            dv.matmul(&d0v)
                .unwrap()
                .sub(&DenseMatrix::identity(dv.rows()))
                .unwrap()
                .max_abs()
                < 1e-9
        );
    }

    #[test]
    fn duplicate_rows_are_rank_deficient() {
        let mesh = dirichlet_square(2);
        let maps = classify_and_map(&mesh).unwrap();
        let dd = assemble_dirichlet(&mesh, &maps);
        assert!(matches!(stack_and_invert(&dd, &dd), Err(MeshError::RankDeficient)));
        assert!(matches!(
            stack_and_invert(&dd, &DenseMatrix::zeros(1, 3)),
            Err(MeshError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn sweep_examples() {
        let mesh = dirichlet_square(3);
        let (_, d0) = boundary_operator(&mesh, 1).unwrap();
        let n = mesh.num_vertices();
        let eye = norm_sweep(
            &[SweepLevel {
                d0: d0.clone(),
                a: Some(DenseMatrix::identity(n)),
            }],
            1.0,
        )
        .unwrap();
        assert!((eye.rows[0].norm_d0 - 1.0).abs() < 1e-12);
        assert!((eye.rows[0].norm_ad0.unwrap() - 1.0).abs() < 1e-12);
        let zero = norm_sweep(
            &[SweepLevel {
                d0: d0.clone(),
                a: Some(DenseMatrix::zeros(n, n)),
            }],
            1.0,
        )
        .unwrap();
        assert_eq!(zero.rows[0].norm_ad0, Some(0.0));
        assert!(matches!(
            norm_sweep(
                &[SweepLevel {
                    d0,
                    a: Some(DenseMatrix::identity(n + 1))
                }],
                1.0
            ),
            Err(MeshError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn parse_round_trip_and_errors() {
        let mesh = outlet_square(2);
        let text = mesh.to_text();
        assert_eq!(TriMesh::parse(&text).unwrap(), mesh);
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        lines[3] = "0.5 0.0 q".into();
        assert!(matches!(
            TriMesh::parse(&lines.join("\n")),
            Err(MeshError::Parse { line: 4, .. })
        ));
        lines[3] = "0.5 0.0 n".into();
        assert!(matches!(
            TriMesh::parse(&lines.join("\n")),
            Err(MeshError::Parse { line: 4, .. })
        ));
        assert!(matches!(
            TriMesh::parse("3 1\n0 0 d\n1 0 d\n0 1 d\n0 2 1\n"),
            Err(MeshError::InvalidMesh(_))
        ));
        assert!(matches!(
            TriMesh::parse("3 1\n0 0 d\n1 0 d\n"),
            Err(MeshError::Parse { line: 4, .. })
        ));
        let ok = TriMesh::parse("# tri\n3 1\n0 0 d\n1 0 d # corner\n0 1 d\n\n0 1 2\n").unwrap();
        assert_eq!(ok.triangles, vec![[0, 1, 2]]);
    }

    #[test]
    fn interior_tagged_boundary_is_rejected() {
        let res = TriMesh::unit_square(2, |x, y| {
            if x == 0.5 && y == 0.5 {
                VertexTag::Dirichlet
            } else {
                VertexTag::Interior
            }
        });
        assert!(matches!(res, Err(MeshError::InvalidMesh(_))));
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let a = grid_laplacian(3);
        for i in 0..a.rows() {
            assert_eq!(a.row(i).iter().sum::<f64>(), 0.0);
        }
        assert!(a.is_symmetric(&linalg::NumericSettings::DEFAULT));
    }
}
