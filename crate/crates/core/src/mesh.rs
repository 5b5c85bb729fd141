//! Structured meshes, finite-element fields and the ε-lattice cover.
//!
//! Elements are P1 segments in 1D and Q1 bilinear quadrilaterals in 2D on a
//! uniform grid. Cell meshes identify opposite faces of `Y = (0, 1)^n`; macro
//! meshes carry homogeneous Dirichlet conditions on the whole boundary.
//! All integrals use the 2-point Gauss rule per direction.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{self, BoxDomain, Vec2, ZERO};

const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9; // 1 / (2 sqrt 3)

/// Gauss abscissae on `[0, 1]`.
pub const GAUSS_1D: [f64; 2] = [0.5 - GAUSS_OFFSET, 0.5 + GAUSS_OFFSET];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Boundary {
    /// Opposite faces identified (cell problems).
    Periodic,
    /// Zero values on the boundary (macro problems).
    Dirichlet,
}

/// Uniform structured mesh with `n` elements per side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    pub dim: usize,
    pub n: usize,
    pub domain: BoxDomain,
    pub boundary: Boundary,
}

/// Builds the periodic mesh of the unit cell.
pub fn build_cell_mesh(dim: usize, n_per_side: usize) -> Result<Mesh> {
    Mesh::new(BoxDomain::unit(dim), n_per_side, Boundary::Periodic)
}

/// Shape functions and their physical gradients at the Gauss points of one element.
#[derive(Debug, Clone, Copy)]
pub struct ElementBasis {
    pub nloc: usize,
    pub nq: usize,
    /// Local coordinates of the quadrature points.
    pub points: [Vec2; 4],
    /// Quadrature weights including the element volume.
    pub weights: [f64; 4],
    pub values: [[f64; 4]; 4],
    pub grads: [[Vec2; 4]; 4],
}

impl Mesh {
    pub fn new(domain: BoxDomain, n: usize, boundary: Boundary) -> Result<Mesh> {
        domain.validate()?;
        if n < 2 {
            return Err(Error::InvalidMesh(format!(
                "n_per_side must be at least 2, got {n}"
            )));
        }
        Ok(Mesh {
            dim: domain.dim,
            n,
            domain,
            boundary,
        })
    }

    /// Dirichlet mesh of a macroscopic box.
    pub fn macro_mesh(domain: BoxDomain, n: usize) -> Result<Mesh> {
        Mesh::new(domain, n, Boundary::Dirichlet)
    }

    pub fn nodes_per_side(&self) -> usize {
        match self.boundary {
            Boundary::Periodic => self.n,
            Boundary::Dirichlet => self.n + 1,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes_per_side().pow(self.dim as u32)
    }

    pub fn num_elements(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn h(&self) -> Vec2 {
        let mut h = ZERO;
        for (a, v) in h.iter_mut().enumerate().take(self.dim) {
            *v = self.domain.side(a) / self.n as f64;
        }
        h
    }

    pub fn max_h(&self) -> f64 {
        let h = self.h();
        h[0].max(h[1])
    }

    pub fn element_volume(&self) -> f64 {
        let h = self.h();
        if self.dim == 1 {
            h[0]
        } else {
            h[0] * h[1]
        }
    }

    /// Storage index of grid node `(i, j)`, `0 <= i, j <= n`. This is the
    /// periodic identification map for cell meshes.
    #[inline]
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        match self.boundary {
            Boundary::Periodic => (i % self.n) + self.n * (j % self.n),
            Boundary::Dirichlet => i + (self.n + 1) * j,
        }
    }

    fn node_grid(&self, idx: usize) -> (usize, usize) {
        let m = self.nodes_per_side();
        (idx % m, idx / m)
    }

    pub fn node_coords(&self, idx: usize) -> Vec2 {
        let (i, j) = self.node_grid(idx);
        let h = self.h();
        let mut x = self.domain.lo;
        x[0] += i as f64 * h[0];
        if self.dim == 2 {
            x[1] += j as f64 * h[1];
        }
        x
    }

    /// True for Dirichlet boundary nodes.
    pub fn is_constrained(&self, idx: usize) -> bool {
        if self.boundary == Boundary::Periodic {
            return false;
        }
        let (i, j) = self.node_grid(idx);
        let n = self.n;
        i == 0 || i == n || (self.dim == 2 && (j == 0 || j == n))
    }

    #[inline]
    pub fn element_grid(&self, e: usize) -> (usize, usize) {
        (e % self.n, e / self.n)
    }

    /// Node indices of element `e`, in local order (0,0), (1,0), (0,1), (1,1).
    #[inline]
    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        let (i, j) = self.element_grid(e);
        if self.dim == 1 {
            [self.node_index(i, 0), self.node_index(i + 1, 0), 0, 0]
        } else {
            [
                self.node_index(i, j),
                self.node_index(i + 1, j),
                self.node_index(i, j + 1),
                self.node_index(i + 1, j + 1),
            ]
        }
    }

    pub fn element_origin(&self, e: usize) -> Vec2 {
        let (i, j) = self.element_grid(e);
        let h = self.h();
        let mut x = self.domain.lo;
        x[0] += i as f64 * h[0];
        if self.dim == 2 {
            x[1] += j as f64 * h[1];
        }
        x
    }

    pub fn element_box(&self, e: usize) -> BoxDomain {
        let lo = self.element_origin(e);
        let h = self.h();
        BoxDomain {
            dim: self.dim,
            lo,
            hi: geometry::add(lo, h),
        }
    }

    /// Element containing `x` and the local coordinates of `x` in it.
    /// Points are reduced modulo the cell on periodic meshes and clamped onto
    /// the domain otherwise.
    pub fn locate(&self, x: Vec2) -> (usize, Vec2) {
        let h = self.h();
        let mut idx = [0usize; 2];
        let mut local = ZERO;
        for a in 0..self.dim {
            let mut t = (x[a] - self.domain.lo[a]) / h[a];
            if self.boundary == Boundary::Periodic {
                t = geometry::frac(t / self.n as f64) * self.n as f64;
            }
            let k = libm::floor(t).clamp(0.0, (self.n - 1) as f64);
            idx[a] = k as usize;
            local[a] = (t - k).clamp(0.0, 1.0);
        }
        (idx[0] + self.n * idx[1], local)
    }

    /// Shape values and gradients at arbitrary local coordinates.
    #[inline]
    pub fn shape(&self, local: Vec2) -> ([f64; 4], [Vec2; 4]) {
        let h = self.h();
        let (s, t) = (local[0], local[1]);
        if self.dim == 1 {
            (
                [1.0 - s, s, 0.0, 0.0],
                [[-1.0 / h[0], 0.0], [1.0 / h[0], 0.0], ZERO, ZERO],
            )
        } else {
            (
                [(1.0 - s) * (1.0 - t), s * (1.0 - t), (1.0 - s) * t, s * t],
                [
                    [-(1.0 - t) / h[0], -(1.0 - s) / h[1]],
                    [(1.0 - t) / h[0], -s / h[1]],
                    [-t / h[0], (1.0 - s) / h[1]],
                    [t / h[0], s / h[1]],
                ],
            )
        }
    }

    /// The (identical) basis of every element at its Gauss points.
    pub fn basis(&self) -> ElementBasis {
        let vol = self.element_volume();
        let mut b = ElementBasis {
            nloc: 1 << self.dim,
            nq: 1 << self.dim,
            points: [ZERO; 4],
            weights: [0.0; 4],
            values: [[0.0; 4]; 4],
            grads: [[ZERO; 4]; 4],
        };
        let w = if self.dim == 1 { 0.5 } else { 0.25 };
        for q in 0..b.nq {
            let local = if self.dim == 1 {
                [GAUSS_1D[q], 0.0]
            } else {
                [GAUSS_1D[q % 2], GAUSS_1D[q / 2]]
            };
            let (v, g) = self.shape(local);
            b.points[q] = local;
            b.weights[q] = w * vol;
            b.values[q] = v;
            b.grads[q] = g;
        }
        b
    }

    /// Physical coordinates of local point `local` in element `e`.
    #[inline]
    pub fn to_physical(&self, e: usize, local: Vec2) -> Vec2 {
        let o = self.element_origin(e);
        let h = self.h();
        [o[0] + local[0] * h[0], o[1] + local[1] * h[1]]
    }

    /// Visits every quadrature point `(element, x, weight)`.
    ///
    /// With `split = Some(δ)` each element is cut at the lines `x_a = k δ`
    /// that cross it and the Gauss rule is applied on every sub-box, so that
    /// integrands which are polynomial between those lines stay exact.
    pub fn for_each_quadrature_point<F: FnMut(usize, Vec2, f64)>(
        &self,
        split: Option<f64>,
        mut visit: F,
    ) {
        let h = self.h();
        let mut cuts: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for e in 0..self.num_elements() {
            let o = self.element_origin(e);
            for a in 0..2 {
                cuts[a].clear();
                if a >= self.dim {
                    cuts[a].push(0.0);
                    cuts[a].push(0.0);
                    continue;
                }
                let (x0, x1) = (o[a], o[a] + h[a]);
                cuts[a].push(x0);
                if let Some(d) = split {
                    let tol = 1e-9 * h[a];
                    let mut k = libm::ceil((x0 + tol) / d);
                    while k * d < x1 - tol {
                        cuts[a].push(k * d);
                        k += 1.0;
                    }
                }
                cuts[a].push(x1);
            }
            for sy in 0..cuts[1].len() - 1 {
                let (y0, y1) = (cuts[1][sy], cuts[1][sy + 1]);
                for sx in 0..cuts[0].len() - 1 {
                    let (x0, x1) = (cuts[0][sx], cuts[0][sx + 1]);
                    if self.dim == 1 {
                        let len = x1 - x0;
                        for g in GAUSS_1D {
                            visit(e, [x0 + g * len, 0.0], 0.5 * len);
                        }
                    } else {
                        let (lx, ly) = (x1 - x0, y1 - y0);
                        for gy in GAUSS_1D {
                            for gx in GAUSS_1D {
                                visit(e, [x0 + gx * lx, y0 + gy * ly], 0.25 * lx * ly);
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Scalar continuous piecewise-(bi)linear field with one coefficient per node.
#[derive(Debug, Clone, PartialEq)]
pub struct FEField {
    pub mesh: Mesh,
    pub coeffs: Vec<f64>,
}

/// Anything that can report a gradient at a point of the domain.
pub trait GradientSampler {
    fn gradient(&self, x: Vec2) -> Vec2;
}

impl<F: Fn(Vec2) -> Vec2> GradientSampler for F {
    fn gradient(&self, x: Vec2) -> Vec2 {
        self(x)
    }
}

impl GradientSampler for FEField {
    fn gradient(&self, x: Vec2) -> Vec2 {
        self.gradient_at(x)
    }
}

impl FEField {
    pub fn zeros(mesh: Mesh) -> Self {
        FEField {
            coeffs: vec![0.0; mesh.num_nodes()],
            mesh,
        }
    }

    pub fn from_coeffs(mesh: Mesh, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != mesh.num_nodes() {
            return Err(Error::InvalidMesh(format!(
                "{} coefficients for {} nodes",
                coeffs.len(),
                mesh.num_nodes()
            )));
        }
        Ok(FEField { mesh, coeffs })
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate<F: Fn(Vec2) -> f64>(mesh: Mesh, f: F) -> Self {
        let coeffs = (0..mesh.num_nodes())
            .map(|i| f(mesh.node_coords(i)))
            .collect();
        FEField { mesh, coeffs }
    }

    #[inline]
    pub fn element_gradient(&self, e: usize, grads: &[Vec2; 4], nloc: usize) -> Vec2 {
        let nodes = self.mesh.element_nodes(e);
        let mut g = ZERO;
        for a in 0..nloc {
            let u = self.coeffs[nodes[a]];
            g[0] += u * grads[a][0];
            g[1] += u * grads[a][1];
        }
        g
    }

    /// Gradient at a point of element `e`, given in physical coordinates.
    pub fn gradient_in_element(&self, e: usize, x: Vec2) -> Vec2 {
        let o = self.mesh.element_origin(e);
        let h = self.mesh.h();
        let mut local = ZERO;
        for a in 0..self.mesh.dim {
            local[a] = (x[a] - o[a]) / h[a];
        }
        let (_, g) = self.mesh.shape(local);
        self.element_gradient(e, &g, 1 << self.mesh.dim)
    }

    pub fn gradient_at(&self, x: Vec2) -> Vec2 {
        let (e, local) = self.mesh.locate(x);
        let (_, g) = self.mesh.shape(local);
        self.element_gradient(e, &g, 1 << self.mesh.dim)
    }

    pub fn value_at(&self, x: Vec2) -> f64 {
        let (e, local) = self.mesh.locate(x);
        let (v, _) = self.mesh.shape(local);
        let nodes = self.mesh.element_nodes(e);
        (0..1 << self.mesh.dim)
            .map(|a| v[a] * self.coeffs[nodes[a]])
            .sum()
    }

    /// Mean value over the mesh domain.
    pub fn mean(&self) -> f64 {
        let b = self.mesh.basis();
        let mut s = 0.0;
        for e in 0..self.mesh.num_elements() {
            let nodes = self.mesh.element_nodes(e);
            for q in 0..b.nq {
                let v: f64 = (0..b.nloc)
                    .map(|a| b.values[q][a] * self.coeffs[nodes[a]])
                    .sum();
                s += b.weights[q] * v;
            }
        }
        s / self.mesh.domain.measure()
    }

    /// `(∫ |Du|^2)^{1/2}`.
    pub fn gradient_l2_norm(&self) -> f64 {
        let b = self.mesh.basis();
        let mut s = 0.0;
        for e in 0..self.mesh.num_elements() {
            for q in 0..b.nq {
                let g = self.element_gradient(e, &b.grads[q], b.nloc);
                s += b.weights[q] * geometry::norm_sq(g);
            }
        }
        libm::sqrt(s)
    }

    /// `(∫ |u - v|^2)^{1/2}` for fields on the same mesh.
    pub fn l2_distance(&self, other: &FEField) -> Result<f64> {
        if self.mesh != other.mesh {
            return Err(Error::MeshMismatch);
        }
        let b = self.mesh.basis();
        let mut s = 0.0;
        for e in 0..self.mesh.num_elements() {
            let nodes = self.mesh.element_nodes(e);
            for q in 0..b.nq {
                let d: f64 = (0..b.nloc)
                    .map(|a| b.values[q][a] * (self.coeffs[nodes[a]] - other.coeffs[nodes[a]]))
                    .sum();
                s += b.weights[q] * d * d;
            }
        }
        Ok(libm::sqrt(s))
    }

    /// `(∫ |u - g|^2)^{1/2}` against a function, by element quadrature.
    pub fn l2_distance_to<F: Fn(Vec2) -> f64>(&self, g: F) -> f64 {
        let b = self.mesh.basis();
        let mut s = 0.0;
        for e in 0..self.mesh.num_elements() {
            let nodes = self.mesh.element_nodes(e);
            for q in 0..b.nq {
                let x = self.mesh.to_physical(e, b.points[q]);
                let u: f64 = (0..b.nloc)
                    .map(|a| b.values[q][a] * self.coeffs[nodes[a]])
                    .sum();
                let d = u - g(x);
                s += b.weights[q] * d * d;
            }
        }
        libm::sqrt(s)
    }

    /// Euclidean pairing of coefficient vectors (e.g. with a load vector).
    pub fn pair(&self, dual: &[f64]) -> f64 {
        self.coeffs.iter().zip(dual).map(|(a, b)| a * b).sum()
    }
}

/// `(∫_Ω |Df - Dg|^2 dx)^{1/2}` for two fields on the same mesh.
pub fn l2_norm_gradient_diff(f: &FEField, g: &FEField) -> Result<f64> {
    if f.mesh != g.mesh {
        return Err(Error::MeshMismatch);
    }
    let b = f.mesh.basis();
    let mut s = 0.0;
    for e in 0..f.mesh.num_elements() {
        for q in 0..b.nq {
            let d = geometry::sub(
                f.element_gradient(e, &b.grads[q], b.nloc),
                g.element_gradient(e, &b.grads[q], b.nloc),
            );
            s += b.weights[q] * geometry::norm_sq(d);
        }
    }
    Ok(libm::sqrt(s))
}

/// Same norm with `g` given by a gradient sampler evaluated at the Gauss points.
pub fn l2_norm_gradient_diff_sampled<G: GradientSampler + ?Sized>(f: &FEField, g: &G) -> f64 {
    let mut s = 0.0;
    f.mesh.for_each_quadrature_point(None, |e, x, w| {
        let d = geometry::sub(f.gradient_in_element(e, x), g.gradient(x));
        s += w * geometry::norm_sq(d);
    });
    libm::sqrt(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AnchorRule {
    /// Cell centroid `ε (j + 1/2)`.
    #[default]
    Center,
    /// Lower corner `ε j`.
    Corner,
}

/// Lattice cell `Y^j = ε (j + Y)` lying inside the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverCell {
    pub index: [i64; 2],
    pub anchor: Vec2,
    /// Part whose closure contains the cell, if any.
    pub part: Option<usize>,
}

/// The ε-lattice cover of a box domain with its index sets.
#[derive(Debug, Clone, PartialEq)]
pub struct CellCover {
    pub domain: BoxDomain,
    pub epsilon: f64,
    pub anchor_rule: AnchorRule,
    /// `J_h`: cells whose closure lies in the closed domain.
    pub interior: Vec<CoverCell>,
    /// `B_h^i`: lattice indices of cells overlapping part `i` without lying in it.
    pub boundary: Vec<Vec<[i64; 2]>>,
    pub parts: Vec<BoxDomain>,
    j_lo: [i64; 2],
    j_count: [usize; 2],
    lookup: Vec<Option<usize>>,
}

/// Cover of `domain` with the domain itself as the only part.
pub fn build_cell_cover(domain: &BoxDomain, epsilon: f64, rule: AnchorRule) -> Result<CellCover> {
    build_cell_cover_with_parts(domain, &[*domain], epsilon, rule)
}

/// Cover of `domain` with index sets relative to the boxes `parts`.
pub fn build_cell_cover_with_parts(
    domain: &BoxDomain,
    parts: &[BoxDomain],
    epsilon: f64,
    rule: AnchorRule,
) -> Result<CellCover> {
    domain.validate()?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidCover(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if epsilon >= domain.diameter() {
        return Err(Error::InvalidCover(format!(
            "epsilon {epsilon} is not below the domain diameter"
        )));
    }
    let dim = domain.dim;
    let tol = 1e-9 * epsilon;
    let mut j_lo = [0i64; 2];
    let mut j_count = [1usize; 2];
    for a in 0..dim {
        let lo = libm::floor(domain.lo[a] / epsilon + 1e-9) as i64;
        let hi = libm::ceil(domain.hi[a] / epsilon - 1e-9) as i64;
        j_lo[a] = lo;
        j_count[a] = (hi - lo).max(1) as usize;
    }
    let mut interior = Vec::new();
    let mut boundary = vec![Vec::new(); parts.len()];
    let mut lookup = vec![None; j_count[0] * j_count[1]];
    for b in 0..j_count[1] {
        for a in 0..j_count[0] {
            let index = [
                j_lo[0] + a as i64,
                if dim == 2 { j_lo[1] + b as i64 } else { 0 },
            ];
            let cell = lattice_box(dim, epsilon, index);
            if domain.contains_box(&cell, tol) {
                let anchor = match rule {
                    AnchorRule::Center => cell.centroid(),
                    AnchorRule::Corner => cell.lo,
                };
                let part = parts.iter().position(|p| p.contains_box(&cell, tol));
                lookup[a + j_count[0] * b] = Some(interior.len());
                interior.push(CoverCell {
                    index,
                    anchor,
                    part,
                });
            }
            for (i, p) in parts.iter().enumerate() {
                if p.overlaps(&cell, tol) && !p.contains_box(&cell, tol) {
                    boundary[i].push(index);
                }
            }
        }
    }
    Ok(CellCover {
        domain: *domain,
        epsilon,
        anchor_rule: rule,
        interior,
        boundary,
        parts: parts.to_vec(),
        j_lo,
        j_count,
        lookup,
    })
}

fn lattice_box(dim: usize, epsilon: f64, index: [i64; 2]) -> BoxDomain {
    let mut lo = ZERO;
    let mut hi = ZERO;
    for a in 0..dim {
        lo[a] = epsilon * index[a] as f64;
        hi[a] = epsilon * (index[a] + 1) as f64;
    }
    BoxDomain { dim, lo, hi }
}

impl CellCover {
    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn len(&self) -> usize {
        self.interior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }

    pub fn cell_measure(&self) -> f64 {
        libm::pow(self.epsilon, self.dim() as f64)
    }

    pub fn cell_box(&self, idx: usize) -> BoxDomain {
        lattice_box(self.dim(), self.epsilon, self.interior[idx].index)
    }

    /// Interior cell containing `x` (cells are half-open `[εj, ε(j+1))`).
    pub fn cell_of(&self, x: Vec2) -> Option<usize> {
        let mut off = [0usize; 2];
        for (a, o) in off.iter_mut().enumerate().take(self.dim()) {
            let j = libm::floor(x[a] / self.epsilon) as i64 - self.j_lo[a];
            if j < 0 || j as usize >= self.j_count[a] {
                return None;
            }
            *o = j as usize;
        }
        self.lookup[off[0] + self.j_count[0] * off[1]]
    }

    /// `|∪_{j ∈ J_h} Y^j|`.
    pub fn interior_measure(&self) -> f64 {
        self.len() as f64 * self.cell_measure()
    }

    /// `|F_i^h| = |∪_{j ∈ B_h^i} Y^j|`.
    pub fn boundary_measure(&self, part: usize) -> f64 {
        self.boundary[part].len() as f64 * self.cell_measure()
    }
}
