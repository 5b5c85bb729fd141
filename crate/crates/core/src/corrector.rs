//! Cell averaging `M_h`, the step map `γ_h` and corrected gradients `P_h`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::cell::CellSolution;
use crate::error::{Error, Result};
use crate::geometry::{self, BoxDomain, Vec2, ZERO};
use crate::homogenized::{HomogenizedMap, XKey};
use crate::mesh::{CellCover, FEField, GradientSampler, GAUSS_1D};
use crate::operator::XStructure;

/// Piecewise-constant field with one value per interior cell, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct StepField {
    pub cover: CellCover,
    pub values: Vec<Vec2>,
}

impl StepField {
    pub fn new(cover: CellCover, values: Vec<Vec2>) -> Result<Self> {
        if values.len() != cover.len() {
            return Err(Error::InvalidCover(format!(
                "{} values for {} cells",
                values.len(),
                cover.len()
            )));
        }
        Ok(StepField { cover, values })
    }

    pub fn eval(&self, x: Vec2) -> Vec2 {
        self.cover.cell_of(x).map_or(ZERO, |j| self.values[j])
    }

    /// `‖M_h g‖_{L²}` (over the interior cells).
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| geometry::norm_sq(*v)).sum();
        libm::sqrt(s * self.cover.cell_measure())
    }
}

impl GradientSampler for StepField {
    fn gradient(&self, x: Vec2) -> Vec2 {
        self.eval(x)
    }
}

/// Cell averages of `Du`, exact: elements are cut at the lattice lines.
pub fn apply_mh(u: &FEField, cover: &CellCover) -> Result<StepField> {
    if u.mesh.dim != cover.dim() {
        return Err(Error::MeshMismatch);
    }
    let mut sums = vec![ZERO; cover.len()];
    u.mesh
        .for_each_quadrature_point(Some(cover.epsilon), |e, x, w| {
            if let Some(j) = cover.cell_of(x) {
                let g = u.gradient_in_element(e, x);
                sums[j][0] += w * g[0];
                sums[j][1] += w * g[1];
            }
        });
    let m = cover.cell_measure();
    StepField::new(
        cover.clone(),
        sums.into_iter()
            .map(|s| geometry::scale(1.0 / m, s))
            .collect(),
    )
}

fn for_each_sub_point<F: FnMut(Vec2, f64)>(cell: &BoxDomain, n_sub: usize, mut visit: F) {
    let n_sub = n_sub.max(1);
    let dim = cell.dim;
    let ny = if dim == 2 { n_sub } else { 1 };
    let hx = cell.side(0) / n_sub as f64;
    let hy = if dim == 2 {
        cell.side(1) / n_sub as f64
    } else {
        0.0
    };
    for b in 0..ny {
        for a in 0..n_sub {
            let x0 = cell.lo[0] + a as f64 * hx;
            if dim == 1 {
                for g in GAUSS_1D {
                    visit([x0 + g * hx, 0.0], 0.5 * hx);
                }
            } else {
                let y0 = cell.lo[1] + b as f64 * hy;
                for gy in GAUSS_1D {
                    for gx in GAUSS_1D {
                        visit([x0 + gx * hx, y0 + gy * hy], 0.25 * hx * hy);
                    }
                }
            }
        }
    }
}

/// Cell averages of a sampled gradient with `n_sub` Gauss sub-boxes per side.
pub fn apply_mh_sampled<G: GradientSampler + ?Sized>(
    g: &G,
    cover: &CellCover,
    n_sub: usize,
) -> StepField {
    let m = cover.cell_measure();
    let values = (0..cover.len())
        .map(|j| {
            let mut s = ZERO;
            for_each_sub_point(&cover.cell_box(j), n_sub, |x, w| {
                let v = g.gradient(x);
                s[0] += w * v[0];
                s[1] += w * v[1];
            });
            geometry::scale(1.0 / m, s)
        })
        .collect();
    StepField {
        cover: cover.clone(),
        values,
    }
}

/// `γ_h`: maps points of an interior cell to its anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMap {
    pub cover: CellCover,
}

impl StepMap {
    pub fn eval(&self, x: Vec2) -> Option<Vec2> {
        self.cover.cell_of(x).map(|j| self.cover.interior[j].anchor)
    }
}

pub fn build_gamma(cover: &CellCover) -> StepMap {
    StepMap {
        cover: cover.clone(),
    }
}

/// Where the corrector of a cell freezes `x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AnchorMode {
    /// At the cell anchor `γ_h`.
    #[default]
    Gamma,
    /// At a fixed point of each part (its centroid); cells straddling parts
    /// carry one solution per part.
    PartAnchor,
}

#[derive(Debug, Clone)]
pub struct CorrectorPiece {
    /// Cover part this piece applies to (`None`: the whole cell).
    pub part: Option<usize>,
    pub key: XKey,
    pub solution: Arc<CellSolution>,
}

/// `P_h(x) = ξ^j + D_y v(x/ε)` on interior cells, zero elsewhere.
#[derive(Debug, Clone)]
pub struct CorrectorField {
    pub cover: CellCover,
    /// Per interior cell, the pieces of the cell.
    pub cells: Vec<Vec<CorrectorPiece>>,
    /// Elements per side of the cell mesh.
    pub cell_resolution: usize,
}

fn part_key(map: &HomogenizedMap, cover: &CellCover, i: usize) -> Result<XKey> {
    let spec = map.spec();
    if let XStructure::Piecewise { parts } = &spec.x_structure {
        if parts.len() == cover.parts.len() {
            return Ok(XKey::Part(i));
        }
    }
    map.key_of(cover.parts[i].centroid())
}

/// `(part, key)` of one corrector piece.
pub type PieceKey = (Option<usize>, XKey);

/// Pieces `(part, key)` needed for every interior cell.
pub fn corrector_keys(
    map: &HomogenizedMap,
    cover: &CellCover,
    mode: AnchorMode,
) -> Result<Vec<Vec<PieceKey>>> {
    let tol = 1e-9 * cover.epsilon;
    (0..cover.len())
        .map(|j| {
            let cell = &cover.interior[j];
            let wrap = |e: Error| Error::CellSolve {
                cell: j,
                source: alloc::boxed::Box::new(e),
            };
            match mode {
                AnchorMode::Gamma => Ok(vec![(None, map.key_of(cell.anchor).map_err(wrap)?)]),
                AnchorMode::PartAnchor => {
                    if let Some(i) = cell.part {
                        return Ok(vec![(None, part_key(map, cover, i).map_err(wrap)?)]);
                    }
                    let bx = cover.cell_box(j);
                    let mut out = Vec::new();
                    for (i, p) in cover.parts.iter().enumerate() {
                        if p.overlaps(&bx, tol) {
                            out.push((Some(i), part_key(map, cover, i).map_err(wrap)?));
                        }
                    }
                    if out.is_empty() {
                        return Err(wrap(Error::PointOutsideParts { x: cell.anchor }));
                    }
                    Ok(out)
                }
            }
        })
        .collect()
}

/// Solves (or fetches from the map's cache) the cell problem of every interior cell.
pub fn build_corrector(
    map: &HomogenizedMap,
    step: &StepField,
    mode: AnchorMode,
) -> Result<CorrectorField> {
    let cover = &step.cover;
    if cover.dim() != map.dim() {
        return Err(Error::MeshMismatch);
    }
    let keys = corrector_keys(map, cover, mode)?;
    let mut cells = Vec::with_capacity(cover.len());
    for (j, pieces) in keys.into_iter().enumerate() {
        let xi = step.values[j];
        let mut out = Vec::with_capacity(pieces.len());
        for (part, key) in pieces {
            let solution = map.cell_solution(key, xi).map_err(|e| Error::CellSolve {
                cell: j,
                source: alloc::boxed::Box::new(e),
            })?;
            out.push(CorrectorPiece {
                part,
                key,
                solution,
            });
        }
        cells.push(out);
    }
    Ok(CorrectorField {
        cover: cover.clone(),
        cells,
        cell_resolution: map.cell_mesh().n,
    })
}

impl CorrectorField {
    fn piece(&self, j: usize, x: Vec2) -> &CorrectorPiece {
        let pieces = &self.cells[j];
        if pieces.len() > 1 {
            let tol = 1e-12 * self.cover.epsilon;
            if let Some(p) = pieces
                .iter()
                .find(|p| p.part.is_some_and(|i| self.cover.parts[i].contains(x, tol)))
            {
                return p;
            }
        }
        &pieces[0]
    }

    pub fn eval(&self, x: Vec2) -> Vec2 {
        match self.cover.cell_of(x) {
            None => ZERO,
            Some(j) => {
                let inv = 1.0 / self.cover.epsilon;
                let y = [geometry::frac(x[0] * inv), geometry::frac(x[1] * inv)];
                self.piece(j, x).solution.corrected_gradient(y)
            }
        }
    }

    /// Lattice spacing of the scaled cell mesh, `ε / n_cell`.
    pub fn fine_spacing(&self) -> f64 {
        self.cover.epsilon / self.cell_resolution as f64
    }

    /// `∫_{Y^j} |P_h|^2 dx`, exact on the scaled cell mesh.
    pub fn cell_energy(&self, j: usize) -> f64 {
        let mut s = 0.0;
        for_each_sub_point(&self.cover.cell_box(j), self.cell_resolution, |x, w| {
            s += w * geometry::norm_sq(self.eval(x));
        });
        s
    }

    /// Mean gradient `ξ^j` of cell `j`.
    pub fn cell_xi(&self, j: usize) -> Vec2 {
        self.cells[j][0].solution.xi
    }
}

impl GradientSampler for CorrectorField {
    fn gradient(&self, x: Vec2) -> Vec2 {
        self.eval(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorrectorErrors {
    /// `‖Du_ε - Du‖_{L²(Ω)}`.
    pub e_plain: f64,
    /// `‖Du_ε - P_h‖_{L²(Ω)}`.
    pub e_corr: f64,
    /// `‖Du_ε‖_{L²}` outside the interior cells.
    pub e_outside: f64,
}

/// Gradient errors of the fine solution against the homogenized one and the corrector.
///
/// With `split` the elements are cut at the lines of the scaled cell mesh so
/// the quadrature is exact. Without it the macro mesh must nest in that lattice.
pub fn corrector_error(
    u_fine: &FEField,
    u_hom: &FEField,
    p: &CorrectorField,
    split: bool,
) -> Result<CorrectorErrors> {
    if u_fine.mesh != u_hom.mesh {
        return Err(Error::MeshMismatch);
    }
    let mesh = &u_fine.mesh;
    if mesh.dim != p.cover.dim() {
        return Err(Error::MeshMismatch);
    }
    let delta = p.fine_spacing();
    if !split {
        let h = mesh.h();
        for a in 0..mesh.dim {
            let r = delta / h[a];
            let o = mesh.domain.lo[a] / h[a];
            if r < 1.0 - 1e-9
                || libm::fabs(r - libm::round(r)) > 1e-9 * r
                || libm::fabs(o - libm::round(o)) > 1e-9 * o.abs().max(1.0)
            {
                return Err(Error::Misaligned(format!(
                    "element size {} does not divide the cell-mesh spacing {delta}",
                    h[a]
                )));
            }
        }
    }
    let (mut plain, mut corr, mut outside) = (0.0, 0.0, 0.0);
    mesh.for_each_quadrature_point(if split { Some(delta) } else { None }, |e, x, w| {
        let g = u_fine.gradient_in_element(e, x);
        let gu = u_hom.gradient_in_element(e, x);
        plain += w * geometry::norm_sq(geometry::sub(g, gu));
        match p.cover.cell_of(x) {
            Some(_) => corr += w * geometry::norm_sq(geometry::sub(g, p.eval(x))),
            None => {
                let n = geometry::norm_sq(g);
                corr += w * n;
                outside += w * n;
            }
        }
    });
    Ok(CorrectorErrors {
        e_plain: libm::sqrt(plain),
        e_corr: libm::sqrt(corr),
        e_outside: libm::sqrt(outside),
    })
}
