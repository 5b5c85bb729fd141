//! The oscillatory Dirichlet problem `-div a(x, x/ε, Du_ε) = f`.

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::load::Load;
use crate::mesh::{Boundary, FEField, Mesh};
use crate::operator::MonotoneMapSpec;
use crate::solver::{solve_affine, solve_monotone, DiscreteProblem, SolveOptions, SolveStats};

pub const DEFAULT_MIN_CELLS_PER_PERIOD: usize = 8;

/// `Ok` iff every period `ε` spans at least `min_cells_per_period` elements.
pub fn resolution_check(mesh: &Mesh, epsilon: f64, min_cells_per_period: usize) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let h = mesh.max_h();
    let cells = epsilon / h;
    if cells + 1e-9 < min_cells_per_period as f64 {
        let side = (0..mesh.dim)
            .map(|a| mesh.domain.side(a))
            .fold(0.0, f64::max);
        let need = libm::ceil(side * min_cells_per_period as f64 / epsilon - 1e-9) as usize;
        return Err(Error::UnderResolved {
            epsilon,
            cells_per_period: cells,
            required: min_cells_per_period,
            required_n_per_side: need,
        });
    }
    Ok(())
}

/// Checks that `1/ε` is an integer.
pub fn check_epsilon(epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon < 1.0 && epsilon.is_finite()) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let k = libm::round(1.0 / epsilon);
    if libm::fabs(k * epsilon - 1.0) > 1e-9 {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    Ok(k as usize)
}

/// Solves for `u_ε` on a Dirichlet mesh, sampling `a(x, x/ε, ·)` at the Gauss points.
pub fn solve_oscillatory(
    spec: &MonotoneMapSpec,
    epsilon: f64,
    mesh: &Mesh,
    load: &Load,
    opts: &SolveOptions,
    min_cells_per_period: usize,
) -> Result<(FEField, SolveStats)> {
    spec.validate()?;
    check_epsilon(epsilon)?;
    if mesh.boundary != Boundary::Dirichlet || mesh.dim != spec.dim {
        return Err(Error::InvalidMesh(
            "the oscillatory problem needs a Dirichlet mesh of the spec's dimension".into(),
        ));
    }
    if !load.is_finite() {
        return Err(Error::NonFinite("load"));
    }
    resolution_check(mesh, epsilon, min_cells_per_period)?;
    let inv = 1.0 / epsilon;
    let flux = |x: Vec2, g: Vec2| spec.flux(x, [x[0] * inv, x[1] * inv], g);
    let problem = DiscreteProblem {
        mesh: *mesh,
        flux: &flux,
        load: load.assemble(mesh),
        alpha: spec.alpha,
        beta: spec.beta,
    };
    if opts.affine_shortcut && spec.family.is_linear() {
        solve_affine(&problem, opts)
    } else {
        solve_monotone(&problem, opts)
    }
}
