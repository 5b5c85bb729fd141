//! The homogenized Dirichlet problem `-div b(x, Du) = f`.

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::homogenized::HomogenizedMap;
use crate::load::Load;
use crate::mesh::{Boundary, FEField, Mesh};
use crate::solver::{solve_affine, solve_monotone, DiscreteProblem, SolveOptions, SolveStats};

/// Solves with `b` as the flux. The iteration uses the constants of `b`:
/// monotonicity `α` and Lipschitz `β²/α`, so the default step is `α / (β²/α)²`.
///
/// Linear direct-mode maps are solved by conjugate gradients when
/// `opts.affine_shortcut` is set; tables are only valid inside their range,
/// so they always use the monotone iteration.
///
/// Maps that have not passed [`audit_properties`](crate::audit_properties)
/// are rejected unless `allow_unaudited` is set.
pub fn solve_homogenized(
    map: &HomogenizedMap,
    mesh: &Mesh,
    load: &Load,
    opts: &SolveOptions,
    allow_unaudited: bool,
) -> Result<(FEField, SolveStats)> {
    if !allow_unaudited && !map.is_audited() {
        return Err(Error::UnauditedMap);
    }
    if mesh.boundary != Boundary::Dirichlet || mesh.dim != map.dim() {
        return Err(Error::InvalidMesh(
            "the homogenized problem needs a Dirichlet mesh of the map's dimension".into(),
        ));
    }
    if !load.is_finite() {
        return Err(Error::NonFinite("load"));
    }
    let flux = |x: Vec2, g: Vec2| map.eval_b(x, g);
    let problem = DiscreteProblem {
        mesh: *mesh,
        flux: &flux,
        load: load.assemble(mesh),
        alpha: map.alpha(),
        beta: map.lipschitz(),
    };
    if opts.affine_shortcut && map.spec().family.is_linear() && !map.is_table() {
        solve_affine(&problem, opts)
    } else {
        solve_monotone(&problem, opts)
    }
}
