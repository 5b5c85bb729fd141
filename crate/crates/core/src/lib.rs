//! Numerical periodic homogenization for nonlinear monotone elliptic operators.
//!
//! The crate is `no_std` (it needs `alloc`). It covers the whole pipeline:
//!
//! * [`operator`]: admissible flux maps `a(x, y, ξ)` and their structural audit,
//! * [`mesh`]: structured periodic/Dirichlet meshes, FE fields and the ε-lattice cover,
//! * [`solver`]: a preconditioned Zarantonello iteration for strongly monotone problems,
//! * [`cell`]: periodic cell problems and the effective flux `b(x, ξ)`,
//! * [`homogenized`]: memoized/tabulated `b` and the audit of its properties,
//! * [`fine`] and [`macroscale`]: the oscillatory and the homogenized Dirichlet problems,
//! * [`corrector`]: cell averaging, step anchors and corrected gradients.
//!
//! File formats, configuration and the command line live in the `monoscale` crate.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod cell;
pub mod corrector;
pub mod error;
pub mod fine;
pub mod geometry;
pub mod homogenized;
pub mod load;
pub mod macroscale;
pub mod mesh;
pub mod operator;
pub mod sampling;
pub mod solver;

pub use cell::{average_flux, oracle_cell_1d, solve_cell, CellSite, CellSolution};
pub use corrector::{
    apply_mh, apply_mh_sampled, build_corrector, build_gamma, corrector_error, corrector_keys,
    AnchorMode, CorrectorErrors, CorrectorField, CorrectorPiece, PieceKey, StepField, StepMap,
};
pub use error::{Condition, Error, Result};
pub use fine::{check_epsilon, resolution_check, solve_oscillatory, DEFAULT_MIN_CELLS_PER_PERIOD};
pub use geometry::{BoxDomain, Vec2};
pub use homogenized::{
    audit_properties, build_table, quantize, table_knots, table_probe_points, AuditPlan,
    AuditSamples, CacheRow, HomogenizedMap, PropertyAuditReport, XKey,
};
pub use load::Load;
pub use macroscale::solve_homogenized;
pub use mesh::{
    build_cell_cover, build_cell_cover_with_parts, build_cell_mesh, l2_norm_gradient_diff,
    l2_norm_gradient_diff_sampled, AnchorRule, Boundary, CellCover, FEField, GradientSampler, Mesh,
};
pub use operator::{
    eval_a, freeze_x, uniform_partition, validate_structure, CellProfile, Family, FreezeCell,
    Modulation, ModulusSpec, MonotoneMapSpec, Part, StructureAuditReport, XStructure,
};
pub use solver::{
    assemble_residual, solve_affine, solve_linear_spd, solve_monotone, solve_monotone_from,
    DiscreteProblem, FluxMap, SolveOptions, SolveStats,
};
