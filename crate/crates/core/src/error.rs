use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

use crate::solver::SolveStats;

pub type Result<T> = core::result::Result<T, Error>;

/// Structural condition on a flux map that a sampled audit can falsify.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Condition {
    Ordering,
    Monotonicity,
    Lipschitz,
    ZeroFlux,
    Modulus,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::Ordering => "0 < alpha <= beta",
            Condition::Monotonicity => "strong monotonicity",
            Condition::Lipschitz => "Lipschitz continuity",
            Condition::ZeroFlux => "a(x, y, 0) = 0",
            Condition::Modulus => "x-continuity modulus",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    NonFinite(&'static str),
    InvalidSpec(String),
    Structural {
        condition: Condition,
        observed: f64,
        declared: f64,
    },
    InvalidMesh(String),
    MeshMismatch,
    AnchorOutsideCell {
        cell: usize,
    },
    PointOutsideParts {
        x: [f64; 2],
    },
    InvalidCover(String),
    InvalidOptions(String),
    NonConvergence {
        stats: Box<SolveStats>,
    },
    CgNotConverged {
        iterations: usize,
        relative_residual: f64,
    },
    SingularPreconditioner,
    UnderResolved {
        epsilon: f64,
        cells_per_period: f64,
        required: usize,
        required_n_per_side: usize,
    },
    InvalidEpsilon(f64),
    Bracketing {
        xi: f64,
    },
    InvalidGrid(String),
    OutOfTableRange {
        axis: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
    MissingTableKey(String),
    UnauditedMap,
    CellSolve {
        cell: usize,
        source: Box<Error>,
    },
    Misaligned(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NonFinite(what) => write!(f, "non-finite {what}"),
            Error::InvalidSpec(msg) => write!(f, "invalid operator spec: {msg}"),
            Error::Structural {
                condition,
                observed,
                declared,
            } => write!(
                f,
                "structural failure ({condition}): observed {observed:e}, declared {declared:e}"
            ),
            Error::InvalidMesh(msg) => write!(f, "invalid mesh: {msg}"),
            Error::MeshMismatch => f.write_str("fields live on different meshes"),
            Error::AnchorOutsideCell { cell } => {
                write!(f, "anchor of partition cell {cell} lies outside the cell")
            }
            Error::PointOutsideParts { x } => {
                write!(f, "point ({}, {}) is not covered by any part", x[0], x[1])
            }
            Error::InvalidCover(msg) => write!(f, "invalid cell cover: {msg}"),
            Error::InvalidOptions(msg) => write!(f, "invalid solver options: {msg}"),
            Error::NonConvergence { stats } => write!(
                f,
                "outer iteration did not converge after {} iterations (residual {:e})",
                stats.iterations, stats.residual
            ),
            Error::CgNotConverged {
                iterations,
                relative_residual,
            } => write!(
                f,
                "conjugate gradient stopped after {iterations} iterations at relative residual {relative_residual:e}"
            ),
            Error::SingularPreconditioner => {
                f.write_str("preconditioner is singular on the constraint set")
            }
            Error::UnderResolved {
                epsilon,
                cells_per_period,
                required,
                required_n_per_side,
            } => write!(
                f,
                "mesh under-resolves epsilon = {epsilon}: {cells_per_period:.3} elements per period, \
                 {required} required (use n_per_side >= {required_n_per_side})"
            ),
            Error::InvalidEpsilon(eps) => write!(f, "invalid epsilon {eps}"),
            Error::Bracketing { xi } => write!(f, "oracle could not bracket the flux for xi = {xi}"),
            Error::InvalidGrid(msg) => write!(f, "invalid table grid: {msg}"),
            Error::OutOfTableRange { axis, value, lo, hi } => write!(
                f,
                "xi component {axis} = {value} outside table range [{lo}, {hi}]"
            ),
            Error::MissingTableKey(key) => write!(f, "no table for x key {key}"),
            Error::UnauditedMap => {
                f.write_str("homogenized map has not passed its property audit")
            }
            Error::CellSolve { cell, source } => write!(f, "cell {cell}: {source}"),
            Error::Misaligned(msg) => write!(f, "mesh/lattice misalignment: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
