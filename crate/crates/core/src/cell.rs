//! Periodic cell problems and the effective flux.
//!
//! For a mean gradient `ξ` and a macroscopic site the corrector `v` solves
//! `∫_Y (a(x, y, ξ + Dv), Dφ) dy = 0` over periodic zero-mean functions, and
//! `b(x, ξ) = ∫_Y a(x, y, ξ + Dv) dy`. Both integrals use the same Gauss
//! points, so the discrete `b` keeps the monotonicity and Lipschitz
//! structure of `a`.

use crate::error::{Error, Result};
use crate::geometry::{self, Vec2, ZERO};
use crate::mesh::{Boundary, FEField, Mesh};
use crate::operator::{FrozenMap, MonotoneMapSpec};
use crate::solver::{solve_affine, solve_monotone, DiscreteProblem, SolveOptions, SolveStats};

/// Where the macroscopic variable is frozen for a cell solve.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CellSite {
    Point(Vec2),
    /// Part index of a piecewise spec.
    Part(usize),
}

impl CellSite {
    pub(crate) fn frozen<'a>(&self, spec: &'a MonotoneMapSpec) -> Result<FrozenMap<'a>> {
        match *self {
            CellSite::Point(x) => spec.at_point(x),
            CellSite::Part(i) => spec.at_part(i),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSolution {
    pub xi: Vec2,
    pub site: CellSite,
    /// Periodic zero-mean corrector on the cell mesh.
    pub corrector: FEField,
    pub averaged_flux: Vec2,
    pub stats: SolveStats,
}

impl CellSolution {
    /// `ξ + Dv(y)` for `y` in the unit cell (reduced periodically).
    pub fn corrected_gradient(&self, y: Vec2) -> Vec2 {
        geometry::add(self.xi, self.corrector.gradient_at(y))
    }

    /// `∫_Y |ξ + Dv|^2 dy`.
    pub fn energy(&self) -> f64 {
        self.integrate(|_, g| geometry::norm_sq(geometry::add(self.xi, g)))
    }

    /// `∫_Y |ξ1 + Dv1 - ξ2 - Dv2|^2 dy`.
    pub fn gradient_distance_sq(&self, other: &CellSolution) -> Result<f64> {
        if self.corrector.mesh != other.corrector.mesh {
            return Err(Error::MeshMismatch);
        }
        let d = geometry::sub(self.xi, other.xi);
        Ok(self.integrate_pair(other, |g1, g2| {
            geometry::norm_sq(geometry::add(d, geometry::sub(g1, g2)))
        }))
    }

    /// `∫_Y |Dv1 - Dv2|^2 dy`.
    pub fn corrector_distance_sq(&self, other: &CellSolution) -> Result<f64> {
        if self.corrector.mesh != other.corrector.mesh {
            return Err(Error::MeshMismatch);
        }
        Ok(self.integrate_pair(other, |g1, g2| geometry::norm_sq(geometry::sub(g1, g2))))
    }

    fn integrate<F: Fn(Vec2, Vec2) -> f64>(&self, f: F) -> f64 {
        let mesh = &self.corrector.mesh;
        let b = mesh.basis();
        let mut s = 0.0;
        for e in 0..mesh.num_elements() {
            for q in 0..b.nq {
                let g = self.corrector.element_gradient(e, &b.grads[q], b.nloc);
                s += b.weights[q] * f(mesh.to_physical(e, b.points[q]), g);
            }
        }
        s
    }

    fn integrate_pair<F: Fn(Vec2, Vec2) -> f64>(&self, other: &CellSolution, f: F) -> f64 {
        let mesh = &self.corrector.mesh;
        let b = mesh.basis();
        let mut s = 0.0;
        for e in 0..mesh.num_elements() {
            for q in 0..b.nq {
                let g1 = self.corrector.element_gradient(e, &b.grads[q], b.nloc);
                let g2 = other.corrector.element_gradient(e, &b.grads[q], b.nloc);
                s += b.weights[q] * f(g1, g2);
            }
        }
        s
    }
}

fn check_cell_mesh(spec: &MonotoneMapSpec, mesh: &Mesh) -> Result<()> {
    if mesh.boundary != Boundary::Periodic || mesh.dim != spec.dim {
        return Err(Error::InvalidMesh(
            "cell problems need a periodic mesh of the spec's dimension".into(),
        ));
    }
    Ok(())
}

fn clean_xi(spec: &MonotoneMapSpec, xi: Vec2) -> Result<Vec2> {
    if !geometry::is_finite(xi) {
        return Err(Error::NonFinite("xi"));
    }
    Ok(if spec.dim == 1 { [xi[0], 0.0] } else { xi })
}

/// Solves the cell problem for `ξ` at `site`.
pub fn solve_cell(
    spec: &MonotoneMapSpec,
    site: CellSite,
    xi: Vec2,
    mesh: &Mesh,
    opts: &SolveOptions,
) -> Result<CellSolution> {
    check_cell_mesh(spec, mesh)?;
    let xi = clean_xi(spec, xi)?;
    let frozen = site.frozen(spec)?;
    let flux = move |y: Vec2, g: Vec2| -> Result<Vec2> { Ok(frozen.flux(y, geometry::add(xi, g))) };
    let problem = DiscreteProblem {
        mesh: *mesh,
        flux: &flux,
        load: alloc::vec![0.0; mesh.num_nodes()],
        alpha: spec.alpha,
        beta: spec.beta,
    };
    let (corrector, stats) = if opts.affine_shortcut && spec.family.is_linear() {
        solve_affine(&problem, opts)?
    } else {
        solve_monotone(&problem, opts)?
    };
    let averaged_flux = frozen_average(&frozen, xi, &corrector);
    Ok(CellSolution {
        xi,
        site,
        corrector,
        averaged_flux,
        stats,
    })
}

fn frozen_average(frozen: &FrozenMap<'_>, xi: Vec2, v: &FEField) -> Vec2 {
    let mesh = &v.mesh;
    let b = mesh.basis();
    let mut s = ZERO;
    for e in 0..mesh.num_elements() {
        for q in 0..b.nq {
            let g = v.element_gradient(e, &b.grads[q], b.nloc);
            let y = mesh.to_physical(e, b.points[q]);
            let a = frozen.flux(y, geometry::add(xi, g));
            s[0] += b.weights[q] * a[0];
            s[1] += b.weights[q] * a[1];
        }
    }
    s
}

/// `∫_Y a(x, y, ξ + Dv(y)) dy` with the cell-mesh Gauss rule.
pub fn average_flux(
    spec: &MonotoneMapSpec,
    site: CellSite,
    xi: Vec2,
    v: &FEField,
    mesh: &Mesh,
) -> Result<Vec2> {
    check_cell_mesh(spec, mesh)?;
    if v.mesh != *mesh {
        return Err(Error::MeshMismatch);
    }
    let xi = clean_xi(spec, xi)?;
    let frozen = site.frozen(spec)?;
    Ok(frozen_average(&frozen, xi, v))
}

const BISECTION_TOL: f64 = 1e-12;

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= BISECTION_TOL * libm::fabs(mid).max(1.0) {
            return mid;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Effective flux of a 1D cell by flux constancy.
///
/// In 1D the cell flux is a constant `q` and `ξ = ∫_0^1 a(y, ·)^{-1}(q) dy`.
/// Both the outer solve for `q` and the pointwise inversion use bisection;
/// the integral uses the midpoint rule with `n_quadrature` points.
pub fn oracle_cell_1d(
    spec: &MonotoneMapSpec,
    site: CellSite,
    xi: f64,
    n_quadrature: usize,
) -> Result<f64> {
    if spec.dim != 1 {
        return Err(Error::InvalidSpec(
            "the flux-constancy oracle is 1D only".into(),
        ));
    }
    if !xi.is_finite() {
        return Err(Error::NonFinite("xi"));
    }
    let frozen = site.frozen(spec)?;
    let n = n_quadrature.max(1);
    let alpha = spec.alpha;
    let inverse = |y: f64, q: f64| -> f64 {
        if q == 0.0 {
            return 0.0;
        }
        let r = libm::fabs(q) / alpha * (1.0 + 1e-9) + 1e-300;
        bisect(|g| frozen.flux([y, 0.0], [g, 0.0])[0] - q, -r, r)
    };
    let mean_inverse = |q: f64| -> f64 {
        (0..n)
            .map(|k| inverse((k as f64 + 0.5) / n as f64, q))
            .sum::<f64>()
            / n as f64
    };
    if xi == 0.0 {
        return Ok(0.0);
    }
    let r = spec.beta * libm::fabs(xi) * (1.0 + 1e-9);
    let (lo, hi) = (-r, r);
    if mean_inverse(lo) - xi > 0.0 || mean_inverse(hi) - xi < 0.0 {
        return Err(Error::Bracketing { xi });
    }
    Ok(bisect(|q| mean_inverse(q) - xi, lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_cell_mesh;
    use crate::operator::{CellProfile, Family, Modulation, XStructure};
    use approx::assert_abs_diff_eq;

    fn two_phase() -> MonotoneMapSpec {
        MonotoneMapSpec::new(1, Family::linear(), CellProfile::two_phase(1.0, 3.0))
    }

    fn opts() -> SolveOptions {
        SolveOptions {
            max_outer: 5000,
            ..SolveOptions::default()
        }
    }

    #[test]
    fn homogeneous_medium_has_zero_corrector() {
        let spec = MonotoneMapSpec::new(2, Family::linear(), CellProfile::Constant { value: 1.0 });
        let mesh = build_cell_mesh(2, 8).unwrap();
        let s = solve_cell(
            &spec,
            CellSite::Point([0.5, 0.5]),
            [1.0, -2.0],
            &mesh,
            &opts(),
        )
        .unwrap();
        assert!(s.corrector.coeffs.iter().all(|v| v.abs() < 1e-14));
        assert_abs_diff_eq!(s.averaged_flux[0], 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(s.averaged_flux[1], -2.0, epsilon = 1e-13);
    }

    #[test]
    fn two_phase_harmonic_mean() {
        let mesh = build_cell_mesh(1, 64).unwrap();
        let s = solve_cell(
            &two_phase(),
            CellSite::Point([0.5, 0.0]),
            [2.0, 0.0],
            &mesh,
            &opts(),
        )
        .unwrap();
        assert_abs_diff_eq!(s.averaged_flux[0], 3.0, epsilon = 1e-8);
        assert!(s.corrector.mean().abs() <= 1e-10);
        // energy bound with ξ2 = 0
        let k = two_phase().beta / two_phase().alpha;
        assert!(s.energy() <= k * k * 4.0);
    }

    #[test]
    fn zero_xi_is_trivial() {
        let spec = MonotoneMapSpec::new(
            2,
            Family::NonlinearIsotropic,
            CellProfile::Checkerboard {
                low: 1.0,
                high: 2.0,
            },
        );
        let mesh = build_cell_mesh(2, 8).unwrap();
        let s = solve_cell(&spec, CellSite::Point([0.1, 0.1]), ZERO, &mesh, &opts()).unwrap();
        assert!(s.corrector.coeffs.iter().all(|&v| v == 0.0));
        assert_eq!(s.averaged_flux, ZERO);
    }

    #[test]
    fn average_flux_examples() {
        let spec = two_phase();
        let mesh = build_cell_mesh(1, 16).unwrap();
        let zero = FEField::zeros(mesh);
        let site = CellSite::Point([0.5, 0.0]);
        let a = average_flux(&spec, site, [1.0, 0.0], &zero, &mesh).unwrap();
        assert_abs_diff_eq!(a[0], 2.0, epsilon = 1e-14);
        assert_eq!(average_flux(&spec, site, ZERO, &zero, &mesh).unwrap(), ZERO);
        // exact corrector for ξ = 1: v' = 1.5 / c - 1, i.e. +0.5 then -0.5
        let v = FEField::interpolate(mesh, |y| {
            if y[0] <= 0.5 {
                0.5 * y[0] - 0.125
            } else {
                0.5 * (1.0 - y[0]) - 0.125
            }
        });
        let a = average_flux(&spec, site, [1.0, 0.0], &v, &mesh).unwrap();
        assert_abs_diff_eq!(a[0], 1.5, epsilon = 1e-13);
    }

    #[test]
    fn oracle_examples() {
        let homog = MonotoneMapSpec::new(1, Family::linear(), CellProfile::Constant { value: 2.5 });
        let site = CellSite::Point([0.5, 0.0]);
        for xi in [-3.0, 0.7, 4.0] {
            assert_abs_diff_eq!(
                oracle_cell_1d(&homog, site, xi, 16).unwrap(),
                2.5 * xi,
                epsilon = 1e-10
            );
        }
        assert_abs_diff_eq!(
            oracle_cell_1d(&two_phase(), site, 2.0, 256).unwrap(),
            3.0,
            epsilon = 1e-10
        );
        let nl = MonotoneMapSpec::new(
            1,
            Family::NonlinearIsotropic,
            CellProfile::Constant { value: 1.0 },
        );
        assert_eq!(oracle_cell_1d(&nl, site, 0.0, 32).unwrap(), 0.0);
        assert!(oracle_cell_1d(
            &MonotoneMapSpec::new(2, Family::linear(), CellProfile::Constant { value: 1.0 }),
            site,
            1.0,
            4
        )
        .is_err());
    }

    #[test]
    fn fem_matches_oracle_nonlinear_smooth() {
        let spec = MonotoneMapSpec::new(
            1,
            Family::NonlinearIsotropic,
            CellProfile::Cosine {
                mean: 2.0,
                amplitude: 1.0,
            },
        );
        let mesh = build_cell_mesh(1, 256).unwrap();
        let site = CellSite::Point([0.5, 0.0]);
        for xi in [-4.0, 0.5, 8.0] {
            let s = solve_cell(&spec, site, [xi, 0.0], &mesh, &opts()).unwrap();
            let q = oracle_cell_1d(&spec, site, xi, 4096).unwrap();
            assert!((s.averaged_flux[0] - q).abs() <= 1e-4 * f64::max(1.0, xi.abs()));
        }
    }

    #[test]
    fn x_continuity_of_correctors() {
        let spec = MonotoneMapSpec::new(1, Family::linear(), CellProfile::two_phase(1.0, 3.0))
            .with_x_structure(XStructure::Continuous {
                modulation: Modulation {
                    amplitude: 0.5,
                    frequency: 1.0,
                },
            });
        let mesh = build_cell_mesh(1, 32).unwrap();
        let w = spec.modulus.unwrap();
        let xi = [2.0, 0.0];
        for (x1, x2) in [(0.1, 0.15), (0.2, 0.7), (0.0, 0.4)] {
            let s1 = solve_cell(&spec, CellSite::Point([x1, 0.0]), xi, &mesh, &opts()).unwrap();
            let s2 = solve_cell(&spec, CellSite::Point([x2, 0.0]), xi, &mesh, &opts()).unwrap();
            let lhs = spec.alpha * libm::sqrt(s1.corrector_distance_sq(&s2).unwrap());
            let rhs = libm::sqrt(w.eval(libm::fabs(x1 - x2))) * spec.beta / spec.alpha * 2.0;
            assert!(lhs <= rhs + 1e-6);
        }
    }

    #[test]
    fn rejects_dirichlet_mesh() {
        let mesh = Mesh::macro_mesh(crate::geometry::BoxDomain::unit(1), 8).unwrap();
        assert!(solve_cell(&two_phase(), CellSite::Part(0), [1.0, 0.0], &mesh, &opts()).is_err());
    }
}
