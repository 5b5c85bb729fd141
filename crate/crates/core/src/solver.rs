//! Discrete solver for strongly monotone Lipschitz problems.
//!
//! Find `u` in the constrained FE space with `⟨A(u), φ⟩ = ⟨f, φ⟩` for all
//! test functions, where `⟨A(u), φ⟩ = ∫ (F(x, Du), Dφ) dx`. The outer loop is
//! the Zarantonello iteration
//!
//! ```text
//! u <- u - τ R⁻¹ (A(u) - f)
//! ```
//!
//! with `R` the Laplacian on the same constrained space, inverted by
//! conjugate gradients. In the `R`-norm the map is a contraction with factor
//! `sqrt(1 - 2 τ α + τ² β²)` whenever `0 < τ < 2 α / β²`.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::{self, Vec2};
use crate::mesh::{Boundary, FEField, Mesh};

/// Flux `F(x, ∇u)` evaluated at quadrature points.
pub trait FluxMap {
    fn flux(&self, x: Vec2, grad: Vec2) -> Result<Vec2>;
}

impl<F: Fn(Vec2, Vec2) -> Result<Vec2>> FluxMap for F {
    fn flux(&self, x: Vec2, grad: Vec2) -> Result<Vec2> {
        self(x, grad)
    }
}

pub struct DiscreteProblem<'a> {
    /// Mesh and constraint set (Dirichlet zeros or periodic with zero mean).
    pub mesh: Mesh,
    pub flux: &'a dyn FluxMap,
    /// Load vector `⟨f, φ_i⟩`.
    pub load: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SolveOptions {
    /// Step length; `None` means `alpha / beta²`.
    pub tau: Option<f64>,
    /// Tolerance on the `R`-norm of the residual.
    pub tol: f64,
    pub max_outer: usize,
    /// Relative residual tolerance of the inner CG solves.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// Let callers with fluxes linear in the gradient use [`solve_affine`].
    pub affine_shortcut: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tau: None,
            tol: 1e-10,
            max_outer: 200,
            cg_tol: 1e-12,
            cg_max_iter: 50_000,
            affine_shortcut: true,
        }
    }
}

impl SolveOptions {
    pub fn resolved_tau(&self, alpha: f64, beta: f64) -> f64 {
        self.tau.unwrap_or(alpha / (beta * beta))
    }

    pub fn validate(&self, alpha: f64, beta: f64) -> Result<()> {
        if !(alpha > 0.0 && alpha <= beta && beta.is_finite()) {
            return Err(Error::InvalidOptions(format!(
                "need 0 < alpha <= beta < inf, got alpha = {alpha}, beta = {beta}"
            )));
        }
        let tau = self.resolved_tau(alpha, beta);
        if !(tau > 0.0 && tau < 2.0 * alpha / (beta * beta)) {
            return Err(Error::InvalidOptions(format!(
                "step {tau} outside (0, 2 alpha / beta^2)"
            )));
        }
        if !(self.tol > 0.0 && self.cg_tol > 0.0) {
            return Err(Error::InvalidOptions("tolerances must be positive".into()));
        }
        if self.cg_max_iter == 0 {
            return Err(Error::InvalidOptions("cg_max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveStats {
    /// Number of updates applied.
    pub iterations: usize,
    /// Final `R`-norm residual.
    pub residual: f64,
    /// `R`-norm residual before each update, plus the final one.
    pub history: Vec<f64>,
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl SolveStats {
    /// `sqrt(1 - 2 τ α + τ² β²)`.
    pub fn contraction_bound(&self) -> f64 {
        let (t, a, b) = (self.tau, self.alpha, self.beta);
        libm::sqrt((1.0 - 2.0 * t * a + t * t * b * b).max(0.0))
    }

    /// Largest ratio of consecutive residuals (0 for a single entry).
    pub fn max_ratio(&self) -> f64 {
        self.history
            .windows(2)
            .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
            .fold(0.0, f64::max)
    }

    /// Every step reduced the residual by at least the contraction bound (plus `slack`).
    pub fn is_contracting(&self, slack: f64) -> bool {
        let q = self.contraction_bound();
        self.history
            .windows(2)
            .all(|w| w[1] < w[0] && w[1] <= (q + slack) * w[0])
    }
}

/// Laplacian on the constrained space, as an SPD operator on all coefficients:
/// identity on constrained (or pinned) nodes, stiffness on the free ones.
pub(crate) struct ConstrainedLaplacian {
    mesh: Mesh,
    local: [[f64; 4]; 4],
    nloc: usize,
    free: Vec<bool>,
}

impl ConstrainedLaplacian {
    pub(crate) fn new(mesh: Mesh) -> Self {
        let b = mesh.basis();
        let mut local = [[0.0; 4]; 4];
        for q in 0..b.nq {
            for (i, row) in local.iter_mut().enumerate().take(b.nloc) {
                for (j, v) in row.iter_mut().enumerate().take(b.nloc) {
                    *v += b.weights[q] * geometry::dot(b.grads[q][i], b.grads[q][j]);
                }
            }
        }
        let mut free: Vec<bool> = (0..mesh.num_nodes())
            .map(|i| !mesh.is_constrained(i))
            .collect();
        if mesh.boundary == Boundary::Periodic {
            // pin one node; the mean is removed afterwards
            free[0] = false;
        }
        ConstrainedLaplacian {
            mesh,
            local,
            nloc: b.nloc,
            free,
        }
    }

    pub(crate) fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        let nloc = self.nloc;
        for e in 0..self.mesh.num_elements() {
            let nodes = self.mesh.element_nodes(e);
            let mut u = [0.0; 4];
            for a in 0..nloc {
                if self.free[nodes[a]] {
                    u[a] = x[nodes[a]];
                }
            }
            for a in 0..nloc {
                if self.free[nodes[a]] {
                    let mut s = 0.0;
                    for b in 0..nloc {
                        s += self.local[a][b] * u[b];
                    }
                    y[nodes[a]] += s;
                }
            }
        }
        for (i, f) in self.free.iter().enumerate() {
            if !f {
                y[i] = x[i];
            }
        }
    }

    /// `R⁻¹ r` with constrained entries zero and, for periodic meshes, zero mean.
    pub(crate) fn solve(&self, r: &[f64], tol: f64, max_it: usize) -> Result<Vec<f64>> {
        let mut rhs = r.to_vec();
        for (i, f) in self.free.iter().enumerate() {
            if !f {
                rhs[i] = 0.0;
            }
        }
        let mut z = if self.mesh.dim == 1 {
            self.solve_tridiagonal(&rhs)?
        } else {
            solve_linear_spd(|x, y| self.apply(x, y), &rhs, tol, max_it)?.0
        };
        if self.mesh.boundary == Boundary::Periodic {
            let mean = z.iter().sum::<f64>() / z.len() as f64;
            z.iter_mut().for_each(|v| *v -= mean);
        }
        Ok(z)
    }
}

impl ConstrainedLaplacian {
    /// In 1D the free nodes form a chain: direct Thomas elimination.
    fn solve_tridiagonal(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = rhs.len();
        let free: Vec<usize> = (0..n).filter(|&i| self.free[i]).collect();
        let mut z = vec![0.0; n];
        let m = free.len();
        if m == 0 {
            return Ok(z);
        }
        let d = self.local[0][0] + self.local[1][1];
        let o = self.local[0][1];
        let mut c = vec![0.0; m];
        let mut y = vec![0.0; m];
        let mut denom = d;
        if !(denom > 0.0) {
            return Err(Error::SingularPreconditioner);
        }
        c[0] = o / denom;
        y[0] = rhs[free[0]] / denom;
        for k in 1..m {
            denom = d - o * c[k - 1];
            if !(denom > 0.0) {
                return Err(Error::SingularPreconditioner);
            }
            c[k] = o / denom;
            y[k] = (rhs[free[k]] - o * y[k - 1]) / denom;
        }
        for k in (0..m - 1).rev() {
            y[k] -= c[k] * y[k + 1];
        }
        for (k, &i) in free.iter().enumerate() {
            z[i] = y[k];
        }
        Ok(z)
    }
}

/// Conjugate gradients for an SPD operator; stops at `‖r‖ <= tol ‖rhs‖`.
///
/// Returns the solution and the number of iterations.
pub fn solve_linear_spd<A: FnMut(&[f64], &mut [f64])>(
    apply: A,
    rhs: &[f64],
    tol: f64,
    max_it: usize,
) -> Result<(Vec<f64>, usize)> {
    conjugate_gradient(apply, rhs, tol, 0.0, max_it)
}

/// CG stopping at `‖r‖ <= max(tol ‖rhs‖, floor)`.
fn conjugate_gradient<A: FnMut(&[f64], &mut [f64])>(
    mut apply: A,
    rhs: &[f64],
    tol: f64,
    floor: f64,
    max_it: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let bnorm = libm::sqrt(rhs.iter().map(|v| v * v).sum::<f64>());
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    if !bnorm.is_finite() {
        return Err(Error::NonFinite("right-hand side"));
    }
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let target = (tol * bnorm).max(floor);
    if bnorm <= floor {
        return Ok((x, 0));
    }
    for it in 0..max_it {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::SingularPreconditioner);
        }
        let step = rr / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        if libm::sqrt(rr_new) <= target {
            return Ok((x, it + 1));
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(Error::CgNotConverged {
        iterations: max_it,
        relative_residual: libm::sqrt(rr) / bnorm,
    })
}

/// Residual coefficients `∫ (F(x, Du), Dφ_i) dx - ⟨f, φ_i⟩`, zero on constrained nodes.
pub fn assemble_residual(problem: &DiscreteProblem<'_>, u: &FEField) -> Result<Vec<f64>> {
    let mesh = &problem.mesh;
    if u.mesh != *mesh {
        return Err(Error::MeshMismatch);
    }
    if u.coeffs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("field"));
    }
    let b = mesh.basis();
    let mut r: Vec<f64> = problem.load.iter().map(|v| -v).collect();
    for e in 0..mesh.num_elements() {
        let nodes = mesh.element_nodes(e);
        for q in 0..b.nq {
            let g = u.element_gradient(e, &b.grads[q], b.nloc);
            let x = mesh.to_physical(e, b.points[q]);
            let fl = problem.flux.flux(x, g)?;
            let w = b.weights[q];
            for a in 0..b.nloc {
                r[nodes[a]] += w * geometry::dot(fl, b.grads[q][a]);
            }
        }
    }
    for (i, v) in r.iter_mut().enumerate() {
        if mesh.is_constrained(i) {
            *v = 0.0;
        }
    }
    Ok(r)
}

/// Solves from the zero field.
pub fn solve_monotone(
    problem: &DiscreteProblem<'_>,
    opts: &SolveOptions,
) -> Result<(FEField, SolveStats)> {
    solve_monotone_from(problem, opts, FEField::zeros(problem.mesh))
}

/// Solves from `initial`, which is projected onto the constraint set first.
pub fn solve_monotone_from(
    problem: &DiscreteProblem<'_>,
    opts: &SolveOptions,
    initial: FEField,
) -> Result<(FEField, SolveStats)> {
    opts.validate(problem.alpha, problem.beta)?;
    let mesh = problem.mesh;
    if initial.mesh != mesh || problem.load.len() != mesh.num_nodes() {
        return Err(Error::MeshMismatch);
    }
    let tau = opts.resolved_tau(problem.alpha, problem.beta);
    let precond = ConstrainedLaplacian::new(mesh);
    let mut u = initial;
    for i in 0..mesh.num_nodes() {
        if mesh.is_constrained(i) {
            u.coeffs[i] = 0.0;
        }
    }
    if mesh.boundary == Boundary::Periodic {
        let mean = u.coeffs.iter().sum::<f64>() / u.coeffs.len() as f64;
        u.coeffs.iter_mut().for_each(|v| *v -= mean);
    }
    let mut stats = SolveStats {
        tau,
        alpha: problem.alpha,
        beta: problem.beta,
        ..SolveStats::default()
    };
    for it in 0..=opts.max_outer {
        let r = assemble_residual(problem, &u)?;
        let z = precond.solve(&r, opts.cg_tol, opts.cg_max_iter)?;
        let res = libm::sqrt(r.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>().max(0.0));
        stats.history.push(res);
        stats.residual = res;
        stats.iterations = it;
        if res <= opts.tol {
            return Ok((u, stats));
        }
        if it == opts.max_outer {
            break;
        }
        for (v, d) in u.coeffs.iter_mut().zip(&z) {
            *v -= tau * d;
        }
    }
    Err(Error::NonConvergence {
        stats: Box::new(stats),
    })
}

/// Conjugate gradients for fluxes affine in the gradient, `A(u) = K u + c`.
///
/// The stats record the `R`-norm residual before and after the solve.
pub fn solve_affine(
    problem: &DiscreteProblem<'_>,
    opts: &SolveOptions,
) -> Result<(FEField, SolveStats)> {
    opts.validate(problem.alpha, problem.beta)?;
    let mesh = problem.mesh;
    if problem.load.len() != mesh.num_nodes() {
        return Err(Error::MeshMismatch);
    }
    let precond = ConstrainedLaplacian::new(mesh);
    let zero = FEField::zeros(mesh);
    let r0 = assemble_residual(problem, &zero)?;
    let free = precond.free.clone();
    let mut rhs: Vec<f64> = r0.iter().map(|v| -v).collect();
    for (i, f) in free.iter().enumerate() {
        if !f {
            rhs[i] = 0.0;
        }
    }
    let mut failure = None;
    let mut probe = zero.clone();
    let apply = |x: &[f64], y: &mut [f64]| {
        for (i, p) in probe.coeffs.iter_mut().enumerate() {
            *p = if free[i] { x[i] } else { 0.0 };
        }
        match assemble_residual(problem, &probe) {
            Ok(r) => {
                for i in 0..y.len() {
                    y[i] = if free[i] { r[i] - r0[i] } else { x[i] };
                }
            }
            Err(e) => {
                failure.get_or_insert(e);
                y.iter_mut().for_each(|v| *v = f64::NAN);
            }
        }
    };
    // Euclidean floor well below the R-norm tolerance: R has eigenvalues above ~h^d.
    let floor = 0.1 * opts.tol * libm::sqrt(mesh.element_volume());
    let solved = conjugate_gradient(apply, &rhs, opts.cg_tol, floor, opts.cg_max_iter);
    if let Some(e) = failure {
        return Err(e);
    }
    let (mut coeffs, iterations) = solved?;
    if mesh.boundary == Boundary::Periodic {
        let mean = coeffs.iter().sum::<f64>() / coeffs.len() as f64;
        coeffs.iter_mut().for_each(|v| *v -= mean);
    }
    let u = FEField::from_coeffs(mesh, coeffs)?;
    let r_norm = |r: &[f64]| -> Result<f64> {
        let z = precond.solve(r, opts.cg_tol, opts.cg_max_iter)?;
        Ok(libm::sqrt(
            r.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>().max(0.0),
        ))
    };
    let start = r_norm(&r0)?;
    let end = r_norm(&assemble_residual(problem, &u)?)?;
    Ok((
        u,
        SolveStats {
            iterations,
            residual: end,
            history: if start <= opts.tol {
                vec![start]
            } else {
                vec![start, end]
            },
            tau: opts.resolved_tau(problem.alpha, problem.beta),
            alpha: problem.alpha,
            beta: problem.beta,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BoxDomain;
    use crate::load::Load;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::PI;

    fn identity_flux(_: Vec2, g: Vec2) -> Result<Vec2> {
        Ok(g)
    }

    #[test]
    fn cg_identity_and_zero() {
        let b = vec![1.0, -2.0, 3.5];
        let (x, it) = solve_linear_spd(|x, y| y.copy_from_slice(x), &b, 1e-14, 10).unwrap();
        assert_eq!(x, b);
        assert_eq!(it, 1);
        let (x, it) = solve_linear_spd(|x, y| y.copy_from_slice(x), &[0.0; 3], 1e-14, 10).unwrap();
        assert_eq!(x, vec![0.0; 3]);
        assert_eq!(it, 0);
    }

    #[test]
    fn cg_reports_max_iterations() {
        let lap = ConstrainedLaplacian::new(Mesh::macro_mesh(BoxDomain::unit(1), 64).unwrap());
        let b = vec![1.0; 65];
        assert!(matches!(
            solve_linear_spd(|x, y| lap.apply(x, y), &b, 1e-14, 3),
            Err(Error::CgNotConverged { iterations: 3, .. })
        ));
    }

    #[test]
    fn cg_dirichlet_laplacian_parabola() {
        // Oracle: P1 is nodally exact for -u'' = 1, u = x(1 - x)/2.
        let mesh = Mesh::macro_mesh(BoxDomain::unit(1), 16).unwrap();
        let lap = ConstrainedLaplacian::new(mesh);
        let rhs = Load::Constant { value: 1.0 }.assemble(&mesh);
        let (x, _) = solve_linear_spd(|a, b| lap.apply(a, b), &rhs, 1e-14, 100).unwrap();
        for (i, v) in x.iter().enumerate() {
            let t = mesh.node_coords(i)[0];
            assert_abs_diff_eq!(*v, t * (1.0 - t) / 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn residual_of_zero_field_is_minus_load() {
        let mesh = Mesh::macro_mesh(BoxDomain::unit(1), 8).unwrap();
        let load = Load::Constant { value: 2.0 }.assemble(&mesh);
        let p = DiscreteProblem {
            mesh,
            flux: &identity_flux,
            load: load.clone(),
            alpha: 1.0,
            beta: 1.0,
        };
        let r = assemble_residual(&p, &FEField::zeros(mesh)).unwrap();
        for (a, b) in r.iter().zip(&load) {
            assert_eq!(*a, -b);
        }
    }

    #[test]
    fn residual_of_linear_flux_is_stiffness_action() {
        let mesh = Mesh::macro_mesh(BoxDomain::unit(2), 6).unwrap();
        let p = DiscreteProblem {
            mesh,
            flux: &identity_flux,
            load: vec![0.0; mesh.num_nodes()],
            alpha: 1.0,
            beta: 1.0,
        };
        let mut u = FEField::interpolate(mesh, |x| libm::sin(3.0 * x[0]) * x[1] * (1.0 - x[1]));
        for i in 0..mesh.num_nodes() {
            if mesh.is_constrained(i) {
                u.coeffs[i] = 0.0;
            }
        }
        let r = assemble_residual(&p, &u).unwrap();
        let lap = ConstrainedLaplacian::new(mesh);
        let mut ku = vec![0.0; mesh.num_nodes()];
        lap.apply(&u.coeffs, &mut ku);
        for i in 0..mesh.num_nodes() {
            if !mesh.is_constrained(i) {
                assert_abs_diff_eq!(r[i], ku[i], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn manufactured_sine_in_one_step() {
        // -u'' = π² sin(πx), u = sin(πx); L² error must fall like h².
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let mesh = Mesh::macro_mesh(BoxDomain::unit(1), n).unwrap();
            let load = Load::SineProduct {
                amplitude: PI * PI,
                frequency: 1.0,
            }
            .assemble(&mesh);
            let p = DiscreteProblem {
                mesh,
                flux: &identity_flux,
                load,
                alpha: 1.0,
                beta: 1.0,
            };
            let (u, stats) = solve_monotone(&p, &SolveOptions::default()).unwrap();
            assert_eq!(stats.iterations, 1);
            errs.push(u.l2_distance_to(|x| libm::sin(PI * x[0])));
        }
        assert!(errs[0] < 5e-3);
        assert!(
            errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5,
            "{errs:?}"
        );
    }

    #[test]
    fn zero_load_gives_zero() {
        let mesh = Mesh::macro_mesh(BoxDomain::unit(2), 8).unwrap();
        let flux = |_: Vec2, g: Vec2| -> Result<Vec2> {
            let m = 1.0 + 1.0 / (1.0 + geometry::norm(g));
            Ok(geometry::scale(m, g))
        };
        let p = DiscreteProblem {
            mesh,
            flux: &flux,
            load: vec![0.0; mesh.num_nodes()],
            alpha: 1.0,
            beta: 2.0,
        };
        let (u, stats) = solve_monotone(&p, &SolveOptions::default()).unwrap();
        assert!(u.coeffs.iter().all(|&v| v == 0.0));
        assert_eq!(stats.iterations, 0);
    }

    fn nonlinear_problem(mesh: Mesh) -> (DiscreteProblem<'static>, Vec<f64>) {
        static FLUX: fn(Vec2, Vec2) -> Result<Vec2> = |x, g| {
            let c = if x[0] < 0.5 { 1.0 } else { 1.5 };
            let m = 1.0 + 1.0 / (1.0 + geometry::norm(g));
            Ok(geometry::scale(c * m, g))
        };
        let load = Load::Constant { value: 4.0 }.assemble(&mesh);
        (
            DiscreteProblem {
                mesh,
                flux: &FLUX,
                load: load.clone(),
                alpha: 1.0,
                beta: 3.0,
            },
            load,
        )
    }

    #[test]
    fn nonlinear_contraction_uniqueness_and_energy() {
        let mesh = Mesh::macro_mesh(BoxDomain::unit(2), 12).unwrap();
        let (p, load) = nonlinear_problem(mesh);
        let opts = SolveOptions {
            max_outer: 2000,
            ..SolveOptions::default()
        };
        let (u, stats) = solve_monotone(&p, &opts).unwrap();
        assert!(
            stats.is_contracting(1e-3),
            "max ratio {}",
            stats.max_ratio()
        );
        let init = FEField::interpolate(mesh, |x| 5.0 * libm::sin(7.0 * x[0] + x[1]));
        let (v, _) = solve_monotone_from(&p, &opts, init).unwrap();
        // R-norm of the difference
        let lap = ConstrainedLaplacian::new(mesh);
        let d: Vec<f64> = u.coeffs.iter().zip(&v.coeffs).map(|(a, b)| a - b).collect();
        let mut rd = vec![0.0; d.len()];
        lap.apply(&d, &mut rd);
        let dist = libm::sqrt(d.iter().zip(&rd).map(|(a, b)| a * b).sum::<f64>());
        assert!(dist <= 10.0 * opts.tol / p.alpha, "{dist}");
        // α ‖Du‖² <= ⟨f, u⟩ + slack
        let lhs = p.alpha * u.gradient_l2_norm().powi(2);
        assert!(lhs <= u.pair(&load) + 1e-8);
        for i in 0..mesh.num_nodes() {
            if mesh.is_constrained(i) {
                assert_eq!(u.coeffs[i], 0.0);
            }
        }
    }

    #[test]
    fn contraction_factor_example() {
        let s = SolveStats {
            tau: 0.25,
            alpha: 1.0,
            beta: 2.0,
            ..Default::default()
        };
        assert_abs_diff_eq!(s.contraction_bound(), libm::sqrt(0.75), epsilon = 1e-15);
    }

    #[test]
    fn linear_flux_matches_direct_cg() {
        let mesh = Mesh::macro_mesh(BoxDomain::unit(1), 40).unwrap();
        let flux = |x: Vec2, g: Vec2| -> Result<Vec2> {
            Ok(geometry::scale(2.0 + libm::sin(9.0 * x[0]), g))
        };
        let load = Load::Constant { value: 1.0 }.assemble(&mesh);
        let p = DiscreteProblem {
            mesh,
            flux: &flux,
            load: load.clone(),
            alpha: 1.0,
            beta: 3.0,
        };
        let opts = SolveOptions {
            max_outer: 1000,
            ..SolveOptions::default()
        };
        let (u, _) = solve_monotone(&p, &opts).unwrap();
        let zero = vec![0.0; mesh.num_nodes()];
        let lin = DiscreteProblem { load: zero, ..p };
        let apply = |x: &[f64], y: &mut [f64]| {
            let f = FEField::from_coeffs(mesh, x.to_vec()).unwrap();
            let r = assemble_residual(&lin, &f).unwrap();
            for i in 0..x.len() {
                y[i] = if mesh.is_constrained(i) { x[i] } else { r[i] };
            }
        };
        let (w, _) = solve_linear_spd(apply, &load, 1e-14, 1000).unwrap();
        for (a, b) in u.coeffs.iter().zip(&w) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-10);
        }
    }

    #[test]
    fn invalid_options_rejected() {
        let o = SolveOptions {
            tau: Some(1.0),
            ..Default::default()
        };
        assert!(o.validate(1.0, 2.0).is_err());
        assert!(SolveOptions::default().validate(2.0, 1.0).is_err());
    }

    #[test]
    fn non_convergence_carries_stats() {
        let mesh = Mesh::macro_mesh(BoxDomain::unit(2), 8).unwrap();
        let (p, _) = nonlinear_problem(mesh);
        let opts = SolveOptions {
            max_outer: 3,
            ..SolveOptions::default()
        };
        match solve_monotone(&p, &opts) {
            Err(Error::NonConvergence { stats }) => assert_eq!(stats.history.len(), 4),
            other => panic!("unexpected {other:?}"),
        }
    }
}
