//! Admissible flux maps `a(x, y, ξ)`.
//!
//! A map is strongly monotone with constant `alpha`, Lipschitz with constant
//! `beta`, vanishes at `ξ = 0` and is periodic in `y` with the unit cell
//! `Y = (0, 1)^n`. Two families are built in:
//!
//! * `LinearTensor`: `a = c(x, y) T ξ` with a constant tensor `T`,
//! * `NonlinearIsotropic`: `a = c(x, y) (1 + 1 / (1 + |ξ|)) ξ`.
//!
//! The scalar coefficient `c(x, y)` is a cell profile in `y` combined with
//! one of three x-structures: independent of `x`, piecewise over boxes, or
//! continuously modulated in `x`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Condition, Error, Result};
use crate::geometry::{self, BoxDomain, Vec2, ZERO};
use crate::sampling::Sampler;

const PI: f64 = core::f64::consts::PI;

/// Stream id used by [`validate_structure`].
const STRUCTURE_STREAM: u64 = 0x5157;

/// Slack used when checking declared constants against samples.
pub const STRUCTURE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Family {
    LinearTensor { tensor: [[f64; 2]; 2] },
    NonlinearIsotropic,
}

impl Family {
    pub fn linear() -> Self {
        Family::LinearTensor {
            tensor: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Family::LinearTensor { .. })
    }

    /// Flux for a scalar coefficient `c` and gradient `xi`.
    #[inline]
    pub fn flux(&self, c: f64, xi: Vec2) -> Vec2 {
        match self {
            Family::LinearTensor { tensor: t } => [
                c * (t[0][0] * xi[0] + t[0][1] * xi[1]),
                c * (t[1][0] * xi[0] + t[1][1] * xi[1]),
            ],
            Family::NonlinearIsotropic => {
                let m = 1.0 + 1.0 / (1.0 + geometry::norm(xi));
                [c * m * xi[0], c * m * xi[1]]
            }
        }
    }

    /// Monotonicity and Lipschitz constants for a unit coefficient.
    fn unit_constants(&self, dim: usize) -> (f64, f64) {
        match self {
            Family::LinearTensor { tensor: t } => {
                if dim == 1 {
                    (t[0][0], libm::fabs(t[0][0]))
                } else {
                    // smallest eigenvalue of the symmetric part
                    let s01 = 0.5 * (t[0][1] + t[1][0]);
                    let mean = 0.5 * (t[0][0] + t[1][1]);
                    let half = 0.5 * (t[0][0] - t[1][1]);
                    let lam_min = mean - libm::sqrt(half * half + s01 * s01);
                    // spectral norm from T^T T
                    let a = t[0][0] * t[0][0] + t[1][0] * t[1][0];
                    let b = t[0][0] * t[0][1] + t[1][0] * t[1][1];
                    let d = t[0][1] * t[0][1] + t[1][1] * t[1][1];
                    let m = 0.5 * (a + d);
                    let h = 0.5 * (a - d);
                    let sigma = libm::sqrt(m + libm::sqrt(h * h + b * b));
                    (lam_min, sigma)
                }
            }
            // t (1 + 1/(1+t)) has slope in (1, 2]; the tangential factor lies in (1, 2].
            Family::NonlinearIsotropic => (1.0, 2.0),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if let Family::LinearTensor { tensor } = self {
            if tensor.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpec("tensor has non-finite entries".into()));
            }
            let (lam, _) = self.unit_constants(dim);
            if lam <= 0.0 {
                return Err(Error::InvalidSpec(
                    "tensor is not positive definite (symmetric part)".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Y-periodic scalar coefficient profile. Arguments are reduced to `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum CellProfile {
    Constant {
        value: f64,
    },
    /// Equal-width layers stacked along `axis`.
    Layered {
        axis: usize,
        values: Vec<f64>,
    },
    /// 2x2 checkerboard; `low` on the cells whose index sum is even.
    Checkerboard {
        low: f64,
        high: f64,
    },
    /// `mean + amplitude * prod_i cos(2 pi y_i)`.
    Cosine {
        mean: f64,
        amplitude: f64,
    },
}

impl CellProfile {
    pub fn two_phase(low: f64, high: f64) -> Self {
        CellProfile::Layered {
            axis: 0,
            values: alloc::vec![low, high],
        }
    }

    #[inline]
    pub fn eval(&self, dim: usize, y: Vec2) -> f64 {
        match self {
            CellProfile::Constant { value } => *value,
            CellProfile::Layered { axis, values } => {
                let n = values.len();
                let k = libm::floor(y[*axis] * n as f64) as usize;
                values[k.min(n - 1)]
            }
            CellProfile::Checkerboard { low, high } => {
                let mut s = libm::floor(2.0 * y[0]) as i64;
                if dim == 2 {
                    s += libm::floor(2.0 * y[1]) as i64;
                }
                if s % 2 == 0 {
                    *low
                } else {
                    *high
                }
            }
            CellProfile::Cosine { mean, amplitude } => {
                let mut p = libm::cos(2.0 * PI * y[0]);
                if dim == 2 {
                    p *= libm::cos(2.0 * PI * y[1]);
                }
                mean + amplitude * p
            }
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match self {
            CellProfile::Constant { value } => (*value, *value),
            CellProfile::Layered { values, .. } => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                }),
            CellProfile::Checkerboard { low, high } => (low.min(*high), low.max(*high)),
            CellProfile::Cosine { mean, amplitude } => {
                (mean - libm::fabs(*amplitude), mean + libm::fabs(*amplitude))
            }
        }
    }

    /// Coordinates in `[0, 1)` where the profile jumps, per axis.
    pub fn breakpoints(&self, axis: usize) -> Vec<f64> {
        match self {
            CellProfile::Layered { axis: a, values } if *a == axis => (1..values.len())
                .map(|k| k as f64 / values.len() as f64)
                .collect(),
            CellProfile::Checkerboard { .. } => alloc::vec![0.5],
            _ => Vec::new(),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if let CellProfile::Layered { axis, values } = self {
            if *axis >= dim {
                return Err(Error::InvalidSpec(format!(
                    "layer axis {axis} out of range for dimension {dim}"
                )));
            }
            if values.is_empty() {
                return Err(Error::InvalidSpec("layered profile without values".into()));
            }
        }
        let (lo, hi) = self.bounds();
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0) {
            return Err(Error::InvalidSpec(
                "cell profile must be finite and strictly positive".into(),
            ));
        }
        Ok(())
    }
}

/// Continuous x-modulation `1 + amplitude * sin(2 pi frequency x_1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Modulation {
    pub amplitude: f64,
    pub frequency: f64,
}

impl Modulation {
    #[inline]
    pub fn factor(&self, x: Vec2) -> f64 {
        1.0 + self.amplitude * libm::sin(2.0 * PI * self.frequency * x[0])
    }

    /// Squared increment bound `|factor(x1) - factor(x2)|^2 <= K |x1 - x2|`.
    ///
    /// Uses `|sin u - sin v|^2 <= min(4, |u - v|^2) <= 2 |u - v|`.
    fn increment_constant(&self) -> f64 {
        self.amplitude * self.amplitude * 2.0 * (2.0 * PI * libm::fabs(self.frequency))
    }
}

/// Modulus of continuity `ω(t) = L t` or `ω(t) = L t^p`, `0 < p <= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "form", rename_all = "snake_case"))]
pub enum ModulusSpec {
    Linear { l: f64 },
    Power { l: f64, exponent: f64 },
}

impl ModulusSpec {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            ModulusSpec::Linear { l } => l * t,
            ModulusSpec::Power { l, exponent } => l * libm::pow(t, exponent),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ModulusSpec::Linear { l } => l.is_finite() && l >= 0.0,
            ModulusSpec::Power { l, exponent } => {
                l.is_finite() && l >= 0.0 && exponent > 0.0 && exponent <= 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(
                "modulus needs L >= 0 and exponent in (0, 1]".into(),
            ))
        }
    }
}

/// One box `Ω_i` of a piecewise-in-x map with its own cell profile.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Part {
    pub region: BoxDomain,
    pub profile: CellProfile,
    #[cfg_attr(feature = "serde", serde(default = "unit_scale"))]
    pub scale: f64,
}

#[cfg(feature = "serde")]
fn unit_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum XStructure {
    Constant,
    Piecewise { parts: Vec<Part> },
    Continuous { modulation: Modulation },
}

/// Parametric description of `a(x, y, ξ)` with its declared constants.
///
/// For `Piecewise` x-structures the per-part profiles replace `profile`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MonotoneMapSpec {
    pub dim: usize,
    pub domain: BoxDomain,
    pub family: Family,
    pub profile: CellProfile,
    pub x_structure: XStructure,
    pub alpha: f64,
    pub beta: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub modulus: Option<ModulusSpec>,
}

/// The map with `x` fixed: `y, ξ -> scale * profile(y) * family(ξ)`.
#[derive(Debug, Clone, Copy)]
pub struct FrozenMap<'a> {
    pub dim: usize,
    pub family: &'a Family,
    pub profile: &'a CellProfile,
    pub scale: f64,
}

impl FrozenMap<'_> {
    /// `y` must already be reduced to the unit cell.
    #[inline]
    pub fn flux(&self, y: Vec2, xi: Vec2) -> Vec2 {
        let c = self.scale * self.profile.eval(self.dim, y);
        self.family.flux(c, xi)
    }
}

impl MonotoneMapSpec {
    /// x-independent map on the unit box with tight constants.
    pub fn new(dim: usize, family: Family, profile: CellProfile) -> Self {
        let mut spec = MonotoneMapSpec {
            dim,
            domain: BoxDomain::unit(dim),
            family,
            profile,
            x_structure: XStructure::Constant,
            alpha: 1.0,
            beta: 1.0,
            modulus: None,
        };
        spec.set_natural_constants();
        spec
    }

    pub fn with_domain(mut self, domain: BoxDomain) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_x_structure(mut self, x_structure: XStructure) -> Self {
        self.x_structure = x_structure;
        self.set_natural_constants();
        self
    }

    /// Replaces `alpha`, `beta` (and the modulus of continuous maps) by the
    /// tight values of the built-in families.
    pub fn set_natural_constants(&mut self) {
        let (a, b) = self.natural_constants();
        self.alpha = a;
        self.beta = b;
        self.modulus = self.natural_modulus();
    }

    fn coefficient_bounds(&self) -> (f64, f64) {
        match &self.x_structure {
            XStructure::Constant => self.profile.bounds(),
            XStructure::Piecewise { parts } => {
                parts
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                        let (a, b) = p.profile.bounds();
                        (lo.min(p.scale * a), hi.max(p.scale * b))
                    })
            }
            XStructure::Continuous { modulation } => {
                let (a, b) = self.profile.bounds();
                let m = libm::fabs(modulation.amplitude);
                (a * (1.0 - m), b * (1.0 + m))
            }
        }
    }

    /// Tight `(alpha, beta)` for the built-in families.
    pub fn natural_constants(&self) -> (f64, f64) {
        let (cmin, cmax) = self.coefficient_bounds();
        let (a, b) = self.family.unit_constants(self.dim);
        (cmin * a, cmax * b)
    }

    /// Linear modulus valid for continuous x-structures.
    ///
    /// `|a(x1,y,ξ) - a(x2,y,ξ)|^2 <= max c0^2 * |F(ξ)|^2 * |Δfactor|^2`, with
    /// `|F(ξ)| <= beta_unit |ξ|` for both families.
    pub fn natural_modulus(&self) -> Option<ModulusSpec> {
        match &self.x_structure {
            XStructure::Continuous { modulation } => {
                let (_, c0max) = self.profile.bounds();
                let (_, b) = self.family.unit_constants(self.dim);
                Some(ModulusSpec::Linear {
                    l: c0max * c0max * b * b * modulation.increment_constant(),
                })
            }
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::InvalidSpec(format!(
                "dimension {} not supported",
                self.dim
            )));
        }
        self.domain.validate()?;
        if self.domain.dim != self.dim {
            return Err(Error::InvalidSpec("domain dimension differs".into()));
        }
        if !(self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(Error::NonFinite("alpha/beta"));
        }
        if !(self.alpha > 0.0 && self.alpha <= self.beta) {
            return Err(Error::Structural {
                condition: Condition::Ordering,
                observed: self.alpha,
                declared: self.beta,
            });
        }
        self.family.validate(self.dim)?;
        match &self.x_structure {
            XStructure::Constant => self.profile.validate(self.dim)?,
            XStructure::Piecewise { parts } => {
                if parts.is_empty() {
                    return Err(Error::InvalidSpec("piecewise map without parts".into()));
                }
                for p in parts {
                    p.region.validate()?;
                    if p.region.dim != self.dim {
                        return Err(Error::InvalidSpec("part dimension differs".into()));
                    }
                    p.profile.validate(self.dim)?;
                    if !(p.scale.is_finite() && p.scale > 0.0) {
                        return Err(Error::InvalidSpec("part scale must be positive".into()));
                    }
                }
            }
            XStructure::Continuous { modulation } => {
                self.profile.validate(self.dim)?;
                if !(libm::fabs(modulation.amplitude) < 1.0 && modulation.frequency.is_finite()) {
                    return Err(Error::InvalidSpec(
                        "modulation amplitude must lie in (-1, 1)".into(),
                    ));
                }
                match &self.modulus {
                    Some(m) => m.validate()?,
                    None => {
                        return Err(Error::InvalidSpec(
                            "continuous x-structure needs a declared modulus".into(),
                        ))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn parts(&self) -> &[Part] {
        match &self.x_structure {
            XStructure::Piecewise { parts } => parts,
            _ => &[],
        }
    }

    /// Index of the first part whose closed box contains `x`.
    pub fn part_index(&self, x: Vec2) -> Option<usize> {
        let tol = 1e-12 * self.domain.diameter();
        self.parts().iter().position(|p| p.region.contains(x, tol))
    }

    /// The map at a fixed macroscopic point.
    pub fn at_point(&self, x: Vec2) -> Result<FrozenMap<'_>> {
        let (profile, scale) = match &self.x_structure {
            XStructure::Constant => (&self.profile, 1.0),
            XStructure::Piecewise { parts } => {
                let i = self.part_index(x).ok_or(Error::PointOutsideParts { x })?;
                (&parts[i].profile, parts[i].scale)
            }
            XStructure::Continuous { modulation } => (&self.profile, modulation.factor(x)),
        };
        Ok(FrozenMap {
            dim: self.dim,
            family: &self.family,
            profile,
            scale,
        })
    }

    /// The map restricted to part `i` of a piecewise spec (any `i` maps to the
    /// single profile of an x-independent spec).
    pub fn at_part(&self, i: usize) -> Result<FrozenMap<'_>> {
        match &self.x_structure {
            XStructure::Constant => Ok(FrozenMap {
                dim: self.dim,
                family: &self.family,
                profile: &self.profile,
                scale: 1.0,
            }),
            XStructure::Piecewise { parts } => {
                let p = parts
                    .get(i)
                    .ok_or_else(|| Error::InvalidSpec(format!("no part {i}")))?;
                Ok(FrozenMap {
                    dim: self.dim,
                    family: &self.family,
                    profile: &p.profile,
                    scale: p.scale,
                })
            }
            XStructure::Continuous { .. } => Err(Error::InvalidSpec(
                "part index given for a continuous x-structure".into(),
            )),
        }
    }

    /// `a(x, y, ξ)` without input checks; `y` is taken modulo the unit cell.
    #[inline]
    pub fn flux(&self, x: Vec2, y: Vec2, xi: Vec2) -> Result<Vec2> {
        let frozen = self.at_point(x)?;
        Ok(frozen.flux([geometry::frac(y[0]), geometry::frac(y[1])], xi))
    }
}

/// Evaluates `a(x, y, ξ)`; `y` is interpreted modulo the unit cell.
pub fn eval_a(spec: &MonotoneMapSpec, x: Vec2, y: Vec2, xi: Vec2) -> Result<Vec2> {
    if !geometry::is_finite(x) {
        return Err(Error::NonFinite("x"));
    }
    if !geometry::is_finite(y) {
        return Err(Error::NonFinite("y"));
    }
    if !geometry::is_finite(xi) {
        return Err(Error::NonFinite("xi"));
    }
    let mut y = y;
    let mut xi = xi;
    let mut x = x;
    if spec.dim == 1 {
        y[1] = 0.0;
        xi[1] = 0.0;
        x[1] = 0.0;
    }
    spec.flux(x, y, xi)
}

/// Cell of a macroscopic partition with its anchor point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreezeCell {
    pub region: BoxDomain,
    pub anchor: Vec2,
}

/// Uniform partition of `domain` into `k` boxes per side with centred anchors.
pub fn uniform_partition(domain: &BoxDomain, k: usize) -> Vec<FreezeCell> {
    let k = k.max(1);
    let ny = if domain.dim == 2 { k } else { 1 };
    let mut cells = Vec::with_capacity(k * ny);
    for j in 0..ny {
        for i in 0..k {
            let mut lo = ZERO;
            let mut hi = ZERO;
            let idx = [i, j];
            for a in 0..domain.dim {
                let h = domain.side(a) / k as f64;
                lo[a] = domain.lo[a] + idx[a] as f64 * h;
                hi[a] = if idx[a] + 1 == k {
                    domain.hi[a]
                } else {
                    domain.lo[a] + (idx[a] + 1) as f64 * h
                };
            }
            let region = BoxDomain {
                dim: domain.dim,
                lo,
                hi,
            };
            cells.push(FreezeCell {
                region,
                anchor: region.centroid(),
            });
        }
    }
    cells
}

/// Frozen-coefficient map `a^k(x, y, ξ) = Σ_i χ_i(x) a(x_i, y, ξ)`.
///
/// x-independent specs are returned unchanged.
pub fn freeze_x(spec: &MonotoneMapSpec, partition: &[FreezeCell]) -> Result<MonotoneMapSpec> {
    spec.validate()?;
    for (i, cell) in partition.iter().enumerate() {
        let tol = 1e-12 * cell.region.diameter();
        if !cell.region.contains(cell.anchor, tol) {
            return Err(Error::AnchorOutsideCell { cell: i });
        }
    }
    if matches!(spec.x_structure, XStructure::Constant) {
        return Ok(spec.clone());
    }
    if partition.is_empty() {
        return Err(Error::InvalidSpec("empty partition".into()));
    }
    let mut parts = Vec::with_capacity(partition.len());
    for cell in partition {
        let frozen = spec.at_point(cell.anchor)?;
        parts.push(Part {
            region: cell.region,
            profile: frozen.profile.clone(),
            scale: frozen.scale,
        });
    }
    Ok(MonotoneMapSpec {
        dim: spec.dim,
        domain: spec.domain,
        family: spec.family.clone(),
        profile: spec.profile.clone(),
        x_structure: XStructure::Piecewise { parts },
        alpha: spec.alpha,
        beta: spec.beta,
        modulus: None,
    })
}

/// Extremes observed while sampling a map against its declared constants.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StructureAuditReport {
    /// Minimum of `(a(ξ1) - a(ξ2), ξ1 - ξ2) / |ξ1 - ξ2|^2`.
    pub alpha_observed: f64,
    /// Maximum of `|a(ξ1) - a(ξ2)| / |ξ1 - ξ2|`.
    pub beta_observed: f64,
    /// Maximum of `|a(x, y, 0)|`.
    pub zero_violation: f64,
    /// Maximum of `|a(x1,y,ξ) - a(x2,y,ξ)|^2 / |ξ|^2 - ω(|x1 - x2|)`; zero
    /// for maps without continuous x-dependence.
    pub modulus_violation: f64,
    pub sample_count: usize,
    pub rng_seed: u64,
}

/// Samples `(x, y, ξ1, ξ2)` tuples and checks the declared constants.
///
/// ξ is uniform in `[-10, 10]^n`, `y` uniform in `Y`, `x` uniform in the domain.
pub fn validate_structure(
    spec: &MonotoneMapSpec,
    n_samples: usize,
    seed: u64,
) -> Result<StructureAuditReport> {
    if n_samples == 0 {
        return Err(Error::InvalidSpec("n_samples must be at least 1".into()));
    }
    spec.validate()?;
    let mut rng = Sampler::new(seed, STRUCTURE_STREAM);
    let unit = BoxDomain::unit(spec.dim);
    let modulus = match spec.x_structure {
        XStructure::Continuous { .. } => spec.modulus,
        _ => None,
    };
    let mut alpha_obs = f64::INFINITY;
    let mut beta_obs: f64 = 0.0;
    let mut zero: f64 = 0.0;
    let mut excess: f64 = if modulus.is_some() {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    for _ in 0..n_samples {
        let x1 = rng.point_in(&spec.domain);
        let x2 = rng.point_in(&spec.domain);
        let y = rng.point_in(&unit);
        let xi1 = rng.vector(spec.dim, 10.0);
        let xi2 = rng.vector(spec.dim, 10.0);
        let a1 = eval_a(spec, x1, y, xi1)?;
        let a2 = eval_a(spec, x1, y, xi2)?;
        let d = geometry::sub(xi1, xi2);
        let dd = geometry::norm_sq(d);
        if dd > 0.0 {
            let da = geometry::sub(a1, a2);
            alpha_obs = alpha_obs.min(geometry::dot(da, d) / dd);
            beta_obs = beta_obs.max(geometry::norm(da) / libm::sqrt(dd));
        }
        zero = zero.max(geometry::norm(eval_a(spec, x1, y, ZERO)?));
        if let Some(m) = modulus {
            let nxi = geometry::norm_sq(xi1);
            if nxi > 0.0 {
                let b1 = eval_a(spec, x2, y, xi1)?;
                let t = geometry::norm(geometry::sub(x1, x2));
                let q = geometry::norm_sq(geometry::sub(a1, b1)) / nxi;
                excess = excess.max(q - m.eval(t));
            }
        }
    }
    if !(alpha_obs.is_finite() && beta_obs.is_finite() && zero.is_finite()) {
        return Err(Error::NonFinite("audit statistic"));
    }
    let report = StructureAuditReport {
        alpha_observed: alpha_obs,
        beta_observed: beta_obs,
        zero_violation: zero,
        modulus_violation: if excess.is_finite() { excess } else { 0.0 },
        sample_count: n_samples,
        rng_seed: seed,
    };
    if report.alpha_observed < spec.alpha - STRUCTURE_TOL {
        return Err(Error::Structural {
            condition: Condition::Monotonicity,
            observed: report.alpha_observed,
            declared: spec.alpha,
        });
    }
    if report.beta_observed > spec.beta + STRUCTURE_TOL {
        return Err(Error::Structural {
            condition: Condition::Lipschitz,
            observed: report.beta_observed,
            declared: spec.beta,
        });
    }
    if report.zero_violation > STRUCTURE_TOL {
        return Err(Error::Structural {
            condition: Condition::ZeroFlux,
            observed: report.zero_violation,
            declared: 0.0,
        });
    }
    if report.modulus_violation > STRUCTURE_TOL {
        return Err(Error::Structural {
            condition: Condition::Modulus,
            observed: report.modulus_violation,
            declared: 0.0,
        });
    }
    Ok(report)
}
