//! The effective flux `b(x, ξ)` as a memoized or tabulated monotone map.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;
use core::sync::atomic::{AtomicBool, Ordering};

use spin::RwLock;

use crate::cell::{solve_cell, CellSite, CellSolution};
use crate::error::{Error, Result};
use crate::geometry::{self, Vec2, ZERO};
use crate::mesh::Mesh;
use crate::operator::{ModulusSpec, MonotoneMapSpec, XStructure};
use crate::sampling::Sampler;
use crate::solver::SolveOptions;

const AUDIT_STREAM: u64 = 0xB0D1;

/// Bound on `|b(x, 0)|` in a passing audit.
pub const ZERO_TOL: f64 = 1e-10;

/// How the macroscopic variable enters a cached value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum XKey {
    /// x-independent map.
    Global,
    /// Part index of a piecewise map.
    Part(usize),
    /// Bit patterns of a frozen point.
    Point([u64; 2]),
}

fn clean_bits(v: f64) -> u64 {
    if v == 0.0 {
        0
    } else {
        v.to_bits()
    }
}

impl XKey {
    pub fn point(x: Vec2) -> Self {
        XKey::Point([clean_bits(x[0]), clean_bits(x[1])])
    }

    /// Key of `x` for `spec`.
    pub fn of(spec: &MonotoneMapSpec, x: Vec2) -> Result<Self> {
        if !geometry::is_finite(x) {
            return Err(Error::NonFinite("x"));
        }
        Ok(match &spec.x_structure {
            XStructure::Constant => XKey::Global,
            XStructure::Piecewise { .. } => {
                XKey::Part(spec.part_index(x).ok_or(Error::PointOutsideParts { x })?)
            }
            XStructure::Continuous { .. } => {
                XKey::point(if spec.dim == 1 { [x[0], 0.0] } else { x })
            }
        })
    }

    pub fn site(&self) -> CellSite {
        match *self {
            XKey::Global => CellSite::Part(0),
            XKey::Part(i) => CellSite::Part(i),
            XKey::Point(b) => CellSite::Point([f64::from_bits(b[0]), f64::from_bits(b[1])]),
        }
    }
}

impl fmt::Display for XKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            XKey::Global => write!(f, "global"),
            XKey::Part(i) => write!(f, "part:{i}"),
            XKey::Point(b) => write!(
                f,
                "point:{:?}:{:?}",
                f64::from_bits(b[0]),
                f64::from_bits(b[1])
            ),
        }
    }
}

impl FromStr for XKey {
    type Err = String;

    fn from_str(s: &str) -> core::result::Result<Self, String> {
        let bad = || format!("invalid x key {s:?}");
        if s == "global" {
            return Ok(XKey::Global);
        }
        if let Some(rest) = s.strip_prefix("part:") {
            return rest.parse().map(XKey::Part).map_err(|_| bad());
        }
        if let Some(rest) = s.strip_prefix("point:") {
            let (a, b) = rest.split_once(':').ok_or_else(bad)?;
            let x: f64 = a.parse().map_err(|_| bad())?;
            let y: f64 = b.parse().map_err(|_| bad())?;
            if !(x.is_finite() && y.is_finite()) {
                return Err(bad());
            }
            return Ok(XKey::point([x, y]));
        }
        Err(bad())
    }
}

/// Rounds to 40 mantissa bits (relative spacing below `1e-12`) and drops `-0`.
pub fn quantize(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { 0.0 } else { v };
    }
    f64::from_bits(v.to_bits().wrapping_add(1 << 11) & !0xFFF)
}

fn quantize_xi(dim: usize, xi: Vec2) -> Vec2 {
    [
        quantize(xi[0]),
        if dim == 1 { 0.0 } else { quantize(xi[1]) },
    ]
}

type CacheKey = (XKey, [u64; 2]);

#[derive(Debug, Clone)]
struct Entry {
    flux: Vec2,
    solution: Option<Arc<CellSolution>>,
}

/// One exported cache value `b(key, ξ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheRow {
    pub key: XKey,
    pub xi: Vec2,
    pub b: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
struct Table {
    axes: Vec<Vec<f64>>,
    keys: Vec<XKey>,
    /// Per key, values at the knots with axis 0 fastest.
    values: Vec<Vec<Vec2>>,
    probe_error: f64,
}

impl Table {
    fn bracket(&self, axis: usize, t: f64) -> Result<(usize, f64)> {
        let k = &self.axes[axis];
        let (lo, hi) = (k[0], k[k.len() - 1]);
        let slack = 1e-12 * (hi - lo);
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(Error::OutOfTableRange {
                axis,
                value: t,
                lo,
                hi,
            });
        }
        let i = match k.iter().position(|&v| v > t) {
            None => k.len() - 2,
            Some(0) => 0,
            Some(p) => (p - 1).min(k.len() - 2),
        };
        Ok((i, (t - k[i]) / (k[i + 1] - k[i])))
    }

    fn eval(&self, dim: usize, key: XKey, xi: Vec2) -> Result<Vec2> {
        let kpos = self
            .keys
            .iter()
            .position(|k| *k == key)
            .ok_or_else(|| Error::MissingTableKey(format!("{key}")))?;
        let vals = &self.values[kpos];
        let (i, s) = self.bracket(0, xi[0])?;
        if dim == 1 {
            let (a, b) = (vals[i], vals[i + 1]);
            return Ok([a[0] + s * (b[0] - a[0]), 0.0]);
        }
        let (j, t) = self.bracket(1, xi[1])?;
        let nx = self.axes[0].len();
        let v = |a: usize, b: usize| vals[a + nx * b];
        let mut out = ZERO;
        for c in 0..2 {
            out[c] = (1.0 - s) * (1.0 - t) * v(i, j)[c]
                + s * (1.0 - t) * v(i + 1, j)[c]
                + (1.0 - s) * t * v(i, j + 1)[c]
                + s * t * v(i + 1, j + 1)[c];
        }
        Ok(out)
    }
}

/// `b(x, ξ)` backed by cell solves on a fixed periodic mesh.
#[derive(Debug)]
pub struct HomogenizedMap {
    spec: MonotoneMapSpec,
    cell_mesh: Mesh,
    opts: SolveOptions,
    table: Option<Table>,
    cache: RwLock<BTreeMap<CacheKey, Entry>>,
    audited: AtomicBool,
}

impl Clone for HomogenizedMap {
    fn clone(&self) -> Self {
        HomogenizedMap {
            spec: self.spec.clone(),
            cell_mesh: self.cell_mesh,
            opts: self.opts,
            table: self.table.clone(),
            cache: RwLock::new(self.cache.read().clone()),
            audited: AtomicBool::new(self.is_audited()),
        }
    }
}

impl HomogenizedMap {
    /// Direct-mode map. The cell mesh must be periodic.
    pub fn new(spec: MonotoneMapSpec, cell_mesh: Mesh, opts: SolveOptions) -> Result<Self> {
        spec.validate()?;
        if cell_mesh.boundary != crate::mesh::Boundary::Periodic || cell_mesh.dim != spec.dim {
            return Err(Error::InvalidMesh(
                "the homogenized map needs a periodic cell mesh".into(),
            ));
        }
        opts.validate(spec.alpha, spec.beta)?;
        Ok(HomogenizedMap {
            spec,
            cell_mesh,
            opts,
            table: None,
            cache: RwLock::new(BTreeMap::new()),
            audited: AtomicBool::new(false),
        })
    }

    pub fn spec(&self) -> &MonotoneMapSpec {
        &self.spec
    }

    pub fn cell_mesh(&self) -> &Mesh {
        &self.cell_mesh
    }

    pub fn options(&self) -> &SolveOptions {
        &self.opts
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    /// Monotonicity constant of `b` (that of `a`).
    pub fn alpha(&self) -> f64 {
        self.spec.alpha
    }

    /// Lipschitz constant of `b`: `β² / α`.
    pub fn lipschitz(&self) -> f64 {
        self.spec.beta * self.spec.beta / self.spec.alpha
    }

    pub fn is_table(&self) -> bool {
        self.table.is_some()
    }

    /// Largest midpoint error observed when the table was built.
    pub fn table_probe_error(&self) -> Option<f64> {
        self.table.as_ref().map(|t| t.probe_error)
    }

    pub fn table_axes(&self) -> Option<&[Vec<f64>]> {
        self.table.as_ref().map(|t| t.axes.as_slice())
    }

    pub fn is_audited(&self) -> bool {
        self.audited.load(Ordering::Acquire)
    }

    /// Marks the map as audited without running [`audit_properties`].
    pub fn set_audited(&self, value: bool) {
        self.audited.store(value, Ordering::Release);
    }

    pub fn cache_len(&self) -> usize {
        self.cache.read().len()
    }

    pub fn key_of(&self, x: Vec2) -> Result<XKey> {
        XKey::of(&self.spec, x)
    }

    /// `b(x, ξ)`.
    pub fn eval_b(&self, x: Vec2, xi: Vec2) -> Result<Vec2> {
        let key = self.key_of(x)?;
        self.eval_key(key, xi)
    }

    /// `b` for an explicit key.
    pub fn eval_key(&self, key: XKey, xi: Vec2) -> Result<Vec2> {
        if !geometry::is_finite(xi) {
            return Err(Error::NonFinite("xi"));
        }
        match &self.table {
            Some(t) => t.eval(self.spec.dim, key, xi),
            None => self.direct(key, xi, false).map(|(b, _)| b),
        }
    }

    /// Cell solution for `(key, ξ)`, solved at the quantized `ξ` and cached.
    pub fn cell_solution(&self, key: XKey, xi: Vec2) -> Result<Arc<CellSolution>> {
        if !geometry::is_finite(xi) {
            return Err(Error::NonFinite("xi"));
        }
        let (_, s) = self.direct(key, xi, true)?;
        Ok(s.expect("solution requested"))
    }

    fn direct(
        &self,
        key: XKey,
        xi: Vec2,
        want_solution: bool,
    ) -> Result<(Vec2, Option<Arc<CellSolution>>)> {
        let q = quantize_xi(self.spec.dim, xi);
        let ck = (key, [q[0].to_bits(), q[1].to_bits()]);
        if let Some(e) = self.cache.read().get(&ck) {
            if !want_solution {
                return Ok((e.flux, None));
            }
            if let Some(s) = &e.solution {
                return Ok((e.flux, Some(s.clone())));
            }
        }
        let sol = solve_cell(&self.spec, key.site(), q, &self.cell_mesh, &self.opts)?;
        let flux = sol.averaged_flux;
        let stored = if want_solution {
            Some(Arc::new(sol))
        } else {
            None
        };
        let mut cache = self.cache.write();
        let e = cache.entry(ck).or_insert(Entry {
            flux,
            solution: None,
        });
        if stored.is_some() {
            e.solution = stored.clone();
        }
        Ok((e.flux, stored))
    }

    /// Cached values in key order.
    pub fn export_cache(&self) -> Vec<CacheRow> {
        self.cache
            .read()
            .iter()
            .map(|((key, xi), e)| CacheRow {
                key: *key,
                xi: [f64::from_bits(xi[0]), f64::from_bits(xi[1])],
                b: e.flux,
            })
            .collect()
    }

    /// Inserts rows; all rows are checked before any is stored.
    pub fn import_cache(&self, rows: &[CacheRow]) -> Result<()> {
        for r in rows {
            if !(geometry::is_finite(r.xi) && geometry::is_finite(r.b)) {
                return Err(Error::NonFinite("cache row"));
            }
            if let XKey::Part(i) = r.key {
                if !self.spec.parts().is_empty() && i >= self.spec.parts().len() {
                    return Err(Error::InvalidSpec(format!(
                        "cache row for missing part {i}"
                    )));
                }
            }
        }
        let mut cache = self.cache.write();
        for r in rows {
            let q = quantize_xi(self.spec.dim, r.xi);
            cache.insert(
                (r.key, [q[0].to_bits(), q[1].to_bits()]),
                Entry {
                    flux: r.b,
                    solution: None,
                },
            );
        }
        Ok(())
    }
}

/// Sampling plan of [`audit_properties`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct AuditPlan {
    pub xi_pairs: usize,
    pub x_pairs: usize,
    /// ξ components are drawn from `[-xi_range, xi_range]`.
    pub xi_range: f64,
    pub seed: u64,
    /// Tolerances are `1e-6 * scale`.
    pub scale: f64,
}

impl Default for AuditPlan {
    fn default() -> Self {
        AuditPlan {
            xi_pairs: 200,
            x_pairs: 20,
            xi_range: 10.0,
            seed: 0,
            scale: 1.0,
        }
    }
}

impl AuditPlan {
    pub fn tolerance(&self) -> f64 {
        1e-6 * self.scale
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PropertyAuditReport {
    /// `min (b(ξ1) - b(ξ2), ξ1 - ξ2) - α |ξ1 - ξ2|^2`.
    pub monotonicity_margin: f64,
    /// `max |b(ξ1) - b(ξ2)| - (β²/α) |ξ1 - ξ2|`.
    pub lipschitz_excess: f64,
    /// `max |b(x, 0)|`.
    pub zero_norm: f64,
    /// `max |b(x1, ξ) - b(x2, ξ)|^2 - C ω(|x1 - x2|) |ξ|^2`; `None` for piecewise maps.
    pub x_continuity_excess: Option<f64>,
    pub alpha: f64,
    pub lipschitz_constant: f64,
    pub continuity_constant: f64,
    pub xi_pairs: usize,
    pub x_pairs: usize,
    pub seed: u64,
    pub tolerance: f64,
}

impl PropertyAuditReport {
    pub fn passed(&self) -> bool {
        let t = self.tolerance;
        self.monotonicity_margin >= -t
            && self.lipschitz_excess <= t
            && self.zero_norm <= ZERO_TOL
            && self.x_continuity_excess.is_none_or(|e| e <= t)
    }
}

/// The sampled tuples of an audit, drawn before any evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditSamples {
    /// `(x, ξ1, ξ2)`.
    pub xi_pairs: Vec<(Vec2, Vec2, Vec2)>,
    /// `(x1, x2, ξ)`.
    pub x_pairs: Vec<(Vec2, Vec2, Vec2)>,
}

impl AuditSamples {
    pub fn draw(spec: &MonotoneMapSpec, plan: &AuditPlan) -> Self {
        let dim = spec.dim;
        let mut rng = Sampler::new(plan.seed, AUDIT_STREAM);
        let xi_pairs = (0..plan.xi_pairs)
            .map(|_| {
                let x = rng.point_in(&spec.domain);
                let a = rng.vector(dim, plan.xi_range);
                let b = rng.vector(dim, plan.xi_range);
                (x, a, b)
            })
            .collect();
        let x_pairs = if spec.parts().is_empty() {
            (0..plan.x_pairs)
                .map(|_| {
                    let p1 = rng.point_in(&spec.domain);
                    let p2 = rng.point_in(&spec.domain);
                    (p1, p2, rng.vector(dim, plan.xi_range))
                })
                .collect()
        } else {
            Vec::new()
        };
        AuditSamples { xi_pairs, x_pairs }
    }

    /// Every `(x, ξ)` at which the audit evaluates `b`.
    pub fn evaluation_points(&self) -> Vec<(Vec2, Vec2)> {
        let mut out = Vec::with_capacity(3 * self.xi_pairs.len() + 3 * self.x_pairs.len());
        for &(x, a, b) in &self.xi_pairs {
            out.extend([(x, a), (x, b), (x, ZERO)]);
        }
        for &(p1, p2, xi) in &self.x_pairs {
            out.extend([(p1, xi), (p2, xi), (p1, ZERO)]);
        }
        out
    }
}

/// Samples the monotonicity, Lipschitz, zero and x-continuity bounds of `b`
/// against constants `alpha`, `beta` of `a` and its modulus.
///
/// x-continuity is checked for maps without parts; a missing modulus counts
/// as `ω = 0`. A passing audit marks the map as audited.
pub fn audit_properties(
    map: &HomogenizedMap,
    alpha: f64,
    beta: f64,
    modulus: Option<&ModulusSpec>,
    plan: &AuditPlan,
) -> Result<PropertyAuditReport> {
    if map.is_table() {
        return Err(Error::InvalidOptions(
            "audits need a direct-mode map".into(),
        ));
    }
    if !(alpha > 0.0 && beta >= alpha && beta.is_finite()) {
        return Err(Error::InvalidOptions(format!(
            "need 0 < alpha <= beta, got {alpha}, {beta}"
        )));
    }
    let samples = AuditSamples::draw(map.spec(), plan);
    let k = beta / alpha;
    let lip = beta * beta / alpha;
    let c = 2.0 * k * k * (1.0 + k * k);
    let mut margin = f64::INFINITY;
    let mut excess = f64::NEG_INFINITY;
    let mut zero = 0.0f64;
    for &(x, x1, x2) in &samples.xi_pairs {
        let b1 = map.eval_b(x, x1)?;
        let b2 = map.eval_b(x, x2)?;
        let d = geometry::sub(x1, x2);
        let db = geometry::sub(b1, b2);
        margin = margin.min(geometry::dot(db, d) - alpha * geometry::norm_sq(d));
        excess = excess.max(geometry::norm(db) - lip * geometry::norm(d));
        zero = zero.max(geometry::norm(map.eval_b(x, ZERO)?));
    }
    let mut worst = f64::NEG_INFINITY;
    for &(p1, p2, xi) in &samples.x_pairs {
        let db = geometry::sub(map.eval_b(p1, xi)?, map.eval_b(p2, xi)?);
        let w = modulus.map_or(0.0, |m| m.eval(geometry::norm(geometry::sub(p1, p2))));
        worst = worst.max(geometry::norm_sq(db) - c * w * geometry::norm_sq(xi));
        zero = zero.max(geometry::norm(map.eval_b(p1, ZERO)?));
    }
    let report = PropertyAuditReport {
        monotonicity_margin: if samples.xi_pairs.is_empty() {
            0.0
        } else {
            margin
        },
        lipschitz_excess: if samples.xi_pairs.is_empty() {
            0.0
        } else {
            excess
        },
        zero_norm: zero,
        x_continuity_excess: if samples.x_pairs.is_empty() {
            None
        } else {
            Some(worst)
        },
        alpha,
        lipschitz_constant: lip,
        continuity_constant: c,
        xi_pairs: plan.xi_pairs,
        x_pairs: samples.x_pairs.len(),
        seed: plan.seed,
        tolerance: plan.tolerance(),
    };
    if report.passed() {
        map.set_audited(true);
    }
    Ok(report)
}

/// Midpoints of the knot intervals (cell centers in 2D) where tables are probed.
pub fn table_probe_points(axes: &[Vec<f64>]) -> Vec<Vec2> {
    let mids = |k: &Vec<f64>| -> Vec<f64> { k.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect() };
    let m0 = mids(&axes[0]);
    if axes.len() == 1 {
        return m0.into_iter().map(|a| [a, 0.0]).collect();
    }
    let m1 = mids(&axes[1]);
    m1.iter()
        .flat_map(|&b| m0.iter().map(move |&a| [a, b]))
        .collect()
}

/// Knots of a table, axis 0 fastest.
pub fn table_knots(axes: &[Vec<f64>]) -> Vec<Vec2> {
    if axes.len() == 1 {
        return axes[0].iter().map(|&a| [a, 0.0]).collect();
    }
    axes[1]
        .iter()
        .flat_map(|&b| axes[0].iter().map(move |&a| [a, b]))
        .collect()
}

/// Tabulates `b` on a tensor ξ-grid for every key, in table mode.
///
/// Values come from (and fill) the direct cache of `map`; the recorded probe
/// error is the largest midpoint difference between table and direct values.
pub fn build_table(
    map: &HomogenizedMap,
    axes: &[Vec<f64>],
    keys: &[XKey],
) -> Result<HomogenizedMap> {
    if map.is_table() {
        return Err(Error::InvalidGrid("the map is already a table".into()));
    }
    if axes.len() != map.dim() {
        return Err(Error::InvalidGrid(format!(
            "expected {} axes, got {}",
            map.dim(),
            axes.len()
        )));
    }
    for (a, k) in axes.iter().enumerate() {
        if k.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "axis {a} needs at least 2 knots"
            )));
        }
        if k.iter().any(|v| !v.is_finite()) || k.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!(
                "axis {a} knots must be finite and strictly increasing"
            )));
        }
    }
    if keys.is_empty() {
        return Err(Error::InvalidGrid("no x keys".into()));
    }
    let knots = table_knots(axes);
    let mut values = Vec::with_capacity(keys.len());
    for &key in keys {
        values.push(
            knots
                .iter()
                .map(|&xi| map.eval_key(key, xi))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let mut table = Table {
        axes: axes.to_vec(),
        keys: keys.to_vec(),
        values,
        probe_error: 0.0,
    };
    let mut err = 0.0f64;
    for &key in keys {
        for xi in table_probe_points(axes) {
            let exact = map.eval_key(key, xi)?;
            let approx = table.eval(map.dim(), key, xi)?;
            err = err.max(geometry::norm(geometry::sub(exact, approx)));
        }
    }
    table.probe_error = err;
    Ok(HomogenizedMap {
        spec: map.spec.clone(),
        cell_mesh: map.cell_mesh,
        opts: map.opts,
        table: Some(table),
        cache: RwLock::new(map.cache.read().clone()),
        audited: AtomicBool::new(map.is_audited()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::oracle_cell_1d;
    use crate::geometry::BoxDomain;
    use crate::mesh::build_cell_mesh;
    use crate::operator::{CellProfile, Family, Modulation, Part};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn opts() -> SolveOptions {
        SolveOptions {
            max_outer: 5000,
            ..SolveOptions::default()
        }
    }

    fn two_phase_map(n: usize) -> HomogenizedMap {
        let spec = MonotoneMapSpec::new(1, Family::linear(), CellProfile::two_phase(1.0, 3.0));
        HomogenizedMap::new(spec, build_cell_mesh(1, n).unwrap(), opts()).unwrap()
    }

    fn nonlinear_map(dim: usize, n: usize) -> HomogenizedMap {
        let spec = MonotoneMapSpec::new(
            dim,
            Family::NonlinearIsotropic,
            CellProfile::Checkerboard {
                low: 1.0,
                high: 2.0,
            },
        );
        HomogenizedMap::new(spec, build_cell_mesh(dim, n).unwrap(), opts()).unwrap()
    }

    #[test]
    fn eval_examples() {
        let m = two_phase_map(32);
        assert_eq!(m.eval_b([0.3, 0.0], ZERO).unwrap(), ZERO);
        assert_abs_diff_eq!(
            m.eval_b([0.3, 0.0], [-4.0, 0.0]).unwrap()[0],
            -6.0,
            epsilon = 1e-9
        );
        let id = HomogenizedMap::new(
            MonotoneMapSpec::new(2, Family::linear(), CellProfile::Constant { value: 1.0 }),
            build_cell_mesh(2, 4).unwrap(),
            opts(),
        )
        .unwrap();
        for xi in [[1.0, 2.0], [-3.5, 0.25]] {
            let b = id.eval_b([0.5, 0.5], xi).unwrap();
            assert_abs_diff_eq!(b[0], xi[0], epsilon = 1e-12);
            assert_abs_diff_eq!(b[1], xi[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn memoization_is_transparent() {
        let m = nonlinear_map(2, 8);
        let a = m.eval_b([0.2, 0.2], [1.3, -0.7]).unwrap();
        assert_eq!(m.cache_len(), 1);
        let b = m.eval_b([0.9, 0.1], [1.3, -0.7]).unwrap();
        assert_eq!(a[0].to_bits(), b[0].to_bits());
        assert_eq!(a[1].to_bits(), b[1].to_bits());
        assert_eq!(m.cache_len(), 1);
        // solution requests reuse the key
        let s = m.cell_solution(XKey::Global, [1.3, -0.7]).unwrap();
        assert_eq!(s.averaged_flux, a);
        assert_eq!(m.cache_len(), 1);
        let s2 = m.cell_solution(XKey::Global, [1.3, -0.7]).unwrap();
        assert!(Arc::ptr_eq(&s, &s2));
    }

    #[test]
    fn quantization() {
        assert_eq!(quantize(-0.0).to_bits(), 0);
        assert_eq!(quantize(1.0), 1.0);
        let v = 0.1234567891234;
        assert!((quantize(v) - v).abs() <= 1e-12 * v);
        assert_eq!(quantize(quantize(v)), quantize(v));
        assert_eq!(quantize(v * (1.0 + 1e-15)), quantize(v));
    }

    #[test]
    fn key_text_roundtrip() {
        for k in [
            XKey::Global,
            XKey::Part(3),
            XKey::point([0.1, -2.5e-7]),
            XKey::point([1.0 / 3.0, 0.0]),
        ] {
            assert_eq!(k.to_string().parse::<XKey>().unwrap(), k);
        }
        assert!("part:x".parse::<XKey>().is_err());
        assert!("point:1".parse::<XKey>().is_err());
        assert!("other".parse::<XKey>().is_err());
    }

    #[test]
    fn piecewise_keys_by_part() {
        let parts = alloc::vec![
            Part {
                region: BoxDomain::interval(0.0, 0.5),
                profile: CellProfile::Constant { value: 1.0 },
                scale: 1.0,
            },
            Part {
                region: BoxDomain::interval(0.5, 1.0),
                profile: CellProfile::Constant { value: 2.0 },
                scale: 1.0,
            },
        ];
        let spec = MonotoneMapSpec::new(1, Family::linear(), CellProfile::Constant { value: 1.0 })
            .with_x_structure(XStructure::Piecewise { parts });
        let m = HomogenizedMap::new(spec, build_cell_mesh(1, 8).unwrap(), opts()).unwrap();
        assert_eq!(m.key_of([0.2, 0.0]).unwrap(), XKey::Part(0));
        assert_eq!(m.key_of([0.7, 0.0]).unwrap(), XKey::Part(1));
        assert!(m.key_of([1.5, 0.0]).is_err());
        assert_abs_diff_eq!(
            m.eval_b([0.7, 0.0], [1.0, 0.0]).unwrap()[0],
            2.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn audit_examples() {
        let id = HomogenizedMap::new(
            MonotoneMapSpec::new(1, Family::linear(), CellProfile::Constant { value: 1.0 }),
            build_cell_mesh(1, 8).unwrap(),
            opts(),
        )
        .unwrap();
        let plan = AuditPlan {
            xi_pairs: 30,
            x_pairs: 5,
            ..AuditPlan::default()
        };
        let r = audit_properties(&id, 1.0, 1.0, None, &plan).unwrap();
        assert!(r.monotonicity_margin >= -1e-10);
        assert!(r.lipschitz_excess <= 1e-10);
        assert!(r.passed());
        assert!(id.is_audited());

        let tp = two_phase_map(32);
        let r = audit_properties(&tp, 1.0, 1.0, None, &plan).unwrap();
        // b = 1.5 ξ: margin is 0.5 |Δξ|^2 >= 0 against α = 1 ...
        assert!(r.monotonicity_margin >= 0.0);
        // ... but the Lipschitz bound 1 is violated
        assert!(r.lipschitz_excess > 0.0);
        assert!(!r.passed());
        assert!(!tp.is_audited());
    }

    #[test]
    fn audit_heterogeneous_nonlinear() {
        let m = nonlinear_map(2, 8);
        let (a, b) = (m.spec().alpha, m.spec().beta);
        let plan = AuditPlan {
            xi_pairs: 10,
            x_pairs: 3,
            seed: 7,
            ..AuditPlan::default()
        };
        let r = audit_properties(&m, a, b, None, &plan).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.zero_norm <= 1e-10);
        assert_eq!(r.continuity_constant, 2.0 * 16.0 * 17.0);
        let r2 = audit_properties(&m, a, b, None, &plan).unwrap();
        assert_eq!(r, r2);
    }

    #[test]
    fn audit_continuous_map() {
        let spec = MonotoneMapSpec::new(
            1,
            Family::NonlinearIsotropic,
            CellProfile::two_phase(1.0, 2.0),
        )
        .with_x_structure(XStructure::Continuous {
            modulation: Modulation {
                amplitude: 0.3,
                frequency: 1.0,
            },
        });
        let w = spec.modulus.unwrap();
        let (a, b) = (spec.alpha, spec.beta);
        let m = HomogenizedMap::new(spec, build_cell_mesh(1, 32).unwrap(), opts()).unwrap();
        let plan = AuditPlan {
            xi_pairs: 10,
            x_pairs: 10,
            seed: 3,
            ..AuditPlan::default()
        };
        let r = audit_properties(&m, a, b, Some(&w), &plan).unwrap();
        assert!(r.x_continuity_excess.unwrap() <= 1e-6);
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn table_mode() {
        let m = two_phase_map(16);
        let axes = alloc::vec![(0..=8).map(|i| -4.0 + i as f64).collect::<Vec<_>>()];
        let t = build_table(&m, &axes, &[XKey::Global]).unwrap();
        assert!(t.table_probe_error().unwrap() <= 1e-10);
        assert_abs_diff_eq!(
            t.eval_b([0.1, 0.0], [2.5, 0.0]).unwrap()[0],
            3.75,
            epsilon = 1e-9
        );
        assert!(matches!(
            t.eval_b([0.1, 0.0], [4.5, 0.0]),
            Err(Error::OutOfTableRange { .. })
        ));
        assert!(matches!(
            t.eval_key(XKey::Part(2), [0.0, 0.0]),
            Err(Error::MissingTableKey(_))
        ));
        assert!(build_table(&m, &[alloc::vec![1.0]], &[XKey::Global]).is_err());
        assert!(build_table(&m, &[alloc::vec![1.0, 0.0]], &[XKey::Global]).is_err());
        assert!(audit_properties(&t, 1.0, 3.0, None, &AuditPlan::default()).is_err());
    }

    #[test]
    fn table_probe_error_decreases_nonlinear() {
        let spec = MonotoneMapSpec::new(
            1,
            Family::NonlinearIsotropic,
            CellProfile::two_phase(1.0, 2.0),
        );
        let m = HomogenizedMap::new(spec, build_cell_mesh(1, 16).unwrap(), opts()).unwrap();
        let grid = |step: f64| {
            let n = (20.0 / step) as usize;
            alloc::vec![(0..=n).map(|i| -10.0 + step * i as f64).collect::<Vec<_>>()]
        };
        let e1 = build_table(&m, &grid(0.5), &[XKey::Global])
            .unwrap()
            .table_probe_error()
            .unwrap();
        let e2 = build_table(&m, &grid(0.25), &[XKey::Global])
            .unwrap()
            .table_probe_error()
            .unwrap();
        assert!(e1.is_finite() && e1 > 0.0);
        assert!(e2 < e1);
    }

    #[test]
    fn table_2d_bilinear_exact_for_linear() {
        let spec = MonotoneMapSpec::new(
            2,
            Family::linear(),
            CellProfile::Checkerboard {
                low: 1.0,
                high: 4.0,
            },
        );
        let m = HomogenizedMap::new(spec, build_cell_mesh(2, 8).unwrap(), opts()).unwrap();
        let k = alloc::vec![-1.0, 0.0, 1.0];
        let t = build_table(&m, &[k.clone(), k], &[XKey::Global]).unwrap();
        assert!(t.table_probe_error().unwrap() <= 1e-10);
    }

    #[test]
    fn cache_rows_roundtrip() {
        let m = two_phase_map(16);
        for xi in [-1.0, 0.5, 2.0] {
            m.eval_b([0.0, 0.0], [xi, 0.0]).unwrap();
        }
        let rows = m.export_cache();
        assert_eq!(rows.len(), 3);
        let fresh = two_phase_map(16);
        fresh.import_cache(&rows).unwrap();
        for r in &rows {
            let b = fresh.eval_key(r.key, r.xi).unwrap();
            assert_eq!(b[0].to_bits(), r.b[0].to_bits());
        }
        assert_eq!(fresh.export_cache(), rows);
        let bad = [CacheRow {
            key: XKey::Global,
            xi: [f64::NAN, 0.0],
            b: ZERO,
        }];
        assert!(fresh.import_cache(&bad).is_err());
    }

    #[test]
    fn fem_matches_oracle_two_phase() {
        let m = two_phase_map(64);
        for xi in [-4.0, -1.0, 0.5, 8.0] {
            let b = m.eval_b([0.5, 0.0], [xi, 0.0]).unwrap()[0];
            let o = oracle_cell_1d(m.spec(), CellSite::Part(0), xi, 1024).unwrap();
            assert_abs_diff_eq!(b, 1.5 * xi, epsilon = 1e-8 * xi.abs().max(1.0));
            assert_abs_diff_eq!(b, o, epsilon = 1e-8 * xi.abs().max(1.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn discrete_b_is_monotone_and_lipschitz(
            a in -10.0f64..10.0, c in -10.0f64..10.0,
        ) {
            let m = nonlinear_map(1, 16);
            let (al, be) = (m.spec().alpha, m.spec().beta);
            let b1 = m.eval_b([0.5, 0.0], [a, 0.0]).unwrap()[0];
            let b2 = m.eval_b([0.5, 0.0], [c, 0.0]).unwrap()[0];
            let dx = a - c;
            prop_assert!((b1 - b2) * dx >= al * dx * dx - 1e-8);
            prop_assert!((b1 - b2).abs() <= be * be / al * dx.abs() + 1e-8);
        }
    }
}
