//! The four experiment pipelines.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use monoscale_core::geometry::{self, Vec2};
use monoscale_core::homogenized::ZERO_TOL;
use monoscale_core::operator::STRUCTURE_TOL;
use monoscale_core::{
    apply_mh, audit_properties, build_cell_cover_with_parts, build_corrector, build_table,
    corrector_error, corrector_keys, freeze_x, oracle_cell_1d, quantize, solve_homogenized,
    solve_oscillatory, table_knots, table_probe_points, uniform_partition, validate_structure,
    AuditSamples, CacheRow, CellSolution, FEField, HomogenizedMap, MonotoneMapSpec,
    PropertyAuditReport, SolveStats, XKey, XStructure,
};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::cache_io::{self, CacheError};
use crate::config::{ConfigError, ExperimentConfig, ExperimentKind};
use crate::report::{fmt_num, verdict_text, Cell, ExperimentReport, Table, Verdict};

/// Slack on the contraction bound when checking residual histories.
pub const CONTRACTION_SLACK: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("{stage}: {source}")]
    Core {
        stage: String,
        source: monoscale_core::Error,
    },
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

trait At<T> {
    fn at(self, stage: &str) -> Result<T, RunError>;
}

impl<T> At<T> for monoscale_core::Result<T> {
    fn at(self, stage: &str) -> Result<T, RunError> {
        self.map_err(|source| RunError::Core {
            stage: stage.into(),
            source,
        })
    }
}

/// A finished run: the report, the exported cache and extra files (name, contents).
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: ExperimentReport,
    pub cache: Vec<CacheRow>,
    pub files: Vec<(String, String)>,
}

impl RunOutput {
    /// Writes `report.json`, `table.csv` and the extra files into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        self.report.write(dir)?;
        for (name, text) in &self.files {
            crate::report::write_atomic(&dir.join(name), text.as_bytes())?;
        }
        Ok(())
    }
}

#[derive(Default)]
struct Timer {
    map: Map<String, Value>,
}

impl Timer {
    fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.map
            .insert(phase.into(), json!(t.elapsed().as_secs_f64()));
        out
    }
}

fn vec_json(dim: usize, v: Vec2) -> Value {
    json!(v[..dim])
}

fn stats_json(s: &SolveStats) -> Value {
    json!({
        "iterations": s.iterations,
        "residual": s.residual,
        "initial_residual": s.history.first().copied().unwrap_or(0.0),
        "tau": s.tau,
        "contraction_bound": s.contraction_bound(),
        "max_ratio": s.max_ratio(),
        "contracting": s.is_contracting(CONTRACTION_SLACK),
    })
}

fn contraction_verdict<'a>(stats: impl IntoIterator<Item = &'a SolveStats>) -> Verdict {
    let mut n = 0usize;
    let mut bad = 0usize;
    let mut worst = 0.0f64;
    for s in stats {
        n += 1;
        if !s.is_contracting(CONTRACTION_SLACK) {
            bad += 1;
        }
        let q = s.contraction_bound();
        if q > 0.0 {
            worst = worst.max(s.max_ratio() / q);
        }
    }
    Verdict::new(
        "contraction",
        bad == 0,
        format!("{n} solves, {bad} non-contracting, worst ratio/bound {worst:.6}"),
    )
}

/// Runs `cfg`, seeding the map cache with `cache`.
pub fn run_experiment(cfg: &ExperimentConfig, cache: &[CacheRow]) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let map = HomogenizedMap::new(spec.clone(), cfg.cell_mesh()?, cfg.solver.options())
        .at("homogenized map")?;
    map.import_cache(cache).at("cache import")?;
    let mut timer = Timer::default();
    let mut report = ExperimentReport {
        kind: cfg.kind.name().into(),
        config: serde_json::to_value(cfg).unwrap_or(Value::Null),
        spec: serde_json::to_value(&spec).unwrap_or(Value::Null),
        table: Table::default(),
        details: Vec::new(),
        verdicts: Vec::new(),
        timings: Map::new(),
        passed: false,
    };
    let mut files = Vec::new();
    let total = Instant::now();
    match cfg.kind {
        ExperimentKind::Audit => run_audit(cfg, &spec, &map, &mut report, &mut timer)?,
        ExperimentKind::Effective => run_effective(cfg, &spec, &map, &mut report, &mut timer)?,
        ExperimentKind::Convergence | ExperimentKind::Corrector => {
            files = run_study(cfg, &spec, &map, &mut report, &mut timer)?
        }
    }
    timer
        .map
        .insert("total".into(), json!(total.elapsed().as_secs_f64()));
    report.timings = timer.map;
    report
        .details
        .push(json!({ "cache_entries": map.cache_len() }));
    Ok(RunOutput {
        report: report.finish(),
        cache: map.export_cache(),
        files,
    })
}

/// Like [`run_experiment`], reading the cache from `cache_path` when it exists
/// and writing the updated cache back.
pub fn run_with_cache(
    cfg: &ExperimentConfig,
    cache_path: Option<&Path>,
) -> Result<RunOutput, RunError> {
    let rows = match cache_path {
        Some(p) if p.exists() => cache_io::read_cache(p, cfg.dim)?,
        _ => Vec::new(),
    };
    let out = run_experiment(cfg, &rows)?;
    if let Some(p) = cache_path {
        cache_io::write_cache(p, &out.cache, cfg.dim)?;
    }
    Ok(out)
}

/// Solves the distinct `(key, ξ)` cell problems in parallel.
fn prefill(
    map: &HomogenizedMap,
    points: impl IntoIterator<Item = (XKey, Vec2)>,
) -> Result<(), RunError> {
    let dim = map.dim();
    let unique: BTreeSet<(XKey, [u64; 2])> = points
        .into_iter()
        .map(|(k, xi)| {
            let q = [
                quantize(xi[0]),
                if dim == 1 { 0.0 } else { quantize(xi[1]) },
            ];
            (k, [q[0].to_bits(), q[1].to_bits()])
        })
        .collect();
    let unique: Vec<_> = unique.into_iter().collect();
    unique
        .par_iter()
        .try_for_each(|&(k, b)| {
            map.eval_key(k, [f64::from_bits(b[0]), f64::from_bits(b[1])])
                .map(|_| ())
        })
        .at("cell solves")
}

fn prefill_audit(map: &HomogenizedMap, samples: &AuditSamples) -> Result<(), RunError> {
    let pts = samples
        .evaluation_points()
        .into_iter()
        .map(|(x, xi)| map.key_of(x).map(|k| (k, xi)))
        .collect::<monoscale_core::Result<Vec<_>>>()
        .at("audit sampling")?;
    prefill(map, pts)
}

fn audit_rows(table: &mut Table, prop: &PropertyAuditReport) {
    let t = prop.tolerance;
    let mut row = |name: &str, value: f64, bound: f64, ok: bool| {
        table.push(vec![
            name.into(),
            value.into(),
            bound.into(),
            verdict_text(ok).into(),
        ]);
    };
    row(
        "monotonicity_margin",
        prop.monotonicity_margin,
        -t,
        prop.monotonicity_margin >= -t,
    );
    row(
        "lipschitz_excess",
        prop.lipschitz_excess,
        t,
        prop.lipschitz_excess <= t,
    );
    row(
        "zero_norm",
        prop.zero_norm,
        ZERO_TOL,
        prop.zero_norm <= ZERO_TOL,
    );
    if let Some(e) = prop.x_continuity_excess {
        row("x_continuity_excess", e, t, e <= t);
    }
}

fn run_audit(
    cfg: &ExperimentConfig,
    spec: &MonotoneMapSpec,
    map: &HomogenizedMap,
    report: &mut ExperimentReport,
    timer: &mut Timer,
) -> Result<(), RunError> {
    let structure = timer
        .time("structure_audit", || {
            validate_structure(spec, cfg.audit.structure_samples, cfg.seed)
        })
        .at("structure audit")?;
    let plan = cfg.audit.plan(cfg.seed);
    let samples = AuditSamples::draw(spec, &plan);
    timer.time("cell_solves", || prefill_audit(map, &samples))?;
    let prop = timer
        .time("property_audit", || {
            audit_properties(map, spec.alpha, spec.beta, spec.modulus.as_ref(), &plan)
        })
        .at("property audit")?;
    let mut table = Table::new(&["quantity", "value", "bound", "verdict"]);
    let tol = STRUCTURE_TOL * spec.alpha.max(spec.beta).max(1.0);
    let mut row = |name: &str, value: f64, bound: f64, ok: bool| {
        table.push(vec![
            name.into(),
            value.into(),
            bound.into(),
            verdict_text(ok).into(),
        ]);
    };
    row(
        "structure_alpha_observed",
        structure.alpha_observed,
        spec.alpha,
        structure.alpha_observed >= spec.alpha - tol,
    );
    row(
        "structure_beta_observed",
        structure.beta_observed,
        spec.beta,
        structure.beta_observed <= spec.beta + tol,
    );
    row(
        "structure_zero_violation",
        structure.zero_violation,
        tol,
        structure.zero_violation <= tol,
    );
    row(
        "structure_modulus_violation",
        structure.modulus_violation,
        tol,
        structure.modulus_violation <= tol,
    );
    audit_rows(&mut table, &prop);
    report.table = table;
    report.details.push(json!({
        "structure": {
            "alpha_observed": structure.alpha_observed,
            "beta_observed": structure.beta_observed,
            "zero_violation": structure.zero_violation,
            "modulus_violation": structure.modulus_violation,
            "samples": structure.sample_count,
            "seed": structure.rng_seed,
        },
        "properties": {
            "lipschitz_constant": prop.lipschitz_constant,
            "continuity_constant": prop.continuity_constant,
            "xi_pairs": prop.xi_pairs,
            "x_pairs": prop.x_pairs,
            "tolerance": prop.tolerance,
        },
    }));
    Ok(())
}

struct EffectiveRow {
    x: Vec2,
    key: XKey,
    xi: Vec2,
    solution: Arc<CellSolution>,
    oracle: Option<f64>,
}

fn run_effective(
    cfg: &ExperimentConfig,
    spec: &MonotoneMapSpec,
    map: &HomogenizedMap,
    report: &mut ExperimentReport,
    timer: &mut Timer,
) -> Result<(), RunError> {
    let dim = cfg.dim;
    let xis = cfg.xi_list()?;
    let mut jobs = Vec::new();
    for x in cfg.points()? {
        let key = map.key_of(x).at("effective points")?;
        for &xi in &xis {
            jobs.push((x, key, xi));
        }
    }
    let rows: Vec<EffectiveRow> = timer.time("cell_solves", || {
        jobs.par_iter()
            .map(|&(x, key, xi)| {
                let solution = map.cell_solution(key, xi).at("cell solve")?;
                let oracle = if dim == 1 {
                    Some(
                        oracle_cell_1d(spec, key.site(), xi[0], cfg.effective.oracle_quadrature)
                            .at("1D oracle")?,
                    )
                } else {
                    None
                };
                Ok(EffectiveRow {
                    x,
                    key,
                    xi,
                    solution,
                    oracle,
                })
            })
            .collect::<Result<Vec<_>, RunError>>()
    })?;
    let mut table = if dim == 1 {
        Table::new(&["x_key", "xi_0", "b_0", "oracle_b_0", "rel_error", "verdict"])
    } else {
        Table::new(&["x_key", "xi_0", "xi_1", "b_0", "b_1", "verdict"])
    };
    for r in &rows {
        let b = r.solution.averaged_flux;
        let mut cells: Vec<Cell> = vec![r.key.to_string().into()];
        cells.extend(r.xi[..dim].iter().map(|&v| Cell::from(v)));
        cells.extend(b[..dim].iter().map(|&v| Cell::from(v)));
        let ok = if let Some(o) = r.oracle {
            let rel = relative_error(b[0], o);
            cells.push(o.into());
            cells.push(rel.into());
            rel <= cfg.effective.oracle_tolerance
        } else {
            geometry::is_finite(b)
        };
        cells.push(verdict_text(ok).into());
        table.push(cells);
        report.details.push(json!({
            "x": vec_json(dim, r.x),
            "x_key": r.key.to_string(),
            "xi": vec_json(dim, r.xi),
            "b": vec_json(dim, b),
            "cell_energy": r.solution.energy(),
            "stats": stats_json(&r.solution.stats),
        }));
    }
    report.table = table;
    report
        .verdicts
        .push(contraction_verdict(rows.iter().map(|r| &r.solution.stats)));
    Ok(())
}

/// `|b - o| / |o|`, or the absolute error when `o = 0`.
pub fn relative_error(b: f64, o: f64) -> f64 {
    let d = (b - o).abs();
    if o == 0.0 {
        d
    } else {
        d / o.abs()
    }
}

/// ξ knots of the macro table: `{-R, 0, R}` for linear families (exact),
/// otherwise a uniform grid of spacing at most `step`.
fn table_axes(cfg: &ExperimentConfig, spec: &MonotoneMapSpec) -> Vec<Vec<f64>> {
    let r = cfg.study.table.range;
    let axis = if spec.family.is_linear() {
        vec![-r, 0.0, r]
    } else {
        let n = (2.0 * r / cfg.study.table.step).ceil().max(1.0) as usize;
        (0..=n)
            .map(|i| -r + 2.0 * r * i as f64 / n as f64)
            .collect()
    };
    vec![axis; cfg.dim]
}

struct EpsilonResult {
    epsilon: f64,
    e_plain: f64,
    e_corr: f64,
    e_outside: f64,
    u_err: f64,
    energy_excess: f64,
    jensen_gap: f64,
    fine_stats: SolveStats,
    cell_stats: Vec<SolveStats>,
    detail: Value,
    files: Vec<(String, String)>,
}

fn run_study(
    cfg: &ExperimentConfig,
    spec: &MonotoneMapSpec,
    map: &HomogenizedMap,
    report: &mut ExperimentReport,
    timer: &mut Timer,
) -> Result<Vec<(String, String)>, RunError> {
    let dim = cfg.dim;
    let domain = cfg.domain()?;
    let frozen = match spec.x_structure {
        XStructure::Continuous { .. } => {
            let partition = uniform_partition(&domain, cfg.study.freeze_k);
            let fspec = freeze_x(spec, &partition).at("freezing x")?;
            Some(
                HomogenizedMap::new(fspec, cfg.cell_mesh()?, cfg.solver.options())
                    .at("frozen map")?,
            )
        }
        _ => None,
    };
    let macro_src = frozen.as_ref().unwrap_or(map);
    let mspec = macro_src.spec();
    let plan = cfg.audit.plan(cfg.seed);
    let samples = AuditSamples::draw(mspec, &plan);
    timer.time("audit_cell_solves", || prefill_audit(macro_src, &samples))?;
    let modulus = match mspec.x_structure {
        XStructure::Continuous { .. } => mspec.modulus,
        _ => None,
    };
    let prop = timer
        .time("property_audit", || {
            audit_properties(macro_src, mspec.alpha, mspec.beta, modulus.as_ref(), &plan)
        })
        .at("property audit")?;
    report.verdicts.push(Verdict::new(
        "property_audit",
        prop.passed(),
        format!(
            "margin {}, lipschitz excess {}, zero {}",
            fmt_num(prop.monotonicity_margin),
            fmt_num(prop.lipschitz_excess),
            fmt_num(prop.zero_norm)
        ),
    ));

    let keys: Vec<XKey> = if mspec.parts().is_empty() {
        vec![XKey::Global]
    } else {
        (0..mspec.parts().len()).map(XKey::Part).collect()
    };
    let axes = table_axes(cfg, mspec);
    let mut pts = table_knots(&axes);
    pts.extend(table_probe_points(&axes));
    timer.time("table_cell_solves", || {
        prefill(
            macro_src,
            keys.iter()
                .flat_map(|&k| pts.iter().map(move |&xi| (k, xi))),
        )
    })?;
    let table_map = timer
        .time("table", || build_table(macro_src, &axes, &keys))
        .at("table")?;
    let mesh = cfg.macro_mesh()?;
    let opts = cfg.solver.options();
    let (u, macro_stats) = timer
        .time("macro_solve", || {
            solve_homogenized(&table_map, &mesh, &cfg.load, &opts, !prop.passed())
        })
        .at("homogenized solve")?;

    let t = Instant::now();
    let results = cfg
        .epsilons
        .par_iter()
        .enumerate()
        .map(|(i, &eps)| study_epsilon(cfg, spec, map, &u, i, eps))
        .collect::<Result<Vec<_>, RunError>>()?;
    timer
        .map
        .insert("epsilon_studies".into(), json!(t.elapsed().as_secs_f64()));

    let corrector = cfg.kind == ExperimentKind::Corrector;
    let mut table = if corrector {
        Table::new(&[
            "epsilon",
            "e_plain",
            "e_corr",
            "e_outside",
            "u_l2_error",
            "energy_excess",
            "jensen_gap",
            "verdict",
        ])
    } else {
        Table::new(&["epsilon", "e_plain", "e_corr", "e_outside", "verdict"])
    };
    let energy_tol = 1e-6;
    let jensen_tol = 1e-10;
    for (i, r) in results.iter().enumerate() {
        let trend = i == 0 || (r.e_corr < results[i - 1].e_corr && r.u_err < results[i - 1].u_err);
        let ok = trend && r.energy_excess <= energy_tol && r.jensen_gap <= jensen_tol;
        let mut row: Vec<Cell> = vec![
            r.epsilon.into(),
            r.e_plain.into(),
            r.e_corr.into(),
            r.e_outside.into(),
        ];
        if corrector {
            row.extend([r.u_err.into(), r.energy_excess.into(), r.jensen_gap.into()]);
        }
        row.push(verdict_text(ok).into());
        table.push(row);
    }
    report.table = table;

    if let (Some(first), Some(last)) = (results.first(), results.last()) {
        if results.len() > 1 {
            let ratio = last.e_corr / first.e_corr;
            report.verdicts.push(Verdict::new(
                "e_corr_ratio",
                ratio <= cfg.study.max_corr_ratio,
                format!("{} (limit {})", fmt_num(ratio), cfg.study.max_corr_ratio),
            ));
        }
        let lo = results
            .iter()
            .map(|r| r.e_plain)
            .fold(f64::INFINITY, f64::min);
        let hi = results.iter().map(|r| r.e_plain).fold(0.0, f64::max);
        let spread = hi / lo - 1.0;
        report.verdicts.push(Verdict::new(
            "e_plain_spread",
            spread < cfg.study.max_plain_spread,
            format!("{} (limit {})", fmt_num(spread), cfg.study.max_plain_spread),
        ));
    }
    let all_stats = std::iter::once(&macro_stats).chain(
        results
            .iter()
            .flat_map(|r| std::iter::once(&r.fine_stats).chain(r.cell_stats.iter())),
    );
    report.verdicts.push(contraction_verdict(all_stats));

    report.details.push(json!({
        "macro": {
            "stats": stats_json(&macro_stats),
            "table_probe_error": table_map.table_probe_error(),
            "table_knots": axes[0].len(),
            "frozen_parts": frozen.as_ref().map(|m| m.spec().parts().len()),
            "u_gradient_l2": u.gradient_l2_norm(),
        }
    }));
    let mut files = Vec::new();
    if cfg.study.dump_fields {
        files.push((
            "macro_field.csv".to_string(),
            dump_nodes(dim, &[("u_hom", &u)]),
        ));
    }
    for r in results {
        report.details.push(r.detail);
        files.extend(r.files);
    }
    Ok(files)
}

fn study_epsilon(
    cfg: &ExperimentConfig,
    spec: &MonotoneMapSpec,
    map: &HomogenizedMap,
    u: &FEField,
    index: usize,
    eps: f64,
) -> Result<EpsilonResult, RunError> {
    let dim = cfg.dim;
    let domain = cfg.domain()?;
    let mesh = u.mesh;
    let opts = cfg.solver.options();
    let stage = |s: &str| format!("epsilon {eps}: {s}");
    let mut timer = Timer::default();
    let (uh, fine_stats) = timer
        .time("fine_solve", || {
            solve_oscillatory(
                spec,
                eps,
                &mesh,
                &cfg.load,
                &opts,
                cfg.mesh.min_cells_per_period,
            )
        })
        .at(&stage("fine solve"))?;
    let parts: Vec<_> = if spec.parts().is_empty() {
        vec![domain]
    } else {
        spec.parts().iter().map(|p| p.region).collect()
    };
    let cover = build_cell_cover_with_parts(&domain, &parts, eps, cfg.study.anchor_rule)
        .at(&stage("cell cover"))?;
    let step = apply_mh(u, &cover).at(&stage("cell averages"))?;
    let mode = cfg.study.anchor_mode;
    let keys = corrector_keys(map, &cover, mode).at(&stage("corrector keys"))?;
    timer.time("cell_solves", || {
        prefill(
            map,
            keys.iter().enumerate().flat_map(|(j, ks)| {
                let xi = step.values[j];
                ks.iter().map(move |&(_, k)| (k, xi))
            }),
        )
    })?;
    let p = build_corrector(map, &step, mode).at(&stage("corrector"))?;
    let errs = timer
        .time("errors", || corrector_error(&uh, u, &p, true))
        .at(&stage("errors"))?;
    let u_err = uh.l2_distance(u).at(&stage("errors"))?;

    let k = spec.beta / spec.alpha;
    let measure = cover.cell_measure();
    let mut energy_excess = f64::NEG_INFINITY;
    for j in 0..cover.len() {
        if p.cells[j].len() == 1 {
            let xi = p.cell_xi(j);
            energy_excess =
                energy_excess.max(p.cell_energy(j) / measure - k * k * geometry::norm_sq(xi));
        }
    }
    if cover.is_empty() {
        energy_excess = 0.0;
    }
    let jensen_gap = step.l2_norm() - u.gradient_l2_norm();

    let mut seen = BTreeSet::new();
    let mut cell_stats = Vec::new();
    for piece in p.cells.iter().flatten() {
        let s = &piece.solution;
        if seen.insert((piece.key, [s.xi[0].to_bits(), s.xi[1].to_bits()])) {
            cell_stats.push(s.stats.clone());
        }
    }
    let detail = json!({
        "epsilon": eps,
        "e_plain": errs.e_plain,
        "e_corr": errs.e_corr,
        "e_outside": errs.e_outside,
        "u_l2_error": u_err,
        "energy_excess": energy_excess,
        "jensen_gap": jensen_gap,
        "interior_cells": cover.len(),
        "distinct_cell_solves": cell_stats.len(),
        "fine": stats_json(&fine_stats),
        "timings": timer.map,
    });
    let mut files = Vec::new();
    if cfg.study.dump_fields {
        files.push((
            format!("field_eps{index}.csv"),
            dump_nodes(dim, &[("u_fine", &uh), ("u_hom", u)]),
        ));
        files.push((
            format!("gradients_eps{index}.csv"),
            dump_gradients(dim, &uh, u, &p),
        ));
    }
    Ok(EpsilonResult {
        epsilon: eps,
        e_plain: errs.e_plain,
        e_corr: errs.e_corr,
        e_outside: errs.e_outside,
        u_err,
        energy_excess,
        jensen_gap,
        fine_stats,
        cell_stats,
        detail,
        files,
    })
}

fn coord_columns(dim: usize, prefix: &str) -> String {
    (0..dim)
        .map(|i| format!("{prefix}_{i}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn push_nums(s: &mut String, vals: &[f64]) {
    for v in vals {
        s.push(',');
        s.push_str(&fmt_num(*v));
    }
}

/// Nodal values of fields sharing one mesh.
pub fn dump_nodes(dim: usize, fields: &[(&str, &FEField)]) -> String {
    let mut s = coord_columns(dim, "x");
    for (name, _) in fields {
        let _ = write!(s, ",{name}");
    }
    s.push('\n');
    let mesh = fields[0].1.mesh;
    for n in 0..mesh.num_nodes() {
        let x = mesh.node_coords(n);
        s.push_str(&fmt_num(x[0]));
        if dim == 2 {
            s.push(',');
            s.push_str(&fmt_num(x[1]));
        }
        let vals: Vec<f64> = fields.iter().map(|(_, f)| f.coeffs[n]).collect();
        push_nums(&mut s, &vals);
        s.push('\n');
    }
    s
}

/// `Du_ε`, `Du` and the corrected gradient at the element centres.
pub fn dump_gradients(
    dim: usize,
    fine: &FEField,
    hom: &FEField,
    p: &monoscale_core::CorrectorField,
) -> String {
    let mut s = coord_columns(dim, "x");
    for name in ["du_fine", "du_hom", "corrected"] {
        s.push(',');
        s.push_str(&coord_columns(dim, name));
    }
    s.push('\n');
    let mesh = fine.mesh;
    for e in 0..mesh.num_elements() {
        let x = mesh.element_box(e).centroid();
        s.push_str(&fmt_num(x[0]));
        if dim == 2 {
            s.push(',');
            s.push_str(&fmt_num(x[1]));
        }
        for g in [fine.gradient_at(x), hom.gradient_at(x), p.eval(x)] {
            push_nums(&mut s, &g[..dim]);
        }
        s.push('\n');
    }
    s
}
