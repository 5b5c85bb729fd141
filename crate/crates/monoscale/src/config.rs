//! Experiment configuration (a single JSON document).

use std::path::{Path, PathBuf};

use monoscale_core::{
    check_epsilon, resolution_check, AnchorMode, AnchorRule, AuditPlan, BoxDomain, CellProfile,
    Family, Load, Mesh, ModulusSpec, MonotoneMapSpec, SolveOptions, XStructure,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config field `{field}`: {message}")]
    Field { field: String, message: String },
}

fn field(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Audit,
    Effective,
    Convergence,
    Corrector,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Audit => "audit",
            ExperimentKind::Effective => "effective",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::Corrector => "corrector",
        }
    }
}

/// Operator description; missing constants default to the family's tight values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub family: Family,
    pub profile: CellProfile,
    #[serde(default = "constant_structure")]
    pub x_structure: XStructure,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub modulus: Option<ModulusSpec>,
}

fn constant_structure() -> XStructure {
    XStructure::Constant
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    /// Elements per side of the periodic cell mesh.
    pub cell_n: usize,
    /// Elements per side of the macroscopic mesh.
    pub macro_n: usize,
    pub min_cells_per_period: usize,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            cell_n: 64,
            macro_n: 256,
            min_cells_per_period: monoscale_core::DEFAULT_MIN_CELLS_PER_PERIOD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tau: Option<f64>,
    pub tol: f64,
    pub max_outer: usize,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub affine_shortcut: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolveOptions::default();
        SolverConfig {
            tau: None,
            tol: d.tol,
            max_outer: 20_000,
            cg_tol: d.cg_tol,
            cg_max_iter: d.cg_max_iter,
            affine_shortcut: true,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            tau: self.tau,
            tol: self.tol,
            max_outer: self.max_outer,
            cg_tol: self.cg_tol,
            cg_max_iter: self.cg_max_iter,
            affine_shortcut: self.affine_shortcut,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    /// Samples of the pointwise structure audit of `a`.
    pub structure_samples: usize,
    pub xi_pairs: usize,
    pub x_pairs: usize,
    pub xi_range: f64,
    /// Tolerances are `1e-6 * scale`.
    pub scale: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        let p = AuditPlan::default();
        AuditConfig {
            structure_samples: 1000,
            xi_pairs: p.xi_pairs,
            x_pairs: p.x_pairs,
            xi_range: p.xi_range,
            scale: p.scale,
        }
    }
}

impl AuditConfig {
    pub fn plan(&self, seed: u64) -> AuditPlan {
        AuditPlan {
            xi_pairs: self.xi_pairs,
            x_pairs: self.x_pairs,
            xi_range: self.xi_range,
            seed,
            scale: self.scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EffectiveConfig {
    /// Mean gradients, one vector of `dim` components each.
    pub xi: Vec<Vec<f64>>,
    /// Macroscopic points; empty means the domain centroid.
    pub points: Vec<Vec<f64>>,
    /// Midpoint-rule nodes of the 1D flux-constancy oracle.
    pub oracle_quadrature: usize,
    pub oracle_tolerance: f64,
}

impl Default for EffectiveConfig {
    fn default() -> Self {
        EffectiveConfig {
            xi: vec![vec![-2.0], vec![0.0], vec![1.0], vec![5.0]],
            points: Vec::new(),
            oracle_quadrature: 4096,
            oracle_tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TableConfig {
    /// Knots cover `[-range, range]` per axis.
    pub range: f64,
    pub step: f64,
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig {
            range: 4.0,
            step: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub anchor_mode: AnchorMode,
    pub anchor_rule: AnchorRule,
    /// Largest admissible `e_corr(ε_min) / e_corr(ε_max)`.
    pub max_corr_ratio: f64,
    /// Largest admissible relative spread of `e_plain` over the sweep.
    pub max_plain_spread: f64,
    /// Tabulation of `b` for nonlinear maps.
    pub table: TableConfig,
    /// Continuous maps are frozen on `k` boxes per side for the homogenized solve.
    pub freeze_k: usize,
    /// Write node values and corrected gradients as CSV.
    pub dump_fields: bool,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            anchor_mode: AnchorMode::Gamma,
            anchor_rule: AnchorRule::Center,
            max_corr_ratio: 0.35,
            max_plain_spread: 0.2,
            table: TableConfig::default(),
            freeze_k: 8,
            dump_fields: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub dim: usize,
    #[serde(default)]
    pub domain: Option<DomainConfig>,
    pub operator: OperatorConfig,
    #[serde(default)]
    pub mesh: MeshConfig,
    /// Reciprocals of integers, strictly decreasing.
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default = "unit_load")]
    pub load: Load,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub audit: AuditConfig,
    #[serde(default)]
    pub effective: EffectiveConfig,
    #[serde(default)]
    pub study: StudyConfig,
}

fn unit_load() -> Load {
    Load::Constant { value: 1.0 }
}

fn vec2(dim: usize, v: &[f64], name: &str) -> Result<[f64; 2], ConfigError> {
    if v.len() != dim {
        return Err(field(
            name,
            format!("expected {dim} components, got {}", v.len()),
        ));
    }
    if v.iter().any(|c| !c.is_finite()) {
        return Err(field(name, "components must be finite"));
    }
    let mut out = [0.0; 2];
    out[..dim].copy_from_slice(v);
    Ok(out)
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn domain(&self) -> Result<BoxDomain, ConfigError> {
        match &self.domain {
            None => Ok(BoxDomain::unit(self.dim)),
            Some(d) => {
                let lo = vec2(self.dim, &d.lo, "domain.lo")?;
                let hi = vec2(self.dim, &d.hi, "domain.hi")?;
                BoxDomain::new(self.dim, lo, hi).map_err(|e| field("domain", e.to_string()))
            }
        }
    }

    /// The operator with defaults resolved.
    pub fn spec(&self) -> Result<MonotoneMapSpec, ConfigError> {
        let o = &self.operator;
        let mut spec = MonotoneMapSpec::new(self.dim, o.family.clone(), o.profile.clone())
            .with_domain(self.domain()?)
            .with_x_structure(o.x_structure.clone());
        if let Some(a) = o.alpha {
            spec.alpha = a;
        }
        if let Some(b) = o.beta {
            spec.beta = b;
        }
        if o.modulus.is_some() {
            spec.modulus = o.modulus;
        }
        spec.validate()
            .map_err(|e| field("operator", e.to_string()))?;
        Ok(spec)
    }

    pub fn macro_mesh(&self) -> Result<Mesh, ConfigError> {
        Mesh::macro_mesh(self.domain()?, self.mesh.macro_n)
            .map_err(|e| field("mesh.macro_n", e.to_string()))
    }

    pub fn cell_mesh(&self) -> Result<Mesh, ConfigError> {
        monoscale_core::build_cell_mesh(self.dim, self.mesh.cell_n)
            .map_err(|e| field("mesh.cell_n", e.to_string()))
    }

    pub fn xi_list(&self) -> Result<Vec<[f64; 2]>, ConfigError> {
        self.effective
            .xi
            .iter()
            .map(|v| vec2(self.dim, v, "effective.xi"))
            .collect()
    }

    pub fn points(&self) -> Result<Vec<[f64; 2]>, ConfigError> {
        if self.effective.points.is_empty() {
            return Ok(vec![self.domain()?.centroid()]);
        }
        self.effective
            .points
            .iter()
            .map(|v| vec2(self.dim, v, "effective.points"))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.dim != 1 && self.dim != 2 {
            return Err(field("dim", "must be 1 or 2"));
        }
        let spec = self.spec()?;
        self.cell_mesh()?;
        let mesh = self.macro_mesh()?;
        self.solver
            .options()
            .validate(spec.alpha, spec.beta)
            .map_err(|e| field("solver", e.to_string()))?;
        if !self.load.is_finite() {
            return Err(field("load", "coefficients must be finite"));
        }
        if self.audit.structure_samples == 0 {
            return Err(field("audit.structure_samples", "must be positive"));
        }
        if !(self.audit.scale > 0.0 && self.audit.xi_range > 0.0) {
            return Err(field("audit", "scale and xi_range must be positive"));
        }
        match self.kind {
            ExperimentKind::Effective => {
                if self.effective.xi.is_empty() {
                    return Err(field("effective.xi", "no gradients given"));
                }
                self.xi_list()?;
                self.points()?;
            }
            ExperimentKind::Convergence | ExperimentKind::Corrector => {
                if self.epsilons.is_empty() {
                    return Err(field("epsilons", "no values given"));
                }
                for (i, &e) in self.epsilons.iter().enumerate() {
                    check_epsilon(e).map_err(|_| {
                        field(
                            "epsilons",
                            format!("{e} is not the reciprocal of an integer"),
                        )
                    })?;
                    if i > 0 && e >= self.epsilons[i - 1] {
                        return Err(field("epsilons", "must be strictly decreasing"));
                    }
                    resolution_check(&mesh, e, self.mesh.min_cells_per_period)
                        .map_err(|err| field("mesh.macro_n", err.to_string()))?;
                }
                let t = &self.study.table;
                if !(t.range > 0.0 && t.step > 0.0 && t.step <= t.range) {
                    return Err(field("study.table", "need 0 < step <= range"));
                }
                if self.study.freeze_k == 0 {
                    return Err(field("study.freeze_k", "must be positive"));
                }
            }
            ExperimentKind::Audit => {}
        }
        Ok(())
    }

    /// Built-in configuration used by subcommands run without `--config`.
    pub fn builtin(kind: ExperimentKind) -> Self {
        let linear_two_phase = OperatorConfig {
            family: Family::linear(),
            profile: CellProfile::two_phase(1.0, 3.0),
            x_structure: XStructure::Constant,
            alpha: None,
            beta: None,
            modulus: None,
        };
        let mut cfg = ExperimentConfig {
            kind,
            dim: 1,
            domain: None,
            operator: linear_two_phase,
            mesh: MeshConfig::default(),
            epsilons: Vec::new(),
            load: unit_load(),
            solver: SolverConfig::default(),
            seed: 0,
            output_dir: None,
            audit: AuditConfig::default(),
            effective: EffectiveConfig::default(),
            study: StudyConfig::default(),
        };
        match kind {
            ExperimentKind::Audit => {
                cfg.operator = OperatorConfig {
                    family: Family::NonlinearIsotropic,
                    profile: CellProfile::Constant { value: 1.0 },
                    x_structure: XStructure::Constant,
                    alpha: Some(1.0),
                    beta: Some(2.0),
                    modulus: None,
                };
            }
            ExperimentKind::Effective => {}
            ExperimentKind::Convergence | ExperimentKind::Corrector => {
                cfg.mesh.macro_n = 1024;
                cfg.epsilons = vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
            }
        }
        cfg
    }
}
