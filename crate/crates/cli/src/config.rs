//! Run configuration: TOML document, defaults and validation.

use std::path::PathBuf;
use std::sync::Arc;

use nld_core::conditions::{KtildeSpec, Tolerances};
use nld_core::pairquad::QuadConfig;
use nld_core::solve::{ComplementData, ScalarFn, SolvePath};
use nld_core::{make_catalog_kernel, CatalogId, CatalogParams, ConeParams, Kernel, Perturbation, VariableOrder};
use serde::{Deserialize, Serialize};

use crate::expr::{Expr, Var};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("`{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelBlock {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_inner: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_outer: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cusp_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cones: Option<ConeParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable_order: Option<VariableOrder>,
}

impl KernelBlock {
    pub fn params(&self) -> CatalogParams {
        CatalogParams {
            dim: self.dim,
            alpha: self.alpha,
            beta: self.beta,
            cones: self.cones.clone(),
            perturbation: self.perturbation.clone(),
            truncation_radius: self.truncation_radius,
            variable_order: self.variable_order.clone(),
            r_inner: self.r_inner,
            r_outer: self.r_outer,
            cusp_b: self.cusp_b,
        }
    }

    fn resolved(id: CatalogId, p: &CatalogParams) -> KernelBlock {
        KernelBlock {
            id: id.as_str().to_string(),
            dim: p.dim,
            alpha: p.alpha,
            beta: p.beta,
            truncation_radius: p.truncation_radius,
            r_inner: p.r_inner,
            r_outer: p.r_outer,
            cusp_b: p.cusp_b,
            cones: p.cones.clone(),
            perturbation: p.perturbation.clone(),
            variable_order: p.variable_order.clone(),
        }
    }

    pub fn build(&self) -> Result<Kernel, ConfigError> {
        let id = CatalogId::parse(&self.id)
            .filter(|id| *id != CatalogId::Custom)
            .ok_or_else(|| invalid("kernel.id", format!("unknown catalog id `{}`", self.id)))?;
        make_catalog_kernel(id, &self.params()).map_err(|e| invalid(&kernel_key(&e.to_string()), e.to_string()))
    }
}

/// Best guess of the kernel key a core parameter error refers to.
fn kernel_key(msg: &str) -> String {
    for key in ["alpha", "beta", "dim", "truncation_radius", "r_inner", "r_outer", "cusp", "cone", "perturbation", "variable_order"] {
        if msg.starts_with(key) || msg.contains(&format!(" {key}")) {
            let k = match key {
                "cusp" => "cusp_b",
                "cone" => "cones",
                k => k,
            };
            return format!("kernel.{k}");
        }
    }
    "kernel".into()
}

fn d_halo() -> f64 {
    2.0
}
fn d_omega() -> [f64; 2] {
    [-1.0, 1.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshBlock {
    pub h: f64,
    #[serde(default = "d_halo")]
    pub halo: f64,
    #[serde(default = "d_omega")]
    pub omega: [f64; 2],
}

fn d_f() -> String {
    "0".into()
}
fn d_solver_tol() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemBlock {
    /// Source term in x (elliptic) or in t and x (time dependent).
    #[serde(default = "d_f")]
    pub f: String,
    /// Exterior data; in x, or in t and x for the time-dependent problem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
    /// Time derivative of g for the time-dependent problem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_dot: Option<String>,
    /// g vanishes farther than this from Omega.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_support_radius: Option<f64>,
    /// Exponent of a power singularity of g at a mesh node.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_singular_exponent: Option<f64>,
    /// Initial value for the time-dependent problem.
    #[serde(default = "d_f")]
    pub u0: String,
    #[serde(default)]
    pub path: SolvePath,
    #[serde(default = "d_solver_tol")]
    pub solver_tol: f64,
}

impl Default for ProblemBlock {
    fn default() -> Self {
        ProblemBlock {
            f: d_f(),
            g: None,
            g_dot: None,
            g_support_radius: None,
            g_singular_exponent: None,
            u0: d_f(),
            path: SolvePath::Auto,
            solver_tol: d_solver_tol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeBlock {
    #[serde(rename = "T")]
    pub t_end: f64,
    pub dt: f64,
    /// a(t, x, y) with 1/2 <= a <= 1; absent means a = 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulation: Option<String>,
}

fn d_samples() -> usize {
    1000
}
fn d_trials() -> usize {
    100_000
}
fn d_pairs() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyBlock {
    /// Mesh ladder; each study has its own default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hs: Option<Vec<f64>>,
    /// Order for the Ex8-based studies; defaults to kernel.alpha, then 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    /// Random vectors per certificate.
    #[serde(default = "d_samples")]
    pub samples: usize,
    /// Random trials per elementary inequality.
    #[serde(default = "d_trials")]
    pub trials: usize,
    /// Random function pairs for the truncation study.
    #[serde(default = "d_pairs")]
    pub pairs: usize,
}

impl Default for StudyBlock {
    fn default() -> Self {
        StudyBlock {
            hs: None,
            alpha: None,
            betas: None,
            deltas: None,
            samples: d_samples(),
            trials: d_trials(),
            pairs: d_pairs(),
        }
    }
}

pub const CONDITION_NAMES: [&str; 7] = ["L", "K", "Ktilde", "C", "E_alpha", "D", "P"];

fn d_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckBlock {
    /// Conditions whose failure is expected; a fail among them exits 0.
    #[serde(default)]
    pub expected_fail: Vec<String>,
    /// Conditions allowed to stay indeterminate.
    #[serde(default)]
    pub allow_indeterminate: Vec<String>,
    /// Comparison kernel for (K~); defaults to the catalog witness.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ktilde: Option<KtildeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_ref: Option<f64>,
    #[serde(default = "d_true")]
    pub e_alpha_form: bool,
    #[serde(default)]
    pub gram_trials: usize,
}

impl Default for CheckBlock {
    fn default() -> Self {
        CheckBlock {
            expected_fail: vec![],
            allow_indeterminate: vec![],
            ktilde: None,
            alpha_ref: None,
            e_alpha_form: true,
            gram_trials: 0,
        }
    }
}

fn d_out() -> String {
    "out".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "d_out")]
    pub dir: String,
    /// JSON report path; defaults to `<dir>/report.json`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    /// Directory for matrix dumps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump_matrices: Option<String>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            dir: d_out(),
            report: None,
            dump_matrices: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 picks the number of cores.
    #[serde(default)]
    pub threads: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<MeshBlock>,
    #[serde(default)]
    pub quad: QuadConfig,
    #[serde(default)]
    pub problem: ProblemBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeBlock>,
    #[serde(default)]
    pub study: StudyBlock,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub check: CheckBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config")
    }
}

const X: &[Var] = &[Var::X];
const TX: &[Var] = &[Var::T, Var::X];
const TXY: &[Var] = &[Var::T, Var::X, Var::Y];

fn expr(key: &str, src: &str, vars: &[Var]) -> Result<Expr, ConfigError> {
    Expr::parse(src, vars).map_err(|e| invalid(key, format!("{e} in `{src}`")))
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("{v} must be positive and finite")))
    }
}

fn ladder(key: &str, hs: &[f64]) -> Result<(), ConfigError> {
    if hs.is_empty() {
        return Err(invalid(key, "empty list"));
    }
    for h in hs {
        positive(key, *h)?;
    }
    Ok(())
}

/// Parses and validates a config document. Kernel parameters are replaced
/// by their resolved values so that the effective config is explicit.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    cfg.validate()?;
    if let Some(kb) = &cfg.kernel {
        let k = kb.build()?;
        cfg.kernel = Some(KernelBlock::resolved(k.id(), k.params()));
    }
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config(&text).map_err(|e| match e {
        ConfigError::Parse(m) => ConfigError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(kb) = &self.kernel {
            kb.build()?;
        }
        if let Some(m) = &self.mesh {
            positive("mesh.h", m.h)?;
            if m.h > 0.5 * (m.omega[1] - m.omega[0]) {
                return Err(invalid("mesh.h", format!("{} leaves no interior node", m.h)));
            }
            if !(m.halo >= 0.0 && m.halo.is_finite()) {
                return Err(invalid("mesh.halo", format!("{} must be nonnegative", m.halo)));
            }
            if !(m.omega[0] < m.omega[1]) || !m.omega.iter().all(|v| v.is_finite()) {
                return Err(invalid("mesh.omega", format!("{:?} is not an interval", m.omega)));
            }
        }
        self.quad
            .validate()
            .map_err(|e| invalid("quad", e.to_string()))?;
        let p = &self.problem;
        let time = self.time.is_some();
        expr("problem.f", &p.f, if time { TX } else { X })?;
        if let Some(g) = &p.g {
            expr("problem.g", g, if time { TX } else { X })?;
        }
        if let Some(g) = &p.g_dot {
            expr("problem.g_dot", g, TX)?;
        }
        expr("problem.u0", &p.u0, X)?;
        if let Some(r) = p.g_support_radius {
            positive("problem.g_support_radius", r)?;
        }
        if let Some(s) = p.g_singular_exponent {
            if !(s > -1.0) {
                return Err(invalid("problem.g_singular_exponent", format!("{s} must exceed -1")));
            }
        }
        positive("problem.solver_tol", p.solver_tol)?;
        if let Some(t) = &self.time {
            positive("time.T", t.t_end)?;
            positive("time.dt", t.dt)?;
            let n = (t.t_end / t.dt).round();
            if n < 1.0 || (n * t.dt - t.t_end).abs() > 1e-9 * t.t_end {
                return Err(invalid("time.dt", format!("T = {} is not a multiple of dt = {}", t.t_end, t.dt)));
            }
            if let Some(m) = &t.modulation {
                expr("time.modulation", m, TXY)?;
            }
        }
        let s = &self.study;
        if let Some(hs) = &s.hs {
            ladder("study.hs", hs)?;
        }
        if let Some(ds) = &s.deltas {
            ladder("study.deltas", ds)?;
        }
        if let Some(a) = s.alpha {
            if !(a > 0.0 && a < 2.0) {
                return Err(invalid("study.alpha", format!("alpha = {a} outside (0, 2)")));
            }
        }
        if let Some(bs) = &s.betas {
            if bs.is_empty() || bs.iter().any(|b| !(*b > -1.0)) {
                return Err(invalid("study.betas", "need a nonempty list of values > -1"));
            }
        }
        for (key, v) in [("study.samples", s.samples), ("study.trials", s.trials), ("study.pairs", s.pairs)] {
            if v == 0 {
                return Err(invalid(key, "must be at least 1"));
            }
        }
        let t = &self.tolerances;
        for (key, v) in [
            ("tolerances.ladder_rel", t.ladder_rel),
            ("tolerances.tol_c_rel", t.tol_c_rel),
            ("tolerances.tol_d", t.tol_d),
            ("tolerances.sym_rel", t.sym_rel),
        ] {
            positive(key, v)?;
        }
        if !(t.growth_factor > 1.0) {
            return Err(invalid("tolerances.growth_factor", "must exceed 1"));
        }
        if t.growth_steps == 0 {
            return Err(invalid("tolerances.growth_steps", "must be at least 1"));
        }
        for (key, list) in [
            ("check.expected_fail", &self.check.expected_fail),
            ("check.allow_indeterminate", &self.check.allow_indeterminate),
        ] {
            for name in list {
                if !CONDITION_NAMES.contains(&name.as_str()) {
                    return Err(invalid(key, format!("unknown condition `{name}` (known: {})", CONDITION_NAMES.join(", "))));
                }
            }
        }
        Ok(())
    }

    /// The effective config as TOML text.
    pub fn effective_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn kernel(&self) -> Result<Kernel, ConfigError> {
        self.kernel
            .as_ref()
            .ok_or_else(|| invalid("kernel", "this command needs a [kernel] block"))?
            .build()
    }

    pub fn mesh_block(&self) -> Result<&MeshBlock, ConfigError> {
        self.mesh
            .as_ref()
            .ok_or_else(|| invalid("mesh", "this command needs a [mesh] block"))
    }

    pub fn f_x(&self) -> Result<ScalarFn, ConfigError> {
        let e = expr("problem.f", &self.problem.f, X)?;
        Ok(Arc::new(move |x| e.at_x(x)))
    }

    pub fn complement(&self) -> Result<Option<ComplementData>, ConfigError> {
        let Some(src) = &self.problem.g else {
            return Ok(None);
        };
        let e = expr("problem.g", src, X)?;
        Ok(Some(ComplementData {
            g: Arc::new(move |x| e.at_x(x)),
            support_radius: self.problem.g_support_radius,
            singular_exponent: self.problem.g_singular_exponent,
        }))
    }

    pub fn time_expr(&self, key: &str, src: &str) -> Result<Expr, ConfigError> {
        expr(key, src, TX)
    }

    pub fn modulation_expr(&self) -> Result<Option<Expr>, ConfigError> {
        match self.time.as_ref().and_then(|t| t.modulation.as_ref()) {
            Some(m) => Ok(Some(expr("time.modulation", m, TXY)?)),
            None => Ok(None),
        }
    }

    pub fn u0_expr(&self) -> Result<Expr, ConfigError> {
        expr("problem.u0", &self.problem.u0, X)
    }

    /// Order for the Ex8-based studies.
    pub fn study_alpha(&self) -> f64 {
        self.study
            .alpha
            .or(self.kernel.as_ref().and_then(|k| k.alpha))
            .unwrap_or(1.0)
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(&self.output.dir)
    }

    pub fn report_path(&self) -> PathBuf {
        match &self.output.report {
            Some(r) => PathBuf::from(r),
            None => self.out_dir().join("report.json"),
        }
    }
}
