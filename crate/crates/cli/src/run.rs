//! Command execution and the exit-code contract.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nld_core::analysis::{
    boundary_regularity_sweep, convergence_study, energy_study, estimate_garding, estimate_poincare,
    max_principle_probe, sector_constant, truncation_study, verify_elementary_inequalities, FormMatrices,
};
use nld_core::conditions::{
    catalog_witness, check_kernel, condition_table, table_csv, CheckOptions, ConditionReport, Verdict, Verdicts,
};
use nld_core::mesh::{build_mesh, Mesh};
use nld_core::solve::{
    solve_elliptic, solve_parabolic, EllipticProblem, InitialData, Modulation, ParabolicProblem, TimeComplementData,
};
use nld_core::{Kernel, NldError, Point};
use serde::Serialize;

use crate::config::{ConfigError, RunConfig, CONDITION_NAMES};
use crate::expr::{self, Var};
use crate::output::{matrix_csv, num, opt, vector_csv, write_atomic};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

/// Slack allowed on random-vector certificates.
pub const CERT_SLACK: f64 = 1e-9;
/// Largest admissible energy-ratio growth per mesh halving.
pub const ENERGY_GROWTH_MAX: f64 = 1.1;
pub const CONVERGENCE_RATE_MIN: f64 = 0.4;
pub const SHAPE_RATIO_REL: f64 = 0.02;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Core(#[from] NldError),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Io { .. } => EXIT_CONFIG,
            RunError::Core(e) => match e {
                NldError::UnknownKernel(_) | NldError::Parameter(_) | NldError::Mesh(_) | NldError::Precondition(_) => {
                    EXIT_CONFIG
                }
                NldError::Quadrature(_)
                | NldError::NonFinite(_)
                | NldError::Linalg(_)
                | NldError::KernelNontrivial(_)
                | NldError::Tail(_) => EXIT_NUMERIC,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Study {
    Garding,
    Poincare,
    Sector,
    Maxprin,
    BoundaryRegularity,
    Convergence,
    Lemmas,
    Truncation,
    Energy,
}

impl Study {
    pub const ALL: [Study; 9] = [
        Study::Garding,
        Study::Poincare,
        Study::Sector,
        Study::Maxprin,
        Study::BoundaryRegularity,
        Study::Convergence,
        Study::Lemmas,
        Study::Truncation,
        Study::Energy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Study::Garding => "garding",
            Study::Poincare => "poincare",
            Study::Sector => "sector",
            Study::Maxprin => "maxprin",
            Study::BoundaryRegularity => "boundary-regularity",
            Study::Convergence => "convergence",
            Study::Lemmas => "lemmas",
            Study::Truncation => "truncation",
            Study::Energy => "energy",
        }
    }

    pub fn parse(s: &str) -> Option<Study> {
        Study::ALL.into_iter().find(|st| st.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    CheckKernel,
    Table,
    Solve,
    SolveParabolic,
    Study(Study),
}

/// Exit code plus one-line notes for the terminal.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub code: i32,
    pub notes: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

impl Outcome {
    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    fn escalate(&mut self, code: i32) {
        if self.code == EXIT_OK || (code != EXIT_OK && code < self.code) {
            self.code = code;
        }
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    out: Outcome,
}

impl Ctx<'_> {
    fn write(&mut self, path: &Path, text: &str) -> Result<(), RunError> {
        write_atomic(path, text.as_bytes()).map_err(|e| RunError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        self.out.artifacts.push(path.to_path_buf());
        Ok(())
    }

    fn artifact(&mut self, name: &str, text: &str) -> Result<(), RunError> {
        let p = self.cfg.out_dir().join(name);
        self.write(&p, text)
    }

    fn report<T: Serialize>(&mut self, value: &T) -> Result<(), RunError> {
        let mut s = serde_json::to_string_pretty(value).expect("report serializes");
        s.push('\n');
        let p = self.cfg.report_path();
        self.write(&p, &s)
    }

    fn dump(&mut self, name: &str, text: String) -> Result<(), RunError> {
        if let Some(dir) = &self.cfg.output.dump_matrices {
            let p = PathBuf::from(dir).join(name);
            self.write(&p, &text)?;
        }
        Ok(())
    }

    fn dump_forms(&mut self, h: f64, fm: &FormMatrices) -> Result<(), RunError> {
        if self.cfg.output.dump_matrices.is_some() {
            let tag = format!("h{}", (1.0 / h).round());
            self.dump(&format!("a_int_{tag}.csv"), matrix_csv(&fm.a_int))?;
            self.dump(&format!("mass_{tag}.csv"), matrix_csv(&fm.mass))?;
            self.dump(&format!("s_full_{tag}.csv"), matrix_csv(&fm.s_full))?;
        }
        Ok(())
    }
}

/// Runs `cmd` on a worker pool of `cfg.threads` threads.
pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Outcome, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| RunError::Config(ConfigError::Invalid {
            key: "threads".into(),
            message: e.to_string(),
        }))?;
    pool.install(|| {
        let mut ctx = Ctx {
            cfg,
            out: Outcome::default(),
        };
        match cmd {
            Command::CheckKernel => check(&mut ctx)?,
            Command::Table => table(&mut ctx)?,
            Command::Solve => solve(&mut ctx)?,
            Command::SolveParabolic => parabolic(&mut ctx)?,
            Command::Study(s) => study(&mut ctx, s)?,
        }
        Ok(ctx.out)
    })
}

fn omega_halo(cfg: &RunConfig) -> ((f64, f64), f64) {
    match &cfg.mesh {
        Some(m) => ((m.omega[0], m.omega[1]), m.halo),
        None => ((-1.0, 1.0), 1.0),
    }
}

fn config_mesh(cfg: &RunConfig) -> Result<Mesh, RunError> {
    let m = cfg.mesh_block()?;
    Ok(build_mesh((m.omega[0], m.omega[1]), m.h, m.halo)?)
}

fn default_h(cfg: &RunConfig) -> f64 {
    cfg.mesh.as_ref().map(|m| m.h).unwrap_or(1.0 / 32.0)
}

fn ladder(cfg: &RunConfig, dflt: &[f64]) -> Vec<f64> {
    cfg.study.hs.clone().unwrap_or_else(|| dflt.to_vec())
}

/// h = 1/16 .. 1/256.
pub fn standard_ladder() -> Vec<f64> {
    (4..=8).map(|k| 2f64.powi(-k)).collect()
}

// ---------------------------------------------------------------- check-kernel

#[derive(Serialize)]
struct Constants {
    #[serde(rename = "A")]
    a: Option<f64>,
    #[serde(rename = "A1")]
    a1: Option<f64>,
    #[serde(rename = "A2")]
    a2: f64,
    #[serde(rename = "D")]
    d: Option<f64>,
    lambda: Option<f64>,
    #[serde(rename = "C_P")]
    c_p: Option<f64>,
    cancel_inf: f64,
}

#[derive(Serialize)]
struct KernelReport<'a> {
    kernel: &'a str,
    verdicts: &'a Verdicts,
    constants: Constants,
    probes: &'a [Point],
    tolerances: &'a nld_core::conditions::Tolerances,
    expected_fail: &'a [String],
    exit_code: i32,
    details: &'a ConditionReport,
}

fn verdict_list(v: &Verdicts) -> [(&'static str, Verdict); 7] {
    let list = [v.l, v.k, v.ktilde, v.c, v.e_alpha, v.d, v.p];
    let mut out = [("", Verdict::Holds); 7];
    for (i, name) in CONDITION_NAMES.iter().enumerate() {
        out[i] = (name, list[i]);
    }
    out
}

/// Poincare constant on the configured (or default) mesh for 1D kernels.
fn poincare_constant(k: &Kernel, cfg: &RunConfig) -> Result<Option<f64>, RunError> {
    if k.dim() != 1 {
        return Ok(None);
    }
    let (omega, halo) = omega_halo(cfg);
    let mesh = build_mesh(omega, default_h(cfg), halo)?;
    let fm = FormMatrices::assemble(k, &mesh, &cfg.quad)?;
    Ok(estimate_poincare(&fm, mesh.h, cfg.study.samples, cfg.seed).ok().map(|p| p.c_p))
}

fn check(ctx: &mut Ctx) -> Result<(), RunError> {
    let cfg = ctx.cfg;
    let k = cfg.kernel()?;
    let opts = CheckOptions {
        seed: cfg.seed,
        ktilde: Some(cfg.check.ktilde.clone().unwrap_or_else(|| catalog_witness(&k))),
        alpha_ref: cfg.check.alpha_ref,
        tolerances: cfg.tolerances.clone(),
        e_alpha_form: cfg.check.e_alpha_form,
        gram_trials: cfg.check.gram_trials,
    };
    let r = check_kernel(&k, &opts)?;
    let c_p = if r.verdicts.l.holds() { poincare_constant(&k, cfg)? } else { None };
    let lambda = if r.e_alpha.tier1 {
        Some(r.e_alpha.lambda_pt)
    } else {
        r.e_alpha.lambda_form.last().map(|p| p.1)
    };
    let mut code = EXIT_OK;
    for (name, v) in verdict_list(&r.verdicts) {
        let listed = |l: &[String]| l.iter().any(|s| s == name);
        let c = match v {
            Verdict::Holds => EXIT_OK,
            Verdict::Fails if listed(&cfg.check.expected_fail) => EXIT_OK,
            Verdict::Fails => EXIT_VERDICT,
            Verdict::Indeterminate if listed(&cfg.check.allow_indeterminate) => EXIT_OK,
            Verdict::Indeterminate => EXIT_NUMERIC,
        };
        if c != EXIT_OK {
            ctx.out.note(format!("{name}: {v:?}"));
        }
        ctx.out.escalate(c);
        code = ctx.out.code;
    }
    let report = KernelReport {
        kernel: &r.kernel,
        verdicts: &r.verdicts,
        constants: Constants {
            a: r.k.value.is_finite().then_some(r.k.value),
            a1: r.ktilde.a1,
            a2: r.ktilde.a2,
            d: r.d.d,
            lambda,
            c_p,
            cancel_inf: r.c.cancel_inf,
        },
        probes: &r.probes,
        tolerances: &r.tolerances,
        expected_fail: &cfg.check.expected_fail,
        exit_code: code,
        details: &r,
    };
    ctx.report(&report)
}

// ---------------------------------------------------------------- table

fn table(ctx: &mut Ctx) -> Result<(), RunError> {
    let rows = condition_table(ctx.cfg.seed)?;
    ctx.artifact("table.csv", &table_csv(&rows))?;
    for r in &rows {
        for d in &r.indeterminate {
            ctx.out.note(format!("{}: indeterminate {d}", r.example));
            ctx.out.escalate(EXIT_NUMERIC);
        }
    }
    ctx.report(&rows)
}

// ---------------------------------------------------------------- solve

#[derive(Serialize)]
struct SolveReport<'a> {
    kernel: &'a str,
    h: f64,
    nodes: usize,
    interior_nodes: usize,
    path_used: &'a str,
    gamma_used: Option<f64>,
    residual: f64,
    residual_independent: Option<f64>,
    seminorm_v: f64,
    energy_ratio: Option<f64>,
    scale: f64,
    pivot_ratio: f64,
    warnings: &'a [String],
}

fn solve(ctx: &mut Ctx) -> Result<(), RunError> {
    let cfg = ctx.cfg;
    let mesh = config_mesh(cfg)?;
    let mut p = EllipticProblem::new(cfg.kernel()?, mesh.clone(), cfg.f_x()?);
    p.g = cfg.complement()?;
    p.path = cfg.problem.path;
    p.solver_tol = cfg.problem.solver_tol;
    p.quad = cfg.quad;
    let s = solve_elliptic(&p)?;
    let mut csv = String::from("x,u\n");
    for (x, u) in mesh.nodes.iter().zip(&s.u.coeffs) {
        csv.push_str(&format!("{},{}\n", num(*x), num(*u)));
    }
    ctx.artifact("sol.csv", &csv)?;
    ctx.dump("a_int.csv", matrix_csv(&s.system.a_int))?;
    ctx.dump("a_ext.csv", matrix_csv(&s.system.a_ext))?;
    ctx.dump("mass.csv", matrix_csv(&s.system.mass))?;
    ctx.dump("load.csv", vector_csv(&s.system.load))?;
    ctx.dump("lift.csv", vector_csv(&s.system.lift))?;
    for w in &s.warnings {
        ctx.out.note(format!("warning: {w}"));
    }
    ctx.report(&SolveReport {
        kernel: p.kernel.label(),
        h: mesh.h,
        nodes: mesh.node_count(),
        interior_nodes: mesh.interior_count(),
        path_used: s.path_used.as_str(),
        gamma_used: s.gamma_used,
        residual: s.residual,
        residual_independent: s.residual_independent,
        seminorm_v: s.seminorm_v,
        energy_ratio: s.energy_ratio,
        scale: s.scale,
        pivot_ratio: s.pivot_ratio,
        warnings: &s.warnings,
    })
}

#[derive(Serialize)]
struct EnergyTerms {
    final_norm_sq: f64,
    initial_norm_sq: f64,
    dissipation: f64,
    form_sum: f64,
    source_sum: f64,
    lhs: f64,
    rhs: f64,
    relative_defect: f64,
}

#[derive(Serialize)]
struct ParabolicReport<'a> {
    kernel: &'a str,
    h: f64,
    dt: f64,
    #[serde(rename = "T")]
    t_end: f64,
    steps: usize,
    energy: EnergyTerms,
    l2_norms: &'a [f64],
    l2_nonincreasing: bool,
}

fn parabolic(ctx: &mut Ctx) -> Result<(), RunError> {
    let cfg = ctx.cfg;
    let time = cfg.time.as_ref().ok_or_else(|| ConfigError::Invalid {
        key: "time".into(),
        message: "solve-parabolic needs a [time] block".into(),
    })?;
    let mesh = config_mesh(cfg)?;
    let mut p = ParabolicProblem::new(cfg.kernel()?, mesh.clone(), time.t_end, time.dt);
    p.quad = cfg.quad;
    p.modulation = match cfg.modulation_expr()? {
        None => Modulation::None,
        Some(e) if e.mentions(Var::X) || e.mentions(Var::Y) => Modulation::Field(Arc::new(move |t, x, y| {
            e.eval(&expr::Point { x: x[0], y: y[0], t })
        })),
        Some(e) => Modulation::Time(Arc::new(move |t| e.at_tx(t, 0.0))),
    };
    let u0 = cfg.u0_expr()?;
    p.u0 = InitialData::Function(Arc::new(move |x| u0.at_x(x)));
    let f = cfg.time_expr("problem.f", &cfg.problem.f)?;
    p.f = Arc::new(move |t, x| f.at_tx(t, x));
    if let Some(src) = &cfg.problem.g {
        let g = cfg.time_expr("problem.g", src)?;
        let g_dot = match &cfg.problem.g_dot {
            Some(d) => {
                let e = cfg.time_expr("problem.g_dot", d)?;
                Some(Arc::new(move |t: f64, x: f64| e.at_tx(t, x)) as nld_core::solve::SpaceTimeFn)
            }
            None => None,
        };
        p.g = Some(TimeComplementData {
            g: Arc::new(move |t, x| g.at_tx(t, x)),
            g_dot,
            support_radius: cfg.problem.g_support_radius,
        });
    }
    let tr = solve_parabolic(&p)?;
    let mut csv = String::from("t,x,u\n");
    for (t, u) in tr.times.iter().zip(&tr.states) {
        for (x, v) in mesh.nodes.iter().zip(&u.coeffs) {
            csv.push_str(&format!("{},{},{}\n", num(*t), num(*x), num(*v)));
        }
    }
    ctx.artifact("traj.csv", &csv)?;
    if ctx.cfg.output.dump_matrices.is_some() {
        let fm = FormMatrices::assemble(&p.kernel, &mesh, &p.quad)?;
        ctx.dump_forms(mesh.h, &fm)?;
    }
    let e = &tr.energy;
    ctx.report(&ParabolicReport {
        kernel: p.kernel.label(),
        h: mesh.h,
        dt: time.dt,
        t_end: time.t_end,
        steps: tr.times.len() - 1,
        energy: EnergyTerms {
            final_norm_sq: e.final_norm_sq,
            initial_norm_sq: e.initial_norm_sq,
            dissipation: e.dissipation,
            form_sum: e.form_sum,
            source_sum: e.source_sum,
            lhs: e.lhs(),
            rhs: e.rhs(),
            relative_defect: e.relative_defect(),
        },
        l2_norms: &tr.l2_norms,
        l2_nonincreasing: tr.l2_norms.windows(2).all(|w| w[1] <= w[0]),
    })
}

// ---------------------------------------------------------------- studies

fn study(ctx: &mut Ctx, s: Study) -> Result<(), RunError> {
    let cfg = ctx.cfg;
    let csv_name = format!("{}.csv", s.name());
    match s {
        Study::Garding | Study::Poincare | Study::Sector => {
            let k = cfg.kernel()?;
            let (omega, halo) = omega_halo(cfg);
            let mut csv = match s {
                Study::Garding => "h,gamma_star,certificate_min,samples\n",
                Study::Poincare => "h,c_p,lambda_min,certificate_min,samples\n",
                _ => "h,sector_k,pairs_used,pairs_skipped\n",
            }
            .to_string();
            let mut rows = Vec::new();
            for h in ladder(cfg, &[default_h(cfg)]) {
                let mesh = build_mesh(omega, h, halo)?;
                let fm = FormMatrices::assemble(&k, &mesh, &cfg.quad)?;
                ctx.dump_forms(mesh.h, &fm)?;
                let n = cfg.study.samples;
                match s {
                    Study::Garding => {
                        let g = estimate_garding(&fm, mesh.h, n, cfg.seed)?;
                        if g.certificate_min < -CERT_SLACK {
                            ctx.out.note(format!("h = {}: Garding certificate {}", g.h, g.certificate_min));
                            ctx.out.escalate(EXIT_VERDICT);
                        }
                        csv.push_str(&format!("{},{},{},{}\n", num(g.h), num(g.gamma_star), num(g.certificate_min), g.samples));
                        rows.push(serde_json::to_value(&g).unwrap());
                    }
                    Study::Poincare => match estimate_poincare(&fm, mesh.h, n, cfg.seed) {
                        Ok(p) => {
                            if p.certificate_min < -CERT_SLACK {
                                ctx.out.note(format!("h = {}: Poincare certificate {}", p.h, p.certificate_min));
                                ctx.out.escalate(EXIT_VERDICT);
                            }
                            csv.push_str(&format!(
                                "{},{},{},{},{}\n",
                                num(p.h),
                                num(p.c_p),
                                num(p.lambda_min),
                                num(p.certificate_min),
                                p.samples
                            ));
                            rows.push(serde_json::to_value(&p).unwrap());
                        }
                        Err(NldError::Precondition(m)) => {
                            ctx.out.note(format!("h = {}: {m}", mesh.h));
                            ctx.out.escalate(EXIT_VERDICT);
                            csv.push_str(&format!("{},,,,{n}\n", num(mesh.h)));
                        }
                        Err(e) => return Err(e.into()),
                    },
                    _ => {
                        let sc = sector_constant(&fm, mesh.h, n, cfg.seed, None);
                        if !sc.sector_k.is_finite() {
                            ctx.out.escalate(EXIT_NUMERIC);
                        }
                        csv.push_str(&format!("{},{},{},{}\n", num(sc.h), num(sc.sector_k), sc.pairs_used, sc.pairs_skipped));
                        rows.push(serde_json::to_value(&sc).unwrap());
                    }
                }
            }
            ctx.artifact(&csv_name, &csv)?;
            ctx.report(&rows)
        }
        Study::Maxprin => {
            let k = cfg.kernel()?;
            let (omega, halo) = omega_halo(cfg);
            let f = cfg.f_x()?;
            let mut csv = String::from("h,sup_u,scale,tol,holds\n");
            let mut rows = Vec::new();
            for h in ladder(cfg, &[1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0]) {
                let mesh = build_mesh(omega, h, halo)?;
                let m = max_principle_probe(&k, &mesh, f.clone(), &cfg.quad)?;
                if !m.holds {
                    ctx.out.note(format!("h = {}: sup u = {} above tolerance", m.h, m.sup_u));
                    ctx.out.escalate(EXIT_VERDICT);
                }
                csv.push_str(&format!("{},{},{},{},{}\n", num(m.h), num(m.sup_u), num(m.scale), num(m.tol), m.holds));
                rows.push(m);
            }
            ctx.artifact(&csv_name, &csv)?;
            ctx.report(&rows)
        }
        Study::BoundaryRegularity => {
            let alpha = cfg.study_alpha();
            let crit = 0.5 * (alpha - 1.0);
            let betas = cfg.study.betas.clone().unwrap_or_else(|| {
                [-0.35, -0.25, -0.15, 0.15, 0.25, 0.35].iter().map(|d| crit + d).collect()
            });
            let r = boundary_regularity_sweep(alpha, &betas, &ladder(cfg, &standard_ladder()), &cfg.quad)?;
            let mut csv = String::from("beta,h,seminorm,growth_factor,classification\n");
            for row in &r.rows {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    num(row.beta),
                    num(row.h),
                    num(row.seminorm),
                    opt(row.growth_factor),
                    row.classification
                ));
            }
            for (beta, finite) in &r.verdicts {
                if *finite != (*beta > crit) {
                    ctx.out.note(format!("beta = {beta}: classified {}", if *finite { "finite" } else { "divergent" }));
                    ctx.out.escalate(EXIT_VERDICT);
                }
            }
            ctx.artifact(&csv_name, &csv)?;
            ctx.report(&r)
        }
        Study::Convergence => {
            let c = convergence_study(cfg.study_alpha(), &ladder(cfg, &standard_ladder()), &cfg.quad)?;
            let mut csv = String::from("h,shape_error,self_error,ratio\n");
            for r in &c.rows {
                csv.push_str(&format!("{},{},{},{}\n", num(r.h), num(r.shape_error), opt(r.self_error), num(r.ratio)));
            }
            let fine = c.rows.last().map(|r| r.ratio).unwrap_or(f64::NAN);
            let ok = c.monotone
                && c.shape_rate > CONVERGENCE_RATE_MIN
                && c.self_rate > CONVERGENCE_RATE_MIN
                && (fine - c.ratio_exact).abs() <= SHAPE_RATIO_REL * c.ratio_exact;
            if !ok {
                ctx.out.note(format!(
                    "monotone = {}, rates {} / {}, ratio {fine} vs {}",
                    c.monotone, c.shape_rate, c.self_rate, c.ratio_exact
                ));
                ctx.out.escalate(EXIT_VERDICT);
            }
            ctx.artifact(&csv_name, &csv)?;
            ctx.report(&c)
        }
        Study::Lemmas => {
            let c = verify_elementary_inequalities(cfg.study.trials, cfg.seed);
            let csv = format!(
                "lemma,trials,counterexamples\nratio_inequality,{t},{}\nratio_inequality_sym,{t},{}\nlog_inequality,{t},{}\nconvolution_inequality,{t},{}\n",
                c.ratio_inequality,
                c.ratio_inequality_sym,
                c.log_inequality,
                c.convolution_inequality,
                t = c.trials
            );
            if c.counterexamples() > 0 {
                for w in &c.witnesses {
                    ctx.out.note(w.clone());
                }
                ctx.out.escalate(EXIT_VERDICT);
            }
            ctx.artifact(&csv_name, &csv)?;
            ctx.report(&c)
        }
        Study::Truncation => {
            let k = cfg.kernel()?;
            let (omega, halo) = omega_halo(cfg);
            let mesh = build_mesh(omega, default_h(cfg), halo)?;
            let deltas = cfg
                .study
                .deltas
                .clone()
                .unwrap_or_else(|| (4..=10).map(|j| 2f64.powi(-j)).collect());
            let t = truncation_study(&k, &mesh, &deltas, cfg.study.pairs, cfg.seed, &cfg.quad)?;
            let mut csv = String::from("pair,delta,gap\n");
            for (i, g) in t.gaps.iter().enumerate() {
                for (d, v) in t.deltas.iter().zip(g) {
                    csv.push_str(&format!("{i},{},{}\n", num(*d), num(*v)));
                }
            }
            if !t.monotone {
                ctx.out.note("gaps are not monotone in delta");
                ctx.out.escalate(EXIT_VERDICT);
            }
            ctx.artifact(&csv_name, &csv)?;
            ctx.report(&t)
        }
        Study::Energy => {
            let k = cfg.kernel()?;
            let (omega, halo) = omega_halo(cfg);
            let rows = energy_study(
                &k,
                omega,
                halo,
                cfg.f_x()?,
                cfg.complement()?,
                &ladder(cfg, &standard_ladder()),
                &cfg.quad,
            )?;
            let mut csv = String::from("h,energy_ratio,growth\n");
            for r in &rows {
                csv.push_str(&format!("{},{},{}\n", num(r.h), num(r.energy_ratio), opt(r.growth)));
                if r.growth.is_some_and(|g| g > ENERGY_GROWTH_MAX) {
                    ctx.out.note(format!("h = {}: energy ratio grew by {:?}", r.h, r.growth));
                    ctx.out.escalate(EXIT_VERDICT);
                }
            }
            ctx.artifact(&csv_name, &csv)?;
            ctx.report(&rows)
        }
    }
}
