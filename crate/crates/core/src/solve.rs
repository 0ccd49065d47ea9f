//! Elliptic solves with exterior data and the implicit Euler scheme for the
//! time-dependent problem.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, assemble_load, assemble_mass, form_action, split_columns, Assembly};
use crate::error::{NldError, Result};
use crate::kernel::{Kernel, Point};
use crate::linalg::{min_generalized_eigenvalue, symmetric_part, Lu};
use crate::mesh::{quasi_interpolate, DiscreteFunction, Mesh};
use crate::pairquad::QuadConfig;
use crate::quadrature::gauss;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type ModulationFn = Arc<dyn Fn(f64, &Point, &Point) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolvePath {
    #[default]
    Auto,
    Coercive,
    Fredholm,
}

impl SolvePath {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolvePath::Auto => "auto",
            SolvePath::Coercive => "coercive",
            SolvePath::Fredholm => "fredholm",
        }
    }
}

/// Data prescribed on the complement of Omega.
#[derive(Clone)]
pub struct ComplementData {
    pub g: ScalarFn,
    /// g vanishes at distance > support_radius from Omega.
    pub support_radius: Option<f64>,
    /// Exponent p of a |x - x0|^p singularity at a node, for the local-mean
    /// fallback of the interpolant.
    pub singular_exponent: Option<f64>,
}

impl ComplementData {
    pub fn new(g: ScalarFn) -> Self {
        ComplementData {
            g,
            support_radius: None,
            singular_exponent: None,
        }
    }

    /// Interpolant at exterior nodes; interior coefficients are zero.
    pub fn interpolate(&self, mesh: &Mesh) -> Result<DiscreteFunction> {
        let g = self.g.clone();
        let full = quasi_interpolate(move |x| g(x), mesh, self.singular_exponent.unwrap_or(0.0))?;
        let mut out = DiscreteFunction::zeros(mesh);
        for &i in mesh.exterior_nodes() {
            out.coeffs[i] = full.coeffs[i];
        }
        Ok(out)
    }

    fn check_support(&self, mesh: &Mesh) -> Result<()> {
        if let Some(r) = self.support_radius {
            if r > mesh.halo_radius * (1.0 + 1e-12) {
                return Err(NldError::Precondition(format!(
                    "support radius {r} of the exterior data exceeds the mesh halo {}",
                    mesh.halo_radius
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone)]
pub struct EllipticProblem {
    pub kernel: Kernel,
    pub mesh: Mesh,
    pub f: ScalarFn,
    pub g: Option<ComplementData>,
    pub path: SolvePath,
    pub solver_tol: f64,
    pub quad: QuadConfig,
    /// Recompute the residual by independent quadrature.
    pub independent_residual: bool,
}

impl EllipticProblem {
    pub fn new(kernel: Kernel, mesh: Mesh, f: ScalarFn) -> Self {
        EllipticProblem {
            kernel,
            mesh,
            f,
            g: None,
            path: SolvePath::Auto,
            solver_tol: 1e-8,
            quad: QuadConfig::default(),
            independent_residual: true,
        }
    }
}

/// Matrices and vectors of the discrete system.
#[derive(Clone, Debug)]
pub struct LinearSystem {
    /// Interior rows, interior columns.
    pub a_int: DMatrix<f64>,
    /// Interior rows, exterior columns.
    pub a_ext: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    pub load: DVector<f64>,
    pub lift: DVector<f64>,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub u: DiscreteFunction,
    /// max |A_int u_int - (F - G_lift)|.
    pub residual: f64,
    /// max_i |E(u, phi_i) - <f, phi_i>| by independent quadrature.
    pub residual_independent: Option<f64>,
    pub seminorm_v: f64,
    pub energy_ratio: Option<f64>,
    pub gamma_used: Option<f64>,
    pub path_used: SolvePath,
    /// ||F||_inf / min diag(M).
    pub scale: f64,
    pub pivot_ratio: f64,
    pub warnings: Vec<String>,
    pub system: LinearSystem,
}

/// ∫ over the meshed region of a P1 function squared.
pub fn l2_norm_sq(mesh: &Mesh, u: &DiscreteFunction) -> f64 {
    u.coeffs
        .windows(2)
        .map(|w| mesh.h / 3.0 * (w[0] * w[0] + w[0] * w[1] + w[1] * w[1]))
        .sum()
}

/// ∫_Omega f^2 by element Gauss quadrature.
pub fn l2_norm_sq_omega(mesh: &Mesh, f: &dyn Fn(f64) -> f64, order: usize) -> f64 {
    let rule = gauss(order);
    mesh.omega_element_range()
        .map(|e| rule.integrate(mesh.nodes[e], mesh.nodes[e + 1], |x| f(x).powi(2)))
        .sum()
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Shift gamma >= 0 with A_int + gamma M coercive: one above the negative
/// part of the smallest eigenvalue of (sym A_int, M).
pub fn coercivity_shift(a_int: &DMatrix<f64>, mass: &DMatrix<f64>) -> Result<f64> {
    let lmin = min_generalized_eigenvalue(&symmetric_part(a_int), mass)?;
    Ok((-lmin).max(0.0) + 1.0)
}

/// Fixed point w = (A + gamma M)^{-1} (b + gamma M w) for a singular A.
fn fredholm_fixed_point(
    a: &DMatrix<f64>,
    mass: &DMatrix<f64>,
    b: &DVector<f64>,
    tol: f64,
) -> Result<(DVector<f64>, f64)> {
    let gamma = coercivity_shift(a, mass)?;
    let shifted = a + mass * gamma;
    let lu = Lu::new(&shifted)?;
    if lu.is_singular() {
        return Err(NldError::KernelNontrivial(format!(
            "shifted matrix singular (pivot ratio {:e})",
            lu.pivot_ratio
        )));
    }
    let target = tol * max_abs(b).max(1.0);
    let mut w = DVector::zeros(b.len());
    let mut last = f64::INFINITY;
    let mut stalled = 0;
    for _ in 0..500 {
        let rhs = b + mass * &w * gamma;
        w = lu.solve(&rhs)?;
        let r = max_abs(&(a * &w - b));
        if r <= target {
            return Ok((w, gamma));
        }
        if r > 0.999 * last {
            stalled += 1;
            if stalled >= 5 {
                break;
            }
        } else {
            stalled = 0;
        }
        last = r;
    }
    Err(NldError::KernelNontrivial(
        "fixed-point iteration on the shifted system stagnates; the discrete problem has no unique solution".into(),
    ))
}

/// Solves the interior system by the requested path.
fn solve_system(
    a: &DMatrix<f64>,
    mass: &DMatrix<f64>,
    b: &DVector<f64>,
    path: SolvePath,
    tol: f64,
) -> Result<(DVector<f64>, SolvePath, Option<f64>, f64, Vec<String>)> {
    let lu = Lu::new(a)?;
    let mut warnings = Vec::new();
    if !lu.is_singular() {
        let used = if path == SolvePath::Fredholm {
            SolvePath::Fredholm
        } else {
            SolvePath::Coercive
        };
        return Ok((lu.solve(b)?, used, None, lu.pivot_ratio, warnings));
    }
    if path == SolvePath::Coercive {
        return Err(NldError::Linalg(format!(
            "interior matrix singular to working precision (pivot ratio {:e})",
            lu.pivot_ratio
        )));
    }
    warnings.push(format!(
        "interior matrix singular to working precision (pivot ratio {:e}); used the shifted fixed point",
        lu.pivot_ratio
    ));
    let (w, gamma) = fredholm_fixed_point(a, mass, b, tol)?;
    Ok((w, SolvePath::Fredholm, Some(gamma), lu.pivot_ratio, warnings))
}

/// Builds A_int, A_ext, M, F and G_lift for an elliptic problem.
pub fn build_system(p: &EllipticProblem, asm: &Assembly, g_h: &DiscreteFunction) -> Result<LinearSystem> {
    let a = asm.stiffness();
    let (a_int, a_ext) = split_columns(&p.mesh, &a);
    let mass = assemble_mass(&p.mesh);
    let f = p.f.clone();
    let load = assemble_load(move |x| f(x), &p.mesh, p.quad.order)?;
    let lift = &a_ext * DVector::from_vec(g_h.exterior_values(&p.mesh));
    Ok(LinearSystem {
        a_int,
        a_ext,
        mass,
        load,
        lift,
    })
}

pub fn solve_elliptic(p: &EllipticProblem) -> Result<Solution> {
    p.quad.validate()?;
    if !(p.solver_tol > 0.0) {
        return Err(NldError::Parameter(format!("solver_tol = {} must be positive", p.solver_tol)));
    }
    if let Some(g) = &p.g {
        g.check_support(&p.mesh)?;
    }
    let g_h = match &p.g {
        Some(g) => g.interpolate(&p.mesh)?,
        None => DiscreteFunction::zeros(&p.mesh),
    };
    let asm = assemble(&p.kernel, &p.mesh, &p.quad)?;
    let sys = build_system(p, &asm, &g_h)?;
    let b = &sys.load - &sys.lift;
    let (w, path_used, gamma_used, pivot_ratio, warnings) = solve_system(&sys.a_int, &sys.mass, &b, p.path, p.solver_tol)?;
    let residual = max_abs(&(&sys.a_int * &w - &b));
    let mut u = g_h.clone();
    for (r, &n) in p.mesh.interior_nodes().iter().enumerate() {
        u.coeffs[n] = w[r];
    }
    if u.coeffs.iter().any(|v| !v.is_finite()) {
        return Err(NldError::NonFinite("solution coefficients".into()));
    }
    let residual_independent = if p.independent_residual {
        Some(residual_of(p, &u)?)
    } else {
        None
    };
    let s_omega = asm.s_omega();
    let uv = DVector::from_column_slice(&u.coeffs);
    let seminorm_v = uv.dot(&(&s_omega * &uv)).max(0.0);
    let gv = DVector::from_column_slice(&g_h.coeffs);
    let g_semi = gv.dot(&(&s_omega * &gv)).max(0.0);
    let f = p.f.clone();
    let mut denom = l2_norm_sq_omega(&p.mesh, &move |x| f(x), p.quad.order) + g_semi;
    if path_used == SolvePath::Fredholm {
        denom += l2_norm_sq(&p.mesh, &g_h) + l2_norm_sq(&p.mesh, &u);
    }
    let energy_ratio = if denom > 0.0 { Some(seminorm_v / denom) } else { None };
    let scale = max_abs(&sys.load) / (2.0 * p.mesh.h / 3.0);
    Ok(Solution {
        u,
        residual,
        residual_independent,
        seminorm_v,
        energy_ratio,
        gamma_used,
        path_used,
        scale,
        pivot_ratio,
        warnings,
        system: sys,
    })
}

/// max_i |E(u, phi_i) - <f, phi_i>| over interior nodes, with the form and
/// the load evaluated at one quadrature order above the assembly's.
pub fn residual_of(p: &EllipticProblem, u: &DiscreteFunction) -> Result<f64> {
    let cfg = QuadConfig {
        order: p.quad.order + 1,
        ..p.quad.clone()
    };
    let row = form_action(&p.kernel, &p.mesh, &cfg, u, None)?;
    let f = p.f.clone();
    let load = assemble_load(move |x| f(x), &p.mesh, cfg.order)?;
    Ok(p.mesh
        .interior_nodes()
        .iter()
        .enumerate()
        .map(|(r, &n)| (row[n] - load[r]).abs())
        .fold(0.0, f64::max))
}

/// Two-step and one-shot forms of the lifted system. The one-shot form
/// solves the bordered system [[A_int, A_ext], [0, I]] [u_int; u_ext] = [F; g_ext].
pub fn solve_bordered(sys: &LinearSystem, g_ext: &DVector<f64>) -> Result<DVector<f64>> {
    let ni = sys.a_int.nrows();
    let ne = sys.a_ext.ncols();
    let n = ni + ne;
    let mut big = DMatrix::zeros(n, n);
    big.view_mut((0, 0), (ni, ni)).copy_from(&sys.a_int);
    big.view_mut((0, ni), (ni, ne)).copy_from(&sys.a_ext);
    for j in 0..ne {
        big[(ni + j, ni + j)] = 1.0;
    }
    let mut rhs = DVector::zeros(n);
    rhs.rows_mut(0, ni).copy_from(&sys.load);
    rhs.rows_mut(ni, ne).copy_from(g_ext);
    let lu = Lu::new(&big)?;
    if lu.is_singular() {
        return Err(NldError::Linalg("bordered system singular".into()));
    }
    let x = lu.solve(&rhs)?;
    Ok(x.rows(0, ni).into_owned())
}

/// Time dependence a(t, x, y) of the kernel k_t = a k.
#[derive(Clone)]
pub enum Modulation {
    /// a = 1.
    None,
    /// a depends on t only.
    Time(ScalarFn),
    /// General a(t, x, y), reassembled at every step.
    Field(ModulationFn),
}

impl Modulation {
    /// Checks 1/2 <= a <= 1 and a(t, x, y) = a(t, y, x) on a grid of times
    /// and mesh-node pairs.
    pub fn validate(&self, mesh: &Mesh, t_end: f64) -> Result<()> {
        let times: Vec<f64> = (0..=16).map(|i| t_end * i as f64 / 16.0).collect();
        let check = |v: f64, what: String| -> Result<()> {
            if !(0.5 - 1e-12..=1.0 + 1e-12).contains(&v) {
                return Err(NldError::Parameter(format!("modulation {what} = {v} outside [1/2, 1]")));
            }
            Ok(())
        };
        match self {
            Modulation::None => Ok(()),
            Modulation::Time(a) => {
                for &t in &times {
                    check(a(t), format!("a({t})"))?;
                }
                Ok(())
            }
            Modulation::Field(a) => {
                let stride = (mesh.node_count() / 17).max(1);
                let xs: Vec<f64> = mesh.nodes.iter().step_by(stride).copied().collect();
                for &t in &times {
                    for &x in &xs {
                        for &y in &xs {
                            let v = a(t, &[x, 0.0], &[y, 0.0]);
                            check(v, format!("a({t}, {x}, {y})"))?;
                            let w = a(t, &[y, 0.0], &[x, 0.0]);
                            if (v - w).abs() > 1e-12 * v.abs() {
                                return Err(NldError::Parameter(format!(
                                    "modulation not symmetric at t = {t}: a({x}, {y}) = {v}, a({y}, {x}) = {w}"
                                )));
                            }
                        }
                    }
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone)]
pub enum InitialData {
    Function(ScalarFn),
    /// Coefficients on the problem mesh (exterior values are replaced by g(0)).
    Discrete(DiscreteFunction),
}

/// Exterior data g(t, x) with its time derivative.
#[derive(Clone)]
pub struct TimeComplementData {
    pub g: SpaceTimeFn,
    /// Analytic time derivative; when absent a central difference with step
    /// dt / 100 is used.
    pub g_dot: Option<SpaceTimeFn>,
    pub support_radius: Option<f64>,
}

#[derive(Clone)]
pub struct ParabolicProblem {
    pub kernel: Kernel,
    pub mesh: Mesh,
    pub modulation: Modulation,
    pub t_end: f64,
    pub dt: f64,
    pub u0: InitialData,
    pub f: SpaceTimeFn,
    pub g: Option<TimeComplementData>,
    pub quad: QuadConfig,
    /// Tolerance for u0 = g(0) at exterior nodes.
    pub consistency_tol: f64,
}

impl ParabolicProblem {
    pub fn new(kernel: Kernel, mesh: Mesh, t_end: f64, dt: f64) -> Self {
        ParabolicProblem {
            kernel,
            mesh,
            modulation: Modulation::None,
            t_end,
            dt,
            u0: InitialData::Function(Arc::new(|_| 0.0)),
            f: Arc::new(|_, _| 0.0),
            g: None,
            quad: QuadConfig::default(),
            consistency_tol: 1e-9,
        }
    }
}

/// Terms of the discrete energy identity for w = u - g:
/// |w^N|^2 + sum |w^{n+1} - w^n|^2 + 2 sum dt E(t_{n+1}; w, w)
///   = |w^0|^2 + 2 sum dt <F - M g' - G_lift, w^{n+1}>.
/// Without exterior data w = u.
#[derive(Clone, Debug, Default, Serialize)]
pub struct EnergyBalance {
    pub final_norm_sq: f64,
    pub initial_norm_sq: f64,
    pub dissipation: f64,
    pub form_sum: f64,
    pub source_sum: f64,
}

impl EnergyBalance {
    pub fn lhs(&self) -> f64 {
        self.final_norm_sq + self.dissipation + self.form_sum
    }

    pub fn rhs(&self) -> f64 {
        self.initial_norm_sq + self.source_sum
    }

    pub fn relative_defect(&self) -> f64 {
        let scale = self.lhs().abs().max(self.rhs().abs());
        if scale == 0.0 {
            0.0
        } else {
            (self.lhs() - self.rhs()).abs() / scale
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DiscreteFunction>,
    /// Discrete L^2(Omega) norms of u^n.
    pub l2_norms: Vec<f64>,
    pub energy: EnergyBalance,
}

/// Mass rows of the interior test functions against every node.
fn mass_rows(mesh: &Mesh) -> DMatrix<f64> {
    let h = mesh.h;
    let mut m = DMatrix::zeros(mesh.interior_count(), mesh.node_count());
    for (r, &n) in mesh.interior_nodes().iter().enumerate() {
        m[(r, n)] = 2.0 * h / 3.0;
        m[(r, n - 1)] = h / 6.0;
        m[(r, n + 1)] = h / 6.0;
    }
    m
}

pub fn solve_parabolic(p: &ParabolicProblem) -> Result<Trajectory> {
    if !(p.dt > 0.0) || !(p.t_end > 0.0) {
        return Err(NldError::Parameter(format!("need dt > 0 and T > 0, got dt = {}, T = {}", p.dt, p.t_end)));
    }
    let steps = (p.t_end / p.dt).round();
    if (steps * p.dt - p.t_end).abs() > 1e-9 * p.t_end || steps < 1.0 {
        return Err(NldError::Parameter(format!("T = {} is not a multiple of dt = {}", p.t_end, p.dt)));
    }
    let steps = steps as usize;
    p.modulation.validate(&p.mesh, p.t_end)?;
    let mesh = &p.mesh;
    if let Some(g) = &p.g {
        if let Some(r) = g.support_radius {
            if r > mesh.halo_radius * (1.0 + 1e-12) {
                return Err(NldError::Precondition(format!(
                    "support radius {r} of the exterior data exceeds the mesh halo {}",
                    mesh.halo_radius
                )));
            }
        }
    }
    let ext = mesh.exterior_nodes();
    let g_at = |t: f64| -> Result<DVector<f64>> {
        let mut v = DVector::zeros(ext.len());
        if let Some(g) = &p.g {
            for (j, &n) in ext.iter().enumerate() {
                let val = (g.g)(t, mesh.nodes[n]);
                if !val.is_finite() {
                    return Err(NldError::NonFinite(format!("g({t}, {})", mesh.nodes[n])));
                }
                v[j] = val;
            }
        }
        Ok(v)
    };
    let gdot_at = |t: f64| -> DVector<f64> {
        let mut v = DVector::zeros(mesh.node_count());
        if let Some(g) = &p.g {
            let eps = p.dt / 100.0;
            for &n in ext {
                let x = mesh.nodes[n];
                v[n] = match &g.g_dot {
                    Some(gd) => gd(t, x),
                    None => ((g.g)(t + eps, x) - (g.g)(t - eps, x)) / (2.0 * eps),
                };
            }
        }
        v
    };

    // initial state
    let g0 = g_at(0.0)?;
    let mut u = match &p.u0 {
        InitialData::Function(f) => {
            let mut c = Vec::with_capacity(mesh.node_count());
            for &x in &mesh.nodes {
                c.push(f(x));
            }
            DiscreteFunction { coeffs: c }
        }
        InitialData::Discrete(d) => {
            if d.coeffs.len() != mesh.node_count() {
                return Err(NldError::Parameter("initial data lives on a different mesh".into()));
            }
            d.clone()
        }
    };
    for (j, &n) in ext.iter().enumerate() {
        let (a, b) = (u.coeffs[n], g0[j]);
        if a.is_finite() && (a - b).abs() > p.consistency_tol * b.abs().max(1.0) {
            return Err(NldError::Precondition(format!(
                "initial data {a} differs from g(0) = {b} at exterior node x = {}",
                mesh.nodes[n]
            )));
        }
        u.coeffs[n] = b;
    }
    if u.coeffs.iter().any(|v| !v.is_finite()) {
        return Err(NldError::NonFinite("initial data".into()));
    }

    let mass = assemble_mass(mesh);
    let mrows = mass_rows(mesh);
    let base = match &p.modulation {
        Modulation::Field(_) => None,
        _ => Some(split_columns(mesh, &assemble(&p.kernel, mesh, &p.quad)?.stiffness())),
    };
    let operator_at = |t: f64| -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        match (&p.modulation, &base) {
            (Modulation::None, Some((ai, ae))) => Ok((ai.clone(), ae.clone())),
            (Modulation::Time(a), Some((ai, ae))) => {
                let s = a(t);
                Ok((ai * s, ae * s))
            }
            (Modulation::Field(a), _) => {
                let a = a.clone();
                let kt = p.kernel.scaled(Arc::new(move |x: &Point, y: &Point| a(t, x, y)), "k_t");
                Ok(split_columns(mesh, &assemble(&kt, mesh, &p.quad)?.stiffness()))
            }
            _ => unreachable!(),
        }
    };

    let int = mesh.interior_nodes();
    let interior = |d: &DiscreteFunction| DVector::from_iterator(int.len(), int.iter().map(|&n| d.coeffs[n]));
    let mut w = interior(&u);
    let mut energy = EnergyBalance {
        initial_norm_sq: w.dot(&(&mass * &w)),
        ..Default::default()
    };
    let mut times = vec![0.0];
    let mut states = vec![u.clone()];
    let mut l2 = vec![energy.initial_norm_sq.max(0.0).sqrt()];
    let mut cached: Option<Lu> = None;
    let time_dependent = !matches!(p.modulation, Modulation::None);
    let (mut a_int, mut a_ext) = operator_at(p.dt)?;
    for n in 0..steps {
        let t = (n + 1) as f64 * p.dt;
        if time_dependent && n > 0 {
            let ops = operator_at(t)?;
            a_int = ops.0;
            a_ext = ops.1;
        }
        let g_next = g_at(t)?;
        let f = p.f.clone();
        let load = assemble_load(move |x| f(t, x), mesh, p.quad.order)?;
        let source = &load - &mrows * gdot_at(t) - &a_ext * &g_next;
        let rhs = &mass * &w + &source * p.dt;
        let lhs = &mass + &a_int * p.dt;
        if time_dependent || cached.is_none() {
            let lu = Lu::new(&lhs)?;
            if lu.is_singular() {
                return Err(NldError::Linalg(format!(
                    "implicit Euler matrix singular at t = {t} (pivot ratio {:e})",
                    lu.pivot_ratio
                )));
            }
            cached = Some(lu);
        }
        let w_next = cached.as_ref().unwrap().solve(&rhs)?;
        let dw = &w_next - &w;
        energy.dissipation += dw.dot(&(&mass * &dw));
        energy.form_sum += 2.0 * p.dt * w_next.dot(&(&a_int * &w_next));
        energy.source_sum += 2.0 * p.dt * source.dot(&w_next);
        w = w_next;
        let mut un = DiscreteFunction::zeros(mesh);
        for (j, &e) in ext.iter().enumerate() {
            un.coeffs[e] = g_next[j];
        }
        for (r, &i) in int.iter().enumerate() {
            un.coeffs[i] = w[r];
        }
        if un.coeffs.iter().any(|v| !v.is_finite()) {
            return Err(NldError::NonFinite(format!("state at t = {t}")));
        }
        l2.push(l2_omega(mesh, &un).sqrt());
        times.push(t);
        states.push(un);
    }
    energy.final_norm_sq = w.dot(&(&mass * &w));
    Ok(Trajectory {
        times,
        states,
        l2_norms: l2,
        energy,
    })
}

/// ∫_Omega u^2 for a P1 function.
pub fn l2_omega(mesh: &Mesh, u: &DiscreteFunction) -> f64 {
    mesh.omega_element_range()
        .map(|e| {
            let (a, b) = (u.coeffs[e], u.coeffs[e + 1]);
            mesh.h / 3.0 * (a * a + a * b + b * b)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{make_catalog_kernel, CatalogParams};
    use crate::kernel::CatalogId;
    use crate::mesh::build_mesh;

    fn ex8(alpha: f64) -> Kernel {
        make_catalog_kernel(CatalogId::Ex8, &CatalogParams::with_alpha(alpha)).unwrap()
    }

    #[test]
    fn zero_data_gives_zero() {
        let mesh = build_mesh((-1.0, 1.0), 1.0 / 16.0, 0.5).unwrap();
        let p = EllipticProblem::new(ex8(1.0), mesh, Arc::new(|_| 0.0));
        let s = solve_elliptic(&p).unwrap();
        assert!(s.u.coeffs.iter().all(|&v| v == 0.0));
        assert_eq!(s.residual, 0.0);
        assert_eq!(s.residual_independent, Some(0.0));
        assert!(s.energy_ratio.is_none());
    }

    #[test]
    fn torsion_shape_and_residual() {
        let mesh = build_mesh((-1.0, 1.0), 1.0 / 64.0, 0.5).unwrap();
        let p = EllipticProblem::new(ex8(1.0), mesh.clone(), Arc::new(|_| 1.0));
        let s = solve_elliptic(&p).unwrap();
        let ratio = s.u.eval(&mesh, 0.0) / s.u.eval(&mesh, 0.5);
        assert!((ratio - (4.0f64 / 3.0).sqrt()).abs() < 0.02 * ratio, "{ratio}");
        assert!(s.residual < 1e-10 * s.scale);
        let ind = s.residual_independent.unwrap();
        assert!(ind < 1e-6 * s.scale, "{ind} vs scale {}", s.scale);
        // a perturbation at one node shows up as that column of A
        let mut v = s.u.clone();
        let node = mesh.interior_nodes()[40];
        v.coeffs[node] += 1.0;
        let r = residual_of(&p, &v).unwrap();
        let col = s.system.a_int.column(40).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!((r - col).abs() < 1e-6 * col, "{r} {col}");
    }

    #[test]
    fn exterior_values_are_the_data() {
        let mesh = build_mesh((-1.0, 1.0), 1.0 / 16.0, 0.5).unwrap();
        let mut p = EllipticProblem::new(ex8(0.5), mesh.clone(), Arc::new(|_| 0.0));
        p.g = Some(ComplementData::new(Arc::new(|x: f64| x * x)));
        let s = solve_elliptic(&p).unwrap();
        for &n in mesh.exterior_nodes() {
            assert_eq!(s.u.coeffs[n], mesh.nodes[n].powi(2));
        }
        let g_ext = DVector::from_vec(s.u.exterior_values(&mesh));
        let one = solve_bordered(&s.system, &g_ext).unwrap();
        let two = DVector::from_vec(s.u.interior_values(&mesh));
        assert!((one - &two).norm() <= 1e-10 * two.norm());
        p.g.as_mut().unwrap().support_radius = Some(2.0);
        assert!(solve_elliptic(&p).is_err());
    }

    #[test]
    fn singular_matrix_fallback() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let m = DMatrix::identity(2, 2);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        let (w, used, gamma, _, warn) = solve_system(&a, &m, &b, SolvePath::Auto, 1e-10).unwrap();
        assert_eq!(used, SolvePath::Fredholm);
        assert!(gamma.is_some() && !warn.is_empty());
        assert!((&a * &w - &b).amax() < 1e-9);
        assert!(solve_system(&a, &m, &b, SolvePath::Coercive, 1e-10).is_err());
        let bad = DVector::from_vec(vec![1.0, -1.0]);
        assert!(matches!(
            solve_system(&a, &m, &bad, SolvePath::Fredholm, 1e-10),
            Err(NldError::KernelNontrivial(_))
        ));
    }

    #[test]
    fn parabolic_contracts_and_balances() {
        let mesh = build_mesh((-1.0, 1.0), 1.0 / 16.0, 0.5).unwrap();
        let mut p = ParabolicProblem::new(ex8(1.0), mesh, 0.5, 0.05);
        p.u0 = InitialData::Function(Arc::new(|x: f64| if x.abs() < 1.0 { 1.0 - x * x } else { 0.0 }));
        p.modulation = Modulation::Time(Arc::new(|t: f64| 0.75 + 0.25 * t.cos()));
        let tr = solve_parabolic(&p).unwrap();
        assert_eq!(tr.times.len(), 11);
        assert!(tr.l2_norms.windows(2).all(|w| w[1] <= w[0]));
        assert!(tr.energy.relative_defect() < 1e-10, "{:?}", tr.energy);
    }

    #[test]
    fn parabolic_rejects_bad_input() {
        let mesh = build_mesh((-1.0, 1.0), 1.0 / 8.0, 0.5).unwrap();
        let mut p = ParabolicProblem::new(ex8(1.0), mesh, 0.5, 0.3);
        assert!(solve_parabolic(&p).is_err());
        p.dt = 0.25;
        p.modulation = Modulation::Time(Arc::new(|_| 0.2));
        assert!(solve_parabolic(&p).is_err());
        p.modulation = Modulation::None;
        p.u0 = InitialData::Function(Arc::new(|_| 1.0));
        assert!(solve_parabolic(&p).is_err());
    }
}
