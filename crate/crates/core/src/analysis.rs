//! Quantitative studies: Gårding shift, Poincaré constant, sector constant,
//! discrete maximum principle, regularity of exterior data, convergence of
//! the torsion problem, truncated forms and randomized checks of the
//! elementary inequalities.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::{assemble, assemble_mass, assemble_truncated, split_columns, Assembly};
use crate::catalog::{make_catalog_kernel, CatalogParams};
use crate::error::{NldError, Result};
use crate::kernel::{CatalogId, Kernel};
use crate::linalg::{min_generalized_eigenvalue, quad_form, symmetric_part};
use crate::mesh::{build_mesh, quasi_interpolate, DiscreteFunction, Mesh};
use crate::pairquad::QuadConfig;
use crate::quadrature::gauss;
use crate::solve::{solve_elliptic, ComplementData, EllipticProblem, ScalarFn};

/// Interior blocks used by the form-based estimates.
#[derive(Clone, Debug)]
pub struct FormMatrices {
    pub a_int: DMatrix<f64>,
    pub sym: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    pub s_full: DMatrix<f64>,
}

impl FormMatrices {
    pub fn from_assembly(asm: &Assembly) -> FormMatrices {
        let (a_int, _) = split_columns(&asm.mesh, &asm.stiffness());
        FormMatrices {
            sym: symmetric_part(&a_int),
            a_int,
            mass: assemble_mass(&asm.mesh),
            s_full: asm.s_full(),
        }
    }

    pub fn assemble(kernel: &Kernel, mesh: &Mesh, cfg: &QuadConfig) -> Result<FormMatrices> {
        Ok(Self::from_assembly(&assemble(kernel, mesh, cfg)?))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Garding {
    pub h: f64,
    pub gamma_star: f64,
    /// Worst value of (u^T sym A u + gamma* u^T M u - 1/4 u^T (M + S) u) / u^T M u
    /// over the random certificate sample.
    pub certificate_min: f64,
    pub samples: usize,
}

fn random_vectors(n: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)))
        .collect()
}

/// Smallest gamma >= 0 with sym(A) + gamma M - (M + S_full)/4 positive
/// semidefinite, from the smallest eigenvalue of the pencil with M.
pub fn estimate_garding(fm: &FormMatrices, h: f64, samples: usize, seed: u64) -> Result<Garding> {
    let target = &fm.sym - (&fm.mass + &fm.s_full) * 0.25;
    let lmin = min_generalized_eigenvalue(&target, &fm.mass)?;
    let gamma_star = (-lmin).max(0.0);
    let shifted = &target + &fm.mass * gamma_star;
    let certificate_min = random_vectors(fm.mass.nrows(), samples, seed)
        .iter()
        .map(|u| quad_form(&shifted, u) / quad_form(&fm.mass, u))
        .fold(f64::INFINITY, f64::min);
    Ok(Garding {
        h,
        gamma_star,
        certificate_min,
        samples,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Poincare {
    pub h: f64,
    pub c_p: f64,
    pub lambda_min: f64,
    /// Worst value of u^T S u / u^T M u - 1 / C_P over the random sample.
    pub certificate_min: f64,
    pub samples: usize,
}

/// C_P = 1 / lambda_min(S_full, M).
pub fn estimate_poincare(fm: &FormMatrices, h: f64, samples: usize, seed: u64) -> Result<Poincare> {
    let lambda_min = min_generalized_eigenvalue(&fm.s_full, &fm.mass)?;
    if !(lambda_min > 0.0) {
        return Err(NldError::Precondition(format!(
            "smallest eigenvalue {lambda_min:e} of (S, M) is not positive; (P) fails on this mesh"
        )));
    }
    let certificate_min = random_vectors(fm.mass.nrows(), samples, seed)
        .iter()
        .map(|u| quad_form(&fm.s_full, u) / quad_form(&fm.mass, u) - lambda_min)
        .fold(f64::INFINITY, f64::min);
    Ok(Poincare {
        h,
        c_p: 1.0 / lambda_min,
        lambda_min,
        certificate_min,
        samples,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Sector {
    pub h: f64,
    pub sector_k: f64,
    pub pairs_used: usize,
    pub pairs_skipped: usize,
    /// sqrt(A1 A2) when supplied.
    pub ktilde_bound: Option<f64>,
}

/// max |E(u, v)| / sqrt(E1(u, u) E1(v, v)) over random pairs with
/// E1 = symmetric part of the form plus the L^2 product.
pub fn sector_constant(fm: &FormMatrices, h: f64, trials: usize, seed: u64, ktilde_bound: Option<f64>) -> Sector {
    let e1 = &fm.sym + &fm.mass;
    let vs = random_vectors(fm.mass.nrows(), 2 * trials, seed);
    let mut best = 0.0f64;
    let mut used = 0;
    let mut skipped = 0;
    for pair in vs.chunks(2) {
        let (u, v) = (&pair[0], &pair[1]);
        let (eu, ev) = (quad_form(&e1, u), quad_form(&e1, v));
        if !(eu > 0.0 && ev > 0.0) {
            skipped += 1;
            continue;
        }
        let e = v.dot(&(&fm.a_int * u));
        best = best.max(e.abs() / (eu * ev).sqrt());
        used += 1;
    }
    Sector {
        h,
        sector_k: best,
        pairs_used: used,
        pairs_skipped: skipped,
        ktilde_bound,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MaxPrinciple {
    pub h: f64,
    /// max of u over interior nodes.
    pub sup_u: f64,
    pub scale: f64,
    pub tol: f64,
    pub holds: bool,
}

/// Relative tolerance of the discrete maximum principle surrogate.
pub const MAXPRIN_TOL: f64 = 1e-8;

/// Solves with f <= 0 and g = 0 and checks sup_Omega u <= tol * scale.
pub fn max_principle_probe(kernel: &Kernel, mesh: &Mesh, f: ScalarFn, cfg: &QuadConfig) -> Result<MaxPrinciple> {
    let rule = gauss(cfg.order);
    for e in mesh.omega_element_range() {
        for t in &rule.nodes {
            let x = mesh.nodes[e] + mesh.h * t;
            if f(x) > 0.0 {
                return Err(NldError::Precondition(format!("load f({x}) = {} is positive", f(x))));
            }
        }
    }
    let mut p = EllipticProblem::new(kernel.clone(), mesh.clone(), f);
    p.quad = cfg.clone();
    p.independent_residual = false;
    let s = solve_elliptic(&p)?;
    let sup_u = s
        .u
        .interior_values(mesh)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(MaxPrinciple {
        h: mesh.h,
        sup_u,
        scale: s.scale,
        tol: MAXPRIN_TOL,
        holds: sup_u <= MAXPRIN_TOL * s.scale,
    })
}

/// Growth factor per halving above which a seminorm sequence counts as divergent.
pub const GROWTH_THRESHOLD: f64 = 1.15;

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub beta: f64,
    pub h: f64,
    pub seminorm: f64,
    /// Ratio of successive seminorm increments; None on the first two levels.
    pub growth_factor: Option<f64>,
    pub classification: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub alpha: f64,
    pub rows: Vec<SweepRow>,
    /// (beta, finite?) per beta.
    pub verdicts: Vec<(f64, bool)>,
}

/// Exterior datum (|x| - 1)^beta on 1 < |x| < 2, zero elsewhere.
pub fn boundary_datum(beta: f64) -> impl Fn(f64) -> f64 + Send + Sync + Clone {
    move |x: f64| {
        let t = x.abs() - 1.0;
        if t >= 0.0 && t < 1.0 {
            if t == 0.0 && beta == 0.0 {
                1.0
            } else {
                t.powf(beta)
            }
        } else {
            0.0
        }
    }
}

/// [g_h, g_h]_V for the fractional kernel of order alpha on Omega = (-1, 1),
/// g = (|x| - 1)^beta, over a mesh ladder. The seminorm of the continuum datum
/// is finite iff beta > (alpha - 1)/2. Each level's growth factor is the ratio
/// of successive increments S(h/2) - S(h); the last one classifies.
pub fn boundary_regularity_sweep(alpha: f64, betas: &[f64], hs: &[f64], cfg: &QuadConfig) -> Result<SweepResult> {
    if hs.len() < 3 {
        return Err(NldError::Parameter("the sweep needs at least three mesh levels".into()));
    }
    let kernel = make_catalog_kernel(CatalogId::Ex8, &CatalogParams::with_alpha(alpha))?;
    let mut table = vec![vec![0.0; hs.len()]; betas.len()];
    for (j, &h) in hs.iter().enumerate() {
        let mesh = build_mesh((-1.0, 1.0), h, 1.0)?;
        let s = assemble(&kernel, &mesh, cfg)?.s_omega();
        for (i, &beta) in betas.iter().enumerate() {
            if !(beta > -1.0) {
                return Err(NldError::Parameter(format!("beta = {beta} must exceed -1")));
            }
            let g = boundary_datum(beta);
            let full = quasi_interpolate(g, &mesh, beta.min(0.0))?;
            let mut gh = DiscreteFunction::zeros(&mesh);
            for &n in mesh.exterior_nodes() {
                gh.coeffs[n] = full.coeffs[n];
            }
            let v = DVector::from_column_slice(&gh.coeffs);
            table[i][j] = quad_form(&s, &v).max(0.0);
        }
    }
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for (i, &beta) in betas.iter().enumerate() {
        let vals = &table[i];
        let mut last_growth = None;
        for (j, &h) in hs.iter().enumerate() {
            let growth = if j >= 2 {
                let d1 = vals[j] - vals[j - 1];
                let d0 = vals[j - 1] - vals[j - 2];
                Some(if d0 != 0.0 { d1 / d0 } else { 0.0 })
            } else {
                None
            };
            if growth.is_some() {
                last_growth = growth;
            }
            let class = match growth {
                None => "pending".to_string(),
                Some(g) if g > GROWTH_THRESHOLD => "divergent".to_string(),
                Some(_) => "finite".to_string(),
            };
            rows.push(SweepRow {
                beta,
                h,
                seminorm: vals[j],
                growth_factor: growth,
                classification: class,
            });
        }
        verdicts.push((beta, last_growth.map(|g| g <= GROWTH_THRESHOLD).unwrap_or(true)));
    }
    Ok(SweepResult { alpha, rows, verdicts })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub h: f64,
    /// L^2(Omega) distance to the least-squares multiple of (1 - x^2)^{alpha/2}.
    pub shape_error: f64,
    /// ||u_h - u_{h/2}||_{L^2(Omega)}; None on the finest level.
    pub self_error: Option<f64>,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Convergence {
    pub alpha: f64,
    pub rows: Vec<ConvergenceRow>,
    pub shape_rate: f64,
    pub self_rate: f64,
    /// (4/3)^{alpha/2}
    pub ratio_exact: f64,
    pub monotone: bool,
}

/// Least-squares slope of log e against log h.
pub fn fitted_rate(hs: &[f64], es: &[f64]) -> f64 {
    let n = hs.len() as f64;
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = es.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// ∫_Omega F(x) by Gauss quadrature on the elements of `mesh`, with the
/// endpoint panels graded for the square-root type behavior of the shape.
fn omega_integral(mesh: &Mesh, f: &dyn Fn(f64) -> f64) -> f64 {
    let rule = gauss(10);
    let (a, b) = mesh.omega;
    let mut total = 0.0;
    for e in mesh.omega_element_range() {
        let (lo, hi) = (mesh.nodes[e], mesh.nodes[e + 1]);
        if e == mesh.omega_first || e + 1 == mesh.omega_first + mesh.omega_elements {
            // subdivide geometrically towards the boundary node
            let toward_left = (lo - a).abs() < 1e-14;
            let mut edges = vec![0.0, 1.0];
            for k in 1..20 {
                edges.push(0.5f64.powi(k));
            }
            edges.sort_by(|x, y| x.partial_cmp(y).unwrap());
            for w in edges.windows(2) {
                let (s0, s1) = if toward_left { (w[0], w[1]) } else { (1.0 - w[1], 1.0 - w[0]) };
                total += rule.integrate(lo + (hi - lo) * s0, lo + (hi - lo) * s1, |x| f(x));
            }
            let _ = b;
        } else {
            total += rule.integrate(lo, hi, |x| f(x));
        }
    }
    total
}

/// Fractional torsion problem (Ex8, f = 1, g = 0 on Omega = (-1, 1)) on a mesh ladder.
pub fn convergence_study(alpha: f64, hs: &[f64], cfg: &QuadConfig) -> Result<Convergence> {
    let kernel = make_catalog_kernel(CatalogId::Ex8, &CatalogParams::with_alpha(alpha))?;
    let mut sols = Vec::new();
    for &h in hs {
        let mesh = build_mesh((-1.0, 1.0), h, 0.5)?;
        let mut p = EllipticProblem::new(kernel.clone(), mesh.clone(), Arc::new(|_| 1.0));
        p.quad = cfg.clone();
        p.independent_residual = false;
        sols.push((mesh, solve_elliptic(&p)?.u));
    }
    let shape = move |x: f64| (1.0 - x * x).max(0.0).powf(alpha / 2.0);
    let mut rows = Vec::new();
    for (i, (mesh, u)) in sols.iter().enumerate() {
        let us = omega_integral(mesh, &|x| u.eval(mesh, x) * shape(x));
        let ss = omega_integral(mesh, &|x| shape(x) * shape(x));
        let c = us / ss;
        let shape_error = omega_integral(mesh, &|x| (u.eval(mesh, x) - c * shape(x)).powi(2)).sqrt();
        let self_error = sols.get(i + 1).map(|(fine, uf)| {
            omega_integral(fine, &|x| (u.eval(mesh, x) - uf.eval(fine, x)).powi(2)).sqrt()
        });
        rows.push(ConvergenceRow {
            h: mesh.h,
            shape_error,
            self_error,
            ratio: u.eval(mesh, 0.0) / u.eval(mesh, 0.5),
        });
    }
    let hv: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let ev: Vec<f64> = rows.iter().map(|r| r.shape_error).collect();
    let sv: Vec<f64> = rows.iter().filter_map(|r| r.self_error).collect();
    let shape_rate = fitted_rate(&hv, &ev);
    let self_rate = if sv.len() >= 2 { fitted_rate(&hv[..sv.len()], &sv) } else { f64::NAN };
    let monotone = ev.windows(2).all(|w| w[1] < w[0]) && sv.windows(2).all(|w| w[1] < w[0]);
    Ok(Convergence {
        alpha,
        rows,
        shape_rate,
        self_rate,
        ratio_exact: (4.0f64 / 3.0).powf(alpha / 2.0),
        monotone,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TruncationStudy {
    pub kernel: String,
    pub deltas: Vec<f64>,
    /// |E_delta(u, v) - E(u, v)| per pair and delta.
    pub gaps: Vec<Vec<f64>>,
    pub monotone: bool,
}

/// Smooth random function vanishing outside Omega = (-1, 1): a random
/// combination of sin(k pi (x + 1) / 2), k = 1..4.
fn smooth_sample(rng: &mut ChaCha8Rng, mesh: &Mesh) -> DVector<f64> {
    let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut v = DVector::zeros(mesh.node_count());
    for &n in mesh.interior_nodes() {
        let x = mesh.nodes[n];
        v[n] = c
            .iter()
            .enumerate()
            .map(|(k, ck)| ck * ((k + 1) as f64 * std::f64::consts::PI * (x + 1.0) / 2.0).sin())
            .sum();
    }
    v
}

/// |E_delta(u, v) - E(u, v)| for random smooth pairs over a decreasing
/// ladder of truncation radii.
pub fn truncation_study(
    kernel: &Kernel,
    mesh: &Mesh,
    deltas: &[f64],
    pairs: usize,
    seed: u64,
    cfg: &QuadConfig,
) -> Result<TruncationStudy> {
    let full = assemble(kernel, mesh, cfg)?.stiffness();
    let trunc: Vec<DMatrix<f64>> = deltas
        .iter()
        .map(|&d| assemble_truncated(kernel, mesh, cfg, d).map(|a| a.stiffness()))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let int = mesh.interior_nodes();
    let mut gaps = Vec::new();
    for _ in 0..pairs {
        let u = smooth_sample(&mut rng, mesh);
        let v = smooth_sample(&mut rng, mesh);
        let vi = DVector::from_iterator(int.len(), int.iter().map(|&n| v[n]));
        let e = vi.dot(&(&full * &u));
        gaps.push(trunc.iter().map(|a| (vi.dot(&(a * &u)) - e).abs()).collect::<Vec<f64>>());
    }
    let monotone = gaps.iter().all(|g| g.windows(2).all(|w| w[1] < w[0]));
    Ok(TruncationStudy {
        kernel: kernel.label().to_string(),
        deltas: deltas.to_vec(),
        gaps,
        monotone,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyRow {
    pub h: f64,
    pub energy_ratio: f64,
    pub growth: Option<f64>,
}

/// Energy ratio seminorm_V(u) / (||f||^2 + [g, g]_V) across a mesh ladder.
pub fn energy_study(
    kernel: &Kernel,
    omega: (f64, f64),
    halo: f64,
    f: ScalarFn,
    g: Option<ComplementData>,
    hs: &[f64],
    cfg: &QuadConfig,
) -> Result<Vec<EnergyRow>> {
    let mut rows: Vec<EnergyRow> = Vec::new();
    for &h in hs {
        let mesh = build_mesh(omega, h, halo)?;
        let mut p = EllipticProblem::new(kernel.clone(), mesh, f.clone());
        p.g = g.clone();
        p.quad = cfg.clone();
        p.independent_residual = false;
        let s = solve_elliptic(&p)?;
        let r = s
            .energy_ratio
            .ok_or_else(|| NldError::Precondition("energy ratio undefined for zero data".into()))?;
        let growth = rows.last().map(|prev| r / prev.energy_ratio);
        rows.push(EnergyRow {
            h: p.mesh.h,
            energy_ratio: r,
            growth,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct LemmaCounts {
    pub trials: usize,
    pub ratio_inequality: usize,
    pub ratio_inequality_sym: usize,
    pub log_inequality: usize,
    pub convolution_inequality: usize,
    /// First counterexample per family.
    pub witnesses: Vec<String>,
}

impl LemmaCounts {
    pub fn counterexamples(&self) -> usize {
        self.ratio_inequality + self.ratio_inequality_sym + self.log_inequality + self.convolution_inequality
    }
}

/// (1 - a)/(1 - b) <= theta^2 (b - a)^2 / ((1 - b)(1 - a)) + theta/(theta - 1).
pub fn ratio_inequality(theta: f64, a: f64, b: f64) -> (f64, f64) {
    let lhs = (1.0 - a) / (1.0 - b);
    let rhs = theta * theta * (b - a).powi(2) / ((1.0 - b) * (1.0 - a)) + theta / (theta - 1.0);
    (lhs, rhs)
}

/// Symmetrized form with both quotients on the left.
pub fn ratio_inequality_sym(theta: f64, a: f64, b: f64) -> (f64, f64) {
    let lhs = (1.0 - b) / (1.0 - a) + (1.0 - a) / (1.0 - b);
    let rhs = 2.0 * theta * theta * (b - a).powi(2) / ((1.0 - b) * (1.0 - a)) + 2.0 * theta / (theta - 1.0);
    (lhs, rhs)
}

/// (a - b)(1/b - 1/a) >= (log a - log b)^2, both sides evaluated without
/// cancellation: (a - b)^2 / (ab) and log1p((a - b)/b)^2.
pub fn log_inequality(a: f64, b: f64) -> (f64, f64) {
    let d = a - b;
    (d * d / (a * b), (d / b).ln_1p().powi(2))
}

/// Grid version of the convolution inequality for q = 1 on |k| <= n_rho:
/// sum over x, y in B_R of (u_x - u_y)^2 (q*q)(x - y) h^2 against
/// 4 |q|_1 times the same sum with q over B_{R + rho}. Returns (lhs, rhs).
pub fn convolution_inequality(u: &[f64], h: f64, n_r: usize, n_rho: usize) -> (f64, f64) {
    // grid points i = -(n_r + n_rho) ..= n_r + n_rho, u indexed from 0
    let m = n_r + n_rho;
    assert_eq!(u.len(), 2 * m + 1);
    let q = |k: i64| if (k.unsigned_abs() as usize) <= n_rho { 1.0 } else { 0.0 };
    let q1: f64 = (-(n_rho as i64)..=n_rho as i64).map(q).sum::<f64>() * h;
    // discrete (q*q)(k h) = h sum_j q(j) q(k - j)
    let span = 2 * n_rho as i64;
    let qq: Vec<f64> = (-span..=span)
        .map(|k| (-span..=span).map(|j| q(j) * q(k - j)).sum::<f64>() * h)
        .collect();
    let qq_at = |k: i64| if k.abs() <= span { qq[(k + span) as usize] } else { 0.0 };
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for i in 0..u.len() {
        for j in 0..u.len() {
            let (xi, yj) = (i as i64 - m as i64, j as i64 - m as i64);
            let d2 = (u[i] - u[j]).powi(2);
            if xi.unsigned_abs() as usize <= n_r && yj.unsigned_abs() as usize <= n_r {
                lhs += d2 * qq_at(xi - yj) * h * h;
            }
            rhs += d2 * q(xi - yj) * h * h;
        }
    }
    (lhs, 4.0 * q1 * rhs)
}

/// Randomized checks of the elementary inequalities; every trial samples
/// each family once.
pub fn verify_elementary_inequalities(trials: usize, seed: u64) -> LemmaCounts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = LemmaCounts {
        trials,
        ..Default::default()
    };
    let note = |c: &mut LemmaCounts, name: &str, w: String| {
        if !c.witnesses.iter().any(|s| s.starts_with(name)) {
            c.witnesses.push(format!("{name}: {w}"));
        }
    };
    for t in 0..trials {
        let theta = 1.0 + rng.gen_range(0.0f64..4.0).exp2() * 1e-3 + rng.gen_range(0.0..10.0);
        let a: f64 = rng.gen_range(0.0..1.0);
        // every 8th trial uses a = b or a = 0
        let b: f64 = match t % 8 {
            0 => a,
            1 => 0.0,
            _ => rng.gen_range(0.0..1.0),
        };
        let (l, r) = ratio_inequality(theta, a, b);
        if !(l <= r) {
            c.ratio_inequality += 1;
            note(&mut c, "ratio", format!("theta={theta}, a={a}, b={b}: {l} > {r}"));
        }
        let (l, r) = ratio_inequality_sym(theta, a, b);
        if !(l <= r) {
            c.ratio_inequality_sym += 1;
            note(&mut c, "ratio_sym", format!("theta={theta}, a={a}, b={b}: {l} > {r}"));
        }
        let x = 10f64.powf(rng.gen_range(-3.0..3.0));
        let y = if t % 8 == 0 { x } else { 10f64.powf(rng.gen_range(-3.0..3.0)) };
        let (l, r) = log_inequality(x, y);
        if !(l >= r) {
            c.log_inequality += 1;
            note(&mut c, "log", format!("a={x}, b={y}: {l} < {r}"));
        }
        let n_r = rng.gen_range(1..8usize);
        let n_rho = rng.gen_range(1..4usize);
        let h = 1.0 / 8.0;
        let u: Vec<f64> = (0..2 * (n_r + n_rho) + 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (l, r) = convolution_inequality(&u, h, n_r, n_rho);
        if !(l <= r * (1.0 + 1e-12)) {
            c.convolution_inequality += 1;
            note(&mut c, "convolution", format!("R={}, rho={}, u={u:?}: {l} > {r}", n_r as f64 * h, n_rho as f64 * h));
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex8(alpha: f64) -> Kernel {
        make_catalog_kernel(CatalogId::Ex8, &CatalogParams::with_alpha(alpha)).unwrap()
    }

    #[test]
    fn garding_for_zero_and_symmetric_kernels() {
        let mesh = build_mesh((-1.0, 1.0), 1.0 / 16.0, 0.5).unwrap();
        let fm = FormMatrices::assemble(&Kernel::zero(1), &mesh, &QuadConfig::default()).unwrap();
        let g = estimate_garding(&fm, mesh.h, 100, 1).unwrap();
        assert!((g.gamma_star - 0.25).abs() < 1e-12);
        let mesh = build_mesh((-1.0, 1.0), 1.0 / 64.0, 0.5).unwrap();
        let fm = FormMatrices::assemble(&ex8(1.0), &mesh, &QuadConfig::default()).unwrap();
        let g = estimate_garding(&fm, mesh.h, 1000, 1).unwrap();
        assert!(g.gamma_star <= 0.25 + 1e-12, "{}", g.gamma_star);
        assert!(g.certificate_min >= -1e-9);
    }

    #[test]
    fn poincare_grows_with_domain() {
        let cfg = QuadConfig::default();
        let k = ex8(1.0);
        let small = build_mesh((-1.0, 1.0), 1.0 / 16.0, 0.5).unwrap();
        let big = build_mesh((-2.0, 2.0), 1.0 / 16.0, 0.5).unwrap();
        let p1 = estimate_poincare(&FormMatrices::assemble(&k, &small, &cfg).unwrap(), 0.0, 100, 0).unwrap();
        let p2 = estimate_poincare(&FormMatrices::assemble(&k, &big, &cfg).unwrap(), 0.0, 100, 0).unwrap();
        assert!(p2.c_p > p1.c_p);
        assert!(p1.certificate_min >= -1e-9);
        let ex1 = make_catalog_kernel(CatalogId::Ex1, &CatalogParams::default()).unwrap();
        let p = estimate_poincare(&FormMatrices::assemble(&ex1, &small, &cfg).unwrap(), 0.0, 10, 0).unwrap();
        assert!(p.c_p.is_finite() && p.c_p > 0.0);
    }

    #[test]
    fn sector_bounded_by_one_for_symmetric_kernel() {
        let mesh = build_mesh((-1.0, 1.0), 1.0 / 16.0, 0.5).unwrap();
        let fm = FormMatrices::assemble(&ex8(1.0), &mesh, &QuadConfig::default()).unwrap();
        let s = sector_constant(&fm, mesh.h, 200, 0, None);
        assert!(s.sector_k <= 1.0 + 1e-9 && s.pairs_used == 200);
    }

    #[test]
    fn max_principle_zero_and_negative_load() {
        let mesh = build_mesh((-1.0, 1.0), 1.0 / 32.0, 0.5).unwrap();
        let cfg = QuadConfig::default();
        let z = max_principle_probe(&ex8(1.0), &mesh, Arc::new(|_| 0.0), &cfg).unwrap();
        assert_eq!(z.sup_u, 0.0);
        let m = max_principle_probe(&ex8(1.0), &mesh, Arc::new(|_| -1.0), &cfg).unwrap();
        assert!(m.holds && m.sup_u < 0.0);
        assert!(max_principle_probe(&ex8(1.0), &mesh, Arc::new(|_| 1.0), &cfg).is_err());
    }

    #[test]
    fn lemma_edge_cases() {
        let (l, r) = ratio_inequality(2.0, 0.3, 0.3);
        assert_eq!((l, r), (1.0, 2.0));
        assert_eq!(log_inequality(0.7, 0.7), (0.0, 0.0));
        let c = verify_elementary_inequalities(2000, 5);
        assert_eq!(c.counterexamples(), 0, "{:?}", c.witnesses);
    }

    #[test]
    fn convolution_inequality_detects_a_wrong_constant() {
        let u: Vec<f64> = (0..9).map(|i| if i < 4 { 0.0 } else { 1.0 }).collect();
        let (l, r) = convolution_inequality(&u, 0.125, 3, 1);
        assert!(l <= r && l > 0.0);
        assert!(l > r / 4.0 * 0.1);
    }

    #[test]
    fn fitted_rate_of_power_law() {
        let hs = [0.1, 0.05, 0.025];
        let es: Vec<f64> = hs.iter().map(|h: &f64| 3.0 * h.powf(1.5)).collect();
        assert!((fitted_rate(&hs, &es) - 1.5).abs() < 1e-12);
    }
}
