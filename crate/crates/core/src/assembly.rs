//! Galerkin matrices for the split form
//! E(u, v) = 1/2 ∬ (u(x) - u(y))(v(x) - v(y)) k_s + ∬ (u(x) - u(y)) v(x) k_a.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{NldError, Result};
use crate::kernel::Kernel;
use crate::mesh::{DiscreteFunction, Mesh};
use crate::pairquad::{hat_values, integrate_pair, PairIntegrand, QuadConfig};
use crate::quadrature::gauss;

/// Relative agreement required between grading depths m and m + 1.
pub const PAIR_REL_TOL: f64 = 1e-8;

const CHUNK: usize = 16;

pub(crate) fn pair_integrand(kernel: &Kernel, delta: Option<f64>) -> PairIntegrand {
    let alpha = kernel.singularity_order().unwrap_or(1.0);
    let mut cuts = kernel.d_cuts().to_vec();
    let mut anchors = Vec::new();
    if let Some(d) = delta {
        cuts.extend([-d, d]);
        anchors.extend([-d, d]);
    }
    PairIntegrand {
        singular: !kernel.is_integrable(),
        exponent: -alpha.clamp(0.5, 0.95),
        cuts,
        anchors,
    }
}

/// Local element-pair contribution: the k_s Gram block over the union of the
/// two elements' nodes and the k_a block for test nodes of the x-element.
struct Local {
    q: usize,
    nodes: Vec<usize>,
    ls: Vec<f64>,
    la: Vec<f64>,
}

fn local_nodes(p: usize, q: usize) -> Vec<usize> {
    let mut v = vec![p, p + 1];
    for n in [q, q + 1] {
        if !v.contains(&n) {
            v.push(n);
        }
    }
    v
}

/// (k_s block, k_a block) of the pair of elements with left ends x0 and y0,
/// labelled p and q, or None when the kernel vanishes on the pair.
#[allow(clippy::too_many_arguments)]
fn pair_values(
    kernel: &Kernel,
    info: &PairIntegrand,
    cfg: &QuadConfig,
    delta: Option<f64>,
    h: f64,
    (x0, y0): (f64, f64),
    p: usize,
    q: usize,
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let offset = p as i64 - q as i64;
    if let Some(r) = kernel.support_radius() {
        if (offset.abs() as f64 - 1.0) * h >= r * (1.0 + 1e-12) {
            return Ok(None);
        }
    }
    if let Some(d) = delta {
        if (offset.abs() as f64 + 1.0) * h <= d {
            return Ok(None);
        }
    }
    let nodes = local_nodes(p, q);
    let l = nodes.len();
    let dim1 = |v: f64| [v, 0.0];
    let mut phx = [0.0; 4];
    let mut dif = [0.0; 4];
    let acc = integrate_pair(info, x0, y0, offset, h, cfg, l * l + 2 * l, PAIR_REL_TOL, |pt, acc| {
        if let Some(dl) = delta {
            if pt.d.abs() <= dl {
                return;
            }
        }
        let x = x0 + h * pt.xi;
        let y = y0 + h * pt.eta;
        let (ks, ka) = kernel.parts_with_difference(&dim1(x), &dim1(y), &dim1(pt.d));
        hat_values(&nodes, p, q, pt, &mut phx, &mut dif);
        let ws = pt.weight * ks;
        let wa = pt.weight * ka;
        for i in 0..l {
            let di = ws * dif[i];
            for j in 0..l {
                acc[i * l + j] += di * dif[j];
            }
        }
        for a in 0..2 {
            let fa = wa * phx[a];
            for j in 0..l {
                acc[l * l + a * l + j] += fa * dif[j];
            }
        }
    })?;
    Ok(Some((acc[..l * l].to_vec(), acc[l * l..].to_vec())))
}

/// One-dimensional tail integrals (sym, anti) beyond the meshed region, at x.
pub fn tails_at(kernel: &Kernel, mesh: &Mesh, x: f64, delta: Option<f64>) -> Result<(f64, f64)> {
    let d = delta.unwrap_or(0.0);
    let (rs, ra) = kernel.one_sided_tail(x, 1.0, (mesh.right() - x).max(d))?;
    let (ls, la) = kernel.one_sided_tail(x, -1.0, (x - mesh.left()).max(d))?;
    Ok((rs + ls, ra + la))
}

/// Assembled blocks. Omega-node matrices are indexed by k = node - omega_first.
#[derive(Clone, Debug)]
pub struct Assembly {
    pub mesh: Mesh,
    /// ∬_{Omega x Omega} (phi_i(x)-phi_i(y))(phi_j(x)-phi_j(y)) k_s over Omega nodes.
    pub s_oo: DMatrix<f64>,
    /// ∬_{Omega x (halo)} ... over all nodes.
    pub s_oc: DMatrix<f64>,
    /// ∬_{Omega x mesh} (phi_j(x)-phi_j(y)) phi_i(x) k_a, interior rows, all columns.
    pub anti: DMatrix<f64>,
    /// ∫_Omega phi_i phi_j T_s with T_s the k_s-mass beyond the meshed region.
    pub tail_s: DMatrix<f64>,
    /// Same with the k_a tail.
    pub tail_a: DMatrix<f64>,
}

pub fn assemble(kernel: &Kernel, mesh: &Mesh, cfg: &QuadConfig) -> Result<Assembly> {
    assemble_impl(kernel, mesh, cfg, None)
}

/// Assembly with the integration domain restricted to |x - y| > delta.
pub fn assemble_truncated(kernel: &Kernel, mesh: &Mesh, cfg: &QuadConfig, delta: f64) -> Result<Assembly> {
    if !(delta >= mesh.h * 1e-6) {
        return Err(NldError::Parameter(format!(
            "truncation radius {delta} below the resolution floor h * 1e-6"
        )));
    }
    assemble_impl(kernel, mesh, cfg, Some(delta))
}

fn assemble_impl(kernel: &Kernel, mesh: &Mesh, cfg: &QuadConfig, delta: Option<f64>) -> Result<Assembly> {
    cfg.validate()?;
    if kernel.dim() != 1 {
        return Err(NldError::Precondition(
            "Galerkin assembly is implemented for d = 1".into(),
        ));
    }
    mesh.check_aligned(kernel.abs_breaks())?;
    let info = pair_integrand(kernel, delta);
    let n = mesh.node_count();
    let ne = mesh.element_count();
    let nint = mesh.interior_count();
    let first = mesh.omega_first;
    let no = mesh.omega_elements + 1;
    let mut s_oo = DMatrix::zeros(no, no);
    let mut s_oc = DMatrix::zeros(n, n);
    let mut anti = DMatrix::zeros(nint, n);
    let omega: Vec<usize> = mesh.omega_element_range().collect();
    let h = mesh.h;
    // translation-invariant kernels: one computation per offset
    let cache: Option<(i64, Vec<Option<(Vec<f64>, Vec<f64>)>>)> = if kernel.is_translation_invariant() {
        let lo = first as i64 - ne as i64 + 1;
        let hi = (first + mesh.omega_elements) as i64 - 1;
        const REF: usize = 1 << 20;
        let vals: Vec<Result<Option<(Vec<f64>, Vec<f64>)>>> = (lo..=hi)
            .into_par_iter()
            .map(|o| {
                let q = (REF as i64 - o) as usize;
                pair_values(kernel, &info, cfg, delta, h, (0.0, -(o as f64) * h), REF, q)
            })
            .collect();
        Some((lo, vals.into_iter().collect::<Result<Vec<_>>>()?))
    } else {
        None
    };
    for chunk in omega.chunks(CHUNK) {
        let parts: Vec<Result<Vec<Local>>> = chunk
            .par_iter()
            .map(|&p| {
                let mut v = Vec::new();
                for q in 0..ne {
                    let vals = match &cache {
                        Some((lo, c)) => c[(p as i64 - q as i64 - lo) as usize].clone(),
                        None => pair_values(kernel, &info, cfg, delta, h, (mesh.nodes[p], mesh.nodes[q]), p, q)?,
                    };
                    if let Some((ls, la)) = vals {
                        v.push(Local {
                            q,
                            nodes: local_nodes(p, q),
                            ls,
                            la,
                        });
                    }
                }
                Ok(v)
            })
            .collect();
        for (&p, res) in chunk.iter().zip(parts) {
            for loc in res? {
                let l = loc.nodes.len();
                let inside = mesh.is_omega_element(loc.q);
                for i in 0..l {
                    for j in 0..l {
                        let v = loc.ls[i * l + j];
                        let (ni, nj) = (loc.nodes[i], loc.nodes[j]);
                        if inside {
                            s_oo[(ni - first, nj - first)] += v;
                        } else {
                            s_oc[(ni, nj)] += v;
                        }
                    }
                }
                for a in 0..2 {
                    if let Some(r) = mesh.interior_index(p + a) {
                        for j in 0..l {
                            anti[(r, loc.nodes[j])] += loc.la[a * l + j];
                        }
                    }
                }
            }
        }
    }
    // tails beyond the meshed region
    let mut tail_s = DMatrix::zeros(no, no);
    let mut tail_a = DMatrix::zeros(no, no);
    let rule = gauss(cfg.order + 3);
    let tails: Vec<Result<Vec<(f64, f64, f64)>>> = omega
        .par_iter()
        .map(|&p| {
            let mut v = Vec::with_capacity(rule.len());
            for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                let x = mesh.nodes[p] + mesh.h * t;
                let (ts, ta) = tails_at(kernel, mesh, x, delta)?;
                v.push((*t, w * mesh.h * ts, w * mesh.h * ta));
            }
            Ok(v)
        })
        .collect();
    for (&p, res) in omega.iter().zip(tails) {
        let k = p - first;
        for (t, ws, wa) in res? {
            let ph = [1.0 - t, t];
            for a in 0..2 {
                for b in 0..2 {
                    tail_s[(k + a, k + b)] += ws * ph[a] * ph[b];
                    tail_a[(k + a, k + b)] += wa * ph[a] * ph[b];
                }
            }
        }
    }
    if s_oo.iter().chain(s_oc.iter()).chain(anti.iter()).any(|v: &f64| !v.is_finite()) {
        return Err(NldError::NonFinite("assembled matrix entry".into()));
    }
    Ok(Assembly {
        mesh: mesh.clone(),
        s_oo,
        s_oc,
        anti,
        tail_s,
        tail_a,
    })
}

impl Assembly {
    fn omega_index(&self, node: usize) -> Option<usize> {
        let k = node.checked_sub(self.mesh.omega_first)?;
        if k <= self.mesh.omega_elements {
            Some(k)
        } else {
            None
        }
    }

    /// A[i][j] = E(phi_j, phi_i): interior rows, all columns.
    pub fn stiffness(&self) -> DMatrix<f64> {
        let m = &self.mesh;
        let n = m.node_count();
        let mut a = DMatrix::zeros(m.interior_count(), n);
        for (r, &ni) in m.interior_nodes().iter().enumerate() {
            let ki = ni - m.omega_first;
            for nj in 0..n {
                let mut v = self.s_oc[(ni, nj)] + self.anti[(r, nj)];
                if let Some(kj) = self.omega_index(nj) {
                    v += 0.5 * self.s_oo[(ki, kj)] + self.tail_s[(ki, kj)] + self.tail_a[(ki, kj)];
                }
                a[(r, nj)] = v;
            }
        }
        a
    }

    /// Gram matrix of ∬_{Omega x R} (u(x) - u(y))^2 k_s over all nodes.
    pub fn s_omega(&self) -> DMatrix<f64> {
        let mut s = self.s_oc.clone();
        let f = self.mesh.omega_first;
        let no = self.mesh.omega_elements + 1;
        for i in 0..no {
            for j in 0..no {
                s[(f + i, f + j)] += self.s_oo[(i, j)] + self.tail_s[(i, j)];
            }
        }
        s
    }

    /// Gram matrix of the full seminorm ∬_{R x R} (u(x) - u(y))^2 k_s for
    /// functions vanishing outside Omega, on interior nodes.
    pub fn s_full(&self) -> DMatrix<f64> {
        let m = &self.mesh;
        let nint = m.interior_count();
        let mut s = DMatrix::zeros(nint, nint);
        for (r, &ni) in m.interior_nodes().iter().enumerate() {
            let ki = ni - m.omega_first;
            for (c, &nj) in m.interior_nodes().iter().enumerate() {
                let kj = nj - m.omega_first;
                s[(r, c)] = self.s_oo[(ki, kj)] + 2.0 * self.s_oc[(ni, nj)] + 2.0 * self.tail_s[(ki, kj)];
            }
        }
        s
    }

    /// Seminorm [u, u]_V = u^T S_omega u.
    pub fn seminorm_v(&self, u: &DiscreteFunction) -> f64 {
        let s = self.s_omega();
        let v = DVector::from_column_slice(&u.coeffs);
        (v.transpose() * &s * &v)[(0, 0)].max(0.0)
    }
}

/// Splits the stiffness matrix into interior and exterior column blocks.
pub fn split_columns(mesh: &Mesh, a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let int = mesh.interior_nodes();
    let ext = mesh.exterior_nodes();
    let ai = DMatrix::from_fn(a.nrows(), int.len(), |r, c| a[(r, int[c])]);
    let ae = DMatrix::from_fn(a.nrows(), ext.len(), |r, c| a[(r, ext[c])]);
    (ai, ae)
}

/// P1 mass matrix over interior nodes.
pub fn assemble_mass(mesh: &Mesh) -> DMatrix<f64> {
    let n = mesh.interior_count();
    let h = mesh.h;
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            2.0 * h / 3.0
        } else if i.abs_diff(j) == 1 {
            h / 6.0
        } else {
            0.0
        }
    })
}

/// Load vector F_i = ∫ f phi_i by per-element Gauss quadrature of order q.
pub fn assemble_load<F: Fn(f64) -> f64>(f: F, mesh: &Mesh, order: usize) -> Result<DVector<f64>> {
    let rule = gauss(order);
    let mut out = DVector::zeros(mesh.interior_count());
    for e in mesh.omega_element_range() {
        for (t, w) in rule.nodes.iter().zip(&rule.weights) {
            let x = mesh.nodes[e] + mesh.h * t;
            let v = f(x);
            if !v.is_finite() {
                return Err(NldError::NonFinite(format!("load value {v} at x = {x}")));
            }
            for (a, ph) in [(0usize, 1.0 - t), (1, *t)] {
                if let Some(r) = mesh.interior_index(e + a) {
                    out[r] += w * mesh.h * v * ph;
                }
            }
        }
    }
    Ok(out)
}

/// Lifting vector G_lift = A_ext g_ext (interior entries of g ignored).
pub fn lifting_vector(mesh: &Mesh, a: &DMatrix<f64>, g: &DiscreteFunction) -> DVector<f64> {
    let (_, ae) = split_columns(mesh, a);
    let ge = DVector::from_vec(g.exterior_values(mesh));
    ae * ge
}

/// Direct evaluation of E(u, v) (or its truncation to |x - y| > delta) for v
/// vanishing outside Omega, by the same pair rules but without forming
/// matrices.
pub fn bilinear_form(
    kernel: &Kernel,
    mesh: &Mesh,
    cfg: &QuadConfig,
    u: &DiscreteFunction,
    v: &DiscreteFunction,
    delta: Option<f64>,
) -> Result<f64> {
    let row = form_action(kernel, mesh, cfg, u, delta)?;
    Ok(row.iter().zip(&v.coeffs).map(|(r, c)| r * c).sum())
}

/// The values E(u, phi_n) for every interior node n (zero elsewhere),
/// accumulated pair by pair without forming matrices.
pub fn form_action(
    kernel: &Kernel,
    mesh: &Mesh,
    cfg: &QuadConfig,
    u: &DiscreteFunction,
    delta: Option<f64>,
) -> Result<Vec<f64>> {
    if let Some(d) = delta {
        if !(d >= mesh.h * 1e-6) {
            return Err(NldError::Parameter(format!(
                "truncation radius {d} below the resolution floor h * 1e-6"
            )));
        }
    }
    cfg.validate()?;
    mesh.check_aligned(kernel.abs_breaks())?;
    let info = pair_integrand(kernel, delta);
    let h = mesh.h;
    let ne = mesh.element_count();
    let omega: Vec<usize> = mesh.omega_element_range().collect();
    let eval = |e: usize, t: f64| u.coeffs[e] * (1.0 - t) + u.coeffs[e + 1] * t;
    let parts: Vec<Result<Vec<(usize, f64)>>> = omega
        .par_iter()
        .map(|&p| {
            let mut out = Vec::new();
            for q in 0..ne {
                let offset = p as i64 - q as i64;
                if let Some(r) = kernel.support_radius() {
                    if (offset.abs() as f64 - 1.0) * h >= r * (1.0 + 1e-12) {
                        continue;
                    }
                }
                if let Some(d) = delta {
                    if (offset.abs() as f64 + 1.0) * h <= d {
                        continue;
                    }
                }
                let half = if mesh.is_omega_element(q) { 0.5 } else { 1.0 };
                let (x0, y0) = (mesh.nodes[p], mesh.nodes[q]);
                let nodes = local_nodes(p, q);
                let mut phx = [0.0; 4];
                let mut dif = [0.0; 4];
                let acc = integrate_pair(&info, x0, y0, offset, h, cfg, nodes.len(), PAIR_REL_TOL, |pt, acc| {
                    if let Some(dl) = delta {
                        if pt.d.abs() <= dl {
                            return;
                        }
                    }
                    let x = x0 + h * pt.xi;
                    let y = y0 + h * pt.eta;
                    let (ks, ka) = kernel.parts_with_difference(&[x, 0.0], &[y, 0.0], &[pt.d, 0.0]);
                    if ks == 0.0 && ka == 0.0 {
                        return;
                    }
                    hat_values(&nodes, p, q, pt, &mut phx, &mut dif);
                    let du: f64 = nodes.iter().enumerate().map(|(k, &n)| u.coeffs[n] * dif[k]).sum();
                    for k in 0..nodes.len() {
                        acc[k] += pt.weight * (half * du * dif[k] * ks + du * phx[k] * ka);
                    }
                })?;
                out.extend(nodes.iter().copied().zip(acc));
            }
            let rule = gauss(cfg.order + 3);
            let mut tail = [0.0; 2];
            for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                let x = mesh.nodes[p] + h * t;
                let (ts, ta) = tails_at(kernel, mesh, x, delta)?;
                let c = w * h * eval(p, *t) * (ts + ta);
                tail[0] += c * (1.0 - t);
                tail[1] += c * t;
            }
            out.push((p, tail[0]));
            out.push((p + 1, tail[1]));
            Ok(out)
        })
        .collect();
    let mut row = vec![0.0; mesh.node_count()];
    for r in parts {
        for (n, v) in r? {
            row[n] += v;
        }
    }
    for (n, v) in row.iter_mut().enumerate() {
        if mesh.interior_index(n).is_none() {
            *v = 0.0;
        }
    }
    Ok(row)
}

/// E_delta(u, v): the form restricted to |x - y| > delta.
pub fn truncated_bilinear(
    kernel: &Kernel,
    mesh: &Mesh,
    cfg: &QuadConfig,
    u: &DiscreteFunction,
    v: &DiscreteFunction,
    delta: f64,
) -> Result<f64> {
    bilinear_form(kernel, mesh, cfg, u, v, Some(delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{make_catalog_kernel, CatalogParams};
    use crate::kernel::CatalogId;
    use crate::mesh::build_mesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn kernel(id: CatalogId, alpha: Option<f64>) -> Kernel {
        let p = CatalogParams {
            alpha,
            ..Default::default()
        };
        make_catalog_kernel(id, &p).unwrap()
    }

    #[test]
    fn rows_annihilate_constants_for_compact_kernels() {
        let mesh = build_mesh((-1.0, 1.0), 0.125, 1.0).unwrap();
        for id in [CatalogId::Ex1, CatalogId::Ex3] {
            let asm = assemble(&kernel(id, None), &mesh, &QuadConfig::default()).unwrap();
            let a = asm.stiffness();
            for r in 0..a.nrows() {
                let s: f64 = a.row(r).iter().sum();
                assert!(s.abs() < 1e-12, "{id}: row {r} sums to {s}");
            }
        }
    }

    /// Autocorrelation of the hat of half-width h: R(0) - R(z).
    fn hat_gap(z: f64, h: f64) -> f64 {
        let r0 = 2.0 * h / 3.0;
        let r = if z <= h {
            r0 - z * z / h + z * z * z / (2.0 * h * h)
        } else if z <= 2.0 * h {
            (2.0 * h - z).powi(3) / (6.0 * h * h)
        } else {
            0.0
        };
        r0 - r
    }

    #[test]
    fn single_hat_energy_for_fractional_kernel() {
        let h = 0.125;
        let mesh = build_mesh((-1.0, 1.0), h, 1.0).unwrap();
        for alpha in [0.5, 1.0, 1.5] {
            let asm = assemble(&kernel(CatalogId::Ex8, Some(alpha)), &mesh, &QuadConfig::default()).unwrap();
            let a = asm.stiffness();
            let i = mesh.interior_count() / 2;
            let node = mesh.interior_nodes()[i];
            let got = a[(i, node)];
            // E = 2 ∫_0^∞ z^{-1-alpha} (R(0) - R(z)) dz
            let near = h.powf(1.0 - alpha) / (2.0 - alpha) - h.powf(1.0 - alpha) / (2.0 * (3.0 - alpha));
            let rule = gauss(20);
            let mid: f64 = rule
                .nodes
                .iter()
                .zip(&rule.weights)
                .map(|(t, w)| {
                    let z = h + h * t;
                    w * h * z.powf(-1.0 - alpha) * hat_gap(z, h)
                })
                .sum();
            let far = (2.0 * h / 3.0) * (2.0 * h).powf(-alpha) / alpha;
            let exact = 2.0 * (near + mid + far);
            assert!((got - exact).abs() < 1e-8 * exact, "alpha={alpha}: {got} vs {exact}");
        }
    }

    #[test]
    fn symmetric_kernel_gives_symmetric_interior_block() {
        let mesh = build_mesh((-1.0, 1.0), 0.0625, 1.0).unwrap();
        let asm = assemble(&kernel(CatalogId::Ex8, Some(1.5)), &mesh, &QuadConfig::default()).unwrap();
        let (ai, _) = split_columns(&mesh, &asm.stiffness());
        let asym = (&ai - ai.transpose()).amax();
        assert!(asym < 1e-12 * ai.amax(), "{asym}");
        let sf = asm.s_full();
        assert!((&sf - 2.0 * &ai).amax() < 1e-12 * sf.amax());
    }

    #[test]
    fn matrix_and_direct_forms_agree() {
        let mesh = build_mesh((-1.0, 1.0), 0.125, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (id, alpha) in [(CatalogId::Ex3, None), (CatalogId::Ex10, Some(0.5)), (CatalogId::Ex14, None)] {
            let k = kernel(id, alpha);
            let cfg = QuadConfig::default();
            let asm = assemble(&k, &mesh, &cfg).unwrap();
            let a = asm.stiffness();
            let u = DiscreteFunction {
                coeffs: (0..mesh.node_count()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            };
            let vi: Vec<f64> = (0..mesh.interior_count()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v = DiscreteFunction::from_interior(&mesh, &vi);
            let mat = (DVector::from_vec(vi).transpose() * &a * DVector::from_column_slice(&u.coeffs))[(0, 0)];
            let direct = bilinear_form(&k, &mesh, &cfg, &u, &v, None).unwrap();
            assert!((mat - direct).abs() < 1e-10 * direct.abs().max(1.0), "{id}: {mat} vs {direct}");
        }
    }

    #[test]
    fn truncation_beyond_the_kernel_range_vanishes() {
        let mesh = build_mesh((-1.0, 1.0), 0.125, 1.0).unwrap();
        let k = kernel(CatalogId::Ex1, None);
        let u = interpolate_interior(&mesh, |x| 1.0 - x * x);
        let v = bilinear_form(&k, &mesh, &QuadConfig::default(), &u, &u, Some(4.0)).unwrap();
        assert_eq!(v, 0.0);
        let full = bilinear_form(&k, &mesh, &QuadConfig::default(), &u, &u, None).unwrap();
        let near = truncated_bilinear(&k, &mesh, &QuadConfig::default(), &u, &u, 1e-3).unwrap();
        assert!(full > 0.0 && near <= full * (1.0 + 1e-12) && near > 0.9 * full);
        assert!(truncated_bilinear(&k, &mesh, &QuadConfig::default(), &u, &u, 1e-9).is_err());
    }

    fn interpolate_interior(mesh: &Mesh, f: impl Fn(f64) -> f64) -> DiscreteFunction {
        let vals: Vec<f64> = mesh.interior_nodes().iter().map(|&i| f(mesh.nodes[i])).collect();
        DiscreteFunction::from_interior(mesh, &vals)
    }

    #[test]
    fn mass_and_load() {
        let mesh = build_mesh((0.0, 1.0), 0.25, 0.5).unwrap();
        let m = assemble_mass(&mesh);
        let one = DVector::from_element(3, 1.0);
        // ∫ (sum of interior hats)^2 = 1 - 4 h / 3 on the unit interval with h = 1/4
        let q = (one.transpose() * &m * &one)[(0, 0)];
        assert!((q - (1.0 - 4.0 * 0.25 / 3.0)).abs() < 1e-14);
        let f = assemble_load(|_| 1.0, &mesh, 5).unwrap();
        assert!(f.iter().all(|v| (v - 0.25).abs() < 1e-14));
        assert!(assemble_load(|_| f64::INFINITY, &mesh, 5).is_err());
    }
}
