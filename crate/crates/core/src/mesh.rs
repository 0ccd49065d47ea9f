//! Uniform 1D meshes of Omega plus an exterior halo, and continuous P1 functions.

use serde::{Deserialize, Serialize};

use crate::error::{NldError, Result};
use crate::quadrature::{gauss, graded_integrate_power};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeClass {
    Interior,
    Exterior,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub omega: (f64, f64),
    pub halo_radius: f64,
    pub h: f64,
    pub nodes: Vec<f64>,
    pub node_class: Vec<NodeClass>,
    /// Index of the node at the left end of Omega.
    pub omega_first: usize,
    /// Number of elements inside Omega.
    pub omega_elements: usize,
    interior: Vec<usize>,
    exterior: Vec<usize>,
}

/// Builds a uniform mesh of [a - R, b + R] in which a and b are nodes. The
/// spacing is (b - a)/n for the smallest n with spacing <= h; the halo is
/// rounded up to a whole number of elements.
pub fn build_mesh(omega: (f64, f64), h: f64, halo_radius: f64) -> Result<Mesh> {
    let (a, b) = omega;
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(NldError::Mesh(format!("invalid interval ({a}, {b})")));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(NldError::Mesh(format!("element width h = {h} must be positive")));
    }
    if !(halo_radius >= h) || !halo_radius.is_finite() {
        return Err(NldError::Mesh(format!(
            "halo radius {halo_radius} must be at least h = {h}"
        )));
    }
    let n = ((b - a) / h * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    if n < 2 {
        return Err(NldError::Mesh(format!(
            "h = {h} leaves no interior node in ({a}, {b})"
        )));
    }
    let he = (b - a) / n as f64;
    let m = (halo_radius / he * (1.0 - 1e-12)).ceil() as usize;
    let total = n + 2 * m;
    if total + 1 > 200_000 {
        return Err(NldError::Mesh("mesh too large".into()));
    }
    let mut nodes = Vec::with_capacity(total + 1);
    for i in 0..=total {
        let k = i as f64 - m as f64;
        let x = if i == m {
            a
        } else if i == m + n {
            b
        } else {
            a + k * he
        };
        nodes.push(x);
    }
    let mut node_class = Vec::with_capacity(nodes.len());
    let mut interior = Vec::new();
    let mut exterior = Vec::new();
    for i in 0..nodes.len() {
        if i > m && i < m + n {
            node_class.push(NodeClass::Interior);
            interior.push(i);
        } else {
            node_class.push(NodeClass::Exterior);
            exterior.push(i);
        }
    }
    Ok(Mesh {
        omega,
        halo_radius: m as f64 * he,
        h: he,
        nodes,
        node_class,
        omega_first: m,
        omega_elements: n,
        interior,
        exterior,
    })
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub fn exterior_nodes(&self) -> &[usize] {
        &self.exterior
    }

    pub fn interior_count(&self) -> usize {
        self.interior.len()
    }

    /// Elements [nodes[e], nodes[e+1]] lying in Omega.
    pub fn omega_element_range(&self) -> std::ops::Range<usize> {
        self.omega_first..self.omega_first + self.omega_elements
    }

    pub fn is_omega_element(&self, e: usize) -> bool {
        e >= self.omega_first && e < self.omega_first + self.omega_elements
    }

    /// Left end of the meshed region.
    pub fn left(&self) -> f64 {
        self.nodes[0]
    }

    /// Right end of the meshed region.
    pub fn right(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// Position of node i in the list of interior nodes.
    pub fn interior_index(&self, node: usize) -> Option<usize> {
        if self.node_class[node] == NodeClass::Interior {
            Some(node - self.omega_first - 1)
        } else {
            None
        }
    }

    /// Errors if one of the given absolute coordinates lies strictly inside
    /// an element (quadrature assumes the integrand is smooth per element).
    pub fn check_aligned(&self, breaks: &[f64]) -> Result<()> {
        for &b in breaks {
            if b <= self.left() || b >= self.right() {
                continue;
            }
            let pos = (b - self.left()) / self.h;
            let near = pos.round();
            if (pos - near).abs() > 1e-9 {
                return Err(NldError::Mesh(format!(
                    "kernel discontinuity at x = {b} is not a mesh node (h = {})",
                    self.h
                )));
            }
        }
        Ok(())
    }
}

/// Continuous piecewise-linear function given by its nodal values, extended
/// by 0 beyond the meshed region.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteFunction {
    pub coeffs: Vec<f64>,
}

impl DiscreteFunction {
    pub fn zeros(mesh: &Mesh) -> Self {
        DiscreteFunction {
            coeffs: vec![0.0; mesh.node_count()],
        }
    }

    pub fn eval(&self, mesh: &Mesh, x: f64) -> f64 {
        if x < mesh.left() || x > mesh.right() {
            return 0.0;
        }
        let pos = (x - mesh.left()) / mesh.h;
        let e = (pos.floor() as usize).min(mesh.element_count() - 1);
        let t = (x - mesh.nodes[e]) / mesh.h;
        self.coeffs[e] * (1.0 - t) + self.coeffs[e + 1] * t
    }

    /// Values at interior nodes, in interior order.
    pub fn interior_values(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.interior_nodes().iter().map(|&i| self.coeffs[i]).collect()
    }

    /// Values at exterior nodes, in exterior order.
    pub fn exterior_values(&self, mesh: &Mesh) -> Vec<f64> {
        mesh.exterior_nodes().iter().map(|&i| self.coeffs[i]).collect()
    }

    /// Function equal to `interior` at interior nodes and zero elsewhere.
    pub fn from_interior(mesh: &Mesh, interior: &[f64]) -> Self {
        let mut f = Self::zeros(mesh);
        for (&i, &v) in mesh.interior_nodes().iter().zip(interior) {
            f.coeffs[i] = v;
        }
        f
    }
}

/// Nodal interpolant of `g`.
pub fn interpolate<G: Fn(f64) -> f64>(g: G, mesh: &Mesh) -> Result<DiscreteFunction> {
    let mut coeffs = Vec::with_capacity(mesh.node_count());
    for &x in &mesh.nodes {
        let v = g(x);
        if !v.is_finite() {
            return Err(NldError::NonFinite(format!("data value {v} at node {x}")));
        }
        coeffs.push(v);
    }
    Ok(DiscreteFunction { coeffs })
}

/// Nodal interpolant in which nodes with a non-finite value of `g` receive
/// the mean of `g` over the two adjacent elements instead. The data are
/// assumed to behave like |x - node|^p there, with p > -1 given.
pub fn quasi_interpolate<G: Fn(f64) -> f64>(g: G, mesh: &Mesh, p: f64) -> Result<DiscreteFunction> {
    if !(p > -1.0) {
        return Err(NldError::Parameter(format!("singularity exponent {p} must exceed -1")));
    }
    let mut coeffs = Vec::with_capacity(mesh.node_count());
    let rule = gauss(14);
    for &x in &mesh.nodes {
        let v = g(x);
        if v.is_finite() {
            coeffs.push(v);
            continue;
        }
        let h = mesh.h;
        let right = graded_integrate_power(x, x + h, 0.15, 8, rule, p, &g);
        let left = -graded_integrate_power(x, x - h, 0.15, 8, rule, p, &g);
        let m = (left + right) / (2.0 * h);
        if !m.is_finite() {
            return Err(NldError::NonFinite(format!("local mean of data near node {x}")));
        }
        coeffs.push(m);
    }
    Ok(DiscreteFunction { coeffs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_interval_example() {
        let m = build_mesh((-1.0, 1.0), 0.5, 1.0).unwrap();
        assert_eq!(m.nodes, vec![-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(m.interior_count(), 3);
    }

    #[test]
    fn unit_interval_example() {
        let m = build_mesh((0.0, 1.0), 0.25, 0.5).unwrap();
        assert_eq!(m.element_count(), 8);
        let int: Vec<f64> = m.interior_nodes().iter().map(|&i| m.nodes[i]).collect();
        assert_eq!(int, vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn degenerate_width_is_rejected() {
        assert!(build_mesh((-1.0, 1.0), 2.0, 2.0).is_err());
        assert!(build_mesh((-1.0, 1.0), 0.5, 0.25).is_err());
    }

    #[test]
    fn interpolation_reproduces_linears_and_data() {
        let m = build_mesh((-1.0, 1.0), 0.25, 1.0).unwrap();
        let f = interpolate(|x| x, &m).unwrap();
        assert_eq!(f.coeffs, m.nodes);
        assert!((f.eval(&m, 0.3) - 0.3).abs() < 1e-15);
        let g = interpolate(|x: f64| if (1.0..=2.0).contains(&x.abs()) { (x.abs() - 1.0).sqrt() } else { 0.0 }, &m)
            .unwrap();
        let i = m.nodes.iter().position(|&x| x == 1.25).unwrap();
        assert_eq!(g.coeffs[i], 0.5);
        assert!(interpolate(|_| f64::NAN, &m).is_err());
    }

    #[test]
    fn partition_of_unity() {
        let m = build_mesh((-1.0, 1.0), 0.125, 1.0).unwrap();
        let one = DiscreteFunction {
            coeffs: vec![1.0; m.node_count()],
        };
        for e in 0..m.element_count() {
            let mid = 0.5 * (m.nodes[e] + m.nodes[e + 1]);
            assert!((one.eval(&m, mid) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn quasi_interpolation_uses_local_means() {
        let m = build_mesh((-1.0, 1.0), 0.25, 1.0).unwrap();
        let beta = -0.4;
        let g = |x: f64| if (1.0..=2.0).contains(&x.abs()) { (x.abs() - 1.0).powf(beta) } else { 0.0 };
        let f = quasi_interpolate(g, &m, beta).unwrap();
        let i = m.nodes.iter().position(|&x| x == 1.0).unwrap();
        let exact = 0.25f64.powf(beta) / (1.0 + beta) / 2.0;
        assert!((f.coeffs[i] - exact).abs() < 1e-6 * exact, "{} {exact}", f.coeffs[i]);
    }
}
