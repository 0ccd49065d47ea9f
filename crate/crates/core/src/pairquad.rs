//! Quadrature over pairs of equal-width elements [x0, x0 + h] x [y0, y0 + h].
//!
//! Pairs far from the diagonal use a tensor Gauss rule. Otherwise the pair is
//! written in the coordinates w = xi - eta in (-1, 1) and s in (0, 1), with
//! xi = eta + w and eta = max(0, -w) + (1 - |w|) s, so that x - y = c + h w
//! depends on w only. The w-range is split at w = 0, at the kernel's offset
//! discontinuities and at the diagonal, and graded towards the diagonal.

use serde::{Deserialize, Serialize};

use crate::error::{NldError, Result};
use crate::quadrature::{gauss, graded_panels, GaussRule};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadConfig {
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "default_grading")]
    pub grading: f64,
    #[serde(default = "default_max_depth")]
    pub max_depth: usize,
}

fn default_order() -> usize {
    5
}
fn default_grading() -> f64 {
    0.15
}
fn default_max_depth() -> usize {
    12
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            order: 5,
            grading: 0.15,
            max_depth: 12,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=40).contains(&self.order) {
            return Err(NldError::Parameter(format!(
                "quad.order = {} outside 1..=40",
                self.order
            )));
        }
        if !(self.grading > 0.0 && self.grading < 1.0) {
            return Err(NldError::Parameter(format!(
                "quad.grading = {} outside (0, 1)",
                self.grading
            )));
        }
        if !(2..=40).contains(&self.max_depth) {
            return Err(NldError::Parameter(format!(
                "quad.max_depth = {} outside 2..=40",
                self.max_depth
            )));
        }
        Ok(())
    }
}

/// A quadrature node of a pair: reference coordinates with their
/// complements 1 - xi and 1 - eta, w = xi - eta, the offset x - y (all formed
/// without cancellation near the diagonal) and the weight, which includes
/// the factor h^2.
#[derive(Clone, Copy, Debug)]
pub struct PairPoint {
    pub xi: f64,
    pub eta: f64,
    pub xi_c: f64,
    pub eta_c: f64,
    pub w: f64,
    pub d: f64,
    pub weight: f64,
}

/// What the pair rule needs to know about the integrand.
#[derive(Clone, Debug)]
pub struct PairIntegrand {
    /// Whether the integrand is singular on the diagonal x = y.
    pub singular: bool,
    /// Model exponent p of |w - w*|^p near the diagonal, used by the innermost
    /// graded panel.
    pub exponent: f64,
    /// Offsets x - y across which the integrand may jump.
    pub cuts: Vec<f64>,
    /// Offsets x - y near which the integrand varies on small scales (for
    /// instance the edge of a truncated singular kernel); pieces ending there
    /// are graded like the diagonal.
    pub anchors: Vec<f64>,
}

impl PairIntegrand {
    fn anchors_in(&self, c: f64, h: f64) -> Vec<f64> {
        self.anchors
            .iter()
            .map(|&z| (z - c) / h)
            .filter(|&w| w > -1.0 - 1e-14 && w < 1.0 + 1e-14)
            .collect()
    }
}

/// Nodes for the pair whose x-element starts `offset` elements to the right
/// of the y-element (c = x0 - y0 = offset h). `depth` is the grading depth
/// used on pieces touching the diagonal.
pub fn pair_points(
    info: &PairIntegrand,
    offset: i64,
    h: f64,
    cfg: &QuadConfig,
    depth: usize,
) -> Vec<PairPoint> {
    let c = offset as f64 * h;
    let q = cfg.order;
    let near = info.singular && offset.abs() <= 3;
    let anchors = info.anchors_in(c, h);
    let mut wcuts: Vec<f64> = info
        .cuts
        .iter()
        .map(|&z| (z - c) / h)
        .filter(|&w| w > -1.0 + 1e-14 && w < 1.0 - 1e-14)
        .collect();
    let mut out = Vec::new();
    if !near && wcuts.is_empty() && anchors.is_empty() {
        let r = gauss(q);
        for (a, wa) in r.nodes.iter().zip(&r.weights) {
            for (b, wb) in r.nodes.iter().zip(&r.weights) {
                out.push(PairPoint {
                    xi: *a,
                    eta: *b,
                    xi_c: 1.0 - a,
                    eta_c: 1.0 - b,
                    w: a - b,
                    d: c + h * (a - b),
                    weight: h * h * wa * wb,
                });
            }
        }
        return out;
    }
    // diagonal in w coordinates
    let wstar = -(offset as f64);
    wcuts.push(0.0);
    if wstar.abs() < 1.0 {
        wcuts.push(wstar);
    }
    wcuts.push(-1.0);
    wcuts.push(1.0);
    wcuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    wcuts.dedup();
    let srule = gauss(q);
    let wrule = gauss(2 * q + 4);
    // `p1` = 1 + w and `m1` = 1 - w are passed separately so that they stay
    // accurate next to the corners w = -1 and w = 1.
    let push_w = |w: f64, p1: f64, m1: f64, sigma: f64, ww: f64, out: &mut Vec<PairPoint>| {
        // sigma = w - w*, so x - y = h sigma
        let len = p1.min(m1);
        if len <= 0.0 {
            return;
        }
        for (s, ws) in srule.nodes.iter().zip(&srule.weights) {
            let (xi, eta, xi_c, eta_c) = if w < 0.0 {
                (len * s, -w + len * s, 1.0 - len * s, len * (1.0 - s))
            } else {
                (w + len * s, len * s, len * (1.0 - s), 1.0 - len * s)
            };
            out.push(PairPoint {
                xi,
                eta,
                xi_c,
                eta_c,
                w,
                d: h * sigma,
                weight: h * h * ww * len * ws,
            });
        }
    };
    for win in wcuts.windows(2) {
        let (lo, hi) = (win[0], win[1]);
        let width = hi - lo;
        if width <= 0.0 {
            continue;
        }
        let is_anchor = |w: f64| (info.singular && w == wstar) || anchors.iter().any(|&a| (a - w).abs() < 1e-14);
        let sing_lo = is_anchor(lo);
        let sing_hi = !sing_lo && is_anchor(hi);
        if !sing_lo && !sing_hi {
            for (t, wt) in wrule.nodes.iter().zip(&wrule.weights) {
                let w = lo + width * t;
                push_w(w, 1.0 + w, 1.0 - w, w - wstar, wt * width, &mut out);
            }
            continue;
        }
        // graded towards the singular end; u is the distance from it
        let dir = if sing_lo { 1.0 } else { -1.0 };
        let anchor = if sing_lo { lo } else { hi };
        graded_nodes(wrule, cfg.grading, depth, info.exponent, |u, wu| {
            let step = dir * width * u;
            let w = anchor + step;
            push_w(w, (anchor + 1.0) + step, (1.0 - anchor) - step, (anchor - wstar) + step, wu * width, &mut out);
        });
    }
    out
}

/// Values phi_n(x) and differences phi_n(x) - phi_n(y) of the hat functions
/// of `nodes` at a node of the pair (x-element p, y-element q). Differences
/// of two nonzero hat values are formed from the accurate coordinates.
pub fn hat_values(nodes: &[usize], p: usize, q: usize, pt: &PairPoint, phx: &mut [f64], dif: &mut [f64]) {
    for (k, &n) in nodes.iter().enumerate() {
        let left_x = n == p;
        let right_x = n == p + 1;
        let left_y = n == q;
        let right_y = n == q + 1;
        let fx = if left_x {
            pt.xi_c
        } else if right_x {
            pt.xi
        } else {
            0.0
        };
        phx[k] = fx;
        dif[k] = match (left_x, right_x, left_y, right_y) {
            (true, _, true, _) => -pt.w,
            (_, true, _, true) => pt.w,
            // phi(x) = 1 - xi, phi(y) = eta
            (true, _, _, true) => pt.eta_c - pt.xi,
            // phi(x) = xi, phi(y) = 1 - eta
            (_, true, true, _) => pt.eta - pt.xi_c,
            _ => {
                let fy = if left_y {
                    pt.eta_c
                } else if right_y {
                    pt.eta
                } else {
                    0.0
                };
                fx - fy
            }
        };
    }
}

/// Nodes and weights of the graded rule on (0, 1) towards 0; the innermost
/// panel uses the substitution matched to the exponent p.
fn graded_nodes<F: FnMut(f64, f64)>(rule: &GaussRule, ratio: f64, depth: usize, p: f64, mut f: F) {
    let m = 1.0 / (p + 1.0);
    for (k, (lo, hi)) in graded_panels(ratio, depth).into_iter().enumerate() {
        let d = hi - lo;
        for (t, w) in rule.nodes.iter().zip(&rule.weights) {
            if k == 0 {
                f(d * t.powf(m), w * d * m * t.powf(m - 1.0));
            } else {
                f(lo + d * t, w * d);
            }
        }
    }
}

/// Integrates an integrand over one pair, refining the grading depth until
/// two successive depths agree to `rel_tol` (relative to the largest
/// accumulated magnitude). The callback adds contributions of one node into
/// the accumulator slice.
pub fn integrate_pair<F>(
    info: &PairIntegrand,
    x0: f64,
    y0: f64,
    offset: i64,
    h: f64,
    cfg: &QuadConfig,
    width: usize,
    rel_tol: f64,
    mut f: F,
) -> Result<Vec<f64>>
where
    F: FnMut(&PairPoint, &mut [f64]),
{
    let singular_pair =
        (info.singular && offset.abs() <= 1) || !info.anchors_in(offset as f64 * h, h).is_empty();
    let run = |depth: usize, f: &mut F| -> Vec<f64> {
        let mut acc = vec![0.0; width];
        for p in pair_points(info, offset, h, cfg, depth) {
            f(&p, &mut acc);
        }
        acc
    };
    if !singular_pair {
        return Ok(run(0, &mut f));
    }
    let start = 4.min(cfg.max_depth - 1);
    let mut prev = run(start, &mut f);
    for depth in start + 1..=cfg.max_depth {
        let cur = run(depth, &mut f);
        let scale = cur.iter().chain(&prev).fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = cur
            .iter()
            .zip(&prev)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if !cur.iter().all(|v| v.is_finite()) {
            return Err(NldError::Quadrature(format!(
                "non-finite value on element pair at x0 = {x0}, y0 = {y0}"
            )));
        }
        if diff <= rel_tol * scale || scale == 0.0 {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(NldError::Quadrature(format!(
        "singular pair at x0 = {x0}, y0 = {y0} not converged at depth {}",
        cfg.max_depth
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain() -> PairIntegrand {
        PairIntegrand {
            singular: false,
            exponent: -0.5,
            cuts: vec![],
            anchors: vec![],
        }
    }

    fn sum<F: Fn(f64, f64, f64) -> f64>(pts: &[PairPoint], x0: f64, y0: f64, h: f64, f: F) -> f64 {
        pts.iter()
            .map(|p| p.weight * f(x0 + h * p.xi, y0 + h * p.eta, p.d))
            .sum()
    }

    #[test]
    fn disjoint_pair_polynomial() {
        let cfg = QuadConfig::default();
        let pts = pair_points(&plain(), -2, 1.0, &cfg, 0);
        let v = sum(&pts, 0.0, 2.0, 1.0, |x, y, _| (x - y) * (x - y));
        assert!((v - 25.0 / 6.0).abs() < 1e-13 * 25.0 / 6.0);
        let one = sum(&pts, 0.0, 2.0, 1.0, |_, _, _| 1.0);
        assert!((one - 1.0).abs() < 1e-14);
    }

    #[test]
    fn split_pair_integrates_constants_and_polynomials() {
        let cfg = QuadConfig::default();
        let info = PairIntegrand {
            singular: false,
            exponent: -0.5,
            cuts: vec![0.3],
            anchors: vec![],
        };
        for off in [-1i64, 0, 1] {
            let pts = pair_points(&info, off, 1.0, &cfg, 0);
            let one = sum(&pts, 0.0, -(off as f64), 1.0, |_, _, _| 1.0);
            assert!((one - 1.0).abs() < 1e-14);
            let v = sum(&pts, 0.0, -(off as f64), 1.0, |x, y, _| x * x * y);
            let exact = (1.0 / 3.0) * (0.5 - off as f64);
            assert!((v - exact).abs() < 1e-13, "off={off} v={v} exact={exact}");
        }
    }

    #[test]
    fn offsets_are_exact_near_the_diagonal() {
        let cfg = QuadConfig::default();
        let info = PairIntegrand {
            singular: true,
            exponent: -0.5,
            cuts: vec![],
            anchors: vec![],
        };
        let h = 0.1;
        for off in [-1i64, 0, 1] {
            let (x0, y0) = (0.3, 0.3 - off as f64 * h);
            for p in pair_points(&info, off, h, &cfg, 8) {
                let d = (x0 + h * p.xi) - (y0 + h * p.eta);
                assert!((d - p.d).abs() < 1e-14);
            }
        }
    }

    /// Identical elements [0, h]^2 with the fractional kernel and the squared
    /// hat difference (x - y)^2/h^2: closed form from the antiderivative of
    /// |z|^{1-alpha}, namely 2 h^{1-alpha} / ((2 - alpha)(3 - alpha)).
    #[test]
    fn identical_pair_fractional_kernel() {
        let cfg = QuadConfig::default();
        for alpha in [0.5, 1.0, 1.5] {
            let info = PairIntegrand {
                singular: true,
                exponent: -0.5,
                cuts: vec![],
                anchors: vec![],
            };
            let h = 0.125;
            let r = integrate_pair(&info, 0.0, 0.0, 0, h, &cfg, 1, 1e-10, |p, acc| {
                let r = p.d.abs();
                acc[0] += p.weight * (p.d * p.d) / (h * h) * r.powf(-1.0 - alpha);
            })
            .unwrap();
            let exact = 2.0 * h.powf(1.0 - alpha) / ((2.0 - alpha) * (3.0 - alpha));
            assert!((r[0] - exact).abs() < 1e-8 * exact, "alpha={alpha} {} {exact}", r[0]);
        }
    }
}
