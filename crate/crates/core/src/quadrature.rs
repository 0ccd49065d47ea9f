//! One-dimensional quadrature rules and helpers shared by the assembly and
//! condition-checking code.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Gauss-Legendre rule on the reference interval [0, 1].
#[derive(Clone, Debug)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Builds an `n`-point rule by Newton iteration on the Legendre recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss rule needs at least one point");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess for the i-th root on [-1, 1].
            let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, t);
                dp = d;
                let dt = p / d;
                t -= dt;
                if dt.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, t);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - t * t) * dp * dp);
            nodes[i] = 0.5 * (1.0 - t);
            nodes[n - 1 - i] = 0.5 * (1.0 + t);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.5;
        }
        GaussRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrates `f` over [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let len = b - a;
        let mut acc = 0.0;
        for (t, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(a + len * t);
        }
        acc * len
    }
}

fn legendre(n: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = if n == 0 {
        0.0
    } else {
        n as f64 * (t * p1 - p0) / (t * t - 1.0)
    };
    (p, d)
}

/// Cached rule lookup; rules are immutable once built.
pub fn gauss(n: usize) -> &'static GaussRule {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static GaussRule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("gauss cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Box::leak(Box::new(GaussRule::new(n))))
}

/// Panels of a geometric grading towards `0` on [0, 1]: the innermost panel is
/// [0, ratio^depth], then [ratio^(k+1), ratio^k] for k = depth-1..0.
pub fn graded_panels(ratio: f64, depth: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(depth + 1);
    let mut hi = 1.0;
    let mut edges = vec![1.0];
    for _ in 0..depth {
        hi *= ratio;
        edges.push(hi);
    }
    edges.push(0.0);
    edges.reverse();
    for w in edges.windows(2) {
        out.push((w[0], w[1]));
    }
    out
}

/// Integrates `f` over [a, b] where `f` may carry an integrable power-type
/// singularity at `a`, assuming square-root type behaviour in the innermost
/// panel.
pub fn graded_integrate<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    ratio: f64,
    depth: usize,
    rule: &GaussRule,
    f: F,
) -> f64 {
    graded_integrate_power(a, b, ratio, depth, rule, -0.5, f)
}

/// Graded integration towards `a` for integrands behaving like
/// (s - a)^p near `a` (p > -1). The innermost panel [0, d] uses the
/// substitution s = d u^{1/(p+1)}, which turns the model singularity into a
/// constant.
pub fn graded_integrate_power<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    ratio: f64,
    depth: usize,
    rule: &GaussRule,
    p: f64,
    mut f: F,
) -> f64 {
    assert!(p > -1.0, "graded rule needs an integrable singularity");
    let len = b - a;
    let m = 1.0 / (p + 1.0);
    let mut acc = 0.0;
    for (k, (lo, hi)) in graded_panels(ratio, depth).into_iter().enumerate() {
        let d = hi - lo;
        if k == 0 {
            for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                let s = d * t.powf(m);
                let jac = d * m * t.powf(m - 1.0);
                acc += w * jac * f(a + len * s);
            }
        } else {
            for (t, w) in rule.nodes.iter().zip(&rule.weights) {
                acc += w * d * f(a + len * (lo + d * t));
            }
        }
    }
    acc * len
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveResult {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Adaptive bisection with a Gauss rule, comparing each panel with the sum
/// over its two halves.
pub fn adaptive<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_depth: usize,
    mut f: F,
) -> AdaptiveResult {
    let rule = gauss(10);
    if a == b {
        return AdaptiveResult {
            value: 0.0,
            error: 0.0,
            converged: true,
        };
    }
    let whole = rule.integrate(a, b, &mut f);
    let mut stack = vec![(a, b, whole, 0usize)];
    let mut value = 0.0;
    let mut error = 0.0;
    let mut converged = true;
    let scale_hint = whole.abs();
    while let Some((lo, hi, est, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = rule.integrate(lo, mid, &mut f);
        let right = rule.integrate(mid, hi, &mut f);
        let refined = left + right;
        let err = (refined - est).abs();
        let frac = (hi - lo) / (b - a);
        let local_tol = (abs_tol * frac).max(rel_tol * scale_hint.max(refined.abs()) * frac);
        if err <= local_tol || err <= 1e-15 * refined.abs() {
            value += refined;
            error += err;
        } else if depth >= max_depth {
            value += refined;
            error += err;
            converged = false;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    AdaptiveResult {
        value,
        error,
        converged,
    }
}

/// Integral over [a, b] split at the supplied breakpoints (those outside the
/// interval are ignored), using a fixed Gauss rule on every piece.
pub fn piecewise_gauss<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    breaks: &[f64],
    rule: &GaussRule,
    mut f: F,
) -> f64 {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&p| p > a && p < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    let mut acc = 0.0;
    for w in pts.windows(2) {
        acc += rule.integrate(w[0], w[1], &mut f);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials_exactly() {
        for n in 1..=12 {
            let rule = GaussRule::new(n);
            let wsum: f64 = rule.weights.iter().sum();
            assert!((wsum - 1.0).abs() < 1e-14);
            for deg in 0..(2 * n) {
                let v = rule.integrate(0.0, 1.0, |x| x.powi(deg as i32));
                let exact = 1.0 / (deg as f64 + 1.0);
                assert!((v - exact).abs() < 1e-13, "n={n} deg={deg} {v} {exact}");
            }
        }
    }

    #[test]
    fn graded_rule_handles_endpoint_singularity() {
        let rule = gauss(14);
        for p in [-0.9, -0.5, -0.2, 0.3] {
            let v = graded_integrate_power(0.0, 1.0, 0.15, 14, rule, p, |x| x.powf(p));
            let exact = 1.0 / (p + 1.0);
            assert!((v - exact).abs() < 1e-8 * exact, "p={p} v={v}");
            // a smooth factor on top of the model singularity
            let v = graded_integrate_power(0.0, 1.0, 0.15, 14, rule, p, |x| x.powf(p) * (1.0 + x));
            let exact = 1.0 / (p + 1.0) + 1.0 / (p + 2.0);
            assert!((v - exact).abs() < 1e-8 * exact, "p={p} v={v}");
        }
        for p in [-0.5, -0.2, 0.3, 1.0] {
            let v = graded_integrate(0.0, 1.0, 0.15, 14, rule, |x| x.powf(p));
            let exact = 1.0 / (p + 1.0);
            assert!((v - exact).abs() < 1e-8 * exact, "p={p} v={v}");
        }
    }

    #[test]
    fn adaptive_resolves_a_jump() {
        let r = adaptive(0.0, 1.0, 1e-12, 1e-12, 60, |x| if x < 0.3 { 1.0 } else { 0.0 });
        assert!(r.converged);
        assert!((r.value - 0.3).abs() < 1e-11);
    }

    #[test]
    fn piecewise_gauss_is_exact_for_piecewise_polynomials() {
        let v = piecewise_gauss(-1.0, 2.0, &[0.5], gauss(4), |x| if x < 0.5 { x * x } else { 1.0 });
        let exact = (0.125 + 1.0) / 3.0 + 1.5;
        assert!((v - exact).abs() < 1e-14);
    }
}
