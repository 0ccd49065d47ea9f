//! Jump kernels k(x, y), their symmetric/antisymmetric parts and tail masses.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{NldError, Result};
use crate::quadrature::gauss;

/// A point of R^d for d in {1, 2}; the second coordinate is ignored when d = 1.
pub type Point = [f64; 2];

pub type PointFn = Arc<dyn Fn(&Point, &Point) -> f64 + Send + Sync>;

/// Kernel profile as a function of x - y.
pub type OffsetFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CatalogId {
    Ex1,
    Ex2,
    Ex3,
    Ex4,
    Ex5,
    Ex6,
    Ex7,
    Ex8,
    Ex9,
    Ex10,
    Ex11,
    Ex12,
    Ex13,
    Ex14,
    Intro,
    Custom,
}

impl CatalogId {
    pub const EXAMPLES: [CatalogId; 14] = [
        CatalogId::Ex1,
        CatalogId::Ex2,
        CatalogId::Ex3,
        CatalogId::Ex4,
        CatalogId::Ex5,
        CatalogId::Ex6,
        CatalogId::Ex7,
        CatalogId::Ex8,
        CatalogId::Ex9,
        CatalogId::Ex10,
        CatalogId::Ex11,
        CatalogId::Ex12,
        CatalogId::Ex13,
        CatalogId::Ex14,
    ];

    pub fn parse(s: &str) -> Option<CatalogId> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("intro") {
            return Some(CatalogId::Intro);
        }
        if t.eq_ignore_ascii_case("custom") {
            return Some(CatalogId::Custom);
        }
        let digits = t
            .strip_prefix("Ex")
            .or_else(|| t.strip_prefix("ex"))
            .or_else(|| t.strip_prefix("EX"))?;
        let n: usize = digits.parse().ok()?;
        if (1..=14).contains(&n) {
            Some(Self::EXAMPLES[n - 1])
        } else {
            None
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CatalogId::Ex1 => "Ex1",
            CatalogId::Ex2 => "Ex2",
            CatalogId::Ex3 => "Ex3",
            CatalogId::Ex4 => "Ex4",
            CatalogId::Ex5 => "Ex5",
            CatalogId::Ex6 => "Ex6",
            CatalogId::Ex7 => "Ex7",
            CatalogId::Ex8 => "Ex8",
            CatalogId::Ex9 => "Ex9",
            CatalogId::Ex10 => "Ex10",
            CatalogId::Ex11 => "Ex11",
            CatalogId::Ex12 => "Ex12",
            CatalogId::Ex13 => "Ex13",
            CatalogId::Ex14 => "Ex14",
            CatalogId::Intro => "intro",
            CatalogId::Custom => "custom",
        }
    }
}

impl fmt::Display for CatalogId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Angle of a nonzero point; in d = 1 the positive half-line has angle 0 and
/// the negative one angle pi.
pub fn angle_of(dim: usize, z: &Point) -> f64 {
    if dim == 1 {
        if z[0] > 0.0 {
            0.0
        } else {
            PI
        }
    } else {
        let t = z[1].atan2(z[0]);
        if t < 0.0 {
            t + 2.0 * PI
        } else {
            t
        }
    }
}

/// A subset I of the unit sphere, stored as half-open angular intervals
/// [a, b) (radians, a < b, wrapping allowed through 2 pi).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub intervals: Vec<[f64; 2]>,
}

impl Cone {
    pub fn full() -> Cone {
        Cone {
            intervals: vec![[-0.5 * PI, 1.5 * PI]],
        }
    }

    /// Half-space {z_1 > 0} in angular form.
    pub fn positive() -> Cone {
        Cone {
            intervals: vec![[-0.5 * PI, 0.5 * PI]],
        }
    }

    pub fn new(intervals: Vec<[f64; 2]>) -> Result<Cone> {
        if intervals.is_empty() {
            return Err(NldError::Parameter("cone needs at least one interval".into()));
        }
        for iv in &intervals {
            if !(iv[0] < iv[1]) || iv[1] - iv[0] > 2.0 * PI + 1e-12 {
                return Err(NldError::Parameter(format!(
                    "cone interval [{}, {}) must satisfy a < b <= a + 2 pi",
                    iv[0], iv[1]
                )));
            }
        }
        Ok(Cone { intervals })
    }

    pub fn contains_angle(&self, theta: f64) -> bool {
        self.intervals.iter().any(|iv| {
            [theta - 2.0 * PI, theta, theta + 2.0 * PI]
                .iter()
                .any(|&t| t >= iv[0] && t < iv[1])
        })
    }

    pub fn contains(&self, dim: usize, z: &Point) -> bool {
        if z[0] == 0.0 && (dim == 1 || z[1] == 0.0) {
            return false;
        }
        self.contains_angle(angle_of(dim, z))
    }

    /// Reflection -I.
    pub fn reflect(&self) -> Cone {
        Cone {
            intervals: self.intervals.iter().map(|iv| [iv[0] + PI, iv[1] + PI]).collect(),
        }
    }

    /// Interval endpoints reduced to [0, 2 pi).
    pub fn breaks(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for iv in &self.intervals {
            for &e in iv {
                out.push(e.rem_euclid(2.0 * PI));
            }
        }
        out
    }

    /// Surface measure of I: counting measure in d = 1, arc length in d = 2.
    pub fn measure(&self, dim: usize) -> f64 {
        if dim == 1 {
            (self.contains_angle(0.0) as u8 + self.contains_angle(PI) as u8) as f64
        } else {
            measure_where(&[self.clone()], |m| m[0])
        }
    }

    pub fn is_symmetric(&self, dim: usize) -> bool {
        if dim == 1 {
            return self.contains_angle(0.0) == self.contains_angle(PI);
        }
        let r = self.reflect();
        measure_where(&[self.clone(), r], |m| m[0] != m[1]) == 0.0
    }
}

/// Arc length of the set of angles where `pred` holds on the membership
/// vector of the given cones (the sets are unions of intervals, so testing
/// each elementary piece at its midpoint is exact).
pub fn measure_where<F: Fn(&[bool]) -> bool>(cones: &[Cone], pred: F) -> f64 {
    let mut pts: Vec<f64> = cones.iter().flat_map(|c| c.breaks()).collect();
    pts.push(0.0);
    pts.push(2.0 * PI);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let mut total = 0.0;
    for w in pts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let m: Vec<bool> = cones.iter().map(|c| c.contains_angle(mid)).collect();
        if pred(&m) {
            total += w[1] - w[0];
        }
    }
    total
}

/// Built-in choices for the bounded perturbation g(x, y) used by the
/// catalog's g-dependent examples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Perturbation {
    /// g = value.
    Constant { value: f64 },
    /// g = amplitude * cos(pi x_1); not symmetric, breaks the cancellation condition.
    Cosine { amplitude: f64 },
    /// g = amplitude * cos(pi x_1) cos(pi y_1); symmetric.
    ProductCosine { amplitude: f64 },
    /// g = amplitude * 1{(x - y)_1 > 0}; depends on x - y only.
    HalfLine { amplitude: f64 },
}

impl Perturbation {
    pub fn eval(&self, x: &Point, y: &Point, d: &Point) -> f64 {
        match *self {
            Perturbation::Constant { value } => value,
            Perturbation::Cosine { amplitude } => amplitude * (PI * x[0]).cos(),
            Perturbation::ProductCosine { amplitude } => {
                amplitude * (PI * x[0]).cos() * (PI * y[0]).cos()
            }
            Perturbation::HalfLine { amplitude } => {
                if d[0] > 0.0 {
                    amplitude
                } else {
                    0.0
                }
            }
        }
    }

    /// (inf g, sup g).
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Perturbation::Constant { value } => (value, value),
            Perturbation::Cosine { amplitude } | Perturbation::ProductCosine { amplitude } => {
                (-amplitude.abs(), amplitude.abs())
            }
            Perturbation::HalfLine { amplitude } => (amplitude.min(0.0), amplitude.max(0.0)),
        }
    }

    pub fn depends_on_difference_only(&self) -> bool {
        matches!(self, Perturbation::Constant { .. } | Perturbation::HalfLine { .. })
    }

    /// Whether this choice keeps the cancellation condition.
    pub fn preserves_cancellation(&self) -> bool {
        !matches!(self, Perturbation::Cosine { amplitude } if *amplitude != 0.0)
    }

    /// Whether this choice keeps the k_a^2 / k_s integrability condition.
    pub fn preserves_k(&self) -> bool {
        true
    }

    pub fn name(&self) -> &'static str {
        match self {
            Perturbation::Constant { .. } => "constant",
            Perturbation::Cosine { .. } => "cosine",
            Perturbation::ProductCosine { .. } => "product_cosine",
            Perturbation::HalfLine { .. } => "half_line",
        }
    }
}

/// Smooth variable order alpha(x) = alpha1 + (alpha2 - alpha1) s((x_1 - center)/width)
/// with the clamped smoothstep s, and b(x) = 1 + slope (alpha(x) - alpha1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableOrder {
    pub alpha1: f64,
    pub alpha2: f64,
    pub center: f64,
    pub width: f64,
    pub slope: f64,
}

impl VariableOrder {
    pub fn step(&self, x: f64) -> f64 {
        let t = ((x - self.center) / self.width).clamp(-1.0, 1.0);
        let u = 0.5 * (t + 1.0);
        u * u * (3.0 - 2.0 * u)
    }

    pub fn alpha(&self, x: f64) -> f64 {
        self.alpha1 + (self.alpha2 - self.alpha1) * self.step(x)
    }

    pub fn b(&self, x: f64) -> f64 {
        1.0 + self.slope * (self.alpha(x) - self.alpha1)
    }

    /// alpha(y) - alpha(x) without cancellation when x and y are close.
    pub fn alpha_diff(&self, x: f64, y: f64, x_minus_y: f64) -> f64 {
        let tx = (x - self.center) / self.width;
        let ty = (y - self.center) / self.width;
        let cx = tx.clamp(-1.0, 1.0);
        let cy = ty.clamp(-1.0, 1.0);
        let (u, v) = (0.5 * (cy + 1.0), 0.5 * (cx + 1.0));
        let du = if cx == tx && cy == ty {
            -0.5 * x_minus_y / self.width
        } else {
            u - v
        };
        (self.alpha2 - self.alpha1) * du * (3.0 * (u + v) - 2.0 * (u * u + u * v + v * v))
    }

    /// Bounds c1 <= b <= c2.
    pub fn b_bounds(&self) -> (f64, f64) {
        let e = self.slope * (self.alpha2 - self.alpha1);
        (1.0 + e.min(0.0), 1.0 + e.max(0.0))
    }
}

#[derive(Clone)]
pub(crate) enum Form {
    Zero,
    Ball { radius: f64 },
    Annulus { inner: f64, outer: f64 },
    HalfBall,
    ConeBall { cone: Cone },
    BallG { g: Perturbation },
    DomainD,
    ShiftedSign,
    Stable { alpha: f64 },
    StableCone { alpha: f64, cone: Cone },
    StableHalf { alpha: f64 },
    StablePerturbed { alpha: f64, beta: f64, g: Perturbation },
    TwoCone { alpha: f64, beta: f64, c1: Cone, c2: Cone },
    Cusp { alpha_prime: f64, b: f64 },
    VarOrder { vo: VariableOrder, truncation: Option<f64> },
    Custom { f: PointFn },
    Difference { g: OffsetFn },
    Scaled { inner: Box<Kernel>, a: PointFn },
}

fn norm(dim: usize, d: &Point) -> f64 {
    if dim == 1 {
        d[0].abs()
    } else {
        d[0].hypot(d[1])
    }
}

fn in_cusp(b: f64, d: &Point) -> bool {
    let a1 = d[0].abs();
    let a2 = d[1].abs();
    a1 >= a2.powf(b) || a2 >= a1.powf(b)
}

impl Form {
    fn raw(&self, dim: usize, x: &Point, y: &Point, d: &Point) -> f64 {
        let n = dim as f64;
        match self {
            Form::Zero => 0.0,
            Form::Ball { radius } => (norm(dim, d) < *radius) as u8 as f64,
            Form::Annulus { inner, outer } => {
                let r = norm(dim, d);
                (r >= *inner && r < *outer) as u8 as f64
            }
            Form::HalfBall => (norm(dim, d) < 1.0 && d[0] > 0.0) as u8 as f64,
            Form::ConeBall { cone } => (norm(dim, d) < 1.0 && cone.contains(dim, d)) as u8 as f64,
            Form::BallG { g } => {
                if norm(dim, d) < 1.0 {
                    1.0 + g.eval(x, y, d)
                } else {
                    0.0
                }
            }
            Form::DomainD => {
                let (xs, ys) = (x[0], y[0]);
                let square = (-1.0..=0.0).contains(&xs) && (0.0..=1.0).contains(&ys);
                let band = d[0] <= 0.0 && d[0] >= -1.0;
                if square || band {
                    2.0
                } else {
                    0.0
                }
            }
            Form::ShiftedSign => {
                let base = if d[0].abs() < 4.0 { 2.0 } else { 0.0 };
                let sgn = |a: f64, b: f64| -> f64 {
                    if a.abs() < 1.0 && b.abs() < 1.0 {
                        let p = a * b;
                        if p > 0.0 {
                            1.0
                        } else if p < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    } else {
                        0.0
                    }
                };
                let ka = if d[0] < 0.0 {
                    sgn(x[0] - 1.0, y[0] - 3.0)
                } else {
                    -sgn(y[0] - 1.0, x[0] - 3.0)
                };
                base + ka
            }
            Form::Stable { alpha } => norm(dim, d).powf(-n - alpha),
            Form::StableCone { alpha, cone } => {
                if cone.contains(dim, d) {
                    norm(dim, d).powf(-n - alpha)
                } else {
                    0.0
                }
            }
            Form::StableHalf { alpha } => {
                if d[0] > 0.0 {
                    norm(dim, d).powf(-n - alpha)
                } else {
                    0.0
                }
            }
            Form::StablePerturbed { alpha, beta, g } => {
                let r = norm(dim, d);
                let mut v = r.powf(-n - alpha);
                if r < 1.0 {
                    v += g.eval(x, y, d) * r.powf(-n - beta);
                }
                v
            }
            Form::TwoCone { alpha, beta, c1, c2 } => {
                let r = norm(dim, d);
                let mut v = 0.0;
                if c1.contains(dim, d) {
                    v += r.powf(-n - alpha);
                }
                if r < 1.0 && c2.contains(dim, d) {
                    v += r.powf(-n - beta);
                }
                v
            }
            Form::Cusp { alpha_prime, b } => {
                let r = norm(dim, d);
                if r < 1.0 && in_cusp(*b, d) {
                    r.powf(-2.0 - alpha_prime)
                } else {
                    0.0
                }
            }
            Form::VarOrder { vo, truncation } => {
                let r = norm(dim, d);
                if let Some(t) = truncation {
                    if r >= *t {
                        return 0.0;
                    }
                }
                vo.b(x[0]) * r.powf(-n - vo.alpha(x[0]))
            }
            Form::Custom { f } => f(x, y),
            Form::Difference { g } => g(d),
            Form::Scaled { inner, a } => {
                let v = inner.form.raw(dim, x, y, d);
                if v == 0.0 {
                    0.0
                } else {
                    a(x, y) * v
                }
            }
        }
    }
}

/// Evaluator for a jump kernel plus the metadata the solver and the
/// condition checks rely on.
#[derive(Clone)]
pub struct Kernel {
    pub(crate) dim: usize,
    pub(crate) id: CatalogId,
    pub(crate) label: String,
    pub(crate) form: Form,
    pub(crate) singularity_order: Option<f64>,
    pub(crate) support_radius: Option<f64>,
    pub(crate) translation_invariant: bool,
    pub(crate) integrable: bool,
    /// 1D offsets d = x - y at which k is discontinuous (either orientation).
    pub(crate) d_cuts: Vec<f64>,
    /// 1D absolute coordinates at which k(x, .) or k(., y) jumps or kinks.
    pub(crate) abs_breaks: Vec<f64>,
    pub(crate) params: crate::catalog::CatalogParams,
}

impl fmt::Debug for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Kernel")
            .field("id", &self.id)
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("singularity_order", &self.singularity_order)
            .field("support_radius", &self.support_radius)
            .finish()
    }
}

impl Kernel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn id(&self) -> CatalogId {
        self.id
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn params(&self) -> &crate::catalog::CatalogParams {
        &self.params
    }

    pub fn singularity_order(&self) -> Option<f64> {
        self.singularity_order
    }

    /// Order of the weakest diagonal singularity: the minimum of a variable
    /// order, otherwise `singularity_order`.
    pub fn lower_order(&self) -> Option<f64> {
        match &self.form {
            Form::VarOrder { vo, .. } => Some(vo.alpha1),
            _ => self.singularity_order,
        }
    }

    pub fn support_radius(&self) -> Option<f64> {
        self.support_radius
    }

    pub fn is_translation_invariant(&self) -> bool {
        self.translation_invariant
    }

    pub fn is_integrable(&self) -> bool {
        self.integrable
    }

    pub fn d_cuts(&self) -> &[f64] {
        &self.d_cuts
    }

    pub fn abs_breaks(&self) -> &[f64] {
        &self.abs_breaks
    }

    /// The zero kernel in dimension `dim`.
    pub fn zero(dim: usize) -> Kernel {
        Kernel {
            dim,
            id: CatalogId::Custom,
            label: "zero".into(),
            form: Form::Zero,
            singularity_order: None,
            support_radius: Some(0.0),
            translation_invariant: true,
            integrable: true,
            d_cuts: vec![],
            abs_breaks: vec![],
            params: Default::default(),
        }
    }

    /// A user-supplied kernel. Tail masses are computed numerically, which
    /// requires either a support radius or decay at infinity.
    pub fn custom(
        dim: usize,
        label: &str,
        f: PointFn,
        singularity_order: Option<f64>,
        support_radius: Option<f64>,
    ) -> Kernel {
        Kernel {
            dim,
            id: CatalogId::Custom,
            label: label.into(),
            form: Form::Custom { f },
            singularity_order,
            support_radius,
            translation_invariant: false,
            integrable: singularity_order.is_none(),
            d_cuts: vec![],
            abs_breaks: vec![],
            params: Default::default(),
        }
    }

    /// A user-supplied kernel k(x, y) = g(x - y); g receives the offset
    /// computed without cancellation.
    pub fn difference(
        dim: usize,
        label: &str,
        g: OffsetFn,
        singularity_order: Option<f64>,
        support_radius: Option<f64>,
    ) -> Kernel {
        Kernel {
            form: Form::Difference { g },
            translation_invariant: true,
            ..Kernel::custom(dim, label, Arc::new(|_: &Point, _: &Point| 0.0), singularity_order, support_radius)
        }
    }

    /// Declares offsets x - y across which a custom kernel may jump.
    pub fn with_d_cuts(mut self, cuts: Vec<f64>) -> Kernel {
        self.d_cuts = cuts;
        self
    }

    /// Declares that a custom kernel depends on x - y only.
    pub fn with_translation_invariance(mut self) -> Kernel {
        self.translation_invariant = true;
        self
    }

    /// The kernel a(x, y) k(x, y) for a bounded positive modulation `a`.
    pub fn scaled(&self, a: PointFn, label: &str) -> Kernel {
        let mut k = self.clone();
        k.form = Form::Scaled {
            inner: Box::new(self.clone()),
            a,
        };
        k.label = label.into();
        k.translation_invariant = false;
        k
    }

    #[inline]
    fn raw(&self, x: &Point, y: &Point, d: &Point) -> f64 {
        self.form.raw(self.dim, x, y, d)
    }

    /// k(x, y). On the diagonal this is +inf for non-integrable kernels and
    /// the formula value otherwise.
    pub fn evaluate(&self, x: &Point, y: &Point) -> f64 {
        let d = [x[0] - y[0], if self.dim == 2 { x[1] - y[1] } else { 0.0 }];
        if d[0] == 0.0 && d[1] == 0.0 && !self.integrable {
            return f64::INFINITY;
        }
        self.raw(x, y, &d)
    }

    /// k(x, x + z) with the offset passed exactly.
    #[inline]
    pub fn forward(&self, x: &Point, z: &Point) -> f64 {
        let y = [x[0] + z[0], x[1] + z[1]];
        self.raw(x, &y, &[-z[0], -z[1]])
    }

    /// k(x + z, x) with the offset passed exactly.
    #[inline]
    pub fn backward(&self, x: &Point, z: &Point) -> f64 {
        let y = [x[0] + z[0], x[1] + z[1]];
        self.raw(&y, x, z)
    }

    /// (k_s(x, x + z), k_a(x, x + z)).
    #[inline]
    pub fn parts_offset(&self, x: &Point, z: &Point) -> (f64, f64) {
        if let Form::VarOrder { vo, truncation } = &self.form {
            let y = [x[0] + z[0], x[1] + z[1]];
            return var_order_parts(vo, *truncation, x[0], y[0], -z[0]);
        }
        let a = self.forward(x, z);
        let b = self.backward(x, z);
        split(a, b)
    }

    /// (k_s(x, y), k_a(x, y)) with the difference d = x - y supplied by the
    /// caller (quadrature code computes it without cancellation).
    #[inline]
    pub fn parts_with_difference(&self, x: &Point, y: &Point, d: &Point) -> (f64, f64) {
        if let Form::VarOrder { vo, truncation } = &self.form {
            return var_order_parts(vo, *truncation, x[0], y[0], d[0]);
        }
        let a = self.raw(x, y, d);
        let b = self.raw(y, x, &[-d[0], -d[1]]);
        split(a, b)
    }

    pub fn decompose(&self) -> KernelDecomposition<'_> {
        KernelDecomposition { kernel: self }
    }

    /// Two-sided tail mass: integral of k_s(x, .) over |y - x| > r.
    pub fn tail_mass(&self, x: &Point, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Err(NldError::Parameter("tail radius must be positive".into()));
        }
        if let Some(s) = self.support_radius {
            if s <= r {
                return Ok(0.0);
            }
        }
        if let Some(v) = self.analytic_tail_mass(r) {
            return Ok(v);
        }
        if self.dim == 1 {
            let (a, _) = self.one_sided_tail(x[0], 1.0, r)?;
            let (b, _) = self.one_sided_tail(x[0], -1.0, r)?;
            Ok(a + b)
        } else {
            crate::radial::tail_mass_2d(self, x, r)
        }
    }

    fn analytic_tail_mass(&self, r: f64) -> Option<f64> {
        let sphere = if self.dim == 1 { 2.0 } else { 2.0 * PI };
        match &self.form {
            Form::Zero => Some(0.0),
            Form::Stable { alpha } => Some(sphere * r.powf(-alpha) / alpha),
            Form::StableHalf { alpha } => Some(0.5 * sphere * r.powf(-alpha) / alpha),
            Form::StableCone { alpha, cone } => {
                let both = 0.5 * (cone.measure(self.dim) + cone.reflect().measure(self.dim));
                Some(both * r.powf(-alpha) / alpha)
            }
            Form::Ball { radius } => Some(if r >= *radius {
                0.0
            } else {
                sphere_volume(self.dim, *radius) - sphere_volume(self.dim, r)
            }),
            Form::Annulus { inner, outer } => {
                let lo = r.max(*inner);
                Some(if lo >= *outer {
                    0.0
                } else {
                    sphere_volume(self.dim, *outer) - sphere_volume(self.dim, lo)
                })
            }
            _ => None,
        }
    }

    /// One-sided tails in d = 1: integrals of (k_s, k_a)(x, x + dir t) over t > r.
    pub fn one_sided_tail(&self, x: f64, dir: f64, r: f64) -> Result<(f64, f64)> {
        if self.dim != 1 {
            return Err(NldError::Parameter("one-sided tails are defined in d = 1".into()));
        }
        if let Some(s) = self.support_radius {
            if s <= r {
                return Ok((0.0, 0.0));
            }
        }
        match &self.form {
            Form::Zero => Ok((0.0, 0.0)),
            Form::Stable { alpha } => Ok((r.powf(-alpha) / alpha, 0.0)),
            Form::StableHalf { alpha } => {
                let m = 0.5 * r.powf(-alpha) / alpha;
                Ok((m, -dir * m))
            }
            Form::StableCone { alpha, cone } => {
                let m = r.powf(-alpha) / alpha;
                let fwd = cone.contains(1, &[-dir, 0.0]) as u8 as f64;
                let bwd = cone.contains(1, &[dir, 0.0]) as u8 as f64;
                Ok((0.5 * (fwd + bwd) * m, 0.5 * (fwd - bwd) * m))
            }
            Form::StablePerturbed { alpha, .. } => {
                let main = r.powf(-alpha) / alpha;
                if r >= 1.0 {
                    Ok((main, 0.0))
                } else {
                    let (s, a) = self.numeric_one_sided(x, dir, r, 1.0, true)?;
                    Ok((main + s, a))
                }
            }
            Form::TwoCone { alpha, c1, .. } => {
                let m = r.powf(-alpha) / alpha;
                let fwd = c1.contains(1, &[-dir, 0.0]) as u8 as f64;
                let bwd = c1.contains(1, &[dir, 0.0]) as u8 as f64;
                let (ms, ma) = (0.5 * (fwd + bwd) * m, 0.5 * (fwd - bwd) * m);
                if r >= 1.0 {
                    Ok((ms, ma))
                } else {
                    let (s, a) = self.numeric_one_sided(x, dir, r, 1.0, true)?;
                    Ok((ms + s, ma + a))
                }
            }
            _ => {
                let hi = self.support_radius.unwrap_or(crate::radial::FAR_RADIUS);
                self.numeric_one_sided(x, dir, r, hi, false)
            }
        }
    }

    /// Numerical one-sided tail over t in (lo, hi). With `perturbation_only`
    /// the power-law main part of Stable-type kernels is subtracted (it is
    /// added analytically by the caller).
    fn numeric_one_sided(
        &self,
        x: f64,
        dir: f64,
        lo: f64,
        hi: f64,
        perturbation_only: bool,
    ) -> Result<(f64, f64)> {
        let xp = [x, 0.0];
        let main = |t: f64| -> (f64, f64) {
            match &self.form {
                Form::StablePerturbed { alpha, .. } => (t.powf(-1.0 - alpha), 0.0),
                Form::TwoCone { alpha, c1, .. } => {
                    let fwd = c1.contains(1, &[-dir, 0.0]) as u8 as f64;
                    let bwd = c1.contains(1, &[dir, 0.0]) as u8 as f64;
                    let v = t.powf(-1.0 - alpha);
                    (0.5 * (fwd + bwd) * v, 0.5 * (fwd - bwd) * v)
                }
                _ => (0.0, 0.0),
            }
        };
        let breaks = crate::radial::radial_breaks_1d(self, x, lo, hi);
        let edges = crate::radial::radial_edges(lo, hi, &breaks);
        let rule = gauss(12);
        let (mut s, mut a) = (0.0, 0.0);
        let mut last_panel = 0.0;
        for w in edges.windows(2) {
            let (mut ps, mut pa) = (0.0, 0.0);
            let len = w[1] - w[0];
            for (t, wt) in rule.nodes.iter().zip(&rule.weights) {
                let tt = w[0] + len * t;
                let (ks, ka) = self.parts_offset(&xp, &[dir * tt, 0.0]);
                let (ms, ma) = if perturbation_only { main(tt) } else { (0.0, 0.0) };
                ps += wt * (ks - ms);
                pa += wt * (ka - ma);
            }
            s += ps * len;
            a += pa * len;
            last_panel = ps * len;
        }
        if !s.is_finite() || !a.is_finite() {
            return Err(NldError::Tail(format!(
                "{}: non-finite tail at x = {x}",
                self.label
            )));
        }
        if self.support_radius.is_none()
            && !perturbation_only
            && last_panel.abs() > 1e-10 * s.abs().max(1e-300)
        {
            return Err(NldError::Tail(format!(
                "{}: tail does not decay fast enough to certify at x = {x}",
                self.label
            )));
        }
        Ok((s, a))
    }
}

fn sphere_volume(dim: usize, r: f64) -> f64 {
    if dim == 1 {
        2.0 * r
    } else {
        PI * r * r
    }
}

/// (k_s, k_a) for b(x)|x - y|^{-1 - alpha(x)}, with the difference of the two
/// orientations formed from alpha(y) - alpha(x) directly.
fn var_order_parts(vo: &VariableOrder, trunc: Option<f64>, x: f64, y: f64, d: f64) -> (f64, f64) {
    let r = d.abs();
    if r == 0.0 {
        return (f64::INFINITY, 0.0);
    }
    if let Some(t) = trunc {
        if r >= t {
            return (0.0, 0.0);
        }
    }
    let ax = vo.alpha(x);
    let ay = vo.alpha(y);
    let bx = vo.b(x);
    let by = vo.b(y);
    let kx = bx * r.powf(-1.0 - ax);
    let ky = by * r.powf(-1.0 - ay);
    let delta = vo.alpha_diff(x, y, d);
    let diff = r.powf(-1.0 - ax) * (-vo.slope * delta - by * (-delta * r.ln()).exp_m1());
    (0.5 * (kx + ky), 0.5 * diff)
}

#[inline]
fn split(a: f64, b: f64) -> (f64, f64) {
    if a.is_infinite() && b.is_infinite() {
        return (f64::INFINITY, 0.0);
    }
    (0.5 * (a + b), 0.5 * (a - b))
}

/// Symmetric and antisymmetric parts k_s, k_a of a kernel. Both evaluators
/// call the base kernel at (x, y) and (y, x).
#[derive(Clone, Copy)]
pub struct KernelDecomposition<'a> {
    kernel: &'a Kernel,
}

impl KernelDecomposition<'_> {
    pub fn sym(&self, x: &Point, y: &Point) -> f64 {
        split(self.kernel.evaluate(x, y), self.kernel.evaluate(y, x)).0
    }

    pub fn anti(&self, x: &Point, y: &Point) -> f64 {
        split(self.kernel.evaluate(x, y), self.kernel.evaluate(y, x)).1
    }

    pub fn both(&self, x: &Point, y: &Point) -> (f64, f64) {
        split(self.kernel.evaluate(x, y), self.kernel.evaluate(y, x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cone_membership_is_half_open() {
        let c = Cone::new(vec![[0.0, 0.5 * PI]]).unwrap();
        assert!(c.contains(2, &[1.0, 0.0]));
        assert!(!c.contains(2, &[0.0, 1.0]));
        assert!(c.contains(2, &[1.0, 1.0]));
        assert!(!c.contains(2, &[0.0, 0.0]));
        assert!((c.measure(2) - 0.5 * PI).abs() < 1e-15);
        assert!(!c.is_symmetric(2));
        let sym = Cone::new(vec![[-0.25 * PI, 0.25 * PI], [0.75 * PI, 1.25 * PI]]).unwrap();
        assert!(sym.is_symmetric(2));
    }

    #[test]
    fn one_dimensional_cones() {
        assert_eq!(Cone::full().measure(1), 2.0);
        assert_eq!(Cone::positive().measure(1), 1.0);
        assert!(Cone::positive().contains(1, &[0.3, 0.0]));
        assert!(!Cone::positive().contains(1, &[-0.3, 0.0]));
        assert!(Cone::full().is_symmetric(1));
        assert!(!Cone::positive().is_symmetric(1));
    }

    #[test]
    fn smoothstep_profile_is_clamped() {
        let vo = VariableOrder {
            alpha1: 1.0,
            alpha2: 1.5,
            center: 0.0,
            width: 0.5,
            slope: 2.0,
        };
        assert_eq!(vo.alpha(-3.0), 1.0);
        assert_eq!(vo.alpha(3.0), 1.5);
        assert!((vo.alpha(0.0) - 1.25).abs() < 1e-15);
        assert_eq!(vo.b_bounds(), (1.0, 2.0));
    }
}
