//! Constructors for the catalog kernels and the two-cone introductory kernel.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{NldError, Result};
use crate::kernel::{measure_where, CatalogId, Cone, Form, Kernel, Perturbation, VariableOrder};

/// Angular interval sets for the cone-based examples. `i1` is the cone of
/// Ex4 / Ex9 and the main cone of Ex12; `i2` is the perturbation cone of Ex12.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i1: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i2: Option<Vec<[f64; 2]>>,
}

/// Free parameters of a catalog kernel. Missing entries take the documented
/// defaults; the kernel stores the fully resolved set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cones: Option<ConeParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable_order: Option<VariableOrder>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_inner: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_outer: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cusp_b: Option<f64>,
}

impl CatalogParams {
    pub fn with_alpha(alpha: f64) -> Self {
        CatalogParams {
            alpha: Some(alpha),
            ..Default::default()
        }
    }
}

/// Default dimension of each catalog entry.
pub fn default_dim(id: CatalogId) -> usize {
    match id {
        CatalogId::Ex4 | CatalogId::Ex9 | CatalogId::Ex12 | CatalogId::Ex13 => 2,
        _ => 1,
    }
}

fn one_dim_only(id: CatalogId) -> bool {
    matches!(
        id,
        CatalogId::Ex5
            | CatalogId::Ex6
            | CatalogId::Ex7
            | CatalogId::Ex11
            | CatalogId::Ex14
            | CatalogId::Intro
    )
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(NldError::Parameter(format!(
            "alpha = {alpha} outside (0, 2)"
        )));
    }
    Ok(())
}

fn check_beta(alpha: f64, beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 0.5 * alpha) {
        return Err(NldError::Parameter(format!(
            "beta = {beta} violates 0 < beta < alpha/2 = {}",
            0.5 * alpha
        )));
    }
    Ok(())
}

fn cone_or(
    given: Option<&Vec<[f64; 2]>>,
    dflt: impl FnOnce() -> Cone,
) -> Result<Cone> {
    match given {
        Some(iv) => Cone::new(iv.clone()),
        None => Ok(dflt()),
    }
}

fn symmetric_default(dim: usize) -> Cone {
    if dim == 1 {
        Cone::full()
    } else {
        Cone {
            intervals: vec![[-0.25 * PI, 0.25 * PI], [0.75 * PI, 1.25 * PI]],
        }
    }
}

pub fn make_catalog_kernel_by_name(id: &str, params: &CatalogParams) -> Result<Kernel> {
    let cid = CatalogId::parse(id).ok_or_else(|| NldError::UnknownKernel(id.to_string()))?;
    make_catalog_kernel(cid, params)
}

/// Builds catalog kernel `id`. Parameters outside their admissible ranges are
/// rejected.
pub fn make_catalog_kernel(id: CatalogId, params: &CatalogParams) -> Result<Kernel> {
    if id == CatalogId::Custom {
        return Err(NldError::UnknownKernel(
            "custom kernels are built with Kernel::custom".into(),
        ));
    }
    let dim = params.dim.unwrap_or_else(|| default_dim(id));
    if dim != 1 && dim != 2 {
        return Err(NldError::Parameter(format!("dimension {dim} not in {{1, 2}}")));
    }
    if dim == 2 && one_dim_only(id) {
        return Err(NldError::Parameter(format!("{id} is defined for d = 1 only")));
    }
    let mut p = params.clone();
    p.dim = Some(dim);
    let cones = params.cones.clone().unwrap_or_default();

    let mut k = Kernel {
        dim,
        id,
        label: id.as_str().to_string(),
        form: Form::Zero,
        singularity_order: None,
        support_radius: None,
        translation_invariant: true,
        integrable: true,
        d_cuts: vec![],
        abs_breaks: vec![],
        params: CatalogParams::default(),
    };

    match id {
        CatalogId::Ex1 => {
            k.form = Form::Ball { radius: 1.0 };
            k.support_radius = Some(1.0);
            k.d_cuts = vec![-1.0, 1.0];
        }
        CatalogId::Ex2 => {
            let r = params.r_inner.unwrap_or(1.0);
            let big = params.r_outer.unwrap_or(2.0);
            if !(r > 0.0 && r < big && big.is_finite()) {
                return Err(NldError::Parameter(format!(
                    "annulus radii must satisfy 0 < r < R, got r = {r}, R = {big}"
                )));
            }
            p.r_inner = Some(r);
            p.r_outer = Some(big);
            k.form = Form::Annulus { inner: r, outer: big };
            k.support_radius = Some(big);
            k.d_cuts = vec![-big, -r, r, big];
        }
        CatalogId::Ex3 => {
            k.form = Form::HalfBall;
            k.support_radius = Some(1.0);
            k.d_cuts = vec![-1.0, 0.0, 1.0];
        }
        CatalogId::Ex4 => {
            let cone = cone_or(cones.i1.as_ref(), || {
                if dim == 1 {
                    Cone::positive()
                } else {
                    Cone {
                        intervals: vec![[0.0, 0.5 * PI]],
                    }
                }
            })?;
            p.cones = Some(ConeParams {
                i1: Some(cone.intervals.clone()),
                i2: None,
            });
            k.form = Form::ConeBall { cone };
            k.support_radius = Some(1.0);
            k.d_cuts = vec![-1.0, 0.0, 1.0];
        }
        CatalogId::Ex5 => {
            let g = params
                .perturbation
                .clone()
                .unwrap_or(Perturbation::ProductCosine { amplitude: 0.5 });
            let (lo, _) = g.bounds();
            if !(1.0 + lo > 0.0) {
                return Err(NldError::Parameter(format!(
                    "Ex5 needs 1 + g >= c > 0; inf(1 + g) = {}",
                    1.0 + lo
                )));
            }
            p.perturbation = Some(g.clone());
            k.translation_invariant = g.depends_on_difference_only();
            k.form = Form::BallG { g };
            k.support_radius = Some(1.0);
            k.d_cuts = vec![-1.0, 0.0, 1.0];
        }
        CatalogId::Ex6 => {
            k.form = Form::DomainD;
            k.support_radius = Some(2.0);
            k.translation_invariant = false;
            k.d_cuts = vec![-1.0, 0.0, 1.0];
            k.abs_breaks = vec![-1.0, 0.0, 1.0];
        }
        CatalogId::Ex7 => {
            k.form = Form::ShiftedSign;
            k.support_radius = Some(4.0);
            k.translation_invariant = false;
            k.d_cuts = vec![-4.0, 0.0, 4.0];
            k.abs_breaks = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        }
        CatalogId::Ex8 => {
            let alpha = params.alpha.unwrap_or(1.0);
            check_alpha(alpha)?;
            p.alpha = Some(alpha);
            k.form = Form::Stable { alpha };
            k.singularity_order = Some(alpha);
            k.integrable = false;
        }
        CatalogId::Ex9 => {
            let alpha = params.alpha.unwrap_or(1.0);
            check_alpha(alpha)?;
            let cone = cone_or(cones.i1.as_ref(), || symmetric_default(dim))?;
            if !cone.is_symmetric(dim) {
                return Err(NldError::Parameter("Ex9 needs a symmetric cone I = -I".into()));
            }
            p.alpha = Some(alpha);
            p.cones = Some(ConeParams {
                i1: Some(cone.intervals.clone()),
                i2: None,
            });
            k.form = Form::StableCone { alpha, cone };
            k.singularity_order = Some(alpha);
            k.integrable = false;
            k.d_cuts = vec![0.0];
        }
        CatalogId::Ex10 => {
            let alpha = params.alpha.unwrap_or(0.5);
            check_alpha(alpha)?;
            p.alpha = Some(alpha);
            k.form = Form::StableHalf { alpha };
            k.singularity_order = Some(alpha);
            k.integrable = false;
            k.d_cuts = vec![0.0];
        }
        CatalogId::Ex11 => {
            let alpha = params.alpha.unwrap_or(1.0);
            let beta = params.beta.unwrap_or(0.25);
            check_alpha(alpha)?;
            check_beta(alpha, beta)?;
            let g = params
                .perturbation
                .clone()
                .unwrap_or(Perturbation::Constant { value: 0.5 });
            p.alpha = Some(alpha);
            p.beta = Some(beta);
            p.perturbation = Some(g.clone());
            k.translation_invariant = g.depends_on_difference_only();
            k.form = Form::StablePerturbed { alpha, beta, g };
            k.singularity_order = Some(alpha);
            k.integrable = false;
            k.d_cuts = vec![-1.0, 0.0, 1.0];
        }
        CatalogId::Ex12 | CatalogId::Intro => {
            let alpha = params.alpha.unwrap_or(1.0);
            let beta = params.beta.unwrap_or(0.25);
            check_alpha(alpha)?;
            check_beta(alpha, beta)?;
            let c1 = cone_or(cones.i1.as_ref(), || {
                if id == CatalogId::Intro || dim == 1 {
                    Cone::full()
                } else {
                    Cone {
                        intervals: vec![[-0.25 * PI, 0.25 * PI], [0.75 * PI, 1.25 * PI]],
                    }
                }
            })?;
            let c2 = cone_or(cones.i2.as_ref(), || {
                if dim == 1 {
                    Cone::positive()
                } else {
                    Cone {
                        intervals: vec![[PI / 3.0, 2.0 * PI / 3.0]],
                    }
                }
            })?;
            if !c1.is_symmetric(dim) {
                return Err(NldError::Parameter("the main cone must satisfy I1 = -I1".into()));
            }
            if id == CatalogId::Ex12 {
                let overlap = if dim == 1 {
                    (c1.contains_angle(0.0) && c2.contains_angle(0.0))
                        || (c1.contains_angle(PI) && c2.contains_angle(PI))
                } else {
                    measure_where(&[c1.clone(), c2.clone()], |m| m[0] && m[1]) > 0.0
                };
                if overlap {
                    return Err(NldError::Parameter("Ex12 needs disjoint I1 and I2".into()));
                }
                let asym = if dim == 1 {
                    !c2.is_symmetric(1)
                } else {
                    measure_where(&[c2.reflect(), c2.clone()], |m| m[0] && !m[1]) > 0.0
                };
                if !asym {
                    return Err(NldError::Parameter(
                        "Ex12 needs |-I2 \\ I2| > 0".into(),
                    ));
                }
            }
            p.alpha = Some(alpha);
            p.beta = Some(beta);
            p.cones = Some(ConeParams {
                i1: Some(c1.intervals.clone()),
                i2: Some(c2.intervals.clone()),
            });
            k.form = Form::TwoCone { alpha, beta, c1, c2 };
            k.singularity_order = Some(alpha);
            k.integrable = false;
            k.d_cuts = vec![-1.0, 0.0, 1.0];
        }
        CatalogId::Ex13 => {
            let ap = params.alpha.unwrap_or(1.5);
            let b = params.cusp_b.unwrap_or(0.5);
            if !(b > 0.0 && b < 1.0) {
                return Err(NldError::Parameter(format!("cusp exponent b = {b} outside (0, 1)")));
            }
            if !(ap > 0.0 && ap < 1.0 + 1.0 / b) {
                return Err(NldError::Parameter(format!(
                    "alpha' = {ap} outside (0, 1 + 1/b)"
                )));
            }
            let eff = ap - (1.0 / b - 1.0);
            if eff <= 0.0 {
                return Err(NldError::Parameter(format!(
                    "effective order alpha' - (1/b - 1) = {eff} must be positive"
                )));
            }
            p.alpha = Some(ap);
            p.cusp_b = Some(b);
            k.form = Form::Cusp { alpha_prime: ap, b };
            k.singularity_order = Some(eff);
            k.integrable = false;
            k.support_radius = Some(1.0);
            k.d_cuts = vec![-1.0, 1.0];
        }
        CatalogId::Ex14 => {
            let vo = params.variable_order.clone().unwrap_or(VariableOrder {
                alpha1: 1.0,
                alpha2: 1.5,
                center: 0.0,
                width: 0.5,
                slope: 2.0,
            });
            check_alpha(vo.alpha1)?;
            check_alpha(vo.alpha2)?;
            if vo.alpha1 > vo.alpha2 {
                return Err(NldError::Parameter("variable order needs alpha1 <= alpha2".into()));
            }
            if !(vo.width > 0.0) {
                return Err(NldError::Parameter("variable order width must be positive".into()));
            }
            let (c1, _) = vo.b_bounds();
            if !(c1 > 0.0) {
                return Err(NldError::Parameter(format!(
                    "coefficient b must stay positive, inf b = {c1}"
                )));
            }
            let trunc = params.truncation_radius;
            if let Some(r) = trunc {
                if !(r > 1.0 && r.is_finite()) {
                    return Err(NldError::Parameter(format!(
                        "truncation radius R = {r} must exceed 1"
                    )));
                }
                k.support_radius = Some(r);
                k.d_cuts = vec![-r, r];
                k.label = "Ex14'".into();
            }
            k.abs_breaks = vec![vo.center - vo.width, vo.center + vo.width];
            p.variable_order = Some(vo.clone());
            k.singularity_order = Some(vo.alpha2);
            k.integrable = false;
            k.translation_invariant = false;
            k.form = Form::VarOrder { vo, truncation: trunc };
        }
        CatalogId::Custom => unreachable!(),
    }
    if id != CatalogId::Ex14 && params.truncation_radius.is_some() {
        return Err(NldError::Parameter(format!(
            "truncation_radius is only meaningful for Ex14, not {id}"
        )));
    }
    k.params = p;
    if id == CatalogId::Ex11 {
        check_nonnegative(&k)?;
    }
    Ok(k)
}

/// Evaluates k on probe pairs near |x - y| = 1 (where the perturbation has the
/// most weight relative to the main part) and errors on a negative value.
fn check_nonnegative(k: &Kernel) -> Result<()> {
    for i in 0..=16 {
        let x = -2.0 + 0.25 * i as f64;
        for &r in &[1.0 - 1e-9, 0.9, 0.5, 0.1, 1e-3] {
            for s in [-1.0, 1.0] {
                let y = x + s * r;
                let v = k.evaluate(&[x, 0.0], &[y, 0.0]);
                if v < 0.0 {
                    return Err(NldError::Parameter(format!(
                        "kernel negative at probe pair ({x}, {y}): k = {v}; the perturbation must keep k >= 0"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// The rows of the condition table: each catalog example once, with the
/// g-dependent entries instantiated by two perturbations.
pub fn table_rows() -> Vec<(String, CatalogId, CatalogParams)> {
    let mut rows = Vec::new();
    for id in CatalogId::EXAMPLES {
        match id {
            CatalogId::Ex5 => {
                rows.push((
                    "Ex5[g=product_cosine]".to_string(),
                    id,
                    CatalogParams {
                        perturbation: Some(Perturbation::ProductCosine { amplitude: 0.5 }),
                        ..Default::default()
                    },
                ));
                rows.push((
                    "Ex5[g=cosine]".to_string(),
                    id,
                    CatalogParams {
                        perturbation: Some(Perturbation::Cosine { amplitude: 0.5 }),
                        ..Default::default()
                    },
                ));
            }
            CatalogId::Ex11 => {
                rows.push((
                    "Ex11[g=constant]".to_string(),
                    id,
                    CatalogParams {
                        perturbation: Some(Perturbation::Constant { value: 0.5 }),
                        ..Default::default()
                    },
                ));
                rows.push((
                    "Ex11[g=cosine]".to_string(),
                    id,
                    CatalogParams {
                        perturbation: Some(Perturbation::Cosine { amplitude: 0.5 }),
                        ..Default::default()
                    },
                ));
            }
            _ => rows.push((id.as_str().to_string(), id, CatalogParams::default())),
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(id: CatalogId) -> Kernel {
        make_catalog_kernel(id, &CatalogParams::default()).unwrap()
    }

    #[test]
    fn ball_kernel_value() {
        assert_eq!(k(CatalogId::Ex1).evaluate(&[0.0, 0.0], &[0.5, 0.0]), 1.0);
        assert_eq!(k(CatalogId::Ex1).evaluate(&[0.0, 0.0], &[1.5, 0.0]), 0.0);
    }

    #[test]
    fn stable_kernel_value() {
        let v = k(CatalogId::Ex8).evaluate(&[0.0, 0.0], &[2.0, 0.0]);
        assert!((v - 0.25).abs() < 1e-15);
    }

    #[test]
    fn variable_order_with_constant_profile_reduces_to_stable() {
        let p = CatalogParams {
            variable_order: Some(VariableOrder {
                alpha1: 1.5,
                alpha2: 1.5,
                center: 0.0,
                width: 1.0,
                slope: 0.0,
            }),
            ..Default::default()
        };
        let kern = make_catalog_kernel(CatalogId::Ex14, &p).unwrap();
        let v = kern.evaluate(&[0.0, 0.0], &[0.5, 0.0]);
        assert!((v - 0.5f64.powf(-2.5)).abs() < 1e-12);
        assert!((v - 5.65685).abs() < 1e-5);
    }

    #[test]
    fn half_ball_decomposition() {
        let kern = k(CatalogId::Ex3);
        let (s, a) = kern.decompose().both(&[0.5, 0.0], &[0.2, 0.0]);
        assert_eq!((s, a), (0.5, 0.5));
    }

    #[test]
    fn half_line_stable_decomposition() {
        let kern = make_catalog_kernel(CatalogId::Ex10, &CatalogParams::with_alpha(0.5)).unwrap();
        let (s, a) = kern.decompose().both(&[1.0, 0.0], &[0.5, 0.0]);
        assert!((s - 0.5 * 0.5f64.powf(-1.5)).abs() < 1e-14);
        assert!((a - 1.41421356).abs() < 1e-7);
    }

    #[test]
    fn parameter_ranges_are_enforced() {
        assert!(make_catalog_kernel(CatalogId::Ex8, &CatalogParams::with_alpha(2.5)).is_err());
        let bad = CatalogParams {
            alpha: Some(1.0),
            beta: Some(0.5),
            ..Default::default()
        };
        assert!(make_catalog_kernel(CatalogId::Ex11, &bad).is_err());
        assert!(make_catalog_kernel(CatalogId::Ex12, &bad).is_err());
        let negative = CatalogParams {
            perturbation: Some(Perturbation::Cosine { amplitude: 1.5 }),
            ..Default::default()
        };
        let err = make_catalog_kernel(CatalogId::Ex11, &negative).unwrap_err();
        assert!(err.to_string().contains("negative"));
        assert!(matches!(
            make_catalog_kernel_by_name("Ex99", &CatalogParams::default()),
            Err(NldError::UnknownKernel(_))
        ));
    }

    #[test]
    fn ex12_requires_disjoint_cones() {
        let p = CatalogParams {
            cones: Some(ConeParams {
                i1: Some(vec![[-0.25 * PI, 0.25 * PI], [0.75 * PI, 1.25 * PI]]),
                i2: Some(vec![[0.0, 0.5 * PI]]),
            }),
            ..Default::default()
        };
        assert!(make_catalog_kernel(CatalogId::Ex12, &p).is_err());
    }

    #[test]
    fn cusp_effective_order() {
        let kern = k(CatalogId::Ex13);
        assert!((kern.singularity_order().unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn tail_mass_examples() {
        let x = [0.3, 0.0];
        let ex8 = k(CatalogId::Ex8);
        assert!((ex8.tail_mass(&x, 2.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(k(CatalogId::Ex1).tail_mass(&x, 1.0).unwrap(), 0.0);
        assert!((k(CatalogId::Ex2).tail_mass(&x, 1.5).unwrap() - 1.0).abs() < 1e-15);
    }
}
