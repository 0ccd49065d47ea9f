//! Galerkin discretization and condition checks for nonlocal operators with
//! general (possibly nonsymmetric) jump kernels.

pub mod analysis;
pub mod assembly;
pub mod catalog;
pub mod conditions;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod mesh;
pub mod pairquad;
pub mod quadrature;
pub mod radial;
pub mod solve;

pub use catalog::{make_catalog_kernel, make_catalog_kernel_by_name, CatalogParams, ConeParams};
pub use error::{NldError, Result};
pub use kernel::{CatalogId, Cone, Kernel, KernelDecomposition, Perturbation, Point, VariableOrder};
