//! Green's-function level sets, trace-free Hessians and monotone quantities
//! on model Riemannian manifolds.
// `!(x > y)` rejects NaN along with the failing comparison.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::suspicious_arithmetic_impl)]

pub mod error;
pub mod geom_quantities;
pub mod jet;
pub mod numeric;
pub mod greens;
pub mod identity_checker;
pub mod model_manifolds;
pub mod monotonicity;
pub mod tensor_core;

pub use error::{GeomError, Result};
pub use jet::Jet;
pub use geom_quantities::{BetaParams, LevelPointQuantities};
pub use greens::USource;
pub use identity_checker::{CheckSuiteConfig, SuiteReport};
pub use model_manifolds::{ModelSpec, Profile};
pub use monotonicity::{LevelSets, MonotoneReport, MonotoneSuite, QuantityId, RadiusGrid};
