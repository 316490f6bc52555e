//! Square-function machinery on sampled Ahlfors–David regular sets.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*F64`/`*F32` aliases below fix the precision.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calderon;
pub mod dyadic;
pub mod error;
pub mod functionals;
pub mod index;
pub mod kernels;
pub mod whitney;
pub mod qspace;
pub mod scalar;
pub mod sets;
pub mod tentspace;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type QuasiMetricSpaceF64 = qspace::QuasiMetricSpace<f64>;
pub type QuasiMetricSpaceF32 = qspace::QuasiMetricSpace<f32>;
pub type RegularizedMetricF64 = qspace::RegularizedMetric<f64>;
pub type RegularizedMetricF32 = qspace::RegularizedMetric<f32>;
pub type AdrSetF64 = sets::AdrSet<f64>;
pub type AdrSetF32 = sets::AdrSet<f32>;
pub type AmbientGridF64 = sets::AmbientGrid<f64>;
pub type AmbientGridF32 = sets::AmbientGrid<f32>;
pub type DyadicGridF64 = dyadic::DyadicGrid<f64>;
pub type DyadicGridF32 = dyadic::DyadicGrid<f32>;
pub type WhitneyCoverF64 = whitney::WhitneyCover<f64>;
pub type WhitneyCoverF32 = whitney::WhitneyCover<f32>;
pub type TentStructureF64 = whitney::TentStructure<f64>;
pub type TentStructureF32 = whitney::TentStructure<f32>;
pub type KernelF64 = kernels::Kernel<f64>;
pub type KernelF32 = kernels::Kernel<f32>;
pub type ApertureGeometryF64 = tentspace::ApertureGeometry<f64>;
pub type ApertureGeometryF32 = tentspace::ApertureGeometry<f32>;
pub type AtiFamilyF64 = calderon::AtiFamily<f64>;
pub type AtiFamilyF32 = calderon::AtiFamily<f32>;
