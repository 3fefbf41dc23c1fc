//! Numerical laboratory for geodesic flows in tube coordinates: metric
//! charts, Jacobi propagation, metric deformation and cone-field
//! diagnostics.
//!
//! All numerics are generic over the scalar type through [`scalar::Real`];
//! the aliases below fix `f64`, which is what the scenario runner uses.

pub mod cone;
pub mod deform;
pub mod error;
pub mod flow;
pub mod geom;
pub mod linalg;
pub mod models;
pub mod ode;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

/// Concrete `f64` aliases for the main chart-level types.
pub type ChartPointF64 = geom::ChartPoint<f64>;
pub type MetricChartF64 = geom::MetricChart<f64>;
pub type CurvatureDataF64 = geom::CurvatureData<f64>;
pub type MatF64 = linalg::Mat<f64>;
pub type ProductModelF64 = models::ProductModel<f64>;
pub type PhasePointF64 = flow::PhasePoint<f64>;
pub type JacobiStateF64 = flow::JacobiState<f64>;
pub type OrbitSegmentF64 = flow::OrbitSegment<f64>;
pub type BumpProfileF64 = deform::BumpProfile<f64>;
pub type DeformationSpecF64 = deform::DeformationSpec<f64>;
pub type SplittingVerdictF64 = cone::SplittingVerdict<f64>;
