//! Triangle-based robust translation averaging.
//!
//! Camera locations are recovered from pairwise unit directions in four
//! stages: triangle prefiltering ([`prefilter`]), log-scale synchronization
//! of overlapping triangles ([`scalesync`]), coverage-driven triangle
//! selection with median edge-length aggregation ([`edgeestimate`]), and
//! robust displacement averaging ([`locrecover`]). [`pipeline`] chains them.
//!
//! The numerical stages are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the double-precision instantiation used by the CLI.

pub mod edgeestimate;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod io;
pub mod locrecover;
pub mod loss;
pub mod pipeline;
pub mod prefilter;
pub mod rng;
pub mod scalar;
pub mod scalesync;
pub mod solver;
pub mod synthgen;
pub mod theorychecks;
pub mod vec3;
pub mod viewgraph;

pub use error::{Result, TripError};
pub use loss::{LossFamily, LossSpec};
pub use scalar::Real;
pub use solver::SolverMode;

pub type ViewingGraphF64 = viewgraph::ViewingGraph<f64>;
pub type ViewingGraphF32 = viewgraph::ViewingGraph<f32>;
pub type TrianglePoolF64 = prefilter::TrianglePool<f64>;
pub type ScaleSolutionF64 = scalesync::ScaleSolution<f64>;
pub type ScaleConstraintF64 = scalesync::ScaleConstraint<f64>;
pub type EdgeLengthEstimateF64 = edgeestimate::EdgeLengthEstimate<f64>;
pub type LocationEstimateF64 = locrecover::LocationEstimate<f64>;
pub type LocationEstimateF32 = locrecover::LocationEstimate<f32>;
pub type Vec3F64 = vec3::Vec3<f64>;

/// Tool version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
