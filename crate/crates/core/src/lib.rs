//! Bi-level Landweber inversion for a two-dimensional Helmholtz inverse
//! source problem, with FEM meshes refined as the iteration proceeds.
//!
//! The numerical core is generic over the real scalar type (see
//! [`Real`]); the aliases at the crate root fix it to `f64`.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod fem;
pub mod field;
pub mod geometry;
pub mod inversion;
pub mod mesh;
pub mod operators;
pub mod refine;
pub mod scalar;
pub mod skyline;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
pub use experiment::{run_experiment, synthesize_data, true_source, ExperimentConfig, ExperimentResult};
pub use fem::{assemble_helmholtz, assemble_load, inner_product, FemSpace, RobinSign};
pub use field::{support_mask, transfer, Field, Support};
pub use geometry::{GeometrySpec, Rect};
pub use inversion::{
    add_noise, discrepancy_met, landweber_step, refinement_due, refinement_threshold, run_bilevel, run_direct, History,
    InverseProblem, InversionConfig, PrecisionRule, Reconstruction, StepSize, StopReason,
};
pub use mesh::{generate_mesh, BoundaryEdge, BoundaryTag, Mesh, Region};
pub use operators::{
    adjoint_apply, estimate_operator_norm, extend_by_zero, forward_apply, restrict, DiscreteOperatorPair, NormEstimate,
    SourceMap,
};
pub use refine::{refine, refine_marked};
pub use scalar::Real;
pub use skyline::{solve, SkylineLdlt};
pub use sparse::{CsrMatrix, CsrPattern, SparseComplexMatrix, SparseRealMatrix};

pub use num_complex::Complex;

pub type Mesh64 = Mesh<f64>;
pub type Field64 = Field<f64>;
pub type GeometrySpec64 = GeometrySpec<f64>;
pub type FemSpace64 = FemSpace<f64>;
pub type OperatorPair64 = DiscreteOperatorPair<f64>;
pub type InversionConfig64 = InversionConfig<f64>;
pub type ExperimentConfig64 = ExperimentConfig<f64>;

pub type Mesh32 = Mesh<f32>;
pub type Field32 = Field<f32>;
pub type OperatorPair32 = DiscreteOperatorPair<f32>;
