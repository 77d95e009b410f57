//! Surrogate models for the 2D wave equation on polygonal domains.
//!
//! The field is approximated by a sum of delayed, angularly weighted and
//! spatially restricted copies of one radially symmetric free-space
//! solution. Components are discovered by an event-driven sweep over the
//! arrival times of every wavefront at the boundary edges and vertices.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fresnel;
pub mod geometry;
pub mod radial;
pub mod reference;
pub mod scene;
pub mod surrogate;
pub mod utd;

pub use error::{Error, Result};
pub use fresnel::fresnel_transition;
pub use geometry::{
    reflect_point, segments_intersect, BoundaryCondition, Domain, Edge, Interval, Point2, Ring,
    SegmentHit, SupportDescriptor, SupportKind, VertexInfo,
};
pub use radial::{solve_radial, Forcing, FreeSpaceGrid, Profile, SourceSpec};
pub use reference::{relative_l2_error, solve_reference, FieldSampler, ReferenceGrid};
pub use scene::{load_scene, parse_scene, RunParams, Scene};
pub use surrogate::{build, BuildConfig, EvalMode, FieldComponent, Surrogate};
pub use utd::{
    diffraction_coefficient, shadow_boundaries, wedge_index, BoundaryKind, DiffractionParams,
    DiffractionTable, ShadowBoundary, WedgeLocalFrame,
};
