//! Core model for live development of image-producing visualization code.
//!
//! Every successfully compiled source state becomes a [`Revision`] in a
//! content-addressed [`RevisionStore`]. Around that tree the crate provides
//! static scope trees ([`scope`]), line diffs ([`diff`]), raster images and
//! variance comparison ([`image`]), parameter handling and camera math
//! ([`params`]), the compressed meta-visualization view ([`metavis`]) and the
//! compile/render job scheduler ([`scheduler`]).
//!
//! Camera math is generic over the scalar type (`num_traits::Float`); the
//! aliases below fix it to `f64`, which is what the rest of the system uses.

pub mod diff;
pub mod image;
pub mod metavis;
pub mod params;
pub mod revision;
pub mod scheduler;
pub mod scope;
pub mod toolchain;

pub use diff::{apply_diff, line_diff, revision_diff, DiffError, DiffOp, DiffTag, FileDiff, FileStatus, Hunk};
pub use image::{variance_image, Image, ImageError};
pub use metavis::{branch_view, compress_tree, BranchView, ExpandState, GroupId, GroupNode};
pub use params::camera::Vec3;
pub use params::{
    effective_params, extract_params, ParamError, ParamType, ParamValue, ParameterDecl,
    ParameterSet,
};
pub use revision::{Revision, RevisionId, RevisionStore, SourceState, StoreError};
pub use scheduler::{ArtifactCache, Job, JobKind, JobQueue, SchedulerConfig};
pub use scope::{LanguageProfile, ScopeHash, ScopeKind, ScopeNode};
pub use toolchain::{Artifact, CompileResult, Diagnostic, ToolchainAdapter, ToolchainError};

/// Double-precision camera used by the server and the wire format.
pub type Camera = params::camera::Camera<f64>;
/// Single-precision camera, for clients that keep their view state in `f32`.
pub type CameraF32 = params::camera::Camera<f32>;
/// Double-precision 3-vector.
pub type Vec3d = Vec3<f64>;
