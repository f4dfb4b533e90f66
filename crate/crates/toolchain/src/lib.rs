//! Toolchain adapters: the built-in MiniVis language, an adapter that shells
//! out to external build/run commands, and a registry keyed by toolchain id.

pub mod external;
pub mod minivis;
pub mod registry;

pub use external::{ExternalToolchain, Manifest};
pub use minivis::MiniVis;
pub use registry::Registry;
