//! Live visualization development server: per-session revision trees fed by
//! debounced compiles, branch-wide rendering and a JSON-RPC 2.0 interface.

pub mod config;
pub mod engine;
pub mod rpc;
pub mod ws;

pub use config::ServerConfig;
pub use engine::{ApiError, Direction, Engine, ImageRef, Notification};
