//! Line-Circle geometric filter.
//!
//! A lightweight landmark filter for a single forward-facing camera on a
//! straight-moving vehicle. Raw edge detections flow through two experts
//! each frame:
//!
//! 1. the line expert culls detections inside ignore regions and groups
//!    the rest around collectors,
//! 2. the edge stage tracks individual edges along the radial flow field
//!    and flags flow violators as rebel candidates,
//! 3. the circle stage aggregates trusted edges into normal and rebel
//!    circles,
//! 4. trusted circles feed ignore regions and collectors back to the
//!    line expert for the next frame.
//!
//! [`pipeline::Pipeline`] wires the loop together; the other modules are
//! usable on their own.

pub mod circle_tracker;
pub mod config;
pub mod edge_tracker;
pub mod events;
pub mod fast;
pub mod geometry;
pub mod io;
pub mod line_expert;
pub mod pipeline;
pub mod render;
pub mod sim;

use thiserror::Error as ThisError;

/// Crate-wide error type.
#[derive(Debug, ThisError)]
pub enum Error {
    /// A radial construction collapsed: the point coincides with the ray
    /// origin, so no direction is defined.
    #[error("degenerate ray: point coincides with the origin")]
    DegenerateRay,
    /// Group correlation of zero would divide the boundary-layer update.
    #[error("group correlation must be at least 1")]
    ZeroCorrelation,
    /// Image below the minimum size for the segment-test detector.
    #[error("image {width}x{height} too small for corner detection (minimum 7x7)")]
    ImageTooSmall { width: u32, height: u32 },
    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },
    #[error("frame count mismatch: {edges} edge frames vs {ego} ego records")]
    FrameCountMismatch { edges: usize, ego: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("state dump: {0}")]
    State(#[from] serde_json::Error),
    #[error("config file: {0}")]
    Config(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
