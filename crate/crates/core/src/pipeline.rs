//! Frame loop: wires the line expert, the edge stage, and the circle
//! stage together and carries the feedback (ignore regions and
//! collectors) from one frame to the next. Also owns the serializable
//! filter state and the per-frame metrics.

use serde::{Deserialize, Serialize};

use crate::circle_tracker::{step_circle_tracker, CircleBank};
use crate::config::RunConfig;
use crate::edge_tracker::{step_edge_tracker, EdgeBank};
use crate::events::{EntityKind, LogRecord, TrustEvent};
use crate::geometry::{Collector, EdgePoint, EgoState, IgnoreRegion};
use crate::line_expert::run_line_expert;
use crate::{Error, Result};

/// Complete filter state between frames. Serializable; a run resumed
/// from a reloaded state continues exactly as the uninterrupted run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    pub edges: EdgeBank,
    pub circles: CircleBank,
    /// Ignore regions still active for upcoming frames.
    pub regions: Vec<IgnoreRegion>,
    /// Collectors emitted by the latest circle pass.
    pub collectors: Vec<Collector>,
    /// Last processed frame id; 0 before any frame.
    pub frame_id: u64,
}

/// Scalar parameters stored per entity kind. Chains are transient
/// two-point candidates and are not counted.
const DIMS_NORMAL_EDGE: usize = 6;
const DIMS_REBEL_EDGE: usize = 9;
const DIMS_NORMAL_CIRCLE: usize = 6;
const DIMS_REBEL_CIRCLE: usize = 7;
const DIMS_REGION: usize = 5;
const DIMS_COLLECTOR: usize = 3;

/// Total stored scalar parameters under the documented fixed layout:
/// 6 per normal edge, 9 per rebel edge, 6 per normal circle, 7 per
/// rebel circle, 5 per ignore region, 3 per collector.
pub fn compute_dimensionality(state: &FilterState) -> usize {
    state.edges.normals.len() * DIMS_NORMAL_EDGE
        + state.edges.rebels.len() * DIMS_REBEL_EDGE
        + state.circles.normals.len() * DIMS_NORMAL_CIRCLE
        + state.circles.rebels.len() * DIMS_REBEL_CIRCLE
        + state.regions.len() * DIMS_REGION
        + state.collectors.len() * DIMS_COLLECTOR
}

/// One metrics row, in column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameMetrics {
    pub frame_id: u64,
    pub raw_edges: usize,
    pub culled: usize,
    pub n_en: usize,
    pub n_er: usize,
    pub n_cn: usize,
    pub n_cr: usize,
    pub n_psi: usize,
    pub dimensionality: usize,
}

/// Everything the pipeline reports about one processed frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub metrics: FrameMetrics,
    /// Edge-accounting terms; together with `culled` they partition the
    /// raw edge count.
    pub consumed_by_tracks: usize,
    pub spawned_new: usize,
    pub absorbed_into_chains: usize,
    pub dropped_degenerate: usize,
    /// Dimensionality added by entities created this frame; growth
    /// beyond this bound would mean parameters appeared from nowhere.
    pub spawn_allowance: usize,
    pub events: Vec<LogRecord>,
}

/// The filter loop plus its configuration.
#[derive(Debug, Clone, Default)]
pub struct Pipeline {
    pub config: RunConfig,
    pub state: FilterState,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Self {
        Self {
            config,
            state: FilterState::default(),
        }
    }

    pub fn resume(config: RunConfig, state: FilterState) -> Self {
        Self { config, state }
    }

    /// Processes one frame: cull and group, track edges, aggregate
    /// circles, then refresh the feedback for the next frame. `ego` is
    /// in physical units and is scaled by `pixels_per_unit`.
    pub fn step(
        &mut self,
        frame_id: u64,
        edges: &[EdgePoint],
        ego: &EgoState,
    ) -> Result<FrameReport> {
        if frame_id <= self.state.frame_id {
            return Err(Error::Malformed {
                what: "frame order",
                detail: format!("frame {frame_id} after frame {}", self.state.frame_id),
            });
        }
        let scale = self.config.pixels_per_unit;
        let ego_px = EgoState {
            speed: ego.speed * scale,
            distance_traveled: ego.distance_traveled * scale,
            frame_interval: ego.frame_interval,
        };
        let frame = self.config.frame_geometry();
        let error_model = self.config.error_model();
        let edge_params = self.config.edge_stage_params();
        let circle_params = self.config.circle_stage_params();

        let line_out = run_line_expert(
            edges,
            &self.state.regions,
            &self.state.collectors,
            self.config.boundary_size_init,
            frame_id,
        );
        let edge_out = step_edge_tracker(
            &mut self.state.edges,
            &line_out.grouped,
            &ego_px,
            &error_model,
            &frame,
            &edge_params,
            frame_id,
        )?;
        let circle_out = step_circle_tracker(
            &mut self.state.circles,
            &self.state.edges.normals,
            &self.state.edges.rebels,
            &ego_px,
            &circle_params,
            frame_id,
        );

        self.state
            .regions
            .extend(circle_out.regions.iter().copied());
        self.state.regions.retain(|r| r.is_active(frame_id + 1));
        self.state.collectors = circle_out.collectors.clone();
        self.state.frame_id = frame_id;

        let mut events = edge_out.events;
        events.extend(circle_out.events);
        let spawn_allowance = spawn_allowance(&events, circle_out.regions.len(), self.state.collectors.len());
        let metrics = FrameMetrics {
            frame_id,
            raw_edges: edges.len(),
            culled: line_out.culled.len(),
            n_en: self.state.edges.normals.len(),
            n_er: self.state.edges.rebels.len(),
            n_cn: self.state.circles.normals.len(),
            n_cr: self.state.circles.rebels.len(),
            n_psi: self.state.regions.len(),
            dimensionality: compute_dimensionality(&self.state),
        };
        Ok(FrameReport {
            metrics,
            consumed_by_tracks: edge_out.consumed_by_tracks,
            spawned_new: edge_out.spawned_new,
            absorbed_into_chains: edge_out.absorbed_into_chains,
            dropped_degenerate: edge_out.dropped_degenerate,
            spawn_allowance,
            events,
        })
    }
}

/// Dimensionality added by this frame's newly created entities,
/// including the frame's freshly emitted regions and collectors.
fn spawn_allowance(events: &[LogRecord], regions_emitted: usize, collectors_emitted: usize) -> usize {
    let mut allowance = regions_emitted * DIMS_REGION + collectors_emitted * DIMS_COLLECTOR;
    for record in events {
        let per_entity = match record.kind {
            EntityKind::NormalEdge => DIMS_NORMAL_EDGE,
            EntityKind::RebelEdge => DIMS_REBEL_EDGE,
            EntityKind::NormalCircle => DIMS_NORMAL_CIRCLE,
            EntityKind::RebelCircle => DIMS_REBEL_CIRCLE,
        };
        match record.event {
            TrustEvent::Created | TrustEvent::Promoted => allowance += per_entity,
            _ => {}
        }
    }
    allowance
}

/// Verifies the per-frame edge accounting: every raw edge is culled,
/// consumed by a track, spawned as a new track, absorbed into a chain,
/// or dropped as degenerate.
pub fn conservation_holds(report: &FrameReport) -> bool {
    report.metrics.raw_edges
        == report.metrics.culled
            + report.consumed_by_tracks
            + report.spawned_new
            + report.absorbed_into_chains
            + report.dropped_degenerate
}
