//! Append-only trust ledger.
//!
//! Every trust-bearing entity logs one record per state change. Tests
//! replay the deltas to confirm the live trust values are exactly the
//! clamped running sums; the CLI serializes the log for inspection.

use serde::{Deserialize, Serialize};

use crate::edge_tracker::Classification;
use crate::geometry::TrustThresholds;

/// Which store the entity lives in. Ids are unique per kind, not globally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntityKind {
    NormalEdge,
    RebelEdge,
    NormalCircle,
    RebelCircle,
}

/// What happened to the entity this frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TrustEvent {
    /// Entity entered the state with the standard initial trust.
    Created,
    /// A tracked edge consumed an observation with this outcome.
    Classified(Classification),
    /// No admissible observation; the entity advanced on its prediction.
    Coasted,
    /// A rebel track consumed an observation.
    RebelMatched,
    /// A rebel track advanced without an observation.
    RebelCoasted,
    /// A candidate chain completed and produced this rebel track.
    Promoted,
    /// A circle matched a group whose bearing agreed with its own.
    CircleAligned,
    /// A circle matched a group whose bearing disagreed.
    CircleDeviated,
    /// A circle saw no admissible group this frame.
    CircleCoasted,
    /// Trust was reset to the standard level after a region emission.
    Refreshed,
    /// Trust fell below the critical level; entity removed at frame end.
    Deleted,
}

/// One ledger row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub frame_id: u64,
    pub kind: EntityKind,
    pub id: u64,
    pub event: TrustEvent,
    /// Trust delta applied by this event before clamping (0 for resets,
    /// creations, and deletions).
    pub delta: f64,
    /// Trust value after the event, as stored on the entity.
    pub trust_after: f64,
}

/// Replays a ledger slice for a single entity and returns the trust it
/// should end with, applying the same clamp rules as the live update
/// path. Panics on a record whose `trust_after` disagrees with the
/// replay, which is exactly what the acceptance check wants to surface.
pub fn replay_entity(records: &[LogRecord], thresholds: &TrustThresholds) -> f64 {
    let mut trust = f64::NAN;
    for record in records {
        match record.event {
            TrustEvent::Created | TrustEvent::Promoted => {
                trust = thresholds.initial().value();
            }
            TrustEvent::Refreshed => {
                trust = thresholds.standard;
            }
            TrustEvent::Deleted => {
                assert!(
                    trust < thresholds.critical,
                    "deleted entity {:?}/{} still had trust {} at frame {}",
                    record.kind,
                    record.id,
                    trust,
                    record.frame_id
                );
            }
            _ => {
                trust = (trust + record.delta).min(thresholds.maximum);
            }
        }
        assert!(
            trust == record.trust_after,
            "ledger mismatch for {:?}/{} at frame {}: replay {} vs logged {}",
            record.kind,
            record.id,
            record.frame_id,
            trust,
            record.trust_after
        );
    }
    trust
}
