//! Edge-estimation stage: per-edge tracks, candidate chains, and the
//! five-way observation classifier.
//!
//! Each frame the stage predicts every track forward along its flow
//! line, lets established tracks claim the nearest admissible
//! observation (high trust first), advances candidate chains, and turns
//! every unclaimed observation into a fresh track. Trust bookkeeping is
//! logged through [`crate::events`].

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::events::{EntityKind, LogRecord, TrustEvent};
use crate::geometry::{
    circular_difference, error_span_distance, normalize_angle, radial_angle,
    signed_circular_difference, unit_vector, EdgePoint, EgoState, ErrorModel, FrameGeometry,
    PixelPoint, Trust, TrustThresholds,
};
use crate::line_expert::GroupedEdges;
use crate::{Error, Result};

/// A tracked edge following the radial flow field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalEdge {
    pub id: u64,
    pub location: PixelPoint,
    /// Admissible distance between an observation and the prediction.
    pub boundary_layer: f64,
    pub trust: Trust,
    /// Bearing of the track as seen from the frame center, degrees.
    pub angle: f64,
    /// Image speed along the flow line, pixels per second.
    pub speed: f64,
}

/// A tracked edge that violates the radial flow field (a moving object).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RebelEdge {
    pub id: u64,
    pub location: PixelPoint,
    pub trust: Trust,
    /// Bearing from the track's origin point, degrees.
    pub angle: f64,
    /// Image speed, pixels per second.
    pub speed: f64,
    /// Accumulated bearing deviation, degrees; added to `angle` when
    /// predicting the next position.
    pub deviation_level: f64,
    /// First point of the chain that created this track.
    pub origin: PixelPoint,
    pub boundary_layer: f64,
}

/// A two-point candidate before promotion to a rebel track. The chain
/// either grows to three points on its next frame and promotes, or is
/// discarded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RebelChain {
    pub points: Vec<PixelPoint>,
    pub created_frame: u64,
}

impl RebelChain {
    pub fn seed(first: PixelPoint, second: PixelPoint, frame_id: u64) -> Self {
        Self {
            points: vec![first, second],
            created_frame: frame_id,
        }
    }

    /// Straight-line continuation of the last segment; where the next
    /// observation is expected if the candidate keeps its velocity.
    pub fn extrapolated(&self) -> PixelPoint {
        let n = self.points.len();
        let last = self.points[n - 1];
        let prev = self.points[n - 2];
        PixelPoint::new(2.0 * last.x - prev.x, 2.0 * last.y - prev.y)
    }
}

/// Outcome of comparing one observation against one tracked edge.
/// Exactly one variant applies per (track, observation) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    /// On the flow line but past the admissible gate: the track keeps
    /// coasting and a fresh track is opened at the observation.
    OnRayBeyondGate,
    /// Inside the gate, on the flow line, bearing and speed agree.
    Consistent,
    /// Inside the gate and on the flow line, but kinematics disagree.
    Inconsistent,
    /// Matches nothing about this track.
    Unrelated,
    /// Off the flow line yet close to the track's previous position:
    /// the signature of an independently moving object.
    FlowViolation,
}

impl Classification {
    pub fn trust_delta(self) -> f64 {
        match self {
            Classification::Consistent => 1.0,
            Classification::Unrelated => 0.0,
            Classification::OnRayBeyondGate
            | Classification::Inconsistent
            | Classification::FlowViolation => -1.0,
        }
    }
}

/// Tuning for the edge stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeStageParams {
    pub thresholds: TrustThresholds,
    /// Half-width of the flow-line corridor, pixels.
    pub span: f64,
    /// Boundary layer granted to new tracks; also the spatial gate for
    /// chains and the fixed gate for rebel tracks.
    pub boundary_layer_init: f64,
    /// Bearing agreement required for a consistent match, degrees.
    pub consistency_angle: f64,
    /// Speed agreement for a consistent match, as a multiple of the
    /// vehicle speed.
    pub consistency_speed: f64,
    /// Largest direction change a chain accepts between segments, degrees.
    pub chain_max_deviation: f64,
}

/// Mutable store for the edge stage: tracks, chains, and the id counter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EdgeBank {
    pub normals: Vec<NormalEdge>,
    pub rebels: Vec<RebelEdge>,
    pub chains: Vec<RebelChain>,
    pub next_id: u64,
}

impl EdgeBank {
    fn allocate_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }
}

/// Per-frame accounting; together with the line-expert cull count this
/// balances the books: every raw edge is culled, consumed, spawned from,
/// absorbed, or dropped as degenerate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EdgeStageOutcome {
    pub consumed_by_tracks: usize,
    pub spawned_new: usize,
    pub absorbed_into_chains: usize,
    /// Observations landing exactly on the frame center, which have no
    /// defined bearing and cannot seed a track.
    pub dropped_degenerate: usize,
    pub events: Vec<LogRecord>,
}

/// Coasts a track one frame forward: the location advances along the
/// track's bearing from the frame center by the blended speed
/// `(speed + vehicle speed) / 2` times the frame interval. Bearing,
/// speed, gate, and trust are untouched.
pub fn predict_normal_edge(
    edge: &NormalEdge,
    ego: &EgoState,
    frame: &FrameGeometry,
) -> Result<NormalEdge> {
    let bearing = radial_angle(edge.location, frame.center)?;
    let blended = 0.5 * (edge.speed + ego.speed);
    let (ux, uy) = unit_vector(bearing);
    let step = blended * ego.frame_interval;
    let mut primed = *edge;
    primed.location = PixelPoint::new(edge.location.x + step * ux, edge.location.y + step * uy);
    Ok(primed)
}

/// Decides what an observation means for one tracked edge.
///
/// Order of tests: on the flow line and inside the gate the kinematic
/// checks split consistent from inconsistent; on the line but outside
/// the gate the observation re-anchors the track's ray; off the line
/// but near the previous position it is object-motion suspicion; else
/// it is unrelated. Degenerate rays (track exactly on the frame center)
/// fail the line test rather than erroring.
pub fn classify(
    obs: EdgePoint,
    predicted: &NormalEdge,
    previous: &NormalEdge,
    error_model: &ErrorModel,
    frame: &FrameGeometry,
    eps_beta: f64,
    eps_v: f64,
    ego: &EgoState,
) -> Classification {
    let in_gate = obs.location.distance_to(predicted.location) <= predicted.boundary_layer;
    let in_span = error_span_distance(obs.location, predicted.location, frame)
        .map(|d| d < error_model.rotational_span)
        .unwrap_or(false);
    if in_span && in_gate {
        let bearing_ok = radial_angle(obs.location, frame.center)
            .map(|b| circular_difference(b, previous.angle) <= eps_beta)
            .unwrap_or(false);
        let observed_speed = obs.location.distance_to(previous.location) / ego.frame_interval;
        let speed_ok = observed_speed <= eps_v * ego.speed;
        if bearing_ok && speed_ok {
            Classification::Consistent
        } else {
            Classification::Inconsistent
        }
    } else if in_span {
        Classification::OnRayBeyondGate
    } else if obs.location.distance_to(previous.location)
        <= previous.boundary_layer + error_model.rotational_span
    {
        Classification::FlowViolation
    } else {
        Classification::Unrelated
    }
}

/// Folds an observation into a tracked edge.
///
/// Location moves to the trust-weighted point between the prediction
/// and the observation; speed is re-derived from the prediction miss
/// (positive when the observation sits farther out radially); the gate
/// halves toward the velocity mismatch diluted by the correlation count
/// of the observation's group. Bearing never changes here. Trust takes
/// the classification delta, clamped at the maximum.
pub fn update_normal_edge(
    tracked: &NormalEdge,
    predicted: &NormalEdge,
    obs: EdgePoint,
    ego: &EgoState,
    frame: &FrameGeometry,
    group_correlation: usize,
    thresholds: &TrustThresholds,
    trust_delta: f64,
) -> Result<NormalEdge> {
    if group_correlation == 0 {
        return Err(Error::ZeroCorrelation);
    }
    let weight = tracked.trust.value() - thresholds.critical;
    let location = PixelPoint::new(
        (weight * predicted.location.x + obs.location.x) / (weight + 1.0),
        (weight * predicted.location.y + obs.location.y) / (weight + 1.0),
    );
    let miss = predicted.location.distance_to(obs.location) / ego.frame_interval;
    let outward =
        obs.location.distance_to(frame.center) > predicted.location.distance_to(frame.center);
    let speed = if outward {
        (ego.speed + miss).abs()
    } else {
        (ego.speed - miss).abs()
    };
    let blended_prior = 0.5 * (tracked.speed + ego.speed);
    let boundary_layer = 0.5
        * ((ego.speed - blended_prior).abs() / group_correlation as f64 + tracked.boundary_layer);
    let mut trust = tracked.trust;
    trust.adjust(trust_delta, thresholds);
    Ok(NormalEdge {
        id: tracked.id,
        location,
        boundary_layer,
        trust,
        angle: tracked.angle,
        speed,
    })
}

/// Result of advancing a candidate chain by one frame.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainOutcome {
    /// Chain grew but has not reached three points yet.
    Continue(RebelChain),
    /// Chain completed three consistent points and yields a rebel track.
    Promote(RebelEdge),
    /// No admissible observation this frame; the candidate dies.
    Discard,
}

/// Checks whether an observation continues a chain: it must fall within
/// the spatial gate around the straight-line continuation, and either
/// bend the path by no more than `max_deviation` degrees or stay within
/// `span` pixels of the line through the last segment.
pub fn chain_admits(chain: &RebelChain, obs: PixelPoint, max_deviation: f64, span: f64, gate: f64) -> bool {
    let n = chain.points.len();
    let last = chain.points[n - 1];
    let prev = chain.points[n - 2];
    if obs.distance_to(chain.extrapolated()) > gate {
        return false;
    }
    let segment = radial_angle(last, prev);
    let continuation = radial_angle(obs, last);
    let bend_ok = match (segment, continuation) {
        (Ok(a), Ok(b)) => circular_difference(b, a) <= max_deviation,
        // A stalled observation (obs == last) bends nothing.
        (_, Err(_)) => true,
        (Err(_), Ok(_)) => false,
    };
    if bend_ok {
        return true;
    }
    let dx = last.x - prev.x;
    let dy = last.y - prev.y;
    let norm = dx.hypot(dy);
    if norm == 0.0 {
        return false;
    }
    let ex = obs.x - prev.x;
    let ey = obs.y - prev.y;
    (dx * ey - dy * ex).abs() / norm <= span
}

/// Grows a chain with the frame's matched observation, or discards it.
/// At three points the chain promotes: bearing and origin come from the
/// first-to-last direction, the deviation level is the signed bend
/// between the two segments, and speed is the last segment over one
/// frame interval.
pub fn advance_rebel_chain(
    chain: &RebelChain,
    obs: Option<PixelPoint>,
    ego: &EgoState,
    params: &EdgeStageParams,
    id: u64,
) -> ChainOutcome {
    let Some(obs) = obs else {
        return ChainOutcome::Discard;
    };
    let mut grown = chain.clone();
    grown.points.push(obs);
    if grown.points.len() < 3 {
        return ChainOutcome::Continue(grown);
    }
    let first = grown.points[0];
    let second = grown.points[1];
    let third = grown.points[2];
    let (Ok(overall), Ok(first_leg)) = (radial_angle(third, first), radial_angle(second, first))
    else {
        return ChainOutcome::Discard;
    };
    ChainOutcome::Promote(RebelEdge {
        id,
        location: third,
        trust: params.thresholds.initial(),
        angle: overall,
        speed: third.distance_to(second) / ego.frame_interval,
        deviation_level: signed_circular_difference(overall, first_leg),
        origin: first,
        boundary_layer: params.boundary_layer_init,
    })
}

/// Where a rebel track expects its next observation: one frame of its
/// own speed along the deviation-corrected bearing from its origin.
pub fn predict_rebel_edge(rebel: &RebelEdge, ego: &EgoState) -> PixelPoint {
    let (ux, uy) = unit_vector(normalize_angle(rebel.angle + rebel.deviation_level));
    let step = rebel.speed * ego.frame_interval;
    PixelPoint::new(rebel.location.x + step * ux, rebel.location.y + step * uy)
}

/// Folds an observation into a rebel track. The bearing is re-measured
/// from the origin; the deviation level moves opposite the bearing
/// surprise (the bend it did not predict); location blends toward the
/// observation and speed toward the observed displacement, both with
/// the trust weighting used for normal tracks. Trust gains one, clamped.
pub fn update_rebel_edge(
    tracked: &RebelEdge,
    obs: EdgePoint,
    ego: &EgoState,
    thresholds: &TrustThresholds,
) -> RebelEdge {
    let predicted = predict_rebel_edge(tracked, ego);
    let bearing = radial_angle(obs.location, tracked.origin).unwrap_or(tracked.angle);
    let surprise = signed_circular_difference(bearing, tracked.angle);
    let deviation_level = tracked.deviation_level - (surprise - tracked.deviation_level);
    let weight = tracked.trust.value() - thresholds.critical;
    let location = PixelPoint::new(
        (weight * predicted.x + obs.location.x) / (weight + 1.0),
        (weight * predicted.y + obs.location.y) / (weight + 1.0),
    );
    let observed_speed = tracked.location.distance_to(obs.location) / ego.frame_interval;
    let speed = (weight * tracked.speed + observed_speed) / (weight + 1.0);
    let mut trust = tracked.trust;
    trust.adjust(1.0, thresholds);
    RebelEdge {
        id: tracked.id,
        location,
        trust,
        angle: bearing,
        speed,
        deviation_level,
        origin: tracked.origin,
        boundary_layer: tracked.boundary_layer,
    }
}

/// One observation slot in the frame pool.
struct Obs {
    point: EdgePoint,
    group_size: usize,
    claimed: bool,
}

/// Flat pool of the frame's observations with a uniform-grid index for
/// radius queries. Queries collect and sort candidates, so results do
/// not depend on hash iteration order.
struct ObsPool {
    slots: Vec<Obs>,
    grid: HashMap<(i64, i64), Vec<usize>>,
    cell: f64,
}

impl ObsPool {
    fn new(grouped: &GroupedEdges, cell: f64) -> Self {
        let mut slots = Vec::new();
        for group in &grouped.groups {
            for member in &group.members {
                slots.push(Obs {
                    point: *member,
                    group_size: group.members.len(),
                    claimed: false,
                });
            }
        }
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (idx, obs) in slots.iter().enumerate() {
            grid.entry(Self::key(obs.point.location, cell))
                .or_default()
                .push(idx);
        }
        Self { slots, grid, cell }
    }

    fn key(p: PixelPoint, cell: f64) -> (i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
    }

    /// Unclaimed slot indices within `radius` of `center`, nearest
    /// first (ties broken by insertion order).
    fn unclaimed_within(&self, center: PixelPoint, radius: f64) -> Vec<usize> {
        let reach = (radius / self.cell).ceil() as i64 + 1;
        let (cx, cy) = Self::key(center, self.cell);
        let mut found: Vec<(f64, usize)> = Vec::new();
        for gx in (cx - reach)..=(cx + reach) {
            for gy in (cy - reach)..=(cy + reach) {
                let Some(bucket) = self.grid.get(&(gx, gy)) else {
                    continue;
                };
                for &idx in bucket {
                    let obs = &self.slots[idx];
                    if obs.claimed {
                        continue;
                    }
                    let d = obs.point.location.distance_to(center);
                    if d <= radius {
                        found.push((d, idx));
                    }
                }
            }
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        found.into_iter().map(|(_, idx)| idx).collect()
    }

    /// All unclaimed slots, insertion order.
    fn unclaimed(&self) -> Vec<usize> {
        (0..self.slots.len())
            .filter(|&i| !self.slots[i].claimed)
            .collect()
    }

    fn claim(&mut self, idx: usize) -> EdgePoint {
        self.slots[idx].claimed = true;
        self.slots[idx].point
    }
}

/// Runs the edge stage for one frame over the line-expert output.
///
/// Established rebel tracks claim observations first (highest trust
/// first), then candidate chains resolve, then normal tracks classify
/// and claim, and finally every unclaimed observation opens a fresh
/// track. Entities whose trust fell below the critical level are
/// removed at the end, after logging.
pub fn step_edge_tracker(
    bank: &mut EdgeBank,
    grouped: &GroupedEdges,
    ego: &EgoState,
    error_model: &ErrorModel,
    frame: &FrameGeometry,
    params: &EdgeStageParams,
    frame_id: u64,
) -> Result<EdgeStageOutcome> {
    let mut outcome = EdgeStageOutcome::default();
    let cell = params.boundary_layer_init.max(2.0 * error_model.rotational_span);
    let mut pool = ObsPool::new(grouped, cell);

    // Rebel tracks: highest trust claims first.
    let mut rebel_order: Vec<usize> = (0..bank.rebels.len()).collect();
    rebel_order.sort_by(|&a, &b| {
        bank.rebels[b]
            .trust
            .value()
            .total_cmp(&bank.rebels[a].trust.value())
            .then(bank.rebels[a].id.cmp(&bank.rebels[b].id))
    });
    for idx in rebel_order {
        let rebel = bank.rebels[idx];
        let predicted = predict_rebel_edge(&rebel, ego);
        let candidates = pool.unclaimed_within(predicted, rebel.boundary_layer);
        if let Some(&slot) = candidates.first() {
            let obs = pool.claim(slot);
            outcome.consumed_by_tracks += 1;
            let updated = update_rebel_edge(&rebel, obs, ego, &params.thresholds);
            outcome.events.push(LogRecord {
                frame_id,
                kind: EntityKind::RebelEdge,
                id: rebel.id,
                event: TrustEvent::RebelMatched,
                delta: 1.0,
                trust_after: updated.trust.value(),
            });
            bank.rebels[idx] = updated;
        } else {
            let coasted = &mut bank.rebels[idx];
            coasted.location = predicted;
            if let Ok(bearing) = radial_angle(predicted, coasted.origin) {
                coasted.angle = bearing;
            }
            coasted.trust.adjust(-1.0, &params.thresholds);
            outcome.events.push(LogRecord {
                frame_id,
                kind: EntityKind::RebelEdge,
                id: coasted.id,
                event: TrustEvent::RebelCoasted,
                delta: -1.0,
                trust_after: coasted.trust.value(),
            });
        }
    }

    // Candidate chains: grow or die. Chains opened later this frame
    // start their own three-frame clock.
    let pending_chains = std::mem::take(&mut bank.chains);
    for chain in pending_chains {
        let candidates = pool.unclaimed_within(chain.extrapolated(), params.boundary_layer_init);
        let slot = candidates.into_iter().find(|&idx| {
            chain_admits(
                &chain,
                pool.slots[idx].point.location,
                params.chain_max_deviation,
                error_model.rotational_span,
                params.boundary_layer_init,
            )
        });
        let obs = slot.map(|idx| {
            outcome.absorbed_into_chains += 1;
            pool.claim(idx).location
        });
        match advance_rebel_chain(&chain, obs, ego, params, bank.next_id) {
            ChainOutcome::Promote(rebel) => {
                bank.allocate_id();
                outcome.events.push(LogRecord {
                    frame_id,
                    kind: EntityKind::RebelEdge,
                    id: rebel.id,
                    event: TrustEvent::Promoted,
                    delta: 0.0,
                    trust_after: rebel.trust.value(),
                });
                bank.rebels.push(rebel);
            }
            ChainOutcome::Continue(grown) => bank.chains.push(grown),
            ChainOutcome::Discard => {}
        }
    }

    // Normal tracks: classify and claim, highest trust first.
    let mut normal_order: Vec<usize> = (0..bank.normals.len()).collect();
    normal_order.sort_by(|&a, &b| {
        bank.normals[b]
            .trust
            .value()
            .total_cmp(&bank.normals[a].trust.value())
            .then(bank.normals[a].id.cmp(&bank.normals[b].id))
    });
    let mut spawned: Vec<NormalEdge> = Vec::new();
    for idx in normal_order {
        let tracked = bank.normals[idx];
        let Ok(predicted) = predict_normal_edge(&tracked, ego, frame) else {
            // No defined ray (track pinned on the frame center): coast in
            // place and let trust decay.
            let track = &mut bank.normals[idx];
            track.trust.adjust(-1.0, &params.thresholds);
            outcome.events.push(LogRecord {
                frame_id,
                kind: EntityKind::NormalEdge,
                id: tracked.id,
                event: TrustEvent::Coasted,
                delta: -1.0,
                trust_after: track.trust.value(),
            });
            continue;
        };
        // Candidates near the prediction or near the previous location
        // cover every non-ray branch of the classifier.
        let gate_radius = predicted.boundary_layer;
        let previous_radius = tracked.boundary_layer + error_model.rotational_span;
        let mut candidates = pool.unclaimed_within(predicted.location, gate_radius);
        for extra in pool.unclaimed_within(tracked.location, previous_radius) {
            if !candidates.contains(&extra) {
                candidates.push(extra);
            }
        }
        candidates.sort_by(|&a, &b| {
            let da = pool.slots[a].point.location.distance_to(predicted.location);
            let db = pool.slots[b].point.location.distance_to(predicted.location);
            da.total_cmp(&db).then(a.cmp(&b))
        });
        let mut chosen: Option<(usize, Classification)> = None;
        for slot in candidates {
            let class = classify(
                pool.slots[slot].point,
                &predicted,
                &tracked,
                error_model,
                frame,
                params.consistency_angle,
                params.consistency_speed,
                ego,
            );
            if matches!(
                class,
                Classification::Consistent
                    | Classification::Inconsistent
                    | Classification::FlowViolation
            ) {
                chosen = Some((slot, class));
                break;
            }
        }
        if chosen.is_none() {
            // Fall back to the unbounded flow-line branch: nearest
            // unclaimed observation that classifies as on-ray.
            let mut best: Option<(f64, usize)> = None;
            for slot in pool.unclaimed() {
                let class = classify(
                    pool.slots[slot].point,
                    &predicted,
                    &tracked,
                    error_model,
                    frame,
                    params.consistency_angle,
                    params.consistency_speed,
                    ego,
                );
                if class == Classification::OnRayBeyondGate {
                    let d = pool.slots[slot].point.location.distance_to(predicted.location);
                    if best.map_or(true, |(bd, bi)| d < bd || (d == bd && slot < bi)) {
                        best = Some((d, slot));
                    }
                }
            }
            if let Some((_, slot)) = best {
                chosen = Some((slot, Classification::OnRayBeyondGate));
            }
        }
        match chosen {
            Some((slot, Classification::Consistent)) | Some((slot, Classification::Inconsistent)) => {
                let class = chosen.unwrap().1;
                let correlation = pool.slots[slot].group_size;
                let obs = pool.claim(slot);
                outcome.consumed_by_tracks += 1;
                let updated = update_normal_edge(
                    &tracked,
                    &predicted,
                    obs,
                    ego,
                    frame,
                    correlation,
                    &params.thresholds,
                    class.trust_delta(),
                )?;
                outcome.events.push(LogRecord {
                    frame_id,
                    kind: EntityKind::NormalEdge,
                    id: tracked.id,
                    event: TrustEvent::Classified(class),
                    delta: class.trust_delta(),
                    trust_after: updated.trust.value(),
                });
                bank.normals[idx] = updated;
            }
            Some((slot, Classification::FlowViolation)) => {
                let obs = pool.claim(slot);
                outcome.absorbed_into_chains += 1;
                bank.chains
                    .push(RebelChain::seed(tracked.location, obs.location, frame_id));
                let track = &mut bank.normals[idx];
                track.location = predicted.location;
                track.trust.adjust(-1.0, &params.thresholds);
                outcome.events.push(LogRecord {
                    frame_id,
                    kind: EntityKind::NormalEdge,
                    id: tracked.id,
                    event: TrustEvent::Classified(Classification::FlowViolation),
                    delta: -1.0,
                    trust_after: track.trust.value(),
                });
            }
            Some((slot, Classification::OnRayBeyondGate)) => {
                let obs = pool.claim(slot);
                outcome.spawned_new += 1;
                match new_normal_edge(bank, obs.location, ego, frame, params) {
                    Ok(fresh) => {
                        outcome.events.push(LogRecord {
                            frame_id,
                            kind: EntityKind::NormalEdge,
                            id: fresh.id,
                            event: TrustEvent::Created,
                            delta: 0.0,
                            trust_after: fresh.trust.value(),
                        });
                        spawned.push(fresh);
                    }
                    Err(_) => {
                        outcome.spawned_new -= 1;
                        outcome.dropped_degenerate += 1;
                    }
                }
                let track = &mut bank.normals[idx];
                track.location = predicted.location;
                track.trust.adjust(-1.0, &params.thresholds);
                outcome.events.push(LogRecord {
                    frame_id,
                    kind: EntityKind::NormalEdge,
                    id: tracked.id,
                    event: TrustEvent::Classified(Classification::OnRayBeyondGate),
                    delta: -1.0,
                    trust_after: track.trust.value(),
                });
            }
            _ => {
                let track = &mut bank.normals[idx];
                track.location = predicted.location;
                track.trust.adjust(-1.0, &params.thresholds);
                outcome.events.push(LogRecord {
                    frame_id,
                    kind: EntityKind::NormalEdge,
                    id: tracked.id,
                    event: TrustEvent::Coasted,
                    delta: -1.0,
                    trust_after: track.trust.value(),
                });
            }
        }
    }
    bank.normals.extend(spawned);

    // Whatever nobody claimed becomes a fresh track.
    for slot in pool.unclaimed() {
        let obs = pool.claim(slot);
        match new_normal_edge(bank, obs.location, ego, frame, params) {
            Ok(fresh) => {
                outcome.spawned_new += 1;
                outcome.events.push(LogRecord {
                    frame_id,
                    kind: EntityKind::NormalEdge,
                    id: fresh.id,
                    event: TrustEvent::Created,
                    delta: 0.0,
                    trust_after: fresh.trust.value(),
                });
                bank.normals.push(fresh);
            }
            Err(_) => outcome.dropped_degenerate += 1,
        }
    }

    // Deletions happen strictly at frame end.
    retain_trusted(bank, params, frame_id, &mut outcome.events);
    Ok(outcome)
}

/// Builds a fresh track at an observation: vehicle speed, bearing from
/// the frame center, default gate, initial trust. Fails only for an
/// observation exactly on the frame center.
fn new_normal_edge(
    bank: &mut EdgeBank,
    location: PixelPoint,
    ego: &EgoState,
    frame: &FrameGeometry,
    params: &EdgeStageParams,
) -> Result<NormalEdge> {
    let angle = radial_angle(location, frame.center)?;
    Ok(NormalEdge {
        id: bank.allocate_id(),
        location,
        boundary_layer: params.boundary_layer_init,
        trust: params.thresholds.initial(),
        angle,
        speed: ego.speed,
    })
}

fn retain_trusted(
    bank: &mut EdgeBank,
    params: &EdgeStageParams,
    frame_id: u64,
    events: &mut Vec<LogRecord>,
) {
    let thresholds = params.thresholds;
    bank.normals.retain(|edge| {
        let keep = !edge.trust.below_critical(&thresholds);
        if !keep {
            events.push(LogRecord {
                frame_id,
                kind: EntityKind::NormalEdge,
                id: edge.id,
                event: TrustEvent::Deleted,
                delta: 0.0,
                trust_after: edge.trust.value(),
            });
        }
        keep
    });
    bank.rebels.retain(|rebel| {
        let keep = !rebel.trust.below_critical(&thresholds);
        if !keep {
            events.push(LogRecord {
                frame_id,
                kind: EntityKind::RebelEdge,
                id: rebel.id,
                event: TrustEvent::Deleted,
                delta: 0.0,
                trust_after: rebel.trust.value(),
            });
        }
        keep
    });
}
