//! Circle-estimation stage: aggregates tracked edges into circles and
//! produces the feedback consumed by the next frame's line expert.
//!
//! Edges group greedily around their highest-trust peer by bearing,
//! speed, and proximity; groups then update the circle they overlap
//! best, and leftovers seed new circles. Circles that reach maximum
//! trust emit an ignore region (normal circles only) and every circle
//! emits a collector.

use serde::{Deserialize, Serialize};

use crate::edge_tracker::{NormalEdge, RebelEdge};
use crate::events::{EntityKind, LogRecord, TrustEvent};
use crate::geometry::{
    biased_mean, biased_mean_angle, blend_angle, circular_difference, normalize_angle, Collector,
    EgoState, IgnoreRegion, PixelPoint, RegionShape, Trust, TrustThresholds,
};

/// A disc of mutually consistent normal edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalCircle {
    pub id: u64,
    pub center: PixelPoint,
    pub radius: f64,
    pub trust: Trust,
    /// Representative bearing of the member edges, degrees.
    pub angle: f64,
    /// Representative image speed of the member edges, pixels/second.
    pub speed: f64,
}

/// A disc of mutually consistent rebel edges (one moving object).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RebelCircle {
    pub id: u64,
    pub center: PixelPoint,
    pub radius: f64,
    pub trust: Trust,
    /// Representative deviation-corrected bearing, degrees.
    pub angle: f64,
    pub speed: f64,
    /// Representative deviation level of the member tracks, degrees.
    pub deviation_level: f64,
}

/// Tuning for the circle stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleStageParams {
    pub thresholds: TrustThresholds,
    /// Default collector size and (halved) radius floor, pixels.
    pub boundary_size_init: f64,
    /// Grouping window for normal edges: bearing, degrees (strict).
    pub group_angle_window: f64,
    /// Grouping speed bound for normal edges, multiples of vehicle speed.
    pub group_speed_ratio: f64,
    /// Matching window between a group and a circle: bearing, degrees.
    pub match_angle_window: f64,
    /// Matching speed bound, multiples of the circle's own speed.
    pub match_speed_ratio: f64,
    /// Grouping window for rebel edges (deviation-corrected bearing).
    pub rebel_angle_window: f64,
    /// Rebel grouping speed slack, multiples of vehicle speed.
    pub rebel_speed_slack: f64,
    /// Rebel matching window, degrees.
    pub rebel_match_angle: f64,
    /// Rebel matching speed slack, multiples of vehicle speed.
    pub rebel_match_speed: f64,
    /// Minimum percentage of group members inside a circle before the
    /// circle may be updated by the group.
    pub involvement_pct: f64,
    /// Frames an emitted ignore region stays active.
    pub region_lifetime: u64,
}

/// Mutable store for the circle stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CircleBank {
    pub normals: Vec<NormalCircle>,
    pub rebels: Vec<RebelCircle>,
    pub next_id: u64,
}

impl CircleBank {
    fn allocate_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }
}

/// How a group relates to an existing circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CircleMatch {
    /// Enough members inside and the group bearing agrees: trust +1.
    Aligned,
    /// Enough members inside but the kinematics disagree: trust -1.
    Deviated,
    /// Not enough members inside the circle; the group is unrelated.
    NoMatch,
}

fn centroid(points: &[PixelPoint]) -> PixelPoint {
    let n = points.len() as f64;
    PixelPoint::new(
        points.iter().map(|p| p.x).sum::<f64>() / n,
        points.iter().map(|p| p.y).sum::<f64>() / n,
    )
}

fn rms_distance(points: &[PixelPoint], center: PixelPoint) -> f64 {
    let n = points.len() as f64;
    (points
        .iter()
        .map(|p| {
            let d = p.distance_to(center);
            d * d
        })
        .sum::<f64>()
        / n)
        .sqrt()
}

/// Greedy grouping of normal edges: the highest-trust unassigned edge
/// anchors a group; every unassigned edge within the (strict, circular)
/// bearing window, under the speed bound, and inside the spatial reach
/// joins it. The anchor always belongs to its own group.
pub fn group_normal_edges(
    edges: &[NormalEdge],
    eps_beta: f64,
    eps_v: f64,
    ego: &EgoState,
    spatial_reach: f64,
) -> Vec<Vec<NormalEdge>> {
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by(|&a, &b| {
        edges[b]
            .trust
            .value()
            .total_cmp(&edges[a].trust.value())
            .then(edges[a].id.cmp(&edges[b].id))
    });
    let mut assigned = vec![false; edges.len()];
    let mut groups = Vec::new();
    for &anchor in &order {
        if assigned[anchor] {
            continue;
        }
        assigned[anchor] = true;
        let mut group = vec![edges[anchor]];
        for &i in &order {
            if assigned[i] {
                continue;
            }
            let bearing_ok =
                circular_difference(edges[i].angle, edges[anchor].angle) < eps_beta;
            let speed_ok = edges[i].speed.abs() <= eps_v * ego.speed;
            let near = edges[i].location.distance_to(edges[anchor].location) <= spatial_reach;
            if bearing_ok && speed_ok && near {
                assigned[i] = true;
                group.push(edges[i]);
            }
        }
        groups.push(group);
    }
    groups
}

/// Greedy grouping of rebel edges. The bearing window compares the
/// deviation-corrected bearings, and the speed test is the looser
/// anchor-bounded form: the anchor's speed must not exceed the member's
/// speed plus the slack.
pub fn group_rebel_edges(
    edges: &[RebelEdge],
    eps_beta: f64,
    eps_v_slack: f64,
    ego: &EgoState,
    spatial_reach: f64,
) -> Vec<Vec<RebelEdge>> {
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by(|&a, &b| {
        edges[b]
            .trust
            .value()
            .total_cmp(&edges[a].trust.value())
            .then(edges[a].id.cmp(&edges[b].id))
    });
    let corrected =
        |e: &RebelEdge| normalize_angle(e.angle + e.deviation_level);
    let mut assigned = vec![false; edges.len()];
    let mut groups = Vec::new();
    for &anchor in &order {
        if assigned[anchor] {
            continue;
        }
        assigned[anchor] = true;
        let mut group = vec![edges[anchor]];
        for &i in &order {
            if assigned[i] {
                continue;
            }
            let bearing_ok =
                circular_difference(corrected(&edges[i]), corrected(&edges[anchor])) < eps_beta;
            let speed_ok =
                edges[anchor].speed.abs() <= edges[i].speed + eps_v_slack * ego.speed;
            let near = edges[i].location.distance_to(edges[anchor].location) <= spatial_reach;
            if bearing_ok && speed_ok && near {
                assigned[i] = true;
                group.push(edges[i]);
            }
        }
        groups.push(group);
    }
    groups
}

/// Percentage of group members strictly inside the circle.
fn involvement_pct_normal(group: &[NormalEdge], center: PixelPoint, radius: f64) -> f64 {
    let inside = group
        .iter()
        .filter(|e| e.location.distance_to(center) < radius)
        .count();
    100.0 * inside as f64 / group.len() as f64
}

fn involvement_pct_rebel(group: &[RebelEdge], center: PixelPoint, radius: f64) -> f64 {
    let inside = group
        .iter()
        .filter(|e| e.location.distance_to(center) < radius)
        .count();
    100.0 * inside as f64 / group.len() as f64
}

/// Compares a group against an existing normal circle: first the
/// involvement gate (share of members inside the radius), then the
/// bearing window and the speed bound over the group's biased means.
pub fn match_normal_circle(
    group: &[NormalEdge],
    circle: &NormalCircle,
    eps_beta: f64,
    eps_v: f64,
    pct_cte: f64,
) -> CircleMatch {
    if involvement_pct_normal(group, circle.center, circle.radius) < pct_cte {
        return CircleMatch::NoMatch;
    }
    let angles: Vec<f64> = group.iter().map(|e| e.angle).collect();
    let speeds: Vec<f64> = group.iter().map(|e| e.speed.abs()).collect();
    let bearing_ok =
        circular_difference(biased_mean_angle(&angles), circle.angle) <= eps_beta;
    let speed_ok = biased_mean(&speeds) <= eps_v * circle.speed;
    if bearing_ok && speed_ok {
        CircleMatch::Aligned
    } else {
        CircleMatch::Deviated
    }
}

/// Compares a rebel group against a rebel circle. The bearing window
/// runs over deviation-corrected bearings and the speed bound is the
/// circle's own speed plus slack.
pub fn match_rebel_circle(
    group: &[RebelEdge],
    circle: &RebelCircle,
    eps_beta: f64,
    eps_v_slack: f64,
    pct_cte: f64,
    ego: &EgoState,
) -> CircleMatch {
    if involvement_pct_rebel(group, circle.center, circle.radius) < pct_cte {
        return CircleMatch::NoMatch;
    }
    let corrected: Vec<f64> = group
        .iter()
        .map(|e| normalize_angle(e.angle + e.deviation_level))
        .collect();
    let speeds: Vec<f64> = group.iter().map(|e| e.speed.abs()).collect();
    let bearing_ok =
        circular_difference(biased_mean_angle(&corrected), circle.angle) <= eps_beta;
    let speed_ok = biased_mean(&speeds) <= circle.speed + eps_v_slack * ego.speed;
    if bearing_ok && speed_ok {
        CircleMatch::Aligned
    } else {
        CircleMatch::Deviated
    }
}

/// Folds a matched group into a normal circle. Every field moves with
/// the trust-weighted blend used by the edge stage: prior weight is the
/// trust margin above critical. The radius is measured as the RMS
/// member distance to the new center and floored at half the default
/// collector size.
pub fn update_normal_circle(
    circle: &NormalCircle,
    group: &[NormalEdge],
    kind: CircleMatch,
    thresholds: &TrustThresholds,
    radius_floor: f64,
) -> NormalCircle {
    let w = circle.trust.value() - thresholds.critical;
    let points: Vec<PixelPoint> = group.iter().map(|e| e.location).collect();
    let target = centroid(&points);
    let center = PixelPoint::new(
        (w * circle.center.x + target.x) / (w + 1.0),
        (w * circle.center.y + target.y) / (w + 1.0),
    );
    let rms = rms_distance(&points, center);
    let radius = ((w * circle.radius + rms) / (w + 1.0)).max(radius_floor);
    let angles: Vec<f64> = group.iter().map(|e| e.angle).collect();
    let speeds: Vec<f64> = group.iter().map(|e| e.speed.abs()).collect();
    let mut trust = circle.trust;
    trust.adjust(trust_delta(kind), thresholds);
    NormalCircle {
        id: circle.id,
        center,
        radius,
        trust,
        angle: blend_angle(circle.angle, biased_mean_angle(&angles), w),
        speed: (w * circle.speed + biased_mean(&speeds)) / (w + 1.0),
    }
}

/// Folds a matched group into a rebel circle; mirrors the normal-circle
/// update with the deviation-corrected bearing and a blended deviation
/// level.
pub fn update_rebel_circle(
    circle: &RebelCircle,
    group: &[RebelEdge],
    kind: CircleMatch,
    thresholds: &TrustThresholds,
    radius_floor: f64,
) -> RebelCircle {
    let w = circle.trust.value() - thresholds.critical;
    let points: Vec<PixelPoint> = group.iter().map(|e| e.location).collect();
    let target = centroid(&points);
    let center = PixelPoint::new(
        (w * circle.center.x + target.x) / (w + 1.0),
        (w * circle.center.y + target.y) / (w + 1.0),
    );
    let rms = rms_distance(&points, center);
    let radius = ((w * circle.radius + rms) / (w + 1.0)).max(radius_floor);
    let corrected: Vec<f64> = group
        .iter()
        .map(|e| normalize_angle(e.angle + e.deviation_level))
        .collect();
    let speeds: Vec<f64> = group.iter().map(|e| e.speed.abs()).collect();
    let deviations: Vec<f64> = group.iter().map(|e| e.deviation_level).collect();
    let mut trust = circle.trust;
    trust.adjust(trust_delta(kind), thresholds);
    RebelCircle {
        id: circle.id,
        center,
        radius,
        trust,
        angle: blend_angle(circle.angle, biased_mean_angle(&corrected), w),
        speed: (w * circle.speed + biased_mean(&speeds)) / (w + 1.0),
        deviation_level: (w * circle.deviation_level + biased_mean(&deviations)) / (w + 1.0),
    }
}

fn trust_delta(kind: CircleMatch) -> f64 {
    match kind {
        CircleMatch::Aligned => 1.0,
        CircleMatch::Deviated => -1.0,
        CircleMatch::NoMatch => 0.0,
    }
}

fn seed_normal_circle(
    id: u64,
    group: &[NormalEdge],
    thresholds: &TrustThresholds,
    radius_floor: f64,
) -> NormalCircle {
    let points: Vec<PixelPoint> = group.iter().map(|e| e.location).collect();
    let center = centroid(&points);
    let angles: Vec<f64> = group.iter().map(|e| e.angle).collect();
    let speeds: Vec<f64> = group.iter().map(|e| e.speed.abs()).collect();
    NormalCircle {
        id,
        center,
        radius: rms_distance(&points, center).max(radius_floor),
        trust: thresholds.initial(),
        angle: biased_mean_angle(&angles),
        speed: biased_mean(&speeds),
    }
}

fn seed_rebel_circle(
    id: u64,
    group: &[RebelEdge],
    thresholds: &TrustThresholds,
    radius_floor: f64,
) -> RebelCircle {
    let points: Vec<PixelPoint> = group.iter().map(|e| e.location).collect();
    let center = centroid(&points);
    let corrected: Vec<f64> = group
        .iter()
        .map(|e| normalize_angle(e.angle + e.deviation_level))
        .collect();
    let speeds: Vec<f64> = group.iter().map(|e| e.speed.abs()).collect();
    let deviations: Vec<f64> = group.iter().map(|e| e.deviation_level).collect();
    RebelCircle {
        id,
        center,
        radius: rms_distance(&points, center).max(radius_floor),
        trust: thresholds.initial(),
        angle: biased_mean_angle(&corrected),
        speed: biased_mean(&speeds),
        deviation_level: biased_mean(&deviations),
    }
}

/// Feedback for the next frame: normal circles at maximum trust emit an
/// ignore region (and have their trust reset to the standard level);
/// every circle, normal and rebel, emits a collector sized by its
/// radius. Rebel circles never emit regions: suppressing observation of
/// a moving object would defeat the point of tracking it.
pub fn emit_feedback(
    bank: &mut CircleBank,
    thresholds: &TrustThresholds,
    frame_id: u64,
    region_lifetime: u64,
    boundary_size_init: f64,
    events: &mut Vec<LogRecord>,
) -> (Vec<IgnoreRegion>, Vec<Collector>) {
    let mut regions = Vec::new();
    for circle in &mut bank.normals {
        if circle.trust.value() >= thresholds.maximum {
            regions.push(IgnoreRegion {
                location: circle.center,
                shape: RegionShape::Circle {
                    radius: circle.radius,
                },
                expires_at_frame: frame_id + region_lifetime,
            });
            circle.trust.refresh(thresholds);
            events.push(LogRecord {
                frame_id,
                kind: EntityKind::NormalCircle,
                id: circle.id,
                event: TrustEvent::Refreshed,
                delta: 0.0,
                trust_after: circle.trust.value(),
            });
        }
    }
    let mut collectors = Vec::new();
    for circle in &bank.normals {
        collectors.push(Collector {
            location: circle.center,
            boundary_size: circle.radius.max(boundary_size_init),
        });
    }
    for circle in &bank.rebels {
        collectors.push(Collector {
            location: circle.center,
            boundary_size: circle.radius.max(boundary_size_init),
        });
    }
    (regions, collectors)
}

/// Per-frame result of the circle stage.
#[derive(Debug, Clone, Default)]
pub struct CircleStageOutcome {
    pub regions: Vec<IgnoreRegion>,
    pub collectors: Vec<Collector>,
    pub events: Vec<LogRecord>,
    /// Circles seeded this frame (both kinds).
    pub spawned_circles: usize,
}

/// Runs the circle stage for one frame over the current edge tracks.
///
/// Groups form greedily, existing circles (highest trust first) take
/// the group they overlap best, unmatched circles coast with trust -1,
/// leftover groups seed new circles, under-trust circles are deleted,
/// and the survivors emit feedback.
pub fn step_circle_tracker(
    bank: &mut CircleBank,
    normal_edges: &[NormalEdge],
    rebel_edges: &[RebelEdge],
    ego: &EgoState,
    params: &CircleStageParams,
    frame_id: u64,
) -> CircleStageOutcome {
    let mut outcome = CircleStageOutcome::default();
    let reach = 2.0 * params.boundary_size_init;
    let radius_floor = params.boundary_size_init / 2.0;

    // Normal side.
    let groups = group_normal_edges(
        normal_edges,
        params.group_angle_window,
        params.group_speed_ratio,
        ego,
        reach,
    );
    let mut taken = vec![false; groups.len()];
    let mut order: Vec<usize> = (0..bank.normals.len()).collect();
    order.sort_by(|&a, &b| {
        bank.normals[b]
            .trust
            .value()
            .total_cmp(&bank.normals[a].trust.value())
            .then(bank.normals[a].id.cmp(&bank.normals[b].id))
    });
    for idx in order {
        let circle = bank.normals[idx];
        let mut best: Option<(f64, f64, usize)> = None;
        for (gi, group) in groups.iter().enumerate() {
            if taken[gi] {
                continue;
            }
            let pct = involvement_pct_normal(group, circle.center, circle.radius);
            if pct < params.involvement_pct {
                continue;
            }
            let points: Vec<PixelPoint> = group.iter().map(|e| e.location).collect();
            let d = centroid(&points).distance_to(circle.center);
            let better = match best {
                None => true,
                Some((bp, bd, bi)) => {
                    pct > bp || (pct == bp && (d < bd || (d == bd && gi < bi)))
                }
            };
            if better {
                best = Some((pct, d, gi));
            }
        }
        if let Some((_, _, gi)) = best {
            taken[gi] = true;
            let kind = match_normal_circle(
                &groups[gi],
                &circle,
                params.match_angle_window,
                params.match_speed_ratio,
                params.involvement_pct,
            );
            let updated = update_normal_circle(
                &circle,
                &groups[gi],
                kind,
                &params.thresholds,
                radius_floor,
            );
            outcome.events.push(LogRecord {
                frame_id,
                kind: EntityKind::NormalCircle,
                id: circle.id,
                event: if kind == CircleMatch::Aligned {
                    TrustEvent::CircleAligned
                } else {
                    TrustEvent::CircleDeviated
                },
                delta: trust_delta(kind),
                trust_after: updated.trust.value(),
            });
            bank.normals[idx] = updated;
        } else {
            let circle = &mut bank.normals[idx];
            circle.trust.adjust(-1.0, &params.thresholds);
            outcome.events.push(LogRecord {
                frame_id,
                kind: EntityKind::NormalCircle,
                id: circle.id,
                event: TrustEvent::CircleCoasted,
                delta: -1.0,
                trust_after: circle.trust.value(),
            });
        }
    }
    for (gi, group) in groups.iter().enumerate() {
        if taken[gi] {
            continue;
        }
        let id = bank.allocate_id();
        let circle = seed_normal_circle(id, group, &params.thresholds, radius_floor);
        outcome.spawned_circles += 1;
        outcome.events.push(LogRecord {
            frame_id,
            kind: EntityKind::NormalCircle,
            id,
            event: TrustEvent::Created,
            delta: 0.0,
            trust_after: circle.trust.value(),
        });
        bank.normals.push(circle);
    }

    // Rebel side.
    let rebel_groups = group_rebel_edges(
        rebel_edges,
        params.rebel_angle_window,
        params.rebel_speed_slack,
        ego,
        reach,
    );
    let mut taken = vec![false; rebel_groups.len()];
    let mut order: Vec<usize> = (0..bank.rebels.len()).collect();
    order.sort_by(|&a, &b| {
        bank.rebels[b]
            .trust
            .value()
            .total_cmp(&bank.rebels[a].trust.value())
            .then(bank.rebels[a].id.cmp(&bank.rebels[b].id))
    });
    for idx in order {
        let circle = bank.rebels[idx];
        let mut best: Option<(f64, f64, usize)> = None;
        for (gi, group) in rebel_groups.iter().enumerate() {
            if taken[gi] {
                continue;
            }
            let pct = involvement_pct_rebel(group, circle.center, circle.radius);
            if pct < params.involvement_pct {
                continue;
            }
            let points: Vec<PixelPoint> = group.iter().map(|e| e.location).collect();
            let d = centroid(&points).distance_to(circle.center);
            let better = match best {
                None => true,
                Some((bp, bd, bi)) => {
                    pct > bp || (pct == bp && (d < bd || (d == bd && gi < bi)))
                }
            };
            if better {
                best = Some((pct, d, gi));
            }
        }
        if let Some((_, _, gi)) = best {
            taken[gi] = true;
            let kind = match_rebel_circle(
                &rebel_groups[gi],
                &circle,
                params.rebel_match_angle,
                params.rebel_match_speed,
                params.involvement_pct,
                ego,
            );
            let updated = update_rebel_circle(
                &circle,
                &rebel_groups[gi],
                kind,
                &params.thresholds,
                radius_floor,
            );
            outcome.events.push(LogRecord {
                frame_id,
                kind: EntityKind::RebelCircle,
                id: circle.id,
                event: if kind == CircleMatch::Aligned {
                    TrustEvent::CircleAligned
                } else {
                    TrustEvent::CircleDeviated
                },
                delta: trust_delta(kind),
                trust_after: updated.trust.value(),
            });
            bank.rebels[idx] = updated;
        } else {
            let circle = &mut bank.rebels[idx];
            circle.trust.adjust(-1.0, &params.thresholds);
            outcome.events.push(LogRecord {
                frame_id,
                kind: EntityKind::RebelCircle,
                id: circle.id,
                event: TrustEvent::CircleCoasted,
                delta: -1.0,
                trust_after: circle.trust.value(),
            });
        }
    }
    for (gi, group) in rebel_groups.iter().enumerate() {
        if taken[gi] {
            continue;
        }
        let id = bank.allocate_id();
        let circle = seed_rebel_circle(id, group, &params.thresholds, radius_floor);
        outcome.spawned_circles += 1;
        outcome.events.push(LogRecord {
            frame_id,
            kind: EntityKind::RebelCircle,
            id,
            event: TrustEvent::Created,
            delta: 0.0,
            trust_after: circle.trust.value(),
        });
        bank.rebels.push(circle);
    }

    // Deletions, then feedback from the survivors.
    let thresholds = params.thresholds;
    bank.normals.retain(|c| {
        let keep = !c.trust.below_critical(&thresholds);
        if !keep {
            outcome.events.push(LogRecord {
                frame_id,
                kind: EntityKind::NormalCircle,
                id: c.id,
                event: TrustEvent::Deleted,
                delta: 0.0,
                trust_after: c.trust.value(),
            });
        }
        keep
    });
    bank.rebels.retain(|c| {
        let keep = !c.trust.below_critical(&thresholds);
        if !keep {
            outcome.events.push(LogRecord {
                frame_id,
                kind: EntityKind::RebelCircle,
                id: c.id,
                event: TrustEvent::Deleted,
                delta: 0.0,
                trust_after: c.trust.value(),
            });
        }
        keep
    });
    let (regions, collectors) = emit_feedback(
        bank,
        &params.thresholds,
        frame_id,
        params.region_lifetime,
        params.boundary_size_init,
        &mut outcome.events,
    );
    outcome.regions = regions;
    outcome.collectors = collectors;
    outcome
}
