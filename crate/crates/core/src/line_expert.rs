//! Line expert: first contact for raw detections.
//!
//! Culls edges that fall inside active ignore regions, then groups the
//! survivors around collectors. Edges matching no collector seed fresh
//! groups greedily in input order.

use serde::{Deserialize, Serialize};

use crate::geometry::{
    inside_ignore_region, within_collector, Collector, EdgePoint, IgnoreRegion, PixelPoint,
};

/// Where a group came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupLabel {
    /// Gathered by the collector at this index in the input slice.
    Collector(usize),
    /// Seeded by an edge that matched no collector.
    Fresh,
}

/// One membership group produced by the line expert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeGroup {
    pub label: GroupLabel,
    /// Collector location, or the seed edge for fresh groups.
    pub center: PixelPoint,
    pub boundary_size: f64,
    pub members: Vec<EdgePoint>,
}

/// Grouped survivors of one frame.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupedEdges {
    pub groups: Vec<EdgeGroup>,
}

impl GroupedEdges {
    pub fn member_count(&self) -> usize {
        self.groups.iter().map(|g| g.members.len()).sum()
    }
}

/// Output of a full line-expert pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LineExpertOutput {
    pub grouped: GroupedEdges,
    pub culled: Vec<EdgePoint>,
}

/// Drops edges inside any region still active at `frame_id`; regions
/// whose expiry lies before the frame are ignored. Survivor order is
/// preserved.
pub fn cull_edges(
    edges: &[EdgePoint],
    regions: &[IgnoreRegion],
    frame_id: u64,
) -> (Vec<EdgePoint>, Vec<EdgePoint>) {
    let mut kept = Vec::with_capacity(edges.len());
    let mut culled = Vec::new();
    for &e in edges {
        let hit = regions
            .iter()
            .any(|r| r.is_active(frame_id) && inside_ignore_region(e.location, r));
        if hit {
            culled.push(e);
        } else {
            kept.push(e);
        }
    }
    (kept, culled)
}

/// Assigns every edge to exactly one group.
///
/// An edge joins the nearest collector that passes the strict
/// boundary-size test; distance ties break toward the lower collector
/// index. Edges matching no collector join the nearest existing fresh
/// group whose seed lies strictly within `default_bs` (ties toward the
/// earlier group), otherwise they seed a new fresh group centered on
/// themselves.
pub fn group_edges(
    edges: &[EdgePoint],
    collectors: &[Collector],
    default_bs: f64,
) -> GroupedEdges {
    let mut collector_groups: Vec<EdgeGroup> = collectors
        .iter()
        .enumerate()
        .map(|(i, c)| EdgeGroup {
            label: GroupLabel::Collector(i),
            center: c.location,
            boundary_size: c.boundary_size,
            members: Vec::new(),
        })
        .collect();
    let mut fresh_groups: Vec<EdgeGroup> = Vec::new();

    for &e in edges {
        let best_collector = collectors
            .iter()
            .enumerate()
            .filter(|(_, c)| within_collector(e.location, c))
            .map(|(i, c)| (e.location.distance_to(c.location), i))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((_, i)) = best_collector {
            collector_groups[i].members.push(e);
            continue;
        }
        let best_fresh = fresh_groups
            .iter()
            .enumerate()
            .map(|(i, g)| (e.location.distance_to(g.center), i))
            .filter(|(d, _)| *d < default_bs)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        if let Some((_, i)) = best_fresh {
            fresh_groups[i].members.push(e);
        } else {
            fresh_groups.push(EdgeGroup {
                label: GroupLabel::Fresh,
                center: e.location,
                boundary_size: default_bs,
                members: vec![e],
            });
        }
    }

    let mut groups: Vec<EdgeGroup> = collector_groups
        .into_iter()
        .filter(|g| !g.members.is_empty())
        .collect();
    groups.extend(fresh_groups);
    GroupedEdges { groups }
}

/// Full pass: cull against active regions, then group the survivors.
pub fn run_line_expert(
    edges: &[EdgePoint],
    regions: &[IgnoreRegion],
    collectors: &[Collector],
    default_bs: f64,
    frame_id: u64,
) -> LineExpertOutput {
    let (kept, culled) = cull_edges(edges, regions, frame_id);
    LineExpertOutput {
        grouped: group_edges(&kept, collectors, default_bs),
        culled,
    }
}
