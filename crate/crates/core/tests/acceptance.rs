//! Acceptance suite: one test per shipping criterion. Each test prints a
//! single PASS line with its measured numbers (visible with
//! `cargo test --test acceptance -- --nocapture`); a failure carries the
//! offending values in its assertion message.
//!
//! The oracle tests re-derive the expected behavior from scratch
//! (exhaustive scans, naive window checks) rather than calling back into
//! the production code paths they validate.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use lc_core::circle_tracker::{
    group_normal_edges, match_normal_circle, match_rebel_circle, update_normal_circle,
    CircleMatch, NormalCircle, RebelCircle,
};
use lc_core::config::RunConfig;
use lc_core::edge_tracker::{
    advance_rebel_chain, update_normal_edge, update_rebel_edge, ChainOutcome, NormalEdge,
    RebelChain, RebelEdge,
};
use lc_core::events::{replay_entity, EntityKind, LogRecord, TrustEvent};
use lc_core::fast::{detect_fast9, Corner, GrayImage};
use lc_core::geometry::{
    biased_mean, biased_mean_angle, circular_difference, error_span_distance,
    inside_ignore_region, radial_angle, within_collector, Collector, EdgePoint, EgoState,
    FrameGeometry, IgnoreRegion, PixelPoint, RegionShape, Trust, TrustThresholds,
};
use lc_core::io::metrics_to_csv;
use lc_core::line_expert::{
    run_line_expert, EdgeGroup, GroupLabel, GroupedEdges, LineExpertOutput,
};
use lc_core::pipeline::{conservation_holds, FrameReport, Pipeline};
use lc_core::sim::{
    generate_sequence, EdgeSource, SimConfig, SimFrame, SimOutput, WorldLayout, WorldPoint,
};
use lc_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

fn edge_points(frame: &SimFrame) -> Vec<EdgePoint> {
    frame.edges.iter().map(|e| e.edge).collect()
}

fn run_pipeline(sim: &SimOutput, config: RunConfig) -> (Pipeline, Vec<FrameReport>) {
    let mut pipeline = Pipeline::new(config);
    let mut reports = Vec::with_capacity(sim.frames.len());
    for frame in &sim.frames {
        let report = pipeline
            .step(frame.frame_id, &edge_points(frame), &frame.ego)
            .expect("pipeline step");
        assert!(
            conservation_holds(&report),
            "edge accounting broke at frame {}: {:?}",
            frame.frame_id,
            report.metrics
        );
        reports.push(report);
    }
    (pipeline, reports)
}

// ---------------------------------------------------------------------
// Criterion: the line expert equals an exhaustive reference.
// ---------------------------------------------------------------------

/// Brute-force re-derivation of the cull-and-group pass: exhaustive
/// membership scans with explicit argmin loops instead of iterator
/// chains. Ties keep the earlier candidate, mirroring the documented
/// lower-index/earlier-group rules.
fn reference_line_expert(
    edges: &[EdgePoint],
    regions: &[IgnoreRegion],
    collectors: &[Collector],
    default_bs: f64,
    frame_id: u64,
) -> LineExpertOutput {
    let mut culled = Vec::new();
    let mut survivors = Vec::new();
    for &e in edges {
        let mut hit = false;
        for r in regions {
            if r.is_active(frame_id) && inside_ignore_region(e.location, r) {
                hit = true;
            }
        }
        if hit {
            culled.push(e);
        } else {
            survivors.push(e);
        }
    }

    let mut collector_members: Vec<Vec<EdgePoint>> = vec![Vec::new(); collectors.len()];
    let mut fresh: Vec<(PixelPoint, Vec<EdgePoint>)> = Vec::new();
    for &e in &survivors {
        let mut best: Option<(f64, usize)> = None;
        for (i, c) in collectors.iter().enumerate() {
            let d = e.location.distance_to(c.location);
            if d < c.boundary_size && best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, i));
            }
        }
        if let Some((_, i)) = best {
            collector_members[i].push(e);
            continue;
        }
        let mut best_seed: Option<(f64, usize)> = None;
        for (i, (seed, _)) in fresh.iter().enumerate() {
            let d = e.location.distance_to(*seed);
            if d < default_bs && best_seed.map_or(true, |(bd, _)| d < bd) {
                best_seed = Some((d, i));
            }
        }
        match best_seed {
            Some((_, i)) => fresh[i].1.push(e),
            None => fresh.push((e.location, vec![e])),
        }
    }

    let mut groups = Vec::new();
    for (i, members) in collector_members.into_iter().enumerate() {
        if !members.is_empty() {
            groups.push(EdgeGroup {
                label: GroupLabel::Collector(i),
                center: collectors[i].location,
                boundary_size: collectors[i].boundary_size,
                members,
            });
        }
    }
    for (center, members) in fresh {
        groups.push(EdgeGroup {
            label: GroupLabel::Fresh,
            center,
            boundary_size: default_bs,
            members,
        });
    }
    LineExpertOutput {
        grouped: GroupedEdges { groups },
        culled,
    }
}

/// Points on a half-pixel lattice so that distance ties are exact and
/// the tie-break rules actually fire.
fn lattice_point(rng: &mut ChaCha8Rng) -> PixelPoint {
    PixelPoint::new(
        f64::from(rng.gen_range(0..=1280u32)) * 0.5,
        f64::from(rng.gen_range(0..=960u32)) * 0.5,
    )
}

#[test]
fn edge_culling_and_grouping_match_a_brute_force_reference() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut total_groups = 0usize;
    for round in 0..100u64 {
        let frame_id = round + 1;
        let regions: Vec<IgnoreRegion> = (0..rng.gen_range(0..=5))
            .map(|_| {
                let shape = match rng.gen_range(0..3) {
                    0 => RegionShape::None,
                    1 => RegionShape::Circle {
                        radius: f64::from(rng.gen_range(20..=320u32)) * 0.25,
                    },
                    _ => RegionShape::Rectangle {
                        half_x: f64::from(rng.gen_range(20..=240u32)) * 0.25,
                        half_y: f64::from(rng.gen_range(20..=240u32)) * 0.25,
                    },
                };
                IgnoreRegion {
                    location: lattice_point(&mut rng),
                    shape,
                    // A mix of expired and active regions.
                    expires_at_frame: rng.gen_range(0..=frame_id + 3),
                }
            })
            .collect();
        let mut collectors: Vec<Collector> = (0..rng.gen_range(0..=8))
            .map(|_| Collector {
                location: lattice_point(&mut rng),
                boundary_size: f64::from(rng.gen_range(20..=120u32)) * 0.5,
            })
            .collect();
        if collectors.len() >= 2 {
            // Shared center: every edge inside both is an exact distance
            // tie that must resolve to the lower index.
            collectors[1].location = collectors[0].location;
        }

        let mut edges: Vec<EdgePoint> = (0..200)
            .map(|i| EdgePoint {
                location: lattice_point(&mut rng),
                frame_id,
                timestamp: i as f64,
            })
            .collect();
        edges[0].location = edges[1].location;
        if let Some(c) = collectors.first() {
            edges[2].location = c.location;
        }
        if let Some(r) = regions.first() {
            edges[3].location = r.location;
        }

        let got = run_line_expert(&edges, &regions, &collectors, 25.0, frame_id);
        let want = reference_line_expert(&edges, &regions, &collectors, 25.0, frame_id);
        assert_eq!(got, want, "divergence on round {round}");
        assert_eq!(got.grouped.member_count() + got.culled.len(), edges.len());
        total_groups += got.grouped.groups.len();
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "too slow: {elapsed:?}");
    println!(
        "PASS line expert vs brute force: 100 frames, {total_groups} groups, identical output in {elapsed:?}"
    );
}

// ---------------------------------------------------------------------
// Criterion: the corner detector equals a naive segment-test reference.
// ---------------------------------------------------------------------

/// Ring of radius 3 derived from scratch: integer offsets whose rounded
/// distance is 3, walked in angular order.
fn reference_ring() -> Vec<(i32, i32)> {
    let mut offsets = Vec::new();
    for dy in -3..=3i32 {
        for dx in -3..=3i32 {
            if f64::from(dx).hypot(f64::from(dy)).round() as i32 == 3 {
                offsets.push((dx, dy));
            }
        }
    }
    offsets.sort_by(|a, b| {
        let angle = |o: &(i32, i32)| f64::from(o.1).atan2(f64::from(o.0));
        angle(a).total_cmp(&angle(b))
    });
    assert_eq!(offsets.len(), 16, "the radius-3 ring must have 16 pixels");
    offsets
}

fn reference_detect(img: &GrayImage, threshold: u8, nms: bool) -> Vec<Corner> {
    let ring = reference_ring();
    let t = i32::from(threshold);
    let mut corners = Vec::new();
    for y in 3..img.height - 3 {
        for x in 3..img.width - 3 {
            let center = i32::from(img.get(x, y));
            let values: Vec<i32> = ring
                .iter()
                .map(|&(dx, dy)| {
                    i32::from(img.get((x as i32 + dx) as u32, (y as i32 + dy) as u32))
                })
                .collect();
            let mut is_corner = false;
            for start in 0..16 {
                let window = |k: usize| values[(start + k) % 16];
                if (0..9).all(|k| window(k) > center + t)
                    || (0..9).all(|k| window(k) < center - t)
                {
                    is_corner = true;
                    break;
                }
            }
            if !is_corner {
                continue;
            }
            let mut bright = 0;
            let mut dark = 0;
            for &v in &values {
                if v > center + t {
                    bright += v - center - t;
                }
                if v < center - t {
                    dark += center - v - t;
                }
            }
            corners.push(Corner {
                x,
                y,
                score: bright.max(dark),
            });
        }
    }
    if !nms {
        return corners;
    }
    corners.sort_by(|a, b| {
        b.score
            .cmp(&a.score)
            .then(a.y.cmp(&b.y))
            .then(a.x.cmp(&b.x))
    });
    let mut kept: Vec<Corner> = Vec::new();
    for c in corners {
        let crowded = kept.iter().any(|k| {
            (i64::from(k.x) - i64::from(c.x)).abs() <= 2
                && (i64::from(k.y) - i64::from(c.y)).abs() <= 2
        });
        if !crowded {
            kept.push(c);
        }
    }
    kept.sort_by(|a, b| a.y.cmp(&b.y).then(a.x.cmp(&b.x)));
    kept
}

#[test]
fn corner_detection_matches_a_naive_segment_test_reference() {
    let started = Instant::now();
    let mut total = 0usize;
    for round in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + round);
        let data = (0..32 * 32).map(|_| rng.gen::<u8>()).collect();
        let img = GrayImage::new(32, 32, data).unwrap();
        for nms in [false, true] {
            let got = detect_fast9(&img, 25, nms).unwrap();
            let want = reference_detect(&img, 25, nms);
            assert_eq!(got, want, "divergence on image {round}, nms={nms}");
            if nms {
                total += got.len();
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "too slow: {elapsed:?}");
    println!(
        "PASS corner detector vs naive reference: 50 images, {total} suppressed corners, identical pre- and post-suppression in {elapsed:?}"
    );
}

// ---------------------------------------------------------------------
// Criterion: the trust ledger replays to the live values exactly.
// ---------------------------------------------------------------------

#[test]
fn trust_ledger_replays_to_the_live_values() {
    let sim = generate_sequence(
        &SimConfig {
            landmark_count: 120,
            frame_count: 50,
            frame_rate: 10.0,
            pixel_noise_sigma: 0.5,
            seed: 33,
            ..SimConfig::default()
        },
        &[
            WorldPoint::moving([26.0, 12.0, 80.0], [-30.0, 0.0, 0.0]),
            WorldPoint::moving([-20.0, -10.0, 120.0], [25.0, 0.0, 0.0]),
        ],
    );
    let (pipeline, reports) = run_pipeline(&sim, RunConfig::default());

    let mut ledger: HashMap<(EntityKind, u64), Vec<LogRecord>> = HashMap::new();
    for report in &reports {
        for record in &report.events {
            ledger.entry((record.kind, record.id)).or_default().push(*record);
        }
    }
    assert!(ledger.len() > 100, "only {} entities logged", ledger.len());
    assert!(
        ledger.keys().any(|(k, _)| *k == EntityKind::RebelEdge),
        "the scenario never produced a rebel track"
    );
    assert!(
        ledger.keys().any(|(k, _)| *k == EntityKind::NormalCircle),
        "the scenario never produced a circle"
    );

    let thresholds = pipeline.config.thresholds();
    let state = &pipeline.state;
    let (mut live, mut dead) = (0usize, 0usize);
    for ((kind, id), records) in &ledger {
        // Panics internally on any row where the running clamped sum
        // disagrees with the logged trust.
        let replayed = replay_entity(records, &thresholds);
        let stored = match kind {
            EntityKind::NormalEdge => state
                .edges
                .normals
                .iter()
                .find(|e| e.id == *id)
                .map(|e| e.trust.value()),
            EntityKind::RebelEdge => state
                .edges
                .rebels
                .iter()
                .find(|e| e.id == *id)
                .map(|e| e.trust.value()),
            EntityKind::NormalCircle => state
                .circles
                .normals
                .iter()
                .find(|c| c.id == *id)
                .map(|c| c.trust.value()),
            EntityKind::RebelCircle => state
                .circles
                .rebels
                .iter()
                .find(|c| c.id == *id)
                .map(|c| c.trust.value()),
        };
        match stored {
            Some(value) => {
                assert!(
                    value == replayed,
                    "{kind:?}/{id}: live trust {value} vs replayed {replayed}"
                );
                live += 1;
            }
            None => {
                assert!(
                    matches!(records.last().unwrap().event, TrustEvent::Deleted),
                    "{kind:?}/{id} vanished without a deletion record"
                );
                dead += 1;
            }
        }
    }
    assert!(
        live >= 50 && dead >= 50,
        "scenario must exercise both survivors and deletions, got {live}/{dead}"
    );
    println!(
        "PASS trust ledger: {} entities over 50 frames ({live} live, {dead} deleted) replay to the stored trust exactly",
        ledger.len()
    );
}

// ---------------------------------------------------------------------
// Criterion: a static world tracks consistently with small error.
// ---------------------------------------------------------------------

#[test]
fn static_world_tracks_stay_consistent_with_small_error() {
    let sim = generate_sequence(
        &SimConfig {
            landmark_count: 100,
            frame_count: 10,
            frame_rate: 10.0,
            seed: 19,
            ..SimConfig::default()
        },
        &[],
    );
    let config = RunConfig {
        psi_lifetime: 0,
        ..RunConfig::default()
    };
    let mut pipeline = Pipeline::new(config);

    // Frame 1 spawns one track per visible landmark; map track ids to
    // landmark indices through the exact (noise-free) spawn locations.
    let first = &sim.frames[0];
    pipeline
        .step(first.frame_id, &edge_points(first), &first.ego)
        .unwrap();
    let mut track_of_landmark: HashMap<usize, u64> = HashMap::new();
    for track in &pipeline.state.edges.normals {
        let source = first
            .edges
            .iter()
            .find(|e| e.edge.location.distance_to(track.location) < TOL)
            .map(|e| e.source);
        if let Some(EdgeSource::Landmark(i)) = source {
            track_of_landmark.insert(i, track.id);
        }
    }

    // Ids seen with a consistent classification, per frame.
    let mut consistent: HashMap<u64, HashSet<u64>> = HashMap::new();
    for frame in &sim.frames[1..] {
        let report = pipeline
            .step(frame.frame_id, &edge_points(frame), &frame.ego)
            .unwrap();
        assert!(conservation_holds(&report));
        let ids = consistent.entry(frame.frame_id).or_default();
        for record in &report.events {
            if record.kind == EntityKind::NormalEdge
                && record.event
                    == TrustEvent::Classified(
                        lc_core::edge_tracker::Classification::Consistent,
                    )
            {
                ids.insert(record.id);
            }
        }
    }

    let visible_throughout: Vec<usize> = (0..sim.landmarks.len())
        .filter(|&i| {
            sim.frames.iter().all(|f| {
                f.edges
                    .iter()
                    .any(|e| e.source == EdgeSource::Landmark(i))
            })
        })
        .collect();
    assert!(
        visible_throughout.len() >= 80,
        "degenerate scene: only {} landmarks stayed visible",
        visible_throughout.len()
    );

    let perfect = visible_throughout
        .iter()
        .filter(|&&i| {
            track_of_landmark.get(&i).is_some_and(|id| {
                sim.frames[1..]
                    .iter()
                    .all(|f| consistent[&f.frame_id].contains(id))
            })
        })
        .count();
    let fraction = perfect as f64 / visible_throughout.len() as f64;
    assert!(
        fraction >= 0.95,
        "only {perfect} of {} landmarks stayed consistent on every frame",
        visible_throughout.len()
    );

    // Every surviving track sits on a true landmark projection.
    let truth: Vec<PixelPoint> = sim.frames[9].edges.iter().map(|e| e.edge.location).collect();
    let mut worst = 0.0f64;
    for track in &pipeline.state.edges.normals {
        let nearest = truth
            .iter()
            .map(|p| p.distance_to(track.location))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(nearest);
        assert!(
            nearest <= 4.0,
            "track {} ended {nearest:.2} px from the nearest landmark",
            track.id
        );
    }
    println!(
        "PASS static-world tracking: {perfect}/{} landmarks consistent on all 9 follow-up frames ({:.1}%), worst final error {worst:.3} px",
        visible_throughout.len(),
        100.0 * fraction
    );
}

// ---------------------------------------------------------------------
// Criterion: a crossing object promotes on schedule and stays locked.
// ---------------------------------------------------------------------

#[test]
fn crossing_object_promotes_on_schedule_and_stays_locked() {
    // One crossing object plus a few stationary points far from its
    // image path. Zero-velocity objects keep the scene fully
    // hand-placed while staying on the radial flow.
    let objects = [
        WorldPoint::moving([26.0, 12.0, 80.0], [-3.0, 0.0, 0.0]),
        WorldPoint::moving([-15.0, -9.0, 100.0], [0.0, 0.0, 0.0]),
        WorldPoint::moving([10.0, -12.0, 150.0], [0.0, 0.0, 0.0]),
        WorldPoint::moving([-25.0, 15.0, 200.0], [0.0, 0.0, 0.0]),
    ];
    let sim = generate_sequence(
        &SimConfig {
            landmark_count: 0,
            frame_count: 8,
            seed: 1,
            ..SimConfig::default()
        },
        &objects,
    );
    let config = RunConfig {
        psi_lifetime: 0,
        ..RunConfig::default()
    };
    let mut pipeline = Pipeline::new(config);

    let mut promoted_frames = Vec::new();
    let mut first_rebel_circle_frame = None;
    let mut worst_error = 0.0f64;
    for frame in &sim.frames {
        let report = pipeline
            .step(frame.frame_id, &edge_points(frame), &frame.ego)
            .unwrap();
        for record in &report.events {
            if record.event == TrustEvent::Promoted {
                promoted_frames.push(record.frame_id);
            }
        }
        if first_rebel_circle_frame.is_none() && !pipeline.state.circles.rebels.is_empty() {
            first_rebel_circle_frame = Some(frame.frame_id);
        }
        if frame.frame_id >= 4 {
            let rebels = &pipeline.state.edges.rebels;
            assert_eq!(
                rebels.len(),
                1,
                "frame {}: expected exactly one rebel track",
                frame.frame_id
            );
            let truth = frame
                .edges
                .iter()
                .find(|e| e.source == EdgeSource::Object(0))
                .expect("object visible")
                .edge
                .location;
            let error = rebels[0].location.distance_to(truth);
            worst_error = worst_error.max(error);
            assert!(
                error <= 25.0,
                "frame {}: rebel track {error:.2} px from the object",
                frame.frame_id
            );
        }
    }

    assert_eq!(
        promoted_frames,
        vec![3],
        "promotion must happen exactly on the object's third observed frame"
    );
    let circle_frame = first_rebel_circle_frame.expect("no rebel circle appeared");
    assert!(
        circle_frame <= 5,
        "rebel circle appeared on frame {circle_frame}, later than two frames after promotion"
    );
    println!(
        "PASS rebel promotion: chain promoted on frame 3, rebel circle on frame {circle_frame}, worst tracking error {worst_error:.2} px over frames 4-8"
    );
}

// ---------------------------------------------------------------------
// Criterion: feedback cuts the processed-edge load on a clustered scene.
// ---------------------------------------------------------------------

fn clustered_scene() -> SimConfig {
    SimConfig {
        landmark_count: 1008,
        frame_count: 30,
        seed: 17,
        layout: WorldLayout::Clustered {
            clusters: 84,
            depth_min: 600.0,
            depth_max: 1200.0,
            annulus_min_px: 60.0,
            annulus_max_px: 110.0,
            spread_px: 4.0,
        },
        ..SimConfig::default()
    }
}

fn feedback_config() -> RunConfig {
    // A lifetime longer than the run keeps every earned ignore region
    // active to the end. Short lifetimes make the whole first cohort
    // of regions expire on the same frame, long after the blinded
    // circles behind them have coasted away, so the scene rebuilds
    // from scratch in a synchronized wave; the load trend being tested
    // is about the settled state, not that relapse oscillation.
    RunConfig {
        psi_lifetime: 30,
        ..RunConfig::default()
    }
}

#[test]
fn clustered_scene_processing_drops_after_feedback_kicks_in() {
    let started = Instant::now();
    let sim = generate_sequence(&clustered_scene(), &[]);
    for frame in &sim.frames {
        assert!(frame.edges.len() >= 1000, "thin frame {}", frame.frame_id);
    }
    let (_, reports) = run_pipeline(&sim, feedback_config());

    let first_region_frame = reports
        .iter()
        .find(|r| r.metrics.n_psi > 0)
        .map(|r| r.metrics.frame_id)
        .expect("no ignore region was ever emitted");
    assert!(
        first_region_frame <= 6,
        "first ignore region came only on frame {first_region_frame}"
    );

    let processed = |r: &FrameReport| (r.metrics.raw_edges - r.metrics.culled) as f64;
    let mean = |lo: u64, hi: u64| {
        let rows: Vec<f64> = reports
            .iter()
            .filter(|r| (lo..=hi).contains(&r.metrics.frame_id))
            .map(processed)
            .collect();
        rows.iter().sum::<f64>() / rows.len() as f64
    };
    let baseline = mean(1, 5);
    let settled = mean(10, 30);
    assert!(
        settled <= 0.7 * baseline,
        "settled load {settled:.0} is not 30% below the early load {baseline:.0}"
    );

    for pair in reports.windows(2) {
        let (prev, cur) = (&pair[0], &pair[1]);
        if (10..=30).contains(&cur.metrics.frame_id) {
            assert!(
                cur.metrics.dimensionality
                    <= prev.metrics.dimensionality + cur.spawn_allowance,
                "frame {}: dimensionality {} -> {} exceeds the spawn allowance {}",
                cur.metrics.frame_id,
                prev.metrics.dimensionality,
                cur.metrics.dimensionality,
                cur.spawn_allowance
            );
        }
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "too slow: {elapsed:?}");
    println!(
        "PASS feedback load reduction: first region on frame {first_region_frame}, mean processed {baseline:.0} -> {settled:.0} edges ({:.0}% lower), growth bounded, in {elapsed:?}",
        100.0 * (1.0 - settled / baseline)
    );
}

// ---------------------------------------------------------------------
// Criterion: the worked numeric fixtures hold at exact tolerance.
// ---------------------------------------------------------------------

#[test]
fn pinned_numeric_fixtures_hold_exactly() {
    let thresholds = TrustThresholds {
        standard: 3.0,
        critical: 2.0,
        maximum: 5.0,
    };
    let frame = FrameGeometry::new(640, 480);
    let ego = EgoState {
        speed: 10.0,
        distance_traveled: 0.0,
        frame_interval: 1.0,
    };

    // Trust lifecycle: half-way start, hard ceiling, refresh level.
    let mut trust = thresholds.initial();
    assert!((trust.value() - 2.5).abs() < TOL);
    for _ in 0..3 {
        trust.adjust(1.0, &thresholds);
    }
    assert!((trust.value() - 5.0).abs() < TOL, "ceiling must clamp");
    trust.adjust(-1.0, &thresholds);
    assert!((trust.value() - 4.0).abs() < TOL);
    trust.refresh(&thresholds);
    assert!((trust.value() - 3.0).abs() < TOL);

    // Membership boundaries: strict collector disc, inclusive region.
    let collector = Collector {
        location: PixelPoint::new(100.0, 100.0),
        boundary_size: 25.0,
    };
    assert!(within_collector(PixelPoint::new(110.0, 110.0), &collector));
    assert!(!within_collector(PixelPoint::new(125.0, 100.0), &collector));
    let region = IgnoreRegion {
        location: PixelPoint::new(50.0, 40.0),
        shape: RegionShape::Rectangle {
            half_x: 10.0,
            half_y: 15.0,
        },
        expires_at_frame: 1,
    };
    assert!(inside_ignore_region(PixelPoint::new(60.0, 55.0), &region));
    assert!(!inside_ignore_region(PixelPoint::new(60.1, 55.0), &region));

    // Flow-line distance: collinear zero, off-ray offsets measured
    // perpendicular to the ray.
    let zero = error_span_distance(
        PixelPoint::new(420.0, 240.0),
        PixelPoint::new(370.0, 240.0),
        &frame,
    )
    .unwrap();
    assert!(zero.abs() < TOL);
    let four = error_span_distance(
        PixelPoint::new(370.0, 244.0),
        PixelPoint::new(370.0, 240.0),
        &frame,
    )
    .unwrap();
    assert!((four - 4.0).abs() < TOL);
    let diag = radial_angle(PixelPoint::new(370.0, 290.0), frame.center).unwrap();
    assert!((diag - 45.0).abs() < TOL);
    assert!((circular_difference(355.0, 10.0) - 15.0).abs() < TOL);

    // Biased means divide by count plus one.
    assert!((biased_mean(&[2.0, 4.0, 6.0]) - 3.0).abs() < TOL);
    assert!((biased_mean_angle(&[40.0, 40.0, 40.0]) - 30.0).abs() < TOL);

    // Gate halving: when the track speed equals the vehicle speed the
    // mismatch term vanishes and the gate halves for any correlation.
    let track = NormalEdge {
        id: 0,
        location: PixelPoint::new(400.0, 240.0),
        boundary_layer: 25.0,
        trust: Trust(2.5),
        angle: 0.0,
        speed: 10.0,
    };
    let predicted = NormalEdge {
        location: PixelPoint::new(410.0, 240.0),
        ..track
    };
    let obs = EdgePoint {
        location: PixelPoint::new(411.0, 240.0),
        frame_id: 2,
        timestamp: 2.0,
    };
    for correlation in [1usize, 7] {
        let updated =
            update_normal_edge(&track, &predicted, obs, &ego, &frame, correlation, &thresholds, 1.0)
                .unwrap();
        assert!(
            (updated.boundary_layer - 12.5).abs() < TOL,
            "correlation {correlation}"
        );
    }
    assert!(matches!(
        update_normal_edge(&track, &predicted, obs, &ego, &frame, 0, &thresholds, 1.0),
        Err(Error::ZeroCorrelation)
    ));

    // Chain promotion values for the right-angle-free bend.
    let params = RunConfig::default().edge_stage_params();
    let chain = RebelChain::seed(PixelPoint::new(0.0, 0.0), PixelPoint::new(10.0, 0.0), 1);
    let ChainOutcome::Promote(rebel) =
        advance_rebel_chain(&chain, Some(PixelPoint::new(20.0, 10.0)), &ego, &params, 7)
    else {
        panic!("three points must promote");
    };
    assert!((rebel.speed - 200.0f64.sqrt()).abs() < TOL);
    assert!((rebel.trust.value() - 2.5).abs() < TOL);
    assert!((rebel.boundary_layer - 25.0).abs() < TOL);
    let bend = (10.0f64 / 20.0).atan().to_degrees();
    assert!((rebel.angle - bend).abs() < TOL);
    assert!((rebel.deviation_level - bend).abs() < TOL);

    // Steady deviation: a bearing that keeps stepping by the learned
    // drift leaves the drift unchanged.
    let steady = RebelEdge {
        id: 0,
        location: PixelPoint::new(
            50.0 * (30.0f64.to_radians()).cos(),
            50.0 * (30.0f64.to_radians()).sin(),
        ),
        trust: Trust(3.0),
        angle: 30.0,
        speed: 10.0,
        deviation_level: 10.0,
        origin: PixelPoint::new(0.0, 0.0),
        boundary_layer: 25.0,
    };
    let ahead = EdgePoint {
        location: PixelPoint::new(
            60.0 * (40.0f64.to_radians()).cos(),
            60.0 * (40.0f64.to_radians()).sin(),
        ),
        frame_id: 2,
        timestamp: 2.0,
    };
    let updated = update_rebel_edge(&steady, ahead, &ego, &thresholds);
    assert!((updated.deviation_level - 10.0).abs() < TOL);
    assert!((updated.angle - 40.0).abs() < TOL);

    // Grouping window is strict: a bearing split of exactly the window
    // separates, anything inside joins.
    let peer = |id: u64, angle: f64, x: f64| NormalEdge {
        id,
        location: PixelPoint::new(x, 100.0),
        boundary_layer: 25.0,
        trust: Trust(2.5),
        angle,
        speed: 5.0,
    };
    let ego_slow = EgoState {
        speed: 5.0,
        distance_traveled: 0.0,
        frame_interval: 1.0,
    };
    let split = group_normal_edges(
        &[peer(0, 30.0, 100.0), peer(1, 50.0, 110.0)],
        20.0,
        10.0,
        &ego_slow,
        50.0,
    );
    assert_eq!(split.len(), 2, "a 20 degree split must not group at window 20");
    let joined = group_normal_edges(
        &[peer(0, 30.0, 100.0), peer(1, 49.0, 110.0)],
        20.0,
        10.0,
        &ego_slow,
        50.0,
    );
    assert_eq!(joined.len(), 1);

    // Involvement gate and bearing window between a group and a circle.
    let circle = NormalCircle {
        id: 0,
        center: PixelPoint::new(100.0, 100.0),
        radius: 12.5,
        trust: Trust(3.0),
        angle: 32.0,
        speed: 1.0,
    };
    let member = |x: f64, y: f64| NormalEdge {
        id: 0,
        location: PixelPoint::new(x, y),
        boundary_layer: 25.0,
        trust: Trust(2.5),
        angle: 40.0,
        speed: 8.0,
    };
    let group = [
        member(100.0, 100.0),
        member(105.0, 100.0),
        member(100.0, 105.0),
        member(150.0, 100.0),
    ];
    assert_eq!(
        match_normal_circle(&group, &circle, 4.0, 100.0, 50.0),
        CircleMatch::Aligned,
        "three of four inside and the biased bearings agree"
    );
    assert_eq!(
        match_normal_circle(&group, &circle, 4.0, 100.0, 76.0),
        CircleMatch::NoMatch,
        "75% involvement misses a 76% bar"
    );
    let off_bearing = NormalCircle {
        angle: 20.0,
        ..circle
    };
    assert_eq!(
        match_normal_circle(&group, &off_bearing, 4.0, 100.0, 50.0),
        CircleMatch::Deviated
    );

    // Centroid recentering at critical trust.
    let critical = NormalCircle {
        id: 0,
        center: PixelPoint::new(0.0, 0.0),
        radius: 12.5,
        trust: Trust(2.0),
        angle: 0.0,
        speed: 5.0,
    };
    let triangle = [
        member(100.0, 100.0),
        member(110.0, 100.0),
        member(105.0, 110.0),
    ];
    let recentered =
        update_normal_circle(&critical, &triangle, CircleMatch::Aligned, &thresholds, 12.5);
    assert!((recentered.center.x - 105.0).abs() < TOL);
    assert!((recentered.center.y - 310.0 / 3.0).abs() < TOL);

    // Rebel circle matching window over deviation-corrected bearings.
    let rebel_member = RebelEdge {
        id: 0,
        location: PixelPoint::new(100.0, 100.0),
        trust: Trust(2.5),
        angle: 40.0,
        speed: 10.0,
        deviation_level: 10.0,
        origin: PixelPoint::new(0.0, 0.0),
        boundary_layer: 25.0,
    };
    let rebel_circle = RebelCircle {
        id: 0,
        center: PixelPoint::new(100.0, 100.0),
        radius: 12.5,
        trust: Trust(2.5),
        angle: 25.0,
        speed: 5.0,
        deviation_level: 5.0,
    };
    assert_eq!(
        match_rebel_circle(&[rebel_member], &rebel_circle, 10.0, 1000.0, 50.0, &ego_slow),
        CircleMatch::Aligned,
        "biased corrected bearing 25 equals the circle bearing"
    );
    let far_circle = RebelCircle {
        angle: 40.0,
        ..rebel_circle
    };
    assert_eq!(
        match_rebel_circle(&[rebel_member], &far_circle, 10.0, 1000.0, 50.0, &ego_slow),
        CircleMatch::Deviated
    );

    println!("PASS pinned fixtures: trust lifecycle, boundaries, flow-line distances, gate halving, chain promotion, deviation carry, and all grouping / matching windows hold at 1e-9");
}

// ---------------------------------------------------------------------
// Criterion: identical seeds give byte-identical metrics.
// ---------------------------------------------------------------------

#[test]
fn identical_seeds_yield_byte_identical_metrics() {
    let csv = || {
        let sim = generate_sequence(&clustered_scene(), &[]);
        let (_, reports) = run_pipeline(&sim, feedback_config());
        let rows: Vec<_> = reports.iter().map(|r| r.metrics).collect();
        metrics_to_csv(&rows)
    };
    let first = csv();
    let second = csv();
    assert_eq!(first, second, "two identically seeded runs diverged");
    assert_eq!(first.lines().count(), 31, "header plus thirty frames");
    println!(
        "PASS determinism: two full runs produced byte-identical metrics ({} bytes)",
        first.len()
    );
}
