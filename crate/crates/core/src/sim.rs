//! Synthetic scene generator: a pinhole camera drives straight ahead
//! through a field of static landmarks, so their projections flow
//! radially outward from the image center. Injected moving objects
//! break that flow and are labeled accordingly, giving acceptance
//! tests a ground-truth edge stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{error_span_distance, EdgePoint, EgoState, FrameGeometry, PixelPoint};

/// What a world point does over time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PointKind {
    Static,
    /// Constant world velocity, units/second per axis.
    Moving { velocity: [f64; 3] },
}

/// A point in camera-aligned world coordinates: x right, y down,
/// z forward along the travel direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldPoint {
    pub position: [f64; 3],
    pub kind: PointKind,
}

impl WorldPoint {
    pub fn fixed(x: f64, y: f64, z: f64) -> Self {
        Self {
            position: [x, y, z],
            kind: PointKind::Static,
        }
    }

    pub fn moving(position: [f64; 3], velocity: [f64; 3]) -> Self {
        Self {
            position,
            kind: PointKind::Moving { velocity },
        }
    }

    /// World position after `t` seconds.
    pub fn position_at(&self, t: f64) -> [f64; 3] {
        match self.kind {
            PointKind::Static => self.position,
            PointKind::Moving { velocity } => [
                self.position[0] + velocity[0] * t,
                self.position[1] + velocity[1] * t,
                self.position[2] + velocity[2] * t,
            ],
        }
    }
}

/// Result of projecting a world point into the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Visible(PixelPoint),
    Invisible,
}

impl Projection {
    pub fn visible(self) -> Option<PixelPoint> {
        match self {
            Projection::Visible(p) => Some(p),
            Projection::Invisible => None,
        }
    }
}

/// Pinhole projection of a world position for a camera at `camera_z`
/// on the axis: u = center_x + focal*x/depth, v = center_y +
/// focal*y/depth. Points behind the camera or outside the frame are
/// `Invisible`.
pub fn project(
    position: [f64; 3],
    camera_z: f64,
    frame: &FrameGeometry,
    focal: f64,
) -> Projection {
    let depth = position[2] - camera_z;
    if depth <= 1e-9 {
        return Projection::Invisible;
    }
    let p = PixelPoint::new(
        frame.center.x + focal * position[0] / depth,
        frame.center.y + focal * position[1] / depth,
    );
    if frame.contains(p) {
        Projection::Visible(p)
    } else {
        Projection::Invisible
    }
}

/// How static landmarks are placed in the world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WorldLayout {
    /// Independent samples over the visible frustum: image position
    /// uniform within `image_fill` of the half-extents, depth uniform
    /// in [depth_min, depth_max].
    Scattered {
        depth_min: f64,
        depth_max: f64,
        image_fill: f64,
    },
    /// Tight clusters standing in for physical objects: cluster
    /// centers on an image annulus, members spread by a Gaussian of
    /// `spread_px` pixels around the center at its depth.
    Clustered {
        clusters: usize,
        depth_min: f64,
        depth_max: f64,
        annulus_min_px: f64,
        annulus_max_px: f64,
        spread_px: f64,
    },
}

/// Everything needed to generate a deterministic sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub landmark_count: usize,
    /// Focal length, pixels.
    pub focal_length: f64,
    /// Vehicle speed, world units/second.
    pub ego_speed: f64,
    /// Frames per second; the frame interval is its reciprocal.
    pub frame_rate: f64,
    /// Per-point Gaussian pixel noise.
    pub pixel_noise_sigma: f64,
    /// Per-frame global shift modelling rotational jitter, pixels.
    pub rotational_error_sigma: f64,
    pub seed: u64,
    pub frame_count: u64,
    pub frame_width: u32,
    pub frame_height: u32,
    pub layout: WorldLayout,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            landmark_count: 100,
            focal_length: 400.0,
            ego_speed: 5.0,
            frame_rate: 1.0,
            pixel_noise_sigma: 0.0,
            rotational_error_sigma: 0.0,
            seed: 7,
            frame_count: 10,
            frame_width: 640,
            frame_height: 480,
            layout: WorldLayout::Scattered {
                depth_min: 60.0,
                depth_max: 160.0,
                image_fill: 0.7,
            },
        }
    }
}

/// Ground-truth identity of an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeLabel {
    Normal,
    Rebel,
}

/// Which world point produced an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeSource {
    Landmark(usize),
    Object(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledEdge {
    pub edge: EdgePoint,
    pub label: EdgeLabel,
    pub source: EdgeSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimFrame {
    pub frame_id: u64,
    pub timestamp: f64,
    pub ego: EgoState,
    pub edges: Vec<LabeledEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub frames: Vec<SimFrame>,
    pub landmarks: Vec<WorldPoint>,
    pub objects: Vec<WorldPoint>,
}

fn sample_landmarks(rng: &mut ChaCha8Rng, config: &SimConfig, frame: &FrameGeometry) -> Vec<WorldPoint> {
    let f = config.focal_length;
    let mut landmarks = Vec::with_capacity(config.landmark_count);
    match config.layout {
        WorldLayout::Scattered {
            depth_min,
            depth_max,
            image_fill,
        } => {
            let half_u = image_fill * frame.center.x;
            let half_v = image_fill * frame.center.y;
            for _ in 0..config.landmark_count {
                let du = rng.gen_range(-half_u..=half_u);
                let dv = rng.gen_range(-half_v..=half_v);
                let d = rng.gen_range(depth_min..=depth_max);
                landmarks.push(WorldPoint::fixed(du * d / f, dv * d / f, d));
            }
        }
        WorldLayout::Clustered {
            clusters,
            depth_min,
            depth_max,
            annulus_min_px,
            annulus_max_px,
            spread_px,
        } => {
            let clusters = clusters.max(1);
            for c in 0..clusters {
                let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                let r = rng.gen_range(annulus_min_px..=annulus_max_px);
                let d = rng.gen_range(depth_min..=depth_max);
                let cu = r * theta.cos();
                let cv = r * theta.sin();
                let spread_world = Normal::new(0.0, spread_px * d / f).unwrap();
                let members = (config.landmark_count - c + clusters - 1) / clusters;
                for _ in 0..members {
                    let x = cu * d / f + spread_world.sample(rng);
                    let y = cv * d / f + spread_world.sample(rng);
                    let z = d + spread_world.sample(rng);
                    landmarks.push(WorldPoint::fixed(x, y, z));
                }
            }
        }
    }
    landmarks
}

/// Generates the full labeled sequence for `config` plus the given
/// moving objects. Static landmarks are sampled from the layout and
/// always labeled normal; a moving object's edge is labeled rebel on
/// frames where its image motion leaves the radial ray through its
/// previous position by more than the noise floor. Identical seeds
/// reproduce the output exactly.
pub fn generate_sequence(config: &SimConfig, moving_objects: &[WorldPoint]) -> SimOutput {
    let frame = FrameGeometry::new(config.frame_width, config.frame_height);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let landmarks = sample_landmarks(&mut rng, config, &frame);
    let t_f = 1.0 / config.frame_rate;
    let point_noise = Normal::new(0.0, config.pixel_noise_sigma).unwrap();
    let shift_noise = Normal::new(0.0, config.rotational_error_sigma).unwrap();
    // Deviations smaller than the combined jitter cannot be told apart
    // from noise, so they stay labeled normal.
    let noise_floor = 4.0 * (config.pixel_noise_sigma + config.rotational_error_sigma) + 1e-6;

    let mut frames = Vec::with_capacity(config.frame_count as usize);
    let mut previous_ideal: Vec<Option<PixelPoint>> = vec![None; moving_objects.len()];
    for frame_id in 1..=config.frame_count {
        let t = (frame_id - 1) as f64 * t_f;
        let camera_z = config.ego_speed * t;
        let shift = (shift_noise.sample(&mut rng), shift_noise.sample(&mut rng));
        let mut edges = Vec::new();
        for (i, landmark) in landmarks.iter().enumerate() {
            let noise = (point_noise.sample(&mut rng), point_noise.sample(&mut rng));
            if let Projection::Visible(p) =
                project(landmark.position, camera_z, &frame, config.focal_length)
            {
                let observed =
                    PixelPoint::new(p.x + shift.0 + noise.0, p.y + shift.1 + noise.1);
                if frame.contains(observed) {
                    edges.push(LabeledEdge {
                        edge: EdgePoint {
                            location: observed,
                            frame_id,
                            timestamp: t,
                        },
                        label: EdgeLabel::Normal,
                        source: EdgeSource::Landmark(i),
                    });
                }
            }
        }
        for (j, object) in moving_objects.iter().enumerate() {
            let noise = (point_noise.sample(&mut rng), point_noise.sample(&mut rng));
            let ideal = project(object.position_at(t), camera_z, &frame, config.focal_length);
            if let Projection::Visible(p) = ideal {
                let label = match previous_ideal[j] {
                    Some(prev) => match error_span_distance(p, prev, &frame) {
                        Ok(dev) if dev > noise_floor => EdgeLabel::Rebel,
                        _ => EdgeLabel::Normal,
                    },
                    None => EdgeLabel::Normal,
                };
                let observed =
                    PixelPoint::new(p.x + shift.0 + noise.0, p.y + shift.1 + noise.1);
                if frame.contains(observed) {
                    edges.push(LabeledEdge {
                        edge: EdgePoint {
                            location: observed,
                            frame_id,
                            timestamp: t,
                        },
                        label,
                        source: EdgeSource::Object(j),
                    });
                }
            }
            previous_ideal[j] = ideal.visible();
        }
        frames.push(SimFrame {
            frame_id,
            timestamp: t,
            ego: EgoState {
                speed: config.ego_speed,
                distance_traveled: camera_z,
                frame_interval: t_f,
            },
            edges,
        });
    }
    SimOutput {
        frames,
        landmarks,
        objects: moving_objects.to_vec(),
    }
}
