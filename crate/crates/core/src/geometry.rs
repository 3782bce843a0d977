//! Shared geometric vocabulary for the filter.
//!
//! Image convention: origin at the top-left corner, x grows rightward,
//! y grows downward. Angles are degrees in [0, 360), measured with
//! `atan2` under the y-down convention, so a point directly below the
//! origin sits at 90 degrees.

use serde::{Deserialize, Serialize};

use crate::Error;

/// Sub-pixel image position. Tracked estimates are real-valued even
/// when detections arrive on the integer grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub x: f64,
    pub y: f64,
}

impl PixelPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_to(&self, other: PixelPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Image plane dimensions with the optical center pinned to the
/// midpoint, which all radial-flow reasoning is anchored to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameGeometry {
    pub width: u32,
    pub height: u32,
    pub center: PixelPoint,
}

impl FrameGeometry {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            center: PixelPoint::new(f64::from(width) / 2.0, f64::from(height) / 2.0),
        }
    }

    pub fn contains(&self, p: PixelPoint) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x < f64::from(self.width) && p.y < f64::from(self.height)
    }
}

/// A single detected edge observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgePoint {
    pub location: PixelPoint,
    pub frame_id: u64,
    pub timestamp: f64,
}

/// Trust bounds shared by every tracked entity: `standard` is the
/// refresh value, `critical` the deletion floor, `maximum` the cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustThresholds {
    pub standard: f64,
    pub critical: f64,
    pub maximum: f64,
}

impl TrustThresholds {
    /// New entities start halfway between the critical and standard levels.
    pub fn initial(&self) -> Trust {
        Trust(0.5 * (self.critical + self.standard))
    }
}

/// Real-valued trust. Updates clamp at the maximum; owners delete the
/// entity at frame end once the value drops below the critical level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Trust(pub f64);

impl Trust {
    pub fn value(&self) -> f64 {
        self.0
    }

    /// Applies a delta, clamping at `maximum`. There is no lower clamp:
    /// deletion handles low values.
    pub fn adjust(&mut self, delta: f64, thresholds: &TrustThresholds) {
        self.0 = (self.0 + delta).min(thresholds.maximum);
    }

    /// Resets to the standard level (feedback refresh after a region emit).
    pub fn refresh(&mut self, thresholds: &TrustThresholds) {
        self.0 = thresholds.standard;
    }

    pub fn below_critical(&self, thresholds: &TrustThresholds) -> bool {
        self.0 < thresholds.critical
    }
}

/// Shape carried by an ignore region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RegionShape {
    /// Inert placeholder; contains nothing.
    None,
    Circle { radius: f64 },
    Rectangle { half_x: f64, half_y: f64 },
}

/// Feedback region: detections inside it are dropped before tracking
/// until the region expires.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IgnoreRegion {
    pub location: PixelPoint,
    pub shape: RegionShape,
    /// Last frame id on which the region is still active.
    pub expires_at_frame: u64,
}

impl IgnoreRegion {
    pub fn is_active(&self, frame_id: u64) -> bool {
        self.expires_at_frame >= frame_id
    }
}

/// Feedback collector: a gathering disc that groups incoming edges
/// around a previously aggregated circle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Collector {
    pub location: PixelPoint,
    pub boundary_size: f64,
}

/// Residual error left after compensating camera translation. Only the
/// rotational span (pixels, perpendicular to the flow line) gates the
/// classifier; the per-axis residuals are carried for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub rotational_span: f64,
    pub per_axis: [f64; 2],
}

impl ErrorModel {
    pub fn uniform(rotational_span: f64) -> Self {
        Self {
            rotational_span,
            per_axis: [rotational_span, rotational_span],
        }
    }
}

/// Vehicle motion for one frame, already converted to pixel units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    /// Forward speed in pixels per second.
    pub speed: f64,
    /// Cumulative distance traveled, pixels.
    pub distance_traveled: f64,
    /// Seconds between consecutive frames.
    pub frame_interval: f64,
}

/// Strict membership test for the collector gathering disc.
pub fn within_collector(edge: PixelPoint, collector: &Collector) -> bool {
    edge.distance_to(collector.location) < collector.boundary_size
}

/// Inclusive containment test for an ignore region. A `None` shape
/// contains nothing.
pub fn inside_ignore_region(edge: PixelPoint, region: &IgnoreRegion) -> bool {
    match region.shape {
        RegionShape::None => false,
        RegionShape::Circle { radius } => edge.distance_to(region.location) <= radius,
        RegionShape::Rectangle { half_x, half_y } => {
            (edge.x - region.location.x).abs() <= half_x
                && (edge.y - region.location.y).abs() <= half_y
        }
    }
}

/// Perpendicular pixel distance from `edge` to the radial line running
/// through the frame center and `tracked`. Computed from the normalized
/// cross product, which handles vertical and horizontal rays without a
/// slope special case and is invariant to sliding `tracked` along its ray.
pub fn error_span_distance(
    edge: PixelPoint,
    tracked: PixelPoint,
    frame: &FrameGeometry,
) -> Result<f64, Error> {
    let dx = tracked.x - frame.center.x;
    let dy = tracked.y - frame.center.y;
    let norm = dx.hypot(dy);
    if norm == 0.0 {
        return Err(Error::DegenerateRay);
    }
    let ex = edge.x - frame.center.x;
    let ey = edge.y - frame.center.y;
    Ok((dx * ey - dy * ex).abs() / norm)
}

/// Angle of `point` as seen from `origin`, degrees in [0, 360) under
/// the y-down convention.
pub fn radial_angle(point: PixelPoint, origin: PixelPoint) -> Result<f64, Error> {
    let dx = point.x - origin.x;
    let dy = point.y - origin.y;
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::DegenerateRay);
    }
    Ok(normalize_angle(dy.atan2(dx).to_degrees()))
}

/// Maps any angle in degrees onto [0, 360).
pub fn normalize_angle(deg: f64) -> f64 {
    let r = deg % 360.0;
    if r < 0.0 {
        r + 360.0
    } else {
        r
    }
}

/// Shortest unsigned angular difference, degrees in [0, 180].
pub fn circular_difference(a: f64, b: f64) -> f64 {
    let d = (normalize_angle(a) - normalize_angle(b)).abs();
    if d > 180.0 {
        360.0 - d
    } else {
        d
    }
}

/// Signed shortest rotation taking `from` to `to`, degrees in (-180, 180].
pub fn signed_circular_difference(to: f64, from: f64) -> f64 {
    let mut d = (normalize_angle(to) - normalize_angle(from)) % 360.0;
    if d > 180.0 {
        d -= 360.0;
    } else if d <= -180.0 {
        d += 360.0;
    }
    d
}

/// Moves `prior` toward `target` along the shortest arc with weight
/// `prior_weight : 1`, mirroring the trust-weighted scalar blend.
pub fn blend_angle(prior: f64, target: f64, prior_weight: f64) -> f64 {
    let step = signed_circular_difference(target, prior) / (prior_weight + 1.0);
    normalize_angle(prior + step)
}

/// Unit vector pointing at `angle_deg` under the y-down convention.
pub fn unit_vector(angle_deg: f64) -> (f64, f64) {
    let r = angle_deg.to_radians();
    (r.cos(), r.sin())
}

/// Biased mean of a set of angles: the printed form sums M values and
/// divides by M + 1. Terms are unwrapped around the first value so that
/// groups straddling the 0/360 seam stay coherent; for groups that do
/// not wrap this equals the literal sum divided by M + 1.
pub fn biased_mean_angle(terms: &[f64]) -> f64 {
    if terms.is_empty() {
        return 0.0;
    }
    let reference = normalize_angle(terms[0]);
    let sum: f64 = terms
        .iter()
        .map(|&t| reference + signed_circular_difference(t, reference))
        .sum();
    normalize_angle(sum / (terms.len() as f64 + 1.0))
}

/// Biased mean of non-negative scalars: sum of M values over M + 1.
pub fn biased_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / (values.len() as f64 + 1.0)
}
