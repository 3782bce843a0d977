//! Rendering: grayscale frames for the simulator (dots on black, so
//! the corner detector can be driven end-to-end) and RGB overlays
//! visualizing one processed frame of the filter.

use crate::fast::GrayImage;
use crate::geometry::{FrameGeometry, PixelPoint, RegionShape};
use crate::pipeline::FilterState;

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    /// RGB triplets, `3 * width * height` bytes.
    pub data: Vec<u8>,
}

pub type Color = [u8; 3];

pub const DETECTED: Color = [255, 255, 255];
pub const CULLED: Color = [220, 40, 40];
pub const NORMAL_EDGE: Color = [60, 220, 60];
pub const REBEL_EDGE: Color = [255, 160, 40];
pub const NORMAL_CIRCLE: Color = [80, 180, 255];
pub const REBEL_CIRCLE: Color = [230, 80, 230];
pub const REGION: Color = [120, 120, 120];

impl RgbImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![0; 3 * width as usize * height as usize],
        }
    }

    pub fn set(&mut self, x: i64, y: i64, color: Color) {
        if x < 0 || y < 0 || x >= i64::from(self.width) || y >= i64::from(self.height) {
            return;
        }
        let i = 3 * (y as usize * self.width as usize + x as usize);
        self.data[i..i + 3].copy_from_slice(&color);
    }

    pub fn get(&self, x: u32, y: u32) -> Color {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

fn rounded(p: PixelPoint) -> (i64, i64) {
    (p.x.round() as i64, p.y.round() as i64)
}

/// Filled dot: the pixel plus its 4-neighborhood.
pub fn draw_dot(image: &mut RgbImage, p: PixelPoint, color: Color) {
    let (x, y) = rounded(p);
    image.set(x, y, color);
    image.set(x + 1, y, color);
    image.set(x - 1, y, color);
    image.set(x, y + 1, color);
    image.set(x, y - 1, color);
}

/// Plus-shaped marker with the given arm length.
pub fn draw_cross(image: &mut RgbImage, p: PixelPoint, arm: i64, color: Color) {
    let (x, y) = rounded(p);
    for d in -arm..=arm {
        image.set(x + d, y, color);
        image.set(x, y + d, color);
    }
}

/// One-pixel circle outline sampled densely enough to be gap-free.
pub fn draw_circle_outline(image: &mut RgbImage, center: PixelPoint, radius: f64, color: Color) {
    let steps = (radius.max(1.0) * 8.0).ceil() as usize;
    for k in 0..steps {
        let theta = std::f64::consts::TAU * k as f64 / steps as f64;
        let (x, y) = rounded(PixelPoint::new(
            center.x + radius * theta.cos(),
            center.y + radius * theta.sin(),
        ));
        image.set(x, y, color);
    }
}

/// Overlay for one frame: surviving detections as white dots, culled
/// detections red, edge tracks as crosses (green normal, orange
/// rebel), circles as outlines (blue normal, magenta rebel), active
/// ignore regions as gray outlines.
pub fn render_overlay(
    frame: &FrameGeometry,
    kept: &[PixelPoint],
    culled: &[PixelPoint],
    state: &FilterState,
) -> RgbImage {
    let mut image = RgbImage::new(frame.width, frame.height);
    for p in kept {
        draw_dot(&mut image, *p, DETECTED);
    }
    for p in culled {
        draw_dot(&mut image, *p, CULLED);
    }
    for region in &state.regions {
        if let RegionShape::Circle { radius } = region.shape {
            draw_circle_outline(&mut image, region.location, radius, REGION);
        }
    }
    for edge in &state.edges.normals {
        draw_cross(&mut image, edge.location, 2, NORMAL_EDGE);
    }
    for rebel in &state.edges.rebels {
        draw_cross(&mut image, rebel.location, 3, REBEL_EDGE);
    }
    for circle in &state.circles.normals {
        draw_circle_outline(&mut image, circle.center, circle.radius, NORMAL_CIRCLE);
    }
    for circle in &state.circles.rebels {
        draw_circle_outline(&mut image, circle.center, circle.radius, REBEL_CIRCLE);
    }
    image
}

/// Grayscale frame for the simulator: radius-2 bright discs on black,
/// one per point. A disc this size triggers the segment test at its
/// center pixel.
pub fn render_points(frame: &FrameGeometry, points: &[PixelPoint]) -> GrayImage {
    let mut image = GrayImage::filled(frame.width, frame.height, 0);
    for p in points {
        let (cx, cy) = rounded(*p);
        for dy in -2i64..=2 {
            for dx in -2i64..=2 {
                if dx * dx + dy * dy > 4 {
                    continue;
                }
                let (x, y) = (cx + dx, cy + dy);
                if x >= 0 && y >= 0 && x < i64::from(frame.width) && y < i64::from(frame.height) {
                    image.set(x as u32, y as u32, 255);
                }
            }
        }
    }
    image
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlay_has_frame_dimensions_and_marks_points() {
        let frame = FrameGeometry::new(64, 48);
        let kept = vec![PixelPoint::new(10.0, 10.0)];
        let culled = vec![PixelPoint::new(20.0, 12.0)];
        let image = render_overlay(&frame, &kept, &culled, &FilterState::default());
        assert_eq!((image.width, image.height), (64, 48));
        assert_eq!(image.get(10, 10), DETECTED);
        assert_eq!(image.get(20, 12), CULLED);
    }

    #[test]
    fn out_of_frame_points_are_ignored() {
        let frame = FrameGeometry::new(32, 32);
        let kept = vec![PixelPoint::new(-5.0, 700.0)];
        let image = render_overlay(&frame, &kept, &[], &FilterState::default());
        assert!(image.data.iter().all(|&b| b == 0));
    }

    #[test]
    fn circle_outline_touches_the_cardinal_points() {
        let mut image = RgbImage::new(64, 64);
        draw_circle_outline(&mut image, PixelPoint::new(32.0, 32.0), 10.0, NORMAL_CIRCLE);
        assert_eq!(image.get(42, 32), NORMAL_CIRCLE);
        assert_eq!(image.get(22, 32), NORMAL_CIRCLE);
        assert_eq!(image.get(32, 42), NORMAL_CIRCLE);
        assert_eq!(image.get(32, 22), NORMAL_CIRCLE);
    }

    #[test]
    fn rendered_points_become_bright_discs() {
        let frame = FrameGeometry::new(32, 32);
        let image = render_points(&frame, &[PixelPoint::new(16.0, 16.0)]);
        assert_eq!(image.get(16, 16), 255);
        assert_eq!(image.get(18, 16), 255);
        assert_eq!(image.get(16, 13), 0);
        assert_eq!(image.get(10, 10), 0);
    }
}
