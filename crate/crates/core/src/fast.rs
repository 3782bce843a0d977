//! FAST9 corner detection on 8-bit grayscale images.
//!
//! A pixel is a corner when at least 9 contiguous pixels on the
//! 16-pixel Bresenham circle of radius 3 are all brighter than
//! center + threshold or all darker than center - threshold.
//! Contiguity wraps across the circle seam. The 3-pixel image border
//! is never examined.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Ring offsets, clockwise from the top pixel.
pub const RING: [(i32, i32); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

const MIN_CONTIGUOUS: usize = 9;

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if data.len() != (width as usize) * (height as usize) {
            return Err(Error::Malformed {
                what: "gray image",
                detail: format!(
                    "{} bytes for {}x{} image",
                    data.len(),
                    width,
                    height
                ),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, value: u8) -> Self {
        Self {
            width,
            height,
            data: vec![value; (width as usize) * (height as usize)],
        }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[(y as usize) * (self.width as usize) + (x as usize)]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        self.data[(y as usize) * (self.width as usize) + (x as usize)] = value;
    }
}

/// A detected corner with its suppression score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corner {
    pub x: u32,
    pub y: u32,
    pub score: i32,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Polarity {
    Brighter,
    Darker,
}

fn ring_values(img: &GrayImage, x: u32, y: u32) -> [i32; 16] {
    let mut vals = [0i32; 16];
    for (i, (dx, dy)) in RING.iter().enumerate() {
        let px = (x as i32 + dx) as u32;
        let py = (y as i32 + dy) as u32;
        vals[i] = i32::from(img.get(px, py));
    }
    vals
}

/// Longest circular run test for one polarity.
fn has_contiguous(ring: &[i32; 16], qualifies: impl Fn(i32) -> bool) -> bool {
    let mut run = 0usize;
    // two passes cover runs that wrap the seam
    for i in 0..32 {
        if qualifies(ring[i % 16]) {
            run += 1;
            if run >= MIN_CONTIGUOUS {
                return true;
            }
        } else {
            run = 0;
        }
    }
    false
}

fn segment_test(ring: &[i32; 16], center: i32, threshold: i32) -> Option<Polarity> {
    if has_contiguous(ring, |p| p > center + threshold) {
        Some(Polarity::Brighter)
    } else if has_contiguous(ring, |p| p < center - threshold) {
        Some(Polarity::Darker)
    } else {
        None
    }
}

/// Sum of absolute threshold exceedances over the qualifying ring
/// pixels; the larger polarity wins so the score is invariant under
/// image inversion.
fn corner_score(ring: &[i32; 16], center: i32, threshold: i32) -> i32 {
    let bright: i32 = ring
        .iter()
        .filter(|&&p| p > center + threshold)
        .map(|&p| p - center - threshold)
        .sum();
    let dark: i32 = ring
        .iter()
        .filter(|&&p| p < center - threshold)
        .map(|&p| center - p - threshold)
        .sum();
    bright.max(dark)
}

/// Runs the segment test over the interior, optionally followed by
/// non-maximum suppression. Output is sorted by y then x. Suppression
/// keeps the strongest corner of any 5x5 neighborhood; score ties break
/// toward smaller y then x, so no two survivors sit within Chebyshev
/// distance 2 of each other. The 5x5 window (rather than 3x3) is what
/// collapses the responder cluster around a right-angle corner to a
/// single detection: the segment test also fires two pixels along each
/// edge from the corner, where the ring still wraps into both dark bands.
pub fn detect_fast9(img: &GrayImage, threshold: u8, nms: bool) -> Result<Vec<Corner>> {
    if img.width < 7 || img.height < 7 {
        return Err(Error::ImageTooSmall {
            width: img.width,
            height: img.height,
        });
    }
    let t = i32::from(threshold);
    let mut corners = Vec::new();
    for y in 3..img.height - 3 {
        for x in 3..img.width - 3 {
            let center = i32::from(img.get(x, y));
            let ring = ring_values(img, x, y);
            if segment_test(&ring, center, t).is_some() {
                corners.push(Corner {
                    x,
                    y,
                    score: corner_score(&ring, center, t),
                });
            }
        }
    }
    if nms {
        corners = suppress(corners);
    }
    Ok(corners)
}

fn suppress(mut corners: Vec<Corner>) -> Vec<Corner> {
    corners.sort_by(|a, b| {
        b.score
            .cmp(&a.score)
            .then(a.y.cmp(&b.y))
            .then(a.x.cmp(&b.x))
    });
    let mut kept: Vec<Corner> = Vec::with_capacity(corners.len());
    for c in corners {
        let blocked = kept.iter().any(|k| {
            (i64::from(k.x) - i64::from(c.x)).abs() <= 2
                && (i64::from(k.y) - i64::from(c.y)).abs() <= 2
        });
        if !blocked {
            kept.push(c);
        }
    }
    kept.sort_by(|a, b| a.y.cmp(&b.y).then(a.x.cmp(&b.x)));
    kept
}
