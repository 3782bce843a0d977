//! File formats: PGM images in, PPM overlays out, and the plain-text
//! interchange files (edge streams, ego logs, metrics CSV, event logs,
//! state dumps). All numbers use locale-independent formatting that
//! round-trips f64 exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::events::LogRecord;
use crate::fast::GrayImage;
use crate::geometry::PixelPoint;
use crate::pipeline::{FilterState, FrameMetrics};
use crate::render::RgbImage;
use crate::{Error, Result};

fn malformed(what: &'static str, detail: impl Into<String>) -> Error {
    Error::Malformed {
        what,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// PGM / PPM images

/// Parses a PGM image, binary (P5) or ASCII (P2), with maxval up to 255.
pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0usize;
    let next_token = |pos: &mut usize| -> Result<String> {
        // Skip whitespace and '#' comments that run to end of line.
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
                continue;
            }
            break;
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(malformed("pgm", "unexpected end of header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };

    let magic = next_token(&mut pos)?;
    if magic != "P5" && magic != "P2" {
        return Err(malformed("pgm", format!("unsupported magic {magic}")));
    }
    let width: u32 = next_token(&mut pos)?
        .parse()
        .map_err(|e| malformed("pgm", format!("width: {e}")))?;
    let height: u32 = next_token(&mut pos)?
        .parse()
        .map_err(|e| malformed("pgm", format!("height: {e}")))?;
    let maxval: u32 = next_token(&mut pos)?
        .parse()
        .map_err(|e| malformed("pgm", format!("maxval: {e}")))?;
    if maxval == 0 || maxval > 255 {
        return Err(malformed("pgm", format!("maxval {maxval} out of range")));
    }
    let pixel_count = width as usize * height as usize;
    let data = if magic == "P5" {
        pos += 1; // exactly one whitespace byte after maxval
        bytes
            .get(pos..pos + pixel_count)
            .ok_or_else(|| malformed("pgm", "truncated pixel data"))?
            .to_vec()
    } else {
        let mut data = Vec::with_capacity(pixel_count);
        for i in 0..pixel_count {
            let value: u32 = next_token(&mut pos)?
                .parse()
                .map_err(|e| malformed("pgm", format!("pixel {i}: {e}")))?;
            if value > maxval {
                return Err(malformed("pgm", format!("pixel {i} above maxval")));
            }
            data.push(value as u8);
        }
        data
    };
    GrayImage::new(width, height, data)
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    parse_pgm(&bytes)
}

/// Writes a binary (P5) PGM with maxval 255.
pub fn write_pgm(path: &Path, image: &GrayImage) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P5\n{} {}\n255\n", image.width, image.height)?;
    out.write_all(&image.data)?;
    Ok(())
}

/// Writes a binary (P6) PPM with maxval 255.
pub fn write_ppm(path: &Path, image: &RgbImage) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P6\n{} {}\n255\n", image.width, image.height)?;
    out.write_all(&image.data)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Edge streams

/// One frame of detected edges as stored in an edge-stream file.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeStreamFrame {
    pub frame_id: u64,
    pub timestamp: f64,
    pub points: Vec<PixelPoint>,
}

/// Writes one line per frame: `frame_id timestamp x y x y ...`.
pub fn write_edge_stream(path: &Path, frames: &[EdgeStreamFrame]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for frame in frames {
        write!(out, "{} {}", frame.frame_id, frame.timestamp)?;
        for p in &frame.points {
            write!(out, " {} {}", p.x, p.y)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_edge_stream(path: &Path) -> Result<Vec<EdgeStreamFrame>> {
    let reader = BufReader::new(File::open(path)?);
    let mut frames = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let context = || format!("line {}", lineno + 1);
        let frame_id: u64 = tokens
            .next()
            .ok_or_else(|| malformed("edge stream", context()))?
            .parse()
            .map_err(|e| malformed("edge stream", format!("{}: frame id: {e}", context())))?;
        let timestamp: f64 = tokens
            .next()
            .ok_or_else(|| malformed("edge stream", context()))?
            .parse()
            .map_err(|e| malformed("edge stream", format!("{}: timestamp: {e}", context())))?;
        let rest: Vec<&str> = tokens.collect();
        if rest.len() % 2 != 0 {
            return Err(malformed(
                "edge stream",
                format!("{}: odd coordinate count", context()),
            ));
        }
        let mut points = Vec::with_capacity(rest.len() / 2);
        for pair in rest.chunks_exact(2) {
            let x: f64 = pair[0]
                .parse()
                .map_err(|e| malformed("edge stream", format!("{}: x: {e}", context())))?;
            let y: f64 = pair[1]
                .parse()
                .map_err(|e| malformed("edge stream", format!("{}: y: {e}", context())))?;
            points.push(PixelPoint::new(x, y));
        }
        frames.push(EdgeStreamFrame {
            frame_id,
            timestamp,
            points,
        });
    }
    Ok(frames)
}

// ---------------------------------------------------------------------------
// Ego logs

/// One line of the vehicle log: `frame_id speed distance`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoRecord {
    pub frame_id: u64,
    pub speed: f64,
    pub distance: f64,
}

pub fn write_ego_log(path: &Path, records: &[EgoRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        writeln!(out, "{} {} {}", r.frame_id, r.speed, r.distance)?;
    }
    Ok(())
}

pub fn read_ego_log(path: &Path) -> Result<Vec<EgoRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(malformed(
                "ego log",
                format!("line {}: expected 3 fields, got {}", lineno + 1, fields.len()),
            ));
        }
        let parse_err =
            |what: &str, e: String| malformed("ego log", format!("line {}: {what}: {e}", lineno + 1));
        records.push(EgoRecord {
            frame_id: fields[0]
                .parse()
                .map_err(|e: std::num::ParseIntError| parse_err("frame id", e.to_string()))?,
            speed: fields[1]
                .parse()
                .map_err(|e: std::num::ParseFloatError| parse_err("speed", e.to_string()))?,
            distance: fields[2]
                .parse()
                .map_err(|e: std::num::ParseFloatError| parse_err("distance", e.to_string()))?,
        });
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// Metrics CSV

pub const METRICS_HEADER: &str =
    "frame_id,raw_edges,culled,n_En,n_Er,n_Cn,n_Cr,n_psi,dimensionality";

pub fn metrics_to_csv(rows: &[FrameMetrics]) -> String {
    let mut text = String::from(METRICS_HEADER);
    text.push('\n');
    for m in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            m.frame_id,
            m.raw_edges,
            m.culled,
            m.n_en,
            m.n_er,
            m.n_cn,
            m.n_cr,
            m.n_psi,
            m.dimensionality
        ));
    }
    text
}

pub fn write_metrics(path: &Path, rows: &[FrameMetrics]) -> Result<()> {
    Ok(std::fs::write(path, metrics_to_csv(rows))?)
}

// ---------------------------------------------------------------------------
// Event logs and state dumps

/// Writes trust events as one JSON record per line.
pub fn write_event_log(path: &Path, events: &[LogRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for event in events {
        serde_json::to_writer(&mut out, event)?;
        writeln!(out)?;
    }
    Ok(())
}

pub fn read_event_log(path: &Path) -> Result<Vec<LogRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut events = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(serde_json::from_str(&line)?);
    }
    Ok(events)
}

pub fn write_state(path: &Path, state: &FilterState) -> Result<()> {
    let out = BufWriter::new(File::create(path)?);
    Ok(serde_json::to_writer_pretty(out, state)?)
}

pub fn read_state(path: &Path) -> Result<FilterState> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
