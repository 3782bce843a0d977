//! Command-line frontend: scene simulation, corner detection, the full
//! filter loop, and metrics summaries.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lc_core::config::RunConfig;
use lc_core::fast::detect_fast9;
use lc_core::geometry::{EdgePoint, EgoState, PixelPoint};
use lc_core::io::{
    metrics_to_csv, read_edge_stream, read_ego_log, read_pgm, read_state, write_edge_stream,
    write_ego_log, write_event_log, write_metrics, write_pgm, write_ppm, write_state,
    EdgeStreamFrame, EgoRecord,
};
use lc_core::line_expert::cull_edges;
use lc_core::pipeline::{FrameMetrics, Pipeline};
use lc_core::render::{render_overlay, render_points};
use lc_core::sim::{generate_sequence, SimConfig, WorldLayout, WorldPoint};

#[derive(Parser)]
#[command(name = "lc", about = "Line-Circle geometric filter tools", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic edge stream and ego log.
    Simulate(SimulateArgs),
    /// Detect corners in PGM images and write an edge stream.
    Detect(DetectArgs),
    /// Run the filter over an edge stream or image directory.
    Run(RunArgs),
    /// Summarize a metrics CSV.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Number of static landmarks.
    #[arg(long, default_value_t = 100)]
    landmarks: usize,
    /// Frames to generate.
    #[arg(long, default_value_t = 10)]
    frames: u64,
    /// Frames per second.
    #[arg(long, default_value_t = 1.0)]
    frame_rate: f64,
    /// Vehicle speed, world units/second.
    #[arg(long, default_value_t = 5.0)]
    ego_speed: f64,
    /// Focal length, pixels.
    #[arg(long, default_value_t = 400.0)]
    focal: f64,
    /// Per-point Gaussian pixel noise sigma.
    #[arg(long, default_value_t = 0.0)]
    pixel_noise: f64,
    /// Per-frame global shift sigma (rotational jitter).
    #[arg(long, default_value_t = 0.0)]
    rotational_noise: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 640)]
    frame_width: u32,
    #[arg(long, default_value_t = 480)]
    frame_height: u32,
    /// Landmark placement: "scattered" or "clustered".
    #[arg(long, default_value = "scattered")]
    layout: String,
    #[arg(long, default_value_t = 60.0)]
    depth_min: f64,
    #[arg(long, default_value_t = 160.0)]
    depth_max: f64,
    /// Scattered layout: fraction of the half-extents to fill.
    #[arg(long, default_value_t = 0.7)]
    image_fill: f64,
    /// Clustered layout: number of clusters.
    #[arg(long, default_value_t = 84)]
    clusters: usize,
    /// Clustered layout: annulus of cluster centers, pixels.
    #[arg(long, default_value_t = 60.0)]
    annulus_min: f64,
    #[arg(long, default_value_t = 110.0)]
    annulus_max: f64,
    /// Clustered layout: Gaussian member spread, pixels.
    #[arg(long, default_value_t = 4.0)]
    spread: f64,
    /// Moving object as "x,y,z,vx,vy,vz"; repeatable.
    #[arg(long = "object", value_name = "SPEC")]
    objects: Vec<String>,
    /// Output edge-stream path.
    #[arg(long, default_value = "edges.txt")]
    edges: PathBuf,
    /// Output ego-log path.
    #[arg(long, default_value = "ego.txt")]
    ego: PathBuf,
    /// Also render each frame as a PGM into this directory.
    #[arg(long)]
    render_dir: Option<PathBuf>,
    /// Also write the ground-truth labels as JSON.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    /// Directory of PGM frames (sorted by name) or a single PGM file.
    #[arg(long)]
    images: PathBuf,
    #[arg(long, default_value_t = 25)]
    threshold: u8,
    /// Disable non-maximum suppression.
    #[arg(long)]
    no_nms: bool,
    /// Frames per second used for timestamps.
    #[arg(long, default_value_t = 1.0)]
    frame_rate: f64,
    /// Output edge-stream path.
    #[arg(long, default_value = "edges.txt")]
    out: PathBuf,
}

#[derive(Args)]
#[allow(clippy::struct_excessive_bools)]
struct RunArgs {
    /// Input edge stream.
    #[arg(long, conflicts_with = "images")]
    edges: Option<PathBuf>,
    /// Input directory of PGM frames (detected on the fly).
    #[arg(long)]
    images: Option<PathBuf>,
    /// Ego log matching the input frames.
    #[arg(long)]
    ego: PathBuf,
    /// TOML config file; its keys override command-line flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: ConfigArgs,
    /// Output metrics CSV.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Output trust-event log (JSON lines).
    #[arg(long)]
    events: Option<PathBuf>,
    /// Write the final filter state to this file.
    #[arg(long)]
    dump_state: Option<PathBuf>,
    /// Start from a previously dumped state.
    #[arg(long)]
    load_state: Option<PathBuf>,
    /// Render per-frame overlays (PPM) into this directory.
    #[arg(long)]
    render_dir: Option<PathBuf>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

/// Every filter tunable; unset flags fall back to the defaults.
#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    trust_standard: Option<f64>,
    #[arg(long)]
    trust_critical: Option<f64>,
    #[arg(long)]
    trust_maximum: Option<f64>,
    #[arg(long)]
    error_span: Option<f64>,
    #[arg(long)]
    boundary_layer_init: Option<f64>,
    #[arg(long)]
    boundary_size_init: Option<f64>,
    #[arg(long)]
    fast_threshold: Option<u8>,
    #[arg(long)]
    fast_nms: Option<bool>,
    #[arg(long)]
    consistency_angle: Option<f64>,
    #[arg(long)]
    consistency_speed: Option<f64>,
    #[arg(long)]
    chain_max_deviation: Option<f64>,
    #[arg(long)]
    group_angle_window: Option<f64>,
    #[arg(long)]
    group_speed_ratio: Option<f64>,
    #[arg(long)]
    match_angle_window: Option<f64>,
    #[arg(long)]
    match_speed_ratio: Option<f64>,
    #[arg(long)]
    rebel_angle_window: Option<f64>,
    #[arg(long)]
    rebel_speed_slack: Option<f64>,
    #[arg(long)]
    rebel_match_angle: Option<f64>,
    #[arg(long)]
    rebel_match_speed: Option<f64>,
    #[arg(long)]
    involvement_pct: Option<f64>,
    #[arg(long)]
    psi_lifetime: Option<u64>,
    #[arg(long)]
    pixels_per_unit: Option<f64>,
    #[arg(long)]
    frame_width: Option<u32>,
    #[arg(long)]
    frame_height: Option<u32>,
}

impl ConfigArgs {
    fn apply(&self, config: &mut RunConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { config.$field = v; })*
            };
        }
        set!(
            trust_standard,
            trust_critical,
            trust_maximum,
            error_span,
            boundary_layer_init,
            boundary_size_init,
            fast_threshold,
            fast_nms,
            consistency_angle,
            consistency_speed,
            chain_max_deviation,
            group_angle_window,
            group_speed_ratio,
            match_angle_window,
            match_speed_ratio,
            rebel_angle_window,
            rebel_speed_slack,
            rebel_match_angle,
            rebel_match_speed,
            involvement_pct,
            psi_lifetime,
            pixels_per_unit,
            frame_width,
            frame_height
        );
    }
}

#[derive(Args)]
struct MetricsArgs {
    /// Metrics CSV produced by `run`.
    #[arg(long)]
    input: PathBuf,
    /// Baseline frame range "a..b" (inclusive) for the reduction figure.
    #[arg(long, default_value = "1..5")]
    baseline: String,
    /// Comparison frame range "a..b" (inclusive).
    #[arg(long, default_value = "10..30")]
    window: String,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(args) => simulate(&args),
        Command::Detect(args) => detect(&args),
        Command::Run(args) => run(&args),
        Command::Metrics(args) => metrics(&args),
    }
}

fn parse_object(spec: &str) -> Result<WorldPoint> {
    let parts: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("object spec {spec:?}"))?;
    if parts.len() != 6 {
        bail!("object spec {spec:?}: expected 6 comma-separated numbers");
    }
    Ok(WorldPoint::moving(
        [parts[0], parts[1], parts[2]],
        [parts[3], parts[4], parts[5]],
    ))
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let layout = match args.layout.as_str() {
        "scattered" => WorldLayout::Scattered {
            depth_min: args.depth_min,
            depth_max: args.depth_max,
            image_fill: args.image_fill,
        },
        "clustered" => WorldLayout::Clustered {
            clusters: args.clusters,
            depth_min: args.depth_min,
            depth_max: args.depth_max,
            annulus_min_px: args.annulus_min,
            annulus_max_px: args.annulus_max,
            spread_px: args.spread,
        },
        other => bail!("unknown layout {other:?} (expected scattered or clustered)"),
    };
    let config = SimConfig {
        landmark_count: args.landmarks,
        focal_length: args.focal,
        ego_speed: args.ego_speed,
        frame_rate: args.frame_rate,
        pixel_noise_sigma: args.pixel_noise,
        rotational_error_sigma: args.rotational_noise,
        seed: args.seed,
        frame_count: args.frames,
        frame_width: args.frame_width,
        frame_height: args.frame_height,
        layout,
    };
    let objects: Vec<WorldPoint> = args
        .objects
        .iter()
        .map(|s| parse_object(s))
        .collect::<Result<_>>()?;
    let output = generate_sequence(&config, &objects);

    let stream: Vec<EdgeStreamFrame> = output
        .frames
        .iter()
        .map(|f| EdgeStreamFrame {
            frame_id: f.frame_id,
            timestamp: f.timestamp,
            points: f.edges.iter().map(|e| e.edge.location).collect(),
        })
        .collect();
    write_edge_stream(&args.edges, &stream)?;
    let ego: Vec<EgoRecord> = output
        .frames
        .iter()
        .map(|f| EgoRecord {
            frame_id: f.frame_id,
            speed: f.ego.speed,
            distance: f.ego.distance_traveled,
        })
        .collect();
    write_ego_log(&args.ego, &ego)?;

    if let Some(dir) = &args.render_dir {
        std::fs::create_dir_all(dir)?;
        let frame = config_frame(&config);
        for (f, s) in output.frames.iter().zip(&stream) {
            let image = render_points(&frame, &s.points);
            write_pgm(&dir.join(format!("frame_{:04}.pgm", f.frame_id)), &image)?;
        }
    }
    if let Some(path) = &args.truth {
        std::fs::write(path, serde_json::to_string_pretty(&output)?)?;
    }
    println!(
        "simulated {} frames, {} landmarks, {} objects",
        output.frames.len(),
        output.landmarks.len(),
        output.objects.len()
    );
    Ok(())
}

fn config_frame(config: &SimConfig) -> lc_core::geometry::FrameGeometry {
    lc_core::geometry::FrameGeometry::new(config.frame_width, config.frame_height)
}

fn pgm_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    if dir.is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "pgm"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .pgm files under {}", dir.display());
    }
    Ok(paths)
}

fn detect_frames(
    images: &Path,
    threshold: u8,
    nms: bool,
    frame_rate: f64,
) -> Result<Vec<EdgeStreamFrame>> {
    let mut frames = Vec::new();
    for (i, path) in pgm_paths(images)?.iter().enumerate() {
        let image = read_pgm(path)?;
        let corners = detect_fast9(&image, threshold, nms)?;
        frames.push(EdgeStreamFrame {
            frame_id: i as u64 + 1,
            timestamp: i as f64 / frame_rate,
            points: corners
                .iter()
                .map(|c| PixelPoint::new(f64::from(c.x), f64::from(c.y)))
                .collect(),
        });
    }
    Ok(frames)
}

fn detect(args: &DetectArgs) -> Result<()> {
    let frames = detect_frames(&args.images, args.threshold, !args.no_nms, args.frame_rate)?;
    let total: usize = frames.iter().map(|f| f.points.len()).sum();
    write_edge_stream(&args.out, &frames)?;
    println!("detected {} corners over {} frames", total, frames.len());
    Ok(())
}

/// Builds the effective config: defaults, then flags, then the TOML
/// file (file keys win).
fn effective_config(args: &RunArgs) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    args.overrides.apply(&mut config);
    if let Some(path) = &args.config {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let file_keys: toml::Table = text
            .parse()
            .with_context(|| format!("parsing {}", path.display()))?;
        let mut merged = toml::Table::try_from(config)?;
        for (key, value) in file_keys {
            merged.insert(key, value);
        }
        config = merged.try_into()?;
    }
    Ok(config)
}

fn run(args: &RunArgs) -> Result<()> {
    let config = effective_config(args)?;
    if args.print_config {
        print!("{}", toml::to_string(&config)?);
        return Ok(());
    }

    let stream = match (&args.edges, &args.images) {
        (Some(edges), None) => read_edge_stream(edges)?,
        (None, Some(images)) => {
            detect_frames(images, config.fast_threshold, config.fast_nms, 1.0)?
        }
        (None, None) => bail!("one of --edges or --images is required"),
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };
    let ego_log = read_ego_log(&args.ego)?;
    if stream.len() != ego_log.len() {
        return Err(lc_core::Error::FrameCountMismatch {
            edges: stream.len(),
            ego: ego_log.len(),
        }
        .into());
    }
    for (frame, record) in stream.iter().zip(&ego_log) {
        if frame.frame_id != record.frame_id {
            bail!(
                "frame id mismatch: edge stream {} vs ego log {}",
                frame.frame_id,
                record.frame_id
            );
        }
    }

    let mut pipeline = match &args.load_state {
        Some(path) => Pipeline::resume(config, read_state(path)?),
        None => Pipeline::new(config),
    };
    if let Some(dir) = &args.render_dir {
        std::fs::create_dir_all(dir)?;
    }
    let frame_geom = config.frame_geometry();
    let mut metrics_rows: Vec<FrameMetrics> = Vec::with_capacity(stream.len());
    let mut events = Vec::new();
    for (i, frame) in stream.iter().enumerate() {
        let interval = frame_interval(&stream, i);
        let ego = EgoState {
            speed: ego_log[i].speed,
            distance_traveled: ego_log[i].distance,
            frame_interval: interval,
        };
        let edge_points: Vec<EdgePoint> = frame
            .points
            .iter()
            .map(|&location| EdgePoint {
                location,
                frame_id: frame.frame_id,
                timestamp: frame.timestamp,
            })
            .collect();
        let rendered_cull = args.render_dir.as_ref().map(|_| {
            cull_edges(&edge_points, &pipeline.state.regions, frame.frame_id)
        });
        let report = pipeline.step(frame.frame_id, &edge_points, &ego)?;
        if let (Some(dir), Some((kept, culled))) = (&args.render_dir, rendered_cull) {
            let kept: Vec<PixelPoint> = kept.iter().map(|e| e.location).collect();
            let culled: Vec<PixelPoint> = culled.iter().map(|e| e.location).collect();
            let overlay = render_overlay(&frame_geom, &kept, &culled, &pipeline.state);
            write_ppm(
                &dir.join(format!("frame_{:04}.ppm", frame.frame_id)),
                &overlay,
            )?;
        }
        metrics_rows.push(report.metrics);
        events.extend(report.events);
    }

    match &args.metrics {
        Some(path) => write_metrics(path, &metrics_rows)?,
        None => print!("{}", metrics_to_csv(&metrics_rows)),
    }
    if let Some(path) = &args.events {
        write_event_log(path, &events)?;
    }
    if let Some(path) = &args.dump_state {
        write_state(path, &pipeline.state)?;
    }
    Ok(())
}

/// Interval preceding frame `i`, from the stream timestamps; the first
/// frame borrows the next gap, defaulting to 1 s for single frames.
fn frame_interval(stream: &[EdgeStreamFrame], i: usize) -> f64 {
    if i > 0 {
        stream[i].timestamp - stream[i - 1].timestamp
    } else if stream.len() > 1 {
        stream[1].timestamp - stream[0].timestamp
    } else {
        1.0
    }
}

fn parse_range(text: &str) -> Result<(u64, u64)> {
    let (a, b) = text
        .split_once("..")
        .with_context(|| format!("range {text:?}: expected a..b"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn metrics(args: &MetricsArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.input)?;
    let mut lines = text.lines();
    let header = lines.next().context("empty metrics file")?;
    let mut rows: Vec<Vec<u64>> = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        rows.push(
            line.split(',')
                .map(|f| f.trim().parse::<u64>())
                .collect::<std::result::Result<_, _>>()
                .with_context(|| format!("row {line:?}"))?,
        );
    }
    println!("{} frames ({})", rows.len(), header);
    if rows.is_empty() {
        return Ok(());
    }
    let processed = |range: (u64, u64)| -> f64 {
        let picked: Vec<&Vec<u64>> = rows
            .iter()
            .filter(|r| r[0] >= range.0 && r[0] <= range.1)
            .collect();
        if picked.is_empty() {
            return 0.0;
        }
        picked.iter().map(|r| (r[1] - r[2]) as f64).sum::<f64>() / picked.len() as f64
    };
    let baseline = processed(parse_range(&args.baseline)?);
    let window = processed(parse_range(&args.window)?);
    let last = rows.last().unwrap();
    println!("mean processed edges, frames {}: {baseline:.2}", args.baseline);
    println!("mean processed edges, frames {}: {window:.2}", args.window);
    if baseline > 0.0 {
        println!(
            "reduction: {:.1}%",
            100.0 * (1.0 - window / baseline)
        );
    }
    println!(
        "final population: {} normal edges, {} rebel edges, {} circles, dimensionality {}",
        last[3],
        last[4],
        last[5] + last[6],
        last[8]
    );
    Ok(())
}
