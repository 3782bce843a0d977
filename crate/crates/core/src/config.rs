//! Run configuration: every tunable of the filter with its default
//! value, loadable from a TOML file where any subset of fields may be
//! overridden.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::circle_tracker::CircleStageParams;
use crate::edge_tracker::EdgeStageParams;
use crate::geometry::{ErrorModel, FrameGeometry, TrustThresholds};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Trust assigned on refresh.
    pub trust_standard: f64,
    /// Entities below this trust are deleted at frame end.
    pub trust_critical: f64,
    /// Trust ceiling; also the emission level for ignore regions.
    pub trust_maximum: f64,
    /// Rotational error span, pixels.
    pub error_span: f64,
    /// Initial boundary layer of a fresh edge track, pixels.
    pub boundary_layer_init: f64,
    /// Default collector size and circle radius floor, pixels.
    pub boundary_size_init: f64,
    /// Corner detector intensity threshold.
    pub fast_threshold: u8,
    /// Whether the detector suppresses non-maximal corners.
    pub fast_nms: bool,
    /// Track-consistency bearing window, degrees.
    pub consistency_angle: f64,
    /// Track-consistency speed bound, multiples of vehicle speed.
    pub consistency_speed: f64,
    /// Largest direction change a growing chain accepts, degrees.
    pub chain_max_deviation: f64,
    /// Edge-grouping bearing window, degrees.
    pub group_angle_window: f64,
    /// Edge-grouping speed bound, multiples of vehicle speed.
    pub group_speed_ratio: f64,
    /// Circle-matching bearing window, degrees.
    pub match_angle_window: f64,
    /// Circle-matching speed bound, multiples of circle speed.
    pub match_speed_ratio: f64,
    /// Rebel-grouping bearing window, degrees.
    pub rebel_angle_window: f64,
    /// Rebel-grouping speed slack, multiples of vehicle speed.
    pub rebel_speed_slack: f64,
    /// Rebel circle-matching bearing window, degrees.
    pub rebel_match_angle: f64,
    /// Rebel circle-matching speed slack, multiples of vehicle speed.
    pub rebel_match_speed: f64,
    /// Minimum percentage of a group inside a circle to update it.
    pub involvement_pct: f64,
    /// Frames an emitted ignore region stays active.
    pub psi_lifetime: u64,
    /// Converts ego-log speeds and distances to pixels.
    pub pixels_per_unit: f64,
    pub frame_width: u32,
    pub frame_height: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            trust_standard: 3.0,
            trust_critical: 2.0,
            trust_maximum: 5.0,
            error_span: 4.0,
            boundary_layer_init: 25.0,
            boundary_size_init: 25.0,
            fast_threshold: 25,
            fast_nms: true,
            consistency_angle: 20.0,
            consistency_speed: 10.0,
            chain_max_deviation: 50.0,
            group_angle_window: 20.0,
            group_speed_ratio: 10.0,
            match_angle_window: 4.0,
            match_speed_ratio: 100.0,
            rebel_angle_window: 50.0,
            rebel_speed_slack: 40.0,
            rebel_match_angle: 10.0,
            rebel_match_speed: 1000.0,
            involvement_pct: 50.0,
            psi_lifetime: 3,
            pixels_per_unit: 1.0,
            frame_width: 640,
            frame_height: 480,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn thresholds(&self) -> TrustThresholds {
        TrustThresholds {
            standard: self.trust_standard,
            critical: self.trust_critical,
            maximum: self.trust_maximum,
        }
    }

    pub fn error_model(&self) -> ErrorModel {
        ErrorModel::uniform(self.error_span)
    }

    pub fn frame_geometry(&self) -> FrameGeometry {
        FrameGeometry::new(self.frame_width, self.frame_height)
    }

    pub fn edge_stage_params(&self) -> EdgeStageParams {
        EdgeStageParams {
            thresholds: self.thresholds(),
            span: self.error_span,
            boundary_layer_init: self.boundary_layer_init,
            consistency_angle: self.consistency_angle,
            consistency_speed: self.consistency_speed,
            chain_max_deviation: self.chain_max_deviation,
        }
    }

    pub fn circle_stage_params(&self) -> CircleStageParams {
        CircleStageParams {
            thresholds: self.thresholds(),
            boundary_size_init: self.boundary_size_init,
            group_angle_window: self.group_angle_window,
            group_speed_ratio: self.group_speed_ratio,
            match_angle_window: self.match_angle_window,
            match_speed_ratio: self.match_speed_ratio,
            rebel_angle_window: self.rebel_angle_window,
            rebel_speed_slack: self.rebel_speed_slack,
            rebel_match_angle: self.rebel_match_angle,
            rebel_match_speed: self.rebel_match_speed,
            involvement_pct: self.involvement_pct,
            region_lifetime: self.psi_lifetime,
        }
    }
}
