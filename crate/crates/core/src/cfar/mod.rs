//! CFAR detectors: cell averaging (CA), ordered statistic (OS) and the
//! separable CA-then-OS hybrid (CAOS), in one and two dimensions, plus the
//! relative-height peak detector and the 2D + 1D cascades built from them.
//!
//! All detectors take linear power. A cell is declared when it is strictly
//! greater than `scale * statistic`, where the statistic is estimated from
//! the training cells around it. Windows that run off the data shrink to
//! the cells that exist; the scale is recomputed for the shrunken window
//! when it is derived from a design false-alarm probability.

mod cascade;
mod threshold;
mod window;

pub use cascade::{
    cascade_detect, Aggregation, Cascade, DetectorConfig, Plane, Stage1, Stage2, BASELINE_CASCADES,
};
pub use threshold::{ca_factor, caos_factor, os_factor, os_rank};
pub use window::{cfar_1d, cfar_2d, peak_detect_1d};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CfarKind {
    #[serde(rename = "CA")]
    Ca,
    #[serde(rename = "OS")]
    Os,
    #[serde(rename = "CAOS")]
    Caos,
}

impl std::fmt::Display for CfarKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CfarKind::Ca => "CA",
            CfarKind::Os => "OS",
            CfarKind::Caos => "CAOS",
        })
    }
}

/// Window and threshold settings of one CFAR detector.
///
/// `training` and `guard` are cells per side along `[axis 0, axis 1]`; 1D
/// detectors use axis 0 only, so `training[1]` may be 0 there. Exactly one of `pfa_design` and
/// `threshold_scale` must be set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfarConfig {
    pub kind: CfarKind,
    pub training: [usize; 2],
    #[serde(default)]
    pub guard: [usize; 2],
    #[serde(default)]
    pub pfa_design: Option<f64>,
    #[serde(default)]
    pub threshold_scale: Option<f64>,
    #[serde(default = "default_rank")]
    pub os_rank_fraction: f64,
}

fn default_rank() -> f64 {
    0.75
}

impl CfarConfig {
    pub fn new(kind: CfarKind, training: [usize; 2], guard: [usize; 2], pfa: f64) -> Self {
        Self {
            kind,
            training,
            guard,
            pfa_design: Some(pfa),
            threshold_scale: None,
            os_rank_fraction: default_rank(),
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.pfa_design = None;
        self.threshold_scale = Some(scale);
        self
    }

    pub fn with_rank(mut self, fraction: f64) -> Self {
        self.os_rank_fraction = fraction;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.training[0] == 0 {
            return Err(Error::Config(
                "CFAR needs at least one training cell per side".into(),
            ));
        }
        if !(self.os_rank_fraction > 0.0 && self.os_rank_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "OS rank fraction {} is outside (0, 1]",
                self.os_rank_fraction
            )));
        }
        match (self.pfa_design, self.threshold_scale) {
            (Some(p), None) if p > 0.0 && p < 1.0 => Ok(()),
            (Some(p), None) => Err(Error::Config(format!("design Pfa {p} is outside (0, 1)"))),
            (None, Some(s)) if s.is_finite() && s > 0.0 => Ok(()),
            (None, Some(s)) => Err(Error::Config(format!(
                "threshold scale {s} must be positive"
            ))),
            _ => Err(Error::Config(
                "set exactly one of pfa_design and threshold_scale".into(),
            )),
        }
    }
}

/// One detected cell of a radar cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub range_bin: usize,
    pub azimuth_bin: usize,
    pub doppler_bin: usize,
    pub elevation_bin: u16,
    pub power_db: f32,
}
