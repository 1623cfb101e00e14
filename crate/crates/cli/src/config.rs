//! Run configuration shared by all subcommands.

use std::path::Path;

use anyhow::{Context, Result};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rdb_core::grid::GroundParams;
use rdb_core::prelude::*;
use rdb_core::scene::StreetParams;
use serde::{Deserialize, Serialize};

/// Every section is optional; missing sections take the defaults below.
///
/// ```toml
/// lidar_density = 100.0
///
/// [waveform]        # all fields, see WaveformConfig
/// [geometry]        # tx_positions, rx_positions, tx_schedule
/// [pipeline]        # range_fft = 500, doppler_fft = 128, ...
/// [street]          # min_objects, max_objects, ground_density, ...
/// [ground_removal]  # iterations, inlier_threshold, max_tilt_deg, ...
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub waveform: WaveformConfig,
    pub geometry: ArrayGeometry,
    pub pipeline: PipelineConfig,
    /// Lidar points per square metre of visible object surface.
    pub lidar_density: f64,
    /// Seconds between frames simulated from one scene file.
    pub frame_period: f64,
    pub street: StreetParams,
    pub ground_removal: GroundParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            waveform: WaveformConfig::imaging_radar(),
            geometry: ArrayGeometry::cascade(),
            pipeline: PipelineConfig::default(),
            lidar_density: 100.0,
            frame_period: 0.1,
            street: StreetParams::default(),
            ground_removal: GroundParams::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: Self =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        config.waveform.validate()?;
        config.geometry.validate_for(&config.waveform)?;
        anyhow::ensure!(config.lidar_density > 0.0, "lidar_density must be positive");
        Ok(config)
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        Ok(self.pipeline.grid_spec(&self.waveform)?)
    }
}

/// Independent random streams per frame, so frames can run in any order.
pub struct FrameSeeds {
    pub radar: u64,
    pub lidar: u64,
    pub scene: ChaCha8Rng,
}

pub fn frame_seeds(seed: u64, frame: usize) -> FrameSeeds {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame as u64);
    let radar = rng.next_u64();
    let lidar = rng.next_u64();
    FrameSeeds {
        radar,
        lidar,
        scene: ChaCha8Rng::seed_from_u64(rng.next_u64()),
    }
}
