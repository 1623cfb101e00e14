//! Radar detection workbench.
//!
//! Simulates an FMCW MIMO/TDMA radar and an ideal lidar looking at the same
//! synthetic scene, runs the radar processing chain down to a two-channel
//! range-azimuth-Doppler cube, detects targets with CFAR cascades, and
//! scores detections against lidar occupancy grids.
//!
//! ```
//! use rdb_core::prelude::*;
//!
//! let config = WaveformConfig::imaging_radar();
//! assert!((config.max_velocity_tdma() - 2.94).abs() < 0.01);
//! assert!((config.max_velocity_extended() - 35.25).abs() < 0.01);
//! ```

pub mod cfar;
pub mod dsp;
pub mod error;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod scene;
pub mod sim;
pub mod waveform;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::cfar::{cascade_detect, CfarConfig, CfarKind, Detection, DetectorConfig};
    pub use crate::dsp::{process_frame, PipelineConfig, RadarCube, RdcCube};
    pub use crate::error::{Error, Result};
    pub use crate::grid::{
        crop_fov, detections_to_grid, grid_to_points, remove_ground, voxelize, Fov, GridSpec,
        OccupancyGrid, PointCloud,
    };
    pub use crate::metrics::{chamfer, pd_pfa, ChamferMode, EvalReport};
    pub use crate::scene::{Point3, Scatterer, Scene};
    pub use crate::sim::{sample_lidar, simulate_adc, AdcFrame};
    pub use crate::waveform::{ArrayGeometry, WaveformConfig};
}
