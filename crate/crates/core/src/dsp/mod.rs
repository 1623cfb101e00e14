//! Radar processing chain: range/Doppler FFTs, TDMA compensation and the
//! azimuth/elevation FFTs that collapse a frame into a [`RadarCube`].

mod angle;
mod range_doppler;
mod tdma;

pub use angle::{angle_axis, angle_process, AngleAxis};
pub use range_doppler::range_doppler_fft;
pub use tdma::{decide, tdma_compensate, BinDecision, TdmaParams};

use num_complex::Complex32;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::sim::AdcFrame;
use crate::waveform::{ArrayGeometry, WaveformConfig};

/// Added to magnitudes before taking dB so empty cells stay finite.
pub const POWER_FLOOR: f64 = 1e-12;

/// Symmetric Hamming window of length `n`.
pub fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let m = (n - 1) as f64;
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / m).cos())
        .collect()
}

/// Range-Doppler-channel cube, indexed `[range][doppler][virtual channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RdcCube {
    pub values: Vec<Complex32>,
    pub n_range: usize,
    pub n_doppler: usize,
    pub n_virtual: usize,
    /// Metres per range bin.
    pub range_per_bin: f64,
    /// Radial velocity of each Doppler bin, m/s.
    pub velocity: Vec<f64>,
    /// Doppler frequency of each Doppler bin, Hz.
    pub doppler_frequency: Vec<f64>,
    /// Whether the Doppler axis has been extended by [`tdma_compensate`].
    pub extended: bool,
    pub config: WaveformConfig,
    pub geometry: ArrayGeometry,
}

impl RdcCube {
    pub fn index(&self, r: usize, d: usize, v: usize) -> usize {
        (r * self.n_doppler + d) * self.n_virtual + v
    }

    pub fn channels(&self, r: usize, d: usize) -> &[Complex32] {
        let start = self.index(r, d, 0);
        &self.values[start..start + self.n_virtual]
    }

    /// Total linear power over all cells.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|c| c.norm_sqr() as f64).sum()
    }
}

/// Two co-registered range-azimuth-Doppler volumes: peak power over the
/// elevation RoI in dB and the elevation bin of that peak. Both are indexed
/// `[range][azimuth][doppler]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarCube {
    pub power_db: Vec<f32>,
    pub elevation: Vec<u16>,
    pub n_range: usize,
    pub n_azimuth: usize,
    pub n_doppler: usize,
    /// Range bin edges, m (`n_range + 1` values).
    pub range_edges: Vec<f64>,
    /// Sine-of-azimuth bin edges (`n_azimuth + 1` values).
    pub sin_az_edges: Vec<f64>,
    /// Sine-of-elevation bin edges (`n_elevation + 1` values).
    pub sin_el_edges: Vec<f64>,
    /// Radial velocity of each Doppler bin, m/s.
    pub velocity: Vec<f64>,
}

impl RadarCube {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_range, self.n_azimuth, self.n_doppler)
    }

    pub fn n_elevation(&self) -> usize {
        self.sin_el_edges.len() - 1
    }

    pub fn index(&self, r: usize, a: usize, d: usize) -> usize {
        (r * self.n_azimuth + a) * self.n_doppler + d
    }

    pub fn power(&self, r: usize, a: usize, d: usize) -> f32 {
        self.power_db[self.index(r, a, d)]
    }

    pub fn elevation_at(&self, r: usize, a: usize, d: usize) -> u16 {
        self.elevation[self.index(r, a, d)]
    }

    /// Range, sin-azimuth and sin-elevation grid matching this cube.
    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(
            self.range_edges.clone(),
            self.sin_az_edges.clone(),
            self.sin_el_edges.clone(),
        )
    }

    /// Linear power (`|x|^2`) of a cell.
    pub fn linear(&self, r: usize, a: usize, d: usize) -> f64 {
        10f64.powf(self.power(r, a, d) as f64 / 10.0)
    }

    /// `(r, a, d)` of the strongest cell; ties go to the lowest index.
    pub fn argmax(&self) -> (usize, usize, usize) {
        let mut best = 0;
        for (i, &p) in self.power_db.iter().enumerate() {
            if p > self.power_db[best] {
                best = i;
            }
        }
        let d = best % self.n_doppler;
        let a = (best / self.n_doppler) % self.n_azimuth;
        (best / (self.n_doppler * self.n_azimuth), a, d)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_range * self.n_azimuth * self.n_doppler;
        let checks = [
            (self.power_db.len(), n, "power"),
            (self.elevation.len(), n, "elevation"),
            (self.range_edges.len(), self.n_range + 1, "range edges"),
            (self.sin_az_edges.len(), self.n_azimuth + 1, "azimuth edges"),
            (self.velocity.len(), self.n_doppler, "velocity axis"),
        ];
        for (got, want, what) in checks {
            if got != want {
                return Err(Error::Shape(format!(
                    "{what}: {got} values, expected {want}"
                )));
            }
        }
        if self.sin_el_edges.len() < 2 {
            return Err(Error::Shape(
                "elevation axis needs at least two edges".into(),
            ));
        }
        let ne = self.n_elevation();
        if let Some(e) = self.elevation.iter().find(|&&e| e as usize >= ne) {
            return Err(Error::Shape(format!("elevation index {e} outside 0..{ne}")));
        }
        if self.power_db.iter().any(|p| !p.is_finite()) {
            return Err(Error::Shape("power channel holds non-finite values".into()));
        }
        Ok(())
    }
}

/// FFT sizes and crops of the processing chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub range_fft: usize,
    pub doppler_fft: usize,
    pub azimuth_fft: usize,
    pub elevation_fft: usize,
    /// Azimuth half-angle kept in the cube, degrees.
    pub azimuth_fov_deg: f64,
    /// Elevation half-angle kept before the peak search, degrees.
    pub elevation_roi_deg: f64,
    /// Run Doppler extension and migration compensation.
    pub tdma: bool,
    pub tdma_params: TdmaParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            range_fft: 500,
            doppler_fft: 128,
            azimuth_fft: 256,
            elevation_fft: 128,
            azimuth_fov_deg: 70.0,
            elevation_roi_deg: 20.0,
            tdma: true,
            tdma_params: TdmaParams::default(),
        }
    }
}

impl PipelineConfig {
    /// The occupancy grid a cube from this pipeline lives on, without
    /// processing a frame: range edges halfway between bin centres and the
    /// cropped sine-space angle axes.
    pub fn grid_spec(&self, config: &WaveformConfig) -> Result<GridSpec> {
        let az = angle_axis(self.azimuth_fft, self.azimuth_fov_deg)?;
        let el = angle_axis(self.elevation_fft, self.elevation_roi_deg)?;
        GridSpec::new(
            range_edges(self.range_fft, config.range_per_bin(self.range_fft)),
            az.edges,
            el.edges,
        )
    }
}

/// Edges of `n` range bins centred on multiples of `dr`; the first bin
/// starts at 0.
pub(crate) fn range_edges(n: usize, dr: f64) -> Vec<f64> {
    (0..=n).map(|i| ((i as f64 - 0.5) * dr).max(0.0)).collect()
}

/// Full chain from ADC samples to the two-channel radar cube.
pub fn process_frame(frame: &AdcFrame, pipeline: &PipelineConfig) -> Result<RadarCube> {
    let mut rdc = range_doppler_fft(frame, pipeline.range_fft, pipeline.doppler_fft)?;
    if pipeline.tdma {
        rdc = tdma_compensate(&rdc, &pipeline.tdma_params)?;
    }
    angle_process(&rdc, pipeline)
}
