//! Chirp parameters and the MIMO/TDMA array layout.
//!
//! Positions are integers in units of half a wavelength, so every virtual
//! element lands on the dense uniform grid used by angle processing.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Propagation speed used throughout the signal model, m/s.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// FMCW chirp and sampling parameters.
///
/// Slow time is TDMA: chirp `c` is sent by the transmitter in schedule slot
/// `c % n_tx`, and `chirp_duration` is both the chirp repetition interval
/// and the delay between consecutive transmitters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformConfig {
    /// Hz.
    pub start_frequency: f64,
    /// Hz/s.
    pub chirp_slope: f64,
    /// s.
    pub chirp_duration: f64,
    pub n_adc_samples: usize,
    /// Total chirps in one frame, all transmitters included.
    pub n_chirps: usize,
    /// Complex (I/Q) samples per second.
    pub sampling_frequency: f64,
    pub n_tx: usize,
    pub n_rx: usize,
}

impl Default for WaveformConfig {
    fn default() -> Self {
        Self::imaging_radar()
    }
}

impl WaveformConfig {
    /// The 76 GHz cascade configuration: 35 MHz/us slope, 28 us chirps,
    /// 256 samples at 12 Msps, 128 chirps, 12 TX and 16 RX.
    pub fn imaging_radar() -> Self {
        Self {
            start_frequency: 76.0e9,
            chirp_slope: 35.0e12,
            chirp_duration: 28.0e-6,
            n_adc_samples: 256,
            n_chirps: 128,
            sampling_frequency: 12.0e6,
            n_tx: 12,
            n_rx: 16,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("start_frequency", self.start_frequency),
            ("chirp_slope", self.chirp_slope),
            ("chirp_duration", self.chirp_duration),
            ("sampling_frequency", self.sampling_frequency),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Waveform(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        let counts = [
            ("n_adc_samples", self.n_adc_samples),
            ("n_chirps", self.n_chirps),
            ("n_tx", self.n_tx),
            ("n_rx", self.n_rx),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(Error::Waveform(format!("{name} must be at least 1")));
            }
        }
        if self.sampling_window() > self.chirp_duration {
            return Err(Error::Waveform(format!(
                "sampling window {:.3e} s exceeds the chirp duration {:.3e} s",
                self.sampling_window(),
                self.chirp_duration
            )));
        }
        if self.n_chirps < self.n_tx {
            return Err(Error::Waveform(format!(
                "{} chirps cannot cover {} transmitters",
                self.n_chirps, self.n_tx
            )));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.start_frequency
    }

    /// Instantaneous frequency at the middle of the sampling window. A
    /// moving target's slow-time phase advances at the rate set by this
    /// frequency rather than the start frequency, because the range FFT
    /// integrates the whole sampled sweep.
    pub fn center_frequency(&self) -> f64 {
        self.start_frequency
            + self.chirp_slope * (self.n_adc_samples as f64 - 1.0) / (2.0 * self.sampling_frequency)
    }

    /// Wavelength used to convert Doppler frequency to radial velocity.
    pub fn doppler_wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.center_frequency()
    }

    /// Duration of the sampled part of each chirp.
    pub fn sampling_window(&self) -> f64 {
        self.n_adc_samples as f64 / self.sampling_frequency
    }

    pub fn effective_bandwidth(&self) -> f64 {
        self.chirp_slope * self.sampling_window()
    }

    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.effective_bandwidth())
    }

    /// Repetition interval of one transmitter under TDMA.
    pub fn pri(&self) -> f64 {
        self.n_tx as f64 * self.chirp_duration
    }

    /// Complete slow-time sequences available per transmitter.
    pub fn chirps_per_tx(&self) -> usize {
        self.n_chirps / self.n_tx
    }

    pub fn beat_frequency(&self, range: f64) -> f64 {
        2.0 * self.chirp_slope * range / SPEED_OF_LIGHT
    }

    pub fn doppler_frequency(&self, radial_velocity: f64) -> f64 {
        2.0 * radial_velocity * self.start_frequency / SPEED_OF_LIGHT
    }

    /// Metres per range bin for a range FFT of `fft_size` points.
    pub fn range_per_bin(&self, fft_size: usize) -> f64 {
        SPEED_OF_LIGHT * self.sampling_frequency / (2.0 * self.chirp_slope * fft_size as f64)
    }

    /// Unambiguous velocity `c / (4 f_c T)` for a repetition interval `T`.
    pub fn max_velocity(&self, repetition: f64) -> f64 {
        SPEED_OF_LIGHT / (4.0 * self.start_frequency * repetition)
    }

    /// Unambiguous velocity of one transmitter's slow-time sequence.
    pub fn max_velocity_tdma(&self) -> f64 {
        self.max_velocity(self.pri())
    }

    /// Unambiguous velocity once the TDMA ambiguity is resolved.
    pub fn max_velocity_extended(&self) -> f64 {
        self.max_velocity(self.chirp_duration)
    }

    /// Migration phase accumulated between consecutive transmit slots by a
    /// target moving at `radial_velocity`: `4 pi v dt / lambda`.
    pub fn migration_phase(&self, radial_velocity: f64) -> f64 {
        4.0 * std::f64::consts::PI * radial_velocity * self.chirp_duration / self.wavelength()
    }
}

/// One transmitter/receiver combination of the MIMO array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VirtualElement {
    /// Schedule slot of the transmitter (transmit order within a loop).
    pub slot: usize,
    pub tx: usize,
    pub rx: usize,
    /// Horizontal position, half wavelengths.
    pub x: i32,
    /// Vertical position, half wavelengths.
    pub z: i32,
}

/// Physical antenna layout plus the TDMA transmit order.
///
/// The virtual channel index used by every cube is `slot * n_rx + rx`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    /// `(x, z)` per transmitter, half wavelengths.
    pub tx_positions: Vec<(i32, i32)>,
    /// `(x, z)` per receiver, half wavelengths.
    pub rx_positions: Vec<(i32, i32)>,
    /// Transmitter index for each slot of one TDMA loop.
    pub tx_schedule: Vec<usize>,
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self::cascade()
    }
}

impl ArrayGeometry {
    /// Four-chip cascade layout: 12 TX and 16 RX whose virtual array has 86
    /// contiguous horizontal positions and vertical offsets {0, 1, 4, 6}.
    pub fn cascade() -> Self {
        let tx_positions = vec![
            (11, 6),
            (10, 4),
            (9, 1),
            (32, 0),
            (28, 0),
            (24, 0),
            (20, 0),
            (16, 0),
            (12, 0),
            (8, 0),
            (4, 0),
            (0, 0),
        ];
        let rx_positions = [11, 12, 13, 14, 50, 51, 52, 53, 46, 47, 48, 49, 0, 1, 2, 3]
            .iter()
            .map(|&x| (x, 0))
            .collect();
        Self {
            tx_schedule: (0..tx_positions.len()).collect(),
            tx_positions,
            rx_positions,
        }
    }

    /// Uniform linear array: `n_tx` transmitters spaced `n_rx` apart and
    /// `n_rx` contiguous receivers, all at `z = 0`. Transmitter `i` is at
    /// `i * (n_rx - 1)` so neighbouring transmitters share one position.
    pub fn uniform_linear(n_tx: usize, n_rx: usize) -> Self {
        let step = n_rx.saturating_sub(1).max(1) as i32;
        Self {
            tx_positions: (0..n_tx as i32).map(|i| (i * step, 0)).collect(),
            rx_positions: (0..n_rx as i32).map(|i| (i, 0)).collect(),
            tx_schedule: (0..n_tx).collect(),
        }
    }

    pub fn n_tx(&self) -> usize {
        self.tx_positions.len()
    }

    pub fn n_rx(&self) -> usize {
        self.rx_positions.len()
    }

    pub fn n_virtual(&self) -> usize {
        self.tx_schedule.len() * self.n_rx()
    }

    pub fn validate(&self) -> Result<()> {
        if self.tx_positions.is_empty() {
            return Err(Error::Geometry("no transmitters".into()));
        }
        if self.rx_positions.is_empty() {
            return Err(Error::Geometry("no receivers".into()));
        }
        if self.tx_schedule.len() != self.n_tx() {
            return Err(Error::Geometry(format!(
                "schedule has {} slots for {} transmitters",
                self.tx_schedule.len(),
                self.n_tx()
            )));
        }
        let mut seen = vec![false; self.n_tx()];
        for &tx in &self.tx_schedule {
            if tx >= self.n_tx() || std::mem::replace(&mut seen[tx], true) {
                return Err(Error::Geometry(format!(
                    "schedule {:?} is not a permutation of the transmitters",
                    self.tx_schedule
                )));
            }
        }
        Ok(())
    }

    /// Checks the geometry against a waveform's transmitter/receiver counts.
    pub fn validate_for(&self, config: &WaveformConfig) -> Result<()> {
        self.validate()?;
        if self.n_tx() != config.n_tx || self.n_rx() != config.n_rx {
            return Err(Error::Geometry(format!(
                "geometry has {} TX / {} RX but the waveform expects {} / {}",
                self.n_tx(),
                self.n_rx(),
                config.n_tx,
                config.n_rx
            )));
        }
        Ok(())
    }

    /// All virtual elements in channel order.
    pub fn virtual_elements(&self) -> Vec<VirtualElement> {
        let mut out = Vec::with_capacity(self.n_virtual());
        for (slot, &tx) in self.tx_schedule.iter().enumerate() {
            let (tx_x, tx_z) = self.tx_positions[tx];
            for (rx, &(rx_x, rx_z)) in self.rx_positions.iter().enumerate() {
                out.push(VirtualElement {
                    slot,
                    tx,
                    rx,
                    x: tx_x + rx_x,
                    z: tx_z + rx_z,
                });
            }
        }
        out
    }

    pub fn unique_x(&self) -> Vec<i32> {
        let mut xs: Vec<i32> = self.virtual_elements().iter().map(|v| v.x).collect();
        xs.sort_unstable();
        xs.dedup();
        xs
    }

    pub fn unique_z(&self) -> Vec<i32> {
        let mut zs: Vec<i32> = self.virtual_elements().iter().map(|v| v.z).collect();
        zs.sort_unstable();
        zs.dedup();
        zs
    }

    /// Channels grouped by virtual position, ordered by `(z, x)`.
    pub fn positions(&self) -> BTreeMap<(i32, i32), Vec<usize>> {
        let mut map: BTreeMap<(i32, i32), Vec<usize>> = BTreeMap::new();
        for (channel, v) in self.virtual_elements().iter().enumerate() {
            map.entry((v.z, v.x)).or_default().push(channel);
        }
        map
    }

    /// Pairs of channels sharing a virtual position but fed by different
    /// transmit slots, as `(earlier slot channel, later slot channel)`.
    pub fn overlapped_pairs(&self) -> Vec<(usize, usize)> {
        let elements = self.virtual_elements();
        let mut pairs = Vec::new();
        for channels in self.positions().values() {
            for (i, &a) in channels.iter().enumerate() {
                for &b in &channels[i + 1..] {
                    let (sa, sb) = (elements[a].slot, elements[b].slot);
                    if sa < sb {
                        pairs.push((a, b));
                    } else if sb < sa {
                        pairs.push((b, a));
                    }
                }
            }
        }
        pairs
    }
}
