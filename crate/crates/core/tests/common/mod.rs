#![allow(dead_code)]

use std::f64::consts::PI;

use num_complex::Complex64;
use rdb_core::prelude::*;

/// Point target at `range`, azimuth and elevation in degrees, moving
/// radially at `v` m/s (positive receding).
pub fn target(range: f64, az_deg: f64, el_deg: f64, v: f64, rcs: f64) -> Scatterer {
    let (az, el) = (az_deg.to_radians(), el_deg.to_radians());
    let dir = [el.cos() * az.sin(), el.cos() * az.cos(), el.sin()];
    Scatterer::point(dir.map(|c| range * c), rcs).with_velocity(dir.map(|c| v * c))
}

/// Default waveform with fewer fast-time samples, for tests that need many
/// frames. TDMA and the slow-time layout are unchanged.
pub fn short_config(n_samples: usize) -> WaveformConfig {
    WaveformConfig {
        n_adc_samples: n_samples,
        ..WaveformConfig::imaging_radar()
    }
}

pub fn hamming(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Direct DFT `X[k] = sum x[n] exp(-2 pi j k n / m)` of a zero-padded input.
pub fn dft(x: &[Complex64], m: usize) -> Vec<Complex64> {
    (0..m)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(n, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (k * n) as f64 / m as f64))
                .sum()
        })
        .collect()
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Signed distance between two bins of a circular axis of length `n`.
pub fn circular_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b) % n;
    d.min(n - d)
}
