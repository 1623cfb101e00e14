use num_complex::{Complex32, Complex64};
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::{hamming, RdcCube};
use crate::error::{Error, Result};
use crate::sim::AdcFrame;

/// Windowed, zero-padded range and Doppler FFTs of one frame.
///
/// Slow time is de-interleaved per transmit slot, so each virtual channel
/// holds the `n_chirps / n_tx` chirps of its own transmitter. Chirps left
/// over after the last complete TDMA loop are ignored. The Doppler axis is
/// shifted so bin `d_fft / 2` is zero velocity.
pub fn range_doppler_fft(frame: &AdcFrame, r_fft: usize, d_fft: usize) -> Result<RdcCube> {
    frame.validate()?;
    let config = &frame.config;
    let (n_tx, n_rx, n_samples) = (config.n_tx, config.n_rx, config.n_adc_samples);
    let loops = config.chirps_per_tx();
    if r_fft < n_samples {
        return Err(Error::FftTooSmall {
            axis: "range",
            size: r_fft,
            available: n_samples,
        });
    }
    if d_fft < loops {
        return Err(Error::FftTooSmall {
            axis: "doppler",
            size: d_fft,
            available: loops,
        });
    }

    let mut planner = FftPlanner::<f64>::new();
    let range_plan = planner.plan_fft_forward(r_fft);
    let doppler_plan = planner.plan_fft_forward(d_fft);
    let range_window = hamming(n_samples);
    let doppler_window = hamming(loops);

    // [chirp][rx][range bin]
    let n_used = loops * n_tx;
    let mut spectra = vec![Complex64::new(0.0, 0.0); n_used * n_rx * r_fft];
    spectra
        .par_chunks_mut(r_fft)
        .enumerate()
        .for_each(|(line, out)| {
            let (chirp, rx) = (line / n_rx, line % n_rx);
            for ((o, s), w) in out
                .iter_mut()
                .zip(frame.chirp(chirp, rx))
                .zip(&range_window)
            {
                *o = Complex64::new(s.re as f64 * w, s.im as f64 * w);
            }
            range_plan.process(out);
        });

    let n_virtual = n_tx * n_rx;
    let half = d_fft / 2;
    let mut values = vec![Complex32::new(0.0, 0.0); r_fft * d_fft * n_virtual];
    values
        .par_chunks_mut(d_fft * n_virtual)
        .enumerate()
        .for_each(|(r, slab)| {
            let mut seq = vec![Complex64::new(0.0, 0.0); d_fft];
            for v in 0..n_virtual {
                let (slot, rx) = (v / n_rx, v % n_rx);
                seq.fill(Complex64::new(0.0, 0.0));
                for (l, w) in doppler_window.iter().enumerate() {
                    let chirp = l * n_tx + slot;
                    seq[l] = spectra[(chirp * n_rx + rx) * r_fft + r] * w;
                }
                doppler_plan.process(&mut seq);
                for k in 0..d_fft {
                    let c = seq[(k + d_fft - half) % d_fft];
                    slab[k * n_virtual + v] = Complex32::new(c.re as f32, c.im as f32);
                }
            }
        });

    let pri = config.pri();
    let lambda = config.doppler_wavelength();
    let doppler_frequency: Vec<f64> = (0..d_fft)
        .map(|k| (k as f64 - half as f64) / (d_fft as f64 * pri))
        .collect();
    Ok(RdcCube {
        values,
        n_range: r_fft,
        n_doppler: d_fft,
        n_virtual,
        range_per_bin: config.range_per_bin(r_fft),
        velocity: doppler_frequency.iter().map(|f| f * lambda / 2.0).collect(),
        doppler_frequency,
        extended: false,
        config: config.clone(),
        geometry: frame.geometry.clone(),
    })
}
