mod common;

use std::f64::consts::PI;

use common::*;
use num_complex::{Complex32, Complex64};
use rdb_core::dsp::{
    angle_axis, angle_process, range_doppler_fft, tdma_compensate, PipelineConfig, RdcCube,
};
use rdb_core::prelude::*;
use rdb_core::waveform::SPEED_OF_LIGHT;

fn cascade() -> (WaveformConfig, ArrayGeometry) {
    (WaveformConfig::imaging_radar(), ArrayGeometry::cascade())
}

/// Fractional sin-azimuth FFT bin `k` with centre `(2k - n + 1) / n`.
fn sine_bin(sin: f64, n: usize) -> f64 {
    (sin * n as f64 + n as f64 - 1.0) / 2.0
}

/// First FFT bin whose centre lies inside `+-sin(half_deg)`.
fn first_kept(n: usize, half_deg: f64) -> usize {
    let limit = half_deg.to_radians().sin();
    (0..n)
        .find(|&k| ((2 * k) as f64 - n as f64 + 1.0).abs() / n as f64 <= limit)
        .unwrap()
}

fn truth_azimuth_bin(sin_az: f64) -> usize {
    sine_bin(sin_az, 256).round() as usize - first_kept(256, 70.0)
}

fn truth_elevation_bin(sin_el: f64) -> usize {
    sine_bin(sin_el, 128).round() as usize - first_kept(128, 20.0)
}

/// `(range, doppler)` of the strongest cell summed over channels.
fn rd_peak(cube: &RdcCube) -> (usize, usize) {
    let mut best = (0.0, 0, 0);
    for r in 0..cube.n_range {
        for d in 0..cube.n_doppler {
            let e: f64 = cube
                .channels(r, d)
                .iter()
                .map(|c| c.norm_sqr() as f64)
                .sum();
            if e > best.0 {
                best = (e, r, d);
            }
        }
    }
    (best.1, best.2)
}

#[test]
fn beat_frequency_lands_in_bin_100_of_a_plain_fft() {
    let (config, geometry) = cascade();
    let scene = Scene::new(vec![target(20.0, 0.0, 0.0, 0.0, 1.0)], 0.0);
    let frame = simulate_adc(&scene, &config, &geometry, 0).unwrap();

    let f_b: f64 = 2.0 * 35e12 * 20.0 / 3e8;
    let expected = (f_b / 12e6 * 256.0).round() as usize;
    assert_eq!(expected, 100);

    let x: Vec<Complex64> = frame
        .chirp(0, 0)
        .iter()
        .map(|c| Complex64::new(c.re as f64, c.im as f64))
        .collect();
    let spectrum: Vec<f64> = dft(&x, 256).iter().map(|c| c.norm()).collect();
    assert_eq!(argmax(&spectrum), expected);

    let rdc = range_doppler_fft(&frame, 256, 16).unwrap();
    assert_eq!(rd_peak(&rdc).0, expected);
}

#[test]
fn zero_padded_range_axis() {
    let (config, geometry) = cascade();
    let scene = Scene::new(vec![target(20.0, 0.0, 0.0, 0.0, 1.0)], 0.0);
    let frame = simulate_adc(&scene, &config, &geometry, 0).unwrap();
    let rdc = range_doppler_fft(&frame, 500, 128).unwrap();

    let per_bin = SPEED_OF_LIGHT * 12e6 / (2.0 * 35e12 * 500.0);
    assert!((rdc.range_per_bin - per_bin).abs() < 1e-12);
    assert!((per_bin - 0.102_857).abs() < 1e-6);
    let (r, d) = rd_peak(&rdc);
    assert_eq!(r, 194);
    assert_eq!(d, 64);
    assert!((rdc.velocity[64]).abs() < 1e-12);
}

#[test]
fn single_transmitter_doppler_bin() {
    let config = WaveformConfig {
        n_tx: 1,
        n_rx: 4,
        ..WaveformConfig::imaging_radar()
    };
    let geometry = ArrayGeometry::uniform_linear(1, 4);
    let scene = Scene::new(vec![target(15.0, 0.0, 0.0, 2.0, 1.0)], 0.0);
    let frame = simulate_adc(&scene, &config, &geometry, 0).unwrap();
    let rdc = range_doppler_fft(&frame, 256, 128).unwrap();

    let f_d: f64 = 2.0 * 2.0 * 76e9 / 3e8;
    assert!((f_d - 1013.3).abs() < 0.1);
    let offset = (f_d * 128.0 * 28e-6).round() as usize;
    assert_eq!(rd_peak(&rdc).1, 64 + offset);
}

#[test]
fn injected_tone_peaks_in_every_channel() {
    let (config, geometry) = cascade();
    let mut frame = AdcFrame::zeros(config.clone(), geometry);
    let (f_b, f_d) = (3.1e6, 700.0);
    let pri_tx = config.pri();
    for chirp in 0..config.n_chirps {
        let (l, slot) = (chirp / config.n_tx, chirp % config.n_tx);
        for rx in 0..config.n_rx {
            for n in 0..config.n_adc_samples {
                let phase = 2.0
                    * PI
                    * (f_b * n as f64 / config.sampling_frequency + f_d * l as f64 * pri_tx);
                // A per-channel offset must not move the peak.
                let offset = 0.3 * (slot * config.n_rx + rx) as f64;
                let i = frame.index(chirp, rx, n);
                let c = Complex64::from_polar(1.0, phase + offset);
                frame.samples[i] = Complex32::new(c.re as f32, c.im as f32);
            }
        }
    }
    let rdc = range_doppler_fft(&frame, 500, 128).unwrap();
    let want_r = f_b / config.sampling_frequency * 500.0;
    let want_d = f_d * pri_tx * 128.0 + 64.0;
    for v in 0..rdc.n_virtual {
        let mut best = (0.0, 0, 0);
        for r in 0..rdc.n_range {
            for d in 0..rdc.n_doppler {
                let e = rdc.values[rdc.index(r, d, v)].norm_sqr();
                if e > best.0 {
                    best = (e, r, d);
                }
            }
        }
        assert!(
            (best.1 as f64 - want_r).abs() <= 1.0,
            "channel {v}: range bin {}",
            best.1
        );
        assert!(
            (best.2 as f64 - want_d).abs() <= 1.0,
            "channel {v}: Doppler bin {}",
            best.2
        );
    }
}

#[test]
fn zero_frame_gives_zero_cube() {
    let (config, geometry) = cascade();
    let frame = AdcFrame::zeros(config, geometry);
    let rdc = range_doppler_fft(&frame, 256, 16).unwrap();
    assert!(rdc.values.iter().all(|c| c.re == 0.0 && c.im == 0.0));
}

#[test]
fn rejects_fft_sizes_below_the_data() {
    let (config, geometry) = cascade();
    let frame = AdcFrame::zeros(config, geometry);
    assert!(range_doppler_fft(&frame, 255, 16).is_err());
    assert!(range_doppler_fft(&frame, 256, 9).is_err());
}

#[test]
fn parseval_with_windows() {
    let config = short_config(64);
    let geometry = ArrayGeometry::cascade();
    let scene = Scene::new(
        vec![
            target(9.0, 12.0, 3.0, 4.0, 1.0),
            target(4.0, -30.0, 0.0, -1.0, 0.5),
        ],
        0.2,
    );
    let frame = simulate_adc(&scene, &config, &geometry, 7).unwrap();
    let (r_fft, d_fft) = (100, 32);
    let rdc = range_doppler_fft(&frame, r_fft, d_fft).unwrap();

    let w_fast = hamming(config.n_adc_samples);
    let w_slow = hamming(config.chirps_per_tx());
    let mut energy = 0.0;
    for chirp in 0..config.chirps_per_tx() * config.n_tx {
        let l = chirp / config.n_tx;
        for rx in 0..config.n_rx {
            for (n, s) in frame.chirp(chirp, rx).iter().enumerate() {
                let w = w_fast[n] * w_slow[l];
                energy += (s.norm_sqr() as f64) * w * w;
            }
        }
    }
    let expected = energy * (r_fft * d_fft) as f64;
    let total: f64 = rdc.values.iter().map(|c| c.norm_sqr() as f64).sum();
    assert!(
        ((total - expected) / expected).abs() < 1e-6,
        "{total} vs {expected}"
    );
    assert!(((rdc.energy() - expected) / expected).abs() < 1e-6);
}

#[test]
fn compensation_is_identity_for_static_scenes() {
    let config = short_config(64);
    let geometry = ArrayGeometry::cascade();
    let scene = Scene::new(
        vec![
            target(6.0, 20.0, 5.0, 0.0, 1.0),
            target(3.0, -35.0, -8.0, 0.0, 2.0),
        ],
        0.0,
    );
    let frame = simulate_adc(&scene, &config, &geometry, 0).unwrap();
    let pipeline = PipelineConfig {
        range_fft: 64,
        doppler_fft: 32,
        ..PipelineConfig::default()
    };
    let rdc = range_doppler_fft(&frame, 64, 32).unwrap();
    let compensated = tdma_compensate(&rdc, &pipeline.tdma_params).unwrap();
    // Cells far below the peak hold rounding dust whose phase is arbitrary,
    // so the tolerance is relative to the largest value of the output.
    let peak = rdc.values.iter().map(|c| c.norm()).fold(0.0, f32::max);
    for (a, b) in compensated.values.iter().zip(&rdc.values) {
        assert!((a - b).norm() <= 1e-6 * peak);
    }

    let with = angle_process(&compensated, &pipeline).unwrap();
    let without = angle_process(&rdc, &pipeline).unwrap();
    let linear = |db: f32| 10f64.powf(db as f64 / 10.0);
    let peak = with.power_db.iter().map(|&p| linear(p)).fold(0.0, f64::max);
    let mut differing = 0;
    for (i, (a, b)) in with.power_db.iter().zip(&without.power_db).enumerate() {
        assert!((linear(*a) - linear(*b)).abs() <= 1e-9 * peak, "cell {i}");
        if with.elevation[i] != without.elevation[i] {
            differing += 1;
            assert!(
                linear(*a) < 1e-9 * peak,
                "elevation differs at a live cell {i}"
            );
        }
    }
    assert!(differing < with.elevation.len() / 100);
    assert!((compensated.velocity[16]).abs() < 1e-12);
}

#[test]
fn migration_phase_at_ten_metres_per_second() {
    let config = WaveformConfig::imaging_radar();
    let phase = 4.0 * PI * 10.0 * 28e-6 / (3e8 / 76e9);
    assert!((phase - 0.891).abs() < 1e-3);
    assert!((config.migration_phase(10.0) - phase).abs() < 1e-12);
    assert!((config.max_velocity_tdma() - 3e8 / (4.0 * 76e9 * 12.0 * 28e-6)).abs() < 1e-12);
    assert!((config.max_velocity_extended() - 35.25).abs() < 0.01);
}

/// Independent evaluation of the angle spectrum of one `(r, d)` cell at
/// one sin-azimuth, over every elevation bin of the RoI.
fn elevation_spectrum(rdc: &RdcCube, r: usize, d: usize, sin_az: f64, sin_el: &[f64]) -> Vec<f64> {
    let elements = rdc.geometry.virtual_elements();
    let channels = rdc.channels(r, d);
    let mut positions: std::collections::BTreeMap<(i32, i32), (Complex64, usize)> =
        Default::default();
    for (v, e) in elements.iter().enumerate() {
        let c = channels[v];
        let entry = positions
            .entry((e.x, e.z))
            .or_insert((Complex64::new(0.0, 0.0), 0));
        entry.0 += Complex64::new(c.re as f64, c.im as f64);
        entry.1 += 1;
    }
    sin_el
        .iter()
        .map(|w| {
            positions
                .iter()
                .map(|(&(x, z), &(sum, n))| {
                    sum / n as f64
                        * Complex64::from_polar(1.0, PI * (x as f64 * sin_az + z as f64 * w))
                })
                .sum::<Complex64>()
                .norm_sqr()
        })
        .collect()
}

#[test]
fn power_channel_is_the_elevation_maximum() {
    let config = short_config(64);
    let geometry = ArrayGeometry::cascade();
    let scene = Scene::new(
        vec![
            target(5.0, 15.0, 6.0, 3.0, 1.0),
            target(8.0, -20.0, -4.0, -6.0, 1.0),
        ],
        0.05,
    );
    let frame = simulate_adc(&scene, &config, &geometry, 11).unwrap();
    let pipeline = PipelineConfig {
        range_fft: 64,
        doppler_fft: 16,
        ..PipelineConfig::default()
    };
    let rdc = tdma_compensate(
        &range_doppler_fft(&frame, 64, 16).unwrap(),
        &pipeline.tdma_params,
    )
    .unwrap();
    let cube = angle_process(&rdc, &pipeline).unwrap();
    let az = angle_axis(256, 70.0).unwrap();
    let el = angle_axis(128, 20.0).unwrap();
    assert_eq!((cube.n_azimuth, cube.n_elevation()), (az.len(), el.len()));

    let (peak_r, peak_a, peak_d) = cube.argmax();
    let mut cells = vec![(peak_r, peak_a, peak_d)];
    for i in 0..60 {
        cells.push(((i * 37) % 64, (i * 101) % az.len(), (i * 7) % 16));
    }
    for (r, a, d) in cells {
        let spectrum = elevation_spectrum(&rdc, r, d, az.centers[a], &el.centers);
        let max = spectrum.iter().copied().fold(0.0, f64::max);
        let power = 10f64.powf(cube.power(r, a, d) as f64 / 10.0);
        assert!(
            (power - max).abs() <= 1e-4 * max + 1e-20,
            "cell {r},{a},{d}: {power} vs {max}"
        );
        let e = cube.elevation_at(r, a, d) as usize;
        assert!(
            spectrum[e] >= max * (1.0 - 1e-4),
            "cell {r},{a},{d}: bin {e} is not a maximum"
        );
    }
}

#[test]
fn elevation_ties_go_to_the_lower_bin() {
    // A single row of elements has a flat elevation spectrum.
    let config = WaveformConfig {
        n_tx: 1,
        n_rx: 4,
        n_adc_samples: 64,
        ..WaveformConfig::imaging_radar()
    };
    let geometry = ArrayGeometry::uniform_linear(1, 4);
    let mut frame = AdcFrame::zeros(config, geometry);
    for s in &mut frame.samples {
        *s = Complex32::new(1.0, 0.0);
    }
    let pipeline = PipelineConfig {
        range_fft: 64,
        doppler_fft: 128,
        tdma: false,
        ..PipelineConfig::default()
    };
    let cube = process_frame(&frame, &pipeline).unwrap();
    assert!(cube.elevation.iter().all(|&e| e == 0));
}

#[test]
fn steering_to_azimuth_and_elevation() {
    let (config, geometry) = cascade();
    let pipeline = PipelineConfig::default();
    for (az, el) in [(30.0, 0.0), (-40.0, 0.0), (0.0, 10.0), (25.0, -12.0)] {
        let scene = Scene::new(vec![target(12.0, az, el, 0.0, 1.0)], 0.0);
        let frame = simulate_adc(&scene, &config, &geometry, 0).unwrap();
        let cube = process_frame(&frame, &pipeline).unwrap();
        let (r, a, d) = cube.argmax();
        let sin_az = f64::sin(f64::to_radians(az)) * f64::cos(f64::to_radians(el));
        let sin_el = f64::sin(f64::to_radians(el));
        assert!(
            a.abs_diff(truth_azimuth_bin(sin_az)) <= 1,
            "az {az}: bin {a}"
        );
        let e = cube.elevation_at(r, a, d) as usize;
        if el == 0.0 {
            // sin 0 sits on the edge between the two central bins.
            assert!(e == 21 || e == 22, "el {el}: bin {e}");
        } else {
            assert!(
                e.abs_diff(truth_elevation_bin(sin_el)) <= 1,
                "el {el}: bin {e}"
            );
        }
        assert_eq!(d, 64);
    }
}

#[test]
fn migration_compensation_removes_azimuth_bias() {
    let (config, geometry) = cascade();
    let pipeline = PipelineConfig::default();
    let scene = Scene::new(vec![target(15.0, 10.0, 0.0, 5.0, 1.0)], 0.0);
    let frame = simulate_adc(&scene, &config, &geometry, 0).unwrap();
    let rdc = range_doppler_fft(&frame, 500, 128).unwrap();
    let truth = truth_azimuth_bin(10f64.to_radians().sin());

    let raw = angle_process(&rdc, &pipeline).unwrap();
    let compensated = angle_process(
        &tdma_compensate(&rdc, &pipeline.tdma_params).unwrap(),
        &pipeline,
    )
    .unwrap();
    let (_, a_raw, _) = raw.argmax();
    let (_, a, d) = compensated.argmax();
    assert!(
        a_raw.abs_diff(truth) > 2,
        "uncompensated bin {a_raw}, truth {truth}"
    );
    assert!(a.abs_diff(truth) <= 1, "compensated bin {a}, truth {truth}");
    let dv = config.doppler_wavelength() / (2.0 * 128.0 * config.pri());
    assert!((compensated.velocity[d] - 5.0).abs() <= dv);
}

#[test]
fn ten_metres_per_second_aliases_without_extension() {
    let (config, geometry) = cascade();
    let pipeline = PipelineConfig::default();
    let scene = Scene::new(vec![target(18.0, -5.0, 0.0, 10.0, 1.0)], 0.01);
    let frame = simulate_adc(&scene, &config, &geometry, 3).unwrap();
    let rdc = range_doppler_fft(&frame, 500, 128).unwrap();
    let (_, d_raw) = rd_peak(&rdc);
    assert!(rdc.velocity[d_raw].abs() <= config.max_velocity_tdma());

    let cube = angle_process(
        &tdma_compensate(&rdc, &pipeline.tdma_params).unwrap(),
        &pipeline,
    )
    .unwrap();
    let (_, _, d) = cube.argmax();
    let dv = config.doppler_wavelength() / (2.0 * 128.0 * config.pri());
    assert!(
        (cube.velocity[d] - 10.0).abs() <= dv,
        "{}",
        cube.velocity[d]
    );
}

#[test]
fn two_targets_five_range_bins_apart() {
    let (config, geometry) = cascade();
    let dr = config.range_per_bin(500);
    let scene = Scene::new(
        vec![
            target(194.0 * dr, 0.0, 0.0, 0.0, 1.0),
            target(199.0 * dr, 0.0, 0.0, 0.0, 1.0),
        ],
        0.0,
    );
    let frame = simulate_adc(&scene, &config, &geometry, 0).unwrap();
    let cube = process_frame(&frame, &PipelineConfig::default()).unwrap();
    let (_, a, d) = cube.argmax();
    let profile: Vec<f32> = (0..cube.n_range).map(|r| cube.power(r, a, d)).collect();
    let max = profile.iter().copied().fold(f32::MIN, f32::max);
    let peaks: Vec<usize> = (1..profile.len() - 1)
        .filter(|&r| {
            profile[r] > profile[r - 1] && profile[r] > profile[r + 1] && profile[r] > max - 20.0
        })
        .collect();
    assert_eq!(peaks.len(), 2, "{peaks:?}");
    assert!(
        peaks[0].abs_diff(194) <= 1 && peaks[1].abs_diff(199) <= 1,
        "{peaks:?}"
    );
}

#[test]
fn noise_only_frames_stay_near_the_floor() {
    let config = short_config(32);
    let geometry = ArrayGeometry::cascade();
    let pipeline = PipelineConfig {
        range_fft: 32,
        doppler_fft: 16,
        ..PipelineConfig::default()
    };
    let scene = Scene::new(vec![], 1.0);
    for seed in 0..100 {
        let frame = simulate_adc(&scene, &config, &geometry, seed).unwrap();
        let cube = process_frame(&frame, &pipeline).unwrap();
        let mut sorted = cube.power_db.clone();
        sorted.sort_by(f32::total_cmp);
        let median = sorted[sorted.len() / 2];
        let max = sorted[sorted.len() - 1];
        assert!(
            max <= median + 25.0,
            "seed {seed}: max {max} dB, median {median} dB"
        );
        assert!(cube.power_db.iter().all(|p| p.is_finite()));
    }
}

#[test]
fn radar_grid_matches_fft_bin_angles() {
    let config = WaveformConfig::imaging_radar();
    let spec = PipelineConfig::default().grid_spec(&config).unwrap();
    assert_eq!(spec.dims(), (500, 240, 44));
    for a in 0..240 {
        let centre = 0.5 * (spec.sin_az_edges[a] + spec.sin_az_edges[a + 1]);
        let k = a + first_kept(256, 70.0);
        let fft_sin = (2.0 * k as f64 - 255.0) / 256.0;
        assert!((centre - fft_sin).abs() < 1e-12);
        let p = spec.center(100, a, 22);
        assert!((p[0] / (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() - fft_sin).abs() < 1e-12);
    }
    // Non-uniform in angle: wider in degrees at the edge than at boresight.
    let width = |a: usize| spec.sin_az_edges[a + 1].asin() - spec.sin_az_edges[a].asin();
    assert!(width(0) > width(120));

    let scene = Scene::new(vec![target(10.0, 0.0, 0.0, 0.0, 1.0)], 0.0);
    let frame = simulate_adc(&scene, &short_config(64), &ArrayGeometry::cascade(), 0).unwrap();
    let pipeline = PipelineConfig {
        range_fft: 64,
        doppler_fft: 16,
        ..PipelineConfig::default()
    };
    let cube = process_frame(&frame, &pipeline).unwrap();
    assert_eq!(
        cube.grid_spec().unwrap(),
        pipeline.grid_spec(&short_config(64)).unwrap()
    );
}
