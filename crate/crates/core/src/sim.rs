//! Renders scenes as raw FMCW ADC frames and as lidar-style point clouds.

use std::f64::consts::PI;

use num_complex::{Complex32, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{crop_fov, Fov, PointCloud};
use crate::scene::{norm, Point3, Scene};
use crate::waveform::{ArrayGeometry, WaveformConfig, SPEED_OF_LIGHT};

/// Complex baseband samples of one frame, indexed `[chirp][rx][sample]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdcFrame {
    pub samples: Vec<Complex32>,
    pub config: WaveformConfig,
    pub geometry: ArrayGeometry,
}

impl AdcFrame {
    pub fn zeros(config: WaveformConfig, geometry: ArrayGeometry) -> Self {
        let n = config.n_chirps * config.n_rx * config.n_adc_samples;
        Self {
            samples: vec![Complex32::new(0.0, 0.0); n],
            config,
            geometry,
        }
    }

    /// `(n_chirps, n_rx, n_adc_samples)`
    pub fn dims(&self) -> (usize, usize, usize) {
        (
            self.config.n_chirps,
            self.config.n_rx,
            self.config.n_adc_samples,
        )
    }

    pub fn index(&self, chirp: usize, rx: usize, sample: usize) -> usize {
        (chirp * self.config.n_rx + rx) * self.config.n_adc_samples + sample
    }

    pub fn chirp(&self, chirp: usize, rx: usize) -> &[Complex32] {
        let start = self.index(chirp, rx, 0);
        &self.samples[start..start + self.config.n_adc_samples]
    }

    /// Transmitter that sent chirp `chirp`.
    pub fn transmitter(&self, chirp: usize) -> usize {
        self.geometry.tx_schedule[chirp % self.geometry.tx_schedule.len()]
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.geometry.validate_for(&self.config)?;
        let (c, r, s) = self.dims();
        if self.samples.len() != c * r * s {
            return Err(Error::Shape(format!(
                "ADC frame holds {} samples, expected {c} x {r} x {s}",
                self.samples.len()
            )));
        }
        Ok(())
    }
}

/// Simulates one frame of the FMCW MIMO/TDMA radar observing `scene`.
///
/// Each point scatterer adds, per chirp and receiver, a tone at the beat
/// frequency `2 S R / c` with carrier phase `4 pi R / lambda` and the
/// far-field array phase of the virtual element. `R` is the range at the
/// start of the chirp (stop and hop), so Doppler and the TDMA phase
/// migration both come from motion between chirps. Circular complex
/// Gaussian noise of variance `noise_power` is added per sample.
pub fn simulate_adc(
    scene: &Scene,
    config: &WaveformConfig,
    geometry: &ArrayGeometry,
    seed: u64,
) -> Result<AdcFrame> {
    scene.validate()?;
    config.validate()?;
    geometry.validate_for(config)?;

    let (n_chirps, n_rx, n_samples) = (config.n_chirps, config.n_rx, config.n_adc_samples);
    let lambda = config.wavelength();
    let scatterers = scene.radar_points(config.range_resolution());

    // Split re/im accumulators, one block per chirp so chirps fill in
    // parallel. The beat tone of a scatterer is built once per chirp and
    // added to every receiver with that receiver's phase.
    let block = n_rx * n_samples;
    let mut re = vec![0f64; n_chirps * block];
    let mut im = vec![0f64; n_chirps * block];
    re.par_chunks_mut(block)
        .zip(im.par_chunks_mut(block))
        .enumerate()
        .for_each(|(chirp, (re, im))| {
            let t = chirp as f64 * config.chirp_duration;
            let (tx_x, tx_z) = geometry.tx_positions[geometry.tx_schedule[chirp % config.n_tx]];
            let mut tone_re = vec![0f64; n_samples];
            let mut tone_im = vec![0f64; n_samples];
            for s in &scatterers {
                let p: Point3 = std::array::from_fn(|i| s.position[i] + s.velocity[i] * t);
                let range = norm(&p);
                let (u, w) = (p[0] / range, p[2] / range);
                let step = Complex64::from_polar(
                    1.0,
                    2.0 * PI * 2.0 * config.chirp_slope * range
                        / SPEED_OF_LIGHT
                        / config.sampling_frequency,
                );
                let mut phasor = Complex64::new(1.0, 0.0);
                for (tr, ti) in tone_re.iter_mut().zip(tone_im.iter_mut()) {
                    *tr = phasor.re;
                    *ti = phasor.im;
                    phasor *= step;
                }
                let carrier = 4.0 * PI * range / lambda;
                for (rx, &(rx_x, rx_z)) in geometry.rx_positions.iter().enumerate() {
                    let (x, z) = ((tx_x + rx_x) as f64, (tx_z + rx_z) as f64);
                    let c = Complex64::from_polar(s.amplitude, carrier - PI * (x * u + z * w));
                    let range_of_rx = rx * n_samples..(rx + 1) * n_samples;
                    let (ar, ai) = (&mut re[range_of_rx.clone()], &mut im[range_of_rx]);
                    for (((ar, ai), &tr), &ti) in
                        ar.iter_mut().zip(ai.iter_mut()).zip(&tone_re).zip(&tone_im)
                    {
                        *ar += tr * c.re - ti * c.im;
                        *ai += tr * c.im + ti * c.re;
                    }
                }
            }
        });

    if scene.noise_power > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sigma = (scene.noise_power / 2.0).sqrt();
        for (r, i) in re.iter_mut().zip(im.iter_mut()) {
            let nr: f64 = rng.sample(StandardNormal);
            let ni: f64 = rng.sample(StandardNormal);
            *r += sigma * nr;
            *i += sigma * ni;
        }
    }

    Ok(AdcFrame {
        samples: re
            .into_iter()
            .zip(im)
            .map(|(r, i)| Complex32::new(r as f32, i as f32))
            .collect(),
        config: config.clone(),
        geometry: geometry.clone(),
    })
}

/// Samples an ideal lidar view of the scene.
///
/// Point scatterers give one point each. Boxes give `round(density * area)`
/// uniformly placed points on every visible face. The ground plane, when
/// present, is sampled at its own density over the square in front of the
/// sensor. Everything is cropped to `fov`.
pub fn sample_lidar(scene: &Scene, fov: &Fov, density: f64, seed: u64) -> Result<PointCloud> {
    if !(density.is_finite() && density > 0.0) {
        return Err(Error::Config(format!(
            "lidar density must be positive, got {density}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    for s in &scene.scatterers {
        if s.is_point() {
            points.push(s.position);
            continue;
        }
        for face in s.visible_faces() {
            let n = (density * face.area()).round() as usize;
            for _ in 0..n {
                let a = rng.random_range(-1.0..=1.0);
                let b = rng.random_range(-1.0..=1.0);
                points.push(face.at(a, b));
            }
        }
    }
    if let Some(ground) = &scene.ground_plane {
        let half = fov.max_range;
        let n = (ground.density * 2.0 * half * half).round() as usize;
        for _ in 0..n {
            let x = rng.random_range(-half..half);
            let y = rng.random_range(0.0..half);
            points.push([x, y, ground.z_offset]);
        }
    }
    Ok(crop_fov(&PointCloud::new(points), fov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Scatterer;

    fn single_tx() -> (WaveformConfig, ArrayGeometry) {
        let config = WaveformConfig {
            n_tx: 1,
            n_rx: 4,
            n_chirps: 64,
            ..WaveformConfig::imaging_radar()
        };
        (config, ArrayGeometry::uniform_linear(1, 4))
    }

    #[test]
    fn empty_noise_free_scene_is_zero() {
        let (config, geometry) = single_tx();
        let frame = simulate_adc(&Scene::default(), &config, &geometry, 1).unwrap();
        assert!(frame.samples.iter().all(|s| s.re == 0.0 && s.im == 0.0));
        assert_eq!(frame.dims(), (64, 4, 256));
    }

    #[test]
    fn rejects_bad_inputs() {
        let (config, geometry) = single_tx();
        let at_origin = Scene::new(vec![Scatterer::point([0.0; 3], 1.0)], 0.0);
        assert!(matches!(
            simulate_adc(&at_origin, &config, &geometry, 0),
            Err(Error::Scene(_))
        ));
        let empty = ArrayGeometry {
            tx_positions: vec![],
            rx_positions: vec![],
            tx_schedule: vec![],
        };
        assert!(matches!(
            simulate_adc(&Scene::default(), &config, &empty, 0),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let (config, geometry) = single_tx();
        let scene = Scene::new(vec![Scatterer::point([1.0, 15.0, 0.0], 1.0)], 0.5);
        let a = simulate_adc(&scene, &config, &geometry, 42).unwrap();
        let b = simulate_adc(&scene, &config, &geometry, 42).unwrap();
        let c = simulate_adc(&scene, &config, &geometry, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn schedule_assigns_transmitters() {
        let config = WaveformConfig::imaging_radar();
        let frame = AdcFrame::zeros(config, ArrayGeometry::cascade());
        assert_eq!(frame.transmitter(0), 0);
        assert_eq!(frame.transmitter(13), 1);
    }

    #[test]
    fn lidar_point_target_and_fov() {
        let fov = Fov::default();
        let scene = Scene::new(vec![Scatterer::point([0.0, 10.0, 0.5], 1.0)], 0.0);
        let cloud = sample_lidar(&scene, &fov, 10.0, 0).unwrap();
        assert_eq!(cloud.points, vec![[0.0, 10.0, 0.5]]);

        let az = 80f64.to_radians();
        let outside = Scene::new(
            vec![Scatterer::point(
                [10.0 * az.sin(), 10.0 * az.cos(), 0.0],
                1.0,
            )],
            0.0,
        );
        assert!(sample_lidar(&outside, &fov, 10.0, 0).unwrap().is_empty());
        assert!(sample_lidar(&Scene::default(), &fov, 10.0, 0)
            .unwrap()
            .is_empty());
        assert!(sample_lidar(&scene, &fov, 0.0, 0).is_err());
    }

    #[test]
    fn lidar_box_density() {
        let scene = Scene::new(
            vec![Scatterer::point([0.0, 10.0, 0.0], 1.0).with_extent([0.5, 0.5, 0.5])],
            0.0,
        );
        let cloud = sample_lidar(&scene, &Fov::default(), 100.0, 9).unwrap();
        // Only the 1 m^2 front face is visible.
        let expected = 100.0;
        assert!((cloud.len() as f64 - expected).abs() <= 0.2 * expected);
    }
}
