use std::f64::consts::PI;

use num_complex::Complex32;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::{PipelineConfig, RadarCube, RdcCube, POWER_FLOOR};
use crate::error::{Error, Result};

/// A sine-space angle axis produced by an `n_fft`-point array FFT and
/// cropped to a half-angle.
///
/// Bin `k` of the FFT is centred on `sin = (k - n_fft/2 + 1/2) * 2/n_fft`:
/// the half-bin offset makes the axis symmetric about boresight, so a crop
/// to `+-sin(half_angle)` keeps an even number of bins and symmetric edges.
/// Bins whose centre lies inside the crop are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleAxis {
    pub n_fft: usize,
    /// First kept FFT bin.
    pub start: usize,
    /// Sine of the centre of each kept bin.
    pub centers: Vec<f64>,
    /// Bin edges in sine space, `centers.len() + 1` values.
    pub edges: Vec<f64>,
}

impl AngleAxis {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Kept bin whose interval contains `sin_angle`, if any.
    pub fn bin_of(&self, sin_angle: f64) -> Option<usize> {
        let last = *self.edges.last()?;
        if !(sin_angle >= self.edges[0] && sin_angle <= last) {
            return None;
        }
        Some((self.edges.partition_point(|&e| e <= sin_angle) - 1).min(self.len() - 1))
    }
}

pub fn angle_axis(n_fft: usize, half_angle_deg: f64) -> Result<AngleAxis> {
    if n_fft == 0 {
        return Err(Error::Config("angle FFT size must be positive".into()));
    }
    let limit = half_angle_deg.to_radians().sin();
    let n = n_fft as f64;
    let center = |k: usize| (2.0 * k as f64 - n + 1.0) / n;
    let kept: Vec<usize> = (0..n_fft).filter(|&k| center(k).abs() <= limit).collect();
    let (Some(&start), Some(&end)) = (kept.first(), kept.last()) else {
        return Err(Error::Config(format!(
            "no {n_fft}-point FFT bin lies within +-{half_angle_deg} degrees"
        )));
    };
    Ok(AngleAxis {
        n_fft,
        start,
        centers: kept.iter().map(|&k| center(k)).collect(),
        edges: (start..=end + 1)
            .map(|k| (2.0 * k as f64 - n) / n)
            .collect(),
    })
}

/// Azimuth and elevation FFTs over the virtual array, elevation crop and
/// single-peak selection.
///
/// Channels are placed on a dense half-wavelength grid (rows are the
/// distinct elevation offsets, columns every horizontal position between
/// the outermost elements); channels sharing a position are averaged and
/// empty positions stay zero. Only the rows that exist are transformed in
/// elevation, evaluated directly at the kept bins of an `elevation_fft`
/// grid. Each `(range, azimuth, Doppler)` cell keeps the strongest
/// elevation bin and its index; ties go to the lower bin.
pub fn angle_process(cube: &RdcCube, pipeline: &PipelineConfig) -> Result<RadarCube> {
    let geometry = &cube.geometry;
    let elements = geometry.virtual_elements();
    if elements.len() != cube.n_virtual
        || cube.values.len() != cube.n_range * cube.n_doppler * cube.n_virtual
    {
        return Err(Error::Shape(format!(
            "cube holds {} channels, geometry has {}",
            cube.n_virtual,
            elements.len()
        )));
    }
    let xs = geometry.unique_x();
    let zs = geometry.unique_z();
    let x0 = xs[0];
    let x_span = (xs[xs.len() - 1] - x0 + 1) as usize;
    let z_span = (zs[zs.len() - 1] - zs[0] + 1) as usize;
    if pipeline.azimuth_fft < x_span {
        return Err(Error::FftTooSmall {
            axis: "azimuth",
            size: pipeline.azimuth_fft,
            available: x_span,
        });
    }
    if pipeline.elevation_fft < z_span {
        return Err(Error::FftTooSmall {
            axis: "elevation",
            size: pipeline.elevation_fft,
            available: z_span,
        });
    }
    let az = angle_axis(pipeline.azimuth_fft, pipeline.azimuth_fov_deg)?;
    let el = angle_axis(pipeline.elevation_fft, pipeline.elevation_roi_deg)?;

    let n_az = pipeline.azimuth_fft;
    let n_rows = zs.len();
    let (na, ne, nd, nv) = (az.len(), el.len(), cube.n_doppler, cube.n_virtual);
    if ne > u16::MAX as usize {
        return Err(Error::Config(format!(
            "{ne} elevation bins do not fit the index channel"
        )));
    }

    // Dense-grid slot of every position and the channels averaged into it.
    let slots: Vec<(usize, Vec<usize>)> = geometry
        .positions()
        .into_iter()
        .map(|((z, x), channels)| {
            let row = zs
                .binary_search(&z)
                .expect("z comes from the same geometry");
            (row * n_az + (x - x0) as usize, channels)
        })
        .collect();
    let shift: Vec<Complex32> = (0..n_az)
        .map(|x| {
            let phase = PI * x as f64 * (1.0 - n_az as f64) / n_az as f64;
            Complex32::new(phase.cos() as f32, phase.sin() as f32)
        })
        .collect();
    // |sum_z b_z e^{j pi z w}|^2 expands into the row powers plus one cross
    // term per distinct row separation ("lag"): pairs at the same lag share
    // a coefficient, so the per-bin work scales with the number of lags.
    let mut lags: Vec<i32> = Vec::new();
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for i in 0..n_rows {
        for j in 0..i {
            let lag = zs[i] - zs[j];
            let l = match lags.iter().position(|&x| x == lag) {
                Some(l) => l,
                None => {
                    lags.push(lag);
                    lags.len() - 1
                }
            };
            pairs.push((i, j, l));
        }
    }
    let n_lags = lags.len();
    let half = el.len() / 2;
    debug_assert!(el.len() % 2 == 0 && el.centers[half] == -el.centers[half - 1]);
    let coeffs: Vec<Vec<(f32, f32)>> = el.centers[half..]
        .iter()
        .map(|w| {
            lags.iter()
                .map(|&lag| {
                    let phase = PI * lag as f64 * w;
                    ((2.0 * phase.cos()) as f32, (2.0 * phase.sin()) as f32)
                })
                .collect()
        })
        .collect();

    let plan = FftPlanner::<f32>::new().plan_fft_inverse(n_az);
    let mut power_db = vec![0f32; cube.n_range * na * nd];
    let mut elevation = vec![0u16; cube.n_range * na * nd];
    power_db
        .par_chunks_mut(na * nd)
        .zip(elevation.par_chunks_mut(na * nd))
        .enumerate()
        .for_each(|(r, (power_slab, elevation_slab))| {
            let mut rows = vec![Complex32::new(0.0, 0.0); n_rows * n_az];
            let mut scratch = vec![Complex32::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            let mut re = vec![0f32; n_rows * na];
            let mut im = vec![0f32; n_rows * na];
            let mut base = vec![0f32; na];
            let (mut cross_re, mut cross_im) = (vec![0f32; n_lags * na], vec![0f32; n_lags * na]);
            let (mut even, mut odd) = (vec![0f32; na], vec![0f32; na]);
            let mut best = vec![0f32; na];
            let mut arg = vec![0f32; na];
            for d in 0..nd {
                let channels = &cube.values[(r * nd + d) * nv..(r * nd + d + 1) * nv];
                rows.fill(Complex32::new(0.0, 0.0));
                for (slot, members) in &slots {
                    let sum: Complex32 = members.iter().map(|&c| channels[c]).sum();
                    rows[*slot] = sum / members.len() as f32 * shift[slot % n_az];
                }
                plan.process_with_scratch(&mut rows, &mut scratch);
                for row in 0..n_rows {
                    for a in 0..na {
                        let v = rows[row * n_az + az.start + a];
                        re[row * na + a] = v.re;
                        im[row * na + a] = v.im;
                    }
                }

                base.fill(0.0);
                cross_re.fill(0.0);
                cross_im.fill(0.0);
                for row in 0..n_rows {
                    let (xr, xi) = (&re[row * na..(row + 1) * na], &im[row * na..(row + 1) * na]);
                    for a in 0..na {
                        base[a] += xr[a] * xr[a] + xi[a] * xi[a];
                    }
                }
                for &(i, j, l) in &pairs {
                    let (ar, ai) = (&re[i * na..(i + 1) * na], &im[i * na..(i + 1) * na]);
                    let (br, bi) = (&re[j * na..(j + 1) * na], &im[j * na..(j + 1) * na]);
                    let (cr, ci) = (
                        &mut cross_re[l * na..(l + 1) * na],
                        &mut cross_im[l * na..(l + 1) * na],
                    );
                    for a in 0..na {
                        // b_i * conj(b_j)
                        cr[a] += ar[a] * br[a] + ai[a] * bi[a];
                        ci[a] += ai[a] * br[a] - ar[a] * bi[a];
                    }
                }
                elevation_peaks(
                    &base, &cross_re, &cross_im, &coeffs, &mut even, &mut odd, &mut best, &mut arg,
                );
                for a in 0..na {
                    power_slab[a * nd + d] =
                        (20.0 * ((best[a].max(0.0) as f64).sqrt() + POWER_FLOOR).log10()) as f32;
                    elevation_slab[a * nd + d] = arg[a] as u16;
                }
            }
        });

    let range_edges = super::range_edges(cube.n_range, cube.range_per_bin);
    Ok(RadarCube {
        power_db,
        elevation,
        n_range: cube.n_range,
        n_azimuth: na,
        n_doppler: nd,
        range_edges,
        sin_az_edges: az.edges,
        sin_el_edges: el.edges,
        velocity: cube.velocity.clone(),
    })
}

/// Strongest elevation bin of every azimuth column, from the row power
/// `base` and per-lag cross terms laid out `[lag][azimuth]`.
///
/// The kept elevation bins are symmetric about boresight, so bin `k` of
/// the upper half and its mirror share the even (cosine) part of the sum
/// and differ only in the sign of the odd (sine) part; `coeffs` holds the
/// `(2 cos, 2 sin)` pairs of the upper half only.
#[allow(clippy::too_many_arguments)]
fn elevation_peaks(
    base: &[f32],
    cross_re: &[f32],
    cross_im: &[f32],
    coeffs: &[Vec<(f32, f32)>],
    even: &mut [f32],
    odd: &mut [f32],
    best: &mut [f32],
    arg: &mut [f32],
) {
    #[cfg(target_arch = "x86_64")]
    if is_x86_feature_detected!("avx2") {
        // SAFETY: the CPU supports the features the wide copy is built for.
        unsafe { elevation_peaks_avx2(base, cross_re, cross_im, coeffs, even, odd, best, arg) };
        return;
    }
    elevation_peaks_generic(base, cross_re, cross_im, coeffs, even, odd, best, arg);
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
#[allow(clippy::too_many_arguments)]
unsafe fn elevation_peaks_avx2(
    base: &[f32],
    cross_re: &[f32],
    cross_im: &[f32],
    coeffs: &[Vec<(f32, f32)>],
    even: &mut [f32],
    odd: &mut [f32],
    best: &mut [f32],
    arg: &mut [f32],
) {
    elevation_peaks_generic(base, cross_re, cross_im, coeffs, even, odd, best, arg);
}

// Same operations in the same order on every path, so results do not
// depend on the instruction set.
#[inline(always)]
#[allow(clippy::too_many_arguments)]
fn elevation_peaks_generic(
    base: &[f32],
    cross_re: &[f32],
    cross_im: &[f32],
    coeffs: &[Vec<(f32, f32)>],
    even: &mut [f32],
    odd: &mut [f32],
    best: &mut [f32],
    arg: &mut [f32],
) {
    let na = base.len();
    let half = coeffs.len();
    best.fill(f32::NEG_INFINITY);
    for (k, lag_coeffs) in coeffs.iter().enumerate() {
        even.copy_from_slice(base);
        odd.fill(0.0);
        for (l, &(c, s)) in lag_coeffs.iter().enumerate() {
            let (cr, ci) = (
                &cross_re[l * na..(l + 1) * na],
                &cross_im[l * na..(l + 1) * na],
            );
            for (e, &x) in even.iter_mut().zip(cr) {
                *e += x * c;
            }
            for (o, &y) in odd.iter_mut().zip(ci) {
                *o += y * s;
            }
        }
        let (lower, upper) = ((half - 1 - k) as f32, (half + k) as f32);
        for (((&e, &o), b), i) in even
            .iter()
            .zip(odd.iter())
            .zip(best.iter_mut())
            .zip(arg.iter_mut())
        {
            let (p_lo, p_up) = (e + o, e - o);
            // Bins are visited outwards from boresight, so a lower-half bin
            // has a smaller index than every bin seen so far and wins ties.
            let take = p_lo >= *b;
            *b = if take { p_lo } else { *b };
            *i = if take { lower } else { *i };
            let take = p_up > *b;
            *b = if take { p_up } else { *b };
            *i = if take { upper } else { *i };
        }
    }
}
