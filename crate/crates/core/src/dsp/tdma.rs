//! Doppler ambiguity extension and phase-migration compensation for TDMA.
//!
//! With `n_tx` transmitters taking turns, each channel samples slow time at
//! `n_tx * T_c`, so a Doppler bin `f_k` stands for any of `f_k + m / (n_tx T_c)`.
//! The transmitter in slot `s` also fires `s * T_c` later than slot 0, which
//! adds a phase `2 pi f_d s T_c` (the migration term) on top of the angle
//! phase. Channels that share a virtual position differ only by that term,
//! so their phase difference picks the right `m`.
//!
//! Per Doppler bin the hypothesis is chosen on the strongest range cells,
//! the per-slot migration phase is refined from the residuals of the
//! overlapped pairs, and the compensation is applied to the whole bin.

use std::f64::consts::PI;

use num_complex::{Complex32, Complex64};
use serde::{Deserialize, Serialize};

use super::RdcCube;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TdmaParams {
    /// Range cells per Doppler bin that vote on the hypothesis.
    pub candidates: usize,
}

impl Default for TdmaParams {
    fn default() -> Self {
        Self { candidates: 8 }
    }
}

/// Outcome of the hypothesis test for one Doppler bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinDecision {
    /// Number of ambiguity intervals added to the measured frequency.
    pub fold: i64,
    /// Extended Doppler frequency, Hz.
    pub frequency: f64,
    /// Migration phase per transmit slot that was removed, rad.
    pub phase_per_slot: f64,
}

/// Extends the Doppler axis to `+-c / (4 f_c T_c)` and removes the TDMA
/// phase migration from every channel.
pub fn tdma_compensate(cube: &RdcCube, params: &TdmaParams) -> Result<RdcCube> {
    let decisions = decide(cube, params)?;
    let mut out = cube.clone();
    let slots: Vec<usize> = cube
        .geometry
        .virtual_elements()
        .iter()
        .map(|v| v.slot)
        .collect();
    let nv = cube.n_virtual;
    for (k, decision) in decisions.iter().enumerate() {
        let rotation: Vec<Complex32> = slots
            .iter()
            .map(|&s| {
                let c = Complex64::from_polar(1.0, -decision.phase_per_slot * s as f64);
                Complex32::new(c.re as f32, c.im as f32)
            })
            .collect();
        for r in 0..cube.n_range {
            let base = (r * cube.n_doppler + k) * nv;
            for (value, rot) in out.values[base..base + nv].iter_mut().zip(&rotation) {
                *value *= rot;
            }
        }
    }
    let lambda = cube.config.doppler_wavelength();
    out.doppler_frequency = decisions.iter().map(|d| d.frequency).collect();
    out.velocity = out
        .doppler_frequency
        .iter()
        .map(|f| f * lambda / 2.0)
        .collect();
    out.extended = true;
    Ok(out)
}

/// Hypothesis decisions for every Doppler bin of an unextended cube.
pub fn decide(cube: &RdcCube, params: &TdmaParams) -> Result<Vec<BinDecision>> {
    if cube.extended {
        return Err(Error::Config("cube is already TDMA-compensated".into()));
    }
    let geometry = &cube.geometry;
    let elements = geometry.virtual_elements();
    if elements.len() != cube.n_virtual {
        return Err(Error::Shape(format!(
            "geometry has {} virtual channels, cube has {}",
            elements.len(),
            cube.n_virtual
        )));
    }
    let pairs: Vec<(usize, usize, f64)> = geometry
        .overlapped_pairs()
        .into_iter()
        .map(|(a, b)| (a, b, (elements[b].slot - elements[a].slot) as f64))
        .collect();
    if pairs.is_empty() {
        return Err(Error::NoOverlappedPair);
    }

    let n_tx = cube.config.n_tx as i64;
    let tc = cube.config.chirp_duration;
    let fold_step = 1.0 / (n_tx as f64 * tc);
    let folds: Vec<i64> = (0..n_tx).map(|h| h - n_tx / 2).collect();
    let nv = cube.n_virtual;
    let n_candidates = params.candidates.clamp(1, cube.n_range);

    let mut decisions = Vec::with_capacity(cube.n_doppler);
    let mut energy: Vec<(f64, usize)> = Vec::with_capacity(cube.n_range);
    for k in 0..cube.n_doppler {
        energy.clear();
        for r in 0..cube.n_range {
            let base = (r * cube.n_doppler + k) * nv;
            let e: f64 = cube.values[base..base + nv]
                .iter()
                .map(|c| c.norm_sqr() as f64)
                .sum();
            energy.push((e, r));
        }
        energy.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

        // Cross products of each overlapped pair summed over the candidates.
        let cross: Vec<Complex64> = pairs
            .iter()
            .map(|&(a, b, _)| {
                energy[..n_candidates]
                    .iter()
                    .map(|&(_, r)| {
                        let base = (r * cube.n_doppler + k) * nv;
                        let (za, zb) = (cube.values[base + a], cube.values[base + b]);
                        Complex64::new(zb.re as f64, zb.im as f64)
                            * Complex64::new(za.re as f64, -(za.im as f64))
                    })
                    .sum()
            })
            .collect();

        let measured = cube.doppler_frequency[k];
        let mut best = (f64::NEG_INFINITY, 0i64);
        for &m in &folds {
            let psi = 2.0 * PI * (measured + m as f64 * fold_step) * tc;
            let coherence: f64 = cross
                .iter()
                .zip(&pairs)
                .map(|(g, &(_, _, ds))| (g * Complex64::from_polar(1.0, -ds * psi)).re)
                .sum();
            let better = coherence > best.0
                || (coherence == best.0 && (m.abs(), m) < (best.1.abs(), best.1));
            if better {
                best = (coherence, m);
            }
        }
        let fold = best.1;
        let psi = 2.0 * PI * (measured + fold as f64 * fold_step) * tc;

        // Weighted least-squares correction from the pair residuals.
        let (mut num, mut den) = (0.0, 0.0);
        for (g, &(_, _, ds)) in cross.iter().zip(&pairs) {
            let w = g.norm();
            if w > 0.0 {
                let residual = (g * Complex64::from_polar(1.0, -ds * psi)).arg();
                num += w * ds * residual;
                den += w * ds * ds;
            }
        }
        let phase_per_slot = if den > 0.0 { psi + num / den } else { psi };

        let extended_band = 1.0 / tc;
        let mut frequency = measured + fold as f64 * fold_step;
        frequency -= extended_band * ((frequency + 0.5 * extended_band) / extended_band).floor();
        decisions.push(BinDecision {
            fold,
            frequency,
            phase_per_slot,
        });
    }
    Ok(decisions)
}
