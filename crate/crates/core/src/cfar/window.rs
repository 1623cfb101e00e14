use std::collections::HashMap;

use rayon::prelude::*;

use super::threshold::{ca_factor, caos_factor, os_factor, os_rank};
use super::{CfarConfig, CfarKind};
use crate::error::{Error, Result};

/// Threshold factors keyed by window shape, so shrunken edge windows are
/// calibrated once each.
#[derive(Default)]
struct Factors {
    cache: HashMap<(usize, usize), f64>,
}

impl Factors {
    /// Factor for `n` training values, each an average of `m` cells.
    fn get(&mut self, config: &CfarConfig, n: usize, m: usize) -> f64 {
        if let Some(scale) = config.threshold_scale {
            return scale;
        }
        let pfa = config
            .pfa_design
            .expect("validated config has a design Pfa");
        *self
            .cache
            .entry((n, m))
            .or_insert_with(|| match config.kind {
                CfarKind::Ca => ca_factor(n, pfa),
                CfarKind::Os => os_factor(n, os_rank(n, config.os_rank_fraction), pfa),
                CfarKind::Caos => caos_factor(m, n, os_rank(n, config.os_rank_fraction), pfa),
            })
    }
}

impl Factors {
    fn lookup(&self, config: &CfarConfig, n: usize, m: usize) -> f64 {
        match config.threshold_scale {
            Some(scale) => scale,
            None => self.cache[&(n, m)],
        }
    }
}

fn kth_smallest(values: &mut [f64], k: usize) -> f64 {
    *values
        .select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b))
        .1
}

/// 1D CA- or OS-CFAR over a linear-power profile.
pub fn cfar_1d(profile: &[f64], config: &CfarConfig) -> Result<Vec<bool>> {
    config.validate()?;
    if config.kind == CfarKind::Caos {
        return Err(Error::Config("CAOS is a two-dimensional detector".into()));
    }
    let (t, g) = (config.training[0], config.guard[0]);
    if profile.len() <= 2 * (t + g) {
        return Err(Error::WindowTooLarge {
            len: profile.len(),
            training: t,
            guard: g,
        });
    }
    let n = profile.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for (i, p) in profile.iter().enumerate() {
        prefix.push(prefix[i] + p);
    }
    let mut factors = Factors::default();
    let mut buf = Vec::with_capacity(2 * t);
    let mask = (0..n)
        .map(|i| {
            let left = i.saturating_sub(g + t)..i.saturating_sub(g);
            let right = (i + g + 1).min(n)..(i + g + t + 1).min(n);
            let count = left.len() + right.len();
            let statistic = match config.kind {
                CfarKind::Ca => {
                    (prefix[left.end] - prefix[left.start] + prefix[right.end]
                        - prefix[right.start])
                        / count as f64
                }
                _ => {
                    buf.clear();
                    buf.extend_from_slice(&profile[left]);
                    buf.extend_from_slice(&profile[right]);
                    kth_smallest(&mut buf, os_rank(count, config.os_rank_fraction))
                }
            };
            profile[i] > factors.get(config, count, 1) * statistic
        })
        .collect();
    Ok(mask)
}

/// 2D CFAR over a row-major `rows x cols` linear-power matrix.
///
/// CA and OS use the rectangular ring between the guard box and the outer
/// box. CAOS averages each training row (axis 0 offsets beyond the guard)
/// over the full window width along axis 1, then takes the order statistic
/// of those row averages.
pub fn cfar_2d(matrix: &[f64], rows: usize, cols: usize, config: &CfarConfig) -> Result<Vec<bool>> {
    config.validate()?;
    if matrix.len() != rows * cols {
        return Err(Error::Shape(format!(
            "matrix holds {} values, expected {rows} x {cols}",
            matrix.len()
        )));
    }
    let [t0, t1] = config.training;
    let [g0, g1] = config.guard;
    if t1 == 0 {
        return Err(Error::Config(
            "2D CFAR needs training cells along both axes".into(),
        ));
    }
    for (len, t, g) in [(rows, t0, g0), (cols, t1, g1)] {
        if len <= 2 * (t + g) {
            return Err(Error::WindowTooLarge {
                len,
                training: t,
                guard: g,
            });
        }
    }
    let span =
        |i: usize, reach: usize, len: usize| i.saturating_sub(reach)..(i + reach + 1).min(len);

    // Row-wise prefix sums, then an integral image for CA.
    let mut row_prefix = vec![0.0; rows * (cols + 1)];
    for i in 0..rows {
        let p = &mut row_prefix[i * (cols + 1)..(i + 1) * (cols + 1)];
        for j in 0..cols {
            p[j + 1] = p[j] + matrix[i * cols + j];
        }
    }
    let mut integral = vec![0.0; (rows + 1) * (cols + 1)];
    if config.kind == CfarKind::Ca {
        for i in 0..rows {
            for j in 0..=cols {
                integral[(i + 1) * (cols + 1) + j] =
                    integral[i * (cols + 1) + j] + row_prefix[i * (cols + 1) + j];
            }
        }
    }
    let box_sum = |r: &std::ops::Range<usize>, c: &std::ops::Range<usize>| {
        let at = |i: usize, j: usize| integral[i * (cols + 1) + j];
        at(r.end, c.end) - at(r.start, c.end) - at(r.end, c.start) + at(r.start, c.start)
    };

    // Window shape `(n, m)` of a cell; only cells near the borders differ
    // from the interior, so calibrating every distinct shape up front is
    // cheap and leaves the parallel pass read-only.
    let shape = |i: usize, j: usize| -> (usize, usize) {
        let (outer_r, inner_r) = (span(i, g0 + t0, rows), span(i, g0, rows));
        let (outer_c, inner_c) = (span(j, g1 + t1, cols), span(j, g1, cols));
        match config.kind {
            CfarKind::Caos => (outer_r.len() - inner_r.len(), outer_c.len()),
            _ => (
                outer_r.len() * outer_c.len() - inner_r.len() * inner_c.len(),
                1,
            ),
        }
    };
    let border = |reach: usize, len: usize| -> Vec<usize> {
        let mut v: Vec<usize> = (0..reach.min(len))
            .chain(len.saturating_sub(reach)..len)
            .collect();
        v.push(len / 2);
        v
    };
    let mut factors = Factors::default();
    for &i in &border(g0 + t0, rows) {
        for &j in &border(g1 + t1, cols) {
            let (n, m) = shape(i, j);
            factors.get(config, n, m);
        }
    }
    let factors = &factors;

    let mut mask = vec![false; rows * cols];
    mask.par_chunks_mut(cols)
        .enumerate()
        .for_each_init(Vec::new, |buf, (i, out)| {
            let outer_r = span(i, g0 + t0, rows);
            let inner_r = span(i, g0, rows);
            for (j, hit) in out.iter_mut().enumerate() {
                let outer_c = span(j, g1 + t1, cols);
                let inner_c = span(j, g1, cols);
                let (statistic, n, m) = match config.kind {
                    CfarKind::Ca => {
                        let n = outer_r.len() * outer_c.len() - inner_r.len() * inner_c.len();
                        let sum = box_sum(&outer_r, &outer_c) - box_sum(&inner_r, &inner_c);
                        (sum / n as f64, n, 1)
                    }
                    CfarKind::Os => {
                        buf.clear();
                        for r in outer_r.clone() {
                            let row = &matrix[r * cols..(r + 1) * cols];
                            if inner_r.contains(&r) {
                                buf.extend_from_slice(&row[outer_c.start..inner_c.start]);
                                buf.extend_from_slice(&row[inner_c.end..outer_c.end]);
                            } else {
                                buf.extend_from_slice(&row[outer_c.clone()]);
                            }
                        }
                        let n = buf.len();
                        (kth_smallest(buf, os_rank(n, config.os_rank_fraction)), n, 1)
                    }
                    CfarKind::Caos => {
                        let m = outer_c.len();
                        buf.clear();
                        for r in outer_r.clone().filter(|r| !inner_r.contains(r)) {
                            let p = &row_prefix[r * (cols + 1)..(r + 1) * (cols + 1)];
                            buf.push((p[outer_c.end] - p[outer_c.start]) / m as f64);
                        }
                        let n = buf.len();
                        (kth_smallest(buf, os_rank(n, config.os_rank_fraction)), n, m)
                    }
                };
                *hit = matrix[i * cols + j] > factors.lookup(config, n, m) * statistic;
            }
        });
    Ok(mask)
}

/// Strict two-sided local maxima no more than `drop_db` below the profile
/// maximum. End bins are never peaks.
pub fn peak_detect_1d(profile_db: &[f64], drop_db: f64) -> Vec<bool> {
    let n = profile_db.len();
    let max = profile_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..n)
        .map(|i| {
            i > 0
                && i + 1 < n
                && profile_db[i] > profile_db[i - 1]
                && profile_db[i] > profile_db[i + 1]
                && profile_db[i] >= max - drop_db
        })
        .collect()
}
