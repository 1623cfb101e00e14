//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test -p rdb-cli --test acceptance -- 3 5` runs a subset.
//! Exits nonzero when any criterion fails.

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use rdb_core::cfar::*;
use rdb_core::dsp::{angle_process, range_doppler_fft, tdma_compensate};
use rdb_core::grid::GroundParams;
use rdb_core::metrics::KdTree;
use rdb_core::prelude::*;
use rdb_core::scene::GroundPlane;

const C: f64 = 3e8;

type Outcome = Result<String, String>;

macro_rules! check {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn target(range: f64, az_deg: f64, v: f64) -> Scatterer {
    let az = az_deg.to_radians();
    let dir = [az.sin(), az.cos(), 0.0];
    Scatterer::point(dir.map(|c| range * c), 1.0).with_velocity(dir.map(|c| v * c))
}

/// Nearest kept bin of a `n`-point sine-space FFT cropped to `+-half_deg`;
/// bin k has centre `(2k - n + 1) / n`.
fn sine_truth(sin: f64, n: usize, half_deg: f64) -> usize {
    let limit = half_deg.to_radians().sin();
    let kept: Vec<f64> = (0..n)
        .map(|k| (2.0 * k as f64 - n as f64 + 1.0) / n as f64)
        .filter(|c| c.abs() <= limit)
        .collect();
    (0..kept.len())
        .min_by(|&i, &j| (kept[i] - sin).abs().total_cmp(&(kept[j] - sin).abs()))
        .unwrap()
}

/// Range bin of a beat tone `f_b = 2 S R / c` in an `n`-point FFT at `f_s`.
fn range_truth(w: &WaveformConfig, range: f64, n: usize) -> usize {
    let fb = 2.0 * w.chirp_slope * range / C;
    (fb / w.sampling_frequency * n as f64).round() as usize
}

/// Velocity width of one Doppler bin: one transmitter repeats every
/// `n_tx` chirps, the slow-time FFT has `n` points, and the carrier is the
/// middle of the sampled sweep.
fn doppler_bin_width(w: &WaveformConfig, n: usize) -> f64 {
    let f_mid = w.start_frequency
        + w.chirp_slope * (w.n_adc_samples as f64 - 1.0) / (2.0 * w.sampling_frequency);
    let t_tx = w.n_tx as f64 * w.chirp_duration;
    C / f_mid / (2.0 * n as f64 * t_tx)
}

fn exponential(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect()
}

fn count(mask: &[bool]) -> usize {
    mask.iter().filter(|&&b| b).count()
}

// ---------------------------------------------------------------- 1

fn dsp_recovery() -> Outcome {
    let w = WaveformConfig::imaging_radar();
    let geometry = ArrayGeometry::cascade();
    let pipeline = PipelineConfig::default();
    let dv = doppler_bin_width(&w, pipeline.doppler_fft);
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC1);
    let cases: Vec<(f64, f64, f64, u64)> = (0..100)
        .map(|i| {
            (
                rng.random_range(3.0..48.0),
                rng.random_range(-60.0..60.0),
                rng.random_range(-25.0..25.0),
                i,
            )
        })
        .collect();
    let failures: Vec<String> = cases
        .par_iter()
        .filter_map(|&(range, az, v, seed)| {
            // rcs 1 over noise 0.01: 20 dB per sample.
            let scene = Scene::new(vec![target(range, az, v)], 0.01);
            let frame = simulate_adc(&scene, &w, &geometry, seed).unwrap();
            let cube = process_frame(&frame, &pipeline).unwrap();
            let (r, a, d) = cube.argmax();
            let rt = range_truth(&w, range, pipeline.range_fft);
            let at = sine_truth(
                az.to_radians().sin(),
                pipeline.azimuth_fft,
                pipeline.azimuth_fov_deg,
            );
            let ok =
                r.abs_diff(rt) <= 1 && a.abs_diff(at) <= 1 && (cube.velocity[d] - v).abs() <= dv;
            (!ok).then(|| {
                format!(
                    "R {range:.2} az {az:.1} v {v:.2}: bins r {r}/{rt} a {a}/{at}, v {:.3}",
                    cube.velocity[d]
                )
            })
        })
        .collect();
    check!(
        failures.is_empty(),
        "{} of 100 off: {}",
        failures.len(),
        failures.join("; ")
    );
    Ok(format!(
        "100/100 scenes within one bin, {:.0} s",
        start.elapsed().as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 2

fn tdma_ab() -> Outcome {
    let w = WaveformConfig::imaging_radar();
    let geometry = ArrayGeometry::cascade();
    let pipeline = PipelineConfig::default();
    let dv = doppler_bin_width(&w, pipeline.doppler_fft);
    let v_max = C / (4.0 * w.start_frequency * w.n_tx as f64 * w.chirp_duration);
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC2);
    let cases: Vec<(f64, f64, u64)> = (0..20)
        .map(|i| {
            (
                rng.random_range(5.0..45.0),
                rng.random_range(-40.0..40.0),
                100 + i,
            )
        })
        .collect();
    let rows: Vec<(f64, f64, usize, usize, usize)> = cases
        .par_iter()
        .map(|&(range, az, seed)| {
            let scene = Scene::new(vec![target(range, az, 10.0)], 0.01);
            let frame = simulate_adc(&scene, &w, &geometry, seed).unwrap();
            let rdc = range_doppler_fft(&frame, pipeline.range_fft, pipeline.doppler_fft).unwrap();
            let raw = angle_process(&rdc, &pipeline).unwrap();
            let comp = angle_process(
                &tdma_compensate(&rdc, &pipeline.tdma_params).unwrap(),
                &pipeline,
            )
            .unwrap();
            let (_, a_raw, d_raw) = raw.argmax();
            let (_, a, d) = comp.argmax();
            let truth = sine_truth(
                az.to_radians().sin(),
                pipeline.azimuth_fft,
                pipeline.azimuth_fov_deg,
            );
            (
                rdc.velocity[d_raw],
                comp.velocity[d],
                a_raw.abs_diff(truth),
                a.abs_diff(truth),
                seed as usize,
            )
        })
        .collect();
    for (v_raw, v_ext, err_raw, err, seed) in &rows {
        check!(
            v_raw.abs() <= v_max,
            "trial {seed}: unextended velocity {v_raw:.3} outside +-{v_max:.2}"
        );
        check!(
            (v_ext - 10.0).abs() <= dv,
            "trial {seed}: extended velocity {v_ext:.3}"
        );
        check!(
            *err <= 1,
            "trial {seed}: compensated azimuth off by {err} bins"
        );
        check!(
            *err_raw > 2,
            "trial {seed}: uncompensated azimuth off by only {err_raw} bins"
        );
    }
    let worst = rows.iter().map(|r| r.3).max().unwrap();
    let least = rows.iter().map(|r| r.2).min().unwrap();
    Ok(format!(
        "20 trials: aliased to |v| <= {v_max:.2}, extended within {dv:.3} m/s; azimuth error <= {worst} bin compensated, >= {least} uncompensated"
    ))
}

// ---------------------------------------------------------------- 3

fn cfar_calibration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC3);
    let ca = CfarConfig::new(CfarKind::Ca, [8, 0], [2, 0], 1e-3);
    let (mut alarms, mut cells) = (0, 0);
    for _ in 0..1000 {
        let profile = exponential(&mut rng, 1000);
        alarms += count(&cfar_1d(&profile, &ca).unwrap());
        cells += profile.len();
    }
    let pfa_1d = alarms as f64 / cells as f64;
    let ca2 = CfarConfig::new(CfarKind::Ca, [8, 8], [2, 2], 1e-3);
    let m = exponential(&mut rng, 1000 * 1000);
    let pfa_2d = count(&cfar_2d(&m, 1000, 1000, &ca2).unwrap()) as f64 / 1e6;
    check!(cells >= 1_000_000, "only {cells} cells");
    for pfa in [pfa_1d, pfa_2d] {
        check!(
            (0.5e-3..=2e-3).contains(&pfa),
            "empirical Pfa {pfa:.2e} (1D {pfa_1d:.2e}, 2D {pfa_2d:.2e})"
        );
    }

    // Two equal targets three cells apart, each inside the other's window.
    let mut p = vec![1.0; 64];
    p[30] = 100.0;
    p[33] = 100.0;
    let ca = CfarConfig::new(CfarKind::Ca, [4, 0], [0, 0], 1e-3).with_scale(10.0);
    let os = CfarConfig::new(CfarKind::Os, [4, 0], [0, 0], 1e-3)
        .with_scale(10.0)
        .with_rank(0.75);
    let hits = |m: Vec<bool>| {
        (0..m.len())
            .filter(|&i| m[i] && (i == 30 || i == 33))
            .count()
    };
    let (ca_hits, os_hits) = (
        hits(cfar_1d(&p, &ca).unwrap()),
        hits(cfar_1d(&p, &os).unwrap()),
    );
    check!(
        os_hits == 2 && ca_hits <= 1,
        "masking: OS {os_hits}, CA {ca_hits} of 2"
    );
    Ok(format!(
        "Pfa 1D {pfa_1d:.2e}, 2D {pfa_2d:.2e} on 1e6 cells; masking OS 2/2, CA {ca_hits}/2"
    ))
}

// ---------------------------------------------------------------- 4

fn factor(config: &CfarConfig, n: usize, m: usize) -> f64 {
    if let Some(s) = config.threshold_scale {
        return s;
    }
    let pfa = config.pfa_design.unwrap();
    let k = os_rank(n, config.os_rank_fraction);
    match config.kind {
        CfarKind::Ca => ca_factor(n, pfa),
        CfarKind::Os => os_factor(n, k, pfa),
        CfarKind::Caos => caos_factor(m, n, k, pfa),
    }
}

fn kth(mut v: Vec<f64>, k: usize) -> f64 {
    v.sort_by(f64::total_cmp);
    v[k - 1]
}

fn naive_1d(p: &[f64], config: &CfarConfig) -> Vec<bool> {
    let (t, g, n) = (
        config.training[0] as i64,
        config.guard[0] as i64,
        p.len() as i64,
    );
    (0..n)
        .map(|i| {
            let training: Vec<f64> = (i - g - t..=i + g + t)
                .filter(|&j| j >= 0 && j < n && (j - i).abs() > g)
                .map(|j| p[j as usize])
                .collect();
            let stat = match config.kind {
                CfarKind::Ca => training.iter().sum::<f64>() / training.len() as f64,
                _ => kth(
                    training.clone(),
                    os_rank(training.len(), config.os_rank_fraction),
                ),
            };
            p[i as usize] > factor(config, training.len(), 1) * stat
        })
        .collect()
}

fn naive_2d(m: &[f64], rows: usize, cols: usize, config: &CfarConfig) -> Vec<bool> {
    let [t0, t1] = config.training.map(|v| v as i64);
    let [g0, g1] = config.guard.map(|v| v as i64);
    let inside = |v: i64, n: usize| v >= 0 && v < n as i64;
    let at = |r: i64, c: i64| m[r as usize * cols + c as usize];
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows as i64 {
        for j in 0..cols as i64 {
            let (stat, n, group) = if config.kind == CfarKind::Caos {
                let cs: Vec<i64> = (j - g1 - t1..=j + g1 + t1)
                    .filter(|&c| inside(c, cols))
                    .collect();
                let means: Vec<f64> = (i - g0 - t0..=i + g0 + t0)
                    .filter(|&r| inside(r, rows) && (r - i).abs() > g0)
                    .map(|r| cs.iter().map(|&c| at(r, c)).sum::<f64>() / cs.len() as f64)
                    .collect();
                let n = means.len();
                (kth(means, os_rank(n, config.os_rank_fraction)), n, cs.len())
            } else {
                let mut training = Vec::new();
                for r in i - g0 - t0..=i + g0 + t0 {
                    for c in j - g1 - t1..=j + g1 + t1 {
                        if inside(r, rows)
                            && inside(c, cols)
                            && !((r - i).abs() <= g0 && (c - j).abs() <= g1)
                        {
                            training.push(at(r, c));
                        }
                    }
                }
                let n = training.len();
                let stat = match config.kind {
                    CfarKind::Ca => training.iter().sum::<f64>() / n as f64,
                    _ => kth(training, os_rank(n, config.os_rank_fraction)),
                };
                (stat, n, 1)
            };
            out.push(at(i, j) > factor(config, n, group) * stat);
        }
    }
    out
}

fn cfar_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC4);
    let random_config = |rng: &mut ChaCha8Rng, kind| {
        let config = CfarConfig::new(
            kind,
            [rng.random_range(1..6), rng.random_range(1..6)],
            [rng.random_range(0..4), rng.random_range(0..4)],
            10f64.powf(-rng.random_range(2.0..5.0)),
        )
        .with_rank(rng.random_range(0.3..1.0));
        if rng.random_bool(0.3) {
            config.with_scale(rng.random_range(1.5..8.0))
        } else {
            config
        }
    };
    let mut flagged = 0;
    for case in 0..50 {
        let mut m = exponential(&mut rng, 64 * 64);
        for _ in 0..6 {
            let i = rng.random_range(0..m.len());
            m[i] *= rng.random_range(10.0..200.0);
        }
        for kind in [CfarKind::Ca, CfarKind::Os, CfarKind::Caos] {
            let config = random_config(&mut rng, kind);
            let fast = cfar_2d(&m, 64, 64, &config).unwrap();
            check!(
                fast == naive_2d(&m, 64, 64, &config),
                "2D case {case}: {config:?}"
            );
            flagged += count(&fast);
        }
        for kind in [CfarKind::Ca, CfarKind::Os] {
            let config = random_config(&mut rng, kind);
            for row in m.chunks(64) {
                check!(
                    cfar_1d(row, &config).unwrap() == naive_1d(row, &config),
                    "1D case {case}: {config:?}"
                );
            }
        }
    }
    Ok(format!(
        "50 inputs x (CA, OS, CAOS 2D + CA, OS 1D on every row) identical; {flagged} 2D detections"
    ))
}

// ---------------------------------------------------------------- 5

fn brute_chamfer(a: &PointCloud, b: &PointCloud, mode: ChamferMode) -> f64 {
    let one_sided = |from: &PointCloud, to: &PointCloud| {
        let mut total = 0.0;
        for p in &from.points {
            let mut best = f64::INFINITY;
            for q in &to.points {
                let (dx, dy, dz) = (q[0] - p[0], q[1] - p[1], q[2] - p[2]);
                best = best.min(dx * dx + dy * dy + dz * dz);
            }
            total += best;
        }
        match mode {
            ChamferMode::Sum => total,
            ChamferMode::Mean => total / from.len() as f64,
        }
    };
    let (x, y) = (one_sided(a, b), one_sided(b, a));
    x + y
}

fn chamfer_correctness() -> Outcome {
    use ChamferMode::{Mean, Sum};
    let cloud = |p: &[[f64; 3]]| PointCloud::new(p.to_vec());
    let origin = cloud(&[[0.0, 0.0, 0.0]]);
    let one = cloud(&[[1.0, 0.0, 0.0]]);
    let pair = cloud(&[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
    for (a, b, mode, expected) in [
        (&origin, &one, Sum, 2.0),
        (&origin, &one, Mean, 2.0),
        (&pair, &one, Sum, 3.0),
        (&pair, &one, Mean, 2.0),
    ] {
        let got = chamfer(a, b, mode).unwrap();
        check!(
            got == expected,
            "hand example {mode:?}: {got} != {expected}"
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC5);
    let mut random_cloud = |n| {
        PointCloud::new(
            (0..n)
                .map(|_| {
                    [
                        rng.random_range(-20.0..20.0),
                        rng.random_range(0.0..50.0),
                        rng.random_range(-3.0..3.0),
                    ]
                })
                .collect(),
        )
    };
    for pair in 0..20 {
        let (a, b) = (random_cloud(500), random_cloud(500));
        let tree = KdTree::new(&b.points);
        for p in &a.points {
            let brute = b
                .points
                .iter()
                .map(|q| (0..3).map(|k| (q[k] - p[k]).powi(2)).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            let (_, d2) = tree.nearest(p).unwrap();
            check!(d2 == brute, "pair {pair}: nearest {d2} != {brute}");
        }
        for mode in [Sum, Mean] {
            let fast = chamfer(&a, &b, mode).unwrap();
            check!(
                fast == brute_chamfer(&a, &b, mode),
                "pair {pair} {mode:?}: index != brute force"
            );
            check!(
                fast == chamfer(&b, &a, mode).unwrap(),
                "pair {pair} {mode:?}: not symmetric"
            );
            check!(
                chamfer(&a, &a, mode).unwrap() == 0.0,
                "pair {pair} {mode:?}: nonzero on itself"
            );
        }
    }
    Ok("4 hand examples exact; 20 pairs of 500 points equal brute force, symmetric, zero on identity".into())
}

// ---------------------------------------------------------------- 6

fn grid_round_trip() -> Outcome {
    use rdb_core::grid::{from_sine_space, to_sine_space};
    let spec = PipelineConfig::default()
        .grid_spec(&WaveformConfig::imaging_radar())
        .unwrap();
    let last = |e: &[f64]| *e.last().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xACC6);
    let points: Vec<[f64; 3]> = (0..1000)
        .map(|_| {
            from_sine_space(
                rng.random_range(0.5..last(&spec.range_edges) - 0.01),
                rng.random_range(spec.sin_az_edges[0]..last(&spec.sin_az_edges)),
                rng.random_range(spec.sin_el_edges[0]..last(&spec.sin_el_edges)),
            )
        })
        .collect();
    let grid = voxelize(&PointCloud::new(points.clone()), &spec);
    let back = grid_to_points(&grid);
    check!(
        back.len() == grid.count(),
        "{} points from {} voxels",
        back.len(),
        grid.count()
    );
    // Every input point lies within half a cell of the centre returned for
    // its voxel, measured along each sine-space axis from the edges.
    let centres: Vec<(f64, f64, f64)> = back
        .points
        .iter()
        .map(|c| to_sine_space(c).unwrap())
        .collect();
    let bracket = |e: &[f64], v: f64| {
        (0..e.len() - 1)
            .find(|&i| e[i] <= v && v <= e[i + 1])
            .unwrap()
    };
    for p in &points {
        let (r, sa, se) = to_sine_space(p).unwrap();
        let (i, j, k) = (
            bracket(&spec.range_edges, r),
            bracket(&spec.sin_az_edges, sa),
            bracket(&spec.sin_el_edges, se),
        );
        let half = |e: &[f64], i: usize| (e[i + 1] - e[i]) / 2.0 + 1e-9;
        let found = centres.iter().any(|&(cr, ca, ce)| {
            (cr - r).abs() <= half(&spec.range_edges, i)
                && (ca - sa).abs() <= half(&spec.sin_az_edges, j)
                && (ce - se).abs() <= half(&spec.sin_el_edges, k)
        });
        check!(found, "no voxel centre within half a cell of {p:?}");
    }
    check!(
        voxelize(&back, &spec) == grid,
        "re-voxelization changed the grid"
    );
    Ok(format!(
        "1000 points -> {} voxels, all within half a cell; re-voxelization is a fixed point",
        grid.count()
    ))
}

// ---------------------------------------------------------------- 7

fn ground_removal() -> Outcome {
    let fov = Fov::default();
    let ground_scene = Scene {
        ground_plane: Some(GroundPlane {
            z_offset: -1.5,
            density: 5.0,
        }),
        ..Scene::new(vec![], 0.0)
    };
    // A car-sized box with 0.3 m ground clearance.
    let car = Scatterer {
        extent: [1.0, 2.0, 0.75],
        ..Scatterer::point([2.0, 15.0, -0.45], 10.0)
    };
    let ground = sample_lidar(&ground_scene, &fov, 100.0, 1).unwrap();
    let object = sample_lidar(&Scene::new(vec![car], 0.0), &fov, 100.0, 2).unwrap();
    let key = |p: &[f64; 3]| p.map(f64::to_bits);
    let mut cloud = ground.points.clone();
    cloud.extend(&object.points);
    let out = remove_ground(&PointCloud::new(cloud), &GroundParams::default());
    let kept: HashSet<[u64; 3]> = out.cloud.points.iter().map(key).collect();
    let ground_kept = ground
        .points
        .iter()
        .filter(|p| kept.contains(&key(p)))
        .count();
    let object_kept = object
        .points
        .iter()
        .filter(|p| kept.contains(&key(p)))
        .count();
    let removed = 1.0 - ground_kept as f64 / ground.len() as f64;
    let retained = object_kept as f64 / object.len() as f64;
    check!(
        removed >= 0.99 && retained >= 0.99,
        "ground removed {:.2}%, object retained {:.2}%",
        100.0 * removed,
        100.0 * retained
    );
    Ok(format!(
        "{} ground / {} object points: {:.2}% ground removed, {:.2}% object retained",
        ground.len(),
        object.len(),
        100.0 * removed,
        100.0 * retained
    ))
}

// ---------------------------------------------------------------- 8

fn sweep_shape() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_rdb"))
        .args(["sweep", "--frames", "50", "--seed", "0", "--out-dir"])
        .arg(dir.path())
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    check!(
        out.status.success(),
        "rdb sweep failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let read =
        |name: &str| std::fs::read_to_string(dir.path().join(name)).map_err(|e| e.to_string());
    let fields = |line: &str| {
        line.split(',')
            .map(|f| f.trim_matches('"').to_string())
            .collect::<Vec<_>>()
    };

    let ranked = read("sweep.csv")?;
    let rows: Vec<Vec<String>> = ranked.lines().skip(1).map(fields).collect();
    check!(
        ranked.starts_with("rank,detector,pd,pfa,chamfer,"),
        "header {:?}",
        ranked.lines().next()
    );
    check!(rows.len() == 5, "{} ranked rows", rows.len());
    let names: HashSet<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    check!(
        BASELINE_CASCADES.iter().all(|n| names.contains(n)),
        "cascades {names:?}"
    );
    let chamfers: Vec<f64> = rows
        .iter()
        .map(|r| r[4].parse().unwrap_or(f64::INFINITY))
        .collect();
    check!(
        rows.iter()
            .enumerate()
            .all(|(i, r)| r[0] == (i + 1).to_string())
            && chamfers.windows(2).all(|w| w[0] <= w[1]),
        "rows not ranked by Chamfer: {chamfers:?}"
    );
    for r in &rows {
        let pd: f64 = r[2].parse().map_err(|_| format!("pd {:?}", r[2]))?;
        let pfa: f64 = r[3].parse().map_err(|_| format!("pfa {:?}", r[3]))?;
        check!(
            (0.0..=1.0).contains(&pd) && (0.0..=1.0).contains(&pfa),
            "{}: pd {pd}, pfa {pfa}",
            r[1]
        );
    }

    let frames = read("sweep_frames.csv")?;
    let header = fields(frames.lines().next().unwrap_or_default());
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or(format!("no {name} column"))
    };
    let (radar, lidar) = (col("radar_points")?, col("lidar_points")?);
    let mut denser: Vec<(String, usize)> = Vec::new();
    let mut total = 0;
    for line in frames.lines().skip(1) {
        let f = fields(line);
        total += 1;
        if f[radar].parse::<usize>().unwrap() >= f[lidar].parse::<usize>().unwrap() {
            match denser.iter_mut().find(|(n, _)| *n == f[0]) {
                Some((_, c)) => *c += 1,
                None => denser.push((f[0].clone(), 1)),
            }
        }
    }
    check!(total == 250, "{total} frame rows, expected 5 x 50");
    let summary = rows
        .iter()
        .map(|r| {
            format!(
                "{} Pd {:.3} Pfa {:.1e} Chamfer {:.1}",
                r[1],
                r[2].parse::<f64>().unwrap(),
                r[3].parse::<f64>().unwrap(),
                chamfers[r[0].parse::<usize>().unwrap() - 1]
            )
        })
        .collect::<Vec<_>>()
        .join(" | ");
    let not_sparser: Vec<String> = denser
        .iter()
        .map(|(n, c)| format!("{n}: {c}/50 frames"))
        .collect();
    check!(
        denser.is_empty(),
        "ranked CSV ok ({summary}); detection count >= lidar point count on {}",
        not_sparser.join(", ")
    );
    Ok(format!(
        "{summary}; sparser than lidar on all 250 frame runs, {:.0} s",
        start.elapsed().as_secs_f64()
    ))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("DSP range/velocity/azimuth recovery", dsp_recovery),
        ("TDMA extension and migration compensation A/B", tdma_ab),
        ("CFAR Pfa calibration and masking", cfar_calibration),
        ("CFAR brute-force equivalence", cfar_equivalence),
        ("Chamfer correctness", chamfer_correctness),
        ("Grid round trip", grid_round_trip),
        ("Ground removal", ground_removal),
        ("Sweep over the five cascades", sweep_shape),
    ];
    let selected: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !selected.is_empty() && !selected.contains(&(i + 1)) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or(e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}. {name}: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
