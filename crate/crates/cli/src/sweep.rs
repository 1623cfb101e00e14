//! Runs several detectors over one synthetic test set and ranks them.
//!
//! Frames are generated, processed and scored one at a time per worker, so
//! memory stays at one radar cube per thread.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;
use log::info;
use rayon::prelude::*;
use rdb_core::io;
use rdb_core::metrics::FrameEval;
use rdb_core::prelude::*;

use crate::commands::{frame_name, frame_scene, load_detector};
use crate::config::{frame_seeds, RunConfig};

struct FrameResult {
    eval: FrameEval,
    /// Flagged cube cells, Doppler included.
    cells: usize,
    lidar_points: usize,
}

struct Ranked {
    name: String,
    report: EvalReport,
    frames: Vec<FrameResult>,
}

fn run_frame(
    i: usize,
    config: &RunConfig,
    seed: u64,
    detectors: &[(String, rdb_core::cfar::Cascade)],
    mode: ChamferMode,
) -> Result<Vec<FrameResult>> {
    let name = frame_name(i);
    let seeds = frame_seeds(seed, i);
    let scene = frame_scene(None, config, seed, i);
    let frame = simulate_adc(&scene, &config.waveform, &config.geometry, seeds.radar)?;
    let cube = process_frame(&frame, &config.pipeline)?;
    drop(frame);
    let spec = cube.grid_spec()?;
    let lidar = sample_lidar(&scene, &Fov::default(), config.lidar_density, seeds.lidar)?;
    let gt_cloud = remove_ground(&lidar, &config.ground_removal).cloud;
    let gt = voxelize(&gt_cloud, &spec);

    let results = detectors
        .iter()
        .map(|(_, cascade)| -> Result<FrameResult> {
            let detections = cascade_detect(&cube, cascade)?;
            let pred = detections_to_grid(&detections, &spec)?;
            let eval = FrameEval::score(
                name.clone(),
                &pred,
                &gt,
                &grid_to_points(&pred),
                &gt_cloud,
                mode,
            )?;
            Ok(FrameResult {
                eval,
                cells: detections.len(),
                lidar_points: lidar.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    info!(
        "{name}: {} lidar points, radar points per detector {:?}",
        lidar.len(),
        results
            .iter()
            .map(|r| r.eval.pred_points)
            .collect::<Vec<_>>()
    );
    Ok(results)
}

/// Lowest mean Chamfer first, then highest Pd; undefined Chamfer last.
fn rank(rows: &mut [Ranked]) {
    rows.sort_by(|a, b| {
        let key = |r: &Ranked| r.report.chamfer().unwrap_or(f64::INFINITY);
        key(a)
            .total_cmp(&key(b))
            .then(b.report.pd().total_cmp(&a.report.pd()))
    });
}

pub const RANKED_HEADER: &str =
    "rank,detector,pd,pfa,chamfer,mean_radar_points,mean_cells,mean_lidar_points,sparser_frames,frames";
pub const FRAMES_HEADER: &str =
    "detector,frame,pd,pfa,chamfer,radar_points,cells,lidar_points,gt_points";

pub fn sweep(
    config: &RunConfig,
    detector_specs: &[String],
    frames: usize,
    seed: u64,
    mode: ChamferMode,
    out: &Path,
) -> Result<()> {
    anyhow::ensure!(frames > 0, "--frames must be at least 1");
    let detectors = detector_specs
        .iter()
        .map(|s| {
            let d = load_detector(s)?;
            Ok((d.cascade.clone(), d.build()?))
        })
        .collect::<Result<Vec<_>>>()?;

    let per_frame = (0..frames)
        .into_par_iter()
        .map(|i| run_frame(i, config, seed, &detectors, mode))
        .collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<Ranked> = detectors
        .iter()
        .enumerate()
        .map(|(k, (name, _))| {
            let frames: Vec<FrameResult> = per_frame
                .iter()
                .map(|f| {
                    let r = &f[k];
                    FrameResult {
                        eval: r.eval.clone(),
                        cells: r.cells,
                        lidar_points: r.lidar_points,
                    }
                })
                .collect();
            Ranked {
                name: name.clone(),
                report: EvalReport::new(frames.iter().map(|f| f.eval.clone()).collect()),
                frames,
            }
        })
        .collect();
    rank(&mut rows);

    let n = frames as f64;
    let mut ranked = format!("{RANKED_HEADER}\n");
    let mut detail = format!("{FRAMES_HEADER}\n");
    for (i, row) in rows.iter().enumerate() {
        let mean =
            |f: fn(&FrameResult) -> usize| row.frames.iter().map(f).sum::<usize>() as f64 / n;
        let sparser = row
            .frames
            .iter()
            .filter(|f| f.eval.pred_points < f.lidar_points)
            .count();
        let _ = writeln!(
            ranked,
            "{},\"{}\",{},{},{},{},{},{},{sparser},{frames}",
            i + 1,
            row.name,
            row.report.pd(),
            row.report.pfa(),
            row.report
                .chamfer()
                .map(|v| v.to_string())
                .unwrap_or_default(),
            mean(|f| f.eval.pred_points),
            mean(|f| f.cells),
            mean(|f| f.lidar_points),
        );
        for f in &row.frames {
            let e = &f.eval;
            let _ = writeln!(
                detail,
                "\"{}\",{},{},{},{},{},{},{},{}",
                row.name,
                e.frame,
                e.counts.pd(),
                e.counts.pfa(),
                e.chamfer.map(|v| v.to_string()).unwrap_or_default(),
                e.pred_points,
                f.cells,
                f.lidar_points,
                e.gt_points,
            );
        }
    }
    io::write_atomic(out.join("sweep_frames.csv"), detail.as_bytes())?;
    io::write_atomic(out.join("sweep.csv"), ranked.as_bytes())?;
    Ok(())
}
