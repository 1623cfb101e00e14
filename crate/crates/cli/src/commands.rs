use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use log::info;
use rayon::prelude::*;
use rdb_core::cfar::Detection;
use rdb_core::io::{self, Artifact};
use rdb_core::metrics::FrameEval;
use rdb_core::prelude::*;

use crate::config::{frame_seeds, RunConfig};

/// `frame_0003.adc.rcb` -> `frame_0003`.
pub fn stem(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.split('.').next().unwrap_or_default().to_string()
}

pub fn frame_name(i: usize) -> String {
    format!("frame_{i:04}")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    io::write_atomic(path, text.as_bytes())?;
    Ok(())
}

/// Loads a preset name or a detector TOML file.
pub fn load_detector(spec: &str) -> Result<DetectorConfig> {
    let path = Path::new(spec);
    if path.is_file() {
        return Ok(DetectorConfig::load(path)?);
    }
    DetectorConfig::preset(spec)
        .with_context(|| format!("{spec:?} is neither a detector file nor a preset"))
}

/// The scene of one frame: the scene file advanced in time, or a fresh
/// random street.
pub fn frame_scene(scene: Option<&Scene>, config: &RunConfig, seed: u64, i: usize) -> Scene {
    match scene {
        Some(s) => s.advanced(i as f64 * config.frame_period),
        None => Scene::random_street(&mut frame_seeds(seed, i).scene, &config.street),
    }
}

pub fn simulate(
    scene_path: Option<&Path>,
    config: &RunConfig,
    frames: usize,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let scene = scene_path.map(Scene::load).transpose()?;
    let fov = Fov::default();
    (0..frames).into_par_iter().try_for_each(|i| -> Result<()> {
        let name = frame_name(i);
        let seeds = frame_seeds(seed, i);
        let scene = frame_scene(scene.as_ref(), config, seed, i);
        let frame = simulate_adc(&scene, &config.waveform, &config.geometry, seeds.radar)?;
        let lidar = sample_lidar(&scene, &fov, config.lidar_density, seeds.lidar)?;
        io::write_artifact(out.join(format!("{name}.adc.rcb")), &Artifact::Adc(frame))?;
        io::write_artifact(
            out.join(format!("{name}.lidar.rcb")),
            &Artifact::PointCloud(lidar),
        )?;
        write_text(&out.join(format!("{name}.scene.toml")), &scene.to_toml())?;
        info!("simulated {name}");
        Ok(())
    })
}

pub fn process(inputs: &[PathBuf], config: &RunConfig, out: &Path) -> Result<()> {
    inputs.par_iter().try_for_each(|path| -> Result<()> {
        let frame = io::read_adc(path)?;
        let cube = process_frame(&frame, &config.pipeline)
            .with_context(|| format!("processing {}", path.display()))?;
        io::write_artifact(
            out.join(format!("{}.cube.rcb", stem(path))),
            &Artifact::RadarCube(cube),
        )?;
        info!("processed {}", path.display());
        Ok(())
    })
}

pub fn detections_csv(cube: &RadarCube, detections: &[Detection]) -> String {
    let mut out = String::from("range_bin,azimuth_bin,doppler_bin,elevation_bin,power_db,range_m,sin_azimuth,velocity_mps,sin_elevation\n");
    let centre = |edges: &[f64], i: usize| 0.5 * (edges[i] + edges[i + 1]);
    for d in detections {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            d.range_bin,
            d.azimuth_bin,
            d.doppler_bin,
            d.elevation_bin,
            d.power_db,
            centre(&cube.range_edges, d.range_bin),
            centre(&cube.sin_az_edges, d.azimuth_bin),
            cube.velocity[d.doppler_bin],
            centre(&cube.sin_el_edges, d.elevation_bin as usize),
        );
    }
    out
}

pub fn detect(inputs: &[PathBuf], detector: &str, out: &Path) -> Result<()> {
    let cascade = load_detector(detector)?.build()?;
    inputs.par_iter().try_for_each(|path| -> Result<()> {
        let cube = io::read_radar_cube(path)?;
        let detections = cascade_detect(&cube, &cascade)?;
        let grid = detections_to_grid(&detections, &cube.grid_spec()?)?;
        let name = stem(path);
        write_text(
            &out.join(format!("{name}.det.csv")),
            &detections_csv(&cube, &detections),
        )?;
        io::write_artifact(out.join(format!("{name}.pred.rcb")), &Artifact::Grid(grid))?;
        info!("{}: {} detections", path.display(), detections.len());
        Ok(())
    })
}

pub fn voxelize_clouds(
    inputs: &[PathBuf],
    config: &RunConfig,
    remove: bool,
    out: &Path,
) -> Result<()> {
    let spec = config.grid_spec()?;
    inputs.par_iter().try_for_each(|path| -> Result<()> {
        let mut cloud = io::read_point_cloud(path)?;
        if remove {
            let removal = remove_ground(&cloud, &config.ground_removal);
            if removal.no_ground_found {
                log::warn!("{}: no ground plane found", path.display());
            }
            cloud = removal.cloud;
        }
        let grid = voxelize(&cloud, &spec);
        io::write_artifact(
            out.join(format!("{}.gt.rcb", stem(path))),
            &Artifact::Grid(grid),
        )?;
        Ok(())
    })
}

/// A grid and the cloud it is compared as; clouds are voxelized on the
/// partner's grid.
fn grid_and_cloud(
    artifact: Artifact,
    spec: Option<&GridSpec>,
    path: &Path,
) -> Result<(Option<OccupancyGrid>, PointCloud)> {
    match artifact {
        Artifact::Grid(g) => {
            let cloud = grid_to_points(&g);
            Ok((Some(g), cloud))
        }
        Artifact::PointCloud(c) => Ok((spec.map(|s| voxelize(&c, s)), c)),
        other => bail!(
            "{}: expected an occupancy grid or point cloud, found {}",
            path.display(),
            other.kind()
        ),
    }
}

pub fn evaluate(
    pred: &[PathBuf],
    gt: &[PathBuf],
    mode: ChamferMode,
    out: Option<&Path>,
) -> Result<()> {
    ensure!(!pred.is_empty(), "no prediction files given");
    ensure!(
        pred.len() == gt.len(),
        "{} prediction files but {} ground-truth files",
        pred.len(),
        gt.len()
    );
    let frames = pred
        .par_iter()
        .zip(gt)
        .map(|(p, g)| -> Result<FrameEval> {
            let (pa, ga) = (io::read_artifact(p)?, io::read_artifact(g)?);
            let spec = match (&pa, &ga) {
                (Artifact::Grid(x), _) | (_, Artifact::Grid(x)) => x.spec().clone(),
                _ => bail!(
                    "{} and {} are both point clouds; one side must be a grid",
                    p.display(),
                    g.display()
                ),
            };
            let (pred_grid, pred_cloud) = grid_and_cloud(pa, Some(&spec), p)?;
            let (gt_grid, gt_cloud) = grid_and_cloud(ga, Some(&spec), g)?;
            let (pred_grid, gt_grid) =
                (pred_grid.expect("spec given"), gt_grid.expect("spec given"));
            FrameEval::score(stem(p), &pred_grid, &gt_grid, &pred_cloud, &gt_cloud, mode)
                .with_context(|| format!("scoring {} against {}", p.display(), g.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let csv = EvalReport::new(frames).to_csv();
    match out {
        Some(dir) => write_text(&dir.join("eval.csv"), &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}
