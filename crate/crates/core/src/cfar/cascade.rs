use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::window::{cfar_1d, cfar_2d, peak_detect_1d};
use super::{CfarConfig, CfarKind, Detection};
use crate::dsp::RadarCube;
use crate::error::{Error, Result};

/// The five CFAR cascades compared against the learned detector.
pub const BASELINE_CASCADES: [&str; 5] = [
    "2D OS(RA) + 1D OS(D)",
    "2D OS(RD) + 1D OS(A)",
    "2D CAOS(RA) + 1D OS(D)",
    "2D CAOS(RA) + Peak Detector(D)",
    "2D CAOS(RD) + Peak Detector(A)",
];

/// Plane searched by the first stage; the third axis is collapsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    /// Range-azimuth; stage 2 runs along Doppler.
    RangeAzimuth,
    /// Range-Doppler; stage 2 runs along azimuth.
    RangeDoppler,
}

impl Plane {
    fn tag(self) -> &'static str {
        match self {
            Plane::RangeAzimuth => "RA",
            Plane::RangeDoppler => "RD",
        }
    }

    fn remaining(self) -> &'static str {
        match self {
            Plane::RangeAzimuth => "D",
            Plane::RangeDoppler => "A",
        }
    }
}

/// How the collapsed axis is reduced before the first stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    #[default]
    Max,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage1 {
    pub plane: Plane,
    pub config: CfarConfig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stage2 {
    Cfar(CfarConfig),
    Peak { drop_db: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cascade {
    pub stage1: Stage1,
    pub stage2: Stage2,
    pub aggregation: Aggregation,
    /// Keep only detections that are maxima of the cube over a box of
    /// `local_max_radius` cells per side.
    pub local_max: bool,
    /// Half-widths in range, azimuth and Doppler bins.
    pub local_max_radius: [usize; 3],
}

impl fmt::Display for Cascade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let plane = self.stage1.plane;
        write!(f, "2D {}({}) + ", self.stage1.config.kind, plane.tag())?;
        match self.stage2 {
            Stage2::Cfar(c) => write!(f, "1D {}({})", c.kind, plane.remaining()),
            Stage2::Peak { .. } => write!(f, "Peak Detector({})", plane.remaining()),
        }
    }
}

/// Window settings of one stage as written in a detector file; the kind
/// comes from the cascade name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageWindow {
    pub training: [usize; 2],
    #[serde(default)]
    pub guard: [usize; 2],
    #[serde(default)]
    pub pfa_design: Option<f64>,
    #[serde(default)]
    pub threshold_scale: Option<f64>,
    #[serde(default = "super::default_rank")]
    pub os_rank_fraction: f64,
}

impl StageWindow {
    fn with_kind(self, kind: CfarKind) -> CfarConfig {
        CfarConfig {
            kind,
            training: self.training,
            guard: self.guard,
            pfa_design: self.pfa_design,
            threshold_scale: self.threshold_scale,
            os_rank_fraction: self.os_rank_fraction,
        }
    }
}

/// Detector file contents:
///
/// ```toml
/// cascade = "2D OS(RA) + 1D OS(D)"
/// aggregation = "max"
/// local_max = true
/// local_max_radius = [1, 5, 12]
///
/// [stage1]
/// training = [8, 8]
/// pfa_design = 1e-4
///
/// [stage2]
/// training = [8, 0]
/// guard = [24, 0]
/// pfa_design = 1e-4
/// ```
///
/// `stage2` is ignored for peak-detector cascades.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub cascade: String,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default = "default_drop")]
    pub peak_drop_db: f64,
    #[serde(default)]
    pub local_max: bool,
    #[serde(default = "default_radius")]
    pub local_max_radius: [usize; 3],
    pub stage1: StageWindow,
    #[serde(default)]
    pub stage2: Option<StageWindow>,
}

fn default_drop() -> f64 {
    10.0
}

// Azimuth is not tapered, so its first sidelobes sit about 4.5 bins from
// the peak. Along Doppler the box spans one resolution cell of the default
// 128-point FFT over 10 chirps: the top of a moving target's lobe is ragged
// because compensation and the elevation maximum change from bin to bin.
fn default_radius() -> [usize; 3] {
    [1, 5, 12]
}

impl DetectorConfig {
    /// Default settings for a named cascade: 2D OS stages use no guard
    /// cells and rank 0.75; CA-type stages guard 10 range and 16
    /// azimuth/Doppler cells; 1D stages guard 24 cells.
    pub fn preset(cascade: &str) -> Result<Self> {
        let (kind1, _, second) = parse_name(cascade)?;
        let stage1 = match kind1 {
            CfarKind::Os => StageWindow {
                training: [8, 8],
                guard: [0, 0],
                pfa_design: Some(1e-4),
                threshold_scale: None,
                os_rank_fraction: 0.75,
            },
            _ => StageWindow {
                training: [8, 8],
                guard: [10, 16],
                pfa_design: Some(1e-4),
                threshold_scale: None,
                os_rank_fraction: 0.75,
            },
        };
        // The 128-point Doppler FFT over 10 chirps per transmitter spreads
        // a target's main lobe over about 50 bins; without guard cells the
        // whole training window sits inside it.
        let stage2 = second.map(|_| StageWindow {
            training: [8, 0],
            guard: [24, 0],
            pfa_design: Some(1e-4),
            threshold_scale: None,
            os_rank_fraction: 0.75,
        });
        Ok(Self {
            cascade: cascade.to_string(),
            aggregation: Aggregation::Max,
            peak_drop_db: default_drop(),
            local_max: false,
            local_max_radius: default_radius(),
            stage1,
            stage2,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("detector config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.into(),
            message: e.to_string(),
        })
    }

    pub fn build(&self) -> Result<Cascade> {
        let (kind1, plane, second) = parse_name(&self.cascade)?;
        let stage1 = Stage1 {
            plane,
            config: self.stage1.with_kind(kind1),
        };
        stage1.config.validate()?;
        let stage2 = match second {
            Some(kind) => {
                let window = self.stage2.ok_or_else(|| {
                    Error::Config(format!("{:?} needs a [stage2] table", self.cascade))
                })?;
                let config = window.with_kind(kind);
                config.validate()?;
                Stage2::Cfar(config)
            }
            None => Stage2::Peak {
                drop_db: self.peak_drop_db,
            },
        };
        Ok(Cascade {
            stage1,
            stage2,
            aggregation: self.aggregation,
            local_max: self.local_max,
            local_max_radius: self.local_max_radius,
        })
    }
}

/// Parses names like `"2D OS(RA) + 1D OS(D)"` or
/// `"2D CAOS(RD) + Peak Detector(A)"`. Returns the first-stage kind and
/// plane and the second-stage kind (`None` for the peak detector).
fn parse_name(name: &str) -> Result<(CfarKind, Plane, Option<CfarKind>)> {
    let unknown = || Error::UnknownCascade(name.to_string());
    let compact: String = name.split_whitespace().collect::<Vec<_>>().join(" ");
    let (first, second) = compact.split_once('+').ok_or_else(unknown)?;
    let call = |s: &str| -> Option<(String, String)> {
        let s = s.trim();
        let open = s.find('(')?;
        let inner = s.strip_suffix(')')?.get(open + 1..)?;
        Some((s[..open].trim().to_string(), inner.trim().to_string()))
    };
    let kind = |s: &str| match s {
        "CA" => Some(CfarKind::Ca),
        "OS" => Some(CfarKind::Os),
        "CAOS" => Some(CfarKind::Caos),
        _ => None,
    };

    let (head, plane) = call(first).ok_or_else(unknown)?;
    let kind1 = kind(head.strip_prefix("2D ").ok_or_else(unknown)?).ok_or_else(unknown)?;
    let plane = match plane.as_str() {
        "RA" => Plane::RangeAzimuth,
        "RD" => Plane::RangeDoppler,
        _ => return Err(unknown()),
    };
    let (head, axis) = call(second).ok_or_else(unknown)?;
    if axis != plane.remaining() {
        return Err(unknown());
    }
    let kind2 = if head == "Peak Detector" {
        None
    } else {
        let k = kind(head.strip_prefix("1D ").ok_or_else(unknown)?).ok_or_else(unknown)?;
        if k == CfarKind::Caos {
            return Err(unknown());
        }
        Some(k)
    };
    Ok((kind1, plane, kind2))
}

/// Runs a 2D + 1D cascade over a radar cube.
///
/// Stage 1 works on the plane left after collapsing the third axis of the
/// linear power cube. Every stage-1 hit then gets a 1D CFAR or a peak
/// search along the collapsed axis; the surviving cells are returned in
/// `(range, azimuth, Doppler)` order with their elevation index and power.
pub fn cascade_detect(cube: &RadarCube, cascade: &Cascade) -> Result<Vec<Detection>> {
    cube.validate()?;
    let (nr, na, nd) = cube.dims();
    let linear: Vec<f64> = cube
        .power_db
        .par_iter()
        .map(|&p| 10f64.powf(p as f64 / 10.0))
        .collect();
    let (n_cols, n_third) = match cascade.stage1.plane {
        Plane::RangeAzimuth => (na, nd),
        Plane::RangeDoppler => (nd, na),
    };
    // Cube index of (range, plane column, position along the third axis).
    let at = |r: usize, col: usize, k: usize| match cascade.stage1.plane {
        Plane::RangeAzimuth => (r * na + col) * nd + k,
        Plane::RangeDoppler => (r * na + k) * nd + col,
    };

    let plane: Vec<f64> = (0..nr * n_cols)
        .into_par_iter()
        .map(|i| {
            let (r, col) = (i / n_cols, i % n_cols);
            let values = (0..n_third).map(|k| linear[at(r, col, k)]);
            match cascade.aggregation {
                Aggregation::Max => values.fold(f64::NEG_INFINITY, f64::max),
                Aggregation::Mean => values.sum::<f64>() / n_third as f64,
            }
        })
        .collect();
    let hits = cfar_2d(&plane, nr, n_cols, &cascade.stage1.config)?;

    let hit_cells: Vec<usize> = (0..hits.len()).filter(|&i| hits[i]).collect();
    let per_hit: Vec<Vec<usize>> = hit_cells
        .par_iter()
        .map(|&i| -> Result<Vec<usize>> {
            let (r, col) = (i / n_cols, i % n_cols);
            let mask = match cascade.stage2 {
                Stage2::Cfar(config) => {
                    let profile: Vec<f64> = (0..n_third).map(|k| linear[at(r, col, k)]).collect();
                    cfar_1d(&profile, &config)?
                }
                Stage2::Peak { drop_db } => {
                    let profile: Vec<f64> = (0..n_third)
                        .map(|k| cube.power_db[at(r, col, k)] as f64)
                        .collect();
                    peak_detect_1d(&profile, drop_db)
                }
            };
            Ok((0..n_third)
                .filter(|&k| mask[k])
                .map(|k| at(r, col, k))
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut cells: Vec<usize> = per_hit.into_iter().flatten().collect();
    cells.sort_unstable();
    if cascade.local_max {
        cells.retain(|&i| is_local_max(cube, i, cascade.local_max_radius));
    }
    Ok(cells
        .into_iter()
        .map(|i| Detection {
            range_bin: i / (na * nd),
            azimuth_bin: (i / nd) % na,
            doppler_bin: i % nd,
            elevation_bin: cube.elevation[i],
            power_db: cube.power_db[i],
        })
        .collect())
}

/// Whether cell `i` beats every other cell of the box around it; ties go
/// to the lower index.
fn is_local_max(cube: &RadarCube, i: usize, radius: [usize; 3]) -> bool {
    let (nr, na, nd) = cube.dims();
    let (r, a, d) = (i / (na * nd), (i / nd) % na, i % nd);
    let p = cube.power_db[i];
    let near = |c: usize, k: usize, n: usize| c.saturating_sub(k)..(c + k + 1).min(n);
    for rr in near(r, radius[0], nr) {
        for aa in near(a, radius[1], na) {
            for dd in near(d, radius[2], nd) {
                let j = cube.index(rr, aa, dd);
                let q = cube.power_db[j];
                if (j < i && q >= p) || (j > i && q > p) {
                    return false;
                }
            }
        }
    }
    true
}
