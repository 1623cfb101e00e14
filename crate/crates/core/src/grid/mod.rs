//! Spherical voxel grids shared by the radar cube and the lidar ground truth.
//!
//! Angles live in sine space: `sin_az = x / r` and `sin_el = z / r`, the
//! direction cosines an FFT over a planar array measures directly. Grid
//! cells are uniform in those sines, which makes them narrower (in degrees)
//! at boresight than at the edge of the field of view.

mod ground;

pub use ground::{remove_ground, GroundParams, GroundRemoval, Plane};

use serde::{Deserialize, Serialize};

use crate::cfar::Detection;
use crate::error::{Error, Result};
use crate::scene::{norm, Point3};

/// `(range, sin_az, sin_el)` of a Cartesian point; `None` at the origin.
pub fn to_sine_space(p: &Point3) -> Option<(f64, f64, f64)> {
    let r = norm(p);
    (r > 0.0).then(|| (r, p[0] / r, p[2] / r))
}

/// Inverse of [`to_sine_space`] for points in front of the sensor.
pub fn from_sine_space(range: f64, sin_az: f64, sin_el: f64) -> Point3 {
    let forward = (1.0 - sin_az * sin_az - sin_el * sin_el).max(0.0).sqrt();
    [range * sin_az, range * forward, range * sin_el]
}

/// Sensor field of view: azimuth and elevation half-angles and a range cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fov {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub max_range: f64,
}

impl Default for Fov {
    fn default() -> Self {
        Self {
            azimuth_deg: 70.0,
            elevation_deg: 20.0,
            max_range: 50.0,
        }
    }
}

impl Fov {
    pub fn contains(&self, p: &Point3) -> bool {
        let Some((r, sa, se)) = to_sine_space(p) else {
            return false;
        };
        p[1] > 0.0
            && r <= self.max_range
            && sa.abs() <= self.azimuth_deg.to_radians().sin()
            && se.abs() <= self.elevation_deg.to_radians().sin()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Plain-text `x y z` lines for inspection in external viewers.
    pub fn to_ascii(&self) -> String {
        let mut out = String::with_capacity(self.points.len() * 32);
        for p in &self.points {
            out.push_str(&format!("{:.6} {:.6} {:.6}\n", p[0], p[1], p[2]));
        }
        out
    }
}

/// Keeps the points inside `fov`.
pub fn crop_fov(cloud: &PointCloud, fov: &Fov) -> PointCloud {
    PointCloud::new(
        cloud
            .points
            .iter()
            .copied()
            .filter(|p| fov.contains(p))
            .collect(),
    )
}

/// Bin edges of the non-uniform spherical grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub range_edges: Vec<f64>,
    pub sin_az_edges: Vec<f64>,
    pub sin_el_edges: Vec<f64>,
}

impl GridSpec {
    pub fn new(
        range_edges: Vec<f64>,
        sin_az_edges: Vec<f64>,
        sin_el_edges: Vec<f64>,
    ) -> Result<Self> {
        let spec = Self {
            range_edges,
            sin_az_edges,
            sin_el_edges,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Grid uniform in range over `(0, max_range]` and uniform in the sines
    /// of azimuth and elevation over the field of view.
    pub fn uniform(n_range: usize, n_az: usize, n_el: usize, fov: &Fov) -> Result<Self> {
        let lin = |lo: f64, hi: f64, n: usize| -> Vec<f64> {
            (0..=n)
                .map(|i| lo + (hi - lo) * i as f64 / n as f64)
                .collect()
        };
        let sa = fov.azimuth_deg.to_radians().sin();
        let se = fov.elevation_deg.to_radians().sin();
        Self::new(
            lin(0.0, fov.max_range, n_range),
            lin(-sa, sa, n_az),
            lin(-se, se, n_el),
        )
    }

    fn validate(&self) -> Result<()> {
        for (name, edges) in [
            ("range", &self.range_edges),
            ("sin azimuth", &self.sin_az_edges),
            ("sin elevation", &self.sin_el_edges),
        ] {
            if edges.len() < 2 {
                return Err(Error::Config(format!(
                    "{name} axis needs at least two edges"
                )));
            }
            if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config(format!(
                    "{name} edges must be finite and strictly increasing"
                )));
            }
        }
        for (name, edges) in [
            ("sin azimuth", &self.sin_az_edges),
            ("sin elevation", &self.sin_el_edges),
        ] {
            let (lo, hi) = (edges[0], edges[edges.len() - 1]);
            if lo < -1.0 || hi > 1.0 {
                return Err(Error::Config(format!("{name} edges must lie in [-1, 1]")));
            }
            let scale = hi.abs().max(lo.abs());
            if (lo + hi).abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::Config(format!(
                    "{name} edges must be symmetric about 0"
                )));
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (
            self.range_edges.len() - 1,
            self.sin_az_edges.len() - 1,
            self.sin_el_edges.len() - 1,
        )
    }

    pub fn n_cells(&self) -> usize {
        let (r, a, e) = self.dims();
        r * a * e
    }

    /// Voxel containing `p`. Bins are half-open `[low, high)` except the
    /// last bin of each axis, which also takes its upper edge.
    pub fn locate(&self, p: &Point3) -> Option<(usize, usize, usize)> {
        if p[1] <= 0.0 {
            return None;
        }
        let (r, sa, se) = to_sine_space(p)?;
        Some((
            bin(&self.range_edges, r)?,
            bin(&self.sin_az_edges, sa)?,
            bin(&self.sin_el_edges, se)?,
        ))
    }

    /// Centre of a voxel: mid range, and the angles whose sines are the
    /// mid sines.
    pub fn center(&self, r: usize, a: usize, e: usize) -> Point3 {
        let mid = |edges: &[f64], i: usize| 0.5 * (edges[i] + edges[i + 1]);
        from_sine_space(
            mid(&self.range_edges, r),
            mid(&self.sin_az_edges, a),
            mid(&self.sin_el_edges, e),
        )
    }

    /// Widths of a voxel along range, sin azimuth and sin elevation.
    pub fn cell_size(&self, r: usize, a: usize, e: usize) -> (f64, f64, f64) {
        (
            self.range_edges[r + 1] - self.range_edges[r],
            self.sin_az_edges[a + 1] - self.sin_az_edges[a],
            self.sin_el_edges[e + 1] - self.sin_el_edges[e],
        )
    }

    pub(crate) fn index(&self, r: usize, a: usize, e: usize) -> usize {
        let (_, na, ne) = self.dims();
        (r * na + a) * ne + e
    }
}

fn bin(edges: &[f64], v: f64) -> Option<usize> {
    let last = *edges.last()?;
    if !(v >= edges[0] && v <= last) {
        return None;
    }
    if v == last {
        return Some(edges.len() - 2);
    }
    Some(edges.partition_point(|&e| e <= v) - 1)
}

/// Binary occupancy over a [`GridSpec`], indexed `[range][azimuth][elevation]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    spec: GridSpec,
    words: Vec<u64>,
}

impl OccupancyGrid {
    pub fn empty(spec: GridSpec) -> Self {
        let words = vec![0; spec.n_cells().div_ceil(64)];
        Self { spec, words }
    }

    pub fn full(spec: GridSpec) -> Self {
        let mut grid = Self::empty(spec);
        let n = grid.spec.n_cells();
        for w in &mut grid.words {
            *w = u64::MAX;
        }
        if n % 64 != 0 {
            if let Some(last) = grid.words.last_mut() {
                *last = (1u64 << (n % 64)) - 1;
            }
        }
        grid
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.spec.dims()
    }

    pub fn get(&self, r: usize, a: usize, e: usize) -> bool {
        let i = self.spec.index(r, a, e);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, r: usize, a: usize, e: usize) {
        let i = self.spec.index(r, a, e);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    /// Set voxels as `(range, azimuth, elevation)` in index order.
    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let (_, na, ne) = self.dims();
        self.words.iter().enumerate().flat_map(move |(wi, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                let i = wi * 64 + bit;
                Some((i / (na * ne), (i / ne) % na, i % ne))
            })
        })
    }
}

/// Marks every voxel holding at least one point; points outside the grid
/// are ignored.
pub fn voxelize(cloud: &PointCloud, spec: &GridSpec) -> OccupancyGrid {
    let mut grid = OccupancyGrid::empty(spec.clone());
    for p in &cloud.points {
        if let Some((r, a, e)) = spec.locate(p) {
            grid.set(r, a, e);
        }
    }
    grid
}

/// One Cartesian point per occupied voxel, at the voxel centre.
pub fn grid_to_points(grid: &OccupancyGrid) -> PointCloud {
    PointCloud::new(
        grid.iter_set()
            .map(|(r, a, e)| grid.spec().center(r, a, e))
            .collect(),
    )
}

/// Projects detections onto the grid, dropping the Doppler index.
pub fn detections_to_grid(detections: &[Detection], spec: &GridSpec) -> Result<OccupancyGrid> {
    let dims = spec.dims();
    let mut grid = OccupancyGrid::empty(spec.clone());
    for d in detections {
        let (r, a, e) = (d.range_bin, d.azimuth_bin, d.elevation_bin as usize);
        if r >= dims.0 || a >= dims.1 || e >= dims.2 {
            return Err(Error::BinOutOfRange {
                range: r,
                azimuth: a,
                elevation: e,
                dims,
            });
        }
        grid.set(r, a, e);
    }
    Ok(grid)
}
