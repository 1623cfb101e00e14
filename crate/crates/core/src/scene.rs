//! Synthetic scenes: point and box scatterers plus an optional ground plane.
//!
//! Scene files are TOML:
//!
//! ```toml
//! noise_power = 1e-4
//!
//! [ground_plane]
//! z_offset = -1.5
//! density = 2.0
//!
//! [[scatterer]]
//! position = [0.0, 10.0, 0.5]
//! velocity = [0.0, 0.0, 0.0]
//! rcs = 1.0
//! extent = [0.0, 0.0, 0.0]
//! ```
//!
//! Coordinates are metres with the sensor at the origin, `x` to the right,
//! `y` along boresight and `z` up. `extent` is the half-size of a box per
//! axis; all zeros is a point scatterer.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = [f64; 3];

pub(crate) fn norm(p: &Point3) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

pub(crate) fn dot(a: &Point3, b: &Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scatterer {
    pub position: Point3,
    #[serde(default)]
    pub velocity: Point3,
    /// Linear power scale of the echo; amplitude is `sqrt(rcs)`.
    pub rcs: f64,
    #[serde(default)]
    pub extent: Point3,
}

impl Scatterer {
    pub fn point(position: Point3, rcs: f64) -> Self {
        Self {
            position,
            velocity: [0.0; 3],
            rcs,
            extent: [0.0; 3],
        }
    }

    pub fn with_velocity(mut self, velocity: Point3) -> Self {
        self.velocity = velocity;
        self
    }

    pub fn with_extent(mut self, extent: Point3) -> Self {
        self.extent = extent;
        self
    }

    pub fn is_point(&self) -> bool {
        self.extent.iter().all(|&e| e == 0.0)
    }

    /// Velocity component along the line of sight, positive when receding.
    pub fn radial_velocity(&self) -> f64 {
        dot(&self.position, &self.velocity) / norm(&self.position)
    }

    /// Box faces whose outward normal points towards the sensor.
    pub fn visible_faces(&self) -> Vec<Face> {
        let mut faces = Vec::new();
        for axis in 0..3 {
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            for sign in [-1.0, 1.0] {
                let mut center = self.position;
                center[axis] += sign * self.extent[axis];
                let mut normal = [0.0; 3];
                normal[axis] = sign;
                if dot(&normal, &center) >= 0.0 {
                    continue;
                }
                let mut half_u = [0.0; 3];
                half_u[u] = self.extent[u];
                let mut half_v = [0.0; 3];
                half_v[v] = self.extent[v];
                faces.push(Face {
                    center,
                    half_u,
                    half_v,
                });
                // Degenerate boxes have both faces in the same place.
                if self.extent[axis] == 0.0 {
                    break;
                }
            }
        }
        faces
    }
}

/// A rectangle `center + a * half_u + b * half_v` for `a, b` in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub center: Point3,
    pub half_u: Point3,
    pub half_v: Point3,
}

impl Face {
    pub fn area(&self) -> f64 {
        4.0 * norm(&self.half_u) * norm(&self.half_v)
    }

    pub fn at(&self, a: f64, b: f64) -> Point3 {
        std::array::from_fn(|i| self.center[i] + a * self.half_u[i] + b * self.half_v[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundPlane {
    /// Height of the road surface relative to the sensor, m.
    pub z_offset: f64,
    /// Lidar returns per square metre of road.
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    #[serde(default, rename = "scatterer")]
    pub scatterers: Vec<Scatterer>,
    /// Variance of the complex receiver noise per ADC sample.
    #[serde(default)]
    pub noise_power: f64,
    #[serde(default)]
    pub ground_plane: Option<GroundPlane>,
}

/// A radar point scatterer after extended targets are discretised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointScatterer {
    pub position: Point3,
    pub velocity: Point3,
    pub amplitude: f64,
}

impl Scene {
    pub fn new(scatterers: Vec<Scatterer>, noise_power: f64) -> Self {
        Self {
            scatterers,
            noise_power,
            ground_plane: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_power.is_finite() && self.noise_power >= 0.0) {
            return Err(Error::Scene(format!(
                "noise_power must be finite and non-negative, got {}",
                self.noise_power
            )));
        }
        for (i, s) in self.scatterers.iter().enumerate() {
            let finite = s
                .position
                .iter()
                .chain(&s.velocity)
                .chain(&s.extent)
                .all(|v| v.is_finite());
            if !finite || !s.rcs.is_finite() {
                return Err(Error::Scene(format!("scatterer {i} has non-finite fields")));
            }
            if norm(&s.position) <= 0.0 {
                return Err(Error::Scene(format!("scatterer {i} is at range 0")));
            }
            if s.rcs < 0.0 {
                return Err(Error::Scene(format!("scatterer {i} has negative rcs")));
            }
            if s.extent.iter().any(|&e| e < 0.0) {
                return Err(Error::Scene(format!("scatterer {i} has a negative extent")));
            }
        }
        if let Some(g) = &self.ground_plane {
            if !(g.z_offset.is_finite() && g.density.is_finite() && g.density >= 0.0) {
                return Err(Error::Scene(
                    "ground plane needs a finite offset and density".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let scene: Scene = toml::from_str(text).map_err(|e| Error::Scene(e.to_string()))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str::<Scene>(&text)
            .map_err(|e| Error::Parse {
                path: path.to_owned(),
                message: e.to_string(),
            })
            .and_then(|s| s.validate().map(|_| s))
    }

    /// The scene `dt` seconds later, every scatterer moved by its velocity.
    pub fn advanced(&self, dt: f64) -> Self {
        let mut next = self.clone();
        for s in &mut next.scatterers {
            for i in 0..3 {
                s.position[i] += s.velocity[i] * dt;
            }
        }
        next
    }

    /// Discretises the scene for the radar model. Boxes become a grid of
    /// point scatterers over their visible faces, spaced at most `spacing`
    /// apart, sharing the box's rcs equally. Faces with zero area are
    /// skipped; a box with no visible area collapses to a point.
    pub fn radar_points(&self, spacing: f64) -> Vec<PointScatterer> {
        let mut out = Vec::new();
        for s in &self.scatterers {
            if s.rcs == 0.0 {
                continue;
            }
            let mut points: Vec<Point3> = Vec::new();
            if !s.is_point() {
                for face in s.visible_faces() {
                    if face.area() <= 0.0 {
                        continue;
                    }
                    let nu = (2.0 * norm(&face.half_u) / spacing).ceil().max(1.0) as usize;
                    let nv = (2.0 * norm(&face.half_v) / spacing).ceil().max(1.0) as usize;
                    for i in 0..nu {
                        for j in 0..nv {
                            let a = -1.0 + (2.0 * i as f64 + 1.0) / nu as f64;
                            let b = -1.0 + (2.0 * j as f64 + 1.0) / nv as f64;
                            points.push(face.at(a, b));
                        }
                    }
                }
            }
            if points.is_empty() {
                points.push(s.position);
            }
            let amplitude = (s.rcs / points.len() as f64).sqrt();
            out.extend(points.into_iter().map(|position| PointScatterer {
                position,
                velocity: s.velocity,
                amplitude,
            }));
        }
        out
    }

    /// A random urban-looking scene: cars, pedestrians and poles on a road
    /// 1.5 m below the sensor, with random radial motion.
    pub fn random_street<R: Rng + ?Sized>(rng: &mut R, params: &StreetParams) -> Self {
        let ground_z = params.ground_z;
        let n_objects = rng.random_range(params.min_objects..=params.max_objects);
        let mut scatterers = Vec::with_capacity(n_objects);
        for _ in 0..n_objects {
            let range = rng.random_range(params.min_range..params.max_range);
            let azimuth = rng.random_range(-55.0f64..55.0).to_radians();
            let (x, y) = (range * azimuth.sin(), range * azimuth.cos());
            let kind = rng.random_range(0..10);
            let (extent, rcs, speed) = match kind {
                0..=4 => ([0.9, 2.0, 0.75], 10.0, 12.0),
                5..=7 => ([0.3, 0.3, 0.9], 1.0, 2.0),
                _ => ([0.1, 0.1, 1.5], 2.0, 0.0),
            };
            let z = ground_z + extent[2];
            let v = if speed > 0.0 {
                rng.random_range(-speed..speed)
            } else {
                0.0
            };
            let position = [x, y, z];
            let dir = [x / range, y / range, 0.0];
            scatterers.push(Scatterer {
                position,
                velocity: [v * dir[0], v * dir[1], 0.0],
                rcs,
                extent,
            });
        }
        Scene {
            scatterers,
            noise_power: params.noise_power,
            ground_plane: Some(GroundPlane {
                z_offset: ground_z,
                density: params.ground_density,
            }),
        }
    }
}

/// Knobs for [`Scene::random_street`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreetParams {
    pub min_objects: usize,
    pub max_objects: usize,
    pub min_range: f64,
    pub max_range: f64,
    pub ground_z: f64,
    pub ground_density: f64,
    pub noise_power: f64,
}

impl Default for StreetParams {
    fn default() -> Self {
        Self {
            min_objects: 3,
            max_objects: 8,
            min_range: 6.0,
            max_range: 45.0,
            ground_z: -1.5,
            ground_density: 5.0,
            noise_power: 1.0,
        }
    }
}
