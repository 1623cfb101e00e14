use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::scene::Point3;

/// Plane `normal . p + offset = 0` with a unit normal pointing up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Point3,
    pub offset: f64,
}

impl Plane {
    fn through(a: &Point3, b: &Point3, c: &Point3) -> Option<Self> {
        let u = Vector3::new(b[0] - a[0], b[1] - a[1], b[2] - a[2]);
        let v = Vector3::new(c[0] - a[0], c[1] - a[1], c[2] - a[2]);
        let n = u.cross(&v);
        let len = n.norm();
        if len < 1e-12 {
            return None;
        }
        Some(Self::from_normal(n / len, a))
    }

    fn from_normal(n: Vector3<f64>, point: &Point3) -> Self {
        let n = if n.z < 0.0 { -n } else { n };
        Self {
            normal: [n.x, n.y, n.z],
            offset: -(n.x * point[0] + n.y * point[1] + n.z * point[2]),
        }
    }

    pub fn distance(&self, p: &Point3) -> f64 {
        (self.normal[0] * p[0] + self.normal[1] * p[1] + self.normal[2] * p[2] + self.offset).abs()
    }

    /// Angle between the normal and vertical, degrees.
    pub fn tilt_deg(&self) -> f64 {
        self.normal[2].clamp(-1.0, 1.0).acos().to_degrees()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GroundParams {
    pub iterations: usize,
    /// Maximum point-to-plane distance of a ground point, m.
    pub inlier_threshold: f64,
    /// Maximum angle between the plane normal and vertical, degrees.
    pub max_tilt_deg: f64,
    /// Fraction of the cloud a plane must explain to count as ground.
    pub min_inlier_fraction: f64,
    pub seed: u64,
}

impl Default for GroundParams {
    fn default() -> Self {
        Self {
            iterations: 200,
            inlier_threshold: 0.15,
            max_tilt_deg: 10.0,
            min_inlier_fraction: 0.1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundRemoval {
    pub cloud: PointCloud,
    pub plane: Option<Plane>,
    pub removed: usize,
    /// Set when no near-horizontal plane was supported by enough points;
    /// the cloud is then returned unchanged.
    pub no_ground_found: bool,
}

/// Finds the dominant near-horizontal plane by random sample consensus and
/// drops its inliers.
pub fn remove_ground(cloud: &PointCloud, params: &GroundParams) -> GroundRemoval {
    let unchanged = || GroundRemoval {
        cloud: cloud.clone(),
        plane: None,
        removed: 0,
        no_ground_found: true,
    };
    let points = &cloud.points;
    if points.len() < 3 {
        return unchanged();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let count = |plane: &Plane| {
        points
            .iter()
            .filter(|p| plane.distance(p) <= params.inlier_threshold)
            .count()
    };

    let mut best: Option<(Plane, usize)> = None;
    for _ in 0..params.iterations {
        let i = rng.random_range(0..points.len());
        let j = rng.random_range(0..points.len());
        let k = rng.random_range(0..points.len());
        if i == j || j == k || i == k {
            continue;
        }
        let Some(plane) = Plane::through(&points[i], &points[j], &points[k]) else {
            continue;
        };
        if plane.tilt_deg() > params.max_tilt_deg {
            continue;
        }
        let inliers = count(&plane);
        if best.is_none_or(|(_, n)| inliers > n) {
            best = Some((plane, inliers));
        }
    }

    let Some((mut plane, mut inliers)) = best else {
        return unchanged();
    };
    if let Some(refined) = refit(points, &plane, params.inlier_threshold) {
        let n = count(&refined);
        if refined.tilt_deg() <= params.max_tilt_deg && n >= inliers {
            plane = refined;
            inliers = n;
        }
    }
    if (inliers as f64) < params.min_inlier_fraction * points.len() as f64 {
        log::warn!(
            "no ground plane: best candidate explains {inliers} of {} points",
            points.len()
        );
        return unchanged();
    }

    let kept: Vec<Point3> = points
        .iter()
        .copied()
        .filter(|p| plane.distance(p) > params.inlier_threshold)
        .collect();
    GroundRemoval {
        removed: points.len() - kept.len(),
        cloud: PointCloud::new(kept),
        plane: Some(plane),
        no_ground_found: false,
    }
}

/// Least-squares plane through the inliers of `plane`.
fn refit(points: &[Point3], plane: &Plane, threshold: f64) -> Option<Plane> {
    let inliers: Vec<&Point3> = points
        .iter()
        .filter(|p| plane.distance(p) <= threshold)
        .collect();
    if inliers.len() < 3 {
        return None;
    }
    let n = inliers.len() as f64;
    let mut mean = Vector3::zeros();
    for p in &inliers {
        mean += Vector3::new(p[0], p[1], p[2]);
    }
    mean /= n;
    let mut cov = Matrix3::zeros();
    for p in &inliers {
        let d = Vector3::new(p[0], p[1], p[2]) - mean;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let normal = eig.eigenvectors.column(imin).into_owned();
    Some(Plane::from_normal(
        normal.normalize(),
        &[mean.x, mean.y, mean.z],
    ))
}
