use crate::scene::Point3;

/// Static 3-d tree for exact nearest-neighbour queries.
///
/// Nodes are stored implicitly: the median of each index range is the node
/// and the halves on either side are its subtrees.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3>,
    axes: Vec<u8>,
}

impl KdTree {
    pub fn new(points: &[Point3]) -> Self {
        let mut points = points.to_vec();
        let mut axes = vec![0u8; points.len()];
        build(&mut points, &mut axes);
        Self { points, axes }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest stored point to `query` and its squared distance.
    pub fn nearest(&self, query: &Point3) -> Option<(Point3, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (0, f64::INFINITY);
        self.search(0, self.points.len(), query, &mut best);
        Some((self.points[best.0], best.1))
    }

    fn search(&self, lo: usize, hi: usize, q: &Point3, best: &mut (usize, f64)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = &self.points[mid];
        let d = squared_distance(p, q);
        if d < best.1 {
            *best = (mid, d);
        }
        let axis = self.axes[mid] as usize;
        let delta = q[axis] - p[axis];
        let (near, far) = if delta < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, q, best);
        if delta * delta <= best.1 {
            self.search(far.0, far.1, q, best);
        }
    }
}

pub fn squared_distance(a: &Point3, b: &Point3) -> f64 {
    let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    dx * dx + dy * dy + dz * dz
}

fn build(points: &mut [Point3], axes: &mut [u8]) {
    if points.len() <= 1 {
        return;
    }
    // Split on the axis of largest spread.
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points.iter() {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap_or(0);
    let mid = points.len() / 2;
    points.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    axes[mid] = axis as u8;
    let (left, right) = points.split_at_mut(mid);
    let (left_axes, right_axes) = axes.split_at_mut(mid);
    build(left, left_axes);
    build(&mut right[1..], &mut right_axes[1..]);
}
