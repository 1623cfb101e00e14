//! Grid-level detection rates and the Chamfer distance between clouds.

mod kdtree;

pub use kdtree::{squared_distance, KdTree};

use std::fmt::Write as _;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{OccupancyGrid, PointCloud};

/// Per-voxel confusion counts of a predicted grid against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl Counts {
    /// `tp / (tp + fn)`, or 0 when the ground truth is empty.
    pub fn pd(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// `fp / (fp + tn)`, or 0 when the ground truth is full.
    pub fn pfa(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }
}

impl std::ops::Add for Counts {
    type Output = Counts;

    fn add(self, o: Counts) -> Counts {
        Counts {
            tp: self.tp + o.tp,
            fn_: self.fn_ + o.fn_,
            fp: self.fp + o.fp,
            tn: self.tn + o.tn,
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Confusion counts over every voxel of the grid.
pub fn pd_pfa(pred: &OccupancyGrid, gt: &OccupancyGrid) -> Result<Counts> {
    if pred.spec() != gt.spec() {
        return Err(Error::SpecMismatch);
    }
    let mut c = Counts::default();
    for (&p, &g) in pred.words().iter().zip(gt.words()) {
        c.tp += (p & g).count_ones() as u64;
        c.fp += (p & !g).count_ones() as u64;
        c.fn_ += (!p & g).count_ones() as u64;
    }
    c.tn = gt.spec().n_cells() as u64 - c.tp - c.fp - c.fn_;
    Ok(c)
}

/// Confusion counts restricted to a range of range bins.
pub fn pd_pfa_within(
    pred: &OccupancyGrid,
    gt: &OccupancyGrid,
    range_bins: Range<usize>,
) -> Result<Counts> {
    if pred.spec() != gt.spec() {
        return Err(Error::SpecMismatch);
    }
    let (nr, na, ne) = gt.dims();
    let mut c = Counts::default();
    for r in range_bins.start..range_bins.end.min(nr) {
        for a in 0..na {
            for e in 0..ne {
                match (pred.get(r, a, e), gt.get(r, a, e)) {
                    (true, true) => c.tp += 1,
                    (true, false) => c.fp += 1,
                    (false, true) => c.fn_ += 1,
                    (false, false) => c.tn += 1,
                }
            }
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChamferMode {
    /// Sum of squared nearest-neighbour distances in both directions.
    Sum,
    /// Each direction averaged over its own cloud, then added.
    #[default]
    Mean,
}

impl FromStr for ChamferMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(ChamferMode::Sum),
            "mean" => Ok(ChamferMode::Mean),
            _ => Err(Error::Config(format!(
                "unknown chamfer mode {s:?} (expected sum or mean)"
            ))),
        }
    }
}

impl std::fmt::Display for ChamferMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ChamferMode::Sum => "sum",
            ChamferMode::Mean => "mean",
        })
    }
}

/// Sum of squared distances from each point of `from` to its nearest
/// neighbour in `to`, accumulated in the order of `from`.
fn one_sided(from: &[crate::scene::Point3], to: &KdTree) -> f64 {
    let d: Vec<f64> = from
        .par_iter()
        .map(|p| to.nearest(p).expect("tree is non-empty").1)
        .collect();
    d.iter().sum()
}

/// Symmetric Chamfer distance, m^2. Undefined for empty clouds.
pub fn chamfer(s1: &PointCloud, s2: &PointCloud, mode: ChamferMode) -> Result<f64> {
    if s1.is_empty() {
        return Err(Error::EmptyCloud("first cloud"));
    }
    if s2.is_empty() {
        return Err(Error::EmptyCloud("second cloud"));
    }
    let t1 = KdTree::new(&s1.points);
    let t2 = KdTree::new(&s2.points);
    let (mut a, mut b) = (one_sided(&s1.points, &t2), one_sided(&s2.points, &t1));
    if mode == ChamferMode::Mean {
        a /= s1.len() as f64;
        b /= s2.len() as f64;
    }
    // Float addition commutes, so swapping the clouds gives the same bits.
    Ok(a + b)
}

/// Scores of one evaluated frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEval {
    pub frame: String,
    pub counts: Counts,
    /// `None` when either cloud is empty.
    pub chamfer: Option<f64>,
    pub pred_points: usize,
    pub gt_points: usize,
}

impl FrameEval {
    /// Scores a predicted grid and cloud against the ground truth.
    pub fn score(
        frame: impl Into<String>,
        pred: &OccupancyGrid,
        gt: &OccupancyGrid,
        pred_cloud: &PointCloud,
        gt_cloud: &PointCloud,
        mode: ChamferMode,
    ) -> Result<Self> {
        let chamfer = match chamfer(pred_cloud, gt_cloud, mode) {
            Ok(v) => Some(v),
            Err(Error::EmptyCloud(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            frame: frame.into(),
            counts: pd_pfa(pred, gt)?,
            chamfer,
            pred_points: pred_cloud.len(),
            gt_points: gt_cloud.len(),
        })
    }
}

/// Per-frame scores and their aggregate.
///
/// The aggregate Pd and Pfa come from the pooled counts; the aggregate
/// Chamfer distance is the unweighted mean over the frames where it is
/// defined.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub frames: Vec<FrameEval>,
}

impl EvalReport {
    pub fn new(frames: Vec<FrameEval>) -> Self {
        Self { frames }
    }

    pub fn counts(&self) -> Counts {
        self.frames
            .iter()
            .fold(Counts::default(), |acc, f| acc + f.counts)
    }

    pub fn pd(&self) -> f64 {
        self.counts().pd()
    }

    pub fn pfa(&self) -> f64 {
        self.counts().pfa()
    }

    pub fn chamfer(&self) -> Option<f64> {
        let values: Vec<f64> = self.frames.iter().filter_map(|f| f.chamfer).collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }

    pub const CSV_HEADER: &'static str = "frame,pd,pfa,chamfer,tp,fn,fp,tn,pred_points,gt_points";

    /// One row per frame followed by an `all` summary row. An undefined
    /// Chamfer distance is an empty field.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(Self::CSV_HEADER);
        out.push('\n');
        let mut row = |name: &str, c: &Counts, chamfer: Option<f64>, pred: usize, gt: usize| {
            let chamfer = chamfer.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{name},{},{},{chamfer},{},{},{},{},{pred},{gt}",
                c.pd(),
                c.pfa(),
                c.tp,
                c.fn_,
                c.fp,
                c.tn
            );
        };
        for f in &self.frames {
            row(&f.frame, &f.counts, f.chamfer, f.pred_points, f.gt_points);
        }
        let pred: usize = self.frames.iter().map(|f| f.pred_points).sum();
        let gt: usize = self.frames.iter().map(|f| f.gt_points).sum();
        row("all", &self.counts(), self.chamfer(), pred, gt);
        out
    }
}
