//! The `RCB1` container shared by every artifact: ADC frames, RDC cubes,
//! radar cubes, occupancy grids and point clouds. Byte layouts are listed
//! in `FORMATS.md`; everything is little-endian.

use std::io::Write as _;
use std::path::Path;

use num_complex::Complex32;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{RadarCube, RdcCube};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, OccupancyGrid, PointCloud};
use crate::sim::AdcFrame;
use crate::waveform::{ArrayGeometry, WaveformConfig};

pub const MAGIC: &[u8; 4] = b"RCB1";
pub const VERSION: u8 = 1;
const NO_DTYPE: u8 = 0xFF;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Kind {
    Rdc = 0,
    RadarCube = 1,
    Grid = 2,
    PointCloud = 3,
    Adc = 4,
}

impl Kind {
    fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            0 => Kind::Rdc,
            1 => Kind::RadarCube,
            2 => Kind::Grid,
            3 => Kind::PointCloud,
            4 => Kind::Adc,
            _ => return None,
        })
    }

    /// `(primary, secondary)` element types of the payload.
    fn dtypes(self) -> (Dtype, Option<Dtype>) {
        match self {
            Kind::Rdc | Kind::Adc => (Dtype::C64, None),
            Kind::RadarCube => (Dtype::F32, Some(Dtype::U16)),
            Kind::Grid => (Dtype::Bits, None),
            Kind::PointCloud => (Dtype::F32, None),
        }
    }

    fn n_axes(self) -> usize {
        match self {
            Kind::Rdc => 3,
            Kind::RadarCube => 4,
            Kind::Grid => 3,
            Kind::PointCloud | Kind::Adc => 0,
        }
    }
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Kind::Rdc => "RDC cube",
            Kind::RadarCube => "radar cube",
            Kind::Grid => "occupancy grid",
            Kind::PointCloud => "point cloud",
            Kind::Adc => "ADC frame",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Dtype {
    F32 = 0,
    C64 = 1,
    U16 = 2,
    Bits = 3,
}

/// Why a byte buffer is not a valid container.
#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("magic: expected \"RCB1\", found {0:?}")]
    Magic(Vec<u8>),
    #[error("version: unsupported version {0}")]
    Version(u8),
    #[error("payload_kind: unknown kind {0}")]
    Kind(u8),
    #[error("payload_kind: expected {expected}, file holds {found}")]
    WrongKind { expected: Kind, found: Kind },
    #[error("dtype: {kind} needs dtype {expected:?}, header says {found:?}")]
    Dtype {
        kind: Kind,
        expected: Vec<u8>,
        found: Vec<u8>,
    },
    #[error("dims: {0}")]
    Dims(String),
    #[error("axes: {0}")]
    Axes(String),
    #[error("metadata: {0}")]
    Metadata(String),
    #[error("header shorter than its fields ({0})")]
    TruncatedHeader(&'static str),
    #[error(
        "payload shorter than header claims ({expected} bytes expected, {available} available)"
    )]
    Truncated { expected: usize, available: usize },
    #[error("{0} trailing bytes after the payload")]
    Trailing(usize),
    #[error("payload: {0}")]
    Payload(String),
}

/// Any object the container can hold.
#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Rdc(RdcCube),
    RadarCube(RadarCube),
    Grid(OccupancyGrid),
    PointCloud(PointCloud),
    Adc(AdcFrame),
}

impl Artifact {
    pub fn kind(&self) -> Kind {
        match self {
            Artifact::Rdc(_) => Kind::Rdc,
            Artifact::RadarCube(_) => Kind::RadarCube,
            Artifact::Grid(_) => Kind::Grid,
            Artifact::PointCloud(_) => Kind::PointCloud,
            Artifact::Adc(_) => Kind::Adc,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RadarMeta {
    config: WaveformConfig,
    geometry: ArrayGeometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    extended: Option<bool>,
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn header(kind: Kind, dims: [usize; 3], axes: &[&[f64]], meta: &[u8]) -> Self {
        let (primary, secondary) = kind.dtypes();
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.push(VERSION);
        buf.push(kind as u8);
        buf.push(primary as u8);
        buf.push(secondary.map_or(NO_DTYPE, |d| d as u8));
        for d in dims {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        buf.extend_from_slice(&(axes.len() as u32).to_le_bytes());
        for axis in axes {
            buf.extend_from_slice(&(axis.len() as u32).to_le_bytes());
            for v in axis.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        buf.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        buf.extend_from_slice(meta);
        Self { buf }
    }

    fn complex(&mut self, values: &[Complex32]) {
        self.buf.reserve(values.len() * 8);
        for c in values {
            self.buf.extend_from_slice(&c.re.to_le_bytes());
            self.buf.extend_from_slice(&c.im.to_le_bytes());
        }
    }
}

/// Serializes an artifact into a container.
pub fn encode(artifact: &Artifact) -> Vec<u8> {
    match artifact {
        Artifact::Adc(frame) => {
            let meta = meta_json(&frame.config, &frame.geometry, None);
            let mut w = Writer::header(Kind::Adc, frame.dims().into(), &[], &meta);
            w.complex(&frame.samples);
            w.buf
        }
        Artifact::Rdc(cube) => {
            let meta = meta_json(&cube.config, &cube.geometry, Some(cube.extended));
            let dims = [cube.n_range, cube.n_doppler, cube.n_virtual];
            let axes: [&[f64]; 3] = [
                &[cube.range_per_bin],
                &cube.velocity,
                &cube.doppler_frequency,
            ];
            let mut w = Writer::header(Kind::Rdc, dims, &axes, &meta);
            w.complex(&cube.values);
            w.buf
        }
        Artifact::RadarCube(cube) => {
            let axes: [&[f64]; 4] = [
                &cube.range_edges,
                &cube.sin_az_edges,
                &cube.velocity,
                &cube.sin_el_edges,
            ];
            let mut w = Writer::header(Kind::RadarCube, cube.dims().into(), &axes, &[]);
            w.buf.reserve(cube.power_db.len() * 6);
            for p in &cube.power_db {
                w.buf.extend_from_slice(&p.to_le_bytes());
            }
            for e in &cube.elevation {
                w.buf.extend_from_slice(&e.to_le_bytes());
            }
            w.buf
        }
        Artifact::Grid(grid) => {
            let spec = grid.spec();
            let axes: [&[f64]; 3] = [&spec.range_edges, &spec.sin_az_edges, &spec.sin_el_edges];
            let (nr, na, ne) = grid.dims();
            let mut w = Writer::header(Kind::Grid, [nr, na, ne], &axes, &[]);
            let row_bytes = ne.div_ceil(8);
            let start = w.buf.len();
            w.buf.resize(start + nr * na * row_bytes, 0);
            for (r, a, e) in grid.iter_set() {
                w.buf[start + (r * na + a) * row_bytes + e / 8] |= 1 << (e % 8);
            }
            w.buf
        }
        Artifact::PointCloud(cloud) => {
            let mut w = Writer::header(Kind::PointCloud, [cloud.len(), 3, 1], &[], &[]);
            for p in &cloud.points {
                for v in p {
                    w.buf.extend_from_slice(&(*v as f32).to_le_bytes());
                }
            }
            w.buf
        }
    }
}

fn meta_json(config: &WaveformConfig, geometry: &ArrayGeometry, extended: Option<bool>) -> Vec<u8> {
    serde_json::to_vec(&RadarMeta {
        config: config.clone(),
        geometry: geometry.clone(),
        extended,
    })
    .expect("radar metadata serializes")
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &'static str) -> Result<&'a [u8], DecodeError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(DecodeError::TruncatedHeader(field));
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self, field: &'static str) -> Result<u8, DecodeError> {
        Ok(self.take(1, field)?[0])
    }

    fn u32(&mut self, field: &'static str) -> Result<usize, DecodeError> {
        let b = self.take(4, field)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }

    fn payload(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let available = self.bytes.len() - self.pos;
        if available < n {
            return Err(DecodeError::Truncated {
                expected: n,
                available,
            });
        }
        if available > n {
            return Err(DecodeError::Trailing(available - n));
        }
        let out = &self.bytes[self.pos..];
        self.pos = self.bytes.len();
        Ok(out)
    }
}

struct Header {
    kind: Kind,
    dims: [usize; 3],
    axes: Vec<Vec<f64>>,
    meta: Vec<u8>,
}

fn read_header(r: &mut Reader) -> Result<Header, DecodeError> {
    let magic = r
        .take(4, "magic")
        .map_err(|_| DecodeError::Magic(r.bytes.to_vec()))?;
    if magic != MAGIC {
        return Err(DecodeError::Magic(magic.to_vec()));
    }
    let version = r.u8("version")?;
    if version != VERSION {
        return Err(DecodeError::Version(version));
    }
    let raw_kind = r.u8("payload_kind")?;
    let kind = Kind::from_u8(raw_kind).ok_or(DecodeError::Kind(raw_kind))?;
    let found = vec![r.u8("dtype")?, r.u8("dtype")?];
    let (primary, secondary) = kind.dtypes();
    let expected = vec![primary as u8, secondary.map_or(NO_DTYPE, |d| d as u8)];
    if found != expected {
        return Err(DecodeError::Dtype {
            kind,
            expected,
            found,
        });
    }
    let dims = [r.u32("dims")?, r.u32("dims")?, r.u32("dims")?];
    // A point cloud may be empty; every other axis has at least one cell.
    let counted = if kind == Kind::PointCloud {
        &dims[1..]
    } else {
        &dims[..]
    };
    if counted.contains(&0) {
        return Err(DecodeError::Dims(format!("zero-length axis in {dims:?}")));
    }
    let n_axes = r.u32("axis count")?;
    if n_axes != kind.n_axes() {
        return Err(DecodeError::Axes(format!(
            "{kind} carries {} axis blocks, header says {n_axes}",
            kind.n_axes()
        )));
    }
    let mut axes = Vec::with_capacity(n_axes);
    for _ in 0..n_axes {
        let len = r.u32("axis length")?;
        let bytes = r.take(
            len.checked_mul(8)
                .ok_or(DecodeError::TruncatedHeader("axis values"))?,
            "axis values",
        )?;
        axes.push(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
        );
    }
    let meta_len = r.u32("metadata length")?;
    let meta = r.take(meta_len, "metadata")?.to_vec();
    Ok(Header {
        kind,
        dims,
        axes,
        meta,
    })
}

fn element_count(dims: [usize; 3], per: usize) -> Result<usize, DecodeError> {
    dims.iter()
        .try_fold(per, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| DecodeError::Dims(format!("{dims:?} overflows")))
}

fn complex_payload(bytes: &[u8]) -> Vec<Complex32> {
    bytes
        .chunks_exact(8)
        .map(|c| {
            Complex32::new(
                f32::from_le_bytes(c[..4].try_into().expect("4 bytes")),
                f32::from_le_bytes(c[4..].try_into().expect("4 bytes")),
            )
        })
        .collect()
}

fn parse_meta(meta: &[u8]) -> Result<RadarMeta, DecodeError> {
    let m: RadarMeta =
        serde_json::from_slice(meta).map_err(|e| DecodeError::Metadata(e.to_string()))?;
    m.config
        .validate()
        .map_err(|e| DecodeError::Metadata(e.to_string()))?;
    m.geometry
        .validate_for(&m.config)
        .map_err(|e| DecodeError::Metadata(e.to_string()))?;
    Ok(m)
}

fn expect_axis(axes: &[Vec<f64>], i: usize, len: usize, name: &str) -> Result<(), DecodeError> {
    if axes[i].len() != len {
        return Err(DecodeError::Axes(format!(
            "{name} axis has {} values, expected {len}",
            axes[i].len()
        )));
    }
    Ok(())
}

/// Parses a container.
pub fn decode(bytes: &[u8]) -> Result<Artifact, DecodeError> {
    let mut r = Reader { bytes, pos: 0 };
    let Header {
        kind,
        dims,
        axes,
        meta,
    } = read_header(&mut r)?;
    if !matches!(kind, Kind::Rdc | Kind::Adc) && !meta.is_empty() {
        return Err(DecodeError::Metadata(format!("{kind} carries no metadata")));
    }
    match kind {
        Kind::Adc => {
            let m = parse_meta(&meta)?;
            let c = &m.config;
            if dims != [c.n_chirps, c.n_rx, c.n_adc_samples] {
                return Err(DecodeError::Dims(format!(
                    "{dims:?} disagree with the waveform ({}, {}, {})",
                    c.n_chirps, c.n_rx, c.n_adc_samples
                )));
            }
            let payload = r.payload(element_count(dims, 8)?)?;
            Ok(Artifact::Adc(AdcFrame {
                samples: complex_payload(payload),
                config: m.config,
                geometry: m.geometry,
            }))
        }
        Kind::Rdc => {
            let m = parse_meta(&meta)?;
            let [nr, nd, nv] = dims;
            if nv != m.geometry.n_virtual() {
                return Err(DecodeError::Dims(format!(
                    "{nv} channels but the geometry has {}",
                    m.geometry.n_virtual()
                )));
            }
            expect_axis(&axes, 0, 1, "range step")?;
            expect_axis(&axes, 1, nd, "velocity")?;
            expect_axis(&axes, 2, nd, "Doppler frequency")?;
            let payload = r.payload(element_count(dims, 8)?)?;
            let mut axes = axes.into_iter();
            let range_per_bin = axes.next().expect("three axes")[0];
            Ok(Artifact::Rdc(RdcCube {
                values: complex_payload(payload),
                n_range: nr,
                n_doppler: nd,
                n_virtual: nv,
                range_per_bin,
                velocity: axes.next().expect("three axes"),
                doppler_frequency: axes.next().expect("three axes"),
                extended: m.extended.unwrap_or(false),
                config: m.config,
                geometry: m.geometry,
            }))
        }
        Kind::RadarCube => {
            let [nr, na, nd] = dims;
            expect_axis(&axes, 0, nr + 1, "range")?;
            expect_axis(&axes, 1, na + 1, "azimuth")?;
            expect_axis(&axes, 2, nd, "velocity")?;
            let n = element_count(dims, 1)?;
            let payload = r.payload(element_count(dims, 6)?)?;
            let (power, elevation) = payload.split_at(n * 4);
            let mut axes = axes.into_iter();
            let cube = RadarCube {
                power_db: power
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                    .collect(),
                elevation: elevation
                    .chunks_exact(2)
                    .map(|c| u16::from_le_bytes(c.try_into().expect("2 bytes")))
                    .collect(),
                n_range: nr,
                n_azimuth: na,
                n_doppler: nd,
                range_edges: axes.next().expect("four axes"),
                sin_az_edges: axes.next().expect("four axes"),
                velocity: axes.next().expect("four axes"),
                sin_el_edges: axes.next().expect("four axes"),
            };
            cube.validate()
                .map_err(|e| DecodeError::Payload(e.to_string()))?;
            Ok(Artifact::RadarCube(cube))
        }
        Kind::Grid => {
            let [nr, na, ne] = dims;
            for (i, (len, name)) in [(nr, "range"), (na, "azimuth"), (ne, "elevation")]
                .into_iter()
                .enumerate()
            {
                expect_axis(&axes, i, len + 1, name)?;
            }
            let mut axes = axes.into_iter();
            let spec = GridSpec::new(
                axes.next().expect("three axes"),
                axes.next().expect("three axes"),
                axes.next().expect("three axes"),
            )
            .map_err(|e| DecodeError::Axes(e.to_string()))?;
            let row_bytes = ne.div_ceil(8);
            let payload = r.payload(element_count([nr, na, row_bytes], 1)?)?;
            let mut grid = OccupancyGrid::empty(spec);
            for (row, bytes) in payload.chunks_exact(row_bytes).enumerate() {
                for (b, &byte) in bytes.iter().enumerate() {
                    let mut bits = byte;
                    while bits != 0 {
                        let e = b * 8 + bits.trailing_zeros() as usize;
                        if e >= ne {
                            return Err(DecodeError::Payload(format!(
                                "padding bit set in row {row}"
                            )));
                        }
                        grid.set(row / na, row % na, e);
                        bits &= bits - 1;
                    }
                }
            }
            Ok(Artifact::Grid(grid))
        }
        Kind::PointCloud => {
            if dims[1] != 3 || dims[2] != 1 {
                return Err(DecodeError::Dims(format!(
                    "point cloud dims must be (n, 3, 1), got {dims:?}"
                )));
            }
            let payload = r.payload(element_count(dims, 4)?)?;
            let values: Vec<f64> = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                .collect();
            if values.iter().any(|v| !v.is_finite()) {
                return Err(DecodeError::Payload("non-finite coordinate".into()));
            }
            Ok(Artifact::PointCloud(PointCloud::new(
                values.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
            )))
        }
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so a failed write never leaves a partial file behind.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut builder = tempfile::Builder::new();
    // Temporaries are private by default; outputs should not be.
    #[cfg(unix)]
    builder.permissions(std::os::unix::fs::PermissionsExt::from_mode(0o644));
    let mut tmp = builder.tempfile_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_artifact(path: impl AsRef<Path>, artifact: &Artifact) -> Result<()> {
    write_atomic(path, &encode(artifact))
}

pub fn read_artifact(path: impl AsRef<Path>) -> Result<Artifact> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| Error::Parse {
        path: path.into(),
        message: e.to_string(),
    })
}

macro_rules! typed_reader {
    ($name:ident, $variant:ident, $ty:ty, $kind:expr) => {
        pub fn $name(path: impl AsRef<Path>) -> Result<$ty> {
            let path = path.as_ref();
            match read_artifact(path)? {
                Artifact::$variant(v) => Ok(v),
                other => Err(Error::Parse {
                    path: path.into(),
                    message: DecodeError::WrongKind {
                        expected: $kind,
                        found: other.kind(),
                    }
                    .to_string(),
                }),
            }
        }
    };
}

typed_reader!(read_adc, Adc, AdcFrame, Kind::Adc);
typed_reader!(read_rdc, Rdc, RdcCube, Kind::Rdc);
typed_reader!(read_radar_cube, RadarCube, RadarCube, Kind::RadarCube);
typed_reader!(read_grid, Grid, OccupancyGrid, Kind::Grid);
typed_reader!(read_point_cloud, PointCloud, PointCloud, Kind::PointCloud);
