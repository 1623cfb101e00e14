use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the processing chain, detectors, grids and metrics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid waveform: {0}")]
    Waveform(String),

    #[error("invalid array geometry: {0}")]
    Geometry(String),

    #[error("invalid scene: {0}")]
    Scene(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(
        "FFT size {size} for the {axis} axis is smaller than the {available} available samples"
    )]
    FftTooSmall {
        axis: &'static str,
        size: usize,
        available: usize,
    },

    #[error("no overlapped virtual element pair spans two different transmit slots; TDMA compensation needs one")]
    NoOverlappedPair,

    #[error("profile of length {len} is too short for a window of {training} training and {guard} guard cells per side")]
    WindowTooLarge {
        len: usize,
        training: usize,
        guard: usize,
    },

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("detection bin ({range}, {azimuth}, {elevation}) is outside the grid ({dims:?})")]
    BinOutOfRange {
        range: usize,
        azimuth: usize,
        elevation: usize,
        dims: (usize, usize, usize),
    },

    #[error("grid specifications differ")]
    SpecMismatch,

    #[error("chamfer distance is undefined for an empty point cloud ({0})")]
    EmptyCloud(&'static str),

    #[error("unknown detector cascade {0:?}")]
    UnknownCascade(String),

    #[error(transparent)]
    Decode(#[from] crate::io::DecodeError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
