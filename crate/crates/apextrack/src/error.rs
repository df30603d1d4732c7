//! Crate-wide error type.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("cell ({col},{row}) outside {cols}x{rows} grid")]
    CellOutOfRange {
        col: usize,
        row: usize,
        cols: usize,
        rows: usize,
    },

    #[error("point ({x},{y}) outside {width}x{height} image")]
    PointOutOfRange {
        x: f64,
        y: f64,
        width: u32,
        height: u32,
    },

    #[error("tensor has {actual} values, grid expects {expected}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("tensors built on different grid geometries")]
    GridMismatch,

    #[error("{0}")]
    ValueOutOfRange(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("frame {frame} not greater than active tracklet frame {last_frame}")]
    FrameOrdering { frame: u64, last_frame: u64 },

    #[error("document {index}: XML parse error: {message}")]
    VocParse { index: usize, message: String },

    #[error("document {index}: {message}")]
    VocValidation { index: usize, message: String },

    #[error("COCO schema error: {message}")]
    CocoSchema { message: String },

    #[error("invalid annotation set: {0}")]
    AnnotationInvariant(String),

    #[error("more than one box on image {image_id}")]
    AmbiguousAnnotation { image_id: u64 },

    #[error("invalid track: {0}")]
    InvalidTrack(String),

    #[error("bad magic: not an ATRK tensor file")]
    BadMagic,

    #[error("unsupported ATRK version {found}")]
    UnsupportedVersion { found: u16 },

    #[error("unknown ATRK tensor kind {found}")]
    BadKind { found: u8 },

    #[error("invalid ATRK header: {0}")]
    InvalidHeader(String),

    #[error("payload length mismatch: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("non-finite payload value at index {index}")]
    NonFinitePayload { index: usize },

    #[error("total_frames must be at least 1")]
    ZeroTotalFrames,

    #[error("ground truth frame {frame} beyond total_frames {total_frames}")]
    GtBeyondRange { frame: u64, total_frames: u64 },

    #[error("predicted frame {frame} beyond total_frames {total_frames}")]
    FrameCountMismatch { frame: u64, total_frames: u64 },

    #[error("thresholds list is empty")]
    EmptyThresholds,

    #[error("threshold {0} outside [0,1]")]
    ThresholdOutOfRange(f64),

    #[error("trace line {line}: {message}")]
    TraceParse { line: usize, message: String },

    #[error("assignment instance too large: {detections} detections x {tracklets} tracklets (max 6x6)")]
    InstanceTooLarge { detections: usize, tracklets: usize },
}
