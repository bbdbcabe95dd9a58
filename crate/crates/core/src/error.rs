use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("payload length mismatch: header declares {expected} bytes, file holds {actual}")]
    PayloadLengthMismatch { expected: usize, actual: usize },

    #[error("non-finite sample at channel {channel}, sample {sample}")]
    NonFinite { channel: usize, sample: usize },

    #[error("invalid event record on line {line}: {reason}")]
    InvalidEvent { line: usize, reason: String },

    #[error("invalid recording: {0}")]
    InvalidRecording(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown channel `{0}`")]
    UnknownChannel(String),

    #[error("no photodiode spike within {max_dist_s} s of event #{index} ({kind} at t={t})")]
    MissedFlash { index: usize, kind: String, t: f64, max_dist_s: f64 },

    #[error("filter design invalid: {0}")]
    FilterDesign(String),

    #[error("rank-deficient data: null direction loads on channels [{}]", .channels.join(", "))]
    RankDeficient { channels: Vec<String> },

    #[error("component index {index} out of range for {k} components")]
    ComponentOutOfRange { index: usize, k: usize },

    #[error("degenerate template: {0}")]
    DegenerateTemplate(String),

    #[error("epoch window for {trial} exceeds recording bounds ({start:.3}s..{end:.3}s outside {rec_start:.3}s..{rec_end:.3}s)")]
    WindowOutOfBounds { trial: String, start: f64, end: f64, rec_start: f64, rec_end: f64 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("target band unreachable: {0}")]
    Unreachable(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid model file: {0}")]
    ModelFormat(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
