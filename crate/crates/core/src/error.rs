use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("coincident positions: path gain undefined")]
    CoincidentPositions,

    #[error("unknown uav {0}")]
    UnknownUav(usize),

    #[error("bit depth {0} out of range 1..=8")]
    BitDepth(u32),

    #[error("image dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),

    #[error("image too small for ssim: {0}x{1} (need at least 8x8)")]
    ImageTooSmall(usize, usize),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("quality model: {0}")]
    QualityModel(String),

    #[error("infeasible power constraints: no power tuple satisfies {p_min} <= sum <= {p_max}")]
    InfeasiblePower { p_min: f64, p_max: f64 },

    #[error("invalid action index {index} for agent {agent} (action count {count})")]
    InvalidAction {
        agent: usize,
        index: usize,
        count: usize,
    },

    #[error("expected {expected} actions, got {got}")]
    ActionCount { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("heuristic infeasible under P_min: uav {0} left below the minimum power")]
    HeuristicInfeasible(usize),

    #[error("oracle search space too large: {0} joint actions (limit 1000000)")]
    SearchSpaceTooLarge(u128),

    #[error("unsupported magic {0:?} (expected binary P5)")]
    UnsupportedMagic(String),

    #[error("malformed PGM header: {0}")]
    MalformedHeader(String),

    #[error("unsupported maxval {0} (expected 255)")]
    UnsupportedMaxval(u32),

    #[error("truncated PGM payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("parameter file: {0}")]
    ParamFile(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("trend check: {0}")]
    Trend(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
