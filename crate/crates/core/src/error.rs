use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported layout: {0}")]
    UnsupportedLayout(String),

    #[error("basis tuple {tuple:?} is not valid for levels {levels:?}")]
    InvalidBasisTuple { tuple: Vec<usize>, levels: Vec<usize> },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("atom index {0} is not a computational atom of this layout")]
    InvalidAtom(usize),

    #[error("time {t} lies outside the gate window [0, {total}]")]
    TimeOutOfRange { t: f64, total: f64 },

    #[error("tan(beta1) is singular at beta1 = pi/2; supply the product form of dbeta2*tan(beta1)")]
    SingularTangent,

    #[error("negative pulse envelope {0}")]
    NegativeEnvelope(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("herald success probability {0:e} is too small to post-select")]
    HeraldImpossible(f64),

    #[error("initial state has weight {0:e} outside the heralded subspace")]
    OutsideSubspace(f64),

    #[error("step size too coarse: h*f_max = {0:.3} exceeds the advisory bound")]
    StepTooCoarse(f64),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
