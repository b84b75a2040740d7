use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field grids do not match")]
    GridMismatch,

    #[error("region exceeds box (radius {radius} must be below L/2 = {half_box})")]
    RegionExceedsBox { radius: f64, half_box: f64 },

    #[error("unsupported Sobolev index {0} (supported: -3..=2)")]
    UnsupportedSobolev(i32),

    #[error("invalid Lebesgue exponent {0} (need q >= 1)")]
    InvalidExponent(f64),

    #[error("source not solenoidal: |div| / |phi| = {0:e}")]
    NotSolenoidal(f64),

    #[error("source has nonzero mean: {0:e}")]
    NonzeroMean(f64),

    #[error("radius {radius} too large (max {max})")]
    RadiusTooLarge { radius: f64, max: f64 },

    #[error("cutoff under-resolved: epsilon = {epsilon} needs at least {min} (4 grid spacings)")]
    CutoffUnderResolved { epsilon: f64, min: f64 },

    #[error("cutoff scale {epsilon} exceeds L/8 = {max}")]
    CutoffTooLarge { epsilon: f64, max: f64 },

    #[error("body under-resolved: epsilon = {epsilon} needs at least {min} (4 grid spacings)")]
    BodyUnderResolved { epsilon: f64, min: f64 },

    #[error("degenerate shape: {0}")]
    DegenerateShape(String),

    #[error("non-finite {0}")]
    NonFinite(&'static str),

    #[error("blow-up at t = {0}")]
    BlowUp(f64),

    #[error("time step {dt} violates stability bound {bound} at t = {t}")]
    Unstable { dt: f64, bound: f64, t: f64 },

    #[error("need at least {needed} usable data points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate test function (zero H2 norm)")]
    DegenerateTestFunction,

    #[error("unknown initial datum '{0}'")]
    UnknownDatum(String),

    #[error("config line {line}: key '{key}': {msg}")]
    Config {
        key: String,
        line: usize,
        msg: String,
    },

    #[error("{0}")]
    Invalid(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
