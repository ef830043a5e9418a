use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field contains a non-finite sample at ({row}, {col})")]
    NonFiniteSample { row: usize, col: usize },

    #[error("field has zero total energy")]
    ZeroEnergy,

    #[error("grid too large for the direct Rayleigh-Sommerfeld sum: n = {n} (max {max})")]
    GridTooLarge { n: usize, max: usize },

    #[error("aperture of radius {radius:e} m spans only {samples:.2} samples (need at least 4)")]
    ApertureUnresolved { radius: f64, samples: f64 },

    #[error("RIS panel of side {side:e} m spans only {samples:.2} samples (need at least 4)")]
    PanelUnresolved { side: f64, samples: f64 },

    #[error("invalid element: {0}")]
    InvalidElement(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("degenerate geometry: RIS lies on the optical axis (d_iz = 0), angles are undefined")]
    DegenerateGeometry,

    #[error("shift ({dx:e}, {dy:e}) m leaves the guard band (limit {limit:e} m)")]
    ShiftOutOfBand { dx: f64, dy: f64, limit: f64 },

    #[error("pose out of range: {0}")]
    PoseOutOfRange(String),

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("invalid solver settings: {0}")]
    InvalidSolver(String),

    #[error("cavity mode collapsed after {iterations} round trips (energy underflow)")]
    ModeCollapse { iterations: usize },

    #[error("reference field has zero energy")]
    ZeroReference,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("input power {p_in} W is below the threshold {p_th} W")]
    BelowThreshold { p_in: f64, p_th: f64 },

    #[error("threshold power diverges: round-trip efficiency {eta_t:e} is too small")]
    DivergentThreshold { eta_t: f64 },

    #[error("root finder did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("scenario `{scenario}`: {source}")]
    Scenario {
        scenario: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_scenario(self, name: &str) -> Error {
        Error::Scenario {
            scenario: name.to_string(),
            source: Box::new(self),
        }
    }
}
