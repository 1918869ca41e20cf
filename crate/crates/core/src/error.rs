use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("case file line {line}: {msg}")]
    CaseParse { line: usize, msg: String },

    #[error("invalid case: {0}")]
    InvalidCase(String),

    #[error("unknown bus {0}")]
    UnknownBus(u32),

    #[error("unknown line {0}")]
    UnknownLine(u32),

    #[error("line {0} has zero series impedance")]
    DegenerateLine(u32),

    #[error("tripping line {0} islands the network")]
    Islanding(u32),

    #[error("singular elimination block in network reduction")]
    SingularReduction,

    #[error("power flow did not converge after {iterations} iterations (mismatch {mismatch:.3e})")]
    PowerFlowDiverged { iterations: usize, mismatch: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty scenario support")]
    EmptySupport,

    #[error("no reduced scenario lies inside the short-term interval")]
    EmptySelection,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate machine grouping: {0}")]
    DegenerateGrouping(String),

    #[error("no margin sign change in clearing-time bracket [{t_lo}, {t_hi}] (margins {margins:?})")]
    NoSignChange {
        t_lo: f64,
        t_hi: f64,
        margins: Vec<f64>,
    },

    #[error("margin undecided: {0}")]
    UndecidedMargin(String),

    #[error("eigensolver failure")]
    Eigen,

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("problem is infeasible: {0}")]
    Infeasible(String),

    #[error("problem is unbounded: {0}")]
    Unbounded(String),

    #[error("constraint references unknown scenario {0}")]
    UnknownScenario(usize),

    #[error("unsupported model: {0}")]
    Unsupported(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}
