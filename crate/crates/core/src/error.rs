use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },

    #[error("invalid program: {0}")]
    Invalid(String),

    #[error("invalid network: {0}")]
    Network(String),

    #[error("unknown annotation function `{0}`")]
    UnknownFunction(String),

    #[error("vertex domain is empty")]
    EmptyDomain,

    #[error("unknown atom `{0}`")]
    UnknownAtom(String),

    #[error("interpretations are over different atom indexes")]
    IndexMismatch,

    #[error("rule is not ground: {0}")]
    NotGround(String),

    #[error("interpretation is not a model")]
    NotAModel,

    #[error("state is not total: expected {expected} actions, got {got}")]
    BadState { expected: usize, got: usize },

    #[error("action {action} out of range 1..={m}")]
    BadAction { action: usize, m: usize },

    #[error("fixpoint did not converge within {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("program is not VIC_{expected}: {witness}")]
    NotVic { expected: usize, witness: String },

    #[error("enumeration cap exceeded: {needed} > {cap}")]
    CapExceeded { needed: f64, cap: u64 },

    #[error("annotation function `{0}` has no MILP linearization")]
    Unsupported(String),

    #[error("iteration bound search exceeded {0} steps; program looks non-finitary")]
    NonFinitary(usize),

    #[error("query error: {0}")]
    Query(String),

    #[error("no strong equilibrium: query range is undefined")]
    Undefined,

    #[error("search made no progress from a state that is not an equilibrium")]
    NoProgress,

    #[error("experiment error: {0}")]
    Experiment(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
