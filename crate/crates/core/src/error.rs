use thiserror::Error;

/// Errors surfaced by the library.
///
/// Exit-code mapping used by the CLI: input/parse problems → 2, data
/// insufficiency → 3, search failure → 4, certification failure → 5.
#[derive(Debug, Error)]
pub enum Error {
    #[error("set has no charts but {requested} samples were requested")]
    EmptySet { requested: usize },

    #[error("mask accepted no parameter after {budget} rejection attempts (chart {chart})")]
    MaskRejectionExhausted { chart: usize, budget: usize },

    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DomainViolation {
        context: String,
        expected: usize,
        got: usize,
    },

    #[error("target dimension {target} outside (0, {max}]")]
    BadDimension { target: f64, max: f64 },

    #[error("cover at scale {scale} needs {cells} cells, over the budget {budget}")]
    ScaleTooSmall { scale: f64, cells: u64, budget: u64 },

    #[error("need at least 3 scales spanning 1.5 decades, got {n} spanning {decades:.3}")]
    InsufficientScales { n: usize, decades: f64 },

    #[error("{pairs} displacement pairs exceed the budget {budget} and capping is disabled")]
    PairBudgetExceeded { pairs: u64, budget: u64 },

    #[error("no direction with admissible times found over {directions} directions")]
    NoDirectionFound { directions: usize },

    #[error("certification failed: {what} (worst value {value:.3e}, witness {witness:?})")]
    CertificationFailed {
        what: String,
        value: f64,
        witness: Option<(Vec<f64>, Vec<f64>)>,
    },

    #[error("ODE integration failed: step underflow at t={t} (|x|={norm:.3e})")]
    IntegrationFailure { t: f64, norm: f64 },

    #[error("area precondition violated: |Q| = {q_area} must be < 2|R| = {two_r}")]
    BadAreas { q_area: f64, two_r: f64 },

    #[error("embedding certification failed: {count} of {total} points left the target region")]
    EmbeddingCertificationFailed { count: usize, total: usize },

    #[error("no admissible flow time in ({lo:.3e}, {hi:.3e}) after {tried} candidates")]
    NoAdmissibleTime { lo: f64, hi: f64, tried: usize },

    #[error("no usable split band in the first-factor height projection: {why}")]
    NoSplitBand { why: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that are a verdict about a constructed object rather
    /// than malformed input (the CLI maps these to exit code 5).
    pub fn is_certification_failure(&self) -> bool {
        matches!(
            self,
            Error::CertificationFailed { .. }
                | Error::EmbeddingCertificationFailed { .. }
                | Error::NoAdmissibleTime { .. }
                | Error::NoSplitBand { .. }
        )
    }
}
