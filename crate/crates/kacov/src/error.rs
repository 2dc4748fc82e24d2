use thiserror::Error;

/// Library-wide error type. Variants map one-to-one onto the failure modes of
/// the public operations; callers that need exit-code style triage can match
/// on the variant (see `Error::is_numerical`).
#[derive(Debug, Error)]
pub enum Error {
    /// Median pairwise distance collapsed to ~0, so no bandwidth can be
    /// derived from the data. Carries the offending median.
    #[error("degenerate bandwidth: median pairwise distance {0:.6e} is below 1e-12; supply an explicit bandwidth")]
    DegenerateBandwidth(f64),

    /// Input matrix failed the symmetric positive-definite checks.
    #[error("matrix is not symmetric positive-definite: {0}")]
    NotSpd(String),

    /// Kernel family and sample kind are incompatible, or two sample sets
    /// disagree in kind or dimension.
    #[error("kind mismatch: {0}")]
    KindMismatch(String),

    /// A quantity left its mathematically valid range by more than the
    /// documented tolerance (for example an arccos argument beyond 1 + 1e-8).
    #[error("numerical domain violation: {0}")]
    NumericalDomain(String),

    /// Kernel configuration is internally inconsistent (missing or negative
    /// bandwidth, alpha out of range, bandwidth on a family that takes none).
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    /// Estimator minimum sample size not met.
    #[error("sample too small: need n >= {need}, got {got}")]
    SampleTooSmall { need: usize, got: usize },

    /// Brute-force oracle guard: tuple enumeration beyond n = 12 is a bug in
    /// the caller, not a workload.
    #[error("oracle enumeration restricted to n <= 12, got n = {0}")]
    OracleTooLarge(usize),

    /// Self-covariance at or below 1e-14; correlations and gamma moments are
    /// undefined for (near-)constant samples.
    #[error("degenerate marginal: {0}")]
    DegenerateMarginal(String),

    /// Plug-in moment estimate that must be positive was not.
    #[error("nonpositive moment estimate: {0:.6e}")]
    NonPositiveMoment(f64),

    /// Special-function iteration budget exhausted.
    #[error("no convergence: {0}")]
    NonConvergence(String),

    /// Structural problem with a request: bad index, bad parameter, bad
    /// enum combination.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// Wrapper that prefixes an upstream error with the stage or marginal
    /// it came from.
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wrap with a stage label ("x marginal", "replicate 17", ...).
    pub fn context(self, label: impl Into<String>) -> Error {
        Error::Context {
            context: label.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, unwrapping any context layers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures that arise from the numerics of otherwise
    /// well-formed inputs, as opposed to malformed requests. Used by the CLI
    /// to pick between the input-error and numerical-error exit codes.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::DegenerateBandwidth(_)
                | Error::NotSpd(_)
                | Error::NumericalDomain(_)
                | Error::DegenerateMarginal(_)
                | Error::NonPositiveMoment(_)
                | Error::NonConvergence(_)
        )
    }
}

/// Attach context to the error half of a result.
pub trait ResultExt<T> {
    fn context(self, label: impl Into<String>) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context(self, label: impl Into<String>) -> Result<T> {
        self.map_err(|e| e.context(label))
    }
}
