use gmkit::factor::FactorError;
use gmkit::graph::GraphError;
use gmkit::learning::LearningError;
use gmkit::message_passing::MessageError;
use gmkit::numerics::NumericError;
use gmkit::samplers::SamplerError;
use gmkit::sequential::SequentialError;
use gmkit::variational::VariationalError;
use thiserror::Error;

/// Failure classes; each maps to one process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or inconsistent model, data or query.
    #[error("{0}")]
    Validation(String),
    /// A well-formed input on which the computation is undefined.
    #[error("{0}")]
    Numeric(String),
    /// Bad invocation: unknown command, missing or conflicting flags.
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::Io { .. } => 2,
            CliError::Numeric(_) => 3,
            CliError::Usage(_) => 4,
        }
    }

    /// Prefixes the message with context, keeping the class.
    pub fn context(self, what: impl std::fmt::Display) -> CliError {
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{what}: {m}")),
            CliError::Numeric(m) => CliError::Numeric(format!("{what}: {m}")),
            CliError::Usage(m) => CliError::Usage(format!("{what}: {m}")),
            io => io,
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> CliError {
        CliError::Io { path: path.into(), source }
    }
}

fn classify(numeric: bool, message: String) -> CliError {
    if numeric {
        CliError::Numeric(message)
    } else {
        CliError::Validation(message)
    }
}

fn numeric_kind(e: &NumericError) -> bool {
    !matches!(e, NumericError::DimensionMismatch(_) | NumericError::NotSymmetric)
}

fn factor_kind(e: &FactorError) -> bool {
    matches!(e, FactorError::ZeroNormaliser)
}

impl From<NumericError> for CliError {
    fn from(e: NumericError) -> Self {
        classify(numeric_kind(&e), e.to_string())
    }
}

impl From<FactorError> for CliError {
    fn from(e: FactorError) -> Self {
        classify(factor_kind(&e), e.to_string())
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<MessageError> for CliError {
    fn from(e: MessageError) -> Self {
        let numeric = match &e {
            MessageError::ImpossibleEvidence => true,
            MessageError::Factor(f) => factor_kind(f),
            _ => false,
        };
        classify(numeric, e.to_string())
    }
}

impl From<SequentialError> for CliError {
    fn from(e: SequentialError) -> Self {
        let numeric = matches!(e, SequentialError::ImpossibleEvidence | SequentialError::NonPositiveVariance { .. });
        classify(numeric, e.to_string())
    }
}

impl From<LearningError> for CliError {
    fn from(e: LearningError) -> Self {
        let numeric = match &e {
            LearningError::Numeric(n) => numeric_kind(n),
            LearningError::SingularDesign | LearningError::BoundaryMoment(_) => true,
            _ => false,
        };
        classify(numeric, e.to_string())
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        let numeric = match &e {
            SamplerError::InvalidParameter { .. } | SamplerError::Empty(_) | SamplerError::DimensionMismatch(_) | SamplerError::NonFiniteInit => false,
            SamplerError::Numeric(n) => numeric_kind(n),
            _ => true,
        };
        classify(numeric, e.to_string())
    }
}

impl From<VariationalError> for CliError {
    fn from(e: VariationalError) -> Self {
        let numeric = match &e {
            VariationalError::NoConvergence { .. } => true,
            VariationalError::Numeric(n) => numeric_kind(n),
            _ => false,
        };
        classify(numeric, e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
