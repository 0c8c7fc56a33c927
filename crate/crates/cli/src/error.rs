use std::fmt;

use bayes_kalman::bertrand::BertrandError;
use bayes_kalman::estimator::EstimateError;
use bayes_kalman::model::ModelError;
use bayes_kalman::oracle::OracleError;

/// A failed run, classified by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, missing files, out-of-range indices: exit 1.
    Usage(String),
    /// Invalid or unparseable inputs, or an oracle disagreement: exit 2.
    Validation(String),
    /// Zero evidence or grid mass leak: exit 3.
    Numeric(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage error",
            CliError::Validation(_) => "validation failure",
            CliError::Numeric(_) => "numeric failure",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Validation(m) | CliError::Numeric(m) => m,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // diagnostics are one line each
        let msg = self.message().replace('\n', " ");
        write!(f, "bkalman: {}: {}", self.kind(), msg.trim())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<EstimateError> for CliError {
    fn from(e: EstimateError) -> Self {
        match e {
            EstimateError::OutOfRange { .. } => CliError::Usage(e.to_string()),
            EstimateError::Model(m) => m.into(),
            EstimateError::Kernel(k) => CliError::Validation(k.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::ZeroEvidence | OracleError::MassLeak { .. } => {
                CliError::Numeric(e.to_string())
            }
            OracleError::InvalidGrid(_) | OracleError::OutOfRange { .. } => {
                CliError::Usage(e.to_string())
            }
            OracleError::Model(m) => m.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<BertrandError> for CliError {
    fn from(e: BertrandError) -> Self {
        CliError::Usage(e.to_string())
    }
}
