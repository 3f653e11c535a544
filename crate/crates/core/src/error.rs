use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

pub type Result<T, E = ApcError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ApcError {
    /// A scalar argument fell outside the range the model is defined on.
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// A Bell-diagonal input whose recurrence success probability vanishes.
    #[error("degenerate Bell-diagonal state: success probability is zero")]
    DegenerateState,

    #[error("invalid request: {0}")]
    Validation(ValidationReport),

    /// No candidate plan exists at all, e.g. generation on some link never
    /// succeeds within the attempt cap.
    #[error("link {link_index} cannot be planned: {reason}")]
    Unplannable {
        link_index: usize,
        reason: &'static str,
    },

    #[error("{context}: {path}: {source}")]
    Io {
        context: &'static str,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl ApcError {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        ApcError::Domain {
            name,
            value,
            expected,
        }
    }

    pub fn is_validation(&self) -> bool {
        matches!(self, ApcError::Validation(_) | ApcError::Domain { .. })
    }
}

/// Machine-readable reason a request field was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueCode {
    EmptyPath,
    TargetOutOfRange,
    NegativeTime,
    ProbabilityOutOfRange,
    NonPositiveLength,
    NonPositiveCoherence,
    NonPositiveSpeed,
    InvalidBellDiagonal,
    InvalidTiming,
    InvalidPlannerConfig,
    InvalidModeParams,
}

impl IssueCode {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueCode::EmptyPath => "E_EMPTY_PATH",
            IssueCode::TargetOutOfRange => "E_TARGET_RANGE",
            IssueCode::NegativeTime => "E_NEGATIVE_TIME",
            IssueCode::ProbabilityOutOfRange => "E_PROBABILITY_RANGE",
            IssueCode::NonPositiveLength => "E_LENGTH",
            IssueCode::NonPositiveCoherence => "E_COHERENCE",
            IssueCode::NonPositiveSpeed => "E_SPEED",
            IssueCode::InvalidBellDiagonal => "E_BELL_DIAGONAL",
            IssueCode::InvalidTiming => "E_TIMING",
            IssueCode::InvalidPlannerConfig => "E_PLANNER_CONFIG",
            IssueCode::InvalidModeParams => "E_MODE_PARAMS",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationIssue {
    pub field: String,
    pub code: IssueCode,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn push(&mut self, field: impl Into<String>, code: IssueCode, message: impl Into<String>) {
        self.issues.push(ValidationIssue {
            field: field.into(),
            code,
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has(&self, code: IssueCode) -> bool {
        self.issues.iter().any(|i| i.code == code)
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(ApcError::Validation(self))
        }
    }

    pub(crate) fn check_probability(&mut self, field: impl Into<String>, p: f64) {
        if !(0.0..=1.0).contains(&p) {
            self.push(
                field,
                IssueCode::ProbabilityOutOfRange,
                format!("{p} is not a probability"),
            );
        }
    }

    pub(crate) fn check_time(&mut self, field: impl Into<String>, t: f64) {
        if !(t >= 0.0) {
            self.push(field, IssueCode::NegativeTime, format!("{t} s is negative"));
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(
                f,
                "{} [{}]: {}",
                issue.field,
                issue.code.as_str(),
                issue.message
            )?;
        }
        Ok(())
    }
}
