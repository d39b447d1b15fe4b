use thiserror::Error;

/// Errors raised while parsing, validating, or evaluating shield documents.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DslError {
    #[error("syntax error at {line}:{col}: expected {expected}")]
    Syntax {
        line: usize,
        col: usize,
        expected: String,
    },
    #[error("duplicate binding '{0}'")]
    DuplicateBinding(String),
    #[error("unbound recursion variable '{0}'")]
    UnboundVariable(String),
    #[error("unguarded recursion through '{var}' at {path}")]
    UnguardedRecursion { var: String, path: String },
    #[error("unbound set name '{0}'")]
    UnboundSetName(String),
    #[error("state literal {0} is not a state of the environment")]
    UnknownStateLiteral(String),
    #[error("observation literal '{0}' is not valid for this environment")]
    UnknownObservationLiteral(String),
    #[error("agent index {0} out of range 1..={1}")]
    AgentIndexOutOfRange(usize, usize),
}
