use std::fmt;

use thiserror::Error;

/// Dense representation that ran into the simulation cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Pure,
    Mixed,
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Representation::Pure => f.write_str("pure"),
            Representation::Mixed => f.write_str("mixed"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("layout error: {0}")]
    Layout(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("capacity exceeded: {qubits} qubits in a {kind} state (limit {limit}){}", context_suffix(.context))]
    Capacity {
        kind: Representation,
        qubits: usize,
        limit: usize,
        context: String,
    },

    #[error("degenerate branch: conditioning on an outcome of probability {0:e}")]
    DegenerateBranch(f64),

    #[error("locality violation: node v{node} accessed register `{register}` it does not own")]
    Locality { node: usize, register: String },

    #[error("quantum register `{register}` sent v{from}->v{to} in classical-only mode")]
    QuantumMessage {
        from: usize,
        to: usize,
        register: String,
    },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn context_suffix(context: &str) -> String {
    if context.is_empty() {
        String::new()
    } else {
        format!(" while running {context}")
    }
}

impl Error {
    /// Attaches protocol parameters to a capacity error; other variants pass through.
    pub fn with_context(self, ctx: impl Into<String>) -> Self {
        match self {
            Error::Capacity {
                kind,
                qubits,
                limit,
                context,
            } if context.is_empty() => Error::Capacity {
                kind,
                qubits,
                limit,
                context: ctx.into(),
            },
            other => other,
        }
    }

    pub fn is_capacity(&self) -> bool {
        matches!(self, Error::Capacity { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
