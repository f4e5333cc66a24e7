//! Machine-readable failures and their exit codes.

use std::fmt;
use std::io;

use rdh_core::image::PgmError;
use rdh_core::plan::PlanError;
use rdh_core::CodecError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Io,
    Pgm,
    CapacityExceeded,
    MessageTooLarge,
    CorruptAux,
    AuxOverflow,
    Mismatch,
    Other,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Io => "Io",
            Kind::Pgm => "Pgm",
            Kind::CapacityExceeded => "CapacityExceeded",
            Kind::MessageTooLarge => "MessageTooLarge",
            Kind::CorruptAux => "CorruptAux",
            Kind::AuxOverflow => "AuxOverflow",
            Kind::Mismatch => "Mismatch",
            Kind::Other => "Other",
        }
    }

    /// Process exit status. 2 is left to argument errors.
    pub fn code(self) -> i32 {
        match self {
            Kind::Io => 3,
            Kind::Pgm => 4,
            Kind::CapacityExceeded | Kind::MessageTooLarge => 5,
            Kind::CorruptAux => 6,
            Kind::AuxOverflow => 7,
            Kind::Other => 8,
            Kind::Mismatch => 9,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub message: String,
}

impl Failure {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn io(context: &str, err: impl fmt::Display) -> Self {
        Self::new(Kind::Io, format!("{context}: {err}"))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.kind.name(), self.message)
    }
}

impl From<CodecError> for Failure {
    fn from(e: CodecError) -> Self {
        let kind = match &e {
            CodecError::CapacityExceeded { .. } | CodecError::Plan(PlanError::NoFeasiblePlan { .. }) => {
                Kind::CapacityExceeded
            }
            CodecError::MessageTooLarge { .. } => Kind::MessageTooLarge,
            CodecError::CorruptAux(_) | CodecError::AmbiguousBin(_) => Kind::CorruptAux,
            CodecError::AuxOverflow { .. } => Kind::AuxOverflow,
            _ => Kind::Other,
        };
        Self::new(kind, e.to_string())
    }
}

impl From<PgmError> for Failure {
    fn from(e: PgmError) -> Self {
        match e {
            PgmError::Io(io) => Self::new(Kind::Io, io.to_string()),
            other => Self::new(Kind::Pgm, other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::new(Kind::Io, e.to_string())
    }
}
