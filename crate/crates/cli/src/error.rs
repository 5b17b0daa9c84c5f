use std::fmt;
use std::process::ExitCode;

/// Failure classes; each maps to an exit code and a stable tag in the
/// `ERROR <tag>: <detail>` line on stderr.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Parameters outside the admissible region.
    Constraint,
    /// Malformed or missing flags, out-of-range options.
    Usage,
    /// Reading or writing files.
    Io,
    /// A consistency check inside an engine failed.
    Internal,
    /// `verify` found a failing check.
    Verification,
}

impl Kind {
    fn tag(self) -> &'static str {
        match self {
            Kind::Constraint => "constraint",
            Kind::Usage => "usage",
            Kind::Io => "io",
            Kind::Internal => "internal",
            Kind::Verification => "verification",
        }
    }

    fn exit_code(self) -> u8 {
        match self {
            Kind::Constraint | Kind::Usage => 2,
            Kind::Io | Kind::Internal | Kind::Verification => 1,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub detail: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ERROR {}: {}", self.kind.tag(), self.detail)
    }
}

impl CliError {
    pub fn new(kind: Kind, detail: impl Into<String>) -> Self {
        // keep the report on one line
        let detail = detail.into().replace('\n', " ");
        CliError { kind, detail }
    }

    pub fn usage(detail: impl Into<String>) -> Self {
        CliError::new(Kind::Usage, detail)
    }

    pub fn internal(detail: impl Into<String>) -> Self {
        CliError::new(Kind::Internal, detail)
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::new(Kind::Io, format!("{}: {e}", path.display()))
    }

    pub fn report(&self) -> ExitCode {
        eprintln!("{self}");
        ExitCode::from(self.kind.exit_code())
    }
}

impl From<pyrofield::ParamError> for CliError {
    fn from(e: pyrofield::ParamError) -> Self {
        CliError::new(Kind::Constraint, e.to_string())
    }
}

impl From<pyrofield::ExactError> for CliError {
    fn from(e: pyrofield::ExactError) -> Self {
        use pyrofield::ExactError::*;
        let kind = match e {
            Normalization { .. } => Kind::Internal,
            ExactLimitExceeded { .. } | EnumLimitExceeded { .. } | DuplicateSite { .. } => Kind::Usage,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<pyrofield::McError> for CliError {
    fn from(e: pyrofield::McError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<pyrofield::OneDError> for CliError {
    fn from(e: pyrofield::OneDError) -> Self {
        use pyrofield::OneDError::*;
        let kind = match e {
            OutOfRange(_) => Kind::Constraint,
            DivergentMoments | NonTerminating | NoReplicas => Kind::Usage,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<pyrofield::analysis::AnalysisError> for CliError {
    fn from(e: pyrofield::analysis::AnalysisError) -> Self {
        use pyrofield::analysis::AnalysisError::*;
        let kind = match e {
            Store { .. } => Kind::Io,
            _ => Kind::Usage,
        };
        CliError::new(kind, e.to_string())
    }
}
