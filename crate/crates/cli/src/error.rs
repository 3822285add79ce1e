use std::fmt;

/// Failure classes with stable exit codes.
#[derive(Debug)]
pub enum CliError {
    Input(String),
    Fit(String),
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Fit(_) => 3,
            CliError::Solver(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Fit(m) | CliError::Solver(m) => f.write_str(m),
        }
    }
}

impl From<tlsloss::Error> for CliError {
    fn from(e: tlsloss::Error) -> Self {
        use tlsloss::Error as E;
        let msg = e.to_string();
        match e {
            E::FitDiverged { .. } | E::Unidentifiable(_) | E::NoResonance(_) => CliError::Fit(msg),
            E::LinearSolveFailed { .. } | E::ConvergenceNotReached { .. } => CliError::Solver(msg),
            _ => CliError::Input(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
