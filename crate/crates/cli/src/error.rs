use std::fmt;

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Exit 2.
    Config(String),
    /// Exit 3.
    Runtime(String),
    /// Exit 4.
    Dataset(String),
    /// Exit 1; the report has already been printed.
    VerifyFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::VerifyFailed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Dataset(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
            CliError::Dataset(m) => write!(f, "dataset error: {m}"),
            CliError::VerifyFailed(n) => write!(f, "{n} verification suite(s) failed"),
        }
    }
}

impl From<optcmd::Error> for CliError {
    fn from(e: optcmd::Error) -> Self {
        use optcmd::Error as E;
        match e {
            E::Config(m) => CliError::Config(m),
            E::UnknownModel(_) | E::UnknownTheorem(_) => CliError::Config(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
