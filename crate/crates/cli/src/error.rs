use std::fmt;

/// Process exit status by failure class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Failure {
    Config = 2,
    Io = 3,
    Solver = 4,
    NoConvergence = 5,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Failure,
    pub error: anyhow::Error,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn new(kind: Failure, error: impl Into<anyhow::Error>) -> Self {
        Self { kind, error: error.into() }
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        Self::new(Failure::Config, anyhow::anyhow!("{msg}"))
    }

    pub fn io(context: impl fmt::Display, e: std::io::Error) -> Self {
        Self::new(Failure::Io, anyhow::Error::new(e).context(context.to_string()))
    }

    pub fn solver(msg: impl fmt::Display) -> Self {
        Self::new(Failure::Solver, anyhow::anyhow!("{msg}"))
    }

    /// Library errors split into bad input files and numerical failures.
    pub fn from_core(context: impl fmt::Display, e: irqi::Error) -> Self {
        use irqi::Error as E;
        let kind = match &e {
            E::Io(_) => Failure::Io,
            E::Parse { .. } | E::NotSquare { .. } | E::NotHermitian(_) | E::InvalidArgument(_) | E::OracleTooLarge { .. } | E::DegenerateGap { .. } => {
                Failure::Config
            }
            _ => Failure::Solver,
        };
        Self::new(kind, anyhow::Error::new(e).context(context.to_string()))
    }

    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}
