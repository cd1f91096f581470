use std::fmt;
use std::process::ExitCode;

/// Why a command stopped; each kind has its own exit status.
#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Solver(anyhow::Error),
    Verification(String),
    Gradcheck(String),
    Replay(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Verification(_) => 4,
            Failure::Gradcheck(_) => 5,
            Failure::Replay(_) => 6,
        }
    }

    pub fn exit(&self) -> ExitCode {
        ExitCode::from(self.code())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(e) => write!(f, "input error: {e:#}"),
            Failure::Solver(e) => write!(f, "solver failure: {e:#}"),
            Failure::Verification(m) => write!(f, "verification failed: {m}"),
            Failure::Gradcheck(m) => write!(f, "gradient check failed: {m}"),
            Failure::Replay(m) => write!(f, "replay mismatch: {m}"),
        }
    }
}

impl From<relaynav::Error> for Failure {
    fn from(e: relaynav::Error) -> Self {
        use relaynav::Error as E;
        match e.root() {
            E::Verification(rep) => Failure::Verification(rep.to_string()),
            _ if e.is_solver_failure() => Failure::Solver(e.into()),
            _ => Failure::Input(e.into()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.into())
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;

/// Tags an error as bad input with some context.
pub fn input<E: Into<anyhow::Error>>(context: impl fmt::Display) -> impl FnOnce(E) -> Failure {
    move |e| Failure::Input(e.into().context(context.to_string()))
}
