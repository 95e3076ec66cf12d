use std::fmt::Display;

/// Why a command stopped, mapped onto the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, config or input data.
    Usage(String),
    /// The numbers were computed and did not meet the check.
    Verification,
    /// The inputs are outside the regime where a verdict means anything.
    Refused(String),
    /// I/O and everything else.
    Runtime(String),
}

impl Failure {
    pub fn usage(msg: impl Display) -> Self {
        Failure::Usage(msg.to_string())
    }

    pub fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Verification => 3,
            Failure::Refused(_) => 4,
        }
    }

    pub fn report(&self) {
        match self {
            Failure::Usage(m) => eprintln!("error: {m}"),
            Failure::Verification => eprintln!("verification failed"),
            Failure::Refused(m) => eprintln!("refused: {m}"),
            Failure::Runtime(m) => eprintln!("error: {m}"),
        }
    }
}

impl From<collapse_core::Error> for Failure {
    fn from(e: collapse_core::Error) -> Self {
        use collapse_core::Error as E;
        match e {
            E::Precondition(_) => Failure::Refused(e.to_string()),
            E::Io(_) => Failure::Runtime(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;
