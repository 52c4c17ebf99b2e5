use std::process::ExitCode;

/// Process exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Kind {
    Usage,
    Numerical,
    Verification,
}

impl Kind {
    pub fn code(self) -> u8 {
        match self {
            Kind::Usage => 1,
            Kind::Numerical => 2,
            Kind::Verification => 3,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(kind: Kind, error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind,
            error: error.into(),
        }
    }

    pub fn usage(msg: impl std::fmt::Display) -> Self {
        Self::new(Kind::Usage, anyhow::anyhow!("{msg}"))
    }

    pub fn verification(msg: impl std::fmt::Display) -> Self {
        Self::new(Kind::Verification, anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.kind.code())
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

/// Attaches an exit class to any error.
pub trait Classify<T> {
    fn usage(self) -> CmdResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> CmdResult<T> {
        self.map_err(|e| Failure::new(Kind::Usage, e))
    }
}
