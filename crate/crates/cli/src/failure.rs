use std::fmt::Display;
use std::path::Path;

use stereo_aware::wav::WavError;
use stereo_aware::Error;

pub const IO: u8 = 1;
pub const VALIDATION: u8 = 2;
pub const BATCH: u8 = 3;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(VALIDATION, message)
    }

    pub fn io(path: &Path, err: impl Display) -> Self {
        Self::new(IO, format!("{}: {err}", path.display()))
    }
}

fn code_of(e: &Error) -> u8 {
    match e {
        Error::Wav(WavError::Mono | WavError::TooManyChannels(_)) => VALIDATION,
        Error::Wav(_) | Error::Io(_) | Error::Csv(_) => IO,
        _ => VALIDATION,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::new(code_of(&e), e.to_string())
    }
}

/// Attaches a path to a core error while keeping its exit code.
pub trait WithPath<T> {
    fn at(self, path: &Path) -> Result<T, Failure>;
}

impl<T> WithPath<T> for Result<T, Error> {
    fn at(self, path: &Path) -> Result<T, Failure> {
        self.map_err(|e| {
            let shown = path.display().to_string();
            let text = e.to_string();
            let message = if text.starts_with(&shown) { text } else { format!("{shown}: {text}") };
            Failure::new(code_of(&e), message)
        })
    }
}

impl<T> WithPath<T> for std::io::Result<T> {
    fn at(self, path: &Path) -> Result<T, Failure> {
        self.map_err(|e| Failure::io(path, e))
    }
}

/// Prints to stdout, treating a closed pipe as success.
pub fn emit(text: &str) -> Result<(), Failure> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(Failure::new(IO, format!("stdout: {e}"))),
    }
}
