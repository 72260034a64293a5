use std::fmt;

/// Failure of a subcommand, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Decoded text differs from the reference, or a bench row failed to verify.
    Mismatch(String),
    /// Inconsistent or invalid flags.
    Usage(String),
    /// Not enough disk or RAM for the requested run.
    Resource(String),
    /// Anything else: I/O errors, malformed parsings.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Mismatch(_) | CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Resource(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Mismatch(m) | CliError::Usage(m) | CliError::Resource(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

fn out_of_space(e: &std::io::Error) -> bool {
    e.raw_os_error() == Some(libc::ENOSPC) || e.kind() == std::io::ErrorKind::StorageFull
}

impl From<emlz::Error> for CliError {
    fn from(e: emlz::Error) -> Self {
        use emlz::Error as E;
        let msg = e.to_string();
        match &e {
            E::Config(_) | E::PayloadTooLarge { .. } => CliError::Usage(msg),
            E::RamExceeded { .. } | E::InfeasibleDiskBudget { .. } | E::DiskBudgetExceeded { .. } => {
                CliError::Resource(msg)
            }
            E::Io { source, .. } | E::ScratchIo { source, .. } if out_of_space(source) => CliError::Resource(msg),
            _ => CliError::Failed(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if out_of_space(&e) {
            CliError::Resource(e.to_string())
        } else {
            CliError::Failed(e.to_string())
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches a path to an I/O error.
pub fn io_at(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| {
        let msg = format!("{}: {e}", path.display());
        if out_of_space(&e) {
            CliError::Resource(msg)
        } else {
            CliError::Failed(msg)
        }
    }
}
