use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on stream `{stream}`: {source}")]
    Io {
        stream: String,
        #[source]
        source: io::Error,
    },

    #[error("I/O error on scratch stream `{stream}` (live scratch {live} bytes, peak {peak} bytes): {source}")]
    ScratchIo {
        stream: String,
        live: u64,
        peak: u64,
        #[source]
        source: io::Error,
    },

    #[error("bad parsing header: {0}")]
    BadHeader(String),

    #[error("truncated parsing: record {record} is incomplete ({bytes} trailing bytes)")]
    Truncated { record: u64, bytes: usize },

    #[error("record {record}: literal value {value} does not fit in a byte")]
    LiteralOutOfRange { record: u64, value: u64 },

    #[error("record {record}: repeat source {src} does not start before phrase position {pos}")]
    SourceNotBefore { record: u64, src: u64, pos: u64 },

    #[error("record {record}: {reason}")]
    InvalidPhrase { record: u64, reason: String },

    #[error("value {value} does not fit in a {width}-byte field")]
    ValueOverflow { value: u64, width: usize },

    #[error("text length overflows the position type")]
    LengthOverflow,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("text of {needed} bytes exceeds the in-RAM limit of {limit} bytes; use an external-memory decoder")]
    RamExceeded { needed: u64, limit: u64 },

    #[error("priority queue payload of {len} bytes exceeds the configured maximum {max}")]
    PayloadTooLarge { len: usize, max: usize },

    #[error("priority queue key {key} is smaller than the last extracted key {last}")]
    NonMonotoneInsert { key: u64, last: u64 },

    #[error("internal invariant violated in segment {segment}: {message}")]
    Invariant { segment: u64, message: String },

    #[error("disk budget of {budget} bytes is infeasible; at least {minimum} bytes are required")]
    InfeasibleDiskBudget { budget: u64, minimum: u64 },

    #[error("disk budget of {budget} bytes exceeded: measured peak {peak} bytes")]
    DiskBudgetExceeded { budget: u64, peak: u64 },
}

impl Error {
    pub(crate) fn io(stream: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            stream: stream.into(),
            source,
        }
    }

    pub(crate) fn invariant(segment: u64, message: impl Into<String>) -> Self {
        Error::Invariant {
            segment,
            message: message.into(),
        }
    }
}
