//! Decoding LZ77 parsings whose text does not fit in RAM.

pub mod decode;
pub mod emkit;
pub mod error;
pub mod factorize;
pub mod format;
pub mod io;
pub mod phrase;

pub use decode::{decode, Algorithm, DecodeConfig, DecodeReport};
pub use error::{Error, Result};
pub use format::{IntWidth, ParsingReader, ParsingWriter};
pub use io::{BlockReader, BlockWriter, DiskGauge, IoStats, StreamSnapshot};
pub use phrase::{LocatedPhrase, MemoryBudget, ParsingStats, Phrase, SegmentGeometry};
