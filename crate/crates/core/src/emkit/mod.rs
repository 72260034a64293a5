//! External-memory building blocks: scratch files, fixed-size records,
//! sorting, a monotone priority queue, bucket distribution and pooled queues.

pub mod distribute;
pub mod pq;
pub mod queues;
pub mod record;
pub mod scratch;
pub mod sort;

pub use distribute::{distribute, rounds_for, BucketReader, Buckets};
pub use pq::{ExternalPq, PqConfig, PqStats};
pub use queues::{QueuePool, QueueReader};
pub use record::{get_u40, put_u40, FixedRecord, RecordReader, RecordWriter, U40_MAX};
pub use scratch::{ScratchFile, ScratchManager};
pub use sort::{em_sort, SortStats, SortedRun, SortedStream};
