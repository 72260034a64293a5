//! Test-input producers: an in-RAM greedy factorizer, permuting instances
//! and synthetic corpora.

pub mod corpus;
pub mod greedy;
pub mod lpf;
pub mod permute;

pub use corpus::{gen_corpus, CorpusKind};
pub use greedy::{factorize_greedy, factorize_greedy_with, factorize_ram_estimate, MAX_FACTORIZE_LEN};
pub use lpf::lpf;
pub use permute::{gen_permute_instance, PermuteInstance, DEFAULT_ITEM_WIDTH};
