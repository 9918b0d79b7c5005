//! Corpus loading, tokenization and synthetic data.

mod corpus;
mod synthetic;
mod tokenizer;

pub use corpus::{load_corpus, CorpusFormat, CorpusRecord};
pub use synthetic::{generate_synthetic, NoiseDistribution, SyntheticSpec};
pub use tokenizer::{pad_batch, remove_random_tokens, Sample, Tokenizer};

/// Classification token; always position 0 of an encoded sample.
pub const CLS_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const PAD_ID: u32 = 2;
/// Number of reserved ids preceding the word vocabulary.
pub const NUM_SPECIAL: u32 = 3;

pub fn is_special(id: u32) -> bool {
    id < NUM_SPECIAL
}
