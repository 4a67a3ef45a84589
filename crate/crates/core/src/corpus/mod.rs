//! Corpus ingestion: tokenization, document-frequency vocabulary pruning,
//! bag-of-words vectorization, splits and the binary cache.

mod bow;
mod cache;
mod ingest;
mod vocab;

pub use bow::{normalize, split_corpus, vectorize, BowCorpus, BowDocument, Dataset, Split};
pub use cache::{cache_path, decode_corpus, encode_corpus, vocab_path, CACHE_MAGIC, CACHE_VERSION};
pub use ingest::{ingest, load_stopwords, IngestOptions, IngestReport, RawCorpus};
pub use vocab::{tokenize_line, Vocabulary};
