//! Binary corpus cache.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! "DETMCORP" | version | V | N | N x ( len | len x (id, count) )
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use super::bow::{BowCorpus, BowDocument, Dataset, Split};
use super::vocab::Vocabulary;
use crate::error::{Error, Result};

pub const CACHE_MAGIC: &[u8; 8] = b"DETMCORP";
pub const CACHE_VERSION: u32 = 1;

pub fn encode_corpus(corpus: &BowCorpus) -> Vec<u8> {
    let mut out = Vec::with_capacity(20 + corpus.docs.iter().map(|d| 4 + 8 * d.unique_words()).sum::<usize>());
    out.extend_from_slice(CACHE_MAGIC);
    for v in [CACHE_VERSION, corpus.vocab_size as u32, corpus.docs.len() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for doc in &corpus.docs {
        out.extend_from_slice(&(doc.unique_words() as u32).to_le_bytes());
        for &(id, c) in doc.counts() {
            out.extend_from_slice(&id.to_le_bytes());
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn u32(&mut self) -> Result<u32> {
        let end = self.pos + 4;
        let chunk = self.bytes.get(self.pos..end).ok_or_else(|| Error::CorruptCache {
            path: self.path.to_owned(),
            detail: format!("truncated at byte {}", self.pos),
        })?;
        self.pos = end;
        Ok(u32::from_le_bytes(chunk.try_into().expect("4 bytes")))
    }
}

/// Decodes a cache and binds it to `vocab`.
pub fn decode_corpus(bytes: &[u8], path: &Path, split: Split, vocab: &Vocabulary) -> Result<BowCorpus> {
    let corrupt = |detail: String| Error::CorruptCache {
        path: path.to_owned(),
        detail,
    };
    if bytes.len() < 8 || &bytes[..8] != CACHE_MAGIC {
        return Err(corrupt("bad magic bytes".into()));
    }
    let mut r = Reader { bytes, pos: 8, path };
    let version = r.u32()?;
    if version != CACHE_VERSION {
        return Err(corrupt(format!("unsupported version {version} (expected {CACHE_VERSION})")));
    }
    let v = r.u32()? as usize;
    if v != vocab.len() {
        return Err(Error::VocabularyMismatch(format!(
            "{} was built for V={v}, vocabulary has V={}",
            path.display(),
            vocab.len()
        )));
    }
    let n = r.u32()? as usize;
    let mut docs = Vec::with_capacity(n);
    for d in 0..n {
        let len = r.u32()? as usize;
        let mut pairs = Vec::with_capacity(len);
        for _ in 0..len {
            let id = r.u32()?;
            let c = r.u32()?;
            if id as usize >= v || c == 0 {
                return Err(corrupt(format!("document {d}: invalid pair ({id}, {c})")));
            }
            pairs.push((id, c));
        }
        docs.push(BowDocument::from_counts(pairs).ok_or_else(|| corrupt(format!("document {d} is empty")))?);
    }
    if r.pos != bytes.len() {
        return Err(corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    BowCorpus::new(split, docs, v, vocab.fingerprint())
}

pub fn cache_path(dir: &Path, split: Split) -> PathBuf {
    dir.join(format!("{}.bin", split.name()))
}

pub fn vocab_path(dir: &Path) -> PathBuf {
    dir.join("vocab.tsv")
}

impl Dataset {
    /// Writes `vocab.tsv` and one cache per split into `dir`; returns the files written.
    pub fn save(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = vec![vocab_path(dir)];
        self.vocab.save(&written[0])?;
        for split in Split::ALL {
            let path = cache_path(dir, split);
            fs::write(&path, encode_corpus(self.split(split))).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let vocab = Vocabulary::load(&vocab_path(dir))?;
        let mut splits = Vec::with_capacity(3);
        for split in Split::ALL {
            let path = cache_path(dir, split);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            splits.push(decode_corpus(&bytes, &path, split, &vocab)?);
        }
        let test = splits.pop().expect("three splits");
        let valid = splits.pop().expect("three splits");
        let train = splits.pop().expect("three splits");
        Dataset::new(vocab, train, valid, test)
    }
}
