use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Lowercases, splits on whitespace and strips non-alphanumeric characters
/// from both ends of every token. Tokens that end up empty are dropped.
pub fn tokenize_line(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|raw| raw.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Token ↔ id mapping with document frequencies.
///
/// Ids run over `0..len()` in order of descending document frequency,
/// ties broken lexicographically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<usize>,
}

impl Vocabulary {
    /// Keeps exactly the tokens that occur in at least `min_df` documents.
    pub fn build<S: AsRef<str>>(token_docs: &[Vec<S>], min_df: usize) -> Result<Self> {
        if min_df == 0 {
            return Err(Error::InvalidConfig("min_df must be at least 1".into()));
        }
        let mut df: HashMap<&str, usize> = HashMap::new();
        for doc in token_docs {
            let unique: BTreeSet<&str> = doc.iter().map(AsRef::as_ref).collect();
            for tok in unique {
                *df.entry(tok).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, usize)> = df.into_iter().filter(|&(_, n)| n >= min_df).collect();
        if kept.is_empty() {
            return Err(Error::AllTokensPruned { min_df });
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Self::from_entries(kept.into_iter().map(|(t, n)| (t.to_owned(), n)).collect())
    }

    fn from_entries(entries: Vec<(String, usize)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        let mut tokens = Vec::with_capacity(entries.len());
        let mut doc_freq = Vec::with_capacity(entries.len());
        for (id, (tok, n)) in entries.into_iter().enumerate() {
            if index.insert(tok.clone(), id).is_some() {
                return Err(Error::VocabularyMismatch(format!("duplicate token `{tok}`")));
            }
            tokens.push(tok);
            doc_freq.push(n);
        }
        Ok(Self {
            tokens,
            index,
            doc_freq,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn doc_freq(&self, id: usize) -> usize {
        self.doc_freq[id]
    }

    /// TSV with a `token id doc_freq` header.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("token\tid\tdoc_freq\n");
        for (id, (tok, n)) in self.tokens.iter().zip(&self.doc_freq).enumerate() {
            out.push_str(&format!("{tok}\t{id}\t{n}\n"));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let bad = |line: usize, what: &str| Error::VocabularyMismatch(format!("vocabulary TSV line {line}: {what}"));
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "token\tid\tdoc_freq")) => {}
            _ => return Err(bad(1, "missing `token\\tid\\tdoc_freq` header")),
        }
        let mut entries = Vec::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(bad(i + 1, "expected 3 columns"));
            }
            let id: usize = cols[1].parse().map_err(|_| bad(i + 1, "bad id"))?;
            let n: usize = cols[2].parse().map_err(|_| bad(i + 1, "bad doc_freq"))?;
            if id != entries.len() {
                return Err(bad(i + 1, "ids must be contiguous from 0"));
            }
            entries.push((cols[0].to_owned(), n));
        }
        if entries.is_empty() {
            return Err(bad(1, "empty vocabulary"));
        }
        Self::from_entries(entries)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text)
    }

    /// Short content hash binding corpora and checkpoints to this vocabulary.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_tsv().as_bytes());
        hex::encode(&digest[..8])
    }
}
