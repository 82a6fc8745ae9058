//! Pluggable tokenizers: a byte-level fallback and a vocabulary-file
//! tokenizer with greedy longest-match encoding.
//!
//! The tokenizer file is a JSON array of `[token-string, id]` pairs. When no
//! file is given, the byte-level tokenizer (256-token vocabulary, id = byte
//! value) is used.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

pub trait Tokenizer: Send + Sync {
    fn encode(&self, text: &str) -> Result<Vec<u32>>;
    fn decode(&self, ids: &[u32]) -> String;
    fn vocab_size(&self) -> usize;
    /// Printable form of a single token, for ranking tables.
    fn token_text(&self, id: u32) -> String;
}

/// Identity mapping over UTF-8 bytes. Total: encoding never fails.
#[derive(Debug, Clone, Copy, Default)]
pub struct ByteTokenizer;

impl Tokenizer for ByteTokenizer {
    fn encode(&self, text: &str) -> Result<Vec<u32>> {
        Ok(text.bytes().map(u32::from).collect())
    }

    fn decode(&self, ids: &[u32]) -> String {
        let bytes: Vec<u8> = ids.iter().map(|&id| id as u8).collect();
        String::from_utf8_lossy(&bytes).into_owned()
    }

    fn vocab_size(&self) -> usize {
        256
    }

    fn token_text(&self, id: u32) -> String {
        let b = id as u8;
        if b.is_ascii_graphic() || b == b' ' {
            (b as char).to_string()
        } else {
            format!("\\x{b:02x}")
        }
    }
}

/// Tokenizer backed by an explicit vocabulary, greedy longest match, no
/// byte fallback.
#[derive(Debug, Clone)]
pub struct VocabTokenizer {
    // Sorted by (length desc, id asc) so the scan finds the longest match
    // and breaks length ties deterministically.
    entries: Vec<(String, u32)>,
    by_id: HashMap<u32, String>,
    vocab_size: usize,
}

impl VocabTokenizer {
    pub fn new(pairs: Vec<(String, u32)>) -> Result<Self> {
        let mut by_id = HashMap::new();
        let mut seen_strings = HashMap::new();
        for (s, id) in &pairs {
            if s.is_empty() {
                return Err(Error::BadTokenizerFile {
                    path: "<memory>".into(),
                    reason: format!("empty token string for id {id}"),
                });
            }
            if by_id.insert(*id, s.clone()).is_some() {
                return Err(Error::BadTokenizerFile {
                    path: "<memory>".into(),
                    reason: format!("duplicate token id {id}"),
                });
            }
            if seen_strings.insert(s.clone(), *id).is_some() {
                return Err(Error::BadTokenizerFile {
                    path: "<memory>".into(),
                    reason: format!("duplicate token string {s:?}"),
                });
            }
        }
        let vocab_size = pairs.iter().map(|(_, id)| *id as usize + 1).max().unwrap_or(0);
        let mut entries = pairs;
        entries.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then(a.1.cmp(&b.1)));
        Ok(Self {
            entries,
            by_id,
            vocab_size,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let pairs: Vec<(String, u32)> =
            serde_json::from_slice(&bytes).map_err(|e| Error::BadTokenizerFile {
                path: path.into(),
                reason: e.to_string(),
            })?;
        Self::new(pairs)
    }
}

impl Tokenizer for VocabTokenizer {
    fn encode(&self, text: &str) -> Result<Vec<u32>> {
        let mut ids = Vec::new();
        let mut offset = 0;
        while offset < text.len() {
            let rest = &text[offset..];
            match self.entries.iter().find(|(s, _)| rest.starts_with(s)) {
                Some((s, id)) => {
                    ids.push(*id);
                    offset += s.len();
                }
                None => return Err(Error::UnknownToken { offset }),
            }
        }
        Ok(ids)
    }

    fn decode(&self, ids: &[u32]) -> String {
        ids.iter()
            .map(|id| self.by_id.get(id).map(String::as_str).unwrap_or(""))
            .collect()
    }

    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn token_text(&self, id: u32) -> String {
        self.by_id.get(&id).cloned().unwrap_or_default()
    }
}

/// Load the tokenizer named by an optional path; `None` selects byte-level.
pub fn load_tokenizer(path: Option<&Path>) -> Result<Box<dyn Tokenizer>> {
    match path {
        None => Ok(Box::new(ByteTokenizer)),
        Some(p) => Ok(Box::new(VocabTokenizer::from_file(p)?)),
    }
}
