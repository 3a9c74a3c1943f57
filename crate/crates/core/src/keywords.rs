//! Hazard keyword configuration and keyword occurrence lookup.
//!
//! The config file lists one keyword per line under `[hazard-name]`
//! section headers. Blank lines and lines starting with `#` are ignored.

use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KeywordError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {0}: keyword outside of a [hazard] section")]
    Orphan(usize),
    #[error("line {0}: malformed section header")]
    BadHeader(usize),
    #[error("keyword file defines no keywords")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MatchMode {
    /// Case-insensitive word-prefix match: `Hitzewelle` matches `Hitzewellen`.
    #[default]
    Prefix,
    /// Case-insensitive whole-word match.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hazard {
    pub name: String,
    pub keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordSet {
    hazards: Vec<Hazard>,
    mode: MatchMode,
    // (lowercased keyword, hazard index), longest first
    lowered: Vec<(String, usize)>,
}

/// A keyword hit in a document, in character and token coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordOccurrence {
    pub keyword: String,
    pub hazard: String,
    pub start: usize,
    pub token: usize,
}

/// A whitespace-delimited token as a character range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    pub start: usize,
    pub end: usize,
}

impl KeywordSet {
    pub fn new(hazards: Vec<Hazard>, mode: MatchMode) -> Self {
        let mut lowered: Vec<(String, usize)> = hazards
            .iter()
            .enumerate()
            .flat_map(|(h, hz)| hz.keywords.iter().map(move |k| (k.to_lowercase(), h)))
            .collect();
        lowered.sort_by(|a, b| b.0.chars().count().cmp(&a.0.chars().count()).then(a.cmp(b)));
        KeywordSet {
            hazards,
            mode,
            lowered,
        }
    }

    pub fn parse(input: &str, mode: MatchMode) -> Result<Self, KeywordError> {
        let mut hazards: Vec<Hazard> = Vec::new();
        for (i, raw) in input.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .map(str::trim)
                    .filter(|n| !n.is_empty())
                    .ok_or(KeywordError::BadHeader(i + 1))?;
                hazards.push(Hazard {
                    name: name.to_string(),
                    keywords: Vec::new(),
                });
                continue;
            }
            let hazard = hazards.last_mut().ok_or(KeywordError::Orphan(i + 1))?;
            hazard.keywords.push(line.to_string());
        }
        if hazards.iter().all(|h| h.keywords.is_empty()) {
            return Err(KeywordError::Empty);
        }
        Ok(KeywordSet::new(hazards, mode))
    }

    pub fn load(path: &Path, mode: MatchMode) -> Result<Self, KeywordError> {
        let text = fs::read_to_string(path).map_err(|source| KeywordError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        KeywordSet::parse(&text, mode)
    }

    pub fn hazards(&self) -> &[Hazard] {
        &self.hazards
    }

    pub fn mode(&self) -> MatchMode {
        self.mode
    }

    fn match_word(&self, word: &str) -> Option<usize> {
        let lower = word.to_lowercase();
        self.lowered.iter().position(|(k, _)| match self.mode {
            MatchMode::Prefix => lower.starts_with(k.as_str()),
            MatchMode::Exact => lower == *k,
        })
    }

    /// Keyword hits in `text`, at most one per token (the longest matching
    /// keyword wins).
    pub fn occurrences(&self, text: &str) -> Vec<KeywordOccurrence> {
        let chars: Vec<char> = text.chars().collect();
        tokenize(text)
            .iter()
            .enumerate()
            .filter_map(|(ti, tok)| {
                let (start, end) = trim_punctuation(&chars, tok.start, tok.end)?;
                let word: String = chars[start..end].iter().collect();
                let idx = self.match_word(&word)?;
                let (lowered, hazard) = &self.lowered[idx];
                let original = self.hazards[*hazard]
                    .keywords
                    .iter()
                    .find(|k| k.to_lowercase() == *lowered)
                    .cloned()
                    .unwrap_or_else(|| lowered.clone());
                Some(KeywordOccurrence {
                    keyword: original,
                    hazard: self.hazards[*hazard].name.clone(),
                    start,
                    token: ti,
                })
            })
            .collect()
    }
}

fn trim_punctuation(chars: &[char], mut start: usize, mut end: usize) -> Option<(usize, usize)> {
    while start < end && !chars[start].is_alphanumeric() {
        start += 1;
    }
    while end > start && !chars[end - 1].is_alphanumeric() {
        end -= 1;
    }
    (start < end).then_some((start, end))
}

/// Splits text on whitespace, returning character ranges.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut start = None;
    let mut n = 0;
    for (i, c) in text.chars().enumerate() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                tokens.push(Token { start: s, end: i });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
        n = i + 1;
    }
    if let Some(s) = start {
        tokens.push(Token { start: s, end: n });
    }
    tokens
}

/// Index of the token containing `offset`, or of the last token before it.
pub fn token_index(tokens: &[Token], offset: usize) -> usize {
    tokens
        .partition_point(|t| t.start <= offset)
        .saturating_sub(1)
}
