//! Document and annotation-layer interchange model.
//!
//! A corpus is a JSONL file with one document per line. Every document
//! carries its text, sentence spans, gold countries and one standoff
//! annotation layer per NER backend. All offsets count Unicode scalar
//! values (not bytes), so files produced by Python tooling can be read
//! without conversion.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::country::CountryCode;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: document {}: field `{field}`: {message}", doc_label(.doc_id))]
    Schema {
        line: usize,
        doc_id: Option<String>,
        field: String,
        message: String,
    },
    #[error("line {line}: duplicate document id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("layer {layer_id:?} references unknown document {doc_id:?}")]
    DanglingLayer { doc_id: String, layer_id: String },
    #[error("unknown layer {0:?}")]
    UnknownLayer(String),
    #[error("offset {offset} out of range for document {doc_id:?} of length {len}")]
    OffsetOutOfRange {
        doc_id: String,
        offset: usize,
        len: usize,
    },
    #[error("document {0:?} has no sentences")]
    NoSentences(String),
}

fn doc_label(id: &Option<String>) -> String {
    match id {
        Some(id) => format!("{id:?}"),
        None => "<unknown id>".to_string(),
    }
}

/// Half-open character range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SentenceSpan {
    pub start: usize,
    pub end: usize,
}

/// A candidate toponym emitted by one NER backend.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ToponymSpan {
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

/// Validation failure for a single document, before line context is known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        FieldError {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    id: String,
    text: String,
    language: String,
    sentences: Vec<SentenceSpan>,
    gold_countries: BTreeSet<CountryCode>,
    year: i32,
    // byte offset of every char index, plus text.len() at the end
    char_bytes: Vec<usize>,
}

impl Document {
    /// Validates and builds a document. When `sentences` is empty and the
    /// text is not blank, the fallback splitter fills them in.
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        language: impl Into<String>,
        sentences: Vec<SentenceSpan>,
        gold_countries: BTreeSet<CountryCode>,
        year: i32,
    ) -> Result<Self, FieldError> {
        let id = id.into();
        let text = text.into();
        if id.is_empty() {
            return Err(FieldError::new("id", "must be non-empty"));
        }
        let mut char_bytes: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        char_bytes.push(text.len());
        let len = char_bytes.len() - 1;

        let sentences = if sentences.is_empty() {
            split_sentences(&text)
        } else {
            let mut prev_end = 0;
            for (i, s) in sentences.iter().enumerate() {
                if s.start >= s.end {
                    return Err(FieldError::new(
                        format!("sentences[{i}]"),
                        format!("empty or inverted span [{}, {})", s.start, s.end),
                    ));
                }
                if s.end > len {
                    return Err(FieldError::new(
                        format!("sentences[{i}]"),
                        format!("end {} exceeds text length {len}", s.end),
                    ));
                }
                if s.start < prev_end {
                    return Err(FieldError::new(
                        format!("sentences[{i}]"),
                        "sentences must be sorted and non-overlapping",
                    ));
                }
                prev_end = s.end;
            }
            sentences
        };

        Ok(Document {
            id,
            text,
            language: language.into(),
            sentences,
            gold_countries,
            year,
            char_bytes,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn sentences(&self) -> &[SentenceSpan] {
        &self.sentences
    }

    pub fn gold_countries(&self) -> &BTreeSet<CountryCode> {
        &self.gold_countries
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    /// Documents without gold countries are kept but left out of
    /// gold-based evaluation.
    pub fn is_excluded(&self) -> bool {
        self.gold_countries.is_empty()
    }

    /// Length in characters.
    pub fn char_len(&self) -> usize {
        self.char_bytes.len() - 1
    }

    /// Text between two character offsets.
    pub fn slice(&self, start: usize, end: usize) -> Option<&str> {
        if start > end || end > self.char_len() {
            return None;
        }
        Some(&self.text[self.char_bytes[start]..self.char_bytes[end]])
    }

    /// Ordinal of the sentence containing `offset`. Offsets in a gap map to
    /// the next sentence; offsets after the last sentence map to the last.
    pub fn sentence_index(&self, offset: usize) -> Result<usize, CorpusError> {
        if offset >= self.char_len() {
            return Err(CorpusError::OffsetOutOfRange {
                doc_id: self.id.clone(),
                offset,
                len: self.char_len(),
            });
        }
        if self.sentences.is_empty() {
            return Err(CorpusError::NoSentences(self.id.clone()));
        }
        let idx = self.sentences.partition_point(|s| s.end <= offset);
        Ok(idx.min(self.sentences.len() - 1))
    }

    fn check_span(&self, span: &ToponymSpan) -> Result<(), String> {
        if span.start >= span.end {
            return Err(format!(
                "span [{}, {}) has end <= start",
                span.start, span.end
            ));
        }
        match self.slice(span.start, span.end) {
            None => Err(format!(
                "span [{}, {}) exceeds text length {}",
                span.start,
                span.end,
                self.char_len()
            )),
            Some(s) if s != span.surface => Err(format!(
                "surface {:?} does not match text {:?} at [{}, {})",
                span.surface, s, span.start, span.end
            )),
            Some(_) => Ok(()),
        }
    }
}

/// Rule-based splitter for documents that arrive without sentence spans:
/// a sentence ends after `.`, `!` or `?` when followed by whitespace and an
/// uppercase letter. Spans are trimmed of surrounding whitespace.
pub fn split_sentences(text: &str) -> Vec<SentenceSpan> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut out = Vec::new();
    let Some(mut start) = chars.iter().position(|c| !c.is_whitespace()) else {
        return out;
    };
    let mut i = start;
    while i + 1 < n {
        if matches!(chars[i], '.' | '!' | '?') && chars[i + 1].is_whitespace() {
            let mut j = i + 1;
            while j < n && chars[j].is_whitespace() {
                j += 1;
            }
            if j < n && chars[j].is_uppercase() {
                out.push(SentenceSpan { start, end: i + 1 });
                start = j;
                i = j;
                continue;
            }
        }
        i += 1;
    }
    let end = chars
        .iter()
        .rposition(|c| !c.is_whitespace())
        .map_or(start, |p| p + 1);
    if start < end {
        out.push(SentenceSpan { start, end });
    }
    out
}

/// Toponym spans of one NER backend over one document, sorted by start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationLayer {
    pub layer_id: String,
    pub doc_id: String,
    pub spans: Vec<ToponymSpan>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    documents: BTreeMap<String, Document>,
    layers: BTreeMap<(String, String), AnnotationLayer>,
}

impl Corpus {
    /// Builds a corpus, validating every layer against its document.
    /// Spans are sorted by `(start, end)`.
    pub fn from_parts(
        documents: Vec<Document>,
        layers: Vec<AnnotationLayer>,
    ) -> Result<Self, CorpusError> {
        let mut corpus = Corpus::default();
        for (i, doc) in documents.into_iter().enumerate() {
            corpus.insert_document(i + 1, doc)?;
        }
        for layer in layers {
            corpus.insert_layer(0, layer)?;
        }
        Ok(corpus)
    }

    fn insert_document(&mut self, line: usize, doc: Document) -> Result<(), CorpusError> {
        if self.documents.contains_key(doc.id()) {
            return Err(CorpusError::DuplicateId {
                line,
                id: doc.id().to_string(),
            });
        }
        self.documents.insert(doc.id().to_string(), doc);
        Ok(())
    }

    fn insert_layer(&mut self, line: usize, mut layer: AnnotationLayer) -> Result<(), CorpusError> {
        let Some(doc) = self.documents.get(&layer.doc_id) else {
            return Err(CorpusError::DanglingLayer {
                doc_id: layer.doc_id,
                layer_id: layer.layer_id,
            });
        };
        let schema = |field: String, message: String| CorpusError::Schema {
            line,
            doc_id: Some(layer.doc_id.clone()),
            field,
            message,
        };
        if layer.layer_id.is_empty() {
            return Err(schema("layers".into(), "layer id must be non-empty".into()));
        }
        for (i, span) in layer.spans.iter().enumerate() {
            doc.check_span(span)
                .map_err(|m| schema(format!("layers.{}[{i}]", layer.layer_id), m))?;
        }
        layer.spans.sort_by_key(|s| (s.start, s.end));
        self.layers
            .insert((layer.doc_id.clone(), layer.layer_id.clone()), layer);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Documents in id order.
    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.documents.values()
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.documents.get(id)
    }

    pub fn layer(&self, doc_id: &str, layer_id: &str) -> Option<&AnnotationLayer> {
        self.layers.get(&(doc_id.to_string(), layer_id.to_string()))
    }

    /// Spans of a layer on a document; empty when the document lacks it.
    pub fn spans(&self, doc_id: &str, layer_id: &str) -> &[ToponymSpan] {
        self.layer(doc_id, layer_id)
            .map(|l| l.spans.as_slice())
            .unwrap_or(&[])
    }

    /// Every layer id present on at least one document.
    pub fn layer_ids(&self) -> BTreeSet<&str> {
        self.layers.keys().map(|(_, l)| l.as_str()).collect()
    }

    pub fn has_layer(&self, layer_id: &str) -> bool {
        self.layers.keys().any(|(_, l)| l == layer_id)
    }

    pub fn require_layer(&self, layer_id: &str) -> Result<(), CorpusError> {
        if self.has_layer(layer_id) {
            Ok(())
        } else {
            Err(CorpusError::UnknownLayer(layer_id.to_string()))
        }
    }

    /// Distinct surface strings of a layer, compared case-sensitively.
    pub fn toponym_types(&self, layer_id: &str) -> Result<BTreeSet<String>, CorpusError> {
        self.require_layer(layer_id)?;
        Ok(self
            .layers
            .iter()
            .filter(|((_, l), _)| l == layer_id)
            .flat_map(|(_, layer)| layer.spans.iter().map(|s| s.surface.clone()))
            .collect())
    }

    /// Writes the corpus as interchange JSONL, one document per line in id
    /// order.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for doc in self.documents.values() {
            let layers = self
                .layers
                .range((doc.id.clone(), String::new())..)
                .take_while(|((d, _), _)| d == &doc.id)
                .map(|((_, l), layer)| (l.clone(), layer.spans.clone()))
                .collect();
            let record = DocumentRecord {
                id: doc.id.clone(),
                text: doc.text.clone(),
                language: doc.language.clone(),
                sentences: doc.sentences.iter().map(|s| [s.start, s.end]).collect(),
                gold_countries: doc.gold_countries.iter().cloned().collect(),
                year: doc.year,
                layers,
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let io_err = |source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut file = io::BufWriter::new(File::create(path).map_err(io_err)?);
        self.write_jsonl(&mut file).map_err(io_err)?;
        file.flush().map_err(io_err)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DocumentRecord {
    id: String,
    text: String,
    language: String,
    #[serde(default)]
    sentences: Vec<[usize; 2]>,
    gold_countries: Vec<CountryCode>,
    year: i32,
    #[serde(default)]
    layers: BTreeMap<String, Vec<ToponymSpan>>,
}

/// Loads and validates an interchange JSONL corpus.
pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_corpus(BufReader::new(file)).map_err(|e| match e {
        CorpusError::Io { source, .. } => CorpusError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Reads interchange JSONL from any buffered reader. Blank lines are skipped.
pub fn parse_corpus<R: BufRead>(reader: R) -> Result<Corpus, CorpusError> {
    let mut corpus = Corpus::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| CorpusError::Io {
            path: PathBuf::new(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let (doc, layers) = parse_record(line_no, &line)?;
        corpus.insert_document(line_no, doc)?;
        for layer in layers {
            corpus.insert_layer(line_no, layer)?;
        }
    }
    Ok(corpus)
}

fn parse_record(line: usize, raw: &str) -> Result<(Document, Vec<AnnotationLayer>), CorpusError> {
    let schema = |doc_id: Option<String>, field: String, message: String| CorpusError::Schema {
        line,
        doc_id,
        field,
        message,
    };
    let value: serde_json::Value =
        serde_json::from_str(raw).map_err(|e| schema(None, "record".into(), e.to_string()))?;
    let doc_id = value.get("id").and_then(|v| v.as_str()).map(str::to_string);

    let record: DocumentRecord = serde_path_to_error::deserialize(&value).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." {
            "record".to_string()
        } else {
            path
        };
        schema(doc_id.clone(), field, e.into_inner().to_string())
    })?;

    let sentences = record
        .sentences
        .iter()
        .map(|&[start, end]| SentenceSpan { start, end })
        .collect();
    let doc = Document::new(
        record.id.clone(),
        record.text,
        record.language,
        sentences,
        record.gold_countries.into_iter().collect(),
        record.year,
    )
    .map_err(|e| schema(Some(record.id.clone()), e.field, e.message))?;

    let layers = record
        .layers
        .into_iter()
        .map(|(layer_id, spans)| AnnotationLayer {
            layer_id,
            doc_id: record.id.clone(),
            spans,
        })
        .collect();
    Ok((doc, layers))
}
