//! Comparison statistics between annotation layers and between predictions
//! and gold countries.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError, ToponymSpan};
use crate::country::CountryCode;
use crate::stats;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction maps cover different documents (only in first: {only_a:?}; only in second: {only_b:?})")]
    KeyMismatch {
        only_a: Vec<String>,
        only_b: Vec<String>,
    },
    #[error("document {0:?} has no gold countries and cannot be scored")]
    EmptyGold(String),
    #[error("document {0:?} is not in the corpus")]
    UnknownDocument(String),
    #[error("no documents to evaluate")]
    NoDocuments,
    #[error("rank correlation undefined: {0}")]
    UndefinedCorrelation(String),
    #[error("unique types need at least 2 layers, got {0}")]
    TooFewLayers(usize),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Span identity by character offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SpanKey {
    pub start: usize,
    pub end: usize,
}

impl From<&ToponymSpan> for SpanKey {
    fn from(s: &ToponymSpan) -> Self {
        SpanKey {
            start: s.start,
            end: s.end,
        }
    }
}

pub fn span_keys(spans: &[ToponymSpan]) -> BTreeSet<SpanKey> {
    spans.iter().map(SpanKey::from).collect()
}

/// Intersection over union; two empty sets agree perfectly.
pub fn doc_iou(a: &BTreeSet<SpanKey>, b: &BTreeSet<SpanKey>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocIou {
    pub doc: String,
    pub iou: f64,
    /// Both layers are empty on this document.
    pub vacuous: bool,
}

/// Per-document IoU between two layers over every document of the corpus.
pub fn layer_iou(corpus: &Corpus, a: &str, b: &str) -> Result<Vec<DocIou>, EvalError> {
    corpus.require_layer(a)?;
    corpus.require_layer(b)?;
    Ok(corpus
        .documents()
        .map(|d| {
            let ka = span_keys(corpus.spans(d.id(), a));
            let kb = span_keys(corpus.spans(d.id(), b));
            DocIou {
                doc: d.id().to_string(),
                iou: doc_iou(&ka, &kb),
                vacuous: ka.is_empty() && kb.is_empty(),
            }
        })
        .collect())
}

/// Country sets keyed by document id.
pub type PredictionMap = BTreeMap<String, BTreeSet<CountryCode>>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Agreement {
    pub percent: f64,
    pub documents: usize,
    /// Documents where at least one side predicted nothing.
    pub empty_predictions: usize,
}

pub fn bilateral_agreement(a: &PredictionMap, b: &PredictionMap) -> Result<Agreement, EvalError> {
    if !a.keys().eq(b.keys()) {
        return Err(EvalError::KeyMismatch {
            only_a: a.keys().filter(|k| !b.contains_key(*k)).cloned().collect(),
            only_b: b.keys().filter(|k| !a.contains_key(*k)).cloned().collect(),
        });
    }
    if a.is_empty() {
        return Err(EvalError::NoDocuments);
    }
    let mut same = 0;
    let mut empty = 0;
    for (sa, sb) in a.values().zip(b.values()) {
        if sa == sb {
            same += 1;
        }
        if sa.is_empty() || sb.is_empty() {
            empty += 1;
        }
    }
    Ok(Agreement {
        percent: 100.0 * same as f64 / a.len() as f64,
        documents: a.len(),
        empty_predictions: empty,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GoldMatch {
    pub exact: f64,
    pub partial: f64,
    pub documents: usize,
    pub empty_predictions: usize,
}

/// Exact and overlapping agreement with gold over the documents of `preds`.
pub fn gold_match(preds: &PredictionMap, corpus: &Corpus) -> Result<GoldMatch, EvalError> {
    if preds.is_empty() {
        return Err(EvalError::NoDocuments);
    }
    let (mut exact, mut partial, mut empty) = (0usize, 0usize, 0usize);
    for (id, pred) in preds {
        let doc = corpus
            .document(id)
            .ok_or_else(|| EvalError::UnknownDocument(id.clone()))?;
        let gold = doc.gold_countries();
        if gold.is_empty() {
            return Err(EvalError::EmptyGold(id.clone()));
        }
        if pred.is_empty() {
            empty += 1;
            continue;
        }
        if pred == gold {
            exact += 1;
        }
        if !pred.is_disjoint(gold) {
            partial += 1;
        }
    }
    let n = preds.len() as f64;
    Ok(GoldMatch {
        exact: 100.0 * exact as f64 / n,
        partial: 100.0 * partial as f64 / n,
        documents: preds.len(),
        empty_predictions: empty,
    })
}

/// Gold countries of every non-excluded document.
pub fn gold_map(corpus: &Corpus) -> PredictionMap {
    corpus
        .documents()
        .filter(|d| !d.is_excluded())
        .map(|d| (d.id().to_string(), d.gold_countries().clone()))
        .collect()
}

/// Countries ordered by document count, descending, ties by code.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RankedList {
    pub entries: Vec<(CountryCode, usize)>,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn countries(&self) -> BTreeSet<CountryCode> {
        self.entries.iter().map(|(c, _)| c.clone()).collect()
    }

    pub fn count(&self, country: &CountryCode) -> Option<usize> {
        self.entries
            .iter()
            .find(|(c, _)| c == country)
            .map(|&(_, n)| n)
    }

    pub fn total(&self) -> usize {
        self.entries.iter().map(|&(_, n)| n).sum()
    }

    pub fn restricted_to(&self, keep: &BTreeSet<CountryCode>) -> RankedList {
        RankedList {
            entries: self
                .entries
                .iter()
                .filter(|(c, _)| keep.contains(c))
                .cloned()
                .collect(),
        }
    }
}

pub fn country_ranking<'a>(
    sets: impl IntoIterator<Item = &'a BTreeSet<CountryCode>>,
    min_docs: usize,
) -> RankedList {
    let mut counts: BTreeMap<&CountryCode, usize> = BTreeMap::new();
    for set in sets {
        for c in set {
            *counts.entry(c).or_default() += 1;
        }
    }
    let mut entries: Vec<(CountryCode, usize)> = counts
        .into_iter()
        .filter(|&(_, n)| n >= min_docs)
        .map(|(c, n)| (c.clone(), n))
        .collect();
    // stable sort keeps the code order from the map for equal counts
    entries.sort_by_key(|e| std::cmp::Reverse(e.1));
    RankedList { entries }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation {
    pub spearman: f64,
    pub kendall: f64,
    pub shared: usize,
}

/// Spearman (average ranks) and Kendall tau-b over the shared countries.
pub fn rank_correlation(a: &RankedList, b: &RankedList) -> Result<Correlation, EvalError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (c, n) in &a.entries {
        if let Some(m) = b.count(c) {
            xs.push(*n as f64);
            ys.push(m as f64);
        }
    }
    if xs.len() < 2 {
        return Err(EvalError::UndefinedCorrelation(format!(
            "{} shared countries, need at least 2",
            xs.len()
        )));
    }
    let undefined = |e: stats::StatsError| EvalError::UndefinedCorrelation(e.to_string());
    Ok(Correlation {
        spearman: stats::spearman(&xs, &ys).map_err(undefined)?,
        kendall: stats::kendall_tau_b(&xs, &ys).map_err(undefined)?,
        shared: xs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerStats {
    pub mean: f64,
    pub sd: f64,
    pub spans: usize,
    pub types: usize,
    pub documents: usize,
}

/// Spans per document over all documents, including those without spans.
pub fn layer_stats(corpus: &Corpus, layer: &str) -> Result<LayerStats, EvalError> {
    let types = corpus.toponym_types(layer)?.len();
    let counts: Vec<f64> = corpus
        .documents()
        .map(|d| corpus.spans(d.id(), layer).len() as f64)
        .collect();
    Ok(LayerStats {
        mean: stats::mean(&counts).unwrap_or(0.0),
        sd: stats::population_std(&counts).unwrap_or(0.0),
        spans: counts.iter().sum::<f64>() as usize,
        types,
        documents: counts.len(),
    })
}

/// Types found in exactly one layer, per layer.
pub fn unique_types(
    layers: &BTreeMap<String, BTreeSet<String>>,
) -> Result<BTreeMap<String, BTreeSet<String>>, EvalError> {
    if layers.len() < 2 {
        return Err(EvalError::TooFewLayers(layers.len()));
    }
    Ok(layers
        .iter()
        .map(|(id, types)| {
            let others: BTreeSet<&String> = layers
                .iter()
                .filter(|(other, _)| *other != id)
                .flat_map(|(_, t)| t)
                .collect();
            let own = types
                .iter()
                .filter(|t| !others.contains(t))
                .cloned()
                .collect();
            (id.clone(), own)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_corpus;

    fn keys(xs: &[(usize, usize)]) -> BTreeSet<SpanKey> {
        xs.iter()
            .map(|&(start, end)| SpanKey { start, end })
            .collect()
    }

    fn set(xs: &[&str]) -> BTreeSet<CountryCode> {
        xs.iter().map(|c| CountryCode::parse(c).unwrap()).collect()
    }

    fn pmap(xs: &[(&str, &[&str])]) -> PredictionMap {
        xs.iter().map(|(d, cs)| (d.to_string(), set(cs))).collect()
    }

    fn ranked(xs: &[(&str, usize)]) -> RankedList {
        RankedList {
            entries: xs
                .iter()
                .map(|&(c, n)| (CountryCode::parse(c).unwrap(), n))
                .collect(),
        }
    }

    #[test]
    fn iou_examples() {
        let a = keys(&[(0, 3), (5, 9)]);
        assert_eq!(doc_iou(&a, &a), 1.0);
        assert_eq!(doc_iou(&a, &keys(&[(10, 12)])), 0.0);
        assert_eq!(doc_iou(&a, &keys(&[(0, 3), (20, 22)])), 1.0 / 3.0);
        assert_eq!(doc_iou(&keys(&[]), &keys(&[])), 1.0);
        // same start, different end is a different span
        assert_eq!(doc_iou(&keys(&[(0, 3)]), &keys(&[(0, 4)])), 0.0);
    }

    #[test]
    fn agreement_examples() {
        let x = pmap(&[
            ("a", &["bra"]),
            ("b", &["deu"]),
            ("c", &[]),
            ("d", &["fra"]),
        ]);
        assert_eq!(bilateral_agreement(&x, &x).unwrap().percent, 100.0);
        let mut y = x.clone();
        y.insert("d".into(), set(&["fra", "ita"]));
        let ag = bilateral_agreement(&x, &y).unwrap();
        assert_eq!(ag.percent, 75.0);
        assert_eq!(ag.empty_predictions, 1);
        y.remove("d");
        assert!(matches!(
            bilateral_agreement(&x, &y),
            Err(EvalError::KeyMismatch { .. })
        ));
    }

    const CORPUS: &str = r#"{"id":"a","text":"Berlin","language":"de","sentences":[[0,6]],"gold_countries":["bra"],"year":2024,"layers":{"x":[{"start":0,"end":6,"surface":"Berlin"}],"y":[]}}
{"id":"b","text":"Berlin Bayern Rom","language":"de","sentences":[[0,17]],"gold_countries":["bra"],"year":2024,"layers":{"x":[{"start":0,"end":6,"surface":"Berlin"},{"start":7,"end":13,"surface":"Bayern"},{"start":14,"end":17,"surface":"Rom"}],"y":[{"start":14,"end":17,"surface":"Rom"}]}}
{"id":"c","text":"Nichts","language":"de","sentences":[[0,6]],"gold_countries":[],"year":2024,"layers":{}}
"#;

    #[test]
    fn gold_examples() {
        let corpus = parse_corpus(CORPUS.as_bytes()).unwrap();
        let g = gold_match(&pmap(&[("a", &["bra"]), ("b", &["bra", "arg"])]), &corpus).unwrap();
        assert_eq!((g.exact, g.partial), (50.0, 100.0));
        let g = gold_match(&pmap(&[("a", &[]), ("b", &["bra"])]), &corpus).unwrap();
        assert_eq!((g.exact, g.partial, g.empty_predictions), (50.0, 50.0, 1));
        assert!(matches!(
            gold_match(&pmap(&[("c", &["deu"])]), &corpus),
            Err(EvalError::EmptyGold(_))
        ));
        assert_eq!(gold_map(&corpus).len(), 2);
    }

    #[test]
    fn ranking_examples() {
        let docs = [set(&["bra"]), set(&["bra"]), set(&["deu"])];
        assert_eq!(country_ranking(&docs, 1), ranked(&[("bra", 2), ("deu", 1)]));
        assert!(country_ranking(&docs, 3).is_empty());
        let tied = [set(&["deu"]), set(&["bra"]), set(&["deu", "bra"])];
        assert_eq!(country_ranking(&tied, 1), ranked(&[("bra", 2), ("deu", 2)]));
        assert_eq!(country_ranking(&tied, 1).total(), 4);
    }

    #[test]
    fn correlation_examples() {
        let a = ranked(&[("aut", 4), ("bel", 3), ("che", 2), ("dnk", 1)]);
        let c = rank_correlation(&a, &a).unwrap();
        assert_eq!((c.spearman, c.kendall), (1.0, 1.0));
        let rev = ranked(&[("dnk", 4), ("che", 3), ("bel", 2), ("aut", 1)]);
        let c = rank_correlation(&a, &rev).unwrap();
        assert_eq!((c.spearman, c.kendall), (-1.0, -1.0));
        let swapped = ranked(&[("aut", 4), ("che", 3), ("bel", 2), ("dnk", 1)]);
        let c = rank_correlation(&a, &swapped).unwrap();
        assert!((c.spearman - 0.8).abs() < 1e-12);
        assert!((c.kendall - 2.0 / 3.0).abs() < 1e-12);

        let lone = ranked(&[("aut", 4), ("zwe", 1)]);
        assert!(matches!(
            rank_correlation(&a, &lone),
            Err(EvalError::UndefinedCorrelation(_))
        ));
    }

    #[test]
    fn layer_stats_examples() {
        let corpus = parse_corpus(CORPUS.as_bytes()).unwrap();
        let s = layer_stats(&corpus, "x").unwrap();
        // counts [1, 3, 0]
        assert_eq!((s.spans, s.types, s.documents), (4, 3, 3));
        assert!((s.mean - 4.0 / 3.0).abs() < 1e-12);
        assert!((s.sd - (14.0f64 / 9.0).sqrt()).abs() < 1e-12);
        assert!(layer_stats(&corpus, "zzz").is_err());
    }

    #[test]
    fn unique_type_examples() {
        let layers = |xs: &[(&str, &[&str])]| -> BTreeMap<String, BTreeSet<String>> {
            xs.iter()
                .map(|(l, ts)| (l.to_string(), ts.iter().map(|t| t.to_string()).collect()))
                .collect()
        };
        let u = unique_types(&layers(&[("a", &["x", "y"]), ("b", &["y", "z"])])).unwrap();
        assert_eq!(u["a"], ["x".to_string()].into());
        assert_eq!(u["b"], ["z".to_string()].into());
        let u = unique_types(&layers(&[("a", &["x"]), ("b", &["x"])])).unwrap();
        assert!(u.values().all(BTreeSet::is_empty));
        assert!(matches!(
            unique_types(&layers(&[("a", &["x"])])),
            Err(EvalError::TooFewLayers(1))
        ));
    }
}
