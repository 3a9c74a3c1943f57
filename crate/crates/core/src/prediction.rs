//! Geographical-focus prediction: map a document's resolved toponyms to a
//! set of countries by majority vote, closeness to the polygon centroid, or
//! proximity to hazard keywords.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::country::CountryCode;
use crate::gazetteer::SourceDb;
use crate::geometry::{self, Hull, Point};
use crate::keywords::{self, KeywordSet};
use crate::resolution::ResolvedToponym;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Majority,
    Centroid,
    Keyword,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Majority, Method::Centroid, Method::Keyword];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Majority => "majority",
            Method::Centroid => "centroid",
            Method::Keyword => "keyword",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "majority" => Ok(Method::Majority),
            "centroid" => Ok(Method::Centroid),
            "keyword" => Ok(Method::Keyword),
            other => Err(format!(
                "unknown method {other:?} (expected majority, centroid or keyword)"
            )),
        }
    }
}

/// How the keyword method picked its toponyms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeywordPath {
    Cooccurrence,
    Nearest,
    NoKeywords,
    NoToponyms,
}

/// Per-prediction counters written alongside the countries.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub toponyms: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removed_outliers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removed_interior: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keyword_occurrences: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keyword_path: Option<KeywordPath>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountryPrediction {
    pub doc_id: String,
    pub layer_id: String,
    pub db: SourceDb,
    pub method: Method,
    pub countries: BTreeSet<CountryCode>,
    pub diagnostics: Diagnostics,
}

/// Prediction dump line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub doc: String,
    pub layer: String,
    pub db: SourceDb,
    pub method: Method,
    pub countries: Vec<CountryCode>,
    pub diagnostics: Diagnostics,
}

impl From<&CountryPrediction> for PredictionRecord {
    fn from(p: &CountryPrediction) -> Self {
        PredictionRecord {
            doc: p.doc_id.clone(),
            layer: p.layer_id.clone(),
            db: p.db,
            method: p.method,
            countries: p.countries.iter().cloned().collect(),
            diagnostics: p.diagnostics.clone(),
        }
    }
}

impl From<PredictionRecord> for CountryPrediction {
    fn from(r: PredictionRecord) -> Self {
        CountryPrediction {
            doc_id: r.doc,
            layer_id: r.layer,
            db: r.db,
            method: r.method,
            countries: r.countries.into_iter().collect(),
            diagnostics: r.diagnostics,
        }
    }
}

/// Countries with the highest count; every tied country is returned.
pub fn majority<'a>(countries: impl IntoIterator<Item = &'a CountryCode>) -> BTreeSet<CountryCode> {
    let mut counts: BTreeMap<&CountryCode, usize> = BTreeMap::new();
    for c in countries {
        *counts.entry(c).or_default() += 1;
    }
    let Some(&top) = counts.values().max() else {
        return BTreeSet::new();
    };
    counts
        .into_iter()
        .filter(|&(_, n)| n == top)
        .map(|(c, _)| c.clone())
        .collect()
}

fn country_of(r: &ResolvedToponym) -> &CountryCode {
    r.place
        .country
        .as_ref()
        .expect("resolved toponyms carry a country")
}

/// Majority vote over every resolved span (repetitions count).
pub fn predict_majority(resolved: &[ResolvedToponym]) -> BTreeSet<CountryCode> {
    majority(resolved.iter().map(country_of))
}

/// Outcome of [`split_outliers`].
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierSplit<T> {
    /// Indices into the input of the points kept, in input order.
    pub kept: Vec<usize>,
    /// Removed points farther from the centroid than average.
    pub removed_far: usize,
    /// Removed points closer to the centroid than average.
    pub removed_interior: usize,
    pub hull: Hull<T>,
}

/// Drops points whose distance to the polygon centroid has an absolute
/// population z-score above 1. Fewer than three points, or distances with
/// no spread, leave the input unchanged.
pub fn split_outliers<T: Float>(
    points: &[Point<T>],
) -> Result<OutlierSplit<T>, geometry::GeometryError> {
    let hull = Hull::build(points)?;
    let all: Vec<usize> = (0..points.len()).collect();
    if points.len() < 3 {
        return Ok(OutlierSplit {
            kept: all,
            removed_far: 0,
            removed_interior: 0,
            hull,
        });
    }
    let c = hull.centroid();
    let dists: Vec<T> = points.iter().map(|p| p.distance(&c)).collect();
    let Some(z) = stats::z_scores(&dists) else {
        return Ok(OutlierSplit {
            kept: all,
            removed_far: 0,
            removed_interior: 0,
            hull,
        });
    };
    let mut split = OutlierSplit {
        kept: Vec::new(),
        removed_far: 0,
        removed_interior: 0,
        hull,
    };
    for (i, z) in z.into_iter().enumerate() {
        if z.abs() <= T::one() {
            split.kept.push(i);
        } else if z > T::zero() {
            split.removed_far += 1;
        } else {
            split.removed_interior += 1;
        }
    }
    Ok(split)
}

pub fn remove_outliers<T: Float>(points: &[Point<T>]) -> Vec<Point<T>> {
    match split_outliers(points) {
        Ok(split) => split.kept.iter().map(|&i| points[i]).collect(),
        Err(_) => Vec::new(),
    }
}

/// Closest-to-centroid prediction. Returns the countries (at most one) and
/// diagnostics.
pub fn predict_centroid(resolved: &[ResolvedToponym]) -> (BTreeSet<CountryCode>, Diagnostics) {
    let mut diag = Diagnostics {
        toponyms: resolved.len(),
        ..Diagnostics::default()
    };
    if resolved.is_empty() {
        diag.points = Some(0);
        return (BTreeSet::new(), diag);
    }
    let mut raw: Vec<Point<f64>> = resolved.iter().map(|r| r.point()).collect();
    geometry::unwrap_longitudes(&mut raw);

    // distinct points, each owned by its first toponym in document order
    let mut points: Vec<Point<f64>> = Vec::new();
    let mut owners: Vec<usize> = Vec::new();
    for (i, p) in raw.iter().enumerate() {
        if !points.contains(p) {
            points.push(*p);
            owners.push(i);
        }
    }
    diag.points = Some(points.len());

    let split = split_outliers(&points).expect("non-empty");
    diag.removed_outliers = Some(split.removed_far + split.removed_interior);
    diag.removed_interior = Some(split.removed_interior);

    let survivors: Vec<Point<f64>> = split.kept.iter().map(|&i| points[i]).collect();
    let centroid = Hull::build(&survivors)
        .expect("survivors non-empty")
        .centroid();
    let mut best: Option<(f64, usize)> = None;
    for (&k, p) in split.kept.iter().zip(&survivors) {
        let d = p.distance(&centroid);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, k));
        }
    }
    let (_, k) = best.expect("non-empty survivors");
    let owner = owners[k];
    diag.selected = Some(owner);
    ([country_of(&resolved[owner]).clone()].into(), diag)
}

/// Keyword-proximity prediction.
///
/// Keeps toponyms whose sentence contains a keyword occurrence. When none
/// qualifies, each keyword occurrence instead selects the nearest preceding
/// toponym in token distance, or the nearest following one when nothing
/// precedes it. The selection is then majority-voted.
pub fn predict_keyword(
    doc: &Document,
    resolved: &[ResolvedToponym],
    keywords: &KeywordSet,
) -> (BTreeSet<CountryCode>, Diagnostics) {
    let occurrences = keywords.occurrences(doc.text());
    let mut diag = Diagnostics {
        toponyms: resolved.len(),
        keyword_occurrences: Some(occurrences.len()),
        ..Diagnostics::default()
    };
    if occurrences.is_empty() {
        diag.keyword_path = Some(KeywordPath::NoKeywords);
        return (BTreeSet::new(), diag);
    }
    if resolved.is_empty() {
        diag.keyword_path = Some(KeywordPath::NoToponyms);
        return (BTreeSet::new(), diag);
    }

    let sentence_of = |offset: usize| doc.sentence_index(offset).ok();
    let keyword_sentences: BTreeSet<usize> = occurrences
        .iter()
        .filter_map(|o| sentence_of(o.start))
        .collect();
    let cooccurring: Vec<&ResolvedToponym> = resolved
        .iter()
        .filter(|r| sentence_of(r.span.start).is_some_and(|s| keyword_sentences.contains(&s)))
        .collect();
    if !cooccurring.is_empty() {
        diag.keyword_path = Some(KeywordPath::Cooccurrence);
        diag.selected = Some(cooccurring.len());
        return (majority(cooccurring.into_iter().map(country_of)), diag);
    }

    let tokens = keywords::tokenize(doc.text());
    let toponym_tokens: Vec<usize> = resolved
        .iter()
        .map(|r| keywords::token_index(&tokens, r.span.start))
        .collect();
    let mut selected: Vec<&ResolvedToponym> = Vec::new();
    for occ in &occurrences {
        let nearest = |preceding: bool| {
            resolved
                .iter()
                .zip(&toponym_tokens)
                .enumerate()
                .filter(|(_, (r, _))| (r.span.start < occ.start) == preceding)
                .min_by_key(|(i, (r, &t))| {
                    // closest token, then closest character offset, then list order
                    let chars = r.span.start.abs_diff(occ.start);
                    (t.abs_diff(occ.token), chars, *i)
                })
                .map(|(_, (r, _))| r)
        };
        if let Some(r) = nearest(true).or_else(|| nearest(false)) {
            selected.push(r);
        }
    }
    diag.keyword_path = Some(KeywordPath::Nearest);
    diag.selected = Some(selected.len());
    (majority(selected.into_iter().map(country_of)), diag)
}

/// Runs one method on one document.
pub fn predict(
    method: Method,
    doc: &Document,
    resolved: &[ResolvedToponym],
    keywords: &KeywordSet,
) -> (BTreeSet<CountryCode>, Diagnostics) {
    match method {
        Method::Majority => (
            predict_majority(resolved),
            Diagnostics {
                toponyms: resolved.len(),
                ..Diagnostics::default()
            },
        ),
        Method::Centroid => predict_centroid(resolved),
        Method::Keyword => predict_keyword(doc, resolved, keywords),
    }
}
