//! Gazetteer querying, caching and match filtering.

mod cache;
mod fixture;
mod remote;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError};
use crate::country::CountryCode;

pub use cache::{hex_digest, CacheEntry, GazetteerCache};
pub use fixture::FixtureGazetteer;
pub use remote::{
    parse_geonames, parse_nominatim, DailyBudget, GeonamesClient, MinIntervalLimiter,
    NominatimClient, GEONAMES_USER_ENV, NOMINATIM_URL_ENV,
};

/// Matches kept per query.
pub const MAX_MATCHES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceDb {
    Nominatim,
    Geonames,
    Fixture,
}

impl SourceDb {
    pub fn as_str(&self) -> &'static str {
        match self {
            SourceDb::Nominatim => "nominatim",
            SourceDb::Geonames => "geonames",
            SourceDb::Fixture => "fixture",
        }
    }
}

impl fmt::Display for SourceDb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceDb {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nominatim" => Ok(SourceDb::Nominatim),
            "geonames" => Ok(SourceDb::Geonames),
            "fixture" => Ok(SourceDb::Fixture),
            other => Err(format!(
                "unknown database {other:?} (expected nominatim, geonames or fixture)"
            )),
        }
    }
}

#[derive(Debug, Error)]
pub enum GazetteerError {
    #[error("transport error: {message}")]
    Transport { message: String, retryable: bool },
    #[error("throttled by remote{}", .retry_after.map(|d| format!(", retry after {}s", d.as_secs_f64())).unwrap_or_default())]
    Throttled { retry_after: Option<Duration> },
    #[error("empty toponym query")]
    EmptyQuery,
    #[error("malformed response: {0}")]
    Response(String),
    #[error("invalid match for {query:?}: {message}")]
    InvalidMatch { query: String, message: String },
    #[error("failed to access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("cache is missing {} queries: {}", .missing.len(), preview(.missing))]
    IncompleteCache { missing: Vec<(SourceDb, String)> },
    #[error("layer {0:?} has no toponym types; coverage is undefined")]
    NoTypes(String),
    #[error("missing configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

fn preview(missing: &[(SourceDb, String)]) -> String {
    let shown: Vec<String> = missing
        .iter()
        .take(10)
        .map(|(db, q)| format!("{db}:{q:?}"))
        .collect();
    let more = missing.len().saturating_sub(10);
    if more > 0 {
        format!("{} (+{more} more)", shown.join(", "))
    } else {
        shown.join(", ")
    }
}

impl GazetteerError {
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            GazetteerError::Transport {
                retryable: true,
                ..
            } | GazetteerError::Throttled { .. }
        )
    }
}

/// One candidate place returned for a toponym query.
#[derive(Debug, Clone, PartialEq)]
pub struct GazetteerMatch {
    pub query: String,
    pub latitude: f64,
    pub longitude: f64,
    pub country: Option<CountryCode>,
    /// 1-based position in the source's result ordering.
    pub rank: u32,
    pub place_class: String,
    pub source_db: SourceDb,
}

impl GazetteerMatch {
    pub fn validate(&self) -> Result<(), GazetteerError> {
        let invalid = |message: String| GazetteerError::InvalidMatch {
            query: self.query.clone(),
            message,
        };
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err(invalid(format!("latitude {} out of range", self.latitude)));
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return Err(invalid(format!(
                "longitude {} out of range",
                self.longitude
            )));
        }
        if self.rank == 0 {
            return Err(invalid("rank must be >= 1".into()));
        }
        Ok(())
    }

    pub fn point(&self) -> crate::GeoPoint {
        crate::GeoPoint::new(self.latitude, self.longitude)
    }
}

/// Wire form of a match inside cache and fixture files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct MatchRecord {
    pub lat: f64,
    pub lon: f64,
    pub country: Option<CountryCode>,
    pub rank: u32,
    pub class: String,
}

impl MatchRecord {
    pub(crate) fn from_match(m: &GazetteerMatch) -> Self {
        MatchRecord {
            lat: m.latitude,
            lon: m.longitude,
            country: m.country.clone(),
            rank: m.rank,
            class: m.place_class.clone(),
        }
    }

    pub(crate) fn into_match(
        self,
        query: &str,
        db: SourceDb,
    ) -> Result<GazetteerMatch, GazetteerError> {
        let m = GazetteerMatch {
            query: query.to_string(),
            latitude: self.lat,
            longitude: self.lon,
            country: self.country,
            rank: self.rank,
            place_class: self.class,
            source_db: db,
        };
        m.validate()?;
        Ok(m)
    }
}

/// A source of gazetteer matches.
pub trait Geocoder: Send + Sync {
    fn db(&self) -> SourceDb;

    /// Fetches up to `limit` matches in source order.
    fn search(&self, toponym: &str, limit: usize) -> Result<Vec<GazetteerMatch>, GazetteerError>;

    /// Number of searches that reached the underlying source.
    fn request_count(&self) -> usize;
}

/// Returns up to `limit` matches for `toponym`, serving from the cache when
/// possible. Misses fetch [`MAX_MATCHES`] results and store them (including
/// empty results) before returning.
pub fn query_remote(
    geocoder: &dyn Geocoder,
    cache: &GazetteerCache,
    toponym: &str,
    limit: usize,
) -> Result<Vec<GazetteerMatch>, GazetteerError> {
    if toponym.is_empty() {
        return Err(GazetteerError::EmptyQuery);
    }
    let limit = limit.min(MAX_MATCHES);
    let db = geocoder.db();
    if let Some(mut hit) = cache.get(db, toponym) {
        hit.truncate(limit);
        return Ok(hit);
    }
    let fetched = geocoder.search(toponym, MAX_MATCHES)?;
    cache.insert(db, toponym, fetched.clone());
    let mut out = fetched;
    out.truncate(limit);
    Ok(out)
}

/// Drops matches without a country, then keeps only the best-ranked match
/// among those sharing query surface and country. Survivors keep their
/// relative order.
pub fn filter_matches(raw: &[GazetteerMatch]) -> Vec<GazetteerMatch> {
    let mut best: HashMap<(&str, &CountryCode), usize> = HashMap::new();
    for (i, m) in raw.iter().enumerate() {
        let Some(country) = &m.country else { continue };
        best.entry((m.query.as_str(), country))
            .and_modify(|b| {
                if m.rank < raw[*b].rank {
                    *b = i;
                }
            })
            .or_insert(i);
    }
    let keep: BTreeSet<usize> = best.into_values().collect();
    keep.into_iter().map(|i| raw[i].clone()).collect()
}

/// Fraction of a layer's toponym types with at least one match surviving
/// [`filter_matches`].
pub fn coverage_stats(
    corpus: &Corpus,
    layer_id: &str,
    db: SourceDb,
    cache: &GazetteerCache,
) -> Result<f64, GazetteerError> {
    let types = corpus.toponym_types(layer_id)?;
    if types.is_empty() {
        return Err(GazetteerError::NoTypes(layer_id.to_string()));
    }
    let missing = cache.missing(db, types.iter().map(String::as_str));
    if !missing.is_empty() {
        return Err(GazetteerError::IncompleteCache { missing });
    }
    let matched = types
        .iter()
        .filter(|t| {
            let raw = cache.get(db, t).unwrap_or_default();
            !filter_matches(&raw).is_empty()
        })
        .count();
    Ok(matched as f64 / types.len() as f64)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn m(query: &str, country: Option<&str>, rank: u32) -> GazetteerMatch {
        GazetteerMatch {
            query: query.into(),
            latitude: rank as f64,
            longitude: -(rank as f64),
            country: country.map(|c| CountryCode::parse(c).unwrap()),
            rank,
            place_class: "city".into(),
            source_db: SourceDb::Fixture,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::m;
    use super::*;
    use crate::corpus::{AnnotationLayer, Document, ToponymSpan};

    #[test]
    fn filter_drops_and_dedups() {
        let raw = [
            m("X", Some("deu"), 1),
            m("X", None, 2),
            m("X", Some("deu"), 3),
        ];
        assert_eq!(filter_matches(&raw), vec![raw[0].clone()]);

        let raw = [m("X", Some("deu"), 1), m("X", Some("fra"), 2)];
        assert_eq!(filter_matches(&raw), raw.to_vec());

        assert!(filter_matches(&[]).is_empty());
    }

    #[test]
    fn filter_keeps_best_rank_when_unsorted() {
        let raw = [
            m("X", Some("fra"), 4),
            m("X", Some("deu"), 3),
            m("X", Some("fra"), 2),
        ];
        assert_eq!(filter_matches(&raw), vec![raw[1].clone(), raw[2].clone()]);
    }

    #[test]
    fn source_db_names() {
        for db in [SourceDb::Nominatim, SourceDb::Geonames, SourceDb::Fixture] {
            assert_eq!(db.as_str().parse::<SourceDb>().unwrap(), db);
        }
        assert!("osm".parse::<SourceDb>().is_err());
    }

    fn corpus_with(surfaces: &[&str]) -> Corpus {
        let text = surfaces.join(" ");
        let doc = Document::new(
            "d",
            text.clone(),
            "de",
            vec![],
            [CountryCode::parse("deu").unwrap()].into(),
            2020,
        )
        .unwrap();
        let mut spans = Vec::new();
        let mut pos = 0;
        for s in surfaces {
            let n = s.chars().count();
            spans.push(ToponymSpan {
                start: pos,
                end: pos + n,
                surface: s.to_string(),
            });
            pos += n + 1;
        }
        let layers = vec![
            AnnotationLayer {
                layer_id: "l".into(),
                doc_id: "d".into(),
                spans,
            },
            AnnotationLayer {
                layer_id: "empty".into(),
                doc_id: "d".into(),
                spans: vec![],
            },
        ];
        Corpus::from_parts(vec![doc], layers).unwrap()
    }

    #[test]
    fn coverage_counts_surviving_types() {
        let corpus = corpus_with(&["A", "B", "C", "D"]);
        let cache = GazetteerCache::new();
        let db = SourceDb::Fixture;
        cache.insert(db, "A", vec![m("A", Some("deu"), 1)]);
        cache.insert(db, "B", vec![m("B", None, 1)]);
        cache.insert(db, "C", vec![]);
        assert!(matches!(
            coverage_stats(&corpus, "l", db, &cache),
            Err(GazetteerError::IncompleteCache { ref missing }) if missing == &[(db, "D".to_string())]
        ));
        cache.insert(
            db,
            "D",
            vec![m("D", Some("fra"), 1), m("D", Some("fra"), 2)],
        );
        assert_eq!(coverage_stats(&corpus, "l", db, &cache).unwrap(), 0.5);

        cache.insert(db, "B", vec![m("B", Some("ita"), 1)]);
        cache.insert(db, "C", vec![m("C", Some("ita"), 1)]);
        assert_eq!(coverage_stats(&corpus, "l", db, &cache).unwrap(), 1.0);

        assert!(matches!(
            coverage_stats(&corpus, "empty", db, &cache),
            Err(GazetteerError::NoTypes(_))
        ));
    }
}
