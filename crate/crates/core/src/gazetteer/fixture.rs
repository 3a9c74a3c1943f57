use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::Deserialize;

use super::{GazetteerError, GazetteerMatch, Geocoder, MatchRecord, SourceDb};

#[derive(Deserialize)]
struct FixtureLine {
    query: String,
    matches: Vec<MatchRecord>,
}

/// Offline gazetteer backed by a JSONL file of `{"query", "matches"}` lines.
/// Unknown queries return no matches.
#[derive(Debug, Default)]
pub struct FixtureGazetteer {
    entries: HashMap<String, Vec<GazetteerMatch>>,
    requests: AtomicUsize,
}

impl FixtureGazetteer {
    pub fn from_entries(entries: impl IntoIterator<Item = (String, Vec<GazetteerMatch>)>) -> Self {
        FixtureGazetteer {
            entries: entries.into_iter().collect(),
            requests: AtomicUsize::new(0),
        }
    }

    pub fn parse<R: BufRead>(reader: R, path: &Path) -> Result<Self, GazetteerError> {
        let mut entries = HashMap::new();
        let format = |line: usize, message: String| GazetteerError::Format {
            path: path.to_path_buf(),
            line,
            message,
        };
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| GazetteerError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: FixtureLine =
                serde_json::from_str(&line).map_err(|e| format(i + 1, e.to_string()))?;
            if rec.matches.windows(2).any(|w| w[0].rank >= w[1].rank) {
                return Err(format(i + 1, "matches are not in rank order".into()));
            }
            let matches = rec
                .matches
                .into_iter()
                .map(|m| m.into_match(&rec.query, SourceDb::Fixture))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| format(i + 1, e.to_string()))?;
            if entries.insert(rec.query.clone(), matches).is_some() {
                return Err(format(i + 1, format!("duplicate query {:?}", rec.query)));
            }
        }
        Ok(FixtureGazetteer {
            entries,
            requests: AtomicUsize::new(0),
        })
    }

    pub fn load(path: &Path) -> Result<Self, GazetteerError> {
        let file = fs::File::open(path).map_err(|source| GazetteerError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        FixtureGazetteer::parse(BufReader::new(file), path)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Geocoder for FixtureGazetteer {
    fn db(&self) -> SourceDb {
        SourceDb::Fixture
    }

    fn search(&self, toponym: &str, limit: usize) -> Result<Vec<GazetteerMatch>, GazetteerError> {
        self.requests.fetch_add(1, Ordering::SeqCst);
        Ok(self
            .entries
            .get(toponym)
            .map(|ms| ms.iter().take(limit).cloned().collect())
            .unwrap_or_default())
    }

    fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}
