use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::RwLock;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{GazetteerError, GazetteerMatch, MatchRecord, SourceDb, MAX_MATCHES};

#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub fetched_at: String,
    pub matches: Vec<GazetteerMatch>,
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    db: SourceDb,
    query: String,
    fetched_at: String,
    matches: Vec<MatchRecord>,
}

/// Persistent per-(database, query) store of raw gazetteer results.
///
/// Reads may proceed concurrently; writes take an exclusive lock. Entries,
/// including empty results, never expire.
#[derive(Debug, Default)]
pub struct GazetteerCache {
    entries: RwLock<BTreeMap<(SourceDb, String), CacheEntry>>,
}

impl GazetteerCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, db: SourceDb, query: &str) -> bool {
        self.entries
            .read()
            .unwrap()
            .contains_key(&(db, query.to_string()))
    }

    pub fn get(&self, db: SourceDb, query: &str) -> Option<Vec<GazetteerMatch>> {
        self.entries
            .read()
            .unwrap()
            .get(&(db, query.to_string()))
            .map(|e| e.matches.clone())
    }

    pub fn entry(&self, db: SourceDb, query: &str) -> Option<CacheEntry> {
        self.entries
            .read()
            .unwrap()
            .get(&(db, query.to_string()))
            .cloned()
    }

    /// Stores matches stamped with the current UTC time.
    pub fn insert(&self, db: SourceDb, query: &str, matches: Vec<GazetteerMatch>) {
        let now = Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true);
        self.insert_at(db, query, &now, matches);
    }

    /// Stores matches with an explicit timestamp, truncated to
    /// [`MAX_MATCHES`].
    pub fn insert_at(
        &self,
        db: SourceDb,
        query: &str,
        fetched_at: &str,
        mut matches: Vec<GazetteerMatch>,
    ) {
        matches.truncate(MAX_MATCHES);
        self.entries.write().unwrap().insert(
            (db, query.to_string()),
            CacheEntry {
                fetched_at: fetched_at.to_string(),
                matches,
            },
        );
    }

    /// Queries of `db` that have no entry, sorted and deduplicated.
    pub fn missing<'a>(
        &self,
        db: SourceDb,
        queries: impl IntoIterator<Item = &'a str>,
    ) -> Vec<(SourceDb, String)> {
        let entries = self.entries.read().unwrap();
        let mut out: Vec<(SourceDb, String)> = queries
            .into_iter()
            .filter(|q| !entries.contains_key(&(db, q.to_string())))
            .map(|q| (db, q.to_string()))
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Canonical JSONL form: one line per entry in (db, query) order.
    pub fn to_jsonl(&self) -> Vec<u8> {
        let entries = self.entries.read().unwrap();
        let mut out = Vec::new();
        for ((db, query), entry) in entries.iter() {
            let line = CacheLine {
                db: *db,
                query: query.clone(),
                fetched_at: entry.fetched_at.clone(),
                matches: entry.matches.iter().map(MatchRecord::from_match).collect(),
            };
            serde_json::to_writer(&mut out, &line).expect("cache line serializes");
            out.push(b'\n');
        }
        out
    }

    pub fn sha256(&self) -> String {
        hex_digest(&self.to_jsonl())
    }

    pub fn parse<R: BufRead>(reader: R, path: &Path) -> Result<Self, GazetteerError> {
        let cache = GazetteerCache::new();
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
            let rec: CacheLine =
                serde_json::from_str(&line).map_err(|e| format(i + 1, e.to_string()))?;
            if rec.matches.len() > MAX_MATCHES {
                return Err(format(
                    i + 1,
                    format!(
                        "{} matches exceed the limit of {MAX_MATCHES}",
                        rec.matches.len()
                    ),
                ));
            }
            if rec.matches.windows(2).any(|w| w[0].rank >= w[1].rank) {
                return Err(format(i + 1, "matches are not in rank order".into()));
            }
            let matches = rec
                .matches
                .into_iter()
                .map(|m| m.into_match(&rec.query, rec.db))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| format(i + 1, e.to_string()))?;
            cache.insert_at(rec.db, &rec.query, &rec.fetched_at, matches);
        }
        Ok(cache)
    }

    pub fn load(path: &Path) -> Result<Self, GazetteerError> {
        let file = fs::File::open(path).map_err(|source| GazetteerError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        GazetteerCache::parse(BufReader::new(file), path)
    }

    /// Loads the cache, treating a missing file as an empty cache.
    pub fn load_or_empty(path: &Path) -> Result<Self, GazetteerError> {
        if path.exists() {
            GazetteerCache::load(path)
        } else {
            Ok(GazetteerCache::new())
        }
    }

    /// Writes the canonical form through a temporary file and rename.
    pub fn save(&self, path: &Path) -> Result<(), GazetteerError> {
        let io_err = |source| GazetteerError::Io {
            path: path.to_path_buf(),
            source,
        };
        let tmp = path.with_extension("jsonl.tmp");
        {
            let mut f = fs::File::create(&tmp).map_err(io_err)?;
            f.write_all(&self.to_jsonl()).map_err(io_err)?;
            f.sync_all().map_err(io_err)?;
        }
        fs::rename(&tmp, path).map_err(io_err)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
