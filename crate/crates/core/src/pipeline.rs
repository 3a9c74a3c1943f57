//! Stage functions behind the command-line subcommands.
//!
//! A [`Session`] holds the validated configuration together with the loaded
//! corpus, keyword set and gazetteer cache. Stages read from it and write
//! artifacts to the output directory; `run` is exactly geocode, predict and
//! evaluate in sequence, with evaluation reading the predictions back from
//! disk so the composed subcommands and `run` share one code path.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::thread;
use std::time::Duration;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::corpus::{load_corpus, Corpus, CorpusError};
use crate::evaluation::EvalError;
use crate::gazetteer::{
    filter_matches, query_remote, FixtureGazetteer, GazetteerCache, GazetteerError, Geocoder,
    GeonamesClient, NominatimClient, SourceDb, MAX_MATCHES,
};
use crate::keywords::{KeywordError, KeywordSet};
use crate::prediction::{self, CountryPrediction, PredictionRecord};
use crate::report::{self, Provenance};
use crate::resolution::{resolve_document, MatchTable, ResolvedRecord, ResolvedToponym};

/// Public Nominatim asks for at most one request per second.
pub const NOMINATIM_INTERVAL: Duration = Duration::from_secs(1);
/// Free GeoNames accounts get 20,000 credits per day.
pub const GEONAMES_DAILY_BUDGET: u32 = 20_000;
const BACKOFF_BASE: Duration = Duration::from_millis(250);

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Keywords(#[from] KeywordError),
    #[error(transparent)]
    Gazetteer(#[from] GazetteerError),
    #[error("geocoding incomplete: {} queries failed, progress saved to {}", .failed.len(), .cache.display())]
    PartialGeocode {
        failed: Vec<FailedQuery>,
        cache: PathBuf,
        summary: Vec<GeocodeSummary>,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {message}")]
    Predictions { path: PathBuf, message: String },
    #[error("failed to write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(ConfigError::Io { .. }) => 1,
            PipelineError::Config(_)
            | PipelineError::Validation(_)
            | PipelineError::Keywords(_) => 2,
            PipelineError::Corpus(CorpusError::Io { .. }) => 1,
            PipelineError::Corpus(_) => 2,
            PipelineError::Gazetteer(GazetteerError::IncompleteCache { .. }) => 3,
            PipelineError::Gazetteer(GazetteerError::Format { .. } | GazetteerError::Config(_)) => {
                2
            }
            PipelineError::Gazetteer(_) => 1,
            PipelineError::PartialGeocode { .. } => 1,
            PipelineError::Eval(_) | PipelineError::Predictions { .. } => 4,
            PipelineError::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FailedQuery {
    pub db: SourceDb,
    pub query: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GeocodeSummary {
    pub db: SourceDb,
    pub types: usize,
    pub cached: usize,
    pub fetched: usize,
    pub failed: usize,
    pub requests: usize,
}

/// Resolved toponyms of every document for one (database, layer).
#[derive(Debug, Clone)]
pub struct ResolvedLayer {
    pub db: SourceDb,
    pub layer: String,
    /// In document id order.
    pub docs: Vec<(String, Vec<ResolvedToponym>)>,
}

pub struct Session {
    pub config: RunConfig,
    pub corpus: Corpus,
    pub keywords: KeywordSet,
    pub cache: GazetteerCache,
    pool: rayon::ThreadPool,
}

impl Session {
    pub fn open(config: RunConfig) -> Result<Self, PipelineError> {
        let corpus = load_corpus(&config.corpus)?;
        for layer in &config.layers {
            if !corpus.has_layer(layer) {
                return Err(PipelineError::Validation(format!(
                    "layer {layer:?} does not occur in {}",
                    config.corpus.display()
                )));
            }
        }
        let keywords = if config.keywords.as_os_str().is_empty() {
            KeywordSet::new(Vec::new(), config.keyword_mode)
        } else {
            KeywordSet::load(&config.keywords, config.keyword_mode)?
        };
        let cache = GazetteerCache::load_or_empty(&config.cache)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| PipelineError::Validation(format!("thread pool: {e}")))?;
        Ok(Session {
            config,
            corpus,
            keywords,
            cache,
            pool,
        })
    }

    /// Distinct toponym types across the configured layers, sorted.
    pub fn query_types(&self) -> Result<BTreeSet<String>, PipelineError> {
        let mut all = BTreeSet::new();
        for layer in &self.config.layers {
            all.extend(self.corpus.toponym_types(layer)?);
        }
        Ok(all)
    }

    pub fn missing(&self) -> Result<Vec<(SourceDb, String)>, PipelineError> {
        let types = self.query_types()?;
        let mut missing = Vec::new();
        for &db in &self.config.databases {
            missing.extend(self.cache.missing(db, types.iter().map(String::as_str)));
        }
        Ok(missing)
    }

    pub fn require_complete_cache(&self) -> Result<(), PipelineError> {
        let missing = self.missing()?;
        if missing.is_empty() {
            Ok(())
        } else {
            Err(GazetteerError::IncompleteCache { missing }.into())
        }
    }

    pub fn provenance(&self) -> Result<Provenance, PipelineError> {
        Ok(Provenance {
            config_sha256: self.config.config_hash()?,
            cache_sha256: self.cache.sha256(),
        })
    }

    fn geocoder(&self, db: SourceDb) -> Result<Box<dyn Geocoder>, PipelineError> {
        Ok(match db {
            SourceDb::Fixture => {
                let path = self.config.fixture.as_ref().ok_or_else(|| {
                    GazetteerError::Config("database fixture needs a fixture file".into())
                })?;
                Box::new(FixtureGazetteer::load(path)?)
            }
            SourceDb::Nominatim => Box::new(NominatimClient::from_env(NOMINATIM_INTERVAL)),
            SourceDb::Geonames => Box::new(GeonamesClient::from_env(GEONAMES_DAILY_BUDGET)?),
        })
    }

    /// Fills the cache for every configured database. In offline mode a
    /// missing entry is an error and nothing is fetched.
    pub fn geocode(&self) -> Result<Vec<GeocodeSummary>, PipelineError> {
        if self.config.offline {
            self.require_complete_cache()?;
            let types = self.query_types()?.len();
            return Ok(self
                .config
                .databases
                .iter()
                .map(|&db| GeocodeSummary {
                    db,
                    types,
                    cached: types,
                    fetched: 0,
                    failed: 0,
                    requests: 0,
                })
                .collect());
        }
        let mut geocoders = Vec::new();
        for &db in &self.config.databases {
            let types = self.query_types()?;
            if self
                .cache
                .missing(db, types.iter().map(String::as_str))
                .is_empty()
            {
                geocoders.push(None);
            } else {
                geocoders.push(Some(self.geocoder(db)?));
            }
        }
        let geocoders: Vec<(SourceDb, Option<&dyn Geocoder>)> = self
            .config
            .databases
            .iter()
            .copied()
            .zip(geocoders.iter().map(|g| g.as_deref()))
            .collect();
        self.geocode_with(&geocoders)
    }

    /// Geocodes through the given sources; `None` marks a database whose
    /// cache is known to be complete.
    pub fn geocode_with(
        &self,
        geocoders: &[(SourceDb, Option<&dyn Geocoder>)],
    ) -> Result<Vec<GeocodeSummary>, PipelineError> {
        let types = self.query_types()?;
        let mut summaries = Vec::new();
        let mut failed = Vec::new();
        for &(db, geocoder) in geocoders {
            let missing = self.cache.missing(db, types.iter().map(String::as_str));
            let mut summary = GeocodeSummary {
                db,
                types: types.len(),
                cached: types.len() - missing.len(),
                fetched: 0,
                failed: 0,
                requests: 0,
            };
            if let Some(g) = geocoder {
                let before = g.request_count();
                // a throttle longer than the allowed wait stops this database
                let mut gave_up: Option<String> = None;
                for (_, query) in &missing {
                    let outcome = match &gave_up {
                        Some(reason) => Err(reason.clone()),
                        None => self.fetch_with_retries(g, query).map_err(|e| {
                            if matches!(e, FetchFailure::Stop(_)) {
                                gave_up = Some(e.to_string());
                            }
                            e.to_string()
                        }),
                    };
                    match outcome {
                        Ok(()) => summary.fetched += 1,
                        Err(error) => {
                            summary.failed += 1;
                            failed.push(FailedQuery {
                                db,
                                query: query.clone(),
                                error,
                            });
                        }
                    }
                }
                summary.requests = g.request_count() - before;
            } else if !missing.is_empty() {
                summary.failed = missing.len();
                failed.extend(missing.into_iter().map(|(db, query)| FailedQuery {
                    db,
                    query,
                    error: "no geocoder available".into(),
                }));
            }
            summaries.push(summary);
        }
        if summaries.iter().any(|s| s.fetched > 0) {
            self.cache.save(&self.config.cache)?;
        }
        if !failed.is_empty() {
            return Err(PipelineError::PartialGeocode {
                failed,
                cache: self.config.cache.clone(),
                summary: summaries,
            });
        }
        Ok(summaries)
    }

    fn fetch_with_retries(&self, g: &dyn Geocoder, query: &str) -> Result<(), FetchFailure> {
        let max_wait = Duration::from_secs(self.config.max_wait_secs);
        let mut attempt = 0;
        loop {
            match query_remote(g, &self.cache, query, MAX_MATCHES) {
                Ok(_) => return Ok(()),
                Err(e) if !e.is_retryable() => return Err(FetchFailure::Failed(e.to_string())),
                Err(e) if attempt >= self.config.max_retries => {
                    return Err(FetchFailure::Failed(format!(
                        "{e} (after {} attempts)",
                        attempt + 1
                    )))
                }
                Err(e) => {
                    let backoff = BACKOFF_BASE * 2u32.pow(attempt);
                    let wait = match &e {
                        GazetteerError::Throttled {
                            retry_after: Some(hint),
                        } => (*hint).max(backoff),
                        _ => backoff,
                    };
                    if wait > max_wait {
                        return Err(FetchFailure::Stop(format!(
                            "{e}; wait of {}s exceeds the {}s limit",
                            wait.as_secs(),
                            max_wait.as_secs()
                        )));
                    }
                    thread::sleep(wait);
                    attempt += 1;
                }
            }
        }
    }

    /// Post-filter matches of every query type for one database.
    pub fn match_table(&self, db: SourceDb) -> Result<MatchTable, PipelineError> {
        let types = self.query_types()?;
        let mut table = MatchTable::new();
        let mut missing = Vec::new();
        for t in types {
            match self.cache.get(db, &t) {
                Some(raw) => {
                    table.insert(t, filter_matches(&raw));
                }
                None => missing.push((db, t)),
            }
        }
        if !missing.is_empty() {
            return Err(GazetteerError::IncompleteCache { missing }.into());
        }
        Ok(table)
    }

    pub fn resolve(&self) -> Result<Vec<ResolvedLayer>, PipelineError> {
        self.require_complete_cache()?;
        let docs: Vec<_> = self.corpus.documents().collect();
        let mut out = Vec::new();
        for &db in &self.config.databases {
            let table = self.match_table(db)?;
            for layer in &self.config.layers {
                let resolved = self.pool.install(|| {
                    docs.par_iter()
                        .map(|d| {
                            let spans = self.corpus.spans(d.id(), layer);
                            (d.id().to_string(), resolve_document(d.id(), spans, &table))
                        })
                        .collect()
                });
                out.push(ResolvedLayer {
                    db,
                    layer: layer.clone(),
                    docs: resolved,
                });
            }
        }
        Ok(out)
    }

    /// Predictions ordered by database, layer and method (config order),
    /// then document id.
    pub fn predict(&self, resolved: &[ResolvedLayer]) -> Vec<CountryPrediction> {
        let mut out = Vec::new();
        for rl in resolved {
            for &method in &self.config.methods {
                let preds: Vec<CountryPrediction> = self.pool.install(|| {
                    rl.docs
                        .par_iter()
                        .map(|(doc_id, rs)| {
                            let doc = self.corpus.document(doc_id).expect("resolved from corpus");
                            let (countries, diagnostics) =
                                prediction::predict(method, doc, rs, &self.keywords);
                            CountryPrediction {
                                doc_id: doc_id.clone(),
                                layer_id: rl.layer.clone(),
                                db: rl.db,
                                method,
                                countries,
                                diagnostics,
                            }
                        })
                        .collect()
                });
                out.extend(preds);
            }
        }
        out
    }

    fn out_path(&self, name: &str) -> PathBuf {
        self.config.out.join(name)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, PipelineError> {
        let path = self.out_path(name);
        let io = |source| PipelineError::Io {
            path: path.clone(),
            source,
        };
        std::fs::create_dir_all(&self.config.out).map_err(io)?;
        std::fs::write(&path, bytes).map_err(io)?;
        Ok(path)
    }

    /// `resolve` stage: one debug dump per database.
    pub fn write_resolved(
        &self,
        resolved: &[ResolvedLayer],
    ) -> Result<Vec<PathBuf>, PipelineError> {
        let mut paths = Vec::new();
        for &db in &self.config.databases {
            let mut buf = Vec::new();
            for rl in resolved.iter().filter(|rl| rl.db == db) {
                for r in rl.docs.iter().flat_map(|(_, rs)| rs) {
                    serde_json::to_writer(&mut buf, &ResolvedRecord::new(&rl.layer, r))
                        .expect("serializable");
                    buf.push(b'\n');
                }
            }
            paths.push(self.write(&report::resolved_file(db), &buf)?);
        }
        Ok(paths)
    }

    pub fn write_predictions(&self, preds: &[CountryPrediction]) -> Result<PathBuf, PipelineError> {
        let mut buf = Vec::new();
        for p in preds {
            serde_json::to_writer(&mut buf, &PredictionRecord::from(p)).expect("serializable");
            buf.push(b'\n');
        }
        self.write(report::PREDICTIONS_FILE, &buf)
    }

    /// Reads the prediction dump and checks it covers every configured
    /// (database, layer, method) and document.
    pub fn read_predictions(&self) -> Result<Vec<CountryPrediction>, PipelineError> {
        let path = self.out_path(report::PREDICTIONS_FILE);
        let bad = |message: String| PipelineError::Predictions {
            path: path.clone(),
            message,
        };
        let text =
            std::fs::read_to_string(&path).map_err(|e| bad(format!("{e}; run `predict` first")))?;
        let mut preds = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let rec: PredictionRecord =
                serde_json::from_str(line).map_err(|e| bad(format!("line {}: {e}", i + 1)))?;
            preds.push(CountryPrediction::from(rec));
        }
        let expected: BTreeSet<(SourceDb, &str, prediction::Method, &str)> = self
            .config
            .databases
            .iter()
            .flat_map(|&db| {
                self.config.layers.iter().flat_map(move |l| {
                    self.config.methods.iter().flat_map(move |&m| {
                        self.corpus
                            .documents()
                            .map(move |d| (db, l.as_str(), m, d.id()))
                    })
                })
            })
            .collect();
        let got: BTreeSet<_> = preds
            .iter()
            .map(|p| (p.db, p.layer_id.as_str(), p.method, p.doc_id.as_str()))
            .collect();
        if got.len() != preds.len() {
            return Err(bad("duplicate prediction records".into()));
        }
        if let Some((db, l, m, d)) = expected.difference(&got).next() {
            return Err(bad(format!(
                "no prediction for {db}/{l}/{m} on document {d:?}; rerun `predict`"
            )));
        }
        preds.retain(|p| {
            expected.contains(&(p.db, p.layer_id.as_str(), p.method, p.doc_id.as_str()))
        });
        Ok(preds)
    }

    /// `resolve` subcommand.
    pub fn run_resolve(&self) -> Result<Vec<PathBuf>, PipelineError> {
        let resolved = self.resolve()?;
        self.write_resolved(&resolved)
    }

    /// `predict` subcommand: writes the resolved dumps and the predictions.
    pub fn run_predict(&self) -> Result<Vec<PathBuf>, PipelineError> {
        let resolved = self.resolve()?;
        let mut paths = self.write_resolved(&resolved)?;
        paths.push(self.write_predictions(&self.predict(&resolved))?);
        Ok(paths)
    }

    /// `evaluate` subcommand: every report, including rankings.
    pub fn run_evaluate(&self) -> Result<Vec<PathBuf>, PipelineError> {
        self.require_complete_cache()?;
        let preds = self.read_predictions()?;
        let prov = self.provenance()?;
        let reports = report::evaluation_reports(self, &preds, &prov)?;
        reports
            .into_iter()
            .map(|(name, bytes)| self.write(name, &bytes))
            .collect()
    }

    /// `rank` subcommand: ranking reports only.
    pub fn run_rank(&self) -> Result<Vec<PathBuf>, PipelineError> {
        self.require_complete_cache()?;
        let preds = self.read_predictions()?;
        let prov = self.provenance()?;
        let reports = report::ranking_reports(self, &preds, &prov)?;
        reports
            .into_iter()
            .map(|(name, bytes)| self.write(name, &bytes))
            .collect()
    }
}

#[derive(Debug)]
enum FetchFailure {
    Failed(String),
    Stop(String),
}

impl std::fmt::Display for FetchFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FetchFailure::Failed(m) | FetchFailure::Stop(m) => f.write_str(m),
        }
    }
}

/// Outcome of a full `run`.
#[derive(Debug)]
pub struct RunOutcome {
    pub geocode: Vec<GeocodeSummary>,
    pub artifacts: Vec<PathBuf>,
}

/// Geocode, predict and evaluate.
pub fn run_pipeline(config: RunConfig) -> Result<RunOutcome, PipelineError> {
    let session = Session::open(config)?;
    let geocode = session.geocode()?;
    let mut artifacts = session.run_predict()?;
    artifacts.extend(session.run_evaluate()?);
    Ok(RunOutcome { geocode, artifacts })
}
