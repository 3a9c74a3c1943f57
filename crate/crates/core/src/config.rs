//! Declarative run configuration loaded from TOML and overridden by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gazetteer::{hex_digest, SourceDb};
use crate::keywords::MatchMode;
use crate::prediction::Method;

pub const DEFAULT_MIN_DOCS: usize = 10;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration:\n{}", .0.iter().map(|p| format!("  {}: {}", p.field, p.message)).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<FieldProblem>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldProblem {
    pub field: &'static str,
    pub message: String,
}

/// Raw file form; every key is optional so flags can fill the gaps.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub corpus: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub fixture: Option<PathBuf>,
    pub databases: Option<Vec<SourceDb>>,
    pub layers: Option<Vec<String>>,
    pub methods: Option<Vec<Method>>,
    pub keywords: Option<PathBuf>,
    pub keyword_mode: Option<MatchModeName>,
    pub min_docs: Option<usize>,
    pub out: Option<PathBuf>,
    pub offline: Option<bool>,
    pub threads: Option<usize>,
    pub max_retries: Option<u32>,
    pub max_wait_secs: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchModeName {
    Prefix,
    Exact,
}

impl From<MatchModeName> for MatchMode {
    fn from(m: MatchModeName) -> Self {
        match m {
            MatchModeName::Prefix => MatchMode::Prefix,
            MatchModeName::Exact => MatchMode::Exact,
        }
    }
}

impl ConfigFile {
    /// Parses a TOML file; relative paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: ConfigFile = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.corpus,
            &mut cfg.cache,
            &mut cfg.fixture,
            &mut cfg.keywords,
            &mut cfg.out,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Fills every key set in `flags`, leaving the rest untouched.
    pub fn overridden_by(mut self, flags: ConfigFile) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if flags.$f.is_some() { self.$f = flags.$f; } )* };
        }
        take!(
            corpus,
            cache,
            fixture,
            databases,
            layers,
            methods,
            keywords,
            keyword_mode,
            min_docs,
            out,
            offline,
            threads,
            max_retries,
            max_wait_secs
        );
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus: PathBuf,
    pub cache: PathBuf,
    pub fixture: Option<PathBuf>,
    pub databases: Vec<SourceDb>,
    pub layers: Vec<String>,
    pub methods: Vec<Method>,
    pub keywords: PathBuf,
    pub keyword_mode: MatchMode,
    pub min_docs: usize,
    pub out: PathBuf,
    pub offline: bool,
    /// 0 picks the number of available cores.
    pub threads: usize,
    pub max_retries: u32,
    pub max_wait_secs: u64,
}

fn dedup<T: PartialEq + Clone>(xs: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for x in xs {
        if !out.contains(x) {
            out.push(x.clone());
        }
    }
    out
}

impl RunConfig {
    /// Checks required keys and that referenced input files exist.
    pub fn from_file(cfg: ConfigFile) -> Result<Self, ConfigError> {
        let mut problems = Vec::new();
        let mut need = |field: &'static str, message: &str| {
            problems.push(FieldProblem {
                field,
                message: message.to_string(),
            })
        };

        let databases = dedup(cfg.databases.as_deref().unwrap_or_default());
        let layers = dedup(cfg.layers.as_deref().unwrap_or_default());
        let methods = dedup(cfg.methods.as_deref().unwrap_or_default());
        if databases.is_empty() {
            need("databases", "at least one database is required");
        }
        if layers.is_empty() {
            need("layers", "at least one layer is required");
        }
        if layers.iter().any(|l| l.is_empty()) {
            need("layers", "layer ids must be non-empty");
        }
        if methods.is_empty() {
            need("methods", "at least one method is required");
        }
        if cfg.min_docs == Some(0) {
            need("min_docs", "must be at least 1");
        }

        let mut existing = |field: &'static str, p: &Option<PathBuf>, required: bool| match p {
            Some(p) if !p.is_file() => {
                need(field, &format!("file {} does not exist", p.display()));
            }
            None if required => need(field, "path is required"),
            _ => {}
        };
        existing("corpus", &cfg.corpus, true);
        existing("fixture", &cfg.fixture, false);
        let keywords_needed = methods.contains(&Method::Keyword);
        existing("keywords", &cfg.keywords, keywords_needed);
        if cfg.cache.is_none() {
            need("cache", "path is required");
        }
        if cfg.out.is_none() {
            need("out", "path is required");
        }
        if !problems.is_empty() {
            return Err(ConfigError::Invalid(problems));
        }
        Ok(RunConfig {
            corpus: cfg.corpus.unwrap(),
            cache: cfg.cache.unwrap(),
            fixture: cfg.fixture,
            databases,
            layers,
            methods,
            keywords: cfg.keywords.unwrap_or_default(),
            keyword_mode: cfg.keyword_mode.map(MatchMode::from).unwrap_or_default(),
            min_docs: cfg.min_docs.unwrap_or(DEFAULT_MIN_DOCS),
            out: cfg.out.unwrap(),
            offline: cfg.offline.unwrap_or(false),
            threads: cfg.threads.unwrap_or(0),
            max_retries: cfg.max_retries.unwrap_or(3),
            max_wait_secs: cfg.max_wait_secs.unwrap_or(60),
        })
    }

    /// Hash of everything that determines the report contents: the
    /// analysis keys plus the digests of the corpus and keyword files.
    /// Paths, thread count and network settings are excluded.
    pub fn config_hash(&self) -> Result<String, ConfigError> {
        let digest_of = |p: &Path| -> Result<String, ConfigError> {
            let bytes = std::fs::read(p).map_err(|source| ConfigError::Io {
                path: p.to_path_buf(),
                source,
            })?;
            Ok(hex_digest(&bytes))
        };
        let keywords = if self.keywords.as_os_str().is_empty() {
            String::new()
        } else {
            digest_of(&self.keywords)?
        };
        let canonical = serde_json::json!({
            "databases": self.databases,
            "layers": self.layers,
            "methods": self.methods,
            "keyword_mode": match self.keyword_mode {
                MatchMode::Prefix => "prefix",
                MatchMode::Exact => "exact",
            },
            "min_docs": self.min_docs,
            "corpus_sha256": digest_of(&self.corpus)?,
            "keywords_sha256": keywords,
        });
        Ok(hex_digest(canonical.to_string().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_relative_paths_and_flags_win() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "c.jsonl", "");
        write(dir.path(), "k.txt", "[flood]\nFlut\n");
        let cfg = write(
            dir.path(),
            "run.toml",
            "corpus = \"c.jsonl\"\ncache = \"cache.jsonl\"\nkeywords = \"k.txt\"\nout = \"out\"\n\
             databases = [\"fixture\"]\nlayers = [\"flair\", \"flair\"]\nmethods = [\"majority\"]\n",
        );
        let file = ConfigFile::load(&cfg).unwrap();
        let flags = ConfigFile {
            min_docs: Some(3),
            methods: Some(vec![Method::Centroid, Method::Keyword]),
            ..ConfigFile::default()
        };
        let run = RunConfig::from_file(file.overridden_by(flags)).unwrap();
        assert_eq!(run.corpus, dir.path().join("c.jsonl"));
        assert_eq!(run.layers, ["flair"]);
        assert_eq!(run.methods, [Method::Centroid, Method::Keyword]);
        assert_eq!(run.min_docs, 3);
        assert_eq!(run.config_hash().unwrap().len(), 64);
    }

    #[test]
    fn zero_methods_is_invalid() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = write(dir.path(), "c.jsonl", "");
        let file = ConfigFile {
            corpus: Some(corpus),
            cache: Some(dir.path().join("cache.jsonl")),
            out: Some(dir.path().join("out")),
            databases: Some(vec![SourceDb::Fixture]),
            layers: Some(vec!["flair".into()]),
            methods: Some(vec![]),
            ..ConfigFile::default()
        };
        match RunConfig::from_file(file) {
            Err(ConfigError::Invalid(p)) => assert_eq!(p[0].field, "methods"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = write(dir.path(), "run.toml", "corpuss = \"x\"\n");
        assert!(matches!(
            ConfigFile::load(&cfg),
            Err(ConfigError::Parse { .. })
        ));
    }
}
