use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use geofocus::config::{ConfigFile, MatchModeName, RunConfig};
use geofocus::gazetteer::SourceDb;
use geofocus::pipeline::{run_pipeline, PipelineError, Session};
use geofocus::prediction::Method;

#[derive(Parser)]
#[command(
    name = "geofocus",
    version,
    about = "Country-level geographical focus of news documents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the configuration, corpus, keyword file and cache.
    Validate(Flags),
    /// Fill the gazetteer cache for every toponym type.
    Geocode(Flags),
    /// Write resolved toponyms per database.
    Resolve(Flags),
    /// Resolve and write country predictions.
    Predict(Flags),
    /// Write all evaluation reports from the stored predictions.
    Evaluate(Flags),
    /// Write country rankings and rank correlations only.
    Rank(Flags),
    /// Geocode, predict and evaluate.
    Run(Flags),
}

#[derive(Args, Clone)]
struct Flags {
    /// TOML run configuration; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Local gazetteer file used by the `fixture` database.
    #[arg(long)]
    fixture: Option<PathBuf>,
    #[arg(long = "db", value_parser = parse_db)]
    databases: Vec<SourceDb>,
    #[arg(long = "layer")]
    layers: Vec<String>,
    #[arg(long = "method", value_parser = parse_method)]
    methods: Vec<Method>,
    #[arg(long)]
    keywords: Option<PathBuf>,
    /// Match keywords as whole words instead of prefixes.
    #[arg(long)]
    exact_keywords: bool,
    #[arg(long)]
    min_docs: Option<usize>,
    /// Never query a gazetteer; a missing cache entry is an error.
    #[arg(long)]
    offline: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_db(s: &str) -> Result<SourceDb, String> {
    s.parse()
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

impl Flags {
    fn into_config(self) -> Result<RunConfig, PipelineError> {
        let base = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let flags = ConfigFile {
            corpus: self.corpus,
            cache: self.cache,
            fixture: self.fixture,
            databases: (!self.databases.is_empty()).then_some(self.databases),
            layers: (!self.layers.is_empty()).then_some(self.layers),
            methods: (!self.methods.is_empty()).then_some(self.methods),
            keywords: self.keywords,
            keyword_mode: self.exact_keywords.then_some(MatchModeName::Exact),
            min_docs: self.min_docs,
            out: self.out,
            offline: self.offline.then_some(true),
            threads: self.threads,
            ..ConfigFile::default()
        };
        Ok(RunConfig::from_file(base.overridden_by(flags))?)
    }
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn execute(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Validate(f) => {
            let session = Session::open(f.into_config()?)?;
            println!(
                "ok: {} documents, layers {}, {} query types, {} missing cache entries",
                session.corpus.len(),
                session.config.layers.join(", "),
                session.query_types()?.len(),
                session.missing()?.len()
            );
        }
        Command::Geocode(f) => {
            let session = Session::open(f.into_config()?)?;
            for s in session.geocode()? {
                println!(
                    "{}: {} types, {} cached, {} fetched, {} requests",
                    s.db, s.types, s.cached, s.fetched, s.requests
                );
            }
        }
        Command::Resolve(f) => report(&Session::open(f.into_config()?)?.run_resolve()?),
        Command::Predict(f) => report(&Session::open(f.into_config()?)?.run_predict()?),
        Command::Evaluate(f) => report(&Session::open(f.into_config()?)?.run_evaluate()?),
        Command::Rank(f) => report(&Session::open(f.into_config()?)?.run_rank()?),
        Command::Run(f) => {
            let outcome = run_pipeline(f.into_config()?)?;
            for s in &outcome.geocode {
                println!("{}: {} cached, {} fetched", s.db, s.cached, s.fetched);
            }
            report(&outcome.artifacts);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match &e {
                PipelineError::PartialGeocode { failed, .. } => {
                    for q in failed.iter().take(20) {
                        eprintln!("  {}:{:?}: {}", q.db, q.query, q.error);
                    }
                }
                PipelineError::Gazetteer(
                    geofocus::gazetteer::GazetteerError::IncompleteCache { missing },
                ) => {
                    eprintln!(
                        "  run `geocode` without --offline to fill {} entries",
                        missing.len()
                    );
                }
                _ => {}
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
