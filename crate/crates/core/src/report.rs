//! Report files: CSV tables with a `#` provenance line, and JSON documents
//! carrying a `provenance` key.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use serde_json::{json, Value};

use crate::evaluation::{
    self, bilateral_agreement, country_ranking, gold_match, layer_iou, layer_stats,
    rank_correlation, unique_types, Correlation, PredictionMap, RankedList,
};
use crate::gazetteer::{coverage_stats, GazetteerError, SourceDb};
use crate::pipeline::{PipelineError, Session};
use crate::prediction::{CountryPrediction, Diagnostics, Method};

pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const TABLE1_FILE: &str = "table1_layers.csv";
pub const TABLE2_FILE: &str = "table2_agreement.csv";
pub const TABLE3_FILE: &str = "table3_gold.csv";
pub const TABLE4_FILE: &str = "table4_correlation.csv";
pub const IOU_FILE: &str = "iou.json";
pub const RANKINGS_FILE: &str = "rankings.json";
pub const ERROR_ANALYSIS_FILE: &str = "error_analysis.json";

pub fn resolved_file(db: SourceDb) -> String {
    format!("resolved_{db}.jsonl")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub cache_sha256: String,
}

impl Provenance {
    pub fn csv_line(&self) -> String {
        format!(
            "# geofocus config_sha256={} cache_sha256={}\n",
            self.config_sha256, self.cache_sha256
        )
    }

    /// Parses the first line of a CSV report.
    pub fn from_csv_line(line: &str) -> Option<Provenance> {
        let rest = line.strip_prefix("# geofocus ")?;
        let mut config = None;
        let mut cache = None;
        for part in rest.split_whitespace() {
            if let Some(v) = part.strip_prefix("config_sha256=") {
                config = Some(v.to_string());
            } else if let Some(v) = part.strip_prefix("cache_sha256=") {
                cache = Some(v.to_string());
            }
        }
        Some(Provenance {
            config_sha256: config?,
            cache_sha256: cache?,
        })
    }
}

type Report = (&'static str, Vec<u8>);

fn csv_report(prov: &Provenance, header: Vec<String>, rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut out = prov.csv_line().into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&header).expect("in-memory write");
        for r in rows {
            w.write_record(&r).expect("in-memory write");
        }
        w.flush().expect("in-memory write");
    }
    out
}

fn json_report(prov: &Provenance, mut body: Value) -> Vec<u8> {
    body["provenance"] = json!(prov);
    let mut out = serde_json::to_vec_pretty(&body).expect("serializable");
    out.push(b'\n');
    out
}

fn pct(x: f64) -> String {
    format!("{x:.2}")
}

fn num(x: f64) -> String {
    format!("{x:.4}")
}

const NA: &str = "NA";

/// Predictions grouped per (database, layer, method).
struct Grouped<'a> {
    s: &'a Session,
    preds: &'a [CountryPrediction],
    maps: BTreeMap<(SourceDb, String, Method), PredictionMap>,
    // gold-evaluable documents
    scored: BTreeSet<&'a str>,
}

impl<'a> Grouped<'a> {
    fn new(s: &'a Session, preds: &'a [CountryPrediction]) -> Self {
        let mut maps: BTreeMap<_, PredictionMap> = BTreeMap::new();
        for p in preds {
            maps.entry((p.db, p.layer_id.clone(), p.method))
                .or_default()
                .insert(p.doc_id.clone(), p.countries.clone());
        }
        let scored = s
            .corpus
            .documents()
            .filter(|d| !d.is_excluded())
            .map(|d| d.id())
            .collect();
        Grouped {
            s,
            preds,
            maps,
            scored,
        }
    }

    fn all(&self, db: SourceDb, layer: &str, m: Method) -> &PredictionMap {
        &self.maps[&(db, layer.to_string(), m)]
    }

    fn scored(&self, db: SourceDb, layer: &str, m: Method) -> PredictionMap {
        self.all(db, layer, m)
            .iter()
            .filter(|(d, _)| self.scored.contains(d.as_str()))
            .map(|(d, c)| (d.clone(), c.clone()))
            .collect()
    }

    fn diagnostics(&self, db: SourceDb, layer: &str, m: Method) -> Vec<&Diagnostics> {
        self.preds
            .iter()
            .filter(|p| p.db == db && p.layer_id == layer && p.method == m)
            .map(|p| &p.diagnostics)
            .collect()
    }

    fn combos(&self) -> Vec<(SourceDb, Method)> {
        let cfg = &self.s.config;
        cfg.databases
            .iter()
            .flat_map(|&db| cfg.methods.iter().map(move |&m| (db, m)))
            .collect()
    }
}

fn layer_pairs(layers: &[String]) -> Vec<(&str, &str)> {
    let mut out = Vec::new();
    for (i, a) in layers.iter().enumerate() {
        for b in &layers[i + 1..] {
            out.push((a.as_str(), b.as_str()));
        }
    }
    out
}

/// Every report written by `evaluate`.
pub fn evaluation_reports(
    s: &Session,
    preds: &[CountryPrediction],
    prov: &Provenance,
) -> Result<Vec<Report>, PipelineError> {
    let g = Grouped::new(s, preds);
    let mut out = vec![
        (TABLE1_FILE, table1(s, prov)?),
        (TABLE2_FILE, table2(&g, prov)?),
        (TABLE3_FILE, table3(&g, prov)?),
        (IOU_FILE, iou(s, prov)?),
        (ERROR_ANALYSIS_FILE, error_analysis(&g, prov)?),
    ];
    out.extend(rankings(&g, prov));
    Ok(out)
}

pub fn ranking_reports(
    s: &Session,
    preds: &[CountryPrediction],
    prov: &Provenance,
) -> Result<Vec<Report>, PipelineError> {
    Ok(rankings(&Grouped::new(s, preds), prov))
}

fn table1(s: &Session, prov: &Provenance) -> Result<Vec<u8>, PipelineError> {
    let cfg = &s.config;
    let mut header: Vec<String> = ["layer", "toponyms", "types", "mean_per_doc", "sd_per_doc"]
        .map(String::from)
        .into();
    header.extend(cfg.databases.iter().map(|db| format!("coverage_pct_{db}")));
    let mut rows = Vec::new();
    for layer in &cfg.layers {
        let st = layer_stats(&s.corpus, layer)?;
        let mut row = vec![
            layer.clone(),
            st.spans.to_string(),
            st.types.to_string(),
            num(st.mean),
            num(st.sd),
        ];
        for &db in &cfg.databases {
            row.push(match coverage_stats(&s.corpus, layer, db, &s.cache) {
                Ok(f) => pct(100.0 * f),
                Err(GazetteerError::NoTypes(_)) => NA.into(),
                Err(e) => return Err(e.into()),
            });
        }
        rows.push(row);
    }
    Ok(csv_report(prov, header, rows))
}

fn table2(g: &Grouped, prov: &Provenance) -> Result<Vec<u8>, PipelineError> {
    let combos = g.combos();
    let mut header: Vec<String> = vec!["layer_a".into(), "layer_b".into()];
    header.extend(combos.iter().map(|(db, m)| format!("{db}_{m}")));
    let mut rows = Vec::new();
    for (a, b) in layer_pairs(&g.s.config.layers) {
        let mut row = vec![a.to_string(), b.to_string()];
        for &(db, m) in &combos {
            row.push(pct(
                bilateral_agreement(g.all(db, a, m), g.all(db, b, m))?.percent
            ));
        }
        rows.push(row);
    }
    Ok(csv_report(prov, header, rows))
}

fn table3(g: &Grouped, prov: &Provenance) -> Result<Vec<u8>, PipelineError> {
    let cfg = &g.s.config;
    let mut header: Vec<String> = vec!["method".into(), "layer".into()];
    for db in &cfg.databases {
        header.push(format!("{db}_exact"));
        header.push(format!("{db}_partial"));
    }
    let mut rows = Vec::new();
    for &m in &cfg.methods {
        for layer in &cfg.layers {
            let mut row = vec![m.to_string(), layer.clone()];
            for &db in &cfg.databases {
                let gm = gold_match(&g.scored(db, layer, m), &g.s.corpus)?;
                row.push(pct(gm.exact));
                row.push(pct(gm.partial));
            }
            rows.push(row);
        }
    }
    Ok(csv_report(prov, header, rows))
}

fn iou(s: &Session, prov: &Provenance) -> Result<Vec<u8>, PipelineError> {
    let mut pairs = Vec::new();
    for (a, b) in layer_pairs(&s.config.layers) {
        let docs = layer_iou(&s.corpus, a, b)?;
        let values: Vec<f64> = docs.iter().map(|d| d.iou).collect();
        pairs.push(json!({
            "layer_a": a,
            "layer_b": b,
            "mean": crate::stats::mean(&values),
            "vacuous_documents": docs.iter().filter(|d| d.vacuous).count(),
            "documents": docs,
        }));
    }
    Ok(json_report(prov, json!({ "pairs": pairs })))
}

fn error_analysis(g: &Grouped, prov: &Provenance) -> Result<Vec<u8>, PipelineError> {
    let s = g.s;
    let cfg = &s.config;
    let mut types = BTreeMap::new();
    for layer in &cfg.layers {
        types.insert(layer.clone(), s.corpus.toponym_types(layer)?);
    }
    let unique = if cfg.layers.len() >= 2 {
        Some(unique_types(&types)?)
    } else {
        None
    };
    let mut layers = Vec::new();
    for layer in &cfg.layers {
        let st = layer_stats(&s.corpus, layer)?;
        let u = unique.as_ref().map(|u| &u[layer]);
        layers.push(json!({
            "layer": layer,
            "mean_per_doc": st.mean,
            "sd_per_doc": st.sd,
            "toponyms": st.spans,
            "types": st.types,
            "unique_type_count": u.map(BTreeSet::len),
            "unique_types": u,
        }));
    }

    let mut predictions = Vec::new();
    for &db in &cfg.databases {
        for layer in &cfg.layers {
            for &m in &cfg.methods {
                let all = g.all(db, layer, m);
                let scored = g.scored(db, layer, m);
                let mut entry = json!({
                    "db": db,
                    "layer": layer,
                    "method": m,
                    "documents": all.len(),
                    "empty_predictions": all.values().filter(|c| c.is_empty()).count(),
                    "scored_documents": scored.len(),
                    "scored_empty_predictions": scored.values().filter(|c| c.is_empty()).count(),
                });
                let diags = g.diagnostics(db, layer, m);
                match m {
                    Method::Centroid => {
                        entry["removed_outliers"] = json!(diags
                            .iter()
                            .filter_map(|d| d.removed_outliers)
                            .sum::<usize>());
                        entry["removed_interior"] = json!(diags
                            .iter()
                            .filter_map(|d| d.removed_interior)
                            .sum::<usize>());
                    }
                    Method::Keyword => {
                        let mut paths: BTreeMap<String, usize> = BTreeMap::new();
                        for d in &diags {
                            if let Some(p) = d.keyword_path {
                                let name = serde_json::to_value(p).expect("serializable");
                                *paths
                                    .entry(name.as_str().unwrap_or_default().to_string())
                                    .or_default() += 1;
                            }
                        }
                        entry["keyword_paths"] = json!(paths);
                    }
                    Method::Majority => {}
                }
                predictions.push(entry);
            }
        }
    }
    Ok(json_report(
        prov,
        json!({
            "documents": s.corpus.len(),
            "excluded_documents": s.corpus.documents().filter(|d| d.is_excluded()).count(),
            "layers": layers,
            "predictions": predictions,
        }),
    ))
}

fn correlation_json(c: Result<Correlation, evaluation::EvalError>) -> Value {
    match c {
        Ok(c) => json!({ "spearman": c.spearman, "kendall": c.kendall, "shared": c.shared }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn ranking_json(r: &RankedList) -> Value {
    json!(r
        .entries
        .iter()
        .map(|(c, n)| json!({ "country": c, "documents": n }))
        .collect::<Vec<_>>())
}

type LayerCorrelation = (String, Result<Correlation, String>);

fn rankings(g: &Grouped, prov: &Provenance) -> Vec<Report> {
    let cfg = &g.s.config;
    let gold_sets = evaluation::gold_map(&g.s.corpus);
    let gold = country_ranking(gold_sets.values(), cfg.min_docs);
    let keep = gold.countries();
    let tool = |db, layer: &str, m| {
        country_ranking(g.scored(db, layer, m).values(), 1).restricted_to(&keep)
    };

    let mut tools = Vec::new();
    let mut table: BTreeMap<(SourceDb, Method), Vec<LayerCorrelation>> = BTreeMap::new();
    for &db in &cfg.databases {
        for &m in &cfg.methods {
            for layer in &cfg.layers {
                let r = tool(db, layer, m);
                let c = rank_correlation(&gold, &r);
                table.entry((db, m)).or_default().push((
                    layer.clone(),
                    c.as_ref().map(|c| *c).map_err(|e| e.to_string()),
                ));
                tools.push(json!({
                    "db": db,
                    "layer": layer,
                    "method": m,
                    "ranking": ranking_json(&r),
                    "vs_gold": correlation_json(c),
                }));
            }
        }
    }

    let mut between = Vec::new();
    for (db, m) in g.combos() {
        for (a, b) in layer_pairs(&cfg.layers) {
            let c = rank_correlation(&tool(db, a, m), &tool(db, b, m));
            between.push(json!({
                "db": db,
                "method": m,
                "layer_a": a,
                "layer_b": b,
                "correlation": correlation_json(c),
            }));
        }
    }

    let mut header: Vec<String> = ["db", "method", "metric"].map(String::from).into();
    header.extend(cfg.layers.iter().cloned());
    let mut rows = Vec::new();
    for (db, m) in g.combos() {
        let cells = &table[&(db, m)];
        for metric in ["spearman", "kendall"] {
            let mut row = vec![db.to_string(), m.to_string(), metric.to_string()];
            row.extend(cells.iter().map(|(_, c)| match c {
                Ok(c) if metric == "spearman" => num(c.spearman),
                Ok(c) => num(c.kendall),
                Err(_) => NA.into(),
            }));
            rows.push(row);
        }
    }

    vec![
        (TABLE4_FILE, csv_report(prov, header, rows)),
        (
            RANKINGS_FILE,
            json_report(
                prov,
                json!({
                    "min_docs": cfg.min_docs,
                    "gold": ranking_json(&gold),
                    "tools": tools,
                    "between_layers": between,
                }),
            ),
        ),
    ]
}
