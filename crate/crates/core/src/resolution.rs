//! Toponym resolution by spatial minimality.
//!
//! Each toponym type of a document is bound to one gazetteer match. Types
//! with a single surviving match anchor the document; every ambiguous type
//! takes the candidate nearest to the polygon of those anchors. Without any
//! anchor, ambiguous types fall back to their best-ranked candidate.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::ToponymSpan;
use crate::gazetteer::GazetteerMatch;
use crate::geometry::{self, Hull};
use crate::GeoPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Unique,
    SpatialMin,
    RankFallback,
}

impl Resolution {
    pub fn as_str(&self) -> &'static str {
        match self {
            Resolution::Unique => "unique",
            Resolution::SpatialMin => "spatial_min",
            Resolution::RankFallback => "rank_fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedToponym {
    pub doc_id: String,
    pub span: ToponymSpan,
    pub place: GazetteerMatch,
    pub how: Resolution,
}

impl ResolvedToponym {
    pub fn point(&self) -> GeoPoint {
        self.place.point()
    }
}

/// Post-filter matches per toponym type.
pub type MatchTable = HashMap<String, Vec<GazetteerMatch>>;

/// Resolves every span of one document's layer. Spans whose type has no
/// match are omitted; output keeps span order.
pub fn resolve_document(
    doc_id: &str,
    spans: &[ToponymSpan],
    matches: &MatchTable,
) -> Vec<ResolvedToponym> {
    let candidates = |surface: &str| matches.get(surface).map(Vec::as_slice).unwrap_or(&[]);

    let mut types: Vec<&str> = Vec::new();
    for s in spans {
        if !types.contains(&s.surface.as_str()) {
            types.push(&s.surface);
        }
    }

    let mut anchors: Vec<GeoPoint> = types
        .iter()
        .filter_map(|t| match candidates(t) {
            [only] => Some(only.point()),
            _ => None,
        })
        .collect();
    anchors = geometry::dedup_points(&anchors);
    geometry::unwrap_longitudes(&mut anchors);

    let mut bound: HashMap<&str, (usize, Resolution)> = HashMap::new();
    if anchors.is_empty() {
        for t in &types {
            if let Some(i) = best_ranked(candidates(t)) {
                bound.insert(t, (i, Resolution::RankFallback));
            }
        }
    } else {
        let hull = Hull::build(&anchors).expect("anchors non-empty");
        let reference = longitude_reference(&anchors);
        for t in &types {
            match candidates(t) {
                [] => {}
                [_] => {
                    bound.insert(t, (0, Resolution::Unique));
                }
                many => {
                    let i = nearest_candidate(many, &hull, reference);
                    bound.insert(t, (i, Resolution::SpatialMin));
                }
            }
        }
    }

    spans
        .iter()
        .filter_map(|span| {
            let &(i, how) = bound.get(span.surface.as_str())?;
            Some(ResolvedToponym {
                doc_id: doc_id.to_string(),
                span: span.clone(),
                place: candidates(&span.surface)[i].clone(),
                how,
            })
        })
        .collect()
}

/// Midpoint of the anchors' (unwrapped) longitude range.
fn longitude_reference(anchors: &[GeoPoint]) -> f64 {
    let (lo, hi) = anchors
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.lon), hi.max(p.lon))
        });
    (lo + hi) / 2.0
}

/// Candidate placed on the anchors' longitude branch.
pub fn candidate_point(m: &GazetteerMatch, reference: f64) -> GeoPoint {
    GeoPoint::new(m.latitude, geometry::nearest_branch(m.longitude, reference))
}

/// Index of the candidate nearest to the hull; ties go to the lower rank,
/// then to the earlier list position.
fn nearest_candidate(candidates: &[GazetteerMatch], hull: &Hull<f64>, reference: f64) -> usize {
    let mut best: Option<(f64, u32, usize)> = None;
    for (i, m) in candidates.iter().enumerate() {
        let d = hull.distance_to(&candidate_point(m, reference));
        let better = match best {
            None => true,
            Some((bd, br, _)) => d < bd || (d == bd && m.rank < br),
        };
        if better {
            best = Some((d, m.rank, i));
        }
    }
    best.map(|b| b.2).expect("non-empty candidates")
}

fn best_ranked(candidates: &[GazetteerMatch]) -> Option<usize> {
    candidates
        .iter()
        .enumerate()
        .min_by_key(|(i, m)| (m.rank, *i))
        .map(|(i, _)| i)
}

/// Debug dump line for one resolved span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedRecord {
    pub doc: String,
    pub layer: String,
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub lat: f64,
    pub lon: f64,
    pub country: String,
    pub how: Resolution,
}

impl ResolvedRecord {
    pub fn new(layer: &str, r: &ResolvedToponym) -> Self {
        ResolvedRecord {
            doc: r.doc_id.clone(),
            layer: layer.to_string(),
            start: r.span.start,
            end: r.span.end,
            surface: r.span.surface.clone(),
            lat: r.place.latitude,
            lon: r.place.longitude,
            country: r
                .place
                .country
                .as_ref()
                .map(|c| c.to_string())
                .unwrap_or_default(),
            how: r.how,
        }
    }
}
