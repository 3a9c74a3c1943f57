//! Country-level geographical focus of news documents from toponym
//! annotation layers, and comparison of NER layers by their downstream
//! effect on geolocation.
//!
//! The pipeline runs in four stages: annotation layers are loaded from an
//! interchange corpus ([`corpus`]), every toponym type is looked up in a
//! gazetteer ([`gazetteer`]), ambiguous types are resolved per document
//! ([`resolution`]) and the resolved toponyms are mapped to countries
//! ([`prediction`]). [`evaluation`] compares layers and predictions.

pub mod config;
pub mod corpus;
pub mod country;
pub mod evaluation;
pub mod gazetteer;
pub mod geometry;
pub mod iso;
pub mod keywords;
pub mod pipeline;
pub mod prediction;
pub mod report;
pub mod resolution;
pub mod stats;

/// Point in degrees, latitude first.
pub type GeoPoint = geometry::Point<f64>;
/// Counter-clockwise polygon over a document's points.
pub type HullPolygon = geometry::Hull<f64>;

pub use corpus::{load_corpus, AnnotationLayer, Corpus, Document, ToponymSpan};
pub use country::CountryCode;
pub use gazetteer::{filter_matches, GazetteerCache, GazetteerMatch, SourceDb};
