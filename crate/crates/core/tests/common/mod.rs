//! Fixtures and independent reference implementations shared by the
//! integration tests. Nothing here calls into the library's geometry or
//! statistics code.

#![allow(dead_code)]

use std::path::PathBuf;

use geofocus::corpus::ToponymSpan;
use geofocus::gazetteer::{GazetteerMatch, SourceDb};
use geofocus::resolution::{Resolution, ResolvedToponym};
use geofocus::CountryCode;

pub const CODES: [&str; 10] = [
    "deu", "fra", "bra", "usa", "ita", "esp", "aus", "can", "ind", "chn",
];

pub fn cc(code: &str) -> CountryCode {
    CountryCode::parse(code).unwrap()
}

pub fn synthetic_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/synthetic")
}

pub fn place(query: &str, lat: f64, lon: f64, country: &str, rank: u32) -> GazetteerMatch {
    GazetteerMatch {
        query: query.into(),
        latitude: lat,
        longitude: lon,
        country: Some(cc(country)),
        rank,
        place_class: "city".into(),
        source_db: SourceDb::Fixture,
    }
}

pub fn resolved(i: usize, lat: f64, lon: f64, country: &str) -> ResolvedToponym {
    let surface = format!("T{i}");
    ResolvedToponym {
        doc_id: "d".into(),
        span: ToponymSpan {
            start: i * 10,
            end: i * 10 + surface.chars().count(),
            surface: surface.clone(),
        },
        place: place(&surface, lat, lon, country, 1),
        how: Resolution::Unique,
    }
}

/// Planar point as (lat, lon).
pub type P = (f64, f64);

/// Longitudes west of a >180° gap move east by a full turn.
pub fn oracle_unwrap(points: &mut [P]) {
    let mut lons: Vec<f64> = points.iter().map(|p| p.1).collect();
    lons.sort_by(f64::total_cmp);
    let mut widest = 0.0;
    let mut edge = None;
    for i in 1..lons.len() {
        let gap = lons[i] - lons[i - 1];
        if gap > widest {
            widest = gap;
            edge = Some(lons[i - 1]);
        }
    }
    if widest > 180.0 {
        let edge = edge.unwrap();
        for p in points.iter_mut() {
            if p.1 <= edge {
                p.1 += 360.0;
            }
        }
    }
}

/// Vertices ordered by angle around the arithmetic mean (x = lon, y = lat).
pub fn oracle_ring(points: &[P]) -> Vec<P> {
    let n = points.len() as f64;
    let my = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mx = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut idx: Vec<usize> = (0..points.len()).collect();
    let key = |i: usize| {
        let (dy, dx) = (points[i].0 - my, points[i].1 - mx);
        (dy.atan2(dx), dx * dx + dy * dy)
    };
    idx.sort_by(|&a, &b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(a.cmp(&b))
    });
    idx.into_iter().map(|i| points[i]).collect()
}

/// Shoelace area centroid, computed relative to the first vertex; the
/// edge-length-weighted centroid when the area vanishes.
pub fn oracle_centroid(points: &[P]) -> P {
    match points {
        [] => panic!("empty"),
        [p] => *p,
        [a, b] => ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0),
        _ => {
            let ring = oracle_ring(points);
            let (oy, ox) = ring[0];
            let n = ring.len();
            let (mut a2, mut sx, mut sy) = (0.0, 0.0, 0.0);
            for i in 0..n {
                let (y0, x0) = (ring[i].0 - oy, ring[i].1 - ox);
                let (y1, x1) = (ring[(i + 1) % n].0 - oy, ring[(i + 1) % n].1 - ox);
                let c = x0 * y1 - x1 * y0;
                a2 += c;
                sx += (x0 + x1) * c;
                sy += (y0 + y1) * c;
            }
            if a2 != 0.0 {
                return (oy + sy / (3.0 * a2), ox + sx / (3.0 * a2));
            }
            let (mut total, mut wx, mut wy) = (0.0, 0.0, 0.0);
            for i in 0..n {
                let (p, q) = (ring[i], ring[(i + 1) % n]);
                let len = ((q.0 - p.0).powi(2) + (q.1 - p.1).powi(2)).sqrt();
                total += len;
                wy += len * (p.0 + q.0) / 2.0;
                wx += len * (p.1 + q.1) / 2.0;
            }
            (wy / total, wx / total)
        }
    }
}

pub fn dist(a: P, b: P) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

pub fn seg_dist(p: P, a: P, b: P) -> f64 {
    let (dy, dx) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (((p.1 - a.1) * dx + (p.0 - a.0) * dy) / len2).clamp(0.0, 1.0);
    dist(p, (a.0 + t * dy, a.1 + t * dx))
}

/// Even-odd ray casting along +x.
pub fn inside(ring: &[P], p: P) -> bool {
    let mut odd = false;
    let n = ring.len();
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        if (a.0 > p.0) != (b.0 > p.0) {
            let x = a.1 + (p.0 - a.0) / (b.0 - a.0) * (b.1 - a.1);
            if p.1 < x {
                odd = !odd;
            }
        }
    }
    odd
}

pub fn oracle_polygon_distance(anchors: &[P], p: P) -> f64 {
    match anchors {
        [a] => dist(p, *a),
        [a, b] => seg_dist(p, *a, *b),
        _ => {
            let ring = oracle_ring(anchors);
            if inside(&ring, p) {
                return 0.0;
            }
            let n = ring.len();
            (0..n)
                .map(|i| seg_dist(p, ring[i], ring[(i + 1) % n]))
                .fold(f64::INFINITY, f64::min)
        }
    }
}

pub fn population_z(xs: &[f64]) -> Vec<f64> {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt();
    xs.iter().map(|x| (x - m) / sd).collect()
}

fn sign(a: f64, b: f64) -> i64 {
    if a > b {
        1
    } else if a < b {
        -1
    } else {
        0
    }
}

/// Kendall tau-b by pairwise enumeration.
pub fn oracle_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let sx = sign(x[i], x[j]);
            let sy = sign(y[i], y[j]);
            if sx == 0 {
                tx += 1;
            }
            if sy == 0 {
                ty += 1;
            }
            let s = sx * sy;
            if s > 0 {
                c += 1;
            } else if s < 0 {
                d += 1;
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    let den = (((n0 - tx) * (n0 - ty)) as f64).sqrt();
    (den > 0.0).then(|| (c - d) as f64 / den)
}

/// Average ranks: 1 + (number smaller) + (ties - 1) / 2.
pub fn oracle_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|v| {
            let less = x.iter().filter(|w| *w < v).count() as f64;
            let eq = x.iter().filter(|w| *w == v).count() as f64;
            1.0 + less + (eq - 1.0) / 2.0
        })
        .collect()
}

/// Pearson correlation of average ranks.
pub fn oracle_spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    let (rx, ry) = (oracle_ranks(x), oracle_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx).powi(2);
        syy += (ry[i] - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}
