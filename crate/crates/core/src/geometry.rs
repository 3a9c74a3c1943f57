//! Planar geometry on (latitude, longitude) pairs measured in degrees.
//!
//! Latitude is treated as the y axis and longitude as the x axis, so
//! "counter-clockwise" has its usual meaning on a north-up map. All routines
//! are generic over the float type.

use num_traits::Float;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("point set is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point<T> {
    pub lat: T,
    pub lon: T,
}

impl<T: Float> Point<T> {
    pub fn new(lat: T, lon: T) -> Self {
        Point { lat, lon }
    }

    pub fn distance(&self, other: &Point<T>) -> T {
        (self.lat - other.lat).hypot(self.lon - other.lon)
    }

    pub fn in_bounds(&self) -> bool {
        let lat_max = T::from(90.0).unwrap();
        let lon_max = T::from(180.0).unwrap();
        self.lat.abs() <= lat_max && self.lon.abs() <= lon_max
    }
}

/// Shortest distance from `p` to the closed segment `a`–`b`.
pub fn distance_to_segment<T: Float>(p: &Point<T>, a: &Point<T>, b: &Point<T>) -> T {
    let (dx, dy) = (b.lon - a.lon, b.lat - a.lat);
    let len2 = dx * dx + dy * dy;
    if len2 == T::zero() {
        return p.distance(a);
    }
    let t = ((p.lon - a.lon) * dx + (p.lat - a.lat) * dy) / len2;
    let t = t.max(T::zero()).min(T::one());
    let proj = Point::new(a.lat + t * dy, a.lon + t * dx);
    p.distance(&proj)
}

/// Crossing-number point-in-polygon test. Points exactly on the boundary
/// may land on either side; callers that need a distance treat them as 0
/// through the edge distance anyway.
pub fn polygon_contains<T: Float>(vertices: &[Point<T>], p: &Point<T>) -> bool {
    let n = vertices.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (vi, vj) = (&vertices[i], &vertices[j]);
        if (vi.lat > p.lat) != (vj.lat > p.lat) {
            let x = vi.lon + (p.lat - vi.lat) * (vj.lon - vi.lon) / (vj.lat - vi.lat);
            if p.lon < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Polygon over a point set: vertices sorted counter-clockwise by angle
/// around their arithmetic mean, collapsing to a segment for two points and
/// to the point itself for one.
#[derive(Debug, Clone, PartialEq)]
pub struct Hull<T> {
    vertices: Vec<Point<T>>,
    centroid: Point<T>,
}

impl<T: Float> Hull<T> {
    /// Builds the polygon. Duplicate coordinates are expected to be
    /// collapsed by the caller (see [`dedup_points`]).
    pub fn build(points: &[Point<T>]) -> Result<Self, GeometryError> {
        match points {
            [] => Err(GeometryError::Empty),
            [p] => Ok(Hull {
                vertices: vec![*p],
                centroid: *p,
            }),
            [a, b] => {
                let two = T::one() + T::one();
                Ok(Hull {
                    vertices: vec![*a, *b],
                    centroid: Point::new((a.lat + b.lat) / two, (a.lon + b.lon) / two),
                })
            }
            _ => {
                let vertices = sort_counter_clockwise(points);
                let centroid = ring_centroid(&vertices);
                Ok(Hull { vertices, centroid })
            }
        }
    }

    pub fn vertices(&self) -> &[Point<T>] {
        &self.vertices
    }

    pub fn centroid(&self) -> Point<T> {
        self.centroid
    }

    /// Distance from `p` to the hull: point distance, segment distance, or
    /// polygon distance (0 when inside).
    pub fn distance_to(&self, p: &Point<T>) -> T {
        match self.vertices.as_slice() {
            [a] => p.distance(a),
            [a, b] => distance_to_segment(p, a, b),
            vs => {
                if polygon_contains(vs, p) {
                    return T::zero();
                }
                let n = vs.len();
                (0..n)
                    .map(|i| distance_to_segment(p, &vs[i], &vs[(i + 1) % n]))
                    .fold(T::infinity(), T::min)
            }
        }
    }
}

/// Distance from `p` to the polygon formed by `anchors`.
pub fn distance_to_polygon<T: Float>(
    p: &Point<T>,
    anchors: &[Point<T>],
) -> Result<T, GeometryError> {
    Ok(Hull::build(anchors)?.distance_to(p))
}

pub fn mean_point<T: Float>(points: &[Point<T>]) -> Option<Point<T>> {
    if points.is_empty() {
        return None;
    }
    let n = T::from(points.len()).unwrap();
    let (slat, slon) = points
        .iter()
        .fold((T::zero(), T::zero()), |(a, b), p| (a + p.lat, b + p.lon));
    Some(Point::new(slat / n, slon / n))
}

fn sort_counter_clockwise<T: Float>(points: &[Point<T>]) -> Vec<Point<T>> {
    let mean = mean_point(points).expect("non-empty");
    let mut keyed: Vec<(T, T, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (dy, dx) = (p.lat - mean.lat, p.lon - mean.lon);
            (dy.atan2(dx), dx * dx + dy * dy, i)
        })
        .collect();
    keyed.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.partial_cmp(&b.1).unwrap())
            .then(a.2.cmp(&b.2))
    });
    keyed.into_iter().map(|(_, _, i)| points[i]).collect()
}

/// Area centroid of a closed ring; falls back to the length-weighted
/// centroid of its edges when the signed area is exactly zero.
fn ring_centroid<T: Float>(vertices: &[Point<T>]) -> Point<T> {
    // shift to the mean to limit cancellation in the cross products
    let origin = mean_point(vertices).expect("non-empty");
    let n = vertices.len();
    let rel = |i: usize| {
        let v = &vertices[i % n];
        (v.lon - origin.lon, v.lat - origin.lat)
    };
    let (mut area2, mut cx, mut cy) = (T::zero(), T::zero(), T::zero());
    for i in 0..n {
        let (x0, y0) = rel(i);
        let (x1, y1) = rel(i + 1);
        let cross = x0 * y1 - x1 * y0;
        area2 = area2 + cross;
        cx = cx + (x0 + x1) * cross;
        cy = cy + (y0 + y1) * cross;
    }
    if area2 != T::zero() {
        let three = T::from(3.0).unwrap();
        return Point::new(
            origin.lat + cy / (three * area2),
            origin.lon + cx / (three * area2),
        );
    }
    let two = T::one() + T::one();
    let (mut total, mut wx, mut wy) = (T::zero(), T::zero(), T::zero());
    for i in 0..n {
        let (x0, y0) = rel(i);
        let (x1, y1) = rel(i + 1);
        let len = (x1 - x0).hypot(y1 - y0);
        total = total + len;
        wx = wx + len * (x0 + x1) / two;
        wy = wy + len * (y0 + y1) / two;
    }
    if total == T::zero() {
        return origin;
    }
    Point::new(origin.lat + wy / total, origin.lon + wx / total)
}

/// Removes exact duplicate coordinates, keeping first occurrences in order.
pub fn dedup_points<T: Float>(points: &[Point<T>]) -> Vec<Point<T>> {
    let mut out: Vec<Point<T>> = Vec::with_capacity(points.len());
    for p in points {
        if !out.iter().any(|q| q == p) {
            out.push(*p);
        }
    }
    out
}

/// Longitude shift (0 or 360) that places every longitude of the set on the
/// branch minimizing its spread: when the sorted longitudes have a gap wider
/// than 180°, everything west of the gap moves east by 360°. Returns the
/// longitude at or below which values must be shifted, if any.
pub fn antimeridian_cut<T: Float>(lons: &[T]) -> Option<T> {
    let mut sorted: Vec<T> = lons.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let half_turn = T::from(180.0).unwrap();
    let (gap, low) = sorted.windows(2).map(|w| (w[1] - w[0], w[0])).fold(
        None,
        |best: Option<(T, T)>, cur| match best {
            Some(b) if b.0 >= cur.0 => Some(b),
            _ => Some(cur),
        },
    )?;
    (gap > half_turn).then_some(low)
}

/// Applies [`antimeridian_cut`] to a point set in place.
pub fn unwrap_longitudes<T: Float>(points: &mut [Point<T>]) {
    let lons: Vec<T> = points.iter().map(|p| p.lon).collect();
    if let Some(cut) = antimeridian_cut(&lons) {
        let full_turn = T::from(360.0).unwrap();
        for p in points.iter_mut() {
            if p.lon <= cut {
                p.lon = p.lon + full_turn;
            }
        }
    }
}

/// Moves a longitude by a whole turn so it lies closest to `reference`.
pub fn nearest_branch<T: Float>(lon: T, reference: T) -> T {
    let full_turn = T::from(360.0).unwrap();
    [lon, lon + full_turn, lon - full_turn]
        .into_iter()
        .fold(lon, |best, cand| {
            if (cand - reference).abs() < (best - reference).abs() {
                cand
            } else {
                best
            }
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(lat: f64, lon: f64) -> Point<f64> {
        Point::new(lat, lon)
    }

    #[test]
    fn segment_distance() {
        let a = p(0.0, 0.0);
        let b = p(0.0, 2.0);
        assert_eq!(distance_to_segment(&p(0.0, 1.0), &a, &b), 0.0);
        assert_eq!(distance_to_segment(&p(1.0, 1.0), &a, &b), 1.0);
        assert_eq!(distance_to_segment(&p(0.0, 5.0), &a, &b), 3.0);
        assert_eq!(distance_to_segment(&p(3.0, 4.0), &a, &a), 5.0);
    }

    #[test]
    fn polygon_distance_cases() {
        assert_eq!(
            distance_to_polygon(&p(5.0, 5.0), &[p(5.0, 5.0)]).unwrap(),
            0.0
        );
        let seg = [p(0.0, 0.0), p(0.0, 2.0)];
        assert_eq!(distance_to_polygon(&p(0.0, 1.0), &seg).unwrap(), 0.0);
        assert_eq!(distance_to_polygon(&p(1.0, 1.0), &seg).unwrap(), 1.0);
        let tri = [p(0.0, 0.0), p(4.0, 0.0), p(0.0, 4.0)];
        assert_eq!(distance_to_polygon(&p(1.0, 1.0), &tri).unwrap(), 0.0);
        assert_eq!(distance_to_polygon(&p(-1.0, 0.0), &tri).unwrap(), 1.0);
        assert_eq!(
            distance_to_polygon::<f64>(&p(0.0, 0.0), &[]),
            Err(GeometryError::Empty)
        );
    }

    #[test]
    fn square_hull_is_ccw_with_unit_centroid() {
        let pts = [p(0.0, 0.0), p(0.0, 2.0), p(2.0, 2.0), p(2.0, 0.0)];
        let hull = Hull::build(&pts).unwrap();
        assert_eq!(hull.centroid(), p(1.0, 1.0));
        // (lat, lon) → x = lon, y = lat, starting at angle -135°
        assert_eq!(
            hull.vertices(),
            &[p(0.0, 0.0), p(0.0, 2.0), p(2.0, 2.0), p(2.0, 0.0)]
        );
        let vs = hull.vertices();
        let signed: f64 = (0..4)
            .map(|i| {
                let (a, b) = (vs[i], vs[(i + 1) % 4]);
                a.lon * b.lat - b.lon * a.lat
            })
            .sum();
        assert!(signed > 0.0);
    }

    #[test]
    fn degenerate_hulls() {
        let one = Hull::build(&[p(5.0, 5.0)]).unwrap();
        assert_eq!(one.centroid(), p(5.0, 5.0));
        let two = Hull::build(&[p(0.0, 0.0), p(0.0, 2.0)]).unwrap();
        assert_eq!(two.centroid(), p(0.0, 1.0));
        // collinear triple: zero area, length-weighted ring centroid
        let line = Hull::build(&[p(0.0, 0.0), p(0.0, 1.0), p(0.0, 3.0)]).unwrap();
        let c = line.centroid();
        assert!((c.lat - 0.0).abs() < 1e-12);
        assert!((c.lon - 1.5).abs() < 1e-12, "{c:?}");
        assert_eq!(Hull::<f64>::build(&[]), Err(GeometryError::Empty));
    }

    #[test]
    fn works_for_f32() {
        let pts = [
            Point::new(0.0f32, 0.0),
            Point::new(0.0, 2.0),
            Point::new(2.0, 2.0),
            Point::new(2.0, 0.0),
        ];
        let c = Hull::build(&pts).unwrap().centroid();
        assert!((c.lat - 1.0).abs() < 1e-6 && (c.lon - 1.0).abs() < 1e-6);
    }

    #[test]
    fn antimeridian_unwrap() {
        let mut pts = [p(-17.0, 178.0), p(-18.0, -179.0), p(-16.5, 179.5)];
        unwrap_longitudes(&mut pts);
        assert_eq!(pts[1].lon, 181.0);
        assert_eq!(pts[0].lon, 178.0);

        let mut europe = [p(52.5, 13.4), p(48.1, 11.6), p(48.9, 2.35)];
        let before = europe;
        unwrap_longitudes(&mut europe);
        assert_eq!(before, europe);

        assert_eq!(nearest_branch(-179.0, 179.0), 181.0);
        assert_eq!(nearest_branch(10.0, 12.0), 10.0);
        assert_eq!(nearest_branch(190.0, -170.0), -170.0);
    }

    #[test]
    fn dedup_keeps_first() {
        let pts = [p(1.0, 1.0), p(2.0, 2.0), p(1.0, 1.0)];
        assert_eq!(dedup_points(&pts), vec![p(1.0, 1.0), p(2.0, 2.0)]);
    }
}
