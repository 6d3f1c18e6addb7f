use serde::{Deserialize, Serialize};

use crate::GeoError;

/// A field parcel in the raster coordinate frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parcel {
    pub parcel_id: String,
    pub name: String,
    /// Ring vertices without the repeated closing vertex.
    boundary: Vec<(f64, f64)>,
}

impl Parcel {
    /// Builds a parcel, accepting the ring with or without a repeated closing vertex.
    pub fn new(
        parcel_id: impl Into<String>,
        name: impl Into<String>,
        mut boundary: Vec<(f64, f64)>,
    ) -> Result<Self, GeoError> {
        let parcel_id = parcel_id.into();
        if boundary.len() > 1 && boundary.first() == boundary.last() {
            boundary.pop();
        }
        let invalid = |reason: &str| GeoError::InvalidParcel {
            parcel_id: parcel_id.clone(),
            reason: reason.to_string(),
        };
        if boundary.len() < 3 {
            return Err(invalid("boundary needs at least 3 distinct vertices"));
        }
        if boundary.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(invalid("boundary coordinates must be finite"));
        }
        if self_intersects(&boundary) {
            return Err(invalid("boundary is self-intersecting"));
        }
        if signed_area(&boundary).abs() <= 0.0 {
            return Err(invalid("boundary encloses no area"));
        }
        Ok(Parcel {
            parcel_id,
            name: name.into(),
            boundary,
        })
    }

    pub fn boundary(&self) -> &[(f64, f64)] {
        &self.boundary
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.boundary).abs()
    }

    pub fn bounding_box(&self) -> (f64, f64, f64, f64) {
        self.boundary.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(a, b, c, d), &(x, y)| (a.min(x), b.min(y), c.max(x), d.max(y)),
        )
    }

    /// Even-odd containment; points on the boundary count as inside.
    pub fn contains(&self, point: (f64, f64)) -> bool {
        point_in_ring(&self.boundary, point)
    }
}

fn edges(ring: &[(f64, f64)]) -> impl Iterator<Item = ((f64, f64), (f64, f64))> + '_ {
    ring.iter()
        .copied()
        .zip(ring.iter().copied().cycle().skip(1))
}

fn signed_area(ring: &[(f64, f64)]) -> f64 {
    edges(ring).map(|(a, b)| a.0 * b.1 - b.0 * a.1).sum::<f64>() / 2.0
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn on_segment(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> bool {
    cross(a, b, p) == 0.0
        && p.0 >= a.0.min(b.0)
        && p.0 <= a.0.max(b.0)
        && p.1 >= a.1.min(b.1)
        && p.1 <= a.1.max(b.1)
}

fn segments_touch(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    on_segment(c, d, a) || on_segment(c, d, b) || on_segment(a, b, c) || on_segment(a, b, d)
}

fn self_intersects(ring: &[(f64, f64)]) -> bool {
    let n = ring.len();
    let seg = |i: usize| (ring[i], ring[(i + 1) % n]);
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            let (a, b) = seg(i);
            let (c, d) = seg(j);
            if adjacent {
                // Neighbours share one vertex; they only clash when they fold back.
                let shared = if j == i + 1 { b } else { a };
                let (p, q) = if j == i + 1 { (a, d) } else { (b, c) };
                if cross(shared, p, q) == 0.0 && (on_segment(shared, p, q) || on_segment(shared, q, p)) {
                    return true;
                }
            } else if segments_touch(a, b, c, d) {
                return true;
            }
        }
    }
    false
}

pub(crate) fn point_in_ring(ring: &[(f64, f64)], p: (f64, f64)) -> bool {
    let mut inside = false;
    for (a, b) in edges(ring) {
        if on_segment(a, b, p) {
            return true;
        }
        if (a.1 > p.1) != (b.1 > p.1) {
            let x_cross = a.0 + (p.1 - a.1) * (b.0 - a.0) / (b.1 - a.1);
            if p.0 < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x0: f64, y0: f64, side: f64) -> Vec<(f64, f64)> {
        vec![(x0, y0), (x0 + side, y0), (x0 + side, y0 + side), (x0, y0 + side)]
    }

    #[test]
    fn accepts_closed_and_open_rings() {
        let mut closed = square(0.0, 0.0, 2.0);
        closed.push((0.0, 0.0));
        let a = Parcel::new("p", "P", closed).unwrap();
        let b = Parcel::new("p", "P", square(0.0, 0.0, 2.0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.area(), 4.0);
    }

    #[test]
    fn rejects_degenerate_and_bowtie() {
        assert!(Parcel::new("p", "P", vec![(0.0, 0.0), (1.0, 1.0)]).is_err());
        assert!(Parcel::new("p", "P", vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]).is_err());
        let bowtie = vec![(0.0, 0.0), (2.0, 2.0), (2.0, 0.0), (0.0, 2.0)];
        assert!(matches!(
            Parcel::new("p", "P", bowtie),
            Err(GeoError::InvalidParcel { .. })
        ));
    }

    #[test]
    fn edge_and_vertex_points_are_inside() {
        let p = Parcel::new("p", "P", square(0.0, 0.0, 2.0)).unwrap();
        assert!(p.contains((1.0, 1.0)));
        assert!(p.contains((0.0, 1.0)));
        assert!(p.contains((2.0, 2.0)));
        assert!(!p.contains((2.0001, 1.0)));
        assert!(!p.contains((-1.0, 1.0)));
    }

    #[test]
    fn concave_notch_is_outside() {
        let u = vec![
            (0.0, 0.0),
            (3.0, 0.0),
            (3.0, 3.0),
            (2.0, 3.0),
            (2.0, 1.0),
            (1.0, 1.0),
            (1.0, 3.0),
            (0.0, 3.0),
        ];
        let p = Parcel::new("u", "U", u).unwrap();
        assert!(!p.contains((1.5, 2.0)));
        assert!(p.contains((0.5, 2.0)));
        assert!(p.contains((1.5, 0.5)));
    }
}
