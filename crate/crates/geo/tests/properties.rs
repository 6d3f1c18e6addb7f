use agriflow_geo::{
    classify, compute_index, legend_classes, zonal_stats, Band, BandRaster, GridGeometry,
    IndexKind, Parcel,
};
use proptest::prelude::*;

// Scalar reference formulas, written out independently of the library.
fn ndvi(nir: f64, red: f64) -> Option<f64> {
    let d = nir + red;
    (d != 0.0).then(|| (nir - red) / d)
}

fn ndmi(nir: f64, swir: f64) -> Option<f64> {
    let d = nir + swir;
    (d != 0.0).then(|| (nir - swir) / d)
}

fn osavi(nir: f64, red: f64) -> Option<f64> {
    let d = nir + red + 0.16;
    (d != 0.0).then(|| 1.16 * (nir - red) / d)
}

fn reflectance() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![9 => (0.0f64..=1.0).prop_map(Some), 1 => Just(None)]
}

fn raster16() -> impl Strategy<Value = BandRaster> {
    let band = || proptest::collection::vec(reflectance(), 256);
    (band(), band(), band()).prop_map(|(r, n, s)| {
        BandRaster::new(GridGeometry::new(16, 16, 10.0, (0.0, 160.0)), -9999.0)
            .with_band(Band::Red, r)
            .unwrap()
            .with_band(Band::Nir, n)
            .unwrap()
            .with_band(Band::Swir, s)
            .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn grids_match_scalar_formulas(raster in raster16()) {
        let red = raster.band(Band::Red).unwrap();
        let nir = raster.band(Band::Nir).unwrap();
        let swir = raster.band(Band::Swir).unwrap();
        for kind in IndexKind::ALL {
            let grid = compute_index(&raster, kind).unwrap();
            for i in 0..256 {
                let expected = match (kind, nir[i], red[i], swir[i]) {
                    (IndexKind::Ndvi, Some(n), Some(r), _) => ndvi(n, r),
                    (IndexKind::Osavi, Some(n), Some(r), _) => osavi(n, r),
                    (IndexKind::Ndmi, Some(n), _, Some(s)) => ndmi(n, s),
                    _ => None,
                };
                match (grid.cells[i], expected) {
                    (None, None) => {}
                    (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-12),
                    other => prop_assert!(false, "cell {i}: {other:?}"),
                }
            }
        }
    }

    #[test]
    fn index_ranges(nir in 0.0f64..=1.0, red in 0.0f64..=1.0) {
        if let Some(v) = IndexKind::Ndvi.evaluate(nir, red) {
            prop_assert!((-1.0..=1.0).contains(&v));
        }
        if let Some(v) = IndexKind::Ndmi.evaluate(nir, red) {
            prop_assert!((-1.0..=1.0).contains(&v));
        }
        let o = IndexKind::Osavi.evaluate(nir, red).unwrap();
        prop_assert!(o.abs() < 1.16);
    }

    #[test]
    fn ndvi_increases_with_nir(red in 0.001f64..=1.0, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        prop_assume!(a != b);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let v_lo = IndexKind::Ndvi.evaluate(lo, red).unwrap();
        let v_hi = IndexKind::Ndvi.evaluate(hi, red).unwrap();
        prop_assert!(v_hi > v_lo);
    }

    #[test]
    fn every_finite_value_has_exactly_one_class(v in -2.0f64..2.0) {
        let matching = legend_classes()
            .into_iter()
            .filter(|c| c.lower.is_none_or(|l| v > l) && c.upper.is_none_or(|u| v <= u))
            .map(|c| c.class)
            .collect::<Vec<_>>();
        prop_assert_eq!(matching.len(), 1);
        prop_assert_eq!(Some(matching[0]), classify(Some(v)));
    }
}

// Brute-force zonal reference: scan every cell, test the center against each
// edge half-plane of a counter-clockwise convex polygon (edges inclusive).
fn brute_force_stats(raster: &agriflow_geo::Grid, ccw: &[(f64, f64)]) -> (usize, f64, f64, f64) {
    let g = raster.geometry;
    let mut values = Vec::new();
    for row in 0..g.height {
        for col in 0..g.width {
            let x = g.origin.0 + (col as f64 + 0.5) * g.cell_size;
            let y = g.origin.1 - (row as f64 + 0.5) * g.cell_size;
            let inside = (0..ccw.len()).all(|i| {
                let a = ccw[i];
                let b = ccw[(i + 1) % ccw.len()];
                (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0) >= 0.0
            });
            if inside {
                if let Some(v) = raster.cells[row * g.width + col] {
                    values.push(v);
                }
            }
        }
    }
    let sum: f64 = values.iter().sum();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (values.len(), sum, min, max)
}

fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn zonal_stats_match_brute_force(
        raster in raster16(),
        // Integer and half-integer coordinates put many centers exactly on edges.
        pts in proptest::collection::vec((-8i32..=40, -8i32..=40), 3..8),
    ) {
        let pts: Vec<(f64, f64)> = pts.into_iter().map(|(x, y)| (x as f64 * 5.0, y as f64 * 5.0)).collect();
        let hull = convex_hull(pts);
        prop_assume!(hull.len() >= 3);
        let parcel = Parcel::new("p", "P", hull.clone()).unwrap();
        let grid = compute_index(&raster, IndexKind::Ndvi).unwrap();
        let stats = zonal_stats(&grid, &parcel);
        let (count, sum, min, max) = brute_force_stats(&grid, &hull);
        prop_assert_eq!(stats.count, count);
        if count > 0 {
            prop_assert_eq!(stats.mean, Some(sum / count as f64));
            prop_assert_eq!(stats.min, Some(min));
            prop_assert_eq!(stats.max, Some(max));
        } else {
            prop_assert!(stats.mean.is_none());
        }
    }
}
