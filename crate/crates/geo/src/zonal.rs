use serde::{Deserialize, Serialize};

use crate::parcel::Parcel;
use crate::raster::Grid;

/// Statistics over the valid cells whose centers fall inside a parcel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZonalStats {
    pub count: usize,
    pub mean: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
}

impl ZonalStats {
    pub const EMPTY: ZonalStats = ZonalStats {
        count: 0,
        mean: None,
        min: None,
        max: None,
    };

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

/// Cells `(col, row)` whose centers lie inside the parcel, in row-major order.
pub fn covered_cells(grid: &Grid, parcel: &Parcel) -> Vec<(usize, usize)> {
    let g = &grid.geometry;
    let (min_x, min_y, max_x, max_y) = parcel.bounding_box();
    // Candidate window from the bounding box; containment decides.
    let col_of = |x: f64| (x - g.origin.0) / g.cell_size - 0.5;
    let row_of = |y: f64| (g.origin.1 - y) / g.cell_size - 0.5;
    let clamp = |v: f64, hi: usize| -> Option<usize> {
        if v < 0.0 {
            Some(0)
        } else if v > (hi as f64 - 1.0) {
            None
        } else {
            Some(v as usize)
        }
    };
    let c0 = col_of(min_x).ceil();
    let c1 = col_of(max_x).floor();
    let r0 = row_of(max_y).ceil();
    let r1 = row_of(min_y).floor();
    if c1 < 0.0 || r1 < 0.0 || g.width == 0 || g.height == 0 {
        return Vec::new();
    }
    let (Some(c0), Some(r0)) = (clamp(c0, g.width), clamp(r0, g.height)) else {
        return Vec::new();
    };
    let c1 = (c1 as usize).min(g.width - 1);
    let r1 = (r1 as usize).min(g.height - 1);

    let mut cells = Vec::new();
    for row in r0..=r1 {
        for col in c0..=c1 {
            if parcel.contains(g.cell_center(col, row)) {
                cells.push((col, row));
            }
        }
    }
    cells
}

pub fn zonal_stats(grid: &Grid, parcel: &Parcel) -> ZonalStats {
    let values: Vec<f64> = covered_cells(grid, parcel)
        .into_iter()
        .filter_map(|(c, r)| grid.get(c, r))
        .collect();
    if values.is_empty() {
        return ZonalStats::EMPTY;
    }
    let sum: f64 = values.iter().sum();
    ZonalStats {
        count: values.len(),
        mean: Some(sum / values.len() as f64),
        min: values.iter().copied().reduce(f64::min),
        max: values.iter().copied().reduce(f64::max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GridGeometry;

    fn grid4(value: Option<f64>) -> Grid {
        Grid::filled(GridGeometry::new(4, 4, 1.0, (0.0, 4.0)), value)
    }

    #[test]
    fn square_over_four_centers() {
        let parcel = Parcel::new(
            "a",
            "A",
            vec![(1.0, 1.0), (3.0, 1.0), (3.0, 3.0), (1.0, 3.0)],
        )
        .unwrap();
        let s = zonal_stats(&grid4(Some(0.6)), &parcel);
        assert_eq!(s.count, 4);
        assert_eq!(s.mean, Some(0.6));
        assert_eq!(s.min, Some(0.6));
        assert_eq!(s.max, Some(0.6));
    }

    #[test]
    fn parcel_outside_extent_is_empty() {
        let parcel = Parcel::new(
            "far",
            "Far",
            vec![(10.0, 10.0), (12.0, 10.0), (12.0, 12.0)],
        )
        .unwrap();
        assert_eq!(zonal_stats(&grid4(Some(0.1)), &parcel), ZonalStats::EMPTY);
    }

    #[test]
    fn nodata_cells_are_excluded() {
        let parcel = Parcel::new(
            "all",
            "All",
            vec![(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)],
        )
        .unwrap();
        assert_eq!(zonal_stats(&grid4(None), &parcel), ZonalStats::EMPTY);
        let mut g = grid4(Some(0.5));
        g.cells[0] = None;
        g.cells[5] = Some(-0.5);
        let s = zonal_stats(&g, &parcel);
        assert_eq!(s.count, 15);
        assert_eq!(s.min, Some(-0.5));
        assert_eq!(s.max, Some(0.5));
    }

    #[test]
    fn center_on_edge_counts() {
        // Right edge passes exactly through the centers of column 1.
        let parcel = Parcel::new(
            "e",
            "E",
            vec![(0.0, 0.0), (1.5, 0.0), (1.5, 4.0), (0.0, 4.0)],
        )
        .unwrap();
        assert_eq!(covered_cells(&grid4(Some(1.0)), &parcel).len(), 8);
    }
}
