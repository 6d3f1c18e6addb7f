use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::raster::{Band, BandRaster, Grid};
use crate::GeoError;

/// Soil adjustment constant for OSAVI.
pub const OSAVI_SOIL_FACTOR: f64 = 0.16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum IndexKind {
    Ndvi,
    Ndmi,
    Osavi,
}

impl IndexKind {
    pub const ALL: [IndexKind; 3] = [IndexKind::Ndvi, IndexKind::Ndmi, IndexKind::Osavi];

    /// The two bands the index contrasts, NIR first.
    pub fn bands(self) -> (Band, Band) {
        match self {
            IndexKind::Ndvi | IndexKind::Osavi => (Band::Nir, Band::Red),
            IndexKind::Ndmi => (Band::Nir, Band::Swir),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IndexKind::Ndvi => "NDVI",
            IndexKind::Ndmi => "NDMI",
            IndexKind::Osavi => "OSAVI",
        }
    }

    /// Evaluates the index for one cell. `None` for a zero denominator.
    pub fn evaluate(self, nir: f64, other: f64) -> Option<f64> {
        let (numerator, denominator) = match self {
            IndexKind::Ndvi | IndexKind::Ndmi => (nir - other, nir + other),
            IndexKind::Osavi => (
                (nir - other) * (1.0 + OSAVI_SOIL_FACTOR),
                nir + other + OSAVI_SOIL_FACTOR,
            ),
        };
        if denominator == 0.0 {
            None
        } else {
            Some(numerator / denominator)
        }
    }
}

impl fmt::Display for IndexKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IndexKind {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "NDVI" => Ok(IndexKind::Ndvi),
            "NDMI" => Ok(IndexKind::Ndmi),
            "OSAVI" => Ok(IndexKind::Osavi),
            _ => Err(GeoError::UnknownIndex(s.to_string())),
        }
    }
}

/// Computes an index grid. Missing inputs and zero denominators give missing cells.
pub fn compute_index(raster: &BandRaster, kind: IndexKind) -> Result<Grid, GeoError> {
    let (nir_band, other_band) = kind.bands();
    let nir = raster.band(nir_band)?;
    let other = raster.band(other_band)?;
    let cells = nir
        .iter()
        .zip(other)
        .map(|(n, o)| match (n, o) {
            (Some(n), Some(o)) => kind.evaluate(*n, *o),
            _ => None,
        })
        .collect();
    Grid::new(raster.geometry, cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GridGeometry;

    fn one_cell(nir: f64, red: f64, swir: f64) -> BandRaster {
        BandRaster::new(GridGeometry::new(1, 1, 1.0, (0.0, 1.0)), -9999.0)
            .with_band(Band::Nir, vec![Some(nir)])
            .unwrap()
            .with_band(Band::Red, vec![Some(red)])
            .unwrap()
            .with_band(Band::Swir, vec![Some(swir)])
            .unwrap()
    }

    #[test]
    fn equal_bands_give_zero_ndvi() {
        let g = compute_index(&one_cell(0.5, 0.5, 0.1), IndexKind::Ndvi).unwrap();
        assert_eq!(g.cells[0], Some(0.0));
    }

    #[test]
    fn hand_evaluated_ndvi_and_osavi() {
        let r = one_cell(0.8, 0.2, 0.4);
        let ndvi = compute_index(&r, IndexKind::Ndvi).unwrap().cells[0].unwrap();
        let osavi = compute_index(&r, IndexKind::Osavi).unwrap().cells[0].unwrap();
        // (0.8 - 0.2) / 1.0 and (0.6 * 1.16) / 1.16
        assert!((ndvi - 0.6).abs() < 1e-12);
        assert!((osavi - 0.6).abs() < 1e-12);
        let ndmi = compute_index(&r, IndexKind::Ndmi).unwrap().cells[0].unwrap();
        assert!((ndmi - 0.4 / 1.2).abs() < 1e-12);
    }

    #[test]
    fn zero_denominator_is_nodata() {
        let g = compute_index(&one_cell(0.0, 0.0, 0.0), IndexKind::Ndvi).unwrap();
        assert_eq!(g.cells[0], None);
        // OSAVI never divides by zero for non-negative reflectance.
        let g = compute_index(&one_cell(0.0, 0.0, 0.0), IndexKind::Osavi).unwrap();
        assert_eq!(g.cells[0], Some(0.0));
    }

    #[test]
    fn missing_band_is_named() {
        let r = BandRaster::new(GridGeometry::new(1, 1, 1.0, (0.0, 1.0)), -1.0)
            .with_band(Band::Nir, vec![Some(0.3)])
            .unwrap()
            .with_band(Band::Red, vec![Some(0.1)])
            .unwrap();
        assert_eq!(
            compute_index(&r, IndexKind::Ndmi).unwrap_err(),
            GeoError::MissingBand(Band::Swir)
        );
    }

    #[test]
    fn nodata_input_propagates() {
        let r = BandRaster::new(GridGeometry::new(2, 1, 1.0, (0.0, 1.0)), -1.0)
            .with_band(Band::Nir, vec![None, Some(0.4)])
            .unwrap()
            .with_band(Band::Red, vec![Some(0.1), None])
            .unwrap();
        assert_eq!(compute_index(&r, IndexKind::Ndvi).unwrap().cells, vec![None, None]);
    }
}
