//! Band rasters and value grids, plus the plain-text raster format.
//!
//! The text format is line oriented, UTF-8, and whitespace separated:
//!
//! ```text
//! AGRIRASTER 1
//! width <cells>
//! height <cells>
//! cell_size <meters>
//! origin <x> <y>
//! nodata <marker>
//! band <RED|NIR|SWIR>
//! <height lines of width values each>
//! band ...
//! ```
//!
//! `origin` is the top-left corner of the grid. Row 0 is the northernmost
//! row, so the center of cell `(col, row)` is
//! `(x + (col + 0.5) * cell_size, y - (row + 0.5) * cell_size)`.
//! Any cell equal to the `nodata` marker is missing. Blank lines and lines
//! starting with `#` are ignored.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::GeoError;

const MAGIC: &str = "AGRIRASTER 1";

/// Spectral band names understood by the index calculator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Band {
    Red,
    Nir,
    Swir,
}

impl Band {
    pub const ALL: [Band; 3] = [Band::Red, Band::Nir, Band::Swir];

    pub fn as_str(self) -> &'static str {
        match self {
            Band::Red => "RED",
            Band::Nir => "NIR",
            Band::Swir => "SWIR",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Band {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "RED" => Ok(Band::Red),
            "NIR" => Ok(Band::Nir),
            "SWIR" => Ok(Band::Swir),
            other => Err(GeoError::Format {
                line: 0,
                message: format!("unknown band '{other}'"),
            }),
        }
    }
}

/// Placement of a grid in the planar coordinate frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    pub cell_size: f64,
    /// Top-left corner.
    pub origin: (f64, f64),
}

impl GridGeometry {
    pub fn new(width: usize, height: usize, cell_size: f64, origin: (f64, f64)) -> Self {
        GridGeometry {
            width,
            height,
            cell_size,
            origin,
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        (
            self.origin.0 + (col as f64 + 0.5) * self.cell_size,
            self.origin.1 - (row as f64 + 0.5) * self.cell_size,
        )
    }

    /// Axis-aligned extent as `(min_x, min_y, max_x, max_y)`.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        (
            self.origin.0,
            self.origin.1 - self.height as f64 * self.cell_size,
            self.origin.0 + self.width as f64 * self.cell_size,
            self.origin.1,
        )
    }
}

/// A single-valued grid with missing cells, row-major from the top row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub geometry: GridGeometry,
    pub cells: Vec<Option<f64>>,
}

impl Grid {
    pub fn new(geometry: GridGeometry, cells: Vec<Option<f64>>) -> Result<Self, GeoError> {
        if cells.len() != geometry.len() {
            return Err(GeoError::Dimensions(format!(
                "expected {} cells for {}x{}, got {}",
                geometry.len(),
                geometry.width,
                geometry.height,
                cells.len()
            )));
        }
        Ok(Grid { geometry, cells })
    }

    pub fn filled(geometry: GridGeometry, value: Option<f64>) -> Self {
        Grid {
            cells: vec![value; geometry.len()],
            geometry,
        }
    }

    pub fn get(&self, col: usize, row: usize) -> Option<f64> {
        self.cells[row * self.geometry.width + col]
    }
}

/// Co-registered reflectance bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRaster {
    pub geometry: GridGeometry,
    pub nodata: f64,
    pub bands: BTreeMap<Band, Vec<Option<f64>>>,
}

impl BandRaster {
    pub fn new(geometry: GridGeometry, nodata: f64) -> Self {
        BandRaster {
            geometry,
            nodata,
            bands: BTreeMap::new(),
        }
    }

    /// Adds a band, checking dimensions and the reflectance range.
    pub fn with_band(mut self, band: Band, cells: Vec<Option<f64>>) -> Result<Self, GeoError> {
        self.insert_band(band, cells)?;
        Ok(self)
    }

    pub fn insert_band(&mut self, band: Band, cells: Vec<Option<f64>>) -> Result<(), GeoError> {
        if cells.len() != self.geometry.len() {
            return Err(GeoError::Dimensions(format!(
                "band {band} has {} cells, raster is {}x{}",
                cells.len(),
                self.geometry.width,
                self.geometry.height
            )));
        }
        if let Some(bad) = cells.iter().flatten().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(GeoError::Reflectance { band, value: *bad });
        }
        self.bands.insert(band, cells);
        Ok(())
    }

    pub fn band(&self, band: Band) -> Result<&[Option<f64>], GeoError> {
        self.bands
            .get(&band)
            .map(Vec::as_slice)
            .ok_or(GeoError::MissingBand(band))
    }

    pub fn parse(text: &str) -> Result<Self, GeoError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .peekable();

        let fail = |line: usize, message: String| GeoError::Format { line, message };

        match lines.next() {
            Some((_, MAGIC)) => {}
            Some((n, other)) => return Err(fail(n, format!("expected '{MAGIC}', found '{other}'"))),
            None => return Err(fail(0, "empty raster".into())),
        }

        let mut header = |key: &str, arity: usize| -> Result<Vec<f64>, GeoError> {
            let (n, line) = lines
                .next()
                .ok_or_else(|| fail(0, format!("missing '{key}' header")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(fail(n, format!("expected '{key}' header")));
            }
            let values = parts
                .map(|p| p.parse::<f64>().map_err(|e| fail(n, format!("{key}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if values.len() != arity {
                return Err(fail(n, format!("{key} takes {arity} value(s)")));
            }
            Ok(values)
        };

        let width = header("width", 1)?[0];
        let height = header("height", 1)?[0];
        let cell_size = header("cell_size", 1)?[0];
        let origin = header("origin", 2)?;
        let nodata = header("nodata", 1)?[0];

        if width < 1.0 || height < 1.0 || width.fract() != 0.0 || height.fract() != 0.0 {
            return Err(fail(0, "width and height must be positive integers".into()));
        }
        if !(cell_size > 0.0) {
            return Err(fail(0, "cell_size must be positive".into()));
        }
        let geometry = GridGeometry::new(
            width as usize,
            height as usize,
            cell_size,
            (origin[0], origin[1]),
        );
        let mut raster = BandRaster::new(geometry, nodata);

        while let Some((n, line)) = lines.next() {
            let band: Band = match line.split_once(char::is_whitespace) {
                Some(("band", name)) => name
                    .trim()
                    .parse()
                    .map_err(|_| fail(n, format!("unknown band '{}'", name.trim())))?,
                _ => return Err(fail(n, format!("expected 'band <name>', found '{line}'"))),
            };
            if raster.bands.contains_key(&band) {
                return Err(fail(n, format!("band {band} given twice")));
            }
            let mut cells = Vec::with_capacity(geometry.len());
            for row in 0..geometry.height {
                let (rn, row_text) = lines
                    .next()
                    .ok_or_else(|| fail(n, format!("band {band}: missing row {row}")))?;
                let before = cells.len();
                for token in row_text.split_whitespace() {
                    let v: f64 = token
                        .parse()
                        .map_err(|e| fail(rn, format!("band {band}: '{token}': {e}")))?;
                    cells.push(if v == nodata { None } else { Some(v) });
                }
                if cells.len() - before != geometry.width {
                    return Err(fail(
                        rn,
                        format!(
                            "band {band} row {row}: expected {} values, got {}",
                            geometry.width,
                            cells.len() - before
                        ),
                    ));
                }
            }
            raster.insert_band(band, cells).map_err(|e| match e {
                GeoError::Reflectance { .. } => fail(n, e.to_string()),
                other => other,
            })?;
        }
        Ok(raster)
    }

    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let g = &self.geometry;
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "width {}", g.width);
        let _ = writeln!(out, "height {}", g.height);
        let _ = writeln!(out, "cell_size {}", g.cell_size);
        let _ = writeln!(out, "origin {} {}", g.origin.0, g.origin.1);
        let _ = writeln!(out, "nodata {}", self.nodata);
        for (band, cells) in &self.bands {
            let _ = writeln!(out, "band {band}");
            for row in cells.chunks(g.width) {
                let line = row
                    .iter()
                    .map(|c| c.unwrap_or(self.nodata).to_string())
                    .collect::<Vec<_>>()
                    .join(" ");
                let _ = writeln!(out, "{line}");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "AGRIRASTER 1
width 2
height 2
cell_size 10
origin 0 20
nodata -9999
band RED
0.1 0.2
-9999 0.4
band NIR
0.5 0.6
0.7 0.8
";

    #[test]
    fn parses_and_prints_text_format() {
        let r = BandRaster::parse(SMALL).unwrap();
        assert_eq!(r.geometry.width, 2);
        assert_eq!(r.band(Band::Red).unwrap()[2], None);
        assert_eq!(r.band(Band::Nir).unwrap()[3], Some(0.8));
        assert_eq!(BandRaster::parse(&r.to_text()).unwrap(), r);
        assert_eq!(r.to_text(), SMALL);
    }

    #[test]
    fn rejects_short_rows_and_out_of_range_values() {
        let short = SMALL.replace("0.5 0.6", "0.5");
        assert!(matches!(
            BandRaster::parse(&short),
            Err(GeoError::Format { line: 11, .. })
        ));
        let bright = SMALL.replace("0.7 0.8", "0.7 1.5");
        assert!(BandRaster::parse(&bright).is_err());
    }

    #[test]
    fn cell_centers_run_down_from_origin() {
        let g = GridGeometry::new(4, 3, 10.0, (100.0, 50.0));
        assert_eq!(g.cell_center(0, 0), (105.0, 45.0));
        assert_eq!(g.cell_center(3, 2), (135.0, 25.0));
        assert_eq!(g.extent(), (100.0, 20.0, 140.0, 50.0));
    }
}
