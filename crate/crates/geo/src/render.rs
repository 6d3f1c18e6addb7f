//! Classification into five equal-width classes over [-1, 1] and PPM rendering.
//!
//! Class `k` covers `(BREAKS[k-1], BREAKS[k]]`, except that class 1 also takes
//! everything at or below -0.6 and class 5 everything above 0.6, so values
//! slightly outside [-1, 1] (OSAVI) still classify.

use serde::{Deserialize, Serialize};

use crate::index::IndexKind;
use crate::parcel::Parcel;
use crate::raster::Grid;
use crate::zonal::{covered_cells, zonal_stats, ZonalStats};

pub type Rgb = [u8; 3];

pub const CLASS_COUNT: u8 = 5;
pub const BREAKS: [f64; 6] = [-1.0, -0.6, -0.2, 0.2, 0.6, 1.0];
pub const RAMP: [Rgb; 5] = [
    [215, 25, 28],
    [253, 174, 97],
    [255, 255, 191],
    [166, 217, 106],
    [26, 150, 65],
];
pub const NODATA_COLOR: Rgb = [128, 128, 128];
pub const OUTLINE_COLOR: Rgb = [0, 0, 0];

/// Class id in 1..=5, or `None` for missing or non-finite values.
pub fn classify(value: Option<f64>) -> Option<u8> {
    let v = value.filter(|v| v.is_finite())?;
    let class = BREAKS[1..5].iter().take_while(|&&upper| v > upper).count() as u8 + 1;
    Some(class)
}

pub fn class_color(class: Option<u8>) -> Rgb {
    match class {
        Some(c) if (1..=CLASS_COUNT).contains(&c) => RAMP[c as usize - 1],
        _ => NODATA_COLOR,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendClass {
    pub class: u8,
    /// Exclusive lower bound; `None` for the open bottom class.
    pub lower: Option<f64>,
    /// Inclusive upper bound; `None` for the open top class.
    pub upper: Option<f64>,
    pub color: Rgb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParcelSummary {
    pub parcel_id: String,
    pub name: String,
    pub stats: ZonalStats,
    pub class: Option<u8>,
    pub color: Rgb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Legend {
    pub index: IndexKind,
    pub mode: RenderMode,
    pub classes: Vec<LegendClass>,
    pub nodata_color: Rgb,
    pub outline_color: Rgb,
    pub parcels: Vec<ParcelSummary>,
}

pub fn legend_classes() -> Vec<LegendClass> {
    (1..=CLASS_COUNT)
        .map(|class| {
            let k = class as usize;
            LegendClass {
                class,
                lower: (k > 1).then(|| BREAKS[k - 1]),
                upper: (k < CLASS_COUNT as usize).then(|| BREAKS[k]),
                color: RAMP[k - 1],
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderMode {
    /// Every cell painted by its own class.
    #[default]
    PerCell,
    /// Cells inside a parcel painted by the parcel's mean class.
    ParcelMean,
}

/// Classified output of one index over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexMap {
    pub index: IndexKind,
    pub values: Grid,
    pub classes: Vec<Option<u8>>,
    pub legend: Legend,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    /// Binary PPM (P6).
    pub image: Vec<u8>,
    pub legend: Legend,
}

pub fn classify_grid(index: IndexKind, values: Grid, parcels: &[Parcel]) -> IndexMap {
    let classes = values.cells.iter().map(|v| classify(*v)).collect();
    let legend = build_legend(index, RenderMode::PerCell, &values, parcels);
    IndexMap {
        index,
        values,
        classes,
        legend,
    }
}

fn build_legend(index: IndexKind, mode: RenderMode, grid: &Grid, parcels: &[Parcel]) -> Legend {
    let parcels = parcels
        .iter()
        .map(|p| {
            let stats = zonal_stats(grid, p);
            let class = classify(stats.mean);
            ParcelSummary {
                parcel_id: p.parcel_id.clone(),
                name: p.name.clone(),
                stats,
                class,
                color: class_color(class),
            }
        })
        .collect();
    Legend {
        index,
        mode,
        classes: legend_classes(),
        nodata_color: NODATA_COLOR,
        outline_color: OUTLINE_COLOR,
        parcels,
    }
}

/// Paints the grid by class, then overdraws a one-cell outline along each parcel's border.
pub fn render_color_map(index: IndexKind, grid: &Grid, parcels: &[Parcel], mode: RenderMode) -> Rendered {
    let g = grid.geometry;
    let legend = build_legend(index, mode, grid, parcels);
    let mut pixels: Vec<Rgb> = grid.cells.iter().map(|v| class_color(classify(*v))).collect();

    // Owner of each cell, last parcel wins where parcels overlap.
    let mut owner: Vec<Option<usize>> = vec![None; g.len()];
    for (i, parcel) in parcels.iter().enumerate() {
        for (c, r) in covered_cells(grid, parcel) {
            owner[r * g.width + c] = Some(i);
        }
    }

    if mode == RenderMode::ParcelMean {
        for (cell, o) in owner.iter().enumerate() {
            if let Some(i) = o {
                pixels[cell] = legend.parcels[*i].color;
            }
        }
    }

    for row in 0..g.height {
        for col in 0..g.width {
            let here = owner[row * g.width + col];
            if here.is_none() {
                continue;
            }
            let differs = |c: isize, r: isize| {
                if c < 0 || r < 0 || c >= g.width as isize || r >= g.height as isize {
                    true
                } else {
                    owner[r as usize * g.width + c as usize] != here
                }
            };
            let (c, r) = (col as isize, row as isize);
            if differs(c - 1, r) || differs(c + 1, r) || differs(c, r - 1) || differs(c, r + 1) {
                pixels[row * g.width + col] = OUTLINE_COLOR;
            }
        }
    }

    Rendered {
        image: encode_ppm(g.width, g.height, &pixels),
        legend,
    }
}

pub fn encode_ppm(width: usize, height: usize, pixels: &[Rgb]) -> Vec<u8> {
    let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
    out.reserve(pixels.len() * 3);
    for p in pixels {
        out.extend_from_slice(p);
    }
    out
}

/// Splits a P6 image into its dimensions and pixels.
pub fn decode_ppm(bytes: &[u8]) -> Option<(usize, usize, Vec<Rgb>)> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return None;
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).ok()?.to_string());
    }
    pos += 1;
    if fields[0] != "P6" || fields[3] != "255" {
        return None;
    }
    let width: usize = fields[1].parse().ok()?;
    let height: usize = fields[2].parse().ok()?;
    let data = bytes.get(pos..)?;
    if data.len() != width * height * 3 {
        return None;
    }
    let pixels = data.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
    Some((width, height, pixels))
}
