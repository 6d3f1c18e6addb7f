//! Vegetation index analytics for field parcels.
//!
//! Reads co-registered reflectance bands, computes NDVI, NDMI and OSAVI per
//! cell, aggregates values per parcel, and paints classified maps as binary
//! PPM images with a structured legend.

mod index;
mod parcel;
mod raster;
mod render;
mod zonal;

pub use index::{compute_index, IndexKind, OSAVI_SOIL_FACTOR};
pub use parcel::Parcel;
pub use raster::{Band, BandRaster, Grid, GridGeometry};
pub use render::{
    class_color, classify, classify_grid, decode_ppm, encode_ppm, legend_classes, render_color_map,
    IndexMap, Legend, LegendClass, ParcelSummary, RenderMode, Rendered, Rgb, BREAKS, CLASS_COUNT,
    NODATA_COLOR, OUTLINE_COLOR, RAMP,
};
pub use zonal::{covered_cells, zonal_stats, ZonalStats};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeoError {
    #[error("raster is missing band {0}")]
    MissingBand(Band),
    #[error("band {band} reflectance {value} outside [0, 1]")]
    Reflectance { band: Band, value: f64 },
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
    #[error("raster format error at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("invalid parcel {parcel_id}: {reason}")]
    InvalidParcel { parcel_id: String, reason: String },
    #[error("unknown index '{0}'")]
    UnknownIndex(String),
}
