//! File formats: portable graymap/pixmap images, trial-log CSVs, and
//! rendered output images.

pub mod pnm;
pub mod record;
pub mod render;
