//! Built-in coverage targets and grayscale-image ingestion.
//!
//! Built-ins: `uniform`, a left-to-right `gradient` (high density on the
//! left), a `two_lobe` Gaussian mixture, and a `ring_blob` mixture. Any
//! other target string is treated as a path to a portable graymap whose
//! intensity maps linearly to density (white = high unless inverted).

use crate::io::pnm;
use crate::spectral::DensityMap;
use crate::{Error, Result};
use std::path::Path;

pub const BUILTIN_NAMES: [&str; 4] = ["uniform", "gradient", "two_lobe", "ring_blob"];

fn gaussian(x: [f64; 2], center: [f64; 2], sigma: f64) -> f64 {
    let dx = x[0] - center[0];
    let dy = x[1] - center[1];
    (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
}

/// Builds a named built-in target sampled on a `resolution^2` grid.
pub fn builtin(name: &str, resolution: usize, extents: [f64; 2]) -> Result<DensityMap> {
    let scale = |x: [f64; 2]| [x[0] / extents[0], x[1] / extents[1]];
    match name {
        "uniform" => Ok(DensityMap::uniform(resolution, resolution, extents)),
        "gradient" => DensityMap::from_fn(resolution, resolution, extents, move |x| {
            let s = scale(x);
            1.0 - 0.9 * s[0]
        }),
        "two_lobe" => DensityMap::from_fn(resolution, resolution, extents, move |x| {
            let s = scale(x);
            gaussian(s, [0.32, 0.55], 0.12) + gaussian(s, [0.68, 0.55], 0.12)
        }),
        "ring_blob" => DensityMap::from_fn(resolution, resolution, extents, move |x| {
            let s = scale(x);
            let r = ((s[0] - 0.42).powi(2) + (s[1] - 0.45).powi(2)).sqrt();
            let ring = (-(r - 0.25).powi(2) / (2.0 * 0.05f64.powi(2))).exp();
            0.75 * ring + 0.25 * gaussian(s, [0.8, 0.78], 0.08)
        }),
        other => Err(Error::Config(format!(
            "unknown built-in target '{other}' (expected one of {BUILTIN_NAMES:?})"
        ))),
    }
}

/// Loads a portable graymap as a density: intensity maps linearly to
/// density (inverted when `invert` is set), row 0 is the top of the
/// domain, and the result is normalized to unit mass.
pub fn load_density_image(
    path: impl AsRef<Path>,
    extents: [f64; 2],
    invert: bool,
) -> Result<DensityMap> {
    let img = pnm::read_pgm(path)?;
    let values: Vec<f64> = (0..img.height)
        .flat_map(|r| (0..img.width).map(move |c| (r, c)))
        .map(|(r, c)| {
            let v = img.intensity(r, c);
            if invert {
                1.0 - v
            } else {
                v
            }
        })
        .collect();
    DensityMap::from_grid(img.height, img.width, extents, values)
}

/// Resolves a target string: a built-in name or a graymap path.
pub fn resolve(
    spec: &str,
    resolution: usize,
    extents: [f64; 2],
    invert: bool,
) -> Result<DensityMap> {
    if BUILTIN_NAMES.contains(&spec) {
        builtin(spec, resolution, extents)
    } else {
        load_density_image(spec, extents, invert)
    }
}

/// Short label for file names: built-in name, or the file stem of a path.
pub fn label(spec: &str) -> String {
    if BUILTIN_NAMES.contains(&spec) {
        spec.to_string()
    } else {
        Path::new(spec)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "image".to_string())
    }
}
