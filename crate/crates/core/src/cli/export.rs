//! Equirectangular 16-bit PGM export.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::QuadratureGrid;
use crate::harmonics::{synthesis, HarmonicCoeffs};

/// Real part of the expansion at the pixel centres of a `width × height` λ-θ raster,
/// row-major from the north pole.
pub fn render_equirect(c: &HarmonicCoeffs, width: usize, height: usize) -> Result<Vec<f64>> {
    if width == 0 || height == 0 {
        return Err(Error::invalid("image dimensions must be positive"));
    }
    let grid = Arc::new(QuadratureGrid::raster(width, height));
    Ok(synthesis(c, grid)?.samples().iter().map(|v| v.re).collect())
}

/// Linear min–max scaled binary PGM (P5, maxval 65535, big-endian) and a `<path>.minmax`
/// sidecar holding the extrema. Returns `(min, max)`.
pub fn export_pgm(values: &[f64], width: usize, height: usize, path: &Path) -> Result<(f64, f64)> {
    if values.len() != width * height {
        return Err(Error::DimensionMismatch(format!(
            "{} values for a {width}x{height} image",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite pixel value".into()));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let mut bytes = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for v in values {
        let level = if span > 0.0 { ((v - min) / span * 65535.0).round() as u16 } else { 0 };
        bytes.extend_from_slice(&level.to_be_bytes());
    }
    fs::write(path, bytes)?;
    fs::write(minmax_path(path), format!("min {min}\nmax {max}\n"))?;
    Ok((min, max))
}

pub fn minmax_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".minmax");
    PathBuf::from(s)
}

pub fn cmd_export(coeffs: &HarmonicCoeffs, width: usize, height: usize, out: &Path) -> Result<(f64, f64)> {
    let values = render_equirect(coeffs, width, height)?;
    export_pgm(&values, width, height, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn read_pgm(path: &Path) -> (usize, usize, Vec<u16>) {
        let bytes = fs::read(path).unwrap();
        let header: Vec<&[u8]> = bytes.splitn(4, |b| *b == b'\n').collect();
        assert_eq!(header[0], b"P5");
        let dims = std::str::from_utf8(header[1]).unwrap();
        let (w, h) = dims.split_once(' ').unwrap();
        assert_eq!(header[2], b"65535");
        let px = header[3].chunks(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
        (w.parse().unwrap(), h.parse().unwrap(), px)
    }

    #[test]
    fn constant_function_is_uniform() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pgm");
        let mut c = HarmonicCoeffs::zeros(4);
        c[(0, 0)] = Complex64::new(3.0, 0.0);
        let (lo, hi) = cmd_export(&c, 16, 8, &path).unwrap();
        assert!((hi - lo).abs() < 1e-12);
        let (w, h, px) = read_pgm(&path);
        assert_eq!((w, h, px.len()), (16, 8, 128));
        assert!(px.iter().all(|p| *p == px[0]));
    }

    #[test]
    fn extrema_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.pgm");
        let c = HarmonicCoeffs::unit(3, 1, 0);
        let vals = render_equirect(&c, 10, 7).unwrap();
        let (lo, hi) = export_pgm(&vals, 10, 7, &path).unwrap();
        let text = fs::read_to_string(minmax_path(&path)).unwrap();
        let parsed: Vec<f64> = text.lines().map(|l| l.split_once(' ').unwrap().1.parse().unwrap()).collect();
        assert_eq!(parsed, vec![lo, hi]);
        assert_eq!(lo, vals.iter().copied().fold(f64::INFINITY, f64::min));
        let (_, _, px) = read_pgm(&path);
        assert_eq!(*px.iter().max().unwrap(), 65535);
        assert_eq!(*px.iter().min().unwrap(), 0);
        assert!(export_pgm(&vals, 3, 3, &path).is_err());
    }
}
