//! Test objects on the sphere and the synthetic measurement model.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sph_to_cart, Point3, QuadratureGrid, SphCoord};
use crate::harmonics::{HarmonicCoeffs, NodeFunction};
use crate::radon::{fr_direct, SphereFunction};

/// Even, compactly supported bump: a quadratic spline of `ξ·c` beyond the height `h`,
/// mirrored at the antipodal cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplineCap {
    pub center: Point3,
    pub h: f64,
    pub amplitude: f64,
}

impl SplineCap {
    pub fn new(center: Point3, h: f64, amplitude: f64) -> Result<Self> {
        let norm = center.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::invalid("cap center must be a nonzero finite vector"));
        }
        if !(h > -1.0 && h < 1.0) {
            return Err(Error::invalid(format!("cap height must lie in (-1, 1), got {h}")));
        }
        if !amplitude.is_finite() {
            return Err(Error::invalid("cap amplitude must be finite"));
        }
        Ok(SplineCap { center: center.normalized(), h, amplitude })
    }

    fn profile(&self, t: f64) -> f64 {
        if t > self.h {
            let s = (t - self.h) / (1.0 - self.h);
            s * s
        } else {
            0.0
        }
    }

    pub fn eval(&self, p: &Point3) -> f64 {
        let t = p.dot(&self.center);
        0.5 * self.amplitude * (self.profile(t) + self.profile(-t))
    }
}

/// Sum of spline caps.
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    caps: Vec<SplineCap>,
}

impl Phantom {
    pub fn new(caps: Vec<SplineCap>) -> Result<Self> {
        if caps.is_empty() {
            return Err(Error::invalid("phantom needs at least one cap"));
        }
        Ok(Phantom { caps })
    }

    /// Four caps of height 0.7 centred on the vertices of a regular tetrahedron.
    pub fn default_tetrahedral() -> Self {
        let s = 1.0 / 3f64.sqrt();
        let centers =
            [Point3::new(s, s, s), Point3::new(s, -s, -s), Point3::new(-s, s, -s), Point3::new(-s, -s, s)];
        let amps = [1.0, 0.8, 0.6, 0.9];
        let caps = centers
            .iter()
            .zip(amps)
            .map(|(c, a)| SplineCap::new(*c, 0.7, a).expect("valid default cap"))
            .collect();
        Phantom { caps }
    }

    /// One cap per line: `cx cy cz h amplitude`. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut caps = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::format(format!("phantom line {}: {e}", lineno + 1)))?;
            if vals.len() != 5 {
                return Err(Error::format(format!(
                    "phantom line {}: expected 5 numbers, found {}",
                    lineno + 1,
                    vals.len()
                )));
            }
            caps.push(SplineCap::new(Point3::new(vals[0], vals[1], vals[2]), vals[3], vals[4])?);
        }
        Phantom::new(caps)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Phantom::parse(&fs::read_to_string(path)?)
    }

    pub fn caps(&self) -> &[SplineCap] {
        &self.caps
    }

    pub fn eval(&self, p: &Point3) -> f64 {
        self.caps.iter().map(|c| c.eval(p)).sum()
    }

    pub fn sample(&self, grid: Arc<QuadratureGrid>) -> NodeFunction {
        let nodes = grid.nodes().to_vec();
        NodeFunction::new(grid, nodes.iter().map(|p| Complex64::new(self.eval(p), 0.0)).collect())
            .expect("one sample per node")
    }
}

impl SphereFunction for Phantom {
    fn eval(&self, p: &Point3) -> Complex64 {
        Complex64::new(Phantom::eval(self, p), 0.0)
    }
}

pub fn phantom_eval(phantom: &Phantom, c: SphCoord) -> f64 {
    phantom.eval(&sph_to_cart(c))
}

/// Noise-free data `R f` on the grid, integrated directly along great circles.
pub fn forward_data(phantom: &Phantom, grid: Arc<QuadratureGrid>, m_circle: usize) -> Result<NodeFunction> {
    fr_direct(phantom, grid, m_circle)
}

/// Additive white Gaussian noise, scaled so that `‖noise‖ = level · ‖g‖` in the weighted norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub level: f64,
    pub seed: u64,
}

pub fn add_noise(g: &NodeFunction, spec: NoiseSpec) -> Result<NodeFunction> {
    if !(spec.level >= 0.0 && spec.level.is_finite()) {
        return Err(Error::invalid(format!("noise level must be finite and >= 0, got {}", spec.level)));
    }
    if spec.level == 0.0 {
        return Ok(g.clone());
    }
    let g_norm = g.l2_norm();
    if g_norm == 0.0 {
        return Err(Error::invalid("relative noise is undefined for identically zero data"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let raw: Vec<f64> = (0..g.samples().len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let noise = NodeFunction::new(g.grid().clone(), raw.iter().map(|v| Complex64::new(*v, 0.0)).collect())?;
    let scale = spec.level * g_norm / noise.l2_norm();
    let samples = g.samples().iter().zip(&raw).map(|(v, e)| v + Complex64::new(scale * e, 0.0)).collect();
    NodeFunction::new(g.grid().clone(), samples)
}

/// `‖f_rec - f_true‖ / ‖f_true‖` in the weighted norm of the common grid.
pub fn relative_error(f_true: &NodeFunction, f_rec: &NodeFunction) -> Result<f64> {
    if !Arc::ptr_eq(f_true.grid(), f_rec.grid()) && f_true.grid().nodes() != f_rec.grid().nodes() {
        return Err(Error::DimensionMismatch("functions live on different grids".into()));
    }
    let t = f_true.l2_norm();
    if t == 0.0 {
        return Err(Error::invalid("relative error against a zero reference"));
    }
    let diff = NodeFunction::new(
        f_true.grid().clone(),
        f_rec.samples().iter().zip(f_true.samples()).map(|(a, b)| a - b).collect(),
    )?;
    Ok(diff.l2_norm() / t)
}

/// Same quotient in the coefficient norm.
pub fn relative_error_coeffs(truth: &HarmonicCoeffs, recon: &HarmonicCoeffs) -> Result<f64> {
    let t = truth.norm();
    if t == 0.0 {
        return Err(Error::invalid("relative error against a zero reference"));
    }
    Ok(recon.sub(truth)?.norm() / t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::product_grid;

    #[test]
    fn default_phantom_shape() {
        let ph = Phantom::default_tetrahedral();
        assert_eq!(ph.caps().len(), 4);
        for cap in ph.caps() {
            assert!(cap.center.is_unit(1e-14));
            let v = ph.eval(&cap.center);
            assert!((v - 0.5 * cap.amplitude).abs() < 1e-14);
            assert!((ph.eval(&-cap.center) - v).abs() < 1e-14);
        }
        // far from every cap
        assert_eq!(ph.eval(&Point3::new(0.0, 0.0, 1.0)), 0.0);
    }

    #[test]
    fn parse_phantom_file() {
        let ph = Phantom::parse("# caps\n0 0 2 0.5 1.0\n\n1 0 0 0.2 -0.5 # tail\n").unwrap();
        assert_eq!(ph.caps().len(), 2);
        assert!(ph.caps()[0].center.is_unit(1e-14));
        assert!(Phantom::parse("0 0 1 0.5").is_err());
        assert!(Phantom::parse("0 0 0 0.5 1").is_err());
        assert!(Phantom::parse("0 0 1 1.0 1").is_err());
        assert!(Phantom::parse("").is_err());
    }

    #[test]
    fn noise_has_requested_level() {
        let grid = Arc::new(product_grid(12, 24).unwrap());
        let g = Phantom::default_tetrahedral().sample(grid.clone());
        let noisy = add_noise(&g, NoiseSpec { level: 0.2, seed: 7 }).unwrap();
        let diff = NodeFunction::new(
            grid.clone(),
            noisy.samples().iter().zip(g.samples()).map(|(a, b)| a - b).collect(),
        )
        .unwrap();
        assert!((diff.l2_norm() / g.l2_norm() - 0.2).abs() < 1e-12);
        let again = add_noise(&g, NoiseSpec { level: 0.2, seed: 7 }).unwrap();
        assert_eq!(noisy.samples(), again.samples());
        let other = add_noise(&g, NoiseSpec { level: 0.2, seed: 8 }).unwrap();
        assert_ne!(noisy.samples(), other.samples());
        let d2: Vec<Complex64> = other.samples().iter().zip(g.samples()).map(|(a, b)| a - b).collect();
        let d2 = NodeFunction::new(grid.clone(), d2).unwrap();
        assert!((d2.l2_norm() - diff.l2_norm()).abs() < 1e-12);
        assert_eq!(add_noise(&g, NoiseSpec { level: 0.0, seed: 1 }).unwrap().samples(), g.samples());
        let zero = NodeFunction::new(grid.clone(), vec![Complex64::new(0.0, 0.0); grid.len()]).unwrap();
        assert!(add_noise(&zero, NoiseSpec { level: 0.1, seed: 1 }).is_err());
        assert!(add_noise(&g, NoiseSpec { level: -0.1, seed: 1 }).is_err());
    }

    #[test]
    fn relative_error_cases() {
        let grid = Arc::new(product_grid(6, 12).unwrap());
        let f = Phantom::parse("0 0 1 -0.5 1.0").unwrap().sample(grid.clone());
        assert_eq!(relative_error(&f, &f).unwrap(), 0.0);
        let zero = NodeFunction::new(grid.clone(), vec![Complex64::new(0.0, 0.0); grid.len()]).unwrap();
        assert_eq!(relative_error(&f, &zero).unwrap(), 1.0);
        let twice = NodeFunction::new(grid.clone(), f.samples().iter().map(|v| v * 2.0).collect()).unwrap();
        assert!((relative_error(&f, &twice).unwrap() - 1.0).abs() < 1e-15);
        assert!(relative_error(&zero, &f).is_err());

        let a = HarmonicCoeffs::unit(3, 2, 1);
        assert_eq!(relative_error_coeffs(&a, &a).unwrap(), 0.0);
        assert_eq!(relative_error_coeffs(&a, &HarmonicCoeffs::zeros(3)).unwrap(), 1.0);
        assert!(relative_error_coeffs(&HarmonicCoeffs::zeros(3), &a).is_err());
    }

    #[test]
    fn evenness_and_zero_amplitude() {
        use rand::Rng;
        let ph = Phantom::default_tetrahedral();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let p = Point3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalized();
            assert_eq!(ph.eval(&p), ph.eval(&-p));
        }
        let flat = Phantom::parse("0 0 1 0.3 0.0").unwrap();
        let grid = Arc::new(product_grid(6, 12).unwrap());
        let g = forward_data(&flat, grid, 64).unwrap();
        assert!(g.samples().iter().all(|v| *v == Complex64::new(0.0, 0.0)));
        let cap = SplineCap::new(Point3::new(0.0, 0.0, 1.0), 0.0, 2.0).unwrap();
        assert_eq!(cap.eval(&Point3::new(0.0, 0.0, 1.0)), 1.0);
        assert_eq!(cap.eval(&Point3::new(1.0, 0.0, 0.0)), 0.0);
    }

    #[test]
    fn polar_cap_data_is_zonal() {
        let ph = Phantom::parse("0 0 1 0.4 1.0").unwrap();
        let grid = Arc::new(product_grid(10, 20).unwrap());
        let g = forward_data(&ph, grid.clone(), 256).unwrap();
        for r in grid.rings() {
            let first = g.samples()[r.start];
            for j in r.start..r.start + r.len {
                assert!((g.samples()[j] - first).norm() < 1e-10);
            }
        }
    }
}
