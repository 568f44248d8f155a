//! The Funk–Radon transform: mean value over the great circle perpendicular to each point.
//!
//! Spherical harmonics are eigenfunctions with eigenvalue `P_ℓ(0)`, so [`fr_spectral`] is a
//! diagonal multiplier. [`fr_direct`] integrates along the circles with the trapezoidal rule
//! and serves as the independent forward simulator.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{tangent_frame, Point3, QuadratureGrid};
use crate::harmonics::{HarmonicCoeffs, NodeFunction};

/// Default number of trapezoidal nodes per great circle.
pub const DEFAULT_M_CIRCLE: usize = 512;

/// `P_ℓ(0)` for even `ℓ`, via `r_ℓ = -r_{ℓ-2} (ℓ-1)/ℓ`.
pub fn legendre_p0(l: i64) -> Result<f64> {
    if l < 0 || l % 2 != 0 {
        return Err(Error::invalid(format!("P_l(0) table is defined for even l >= 0, got {l}")));
    }
    let mut r = 1.0;
    let mut j = 2;
    while j <= l {
        r = -r * (j - 1) as f64 / j as f64;
        j += 2;
    }
    Ok(r)
}

/// `P_ℓ(0)` for all `ℓ ≤ l_max`, zero at odd degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreZeroTable {
    values: Vec<f64>,
}

impl LegendreZeroTable {
    pub fn new(l_max: usize) -> Self {
        let mut values = vec![0.0; l_max + 1];
        values[0] = 1.0;
        for l in (2..=l_max).step_by(2) {
            values[l] = -values[l - 2] * (l - 1) as f64 / l as f64;
        }
        LegendreZeroTable { values }
    }

    pub fn l_max(&self) -> usize {
        self.values.len() - 1
    }

    pub fn get(&self, l: usize) -> f64 {
        self.values[l]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Funk–Radon transform in the harmonic domain.
pub fn fr_spectral(c: &HarmonicCoeffs) -> HarmonicCoeffs {
    let table = LegendreZeroTable::new(c.l_max());
    c.scale_by_degree(|l| table.get(l))
}

/// `(ℓ+½)^{1/2} |P_ℓ(0)|` for even `ℓ`.
pub fn stability_ratio(l: i64) -> Result<f64> {
    let p = legendre_p0(l)?;
    Ok((l as f64 + 0.5).sqrt() * p.abs())
}

/// A function that can be evaluated anywhere on the sphere.
pub trait SphereFunction: Sync {
    fn eval(&self, p: &Point3) -> Complex64;
}

impl<F> SphereFunction for F
where
    F: Fn(&Point3) -> Complex64 + Sync,
{
    fn eval(&self, p: &Point3) -> Complex64 {
        self(p)
    }
}

/// Mean of `f` over the great circle perpendicular to `xi`.
pub fn great_circle_mean<F: SphereFunction + ?Sized>(f: &F, xi: Point3, m_circle: usize) -> Complex64 {
    let frame = tangent_frame(xi);
    let dt = 2.0 * PI / m_circle as f64;
    let sum: Complex64 = (0..m_circle).map(|j| f.eval(&frame.point(dt * j as f64))).sum();
    sum / m_circle as f64
}

/// Funk–Radon transform by trapezoidal integration along each node's great circle.
pub fn fr_direct<F: SphereFunction + ?Sized>(
    f: &F,
    grid: Arc<QuadratureGrid>,
    m_circle: usize,
) -> Result<NodeFunction> {
    if m_circle < 4 {
        return Err(Error::invalid(format!("m_circle must be >= 4, got {m_circle}")));
    }
    let samples: Vec<Complex64> =
        grid.nodes().par_iter().map(|xi| great_circle_mean(f, *xi, m_circle)).collect();
    NodeFunction::new(grid, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::cart_to_sph;
    use crate::geometry::product_grid;
    use crate::harmonics::{eval_ylm, synthesis};

    /// Three-term Legendre recurrence evaluated at x = 0, independent of the ratio form.
    fn p0_oracle(l: usize) -> f64 {
        let (mut p0, mut p1) = (1.0, 0.0);
        if l == 0 {
            return 1.0;
        }
        for j in 2..=l {
            let jf = j as f64;
            let p2 = -(jf - 1.0) * p0 / jf;
            p0 = p1;
            p1 = p2;
        }
        p1
    }

    #[test]
    fn p0_values() {
        assert_eq!(legendre_p0(0).unwrap(), 1.0);
        assert_eq!(p0_oracle(2), -0.5);
        assert_eq!(p0_oracle(4), 0.375);
        assert_eq!(legendre_p0(2).unwrap(), -0.5);
        assert_eq!(legendre_p0(4).unwrap(), 0.375);
        for l in (0..60).step_by(2) {
            assert!((legendre_p0(l as i64).unwrap() - p0_oracle(l)).abs() < 1e-15);
        }
        assert!(legendre_p0(3).is_err());
        assert!(legendre_p0(-2).is_err());
    }

    #[test]
    fn zero_table_invariants() {
        let t = LegendreZeroTable::new(200);
        assert_eq!(t.get(0), 1.0);
        for l in (2..=200).step_by(2) {
            assert_eq!(t.get(l).signum(), if (l / 2) % 2 == 0 { 1.0 } else { -1.0 });
            assert!(t.get(l).abs() < t.get(l - 2).abs());
            assert_eq!(t.get(l - 1), 0.0);
        }
    }

    #[test]
    fn spectral_examples() {
        let c = HarmonicCoeffs::unit(4, 0, 0);
        assert_eq!(fr_spectral(&c), c);
        for m in -1..=1 {
            assert_eq!(fr_spectral(&HarmonicCoeffs::unit(4, 1, m)).norm(), 0.0);
        }
        let r = fr_spectral(&HarmonicCoeffs::unit(4, 2, 0));
        assert_eq!(r[(2, 0)].re, -0.5);
    }

    #[test]
    fn direct_examples() {
        let g = Arc::new(product_grid(8, 16).unwrap());
        let one = fr_direct(&|_: &Point3| Complex64::new(1.0, 0.0), g.clone(), 64).unwrap();
        assert!(one.samples().iter().all(|v| (v - 1.0).norm() < 1e-14));
        let z = fr_direct(&|p: &Point3| Complex64::new(p.z, 0.0), g.clone(), 64).unwrap();
        assert!(z.samples().iter().all(|v| v.norm() < 1e-14));

        let y20 = |p: &Point3| eval_ylm(2, 0, cart_to_sph(p.normalized()).unwrap()).unwrap();
        let r = fr_direct(&y20, g.clone(), 512).unwrap();
        let expected = synthesis(&fr_spectral(&HarmonicCoeffs::unit(2, 2, 0)), g).unwrap();
        for (a, b) in r.samples().iter().zip(expected.samples()) {
            assert!((a - b).norm() < 1e-10);
        }
        assert!(fr_direct(&y20, Arc::new(product_grid(2, 2).unwrap()), 3).is_err());
    }

    #[test]
    fn direct_output_is_even() {
        let g = Arc::new(product_grid(10, 20).unwrap());
        let f = |p: &Point3| Complex64::new((3.0 * p.x + p.y * p.z).sin() + p.z.powi(3), 0.0);
        let r = fr_direct(&f, g.clone(), 128).unwrap();
        for i in 0..g.len() {
            let j = g.antipode_index(i).unwrap();
            assert!((r.samples()[i] - r.samples()[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn stability_ratio_bounds() {
        assert!((stability_ratio(0).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(stability_ratio(200).unwrap() < (2.0 / PI).sqrt());
        let mut prev = 0.0;
        for l in (0..=400).step_by(2) {
            let r = stability_ratio(l).unwrap();
            assert!(r >= prev);
            assert!(r >= 0.5f64.sqrt() - 1e-15 && r <= (2.0 / PI).sqrt());
            prev = r;
        }
        assert!(stability_ratio(5).is_err());
    }
}
