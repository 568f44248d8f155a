//! Spherical harmonics and quadrature-based analysis/synthesis.
//!
//! Convention: orthonormal `Y_ℓ^m(φ(λ, θ)) = P̄_ℓ^m(cos θ) e^{imλ}` with the Condon–Shortley
//! phase folded into `P̄_ℓ^m`, and `Y_ℓ^{-m} = (-1)^m conj(Y_ℓ^m)`. The normalized associated
//! Legendre functions are generated by the usual fully-normalized three-term recurrence, so
//! no factorials appear. Values stay in range for `ℓ ≲ 150` on every grid used here.
//!
//! Transforms are plain quadrature sums, reassociated ring by ring: first the longitude sum
//! for every order `m`, then the colatitude sum against `P̄_ℓ^m`.

use std::borrow::Cow;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{QuadratureGrid, Ring, SphCoord};

/// Index of `(ℓ, m)` (with `m ≥ 0`) in a triangular Legendre table.
#[inline]
pub fn tri_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Fully-normalized `P̄_ℓ^m(cos θ)` for `0 ≤ m ≤ ℓ ≤ l_max`, triangular layout.
pub fn legendre_table(l_max: usize, cos_theta: f64, sin_theta: f64) -> Vec<f64> {
    let mut p = vec![0.0; tri_index(l_max, l_max) + 1];
    p[0] = 1.0 / (4.0 * PI).sqrt();
    for m in 1..=l_max {
        let mf = m as f64;
        p[tri_index(m, m)] = -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * sin_theta * p[tri_index(m - 1, m - 1)];
    }
    for m in 0..=l_max {
        if m < l_max {
            p[tri_index(m + 1, m)] = (2.0 * m as f64 + 3.0).sqrt() * cos_theta * p[tri_index(m, m)];
        }
        for l in (m + 2)..=l_max {
            let (a, b) = recurrence_coeffs(l, m);
            p[tri_index(l, m)] = a * (cos_theta * p[tri_index(l - 1, m)] - b * p[tri_index(l - 2, m)]);
        }
    }
    p
}

#[inline]
fn recurrence_coeffs(l: usize, m: usize) -> (f64, f64) {
    let lf = l as f64;
    let mf = m as f64;
    let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
    let lm1 = lf - 1.0;
    let b = ((lm1 * lm1 - mf * mf) / (4.0 * lm1 * lm1 - 1.0)).sqrt();
    (a, b)
}

/// `P̄_ℓ^m(cos θ)` for a single `(ℓ, m)`, `m ≥ 0`, by the column recurrence.
fn legendre_single(l: usize, m: usize, cos_theta: f64, sin_theta: f64) -> f64 {
    let mut pmm = 1.0 / (4.0 * PI).sqrt();
    for k in 1..=m {
        let kf = k as f64;
        pmm *= -((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * sin_theta;
    }
    if l == m {
        return pmm;
    }
    let mut prev = pmm;
    let mut cur = (2.0 * m as f64 + 3.0).sqrt() * cos_theta * pmm;
    for k in (m + 2)..=l {
        let (a, b) = recurrence_coeffs(k, m);
        let next = a * (cos_theta * cur - b * prev);
        prev = cur;
        cur = next;
    }
    cur
}

/// Orthonormal spherical harmonic `Y_ℓ^m` at `c`.
pub fn eval_ylm(l: i64, m: i64, c: SphCoord) -> Result<Complex64> {
    if l < 0 || m.abs() > l {
        return Err(Error::IndexOutOfRange(format!("Y_l^m needs 0 <= |m| <= l, got l={l}, m={m}")));
    }
    let (st, ct) = c.theta.sin_cos();
    let ma = m.unsigned_abs() as usize;
    let mut p = legendre_single(l as usize, ma, ct, st);
    if m < 0 && ma % 2 == 1 {
        p = -p;
    }
    Ok(Complex64::from_polar(p, m as f64 * c.lambda))
}

/// Spherical-harmonic coefficients `c(ℓ, m)` for `0 ≤ ℓ ≤ l_max`, `|m| ≤ ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoeffs {
    l_max: usize,
    values: Vec<Complex64>,
}

impl HarmonicCoeffs {
    pub fn zeros(l_max: usize) -> Self {
        HarmonicCoeffs { l_max, values: vec![Complex64::new(0.0, 0.0); (l_max + 1) * (l_max + 1)] }
    }

    /// Builds coefficients from a flat vector in `(ℓ, m)` order (`ℓ² + ℓ + m`).
    pub fn from_vec(l_max: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != (l_max + 1) * (l_max + 1) {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coefficients for l_max={l_max}, got {}",
                (l_max + 1) * (l_max + 1),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::invalid("non-finite harmonic coefficient"));
        }
        Ok(HarmonicCoeffs { l_max, values })
    }

    /// Single unit coefficient at `(l, m)`.
    pub fn unit(l_max: usize, l: usize, m: i64) -> Self {
        let mut c = Self::zeros(l_max);
        c[(l, m)] = Complex64::new(1.0, 0.0);
        c
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    #[inline]
    pub fn index(l: usize, m: i64) -> usize {
        ((l * l + l) as i64 + m) as usize
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.values
    }

    /// Iterates `(ℓ, m, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, i64, Complex64)> + '_ {
        (0..=self.l_max)
            .flat_map(move |l| (-(l as i64)..=l as i64).map(move |m| (l, m, self.values[Self::index(l, m)])))
    }

    /// Multiplies every degree-`ℓ` block by `factor(ℓ)`.
    pub fn scale_by_degree(&self, factor: impl Fn(usize) -> f64) -> Self {
        let mut out = self.clone();
        for l in 0..=self.l_max {
            let f = factor(l);
            let lo = l * l;
            for v in &mut out.values[lo..lo + 2 * l + 1] {
                *v *= f;
            }
        }
        out
    }

    /// Euclidean (L²) norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `Σ conj(self) · other`, i.e. `⟨other, self⟩` in L².
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_same(other)?;
        Ok(other.values.iter().zip(&self.values).map(|(a, b)| a * b.conj()).sum())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(HarmonicCoeffs { l_max: self.l_max, values })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(HarmonicCoeffs { l_max: self.l_max, values })
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        HarmonicCoeffs { l_max: self.l_max, values: self.values.iter().map(|v| v * s).collect() }
    }

    /// Largest magnitude among odd-degree coefficients.
    pub fn max_odd_degree(&self) -> f64 {
        self.iter().filter(|(l, _, _)| l % 2 == 1).map(|(_, _, v)| v.norm()).fold(0.0, f64::max)
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.l_max != other.l_max {
            return Err(Error::DimensionMismatch(format!("l_max {} vs {}", self.l_max, other.l_max)));
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, i64)> for HarmonicCoeffs {
    type Output = Complex64;
    fn index(&self, (l, m): (usize, i64)) -> &Complex64 {
        assert!(l <= self.l_max && m.unsigned_abs() as usize <= l, "({l}, {m}) out of range");
        &self.values[Self::index(l, m)]
    }
}

impl std::ops::IndexMut<(usize, i64)> for HarmonicCoeffs {
    fn index_mut(&mut self, (l, m): (usize, i64)) -> &mut Complex64 {
        assert!(l <= self.l_max && m.unsigned_abs() as usize <= l, "({l}, {m}) out of range");
        &mut self.values[Self::index(l, m)]
    }
}

/// `√(Σ (ℓ+½)^{2s} |c(ℓ,m)|²)`.
pub fn sobolev_norm(c: &HarmonicCoeffs, s: f64) -> f64 {
    c.iter().map(|(l, _, v)| (l as f64 + 0.5).powf(2.0 * s) * v.norm_sqr()).sum::<f64>().sqrt()
}

/// Zeroes all odd-degree coefficients.
pub fn even_projection(c: &HarmonicCoeffs) -> HarmonicCoeffs {
    c.scale_by_degree(|l| if l % 2 == 0 { 1.0 } else { 0.0 })
}

/// Complex samples of a sphere function at the nodes of a grid.
#[derive(Debug, Clone)]
pub struct NodeFunction {
    grid: Arc<QuadratureGrid>,
    samples: Vec<Complex64>,
}

impl NodeFunction {
    pub fn new(grid: Arc<QuadratureGrid>, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a grid of {} nodes",
                samples.len(),
                grid.len()
            )));
        }
        Ok(NodeFunction { grid, samples })
    }

    /// Samples `f` at every node.
    pub fn from_fn(grid: Arc<QuadratureGrid>, f: impl Fn(usize) -> Complex64 + Sync + Send) -> Self {
        let samples = (0..grid.len()).into_par_iter().map(f).collect();
        NodeFunction { grid, samples }
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    /// Weighted discrete L² norm.
    pub fn l2_norm(&self) -> f64 {
        self.samples.iter().zip(self.grid.weights()).map(|(v, w)| w * v.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Cached state for repeated transforms between one grid and one degree bound.
#[derive(Debug, Clone)]
pub struct HarmonicPlan {
    grid: Arc<QuadratureGrid>,
    l_max: usize,
    legendre: Option<Vec<Vec<f64>>>,
}

/// Above this many cached table entries the plan recomputes Legendre values per ring.
const LEGENDRE_CACHE_LIMIT: usize = 20_000_000;

impl HarmonicPlan {
    pub fn new(grid: Arc<QuadratureGrid>, l_max: usize) -> Self {
        if grid.exact_degree() < 2 * l_max && !matches!(grid.kind(), crate::geometry::GridKind::Raster { .. })
        {
            log::warn!(
                "grid exactness {} is below 2*l_max = {}; analysis will alias",
                grid.exact_degree(),
                2 * l_max
            );
        }
        let tri = tri_index(l_max, l_max) + 1;
        let legendre = (grid.rings().len() * tri <= LEGENDRE_CACHE_LIMIT).then(|| {
            grid.rings().par_iter().map(|r| legendre_table(l_max, r.cos_theta, r.sin_theta)).collect()
        });
        HarmonicPlan { grid, l_max, legendre }
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    fn legendre(&self, ring: usize) -> Cow<'_, [f64]> {
        match &self.legendre {
            Some(t) => Cow::Borrowed(&t[ring]),
            None => {
                let r = &self.grid.rings()[ring];
                Cow::Owned(legendre_table(self.l_max, r.cos_theta, r.sin_theta))
            }
        }
    }

    /// Quadrature analysis `c(ℓ,m) = Σ_i w_i f(ξ_i) conj(Y_ℓ^m(ξ_i))`.
    pub fn analysis(&self, samples: &[Complex64]) -> Result<HarmonicCoeffs> {
        if samples.len() != self.grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for a grid of {} nodes",
                samples.len(),
                self.grid.len()
            )));
        }
        let l = self.l_max as i64;
        let coords = self.grid.coords();
        let weights = self.grid.weights();
        // spectra[r][m + L] = Σ_{j in ring r} w_j f_j e^{-imλ_j}
        let spectra: Vec<Vec<Complex64>> = self
            .grid
            .rings()
            .par_iter()
            .map(|ring| {
                let mut s = vec![Complex64::new(0.0, 0.0); (2 * l + 1) as usize];
                for j in ring.start..ring.start + ring.len {
                    let wf = samples[j] * weights[j];
                    let lam = coords[j].lambda;
                    s[l as usize] += wf;
                    for m in 1..=l {
                        let e = Complex64::from_polar(1.0, -(m as f64) * lam);
                        s[(l + m) as usize] += wf * e;
                        s[(l - m) as usize] += wf * e.conj();
                    }
                }
                s
            })
            .collect();
        Ok(self.analysis_from_spectra(&spectra))
    }

    /// Finishes an analysis given per-ring longitude spectra (`2·l_max + 1` orders each,
    /// order `m` at offset `m + l_max`).
    pub fn analysis_from_spectra(&self, spectra: &[Vec<Complex64>]) -> HarmonicCoeffs {
        let lm = self.l_max as i64;
        let columns: Vec<Vec<Complex64>> = (-lm..=lm)
            .into_par_iter()
            .map(|m| {
                let ring_vals: Vec<Complex64> = spectra.iter().map(|s| s[(m + lm) as usize]).collect();
                self.order_column(m, &ring_vals)
            })
            .collect();
        let mut out = HarmonicCoeffs::zeros(self.l_max);
        for (mi, col) in columns.into_iter().enumerate() {
            let m = mi as i64 - lm;
            let ma = m.unsigned_abs() as usize;
            for (k, v) in col.into_iter().enumerate() {
                out[(ma + k, m)] = v;
            }
        }
        out
    }

    /// Colatitude sum for one order: returns `c(ℓ, m)` for `ℓ = |m|..=l_max` from the
    /// per-ring longitude sums `F_r(m)`.
    pub fn order_column(&self, m: i64, ring_vals: &[Complex64]) -> Vec<Complex64> {
        let ma = m.unsigned_abs() as usize;
        let sign = if m < 0 && ma % 2 == 1 { -1.0 } else { 1.0 };
        let mut col = vec![Complex64::new(0.0, 0.0); self.l_max + 1 - ma];
        for (r, f) in ring_vals.iter().enumerate() {
            if f.re == 0.0 && f.im == 0.0 {
                continue;
            }
            let p = self.legendre(r);
            for (k, c) in col.iter_mut().enumerate() {
                *c += f * (sign * p[tri_index(ma + k, ma)]);
            }
        }
        col
    }

    /// Synthesis `f(ξ_i) = Σ c(ℓ,m) Y_ℓ^m(ξ_i)`.
    pub fn synthesis(&self, c: &HarmonicCoeffs) -> Result<Vec<Complex64>> {
        if c.l_max() > self.l_max {
            return Err(Error::DimensionMismatch(format!(
                "coefficients of degree {} exceed plan degree {}",
                c.l_max(),
                self.l_max
            )));
        }
        let l = c.l_max() as i64;
        let coords = self.grid.coords();
        let rings = self.grid.rings();
        let per_ring: Vec<Vec<Complex64>> = (0..rings.len())
            .into_par_iter()
            .map(|ri| {
                let ring: &Ring = &rings[ri];
                let p = self.legendre(ri);
                let mut g = vec![Complex64::new(0.0, 0.0); (2 * l + 1) as usize];
                for m in -l..=l {
                    let ma = m.unsigned_abs() as usize;
                    let sign = if m < 0 && ma % 2 == 1 { -1.0 } else { 1.0 };
                    let mut acc = Complex64::new(0.0, 0.0);
                    for ll in ma..=l as usize {
                        acc += c[(ll, m)] * p[tri_index(ll, ma)];
                    }
                    g[(m + l) as usize] = acc * sign;
                }
                (ring.start..ring.start + ring.len)
                    .map(|j| {
                        let lam = coords[j].lambda;
                        let mut v = g[l as usize];
                        for m in 1..=l {
                            let e = Complex64::from_polar(1.0, m as f64 * lam);
                            v += g[(l + m) as usize] * e + g[(l - m) as usize] * e.conj();
                        }
                        v
                    })
                    .collect()
            })
            .collect();
        Ok(per_ring.into_iter().flatten().collect())
    }
}

/// Quadrature analysis of `f` up to degree `l_max`.
pub fn analysis(f: &NodeFunction, l_max: usize) -> Result<HarmonicCoeffs> {
    HarmonicPlan::new(f.grid().clone(), l_max).analysis(f.samples())
}

/// Evaluates the expansion `c` at the nodes of `grid`.
pub fn synthesis(c: &HarmonicCoeffs, grid: Arc<QuadratureGrid>) -> Result<NodeFunction> {
    let plan = HarmonicPlan::new(grid.clone(), c.l_max());
    let samples = plan.synthesis(c)?;
    NodeFunction::new(grid, samples)
}

/// Writes `l,m,re,im` lines with a header.
pub fn write_coeffs_csv(c: &HarmonicCoeffs, path: &Path) -> Result<()> {
    let mut out = String::from("l,m,re,im\n");
    for (l, m, v) in c.iter() {
        writeln!(out, "{l},{m},{},{}", v.re, v.im).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_coeffs_csv(path: &Path) -> Result<HarmonicCoeffs> {
    let text = fs::read_to_string(path)?;
    parse_coeffs_csv(&text)
}

pub fn parse_coeffs_csv(text: &str) -> Result<HarmonicCoeffs> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with('l')) {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::format(format!("line {}: expected l,m,re,im", i + 1)));
        }
        let bad = || Error::format(format!("line {}: unparsable field", i + 1));
        let l: usize = f[0].trim().parse().map_err(|_| bad())?;
        let m: i64 = f[1].trim().parse().map_err(|_| bad())?;
        let re: f64 = f[2].trim().parse().map_err(|_| bad())?;
        let im: f64 = f[3].trim().parse().map_err(|_| bad())?;
        if m.unsigned_abs() as usize > l {
            return Err(Error::format(format!("line {}: |m| > l", i + 1)));
        }
        rows.push((l, m, Complex64::new(re, im)));
    }
    let l_max = rows.iter().map(|r| r.0).max().ok_or_else(|| Error::format("no coefficients"))?;
    let mut c = HarmonicCoeffs::zeros(l_max);
    for (l, m, v) in rows {
        c[(l, m)] = v;
    }
    Ok(c)
}
