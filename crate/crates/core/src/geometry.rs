//! Points, spherical coordinates, quadrature grids and great-circle frames on the unit sphere.
//!
//! Spherical coordinates follow `φ(λ, θ) = (cos λ sin θ, sin λ sin θ, cos θ)` with
//! longitude `λ ∈ [0, 2π)` and colatitude `θ ∈ [0, π]`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::ops::{Add, Mul, Neg, Sub};
use std::path::Path;

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Norm tolerance applied to points that are supposed to lie on the sphere.
pub const UNIT_NORM_TOL: f64 = 1e-8;

/// Cartesian point in R³.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn dot(&self, other: &Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Point3) -> Point3 {
        Point3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Returns the point scaled to unit length. Panics on the zero vector.
    pub fn normalized(&self) -> Point3 {
        let n = self.norm();
        assert!(n > 0.0, "cannot normalize the zero vector");
        *self * (1.0 / n)
    }

    pub fn is_unit(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Longitude/colatitude pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphCoord {
    pub lambda: f64,
    pub theta: f64,
}

impl SphCoord {
    pub const fn new(lambda: f64, theta: f64) -> Self {
        SphCoord { lambda, theta }
    }
}

pub fn sph_to_cart(c: SphCoord) -> Point3 {
    let (sl, cl) = c.lambda.sin_cos();
    let (st, ct) = c.theta.sin_cos();
    Point3::new(cl * st, sl * st, ct)
}

/// Inverse of [`sph_to_cart`]. Poles map to `λ = 0`.
pub fn cart_to_sph(p: Point3) -> Result<SphCoord> {
    if !p.is_unit(UNIT_NORM_TOL) {
        return Err(Error::invalid(format!(
            "point ({}, {}, {}) is not on the unit sphere (norm {})",
            p.x,
            p.y,
            p.z,
            p.norm()
        )));
    }
    let rho = p.x.hypot(p.y);
    let theta = rho.atan2(p.z);
    let lambda = if rho == 0.0 {
        0.0
    } else {
        let l = p.y.atan2(p.x);
        if l < 0.0 {
            l + TWO_PI
        } else {
            l
        }
    };
    // atan2 can return exactly 2π after the shift for tiny negative angles
    let lambda = if lambda >= TWO_PI { 0.0 } else { lambda };
    Ok(SphCoord::new(lambda, theta))
}

/// Antipodal point `φ(λ + π, π − θ)`.
pub fn antipode(c: SphCoord) -> SphCoord {
    SphCoord::new((c.lambda + PI).rem_euclid(TWO_PI), PI - c.theta)
}

/// Orthonormal frame `{xi, u, v}` whose `u, v` span the great circle perpendicular to `xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreatCircleFrame {
    pub xi: Point3,
    pub u: Point3,
    pub v: Point3,
}

impl GreatCircleFrame {
    /// Point `cos(t) u + sin(t) v` on the great circle.
    pub fn point(&self, t: f64) -> Point3 {
        let (s, c) = t.sin_cos();
        self.u * c + self.v * s
    }
}

/// Right-handed tangent frame with `u` pointing east, `v = xi × u`.
///
/// Rotating `xi` about the polar axis rotates the frame with it, and `-xi` yields the same
/// circle traversed from `-u`. At the poles `u` is the x axis.
pub fn tangent_frame(xi: Point3) -> GreatCircleFrame {
    let rho = xi.x.hypot(xi.y);
    let u = if rho > 1e-300 { Point3::new(-xi.y / rho, xi.x / rho, 0.0) } else { Point3::new(1.0, 0.0, 0.0) };
    let v = xi.cross(&u);
    GreatCircleFrame { xi, u, v }
}

/// Gauss–Legendre nodes on `[-1, 1]`, sorted descending, with weights.
///
/// Nodes are computed by Newton iteration on the three-term recurrence and mirrored so
/// that the rule is exactly symmetric.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        if n % 2 == 1 && i == half - 1 {
            z = 0.0;
        }
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        if n % 2 == 1 && i == half - 1 {
            z = 0.0;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// A latitude ring of nodes: nodes `start..start + len` share `cos θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    pub cos_theta: f64,
    pub sin_theta: f64,
    pub start: usize,
    pub len: usize,
    /// Set when the ring's longitudes are `offset + 2πj/len` with a common weight.
    pub uniform_offset: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    /// Gauss–Legendre in `cos θ` tensored with uniform longitudes.
    Product { n_theta: usize, n_lambda: usize },
    /// Equal-weight point set loaded from file.
    Design,
    /// Pixel-centre raster used for image export; not an integration rule.
    Raster { width: usize, height: usize },
}

/// Nodes and positive weights for discrete integration over the sphere.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    nodes: Vec<Point3>,
    coords: Vec<SphCoord>,
    weights: Vec<f64>,
    exact_degree: usize,
    kind: GridKind,
    rings: Vec<Ring>,
}

impl QuadratureGrid {
    pub fn nodes(&self) -> &[Point3] {
        &self.nodes
    }

    pub fn coords(&self) -> &[SphCoord] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Polynomial degree up to which the rule integrates exactly.
    pub fn exact_degree(&self) -> usize {
        self.exact_degree
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn rings(&self) -> &[Ring] {
        &self.rings
    }

    /// Chebyshev-type grids carry identical weights.
    pub fn is_chebyshev_type(&self) -> bool {
        self.weights.windows(2).all(|w| w[0] == w[1])
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Index of the node at `-ξ_i`, when the grid layout makes it known exactly.
    pub fn antipode_index(&self, i: usize) -> Option<usize> {
        match self.kind {
            GridKind::Product { n_theta, n_lambda } if n_lambda % 2 == 0 => {
                let r = i / n_lambda;
                let j = i % n_lambda;
                Some((n_theta - 1 - r) * n_lambda + (j + n_lambda / 2) % n_lambda)
            }
            _ => None,
        }
    }

    /// Short description used in reports.
    pub fn describe(&self) -> String {
        match self.kind {
            GridKind::Product { n_theta, n_lambda } => {
                format!("product {}x{} (degree {})", n_theta, n_lambda, self.exact_degree)
            }
            GridKind::Design => format!("design {} (degree {})", self.len(), self.exact_degree),
            GridKind::Raster { width, height } => format!("raster {width}x{height}"),
        }
    }

    /// Equirectangular ring layout used for raster export: pixel-centre colatitudes
    /// and longitudes, unit weights.
    pub fn raster(width: usize, height: usize) -> QuadratureGrid {
        let mut nodes = Vec::with_capacity(width * height);
        let mut coords = Vec::with_capacity(width * height);
        let mut rings = Vec::with_capacity(height);
        for r in 0..height {
            let theta = PI * (r as f64 + 0.5) / height as f64;
            let start = nodes.len();
            for j in 0..width {
                let lambda = TWO_PI * (j as f64 + 0.5) / width as f64;
                let c = SphCoord::new(lambda, theta);
                coords.push(c);
                nodes.push(sph_to_cart(c));
            }
            let (st, ct) = theta.sin_cos();
            rings.push(Ring {
                cos_theta: ct,
                sin_theta: st,
                start,
                len: width,
                uniform_offset: Some(PI / width as f64),
            });
        }
        let n = nodes.len();
        QuadratureGrid {
            nodes,
            coords,
            weights: vec![4.0 * PI / n as f64; n],
            exact_degree: 0,
            kind: GridKind::Raster { width, height },
            rings,
        }
    }
}

/// Gauss–Legendre (in `cos θ`) × uniform longitude product rule.
pub fn product_grid(n_theta: usize, n_lambda: usize) -> Result<QuadratureGrid> {
    if n_theta == 0 || n_lambda == 0 {
        return Err(Error::invalid("product grid needs n_theta >= 1 and n_lambda >= 1"));
    }
    let (xs, ws) = gauss_legendre(n_theta);
    let dl = TWO_PI / n_lambda as f64;
    let mut nodes = Vec::with_capacity(n_theta * n_lambda);
    let mut coords = Vec::with_capacity(n_theta * n_lambda);
    let mut weights = Vec::with_capacity(n_theta * n_lambda);
    let mut rings = Vec::with_capacity(n_theta);
    for (&x, &w) in xs.iter().zip(&ws) {
        let st = (1.0 - x * x).sqrt();
        let theta = st.atan2(x);
        let start = nodes.len();
        for j in 0..n_lambda {
            let lambda = dl * j as f64;
            let (sl, cl) = lambda.sin_cos();
            nodes.push(Point3::new(cl * st, sl * st, x));
            coords.push(SphCoord::new(lambda, theta));
            weights.push(w * dl);
        }
        rings.push(Ring { cos_theta: x, sin_theta: st, start, len: n_lambda, uniform_offset: Some(0.0) });
    }
    let exact_degree = (2 * n_theta - 1).min(n_lambda - 1);
    Ok(QuadratureGrid {
        nodes,
        coords,
        weights,
        exact_degree,
        kind: GridKind::Product { n_theta, n_lambda },
        rings,
    })
}

/// Builds an equal-weight grid from unit nodes.
pub fn design_from_nodes(nodes: Vec<Point3>, exact_degree: usize) -> Result<QuadratureGrid> {
    if nodes.is_empty() {
        return Err(Error::format("point set is empty"));
    }
    let mut coords = Vec::with_capacity(nodes.len());
    for (i, p) in nodes.iter().enumerate() {
        let c = cart_to_sph(*p).map_err(|_| Error::format(format!("node {} has norm {}", i, p.norm())))?;
        coords.push(c);
    }
    let m = nodes.len();
    let rings = coords
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (st, ct) = c.theta.sin_cos();
            Ring { cos_theta: ct, sin_theta: st, start: i, len: 1, uniform_offset: None }
        })
        .collect();
    Ok(QuadratureGrid {
        nodes,
        coords,
        weights: vec![4.0 * PI / m as f64; m],
        exact_degree,
        kind: GridKind::Design,
        rings,
    })
}

/// Parses the `design M D` point-set format.
pub fn parse_design(text: &str) -> Result<QuadratureGrid> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::format("empty point-set file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 || fields[0] != "design" {
        return Err(Error::format(format!("bad header '{header}', expected 'design M D'")));
    }
    let m: usize = fields[1].parse().map_err(|_| Error::format(format!("bad node count '{}'", fields[1])))?;
    let degree: usize =
        fields[2].parse().map_err(|_| Error::format(format!("bad degree '{}'", fields[2])))?;
    let mut nodes = Vec::with_capacity(m);
    for (i, line) in lines.enumerate() {
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(format!("bad coordinates on node line {}", i + 1)))?;
        if vals.len() != 3 {
            return Err(Error::format(format!("node line {} needs 3 coordinates", i + 1)));
        }
        nodes.push(Point3::new(vals[0], vals[1], vals[2]));
    }
    if nodes.len() != m {
        return Err(Error::format(format!("header announces {m} nodes, found {}", nodes.len())));
    }
    design_from_nodes(nodes, degree)
}

pub fn load_design(path: &Path) -> Result<QuadratureGrid> {
    let text = fs::read_to_string(path)?;
    parse_design(&text)
}

/// Writes nodes in the point-set format. Shortest round-trip float formatting keeps the
/// coordinates bit-exact on reload.
pub fn save_design(grid: &QuadratureGrid, path: &Path) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "design {} {}", grid.len(), grid.exact_degree()).unwrap();
    for p in grid.nodes() {
        writeln!(out, "{} {} {}", p.x, p.y, p.z).unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}
