//! Frame decomposition of the Funk–Radon transform built on trigonometric basis functions.
//!
//! The basis `b_{n,k}(φ(λ,θ)) = e^{inλ} sin(kθ) / (π √sin θ)` is orthonormal in `L²(S²)`;
//! the members with `n + k` odd span the even functions. The frame functions are
//! `e_{n,k} = R L b_{n,k}` and the inversion reads
//!
//! ```text
//! f = Σ_{(n,k) ∈ J} ⟨L g, b_{n,k}⟩ ẽ_{n,k}
//! ```
//!
//! with `ẽ` the dual frame. All work happens in the spherical-harmonic domain up to `l_max`;
//! the duals are expanded over the retained `b` functions, and the Galerkin matrix of the
//! frame operator is inverted by a truncated SVD.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{QuadratureGrid, SphCoord};
use crate::harmonics::{HarmonicCoeffs, HarmonicPlan};
use crate::radon::{fr_spectral, LegendreZeroTable};
use crate::sobolev::{apply_filtered, apply_l, FilterSpec};

/// Default relative threshold of the truncated-SVD pseudo-inverse.
pub const DEFAULT_PINV_THRESHOLD: f64 = 1e-3;

/// Residual `1 - Σ|coeff|²` above which a basis function is reported as poorly resolved.
pub const TAIL_WARN_LEVEL: f64 = 1e-2;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Index `(n, k)` of a trigonometric basis function, `k ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FrameIndex {
    pub n: i32,
    pub k: u32,
}

impl FrameIndex {
    pub fn new(n: i32, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("basis index k must be >= 1"));
        }
        Ok(FrameIndex { n, k })
    }

    /// Membership in `J = {(n,k) : n + k odd}` (the even basis functions).
    pub fn in_j(&self) -> bool {
        (self.n as i64 + self.k as i64).rem_euclid(2) == 1
    }
}

/// The members of `J` inside the box `|n| ≤ N`, `1 ≤ k ≤ N`, ordered k-major then by `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSetJ {
    n_max: u32,
    members: Vec<FrameIndex>,
}

impl IndexSetJ {
    pub fn new(n_max: u32) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::invalid("frame size N must be positive"));
        }
        let n = n_max as i32;
        let members = (1..=n_max)
            .flat_map(|k| (-n..=n).map(move |nn| FrameIndex { n: nn, k }))
            .filter(FrameIndex::in_j)
            .collect();
        Ok(IndexSetJ { n_max, members })
    }

    /// Index set with an explicit member list (used when reading tables back).
    pub fn from_members(n_max: u32, members: Vec<FrameIndex>) -> Result<Self> {
        let expected = Self::new(n_max)?;
        if expected.members != members {
            return Err(Error::format(format!(
                "member list does not match the canonical index set for N={n_max}"
            )));
        }
        Ok(expected)
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn members(&self) -> &[FrameIndex] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn position(&self, idx: FrameIndex) -> Option<usize> {
        self.members.iter().position(|m| *m == idx)
    }
}

/// `θ`-profile `sin(kθ) / (π √sin θ)`; zero at the poles.
fn theta_profile(k: u32, sin_theta: f64, cos_theta: f64) -> f64 {
    if sin_theta <= 0.0 {
        return 0.0;
    }
    let theta = sin_theta.atan2(cos_theta);
    (k as f64 * theta).sin() / (PI * sin_theta.sqrt())
}

/// Evaluates `b_{n,k}` at `c`.
pub fn basis_b(idx: FrameIndex, c: SphCoord) -> Complex64 {
    let (st, ct) = c.theta.sin_cos();
    if st <= 0.0 || c.theta <= 0.0 || c.theta >= PI {
        return ZERO;
    }
    Complex64::from_polar(theta_profile(idx.k, st, ct), idx.n as f64 * c.lambda)
}

/// Quadrature analysis of `b_{n,k}` on the plan's grid, all degrees kept.
///
/// On rings with uniformly spaced longitudes the longitude sum of `e^{i(n-m)λ}` is
/// evaluated in closed form, so orders other than `m ≡ n (mod ring size)` come out exactly
/// zero. Other rings are summed node by node.
pub fn basis_analysis(idx: FrameIndex, plan: &HarmonicPlan) -> HarmonicCoeffs {
    let grid = plan.grid();
    let l = plan.l_max() as i64;
    let weights = grid.weights();
    let coords = grid.coords();
    let profile: Vec<f64> =
        grid.rings().iter().map(|r| theta_profile(idx.k, r.sin_theta, r.cos_theta)).collect();
    let n = idx.n as i64;
    let mut out = HarmonicCoeffs::zeros(plan.l_max());
    for m in -l..=l {
        let d = n - m;
        let vals: Vec<Complex64> = grid
            .rings()
            .iter()
            .zip(&profile)
            .map(|(r, &p)| {
                if p == 0.0 {
                    return ZERO;
                }
                match r.uniform_offset {
                    Some(offset) => {
                        if d.rem_euclid(r.len as i64) != 0 {
                            ZERO
                        } else {
                            Complex64::from_polar(weights[r.start] * p * r.len as f64, d as f64 * offset)
                        }
                    }
                    None => (r.start..r.start + r.len)
                        .map(|j| Complex64::from_polar(weights[j] * p, d as f64 * coords[j].lambda))
                        .sum(),
                }
            })
            .collect();
        if vals.iter().all(|v| *v == ZERO) {
            continue;
        }
        let ma = m.unsigned_abs() as usize;
        for (kk, v) in plan.order_column(m, &vals).into_iter().enumerate() {
            out[(ma + kk, m)] = v;
        }
    }
    out
}

/// Even-degree harmonic coefficients of `b_{n,k}` for `(n,k) ∈ J`.
pub fn b_to_harmonics(idx: FrameIndex, plan: &HarmonicPlan) -> Result<HarmonicCoeffs> {
    if !idx.in_j() {
        return Err(Error::invalid(format!("({}, {}) is not in J: n + k must be odd", idx.n, idx.k)));
    }
    Ok(crate::harmonics::even_projection(&basis_analysis(idx, plan)))
}

/// Harmonic coefficients of the frame function `e_{n,k} = R L b_{n,k}`.
pub fn frame_function_e(idx: FrameIndex, plan: &HarmonicPlan) -> Result<HarmonicCoeffs> {
    Ok(fr_spectral(&apply_l(&b_to_harmonics(idx, plan)?)))
}

/// Diagonal multiplier `P_ℓ(0) (ℓ+½)^{1/2}` of `R L`.
pub fn rl_multiplier(l_max: usize) -> Vec<f64> {
    let p0 = LegendreZeroTable::new(l_max);
    (0..=l_max).map(|l| p0.get(l) * (l as f64 + 0.5).sqrt()).collect()
}

/// Sparse coefficient vector: `(flat index, value)` pairs sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCoeffs {
    entries: Vec<(usize, Complex64)>,
}

impl SparseCoeffs {
    fn from_dense(c: &HarmonicCoeffs) -> Self {
        SparseCoeffs {
            entries: c
                .values()
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != ZERO)
                .map(|(i, v)| (i, *v))
                .collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, Complex64)] {
        &self.entries
    }

    pub fn norm_sqr(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v.norm_sqr()).sum()
    }

    pub fn to_dense(&self, l_max: usize) -> HarmonicCoeffs {
        let mut c = HarmonicCoeffs::zeros(l_max);
        for &(i, v) in &self.entries {
            c.values_mut()[i] = v;
        }
        c
    }

    /// `⟨h, b⟩ = Σ h · conj(b)`.
    pub fn inner_with(&self, h: &HarmonicCoeffs) -> Complex64 {
        let hv = h.values();
        self.entries.iter().map(|&(i, b)| hv[i] * b.conj()).sum()
    }
}

/// Harmonic expansions of every retained `b_{n,k}`, with their truncation residuals.
#[derive(Debug, Clone)]
pub struct FrameBasis {
    index_set: IndexSetJ,
    l_max: usize,
    coeffs: Vec<SparseCoeffs>,
    residuals: Vec<f64>,
}

impl FrameBasis {
    pub fn new(index_set: IndexSetJ, plan: &HarmonicPlan) -> Self {
        let coeffs: Vec<SparseCoeffs> = index_set
            .members()
            .par_iter()
            .map(|idx| {
                let c = b_to_harmonics(*idx, plan).expect("index set only holds members of J");
                SparseCoeffs::from_dense(&c)
            })
            .collect();
        let residuals: Vec<f64> = coeffs.iter().map(|c| 1.0 - c.norm_sqr()).collect();
        let poor = residuals.iter().filter(|r| **r > TAIL_WARN_LEVEL).count();
        if poor > 0 {
            log::warn!(
                "{poor} of {} basis functions lose more than {TAIL_WARN_LEVEL} of their energy beyond degree {}",
                index_set.len(),
                plan.l_max()
            );
        }
        FrameBasis { index_set, l_max: plan.l_max(), coeffs, residuals }
    }

    pub fn build(n_max: u32, l_max: usize, grid: Arc<QuadratureGrid>) -> Result<Self> {
        let plan = HarmonicPlan::new(grid, l_max);
        Ok(Self::new(IndexSetJ::new(n_max)?, &plan))
    }

    pub fn index_set(&self) -> &IndexSetJ {
        &self.index_set
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn coeffs(&self) -> &[SparseCoeffs] {
        &self.coeffs
    }

    /// `1 - Σ|coeff|²` per member: energy of `b` lost beyond `l_max` (plus quadrature error).
    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    /// `⟨h, b_i⟩` for every member.
    pub fn inner_products(&self, h: &HarmonicCoeffs) -> Result<Vec<Complex64>> {
        if h.l_max() != self.l_max {
            return Err(Error::DimensionMismatch(format!(
                "coefficients of degree {} against a basis of degree {}",
                h.l_max(),
                self.l_max
            )));
        }
        Ok(self.coeffs.iter().map(|b| b.inner_with(h)).collect())
    }

    /// The analysis vector `⟨L g, b_i⟩`.
    pub fn analysis_coeffs(&self, g: &HarmonicCoeffs) -> Result<Vec<Complex64>> {
        if g.max_odd_degree() > 0.0 {
            log::warn!("analysis_coeffs: odd-degree part of the data is ignored");
        }
        self.inner_products(&apply_l(g))
    }

    /// `Σ_i x_i b_i` as harmonic coefficients.
    pub fn synthesize(&self, x: &[Complex64]) -> Result<HarmonicCoeffs> {
        if x.len() != self.coeffs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} basis functions",
                x.len(),
                self.coeffs.len()
            )));
        }
        let mut out = HarmonicCoeffs::zeros(self.l_max);
        let vals = out.values_mut();
        for (b, xi) in self.coeffs.iter().zip(x) {
            if *xi == ZERO {
                continue;
            }
            for &(i, v) in b.entries() {
                vals[i] += v * xi;
            }
        }
        Ok(out)
    }
}

/// Galerkin data of the frame: `C[j][i] = ⟨e_j, b_i⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTable {
    index_set: IndexSetJ,
    l_max: usize,
    c: DMatrix<Complex64>,
}

impl FrameTable {
    /// Assembles `C` from the harmonic expansions of the basis.
    pub fn assemble(basis: &FrameBasis) -> Self {
        let l_max = basis.l_max();
        let mult = rl_multiplier(l_max);
        let degree_of = |flat: usize| (flat as f64).sqrt() as usize;
        // flat index -> members holding a coefficient there, in member order
        let mut by_index: BTreeMap<usize, Vec<(usize, Complex64)>> = BTreeMap::new();
        for (i, b) in basis.coeffs().iter().enumerate() {
            for &(flat, v) in b.entries() {
                by_index.entry(flat).or_default().push((i, v));
            }
        }
        let n = basis.index_set().len();
        let rows: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut row = vec![ZERO; n];
                for &(flat, bj) in basis.coeffs()[j].entries() {
                    let e = bj * mult[degree_of(flat)];
                    for &(i, bi) in &by_index[&flat] {
                        row[i] += e * bi.conj();
                    }
                }
                row
            })
            .collect();
        let c = DMatrix::from_fn(n, n, |j, i| rows[j][i]);
        FrameTable { index_set: basis.index_set().clone(), l_max, c }
    }

    /// Table with an arbitrary `C`, e.g. to substitute an orthonormal system for testing.
    pub fn from_matrix(index_set: IndexSetJ, l_max: usize, c: DMatrix<Complex64>) -> Result<Self> {
        let n = index_set.len();
        if c.nrows() != n || c.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "C is {}x{}, index set has {n} members",
                c.nrows(),
                c.ncols()
            )));
        }
        if c.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Numerical("non-finite entry in C".into()));
        }
        Ok(FrameTable { index_set, l_max, c })
    }

    pub fn index_set(&self) -> &IndexSetJ {
        &self.index_set
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn c(&self) -> &DMatrix<Complex64> {
        &self.c
    }
}

/// Galerkin matrix of the frame operator: `M = Cᴴ C`.
pub fn s_matrix(table: &FrameTable) -> DMatrix<Complex64> {
    table.c.adjoint() * &table.c
}

/// Connected components of the nonzero pattern of a square matrix, each sorted, ordered by
/// their smallest member.
fn components(c: &DMatrix<Complex64>) -> Vec<Vec<usize>> {
    let n = c.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for j in 0..n {
        for i in 0..n {
            if c[(j, i)] != ZERO {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Dual frame expanded over the retained basis: row `j` of `D` holds the coefficients of `ẽ_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualFrameTable {
    index_set: IndexSetJ,
    l_max: usize,
    pinv_threshold: f64,
    c: DMatrix<Complex64>,
    d: DMatrix<Complex64>,
    rank: usize,
}

impl DualFrameTable {
    pub fn index_set(&self) -> &IndexSetJ {
        &self.index_set
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn pinv_threshold(&self) -> f64 {
        self.pinv_threshold
    }

    pub fn c(&self) -> &DMatrix<Complex64> {
        &self.c
    }

    pub fn d(&self) -> &DMatrix<Complex64> {
        &self.d
    }

    /// Number of singular values of `M` kept by the truncated pseudo-inverse.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn frame_table(&self) -> FrameTable {
        FrameTable { index_set: self.index_set.clone(), l_max: self.l_max, c: self.c.clone() }
    }
}

/// Computes the dual coefficients `D = C pinv_τ(M)`, discarding singular values of `M`
/// below `τ·σ_max`. Row `j` expands `ẽ_j = S⁻¹ e_j` over the basis; for Hermitian `C` this
/// coincides with `pinv_τ(M) Cᴴ`.
///
/// `M` is block diagonal whenever `C` is (the product-grid case, blocks by `n`), so the
/// truncated SVD runs per connected block against the global `σ_max`.
pub fn dual_frame(table: &FrameTable, threshold: f64) -> Result<DualFrameTable> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!("pinv threshold must lie in (0, 1), got {threshold}")));
    }
    let n = table.c.nrows();
    let comps = components(&table.c);
    // C[idx, idx] holds every nonzero of its rows and columns, so M restricted to a block
    // is the Gram product of that block alone
    let blocks: Vec<DMatrix<Complex64>> = comps
        .iter()
        .map(|idx| DMatrix::from_fn(idx.len(), idx.len(), |a, b| table.c[(idx[a], idx[b])]))
        .collect();
    let svds: Vec<_> = blocks.par_iter().map(|cb| (cb.adjoint() * cb).svd(true, true)).collect();
    let sigma_max = svds.iter().flat_map(|s| s.singular_values.iter().copied()).fold(0.0, f64::max);
    if sigma_max <= f64::MIN_POSITIVE || !sigma_max.is_finite() {
        return Err(Error::Numerical("frame-operator matrix is numerically zero".into()));
    }
    let cut = threshold * sigma_max;
    let mut d = DMatrix::from_element(n, n, ZERO);
    let mut rank = 0;
    for ((idx, svd), cb) in comps.iter().zip(&svds).zip(blocks) {
        let k = idx.len();
        let u = svd.u.as_ref().expect("svd computed with U");
        let vt = svd.v_t.as_ref().expect("svd computed with Vᵀ");
        let mut pinv = DMatrix::from_element(k, k, ZERO);
        for (s, &sv) in svd.singular_values.iter().enumerate() {
            if sv < cut {
                continue;
            }
            rank += 1;
            let inv = 1.0 / sv;
            for a in 0..k {
                let va = vt[(s, a)].conj() * inv;
                for b in 0..k {
                    pinv[(a, b)] += va * u[(b, s)].conj();
                }
            }
        }
        let block = cb * pinv;
        for a in 0..k {
            for b in 0..k {
                d[(idx[a], idx[b])] = block[(a, b)];
            }
        }
    }
    Ok(DualFrameTable {
        index_set: table.index_set.clone(),
        l_max: table.l_max,
        pinv_threshold: threshold,
        c: table.c.clone(),
        d,
        rank,
    })
}

/// Result of an inversion together with the quantities of the norm audit.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub coeffs: HarmonicCoeffs,
    /// `‖L g‖` (or `‖L U_α g‖` when filtered).
    pub lg_norm: f64,
    /// `‖R‡ g‖ / ‖L g‖`; zero when the data vanish.
    pub norm_ratio: f64,
}

/// Upper constant in `‖R‡ g‖ ≤ 2 ‖L g‖`.
pub const NORM_BOUND: f64 = 2.0;

/// Inversion `f = Σ_j ⟨L g, b_j⟩ ẽ_j`, with `L g` replaced by `L U_α g` when filtered.
pub fn reconstruct(
    g: &HarmonicCoeffs,
    basis: &FrameBasis,
    dual: &DualFrameTable,
    filter: Option<&FilterSpec>,
) -> Result<Reconstruction> {
    if basis.index_set() != dual.index_set() || basis.l_max() != dual.l_max() {
        return Err(Error::DimensionMismatch(format!(
            "basis (N={}, l_max={}) does not match dual table (N={}, l_max={})",
            basis.index_set().n_max(),
            basis.l_max(),
            dual.index_set().n_max(),
            dual.l_max()
        )));
    }
    if g.l_max() != dual.l_max() {
        return Err(Error::DimensionMismatch(format!(
            "data of degree {} against a table of degree {}",
            g.l_max(),
            dual.l_max()
        )));
    }
    let even = crate::harmonics::even_projection(g);
    let lg = match filter {
        Some(spec) => apply_filtered(&even, spec)?,
        None => apply_l(&even),
    };
    let a = basis.inner_products(&lg)?;
    let n = a.len();
    let d = dual.d();
    let x: Vec<Complex64> = (0..n).map(|i| (0..n).map(|j| a[j] * d[(j, i)]).sum()).collect();
    let coeffs = crate::harmonics::even_projection(&basis.synthesize(&x)?);
    let lg_norm = lg.norm();
    let norm_ratio = if lg_norm > 0.0 { coeffs.norm() / lg_norm } else { 0.0 };
    Ok(Reconstruction { coeffs, lg_norm, norm_ratio })
}

/// Frame bounds: `c₁ = √(1/2)`, `c₂ = √(2/π)` for `R`, `C₁ = C₂ = 1` for the orthonormal
/// basis, hence `B₁ = c₁² C₁` and `B₂ = c₂² C₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityConstants {
    pub c1: f64,
    pub c2: f64,
    pub big_c1: f64,
    pub big_c2: f64,
    pub b1: f64,
    pub b2: f64,
}

impl StabilityConstants {
    pub fn funk_radon() -> Self {
        let c1 = 0.5f64.sqrt();
        let c2 = (2.0 / PI).sqrt();
        StabilityConstants { c1, c2, big_c1: 1.0, big_c2: 1.0, b1: c1 * c1, b2: c2 * c2 }
    }
}

/// Binary layout of a persisted dual-frame table (all little-endian):
/// `"FRFD"`, version `u32`, `N u32`, `l_max u32`, member count `u32`, members as
/// `(n i32, k u32)`, threshold `f64`, `C` then `D` row-major as `(re f64, im f64)`, and a
/// trailing CRC32 of everything before it.
pub mod table_file {
    use super::*;

    pub const MAGIC: &[u8; 4] = b"FRFD";
    pub const VERSION: u32 = 1;

    pub fn encode(table: &DualFrameTable) -> Vec<u8> {
        let n = table.index_set.len();
        let mut buf = Vec::with_capacity(32 + 8 * n + 32 * n * n);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&table.index_set.n_max().to_le_bytes());
        buf.extend_from_slice(&(table.l_max as u32).to_le_bytes());
        buf.extend_from_slice(&(n as u32).to_le_bytes());
        for m in table.index_set.members() {
            buf.extend_from_slice(&m.n.to_le_bytes());
            buf.extend_from_slice(&m.k.to_le_bytes());
        }
        buf.extend_from_slice(&table.pinv_threshold.to_le_bytes());
        for mat in [&table.c, &table.d] {
            for r in 0..n {
                for c in 0..n {
                    let v = mat[(r, c)];
                    buf.extend_from_slice(&v.re.to_le_bytes());
                    buf.extend_from_slice(&v.im.to_le_bytes());
                }
            }
        }
        let crc = crc32fast::hash(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        buf
    }

    struct Reader<'a> {
        buf: &'a [u8],
        pos: usize,
    }

    impl Reader<'_> {
        fn take<const K: usize>(&mut self) -> Result<[u8; K]> {
            let end = self.pos + K;
            if end > self.buf.len() {
                return Err(Error::format("table file is truncated"));
            }
            let mut out = [0u8; K];
            out.copy_from_slice(&self.buf[self.pos..end]);
            self.pos = end;
            Ok(out)
        }
        fn u32(&mut self) -> Result<u32> {
            Ok(u32::from_le_bytes(self.take()?))
        }
        fn i32(&mut self) -> Result<i32> {
            Ok(i32::from_le_bytes(self.take()?))
        }
        fn f64(&mut self) -> Result<f64> {
            Ok(f64::from_le_bytes(self.take()?))
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<DualFrameTable> {
        if bytes.len() < 28 {
            return Err(Error::format("table file is truncated"));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::format("not a dual-frame table (bad magic)"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        if crc32fast::hash(body) != stored {
            return Err(Error::format("table checksum mismatch"));
        }
        let mut r = Reader { buf: body, pos: 4 };
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::format(format!("unsupported table version {version}")));
        }
        let n_max = r.u32()?;
        let l_max = r.u32()? as usize;
        let count = r.u32()? as usize;
        let expected = 4 + 4 * 4 + 8 * count + 8 + 2 * 16 * count * count;
        if body.len() != expected {
            return Err(Error::format(format!(
                "table body has {} bytes, layout needs {expected}",
                body.len()
            )));
        }
        let mut members = Vec::with_capacity(count);
        for _ in 0..count {
            let n = r.i32()?;
            let k = r.u32()?;
            members.push(FrameIndex::new(n, k)?);
        }
        let index_set = IndexSetJ::from_members(n_max, members)?;
        let threshold = r.f64()?;
        let read_matrix = |r: &mut Reader| -> Result<DMatrix<Complex64>> {
            let mut vals = Vec::with_capacity(count * count);
            for _ in 0..count * count {
                let re = r.f64()?;
                let im = r.f64()?;
                vals.push(Complex64::new(re, im));
            }
            Ok(DMatrix::from_row_slice(count, count, &vals))
        };
        let c = read_matrix(&mut r)?;
        let d = read_matrix(&mut r)?;
        // rank is not persisted; recover it from the table it describes
        let rank = dual_frame(&FrameTable { index_set: index_set.clone(), l_max, c: c.clone() }, threshold)
            .map(|t| t.rank)
            .unwrap_or(0);
        Ok(DualFrameTable { index_set, l_max, pinv_threshold: threshold, c, d, rank })
    }

    pub fn save(table: &DualFrameTable, path: &Path) -> Result<u32> {
        let bytes = encode(table);
        let crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        fs::write(path, bytes)?;
        Ok(crc)
    }

    pub fn load(path: &Path) -> Result<DualFrameTable> {
        decode(&fs::read(path)?)
    }

    /// Trailing checksum of an encoded table, used as its provenance hash.
    pub fn checksum(bytes: &[u8]) -> Option<u32> {
        (bytes.len() >= 4).then(|| u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap()))
    }
}
