//! Reduced-size invariant checks runnable from the command line.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cli::commands::run_experiment;
use crate::cli::config::{ExperimentConfig, GridSpec};
use crate::frame::{
    basis_b, dual_frame, reconstruct, s_matrix, table_file, FrameBasis, FrameIndex, FrameTable, IndexSetJ,
    NORM_BOUND,
};
use crate::geometry::{cart_to_sph, product_grid};
use crate::harmonics::{eval_ylm, HarmonicCoeffs, HarmonicPlan, NodeFunction};
use crate::phantom::{add_noise, NoiseSpec, Phantom};
use crate::radon::{fr_direct, legendre_p0, LegendreZeroTable};
use crate::sobolev::{apply_filtered, apply_l, FilterSpec};

type Check = fn() -> Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s(e: crate::Error) -> String {
    e.to_string()
}

fn grid_weights() -> Result<(), String> {
    let g = product_grid(12, 24).map_err(e2s)?;
    let s = g.total_weight();
    ensure((s - 4.0 * PI).abs() < 1e-12, || format!("weights sum to {s}"))
}

fn harmonic_orthonormality() -> Result<(), String> {
    let plan = HarmonicPlan::new(Arc::new(product_grid(12, 24).map_err(e2s)?), 10);
    let mut worst: f64 = 0.0;
    for l in 0..=10usize {
        for m in -(l as i64)..=l as i64 {
            let samples = plan.synthesis(&HarmonicCoeffs::unit(10, l, m)).map_err(e2s)?;
            let c = plan.analysis(&samples).map_err(e2s)?;
            worst = worst.max(c.sub(&HarmonicCoeffs::unit(10, l, m)).map_err(e2s)?.norm());
        }
    }
    ensure(worst < 1e-12, || format!("roundtrip deviation {worst:e}"))
}

fn radon_eigenvalues() -> Result<(), String> {
    let grid = Arc::new(product_grid(8, 16).map_err(e2s)?);
    let mut worst: f64 = 0.0;
    for l in 0..=10i64 {
        for m in -l..=l {
            let f = move |p: &crate::geometry::Point3| {
                eval_ylm(l, m, cart_to_sph(p.normalized()).expect("unit point")).expect("valid index")
            };
            let r = fr_direct(&f, grid.clone(), 256).map_err(e2s)?;
            let p0 = if l % 2 == 0 { legendre_p0(l).map_err(e2s)? } else { 0.0 };
            for (i, c) in grid.coords().iter().enumerate() {
                let expect = eval_ylm(l, m, *c).map_err(e2s)? * p0;
                worst = worst.max((r.samples()[i] - expect).norm());
            }
        }
    }
    ensure(worst < 1e-10, || format!("max deviation {worst:e}"))
}

fn stability_window() -> Result<(), String> {
    let t = LegendreZeroTable::new(400);
    let mut prev = 0.0;
    for l in (0..=400).step_by(2) {
        let v = (l as f64 + 0.5) * t.get(l) * t.get(l);
        if !(0.5 - 1e-15..=2.0 / PI).contains(&v) || v < prev {
            return Err(format!("degree {l}: {v}"));
        }
        prev = v;
    }
    Ok(())
}

fn filter_limits() -> Result<(), String> {
    let mut c = HarmonicCoeffs::zeros(12);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for v in c.values_mut() {
        *v = Complex64::new(rng.random_range(-1.0..1.0), 0.0);
    }
    let t0 = apply_filtered(&c, &FilterSpec::Tikhonov { alpha: 0.0 }).map_err(e2s)?;
    let d = t0.max_abs_diff(&apply_l(&c));
    ensure(d < 1e-12, || format!("alpha = 0 differs from L by {d:e}"))?;
    let ex = apply_filtered(&c, &FilterSpec::ExactInverse).map_err(e2s)?;
    ensure(ex == c, || "exact inverse filter is not the identity".into())
}

fn basis_orthonormality() -> Result<(), String> {
    let grid = product_grid(400, 16).map_err(e2s)?;
    let members: Vec<FrameIndex> = (1..=3).flat_map(|k| (-3..=3).map(move |n| FrameIndex { n, k })).collect();
    let samples: Vec<Vec<Complex64>> =
        members.iter().map(|idx| grid.coords().iter().map(|c| basis_b(*idx, *c)).collect()).collect();
    let mut worst: f64 = 0.0;
    for (a, sa) in samples.iter().enumerate() {
        for (b, sb) in samples.iter().enumerate() {
            let s: Complex64 =
                sa.iter().zip(sb).zip(grid.weights()).map(|((x, y), w)| x * y.conj() * w).sum();
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((s - target).norm());
        }
    }
    ensure(worst < 1e-6, || format!("Gram deviation {worst:e}"))
}

fn small_basis(n: u32) -> Result<FrameBasis, String> {
    FrameBasis::build(n, 20, Arc::new(product_grid(21, 42).map_err(e2s)?)).map_err(e2s)
}

fn frame_upper_bound() -> Result<(), String> {
    let table = FrameTable::assemble(&small_basis(5)?);
    let top = s_matrix(&table).symmetric_eigenvalues().max();
    ensure(top <= 2.0 / PI + 0.05, || format!("largest eigenvalue {top}"))
}

fn orthonormal_dual() -> Result<(), String> {
    let set = IndexSetJ::new(3).map_err(e2s)?;
    let n = set.len();
    let table = FrameTable::from_matrix(set, 4, nalgebra::DMatrix::identity(n, n)).map_err(e2s)?;
    let dual = dual_frame(&table, 1e-6).map_err(e2s)?;
    let d = (dual.d() - nalgebra::DMatrix::<Complex64>::identity(n, n))
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    ensure(d < 1e-14, || format!("dual deviates from identity by {d:e}"))
}

fn retained_span_roundtrip() -> Result<(), String> {
    let basis = small_basis(6)?;
    let table = FrameTable::assemble(&basis);
    let dual = dual_frame(&table, 1e-3).map_err(e2s)?;
    let eig = s_matrix(&table).symmetric_eigen();
    let top = eig.eigenvalues.imax();
    let x: Vec<Complex64> = eig.eigenvectors.column(top).iter().map(|v| v.conj()).collect();
    let f = basis.synthesize(&x).map_err(e2s)?;
    let rec = reconstruct(&crate::radon::fr_spectral(&f), &basis, &dual, None).map_err(e2s)?;
    let rel = rec.coeffs.sub(&f).map_err(e2s)?.norm() / f.norm();
    ensure(rel < 1e-6 && rec.norm_ratio <= NORM_BOUND, || {
        format!("relative error {rel:e}, norm ratio {}", rec.norm_ratio)
    })
}

fn noise_scaling() -> Result<(), String> {
    let grid = Arc::new(product_grid(10, 20).map_err(e2s)?);
    let g = Phantom::default_tetrahedral().sample(grid.clone());
    let noisy = add_noise(&g, NoiseSpec { level: 0.2, seed: 3 }).map_err(e2s)?;
    let diff: Vec<Complex64> = noisy.samples().iter().zip(g.samples()).map(|(a, b)| a - b).collect();
    let rel = NodeFunction::new(grid, diff).map_err(e2s)?.l2_norm() / g.l2_norm();
    ensure((rel - 0.2).abs() < 1e-12, || format!("achieved level {rel}"))
}

fn phantom_evenness() -> Result<(), String> {
    let ph = Phantom::default_tetrahedral();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let p = crate::geometry::Point3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
        .normalized();
        if ph.eval(&p) != ph.eval(&-p) {
            return Err(format!("odd value at {p:?}"));
        }
    }
    Ok(())
}

fn table_roundtrip() -> Result<(), String> {
    let dual = dual_frame(&FrameTable::assemble(&small_basis(3)?), 1e-3).map_err(e2s)?;
    let dir = tempfile_dir()?;
    let path = dir.join("roundtrip.frfd");
    table_file::save(&dual, &path).map_err(e2s)?;
    let back = table_file::load(&path).map_err(e2s)?;
    let _ = std::fs::remove_dir_all(&dir);
    ensure(back == dual, || "reloaded table differs".into())
}

fn corrupted_table_rejected() -> Result<(), String> {
    let dual = dual_frame(&FrameTable::assemble(&small_basis(2)?), 1e-3).map_err(e2s)?;
    let dir = tempfile_dir()?;
    let path = dir.join("corrupt.frfd");
    let mut bytes = table_file::encode(&dual);
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    std::fs::write(&path, bytes).map_err(|e| e.to_string())?;
    let res = table_file::load(&path);
    let _ = std::fs::remove_dir_all(&dir);
    ensure(res.is_err(), || "corrupted table loaded without error".into())
}

fn small_pipeline() -> Result<(), String> {
    let cfg = ExperimentConfig {
        n: 8,
        l_max: 20,
        grid: GridSpec::Product { n_theta: 21, n_lambda: 42 },
        m_circle: 128,
        alphas: vec![0.0, 0.05],
        ..ExperimentConfig::default()
    };
    let (report, _) = run_experiment(&cfg).map_err(e2s)?;
    ensure(report.norm_bound_ok && report.data.evenness_ok, || {
        format!("norm bound ok: {}, evenness ok: {}", report.norm_bound_ok, report.data.evenness_ok)
    })?;
    ensure(report.best_error < 0.5, || format!("relative error {}", report.best_error))
}

fn tempfile_dir() -> Result<std::path::PathBuf, String> {
    static COUNTER: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);
    let seq = COUNTER.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    let dir = std::env::temp_dir().join(format!("funkframe-selftest-{}-{seq}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    Ok(dir)
}

/// Every registered check, by name.
pub const CHECKS: &[(&str, Check)] = &[
    ("grid_weights", grid_weights),
    ("harmonic_orthonormality", harmonic_orthonormality),
    ("radon_eigenvalues", radon_eigenvalues),
    ("stability_window", stability_window),
    ("filter_limits", filter_limits),
    ("basis_orthonormality", basis_orthonormality),
    ("frame_upper_bound", frame_upper_bound),
    ("orthonormal_dual", orthonormal_dual),
    ("retained_span_roundtrip", retained_span_roundtrip),
    ("noise_scaling", noise_scaling),
    ("phantom_evenness", phantom_evenness),
    ("table_roundtrip", table_roundtrip),
    ("corrupted_table_rejected", corrupted_table_rejected),
    ("small_pipeline", small_pipeline),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestSummary {
    pub total: usize,
    pub passed: usize,
    pub failures: Vec<(String, String)>,
}

/// Runs `checks`, printing one line per check.
pub fn run_checks(checks: &[(&str, Check)]) -> SelftestSummary {
    let mut failures = Vec::new();
    for (name, check) in checks {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(()) => println!("PASS {name}"),
            Err(msg) => {
                println!("FAIL {name}: {msg}");
                failures.push((name.to_string(), msg));
            }
        }
    }
    let summary = SelftestSummary { total: checks.len(), passed: checks.len() - failures.len(), failures };
    println!("selftest: {}/{} passed", summary.passed, summary.total);
    summary
}

pub fn cmd_selftest() -> SelftestSummary {
    run_checks(CHECKS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failing_check_is_reported() {
        fn bad() -> Result<(), String> {
            Err("broken".into())
        }
        fn boom() -> Result<(), String> {
            panic!("boom")
        }
        let s = run_checks(&[("ok", grid_weights), ("bad", bad), ("boom", boom)]);
        assert_eq!((s.total, s.passed), (3, 1));
        assert_eq!(s.failures[0], ("bad".to_string(), "broken".to_string()));
        assert_eq!(s.failures[1].0, "boom");
    }
}
