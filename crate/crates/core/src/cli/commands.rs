//! The pipeline behind each subcommand.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;

use crate::cli::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::frame::{
    dual_frame, reconstruct, table_file, DualFrameTable, FrameBasis, FrameTable, IndexSetJ, NORM_BOUND,
    TAIL_WARN_LEVEL,
};
use crate::geometry::QuadratureGrid;
use crate::harmonics::{write_coeffs_csv, HarmonicCoeffs, HarmonicPlan, NodeFunction};
use crate::phantom::{add_noise, forward_data, relative_error, NoiseSpec};
use crate::sobolev::FilterSpec;

pub const DATA_CSV_HEADER: &str = "lambda,theta,weight,value_re,value_im";

/// Basis expansions and dual table for one configuration.
pub struct FrameSetup {
    pub basis: FrameBasis,
    pub dual: DualFrameTable,
    pub crc32: u32,
}

/// Builds the basis on the configured grid and either loads the dual table named in the
/// config (checking it was built for the same setup) or computes it.
pub fn setup_frame(cfg: &ExperimentConfig, plan: &HarmonicPlan) -> Result<FrameSetup> {
    let basis = FrameBasis::new(IndexSetJ::new(cfg.n)?, plan);
    let dual = match &cfg.table {
        Some(path) => {
            let dual = table_file::load(path)?;
            check_table(&dual, &basis, cfg)?;
            dual
        }
        None => dual_frame(&FrameTable::assemble(&basis), cfg.pinv_threshold)?,
    };
    let crc32 = table_file::checksum(&table_file::encode(&dual)).expect("encoded table is nonempty");
    Ok(FrameSetup { basis, dual, crc32 })
}

fn check_table(dual: &DualFrameTable, basis: &FrameBasis, cfg: &ExperimentConfig) -> Result<()> {
    if dual.index_set().n_max() != cfg.n || dual.l_max() != cfg.l_max {
        return Err(Error::invalid(format!(
            "table holds N={}, l_max={} but the config asks for N={}, l_max={}",
            dual.index_set().n_max(),
            dual.l_max(),
            cfg.n,
            cfg.l_max
        )));
    }
    if dual.pinv_threshold() != cfg.pinv_threshold {
        return Err(Error::invalid(format!(
            "table was built with pinv threshold {} but the config asks for {}",
            dual.pinv_threshold(),
            cfg.pinv_threshold
        )));
    }
    let fresh = FrameTable::assemble(basis);
    let gap = (fresh.c() - dual.c()).iter().map(|v| v.norm()).fold(0.0, f64::max);
    if gap > 1e-12 {
        return Err(Error::invalid(format!(
            "table does not match the configured grid (frame matrices differ by {gap:.3e})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberResidual {
    pub n: i32,
    pub k: u32,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationSummary {
    pub max_residual: f64,
    pub mean_residual: f64,
    pub poorly_resolved: usize,
    pub members: Vec<MemberResidual>,
}

impl TruncationSummary {
    pub fn of(basis: &FrameBasis) -> Self {
        let r = basis.residuals();
        TruncationSummary {
            max_residual: r.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean_residual: r.iter().sum::<f64>() / r.len() as f64,
            poorly_resolved: r.iter().filter(|v| **v > TAIL_WARN_LEVEL).count(),
            members: basis
                .index_set()
                .members()
                .iter()
                .zip(r)
                .map(|(m, &residual)| MemberResidual { n: m.n, k: m.k, residual })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataSummary {
    pub nodes: usize,
    pub data_norm: f64,
    pub noise_level: f64,
    pub seed: u64,
    /// Antipodal symmetry of the noise-free data; absent on grids without antipodal pairs.
    pub max_antipodal_gap: Option<f64>,
    pub evenness_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    /// Tikhonov parameter; `None` for the unfiltered inversion.
    pub alpha: Option<f64>,
    pub relative_error: f64,
    pub norm_ratio: f64,
    pub norm_bound_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub grid: String,
    pub frame_members: usize,
    pub retained_rank: usize,
    pub table_crc32: String,
    pub data: DataSummary,
    pub runs: Vec<RunRecord>,
    pub best_index: usize,
    pub best_alpha: Option<f64>,
    pub best_error: f64,
    pub norm_bound_ok: bool,
    pub truncation: TruncationSummary,
}

/// Wall-clock seconds per stage, kept out of the report so that it stays reproducible.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub frame_setup: f64,
    pub forward: f64,
    pub reconstruction: f64,
    pub total: f64,
}

/// Largest `|g(ξ) - g(-ξ)|` over the grid, if the grid pairs antipodal nodes.
pub fn antipodal_gap(g: &NodeFunction) -> Option<f64> {
    let grid = g.grid();
    let mut gap: f64 = 0.0;
    for i in 0..grid.len() {
        let j = grid.antipode_index(i)?;
        gap = gap.max((g.samples()[i] - g.samples()[j]).norm());
    }
    Some(gap)
}

/// Index of the smallest error; the first one wins ties.
pub fn argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if best.is_none_or(|b| *v < values[b]) {
            best = Some(i);
        }
    }
    best
}

fn filters(cfg: &ExperimentConfig) -> Vec<Option<FilterSpec>> {
    if cfg.alphas.is_empty() {
        vec![None]
    } else {
        cfg.alphas.iter().map(|&alpha| Some(FilterSpec::Tikhonov { alpha })).collect()
    }
}

/// forward → noise → reconstruct for every configured filter.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(ExperimentReport, Timings)> {
    cfg.validate()?;
    let start = Instant::now();
    let grid = cfg.grid.build()?;
    let plan = HarmonicPlan::new(grid.clone(), cfg.l_max);
    let setup = setup_frame(cfg, &plan)?;
    let t_setup = start.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let phantom = cfg.load_phantom()?;
    let truth = phantom.sample(grid.clone());
    let clean = forward_data(&phantom, grid.clone(), cfg.m_circle)?;
    let gap = antipodal_gap(&clean);
    let data = add_noise(&clean, NoiseSpec { level: cfg.noise_level, seed: cfg.seed })?;
    let g = plan.analysis(data.samples())?;
    let t_forward = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let mut runs = Vec::new();
    for filter in filters(cfg) {
        let rec = reconstruct(&g, &setup.basis, &setup.dual, filter.as_ref())?;
        let samples = NodeFunction::new(grid.clone(), plan.synthesis(&rec.coeffs)?)?;
        let err = relative_error(&truth, &samples)?;
        if rec.norm_ratio > NORM_BOUND {
            log::error!("norm bound violated: ratio {} > {NORM_BOUND}", rec.norm_ratio);
        }
        runs.push(RunRecord {
            alpha: filter.map(|f| match f {
                FilterSpec::Tikhonov { alpha } => alpha,
                FilterSpec::ExactInverse => 0.0,
            }),
            relative_error: err,
            norm_ratio: rec.norm_ratio,
            norm_bound_ok: rec.norm_ratio <= NORM_BOUND,
        });
    }
    let t_rec = t0.elapsed().as_secs_f64();

    let errors: Vec<f64> = runs.iter().map(|r| r.relative_error).collect();
    let best_index = argmin(&errors).expect("at least one run");
    let report = ExperimentReport {
        config: cfg.clone(),
        grid: grid.describe(),
        frame_members: setup.basis.index_set().len(),
        retained_rank: setup.dual.rank(),
        table_crc32: format!("{:08x}", setup.crc32),
        data: DataSummary {
            nodes: grid.len(),
            data_norm: clean.l2_norm(),
            noise_level: cfg.noise_level,
            seed: cfg.seed,
            max_antipodal_gap: gap,
            evenness_ok: gap.is_none_or(|g| g <= 1e-12),
        },
        best_alpha: runs[best_index].alpha,
        best_error: runs[best_index].relative_error,
        best_index,
        norm_bound_ok: runs.iter().all(|r| r.norm_bound_ok),
        runs,
        truncation: TruncationSummary::of(&setup.basis),
    };
    let timings = Timings {
        frame_setup: t_setup,
        forward: t_forward,
        reconstruction: t_rec,
        total: start.elapsed().as_secs_f64(),
    };
    Ok((report, timings))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::format(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Runs the experiment and writes `report.json` and `timings.json` to the output directory.
pub fn cmd_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (report, timings) = run_experiment(cfg)?;
    ensure_dir(&cfg.output_dir)?;
    write_json(&report, &cfg.output_dir.join("report.json"))?;
    write_json(&timings, &cfg.output_dir.join("timings.json"))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecomputeSummary {
    pub table: PathBuf,
    pub n: u32,
    pub l_max: usize,
    pub grid: String,
    pub pinv_threshold: f64,
    pub frame_members: usize,
    pub retained_rank: usize,
    pub table_crc32: String,
    pub truncation: TruncationSummary,
}

pub fn default_table_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join(format!("table_N{}_L{}.frfd", cfg.n, cfg.l_max))
}

/// Assembles and persists the dual table, with a JSON sidecar of truncation residuals.
pub fn cmd_precompute(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<PrecomputeSummary> {
    cfg.validate()?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| default_table_path(cfg));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    let grid = cfg.grid.build()?;
    let plan = HarmonicPlan::new(grid.clone(), cfg.l_max);
    let basis = FrameBasis::new(IndexSetJ::new(cfg.n)?, &plan);
    let dual = dual_frame(&FrameTable::assemble(&basis), cfg.pinv_threshold)?;
    let crc = table_file::save(&dual, &path)?;
    let summary = PrecomputeSummary {
        table: path.clone(),
        n: cfg.n,
        l_max: cfg.l_max,
        grid: grid.describe(),
        pinv_threshold: cfg.pinv_threshold,
        frame_members: basis.index_set().len(),
        retained_rank: dual.rank(),
        table_crc32: format!("{crc:08x}"),
        truncation: TruncationSummary::of(&basis),
    };
    write_json(&summary, &sidecar(&path, "json"))?;
    Ok(summary)
}

fn sidecar(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn write_node_csv(f: &NodeFunction, path: &Path) -> Result<()> {
    let grid = f.grid();
    let mut out = String::with_capacity(64 * grid.len());
    out.push_str(DATA_CSV_HEADER);
    out.push('\n');
    for ((c, w), v) in grid.coords().iter().zip(grid.weights()).zip(f.samples()) {
        writeln!(out, "{},{},{},{},{}", c.lambda, c.theta, w, v.re, v.im).expect("write to string");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads node samples written by [`write_node_csv`], checking them against `grid`.
pub fn read_node_csv(path: &Path, grid: Arc<QuadratureGrid>) -> Result<NodeFunction> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(DATA_CSV_HEADER) {
        return Err(Error::format(format!("{}: expected header {DATA_CSV_HEADER}", path.display())));
    }
    let mut samples = Vec::with_capacity(grid.len());
    for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format(format!("{} row {}: {e}", path.display(), i + 2)))?;
        if vals.len() != 5 {
            return Err(Error::format(format!("{} row {}: expected 5 fields", path.display(), i + 2)));
        }
        let c = grid.coords().get(i).ok_or_else(|| {
            Error::invalid(format!(
                "{} has more rows than the grid has nodes ({})",
                path.display(),
                grid.len()
            ))
        })?;
        if (c.lambda - vals[0]).abs() > 1e-9 || (c.theta - vals[1]).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "{} row {} does not match node {i} of the configured grid",
                path.display(),
                i + 2
            )));
        }
        samples.push(Complex64::new(vals[3], vals[4]));
    }
    if samples.len() != grid.len() {
        return Err(Error::invalid(format!(
            "{} has {} rows, the grid has {} nodes",
            path.display(),
            samples.len(),
            grid.len()
        )));
    }
    NodeFunction::new(grid, samples)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForwardReport {
    pub config: ExperimentConfig,
    pub grid: String,
    pub data: DataSummary,
}

/// Writes forward data (with configured noise) as CSV plus a JSON report.
pub fn cmd_forward(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ForwardReport> {
    cfg.validate()?;
    let path = out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.join("data.csv"));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        ensure_dir(dir)?;
    }
    let grid = cfg.grid.build()?;
    let phantom = cfg.load_phantom()?;
    let clean = forward_data(&phantom, grid.clone(), cfg.m_circle)?;
    let gap = antipodal_gap(&clean);
    let data = if cfg.noise_level > 0.0 {
        add_noise(&clean, NoiseSpec { level: cfg.noise_level, seed: cfg.seed })?
    } else {
        clean.clone()
    };
    write_node_csv(&data, &path)?;
    let report = ForwardReport {
        config: cfg.clone(),
        grid: grid.describe(),
        data: DataSummary {
            nodes: grid.len(),
            data_norm: clean.l2_norm(),
            noise_level: cfg.noise_level,
            seed: cfg.seed,
            max_antipodal_gap: gap,
            evenness_ok: gap.is_none_or(|g| g <= 1e-12),
        },
    };
    write_json(&report, &sidecar(&path, "json"))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructReport {
    pub config: ExperimentConfig,
    pub data: PathBuf,
    pub alpha: Option<f64>,
    pub relative_error: f64,
    pub norm_ratio: f64,
    pub norm_bound_ok: bool,
    pub table_crc32: String,
}

/// Inverts data read from CSV; writes samples, coefficients and a JSON report.
pub fn cmd_reconstruct(cfg: &ExperimentConfig, data: &Path, alpha: Option<f64>) -> Result<ReconstructReport> {
    cfg.validate()?;
    let filter = alpha.map(FilterSpec::tikhonov).transpose()?;
    let grid = cfg.grid.build()?;
    let g_nodes = read_node_csv(data, grid.clone())?;
    let plan = HarmonicPlan::new(grid.clone(), cfg.l_max);
    let setup = setup_frame(cfg, &plan)?;
    let g: HarmonicCoeffs = plan.analysis(g_nodes.samples())?;
    let rec = reconstruct(&g, &setup.basis, &setup.dual, filter.as_ref())?;
    let samples = NodeFunction::new(grid.clone(), plan.synthesis(&rec.coeffs)?)?;
    let truth = cfg.load_phantom()?.sample(grid.clone());
    let relative_error = relative_error(&truth, &samples)?;

    ensure_dir(&cfg.output_dir)?;
    write_node_csv(&samples, &cfg.output_dir.join("reconstruction.csv"))?;
    write_coeffs_csv(&rec.coeffs, &cfg.output_dir.join("reconstruction_coeffs.csv"))?;
    let report = ReconstructReport {
        config: cfg.clone(),
        data: data.to_path_buf(),
        alpha,
        relative_error,
        norm_ratio: rec.norm_ratio,
        norm_bound_ok: rec.norm_ratio <= NORM_BOUND,
        table_crc32: format!("{:08x}", setup.crc32),
    };
    write_json(&report, &cfg.output_dir.join("reconstruct_report.json"))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmin_takes_first_tie() {
        assert_eq!(argmin(&[3.0, 1.0, 1.0, 2.0]), Some(1));
        assert_eq!(argmin(&[]), None);
        assert_eq!(argmin(&[0.5]), Some(0));
    }
}
