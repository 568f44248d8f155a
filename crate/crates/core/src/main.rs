use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use funkframe::cli::{self, config, GridSpec, Overrides};
use funkframe::harmonics::read_coeffs_csv;
use funkframe::{Error, Result};

#[derive(Parser)]
#[command(name = "funkframe", version, about = "Funk–Radon inversion via frame decomposition")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// TOML config file; flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Frame size N.
    #[arg(long, global = true)]
    n: Option<u32>,
    #[arg(long, global = true)]
    l_max: Option<usize>,
    /// product:<n_theta>x<n_lambda> or design:<path>.
    #[arg(long, global = true)]
    grid: Option<GridSpec>,
    #[arg(long, global = true)]
    m_circle: Option<usize>,
    /// "default" or a phantom file.
    #[arg(long, global = true)]
    phantom: Option<String>,
    #[arg(long, global = true)]
    noise_level: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated Tikhonov parameters; "none" runs the unfiltered inversion only.
    #[arg(long, global = true, value_parser = parse_alphas)]
    alphas: Option<Alphas>,
    #[arg(long, global = true)]
    pinv_threshold: Option<f64>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Precomputed dual-frame table.
    #[arg(long, global = true)]
    table: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble and store the dual-frame table.
    Precompute {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate data of the phantom as CSV.
    Forward {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Invert a data file.
    Reconstruct {
        #[arg(long)]
        data: PathBuf,
        /// Tikhonov parameter; unfiltered when omitted.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Forward, noise and reconstruction for every configured alpha.
    Experiment,
    /// Run the built-in invariant checks.
    Selftest,
    /// Render a coefficient file as a 16-bit PGM.
    Export {
        #[arg(long)]
        coeffs: PathBuf,
        #[arg(long, default_value_t = 720)]
        width: usize,
        #[arg(long, default_value_t = 360)]
        height: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Debug)]
struct Alphas(Vec<f64>);

fn parse_alphas(s: &str) -> std::result::Result<Alphas, String> {
    let s = s.trim();
    if s.is_empty() || s == "none" {
        return Ok(Alphas(Vec::new()));
    }
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<std::result::Result<_, _>>()
        .map(Alphas)
}

impl GlobalArgs {
    fn resolve(self) -> Result<config::ExperimentConfig> {
        let overrides = Overrides {
            n: self.n,
            l_max: self.l_max,
            grid: self.grid,
            m_circle: self.m_circle,
            phantom: self.phantom,
            noise_level: self.noise_level,
            seed: self.seed,
            alphas: self.alphas.map(|a| a.0),
            pinv_threshold: self.pinv_threshold,
            output_dir: self.output_dir,
            table: self.table,
        };
        config::resolve(self.config.as_deref(), overrides)
    }
}

fn bound_violation() -> Error {
    Error::Numerical("reconstruction norm exceeds 2 ||Lg||".into())
}

fn run(cli: Cli) -> Result<()> {
    if let Command::Selftest = cli.command {
        let summary = cli::cmd_selftest();
        return if summary.failures.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("{} selftest check(s) failed", summary.failures.len())))
        };
    }
    if let Command::Export { coeffs, width, height, out } = &cli.command {
        let c = read_coeffs_csv(coeffs)?;
        let (lo, hi) = cli::cmd_export(&c, *width, *height, out)?;
        println!("wrote {} ({width}x{height}, min {lo}, max {hi})", out.display());
        return Ok(());
    }
    let cfg = cli.global.resolve()?;
    match cli.command {
        Command::Precompute { out } => {
            let s = cli::cmd_precompute(&cfg, out.as_deref())?;
            println!(
                "wrote {} (members {}, rank {}, crc32 {}, max residual {:.3e})",
                s.table.display(),
                s.frame_members,
                s.retained_rank,
                s.table_crc32,
                s.truncation.max_residual
            );
        }
        Command::Forward { out } => {
            let r = cli::cmd_forward(&cfg, out.as_deref())?;
            println!("forward: {} nodes, evenness ok: {}", r.data.nodes, r.data.evenness_ok);
        }
        Command::Reconstruct { data, alpha } => {
            let r = cli::cmd_reconstruct(&cfg, &data, alpha)?;
            println!("relative error {:.6}, norm ratio {:.4}", r.relative_error, r.norm_ratio);
            if !r.norm_bound_ok {
                return Err(bound_violation());
            }
        }
        Command::Experiment => {
            let r = cli::cmd_experiment(&cfg)?;
            for run in &r.runs {
                let label = run.alpha.map_or("none".to_string(), |a| a.to_string());
                println!(
                    "alpha {label:>8}  error {:.6}  norm ratio {:.4}",
                    run.relative_error, run.norm_ratio
                );
            }
            println!("best alpha {:?}, error {:.6}", r.best_alpha, r.best_error);
            if !r.norm_bound_ok {
                return Err(bound_violation());
            }
        }
        Command::Selftest | Command::Export { .. } => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
