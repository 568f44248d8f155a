//! Flat TOML configuration with per-field command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::DEFAULT_PINV_THRESHOLD;
use crate::geometry::{load_design, product_grid, QuadratureGrid};
use crate::phantom::Phantom;
use crate::radon::DEFAULT_M_CIRCLE;

/// Regularization parameters swept by `experiment` when none are configured.
pub const DEFAULT_ALPHAS: [f64; 12] = [0.0, 0.01, 0.02, 0.03, 0.05, 0.064, 0.076, 0.1, 0.14, 0.2, 0.3, 0.5];

/// `product:<n_theta>x<n_lambda>` or `design:<path>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GridSpec {
    Product { n_theta: usize, n_lambda: usize },
    Design(PathBuf),
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<QuadratureGrid>> {
        Ok(Arc::new(match self {
            GridSpec::Product { n_theta, n_lambda } => product_grid(*n_theta, *n_lambda)?,
            GridSpec::Design(path) => load_design(path)?,
        }))
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::invalid(format!("grid must be product:<n_theta>x<n_lambda> or design:<path>, got {s:?}"))
        };
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "product" => {
                let (a, b) = rest.split_once('x').ok_or_else(bad)?;
                let n_theta = a.trim().parse().map_err(|_| bad())?;
                let n_lambda = b.trim().parse().map_err(|_| bad())?;
                if n_theta == 0 || n_lambda == 0 {
                    return Err(bad());
                }
                Ok(GridSpec::Product { n_theta, n_lambda })
            }
            "design" if !rest.is_empty() => Ok(GridSpec::Design(PathBuf::from(rest))),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridSpec::Product { n_theta, n_lambda } => write!(f, "product:{n_theta}x{n_lambda}"),
            GridSpec::Design(p) => write!(f, "design:{}", p.display()),
        }
    }
}

impl TryFrom<String> for GridSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<GridSpec> for String {
    fn from(g: GridSpec) -> String {
        g.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Frame size: `|n| ≤ n`, `1 ≤ k ≤ n`.
    pub n: u32,
    pub l_max: usize,
    pub grid: GridSpec,
    pub m_circle: usize,
    /// `"default"` or a phantom file.
    pub phantom: String,
    pub noise_level: f64,
    pub seed: u64,
    /// Tikhonov parameters; empty runs the unfiltered inversion only.
    pub alphas: Vec<f64>,
    pub pinv_threshold: f64,
    pub output_dir: PathBuf,
    /// Precomputed dual-frame table; built in memory when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 25,
            l_max: 100,
            grid: GridSpec::Product { n_theta: 101, n_lambda: 202 },
            m_circle: DEFAULT_M_CIRCLE,
            phantom: "default".into(),
            noise_level: 0.0,
            seed: 1,
            alphas: DEFAULT_ALPHAS.to_vec(),
            pinv_threshold: DEFAULT_PINV_THRESHOLD,
            output_dir: PathBuf::from("out"),
            table: None,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be >= 1"));
        }
        if self.l_max == 0 {
            return Err(Error::invalid("l_max must be >= 1"));
        }
        if self.m_circle < 4 {
            return Err(Error::invalid(format!("m_circle must be >= 4, got {}", self.m_circle)));
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return Err(Error::invalid(format!(
                "noise_level must be finite and >= 0, got {}",
                self.noise_level
            )));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a >= 0.0 && a.is_finite())) {
            return Err(Error::invalid(format!("alphas must be finite and >= 0, got {a}")));
        }
        if !(self.pinv_threshold > 0.0 && self.pinv_threshold < 1.0) {
            return Err(Error::invalid(format!(
                "pinv_threshold must lie in (0, 1), got {}",
                self.pinv_threshold
            )));
        }
        Ok(())
    }

    pub fn load_phantom(&self) -> Result<Phantom> {
        if self.phantom == "default" {
            Ok(Phantom::default_tetrahedral())
        } else {
            Phantom::load(Path::new(&self.phantom))
        }
    }
}

/// Optional replacements for individual config fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n: Option<u32>,
    pub l_max: Option<usize>,
    pub grid: Option<GridSpec>,
    pub m_circle: Option<usize>,
    pub phantom: Option<String>,
    pub noise_level: Option<f64>,
    pub seed: Option<u64>,
    pub alphas: Option<Vec<f64>>,
    pub pinv_threshold: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub table: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(self, cfg: &mut ExperimentConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { cfg.$f = v; })* };
        }
        set!(n, l_max, grid, m_circle, phantom, noise_level, seed, alphas, pinv_threshold, output_dir);
        if self.table.is_some() {
            cfg.table = self.table;
        }
    }
}

/// Resolves the configuration: defaults, then the file, then the overrides.
pub fn resolve(path: Option<&Path>, overrides: Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec_roundtrip() {
        let g: GridSpec = "product:101x202".parse().unwrap();
        assert_eq!(g, GridSpec::Product { n_theta: 101, n_lambda: 202 });
        assert_eq!(g.to_string(), "product:101x202");
        assert_eq!("design:a/b.txt".parse::<GridSpec>().unwrap(), GridSpec::Design("a/b.txt".into()));
        for bad in ["", "product:10", "product:0x4", "foo:1x2", "design:"] {
            assert!(bad.parse::<GridSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn parse_partial_config() {
        let cfg = ExperimentConfig::parse("n = 10\ngrid = \"product:21x42\"\nalphas = []\n").unwrap();
        assert_eq!(cfg.n, 10);
        assert_eq!(cfg.l_max, 100);
        assert!(cfg.alphas.is_empty());
        assert!(ExperimentConfig::parse("bogus = 1").is_err());
        assert!(ExperimentConfig::parse("pinv_threshold = 2.0").is_err());
        assert!(ExperimentConfig::parse("alphas = [-1.0]").is_err());
    }

    #[test]
    fn overrides_win() {
        let cfg = resolve(
            None,
            Overrides { n: Some(7), seed: Some(9), table: Some("t.frfd".into()), ..Default::default() },
        )
        .unwrap();
        assert_eq!((cfg.n, cfg.seed), (7, 9));
        assert_eq!(cfg.table, Some(PathBuf::from("t.frfd")));
        assert!(resolve(None, Overrides { m_circle: Some(2), ..Default::default() }).is_err());
    }
}
