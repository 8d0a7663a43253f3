//! Experiment configuration (TOML).
//!
//! ```toml
//! [problem]
//! kind = "block_fem"          # fourier_rank_one | block_fem | synthetic_dense | file
//!
//! [window]
//! a = 0.25
//! b = 0.9
//! gamma = 0.0                 # inverse mode only
//!
//! [levels]
//! coarse = [49]
//! fine = [576]
//! pairing = "paired"          # or "crossed"
//!
//! [stage_two]
//! mode = "inverse"            # or "direct"
//! residuals = true
//!
//! [output]
//! dir = "out/fig4"
//! format = "csv"              # or "json"
//! ```
//!
//! Relative paths are resolved against the directory holding the config.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dissipative::{ClusterOptions, Mode, DEFAULT_IM_THRESHOLD};
use crate::error::{Error, Result};
use crate::galerkin::SpectralWindow;
use crate::problems::ProblemSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub window: WindowConfig,
    pub levels: LevelsConfig,
    #[serde(default)]
    pub stage_two: StageTwoConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<RatesConfig>,
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemConfig {
    FourierRankOne,
    BlockFem,
    SyntheticDense { eigenvalues: Vec<f64>, seed: u64 },
    /// Matrices from a container file; level `k` is the leading `k × k` block.
    File { path: PathBuf },
}

impl ProblemConfig {
    pub fn builtin(&self) -> Option<ProblemSpec> {
        match self {
            ProblemConfig::FourierRankOne => Some(ProblemSpec::FourierRankOne),
            ProblemConfig::BlockFem => Some(ProblemSpec::BlockFem),
            ProblemConfig::SyntheticDense { eigenvalues, seed } => Some(ProblemSpec::SyntheticDense {
                eigenvalues: eigenvalues.clone(),
                seed: *seed,
            }),
            ProblemConfig::File { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub a: f64,
    pub b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// `coarse[i]` with `fine[i]`.
    #[default]
    Paired,
    /// Every coarse level with every fine level.
    Crossed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelsConfig {
    pub coarse: Vec<usize>,
    pub fine: Vec<usize>,
    #[serde(default)]
    pub pairing: Pairing,
}

impl LevelsConfig {
    pub fn pairs(&self) -> Result<Vec<(usize, usize)>> {
        if self.coarse.is_empty() || self.fine.is_empty() {
            return Err(Error::Config("levels.coarse and levels.fine must be non-empty".into()));
        }
        match self.pairing {
            Pairing::Paired => {
                if self.coarse.len() != self.fine.len() {
                    return Err(Error::Config(format!(
                        "paired levels need equal lengths, got {} coarse and {} fine",
                        self.coarse.len(),
                        self.fine.len()
                    )));
                }
                Ok(self.coarse.iter().copied().zip(self.fine.iter().copied()).collect())
            }
            Pairing::Crossed => Ok(self
                .coarse
                .iter()
                .flat_map(|&c| self.fine.iter().map(move |&f| (c, f)))
                .collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageTwoConfig {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im_threshold: Option<f64>,
    /// Interval `(a, b)` declared to hold exactly one eigenvalue.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub localization_window: Option<[f64; 2]>,
    #[serde(default)]
    pub residuals: bool,
}

impl Default for StageTwoConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Direct,
            radius: None,
            im_threshold: None,
            localization_window: None,
            residuals: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateAxis {
    /// The coarse level index.
    Level,
    /// `1/coarse`, the mesh width of FEM levels.
    MeshWidth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    /// Reference eigenvalue in window coordinates.
    pub reference: f64,
    /// Reference for the Galerkin column when it differs (e.g. an eigenvalue
    /// outside the essential-spectrum hull).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub galerkin_reference: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<RateAxis>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Makes relative paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output.dir);
        if let ProblemConfig::File { path } = &mut self.problem {
            fix(path);
        }
    }

    pub fn spectral_window(&self) -> Result<SpectralWindow> {
        let w = &self.window;
        match w.gamma {
            Some(g) => SpectralWindow::inverse(w.a, w.b, g),
            None => SpectralWindow::new(w.a, w.b),
        }
    }

    pub fn cluster_options(&self) -> ClusterOptions {
        ClusterOptions {
            radius: self.stage_two.radius,
            im_threshold: self.stage_two.im_threshold.unwrap_or(DEFAULT_IM_THRESHOLD),
            window: self.stage_two.localization_window.map(|[a, b]| (a, b)),
        }
    }

    pub fn rate_axis(&self) -> RateAxis {
        self.rates.as_ref().and_then(|r| r.axis).unwrap_or(match self.problem {
            ProblemConfig::BlockFem => RateAxis::MeshWidth,
            _ => RateAxis::Level,
        })
    }

    /// Static checks that need no numerics.
    pub fn validate(&self) -> Result<()> {
        self.spectral_window().map_err(|e| Error::Config(e.to_string()))?;
        match (self.stage_two.mode, self.window.gamma) {
            (Mode::Inverse, None) => return Err(Error::Config("mode = \"inverse\" requires window.gamma".into())),
            (Mode::Direct, Some(_)) => {
                return Err(Error::Config("window.gamma is only allowed with mode = \"inverse\"".into()))
            }
            _ => {}
        }
        if let Some(r) = self.stage_two.radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config(format!("stage_two.radius must be positive, got {r}")));
            }
        }
        if let Some(t) = self.stage_two.im_threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("stage_two.im_threshold must lie in [0, 1], got {t}")));
            }
        }
        if let Some([a, b]) = self.stage_two.localization_window {
            if !(a < b) {
                return Err(Error::Config("stage_two.localization_window needs a < b".into()));
            }
        }
        let pairs = self.levels.pairs()?;
        if let Some(p) = self.problem.builtin() {
            for &(c, f) in &pairs {
                p.validate_level(c).map_err(|e| Error::Config(e.to_string()))?;
                p.validate_level(f).map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        for &(c, f) in &pairs {
            let nested_by_index = !matches!(self.problem, ProblemConfig::BlockFem);
            if nested_by_index && c > f {
                return Err(Error::Config(format!("coarse level {c} exceeds fine level {f}")));
            }
        }
        Ok(())
    }
}
