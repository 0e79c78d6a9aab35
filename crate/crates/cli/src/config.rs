//! TOML experiment configuration.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use conecs_core::distributions::{bernoulli_blocks, load_masks, parse_masks, presets};
use conecs_core::estimators::DeltaMode;
use conecs_core::gradient::DescentConfig;
use conecs_core::weights::{weights_from_beta, DEFAULT_LAMBDA_TOL};
use conecs_core::{BetaVector, Magnitudes, RngSeed, SupportDistribution, WeightVector};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; `--seed` overrides it.
    pub seed: Option<u64>,
    pub distribution: DistributionSource,
    #[serde(default)]
    pub weights: WeightSource,
    #[serde(default)]
    pub volumes: VolumesSection,
    #[serde(default)]
    pub phase: PhaseSection,
    #[serde(default)]
    pub descend: DescendSection,
    #[serde(default)]
    pub histogram: HistogramSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistributionSource {
    Bernoulli { beta: Vec<f64> },
    /// Equal-length blocks with one inclusion probability per block.
    BernoulliBlocks { d: usize, params: Vec<f64> },
    /// Blocks with probabilities `2⁻¹, 2⁻², …, 2⁻⁸`.
    HalvingBlocks { d: usize },
    FourSupports {},
    PointMass { d: usize, support: Vec<usize> },
    Mixture { d: usize, supports: Vec<Vec<usize>>, probs: Vec<f64> },
    Masks { masks: Vec<String> },
    MaskFile { path: PathBuf },
    /// One marginal per line; entries of 0 or 1 are clipped.
    BetaFile { path: PathBuf },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightSource {
    Unit {},
    Theorem {
        #[serde(default = "default_lambda_tol")]
        lambda_tol: f64,
    },
    /// Last comma-separated field of every data line.
    File { path: PathBuf },
    /// Result of `[descend]` started from its `init` weights.
    Descend {},
}

impl Default for WeightSource {
    fn default() -> Self {
        WeightSource::Unit {}
    }
}

fn default_lambda_tol() -> f64 {
    DEFAULT_LAMBDA_TOL
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolumesSection {
    pub n_supports: usize,
    pub n_points: usize,
}

impl Default for VolumesSection {
    fn default() -> Self {
        Self { n_supports: 1000, n_points: 100 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseSection {
    /// Explicit measurement counts; empty means `1..=d` in steps of `m_step`.
    pub m_grid: Vec<usize>,
    pub m_step: usize,
    pub trials: usize,
    pub magnitudes: Magnitudes,
}

impl Default for PhaseSection {
    fn default() -> Self {
        Self { m_grid: Vec::new(), m_step: 1, trials: 100, magnitudes: Magnitudes::Gaussian }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DescentInit {
    #[default]
    Unit,
    Theorem,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescendSection {
    pub init: DescentInit,
    pub n_grad_samples: usize,
    pub n_eval_samples: usize,
    pub initial_step: f64,
    pub max_iters: usize,
    pub min_step: f64,
    pub common_random_numbers: bool,
}

impl Default for DescendSection {
    fn default() -> Self {
        let d = DescentConfig::default();
        Self {
            init: DescentInit::Unit,
            n_grad_samples: d.n_grad_samples,
            n_eval_samples: d.n_eval_samples,
            initial_step: d.initial_step,
            max_iters: d.max_iters,
            min_step: d.min_step,
            common_random_numbers: d.common_random_numbers,
        }
    }
}

impl DescendSection {
    pub fn to_config(&self, seed: RngSeed) -> DescentConfig {
        DescentConfig {
            n_grad_samples: self.n_grad_samples,
            n_eval_samples: self.n_eval_samples,
            initial_step: self.initial_step,
            max_iters: self.max_iters,
            min_step: self.min_step,
            seed,
            common_random_numbers: self.common_random_numbers,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistogramSection {
    pub n_supports: usize,
    pub n_points: usize,
    pub mode: DeltaMode,
}

impl Default for HistogramSection {
    fn default() -> Self {
        Self { n_supports: 200, n_points: 200, mode: DeltaMode::SquaredNorm }
    }
}

/// A parsed config together with its raw text and location.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub text: String,
    base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str(&text, base_dir).with_context(|| format!("in config {}", path.display()))
    }

    /// Relative paths inside `text` resolve against `base_dir`.
    pub fn from_str(text: &str, base_dir: PathBuf) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text)?;
        let loaded = Self { config, text: text.to_owned(), base_dir };
        loaded.check_files()?;
        Ok(loaded)
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn check_files(&self) -> Result<()> {
        let paths = [
            match &self.config.distribution {
                DistributionSource::MaskFile { path } | DistributionSource::BetaFile { path } => Some(path),
                _ => None,
            },
            match &self.config.weights {
                WeightSource::File { path } => Some(path),
                _ => None,
            },
        ];
        for p in paths.into_iter().flatten() {
            let full = self.resolve(p);
            ensure!(full.is_file(), "referenced file {} does not exist", full.display());
        }
        Ok(())
    }

    pub fn distribution(&self) -> Result<SupportDistribution> {
        use DistributionSource::*;
        let dist = match &self.config.distribution {
            Bernoulli { beta } => SupportDistribution::bernoulli(BetaVector::new(beta.clone())?),
            BernoulliBlocks { d, params } => bernoulli_blocks(*d, params)?,
            HalvingBlocks { d } => presets::bernoulli_halving_blocks(*d)?,
            FourSupports {} => presets::four_supports(),
            PointMass { d, support } => SupportDistribution::point_mass(*d, support.clone())?,
            Mixture { d, supports, probs } => SupportDistribution::mixture(*d, supports.clone(), probs.clone())?,
            Masks { masks } => parse_masks(&masks.iter().map(|m| format!("{m}\n")).collect::<String>())?,
            MaskFile { path } => load_masks(self.resolve(path))?,
            BetaFile { path } => {
                let values = read_column(&self.resolve(path))?;
                SupportDistribution::bernoulli(BetaVector::clipped(values)?)
            }
        };
        Ok(dist)
    }

    /// Weights for every source except `descend`, which the caller runs.
    pub fn static_weights(&self, dist: &SupportDistribution) -> Result<Option<WeightVector>> {
        let d = dist.dim();
        let w = match &self.config.weights {
            WeightSource::Unit {} => WeightVector::ones(d),
            WeightSource::Theorem { lambda_tol } => weights_from_beta(&dist.beta()?, *lambda_tol)?,
            WeightSource::File { path } => {
                let w = WeightVector::new(read_column(&self.resolve(path))?)?;
                ensure!(w.len() == d, "weight file has {} entries, distribution has dimension {d}", w.len());
                w
            }
            WeightSource::Descend {} => return Ok(None),
        };
        Ok(Some(w))
    }

    pub fn m_grid(&self, d: usize) -> Result<Vec<usize>> {
        let phase = &self.config.phase;
        let grid = if phase.m_grid.is_empty() {
            ensure!(phase.m_step >= 1, "phase.m_step must be at least 1");
            (1..=d).step_by(phase.m_step).collect()
        } else {
            phase.m_grid.clone()
        };
        if let Some(&bad) = grid.iter().find(|&&m| m == 0 || m > d) {
            bail!("phase.m_grid entry {bad} outside 1..={d}");
        }
        Ok(grid)
    }
}

/// Last comma-separated numeric field of each line, skipping comments and headers.
fn read_column(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.rsplit(',').next().unwrap_or(line).trim();
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if out.is_empty() && n <= 1 => continue,
            Err(e) => bail!("{}:{}: {e}", path.display(), n + 1),
        }
    }
    ensure!(!out.is_empty(), "{} holds no values", path.display());
    Ok(out)
}
