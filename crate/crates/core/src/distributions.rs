//! Generative models for the support of the unknown signal.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cone::validate_support;
use crate::error::{invalid, Error, Result};
use crate::weights::BetaVector;

const PROB_SUM_TOL: f64 = 1e-12;

/// Distribution over subsets of `0..d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionRepr", into = "DistributionRepr")]
pub enum SupportDistribution {
    /// Coordinate `i` is included independently with probability `β_i`.
    IndependentBernoulli { beta: BetaVector },
    /// One of a fixed list of supports, drawn with the given probabilities.
    FiniteMixture {
        d: usize,
        supports: Vec<Vec<usize>>,
        probs: Vec<f64>,
    },
    /// Uniform draw from a list of observed supports.
    Empirical { d: usize, supports: Vec<Vec<usize>> },
}

/// Config-file form. Empirical supports are written as `0`/`1` mask strings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum DistributionRepr {
    Bernoulli {
        beta: Vec<f64>,
    },
    Mixture {
        d: usize,
        supports: Vec<Vec<usize>>,
        probs: Vec<f64>,
    },
    Empirical {
        masks: Vec<String>,
    },
}

impl TryFrom<DistributionRepr> for SupportDistribution {
    type Error = Error;

    fn try_from(repr: DistributionRepr) -> Result<Self> {
        match repr {
            DistributionRepr::Bernoulli { beta } => Ok(Self::bernoulli(BetaVector::new(beta)?)),
            DistributionRepr::Mixture { d, supports, probs } => Self::mixture(d, supports, probs),
            DistributionRepr::Empirical { masks } => {
                parse_masks(&masks.iter().map(|m| format!("{m}\n")).collect::<String>())
            }
        }
    }
}

impl From<SupportDistribution> for DistributionRepr {
    fn from(dist: SupportDistribution) -> Self {
        match dist {
            SupportDistribution::IndependentBernoulli { beta } => DistributionRepr::Bernoulli {
                beta: beta.into(),
            },
            SupportDistribution::FiniteMixture { d, supports, probs } => {
                DistributionRepr::Mixture { d, supports, probs }
            }
            SupportDistribution::Empirical { d, supports } => DistributionRepr::Empirical {
                masks: supports.iter().map(|s| support_to_mask(s, d)).collect(),
            },
        }
    }
}

fn support_to_mask(support: &[usize], d: usize) -> String {
    let mut mask = vec![b'0'; d];
    support.iter().for_each(|&i| mask[i] = b'1');
    String::from_utf8(mask).expect("ascii")
}

impl SupportDistribution {
    pub fn bernoulli(beta: BetaVector) -> Self {
        Self::IndependentBernoulli { beta }
    }

    pub fn mixture(d: usize, supports: Vec<Vec<usize>>, probs: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(invalid("d", "must be positive"));
        }
        if supports.is_empty() || supports.len() != probs.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} supports but {} probabilities",
                supports.len(),
                probs.len()
            )));
        }
        for s in &supports {
            validate_support(s, d)?;
        }
        if probs.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidDistribution("negative probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self::FiniteMixture { d, supports, probs })
    }

    /// A point mass on a single support.
    pub fn point_mass(d: usize, support: Vec<usize>) -> Result<Self> {
        Self::mixture(d, vec![support], vec![1.0])
    }

    pub fn empirical(d: usize, supports: Vec<Vec<usize>>) -> Result<Self> {
        if d == 0 {
            return Err(invalid("d", "must be positive"));
        }
        if supports.is_empty() {
            return Err(Error::InvalidDistribution("no masks".into()));
        }
        for s in &supports {
            validate_support(s, d)?;
        }
        Ok(Self::Empirical { d, supports })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::IndependentBernoulli { beta } => beta.len(),
            Self::FiniteMixture { d, .. } | Self::Empirical { d, .. } => *d,
        }
    }

    /// Draws a sorted support.
    pub fn sample_support<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        match self {
            Self::IndependentBernoulli { beta } => beta
                .as_slice()
                .iter()
                .enumerate()
                .filter_map(|(i, &b)| (rng.random::<f64>() < b).then_some(i))
                .collect(),
            Self::FiniteMixture { supports, probs, .. } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (s, p) in supports.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return s.clone();
                    }
                }
                // Rounding can leave `acc` a hair below 1.
                let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
                supports[last].clone()
            }
            Self::Empirical { supports, .. } => {
                supports[rng.random_range(0..supports.len())].clone()
            }
        }
    }

    /// Marginals `β_i`. Mixture and empirical marginals are clipped into
    /// `(0, 1)`.
    pub fn beta(&self) -> Result<BetaVector> {
        match self {
            Self::IndependentBernoulli { beta } => Ok(beta.clone()),
            Self::FiniteMixture { d, supports, probs } => {
                let mut b = vec![0.0; *d];
                for (s, p) in supports.iter().zip(probs) {
                    s.iter().for_each(|&i| b[i] += p);
                }
                BetaVector::clipped(b.into_iter().map(|x: f64| x.min(1.0)).collect())
            }
            Self::Empirical { d, supports } => {
                let mut counts = vec![0usize; *d];
                for s in supports {
                    s.iter().for_each(|&i| counts[i] += 1);
                }
                let n = supports.len() as f64;
                BetaVector::clipped(counts.into_iter().map(|c| c as f64 / n).collect())
            }
        }
    }

    /// Empirical distribution over a subset of the masks, e.g. for
    /// leave-one-out protocols.
    pub fn empirical_subset(&self, keep: impl Fn(usize) -> bool) -> Result<Self> {
        match self {
            Self::Empirical { d, supports } => Self::empirical(
                *d,
                supports
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| keep(*i))
                    .map(|(_, s)| s.clone())
                    .collect(),
            ),
            _ => Err(Error::InvalidDistribution(
                "subsetting needs an empirical distribution".into(),
            )),
        }
    }
}

/// Independent Bernoulli entries with one parameter per equal-length block.
pub fn bernoulli_blocks(d: usize, params: &[f64]) -> Result<SupportDistribution> {
    let n_blocks = params.len();
    if n_blocks == 0 || d == 0 || d % n_blocks != 0 {
        return Err(invalid(
            "n_blocks",
            format!("{n_blocks} blocks do not divide dimension {d}"),
        ));
    }
    let len = d / n_blocks;
    let beta = (0..d).map(|i| params[i / len]).collect();
    Ok(SupportDistribution::bernoulli(BetaVector::new(beta)?))
}

/// Parses one mask per line, each exactly `d` characters from `{0, 1}`.
pub fn parse_masks(text: &str) -> Result<SupportDistribution> {
    let mut d = None;
    let mut supports = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        let mut support = Vec::new();
        for (i, c) in line.chars().enumerate() {
            match c {
                '0' => {}
                '1' => support.push(i),
                other => {
                    return Err(Error::MaskParse {
                        line: line_no,
                        reason: format!("unexpected character {other:?} at column {}", i + 1),
                    })
                }
            }
        }
        let len = line.chars().count();
        match d {
            None if len == 0 => {
                return Err(Error::MaskParse {
                    line: line_no,
                    reason: "empty mask".into(),
                })
            }
            None => d = Some(len),
            Some(d) if d != len => {
                return Err(Error::MaskParse {
                    line: line_no,
                    reason: format!("expected {d} characters, found {len}"),
                })
            }
            _ => {}
        }
        supports.push(support);
    }
    match d {
        Some(d) => SupportDistribution::empirical(d, supports),
        None => Err(Error::MaskParse {
            line: 0,
            reason: "no masks in input".into(),
        }),
    }
}

pub fn load_masks(path: impl AsRef<Path>) -> Result<SupportDistribution> {
    parse_masks(&std::fs::read_to_string(path)?)
}

/// Ready-made distributions used by the experiments.
pub mod presets {
    use super::*;

    /// `d` coordinates in 8 equal blocks, block `b` with parameter `2^-(b+1)`.
    pub fn bernoulli_halving_blocks(d: usize) -> Result<SupportDistribution> {
        let params: Vec<f64> = (1..=8).map(|p| 0.5f64.powi(p)).collect();
        bernoulli_blocks(d, &params)
    }

    /// Four equally likely supports of sizes 5, 15, 25 and 35 in dimension
    /// 40, built from eight blocks of five coordinates. Every coordinate lies
    /// in one, two or three of the supports, so all marginals are interior.
    pub fn four_supports() -> SupportDistribution {
        const BLOCKS: [&[usize]; 4] = [&[0], &[0, 1, 2], &[0, 1, 3, 4, 5], &[1, 2, 3, 4, 5, 6, 7]];
        let supports = BLOCKS
            .iter()
            .map(|blocks| {
                let mut s: Vec<usize> = blocks.iter().flat_map(|b| b * 5..b * 5 + 5).collect();
                s.sort_unstable();
                s
            })
            .collect();
        SupportDistribution::mixture(40, supports, vec![0.25; 4]).expect("valid preset")
    }
}
