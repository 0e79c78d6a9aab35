//! Monte Carlo estimators for the random descent cone `D(supp X₀, w)`.
//!
//! A draw picks a support from the distribution and a standard Gaussian
//! vector, then reads off the face dimension and squared norm of its
//! projection. Only the `z₀` and `z_J` coordinates are sampled; the
//! lineality part contributes exactly `k - 1` to the expected squared norm.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::{reduced_projection, ConeSpec, WeightVector};
use crate::distributions::SupportDistribution;
use crate::error::{invalid, Error, Result};
use crate::rng::{batches, RngSeed};

/// Normal quantile used for the reported confidence intervals.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Bins with fewer counts than this use the floor in their CI.
pub const CI_COUNT_FLOOR: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaMode {
    /// Average of the face dimension, `Σ k ν_k`.
    #[default]
    FaceDimension,
    /// Average of `‖π_C(g)‖²`, with the lineality term added analytically.
    SquaredNorm,
}

/// One projection draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeDraw {
    pub face_dim: usize,
    pub sq_norm: f64,
}

/// Draws `z₀, z_J` and projects onto `D(support, w)`.
pub fn draw_for_support<R: Rng + ?Sized>(support: &[usize], w: &WeightVector, rng: &mut R) -> ConeDraw {
    let d = w.len();
    let k = support.len();
    if k == 0 {
        return ConeDraw {
            face_dim: 0,
            sq_norm: 0.0,
        };
    }
    if k == d {
        // Halfspace: the normal component survives only on the inner side.
        let g: f64 = rng.sample(StandardNormal);
        let inner = g.min(0.0);
        return ConeDraw {
            face_dim: if g < 0.0 { d } else { d - 1 },
            sq_norm: (d - 1) as f64 + inner * inner,
        };
    }
    let cone = ConeSpec::new(w, support).expect("support drawn from a validated distribution");
    let z0: f64 = rng.sample(StandardNormal);
    let zj: Vec<f64> = (0..d - k).map(|_| rng.sample(StandardNormal)).collect();
    let wj: Vec<f64> = cone.complement().iter().map(|&j| w[j]).collect();
    let reduced = reduced_projection(cone.a(), z0, &zj, &wj);
    let face_dim = if reduced.t.is_some() { reduced.m + k - 1 } else { d };
    ConeDraw {
        face_dim,
        sq_norm: reduced.sq_norm + (k - 1) as f64,
    }
}

pub fn sample_cone_draw<R: Rng + ?Sized>(dist: &SupportDistribution, w: &WeightVector, rng: &mut R) -> ConeDraw {
    let support = dist.sample_support(rng);
    draw_for_support(&support, w, rng)
}

/// Face dimension of the projection of one Gaussian draw onto one random cone.
pub fn sample_face_dimension<R: Rng + ?Sized>(dist: &SupportDistribution, w: &WeightVector, rng: &mut R) -> usize {
    sample_cone_draw(dist, w, rng).face_dim
}

/// Mergeable running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        Moments { n, mean, m2 }
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// Runs `work` on every fixed-size batch of `0..n` with its own stream and
/// returns the per-batch results in batch order.
pub(crate) fn run_batched<T, F>(n: usize, seed: RngSeed, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> T + Sync,
{
    let jobs: Vec<(u64, usize)> = batches(n).collect();
    jobs.into_par_iter()
        .map(|(b, len)| work(&mut seed.substream(b).rng(), len))
        .collect()
}

/// Estimate of the expected statistical dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub mode: DeltaMode,
}

impl DeltaEstimate {
    fn from_moments(m: Moments, mode: DeltaMode) -> Self {
        Self {
            mean: m.mean,
            stderr: m.stderr(),
            n: m.n,
            mode,
        }
    }
}

fn check_dim(dist: &SupportDistribution, w: &WeightVector) -> Result<()> {
    if dist.dim() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: dist.dim(),
            got: w.len(),
        });
    }
    Ok(())
}

fn require_positive(name: &'static str, n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid(name, "must be at least 1"));
    }
    Ok(())
}

/// Both estimators from the same draws: `(face-dimension, squared-norm)`.
pub fn estimate_expected_delta_both(
    dist: &SupportDistribution,
    w: &WeightVector,
    n: usize,
    seed: RngSeed,
) -> Result<(DeltaEstimate, DeltaEstimate)> {
    check_dim(dist, w)?;
    require_positive("n", n)?;
    let parts = run_batched(n, seed, |rng, len| {
        let mut face = Moments::default();
        let mut norm = Moments::default();
        for _ in 0..len {
            let draw = sample_cone_draw(dist, w, rng);
            face.push(draw.face_dim as f64);
            norm.push(draw.sq_norm);
        }
        (face, norm)
    });
    let (face, norm) = parts
        .into_iter()
        .fold((Moments::default(), Moments::default()), |(f, s), (pf, ps)| {
            (f.merge(pf), s.merge(ps))
        });
    Ok((
        DeltaEstimate::from_moments(face, DeltaMode::FaceDimension),
        DeltaEstimate::from_moments(norm, DeltaMode::SquaredNorm),
    ))
}

pub fn estimate_expected_delta(
    dist: &SupportDistribution,
    w: &WeightVector,
    n: usize,
    mode: DeltaMode,
    seed: RngSeed,
) -> Result<DeltaEstimate> {
    let (face, norm) = estimate_expected_delta_both(dist, w, n, seed)?;
    Ok(match mode {
        DeltaMode::FaceDimension => face,
        DeltaMode::SquaredNorm => norm,
    })
}

/// Squared-norm estimate of `δ̄(w_b) - δ̄(w_a)` with common random numbers:
/// both weight vectors see the same supports and the same `(z₀, z_J)`.
pub fn estimate_delta_difference(
    dist: &SupportDistribution,
    w_a: &WeightVector,
    w_b: &WeightVector,
    n: usize,
    seed: RngSeed,
) -> Result<DeltaEstimate> {
    check_dim(dist, w_a)?;
    check_dim(dist, w_b)?;
    require_positive("n", n)?;
    let parts = run_batched(n, seed, |rng, len| {
        let mut diff = Moments::default();
        for _ in 0..len {
            let support = dist.sample_support(rng);
            let mut fork = rng.clone();
            let a = draw_for_support(&support, w_a, &mut fork);
            let b = draw_for_support(&support, w_b, rng);
            diff.push(b.sq_norm - a.sq_norm);
        }
        diff
    });
    let m = parts.into_iter().fold(Moments::default(), Moments::merge);
    Ok(DeltaEstimate::from_moments(m, DeltaMode::SquaredNorm))
}

/// Face-dimension histogram with the derived intrinsic-volume functionals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    /// `counts[k]` = draws whose projection landed on a `k`-dimensional face.
    pub counts: Vec<u64>,
    pub n: u64,
    pub nu_bar: Vec<f64>,
    pub t_bar: Vec<f64>,
    pub h_bar: Vec<f64>,
    pub ci_half_width: Vec<f64>,
}

/// 95% normal-approximation half-width for `count` successes out of `n`,
/// with the count floored at [`CI_COUNT_FLOOR`] on either side.
pub fn binomial_half_width(count: u64, n: u64) -> f64 {
    if n < 2 * CI_COUNT_FLOOR {
        return 1.0;
    }
    let c = count.clamp(CI_COUNT_FLOOR, n - CI_COUNT_FLOOR) as f64;
    let p = c / n as f64;
    Z_95 * (p * (1.0 - p) / n as f64).sqrt()
}

impl VolumeEstimate {
    pub fn from_counts(counts: Vec<u64>) -> Self {
        let n: u64 = counts.iter().sum();
        let d = counts.len() - 1;
        let nf = n.max(1) as f64;
        let nu_bar = counts.iter().map(|&c| c as f64 / nf).collect();
        let tail_counts = |k: usize| -> u64 { counts[k..].iter().sum() };
        let half_counts = |k: usize| -> u64 { counts[k..].iter().step_by(2).sum() };
        let t_bar = (0..=d).map(|k| tail_counts(k) as f64 / nf).collect();
        let h_bar = (0..=d).map(|k| half_counts(k) as f64 / nf).collect();
        let ci_half_width = counts.iter().map(|&c| binomial_half_width(c, n)).collect();
        Self {
            counts,
            n,
            nu_bar,
            t_bar,
            h_bar,
            ci_half_width,
        }
    }

    pub fn dim(&self) -> usize {
        self.counts.len() - 1
    }

    /// `t̄_k`, zero past the top index.
    pub fn tail(&self, k: usize) -> f64 {
        self.t_bar.get(k).copied().unwrap_or(0.0)
    }

    /// `h̄_k`, zero past the top index.
    pub fn half_tail(&self, k: usize) -> f64 {
        self.h_bar.get(k).copied().unwrap_or(0.0)
    }

    pub fn tail_ci(&self, k: usize) -> f64 {
        let c = self.counts.get(k..).map_or(0, |s| s.iter().sum());
        binomial_half_width(c, self.n)
    }

    pub fn half_tail_ci(&self, k: usize) -> f64 {
        let c = self.counts.get(k..).map_or(0, |s| s.iter().step_by(2).sum());
        binomial_half_width(c, self.n)
    }

    /// `Σ k ν̄_k`.
    pub fn mean_dimension(&self) -> f64 {
        self.nu_bar
            .iter()
            .enumerate()
            .map(|(k, v)| k as f64 * v)
            .sum()
    }
}

/// Nested sampling: `n_supports` supports, `n_points` Gaussian draws each.
pub fn estimate_intrinsic_volumes(
    dist: &SupportDistribution,
    w: &WeightVector,
    n_supports: usize,
    n_points: usize,
    seed: RngSeed,
) -> Result<VolumeEstimate> {
    check_dim(dist, w)?;
    require_positive("n_supports", n_supports)?;
    require_positive("n_points", n_points)?;
    let d = w.len();
    let parts = run_batched(n_supports, seed, |rng, len| {
        let mut counts = vec![0u64; d + 1];
        for _ in 0..len {
            let support = dist.sample_support(rng);
            for _ in 0..n_points {
                counts[draw_for_support(&support, w, rng).face_dim] += 1;
            }
        }
        counts
    });
    let mut counts = vec![0u64; d + 1];
    for part in parts {
        counts.iter_mut().zip(part).for_each(|(c, p)| *c += p);
    }
    Ok(VolumeEstimate::from_counts(counts))
}

/// Probability that recovery with `m` measurements fails, `2 h̄_{m+1}`.
pub fn failure_probability(v: &VolumeEstimate, m: usize) -> Result<f64> {
    if m > v.dim() {
        return Err(invalid("m", format!("{m} exceeds dimension {}", v.dim())));
    }
    Ok(2.0 * v.half_tail(m + 1))
}

/// One entry of the per-support histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportDelta {
    pub support: Vec<usize>,
    pub delta: DeltaEstimate,
}

/// `δ(D(I, w))` estimates for `n_supports` sampled supports.
pub fn per_support_delta_histogram(
    dist: &SupportDistribution,
    w: &WeightVector,
    n_supports: usize,
    n_points: usize,
    mode: DeltaMode,
    seed: RngSeed,
) -> Result<Vec<SupportDelta>> {
    check_dim(dist, w)?;
    require_positive("n_supports", n_supports)?;
    require_positive("n_points", n_points)?;
    let parts = run_batched(n_supports, seed, |rng, len| {
        (0..len)
            .map(|_| {
                let support = dist.sample_support(rng);
                let mut m = Moments::default();
                for _ in 0..n_points {
                    let draw = draw_for_support(&support, w, rng);
                    m.push(match mode {
                        DeltaMode::FaceDimension => draw.face_dim as f64,
                        DeltaMode::SquaredNorm => draw.sq_norm,
                    });
                }
                SupportDelta {
                    support,
                    delta: DeltaEstimate::from_moments(m, mode),
                }
            })
            .collect::<Vec<_>>()
    });
    Ok(parts.into_iter().flatten().collect())
}

/// Histogram entries grouped by identical support.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportCluster {
    pub support: Vec<usize>,
    pub count: usize,
    pub mean: f64,
    /// Standard error of `mean`, from the pooled draws of the group.
    pub stderr: f64,
}

pub fn cluster_by_support(entries: &[SupportDelta]) -> Vec<SupportCluster> {
    let mut groups: Vec<(Vec<usize>, usize, Moments)> = Vec::new();
    for e in entries {
        let pooled = Moments {
            n: e.delta.n,
            mean: e.delta.mean,
            m2: e.delta.stderr * e.delta.stderr * e.delta.n as f64 * e.delta.n.saturating_sub(1) as f64,
        };
        match groups.iter_mut().find(|g| g.0 == e.support) {
            Some(g) => {
                g.1 += 1;
                g.2 = g.2.merge(pooled);
            }
            None => groups.push((e.support.clone(), 1, pooled)),
        }
    }
    groups
        .into_iter()
        .map(|(support, count, m)| SupportCluster {
            support,
            count,
            mean: m.mean,
            stderr: m.stderr(),
        })
        .collect()
}

/// Samples sufficient for `P(|V̄ - δ̄| > t) ≤ ε` by Hoeffding's inequality.
pub fn hoeffding_samples(eps: f64, t: f64, d: usize) -> Result<u64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid("eps", format!("{eps} is not in (0, 1)")));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("t", "must be positive"));
    }
    let d = d as f64;
    Ok(((2.0 / eps).ln() * d * d / (2.0 * t * t)).ceil() as u64)
}

/// `a_η = sqrt(8 log(4/η))`, the phase-transition width constant.
pub fn a_eta(eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(invalid("eta", format!("{eta} is not in (0, 1)")));
    }
    Ok((8.0 * (4.0 / eta).ln()).sqrt())
}

/// `a_{η/2} = sqrt(8 log(8/η))`, the constant for random supports.
pub fn a_eta_half(eta: f64) -> Result<f64> {
    a_eta(eta / 2.0)
}
