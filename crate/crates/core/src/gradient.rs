//! Stochastic steepest descent on the expected statistical dimension.
//!
//! For fixed canonical `z`, the face and ordering chosen by the projection
//! are locally constant in `w` away from ties, and
//!
//! ```text
//! ‖π_C(z)‖² = const + (z₀ + a t)² - z₀² + Σ_{i≤m} (|z_{j_i}| - w_{j_i} t)²
//! ```
//!
//! where `t` minimises the right-hand side over `t`. The derivative is taken
//! with `t` held fixed (envelope theorem) and chained through `a` and `z₀`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::cone::{sorted_order, validate_support, WeightVector};
use crate::distributions::SupportDistribution;
use crate::error::{invalid, Error, Result};
use crate::estimators::{
    estimate_expected_delta, run_batched, DeltaEstimate, DeltaMode, Moments,
};
use crate::rng::RngSeed;

/// Relative slack under which a comparison counts as a tie.
pub const STRICTNESS_TOL: f64 = 1e-12;

/// Lower bound kept on every weight during descent.
pub const WEIGHT_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample {
    /// `∂‖π_C(z)‖² / ∂w`.
    pub grad: Vec<f64>,
    /// False when the sample sits on a kink and the formula does not apply.
    pub valid: bool,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= STRICTNESS_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Analytic gradient of the squared projection norm for one canonical `z`.
pub fn gradient_sample(support: &[usize], w: &WeightVector, z: &[f64]) -> Result<GradientSample> {
    let d = w.len();
    validate_support(support, d)?;
    if z.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: z.len() });
    }
    let k = support.len();
    if k == 0 || k == d {
        return Err(Error::DegenerateSupport { k, d });
    }
    let ws = w.as_slice();
    let mut on = vec![false; d];
    support.iter().for_each(|&i| on[i] = true);
    let complement: Vec<usize> = (0..d).filter(|&j| !on[j]).collect();

    let a2: f64 = support.iter().map(|&i| ws[i] * ws[i]).sum();
    let a = a2.sqrt();
    let s_on: f64 = support.iter().map(|&i| ws[i] * z[i]).sum();
    let z0 = -s_on / a;
    let az0 = a * z0;

    let wj: Vec<f64> = complement.iter().map(|&j| ws[j]).collect();
    let absz: Vec<f64> = complement.iter().map(|&j| z[j].abs()).collect();
    let order = sorted_order(&absz, &wj);
    let ratios: Vec<f64> = order.iter().map(|&p| absz[p] / wj[p]).collect();
    let invalid_sample = || GradientSample { grad: vec![0.0; d], valid: false };
    if ratios.windows(2).any(|r| close(r[0], r[1])) {
        return Ok(invalid_sample());
    }

    let n = order.len();
    let mut lin = 0.0;
    let mut quad = a2;
    let mut m = n + 1;
    let mut prev_b: Option<f64> = None;
    for l in 0..=n {
        let b = if l < n {
            lin - quad / wj[order[l]] * absz[order[l]]
        } else {
            lin
        };
        if close(az0, b) || prev_b.is_some_and(|p| close(az0, p)) {
            return Ok(invalid_sample());
        }
        if az0 <= b {
            m = l;
            break;
        }
        if l < n {
            let p = order[l];
            lin += wj[p] * absz[p];
            quad += wj[p] * wj[p];
        }
        prev_b = Some(b);
    }

    let mut grad = vec![0.0; d];
    if m == n + 1 {
        // Interior: π = z near w, so the squared norm does not move.
        return Ok(GradientSample { grad, valid: true });
    }
    let t = (s_on + lin) / quad;
    let apex = z0 + a * t;
    for &s in support {
        let dz0 = -z[s] / a - z0 * ws[s] / a2;
        let da = ws[s] / a;
        grad[s] = 2.0 * apex * (dz0 + t * da) - 2.0 * z0 * dz0;
    }
    for &p in &order[..m] {
        grad[complement[p]] = -2.0 * t * (absz[p] - wj[p] * t);
    }
    Ok(GradientSample { grad, valid: true })
}

/// Monte Carlo estimate of `∇_w δ̄(w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n: u64,
    /// Samples rejected by the strictness guard and drawn again.
    pub redraws: u64,
}

impl GradientEstimate {
    pub fn norm(&self) -> f64 {
        self.mean.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Gradient of one random cone at one fresh Gaussian `z`; redraws `z` on ties.
fn sample_gradient<R: Rng + ?Sized>(
    dist: &SupportDistribution,
    w: &WeightVector,
    rng: &mut R,
    redraws: &mut u64,
) -> Vec<f64> {
    let d = w.len();
    let support = dist.sample_support(rng);
    if support.is_empty() || support.len() == d {
        // {0} and halfspaces have w-independent statistical dimension.
        return vec![0.0; d];
    }
    loop {
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let s = gradient_sample(&support, w, &z).expect("valid support");
        if s.valid {
            return s.grad;
        }
        *redraws += 1;
    }
}

pub fn estimate_gradient(
    dist: &SupportDistribution,
    w: &WeightVector,
    n: usize,
    seed: RngSeed,
) -> Result<GradientEstimate> {
    let d = w.len();
    if dist.dim() != d {
        return Err(Error::DimensionMismatch { expected: dist.dim(), got: d });
    }
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    let parts = run_batched(n, seed, |rng, len| {
        let mut acc = vec![Moments::default(); d];
        let mut redraws = 0;
        for _ in 0..len {
            let g = sample_gradient(dist, w, rng, &mut redraws);
            acc.iter_mut().zip(g).for_each(|(m, x)| m.push(x));
        }
        (acc, redraws)
    });
    let mut acc = vec![Moments::default(); d];
    let mut redraws = 0;
    for (part, r) in parts {
        acc = acc.into_iter().zip(part).map(|(a, b)| a.merge(b)).collect();
        redraws += r;
    }
    Ok(GradientEstimate {
        mean: acc.iter().map(|m| m.mean).collect(),
        stderr: acc.iter().map(|m| m.stderr()).collect(),
        n: n as u64,
        redraws,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentConfig {
    pub n_grad_samples: usize,
    pub n_eval_samples: usize,
    pub initial_step: f64,
    pub max_iters: usize,
    pub min_step: f64,
    pub seed: RngSeed,
    /// Evaluate every candidate on the same fixed sample as the start point.
    pub common_random_numbers: bool,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            n_grad_samples: 20_000,
            n_eval_samples: 20_000,
            initial_step: 1.0,
            max_iters: 20,
            min_step: 1e-4,
            seed: RngSeed::new(0),
            common_random_numbers: true,
        }
    }
}

impl DescentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grad_samples == 0 || self.n_eval_samples == 0 || self.max_iters == 0 {
            return Err(invalid("descent", "sample counts and max_iters must be positive"));
        }
        if !(self.min_step > 0.0 && self.initial_step > self.min_step && self.initial_step.is_finite()) {
            return Err(invalid("descent", "need 0 < min_step < initial_step"));
        }
        Ok(())
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct DescentStep {
    pub iter: usize,
    pub weights: WeightVector,
    /// Step size that produced this iterate; zero for the starting point.
    pub step: f64,
    pub delta: DeltaEstimate,
    /// Norm of the gradient estimate taken at the previous iterate.
    pub gradient_norm: f64,
    /// Candidates rejected before this one was accepted.
    pub halvings: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    MaxIterations,
    StepBelowMinimum,
    ZeroGradient,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::MaxIterations => "max-iterations",
            Termination::StepBelowMinimum => "step-below-minimum",
            Termination::ZeroGradient => "zero-gradient",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentResult {
    pub trajectory: Vec<DescentStep>,
    pub termination: Termination,
}

impl DescentResult {
    pub fn final_weights(&self) -> &WeightVector {
        &self.trajectory.last().expect("trajectory holds the start").weights
    }

    /// Number of accepted steps.
    pub fn accepted(&self) -> usize {
        self.trajectory.len() - 1
    }
}

/// Largest step `≤ cap` keeping `w - τ g ≥ WEIGHT_FLOOR`.
fn feasible_step(w: &[f64], g: &[f64], cap: f64) -> f64 {
    w.iter().zip(g).fold(cap, |tau, (&wi, &gi)| {
        if gi > 0.0 {
            tau.min((wi - WEIGHT_FLOOR) / gi)
        } else {
            tau
        }
    })
}

/// Backtracking steepest descent from `w0`.
pub fn descend(dist: &SupportDistribution, w0: &WeightVector, cfg: &DescentConfig) -> Result<DescentResult> {
    cfg.validate()?;
    let eval_root = cfg.seed.named("eval");
    let grad_root = cfg.seed.named("grad");
    let eval_seed = |it: usize| {
        if cfg.common_random_numbers {
            eval_root
        } else {
            eval_root.substream(it as u64)
        }
    };

    let mut w = w0.clone();
    let mut current = estimate_expected_delta(dist, &w, cfg.n_eval_samples, DeltaMode::SquaredNorm, eval_seed(0))?;
    let mut trajectory = vec![DescentStep {
        iter: 0,
        weights: w.clone(),
        step: 0.0,
        delta: current,
        gradient_norm: 0.0,
        halvings: 0,
    }];
    let mut candidates_tried = 0;

    for it in 1..=cfg.max_iters {
        let grad = estimate_gradient(dist, &w, cfg.n_grad_samples, grad_root.substream(it as u64))?;
        if grad.mean.iter().all(|&g| g == 0.0) {
            return Ok(DescentResult { trajectory, termination: Termination::ZeroGradient });
        }
        let mut tau = feasible_step(w.as_slice(), &grad.mean, cfg.initial_step);
        let mut halvings = 0;
        loop {
            if !(tau >= cfg.min_step) {
                return Ok(DescentResult { trajectory, termination: Termination::StepBelowMinimum });
            }
            candidates_tried += 1;
            let cand = WeightVector::new(
                w.as_slice()
                    .iter()
                    .zip(&grad.mean)
                    .map(|(wi, gi)| (wi - tau * gi).max(WEIGHT_FLOOR))
                    .collect(),
            )?;
            let seed = if cfg.common_random_numbers {
                eval_seed(it)
            } else {
                eval_root.substream(1_000_000 + candidates_tried)
            };
            let est = estimate_expected_delta(dist, &cand, cfg.n_eval_samples, DeltaMode::SquaredNorm, seed)?;
            let accepted = (est.mean < current.mean - current.stderr).then_some(est);
            if let Some(est) = accepted {
                log::debug!("iteration {it}: step {tau:.3e}, delta {:.4} -> {:.4}", current.mean, est.mean);
                w = cand;
                current = est;
                trajectory.push(DescentStep {
                    iter: it,
                    weights: w.clone(),
                    step: tau,
                    delta: current,
                    gradient_norm: grad.norm(),
                    halvings,
                });
                break;
            }
            tau *= 0.5;
            halvings += 1;
        }
    }
    Ok(DescentResult { trajectory, termination: Termination::MaxIterations })
}
