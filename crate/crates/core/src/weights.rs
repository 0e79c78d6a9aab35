//! Weight design from marginal support probabilities.
//!
//! Averaging the Gaussian-distance bound on the statistical dimension over
//! the support distribution gives a separable, convex function of
//! `λ_i = τ w_i` whose per-coordinate stationarity condition is
//!
//! ```text
//! λ β / (1 - β) = sqrt(2/π) J₁(λ)
//! ```
//!
//! The left side increases from 0 and the right side decreases, so the root
//! is unique and bisection always finds it.

use serde::{Deserialize, Serialize};

use crate::cone::{validate_support, WeightVector};
use crate::error::{invalid, Error, Result};
use crate::special::{moment_j1, moment_j2, SQRT_2_OVER_PI};

/// Default tolerance for the weight equation.
pub const DEFAULT_LAMBDA_TOL: f64 = 1e-10;

/// Range that raw marginals are clipped into.
pub const BETA_CLIP: f64 = 1e-6;

/// Marginal inclusion probabilities `β_i = P(i ∈ supp X₀)`, each in `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BetaVector(Vec<f64>);

impl BetaVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("beta", "empty vector"));
        }
        for (index, &value) in values.iter().enumerate() {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::InvalidBeta { index, value });
            }
        }
        Ok(Self(values))
    }

    /// Clips raw frequencies into `[1e-6, 1 - 1e-6]`, warning for every
    /// coordinate that had to move.
    pub fn clipped(values: Vec<f64>) -> Result<Self> {
        let mut out = Vec::with_capacity(values.len());
        for (index, value) in values.into_iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidBeta { index, value });
            }
            let c = value.clamp(BETA_CLIP, 1.0 - BETA_CLIP);
            if c != value {
                log::warn!("beta[{index}] = {value} clipped to {c}");
            }
            out.push(c);
        }
        Self::new(out)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `Σ β_i`, the expected support size.
    pub fn expected_support_size(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl TryFrom<Vec<f64>> for BetaVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<BetaVector> for Vec<f64> {
    fn from(b: BetaVector) -> Self {
        b.0
    }
}

/// `λ β/(1-β) - sqrt(2/π) J₁(λ)`; strictly increasing in `λ`.
pub fn lambda_residual(beta: f64, lambda: f64) -> f64 {
    lambda * beta / (1.0 - beta) - SQRT_2_OVER_PI * moment_j1(lambda)
}

/// Solves the weight equation for one coordinate by bisection.
pub fn solve_lambda(beta: f64, tol: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidBeta { index: 0, value: beta });
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while lambda_residual(beta, hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    let mut best = (f64::INFINITY, hi);
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        let r = lambda_residual(beta, mid);
        if r.abs() < best.0 {
            best = (r.abs(), mid);
        }
        if r.abs() <= tol || mid <= lo || mid >= hi {
            break;
        }
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best.1)
}

/// Weights minimising the averaged bound, with the free scale `τ` fixed to 1.
pub fn weights_from_beta(beta: &BetaVector, tol: f64) -> Result<WeightVector> {
    let mut cache: Vec<(f64, f64)> = Vec::new();
    let mut out = Vec::with_capacity(beta.len());
    for &b in beta.as_slice() {
        let lambda = match cache.iter().find(|(key, _)| *key == b) {
            Some(&(_, l)) => l,
            None => {
                let l = solve_lambda(b, tol)?;
                cache.push((b, l));
                l
            }
        };
        out.push(lambda);
    }
    WeightVector::new(out)
}

/// Bound value together with the `τ` that attains it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundValue {
    pub value: f64,
    /// `f64::INFINITY` when the infimum is only approached (empty support).
    pub tau: f64,
}

/// `sqrt(2/π) J₂(λ)`, exactly 1 at `λ = 0`.
fn off_support_term(lambda: f64) -> f64 {
    if lambda == 0.0 {
        1.0
    } else {
        SQRT_2_OVER_PI * moment_j2(lambda)
    }
}

fn support_bound_at(support: &[usize], w: &[f64], tau: f64) -> f64 {
    let mut on = vec![false; w.len()];
    support.iter().for_each(|&i| on[i] = true);
    let mut value = support.len() as f64;
    for (i, &wi) in w.iter().enumerate() {
        if on[i] {
            value += tau * tau * wi * wi;
        } else {
            value += off_support_term(tau * wi);
        }
    }
    value
}

fn support_bound_slope(support: &[usize], w: &[f64], tau: f64) -> f64 {
    let mut on = vec![false; w.len()];
    support.iter().for_each(|&i| on[i] = true);
    w.iter()
        .enumerate()
        .map(|(i, &wi)| {
            if on[i] {
                2.0 * tau * wi * wi
            } else {
                -2.0 * SQRT_2_OVER_PI * wi * moment_j1(tau * wi)
            }
        })
        .sum()
}

/// Minimises a convex function of `τ ≥ 0` given its derivative, by bisection
/// on the derivative to relative precision `1e-10` in `τ`.
fn minimise_convex(slope: impl Fn(f64) -> f64) -> f64 {
    if slope(0.0) >= 0.0 {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while slope(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The Gaussian-distance bound for a single support evaluated at `τ`.
pub fn delta_bound_support_at(support: &[usize], w: &WeightVector, tau: f64) -> Result<f64> {
    validate_support(support, w.len())?;
    Ok(support_bound_at(support, w.as_slice(), tau))
}

/// `inf_τ |I| + τ² Σ_{I} w_i² + Σ_{i∉I} sqrt(2/π) J₂(τ w_i)`.
pub fn delta_bound_support(support: &[usize], w: &WeightVector) -> Result<BoundValue> {
    validate_support(support, w.len())?;
    let w = w.as_slice();
    if support.is_empty() {
        return Ok(BoundValue {
            value: 0.0,
            tau: f64::INFINITY,
        });
    }
    let tau = minimise_convex(|t| support_bound_slope(support, w, t));
    Ok(BoundValue {
        value: support_bound_at(support, w, tau),
        tau,
    })
}

fn check_lengths(beta: &BetaVector, w: &WeightVector) -> Result<()> {
    if beta.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: beta.len(),
            got: w.len(),
        });
    }
    Ok(())
}

/// Upper bound on the expected statistical dimension at scale `τ`.
pub fn expected_delta_upper_bound(beta: &BetaVector, w: &WeightVector, tau: f64) -> Result<f64> {
    check_lengths(beta, w)?;
    let per_coord: f64 = beta
        .as_slice()
        .iter()
        .zip(w.as_slice())
        .map(|(&b, &wi)| {
            let l = tau * wi;
            b * l * l - (1.0 - b) * (1.0 - off_support_term(l))
        })
        .sum();
    // Σβ + Σ(1-β) = d, written so that τ = 0 gives d exactly.
    Ok(beta.len() as f64 + per_coord)
}

/// `∂/∂τ` of [`expected_delta_upper_bound`].
pub fn expected_delta_bound_slope(beta: &BetaVector, w: &WeightVector, tau: f64) -> Result<f64> {
    check_lengths(beta, w)?;
    Ok(beta
        .as_slice()
        .iter()
        .zip(w.as_slice())
        .map(|(&b, &wi)| {
            let l = tau * wi;
            2.0 * wi * (b * l - (1.0 - b) * SQRT_2_OVER_PI * moment_j1(l))
        })
        .sum())
}

/// [`expected_delta_upper_bound`] minimised over `τ ≥ 0`.
pub fn minimized_expected_delta_bound(beta: &BetaVector, w: &WeightVector) -> Result<BoundValue> {
    check_lengths(beta, w)?;
    let tau = minimise_convex(|t| expected_delta_bound_slope(beta, w, t).expect("lengths checked"));
    Ok(BoundValue {
        value: expected_delta_upper_bound(beta, w, tau)?,
        tau,
    })
}
