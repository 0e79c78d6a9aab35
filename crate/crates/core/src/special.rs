//! Gaussian tail integrals.
//!
//! With `φ(u) = exp(-u²/2)` (unnormalised):
//!
//! * `Q(λ)  = ∫_λ^∞ φ(u) du`
//! * `J₁(λ) = ∫_λ^∞ (u - λ) φ(u) du = φ(λ) - λ Q(λ)`
//! * `J₂(λ) = ∫_λ^∞ (u - λ)² φ(u) du = (1 + λ²) Q(λ) - λ φ(λ)`
//!
//! The closed forms cancel badly in the tail, so for `λ ≥ 1.5` the three
//! values are taken from the Laplace continued fraction of the Mills ratio
//! instead, where every term is a product of positive factors.

use std::f64::consts::FRAC_1_SQRT_2;

/// `sqrt(π/2)`, the value of `Q(0)` and `J₂(0)`.
pub const SQRT_HALF_PI: f64 = 1.253_314_137_315_500_3;

/// `sqrt(2/π)`.
pub const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

const CF_SWITCH: f64 = 1.5;
const CF_DEPTH: usize = 200;

/// Complementary error function.
#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Returns `(R, R·T₁, R·T₁·T₂)` where `R` is the Mills ratio and `Tₙ` the
/// tails of its continued fraction `R = 1/(λ + 1/(λ + 2/(λ + 3/(…))))`.
fn mills_moments(lambda: f64) -> (f64, f64, f64) {
    let mut tail = 0.0;
    let mut t2 = 0.0;
    for n in (1..=CF_DEPTH).rev() {
        tail = n as f64 / (lambda + tail);
        if n == 2 {
            t2 = tail;
        }
    }
    let t1 = tail;
    let r = 1.0 / (lambda + t1);
    (r, r * t1, r * t1 * t2)
}

/// `Q(λ) = ∫_λ^∞ exp(-u²/2) du`.
pub fn gaussian_q(lambda: f64) -> f64 {
    if lambda >= CF_SWITCH {
        (-0.5 * lambda * lambda).exp() * mills_moments(lambda).0
    } else {
        SQRT_HALF_PI * erfc(lambda * FRAC_1_SQRT_2)
    }
}

/// `J₁(λ) = ∫_λ^∞ (u - λ) exp(-u²/2) du`.
pub fn moment_j1(lambda: f64) -> f64 {
    if lambda >= CF_SWITCH {
        (-0.5 * lambda * lambda).exp() * mills_moments(lambda).1
    } else {
        (-0.5 * lambda * lambda).exp() - lambda * gaussian_q(lambda)
    }
}

/// `J₂(λ) = ∫_λ^∞ (u - λ)² exp(-u²/2) du`.
pub fn moment_j2(lambda: f64) -> f64 {
    if lambda >= CF_SWITCH {
        (-0.5 * lambda * lambda).exp() * mills_moments(lambda).2
    } else {
        (1.0 + lambda * lambda) * gaussian_q(lambda) - lambda * (-0.5 * lambda * lambda).exp()
    }
}
