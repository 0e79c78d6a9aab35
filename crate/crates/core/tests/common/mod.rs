//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(rand_distr::StandardNormal)).collect()
}

/// Random support with `1 ≤ k ≤ d − 1`, sorted.
pub fn random_proper_support<R: Rng>(rng: &mut R, d: usize) -> Vec<usize> {
    let k = rng.random_range(1..d);
    let mut s = sample(rng, d, k).into_vec();
    s.sort_unstable();
    s
}

pub fn random_weights<R: Rng>(rng: &mut R, d: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Projection onto `{x : Σ_I wᵢxᵢ + Σ_J wⱼ|xⱼ| ≤ 0}` from its generators.
///
/// The cone is `L ⊕ cone{±eⱼ/wⱼ − y}` with `L = {v on I : Σ wᵢvᵢ = 0}` and
/// `y = w_I / ‖w_I‖²`. The conic part is solved by enumerating linearly
/// independent generator subsets (nonnegative least squares by brute force).
pub fn project_oracle(w: &[f64], support: &[usize], z: &[f64]) -> Vec<f64> {
    let d = w.len();
    let on: Vec<bool> = (0..d).map(|i| support.contains(&i)).collect();
    let a2: f64 = support.iter().map(|&i| w[i] * w[i]).sum();
    let dot: f64 = support.iter().map(|&i| w[i] * z[i]).sum();
    let mut lin = vec![0.0; d];
    let mut perp = z.to_vec();
    for &i in support {
        lin[i] = z[i] - dot / a2 * w[i];
        perp[i] = dot / a2 * w[i];
    }
    let mut gens: Vec<DVector<f64>> = Vec::new();
    for j in (0..d).filter(|&j| !on[j]) {
        for sign in [1.0, -1.0] {
            let mut g = DVector::zeros(d);
            g[j] = sign / w[j];
            for &i in support {
                g[i] = -w[i] / a2;
            }
            gens.push(g);
        }
    }
    let target = DVector::from_column_slice(&perp);
    let n = gens.len();
    let mut best = (target.norm_squared(), DVector::zeros(d));
    for mask in 1u32..(1 << n) {
        let cols: Vec<&DVector<f64>> = (0..n).filter(|b| mask >> b & 1 == 1).map(|b| &gens[b]).collect();
        if cols.len() > d {
            continue;
        }
        let g = DMatrix::from_columns(&cols.iter().map(|c| (*c).clone()).collect::<Vec<_>>());
        let gram = g.tr_mul(&g);
        let Some(ch) = gram.clone().cholesky() else { continue };
        // Reject near-dependent subsets.
        let svd = gram.singular_values();
        if svd.min() < 1e-10 * svd.max() {
            continue;
        }
        let c = ch.solve(&g.tr_mul(&target));
        if c.iter().any(|&v| v < -1e-13) {
            continue;
        }
        let p = &g * c;
        let r = (&target - &p).norm_squared();
        if r < best.0 {
            best = (r, p);
        }
    }
    (0..d).map(|i| lin[i] + best.1[i]).collect()
}

/// Minimises `cᵀx` over `Bx = b, x ≥ 0` by enumerating basic solutions.
/// Returns `None` if no basic feasible solution exists.
pub fn lp_vertex_enumeration(bm: &DMatrix<f64>, b: &DVector<f64>, c: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
    let (m, n) = bm.shape();
    assert!(m <= n, "more rows than columns");
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        let sub = bm.select_columns(&idx);
        if let Some(lu) = Some(sub.clone().full_piv_lu()).filter(|lu| lu.is_invertible()) {
            let sv = sub.singular_values();
            if sv.min() > 1e-10 * sv.max() {
                if let Some(xs) = lu.solve(b) {
                    let resid = (&sub * &xs - b).norm();
                    if xs.iter().all(|&v| v >= -1e-9) && resid <= 1e-9 * (1.0 + b.norm()) {
                        let mut x = DVector::zeros(n);
                        for (k, &j) in idx.iter().enumerate() {
                            x[j] = xs[k].max(0.0);
                        }
                        let cost = c.dot(&x);
                        if best.as_ref().is_none_or(|(bc, _)| cost < *bc) {
                            best = Some((cost, x));
                        }
                    }
                }
            }
        }
        // Next m-combination of 0..n in lexicographic order.
        let Some(i) = (0..m).rev().find(|&i| idx[i] < n - m + i) else {
            return best;
        };
        idx[i] += 1;
        for k in i + 1..m {
            idx[k] = idx[k - 1] + 1;
        }
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// `e^{λ²/2} ∫_λ^∞ (u − λ)^p e^{−u²/2} du = ∫_0^∞ s^p e^{−λs − s²/2} ds`,
/// by composite Gauss–Legendre on `[0, 40]`.
pub fn scaled_moment_quadrature(lambda: f64, p: i32) -> f64 {
    let rule = gauss_legendre(16);
    let panels = 4000;
    let h = 40.0 / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let mid = (k as f64 + 0.5) * h;
        let mut part = 0.0;
        for &(x, wt) in &rule {
            let s = mid + 0.5 * h * x;
            part += wt * s.powi(p) * (-lambda * s - 0.5 * s * s).exp();
        }
        total += 0.5 * h * part;
    }
    total
}

pub fn moment_quadrature(lambda: f64, p: i32) -> f64 {
    (-0.5 * lambda * lambda).exp() * scaled_moment_quadrature(lambda, p)
}

/// Exact statistical dimension of the planar descent cone for `I = {0}`.
pub fn wedge_delta(w_on: f64, w_off: f64) -> f64 {
    0.5 + 2.0 * (w_on / w_off).atan() / std::f64::consts::PI
}
