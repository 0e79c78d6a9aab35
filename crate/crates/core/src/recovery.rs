//! Weighted basis pursuit with Gaussian measurements.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cone::WeightVector;
use crate::distributions::SupportDistribution;
use crate::error::{invalid, Error, Result};
use crate::lp::{solve_standard_form, IpmOptions, DEFAULT_LP_TOL, DEFAULT_MAX_ITERS};
use crate::rng::RngSeed;

pub const DEFAULT_SUCCESS_TOL: f64 = 1e-5;

/// An `m × d` matrix with i.i.d. standard normal entries.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementEnsemble {
    pub a: DMatrix<f64>,
    pub seed: RngSeed,
}

impl MeasurementEnsemble {
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn d(&self) -> usize {
        self.a.ncols()
    }
}

fn gaussian_matrix<R: Rng + ?Sized>(m: usize, d: usize, rng: &mut R) -> DMatrix<f64> {
    // Row-major fill so the first rows of a taller matrix agree.
    DMatrix::from_row_iterator(m, d, (0..m * d).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

pub fn sample_gaussian_matrix(m: usize, d: usize, seed: RngSeed) -> Result<MeasurementEnsemble> {
    if m == 0 || d == 0 {
        return Err(invalid("matrix", "m and d must be at least 1"));
    }
    Ok(MeasurementEnsemble {
        a: gaussian_matrix(m, d, &mut seed.rng()),
        seed,
    })
}

/// KKT residuals of the weighted basis pursuit LP, all relative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpResiduals {
    pub equality: f64,
    pub stationarity: f64,
    pub complementarity: f64,
}

impl BpResiduals {
    pub fn max(&self) -> f64 {
        self.equality.max(self.stationarity).max(self.complementarity)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpSolution {
    pub x_hat: Vec<f64>,
    pub objective: f64,
    pub kkt: BpResiduals,
    pub iterations: usize,
}

/// Solves `min Σ wᵢ|xᵢ|` subject to `Ax = y`.
///
/// Split as `x = x⁺ − x⁻` with both parts nonnegative, which is the
/// standard-form counterpart of `−t ≤ x ≤ t`.
pub fn solve_weighted_bp(a: &DMatrix<f64>, y: &[f64], w: &WeightVector, tol: f64) -> Result<BpSolution> {
    let (m, d) = a.shape();
    if w.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: w.len() });
    }
    if y.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: y.len() });
    }
    let mut bm = DMatrix::zeros(m, 2 * d);
    bm.view_mut((0, 0), (m, d)).copy_from(a);
    bm.view_mut((0, d), (m, d)).copy_from(&(-a));
    let c = DVector::from_iterator(2 * d, w.as_slice().iter().chain(w.as_slice()).copied());
    let b = DVector::from_column_slice(y);
    let sol = solve_standard_form(&bm, &b, &c, IpmOptions { tol, max_iters: DEFAULT_MAX_ITERS })?;
    let x_hat: Vec<f64> = (0..d).map(|i| sol.x[i] - sol.x[d + i]).collect();
    let objective = x_hat.iter().zip(w.as_slice()).map(|(x, wi)| wi * x.abs()).sum();
    Ok(BpSolution {
        x_hat,
        objective,
        kkt: BpResiduals {
            equality: sol.residuals.primal,
            stationarity: sol.residuals.dual,
            complementarity: sol.residuals.gap,
        },
        iterations: sol.iterations,
    })
}

/// `‖x̂ − x₀‖ / max(1, ‖x₀‖)`.
pub fn relative_error(x_hat: &[f64], x0: &[f64]) -> f64 {
    let diff: f64 = x_hat.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum();
    let norm: f64 = x0.iter().map(|v| v * v).sum();
    diff.sqrt() / norm.sqrt().max(1.0)
}

/// Inclusive: a relative error equal to `tol` counts as success.
pub fn is_success(x_hat: &[f64], x0: &[f64], tol: f64) -> bool {
    relative_error(x_hat, x0) <= tol
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryOutcome {
    pub x_hat: Vec<f64>,
    pub primal_objective: f64,
    pub kkt: BpResiduals,
    pub success: bool,
    pub rel_err: f64,
}

impl RecoveryOutcome {
    pub fn evaluate(sol: BpSolution, x0: &[f64], success_tol: f64) -> Self {
        let rel_err = relative_error(&sol.x_hat, x0);
        Self {
            success: rel_err <= success_tol,
            rel_err,
            primal_objective: sol.objective,
            kkt: sol.kkt,
            x_hat: sol.x_hat,
        }
    }
}

/// Solves for `y = A x₀` and scores the result.
pub fn recover(a: &DMatrix<f64>, x0: &[f64], w: &WeightVector, lp_tol: f64, success_tol: f64) -> Result<RecoveryOutcome> {
    if x0.len() != a.ncols() {
        return Err(Error::DimensionMismatch { expected: a.ncols(), got: x0.len() });
    }
    let y = a * DVector::from_column_slice(x0);
    let sol = solve_weighted_bp(a, y.as_slice(), w, lp_tol)?;
    Ok(RecoveryOutcome::evaluate(sol, x0, success_tol))
}

/// Magnitudes placed on the sampled support.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Magnitudes {
    /// Standard normal entries.
    #[default]
    Gaussian,
    /// All ones.
    Ones,
}

pub fn sample_signal<R: Rng + ?Sized>(dist: &SupportDistribution, magnitudes: Magnitudes, rng: &mut R) -> Vec<f64> {
    let mut x = vec![0.0; dist.dim()];
    for i in dist.sample_support(rng) {
        x[i] = match magnitudes {
            Magnitudes::Gaussian => rng.sample(StandardNormal),
            Magnitudes::Ones => 1.0,
        };
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseOptions {
    pub trials: usize,
    pub magnitudes: Magnitudes,
    pub lp_tol: f64,
    pub success_tol: f64,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        Self {
            trials: 100,
            magnitudes: Magnitudes::Gaussian,
            lp_tol: DEFAULT_LP_TOL,
            success_tol: DEFAULT_SUCCESS_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub m: usize,
    pub trials: usize,
    pub successes: usize,
    /// Trials whose solve returned an error; also counted as failures.
    pub solver_failures: usize,
    pub frequency: f64,
}

/// One recovery trial with its own `(A, x₀)` drawn from `seed`.
pub fn run_trial(
    dist: &SupportDistribution,
    w: &WeightVector,
    m: usize,
    opts: &PhaseOptions,
    seed: RngSeed,
) -> Result<RecoveryOutcome> {
    let mut rng = seed.rng();
    let x0 = sample_signal(dist, opts.magnitudes, &mut rng);
    let a = gaussian_matrix(m, dist.dim(), &mut rng);
    recover(&a, &x0, w, opts.lp_tol, opts.success_tol)
}

/// Empirical recovery frequency at each `m`. Trial `t` at `m` uses the
/// stream `seed.substream(m).substream(t)`.
pub fn phase_transition_curve(
    dist: &SupportDistribution,
    w: &WeightVector,
    m_grid: &[usize],
    opts: &PhaseOptions,
    seed: RngSeed,
) -> Result<Vec<PhasePoint>> {
    let d = dist.dim();
    if w.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: w.len() });
    }
    if opts.trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    if let Some(&m) = m_grid.iter().find(|&&m| m == 0 || m > d) {
        return Err(invalid("m_grid", format!("{m} is outside 1..={d}")));
    }
    Ok(m_grid
        .iter()
        .map(|&m| {
            let outcomes: Vec<Option<bool>> = (0..opts.trials)
                .into_par_iter()
                .map(|t| {
                    let trial_seed = seed.substream(m as u64).substream(t as u64);
                    match run_trial(dist, w, m, opts, trial_seed) {
                        Ok(out) => Some(out.success),
                        Err(e) => {
                            log::warn!("m = {m}, trial {t}: solve failed: {e}");
                            None
                        }
                    }
                })
                .collect();
            let successes = outcomes.iter().filter(|o| **o == Some(true)).count();
            let solver_failures = outcomes.iter().filter(|o| o.is_none()).count();
            PhasePoint {
                m,
                trials: opts.trials,
                successes,
                solver_failures,
                frequency: successes as f64 / opts.trials as f64,
            }
        })
        .collect())
}
