//! Dense primal-dual interior point method for standard-form linear programs
//!
//! ```text
//! minimise cᵀx  subject to  Bx = b,  x ≥ 0
//! ```
//!
//! using Mehrotra's predictor-corrector on the normal equations.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{invalid, Error, Result};

pub const DEFAULT_LP_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 200;

/// Iterates beyond this norm are taken as evidence of infeasibility.
const DIVERGENCE: f64 = 1e13;

/// Fraction of the step to the boundary.
const STEP_DAMPING: f64 = 0.995;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmOptions {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for IpmOptions {
    fn default() -> Self {
        Self { tol: DEFAULT_LP_TOL, max_iters: DEFAULT_MAX_ITERS }
    }
}

/// Relative KKT residuals of a primal-dual point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `‖Bx − b‖ / (1 + ‖b‖)`.
    pub primal: f64,
    /// `‖Bᵀy + s − c‖ / (1 + ‖c‖)`.
    pub dual: f64,
    /// `|cᵀx − bᵀy| / (1 + |cᵀx|)`.
    pub gap: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub s: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub residuals: KktResiduals,
}

fn residuals(
    bm: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
    s: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>, KktResiduals) {
    let rp = b - bm * x;
    let rd = c - bm.tr_mul(y) - s;
    let cx = c.dot(x);
    let by = b.dot(y);
    let kkt = KktResiduals {
        primal: rp.norm() / (1.0 + b.norm()),
        dual: rd.norm() / (1.0 + c.norm()),
        gap: (cx - by).abs() / (1.0 + cx.abs()),
    };
    (rp, rd, kkt)
}

/// Cholesky factor of a symmetric positive (semi)definite matrix, adding a
/// growing diagonal shift until the factorisation succeeds.
fn factor(mut m: DMatrix<f64>) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    let n = m.nrows();
    let scale = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    let mut shift = 0.0;
    for _ in 0..12 {
        if let Some(ch) = Cholesky::new(m.clone()) {
            return Ok(ch);
        }
        let next = if shift == 0.0 { 1e-14 * scale } else { shift * 100.0 };
        for i in 0..n {
            m[(i, i)] += next - shift;
        }
        shift = next;
    }
    Err(Error::Factorization)
}

/// Largest `α ∈ (0, 1]` with `v + α dv ≥ 0`, damped.
fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    let mut alpha: f64 = 1.0;
    for (vi, di) in v.iter().zip(dv.iter()) {
        if *di < 0.0 {
            alpha = alpha.min(-vi / di);
        }
    }
    alpha
}

struct Direction {
    dx: DVector<f64>,
    dy: DVector<f64>,
    ds: DVector<f64>,
}

/// Solves the Newton system for `S dx + X ds = rc` given the factored normal matrix.
fn newton(
    bm: &DMatrix<f64>,
    chol: &Cholesky<f64, nalgebra::Dyn>,
    dscale: &DVector<f64>,
    s: &DVector<f64>,
    rp: &DVector<f64>,
    rd: &DVector<f64>,
    rc: &DVector<f64>,
) -> Direction {
    let rhs_x = rc.component_div(s) - dscale.component_mul(rd);
    let dy = chol.solve(&(rp - bm * &rhs_x));
    let ds = rd - bm.tr_mul(&dy);
    let dx = rc.component_div(s) - dscale.component_mul(&ds);
    Direction { dx, dy, ds }
}

/// Mehrotra's starting point heuristic.
fn starting_point(
    bm: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let gram = factor(bm * bm.transpose())?;
    let x = bm.tr_mul(&gram.solve(b));
    let y = gram.solve(&(bm * c));
    let s = c - bm.tr_mul(&y);
    let dx = (-1.5 * x.min()).max(0.0);
    let ds = (-1.5 * s.min()).max(0.0);
    let x = x.add_scalar(dx);
    let s = s.add_scalar(ds);
    let xs = x.dot(&s);
    let x_shift = 0.5 * xs / s.sum();
    let s_shift = 0.5 * xs / x.sum();
    // Guard the degenerate x = 0 or s = 0 starts.
    let x = x.add_scalar(if x_shift.is_finite() { x_shift } else { 0.0 }).map(|v| v.max(1e-4));
    let s = s.add_scalar(if s_shift.is_finite() { s_shift } else { 0.0 }).map(|v| v.max(1e-4));
    Ok((x, y, s))
}

/// Solves `min cᵀx, Bx = b, x ≥ 0`. `B` must have full row rank.
pub fn solve_standard_form(
    bm: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
    opts: IpmOptions,
) -> Result<LpSolution> {
    let (m, n) = bm.shape();
    if b.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: b.len() });
    }
    if c.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: c.len() });
    }
    if m == 0 || n == 0 {
        return Err(invalid("lp", "empty constraint matrix"));
    }
    if !(opts.tol > 0.0) || opts.max_iters == 0 {
        return Err(invalid("lp", "tolerance and iteration limit must be positive"));
    }

    let (mut x, mut y, mut s) = starting_point(bm, b, c)?;
    let nf = n as f64;
    let mut last = None;
    for iter in 0..=opts.max_iters {
        let (rp, rd, kkt) = residuals(bm, b, c, &x, &y, &s);
        if kkt.primal <= opts.tol && kkt.dual <= opts.tol && kkt.gap <= opts.tol {
            return Ok(LpSolution {
                objective: c.dot(&x),
                x,
                y,
                s,
                iterations: iter,
                residuals: kkt,
            });
        }
        if x.norm() > DIVERGENCE {
            return Err(Error::Unbounded);
        }
        if y.norm() > DIVERGENCE || s.norm() > DIVERGENCE {
            return Err(Error::Infeasible);
        }
        last = Some(kkt);
        if iter == opts.max_iters {
            break;
        }

        let mu = x.dot(&s) / nf;
        let dscale = x.component_div(&s);
        let mut scaled = bm.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= dscale[j];
        }
        let chol = factor(scaled * bm.transpose())?;

        let rc_aff = -x.component_mul(&s);
        let aff = newton(bm, &chol, &dscale, &s, &rp, &rd, &rc_aff);
        let ap = max_step(&x, &aff.dx);
        let ad = max_step(&s, &aff.ds);
        let mu_aff = (&x + ap * &aff.dx).dot(&(&s + ad * &aff.ds)) / nf;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        let rc = rc_aff - aff.dx.component_mul(&aff.ds) + DVector::from_element(n, sigma * mu);
        let dir = newton(bm, &chol, &dscale, &s, &rp, &rd, &rc);
        let ap = (STEP_DAMPING * max_step(&x, &dir.dx)).min(1.0);
        let ad = (STEP_DAMPING * max_step(&s, &dir.ds)).min(1.0);
        x += ap * &dir.dx;
        y += ad * &dir.dy;
        s += ad * &dir.ds;
    }
    let kkt = last.expect("at least one iteration ran");
    Err(Error::MaxIterations {
        iterations: opts.max_iters,
        primal: kkt.primal,
        dual: kkt.dual,
        gap: kkt.gap,
    })
}
