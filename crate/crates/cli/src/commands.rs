//! One function per subcommand. Each draws from its own named substream of
//! the master seed, so commands can run in any order.

use std::path::PathBuf;

use anyhow::{ensure, Result};
use conecs_core::estimators::{cluster_by_support, estimate_intrinsic_volumes, per_support_delta_histogram};
use conecs_core::gradient::descend;
use conecs_core::recovery::{phase_transition_curve, PhaseOptions};
use conecs_core::weights::{weights_from_beta, DEFAULT_LAMBDA_TOL};
use conecs_core::{DescentResult, RngSeed, SupportDistribution, VolumeEstimate, WeightVector};
use serde::Serialize;

use crate::config::{DescentInit, LoadedConfig, WeightSource};
use crate::output::{CsvOut, Provenance};

/// Everything a command needs besides its own config section.
pub struct RunContext {
    pub config: LoadedConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub success_tol: f64,
    pub lp_tol: f64,
}

impl RunContext {
    pub fn new(config: LoadedConfig, seed: Option<u64>, out_dir: PathBuf, success_tol: f64, lp_tol: f64) -> Result<Self> {
        ensure!(success_tol > 0.0, "--success-tol must be positive");
        ensure!(lp_tol > 0.0, "--lp-tol must be positive");
        let seed = seed.or(config.config.seed).unwrap_or(0);
        Ok(Self { config, seed, out_dir, success_tol, lp_tol })
    }

    fn root(&self) -> RngSeed {
        RngSeed::new(self.seed)
    }

    fn provenance(&self) -> Provenance {
        Provenance::new(&self.config.text, self.seed, self.success_tol, self.lp_tol)
    }

    fn csv(&self, name: &str, extra: &[String], columns: &[&str]) -> Result<CsvOut> {
        CsvOut::create(&self.out_dir, name, &self.provenance(), extra, columns)
    }

    fn lambda_tol(&self) -> f64 {
        match self.config.config.weights {
            WeightSource::Theorem { lambda_tol } => lambda_tol,
            _ => DEFAULT_LAMBDA_TOL,
        }
    }

    fn run_descent(&self, dist: &SupportDistribution, seed: RngSeed) -> Result<DescentResult> {
        let section = &self.config.config.descend;
        let w0 = match section.init {
            DescentInit::Unit => WeightVector::ones(dist.dim()),
            DescentInit::Theorem => weights_from_beta(&dist.beta()?, self.lambda_tol())?,
        };
        Ok(descend(dist, &w0, &section.to_config(seed))?)
    }

    /// The configured weights, running a descent first if asked to.
    fn weights(&self, dist: &SupportDistribution) -> Result<WeightVector> {
        match self.config.static_weights(dist)? {
            Some(w) => Ok(w),
            None => {
                let res = self.run_descent(dist, self.root().named("weights"))?;
                log::info!("descent for weights: {} accepted steps, {}", res.accepted(), res.termination.as_str());
                Ok(res.final_weights().clone())
            }
        }
    }

    fn volumes(&self, dist: &SupportDistribution, w: &WeightVector) -> Result<VolumeEstimate> {
        let s = &self.config.config.volumes;
        Ok(estimate_intrinsic_volumes(dist, w, s.n_supports, s.n_points, self.root().named("volumes"))?)
    }
}

pub fn weights(ctx: &RunContext) -> Result<PathBuf> {
    let dist = ctx.config.distribution()?;
    let beta = dist.beta()?;
    let w = weights_from_beta(&beta, ctx.lambda_tol())?;
    let mut out = ctx.csv("weights.csv", &[], &["index", "beta", "lambda"])?;
    for (i, (b, l)) in beta.as_slice().iter().zip(w.as_slice()).enumerate() {
        out.row((i, b, l))?;
    }
    out.finish()
}

#[derive(Serialize)]
struct VolumeRow {
    k: usize,
    count: u64,
    nu_bar: f64,
    t_bar: f64,
    h_bar: f64,
    ci: f64,
}

pub fn volumes(ctx: &RunContext) -> Result<PathBuf> {
    let dist = ctx.config.distribution()?;
    let w = ctx.weights(&dist)?;
    let v = ctx.volumes(&dist, &w)?;
    let extra = [format!("n={}, mean_dimension={}", v.n, v.mean_dimension())];
    let mut out = ctx.csv("volumes.csv", &extra, &["k", "count", "nu_bar", "t_bar", "h_bar", "ci"])?;
    for k in 0..=v.dim() {
        out.row(VolumeRow {
            k,
            count: v.counts[k],
            nu_bar: v.nu_bar[k],
            t_bar: v.t_bar[k],
            h_bar: v.h_bar[k],
            ci: v.ci_half_width[k],
        })?;
    }
    out.finish()
}

/// Writes `phase.csv` and the companion `predicted.csv`; returns both paths.
pub fn phase(ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let dist = ctx.config.distribution()?;
    let w = ctx.weights(&dist)?;
    let section = &ctx.config.config.phase;
    let grid = ctx.config.m_grid(dist.dim())?;
    let opts = PhaseOptions {
        trials: section.trials,
        magnitudes: section.magnitudes,
        lp_tol: ctx.lp_tol,
        success_tol: ctx.success_tol,
    };
    let curve = phase_transition_curve(&dist, &w, &grid, &opts, ctx.root().named("phase"))?;
    let failures: usize = curve.iter().map(|p| p.solver_failures).sum();
    if failures > 0 {
        log::warn!("{failures} LP solves failed and were counted as unsuccessful");
    }
    let mut out = ctx.csv("phase.csv", &[], &["m", "trials", "successes", "frequency"])?;
    for p in &curve {
        out.row((p.m, p.trials, p.successes, p.frequency))?;
    }
    let phase_path = out.finish()?;

    let v = ctx.volumes(&dist, &w)?;
    let mut out = ctx.csv("predicted.csv", &[], &["m", "predicted", "ci"])?;
    for &m in &grid {
        out.row((m, 1.0 - 2.0 * v.half_tail(m + 1), 2.0 * v.half_tail_ci(m + 1)))?;
    }
    Ok(vec![phase_path, out.finish()?])
}

/// Writes `trajectory.csv` and `final_weights.csv`.
pub fn descend_cmd(ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let dist = ctx.config.distribution()?;
    let res = ctx.run_descent(&dist, ctx.root().named("descend"))?;
    log::info!("descent: {} accepted steps, {}", res.accepted(), res.termination.as_str());
    let d = dist.dim();
    let mut columns: Vec<String> = ["iter", "step", "delta", "stderr", "gradient_norm", "halvings"]
        .map(String::from)
        .to_vec();
    columns.extend((0..d).map(|i| format!("w{i}")));
    let col_refs: Vec<&str> = columns.iter().map(String::as_str).collect();
    let extra = [format!("termination={}, accepted={}", res.termination.as_str(), res.accepted())];
    let mut out = ctx.csv("trajectory.csv", &extra, &col_refs)?;
    for s in &res.trajectory {
        let mut fields = vec![
            s.iter.to_string(),
            s.step.to_string(),
            s.delta.mean.to_string(),
            s.delta.stderr.to_string(),
            s.gradient_norm.to_string(),
            s.halvings.to_string(),
        ];
        fields.extend(s.weights.as_slice().iter().map(f64::to_string));
        out.record(&fields)?;
    }
    let traj = out.finish()?;

    let mut out = ctx.csv("final_weights.csv", &[], &["index", "weight"])?;
    for (i, w) in res.final_weights().as_slice().iter().enumerate() {
        out.row((i, w))?;
    }
    Ok(vec![traj, out.finish()?])
}

fn mask(support: &[usize], d: usize) -> String {
    let mut m = vec![b'0'; d];
    support.iter().for_each(|&i| m[i] = b'1');
    String::from_utf8(m).expect("ascii")
}

/// Writes `deltahist.csv` (one row per sampled support) and
/// `deltaclusters.csv` (rows grouped by identical support).
pub fn histogram(ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let dist = ctx.config.distribution()?;
    let w = ctx.weights(&dist)?;
    let s = &ctx.config.config.histogram;
    let d = dist.dim();
    let h = per_support_delta_histogram(&dist, &w, s.n_supports, s.n_points, s.mode, ctx.root().named("histogram"))?;
    let mut out = ctx.csv("deltahist.csv", &[], &["sample", "k", "support", "delta", "stderr"])?;
    for (i, e) in h.iter().enumerate() {
        out.row((i, e.support.len(), mask(&e.support, d), e.delta.mean, e.delta.stderr))?;
    }
    let hist = out.finish()?;

    let mut clusters = cluster_by_support(&h);
    clusters.sort_by(|a, b| a.mean.total_cmp(&b.mean));
    let mut out = ctx.csv("deltaclusters.csv", &[], &["support", "count", "mean", "stderr"])?;
    for c in &clusters {
        out.row((mask(&c.support, d), c.count, c.mean, c.stderr))?;
    }
    Ok(vec![hist, out.finish()?])
}

