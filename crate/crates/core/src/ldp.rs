//! Exponential-moment analysis of the log-wealth ensemble.
//!
//! For checkpointed sums `S_t` over an ensemble of `M` paths, the scaled
//! cumulant generating function
//!
//! ```text
//! Lambda_hat(theta) = (1/t) * log( (1/M) * sum_i exp(theta * S_t^i) )
//! ```
//!
//! is estimated in log space (log-sum-exp, never raw exponentials), with a
//! leave-one-out jackknife standard error and an effective-sample-size
//! diagnostic. Points whose weights are carried by too few paths are marked
//! invalid rather than silently reported.
//!
//! The convex conjugate (rate function) is taken over the lower convex hull
//! of the valid points; slopes outside the achievable range produce an
//! infinite sentinel with a boundary flag instead of a misleading finite
//! value.

use crate::engine::{simulate, PathEnsemble, SimulationPlan};
use crate::error::{Error, Result};
use crate::model::MarketModel;
use crate::strategy::Strategy;
use rayon::prelude::*;

/// Default effective-sample-size floor below which a tilted estimate is
/// marked invalid.
pub const DEFAULT_ESS_MIN: f64 = 100.0;

/// One tilted-moment evaluation.
#[derive(Debug, Clone, Copy)]
struct TiltedPoint {
    /// `(1/t) * log mean exp(theta * S)`.
    lambda: f64,
    /// Effective sample size `(sum w)^2 / sum w^2`.
    ess: f64,
    /// Jackknife standard error of `lambda`.
    stderr: f64,
}

/// Log-domain statistics of the tilted mean `(1/n) sum exp(theta * s_i)`,
/// shared by the scaled-CGF and expected-utility estimators.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LseStats {
    /// `log mean exp(theta * s)`.
    pub log_mean: f64,
    /// Effective sample size `(sum w)^2 / sum w^2`.
    pub ess: f64,
    /// Leave-one-out jackknife standard error of `log_mean`; infinite when
    /// a single weight carries the whole sum.
    pub stderr_log: f64,
}

/// Log-sum-exp of `z`, returning `(lse, max)`.
fn log_sum_exp(z: &[f64]) -> (f64, f64) {
    let c = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !c.is_finite() {
        return (c, c);
    }
    let s: f64 = z.iter().map(|&v| (v - c).exp()).sum();
    (c + s.ln(), c)
}

/// Tilted mean of `exp(theta * s)` in log space with jackknife error bars.
pub(crate) fn lse_stats(s: &[f64], theta: f64) -> LseStats {
    let n = s.len() as f64;
    let z: Vec<f64> = s.iter().map(|&v| theta * v).collect();
    let c = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&v| (v - c).exp()).collect();
    let t1: f64 = e.iter().sum();
    let t2: f64 = e.iter().map(|&w| w * w).sum();
    let log_mean = t1.ln() + c - n.ln();
    let ess = t1 * t1 / t2;
    // Leave-one-out replicates; the removed weight can carry nearly all of
    // t1, in which case the jackknife honestly blows up.
    let mut mean_loo = 0.0;
    let mut loo = Vec::with_capacity(s.len());
    for &w in &e {
        let rest = t1 - w;
        if rest <= 0.0 {
            return LseStats { log_mean, ess, stderr_log: f64::INFINITY };
        }
        let l = rest.ln() + c - (n - 1.0).ln();
        mean_loo += l;
        loo.push(l);
    }
    mean_loo /= n;
    let var: f64 = loo.iter().map(|&l| (l - mean_loo) * (l - mean_loo)).sum::<f64>() * (n - 1.0)
        / n;
    LseStats { log_mean, ess, stderr_log: var.sqrt() }
}

/// Tilted evaluation at one `theta`, time-scaled.
fn tilted_point(s: &[f64], t: f64, theta: f64) -> TiltedPoint {
    let stats = lse_stats(s, theta);
    TiltedPoint { lambda: stats.log_mean / t, ess: stats.ess, stderr: stats.stderr_log / t }
}

/// Estimated scaled cumulant generating function on a grid of tilts.
#[derive(Debug, Clone)]
pub struct ScgfCurve {
    pub theta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub stderr: Vec<f64>,
    pub ess: Vec<f64>,
    /// Point is usable: finite, with effective sample size at or above the
    /// floor used for the estimate.
    pub valid: Vec<bool>,
    /// Time horizon the estimate was taken at (last checkpoint).
    pub t_used: u64,
    /// Number of clean paths that entered the estimate.
    pub m_used: usize,
    pub ess_min: f64,
}

impl ScgfCurve {
    pub fn n_valid(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Valid `(theta, lambda)` pairs in grid order.
    pub fn valid_points(&self) -> Vec<(f64, f64)> {
        self.theta
            .iter()
            .zip(&self.lambda)
            .zip(&self.valid)
            .filter(|&(_, &v)| v)
            .map(|((&t, &l), _)| (t, l))
            .collect()
    }
}

/// Estimate the scaled CGF at the ensemble's final checkpoint.
///
/// The grid must contain `theta = 0`, where the estimate is exactly zero by
/// construction — a built-in calibration point. Sorted grids are required
/// so downstream hull construction can trust the order.
pub fn estimate_scgf(
    ensemble: &PathEnsemble,
    theta_grid: &[f64],
    ess_min: f64,
) -> Result<ScgfCurve> {
    if theta_grid.is_empty() {
        return Err(Error::InvalidConfig("theta grid is empty".into()));
    }
    if theta_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("theta grid must be strictly increasing".into()));
    }
    if !theta_grid.iter().any(|&t| t == 0.0) {
        return Err(Error::InvalidConfig(
            "theta grid must contain 0 (the calibration point)".into(),
        ));
    }
    let c = ensemble.final_checkpoint();
    let s: Vec<f64> = ensemble.clean_s_at(c).collect();
    if s.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 clean paths, have {}",
            s.len()
        )));
    }
    let t = ensemble.checkpoints()[c] as f64;
    let points: Vec<TiltedPoint> =
        theta_grid.par_iter().map(|&theta| tilted_point(&s, t, theta)).collect();
    let mut curve = ScgfCurve {
        theta: theta_grid.to_vec(),
        lambda: Vec::with_capacity(points.len()),
        stderr: Vec::with_capacity(points.len()),
        ess: Vec::with_capacity(points.len()),
        valid: Vec::with_capacity(points.len()),
        t_used: ensemble.checkpoints()[c],
        m_used: s.len(),
        ess_min,
    };
    for p in &points {
        curve.lambda.push(p.lambda);
        curve.stderr.push(p.stderr);
        curve.ess.push(p.ess);
        curve.valid.push(p.lambda.is_finite() && p.stderr.is_finite() && p.ess >= ess_min);
    }
    Ok(curve)
}

/// A convenience default grid: 41 evenly spaced tilts on `[-2, 2]`.
pub fn default_theta_grid() -> Vec<f64> {
    (0..=40).map(|i| -2.0 + 0.1 * i as f64).collect()
}

/// Convex conjugate of the estimated scaled CGF on a grid of slopes.
#[derive(Debug, Clone)]
pub struct RateFunction {
    pub x: Vec<f64>,
    /// Conjugate values; `f64::INFINITY` where the slope falls outside the
    /// range achievable from the estimated curve (see `boundary`).
    pub lambda_star: Vec<f64>,
    /// True where the supremum was attained at an endpoint of the hull: the
    /// finite grid cannot certify the conjugate there.
    pub boundary: Vec<bool>,
    /// Grid slope with the smallest conjugate value.
    pub argmin_x: f64,
    /// Lower-convex-hull vertices actually used.
    pub hull_theta: Vec<f64>,
    pub hull_lambda: Vec<f64>,
}

impl RateFunction {
    /// Conjugate at an arbitrary slope, with its boundary flag.
    pub fn value_at(&self, x: f64) -> (f64, bool) {
        conjugate_at(&self.hull_theta, &self.hull_lambda, x)
    }
}

/// Lower convex hull of sorted points, via the monotone chain.
fn lower_hull(pts: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &p in pts {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // Keep b only if it is strictly below segment a-p.
            let cross = (b.0 - a.0) * (p.1 - a.1) - (p.0 - a.0) * (b.1 - a.1);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// `sup_theta (theta * x - Lambda(theta))` over hull vertices.
///
/// Returns infinity with a boundary flag when the supremum sits strictly at
/// an end vertex, i.e. the true conjugate keeps growing beyond the grid.
fn conjugate_at(hull_theta: &[f64], hull_lambda: &[f64], x: f64) -> (f64, bool) {
    let n = hull_theta.len();
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for v in 0..n {
        let g = hull_theta[v] * x - hull_lambda[v];
        if g > best {
            best = g;
            arg = v;
        }
    }
    if n >= 2 {
        if arg == 0 {
            let slope = (hull_lambda[1] - hull_lambda[0]) / (hull_theta[1] - hull_theta[0]);
            if x < slope {
                return (f64::INFINITY, true);
            }
        }
        if arg == n - 1 {
            let slope =
                (hull_lambda[n - 1] - hull_lambda[n - 2]) / (hull_theta[n - 1] - hull_theta[n - 2]);
            if x > slope {
                return (f64::INFINITY, true);
            }
        }
    } else {
        // A single vertex pins no slope at all.
        return (f64::INFINITY, true);
    }
    (best, false)
}

/// Convex conjugate of the valid part of an estimated curve.
///
/// Needs at least five valid points; fewer cannot support a meaningful
/// hull. The conjugate is computed from the lower convex hull, so small
/// non-convex jitters in the estimates are absorbed rather than amplified.
pub fn legendre(curve: &ScgfCurve, x_grid: &[f64]) -> Result<RateFunction> {
    let pts = curve.valid_points();
    if pts.len() < 5 {
        return Err(Error::InsufficientValidPoints { got: pts.len(), need: 5 });
    }
    if x_grid.is_empty() {
        return Err(Error::InvalidConfig("slope grid is empty".into()));
    }
    let hull = lower_hull(&pts);
    let hull_theta: Vec<f64> = hull.iter().map(|p| p.0).collect();
    let hull_lambda: Vec<f64> = hull.iter().map(|p| p.1).collect();
    let mut lambda_star = Vec::with_capacity(x_grid.len());
    let mut boundary = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        let (v, b) = conjugate_at(&hull_theta, &hull_lambda, x);
        lambda_star.push(v);
        boundary.push(b);
    }
    // Smallest finite value; on a plateau pick the middle grid point.
    let mut best = f64::INFINITY;
    for &v in &lambda_star {
        if v < best {
            best = v;
        }
    }
    let plateau: Vec<usize> = lambda_star
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == best)
        .map(|(i, _)| i)
        .collect();
    let argmin_x = if plateau.is_empty() {
        f64::NAN
    } else {
        x_grid[plateau[plateau.len() / 2]]
    };
    Ok(RateFunction { x: x_grid.to_vec(), lambda_star, boundary, argmin_x, hull_theta, hull_lambda })
}

/// Configuration for locating the negative root of the scaled CGF.
#[derive(Debug, Clone)]
pub struct Alpha0Config {
    /// Horizon for the root-finding ensemble. Short on purpose: deep
    /// negative tilts lose effective sample size exponentially in `t`.
    pub t: u64,
    pub paths: usize,
    pub seed: u64,
}

impl Default for Alpha0Config {
    fn default() -> Self {
        Self { t: 16, paths: 100_000, seed: 1 }
    }
}

/// Result of the root search, with the diagnostic curve that justified it.
#[derive(Debug, Clone)]
pub struct Alpha0Result {
    /// The negative root: the curve changes sign in `(alpha0, 0)`.
    pub alpha0: f64,
    /// Curve value at `alpha0 / 2`; negative when the root is genuine (by
    /// convexity the curve dips below zero between its two roots).
    pub lambda_at_half: f64,
    /// Effective sample size at `alpha0`.
    pub ess_at_root: f64,
    /// Diagnostic samples of the estimated curve on `[alpha_lo, 0]`.
    pub curve: ScgfCurve,
}

/// Bisection for the negative zero crossing of a convex function with
/// `f(0) = 0`, `f'(0) > 0`: the root is the unique `alpha < 0` with
/// `f(alpha) = 0` besides the origin.
///
/// `f` must be positive at `alpha_lo`; if not, no root is bracketed and the
/// sampled curve is returned inside the error for inspection.
pub fn bisect_negative_root(
    f: impl Fn(f64) -> f64,
    alpha_lo: f64,
) -> std::result::Result<f64, Vec<(f64, f64)>> {
    let sample = |n: usize| -> Vec<(f64, f64)> {
        (0..=n)
            .map(|i| {
                let a = alpha_lo * (1.0 - i as f64 / n as f64);
                (a, f(a))
            })
            .collect()
    };
    // Just inside zero the function must be negative (positive slope at the
    // origin means f < 0 immediately to the left).
    let hi = -1e-8;
    if !(f(alpha_lo) > 0.0 && f(hi) < 0.0) {
        return Err(sample(20));
    }
    let mut lo = alpha_lo;
    let mut hi = hi;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() < 1e-12 * alpha_lo.abs() {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Locate the nonzero root `alpha0 < 0` of the estimated scaled CGF.
///
/// An ensemble is simulated once and the plug-in curve is bisected on
/// `[alpha_lo, 0)`. Fails with the sampled curve when no sign change is
/// bracketed (e.g. the strategy has no long-run edge, so the curve is
/// nonnegative everywhere).
pub fn find_alpha0(
    model: &MarketModel,
    strategy: &Strategy,
    alpha_lo: f64,
    cfg: &Alpha0Config,
) -> Result<Alpha0Result> {
    if !(alpha_lo < 0.0) {
        return Err(Error::InvalidConfig(format!(
            "alpha_lo must be negative, got {alpha_lo}"
        )));
    }
    let plan = SimulationPlan::to_horizon(
        model.clone(),
        strategy.clone(),
        cfg.t,
        cfg.paths,
        cfg.seed,
    );
    let ensemble = simulate(&plan)?;
    let c = ensemble.final_checkpoint();
    let s: Vec<f64> = ensemble.clean_s_at(c).collect();
    if s.len() < 100 {
        return Err(Error::InvalidConfig(format!(
            "only {} clean paths; root finding needs at least 100",
            s.len()
        )));
    }
    let t = cfg.t as f64;
    let f = |theta: f64| {
        let z: Vec<f64> = s.iter().map(|&v| theta * v).collect();
        let (lse, _) = log_sum_exp(&z);
        (lse - (s.len() as f64).ln()) / t
    };
    // Diagnostic grid for reporting (and for the error path).
    let n_grid = 20usize;
    let grid: Vec<f64> =
        (0..=n_grid).map(|i| alpha_lo * (1.0 - i as f64 / n_grid as f64)).collect();
    let curve = estimate_scgf(&ensemble, &grid, DEFAULT_ESS_MIN)?;
    let alpha0 = bisect_negative_root(f, alpha_lo).map_err(|samples| Error::NoRootInRange {
        curve: samples,
    })?;
    let half = tilted_point(&s, t, alpha0 / 2.0);
    let at_root = tilted_point(&s, t, alpha0);
    Ok(Alpha0Result { alpha0, lambda_at_half: half.lambda, ess_at_root: at_root.ess, curve })
}

/// Check the two-sided growth bound
/// `log(1/2) - |x| - |y| <= f(x, y) <= 1 + |x| + |y|`
/// on sampled transitions `(x, y, f)`. This holds for any allocation
/// fraction in `[0, 1]`, so a violation indicates a computational bug
/// rather than an unlucky sample.
pub fn check_growth_bound(samples: &[(f64, f64, f64)]) -> bool {
    const SLACK: f64 = 1e-12;
    let half_log = 0.5f64.ln();
    samples.iter().all(|&(x, y, f)| {
        let lo = half_log - x.abs() - y.abs();
        let hi = 1.0 + x.abs() + y.abs();
        f >= lo - SLACK && f <= hi + SLACK
    })
}
