//! Long-run averages along a single path.
//!
//! For a stable state chain the time averages of the log-wealth increment
//! `f(x, y)` converge: the mean
//!
//! ```text
//! nu(f) = lim (1/t) * sum f(X_{n-1}, X_n)
//! ```
//!
//! is estimated by a plain time average after burn-in, and the asymptotic
//! variance `sigma^2(f)` (the variance constant in the CLT for the sum) by
//! non-overlapping batch means: with batches of length `B`, `B * var(batch
//! means)` converges to `sigma^2(f)` once `B` dwarfs the mixing time.
//!
//! The estimators refuse configurations that cannot support their error
//! estimates (too little data after burn-in, too few batches) instead of
//! returning numbers with fictional accuracy.

use crate::error::{Error, Result};
use crate::model::MarketModel;
use crate::strategy::{log_increment, Strategy};

/// Working range for the state; beyond this the input is treated as
/// non-ergodic rather than averaged further.
const STATE_RANGE_GUARD: f64 = 1e9;

/// Sample-variance threshold under which `f` is reported as constant along
/// the path (e.g. the all-cash strategy, where `f` is identically zero).
const CONSTANT_F_VARIANCE: f64 = 1e-12;

/// Configuration for single-path ergodic estimation.
#[derive(Debug, Clone)]
pub struct ErgodicConfig {
    /// Number of transitions simulated.
    pub length: u64,
    /// Transitions discarded before averaging; `None` picks
    /// `max(1000, length / 100)`.
    pub burn_in: Option<u64>,
    /// Batch length for the variance estimator; `None` picks
    /// `max(100, sqrt(kept))`.
    pub batch_length: Option<u64>,
    pub seed: u64,
    /// Stream id, so several independent long paths can share a seed.
    pub path: u64,
}

impl ErgodicConfig {
    pub fn new(length: u64, seed: u64) -> Self {
        Self { length, burn_in: None, batch_length: None, seed, path: 0 }
    }
}

/// Estimates from one long path.
#[derive(Debug, Clone)]
pub struct ErgodicReport {
    /// Time average of `f` after burn-in.
    pub nu_f_hat: f64,
    /// Batch-means standard error of `nu_f_hat`.
    pub nu_f_stderr: f64,
    /// Batch-means estimate of the asymptotic variance of `f`.
    pub sigma2_f_hat: f64,
    /// True when `f` had (numerically) zero variance along the path; the
    /// variance machinery is vacuous then and `sigma2_f_hat` is zero.
    pub constant_f_flag: bool,
    pub length: u64,
    pub burn_in: u64,
    pub batch_length: u64,
    pub n_batches: usize,
}

/// Run one path and compute all single-path statistics.
pub fn ergodic_report(
    model: &MarketModel,
    strategy: &Strategy,
    cfg: &ErgodicConfig,
) -> Result<ErgodicReport> {
    let burn_in = cfg.burn_in.unwrap_or_else(|| 1000.max(cfg.length / 100));
    if cfg.length < 10 * burn_in.max(1) {
        return Err(Error::InvalidConfig(format!(
            "length {} must be at least 10 * burn_in ({burn_in}); raise length or lower burn_in",
            cfg.length
        )));
    }
    let kept = cfg.length - burn_in;
    let batch_length = cfg.batch_length.unwrap_or_else(|| 100.max((kept as f64).sqrt() as u64));
    if batch_length < 100 {
        return Err(Error::InvalidConfig(format!(
            "batch_length {batch_length} is below the minimum of 100"
        )));
    }
    let n_batches = (kept / batch_length) as usize;
    if n_batches < 20 {
        return Err(Error::TooFewBatches { got: n_batches, need: 20 });
    }

    let mut x = model.x0();
    let mut sum = 0.0;
    // Welford accumulators for the variance of f itself (constancy check).
    let mut mean_w = 0.0;
    let mut m2_w = 0.0;
    let mut count = 0u64;
    let mut batch_sums = Vec::with_capacity(n_batches);
    let mut batch_acc = 0.0;
    let mut in_batch = 0u64;

    for n in 0..cfg.length {
        let pi = strategy.allocate(model, x);
        let eps = model.noise().draw(cfg.seed, cfg.path, n);
        let y = match model.step(x, eps) {
            Ok(y) => y,
            Err(_) => return Err(Error::NonErgodicInput { max_abs_x: x.abs() }),
        };
        if y.abs() > STATE_RANGE_GUARD {
            return Err(Error::NonErgodicInput { max_abs_x: y.abs() });
        }
        if n >= burn_in {
            let f = log_increment(pi, x, y);
            sum += f;
            count += 1;
            let delta = f - mean_w;
            mean_w += delta / count as f64;
            m2_w += delta * (f - mean_w);
            if batch_sums.len() < n_batches {
                batch_acc += f;
                in_batch += 1;
                if in_batch == batch_length {
                    batch_sums.push(batch_acc);
                    batch_acc = 0.0;
                    in_batch = 0;
                }
            }
        }
        x = y;
    }

    let nu = sum / count as f64;
    let f_variance = if count > 1 { m2_w / (count - 1) as f64 } else { 0.0 };
    let constant_f_flag = f_variance < CONSTANT_F_VARIANCE;

    let (nu_f_stderr, sigma2_f_hat) = if constant_f_flag {
        (0.0, 0.0)
    } else {
        let nb = batch_sums.len() as f64;
        let bl = batch_length as f64;
        let bm_mean = batch_sums.iter().sum::<f64>() / nb / bl;
        let bm_var = batch_sums
            .iter()
            .map(|s| {
                let d = s / bl - bm_mean;
                d * d
            })
            .sum::<f64>()
            / (nb - 1.0);
        ((bm_var / nb).sqrt(), bl * bm_var)
    };

    Ok(ErgodicReport {
        nu_f_hat: nu,
        nu_f_stderr,
        sigma2_f_hat,
        constant_f_flag,
        length: cfg.length,
        burn_in,
        batch_length,
        n_batches,
    })
}

/// Long-run mean of `f` and its standard error.
pub fn estimate_nu_f(
    model: &MarketModel,
    strategy: &Strategy,
    length: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    let r = ergodic_report(model, strategy, &ErgodicConfig::new(length, seed))?;
    Ok((r.nu_f_hat, r.nu_f_stderr))
}

/// Asymptotic variance of `f` with an explicit batch length. The flag
/// reports a constant `f`, for which the variance is exactly zero.
pub fn estimate_sigma2_f(
    model: &MarketModel,
    strategy: &Strategy,
    length: u64,
    batch_length: u64,
    seed: u64,
) -> Result<(f64, bool)> {
    let mut cfg = ErgodicConfig::new(length, seed);
    cfg.batch_length = Some(batch_length);
    let r = ergodic_report(model, strategy, &cfg)?;
    Ok((r.sigma2_f_hat, r.constant_f_flag))
}

/// Rectangular binning grid for transition pairs.
#[derive(Debug, Clone, Copy)]
pub struct HistogramGrid {
    pub x_lo: f64,
    pub x_hi: f64,
    pub nx: usize,
    pub y_lo: f64,
    pub y_hi: f64,
    pub ny: usize,
}

impl HistogramGrid {
    /// Symmetric square grid over `[-half, half]^2`.
    pub fn square(half: f64, bins: usize) -> Self {
        Self { x_lo: -half, x_hi: half, nx: bins, y_lo: -half, y_hi: half, ny: bins }
    }
}

/// Normalized occupancy of transition pairs `(X_{n-1}, X_n)`.
#[derive(Debug, Clone)]
pub struct Histogram2d {
    pub grid: HistogramGrid,
    /// Row-major `nx * ny` masses, normalized over in-range pairs.
    pub mass: Vec<f64>,
    pub n_in_range: u64,
    pub n_out_of_range: u64,
}

impl Histogram2d {
    pub fn cell(&self, ix: usize, iy: usize) -> f64 {
        self.mass[ix * self.grid.ny + iy]
    }

    /// Mass of each x-column (marginal of the first coordinate).
    pub fn x_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.nx];
        for ix in 0..self.grid.nx {
            for iy in 0..self.grid.ny {
                out[ix] += self.cell(ix, iy);
            }
        }
        out
    }

    pub fn x_edges(&self) -> Vec<f64> {
        let w = (self.grid.x_hi - self.grid.x_lo) / self.grid.nx as f64;
        (0..=self.grid.nx).map(|i| self.grid.x_lo + w * i as f64).collect()
    }
}

/// Occupancy histogram of the pair chain along one path.
///
/// Pairs falling outside the grid are counted and reported but carry no
/// mass; the in-range mass is normalized to one. Pick a grid that covers
/// the visited range if the full law is wanted.
pub fn empirical_invariant_histogram(
    model: &MarketModel,
    length: u64,
    burn_in: u64,
    grid: HistogramGrid,
    seed: u64,
) -> Result<Histogram2d> {
    if grid.nx == 0 || grid.ny == 0 {
        return Err(Error::InvalidConfig("histogram needs at least one bin per axis".into()));
    }
    if !(grid.x_lo < grid.x_hi && grid.y_lo < grid.y_hi) {
        return Err(Error::InvalidConfig("histogram bounds must be ordered".into()));
    }
    if length < 10 * burn_in.max(1) {
        return Err(Error::InvalidConfig(format!(
            "length {length} must be at least 10 * burn_in ({burn_in})"
        )));
    }
    let mut counts = vec![0u64; grid.nx * grid.ny];
    let mut in_range = 0u64;
    let mut out_of_range = 0u64;
    let wx = (grid.x_hi - grid.x_lo) / grid.nx as f64;
    let wy = (grid.y_hi - grid.y_lo) / grid.ny as f64;
    let mut x = model.x0();
    for n in 0..length {
        let eps = model.noise().draw(seed, 0, n);
        let y = match model.step(x, eps) {
            Ok(y) => y,
            Err(_) => return Err(Error::NonErgodicInput { max_abs_x: x.abs() }),
        };
        if y.abs() > STATE_RANGE_GUARD {
            return Err(Error::NonErgodicInput { max_abs_x: y.abs() });
        }
        if n >= burn_in {
            let ix = ((x - grid.x_lo) / wx).floor();
            let iy = ((y - grid.y_lo) / wy).floor();
            if ix >= 0.0 && ix < grid.nx as f64 && iy >= 0.0 && iy < grid.ny as f64 {
                counts[ix as usize * grid.ny + iy as usize] += 1;
                in_range += 1;
            } else {
                out_of_range += 1;
            }
        }
        x = y;
    }
    if in_range == 0 {
        return Err(Error::InvalidConfig("no transition pairs landed inside the grid".into()));
    }
    let mass = counts.iter().map(|&c| c as f64 / in_range as f64).collect();
    Ok(Histogram2d { grid, mass, n_in_range: in_range, n_out_of_range: out_of_range })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed-form long-run mean of `f` for the indicator rule on
    /// stable_ar(alpha): (1 - alpha) * s / sqrt(2 pi), s^2 = 1/(1 - alpha^2).
    fn indicator_nu(alpha: f64) -> f64 {
        let s = (1.0 / (1.0 - alpha * alpha)).sqrt();
        (1.0 - alpha) * s / (2.0 * std::f64::consts::PI).sqrt()
    }

    #[test]
    fn indicator_rule_mean_matches_the_closed_form() {
        let model = MarketModel::stable_ar(0.5).unwrap();
        let (nu, se) = estimate_nu_f(&model, &Strategy::PositiveDriftIndicator, 2_000_000, 9)
            .unwrap();
        let want = indicator_nu(0.5);
        assert!((nu - want).abs() < 0.005, "nu = {nu}, closed form {want}");
        assert!(se > 0.0 && se < 0.005, "stderr {se}");
        assert!((nu - want).abs() < 6.0 * se, "off by {} stderr", (nu - want).abs() / se);
    }

    #[test]
    fn all_cash_strategy_is_exactly_constant() {
        let model = MarketModel::stable_ar(0.5).unwrap();
        let r = ergodic_report(
            &model,
            &Strategy::Constant { fraction: 0.0 },
            &ErgodicConfig::new(200_000, 4),
        )
        .unwrap();
        assert_eq!(r.nu_f_hat, 0.0);
        assert_eq!(r.nu_f_stderr, 0.0);
        assert_eq!(r.sigma2_f_hat, 0.0);
        assert!(r.constant_f_flag);
    }

    #[test]
    fn drifted_walk_mean_and_variance_match_iid_values() {
        // Fully invested on drifted_walk(m): f = m + eps, iid with mean m
        // and variance 1.
        let model = MarketModel::drifted_walk(0.25).unwrap();
        let r = ergodic_report(&model, &Strategy::FullInvest, &ErgodicConfig::new(4_000_000, 21))
            .unwrap();
        assert!((r.nu_f_hat - 0.25).abs() < 0.003, "nu = {}", r.nu_f_hat);
        assert!((r.sigma2_f_hat - 1.0).abs() < 0.1, "sigma2 = {}", r.sigma2_f_hat);
        assert!(!r.constant_f_flag);
    }

    #[test]
    fn sigma2_is_stable_across_seeds() {
        let model = MarketModel::stable_ar(0.5).unwrap();
        let (a, flag_a) =
            estimate_sigma2_f(&model, &Strategy::PositiveDriftIndicator, 2_000_000, 1_000, 31)
                .unwrap();
        let (b, flag_b) =
            estimate_sigma2_f(&model, &Strategy::PositiveDriftIndicator, 2_000_000, 1_000, 77)
                .unwrap();
        assert!(!flag_a && !flag_b);
        assert!(a > 0.0 && b > 0.0);
        let rel = (a - b).abs() / a.max(b);
        assert!(rel < 0.15, "seed-to-seed spread {rel} (a = {a}, b = {b})");
    }

    #[test]
    fn two_seeds_agree_within_standard_errors() {
        let model = MarketModel::stable_ar(0.5).unwrap();
        let s = Strategy::PositiveDriftIndicator;
        let (nu1, se1) = estimate_nu_f(&model, &s, 1_000_000, 100).unwrap();
        let (nu2, se2) = estimate_nu_f(&model, &s, 1_000_000, 200).unwrap();
        assert!((nu1 - nu2).abs() < 4.0 * (se1 + se2), "nu1 = {nu1}, nu2 = {nu2}");
    }

    #[test]
    fn ensemble_mean_agrees_with_the_time_average() {
        use crate::engine::{simulate, SimulationPlan};
        let model = MarketModel::stable_ar(0.5).unwrap();
        let s = Strategy::PositiveDriftIndicator;
        let (nu, se_t) = estimate_nu_f(&model, &s, 2_000_000, 55).unwrap();
        let plan =
            SimulationPlan::to_horizon(model.clone(), s.clone(), 10_000, 200, 56);
        let e = simulate(&plan).unwrap();
        let rate = e.mean_growth_rate(0);
        let t = 10_000.0;
        let mut var = 0.0;
        for v in e.clean_s_at(0) {
            let d = v / t - rate;
            var += d * d;
        }
        let se_e = (var / (e.n_clean() as f64 - 1.0) / e.n_clean() as f64).sqrt();
        assert!(
            (rate - nu).abs() < 4.0 * (se_t + se_e) + 1e-3,
            "ensemble {rate} vs time average {nu} (se {se_t}, {se_e})"
        );
    }

    #[test]
    fn config_validation_refuses_unsupportable_requests() {
        let model = MarketModel::stable_ar(0.5).unwrap();
        let s = Strategy::FullInvest;
        // Burn-in eats too much of the path.
        let mut cfg = ErgodicConfig::new(5_000, 1);
        cfg.burn_in = Some(1_000);
        assert!(matches!(ergodic_report(&model, &s, &cfg), Err(Error::InvalidConfig(_))));
        // Batch length too small.
        let mut cfg = ErgodicConfig::new(100_000, 1);
        cfg.batch_length = Some(50);
        assert!(matches!(ergodic_report(&model, &s, &cfg), Err(Error::InvalidConfig(_))));
        // Too few batches.
        let mut cfg = ErgodicConfig::new(200_000, 1);
        cfg.batch_length = Some(50_000);
        assert!(matches!(ergodic_report(&model, &s, &cfg), Err(Error::TooFewBatches { .. })));
    }

    #[test]
    fn exploding_states_are_reported_as_non_ergodic() {
        use crate::model::{NoiseSpec, RealMap};
        let model = MarketModel::custom(
            "runaway",
            RealMap::Affine { slope: 0.5, intercept: 0.0 },
            RealMap::constant(1.0),
            NoiseSpec::standard_gaussian(),
            1.0,
        )
        .unwrap();
        let err = ergodic_report(&model, &Strategy::FullInvest, &ErgodicConfig::new(100_000, 3))
            .unwrap_err();
        assert!(matches!(err, Error::NonErgodicInput { .. }), "got {err:?}");
    }

    #[test]
    fn histogram_mass_is_normalized_and_covers_the_bulk() {
        let model = MarketModel::stable_ar(0.5).unwrap();
        let s = (1.0f64 / 0.75).sqrt();
        let grid = HistogramGrid::square(4.0 * s, 20);
        let h = empirical_invariant_histogram(&model, 10_000_000, 10_000, grid, 8).unwrap();
        let total: f64 = h.mass.iter().sum();
        assert!((total - 1.0).abs() < 1e-12, "total mass {total}");
        // Every cell that the stationary pair law (X ~ N(0, s^2),
        // Y | X ~ N(X/2, 1)) expects to visit many times is in fact
        // visited. The mean count needs no independence assumption; the
        // floor of 60 expected visits keeps the empty probability
        // negligible even with serially correlated sampling.
        let wx = (h.grid.x_hi - h.grid.x_lo) / h.grid.nx as f64;
        let wy = (h.grid.y_hi - h.grid.y_lo) / h.grid.ny as f64;
        let mut checked = 0;
        for ix in 0..h.grid.nx {
            for iy in 0..h.grid.ny {
                let cx = h.grid.x_lo + wx * (ix as f64 + 0.5);
                let cy = h.grid.y_lo + wy * (iy as f64 + 0.5);
                let density = crate::rng::normal_pdf(cx / s) / s
                    * crate::rng::normal_pdf(cy - 0.5 * cx);
                let expected = 10_000_000.0 * wx * wy * density;
                if expected >= 60.0 {
                    checked += 1;
                    assert!(h.cell(ix, iy) > 0.0, "empty bulk cell ({cx:.2}, {cy:.2})");
                }
            }
        }
        assert!(checked > 100, "bulk criterion covered only {checked} cells");
    }

    #[test]
    fn histogram_x_marginal_matches_the_stationary_law() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let model = MarketModel::stable_ar(0.5).unwrap();
        let s = (1.0f64 / 0.75).sqrt();
        let grid = HistogramGrid::square(5.0 * s, 200);
        let h = empirical_invariant_histogram(&model, 1_000_000, 10_000, grid, 12).unwrap();
        let marginal = h.x_marginal();
        let edges = h.x_edges();
        let law = Normal::new(0.0, s).unwrap();
        // Cumulative mass at bin edges is the empirical CDF there; compare
        // with the exact stationary CDF in the KS metric.
        let mut acc = 0.0;
        let mut ks: f64 = law.cdf(edges[0]);
        for (i, m) in marginal.iter().enumerate() {
            acc += m;
            ks = ks.max((acc - law.cdf(edges[i + 1])).abs());
        }
        assert!(ks < 0.01, "KS distance {ks}");
    }
}
