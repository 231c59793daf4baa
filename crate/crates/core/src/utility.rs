//! Expected power utility along the wealth process.
//!
//! For the power family (increasing in wealth for every admissible index)
//!
//! ```text
//! U(v) = v^alpha          for 0 < alpha < 1
//! U(v) = -v^alpha         for alpha < 0
//! ```
//!
//! the expected utility of the terminal wealth factorizes through the
//! tilted moment of the log growth: `E U(V_t) = sign(alpha) * V_0^alpha *
//! E exp(alpha * S_t)`, so the machinery behind the scaled CGF applies
//! verbatim. The module estimates the expected-utility curve on a horizon
//! grid, grades each point by its effective sample size, classifies the
//! asymptotic regime by the sign of the growth exponent, and links the
//! utility decay rate to the failure-probability decay rate in both
//! directions (Markov-type forward bound, algebraic converse).

use crate::engine::PathEnsemble;
use crate::error::{Error, Result};
use crate::ldp::{find_alpha0, lse_stats, Alpha0Config};
use crate::model::MarketModel;
use crate::strategy::Strategy;

/// Power utility with index `alpha` in `(-inf, 0) U (0, 1)`.
#[derive(Debug, Clone, Copy)]
pub struct UtilitySpec {
    alpha: f64,
}

impl UtilitySpec {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha == 0.0 || alpha >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "utility index must be finite, nonzero and below 1, got {alpha}"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Sign carried by the utility: `+1` for fractional powers, `-1` for
    /// negative indices (where `v^alpha` itself is decreasing).
    pub fn sign(&self) -> f64 {
        if self.alpha > 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn eval(&self, v: f64) -> f64 {
        self.sign() * v.powf(self.alpha)
    }
}

/// Asymptotic behavior of `E U(V_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UtilityRegime {
    /// `|E U|` grows exponentially (the growth exponent is significantly
    /// positive). For negative indices this means utility diverges to
    /// minus infinity.
    Diverges,
    /// `|E U|` decays exponentially to zero.
    DecaysToZero,
    /// The exponent is statistically indistinguishable from zero.
    Indeterminate,
}

impl std::fmt::Display for UtilityRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            UtilityRegime::Diverges => "diverges",
            UtilityRegime::DecaysToZero => "decays_to_zero",
            UtilityRegime::Indeterminate => "indeterminate",
        };
        f.write_str(s)
    }
}

/// Configuration of the expected-utility estimation.
#[derive(Debug, Clone)]
pub struct UtilityConfig {
    /// Horizon grid; short horizons matter because deep tilts lose
    /// effective sample size exponentially in `t`.
    pub t_grid: Vec<u64>,
    pub paths: usize,
    pub seed: u64,
    pub v0: f64,
    /// Effective-sample-size floor below which a horizon is censored.
    pub ess_min: f64,
    /// Also locate the utility-neutral index `alpha0` (negative indices
    /// only); costs one extra short ensemble.
    pub probe_alpha0: bool,
}

impl UtilityConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            t_grid: vec![1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64, 96, 128],
            paths: 100_000,
            seed,
            v0: 1.0,
            ess_min: 100.0,
            probe_alpha0: true,
        }
    }
}

/// Estimated expected-utility curve and its asymptotic classification.
#[derive(Debug, Clone)]
pub struct UtilityReport {
    pub model_name: String,
    pub alpha: f64,
    pub v0: f64,
    pub seed: u64,
    pub t_grid: Vec<u64>,
    /// `E U(V_t)` per horizon (signed).
    pub eu: Vec<f64>,
    pub eu_stderr: Vec<f64>,
    pub ess: Vec<f64>,
    /// Horizon's effective sample size fell below the floor: the value is
    /// reported but carries no evidential weight.
    pub censored: Vec<bool>,
    /// Growth exponent `(1/t) log E exp(alpha S_t)` at the longest
    /// uncensored horizon.
    pub lambda_f_alpha: f64,
    pub lambda_stderr: f64,
    pub lambda_t_used: u64,
    pub regime: UtilityRegime,
    /// Least-squares slope of `log |E U|` against `t` over uncensored
    /// horizons (negative when utility decays).
    pub fitted_rate: Option<f64>,
    /// Average prefactor `E U / (V_0^alpha exp(lambda t))` over the later
    /// uncensored horizons; for an exact exponential curve this is the
    /// utility sign.
    pub d_alpha_hat: Option<f64>,
    /// Root of the growth exponent in the index (negative indices only,
    /// probed when configured).
    pub alpha0_ref: Option<f64>,
    pub notes: Vec<String>,
}

/// Estimate `E U(V_t)` on a horizon grid from one simulated ensemble.
pub fn expected_utility_curve(
    model: &MarketModel,
    strategy: &Strategy,
    spec: &UtilitySpec,
    cfg: &UtilityConfig,
) -> Result<UtilityReport> {
    if cfg.t_grid.is_empty() || cfg.t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(
            "horizon grid must be nonempty and strictly increasing".into(),
        ));
    }
    if !(cfg.v0 > 0.0 && cfg.v0.is_finite()) {
        return Err(Error::InvalidConfig(format!("v0 must be positive, got {}", cfg.v0)));
    }
    if cfg.paths < 100 {
        return Err(Error::InvalidConfig("need at least 100 paths".into()));
    }
    let plan = crate::engine::SimulationPlan {
        model: model.clone(),
        strategy: strategy.clone(),
        horizon: *cfg.t_grid.last().unwrap(),
        paths: cfg.paths,
        seed: cfg.seed,
        checkpoints: cfg.t_grid.clone(),
        record_states: false,
    };
    let ensemble = crate::engine::simulate(&plan)?;
    if ensemble.n_clean() < 100 {
        return Err(Error::InvalidConfig(format!(
            "only {} clean paths survived simulation",
            ensemble.n_clean()
        )));
    }
    let mut notes = Vec::new();
    let alpha = spec.alpha();
    let sign = spec.sign();
    let v0a = cfg.v0.powf(alpha);

    let n_t = cfg.t_grid.len();
    let mut eu = Vec::with_capacity(n_t);
    let mut eu_stderr = Vec::with_capacity(n_t);
    let mut ess = Vec::with_capacity(n_t);
    let mut censored = Vec::with_capacity(n_t);
    let mut log_means = Vec::with_capacity(n_t);
    for c in 0..n_t {
        let s: Vec<f64> = ensemble.clean_s_at(c).collect();
        let stats = lse_stats(&s, alpha);
        log_means.push(stats.log_mean);
        let value = sign * v0a * stats.log_mean.exp();
        eu.push(value);
        eu_stderr.push(value.abs() * stats.stderr_log);
        ess.push(stats.ess);
        censored.push(!(stats.ess >= cfg.ess_min) || !stats.stderr_log.is_finite());
    }
    // Second censoring pass: the population effective sample size of an
    // exponential tilt decays geometrically in the horizon, so the
    // empirical ESS can only legitimately fall as t grows (sampling jitter
    // cannot push it up: consecutive checkpoints share their paths). A
    // strict rise above the running minimum means the weight support has
    // collapsed onto a few extreme paths and the diagnostic itself is no
    // longer trustworthy; everything from the first rise onward is
    // censored, whatever its nominal ESS reads.
    let mut env = f64::INFINITY;
    let mut collapsed_at = None;
    for i in 0..n_t {
        if collapsed_at.is_none() && ess[i] > env {
            collapsed_at = Some(i);
        }
        if collapsed_at.is_some() {
            censored[i] = true;
        }
        env = env.min(ess[i]);
    }
    if let Some(i) = collapsed_at {
        notes.push(format!(
            "effective sample size rose again at t = {} ({:.1} after a minimum of {:.1}), \
             indicating collapse of the tilted weight support; horizons from there on are \
             censored",
            cfg.t_grid[i],
            ess[i],
            ess[..i].iter().cloned().fold(f64::INFINITY, f64::min)
        ));
    }

    // Growth exponent at the longest horizon that still resolves the tilt.
    let uncensored: Vec<usize> = (0..n_t).filter(|&i| !censored[i]).collect();
    let (lambda, lambda_se, t_used, forced) = match uncensored.last() {
        Some(&i) => {
            let t = cfg.t_grid[i] as f64;
            (log_means[i] / t, sanitize_se(eu_stderr[i] / eu[i].abs() / t), cfg.t_grid[i], false)
        }
        None => {
            // Nothing resolved; report from the best-conditioned horizon
            // but refuse to classify.
            let i = (0..n_t)
                .max_by(|&a, &b| ess[a].partial_cmp(&ess[b]).unwrap())
                .expect("nonempty grid");
            notes.push(format!(
                "every horizon fell below the effective-sample-size floor {}; the exponent \
                 is reported from the least-bad horizon and the regime is indeterminate",
                cfg.ess_min
            ));
            let t = cfg.t_grid[i] as f64;
            (log_means[i] / t, f64::INFINITY, cfg.t_grid[i], true)
        }
    };

    let regime = if forced {
        UtilityRegime::Indeterminate
    } else if lambda > 2.0 * lambda_se {
        UtilityRegime::Diverges
    } else if lambda < -2.0 * lambda_se {
        UtilityRegime::DecaysToZero
    } else {
        UtilityRegime::Indeterminate
    };

    // Decay/growth rate from the whole uncensored curve.
    let fitted_rate = if uncensored.len() >= 2 {
        let xs: Vec<f64> = uncensored.iter().map(|&i| cfg.t_grid[i] as f64).collect();
        let ys: Vec<f64> = uncensored.iter().map(|&i| log_means[i]).collect();
        Some(slope_of(&xs, &ys))
    } else {
        notes.push("fewer than two uncensored horizons; no rate fitted".into());
        None
    };

    // Prefactor over the later half of the uncensored horizons.
    let d_alpha_hat = if uncensored.is_empty() {
        None
    } else {
        let later = &uncensored[uncensored.len() / 2..];
        let mean = later
            .iter()
            .map(|&i| eu[i] / (v0a * (lambda * cfg.t_grid[i] as f64).exp()))
            .sum::<f64>()
            / later.len() as f64;
        Some(mean)
    };

    let alpha0_ref = if cfg.probe_alpha0 && alpha < 0.0 {
        let probe = Alpha0Config {
            t: 16,
            paths: cfg.paths,
            seed: cfg.seed.wrapping_add(0xA1FA_0000),
        };
        match find_alpha0(model, strategy, (2.0 * alpha).min(-2.0), &probe) {
            Ok(r) => Some(r.alpha0),
            Err(e) => {
                notes.push(format!("utility-neutral index not located: {e}"));
                None
            }
        }
    } else {
        None
    };

    Ok(UtilityReport {
        model_name: model.name().to_string(),
        alpha,
        v0: cfg.v0,
        seed: cfg.seed,
        t_grid: cfg.t_grid.clone(),
        eu,
        eu_stderr,
        ess,
        censored,
        lambda_f_alpha: lambda,
        lambda_stderr: lambda_se,
        lambda_t_used: t_used,
        regime,
        fitted_rate,
        d_alpha_hat,
        alpha0_ref,
        notes,
    })
}

/// Zero-over-zero protection for the relative standard error.
fn sanitize_se(se: f64) -> f64 {
    if se.is_nan() {
        0.0
    } else {
        se
    }
}

fn slope_of(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    sxy / sxx
}

/// Fractional-power utility floor implied by a failure table.
#[derive(Debug, Clone)]
pub struct UtilityLowerBound {
    pub alpha: f64,
    pub b: f64,
    /// First horizon where the failure probability reached one half.
    pub t_half: Option<u64>,
    /// `(t, estimated E U, floor)` for horizons from `t_half` on.
    pub rows: Vec<(u64, f64, f64)>,
    /// Every estimated value sat on or above its floor.
    pub holds: bool,
}

/// Check the half-mass utility floor `E U(V_t) >= U(V_0 e^{b t}) / 2` for a
/// fractional power index, on the same ensemble the failure table came
/// from.
///
/// The floor is pathwise: success paths alone already carry utility
/// `(1 - p_fail) * V_0^alpha e^{alpha b t}`, so once `p_fail <= 1/2` the
/// empirical mean must sit above half the threshold utility — failures can
/// only add. A violation therefore indicates an inconsistency, not bad
/// luck.
pub fn aea_utility_lower_bound(
    report: &crate::arbitrage::GdpfReport,
    ensemble: &PathEnsemble,
    alpha: f64,
) -> Result<UtilityLowerBound> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "the utility floor needs a fractional power index in (0, 1), got {alpha}"
        )));
    }
    if ensemble.checkpoints() != report.t_grid.as_slice() {
        return Err(Error::InvalidConfig(
            "ensemble checkpoints do not match the failure report's horizon grid".into(),
        ));
    }
    let v0a = report.v0.powf(alpha);
    let t_half = report
        .t_grid
        .iter()
        .zip(&report.p_fail)
        .find(|&(_, &p)| p <= 0.5)
        .map(|(&t, _)| t);
    let mut rows = Vec::new();
    let mut holds = t_half.is_some();
    if let Some(t0) = t_half {
        for (c, &t) in report.t_grid.iter().enumerate() {
            if t < t0 {
                continue;
            }
            let s: Vec<f64> = ensemble.clean_s_at(c).collect();
            let stats = lse_stats(&s, alpha);
            let value = v0a * stats.log_mean.exp();
            let floor = 0.5 * v0a * (alpha * report.b * t as f64).exp();
            rows.push((t, value, floor));
            if value < floor {
                holds = false;
            }
        }
    }
    Ok(UtilityLowerBound { alpha, b: report.b, t_half, rows, holds })
}

/// Failure-decay rate implied by an expected-utility decay certificate.
#[derive(Debug, Clone, Copy)]
pub struct ConverseGdpf {
    pub c: f64,
    pub k_const: f64,
    pub alpha: f64,
    pub b: f64,
    /// Failure-probability decay rate at threshold `b`.
    pub c_prime: f64,
    /// Horizon shift after which the implied bound drops below one.
    pub time_shift: f64,
}

/// Convert a utility decay certificate `|E U(V_t)| <= K e^{-c t}` (negative
/// index `alpha`) into a failure-probability decay rate at threshold `b`:
///
/// ```text
/// P(V_t < V_0 e^{b t}) <= K' e^{-(c + alpha b) t}
/// ```
///
/// Admissible only while `c + alpha b > 0`; beyond `b = c / (-alpha)` the
/// certificate says nothing and the error reports that largest admissible
/// threshold.
pub fn converse_gdpf(c: f64, k_const: f64, alpha: f64, b: f64) -> Result<ConverseGdpf> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidConfig(format!("decay rate must be positive, got {c}")));
    }
    if !(k_const >= 1.0 && k_const.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "certificate constant must be at least 1, got {k_const}"
        )));
    }
    if !(alpha < 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "the converse direction needs a negative index, got {alpha}"
        )));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::InvalidConfig(format!("threshold must be positive, got {b}")));
    }
    let c_prime = c + alpha * b;
    if c_prime <= 0.0 {
        return Err(Error::AdmissibleBExceeded { max_b: c / (-alpha) });
    }
    Ok(ConverseGdpf { c, k_const, alpha, b, c_prime, time_shift: k_const.ln() / c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arbitrage::{certify_gdpf_with_ensemble, failure_probabilities, GdpfConfig};
    use crate::engine::{simulate, SimulationPlan};

    fn walk() -> MarketModel {
        MarketModel::drifted_walk(0.25).unwrap()
    }

    #[test]
    fn negative_unit_index_diverges_at_the_iid_rate() {
        // E exp(-S_t) = exp(t * (-0.25 + 0.5)) for the drifted walk, so the
        // exponent is 0.25 and E U goes to minus infinity.
        let spec = UtilitySpec::new(-1.0).unwrap();
        let mut cfg = UtilityConfig::new(301);
        cfg.paths = 200_000;
        let r = expected_utility_curve(&walk(), &Strategy::FullInvest, &spec, &cfg).unwrap();
        assert_eq!(r.regime, UtilityRegime::Diverges, "lambda = {}", r.lambda_f_alpha);
        assert!(
            (r.lambda_f_alpha - 0.25).abs() < 0.03,
            "exponent {} at t = {}",
            r.lambda_f_alpha,
            r.lambda_t_used
        );
        // Deep tilt: only short horizons resolve.
        assert!(r.lambda_t_used <= 12);
        assert!(r.censored.iter().any(|&c| c));
        // Utility itself is negative at every horizon.
        assert!(r.eu.iter().all(|&u| u < 0.0));
        // Exponential-curve prefactor is the utility sign.
        let d = r.d_alpha_hat.unwrap();
        assert!((d + 1.0).abs() < 0.05, "prefactor {d}");
        // The walk's utility-neutral index is -1/2.
        let a0 = r.alpha0_ref.unwrap();
        assert!((a0 + 0.5).abs() < 0.05, "alpha0 = {a0}");
    }

    #[test]
    fn shallow_negative_index_decays_at_the_iid_rate() {
        // Lambda(-1/4) = -1/16 + 1/32 = -0.03125 < 0.
        let spec = UtilitySpec::new(-0.25).unwrap();
        let mut cfg = UtilityConfig::new(303);
        cfg.paths = 200_000;
        let r = expected_utility_curve(&walk(), &Strategy::FullInvest, &spec, &cfg).unwrap();
        assert_eq!(r.regime, UtilityRegime::DecaysToZero, "lambda = {}", r.lambda_f_alpha);
        let rate = r.fitted_rate.unwrap();
        assert!(
            (rate + 0.03125).abs() < 0.3 * 0.03125,
            "fitted rate {rate} vs -0.03125"
        );
        assert!((r.lambda_f_alpha + 0.03125).abs() < 0.01);
    }

    #[test]
    fn all_cash_utility_is_exactly_flat_and_indeterminate() {
        let model = MarketModel::stable_ar(0.5).unwrap();
        let cash = Strategy::constant(0.0).unwrap();
        for alpha in [0.5, -1.0] {
            let spec = UtilitySpec::new(alpha).unwrap();
            let mut cfg = UtilityConfig::new(305);
            cfg.paths = 2_000;
            cfg.v0 = 2.0;
            cfg.probe_alpha0 = false;
            let r = expected_utility_curve(&model, &cash, &spec, &cfg).unwrap();
            let flat = spec.eval(2.0);
            for (&u, &se) in r.eu.iter().zip(&r.eu_stderr) {
                assert_eq!(u, flat);
                assert_eq!(se, 0.0);
            }
            assert_eq!(r.lambda_f_alpha, 0.0);
            assert_eq!(r.regime, UtilityRegime::Indeterminate);
            assert_eq!(r.fitted_rate, Some(0.0));
            assert_eq!(r.d_alpha_hat, Some(spec.sign()));
        }
    }

    #[test]
    fn fractional_index_grows_for_the_profitable_walk() {
        // Lambda(1/2) = 1/8 + 1/8 = 0.25 > 0: fractional utility diverges
        // (to plus infinity this time).
        let spec = UtilitySpec::new(0.5).unwrap();
        let mut cfg = UtilityConfig::new(307);
        cfg.paths = 100_000;
        let r = expected_utility_curve(&walk(), &Strategy::FullInvest, &spec, &cfg).unwrap();
        assert_eq!(r.regime, UtilityRegime::Diverges);
        assert!(r.eu.iter().all(|&u| u > 0.0));
        assert!((r.lambda_f_alpha - 0.25).abs() < 0.03);
    }

    #[test]
    fn utility_indices_are_validated() {
        assert!(UtilitySpec::new(0.5).is_ok());
        assert!(UtilitySpec::new(-3.0).is_ok());
        for bad in [0.0, 1.0, 1.5, f64::NAN, f64::INFINITY] {
            assert!(UtilitySpec::new(bad).is_err(), "accepted {bad}");
        }
    }

    #[test]
    fn utility_floor_holds_on_the_certification_ensemble() {
        let model = MarketModel::stable_ar(0.5).unwrap();
        let mut cfg = GdpfConfig::new(311);
        cfg.paths = 20_000;
        cfg.scgf_paths = 20_000;
        let (report, ensemble) =
            certify_gdpf_with_ensemble(&model, &Strategy::PositiveDriftIndicator, &cfg)
                .unwrap();
        let lb = aea_utility_lower_bound(&report, &ensemble, 0.5).unwrap();
        assert!(lb.t_half.is_some(), "failure never dropped to one half");
        assert!(lb.holds, "rows: {:?}", lb.rows);
        assert!(!lb.rows.is_empty());
        for &(t, value, floor) in &lb.rows {
            assert!(value >= floor, "floor fails at t = {t}: {value} < {floor}");
        }
        // Index domain is enforced.
        for bad in [-0.5, 0.0, 1.0, 1.5] {
            assert!(aea_utility_lower_bound(&report, &ensemble, bad).is_err());
        }
    }

    #[test]
    fn markov_inequality_binds_failure_to_utility_pathwise() {
        // 1{S < b t} <= exp(alpha (S - b t)) for alpha < 0, sample by
        // sample, so the empirical failure rate is dominated by the tilted
        // mean exactly, not just in expectation.
        let alpha = -0.5;
        let b = 0.1;
        let plan = SimulationPlan {
            model: walk(),
            strategy: Strategy::FullInvest,
            horizon: 64,
            paths: 20_000,
            seed: 313,
            checkpoints: vec![4, 16, 64],
            record_states: false,
        };
        let e = simulate(&plan).unwrap();
        let rows = failure_probabilities(&e, b);
        for (c, row) in rows.iter().enumerate() {
            let s: Vec<f64> = e.clean_s_at(c).collect();
            let stats = lse_stats(&s, alpha);
            let bound = (stats.log_mean - alpha * b * row.t as f64).exp();
            assert!(
                row.p_fail <= bound * (1.0 + 1e-12),
                "t = {}: {} > {}",
                row.t,
                row.p_fail,
                bound
            );
        }
    }

    #[test]
    fn converse_arithmetic_is_exact() {
        let r = converse_gdpf(0.03125, 1.0, -0.25, 0.1).unwrap();
        assert!((r.c_prime - 0.00625).abs() < 1e-12, "c' = {}", r.c_prime);
        assert_eq!(r.time_shift, 0.0);
        let shifted = converse_gdpf(0.03125, 2.0, -0.25, 0.1).unwrap();
        assert!((shifted.time_shift - 2.0f64.ln() / 0.03125).abs() < 1e-12);
    }

    #[test]
    fn converse_rejects_inadmissible_thresholds() {
        let err = converse_gdpf(0.03125, 1.0, -0.25, 0.2).unwrap_err();
        match err {
            Error::AdmissibleBExceeded { max_b } => {
                assert!((max_b - 0.125).abs() < 1e-12, "max_b = {max_b}");
            }
            other => panic!("expected the admissibility error, got {other:?}"),
        }
        // Parameter domains.
        assert!(converse_gdpf(-0.1, 1.0, -0.25, 0.1).is_err());
        assert!(converse_gdpf(0.1, 0.5, -0.25, 0.1).is_err());
        assert!(converse_gdpf(0.1, 1.0, 0.25, 0.1).is_err());
        assert!(converse_gdpf(0.1, 1.0, -0.25, -0.1).is_err());
    }

    #[test]
    fn decay_certificate_round_trips_through_the_converse() {
        // Estimate a utility decay rate for the indicator rule, feed it
        // through the converse, and confirm the implied failure rate is
        // positive and below the utility rate.
        let model = MarketModel::stable_ar(0.5).unwrap();
        let spec = UtilitySpec::new(-0.5).unwrap();
        let mut cfg = UtilityConfig::new(317);
        cfg.paths = 50_000;
        cfg.probe_alpha0 = false;
        let r = expected_utility_curve(&model, &Strategy::PositiveDriftIndicator, &spec, &cfg)
            .unwrap();
        assert_eq!(r.regime, UtilityRegime::DecaysToZero, "lambda = {}", r.lambda_f_alpha);
        let c = -r.fitted_rate.unwrap();
        assert!(c > 0.0);
        let b = c / 4.0 / 0.5; // well inside the admissible range c / 0.5
        let conv = converse_gdpf(c, 1.0, -0.5, b).unwrap();
        assert!(conv.c_prime > 0.0 && conv.c_prime < c);
        assert!((conv.c_prime - (c - 0.5 * b)).abs() < 1e-15);
    }
}
