//! Self-financing single-asset allocation strategies.
//!
//! An allocation `pi` is the fraction of wealth held in the risky asset
//! over one period; the rest sits in cash. Wealth then compounds by
//!
//! ```text
//! V_t / V_{t-1} = (1 - pi) + pi * S_t / S_{t-1}
//!              = (1 - pi) + pi * exp(X_t - X_{t-1})
//! ```
//!
//! so the per-period log growth is
//!
//! ```text
//! f(x, y) = log((1 - pi(x)) + pi(x) * exp(y - x))
//! ```
//!
//! evaluated on the transition pair `(x, y) = (X_{t-1}, X_t)`. Allocations
//! are functions of the pre-transition state only. Every admissible `pi`
//! obeys the two-sided growth bound
//!
//! ```text
//! log(1/2) - |x| - |y|  <=  f(x, y)  <=  1 + |x| + |y|
//! ```
//!
//! which keeps ergodic averages of `f` well defined whenever the state
//! chain is stable.

use crate::error::{Error, Result};
use crate::model::MarketModel;

/// Allocation rule mapping the current state to a fraction in [0, 1].
#[derive(Debug, Clone)]
pub enum Strategy {
    /// Invest fully exactly where the drift is strictly positive, hold cash
    /// elsewhere. Ties (`mu(x) = 0`) allocate zero.
    PositiveDriftIndicator,
    /// Constant fraction of wealth in the asset.
    Constant { fraction: f64 },
    /// Everything in the asset, everywhere.
    FullInvest,
    /// Interval table `(lo, hi, fraction)`: the first row with
    /// `lo <= x < hi` wins, states outside every row allocate zero.
    Table { rows: Vec<(f64, f64, f64)> },
}

impl Strategy {
    pub fn constant(fraction: f64) -> Result<Self> {
        if !(fraction.is_finite() && (0.0..=1.0).contains(&fraction)) {
            return Err(Error::InvalidStrategy(format!(
                "fraction must lie in [0, 1], got {fraction}"
            )));
        }
        Ok(Strategy::Constant { fraction })
    }

    pub fn table(rows: Vec<(f64, f64, f64)>) -> Result<Self> {
        for &(lo, hi, frac) in &rows {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidStrategy(format!(
                    "interval [{lo}, {hi}) is not a proper finite interval"
                )));
            }
            if !(frac.is_finite() && (0.0..=1.0).contains(&frac)) {
                return Err(Error::InvalidStrategy(format!(
                    "fraction must lie in [0, 1], got {frac}"
                )));
            }
        }
        Ok(Strategy::Table { rows })
    }

    /// Allocation for the coming period, decided at state `x`.
    #[inline]
    pub fn allocate(&self, model: &MarketModel, x: f64) -> f64 {
        match self {
            Strategy::PositiveDriftIndicator => {
                if model.drift(x) > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Strategy::Constant { fraction } => *fraction,
            Strategy::FullInvest => 1.0,
            Strategy::Table { rows } => rows
                .iter()
                .find(|(lo, hi, _)| *lo <= x && x < *hi)
                .map(|(_, _, f)| *f)
                .unwrap_or(0.0),
        }
    }
}

/// Log growth of wealth over one transition `x -> y` at allocation `pi`.
///
/// Computed as `log1p(pi * expm1(y - x))`, which is exact at the three
/// boundary cases (`pi = 0` gives 0, `pi = 1` gives `y - x`, `y = x` gives
/// 0) and stays finite for any transition size: huge positive moves route
/// through a factored form instead of overflowing `exp`.
#[inline]
pub fn log_increment(pi: f64, x: f64, y: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&pi), "allocation {pi} outside [0, 1]");
    if pi <= 0.0 {
        return 0.0;
    }
    let d = y - x;
    if pi >= 1.0 {
        return d;
    }
    if d > 700.0 {
        // (1 - pi) + pi e^d = pi e^d * (1 + (1 - pi) / (pi e^d)).
        d + pi.ln() + ((1.0 - pi) / pi * (-d).exp()).ln_1p()
    } else {
        (pi * d.exp_m1()).ln_1p()
    }
}

/// Wealth along one path, tracked in log space.
///
/// The linear value is carried alongside for reporting while it remains
/// representable; once it leaves f64 range the state switches to the log
/// representation only and says so, rather than saturating silently.
#[derive(Debug, Clone)]
pub struct WealthState {
    v0: f64,
    log_sum: f64,
    linear: f64,
    log_only: bool,
}

impl WealthState {
    pub fn new(v0: f64) -> Result<Self> {
        if !(v0.is_finite() && v0 > 0.0) {
            return Err(Error::InvalidStrategy(format!(
                "initial wealth must be positive, got {v0}"
            )));
        }
        Ok(Self { v0, log_sum: 0.0, linear: v0, log_only: false })
    }

    /// Apply one period at allocation `pi` over the transition `x -> y`.
    /// Returns the log increment added.
    pub fn step(&mut self, pi: f64, x: f64, y: f64) -> f64 {
        let f = log_increment(pi, x, y);
        self.log_sum += f;
        if !self.log_only {
            self.linear *= f.exp();
            if !self.linear.is_finite() || self.linear == 0.0 {
                self.log_only = true;
                self.linear = f64::NAN;
            }
        }
        f
    }

    /// Current wealth. After a representation switch this re-exponentiates
    /// the log sum and may be infinite or zero.
    pub fn v(&self) -> f64 {
        if self.log_only {
            (self.v0.ln() + self.log_sum).exp()
        } else {
            self.linear
        }
    }

    /// Accumulated log growth `log(V_t / V_0)`.
    pub fn log_sum(&self) -> f64 {
        self.log_sum
    }

    pub fn v0(&self) -> f64 {
        self.v0
    }

    /// True once the linear value left f64 range.
    pub fn log_only(&self) -> bool {
        self.log_only
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TIGHT: f64 = 1e-12;

    #[test]
    fn positive_drift_rule_invests_exactly_where_drift_is_positive() {
        let m = MarketModel::stable_ar(0.5).unwrap();
        let s = Strategy::PositiveDriftIndicator;
        // mu(x) = -0.5 x: positive for x < 0, zero at the origin.
        assert_eq!(s.allocate(&m, -1.0), 1.0);
        assert_eq!(s.allocate(&m, 1.0), 0.0);
        assert_eq!(s.allocate(&m, 0.0), 0.0, "tie allocates zero");
    }

    #[test]
    fn table_strategy_matches_first_row_and_defaults_to_cash() {
        let m = MarketModel::stable_ar(0.5).unwrap();
        let s = Strategy::table(vec![(-2.0, 0.0, 0.75), (0.0, 1.0, 0.25)]).unwrap();
        assert_eq!(s.allocate(&m, -1.0), 0.75);
        assert_eq!(s.allocate(&m, 0.5), 0.25);
        assert_eq!(s.allocate(&m, 3.0), 0.0);
    }

    #[test]
    fn log_increment_boundary_cases_are_exact() {
        assert_eq!(log_increment(1.0, -1.0, 0.5), 1.5);
        assert_eq!(log_increment(0.0, -1.0, 0.5), 0.0);
        assert_eq!(log_increment(0.5, 0.0, 0.0), 0.0);
    }

    #[test]
    fn log_increment_survives_huge_moves() {
        let up = log_increment(0.5, 0.0, 800.0);
        assert!((up - (800.0 + 0.5f64.ln())).abs() < 1e-9, "up-move {up}");
        let down = log_increment(0.5, 0.0, -800.0);
        assert!((down - 0.5f64.ln()).abs() < TIGHT, "down-move {down}");
    }

    #[test]
    fn wealth_step_compounds_linearly_and_in_logs() {
        let mut w = WealthState::new(100.0).unwrap();
        // Price ratio 1.2 at half allocation: 100 * (0.5 + 0.5 * 1.2) = 110.
        w.step(0.5, 0.0, 1.2f64.ln());
        assert!((w.v() - 110.0).abs() < 1e-9, "v = {}", w.v());

        let mut w = WealthState::new(1.0).unwrap();
        w.step(1.0, 0.0, -0.5);
        assert!((w.v() - (-0.5f64).exp()).abs() < TIGHT, "v = {}", w.v());
        assert!((w.v() - 0.606_530_659_712_633_4).abs() < 1e-12);
    }

    #[test]
    fn linear_and_log_representations_agree_along_simulated_paths() {
        let m = MarketModel::stable_ar(0.5).unwrap();
        let strategies = [
            Strategy::PositiveDriftIndicator,
            Strategy::Constant { fraction: 0.3 },
            Strategy::FullInvest,
        ];
        for path in 0..1000u64 {
            let strat = &strategies[(path % 3) as usize];
            let mut x = m.x0();
            let mut w = WealthState::new(1.0).unwrap();
            for k in 0..500u64 {
                let pi = strat.allocate(&m, x);
                let eps = m.noise().draw(2024, path, k);
                let y = m.step(x, eps).unwrap();
                w.step(pi, x, y);
                assert!(!w.log_only());
                assert!(w.v() > 0.0);
                let drift = (w.v() / w.v0()).ln() - w.log_sum();
                assert!(
                    drift.abs() <= 1e-9 * (1.0 + w.log_sum().abs()),
                    "representations diverged on path {path} at step {k}: {drift}"
                );
                x = y;
            }
        }
    }

    #[test]
    fn wealth_switches_to_log_representation_on_overflow() {
        let mut w = WealthState::new(1.0).unwrap();
        for _ in 0..20 {
            w.step(1.0, 0.0, 100.0);
        }
        assert!(w.log_only());
        assert!((w.log_sum() - 2000.0).abs() < 1e-9);
        assert!(w.v().is_infinite(), "re-exponentiated value saturates");
    }

    #[test]
    fn indicator_strategy_growth_equals_move_or_zero() {
        let m = MarketModel::stable_ar(0.5).unwrap();
        let s = Strategy::PositiveDriftIndicator;
        for i in -20..=20 {
            let x = 0.25 * i as f64;
            let y = x + 0.37;
            let pi = s.allocate(&m, x);
            let f = log_increment(pi, x, y);
            if m.drift(x) > 0.0 {
                assert!((f - (y - x)).abs() < TIGHT);
            } else {
                assert_eq!(f, 0.0);
            }
        }
    }
}

#[cfg(test)]
mod prop_tests {
    use super::*;
    use crate::strategy::Strategy;
    use proptest::prelude::*;

    proptest! {
        /// Two-sided growth bound for arbitrary admissible allocations.
        #[test]
        fn log_increment_respects_the_growth_bound(
            pi in 0.0f64..=1.0,
            x in -700.0f64..700.0,
            y in -700.0f64..700.0,
        ) {
            let f = log_increment(pi, x, y);
            let lower = 0.5f64.ln() - x.abs() - y.abs();
            let upper = 1.0 + x.abs() + y.abs();
            prop_assert!(f.is_finite());
            prop_assert!(f >= lower - 1e-9, "f = {f}, lower = {lower}");
            prop_assert!(f <= upper + 1e-9, "f = {f}, upper = {upper}");
        }

        /// Allocations always land in [0, 1] whatever the table rows hold.
        #[test]
        fn table_allocations_stay_in_range(
            x in -100.0f64..100.0,
            lo in -50.0f64..0.0,
            width in 0.1f64..50.0,
            frac in 0.0f64..=1.0,
        ) {
            let m = MarketModel::stable_ar(0.5).unwrap();
            let s = Strategy::table(vec![(lo, lo + width, frac)]).unwrap();
            let pi = s.allocate(&m, x);
            prop_assert!((0.0..=1.0).contains(&pi));
        }

        /// One wealth period in linear space matches the log increment.
        #[test]
        fn wealth_step_matches_log_increment(
            pi in 0.0f64..=1.0,
            x in -5.0f64..5.0,
            d in -5.0f64..5.0,
        ) {
            let mut w = WealthState::new(2.5).unwrap();
            let f = w.step(pi, x, x + d);
            let expect = 2.5 * f.exp();
            prop_assert!((w.v() - expect).abs() <= 1e-12 * expect.max(1.0));
            prop_assert!((w.log_sum() - f).abs() < 1e-15);
        }
    }
}
