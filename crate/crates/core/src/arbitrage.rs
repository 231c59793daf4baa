//! Certification of exponentially decaying failure probabilities.
//!
//! For a strategy with long-run log growth `nu > 0` and a growth threshold
//! `b` below `nu`, the failure event at horizon `t` is
//!
//! ```text
//! V_t < V_0 * exp(b t)   i.e.   S_t < b t
//! ```
//!
//! with `S_t` the accumulated log growth. The certification estimates the
//! failure probability on a horizon grid, fits its exponential decay rate,
//! compares it with the rate-function prediction at slope `b`, and issues a
//! three-way verdict:
//!
//! * `Refuted` — some late-horizon failure probability sits provably above
//!   every exponential envelope (up to sampling error);
//! * `Supported` — failures decay exponentially within sampling error, or
//!   vanish outright at the achievable resolution (censored bound);
//! * `Inconclusive` — neither pattern is established.
//!
//! All thresholds are explicit in the code and the report carries the full
//! table, so a verdict can always be audited.

use crate::engine::{simulate, PathEnsemble, SimulationPlan};
use crate::ergodic::{ergodic_report, ErgodicConfig};
use crate::error::{Error, Result};
use crate::ldp::{estimate_scgf, legendre, DEFAULT_ESS_MIN};
use crate::model::MarketModel;
use crate::strategy::Strategy;

/// Decay rate below which "exponential decay" is considered vacuous: the
/// refutation test asks whether the data even allow a decay this slow.
const C_MIN: f64 = 1e-4;

/// Minimum failure and success counts for a probability to support a log
/// regression point.
const MIN_TAIL_COUNT: u64 = 10;

/// Verdict of the failure-decay certification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GdpfVerdict {
    Supported,
    Inconclusive,
    Refuted,
}

impl std::fmt::Display for GdpfVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            GdpfVerdict::Supported => "supported",
            GdpfVerdict::Inconclusive => "inconclusive",
            GdpfVerdict::Refuted => "refuted",
        };
        f.write_str(s)
    }
}

/// Configuration of the certification run.
#[derive(Debug, Clone)]
pub struct GdpfConfig {
    /// Horizons at which failure is measured.
    pub t_grid: Vec<u64>,
    /// Monte Carlo paths for the failure table.
    pub paths: usize,
    pub seed: u64,
    /// Initial wealth (the threshold is relative to it, so it only matters
    /// for derived wealth-level reporting).
    pub v0: f64,
    /// Growth threshold rate; `None` picks half the estimated long-run
    /// growth, which requires that growth to be positive.
    pub b: Option<f64>,
    /// Path length for the long-run growth estimate.
    pub ergodic_length: u64,
    /// Horizon and size of the separate ensemble behind the rate-function
    /// prediction.
    pub scgf_t: u64,
    pub scgf_paths: usize,
    /// Tilt grid for that prediction; must contain zero.
    pub theta_grid: Vec<f64>,
}

impl GdpfConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            t_grid: vec![25, 50, 75, 100, 150, 200, 300, 400],
            paths: 100_000,
            seed,
            v0: 1.0,
            b: None,
            ergodic_length: 2_000_000,
            scgf_t: 100,
            scgf_paths: 100_000,
            theta_grid: (0..=40).map(|i| -1.0 + 0.05 * i as f64).collect(),
        }
    }
}

/// One row of the failure table.
#[derive(Debug, Clone, Copy)]
pub struct FailureRow {
    pub t: u64,
    pub failures: u64,
    pub p_fail: f64,
    /// Binomial standard error.
    pub stderr: f64,
    /// Both failure and success counts reached `MIN_TAIL_COUNT`, so the
    /// log-probability is regression-grade.
    pub estimable: bool,
}

/// Failure frequencies of `S_t < b t` at every checkpoint of an ensemble.
pub fn failure_probabilities(ensemble: &PathEnsemble, b: f64) -> Vec<FailureRow> {
    let n = ensemble.n_clean() as u64;
    ensemble
        .checkpoints()
        .iter()
        .enumerate()
        .map(|(c, &t)| {
            let threshold = b * t as f64;
            let failures = ensemble.clean_s_at(c).filter(|&s| s < threshold).count() as u64;
            let p = failures as f64 / n as f64;
            FailureRow {
                t,
                failures,
                p_fail: p,
                stderr: (p * (1.0 - p) / n as f64).sqrt(),
                estimable: failures >= MIN_TAIL_COUNT && (n - failures) >= MIN_TAIL_COUNT,
            }
        })
        .collect()
}

/// Full certification report.
#[derive(Debug, Clone)]
pub struct GdpfReport {
    pub model_name: String,
    /// Threshold rate actually used.
    pub b: f64,
    /// Whether `b` was derived from the growth estimate.
    pub auto_b: bool,
    pub v0: f64,
    pub seed: u64,
    pub n_clean: usize,
    pub nu_f_hat: f64,
    pub nu_f_stderr: f64,
    pub t_grid: Vec<u64>,
    pub p_fail: Vec<f64>,
    pub p_stderr: Vec<f64>,
    pub failures: Vec<u64>,
    pub estimable: Vec<bool>,
    /// Fitted decay rate (minus the slope of `log p` against `t`), or the
    /// censored lower bound when failures vanish entirely.
    pub c_hat: Option<f64>,
    pub c_hat_censored: bool,
    /// Intercept of the fit, present exactly when `c_hat` was fitted.
    pub intercept: Option<f64>,
    /// Rate-function prediction at slope `b` from an independent ensemble.
    pub c_predicted: Option<f64>,
    pub verdict: GdpfVerdict,
    pub notes: Vec<String>,
}

/// Run the certification and also return the ensemble it measured, for
/// downstream checks that must share the same paths.
pub fn certify_gdpf_with_ensemble(
    model: &MarketModel,
    strategy: &Strategy,
    cfg: &GdpfConfig,
) -> Result<(GdpfReport, PathEnsemble)> {
    if cfg.t_grid.is_empty() || cfg.t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(
            "horizon grid must be nonempty and strictly increasing".into(),
        ));
    }
    if cfg.paths < 100 {
        return Err(Error::InvalidConfig("need at least 100 paths".into()));
    }
    if !(cfg.v0 > 0.0 && cfg.v0.is_finite()) {
        return Err(Error::InvalidConfig(format!("v0 must be positive, got {}", cfg.v0)));
    }
    let mut notes = Vec::new();

    // Long-run growth; used for the automatic threshold and reported always.
    let erg = ergodic_report(
        model,
        strategy,
        &ErgodicConfig::new(cfg.ergodic_length, cfg.seed.wrapping_add(0x0EC0_0D1C)),
    )?;
    let (nu, nu_se) = (erg.nu_f_hat, erg.nu_f_stderr);

    let (b, auto_b) = match cfg.b {
        Some(b) if b.is_finite() => (b, false),
        Some(b) => {
            return Err(Error::InvalidConfig(format!("threshold rate must be finite, got {b}")))
        }
        None => {
            if nu <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "automatic threshold needs positive long-run growth, estimated {nu}"
                )));
            }
            if nu <= 4.0 * nu_se {
                notes.push(format!(
                    "long-run growth {nu} is within 4 standard errors of zero; the automatic \
                     threshold is weakly grounded"
                ));
            }
            (nu / 2.0, true)
        }
    };

    let plan = SimulationPlan {
        model: model.clone(),
        strategy: strategy.clone(),
        horizon: *cfg.t_grid.last().unwrap(),
        paths: cfg.paths,
        seed: cfg.seed,
        checkpoints: cfg.t_grid.clone(),
        record_states: false,
    };
    let ensemble = simulate(&plan)?;
    if ensemble.n_clean() < 100 {
        return Err(Error::InvalidConfig(format!(
            "only {} clean paths survived simulation",
            ensemble.n_clean()
        )));
    }
    let rows = failure_probabilities(&ensemble, b);

    // Decay-rate fit over regression-grade rows.
    let fit_rows: Vec<&FailureRow> = rows.iter().filter(|r| r.estimable).collect();
    let (mut c_hat, mut intercept, mut censored) = (None, None, false);
    if fit_rows.len() >= 4 {
        let (slope, icept) = least_squares(
            &fit_rows.iter().map(|r| r.t as f64).collect::<Vec<_>>(),
            &fit_rows.iter().map(|r| r.p_fail.ln()).collect::<Vec<_>>(),
        );
        c_hat = Some(-slope);
        intercept = Some(icept);
    } else if rows.iter().all(|r| r.failures == 0) {
        // No failures anywhere: decay outran the resolution. Report the
        // rate the grid could still have detected.
        let t_max = *cfg.t_grid.last().unwrap() as f64;
        c_hat = Some((ensemble.n_clean() as f64 / MIN_TAIL_COUNT as f64).ln() / t_max);
        censored = true;
        notes.push(format!(
            "no failures in {} paths at any horizon; reported rate is a censored lower bound",
            ensemble.n_clean()
        ));
    } else {
        notes.push(format!(
            "only {} regression-grade horizons; no decay rate fitted",
            fit_rows.len()
        ));
    }

    // Independent rate-function prediction at slope b.
    let c_predicted = match predict_rate(model, strategy, cfg, b) {
        Ok(Some(v)) => Some(v),
        Ok(None) => {
            notes.push(
                "rate-function prediction at the threshold slope fell outside the reliable \
                 tilt range"
                    .into(),
            );
            None
        }
        Err(e) => {
            notes.push(format!("rate-function prediction unavailable: {e}"));
            None
        }
    };

    let verdict = decide_verdict(&rows, c_hat, intercept, censored, &mut notes);

    let report = GdpfReport {
        model_name: model.name().to_string(),
        b,
        auto_b,
        v0: cfg.v0,
        seed: cfg.seed,
        n_clean: ensemble.n_clean(),
        nu_f_hat: nu,
        nu_f_stderr: nu_se,
        t_grid: cfg.t_grid.clone(),
        p_fail: rows.iter().map(|r| r.p_fail).collect(),
        p_stderr: rows.iter().map(|r| r.stderr).collect(),
        failures: rows.iter().map(|r| r.failures).collect(),
        estimable: rows.iter().map(|r| r.estimable).collect(),
        c_hat,
        c_hat_censored: censored,
        intercept,
        c_predicted,
        verdict,
        notes,
    };
    Ok((report, ensemble))
}

/// Run the certification, keeping only the report.
pub fn certify_gdpf(
    model: &MarketModel,
    strategy: &Strategy,
    cfg: &GdpfConfig,
) -> Result<GdpfReport> {
    Ok(certify_gdpf_with_ensemble(model, strategy, cfg)?.0)
}

/// Rate-function prediction `Lambda*(b)` from a dedicated shorter-horizon
/// ensemble. `None` when the conjugate at `b` is grid-boundary limited.
fn predict_rate(
    model: &MarketModel,
    strategy: &Strategy,
    cfg: &GdpfConfig,
    b: f64,
) -> Result<Option<f64>> {
    let plan = SimulationPlan::to_horizon(
        model.clone(),
        strategy.clone(),
        cfg.scgf_t,
        cfg.scgf_paths,
        cfg.seed.wrapping_add(0x5C6F_0001),
    );
    let ensemble = simulate(&plan)?;
    let curve = estimate_scgf(&ensemble, &cfg.theta_grid, DEFAULT_ESS_MIN)?;
    let rf = legendre(&curve, &[b])?;
    if rf.boundary[0] || !rf.lambda_star[0].is_finite() {
        return Ok(None);
    }
    Ok(Some(rf.lambda_star[0]))
}

/// Ordinary least squares `y = slope * x + intercept`.
fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Indices of the upper half of a grid (later horizons).
fn upper_half(len: usize) -> std::ops::Range<usize> {
    len / 2..len
}

fn decide_verdict(
    rows: &[FailureRow],
    c_hat: Option<f64>,
    intercept: Option<f64>,
    censored: bool,
    notes: &mut Vec<String>,
) -> GdpfVerdict {
    // Refutation: a late horizon where the failure probability exceeds even
    // the slowest admissible exponential envelope by five standard errors.
    for i in upper_half(rows.len()) {
        let r = &rows[i];
        let envelope = (-C_MIN * r.t as f64).exp();
        if r.p_fail > envelope + 5.0 * r.stderr {
            notes.push(format!(
                "failure probability {} at t = {} is incompatible with exponential decay",
                r.p_fail, r.t
            ));
            return GdpfVerdict::Refuted;
        }
    }
    // Support via censoring: failures vanished at the achievable resolution.
    if censored {
        return GdpfVerdict::Supported;
    }
    let late_failures_gone = upper_half(rows.len()).all(|i| rows[i].failures == 0);
    let early_decay = rows.iter().any(|r| r.estimable && r.p_fail < 0.5);
    if late_failures_gone && early_decay {
        notes.push(
            "late-horizon failures vanished entirely; decay is supported by censoring".into(),
        );
        return GdpfVerdict::Supported;
    }
    // Support via fit: positive fitted rate whose envelope and monotone
    // decay hold across the late horizons within sampling error.
    if let (Some(c), Some(icept)) = (c_hat, intercept) {
        if c > 0.0 {
            let mut ok = true;
            for i in upper_half(rows.len()) {
                let r = &rows[i];
                if !r.estimable {
                    continue; // tiny counts only strengthen decay
                }
                let fit = (icept - c * r.t as f64).exp();
                if r.p_fail > 2.0 * fit + 5.0 * r.stderr {
                    notes.push(format!(
                        "failure probability at t = {} escapes the fitted envelope",
                        r.t
                    ));
                    ok = false;
                    break;
                }
            }
            if ok {
                for w in rows[upper_half(rows.len())].windows(2) {
                    if w[1].p_fail > w[0].p_fail + 3.0 * (w[0].stderr + w[1].stderr) {
                        notes.push(format!(
                            "failure probability rises between t = {} and t = {}",
                            w[0].t, w[1].t
                        ));
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                return GdpfVerdict::Supported;
            }
        } else {
            notes.push(format!("fitted decay rate {c} is not positive"));
        }
    }
    GdpfVerdict::Inconclusive
}

/// Result of checking one explicit exponential envelope against the table.
#[derive(Debug, Clone)]
pub struct AeaCheck {
    pub c: f64,
    /// `p_fail(t) <= exp(-c t)` at every late horizon.
    pub holds: bool,
    pub checked_ts: Vec<u64>,
    pub first_violation: Option<u64>,
}

/// Check a candidate decay rate `c` against the report's late horizons.
///
/// A raw point comparison with no sampling-error allowance: useful for
/// table lookups and for probing how much rate the data support. Positive
/// rates only.
pub fn aea_check(report: &GdpfReport, c: f64) -> AeaCheck {
    let range = upper_half(report.t_grid.len());
    let mut checked = Vec::new();
    let mut first_violation = None;
    for i in range {
        let t = report.t_grid[i];
        checked.push(t);
        if report.p_fail[i] > (-c * t as f64).exp() && first_violation.is_none() {
            first_violation = Some(t);
        }
    }
    AeaCheck { c, holds: first_violation.is_none(), checked_ts: checked, first_violation }
}
