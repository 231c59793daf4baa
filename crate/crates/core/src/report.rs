//! Plain-text serialization of analysis results.
//!
//! Every table goes out as CSV with `#`-prefixed comment lines carrying the
//! crate version, the seed (when the artifact has one), and scalar summary
//! fields; the table itself starts at the header row. Floats are printed
//! with Rust's shortest round-trip formatting, so `parse::<f64>()` on a
//! written field recovers the exact bits and files from identical runs are
//! identical bytes.

use std::io::Write;

use crate::arbitrage::GdpfReport;
use crate::engine::PathEnsemble;
use crate::ergodic::{ErgodicReport, Histogram2d};
use crate::error::Result;
use crate::ldp::{RateFunction, ScgfCurve};
use crate::utility::UtilityReport;
use crate::verify::{AssumptionReport, DriftCertificate};
use crate::VERSION;

fn opt(o: Option<f64>) -> String {
    match o {
        Some(v) => v.to_string(),
        None => "none".to_string(),
    }
}

/// Log-wealth (and, when recorded, state) of every path at every
/// checkpoint, one row per `(path, t)` pair.
pub fn write_ensemble_csv(w: &mut impl Write, e: &PathEnsemble) -> Result<()> {
    writeln!(w, "# longrun {} seed={}", VERSION, e.seed())?;
    let with_x = e.x_at(0).is_some();
    if with_x {
        writeln!(w, "path,t,s,x,clean")?;
    } else {
        writeln!(w, "path,t,s,clean")?;
    }
    for (c, &t) in e.checkpoints().iter().enumerate() {
        let s = e.s_at(c);
        let x = e.x_at(c);
        for p in 0..e.n_paths() {
            if let Some(xs) = x {
                writeln!(w, "{},{},{},{},{}", p, t, s[p], xs[p], e.is_clean(p))?;
            } else {
                writeln!(w, "{},{},{},{}", p, t, s[p], e.is_clean(p))?;
            }
        }
    }
    Ok(())
}

/// Scaled-CGF estimate per tilt, with validity grading.
pub fn write_scgf_csv(w: &mut impl Write, curve: &ScgfCurve, seed: u64) -> Result<()> {
    writeln!(w, "# longrun {} seed={}", VERSION, seed)?;
    writeln!(
        w,
        "# t_used={} m_used={} ess_min={}",
        curve.t_used, curve.m_used, curve.ess_min
    )?;
    writeln!(w, "theta,lambda,stderr,ess,valid")?;
    for i in 0..curve.theta.len() {
        writeln!(
            w,
            "{},{},{},{},{}",
            curve.theta[i], curve.lambda[i], curve.stderr[i], curve.ess[i], curve.valid[i]
        )?;
    }
    Ok(())
}

/// Convex conjugate of the estimated scaled CGF, with boundary flags.
pub fn write_rate_csv(w: &mut impl Write, rate: &RateFunction, seed: u64) -> Result<()> {
    writeln!(w, "# longrun {} seed={}", VERSION, seed)?;
    writeln!(w, "# argmin_x={} hull_vertices={}", rate.argmin_x, rate.hull_theta.len())?;
    writeln!(w, "x,lambda_star,boundary")?;
    for i in 0..rate.x.len() {
        writeln!(w, "{},{},{}", rate.x[i], rate.lambda_star[i], rate.boundary[i])?;
    }
    Ok(())
}

/// Failure-probability table plus the fitted and predicted decay rates.
pub fn write_gdpf_csv(w: &mut impl Write, r: &GdpfReport) -> Result<()> {
    writeln!(w, "# longrun {} seed={}", VERSION, r.seed)?;
    writeln!(
        w,
        "# model={} b={} auto_b={} v0={} n_clean={}",
        r.model_name, r.b, r.auto_b, r.v0, r.n_clean
    )?;
    writeln!(w, "# nu_f_hat={} nu_f_stderr={}", r.nu_f_hat, r.nu_f_stderr)?;
    writeln!(
        w,
        "# c_hat={} c_hat_censored={} intercept={} c_predicted={} verdict={}",
        opt(r.c_hat),
        r.c_hat_censored,
        opt(r.intercept),
        opt(r.c_predicted),
        r.verdict
    )?;
    for note in &r.notes {
        writeln!(w, "# note: {note}")?;
    }
    writeln!(w, "t,failures,p_fail,p_stderr,censored")?;
    for i in 0..r.t_grid.len() {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.t_grid[i], r.failures[i], r.p_fail[i], r.p_stderr[i], !r.estimable[i]
        )?;
    }
    Ok(())
}

/// Expected-utility curve with censoring flags and regime summary.
pub fn write_utility_csv(w: &mut impl Write, r: &UtilityReport) -> Result<()> {
    writeln!(w, "# longrun {} seed={}", VERSION, r.seed)?;
    writeln!(w, "# model={} alpha={} v0={}", r.model_name, r.alpha, r.v0)?;
    writeln!(
        w,
        "# lambda_f_alpha={} lambda_stderr={} lambda_t_used={} regime={}",
        r.lambda_f_alpha, r.lambda_stderr, r.lambda_t_used, r.regime
    )?;
    writeln!(
        w,
        "# fitted_rate={} d_alpha_hat={} alpha0_ref={}",
        opt(r.fitted_rate),
        opt(r.d_alpha_hat),
        opt(r.alpha0_ref)
    )?;
    for note in &r.notes {
        writeln!(w, "# note: {note}")?;
    }
    writeln!(w, "t,eu,eu_stderr,ess,censored")?;
    for i in 0..r.t_grid.len() {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.t_grid[i], r.eu[i], r.eu_stderr[i], r.ess[i], r.censored[i]
        )?;
    }
    Ok(())
}

/// Single-row summary of a time-average run.
pub fn write_ergodic_csv(w: &mut impl Write, r: &ErgodicReport, seed: u64) -> Result<()> {
    writeln!(w, "# longrun {} seed={}", VERSION, seed)?;
    writeln!(
        w,
        "nu_f_hat,nu_f_stderr,sigma2_f_hat,constant_f_flag,length,burn_in,batch_length,n_batches"
    )?;
    writeln!(
        w,
        "{},{},{},{},{},{},{},{}",
        r.nu_f_hat,
        r.nu_f_stderr,
        r.sigma2_f_hat,
        r.constant_f_flag,
        r.length,
        r.burn_in,
        r.batch_length,
        r.n_batches
    )?;
    Ok(())
}

/// Occupation histogram of consecutive state pairs, one row per cell.
pub fn write_histogram_csv(w: &mut impl Write, h: &Histogram2d, seed: u64) -> Result<()> {
    writeln!(w, "# longrun {} seed={}", VERSION, seed)?;
    writeln!(w, "# n_in_range={} n_out_of_range={}", h.n_in_range, h.n_out_of_range)?;
    writeln!(w, "ix,iy,x_lo,x_hi,y_lo,y_hi,mass")?;
    let g = &h.grid;
    let dx = (g.x_hi - g.x_lo) / g.nx as f64;
    let dy = (g.y_hi - g.y_lo) / g.ny as f64;
    for ix in 0..g.nx {
        for iy in 0..g.ny {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                ix,
                iy,
                g.x_lo + ix as f64 * dx,
                g.x_lo + (ix + 1) as f64 * dx,
                g.y_lo + iy as f64 * dy,
                g.y_lo + (iy + 1) as f64 * dy,
                h.cell(ix, iy)
            )?;
        }
    }
    Ok(())
}

/// Margin curve of a drift-certificate search, one row per audited level.
pub fn write_margin_csv(w: &mut impl Write, c: &DriftCertificate, seed: u64) -> Result<()> {
    writeln!(w, "# longrun {} seed={}", VERSION, seed)?;
    writeln!(
        w,
        "# feasible={} q={} delta={} k_radius={} lyapunov_offset={}",
        c.feasible,
        c.q,
        c.delta,
        opt(c.k_radius),
        opt(c.lyapunov_offset)
    )?;
    for note in &c.notes {
        writeln!(w, "# note: {note}")?;
    }
    writeln!(w, "x,margin")?;
    for (x, m) in c.margin_x.iter().zip(&c.margin) {
        writeln!(w, "{x},{m}")?;
    }
    Ok(())
}

/// Human-readable audit summary, one assumption per line.
pub fn write_assumption_report(w: &mut impl Write, r: &AssumptionReport) -> Result<()> {
    fn verdict(ok: bool) -> &'static str {
        if ok {
            "ok"
        } else {
            "FAIL"
        }
    }
    writeln!(w, "longrun {} assumption audit", VERSION)?;
    writeln!(w, "model: {}", r.model_name)?;
    writeln!(
        w,
        "a1 noise density positive and bounded on bulk window: {} (min={}, max={}, window=[{}, {}])",
        verdict(r.a1_ok),
        r.density_min,
        r.density_max,
        r.density_window.0,
        r.density_window.1
    )?;
    writeln!(
        w,
        "a2 volatility positive with finite bound: {} (min={}, bound={})",
        verdict(r.a2_ok),
        r.vol_min,
        r.vol_bound
    )?;
    writeln!(
        w,
        "a3 mean map contracts on the annulus: {} (sup ratio={})",
        verdict(r.a3_ok),
        r.a3_ratio_sup
    )?;
    writeln!(
        w,
        "a4 square-exponential noise moment: {} (kappa={}, value={})",
        verdict(r.a4_ok),
        r.kappa_used,
        r.i_value
    )?;
    writeln!(
        w,
        "positive-drift region nonempty: {} (fraction={})",
        verdict(r.rc_plus_ok),
        r.positive_drift_fraction
    )?;
    for (lo, hi) in &r.positive_drift_intervals {
        writeln!(w, "  positive-drift interval: [{lo}, {hi}]")?;
    }
    for note in &r.notes {
        writeln!(w, "note: {note}")?;
    }
    writeln!(w, "overall: {}", if r.all_ok() { "all checks passed" } else { "CHECKS FAILED" })?;
    Ok(())
}
