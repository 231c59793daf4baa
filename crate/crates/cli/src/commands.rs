//! Per-command runners: convert the typed config into library calls, write
//! the artifacts, and print a short summary.
//!
//! Artifact discipline: every run first writes `config.toml`, the effective
//! configuration echo. Analysis files are tracked as they are written; if
//! the run fails partway, the tracked files are removed so a directory never
//! holds a silently truncated table, and `error_report.txt` records what
//! happened. The echo survives either way.

use std::path::{Path, PathBuf};

use longrun::report::{
    write_assumption_report, write_ensemble_csv, write_ergodic_csv, write_gdpf_csv,
    write_histogram_csv, write_margin_csv, write_rate_csv, write_scgf_csv, write_utility_csv,
};
use longrun::{
    certify_gdpf, check_assumptions, empirical_invariant_histogram, ergodic_report,
    estimate_scgf, expected_utility_curve, legendre, search_drift_certificate, simulate,
    AssumptionReport, DriftCertificate, DriftSearchConfig, ErgodicConfig, ErgodicReport,
    GdpfConfig, GdpfReport, HistogramGrid, SimulationPlan, UtilityConfig, UtilityReport,
    UtilitySpec, VerifyConfig, VERSION,
};
use toml::value::Table;

use crate::config::{
    build_err, check_t_grid, linspace, run_err, CliError, ExperimentConfig,
};

// ---------------------------------------------------------------------------
// Output directory
// ---------------------------------------------------------------------------

/// A run's output directory, tracking which analysis files it has produced
/// so a failed run can take its partial outputs back down.
pub struct OutDir {
    root: PathBuf,
    tracked: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| {
            CliError::runtime(format!("cannot create output directory {}: {e}", root.display()))
        })?;
        Ok(Self { root: root.to_path_buf(), tracked: Vec::new() })
    }

    /// Write an analysis artifact rendered by `render`; removed on failure.
    pub fn write_tracked(
        &mut self,
        name: &str,
        render: impl FnOnce(&mut Vec<u8>) -> longrun::Result<()>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        render(&mut buf).map_err(run_err)?;
        let path = self.root.join(name);
        std::fs::write(&path, &buf)
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))?;
        self.tracked.push(path);
        Ok(())
    }

    /// Write a bookkeeping file that survives failure (echo, error report).
    pub fn write_untracked(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.root.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
    }

    fn cleanup_tracked(&mut self) {
        for path in self.tracked.drain(..) {
            let _ = std::fs::remove_file(path);
        }
    }
}

/// Create `out`, echo the effective config into it, run `f`, and on failure
/// remove the tracked artifacts (keeping an error report for runtime
/// failures).
pub fn in_outdir<T>(
    out: &Path,
    doc: &Table,
    command: &str,
    f: impl FnOnce(&mut OutDir) -> Result<T, CliError>,
) -> Result<T, CliError> {
    let mut od = OutDir::create(out)?;
    let echo = toml::to_string_pretty(doc)
        .map_err(|e| CliError::runtime(format!("cannot serialize config echo: {e}")))?;
    od.write_untracked("config.toml", &echo)?;
    match f(&mut od) {
        Ok(v) => Ok(v),
        Err(e) => {
            od.cleanup_tracked();
            if let CliError::Runtime(msg) = &e {
                let report = format!("longrun {VERSION}\ncommand: {command}\nerror: {msg}\n");
                // Best effort: the error itself must not be masked by a
                // reporting failure.
                let _ = od.write_untracked("error_report.txt", &report);
            }
            Err(e)
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

// ---------------------------------------------------------------------------
// Runners
// ---------------------------------------------------------------------------

pub fn run_simulate(cfg: &ExperimentConfig, od: &mut OutDir) -> Result<(), CliError> {
    let model = cfg.require_model()?;
    let strategy = cfg.strategy_or_default()?;
    let block = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| CliError::config("the simulate command requires a [simulate] table"))?;
    if block.horizon == 0 {
        return Err(CliError::config("[simulate] horizon must be at least 1"));
    }
    let checkpoints = block.checkpoints.clone().unwrap_or_else(|| vec![block.horizon]);
    check_t_grid(&checkpoints, "[simulate] checkpoints")?;
    if *checkpoints.last().expect("nonempty grid") > block.horizon {
        return Err(CliError::config("[simulate] checkpoints must not exceed the horizon"));
    }
    let plan = SimulationPlan {
        model,
        strategy,
        horizon: block.horizon,
        paths: block.paths.unwrap_or(1000),
        seed: cfg.seed(),
        checkpoints,
        record_states: block.record_states.unwrap_or(false),
    };
    let ensemble = simulate(&plan).map_err(run_err)?;
    od.write_tracked("ensemble.csv", |w| write_ensemble_csv(w, &ensemble))?;
    println!(
        "simulate: {} paths to horizon {} ({} checkpoints, {} flagged) -> ensemble.csv",
        ensemble.n_paths(),
        plan.horizon,
        ensemble.checkpoints().len(),
        ensemble.n_paths() - ensemble.n_clean(),
    );
    Ok(())
}

pub fn run_ergodic(cfg: &ExperimentConfig, od: &mut OutDir) -> Result<ErgodicReport, CliError> {
    let model = cfg.require_model()?;
    let strategy = cfg.strategy_or_default()?;
    let block = cfg.ergodic.clone().unwrap_or_default();
    let length = block.length.unwrap_or(1_000_000);
    let ecfg = ErgodicConfig {
        length,
        burn_in: block.burn_in,
        batch_length: block.batch_length,
        seed: cfg.seed(),
        path: 0,
    };
    let report = ergodic_report(&model, &strategy, &ecfg).map_err(run_err)?;
    od.write_tracked("ergodic.csv", |w| write_ergodic_csv(w, &report, ecfg.seed))?;
    println!(
        "ergodic: nu_f_hat={} stderr={} over {} steps (burn-in {}) -> ergodic.csv",
        report.nu_f_hat, report.nu_f_stderr, report.length, report.burn_in
    );
    if report.constant_f_flag {
        println!("ergodic: note: the growth increment is constant along the path");
    }
    if block.histogram.unwrap_or(false) {
        let half = block.histogram_half_width.unwrap_or(4.0);
        let bins = block.histogram_bins.unwrap_or(40);
        if !(half.is_finite() && half > 0.0) {
            return Err(CliError::config("[ergodic] histogram_half_width must be positive"));
        }
        if bins == 0 {
            return Err(CliError::config("[ergodic] histogram_bins must be at least 1"));
        }
        let burn = block.burn_in.unwrap_or_else(|| 1000.max(length / 100));
        let grid = HistogramGrid::square(half, bins);
        let hist = empirical_invariant_histogram(&model, length, burn, grid, ecfg.seed)
            .map_err(run_err)?;
        od.write_tracked("histogram.csv", |w| write_histogram_csv(w, &hist, ecfg.seed))?;
        println!(
            "ergodic: histogram {}x{} cells, {} of {} pairs in range -> histogram.csv",
            bins,
            bins,
            hist.n_in_range,
            hist.n_in_range + hist.n_out_of_range
        );
    }
    Ok(report)
}

pub fn run_scgf(cfg: &ExperimentConfig, od: &mut OutDir) -> Result<(), CliError> {
    let model = cfg.require_model()?;
    let strategy = cfg.strategy_or_default()?;
    let block = cfg.scgf.clone().unwrap_or_default();
    let t = block.t.unwrap_or(200);
    if t == 0 {
        return Err(CliError::config("[scgf] t must be at least 1"));
    }
    let paths = block.paths.unwrap_or(100_000);
    let theta_grid = linspace(
        block.theta_min.unwrap_or(-1.0),
        block.theta_max.unwrap_or(1.0),
        block.theta_points.unwrap_or(41),
        "[scgf] theta grid",
    )?;
    if !theta_grid.contains(&0.0) {
        return Err(CliError::config(
            "[scgf] theta grid must contain zero; adjust theta_min/theta_max/theta_points",
        ));
    }
    let x_grid = linspace(
        block.x_min.unwrap_or(-1.0),
        block.x_max.unwrap_or(1.0),
        block.x_points.unwrap_or(201),
        "[scgf] x grid",
    )?;
    let ess_min = block.ess_min.unwrap_or(100.0);

    let plan = SimulationPlan::to_horizon(model, strategy, t, paths, cfg.seed());
    let ensemble = simulate(&plan).map_err(run_err)?;
    let curve = estimate_scgf(&ensemble, &theta_grid, ess_min).map_err(run_err)?;
    od.write_tracked("scgf.csv", |w| write_scgf_csv(w, &curve, cfg.seed()))?;
    println!(
        "scgf: {} of {} tilt points valid at t={} with {} clean paths -> scgf.csv",
        curve.n_valid(),
        curve.theta.len(),
        curve.t_used,
        curve.m_used
    );

    match legendre(&curve, &x_grid) {
        Ok(rate) => {
            od.write_tracked("rate.csv", |w| write_rate_csv(w, &rate, cfg.seed()))?;
            println!("scgf: rate function argmin at x={} -> rate.csv", rate.argmin_x);
        }
        Err(e @ longrun::Error::InsufficientValidPoints { .. }) => {
            let text = format!(
                "# longrun {} seed={}\n# rate function not computed: {e}\nx,lambda_star,boundary\n",
                VERSION,
                cfg.seed()
            );
            od.write_untracked("rate.csv", &text)?;
            eprintln!("warning: rate function not computed: {e}");
        }
        Err(e) => return Err(run_err(e)),
    }
    Ok(())
}

pub fn run_gdpf(cfg: &ExperimentConfig, od: &mut OutDir) -> Result<GdpfReport, CliError> {
    let model = cfg.require_model()?;
    let strategy = cfg.strategy_or_default()?;
    let block = cfg.gdpf.clone().unwrap_or_default();
    let mut gcfg = GdpfConfig::new(cfg.seed());
    if let Some(grid) = block.t_grid {
        check_t_grid(&grid, "[gdpf] t_grid")?;
        gcfg.t_grid = grid;
    }
    if let Some(p) = block.paths {
        gcfg.paths = p;
    }
    if let Some(b) = block.b {
        if !(b.is_finite() && b > 0.0) {
            return Err(CliError::config(format!(
                "[gdpf] b must be a positive growth rate, got {b}"
            )));
        }
        gcfg.b = Some(b);
    }
    if let Some(v0) = block.v0 {
        if !(v0.is_finite() && v0 > 0.0) {
            return Err(CliError::config(format!("[gdpf] v0 must be positive, got {v0}")));
        }
        gcfg.v0 = v0;
    }
    if let Some(l) = block.ergodic_length {
        gcfg.ergodic_length = l;
    }
    if let Some(t) = block.scgf_t {
        if t == 0 {
            return Err(CliError::config("[gdpf] scgf_t must be at least 1"));
        }
        gcfg.scgf_t = t;
    }
    if let Some(p) = block.scgf_paths {
        gcfg.scgf_paths = p;
    }

    let report = certify_gdpf(&model, &strategy, &gcfg).map_err(run_err)?;
    od.write_tracked("gdpf.csv", |w| write_gdpf_csv(w, &report))?;
    od.write_tracked("gdpf_logp.dat", |w| write_logp_data(w, &report))?;
    println!(
        "gdpf: verdict={} b={}{} c_hat={} c_predicted={} -> gdpf.csv, gdpf_logp.dat",
        report.verdict,
        report.b,
        if report.auto_b { " (auto)" } else { "" },
        fmt_opt(report.c_hat),
        fmt_opt(report.c_predicted),
    );
    Ok(report)
}

/// Two-column `t  ln(p_fail)` points for plotting, one per horizon whose
/// failure probability is regression-grade.
fn write_logp_data(w: &mut impl std::io::Write, r: &GdpfReport) -> longrun::Result<()> {
    writeln!(w, "# longrun {} seed={}", VERSION, r.seed)?;
    writeln!(w, "# model={} b={}", r.model_name, r.b)?;
    writeln!(w, "# t ln_p_fail")?;
    for i in 0..r.t_grid.len() {
        if r.estimable[i] && r.p_fail[i] > 0.0 {
            writeln!(w, "{} {}", r.t_grid[i], r.p_fail[i].ln())?;
        }
    }
    Ok(())
}

pub fn run_utility(cfg: &ExperimentConfig, od: &mut OutDir) -> Result<UtilityReport, CliError> {
    let model = cfg.require_model()?;
    let strategy = cfg.strategy_or_default()?;
    let block = cfg
        .utility
        .as_ref()
        .ok_or_else(|| CliError::config("the utility command requires a [utility] table with alpha"))?;
    let spec = UtilitySpec::new(block.alpha).map_err(build_err)?;
    let mut ucfg = UtilityConfig::new(cfg.seed());
    if let Some(grid) = &block.t_grid {
        check_t_grid(grid, "[utility] t_grid")?;
        ucfg.t_grid = grid.clone();
    }
    if let Some(p) = block.paths {
        ucfg.paths = p;
    }
    if let Some(v0) = block.v0 {
        if !(v0.is_finite() && v0 > 0.0) {
            return Err(CliError::config(format!("[utility] v0 must be positive, got {v0}")));
        }
        ucfg.v0 = v0;
    }
    if let Some(e) = block.ess_min {
        if !(e.is_finite() && e >= 1.0) {
            return Err(CliError::config(format!("[utility] ess_min must be at least 1, got {e}")));
        }
        ucfg.ess_min = e;
    }
    if let Some(p) = block.probe_alpha0 {
        ucfg.probe_alpha0 = p;
    }

    let report = expected_utility_curve(&model, &strategy, &spec, &ucfg).map_err(run_err)?;
    od.write_tracked("utility.csv", |w| write_utility_csv(w, &report))?;
    println!(
        "utility: alpha={} regime={} lambda_f_alpha={} stderr={} fitted_rate={} alpha0_ref={} -> utility.csv",
        report.alpha,
        report.regime,
        report.lambda_f_alpha,
        report.lambda_stderr,
        fmt_opt(report.fitted_rate),
        fmt_opt(report.alpha0_ref),
    );
    Ok(report)
}

pub fn run_verify(cfg: &ExperimentConfig, od: &mut OutDir) -> Result<AssumptionReport, CliError> {
    let model = cfg.require_model()?;
    let block = cfg.verify.clone().unwrap_or_default();
    let mut vcfg = VerifyConfig::default();
    if let Some(v) = block.x_max {
        vcfg.x_max = v;
    }
    if let Some(v) = block.annulus_lo {
        vcfg.annulus_lo = v;
    }
    if let Some(v) = block.grid_points {
        vcfg.grid_points = v;
    }
    if let Some(v) = block.eta {
        vcfg.eta = v;
    }
    if let Some(v) = block.density_tail_mass {
        vcfg.density_tail_mass = v;
    }
    let report = check_assumptions(&model, &vcfg).map_err(build_err)?;
    od.write_tracked("assumptions.txt", |w| write_assumption_report(w, &report))?;
    let flag = |ok: bool| if ok { "ok" } else { "FAIL" };
    println!(
        "verify: a1={} a2={} a3={} a4={} rc_plus={} -> assumptions.txt",
        flag(report.a1_ok),
        flag(report.a2_ok),
        flag(report.a3_ok),
        flag(report.a4_ok),
        flag(report.rc_plus_ok),
    );
    println!(
        "verify: {}",
        if report.all_ok() {
            "all audited assumptions hold"
        } else {
            "some assumptions FAIL; see assumptions.txt"
        }
    );
    Ok(report)
}

pub fn run_drift_check(
    cfg: &ExperimentConfig,
    od: &mut OutDir,
) -> Result<DriftCertificate, CliError> {
    let model = cfg.require_model()?;
    let block = cfg.drift_check.clone().unwrap_or_default();
    let mut dcfg = DriftSearchConfig::default();
    if let Some(g) = block.q_grid {
        dcfg.q_grid = g;
    }
    if let Some(g) = block.delta_grid {
        dcfg.delta_grid = g;
    }
    if let Some(v) = block.x_max {
        dcfg.x_max = v;
    }
    if let Some(v) = block.grid_points {
        dcfg.grid_points = v;
    }
    let cert = search_drift_certificate(&model, &dcfg).map_err(build_err)?;
    od.write_tracked("drift.csv", |w| write_margin_csv(w, &cert, cfg.seed()))?;
    if cert.feasible {
        println!(
            "drift-check: certificate found at q={} delta={} with K={} offset={} -> drift.csv",
            cert.q,
            cert.delta,
            fmt_opt(cert.k_radius),
            fmt_opt(cert.lyapunov_offset),
        );
    } else {
        println!("drift-check: no certificate on the searched grids -> drift.csv");
    }
    Ok(cert)
}
