//! The `paper-suite` command: the three built-in example models run
//! end-to-end with pinned seeds, plus an all-cash control, each into its own
//! subdirectory, finished with a one-table summary.
//!
//! Scenario seeds are pinned (the suite is a reference run, reproducible
//! byte for byte), so the global `--seed` flag deliberately has no effect
//! here.

use std::path::Path;

use longrun::VERSION;
use toml::value::{Table, Value};

use crate::commands::{in_outdir, run_gdpf, run_utility, run_verify, OutDir};
use crate::config::{CliError, ExperimentConfig};

struct Row {
    scenario: &'static str,
    model: String,
    strategy: &'static str,
    quantity: &'static str,
    estimate: f64,
    stderr: f64,
    verdict: String,
}

/// Parse a pinned scenario document and run its body inside its own
/// subdirectory, echo and cleanup discipline included.
fn scenario<T>(
    root: &Path,
    name: &'static str,
    doc: &Table,
    f: impl FnOnce(&ExperimentConfig, &mut OutDir) -> Result<T, CliError>,
) -> Result<T, CliError> {
    println!("--- scenario {name} ---");
    let cfg: ExperimentConfig = Value::Table(doc.clone())
        .try_into()
        .map_err(|e| CliError::runtime(format!("internal error in scenario {name}: {e}")))?;
    in_outdir(&root.join(name), doc, name, |od| f(&cfg, od))
}

pub fn run_paper_suite(out_root: &Path) -> Result<(), CliError> {
    let mut rows = Vec::new();

    // Mean-reverting model, invest-on-positive-drift rule: the flagship
    // case. Audit the standing assumptions, then certify the failure decay.
    let doc = toml::toml! {
        seed = 1592721409

        [model]
        kind = "stable_ar"
        alpha = 0.5

        [strategy]
        kind = "positive_drift"

        [gdpf]
        paths = 20000
        scgf_paths = 50000
    };
    let report = scenario(out_root, "stable_ar_pi_plus", &doc, |cfg, od| {
        run_verify(cfg, od)?;
        run_gdpf(cfg, od)
    })?;
    rows.push(Row {
        scenario: "stable_ar_pi_plus",
        model: report.model_name.clone(),
        strategy: "positive_drift",
        quantity: "nu_f_hat",
        estimate: report.nu_f_hat,
        stderr: report.nu_f_stderr,
        verdict: format!("gdpf_{}", report.verdict),
    });
    let control_b = report.b;

    // Square-root-volatility variant of the same trade.
    let doc = toml::toml! {
        seed = 1592721410

        [model]
        kind = "clamped_cir"
        alpha = 0.5
        sigma0 = 1.0
        c_lo = 0.5
        c_hi = 2.0

        [strategy]
        kind = "positive_drift"

        [gdpf]
        paths = 20000
        scgf_paths = 50000
    };
    let report = scenario(out_root, "clamped_cir_pi_plus", &doc, |cfg, od| {
        run_verify(cfg, od)?;
        run_gdpf(cfg, od)
    })?;
    rows.push(Row {
        scenario: "clamped_cir_pi_plus",
        model: report.model_name.clone(),
        strategy: "positive_drift",
        quantity: "nu_f_hat",
        estimate: report.nu_f_hat,
        stderr: report.nu_f_stderr,
        verdict: format!("gdpf_{}", report.verdict),
    });

    // Drifted walk under a sharply risk-averse index: expected utility
    // diverges even though the strategy keeps growing wealth.
    let doc = toml::toml! {
        seed = 1592721411

        [model]
        kind = "drifted_walk"
        m = 0.25

        [strategy]
        kind = "full"

        [utility]
        alpha = -1.0
        paths = 100000
    };
    let report = scenario(out_root, "drifted_walk_utility", &doc, run_utility)?;
    rows.push(Row {
        scenario: "drifted_walk_utility",
        model: report.model_name.clone(),
        strategy: "full",
        quantity: "lambda_f(-1)",
        estimate: report.lambda_f_alpha,
        stderr: report.lambda_stderr,
        verdict: report.regime.to_string(),
    });

    // Control: hold cash under the first scenario's threshold. Wealth never
    // grows, so the certificate must come back refuted.
    let mut doc = toml::toml! {
        seed = 1592721412

        [model]
        kind = "stable_ar"
        alpha = 0.5

        [strategy]
        kind = "constant"
        fraction = 0.0

        [gdpf]
        t_grid = [25, 50, 100, 200]
        paths = 2000
        scgf_paths = 2000
        ergodic_length = 200000
    };
    doc.get_mut("gdpf")
        .and_then(Value::as_table_mut)
        .expect("gdpf table exists in the pinned document")
        .insert("b".into(), Value::Float(control_b));
    let report = scenario(out_root, "stable_ar_cash_control", &doc, run_gdpf)?;
    rows.push(Row {
        scenario: "stable_ar_cash_control",
        model: report.model_name.clone(),
        strategy: "cash",
        quantity: "p_fail_final",
        estimate: *report.p_fail.last().expect("nonempty failure table"),
        stderr: *report.p_stderr.last().expect("nonempty failure table"),
        verdict: format!("gdpf_{}", report.verdict),
    });

    write_summary(out_root, &rows)?;
    print_summary(&rows);
    Ok(())
}

/// Quote a field per RFC 4180 when it contains a comma or quote (model
/// names with parameter lists do).
fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_summary(out_root: &Path, rows: &[Row]) -> Result<(), CliError> {
    let mut text = format!("# longrun {VERSION}\n");
    text.push_str(
        "# seeds: stable_ar_pi_plus=1592721409 clamped_cir_pi_plus=1592721410 \
         drifted_walk_utility=1592721411 stable_ar_cash_control=1592721412\n",
    );
    text.push_str("scenario,model,strategy,quantity,estimate,stderr,verdict\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.scenario,
            csv_field(&r.model),
            r.strategy,
            r.quantity,
            r.estimate,
            r.stderr,
            r.verdict
        ));
    }
    let path = out_root.join("summary.csv");
    std::fs::write(&path, text)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn print_summary(rows: &[Row]) {
    println!();
    println!(
        "{:<24} {:<42} {:<15} {:<14} {:>12} {:>12}  {}",
        "scenario", "model", "strategy", "quantity", "estimate", "stderr", "verdict"
    );
    for r in rows {
        println!(
            "{:<24} {:<42} {:<15} {:<14} {:>12.6} {:>12.6}  {}",
            r.scenario, r.model, r.strategy, r.quantity, r.estimate, r.stderr, r.verdict
        );
    }
}
