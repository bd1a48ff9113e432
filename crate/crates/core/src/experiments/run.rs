//! Executes one configured experiment and writes its outputs.
//!
//! Layout under `output_dir`:
//! `snapshots/snapshot_NNNN.csv` (and `.svg`), `diagnostics.csv`,
//! `run.csv`, scenario-specific files, and `manifest.json` last.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use super::manifest::{config_hash, ErrorInfo, RunManifest};
use super::svg::{render_profile_svg, BoundaryProfile};
use super::{ExperimentConfig, ExperimentError, Scenario};
use crate::clifford::{self, barrier_bounds, run_clifford, soliton_fit, CliffordConfig, CliffordMode};
use crate::diagnostics::DiagnosticsRecord;
use crate::frame::{random_boundary_frame, verify_projection_identities};
use crate::geometry::{write_snapshot_csv, ProfileCurve};
use crate::io::{csv_row, fmt_sci, write_atomic};
use crate::lawlor::{run_lawlor, LawlorConfig};
use crate::verification::run_ladder;

/// Largest identity residual a frame check accepts.
pub const FRAME_TOLERANCE: f64 = 1e-9;

fn write(dir: &Path, name: &str, contents: &[u8]) -> Result<(), ExperimentError> {
    let path = dir.join(name);
    write_atomic(&path, contents).map_err(|e| ExperimentError::Io {
        path,
        message: e.to_string(),
    })
}

/// Output times, defaulting to the start and end of the run.
fn times_or_default(times: &[f64], start: f64, end: f64) -> Vec<f64> {
    if times.is_empty() {
        vec![start, end]
    } else {
        times.to_vec()
    }
}

fn diagnostics_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::from(DiagnosticsRecord::HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

fn write_snapshots(
    dir: &Path,
    curves: &[(f64, ProfileCurve)],
    svg: Option<BoundaryProfile>,
) -> Result<(), ExperimentError> {
    for (k, (t, curve)) in curves.iter().enumerate() {
        let mut buf = Vec::new();
        write_snapshot_csv(curve, &mut buf).map_err(|e| ExperimentError::Io {
            path: dir.join("snapshots"),
            message: e.to_string(),
        })?;
        write(dir, &format!("snapshots/snapshot_{k:04}.csv"), &buf)?;
        if let Some(boundary) = svg {
            let doc = render_profile_svg(curve, boundary, &format!("t = {}", fmt_sci(*t)));
            write(dir, &format!("snapshots/snapshot_{k:04}.svg"), doc.as_bytes())?;
        }
    }
    Ok(())
}

type Diagnostics = BTreeMap<String, f64>;

fn run_lawlor_scenario(cfg: &LawlorConfig, exp: &ExperimentConfig) -> Result<(String, Diagnostics), ExperimentError> {
    let dir = &exp.output_dir;
    let times = times_or_default(&exp.output_times, 0.0, cfg.t_final);
    let run = run_lawlor(cfg, &times)?;
    let curves = run
        .outputs
        .iter()
        .map(|s| Ok((s.t, s.curve()?)))
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    write_snapshots(dir, &curves, exp.emit_svg.then_some(BoundaryProfile::LawlorNeck))?;
    write(dir, "diagnostics.csv", diagnostics_csv(&run.records).as_bytes())?;
    write(dir, "run.csv", run.csv().as_bytes())?;

    let mut d = Diagnostics::new();
    let v = &run.final_state.v;
    d.insert("final_time".into(), run.final_state.t);
    d.insert("steps".into(), run.steps as f64);
    d.insert("v_inf".into(), run.v_inf);
    d.insert("final_v_mean".into(), v.iter().sum::<f64>() / v.len() as f64);
    d.insert("final_sup_v_dev".into(), run.final_deviation());
    d.insert("running_max_sup_a2".into(), run.running_max_a2);
    d.insert("decay_rate".into(), run.decay_rate.unwrap_or(f64::NAN));
    if let (Some(first), Some(last)) = (run.rows.first(), run.rows.last()) {
        d.insert(
            "int_cos_theta_drift".into(),
            (last.int_cos_theta - first.int_cos_theta) / first.int_cos_theta,
        );
        d.insert("final_theta_min".into(), last.theta_min);
        d.insert("final_theta_max".into(), last.theta_max);
    }
    if let Some(r) = run.records.last() {
        d.insert("final_gaussian_density".into(), r.gaussian_density);
    }
    Ok((run.termination.to_string(), d))
}

fn run_clifford_scenario(
    cfg: &CliffordConfig,
    exp: &ExperimentConfig,
) -> Result<(String, Diagnostics), ExperimentError> {
    let dir = &exp.output_dir;
    let start = match cfg.mode {
        CliffordMode::Rescaled => 0.0,
        CliffordMode::Unrescaled { t0 } => t0,
    };
    let times = times_or_default(&exp.output_times, start, cfg.t_final);
    let run = run_clifford(cfg, &times)?;
    let curves = run
        .outputs
        .iter()
        .map(|s| Ok((s.t, s.curve()?)))
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    write_snapshots(
        dir,
        &curves,
        exp.emit_svg
            .then_some(BoundaryProfile::Circle(clifford::BOUNDARY_RADIUS)),
    )?;
    write(dir, "diagnostics.csv", diagnostics_csv(&run.records).as_bytes())?;
    write(dir, "run.csv", run.csv().as_bytes())?;

    let mut d = Diagnostics::new();
    d.insert("final_time".into(), run.final_state.t);
    d.insert("steps".into(), run.steps as f64);
    d.insert("final_phi_mean".into(), run.final_state.mean());
    d.insert("final_phi_dev".into(), run.final_state.deviation());
    d.insert("decay_rate".into(), run.decay_rate.unwrap_or(f64::NAN));
    if let Some(last) = run.rows.last() {
        d.insert("final_theta2phi_max".into(), last.theta2phi_max);
        d.insert("final_sup_a2".into(), last.sup_a2);
    }
    if cfg.alpha == 0.0 {
        let report = barrier_bounds(&run.outputs)?;
        d.insert("barrier_a_minus".into(), report.a_minus);
        d.insert("barrier_a_plus".into(), report.a_plus);
    }
    if cfg.mode == CliffordMode::Rescaled {
        // Rigid-rotation fit over the second half of the run.
        let snaps: Vec<(f64, Vec<f64>)> = run.outputs.iter().map(|s| (s.t, s.phi.clone())).collect();
        if let Ok(fit) = soliton_fit(&snaps, (0.5 * cfg.t_final, cfg.t_final)) {
            d.insert("omega".into(), fit.omega);
            d.insert("omega_spread".into(), fit.spread);
            d.insert("omega_relative_spread".into(), fit.relative_spread());
            d.insert("fit_residual".into(), fit.residual);
            let mut shape = String::from("r,phi_hat\n");
            let h = clifford::BOUNDARY_RADIUS / (fit.shape.len() - 1) as f64;
            for (i, p) in fit.shape.iter().enumerate() {
                shape.push_str(&csv_row(&[i as f64 * h, *p]));
                shape.push('\n');
            }
            write(dir, "soliton_shape.csv", shape.as_bytes())?;
        }
    } else {
        let increase = crate::flow::max_increase(&run.monotone_quantity);
        d.insert("monotone_max_increase".into(), increase);
    }
    Ok((run.termination.to_string(), d))
}

fn run_frame_check(
    n: usize,
    alpha: f64,
    trials: usize,
    seed: u64,
    dir: &Path,
    d: &mut Diagnostics,
) -> Result<String, ExperimentError> {
    let mut lines = String::new();
    let mut worst = [0.0f64; 8];
    for k in 0..trials as u64 {
        let s = seed.wrapping_add(k);
        let frame = random_boundary_frame(n, alpha, s)?;
        let report = verify_projection_identities(&frame)?;
        for (w, r) in worst.iter_mut().zip(report.as_array()) {
            *w = w.max(r);
        }
        lines.push_str(&report.to_json_line(s));
        lines.push('\n');
    }
    write(dir, "frame_check.jsonl", lines.as_bytes())?;
    let names = [
        "mu_eqn",
        "mod_mu",
        "g_inverse",
        "tildemu",
        "nuasf",
        "muinperps",
        "nuinperps",
        "omega_tau",
    ];
    for (name, w) in names.iter().zip(worst) {
        d.insert(format!("max_{name}"), w);
    }
    let max = worst.into_iter().fold(0.0, f64::max);
    d.insert("max_residual".into(), max);
    d.insert("trials".into(), trials as f64);
    if max >= FRAME_TOLERANCE {
        return Err(ExperimentError::InvariantBreach(format!(
            "frame identity residual {max:e} ≥ {FRAME_TOLERANCE:e}"
        )));
    }
    Ok("Completed".into())
}

/// Runs `config`, writing every output and the manifest. Errors are
/// recorded in the manifest before being returned.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunManifest, ExperimentError> {
    let start = Instant::now();
    let dir = config.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| ExperimentError::Io {
        path: dir.clone(),
        message: e.to_string(),
    })?;
    let mut diagnostics = Diagnostics::new();
    let result: Result<String, ExperimentError> = match &config.scenario {
        Scenario::Lawlor(c) => run_lawlor_scenario(c, config).map(|(t, d)| {
            diagnostics = d;
            t
        }),
        Scenario::Clifford(c) => run_clifford_scenario(c, config).map(|(t, d)| {
            diagnostics = d;
            t
        }),
        Scenario::FrameCheck { n, alpha, trials, seed } => {
            run_frame_check(*n, *alpha, *trials, *seed, &dir, &mut diagnostics)
        }
        Scenario::Convergence {
            problem,
            ladder,
            stepper,
        } => run_ladder(*problem, ladder, stepper)
            .map_err(ExperimentError::from)
            .and_then(|report| {
                let mut csv = String::from("n,error,order\n");
                for (i, (n, e)) in report.ns.iter().zip(&report.errors).enumerate() {
                    let order = if i == 0 { f64::NAN } else { report.orders[i - 1] };
                    csv.push_str(&csv_row(&[*n as f64, *e, order]));
                    csv.push('\n');
                }
                write(&dir, "convergence.csv", csv.as_bytes())?;
                for (i, o) in report.orders.iter().enumerate() {
                    diagnostics.insert(format!("order_{}_{}", report.ns[i], report.ns[i + 1]), *o);
                }
                diagnostics.insert("expected_order".into(), problem.expected_order());
                diagnostics.insert("finest_error".into(), *report.errors.last().unwrap_or(&f64::NAN));
                Ok("Completed".to_string())
            }),
    };
    let (termination, error) = match &result {
        Ok(t) => (t.clone(), None),
        Err(e) => (
            "Error".to_string(),
            Some(ErrorInfo {
                kind: e.kind().to_string(),
                message: e.to_string(),
                exit_code: e.exit_code(),
            }),
        ),
    };
    let manifest = RunManifest {
        config_hash: config_hash(config),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: format!("{:?}", config.scenario.kind()),
        wall_time_s: start.elapsed().as_secs_f64(),
        termination,
        error,
        // Undefined quantities (e.g. a decay rate with nothing to fit) are omitted.
        final_diagnostics: diagnostics.into_iter().filter(|(_, v)| v.is_finite()).collect(),
    };
    manifest.write(&dir)?;
    result.map(|_| manifest)
}
