//! Parallel parameter sweeps.

use std::path::PathBuf;

use rayon::prelude::*;

use super::{run_experiment, with_parameter, ExperimentConfig, ExperimentError};
use crate::io::{fmt_sci, write_atomic};

pub const SUMMARY_FILE: &str = "summary.csv";

/// Pool size: `LMCF_WORKERS` when set to a positive integer, otherwise the
/// number of logical cores.
pub fn worker_count() -> usize {
    std::env::var("LMCF_WORKERS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub output_dir: PathBuf,
    /// `None` on success.
    pub error: Option<(String, String)>,
    pub exit_code: i32,
    pub termination: String,
    pub diagnostics: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub parameter: String,
    pub rows: Vec<SweepRow>,
}

impl SweepSummary {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    /// Union of diagnostic names across rows, sorted.
    fn columns(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .rows
            .iter()
            .flat_map(|r| r.diagnostics.iter().map(|(k, _)| k.clone()))
            .collect();
        names.sort();
        names.dedup();
        names
    }

    pub fn csv(&self) -> String {
        let cols = self.columns();
        let mut out = format!("{},status,exit_code,termination", self.parameter);
        for c in &cols {
            out.push(',');
            out.push_str(c);
        }
        out.push_str(",output_dir,error\n");
        for r in &self.rows {
            let status = if r.error.is_some() { "failed" } else { "ok" };
            out.push_str(&format!(
                "{},{status},{},{}",
                fmt_sci(r.value),
                r.exit_code,
                r.termination
            ));
            for c in &cols {
                let v = r.diagnostics.iter().find(|(k, _)| k == c).map_or(f64::NAN, |(_, v)| *v);
                out.push(',');
                out.push_str(&fmt_sci(v));
            }
            let message = r
                .error
                .as_ref()
                .map_or(String::new(), |(kind, msg)| format!("{kind}: {msg}"));
            out.push_str(&format!(
                ",{},\"{}\"\n",
                r.output_dir.display(),
                message.replace('"', "\"\"")
            ));
        }
        out
    }
}

fn one(template: &ExperimentConfig, parameter: &str, value: f64) -> SweepRow {
    let output_dir = template.output_dir.join(format!("{parameter}={value}"));
    let outcome = with_parameter(template, parameter, value)
        .map_err(ExperimentError::from)
        .and_then(|mut cfg| {
            cfg.output_dir = output_dir.clone();
            run_experiment(&cfg)
        });
    match outcome {
        Ok(m) => SweepRow {
            value,
            output_dir,
            error: None,
            exit_code: 0,
            termination: m.termination,
            diagnostics: m.final_diagnostics.into_iter().collect(),
        },
        Err(e) => SweepRow {
            value,
            output_dir,
            error: Some((e.kind().to_string(), e.to_string())),
            exit_code: e.exit_code(),
            termination: "Error".into(),
            diagnostics: Vec::new(),
        },
    }
}

/// Runs `template` once per value of `parameter` on a pool of `workers`
/// threads and writes `summary.csv` into the template's output directory.
/// Failed runs are recorded in the summary rather than aborting the sweep.
pub fn sweep(
    template: &ExperimentConfig,
    parameter: &str,
    values: &[f64],
    workers: usize,
) -> Result<SweepSummary, ExperimentError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ExperimentError::Io {
            path: template.output_dir.clone(),
            message: format!("cannot start worker pool: {e}"),
        })?;
    let rows: Vec<SweepRow> = pool.install(|| values.par_iter().map(|&v| one(template, parameter, v)).collect());
    let summary = SweepSummary {
        parameter: parameter.to_string(),
        rows,
    };
    let path = template.output_dir.join(SUMMARY_FILE);
    write_atomic(&path, summary.csv().as_bytes()).map_err(|e| ExperimentError::Io {
        path,
        message: e.to_string(),
    })?;
    Ok(summary)
}
