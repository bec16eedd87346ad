//! `sweep`: independent runs over a list of ν or amplitude values.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ConfigError, RunConfig};
use crate::output::write_json;
use crate::run::{execute, RunSummary, Start, EXIT_CONFIG, EXIT_OK};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Nu,
    Amplitude,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::Nu => "nu",
            Axis::Amplitude => "amplitude",
        }
    }
}

#[derive(Serialize)]
struct Point {
    value: f64,
    directory: PathBuf,
    #[serde(flatten)]
    summary: RunSummary,
}

#[derive(Serialize)]
struct Summary {
    axis: Axis,
    values: Vec<f64>,
    points: Vec<Point>,
}

/// Drops repeated values, keeping first occurrences; returns the duplicates.
pub fn dedup(values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut kept: Vec<f64> = Vec::new();
    let mut dropped = Vec::new();
    for &v in values {
        if kept.iter().any(|k| k.to_bits() == v.to_bits()) {
            dropped.push(v);
        } else {
            kept.push(v);
        }
    }
    (kept, dropped)
}

fn point_config(base: &RunConfig, axis: Axis, value: f64, dir: PathBuf) -> Result<RunConfig, ConfigError> {
    let mut cfg = base.clone();
    match axis {
        Axis::Nu => cfg.model.nu = value,
        Axis::Amplitude => cfg.initial = cfg.initial.with_amplitude(value)?,
    }
    cfg.output.directory = dir;
    Ok(cfg)
}

/// Runs every point (at most `jobs` at a time), writes `sweep/summary.json`
/// and returns the largest point exit code.
pub fn sweep(base: &RunConfig, axis: Axis, values: &[f64], jobs: usize, allow_low_nu: bool) -> i32 {
    if values.is_empty() {
        eprintln!("error: sweep needs at least one value");
        return EXIT_CONFIG;
    }
    let (values, dropped) = dedup(values);
    for v in dropped {
        eprintln!("warning: repeated {} value {v} ignored", axis.name());
    }
    let root = base.output.directory.join("sweep");
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_CONFIG;
        }
    };
    let points: Vec<Point> = pool.install(|| {
        values
            .par_iter()
            .map(|&value| {
                let dir = root.join(format!("{}={value}", axis.name()));
                let summary = match point_config(base, axis, value, dir.clone()) {
                    Ok(cfg) => execute(&cfg, allow_low_nu, Start::Fresh),
                    Err(e) => RunSummary {
                        exit_code: EXIT_CONFIG,
                        outcome: "error",
                        message: Some(e.0),
                        last_good_time: None,
                        drift: None,
                        measured_phase_speed: None,
                    },
                };
                Point {
                    value,
                    directory: dir,
                    summary,
                }
            })
            .collect()
    });
    let code = points.iter().map(|p| p.summary.exit_code).max().unwrap_or(EXIT_OK);
    for p in &points {
        let status = match &p.summary.message {
            Some(m) => format!("{} ({m})", p.summary.outcome),
            None => p.summary.outcome.to_string(),
        };
        println!("{}={}: exit {} {status}", axis.name(), p.value, p.summary.exit_code);
    }
    let summary = Summary {
        axis,
        values,
        points,
    };
    if let Err(e) = std::fs::create_dir_all(&root)
        .map_err(|e| e.to_string())
        .and_then(|_| write_json(&root.join("summary.json"), &summary))
    {
        eprintln!("error: cannot write sweep summary: {e}");
        return EXIT_CONFIG;
    }
    code
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dedup_keeps_first_occurrence() {
        let (kept, dropped) = dedup(&[1.0, 1.5, 1.0, 2.0, 1.5]);
        assert_eq!(kept, vec![1.0, 1.5, 2.0]);
        assert_eq!(dropped, vec![1.0, 1.5]);
    }
}
