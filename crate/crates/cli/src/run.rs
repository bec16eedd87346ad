//! `run` and `resume`: one simulation, its snapshots, checkpoint and manifest.

use std::fs;
use std::path::{Path, PathBuf};

use fracwave::checkpoint::{checkpoint_read, checkpoint_write};
use fracwave::diagnostics::phase_speed;
use fracwave::models::{dispersion_speed, fbbm_energy, mass, momentum};
use fracwave::spectral::forward_transform;
use fracwave::timestepper::{integrate_from, min_slope, BreakingReport, RunResult};
use fracwave::{Outcome, RealField, SimulationState};
use serde::Serialize;

use crate::config::{Initial, Prepared, RunConfig};
use crate::output::{read_snapshot, write_json, write_snapshot};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_BREAKING: i32 = 2;
pub const EXIT_BLOW_UP: i32 = 3;

pub const MANIFEST: &str = "manifest.json";
pub const CHECKPOINT: &str = "checkpoint.fwck";
pub const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Clone, Debug, Default, Serialize)]
pub struct Series {
    pub t: Vec<f64>,
    pub mass: Vec<f64>,
    pub momentum: Vec<f64>,
    pub fbbm_energy: Vec<f64>,
    /// `min_x u_x`, not conserved; recorded to follow steepening.
    pub min_slope: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Drift {
    pub mass: f64,
    pub momentum: f64,
    pub fbbm_energy: f64,
}

/// `max_t |q(t) − q(0)| / scale`
fn drift(q: &[f64], scale: impl Fn(f64) -> f64) -> f64 {
    let Some(&q0) = q.first() else { return 0.0 };
    let worst = q.iter().map(|v| (v - q0).abs()).fold(0.0, f64::max);
    worst / scale(q0)
}

/// Relative to `|q(0)|` unless that vanishes.
fn relative(q0: f64) -> f64 {
    if q0.abs() > 0.0 {
        q0.abs()
    } else {
        1.0
    }
}

impl Series {
    fn drift(&self) -> Drift {
        Drift {
            // the mass is often zero, so it is compared with 1 + |mass(0)|
            mass: drift(&self.mass, |m| 1.0 + m.abs()),
            momentum: drift(&self.momentum, relative),
            fbbm_energy: drift(&self.fbbm_energy, relative),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SnapshotEntry {
    pub t: f64,
    pub file: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseSpeed {
    pub mode: u32,
    pub wavenumber: f64,
    /// `None` when the tracked coefficient vanished.
    pub speed: Option<f64>,
    pub linear_prediction: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BlowUpInfo {
    pub t: Option<f64>,
    pub stage: Option<usize>,
    pub index: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub fracwave_version: &'static str,
    pub command: &'static str,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resumed_from: Option<PathBuf>,
    pub outcome: &'static str,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub last_good_time: Option<f64>,
    pub step_count: Option<u64>,
    pub snapshots: Vec<SnapshotEntry>,
    pub conserved: Series,
    pub drift: Option<Drift>,
    pub breaking_report: Option<BreakingReport>,
    /// First breaking report when `on_breaking` is `warn`.
    pub breaking_warning: Option<BreakingReport>,
    pub blow_up: Option<BlowUpInfo>,
    pub measured_phase_speed: Option<PhaseSpeed>,
    pub checkpoint: Option<String>,
}

/// What a caller (the sweep driver) needs from a finished run.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub exit_code: i32,
    pub outcome: &'static str,
    pub message: Option<String>,
    pub last_good_time: Option<f64>,
    pub drift: Option<Drift>,
    pub measured_phase_speed: Option<PhaseSpeed>,
}

pub enum Start<'a> {
    Fresh,
    Resume(&'a Path),
}

impl Manifest {
    fn new(config: &RunConfig, start: &Start<'_>) -> Manifest {
        let (command, resumed_from) = match start {
            Start::Fresh => ("run", None),
            Start::Resume(p) => ("resume", Some(p.to_path_buf())),
        };
        Manifest {
            fracwave_version: env!("CARGO_PKG_VERSION"),
            command,
            config: config.clone(),
            resumed_from,
            outcome: "error",
            exit_code: EXIT_CONFIG,
            message: None,
            last_good_time: None,
            step_count: None,
            snapshots: Vec::new(),
            conserved: Series::default(),
            drift: None,
            breaking_report: None,
            breaking_warning: None,
            blow_up: None,
            measured_phase_speed: None,
            checkpoint: None,
        }
    }

    fn summary(&self) -> RunSummary {
        RunSummary {
            exit_code: self.exit_code,
            outcome: self.outcome,
            message: self.message.clone(),
            last_good_time: self.last_good_time,
            drift: self.drift.clone(),
            measured_phase_speed: self.measured_phase_speed.clone(),
        }
    }
}

pub fn initial_field(initial: &Initial, grid: &fracwave::Grid) -> Result<RealField, String> {
    let length = grid.length();
    let field = match initial {
        Initial::Zero => Ok(RealField::zeros(grid)),
        Initial::Constant { value } => RealField::constant(grid, *value),
        Initial::Mode { k, amplitude, phase } => {
            let kw = std::f64::consts::TAU * *k as f64 / length;
            RealField::from_fn(grid, |x| amplitude * (kw * x + phase).cos())
        }
        Initial::Gaussian {
            center,
            width,
            amplitude,
        } => {
            let c = center.unwrap_or(0.5 * length);
            RealField::from_fn(grid, |x| amplitude * (-((x - c) / width).powi(2)).exp())
        }
        Initial::File { path } => return read_snapshot(path, grid),
    };
    field.map_err(|e| e.to_string())
}

/// Runs one simulation into `config.output.directory` and returns its summary.
/// Every outcome, including failures after the output directory is known,
/// leaves a manifest behind (unless the config turns manifests off).
pub fn execute(config: &RunConfig, allow_low_nu: bool, start: Start<'_>) -> RunSummary {
    let dir = config.output.directory.clone();
    let mut manifest = Manifest::new(config, &start);
    let result = simulate(config, allow_low_nu, &start, &dir, &mut manifest);
    if let Err(msg) = result {
        manifest.outcome = "error";
        manifest.exit_code = EXIT_CONFIG;
        manifest.message = Some(msg);
    }
    if config.output.manifest {
        let write = fs::create_dir_all(&dir)
            .map_err(|e| format!("{}: {e}", dir.display()))
            .and_then(|_| write_json(&dir.join(MANIFEST), &manifest));
        if let Err(e) = write {
            eprintln!("error: cannot write manifest: {e}");
            manifest.exit_code = EXIT_CONFIG;
            manifest.message.get_or_insert(e);
        }
    }
    manifest.summary()
}

fn simulate(
    config: &RunConfig,
    allow_low_nu: bool,
    start: &Start<'_>,
    dir: &Path,
    manifest: &mut Manifest,
) -> Result<(), String> {
    let Prepared { grid, model, solver } = config.prepare(allow_low_nu).map_err(|e| e.0)?;
    let state = match start {
        Start::Fresh => SimulationState::new(initial_field(&config.initial, &grid)?),
        Start::Resume(path) => {
            let s = checkpoint_read(path).map_err(|e| format!("{}: {e}", path.display()))?;
            if s.u.grid() != &grid {
                return Err(format!(
                    "{}: checkpoint grid (L={}, N={}) differs from the configured grid (L={}, N={})",
                    path.display(),
                    s.u.grid().length(),
                    s.u.grid().n_points(),
                    grid.length(),
                    grid.n_points()
                ));
            }
            s
        }
    };
    let snap_dir = dir.join(SNAPSHOT_DIR);
    fs::create_dir_all(&snap_dir).map_err(|e| format!("{}: {e}", snap_dir.display()))?;

    let tracked = match config.initial {
        Initial::Mode { k, .. } if k > 0 => Some(k),
        _ => None,
    };
    let mut series = Series::default();
    let mut entries = Vec::new();
    let mut phases = Vec::new();
    let result: RunResult = {
        let mut sink = |t: f64, u: &RealField| -> fracwave::Result<()> {
            let name = format!("{SNAPSHOT_DIR}/u_{:05}.csv", entries.len());
            write_snapshot(&dir.join(&name), u).map_err(|e| {
                fracwave::Error::Io(std::io::Error::other(e))
            })?;
            entries.push(SnapshotEntry { t, file: name });
            series.t.push(t);
            series.mass.push(mass(u));
            series.momentum.push(momentum(u));
            series.fbbm_energy.push(fbbm_energy(u, &model));
            series.min_slope.push(min_slope(u)?.0);
            if let Some(k) = tracked {
                phases.push((t, forward_transform(u)?.coeff(k as i64)));
            }
            Ok(())
        };
        integrate_from(state, &model, &solver, &mut sink).map_err(|e| e.to_string())?
    };

    manifest.measured_phase_speed = tracked.map(|k| {
        let kw = grid.wavenumber_of(k as i64);
        let predicted = dispersion_speed(kw, &model);
        PhaseSpeed {
            mode: k,
            wavenumber: kw,
            speed: phase_speed(&phases, kw, Some(predicted)),
            linear_prediction: predicted,
        }
    });
    manifest.drift = Some(series.drift());
    manifest.conserved = series;
    manifest.snapshots = entries;
    manifest.last_good_time = Some(result.state.t);
    manifest.step_count = Some(result.state.step_count);
    manifest.breaking_warning = result.breaking_warning.clone();
    checkpoint_write(&result.state, &dir.join(CHECKPOINT)).map_err(|e| e.to_string())?;
    manifest.checkpoint = Some(CHECKPOINT.into());
    let (outcome, code) = match &result.outcome {
        Outcome::Completed => ("completed", EXIT_OK),
        Outcome::Breaking(report) => {
            manifest.breaking_report = Some(report.clone());
            manifest.message = Some(format!(
                "wave breaking at t={}: min slope {} at x={}, tail fraction {:e}",
                report.t, report.min_slope, report.location, report.tail_fraction
            ));
            ("breaking", EXIT_BREAKING)
        }
        Outcome::BlowUp { t, stage, index } => {
            manifest.blow_up = Some(BlowUpInfo {
                t: *t,
                stage: *stage,
                index: *index,
            });
            manifest.message = Some(format!(
                "non-finite value at grid index {index}; last good time {}",
                result.state.t
            ));
            ("blow_up", EXIT_BLOW_UP)
        }
    };
    manifest.outcome = outcome;
    manifest.exit_code = code;
    Ok(())
}
