//! Time integration: classical RK4, integrating-factor RK4 for fKdV, CFL step
//! control and wave-breaking detection.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{BlowUp, Error, Result};
use crate::models::{self, linear_symbol, max_phase_speed, ModelKind, ModelParams};
use crate::operators::{derivative, Products};
use crate::spectral::{forward_raw, inverse_raw, symbol_table, RealField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Rk4,
    Ifrk4,
}

impl Integrator {
    /// IFRK4 for fKdV, whose dispersive phase grows like `|k|^{2ν+1}`; RK4 otherwise.
    pub fn default_for(kind: ModelKind) -> Integrator {
        match kind {
            ModelKind::Fkdv => Integrator::Ifrk4,
            _ => Integrator::Rk4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum StepSize {
    Fixed(f64),
    /// Recomputed from the CFL condition before every step.
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BreakingResponse {
    Halt,
    Warn,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    pub integrator: Integrator,
    pub dt: StepSize,
    pub cfl: f64,
    pub t_end: f64,
    pub snapshot_every: f64,
    pub dealias: bool,
    pub breaking_slope_threshold: f64,
    pub tail_fraction_threshold: f64,
    pub on_breaking: BreakingResponse,
}

impl SolverConfig {
    pub const DEFAULT_CFL: f64 = 0.5;
    pub const DEFAULT_SLOPE_THRESHOLD: f64 = 100.0;
    pub const DEFAULT_TAIL_THRESHOLD: f64 = 1e-4;

    /// Defaults for `kind`, one snapshot at the start and one at `t_end`.
    pub fn new(kind: ModelKind, t_end: f64) -> SolverConfig {
        SolverConfig {
            integrator: Integrator::default_for(kind),
            dt: StepSize::Auto,
            cfl: Self::DEFAULT_CFL,
            t_end,
            snapshot_every: if t_end > 0.0 { t_end } else { 1.0 },
            dealias: true,
            breaking_slope_threshold: Self::DEFAULT_SLOPE_THRESHOLD,
            tail_fraction_threshold: Self::DEFAULT_TAIL_THRESHOLD,
            on_breaking: BreakingResponse::Halt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Parameter(m));
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return fail(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return fail(format!("t_end must be finite and >= 0, got {}", self.t_end));
        }
        if !(self.snapshot_every.is_finite() && self.snapshot_every > 0.0) {
            return fail(format!(
                "snapshot_every must be positive, got {}",
                self.snapshot_every
            ));
        }
        if let StepSize::Fixed(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return fail(format!("dt must be positive, got {dt}"));
            }
        }
        if !(self.breaking_slope_threshold > 0.0) {
            return fail("breaking_slope_threshold must be positive".into());
        }
        if !(self.tail_fraction_threshold > 0.0 && self.tail_fraction_threshold < 1.0) {
            return fail(format!(
                "tail_fraction_threshold must lie in (0, 1), got {}",
                self.tail_fraction_threshold
            ));
        }
        Ok(())
    }

    fn products(&self) -> Products {
        if self.dealias {
            Products::Dealiased
        } else {
            Products::Raw
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationState {
    pub t: f64,
    pub u: RealField,
    pub step_count: u64,
    /// `(t, min_x u_x)` after every step, append-only.
    pub min_slope_history: Vec<(f64, f64)>,
}

impl SimulationState {
    pub fn new(u0: RealField) -> SimulationState {
        SimulationState {
            t: 0.0,
            u: u0,
            step_count: 0,
            min_slope_history: Vec::new(),
        }
    }
}

fn at_stage<T>(r: Result<T>, t: f64, stage: usize) -> Result<T> {
    r.map_err(|e| e.with_time(t, Some(stage)))
}

/// One classical RK4 step of `du/dt = f(u)`.
pub fn rk4_step<F>(state: &SimulationState, f: F, dt: f64) -> Result<SimulationState>
where
    F: Fn(&RealField) -> Result<RealField>,
{
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
    }
    let t = state.t;
    let u = &state.u;
    let k1 = at_stage(f(u), t, 1)?;
    let k2 = at_stage(u.axpy(0.5 * dt, &k1).and_then(|v| f(&v)), t, 2)?;
    let k3 = at_stage(u.axpy(0.5 * dt, &k2).and_then(|v| f(&v)), t, 3)?;
    let k4 = at_stage(u.axpy(dt, &k3).and_then(|v| f(&v)), t, 4)?;
    let values: Vec<f64> = u
        .values()
        .iter()
        .enumerate()
        .map(|(i, &ui)| {
            ui + dt / 6.0
                * (k1.values()[i] + 2.0 * k2.values()[i] + 2.0 * k3.values()[i] + k4.values()[i])
        })
        .collect();
    let next = at_stage(RealField::new(u.grid().clone(), values), t, 4)?;
    Ok(SimulationState {
        t: t + dt,
        u: next,
        step_count: state.step_count + 1,
        min_slope_history: state.min_slope_history.clone(),
    })
}

/// One integrating-factor RK4 step for fKdV. The linear symbol
/// `−ik(c_adv + c_disp|k|^{2ν})` is integrated exactly; RK4 handles the rest.
pub fn ifrk4_step(
    state: &SimulationState,
    model: &ModelParams,
    dt: f64,
    policy: Products,
) -> Result<SimulationState> {
    if model.kind() != ModelKind::Fkdv {
        return Err(Error::Parameter(format!(
            "integrating-factor RK4 is only defined for fkdv, got {}",
            model.kind().name()
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
    }
    let grid = state.u.grid();
    let t = state.t;
    let symbol = symbol_table(grid, |k| linear_symbol(k, model))?;
    let half: Vec<Complex64> = symbol.iter().map(|s| (s * (0.5 * dt)).exp()).collect();
    let full: Vec<Complex64> = symbol.iter().map(|s| (s * dt).exp()).collect();

    let nonlinear = |coeffs: Vec<Complex64>, stage: usize| -> Result<Vec<Complex64>> {
        let v = at_stage(inverse_raw(grid, coeffs), t, stage)?;
        let n = at_stage(models::rhs_nonlinear_with(&v, model, policy), t, stage)?;
        Ok(forward_raw(grid, n.values()))
    };

    let u0 = forward_raw(grid, state.u.values());
    let h = dt;
    let k1 = nonlinear(u0.clone(), 1)?;
    let a: Vec<Complex64> = (0..u0.len())
        .map(|i| half[i] * (u0[i] + 0.5 * h * k1[i]))
        .collect();
    let k2 = nonlinear(a, 2)?;
    let b: Vec<Complex64> = (0..u0.len())
        .map(|i| half[i] * u0[i] + 0.5 * h * k2[i])
        .collect();
    let k3 = nonlinear(b, 3)?;
    let c: Vec<Complex64> = (0..u0.len())
        .map(|i| full[i] * u0[i] + h * half[i] * k3[i])
        .collect();
    let k4 = nonlinear(c, 4)?;
    let next: Vec<Complex64> = (0..u0.len())
        .map(|i| {
            full[i] * u0[i]
                + h / 6.0 * (full[i] * k1[i] + 2.0 * half[i] * (k2[i] + k3[i]) + k4[i])
        })
        .collect();
    let u = at_stage(inverse_raw(grid, next), t, 4)?;
    Ok(SimulationState {
        t: t + dt,
        u,
        step_count: state.step_count + 1,
        min_slope_history: state.min_slope_history.clone(),
    })
}

/// CFL step `cfl·Δx / v_max` with `v_max = max(max_k |c(k)|, max_x |u|)`.
/// Under IFRK4 the dispersive part is integrated exactly, so only the
/// advection coefficient enters the linear bound.
pub fn auto_dt(u: &RealField, model: &ModelParams, integrator: Integrator, cfl: f64) -> f64 {
    let grid = u.grid();
    let linear = match integrator {
        Integrator::Rk4 => max_phase_speed(grid, model),
        Integrator::Ifrk4 => model.coefficients().c_adv.abs(),
    };
    let v_max = linear.max(u.max_abs());
    if v_max > 0.0 {
        cfl * grid.dx() / v_max
    } else {
        cfl * grid.dx()
    }
}

/// `(min_x u_x, argmin)`
pub fn min_slope(u: &RealField) -> Result<(f64, usize)> {
    Ok(derivative(u)?.min_with_index())
}

/// Fraction of the non-mean spectral energy in the top octave of the retained
/// band, `floor(N/3)/2 < |j| ≤ floor(N/3)`.
pub fn spectral_tail_fraction(u: &RealField) -> f64 {
    let grid = u.grid();
    let cutoff = grid.dealias_cutoff() as i64;
    let c = forward_raw(grid, u.values());
    let (mut tail, mut total) = (0.0, 0.0);
    for (slot, z) in c.iter().enumerate() {
        let j = grid.signed_index(slot).abs();
        if j == 0 {
            continue;
        }
        let e = z.norm_sqr();
        total += e;
        if 2 * j > cutoff && j <= cutoff {
            tail += e;
        }
    }
    if total > 0.0 {
        tail / total
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BreakingReport {
    pub t: f64,
    pub min_slope: f64,
    pub location: f64,
    pub tail_fraction: f64,
    /// Blow-up time from a `1/(T − t)` fit of the slope history.
    pub estimated_breaking_time: Option<f64>,
}

/// Fits `min u_x ≈ −C/(T − t)` on the most recent quarter of the history
/// (at least three points) by regressing `−1/min u_x` on `t`.
pub fn estimate_breaking_time(history: &[(f64, f64)]) -> Option<f64> {
    let tail: Vec<(f64, f64)> = history
        .iter()
        .filter(|(_, m)| *m < 0.0)
        .map(|&(t, m)| (t, -1.0 / m))
        .collect();
    let take = (tail.len() / 4).max(3);
    if tail.len() < 3 {
        return None;
    }
    let pts = &tail[tail.len() - take.min(tail.len())..];
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    if slope >= 0.0 {
        return None;
    }
    let t_break = mt - my / slope;
    t_break.is_finite().then_some(t_break)
}

/// Flags breaking when the steepest negative slope passes the threshold and
/// the spectrum shows the steepening is resolved (tail fraction above its
/// threshold).
pub fn detect_breaking(
    state: &SimulationState,
    config: &SolverConfig,
) -> Result<Option<BreakingReport>> {
    let (m, idx) = min_slope(&state.u)?;
    if m > -config.breaking_slope_threshold {
        return Ok(None);
    }
    let tail = spectral_tail_fraction(&state.u);
    if tail <= config.tail_fraction_threshold {
        return Ok(None);
    }
    Ok(Some(BreakingReport {
        t: state.t,
        min_slope: m,
        location: state.u.grid().x(idx),
        tail_fraction: tail,
        estimated_breaking_time: estimate_breaking_time(&state.min_slope_history),
    }))
}

/// Receives `(t, u)` snapshots. Only finite states are ever pushed.
pub trait SnapshotSink {
    fn snapshot(&mut self, t: f64, u: &RealField) -> Result<()>;
}

impl<F> SnapshotSink for F
where
    F: FnMut(f64, &RealField) -> Result<()>,
{
    fn snapshot(&mut self, t: f64, u: &RealField) -> Result<()> {
        self(t, u)
    }
}

/// Discards snapshots.
pub struct NullSink;

impl SnapshotSink for NullSink {
    fn snapshot(&mut self, _t: f64, _u: &RealField) -> Result<()> {
        Ok(())
    }
}

/// Keeps every snapshot in memory.
#[derive(Default)]
pub struct MemorySink {
    pub snapshots: Vec<(f64, RealField)>,
}

impl SnapshotSink for MemorySink {
    fn snapshot(&mut self, t: f64, u: &RealField) -> Result<()> {
        self.snapshots.push((t, u.clone()));
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Breaking(BreakingReport),
    BlowUp {
        t: Option<f64>,
        stage: Option<usize>,
        index: usize,
    },
}

impl From<BlowUp> for Outcome {
    fn from(b: BlowUp) -> Outcome {
        Outcome::BlowUp {
            t: b.t,
            stage: b.stage,
            index: b.index,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    /// Final state, or the last finite one when the run blew up.
    pub state: SimulationState,
    pub outcome: Outcome,
    /// First breaking report seen while running in warn mode.
    pub breaking_warning: Option<BreakingReport>,
}

/// Integrates the initial-value problem from `u0` at `t = 0`.
pub fn integrate(
    u0: RealField,
    model: &ModelParams,
    config: &SolverConfig,
    sink: &mut dyn SnapshotSink,
) -> Result<RunResult> {
    integrate_from(SimulationState::new(u0), model, config, sink)
}

fn snapshot_due(t: f64, next: f64, dt: f64) -> bool {
    t >= next - 1e-9 * dt.max(f64::MIN_POSITIVE)
}

/// Continues from `state` until `config.t_end`.
///
/// Snapshots are pushed at the start, whenever the time crosses a multiple of
/// `snapshot_every`, and at the end of the run.
pub fn integrate_from(
    state: SimulationState,
    model: &ModelParams,
    config: &SolverConfig,
    sink: &mut dyn SnapshotSink,
) -> Result<RunResult> {
    config.validate()?;
    if config.integrator == Integrator::Ifrk4 && model.kind() != ModelKind::Fkdv {
        return Err(Error::Parameter(format!(
            "ifrk4 requires an fkdv model, got {}",
            model.kind().name()
        )));
    }
    let policy = config.products();
    let every = config.snapshot_every;
    let mut state = state;
    sink.snapshot(state.t, &state.u)?;
    let mut next_snapshot = ((state.t / every + 1e-9).floor() + 1.0) * every;
    let mut last_pushed = state.t;
    let mut breaking_warning = None;

    let outcome = loop {
        let dt_nominal = match config.dt {
            StepSize::Fixed(dt) => dt,
            StepSize::Auto => auto_dt(&state.u, model, config.integrator, config.cfl),
        };
        let remaining = config.t_end - state.t;
        if remaining <= 1e-9 * dt_nominal {
            break Outcome::Completed;
        }
        // a last step that is a full step up to roundoff in the accumulated
        // time is taken as a full step, so split runs match straight ones bit for bit
        let dt = if (remaining - dt_nominal).abs() <= 1e-9 * dt_nominal {
            dt_nominal
        } else {
            dt_nominal.min(remaining)
        };
        // the step functions clone the history; hand it over instead
        let mut history = std::mem::take(&mut state.min_slope_history);
        let stepped = match config.integrator {
            Integrator::Rk4 => rk4_step(&state, |v| models::rhs_with(v, model, policy), dt),
            Integrator::Ifrk4 => ifrk4_step(&state, model, dt, policy),
        };
        let mut next = match stepped {
            Ok(s) => s,
            Err(e) => {
                state.min_slope_history = history;
                match e {
                    Error::BlowUp(b) => break Outcome::from(b),
                    e => return Err(e),
                }
            }
        };
        let (m, _) = min_slope(&next.u)?;
        history.push((next.t, m));
        next.min_slope_history = history;
        state = next;

        if let Some(report) = detect_breaking(&state, config)? {
            match config.on_breaking {
                BreakingResponse::Halt => break Outcome::Breaking(report),
                BreakingResponse::Warn => {
                    breaking_warning.get_or_insert(report);
                }
            }
        }
        if snapshot_due(state.t, next_snapshot, dt) {
            sink.snapshot(state.t, &state.u)?;
            last_pushed = state.t;
            while snapshot_due(state.t, next_snapshot, dt) {
                next_snapshot += every;
            }
        }
    };
    if last_pushed != state.t {
        sink.snapshot(state.t, &state.u)?;
    }
    Ok(RunResult {
        state,
        outcome,
        breaking_warning,
    })
}
