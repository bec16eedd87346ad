//! Numerical probes of the analytic estimates behind local well-posedness:
//! the commutator bound, the Lipschitz and boundedness constants of `A`, `B`
//! and `f`, continuous dependence on initial data, and convergence studies.
//!
//! None of the constants involved has a known value. What can be checked is
//! that the measured suprema are finite and stable under grid refinement and
//! under more samples.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelParams;
use crate::operators::{
    apply_a, apply_b, apply_f, lambda_pow, product, FractionalOrder, Products,
};
use crate::spectral::{
    forward_raw, forward_transform, inverse_raw, sobolev_norm, sobolev_norm_coeffs, Grid,
    RealField, SpectralField,
};
use crate::timestepper::{
    auto_dt, integrate, MemorySink, NullSink, Outcome, SolverConfig, StepSize,
};

#[derive(Clone, Debug, Serialize)]
pub struct SampleSpec {
    pub n_samples: usize,
    pub grid: Grid,
    /// Highest active mode index.
    pub band_limit: usize,
    /// Norm given to sampled fields; the ball radius for Lipschitz samplers.
    pub amplitude: f64,
    pub seed: u64,
}

impl SampleSpec {
    pub fn new(
        n_samples: usize,
        grid: Grid,
        band_limit: usize,
        amplitude: f64,
        seed: u64,
    ) -> Result<SampleSpec> {
        if n_samples == 0 {
            return Err(Error::Parameter("n_samples must be positive".into()));
        }
        if band_limit == 0 || band_limit > grid.dealias_cutoff() {
            return Err(Error::Parameter(format!(
                "band_limit must lie in 1..={} for N={}, got {band_limit}",
                grid.dealias_cutoff(),
                grid.n_points()
            )));
        }
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::Parameter(format!(
                "amplitude must be positive, got {amplitude}"
            )));
        }
        Ok(SampleSpec {
            n_samples,
            grid,
            band_limit,
            amplitude,
            seed,
        })
    }

    /// Same samples on a different grid.
    pub fn with_grid(&self, grid: Grid) -> Result<SampleSpec> {
        SampleSpec::new(self.n_samples, grid, self.band_limit, self.amplitude, self.seed)
    }

    pub fn with_samples(&self, n_samples: usize) -> Result<SampleSpec> {
        SampleSpec::new(n_samples, self.grid.clone(), self.band_limit, self.amplitude, self.seed)
    }

    /// Independent stream for sample `index`; the same index always yields
    /// the same fields whatever the thread schedule.
    fn rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticsReport {
    pub estimate: String,
    pub ratios: Vec<f64>,
    pub sup_ratio: f64,
    pub mean_ratio: f64,
    /// Samples dropped for a zero denominator.
    pub skipped: usize,
    pub spec: SampleSpec,
}

impl DiagnosticsReport {
    fn assemble(estimate: String, samples: Vec<Option<f64>>, spec: &SampleSpec) -> Self {
        let skipped = samples.iter().filter(|s| s.is_none()).count();
        let ratios: Vec<f64> = samples.into_iter().flatten().collect();
        let sup_ratio = ratios.iter().copied().fold(0.0, f64::max);
        let mean_ratio = if ratios.is_empty() {
            0.0
        } else {
            ratios.iter().sum::<f64>() / ratios.len() as f64
        };
        DiagnosticsReport {
            estimate,
            ratios,
            sup_ratio,
            mean_ratio,
            skipped,
            spec: spec.clone(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.ratios.iter().all(|r| r.is_finite() && *r >= 0.0) && self.sup_ratio.is_finite()
    }
}

/// `max(a, b) / min(a, b)` of two sup ratios; 1 when both vanish.
pub fn refinement_factor(a: &DiagnosticsReport, b: &DiagnosticsReport) -> f64 {
    let (lo, hi) = if a.sup_ratio <= b.sup_ratio {
        (a.sup_ratio, b.sup_ratio)
    } else {
        (b.sup_ratio, a.sup_ratio)
    };
    if hi == 0.0 {
        1.0
    } else if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Random real field with modes `|j| ≤ band`: a uniform mean in `[-1, 1]`,
/// amplitudes `j^{-2}` and independent uniform phases.
pub fn random_band_limited(grid: &Grid, band: usize, rng: &mut impl Rng) -> Result<RealField> {
    let mut uh = SpectralField::zeros(grid);
    uh.set_coeff(0, Complex64::new(rng.random_range(-1.0..=1.0), 0.0))?;
    for j in 1..=band as i64 {
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let c = Complex64::from_polar((j as f64).powi(-2), phase);
        uh.set_coeff(j, c)?;
        uh.set_coeff(-j, c.conj())?;
    }
    inverse_raw(grid, uh.into_coeffs())
}

/// Rescales `u` to H^s norm `target`; `None` for the zero field.
fn scaled_to(u: RealField, s: f64, target: f64) -> Result<Option<RealField>> {
    let norm = sobolev_norm(&u, s);
    if norm == 0.0 {
        return Ok(None);
    }
    u.scale(target / norm).map(Some)
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

fn check_commutator_hypothesis(m: f64, s: f64, sigma: f64) -> Result<()> {
    if !(m > 0.0) {
        return Err(Error::Hypothesis(format!("m > 0 fails (m = {m})")));
    }
    if !(s >= 0.0) {
        return Err(Error::Hypothesis(format!("s >= 0 fails (s = {s})")));
    }
    if !(s + m > 1.5) {
        return Err(Error::Hypothesis(format!("3/2 < s + m fails (s + m = {})", s + m)));
    }
    if !(s + m <= sigma) {
        return Err(Error::Hypothesis(format!(
            "s + m <= sigma fails (s + m = {}, sigma = {sigma})",
            s + m
        )));
    }
    Ok(())
}

/// `‖[Λ^m, f]g‖_s / (‖f‖_σ ‖g‖_{s+m−1})`, with `[Λ^m, f]g = Λ^m(fg) − fΛ^m g`.
/// `None` when the denominator vanishes.
pub fn commutator_ratio(
    f: &RealField,
    g: &RealField,
    m: f64,
    s: f64,
    sigma: f64,
    nu: FractionalOrder,
) -> Result<Option<f64>> {
    let den = sobolev_norm(f, sigma) * sobolev_norm(g, s + m - 1.0);
    if den == 0.0 {
        return Ok(None);
    }
    let fg = product(f, g, Products::Dealiased)?;
    let comm = lambda_pow(&fg, m, nu)?.sub(&product(f, &lambda_pow(g, m, nu)?, Products::Dealiased)?)?;
    Ok(ratio(sobolev_norm(&comm, s), den))
}

/// Samples the commutator ratio over random band-limited pairs `(f, g)`.
/// Fails before any computation when `m > 0`, `s ≥ 0`, `3/2 < s+m ≤ σ` do not hold.
pub fn commutator_estimate_sample(
    m: f64,
    s: f64,
    sigma: f64,
    nu: FractionalOrder,
    spec: &SampleSpec,
) -> Result<DiagnosticsReport> {
    check_commutator_hypothesis(m, s, sigma)?;
    let samples = (0..spec.n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = spec.rng(i);
            let f = random_band_limited(&spec.grid, spec.band_limit, &mut rng)?;
            let g = random_band_limited(&spec.grid, spec.band_limit, &mut rng)?;
            let (Some(f), Some(g)) = (
                scaled_to(f, sigma, spec.amplitude)?,
                scaled_to(g, s + m - 1.0, spec.amplitude)?,
            ) else {
                return Ok(None);
            };
            commutator_ratio(&f, &g, m, s, sigma, nu)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagnosticsReport::assemble(
        format!("commutator(m={m}, s={s}, sigma={sigma}, nu={})", nu.value()),
        samples,
        spec,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KatoEstimate {
    /// `‖(A(u)−A(v))z‖_{s−1} / (‖u−v‖_{s−1} ‖z‖_s)`
    ALip,
    /// `‖B(u)w‖_{s−1} / ‖w‖_{s−1}`
    BBound,
    /// `‖(B(u)−B(v))w‖_{s−1} / (‖u−v‖_s ‖w‖_{s−1})`
    BLip,
    /// `‖f(u)−f(v)‖_{s−1} / ‖u−v‖_{s−1}`
    FLipX,
    /// `‖f(u)−f(v)‖_s / ‖u−v‖_s`
    FLipY,
}

impl KatoEstimate {
    pub const ALL: [KatoEstimate; 5] = [
        KatoEstimate::ALip,
        KatoEstimate::BBound,
        KatoEstimate::BLip,
        KatoEstimate::FLipX,
        KatoEstimate::FLipY,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KatoEstimate::ALip => "a_lip",
            KatoEstimate::BBound => "b_bound",
            KatoEstimate::BLip => "b_lip",
            KatoEstimate::FLipX => "f_lip_x",
            KatoEstimate::FLipY => "f_lip_y",
        }
    }

    /// Index of the space the test vector is normalized in, relative to `s`.
    fn test_shift(self) -> f64 {
        match self {
            KatoEstimate::ALip => 0.0,
            _ => -1.0,
        }
    }
}

/// One ratio of the chosen estimate. `test` is `z` for [`KatoEstimate::ALip`],
/// `w` for the `B` estimates and unused for the `f` estimates; `v` is unused
/// for [`KatoEstimate::BBound`].
pub fn kato_ratio(
    which: KatoEstimate,
    u: &RealField,
    v: &RealField,
    test: &RealField,
    s: f64,
    nu: FractionalOrder,
) -> Result<Option<f64>> {
    let diff = || u.sub(v);
    Ok(match which {
        KatoEstimate::ALip => {
            let d = diff()?;
            let num = apply_a(u, test, nu)?.sub(&apply_a(v, test, nu)?)?;
            ratio(
                sobolev_norm(&num, s - 1.0),
                sobolev_norm(&d, s - 1.0) * sobolev_norm(test, s),
            )
        }
        KatoEstimate::BBound => ratio(
            sobolev_norm(&apply_b(u, test, nu)?, s - 1.0),
            sobolev_norm(test, s - 1.0),
        ),
        KatoEstimate::BLip => {
            let d = diff()?;
            let num = apply_b(u, test, nu)?.sub(&apply_b(v, test, nu)?)?;
            ratio(
                sobolev_norm(&num, s - 1.0),
                sobolev_norm(&d, s) * sobolev_norm(test, s - 1.0),
            )
        }
        KatoEstimate::FLipX | KatoEstimate::FLipY => {
            let idx = if which == KatoEstimate::FLipX { s - 1.0 } else { s };
            let d = diff()?;
            let num = apply_f(u, nu)?.sub(&apply_f(v, nu)?)?;
            ratio(sobolev_norm(&num, idx), sobolev_norm(&d, idx))
        }
    })
}

/// Samples one of the quasi-linear estimates with `u, v` in the H^s ball of
/// radius `spec.amplitude`. Requires `s > 2ν + 1/2`.
pub fn kato_lipschitz_sample(
    which: KatoEstimate,
    s: f64,
    nu: FractionalOrder,
    spec: &SampleSpec,
) -> Result<DiagnosticsReport> {
    let bound = 2.0 * nu.value() + 0.5;
    if !(s > bound) {
        return Err(Error::Hypothesis(format!(
            "s > 2nu + 1/2 fails (s = {s}, 2nu + 1/2 = {bound})"
        )));
    }
    let radius = spec.amplitude;
    let samples = (0..spec.n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = spec.rng(i);
            let in_ball = |rng: &mut ChaCha8Rng| -> Result<Option<RealField>> {
                let r = radius * rng.random_range(0.1..=1.0);
                scaled_to(random_band_limited(&spec.grid, spec.band_limit, rng)?, s, r)
            };
            let u = in_ball(&mut rng)?;
            let v = in_ball(&mut rng)?;
            let test = random_band_limited(&spec.grid, spec.band_limit, &mut rng)?;
            let test = scaled_to(test, s + which.test_shift(), 1.0)?;
            match (u, v, test) {
                (Some(u), Some(v), Some(t)) => kato_ratio(which, &u, &v, &t, s, nu),
                _ => Ok(None),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagnosticsReport::assemble(
        format!("{}(s={s}, nu={})", which.name(), nu.value()),
        samples,
        spec,
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    /// Random band-limited direction with modes up to `band_limit`.
    Random { band_limit: usize },
    Constant,
}

#[derive(Clone, Debug, Serialize)]
pub struct DependenceSpec {
    /// Size of the initial separation in H^{s−1}.
    pub delta: f64,
    pub n_pairs: usize,
    pub s: f64,
    pub seed: u64,
    pub perturbation: Perturbation,
}

#[derive(Clone, Debug, Serialize)]
pub struct DependenceReport {
    pub delta: f64,
    /// Growth ratio per completed pair.
    pub growth: Vec<f64>,
    pub sup_growth: f64,
    pub censored: usize,
    pub t_exp: f64,
    pub dt: f64,
}

/// Runs pairs `(u0, u0 + δp)` with a shared fixed step and records
/// `G = sup_t ‖u₁(t)−u₂(t)‖_{s−1} / ‖u₁(0)−u₂(0)‖_{s−1}` for each pair. Pairs where
/// either run breaks or blows up before `config.t_end` are censored.
pub fn continuous_dependence_experiment(
    u0: &RealField,
    model: &ModelParams,
    config: &SolverConfig,
    spec: &DependenceSpec,
) -> Result<DependenceReport> {
    if !(spec.delta.is_finite() && spec.delta > 0.0) {
        return Err(Error::Parameter(format!(
            "perturbation scale must be positive, got {}",
            spec.delta
        )));
    }
    let grid = u0.grid();
    let dt = match config.dt {
        StepSize::Fixed(dt) => dt,
        StepSize::Auto => auto_dt(u0, model, config.integrator, config.cfl),
    };
    let mut cfg = config.clone();
    cfg.dt = StepSize::Fixed(dt);
    cfg.snapshot_every = dt;
    let trajectory = |start: RealField| -> Result<Option<Vec<RealField>>> {
        let mut sink = MemorySink::default();
        let r = integrate(start, model, &cfg, &mut sink)?;
        Ok(match r.outcome {
            Outcome::Completed => Some(sink.snapshots.into_iter().map(|(_, u)| u).collect()),
            _ => None,
        })
    };
    let base = trajectory(u0.clone())?;
    let sm1 = spec.s - 1.0;
    let pairs = (0..spec.n_pairs)
        .into_par_iter()
        .map(|i| -> Result<Option<f64>> {
            let Some(base) = &base else { return Ok(None) };
            let dir = match &spec.perturbation {
                Perturbation::Constant => RealField::constant(grid, 1.0)?,
                Perturbation::Random { band_limit } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                    rng.set_stream(i as u64);
                    random_band_limited(grid, *band_limit, &mut rng)?
                }
            };
            let dir = scaled_to(dir, sm1, spec.delta)?
                .ok_or_else(|| Error::Parameter("zero perturbation direction".into()))?;
            let Some(other) = trajectory(u0.add(&dir)?)? else {
                return Ok(None);
            };
            let initial = sobolev_norm(&base[0].sub(&other[0])?, sm1);
            let mut sup = 0.0f64;
            for (a, b) in base.iter().zip(&other) {
                sup = sup.max(sobolev_norm(&a.sub(b)?, sm1));
            }
            Ok(ratio(sup, initial))
        })
        .collect::<Result<Vec<_>>>()?;
    let censored = pairs.iter().filter(|g| g.is_none()).count();
    let growth: Vec<f64> = pairs.into_iter().flatten().collect();
    Ok(DependenceReport {
        delta: spec.delta,
        sup_growth: growth.iter().copied().fold(0.0, f64::max),
        growth,
        censored,
        t_exp: config.t_end,
        dt,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Spatial,
    Temporal,
    BoxSize,
}

pub struct ConvergenceSetup<'a> {
    /// Initial datum on `[0, L)`. For [`StudyKind::BoxSize`] it is evaluated
    /// at `x − L/2`, so it should be centred on the origin.
    pub initial: &'a (dyn Fn(f64) -> f64 + Sync),
    /// Exact solution `(x, t) ↦ u`, used instead of a reference run when given
    /// (spatial and temporal studies only).
    pub exact: Option<&'a (dyn Fn(f64, f64) -> f64 + Sync)>,
    pub length: f64,
    pub n_points: usize,
    pub solver: SolverConfig,
    /// Number of refinements before the reference level.
    pub levels: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    /// N, dt or L depending on the study.
    pub resolution: f64,
    pub error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceTable {
    pub kind: StudyKind,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log(error)` against `log(dt)` (temporal only).
    pub fitted_order: Option<f64>,
}

fn run_final(
    grid: &Grid,
    initial: &(dyn Fn(f64) -> f64 + Sync),
    model: &ModelParams,
    cfg: &SolverConfig,
) -> Result<RealField> {
    let u0 = RealField::from_fn(grid, initial)?;
    let r = integrate(u0, model, cfg, &mut NullSink)?;
    match r.outcome {
        Outcome::Completed => Ok(r.state.u),
        other => Err(Error::Run(format!(
            "N={} L={} stopped at t={}: {other:?}",
            grid.n_points(),
            grid.length(),
            r.state.t
        ))),
    }
}

/// L² distance between the trigonometric interpolants of `a` and `b` on grids
/// of equal length.
fn spectral_distance(a: &RealField, b: &RealField) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let cs = forward_raw(small.grid(), small.values());
    let mut cl = forward_raw(large.grid(), large.values());
    for (slot, c) in cs.iter().enumerate() {
        let j = small.grid().signed_index(slot);
        let target = large.grid().slot(j).expect("coarse mode lives on the fine grid");
        cl[target] -= c;
    }
    sobolev_norm_coeffs(large.grid(), &cl, 0.0)
}

fn max_error_vs(u: &RealField, f: impl Fn(f64) -> f64) -> f64 {
    u.values()
        .iter()
        .enumerate()
        .map(|(j, v)| (v - f(u.grid().x(j))).abs())
        .fold(0.0, f64::max)
}

fn log_slope(rows: &[ConvergenceRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.error > 0.0)
        .map(|r| (r.resolution.ln(), r.error.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

pub fn convergence_study(
    kind: StudyKind,
    model: &ModelParams,
    setup: &ConvergenceSetup<'_>,
) -> Result<ConvergenceTable> {
    let levels = setup.levels.max(1);
    let t_end = setup.solver.t_end;
    match kind {
        StudyKind::Spatial => {
            let finest = Grid::new(setup.length, setup.n_points << levels)?;
            let dt = match setup.solver.dt {
                StepSize::Fixed(dt) => dt,
                StepSize::Auto => {
                    let u0 = RealField::from_fn(&finest, setup.initial)?;
                    auto_dt(&u0, model, setup.solver.integrator, setup.solver.cfl)
                }
            };
            let mut cfg = setup.solver.clone();
            cfg.dt = StepSize::Fixed(dt);
            let reference = match setup.exact {
                Some(_) => None,
                None => Some(run_final(&finest, setup.initial, model, &cfg)?),
            };
            let rows = (0..levels)
                .into_par_iter()
                .map(|i| {
                    let grid = Grid::new(setup.length, setup.n_points << i)?;
                    let u = run_final(&grid, setup.initial, model, &cfg)?;
                    let error = match (&reference, setup.exact) {
                        (Some(r), _) => spectral_distance(&u, r),
                        (None, Some(exact)) => max_error_vs(&u, |x| exact(x, t_end)),
                        (None, None) => unreachable!("reference is computed when no exact solution is given"),
                    };
                    Ok(ConvergenceRow {
                        resolution: grid.n_points() as f64,
                        error,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ConvergenceTable {
                kind,
                rows,
                fitted_order: None,
            })
        }
        StudyKind::Temporal => {
            let grid = Grid::new(setup.length, setup.n_points)?;
            let dt0 = match setup.solver.dt {
                StepSize::Fixed(dt) => dt,
                StepSize::Auto => {
                    let u0 = RealField::from_fn(&grid, setup.initial)?;
                    auto_dt(&u0, model, setup.solver.integrator, setup.solver.cfl)
                }
            };
            let n_runs = if setup.exact.is_some() { levels } else { levels + 1 };
            let finals = (0..n_runs)
                .into_par_iter()
                .map(|i| {
                    let mut cfg = setup.solver.clone();
                    cfg.dt = StepSize::Fixed(dt0 / (1u64 << i) as f64);
                    run_final(&grid, setup.initial, model, &cfg)
                })
                .collect::<Result<Vec<_>>>()?;
            let rows: Vec<ConvergenceRow> = match setup.exact {
                Some(exact) => finals
                    .iter()
                    .enumerate()
                    .map(|(i, u)| ConvergenceRow {
                        resolution: dt0 / (1u64 << i) as f64,
                        error: max_error_vs(u, |x| exact(x, t_end)),
                    })
                    .collect(),
                None => finals
                    .windows(2)
                    .enumerate()
                    .map(|(i, w)| ConvergenceRow {
                        resolution: dt0 / (1u64 << i) as f64,
                        error: spectral_distance(&w[0], &w[1]),
                    })
                    .collect(),
            };
            let fitted_order = log_slope(&rows);
            Ok(ConvergenceTable {
                kind,
                rows,
                fitted_order,
            })
        }
        StudyKind::BoxSize => {
            let base = Grid::new(setup.length, setup.n_points)?;
            let run_box = |factor: usize| -> Result<RealField> {
                let length = setup.length * factor as f64;
                let grid = Grid::new(length, setup.n_points * factor)?;
                let centred = |x: f64| (setup.initial)(x - 0.5 * length);
                let mut cfg = setup.solver.clone();
                if let StepSize::Auto = cfg.dt {
                    let u0 = RealField::from_fn(&base, |x| (setup.initial)(x - 0.5 * setup.length))?;
                    cfg.dt = StepSize::Fixed(auto_dt(&u0, model, cfg.integrator, cfg.cfl));
                }
                run_final(&grid, &centred, model, &cfg)
            };
            let reference = run_box(1 << levels)?;
            let rows = (0..levels)
                .into_par_iter()
                .map(|i| {
                    let factor = 1usize << i;
                    let u = run_box(factor)?;
                    // grids share dx, so the boxes overlap on whole grid points
                    let offset = (reference.len() - u.len()) / 2;
                    let error = u
                        .values()
                        .iter()
                        .enumerate()
                        .map(|(j, v)| (v - reference.values()[j + offset]).abs())
                        .fold(0.0, f64::max);
                    Ok(ConvergenceRow {
                        resolution: u.grid().length(),
                        error,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ConvergenceTable {
                kind,
                rows,
                fitted_order: None,
            })
        }
    }
}

/// Phase speed of mode `j` from `(t, û_j(t))` samples: least-squares slope of
/// the unwrapped phase, divided by `−k_j`. Each phase increment takes the
/// branch closest to the increment `predicted` (a speed) implies, so sparse
/// samples stay consistent with the linear theory up to deviations below π.
pub fn phase_speed(samples: &[(f64, Complex64)], k: f64, predicted: Option<f64>) -> Option<f64> {
    if samples.len() < 2 || k == 0.0 || samples.iter().any(|(_, z)| z.norm() == 0.0) {
        return None;
    }
    let tau = std::f64::consts::TAU;
    let mut phases = vec![(samples[0].0, samples[0].1.arg())];
    for w in samples.windows(2) {
        let (t0, z0) = w[0];
        let (t1, z1) = w[1];
        let guess = predicted.map_or(0.0, |c| -k * c * (t1 - t0));
        let raw = z1.arg() - z0.arg();
        let step = raw + tau * ((guess - raw) / tau).round();
        let last = phases.last().expect("seeded").1;
        phases.push((t1, last + step));
    }
    let n = phases.len() as f64;
    let mt = phases.iter().map(|p| p.0).sum::<f64>() / n;
    let mp = phases.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = phases.iter().map(|p| (p.0 - mt) * (p.1 - mp)).sum();
    let sxx: f64 = phases.iter().map(|p| (p.0 - mt).powi(2)).sum();
    (sxx > 0.0).then(|| -(sxy / sxx) / k)
}

/// Spectrum-level helper for tests and reports: H^s norm of a field's
/// coefficients, equal to [`sobolev_norm`].
pub fn sobolev_norm_of(u: &RealField, s: f64) -> Result<f64> {
    Ok(crate::spectral::sobolev_norm_spectral(&forward_transform(u)?, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;

    fn nu1() -> FractionalOrder {
        FractionalOrder::new(1.0).unwrap()
    }

    fn spec(n: usize, samples: usize, band: usize) -> SampleSpec {
        SampleSpec::new(samples, Grid::periodic(n).unwrap(), band, 1.0, 7).unwrap()
    }

    #[test]
    fn sample_spec_validation() {
        let g = Grid::periodic(64).unwrap();
        assert!(SampleSpec::new(10, g.clone(), 21, 1.0, 0).is_ok());
        assert!(SampleSpec::new(10, g.clone(), 22, 1.0, 0).is_err());
        assert!(SampleSpec::new(0, g.clone(), 4, 1.0, 0).is_err());
        assert!(SampleSpec::new(10, g, 4, 0.0, 0).is_err());
    }

    #[test]
    fn hypothesis_checked_before_work() {
        let sp = spec(32, 4, 5);
        for (m, s, sigma, needle) in [
            (0.5, 0.5, 3.0, "3/2 < s + m"),
            (1.0, 2.0, 2.5, "s + m <= sigma"),
            (0.0, 2.0, 3.0, "m > 0"),
            (1.0, -0.1, 3.0, "s >= 0"),
        ] {
            match commutator_estimate_sample(m, s, sigma, nu1(), &sp) {
                Err(Error::Hypothesis(msg)) => assert!(msg.contains(needle), "{msg}"),
                other => panic!("expected hypothesis error, got {other:?}"),
            }
        }
        assert!(matches!(
            kato_lipschitz_sample(KatoEstimate::ALip, 2.5, nu1(), &sp),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn constant_f_commutes() {
        let g = Grid::periodic(32).unwrap();
        let f = RealField::constant(&g, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_band_limited(&g, 8, &mut rng).unwrap();
        let r = commutator_ratio(&f, &h, 1.0, 2.0, 3.0, nu1()).unwrap().unwrap();
        assert!(r < 1e-13, "{r}");
        let zero = RealField::zeros(&g);
        assert!(commutator_ratio(&zero, &h, 1.0, 2.0, 3.0, nu1()).unwrap().is_none());
    }

    #[test]
    fn commutator_ratio_is_scale_invariant() {
        let g = Grid::periodic(64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_band_limited(&g, 15, &mut rng).unwrap();
        let h = random_band_limited(&g, 15, &mut rng).unwrap();
        let a = commutator_ratio(&f, &h, 1.0, 2.0, 3.0, nu1()).unwrap().unwrap();
        let b = commutator_ratio(&f.scale(2.0).unwrap(), &h, 1.0, 2.0, 3.0, nu1())
            .unwrap()
            .unwrap();
        assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn reports_are_reproducible() {
        let sp = spec(64, 20, 10);
        let a = commutator_estimate_sample(1.0, 2.0, 3.0, nu1(), &sp).unwrap();
        let b = commutator_estimate_sample(1.0, 2.0, 3.0, nu1(), &sp).unwrap();
        let bits = |r: &DiagnosticsReport| r.ratios.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(a.ratios.len(), 20);
        assert!(a.all_finite());
        assert_eq!(a.sup_ratio, a.ratios.iter().copied().fold(0.0, f64::max));
    }

    #[test]
    fn f_lip_x_closed_form() {
        // f(sin) = sin(2x)/5, so ‖f(u)‖₂ / ‖u‖₂ = (√π·5/5) / (√π·2) = 1/2 at s = 3
        let g = Grid::periodic(32).unwrap();
        let u = RealField::from_fn(&g, f64::sin).unwrap();
        let zero = RealField::zeros(&g);
        let r = kato_ratio(KatoEstimate::FLipX, &u, &zero, &zero, 3.0, nu1())
            .unwrap()
            .unwrap();
        assert!((r - 0.5).abs() < 1e-13, "{r}");
    }

    #[test]
    fn identical_arguments_are_skipped() {
        let g = Grid::periodic(32).unwrap();
        let u = RealField::from_fn(&g, |x| x.cos()).unwrap();
        for which in [KatoEstimate::ALip, KatoEstimate::BLip, KatoEstimate::FLipX, KatoEstimate::FLipY] {
            assert!(kato_ratio(which, &u, &u, &u, 3.0, nu1()).unwrap().is_none());
        }
    }

    #[test]
    fn lipschitz_ratios_scale_with_difference() {
        // ratios are invariant under scaling the test vector
        let g = Grid::periodic(64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random_band_limited(&g, 10, &mut rng).unwrap();
        let v = random_band_limited(&g, 10, &mut rng).unwrap();
        let z = random_band_limited(&g, 10, &mut rng).unwrap();
        for which in [KatoEstimate::ALip, KatoEstimate::BBound, KatoEstimate::BLip] {
            let a = kato_ratio(which, &u, &v, &z, 3.0, nu1()).unwrap().unwrap();
            let b = kato_ratio(which, &u, &v, &z.scale(3.0).unwrap(), 3.0, nu1())
                .unwrap()
                .unwrap();
            assert!((a - b).abs() <= 1e-12 * a, "{which:?}");
        }
    }

    #[test]
    fn constant_pairs_have_unit_growth() {
        let g = Grid::periodic(32).unwrap();
        let p = ModelParams::new(ModelKind::Fch, 1.0).unwrap();
        let cfg = SolverConfig::new(ModelKind::Fch, 0.5);
        let u0 = RealField::constant(&g, 0.3).unwrap();
        let spec = DependenceSpec {
            delta: 1e-3,
            n_pairs: 3,
            s: 3.0,
            seed: 1,
            perturbation: Perturbation::Constant,
        };
        let r = continuous_dependence_experiment(&u0, &p, &cfg, &spec).unwrap();
        assert_eq!(r.censored, 0);
        for g in &r.growth {
            assert!((g - 1.0).abs() <= 1e-12, "{g}");
        }
    }

    #[test]
    fn dependence_rejects_zero_delta() {
        let g = Grid::periodic(32).unwrap();
        let p = ModelParams::new(ModelKind::Fch, 1.0).unwrap();
        let cfg = SolverConfig::new(ModelKind::Fch, 0.5);
        let spec = DependenceSpec {
            delta: 0.0,
            n_pairs: 1,
            s: 3.0,
            seed: 1,
            perturbation: Perturbation::Constant,
        };
        assert!(continuous_dependence_experiment(&RealField::zeros(&g), &p, &cfg, &spec).is_err());
    }

    #[test]
    fn phase_speed_of_rotating_mode() {
        let c = 0.7;
        let samples: Vec<(f64, Complex64)> = (0..40)
            .map(|i| {
                let t = 0.9 * i as f64;
                (t, Complex64::from_polar(1e-6, 0.3 - 2.0 * c * t))
            })
            .collect();
        // 0.9 time units turn the phase by 1.26 rad, so unwrapping is unambiguous
        assert!((phase_speed(&samples, 2.0, None).unwrap() - c).abs() < 1e-12);
        // sparse samples need the prediction to pick the branch
        let sparse: Vec<_> = samples.iter().step_by(4).copied().collect();
        assert!((phase_speed(&sparse, 2.0, Some(0.69)).unwrap() - c).abs() < 1e-12);
        assert!(phase_speed(&samples[..1], 2.0, None).is_none());
    }

    #[test]
    fn spatial_study_on_advection() {
        let model = ModelParams::linear_advection();
        let mut solver = SolverConfig::new(ModelKind::LinearizedFch, 2.0 * std::f64::consts::PI);
        solver.dt = StepSize::Fixed(2.0 * std::f64::consts::PI / 2000.0);
        let init = |x: f64| x.sin().exp();
        let setup = ConvergenceSetup {
            initial: &init,
            exact: None,
            length: 2.0 * std::f64::consts::PI,
            n_points: 8,
            solver,
            levels: 4,
        };
        let table = convergence_study(StudyKind::Spatial, &model, &setup).unwrap();
        let errs: Vec<f64> = table.rows.iter().map(|r| r.error).collect();
        assert_eq!(table.rows.last().unwrap().resolution, 64.0);
        assert!(errs[3] < 1e-10, "{errs:?}");
        // faster than algebraic: each doubling gains more than the previous
        assert!(errs[0] / errs[1] > 10.0 && errs[1] / errs[2] > errs[0] / errs[1]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            // the ratio is homogeneous of degree zero in f and in g
            #[test]
            fn commutator_ratio_is_scale_free(seed in 0u64..1000, a in 0.1f64..10.0, b in 0.1f64..10.0) {
                let grid = Grid::periodic(64).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let f = random_band_limited(&grid, 10, &mut rng).unwrap();
                let g = random_band_limited(&grid, 10, &mut rng).unwrap();
                let nu = FractionalOrder::new(1.0).unwrap();
                let r0 = commutator_ratio(&f, &g, 1.0, 2.0, 3.0, nu).unwrap().unwrap();
                let r1 = commutator_ratio(&f.scale(a).unwrap(), &g.scale(b).unwrap(), 1.0, 2.0, 3.0, nu)
                    .unwrap()
                    .unwrap();
                prop_assert!((r0 - r1).abs() <= 1e-10 * r0);
            }

            #[test]
            fn random_fields_respect_the_band(seed in 0u64..1000, band in 1usize..20) {
                let grid = Grid::periodic(64).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let u = random_band_limited(&grid, band, &mut rng).unwrap();
                let c = forward_transform(&u).unwrap();
                for (slot, z) in c.coeffs().iter().enumerate() {
                    if grid.signed_index(slot).unsigned_abs() as usize > band {
                        prop_assert!(z.norm() < 1e-14);
                    }
                }
            }
        }
    }
}
