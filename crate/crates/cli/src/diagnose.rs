//! `diagnose`: estimate samplers, continuous dependence and convergence
//! studies, each writing one JSON report.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::path::Path;

use fracwave::diagnostics::{
    commutator_estimate_sample, continuous_dependence_experiment, convergence_study,
    kato_lipschitz_sample, refinement_factor, ConvergenceSetup, ConvergenceTable,
    DependenceReport, DependenceSpec, DiagnosticsReport, KatoEstimate, Perturbation, SampleSpec,
    StudyKind,
};
use fracwave::{Error, Grid, ModelKind};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{
    apply_overrides, from_value, order, prepare_parts, ConfigError, GridSection, Initial,
    ModelSection, SolverSection,
};
use crate::output::write_json;
use crate::run::{initial_field, EXIT_CONFIG, EXIT_OK};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Subkind {
    Commutator,
    Lipschitz,
    Dependence,
    Convergence,
}

/// Sample-set parameters shared by the estimate samplers.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    pub samples: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub band: usize,
    pub amplitude: f64,
    pub seed: u64,
    /// Repeat at 2N and at twice the samples and require < 2× change.
    pub refine: bool,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            samples: 200,
            n: 128,
            length: TAU,
            band: 20,
            amplitude: 1.0,
            seed: 42,
            refine: true,
        }
    }
}

impl Sampling {
    fn spec(&self) -> Result<SampleSpec, ConfigError> {
        let grid = Grid::new(self.length, self.n).map_err(|e| ConfigError(format!("grid: {e}")))?;
        SampleSpec::new(self.samples, grid, self.band, self.amplitude, self.seed)
            .map_err(|e| ConfigError(e.to_string()))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommutatorParams {
    pub m: f64,
    pub s: f64,
    pub sigma: f64,
    pub nu: f64,
    pub sampling: Sampling,
}

impl Default for CommutatorParams {
    fn default() -> Self {
        CommutatorParams {
            m: 1.0,
            s: 2.0,
            sigma: 3.0,
            nu: 1.0,
            sampling: Sampling::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum EstimateChoice {
    One(KatoEstimate),
    All(AllTag),
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum AllTag {
    All,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LipschitzParams {
    pub estimate: EstimateChoice,
    /// Defaults to `2ν + 0.6`.
    pub s: Option<f64>,
    pub nu: f64,
    pub sampling: Sampling,
}

impl Default for LipschitzParams {
    fn default() -> Self {
        LipschitzParams {
            estimate: EstimateChoice::All(AllTag::All),
            s: None,
            nu: 1.0,
            sampling: Sampling::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DependenceParams {
    pub model: ModelSection,
    pub grid: GridSection,
    pub initial: Initial,
    pub solver: SolverSection,
    pub deltas: Vec<f64>,
    pub pairs: usize,
    pub s: f64,
    pub seed: u64,
    pub perturbation: Perturbation,
    /// Require the largest G of every δ to lie within 2× of the others.
    pub require_stability: bool,
}

impl Default for DependenceParams {
    fn default() -> Self {
        DependenceParams {
            model: ModelSection {
                kind: ModelKind::Fch,
                nu: 1.0,
                coefficients: None,
            },
            grid: GridSection { length: TAU, n: 64 },
            initial: Initial::Mode {
                k: 1,
                amplitude: 0.2,
                phase: -FRAC_PI_2,
            },
            solver: SolverSection {
                t_end: 1.0,
                ..SolverSection::default()
            },
            deltas: vec![1e-2, 1e-3, 1e-4],
            pairs: 10,
            s: 3.0,
            seed: 7,
            perturbation: Perturbation::Random { band_limit: 10 },
            require_stability: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceParams {
    pub study: StudyKind,
    pub model: ModelSection,
    pub grid: GridSection,
    pub initial: Initial,
    pub solver: SolverSection,
    pub levels: usize,
}

impl Default for ConvergenceParams {
    fn default() -> Self {
        ConvergenceParams {
            study: StudyKind::Temporal,
            model: ModelSection {
                kind: ModelKind::Fbbm,
                nu: 1.0,
                coefficients: None,
            },
            grid: GridSection { length: TAU, n: 64 },
            initial: Initial::Mode {
                k: 1,
                amplitude: 0.5,
                phase: 0.0,
            },
            solver: SolverSection {
                t_end: 1.0,
                dt: crate::config::DtSetting::Fixed(0.1),
                ..SolverSection::default()
            },
            levels: 3,
        }
    }
}

#[derive(Serialize)]
struct Refinement {
    report: DiagnosticsReport,
    refined_grid: Option<DiagnosticsReport>,
    doubled_samples: Option<DiagnosticsReport>,
    grid_factor: Option<f64>,
    sample_factor: Option<f64>,
    finite: bool,
    stable: Option<bool>,
}

impl Refinement {
    fn passed(&self) -> bool {
        self.finite && self.stable.unwrap_or(true)
    }
}

/// Runs `sample` on the base sampling and, with refinement, on 2N and on twice
/// the samples.
fn refine_with(
    sampling: &Sampling,
    sample: impl Fn(&SampleSpec) -> fracwave::Result<DiagnosticsReport>,
) -> Result<Refinement, Error> {
    let spec = sampling.spec().map_err(|e| Error::Parameter(e.0))?;
    let report = sample(&spec)?;
    if !sampling.refine {
        let finite = report.all_finite();
        return Ok(Refinement {
            report,
            refined_grid: None,
            doubled_samples: None,
            grid_factor: None,
            sample_factor: None,
            finite,
            stable: None,
        });
    }
    let fine = sample(&spec.with_grid(Grid::new(sampling.length, 2 * sampling.n)?)?)?;
    let more = sample(&spec.with_samples(2 * sampling.samples)?)?;
    let gf = refinement_factor(&report, &fine);
    let sf = refinement_factor(&report, &more);
    let finite = report.all_finite() && fine.all_finite() && more.all_finite();
    Ok(Refinement {
        report,
        refined_grid: Some(fine),
        doubled_samples: Some(more),
        grid_factor: Some(gf),
        sample_factor: Some(sf),
        finite,
        stable: Some(gf < 2.0 && sf < 2.0),
    })
}

fn params<T: DeserializeOwned + Serialize + Default>(
    config: Option<&Path>,
    overrides: &[String],
) -> Result<T, ConfigError> {
    match config {
        Some(path) => {
            // start from the defaults so a config only names what it changes
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
            let file: Value = serde_json::from_str(&text)
                .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
            let mut value = serde_json::to_value(T::default()).expect("defaults serialize");
            merge(&mut value, file);
            apply_overrides(&mut value, overrides)?;
            from_value(value).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
        }
        None => {
            let mut value = serde_json::to_value(T::default()).expect("defaults serialize");
            apply_overrides(&mut value, overrides)?;
            from_value(value)
        }
    }
}

/// Recursive object merge; non-object values in `patch` replace.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    // a section that switches `kind` is replaced whole so fields of
                    // the old variant do not linger
                    Some(slot)
                        if slot.is_object()
                            && v.is_object()
                            && (v.get("kind").is_none() || v.get("kind") == slot.get("kind")) =>
                    {
                        merge(slot, v)
                    }
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

#[derive(Serialize)]
struct DependenceOut {
    per_delta: Vec<DependenceReport>,
    max_growth: Vec<f64>,
    decade_factor: f64,
    censored: usize,
    finite: bool,
    stable: Option<bool>,
}

pub fn diagnose(
    kind: Subkind,
    config: Option<&Path>,
    overrides: &[String],
    output: &Path,
    allow_low_nu: bool,
) -> i32 {
    match run(kind, config, overrides, output, allow_low_nu) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_CONFIG
        }
    }
}

fn run(
    kind: Subkind,
    config: Option<&Path>,
    overrides: &[String],
    output: &Path,
    allow_low_nu: bool,
) -> Result<i32, String> {
    let (report, passed, line): (Value, bool, String) = match kind {
        Subkind::Commutator => {
            let p: CommutatorParams = params(config, overrides).map_err(|e| e.0)?;
            let nu = order(p.nu, allow_low_nu).map_err(|e| e.0)?;
            let r = refine_with(&p.sampling, |spec| {
                commutator_estimate_sample(p.m, p.s, p.sigma, nu, spec)
            })
            .map_err(|e| e.to_string())?;
            let line = format!(
                "commutator sup={:.6e} mean={:.6e} grid_factor={:?} sample_factor={:?}",
                r.report.sup_ratio, r.report.mean_ratio, r.grid_factor, r.sample_factor
            );
            let passed = r.passed();
            (serde_json::json!({"params": &p, "result": &r}), passed, line)
        }
        Subkind::Lipschitz => {
            let p: LipschitzParams = params(config, overrides).map_err(|e| e.0)?;
            let nu = order(p.nu, allow_low_nu).map_err(|e| e.0)?;
            let s = p.s.unwrap_or(2.0 * nu.value() + 0.6);
            let which: Vec<KatoEstimate> = match p.estimate {
                EstimateChoice::One(w) => vec![w],
                EstimateChoice::All(_) => KatoEstimate::ALL.to_vec(),
            };
            let mut results = serde_json::Map::new();
            let mut passed = true;
            let mut lines = Vec::new();
            for w in which {
                let r = refine_with(&p.sampling, |spec| kato_lipschitz_sample(w, s, nu, spec))
                    .map_err(|e| e.to_string())?;
                passed &= r.passed();
                lines.push(format!(
                    "{} sup={:.6e} grid_factor={:?}",
                    w.name(),
                    r.report.sup_ratio,
                    r.grid_factor
                ));
                results.insert(w.name().into(), serde_json::json!(&r));
            }
            let body = serde_json::json!({"params": &p, "s": s, "results": results});
            (body, passed, lines.join("; "))
        }
        Subkind::Dependence => {
            let p: DependenceParams = params(config, overrides).map_err(|e| e.0)?;
            let prepared = prepare_parts(&p.model, &p.grid, &p.initial, &p.solver, allow_low_nu)
                .map_err(|e| e.0)?;
            if p.deltas.is_empty() {
                return Err("dependence needs at least one delta".into());
            }
            let u0 = initial_field(&p.initial, &prepared.grid)?;
            let mut per_delta = Vec::new();
            for &delta in &p.deltas {
                let spec = DependenceSpec {
                    delta,
                    n_pairs: p.pairs,
                    s: p.s,
                    seed: p.seed,
                    perturbation: p.perturbation.clone(),
                };
                per_delta.push(
                    continuous_dependence_experiment(&u0, &prepared.model, &prepared.solver, &spec)
                        .map_err(|e| e.to_string())?,
                );
            }
            let max_growth: Vec<f64> = per_delta.iter().map(|r| r.sup_growth).collect();
            let hi = max_growth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = max_growth.iter().copied().fold(f64::INFINITY, f64::min);
            let decade_factor = if lo > 0.0 { hi / lo } else { f64::INFINITY };
            let finite = per_delta
                .iter()
                .all(|r| r.growth.iter().all(|g| g.is_finite()));
            let stable = p.require_stability.then_some(decade_factor < 2.0);
            let censored = per_delta.iter().map(|r| r.censored).sum();
            let out = DependenceOut {
                per_delta,
                max_growth,
                decade_factor,
                censored,
                finite,
                stable,
            };
            let line = format!(
                "dependence max G per delta {:?}, factor {decade_factor:.4}, censored {censored}",
                out.max_growth
            );
            let passed = finite && stable.unwrap_or(true);
            (serde_json::json!({"params": &p, "result": &out}), passed, line)
        }
        Subkind::Convergence => {
            let p: ConvergenceParams = params(config, overrides).map_err(|e| e.0)?;
            let prepared = prepare_parts(&p.model, &p.grid, &p.initial, &p.solver, allow_low_nu)
                .map_err(|e| e.0)?;
            let initial = p.initial.clone();
            let base_grid = prepared.grid.clone();
            let length = base_grid.length();
            let eval = move |x: f64| -> f64 { evaluate(&initial, length, x) };
            if matches!(p.initial, Initial::File { .. }) {
                return Err("convergence studies need analytic initial data, not a file".into());
            }
            let setup = ConvergenceSetup {
                initial: &eval,
                exact: None,
                length,
                n_points: base_grid.n_points(),
                solver: prepared.solver.clone(),
                levels: p.levels,
            };
            let table: ConvergenceTable = convergence_study(p.study, &prepared.model, &setup)
                .map_err(|e| e.to_string())?;
            let passed = table.rows.iter().all(|r| r.error.is_finite());
            let line = format!(
                "{:?}: {} rows, fitted order {:?}",
                p.study,
                table.rows.len(),
                table.fitted_order
            );
            (serde_json::json!({"params": &p, "result": &table}), passed, line)
        }
    };
    if let Some(dir) = output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    let mut report = report;
    if let Value::Object(map) = &mut report {
        map.insert("passed".into(), Value::Bool(passed));
    }
    write_json(output, &report)?;
    println!("{line}");
    println!("report: {} ({})", output.display(), if passed { "pass" } else { "fail" });
    Ok(if passed { EXIT_OK } else { EXIT_CONFIG })
}

/// Analytic initial data as a function of `x` (for convergence studies).
fn evaluate(initial: &Initial, length: f64, x: f64) -> f64 {
    match initial {
        Initial::Zero | Initial::File { .. } => 0.0,
        Initial::Constant { value } => *value,
        Initial::Mode { k, amplitude, phase } => {
            amplitude * (TAU * *k as f64 / length * x + phase).cos()
        }
        Initial::Gaussian {
            center,
            width,
            amplitude,
        } => {
            let c = center.unwrap_or(0.5 * length);
            amplitude * (-((x - c) / width).powi(2)).exp()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn merge_replaces_tagged_sections() {
        let mut base = json!({"initial": {"kind": "mode", "k": 1, "amplitude": 0.2}, "solver": {"t_end": 1.0, "cfl": 0.5}});
        merge(&mut base, json!({"initial": {"kind": "constant", "value": 0.3}, "solver": {"t_end": 2.0}}));
        assert_eq!(base["initial"], json!({"kind": "constant", "value": 0.3}));
        assert_eq!(base["solver"], json!({"t_end": 2.0, "cfl": 0.5}));
    }

    #[test]
    fn defaults_round_trip() {
        let _: CommutatorParams = params(None, &[]).unwrap();
        let _: LipschitzParams = params(None, &[]).unwrap();
        let d: DependenceParams = params(None, &["pairs=3".into()]).unwrap();
        assert_eq!(d.pairs, 3);
        let _: ConvergenceParams = params(None, &[]).unwrap();
        assert!(params::<CommutatorParams>(None, &["bogus=1".into()]).is_err());
    }
}
