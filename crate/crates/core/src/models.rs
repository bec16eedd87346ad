//! Right-hand sides `u_t = F(u)` for the fractional Camassa-Holm, KdV and BBM
//! equations, their linear dispersion relation and conserved functionals.
//!
//! All three equations share the template
//!
//! ```text
//! (1 + c_evo L_ν) u_t = −[ c_adv u_x + c_nl u u_x + c_disp L_ν u_x
//!                          + c_mix (2 L_ν(u u_x) + u L_ν u_x) ]
//! ```
//!
//! and differ only in their coefficients.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{
    apply_a, apply_f, derivative, fractional_laplacian, helmholtz_inverse, laplacian_symbol,
    product, FractionalOrder, Products,
};
use crate::spectral::{forward_raw, Grid, RealField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Fch,
    Fkdv,
    Fbbm,
    /// fCH with the quadratic terms dropped.
    LinearizedFch,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Fch => "fch",
            ModelKind::Fkdv => "fkdv",
            ModelKind::Fbbm => "fbbm",
            ModelKind::LinearizedFch => "linearized_fch",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficients {
    pub c_adv: f64,
    pub c_nl: f64,
    pub c_disp: f64,
    pub c_evo: f64,
    pub c_mix: f64,
}

impl Coefficients {
    pub fn defaults(kind: ModelKind) -> Coefficients {
        match kind {
            ModelKind::Fch => Coefficients {
                c_adv: 1.0,
                c_nl: 1.0,
                c_disp: 0.75,
                c_evo: 1.25,
                c_mix: 0.25,
            },
            ModelKind::Fkdv => Coefficients {
                c_adv: 1.0,
                c_nl: 1.0,
                c_disp: -0.5,
                c_evo: 0.0,
                c_mix: 0.0,
            },
            ModelKind::Fbbm => Coefficients {
                c_adv: 1.0,
                c_nl: 1.0,
                c_disp: 0.75,
                c_evo: 1.25,
                c_mix: 0.0,
            },
            ModelKind::LinearizedFch => Coefficients {
                c_adv: 1.0,
                c_nl: 0.0,
                c_disp: 0.75,
                c_evo: 1.25,
                c_mix: 0.0,
            },
        }
    }

    fn check(&self, kind: ModelKind) -> Result<()> {
        let all = [self.c_adv, self.c_nl, self.c_disp, self.c_evo, self.c_mix];
        if all.iter().any(|c| !c.is_finite()) {
            return Err(Error::Parameter("coefficients must be finite".into()));
        }
        if self.c_evo < 0.0 {
            return Err(Error::Parameter(format!(
                "c_evo must be non-negative, got {}",
                self.c_evo
            )));
        }
        let bad = match kind {
            ModelKind::Fch => None,
            ModelKind::Fkdv if self.c_evo != 0.0 || self.c_mix != 0.0 => {
                Some("fkdv requires c_evo = 0 and c_mix = 0")
            }
            ModelKind::Fbbm if self.c_mix != 0.0 => Some("fbbm requires c_mix = 0"),
            ModelKind::LinearizedFch if self.c_nl != 0.0 || self.c_mix != 0.0 => {
                Some("linearized_fch requires c_nl = 0 and c_mix = 0")
            }
            _ => None,
        };
        match bad {
            Some(msg) => Err(Error::Parameter(msg.into())),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelParams {
    kind: ModelKind,
    nu: FractionalOrder,
    coefficients: Coefficients,
}

impl ModelParams {
    /// Default coefficients, ν ≥ 1 enforced.
    pub fn new(kind: ModelKind, nu: f64) -> Result<ModelParams> {
        Ok(ModelParams::with_order(kind, FractionalOrder::strict(nu)?))
    }

    /// Default coefficients with any accepted order.
    pub fn with_order(kind: ModelKind, nu: FractionalOrder) -> ModelParams {
        ModelParams {
            kind,
            nu,
            coefficients: Coefficients::defaults(kind),
        }
    }

    pub fn with_coefficients(mut self, coefficients: Coefficients) -> Result<ModelParams> {
        coefficients.check(self.kind)?;
        self.coefficients = coefficients;
        Ok(self)
    }

    /// `u_t + u_x = 0`
    pub fn linear_advection() -> ModelParams {
        ModelParams {
            kind: ModelKind::LinearizedFch,
            nu: FractionalOrder(1.0),
            coefficients: Coefficients {
                c_adv: 1.0,
                c_nl: 0.0,
                c_disp: 0.0,
                c_evo: 0.0,
                c_mix: 0.0,
            },
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn nu(&self) -> FractionalOrder {
        self.nu
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coefficients
    }
}

fn expect_kind(p: &ModelParams, kind: ModelKind) -> Result<()> {
    if p.kind == kind {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "expected a {} model, got {}",
            kind.name(),
            p.kind.name()
        )))
    }
}

fn rhs_template(u: &RealField, p: &ModelParams, policy: Products) -> Result<RealField> {
    let c = &p.coefficients;
    let nu = p.nu;
    let ux = derivative(u)?;
    let mut bracket = ux.scale(c.c_adv)?;
    if c.c_disp != 0.0 {
        bracket = bracket.axpy(c.c_disp, &fractional_laplacian(&ux, nu)?)?;
    }
    if c.c_nl != 0.0 || c.c_mix != 0.0 {
        let uux = product(u, &ux, policy)?;
        bracket = bracket.axpy(c.c_nl, &uux)?;
        if c.c_mix != 0.0 {
            let mixed = fractional_laplacian(&uux, nu)?
                .scale(2.0)?
                .add(&product(u, &fractional_laplacian(&ux, nu)?, policy)?)?;
            bracket = bracket.axpy(c.c_mix, &mixed)?;
        }
    }
    if c.c_evo > 0.0 {
        bracket = helmholtz_inverse(&bracket, c.c_evo, nu)?;
    }
    bracket.scale(-1.0)
}

/// Quadratic part of the right-hand side: the template with the linear
/// coefficients `c_adv` and `c_disp` removed.
pub fn rhs_nonlinear_with(u: &RealField, p: &ModelParams, policy: Products) -> Result<RealField> {
    let mut q = p.clone();
    q.coefficients.c_adv = 0.0;
    q.coefficients.c_disp = 0.0;
    rhs_template(u, &q, policy)
}

/// Evaluates any model kind with the given product policy.
pub fn rhs_with(u: &RealField, p: &ModelParams, policy: Products) -> Result<RealField> {
    rhs_template(u, p, policy)
}

pub fn rhs(u: &RealField, p: &ModelParams) -> Result<RealField> {
    rhs_template(u, p, Products::Dealiased)
}

pub fn rhs_fch(u: &RealField, p: &ModelParams) -> Result<RealField> {
    expect_kind(p, ModelKind::Fch)?;
    rhs(u, p)
}

pub fn rhs_fkdv(u: &RealField, p: &ModelParams) -> Result<RealField> {
    expect_kind(p, ModelKind::Fkdv)?;
    rhs(u, p)
}

pub fn rhs_fbbm(u: &RealField, p: &ModelParams) -> Result<RealField> {
    expect_kind(p, ModelKind::Fbbm)?;
    rhs(u, p)
}

pub fn rhs_linearized(u: &RealField, p: &ModelParams) -> Result<RealField> {
    expect_kind(p, ModelKind::LinearizedFch)?;
    rhs(u, p)
}

/// Unit-coefficient quasi-linear form `u_t = −A(u)u + f(u)`.
pub fn rhs_quasilinear_normalized(u: &RealField, nu: FractionalOrder) -> Result<RealField> {
    apply_f(u, nu)?.sub(&apply_a(u, u, nu)?)
}

/// Linear phase speed `(c_adv + c_disp|k|^{2ν}) / (1 + c_evo|k|^{2ν})`.
pub fn dispersion_speed(k: f64, p: &ModelParams) -> f64 {
    let c = &p.coefficients;
    let lk = laplacian_symbol(k, p.nu);
    (c.c_adv + c.c_disp * lk) / (1.0 + c.c_evo * lk)
}

/// Symbol of the linear part, `−i k c(k)`.
pub fn linear_symbol(k: f64, p: &ModelParams) -> Complex64 {
    Complex64::new(0.0, -k * dispersion_speed(k, p))
}

/// Largest `|c(k)|` over the grid wavenumbers.
pub fn max_phase_speed(grid: &Grid, p: &ModelParams) -> f64 {
    grid.wavenumbers()
        .into_iter()
        .map(|k| dispersion_speed(k, p).abs())
        .fold(0.0, f64::max)
}

/// `∫u dx`
pub fn mass(u: &RealField) -> f64 {
    u.grid().length() * forward_raw(u.grid(), u.values())[0].re
}

/// `(1/2)∫u² dx`
pub fn momentum(u: &RealField) -> f64 {
    let c = forward_raw(u.grid(), u.values());
    0.5 * u.grid().length() * c.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// `(L/2) Σ_k (1 + c_evo|k|^{2ν}) |û_k|²`
pub fn fbbm_energy(u: &RealField, p: &ModelParams) -> f64 {
    let grid = u.grid();
    let c = forward_raw(grid, u.values());
    let sum: f64 = c
        .iter()
        .enumerate()
        .map(|(slot, z)| {
            let k = grid.wavenumber_of(grid.signed_index(slot));
            (1.0 + p.coefficients.c_evo * laplacian_symbol(k, p.nu)) * z.norm_sqr()
        })
        .sum();
    0.5 * grid.length() * sum
}
