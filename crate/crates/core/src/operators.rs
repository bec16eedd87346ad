//! Fourier multipliers and the quasi-linear building blocks of the fCH equation.
//!
//! `L_ν = (-∂x²)^ν` has symbol `|k|^{2ν}` and `Λ^p` has symbol
//! `(1 + |k|^{2ν})^{p/(2ν)}`. With `a(u) = 1 + u + Λ^{-2ν}[u, L_ν]` the equation
//! takes the form `u_t + A(u)u = f(u)` where `A(u) = a(u)∂x` and
//! `f(u) = Λ^{-2ν}∂x(u²)`.
//!
//! Every pointwise product inside these operators is followed by 2/3-rule
//! truncation unless [`Products::Raw`] is requested.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{
    apply_symbol, dealias_in_place, forward_raw, forward_transform, inverse_raw, RealField,
};

/// Fractional exponent ν. Constructors accept ν ≥ 1/2; [`FractionalOrder::strict`]
/// additionally requires ν ≥ 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct FractionalOrder(pub(crate) f64);

impl FractionalOrder {
    pub const MIN: f64 = 0.5;
    pub const STRICT_MIN: f64 = 1.0;

    pub fn new(nu: f64) -> Result<FractionalOrder> {
        if nu.is_finite() && nu >= Self::MIN {
            Ok(FractionalOrder(nu))
        } else {
            Err(Error::Parameter(format!("fractional order must be >= 1/2, got {nu}")))
        }
    }

    pub fn strict(nu: f64) -> Result<FractionalOrder> {
        if nu.is_finite() && nu >= Self::STRICT_MIN {
            Ok(FractionalOrder(nu))
        } else {
            Err(Error::Parameter(format!(
                "fractional order must be >= 1 (pass the low-order override to go down to 1/2), got {nu}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_strict(self) -> bool {
        self.0 >= Self::STRICT_MIN
    }
}

/// How pointwise products are projected back onto the grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Products {
    /// Truncate with the 2/3 rule after each product.
    #[default]
    Dealiased,
    /// Keep the aliased product.
    Raw,
}

/// `|k|^{2ν}`, exactly zero at `k = 0`.
pub fn laplacian_symbol(k: f64, nu: FractionalOrder) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k.abs().powf(2.0 * nu.0)
    }
}

/// `(1 + |k|^{2ν})^{p/(2ν)}`
pub fn lambda_symbol(k: f64, p: f64, nu: FractionalOrder) -> f64 {
    (1.0 + laplacian_symbol(k, nu)).powf(p / (2.0 * nu.0))
}

/// `1 / (1 + μ|k|^{2ν})`
pub fn helmholtz_symbol(k: f64, mu: f64, nu: FractionalOrder) -> f64 {
    1.0 / (1.0 + mu * laplacian_symbol(k, nu))
}

fn multiplier<S, F>(u: &RealField, m: F) -> Result<RealField>
where
    F: Fn(f64) -> S,
    S: Into<Complex64>,
{
    let uh = apply_symbol(&forward_transform(u)?, m)?;
    inverse_raw(u.grid(), uh.into_coeffs())
}

/// Pointwise product under the given policy.
pub fn product(a: &RealField, b: &RealField, policy: Products) -> Result<RealField> {
    let ab = a.mul(b)?;
    match policy {
        Products::Raw => Ok(ab),
        Products::Dealiased => {
            let grid = ab.grid();
            let mut c = forward_raw(grid, ab.values());
            dealias_in_place(grid, &mut c);
            inverse_raw(grid, c)
        }
    }
}

/// Spectral first derivative.
pub fn derivative(u: &RealField) -> Result<RealField> {
    multiplier(u, |k| Complex64::new(0.0, k))
}

/// `(-∂x²)^ν u`
pub fn fractional_laplacian(u: &RealField, nu: FractionalOrder) -> Result<RealField> {
    multiplier(u, |k| laplacian_symbol(k, nu))
}

/// `Λ^p u`; `p` may be negative.
pub fn lambda_pow(u: &RealField, p: f64, nu: FractionalOrder) -> Result<RealField> {
    if !p.is_finite() {
        return Err(Error::Parameter(format!("Λ exponent must be finite, got {p}")));
    }
    multiplier(u, |k| lambda_symbol(k, p, nu))
}

/// `(1 + μ(-∂x²)^ν)^{-1} u`
pub fn helmholtz_inverse(u: &RealField, mu: f64, nu: FractionalOrder) -> Result<RealField> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::Parameter(format!(
            "Helmholtz coefficient must be positive, got {mu}"
        )));
    }
    multiplier(u, |k| helmholtz_symbol(k, mu, nu))
}

pub fn commutator_apply_with(
    u: &RealField,
    w: &RealField,
    nu: FractionalOrder,
    policy: Products,
) -> Result<RealField> {
    let left = product(u, &fractional_laplacian(w, nu)?, policy)?;
    let right = fractional_laplacian(&product(u, w, policy)?, nu)?;
    left.sub(&right)
}

/// `[u, L_ν]w = u·L_ν w − L_ν(u·w)`
pub fn commutator_apply(u: &RealField, w: &RealField, nu: FractionalOrder) -> Result<RealField> {
    commutator_apply_with(u, w, nu, Products::Dealiased)
}

pub fn apply_a_with(
    u: &RealField,
    z: &RealField,
    nu: FractionalOrder,
    policy: Products,
) -> Result<RealField> {
    let zx = derivative(z)?;
    let transport = zx.add(&product(u, &zx, policy)?)?;
    let nonlocal = lambda_pow(&commutator_apply_with(u, &zx, nu, policy)?, -2.0 * nu.0, nu)?;
    transport.add(&nonlocal)
}

/// `A(u)z = (1+u)∂x z + Λ^{-2ν}[u, L_ν]∂x z`
pub fn apply_a(u: &RealField, z: &RealField, nu: FractionalOrder) -> Result<RealField> {
    apply_a_with(u, z, nu, Products::Dealiased)
}

/// `B(u)w = Λ A(u) Λ^{-1} w − A(u) w`
pub fn apply_b(u: &RealField, w: &RealField, nu: FractionalOrder) -> Result<RealField> {
    let conj = lambda_pow(&apply_a(u, &lambda_pow(w, -1.0, nu)?, nu)?, 1.0, nu)?;
    conj.sub(&apply_a(u, w, nu)?)
}

pub fn apply_f_with(u: &RealField, nu: FractionalOrder, policy: Products) -> Result<RealField> {
    lambda_pow(&derivative(&product(u, u, policy)?)?, -2.0 * nu.0, nu)
}

/// `f(u) = Λ^{-2ν}∂x(u²)`
pub fn apply_f(u: &RealField, nu: FractionalOrder) -> Result<RealField> {
    apply_f_with(u, nu, Products::Dealiased)
}
