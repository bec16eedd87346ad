//! Periodic grid, discrete Fourier transforms and Fourier multipliers.
//!
//! Coefficients follow the analysis convention `u(x_j) = Σ_k û_k e^{i k x_j}`, so
//! `û_0` is the mean of the samples. Spectra are stored in transform order
//! (non-negative indices `0..N/2`, then `-N/2..-1`); use [`Grid::signed_index`]
//! and [`SpectralField::coeff`] to address modes by signed index.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest N accepted by [`dft_oracle`].
pub const DFT_ORACLE_LIMIT: usize = 1024;

/// Tolerance on conjugate-symmetry defects when a real field is requested.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Uniform periodic grid on `[0, L)` with `N` points.
///
/// Cloning is cheap; transform plans are shared.
#[derive(Clone)]
pub struct Grid {
    length: f64,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Grid {
    pub fn new(length: f64, n_points: usize) -> Result<Grid> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::Parameter(format!(
                "grid length must be positive and finite, got {length}"
            )));
        }
        if n_points < 8 || !n_points.is_multiple_of(2) {
            return Err(Error::Parameter(format!(
                "grid point count must be even and >= 8, got {n_points}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Grid {
            length,
            n: n_points,
            forward: planner.plan_fft_forward(n_points),
            inverse: planner.plan_fft_inverse(n_points),
        })
    }

    /// Grid on `[0, 2π)`.
    pub fn periodic(n_points: usize) -> Result<Grid> {
        Grid::new(2.0 * PI, n_points)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.length / self.n as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Signed mode index held in storage slot `slot`.
    pub fn signed_index(&self, slot: usize) -> i64 {
        if slot < self.n / 2 {
            slot as i64
        } else {
            slot as i64 - self.n as i64
        }
    }

    /// Storage slot of signed index `j`, or `None` outside `[-N/2, N/2)`.
    pub fn slot(&self, j: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if j >= 0 && j < half {
            Some(j as usize)
        } else if j < 0 && j >= -half {
            Some((j + self.n as i64) as usize)
        } else {
            None
        }
    }

    /// Physical wavenumber `2πj/L` of signed index `j`.
    pub fn wavenumber_of(&self, j: i64) -> f64 {
        2.0 * PI * j as f64 / self.length
    }

    /// Wavenumbers in storage order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.n)
            .map(|slot| self.wavenumber_of(self.signed_index(slot)))
            .collect()
    }

    /// Wavenumbers for `j = -N/2, ..., N/2 - 1`.
    pub fn signed_wavenumbers(&self) -> Vec<f64> {
        let half = (self.n / 2) as i64;
        (-half..half).map(|j| self.wavenumber_of(j)).collect()
    }

    /// Largest resolved wavenumber magnitude `πN/L`.
    pub fn k_max(&self) -> f64 {
        self.wavenumber_of((self.n / 2) as i64)
    }

    /// Highest retained index under the 2/3 rule, `floor(2/3 · N/2)`.
    pub fn dealias_cutoff(&self) -> usize {
        self.n / 3
    }

    pub(crate) fn nyquist_slot(&self) -> usize {
        self.n / 2
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "({}, {}) vs ({}, {})",
                self.length, self.n, other.length, other.n
            )))
        }
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Grid) -> bool {
        self.n == other.n && self.length.to_bits() == other.length.to_bits()
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("length", &self.length)
            .field("n_points", &self.n)
            .finish()
    }
}

impl Serialize for Grid {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Grid", 2)?;
        s.serialize_field("L", &self.length)?;
        s.serialize_field("N", &self.n)?;
        s.end()
    }
}

fn first_non_finite(values: &[f64]) -> Option<usize> {
    values.iter().position(|v| !v.is_finite())
}

/// Samples `u(x_j)` of a real function on a [`Grid`]. Always finite.
#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    grid: Grid,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<RealField> {
        if values.len() != grid.n {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.n
            )));
        }
        if let Some(i) = first_non_finite(&values) {
            return Err(Error::blow_up(i));
        }
        Ok(RealField { grid, values })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Result<RealField> {
        let values = grid.points().into_iter().map(f).collect();
        RealField::new(grid.clone(), values)
    }

    pub fn zeros(grid: &Grid) -> RealField {
        RealField {
            grid: grid.clone(),
            values: vec![0.0; grid.n],
        }
    }

    pub fn constant(grid: &Grid, c: f64) -> Result<RealField> {
        RealField::new(grid.clone(), vec![c; grid.n])
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn zip_with(&self, other: &RealField, op: impl Fn(f64, f64) -> f64) -> Result<RealField> {
        self.grid.check_same(&other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| op(a, b))
            .collect();
        RealField::new(self.grid.clone(), values)
    }

    pub fn add(&self, other: &RealField) -> Result<RealField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &RealField) -> Result<RealField> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Pointwise product (no dealiasing).
    pub fn mul(&self, other: &RealField) -> Result<RealField> {
        self.zip_with(other, |a, b| a * b)
    }

    /// `self + alpha * other`
    pub fn axpy(&self, alpha: f64, other: &RealField) -> Result<RealField> {
        self.zip_with(other, |a, b| a + alpha * b)
    }

    pub fn scale(&self, alpha: f64) -> Result<RealField> {
        RealField::new(
            self.grid.clone(),
            self.values.iter().map(|v| alpha * v).collect(),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Smallest value and its index.
    pub fn min_with_index(&self) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for (i, &v) in self.values.iter().enumerate() {
            if v < best.0 {
                best = (v, i);
            }
        }
        best
    }
}

/// Fourier coefficients of a field, stored in transform order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: Grid, coeffs: Vec<Complex64>) -> Result<SpectralField> {
        if coeffs.len() != grid.n {
            return Err(Error::GridMismatch(format!(
                "{} coefficients for a grid of {} points",
                coeffs.len(),
                grid.n
            )));
        }
        Ok(SpectralField { grid, coeffs })
    }

    pub fn zeros(grid: &Grid) -> SpectralField {
        SpectralField {
            grid: grid.clone(),
            coeffs: vec![Complex64::new(0.0, 0.0); grid.n],
        }
    }

    /// Builds a spectrum from a function of the signed index.
    pub fn from_signed(grid: &Grid, f: impl Fn(i64) -> Complex64) -> SpectralField {
        let coeffs = (0..grid.n).map(|slot| f(grid.signed_index(slot))).collect();
        SpectralField {
            grid: grid.clone(),
            coeffs,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient of signed index `j`; zero outside `[-N/2, N/2)`.
    pub fn coeff(&self, j: i64) -> Complex64 {
        self.grid
            .slot(j)
            .map(|s| self.coeffs[s])
            .unwrap_or_default()
    }

    pub fn set_coeff(&mut self, j: i64, value: Complex64) -> Result<()> {
        let slot = self
            .grid
            .slot(j)
            .ok_or_else(|| Error::Parameter(format!("mode index {j} outside the grid")))?;
        self.coeffs[slot] = value;
        Ok(())
    }

    /// Largest defect `|û_{-j} - conj(û_j)|` and where it occurs. The Nyquist
    /// mode is its own partner, so its imaginary part counts as a defect.
    pub fn symmetry_defect(&self) -> (i64, f64) {
        let n = self.grid.n;
        let mut worst = (0i64, 0.0f64);
        for slot in 0..n {
            let partner = (n - slot) % n;
            let d = (self.coeffs[partner] - self.coeffs[slot].conj()).norm();
            if d > worst.1 {
                worst = (self.grid.signed_index(slot), d);
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.grid.check_same(&other.grid)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(SpectralField {
            grid: self.grid.clone(),
            coeffs,
        })
    }
}

/// Forward transform with coefficients scaled by `1/N`.
pub(crate) fn forward_raw(grid: &Grid, values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    grid.forward.process(&mut buf);
    let scale = 1.0 / grid.n as f64;
    for c in &mut buf {
        *c *= scale;
    }
    buf
}

/// Inverse transform keeping only the real part; no symmetry check.
pub(crate) fn inverse_raw(grid: &Grid, mut coeffs: Vec<Complex64>) -> Result<RealField> {
    grid.inverse.process(&mut coeffs);
    let values: Vec<f64> = coeffs.into_iter().map(|c| c.re).collect();
    RealField::new(grid.clone(), values)
}

pub fn forward_transform(u: &RealField) -> Result<SpectralField> {
    if let Some(i) = first_non_finite(&u.values) {
        return Err(Error::blow_up(i));
    }
    Ok(SpectralField {
        grid: u.grid.clone(),
        coeffs: forward_raw(&u.grid, &u.values),
    })
}

/// Inverse transform to a real field. The spectrum must be conjugate-symmetric
/// to within [`SYMMETRY_TOL`] relative to its largest coefficient.
pub fn inverse_transform(u_hat: &SpectralField) -> Result<RealField> {
    let (index, defect) = u_hat.symmetry_defect();
    if defect > SYMMETRY_TOL * u_hat.max_abs().max(1.0) {
        return Err(Error::Symmetry { index, defect });
    }
    inverse_raw(&u_hat.grid, u_hat.coeffs.clone())
}

/// Inverse transform without the real-data assumption.
pub fn inverse_transform_complex(u_hat: &SpectralField) -> Vec<Complex64> {
    let mut buf = u_hat.coeffs.clone();
    u_hat.grid.inverse.process(&mut buf);
    buf
}

/// Direct `O(N²)` summation with the same normalization as
/// [`forward_transform`]. Used as an independent reference.
pub fn dft_oracle(u: &RealField) -> Result<SpectralField> {
    let n = u.grid.n;
    if n > DFT_ORACLE_LIMIT {
        return Err(Error::OracleTooLarge {
            n,
            limit: DFT_ORACLE_LIMIT,
        });
    }
    let coeffs = (0..n)
        .map(|slot| {
            let m = slot as u64;
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &v) in u.values.iter().enumerate() {
                // reduce the phase exactly before converting to an angle
                let r = (j as u64 * m) % n as u64;
                let theta = -2.0 * PI * r as f64 / n as f64;
                acc += v * Complex64::from_polar(1.0, theta);
            }
            acc / n as f64
        })
        .collect();
    Ok(SpectralField {
        grid: u.grid.clone(),
        coeffs,
    })
}

/// Symbol values in storage order. The Nyquist slot uses the even part
/// `(m(k_N) + m(-k_N))/2` so real data stays real under odd symbols.
pub(crate) fn symbol_table<S, F>(grid: &Grid, m: F) -> Result<Vec<Complex64>>
where
    F: Fn(f64) -> S,
    S: Into<Complex64>,
{
    let nyq = grid.nyquist_slot();
    (0..grid.n)
        .map(|slot| {
            let k = grid.wavenumber_of(grid.signed_index(slot));
            let v: Complex64 = if slot == nyq {
                (m(k).into() + m(-k).into()) * 0.5
            } else {
                m(k).into()
            };
            if v.re.is_finite() && v.im.is_finite() {
                Ok(v)
            } else {
                Err(Error::Symbol { k })
            }
        })
        .collect()
}

/// Multiplies each coefficient by `m(k)` at its physical wavenumber.
pub fn apply_symbol<S, F>(u_hat: &SpectralField, m: F) -> Result<SpectralField>
where
    F: Fn(f64) -> S,
    S: Into<Complex64>,
{
    let table = symbol_table(&u_hat.grid, m)?;
    let coeffs = u_hat
        .coeffs
        .iter()
        .zip(&table)
        .map(|(c, s)| c * s)
        .collect();
    Ok(SpectralField {
        grid: u_hat.grid.clone(),
        coeffs,
    })
}

pub(crate) fn dealias_in_place(grid: &Grid, coeffs: &mut [Complex64]) {
    let cutoff = grid.dealias_cutoff() as i64;
    for (slot, c) in coeffs.iter_mut().enumerate() {
        if grid.signed_index(slot).abs() > cutoff {
            *c = Complex64::new(0.0, 0.0);
        }
    }
}

/// 2/3-rule truncation: zero every mode with `|j| > floor(N/3)`.
pub fn dealias(u_hat: &SpectralField) -> SpectralField {
    let mut out = u_hat.clone();
    dealias_in_place(&out.grid, &mut out.coeffs);
    out
}

pub(crate) fn sobolev_norm_coeffs(grid: &Grid, coeffs: &[Complex64], s: f64) -> f64 {
    let sum: f64 = coeffs
        .iter()
        .enumerate()
        .map(|(slot, c)| {
            let k = grid.wavenumber_of(grid.signed_index(slot));
            (1.0 + k * k).powf(s) * c.norm_sqr()
        })
        .sum();
    (grid.length * sum).sqrt()
}

/// `(L Σ_k (1+k²)^s |û_k|²)^{1/2}`
pub fn sobolev_norm_spectral(u_hat: &SpectralField, s: f64) -> f64 {
    sobolev_norm_coeffs(&u_hat.grid, &u_hat.coeffs, s)
}

/// H^s norm with the Bessel weight `(1+k²)^{s/2}`.
pub fn sobolev_norm(u: &RealField, s: f64) -> f64 {
    sobolev_norm_coeffs(&u.grid, &forward_raw(&u.grid, &u.values), s)
}

/// Discrete L² inner product `(L/N) Σ_j u_j v_j`.
pub fn l2_inner(u: &RealField, v: &RealField) -> Result<f64> {
    u.grid.check_same(&v.grid)?;
    let sum: f64 = u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum();
    Ok(sum * u.grid.dx())
}
