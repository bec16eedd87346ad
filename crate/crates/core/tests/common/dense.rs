//! Dense N×N operator oracles assembled from the direct DFT.
//!
//! Every spectral multiplier becomes `F⁻¹ diag(m) F` where the columns of `F`
//! come from `dft_oracle` applied to unit vectors. The Nyquist slot uses the
//! even part of the symbol, matching the library convention.

use fracwave::operators::{lambda_symbol, laplacian_symbol};
use fracwave::spectral::dft_oracle;
use fracwave::{FractionalOrder, Grid, RealField};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub const DENSE_LIMIT: usize = 128;

pub struct Dense {
    grid: Grid,
    forward: DMatrix<Complex64>,
    inverse: DMatrix<Complex64>,
}

impl Dense {
    pub fn new(grid: &Grid) -> Dense {
        let n = grid.n_points();
        assert!(n <= DENSE_LIMIT, "dense oracle refused for N={n}");
        let mut forward = DMatrix::zeros(n, n);
        for col in 0..n {
            let mut e = vec![0.0; n];
            e[col] = 1.0;
            let uh = dft_oracle(&RealField::new(grid.clone(), e).unwrap()).unwrap();
            for (row, c) in uh.coeffs().iter().enumerate() {
                forward[(row, col)] = *c;
            }
        }
        // u_j = Σ_k û_k e^{ik x_j}, so F⁻¹ = N·Fᴴ
        let inverse = forward.adjoint() * Complex64::new(n as f64, 0.0);
        Dense {
            grid: grid.clone(),
            forward,
            inverse,
        }
    }

    fn multiplier(&self, m: impl Fn(f64) -> Complex64) -> DMatrix<f64> {
        let n = self.grid.n_points();
        let diag = DVector::from_iterator(
            n,
            (0..n).map(|slot| {
                let j = self.grid.signed_index(slot);
                let k = self.grid.wavenumber_of(j);
                if 2 * j.unsigned_abs() as usize == n {
                    0.5 * (m(k) + m(-k))
                } else {
                    m(k)
                }
            }),
        );
        let op = &self.inverse * DMatrix::from_diagonal(&diag) * &self.forward;
        op.map(|z| z.re)
    }

    pub fn derivative(&self) -> DMatrix<f64> {
        self.multiplier(|k| Complex64::new(0.0, k))
    }

    pub fn laplacian(&self, nu: FractionalOrder) -> DMatrix<f64> {
        self.multiplier(|k| laplacian_symbol(k, nu).into())
    }

    pub fn lambda(&self, p: f64, nu: FractionalOrder) -> DMatrix<f64> {
        self.multiplier(|k| lambda_symbol(k, p, nu).into())
    }

    pub fn dealias(&self) -> DMatrix<f64> {
        let cutoff = self.grid.dealias_cutoff() as f64;
        let dk = std::f64::consts::TAU / self.grid.length();
        self.multiplier(|k| if (k / dk).round().abs() <= cutoff { 1.0.into() } else { 0.0.into() })
    }

    /// Dealiased multiplication by `u`.
    pub fn times(&self, u: &RealField) -> DMatrix<f64> {
        self.dealias() * DMatrix::from_diagonal(&DVector::from_column_slice(u.values()))
    }

    /// `w ↦ [u, L]w`
    pub fn commutator(&self, u: &RealField, nu: FractionalOrder) -> DMatrix<f64> {
        let l = self.laplacian(nu);
        let m = self.times(u);
        &m * &l - &l * &m
    }

    /// `z ↦ A(u)z`
    pub fn a(&self, u: &RealField, nu: FractionalOrder) -> DMatrix<f64> {
        let d = self.derivative();
        let inv = self.lambda(-2.0 * nu.value(), nu);
        &d + self.times(u) * &d + inv * self.commutator(u, nu) * &d
    }

    /// `w ↦ B(u)w`
    pub fn b(&self, u: &RealField, nu: FractionalOrder) -> DMatrix<f64> {
        let a = self.a(u, nu);
        self.lambda(1.0, nu) * &a * self.lambda(-1.0, nu) - a
    }

    /// `f(u) = Λ^{-2ν} ∂x P(u²)`, as the dense map applied to `u`.
    pub fn f(&self, u: &RealField, nu: FractionalOrder) -> DMatrix<f64> {
        self.lambda(-2.0 * nu.value(), nu) * self.derivative() * self.times(u)
    }

    pub fn apply(&self, m: &DMatrix<f64>, v: &RealField) -> RealField {
        let out = m * DVector::from_column_slice(v.values());
        RealField::new(self.grid.clone(), out.as_slice().to_vec()).unwrap()
    }
}
