//! FFT-based operators against dense matrices built from the direct DFT.

mod common;

use common::dense::Dense;
use common::{max_diff, random_field, rng};
use fracwave::operators::{
    apply_a, apply_b, apply_f, commutator_apply, derivative, fractional_laplacian, lambda_pow,
};
use fracwave::spectral::{dft_oracle, forward_transform};
use fracwave::{FractionalOrder, Grid, RealField};

const SIZES: [usize; 3] = [16, 32, 64];
const ORDERS: [f64; 3] = [1.0, 1.5, 2.0];

/// Error relative to the size of the reference.
fn rel(fast: &RealField, dense: &RealField) -> f64 {
    max_diff(fast, dense) / dense.max_abs().max(1.0)
}

#[test]
fn fft_matches_direct_dft() {
    let mut r = rng(1);
    for n in [8, 16, 64, 100] {
        let grid = Grid::new(3.7, n).unwrap();
        let u = random_field(&grid, &mut r);
        let a = forward_transform(&u).unwrap();
        let b = dft_oracle(&u).unwrap();
        let err = a
            .coeffs()
            .iter()
            .zip(b.coeffs())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-13, "N={n}: {err}");
    }
}

#[test]
fn linear_multipliers_match_dense() {
    let mut r = rng(2);
    for n in SIZES {
        let grid = Grid::periodic(n).unwrap();
        let dense = Dense::new(&grid);
        let v = random_field(&grid, &mut r);
        let d = rel(&derivative(&v).unwrap(), &dense.apply(&dense.derivative(), &v));
        assert!(d < 1e-9, "derivative N={n}: {d}");
        for nu in ORDERS {
            let nu = FractionalOrder::new(nu).unwrap();
            let l = rel(
                &fractional_laplacian(&v, nu).unwrap(),
                &dense.apply(&dense.laplacian(nu), &v),
            );
            assert!(l < 1e-9, "L N={n} nu={}: {l}", nu.value());
            for p in [-2.0 * nu.value(), -1.0, 1.0] {
                let e = rel(&lambda_pow(&v, p, nu).unwrap(), &dense.apply(&dense.lambda(p, nu), &v));
                assert!(e < 1e-9, "Λ^{p} N={n} nu={}: {e}", nu.value());
            }
        }
    }
}

#[test]
fn nonlinear_operators_match_dense() {
    let mut r = rng(3);
    for n in SIZES {
        let grid = Grid::periodic(n).unwrap();
        let dense = Dense::new(&grid);
        for nu in ORDERS {
            let nu = FractionalOrder::new(nu).unwrap();
            let u = random_field(&grid, &mut r);
            let w = random_field(&grid, &mut r);
            let checks = [
                ("commutator", commutator_apply(&u, &w, nu).unwrap(), dense.apply(&dense.commutator(&u, nu), &w)),
                ("A", apply_a(&u, &w, nu).unwrap(), dense.apply(&dense.a(&u, nu), &w)),
                ("B", apply_b(&u, &w, nu).unwrap(), dense.apply(&dense.b(&u, nu), &w)),
                ("f", apply_f(&u, nu).unwrap(), dense.apply(&dense.f(&u, nu), &u)),
            ];
            for (name, fast, slow) in checks {
                let e = rel(&fast, &slow);
                assert!(e < 1e-9, "{name} N={n} nu={}: {e}", nu.value());
            }
        }
    }
}

#[test]
#[should_panic(expected = "dense oracle refused")]
fn dense_oracle_is_limited_to_small_grids() {
    Dense::new(&Grid::periodic(256).unwrap());
}
