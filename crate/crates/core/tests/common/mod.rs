#![allow(dead_code)]

pub mod dense;

use fracwave::{Grid, RealField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform values in [-1, 1] at every grid point (full spectrum, aliasing included).
pub fn random_field(grid: &Grid, rng: &mut ChaCha8Rng) -> RealField {
    let values = (0..grid.n_points()).map(|_| rng.random_range(-1.0..=1.0)).collect();
    RealField::new(grid.clone(), values).unwrap()
}

pub fn max_diff(a: &RealField, b: &RealField) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Prints and records one acceptance line.
pub struct Ledger {
    lines: Vec<(String, bool)>,
}

impl Ledger {
    pub fn new() -> Ledger {
        Ledger { lines: Vec::new() }
    }

    pub fn check(&mut self, name: &str, ok: bool, detail: impl AsRef<str>) {
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("{tag} {name}: {}", detail.as_ref());
        self.lines.push((name.to_string(), ok));
    }

    pub fn note(&self, name: &str, detail: impl AsRef<str>) {
        println!("NOTE {name}: {}", detail.as_ref());
    }

    pub fn finish(self) {
        let failed: Vec<_> = self.lines.iter().filter(|(_, ok)| !ok).map(|(n, _)| n.clone()).collect();
        assert!(failed.is_empty(), "failed: {failed:?}");
    }
}
