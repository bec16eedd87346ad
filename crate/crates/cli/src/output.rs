//! Snapshot CSV files and JSON writing.

use std::fs;
use std::path::Path;

use fracwave::{Grid, RealField};
use serde::Serialize;

/// `x,u` rows with 17 significant digits, enough to round-trip every f64.
pub fn write_snapshot(path: &Path, u: &RealField) -> Result<(), String> {
    let mut w = csv::Writer::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let io = |e: csv::Error| format!("{}: {e}", path.display());
    w.write_record(["x", "u"]).map_err(io)?;
    for (j, v) in u.values().iter().enumerate() {
        w.write_record([format!("{:.16e}", u.grid().x(j)), format!("{v:.16e}")])
            .map_err(io)?;
    }
    w.flush().map_err(|e| format!("{}: {e}", path.display()))
}

/// Reads a snapshot written by [`write_snapshot`] onto `grid`; the abscissae
/// must match the grid points.
pub fn read_snapshot(path: &Path, grid: &Grid) -> Result<RealField, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let headers = r.headers().map_err(|e| format!("{}: {e}", path.display()))?;
    if headers != vec!["x", "u"] {
        return Err(format!("{}: expected header `x,u`", path.display()));
    }
    let tol = 1e-12 * grid.length();
    let mut values = Vec::with_capacity(grid.n_points());
    for (j, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
        let num = |i: usize| -> Result<f64, String> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| format!("{}: row {}: bad number", path.display(), j + 2))
        };
        let x = num(0)?;
        if j >= grid.n_points() || (x - grid.x(j)).abs() > tol {
            return Err(format!(
                "{}: row {} does not match the configured grid (L={}, N={})",
                path.display(),
                j + 2,
                grid.length(),
                grid.n_points()
            ));
        }
        values.push(num(1)?);
    }
    if values.len() != grid.n_points() {
        return Err(format!(
            "{}: {} rows for a grid of N={}",
            path.display(),
            values.len(),
            grid.n_points()
        ));
    }
    RealField::new(grid.clone(), values).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    fs::write(path, text + "\n").map_err(|e| format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::new(3.3, 16).unwrap();
        let u = RealField::from_fn(&grid, |x| (x * 1.7).sin() / 3.0 + 1e-300).unwrap();
        let path = dir.path().join("s.csv");
        write_snapshot(&path, &u).unwrap();
        let back = read_snapshot(&path, &grid).unwrap();
        assert_eq!(back, u);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x,u\n"));
        assert!(read_snapshot(&path, &Grid::new(3.3, 32).unwrap()).is_err());
        assert!(read_snapshot(&path, &Grid::new(3.0, 16).unwrap()).is_err());
    }
}
