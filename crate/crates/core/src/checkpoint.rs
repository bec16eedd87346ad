//! Binary checkpoints for bit-exact resume.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "FWCK" | version: u32 | L: f64 | N: u64 | t: f64 | step_count: u64
//!        | history_len: u64 | history_len × (t: f64, min_slope: f64)
//!        | N × u: f64 | crc32: u32
//! ```
//!
//! The CRC32 covers every byte before it.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::{Grid, RealField};
use crate::timestepper::SimulationState;

pub const MAGIC: &[u8; 4] = b"FWCK";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode(state: &SimulationState) -> Vec<u8> {
    let grid = state.u.grid();
    let n = grid.n_points();
    let mut buf = Vec::with_capacity(48 + 16 * state.min_slope_history.len() + 8 * n);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&grid.length().to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&state.t.to_le_bytes());
    buf.extend_from_slice(&state.step_count.to_le_bytes());
    buf.extend_from_slice(&(state.min_slope_history.len() as u64).to_le_bytes());
    for (t, m) in &state.min_slope_history {
        buf.extend_from_slice(&t.to_le_bytes());
        buf.extend_from_slice(&m.to_le_bytes());
    }
    for v in state.u.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const W: usize>(&mut self) -> Result<[u8; W]> {
        let end = self.pos + W;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Checkpoint("truncated payload".into()))?;
        self.pos = end;
        Ok(chunk.try_into().expect("slice has width W"))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn decode(bytes: &[u8]) -> Result<SimulationState> {
    if bytes.len() < 12 {
        return Err(Error::Checkpoint(format!(
            "checksum failure: file too short ({} bytes)",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let actual = crc32fast::hash(body);
    if stored != actual {
        return Err(Error::Checkpoint(format!(
            "checksum failure: stored {stored:08x}, computed {actual:08x}"
        )));
    }

    let mut r = Reader {
        bytes: body,
        pos: 8,
    };
    let length = r.f64()?;
    let n = r.u64()? as usize;
    let t = r.f64()?;
    let step_count = r.u64()?;
    let hist_len = r.u64()? as usize;
    let needed = hist_len
        .checked_mul(16)
        .and_then(|h| n.checked_mul(8).map(|v| h + v))
        .ok_or_else(|| Error::Checkpoint("corrupt length fields".into()))?;
    if body.len() - r.pos != needed {
        return Err(Error::Checkpoint("payload length does not match header".into()));
    }
    let mut history = Vec::with_capacity(hist_len);
    for _ in 0..hist_len {
        history.push((r.f64()?, r.f64()?));
    }
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(r.f64()?);
    }
    let grid = Grid::new(length, n)?;
    Ok(SimulationState {
        t,
        u: RealField::new(grid, values)?,
        step_count,
        min_slope_history: history,
    })
}

/// Writes through a temporary file and renames it into place.
pub fn checkpoint_write(state: &SimulationState, path: &Path) -> Result<()> {
    let tmp = path.with_extension("fwck.tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&encode(state))?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn checkpoint_read(path: &Path) -> Result<SimulationState> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(values: Vec<f64>, t: f64, steps: u64, hist: Vec<(f64, f64)>) -> SimulationState {
        let n = values.len();
        SimulationState {
            t,
            u: RealField::new(Grid::new(3.7, n).unwrap(), values).unwrap(),
            step_count: steps,
            min_slope_history: hist,
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            values in prop::collection::vec(-1e6f64..1e6, 16),
            t in 0.0f64..100.0,
            steps in any::<u64>(),
            hist in prop::collection::vec((0.0f64..10.0, -1e3f64..0.0), 0..20),
        ) {
            let s = state(values, t, steps, hist);
            let back = decode(&encode(&s)).unwrap();
            prop_assert_eq!(back.t.to_bits(), s.t.to_bits());
            prop_assert_eq!(back.step_count, s.step_count);
            let a: Vec<u64> = back.u.values().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = s.u.values().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
            prop_assert_eq!(back, s);
        }
    }

    #[test]
    fn truncation_is_a_checksum_error() {
        let s = state(vec![0.5; 8], 1.0, 3, vec![(0.5, -1.0)]);
        let bytes = encode(&s);
        for cut in [bytes.len() - 1, bytes.len() - 9, 20, 11] {
            match decode(&bytes[..cut]) {
                Err(Error::Checkpoint(m)) => assert!(m.contains("checksum"), "{m}"),
                other => panic!("cut {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn corruption_and_version() {
        let s = state(vec![0.25; 8], 2.0, 1, vec![]);
        let mut bytes = encode(&s);
        bytes[30] ^= 0x40;
        assert!(matches!(decode(&bytes), Err(Error::Checkpoint(m)) if m.contains("checksum")));
        let mut bytes = encode(&s);
        bytes[4] = 9;
        assert!(matches!(decode(&bytes), Err(Error::Checkpoint(m)) if m.contains("version")));
        let mut bytes = encode(&s);
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes), Err(Error::Checkpoint(m)) if m.contains("magic")));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.fwck");
        let s = state((0..8).map(|i| i as f64 * 0.1).collect(), 0.75, 12, vec![(0.1, -2.0)]);
        checkpoint_write(&s, &path).unwrap();
        assert_eq!(checkpoint_read(&path).unwrap(), s);
        assert!(checkpoint_read(&dir.path().join("missing.fwck")).is_err());
    }
}
