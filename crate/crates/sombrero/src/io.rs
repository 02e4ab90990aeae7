//! On-disk formats: binary field snapshots and delimited-text series.
//!
//! # Snapshot layout (`.somb`)
//!
//! | bytes | field |
//! |-------|-------|
//! | 5     | magic `"SOMB1"` |
//! | 1     | endianness marker `0x4C` ('L'; all numbers little-endian) |
//! | 1     | representation: 0 position, 1 momentum |
//! | 1     | component count (always 2) |
//! | 4     | `nx` (u32) |
//! | 4     | `ny` (u32) |
//! | 8     | `lx` (f64) |
//! | 8     | `ly` (f64) |
//! | 8     | `tau` (f64) |
//!
//! followed by `components * nx * ny` complex values as `(re, im)` f64
//! pairs, component-major, row-major with the first grid axis slowest:
//! `(ix, iy)` order for position data, `(kx, ky)` FFT order for momentum
//! data. Reads are strict: any mismatch is an error, never a crash.
//!
//! # Series layout (`.tsv`)
//!
//! Tab-separated text with one fixed header row; floats carry 17
//! significant digits so a read-back reproduces the doubles exactly.

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Representation, SpinorField};
use num_complex::Complex64 as C64;
use std::io::Write;
use std::path::Path;

pub const MAGIC: &[u8; 5] = b"SOMB1";
pub const ENDIAN_MARKER: u8 = 0x4C;
const HEADER_LEN: usize = 5 + 1 + 1 + 1 + 4 + 4 + 8 + 8 + 8;

/// Serialize a field (and its timestamp) into the snapshot byte layout.
pub fn snapshot_to_bytes(field: &SpinorField, tau: f64) -> Vec<u8> {
    let grid = field.grid();
    let (nx, ny) = (grid.nx(), grid.ny());
    let mut out = Vec::with_capacity(HEADER_LEN + 2 * nx * ny * 16);
    out.extend_from_slice(MAGIC);
    out.push(ENDIAN_MARKER);
    out.push(match field.rep() {
        Representation::Position => 0,
        Representation::Momentum => 1,
    });
    out.push(2);
    out.extend_from_slice(&(nx as u32).to_le_bytes());
    out.extend_from_slice(&(ny as u32).to_le_bytes());
    out.extend_from_slice(&grid.lx().to_le_bytes());
    out.extend_from_slice(&grid.ly().to_le_bytes());
    out.extend_from_slice(&tau.to_le_bytes());
    let push_component = |out: &mut Vec<u8>, data: &[C64]| match field.rep() {
        Representation::Position => {
            for z in data {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        Representation::Momentum => {
            // Internal momentum layout is ky-major; the file stores kx-major.
            for kx in 0..nx {
                for ky in 0..ny {
                    let z = data[grid.mom_index(kx, ky)];
                    out.extend_from_slice(&z.re.to_le_bytes());
                    out.extend_from_slice(&z.im.to_le_bytes());
                }
            }
        }
    };
    push_component(&mut out, field.c1());
    push_component(&mut out, field.c2());
    out
}

/// Strict parse of the snapshot byte layout.
pub fn snapshot_from_bytes(bytes: &[u8]) -> Result<(SpinorField, f64)> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::SnapshotFormat(format!(
            "header truncated: {} bytes, need {HEADER_LEN}",
            bytes.len()
        )));
    }
    if &bytes[0..5] != MAGIC {
        return Err(Error::SnapshotFormat(format!(
            "bad magic {:02x?}, expected {:02x?}",
            &bytes[0..5],
            MAGIC
        )));
    }
    if bytes[5] != ENDIAN_MARKER {
        return Err(Error::SnapshotFormat(format!(
            "bad endianness marker 0x{:02x}, expected 0x{ENDIAN_MARKER:02x}",
            bytes[5]
        )));
    }
    let rep = match bytes[6] {
        0 => Representation::Position,
        1 => Representation::Momentum,
        other => {
            return Err(Error::SnapshotFormat(format!(
                "unknown representation tag {other}"
            )))
        }
    };
    let ncomp = bytes[7];
    if ncomp != 2 {
        return Err(Error::SnapshotFormat(format!(
            "unsupported component count {ncomp}"
        )));
    }
    let rd_u32 = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let rd_f64 = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let nx = rd_u32(8) as usize;
    let ny = rd_u32(12) as usize;
    let lx = rd_f64(16);
    let ly = rd_f64(24);
    let tau = rd_f64(32);
    // Guard the multiplication before allocating anything.
    let n = nx
        .checked_mul(ny)
        .and_then(|n| n.checked_mul(2 * 16))
        .ok_or_else(|| Error::SnapshotFormat(format!("implausible grid {nx}x{ny}")))?;
    let expected = HEADER_LEN + n;
    if bytes.len() != expected {
        return Err(Error::SnapshotFormat(format!(
            "payload length mismatch: expected {expected} bytes, got {}",
            bytes.len()
        )));
    }
    let grid = GridSpec::new(nx, ny, lx, ly)
        .map_err(|e| Error::SnapshotFormat(format!("invalid grid in header: {e}")))?;
    let mut field = SpinorField::zeros(grid, rep);
    {
        let (c1, c2) = field.components_mut();
        let mut offset = HEADER_LEN;
        for comp in [c1, c2] {
            match rep {
                Representation::Position => {
                    for z in comp.iter_mut() {
                        *z = C64::new(rd_f64(offset), rd_f64(offset + 8));
                        offset += 16;
                    }
                }
                Representation::Momentum => {
                    for kx in 0..nx {
                        for ky in 0..ny {
                            comp[grid.mom_index(kx, ky)] =
                                C64::new(rd_f64(offset), rd_f64(offset + 8));
                            offset += 16;
                        }
                    }
                }
            }
        }
    }
    Ok((field, tau))
}

pub fn write_snapshot(field: &SpinorField, tau: f64, path: &Path) -> Result<()> {
    let bytes = snapshot_to_bytes(field, tau);
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(SpinorField, f64)> {
    let bytes = std::fs::read(path)?;
    snapshot_from_bytes(&bytes)
}

/// One sample row of the canonical observable series. Quantities that a
/// given run does not produce (e.g. spinor observables of a scalar run)
/// hold NaN.
#[derive(Debug, Clone)]
pub struct SeriesRow {
    pub tau: f64,
    pub p1: f64,
    pub p2: f64,
    pub u: f64,
    pub v: f64,
    pub w: f64,
    pub r: f64,
    pub gamma_wrapped: f64,
    pub gamma_unwrapped: f64,
    pub n_x: f64,
    pub n_y: f64,
    pub norm: f64,
    pub energy: f64,
    pub flags: String,
}

pub const SERIES_COLUMNS: [&str; 14] = [
    "tau",
    "P1",
    "P2",
    "u",
    "v",
    "w",
    "r",
    "gamma_wrapped",
    "gamma_unwrapped",
    "n_x",
    "n_y",
    "norm",
    "energy",
    "flags",
];

impl SeriesRow {
    fn values(&self) -> [f64; 13] {
        [
            self.tau,
            self.p1,
            self.p2,
            self.u,
            self.v,
            self.w,
            self.r,
            self.gamma_wrapped,
            self.gamma_unwrapped,
            self.n_x,
            self.n_y,
            self.norm,
            self.energy,
        ]
    }
}

/// Render rows as tab-separated text; tau must be strictly increasing.
pub fn series_to_string(rows: &[SeriesRow]) -> Result<String> {
    let mut s = String::with_capacity(64 + rows.len() * 320);
    s.push_str(&SERIES_COLUMNS.join("\t"));
    s.push('\n');
    let mut prev = f64::NEG_INFINITY;
    for (i, row) in rows.iter().enumerate() {
        if !(row.tau > prev) {
            return Err(Error::SeriesFormat(format!(
                "tau not strictly increasing at row {i}: {} after {prev}",
                row.tau
            )));
        }
        prev = row.tau;
        for (j, v) in row.values().iter().enumerate() {
            if j > 0 {
                s.push('\t');
            }
            s.push_str(&format!("{v:.16e}"));
        }
        s.push('\t');
        // Keep the flags cell single-token.
        s.push_str(&row.flags.replace(['\t', '\n'], ";"));
        s.push('\n');
    }
    Ok(s)
}

pub fn series_from_string(text: &str) -> Result<Vec<SeriesRow>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::SeriesFormat("empty series file".into()))?;
    let expected = SERIES_COLUMNS.join("\t");
    if header != expected {
        return Err(Error::SeriesFormat(format!(
            "unexpected header {header:?}"
        )));
    }
    let mut rows = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != SERIES_COLUMNS.len() {
            return Err(Error::SeriesFormat(format!(
                "row {i} has {} cells, expected {}",
                cells.len(),
                SERIES_COLUMNS.len()
            )));
        }
        let mut vals = [0.0f64; 13];
        for (j, v) in vals.iter_mut().enumerate() {
            *v = cells[j].parse::<f64>().map_err(|e| {
                Error::SeriesFormat(format!("row {i}, column {}: {e}", SERIES_COLUMNS[j]))
            })?;
        }
        if !(vals[0] > prev) {
            return Err(Error::SeriesFormat(format!(
                "tau not strictly increasing at row {i}"
            )));
        }
        prev = vals[0];
        rows.push(SeriesRow {
            tau: vals[0],
            p1: vals[1],
            p2: vals[2],
            u: vals[3],
            v: vals[4],
            w: vals[5],
            r: vals[6],
            gamma_wrapped: vals[7],
            gamma_unwrapped: vals[8],
            n_x: vals[9],
            n_y: vals[10],
            norm: vals[11],
            energy: vals[12],
            flags: cells[13].to_string(),
        });
    }
    Ok(rows)
}

pub fn write_series(rows: &[SeriesRow], path: &Path) -> Result<()> {
    let s = series_to_string(rows)?;
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_series(path: &Path) -> Result<Vec<SeriesRow>> {
    let text = std::fs::read_to_string(path)?;
    series_from_string(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_initial, GaussianSpec};
    use proptest::prelude::*;

    fn sample_field() -> SpinorField {
        let grid = GridSpec::square(16, 4.0).unwrap();
        make_initial(&GaussianSpec::lower_pair(0.2, -0.2, -1.0, 0.5, 0.7), &grid).unwrap()
    }

    #[test]
    fn snapshot_round_trip_bit_exact_position() {
        let f = sample_field();
        let bytes = snapshot_to_bytes(&f, 1.25);
        let (back, tau) = snapshot_from_bytes(&bytes).unwrap();
        assert_eq!(tau, 1.25);
        assert_eq!(f, back);
        // And byte-identical on rewrite.
        assert_eq!(bytes, snapshot_to_bytes(&back, tau));
    }

    #[test]
    fn snapshot_round_trip_bit_exact_momentum() {
        let f = sample_field().to_momentum().unwrap();
        let bytes = snapshot_to_bytes(&f, 0.0);
        let (back, _) = snapshot_from_bytes(&bytes).unwrap();
        assert_eq!(f, back);
    }

    #[test]
    fn snapshot_reader_rejects_corruption() {
        let f = sample_field();
        let good = snapshot_to_bytes(&f, 0.5);

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        let err = snapshot_from_bytes(&bad_magic).unwrap_err();
        assert!(err.to_string().contains("magic"), "{err}");

        let truncated = &good[..good.len() - 7];
        let err = snapshot_from_bytes(truncated).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("expected") && msg.contains("got"), "{msg}");

        let mut bad_endian = good.clone();
        bad_endian[5] = 0x42;
        assert!(snapshot_from_bytes(&bad_endian).is_err());

        let mut bad_rep = good;
        bad_rep[6] = 9;
        assert!(snapshot_from_bytes(&bad_rep).is_err());
    }

    #[test]
    fn series_round_trip_reproduces_doubles() {
        let rows: Vec<SeriesRow> = (0..20)
            .map(|i| SeriesRow {
                tau: i as f64 * 0.05,
                p1: 0.5 + (i as f64 * 0.37).sin() * 1e-3,
                p2: 0.5 - (i as f64 * 0.37).sin() * 1e-3,
                u: -1.0 / 3.0,
                v: 2.0_f64.sqrt() * 1e-17,
                w: -0.0,
                r: 1.0 - 1e-16,
                gamma_wrapped: std::f64::consts::PI,
                gamma_unwrapped: if i > 10 { f64::NAN } else { 0.0 },
                n_x: 32.5,
                n_y: 0.5,
                norm: 1.0,
                energy: -7.25e2,
                flags: if i == 3 { "edge@0.15".into() } else { "-".into() },
            })
            .collect();
        let text = series_to_string(&rows).unwrap();
        let back = series_from_string(&text).unwrap();
        assert_eq!(rows.len(), back.len());
        for (a, b) in rows.iter().zip(&back) {
            for (x, y) in a.values().iter().zip(b.values().iter()) {
                assert!(
                    x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()),
                    "{x} vs {y}"
                );
            }
            assert_eq!(a.flags, b.flags);
        }
    }

    #[test]
    fn series_requires_increasing_tau() {
        let row = |tau: f64| SeriesRow {
            tau,
            p1: 0.5,
            p2: 0.5,
            u: 0.0,
            v: 0.0,
            w: 0.0,
            r: 0.0,
            gamma_wrapped: 0.0,
            gamma_unwrapped: 0.0,
            n_x: 0.0,
            n_y: 0.0,
            norm: 1.0,
            energy: 0.0,
            flags: "-".into(),
        };
        assert!(series_to_string(&[row(0.0), row(0.0)]).is_err());
        assert!(series_to_string(&[row(0.1), row(0.2)]).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]
        #[test]
        fn fuzzed_snapshot_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
            let _ = snapshot_from_bytes(&bytes);
        }

        #[test]
        fn fuzzed_headers_on_real_payload_never_panic(
            a in 0usize..40, b in any::<u8>(),
        ) {
            let f = sample_field();
            let mut bytes = snapshot_to_bytes(&f, 0.0);
            bytes[a] = b;
            let _ = snapshot_from_bytes(&bytes);
        }

        #[test]
        fn fuzzed_series_text_never_panics(s in "\\PC*") {
            let _ = series_from_string(&s);
        }
    }
}
