//! Binary snapshot files.
//!
//! Layout: magic "MHDC", format version u32, header (N as u64; L, time, nu,
//! eta, R0, T, Re, Rm, S, M as f64), then seven N^3 arrays in x-fastest
//! order (u1, u2, u3, b1, b2, b3, p), all little-endian, closed by a CRC64
//! of every byte after the version word. A JSON sidecar duplicates the
//! header so shell tooling can inspect runs without parsing the binary.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::params::PhysParams;
use crate::series::Snapshot;

const MAGIC: &[u8; 4] = b"MHDC";
const VERSION: u32 = 1;

/// CRC-64/ECMA-182: poly 0x42F0E1EBA9EA3693, no reflection, zero init.
const CRC64_POLY: u64 = 0x42F0_E1EB_A9EA_3693;

fn crc64_table() -> &'static [u64; 256] {
    static TABLE: OnceLock<[u64; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [0u64; 256];
        for (i, slot) in table.iter_mut().enumerate() {
            let mut c = (i as u64) << 56;
            for _ in 0..8 {
                c = if c & (1 << 63) != 0 { (c << 1) ^ CRC64_POLY } else { c << 1 };
            }
            *slot = c;
        }
        table
    })
}

#[derive(Default, Clone, Copy)]
struct Crc64(u64);

impl Crc64 {
    fn update(&mut self, bytes: &[u8]) {
        let table = crc64_table();
        for &b in bytes {
            self.0 = table[(((self.0 >> 56) as u8) ^ b) as usize] ^ (self.0 << 8);
        }
    }

    fn value(self) -> u64 {
        self.0
    }
}

/// Header fields duplicated into the JSON sidecar.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub schema: String,
    pub version: u32,
    pub n: u64,
    pub l: f64,
    pub time: f64,
    pub nu: f64,
    pub eta: f64,
    pub r0: f64,
    pub t_horizon: f64,
    pub re: f64,
    pub rm: f64,
    pub coupling: f64,
    pub hartmann: f64,
}

struct CrcWriter<W: Write> {
    inner: W,
    crc: Crc64,
}

impl<W: Write> CrcWriter<W> {
    fn write_all_crc(&mut self, bytes: &[u8]) -> std::io::Result<()> {
        self.crc.update(bytes);
        self.inner.write_all(bytes)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format { path: path.to_path_buf(), reason: reason.into() }
}

/// Write one time slice plus its JSON sidecar (`<path>.json`).
pub fn write_snapshot(path: &Path, snap: &Snapshot, params: &PhysParams) -> Result<()> {
    let grid = snap.u.grid();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = CrcWriter { inner: BufWriter::new(file), crc: Crc64::default() };

    w.inner.write_all(MAGIC).map_err(|e| io_err(path, e))?;
    w.inner.write_all(&VERSION.to_le_bytes()).map_err(|e| io_err(path, e))?;

    w.write_all_crc(&(grid.n() as u64).to_le_bytes()).map_err(|e| io_err(path, e))?;
    let header = [
        grid.l(),
        snap.time,
        params.nu,
        params.eta,
        params.r0,
        params.t_horizon,
        params.re,
        params.rm,
        params.coupling(),
        params.m,
    ];
    for v in header {
        w.write_all_crc(&v.to_le_bytes()).map_err(|e| io_err(path, e))?;
    }

    let arrays: [&[f64]; 7] = [
        snap.u.comp(0),
        snap.u.comp(1),
        snap.u.comp(2),
        snap.b.comp(0),
        snap.b.comp(1),
        snap.b.comp(2),
        snap.p.data(),
    ];
    let mut buf = Vec::with_capacity(8 * 8192);
    for arr in arrays {
        for chunk in arr.chunks(8192) {
            buf.clear();
            for v in chunk {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all_crc(&buf).map_err(|e| io_err(path, e))?;
        }
    }

    let crc = w.crc.value();
    w.inner.write_all(&crc.to_le_bytes()).map_err(|e| io_err(path, e))?;
    w.inner.flush().map_err(|e| io_err(path, e))?;

    let sidecar = SnapshotHeader {
        schema: "mhdc-snapshot".into(),
        version: VERSION,
        n: grid.n() as u64,
        l: grid.l(),
        time: snap.time,
        nu: params.nu,
        eta: params.eta,
        r0: params.r0,
        t_horizon: params.t_horizon,
        re: params.re,
        rm: params.rm,
        coupling: params.coupling(),
        hartmann: params.m,
    };
    let sidecar_path = sidecar_path(path);
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| format_err(&sidecar_path, e.to_string()))?;
    std::fs::write(&sidecar_path, json).map_err(|e| io_err(&sidecar_path, e))?;
    Ok(())
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".json");
    os.into()
}

struct CrcReader<R: Read> {
    inner: R,
    crc: Crc64,
}

impl<R: Read> CrcReader<R> {
    fn read_exact_crc(&mut self, buf: &mut [u8], path: &Path) -> Result<()> {
        self.inner.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                format_err(path, "truncated file")
            } else {
                io_err(path, e)
            }
        })?;
        self.crc.update(buf);
        Ok(())
    }
}

/// Read one time slice; verifies magic, version, and checksum.
pub fn read_snapshot(path: &Path) -> Result<(Snapshot, PhysParams)> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = CrcReader { inner: BufReader::new(file), crc: Crc64::default() };

    let mut magic = [0u8; 4];
    r.inner
        .read_exact(&mut magic)
        .map_err(|_| format_err(path, "truncated file"))?;
    if &magic != MAGIC {
        return Err(format_err(path, format!("bad magic bytes {magic:02x?}")));
    }
    let mut version = [0u8; 4];
    r.inner
        .read_exact(&mut version)
        .map_err(|_| format_err(path, "truncated file"))?;
    let version = u32::from_le_bytes(version);
    if version != VERSION {
        return Err(format_err(path, format!("unsupported format version {version}")));
    }

    let mut word = [0u8; 8];
    r.read_exact_crc(&mut word, path)?;
    let n = u64::from_le_bytes(word) as usize;

    let mut header = [0.0f64; 10];
    for v in header.iter_mut() {
        r.read_exact_crc(&mut word, path)?;
        *v = f64::from_le_bytes(word);
    }
    let [l, time, nu, eta, r0, t_horizon, re, rm, _coupling, m] = header;
    let grid = Grid::new(n, l)?;
    let params = PhysParams::new(nu, eta, r0, t_horizon, re, rm, m)?;

    let mut arrays: Vec<Vec<f64>> = Vec::with_capacity(7);
    let mut buf = vec![0u8; 8 * 8192];
    for _ in 0..7 {
        let mut arr = Vec::with_capacity(grid.len());
        let mut remaining = grid.len();
        while remaining > 0 {
            let take = remaining.min(8192);
            let bytes = &mut buf[..8 * take];
            r.read_exact_crc(bytes, path)?;
            arr.extend(bytes.chunks_exact(8).map(|c| {
                f64::from_le_bytes(c.try_into().expect("chunk is 8 bytes"))
            }));
            remaining -= take;
        }
        arrays.push(arr);
    }

    let computed = r.crc.value();
    r.inner
        .read_exact(&mut word)
        .map_err(|_| format_err(path, "truncated file"))?;
    let stored = u64::from_le_bytes(word);
    if stored != computed {
        return Err(Error::Checksum { path: path.to_path_buf(), stored, computed });
    }

    let mut it = arrays.into_iter();
    let u = VectorField::from_components(
        grid,
        [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()],
    )?;
    let b = VectorField::from_components(
        grid,
        [it.next().unwrap(), it.next().unwrap(), it.next().unwrap()],
    )?;
    let p = ScalarField::from_data(grid, it.next().unwrap())?;

    Ok((Snapshot { time, u, b, p }, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{gen_field, FieldSpec};

    fn sample() -> (Snapshot, PhysParams, Grid) {
        let grid = Grid::new(16, 1.0).unwrap();
        let u = gen_field(
            grid,
            &FieldSpec::RandomSolenoidal { spectrum_exponent: 2.0, k_min: 1, k_max: 4, seed: 5 },
        )
        .unwrap();
        let b = gen_field(
            grid,
            &FieldSpec::RandomSolenoidal { spectrum_exponent: 1.0, k_min: 2, k_max: 5, seed: 9 },
        )
        .unwrap();
        let p = ScalarField::from_fn(grid, |x, y, _| (x * 7.0).sin() + y);
        let params = PhysParams::new(0.01, 0.02, 0.2, 4.0, 100.0, 50.0, 1.0).unwrap();
        (Snapshot { time: 1.5, u, b, p }, params, grid)
    }

    #[test]
    fn crc64_matches_reference_vector() {
        let mut c = Crc64::default();
        c.update(b"123456789");
        assert_eq!(c.value(), 0x6C40_DF5F_0B49_7347);
    }

    #[test]
    fn roundtrip_is_bitwise_exact() {
        let (snap, params, _) = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap_0000.mhdc");
        write_snapshot(&path, &snap, &params).unwrap();
        let (back, back_params) = read_snapshot(&path).unwrap();
        assert_eq!(back.time, snap.time);
        assert_eq!(back_params, params);
        for axis in 0..3 {
            assert_eq!(back.u.comp(axis), snap.u.comp(axis));
            assert_eq!(back.b.comp(axis), snap.b.comp(axis));
        }
        assert_eq!(back.p.data(), snap.p.data());
        assert!(sidecar_path(&path).exists());
    }

    #[test]
    fn wrong_magic_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bogus.mhdc");
        std::fs::write(&path, b"NOPE then some bytes").unwrap();
        assert!(matches!(read_snapshot(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn flipped_payload_byte_is_a_checksum_error() {
        let (snap, params, _) = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.mhdc");
        write_snapshot(&path, &snap, &params).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(read_snapshot(&path), Err(Error::Checksum { .. })));
    }

    #[test]
    fn truncated_file_is_a_format_error() {
        let (snap, params, _) = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.mhdc");
        write_snapshot(&path, &snap, &params).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 3]).unwrap();
        assert!(matches!(read_snapshot(&path), Err(Error::Format { .. })));
    }
}
