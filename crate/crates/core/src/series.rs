//! Time series of field snapshots, in memory or spilled to disk.
//!
//! Budget quadratures walk a series time-outer, so the disk-backed variant
//! keeps only a tiny cache of decoded snapshots; a 128^3 run stays well
//! under a desktop memory budget.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::Grid;
use crate::params::PhysParams;
use crate::snapshot;

/// One stored time slice: solenoidal velocity and magnetic fields plus the
/// zero-mean fluid pressure.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    pub u: VectorField,
    pub b: VectorField,
    pub p: ScalarField,
}

enum Entry {
    Memory(Arc<Snapshot>),
    Disk(PathBuf),
}

/// Ordered snapshots plus the parameters of the run that produced them.
pub struct FieldSeries {
    grid: Grid,
    params: PhysParams,
    times: Vec<f64>,
    entries: Vec<Entry>,
    cache: Mutex<Vec<(usize, Arc<Snapshot>)>>,
}

const CACHE_SLOTS: usize = 2;

impl FieldSeries {
    pub fn in_memory(grid: Grid, params: PhysParams, snaps: Vec<Snapshot>) -> Result<Self> {
        let times: Vec<f64> = snaps.iter().map(|s| s.time).collect();
        validate_times(&times)?;
        for s in &snaps {
            if s.u.grid() != grid || s.b.grid() != grid || s.p.grid() != grid {
                return Err(Error::Series("snapshot grid differs from series grid".into()));
            }
        }
        Ok(Self {
            grid,
            params,
            times,
            entries: snaps.into_iter().map(|s| Entry::Memory(Arc::new(s))).collect(),
            cache: Mutex::new(Vec::new()),
        })
    }

    /// Open a directory written by [`SeriesWriter`].
    pub fn open_dir(dir: &Path) -> Result<Self> {
        let index_path = dir.join("index.json");
        let text = std::fs::read_to_string(&index_path).map_err(|e| Error::Io {
            path: index_path.clone(),
            source: e,
        })?;
        let index: SeriesIndex = serde_json::from_str(&text).map_err(|e| Error::Format {
            path: index_path.clone(),
            reason: e.to_string(),
        })?;
        let grid = Grid::new(index.n as usize, index.l)?;
        index.params.validate()?;
        let times: Vec<f64> = index.entries.iter().map(|e| e.time).collect();
        validate_times(&times)?;
        let entries = index
            .entries
            .iter()
            .map(|e| Entry::Disk(dir.join(&e.file)))
            .collect();
        Ok(Self {
            grid,
            params: index.params,
            times,
            entries,
            cache: Mutex::new(Vec::new()),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn params(&self) -> &PhysParams {
        &self.params
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Fetch snapshot `i`, decoding from disk on a cache miss.
    pub fn get(&self, i: usize) -> Result<Arc<Snapshot>> {
        match &self.entries[i] {
            Entry::Memory(s) => Ok(s.clone()),
            Entry::Disk(path) => {
                {
                    let cache = self.cache.lock().unwrap();
                    if let Some((_, s)) = cache.iter().find(|(j, _)| *j == i) {
                        return Ok(s.clone());
                    }
                }
                let (snap, _) = snapshot::read_snapshot(path)?;
                if snap.u.grid() != self.grid {
                    return Err(Error::Series(format!(
                        "snapshot {} grid differs from series grid",
                        path.display()
                    )));
                }
                let snap = Arc::new(snap);
                let mut cache = self.cache.lock().unwrap();
                if cache.len() >= CACHE_SLOTS {
                    cache.remove(0);
                }
                cache.push((i, snap.clone()));
                Ok(snap)
            }
        }
    }
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Series("series holds no snapshots".into()));
    }
    for w in times.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Series(format!(
                "snapshot times must strictly increase, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct SeriesIndex {
    schema: String,
    n: u64,
    l: f64,
    params: PhysParams,
    entries: Vec<IndexEntry>,
}

#[derive(Serialize, Deserialize)]
struct IndexEntry {
    time: f64,
    file: String,
}

/// Streams snapshots into a directory; `finish` seals the index.
pub struct SeriesWriter {
    dir: PathBuf,
    grid: Grid,
    params: PhysParams,
    entries: Vec<IndexEntry>,
}

impl SeriesWriter {
    pub fn create(dir: &Path, grid: Grid, params: PhysParams) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        Ok(Self { dir: dir.to_path_buf(), grid, params, entries: Vec::new() })
    }

    pub fn append(&mut self, snap: &Snapshot) -> Result<()> {
        if snap.u.grid() != self.grid {
            return Err(Error::Series("snapshot grid differs from series grid".into()));
        }
        if let Some(last) = self.entries.last() {
            if !(snap.time > last.time) {
                return Err(Error::Series(format!(
                    "snapshot times must strictly increase, got {} then {}",
                    last.time, snap.time
                )));
            }
        }
        let file = format!("snap_{:05}.mhdc", self.entries.len());
        snapshot::write_snapshot(&self.dir.join(&file), snap, &self.params)?;
        self.entries.push(IndexEntry { time: snap.time, file });
        Ok(())
    }

    pub fn finish(self) -> Result<FieldSeries> {
        let index = SeriesIndex {
            schema: "mhdc-series".into(),
            n: self.grid.n() as u64,
            l: self.grid.l(),
            params: self.params,
            entries: self.entries,
        };
        let path = self.dir.join("index.json");
        let text = serde_json::to_string_pretty(&index).expect("index serializes");
        std::fs::write(&path, text).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        FieldSeries::open_dir(&self.dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{gen_field, FieldSpec};

    fn snap(grid: Grid, time: f64, seed: u64) -> Snapshot {
        let u = gen_field(
            grid,
            &FieldSpec::RandomSolenoidal { spectrum_exponent: 2.0, k_min: 1, k_max: 3, seed },
        )
        .unwrap();
        Snapshot { time, u: u.clone(), b: u, p: ScalarField::zeros(grid) }
    }

    #[test]
    fn disk_roundtrip_preserves_times_and_fields() {
        let grid = Grid::new(16, 1.0).unwrap();
        let params = PhysParams::from_transport(0.1, 0.1, 0.2, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut w = SeriesWriter::create(dir.path(), grid, params).unwrap();
        let snaps: Vec<Snapshot> = (0..4).map(|i| snap(grid, i as f64 * 0.5, i as u64)).collect();
        for s in &snaps {
            w.append(s).unwrap();
        }
        let series = w.finish().unwrap();
        assert_eq!(series.len(), 4);
        // Pull twice: second fetch exercises the decoded-snapshot cache.
        for pass in 0..2 {
            for (i, s) in snaps.iter().enumerate() {
                let got = series.get(i).unwrap();
                assert_eq!(got.time, s.time, "pass {pass}");
                assert_eq!(got.u.comp(0), s.u.comp(0));
            }
        }
    }

    #[test]
    fn non_monotone_times_are_rejected() {
        let grid = Grid::new(16, 1.0).unwrap();
        let params = PhysParams::from_transport(0.1, 0.1, 0.2, 1.0).unwrap();
        let snaps = vec![snap(grid, 1.0, 0), snap(grid, 1.0, 1)];
        assert!(matches!(
            FieldSeries::in_memory(grid, params, snaps),
            Err(Error::Series(_))
        ));
    }
}
