//! On-disk layout of a run directory.
//!
//! Every condition writes `<condition>.jsonl` (one record per example, in
//! dataset order), `<condition>.report.json` and `<condition>.csv`.
//! Records are appended to `<condition>.jsonl.partial` while a condition is
//! running so an interrupted run can resume. Wall-clock times live only in
//! `manifest.json`.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{ExampleRecord, PipelineError};

pub const MANIFEST_FILE: &str = "manifest.json";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub examples: usize,
    pub succeeded: usize,
    pub failed: usize,
    /// Records taken over from an earlier, interrupted run.
    pub resumed: usize,
    pub started_at: u64,
    pub finished_at: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub created_at: u64,
    pub updated_at: u64,
    pub conditions: BTreeMap<String, ConditionEntry>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug, Clone)]
pub struct RunStore {
    dir: PathBuf,
}

impl RunStore {
    pub fn open(dir: &Path) -> Result<Self, PipelineError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self {
            dir: dir.to_path_buf(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn records_path(&self, condition: &str) -> PathBuf {
        self.path(&format!("{condition}.jsonl"))
    }

    fn partial_path(&self, condition: &str) -> PathBuf {
        self.path(&format!("{condition}.jsonl.partial"))
    }

    /// Successful records already on disk for `condition`, from a finished
    /// or an interrupted run. Unparseable lines are ignored.
    pub fn completed(
        &self,
        condition: &str,
    ) -> Result<HashMap<String, ExampleRecord>, PipelineError> {
        let mut done = HashMap::new();
        for path in [self.records_path(condition), self.partial_path(condition)] {
            if !path.exists() {
                continue;
            }
            let file = File::open(&path).map_err(io_err(&path))?;
            for line in BufReader::new(file).lines() {
                let line = line.map_err(io_err(&path))?;
                if let Ok(rec) = serde_json::from_str::<ExampleRecord>(&line) {
                    if rec.is_ok() {
                        done.insert(rec.example_id.clone(), rec);
                    }
                }
            }
        }
        Ok(done)
    }

    pub fn partial_writer(&self, condition: &str) -> Result<PartialWriter, PipelineError> {
        let path = self.partial_path(condition);
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        Ok(PartialWriter {
            file: Mutex::new(file),
            path,
        })
    }

    /// Write the final record file and drop the partial log.
    pub fn finish(&self, condition: &str, records: &[ExampleRecord]) -> Result<(), PipelineError> {
        self.write_jsonl(&self.records_path(condition), records)?;
        let partial = self.partial_path(condition);
        if partial.exists() {
            fs::remove_file(&partial).map_err(io_err(&partial))?;
        }
        Ok(())
    }

    pub fn write_jsonl<T: Serialize>(&self, path: &Path, items: &[T]) -> Result<(), PipelineError> {
        self.write_atomic(path, |w| {
            for item in items {
                serde_json::to_writer(&mut *w, item)?;
                w.write_all(b"\n")?;
            }
            Ok(())
        })
    }

    pub fn write_json<T: Serialize>(&self, path: &Path, value: &T) -> Result<(), PipelineError> {
        self.write_atomic(path, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.write_all(b"\n")?;
            Ok(())
        })
    }

    /// Write through a temporary file that is renamed into place.
    pub fn write_atomic(
        &self,
        path: &Path,
        body: impl FnOnce(&mut BufWriter<File>) -> Result<(), PipelineError>,
    ) -> Result<(), PipelineError> {
        let tmp = path.with_extension("tmp");
        let file = File::create(&tmp).map_err(io_err(&tmp))?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush().map_err(io_err(&tmp))?;
        drop(w);
        fs::rename(&tmp, path).map_err(io_err(path))
    }

    pub fn manifest(&self) -> Result<Manifest, PipelineError> {
        let path = self.path(MANIFEST_FILE);
        if !path.exists() {
            let now = unix_now();
            return Ok(Manifest {
                created_at: now,
                updated_at: now,
                conditions: BTreeMap::new(),
            });
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn record_condition(&self, name: &str, entry: ConditionEntry) -> Result<(), PipelineError> {
        let mut manifest = self.manifest()?;
        manifest.updated_at = entry.finished_at;
        manifest.conditions.insert(name.to_string(), entry);
        self.write_json(&self.path(MANIFEST_FILE), &manifest)
    }
}

/// Append-only log of records finished during a run.
pub struct PartialWriter {
    file: Mutex<File>,
    path: PathBuf,
}

impl PartialWriter {
    pub fn append(&self, record: &ExampleRecord) -> Result<(), PipelineError> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        let mut f = self.file.lock().unwrap_or_else(|e| e.into_inner());
        f.write_all(&line).map_err(io_err(&self.path))
    }
}

/// Read records written by [`RunStore::finish`].
pub fn read_records(path: &Path) -> Result<Vec<ExampleRecord>, PipelineError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_err(path))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}
