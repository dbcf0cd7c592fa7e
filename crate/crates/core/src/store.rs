//! Artifact files: JSONL records and JSON documents that carry a
//! `format_version`, written through a temporary file and renamed into
//! place so an aborted run leaves nothing half-written.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corrupt::{BrokenProgram, CorruptionRecord};
use crate::program::{Token, TokenizedProgram};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: unsupported format_version {found}")]
    UnsupportedVersion { path: PathBuf, found: u64 },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    format_version: u32,
    #[serde(flatten)]
    record: T,
}

/// Writes `bytes` to `path` via a sibling temporary file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| StoreError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(
            &mut out,
            &Versioned {
                format_version: FORMAT_VERSION,
                record: r,
            },
        )
        .expect("records serialize");
        out.push(b'\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), StoreError> {
    atomic_write(path, &to_jsonl(records))
}

fn check_version(path: &Path, line: usize, value: &serde_json::Value) -> Result<(), StoreError> {
    match value.get("format_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == FORMAT_VERSION as u64 => Ok(()),
        Some(v) => Err(StoreError::UnsupportedVersion {
            path: path.to_path_buf(),
            found: v,
        }),
        None => Err(StoreError::Parse {
            path: path.to_path_buf(),
            line,
            message: "missing format_version".into(),
        }),
    }
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse = |m: String| StoreError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: m,
        };
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| parse(e.to_string()))?;
        check_version(path, i + 1, &value)?;
        let v: Versioned<T> = serde_json::from_value(value).map_err(|e| parse(e.to_string()))?;
        out.push(v.record);
    }
    Ok(out)
}

pub fn to_json<T: Serialize>(doc: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&Versioned {
        format_version: FORMAT_VERSION,
        record: doc,
    })
    .expect("document serializes");
    out.push(b'\n');
    out
}

pub fn write_json<T: Serialize>(path: &Path, doc: &T) -> Result<(), StoreError> {
    atomic_write(path, &to_json(doc))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let parse = |m: String| StoreError::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: m,
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| parse(e.to_string()))?;
    check_version(path, 0, &value)?;
    let v: Versioned<T> = serde_json::from_value(value).map_err(|e| parse(e.to_string()))?;
    Ok(v.record)
}

/// A correct source program in a corpus file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub id: String,
    pub source: String,
}

/// On-disk form of a [`BrokenProgram`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrokenRecord {
    pub parent_id: String,
    pub variant_id: usize,
    pub seed: u64,
    pub source_id: String,
    pub lines: Vec<Vec<Token>>,
    pub corruptions: Vec<CorruptionRecord>,
}

impl From<&BrokenProgram> for BrokenRecord {
    fn from(b: &BrokenProgram) -> Self {
        Self {
            parent_id: b.parent_id.clone(),
            variant_id: b.variant_id,
            seed: b.seed,
            source_id: b.program.source_id.clone(),
            lines: b.program.lines.clone(),
            corruptions: b.corruptions.clone(),
        }
    }
}

impl From<BrokenRecord> for BrokenProgram {
    fn from(r: BrokenRecord) -> Self {
        Self {
            parent_id: r.parent_id,
            variant_id: r.variant_id,
            seed: r.seed,
            program: TokenizedProgram::new(r.source_id, r.lines),
            corruptions: r.corruptions,
        }
    }
}

pub fn write_broken(path: &Path, programs: &[BrokenProgram]) -> Result<(), StoreError> {
    let records: Vec<BrokenRecord> = programs.iter().map(BrokenRecord::from).collect();
    write_jsonl(path, &records)
}

pub fn read_broken(path: &Path) -> Result<Vec<BrokenProgram>, StoreError> {
    Ok(read_jsonl::<BrokenRecord>(path)?.into_iter().map(BrokenProgram::from).collect())
}

/// Reads correct programs from a JSONL corpus or a directory of `.c` files
/// (ids are file stems, in name order).
pub fn read_sources(path: &Path) -> Result<Vec<SourceRecord>, StoreError> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(io_err(path))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "c"))
            .collect();
        files.sort();
        files
            .into_iter()
            .map(|f| {
                let source = std::fs::read_to_string(&f).map_err(io_err(&f))?;
                let id = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
                Ok(SourceRecord { id, source })
            })
            .collect()
    } else {
        read_jsonl(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip_and_version_first() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.jsonl");
        let recs = vec![SourceRecord {
            id: "a".into(),
            source: "int x;".into(),
        }];
        write_jsonl(&p, &recs).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("{\"format_version\":1,"));
        assert_eq!(read_jsonl::<SourceRecord>(&p).unwrap(), recs);
    }

    #[test]
    fn unknown_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.jsonl");
        std::fs::write(&p, "{\"format_version\":9,\"id\":\"a\",\"source\":\"\"}\n").unwrap();
        assert!(matches!(
            read_jsonl::<SourceRecord>(&p),
            Err(StoreError::UnsupportedVersion { found: 9, .. })
        ));
    }
}
