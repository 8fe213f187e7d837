//! Training data: object extraction from PDF files, the object-list file
//! format, the bundled synthetic corpus, and fixed-size training windows.
//!
//! Text is handled as raw bytes throughout; each byte is one character
//! (code points 0-255).

mod extract;
pub mod synthetic;
mod windows;

use std::io;
use std::path::Path;

pub use extract::{extract_objects, ObjectRecord};
pub use synthetic::{default_corpus, synthetic_objects};
pub use windows::{build_windows, concatenate, TrainingSet};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("corpus too small: {len} characters, need at least {needed}")]
    TooSmall { len: usize, needed: usize },
    #[error("window size must be positive")]
    ZeroWindow,
    #[error("object file contains no objects")]
    NoObjects,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Record separator line of the object-list file format.
pub const RECORD_SEPARATOR: &[u8] = b"%%OBJ%%";

/// Each body, a newline, then the separator line.
pub fn write_object_file(objects: &[ObjectRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for o in objects {
        out.extend_from_slice(&o.body);
        out.push(b'\n');
        out.extend_from_slice(RECORD_SEPARATOR);
        out.push(b'\n');
    }
    out
}

/// Inverse of [`write_object_file`]. Object numbers are re-read from each
/// body's header where present.
pub fn read_object_file(data: &[u8], source: &str) -> Vec<ObjectRecord> {
    let mut sep = b"\n".to_vec();
    sep.extend_from_slice(RECORD_SEPARATOR);
    sep.push(b'\n');
    let mut out = Vec::new();
    let mut rest = data;
    while !rest.is_empty() {
        let (body, next) = match rest.windows(sep.len()).position(|w| w == sep.as_slice()) {
            Some(p) => (&rest[..p], &rest[p + sep.len()..]),
            None => (rest, &[][..]),
        };
        if !body.iter().all(u8::is_ascii_whitespace) {
            let (object_id, generation) = extract_objects(body, source)
                .first()
                .filter(|r| r.body.len() == body.len())
                .map_or((0, 0), |r| (r.object_id, r.generation));
            out.push(ObjectRecord { object_id, generation, body: body.to_vec(), source: source.to_string() });
        }
        rest = next;
    }
    out
}

/// Keep bodies whose length lies in `[min_len, max_len]`.
pub fn filter_by_length(objects: Vec<ObjectRecord>, min_len: Option<usize>, max_len: Option<usize>) -> Vec<ObjectRecord> {
    objects
        .into_iter()
        .filter(|o| min_len.is_none_or(|m| o.len() >= m) && max_len.is_none_or(|m| o.len() <= m))
        .collect()
}

/// Extract from every regular file under `dir`, visiting paths in sorted
/// order so results are reproducible.
pub fn extract_dir(dir: &Path) -> Result<Vec<ObjectRecord>, CorpusError> {
    let mut files = Vec::new();
    collect_files(dir, &mut files)?;
    files.sort();
    let mut out = Vec::new();
    for f in files {
        let bytes = std::fs::read(&f)?;
        out.extend(extract_objects(&bytes, &f.to_string_lossy()));
    }
    Ok(out)
}

fn collect_files(dir: &Path, out: &mut Vec<std::path::PathBuf>) -> io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else if path.is_file() {
            out.push(path);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn object_file_round_trip() {
        let objs = synthetic::synthetic_objects(40, 9);
        let back = read_object_file(&write_object_file(&objs), "synthetic");
        assert_eq!(back, objs);
    }

    #[test]
    fn length_filter() {
        let objs = synthetic::synthetic_objects(100, 1);
        let kept = filter_by_length(objs.clone(), Some(30), Some(80));
        assert!(kept.iter().all(|o| (30..=80).contains(&o.len())));
        assert!(kept.len() < objs.len());
        assert_eq!(filter_by_length(objs.clone(), None, None).len(), objs.len());
    }
}
