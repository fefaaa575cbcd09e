//! Class-per-directory dataset indexing.

use super::image::Image;
use super::{DataError, Result};
use std::path::{Path, PathBuf};

/// One labelled image: label 1 is the positive (detection target) class,
/// label 0 everything else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub path: PathBuf,
    pub label: u8,
}

/// Deterministic inventory of a dataset tree, sorted by path.
#[derive(Debug, Clone)]
pub struct DatasetIndex {
    pub entries: Vec<DatasetEntry>,
    /// Files that failed the decode probe, with reasons; they are excluded
    /// from `entries`.
    pub skipped: Vec<String>,
}

impl DatasetIndex {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn count(&self, label: u8) -> usize {
        self.entries.iter().filter(|e| e.label == label).count()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.entries.iter().map(|e| e.label).collect()
    }

    pub fn decode(&self, index: usize) -> Result<Image> {
        Image::decode_file(&self.entries[index].path)
    }
}

/// Index `<root>/<ClassName>/<images>`; the directory whose name matches
/// `positive_class` (case-insensitive) is labelled 1, all others 0.
///
/// Files failing the decode probe are skipped with a recorded warning. A
/// class directory with no usable images is an error, as is a tree without
/// both labels.
pub fn load_dataset(root: &Path, positive_class: &str) -> Result<DatasetIndex> {
    let read_dir = |p: &Path| {
        std::fs::read_dir(p).map_err(|source| DataError::Io { path: p.to_path_buf(), source })
    };
    let mut class_dirs: Vec<PathBuf> = Vec::new();
    for entry in read_dir(root)? {
        let entry = entry.map_err(|source| DataError::Io { path: root.to_path_buf(), source })?;
        if entry.path().is_dir() {
            class_dirs.push(entry.path());
        }
    }
    class_dirs.sort();

    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    let mut seen_labels = [false; 2];
    let mut found_names = Vec::new();

    for dir in &class_dirs {
        let dir_name = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        found_names.push(dir_name.to_string());
        let label = u8::from(dir_name.eq_ignore_ascii_case(positive_class));

        let mut files: Vec<PathBuf> = Vec::new();
        for entry in read_dir(dir)? {
            let entry = entry.map_err(|source| DataError::Io { path: dir.clone(), source })?;
            if entry.path().is_file() {
                files.push(entry.path());
            }
        }
        files.sort();

        let mut usable = 0usize;
        for file in files {
            match Image::probe_file(&file) {
                Ok(_) => {
                    entries.push(DatasetEntry { path: file, label });
                    usable += 1;
                }
                Err(e) => skipped.push(e.to_string()),
            }
        }
        if usable == 0 {
            return Err(DataError::EmptyClass { dir: dir.clone() });
        }
        seen_labels[label as usize] = true;
    }

    if !(seen_labels[0] && seen_labels[1]) {
        return Err(DataError::MissingClass { found: found_names });
    }

    entries.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(DatasetIndex { entries, skipped })
}
