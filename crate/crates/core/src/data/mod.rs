//! Dataset ingestion, preprocessing, augmentation and split planning.
//!
//! Datasets are class-per-directory image trees. Loading produces a
//! deterministic [`DatasetIndex`]; splitting and fold planning operate on
//! index positions so plans can be serialized and replayed exactly.

mod augment;
mod image;
mod index;
mod split;
#[cfg(test)]
mod tests;

pub use augment::{AugmentOp, AugmentationSpec};
pub use image::{preprocess, Image};
pub use index::{load_dataset, DatasetEntry, DatasetIndex};
pub use split::{
    make_folds, read_plan, stratified_split, write_plan, FoldPlan, Grouping, PlanRow, SplitPlan,
    Subset,
};

use std::fmt;
use std::path::PathBuf;

/// Errors raised by the data pipeline.
#[derive(Debug)]
pub enum DataError {
    Io { path: PathBuf, source: std::io::Error },
    /// File is neither an 8-bit PNG nor a baseline JPEG, or failed to parse.
    Decode { path: PathBuf, reason: String },
    /// An image with a zero width or height.
    ZeroDimension { path: PathBuf },
    /// A class directory with no usable images.
    EmptyClass { dir: PathBuf },
    /// Split and fold operations need both classes present.
    MissingClass { found: Vec<String> },
    /// A class has fewer samples than the operation needs.
    ClassTooSmall { label: u8, count: usize, needed: usize },
    /// The training pool cannot be divided into `k` stratified folds.
    PoolTooSmall { label: u8, count: usize, k: usize },
    /// A malformed line in a plan file.
    BadPlanLine { line: usize, reason: String },
    /// Paths in plan files are comma-separated fields.
    PathNotSerializable { path: PathBuf },
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io { path, source } => write!(f, "{}: {source}", path.display()),
            Self::Decode { path, reason } => write!(f, "cannot decode {}: {reason}", path.display()),
            Self::ZeroDimension { path } => {
                write!(f, "{} has a zero width or height", path.display())
            }
            Self::EmptyClass { dir } => {
                write!(f, "class directory {} contains no decodable images", dir.display())
            }
            Self::MissingClass { found } => write!(
                f,
                "dataset must contain the positive class and at least one other; found {found:?}"
            ),
            Self::ClassTooSmall { label, count, needed } => {
                write!(f, "class {label} has {count} samples, need at least {needed}")
            }
            Self::PoolTooSmall { label, count, k } => {
                write!(f, "class {label} has {count} pool samples, cannot make {k} folds")
            }
            Self::BadPlanLine { line, reason } => write!(f, "plan file line {line}: {reason}"),
            Self::PathNotSerializable { path } => {
                write!(f, "path {} contains a comma and cannot be written to a plan file", path.display())
            }
        }
    }
}

impl std::error::Error for DataError {}

pub type Result<T> = std::result::Result<T, DataError>;
