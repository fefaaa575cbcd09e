//! Stratified splitting, k-fold planning and the plan file format.
//!
//! Plans hold positions into a [`DatasetIndex`]. When filenames carry an
//! `_augNN` provenance suffix, splitting can group all variants of one
//! source image into the same subset and fold, so augmented copies never
//! straddle an evaluation boundary.

use super::index::DatasetIndex;
use super::{DataError, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::path::Path;

/// How samples are bundled before assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Grouping {
    /// Group by source stem when any filename encodes provenance,
    /// otherwise treat files independently.
    #[default]
    Auto,
    /// Always group by stripped stem.
    ByStem,
    /// Always treat files independently.
    None,
}

/// Train/validation/test assignment over index positions.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub ratios: (f64, f64, f64),
    pub seed: u64,
}

impl SplitPlan {
    /// Train and validation positions: the cross-validation pool.
    pub fn pool(&self) -> Vec<usize> {
        let mut pool = self.train.clone();
        pool.extend_from_slice(&self.val);
        pool.sort_unstable();
        pool
    }
}

/// Per-fold validation sets over a pool; fold `i` trains on every other
/// fold's members.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub folds: Vec<Vec<usize>>,
    pub seed: u64,
}

impl FoldPlan {
    /// Training positions for one fold: the pool minus its validation set.
    pub fn train_of(&self, fold: usize) -> Vec<usize> {
        let mut train: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != fold)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        train.sort_unstable();
        train
    }
}

/// Strip a provenance suffix: `lesion_aug07.png -> lesion`.
fn stem_of(path: &Path) -> String {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    if let Some(pos) = stem.rfind("_aug") {
        if stem[pos + 4..].chars().all(|c| c.is_ascii_digit()) && pos + 4 < stem.len() {
            return stem[..pos].to_string();
        }
    }
    stem.to_string()
}

fn has_provenance_names(index: &DatasetIndex) -> bool {
    index.entries.iter().any(|e| {
        let stem = e.path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        stem_of(&e.path) != stem
    })
}

/// Bundle positions of one class into assignment units under the grouping
/// rule, in deterministic order.
fn class_units(index: &DatasetIndex, positions: &[usize], label: u8, grouped: bool) -> Vec<Vec<usize>> {
    if !grouped {
        return positions
            .iter()
            .copied()
            .filter(|&p| index.entries[p].label == label)
            .map(|p| vec![p])
            .collect();
    }
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for &p in positions {
        let entry = &index.entries[p];
        if entry.label == label {
            groups.entry(stem_of(&entry.path)).or_default().push(p);
        }
    }
    groups.into_values().collect()
}

/// Per-class shuffled assignment: test takes `floor(test_ratio * n)`, then
/// validation `floor(val_ratio * n)`, training the remainder.
///
/// Both classes need at least 10 samples. With grouping in effect the floor
/// rule applies to groups, so stratification holds at group granularity.
pub fn stratified_split(
    index: &DatasetIndex,
    ratios: (f64, f64, f64),
    seed: u64,
    grouping: Grouping,
) -> Result<SplitPlan> {
    for label in [1u8, 0u8] {
        let count = index.count(label);
        if count < 10 {
            return Err(DataError::ClassTooSmall { label, count, needed: 10 });
        }
    }
    let grouped = match grouping {
        Grouping::Auto => has_provenance_names(index),
        Grouping::ByStem => true,
        Grouping::None => false,
    };
    let all: Vec<usize> = (0..index.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for label in [1u8, 0u8] {
        let mut units = class_units(index, &all, label, grouped);
        units.shuffle(&mut rng);
        let n = units.len();
        let n_test = (ratios.2 * n as f64).floor() as usize;
        let n_val = (ratios.1 * n as f64).floor() as usize;
        for (i, unit) in units.into_iter().enumerate() {
            if i < n_test {
                test.extend(unit);
            } else if i < n_test + n_val {
                val.extend(unit);
            } else {
                train.extend(unit);
            }
        }
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(SplitPlan { train, val, test, ratios, seed })
}

/// Stratified k-fold assignment over a pool of index positions.
///
/// Units of each class are shuffled and dealt to the currently lightest
/// folds, so fold sizes differ by at most one overall and per class.
pub fn make_folds(
    index: &DatasetIndex,
    pool: &[usize],
    k: usize,
    seed: u64,
    grouping: Grouping,
) -> Result<FoldPlan> {
    assert!(k >= 2, "k-fold cross-validation needs k >= 2");
    let grouped = match grouping {
        Grouping::Auto => has_provenance_names(index),
        Grouping::ByStem => true,
        Grouping::None => false,
    };
    for label in [1u8, 0u8] {
        let count = pool.iter().filter(|&&p| index.entries[p].label == label).count();
        if count < k {
            return Err(DataError::PoolTooSmall { label, count, k });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for label in [1u8, 0u8] {
        let mut units = class_units(index, pool, label, grouped);
        units.shuffle(&mut rng);
        // Deal to the lightest folds first to keep overall sizes within 1.
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&f| (folds[f].len(), f));
        for (i, unit) in units.into_iter().enumerate() {
            folds[order[i % k]].extend(unit);
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(FoldPlan { k, folds, seed })
}

// ── Plan file format ────────────────────────────────────────────────────

/// Which split subset a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subset {
    Train,
    Val,
    Test,
}

impl Subset {
    fn name(&self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Val => "val",
            Self::Test => "test",
        }
    }
}

/// One `subset,fold,path,label` line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanRow {
    pub subset: Subset,
    /// Fold whose validation set holds this sample; absent for test rows
    /// or when no fold plan was written.
    pub fold: Option<usize>,
    pub path: String,
    pub label: u8,
}

/// Serialize split (and optionally fold) assignments as
/// `subset,fold,path,label` lines, one per sample, in index order.
pub fn write_plan(
    index: &DatasetIndex,
    split: &SplitPlan,
    folds: Option<&FoldPlan>,
    path: &Path,
) -> Result<()> {
    let mut subset_of: BTreeMap<usize, Subset> = BTreeMap::new();
    for &p in &split.train {
        subset_of.insert(p, Subset::Train);
    }
    for &p in &split.val {
        subset_of.insert(p, Subset::Val);
    }
    for &p in &split.test {
        subset_of.insert(p, Subset::Test);
    }
    let mut fold_of: BTreeMap<usize, usize> = BTreeMap::new();
    if let Some(plan) = folds {
        for (f, members) in plan.folds.iter().enumerate() {
            for &p in members {
                fold_of.insert(p, f);
            }
        }
    }
    let mut out = String::new();
    for (&pos, subset) in &subset_of {
        let entry = &index.entries[pos];
        let path_str = entry.path.to_string_lossy();
        if path_str.contains(',') {
            return Err(DataError::PathNotSerializable { path: entry.path.clone() });
        }
        let fold = fold_of.get(&pos).map_or_else(|| "-".to_string(), |f| f.to_string());
        out.push_str(&format!("{},{},{},{}\n", subset.name(), fold, path_str, entry.label));
    }
    std::fs::write(path, out).map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}

/// Parse a plan file back into rows.
pub fn read_plan(path: &Path) -> Result<Vec<PlanRow>> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| DataError::Io { path: path.to_path_buf(), source })?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.splitn(4, ',').collect();
        if parts.len() != 4 {
            return Err(DataError::BadPlanLine { line: line_no, reason: "expected 4 fields".into() });
        }
        let subset = match parts[0] {
            "train" => Subset::Train,
            "val" => Subset::Val,
            "test" => Subset::Test,
            other => {
                return Err(DataError::BadPlanLine {
                    line: line_no,
                    reason: format!("unknown subset {other:?}"),
                })
            }
        };
        let fold = match parts[1] {
            "-" => None,
            digits => Some(digits.parse().map_err(|_| DataError::BadPlanLine {
                line: line_no,
                reason: format!("bad fold index {digits:?}"),
            })?),
        };
        let label = parts[3].parse().map_err(|_| DataError::BadPlanLine {
            line: line_no,
            reason: format!("bad label {:?}", parts[3]),
        })?;
        rows.push(PlanRow { subset, fold, path: parts[2].to_string(), label });
    }
    Ok(rows)
}
