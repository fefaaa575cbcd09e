use super::*;
use std::path::PathBuf;

fn checker2x2() -> Image {
    // white, black / black, white
    let px = vec![255, 255, 255, 0, 0, 0, 0, 0, 0, 255, 255, 255];
    Image::new(2, 2, px).unwrap()
}

fn noise_image(w: usize, h: usize, seed: u64) -> Image {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let pixels = (0..w * h * 3).map(|_| rng.gen()).collect();
    Image::new(w, h, pixels).unwrap()
}

/// Index over synthetic paths; no files needed for split planning.
fn synthetic_index(positives: usize, negatives: usize) -> DatasetIndex {
    let mut entries = Vec::new();
    for i in 0..positives {
        entries.push(DatasetEntry { path: PathBuf::from(format!("pos/{i:05}.png")), label: 1 });
    }
    for i in 0..negatives {
        entries.push(DatasetEntry { path: PathBuf::from(format!("neg/{i:05}.png")), label: 0 });
    }
    DatasetIndex { entries, skipped: Vec::new() }
}

// ── preprocess ──────────────────────────────────────────────────────────

#[test]
fn preprocess_all_white_is_all_ones() {
    let img = Image::filled(5, 4, [255, 255, 255]).unwrap();
    let t = preprocess(&img, 8, 8).unwrap();
    assert_eq!(t.shape(), &[3, 8, 8]);
    assert!(t.to_vec().iter().all(|&v| v == 1.0));
}

#[test]
fn preprocess_all_black_is_all_zeros() {
    let img = Image::filled(3, 3, [0, 0, 0]).unwrap();
    let t = preprocess(&img, 6, 6).unwrap();
    assert!(t.to_vec().iter().all(|&v| v == 0.0));
}

#[test]
fn preprocess_matches_bilinear_oracle_on_upscaled_checkerboard() {
    let img = checker2x2();
    let t = preprocess(&img, 8, 8).unwrap();
    let data = t.to_vec();

    // Direct bilinear formula, written independently of the image code.
    let src = [[1.0f32, 0.0], [0.0, 1.0]]; // [y][x] intensities
    for y in 0..8 {
        for x in 0..8 {
            let sx = ((x as f32 + 0.5) * 0.25 - 0.5).clamp(0.0, 1.0);
            let sy = ((y as f32 + 0.5) * 0.25 - 0.5).clamp(0.0, 1.0);
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(1), (y0 + 1).min(1));
            let (fx, fy) = (sx - x0 as f32, sy - y0 as f32);
            let top = src[y0][x0] + (src[y0][x1] - src[y0][x0]) * fx;
            let bot = src[y1][x0] + (src[y1][x1] - src[y1][x0]) * fx;
            let want = top + (bot - top) * fy;
            for c in 0..3 {
                let got = data[(c * 8 + y) * 8 + x];
                assert!((got - want).abs() < 1e-5, "({x},{y},{c}): {got} vs {want}");
            }
        }
    }
}

#[test]
fn preprocess_rejects_zero_target() {
    let img = checker2x2();
    assert!(preprocess(&img, 0, 8).is_err());
}

#[test]
fn preprocess_output_stays_in_unit_range() {
    let img = noise_image(11, 7, 3);
    for t in [preprocess(&img, 4, 4).unwrap(), preprocess(&img, 23, 17).unwrap()] {
        assert!(t.to_vec().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

// ── codecs ──────────────────────────────────────────────────────────────

#[test]
fn png_write_read_roundtrip_preserves_pixels() {
    let dir = tempfile::tempdir().unwrap();
    let img = noise_image(9, 7, 1);
    let path = dir.path().join("img.png");
    img.write_png(&path).unwrap();
    let back = Image::decode_file(&path).unwrap();
    assert_eq!(back, img);
}

#[test]
fn decode_rejects_unknown_format_with_clear_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("not_an_image.png");
    std::fs::write(&path, b"plain text, not pixels").unwrap();
    let err = Image::decode_file(&path).unwrap_err();
    assert!(err.to_string().contains("PNG"), "message: {err}");
}

// ── load_dataset ────────────────────────────────────────────────────────

fn write_class_dir(root: &std::path::Path, class: &str, count: usize, seed: u64) {
    let dir = root.join(class);
    std::fs::create_dir_all(&dir).unwrap();
    let prefix = class.to_lowercase();
    for i in 0..count {
        noise_image(4, 4, seed + i as u64)
            .write_png(&dir.join(format!("{prefix}_{i:03}.png")))
            .unwrap();
    }
}

#[test]
fn load_dataset_counts_and_sorts() {
    let dir = tempfile::tempdir().unwrap();
    write_class_dir(dir.path(), "Monkeypox", 3, 10);
    write_class_dir(dir.path(), "Others", 5, 20);
    let index = load_dataset(dir.path(), "Monkeypox").unwrap();
    assert_eq!(index.count(1), 3);
    assert_eq!(index.count(0), 5);
    assert_eq!(index.len(), 8);
    let mut sorted = index.entries.clone();
    sorted.sort_by(|a, b| a.path.cmp(&b.path));
    assert_eq!(index.entries, sorted);
    assert!(index.skipped.is_empty());
}

#[test]
fn load_dataset_skips_undecodable_files_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    write_class_dir(dir.path(), "Monkeypox", 2, 10);
    write_class_dir(dir.path(), "Others", 2, 20);
    std::fs::write(dir.path().join("Others/broken.png"), b"garbage").unwrap();
    let index = load_dataset(dir.path(), "Monkeypox").unwrap();
    assert_eq!(index.len(), 4);
    assert_eq!(index.skipped.len(), 1);
    assert!(index.skipped[0].contains("broken.png"));
}

#[test]
fn load_dataset_requires_both_classes() {
    let dir = tempfile::tempdir().unwrap();
    write_class_dir(dir.path(), "Others", 4, 30);
    let err = load_dataset(dir.path(), "Monkeypox").unwrap_err();
    assert!(matches!(err, DataError::MissingClass { .. }));
}

#[test]
fn load_dataset_rejects_empty_class_dir() {
    let dir = tempfile::tempdir().unwrap();
    write_class_dir(dir.path(), "Monkeypox", 2, 10);
    std::fs::create_dir_all(dir.path().join("Others")).unwrap();
    let err = load_dataset(dir.path(), "Monkeypox").unwrap_err();
    assert!(matches!(err, DataError::EmptyClass { .. }));
}

// ── augmentation ────────────────────────────────────────────────────────

#[test]
fn augment_produces_exactly_the_requested_count() {
    let spec = AugmentationSpec::new(AugmentOp::all(), 14, 99);
    let out = spec.variants(&noise_image(8, 8, 5)).unwrap();
    assert_eq!(out.len(), 14);
}

#[test]
fn augment_variants_differ_from_source() {
    let img = noise_image(16, 16, 6);
    let spec = AugmentationSpec::new(AugmentOp::all(), 10, 123);
    for (i, v) in spec.variants(&img).unwrap().iter().enumerate() {
        assert_ne!(v.pixels(), img.pixels(), "variant {i} equals its source");
    }
}

#[test]
fn augment_is_deterministic_per_seed() {
    let img = noise_image(12, 12, 7);
    let spec = AugmentationSpec::new(AugmentOp::all(), 6, 42);
    let a = spec.variants(&img).unwrap();
    let b = spec.variants(&img).unwrap();
    assert_eq!(a, b);
    let c = spec.with_seed(43).variants(&img).unwrap();
    assert_ne!(a, c);
}

#[test]
fn augment_applies_at_least_one_op_even_on_unlucky_draws() {
    // A single enabled op with subset probability 1/2 would sometimes draw
    // the empty set; the fallback must still apply one op.
    let img = noise_image(8, 8, 8);
    let spec = AugmentationSpec::new(vec![AugmentOp::Reflection], 32, 7);
    for v in spec.variants(&img).unwrap() {
        assert_ne!(v.pixels(), img.pixels());
    }
}

// ── stratified split ────────────────────────────────────────────────────

#[test]
fn split_follows_per_class_floor_rule_at_dataset_scale() {
    // 1428 positives and 1764 negatives: test takes floor(0.1*n) per class
    // (142 + 176), validation floor(0.2*n) (285 + 352), train the rest.
    let index = synthetic_index(1428, 1764);
    let plan = stratified_split(&index, (0.7, 0.2, 0.1), 11, Grouping::None).unwrap();
    assert_eq!(plan.test.len(), 142 + 176);
    assert_eq!(plan.val.len(), 285 + 352);
    assert_eq!(plan.train.len(), 3192 - 318 - 637);

    let count = |list: &[usize], label: u8| {
        list.iter().filter(|&&p| index.entries[p].label == label).count()
    };
    assert_eq!(count(&plan.test, 1), 142);
    assert_eq!(count(&plan.val, 1), 285);
    assert_eq!(count(&plan.train, 1), 1428 - 142 - 285);
}

#[test]
fn split_with_train_only_ratios_keeps_everything() {
    let index = synthetic_index(12, 15);
    let plan = stratified_split(&index, (1.0, 0.0, 0.0), 3, Grouping::None).unwrap();
    assert_eq!(plan.train.len(), 27);
    assert!(plan.val.is_empty() && plan.test.is_empty());
}

#[test]
fn split_subsets_are_disjoint_and_exhaustive() {
    let index = synthetic_index(37, 53);
    let plan = stratified_split(&index, (0.7, 0.2, 0.1), 5, Grouping::None).unwrap();
    let mut all: Vec<usize> = plan
        .train
        .iter()
        .chain(&plan.val)
        .chain(&plan.test)
        .copied()
        .collect();
    all.sort_unstable();
    all.dedup();
    assert_eq!(all.len(), 90);
}

#[test]
fn split_rejects_tiny_classes() {
    let index = synthetic_index(9, 50);
    let err = stratified_split(&index, (0.7, 0.2, 0.1), 1, Grouping::None).unwrap_err();
    assert!(matches!(err, DataError::ClassTooSmall { label: 1, .. }));
}

// ── folds ───────────────────────────────────────────────────────────────

#[test]
fn four_folds_over_the_full_augmented_counts_are_equal_sized() {
    let index = synthetic_index(1428, 1764);
    let pool: Vec<usize> = (0..index.len()).collect();
    let plan = make_folds(&index, &pool, 4, 17, Grouping::None).unwrap();
    for fold in &plan.folds {
        assert_eq!(fold.len(), 798);
    }
}

#[test]
fn folds_partition_the_pool() {
    let index = synthetic_index(23, 31);
    let pool: Vec<usize> = (0..index.len()).collect();
    let plan = make_folds(&index, &pool, 4, 19, Grouping::None).unwrap();
    let mut union: Vec<usize> = plan.folds.iter().flatten().copied().collect();
    union.sort_unstable();
    let mut expected = pool.clone();
    expected.sort_unstable();
    assert_eq!(union, expected);
    for i in 0..plan.k {
        for j in i + 1..plan.k {
            assert!(plan.folds[i].iter().all(|p| !plan.folds[j].contains(p)));
        }
    }
}

#[test]
fn fold_sizes_differ_by_at_most_one_overall_and_per_class() {
    // 5 + 5 samples over 4 folds is the awkward case: naive per-class
    // round-robin would give fold sizes 4,2,2,2.
    let index = synthetic_index(5, 5);
    let pool: Vec<usize> = (0..10).collect();
    let plan = make_folds(&index, &pool, 4, 23, Grouping::None).unwrap();
    let sizes: Vec<usize> = plan.folds.iter().map(|f| f.len()).collect();
    assert_eq!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap(), 1, "{sizes:?}");
    for label in [0u8, 1u8] {
        let per: Vec<usize> = plan
            .folds
            .iter()
            .map(|f| f.iter().filter(|&&p| index.entries[p].label == label).count())
            .collect();
        assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1, "{per:?}");
    }
}

#[test]
fn folds_reject_pools_smaller_than_k_per_class() {
    let index = synthetic_index(3, 40);
    let pool: Vec<usize> = (0..43).collect();
    let err = make_folds(&index, &pool, 4, 1, Grouping::None).unwrap_err();
    assert!(matches!(err, DataError::PoolTooSmall { label: 1, .. }));
}

#[test]
fn fold_train_of_is_the_pool_complement() {
    let index = synthetic_index(16, 16);
    let pool: Vec<usize> = (0..32).collect();
    let plan = make_folds(&index, &pool, 4, 29, Grouping::None).unwrap();
    let train = plan.train_of(1);
    assert_eq!(train.len(), 32 - plan.folds[1].len());
    assert!(train.iter().all(|p| !plan.folds[1].contains(p)));
}

// ── grouping ────────────────────────────────────────────────────────────

fn augmented_index(sources: usize, variants: usize, label_split: usize) -> DatasetIndex {
    let mut entries = Vec::new();
    for s in 0..sources {
        let label = u8::from(s < label_split);
        let class = if label == 1 { "pos" } else { "neg" };
        for v in 0..variants {
            entries.push(DatasetEntry {
                path: PathBuf::from(format!("{class}/img{s:03}_aug{v:02}.png")),
                label,
            });
        }
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    DatasetIndex { entries, skipped: Vec::new() }
}

#[test]
fn auto_grouping_keeps_augmented_variants_together() {
    let index = augmented_index(30, 5, 12);
    let plan = stratified_split(&index, (0.7, 0.2, 0.1), 31, Grouping::Auto).unwrap();
    let subset_of = |p: usize| -> u8 {
        if plan.train.contains(&p) {
            0
        } else if plan.val.contains(&p) {
            1
        } else {
            2
        }
    };
    for s in 0..30 {
        let members: Vec<usize> = index
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.path.to_string_lossy().contains(&format!("img{s:03}_")))
            .map(|(i, _)| i)
            .collect();
        assert_eq!(members.len(), 5);
        let first = subset_of(members[0]);
        assert!(members.iter().all(|&m| subset_of(m) == first), "source {s} straddles subsets");
    }

    let pool = plan.pool();
    let folds = make_folds(&index, &pool, 4, 31, Grouping::Auto).unwrap();
    for s in 0..30 {
        let mut in_folds: Vec<usize> = Vec::new();
        for (f, members) in folds.folds.iter().enumerate() {
            for &p in members {
                if index.entries[p].path.to_string_lossy().contains(&format!("img{s:03}_")) {
                    in_folds.push(f);
                }
            }
        }
        in_folds.dedup();
        assert!(in_folds.len() <= 1, "source {s} straddles folds {in_folds:?}");
    }
}

// ── plan files ──────────────────────────────────────────────────────────

#[test]
fn plan_file_roundtrips_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let index = synthetic_index(14, 18);
    let split = stratified_split(&index, (0.7, 0.2, 0.1), 37, Grouping::None).unwrap();
    let folds = make_folds(&index, &split.pool(), 3, 37, Grouping::None).unwrap();

    let path = dir.path().join("plan.csv");
    write_plan(&index, &split, Some(&folds), &path).unwrap();
    let rows = read_plan(&path).unwrap();
    assert_eq!(rows.len(), 32);
    for row in &rows {
        match row.subset {
            Subset::Test => assert!(row.fold.is_none()),
            _ => assert!(row.fold.is_some()),
        }
    }

    let again = dir.path().join("plan2.csv");
    write_plan(&index, &split, Some(&folds), &again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn plan_file_rejects_malformed_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "train,0,x.png\n").unwrap();
    assert!(matches!(read_plan(&path), Err(DataError::BadPlanLine { line: 1, .. })));
    std::fs::write(&path, "nowhere,0,x.png,1\n").unwrap();
    assert!(matches!(read_plan(&path), Err(DataError::BadPlanLine { line: 1, .. })));
}
