//! Shared fixtures and binary-invocation helpers for integration tests.
#![allow(dead_code)] // each test target uses a different subset

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sefusion_core::data::Image;
use std::path::Path;
use std::process::Output;

/// Write a class directory of noise images whose brightness encodes the
/// class, so small models can separate them.
pub fn write_class(root: &Path, class: &str, count: usize, bright: bool, side: usize, seed: u64) {
    let dir = root.join(class);
    std::fs::create_dir_all(&dir).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let range = if bright { 170u8..=255 } else { 0u8..=85 };
    for i in 0..count {
        let pixels = (0..side * side * 3).map(|_| rng.gen_range(range.clone())).collect();
        let image = Image::new(side, side, pixels).unwrap();
        image.write_png(&dir.join(format!("img{i:04}.png"))).unwrap();
    }
}

/// A two-class dataset tree under `root`.
pub fn write_dataset(root: &Path, positives: usize, negatives: usize, side: usize, seed: u64) {
    write_class(root, "Monkeypox", positives, true, side, seed);
    write_class(root, "Others", negatives, false, side, seed + 1);
}

/// Run the CLI binary with the given arguments.
pub fn run_cli(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_sefusion"))
        .args(args)
        .env("SEFUSION_THREADS", "2")
        .output()
        .expect("binary runs")
}

pub fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

pub fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// Write a config file and return its path.
pub fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.conf");
    std::fs::write(&path, body).unwrap();
    path
}
