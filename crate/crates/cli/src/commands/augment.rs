//! Synthesize an augmented dataset directory.

use crate::config::RunConfig;
use crate::{config_err, Result};
use sefusion_core::data::{load_dataset, Image};

/// For every source image, write `variants_per_image` transformed copies
/// as `<stem>_augNN.png` under the same class directory name. The
/// per-image seed is the master seed plus the source's index position.
pub fn cmd_augment(cfg: &RunConfig) -> Result<()> {
    let root = cfg.require_dataset()?;
    let index = load_dataset(root, &cfg.positive_class).map_err(config_err)?;
    for warning in &index.skipped {
        eprintln!("warning: {warning}");
    }
    let spec = cfg.augmentation();

    let mut written = 0usize;
    for (pos, entry) in index.entries.iter().enumerate() {
        let class_dir = entry
            .path
            .parent()
            .and_then(|p| p.file_name())
            .ok_or_else(|| crate::CliError::Config(format!(
                "cannot determine class directory of {}",
                entry.path.display()
            )))?;
        let out_dir = cfg.out_dir.join(class_dir);
        std::fs::create_dir_all(&out_dir)
            .map_err(|e| crate::CliError::Config(format!("{}: {e}", out_dir.display())))?;

        let stem = entry.path.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
        let image = Image::decode_file(&entry.path).map_err(config_err)?;
        let variants = spec.with_seed(cfg.seed.wrapping_add(pos as u64)).variants(&image).map_err(config_err)?;
        for (i, variant) in variants.iter().enumerate() {
            variant
                .write_png(&out_dir.join(format!("{stem}_aug{i:02}.png")))
                .map_err(config_err)?;
            written += 1;
        }
    }
    println!(
        "augmented {} source images into {} variants under {}",
        index.len(),
        written,
        cfg.out_dir.display()
    );
    Ok(())
}
