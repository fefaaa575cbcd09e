//! Run configuration: defaults, the flat `key=value` config file, and flag
//! overrides (defaults < file < flags).

use crate::args::Overrides;
use crate::{CliError, Result};
use sefusion_core::data::{AugmentOp, AugmentationSpec};
use sefusion_core::model::FusionModelConfig;
use sefusion_core::train::GridSpec;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Which stock backbone pair the model config starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelScale {
    Reference,
    Desk,
}

/// Everything a run needs. Defaults follow the published experiment where
/// one exists: 224x224 input, k = 4, batch 32, learning rate 0.0001,
/// dense blocks 256/0.2 and 128/0.1, three trainable tail layers.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset_root: PathBuf,
    pub out_dir: PathBuf,
    pub positive_class: String,
    pub input_size: (usize, usize),
    pub model_scale: ModelScale,
    /// Squeeze-excitation ratio; `None` keeps the model template's value.
    pub se_ratio: Option<usize>,
    pub dense1_units: usize,
    pub dense1_dropout: f64,
    pub dense2_units: usize,
    pub dense2_dropout: f64,
    pub trainable_tail_layers: usize,
    pub ratios: (f64, f64, f64),
    pub k: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub variants_per_image: usize,
    pub augment_ops: Vec<AugmentOp>,
    pub grid: GridSpec,
    pub replay: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset_root: PathBuf::from("dataset"),
            out_dir: PathBuf::from("runs/out"),
            positive_class: "Monkeypox".into(),
            input_size: (224, 224),
            model_scale: ModelScale::Reference,
            se_ratio: None,
            dense1_units: 256,
            dense1_dropout: 0.2,
            dense2_units: 128,
            dense2_dropout: 0.1,
            trainable_tail_layers: 3,
            ratios: (0.7, 0.2, 0.1),
            k: 4,
            epochs: 50,
            batch_size: 32,
            learning_rate: 0.0001,
            seed: 0,
            variants_per_image: 14,
            augment_ops: AugmentOp::all(),
            grid: GridSpec::default(),
            replay: None,
        }
    }
}

fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("config line {}: expected key=value, got {raw:?}", i + 1))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_list<T, F>(value: &str, what: &str, f: F) -> Result<Vec<T>>
where
    F: Fn(&str) -> Option<T>,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(s).ok_or_else(|| CliError::Config(format!("bad {what} entry {s:?}"))))
        .collect()
}

impl RunConfig {
    /// Apply a config file and then the command-line overrides.
    pub fn load(overrides: &Overrides) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &overrides.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
            cfg.apply_file(&parse_kv(&text)?)?;
        }
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(epochs) = overrides.epochs {
            cfg.epochs = epochs;
        }
        if let Some(batch) = overrides.batch_size {
            cfg.batch_size = batch;
        }
        if let Some(lr) = overrides.learning_rate {
            cfg.learning_rate = lr;
        }
        if let Some(k) = overrides.k {
            cfg.k = k;
        }
        if let Some(size) = overrides.input_size {
            cfg.input_size = size;
        }
        if let Some(out) = &overrides.out_dir {
            cfg.out_dir = out.clone();
        }
        cfg.replay = overrides.replay.clone();
        Ok(cfg)
    }

    fn apply_file(&mut self, map: &BTreeMap<String, String>) -> Result<()> {
        let bad = |key: &str, value: &str| {
            Err(CliError::Config(format!("config key {key}: bad value {value:?}")))
        };
        for (key, value) in map {
            match key.as_str() {
                "dataset_root" => self.dataset_root = PathBuf::from(value),
                "out_dir" => self.out_dir = PathBuf::from(value),
                "positive_class" => self.positive_class = value.clone(),
                "input_size" => match value.split_once('x') {
                    Some((h, w)) => match (h.parse(), w.parse()) {
                        (Ok(h), Ok(w)) => self.input_size = (h, w),
                        _ => return bad(key, value),
                    },
                    None => return bad(key, value),
                },
                "model" => match value.as_str() {
                    "reference" => self.model_scale = ModelScale::Reference,
                    "desk" => self.model_scale = ModelScale::Desk,
                    _ => return bad(key, value),
                },
                "se_ratio" => match value.parse() {
                    Ok(v) => self.se_ratio = Some(v),
                    Err(_) => return bad(key, value),
                },
                "dense1_units" => match value.parse() {
                    Ok(v) => self.dense1_units = v,
                    Err(_) => return bad(key, value),
                },
                "dense1_dropout" => match value.parse() {
                    Ok(v) => self.dense1_dropout = v,
                    Err(_) => return bad(key, value),
                },
                "dense2_units" => match value.parse() {
                    Ok(v) => self.dense2_units = v,
                    Err(_) => return bad(key, value),
                },
                "dense2_dropout" => match value.parse() {
                    Ok(v) => self.dense2_dropout = v,
                    Err(_) => return bad(key, value),
                },
                "trainable_tail_layers" => match value.parse() {
                    Ok(v) => self.trainable_tail_layers = v,
                    Err(_) => return bad(key, value),
                },
                "ratios" => {
                    let parts = parse_list(value, "ratio", |s| s.parse::<f64>().ok())?;
                    if parts.len() != 3 {
                        return bad(key, value);
                    }
                    self.ratios = (parts[0], parts[1], parts[2]);
                }
                "k" => match value.parse() {
                    Ok(v) => self.k = v,
                    Err(_) => return bad(key, value),
                },
                "epochs" => match value.parse() {
                    Ok(v) => self.epochs = v,
                    Err(_) => return bad(key, value),
                },
                "batch_size" => match value.parse() {
                    Ok(v) => self.batch_size = v,
                    Err(_) => return bad(key, value),
                },
                "learning_rate" => match value.parse() {
                    Ok(v) => self.learning_rate = v,
                    Err(_) => return bad(key, value),
                },
                "seed" => match value.parse() {
                    Ok(v) => self.seed = v,
                    Err(_) => return bad(key, value),
                },
                "variants_per_image" => match value.parse() {
                    Ok(v) if v >= 1 => self.variants_per_image = v,
                    _ => return bad(key, value),
                },
                "augment_ops" => {
                    self.augment_ops = parse_list(value, "augment op", AugmentOp::from_name)?;
                    if self.augment_ops.is_empty() {
                        return bad(key, value);
                    }
                }
                "grid_dense1_units" => {
                    self.grid.dense1_units = parse_list(value, "units", |s| s.parse().ok())?
                }
                "grid_dense1_dropout" => {
                    self.grid.dense1_dropout = parse_list(value, "dropout", |s| s.parse().ok())?
                }
                "grid_dense2_units" => {
                    self.grid.dense2_units = parse_list(value, "units", |s| s.parse().ok())?
                }
                "grid_dense2_dropout" => {
                    self.grid.dense2_dropout = parse_list(value, "dropout", |s| s.parse().ok())?
                }
                other => return Err(CliError::Config(format!("unknown config key {other:?}"))),
            }
        }
        Ok(())
    }

    /// The model architecture this run builds.
    pub fn model_config(&self) -> FusionModelConfig {
        let mut cfg = match self.model_scale {
            ModelScale::Reference => FusionModelConfig::reference(self.seed),
            ModelScale::Desk => FusionModelConfig::desk_scale(self.input_size.0, self.seed),
        };
        cfg.input_size = self.input_size;
        if let Some(ratio) = self.se_ratio {
            cfg.se_ratio = ratio;
        }
        cfg.dense1_units = self.dense1_units;
        cfg.dense1_dropout = self.dense1_dropout;
        cfg.dense2_units = self.dense2_units;
        cfg.dense2_dropout = self.dense2_dropout;
        cfg.branch_a.trainable_tail_layers = self.trainable_tail_layers;
        cfg.branch_b.trainable_tail_layers = self.trainable_tail_layers;
        cfg
    }

    /// The augmentation spec with the run's master seed.
    pub fn augmentation(&self) -> AugmentationSpec {
        AugmentationSpec::new(self.augment_ops.clone(), self.variants_per_image, self.seed)
    }

    pub fn require_dataset(&self) -> Result<&Path> {
        if !self.dataset_root.is_dir() {
            return Err(CliError::Config(format!(
                "dataset directory {} does not exist",
                self.dataset_root.display()
            )));
        }
        Ok(&self.dataset_root)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_settings() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.input_size, (224, 224));
        assert_eq!(cfg.k, 4);
        assert_eq!(cfg.batch_size, 32);
        assert_eq!(cfg.learning_rate, 0.0001);
        assert_eq!((cfg.dense1_units, cfg.dense1_dropout), (256, 0.2));
        assert_eq!((cfg.dense2_units, cfg.dense2_dropout), (128, 0.1));
        assert_eq!(cfg.trainable_tail_layers, 3);
    }

    #[test]
    fn file_overrides_defaults_and_flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# comment\nepochs=5\nseed=9\ninput_size=32x32\nmodel=desk\n").unwrap();
        let overrides = Overrides {
            config: Some(path),
            seed: Some(11),
            ..Overrides::default()
        };
        let cfg = RunConfig::load(&overrides).unwrap();
        assert_eq!(cfg.epochs, 5);
        assert_eq!(cfg.seed, 11); // flag beats file
        assert_eq!(cfg.input_size, (32, 32));
        assert_eq!(cfg.model_scale, ModelScale::Desk);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "mystery=1\n").unwrap();
        let overrides = Overrides { config: Some(path.clone()), ..Overrides::default() };
        assert!(RunConfig::load(&overrides).is_err());

        std::fs::write(&path, "epochs=soon\n").unwrap();
        let overrides = Overrides { config: Some(path), ..Overrides::default() };
        assert!(RunConfig::load(&overrides).is_err());
    }

    #[test]
    fn augment_ops_parse_from_names() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "augment_ops=rotation,noise\nvariants_per_image=3\n").unwrap();
        let overrides = Overrides { config: Some(path), ..Overrides::default() };
        let cfg = RunConfig::load(&overrides).unwrap();
        assert_eq!(cfg.augment_ops, vec![AugmentOp::Rotation, AugmentOp::Noise]);
        assert_eq!(cfg.variants_per_image, 3);
    }
}
