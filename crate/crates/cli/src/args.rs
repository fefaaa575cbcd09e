//! Flag parsing.
//!
//! Subcommands: train, cv, grid, augment, gradcheck, report.
//! Flags: --config PATH, --seed N, --epochs N, --batch-size N, --lr F,
//! --k N, --input-size HxW, --out DIR, --replay PATH.

use crate::{CliError, Result};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Train,
    Cv,
    Grid,
    Augment,
    GradCheck,
    Report,
}

/// Values given on the command line; they override the config file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub k: Option<usize>,
    pub input_size: Option<(usize, usize)>,
    pub out_dir: Option<PathBuf>,
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub overrides: Overrides,
}

pub const USAGE: &str = "usage: sefusion <train|cv|grid|augment|gradcheck|report> \
[--config PATH] [--seed N] [--epochs N] [--batch-size N] [--lr F] [--k N] \
[--input-size HxW] [--out DIR] [--replay PATH]";

fn parse_input_size(value: &str) -> Result<(usize, usize)> {
    let (h, w) = value
        .split_once(['x', 'X'])
        .ok_or_else(|| CliError::Config(format!("--input-size expects HxW, got {value:?}")))?;
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| CliError::Config(format!("--input-size expects HxW, got {value:?}")))
    };
    Ok((parse(h)?, parse(w)?))
}

pub fn parse<I: IntoIterator<Item = String>>(args: I) -> Result<Invocation> {
    let mut args = args.into_iter();
    let command = match args.next().as_deref() {
        Some("train") => Command::Train,
        Some("cv") => Command::Cv,
        Some("grid") => Command::Grid,
        Some("augment") => Command::Augment,
        Some("gradcheck") => Command::GradCheck,
        Some("report") => Command::Report,
        Some(other) => {
            return Err(CliError::Config(format!("unknown subcommand {other:?}\n{USAGE}")))
        }
        None => return Err(CliError::Config(USAGE.to_string())),
    };

    let mut overrides = Overrides::default();
    while let Some(flag) = args.next() {
        let mut value = |name: &str| {
            args.next()
                .ok_or_else(|| CliError::Config(format!("flag {name} needs a value\n{USAGE}")))
        };
        match flag.as_str() {
            "--config" => overrides.config = Some(PathBuf::from(value("--config")?)),
            "--seed" => {
                overrides.seed = Some(value("--seed")?.parse().map_err(|_| {
                    CliError::Config("--seed expects an unsigned integer".into())
                })?)
            }
            "--epochs" => {
                overrides.epochs = Some(value("--epochs")?.parse().map_err(|_| {
                    CliError::Config("--epochs expects an unsigned integer".into())
                })?)
            }
            "--batch-size" => {
                overrides.batch_size = Some(value("--batch-size")?.parse().map_err(|_| {
                    CliError::Config("--batch-size expects an unsigned integer".into())
                })?)
            }
            "--lr" => {
                overrides.learning_rate = Some(value("--lr")?.parse().map_err(|_| {
                    CliError::Config("--lr expects a number".into())
                })?)
            }
            "--k" => {
                overrides.k = Some(value("--k")?.parse().map_err(|_| {
                    CliError::Config("--k expects an unsigned integer".into())
                })?)
            }
            "--input-size" => overrides.input_size = Some(parse_input_size(&value("--input-size")?)?),
            "--out" => overrides.out_dir = Some(PathBuf::from(value("--out")?)),
            "--replay" => overrides.replay = Some(PathBuf::from(value("--replay")?)),
            other => {
                return Err(CliError::Config(format!("unknown flag {other:?}\n{USAGE}")))
            }
        }
    }
    Ok(Invocation { command, overrides })
}
