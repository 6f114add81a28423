//! One module per subcommand, plus loaders shared by the
//! checkpoint-consuming commands.

pub mod analyze;
pub mod ctdt;
pub mod dump_params;
pub mod energy;
pub mod eval;
pub mod gen_data;
pub mod perturb;
pub mod stability;
pub mod train;

use fits_core::data::{load_dataset, Dataset, SpikeRaster};
use fits_core::train::{load_checkpoint, Checkpoint};
use fits_core::{Error, Result};
use serde_json::Value;

/// Reads a checkpoint whose path sits under `key` in the config.
fn checkpoint_from(config: &Value, key: &str) -> Result<Checkpoint> {
    let path = config[key]
        .as_str()
        .ok_or_else(|| Error::Config(format!("$.{key} must be a path string")))?;
    load_checkpoint(path)
}

/// Reads a dataset directory whose path sits under `key` in the config.
fn dataset_from(config: &Value, key: &str) -> Result<Dataset> {
    let dir = config[key]
        .as_str()
        .ok_or_else(|| Error::Config(format!("$.{key} must be a path string")))?;
    load_dataset(dir)
}

/// Selects a named split of a loaded dataset.
fn split_of<'d>(ds: &'d Dataset, split: &str) -> Result<&'d [SpikeRaster]> {
    match split {
        "train" => Ok(&ds.train),
        "val" => Ok(&ds.val),
        other => Err(Error::Config(format!(
            "split must be \"train\" or \"val\", got \"{other}\""
        ))),
    }
}

/// Checks that a checkpoint's network matches the dataset it is being
/// applied to, reporting every mismatch at once.
fn check_compatibility(ck: &Checkpoint, ds: &Dataset) -> Result<()> {
    let mut problems = Vec::new();
    if ck.network.input_channels != ds.manifest.channels {
        problems.push(format!(
            "checkpoint expects {} input channels, dataset has {}",
            ck.network.input_channels, ds.manifest.channels
        ));
    }
    if ck.network.classes < ds.manifest.class_count() {
        problems.push(format!(
            "checkpoint has {} classes, dataset labels reach {}",
            ck.network.classes,
            ds.manifest.class_count()
        ));
    }
    if ck.network.dt != ds.manifest.dt {
        problems.push(format!(
            "checkpoint step {} s does not match dataset binning {} s",
            ck.network.dt, ds.manifest.dt
        ));
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(problems.join("; ")))
    }
}
