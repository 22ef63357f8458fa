use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persist;

/// Optional JSON defaults for every command. Command-line flags take
/// precedence; unset entries fall back to built-in defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub out: Option<PathBuf>,
    pub world: Option<PathBuf>,
    pub attributes: Option<PathBuf>,
    pub shifter: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub population: Option<usize>,
    pub seed: Option<u64>,
    pub gamma: Option<f64>,
    pub gammas: Option<Vec<f64>>,
    pub iterations: Option<usize>,
    pub beta: Option<Vec<f64>>,
    pub beta0: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::invalid(format!(
                "config file {} does not exist",
                path.display()
            )));
        }
        persist::read_json(path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        persist::write_json(path, self)
    }
}
