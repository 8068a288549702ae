//! Optional JSON config file. Values here sit below flags and environment
//! variables, which clap resolves before the file is consulted.

use std::path::Path;

use serde::{Deserialize, Serialize};

use sasrate::datagen::GenerationConfig;

use crate::error::CliError;
use crate::store::read_json;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub levels: Option<u32>,
    #[serde(default)]
    pub zero_tol: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub timeout_ms: Option<u64>,
    #[serde(default)]
    pub max_in_flight: Option<usize>,
    #[serde(default)]
    pub translator_endpoint: Option<String>,
    #[serde(default)]
    pub generation: Option<GenerationConfig>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => read_json(p).map_err(|e| CliError::Usage(format!("config: {e}"))),
        }
    }

    pub fn generation(&self) -> GenerationConfig {
        self.generation.clone().unwrap_or_default()
    }
}
