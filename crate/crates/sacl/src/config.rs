//! Resolved run configuration and its hash.

use std::collections::BTreeMap;
use std::path::Path;

use sacl_core::complexity::ScoringConfig;
use sacl_core::imagemetrics::ClaheParams;
use sacl_core::sacl::SaclParams;
use sacl_core::splitter::SplitRatios;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Everything that can influence an artifact. Output paths are left out so
/// that writing the same result elsewhere does not change its hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub generator: String,
    pub seed: u64,
    pub lenient: bool,
    pub scoring: ScoringConfig,
    pub sacl: SaclParams,
    pub split_ratios: SplitRatios,
    pub clahe: ClaheParams,
    pub min_diameter_mm: f64,
    pub bg_ratio: usize,
    /// Subcommand-specific values such as `rho` or `batch_size`.
    pub params: BTreeMap<String, Value>,
    /// Input name to `sha256:<hex>` of the file contents.
    pub inputs: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("parameter values serialize");
        self.params.insert(key.to_owned(), v);
    }

    pub fn add_input(&mut self, name: &str, bytes: &[u8]) {
        self.inputs.insert(name.to_owned(), digest(bytes));
    }

    /// Read a file and record its digest under `name`.
    pub fn read_input(&mut self, name: &str, path: &Path) -> Result<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        self.add_input(name, &bytes);
        Ok(bytes)
    }

    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("run config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

pub fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}
