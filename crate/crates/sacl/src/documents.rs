//! JSON documents written by the CLI. Each carries a schema tag, the
//! resolved run configuration and its hash next to the payload.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};

pub const SPLIT_SCHEMA: &str = "sacl.split/1";
pub const SUBSET_SCHEMA: &str = "sacl.subset/1";
pub const PLAN_SCHEMA: &str = "sacl.plan/1";
pub const BATCHES_SCHEMA: &str = "sacl.batches/1";
pub const TRAIN_LOG_SCHEMA: &str = "sacl.trainlog/1";
pub const FIDELITY_SCHEMA: &str = "sacl.fidelity/1";
pub const INGEST_SCHEMA: &str = "sacl.ingest/1";
pub const REPORT_SCHEMA: &str = "sacl.report/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document<T> {
    pub schema: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub data: T,
}

impl<T: Serialize> Document<T> {
    pub fn new(schema: &str, config: &RunConfig, data: T) -> Self {
        Self {
            schema: schema.to_owned(),
            config_hash: config.hash(),
            config: config.clone(),
            data,
        }
    }

    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("documents serialize");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_text(path, &self.render())
    }
}

pub fn parse_document<T: DeserializeOwned>(bytes: &[u8], schema: &str, path: &Path) -> Result<Document<T>> {
    let doc: Document<T> = serde_json::from_slice(bytes).map_err(|source| Error::Document {
        path: path.to_path_buf(),
        source,
    })?;
    if doc.schema != schema {
        return Err(Error::Invalid(format!(
            "{}: expected a {schema} document, found {}",
            path.display(),
            doc.schema
        )));
    }
    Ok(doc)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
