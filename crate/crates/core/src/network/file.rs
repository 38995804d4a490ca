//! JSON network description.
//!
//! ```json
//! {
//!   "vertices": [0, 1, 2],
//!   "edges": [
//!     { "id": 0, "tail": 0, "head": 1, "length": 1.0 },
//!     { "id": 1, "tail": 1, "head": 2, "length": 1.0 }
//!   ],
//!   "distribution": {
//!     "1": { "incoming": [0], "outgoing": [1], "rows": [[1.0]] }
//!   }
//! }
//! ```
//!
//! `rows[r][c]` is the fraction of traffic from `incoming[r]` to
//! `outgoing[c]`. `distribution` may omit any vertex; unknown keys are
//! rejected everywhere.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build_network, MetricNetwork, NetworkError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub vertices: Vec<u32>,
    pub edges: Vec<EdgeSpec>,
    #[serde(default)]
    pub distribution: BTreeMap<u32, DistributionSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub id: u32,
    pub tail: u32,
    pub head: u32,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    pub incoming: Vec<u32>,
    pub outgoing: Vec<u32>,
    pub rows: Vec<Vec<f64>>,
}

impl MetricNetwork {
    pub fn from_json(text: &str) -> Result<Self, NetworkError> {
        let spec: NetworkSpec = serde_json::from_str(text)?;
        build_network(&spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_spec()).expect("network spec serializes")
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, NetworkError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), NetworkError> {
        fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}
