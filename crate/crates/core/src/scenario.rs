//! The on-disk scenario document: a polling configuration plus an optional
//! simulation section.

use serde::{Deserialize, Serialize};

use crate::model::PollingConfig;
use crate::sim::SimConfig;

/// Top-level JSON document the CLI consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(flatten)]
    pub config: PollingConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}
