use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Network, NetworkSpec};
use crate::{Error, Result, Scalar};

pub const NETWORK_FORMAT: &str = "lmad-network";
pub const NETWORK_FORMAT_VERSION: u32 = 1;

/// Serialized form of a [`Network`]: the spec plus the flat parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NetworkDoc<T: Scalar> {
    pub format: String,
    pub version: u32,
    pub spec: NetworkSpec,
    pub param_count: usize,
    pub params: Vec<T>,
}

impl<T: Scalar> From<&Network<T>> for NetworkDoc<T> {
    fn from(net: &Network<T>) -> Self {
        Self {
            format: NETWORK_FORMAT.to_string(),
            version: NETWORK_FORMAT_VERSION,
            spec: net.spec().clone(),
            param_count: net.param_count(),
            params: net.params().to_vec(),
        }
    }
}

impl<T: Scalar> NetworkDoc<T> {
    pub fn into_network(self) -> Result<Network<T>> {
        if self.format != NETWORK_FORMAT {
            return Err(Error::Format(format!(
                "expected format `{NETWORK_FORMAT}`, found `{}`",
                self.format
            )));
        }
        if self.version != NETWORK_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported network version {}",
                self.version
            )));
        }
        if self.param_count != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count,
                got: self.params.len(),
                context: "declared param_count",
            });
        }
        Network::from_params(self.spec, self.params)
    }
}

impl<T: Scalar> Network<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&NetworkDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<NetworkDoc<T>>(text)?.into_network()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
