//! TOML configuration with one table per stage; every key is optional.
//!
//! ```toml
//! [loss]
//! tau = 1.0
//! [refine]
//! threshold_px = 10.0
//! max_iters = 100
//! [fit]
//! learning_rate = 1e-3
//! [adapt]
//! frame_interval = 1
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adapt::AdaptConfig;
use crate::error::{Error, Result};
use crate::losses::LossConfig;
use crate::refine::RefineConfig;
use crate::weight_fit::OptimizerSettings;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub loss: LossConfig,
    pub refine: RefineConfig,
    pub fit: OptimizerSettings,
    pub adapt: AdaptConfig,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Parse {
            context: "config".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                context: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.refine.validate()?;
        self.fit.validate()?;
        self.adapt.validate()
    }
}
