use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alignment::AlignConfig;
use crate::citymodel::DEFAULT_HEIGHT;
use crate::synth::SynthConfig;
use crate::Error;

/// Every tunable of the CLI, read from `--config`. Missing keys keep their
/// defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Building height for extrusion, meters.
    pub height: f64,
    pub align: AlignConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            height: DEFAULT_HEIGHT,
            align: AlignConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.height > 0.0 && self.height.is_finite()) {
            return Err(Error::Config(format!("height {} must be positive", self.height)));
        }
        self.align.validate()?;
        self.synth.validate()
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cfg: RunConfig =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_keeps_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"align": {"frames": 4, "weights": {"d_max": 50}}}"#).unwrap();
        assert_eq!(cfg.height, DEFAULT_HEIGHT);
        assert_eq!(cfg.align.frames, 4);
        assert_eq!(cfg.align.weights.d_max, 50.0);
        assert_eq!(cfg.align.weights.point_norm, 10.0);
        assert_eq!(cfg.synth, SynthConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"hieght": 3}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"align": {"frame": 3}}"#).is_err());
    }
}
