use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable naming the default target model file.
pub const TARGET_ENV: &str = "MAFIA_TARGET";

/// Limits of the switch being compiled for. Exceeding one is a warning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetModel {
    pub name: String,
    pub stages: usize,
    /// Atoms per stage.
    pub width: usize,
    pub stage_memory_bits: u64,
}

impl Default for TargetModel {
    fn default() -> Self {
        TargetModel {
            name: "tofino-like".into(),
            stages: 24,
            width: 63,
            stage_memory_bits: 32 << 20,
        }
    }
}

impl TargetModel {
    pub fn load(path: &Path) -> Result<TargetModel> {
        let text = std::fs::read_to_string(path)?;
        let t: TargetModel =
            serde_json::from_str(&text).map_err(|e| Error::Ir(format!("target {}: {e}", path.display())))?;
        if t.stages == 0 || t.width == 0 {
            return Err(Error::Ir(format!(
                "target {}: stages and width must be positive",
                path.display()
            )));
        }
        Ok(t)
    }

    /// The model named by `MAFIA_TARGET`, or the defaults when it is unset.
    pub fn from_env() -> Result<TargetModel> {
        match std::env::var_os(TARGET_ENV) {
            Some(p) if !p.is_empty() => TargetModel::load(Path::new(&p)),
            _ => Ok(TargetModel::default()),
        }
    }
}
