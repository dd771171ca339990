//! Run configuration: one JSON document per run, schema-checked before any
//! computation touches the filesystem. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use cvbm::circuit::ShiftRules;
use cvbm::dataset::TargetSpec;
use cvbm::trainer::TrainConfig;
use cvbm::Circuit;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub circuit: Circuit,
    pub target: TargetSpec,
    #[serde(default)]
    pub train: TrainConfig,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub grad_check: GradCheckConfig,
}

/// Settings for the gradient verification command. The shift magnitudes
/// default to small values: the shift rules are exact only in the limit of
/// vanishing shifts, and the verification gate is far tighter than the
/// sampling noise any training-scale shift would have to beat.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradCheckConfig {
    pub shifts: ShiftRules,
    pub fd_step: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig { shifts: ShiftRules::verification(), fd_step: 1e-5 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.circuit.validate().map_err(CliError::validation_from)?;
        self.target.validate().map_err(CliError::validation_from)?;
        self.train.validate().map_err(CliError::validation_from)?;
        if !(self.train.learning_rate > 0.0) {
            return Err(CliError::validation(
                "trainer: learning_rate must be strictly positive in run configs",
            ));
        }
        if self.target.n_dims() != self.circuit.n_modes {
            return Err(CliError::validation(format!(
                "target dimension {} does not match circuit modes {}",
                self.target.n_dims(),
                self.circuit.n_modes
            )));
        }
        if !(self.grad_check.fd_step > 0.0) {
            return Err(CliError::validation("grad_check: fd_step must be positive"));
        }
        self.grad_check.shifts.validate().map_err(CliError::validation_from)?;
        Ok(())
    }
}
