pub mod hessian;
pub mod moser;
pub mod probe;
pub mod solve;
pub mod verify;
pub mod viscosity;

use crate::error::CliError;
use crate::output::OutDir;

pub struct Ctx {
    pub out: OutDir,
    pub seed: Option<u64>,
    pub name: &'static str,
}

impl Ctx {
    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::config(format!("`{}` is randomized and needs --seed", self.name)))
    }
}

pub fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::config(format!("{name} must be positive and finite, got {v}")))
    }
}
