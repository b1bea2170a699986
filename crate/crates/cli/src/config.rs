//! JSON run configuration. A config file is one object holding the common
//! keys (`seed`, `threads`, `out`, optionally `subcommand`) next to the keys
//! of the chosen subcommand, which mirror its flags in snake case. Flags win
//! over the file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use cma_core::{FamilyKind, SolutionFamily};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::CliError;
use crate::output::read_to_string;

/// Field-wise merge where `self` (the flags) takes precedence over `file`.
pub trait Overlay {
    fn overlay(self, file: Self) -> Self;
}

#[macro_export]
macro_rules! overlay {
    ($t:ty { $($f:ident),* $(,)? }) => {
        impl $crate::config::Overlay for $t {
            fn overlay(self, file: Self) -> Self {
                Self { $($f: self.$f.or(file.$f)),* }
            }
        }
    };
}

/// A family given by kind alone or as a full JSON descriptor.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum FamilyArg {
    Kind(FamilyKind),
    Descriptor(SolutionFamily),
}

impl FromStr for FamilyArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim_start().starts_with('{') {
            serde_json::from_str(s).map_err(|e| format!("bad family descriptor: {e}"))
        } else {
            s.parse::<FamilyKind>().map(FamilyArg::Kind).map_err(|e| e.to_string())
        }
    }
}

/// Builds the family from the merged `family`, `dim` and `eps` options.
pub fn resolve_family(
    family: Option<&FamilyArg>,
    dim: Option<usize>,
    eps: Option<f64>,
    default_kind: FamilyKind,
    default_eps: f64,
) -> Result<SolutionFamily, CliError> {
    let (kind, base_dim, base_eps) = match family {
        Some(FamilyArg::Descriptor(f)) => (f.kind(), Some(f.dim()), f.eps()),
        Some(FamilyArg::Kind(k)) => (*k, None, default_eps),
        None => (default_kind, None, default_eps),
    };
    let dim = dim.or(base_dim).unwrap_or(match kind {
        FamilyKind::PogorelovEpsN => 3,
        _ => 2,
    });
    let eps = eps.unwrap_or(if kind.has_eps() { base_eps } else { 0.0 });
    SolutionFamily::new(kind, dim, eps).map_err(CliError::config)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Common {
    pub subcommand: Option<String>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Splits a config file into the common keys and the subcommand options.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>, subcommand: &str) -> Result<(Common, T), CliError> {
    let Some(path) = path else {
        return Ok((Common::default(), T::default()));
    };
    let text = read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let serde_json::Value::Object(mut map) = value else {
        return Err(CliError::config("config file must hold a JSON object"));
    };
    let mut common = serde_json::Map::new();
    for key in ["subcommand", "seed", "threads", "out"] {
        if let Some(v) = map.remove(key) {
            common.insert(key.to_string(), v);
        }
    }
    let common: Common = serde_json::from_value(common.into())?;
    if let Some(s) = &common.subcommand {
        if s != subcommand {
            return Err(CliError::config(format!("config is for `{s}`, not `{subcommand}`")));
        }
    }
    let opts: T = serde_json::from_value(map.into())
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    Ok((common, opts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_arg_forms() {
        assert_eq!("blocki".parse::<FamilyArg>().unwrap(), FamilyArg::Kind(FamilyKind::Blocki));
        let d: FamilyArg = r#"{"kind":"pogorelov-n","dim":4,"eps":0.5}"#.parse().unwrap();
        let f = resolve_family(Some(&d), None, None, FamilyKind::PogorelovEps2, 0.0).unwrap();
        assert_eq!(f, SolutionFamily::pogorelov_n(4, 0.5));
        let f = resolve_family(Some(&d), None, Some(0.1), FamilyKind::PogorelovEps2, 0.0).unwrap();
        assert_eq!(f.eps(), 0.1);
        assert!("nope".parse::<FamilyArg>().is_err());
        assert!(resolve_family(None, Some(3), None, FamilyKind::PogorelovEps2, 0.0).is_err());
    }
}
