use std::path::{Path, PathBuf};

use fkwave::corrector::CorrectorConfig;
use fkwave::family::FamilyConfig;
use fkwave::{Grid, ModelParams, PotentialSpec};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub x_max: f64,
    pub inv_h: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { x_max: 60.0, inv_h: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub a1: f64,
    pub a2: f64,
    pub a_step: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n: 24,
            a1: 0.1,
            a2: 0.9,
            a_step: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    #[serde(rename = "T")]
    pub t: f64,
    pub dt: f64,
    #[serde(rename = "J")]
    pub j: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            t: 40.0,
            dt: 0.005,
            j: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub c: f64,
    pub epsilon: f64,
    pub gain: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub nu: f64,
    pub grid: GridConfig,
    pub wavetrain: TrainConfig,
    pub corrector: CorrectorConfig,
    pub evolve: EvolveConfig,
    pub output_dir: PathBuf,
    pub cache_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            c: 1.0,
            epsilon: 1e-3,
            gain: 1.0,
            b: 0.05,
            nu: -0.5,
            grid: GridConfig::default(),
            wavetrain: TrainConfig::default(),
            corrector: CorrectorConfig::default(),
            evolve: EvolveConfig::default(),
            output_dir: PathBuf::from("fkwave-out"),
            cache_dir: PathBuf::from(".fkwave-cache"),
        }
    }
}

/// Objects every subcommand starts from.
pub struct Validated {
    pub params: ModelParams,
    pub spec: PotentialSpec,
    pub grid: Grid,
    pub family: FamilyConfig,
}

impl RunConfig {
    /// Defaults, then the JSON file, then `key=value` overrides in order.
    pub fn load(path: Option<&Path>, sets: &[String]) -> Result<Self, CliError> {
        let mut value = serde_json::to_value(RunConfig::default()).expect("default config serialises");
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let file: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("invalid JSON in {}: {e}", path.display())))?;
            merge(&mut value, file);
        }
        for s in sets {
            apply_set(&mut value, s)?;
        }
        let mut cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
        if let Ok(dir) = std::env::var("FKWAVE_CACHE_DIR") {
            cfg.cache_dir = PathBuf::from(dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<Validated, CliError> {
        let params = ModelParams::new(self.c)?
            .with_epsilon(self.epsilon)
            .with_b(self.b)
            .with_nu(self.nu);
        if !(self.nu < 0.0) {
            return Err(CliError::Config("nu must be negative".into()));
        }
        let spec = PotentialSpec::standard(self.epsilon, self.gain)?;
        let grid = Grid::new(self.grid.x_max, self.grid.inv_h)?;
        let family = FamilyConfig {
            b: self.b,
            a1: self.wavetrain.a1,
            a2: self.wavetrain.a2,
            ..FamilyConfig::default()
        };
        family.validate(&params)?;
        self.corrector.validate()?;
        if self.wavetrain.n == 0 || !(self.wavetrain.a_step >= 1e-3) {
            return Err(CliError::Config("wavetrain.N must be positive and a_step >= 1e-3".into()));
        }
        if !(self.evolve.t > 0.0 && self.evolve.dt > 0.0 && self.evolve.dt <= 0.01) || self.evolve.j < 10 {
            return Err(CliError::Config("evolve needs T > 0, 0 < dt <= 0.01 and J >= 10".into()));
        }
        Ok(Validated {
            params,
            spec,
            grid,
            family,
        })
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// `a.b.c=value`; the value is read as JSON, or as a string if that fails.
pub fn apply_set(value: &mut Value, set: &str) -> Result<(), CliError> {
    let (key, raw) = set
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects key=value, got {set:?}")))?;
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = value;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = slot
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("{key}: {} is not a section", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        slot = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    Err(CliError::Config(format!("empty key in {set:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_overrides() {
        let cfg = RunConfig::load(None, &["grid.inv_h=32".into(), "corrector.mode=semi_implicit".into()]).unwrap();
        assert_eq!(cfg.grid.inv_h, 32);
        assert_eq!(cfg.corrector.mode, fkwave::corrector::SolveMode::SemiImplicit);
        assert!(RunConfig::load(None, &["grid.bogus=1".into()]).is_err());
        assert!(RunConfig::load(None, &["c.x=1".into()]).is_err());
        assert!(RunConfig::load(None, &["epsilon".into()]).is_err());
    }

    #[test]
    fn validation_rejects_slow_speed() {
        let cfg = RunConfig::load(None, &["c=0.5".into()]).unwrap();
        let err = cfg.validate().err().unwrap();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("speed outside admissible range"));
    }
}
