//! TOML configuration files for dataset generation and training.
//!
//! Schema errors name the offending key path, e.g. `train.loss.ssim_weight`.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dataset::ExportConfig;
pub use crate::decompose::AbConfig;
use crate::error::{Error, Result};
use crate::objective::LossConfig;
use crate::rig::RigSpec;
use crate::scene::SceneConfig;
use crate::trainer::{InitConfig, TrainConfig};

/// Parses TOML into `T`, reporting the key path of the first schema error.
pub fn parse_toml<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = toml::Deserializer::new(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        let inner = e.into_inner();
        Error::Config {
            key: if key == "." { String::new() } else { key },
            message: inner.message().trim().to_string(),
        }
    })
}

pub fn read_toml<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_toml(&text)
}

fn section(key: &str, r: Result<()>) -> Result<()> {
    r.map_err(|e| match e {
        Error::InvalidInput(message) => Error::Config {
            key: key.to_string(),
            message,
        },
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub time_steps: usize,
    #[serde(default)]
    pub test: Vec<usize>,
    #[serde(default)]
    pub val: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub rig: RigSpec,
    #[serde(default)]
    pub scene: SceneConfig,
    pub dataset: DatasetSection,
    #[serde(default)]
    pub export: ExportConfig,
}

impl GenerateConfig {
    pub fn validate(&self) -> Result<()> {
        section("rig", self.rig.validate())?;
        section("scene", self.scene.validate())?;
        if self.dataset.time_steps == 0 {
            return Err(Error::Config {
                key: "dataset.time_steps".into(),
                message: "must be at least 1".into(),
            });
        }
        section("export", self.export.validate())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = parse_toml(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainFileConfig {
    pub init: InitConfig,
    pub train: TrainConfig,
    pub ab: AbConfig,
}

impl TrainFileConfig {
    pub fn validate(&self) -> Result<()> {
        section("init", self.init.validate())?;
        section("train", self.train.validate())?;
        section("ab", self.ab.validate())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = parse_toml(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn loss(&self) -> &LossConfig {
        &self.train.loss
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rig::RigLayout;

    const GENERATE: &str = r#"
[rig]
width = 64
height = 64
fov_x_deg = 50.0

[rig.layout]
kind = "hemisphere"
count = 20
radius = 3.0

[scene]
seed = 7

[dataset]
time_steps = 8
test = [0, 5, 10, 15]
val = [1]

[export]
colmap = "surface"
"#;

    #[test]
    fn generate_config_parses() {
        let c = GenerateConfig::from_toml(GENERATE).unwrap();
        assert_eq!(c.rig.layout, RigLayout::Hemisphere { count: 20, radius: 3.0 });
        assert_eq!(c.scene.seed, 7);
        assert_eq!(c.scene.static_count, SceneConfig::default().static_count);
        assert_eq!(c.dataset.test, vec![0, 5, 10, 15]);
    }

    #[test]
    fn schema_errors_carry_key_paths() {
        let bad = GENERATE.replace("radius = 3.0", "radius = \"far\"");
        match GenerateConfig::from_toml(&bad) {
            // Tagged enums are buffered before dispatch, so the path stops at the table.
            Err(Error::Config { key, message }) => {
                assert_eq!(key, "rig.layout");
                assert!(message.contains("far"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let bad = GENERATE.replace("seed = 7", "seed = 7\nsead = 1");
        match GenerateConfig::from_toml(&bad) {
            Err(Error::Config { key, message }) => {
                assert_eq!(key, "scene.sead");
                assert!(message.contains("sead"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let bad = GENERATE.replace("time_steps = 8", "time_steps = 0");
        match GenerateConfig::from_toml(&bad) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "dataset.time_steps"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn train_config_defaults_and_overrides() {
        let c = TrainFileConfig::from_toml("[train]\niters_init = 5\n[train.lr]\nopacity_logit = 0.1\n[ab.vote]\nquorum = 0.8\n").unwrap();
        assert_eq!(c.train.iters_init, 5);
        assert_eq!(c.train.iters_warm, TrainConfig::default().iters_warm);
        assert_eq!(c.train.lr.opacity_logit, 0.1);
        assert_eq!(c.ab.vote.quorum, 0.8);
        match TrainFileConfig::from_toml("[train.loss]\nssim_weight = \"x\"\n") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "train.loss.ssim_weight"),
            other => panic!("{other:?}"),
        }
        match TrainFileConfig::from_toml("[init]\nalpha0 = 2.0\n") {
            Err(Error::Config { key, .. }) => assert_eq!(key, "init"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn configs_echo_through_json() {
        let c = GenerateConfig::from_toml(GENERATE).unwrap();
        let v = serde_json::to_value(&c).unwrap();
        let back: GenerateConfig = serde_json::from_value(v).unwrap();
        assert_eq!(back, c);
    }
}
