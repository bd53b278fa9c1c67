//! Experiment configuration: one TOML file with `[network]`, `[model]`,
//! `[init]`, `[optimizer]`, `[mpc]` and `[output]` sections, plus the two
//! built-in presets.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::InitConfig;
use crate::model::NeuronParams;
use crate::mpc::MpcConfig;
use crate::netgen::SbmConfig;
use crate::optimizer::OptimizerConfig;

/// `[output]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Also simulate the zero-control baseline from the same initial state.
    pub baseline: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            baseline: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed: network sampling, warm-up current and restarts all draw
    /// from streams of this value.
    #[serde(default)]
    pub seed: u64,
    pub network: SbmConfig,
    #[serde(default)]
    pub model: NeuronParams,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub mpc: MpcConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    N15,
    N30,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::N15 => "n15",
            Preset::N30 => "n30",
        })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n15" => Ok(Preset::N15),
            "n30" => Ok(Preset::N30),
            _ => Err(Error::config(format!(
                "unknown preset {s:?} (expected n15 or n30)"
            ))),
        }
    }
}

impl ExperimentConfig {
    /// The two published experiments. Neuron constants, horizon, switching
    /// time, block probabilities and inhibitory neurons follow the
    /// experiments as described; warm-up range and the optimizer settings are
    /// our own choices (see README).
    pub fn preset(which: Preset) -> Self {
        let network = match which {
            Preset::N15 => SbmConfig {
                n: 15,
                module_sizes: [5, 5, 5],
                p_within: 0.5,
                p_between: 1.0 / 8.0,
                inhibitory_fraction: 0.2,
                inhibitory: Some(vec![6, 9, 13]),
            },
            Preset::N30 => SbmConfig {
                n: 30,
                module_sizes: [10, 10, 10],
                p_within: 0.5,
                p_between: 1.0 / 25.0,
                inhibitory_fraction: 0.2,
                inhibitory: Some(vec![3, 4, 6, 20, 26, 27]),
            },
        };
        Self {
            seed: 0,
            network,
            model: NeuronParams::default(),
            init: InitConfig {
                warmup_steps: 10,
                current_low: 0.0,
                current_high: 12.0,
            },
            optimizer: OptimizerConfig {
                lr: 1.0,
                epsilon: 1e-30,
                bounds: Some([-10.0, 10.0]),
                ..OptimizerConfig::default()
            },
            mpc: MpcConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.network.validate()?;
        self.model.validate()?;
        self.init.validate()?;
        self.optimizer.validate()?;
        self.mpc.validate()?;
        Ok(())
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
                .unwrap_or(0);
            Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: e.message().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("cannot serialize config: {e}")))
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_toml(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for p in [Preset::N15, Preset::N30] {
            let cfg = ExperimentConfig::preset(p);
            cfg.validate().unwrap();
            let text = cfg.to_toml().unwrap();
            let back = ExperimentConfig::from_toml(&text, Path::new("x.toml")).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(p.to_string().parse::<Preset>().unwrap(), p);
        }
    }

    #[test]
    fn minimal_file_uses_defaults() {
        let text = "[network]\nn = 3\nmodule_sizes = [1, 1, 1]\np_within = 0.5\np_between = 0.1\n";
        let cfg = ExperimentConfig::from_toml(text, Path::new("x.toml")).unwrap();
        assert_eq!(cfg.model, NeuronParams::default());
        assert_eq!(cfg.optimizer, OptimizerConfig::default());
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let text = "[network]\nn = 3\nmodule_sizes = [1, 1, 1]\np_within = 0.5\np_between = 0.1\n\n[mpc]\nhorizn = 4\n";
        match ExperimentConfig::from_toml(text, Path::new("x.toml")) {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 8, "{msg}");
                assert!(msg.contains("horizn"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn invalid_probability_is_rejected() {
        let text = "[network]\nn = 3\nmodule_sizes = [1, 1, 1]\np_within = 1.5\np_between = 0.1\n";
        assert!(matches!(
            ExperimentConfig::from_toml(text, Path::new("x.toml")),
            Err(Error::Config(_))
        ));
    }
}
