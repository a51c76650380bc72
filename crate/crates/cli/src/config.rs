//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trajfrac::ensemble::ExperimentSpec;
use trajfrac::scaling::{DEFAULT_MIN_L, DEFAULT_Q0};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid experiment: {0}")]
    Invalid(#[from] trajfrac::Error),
    #[error("cannot serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_min_l() -> f64 {
    DEFAULT_MIN_L
}

fn default_q0() -> f64 {
    DEFAULT_Q0
}

fn default_time_points() -> usize {
    40
}

/// Where and how results are written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory, relative to the config file unless absolute.
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Smallest length entering the exponent fits.
    #[serde(default = "default_min_l")]
    pub min_l: f64,
    /// Generalized dimension index used for `D_0`.
    #[serde(default = "default_q0")]
    pub q0: f64,
    /// Number of logarithmically spaced record times for `--time-series`.
    #[serde(default = "default_time_points")]
    pub time_points: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            min_l: default_min_l(),
            q0: default_q0(),
            time_points: default_time_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ConfigDocument {
    /// Parses and validates a config document.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let doc: ConfigDocument = toml::from_str(text)?;
        doc.experiment.validate()?;
        if !(doc.output.min_l >= 0.0) || !(doc.output.q0 > 0.0) {
            return Err(ConfigError::Invalid(trajfrac::Error::InvalidParameter(
                "output.min_l must be nonnegative and output.q0 positive".into(),
            )));
        }
        Ok(doc)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    /// Output directory resolved against the directory holding the config.
    pub fn output_dir(&self, config_path: &Path) -> PathBuf {
        if self.output.dir.is_absolute() {
            self.output.dir.clone()
        } else {
            config_path
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join(&self.output.dir)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use trajfrac::ensemble::{Dynamics, RateRule, StepRule};
    use trajfrac::qdyn::MeasurementScheme;

    const MINIMAL: &str = r#"
[experiment]
dynamics = "single_shot"
lengths = [100]
n_traj = 100
master_seed = 7
"#;

    #[test]
    fn minimal_defaults() {
        let doc = ConfigDocument::parse(MINIMAL).unwrap();
        let e = &doc.experiment;
        assert_eq!(e.dynamics, Dynamics::SingleShot);
        assert_eq!(e.scheme, MeasurementScheme::Projective);
        assert_eq!(e.rate, RateRule::PerSize { c: 1.0 });
        assert_eq!(e.q_grid.len(), 17);
        assert_eq!(e.l_box, vec![1]);
        assert_eq!(doc.output, OutputConfig::default());
    }

    #[test]
    fn nested_tables() {
        let text = r#"
[experiment]
dynamics = "quantum_haar"
lengths = [32, 64]
n_traj = 10
master_seed = "18446744073709551615"
boundary = "pbc"
scheme = { kind = "generalized", error_rate = 0.5 }
rate = { rule = "absolute", p = 0.02 }
steps = { rule = "linear", factor = 2.0 }

[output]
dir = "/tmp/x"
min_l = 32
"#;
        let doc = ConfigDocument::parse(text).unwrap();
        assert_eq!(doc.experiment.master_seed, u64::MAX);
        assert_eq!(doc.experiment.scheme, MeasurementScheme::Generalized { error_rate: 0.5 });
        assert_eq!(doc.experiment.steps, Some(StepRule::Linear { factor: 2.0 }));
        assert_eq!(doc.output.min_l, 32.0);
        assert_eq!(ConfigDocument::parse(&doc.to_toml().unwrap()).unwrap(), doc);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ConfigDocument::parse(&format!("{MINIMAL}typo = 1\n")).is_err());
        let text = MINIMAL.replace("single_shot", "single_shots");
        assert!(ConfigDocument::parse(&text).is_err());
        assert!(ConfigDocument::parse(&format!("{MINIMAL}[output]\nfoo = 1\n")).is_err());
        let text = format!("{MINIMAL}scheme = {{ kind = \"projective\", error_rate = 0.1 }}\n");
        assert!(ConfigDocument::parse(&text).is_err());
    }

    #[test]
    fn invalid_experiments_rejected() {
        assert!(ConfigDocument::parse(&MINIMAL.replace("[100]", "[1]")).is_err());
        assert!(ConfigDocument::parse(&MINIMAL.replace("n_traj = 100", "n_traj = 0")).is_err());
        assert!(ConfigDocument::parse(&MINIMAL.replace("= 7", "= -7")).is_err());
    }
}
