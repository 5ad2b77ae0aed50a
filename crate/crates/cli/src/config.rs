//! Run configuration: a TOML file of key-value sections, every field
//! overridable by a command-line flag (flags win). Relative paths resolve
//! against the config file's directory. The `STEERAGE_SEED` environment
//! variable overrides the generation seed for CI reproducibility.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use steerage_core::harness::AnswerFormat;
use steerage_core::runtime::GenerationParams;
use steerage_core::transfer::{AdapterKind, DimensionAdapter};

use crate::CliError;

pub const SEED_ENV_VAR: &str = "STEERAGE_SEED";

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_model: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_model: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steering_set: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_split: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_split: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_split: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exemplars: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub dataset_id: String,
    pub answer_format: AnswerFormat,
    pub few_shot: usize,
    /// Path to a system-prompt file, or `builtin:math`, `builtin:gsm8k`,
    /// `builtin:arc-c`, `builtin:toy`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system_prompt: Option<String>,
    pub workers: usize,
    pub centered: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            dataset_id: "dataset".into(),
            answer_format: AnswerFormat::Boxed,
            few_shot: 5,
            system_prompt: None,
            workers: 1,
            centered: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AdapterSection {
    pub kind: AdapterKind,
    pub seed: u64,
}

impl Default for AdapterSection {
    fn default() -> Self {
        Self {
            kind: AdapterKind::Identity,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationSection {
    pub max_new_tokens: usize,
    pub temperature: f32,
    pub seed: u64,
    pub stop_sequences: Vec<String>,
}

impl Default for GenerationSection {
    fn default() -> Self {
        Self {
            max_new_tokens: 16,
            temperature: 0.0,
            seed: 0,
            stop_sequences: Vec::new(),
        }
    }
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSection {
    /// Empty means the default 19-value grid.
    pub values: Vec<f64>,
}

#[derive(Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub paths: PathsConfig,
    pub run: RunSection,
    pub adapter: AdapterSection,
    pub generation: GenerationSection,
    pub grid: GridSection,
}

impl RunConfig {
    /// Parse a config file and resolve its relative paths against the file's
    /// parent directory. Applies the seed environment override.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.apply_env_seed()?;
        Ok(config)
    }

    pub fn apply_env_seed(&mut self) -> Result<(), CliError> {
        if let Ok(value) = std::env::var(SEED_ENV_VAR) {
            let seed: u64 = value.parse().map_err(|_| {
                CliError::usage(format!("{SEED_ENV_VAR}={value} is not a valid seed"))
            })?;
            self.generation.seed = seed;
        }
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&path);
                }
            }
        };
        resolve(&mut self.paths.source_model);
        resolve(&mut self.paths.target_model);
        resolve(&mut self.paths.steering_set);
        resolve(&mut self.paths.train_split);
        resolve(&mut self.paths.val_split);
        resolve(&mut self.paths.test_split);
        resolve(&mut self.paths.exemplars);
        resolve(&mut self.paths.output_dir);
        if let Some(sp) = &mut self.run.system_prompt {
            if !sp.starts_with("builtin:") && Path::new(sp.as_str()).is_relative() {
                *sp = base.join(sp.as_str()).to_string_lossy().into_owned();
            }
        }
    }

    pub fn generation_params(&self) -> GenerationParams {
        GenerationParams {
            max_new_tokens: self.generation.max_new_tokens,
            temperature: self.generation.temperature,
            seed: self.generation.seed,
            stop_sequences: self.generation.stop_sequences.clone(),
        }
    }

    pub fn dimension_adapter(&self, source_dim: usize, target_dim: usize) -> DimensionAdapter {
        match self.adapter.kind {
            AdapterKind::Identity => DimensionAdapter::identity(source_dim),
            AdapterKind::TruncateOrPad => DimensionAdapter::truncate_or_pad(source_dim, target_dim),
            AdapterKind::SeededProjection => {
                DimensionAdapter::seeded_projection(source_dim, target_dim, self.adapter.seed)
            }
        }
    }
}

/// Fail with a usage error unless `path` exists; `what` names the field.
pub fn require_exists(path: &Path, what: &str) -> Result<(), CliError> {
    if !path.exists() {
        return Err(CliError::usage(format!(
            "{what} path does not exist: {}",
            path.display()
        )));
    }
    Ok(())
}

/// Pull a required path out of the config, after flag overrides.
pub fn required_path(p: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    p.clone()
        .ok_or_else(|| CliError::usage(format!("missing required path: {what}")))
}
