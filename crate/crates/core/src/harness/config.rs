//! Experiment configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::attack::AttackConfig;
use crate::defense::DefenseSpec;
use crate::error::{Error, Result};
use crate::harness::data::{SyntheticKind, TextureRange};
use crate::network::{Activation, Network};
use crate::risk::{Calibration, DEFAULT_BETA};
use crate::shared_map::{Loss, SharedMapSpec, Target};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkSource {
    Random {
        dims: Vec<usize>,
        activations: Vec<Activation>,
        #[serde(default)]
        seed: u64,
    },
    File(PathBuf),
    Inline(Network),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    HflGradient,
    VflEmbedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub network: NetworkSource,
    pub mode: ModeKind,
    /// VFL cut layer; defaults to the last layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut: Option<usize>,
    /// HFL loss; labels come from the dataset.
    #[serde(default = "default_loss")]
    pub loss: Loss,
    /// SGD epochs on the dataset before the round is observed.
    #[serde(default)]
    pub train_epochs: usize,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
}

fn default_loss() -> Loss {
    Loss::CrossEntropy
}
fn default_lr() -> f64 {
    0.05
}

impl MapConfig {
    /// Untrained shared map; the HFL label is a placeholder until
    /// [`label_target`] is applied per instance.
    pub fn build(&self) -> Result<SharedMapSpec> {
        let network = match &self.network {
            NetworkSource::Random { dims, activations, seed } => Network::random(dims, activations, *seed)?,
            NetworkSource::File(p) => Network::from_json(&fs::read_to_string(p)?)?,
            NetworkSource::Inline(n) => n.clone(),
        };
        match self.mode {
            ModeKind::VflEmbedding => {
                let cut = self.cut.unwrap_or(network.layers().len());
                SharedMapSpec::vfl(network, cut)
            }
            ModeKind::HflGradient => {
                if self.cut.is_some() {
                    return Err(Error::Config("cut applies to vfl_embedding only".into()));
                }
                let label = label_target(self.loss, 0, network.output_dim());
                SharedMapSpec::hfl(network, self.loss, label)
            }
        }
    }
}

/// Loss target for a class label: the index for cross-entropy, a one-hot
/// vector for squared error.
pub fn label_target(loss: Loss, label: usize, outputs: usize) -> Target {
    match loss {
        Loss::CrossEntropy => Target::Class(label.min(outputs.saturating_sub(1))),
        Loss::SquaredError => {
            let mut v = vec![0.0; outputs];
            if let Some(slot) = v.get_mut(label) {
                *slot = 1.0;
            }
            Target::Vector(v)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    SyntheticGaussian {
        m: usize,
    },
    SyntheticGrid {
        m: usize,
        #[serde(default)]
        texture: TextureRange,
    },
    /// `n × m` IVT1 tensor (trailing dims are flattened), with optional
    /// `n`-vector of integer labels.
    TensorFile {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        labels: Option<PathBuf>,
    },
}

impl DatasetConfig {
    pub fn synthetic_kind(&self) -> Option<SyntheticKind> {
        match self {
            DatasetConfig::SyntheticGaussian { .. } => Some(SyntheticKind::Gaussian),
            DatasetConfig::SyntheticGrid { .. } => Some(SyntheticKind::Grid),
            DatasetConfig::TensorFile { .. } => None,
        }
    }

    /// Whether instances are images with values in `[0, 1]`.
    pub fn is_unit_image(&self) -> bool {
        matches!(self, DatasetConfig::SyntheticGrid { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scoring {
    /// Sigmoid of the weighted bound around the calibration point.
    #[default]
    Sigmoid,
    /// Reciprocal of the weighted bound; useful for ranking samples
    /// under one fixed model.
    InverseBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub map: MapConfig,
    pub dataset: DatasetConfig,
    #[serde(default = "default_instances")]
    pub n_instances: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defense: Option<DefenseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackConfig>,
    /// Calibration JSON, or a previous run record carrying one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<PathBuf>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub scoring: Scoring,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Defense strengths (δ or λ) for a sweep; 0 means undefended.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
}

fn default_instances() -> usize {
    1
}
fn default_beta() -> f64 {
    DEFAULT_BETA
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Parses a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&fs::read_to_string(path)?)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let NetworkSource::File(p) = &mut self.map.network {
            fix(p);
        }
        if let DatasetConfig::TensorFile { path, labels } = &mut self.dataset {
            fix(path);
            if let Some(l) = labels {
                fix(l);
            }
        }
        if let Some(c) = &mut self.calibration {
            fix(c);
        }
        if let Some(o) = &mut self.output_dir {
            fix(o);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_instances == 0 {
            return Err(Error::Config("n_instances must be at least 1".into()));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.map.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        let mut files: Vec<&Path> = Vec::new();
        if let NetworkSource::File(p) = &self.map.network {
            files.push(p);
        }
        if let DatasetConfig::TensorFile { path, labels } = &self.dataset {
            files.push(path);
            if let Some(l) = labels {
                files.push(l);
            }
        }
        if let Some(c) = &self.calibration {
            files.push(c);
        }
        for f in files {
            if !f.is_file() {
                return Err(Error::Config(format!("referenced file {} does not exist", f.display())));
            }
        }
        if let Some(d) = &self.defense {
            d.validate()?;
        }
        if let Some(a) = &self.attack {
            a.validate()?;
        }
        if let Some(g) = &self.grid {
            if g.is_empty() {
                return Err(Error::Config("sweep grid is empty".into()));
            }
            if g.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::Config("sweep grid values must be finite and non-negative".into()));
            }
        }
        Ok(())
    }

    pub fn load_calibration(&self) -> Result<Option<Calibration>> {
        let Some(path) = &self.calibration else {
            return Ok(None);
        };
        let value: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
        let cal = match value.get("calibration") {
            Some(inner) => inner.clone(),
            None => value,
        };
        let cal: Calibration = serde_json::from_value(cal).map_err(|e| Error::Config(format!("calibration: {e}")))?;
        Calibration::new(cal.alpha, cal.beta).map(Some)
    }

    /// FNV-1a hash of the config with `output_dir` cleared, so the same
    /// experiment written to two places fingerprints identically.
    pub fn fingerprint(&self) -> String {
        let content = ExperimentConfig { output_dir: None, ..self.clone() };
        let json = serde_json::to_string(&content).unwrap_or_default();
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in json.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

/// Fills keys of `config` that are missing with the values from `flags`,
/// recursing into nested objects. Keys present in `config` win.
pub fn merge_missing(config: &mut Value, flags: &Value) {
    if let (Value::Object(c), Value::Object(f)) = (config, flags) {
        for (k, v) in f {
            match c.get_mut(k) {
                Some(existing) => merge_missing(existing, v),
                None => {
                    c.insert(k.clone(), v.clone());
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn base() -> Value {
        json!({
            "map": {"network": {"random": {"dims": [16, 4], "activations": ["tanh"], "seed": 1}}, "mode": "vfl_embedding"},
            "dataset": {"kind": "synthetic_grid", "m": 16},
            "n_instances": 3
        })
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::from_json(&base().to_string()).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.beta, 5.0);
        assert_eq!(cfg.scoring, Scoring::Sigmoid);
        let spec = cfg.map.build().unwrap();
        assert_eq!(spec.output_dim(), 4);
    }

    #[test]
    fn unknown_fields_and_bad_values_are_config_errors() {
        let mut v = base();
        v["bogus"] = json!(1);
        assert!(matches!(ExperimentConfig::from_json(&v.to_string()), Err(Error::Config(_))));
        let mut v = base();
        v["n_instances"] = json!(0);
        assert!(ExperimentConfig::from_json(&v.to_string()).unwrap().validate().is_err());
        let mut v = base();
        v["dataset"] = json!({"kind": "tensor_file", "path": "/nonexistent/x.ivt"});
        assert!(matches!(ExperimentConfig::from_json(&v.to_string()).unwrap().validate(), Err(Error::Config(_))));
        let mut v = base();
        v["grid"] = json!([]);
        assert!(ExperimentConfig::from_json(&v.to_string()).unwrap().validate().is_err());
    }

    #[test]
    fn config_values_win_over_flags() {
        let mut cfg = json!({"seed": 4, "attack": {"iters": 10}});
        merge_missing(&mut cfg, &json!({"seed": 9, "n_instances": 5, "attack": {"iters": 99, "tv_weight": 0.1}}));
        assert_eq!(cfg, json!({"seed": 4, "n_instances": 5, "attack": {"iters": 10, "tv_weight": 0.1}}));
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = ExperimentConfig::from_json(&base().to_string()).unwrap();
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.output_dir = Some("elsewhere".into());
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.seed = 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn hfl_rejects_cut_and_sets_label_targets() {
        let mut v = base();
        v["map"]["mode"] = json!("hfl_gradient");
        v["map"]["cut"] = json!(1);
        assert!(ExperimentConfig::from_json(&v.to_string()).unwrap().map.build().is_err());
        assert_eq!(label_target(Loss::SquaredError, 1, 3), Target::Vector(vec![0.0, 1.0, 0.0]));
        assert_eq!(label_target(Loss::CrossEntropy, 1, 3), Target::Class(1));
    }
}
