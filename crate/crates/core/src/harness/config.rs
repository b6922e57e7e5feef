use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::masks::{build_schedule, Direction, DistanceKind, MaskOptions, MaskSchedule};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// One sentence per example.
    #[default]
    Single,
    /// Premise/hypothesis pairs.
    Pair,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// One encoder with the mixed forward/backward head schedule.
    #[default]
    #[serde(rename = "mssan")]
    Mssan,
    /// Two single-direction encoders whose sentence vectors are concatenated.
    #[serde(rename = "mssan_sep")]
    MssanSep,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Mssan => "mssan",
            Variant::MssanSep => "mssan_sep",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mssan" => Ok(Variant::Mssan),
            "mssan_sep" => Ok(Variant::MssanSep),
            other => Err(Error::Config(format!(
                "unknown variant `{other}` (expected mssan or mssan_sep)"
            ))),
        }
    }
}

/// Everything needed to build and train a model. Serialized as one flat JSON object;
/// missing fields take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub encoder: EncoderConfig,
    pub task: Task,
    pub variant: Variant,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Direction masks on; off means every direction mask is all zeros.
    pub use_direction: bool,
    /// Word-distance heads on; off turns them into plain heads.
    pub use_word: bool,
    /// Dependency-distance heads on; off turns them into plain heads.
    pub use_dependency: bool,
    /// Hidden width of the classifier; `None` means `d_e`.
    pub classifier_hidden: Option<usize>,
    /// Class count; `None` infers it from the training labels.
    pub num_classes: Option<usize>,
    /// Dropout rate on the embedded tokens during training.
    pub dropout: f64,
    pub min_count: usize,
    pub lowercase: bool,
    /// Stop once test accuracy reaches this value.
    pub target_accuracy: Option<f64>,
    /// Pretrained embeddings in text format.
    pub embeddings: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            encoder: EncoderConfig::default(),
            task: Task::Single,
            variant: Variant::Mssan,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            weight_decay: 0.0,
            batch_size: 32,
            epochs: 10,
            seed: 0,
            use_direction: true,
            use_word: true,
            use_dependency: true,
            classifier_hidden: None,
            num_classes: None,
            dropout: 0.0,
            min_count: 1,
            lowercase: false,
            target_accuracy: None,
            embeddings: None,
        }
    }
}

impl RunConfig {
    /// Parse a flat JSON config, rejecting unknown keys.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
        let known: BTreeSet<String> = match serde_json::to_value(RunConfig::default())? {
            serde_json::Value::Object(m) => m.keys().cloned().collect(),
            _ => BTreeSet::new(),
        };
        if let Some(key) = obj.keys().find(|k| !known.contains(*k)) {
            return Err(Error::Config(format!("unknown config key `{key}`")));
        }
        let config: RunConfig = serde_json::from_value(value)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.effective_encoder().validate()?;
        let positive = [("lr", self.lr), ("adam_eps", self.adam_eps)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::Config(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be at least 1".into()));
        }
        if self.classifier_hidden == Some(0) {
            return Err(Error::Config("classifier_hidden must be positive".into()));
        }
        if matches!(self.num_classes, Some(c) if c < 2) {
            return Err(Error::Config("num_classes must be at least 2".into()));
        }
        Ok(())
    }

    /// The encoder config after applying the ablation switches to the distance cycle.
    pub fn effective_encoder(&self) -> EncoderConfig {
        let mut enc = self.encoder.clone();
        for kind in &mut enc.distance_cycle {
            let off = match kind {
                DistanceKind::Word => !self.use_word,
                DistanceKind::Dependency => !self.use_dependency,
                DistanceKind::None => false,
            };
            if off {
                *kind = DistanceKind::None;
            }
        }
        enc
    }

    pub fn mask_options(&self) -> MaskOptions {
        MaskOptions {
            use_direction: self.use_direction,
            ..self.encoder.mask_options()
        }
    }

    /// One `(prefix, schedule)` per encoder of the chosen variant.
    pub fn encoder_schedules(&self) -> Result<Vec<(String, MaskSchedule)>> {
        let enc = self.effective_encoder();
        Ok(match self.variant {
            Variant::Mssan => vec![("enc0".into(), build_schedule(enc.n_heads, &enc.distance_cycle)?)],
            Variant::MssanSep => [Direction::Forward, Direction::Backward]
                .into_iter()
                .enumerate()
                .map(|(i, dir)| {
                    Ok((
                        format!("enc{i}"),
                        MaskSchedule::single_direction(dir, enc.n_heads, &enc.distance_cycle)?,
                    ))
                })
                .collect::<Result<_>>()?,
        })
    }

    pub fn classifier_hidden(&self) -> usize {
        self.classifier_hidden.unwrap_or(self.encoder.d_e)
    }
}
