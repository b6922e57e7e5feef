use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff::{Tape, Tensor};
use crate::data::{build_vocab, load_conllu, pair_examples, DepSentence};
use crate::error::{Error, Result};

use super::config::{RunConfig, Task, Variant};
use super::model::{Example, Model};
use super::optim::Adam;

/// Wrap parsed sentences as examples for `task`. Every example must carry a label.
pub fn examples_from_sentences(sentences: Vec<DepSentence>, task: Task) -> Result<Vec<Example>> {
    let examples: Vec<Example> = match task {
        Task::Single => sentences.into_iter().map(Example::Single).collect(),
        Task::Pair => pair_examples(sentences)?.into_iter().map(Example::Pair).collect(),
    };
    if let Some(i) = examples.iter().position(|e| e.label().is_none()) {
        return Err(Error::Config(format!("example {i} has no label")));
    }
    Ok(examples)
}

pub fn load_examples(path: &Path, task: Task) -> Result<Vec<Example>> {
    examples_from_sentences(load_conllu(path)?, task)
}

fn labels(examples: &[&Example]) -> Result<Vec<usize>> {
    examples
        .iter()
        .enumerate()
        .map(|(i, e)| {
            e.label()
                .ok_or_else(|| Error::Config(format!("example {i} has no label")))
        })
        .collect()
}

fn argmax_rows(t: &Tensor) -> Vec<usize> {
    (0..t.rows())
        .map(|r| {
            t.row(r)
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |best, (i, &x)| if x > best.1 { (i, x) } else { best },
                )
                .0
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochMetrics {
    /// 1-based.
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub test_loss: Option<f64>,
    /// Mean wall-clock time of a training step (forward, backward, update).
    pub ms_per_batch: f64,
    pub batches: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ParamCounts {
    pub encoder: usize,
    pub encoder_and_classifier: usize,
    pub total: usize,
}

impl ParamCounts {
    pub fn of(model: &Model) -> Self {
        let encoder = model.encoder_param_count();
        ParamCounts {
            encoder,
            encoder_and_classifier: encoder + model.classifier_param_count(),
            total: model.total_param_count(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub variant: Variant,
    pub sentence_dim: usize,
    pub params: ParamCounts,
    pub epochs: Vec<EpochMetrics>,
}

impl Metrics {
    pub fn last(&self) -> Option<&EpochMetrics> {
        self.epochs.last()
    }

    pub fn final_test_accuracy(&self) -> Option<f64> {
        self.last().and_then(|e| e.test_accuracy)
    }
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
    pub predictions: Vec<usize>,
    pub logits: Tensor,
}

/// Accuracy and mean cross-entropy over `examples`, in batches of the configured size.
pub fn evaluate(model: &Model, examples: &[Example]) -> Result<Evaluation> {
    if examples.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let mut rows = Vec::new();
    let mut loss_sum = 0.0;
    for chunk in examples.chunks(model.config().batch_size) {
        let refs: Vec<&Example> = chunk.iter().collect();
        let targets = labels(&refs)?;
        let mut tape = Tape::new();
        let logits = model.logits(&mut tape, &refs, None)?;
        let loss = tape.cross_entropy(logits, &targets)?;
        loss_sum += tape.value(loss).item()? * chunk.len() as f64;
        rows.push(tape.value(logits).clone());
    }
    let logits = Tensor::concat_rows(&rows.iter().collect::<Vec<_>>())?;
    let predictions = argmax_rows(&logits);
    let correct = predictions
        .iter()
        .zip(examples)
        .filter(|(p, e)| e.label() == Some(**p))
        .count();
    Ok(Evaluation {
        accuracy: correct as f64 / examples.len() as f64,
        loss: loss_sum / examples.len() as f64,
        predictions,
        logits,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub loss: f64,
    pub correct: usize,
}

/// Owns a model and its optimizer state; runs seeded training steps and epochs.
pub struct Trainer {
    model: Model,
    adam: Adam,
    shuffle_rng: ChaCha8Rng,
    dropout_rng: ChaCha8Rng,
    epoch: usize,
    step: usize,
}

impl Trainer {
    pub fn new(model: Model) -> Self {
        let c = model.config();
        let adam = Adam::new(c.lr, c.beta1, c.beta2, c.adam_eps, c.weight_decay);
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(c.seed);
        shuffle_rng.set_stream(1);
        let mut dropout_rng = ChaCha8Rng::seed_from_u64(c.seed);
        dropout_rng.set_stream(2);
        Trainer {
            model,
            adam,
            shuffle_rng,
            dropout_rng,
            epoch: 0,
            step: 0,
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    /// One forward, backward and Adam update on `batch`.
    pub fn step(&mut self, batch: &[&Example]) -> Result<StepOutcome> {
        let targets = labels(batch)?;
        let mut tape = Tape::new();
        let rate = self.model.config().dropout;
        let logits = self
            .model
            .logits(&mut tape, batch, Some((rate, &mut self.dropout_rng)))?;
        let loss = tape.cross_entropy(logits, &targets)?;
        let loss_value = tape.value(loss).item()?;
        let diverged = |tensor: String| Error::Diverged {
            epoch: self.epoch + 1,
            step: self.step,
            tensor,
        };
        if !loss_value.is_finite() {
            return Err(diverged(tape.first_non_finite().unwrap_or_else(|| "loss".into())));
        }
        let grads = tape.backward(loss, self.model.store())?;
        if let Some((name, _)) = grads.iter().find(|(_, g)| !g.all_finite()) {
            return Err(diverged(format!("gradient of parameter `{name}`")));
        }
        let correct = argmax_rows(tape.value(logits))
            .iter()
            .zip(&targets)
            .filter(|(p, t)| p == t)
            .count();
        self.adam.step(self.model.store_mut(), &grads)?;
        self.step += 1;
        Ok(StepOutcome {
            loss: loss_value,
            correct,
        })
    }

    /// One shuffled pass over `train`, then evaluation on `test` if given.
    pub fn epoch(&mut self, train: &[Example], test: Option<&[Example]>) -> Result<EpochMetrics> {
        if train.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut self.shuffle_rng);
        let (mut loss_sum, mut correct, mut ms, mut batches) = (0.0, 0, 0.0, 0);
        for chunk in order.chunks(self.model.config().batch_size) {
            let batch: Vec<&Example> = chunk.iter().map(|&i| &train[i]).collect();
            let start = Instant::now();
            let out = self.step(&batch)?;
            ms += start.elapsed().as_secs_f64() * 1e3;
            loss_sum += out.loss * batch.len() as f64;
            correct += out.correct;
            batches += 1;
        }
        self.epoch += 1;
        let eval = test.map(|t| evaluate(&self.model, t)).transpose()?;
        Ok(EpochMetrics {
            epoch: self.epoch,
            loss: loss_sum / train.len() as f64,
            train_accuracy: correct as f64 / train.len() as f64,
            test_accuracy: eval.as_ref().map(|e| e.accuracy),
            test_loss: eval.as_ref().map(|e| e.loss),
            ms_per_batch: ms / batches as f64,
            batches,
        })
    }
}

/// Build a fresh model for `config`, with the vocabulary taken from `train` and the
/// class count from the config or the largest label seen.
pub fn build_model(config: &RunConfig, train: &[Example], test: &[Example]) -> Result<Model> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let vocab = build_vocab(
        train.iter().flat_map(Example::sentences),
        config.min_count,
        config.lowercase,
    )?;
    let max_label = train.iter().chain(test).filter_map(Example::label).max().unwrap_or(0);
    let num_classes = match config.num_classes {
        Some(c) if c <= max_label => {
            return Err(Error::Config(format!("label {max_label} out of range for {c} classes")));
        }
        Some(c) => c,
        None => (max_label + 1).max(2),
    };
    Model::new(config.clone(), vocab, num_classes)
}

/// Train for `config.epochs` epochs (stopping early at `target_accuracy`), calling
/// `on_epoch` after each one.
pub fn train_with(
    config: &RunConfig,
    train: &[Example],
    test: &[Example],
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<(Model, Metrics)> {
    let model = build_model(config, train, test)?;
    let mut metrics = Metrics {
        variant: config.variant,
        sentence_dim: model.sentence_dim(),
        params: ParamCounts::of(&model),
        epochs: Vec::new(),
    };
    let mut trainer = Trainer::new(model);
    let test = (!test.is_empty()).then_some(test);
    for _ in 0..config.epochs {
        let m = trainer.epoch(train, test)?;
        on_epoch(&m);
        let done = matches!((config.target_accuracy, m.test_accuracy), (Some(t), Some(a)) if a >= t);
        metrics.epochs.push(m);
        if done {
            break;
        }
    }
    Ok((trainer.into_model(), metrics))
}

pub fn train(config: &RunConfig, train: &[Example], test: &[Example]) -> Result<(Model, Metrics)> {
    train_with(config, train, test, |_| {})
}
