//! Whole-model gradient check: every parameter's analytic gradient against central
//! finite differences of the classifier loss.

use std::fmt;

use serde::Serialize;

use crate::autodiff::Tape;
use crate::data::build_vocab;
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::masks::DistanceKind;

use super::bench::random_sentences;
use super::config::{RunConfig, Task, Variant};
use super::model::{Example, Model};
use crate::data::PairExample;

pub const MAX_D_E: usize = 16;
pub const MAX_LEN: usize = 6;

/// Relative error `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamCheck {
    pub name: String,
    pub numel: usize,
    pub max_relative_error: f64,
    pub max_absolute_error: f64,
    /// Entries whose difference quotient was retaken at a smaller step because
    /// the default step crossed a relu, abs or max kink.
    pub refined: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub case: String,
    pub step: f64,
    pub tolerance: f64,
    pub floor: f64,
    pub entries: Vec<ParamCheck>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.max_relative_error < self.tolerance)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ParamCheck> {
        self.entries
            .iter()
            .filter(|e| e.max_relative_error.is_nan() || e.max_relative_error >= self.tolerance)
    }

    pub fn worst(&self) -> Option<&ParamCheck> {
        self.entries
            .iter()
            .max_by(|a, b| a.max_relative_error.total_cmp(&b.max_relative_error))
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "case {}: {}", self.case, if self.passed() { "PASS" } else { "FAIL" })?;
        for e in &self.entries {
            let mark = if e.max_relative_error < self.tolerance {
                "ok"
            } else {
                "FAIL"
            };
            writeln!(
                f,
                "  {mark:4} {:44} n={:<5} rel={:.3e} abs={:.3e}",
                e.name, e.numel, e.max_relative_error, e.max_absolute_error
            )?;
            if e.refined > 0 {
                writeln!(f, "       {} entries retaken at a smaller step near a kink", e.refined)?;
            }
        }
        Ok(())
    }
}

/// Hook that may tamper with one parameter's analytic gradient before comparison.
pub type Corrupt<'a> = &'a dyn Fn(&str, &mut [f64]);

/// Settings for [`gradcheck_model`].
#[derive(Clone, Copy, Debug)]
pub struct CheckSettings {
    pub step: f64,
    pub tolerance: f64,
    pub floor: f64,
    /// Shrink the step tenfold (down to `min_step`) while `θ ± step` lands on a
    /// different branch of a non-smooth op than `θ`.
    pub refine_kinks: bool,
    pub min_step: f64,
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings {
            step: 1e-4,
            tolerance: 1e-3,
            floor: 1e-6,
            refine_kinks: true,
            min_step: 1e-6,
        }
    }
}

fn loss(model: &Model, examples: &[&Example], targets: &[usize]) -> Result<(f64, Vec<usize>)> {
    let mut tape = Tape::new();
    let logits = model.logits(&mut tape, examples, None)?;
    let l = tape.cross_entropy(logits, targets)?;
    Ok((tape.value(l).item()?, tape.branch_pattern()))
}

fn set(model: &mut Model, name: &str, i: usize, value: f64) {
    model.store_mut().get_mut(name).expect("listed name").data_mut()[i] = value;
}

/// Compare analytic and central-difference gradients of the mean cross-entropy on
/// `examples` for every parameter. `corrupt(name, grad)` may tamper with the
/// analytic gradients before comparison.
pub fn gradcheck_model(
    model: &mut Model,
    examples: &[Example],
    settings: CheckSettings,
    case: &str,
    corrupt: Option<Corrupt<'_>>,
) -> Result<GradcheckReport> {
    let refs: Vec<&Example> = examples.iter().collect();
    let targets: Vec<usize> = refs
        .iter()
        .map(|e| {
            e.label()
                .ok_or_else(|| Error::Config("gradcheck example without label".into()))
        })
        .collect::<Result<_>>()?;
    let mut tape = Tape::new();
    let logits = model.logits(&mut tape, &refs, None)?;
    let l = tape.cross_entropy(logits, &targets)?;
    let mut grads = tape.backward(l, model.store())?;
    let base = tape.branch_pattern();
    if let Some(corrupt) = corrupt {
        for (name, g) in grads.iter_mut() {
            corrupt(name, g.data_mut());
        }
    }

    let names: Vec<String> = model.store().names().map(String::from).collect();
    let mut entries = Vec::with_capacity(names.len());
    for name in names {
        let g = &grads[&name];
        let numel = g.numel();
        let (mut max_rel, mut max_abs, mut refined) = (0.0f64, 0.0f64, 0);
        for i in 0..numel {
            let orig = model.store().get(&name).expect("listed name").data()[i];
            let mut h = settings.step;
            let numeric = loop {
                set(model, &name, i, orig + h);
                let (plus, pp) = loss(model, &refs, &targets)?;
                set(model, &name, i, orig - h);
                let (minus, pm) = loss(model, &refs, &targets)?;
                set(model, &name, i, orig);
                let smooth = pp == base && pm == base;
                if smooth || !settings.refine_kinks || h / 10.0 < settings.min_step {
                    break (plus - minus) / (2.0 * h);
                }
                h /= 10.0;
            };
            if h < settings.step {
                refined += 1;
            }
            let analytic = g.data()[i];
            max_abs = max_abs.max((analytic - numeric).abs());
            let rel = relative_error(analytic, numeric, settings.floor);
            max_rel = if rel.is_nan() { f64::INFINITY } else { max_rel.max(rel) };
        }
        entries.push(ParamCheck {
            name,
            numel,
            max_relative_error: max_rel,
            max_absolute_error: max_abs,
            refined,
        });
    }
    Ok(GradcheckReport {
        case: case.to_string(),
        step: settings.step,
        tolerance: settings.tolerance,
        floor: settings.floor,
        entries,
    })
}

/// One small end-to-end configuration to check.
#[derive(Clone, Debug)]
pub struct GradcheckCase {
    pub name: String,
    pub config: RunConfig,
    pub len: usize,
    pub n_examples: usize,
}

impl GradcheckCase {
    pub fn new(
        name: &str,
        d_e: usize,
        n_heads: usize,
        cycle: Vec<DistanceKind>,
        variant: Variant,
        task: Task,
        seed: u64,
    ) -> Self {
        GradcheckCase {
            name: name.to_string(),
            config: RunConfig {
                encoder: EncoderConfig {
                    d_e,
                    n_heads,
                    distance_cycle: cycle,
                    ..EncoderConfig::default()
                },
                variant,
                task,
                seed,
                ..RunConfig::default()
            },
            len: 4,
            n_examples: 3,
        }
    }

    /// Build the model and data for this case and run the check.
    pub fn run(&self, settings: CheckSettings, corrupt: Option<Corrupt<'_>>) -> Result<GradcheckReport> {
        let enc = &self.config.encoder;
        if enc.d_e > MAX_D_E || self.len > MAX_LEN {
            return Err(Error::Config(format!(
                "gradcheck is limited to d_e <= {MAX_D_E} and l <= {MAX_LEN}, got d_e = {} and l = {}",
                enc.d_e, self.len
            )));
        }
        let classes = if self.config.task == Task::Pair { 3 } else { 2 };
        let per_example = if self.config.task == Task::Pair { 2 } else { 1 };
        let sents = random_sentences(self.n_examples * per_example, self.len, 6, classes, self.config.seed)?;
        let vocab = build_vocab(&sents, 1, false)?;
        let examples: Vec<Example> = match self.config.task {
            Task::Single => sents.into_iter().map(Example::Single).collect(),
            Task::Pair => sents
                .chunks(2)
                .map(|c| {
                    Example::Pair(PairExample {
                        premise: c[0].clone(),
                        hypothesis: c[1].clone(),
                        label: c[1].label.unwrap_or(0),
                    })
                })
                .collect(),
        };
        let mut model = Model::new(self.config.clone(), vocab, classes)?;
        gradcheck_model(&mut model, &examples, settings, &self.name, corrupt)
    }
}

/// The standard cases at `d_e = 8`, two heads, `l = 4`: one per distance kind so that
/// every mask kind is exercised, plus the two-encoder variant and the pair task.
pub fn standard_cases(seed: u64) -> Vec<GradcheckCase> {
    use DistanceKind::*;
    vec![
        GradcheckCase::new("mssan-word", 8, 2, vec![Word], Variant::Mssan, Task::Single, seed),
        GradcheckCase::new(
            "mssan-dependency",
            8,
            2,
            vec![Dependency],
            Variant::Mssan,
            Task::Single,
            seed,
        ),
        GradcheckCase::new("mssan-none", 8, 2, vec![None], Variant::Mssan, Task::Single, seed),
        GradcheckCase::new(
            "mssan_sep-dependency",
            8,
            2,
            vec![Dependency],
            Variant::MssanSep,
            Task::Single,
            seed,
        ),
        GradcheckCase::new("mssan-pair", 8, 2, vec![Word], Variant::Mssan, Task::Pair, seed),
    ]
}

pub fn gradcheck(seed: u64) -> Result<Vec<GradcheckReport>> {
    standard_cases(seed)
        .iter()
        .map(|c| c.run(CheckSettings::default(), None))
        .collect()
}
