use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

use super::config::RunConfig;
use super::model::Example;
use super::parallel_map;
use super::report::fmt9;
use super::train::train;

/// Prior switches of one ablation row: direction, word distance, dependency distance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct AblationSpec {
    pub name: &'static str,
    pub use_direction: bool,
    pub use_word: bool,
    pub use_dependency: bool,
}

const fn row(name: &'static str, use_direction: bool, use_word: bool, use_dependency: bool) -> AblationSpec {
    AblationSpec {
        name,
        use_direction,
        use_word,
        use_dependency,
    }
}

/// No prior, each prior alone, each pair, all three.
pub const ABLATION_ROWS: [AblationSpec; 8] = [
    row("standard SAN", false, false, false),
    row("+ direction", true, false, false),
    row("+ word distance", false, true, false),
    row("+ dp. distance", false, false, true),
    row("+ word & dp. distance", false, true, true),
    row("+ direction & word distance", true, true, false),
    row("+ direction & dp. distance", true, false, true),
    row("+ all mask (MS-SAN)", true, true, true),
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AblationRow {
    pub spec: AblationSpec,
    pub epochs: usize,
    pub final_loss: f64,
    /// Cross-entropy of a uniform prediction, `ln C`.
    pub uniform_loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
    pub ms_per_batch: f64,
}

impl AblationSpec {
    pub fn apply(&self, base: &RunConfig) -> RunConfig {
        RunConfig {
            use_direction: self.use_direction,
            use_word: self.use_word,
            use_dependency: self.use_dependency,
            ..base.clone()
        }
    }
}

/// Train one seeded model per row of [`ABLATION_ROWS`] from `base`. Rows run in
/// parallel up to the `MSSAN_THREADS` cap.
pub fn ablation_grid(base: &RunConfig, train_set: &[Example], test_set: &[Example]) -> Result<Vec<AblationRow>> {
    base.validate()?;
    parallel_map(&ABLATION_ROWS, |spec| {
        let (model, metrics) = train(&spec.apply(base), train_set, test_set)?;
        let last = metrics.last().expect("at least one epoch");
        Ok(AblationRow {
            spec: *spec,
            epochs: metrics.epochs.len(),
            final_loss: last.loss,
            uniform_loss: (model.num_classes() as f64).ln(),
            train_accuracy: last.train_accuracy,
            test_accuracy: last.test_accuracy,
            ms_per_batch: last.ms_per_batch,
        })
    })
    .into_iter()
    .collect()
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("model,direction,word_distance,dependency_distance,epochs,final_loss,uniform_loss,train_accuracy,test_accuracy,ms_per_batch\n");
    let flag = |b: bool| if b { "1" } else { "0" };
    for r in rows {
        let _ = writeln!(
            out,
            "\"{}\",{},{},{},{},{},{},{},{},{}",
            r.spec.name,
            flag(r.spec.use_direction),
            flag(r.spec.use_word),
            flag(r.spec.use_dependency),
            r.epochs,
            fmt9(r.final_loss),
            fmt9(r.uniform_loss),
            fmt9(r.train_accuracy),
            r.test_accuracy.map(fmt9).unwrap_or_default(),
            fmt9(r.ms_per_batch),
        );
    }
    out
}

pub fn write_ablation_csv(path: &Path, rows: &[AblationRow]) -> Result<()> {
    std::fs::write(path, ablation_csv(rows))?;
    Ok(())
}
