//! Training, evaluation, benchmarking, ablation and report generation.

mod ablation;
mod bench;
mod config;
mod gradcheck;
mod model;
mod optim;
mod report;
mod train;

pub use ablation::{ablation_csv, ablation_grid, write_ablation_csv, AblationRow, AblationSpec, ABLATION_ROWS};
pub use bench::{bench, median, random_sentences, BenchReport};
pub use config::{RunConfig, Task, Variant};
pub use gradcheck::{
    gradcheck, gradcheck_model, relative_error, standard_cases, CheckSettings, Corrupt, GradcheckCase, GradcheckReport,
    ParamCheck, MAX_D_E, MAX_LEN,
};
pub use model::{classify, nli_feature, Example, HeadMap, Model, CLASSIFIER_PREFIX, EMBED_TABLE};
pub use optim::Adam;
pub use report::{emit_heatmap, emit_masks, fmt9, masks_for_config, read_matrix_csv, write_matrix_csv, write_pgm};
pub use train::{
    build_model, evaluate, examples_from_sentences, load_examples, train, train_with, EpochMetrics, Evaluation,
    Metrics, ParamCounts, StepOutcome, Trainer,
};

/// Thread cap from `MSSAN_THREADS`, defaulting to the available parallelism.
pub fn max_threads() -> usize {
    std::env::var("MSSAN_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Apply `f` to every item on at most [`max_threads`] scoped threads, keeping order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let threads = max_threads().min(items.len()).max(1);
    if threads == 1 {
        return items.iter().map(f).collect();
    }
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let f = &f;
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                scope.spawn(move || {
                    (t..items.len())
                        .step_by(threads)
                        .map(|i| (i, f(&items[i])))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("worker thread panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|r| r.expect("every slot filled")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_map_keeps_order() {
        let items: Vec<u32> = (0..17).collect();
        assert_eq!(
            parallel_map(&items, |x| x * 2),
            items.iter().map(|x| x * 2).collect::<Vec<_>>()
        );
    }
}
