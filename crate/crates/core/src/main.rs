use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mssan::data::{gen_order_task, gen_tree_task, load_conllu, write_conllu, DepSentence};
use mssan::harness::{
    ablation_csv, ablation_grid, bench, emit_heatmap, emit_masks, evaluate, gradcheck, load_examples, train_with,
    Model, RunConfig, Variant,
};
use mssan::{Error, Result};

#[derive(Parser)]
#[command(name = "mssan", version, about = "Multi-mask self-attention sentence encoder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Mssan,
    #[value(name = "mssan_sep")]
    MssanSep,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthTask {
    Order,
    Tree,
}

#[derive(Subcommand)]
enum Command {
    /// Train on <data>/train.conllu, evaluating on <data>/test.conllu if present.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a CoNLL-U file or on <dir>/test.conllu.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Compare analytic and finite-difference gradients on small models.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Median training-step time of one variant.
    Bench {
        #[arg(long, value_enum, default_value = "mssan")]
        variant: VariantArg,
        #[arg(long = "d_e", default_value_t = 300)]
        d_e: usize,
        #[arg(long, default_value_t = 25)]
        len: usize,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 5)]
        warmup: usize,
        #[arg(long, default_value_t = 50)]
        batches: usize,
    },
    /// Train the eight structural-prior ablation rows and print a CSV table.
    Ablation {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Also write the CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write every head's mask for one sentence as CSV.
    EmitMasks {
        #[arg(long)]
        sentence_file: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, default_value = "masks")]
        out: PathBuf,
    },
    /// Write every head's attention weights for one sentence as CSV and PGM.
    Heatmap {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        sentence_file: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic corpus as <out>/train.conllu and <out>/test.conllu.
    Synth {
        #[arg(long, value_enum)]
        task: SynthTask,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        len: usize,
        #[arg(long, default_value_t = 0.2)]
        test_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn data_file(data: &Path, name: &str) -> PathBuf {
    if data.is_dir() {
        data.join(name)
    } else {
        data.to_path_buf()
    }
}

fn pick_sentence(path: &Path, index: usize) -> Result<DepSentence> {
    let mut sentences = load_conllu(path)?;
    if index >= sentences.len() {
        return Err(Error::Config(format!(
            "{} has {} sentences, index {index} requested",
            path.display(),
            sentences.len()
        )));
    }
    Ok(sentences.swap_remove(index))
}

fn load_split(config: &RunConfig, data: &Path) -> Result<(Vec<mssan::harness::Example>, Vec<mssan::harness::Example>)> {
    let train = load_examples(&data.join("train.conllu"), config.task)?;
    let test_path = data.join("test.conllu");
    let test = if test_path.exists() {
        load_examples(&test_path, config.task)?
    } else {
        Vec::new()
    };
    Ok((train, test))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train { config, data, out } => {
            let config = RunConfig::load(&config)?;
            let (train, test) = load_split(&config, &data)?;
            let (model, metrics) = train_with(&config, &train, &test, |m| {
                let test = m.test_accuracy.map_or("-".into(), |a| format!("{a:.4}"));
                println!(
                    "epoch {:4}  loss {:.6}  train_acc {:.4}  test_acc {test}  {:.2} ms/batch",
                    m.epoch, m.loss, m.train_accuracy, m.ms_per_batch
                );
            })?;
            fs::create_dir_all(&out)?;
            model.save(&out.join("model.ckpt"))?;
            fs::write(out.join("metrics.json"), serde_json::to_string_pretty(&metrics)?)?;
            fs::write(out.join("config.json"), config.to_json_pretty()?)?;
            println!(
                "parameters: encoder {}, encoder+classifier {}, total {}",
                metrics.params.encoder, metrics.params.encoder_and_classifier, metrics.params.total
            );
            println!("wrote {}", out.display());
        }
        Command::Eval { checkpoint, data } => {
            let model = Model::load(&checkpoint)?;
            let examples = load_examples(&data_file(&data, "test.conllu"), model.config().task)?;
            let e = evaluate(&model, &examples)?;
            println!(
                "{}",
                serde_json::json!({ "examples": examples.len(), "accuracy": e.accuracy, "loss": e.loss })
            );
        }
        Command::Gradcheck { seed } => {
            let reports = gradcheck(seed)?;
            for r in &reports {
                print!("{r}");
            }
            if let Some(bad) = reports.iter().find(|r| !r.passed()) {
                eprintln!("gradient check failed in case {}", bad.case);
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Bench {
            variant,
            d_e,
            len,
            batch,
            warmup,
            batches,
        } => {
            let variant = match variant {
                VariantArg::Mssan => Variant::Mssan,
                VariantArg::MssanSep => Variant::MssanSep,
            };
            let mut report = bench(variant, d_e, len, batch, warmup, batches, 0)?;
            report.samples_ms.clear();
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Ablation { config, data, out } => {
            let config = RunConfig::load(&config)?;
            let (train, test) = load_split(&config, &data)?;
            let csv = ablation_csv(&ablation_grid(&config, &train, &test)?);
            print!("{csv}");
            if let Some(out) = out {
                fs::write(out, csv)?;
            }
        }
        Command::EmitMasks {
            sentence_file,
            config,
            index,
            out,
        } => {
            let config = RunConfig::load(&config)?;
            let sentence = pick_sentence(&sentence_file, index)?;
            for p in emit_masks(&config, &sentence, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Heatmap {
            checkpoint,
            sentence_file,
            index,
            out,
        } => {
            let model = Model::load(&checkpoint)?;
            let sentence = pick_sentence(&sentence_file, index)?;
            for (_, p) in emit_heatmap(&model, &sentence, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Synth {
            task,
            n,
            len,
            test_fraction,
            seed,
            out,
        } => {
            if !(0.0..1.0).contains(&test_fraction) {
                return Err(Error::Config(format!(
                    "test_fraction must lie in [0, 1), got {test_fraction}"
                )));
            }
            let mut all = match task {
                SynthTask::Order => gen_order_task(n, len, seed)?,
                SynthTask::Tree => gen_tree_task(n, len, seed)?,
            };
            let test = all.split_off(n - (n as f64 * test_fraction).round() as usize);
            fs::create_dir_all(&out)?;
            write_conllu(&out.join("train.conllu"), &all)?;
            write_conllu(&out.join("test.conllu"), &test)?;
            println!(
                "wrote {} training and {} test sentences to {}",
                all.len(),
                test.len(),
                out.display()
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}
