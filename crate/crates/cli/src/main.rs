//! `crepair` command line. Every subcommand reads a TOML run config
//! (`--config`), applies flag overrides, and writes its artifacts
//! atomically. Failures print one JSON object on stderr and exit nonzero.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crepair::config::RunConfig;
use crepair::context::{analyzer, get_context};
use crepair::corrupt::{synthesize_corpus, BrokenProgram};
use crepair::dataset::{dedup_split, DatasetItem, DatasetManifest, Split};
use crepair::diagnostics::Compiler;
use crepair::model::{
    gradient_check, write_loss_csv, ModelCheckpoint, Trainer, GRADCHECK_EPSILON, GRADCHECK_TOLERANCE,
};
use crepair::par::Parallelism;
use crepair::pipeline::{accuracy, build_model, compile_examples, fit};
use crepair::program::{tokenize, TokenizedProgram};
use crepair::repair::{evaluate, repair_program, EvalCase, GroundTruth, ACC_KS};
use crepair::samples::sample_corpus;
use crepair::store::{self, SourceRecord};

#[derive(Parser)]
#[command(name = "crepair", version, about = "Repair C compilation errors with a learned line localizer and decoder")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run data-parallel stages sequentially.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated corpus of correct programs as JSONL.
    Sample {
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Corrupt correct programs into broken variants.
    Synthesize {
        /// Corpus JSONL or a directory of .c files.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        variants: Option<usize>,
        #[arg(long)]
        max_errors: Option<usize>,
        /// Also write the synthesis report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Per-line context of one C file as JSONL.
    Context {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assign broken variants to train/validation/test with deduplication.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on broken variants.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Restrict to the train split; the validation split picks the best epoch.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        loss: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Repair one C file.
    Repair {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Metrics on a test set: broken JSONL (with ground truth) or plain
    /// sources (full repair only).
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Only the test split of this manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of the model gradients on a tiny config.
    Gradcheck {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("{}", json!({ "error": first, "usage": true }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let chain: Vec<String> = e.chain().skip(1).map(|c| c.to_string()).collect();
            eprintln!("{}", json!({ "error": e.to_string(), "causes": chain }));
            ExitCode::FAILURE
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        config.seed = s;
    }
    if common.sequential {
        config.parallelism = Parallelism::Sequential;
        config.repair.parallelism = Parallelism::Sequential;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(&cli.common)?;
    let compiler = Compiler::new(config.compiler.clone());
    match cli.command {
        Command::Sample { count, out } => {
            let records: Vec<SourceRecord> = sample_corpus(config.stage_seed("sample"), count)
                .into_iter()
                .map(|(id, source)| SourceRecord { id, source })
                .collect();
            store::write_jsonl(&out, &records)?;
        }
        Command::Synthesize {
            input,
            out,
            variants,
            max_errors,
            report,
        } => {
            let mut synth = config.synthesis_config();
            if let Some(v) = variants {
                synth.variants_per_program = v;
            }
            if let Some(m) = max_errors {
                synth.max_errors = m;
            }
            let corpus = read_programs(&input)?;
            let (broken, rep) = synthesize_corpus(&corpus, &synth, &compiler)?;
            store::write_broken(&out, &broken)?;
            if let Some(p) = report {
                store::write_json(&p, &rep)?;
            }
            eprintln!(
                "{} variants from {} parents (retention {:.3})",
                rep.emitted_variants, rep.parents, rep.retention_rate
            );
        }
        Command::Context { input, out } => {
            let program = read_c_file(&input)?;
            let contexts = get_context(&program, &analyzer(&program));
            store::write_jsonl(&out, &contexts)?;
        }
        Command::Split { input, out } => {
            let broken = store::read_broken(&input)?;
            let items: Vec<DatasetItem> = broken
                .iter()
                .map(|b| DatasetItem {
                    id: b.program.source_id.clone(),
                    parent_id: b.parent_id.clone(),
                    program: b.program.clone(),
                })
                .collect();
            let manifest = dedup_split(
                &items,
                config.split,
                config.stage_seed("split"),
                vec![input.display().to_string()],
            )?;
            store::write_json(&out, &manifest)?;
            eprintln!("{:?}, {} duplicates removed", manifest.counts(), manifest.dedup.pairs_removed);
        }
        Command::Train {
            data,
            manifest,
            checkpoint,
            loss,
            epochs,
        } => train(&config, &compiler, &data, manifest.as_deref(), &checkpoint, &loss, epochs)?,
        Command::Repair {
            input,
            checkpoint,
            out,
            trace,
        } => {
            let source = std::fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let model = load_model(&checkpoint)?;
            let (fixed, tr) = repair_program(&source, &model, &compiler, &config.repair)?;
            store::atomic_write(&out, fixed.as_bytes())?;
            if let Some(p) = trace {
                store::write_json(&p, &tr)?;
            }
            eprintln!("{:?} after {} iterations", tr.final_status, tr.iteration_count);
        }
        Command::Evaluate {
            data,
            checkpoint,
            manifest,
            out,
        } => {
            let model = load_model(&checkpoint)?;
            let mut cases = read_eval_cases(&data)?;
            if let Some(m) = manifest {
                let m: DatasetManifest = store::read_json(&m)?;
                let test: std::collections::HashSet<&str> = m.ids_in(Split::Test).collect();
                cases.retain(|c| test.contains(c.id.as_str()));
            }
            let metrics = evaluate(&cases, &model, &compiler, &config.repair, config.parallelism)?;
            store::write_json(&out, &metrics)?;
            print!("{}", metrics.to_text());
        }
        Command::Gradcheck { out } => {
            let report = gradient_check(config.stage_seed("gradcheck"), GRADCHECK_TOLERANCE);
            let (ok, tensors, worst) = match &report {
                Ok(r) => (
                    true,
                    r.tensors
                        .iter()
                        .map(|t| json!({ "name": t.name, "elements": t.elements, "max_rel_err": t.max_rel_err }))
                        .collect(),
                    r.max_rel_err(),
                ),
                Err(_) => (false, Vec::new(), f64::NAN),
            };
            let doc = json!({
                "epsilon": GRADCHECK_EPSILON,
                "tolerance": GRADCHECK_TOLERANCE,
                "passed": ok,
                "max_rel_err": worst,
                "tensors": tensors,
            });
            if let Some(p) = out {
                store::write_json(&p, &doc)?;
            }
            println!("max relative error {worst:.3e} over {} tensors", doc["tensors"].as_array().map_or(0, Vec::len));
            report?;
        }
    }
    Ok(())
}

fn read_c_file(path: &Path) -> Result<TokenizedProgram> {
    let source = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let id = path.file_stem().unwrap_or_default().to_string_lossy();
    Ok(tokenize(&id, &source)?)
}

fn read_programs(path: &Path) -> Result<Vec<TokenizedProgram>> {
    store::read_sources(path)?
        .into_iter()
        .map(|r| tokenize(&r.id, &r.source).with_context(|| format!("tokenizing {}", r.id)))
        .collect()
}

fn load_model(path: &Path) -> Result<crepair::model::Model> {
    if !path.exists() {
        bail!(crepair::repair::RepairError::ModelMissing(path.display().to_string()));
    }
    Ok(ModelCheckpoint::load(path)?.model)
}

/// Broken JSONL gives ground truth for single-error variants; anything else
/// is read as plain sources.
fn read_eval_cases(path: &Path) -> Result<Vec<EvalCase>> {
    if path.is_file() {
        if let Ok(broken) = store::read_broken(path) {
            return Ok(broken.iter().map(case_from_broken).collect());
        }
    }
    Ok(read_programs(path)?
        .into_iter()
        .map(|program| EvalCase {
            id: program.source_id.clone(),
            program,
            truth: None,
        })
        .collect())
}

fn case_from_broken(b: &BrokenProgram) -> EvalCase {
    let truth = match b.corruptions.as_slice() {
        [only] => Some(GroundTruth {
            line: only.line,
            tokens: only.original_line.iter().map(|t| t.text.clone()).collect(),
        }),
        _ => None,
    };
    EvalCase {
        id: b.program.source_id.clone(),
        program: b.program.clone(),
        truth,
    }
}

fn train(
    config: &RunConfig,
    compiler: &Compiler,
    data: &Path,
    manifest: Option<&Path>,
    checkpoint: &Path,
    loss: &Path,
    epochs: Option<usize>,
) -> Result<()> {
    let broken = store::read_broken(data)?;
    let (train_set, valid_set): (Vec<BrokenProgram>, Vec<BrokenProgram>) = match manifest {
        Some(m) => {
            let m: DatasetManifest = store::read_json(m)?;
            let train: std::collections::HashSet<&str> = m.ids_in(Split::Train).collect();
            let valid: std::collections::HashSet<&str> = m.ids_in(Split::Validation).collect();
            let t = broken.iter().filter(|b| train.contains(b.program.source_id.as_str())).cloned().collect();
            let v = broken.iter().filter(|b| valid.contains(b.program.source_id.as_str())).cloned().collect();
            (t, v)
        }
        None => (broken, Vec::new()),
    };
    let hp = config.model.clone();
    let examples = compile_examples(&train_set, compiler, &hp, config.parallelism)?;
    let valid = compile_examples(&valid_set, compiler, &hp, config.parallelism)?;
    let model = build_model(&examples, hp, config.stage_seed("init"))?;
    let mut trainer = Trainer::new(model, config.stage_seed("train")).with_parallelism(config.parallelism);
    let mut settings = config.training.clone();
    if let Some(e) = epochs {
        settings.epochs = e;
    }
    eprintln!("{} training examples, {} validation, vocab {}", examples.len(), valid.len(), trainer.model.vocab.len());

    // best validation acc@1 so far and its checkpoint
    let mut best: Option<(f64, Vec<u8>)> = None;
    let mut failure: Option<anyhow::Error> = None;
    let every = settings.eval_every.max(1);
    let total_epochs = settings.epochs;
    let report = fit(&mut trainer, &examples, &settings, |t, _| {
        let last = t.trace.last().map_or(f64::NAN, |r| r.total);
        eprintln!("epoch {} loss {last:.4}", t.epoch);
        if valid.is_empty() || failure.is_some() || !(t.epoch % every == 0 || t.epoch == total_epochs) {
            return;
        }
        let step = || -> Result<(f64, Vec<u8>)> {
            let m = accuracy(&t.model, &valid, ACC_KS[0], t.parallelism)?;
            Ok((m.acc_at_1.unwrap_or(0.0), ModelCheckpoint::from_trainer(t).to_bytes()?))
        };
        match step() {
            Ok((acc, bytes)) => {
                eprintln!("  validation acc@1 {acc:.4}");
                if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                    best = Some((acc, bytes));
                }
            }
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let mut csv = Vec::new();
    write_loss_csv(&trainer.trace, &mut csv)?;
    store::atomic_write(loss, &csv)?;
    match best {
        Some((_, bytes)) => store::atomic_write(checkpoint, &bytes)?,
        None => ModelCheckpoint::from_trainer(&trainer).save(checkpoint)?,
    }
    eprintln!("trained {} epochs", report.epochs_run);
    Ok(())
}

