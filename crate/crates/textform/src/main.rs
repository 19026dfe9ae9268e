//! Command-line surface wiring corpus ingestion, language-model training,
//! the explore/exploit training loop, transformation, scoring, evaluation,
//! and the gradient self-check.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/config error, 3 failed
//! numerical check.

use clap::{Args, Parser, Subcommand};
use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use textform::config::RunConfig;
use textform::eval::evaluate_outputs;
use textform::lexsampler::SynonymLexicon;
use textform::neural::gradcheck::run_grad_check;
use textform::neural::{load_checkpoint, save_checkpoint, ModelParams, RunState};
use textform::scorers::ngram::train_ngram;
use textform::textcore::{read_corpus, split_corpus, tokenize_with, Sentence, Vocabulary};
use textform::toy::{generate as toy_generate, ToySpec};
use textform::trainloop::{
    explore, pretrain, run_training, transform, TrainConfig,
};

#[derive(Parser)]
#[command(name = "textform", version, about = "Unsupervised controllable text formalization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Split a raw corpus into train/valid/heldout/test files.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 13)]
        seed: u64,
        #[arg(long, default_value_t = textform::textcore::MAX_LEN_DEFAULT)]
        max_len: usize,
    },
    /// Normalize a synonym lexicon file (word<TAB>syn|syn|...).
    BuildLexicon {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train the interpolated Kneser-Ney n-gram model and write ARPA.
    TrainLm {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 4)]
        order: usize,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = textform::textcore::MAX_LEN_DEFAULT)]
        max_len: usize,
    },
    /// Autoencoder pretraining only; writes pretrained.ckpt.
    Pretrain {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Full explore/exploit training loop.
    Train {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Run one exploration pass over a checkpointed model and dump triples.
    Explore {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Transform sentences (file or stdin) under a control level.
    Transform {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        control: usize,
        /// Input file; stdin when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        decode_margin: usize,
    },
    /// Print the score breakdown for an (input, output) sentence pair.
    Score {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
    },
    /// Evaluate a checkpoint on the configured corpus's test split.
    Evaluate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Optional reference corpus for BLEU.
        #[arg(long)]
        references: Option<PathBuf>,
    },
    /// Verify analytic gradients against finite differences.
    GradCheck {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        samples_per_tensor: usize,
    },
    /// Generate a synthetic corpus, lexicon, embeddings, and ready config.
    DemoData {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 500)]
        sentences: usize,
        #[arg(long, default_value_t = 47)]
        seed: u64,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap distinguishes help/version from genuine usage errors.
            let _ = e.print();
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            std::process::exit(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(cli.command) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}

fn load_sentences(path: &Path, max_len: usize) -> anyhow::Result<Vec<Sentence>> {
    let (sentences, skipped) = read_corpus(path, max_len)?;
    if skipped > 0 {
        log::warn!("{skipped} over-length lines skipped in {}", path.display());
    }
    Ok(sentences)
}

fn write_split(dir: &Path, name: &str, sentences: &[Sentence]) -> std::io::Result<()> {
    let mut text = String::new();
    for s in sentences {
        text.push_str(&s.to_string());
        text.push('\n');
    }
    std::fs::write(dir.join(name), text)
}

fn dispatch(cmd: Command) -> anyhow::Result<i32> {
    match cmd {
        Command::Ingest { corpus, out_dir, seed, max_len } => {
            let sentences = load_sentences(&corpus, max_len)?;
            let split = split_corpus(&sentences, (0.8, 0.12, 0.08), seed, 0.5)?;
            std::fs::create_dir_all(&out_dir)?;
            write_split(&out_dir, "train.txt", &split.train)?;
            write_split(&out_dir, "valid.txt", &split.valid)?;
            write_split(&out_dir, "heldout.txt", &split.heldout)?;
            write_split(&out_dir, "test.txt", &split.test)?;
            println!(
                "split {} sentences into {}/{}/{}/{} (train/valid/heldout/test)",
                sentences.len(),
                split.train.len(),
                split.valid.len(),
                split.heldout.len(),
                split.test.len()
            );
            Ok(0)
        }
        Command::BuildLexicon { input, output } => {
            let lex = SynonymLexicon::load(&input)?;
            std::fs::write(&output, lex.to_text())?;
            println!("{} headwords written to {}", lex.len(), output.display());
            Ok(0)
        }
        Command::TrainLm { corpus, order, output, max_len } => {
            let sentences = load_sentences(&corpus, max_len)?;
            let lm = train_ngram(&sentences, order)?;
            lm.save_arpa(&output)?;
            println!("order-{order} model over {} sentences -> {}", sentences.len(), output.display());
            Ok(0)
        }
        Command::Pretrain { config } => {
            let cfg = RunConfig::load(&config.config)?;
            let corpus = load_sentences(&cfg.corpus_path()?, cfg.max_len())?;
            let split = split_corpus(&corpus, (0.8, 0.12, 0.08), cfg.train.seed, 0.5)?;
            let vocab = Vocabulary::build(&split.train, 1);
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.train.seed);
            let mut model = ModelParams::init(cfg.train.dims(vocab.size()), &mut rng);
            let losses =
                pretrain(&mut model, &vocab, &split.train, cfg.train.pretrain_epochs, cfg.train.lr)?;
            for (i, l) in losses.iter().enumerate() {
                println!("epoch {:>3}: loss {l:.6}", i + 1);
            }
            let out_dir = cfg.paths.out_dir.clone().unwrap_or_else(|| PathBuf::from("run-out"));
            std::fs::create_dir_all(&out_dir)?;
            let state = RunState {
                model,
                predictor: None,
                vocab,
                hyper: serde_json::to_value(&cfg.train)?,
            };
            let path = out_dir.join("pretrained.ckpt");
            save_checkpoint(&state, &path)?;
            println!("saved {}", path.display());
            Ok(0)
        }
        Command::Train { config } => {
            let cfg = RunConfig::load(&config.config)?;
            let corpus = load_sentences(&cfg.corpus_path()?, cfg.max_len())?;
            let lexicon = SynonymLexicon::load(&cfg.lexicon_path()?)?;
            let ctx = cfg.scoring_context()?;
            let out_dir = cfg.paths.out_dir.clone().unwrap_or_else(|| PathBuf::from("run-out"));
            let outcome = run_training(&cfg.train, &corpus, &lexicon, &ctx, Some(&out_dir))?;
            println!(
                "best cycle {} with held-out mean G {:.4}; artifacts in {}",
                outcome.manifest.best_cycle,
                outcome.manifest.best_heldout_mean_g,
                out_dir.display()
            );
            Ok(0)
        }
        Command::Explore { config, checkpoint, output } => {
            let cfg = RunConfig::load(&config.config)?;
            let corpus = load_sentences(&cfg.corpus_path()?, cfg.max_len())?;
            let lexicon = SynonymLexicon::load(&cfg.lexicon_path()?)?;
            let ctx = cfg.scoring_context()?;
            let state = load_checkpoint(&checkpoint)?;
            let (triples, stats) =
                explore(&state.model, &state.vocab, &corpus, &lexicon, &ctx, &cfg.train, 1)?;
            let mut lines: Vec<String> = triples.iter().map(|t| t.to_json_line()).collect();
            lines.push(String::new());
            std::fs::write(&output, lines.join("\n"))?;
            println!(
                "seen {} -> emitted {}, skipped {}, discarded {}",
                stats.seen, stats.emitted, stats.skipped, stats.discarded
            );
            Ok(0)
        }
        Command::Transform { checkpoint, control, input, decode_margin } => {
            let state = load_checkpoint(&checkpoint)?;
            let text = match input {
                Some(p) => std::fs::read_to_string(p)?,
                None => {
                    let mut buf = String::new();
                    std::io::stdin().read_to_string(&mut buf)?;
                    buf
                }
            };
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                let x = tokenize_with(line, textform::textcore::MAX_LEN_DEFAULT)?;
                let y = transform(&state, &x, control, decode_margin)?;
                println!("{y}");
            }
            Ok(0)
        }
        Command::Score { config, x, y } => {
            let cfg = RunConfig::load(&config.config)?;
            let ctx = cfg.scoring_context()?;
            let xs = tokenize_with(&x, cfg.max_len())?;
            let ys = tokenize_with(&y, cfg.max_len())?;
            let b = ctx.composite(&xs, &ys)?;
            println!("{}", serde_json::to_string_pretty(&b)?);
            Ok(0)
        }
        Command::Evaluate { config, checkpoint, references } => {
            let cfg = RunConfig::load(&config.config)?;
            let corpus = load_sentences(&cfg.corpus_path()?, cfg.max_len())?;
            let split = split_corpus(&corpus, (0.8, 0.12, 0.08), cfg.train.seed, 0.5)?;
            let ctx = cfg.scoring_context()?;
            let state = load_checkpoint(&checkpoint)?;
            let mut outputs = BTreeMap::new();
            for control in 1usize..=3 {
                let outs: Result<Vec<Sentence>, _> = split
                    .test
                    .iter()
                    .map(|x| transform(&state, x, control, cfg.train.decode_margin))
                    .collect();
                outputs.insert(control, outs?);
            }
            let refs = match &references {
                Some(p) => Some(load_sentences(p, cfg.max_len())?),
                None => None,
            };
            let report = evaluate_outputs(
                &split.test,
                &outputs,
                &ctx,
                cfg.train.zeta1,
                cfg.train.zeta2,
                refs.as_deref(),
            )?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            if let Some(dir) = &cfg.paths.out_dir {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
            }
            Ok(0)
        }
        Command::GradCheck { seed, samples_per_tensor } => {
            let report = run_grad_check(seed, samples_per_tensor)?;
            println!(
                "checked {} coordinates; max relative error {:.3e} (tolerance {:.0e})",
                report.coords_checked, report.max_rel_err, report.tolerance
            );
            if report.passed {
                Ok(0)
            } else {
                eprintln!("gradient check FAILED at tensor/offset {:?}", report.worst_coord);
                Ok(3)
            }
        }
        Command::DemoData { out_dir, sentences, seed } => {
            let spec = ToySpec { sentences, seed, ..ToySpec::default() };
            let data = toy_generate(&spec)?;
            data.write_to_dir(&out_dir)?;
            let lm = train_ngram(&data.corpus, 4)?;
            lm.save_arpa(&out_dir.join("lm.arpa"))?;
            let config = RunConfig {
                train: TrainConfig {
                    max_cycles: 3,
                    pretrain_epochs: 20,
                    ..TrainConfig::desk()
                },
                paths: textform::config::PathsConfig {
                    corpus: Some(out_dir.join("corpus.txt")),
                    lexicon: Some(out_dir.join("lexicon.tsv")),
                    embeddings: Some(out_dir.join("embeddings.txt")),
                    stopwords: None,
                    lm: Some(out_dir.join("lm.arpa")),
                    out_dir: Some(out_dir.join("run")),
                },
                ..RunConfig::default()
            };
            std::fs::write(out_dir.join("config.toml"), toml::to_string_pretty(&config)?)?;
            println!("demo resources written to {}", out_dir.display());
            Ok(0)
        }
    }
}
