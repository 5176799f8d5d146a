mod repl;
mod resources;
mod trace;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use nlu_core::corpus::{
    flatten_corpus, generate_synthetic, generate_turns, parse_fixture, read_jsonl, split_holdout, write_jsonl,
    ConversationRecord, GenerationReport, Turn,
};
use nlu_core::evaluation::{compare_representations, replay, triage, CompareConfig, Injection, Variant};
use nlu_core::federation::route;
use nlu_core::mr_tree::parse_action;
use nlu_core::parser_core::{checkpoint, exact_match_rate, train, ParserModel, TrainConfig};
use nlu_core::{MrTree, Ontology, SystemAction};

use crate::resources::ResourceDir;

#[derive(Parser)]
#[command(name = "nlu", version, about = "Contextual semantic parsing toolkit")]
struct Cli {
    /// Seed for corpus generation, initialization and fault injection.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Directory with data files overriding the built-in ones.
    #[arg(long, global = true, env = "NLU_RESOURCES")]
    resources: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an ontology file and report problems.
    LintOntology {
        /// Ontology file; defaults to the resource directory or the built-in toy ontology.
        path: Option<PathBuf>,
    },
    /// Generate a synthetic conversation corpus as JSONL.
    GenCorpus {
        #[command(flatten)]
        onto: OntologyArg,
        /// Template grammar file.
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Stop after exactly this many turns.
        #[arg(long, conflicts_with = "conversations")]
        turns: Option<usize>,
        /// Number of conversations.
        #[arg(long)]
        conversations: Option<usize>,
        /// Output file; stdout when absent.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Also write the flat-frame rendering of the corpus here.
        #[arg(long)]
        flat: Option<PathBuf>,
    },
    /// Train the general parser on a corpus.
    Train {
        #[command(flatten)]
        onto: OntologyArg,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        /// Hold out this share of conversations and report exact match on it.
        #[arg(long)]
        holdout: Option<f64>,
        #[command(flatten)]
        hyper: HyperArgs,
    },
    /// Parse one utterance and print the decoder trace and tree.
    Parse {
        #[command(flatten)]
        model: ModelArgs,
        /// System action preceding the utterance, e.g. `Prompt(Flight.book(from=?))`.
        #[arg(long)]
        system: Option<String>,
        /// Entity store record: `source | id | label | canonical | alternates | payload`.
        #[arg(long)]
        fixture: Vec<String>,
        /// Previous user utterances, oldest first.
        #[arg(long)]
        history: Vec<String>,
        utterance: String,
    },
    /// Interactive multi-turn session.
    Repl {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Replay a corpus against the gold baseline and triage the differences.
    Eval {
        #[command(flatten)]
        onto: OntologyArg,
        /// Model checkpoint; without one the gold trees are replayed.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        overrides: Option<PathBuf>,
        #[arg(long)]
        corpus: PathBuf,
        /// Corrupt this share of eligible predictions.
        #[arg(long)]
        inject: Option<f64>,
        /// Share of injected corruptions that change the response.
        #[arg(long, default_value_t = 0.3)]
        harmful: f64,
        /// Write the summary as JSON here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write one JSON line per turn here.
        #[arg(long)]
        results: Option<PathBuf>,
    },
    /// Convert a checkpoint to half precision.
    Quantize {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Train hierarchical and flat parsers on one corpus and compare them.
    Compare {
        #[command(flatten)]
        onto: OntologyArg,
        /// Corpus file; a synthetic corpus is generated when absent.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Turns to generate when no corpus is given.
        #[arg(long, default_value_t = 2000)]
        turns: usize,
        #[arg(long, default_value_t = 0.2)]
        holdout: f64,
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        hyper: HyperArgs,
    },
}

#[derive(Args)]
struct OntologyArg {
    /// Ontology file.
    #[arg(long)]
    ontology: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    #[command(flatten)]
    onto: OntologyArg,
    #[arg(long)]
    model: PathBuf,
    /// Override rules file (`pattern<TAB>tree` per line).
    #[arg(long)]
    overrides: Option<PathBuf>,
}

#[derive(Args)]
struct HyperArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
}

impl HyperArgs {
    fn config(&self, seed: u64) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            seed,
            epochs: self.epochs.unwrap_or(d.epochs),
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            hidden_dim: self.hidden_dim.unwrap_or(d.hidden_dim),
            embed_dim: self.embed_dim.unwrap_or(d.embed_dim),
            layers: self.layers.unwrap_or(d.layers),
            ..d
        }
    }
}

fn read_corpus(path: &Path) -> Result<Vec<ConversationRecord>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_jsonl(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn load_model(path: &Path, o: &Ontology) -> Result<ParserModel> {
    let m = checkpoint::load(path).with_context(|| format!("loading model {}", path.display()))?;
    if m.vocab != o.symbol_vocabulary() {
        bail!("model {} was trained for a different ontology", path.display());
    }
    Ok(m)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(f), value)?;
    Ok(())
}

fn print_generation(r: &GenerationReport) {
    eprintln!("{} conversations, {} turns, {} rejected samples", r.conversations, r.turns, r.rejected);
    for (family, n) in &r.per_family {
        eprintln!("  {family:<12} {n}");
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let dir = ResourceDir {
        dir: cli.resources.clone(),
    };
    let stdout = std::io::stdout();
    match cli.command {
        Command::LintOntology { path } => {
            let o = dir.ontology(path.as_deref())?;
            let issues = o.lint();
            for i in &issues {
                println!("{i}");
            }
            println!("{} violations", issues.len());
            if !issues.is_empty() {
                std::process::exit(1);
            }
        }
        Command::GenCorpus {
            onto,
            templates,
            turns,
            conversations,
            out,
            flat,
        } => {
            let o = dir.ontology(onto.ontology.as_deref())?;
            let t = dir.templates(templates.as_deref())?;
            let (records, report) = match (turns, conversations) {
                (Some(n), _) => generate_turns(&o, &t, n, cli.seed)?,
                (None, Some(n)) => generate_synthetic(&o, &t, n, cli.seed)?,
                (None, None) => generate_turns(&o, &t, 2000, cli.seed)?,
            };
            match &out {
                Some(p) => write_jsonl(BufWriter::new(File::create(p)?), &records)?,
                None => write_jsonl(stdout.lock(), &records)?,
            }
            if let Some(p) = flat {
                let mut w = BufWriter::new(File::create(&p)?);
                for c in flatten_corpus(&records) {
                    serde_json::to_writer(&mut w, &c)?;
                    writeln!(w)?;
                }
            }
            print_generation(&report);
        }
        Command::Train {
            onto,
            corpus,
            out,
            holdout,
            hyper,
        } => {
            let o = dir.ontology(onto.ontology.as_deref())?;
            let res = dir.parser(o)?;
            let records = read_corpus(&corpus)?;
            let (train_set, held) = split_holdout(&records, holdout.unwrap_or(0.0));
            let cfg = hyper.config(cli.seed);
            let start = std::time::Instant::now();
            let (model, trace) = train(&train_set, &res, &cfg)?;
            for (i, l) in trace.iter().enumerate() {
                println!("epoch {:>3}  loss {l:.5}", i + 1);
            }
            println!("trained in {:.1}s", start.elapsed().as_secs_f64());
            if holdout.is_some() {
                println!("held-out exact match {:.4}", exact_match_rate(&held, &model, &res));
            }
            checkpoint::save(&model, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Parse {
            model,
            system,
            fixture,
            history,
            utterance,
        } => {
            let o = dir.ontology(model.onto.ontology.as_deref())?;
            let m = load_model(&model.model, &o)?;
            let res = dir.federation(o, model.overrides.as_deref())?;
            let mut ctx = nlu_core::context::DialogContext::default();
            for h in history {
                ctx.push_user(h);
            }
            let turn = Turn {
                utterance: utterance.clone(),
                system_action: match system {
                    Some(a) => parse_action(&res.parser.ontology, &a)?,
                    None => SystemAction::none(),
                },
                gold_tree: MrTree::new("Unsupported"),
                entity_fixtures: fixture
                    .iter()
                    .map(|f| parse_fixture(&res.parser.ontology, f).map_err(anyhow::Error::msg))
                    .collect::<Result<_>>()?,
                gold_spans: None,
            };
            nlu_core::corpus::enter_turn(&mut ctx, &turn);
            let d = route(&utterance, &ctx, &m, &res)?;
            if let Some(rule) = &d.rewrite.rule {
                println!("rewrite [{rule}] {}", d.rewrite.text);
            }
            if let Some(g) = &d.general {
                println!("{:<12} prediction", "word");
                for row in trace::trace_rows(&res.parser.ontology, &g.prepared, &g.instructions) {
                    println!("{row}");
                }
            }
            println!("route {} ({})", d.parser, d.rationale);
            println!("{}", d.tree);
        }
        Command::Repl { model } => {
            let o = dir.ontology(model.onto.ontology.as_deref())?;
            let m = load_model(&model.model, &o)?;
            let res = dir.federation(o, model.overrides.as_deref())?;
            repl::run(&m, &res, std::io::stdin().lock(), stdout.lock())?;
        }
        Command::Eval {
            onto,
            model,
            overrides,
            corpus,
            inject,
            harmful,
            report,
            results,
        } => {
            let o = dir.ontology(onto.ontology.as_deref())?;
            let m = model.as_deref().map(|p| load_model(p, &o)).transpose()?;
            let res = dir.federation(o, overrides.as_deref())?;
            let responses = dir.responses()?;
            let records = read_corpus(&corpus)?;
            let injection = inject.map(|rate| Injection {
                rate,
                harmful_fraction: harmful,
                seed: cli.seed,
            });
            let variant = match &m {
                Some(m) => Variant::Pipeline(m),
                None => Variant::Gold,
            };
            let rs = replay(&records, variant, injection.as_ref(), &res, &responses);
            let summary = triage(&rs);
            println!("{summary}");
            if let Some(p) = report {
                write_json(&p, &summary)?;
            }
            if let Some(p) = results {
                let mut w = BufWriter::new(File::create(&p)?);
                for r in &rs {
                    serde_json::to_writer(&mut w, r)?;
                    writeln!(w)?;
                }
            }
        }
        Command::Quantize { model, out } => {
            let m = checkpoint::load(&model).with_context(|| format!("loading model {}", model.display()))?;
            let q = m.quantize();
            checkpoint::save(&q, &out)?;
            let before = std::fs::metadata(&model)?.len();
            let after = std::fs::metadata(&out)?.len();
            println!(
                "{} bytes -> {} bytes ({:.3}x), wrote {}",
                before,
                after,
                after as f64 / before as f64,
                out.display()
            );
        }
        Command::Compare {
            onto,
            corpus,
            turns,
            holdout,
            report,
            hyper,
        } => {
            let o = dir.ontology(onto.ontology.as_deref())?;
            let records = match corpus {
                Some(p) => read_corpus(&p)?,
                None => {
                    let t = dir.templates(None)?;
                    let (r, g) = generate_turns(&o, &t, turns, cli.seed)?;
                    print_generation(&g);
                    r
                }
            };
            let cfg = CompareConfig {
                train: hyper.config(cli.seed),
                holdout,
            };
            let r = compare_representations(&o, &records, &flatten_corpus(&records), &cfg)?;
            println!("{r}");
            if let Some(p) = report {
                write_json(&p, &r)?;
            }
        }
    }
    Ok(())
}
