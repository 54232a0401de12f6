use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use autoquery::metrics::{self, DEFAULT_Z};
use autoquery::pipeline::Settings;
use autoquery::querygen::parse_techniques;
use autoquery::service;
use autoquery::workspace::{self, Workspace};
use autoquery::Error;

/// Generate, prune, answer and review questions over text corpuses.
#[derive(Parser)]
#[command(name = "autoquery", version)]
struct Cli {
    /// Workspace directory.
    #[arg(long, global = true, default_value = ".")]
    workspace: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Overrides {
    /// Confidence threshold in [0, 1].
    #[arg(long)]
    theta: Option<f64>,
    /// Answers kept per query.
    #[arg(long)]
    topk: Option<usize>,
    /// Minimum mentions for an object to join the co-occurrence model.
    #[arg(long)]
    min_count: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Create the workspace directories and default lexicon files.
    Init,
    /// Add a corpus (plain text, or .jsonl with doc_id/title/text records).
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        id: String,
    },
    /// Extract and type objects from every corpus.
    Objects,
    /// Generate queries from the extracted objects.
    Generate {
        /// Comma-separated technique names, or `all`.
        #[arg(long, default_value = "all")]
        techniques: String,
        #[arg(long)]
        max_queries: Option<usize>,
    },
    /// Apply rule tables and confidence pruning.
    Prune {
        #[command(flatten)]
        o: Overrides,
    },
    /// Answer live queries and add analogy follow-ups.
    Answer {
        #[command(flatten)]
        o: Overrides,
    },
    /// Run objects, generate, prune and answer in sequence.
    Run {
        #[arg(long, default_value = "all")]
        techniques: String,
        #[arg(long)]
        max_queries: Option<usize>,
        #[command(flatten)]
        o: Overrides,
    },
    /// Print a metrics report.
    Metrics {
        #[arg(value_enum)]
        report: Report,
        #[arg(long)]
        theta: Option<f64>,
        /// Normal quantile for the precision interval.
        #[arg(long, default_value_t = DEFAULT_Z)]
        z: f64,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// List live queries answered below the threshold.
    Gaps {
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Score corpus pairs and group corpuses.
    Pair {
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        theta: Option<f64>,
    },
    /// Draw a review sample.
    Sample {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Allocate the sample across query kinds.
        #[arg(long)]
        stratify: bool,
    },
    /// Label log maintenance.
    Labels {
        #[command(subcommand)]
        command: LabelsCommand,
    },
    /// Serve the review API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        theta: Option<f64>,
    },
    /// Show artifact counts.
    Status,
}

#[derive(Subcommand)]
enum LabelsCommand {
    /// Append labels from a CSV with query_id,category,answer_correct,reviewer,ts.
    Import {
        #[arg(long)]
        csv: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Report {
    Coverage,
    Precision,
    Utility,
}

fn settings(ws: &Workspace, o: &Overrides) -> Result<(Settings, workspace::Config), Error> {
    let cfg = ws.config()?;
    let mut s = cfg.settings.clone();
    if let Some(t) = o.theta {
        s.theta = t;
    }
    if let Some(k) = o.topk {
        s.topk = k;
    }
    if let Some(m) = o.min_count {
        s.min_count = m;
    }
    s.validate()?;
    Ok((s, cfg))
}

fn theta_only(ws: &Workspace, theta: Option<f64>) -> Result<(Settings, workspace::Config), Error> {
    settings(
        ws,
        &Overrides {
            theta,
            ..Overrides::default()
        },
    )
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Error> {
    let root = cli.workspace;
    match cli.command {
        Command::Init => {
            Workspace::create(&root)?;
            println!("initialized {}", root.display());
        }
        Command::Ingest { corpus, id } => {
            let ws = Workspace::create(&root)?;
            let cfg = ws.config()?;
            let lex = ws.lexicons(&cfg)?;
            let c = ws.ingest(&corpus, &id, &lex)?;
            println!(
                "ingested {}: {} documents, {} sentences",
                c.corpus_id,
                c.documents.len(),
                c.sentence_count()
            );
        }
        Command::Objects => {
            let ws = Workspace::open(&root)?;
            let lex = ws.lexicons(&ws.config()?)?;
            let ex = ws.objects_stage(&lex)?;
            println!("{} objects, {} mentions", ex.objects.len(), ex.mentions.len());
        }
        Command::Generate { techniques, max_queries } => {
            let ws = Workspace::open(&root)?;
            let cfg = ws.config()?;
            let lex = ws.lexicons(&cfg)?;
            let kinds = parse_techniques(&techniques)?;
            let qs = ws.generate_stage(&lex, kinds, max_queries.unwrap_or(cfg.settings.max_queries))?;
            println!("{} queries generated", qs.len());
        }
        Command::Prune { o } => {
            let ws = Workspace::open(&root)?;
            let (s, cfg) = settings(&ws, &o)?;
            let lex = ws.lexicons(&cfg)?;
            let qs = ws.prune_stage(&lex, &s)?;
            let pruned = qs.iter().filter(|q| q.state.is_pruned()).count();
            let nonsense = qs.iter().filter(|q| q.state.name() == "nonsense").count();
            println!("{} queries: {pruned} pruned by rules, {nonsense} below threshold", qs.len());
        }
        Command::Answer { o } => {
            let ws = Workspace::open(&root)?;
            let (s, cfg) = settings(&ws, &o)?;
            let lex = ws.lexicons(&cfg)?;
            let (qs, answers) = ws.answer_stage(&lex, &s)?;
            let answered = qs.iter().filter(|q| q.state.name() == "answered").count();
            println!("{} queries, {} answered, {} answer records", qs.len(), answered, answers.len());
        }
        Command::Run { techniques, max_queries, o } => {
            let ws = Workspace::open(&root)?;
            let (s, cfg) = settings(&ws, &o)?;
            let lex = ws.lexicons(&cfg)?;
            let kinds = parse_techniques(&techniques)?;
            let ex = ws.objects_stage(&lex)?;
            let generated = ws.generate_stage(&lex, kinds, max_queries.unwrap_or(s.max_queries))?;
            ws.prune_stage(&lex, &s)?;
            let (qs, _) = ws.answer_stage(&lex, &s)?;
            let r = ws.coverage_report(s.theta)?;
            println!(
                "{} objects, {} generated, {} after follow-ups, coverage {:.4}",
                ex.objects.len(),
                generated.len(),
                qs.len(),
                r.coverage
            );
        }
        Command::Metrics { report, theta, z, json } => {
            let ws = Workspace::open(&root)?;
            match report {
                Report::Coverage => {
                    let (s, _) = theta_only(&ws, theta)?;
                    let r = ws.coverage_report(s.theta)?;
                    if json {
                        print_json(&r)?
                    } else {
                        print!("{}", metrics::coverage_text(&r))
                    }
                }
                Report::Precision => {
                    let p = ws.precision_report(z)?;
                    if json {
                        print_json(&p)?
                    } else {
                        print!("{}", metrics::precision_text(&p))
                    }
                }
                Report::Utility => {
                    let u = ws.utility_report()?;
                    if json {
                        print_json(&u)?
                    } else {
                        print!("{}", metrics::utility_text(&u))
                    }
                }
            }
        }
        Command::Gaps { theta, json } => {
            let ws = Workspace::open(&root)?;
            let (s, _) = theta_only(&ws, theta)?;
            let g = ws.gaps_report(s.theta)?;
            if json {
                print_json(&g)?
            } else {
                print!("{}", metrics::gaps_text(&g))
            }
        }
        Command::Pair { tau, budget, theta } => {
            let ws = Workspace::open(&root)?;
            let (mut s, cfg) = theta_only(&ws, theta)?;
            if let Some(t) = tau {
                s.tau = t;
            }
            if let Some(b) = budget {
                s.budget = b;
            }
            s.validate()?;
            let lex = ws.lexicons(&cfg)?;
            let (scores, groups) = ws.pair_stage(&lex, &s)?;
            print!("{}", autoquery::pairing::pairs_tsv(&scores));
            for g in groups {
                println!("group: {}", g.join(" "));
            }
        }
        Command::Sample { n, seed, stratify } => {
            let ws = Workspace::open(&root)?;
            let (sample, _) = ws.sample_stage(n, seed, stratify)?;
            println!(
                "{} items sampled{}",
                sample.query_ids.len(),
                if sample.exhausted { " (whole population)" } else { "" }
            );
        }
        Command::Labels {
            command: LabelsCommand::Import { csv },
        } => {
            let ws = Workspace::open(&root)?;
            let n = ws.import_labels_csv(&csv)?;
            println!("{n} labels imported");
        }
        Command::Serve { port, theta } => {
            let ws = Workspace::open(&root)?;
            let (s, _) = theta_only(&ws, theta)?;
            let state = service::load_state(ws, s.theta)?;
            let rt = tokio::runtime::Runtime::new()
                .map_err(|e| Error::io(std::path::Path::new("tokio runtime"), e))?;
            rt.block_on(service::serve(state, port))?;
        }
        Command::Status => {
            let ws = Workspace::open(&root)?;
            for (k, v) in workspace::status(&ws) {
                println!("{k:<10} {v}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_) | Error::Threshold(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
