use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use detgram_cli::{
    cmd_annotate, cmd_compile, cmd_evaluate, cmd_stats, parse_mode, CliError, FileConfig, Hypothesis, RunConfig,
};

/// Annotates French generalized determiners with a local grammar.
#[derive(Parser)]
#[command(name = "detgram", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML file with default settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Normalized grammar (bundled one by default).
    #[arg(long, global = true)]
    grammar: Option<PathBuf>,
    /// Dictionary of `surface,lemma.POS+features` lines (bundled one by default).
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,
    /// Contraction and elision table.
    #[arg(long, global = true)]
    rewrites: Option<PathBuf>,
    /// Maximum number of nested graph calls.
    #[arg(long, global = true)]
    depth: Option<usize>,
    /// Keep matches not followed by a noun phrase.
    #[arg(long, global = true)]
    no_guard: bool,
    /// Use the grammar as written, without contractions and elisions.
    #[arg(long, global = true)]
    no_surfaceize: bool,
    /// Report columns: merged, pertag or both.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the grammar and flatten each main graph.
    Compile {
        /// Directory receiving one `<main>.fsa` per main graph.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tag determiners in a text (standard input by default).
    Annotate { input: Option<PathBuf> },
    /// Score a hypothesis against a reference annotation.
    Evaluate {
        reference: PathBuf,
        /// Tagged hypothesis over the same text.
        #[arg(required_unless_present = "run", conflicts_with = "run")]
        hypothesis: Option<PathBuf>,
        /// Annotate the reference text instead of reading a hypothesis.
        #[arg(long)]
        run: bool,
    },
    /// Grammar, lexicon and reference statistics.
    Stats {
        #[arg(long)]
        reference: Option<PathBuf>,
    },
}

fn config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        cfg = cfg.with_file(FileConfig::load(path)?)?;
    }
    if common.grammar.is_some() {
        cfg.grammar = common.grammar.clone();
    }
    if common.lexicon.is_some() {
        cfg.lexicon = common.lexicon.clone();
    }
    if common.rewrites.is_some() {
        cfg.rewrites = common.rewrites.clone();
    }
    if let Some(d) = common.depth {
        cfg.depth = d;
    }
    if common.no_guard {
        cfg.guard = false;
    }
    if common.no_surfaceize {
        cfg.surfaceize = false;
    }
    if let Some(m) = &common.mode {
        cfg.mode = parse_mode(m)?;
    }
    if common.json {
        cfg.json = true;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = config(&cli.common)?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut err = io::stderr();
    match cli.command {
        Command::Compile { out: dir } => cmd_compile(&cfg, dir.as_deref(), &mut out, &mut err).map(drop),
        Command::Annotate { input } => {
            let text = match input {
                Some(path) => {
                    std::fs::read_to_string(&path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
                }
                None => {
                    let mut s = String::new();
                    io::stdin()
                        .read_to_string(&mut s)
                        .map_err(|e| CliError::Input(format!("standard input: {e}")))?;
                    s
                }
            };
            cmd_annotate(&cfg, &text, &mut out, &mut err).map(drop)
        }
        Command::Evaluate {
            reference,
            hypothesis,
            run,
        } => {
            let hyp = match (&hypothesis, run) {
                (_, true) => Hypothesis::Run,
                (Some(path), false) => Hypothesis::File(path),
                (None, false) => return Err(CliError::Usage("a hypothesis file or --run is required".into())),
            };
            cmd_evaluate(&cfg, &reference, hyp, &mut out, &mut err).map(drop)
        }
        Command::Stats { reference } => cmd_stats(&cfg, reference.as_deref(), &mut out, &mut err),
    }?;
    out.flush().map_err(|e| CliError::Input(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
