//! Command implementations behind the `detgram` binary.
//!
//! Each command writes its report to the given writer so that it can be
//! driven from tests as well as from `main`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use detgram_core::evaluator::ReportMode;
use detgram_core::{
    fixtures, flatten, parse_annotated, parse_grammar, score, stats, strip_tags, surfaceize, tag_distribution,
    tokenize, validate, GrammarSet, Lexicon, Matcher, RewriteTable, Severity, TaggedSpan, TokenKind,
    DEFAULT_DEPTH_BOUND,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Input(_) => 2,
            CliError::Validation(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

fn input_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

fn io_error(e: std::io::Error) -> CliError {
    CliError::Input(e.to_string())
}

/// Settings read from an optional TOML file. Command-line flags win.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub grammar: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub rewrites: Option<PathBuf>,
    pub depth: Option<usize>,
    pub no_guard: Option<bool>,
    pub no_surfaceize: Option<bool>,
    pub mode: Option<String>,
    pub json: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| input_error(path, e))?;
        toml::from_str(&text).map_err(|e| input_error(path, e))
    }
}

/// Resolved settings. Missing resource paths fall back to the bundled
/// fixtures.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grammar: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub rewrites: Option<PathBuf>,
    pub depth: usize,
    pub guard: bool,
    pub surfaceize: bool,
    pub mode: ReportMode,
    pub json: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grammar: None,
            lexicon: None,
            rewrites: None,
            depth: DEFAULT_DEPTH_BOUND,
            guard: true,
            surfaceize: true,
            mode: ReportMode::Both,
            json: false,
        }
    }
}

pub fn parse_mode(text: &str) -> Result<ReportMode> {
    match text {
        "merged" => Ok(ReportMode::Merged),
        "pertag" => Ok(ReportMode::PerTag),
        "both" => Ok(ReportMode::Both),
        other => Err(CliError::Usage(format!(
            "unknown mode `{other}` (expected merged, pertag or both)"
        ))),
    }
}

impl RunConfig {
    /// Applies a config file on top of the defaults.
    pub fn with_file(mut self, file: FileConfig) -> Result<Self> {
        self.grammar = file.grammar.or(self.grammar);
        self.lexicon = file.lexicon.or(self.lexicon);
        self.rewrites = file.rewrites.or(self.rewrites);
        if let Some(d) = file.depth {
            self.depth = d;
        }
        if let Some(v) = file.no_guard {
            self.guard = !v;
        }
        if let Some(v) = file.no_surfaceize {
            self.surfaceize = !v;
        }
        if let Some(m) = file.mode {
            self.mode = parse_mode(&m)?;
        }
        if let Some(j) = file.json {
            self.json = j;
        }
        Ok(self)
    }

    fn read(path: &Option<PathBuf>, bundled: &'static str) -> Result<String> {
        match path {
            Some(p) => fs::read_to_string(p).map_err(|e| input_error(p, e)),
            None => Ok(bundled.to_string()),
        }
    }

    fn name(path: &Option<PathBuf>, bundled: &str) -> String {
        path.as_ref().map_or(bundled.to_string(), |p| p.display().to_string())
    }

    /// The normalized grammar, after validation. Warnings go to `err`.
    pub fn load_grammar(&self, err: &mut dyn Write) -> Result<GrammarSet> {
        let name = Self::name(&self.grammar, "<bundled grammar>");
        let text = Self::read(&self.grammar, fixtures::GRAMMAR)?;
        let g = parse_grammar(&text).map_err(|e| CliError::Input(format!("{name}: {e}")))?;
        let diagnostics = validate(&g);
        let mut errors = Vec::new();
        for d in &diagnostics {
            match d.severity() {
                Severity::Warning => writeln!(err, "warning: {d}").map_err(io_error)?,
                Severity::Error => errors.push(d.to_string()),
            }
        }
        if !errors.is_empty() {
            return Err(CliError::Validation(format!("{name}: {}", errors.join("; "))));
        }
        Ok(g)
    }

    /// The grammar used for matching: surfaceized unless disabled.
    pub fn load_matching_grammar(&self, err: &mut dyn Write) -> Result<GrammarSet> {
        let g = self.load_grammar(err)?;
        if !self.surfaceize {
            return Ok(g);
        }
        let name = Self::name(&self.rewrites, "<bundled rewrites>");
        let text = Self::read(&self.rewrites, fixtures::REWRITES)?;
        let table = RewriteTable::parse(&text).map_err(|e| CliError::Input(format!("{name}: {e}")))?;
        let s = surfaceize(&g, &table);
        for d in &s.diagnostics {
            writeln!(err, "warning: {d}").map_err(io_error)?;
        }
        Ok(s.grammar)
    }

    pub fn load_lexicon(&self) -> Result<Lexicon> {
        let name = Self::name(&self.lexicon, "<bundled lexicon>");
        let text = Self::read(&self.lexicon, fixtures::LEXICON)?;
        Lexicon::parse(&text).map_err(|e| CliError::Input(format!("{name}: {e}")))
    }

    fn check_depth(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(CliError::Usage("--depth must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompiledMain {
    pub main: String,
    pub states: usize,
    pub transitions: usize,
}

/// Flattens every main graph. With `out_dir`, each automaton is written to
/// `<main>.fsa` in that directory.
pub fn cmd_compile(
    cfg: &RunConfig,
    out_dir: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<Vec<CompiledMain>> {
    cfg.check_depth()?;
    let started = Instant::now();
    let g = cfg.load_matching_grammar(err)?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| input_error(dir, e))?;
    }
    let mut compiled = Vec::new();
    for main in g.mains() {
        let fsa = flatten(&g, main, cfg.depth).map_err(|e| CliError::Validation(format!("{main}: {e}")))?;
        if let Some(dir) = out_dir {
            let path = dir.join(format!("{main}.fsa"));
            fs::write(&path, fsa.to_string()).map_err(|e| input_error(&path, e))?;
        }
        let c = fsa.counts();
        compiled.push(CompiledMain {
            main: main.clone(),
            states: c.states,
            transitions: c.transitions,
        });
    }
    if cfg.json {
        let json = serde_json::to_string_pretty(&compiled).expect("serializable");
        writeln!(out, "{json}").map_err(io_error)?;
    } else {
        for c in &compiled {
            writeln!(out, "{}\tstates {}\ttransitions {}", c.main, c.states, c.transitions).map_err(io_error)?;
        }
    }
    writeln!(err, "compiled in {:.3} s", started.elapsed().as_secs_f64()).map_err(io_error)?;
    Ok(compiled)
}

/// Figures reported on the timing line of `annotate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Throughput {
    pub tokens: usize,
    pub words: usize,
    pub seconds: f64,
    pub words_per_second: f64,
    pub tokens_per_second: f64,
}

impl std::fmt::Display for Throughput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "tokens {}\twords {}\tseconds {:.3}\twords/s {:.0}\ttokens/s {:.0}",
            self.tokens, self.words, self.seconds, self.words_per_second, self.tokens_per_second
        )
    }
}

/// Parses the timing line written by [`cmd_annotate`].
pub fn parse_timing_line(line: &str) -> Option<Throughput> {
    let mut fields = line.split('\t').map(|f| f.split_once(' '));
    let mut next = |key: &str| -> Option<String> {
        let (k, v) = fields.next()??;
        (k == key).then(|| v.to_string())
    };
    Some(Throughput {
        tokens: next("tokens")?.parse().ok()?,
        words: next("words")?.parse().ok()?,
        seconds: next("seconds")?.parse().ok()?,
        words_per_second: next("words/s")?.parse().ok()?,
        tokens_per_second: next("tokens/s")?.parse().ok()?,
    })
}

fn rate(n: usize, seconds: f64) -> f64 {
    if seconds > 0.0 {
        n as f64 / seconds
    } else {
        f64::INFINITY
    }
}

/// Annotates `input` and writes the tagged text to `out`; the timing line
/// goes to `err`. Words are word and number tokens.
pub fn cmd_annotate(cfg: &RunConfig, input: &str, out: &mut dyn Write, err: &mut dyn Write) -> Result<Throughput> {
    cfg.check_depth()?;
    let g = cfg.load_matching_grammar(err)?;
    let lexicon = cfg.load_lexicon()?;
    let matcher = Matcher::new(&g, &lexicon)
        .with_depth(cfg.depth)
        .with_np_guard(cfg.guard);
    let started = Instant::now();
    let tokens = tokenize(input);
    let tagged = detgram_core::insert_tags(input, &matcher.annotations(&tokens));
    let seconds = started.elapsed().as_secs_f64();
    out.write_all(tagged.as_bytes()).map_err(io_error)?;
    let words = tokens.iter().filter(|t| t.kind != TokenKind::Punct).count();
    let stats = Throughput {
        tokens: tokens.len(),
        words,
        seconds,
        words_per_second: rate(words, seconds),
        tokens_per_second: rate(tokens.len(), seconds),
    };
    writeln!(err, "{stats}").map_err(io_error)?;
    Ok(stats)
}

/// First byte offset where the two texts differ, if they do.
fn first_divergence(a: &str, b: &str) -> Option<usize> {
    if a == b {
        return None;
    }
    let common = a.bytes().zip(b.bytes()).take_while(|(x, y)| x == y).count();
    Some(common)
}

/// Where the hypothesis of `evaluate` comes from.
pub enum Hypothesis<'a> {
    /// A tagged file over the same text as the reference.
    File(&'a Path),
    /// Annotate the reference text with the current configuration.
    Run,
}

pub fn cmd_evaluate(
    cfg: &RunConfig,
    reference: &Path,
    hypothesis: Hypothesis<'_>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<detgram_core::EvalReport> {
    let ref_text = fs::read_to_string(reference).map_err(|e| input_error(reference, e))?;
    let gold = parse_annotated(&ref_text).map_err(|e| input_error(reference, e))?;
    let hyp_text = match hypothesis {
        Hypothesis::File(path) => fs::read_to_string(path).map_err(|e| input_error(path, e))?,
        Hypothesis::Run => {
            let mut tagged = Vec::new();
            cmd_annotate(cfg, &strip_tags(&ref_text), &mut tagged, err)?;
            String::from_utf8(tagged).expect("annotation is UTF-8")
        }
    };
    let hyp = parse_annotated(&hyp_text).map_err(|e| CliError::Input(format!("hypothesis: {e}")))?;
    if let Some(offset) = first_divergence(&gold.raw, &hyp.raw) {
        return Err(CliError::Input(format!(
            "hypothesis text differs from the reference text at byte {offset} once tags are removed"
        )));
    }
    let spans: Vec<TaggedSpan> = hyp.spans;
    let report = score(&gold, &spans).map_err(|e| CliError::Input(e.to_string()))?;
    if cfg.json {
        let json = serde_json::to_string_pretty(&report).expect("serializable");
        writeln!(out, "{json}").map_err(io_error)?;
    } else {
        out.write_all(report.render(cfg.mode).as_bytes()).map_err(io_error)?;
    }
    Ok(report)
}

#[derive(Debug, Serialize)]
struct StatsDump {
    grammar: detgram_core::GrammarStats,
    surface: Option<detgram_core::GrammarStats>,
    lexicon_entries: usize,
    reference: Option<detgram_core::TagDistribution>,
}

/// Grammar and lexicon sizes, and the tag distribution of a reference.
pub fn cmd_stats(cfg: &RunConfig, reference: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let g = cfg.load_grammar(err)?;
    let surface = if cfg.surfaceize {
        Some(stats(&cfg.load_matching_grammar(err)?))
    } else {
        None
    };
    let lexicon = cfg.load_lexicon()?;
    let distribution = match reference {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| input_error(path, e))?;
            Some(tag_distribution(
                &parse_annotated(&text).map_err(|e| input_error(path, e))?,
            ))
        }
        None => None,
    };
    let dump = StatsDump {
        grammar: stats(&g),
        surface,
        lexicon_entries: lexicon.len(),
        reference: distribution,
    };
    if cfg.json {
        let json = serde_json::to_string_pretty(&dump).expect("serializable");
        return writeln!(out, "{json}").map_err(io_error);
    }
    let mut text = String::new();
    text.push_str("[grammar]\n");
    text.push_str(&dump.grammar.to_string());
    if let Some(s) = &dump.surface {
        text.push_str("[surface]\n");
        text.push_str(&s.to_string());
    }
    text.push_str(&format!("[lexicon]\nentries\t{}\n", dump.lexicon_entries));
    if let Some(d) = &dump.reference {
        text.push_str("[reference]\n");
        text.push_str(&d.to_string());
    }
    out.write_all(text.as_bytes()).map_err(io_error)
}
