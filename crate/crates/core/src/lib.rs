//! A local-grammar engine for French generalized determiners.
//!
//! The crate is organised along the processing pipeline:
//!
//! * [`lexicon`]: dictionary parsing, tokenization and lexical masks,
//! * [`grammar`]: recursive transition networks, their text format,
//!   validation and the normalized-to-surface rewriting pass,
//! * [`compiler`]: flattening of a network into a finite-state automaton,
//! * [`matcher`]: direct interpretation of the network over a token stream
//!   and inline XML annotation,
//! * [`evaluator`]: exact-span comparison against a hand-annotated reference.
//!
//! Small bundled resources (a determiner grammar, a lexicon, a rewrite table
//! and a reference corpus) live in [`fixtures`].

pub mod compiler;
pub mod evaluator;
pub mod fixtures;
pub mod grammar;
pub mod lexicon;
pub mod matcher;
mod span;

pub use compiler::{count_states, flatten, CompileError, Fsa, FsaCounts, FsaRunner, FsaTransition};
pub use evaluator::{
    align, parse_annotated, score, tag_distribution, AlignMode, Alignment, Column, ErrorBreakdown, EvalError,
    EvalReport, GoldCorpus, ReportMode, TagDistribution, TaggedSpan,
};
pub use grammar::{
    parse_grammar, stats, surfaceize, validate, Diagnostic, GrammarError, GrammarSet, GrammarStats, Graph, Label,
    RewriteRule, RewriteTable, Severity, Transition,
};
pub use lexicon::{
    match_mask, parse_lexicon, tokenize, LexicalEntry, LexicalMask, Lexicon, LexiconError, Pattern, Pos, Token,
    TokenKind,
};
pub use matcher::{annotate, apply_np_guard, insert_tags, linearize, strip_tags, Annotation, MatchSet, Matcher};
pub use span::{Span, Tag};

/// Call-depth bound shared by the matcher and the compiler.
pub const DEFAULT_DEPTH_BOUND: usize = 16;
