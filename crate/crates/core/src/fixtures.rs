//! Bundled resources: a small determiner grammar with its lexicon and
//! rewrite table, a handful of golden sentences, and a reference corpus.

/// Normalized determiner grammar (mains `Det`, `aDet`, `deDet`).
pub const GRAMMAR: &str = include_str!("../fixtures/det.grammar");

/// Dictionary covering every word of the bundled texts but one
/// (`exportations`), which shows the effect of an unknown head noun.
pub const LEXICON: &str = include_str!("../fixtures/lexicon.dic");

/// Normalized-to-surface contractions and elisions.
pub const REWRITES: &str = include_str!("../fixtures/rewrites.txt");

/// One expected annotation per line; stripping the tags gives the input.
pub const GOLDEN: &str = include_str!("../fixtures/golden.txt");

/// Hand-annotated reference text, one sentence per line.
pub const REFERENCE: &str = include_str!("../fixtures/reference.txt");

/// Output of `annotate` on the reference text with the bundled resources.
pub const REFERENCE_HYPOTHESIS: &str = include_str!("../fixtures/reference.hyp.txt");

/// Evaluation of [`REFERENCE_HYPOTHESIS`] against [`REFERENCE`], computed
/// by a separate brute-force script (`scripts/expected_report.py`).
pub const REFERENCE_REPORT: &str = include_str!("../fixtures/reference.expected.txt");
