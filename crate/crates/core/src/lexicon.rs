//! Simple-word dictionary, tokenizer and lexical masks.
//!
//! Dictionary lines follow `surface,lemma.POS+feat1+feat2`. A surface form may
//! carry several lines; a [`Pattern`] mask matches a token when *any* of its
//! readings satisfies it, which is where lexical ambiguity enters matching.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::span::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pos {
    N,
    A,
    V,
    Adv,
    Det,
    Prep,
    Pro,
    Conj,
    Intj,
    X,
}

impl Pos {
    pub const ALL: [Pos; 10] = [
        Pos::N,
        Pos::A,
        Pos::V,
        Pos::Adv,
        Pos::Det,
        Pos::Prep,
        Pos::Pro,
        Pos::Conj,
        Pos::Intj,
        Pos::X,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Pos::N => "N",
            Pos::A => "A",
            Pos::V => "V",
            Pos::Adv => "ADV",
            Pos::Det => "DET",
            Pos::Prep => "PREP",
            Pos::Pro => "PRO",
            Pos::Conj => "CONJ",
            Pos::Intj => "INTJ",
            Pos::X => "X",
        }
    }
}

impl FromStr for Pos {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pos::ALL.into_iter().find(|p| p.code() == s).ok_or(())
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LexiconError {
    #[error("line {line}: missing `,` between surface form and lemma")]
    MissingComma { line: usize },
    #[error("line {line}: missing `.` before the part of speech")]
    MissingPeriod { line: usize },
    #[error("line {line}: unknown part of speech `{pos}`")]
    UnknownPos { line: usize, pos: String },
    #[error("line {line}: empty {field}")]
    EmptyField { line: usize, field: &'static str },
    #[error("line {line}: duplicate feature `{feature}`")]
    DuplicateFeature { line: usize, feature: String },
    #[error("invalid lexical mask `{0}`")]
    BadMask(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LexicalEntry {
    pub surface: String,
    pub lemma: String,
    pub pos: Pos,
    pub features: BTreeSet<String>,
}

impl LexicalEntry {
    pub fn has_feature(&self, feature: &str) -> bool {
        self.features.contains(feature)
    }
}

impl fmt::Display for LexicalEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}.{}", self.surface, self.lemma, self.pos)?;
        for feat in &self.features {
            write!(f, "+{feat}")?;
        }
        Ok(())
    }
}

fn parse_entry(line: &str, lineno: usize) -> Result<LexicalEntry, LexiconError> {
    let (surface, rest) = line
        .split_once(',')
        .ok_or(LexiconError::MissingComma { line: lineno })?;
    let (lemma, info) = rest
        .split_once('.')
        .ok_or(LexiconError::MissingPeriod { line: lineno })?;
    if surface.is_empty() || surface.contains('.') {
        return Err(LexiconError::EmptyField {
            line: lineno,
            field: "surface form",
        });
    }
    if lemma.is_empty() {
        return Err(LexiconError::EmptyField {
            line: lineno,
            field: "lemma",
        });
    }
    let mut parts = info.split('+');
    let pos_code = parts.next().unwrap_or_default();
    let pos = pos_code.parse().map_err(|_| LexiconError::UnknownPos {
        line: lineno,
        pos: pos_code.to_string(),
    })?;
    let mut features = BTreeSet::new();
    for feat in parts {
        if feat.is_empty() {
            return Err(LexiconError::EmptyField {
                line: lineno,
                field: "feature",
            });
        }
        if !features.insert(feat.to_string()) {
            return Err(LexiconError::DuplicateFeature {
                line: lineno,
                feature: feat.to_string(),
            });
        }
    }
    Ok(LexicalEntry {
        surface: surface.to_string(),
        lemma: lemma.to_string(),
        pos,
        features,
    })
}

/// Parses dictionary text. Blank lines and `#` comments are skipped; entry
/// order and duplicates are kept.
pub fn parse_lexicon(text: &str) -> Result<Vec<LexicalEntry>, LexiconError> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                None
            } else {
                Some(parse_entry(line, i + 1))
            }
        })
        .collect()
}

/// Dictionary indexed by surface form. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: Vec<LexicalEntry>,
    by_surface: HashMap<String, Vec<usize>>,
}

impl Lexicon {
    pub fn new(entries: Vec<LexicalEntry>) -> Self {
        let mut by_surface: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            by_surface.entry(e.surface.clone()).or_default().push(i);
        }
        Lexicon { entries, by_surface }
    }

    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        parse_lexicon(text).map(Lexicon::new)
    }

    pub fn entries(&self) -> &[LexicalEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// All readings of a token surface, after case folding.
    ///
    /// The surface is looked up as-is, with an initial capital lowered, and,
    /// for words written entirely in capitals, fully lowercased.
    pub fn readings<'a>(&'a self, surface: &str) -> impl Iterator<Item = &'a LexicalEntry> + 'a {
        let mut ids: Vec<usize> = Vec::new();
        for key in lookup_keys(surface) {
            if let Some(found) = self.by_surface.get(key.as_str()) {
                for &i in found {
                    if !ids.contains(&i) {
                        ids.push(i);
                    }
                }
            }
        }
        ids.into_iter().map(move |i| &self.entries[i])
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.readings(surface).next().is_some()
    }
}

fn lower_initial(s: &str) -> Option<String> {
    let mut chars = s.chars();
    let first = chars.next()?;
    if !first.is_uppercase() {
        return None;
    }
    let mut out: String = first.to_lowercase().collect();
    out.push_str(chars.as_str());
    Some(out)
}

fn lookup_keys(surface: &str) -> Vec<String> {
    let mut keys = vec![surface.to_string()];
    if let Some(folded) = lower_initial(surface) {
        keys.push(folded);
    }
    let has_letter = surface.chars().any(char::is_alphabetic);
    if has_letter && !surface.chars().any(char::is_lowercase) {
        let lower = surface.to_lowercase();
        if !keys.contains(&lower) {
            keys.push(lower);
        }
    }
    keys
}

/// `token` equals `literal`, allowing an initial capital on the token side.
fn literal_matches(literal: &str, token: &str) -> bool {
    if literal == token {
        return true;
    }
    let mut chars = token.chars();
    match chars.next() {
        Some(first) if first.is_uppercase() => {
            let mut lowered = [0u8; 16];
            let mut rest = literal;
            for c in first.to_lowercase() {
                let enc = c.encode_utf8(&mut lowered);
                match rest.strip_prefix(&*enc) {
                    Some(r) => rest = r,
                    None => return false,
                }
            }
            rest == chars.as_str()
        }
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Tokens

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Word,
    Number,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub surface: String,
    pub span: Span,
    pub kind: TokenKind,
}

/// Clitics whose elided form ends at the apostrophe: `l'`, `d'`, `qu'`...
const ELIDED: [&str; 9] = ["l", "d", "j", "qu", "n", "s", "c", "m", "t"];

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

fn is_group_separator(c: char) -> bool {
    matches!(c, ' ' | '\u{a0}' | '\u{202f}' | '\u{2009}')
}

/// Splits raw text into words, numbers and punctuation marks.
///
/// Elided clitics (`l'`, `d'`...) end at their apostrophe. Hyphenated words
/// stay whole. Digit groups of three separated by a single (possibly
/// non-breaking or thin) space join the preceding number, as in `100 000`.
/// Whitespace is dropped and any other character is a one-char `Punct`.
pub fn tokenize(raw: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = raw.char_indices().collect();
    let at = |i: usize| chars.get(i).map(|&(_, c)| c);
    let offset = |i: usize| chars.get(i).map_or(raw.len(), |&(o, _)| o);
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i].1;
        let start = i;
        let kind;
        if c.is_whitespace() {
            i += 1;
            continue;
        } else if c.is_ascii_digit() {
            while at(i).is_some_and(|c| c.is_ascii_digit()) {
                i += 1;
            }
            if at(i).is_some_and(char::is_alphabetic) {
                i = scan_word(&chars, start);
                kind = TokenKind::Word;
            } else {
                loop {
                    let group = (1..=3).all(|k| at(i + k).is_some_and(|c| c.is_ascii_digit()));
                    if at(i).is_some_and(is_group_separator) && group && !at(i + 4).is_some_and(|c| c.is_ascii_digit())
                    {
                        i += 4;
                    } else {
                        break;
                    }
                }
                kind = TokenKind::Number;
            }
        } else if c.is_alphabetic() {
            i = scan_word(&chars, start);
            kind = TokenKind::Word;
        } else {
            i += 1;
            kind = TokenKind::Punct;
        }
        let span = Span::new(offset(start), offset(i));
        tokens.push(Token {
            surface: raw[span.start..span.end].to_string(),
            span,
            kind,
        });
    }
    tokens
}

fn scan_word(chars: &[(usize, char)], start: usize) -> usize {
    let at = |i: usize| chars.get(i).map(|&(_, c)| c);
    let mut i = start;
    loop {
        while at(i).is_some_and(char::is_alphanumeric) {
            i += 1;
        }
        match at(i) {
            Some('-') if at(i + 1).is_some_and(char::is_alphabetic) => i += 1,
            Some(c) if is_apostrophe(c) => {
                let word: String = chars[start..i].iter().map(|&(_, c)| c).collect();
                if ELIDED.contains(&word.to_lowercase().as_str()) {
                    return i + 1;
                }
                if at(i + 1).is_some_and(char::is_alphabetic) {
                    i += 1;
                } else {
                    return i;
                }
            }
            _ => return i,
        }
    }
}

// ---------------------------------------------------------------------------
// Masks

/// Feature-structure style pattern over dictionary readings.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern {
    pub lemma: Option<String>,
    pub pos: Option<Pos>,
    pub required: BTreeSet<String>,
    pub forbidden: BTreeSet<String>,
}

impl Pattern {
    pub fn accepts(&self, entry: &LexicalEntry) -> bool {
        self.lemma.as_ref().is_none_or(|l| *l == entry.lemma)
            && self.pos.is_none_or(|p| p == entry.pos)
            && self.required.iter().all(|f| entry.features.contains(f))
            && !self.forbidden.iter().any(|f| entry.features.contains(f))
    }
}

/// Label that a grammar transition uses to recognise one token.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LexicalMask {
    /// Exact token text (an initial capital on the token is tolerated).
    Literal(String),
    /// `<E>`: consumes nothing.
    Epsilon,
    /// `<MOT>`: any word token.
    AnyWord,
    /// `<NB>`: any number written in figures.
    Number,
    Pattern(Pattern),
}

impl LexicalMask {
    pub fn literal(text: impl Into<String>) -> Self {
        LexicalMask::Literal(text.into())
    }

    pub fn is_consuming(&self) -> bool {
        !matches!(self, LexicalMask::Epsilon)
    }

    /// Parses mask syntax: `<E>`, `<MOT>`, `<NB>`, `<N>`, `<prêt.N>`,
    /// `<N+m-Hum>`, `<prêt>`; anything not in angle brackets is a literal.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let bad = || LexiconError::BadMask(text.to_string());
        if text.is_empty() {
            return Err(bad());
        }
        let Some(inner) = text
            .strip_prefix('<')
            .and_then(|t| t.strip_suffix('>'))
            .filter(|t| !t.is_empty())
        else {
            return Ok(LexicalMask::Literal(text.to_string()));
        };
        match inner {
            "E" => return Ok(LexicalMask::Epsilon),
            "MOT" => return Ok(LexicalMask::AnyWord),
            "NB" => return Ok(LexicalMask::Number),
            _ => {}
        }
        let mut pattern = Pattern::default();
        let (lemma, rest) = match inner.split_once('.') {
            Some((l, r)) => (Some(l), r),
            None => (None, inner),
        };
        let head_end = rest.find(['+', '-']).unwrap_or(rest.len());
        let head = &rest[..head_end];
        match lemma {
            Some(l) => {
                if l.is_empty() {
                    return Err(bad());
                }
                pattern.lemma = Some(l.to_string());
                if !head.is_empty() {
                    pattern.pos = Some(head.parse().map_err(|_| bad())?);
                }
            }
            None => {
                if let Ok(pos) = head.parse() {
                    pattern.pos = Some(pos);
                } else if !head.is_empty() {
                    pattern.lemma = Some(head.to_string());
                }
            }
        }
        let mut features = &rest[head_end..];
        while let Some(sign) = features.chars().next() {
            let body = &features[1..];
            let end = body.find(['+', '-']).unwrap_or(body.len());
            let feat = &body[..end];
            if feat.is_empty() {
                return Err(bad());
            }
            let set = if sign == '+' {
                &mut pattern.required
            } else {
                &mut pattern.forbidden
            };
            set.insert(feat.to_string());
            features = &body[end..];
        }
        if pattern.lemma.is_none() && pattern.pos.is_none() && pattern.required.is_empty() {
            return Err(bad());
        }
        if !pattern.required.is_disjoint(&pattern.forbidden) {
            return Err(bad());
        }
        Ok(LexicalMask::Pattern(pattern))
    }
}

impl FromStr for LexicalMask {
    type Err = LexiconError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LexicalMask::parse(s)
    }
}

impl fmt::Display for LexicalMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LexicalMask::Literal(text) => f.write_str(text),
            LexicalMask::Epsilon => f.write_str("<E>"),
            LexicalMask::AnyWord => f.write_str("<MOT>"),
            LexicalMask::Number => f.write_str("<NB>"),
            LexicalMask::Pattern(p) => {
                f.write_str("<")?;
                match (&p.lemma, p.pos) {
                    (Some(l), Some(pos)) => write!(f, "{l}.{pos}")?,
                    (Some(l), None) if l.parse::<Pos>().is_ok() => write!(f, "{l}.")?,
                    (Some(l), None) => f.write_str(l)?,
                    (None, Some(pos)) => write!(f, "{pos}")?,
                    (None, None) => {}
                }
                for r in &p.required {
                    write!(f, "+{r}")?;
                }
                for x in &p.forbidden {
                    write!(f, "-{x}")?;
                }
                f.write_str(">")
            }
        }
    }
}

/// Whether `token` satisfies `mask`. Epsilon never consumes a token and so
/// never matches here; unknown words fail every [`Pattern`].
pub fn match_mask(mask: &LexicalMask, token: &Token, lexicon: &Lexicon) -> bool {
    match mask {
        LexicalMask::Literal(text) => literal_matches(text, &token.surface),
        LexicalMask::Epsilon => false,
        LexicalMask::AnyWord => token.kind == TokenKind::Word,
        LexicalMask::Number => token.kind == TokenKind::Number,
        LexicalMask::Pattern(p) => lexicon.readings(&token.surface).any(|e| p.accepts(e)),
    }
}
