//! Scoring annotations against a hand-annotated reference.
//!
//! Two annotations agree when both boundaries coincide. In merged mode the
//! tag is ignored; in per-tag mode it must be equal too.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::matcher::Annotation;
use crate::span::{Span, Tag};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("offset {offset}: unknown tag `{name}`")]
    UnknownTag { offset: usize, name: String },
    #[error("offset {offset}: nested tag")]
    Nested { offset: usize },
    #[error("offset {offset}: unbalanced tag")]
    Unbalanced { offset: usize },
    #[error("offset {offset}: empty annotation")]
    EmptySpan { offset: usize },
    #[error("span {span} exceeds text length {len}")]
    OutOfRange { span: Span, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct TaggedSpan {
    pub tag: Tag,
    pub span: Span,
}

impl From<&Annotation> for TaggedSpan {
    fn from(a: &Annotation) -> Self {
        TaggedSpan {
            tag: a.tag,
            span: a.span,
        }
    }
}

/// Reference text with its tags lifted out as spans over the bare text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldCorpus {
    pub raw: String,
    pub spans: Vec<TaggedSpan>,
}

/// Recognises `<name>` or `</name>` at the start of `s`.
fn markup(s: &str) -> Option<(bool, &str, usize)> {
    let rest = s.strip_prefix('<')?;
    let (closing, rest) = match rest.strip_prefix('/') {
        Some(r) => (true, r),
        None => (false, rest),
    };
    let letters = rest.find(|c: char| !c.is_ascii_alphabetic()).unwrap_or(rest.len());
    if letters == 0 || !rest[letters..].starts_with('>') {
        return None;
    }
    let consumed = 1 + closing as usize + letters + 1;
    Some((closing, &rest[..letters], consumed))
}

/// Parses tagged text such as `obtenir <d>de</d> meilleures conditions`.
/// Error offsets are byte offsets into `text`.
pub fn parse_annotated(text: &str) -> Result<GoldCorpus, EvalError> {
    let mut raw = String::with_capacity(text.len());
    let mut spans = Vec::new();
    let mut open: Option<(Tag, usize, usize)> = None;
    let mut at = 0;
    while let Some(rel) = text[at..].find('<') {
        let offset = at + rel;
        raw.push_str(&text[at..offset]);
        let Some((closing, name, len)) = markup(&text[offset..]) else {
            raw.push('<');
            at = offset + 1;
            continue;
        };
        let tag: Tag = name.parse().map_err(|_| EvalError::UnknownTag {
            offset,
            name: name.to_string(),
        })?;
        match (closing, open) {
            (false, None) => open = Some((tag, raw.len(), offset)),
            (false, Some(_)) => return Err(EvalError::Nested { offset }),
            (true, Some((t, start, _))) if t == tag => {
                if start == raw.len() {
                    return Err(EvalError::EmptySpan { offset });
                }
                spans.push(TaggedSpan {
                    tag,
                    span: Span::new(start, raw.len()),
                });
                open = None;
            }
            (true, _) => return Err(EvalError::Unbalanced { offset }),
        }
        at = offset + len;
    }
    if let Some((_, _, offset)) = open {
        return Err(EvalError::Unbalanced { offset });
    }
    raw.push_str(&text[at..]);
    Ok(GoldCorpus { raw, spans })
}

impl fmt::Display for GoldCorpus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut at = 0;
        for s in &self.spans {
            write!(
                f,
                "{}{}{}{}",
                &self.raw[at..s.span.start],
                s.tag.open(),
                &self.raw[s.span.start..s.span.end],
                s.tag.close()
            )?;
            at = s.span.end;
        }
        f.write_str(&self.raw[at..])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignMode {
    Merged,
    PerTag,
}

/// Outcome of comparing two span lists. Every input span lands in exactly
/// one bucket.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Alignment {
    /// (gold, hyp) pairs with equal boundaries (and equal tags per tag).
    pub matched: Vec<(TaggedSpan, TaggedSpan)>,
    /// Equal boundaries, different tags. Always empty in merged mode.
    pub tag_mismatch: Vec<(TaggedSpan, TaggedSpan)>,
    /// Unmatched gold spans overlapping some hypothesis span.
    pub boundary_gold: Vec<TaggedSpan>,
    /// Unmatched hypothesis spans overlapping some gold span.
    pub boundary_hyp: Vec<TaggedSpan>,
    pub missed: Vec<TaggedSpan>,
    pub spurious: Vec<TaggedSpan>,
}

/// Aligns two lists of non-overlapping spans.
pub fn align(gold: &[TaggedSpan], hyp: &[TaggedSpan], mode: AlignMode) -> Alignment {
    let mut gold: Vec<TaggedSpan> = gold.to_vec();
    let mut hyp: Vec<TaggedSpan> = hyp.to_vec();
    gold.sort_by_key(|s| (s.span, s.tag));
    hyp.sort_by_key(|s| (s.span, s.tag));
    let mut out = Alignment::default();
    let mut gold_used = vec![false; gold.len()];
    let mut hyp_used = vec![false; hyp.len()];
    let (mut i, mut j) = (0, 0);
    while i < gold.len() && j < hyp.len() {
        let (g, h) = (gold[i], hyp[j]);
        match (g.span.start, g.span.end).cmp(&(h.span.start, h.span.end)) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                if mode == AlignMode::Merged || g.tag == h.tag {
                    out.matched.push((g, h));
                } else {
                    out.tag_mismatch.push((g, h));
                }
                gold_used[i] = true;
                hyp_used[j] = true;
                i += 1;
                j += 1;
            }
        }
    }
    let overlaps_any = |s: &TaggedSpan, others: &[TaggedSpan]| {
        // others is sorted by start; only spans starting before s ends matter
        let until = others.partition_point(|o| o.span.start < s.span.end);
        others[..until].iter().any(|o| o.span.overlaps(&s.span))
    };
    for (g, _) in gold.iter().zip(&gold_used).filter(|(_, used)| !**used) {
        if overlaps_any(g, &hyp) {
            out.boundary_gold.push(*g);
        } else {
            out.missed.push(*g);
        }
    }
    for (h, _) in hyp.iter().zip(&hyp_used).filter(|(_, used)| !**used) {
        if overlaps_any(h, &gold) {
            out.boundary_hyp.push(*h);
        } else {
            out.spurious.push(*h);
        }
    }
    out
}

/// Counts and ratios for one report column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Column {
    pub gold_count: usize,
    pub hyp_count: usize,
    pub matched: usize,
    pub precision: f64,
    pub recall: f64,
}

impl Column {
    fn new(gold_count: usize, hyp_count: usize, matched: usize) -> Self {
        let ratio = |n: usize, d: usize| if d == 0 { 1.0 } else { n as f64 / d as f64 };
        Column {
            gold_count,
            hyp_count,
            matched,
            precision: ratio(matched, hyp_count),
            recall: ratio(matched, gold_count),
        }
    }

    pub fn precision_percent(&self) -> u32 {
        percent(self.matched, self.hyp_count, 100)
    }

    pub fn recall_percent(&self) -> u32 {
        percent(self.matched, self.gold_count, 100)
    }
}

/// `n / d` as a whole percentage rounded half-up; `empty` when `d` is 0.
fn percent(n: usize, d: usize, empty: u32) -> u32 {
    if d == 0 {
        return empty;
    }
    ((200 * n + d) / (2 * d)) as u32
}

/// Error counts taken from the per-tag alignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorBreakdown {
    pub tag_mismatch: Vec<(TaggedSpan, TaggedSpan)>,
    pub boundary_mismatch: Vec<TaggedSpan>,
    pub missed: Vec<TaggedSpan>,
    pub spurious: Vec<TaggedSpan>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub merged: Column,
    /// Columns for d, ad and dd, in that order.
    pub per_tag: [Column; 3],
    pub errors: ErrorBreakdown,
}

const COLUMN_TAGS: [Tag; 3] = [Tag::D, Tag::Ad, Tag::Dd];

pub fn score(gold: &GoldCorpus, hyp: &[TaggedSpan]) -> Result<EvalReport, EvalError> {
    if let Some(bad) = hyp
        .iter()
        .find(|h| h.span.end > gold.raw.len() || h.span.start > h.span.end)
    {
        return Err(EvalError::OutOfRange {
            span: bad.span,
            len: gold.raw.len(),
        });
    }
    let merged = align(&gold.spans, hyp, AlignMode::Merged);
    let strict = align(&gold.spans, hyp, AlignMode::PerTag);
    let per_tag = COLUMN_TAGS.map(|tag| {
        Column::new(
            gold.spans.iter().filter(|s| s.tag == tag).count(),
            hyp.iter().filter(|s| s.tag == tag).count(),
            strict.matched.iter().filter(|(g, _)| g.tag == tag).count(),
        )
    });
    let mut boundary_mismatch = strict.boundary_gold.clone();
    boundary_mismatch.extend(strict.boundary_hyp.iter().copied());
    Ok(EvalReport {
        merged: Column::new(gold.spans.len(), hyp.len(), merged.matched.len()),
        per_tag,
        errors: ErrorBreakdown {
            tag_mismatch: strict.tag_mismatch,
            boundary_mismatch,
            missed: strict.missed,
            spurious: strict.spurious,
        },
    })
}

/// Which report columns to print.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportMode {
    Merged,
    PerTag,
    Both,
}

impl EvalReport {
    /// Tab-separated table: columns All, Det, aDet, deDet; rows
    /// Precision and Recall in whole percent, then counts and errors.
    pub fn render(&self, mode: ReportMode) -> String {
        let mut cols: Vec<(&str, &Column)> = Vec::new();
        if mode != ReportMode::PerTag {
            cols.push(("All", &self.merged));
        }
        if mode != ReportMode::Merged {
            for (tag, col) in COLUMN_TAGS.iter().zip(&self.per_tag) {
                cols.push((tag.main_graph(), col));
            }
        }
        let mut out: String = cols.iter().map(|(n, _)| format!("\t{n}")).collect();
        out.push('\n');
        let mut row = |head: &str, cell: &dyn Fn(&Column) -> String| {
            out.push_str(head);
            for (_, c) in &cols {
                out.push('\t');
                out.push_str(&cell(c));
            }
            out.push('\n');
        };
        row("Precision", &|c| format!("{}%", c.precision_percent()));
        row("Recall", &|c| format!("{}%", c.recall_percent()));
        row("Gold", &|c| c.gold_count.to_string());
        row("Hypothesis", &|c| c.hyp_count.to_string());
        row("Matched", &|c| c.matched.to_string());
        let e = &self.errors;
        format!(
            "{out}\ntag_mismatch\t{}\nboundary_mismatch\t{}\nmissed\t{}\nspurious\t{}\n",
            e.tag_mismatch.len(),
            e.boundary_mismatch.len(),
            e.missed.len(),
            e.spurious.len()
        )
    }
}

/// Number and share of gold spans per tag, listed as d, dd, ad.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TagDistribution {
    pub total: usize,
    pub rows: Vec<(Tag, usize, u32)>,
}

pub fn tag_distribution(gold: &GoldCorpus) -> TagDistribution {
    let total = gold.spans.len();
    let rows = [Tag::D, Tag::Dd, Tag::Ad]
        .into_iter()
        .map(|tag| {
            let n = gold.spans.iter().filter(|s| s.tag == tag).count();
            (tag, n, percent(n, total, 0))
        })
        .collect();
    TagDistribution { total, rows }
}

impl fmt::Display for TagDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "total\t{}", self.total)?;
        for (tag, n, pct) in &self.rows {
            writeln!(f, "{tag}\t{n}\t{pct}%")?;
        }
        Ok(())
    }
}
