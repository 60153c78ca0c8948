use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Half-open byte interval `[start, end)` into a UTF-8 text.
///
/// Both ends always fall on `char` boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

/// Kind of determiner annotation: plain, preceded by *à*, or preceded by *de*.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    D,
    Ad,
    Dd,
}

impl Tag {
    pub const ALL: [Tag; 3] = [Tag::D, Tag::Ad, Tag::Dd];

    pub fn name(self) -> &'static str {
        match self {
            Tag::D => "d",
            Tag::Ad => "ad",
            Tag::Dd => "dd",
        }
    }

    pub fn open(self) -> &'static str {
        match self {
            Tag::D => "<d>",
            Tag::Ad => "<ad>",
            Tag::Dd => "<dd>",
        }
    }

    pub fn close(self) -> &'static str {
        match self {
            Tag::D => "</d>",
            Tag::Ad => "</ad>",
            Tag::Dd => "</dd>",
        }
    }

    /// Main graph conventionally producing this tag.
    pub fn main_graph(self) -> &'static str {
        match self {
            Tag::D => "Det",
            Tag::Ad => "aDet",
            Tag::Dd => "deDet",
        }
    }

    pub fn from_main_graph(name: &str) -> Option<Tag> {
        match name {
            "Det" => Some(Tag::D),
            "aDet" => Some(Tag::Ad),
            "deDet" => Some(Tag::Dd),
            _ => None,
        }
    }

    /// Linearization rank, lower wins: `ad` before `dd` before `d`.
    pub fn priority(self) -> u8 {
        match self {
            Tag::Ad => 0,
            Tag::Dd => 1,
            Tag::D => 2,
        }
    }

    /// Whether `text` is one of the six opening/closing tag strings.
    pub fn is_markup(text: &str) -> bool {
        Tag::ALL.iter().any(|t| t.open() == text || t.close() == text)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "d" => Ok(Tag::D),
            "ad" => Ok(Tag::Ad),
            "dd" => Ok(Tag::Dd),
            other => Err(format!("unknown tag `{other}`")),
        }
    }
}
