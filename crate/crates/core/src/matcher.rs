//! Locating determiner spans in text.
//!
//! The grammar is interpreted directly as a recursive network: each search
//! configuration carries an interned call stack, and a visited set keeps the
//! exploration finite. Calls deeper than the depth bound are pruned, exactly
//! as the flattening compiler does, so both recognise the same language.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::Serialize;

use crate::grammar::{GrammarSet, Label};
use crate::lexicon::{match_mask, LexicalMask, Lexicon, Pattern, Pos, Token};
use crate::span::{Span, Tag};
use crate::DEFAULT_DEPTH_BOUND;

/// Output sequences longer than this are not followed.
const MAX_OUTPUTS: u32 = 1024;

/// A determiner occurrence proposed by one main graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Annotation {
    pub tag: Tag,
    pub span: Span,
    /// Name of the main graph that produced it.
    pub source: String,
}

impl Annotation {
    fn key(&self) -> (usize, std::cmp::Reverse<usize>, u8, &str) {
        (
            self.span.start,
            std::cmp::Reverse(self.span.len()),
            self.tag.priority(),
            &self.source,
        )
    }
}

/// All matches of all main graphs, sorted by start, then longest first,
/// then tag priority, then source name. Duplicates are removed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchSet {
    matches: Vec<Annotation>,
}

impl MatchSet {
    pub fn new(mut matches: Vec<Annotation>) -> Self {
        matches.sort_by(|a, b| a.key().cmp(&b.key()));
        matches.dedup();
        MatchSet { matches }
    }

    pub fn as_slice(&self) -> &[Annotation] {
        &self.matches
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Annotation> {
        self.matches.iter()
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    pub fn into_vec(self) -> Vec<Annotation> {
        self.matches
    }
}

#[derive(Debug, Clone, Copy)]
enum Step {
    Consume(u32),
    Silent,
    Output(u32),
    Call(u32),
}

#[derive(Debug)]
struct NetGraph {
    nodes: Vec<Vec<(Step, u32)>>,
    initial: u32,
    final_node: u32,
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    parent: u32,
    graph: u32,
    ret: u32,
    depth: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Config {
    node: u32,
    graph: u32,
    frame: u32,
    pos: u32,
    out: u32,
}

/// Scratch state for one search, reused across start positions.
#[derive(Default)]
struct Search {
    frames: Vec<Frame>,
    frame_ids: HashMap<(u32, u32, u32), u32>,
    /// Output sequences as (prefix, output, length).
    outs: Vec<(u32, u32, u32)>,
    out_ids: HashMap<(u32, u32), u32>,
    visited: HashSet<Config>,
    work: Vec<Config>,
}

impl Search {
    fn reset(&mut self) {
        self.frames.clear();
        self.frames.push(Frame {
            parent: 0,
            graph: 0,
            ret: 0,
            depth: 0,
        });
        self.frame_ids.clear();
        self.outs.clear();
        self.outs.push((0, 0, 0));
        self.out_ids.clear();
        self.visited.clear();
        self.work.clear();
    }

    fn push(&mut self, c: Config) {
        if self.visited.insert(c) {
            self.work.push(c);
        }
    }

    fn call(&mut self, parent: u32, graph: u32, ret: u32) -> u32 {
        let depth = self.frames[parent as usize].depth + 1;
        let next = self.frames.len() as u32;
        *self.frame_ids.entry((parent, graph, ret)).or_insert_with(|| {
            self.frames.push(Frame {
                parent,
                graph,
                ret,
                depth,
            });
            next
        })
    }

    fn emit(&mut self, prefix: u32, output: u32) -> Option<u32> {
        let len = self.outs[prefix as usize].2 + 1;
        if len > MAX_OUTPUTS {
            return None;
        }
        let next = self.outs.len() as u32;
        Some(*self.out_ids.entry((prefix, output)).or_insert_with(|| {
            self.outs.push((prefix, output, len));
            next
        }))
    }

    fn outputs(&self, mut id: u32, table: &[String]) -> Vec<String> {
        let mut seq = Vec::new();
        while id != 0 {
            let (prefix, out, _) = self.outs[id as usize];
            seq.push(table[out as usize].clone());
            id = prefix;
        }
        seq.reverse();
        seq
    }
}

/// Per-text cache of mask tests, indexed by token and mask.
struct MaskCache {
    width: usize,
    cells: Vec<u8>,
}

impl MaskCache {
    fn new(tokens: usize, masks: usize) -> Self {
        MaskCache {
            width: masks,
            cells: vec![0; tokens * masks],
        }
    }

    fn test(&mut self, pos: usize, mask: usize, f: impl FnOnce() -> bool) -> bool {
        let cell = &mut self.cells[pos * self.width + mask];
        if *cell == 0 {
            *cell = if f() { 2 } else { 1 };
        }
        *cell == 2
    }
}

/// Compiled view of a grammar set, ready to scan token sequences.
pub struct Matcher<'a> {
    lexicon: &'a Lexicon,
    graphs: Vec<NetGraph>,
    names: Vec<String>,
    masks: Vec<LexicalMask>,
    outputs: Vec<String>,
    mains: Vec<(u32, Tag)>,
    depth: usize,
    np_guard: bool,
}

impl<'a> Matcher<'a> {
    /// Builds a matcher over a resolved grammar set. Calls to unknown graphs
    /// are dropped.
    pub fn new(grammar: &GrammarSet, lexicon: &'a Lexicon) -> Self {
        let mut masks: Vec<LexicalMask> = Vec::new();
        let mut mask_ids: HashMap<LexicalMask, u32> = HashMap::new();
        let mut outputs: Vec<String> = Vec::new();
        let mut output_ids: HashMap<String, u32> = HashMap::new();
        let mut graphs = Vec::with_capacity(grammar.len());
        for g in grammar.graphs() {
            let mut nodes: Vec<Vec<(Step, u32)>> = vec![Vec::new(); g.nodes.len()];
            for (src, t) in g.transitions() {
                let step = match &t.label {
                    Label::Mask(LexicalMask::Epsilon) => Step::Silent,
                    Label::Output(text) if text.is_empty() => Step::Silent,
                    Label::Mask(mask) => {
                        let next = masks.len() as u32;
                        let id = *mask_ids.entry(mask.clone()).or_insert_with(|| {
                            masks.push(mask.clone());
                            next
                        });
                        Step::Consume(id)
                    }
                    Label::Output(text) => {
                        let next = outputs.len() as u32;
                        let id = *output_ids.entry(text.clone()).or_insert_with(|| {
                            outputs.push(text.clone());
                            next
                        });
                        Step::Output(id)
                    }
                    Label::Call(name) => match grammar.graph_index(name) {
                        Some(i) => Step::Call(i as u32),
                        None => continue,
                    },
                };
                nodes[src].push((step, t.target as u32));
            }
            graphs.push(NetGraph {
                nodes,
                initial: g.initial as u32,
                final_node: g.final_node as u32,
            });
        }
        let mains = grammar
            .mains()
            .iter()
            .filter_map(|m| {
                let index = grammar.graph_index(m)?;
                Some((index as u32, Tag::from_main_graph(m)?))
            })
            .collect();
        Matcher {
            lexicon,
            graphs,
            names: grammar.graphs().map(|g| g.name.clone()).collect(),
            masks,
            outputs,
            mains,
            depth: DEFAULT_DEPTH_BOUND,
            np_guard: true,
        }
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth = depth;
        self
    }

    pub fn with_np_guard(mut self, enabled: bool) -> Self {
        self.np_guard = enabled;
        self
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    #[allow(clippy::too_many_arguments)]
    fn run(
        &self,
        tokens: &[Token],
        cache: &mut MaskCache,
        search: &mut Search,
        start: usize,
        main: u32,
        track: bool,
        found: &mut Vec<(usize, u32)>,
    ) {
        search.reset();
        let root = &self.graphs[main as usize];
        search.push(Config {
            node: root.initial,
            graph: main,
            frame: 0,
            pos: start as u32,
            out: 0,
        });
        while let Some(c) = search.work.pop() {
            let graph = &self.graphs[c.graph as usize];
            if c.node == graph.final_node {
                if c.frame == 0 {
                    if c.pos as usize > start {
                        found.push((c.pos as usize, c.out));
                    }
                } else {
                    let f = search.frames[c.frame as usize];
                    search.push(Config {
                        node: f.ret,
                        graph: f.graph,
                        frame: f.parent,
                        ..c
                    });
                }
            }
            for &(step, target) in &graph.nodes[c.node as usize] {
                let next = Config { node: target, ..c };
                match step {
                    Step::Consume(m) => {
                        let pos = c.pos as usize;
                        if pos < tokens.len()
                            && cache.test(pos, m as usize, || {
                                match_mask(&self.masks[m as usize], &tokens[pos], self.lexicon)
                            })
                        {
                            search.push(Config { pos: c.pos + 1, ..next });
                        }
                    }
                    Step::Silent => search.push(next),
                    Step::Output(o) => {
                        if !track {
                            search.push(next);
                        } else if let Some(out) = search.emit(c.out, o) {
                            search.push(Config { out, ..next });
                        }
                    }
                    Step::Call(callee) => {
                        if (search.frames[c.frame as usize].depth as usize) < self.depth {
                            let frame = search.call(c.frame, c.graph, target);
                            search.push(Config {
                                node: self.graphs[callee as usize].initial,
                                graph: callee,
                                frame,
                                ..c
                            });
                        }
                    }
                }
            }
        }
    }

    /// Every `(end, outputs)` such that `main` accepts `tokens[start..end]`
    /// with that output sequence. Empty matches are excluded.
    pub fn recognize(&self, tokens: &[Token], start: usize, main: &str) -> BTreeSet<(usize, Vec<String>)> {
        let Some(index) = self.names.iter().position(|n| n == main) else {
            return BTreeSet::new();
        };
        let mut cache = MaskCache::new(tokens.len(), self.masks.len());
        let mut search = Search::default();
        let mut found = Vec::new();
        self.run(tokens, &mut cache, &mut search, start, index as u32, true, &mut found);
        found
            .into_iter()
            .map(|(end, out)| (end, search.outputs(out, &self.outputs)))
            .collect()
    }

    /// All spans accepted by any main graph, from every start position.
    pub fn enumerate_matches(&self, tokens: &[Token]) -> MatchSet {
        let mut cache = MaskCache::new(tokens.len(), self.masks.len());
        let mut search = Search::default();
        let mut found = Vec::new();
        let mut all = Vec::new();
        for start in 0..tokens.len() {
            for &(main, tag) in &self.mains {
                found.clear();
                self.run(tokens, &mut cache, &mut search, start, main, false, &mut found);
                for &(end, _) in &found {
                    all.push(Annotation {
                        tag,
                        span: Span::new(tokens[start].span.start, tokens[end - 1].span.end),
                        source: self.names[main as usize].clone(),
                    });
                }
            }
        }
        MatchSet::new(all)
    }

    /// Final, non-overlapping annotations of a raw text.
    pub fn annotations(&self, tokens: &[Token]) -> Vec<Annotation> {
        let mut matches = self.enumerate_matches(tokens);
        if self.np_guard {
            matches = apply_np_guard(&matches, tokens, self.lexicon);
        }
        linearize(&matches)
    }

    /// The raw text with determiner tags inserted.
    pub fn annotate(&self, raw: &str) -> String {
        let tokens = crate::lexicon::tokenize(raw);
        insert_tags(raw, &self.annotations(&tokens))
    }
}

/// Annotates `raw` with the default depth bound and the noun-phrase guard.
pub fn annotate(raw: &str, grammar: &GrammarSet, lexicon: &Lexicon) -> String {
    Matcher::new(grammar, lexicon).annotate(raw)
}

/// Keeps only matches followed by `ADV* A* N`.
pub fn apply_np_guard(matches: &MatchSet, tokens: &[Token], lexicon: &Lexicon) -> MatchSet {
    let mask = |pos| {
        LexicalMask::Pattern(Pattern {
            pos: Some(pos),
            ..Pattern::default()
        })
    };
    let (adv, adj, noun) = (mask(Pos::Adv), mask(Pos::A), mask(Pos::N));
    let followed_by_np = |from: usize| {
        // states: 0 = still reading adverbs, 1 = reading adjectives
        let mut states = [true, false];
        for tok in &tokens[from..] {
            if match_mask(&noun, tok, lexicon) {
                return true;
            }
            let is_adj = match_mask(&adj, tok, lexicon);
            let next = [states[0] && match_mask(&adv, tok, lexicon), is_adj];
            if !next[0] && !next[1] {
                return false;
            }
            states = next;
        }
        false
    };
    let kept = matches
        .iter()
        .filter(|a| {
            let next = tokens.partition_point(|t| t.span.start < a.span.end);
            followed_by_np(next)
        })
        .cloned()
        .collect();
    MatchSet::new(kept)
}

/// Greedy left-to-right selection of non-overlapping matches, following
/// the [`MatchSet`] order.
pub fn linearize(matches: &MatchSet) -> Vec<Annotation> {
    let mut chosen: Vec<Annotation> = Vec::new();
    let mut end = 0;
    for a in matches.iter() {
        if chosen.is_empty() || a.span.start >= end {
            end = a.span.end;
            chosen.push(a.clone());
        }
    }
    chosen
}

/// Inserts tags around non-overlapping spans, given in text order.
pub fn insert_tags(raw: &str, annotations: &[Annotation]) -> String {
    let mut out = String::with_capacity(raw.len() + annotations.len() * 9);
    let mut at = 0;
    for a in annotations {
        out.push_str(&raw[at..a.span.start]);
        out.push_str(a.tag.open());
        out.push_str(&raw[a.span.start..a.span.end]);
        out.push_str(a.tag.close());
        at = a.span.end;
    }
    out.push_str(&raw[at..]);
    out
}

/// Removes every determiner tag from `text`.
pub fn strip_tags(text: &str) -> String {
    let markup: Vec<&str> = Tag::ALL.iter().flat_map(|t| [t.open(), t.close()]).collect();
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(i) = rest.find('<') {
        out.push_str(&rest[..i]);
        rest = &rest[i..];
        match markup.iter().find(|m| rest.starts_with(**m)) {
            Some(m) => rest = &rest[m.len()..],
            None => {
                out.push('<');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
    out
}
