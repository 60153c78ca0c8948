//! Rewriting a normalized grammar (`à le`, `de des`) into surface form (`au`,
//! `de`).
//!
//! The rewrite table is read as a left-to-right rewriter with one token of
//! lookahead: a token that may start a contraction or be elided is held back
//! until the next token is known. Composing every graph with that rewriter
//! yields graph variants indexed by the pending state on entry and on exit,
//! so contractions spanning a call or a return are rewritten like any other.
//! Where the next token is not a known literal (a mask, or the end of a main
//! graph), both the plain and the elided forms are kept.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use crate::grammar::{reachable, Diagnostic, GrammarError, GrammarSet, Graph, Label};
use crate::lexicon::LexicalMask;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteRule {
    pub normalized: Vec<String>,
    pub surface: Vec<String>,
    /// Applies only before a vowel-initial token (elision).
    pub if_vowel: bool,
}

impl fmt::Display for RewriteRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.normalized.join("+"), self.surface.join("+"))?;
        if self.if_vowel {
            write!(f, " if-vowel")?;
        }
        Ok(())
    }
}

/// Ordered rewrite rules. Two shapes are supported: unconditional pair
/// contractions (`de+le -> du`) and single-token elisions before a vowel
/// (`de -> d' if-vowel`).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RewriteTable {
    rules: Vec<RewriteRule>,
}

impl RewriteTable {
    pub fn new(rules: Vec<RewriteRule>) -> Result<Self, GrammarError> {
        for (i, r) in rules.iter().enumerate() {
            check_rule(r, i + 1)?;
        }
        Ok(RewriteTable { rules })
    }

    /// Parses lines `norm+norm -> surf[+surf] [if-vowel]`.
    pub fn parse(text: &str) -> Result<Self, GrammarError> {
        let mut rules = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let err = |message: &str| GrammarError::Rewrite {
                line,
                message: message.to_string(),
            };
            let (lhs, rhs) = trimmed.split_once("->").ok_or_else(|| err("missing `->`"))?;
            let mut rhs_words = rhs.split_whitespace();
            let surface = rhs_words.next().ok_or_else(|| err("empty right-hand side"))?;
            let if_vowel = match rhs_words.next() {
                None => false,
                Some("if-vowel") => true,
                Some(_) => return Err(err("expected `if-vowel` after the surface form")),
            };
            if rhs_words.next().is_some() {
                return Err(err("trailing text"));
            }
            let split = |s: &str| -> Vec<String> { s.trim().split('+').map(str::to_string).collect() };
            let rule = RewriteRule {
                normalized: split(lhs),
                surface: split(surface),
                if_vowel,
            };
            check_rule(&rule, line)?;
            rules.push(rule);
        }
        Ok(RewriteTable { rules })
    }

    pub fn rules(&self) -> &[RewriteRule] {
        &self.rules
    }
}

fn check_rule(rule: &RewriteRule, line: usize) -> Result<(), GrammarError> {
    let err = |message: &str| {
        Err(GrammarError::Rewrite {
            line,
            message: message.to_string(),
        })
    };
    if rule.normalized.iter().chain(&rule.surface).any(String::is_empty) {
        return err("empty token");
    }
    match (rule.normalized.len(), rule.if_vowel) {
        (1, true) if rule.surface.len() == 1 => Ok(()),
        (1, true) => err("an elision rewrites one token into one token"),
        (1, false) => err("a single-token rule must be conditional (`if-vowel`)"),
        (2, false) => Ok(()),
        (2, true) => err("a contraction cannot be conditional"),
        _ => err("left-hand side must have one or two tokens"),
    }
}

/// Result of [`surfaceize`].
#[derive(Debug, Clone)]
pub struct Surfaceized {
    pub grammar: GrammarSet,
    pub diagnostics: Vec<Diagnostic>,
}

/// Starts with a vowel, for elision purposes.
pub(crate) fn vowel_initial(token: &str) -> bool {
    token
        .chars()
        .next()
        .and_then(|c| c.to_lowercase().next())
        .is_some_and(|c| "aeiouéèêàh".contains(c))
}

/// Lookahead state of the rewriter.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Pending {
    Nothing,
    One(String),
    /// A contraction whose second token may still be elided.
    Two(String, String),
}

impl fmt::Display for Pending {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pending::Nothing => f.write_str("_"),
            Pending::One(x) => f.write_str(x),
            Pending::Two(x, y) => write!(f, "{x}+{y}"),
        }
    }
}

struct Rewriter {
    pairs: HashMap<(String, String), Vec<String>>,
    elisions: HashMap<String, String>,
    prefixes: Vec<String>,
}

impl Rewriter {
    fn new(table: &RewriteTable, diagnostics: &mut Vec<Diagnostic>) -> Self {
        let mut pairs = HashMap::new();
        let mut elisions = HashMap::new();
        let mut prefixes: Vec<String> = Vec::new();
        for rule in &table.rules {
            let fresh = if rule.if_vowel {
                match elisions.entry(rule.normalized[0].clone()) {
                    Entry::Occupied(_) => false,
                    Entry::Vacant(v) => {
                        v.insert(rule.surface[0].clone());
                        true
                    }
                }
            } else {
                match pairs.entry((rule.normalized[0].clone(), rule.normalized[1].clone())) {
                    Entry::Occupied(_) => false,
                    Entry::Vacant(v) => {
                        if !prefixes.contains(&v.key().0) {
                            prefixes.push(v.key().0.clone());
                        }
                        v.insert(rule.surface.clone());
                        true
                    }
                }
            };
            if !fresh {
                diagnostics.push(Diagnostic::ShadowedRule { rule: rule.to_string() });
            }
        }
        Rewriter {
            pairs,
            elisions,
            prefixes,
        }
    }

    fn holds(&self, t: &str) -> bool {
        self.elisions.contains_key(t) || self.prefixes.iter().any(|p| p == t)
    }

    fn elide<'a>(&'a self, x: &'a str) -> &'a str {
        self.elisions.get(x).map_or(x, String::as_str)
    }

    fn pair(&self, x: &str, y: &str) -> Option<&Vec<String>> {
        self.pairs.get(&(x.to_string(), y.to_string()))
    }

    /// Every lookahead state the rewriter can be in.
    fn states(&self) -> Vec<Pending> {
        let mut held: Vec<&String> = self.prefixes.iter().chain(self.elisions.keys()).collect();
        held.sort();
        held.dedup();
        let mut out = vec![Pending::Nothing];
        out.extend(held.into_iter().map(|x| Pending::One(x.clone())));
        let mut twos: Vec<_> = self
            .pairs
            .keys()
            .filter(|(_, y)| self.elisions.contains_key(y))
            .map(|(x, y)| Pending::Two(x.clone(), y.clone()))
            .collect();
        twos.sort();
        out.extend(twos);
        out
    }

    /// Flushes `x` in front of `next`.
    fn flush_one(&self, x: &str, next_is_vowel: bool) -> String {
        if next_is_vowel {
            self.elide(x).to_string()
        } else {
            x.to_string()
        }
    }

    /// Outputs of `Two(x, y)` when `y` ends up elided.
    fn split_two(&self, x: &str, y: &str) -> Vec<String> {
        vec![self.flush_one(x, vowel_initial(y)), self.elide(y).to_string()]
    }

    /// Reads a known literal: tokens to emit and the next state.
    fn read_literal(&self, state: &Pending, t: &str) -> (Vec<String>, Pending) {
        match state {
            Pending::Nothing => {
                if self.holds(t) {
                    (Vec::new(), Pending::One(t.to_string()))
                } else {
                    (vec![t.to_string()], Pending::Nothing)
                }
            }
            Pending::One(x) => match self.pair(x, t) {
                Some(_) if self.elisions.contains_key(t) => (Vec::new(), Pending::Two(x.clone(), t.to_string())),
                Some(surface) => (surface.clone(), Pending::Nothing),
                None => {
                    let mut out = vec![self.flush_one(x, vowel_initial(t))];
                    let (rest, next) = self.read_literal(&Pending::Nothing, t);
                    out.extend(rest);
                    (out, next)
                }
            },
            Pending::Two(x, y) => {
                let mut out = if vowel_initial(t) {
                    self.split_two(x, y)
                } else {
                    self.pair(x, y).cloned().unwrap_or_default()
                };
                let (rest, next) = self.read_literal(&Pending::Nothing, t);
                out.extend(rest);
                (out, next)
            }
        }
    }

    /// Possible flushes before a token whose text is not known.
    fn flush_unknown(&self, state: &Pending) -> Vec<Vec<String>> {
        let mut out = match state {
            Pending::Nothing => vec![Vec::new()],
            Pending::One(x) => vec![vec![x.clone()], vec![self.elide(x).to_string()]],
            Pending::Two(x, y) => vec![self.pair(x, y).cloned().unwrap_or_default(), self.split_two(x, y)],
        };
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Exit {
    Return(Pending),
    /// Entry point of a main graph: leftover lookahead is flushed at the end.
    Top,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct VariantKey {
    graph: String,
    entry: Pending,
    exit: Exit,
}

impl VariantKey {
    fn name(&self) -> String {
        match &self.exit {
            Exit::Top => self.graph.clone(),
            Exit::Return(out) => format!("{}[{}/{}]", self.graph, self.entry, out),
        }
    }
}

/// Composed graph before trimming; calls refer to variant keys.
struct Draft {
    nodes: Vec<Vec<(DraftLabel, usize)>>,
    initial: usize,
    final_node: usize,
}

#[derive(Clone)]
enum DraftLabel {
    Plain(Label),
    Call(VariantKey),
}

struct Composer<'a> {
    grammar: &'a GrammarSet,
    rw: &'a Rewriter,
    states: Vec<Pending>,
}

impl Composer<'_> {
    fn compose(&self, key: &VariantKey, requests: &mut Vec<VariantKey>) -> Draft {
        let graph = self
            .grammar
            .graph(&key.graph)
            .expect("calls are resolved before surfaceize");
        let mut draft = Draft {
            nodes: Vec::new(),
            initial: 0,
            final_node: 0,
        };
        let mut ids: HashMap<(usize, Pending), usize> = HashMap::new();
        let mut queue = VecDeque::new();
        let mut node_for = |draft: &mut Draft, queue: &mut VecDeque<(usize, Pending, usize)>, n: usize, s: Pending| {
            *ids.entry((n, s.clone())).or_insert_with(|| {
                draft.nodes.push(Vec::new());
                let id = draft.nodes.len() - 1;
                queue.push_back((n, s, id));
                id
            })
        };
        draft.initial = node_for(&mut draft, &mut queue, graph.initial, key.entry.clone());
        let top_final = if key.exit == Exit::Top {
            draft.nodes.push(Vec::new());
            Some(draft.nodes.len() - 1)
        } else {
            None
        };
        // For `Return`, the final node is created on first visit of
        // (graph.final_node, out), or left dangling if never reached.
        let mut return_final = None;

        while let Some((node, state, from)) = queue.pop_front() {
            if node == graph.final_node {
                match (&key.exit, top_final) {
                    (Exit::Top, Some(f)) => {
                        for flush in self.rw.flush_unknown(&state) {
                            chain(&mut draft, from, &flush, f);
                        }
                    }
                    (Exit::Return(out), _) if *out == state => return_final = Some(from),
                    _ => {}
                }
            }
            for t in &graph.nodes[node] {
                match &t.label {
                    Label::Mask(LexicalMask::Literal(text)) => {
                        let (emit, next) = self.rw.read_literal(&state, text);
                        let to = node_for(&mut draft, &mut queue, t.target, next);
                        chain(&mut draft, from, &emit, to);
                    }
                    Label::Mask(LexicalMask::Epsilon) | Label::Output(_) => {
                        let to = node_for(&mut draft, &mut queue, t.target, state.clone());
                        draft.nodes[from].push((DraftLabel::Plain(t.label.clone()), to));
                    }
                    Label::Mask(mask) => {
                        let to = node_for(&mut draft, &mut queue, t.target, Pending::Nothing);
                        for flush in self.rw.flush_unknown(&state) {
                            let mid = if flush.is_empty() {
                                from
                            } else {
                                draft.nodes.push(Vec::new());
                                let mid = draft.nodes.len() - 1;
                                chain(&mut draft, from, &flush, mid);
                                mid
                            };
                            draft.nodes[mid].push((DraftLabel::Plain(Label::Mask(mask.clone())), to));
                        }
                    }
                    Label::Call(callee) => {
                        for out in &self.states {
                            let callee_key = VariantKey {
                                graph: callee.clone(),
                                entry: state.clone(),
                                exit: Exit::Return(out.clone()),
                            };
                            requests.push(callee_key.clone());
                            let to = node_for(&mut draft, &mut queue, t.target, out.clone());
                            draft.nodes[from].push((DraftLabel::Call(callee_key), to));
                        }
                    }
                }
            }
        }
        draft.final_node = match (top_final, return_final) {
            (Some(f), _) => f,
            (None, Some(f)) => f,
            (None, None) => {
                draft.nodes.push(Vec::new());
                draft.nodes.len() - 1
            }
        };
        draft
    }
}

/// Emits `tokens` as a chain of literal transitions from `from` to `to`, or
/// a single epsilon when there is nothing to emit.
fn chain(draft: &mut Draft, from: usize, tokens: &[String], to: usize) {
    if tokens.is_empty() {
        draft.nodes[from].push((DraftLabel::Plain(Label::epsilon()), to));
        return;
    }
    let mut cur = from;
    for (i, tok) in tokens.iter().enumerate() {
        let next = if i + 1 == tokens.len() {
            to
        } else {
            draft.nodes.push(Vec::new());
            draft.nodes.len() - 1
        };
        draft.nodes[cur].push((DraftLabel::Plain(Label::literal(tok.clone())), next));
        cur = next;
    }
}

/// Rewrites a normalized grammar into surface form.
///
/// Every graph reachable from a main graph is specialised on the lookahead
/// state at its entry and exit; main graphs keep their names, other variants
/// are named `Graph[entry/exit]`. Variants that accept nothing are dropped
/// and all graphs are trimmed.
pub fn surfaceize(g: &GrammarSet, table: &RewriteTable) -> Surfaceized {
    let mut diagnostics = Vec::new();
    let rw = Rewriter::new(table, &mut diagnostics);
    let composer = Composer {
        grammar: g,
        rw: &rw,
        states: rw.states(),
    };

    let mut drafts: BTreeMap<VariantKey, Draft> = BTreeMap::new();
    let mut order: Vec<VariantKey> = Vec::new();
    let mut work: Vec<VariantKey> = g
        .mains()
        .iter()
        .rev()
        .map(|m| VariantKey {
            graph: m.clone(),
            entry: Pending::Nothing,
            exit: Exit::Top,
        })
        .collect();
    while let Some(key) = work.pop() {
        if drafts.contains_key(&key) {
            continue;
        }
        let mut requests = Vec::new();
        let draft = composer.compose(&key, &mut requests);
        drafts.insert(key.clone(), draft);
        order.push(key);
        work.extend(requests.into_iter().rev());
    }

    // A variant is productive when its final node can be reached using only
    // calls to productive variants.
    let mut productive: HashMap<VariantKey, bool> = drafts.keys().map(|k| (k.clone(), false)).collect();
    loop {
        let mut changed = false;
        for (key, draft) in &drafts {
            if productive[key] {
                continue;
            }
            let adj = usable_edges(draft, &productive);
            if reachable(draft.initial, &adj)[draft.final_node] {
                productive.insert(key.clone(), true);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut out = GrammarSet::new();
    for key in &order {
        let is_main = key.exit == Exit::Top;
        if !productive[key] && !is_main {
            continue;
        }
        let graph = finish(key, &drafts[key], &productive);
        out.insert(graph).expect("variant names are unique");
    }
    for m in g.mains() {
        out.add_main(m).expect("mains were accepted before");
    }
    Surfaceized {
        grammar: out,
        diagnostics,
    }
}

fn usable_edges(draft: &Draft, productive: &HashMap<VariantKey, bool>) -> Vec<Vec<usize>> {
    draft
        .nodes
        .iter()
        .map(|ts| {
            ts.iter()
                .filter(|(l, _)| match l {
                    DraftLabel::Plain(_) => true,
                    DraftLabel::Call(k) => productive[k],
                })
                .map(|&(_, to)| to)
                .collect()
        })
        .collect()
}

/// Drops calls to unproductive variants, trims, and renumbers nodes in
/// breadth-first order from the initial node.
fn finish(key: &VariantKey, draft: &Draft, productive: &HashMap<VariantKey, bool>) -> Graph {
    let adj = usable_edges(draft, productive);
    let forward = reachable(draft.initial, &adj);
    let mut backward = vec![Vec::new(); adj.len()];
    for (from, tos) in adj.iter().enumerate() {
        for &to in tos {
            backward[to].push(from);
        }
    }
    let coreach = reachable(draft.final_node, &backward);
    let live = |n: usize| forward[n] && coreach[n];

    let mut new_id = vec![usize::MAX; draft.nodes.len()];
    let mut order = Vec::new();
    if live(draft.initial) {
        let mut queue = VecDeque::from([draft.initial]);
        new_id[draft.initial] = 0;
        order.push(draft.initial);
        while let Some(n) = queue.pop_front() {
            for &to in &adj[n] {
                if live(to) && new_id[to] == usize::MAX {
                    new_id[to] = order.len();
                    order.push(to);
                    queue.push_back(to);
                }
            }
        }
    } else {
        // Unproductive main graph: keep it, accepting nothing.
        return Graph::new(key.name(), 2, 0, 1);
    }

    let mut graph = Graph::new(key.name(), order.len(), 0, new_id[draft.final_node]);
    let mut seen = std::collections::HashSet::new();
    for &old in &order {
        for (label, to) in &draft.nodes[old] {
            if !live(*to) {
                continue;
            }
            let label = match label {
                DraftLabel::Plain(l) => l.clone(),
                DraftLabel::Call(k) if productive[k] => Label::Call(k.name()),
                DraftLabel::Call(_) => continue,
            };
            if seen.insert((new_id[old], label.clone(), new_id[*to])) {
                graph.add(new_id[old], label, new_id[*to]);
            }
        }
    }
    graph
}
