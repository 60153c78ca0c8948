//! Recursive transition networks.
//!
//! A [`GrammarSet`] is a set of named graphs. Each transition either consumes
//! one token through a [`LexicalMask`], calls another graph by name, or emits
//! an output string without consuming anything.
//!
//! Text format, one section per graph:
//!
//! ```text
//! # comment
//! graph deDet @main
//! nodes 5
//! initial 0
//! final 4
//! 0 {<dd>} 1
//! 1 de 2
//! 2 :DetCore 3
//! 3 {</dd>} 4
//! ```
//!
//! `initial` defaults to 0. Labels are mask syntax (`<N+m-Hum>`, `<E>`,
//! `<MOT>`, `<NB>`), `:Name` for a call, `{<d>}` for an output, and bare or
//! double-quoted text for a literal.

mod surface;

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use crate::lexicon::LexicalMask;
use crate::span::Tag;

pub use surface::{surfaceize, RewriteRule, RewriteTable, Surfaceized};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Mask(LexicalMask),
    Call(String),
    /// Emitted text; one of the six tag strings, or empty.
    Output(String),
}

impl Label {
    pub fn literal(text: impl Into<String>) -> Self {
        Label::Mask(LexicalMask::Literal(text.into()))
    }

    pub fn epsilon() -> Self {
        Label::Mask(LexicalMask::Epsilon)
    }

    pub fn is_consuming(&self) -> bool {
        matches!(self, Label::Mask(m) if m.is_consuming())
    }

    fn parse(text: &str, line: usize) -> Result<Label, GrammarError> {
        let syntax = |message: String| GrammarError::Syntax { line, message };
        if let Some(name) = text.strip_prefix(':') {
            if name.is_empty() || name.contains(char::is_whitespace) {
                return Err(syntax(format!("bad call label `{text}`")));
            }
            return Ok(Label::Call(name.to_string()));
        }
        if let Some(inner) = text.strip_prefix('{').and_then(|t| t.strip_suffix('}')) {
            if !inner.is_empty() && !Tag::is_markup(inner) {
                return Err(syntax(format!("undeclared output `{inner}`")));
            }
            return Ok(Label::Output(inner.to_string()));
        }
        if text.len() >= 2 && text.starts_with('"') && text.ends_with('"') {
            let inner = &text[1..text.len() - 1];
            if inner.is_empty() {
                return Err(syntax("empty literal".into()));
            }
            return Ok(Label::literal(inner));
        }
        LexicalMask::parse(text)
            .map(Label::Mask)
            .map_err(|e| syntax(e.to_string()))
    }
}

fn needs_quotes(text: &str) -> bool {
    text.is_empty() || text.starts_with([':', '{', '"', '<', '#']) || text.contains(char::is_whitespace)
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Mask(LexicalMask::Literal(text)) if needs_quotes(text) => {
                write!(f, "\"{text}\"")
            }
            Label::Mask(mask) => write!(f, "{mask}"),
            Label::Call(name) => write!(f, ":{name}"),
            Label::Output(text) => write!(f, "{{{text}}}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Transition {
    pub label: Label,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    pub name: String,
    /// Outgoing transitions per node.
    pub nodes: Vec<Vec<Transition>>,
    pub initial: usize,
    pub final_node: usize,
}

impl Graph {
    pub fn new(name: impl Into<String>, node_count: usize, initial: usize, final_node: usize) -> Self {
        Graph {
            name: name.into(),
            nodes: vec![Vec::new(); node_count],
            initial,
            final_node,
        }
    }

    /// Appends a transition. Panics if either node id is out of range.
    pub fn add(&mut self, from: usize, label: Label, to: usize) -> &mut Self {
        assert!(to < self.nodes.len(), "target node {to} out of range");
        self.nodes[from].push(Transition { label, target: to });
        self
    }

    pub fn transitions(&self) -> impl Iterator<Item = (usize, &Transition)> {
        self.nodes
            .iter()
            .enumerate()
            .flat_map(|(i, ts)| ts.iter().map(move |t| (i, t)))
    }

    pub fn transition_count(&self) -> usize {
        self.nodes.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate graph `{name}`")]
    DuplicateGraph { line: usize, name: String },
    #[error("line {line}: node {node} is not declared in graph `{graph}`")]
    UndeclaredNode { line: usize, graph: String, node: usize },
    #[error("graph `{graph}` calls undefined graph `{callee}`")]
    UnresolvedCall { graph: String, callee: String },
    #[error("main graph `{0}` has no associated tag (expected Det, aDet or deDet)")]
    UnknownMain(String),
    #[error("grammar defines no graph")]
    Empty,
    #[error("rewrite table line {line}: {message}")]
    Rewrite { line: usize, message: String },
}

/// Named graphs plus the ordered list of main graphs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GrammarSet {
    graphs: IndexMap<String, Graph>,
    mains: Vec<String>,
}

impl GrammarSet {
    pub fn new() -> Self {
        GrammarSet::default()
    }

    /// Adds a graph; rejects a name already present.
    pub fn insert(&mut self, graph: Graph) -> Result<(), GrammarError> {
        if self.graphs.contains_key(&graph.name) {
            return Err(GrammarError::DuplicateGraph {
                line: 0,
                name: graph.name,
            });
        }
        self.graphs.insert(graph.name.clone(), graph);
        Ok(())
    }

    /// Marks an existing graph as a main graph.
    pub fn add_main(&mut self, name: &str) -> Result<(), GrammarError> {
        if Tag::from_main_graph(name).is_none() {
            return Err(GrammarError::UnknownMain(name.to_string()));
        }
        if !self.mains.iter().any(|m| m == name) {
            self.mains.push(name.to_string());
        }
        Ok(())
    }

    pub fn graph(&self, name: &str) -> Option<&Graph> {
        self.graphs.get(name)
    }

    pub fn graphs(&self) -> impl Iterator<Item = &Graph> {
        self.graphs.values()
    }

    pub fn graph_index(&self, name: &str) -> Option<usize> {
        self.graphs.get_index_of(name)
    }

    pub fn graph_at(&self, index: usize) -> &Graph {
        &self.graphs[index]
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn mains(&self) -> &[String] {
        &self.mains
    }

    /// Checks that every call names a graph of the set.
    pub fn resolve(&self) -> Result<(), GrammarError> {
        for g in self.graphs.values() {
            for (_, t) in g.transitions() {
                if let Label::Call(callee) = &t.label {
                    if !self.graphs.contains_key(callee) {
                        return Err(GrammarError::UnresolvedCall {
                            graph: g.name.clone(),
                            callee: callee.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for GrammarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, g) in self.graphs.values().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "graph {}", g.name)?;
            if self.mains.contains(&g.name) {
                write!(f, " @main")?;
            }
            writeln!(f)?;
            writeln!(f, "nodes {}", g.nodes.len())?;
            writeln!(f, "initial {}", g.initial)?;
            writeln!(f, "final {}", g.final_node)?;
            for (src, t) in g.transitions() {
                writeln!(f, "{} {} {}", src, t.label, t.target)?;
            }
        }
        Ok(())
    }
}

struct PendingGraph {
    name: String,
    line: usize,
    main: bool,
    nodes: Option<usize>,
    initial: usize,
    final_node: Option<usize>,
    transitions: Vec<(usize, usize, Label, usize)>,
}

impl PendingGraph {
    fn finish(self, set: &mut GrammarSet, mains: &mut Vec<String>) -> Result<(), GrammarError> {
        let count = self.nodes.ok_or_else(|| GrammarError::Syntax {
            line: self.line,
            message: format!("graph `{}` has no `nodes` line", self.name),
        })?;
        let final_node = self.final_node.ok_or_else(|| GrammarError::Syntax {
            line: self.line,
            message: format!("graph `{}` has no `final` line", self.name),
        })?;
        let check = |line: usize, node: usize| {
            if node < count {
                Ok(())
            } else {
                Err(GrammarError::UndeclaredNode {
                    line,
                    graph: self.name.clone(),
                    node,
                })
            }
        };
        check(self.line, self.initial)?;
        check(self.line, final_node)?;
        let mut graph = Graph::new(self.name.clone(), count, self.initial, final_node);
        for (line, src, label, dst) in self.transitions {
            check(line, src)?;
            check(line, dst)?;
            if src == final_node {
                return Err(GrammarError::Syntax {
                    line,
                    message: format!("final node {src} of `{}` has an outgoing transition", self.name),
                });
            }
            graph.add(src, label, dst);
        }
        if set.graphs.contains_key(&self.name) {
            return Err(GrammarError::DuplicateGraph {
                line: self.line,
                name: self.name,
            });
        }
        if self.main {
            if Tag::from_main_graph(&self.name).is_none() {
                return Err(GrammarError::UnknownMain(self.name));
            }
            mains.push(self.name.clone());
        }
        set.graphs.insert(self.name, graph);
        Ok(())
    }
}

fn parse_number(word: &str, line: usize) -> Result<usize, GrammarError> {
    word.parse().map_err(|_| GrammarError::Syntax {
        line,
        message: format!("expected a node number, found `{word}`"),
    })
}

/// Parses the textual grammar format; see the module documentation.
pub fn parse_grammar(text: &str) -> Result<GrammarSet, GrammarError> {
    let mut set = GrammarSet::new();
    let mut mains = Vec::new();
    let mut current: Option<PendingGraph> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let syntax = |message: String| GrammarError::Syntax { line, message };
        let (keyword, rest) = trimmed
            .split_once(char::is_whitespace)
            .map_or((trimmed, ""), |(k, r)| (k, r.trim()));
        if keyword == "graph" {
            if let Some(done) = current.take() {
                done.finish(&mut set, &mut mains)?;
            }
            let mut words = rest.split_whitespace();
            let name = words.next().ok_or_else(|| syntax("graph without a name".into()))?;
            let mut main = false;
            for w in words {
                match w {
                    "@main" => main = true,
                    other => return Err(syntax(format!("unexpected `{other}`"))),
                }
            }
            current = Some(PendingGraph {
                name: name.to_string(),
                line,
                main,
                nodes: None,
                initial: 0,
                final_node: None,
                transitions: Vec::new(),
            });
            continue;
        }
        let g = current
            .as_mut()
            .ok_or_else(|| syntax("content before the first `graph` line".into()))?;
        match keyword {
            "nodes" => g.nodes = Some(parse_number(rest, line)?),
            "initial" => g.initial = parse_number(rest, line)?,
            "final" => g.final_node = Some(parse_number(rest, line)?),
            _ => {
                let (label_text, dst) = rest
                    .rsplit_once(char::is_whitespace)
                    .ok_or_else(|| syntax("expected `src LABEL dst`".into()))?;
                let src = parse_number(keyword, line)?;
                let dst = parse_number(dst, line)?;
                let label = Label::parse(label_text.trim(), line)?;
                if g.nodes.is_none() {
                    return Err(syntax("transition before the `nodes` line".into()));
                }
                g.transitions.push((line, src, label, dst));
            }
        }
    }
    match current {
        Some(done) => done.finish(&mut set, &mut mains)?,
        None => return Err(GrammarError::Empty),
    }
    set.mains = mains;
    set.resolve()?;
    Ok(set)
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Diagnostic {
    UnresolvedCall {
        graph: String,
        node: usize,
        callee: String,
    },
    MissingMain(String),
    BadEndpoint {
        graph: String,
        node: usize,
    },
    FinalHasTransitions {
        graph: String,
    },
    Unreachable {
        graph: String,
        node: usize,
    },
    NotCoReachable {
        graph: String,
        node: usize,
    },
    EpsilonCycle {
        graph: String,
        nodes: Vec<usize>,
    },
    BadOutput {
        graph: String,
        node: usize,
        text: String,
    },
    /// Graphs reachable from themselves through calls without consuming a
    /// token; matching relies on the depth bound for these.
    LeftRecursion {
        graphs: Vec<String>,
    },
    /// A rewrite rule with the same left-hand side as an earlier one.
    ShadowedRule {
        rule: String,
    },
}

impl Diagnostic {
    pub fn severity(&self) -> Severity {
        match self {
            Diagnostic::LeftRecursion { .. } | Diagnostic::ShadowedRule { .. } => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity() {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{level}: ")?;
        match self {
            Diagnostic::UnresolvedCall { graph, node, callee } => {
                write!(f, "{graph}:{node} calls undefined graph `{callee}`")
            }
            Diagnostic::MissingMain(name) => write!(f, "main graph `{name}` is not defined"),
            Diagnostic::BadEndpoint { graph, node } => {
                write!(f, "{graph}: initial or final node {node} out of range")
            }
            Diagnostic::FinalHasTransitions { graph } => {
                write!(f, "{graph}: final node has outgoing transitions")
            }
            Diagnostic::Unreachable { graph, node } => {
                write!(f, "{graph}:{node} is unreachable from the initial node")
            }
            Diagnostic::NotCoReachable { graph, node } => {
                write!(f, "{graph}:{node} has no path to the final node")
            }
            Diagnostic::EpsilonCycle { graph, nodes } => {
                write!(f, "{graph}: cycle without consumption through nodes {nodes:?}")
            }
            Diagnostic::BadOutput { graph, node, text } => {
                write!(f, "{graph}:{node} emits undeclared output `{text}`")
            }
            Diagnostic::LeftRecursion { graphs } => {
                write!(f, "left recursion through {{{}}}", graphs.join(", "))
            }
            Diagnostic::ShadowedRule { rule } => {
                write!(f, "rewrite rule `{rule}` is shadowed by an earlier rule")
            }
        }
    }
}

/// Strongly connected components, iterative Tarjan.
pub(crate) fn strongly_connected(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut next = 0;
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut edge)) = call.last_mut() {
            if let Some(&w) = adj[v].get(*edge) {
                *edge += 1;
                if index[w] == usize::MAX {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    while let Some(w) = stack.pop() {
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
    }
    out
}

fn is_cyclic(comp: &[usize], adj: &[Vec<usize>]) -> bool {
    comp.len() > 1 || adj[comp[0]].contains(&comp[0])
}

pub(crate) fn reachable(start: usize, adj: &[Vec<usize>]) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen
}

/// Graphs that can be traversed from initial to final without consuming.
fn nullable_graphs(g: &GrammarSet) -> Vec<bool> {
    let mut nullable = vec![false; g.len()];
    loop {
        let mut changed = false;
        for (gi, graph) in g.graphs.values().enumerate() {
            if nullable[gi] {
                continue;
            }
            let reach = silent_reach(g, graph, &nullable);
            if reach[graph.final_node] {
                nullable[gi] = true;
                changed = true;
            }
        }
        if !changed {
            return nullable;
        }
    }
}

/// Nodes reachable from the initial node without consuming a token.
fn silent_reach(g: &GrammarSet, graph: &Graph, nullable: &[bool]) -> Vec<bool> {
    let adj: Vec<Vec<usize>> = graph
        .nodes
        .iter()
        .map(|ts| {
            ts.iter()
                .filter(|t| match &t.label {
                    Label::Mask(m) => !m.is_consuming(),
                    Label::Output(_) => true,
                    Label::Call(c) => g.graph_index(c).is_some_and(|i| nullable[i]),
                })
                .map(|t| t.target)
                .collect()
        })
        .collect();
    reachable(graph.initial, &adj)
}

/// Structural checks; an empty list means the set is well formed.
pub fn validate(g: &GrammarSet) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for m in &g.mains {
        if g.graph(m).is_none() {
            out.push(Diagnostic::MissingMain(m.clone()));
        }
    }
    for graph in g.graphs.values() {
        let n = graph.nodes.len();
        let name = || graph.name.clone();
        if graph.initial >= n || graph.final_node >= n {
            out.push(Diagnostic::BadEndpoint {
                graph: name(),
                node: graph.initial.max(graph.final_node),
            });
            continue;
        }
        if !graph.nodes[graph.final_node].is_empty() {
            out.push(Diagnostic::FinalHasTransitions { graph: name() });
        }
        let mut forward = vec![Vec::new(); n];
        let mut backward = vec![Vec::new(); n];
        let mut silent = vec![Vec::new(); n];
        for (src, t) in graph.transitions() {
            forward[src].push(t.target);
            backward[t.target].push(src);
            match &t.label {
                Label::Call(callee) if g.graph(callee).is_none() => out.push(Diagnostic::UnresolvedCall {
                    graph: name(),
                    node: src,
                    callee: callee.clone(),
                }),
                Label::Output(text) if !text.is_empty() && !Tag::is_markup(text) => out.push(Diagnostic::BadOutput {
                    graph: name(),
                    node: src,
                    text: text.clone(),
                }),
                Label::Output(_) | Label::Mask(LexicalMask::Epsilon) => silent[src].push(t.target),
                _ => {}
            }
        }
        let from_initial = reachable(graph.initial, &forward);
        let to_final = reachable(graph.final_node, &backward);
        for node in 0..n {
            if !from_initial[node] {
                out.push(Diagnostic::Unreachable { graph: name(), node });
            } else if !to_final[node] {
                out.push(Diagnostic::NotCoReachable { graph: name(), node });
            }
        }
        for comp in strongly_connected(&silent) {
            if is_cyclic(&comp, &silent) {
                out.push(Diagnostic::EpsilonCycle {
                    graph: name(),
                    nodes: comp,
                });
            }
        }
    }
    out.extend(left_recursion(g));
    out
}

fn left_recursion(g: &GrammarSet) -> Vec<Diagnostic> {
    let nullable = nullable_graphs(g);
    let calls: Vec<Vec<usize>> = g
        .graphs
        .values()
        .map(|graph| {
            if graph.initial >= graph.nodes.len() || graph.final_node >= graph.nodes.len() {
                return Vec::new();
            }
            let reach = silent_reach(g, graph, &nullable);
            let mut callees: Vec<usize> = graph
                .transitions()
                .filter(|(src, _)| reach[*src])
                .filter_map(|(_, t)| match &t.label {
                    Label::Call(c) => g.graph_index(c),
                    _ => None,
                })
                .collect();
            callees.sort_unstable();
            callees.dedup();
            callees
        })
        .collect();
    strongly_connected(&calls)
        .into_iter()
        .filter(|comp| is_cyclic(comp, &calls))
        .map(|comp| Diagnostic::LeftRecursion {
            graphs: comp.iter().map(|&i| g.graph_at(i).name.clone()).collect(),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Statistics

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct GrammarStats {
    pub graphs: usize,
    pub transitions: usize,
    /// Distinct literal token texts across all graphs.
    pub lexical_tokens: usize,
    pub mains: Vec<String>,
}

pub fn stats(g: &GrammarSet) -> GrammarStats {
    let mut literals = BTreeSet::new();
    let mut transitions = 0;
    for graph in g.graphs() {
        transitions += graph.transition_count();
        for (_, t) in graph.transitions() {
            if let Label::Mask(LexicalMask::Literal(text)) = &t.label {
                literals.insert(text.as_str());
            }
        }
    }
    GrammarStats {
        graphs: g.len(),
        transitions,
        lexical_tokens: literals.len(),
        mains: g.mains.clone(),
    }
}

impl fmt::Display for GrammarStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "graphs\t{}", self.graphs)?;
        writeln!(f, "transitions\t{}", self.transitions)?;
        writeln!(f, "lexical_tokens\t{}", self.lexical_tokens)?;
        writeln!(f, "mains\t{}", self.mains.join(" "))
    }
}
