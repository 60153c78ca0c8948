//! Flattening a recursive network into a finite-state automaton.
//!
//! Calls are inlined up to a depth bound, then non-consuming transitions are
//! removed. Outputs met on the way are carried by the next consuming
//! transition; outputs that trail the last token go on a transition into a
//! dedicated final state. No determinization and no minimization.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::grammar::{GrammarSet, Graph, Label};
use crate::lexicon::{match_mask, LexicalMask, Lexicon, Token};

/// Upper bound on intermediate states while inlining.
const MAX_STATES: usize = 4_000_000;
/// Longest output sequence followed through non-consuming transitions.
const MAX_SILENT_OUTPUTS: usize = 256;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompileError {
    #[error("depth bound must be at least 1")]
    DepthBound,
    #[error("`{0}` is not a main graph")]
    UnknownMain(String),
    #[error("flattening exceeds {MAX_STATES} states")]
    TooLarge,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FsaTransition {
    pub from: usize,
    pub label: LexicalMask,
    /// Outputs emitted along with this transition.
    pub outputs: Vec<String>,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fsa {
    pub name: String,
    pub state_count: usize,
    pub initial: usize,
    pub finals: BTreeSet<usize>,
    /// Sorted by source state, then label text.
    pub transitions: Vec<FsaTransition>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct FsaCounts {
    pub states: usize,
    pub transitions: usize,
}

impl Fsa {
    pub fn counts(&self) -> FsaCounts {
        FsaCounts {
            states: self.state_count,
            transitions: self.transitions.len(),
        }
    }

    /// Every `(end, outputs)` reached by a non-empty accepting path that
    /// starts at token `start`. See [`FsaRunner`] for repeated queries.
    pub fn matches_from(&self, tokens: &[Token], start: usize, lexicon: &Lexicon) -> BTreeSet<(usize, Vec<String>)> {
        FsaRunner::new(self).matches_from(tokens, start, lexicon)
    }
}

/// An [`Fsa`] with transitions indexed by source state.
pub struct FsaRunner<'a> {
    fsa: &'a Fsa,
    by_source: Vec<Vec<&'a FsaTransition>>,
}

impl<'a> FsaRunner<'a> {
    pub fn new(fsa: &'a Fsa) -> Self {
        let mut by_source: Vec<Vec<&FsaTransition>> = vec![Vec::new(); fsa.state_count];
        for t in &fsa.transitions {
            by_source[t.from].push(t);
        }
        FsaRunner { fsa, by_source }
    }

    pub fn matches_from(&self, tokens: &[Token], start: usize, lexicon: &Lexicon) -> BTreeSet<(usize, Vec<String>)> {
        let mut found = BTreeSet::new();
        let mut frontier: BTreeSet<(usize, Vec<String>)> = BTreeSet::from([(self.fsa.initial, Vec::new())]);
        let mut pos = start;
        while !frontier.is_empty() && pos < tokens.len() {
            let mut next = BTreeSet::new();
            for (state, outs) in &frontier {
                for t in &self.by_source[*state] {
                    if match_mask(&t.label, &tokens[pos], lexicon) {
                        let mut o = outs.clone();
                        o.extend(t.outputs.iter().cloned());
                        next.insert((t.to, o));
                    }
                }
            }
            pos += 1;
            for (state, outs) in &next {
                if self.fsa.finals.contains(state) {
                    found.insert((pos, outs.clone()));
                }
            }
            frontier = next;
        }
        found
    }
}

pub fn count_states(f: &Fsa) -> FsaCounts {
    f.counts()
}

impl fmt::Display for Fsa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "fsa {}", self.name)?;
        writeln!(f, "states {}", self.state_count)?;
        writeln!(f, "initial {}", self.initial)?;
        write!(f, "final")?;
        for s in &self.finals {
            write!(f, " {s}")?;
        }
        writeln!(f)?;
        for t in &self.transitions {
            write!(f, "{} {} {}", t.from, Label::Mask(t.label.clone()), t.to)?;
            for o in &t.outputs {
                write!(f, " {{{o}}}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Inlined network with explicit silent transitions.
#[derive(Default)]
struct Nfa {
    consume: Vec<Vec<(LexicalMask, usize)>>,
    silent: Vec<Vec<(Option<String>, usize)>>,
}

impl Nfa {
    fn state(&mut self) -> Result<usize, CompileError> {
        if self.consume.len() >= MAX_STATES {
            return Err(CompileError::TooLarge);
        }
        self.consume.push(Vec::new());
        self.silent.push(Vec::new());
        Ok(self.consume.len() - 1)
    }

    fn instantiate(
        &mut self,
        g: &GrammarSet,
        graph: &Graph,
        depth: usize,
        bound: usize,
    ) -> Result<(usize, usize), CompileError> {
        let base = self.consume.len();
        for _ in 0..graph.nodes.len() {
            self.state()?;
        }
        for (src, t) in graph.transitions() {
            let (from, to) = (base + src, base + t.target);
            match &t.label {
                Label::Mask(LexicalMask::Epsilon) => self.silent[from].push((None, to)),
                Label::Mask(mask) => self.consume[from].push((mask.clone(), to)),
                Label::Output(text) => {
                    let out = (!text.is_empty()).then(|| text.clone());
                    self.silent[from].push((out, to));
                }
                Label::Call(name) => {
                    // calls beyond the bound are pruned
                    if depth < bound {
                        let callee = g.graph(name).expect("calls are resolved");
                        let (ci, cf) = self.instantiate(g, callee, depth + 1, bound)?;
                        self.silent[from].push((None, ci));
                        self.silent[cf].push((None, to));
                    }
                }
            }
        }
        Ok((base + graph.initial, base + graph.final_node))
    }

    /// States reachable without consuming, with the outputs collected.
    fn closure(&self, from: usize) -> Vec<(usize, Vec<String>)> {
        let mut seen: HashSet<(usize, Vec<String>)> = HashSet::new();
        let mut stack = vec![(from, Vec::new())];
        let mut out = Vec::new();
        while let Some((s, outs)) = stack.pop() {
            if !seen.insert((s, outs.clone())) {
                continue;
            }
            for (o, to) in &self.silent[s] {
                let mut next = outs.clone();
                if let Some(o) = o {
                    if next.len() >= MAX_SILENT_OUTPUTS {
                        continue;
                    }
                    next.push(o.clone());
                }
                stack.push((*to, next));
            }
            out.push((s, outs));
        }
        out
    }
}

/// Flattens `main` with calls inlined up to `depth_bound` levels.
pub fn flatten(g: &GrammarSet, main: &str, depth_bound: usize) -> Result<Fsa, CompileError> {
    if depth_bound < 1 {
        return Err(CompileError::DepthBound);
    }
    if !g.mains().iter().any(|m| m == main) {
        return Err(CompileError::UnknownMain(main.to_string()));
    }
    let graph = g
        .graph(main)
        .ok_or_else(|| CompileError::UnknownMain(main.to_string()))?;
    let mut nfa = Nfa::default();
    let (init, fin) = nfa.instantiate(g, graph, 0, depth_bound)?;
    let extra_final = nfa.consume.len();

    let mut closures: HashMap<usize, Vec<(usize, Vec<String>)>> = HashMap::new();
    let mut closure =
        |s: usize| -> Vec<(usize, Vec<String>)> { closures.entry(s).or_insert_with(|| nfa.closure(s)).clone() };

    let mut edges: BTreeSet<FsaTransition> = BTreeSet::new();
    let mut finals = BTreeSet::new();
    let mut queue = VecDeque::from([init]);
    let mut queued = HashSet::from([init]);
    while let Some(p) = queue.pop_front() {
        for (q, outs) in closure(p) {
            if q == fin && p == init {
                finals.insert(init);
            }
            for (label, r) in &nfa.consume[q] {
                edges.insert(FsaTransition {
                    from: p,
                    label: label.clone(),
                    outputs: outs.clone(),
                    to: *r,
                });
                if queued.insert(*r) {
                    queue.push_back(*r);
                }
                for (f, trailing) in closure(*r) {
                    if f != fin {
                        continue;
                    }
                    if trailing.is_empty() {
                        finals.insert(*r);
                    } else {
                        let mut all = outs.clone();
                        all.extend(trailing);
                        edges.insert(FsaTransition {
                            from: p,
                            label: label.clone(),
                            outputs: all,
                            to: extra_final,
                        });
                        finals.insert(extra_final);
                    }
                }
            }
        }
    }
    Ok(trim(main, init, &edges, &finals))
}

/// Keeps states both reachable and co-reachable, renumbered breadth-first.
fn trim(name: &str, init: usize, edges: &BTreeSet<FsaTransition>, finals: &BTreeSet<usize>) -> Fsa {
    let mut out_edges: HashMap<usize, Vec<&FsaTransition>> = HashMap::new();
    let mut in_edges: HashMap<usize, Vec<usize>> = HashMap::new();
    for e in edges {
        out_edges.entry(e.from).or_default().push(e);
        in_edges.entry(e.to).or_default().push(e.from);
    }
    let mut coreach: HashSet<usize> = finals.iter().copied().collect();
    let mut queue: VecDeque<usize> = finals.iter().copied().collect();
    while let Some(s) = queue.pop_front() {
        for &p in in_edges.get(&s).into_iter().flatten() {
            if coreach.insert(p) {
                queue.push_back(p);
            }
        }
    }

    for list in out_edges.values_mut() {
        list.sort_by_cached_key(|e| (Label::Mask(e.label.clone()).to_string(), e.outputs.clone(), e.to));
    }
    let mut ids: HashMap<usize, usize> = HashMap::from([(init, 0)]);
    let mut order = vec![init];
    let mut queue = VecDeque::from([init]);
    while let Some(s) = queue.pop_front() {
        for e in out_edges.get(&s).into_iter().flatten() {
            if coreach.contains(&e.to) && !ids.contains_key(&e.to) {
                ids.insert(e.to, order.len());
                order.push(e.to);
                queue.push_back(e.to);
            }
        }
    }

    let mut transitions: Vec<FsaTransition> = Vec::new();
    for &s in &order {
        for e in out_edges.get(&s).into_iter().flatten() {
            if let Some(&to) = ids.get(&e.to) {
                transitions.push(FsaTransition {
                    from: ids[&s],
                    label: e.label.clone(),
                    outputs: e.outputs.clone(),
                    to,
                });
            }
        }
    }
    transitions.sort_by_cached_key(|t| {
        (
            t.from,
            Label::Mask(t.label.clone()).to_string(),
            t.outputs.clone(),
            t.to,
        )
    });
    Fsa {
        name: name.to_string(),
        state_count: order.len(),
        initial: 0,
        finals: finals.iter().filter_map(|f| ids.get(f).copied()).collect(),
        transitions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;
    use crate::lexicon::tokenize;

    #[test]
    fn single_transition() {
        let g = parse_grammar("graph Det @main\nnodes 2\nfinal 1\n0 le 1\n").unwrap();
        let f = flatten(&g, "Det", 1).unwrap();
        assert_eq!(
            count_states(&f),
            FsaCounts {
                states: 2,
                transitions: 1
            }
        );
        assert_eq!(f.to_string(), "fsa Det\nstates 2\ninitial 0\nfinal 1\n0 le 1\n");
    }

    #[test]
    fn argument_errors() {
        let g = parse_grammar("graph Det @main\nnodes 2\nfinal 1\n0 le 1\ngraph X\nnodes 2\nfinal 1\n0 a 1\n").unwrap();
        assert_eq!(flatten(&g, "Det", 0), Err(CompileError::DepthBound));
        assert_eq!(flatten(&g, "X", 4), Err(CompileError::UnknownMain("X".into())));
        assert_eq!(flatten(&g, "aDet", 4), Err(CompileError::UnknownMain("aDet".into())));
    }

    #[test]
    fn call_free_graph_keeps_its_shape() {
        let g =
            parse_grammar("graph Det @main\nnodes 4\nfinal 3\n0 le 1\n0 la 1\n1 <A> 2\n2 <N> 3\n1 <N> 3\n").unwrap();
        let f = flatten(&g, "Det", 16).unwrap();
        assert_eq!(
            count_states(&f),
            FsaCounts {
                states: 4,
                transitions: 5
            }
        );
        assert_eq!(f.finals.len(), 1);
    }

    #[test]
    fn outputs_fuse_onto_consuming_transitions() {
        let g = parse_grammar("graph Det @main\nnodes 4\nfinal 3\n0 {<d>} 1\n1 le 2\n2 {</d>} 3\n").unwrap();
        let f = flatten(&g, "Det", 1).unwrap();
        assert_eq!(
            f.to_string(),
            "fsa Det\nstates 2\ninitial 0\nfinal 1\n0 le 1 {<d>} {</d>}\n"
        );
        let toks = tokenize("le");
        let found = f.matches_from(&toks, 0, &Lexicon::default());
        assert_eq!(
            found,
            BTreeSet::from([(1, vec!["<d>".to_string(), "</d>".to_string()])])
        );
    }

    #[test]
    fn depth_bound_prunes_recursion() {
        // Det -> y | Det x  (left recursive)
        let g = parse_grammar("graph Det @main\nnodes 3\nfinal 2\n0 :Det 1\n1 x 2\n0 y 2\n").unwrap();
        let lex = Lexicon::default();
        let accepts = |f: &Fsa, s: &str| {
            let toks = tokenize(s);
            f.matches_from(&toks, 0, &lex).iter().any(|(end, _)| *end == toks.len())
        };
        let f2 = flatten(&g, "Det", 2).unwrap();
        assert!(accepts(&f2, "y") && accepts(&f2, "y x") && accepts(&f2, "y x x"));
        assert!(!accepts(&f2, "y x x x"));
        let f1 = flatten(&g, "Det", 1).unwrap();
        assert!(f1.state_count <= f2.state_count);
        assert!(!accepts(&f1, "y x x"));
    }
}
