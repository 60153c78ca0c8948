//! Oracles shared by the core tests and the acceptance suite. Checks return
//! their failures instead of panicking so that callers can report them.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use detgram_core::{
    align, fixtures, flatten, linearize, parse_grammar, score, surfaceize, tokenize, AlignMode, Annotation, FsaRunner,
    GoldCorpus, GrammarSet, Label, LexicalMask, Lexicon, MatchSet, Matcher, RewriteTable, Span, Tag, TaggedSpan, Token,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn normalized() -> GrammarSet {
    parse_grammar(fixtures::GRAMMAR).unwrap()
}

pub fn table() -> RewriteTable {
    RewriteTable::parse(fixtures::REWRITES).unwrap()
}

pub fn surface() -> GrammarSet {
    surfaceize(&normalized(), &table()).grammar
}

pub fn lexicon() -> Lexicon {
    Lexicon::parse(fixtures::LEXICON).unwrap()
}

// ---- interpreter versus automaton ----

/// Literals of the grammar, lexicon surfaces and a few numbers.
pub fn vocabulary(g: &GrammarSet, lexicon: &Lexicon) -> Vec<String> {
    let mut words: BTreeSet<String> = lexicon.entries().iter().map(|e| e.surface.clone()).collect();
    for graph in g.graphs() {
        for (_, t) in graph.transitions() {
            if let Label::Mask(LexicalMask::Literal(s)) = &t.label {
                words.insert(s.clone());
            }
        }
    }
    words.extend(["8", "100 000", "40", "%", "exportations", "Le", "De"].map(String::from));
    words.into_iter().collect()
}

/// Determiner-heavy words, drawn more often so that matches are frequent.
const HOT: [&str; 16] = [
    "de", "d'", "le", "la", "l'", "les", "des", "du", "à", "au", "aux", "un", "une", "peu", "partie", "%",
];

/// A token sequence of 1 to 12 tokens.
pub fn sequence(rng: &mut ChaCha8Rng, vocab: &[String]) -> Vec<Token> {
    let len = rng.gen_range(1..=12);
    let words: Vec<&str> = (0..len)
        .map(|_| {
            if rng.gen_bool(0.5) {
                *HOT.choose(rng).unwrap()
            } else {
                vocab.choose(rng).unwrap().as_str()
            }
        })
        .collect();
    // join with a separator the tokenizer never merges, then drop it so
    // that spans stay consistent with the text
    let text = words.join(" | ");
    let tokens: Vec<Token> = tokenize(&text).into_iter().filter(|t| t.surface != "|").collect();
    tokens.into_iter().take(12).collect()
}

pub struct Equivalence {
    pub comparisons: usize,
    /// Matches found at each depth, summed over mains, cases and starts.
    pub matches_per_depth: Vec<(usize, usize)>,
    pub failures: Vec<String>,
}

/// Compares the interpreter with the flattened automaton on `cases` random
/// sequences, at every depth, main graph and start position.
pub fn equivalence(grammar: &GrammarSet, cases: usize, depths: &[usize], seed: u64) -> Equivalence {
    let lexicon = lexicon();
    let vocab = vocabulary(grammar, &lexicon);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<Vec<Token>> = (0..cases).map(|_| sequence(&mut rng, &vocab)).collect();
    let mut result = Equivalence {
        comparisons: 0,
        matches_per_depth: Vec::new(),
        failures: Vec::new(),
    };
    for &depth in depths {
        let matcher = Matcher::new(grammar, &lexicon).with_depth(depth);
        let mut matches = 0;
        for main in grammar.mains() {
            let fsa = match flatten(grammar, main, depth) {
                Ok(fsa) => fsa,
                Err(e) => {
                    result.failures.push(format!("{main} depth {depth}: {e}"));
                    continue;
                }
            };
            let runner = FsaRunner::new(&fsa);
            for tokens in &cases {
                for start in 0..tokens.len() {
                    let rtn = matcher.recognize(tokens, start, main);
                    let fst = runner.matches_from(tokens, start, &lexicon);
                    result.comparisons += 1;
                    if rtn != fst {
                        let words: Vec<&str> = tokens.iter().map(|t| t.surface.as_str()).collect();
                        result.failures.push(format!(
                            "{main} depth {depth} start {start} {words:?}: {rtn:?} vs {fst:?}"
                        ));
                    }
                    matches += rtn.len();
                }
            }
        }
        result.matches_per_depth.push((depth, matches));
    }
    result
}

// ---- surface rewriting ----

pub type Seq = Vec<LexicalMask>;

/// All consuming-label sequences of `main` up to `max_len` labels, with at
/// most `depth` nested calls.
pub fn language(g: &GrammarSet, main: &str, max_len: usize, depth: usize) -> BTreeSet<Seq> {
    struct Walk<'a> {
        g: &'a GrammarSet,
        max_len: usize,
        depth: usize,
        stack: Vec<(String, usize)>,
        seq: Seq,
        out: BTreeSet<Seq>,
    }
    impl Walk<'_> {
        fn go(&mut self, graph: &str, node: usize) {
            let gr = self.g.graph(graph).unwrap();
            if node == gr.final_node {
                match self.stack.pop() {
                    None => {
                        if !self.seq.is_empty() {
                            self.out.insert(self.seq.clone());
                        }
                    }
                    Some((caller, ret)) => {
                        self.go(&caller, ret);
                        self.stack.push((caller, ret));
                    }
                }
            }
            for t in &gr.nodes[node] {
                match &t.label {
                    Label::Mask(LexicalMask::Epsilon) | Label::Output(_) => self.go(graph, t.target),
                    Label::Mask(m) => {
                        if self.seq.len() < self.max_len {
                            self.seq.push(m.clone());
                            self.go(graph, t.target);
                            self.seq.pop();
                        }
                    }
                    Label::Call(c) => {
                        if self.stack.len() < self.depth {
                            self.stack.push((graph.to_string(), t.target));
                            let initial = self.g.graph(c).unwrap().initial;
                            self.go(c, initial);
                            self.stack.pop();
                        }
                    }
                }
            }
        }
    }
    let mut w = Walk {
        g,
        max_len,
        depth,
        stack: Vec::new(),
        seq: Vec::new(),
        out: BTreeSet::new(),
    };
    w.go(main, g.graph(main).unwrap().initial);
    w.out
}

/// Whether the network accepts exactly this label sequence.
pub fn accepts(g: &GrammarSet, main: &str, seq: &[LexicalMask], depth: usize) -> bool {
    type Config = (String, usize, Vec<(String, usize)>, usize);
    let root = g.graph(main).unwrap();
    let mut seen: HashSet<Config> = HashSet::new();
    let mut work: Vec<Config> = vec![(main.to_string(), root.initial, Vec::new(), 0)];
    while let Some(c) = work.pop() {
        if !seen.insert(c.clone()) {
            continue;
        }
        let (graph, node, stack, pos) = c;
        let gr = g.graph(&graph).unwrap();
        if node == gr.final_node {
            match stack.split_last() {
                None if pos == seq.len() => return true,
                None => {}
                Some(((caller, ret), rest)) => work.push((caller.clone(), *ret, rest.to_vec(), pos)),
            }
        }
        for t in &gr.nodes[node] {
            match &t.label {
                Label::Mask(LexicalMask::Epsilon) | Label::Output(_) => {
                    work.push((graph.clone(), t.target, stack.clone(), pos))
                }
                Label::Mask(m) => {
                    if seq.get(pos) == Some(m) {
                        work.push((graph.clone(), t.target, stack.clone(), pos + 1));
                    }
                }
                Label::Call(callee) => {
                    if stack.len() < depth {
                        let mut s = stack.clone();
                        s.push((graph.clone(), t.target));
                        work.push((callee.clone(), g.graph(callee).unwrap().initial, s, pos));
                    }
                }
            }
        }
    }
    false
}

pub struct Rules {
    pairs: Vec<((String, String), Vec<String>)>,
    elisions: Vec<(String, String)>,
}

impl Rules {
    pub fn from_table(t: &RewriteTable) -> Self {
        let mut pairs = Vec::new();
        let mut elisions = Vec::new();
        for r in t.rules() {
            if r.if_vowel {
                elisions.push((r.normalized[0].clone(), r.surface[0].clone()));
            } else {
                pairs.push(((r.normalized[0].clone(), r.normalized[1].clone()), r.surface.clone()));
            }
        }
        Rules { pairs, elisions }
    }

    fn elided(&self, w: &str) -> Option<&str> {
        self.elisions.iter().find(|(x, _)| x == w).map(|(_, y)| y.as_str())
    }

    fn pair(&self, x: &str, y: &str) -> Option<&Vec<String>> {
        self.pairs.iter().find(|((a, b), _)| a == x && b == y).map(|(_, s)| s)
    }
}

fn starts_with_vowel(w: &str) -> bool {
    w.chars()
        .next()
        .and_then(|c| c.to_lowercase().next())
        .is_some_and(|c| "aeiouéèêàh".contains(c))
}

fn lit(m: &LexicalMask) -> Option<&str> {
    match m {
        LexicalMask::Literal(s) => Some(s),
        _ => None,
    }
}

/// Surface images of a normalized sequence. A literal before a vowel is
/// elided; before a mask or at the end either form may surface. Then
/// adjacent unelided literals contract, left to right.
pub fn images(rules: &Rules, seq: &[LexicalMask]) -> BTreeSet<Seq> {
    // per position: the possible (text, elided) forms
    let mut choices: Vec<Vec<(LexicalMask, bool)>> = Vec::new();
    for (i, m) in seq.iter().enumerate() {
        let forms = match (lit(m), rules.elided(lit(m).unwrap_or(""))) {
            (Some(w), Some(e)) => match seq.get(i + 1).map(lit) {
                Some(Some(next)) if starts_with_vowel(next) => vec![(LexicalMask::literal(e), true)],
                Some(Some(_)) => vec![(LexicalMask::literal(w), false)],
                _ => vec![(LexicalMask::literal(w), false), (LexicalMask::literal(e), true)],
            },
            _ => vec![(m.clone(), false)],
        };
        choices.push(forms);
    }
    let mut combos: Vec<Vec<(LexicalMask, bool)>> = vec![Vec::new()];
    for forms in &choices {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                forms.iter().map(move |f| {
                    let mut c = c.clone();
                    c.push(f.clone());
                    c
                })
            })
            .collect();
    }
    combos
        .into_iter()
        .map(|c| {
            let mut out = Vec::new();
            let mut i = 0;
            while i < c.len() {
                if i + 1 < c.len() && !c[i].1 && !c[i + 1].1 {
                    if let (Some(x), Some(y)) = (lit(&c[i].0), lit(&c[i + 1].0)) {
                        if let Some(surface) = rules.pair(x, y) {
                            out.extend(surface.iter().map(|s| LexicalMask::literal(s.as_str())));
                            i += 2;
                            continue;
                        }
                    }
                }
                out.push(c[i].0.clone());
                i += 1;
            }
            out
        })
        .collect()
}

pub struct SurfaceCheck {
    /// Normalized sequences enumerated, per main graph.
    pub sequences: Vec<(String, usize)>,
    pub images_checked: usize,
    pub failures: Vec<String>,
}

/// Every normalized sequence up to `max_len` labels must have each of its
/// rewritten images accepted by the surface grammar.
pub fn surface_closure(max_len: usize, depth: usize) -> SurfaceCheck {
    let normalized = normalized();
    let table = table();
    let surfaced = surfaceize(&normalized, &table);
    let rules = Rules::from_table(&table);
    let mut check = SurfaceCheck {
        sequences: Vec::new(),
        images_checked: 0,
        failures: surfaced
            .diagnostics
            .iter()
            .map(|d| format!("diagnostic: {d:?}"))
            .collect(),
    };
    for main in normalized.mains() {
        let lang = language(&normalized, main, max_len, depth);
        check.sequences.push((main.to_string(), lang.len()));
        for seq in &lang {
            for image in images(&rules, seq) {
                check.images_checked += 1;
                if !accepts(&surfaced.grammar, main, &image, depth) {
                    check.failures.push(format!("{main}: {seq:?} -> {image:?}"));
                }
            }
        }
    }
    check
}

// ---- evaluator ----

/// Random non-overlapping spans over `0..100`.
pub fn random_spans(rng: &mut ChaCha8Rng) -> Vec<TaggedSpan> {
    let mut out = Vec::new();
    let mut at = rng.gen_range(0..5);
    while at < 95 {
        let len = rng.gen_range(1..6);
        if rng.gen_bool(0.6) {
            let tag = *Tag::ALL.choose(rng).unwrap();
            out.push(TaggedSpan {
                tag,
                span: Span::new(at, at + len),
            });
        }
        at += len + rng.gen_range(0..4);
    }
    out
}

/// A hypothesis derived from `gold`: kept, retagged, shortened or dropped
/// spans, plus some fresh ones where they fit.
pub fn perturb(rng: &mut ChaCha8Rng, gold: &[TaggedSpan]) -> Vec<TaggedSpan> {
    let mut out: Vec<TaggedSpan> = Vec::new();
    for g in gold {
        let mut h = *g;
        match rng.gen_range(0..5) {
            0 => continue,
            1 => h.tag = *Tag::ALL.choose(rng).unwrap(),
            2 if h.span.len() > 1 => h.span.end -= 1,
            _ => {}
        }
        out.push(h);
    }
    for extra in random_spans(rng) {
        if rng.gen_bool(0.2) && !out.iter().any(|h| h.span.overlaps(&extra.span)) {
            out.push(extra);
        }
    }
    out.sort();
    out
}

/// Quadratic set comparison.
pub fn oracle_matched(gold: &[TaggedSpan], hyp: &[TaggedSpan], per_tag: bool) -> usize {
    gold.iter()
        .filter(|g| hyp.iter().any(|h| h.span == g.span && (!per_tag || h.tag == g.tag)))
        .count()
}

/// Scores `pairs` random gold/hypothesis pairs and checks them against the
/// quadratic oracle, plus symmetry, self comparison, merged versus per-tag
/// counts and the partition of spans into error buckets.
pub fn evaluator_properties(pairs: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut fail = |i: usize, what: String| failures.push(format!("pair {i}: {what}"));
    for i in 0..pairs {
        let gold_spans = random_spans(&mut rng);
        let hyp = perturb(&mut rng, &gold_spans);
        let gold = GoldCorpus {
            raw: "x".repeat(100),
            spans: gold_spans.clone(),
        };
        let report = match score(&gold, &hyp) {
            Ok(r) => r,
            Err(e) => {
                fail(i, format!("score: {e}"));
                continue;
            }
        };
        let merged = oracle_matched(&gold_spans, &hyp, false);
        let ratio = |n: usize, d: usize| if d == 0 { 1.0 } else { n as f64 / d as f64 };
        if report.merged.matched != merged
            || report.merged.precision != ratio(merged, hyp.len())
            || report.merged.recall != ratio(merged, gold_spans.len())
        {
            fail(i, format!("merged {:?}, oracle matched {merged}", report.merged));
        }
        for (col, tag) in report.per_tag.iter().zip([Tag::D, Tag::Ad, Tag::Dd]) {
            let g: Vec<_> = gold_spans.iter().copied().filter(|s| s.tag == tag).collect();
            let h: Vec<_> = hyp.iter().copied().filter(|s| s.tag == tag).collect();
            let m = oracle_matched(&g, &h, true);
            if (col.gold_count, col.hyp_count, col.matched) != (g.len(), h.len(), m) {
                fail(i, format!("{tag:?} column {col:?}, oracle {} {} {m}", g.len(), h.len()));
            }
        }
        let per_tag_total: usize = report.per_tag.iter().map(|c| c.matched).sum();
        if report.merged.matched < per_tag_total {
            fail(
                i,
                format!("merged {} below per-tag {per_tag_total}", report.merged.matched),
            );
        }

        // swapping sides swaps precision and recall
        let swapped = score(
            &GoldCorpus {
                raw: gold.raw.clone(),
                spans: hyp.clone(),
            },
            &gold_spans,
        )
        .unwrap();
        if (swapped.merged.precision, swapped.merged.recall) != (report.merged.recall, report.merged.precision) {
            fail(i, "swapping sides does not swap precision and recall".into());
        }

        // self comparison is perfect everywhere
        let same = score(&gold, &gold_spans).unwrap();
        for c in std::iter::once(&same.merged).chain(&same.per_tag) {
            if (c.precision, c.recall) != (1.0, 1.0) {
                fail(i, format!("self comparison {c:?}"));
            }
        }

        // every span lands in exactly one bucket
        for mode in [AlignMode::Merged, AlignMode::PerTag] {
            let a = align(&gold_spans, &hyp, mode);
            let gold_side = a.matched.len() + a.tag_mismatch.len() + a.boundary_gold.len() + a.missed.len();
            let hyp_side = a.matched.len() + a.tag_mismatch.len() + a.boundary_hyp.len() + a.spurious.len();
            if gold_side != gold_spans.len() || hyp_side != hyp.len() {
                fail(
                    i,
                    format!(
                        "{mode:?} buckets cover {gold_side}/{} and {hyp_side}/{}",
                        gold_spans.len(),
                        hyp.len()
                    ),
                );
            }
        }
    }
    failures
}

// ---- linearization ----

/// Builds `sets` random match sets, linearizes each one three times (as
/// built, shuffled, reversed) and checks the results are identical and
/// free of overlaps.
pub fn linearize_determinism(sets: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for i in 0..sets {
        let n = rng.gen_range(0..30);
        let anns: Vec<Annotation> = (0..n)
            .map(|_| {
                let start = rng.gen_range(0..40);
                let len = rng.gen_range(1..8);
                let tag = *Tag::ALL.choose(&mut rng).unwrap();
                Annotation {
                    tag,
                    span: Span::new(start, start + len),
                    source: tag.main_graph().to_string(),
                }
            })
            .collect();
        let first = linearize(&MatchSet::new(anns.clone()));
        if first.windows(2).any(|w| w[0].span.end > w[1].span.start) {
            failures.push(format!("set {i}: overlapping output"));
        }
        let mut shuffled = anns.clone();
        shuffled.shuffle(&mut rng);
        let mut reversed = anns;
        reversed.reverse();
        if linearize(&MatchSet::new(shuffled)) != first || linearize(&MatchSet::new(reversed)) != first {
            failures.push(format!("set {i}: result depends on input order"));
        }
    }
    failures
}

// ---- round trip ----

/// Whether `s` contains one of the tag strings the annotator inserts.
pub fn has_markup(s: &str) -> bool {
    Tag::ALL.iter().any(|t| s.contains(t.open()) || s.contains(t.close()))
}

/// Random text mixing French words, elisions, numbers, punctuation, odd
/// whitespace and arbitrary characters. Never contains tag strings.
pub fn random_text(rng: &mut ChaCha8Rng) -> String {
    const PIECES: [&str; 16] = [
        "de",
        "la",
        "l'",
        "d’",
        "les",
        "une partie des",
        "au",
        "100 000",
        "vis-à-vis",
        " ",
        "\t",
        "\n",
        "\u{a0}",
        ",",
        "«",
        "%",
    ];
    loop {
        let n = rng.gen_range(0..24);
        let mut s = String::new();
        for _ in 0..n {
            match rng.gen_range(0..3) {
                0 => s.push_str(PIECES.choose(rng).unwrap()),
                1 => s.push(rng.gen::<char>()),
                _ => {
                    s.push_str(PIECES.choose(rng).unwrap());
                    s.push(' ');
                }
            }
        }
        if !has_markup(&s) {
            return s;
        }
    }
}
