mod common;

use std::collections::{BTreeSet, HashMap, VecDeque};

use detgram_core::{
    fixtures, flatten, insert_tags, linearize, parse_annotated, parse_grammar, parse_lexicon, strip_tags, surfaceize,
    tag_distribution, tokenize, Annotation, GoldCorpus, GrammarSet, Graph, Label, Lexicon, MatchSet, Matcher,
    RewriteTable, Span, Tag, TaggedSpan,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::has_markup;

fn tag_strategy() -> impl Strategy<Value = Tag> {
    prop_oneof![Just(Tag::D), Just(Tag::Ad), Just(Tag::Dd)]
}

fn text_strategy() -> impl Strategy<Value = String> {
    let pieces = prop_oneof![
        "[a-zéèàç]{1,8}",
        Just("l'".to_string()),
        Just("d’".to_string()),
        Just("100 000".to_string()),
        Just("vis-à-vis".to_string()),
        "[ \t\n\u{a0}]{1,2}",
        "[,.;%()«»<>]",
        any::<char>().prop_map(String::from),
    ];
    prop::collection::vec(pieces, 0..24).prop_map(|v| v.concat())
}

fn grammar_strategy() -> impl Strategy<Value = GrammarSet> {
    let label = |graphs: usize| {
        prop_oneof![
            "[a-zé']{1,6}".prop_map(Label::literal),
            Just(Label::literal("a b")),
            Just(Label::literal("{x}")),
            Just(Label::epsilon()),
            Just(Label::Mask("<N+m-Hum>".parse().unwrap())),
            Just(Label::Mask("<prêt.N>".parse().unwrap())),
            Just(Label::Mask("<MOT>".parse().unwrap())),
            Just(Label::Mask("<NB>".parse().unwrap())),
            Just(Label::Output("<d>".to_string())),
            Just(Label::Output(String::new())),
            (0..graphs).prop_map(|i| Label::Call(format!("G{i}"))),
        ]
    };
    (1usize..4)
        .prop_flat_map(move |graphs| {
            let graph = (2usize..6).prop_flat_map(move |nodes| {
                prop::collection::vec((0..nodes - 1, label(graphs), 0..nodes), 0..10)
                    .prop_map(move |edges| (nodes, edges))
            });
            prop::collection::vec(graph, graphs)
        })
        .prop_map(|graphs| {
            let mut set = GrammarSet::new();
            for (i, (nodes, edges)) in graphs.into_iter().enumerate() {
                let name = if i == 0 { "Det".to_string() } else { format!("G{i}") };
                let mut g = Graph::new(name, nodes, 0, nodes - 1);
                for (from, label, to) in edges {
                    let label = match label {
                        Label::Call(c) if c == "G0" => Label::Call("Det".to_string()),
                        other => other,
                    };
                    g.add(from, label, to);
                }
                set.insert(g).unwrap();
            }
            set.add_main("Det").unwrap();
            set
        })
}

fn annotation(tag: Tag, start: usize, end: usize) -> Annotation {
    Annotation {
        tag,
        span: Span::new(start, end),
        source: tag.main_graph().to_string(),
    }
}

proptest! {
    #[test]
    fn tokens_index_the_original_text(text in text_strategy()) {
        let tokens = tokenize(&text);
        let mut at = 0;
        for t in &tokens {
            prop_assert!(t.span.start >= at);
            prop_assert_eq!(&text[t.span.start..t.span.end], t.surface.as_str());
            prop_assert!(text[at..t.span.start].chars().all(char::is_whitespace));
            at = t.span.end;
        }
        prop_assert!(text[at..].chars().all(char::is_whitespace));
    }

    #[test]
    fn grammar_text_round_trips(g in grammar_strategy()) {
        let text = g.to_string();
        let back = parse_grammar(&text);
        prop_assert!(back.is_ok(), "{}\n{:?}", text, back);
        prop_assert_eq!(back.unwrap(), g);
    }

    #[test]
    fn lexicon_lines_round_trip(
        surface in "[a-zéè'-]{1,8}",
        lemma in "[a-zéè]{1,8}",
        pos in prop_oneof![Just("N"), Just("A"), Just("ADV"), Just("DET"), Just("V")],
        feats in prop::collection::btree_set("[a-zA-Z]{1,4}", 0..4),
    ) {
        let mut line = format!("{surface},{lemma}.{pos}");
        for f in &feats {
            line.push('+');
            line.push_str(f);
        }
        let entries = parse_lexicon(&line).unwrap();
        prop_assert_eq!(entries.len(), 1);
        prop_assert_eq!(entries[0].to_string(), line);
    }

    #[test]
    fn stripping_tags_restores_the_input(text in text_strategy()) {
        prop_assume!(!has_markup(&text));
        let grammar = surfaceize(
            &parse_grammar(fixtures::GRAMMAR).unwrap(),
            &RewriteTable::parse(fixtures::REWRITES).unwrap(),
        ).grammar;
        let lexicon = Lexicon::parse(fixtures::LEXICON).unwrap();
        let out = Matcher::new(&grammar, &lexicon).annotate(&text);
        prop_assert_eq!(strip_tags(&out), text);
    }

    #[test]
    fn reference_format_round_trips(spans in prop::collection::vec((tag_strategy(), 1usize..6, 0usize..4), 0..8)) {
        let mut raw = String::new();
        let mut tagged = Vec::new();
        for (tag, len, gap) in spans {
            raw.push_str(&"x".repeat(gap));
            let start = raw.len();
            raw.push_str(&"é".repeat(len));
            tagged.push(TaggedSpan { tag, span: Span::new(start, raw.len()) });
        }
        let gold = GoldCorpus { raw, spans: tagged };
        let text = gold.to_string();
        prop_assert_eq!(parse_annotated(&text).unwrap(), gold);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn linearize_is_deterministic(
        raw in prop::collection::vec((tag_strategy(), 0usize..40, 1usize..8), 0..30),
        seed in any::<u64>(),
    ) {
        let anns: Vec<Annotation> = raw.iter().map(|&(t, s, l)| annotation(t, s, s + l)).collect();
        let first = linearize(&MatchSet::new(anns.clone()));
        for w in first.windows(2) {
            prop_assert!(w[0].span.end <= w[1].span.start);
        }
        let mut shuffled = anns.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(&linearize(&MatchSet::new(shuffled)), &first);
        prop_assert_eq!(&linearize(&MatchSet::new(anns)), &first);
    }
}

#[test]
fn scores_agree_with_quadratic_oracle() {
    let failures = common::evaluator_properties(50, 42);
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn linearize_ignores_input_order() {
    let failures = common::linearize_determinism(200, 9);
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn fixture_distribution_matches_a_text_count() {
    let gold = parse_annotated(fixtures::REFERENCE).unwrap();
    let dist = tag_distribution(&gold);
    let count = |open: &str| fixtures::REFERENCE.matches(open).count();
    let total = count("<d>") + count("<dd>") + count("<ad>");
    assert_eq!(dist.total, total);
    assert!(total >= 60);
    for (tag, n, pct) in &dist.rows {
        let expected = count(tag.open());
        assert_eq!(*n, expected);
        assert_eq!(*pct, ((expected * 200 + total) / (2 * total)) as u32);
    }
}

#[test]
fn annotation_round_trips_on_fixture_texts() {
    let grammar = surfaceize(
        &parse_grammar(fixtures::GRAMMAR).unwrap(),
        &RewriteTable::parse(fixtures::REWRITES).unwrap(),
    )
    .grammar;
    let lexicon = Lexicon::parse(fixtures::LEXICON).unwrap();
    let matcher = Matcher::new(&grammar, &lexicon);
    for text in [fixtures::GOLDEN, fixtures::REFERENCE] {
        let raw = strip_tags(text);
        assert_eq!(strip_tags(&matcher.annotate(&raw)), raw);
    }
    let tokens = tokenize("de l'ordre");
    let tagged = insert_tags("de l'ordre", &matcher.annotations(&tokens));
    assert_eq!(tagged, "<dd>de l'</dd>ordre");
}

/// Counts states of a serialized automaton that are reachable from the
/// initial state and can reach a final state.
fn useful_states(text: &str) -> (usize, usize, usize) {
    let mut lines = text.lines();
    lines.next();
    let declared: usize = lines.next().unwrap().strip_prefix("states ").unwrap().parse().unwrap();
    let initial: usize = lines.next().unwrap().strip_prefix("initial ").unwrap().parse().unwrap();
    let finals: Vec<usize> = lines
        .next()
        .unwrap()
        .split_whitespace()
        .skip(1)
        .map(|s| s.parse().unwrap())
        .collect();
    let mut fwd: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut back: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut edges = 0;
    for line in lines {
        let words: Vec<&str> = line.split_whitespace().collect();
        let from: usize = words[0].parse().unwrap();
        // the target is the last word that is not an output
        let to: usize = words
            .iter()
            .rev()
            .find(|w| !w.starts_with('{'))
            .unwrap()
            .parse()
            .unwrap();
        fwd.entry(from).or_default().push(to);
        back.entry(to).or_default().push(from);
        edges += 1;
    }
    let bfs = |starts: Vec<usize>, adj: &HashMap<usize, Vec<usize>>| {
        let mut seen: BTreeSet<usize> = starts.iter().copied().collect();
        let mut queue: VecDeque<usize> = starts.into();
        while let Some(s) = queue.pop_front() {
            for &n in adj.get(&s).into_iter().flatten() {
                if seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        seen
    };
    let reach = bfs(vec![initial], &fwd);
    let coreach = bfs(finals, &back);
    let useful = reach.intersection(&coreach).count();
    (declared, useful, edges)
}

#[test]
fn state_counts_match_an_independent_traversal() {
    let grammar = surfaceize(
        &parse_grammar(fixtures::GRAMMAR).unwrap(),
        &RewriteTable::parse(fixtures::REWRITES).unwrap(),
    )
    .grammar;
    for main in grammar.mains() {
        let fsa = flatten(&grammar, main, 16).unwrap();
        let (declared, useful, edges) = useful_states(&fsa.to_string());
        let counts = fsa.counts();
        assert_eq!(declared, counts.states);
        assert_eq!(useful, counts.states, "{main}");
        assert_eq!(edges, counts.transitions);
    }
}

/// Strings of `S -> S x | y` using at most `depth` nested expansions of
/// `S` below the top-level one.
fn expand(depth: usize) -> BTreeSet<String> {
    let mut out = BTreeSet::from(["y".to_string()]);
    if depth > 0 {
        for inner in expand(depth - 1) {
            out.insert(format!("{inner} x"));
        }
    }
    out
}

#[test]
fn left_recursion_is_cut_at_the_depth_bound() {
    let g = parse_grammar("graph Det @main\nnodes 3\nfinal 2\n0 :Det 1\n1 x 2\n0 y 2\n").unwrap();
    let lexicon = Lexicon::default();
    let candidates: Vec<String> = (0..6)
        .flat_map(|n| {
            ["y", "x"].map(|first| {
                std::iter::once(first)
                    .chain(std::iter::repeat_n("x", n))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
        })
        .collect();
    for depth in 1..=4 {
        let fsa = flatten(&g, "Det", depth).unwrap();
        let accepted: BTreeSet<String> = candidates
            .iter()
            .filter(|c| {
                let toks = tokenize(c);
                fsa.matches_from(&toks, 0, &lexicon)
                    .iter()
                    .any(|(e, _)| *e == toks.len())
            })
            .cloned()
            .collect();
        assert_eq!(accepted, expand(depth), "depth {depth}");
    }
}
