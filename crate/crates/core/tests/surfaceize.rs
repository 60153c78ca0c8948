//! Every label sequence of the normalized grammar, once contracted and
//! elided, must be a label sequence of the surface grammar.
//!
//! The rewriting here is done directly on sequences and serves as an oracle
//! for the graph composition.

mod common;

use common::{accepts, images, normalized, surface, table, Rules, Seq};
use detgram_core::LexicalMask;

const MAX_LEN: usize = 6;
const DEPTH: usize = 16;

fn words(s: &str) -> Seq {
    s.split(' ').map(|w| LexicalMask::parse(w).unwrap()).collect()
}

#[test]
fn every_normalized_sequence_has_an_accepted_image() {
    let check = common::surface_closure(MAX_LEN, DEPTH);
    assert!(
        check.failures.is_empty(),
        "{:#?}",
        &check.failures[..check.failures.len().min(5)]
    );
    for (main, n) in &check.sequences {
        assert!(*n > 100, "{main}: {n}");
    }
    assert!(check.images_checked > 1000);
}

#[test]
fn known_contractions() {
    let (normalized, surface, rules) = (normalized(), surface(), Rules::from_table(&table()));
    for (main, norm, surf) in [
        ("aDet", "à le", "au"),
        ("aDet", "à les", "aux"),
        ("deDet", "de des", "de"),
        ("deDet", "de un", "d' un"),
        ("deDet", "de le", "du"),
        ("deDet", "de les", "des"),
        ("Det", "une <N+Dnom> de les", "une <N+Dnom> des"),
    ] {
        assert!(accepts(&normalized, main, &words(norm), DEPTH), "{norm}");
        assert!(images(&rules, &words(norm)).contains(&words(surf)), "{norm} -> {surf}");
        assert!(accepts(&surface, main, &words(surf), DEPTH), "{main}: {surf}");
    }
    // the uncontracted forms do not survive
    assert!(!accepts(&surface, "aDet", &words("à le"), DEPTH));
    assert!(!accepts(&surface, "deDet", &words("de des"), DEPTH));
    assert!(!accepts(&surface, "deDet", &words("de un"), DEPTH));
}
