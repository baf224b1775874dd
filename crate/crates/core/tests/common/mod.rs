//! Shared test assets: the two hand-built reference models and their
//! corpora. Both models attain a zero objective on their corpus, which the
//! training tests rely on as a feasibility witness.
#![allow(dead_code)] // each test target uses its own subset

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use marktrans::corpus::{Corpus, CorpusOptions, TokenId, Vocabulary};
use marktrans::model::{Dictionary, ModelShape, Rule, Slot, TransferFunction};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn urdu_corpus() -> Corpus {
    let mut c = Corpus::load_pairs(data_path("urdu_pairs.txt"), CorpusOptions::default()).unwrap();
    c.attach_lexicon_file(data_path("urdu_lexicon.txt"), CorpusOptions::default()).unwrap();
    c
}

pub fn urdu_heldout() -> Corpus {
    Corpus::load_pairs(data_path("urdu_heldout.txt"), CorpusOptions::default()).unwrap()
}

pub fn french_corpus() -> Corpus {
    Corpus::load_pairs(data_path("french_pairs.txt"), CorpusOptions::default()).unwrap()
}

fn markers(v: &Vocabulary, words: &str) -> BTreeSet<TokenId> {
    words
        .split_whitespace()
        .map(|w| v.get(w).unwrap_or_else(|| panic!("marker word `{w}` not in vocabulary")))
        .collect()
}

fn slot(nt: usize, marker_set: BTreeSet<TokenId>) -> Slot {
    Slot {
        nonterminal: nt,
        markers: marker_set,
    }
}

/// Clause grammar for the Urdu-style corpus, four rules of fanout three.
///
/// Rule 0 peels an imperative verb off at the first determiner or
/// adposition (declaratives pass through with an empty first slot) and
/// permutes the verb to the end. Rule 1 splits subject / copula / location
/// and makes the copula final. Rule 2 splits an adposition phrase and
/// postposes the adposition. Rule 3 splits determiner from noun. Every
/// dictionary is the corpus lexicon, so determiners delete.
pub fn urdu_fixture(corpus: &Corpus) -> TransferFunction {
    let v = &corpus.source_vocab;
    let adpositions = "in from on to";
    let dets_and_adps = "the in from on to";
    let nouns = "man shop letter office box table hat chair book knife house";

    let rules = vec![
        Rule {
            slots: vec![
                slot(1, BTreeSet::new()),
                slot(1, markers(v, dets_and_adps)),
                slot(1, markers(v, "is")),
            ],
            permutation: vec![1, 2, 0],
            insertions: Vec::new(),
        },
        Rule {
            slots: vec![
                slot(3, BTreeSet::new()),
                slot(1, markers(v, "is")),
                slot(2, markers(v, adpositions)),
            ],
            permutation: vec![0, 2, 1],
            insertions: Vec::new(),
        },
        Rule {
            slots: vec![
                slot(3, BTreeSet::new()),
                slot(1, markers(v, adpositions)),
                slot(3, markers(v, "the")),
            ],
            permutation: vec![0, 2, 1],
            insertions: Vec::new(),
        },
        Rule {
            slots: vec![
                slot(1, BTreeSet::new()),
                slot(1, markers(v, "the")),
                slot(1, markers(v, nouns)),
            ],
            permutation: vec![0, 1, 2],
            insertions: Vec::new(),
        },
    ];
    let lexicon = corpus.lexicon.as_ref().expect("urdu corpus carries a lexicon");
    let dict = Dictionary {
        map: lexicon.pairs.iter().copied().collect(),
    };
    TransferFunction {
        shape: ModelShape::new(4, 3),
        rules,
        dictionaries: vec![dict; 4],
        source_vocab: Arc::new(corpus.source_vocab.clone()),
        target_vocab: Arc::new(corpus.target_vocab.clone()),
    }
}

/// Clause grammar for the French corpus: subject / verb / object split with
/// the identity permutation, and noun phrases routed through a rule whose
/// feminine-noun marker peels the determiner into a feminine-dictionary
/// context; masculine phrases stay whole and use the default dictionary.
pub fn french_fixture(corpus: &Corpus) -> TransferFunction {
    let v = &corpus.source_vocab;
    let base = [
        ("the", "le"),
        ("glass", "verre"),
        ("touches", "touche"),
        ("a", "un"),
        ("car", "voiture"),
        ("she", "elle"),
        ("washes", "lave"),
        ("cat", "chat"),
        ("man", "homme"),
    ];
    let dict = |overrides: &[(&str, &str)]| -> Dictionary {
        let mut map = std::collections::BTreeMap::new();
        for &(s, t) in base.iter().chain(overrides.iter()) {
            map.insert(
                corpus.source_vocab.get(s).unwrap(),
                corpus.target_vocab.get(t).unwrap(),
            );
        }
        Dictionary { map }
    };
    // markers for rules whose pieces are always single tokens; never split
    let inert = markers(v, "she");

    let rules = vec![
        Rule {
            slots: vec![
                slot(1, BTreeSet::new()),
                slot(3, markers(v, "touches washes")),
                slot(1, markers(v, "a the she")),
            ],
            permutation: vec![0, 1, 2],
            insertions: Vec::new(),
        },
        Rule {
            slots: vec![
                slot(2, BTreeSet::new()),
                slot(1, markers(v, "car")),
                slot(1, inert.clone()),
            ],
            permutation: vec![0, 1, 2],
            insertions: Vec::new(),
        },
        Rule {
            slots: vec![slot(1, BTreeSet::new()), slot(1, inert.clone()), slot(1, inert.clone())],
            permutation: vec![0, 1, 2],
            insertions: Vec::new(),
        },
        Rule {
            slots: vec![slot(1, BTreeSet::new()), slot(1, inert.clone()), slot(1, inert)],
            permutation: vec![0, 1, 2],
            insertions: Vec::new(),
        },
    ];
    TransferFunction {
        shape: ModelShape::new(4, 3),
        rules,
        dictionaries: vec![
            dict(&[]),
            dict(&[]),
            dict(&[("the", "la"), ("a", "une")]),
            dict(&[]),
        ],
        source_vocab: Arc::new(corpus.source_vocab.clone()),
        target_vocab: Arc::new(corpus.target_vocab.clone()),
    }
}

/// Tokenizes a sentence against an existing vocabulary, panicking on
/// unknown words (test sentences only use covered vocabulary).
pub fn ids(v: &Vocabulary, sentence: &str) -> Vec<TokenId> {
    sentence
        .split_whitespace()
        .map(|w| v.get(w).unwrap_or_else(|| panic!("word `{w}` not in vocabulary")))
        .collect()
}
