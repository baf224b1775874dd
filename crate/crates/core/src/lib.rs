//! Marker-grammar machine translation toolkit.
//!
//! Learns a complete translation transfer function — an analysis grammar over
//! marker words, per-rule constituent permutations, and per-rule translation
//! dictionaries — from a small corpus of paired sentences, by simulated
//! annealing against an insert/delete edit-distance objective. Also includes
//! a grammar subsystem for converting context-free grammars into marker-normal
//! form.

pub mod anneal;
pub mod corpus;
pub mod engine;
pub mod grammar;
pub mod model;
pub mod normal_forms;
pub mod scoring;

pub use corpus::{Corpus, Lexicon, SentencePair, TokenId, Vocabulary};
pub use model::{ModelShape, TransferFunction};
