//! Bilingual corpus loading: tokenization, integer interning, and the
//! `SRC ||| TGT` pair/lexicon file formats.
//!
//! Words are interned into dense integer ids per language side, so the rest
//! of the toolkit works on numbers rather than strings. Id 0 is reserved for
//! the empty token and never occurs inside a sentence.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Field separator of pair and lexicon files.
pub const SEPARATOR: &str = "|||";
/// Literal spelling of the empty token in lexicon and dictionary contexts.
pub const EPS_LITERAL: &str = "<eps>";

/// Interned token id, dense per vocabulary. Id 0 is the reserved empty token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TokenId(pub u32);

impl TokenId {
    /// The reserved id of the empty token.
    pub const EPS: TokenId = TokenId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Language {
    Source,
    Target,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: missing `{SEPARATOR}` separator")]
    MissingSeparator { line: usize },
    #[error("line {line}: more than one `{SEPARATOR}` separator")]
    ExtraSeparator { line: usize },
    #[error("line {line}: empty {side} side")]
    EmptySide { line: usize, side: &'static str },
    #[error("line {line}: expected exactly one token per side, got {got}")]
    MultiTokenSide { line: usize, got: usize },
    #[error("line {line}: duplicate lexicon entry for `{token}`")]
    DuplicateSource { line: usize, token: String },
    #[error("line {line}: `{EPS_LITERAL}` is reserved and not allowed here")]
    ReservedToken { line: usize },
}

/// Tokenization / loading options.
#[derive(Debug, Clone, Copy, Default)]
pub struct CorpusOptions {
    pub lowercase: bool,
}

/// Splits a line on runs of whitespace, optionally lowercasing.
pub fn tokenize(line: &str, options: CorpusOptions) -> Vec<String> {
    line.split_whitespace()
        .map(|t| {
            if options.lowercase {
                t.to_lowercase()
            } else {
                t.to_string()
            }
        })
        .collect()
}

/// One language side's word/id table. Ids are dense in first-occurrence
/// order; entry 0 is the empty token "".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    language: Language,
    entries: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    pub fn new(language: Language) -> Self {
        let mut v = Vocabulary {
            language,
            entries: Vec::new(),
            index: HashMap::new(),
        };
        v.entries.push(String::new());
        v.index.insert(String::new(), TokenId::EPS);
        v
    }

    pub fn language(&self) -> Language {
        self.language
    }

    /// Number of entries including the reserved empty token.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.len() <= 1
    }

    /// Interns a token, returning its existing id if already present.
    pub fn intern(&mut self, token: &str) -> TokenId {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = TokenId(self.entries.len() as u32);
        self.entries.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn get(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.entries.get(id.index()).map(|s| s.as_str())
    }

    pub fn contains_id(&self, id: TokenId) -> bool {
        id.index() < self.entries.len()
    }

    /// All entries in id order, including the empty token at index 0.
    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    /// Ids of all real words (everything except the reserved empty token).
    pub fn word_ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        (1..self.entries.len()).map(|i| TokenId(i as u32))
    }

    /// FNV-1a hash over the language tag and all entries. Used to detect
    /// id-space mismatches between a saved model and a corpus.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        eat(match self.language {
            Language::Source => b"source",
            Language::Target => b"target",
        });
        for e in &self.entries {
            eat(&(e.len() as u64).to_le_bytes());
            eat(e.as_bytes());
        }
        format!("fnv1a64:{h:016x}")
    }
}

/// Renders an id sequence back to a whitespace-joined string.
pub fn detokenize(ids: &[TokenId], vocab: &Vocabulary) -> String {
    ids.iter()
        .filter_map(|&id| vocab.token(id))
        .filter(|t| !t.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// One aligned sentence pair, both sides non-empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub source: Vec<TokenId>,
    pub target: Vec<TokenId>,
}

/// Word-for-word translation hints: each source id at most once; the target
/// may be the empty token (deletion).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    pub pairs: Vec<(TokenId, TokenId)>,
}

impl Lexicon {
    pub fn lookup(&self, source: TokenId) -> Option<TokenId> {
        self.pairs.iter().find(|(s, _)| *s == source).map(|(_, t)| *t)
    }
}

/// A loaded bilingual corpus: both vocabularies, the sentence pairs, and an
/// optional lexicon. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub source_vocab: Vocabulary,
    pub target_vocab: Vocabulary,
    pub pairs: Vec<SentencePair>,
    pub lexicon: Option<Lexicon>,
}

impl Corpus {
    /// Parses pair-file text. Lines are `SRC_TOKENS ||| TGT_TOKENS`;
    /// `#`-prefixed lines are comments; blank lines are skipped.
    pub fn parse_pairs(text: &str, options: CorpusOptions) -> Result<Corpus, CorpusError> {
        let mut source_vocab = Vocabulary::new(Language::Source);
        let mut target_vocab = Vocabulary::new(Language::Target);
        let mut pairs = Vec::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let Some((src_text, tgt_text)) = split_data_line(raw, line)? else {
                continue;
            };
            let src = tokenize(src_text, options);
            let tgt = tokenize(tgt_text, options);
            if src.is_empty() {
                return Err(CorpusError::EmptySide { line, side: "source" });
            }
            if tgt.is_empty() {
                return Err(CorpusError::EmptySide { line, side: "target" });
            }
            if src.iter().chain(tgt.iter()).any(|t| t == EPS_LITERAL) {
                return Err(CorpusError::ReservedToken { line });
            }
            pairs.push(SentencePair {
                source: src.iter().map(|t| source_vocab.intern(t)).collect(),
                target: tgt.iter().map(|t| target_vocab.intern(t)).collect(),
            });
        }

        Ok(Corpus {
            source_vocab,
            target_vocab,
            pairs,
            lexicon: None,
        })
    }

    /// Loads a pair file from disk.
    pub fn load_pairs(path: impl AsRef<Path>, options: CorpusOptions) -> Result<Corpus, CorpusError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_pairs(&text, options)
    }

    /// Parses lexicon text against this corpus, interning new tokens into
    /// the vocabularies, and attaches the result.
    pub fn attach_lexicon(&mut self, text: &str, options: CorpusOptions) -> Result<(), CorpusError> {
        let lex = parse_lexicon(text, options, &mut self.source_vocab, &mut self.target_vocab)?;
        self.lexicon = Some(lex);
        Ok(())
    }

    pub fn attach_lexicon_file(
        &mut self,
        path: impl AsRef<Path>,
        options: CorpusOptions,
    ) -> Result<(), CorpusError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.attach_lexicon(&text, options)
    }
}

/// Parses lexicon text: one token per side, target side may be `<eps>`.
/// New tokens are interned into the given vocabularies.
pub fn parse_lexicon(
    text: &str,
    options: CorpusOptions,
    source_vocab: &mut Vocabulary,
    target_vocab: &mut Vocabulary,
) -> Result<Lexicon, CorpusError> {
    let mut lexicon = Lexicon::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let Some((src_text, tgt_text)) = split_data_line(raw, line)? else {
            continue;
        };
        let src = tokenize(src_text, options);
        let tgt = tokenize(tgt_text, options);
        if src.is_empty() {
            return Err(CorpusError::EmptySide { line, side: "source" });
        }
        if tgt.is_empty() {
            return Err(CorpusError::EmptySide { line, side: "target" });
        }
        if src.len() != 1 || tgt.len() != 1 {
            return Err(CorpusError::MultiTokenSide {
                line,
                got: src.len().max(tgt.len()),
            });
        }
        if src[0] == EPS_LITERAL {
            return Err(CorpusError::ReservedToken { line });
        }
        let s = source_vocab.intern(&src[0]);
        if lexicon.pairs.iter().any(|(existing, _)| *existing == s) {
            return Err(CorpusError::DuplicateSource {
                line,
                token: src[0].clone(),
            });
        }
        let t = if tgt[0] == EPS_LITERAL {
            TokenId::EPS
        } else {
            target_vocab.intern(&tgt[0])
        };
        lexicon.pairs.push((s, t));
    }
    Ok(lexicon)
}

/// Loads a lexicon file, interning new tokens into the given vocabularies.
pub fn load_lexicon(
    path: impl AsRef<Path>,
    options: CorpusOptions,
    source_vocab: &mut Vocabulary,
    target_vocab: &mut Vocabulary,
) -> Result<Lexicon, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_lexicon(&text, options, source_vocab, target_vocab)
}

/// Returns `Ok(None)` for comment/blank lines, `Ok(Some((src, tgt)))` for
/// data lines, and an error when the separator is missing.
fn split_data_line(raw: &str, line: usize) -> Result<Option<(&str, &str)>, CorpusError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    match raw.split_once(SEPARATOR) {
        Some((_, tgt)) if tgt.contains(SEPARATOR) => Err(CorpusError::ExtraSeparator { line }),
        Some((src, tgt)) => Ok(Some((src, tgt))),
        None => Err(CorpusError::MissingSeparator { line }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_splits_on_whitespace_runs() {
        let opts = CorpusOptions::default();
        assert_eq!(
            tokenize("the man is in the shop", opts),
            vec!["the", "man", "is", "in", "the", "shop"]
        );
        assert_eq!(tokenize("", opts), Vec::<String>::new());
        assert_eq!(tokenize("  a   b ", opts), vec!["a", "b"]);
    }

    #[test]
    fn tokenize_lowercases_when_asked() {
        let opts = CorpusOptions { lowercase: true };
        assert_eq!(tokenize("The Man", opts), vec!["the", "man"]);
    }

    #[test]
    fn interning_is_stable_and_dense() {
        let mut v = Vocabulary::new(Language::Source);
        let a = v.intern("wait");
        let b = v.intern("in");
        assert_eq!(a, TokenId(1));
        assert_eq!(b, TokenId(2));
        assert_eq!(v.intern("wait"), a);
        assert_eq!(v.token(a), Some("wait"));
        assert_eq!(v.token(TokenId::EPS), Some(""));
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn load_pairs_builds_vocab_in_first_occurrence_order() {
        let c = Corpus::parse_pairs(
            "wait in the office ||| daftar men thairo\n",
            CorpusOptions::default(),
        )
        .unwrap();
        assert_eq!(c.pairs.len(), 1);
        assert_eq!(c.source_vocab.get("wait"), Some(TokenId(1)));
        assert_eq!(c.source_vocab.get("in"), Some(TokenId(2)));
        assert_eq!(c.source_vocab.get("the"), Some(TokenId(3)));
        assert_eq!(c.source_vocab.get("office"), Some(TokenId(4)));
        assert_eq!(c.target_vocab.get("daftar"), Some(TokenId(1)));
        assert_eq!(c.target_vocab.get("men"), Some(TokenId(2)));
        assert_eq!(c.target_vocab.get("thairo"), Some(TokenId(3)));
    }

    #[test]
    fn comments_and_blanks_are_skipped() {
        let c = Corpus::parse_pairs("# header\n\n   \n# more\n", CorpusOptions::default()).unwrap();
        assert!(c.pairs.is_empty());
    }

    #[test]
    fn empty_target_side_is_an_error_with_line_number() {
        let err = Corpus::parse_pairs("a ||| b\na ||| \n", CorpusOptions::default()).unwrap_err();
        match err {
            CorpusError::EmptySide { line, side } => {
                assert_eq!(line, 2);
                assert_eq!(side, "target");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn missing_separator_is_an_error() {
        let err = Corpus::parse_pairs("a b c\n", CorpusOptions::default()).unwrap_err();
        assert!(matches!(err, CorpusError::MissingSeparator { line: 1 }));
        let err = Corpus::parse_pairs("a ||| b ||| c\n", CorpusOptions::default()).unwrap_err();
        assert!(matches!(err, CorpusError::ExtraSeparator { line: 1 }));
    }

    #[test]
    fn interning_is_injective_on_entries() {
        let c = Corpus::parse_pairs(
            "the man is in the shop ||| admi dukan men hai\nthe shop ||| dukan\n",
            CorpusOptions::default(),
        )
        .unwrap();
        for v in [&c.source_vocab, &c.target_vocab] {
            let distinct: std::collections::HashSet<&String> = v.entries().iter().collect();
            assert_eq!(distinct.len(), v.len());
        }
    }

    #[test]
    fn lexicon_basic_and_eps() {
        let mut c = Corpus::parse_pairs("the man ||| admi\n", CorpusOptions::default()).unwrap();
        c.attach_lexicon("man ||| admi\nthe ||| <eps>\n", CorpusOptions::default())
            .unwrap();
        let lex = c.lexicon.as_ref().unwrap();
        let man = c.source_vocab.get("man").unwrap();
        let admi = c.target_vocab.get("admi").unwrap();
        let the = c.source_vocab.get("the").unwrap();
        assert_eq!(lex.lookup(man), Some(admi));
        assert_eq!(lex.lookup(the), Some(TokenId::EPS));
    }

    #[test]
    fn lexicon_interns_new_tokens() {
        let mut c = Corpus::parse_pairs("a ||| x\n", CorpusOptions::default()).unwrap();
        c.attach_lexicon("b ||| y\n", CorpusOptions::default()).unwrap();
        assert!(c.source_vocab.get("b").is_some());
        assert!(c.target_vocab.get("y").is_some());
    }

    #[test]
    fn lexicon_rejects_multi_token_and_duplicates() {
        let mut src = Vocabulary::new(Language::Source);
        let mut tgt = Vocabulary::new(Language::Target);
        let err = parse_lexicon("the man ||| admi\n", CorpusOptions::default(), &mut src, &mut tgt)
            .unwrap_err();
        assert!(matches!(err, CorpusError::MultiTokenSide { line: 1, .. }));

        let err = parse_lexicon(
            "man ||| admi\nman ||| ghar\n",
            CorpusOptions::default(),
            &mut src,
            &mut tgt,
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::DuplicateSource { line: 2, .. }));
    }

    #[test]
    fn eps_literal_rejected_in_sentences_and_lexicon_source() {
        let err = Corpus::parse_pairs("a <eps> ||| b\n", CorpusOptions::default()).unwrap_err();
        assert!(matches!(err, CorpusError::ReservedToken { line: 1 }));
        let mut src = Vocabulary::new(Language::Source);
        let mut tgt = Vocabulary::new(Language::Target);
        let err = parse_lexicon("<eps> ||| x\n", CorpusOptions::default(), &mut src, &mut tgt)
            .unwrap_err();
        assert!(matches!(err, CorpusError::ReservedToken { line: 1 }));
    }

    #[test]
    fn detokenize_round_trips_normalized_text() {
        let opts = CorpusOptions { lowercase: true };
        let c = Corpus::parse_pairs("Put  The Box ||| rakho\n", opts).unwrap();
        assert_eq!(detokenize(&c.pairs[0].source, &c.source_vocab), "put the box");
    }

    #[test]
    fn load_pairs_is_deterministic() {
        let text = "a b ||| x y\nc ||| z\n";
        let c1 = Corpus::parse_pairs(text, CorpusOptions::default()).unwrap();
        let c2 = Corpus::parse_pairs(text, CorpusOptions::default()).unwrap();
        assert_eq!(c1.source_vocab.entries(), c2.source_vocab.entries());
        assert_eq!(c1.target_vocab.entries(), c2.target_vocab.entries());
        assert_eq!(c1.pairs, c2.pairs);
        assert_eq!(c1.source_vocab.hash(), c2.source_vocab.hash());
    }

    #[test]
    fn vocab_hash_distinguishes_sides_and_content() {
        let mut s = Vocabulary::new(Language::Source);
        let mut t = Vocabulary::new(Language::Target);
        s.intern("a");
        t.intern("a");
        assert_ne!(s.hash(), t.hash());
        let mut s2 = Vocabulary::new(Language::Source);
        s2.intern("b");
        assert_ne!(s.hash(), s2.hash());
    }
}
