//! The learnable transfer function: a fixed-fanout analysis grammar over
//! marker words, one constituent permutation per rule, one translation
//! dictionary per rule, and optional word insertions.
//!
//! A model of shape (N, k) has rules 0..N-1, each with k slots. Slot j of
//! rule i names the rule governing that constituent and, for j >= 1, the set
//! of source words whose leftmost appearance opens the slot. Rule 0 is the
//! start rule.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, TokenId, Vocabulary, EPS_LITERAL};

/// Model file format version written by `save`.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed model file: {0}")]
    Format(#[from] serde_json::Error),
    #[error("unsupported model format version {found} (expected {MODEL_FORMAT_VERSION})")]
    VersionMismatch { found: u32 },
    #[error("vocabulary hash mismatch for {side} side")]
    VocabHashMismatch { side: &'static str },
    #[error("model violates invariants: {0}")]
    Invalid(String),
}

/// Fixed structural parameters of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub n_rules: usize,
    pub fanout: usize,
    pub max_depth: usize,
}

impl ModelShape {
    pub const DEFAULT_MAX_DEPTH: usize = 16;

    pub fn new(n_rules: usize, fanout: usize) -> Self {
        ModelShape {
            n_rules,
            fanout,
            max_depth: Self::DEFAULT_MAX_DEPTH,
        }
    }
}

/// One constituent position of a rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    /// Rule id governing this constituent.
    pub nonterminal: usize,
    /// Source words whose leftmost appearance opens the slot; always empty
    /// for slot 0.
    pub markers: BTreeSet<TokenId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub slots: Vec<Slot>,
    /// Output order of the translated constituents: slot indices listed in
    /// the order they are concatenated.
    pub permutation: Vec<usize>,
    /// Target tokens inserted at output gap positions (0..=fanout) after
    /// permutation.
    pub insertions: Vec<(usize, TokenId)>,
}

/// Per-rule translation dictionary: source word to target word or the
/// empty token (deletion).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dictionary {
    pub map: BTreeMap<TokenId, TokenId>,
}

impl Dictionary {
    pub fn lookup(&self, source: TokenId) -> Option<TokenId> {
        self.map.get(&source).copied()
    }
}

/// The complete parameter set: grammar, permutations, dictionaries.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    pub shape: ModelShape,
    pub rules: Vec<Rule>,
    pub dictionaries: Vec<Dictionary>,
    pub source_vocab: Arc<Vocabulary>,
    pub target_vocab: Arc<Vocabulary>,
}

/// Where initial markers may be drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkerPool {
    /// Every source word.
    All,
    /// The most frequent source words in the training pairs.
    TopFrequency(usize),
}

impl MarkerPool {
    pub const DEFAULT_TOP: usize = 25;
}

/// How dictionaries are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DictInit {
    /// Seed from the corpus lexicon; unlisted words map to a same-spelling
    /// target word when one exists, otherwise to a random target id.
    Lexicon,
    /// Every source word maps to a uniformly random target id (possibly the
    /// empty token).
    Random,
    /// Every source word is deleted.
    Epsilon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InitOptions {
    pub marker_pool: MarkerPool,
    pub dict_init: DictInit,
    /// Inclusive range of initial marker-set sizes for non-zero slots.
    pub markers_per_slot: (usize, usize),
}

impl Default for InitOptions {
    fn default() -> Self {
        InitOptions {
            marker_pool: MarkerPool::All,
            dict_init: DictInit::Random,
            markers_per_slot: (1, 3),
        }
    }
}

/// Resolves the marker pool to a concrete id list, most frequent first for
/// the frequency-filtered variant, id order otherwise.
pub fn resolve_marker_pool(pool: MarkerPool, corpus: &Corpus) -> Vec<TokenId> {
    match pool {
        MarkerPool::All => corpus.source_vocab.word_ids().collect(),
        MarkerPool::TopFrequency(f) => {
            let mut counts: BTreeMap<TokenId, usize> = BTreeMap::new();
            for pair in &corpus.pairs {
                for &t in &pair.source {
                    *counts.entry(t).or_insert(0) += 1;
                }
            }
            let mut ranked: Vec<(TokenId, usize)> = counts.into_iter().collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            ranked.into_iter().take(f).map(|(t, _)| t).collect()
        }
    }
}

/// Draws a fresh random model: uniform slot nonterminals, one to three
/// markers per non-zero slot, uniform permutations, dictionaries per the
/// chosen initialization, no insertions.
pub fn random_model(
    shape: ModelShape,
    corpus: &Corpus,
    rng: &mut impl Rng,
    init: &InitOptions,
) -> Result<TransferFunction, ModelError> {
    if corpus.source_vocab.is_empty() || corpus.target_vocab.is_empty() {
        return Err(ModelError::Config("corpus vocabularies are empty".into()));
    }
    if shape.n_rules < 1 || shape.fanout < 2 || shape.max_depth < 1 {
        return Err(ModelError::Config(format!(
            "invalid shape: n_rules={} fanout={} max_depth={}",
            shape.n_rules, shape.fanout, shape.max_depth
        )));
    }
    if init.dict_init == DictInit::Lexicon && corpus.lexicon.is_none() {
        return Err(ModelError::Config(
            "dictionary initialization from lexicon requested but the corpus has none".into(),
        ));
    }
    let pool = resolve_marker_pool(init.marker_pool, corpus);
    if pool.is_empty() {
        return Err(ModelError::Config("marker pool is empty".into()));
    }
    let (lo, hi) = init.markers_per_slot;
    if lo < 1 || hi < lo {
        return Err(ModelError::Config("invalid markers_per_slot range".into()));
    }

    let mut rules = Vec::with_capacity(shape.n_rules);
    for _ in 0..shape.n_rules {
        let mut slots = Vec::with_capacity(shape.fanout);
        for j in 0..shape.fanout {
            let nonterminal = rng.gen_range(0..shape.n_rules);
            let mut markers = BTreeSet::new();
            if j > 0 {
                let want = rng.gen_range(lo..=hi).min(pool.len());
                let mut picks = pool.clone();
                picks.shuffle(rng);
                markers.extend(picks.into_iter().take(want));
            }
            slots.push(Slot { nonterminal, markers });
        }
        let mut permutation: Vec<usize> = (0..shape.fanout).collect();
        permutation.shuffle(rng);
        rules.push(Rule {
            slots,
            permutation,
            insertions: Vec::new(),
        });
    }

    let n_targets = corpus.target_vocab.len();
    let base_dict: BTreeMap<TokenId, TokenId> = corpus
        .source_vocab
        .word_ids()
        .map(|s| {
            let t = match init.dict_init {
                DictInit::Epsilon => TokenId::EPS,
                DictInit::Random => TokenId(rng.gen_range(0..n_targets) as u32),
                DictInit::Lexicon => {
                    let lex = corpus.lexicon.as_ref().expect("checked above");
                    match lex.lookup(s) {
                        Some(t) => t,
                        None => {
                            let spelling = corpus.source_vocab.token(s).unwrap_or_default();
                            match corpus.target_vocab.get(spelling) {
                                Some(t) => t,
                                None => TokenId(rng.gen_range(0..n_targets) as u32),
                            }
                        }
                    }
                }
            };
            (s, t)
        })
        .collect();
    let dictionaries = vec![Dictionary { map: base_dict }; shape.n_rules];

    let m = TransferFunction {
        shape,
        rules,
        dictionaries,
        source_vocab: Arc::new(corpus.source_vocab.clone()),
        target_vocab: Arc::new(corpus.target_vocab.clone()),
    };
    debug_assert!(validate(&m).is_empty());
    Ok(m)
}

/// Checks every structural invariant, returning one message per violation.
pub fn validate(m: &TransferFunction) -> Vec<String> {
    let mut out = Vec::new();
    if m.rules.len() != m.shape.n_rules {
        out.push(format!(
            "expected {} rules, found {}",
            m.shape.n_rules,
            m.rules.len()
        ));
    }
    if m.dictionaries.len() != m.shape.n_rules {
        out.push(format!(
            "expected {} dictionaries, found {}",
            m.shape.n_rules,
            m.dictionaries.len()
        ));
    }
    for (i, rule) in m.rules.iter().enumerate() {
        if rule.slots.len() != m.shape.fanout {
            out.push(format!("rule {i}: expected {} slots", m.shape.fanout));
            continue;
        }
        let mut sorted = rule.permutation.clone();
        sorted.sort_unstable();
        if sorted != (0..m.shape.fanout).collect::<Vec<_>>() {
            out.push(format!("rule {i}: permutation {:?} is not a bijection", rule.permutation));
        }
        for (j, slot) in rule.slots.iter().enumerate() {
            if slot.nonterminal >= m.shape.n_rules {
                out.push(format!("rule {i} slot {j}: nonterminal {} out of range", slot.nonterminal));
            }
            if j == 0 && !slot.markers.is_empty() {
                out.push(format!("rule {i}: slot 0 must have no markers"));
            }
            for &mk in &slot.markers {
                if mk == TokenId::EPS {
                    out.push(format!("rule {i} slot {j}: empty token used as marker"));
                } else if !m.source_vocab.contains_id(mk) {
                    out.push(format!("rule {i} slot {j}: marker {mk} outside source vocabulary"));
                }
            }
        }
        for &(gap, tok) in &rule.insertions {
            if gap > m.shape.fanout {
                out.push(format!("rule {i}: insertion gap {gap} out of range"));
            }
            if tok == TokenId::EPS || !m.target_vocab.contains_id(tok) {
                out.push(format!("rule {i}: insertion token {tok} invalid"));
            }
        }
    }
    for (i, dict) in m.dictionaries.iter().enumerate() {
        for (&s, &t) in &dict.map {
            if s == TokenId::EPS || !m.source_vocab.contains_id(s) {
                out.push(format!("dictionary {i}: key {s} invalid"));
            }
            if !m.target_vocab.contains_id(t) {
                out.push(format!("dictionary {i}: value {t} outside target vocabulary"));
            }
        }
    }
    out
}

/// Plain-text rendering of the whole parameter set, stable across runs.
pub fn dump_human(m: &TransferFunction) -> String {
    let src = |id: TokenId| m.source_vocab.token(id).unwrap_or("?").to_string();
    let tgt = |id: TokenId| {
        if id == TokenId::EPS {
            EPS_LITERAL.to_string()
        } else {
            m.target_vocab.token(id).unwrap_or("?").to_string()
        }
    };
    let mut out = String::new();
    for (i, rule) in m.rules.iter().enumerate() {
        let _ = write!(out, "R{i} ->");
        for (j, slot) in rule.slots.iter().enumerate() {
            let _ = write!(out, " R{}", slot.nonterminal);
            if j > 0 {
                let names: Vec<String> = slot.markers.iter().map(|&t| src(t)).collect();
                let _ = write!(out, " {{{}}}", names.join(","));
            }
        }
        let perm: Vec<String> = rule.permutation.iter().map(|p| p.to_string()).collect();
        let _ = write!(out, " | perm=[{}]", perm.join(","));
        if !rule.insertions.is_empty() {
            let ins: Vec<String> = rule
                .insertions
                .iter()
                .map(|&(gap, tok)| format!("{gap}:{}", tgt(tok)))
                .collect();
            let _ = write!(out, " | ins: {}", ins.join(", "));
        }
        let entries: Vec<String> = m.dictionaries[i]
            .map
            .iter()
            .map(|(&s, &t)| format!("{}→{}", src(s), tgt(t)))
            .collect();
        let _ = writeln!(out, " | dict: {}", entries.join(", "));
    }
    out
}

#[derive(Serialize, Deserialize)]
struct SlotFile {
    nt: usize,
    markers: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct RuleFile {
    slots: Vec<SlotFile>,
    perm: Vec<usize>,
    insertions: Vec<(usize, String)>,
}

#[derive(Serialize, Deserialize)]
struct VocabHashes {
    source: String,
    target: String,
}

#[derive(Serialize, Deserialize)]
struct VocabsFile {
    source: Vec<String>,
    target: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    shape: ModelShape,
    vocab_hashes: VocabHashes,
    vocabs: VocabsFile,
    rules: Vec<RuleFile>,
    dicts: Vec<BTreeMap<String, String>>,
}

/// Serializes the model to versioned JSON. Output bytes are a pure function
/// of the model's semantic content.
pub fn to_json(m: &TransferFunction) -> String {
    let src = |id: TokenId| m.source_vocab.token(id).unwrap_or("?").to_string();
    let tgt = |id: TokenId| {
        if id == TokenId::EPS {
            EPS_LITERAL.to_string()
        } else {
            m.target_vocab.token(id).unwrap_or("?").to_string()
        }
    };
    let file = ModelFile {
        version: MODEL_FORMAT_VERSION,
        shape: m.shape,
        vocab_hashes: VocabHashes {
            source: m.source_vocab.hash(),
            target: m.target_vocab.hash(),
        },
        vocabs: VocabsFile {
            source: m.source_vocab.entries().to_vec(),
            target: m.target_vocab.entries().to_vec(),
        },
        rules: m
            .rules
            .iter()
            .map(|r| RuleFile {
                slots: r
                    .slots
                    .iter()
                    .map(|s| SlotFile {
                        nt: s.nonterminal,
                        markers: s.markers.iter().map(|&t| src(t)).collect(),
                    })
                    .collect(),
                perm: r.permutation.clone(),
                insertions: r.insertions.iter().map(|&(g, t)| (g, tgt(t))).collect(),
            })
            .collect(),
        dicts: m
            .dictionaries
            .iter()
            .map(|d| {
                d.map
                    .iter()
                    .map(|(&s, &t)| (src(s), tgt(t)))
                    .collect::<BTreeMap<String, String>>()
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("model serializes");
    text.push('\n');
    text
}

pub fn save(m: &TransferFunction, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    fs::write(path, to_json(m)).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn rebuild(
    file: ModelFile,
    source_vocab: Arc<Vocabulary>,
    target_vocab: Arc<Vocabulary>,
) -> Result<TransferFunction, ModelError> {
    let src_id = |tok: &str| -> Result<TokenId, ModelError> {
        source_vocab
            .get(tok)
            .ok_or_else(|| ModelError::Invalid(format!("unknown source token `{tok}`")))
    };
    let tgt_id = |tok: &str| -> Result<TokenId, ModelError> {
        if tok == EPS_LITERAL {
            return Ok(TokenId::EPS);
        }
        target_vocab
            .get(tok)
            .ok_or_else(|| ModelError::Invalid(format!("unknown target token `{tok}`")))
    };
    let mut rules = Vec::with_capacity(file.rules.len());
    for r in &file.rules {
        let mut slots = Vec::with_capacity(r.slots.len());
        for s in &r.slots {
            let mut markers = BTreeSet::new();
            for tok in &s.markers {
                markers.insert(src_id(tok)?);
            }
            slots.push(Slot {
                nonterminal: s.nt,
                markers,
            });
        }
        let mut insertions = Vec::with_capacity(r.insertions.len());
        for (gap, tok) in &r.insertions {
            insertions.push((*gap, tgt_id(tok)?));
        }
        rules.push(Rule {
            slots,
            permutation: r.perm.clone(),
            insertions,
        });
    }
    let mut dictionaries = Vec::with_capacity(file.dicts.len());
    for d in &file.dicts {
        let mut map = BTreeMap::new();
        for (s, t) in d {
            map.insert(src_id(s)?, tgt_id(t)?);
        }
        dictionaries.push(Dictionary { map });
    }
    let m = TransferFunction {
        shape: file.shape,
        rules,
        dictionaries,
        source_vocab,
        target_vocab,
    };
    let violations = validate(&m);
    if !violations.is_empty() {
        return Err(ModelError::Invalid(violations.join("; ")));
    }
    Ok(m)
}

fn read_model_file(path: &Path) -> Result<ModelFile, ModelError> {
    let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: ModelFile = serde_json::from_str(&text)?;
    if file.version != MODEL_FORMAT_VERSION {
        return Err(ModelError::VersionMismatch { found: file.version });
    }
    Ok(file)
}

/// Loads a model against externally supplied vocabularies, verifying the
/// stored hashes match them.
pub fn load(
    path: impl AsRef<Path>,
    source_vocab: &Vocabulary,
    target_vocab: &Vocabulary,
) -> Result<TransferFunction, ModelError> {
    let file = read_model_file(path.as_ref())?;
    if file.vocab_hashes.source != source_vocab.hash() {
        return Err(ModelError::VocabHashMismatch { side: "source" });
    }
    if file.vocab_hashes.target != target_vocab.hash() {
        return Err(ModelError::VocabHashMismatch { side: "target" });
    }
    rebuild(
        file,
        Arc::new(source_vocab.clone()),
        Arc::new(target_vocab.clone()),
    )
}

/// Loads a model reconstructing the vocabularies stored in the file itself.
pub fn load_standalone(path: impl AsRef<Path>) -> Result<TransferFunction, ModelError> {
    let file = read_model_file(path.as_ref())?;
    let source_vocab = vocab_from_entries(crate::corpus::Language::Source, &file.vocabs.source)?;
    let target_vocab = vocab_from_entries(crate::corpus::Language::Target, &file.vocabs.target)?;
    if file.vocab_hashes.source != source_vocab.hash() {
        return Err(ModelError::VocabHashMismatch { side: "source" });
    }
    if file.vocab_hashes.target != target_vocab.hash() {
        return Err(ModelError::VocabHashMismatch { side: "target" });
    }
    rebuild(file, Arc::new(source_vocab), Arc::new(target_vocab))
}

fn vocab_from_entries(
    language: crate::corpus::Language,
    entries: &[String],
) -> Result<Vocabulary, ModelError> {
    if entries.first().map(String::as_str) != Some("") {
        return Err(ModelError::Invalid(
            "vocabulary must start with the empty token".into(),
        ));
    }
    let mut v = Vocabulary::new(language);
    for (i, e) in entries.iter().enumerate().skip(1) {
        let id = v.intern(e);
        if id.index() != i {
            return Err(ModelError::Invalid(format!("duplicate vocabulary entry `{e}`")));
        }
    }
    Ok(v)
}
