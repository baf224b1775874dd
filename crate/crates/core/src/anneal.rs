//! Simulated-annealing search over transfer-function parameters.
//!
//! Classic Metropolis acceptance with a geometric per-sweep cooling
//! schedule. A move edits one parameter: a slot nonterminal, a marker-set
//! membership, one dictionary entry, a permutation transposition, or (when
//! enabled) an insertion entry. Every move carries enough state to undo
//! itself exactly, and a full run is a pure function of the corpus, shape,
//! and configuration including the seed.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::corpus::{Corpus, TokenId};
use crate::model::{random_model, resolve_marker_pool, InitOptions, ModelError, ModelShape, TransferFunction};
use crate::scoring::{corpus_objective, ScoreError};

#[derive(Debug, Error)]
pub enum AnnealError {
    #[error("no legal move found after bounded retries")]
    SearchStuck,
    #[error("temperature must be positive, got {0}")]
    Domain(f64),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error("cannot write history to {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveKind {
    SlotNt,
    MarkerAdd,
    MarkerDel,
    DictChange,
    PermSwap,
    InsertionEdit,
}

pub const MOVE_KINDS: [MoveKind; 6] = [
    MoveKind::SlotNt,
    MoveKind::MarkerAdd,
    MoveKind::MarkerDel,
    MoveKind::DictChange,
    MoveKind::PermSwap,
    MoveKind::InsertionEdit,
];

/// Non-negative proposal weight per move kind.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveWeights {
    pub slot_nt: f64,
    pub marker_add: f64,
    pub marker_del: f64,
    pub dict_change: f64,
    pub perm_swap: f64,
    pub insertion_edit: f64,
}

impl Default for MoveWeights {
    fn default() -> Self {
        MoveWeights {
            slot_nt: 1.0,
            marker_add: 1.0,
            marker_del: 1.0,
            dict_change: 1.0,
            perm_swap: 1.0,
            insertion_edit: 0.0,
        }
    }
}

impl MoveWeights {
    pub fn get(&self, kind: MoveKind) -> f64 {
        match kind {
            MoveKind::SlotNt => self.slot_nt,
            MoveKind::MarkerAdd => self.marker_add,
            MoveKind::MarkerDel => self.marker_del,
            MoveKind::DictChange => self.dict_change,
            MoveKind::PermSwap => self.perm_swap,
            MoveKind::InsertionEdit => self.insertion_edit,
        }
    }
}

/// Whether lexicon-seeded dictionary entries may be changed by the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexiconMode {
    InitOnly,
    Frozen,
}

#[derive(Debug, Clone)]
pub struct AnnealConfig {
    pub move_budget: u64,
    pub sweep_size: u64,
    pub cooling_alpha: f64,
    /// Fixed starting temperature; calibrated from sampled moves when None.
    pub t0: Option<f64>,
    pub target_acceptance: f64,
    pub move_weights: MoveWeights,
    pub restarts: u32,
    pub rng_seed: u64,
    pub lexicon_mode: LexiconMode,
    pub insertion_moves_enabled: bool,
    pub init: InitOptions,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            move_budget: 200_000,
            sweep_size: 200,
            cooling_alpha: 0.97,
            t0: None,
            target_acceptance: 0.8,
            move_weights: MoveWeights::default(),
            restarts: 1,
            rng_seed: 0,
            lexicon_mode: LexiconMode::InitOnly,
            insertion_moves_enabled: false,
            init: InitOptions::default(),
        }
    }
}

impl AnnealConfig {
    fn check(&self) -> Result<(), AnnealError> {
        if self.move_budget < 1 {
            return Err(AnnealError::Config("move budget must be at least 1".into()));
        }
        if self.sweep_size < 1 {
            return Err(AnnealError::Config("sweep size must be at least 1".into()));
        }
        if !(self.cooling_alpha > 0.0 && self.cooling_alpha < 1.0) {
            return Err(AnnealError::Config("cooling alpha must be in (0, 1)".into()));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(AnnealError::Config("target acceptance must be in (0, 1)".into()));
        }
        if let Some(t0) = self.t0 {
            if t0 <= 0.0 {
                return Err(AnnealError::Config("t0 must be positive".into()));
            }
        }
        if MOVE_KINDS.iter().all(|&k| self.move_weights.get(k) <= 0.0) {
            return Err(AnnealError::Config("at least one move weight must be positive".into()));
        }
        Ok(())
    }
}

/// One reversible parameter edit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Move {
    SlotNt {
        rule: usize,
        slot: usize,
        new_nt: usize,
        prev_nt: usize,
    },
    MarkerAdd {
        rule: usize,
        slot: usize,
        token: TokenId,
    },
    MarkerDel {
        rule: usize,
        slot: usize,
        token: TokenId,
    },
    DictChange {
        rule: usize,
        key: TokenId,
        new_value: TokenId,
        prev_value: Option<TokenId>,
    },
    PermSwap {
        rule: usize,
        i: usize,
        j: usize,
    },
    InsertionAdd {
        rule: usize,
        index: usize,
        gap: usize,
        token: TokenId,
    },
    InsertionDel {
        rule: usize,
        index: usize,
        gap: usize,
        token: TokenId,
    },
}

impl Move {
    pub fn apply(&self, m: &mut TransferFunction) {
        match *self {
            Move::SlotNt { rule, slot, new_nt, .. } => {
                m.rules[rule].slots[slot].nonterminal = new_nt;
            }
            Move::MarkerAdd { rule, slot, token } => {
                m.rules[rule].slots[slot].markers.insert(token);
            }
            Move::MarkerDel { rule, slot, token } => {
                m.rules[rule].slots[slot].markers.remove(&token);
            }
            Move::DictChange { rule, key, new_value, .. } => {
                m.dictionaries[rule].map.insert(key, new_value);
            }
            Move::PermSwap { rule, i, j } => {
                m.rules[rule].permutation.swap(i, j);
            }
            Move::InsertionAdd { rule, index, gap, token } => {
                m.rules[rule].insertions.insert(index, (gap, token));
            }
            Move::InsertionDel { rule, index, .. } => {
                m.rules[rule].insertions.remove(index);
            }
        }
    }

    pub fn undo(&self, m: &mut TransferFunction) {
        match *self {
            Move::SlotNt { rule, slot, prev_nt, .. } => {
                m.rules[rule].slots[slot].nonterminal = prev_nt;
            }
            Move::MarkerAdd { rule, slot, token } => {
                m.rules[rule].slots[slot].markers.remove(&token);
            }
            Move::MarkerDel { rule, slot, token } => {
                m.rules[rule].slots[slot].markers.insert(token);
            }
            Move::DictChange { rule, key, prev_value, .. } => match prev_value {
                Some(v) => {
                    m.dictionaries[rule].map.insert(key, v);
                }
                None => {
                    m.dictionaries[rule].map.remove(&key);
                }
            },
            Move::PermSwap { rule, i, j } => {
                m.rules[rule].permutation.swap(i, j);
            }
            Move::InsertionAdd { rule, index, .. } => {
                m.rules[rule].insertions.remove(index);
            }
            Move::InsertionDel { rule, index, gap, token } => {
                m.rules[rule].insertions.insert(index, (gap, token));
            }
        }
    }
}

/// Corpus-derived state shared by all proposals of a run.
#[derive(Debug, Clone)]
pub struct MoveContext {
    marker_pool: Vec<TokenId>,
    /// Dictionary keys the search may change.
    mutable_keys: Vec<TokenId>,
    target_len: usize,
}

impl MoveContext {
    pub fn new(corpus: &Corpus, cfg: &AnnealConfig) -> Result<MoveContext, AnnealError> {
        let marker_pool = resolve_marker_pool(cfg.init.marker_pool, corpus);
        if marker_pool.is_empty() {
            return Err(AnnealError::Config("marker pool is empty".into()));
        }
        let frozen: BTreeSet<TokenId> = match (cfg.lexicon_mode, &corpus.lexicon) {
            (LexiconMode::Frozen, Some(lex)) => lex.pairs.iter().map(|&(s, _)| s).collect(),
            _ => BTreeSet::new(),
        };
        let mutable_keys: Vec<TokenId> = corpus
            .source_vocab
            .word_ids()
            .filter(|id| !frozen.contains(id))
            .collect();
        Ok(MoveContext {
            marker_pool,
            mutable_keys,
            target_len: corpus.target_vocab.len(),
        })
    }
}

const KIND_RETRIES: usize = 16;
const INDEX_RETRIES: usize = 64;

/// Draws a random legal move: a kind by weight, then uniform indices,
/// retrying a bounded number of times when a draw is illegal (say deleting
/// from a one-element marker set).
pub fn propose(
    m: &TransferFunction,
    cfg: &AnnealConfig,
    ctx: &MoveContext,
    rng: &mut impl Rng,
) -> Result<Move, AnnealError> {
    let mut weights: Vec<(MoveKind, f64)> = MOVE_KINDS
        .iter()
        .map(|&k| (k, cfg.move_weights.get(k).max(0.0)))
        .collect();
    for (kind, w) in weights.iter_mut() {
        match kind {
            MoveKind::InsertionEdit if !cfg.insertion_moves_enabled => *w = 0.0,
            MoveKind::DictChange if ctx.mutable_keys.is_empty() => *w = 0.0,
            MoveKind::MarkerAdd | MoveKind::MarkerDel | MoveKind::PermSwap if m.shape.fanout < 2 => {
                *w = 0.0
            }
            _ => {}
        }
    }
    let total: f64 = weights.iter().map(|&(_, w)| w).sum();
    if total <= 0.0 {
        return Err(AnnealError::SearchStuck);
    }

    for _ in 0..KIND_RETRIES {
        let mut draw = rng.gen::<f64>() * total;
        let mut kind = weights[0].0;
        for &(k, w) in &weights {
            if w <= 0.0 {
                continue;
            }
            kind = k;
            if draw < w {
                break;
            }
            draw -= w;
        }
        for _ in 0..INDEX_RETRIES {
            if let Some(mv) = try_move(m, kind, ctx, rng) {
                return Ok(mv);
            }
        }
    }
    Err(AnnealError::SearchStuck)
}

fn try_move(
    m: &TransferFunction,
    kind: MoveKind,
    ctx: &MoveContext,
    rng: &mut impl Rng,
) -> Option<Move> {
    let n = m.shape.n_rules;
    let k = m.shape.fanout;
    match kind {
        MoveKind::SlotNt => {
            let rule = rng.gen_range(0..n);
            let slot = rng.gen_range(0..k);
            Some(Move::SlotNt {
                rule,
                slot,
                new_nt: rng.gen_range(0..n),
                prev_nt: m.rules[rule].slots[slot].nonterminal,
            })
        }
        MoveKind::MarkerAdd => {
            let rule = rng.gen_range(0..n);
            let slot = rng.gen_range(1..k);
            let token = ctx.marker_pool[rng.gen_range(0..ctx.marker_pool.len())];
            if m.rules[rule].slots[slot].markers.contains(&token) {
                return None;
            }
            Some(Move::MarkerAdd { rule, slot, token })
        }
        MoveKind::MarkerDel => {
            let rule = rng.gen_range(0..n);
            let slot = rng.gen_range(1..k);
            let markers = &m.rules[rule].slots[slot].markers;
            if markers.len() <= 1 {
                return None;
            }
            let nth = rng.gen_range(0..markers.len());
            let token = *markers.iter().nth(nth).expect("index in range");
            Some(Move::MarkerDel { rule, slot, token })
        }
        MoveKind::DictChange => {
            let rule = rng.gen_range(0..n);
            let key = ctx.mutable_keys[rng.gen_range(0..ctx.mutable_keys.len())];
            Some(Move::DictChange {
                rule,
                key,
                new_value: TokenId(rng.gen_range(0..ctx.target_len) as u32),
                prev_value: m.dictionaries[rule].lookup(key),
            })
        }
        MoveKind::PermSwap => {
            let rule = rng.gen_range(0..n);
            let i = rng.gen_range(0..k);
            let j = (i + rng.gen_range(1..k)) % k;
            Some(Move::PermSwap { rule, i, j })
        }
        MoveKind::InsertionEdit => {
            let rule = rng.gen_range(0..n);
            let existing = m.rules[rule].insertions.len();
            let add = existing == 0 || rng.gen_bool(0.5);
            if add {
                if ctx.target_len <= 1 {
                    return None;
                }
                Some(Move::InsertionAdd {
                    rule,
                    index: existing,
                    gap: rng.gen_range(0..=k),
                    token: TokenId(rng.gen_range(1..ctx.target_len) as u32),
                })
            } else {
                let index = rng.gen_range(0..existing);
                let (gap, token) = m.rules[rule].insertions[index];
                Some(Move::InsertionDel { rule, index, gap, token })
            }
        }
    }
}

/// Metropolis criterion: certain acceptance for non-worsening moves,
/// exp(-delta/t) otherwise.
pub fn acceptance_probability(delta: f64, t: f64) -> Result<f64, AnnealError> {
    if t <= 0.0 {
        return Err(AnnealError::Domain(t));
    }
    if delta <= 0.0 {
        Ok(1.0)
    } else {
        Ok((-delta / t).exp())
    }
}

/// Starting temperature from the median worsening delta: the temperature at
/// which that median move would be accepted with the target probability.
pub fn t0_from_median(median_positive_delta: f64, target_acceptance: f64) -> f64 {
    median_positive_delta / (1.0 / target_acceptance).ln()
}

/// Samples 100 random moves against the model and calibrates the starting
/// temperature from the median worsening delta (1 when no move worsens).
pub fn calibrate_t0(
    m: &TransferFunction,
    corpus: &Corpus,
    cfg: &AnnealConfig,
    rng: &mut impl Rng,
) -> Result<f64, AnnealError> {
    let ctx = MoveContext::new(corpus, cfg)?;
    let mut scratch = m.clone();
    let base = corpus_objective(&scratch, corpus)? as i64;
    let mut worsenings: Vec<i64> = Vec::new();
    for _ in 0..100 {
        let mv = propose(&scratch, cfg, &ctx, rng)?;
        mv.apply(&mut scratch);
        let delta = corpus_objective(&scratch, corpus)? as i64 - base;
        mv.undo(&mut scratch);
        if delta > 0 {
            worsenings.push(delta);
        }
    }
    let median = if worsenings.is_empty() {
        1.0
    } else {
        worsenings.sort_unstable();
        let mid = worsenings.len() / 2;
        if worsenings.len() % 2 == 1 {
            worsenings[mid] as f64
        } else {
            (worsenings[mid - 1] + worsenings[mid]) as f64 / 2.0
        }
    };
    Ok(t0_from_median(median, cfg.target_acceptance))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRecord {
    pub step: u64,
    pub temperature: f64,
    pub delta: i64,
    pub accepted: bool,
    pub objective: usize,
    pub best_objective: usize,
}

/// Per-step objective trace of one annealing run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnealHistory {
    pub records: Vec<HistoryRecord>,
    pub initial_objective: usize,
    pub best_objective: usize,
}

/// Streams a history as CSV: `step,temp,delta,accepted,current,best`.
pub fn write_history_csv(history: &AnnealHistory, path: impl AsRef<Path>) -> Result<(), AnnealError> {
    let path = path.as_ref();
    let to_io = |source: std::io::Error| AnnealError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(path).map_err(to_io)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "step,temp,delta,accepted,current,best").map_err(to_io)?;
    for r in &history.records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.step, r.temperature, r.delta, r.accepted, r.objective, r.best_objective
        )
        .map_err(to_io)?;
    }
    w.flush().map_err(to_io)
}

/// One seeded annealing run. Returns the best model ever seen, which is not
/// necessarily the final state.
pub fn anneal(
    corpus: &Corpus,
    shape: ModelShape,
    cfg: &AnnealConfig,
) -> Result<(TransferFunction, AnnealHistory), AnnealError> {
    cfg.check()?;
    if corpus.pairs.is_empty() {
        return Err(AnnealError::Config("corpus has no sentence pairs".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.rng_seed);
    let mut m = random_model(shape, corpus, &mut rng, &cfg.init)?;
    let ctx = MoveContext::new(corpus, cfg)?;
    let mut current = corpus_objective(&m, corpus)?;
    let mut best = m.clone();
    let mut best_objective = current;
    let initial_objective = current;
    let mut temperature = match cfg.t0 {
        Some(t) => t,
        None => calibrate_t0(&m, corpus, cfg, &mut rng)?,
    };
    let mut records = Vec::new();

    for step in 0..cfg.move_budget {
        if best_objective == 0 {
            break;
        }
        let mv = propose(&m, cfg, &ctx, &mut rng)?;
        mv.apply(&mut m);
        let proposed = corpus_objective(&m, corpus)?;
        let delta = proposed as i64 - current as i64;
        let accepted = if delta <= 0 {
            true
        } else {
            let p = acceptance_probability(delta as f64, temperature)?;
            rng.gen::<f64>() < p
        };
        if accepted {
            current = proposed;
            if current < best_objective {
                best_objective = current;
                best = m.clone();
            }
        } else {
            mv.undo(&mut m);
        }
        records.push(HistoryRecord {
            step,
            temperature,
            delta,
            accepted,
            objective: current,
            best_objective,
        });
        if (step + 1) % cfg.sweep_size == 0 {
            temperature *= cfg.cooling_alpha;
        }
    }
    Ok((
        best,
        AnnealHistory {
            records,
            initial_objective,
            best_objective,
        },
    ))
}

type RunResult = Result<(TransferFunction, AnnealHistory), AnnealError>;

/// Runs `cfg.restarts` independent annealing chains with seeds
/// `rng_seed + 0 .. rng_seed + restarts - 1` and returns the lowest
/// objective, ties broken by the lowest seed. `jobs > 1` runs chains on
/// that many threads; the selected result is identical either way.
pub fn run_restarts(
    corpus: &Corpus,
    shape: ModelShape,
    cfg: &AnnealConfig,
    jobs: usize,
) -> Result<(TransferFunction, AnnealHistory), AnnealError> {
    cfg.check()?;
    let restarts = cfg.restarts.max(1) as usize;
    let seeds: Vec<u64> = (0..restarts as u64).map(|r| cfg.rng_seed.wrapping_add(r)).collect();

    let results: Vec<RunResult> = if jobs <= 1 || restarts == 1 {
        seeds
            .iter()
            .map(|&seed| {
                let mut run_cfg = cfg.clone();
                run_cfg.rng_seed = seed;
                anneal(corpus, shape, &run_cfg)
            })
            .collect()
    } else {
        let slots: Mutex<Vec<Option<RunResult>>> = Mutex::new((0..restarts).map(|_| None).collect());
        let next = AtomicUsize::new(0);
        std::thread::scope(|scope| {
            for _ in 0..jobs.min(restarts) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= restarts {
                        break;
                    }
                    let mut run_cfg = cfg.clone();
                    run_cfg.rng_seed = seeds[i];
                    let result = anneal(corpus, shape, &run_cfg);
                    slots.lock().unwrap()[i] = Some(result);
                });
            }
        });
        slots
            .into_inner()
            .unwrap()
            .into_iter()
            .map(|r| r.expect("every restart slot filled"))
            .collect()
    };

    let mut best: Option<(TransferFunction, AnnealHistory)> = None;
    for result in results {
        let (model, history) = result?;
        let better = match &best {
            None => true,
            Some((_, h)) => history.best_objective < h.best_objective,
        };
        if better {
            best = Some((model, history));
        }
    }
    Ok(best.expect("at least one restart ran"))
}
