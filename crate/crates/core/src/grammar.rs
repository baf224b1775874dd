//! Context-free grammars over interned symbols: text format, language
//! enumeration, and bounded-length equivalence testing.
//!
//! The text format is one rule per line (or `;`-separated),
//! `LHS -> alt1 | alt2`, symbols whitespace-separated, with the keyword
//! `eps` standing alone for the empty right-hand side. Symbols appearing on
//! some left-hand side are nonterminals; all others are terminals. The first
//! rule's left-hand side is the start symbol.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

/// Index into a grammar's symbol table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SymbolId(pub u32);

impl SymbolId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Production {
    pub lhs: SymbolId,
    pub rhs: Vec<SymbolId>,
}

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("rule {rule}: {msg}")]
    Parse { rule: usize, msg: String },
    #[error("grammar is empty (no rules)")]
    EmptyGrammar,
    #[error("grammar generates the empty language")]
    EmptyLanguage,
    #[error("production count exceeded cap of {cap} during conversion")]
    ProductionCap { cap: usize },
    #[error("enumeration work budget of {budget} exceeded")]
    BudgetExceeded { budget: usize },
}

/// A context-free grammar. Nonterminal and terminal id sets are disjoint;
/// an empty rhs encodes an epsilon production.
#[derive(Debug, Clone)]
pub struct Cfg {
    names: Vec<String>,
    name_set: HashSet<String>,
    /// Next serial to try per fresh-name base; purely an allocation hint.
    fresh_hints: HashMap<String, usize>,
    pub nonterminals: BTreeSet<SymbolId>,
    pub terminals: BTreeSet<SymbolId>,
    pub start: SymbolId,
    pub productions: Vec<Production>,
}

impl PartialEq for Cfg {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
            && self.nonterminals == other.nonterminals
            && self.terminals == other.terminals
            && self.start == other.start
            && self.productions == other.productions
    }
}

impl Eq for Cfg {}

impl Cfg {
    pub fn name(&self, id: SymbolId) -> &str {
        &self.names[id.index()]
    }

    pub fn is_terminal(&self, id: SymbolId) -> bool {
        self.terminals.contains(&id)
    }

    pub fn is_nonterminal(&self, id: SymbolId) -> bool {
        self.nonterminals.contains(&id)
    }

    /// Adds a fresh nonterminal whose name is `base` suffixed with a serial
    /// number when the plain name is taken.
    pub fn fresh_nonterminal(&mut self, base: &str) -> SymbolId {
        let mut serial = self.fresh_hints.get(base).copied().unwrap_or(0);
        let mut candidate = if serial == 0 {
            base.to_string()
        } else {
            format!("{base}{serial}")
        };
        while self.name_set.contains(&candidate) {
            serial += 1;
            candidate = format!("{base}{serial}");
        }
        self.fresh_hints.insert(base.to_string(), serial + 1);
        let id = SymbolId(self.names.len() as u32);
        self.name_set.insert(candidate.clone());
        self.names.push(candidate);
        self.nonterminals.insert(id);
        id
    }

    pub fn productions_of(&self, nt: SymbolId) -> impl Iterator<Item = &Production> {
        self.productions.iter().filter(move |p| p.lhs == nt)
    }

    /// Nonterminals that derive some terminal string.
    pub fn generating(&self) -> HashSet<SymbolId> {
        let mut gen: HashSet<SymbolId> = HashSet::new();
        loop {
            let mut changed = false;
            for p in &self.productions {
                if gen.contains(&p.lhs) {
                    continue;
                }
                if p.rhs.iter().all(|s| self.is_terminal(*s) || gen.contains(s)) {
                    gen.insert(p.lhs);
                    changed = true;
                }
            }
            if !changed {
                return gen;
            }
        }
    }

    /// Nonterminals that derive the empty string.
    pub fn nullable(&self) -> HashSet<SymbolId> {
        let mut nul: HashSet<SymbolId> = HashSet::new();
        loop {
            let mut changed = false;
            for p in &self.productions {
                if nul.contains(&p.lhs) {
                    continue;
                }
                if p.rhs.iter().all(|s| nul.contains(s)) {
                    nul.insert(p.lhs);
                    changed = true;
                }
            }
            if !changed {
                return nul;
            }
        }
    }

    /// True when the grammar generates no string at all.
    pub fn language_is_empty(&self) -> bool {
        !self.generating().contains(&self.start)
    }

    /// Minimal terminal yield per nonterminal (None when non-generating).
    fn min_yields(&self) -> HashMap<SymbolId, usize> {
        let mut min: HashMap<SymbolId, usize> = HashMap::new();
        loop {
            let mut changed = false;
            for p in &self.productions {
                let mut total = 0usize;
                let mut ok = true;
                for s in &p.rhs {
                    if self.is_terminal(*s) {
                        total += 1;
                    } else if let Some(m) = min.get(s) {
                        total += m;
                    } else {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    let entry = min.entry(p.lhs).or_insert(usize::MAX);
                    if total < *entry {
                        *entry = total;
                        changed = true;
                    }
                }
            }
            if !changed {
                return min;
            }
        }
    }
}

impl fmt::Display for Cfg {
    /// Renders in the same text format `parse_cfg` accepts, grouped by
    /// left-hand side in first-appearance order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut order: Vec<SymbolId> = Vec::new();
        for p in &self.productions {
            if !order.contains(&p.lhs) {
                order.push(p.lhs);
            }
        }
        for lhs in order {
            let alts: Vec<String> = self
                .productions_of(lhs)
                .map(|p| {
                    if p.rhs.is_empty() {
                        "eps".to_string()
                    } else {
                        p.rhs.iter().map(|s| self.name(*s)).collect::<Vec<_>>().join(" ")
                    }
                })
                .collect();
            writeln!(f, "{} -> {}", self.name(lhs), alts.join(" | "))?;
        }
        Ok(())
    }
}

/// Parses the grammar text format. The first rule's lhs is the start symbol.
pub fn parse_cfg(text: &str) -> Result<Cfg, GrammarError> {
    let mut names: Vec<String> = Vec::new();
    let mut by_name: HashMap<String, SymbolId> = HashMap::new();
    let intern = |names: &mut Vec<String>, by_name: &mut HashMap<String, SymbolId>, t: &str| {
        if let Some(&id) = by_name.get(t) {
            return id;
        }
        let id = SymbolId(names.len() as u32);
        names.push(t.to_string());
        by_name.insert(t.to_string(), id);
        id
    };

    // raw rules as (lhs, alternatives of token strings)
    let mut raw: Vec<(String, Vec<Vec<String>>)> = Vec::new();
    let decls = text
        .lines()
        .flat_map(|l| l.split(';'))
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    for (i, decl) in decls.enumerate() {
        let rule = i + 1;
        let (lhs, rest) = decl.split_once("->").ok_or_else(|| GrammarError::Parse {
            rule,
            msg: format!("expected `LHS -> rhs` in `{decl}`"),
        })?;
        let lhs = lhs.trim();
        if lhs.split_whitespace().count() != 1 {
            return Err(GrammarError::Parse {
                rule,
                msg: format!("left-hand side must be a single symbol, got `{lhs}`"),
            });
        }
        if lhs == "eps" {
            return Err(GrammarError::Parse {
                rule,
                msg: "`eps` cannot be a left-hand side".into(),
            });
        }
        let mut alts = Vec::new();
        for alt in rest.split('|') {
            let toks: Vec<String> = alt.split_whitespace().map(str::to_string).collect();
            if toks.iter().any(|t| t == "eps") {
                if toks.len() != 1 {
                    return Err(GrammarError::Parse {
                        rule,
                        msg: "`eps` must stand alone in an alternative".into(),
                    });
                }
                alts.push(Vec::new());
            } else if toks.is_empty() {
                return Err(GrammarError::Parse {
                    rule,
                    msg: "empty alternative (use `eps` for the empty string)".into(),
                });
            } else {
                alts.push(toks);
            }
        }
        raw.push((lhs.to_string(), alts));
    }
    if raw.is_empty() {
        return Err(GrammarError::EmptyGrammar);
    }

    let mut nonterminals = BTreeSet::new();
    for (lhs, _) in &raw {
        let id = intern(&mut names, &mut by_name, lhs);
        nonterminals.insert(id);
    }
    let start = by_name[&raw[0].0];
    let mut productions = Vec::new();
    let mut terminals = BTreeSet::new();
    for (lhs, alts) in &raw {
        let lhs_id = by_name[lhs];
        for alt in alts {
            let rhs: Vec<SymbolId> = alt
                .iter()
                .map(|t| intern(&mut names, &mut by_name, t))
                .collect();
            productions.push(Production { lhs: lhs_id, rhs });
        }
    }
    for p in &productions {
        for s in &p.rhs {
            if !nonterminals.contains(s) {
                terminals.insert(*s);
            }
        }
    }

    let name_set = names.iter().cloned().collect();
    Ok(Cfg {
        names,
        name_set,
        fresh_hints: HashMap::new(),
        nonterminals,
        terminals,
        start,
        productions,
    })
}

/// Default work budget for language enumeration.
pub const DEFAULT_ENUM_BUDGET: usize = 1_000_000;

/// Enumerates exactly the strings of the language with length at most
/// `max_len`, as space-joined terminal names. Breadth-first leftmost
/// derivation over an epsilon-free core, pruning sentential forms whose
/// minimal yield exceeds `max_len`.
pub fn enumerate_language(g: &Cfg, max_len: usize) -> Result<BTreeSet<String>, GrammarError> {
    enumerate_language_budgeted(g, max_len, DEFAULT_ENUM_BUDGET)
}

pub fn enumerate_language_budgeted(
    g: &Cfg,
    max_len: usize,
    budget: usize,
) -> Result<BTreeSet<String>, GrammarError> {
    let mut out = BTreeSet::new();
    let eps_in_lang = g.nullable().contains(&g.start);
    if eps_in_lang {
        out.insert(String::new());
    }
    // binarize first so epsilon removal expands at most four variants per
    // production regardless of how many nullable symbols a rule carries
    let core = strip_epsilon(
        &binarized(g),
        budget.max(crate::normal_forms::DEFAULT_PRODUCTION_CAP),
    )?;
    if core.language_is_empty() || max_len == 0 {
        return Ok(out);
    }
    let min = core.min_yields();
    let lower_bound = |form: &[SymbolId]| -> usize {
        form.iter()
            .map(|s| if core.is_terminal(*s) { 1 } else { *min.get(s).unwrap_or(&usize::MAX) })
            .try_fold(0usize, usize::checked_add)
            .unwrap_or(usize::MAX)
    };
    let mut by_lhs: HashMap<SymbolId, Vec<&[SymbolId]>> = HashMap::new();
    for p in &core.productions {
        by_lhs.entry(p.lhs).or_default().push(&p.rhs);
    }

    let mut queue: VecDeque<Vec<SymbolId>> = VecDeque::new();
    let mut seen: HashSet<Vec<SymbolId>> = HashSet::new();
    let start_form = vec![core.start];
    if lower_bound(&start_form) <= max_len {
        seen.insert(start_form.clone());
        queue.push_back(start_form);
    }
    let mut work = 0usize;
    while let Some(form) = queue.pop_front() {
        work += 1;
        if work > budget {
            return Err(GrammarError::BudgetExceeded { budget });
        }
        match form.iter().position(|s| core.is_nonterminal(*s)) {
            None => {
                if form.len() <= max_len {
                    out.insert(form.iter().map(|s| core.name(*s)).collect::<Vec<_>>().join(" "));
                }
            }
            Some(pos) => {
                for rhs in by_lhs.get(&form[pos]).into_iter().flatten() {
                    // generated candidates count as work too, so grammars
                    // with enormous alternative fans fail loudly instead of
                    // grinding
                    work += 1;
                    if work > budget {
                        return Err(GrammarError::BudgetExceeded { budget });
                    }
                    let mut next = Vec::with_capacity(form.len() + rhs.len());
                    next.extend_from_slice(&form[..pos]);
                    next.extend_from_slice(rhs);
                    next.extend_from_slice(&form[pos + 1..]);
                    if lower_bound(&next) <= max_len && seen.insert(next.clone()) {
                        queue.push_back(next);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// True when the two grammars generate the same strings up to length `l`.
pub fn equivalent_up_to(g1: &Cfg, g2: &Cfg, l: usize) -> Result<bool, GrammarError> {
    Ok(enumerate_language(g1, l)? == enumerate_language(g2, l)?)
}

/// Splits right-hand sides longer than two symbols behind fresh chain
/// nonterminals, preserving the language.
fn binarized(g: &Cfg) -> Cfg {
    let mut out = g.clone();
    let mut chain: HashMap<Vec<SymbolId>, SymbolId> = HashMap::new();
    let mut queue: Vec<Production> = std::mem::take(&mut out.productions);
    let mut done = Vec::new();
    while let Some(p) = queue.pop() {
        if p.rhs.len() <= 2 {
            done.push(p);
            continue;
        }
        let tail = p.rhs[1..].to_vec();
        let c = match chain.get(&tail) {
            Some(&c) => c,
            None => {
                let c = out.fresh_nonterminal("Seq");
                chain.insert(tail.clone(), c);
                queue.push(Production { lhs: c, rhs: tail.clone() });
                c
            }
        };
        done.push(Production {
            lhs: p.lhs,
            rhs: vec![p.rhs[0], c],
        });
    }
    out.productions = done;
    out
}

/// Removes epsilon productions, preserving the language minus the empty
/// string. When the input generated only the empty string, the result has
/// an empty language. The subset expansion is capped like the other
/// conversions.
pub(crate) fn strip_epsilon(g: &Cfg, cap: usize) -> Result<Cfg, GrammarError> {
    let nullable = g.nullable();
    let mut out = g.clone();
    let mut new_prods: Vec<Production> = Vec::new();
    let mut seen: HashSet<(SymbolId, Vec<SymbolId>)> = HashSet::new();
    for p in &g.productions {
        let nullable_positions: Vec<usize> = p
            .rhs
            .iter()
            .enumerate()
            .filter(|(_, s)| nullable.contains(s))
            .map(|(i, _)| i)
            .collect();
        // every subset of nullable occurrences may be dropped
        let n = nullable_positions.len();
        if n >= usize::BITS as usize || (1usize << n) > cap {
            return Err(GrammarError::ProductionCap { cap });
        }
        for mask in 0..(1usize << n) {
            let drop: HashSet<usize> = nullable_positions
                .iter()
                .enumerate()
                .filter(|(bit, _)| mask & (1 << bit) != 0)
                .map(|(_, &i)| i)
                .collect();
            let rhs: Vec<SymbolId> = p
                .rhs
                .iter()
                .enumerate()
                .filter(|(i, _)| !drop.contains(i))
                .map(|(_, &s)| s)
                .collect();
            if rhs.is_empty() {
                continue;
            }
            if seen.insert((p.lhs, rhs.clone())) {
                new_prods.push(Production { lhs: p.lhs, rhs });
            }
        }
        if new_prods.len() > cap {
            return Err(GrammarError::ProductionCap { cap });
        }
    }
    out.productions = new_prods;
    Ok(out)
}
