//! Grammar normal-form constructions.
//!
//! `to_gnf` produces Greibach normal form (every production is one leading
//! terminal followed by nonterminals) via the textbook pipeline: strip
//! epsilon productions (recording whether the empty string was in the
//! language), remove unit productions and useless symbols, lift tail
//! terminals, eliminate left recursion, and back-substitute.
//!
//! `to_mnf` converts to marker-normal form: every right-hand side is empty,
//! a single terminal, or an alternating terminal/nonterminal sequence. It
//! splits long Greibach tails behind fresh nonterminals, expands those by
//! the Cartesian product of their members' productions, and separates any
//! adjacent terminals with a fresh nonterminal that derives only the empty
//! string.
//!
//! `to_mnf_bounded` additionally bounds every production to one of four
//! shapes (empty, one terminal, N t N, N t N t N). It first rebuilds the
//! grammar so every production has at most two trailing nonterminals, using
//! a left-corner transform over an internal binarized form, then applies
//! the same construction and pads with the empty-deriving nonterminal on
//! both ends where a production starts or ends with a terminal.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::grammar::{strip_epsilon, Cfg, GrammarError, Production, SymbolId};

/// Cap on intermediate production counts; conversions fail loudly beyond it.
pub const DEFAULT_PRODUCTION_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalForm {
    General,
    Greibach,
    Marker,
    MarkerBounded,
}

/// What a conversion produced, and whether the empty string was stripped
/// from the language on the way in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormalFormReport {
    pub form: NormalForm,
    pub epsilon_in_language: bool,
}

/// True when every production is one terminal followed by nonterminals.
/// A grammar with no productions passes vacuously.
pub fn is_gnf(g: &Cfg) -> bool {
    g.productions.iter().all(|p| {
        !p.rhs.is_empty()
            && g.is_terminal(p.rhs[0])
            && p.rhs[1..].iter().all(|s| g.is_nonterminal(*s))
    })
}

/// True when every production is empty, a single terminal, or an
/// alternating sequence with no two adjacent terminals and no two adjacent
/// nonterminals.
pub fn is_mnf(g: &Cfg) -> bool {
    g.productions.iter().all(|p| mnf_rhs(g, &p.rhs))
}

fn mnf_rhs(g: &Cfg, rhs: &[SymbolId]) -> bool {
    match rhs.len() {
        0 => true,
        1 => g.is_terminal(rhs[0]),
        _ => rhs
            .windows(2)
            .all(|w| g.is_terminal(w[0]) != g.is_terminal(w[1])),
    }
}

/// True when every production has one of the four bounded shapes:
/// empty, single terminal, N t N, or N t N t N.
pub fn is_mnf_bounded(g: &Cfg) -> bool {
    g.productions.iter().all(|p| match p.rhs.len() {
        0 => true,
        1 => g.is_terminal(p.rhs[0]),
        3 | 5 => p
            .rhs
            .iter()
            .enumerate()
            .all(|(i, s)| if i % 2 == 0 { g.is_nonterminal(*s) } else { g.is_terminal(*s) }),
        _ => false,
    })
}

/// Most specific form the grammar satisfies.
pub fn classify(g: &Cfg) -> NormalForm {
    if is_mnf_bounded(g) {
        NormalForm::MarkerBounded
    } else if is_mnf(g) {
        NormalForm::Marker
    } else if is_gnf(g) {
        NormalForm::Greibach
    } else {
        NormalForm::General
    }
}

pub fn to_gnf(g: &Cfg) -> Result<(Cfg, NormalFormReport), GrammarError> {
    to_gnf_capped(g, DEFAULT_PRODUCTION_CAP)
}

pub fn to_gnf_capped(g: &Cfg, cap: usize) -> Result<(Cfg, NormalFormReport), GrammarError> {
    if g.language_is_empty() {
        return Err(GrammarError::EmptyLanguage);
    }
    let epsilon_in_language = g.nullable().contains(&g.start);
    let mut core = strip_epsilon(g, cap)?;
    if core.language_is_empty() {
        // the language was exactly {empty string}
        let out = empty_grammar_like(&core);
        return Ok((
            out,
            NormalFormReport {
                form: NormalForm::MarkerBounded,
                epsilon_in_language,
            },
        ));
    }
    core = remove_units(&core);
    core = remove_useless(&core);
    lift_tail_terminals(&mut core);
    eliminate_left_recursion(&mut core, cap)?;
    core = remove_useless(&core);
    finalize(&mut core);
    debug_assert!(is_gnf(&core));
    let form = classify(&core);
    Ok((
        core,
        NormalFormReport {
            form,
            epsilon_in_language,
        },
    ))
}

pub fn to_mnf(g: &Cfg) -> Result<Cfg, GrammarError> {
    to_mnf_capped(g, DEFAULT_PRODUCTION_CAP)
}

pub fn to_mnf_capped(g: &Cfg, cap: usize) -> Result<Cfg, GrammarError> {
    let (gnf, report) = to_gnf_capped(g, cap)?;
    let mut out = marker_form_from_gnf(&gnf, cap, false)?;
    if report.epsilon_in_language {
        readd_epsilon(&mut out);
    }
    out = remove_useless(&out);
    finalize(&mut out);
    Ok(out)
}

pub fn to_mnf_bounded(g: &Cfg) -> Result<Cfg, GrammarError> {
    to_mnf_bounded_capped(g, DEFAULT_PRODUCTION_CAP)
}

pub fn to_mnf_bounded_capped(g: &Cfg, cap: usize) -> Result<Cfg, GrammarError> {
    if g.language_is_empty() {
        return Err(GrammarError::EmptyLanguage);
    }
    let epsilon_in_language = g.nullable().contains(&g.start);
    let mut core = strip_epsilon(g, cap)?;
    let mut out = if core.language_is_empty() {
        empty_grammar_like(&core)
    } else {
        core = remove_units(&core);
        core = remove_useless(&core);
        let two_gnf = to_two_standard_gnf(&core, cap)?;
        marker_form_from_gnf(&two_gnf, cap, true)?
    };
    if epsilon_in_language {
        readd_epsilon(&mut out);
    }
    out = remove_useless(&out);
    finalize(&mut out);
    Ok(out)
}

/// Grammar over the same symbol table with no productions at all.
fn empty_grammar_like(g: &Cfg) -> Cfg {
    let mut out = g.clone();
    out.productions.clear();
    out.terminals.clear();
    let start = out.start;
    out.nonterminals.retain(|s| *s == start);
    out
}

/// Replaces unit productions (A -> B) by the non-unit productions of every
/// unit-reachable nonterminal. Assumes no epsilon productions.
fn remove_units(g: &Cfg) -> Cfg {
    let mut out = g.clone();
    let mut unit_edges: HashMap<SymbolId, Vec<SymbolId>> = HashMap::new();
    let mut non_units: HashMap<SymbolId, Vec<&Production>> = HashMap::new();
    for p in &g.productions {
        if p.rhs.len() == 1 && g.is_nonterminal(p.rhs[0]) {
            unit_edges.entry(p.lhs).or_default().push(p.rhs[0]);
        } else {
            non_units.entry(p.lhs).or_default().push(p);
        }
    }
    let mut prods = Vec::new();
    let mut seen = HashSet::new();
    for &a in &g.nonterminals {
        // depth-first closure over unit edges only
        let mut stack = vec![a];
        let mut visited = HashSet::new();
        while let Some(b) = stack.pop() {
            if !visited.insert(b) {
                continue;
            }
            for p in non_units.get(&b).into_iter().flatten() {
                if seen.insert((a, p.rhs.clone())) {
                    prods.push(Production { lhs: a, rhs: p.rhs.clone() });
                }
            }
            stack.extend(unit_edges.get(&b).into_iter().flatten());
        }
    }
    out.productions = prods;
    out
}

/// Drops non-generating then unreachable symbols and their productions.
fn remove_useless(g: &Cfg) -> Cfg {
    let generating = g.generating();
    let mut out = g.clone();
    out.productions.retain(|p| {
        generating.contains(&p.lhs)
            && p.rhs.iter().all(|s| g.is_terminal(*s) || generating.contains(s))
    });

    let mut reachable: HashSet<SymbolId> = HashSet::new();
    reachable.insert(out.start);
    loop {
        let mut grew = false;
        for p in &out.productions {
            if reachable.contains(&p.lhs) {
                for s in &p.rhs {
                    grew |= reachable.insert(*s);
                }
            }
        }
        if !grew {
            break;
        }
    }
    out.productions.retain(|p| reachable.contains(&p.lhs));
    let start = out.start;
    out.nonterminals.retain(|s| (reachable.contains(s) && generating.contains(s)) || *s == start);
    let used: HashSet<SymbolId> = out
        .productions
        .iter()
        .flat_map(|p| p.rhs.iter().copied())
        .collect();
    out.terminals.retain(|s| used.contains(s));
    out
}

/// Replaces terminals in non-leading positions of long right-hand sides by
/// fresh nonterminals deriving just that terminal.
fn lift_tail_terminals(g: &mut Cfg) {
    let mut lifted: HashMap<SymbolId, SymbolId> = HashMap::new();
    let mut extra: Vec<Production> = Vec::new();
    let terminals = g.terminals.clone();
    for i in 0..g.productions.len() {
        if g.productions[i].rhs.len() < 2 {
            continue;
        }
        for pos in 1..g.productions[i].rhs.len() {
            let s = g.productions[i].rhs[pos];
            if terminals.contains(&s) {
                let nt = *lifted.entry(s).or_insert_with(|| {
                    let nt = g.fresh_nonterminal("T");
                    extra.push(Production { lhs: nt, rhs: vec![s] });
                    nt
                });
                g.productions[i].rhs[pos] = nt;
            }
        }
    }
    g.productions.extend(extra);
}

/// Paull's algorithm: orders nonterminals, substitutes lower-ordered leading
/// nonterminals, removes immediate left recursion with fresh tail symbols,
/// then back-substitutes so every production leads with a terminal.
fn eliminate_left_recursion(g: &mut Cfg, cap: usize) -> Result<(), GrammarError> {
    let order: Vec<SymbolId> = g.nonterminals.iter().copied().collect();
    let rank: HashMap<SymbolId, usize> = order.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let mut prods: HashMap<SymbolId, Vec<Vec<SymbolId>>> = HashMap::new();
    for &nt in &order {
        prods.insert(nt, g.productions_of(nt).map(|p| p.rhs.clone()).collect());
    }
    let total = |prods: &HashMap<SymbolId, Vec<Vec<SymbolId>>>| -> usize {
        prods.values().map(Vec::len).sum()
    };

    let mut tails: Vec<SymbolId> = Vec::new();
    for (i, &a) in order.iter().enumerate() {
        // substitute leading A_j with j < i until none remain; a single
        // symbol's rule list passing the cap already means the total does,
        // so bail mid-pass rather than after one
        loop {
            let rules = prods[&a].clone();
            let mut replaced = false;
            let mut next: Vec<Vec<SymbolId>> = Vec::new();
            for rhs in rules {
                match rank.get(&rhs[0]) {
                    Some(&j) if j < i => {
                        replaced = true;
                        for delta in &prods[&rhs[0]] {
                            let mut new_rhs = delta.clone();
                            new_rhs.extend_from_slice(&rhs[1..]);
                            next.push(new_rhs);
                        }
                        if next.len() > cap {
                            return Err(GrammarError::ProductionCap { cap });
                        }
                    }
                    _ => next.push(rhs),
                }
            }
            dedup_rhs(&mut next);
            prods.insert(a, next);
            if total(&prods) > cap {
                return Err(GrammarError::ProductionCap { cap });
            }
            if !replaced {
                break;
            }
        }
        // immediate left recursion
        let (rec, nonrec): (Vec<_>, Vec<_>) = prods[&a].iter().cloned().partition(|rhs| rhs[0] == a);
        if !rec.is_empty() {
            let z = g.fresh_nonterminal("Z");
            tails.push(z);
            let mut a_rules = Vec::new();
            for beta in &nonrec {
                a_rules.push(beta.clone());
                let mut with_tail = beta.clone();
                with_tail.push(z);
                a_rules.push(with_tail);
            }
            let mut z_rules = Vec::new();
            for rhs in &rec {
                let alpha = rhs[1..].to_vec();
                debug_assert!(!alpha.is_empty());
                z_rules.push(alpha.clone());
                let mut with_tail = alpha;
                with_tail.push(z);
                z_rules.push(with_tail);
            }
            dedup_rhs(&mut a_rules);
            dedup_rhs(&mut z_rules);
            prods.insert(a, a_rules);
            prods.insert(z, z_rules);
            if total(&prods) > cap {
                return Err(GrammarError::ProductionCap { cap });
            }
        }
    }

    // back-substitute original nonterminals, highest order first
    for &a in order.iter().rev() {
        let mut rules = prods[&a].clone();
        let mut out = Vec::new();
        for rhs in rules.drain(..) {
            if g.is_nonterminal(rhs[0]) && rhs[0] != a {
                for delta in &prods[&rhs[0]] {
                    let mut new_rhs = delta.clone();
                    new_rhs.extend_from_slice(&rhs[1..]);
                    out.push(new_rhs);
                }
                if out.len() > cap {
                    return Err(GrammarError::ProductionCap { cap });
                }
            } else {
                out.push(rhs);
            }
        }
        dedup_rhs(&mut out);
        prods.insert(a, out);
        if total(&prods) > cap {
            return Err(GrammarError::ProductionCap { cap });
        }
    }
    // tail symbols may lead with (now terminal-led) nonterminals; iterate in
    // creation order so earlier tails are already fixed
    for &z in &tails {
        loop {
            let rules = prods[&z].clone();
            let mut changed = false;
            let mut out = Vec::new();
            for rhs in rules {
                if g.is_nonterminal(rhs[0]) {
                    changed = true;
                    for delta in &prods[&rhs[0]] {
                        let mut new_rhs = delta.clone();
                        new_rhs.extend_from_slice(&rhs[1..]);
                        out.push(new_rhs);
                    }
                    if out.len() > cap {
                        return Err(GrammarError::ProductionCap { cap });
                    }
                } else {
                    out.push(rhs);
                }
            }
            dedup_rhs(&mut out);
            prods.insert(z, out);
            if total(&prods) > cap {
                return Err(GrammarError::ProductionCap { cap });
            }
            if !changed {
                break;
            }
        }
    }

    let mut all = Vec::new();
    for &nt in order.iter().chain(tails.iter()) {
        for rhs in &prods[&nt] {
            all.push(Production { lhs: nt, rhs: rhs.clone() });
        }
    }
    g.productions = all;
    Ok(())
}

fn dedup_rhs(rules: &mut Vec<Vec<SymbolId>>) {
    let mut seen = HashSet::new();
    rules.retain(|r| seen.insert(r.clone()));
}

/// The marker-normal-form construction over a Greibach-form grammar:
/// split tails of two or more nonterminals behind a fresh symbol, expand
/// those symbols by the Cartesian product of their members' productions,
/// and pad adjacent terminals with a fresh empty-deriving nonterminal.
/// With `bounded` set, also pad at the ends so every long production starts
/// and finishes with a nonterminal.
fn marker_form_from_gnf(gnf: &Cfg, cap: usize, bounded: bool) -> Result<Cfg, GrammarError> {
    let mut g = gnf.clone();
    debug_assert!(is_gnf(&g));

    // split A -> a B1..Bm (m >= 2) into A -> a X, X -> B1..Bm
    let mut split: HashMap<Vec<SymbolId>, SymbolId> = HashMap::new();
    let mut split_order: Vec<(SymbolId, Vec<SymbolId>)> = Vec::new();
    for i in 0..g.productions.len() {
        if g.productions[i].rhs.len() >= 3 {
            let beta = g.productions[i].rhs[1..].to_vec();
            let x = *split.entry(beta.clone()).or_insert_with(|| {
                let x = g.fresh_nonterminal("X");
                split_order.push((x, beta));
                x
            });
            g.productions[i].rhs.truncate(1);
            g.productions[i].rhs.push(x);
        }
    }

    // expand each split symbol by the Cartesian product of its members'
    // productions (all of which are now `a` or `a X`)
    let mut member_rules: HashMap<SymbolId, Vec<Vec<SymbolId>>> = HashMap::new();
    for p in &g.productions {
        member_rules.entry(p.lhs).or_default().push(p.rhs.clone());
    }
    let mut expanded: Vec<Production> = Vec::new();
    for (x, beta) in &split_order {
        let mut combos: Vec<Vec<SymbolId>> = vec![Vec::new()];
        for b in beta {
            let choices = &member_rules[b];
            let budget = cap.saturating_sub(expanded.len() + g.productions.len());
            if combos.len().saturating_mul(choices.len()) > budget {
                return Err(GrammarError::ProductionCap { cap });
            }
            let mut next = Vec::with_capacity(combos.len() * choices.len());
            for prefix in &combos {
                for choice in choices {
                    let mut rhs = prefix.clone();
                    rhs.extend_from_slice(choice);
                    next.push(rhs);
                }
            }
            combos = next;
        }
        for rhs in combos {
            expanded.push(Production { lhs: *x, rhs });
        }
    }
    g.productions.extend(expanded);

    // pad with a fresh nonterminal deriving only the empty string
    let needs_between = |g: &Cfg, rhs: &[SymbolId]| {
        rhs.windows(2).any(|w| g.is_terminal(w[0]) && g.is_terminal(w[1]))
    };
    let needs_edges = |g: &Cfg, rhs: &[SymbolId]| {
        bounded && rhs.len() >= 2 && (g.is_terminal(rhs[0]) || g.is_terminal(*rhs.last().unwrap()))
    };
    if g.productions.iter().any(|p| needs_between(&g, &p.rhs) || needs_edges(&g, &p.rhs)) {
        let pad = g.fresh_nonterminal("Pad");
        for i in 0..g.productions.len() {
            let rhs = &g.productions[i].rhs;
            if rhs.len() < 2 {
                continue;
            }
            let mut out = Vec::with_capacity(rhs.len() * 2);
            if bounded && g.is_terminal(rhs[0]) {
                out.push(pad);
            }
            for (k, &s) in rhs.iter().enumerate() {
                if k > 0 && g.is_terminal(rhs[k - 1]) && g.is_terminal(s) {
                    out.push(pad);
                }
                out.push(s);
            }
            if bounded && g.is_terminal(*rhs.last().unwrap()) {
                out.push(pad);
            }
            g.productions[i].rhs = out;
        }
        g.productions.push(Production { lhs: pad, rhs: Vec::new() });
    }
    Ok(g)
}

/// Fresh start symbol deriving the old start's right-hand sides plus the
/// empty string.
fn readd_epsilon(g: &mut Cfg) {
    let old = g.start;
    let base = g.name(old).to_string();
    let fresh = g.fresh_nonterminal(&base);
    let copies: Vec<Production> = g
        .productions_of(old)
        .map(|p| Production { lhs: fresh, rhs: p.rhs.clone() })
        .collect();
    g.productions.extend(copies);
    g.productions.push(Production { lhs: fresh, rhs: Vec::new() });
    g.start = fresh;
}

/// Puts the start symbol's productions first so the textual rendering
/// re-parses with the same start.
fn finalize(g: &mut Cfg) {
    let start = g.start;
    g.productions.sort_by_key(|p| p.lhs != start);
}

/// Rebuilds the grammar so every production is `a`, `a B`, or `a B C`,
/// via an internal binarized (Chomsky-like) form and a left-corner
/// transform. Input must be epsilon-free, unit-free, and useless-free with
/// a non-empty language.
fn to_two_standard_gnf(g: &Cfg, cap: usize) -> Result<Cfg, GrammarError> {
    let mut cnf = g.clone();
    lift_tail_terminals(&mut cnf);
    // also lift leading terminals of long rules so every long rule is
    // binary over nonterminals
    let mut lifted: HashMap<SymbolId, SymbolId> = HashMap::new();
    let mut extra = Vec::new();
    for i in 0..cnf.productions.len() {
        if cnf.productions[i].rhs.len() >= 2 {
            let s = cnf.productions[i].rhs[0];
            if cnf.terminals.contains(&s) {
                let nt = *lifted.entry(s).or_insert_with(|| {
                    let nt = cnf.fresh_nonterminal("T");
                    extra.push(Production { lhs: nt, rhs: vec![s] });
                    nt
                });
                cnf.productions[i].rhs[0] = nt;
            }
        }
    }
    cnf.productions.extend(extra);
    // binarize
    let mut chain: HashMap<Vec<SymbolId>, SymbolId> = HashMap::new();
    let mut queue: Vec<Production> = std::mem::take(&mut cnf.productions);
    let mut done: Vec<Production> = Vec::new();
    while let Some(p) = queue.pop() {
        if p.rhs.len() <= 2 {
            done.push(p);
            continue;
        }
        let tail = p.rhs[1..].to_vec();
        let c = match chain.get(&tail) {
            Some(&c) => c,
            None => {
                let c = cnf.fresh_nonterminal("B");
                chain.insert(tail.clone(), c);
                queue.push(Production { lhs: c, rhs: tail.clone() });
                c
            }
        };
        done.push(Production { lhs: p.lhs, rhs: vec![p.rhs[0], c] });
        if done.len() + queue.len() > cap {
            return Err(GrammarError::ProductionCap { cap });
        }
    }
    cnf.productions = done;
    cnf.productions.reverse();

    // left-corner relation: lc[A] holds every symbol X with A =>*lm X ...
    // reachability over first-symbol edges
    let mut first_edges: HashMap<SymbolId, Vec<SymbolId>> = HashMap::new();
    for p in &cnf.productions {
        if let Some(&first) = p.rhs.first() {
            first_edges.entry(p.lhs).or_default().push(first);
        }
    }
    let mut lc: HashMap<SymbolId, BTreeSet<SymbolId>> = HashMap::new();
    for &a in &cnf.nonterminals {
        let mut set = BTreeSet::new();
        let mut stack = vec![a];
        while let Some(x) = stack.pop() {
            if !set.insert(x) {
                continue;
            }
            stack.extend(first_edges.get(&x).into_iter().flatten());
        }
        lc.insert(a, set);
    }

    let nts: Vec<SymbolId> = cnf.nonterminals.iter().copied().collect();
    let terms: Vec<SymbolId> = cnf.terminals.iter().copied().collect();
    let mut out = cnf.clone();
    out.productions = Vec::new();
    let mut dsym: HashMap<(SymbolId, SymbolId), SymbolId> = HashMap::new();
    let mut dsym_for = |out: &mut Cfg, goal: SymbolId, seen: SymbolId| -> SymbolId {
        *dsym.entry((goal, seen)).or_insert_with(|| out.fresh_nonterminal("D"))
    };
    for &a in &nts {
        for &t in &terms {
            if lc[&a].contains(&t) {
                let d = dsym_for(&mut out, a, t);
                out.productions.push(Production { lhs: a, rhs: vec![t, d] });
            }
        }
    }
    let base_rules: Vec<Production> = cnf.productions.clone();
    for p in &base_rules {
        let b = p.lhs;
        let x = p.rhs[0];
        for &a in &nts {
            if lc[&a].contains(&x) && lc[&a].contains(&b) {
                let d_seen = dsym_for(&mut out, a, x);
                let d_next = dsym_for(&mut out, a, b);
                let mut rhs: Vec<SymbolId> = p.rhs[1..].to_vec();
                rhs.push(d_next);
                out.productions.push(Production { lhs: d_seen, rhs });
            }
        }
        if out.productions.len() > cap {
            return Err(GrammarError::ProductionCap { cap });
        }
    }
    for &a in &nts {
        let d = dsym_for(&mut out, a, a);
        out.productions.push(Production { lhs: d, rhs: Vec::new() });
    }
    let mut out = strip_epsilon(&out, cap)?;
    out = remove_units(&out);
    out = remove_useless(&out);
    // remaining leading nonterminals are originals whose rules now all lead
    // with a terminal; one substitution pass finishes the job
    let by_nt: HashMap<SymbolId, Vec<Vec<SymbolId>>> = out
        .nonterminals
        .iter()
        .map(|&nt| (nt, out.productions_of(nt).map(|p| p.rhs.clone()).collect()))
        .collect();
    let mut prods = Vec::new();
    for p in &out.productions {
        if out.is_nonterminal(p.rhs[0]) {
            for delta in &by_nt[&p.rhs[0]] {
                let mut rhs = delta.clone();
                rhs.extend_from_slice(&p.rhs[1..]);
                prods.push(Production { lhs: p.lhs, rhs });
            }
        } else {
            prods.push(p.clone());
        }
        if prods.len() > cap {
            return Err(GrammarError::ProductionCap { cap });
        }
    }
    let mut seen = HashSet::new();
    prods.retain(|p| seen.insert((p.lhs, p.rhs.clone())));
    out.productions = prods;
    let out = remove_useless(&out);
    debug_assert!(
        out.productions
            .iter()
            .all(|p| !p.rhs.is_empty() && out.is_terminal(p.rhs[0]) && p.rhs.len() <= 3),
        "two-standard form construction produced an out-of-shape rule"
    );
    Ok(out)
}
