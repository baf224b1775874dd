//! Strict top-down marker-split parsing and permute-translate-concatenate
//! generation.
//!
//! Parsing partitions a sentence into a rule's constituents by scanning
//! left to right: for each marked slot in rule order, the leftmost
//! occurrence of any of its marker words at or after the cursor opens that
//! slot (the marker belongs to the piece it begins), closes the piece that
//! was open, and advances the cursor. A slot whose marker never appears is
//! empty and the cursor stays put. The sentence is a leaf when no marker of
//! the rule appears at all, when it has at most one token, or when the depth
//! limit is reached. Pieces recurse under their slot's rule; leaves
//! translate word by word through the leaf rule's dictionary.

use crate::corpus::{detokenize, TokenId};
use crate::model::TransferFunction;

/// Recursive constituent structure. Leaf token sequences concatenated left
/// to right always reproduce the parsed sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseTree {
    Leaf {
        rule: usize,
        tokens: Vec<TokenId>,
    },
    Internal {
        rule: usize,
        children: Vec<ParseTree>,
        /// For each slot 1..k-1, the absolute position of the marker that
        /// opened it, when found.
        splits: Vec<Option<usize>>,
    },
}

impl ParseTree {
    pub fn rule(&self) -> usize {
        match self {
            ParseTree::Leaf { rule, .. } | ParseTree::Internal { rule, .. } => *rule,
        }
    }

    /// Concatenated source tokens covered by this node.
    pub fn span(&self) -> Vec<TokenId> {
        match self {
            ParseTree::Leaf { tokens, .. } => tokens.clone(),
            ParseTree::Internal { children, .. } => {
                children.iter().flat_map(|c| c.span()).collect()
            }
        }
    }
}

/// A translated token: either a target-vocabulary word, or a source word
/// passed through because the leaf dictionary had no entry for it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutToken {
    Target(TokenId),
    Passthrough(TokenId),
}

impl OutToken {
    /// The raw id, regardless of which vocabulary it belongs to.
    pub fn id(self) -> TokenId {
        match self {
            OutToken::Target(t) | OutToken::Passthrough(t) => t,
        }
    }
}

/// Computes each slot's piece as a half-open token range, the marker
/// positions used, and whether any marker was found.
fn split_slots(
    m: &TransferFunction,
    rule: usize,
    tokens: &[TokenId],
) -> (Vec<(usize, usize)>, Vec<Option<usize>>, bool) {
    let k = m.shape.fanout;
    let slots = &m.rules[rule].slots;
    let mut pieces: Vec<Option<(usize, usize)>> = vec![None; k];
    let mut splits: Vec<Option<usize>> = vec![None; k];
    let mut cursor = 0usize;
    let mut open = 0usize;
    let mut any = false;
    for j in 1..k {
        let found = (cursor..tokens.len()).find(|&p| slots[j].markers.contains(&tokens[p]));
        match found {
            Some(p) => {
                any = true;
                pieces[open] = Some((cursor, p));
                splits[j] = Some(p);
                cursor = p;
                open = j;
            }
            None => {
                pieces[j] = Some((cursor, cursor));
            }
        }
    }
    pieces[open] = Some((cursor, tokens.len()));
    let pieces = pieces
        .into_iter()
        .map(|p| p.expect("every slot receives a piece"))
        .collect();
    (pieces, splits, any)
}

/// Parses a token sequence under the given rule. Total: always returns a
/// tree whose leaves partition the input.
pub fn parse(m: &TransferFunction, tokens: &[TokenId], rule: usize, depth: usize) -> ParseTree {
    debug_assert!(depth <= m.shape.max_depth);
    if tokens.len() <= 1 || depth >= m.shape.max_depth {
        return ParseTree::Leaf {
            rule,
            tokens: tokens.to_vec(),
        };
    }
    let (pieces, splits, any) = split_slots(m, rule, tokens);
    if !any {
        return ParseTree::Leaf {
            rule,
            tokens: tokens.to_vec(),
        };
    }
    let children = pieces
        .iter()
        .enumerate()
        .map(|(j, &(s, e))| {
            let sub = &tokens[s..e];
            let nt = m.rules[rule].slots[j].nonterminal;
            if sub.is_empty() {
                ParseTree::Leaf {
                    rule: nt,
                    tokens: Vec::new(),
                }
            } else {
                parse(m, sub, nt, depth + 1)
            }
        })
        .collect();
    ParseTree::Internal {
        rule,
        children,
        splits: splits[1..].to_vec(),
    }
}

/// Translates a parse tree: leaves translate word by word through their
/// rule's dictionary (empty-token results are dropped, missing entries pass
/// the source word through); internal nodes translate children, reorder
/// them by the rule's permutation, and interleave the rule's insertions at
/// their output gaps.
pub fn translate_tree(m: &TransferFunction, tree: &ParseTree) -> Vec<OutToken> {
    match tree {
        ParseTree::Leaf { rule, tokens } => tokens
            .iter()
            .filter_map(|&tok| match m.dictionaries[*rule].lookup(tok) {
                Some(TokenId::EPS) => None,
                Some(t) => Some(OutToken::Target(t)),
                None => Some(OutToken::Passthrough(tok)),
            })
            .collect(),
        ParseTree::Internal { rule, children, .. } => {
            let translated: Vec<Vec<OutToken>> =
                children.iter().map(|c| translate_tree(m, c)).collect();
            let r = &m.rules[*rule];
            let mut out = Vec::new();
            for gap in 0..=children.len() {
                for &(g, tok) in &r.insertions {
                    if g == gap {
                        out.push(OutToken::Target(tok));
                    }
                }
                if gap < children.len() {
                    out.extend_from_slice(&translated[r.permutation[gap]]);
                }
            }
            out
        }
    }
}

/// Full pipeline with provenance kept per token.
pub fn translate_out(m: &TransferFunction, tokens: &[TokenId]) -> Vec<OutToken> {
    translate_tree(m, &parse(m, tokens, 0, 0))
}

/// Full pipeline, target id sequence. Words without a dictionary entry keep
/// their source id.
pub fn translate(m: &TransferFunction, tokens: &[TokenId]) -> Vec<TokenId> {
    translate_out(m, tokens).iter().map(|t| t.id()).collect()
}

/// Renders translated tokens as text, resolving pass-through words against
/// the source vocabulary.
pub fn render_out(m: &TransferFunction, out: &[OutToken]) -> String {
    out.iter()
        .filter_map(|t| match *t {
            OutToken::Target(id) => m.target_vocab.token(id),
            OutToken::Passthrough(id) => m.source_vocab.token(id),
        })
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Number of constituent levels shown by traces, matching the compact
/// two-level presentation the bracketed format uses.
const TRACE_DEPTH: usize = 2;

/// Four snapshots of one translation: source bracketing, per-constituent
/// translations in source order, the same after permutation, and the final
/// string. The last stage always equals the detokenized translation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub stages: Vec<String>,
}

/// Renders the source bracketing of a tree. `depth` of `None` renders every
/// level; empty constituents are omitted.
pub fn render_brackets(m: &TransferFunction, tree: &ParseTree, depth: Option<usize>) -> String {
    fn body(m: &TransferFunction, node: &ParseTree, depth: Option<usize>) -> String {
        match node {
            ParseTree::Leaf { tokens, .. } => detokenize(tokens, &m.source_vocab),
            ParseTree::Internal { .. } if depth == Some(0) => {
                detokenize(&node.span(), &m.source_vocab)
            }
            ParseTree::Internal { .. } => row(m, node, depth),
        }
    }
    fn row(m: &TransferFunction, node: &ParseTree, depth: Option<usize>) -> String {
        let ParseTree::Internal { children, .. } = node else {
            unreachable!()
        };
        children
            .iter()
            .filter(|c| !c.span().is_empty())
            .map(|c| format!("({})", body(m, c, depth.map(|d| d - 1))))
            .collect::<Vec<_>>()
            .join(" ")
    }
    match tree {
        ParseTree::Leaf { tokens, .. } => format!("({})", detokenize(tokens, &m.source_vocab)),
        ParseTree::Internal { .. } => row(m, tree, depth),
    }
}

/// Renders the translated bracketing down to `depth` levels; deeper
/// constituents appear as their finished translation. With `permuted` set,
/// the visible levels are reordered by their rules' permutations and
/// visible-level insertions are interleaved.
fn render_translated(m: &TransferFunction, tree: &ParseTree, depth: usize, permuted: bool) -> String {
    fn box_body(m: &TransferFunction, node: &ParseTree, depth: usize, permuted: bool) -> String {
        match node {
            ParseTree::Leaf { .. } => render_out(m, &translate_tree(m, node)),
            ParseTree::Internal { .. } if depth == 0 => render_out(m, &translate_tree(m, node)),
            ParseTree::Internal { .. } => row(m, node, depth, permuted),
        }
    }
    fn row(m: &TransferFunction, node: &ParseTree, depth: usize, permuted: bool) -> String {
        let ParseTree::Internal { rule, children, .. } = node else {
            unreachable!()
        };
        let r = &m.rules[*rule];
        let mut parts: Vec<String> = Vec::new();
        for gap in 0..=children.len() {
            if permuted {
                for &(g, tok) in &r.insertions {
                    if g == gap {
                        if let Some(word) = m.target_vocab.token(tok) {
                            parts.push(word.to_string());
                        }
                    }
                }
            }
            if gap < children.len() {
                let child = if permuted {
                    &children[r.permutation[gap]]
                } else {
                    &children[gap]
                };
                if !child.span().is_empty() {
                    parts.push(format!("({})", box_body(m, child, depth - 1, permuted)));
                }
            }
        }
        parts.join(" ")
    }
    match tree {
        ParseTree::Leaf { .. } => format!("({})", render_out(m, &translate_tree(m, tree))),
        ParseTree::Internal { .. } => row(m, tree, depth, permuted),
    }
}

/// Emits the four-stage trace for one sentence.
pub fn explain(m: &TransferFunction, tokens: &[TokenId]) -> Trace {
    let tree = parse(m, tokens, 0, 0);
    let out = translate_tree(m, &tree);
    Trace {
        stages: vec![
            render_brackets(m, &tree, Some(TRACE_DEPTH)),
            render_translated(m, &tree, TRACE_DEPTH, false),
            render_translated(m, &tree, TRACE_DEPTH, true),
            render_out(m, &out),
        ],
    }
}
