//! The training objective: insert/delete edit distance between produced
//! and reference target sentences, summed over a corpus.
//!
//! The distance is computed with the greedy diagonal shortest-edit-script
//! algorithm (the diff algorithm): it finds the minimal number of
//! insertions plus deletions directly, from which the longest common
//! subsequence length follows as (|a| + |b| - d) / 2.

use serde::Serialize;
use thiserror::Error;

use crate::corpus::Corpus;
use crate::engine::translate;
use crate::model::TransferFunction;

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("model and corpus vocabularies differ on the {side} side")]
    VocabMismatch { side: &'static str },
    #[error("corpus has no sentence pairs")]
    EmptyCorpus,
}

/// Minimal insertions plus deletions transforming `a` into `b`, by the
/// greedy furthest-reaching-diagonal search.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let n = a.len();
    let m = b.len();
    if n == 0 || m == 0 {
        return n + m;
    }
    let max = n + m;
    // v[k + offset] = furthest x on diagonal k
    let offset = max as isize;
    let mut v = vec![0usize; 2 * max + 1];
    for d in 0..=max {
        let mut k = -(d as isize);
        while k <= d as isize {
            let idx = (k + offset) as usize;
            let mut x = if k == -(d as isize) || (k != d as isize && v[idx - 1] < v[idx + 1]) {
                v[idx + 1]
            } else {
                v[idx - 1] + 1
            };
            let mut y = (x as isize - k) as usize;
            while x < n && y < m && a[x] == b[y] {
                x += 1;
                y += 1;
            }
            v[idx] = x;
            if x >= n && y >= m {
                return d;
            }
            k += 2;
        }
    }
    unreachable!("edit distance search always terminates within |a| + |b| steps")
}

/// Length of a longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    (a.len() + b.len() - edit_distance(a, b)) / 2
}

fn check_vocabs(m: &TransferFunction, c: &Corpus) -> Result<(), ScoreError> {
    if m.source_vocab.hash() != c.source_vocab.hash() {
        return Err(ScoreError::VocabMismatch { side: "source" });
    }
    if m.target_vocab.hash() != c.target_vocab.hash() {
        return Err(ScoreError::VocabMismatch { side: "target" });
    }
    Ok(())
}

/// Sum of per-pair edit distances between the model's translation of each
/// source sentence and its reference target. Zero iff every training
/// translation is exact. Lower is better.
pub fn corpus_objective(m: &TransferFunction, c: &Corpus) -> Result<usize, ScoreError> {
    check_vocabs(m, c)?;
    Ok(c.pairs
        .iter()
        .map(|p| edit_distance(&translate(m, &p.source), &p.target))
        .sum())
}

/// Full quality report over a corpus.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreReport {
    pub pairs: usize,
    pub total_distance: usize,
    pub per_pair: Vec<usize>,
    pub exact_matches: usize,
    pub mean_distance: f64,
    /// 1 - total / sum(|hypothesis| + |reference|), clamped to 1 when the
    /// denominator is zero.
    pub normalized_score: f64,
}

impl ScoreReport {
    /// Flat `key=value` text block.
    pub fn to_text(&self) -> String {
        format!(
            "pairs={}\ntotal_distance={}\nexact_matches={}\nmean_distance={}\nnormalized_score={}\n",
            self.pairs, self.total_distance, self.exact_matches, self.mean_distance, self.normalized_score
        )
    }
}

pub fn report(m: &TransferFunction, c: &Corpus) -> Result<ScoreReport, ScoreError> {
    check_vocabs(m, c)?;
    if c.pairs.is_empty() {
        return Err(ScoreError::EmptyCorpus);
    }
    let mut per_pair = Vec::with_capacity(c.pairs.len());
    let mut denom = 0usize;
    for p in &c.pairs {
        let hyp = translate(m, &p.source);
        denom += hyp.len() + p.target.len();
        per_pair.push(edit_distance(&hyp, &p.target));
    }
    let total_distance: usize = per_pair.iter().sum();
    let exact_matches = per_pair.iter().filter(|&&d| d == 0).count();
    let mean_distance = total_distance as f64 / per_pair.len() as f64;
    let normalized_score = if denom == 0 {
        1.0
    } else {
        1.0 - total_distance as f64 / denom as f64
    };
    Ok(ScoreReport {
        pairs: per_pair.len(),
        total_distance,
        per_pair,
        exact_matches,
        mean_distance,
        normalized_score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, CorpusOptions, TokenId};
    use crate::model::{random_model, DictInit, InitOptions, ModelShape};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Classic quadratic dynamic program over insertions and deletions,
    /// kept independent of the production path.
    fn dp_distance(a: &[u32], b: &[u32]) -> usize {
        let mut row: Vec<usize> = (0..=b.len()).collect();
        for i in 1..=a.len() {
            let mut prev_diag = row[0];
            row[0] = i;
            for j in 1..=b.len() {
                let up = row[j];
                row[j] = if a[i - 1] == b[j - 1] {
                    prev_diag
                } else {
                    1 + row[j].min(row[j - 1])
                };
                prev_diag = up;
            }
        }
        row[b.len()]
    }

    fn dp_lcs(a: &[u32], b: &[u32]) -> usize {
        let mut table = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                table[i][j] = if a[i - 1] == b[j - 1] {
                    table[i - 1][j - 1] + 1
                } else {
                    table[i - 1][j].max(table[i][j - 1])
                };
            }
        }
        table[a.len()][b.len()]
    }

    #[test]
    fn hand_checked_values() {
        // "the man" vs "man the" as ids
        let the_man = [0u32, 1];
        let man_the = [1u32, 0];
        assert_eq!(lcs_len(&the_man, &man_the), 1);
        assert_eq!(edit_distance(&the_man, &man_the), 2);
        assert_eq!(lcs_len(&[5u32], &[5u32]), 1);
        assert_eq!(lcs_len::<u32>(&[], &[1, 2, 3]), 0);
        assert_eq!(edit_distance(&[1u32, 2], &[1u32, 2]), 0);
        assert_eq!(edit_distance::<u32>(&[], &[7, 8]), 2);
    }

    #[test]
    fn agrees_with_dp_oracle_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1_000 {
            let la = rng.gen_range(0..=20);
            let lb = rng.gen_range(0..=20);
            let a: Vec<u32> = (0..la).map(|_| rng.gen_range(0..5)).collect();
            let b: Vec<u32> = (0..lb).map(|_| rng.gen_range(0..5)).collect();
            assert_eq!(edit_distance(&a, &b), dp_distance(&a, &b), "a={a:?} b={b:?}");
            assert_eq!(lcs_len(&a, &b), dp_lcs(&a, &b), "a={a:?} b={b:?}");
        }
    }

    #[test]
    fn metric_axioms_parity_and_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..10_000 {
            let mut seqs = Vec::new();
            for _ in 0..3 {
                let l = rng.gen_range(0..=12);
                seqs.push((0..l).map(|_| rng.gen_range(0u32..4)).collect::<Vec<_>>());
            }
            let (x, y, z) = (&seqs[0], &seqs[1], &seqs[2]);
            let dxy = edit_distance(x, y);
            assert_eq!(edit_distance(x, x), 0);
            assert_eq!(dxy, edit_distance(y, x));
            assert!(dxy <= edit_distance(x, z) + edit_distance(z, y));
            assert_eq!((x.len() + y.len()) % 2, dxy % 2);
            assert!(dxy >= x.len().abs_diff(y.len()));
            assert!(dxy <= x.len() + y.len());
        }
    }

    #[test]
    fn all_eps_dictionaries_cost_total_target_length() {
        let corpus = Corpus::parse_pairs(
            "a b ||| x y z\nc ||| w\n",
            CorpusOptions::default(),
        )
        .unwrap();
        let m = random_model(
            ModelShape::new(2, 2),
            &corpus,
            &mut ChaCha8Rng::seed_from_u64(1),
            &InitOptions {
                dict_init: DictInit::Epsilon,
                ..InitOptions::default()
            },
        )
        .unwrap();
        let expected: usize = corpus.pairs.iter().map(|p| p.target.len()).sum();
        assert_eq!(corpus_objective(&m, &corpus).unwrap(), expected);
        let r = report(&m, &corpus).unwrap();
        assert_eq!(r.total_distance, expected);
        assert_eq!(r.exact_matches, 0);
        assert_eq!(r.normalized_score, 0.0);
    }

    #[test]
    fn objective_equals_sum_of_dp_distances() {
        let corpus = Corpus::parse_pairs(
            "a b c ||| x y\nb a ||| y x z\nc c ||| x\n",
            CorpusOptions::default(),
        )
        .unwrap();
        let m = random_model(
            ModelShape::new(3, 3),
            &corpus,
            &mut ChaCha8Rng::seed_from_u64(33),
            &InitOptions::default(),
        )
        .unwrap();
        let by_dp: usize = corpus
            .pairs
            .iter()
            .map(|p| {
                let hyp: Vec<u32> = translate(&m, &p.source).iter().map(|t| t.0).collect();
                let tgt: Vec<u32> = p.target.iter().map(|t| t.0).collect();
                dp_distance(&hyp, &tgt)
            })
            .sum();
        assert_eq!(corpus_objective(&m, &corpus).unwrap(), by_dp);
    }

    #[test]
    fn vocab_mismatch_is_an_error() {
        let corpus = Corpus::parse_pairs("a ||| x\n", CorpusOptions::default()).unwrap();
        let other = Corpus::parse_pairs("b ||| y\n", CorpusOptions::default()).unwrap();
        let m = random_model(
            ModelShape::new(1, 2),
            &corpus,
            &mut ChaCha8Rng::seed_from_u64(2),
            &InitOptions::default(),
        )
        .unwrap();
        assert!(matches!(
            corpus_objective(&m, &other),
            Err(ScoreError::VocabMismatch { .. })
        ));
    }

    #[test]
    fn empty_corpus_report_is_an_error() {
        let corpus = Corpus::parse_pairs("a ||| x\n", CorpusOptions::default()).unwrap();
        let m = random_model(
            ModelShape::new(1, 2),
            &corpus,
            &mut ChaCha8Rng::seed_from_u64(3),
            &InitOptions::default(),
        )
        .unwrap();
        let mut empty = corpus.clone();
        empty.pairs.clear();
        assert!(matches!(report(&m, &empty), Err(ScoreError::EmptyCorpus)));
    }

    #[test]
    fn perfect_model_reports_all_exact() {
        let corpus = Corpus::parse_pairs("a ||| x\nb ||| y\n", CorpusOptions::default()).unwrap();
        let mut m = random_model(
            ModelShape::new(1, 2),
            &corpus,
            &mut ChaCha8Rng::seed_from_u64(4),
            &InitOptions::default(),
        )
        .unwrap();
        let a = corpus.source_vocab.get("a").unwrap();
        let b = corpus.source_vocab.get("b").unwrap();
        let x = corpus.target_vocab.get("x").unwrap();
        let y = corpus.target_vocab.get("y").unwrap();
        m.dictionaries[0].map.insert(a, x);
        m.dictionaries[0].map.insert(b, y);
        let r = report(&m, &corpus).unwrap();
        assert_eq!(r.exact_matches, 2);
        assert_eq!(r.total_distance, 0);
        assert_eq!(r.normalized_score, 1.0);
        assert!(r.per_pair.iter().all(|&d| d == 0));
        let _ = TokenId::EPS; // silence unused import in some cfgs
    }

    #[test]
    fn normalized_score_stays_in_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..200 {
            let corpus = Corpus::parse_pairs(
                "a b ||| x y\nb c a ||| z\nc ||| w x\n",
                CorpusOptions::default(),
            )
            .unwrap();
            let m = random_model(
                ModelShape::new(1 + seed % 3, 2 + seed % 2),
                &corpus,
                &mut rng,
                &InitOptions::default(),
            )
            .unwrap();
            let r = report(&m, &corpus).unwrap();
            assert!((0.0..=1.0).contains(&r.normalized_score));
        }
    }
}
