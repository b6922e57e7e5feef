//! Synthetic labeled corpora for testing what each structural prior can express.
//!
//! * Order task: markers `A` and `B` appear once each among filler tokens; the label
//!   is 1 iff `A` precedes `B`. Bags of words carry no signal. Trees are chains.
//! * Tree task: a random tree whose root carries the marker `R`; label 1 iff the
//!   token `A` lies within tree distance 2 of the root. Word order is shuffled so
//!   linear position carries no signal.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::masks::tree_distances;

use super::DepSentence;

pub const MARKER_A: &str = "A";
pub const MARKER_B: &str = "B";
pub const MARKER_ROOT: &str = "R";
pub const FILLERS: [&str; 6] = ["c", "d", "e", "f", "g", "h"];

/// Tree distance (inclusive) from the root under which a tree-task example is positive.
pub const TREE_TASK_RADIUS: usize = 2;

fn filler<R: Rng>(rng: &mut R) -> String {
    FILLERS[rng.gen_range(0..FILLERS.len())].to_string()
}

/// Chain tree over `l` tokens: token 1 is the root, token `i` heads token `i + 1`.
pub fn chain_heads(l: usize) -> Vec<usize> {
    (0..l).collect()
}

/// `n` order-task sentences of length `l`. Labels alternate 1, 0, 1, ... so classes
/// are balanced within one.
pub fn gen_order_task(n: usize, l: usize, seed: u64) -> Result<Vec<DepSentence>> {
    if l < 4 {
        return Err(Error::Config(format!("order task needs l >= 4, got {l}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|k| {
            let label = (k + 1) % 2;
            let mut tokens: Vec<String> = (0..l).map(|_| filler(&mut rng)).collect();
            let i = rng.gen_range(0..l);
            let mut j = rng.gen_range(0..l - 1);
            if j >= i {
                j += 1;
            }
            let (first, second) = (i.min(j), i.max(j));
            let (a, b) = if label == 1 { (first, second) } else { (second, first) };
            tokens[a] = MARKER_A.to_string();
            tokens[b] = MARKER_B.to_string();
            DepSentence::new(tokens, chain_heads(l), Some(label))
        })
        .collect()
}

/// Label of an order-task sentence, recomputed from its tokens.
pub fn order_label(sentence: &DepSentence) -> Option<usize> {
    let a = sentence.position(MARKER_A)?;
    let b = sentence.position(MARKER_B)?;
    Some(usize::from(a < b))
}

/// `n` tree-task sentences of length `l`, labels alternating 1, 0, 1, ...
pub fn gen_tree_task(n: usize, l: usize, seed: u64) -> Result<Vec<DepSentence>> {
    if l < 5 {
        return Err(Error::Config(format!("tree task needs l >= 5, got {l}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|k| {
            let want = (k + 1) % 2;
            loop {
                let s = random_tree_sentence(l, &mut rng)?;
                if tree_label(&s)? == Some(want) {
                    let mut s = s;
                    s.label = Some(want);
                    return Ok(s);
                }
            }
        })
        .collect()
}

fn random_tree_sentence<R: Rng>(l: usize, rng: &mut R) -> Result<DepSentence> {
    // parents drawn from the few most recent nodes give a spread of depths
    let parent: Vec<Option<usize>> = (0..l)
        .map(|v| (v > 0).then(|| rng.gen_range(v.saturating_sub(3)..v)))
        .collect();
    let a_node = rng.gen_range(1..l);
    let mut position: Vec<usize> = (0..l).collect();
    position.shuffle(rng);

    let mut tokens = vec![String::new(); l];
    let mut heads = vec![0; l];
    for v in 0..l {
        tokens[position[v]] = match v {
            0 => MARKER_ROOT.to_string(),
            _ if v == a_node => MARKER_A.to_string(),
            _ => filler(rng),
        };
        heads[position[v]] = parent[v].map_or(0, |p| position[p] + 1);
    }
    DepSentence::new(tokens, heads, None)
}

/// Label of a tree-task sentence, recomputed from its tree.
pub fn tree_label(sentence: &DepSentence) -> Result<Option<usize>> {
    let (Some(a), Some(root)) = (sentence.position(MARKER_A), sentence.heads.iter().position(|&h| h == 0)) else {
        return Ok(None);
    };
    let d = tree_distances(&sentence.heads)?;
    Ok(Some(usize::from(d.get(a, root) <= TREE_TASK_RADIUS)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn order_task_is_reproducible_and_balanced() {
        let a = gen_order_task(101, 7, 5).unwrap();
        assert_eq!(a, gen_order_task(101, 7, 5).unwrap());
        assert_ne!(a, gen_order_task(101, 7, 6).unwrap());
        let pos = a.iter().filter(|s| s.label == Some(1)).count();
        assert!((pos as i64 - 50).abs() <= 1);
        for s in &a {
            assert_eq!(s.tokens.iter().filter(|t| *t == MARKER_A).count(), 1);
            assert_eq!(s.tokens.iter().filter(|t| *t == MARKER_B).count(), 1);
            assert_eq!(order_label(s), s.label);
            assert_eq!(s.heads, chain_heads(7));
        }
    }

    #[test]
    fn order_task_bag_of_words_is_uninformative() {
        // logistic regression on token counts, trained on one half, tested on the other
        let data = gen_order_task(2000, 8, 11).unwrap();
        let vocab: Vec<&str> = FILLERS.iter().copied().chain([MARKER_A, MARKER_B]).collect();
        let features = |s: &DepSentence| -> Vec<f64> {
            let mut f: Vec<f64> = vocab
                .iter()
                .map(|v| s.tokens.iter().filter(|t| t == v).count() as f64)
                .collect();
            f.push(1.0);
            f
        };
        let (train, test) = data.split_at(1000);
        let mut w = vec![0.0; vocab.len() + 1];
        for _ in 0..200 {
            let mut grad = vec![0.0; w.len()];
            for s in train {
                let x = features(s);
                let z: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
                let p = 1.0 / (1.0 + (-z).exp());
                let y = s.label.unwrap() as f64;
                for (g, xi) in grad.iter_mut().zip(&x) {
                    *g += (p - y) * xi / train.len() as f64;
                }
            }
            for (wi, g) in w.iter_mut().zip(&grad) {
                *wi -= 0.5 * g;
            }
        }
        let correct = test
            .iter()
            .filter(|s| {
                let z: f64 = features(s).iter().zip(&w).map(|(a, b)| a * b).sum();
                usize::from(z > 0.0) == s.label.unwrap()
            })
            .count();
        assert!((correct as f64) / (test.len() as f64) <= 0.55, "{correct}");
    }

    #[test]
    fn tree_task_labels_match_oracle_and_are_balanced() {
        let data = gen_tree_task(400, 9, 3).unwrap();
        assert_eq!(data, gen_tree_task(400, 9, 3).unwrap());
        let pos = data.iter().filter(|s| s.label == Some(1)).count();
        assert!((pos as f64 / 400.0 - 0.5).abs() <= 0.05);
        for s in &data {
            let root = s.heads.iter().position(|&h| h == 0).unwrap();
            assert_eq!(s.tokens[root], MARKER_ROOT);
            // independent depth walk up the head chain
            let mut node = s.position(MARKER_A).unwrap();
            let mut depth = 0;
            while s.heads[node] != 0 {
                node = s.heads[node] - 1;
                depth += 1;
            }
            assert_eq!(s.label, Some(usize::from(depth <= TREE_TASK_RADIUS)));
        }
    }

    #[test]
    fn tree_task_positions_are_shuffled() {
        let data = gen_tree_task(600, 8, 9).unwrap();
        let mut root_positions = BTreeMap::new();
        for s in &data {
            *root_positions
                .entry(s.heads.iter().position(|&h| h == 0).unwrap())
                .or_insert(0) += 1;
        }
        assert_eq!(root_positions.len(), 8);
        assert!(root_positions.values().all(|&c| c > 30));
    }

    #[test]
    fn short_lengths_rejected() {
        assert!(gen_order_task(4, 3, 0).is_err());
        assert!(gen_tree_task(4, 4, 0).is_err());
    }
}
