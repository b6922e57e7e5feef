//! Structural-prior attention masks and the per-head mask schedule.
//!
//! Indices are 0-based throughout the API. Entry `(i, j)` is the bias added to
//! the logit of query `i` attending to key `j`.

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{is_masked, Tensor, SENTINEL};
use crate::error::{Error, Result};

/// Square additive attention bias. Finite entries are `<= 0`; masked entries hold [`SENTINEL`].
#[derive(Clone, Debug, PartialEq)]
pub struct MaskMatrix {
    len: usize,
    data: Vec<f64>,
}

impl MaskMatrix {
    fn from_fn(len: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(len * len);
        for i in 0..len {
            for j in 0..len {
                data.push(f(i, j));
            }
        }
        MaskMatrix { len, data }
    }

    pub fn zeros(len: usize) -> Self {
        MaskMatrix {
            len,
            data: vec![0.0; len * len],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.len + j]
    }

    pub fn is_masked(&self, i: usize, j: usize) -> bool {
        is_masked(self.get(i, j))
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(&[self.len, self.len], self.data.clone()).expect("square mask")
    }

    /// Extend to `padded` positions. Real queries never see padded keys; padded
    /// queries see only themselves so their softmax rows stay well defined.
    pub fn pad_to(&self, padded: usize) -> Result<MaskMatrix> {
        if padded < self.len {
            return Err(Error::dim("pad_to", &[self.len], &[padded]));
        }
        Ok(MaskMatrix::from_fn(padded, |i, j| {
            if i < self.len && j < self.len {
                self.get(i, j)
            } else if i >= self.len && i == j {
                0.0
            } else {
                SENTINEL
            }
        }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceKind {
    Word,
    #[serde(alias = "dep")]
    Dependency,
    None,
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceKind::Word => "word",
            DistanceKind::Dependency => "dependency",
            DistanceKind::None => "none",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HeadSpec {
    pub direction: Direction,
    pub distance: DistanceKind,
}

/// Assignment of (direction, distance) pairs to attention heads.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSchedule {
    heads: Vec<HeadSpec>,
}

impl MaskSchedule {
    pub fn heads(&self) -> &[HeadSpec] {
        &self.heads
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }

    pub fn needs_tree(&self) -> bool {
        self.heads.iter().any(|h| h.distance == DistanceKind::Dependency)
    }

    /// All heads share one direction; the distance cycle is repeated to fill `n_heads`.
    /// Used by the two-encoder variant, where each encoder covers a single direction.
    pub fn single_direction(direction: Direction, n_heads: usize, distance_cycle: &[DistanceKind]) -> Result<Self> {
        if distance_cycle.is_empty() || !n_heads.is_multiple_of(distance_cycle.len()) {
            return Err(Error::Config(format!(
                "{n_heads} heads cannot be filled by a distance cycle of length {}",
                distance_cycle.len()
            )));
        }
        let heads = distance_cycle
            .iter()
            .cycle()
            .take(n_heads)
            .map(|&distance| HeadSpec { direction, distance })
            .collect();
        Ok(MaskSchedule { heads })
    }
}

/// Forward heads first, backward heads second, same distance order in both halves.
pub fn build_schedule(n_heads: usize, distance_cycle: &[DistanceKind]) -> Result<MaskSchedule> {
    if n_heads == 0 || !n_heads.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "head count must be even and positive, got {n_heads}"
        )));
    }
    let half = n_heads / 2;
    if distance_cycle.len() != half {
        return Err(Error::Config(format!(
            "distance cycle has {} entries, expected {half} for {n_heads} heads",
            distance_cycle.len()
        )));
    }
    let heads = [Direction::Forward, Direction::Backward]
        .into_iter()
        .flat_map(|direction| {
            distance_cycle
                .iter()
                .map(move |&distance| HeadSpec { direction, distance })
        })
        .collect();
    Ok(MaskSchedule { heads })
}

fn check_len(l: usize) -> Result<()> {
    if l == 0 {
        return Err(Error::Empty("mask length must be at least 1"));
    }
    Ok(())
}

/// Query `i` may attend to keys `j >= i`.
pub fn forward_mask(l: usize) -> Result<MaskMatrix> {
    check_len(l)?;
    Ok(MaskMatrix::from_fn(l, |i, j| if i <= j { 0.0 } else { SENTINEL }))
}

/// Query `i` may attend to keys `j <= i`.
pub fn backward_mask(l: usize) -> Result<MaskMatrix> {
    check_len(l)?;
    Ok(MaskMatrix::from_fn(l, |i, j| if i >= j { 0.0 } else { SENTINEL }))
}

/// `-|i - j|`.
pub fn word_distance_mask(l: usize) -> Result<MaskMatrix> {
    check_len(l)?;
    Ok(MaskMatrix::from_fn(l, |i, j| -(i.abs_diff(j) as f64)))
}

/// Pairwise path lengths on an undirected dependency tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeDistances {
    len: usize,
    data: Vec<usize>,
}

impl TreeDistances {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize, j: usize) -> usize {
        self.data[i * self.len + j]
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.data[i * self.len..(i + 1) * self.len]
    }
}

/// Validate a head array (`heads[i]` is the 1-based head of token `i + 1`, 0 = root).
///
/// Errors name the offending token with its 1-based index.
pub fn validate_tree(heads: &[usize]) -> Result<()> {
    let l = heads.len();
    if l == 0 {
        return Err(Error::Empty("dependency tree has no tokens"));
    }
    let mut root = None;
    for (i, &h) in heads.iter().enumerate() {
        let token = i + 1;
        if h > l {
            return Err(Error::MalformedTree {
                token,
                reason: format!("head {h} is outside 0..={l}"),
            });
        }
        if h == token {
            return Err(Error::MalformedTree {
                token,
                reason: "token is its own head".into(),
            });
        }
        if h == 0 {
            if let Some(first) = root {
                return Err(Error::MalformedTree {
                    token,
                    reason: format!("second root (token {first} is already the root)"),
                });
            }
            root = Some(token);
        }
    }
    if root.is_none() {
        return Err(Error::MalformedTree {
            token: 1,
            reason: "no token has head 0".into(),
        });
    }
    // every token must reach the root within l steps
    for start in 0..l {
        let mut cur = start;
        let mut steps = 0;
        while heads[cur] != 0 {
            cur = heads[cur] - 1;
            steps += 1;
            if steps > l {
                return Err(Error::MalformedTree {
                    token: start + 1,
                    reason: "head chain contains a cycle".into(),
                });
            }
        }
    }
    Ok(())
}

/// Undirected shortest-path distances between all token pairs, by breadth-first search
/// from every token.
pub fn tree_distances(heads: &[usize]) -> Result<TreeDistances> {
    validate_tree(heads)?;
    let l = heads.len();
    let mut adj = vec![Vec::new(); l];
    for (i, &h) in heads.iter().enumerate() {
        if h != 0 {
            adj[i].push(h - 1);
            adj[h - 1].push(i);
        }
    }
    let mut data = vec![usize::MAX; l * l];
    let mut queue = VecDeque::with_capacity(l);
    for src in 0..l {
        let row = &mut data[src * l..(src + 1) * l];
        row[src] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if row[v] == usize::MAX {
                    row[v] = row[u] + 1;
                    queue.push_back(v);
                }
            }
        }
    }
    Ok(TreeDistances { len: l, data })
}

/// `-tree_distance(i, j)`.
pub fn dependency_distance_mask(heads: &[usize]) -> Result<MaskMatrix> {
    let d = tree_distances(heads)?;
    Ok(MaskMatrix::from_fn(d.len, |i, j| -(d.get(i, j) as f64)))
}

/// `dir + alpha * dis`, or `dir` unchanged when there is no distance mask.
pub fn combine(dir: &MaskMatrix, dis: Option<&MaskMatrix>, alpha: f64) -> Result<MaskMatrix> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    let Some(dis) = dis else {
        return Ok(dir.clone());
    };
    if dis.len != dir.len {
        return Err(Error::dim("combine", &[dir.len, dir.len], &[dis.len, dis.len]));
    }
    Ok(MaskMatrix {
        len: dir.len,
        data: dir.data.iter().zip(&dis.data).map(|(d, s)| d + alpha * s).collect(),
    })
}

/// How a schedule is turned into concrete masks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaskOptions {
    pub alpha: f64,
    /// Exchange the forward and backward triangles.
    pub swap_direction: bool,
    /// When false every direction mask is all zeros (direction prior disabled).
    pub use_direction: bool,
}

impl Default for MaskOptions {
    fn default() -> Self {
        MaskOptions {
            alpha: 1.0,
            swap_direction: false,
            use_direction: true,
        }
    }
}

/// Builds per-head masks for sentences, memoizing the masks that depend only on length.
///
/// Not shared across threads; give each thread its own builder.
#[derive(Debug, Default)]
pub struct MaskBuilder {
    options: MaskOptions,
    cache: HashMap<(MaskKey, usize), Arc<MaskMatrix>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum MaskKey {
    Forward,
    Backward,
    Word,
    Zero,
}

impl MaskBuilder {
    pub fn new(options: MaskOptions) -> Self {
        MaskBuilder {
            options,
            cache: HashMap::new(),
        }
    }

    pub fn options(&self) -> &MaskOptions {
        &self.options
    }

    fn cached(&mut self, key: MaskKey, l: usize) -> Result<Arc<MaskMatrix>> {
        if let Some(m) = self.cache.get(&(key, l)) {
            return Ok(m.clone());
        }
        let m = Arc::new(match key {
            MaskKey::Forward => forward_mask(l)?,
            MaskKey::Backward => backward_mask(l)?,
            MaskKey::Word => word_distance_mask(l)?,
            MaskKey::Zero => {
                check_len(l)?;
                MaskMatrix::zeros(l)
            }
        });
        self.cache.insert((key, l), m.clone());
        Ok(m)
    }

    /// One combined mask per head for a sentence of length `l`.
    pub fn masks_for_sentence(
        &mut self,
        schedule: &MaskSchedule,
        l: usize,
        heads: Option<&[usize]>,
    ) -> Result<Vec<MaskMatrix>> {
        check_len(l)?;
        let dep = if schedule.needs_tree() {
            let heads = heads.ok_or(Error::MissingTree)?;
            if heads.len() != l {
                return Err(Error::dim("masks_for_sentence", &[l], &[heads.len()]));
            }
            Some(dependency_distance_mask(heads)?)
        } else {
            None
        };
        let opts = self.options;
        schedule
            .heads()
            .iter()
            .map(|spec| {
                let dir_key = match (opts.use_direction, spec.direction, opts.swap_direction) {
                    (false, _, _) => MaskKey::Zero,
                    (true, Direction::Forward, false) | (true, Direction::Backward, true) => MaskKey::Forward,
                    (true, Direction::Backward, false) | (true, Direction::Forward, true) => MaskKey::Backward,
                };
                let dir = self.cached(dir_key, l)?;
                match spec.distance {
                    DistanceKind::None => Ok((*dir).clone()),
                    DistanceKind::Word => {
                        let w = self.cached(MaskKey::Word, l)?;
                        combine(&dir, Some(&w), opts.alpha)
                    }
                    DistanceKind::Dependency => combine(&dir, dep.as_ref(), opts.alpha),
                }
            })
            .collect()
    }
}

/// Uncached convenience wrapper around [`MaskBuilder::masks_for_sentence`].
pub fn masks_for_sentence(
    schedule: &MaskSchedule,
    l: usize,
    heads: Option<&[usize]>,
    options: MaskOptions,
) -> Result<Vec<MaskMatrix>> {
    MaskBuilder::new(options).masks_for_sentence(schedule, l, heads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use proptest::prelude::*;

    const S: f64 = SENTINEL;
    // Two kids at a ballgame wash their hands
    const TWO_KIDS_HEADS: [usize; 8] = [2, 6, 5, 5, 2, 0, 8, 6];

    fn rows(m: &MaskMatrix) -> Vec<Vec<f64>> {
        (0..m.len())
            .map(|i| (0..m.len()).map(|j| m.get(i, j)).collect())
            .collect()
    }

    fn floyd_warshall(heads: &[usize]) -> Vec<Vec<usize>> {
        let l = heads.len();
        let inf = usize::MAX / 4;
        let mut d = vec![vec![inf; l]; l];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0;
        }
        for (i, &h) in heads.iter().enumerate() {
            if h != 0 {
                d[i][h - 1] = 1;
                d[h - 1][i] = 1;
            }
        }
        for k in 0..l {
            for i in 0..l {
                for j in 0..l {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        d
    }

    #[test]
    fn direction_masks_small() {
        assert_eq!(rows(&forward_mask(1).unwrap()), vec![vec![0.0]]);
        assert_eq!(rows(&backward_mask(1).unwrap()), vec![vec![0.0]]);
        assert_eq!(
            rows(&forward_mask(3).unwrap()),
            vec![vec![0.0, 0.0, 0.0], vec![S, 0.0, 0.0], vec![S, S, 0.0]]
        );
        assert_eq!(
            rows(&backward_mask(3).unwrap()),
            vec![vec![0.0, S, S], vec![0.0, 0.0, S], vec![0.0, 0.0, 0.0]]
        );
        let f2 = forward_mask(2).unwrap();
        assert!(!f2.is_masked(0, 1) && f2.is_masked(1, 0));
    }

    #[test]
    fn zero_length_rejected() {
        assert!(matches!(forward_mask(0), Err(Error::Empty(_))));
        assert!(matches!(backward_mask(0), Err(Error::Empty(_))));
        assert!(matches!(word_distance_mask(0), Err(Error::Empty(_))));
    }

    #[test]
    fn word_distance_small() {
        assert_eq!(
            rows(&word_distance_mask(3).unwrap()),
            vec![vec![0.0, -1.0, -2.0], vec![-1.0, 0.0, -1.0], vec![-2.0, -1.0, 0.0]]
        );
        assert_eq!(rows(&word_distance_mask(1).unwrap()), vec![vec![0.0]]);
        let m = word_distance_mask(9).unwrap();
        assert_eq!(m.data().iter().fold(0.0f64, |a, x| a.max(x.abs())), 8.0);
    }

    #[test]
    fn forward_plus_backward_finite_only_on_diagonal() {
        for l in 1..=16 {
            let f = forward_mask(l).unwrap();
            let b = backward_mask(l).unwrap();
            for i in 0..l {
                for j in 0..l {
                    let finite = !f.is_masked(i, j) && !b.is_masked(i, j);
                    assert_eq!(finite, i == j);
                }
            }
        }
    }

    #[test]
    fn chain_tree() {
        let d = tree_distances(&[0, 1, 2]).unwrap();
        assert_eq!(d.get(0, 2), 2);
        assert_eq!(
            rows(&dependency_distance_mask(&[0, 1, 2]).unwrap()),
            rows(&word_distance_mask(3).unwrap())
        );
    }

    #[test]
    fn two_kids_sentence_distances() {
        let d = tree_distances(&TWO_KIDS_HEADS).unwrap();
        let (kids, wash) = (1, 5);
        assert_eq!(d.get(wash, kids), 1);
        assert_eq!(wash - kids, 4);
        assert_eq!(d.row(wash).iter().filter(|&&x| x == 2).count(), 3);
        let oracle = floyd_warshall(&TWO_KIDS_HEADS);
        for (i, row) in oracle.iter().enumerate() {
            assert_eq!(d.row(i), row.as_slice());
        }
        let m = dependency_distance_mask(&TWO_KIDS_HEADS).unwrap();
        for (i, row) in oracle.iter().enumerate() {
            for (j, &d) in row.iter().enumerate() {
                assert_eq!(m.get(i, j), -(d as f64));
            }
        }
    }

    #[test]
    fn star_tree() {
        let heads = [0, 1, 1, 1, 1];
        let m = dependency_distance_mask(&heads).unwrap();
        for i in 1..5 {
            assert_eq!(m.get(0, i), -1.0);
            for j in 1..5 {
                if i != j {
                    assert_eq!(m.get(i, j), -2.0);
                }
            }
        }
    }

    #[test]
    fn malformed_trees() {
        let token_of = |r: Result<TreeDistances>| match r {
            Err(Error::MalformedTree { token, .. }) => token,
            other => panic!("expected malformed tree, got {other:?}"),
        };
        assert_eq!(token_of(tree_distances(&[2, 1])), 1);
        assert_eq!(token_of(tree_distances(&[0, 0])), 2);
        assert_eq!(token_of(tree_distances(&[0, 5])), 2);
        assert_eq!(token_of(tree_distances(&[0, 2])), 2);
        assert_eq!(token_of(tree_distances(&[0, 3, 2])), 2);
    }

    #[test]
    fn combine_examples() {
        let f = forward_mask(3).unwrap();
        let w = word_distance_mask(3).unwrap();
        assert_eq!(combine(&f, Some(&w), 0.0).unwrap(), f);
        assert_eq!(combine(&f, None, 3.0).unwrap(), f);
        let c = combine(&f, Some(&w), 1.0).unwrap();
        assert_eq!(
            rows(&c),
            vec![
                vec![0.0, -1.0, -2.0],
                vec![S - 1.0, 0.0, -1.0],
                vec![S - 2.0, S - 1.0, 0.0]
            ]
        );
        assert!(c.is_masked(1, 0) && c.is_masked(2, 0));
        let sm = c.to_tensor().softmax_rows().unwrap();
        assert_eq!(sm.get(1, 0), 0.0);
        assert_eq!(sm.get(2, 1), 0.0);
        assert!(combine(&f, Some(&word_distance_mask(4).unwrap()), 1.0).is_err());
        assert!(combine(&f, Some(&w), -1.0).is_err());
    }

    #[test]
    fn schedules() {
        use Direction::*;
        use DistanceKind::*;
        let pairs = |s: &MaskSchedule| -> Vec<(Direction, DistanceKind)> {
            s.heads().iter().map(|h| (h.direction, h.distance)).collect()
        };
        let s = build_schedule(6, &[Word, Dependency, None]).unwrap();
        assert_eq!(
            pairs(&s),
            vec![
                (Forward, Word),
                (Forward, Dependency),
                (Forward, None),
                (Backward, Word),
                (Backward, Dependency),
                (Backward, None)
            ]
        );
        assert_eq!(
            pairs(&build_schedule(2, &[None]).unwrap()),
            vec![(Forward, None), (Backward, None)]
        );
        assert_eq!(
            pairs(&build_schedule(4, &[Word, Dependency]).unwrap()),
            vec![
                (Forward, Word),
                (Forward, Dependency),
                (Backward, Word),
                (Backward, Dependency)
            ]
        );
        assert!(matches!(build_schedule(3, &[None]), Err(Error::Config(_))));
        assert!(build_schedule(4, &[None]).is_err());
        let sep = MaskSchedule::single_direction(Backward, 6, &[Word, Dependency, None]).unwrap();
        assert!(sep.heads().iter().all(|h| h.direction == Backward));
        assert_eq!(sep.heads()[3].distance, Word);
    }

    #[test]
    fn masks_for_sentence_examples() {
        let s = build_schedule(2, &[DistanceKind::None]).unwrap();
        let m = masks_for_sentence(&s, 2, None, MaskOptions::default()).unwrap();
        assert_eq!(m, vec![forward_mask(2).unwrap(), backward_mask(2).unwrap()]);

        let full = build_schedule(6, &[DistanceKind::Word, DistanceKind::Dependency, DistanceKind::None]).unwrap();
        assert!(matches!(
            masks_for_sentence(&full, 8, None, MaskOptions::default()),
            Err(Error::MissingTree)
        ));
        let m = masks_for_sentence(&full, 8, Some(&TWO_KIDS_HEADS), MaskOptions::default()).unwrap();
        let f = forward_mask(8).unwrap();
        let b = backward_mask(8).unwrap();
        let w = word_distance_mask(8).unwrap();
        let d = dependency_distance_mask(&TWO_KIDS_HEADS).unwrap();
        let expected = vec![
            combine(&f, Some(&w), 1.0).unwrap(),
            combine(&f, Some(&d), 1.0).unwrap(),
            f.clone(),
            combine(&b, Some(&w), 1.0).unwrap(),
            combine(&b, Some(&d), 1.0).unwrap(),
            b.clone(),
        ];
        assert_eq!(m, expected);

        let zero_alpha = MaskOptions {
            alpha: 0.0,
            ..MaskOptions::default()
        };
        let m = masks_for_sentence(&full, 8, Some(&TWO_KIDS_HEADS), zero_alpha).unwrap();
        assert_eq!(
            m,
            vec![f.clone(), f.clone(), f.clone(), b.clone(), b.clone(), b.clone()]
        );

        let swapped = MaskOptions {
            swap_direction: true,
            ..MaskOptions::default()
        };
        let m = masks_for_sentence(&s, 3, None, swapped).unwrap();
        assert_eq!(m, vec![backward_mask(3).unwrap(), forward_mask(3).unwrap()]);

        let no_dir = MaskOptions {
            use_direction: false,
            ..MaskOptions::default()
        };
        let m = masks_for_sentence(&s, 3, None, no_dir).unwrap();
        assert_eq!(m, vec![MaskMatrix::zeros(3), MaskMatrix::zeros(3)]);
    }

    #[test]
    fn padding_masks_extra_keys() {
        let m = combine(&forward_mask(3).unwrap(), Some(&word_distance_mask(3).unwrap()), 1.0).unwrap();
        let p = m.pad_to(5).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                if i < 3 && j < 3 {
                    assert_eq!(p.get(i, j), m.get(i, j));
                } else if i >= 3 && i == j {
                    assert_eq!(p.get(i, j), 0.0);
                } else {
                    assert!(p.is_masked(i, j));
                }
            }
        }
        assert!(p.to_tensor().softmax_rows().is_ok());
        assert!(m.pad_to(2).is_err());
    }

    fn random_heads() -> impl Strategy<Value = Vec<usize>> {
        (1usize..=20)
            .prop_flat_map(|l| {
                (
                    Just(l),
                    prop::collection::vec(any::<prop::sample::Index>(), l),
                    any::<prop::sample::Index>(),
                )
            })
            .prop_map(|(l, picks, perm_seed)| {
                // random recursive tree on nodes 0..l, then a random relabeling
                let mut parent = vec![usize::MAX; l];
                for v in 1..l {
                    parent[v] = picks[v].index(v);
                }
                let mut order: Vec<usize> = (0..l).collect();
                let rot = perm_seed.index(l);
                order.rotate_left(rot);
                order.reverse();
                let mut heads = vec![0; l];
                for v in 0..l {
                    if parent[v] != usize::MAX {
                        heads[order[v]] = order[parent[v]] + 1;
                    }
                }
                heads
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn tree_distances_match_all_pairs_oracle(heads in random_heads()) {
            let d = tree_distances(&heads).unwrap();
            let oracle = floyd_warshall(&heads);
            let l = heads.len();
            for i in 0..l {
                prop_assert_eq!(d.row(i), oracle[i].as_slice());
                for j in 0..l {
                    prop_assert_eq!(d.get(i, j), d.get(j, i));
                    prop_assert!(d.get(i, j) < l.max(1));
                    for k in 0..l {
                        prop_assert!(d.get(i, j) <= d.get(i, k) + d.get(k, j));
                    }
                }
                if heads[i] != 0 {
                    prop_assert_eq!(d.get(i, heads[i] - 1), 1);
                }
            }
        }

        #[test]
        fn forward_mask_rows_ignore_earlier_keys(l in 1usize..12, alpha in 0.0f64..5.0, word in any::<bool>()) {
            let f = forward_mask(l).unwrap();
            let dis = if word { word_distance_mask(l).unwrap() } else { dependency_distance_mask(&(0..l).collect::<Vec<_>>()).unwrap() };
            let m = combine(&f, Some(&dis), alpha).unwrap();
            let logits = Tensor::full(l, l, 0.3).add(&m.to_tensor()).unwrap();
            let w = logits.softmax_rows().unwrap();
            for i in 0..l {
                for j in 0..i {
                    prop_assert_eq!(w.get(i, j), 0.0);
                }
            }
        }
    }
}
