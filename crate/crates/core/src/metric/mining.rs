//! Uniform sampling, without replacement, of positive/negative pairs and
//! triplets from an aligned corpus.
//!
//! Each eligible population is enumerated implicitly: a sample is drawn as a
//! rank in `0..population` and decoded to frames, so counts are exact and
//! nothing is materialized.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::PairLabel;
use crate::dataset::{AlignedCorpus, Partition, PlaceLabeling};
use crate::error::{Error, Result};

/// A frame of one traverse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FrameRef {
    pub traverse: usize,
    pub index: usize,
}

impl FrameRef {
    pub fn new(traverse: usize, index: usize) -> Self {
        FrameRef { traverse, index }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PairSample {
    pub anchor: FrameRef,
    pub other: FrameRef,
    pub label: PairLabel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TripletSample {
    pub neutral: FrameRef,
    pub positive: FrameRef,
    pub negative: FrameRef,
}

/// Eligibility rules shared by pairs and triplets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairRules {
    pub labeling: PlaceLabeling,
    /// Negatives must be more than this many frames apart.
    pub negative_exclusion: usize,
}

impl PairRules {
    /// Same place on different traverses.
    pub fn is_positive(&self, a: FrameRef, b: FrameRef) -> bool {
        a.traverse != b.traverse && self.labeling.same_place(a.index, b.index)
    }

    /// Different places, any traverses.
    pub fn is_negative(&self, a: FrameRef, b: FrameRef) -> bool {
        !self.labeling.same_place(a.index, b.index) && a.index.abs_diff(b.index) > self.negative_exclusion
    }
}

/// Precomputed window bounds over the sorted eligible frame indices.
#[derive(Clone, Debug)]
pub struct Miner {
    n_traverses: usize,
    indices: Vec<usize>,
    rules: PairRules,
    /// Per position: `[lo, hi)` of positions within `same_place_sep`.
    pos_window: Vec<(usize, usize)>,
    /// Per position: `[lo, hi)` of positions within the negative exclusion
    /// (or same place, whichever is wider).
    neg_window: Vec<(usize, usize)>,
    pos_prefix: Vec<u64>,
    far_prefix: Vec<u64>,
    after_prefix: Vec<u64>,
    triplet_prefix: Vec<u64>,
}

fn windows(indices: &[usize], radius: usize) -> Vec<(usize, usize)> {
    indices
        .iter()
        .map(|&i| {
            let lo = indices.partition_point(|&j| j + radius < i);
            let hi = indices.partition_point(|&j| j <= i + radius);
            (lo, hi)
        })
        .collect()
}

fn prefix(counts: impl Iterator<Item = u64>) -> Vec<u64> {
    let mut acc = 0u64;
    let mut out = vec![0];
    for c in counts {
        acc += c;
        out.push(acc);
    }
    out
}

/// Position `a` with `prefix[a] <= rank < prefix[a + 1]`, and the offset.
fn locate(prefix: &[u64], rank: u64) -> (usize, u64) {
    let a = prefix.partition_point(|&p| p <= rank) - 1;
    (a, rank - prefix[a])
}

impl Miner {
    pub fn new(n_traverses: usize, mut indices: Vec<usize>, rules: PairRules) -> Result<Self> {
        if n_traverses < 2 {
            return Err(Error::data("mining needs at least two traverses"));
        }
        indices.sort_unstable();
        indices.dedup();
        let pos_window = windows(&indices, rules.labeling.same_place_sep);
        let neg_window = windows(&indices, rules.negative_exclusion.max(rules.labeling.same_place_sep));
        let n = indices.len();
        let t = n_traverses as u64;
        let close = |a: usize| (pos_window[a].1 - pos_window[a].0) as u64;
        let far = |a: usize| (n - (neg_window[a].1 - neg_window[a].0)) as u64;
        Ok(Miner {
            n_traverses,
            pos_prefix: prefix((0..n).map(close)),
            far_prefix: prefix((0..n).map(far)),
            after_prefix: prefix((0..n).map(|a| (n - neg_window[a].1) as u64)),
            triplet_prefix: prefix((0..n).map(|a| (t - 1) * close(a) * t * far(a))),
            indices,
            rules,
            pos_window,
            neg_window,
        })
    }

    /// Miner over a corpus, optionally restricted to a partition's train frames.
    pub fn for_corpus(
        corpus: &AlignedCorpus,
        partition: Option<&Partition>,
        labeling: PlaceLabeling,
        negative_exclusion: usize,
    ) -> Result<Self> {
        let indices = match partition {
            Some(p) => {
                if p.total != corpus.len() {
                    return Err(Error::data(format!(
                        "partition covers {} frames but the corpus has {}",
                        p.total,
                        corpus.len()
                    )));
                }
                p.train_indices.clone()
            }
            None => (0..corpus.len()).collect(),
        };
        Miner::new(
            corpus.n_traverses(),
            indices,
            PairRules {
                labeling,
                negative_exclusion,
            },
        )
    }

    pub fn rules(&self) -> PairRules {
        self.rules
    }

    fn traverse_pairs(&self) -> u64 {
        let t = self.n_traverses as u64;
        t * (t - 1) / 2
    }

    /// Unordered cross-traverse same-place pairs.
    pub fn positive_population(&self) -> u64 {
        self.traverse_pairs() * self.pos_prefix.last().unwrap()
    }

    /// Unordered different-place pairs, within or across traverses.
    pub fn negative_population(&self) -> u64 {
        self.traverse_pairs() * self.far_prefix.last().unwrap()
            + self.n_traverses as u64 * self.after_prefix.last().unwrap()
    }

    /// Ordered (neutral, positive, negative) triples.
    pub fn triplet_population(&self) -> u64 {
        self.n_traverses as u64 * self.triplet_prefix.last().unwrap()
    }

    fn traverse_pair(&self, k: u64) -> (usize, usize) {
        let mut k = k as usize;
        for t in 0..self.n_traverses {
            let row = self.n_traverses - t - 1;
            if k < row {
                return (t, t + 1 + k);
            }
            k -= row;
        }
        unreachable!("traverse pair rank out of range")
    }

    /// `k`-th position outside the negative window of `a`.
    fn far_position(&self, a: usize, k: u64) -> usize {
        let (lo, hi) = self.neg_window[a];
        let k = k as usize;
        if k < lo {
            k
        } else {
            hi + (k - lo)
        }
    }

    fn decode_positive(&self, rank: u64) -> PairSample {
        let per_pair = *self.pos_prefix.last().unwrap();
        let (t, u) = self.traverse_pair(rank / per_pair);
        let (a, off) = locate(&self.pos_prefix, rank % per_pair);
        let b = self.pos_window[a].0 + off as usize;
        PairSample {
            anchor: FrameRef::new(t, self.indices[a]),
            other: FrameRef::new(u, self.indices[b]),
            label: PairLabel::Positive,
        }
    }

    fn decode_negative(&self, rank: u64) -> PairSample {
        let per_pair = *self.far_prefix.last().unwrap();
        let cross = self.traverse_pairs() * per_pair;
        let (anchor, other) = if rank < cross {
            let (t, u) = self.traverse_pair(rank / per_pair);
            let (a, off) = locate(&self.far_prefix, rank % per_pair);
            (FrameRef::new(t, self.indices[a]), FrameRef::new(u, self.indices[self.far_position(a, off)]))
        } else {
            let rank = rank - cross;
            let per_traverse = *self.after_prefix.last().unwrap();
            let t = (rank / per_traverse) as usize;
            let (a, off) = locate(&self.after_prefix, rank % per_traverse);
            let b = self.neg_window[a].1 + off as usize;
            (FrameRef::new(t, self.indices[a]), FrameRef::new(t, self.indices[b]))
        };
        PairSample {
            anchor,
            other,
            label: PairLabel::Negative,
        }
    }

    fn decode_triplet(&self, rank: u64) -> TripletSample {
        let t = self.n_traverses as u64;
        let per_traverse = *self.triplet_prefix.last().unwrap();
        let nt = (rank / per_traverse) as usize;
        let (a, rem) = locate(&self.triplet_prefix, rank % per_traverse);
        let far = (self.indices.len() - (self.neg_window[a].1 - self.neg_window[a].0)) as u64;
        let close = (self.pos_window[a].1 - self.pos_window[a].0) as u64;
        let (pos_rank, neg_rank) = (rem / (t * far), rem % (t * far));
        let pu = (pos_rank / close) as usize;
        let pu = if pu < nt { pu } else { pu + 1 };
        let pb = self.pos_window[a].0 + (pos_rank % close) as usize;
        let nv = (neg_rank / far) as usize;
        let nc = self.far_position(a, neg_rank % far);
        TripletSample {
            neutral: FrameRef::new(nt, self.indices[a]),
            positive: FrameRef::new(pu, self.indices[pb]),
            negative: FrameRef::new(nv, self.indices[nc]),
        }
    }

    fn sample_ranks(population: u64, n: usize, seed: u64, stream: u64, what: &str) -> Result<Vec<u64>> {
        if n as u64 > population {
            return Err(Error::data(format!(
                "requested {n} {what} but only {population} are eligible"
            )));
        }
        let population = usize::try_from(population).map_err(|_| Error::data("population exceeds address space"))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Ok(rand::seq::index::sample(&mut rng, population, n)
            .into_iter()
            .map(|r| r as u64)
            .collect())
    }

    /// `n_pos` positives followed by `n_neg` negatives.
    pub fn mine_pairs(&self, n_pos: usize, n_neg: usize, seed: u64) -> Result<Vec<PairSample>> {
        let pos = Self::sample_ranks(self.positive_population(), n_pos, seed, 1, "positive pairs")?;
        let neg = Self::sample_ranks(self.negative_population(), n_neg, seed, 2, "negative pairs")?;
        Ok(pos
            .into_iter()
            .map(|r| self.decode_positive(r))
            .chain(neg.into_iter().map(|r| self.decode_negative(r)))
            .collect())
    }

    pub fn mine_triplets(&self, n: usize, seed: u64) -> Result<Vec<TripletSample>> {
        let ranks = Self::sample_ranks(self.triplet_population(), n, seed, 3, "triplets")?;
        Ok(ranks.into_iter().map(|r| self.decode_triplet(r)).collect())
    }
}
