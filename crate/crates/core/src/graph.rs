//! Random multigraphs and graphs: configuration model, rejection to simple
//! graphs, G(n,p), G(n,m), and the random edge process.

use crate::degree::DegreeSequence;
use crate::error::{domain, Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{HashMap, HashSet};

/// Vertex count plus an edge list; loops and repeated pairs allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Multigraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub loop_count: usize,
    /// Σ over non-loop vertex pairs of C(multiplicity, 2).
    pub multi_pair_count: usize,
}

impl Multigraph {
    /// Builds the graph and tallies loops and parallel pairs.
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(u, v)) = edges.iter().find(|(u, v)| *u >= n || *v >= n) {
            return domain(format!("edge ({u}, {v}) out of range for n = {n}"));
        }
        let loop_count = edges.iter().filter(|(u, v)| u == v).count();
        let mut keys: Vec<(usize, usize)> =
            edges.iter().filter(|(u, v)| u != v).map(|&(u, v)| (u.min(v), u.max(v))).collect();
        keys.sort_unstable();
        let mut multi_pair_count = 0;
        let mut i = 0;
        while i < keys.len() {
            let mut j = i + 1;
            while j < keys.len() && keys[j] == keys[i] {
                j += 1;
            }
            let c = j - i;
            multi_pair_count += c * (c - 1) / 2;
            i = j;
        }
        Ok(Self { n, edges, loop_count, multi_pair_count })
    }

    /// For edge lists known to be simple.
    pub(crate) fn simple_unchecked(n: usize, edges: Vec<(usize, usize)>) -> Self {
        Self { n, edges, loop_count: 0, multi_pair_count: 0 }
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn is_simple(&self) -> bool {
        self.loop_count + self.multi_pair_count == 0
    }

    /// Degrees with loops counted twice.
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(u, v) in &self.edges {
            d[u] += 1;
            d[v] += 1;
        }
        d
    }
}

/// Number of vertex pairs C(n, 2).
pub fn pair_count(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

/// Pair with triangular index t: (u, v), u < v, t = v(v−1)/2 + u.
pub fn decode_pair(t: u64) -> (usize, usize) {
    let mut v = ((1.0 + (1.0 + 8.0 * t as f64).sqrt()) / 2.0) as u64;
    while v * (v - 1) / 2 > t {
        v -= 1;
    }
    while (v + 1) * v / 2 <= t {
        v += 1;
    }
    let u = t - v * (v - 1) / 2;
    (u as usize, v as usize)
}

/// Uniform random configuration: shuffle the half-edges and pair neighbours.
pub fn config_model<R: Rng + ?Sized>(seq: &DegreeSequence, rng: &mut R) -> Result<Multigraph> {
    if !seq.two_m().is_multiple_of(2) {
        return domain("odd number of half-edges");
    }
    let mut half: Vec<usize> = Vec::with_capacity(seq.two_m());
    for (v, &d) in seq.degrees().iter().enumerate() {
        half.extend(std::iter::repeat_n(v, d));
    }
    half.shuffle(rng);
    let edges = half.chunks_exact(2).map(|c| (c[0], c[1])).collect();
    Multigraph::new(seq.n(), edges)
}

/// Redraws configurations until one is simple; returns it with the attempt count.
pub fn simple_graph<R: Rng + ?Sized>(
    seq: &DegreeSequence,
    rng: &mut R,
    max_tries: usize,
) -> Result<(Multigraph, usize)> {
    if max_tries == 0 {
        return domain("max_tries must be >= 1");
    }
    for attempt in 1..=max_tries {
        let g = config_model(seq, rng)?;
        if g.is_simple() {
            return Ok((g, attempt));
        }
    }
    Err(Error::RejectionFailure(max_tries))
}

pub const DEFAULT_MAX_TRIES: usize = 1000;

/// G(n, p) by geometric skipping over the pair order.
pub fn gnp<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Multigraph> {
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("p must lie in [0,1], got {p}"));
    }
    let total = pair_count(n);
    let mut edges = Vec::new();
    if p == 0.0 || total == 0 {
        return Ok(Multigraph::simple_unchecked(n, edges));
    }
    if p == 1.0 {
        edges.extend((0..total).map(decode_pair));
        return Ok(Multigraph::simple_unchecked(n, edges));
    }
    let lq = (1.0 - p).ln();
    let mut t: i64 = -1;
    loop {
        let u: f64 = rng.random();
        let skip = ((1.0 - u).ln() / lq).floor();
        if !skip.is_finite() || t as f64 + 1.0 + skip >= total as f64 {
            break;
        }
        t += 1 + skip as i64;
        edges.push(decode_pair(t as u64));
    }
    Ok(Multigraph::simple_unchecked(n, edges))
}

/// G(n, m): a uniform m-subset of the pairs, in draw order.
pub fn gnm<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Multigraph> {
    let total = pair_count(n);
    if m as u64 > total {
        return domain(format!("m = {m} exceeds C(n,2) = {total}"));
    }
    if (m as u64) * 2 <= total {
        let mut seen: HashSet<u64> = HashSet::with_capacity(m * 2);
        let mut edges = Vec::with_capacity(m);
        while edges.len() < m {
            let t = rng.random_range(0..total);
            if seen.insert(t) {
                edges.push(decode_pair(t));
            }
        }
        Ok(Multigraph::simple_unchecked(n, edges))
    } else {
        // Dense case: shuffle all pairs and keep a prefix.
        let mut all: Vec<u64> = (0..total).collect();
        let (chosen, _) = all.partial_shuffle(rng, m);
        Ok(Multigraph::simple_unchecked(n, chosen.iter().map(|&t| decode_pair(t)).collect()))
    }
}

/// A uniformly random ordering of all C(n,2) pairs, generated lazily by a
/// sparse Fisher–Yates shuffle. Prefixes are reproducible from the seed.
#[derive(Debug, Clone)]
pub struct EdgeProcess {
    n: usize,
    total: u64,
    seed: u64,
    rng: ChaCha8Rng,
    displaced: HashMap<u64, u64>,
    order: Vec<(usize, usize)>,
}

impl EdgeProcess {
    pub fn new(n: usize, seed: u64) -> Result<Self> {
        Self::with_rng(n, seed, ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uses a caller-provided generator (e.g. a per-replicate stream).
    pub fn with_rng(n: usize, seed: u64, rng: ChaCha8Rng) -> Result<Self> {
        if n < 2 {
            return domain(format!("edge process needs n >= 2, got {n}"));
        }
        Ok(Self { n, total: pair_count(n), seed, rng, displaced: HashMap::new(), order: Vec::new() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    fn extend_to(&mut self, m: usize) {
        while self.order.len() < m {
            let i = self.order.len() as u64;
            let j = self.rng.random_range(i..self.total);
            let vj = *self.displaced.get(&j).unwrap_or(&j);
            let vi = self.displaced.remove(&i).unwrap_or(i);
            if j != i {
                self.displaced.insert(j, vi);
            }
            self.order.push(decode_pair(vj));
        }
    }

    /// The first m edges.
    pub fn prefix_edges(&mut self, m: usize) -> Result<&[(usize, usize)]> {
        if m as u64 > self.total {
            return domain(format!("prefix length {m} exceeds C(n,2) = {}", self.total));
        }
        self.extend_to(m);
        Ok(&self.order[..m])
    }

    pub fn prefix(&mut self, m: usize) -> Result<Multigraph> {
        let n = self.n;
        Ok(Multigraph::simple_unchecked(n, self.prefix_edges(m)?.to_vec()))
    }
}
