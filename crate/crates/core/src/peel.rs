//! k-core extraction: linear-time peeling, the continuous-time balls-and-bins
//! process that peels a configuration while generating it, and the location
//! of the k-core's emergence in the random edge process.

use crate::degree::DegreeSequence;
use crate::error::{domain, Error, Result};
use crate::graph::{EdgeProcess, Multigraph};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreResult {
    pub v_core: usize,
    pub e_core: usize,
    /// Number of core vertices of each core degree, indexed by degree.
    pub degree_hist: Vec<usize>,
}

impl CoreResult {
    pub fn is_empty(&self) -> bool {
        self.v_core == 0
    }
}

/// k-core of `g` (loops count 2 toward degree).
pub fn peel_core(g: &Multigraph, k: usize) -> CoreResult {
    peel_edges(g.n, &g.edges, k).0
}

/// k-core and its vertex mask.
pub fn peel_core_with_mask(g: &Multigraph, k: usize) -> (CoreResult, Vec<bool>) {
    peel_edges(g.n, &g.edges, k)
}

/// The subgraph induced by `mask`, with vertex labels kept.
pub fn induced(g: &Multigraph, mask: &[bool]) -> Multigraph {
    let edges = g.edges.iter().copied().filter(|&(u, v)| mask[u] && mask[v]).collect();
    Multigraph::new(g.n, edges).expect("subgraph of a valid graph")
}

/// Peeling on a bare edge list. Vertices below k are queued in ascending
/// index order, then in discovery order.
pub fn peel_edges(n: usize, edges: &[(usize, usize)], k: usize) -> (CoreResult, Vec<bool>) {
    let mut deg = vec![0usize; n];
    for &(u, v) in edges {
        deg[u] += 1;
        deg[v] += 1;
    }
    // CSR adjacency; a loop appears twice in its vertex's list.
    let mut start = vec![0usize; n + 1];
    for v in 0..n {
        start[v + 1] = start[v] + deg[v];
    }
    let mut fill = start.clone();
    let mut adj = vec![0usize; start[n]];
    for &(u, v) in edges {
        adj[fill[u]] = v;
        fill[u] += 1;
        adj[fill[v]] = u;
        fill[v] += 1;
    }
    let mut alive = vec![true; n];
    let mut queued = vec![false; n];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for v in 0..n {
        if deg[v] < k {
            queued[v] = true;
            queue.push_back(v);
        }
    }
    while let Some(v) = queue.pop_front() {
        alive[v] = false;
        for &u in &adj[start[v]..start[v + 1]] {
            if u != v && alive[u] {
                deg[u] -= 1;
                if deg[u] < k && !queued[u] {
                    queued[u] = true;
                    queue.push_back(u);
                }
            }
        }
    }
    let mut core_deg = vec![0usize; n];
    let mut e_core = 0;
    for &(u, v) in edges {
        if alive[u] && alive[v] {
            e_core += 1;
            core_deg[u] += 1;
            core_deg[v] += 1;
        }
    }
    let maxd = (0..n).filter(|&v| alive[v]).map(|v| core_deg[v]).max().unwrap_or(0);
    let mut hist = vec![0usize; if maxd > 0 { maxd + 1 } else { 0 }];
    let mut v_core = 0;
    for v in 0..n {
        if alive[v] {
            v_core += 1;
            hist[core_deg[v]] += 1;
        }
    }
    (CoreResult { v_core, e_core, degree_hist: hist }, alive)
}

/// Sampled path of the balls-and-bins process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub grid: Vec<f64>,
    /// Light white balls; −1 once stopped.
    pub l: Vec<i64>,
    /// White balls in heavy bins.
    pub h: Vec<i64>,
    /// Heavy bins.
    pub b: Vec<i64>,
    pub tau: f64,
    pub final_core: CoreResult,
}

const WHITE: u8 = 0;
const RED: u8 = 1;
const DEAD: u8 = 2;

/// Runs the balls-and-bins process on the configuration model of `seq`.
///
/// One uniform light ball is colored red at time 0. Afterwards each alive
/// ball (red ones included) dies at rate 1. When a white ball dies it is
/// paired with the current red ball into a removed edge, and a uniform light
/// white ball becomes the new red one; if none exists the process stops at τ
/// and the remaining (heavy) white balls are matched uniformly.
///
/// Returns the trajectory sampled on the sorted `grid`, and the multigraph
/// the process realized if `realize` is set.
pub fn peel_process<R: Rng + ?Sized>(
    seq: &DegreeSequence,
    k: usize,
    grid: &[f64],
    realize: bool,
    rng: &mut R,
) -> Result<(Trajectory, Option<Multigraph>)> {
    if k < 1 {
        return domain("k must be >= 1");
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|t| !(*t >= 0.0)) {
        return domain("grid must be nonnegative and strictly increasing");
    }
    let n = seq.n();
    let degs = seq.degrees();
    let total = seq.two_m();
    let mut owner = Vec::with_capacity(total);
    let mut first = vec![0usize; n + 1];
    for (v, &d) in degs.iter().enumerate() {
        first[v + 1] = first[v] + d;
        owner.extend(std::iter::repeat_n(v as u32, d));
    }
    let mut white = degs.to_vec();
    let mut state = vec![WHITE; total];

    let mut alive: Vec<u32> = (0..total as u32).collect();
    const NONE: u32 = u32::MAX;
    let mut light: Vec<u32> = Vec::new();
    let mut light_pos = vec![NONE; total];
    let mut hh: i64 = 0;
    let mut bb: i64 = 0;
    for v in 0..n {
        if white[v] >= k {
            bb += 1;
            hh += white[v] as i64;
        } else {
            for ball in first[v]..first[v + 1] {
                light_pos[ball] = light.len() as u32;
                light.push(ball as u32);
            }
        }
    }

    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut samples: Vec<(i64, i64, i64)> = Vec::with_capacity(grid.len());
    let mut gi = 0;
    let mut t = 0.0f64;

    macro_rules! take_light {
        ($ball:expr) => {{
            let b = $ball as usize;
            let p = light_pos[b] as usize;
            let last = *light.last().unwrap();
            light[p] = last;
            light_pos[last as usize] = p as u32;
            light.pop();
            light_pos[b] = NONE;
        }};
    }

    let mut red: Option<usize> = None;
    let mut stopped = light.is_empty();
    if !stopped {
        let r = light[rng.random_range(0..light.len())] as usize;
        take_light!(r);
        state[r] = RED;
        white[owner[r] as usize] -= 1;
        red = Some(r);
    }

    while !stopped {
        let a = alive.len();
        let dt = -(1.0 - rng.random::<f64>()).ln() / a as f64;
        let t_next = t + dt;
        while gi < grid.len() && grid[gi] < t_next {
            samples.push((light.len() as i64, hh, bb));
            gi += 1;
        }
        t = t_next;
        let idx = rng.random_range(0..a);
        let ball = alive[idx] as usize;
        let last = *alive.last().unwrap();
        alive[idx] = last;
        alive.pop();
        if state[ball] == RED {
            state[ball] = DEAD;
            continue;
        }
        state[ball] = DEAD;
        let v = owner[ball] as usize;
        let before = white[v];
        white[v] -= 1;
        if before >= k {
            hh -= 1;
            if before == k {
                // The bin turns light and so do its remaining white balls.
                bb -= 1;
                hh -= (k - 1) as i64;
                for other in first[v]..first[v + 1] {
                    if state[other] == WHITE {
                        light_pos[other] = light.len() as u32;
                        light.push(other as u32);
                    }
                }
            }
        } else {
            take_light!(ball);
        }
        edges.push((owner[red.unwrap()] as usize, v));
        if light.is_empty() {
            stopped = true;
        } else {
            let r = light[rng.random_range(0..light.len())] as usize;
            take_light!(r);
            state[r] = RED;
            white[owner[r] as usize] -= 1;
            red = Some(r);
        }
    }
    let tau = t;
    while gi < grid.len() {
        samples.push((-1, hh, bb));
        gi += 1;
    }

    // Heavy bins at τ carry the k-core.
    let mut hist: Vec<usize> = Vec::new();
    for v in 0..n {
        if white[v] >= k {
            if hist.len() <= white[v] {
                hist.resize(white[v] + 1, 0);
            }
            hist[white[v]] += 1;
        }
    }
    let final_core = CoreResult { v_core: bb as usize, e_core: (hh / 2) as usize, degree_hist: hist };
    let graph = if realize {
        let mut rest: Vec<usize> = (0..total).filter(|&b| state[b] == WHITE).map(|b| owner[b] as usize).collect();
        rest.shuffle(rng);
        edges.extend(rest.chunks_exact(2).map(|c| (c[0], c[1])));
        Some(Multigraph::new(n, edges)?)
    } else {
        None
    };
    let trajectory = Trajectory {
        grid: grid.to_vec(),
        l: samples.iter().map(|s| s.0).collect(),
        h: samples.iter().map(|s| s.1).collect(),
        b: samples.iter().map(|s| s.2).collect(),
        tau,
        final_core,
    };
    Ok((trajectory, graph))
}

/// Smallest m such that the first m edges of `proc_` have a nonempty k-core.
/// Gallops to an upper bracket, then bisects; valid because the k-core only
/// grows as edges are added.
pub fn emergence_edge_count(proc_: &mut EdgeProcess, k: usize) -> Result<usize> {
    if k < 3 {
        return domain(format!("emergence search needs k >= 3, got {k}"));
    }
    let n = proc_.n();
    let total = proc_.total() as usize;
    let nonempty = |p: &mut EdgeProcess, m: usize| -> Result<bool> {
        Ok(!peel_edges(n, p.prefix_edges(m)?, k).0.is_empty())
    };
    // K_n has minimum degree n − 1, so the search terminates iff n > k.
    if n <= k {
        return Err(Error::Search(format!("no nonempty {k}-core even in the complete graph on {n} vertices")));
    }
    let mut lo = 0usize; // known empty
    let mut hi = n.min(total).max(1);
    while !nonempty(proc_, hi)? {
        lo = hi;
        hi = (hi * 2).min(total);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if nonempty(proc_, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
