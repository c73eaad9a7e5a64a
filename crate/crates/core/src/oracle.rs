// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


//! Slow, independent ground truth.
//!
//! Nothing here reads the engine's aggregates or its community cache: the
//! flattened graph is rebuilt from level-0 adjacency and raw reference
//! chains, and every quantity is summed from scratch.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{HierGraph, NodeId, NodeKind};
use crate::leiden::Engine;
use crate::weight::Weight;

/// A plain directed graph over dense indices with a community label per
/// node.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatGraph<W = i64> {
    labels: Vec<u64>,
    out: Vec<Vec<(usize, W)>>,
    membership: Vec<usize>,
}

impl<W: Weight> FlatGraph<W> {
    /// Builds a graph from labelled edges; nodes are numbered by first
    /// appearance and start in singleton communities. Repeated pairs are
    /// summed and pairs summing to zero are dropped.
    pub fn from_edges(edges: &[(u64, u64, W)]) -> Self {
        let mut index: HashMap<u64, usize> = HashMap::new();
        let mut labels = Vec::new();
        let mut id = |l: u64, labels: &mut Vec<u64>| {
            *index.entry(l).or_insert_with(|| {
                labels.push(l);
                labels.len() - 1
            })
        };
        let mut raw = Vec::with_capacity(edges.len());
        for &(a, b, w) in edges {
            let (i, j) = (id(a, &mut labels), id(b, &mut labels));
            raw.push((i, j, w));
        }
        let n = labels.len();
        let mut out = vec![Vec::new(); n];
        for (i, j, w) in raw {
            out[i].push((j, w));
        }
        for list in &mut out {
            list.sort_by_key(|&(j, _)| j);
            let mut merged: Vec<(usize, W)> = Vec::with_capacity(list.len());
            for &(j, w) in list.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += w,
                    _ => merged.push((j, w)),
                }
            }
            merged.retain(|e| !e.1.is_zero());
            *list = merged;
        }
        FlatGraph { labels, out, membership: (0..n).collect() }
    }

    /// Flattens an engine state: level-0 edges plus the community reached
    /// by walking each ground node's references.
    pub fn from_engine(engine: &Engine<W>) -> Self {
        Self::from_hier(engine.graph())
    }

    pub fn from_hier(g: &HierGraph<W>) -> Self {
        let ground = g.ground_nodes();
        let index: HashMap<NodeId, usize> = ground.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let labels = ground.iter().map(|&v| g.label(v).expect("ground label")).collect();
        let out = ground
            .iter()
            .map(|&v| {
                let mut list: Vec<(usize, W)> = g
                    .adjacency(v)
                    .iter()
                    .filter(|e| !e.out_w.is_zero())
                    .map(|e| (index[&e.neighbor], e.out_w))
                    .collect();
                list.sort_by_key(|&(j, _)| j);
                list
            })
            .collect();
        let tops: Vec<NodeId> = ground.iter().map(|&v| walk_to_community(g, v).expect("broken chain")).collect();
        FlatGraph { labels, out, membership: dense(&tops) }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn membership(&self) -> &[usize] {
        &self.membership
    }

    /// Replaces the community labels; they are renumbered densely.
    pub fn with_membership(mut self, membership: &[usize]) -> Self {
        assert_eq!(membership.len(), self.len(), "membership length");
        self.membership = dense(membership);
        self
    }

    pub fn num_communities(&self) -> usize {
        self.membership.iter().max().map_or(0, |&c| c + 1)
    }

    /// Out-edges `(i, j, w)` in index order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, W)> + '_ {
        self.out.iter().enumerate().flat_map(|(i, l)| l.iter().map(move |&(j, w)| (i, j, w)))
    }

    pub fn weight(&self, i: usize, j: usize) -> W {
        self.out[i].binary_search_by_key(&j, |e| e.0).map_or(W::ZERO, |k| self.out[i][k].1)
    }
}

fn dense<K: Copy + Eq + std::hash::Hash>(keys: &[K]) -> Vec<usize> {
    let mut ids: HashMap<K, usize> = HashMap::new();
    keys.iter()
        .map(|&k| {
            let next = ids.len();
            *ids.entry(k).or_insert(next)
        })
        .collect()
}

/// Follows raw parent/community references without the cache.
pub fn walk_to_community<W: Weight>(g: &HierGraph<W>, v: NodeId) -> Option<NodeId> {
    let mut x = v;
    for _ in 0..=g.max_level() as usize + 1 {
        match (g.parent(x), g.community_ref(x)) {
            (Some(p), _) => x = p,
            (None, Some(c)) => return Some(c),
            (None, None) => return None,
        }
    }
    None
}

/// Exact `(m, W, K)` of a flat partition.
pub fn oracle_aggregates<W: Weight>(g: &FlatGraph<W>) -> (W::Wide, W::Wide, W::Wide) {
    let k = g.num_communities();
    let zero = W::Wide::default();
    let mut m = zero;
    let mut intra = zero;
    let mut k_in = vec![zero; k];
    let mut k_out = vec![zero; k];
    for (i, j, w) in g.edges() {
        let (ci, cj) = (g.membership[i], g.membership[j]);
        let w = w.widen();
        m += w;
        if ci == cj {
            intra += w;
        }
        k_out[ci] += w;
        k_in[cj] += w;
    }
    let kk = k_in.iter().zip(&k_out).map(|(&a, &b)| a * b).sum();
    (m, intra, kk)
}

/// Modularity by full summation; zero for an empty graph.
pub fn oracle_modularity<W: Weight>(g: &FlatGraph<W>, gamma: f64) -> f64 {
    let (m, w, k) = oracle_aggregates(g);
    let m = W::wide_to_f64(m);
    if m == 0.0 {
        return 0.0;
    }
    W::wide_to_f64(w) / m - gamma * W::wide_to_f64(k) / (m * m)
}

/// Ground members of every live node, found by walking up from each
/// ground node.
pub fn members<W: Weight>(g: &HierGraph<W>) -> HashMap<NodeId, Vec<NodeId>> {
    let mut out: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    for &v in g.ground_nodes() {
        let mut x = v;
        out.entry(x).or_default().push(v);
        loop {
            match (g.parent(x), g.community_ref(x)) {
                (Some(p), _) => x = p,
                (None, Some(c)) => x = c,
                (None, None) => break,
            }
            out.entry(x).or_default().push(v);
            if g.kind(x) == NodeKind::Community {
                break;
            }
        }
    }
    out
}

/// `w(u, v)` recomputed from the ground edges between the members of `u`
/// and `v`.
pub fn oracle_lifted_weight<W: Weight>(g: &HierGraph<W>, u: NodeId, v: NodeId) -> W {
    let all = members(g);
    let (mu, mv) = (all.get(&u).cloned().unwrap_or_default(), all.get(&v).cloned().unwrap_or_default());
    let mut total = W::ZERO;
    for &i in &mu {
        for &j in &mv {
            total += g.weight(i, j);
        }
    }
    total
}

/// Recomputes every stored lifted edge and degree sum from level 0 and
/// reports the first disagreement. A ground node with edges must reach
/// every level up to the top. Assumes a settled hierarchy.
pub fn check_lifting<W: Weight>(g: &HierGraph<W>) -> Result<(), String> {
    let mut chains: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    for &v in g.ground_nodes() {
        let mut chain = vec![v];
        let mut x = v;
        loop {
            match (g.parent(x), g.community_ref(x)) {
                (Some(p), _) => x = p,
                (None, Some(c)) => x = c,
                (None, None) => return Err(format!("{v} has no path to a community")),
            }
            chain.push(x);
            if g.kind(x) == NodeKind::Community {
                break;
            }
        }
        chains.insert(v, chain);
    }
    let top = g.max_level() as usize;
    let mut expected: HashMap<(NodeId, NodeId), W> = HashMap::new();
    let mut k_out: HashMap<NodeId, W> = HashMap::new();
    let mut k_in: HashMap<NodeId, W> = HashMap::new();
    for &i in g.ground_nodes() {
        for e in g.adjacency(i) {
            if e.out_w.is_zero() {
                continue;
            }
            let (ci, cj) = (&chains[&i], &chains[&e.neighbor]);
            if ci.len() != top + 2 || cj.len() != top + 2 {
                return Err(format!("edge {i} -> {} has an endpoint without a full chain", e.neighbor));
            }
            for (&a, &b) in ci.iter().zip(cj) {
                *expected.entry((a, b)).or_insert(W::ZERO) += e.out_w;
                *k_out.entry(a).or_insert(W::ZERO) += e.out_w;
                *k_in.entry(b).or_insert(W::ZERO) += e.out_w;
            }
        }
    }
    let near = |a: W, b: W| if W::EXACT { a == b } else { (a - b).is_zero() || (a - b).to_f64().abs() <= 1e-9 * a.to_f64().abs().max(1.0) };
    let mut stored = 0usize;
    for u in g.live_nodes() {
        for e in g.adjacency(u) {
            if e.out_w.is_zero() {
                continue;
            }
            stored += 1;
            let want = expected.get(&(u, e.neighbor)).copied().unwrap_or(W::ZERO);
            if !near(want, e.out_w) {
                return Err(format!("w({u}, {}) = {} but members sum to {want}", e.neighbor, e.out_w));
            }
        }
        let want_out = k_out.get(&u).copied().unwrap_or(W::ZERO);
        let want_in = k_in.get(&u).copied().unwrap_or(W::ZERO);
        if !near(want_out, g.k_out(u)) || !near(want_in, g.k_in(u)) {
            return Err(format!(
                "degrees of {u}: stored ({}, {}), expected ({want_in}, {want_out})",
                g.k_in(u),
                g.k_out(u)
            ));
        }
    }
    let nonzero = expected.values().filter(|w| !w.is_zero()).count();
    if nonzero != stored {
        return Err(format!("{nonzero} lifted edges expected, {stored} stored"));
    }
    Ok(())
}

/// Checks that the engine's reported partition is the one reached by raw
/// reference walks, and that every community node has members.
pub fn check_partition<W: Weight>(engine: &Engine<W>) -> Result<(), String> {
    let g = engine.graph();
    let flat = FlatGraph::from_engine(engine);
    let reported = engine.partition();
    for (i, (label, c)) in reported.iter().enumerate() {
        if flat.labels[i] != label || flat.membership[i] != c as usize {
            return Err(format!("label {label}: engine says {c}, walk says {}", flat.membership[i]));
        }
    }
    let populated = flat.num_communities();
    if populated != g.community_count() {
        return Err(format!("{} community nodes but {populated} populated communities", g.community_count()));
    }
    Ok(())
}

/// Best modularity over all partitions of a graph with at most 8 nodes,
/// together with a partition achieving it.
pub fn exhaustive_best<W: Weight>(g: &FlatGraph<W>, gamma: f64) -> (f64, Vec<usize>) {
    let n = g.len();
    assert!(n <= 8, "exhaustive search is limited to 8 nodes");
    let mut best = (f64::NEG_INFINITY, vec![0; n]);
    let mut rgs = vec![0usize; n];
    let mut work = g.clone();
    loop {
        work.membership.copy_from_slice(&rgs);
        let q = oracle_modularity(&work, gamma);
        if q > best.0 {
            best = (q, rgs.clone());
        }
        // next restricted growth string
        let mut i = n;
        loop {
            if i <= 1 {
                return best;
            }
            i -= 1;
            let max_prefix = rgs[..i].iter().copied().max().unwrap_or(0);
            if rgs[i] <= max_prefix {
                rgs[i] += 1;
                for r in rgs.iter_mut().skip(i + 1) {
                    *r = 0;
                }
                break;
            }
        }
    }
}

/// Sequential Leiden from the singleton partition: queue-based local
/// moving, refinement restricted to well-connected nodes, aggregation.
/// Rounds repeat until modularity stops improving.
pub fn reference_leiden<W: Weight>(g: &FlatGraph<W>, gamma: f64, seed: u64) -> FlatGraph<W> {
    let start: Vec<usize> = (0..g.len()).collect();
    reference_leiden_from(g, &start, gamma, seed)
}

/// [`reference_leiden`] starting from a given partition.
pub fn reference_leiden_from<W: Weight>(g: &FlatGraph<W>, start: &[usize], gamma: f64, seed: u64) -> FlatGraph<W> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = Agg::from_flat(g);
    if base.m <= 0.0 {
        return g.clone().with_membership(&(0..g.len()).collect::<Vec<_>>());
    }
    let mut membership = dense(start);
    let mut quality = base.quality(&membership, gamma);
    for _ in 0..32 {
        let next = leiden_round(&base, &membership, gamma, &mut rng);
        let q = base.quality(&next, gamma);
        if q <= quality + 1e-12 {
            if q >= quality {
                membership = next;
            }
            break;
        }
        membership = next;
        quality = q;
    }
    g.clone().with_membership(&membership)
}

/// One full Leiden pass (local moves, refinement and aggregation until
/// the aggregate stops shrinking), returning a membership on `base`.
fn leiden_round(base: &Agg, start: &[usize], gamma: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut graph = base.clone();
    // node of the current aggregate that each base node belongs to
    let mut owner: Vec<usize> = (0..base.n).collect();
    let mut part = start.to_vec();
    loop {
        local_move(&graph, &mut part, gamma, rng);
        let comms = compact(&mut part);
        if comms == graph.n {
            break;
        }
        let refined = refine(&graph, &part, gamma, rng);
        let (agg, map) = graph.aggregate(&refined);
        let mut next_part = vec![0; agg.n];
        for v in 0..graph.n {
            next_part[map[v]] = part[v];
        }
        for o in owner.iter_mut() {
            *o = map[*o];
        }
        graph = agg;
        part = next_part;
    }
    owner.iter().map(|&o| part[o]).collect()
}

fn compact(part: &mut [usize]) -> usize {
    let d = dense(part);
    part.copy_from_slice(&d);
    part.iter().copied().max().map_or(0, |c| c + 1)
}

/// Weighted directed graph with self-loops, in `f64`.
#[derive(Clone, Debug)]
struct Agg {
    n: usize,
    /// `(neighbour, w(u, v), w(v, u))`, self-loops excluded.
    adj: Vec<Vec<(usize, f64, f64)>>,
    self_w: Vec<f64>,
    k_in: Vec<f64>,
    k_out: Vec<f64>,
    m: f64,
}

impl Agg {
    fn from_flat<W: Weight>(g: &FlatGraph<W>) -> Self {
        let edges: Vec<(usize, usize, f64)> = g.edges().map(|(i, j, w)| (i, j, w.to_f64())).collect();
        Agg::from_edges(g.len(), &edges)
    }

    fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut maps: Vec<HashMap<usize, (f64, f64)>> = vec![HashMap::new(); n];
        let mut self_w = vec![0.0; n];
        let mut k_in = vec![0.0; n];
        let mut k_out = vec![0.0; n];
        let mut m = 0.0;
        for &(i, j, w) in edges {
            m += w;
            k_out[i] += w;
            k_in[j] += w;
            if i == j {
                self_w[i] += w;
            } else {
                maps[i].entry(j).or_default().0 += w;
                maps[j].entry(i).or_default().1 += w;
            }
        }
        let adj = maps
            .into_iter()
            .map(|mp| {
                let mut l: Vec<(usize, f64, f64)> = mp.into_iter().map(|(j, (o, i))| (j, o, i)).collect();
                l.sort_by_key(|e| e.0);
                l
            })
            .collect();
        Agg { n, adj, self_w, k_in, k_out, m }
    }

    fn quality(&self, part: &[usize], gamma: f64) -> f64 {
        let k = part.iter().copied().max().map_or(0, |c| c + 1);
        let mut intra = 0.0;
        let (mut kin, mut kout) = (vec![0.0; k], vec![0.0; k]);
        for u in 0..self.n {
            intra += self.self_w[u];
            kin[part[u]] += self.k_in[u];
            kout[part[u]] += self.k_out[u];
            for &(v, w, _) in &self.adj[u] {
                if part[u] == part[v] {
                    intra += w;
                }
            }
        }
        let null: f64 = kin.iter().zip(&kout).map(|(a, b)| a * b).sum();
        intra / self.m - gamma * null / (self.m * self.m)
    }

    /// Gain of moving `u` from group totals `from` (which include `u`) to
    /// `to`, given its two-way weights towards both.
    fn gain(&self, u: usize, d_from: f64, d_to: f64, from: (f64, f64), to: (f64, f64), gamma: f64) -> f64 {
        let (ki, ko) = (self.k_in[u], self.k_out[u]);
        let before = from.0 * from.1 + to.0 * to.1;
        let after = (from.0 - ki) * (from.1 - ko) + (to.0 + ki) * (to.1 + ko);
        (d_to - d_from) / self.m - gamma * (after - before) / (self.m * self.m)
    }

    fn aggregate(&self, part: &[usize]) -> (Agg, Vec<usize>) {
        let map = dense(part);
        let n = map.iter().copied().max().map_or(0, |c| c + 1);
        let mut edges = Vec::new();
        for u in 0..self.n {
            if self.self_w[u] != 0.0 {
                edges.push((map[u], map[u], self.self_w[u]));
            }
            for &(v, w, _) in &self.adj[u] {
                if w != 0.0 {
                    edges.push((map[u], map[v], w));
                }
            }
        }
        (Agg::from_edges(n, &edges), map)
    }
}

fn local_move(g: &Agg, part: &mut [usize], gamma: f64, rng: &mut ChaCha8Rng) {
    let slots = g.n + 1;
    // group ids may grow up to n new singletons
    let mut tin = vec![0.0; slots + g.n];
    let mut tout = vec![0.0; slots + g.n];
    let mut size = vec![0usize; slots + g.n];
    for u in 0..g.n {
        tin[part[u]] += g.k_in[u];
        tout[part[u]] += g.k_out[u];
        size[part[u]] += 1;
    }
    let mut empty: Vec<usize> = (0..slots + g.n).filter(|&c| size[c] == 0).rev().collect();
    let mut order: Vec<usize> = (0..g.n).collect();
    order.shuffle(rng);
    let mut queued = vec![true; g.n];
    let mut queue: std::collections::VecDeque<usize> = order.into();
    let mut d: HashMap<usize, f64> = HashMap::new();
    while let Some(u) = queue.pop_front() {
        queued[u] = false;
        let cu = part[u];
        d.clear();
        for &(v, o, i) in &g.adj[u] {
            *d.entry(part[v]).or_default() += o + i;
        }
        let d_from = d.get(&cu).copied().unwrap_or(0.0);
        let from = (tin[cu], tout[cu]);
        let mut best = (0.0, cu);
        let mut cands: Vec<(usize, f64)> = d.iter().map(|(&c, &w)| (c, w)).collect();
        cands.sort_by_key(|e| e.0);
        for (c, w) in cands {
            if c == cu {
                continue;
            }
            let r = g.gain(u, d_from, w, from, (tin[c], tout[c]), gamma);
            if r > best.0 + 1e-15 {
                best = (r, c);
            }
        }
        if size[cu] > 1 {
            let r = g.gain(u, d_from, 0.0, from, (0.0, 0.0), gamma);
            if r > best.0 + 1e-15 {
                let c = *empty.last().expect("free group");
                best = (r, c);
            }
        }
        let (_, target) = best;
        if target == cu {
            continue;
        }
        if size[target] == 0 {
            empty.pop();
        }
        tin[cu] -= g.k_in[u];
        tout[cu] -= g.k_out[u];
        size[cu] -= 1;
        if size[cu] == 0 {
            empty.push(cu);
        }
        tin[target] += g.k_in[u];
        tout[target] += g.k_out[u];
        size[target] += 1;
        part[u] = target;
        for &(v, _, _) in &g.adj[u] {
            if !queued[v] && part[v] != target {
                queued[v] = true;
                queue.push_back(v);
            }
        }
    }
}

/// Greedy refinement: inside each community, singleton nodes that are
/// well connected to it merge into the best well-connected subgroup.
fn refine(g: &Agg, part: &[usize], gamma: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let k = part.iter().copied().max().map_or(0, |c| c + 1);
    let (mut cin, mut cout) = (vec![0.0; k], vec![0.0; k]);
    for u in 0..g.n {
        cin[part[u]] += g.k_in[u];
        cout[part[u]] += g.k_out[u];
    }
    // two-way weight from u to the rest of its community
    let ext_node: Vec<f64> = (0..g.n)
        .map(|u| g.adj[u].iter().filter(|e| part[e.0] == part[u]).map(|e| e.1 + e.2).sum())
        .collect();
    let mut sub: Vec<usize> = (0..g.n).collect();
    let mut sin = g.k_in.clone();
    let mut sout = g.k_out.clone();
    let mut ssize = vec![1usize; g.n];
    let mut sext = ext_node.clone();
    let connected = |ext: f64, kin: f64, kout: f64, c: usize, cin: &[f64], cout: &[f64]| {
        ext + 1e-12 >= gamma * (kin * (cout[c] - kout) + kout * (cin[c] - kin)) / g.m
    };
    let mut order: Vec<usize> = (0..g.n).collect();
    order.shuffle(rng);
    let mut d: HashMap<usize, f64> = HashMap::new();
    for u in order {
        let c = part[u];
        if ssize[sub[u]] != 1 || !connected(ext_node[u], g.k_in[u], g.k_out[u], c, &cin, &cout) {
            continue;
        }
        d.clear();
        for &(v, o, i) in &g.adj[u] {
            if part[v] == c {
                *d.entry(sub[v]).or_default() += o + i;
            }
        }
        let own = sub[u];
        let mut best = (0.0, own);
        let mut cands: Vec<(usize, f64)> = d.iter().map(|(&s, &w)| (s, w)).collect();
        cands.sort_by_key(|e| e.0);
        for (s, w) in cands {
            if s == own || !connected(sext[s], sin[s], sout[s], c, &cin, &cout) {
                continue;
            }
            let r = g.gain(u, 0.0, w, (sin[own], sout[own]), (sin[s], sout[s]), gamma);
            if r >= best.0 && (r > best.0 || best.1 == own) && r >= 0.0 {
                best = (r, s);
            }
        }
        let (_, s) = best;
        if s == own {
            continue;
        }
        let w_to = d[&s];
        sext[s] += ext_node[u] - 2.0 * w_to;
        sin[s] += g.k_in[u];
        sout[s] += g.k_out[u];
        ssize[s] += 1;
        ssize[own] = 0;
        sub[u] = s;
    }
    sub
}
