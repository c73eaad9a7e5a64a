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

//! Helpers shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use ldleiden::synth::random_stream;
use ldleiden::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Engine state after feeding a seeded random stream.
pub fn streamed_engine(seed: u64, nodes: u64, batches: usize, params: Params) -> Engine<i64> {
    let mut e = Engine::new(params).unwrap();
    for b in random_stream(nodes, batches, 3 * nodes as usize / 2, seed.is_multiple_of(2), seed) {
        e.step(&b).unwrap();
    }
    e
}

pub fn params_with(levels: u8, decouple: DecouplePolicy) -> Params {
    Params { levels, decouple, ..Params::default() }
}

pub fn nodes_at_level<W: Weight>(g: &HierGraph<W>, level: u8) -> Vec<NodeId> {
    g.live_nodes().filter(|&v| g.level(v) == level).collect()
}

/// Nodes within `r` hops of `seeds` over same-level adjacency.
pub fn ball<W: Weight>(g: &HierGraph<W>, seeds: &[NodeId], r: usize) -> BTreeSet<NodeId> {
    let mut seen: BTreeSet<NodeId> = seeds.iter().copied().collect();
    let mut layer: Vec<NodeId> = seeds.to_vec();
    for _ in 0..r {
        let mut next = Vec::new();
        for &x in &layer {
            for y in g.neighbors(x) {
                if seen.insert(y) {
                    next.push(y);
                }
            }
        }
        layer = next;
    }
    seen
}

/// Ground label to community node.
pub fn community_labels<W: Weight>(g: &HierGraph<W>) -> BTreeMap<u64, NodeId> {
    g.ground_nodes()
        .iter()
        .map(|&v| (g.label(v).unwrap(), g.resolve_community(v).unwrap()))
        .collect()
}

/// Every live node's adjacency, degrees and links, plus the aggregates.
#[derive(Debug, PartialEq)]
pub struct Snapshot<W: Weight> {
    pub nodes: BTreeMap<NodeId, NodeState<W>>,
    pub aggregates: Aggregates<W>,
}

#[derive(Debug, PartialEq)]
pub struct NodeState<W> {
    pub adjacency: Vec<Entry<W>>,
    pub k_in: W,
    pub k_out: W,
    pub parent: Option<NodeId>,
    pub community: Option<NodeId>,
}

pub fn snapshot<W: Weight>(g: &HierGraph<W>) -> Snapshot<W> {
    let nodes = g
        .live_nodes()
        .map(|v| {
            let state = NodeState {
                adjacency: g.adjacency(v).to_vec(),
                k_in: g.k_in(v),
                k_out: g.k_out(v),
                parent: g.parent(v),
                community: g.community_ref(v),
            };
            (v, state)
        })
        .collect();
    Snapshot { nodes, aggregates: g.aggregates() }
}

/// Full consistency check against the flat oracle; exact for integers.
pub fn assert_consistent(e: &Engine<i64>) {
    let flat = oracle::FlatGraph::from_engine(e);
    let (m, w, k) = oracle::oracle_aggregates(&flat);
    let agg = e.graph().aggregates();
    assert_eq!((agg.m, agg.w, agg.k), (m, w, k));
    assert_eq!(e.modularity(), oracle::oracle_modularity(&flat, e.params().gamma));
    oracle::check_lifting(e.graph()).unwrap();
    oracle::check_partition(e).unwrap();
    e.graph().check_structure().unwrap();
}

/// A random valid batch against the current state: partial deletions of
/// present ground edges mixed with insertions among `labels` labels, some
/// of which may be new.
pub fn perturbation(e: &Engine<i64>, rng: &mut ChaCha8Rng, ops: usize, labels: u64) -> BatchUpdate<i64> {
    let g = e.graph();
    let mut present: Vec<(u64, u64, i64)> = Vec::new();
    for &v in g.ground_nodes() {
        for en in g.adjacency(v) {
            if en.out_w > 0 {
                present.push((g.label(v).unwrap(), g.label(en.neighbor).unwrap(), en.out_w));
            }
        }
    }
    let mut batch = BatchUpdate::new();
    for _ in 0..ops {
        if !present.is_empty() && rng.gen_bool(0.4) {
            let (a, b, w) = present.swap_remove(rng.gen_range(0..present.len()));
            batch.push(a, b, -rng.gen_range(1..=w));
        } else {
            let a = rng.gen_range(0..labels);
            let b = if rng.gen_bool(0.05) { a } else { rng.gen_range(0..labels) };
            batch.push(a, b, rng.gen_range(1..=3));
        }
    }
    batch
}

/// `k` distinct random picks from `pool`.
pub fn sample(rng: &mut ChaCha8Rng, pool: &[NodeId], k: usize) -> Vec<NodeId> {
    let mut pool = pool.to_vec();
    let k = k.min(pool.len());
    for i in 0..k {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool.sort_unstable();
    pool
}
